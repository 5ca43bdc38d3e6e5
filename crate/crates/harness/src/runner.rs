//! Experiment configuration, administration plans and the resumable worker
//! pool that drives a gateway into the results log.

use std::collections::HashSet;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::{mpsc, Arc};

use serde::{Deserialize, Serialize};
use synthpersona_core::prompts::{PersonaOrder, PromptError, PromptTables, ShapingMode, SimulatedResponseProfile};
use synthpersona_core::scoring::{MissingPolicy, ResponseRecord};
use synthpersona_core::{builtin, Catalog, Instrument};

use crate::gateway::{BackendDescriptor, BackendKind, ChoiceQuery, Gateway, GatewayError, GenerationRequest};
use crate::log::{self, GenerationRecord, LogEntry, LogError, LogWriter, PredictionRecord};
use crate::mock::{MockBackend, MockConfig, UPDATE_DELIMITER};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    #[default]
    ConstructValidity,
    SingleShaping,
    MultiShaping,
    Downstream,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 4] =
        [Self::ConstructValidity, Self::SingleShaping, Self::MultiShaping, Self::Downstream];

    pub fn name(self) -> &'static str {
        match self {
            Self::ConstructValidity => "construct-validity",
            Self::SingleShaping => "single-shaping",
            Self::MultiShaping => "multi-shaping",
            Self::Downstream => "downstream",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == s)
    }

    pub fn shaping_mode(self) -> Option<ShapingMode> {
        match self {
            Self::SingleShaping | Self::Downstream => Some(ShapingMode::Single),
            Self::MultiShaping => Some(ShapingMode::Multi),
            Self::ConstructValidity => None,
        }
    }
}

impl std::fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Size of the unshaped profile grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProfileGrid {
    pub descriptions: usize,
    pub instructions: usize,
    pub postambles: usize,
}

impl Default for ProfileGrid {
    fn default() -> Self {
        Self { descriptions: 50, instructions: 5, postambles: 5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenerationParams {
    pub repeats: u32,
    pub updates: usize,
    pub max_tokens: u32,
    pub temperature: f64,
}

impl Default for GenerationParams {
    fn default() -> Self {
        Self { repeats: 25, updates: 20, max_tokens: 2048, temperature: 0.7 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    /// Instrument ids; empty means the kind's default set.
    pub instruments: Vec<String>,
    pub backend: BackendDescriptor,
    pub mock: MockConfig,
    pub seed: u64,
    pub width: usize,
    pub out_dir: PathBuf,
    /// Directory of bank files and `criteria.toml` replacing the built-in battery.
    pub bank_dir: Option<PathBuf>,
    pub profiles: ProfileGrid,
    pub missing: MissingPolicy,
    /// Records per fsync.
    pub sync_every: usize,
    pub generation: Option<GenerationParams>,
    /// Text-personality predictor; required for downstream runs.
    pub predictor: Option<BackendDescriptor>,
    /// Survey score matrix joined with text predictions.
    pub survey_scores: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            kind: ExperimentKind::default(),
            instruments: Vec::new(),
            backend: BackendDescriptor::default(),
            mock: MockConfig::default(),
            seed: 2024,
            width: 16,
            out_dir: PathBuf::from("out"),
            bank_dir: None,
            profiles: ProfileGrid::default(),
            missing: MissingPolicy::default(),
            sync_every: 4096,
            generation: None,
            predictor: None,
            survey_scores: None,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error(transparent)]
    Catalog(#[from] synthpersona_core::catalog::CatalogError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Log(#[from] LogError),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error("{0}")]
    Io(String),
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, RunError> {
        toml::from_str(text).map_err(|e| RunError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, RunError> {
        let text = std::fs::read_to_string(path).map_err(|e| RunError::Io(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<(), RunError> {
        if self.width == 0 {
            return Err(RunError::Config("width must be at least 1".into()));
        }
        if self.backend.kind != BackendKind::Mock && self.backend.endpoint.is_none() {
            return Err(RunError::Config(format!("backend {} needs an endpoint", self.backend.id)));
        }
        if self.kind == ExperimentKind::Downstream {
            if self.generation.is_none() {
                return Err(RunError::Config("downstream runs need [generation] parameters".into()));
            }
            match &self.predictor {
                None => return Err(RunError::Config("downstream runs need a [predictor]".into())),
                Some(p) if p.kind != BackendKind::Mock && p.endpoint.is_none() => {
                    return Err(RunError::Config(format!("predictor {} needs an endpoint", p.id)))
                }
                _ => {}
            }
        }
        Ok(())
    }

    pub fn mock_config(&self) -> MockConfig {
        MockConfig { seed: self.seed, ..self.mock.clone() }
    }

    pub fn dir(&self, sub: &str) -> PathBuf {
        self.out_dir.join(sub)
    }

    pub fn log_path(&self) -> PathBuf {
        self.dir("logs").join(format!("{}.jsonl", self.kind))
    }

    pub fn scores_path(&self) -> PathBuf {
        self.dir("scores").join(format!("{}.tsv", self.kind))
    }

    pub fn report_dir(&self) -> PathBuf {
        self.dir("reports").join(self.kind.name())
    }

    pub fn prompts_path(&self) -> PathBuf {
        self.dir("prompts").join(format!("{}.jsonl", self.kind))
    }

    /// Survey scores for the downstream join; defaults to the single-shaping
    /// score file in the same output directory.
    pub fn survey_scores_path(&self) -> PathBuf {
        self.survey_scores
            .clone()
            .unwrap_or_else(|| self.dir("scores").join(format!("{}.tsv", ExperimentKind::SingleShaping)))
    }
}

/// Catalog, prompt tables and gateways shared by every stage of a run.
pub struct Context {
    pub config: ExperimentConfig,
    pub catalog: Arc<Catalog>,
    pub tables: PromptTables,
    pub gateway: Gateway,
    pub predictor: Option<Gateway>,
}

fn make_gateway(desc: &BackendDescriptor, config: &ExperimentConfig, catalog: &Arc<Catalog>) -> Result<Gateway, RunError> {
    Ok(match desc.kind {
        BackendKind::Mock => Gateway::mock(desc.clone(), MockBackend::new(config.mock_config(), catalog.clone())),
        _ => Gateway::http(desc.clone())?,
    })
}

impl Context {
    pub fn new(config: ExperimentConfig) -> Result<Self, RunError> {
        config.validate()?;
        let catalog = Arc::new(match &config.bank_dir {
            Some(dir) => Catalog::load_dir(dir)?,
            None => builtin::battery(),
        });
        let tables = builtin::prompt_tables();
        let gateway = make_gateway(&config.backend, &config, &catalog)?;
        let predictor = config.predictor.as_ref().map(|p| make_gateway(p, &config, &catalog)).transpose()?;
        Ok(Self { config, catalog, tables, gateway, predictor })
    }

    /// Replaces the backoff sleep of both gateways.
    pub fn with_sleep(mut self, sleep: fn(std::time::Duration)) -> Self {
        self.gateway = self.gateway.with_sleep(sleep);
        self.predictor = self.predictor.map(|p| p.with_sleep(sleep));
        self
    }

    pub fn plan(&self) -> Result<Plan, RunError> {
        Plan::build(&self.config, &self.catalog, &self.tables)
    }
}

/// One unit of work.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Task {
    Item { profile: u32, instrument: u16, item: u16 },
    Generate { profile: u32, repeat: u32 },
}

/// Every record a run must produce, in a fixed order.
#[derive(Debug, Clone)]
pub struct Plan {
    pub kind: ExperimentKind,
    pub backend: String,
    pub profiles: Vec<SimulatedResponseProfile>,
    pub instruments: Vec<String>,
    pub tasks: Vec<Task>,
}

pub fn default_instruments(kind: ExperimentKind, catalog: &Catalog) -> Vec<String> {
    match kind {
        ExperimentKind::ConstructValidity => catalog.instruments().map(|i| i.id().to_string()).collect(),
        ExperimentKind::SingleShaping | ExperimentKind::MultiShaping => vec!["IPIP-NEO".into()],
        ExperimentKind::Downstream => Vec::new(),
    }
}

impl Plan {
    pub fn build(config: &ExperimentConfig, catalog: &Catalog, tables: &PromptTables) -> Result<Self, RunError> {
        let profiles = match config.kind.shaping_mode() {
            Some(mode) => tables.generate_shaping_profiles(mode),
            None => {
                let g = config.profiles;
                tables.generate_profile_matrix(g.descriptions, g.instructions, g.postambles)?
            }
        };
        let mut tasks = Vec::new();
        let mut instruments = Vec::new();
        if config.kind == ExperimentKind::Downstream {
            let repeats = config.generation.as_ref().map_or(0, |g| g.repeats);
            for p in 0..profiles.len() as u32 {
                tasks.extend((0..repeats).map(|repeat| Task::Generate { profile: p, repeat }));
            }
        } else {
            instruments =
                if config.instruments.is_empty() { default_instruments(config.kind, catalog) } else { config.instruments.clone() };
            let insts: Vec<&Instrument> = instruments.iter().map(|id| catalog.instrument(id)).collect::<Result<_, _>>()?;
            let variants: std::collections::BTreeSet<u8> = profiles.iter().map(|p| p.postamble_variant).collect();
            for inst in &insts {
                for &v in &variants {
                    tables.postamble(inst.id(), v)?;
                }
            }
            for p in 0..profiles.len() as u32 {
                for (ii, inst) in insts.iter().enumerate() {
                    tasks.extend(
                        (0..inst.items().len()).map(|item| Task::Item { profile: p, instrument: ii as u16, item: item as u16 }),
                    );
                }
            }
        }
        Ok(Self { kind: config.kind, backend: config.backend.id.clone(), profiles, instruments, tasks })
    }

    pub fn len(&self) -> usize {
        self.tasks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tasks.is_empty()
    }

    pub fn key(&self, task: Task, catalog: &Catalog) -> String {
        match task {
            Task::Item { profile, instrument, item } => {
                let inst = catalog.instrument(&self.instruments[instrument as usize]).expect("plan instruments resolve");
                log::response_key(
                    &self.profiles[profile as usize].profile_id,
                    inst.id(),
                    &inst.items()[item as usize].item_id,
                    &self.backend,
                )
            }
            Task::Generate { profile, repeat } => {
                log::generation_key(&self.profiles[profile as usize].profile_id, repeat, &self.backend)
            }
        }
    }

    /// Plan keys absent from `present`, in plan order.
    pub fn missing_keys(&self, catalog: &Catalog, present: &HashSet<&str>) -> Vec<String> {
        self.tasks.iter().map(|&t| self.key(t, catalog)).filter(|k| !present.contains(k.as_str())).collect()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RunSummary {
    pub planned: usize,
    /// Already in the log when the run started.
    pub resumed: usize,
    pub written: usize,
    /// Written as missing after exhausting retries.
    pub missing: usize,
}

/// Stops a run early, as if the process died after `n` new records.
#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    pub stop_after: Option<usize>,
}

fn run_item(ctx: &Context, plan: &Plan, profile: u32, instrument: u16, item: u16) -> Result<LogEntry, RunError> {
    let profile = &plan.profiles[profile as usize];
    let inst = ctx.catalog.instrument(&plan.instruments[instrument as usize])?;
    let item = &inst.items()[item as usize];
    let spec = ctx.tables.admin_prompt_for(profile, inst, item)?;
    let scale = inst.scale_options();
    let query = ChoiceQuery {
        prompt: spec.text,
        options: scale.iter().map(|(v, _)| v.to_string()).collect(),
        labels: scale.iter().map(|(_, l)| l.to_string()).collect(),
        profile_id: profile.profile_id.clone(),
        instrument_id: inst.id().to_string(),
        item_id: item.item_id.clone(),
    };
    let backend = ctx.gateway.backend_id();
    let key = log::response_key(&profile.profile_id, inst.id(), &item.item_id, backend);
    let record = match ctx.gateway.rank_choices(&query, &key) {
        Ok(r) => {
            let mut rec = ResponseRecord::answered(&profile.profile_id, inst.id(), &item.item_id, r.chosen, backend);
            rec.flags.tie_break = r.tie_break;
            rec.flags.retried = r.retries > 0;
            rec
        }
        Err(e) if e.is_recoverable() => {
            ::log::warn!("{key}: {e}; recording a missing response");
            let mut rec = ResponseRecord::missing(&profile.profile_id, inst.id(), &item.item_id, backend);
            rec.flags.retried = true;
            rec
        }
        Err(e) => return Err(e.into()),
    };
    Ok(LogEntry::response(record))
}

fn run_generation(ctx: &Context, plan: &Plan, profile: u32, repeat: u32) -> Result<LogEntry, RunError> {
    let profile = &plan.profiles[profile as usize];
    let params = ctx.config.generation.clone().unwrap_or_default();
    let prompt = ctx.tables.build_downstream_prompt(profile, params.updates, PersonaOrder::TraitsFirst)?;
    let request = GenerationRequest {
        prompt,
        profile_id: profile.profile_id.clone(),
        repeat,
        max_tokens: params.max_tokens,
        temperature: params.temperature,
        seed: ctx.config.seed.wrapping_add(u64::from(repeat)),
    };
    let backend = ctx.gateway.backend_id();
    let key = log::generation_key(&profile.profile_id, repeat, backend);
    let (text, retries) = match ctx.gateway.generate_text(&request, &key) {
        Ok((t, r)) => (Some(t), r),
        Err(e) if e.is_recoverable() || e == GatewayError::EmptyCompletion => {
            ::log::warn!("{key}: {e}; recording a missing generation");
            (None, ctx.gateway.descriptor().retry.max_attempts)
        }
        Err(e) => return Err(e.into()),
    };
    Ok(LogEntry::generation(GenerationRecord {
        profile_id: profile.profile_id.clone(),
        repeat,
        backend: backend.to_string(),
        text,
        retries,
    }))
}

/// Runs `work` over `items` on `width` threads, skipping items whose key is
/// in `done`, and streams results to the single writer.
fn pool<T: Sync>(
    items: &[T],
    width: usize,
    done: &HashSet<String>,
    key: impl Fn(&T) -> String + Sync,
    work: impl Fn(&T) -> Result<LogEntry, RunError> + Sync,
    writer: &mut LogWriter,
    options: RunOptions,
) -> Result<(usize, usize), RunError> {
    let next = AtomicUsize::new(0);
    let abort = AtomicBool::new(false);
    let (tx, rx) = mpsc::sync_channel::<Result<LogEntry, RunError>>(4 * 1024);
    std::thread::scope(|s| {
        for _ in 0..width {
            let tx = tx.clone();
            let (next, abort, key, work) = (&next, &abort, &key, &work);
            s.spawn(move || loop {
                if abort.load(Ordering::Relaxed) {
                    break;
                }
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(item) = items.get(i) else { break };
                if done.contains(&key(item)) {
                    continue;
                }
                let result = work(item);
                let failed = result.is_err();
                if tx.send(result).is_err() || failed {
                    break;
                }
            });
        }
        drop(tx);
        let mut written = 0;
        let mut missing = 0;
        let mut error: Option<RunError> = None;
        let mut stopped = false;
        for result in rx {
            if error.is_some() || stopped {
                continue;
            }
            match result {
                Ok(entry) => {
                    let is_missing = entry.response.as_ref().is_some_and(|r| r.flags.missing)
                        || entry.generation.as_ref().is_some_and(|g| g.text.is_none())
                        || entry.prediction.as_ref().is_some_and(|p| p.scores.is_none());
                    if let Err(e) = writer.append(&entry) {
                        error = Some(e.into());
                        abort.store(true, Ordering::Relaxed);
                        continue;
                    }
                    written += 1;
                    missing += usize::from(is_missing);
                    if options.stop_after.is_some_and(|n| written >= n) {
                        abort.store(true, Ordering::Relaxed);
                        stopped = true;
                    }
                }
                Err(e) => {
                    abort.store(true, Ordering::Relaxed);
                    error = Some(e);
                }
            }
        }
        writer.sync()?;
        match error {
            Some(e) => Err(e),
            None => Ok((written, missing)),
        }
    })
}

/// Executes the plan into the log, resuming from whatever the log already
/// holds. Downstream runs also request one prediction per profile once its
/// generations are complete.
pub fn run(ctx: &Context, options: RunOptions) -> Result<RunSummary, RunError> {
    let plan = ctx.plan()?;
    let (mut writer, prior) = LogWriter::resume(&ctx.config.log_path(), ctx.config.sync_every)?;
    let done: HashSet<String> = prior.entries.iter().map(|e| e.key.clone()).collect();
    drop(prior);
    let mut summary = RunSummary { planned: plan.len(), resumed: 0, ..RunSummary::default() };
    summary.resumed = plan.tasks.iter().filter(|&&t| done.contains(&plan.key(t, &ctx.catalog))).count();
    let width = ctx.config.width;
    let (written, missing) = pool(
        &plan.tasks,
        width,
        &done,
        |&t| plan.key(t, &ctx.catalog),
        |&t| match t {
            Task::Item { profile, instrument, item } => run_item(ctx, &plan, profile, instrument, item),
            Task::Generate { profile, repeat } => run_generation(ctx, &plan, profile, repeat),
        },
        &mut writer,
        options,
    )?;
    summary.written = written;
    summary.missing = missing;
    let stopped = options.stop_after.is_some_and(|n| written >= n);
    if plan.kind == ExperimentKind::Downstream && !stopped {
        let remaining = RunOptions { stop_after: options.stop_after.map(|n| n - written) };
        let (w, m) = run_predictions(ctx, &plan, &mut writer, remaining)?;
        summary.written += w;
        summary.missing += m;
    }
    writer.finish()?;
    Ok(summary)
}

/// Concatenated generations of one profile in repeat order.
pub fn profile_corpus<'g>(generations: impl Iterator<Item = &'g GenerationRecord>) -> String {
    let mut texts: Vec<(u32, &str)> = generations.filter_map(|g| g.text.as_deref().map(|t| (g.repeat, t))).collect();
    texts.sort_by_key(|(r, _)| *r);
    let sep = format!(" {UPDATE_DELIMITER} ");
    texts.into_iter().map(|(_, t)| t).collect::<Vec<_>>().join(&sep)
}

fn run_predictions(
    ctx: &Context,
    plan: &Plan,
    writer: &mut LogWriter,
    options: RunOptions,
) -> Result<(usize, usize), RunError> {
    let predictor = ctx.predictor.as_ref().ok_or_else(|| RunError::Config("no predictor configured".into()))?;
    let contents = log::read_log(&ctx.config.log_path())?;
    let done: HashSet<String> = contents.entries.iter().map(|e| e.key.clone()).collect();
    let mut by_profile: std::collections::HashMap<&str, Vec<&GenerationRecord>> = Default::default();
    for g in contents.generations() {
        by_profile.entry(g.profile_id.as_str()).or_default().push(g);
    }
    let predictor_id = predictor.backend_id().to_string();
    pool(
        &plan.profiles,
        ctx.config.width,
        &done,
        |p| log::prediction_key(&p.profile_id, &predictor_id),
        |p| {
            let corpus = profile_corpus(by_profile.get(p.profile_id.as_str()).into_iter().flatten().copied());
            let key = log::prediction_key(&p.profile_id, &predictor_id);
            let (scores, error) = match predictor.predict_personality(&p.profile_id, &corpus, &key) {
                Ok((s, _)) => (Some(s), None),
                Err(e) if e.is_recoverable() || matches!(e, GatewayError::Rejected(_)) => (None, Some(e.to_string())),
                Err(e) => return Err(e.into()),
            };
            Ok(LogEntry::prediction(PredictionRecord {
                profile_id: p.profile_id.clone(),
                predictor: predictor_id.clone(),
                scores,
                error,
            }))
        },
        writer,
        options,
    )
}
