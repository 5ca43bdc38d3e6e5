//! Turns a complete results log into a report bundle.

use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};
use synthpersona_core::catalog::column_label;
use synthpersona_core::prompts::ShapingMode;
use synthpersona_core::psychometrics::{
    self as psy, Bartlett, CriterionReport, ItemMatrix, Mtmm, PsychometricError, ReliabilityReport, ShapingEfficacy,
};
use synthpersona_core::scoring::{score_table, ResponseRecord, ResponseTable, ScoreMatrix, ScoringError};
use synthpersona_core::stats::{self, CorrelationResult, StatsError};
use synthpersona_core::{Domain, Instrument};

use crate::downstream::{default_stopwords, word_frequencies};
use crate::log::{read_log, LogContents, LogError};
use crate::runner::{profile_corpus, Context, ExperimentKind, Plan, RunError};

pub const PRIMARY: &str = "IPIP-NEO";
pub const SECONDARY: &str = "BFI";
const LISTED_MISSING: usize = 20;
const TOP_WORDS: usize = 15;

#[derive(Debug, thiserror::Error)]
pub enum AnalysisError {
    #[error("log is incomplete: {total} of {planned} planned records missing ({})", list(.sample, *.total))]
    Incomplete { planned: usize, total: usize, sample: Vec<String> },
    #[error(transparent)]
    Log(#[from] LogError),
    #[error(transparent)]
    Run(#[from] RunError),
    #[error(transparent)]
    Scoring(#[from] ScoringError),
    #[error("{context}: {source}")]
    Psychometric { context: String, source: PsychometricError },
    #[error("{0}")]
    Input(String),
}

fn list(sample: &[String], total: usize) -> String {
    let mut s = sample.join(", ");
    if total > sample.len() {
        s += &format!(", and {} more", total - sample.len());
    }
    s
}

fn psy_err(context: impl Into<String>) -> impl FnOnce(PsychometricError) -> AnalysisError {
    let context = context.into();
    move |source| AnalysisError::Psychometric { context, source }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstrumentReliability {
    pub instrument: String,
    pub subscales: Vec<ReliabilityReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructureCheck {
    pub instrument: String,
    pub subscale: String,
    pub bartlett: Bartlett,
    pub kmo: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstructBundle {
    pub backend: String,
    pub profiles: usize,
    pub records: usize,
    pub missing_records: usize,
    /// Rows dropped per score column under the missing-response policy.
    pub excluded: BTreeMap<String, usize>,
    pub reliability: Vec<InstrumentReliability>,
    pub mtmm: Option<Mtmm>,
    pub criterion: Option<CriterionReport>,
    pub structure: Vec<StructureCheck>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainShaping {
    pub domain: Domain,
    pub efficacy: ShapingEfficacy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapingBundle {
    pub mode: ShapingMode,
    pub backend: String,
    pub profiles: usize,
    pub records: usize,
    pub missing_records: usize,
    pub domains: Vec<DomainShaping>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainConvergence {
    pub domain: Domain,
    /// Survey score against text-predicted score over all profiles.
    pub survey_vs_text: Option<CorrelationResult>,
    /// Spearman ρ of prompted level against text-predicted score over the
    /// profiles shaped on this domain.
    pub level_vs_text: CorrelationResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WordList {
    pub domain: Domain,
    pub level: u8,
    pub words: Vec<(String, usize)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DownstreamBundle {
    pub backend: String,
    pub predictor: String,
    pub profiles: usize,
    pub generations: usize,
    pub missing_generations: usize,
    pub predictions: usize,
    pub avg_convergent: Option<f64>,
    pub convergence: Vec<DomainConvergence>,
    pub words: Vec<WordList>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Bundle {
    ConstructValidity(ConstructBundle),
    SingleShaping(ShapingBundle),
    MultiShaping(ShapingBundle),
    Downstream(DownstreamBundle),
}

impl Bundle {
    pub fn kind(&self) -> ExperimentKind {
        match self {
            Bundle::ConstructValidity(_) => ExperimentKind::ConstructValidity,
            Bundle::SingleShaping(_) => ExperimentKind::SingleShaping,
            Bundle::MultiShaping(_) => ExperimentKind::MultiShaping,
            Bundle::Downstream(_) => ExperimentKind::Downstream,
        }
    }
}

/// Reads the run's log and fails unless every planned key is present.
pub fn load_complete(ctx: &Context) -> Result<(Plan, LogContents), AnalysisError> {
    let plan = ctx.plan()?;
    let contents = read_log(&ctx.config.log_path())?;
    let missing = plan.missing_keys(&ctx.catalog, &contents.keys());
    if !missing.is_empty() {
        return Err(AnalysisError::Incomplete {
            planned: plan.len(),
            total: missing.len(),
            sample: missing.into_iter().take(LISTED_MISSING).collect(),
        });
    }
    Ok((plan, contents))
}

fn plan_instruments<'c>(ctx: &'c Context, plan: &Plan) -> Result<Vec<&'c Instrument>, AnalysisError> {
    Ok(plan.instruments.iter().map(|id| ctx.catalog.instrument(id)).collect::<Result<_, _>>().map_err(RunError::from)?)
}

/// Response records in key order, so results do not depend on the order
/// workers happened to finish in.
fn sorted_responses(contents: &LogContents) -> Vec<&ResponseRecord> {
    let mut records: Vec<&ResponseRecord> = contents.responses().collect();
    records.sort_by(|a, b| {
        (&a.profile_id, &a.instrument_id, &a.item_id).cmp(&(&b.profile_id, &b.instrument_id, &b.item_id))
    });
    records
}

fn response_table(ctx: &Context, plan: &Plan, contents: &LogContents) -> Result<(ResponseTable, usize), AnalysisError> {
    let insts = plan_instruments(ctx, plan)?;
    let records = sorted_responses(contents);
    let missing = records.iter().filter(|r| r.flags.missing).count();
    Ok((ResponseTable::build(records, &insts)?, missing))
}

/// Score matrix for a complete survey log.
pub fn score(ctx: &Context) -> Result<ScoreMatrix, AnalysisError> {
    let (plan, contents) = load_complete(ctx)?;
    if plan.kind == ExperimentKind::Downstream {
        return Err(AnalysisError::Input("downstream logs hold no survey responses".into()));
    }
    let (table, _) = response_table(ctx, &plan, &contents)?;
    Ok(score_table(&table, &plan_instruments(ctx, &plan)?, ctx.config.missing))
}

pub fn analyze(ctx: &Context) -> Result<Bundle, AnalysisError> {
    let (plan, contents) = load_complete(ctx)?;
    match plan.kind {
        ExperimentKind::ConstructValidity => Ok(Bundle::ConstructValidity(construct(ctx, &plan, &contents)?)),
        ExperimentKind::SingleShaping => Ok(Bundle::SingleShaping(shaping(ctx, &plan, &contents, ShapingMode::Single)?)),
        ExperimentKind::MultiShaping => Ok(Bundle::MultiShaping(shaping(ctx, &plan, &contents, ShapingMode::Multi)?)),
        ExperimentKind::Downstream => Ok(Bundle::Downstream(downstream(ctx, &plan, &contents)?)),
    }
}

fn construct(ctx: &Context, plan: &Plan, contents: &LogContents) -> Result<ConstructBundle, AnalysisError> {
    let insts = plan_instruments(ctx, plan)?;
    let (table, missing_records) = response_table(ctx, plan, contents)?;
    let scores = score_table(&table, &insts, ctx.config.missing);
    let mut reliability = Vec::new();
    let mut structure = Vec::new();
    for inst in insts.iter().filter(|i| i.id() == PRIMARY || i.id() == SECONDARY) {
        let mut subscales = Vec::new();
        for sub in inst.subscales() {
            let context = format!("{}/{}", inst.id(), sub.subscale_id);
            let (_, rows) = table.item_matrix(inst, sub);
            let m = ItemMatrix::from_rows(sub.item_ids.clone(), &rows).map_err(psy_err(&context))?;
            subscales.push(psy::reliability_report(&sub.subscale_id, &m).map_err(psy_err(&context))?);
            if inst.id() == PRIMARY {
                let (kept, _) = psy::drop_zero_variance(&m).map_err(psy_err(&context))?;
                if kept.n() <= kept.k() {
                    // Fewer profiles than items: the correlation matrix has no inverse.
                    ::log::warn!("{context}: {} profiles for {} items; skipping structure checks", kept.n(), kept.k());
                    continue;
                }
                let r = psy::correlation_matrix(&kept);
                structure.push(StructureCheck {
                    instrument: inst.id().into(),
                    subscale: sub.subscale_id.clone(),
                    bartlett: psy::bartlett_sphericity(&r, kept.n()).map_err(psy_err(&context))?,
                    kmo: psy::kmo(&r).map_err(psy_err(&context))?,
                });
            }
        }
        reliability.push(InstrumentReliability { instrument: inst.id().into(), subscales });
    }
    let has = |id: &str| plan.instruments.iter().any(|i| i == id);
    let mtmm = if has(PRIMARY) && has(SECONDARY) {
        Some(psy::build_mtmm(&scores, PRIMARY, SECONDARY).map_err(psy_err("MTMM"))?)
    } else {
        None
    };
    let criteria_present = ctx.catalog.criteria.pairs.iter().all(|p| has(&p.instrument));
    let criterion = if has(PRIMARY) && criteria_present && !ctx.catalog.criteria.pairs.is_empty() {
        Some(psy::criterion_validity(&scores, PRIMARY, &ctx.catalog.criteria).map_err(psy_err("criterion validity"))?)
    } else {
        None
    };
    Ok(ConstructBundle {
        backend: plan.backend.clone(),
        profiles: plan.profiles.len(),
        records: table.len(),
        missing_records,
        excluded: scores.excluded.clone(),
        reliability,
        mtmm,
        criterion,
        structure,
    })
}

fn shaping(ctx: &Context, plan: &Plan, contents: &LogContents, mode: ShapingMode) -> Result<ShapingBundle, AnalysisError> {
    let insts = plan_instruments(ctx, plan)?;
    let primary = ctx.catalog.instrument(PRIMARY).map_err(RunError::from)?;
    if !plan.instruments.iter().any(|i| i == PRIMARY) {
        return Err(AnalysisError::Input(format!("shaping analysis needs {PRIMARY} responses")));
    }
    let (table, missing_records) = response_table(ctx, plan, contents)?;
    let scores = score_table(&table, &insts, ctx.config.missing);
    let (lo, hi) = (f64::from(primary.scale().min()), f64::from(primary.scale().max()));
    let mut domains = Vec::new();
    for d in Domain::ALL {
        let label = column_label(PRIMARY, d.code());
        let mut levels = Vec::new();
        let mut values = Vec::new();
        for p in &plan.profiles {
            let Some(level) = p.shaping.and_then(|s| s.level(d)) else { continue };
            if let Some(v) = scores.get(&p.profile_id, &label) {
                levels.push(level);
                values.push(v);
            }
        }
        let efficacy = psy::shaping_efficacy(&levels, &values, mode, lo, hi).map_err(psy_err(format!("shaping {}", d.code())))?;
        domains.push(DomainShaping { domain: d, efficacy });
    }
    Ok(ShapingBundle {
        mode,
        backend: plan.backend.clone(),
        profiles: plan.profiles.len(),
        records: table.len(),
        missing_records,
        domains,
    })
}

fn read_survey_scores(ctx: &Context) -> Result<Option<ScoreMatrix>, AnalysisError> {
    let path = ctx.config.survey_scores_path();
    match std::fs::read_to_string(&path) {
        Ok(text) => Ok(Some(ScoreMatrix::from_tsv(&text)?)),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound && ctx.config.survey_scores.is_none() => {
            ::log::warn!("no survey scores at {}; skipping survey-text correlations", path.display());
            Ok(None)
        }
        Err(e) => Err(AnalysisError::Input(format!("{}: {e}", path.display()))),
    }
}

fn downstream(ctx: &Context, plan: &Plan, contents: &LogContents) -> Result<DownstreamBundle, AnalysisError> {
    let predictor = ctx.predictor.as_ref().map(|p| p.backend_id().to_string()).unwrap_or_default();
    let predictions: HashMap<&str, [f64; 5]> = contents
        .predictions()
        .filter(|p| p.predictor == predictor)
        .filter_map(|p| p.scores.map(|s| (p.profile_id.as_str(), s)))
        .collect();
    let predicted_profiles: HashSet<&str> = contents.predictions().map(|p| p.profile_id.as_str()).collect();
    let unpredicted: Vec<String> =
        plan.profiles.iter().filter(|p| !predicted_profiles.contains(p.profile_id.as_str())).map(|p| p.profile_id.clone()).collect();
    if !unpredicted.is_empty() {
        return Err(AnalysisError::Incomplete {
            planned: plan.profiles.len(),
            total: unpredicted.len(),
            sample: unpredicted.into_iter().take(LISTED_MISSING).map(|p| format!("{p}|predict|{predictor}")).collect(),
        });
    }
    let survey = read_survey_scores(ctx)?;
    let mut convergence = Vec::new();
    for d in Domain::ALL {
        let survey_vs_text = match &survey {
            Some(s) => {
                let label = column_label(PRIMARY, d.code());
                let (mut x, mut y) = (Vec::new(), Vec::new());
                for p in &plan.profiles {
                    if let (Some(v), Some(pred)) = (s.get(&p.profile_id, &label), predictions.get(p.profile_id.as_str())) {
                        x.push(v);
                        y.push(pred[d.index()]);
                    }
                }
                Some(stats::pearson_r(&x, &y).map_err(|e| stat_err(d, e))?)
            }
            None => None,
        };
        let (mut lv, mut pv) = (Vec::new(), Vec::new());
        for p in &plan.profiles {
            if let (Some(l), Some(pred)) = (p.shaping.and_then(|s| s.level(d)), predictions.get(p.profile_id.as_str())) {
                lv.push(f64::from(l));
                pv.push(pred[d.index()]);
            }
        }
        let level_vs_text = stats::spearman_rho(&lv, &pv).map_err(|e| stat_err(d, e))?;
        convergence.push(DomainConvergence { domain: d, survey_vs_text, level_vs_text });
    }
    let conv: Vec<f64> = convergence.iter().filter_map(|c| c.survey_vs_text.map(|r| r.r)).collect();
    let avg_convergent = (conv.len() == 5).then(|| stats::mean(&conv));

    let mut by_profile: HashMap<&str, Vec<&crate::log::GenerationRecord>> = HashMap::new();
    for g in contents.generations() {
        by_profile.entry(g.profile_id.as_str()).or_default().push(g);
    }
    let stop = default_stopwords();
    let mut words = Vec::new();
    for d in Domain::ALL {
        for level in [1u8, 9] {
            let texts: Vec<String> = plan
                .profiles
                .iter()
                .filter(|p| p.shaping.and_then(|s| s.level(d)) == Some(level))
                .map(|p| profile_corpus(by_profile.get(p.profile_id.as_str()).into_iter().flatten().copied()))
                .collect();
            words.push(WordList { domain: d, level, words: word_frequencies(&texts, &stop, TOP_WORDS) });
        }
    }
    Ok(DownstreamBundle {
        backend: plan.backend.clone(),
        predictor,
        profiles: plan.profiles.len(),
        generations: contents.generations().count(),
        missing_generations: contents.generations().filter(|g| g.text.is_none()).count(),
        predictions: predictions.len(),
        avg_convergent,
        convergence,
        words,
    })
}

fn stat_err(d: Domain, e: StatsError) -> AnalysisError {
    AnalysisError::Psychometric { context: format!("downstream {}", d.code()), source: e.into() }
}
