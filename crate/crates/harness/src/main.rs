use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use synthpersona_core::prompts::{PersonaOrder, PromptSpec};
use synthpersona_core::respondent::NoiseModel;
use synthpersona_harness::analysis;
use synthpersona_harness::gateway::{BackendDescriptor, BackendKind};
use synthpersona_harness::report::{self, ReportFormat};
use synthpersona_harness::runner::{self, Context, ExperimentConfig, ExperimentKind, GenerationParams, RunOptions, Task};

#[derive(Parser)]
#[command(name = "synthpersona", version, about = "Administer personality questionnaires to language models and analyse the answers")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// TOML experiment config; flags below override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output root holding prompts/, logs/, scores/ and reports/.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Backend id; `mock` selects the in-process synthetic respondent.
    #[arg(long, global = true)]
    backend: Option<String>,
    #[arg(long, global = true, value_enum)]
    backend_kind: Option<KindArg>,
    #[arg(long, global = true)]
    endpoint: Option<String>,
    /// Environment variable holding the API credential.
    #[arg(long, global = true)]
    auth_env: Option<String>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Concurrent requests.
    #[arg(long, global = true)]
    width: Option<usize>,
    /// Mock response noise (standard deviation on the latent).
    #[arg(long, global = true)]
    sigma: Option<f64>,
    #[arg(long, global = true, value_enum)]
    noise: Option<NoiseArg>,
    /// More log output (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    ScoreOptions,
    ConstrainedGenerate,
}

#[derive(Clone, Copy, ValueEnum)]
enum NoiseArg {
    Gaussian,
    None,
    Random,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Single,
    Multi,
}

#[derive(Subcommand)]
enum Command {
    /// Write the prompt matrix for an experiment as JSON lines.
    GeneratePrompts {
        #[arg(long)]
        kind: Option<String>,
        /// Print counts without writing prompts.
        #[arg(long)]
        count_only: bool,
    },
    /// Run the construct-validity administration.
    Administer {
        /// Comma-separated instrument ids.
        #[arg(long, value_delimiter = ',')]
        instruments: Vec<String>,
    },
    /// Run a trait-shaping administration.
    Shape {
        #[arg(long, value_enum, default_value = "single")]
        mode: ModeArg,
    },
    /// Score a complete log into a score matrix.
    Score {
        #[arg(long)]
        kind: Option<String>,
    },
    /// Analyse a complete log into a report bundle.
    Analyze {
        #[arg(long)]
        kind: Option<String>,
    },
    /// Generate status updates, predict personality from them and analyse.
    Downstream {
        #[arg(long)]
        repeats: Option<u32>,
        #[arg(long)]
        updates: Option<usize>,
        /// Latent noise per generation for the mock author.
        #[arg(long)]
        generation_sigma: Option<f64>,
        /// Survey score matrix to correlate with text predictions.
        #[arg(long)]
        survey_scores: Option<PathBuf>,
        /// Predictor endpoint; the mock echo predictor when absent.
        #[arg(long)]
        predictor_endpoint: Option<String>,
        #[arg(long)]
        predictor_auth_env: Option<String>,
    },
    /// Write report files from an analysed bundle.
    Report {
        #[arg(long)]
        kind: Option<String>,
        #[arg(long, default_value = "tsv")]
        format: String,
        /// Bundle to read instead of reports/<kind>/bundle.json.
        #[arg(long)]
        bundle: Option<PathBuf>,
    },
}

type Result<T> = std::result::Result<T, Box<dyn std::error::Error>>;

fn base_config(g: &Global) -> Result<ExperimentConfig> {
    let mut c = match &g.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(out) = &g.out {
        c.out_dir = out.clone();
    }
    if let Some(b) = &g.backend {
        c.backend.id = b.clone();
        if b == "mock" {
            c.backend.kind = BackendKind::Mock;
        } else if c.backend.kind == BackendKind::Mock {
            c.backend.kind = BackendKind::ScoreOptions;
        }
    }
    if let Some(k) = g.backend_kind {
        c.backend.kind = match k {
            KindArg::ScoreOptions => BackendKind::ScoreOptions,
            KindArg::ConstrainedGenerate => BackendKind::ConstrainedGenerate,
        };
    }
    if g.endpoint.is_some() {
        c.backend.endpoint = g.endpoint.clone();
    }
    if g.auth_env.is_some() {
        c.backend.auth_env = g.auth_env.clone();
    }
    if let Some(s) = g.seed {
        c.seed = s;
    }
    if let Some(w) = g.width {
        c.width = w;
    }
    if let Some(s) = g.sigma {
        c.mock.sigma = s;
    }
    if let Some(n) = g.noise {
        c.mock.noise = match n {
            NoiseArg::Gaussian => NoiseModel::GaussianOnLatent,
            NoiseArg::None => NoiseModel::None,
            NoiseArg::Random => NoiseModel::UniformRandomResponder,
        };
    }
    Ok(c)
}

fn with_kind(mut c: ExperimentConfig, kind: &Option<String>) -> Result<ExperimentConfig> {
    if let Some(k) = kind {
        c.kind = ExperimentKind::parse(k).ok_or_else(|| format!("unknown experiment kind {k:?}"))?;
    }
    if c.kind == ExperimentKind::Downstream {
        fill_downstream(&mut c);
    }
    Ok(c)
}

fn fill_downstream(c: &mut ExperimentConfig) {
    c.generation.get_or_insert_with(GenerationParams::default);
    if c.predictor.is_none() {
        c.predictor = Some(BackendDescriptor { id: "echo".into(), ..BackendDescriptor::default() });
    }
}

fn print_run(kind: ExperimentKind, s: runner::RunSummary, log: &std::path::Path) {
    println!(
        "{kind}: {} planned, {} already logged, {} written ({} missing) -> {}",
        s.planned,
        s.resumed,
        s.written,
        s.missing,
        log.display()
    );
}

fn write_file(path: &std::path::Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, contents)?;
    Ok(())
}

fn analyze_and_save(ctx: &Context) -> Result<analysis::Bundle> {
    let bundle = analysis::analyze(ctx)?;
    let files = report::write_report(&bundle, ReportFormat::Json, &ctx.config.report_dir())?;
    for f in files {
        println!("wrote {}", f.display());
    }
    Ok(bundle)
}

fn generate_prompts(ctx: &Context, count_only: bool) -> Result<()> {
    let plan = ctx.plan()?;
    println!("{}: {} profiles, {} prompts", plan.kind, plan.profiles.len(), plan.len());
    if count_only {
        return Ok(());
    }
    let path = ctx.config.prompts_path();
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let mut out = std::io::BufWriter::new(std::fs::File::create(&path)?);
    let updates = ctx.config.generation.as_ref().map_or(20, |g| g.updates);
    for &task in &plan.tasks {
        match task {
            Task::Item { profile, instrument, item } => {
                let inst = ctx.catalog.instrument(&plan.instruments[instrument as usize])?;
                let spec = ctx.tables.admin_prompt_for(&plan.profiles[profile as usize], inst, &inst.items()[item as usize])?;
                serde_json::to_writer(&mut out, &spec)?;
            }
            Task::Generate { profile, repeat } => {
                if repeat > 0 {
                    continue;
                }
                let p = &plan.profiles[profile as usize];
                let spec = PromptSpec {
                    profile_id: p.profile_id.clone(),
                    instrument_id: String::new(),
                    item_id: String::new(),
                    text: ctx.tables.build_downstream_prompt(p, updates, PersonaOrder::TraitsFirst)?,
                };
                serde_json::to_writer(&mut out, &spec)?;
            }
        }
        out.write_all(b"\n")?;
    }
    out.flush()?;
    println!("wrote {}", path.display());
    Ok(())
}

fn main_inner(cli: Cli) -> Result<()> {
    let base = base_config(&cli.global)?;
    match cli.command {
        Command::GeneratePrompts { kind, count_only } => {
            let ctx = Context::new(with_kind(base, &kind)?)?;
            generate_prompts(&ctx, count_only)
        }
        Command::Administer { instruments } => {
            let mut c = base;
            c.kind = ExperimentKind::ConstructValidity;
            if !instruments.is_empty() {
                c.instruments = instruments;
            }
            let ctx = Context::new(c)?;
            let s = runner::run(&ctx, RunOptions::default())?;
            print_run(ctx.config.kind, s, &ctx.config.log_path());
            Ok(())
        }
        Command::Shape { mode } => {
            let mut c = base;
            c.kind = match mode {
                ModeArg::Single => ExperimentKind::SingleShaping,
                ModeArg::Multi => ExperimentKind::MultiShaping,
            };
            let ctx = Context::new(c)?;
            let s = runner::run(&ctx, RunOptions::default())?;
            print_run(ctx.config.kind, s, &ctx.config.log_path());
            Ok(())
        }
        Command::Score { kind } => {
            let ctx = Context::new(with_kind(base, &kind)?)?;
            let scores = analysis::score(&ctx)?;
            let path = ctx.config.scores_path();
            write_file(&path, &scores.to_tsv())?;
            println!("{} profiles x {} subscales -> {}", scores.rows.len(), scores.columns.len(), path.display());
            Ok(())
        }
        Command::Analyze { kind } => {
            let ctx = Context::new(with_kind(base, &kind)?)?;
            let bundle = analyze_and_save(&ctx)?;
            println!("{}\n{}", report::SUMMARY_HEADER, report::summary_row(&bundle));
            Ok(())
        }
        Command::Downstream { repeats, updates, generation_sigma, survey_scores, predictor_endpoint, predictor_auth_env } => {
            let mut c = base;
            c.kind = ExperimentKind::Downstream;
            fill_downstream(&mut c);
            let g = c.generation.as_mut().expect("filled");
            if let Some(r) = repeats {
                g.repeats = r;
            }
            if let Some(u) = updates {
                g.updates = u;
            }
            if let Some(s) = generation_sigma {
                c.mock.generation_sigma = s;
            }
            if survey_scores.is_some() {
                c.survey_scores = survey_scores;
            }
            if let Some(e) = predictor_endpoint {
                let p = c.predictor.as_mut().expect("filled");
                if p.kind == BackendKind::Mock {
                    p.kind = BackendKind::ScoreOptions;
                    p.id = "predictor".into();
                }
                p.endpoint = Some(e);
            }
            if predictor_auth_env.is_some() {
                c.predictor.as_mut().expect("filled").auth_env = predictor_auth_env;
            }
            let ctx = Context::new(c)?;
            let s = runner::run(&ctx, RunOptions::default())?;
            print_run(ctx.config.kind, s, &ctx.config.log_path());
            let bundle = analyze_and_save(&ctx)?;
            for f in report::write_report(&bundle, ReportFormat::Tsv, &ctx.config.report_dir())? {
                println!("wrote {}", f.display());
            }
            Ok(())
        }
        Command::Report { kind, format, bundle } => {
            let format: ReportFormat = format.parse()?;
            let c = with_kind(base, &kind)?;
            let path = bundle.unwrap_or_else(|| c.report_dir().join("bundle.json"));
            let bundle = report::read_bundle(&path)?;
            let dir = path.parent().map(PathBuf::from).unwrap_or_else(|| c.report_dir());
            for f in report::write_report(&bundle, format, &dir)? {
                println!("wrote {}", f.display());
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.global.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match main_inner(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
