use std::io::Write;
use std::path::Path;

use synthpersona_core::Domain;
use synthpersona_harness::analysis::{self, AnalysisError, Bundle};
use synthpersona_harness::log::{canonical_lines, read_log, LogError};
use synthpersona_harness::report::{self, ReportFormat};
use synthpersona_harness::runner::{self, Context, ExperimentConfig, ExperimentKind, ProfileGrid, RunOptions};

fn small(dir: &Path, width: usize) -> ExperimentConfig {
    ExperimentConfig {
        profiles: ProfileGrid { descriptions: 4, instructions: 1, postambles: 5 },
        width,
        out_dir: dir.into(),
        ..ExperimentConfig::default()
    }
}

fn run(config: ExperimentConfig, options: RunOptions) -> (Context, runner::RunSummary) {
    let ctx = Context::new(config).unwrap();
    let summary = runner::run(&ctx, options).unwrap();
    (ctx, summary)
}

#[test]
fn plan_sizes() {
    let cases = [
        (ExperimentKind::ConstructValidity, 1250, 523_750),
        (ExperimentKind::SingleShaping, 2250, 675_000),
        (ExperimentKind::MultiShaping, 1600, 480_000),
        (ExperimentKind::Downstream, 2250, 56_250),
    ];
    for (kind, profiles, tasks) in cases {
        let mut config = ExperimentConfig { kind, ..ExperimentConfig::default() };
        if kind == ExperimentKind::Downstream {
            config.generation = Some(Default::default());
            config.predictor = Some(Default::default());
        }
        let plan = Context::new(config).unwrap().plan().unwrap();
        assert_eq!((plan.profiles.len(), plan.len()), (profiles, tasks), "{kind}");
    }
}

#[test]
fn small_grid_plan() {
    let dir = tempfile::tempdir().unwrap();
    let plan = Context::new(small(dir.path(), 1)).unwrap().plan().unwrap();
    assert_eq!(plan.profiles.len(), 20);
    assert_eq!(plan.len(), 20 * 419);
}

#[test]
fn output_is_independent_of_width() {
    let mut logs = Vec::new();
    let mut scores = Vec::new();
    for width in [1, 4, 32] {
        let dir = tempfile::tempdir().unwrap();
        let (ctx, summary) = run(small(dir.path(), width), RunOptions::default());
        assert_eq!((summary.written, summary.missing), (8380, 0));
        logs.push(canonical_lines(&ctx.config.log_path()).unwrap());
        scores.push(analysis::score(&ctx).unwrap().to_tsv());
    }
    assert_eq!(logs[0].len(), 8380);
    assert!(logs.iter().all(|l| *l == logs[0]));
    assert!(scores.iter().all(|s| *s == scores[0]));
}

#[test]
fn interrupted_run_resumes_to_the_same_log() {
    let reference = tempfile::tempdir().unwrap();
    let (ctx, _) = run(small(reference.path(), 4), RunOptions::default());
    let expected = canonical_lines(&ctx.config.log_path()).unwrap();

    let dir = tempfile::tempdir().unwrap();
    let (ctx, first) = run(small(dir.path(), 4), RunOptions { stop_after: Some(3000) });
    assert!(first.written >= 3000 && first.written < 8380, "{first:?}");
    // A write cut off mid-line.
    let mut f = std::fs::OpenOptions::new().append(true).open(ctx.config.log_path()).unwrap();
    f.write_all(br#"{"key":"d01-i1-p1|IPIP-NEO|"#).unwrap();
    drop(f);
    assert!(read_log(&ctx.config.log_path()).unwrap().torn);
    assert!(matches!(analysis::analyze(&ctx), Err(AnalysisError::Incomplete { .. })));

    let (ctx, second) = run(small(dir.path(), 16), RunOptions::default());
    assert_eq!(second.resumed, first.written);
    assert_eq!(second.resumed + second.written, 8380);
    assert_eq!(canonical_lines(&ctx.config.log_path()).unwrap(), expected);
}

#[test]
fn resume_never_duplicates() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = small(dir.path(), 8);
    config.instruments = vec!["BFI".into()];
    for stop in [10, 25, 200, 1000] {
        run(config.clone(), RunOptions { stop_after: Some(stop) });
    }
    let (ctx, last) = run(config, RunOptions::default());
    assert_eq!(last.written, 0);
    // read_log rejects duplicate keys outright.
    let log = read_log(&ctx.config.log_path()).unwrap();
    assert_eq!(log.entries.len(), 20 * 44);
}

#[test]
fn duplicate_keys_are_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = small(dir.path(), 2);
    config.instruments = vec!["BFI".into()];
    let (ctx, _) = run(config, RunOptions { stop_after: Some(5) });
    let path = ctx.config.log_path();
    let first = std::fs::read_to_string(&path).unwrap().lines().next().unwrap().to_string();
    let mut f = std::fs::OpenOptions::new().append(true).open(&path).unwrap();
    writeln!(f, "{first}").unwrap();
    drop(f);
    assert!(matches!(read_log(&path), Err(LogError::DuplicateKey { .. })));
}

#[test]
fn incomplete_log_lists_missing_keys() {
    let dir = tempfile::tempdir().unwrap();
    let ctx = Context::new(small(dir.path(), 2)).unwrap();
    let err = analysis::analyze(&ctx).unwrap_err();
    match &err {
        AnalysisError::Incomplete { planned, total, sample } => {
            assert_eq!((*planned, *total), (8380, 8380));
            assert!(!sample.is_empty());
            assert!(sample[0].contains("|mock"), "{sample:?}");
        }
        other => panic!("{other:?}"),
    }
    assert!(err.to_string().contains("8380 of 8380"), "{err}");

    runner::run(&ctx, RunOptions { stop_after: Some(8000) }).unwrap();
    let err = analysis::score(&ctx).unwrap_err().to_string();
    assert!(err.contains("380 of 8380"), "{err}");
}

#[test]
fn construct_report_shapes() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = small(dir.path(), 8);
    config.profiles.descriptions = 10;
    let (ctx, _) = run(config, RunOptions::default());
    let bundle = analysis::analyze(&ctx).unwrap();
    let Bundle::ConstructValidity(b) = &bundle else { panic!() };
    assert_eq!((b.profiles, b.records, b.missing_records), (50, 50 * 419, 0));
    assert_eq!(b.reliability.len(), 2);
    // 50 profiles cannot support a 60-item correlation matrix.
    assert!(b.structure.is_empty());
    let mtmm = b.mtmm.as_ref().unwrap();
    assert!(mtmm.avg_convergent > 0.8, "{}", mtmm.avg_convergent);

    let files = report::tsv_files(&bundle);
    let get = |name: &str| files.iter().find(|(n, _)| *n == name).map(|(_, c)| c.clone()).unwrap();
    assert_eq!(get("mtmm.tsv").lines().count(), 26);
    assert_eq!(get("summary.tsv").lines().count(), 2);
    assert_eq!(get("summary.tsv").lines().next().unwrap(), report::SUMMARY_HEADER);
    let reliability = get("reliability.tsv");
    assert_eq!(reliability.lines().count() - 1, b.reliability.iter().map(|r| r.subscales.len()).sum::<usize>());

    let written = report::write_report(&bundle, ReportFormat::Json, &ctx.config.report_dir()).unwrap();
    assert_eq!(report::read_bundle(&written[0]).unwrap(), bundle);
}

#[test]
fn shaping_report_has_nine_levels_per_domain() {
    let dir = tempfile::tempdir().unwrap();
    let config = ExperimentConfig {
        kind: ExperimentKind::SingleShaping,
        width: 16,
        out_dir: dir.path().into(),
        ..ExperimentConfig::default()
    };
    let (ctx, summary) = run(config, RunOptions::default());
    assert_eq!(summary.written, 675_000);
    let bundle = analysis::analyze(&ctx).unwrap();
    let Bundle::SingleShaping(b) = &bundle else { panic!() };
    assert_eq!(b.domains.len(), 5);
    for d in &b.domains {
        assert_eq!(d.efficacy.per_level.len(), 9, "{:?}", d.domain);
        assert!(d.efficacy.rho.r > 0.95);
    }
    let files = report::tsv_files(&bundle);
    let ridge = &files.iter().find(|(n, _)| *n == "ridge.tsv").unwrap().1;
    assert_eq!(ridge.lines().count() - 1, 5 * 9 * 16);
    for d in Domain::ALL {
        let levels: std::collections::BTreeSet<&str> = ridge
            .lines()
            .skip(1)
            .filter(|l| l.starts_with(d.code()))
            .map(|l| l.split('\t').nth(1).unwrap())
            .collect();
        assert_eq!(levels.len(), 9);
    }
}

#[test]
fn config_rejects_unknown_fields_and_bad_values() {
    assert!(ExperimentConfig::from_toml("colour = 'red'").is_err());
    assert!(ExperimentConfig::from_toml("width = 0").unwrap().validate().is_err());
    assert!(ExperimentConfig::from_toml("kind = 'downstream'").unwrap().validate().is_err());
    let c = ExperimentConfig::from_toml("kind = 'multi-shaping'\nseed = 7\n[mock]\nsigma = 0.0").unwrap();
    assert_eq!((c.kind, c.seed, c.mock.sigma), (ExperimentKind::MultiShaping, 7, 0.0));
}

#[test]
fn shipped_configs_parse() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let remote = ExperimentConfig::load(&dir.join("remote.toml")).unwrap();
    assert_eq!(remote.backend.endpoint.as_deref(), Some("http://localhost:8000"));
    remote.validate().unwrap();
    let downstream = ExperimentConfig::load(&dir.join("mock-downstream.toml")).unwrap();
    assert_eq!(downstream.kind, ExperimentKind::Downstream);
    downstream.validate().unwrap();
}
