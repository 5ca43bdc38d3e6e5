use std::collections::HashSet;

use synthpersona_core::Domain;
use synthpersona_harness::analysis::{self, Bundle};
use synthpersona_harness::downstream::{default_stopwords, word_frequencies};
use synthpersona_harness::gateway::BackendDescriptor;
use synthpersona_harness::mock::{decode_tag, echo_prediction, encode_tag};
use synthpersona_harness::runner::{self, Context, ExperimentConfig, ExperimentKind, GenerationParams, RunOptions};

fn config(dir: &std::path::Path, repeats: u32) -> ExperimentConfig {
    ExperimentConfig {
        kind: ExperimentKind::Downstream,
        width: 8,
        out_dir: dir.into(),
        generation: Some(GenerationParams { repeats, updates: 10, ..GenerationParams::default() }),
        predictor: Some(BackendDescriptor { id: "echo".into(), ..BackendDescriptor::default() }),
        ..ExperimentConfig::default()
    }
}

#[test]
fn noiseless_text_echoes_the_shaping_levels() {
    let dir = tempfile::tempdir().unwrap();
    let ctx = Context::new(config(dir.path(), 2)).unwrap();
    let summary = runner::run(&ctx, RunOptions::default()).unwrap();
    assert_eq!((summary.planned, summary.written, summary.missing), (4500, 4500 + 2250, 0));
    let Bundle::Downstream(b) = analysis::analyze(&ctx).unwrap() else { panic!() };
    assert_eq!((b.profiles, b.generations, b.predictions), (2250, 4500, 2250));
    assert!(b.avg_convergent.is_none());
    for c in &b.convergence {
        assert!((c.level_vs_text.r - 1.0).abs() < 1e-12, "{:?} {}", c.domain, c.level_vs_text.r);
    }
    let neu_high = b.words.iter().find(|w| w.domain == Domain::Neuroticism && w.level == 9).unwrap();
    let top: HashSet<&str> = neu_high.words.iter().take(5).map(|(w, _)| w.as_str()).collect();
    for w in ["hate", "depressed", "anxious"] {
        assert!(top.contains(w), "{:?}", neu_high.words);
    }
    let ext_low = b.words.iter().find(|w| w.domain == Domain::Extraversion && w.level == 1).unwrap();
    assert!(!ext_low.words.iter().take(5).any(|(w, _)| w == "party"), "{:?}", ext_low.words);
}

#[test]
fn predictions_wait_for_complete_generations() {
    let dir = tempfile::tempdir().unwrap();
    let ctx = Context::new(config(dir.path(), 1)).unwrap();
    let first = runner::run(&ctx, RunOptions { stop_after: Some(1000) }).unwrap();
    assert!(first.written < 2250);
    assert!(analysis::analyze(&ctx).is_err());
    let second = runner::run(&ctx, RunOptions::default()).unwrap();
    assert_eq!(first.written + second.written, 2250 * 2);
    analysis::analyze(&ctx).unwrap();
}

#[test]
fn tags_and_echo() {
    let theta = [1.0, 2.5, 3.0, 4.5, 5.0];
    let tag = encode_tag(&theta);
    assert_eq!(tag, "#100250300450500");
    assert_eq!(decode_tag(&tag), Some(theta));
    assert_eq!(decode_tag("#12345"), None);
    let text = format!("one {} \u{22c4} two {}", encode_tag(&[1.0; 5]), encode_tag(&[3.0; 5]));
    assert_eq!(echo_prediction(&text), Some([2.0; 5]));
    assert_eq!(echo_prediction("no tags here"), None);
}

#[test]
fn word_counts_skip_stopwords_and_case() {
    let stop = default_stopwords();
    let texts = ["The cat and THE dog.", "A cat! cat?", "dog #123"];
    let top = word_frequencies(&texts, &stop, 2);
    assert_eq!(top, vec![("cat".to_string(), 3), ("dog".to_string(), 2)]);
}
