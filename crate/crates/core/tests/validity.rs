use synthpersona_core::builtin;
use synthpersona_core::catalog::Instrument;
use synthpersona_core::psychometrics::{build_mtmm, criterion_validity, PsychometricError};
use synthpersona_core::respondent::{random_latent, LatentProfile, NoiseModel, SyntheticRespondent};
use synthpersona_core::scoring::{build_score_matrix, MissingPolicy, ResponseRecord, ScoreMatrix};

fn simulate(noise: NoiseModel, n: usize, sigma: f64, seed: u64) -> ScoreMatrix {
    let cat = builtin::battery();
    let r = SyntheticRespondent::new(noise, cat.criteria.clone());
    let insts: Vec<&Instrument> = cat.instruments().collect();
    let mut records = Vec::new();
    for p in 0..n {
        let pid = format!("p{p:04}");
        let latent = LatentProfile::new(random_latent(seed, &pid), sigma, seed);
        for inst in &insts {
            for item in inst.items() {
                let raw = r.respond(&latent, &pid, inst, item).unwrap();
                records.push(ResponseRecord::answered(&pid, inst.id(), &item.item_id, raw, "mock"));
            }
        }
    }
    build_score_matrix(&records, &insts, MissingPolicy::ExcludeRow).unwrap()
}

#[test]
fn faithful_mock_mtmm_and_criteria() {
    let m = simulate(NoiseModel::GaussianOnLatent, 300, 0.5, 1);
    let mtmm = build_mtmm(&m, "IPIP-NEO", "BFI").unwrap();
    assert!(mtmm.avg_convergent >= 0.80, "{}", mtmm.avg_convergent);
    assert!(mtmm.avg_delta >= 0.40, "{}", mtmm.avg_delta);
    assert!(mtmm.all_campbell());
    let flipped = build_mtmm(&m, "BFI", "IPIP-NEO").unwrap();
    for d in 0..5 {
        assert!((mtmm.convergent[d] - flipped.convergent[d]).abs() < 1e-12);
    }
    let crit = criterion_validity(&m, "IPIP-NEO", &builtin::battery().criteria).unwrap();
    assert_eq!(crit.entries.len(), 13);
    assert!(crit.all_match());
}

#[test]
fn random_mock_fails_discriminant_validity() {
    let m = simulate(NoiseModel::UniformRandomResponder, 300, 0.0, 2);
    let mtmm = build_mtmm(&m, "IPIP-NEO", "BFI").unwrap();
    assert!(mtmm.avg_convergent.abs() < 0.15);
    assert!(mtmm.avg_delta < 0.40);
}

#[test]
fn missing_columns_are_reported() {
    let m = simulate(NoiseModel::GaussianOnLatent, 5, 0.5, 1);
    assert!(matches!(build_mtmm(&m, "IPIP-NEO", "NOPE"), Err(PsychometricError::Scoring(_))));
}
