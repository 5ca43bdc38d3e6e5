mod oracle;

use std::path::PathBuf;

use approx::assert_abs_diff_eq;
use nalgebra::DMatrix;
use proptest::prelude::*;
use synthpersona_core::psychometrics::{
    bartlett_sphericity, correlation_matrix, cronbach_alpha, guttman_lambda6, interpret_reliability, kmo,
    mcdonald_omega, omega_from_correlation, ItemMatrix,
};
use synthpersona_core::stats::{pearson_r, spearman_rho, summarize_distribution};

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn load(name: &str) -> (ItemMatrix, Vec<Vec<f64>>) {
    let (ids, rows) = oracle::read_matrix(fixture(name));
    (ItemMatrix::from_rows(ids, &rows).unwrap(), rows)
}

fn to_dmatrix(r: &[Vec<f64>]) -> DMatrix<f64> {
    DMatrix::from_fn(r.len(), r.len(), |i, j| r[i][j])
}

#[test]
fn series_fixture_matches_direct_formulas() {
    let (_, rows) = oracle::read_matrix(fixture("series20.tsv"));
    let (x, y) = (oracle::column(&rows, 0), oracle::column(&rows, 1));
    assert_eq!(x.len(), 20);
    assert_abs_diff_eq!(pearson_r(&x, &y).unwrap().r, oracle::pearson(&x, &y), epsilon = 1e-12);
    assert_abs_diff_eq!(spearman_rho(&x, &y).unwrap().r, oracle::spearman(&x, &y), epsilon = 1e-12);
    // Reference values from an independent statistics package.
    assert_abs_diff_eq!(pearson_r(&x, &y).unwrap().r, 0.321_057_081_506_505_97, epsilon = 1e-12);
    assert_abs_diff_eq!(pearson_r(&x, &y).unwrap().p, 0.167_517_209_989_746_87, epsilon = 1e-9);
    assert_abs_diff_eq!(spearman_rho(&x, &y).unwrap().r, 0.397_893_973_230_624_53, epsilon = 1e-12);
}

#[test]
fn reliability_fixtures_match_oracles() {
    for (name, alpha, lambda6) in [
        ("items_a.tsv", 0.838_585_494_383_580_5, 0.851_686_876_525_622),
        ("items_b.tsv", 0.927_516_504_457_905_1, 0.938_680_661_267_581_9),
    ] {
        let (m, rows) = load(name);
        let a = cronbach_alpha(&m).unwrap();
        let l6 = guttman_lambda6(&m).unwrap();
        assert_abs_diff_eq!(a, oracle::alpha(&rows), epsilon = 1e-12);
        assert_abs_diff_eq!(l6, oracle::lambda6(&rows), epsilon = 1e-10);
        assert_abs_diff_eq!(a, alpha, epsilon = 1e-12);
        assert_abs_diff_eq!(l6, lambda6, epsilon = 1e-10);
        // Item variances differ in this fixture family and λ6 bounds α from above.
        assert!(l6 >= a, "{name}");
        let (w, fit) = mcdonald_omega(&m).unwrap();
        assert!((0.0..=1.0).contains(&w));
        assert!(fit.uniquenesses.iter().all(|u| *u >= 0.0));
    }
}

#[test]
fn structure_checks_match_oracles() {
    for (name, chi2, kmo_ref) in [
        ("items_a.tsv", 89.863_570_429_347_48, 0.801_106_545_365_670_7),
        ("items_b.tsv", 159.222_794_048_046_38, 0.835_619_283_694_965_3),
    ] {
        let (m, rows) = load(name);
        let r_oracle = oracle::corr(&rows);
        let r = correlation_matrix(&m);
        for i in 0..m.k() {
            for j in 0..m.k() {
                assert_abs_diff_eq!(r[(i, j)], r_oracle[i][j], epsilon = 1e-13);
            }
        }
        let b = bartlett_sphericity(&r, m.n()).unwrap();
        assert_abs_diff_eq!(b.chi_square, oracle::bartlett_chi2(&r_oracle, m.n()), epsilon = 1e-10);
        assert_abs_diff_eq!(b.chi_square, chi2, epsilon = 1e-9);
        assert!(b.p < 1e-4);
        let k = kmo(&r).unwrap();
        assert_abs_diff_eq!(k, oracle::kmo(&r_oracle), epsilon = 1e-10);
        assert_abs_diff_eq!(k, kmo_ref, epsilon = 1e-10);
    }
}

#[test]
fn alpha_is_mean_split_half_on_four_items() {
    let (_, rows) = oracle::read_matrix(fixture("items_b.tsv"));
    let four: Vec<Vec<f64>> = rows.iter().map(|r| r[..4].to_vec()).collect();
    let m = ItemMatrix::unlabeled(&four).unwrap();
    assert_abs_diff_eq!(cronbach_alpha(&m).unwrap(), oracle::mean_split_half_4(&four), epsilon = 1e-12);
}

#[test]
fn independent_uniform_items_have_alpha_near_zero() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
    let rows: Vec<Vec<f64>> =
        (0..1250).map(|_| (0..60).map(|_| f64::from(rng.random_range(1u8..=5))).collect()).collect();
    let a = cronbach_alpha(&ItemMatrix::unlabeled(&rows).unwrap()).unwrap();
    assert!(a.abs() < 0.15, "alpha = {a}");
}

fn loadings(k: std::ops::Range<usize>) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.3f64..0.9, k)
}

fn likert_rows() -> impl Strategy<Value = Vec<Vec<f64>>> {
    (3usize..7).prop_flat_map(|k| prop::collection::vec(prop::collection::vec(1u8..=5, k), 12..40))
        .prop_map(|rows| rows.into_iter().map(|r| r.into_iter().map(f64::from).collect()).collect())
}

fn series_pair() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (3usize..40).prop_flat_map(|n| (prop::collection::vec(-100.0f64..100.0, n), prop::collection::vec(-100.0f64..100.0, n)))
}

proptest! {
    #[test]
    fn omega_reproduces_closed_form(l in loadings(3..12)) {
        let r = to_dmatrix(&oracle::one_factor_corr(&l));
        let (w, fit) = omega_from_correlation(&r).unwrap();
        prop_assert!((w - oracle::omega_closed(&l)).abs() <= 1e-6, "{} vs {}", w, oracle::omega_closed(&l));
        for (a, b) in fit.loadings.iter().zip(&l) {
            prop_assert!((a - b).abs() < 1e-5);
        }
    }

    #[test]
    fn omega_is_a_proportion(rows in likert_rows()) {
        let m = ItemMatrix::unlabeled(&rows).unwrap();
        if let Ok((w, fit)) = mcdonald_omega(&m) {
            prop_assert!((0.0..=1.0).contains(&w));
            prop_assert!(fit.uniquenesses.iter().all(|u| *u >= 0.0));
            prop_assert!(fit.loadings.iter().all(|l| l * l <= 1.0 + 1e-12));
        }
    }

    #[test]
    fn alpha_matches_split_halves(rows in prop::collection::vec(prop::collection::vec(1u8..=5, 4), 8..40)) {
        let rows: Vec<Vec<f64>> = rows.into_iter().map(|r| r.into_iter().map(f64::from).collect()).collect();
        let m = ItemMatrix::unlabeled(&rows).unwrap();
        if let Ok(a) = cronbach_alpha(&m) {
            prop_assert!((a - oracle::mean_split_half_4(&rows)).abs() < 1e-9);
        }
    }

    #[test]
    fn correlations_are_symmetric((x, y) in series_pair()) {
        if let (Ok(a), Ok(b)) = (pearson_r(&x, &y), pearson_r(&y, &x)) {
            prop_assert!((a.r - b.r).abs() < 1e-12);
            prop_assert!(a.r.abs() <= 1.0);
            prop_assert!((0.0..=1.0).contains(&a.p));
        }
        if let (Ok(a), Ok(b)) = (spearman_rho(&x, &y), spearman_rho(&y, &x)) {
            prop_assert!((a.r - b.r).abs() < 1e-12);
        }
    }

    #[test]
    fn pearson_is_affine_invariant((x, y) in series_pair(), a in prop_oneof![-10.0f64..-0.1, 0.1f64..10.0], b in -50.0f64..50.0) {
        let ax: Vec<f64> = x.iter().map(|v| a * v + b).collect();
        if let (Ok(r0), Ok(r1)) = (pearson_r(&x, &y), pearson_r(&ax, &y)) {
            prop_assert!((r1.r - a.signum() * r0.r).abs() < 1e-9);
        }
    }

    #[test]
    fn spearman_equals_pearson_on_ranks(perm in Just((1..=20).map(f64::from).collect::<Vec<_>>()).prop_shuffle()) {
        let x: Vec<f64> = (1..=20).map(f64::from).collect();
        let s = spearman_rho(&x, &perm).unwrap().r;
        let p = pearson_r(&x, &perm).unwrap().r;
        prop_assert!((s - p).abs() < 1e-12);
    }

    #[test]
    fn bands_are_monotone(a in -2.0f64..2.0, b in -2.0f64..2.0) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(interpret_reliability(lo) <= interpret_reliability(hi));
    }

    #[test]
    fn summaries_are_ordered(x in prop::collection::vec(-10.0f64..10.0, 1..60)) {
        let s = summarize_distribution(&x).unwrap();
        prop_assert!(s.min <= s.q1 && s.q1 <= s.median && s.median <= s.q3 && s.q3 <= s.max);
        prop_assert_eq!(s.histogram.iter().map(|b| b.count).sum::<usize>(), x.len());
    }
}

#[test]
fn p_value_limits() {
    use synthpersona_core::stats::correlation_p_value;
    assert_eq!(correlation_p_value(0.0, 50), 1.0);
    assert!(correlation_p_value(0.999_999, 50) < 1e-12);
    let mut last = 1.0;
    for i in 1..100 {
        let p = correlation_p_value(f64::from(i) / 100.0, 30);
        assert!(p <= last);
        last = p;
    }
}
