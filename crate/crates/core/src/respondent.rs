//! Deterministic synthetic respondent.
//!
//! A latent profile holds one θ in `[1, 5]` per Big Five domain. An item's
//! response is θ mapped onto the instrument scale, reflected for
//! reverse-keyed items, perturbed by Gaussian noise, then rounded (half away
//! from zero) and clamped. Every draw is seeded from `(seed, profile, item)`
//! so a response never depends on administration order.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::catalog::{CriterionMap, Instrument, Item, Keying, ResponseScale, Sign};
use crate::domain::Domain;
use crate::prompts::ShapingProfile;

pub const THETA_MIN: f64 = 1.0;
pub const THETA_MAX: f64 = 5.0;
pub const THETA_MID: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseModel {
    None,
    #[default]
    GaussianOnLatent,
    /// Uniform draw over the scale; θ is ignored.
    UniformRandomResponder,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatentProfile {
    pub theta: [f64; 5],
    pub sigma: f64,
    pub seed: u64,
}

impl LatentProfile {
    pub fn new(theta: [f64; 5], sigma: f64, seed: u64) -> Self {
        Self { theta, sigma, seed }
    }

    pub fn theta(&self, domain: Domain) -> f64 {
        self.theta[domain.index()]
    }

    pub fn with_noise(mut self, sigma: f64, seed: u64) -> Self {
        self.sigma = sigma;
        self.seed = seed;
        self
    }

    /// Latent for a criterion subscale: the mean over its linked domains of
    /// θ (positive link) or the reflected θ (negative link). `None` when no
    /// pair in `criteria` names the subscale.
    pub fn criterion_theta(&self, criteria: &CriterionMap, instrument_id: &str, subscale_id: &str) -> Option<f64> {
        let (sum, n) = criteria
            .pairs
            .iter()
            .filter(|p| p.instrument == instrument_id && p.subscale == subscale_id)
            .fold((0.0, 0usize), |(s, n), p| {
                let t = self.theta(p.domain);
                let v = match p.sign {
                    Sign::Positive => t,
                    Sign::Negative => THETA_MIN + THETA_MAX - t,
                };
                (s + v, n + 1)
            });
        (n > 0).then(|| sum / n as f64)
    }

    /// θ driving responses to `item`: its subscale's domain if it has one,
    /// otherwise the criterion latent.
    pub fn item_theta(&self, criteria: &CriterionMap, instrument: &Instrument, item: &Item) -> Option<f64> {
        match Domain::from_code(&item.subscale_id) {
            Some(d) => Some(self.theta(d)),
            None => self.criterion_theta(criteria, instrument.id(), &item.subscale_id),
        }
    }
}

/// `θ_d = 1 + (level_d - 1) / 2` for targeted domains; untargeted domains sit
/// at the midpoint. Noise parameters start at zero.
pub fn latent_from_shaping(shaping: &ShapingProfile) -> LatentProfile {
    let mut theta = [THETA_MID; 5];
    for (d, level) in shaping.targeted() {
        theta[d.index()] = 1.0 + (f64::from(level) - 1.0) / 2.0;
    }
    LatentProfile::new(theta, 0.0, 0)
}

/// Independent uniform θ per domain, reproducible from `(seed, profile_id)`.
pub fn random_latent(seed: u64, profile_id: &str) -> [f64; 5] {
    let mut rng = seeded_rng(seed, &["theta", profile_id]);
    std::array::from_fn(|_| rng.random_range(THETA_MIN..=THETA_MAX))
}

/// ChaCha stream keyed by the SHA-256 of the seed and the given parts.
pub fn seeded_rng(seed: u64, parts: &[&str]) -> ChaCha8Rng {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p.as_bytes());
    }
    ChaCha8Rng::from_seed(h.finalize().into())
}

/// Position of θ on the scale before keying.
pub fn scale_point(theta: f64, scale: &ResponseScale) -> f64 {
    let (lo, hi) = (f64::from(scale.min()), f64::from(scale.max()));
    lo + (theta - THETA_MIN) / (THETA_MAX - THETA_MIN) * (hi - lo)
}

/// One response value. `theta` is the latent for the item's construct.
pub fn simulate_response(
    latent: &LatentProfile,
    noise: NoiseModel,
    profile_id: &str,
    theta: f64,
    item: &Item,
    scale: &ResponseScale,
) -> u8 {
    let mut rng = seeded_rng(latent.seed, &[profile_id, &item.item_id]);
    let (lo, hi) = (scale.min(), scale.max());
    if noise == NoiseModel::UniformRandomResponder {
        return rng.random_range(lo..=hi);
    }
    let point = scale_point(theta, scale);
    let mut raw = match item.keyed {
        Keying::Positive => point,
        Keying::Negative => f64::from(lo) + f64::from(hi) - point,
    };
    if noise == NoiseModel::GaussianOnLatent && latent.sigma > 0.0 {
        let normal = Normal::new(0.0, latent.sigma).expect("finite nonnegative sigma");
        raw += normal.sample(&mut rng);
    }
    raw.round().clamp(f64::from(lo), f64::from(hi)) as u8
}

/// Bundles the noise model and criterion map needed to answer any battery item.
#[derive(Debug, Clone)]
pub struct SyntheticRespondent {
    pub noise: NoiseModel,
    pub criteria: CriterionMap,
}

impl SyntheticRespondent {
    pub fn new(noise: NoiseModel, criteria: CriterionMap) -> Self {
        Self { noise, criteria }
    }

    /// `None` when the item's construct has no latent (neither a domain nor
    /// a mapped criterion) and the noise model needs one.
    pub fn respond(&self, latent: &LatentProfile, profile_id: &str, instrument: &Instrument, item: &Item) -> Option<u8> {
        let theta = match self.noise {
            NoiseModel::UniformRandomResponder => THETA_MID,
            _ => latent.item_theta(&self.criteria, instrument, item)?,
        };
        Some(simulate_response(latent, self.noise, profile_id, theta, item, instrument.scale()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builtin;

    fn item(keyed: Keying) -> Item {
        Item { item_id: "e1".into(), text: "t".into(), subscale_id: "EXT".into(), keyed }
    }

    fn five() -> ResponseScale {
        ResponseScale::from_labels(&["a", "b", "c", "d", "e"]).unwrap()
    }

    #[test]
    fn shaping_bridge() {
        for (level, theta) in [(9, 5.0), (5, 3.0), (1, 1.0), (4, 2.5)] {
            let s = ShapingProfile::single(Domain::Extraversion, level).unwrap();
            let l = latent_from_shaping(&s);
            assert_eq!(l.theta(Domain::Extraversion), theta);
            assert_eq!(l.theta(Domain::Openness), 3.0);
        }
    }

    #[test]
    fn noiseless_endpoints() {
        let l = LatentProfile::new([5.0; 5], 0.0, 1);
        assert_eq!(simulate_response(&l, NoiseModel::None, "p", 5.0, &item(Keying::Positive), &five()), 5);
        assert_eq!(simulate_response(&l, NoiseModel::None, "p", 5.0, &item(Keying::Negative), &five()), 1);
        let six = ResponseScale::from_labels(&["1", "2", "3", "4", "5", "6"]).unwrap();
        assert_eq!(simulate_response(&l, NoiseModel::None, "p", 1.0, &item(Keying::Positive), &six), 1);
        assert_eq!(simulate_response(&l, NoiseModel::None, "p", 5.0, &item(Keying::Positive), &six), 6);
    }

    #[test]
    fn deterministic_per_key() {
        let l = LatentProfile::new([3.3; 5], 1.0, 42);
        let a = simulate_response(&l, NoiseModel::GaussianOnLatent, "p1", 3.3, &item(Keying::Positive), &five());
        for _ in 0..5 {
            assert_eq!(a, simulate_response(&l, NoiseModel::GaussianOnLatent, "p1", 3.3, &item(Keying::Positive), &five()));
        }
        assert_eq!(random_latent(7, "x"), random_latent(7, "x"));
        assert_ne!(random_latent(7, "x"), random_latent(8, "x"));
        assert!(random_latent(7, "x").iter().all(|t| (1.0..=5.0).contains(t)));
    }

    #[test]
    fn criterion_latents_follow_signs() {
        let cat = builtin::battery();
        let mut theta = [3.0; 5];
        theta[Domain::Extraversion.index()] = 5.0;
        theta[Domain::Neuroticism.index()] = 1.0;
        let l = LatentProfile::new(theta, 0.0, 0);
        assert_eq!(l.criterion_theta(&cat.criteria, "PANAS", "PA"), Some(5.0));
        assert_eq!(l.criterion_theta(&cat.criteria, "PANAS", "NA"), Some(1.0));
        assert_eq!(l.criterion_theta(&cat.criteria, "PANAS", "XX"), None);
    }

    #[test]
    fn uniform_responder_covers_scale() {
        let l = LatentProfile::new([5.0; 5], 0.0, 3);
        let mut seen = [false; 5];
        for i in 0..200 {
            let it = Item { item_id: format!("i{i}"), ..item(Keying::Positive) };
            let v = simulate_response(&l, NoiseModel::UniformRandomResponder, "p", 5.0, &it, &five());
            seen[usize::from(v - 1)] = true;
        }
        assert!(seen.iter().all(|s| *s));
    }
}
