//! In-process backend driven by the synthetic respondent.
//!
//! Survey items are answered from each profile's latent: shaped profiles use
//! the level bridge, unshaped ones a seeded uniform θ table. Generated status
//! updates carry a digits-only latent tag that the echo predictor reads back.

use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use synthpersona_core::prompts::parse_profile_id;
use synthpersona_core::respondent::{latent_from_shaping, random_latent, seeded_rng, LatentProfile, NoiseModel, SyntheticRespondent};
use synthpersona_core::{Catalog, Domain};

use crate::gateway::{Backend, CallError, ChoiceQuery, GenerationRequest};

pub const UPDATE_DELIMITER: char = '\u{22c4}';
const TAG_PREFIX: char = '#';

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MockConfig {
    pub noise: NoiseModel,
    /// Response noise on the latent.
    pub sigma: f64,
    /// Taken from the experiment config.
    #[serde(skip)]
    pub seed: u64,
    /// Latent noise per generated text.
    pub generation_sigma: f64,
    /// Fixed completion returned by `generate` instead of synthetic updates.
    pub template: Option<String>,
}

impl Default for MockConfig {
    fn default() -> Self {
        Self { noise: NoiseModel::GaussianOnLatent, sigma: 0.5, seed: 2024, generation_sigma: 0.0, template: None }
    }
}

#[derive(Debug, Clone)]
pub struct MockBackend {
    config: MockConfig,
    catalog: Arc<Catalog>,
    respondent: SyntheticRespondent,
}

impl MockBackend {
    pub fn new(config: MockConfig, catalog: Arc<Catalog>) -> Self {
        let respondent = SyntheticRespondent::new(config.noise, catalog.criteria.clone());
        Self { config, catalog, respondent }
    }

    pub fn config(&self) -> &MockConfig {
        &self.config
    }

    /// Latent for a profile id: shaping bridge when shaped, otherwise the
    /// seeded θ table.
    pub fn latent(&self, profile_id: &str) -> LatentProfile {
        let theta = match parse_profile_id(profile_id).and_then(|p| p.shaping) {
            Some(s) => latent_from_shaping(&s).theta,
            None => random_latent(self.config.seed, profile_id),
        };
        LatentProfile::new(theta, self.config.sigma, self.config.seed)
    }

    fn answer(&self, query: &ChoiceQuery) -> Result<u8, CallError> {
        let inst = self.catalog.instrument(&query.instrument_id).map_err(|e| CallError::Fatal(e.to_string()))?;
        let item = inst
            .item(&query.item_id)
            .ok_or_else(|| CallError::Fatal(format!("unknown item {}/{}", query.instrument_id, query.item_id)))?;
        let latent = self.latent(&query.profile_id);
        self.respondent
            .respond(&latent, &query.profile_id, inst, item)
            .ok_or_else(|| CallError::Fatal(format!("no latent for subscale {}", item.subscale_id)))
    }

    /// Per-generation latent with Gaussian noise, as carried in the tag.
    pub fn generation_latent(&self, profile_id: &str, repeat: u32) -> [f64; 5] {
        let base = self.latent(profile_id).theta;
        if self.config.generation_sigma <= 0.0 {
            return base;
        }
        let mut rng = seeded_rng(self.config.seed, &["generation", profile_id, &repeat.to_string()]);
        let normal = Normal::new(0.0, self.config.generation_sigma).expect("finite sigma");
        base.map(|t| t + normal.sample(&mut rng))
    }

    /// Updates lean toward the author's most pronounced traits: each one
    /// draws its domain with weight `0.2 + |θ - 3|`.
    fn compose_updates(&self, request: &GenerationRequest, count: usize) -> String {
        let theta = self.latent(&request.profile_id).theta;
        let tag_values = self.generation_latent(&request.profile_id, request.repeat);
        let mut rng = seeded_rng(self.config.seed, &["text", &request.profile_id, &request.repeat.to_string()]);
        let weights = theta.map(|t| 0.2 + (t - 3.0).abs());
        let total: f64 = weights.iter().sum();
        let mut updates = Vec::with_capacity(count + 1);
        for _ in 0..count {
            let mut u = rng.random::<f64>() * total;
            let mut d = Domain::ALL[4];
            for (dom, w) in Domain::ALL.iter().zip(weights) {
                if u < w {
                    d = *dom;
                    break;
                }
                u -= w;
            }
            let words = lexicon(d, theta[d.index()]);
            let w1 = words[rng.random_range(0..words.len())];
            let w2 = words[rng.random_range(0..words.len())];
            let topic = TOPICS[rng.random_range(0..TOPICS.len())];
            updates.push(format!("So {w1} about {topic} today, {w2}!"));
        }
        updates.push(encode_tag(&tag_values));
        let sep = format!(" {UPDATE_DELIMITER} ");
        updates.join(&sep)
    }
}

const TOPICS: [&str; 12] = [
    "work", "family", "friends", "weekend", "romance", "music", "texting", "school", "food", "weather", "sports", "movies",
];

/// Words a mock author at latent `theta` uses for domain `d`.
fn lexicon(d: Domain, theta: f64) -> &'static [&'static str] {
    let high = theta > 3.0;
    let low = theta < 3.0;
    match (d, high, low) {
        (Domain::Extraversion, true, _) => &["party", "crowd", "excited", "loud", "celebrating"],
        (Domain::Extraversion, _, true) => &["quiet", "alone", "reading", "home", "peaceful"],
        (Domain::Agreeableness, true, _) => &["grateful", "kind", "helping", "thankful", "caring"],
        (Domain::Agreeableness, _, true) => &["annoyed", "rude", "stupid", "fight", "whatever"],
        (Domain::Conscientiousness, true, _) => &["organized", "planned", "finished", "schedule", "goals"],
        (Domain::Conscientiousness, _, true) => &["late", "forgot", "messy", "later", "procrastinating"],
        (Domain::Neuroticism, true, _) => &["hate", "depressed", "anxious", "stressed", "crying"],
        (Domain::Neuroticism, _, true) => &["calm", "relaxed", "fine", "steady", "content"],
        (Domain::Openness, true, _) => &["art", "poetry", "universe", "ideas", "museum"],
        (Domain::Openness, _, true) => &["usual", "routine", "normal", "same", "simple"],
        _ => &["okay", "day", "things", "stuff", "pretty"],
    }
}

/// `#` followed by three digits per domain, `round(100 θ)` clamped to 0..=999.
pub fn encode_tag(theta: &[f64; 5]) -> String {
    let mut s = String::from(TAG_PREFIX);
    for t in theta {
        s.push_str(&format!("{:03}", (t * 100.0).round().clamp(0.0, 999.0) as u32));
    }
    s
}

pub fn decode_tag(token: &str) -> Option<[f64; 5]> {
    let digits = token.strip_prefix(TAG_PREFIX)?;
    if digits.len() != 15 || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    Some(std::array::from_fn(|i| digits[3 * i..3 * i + 3].parse::<f64>().expect("digits") / 100.0))
}

/// Mean of every latent tag in `text`.
pub fn echo_prediction(text: &str) -> Option<[f64; 5]> {
    let mut sum = [0.0; 5];
    let mut n = 0usize;
    for tag in text.split_whitespace().filter_map(decode_tag) {
        for (s, t) in sum.iter_mut().zip(tag) {
            *s += t;
        }
        n += 1;
    }
    (n > 0).then(|| sum.map(|s| s / n as f64))
}

impl Backend for MockBackend {
    fn score_options(&self, query: &ChoiceQuery, _: &[String], _: &str) -> Result<Vec<f64>, CallError> {
        let value = f64::from(self.answer(query)?);
        Ok(query.options.iter().map(|o| -(o.parse::<f64>().unwrap_or(f64::INFINITY) - value).abs()).collect())
    }

    fn constrained_choice(&self, query: &ChoiceQuery, continuations: &[String], _: &str) -> Result<String, CallError> {
        let value = self.answer(query)?.to_string();
        let idx = query.options.iter().position(|o| *o == value).ok_or_else(|| CallError::Fatal("answer off scale".into()))?;
        Ok(continuations[idx].clone())
    }

    fn generate(&self, request: &GenerationRequest, _: &str) -> Result<String, CallError> {
        if let Some(t) = &self.config.template {
            return Ok(t.clone());
        }
        let count = update_count(&request.prompt);
        Ok(self.compose_updates(request, count))
    }

    fn predict(&self, _: &str, text: &str, _: &str) -> Result<[f64; 5], CallError> {
        echo_prediction(text).ok_or_else(|| CallError::Fatal("no latent tag in text".into()))
    }
}

/// Number of updates requested by a status-update prompt ("a list of N").
fn update_count(prompt: &str) -> usize {
    prompt
        .split("a list of ")
        .nth(1)
        .and_then(|rest| rest.split_whitespace().next())
        .and_then(|n| n.parse().ok())
        .unwrap_or(synthpersona_core::prompts::DEFAULT_UPDATES_PER_GENERATION)
}
