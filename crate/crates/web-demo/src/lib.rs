//! Browser bindings: score the demo questionnaire, compute reliability for
//! pasted item data, and shape a persona against a simulated respondent.
//!
//! Every function takes and returns JSON strings so the page needs no glue
//! beyond the generated bindings.

use serde::Serialize;
use serde_json::json;
use synthpersona_core::builtin;
use synthpersona_core::catalog::{column_label, Keying};
use synthpersona_core::prompts::{PersonaOrder, ShapingProfile, SimulatedResponseProfile};
use synthpersona_core::psychometrics::{reliability_report, ItemMatrix};
use synthpersona_core::respondent::{latent_from_shaping, NoiseModel, SyntheticRespondent};
use synthpersona_core::scoring::{build_score_matrix, key_item, score_subscale, MissingPolicy, ResponseRecord};
use synthpersona_core::Domain;
use wasm_bindgen::prelude::*;

const SHAPED_INSTRUMENT: &str = "IPIP-NEO";

fn fail(e: impl std::fmt::Display) -> JsValue {
    JsValue::from_str(&e.to_string())
}

fn to_json(v: &impl Serialize) -> Result<String, JsValue> {
    serde_json::to_string(v).map_err(fail)
}

/// Items and response options of the demo questionnaire.
#[wasm_bindgen]
pub fn demo_items() -> String {
    let demo = builtin::demo_instrument();
    json!({
        "options": demo.scale_options().iter().map(|(v, l)| json!({"value": v, "label": l})).collect::<Vec<_>>(),
        "items": demo.items().iter().map(|i| json!({
            "id": i.item_id,
            "text": i.text,
            "subscale": i.subscale_id,
            "reversed": i.keyed == Keying::Negative,
        })).collect::<Vec<_>>(),
    })
    .to_string()
}

/// Subscale scores for comma-separated answers to the demo items, in item order.
#[wasm_bindgen]
pub fn score_demo(answers: &str) -> Result<String, JsValue> {
    let demo = builtin::demo_instrument();
    let values: Vec<u8> = answers
        .split(',')
        .map(|a| a.trim().parse::<u8>().map_err(|_| fail(format!("not an answer: {a:?}"))))
        .collect::<Result<_, _>>()?;
    if values.len() != demo.items().len() {
        return Err(fail(format!("expected {} answers, got {}", demo.items().len(), values.len())));
    }
    let mut keyed = Vec::new();
    for (item, &v) in demo.items().iter().zip(&values) {
        keyed.push(key_item(v, item.keyed, demo.scale()).map_err(fail)?);
    }
    let mut subscales = Vec::new();
    for sub in demo.subscales() {
        let answer = |id: &str| demo.item_position(id).map(|p| values[p]);
        let (score, n) = score_subscale(&demo, sub, answer).map_err(fail)?;
        subscales.push(json!({"id": sub.subscale_id, "name": sub.construct, "score": score, "items": n}));
    }
    Ok(json!({"keyed": keyed, "subscales": subscales}).to_string())
}

/// α, λ6 and ω for a tab- or comma-separated item matrix with a header row.
#[wasm_bindgen]
pub fn reliability(table: &str) -> Result<String, JsValue> {
    let mut lines = table.lines().map(str::trim).filter(|l| !l.is_empty());
    let split = |l: &str| -> Vec<String> {
        let sep = if l.contains('\t') { '\t' } else { ',' };
        l.split(sep).map(|c| c.trim().to_string()).collect()
    };
    let header = split(lines.next().ok_or_else(|| fail("empty table"))?);
    let mut rows = Vec::new();
    for (n, line) in lines.enumerate() {
        let row: Vec<f64> = split(line)
            .iter()
            .map(|c| c.parse::<f64>().map_err(|_| fail(format!("row {}: not a number: {c:?}", n + 1))))
            .collect::<Result<_, _>>()?;
        if row.len() != header.len() {
            return Err(fail(format!("row {} has {} values for {} items", n + 1, row.len(), header.len())));
        }
        rows.push(row);
    }
    let m = ItemMatrix::from_rows(header, &rows).map_err(fail)?;
    let report = reliability_report("pasted", &m).map_err(fail)?;
    Ok(json!({
        "report": report,
        "bands": {
            "alpha": report.alpha_band.label(),
            "lambda6": report.lambda6_band.label(),
            "omega": report.omega_band.label(),
            "overall": format!("{} {}", report.overall.mark(), report.overall.label()),
        },
    })
    .to_string())
}

#[derive(Serialize)]
struct ShapedScore {
    domain: &'static str,
    name: &'static str,
    level: Option<u8>,
    score: f64,
}

/// Persona text, a sample prompt and simulated domain scores for a shaping
/// code such as `70000` (one domain at level 7) or `19191` (all at extremes).
#[wasm_bindgen]
pub fn shape(code: &str, sigma: f64, seed: u32) -> Result<String, JsValue> {
    if !(0.0..=3.0).contains(&sigma) {
        return Err(fail("sigma must be between 0 and 3"));
    }
    let shaping = ShapingProfile::from_code(code).map_err(fail)?;
    let catalog = builtin::battery();
    let tables = builtin::prompt_tables();
    let inst = catalog.instrument(SHAPED_INSTRUMENT).map_err(fail)?;
    let profile = SimulatedResponseProfile::new(1, 1, 1, Some(shaping));
    let persona = tables.persona_text(&profile, PersonaOrder::DescriptionFirst).map_err(fail)?;
    let sample = tables.admin_prompt_for(&profile, inst, &inst.items()[0]).map_err(fail)?;

    let latent = latent_from_shaping(&shaping).with_noise(sigma, u64::from(seed));
    let respondent = SyntheticRespondent::new(
        if sigma > 0.0 { NoiseModel::GaussianOnLatent } else { NoiseModel::None },
        catalog.criteria.clone(),
    );
    let records: Vec<ResponseRecord> = inst
        .items()
        .iter()
        .filter_map(|item| {
            let v = respondent.respond(&latent, &profile.profile_id, inst, item)?;
            Some(ResponseRecord::answered(&profile.profile_id, inst.id(), &item.item_id, v, "mock"))
        })
        .collect();
    let scores = build_score_matrix(&records, &[inst], MissingPolicy::ExcludeRow).map_err(fail)?;
    let mut out = Vec::new();
    for d in Domain::ALL {
        let score = scores.get(&profile.profile_id, &column_label(inst.id(), d.code())).ok_or_else(|| fail("no score"))?;
        out.push(ShapedScore { domain: d.code(), name: d.name(), level: shaping.level(d), score });
    }
    to_json(&json!({"persona": persona, "prompt": sample.text, "scores": out}))
}
