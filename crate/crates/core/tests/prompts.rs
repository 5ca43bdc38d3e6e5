use std::collections::HashSet;

use proptest::prelude::*;
use sha2::{Digest, Sha256};
use synthpersona_core::builtin;
use synthpersona_core::prompts::{administration_plan, qualify_adjective, AdjectiveMarker, ShapingMode};
use synthpersona_core::Domain;

fn matrix_digest() -> String {
    let tables = builtin::prompt_tables();
    let cat = builtin::battery();
    let profiles = tables.generate_profile_matrix(3, 5, 5).unwrap();
    let insts: Vec<_> = cat.instruments().collect();
    let mut h = Sha256::new();
    for (p, inst, item) in administration_plan(&profiles, &insts) {
        let spec = tables.admin_prompt_for(p, inst, item).unwrap();
        h.update(spec.profile_id.as_bytes());
        h.update(spec.item_id.as_bytes());
        h.update(spec.text.as_bytes());
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

#[test]
fn prompt_matrix_hash_is_stable() {
    assert_eq!(matrix_digest(), matrix_digest());
}

#[test]
fn every_prompt_has_segments_in_order() {
    let tables = builtin::prompt_tables();
    let cat = builtin::battery();
    let profiles = tables.generate_profile_matrix(2, 5, 5).unwrap();
    for p in &profiles {
        for inst in cat.instruments() {
            let item = &inst.items()[0];
            let spec = tables.admin_prompt_for(p, inst, item).unwrap();
            let parts = [
                "For the following task, respond in a way that matches this description:",
                tables.description(p.description_id).unwrap().text.as_str(),
                tables.instruction(p.instruction_id).unwrap().phrase.as_str(),
                item.text.as_str(),
                tables.postamble(inst.id(), p.postamble_variant).unwrap().text.as_str(),
            ];
            let mut at = 0;
            for part in parts {
                let found = spec.text[at..].find(part).unwrap_or_else(|| panic!("{part:?} missing in order"));
                at += found + part.len();
            }
        }
    }
}

#[test]
fn plan_visits_each_profile_item_once() {
    let tables = builtin::prompt_tables();
    let cat = builtin::battery();
    let profiles = tables.generate_profile_matrix(4, 2, 3).unwrap();
    let insts: Vec<_> = cat.instruments().collect();
    let mut seen = HashSet::new();
    for (p, inst, item) in administration_plan(&profiles, &insts) {
        assert!(seen.insert((p.profile_id.as_str(), inst.id(), item.item_id.as_str())));
    }
    assert_eq!(seen.len(), 24 * 419);
}

#[test]
fn downstream_prompts_mention_topics() {
    let tables = builtin::prompt_tables();
    let profiles = tables.generate_shaping_profiles(ShapingMode::Single);
    assert_eq!(profiles.len(), 2250);
    for p in profiles.iter().step_by(97) {
        let text = tables
            .build_downstream_prompt(p, 20, synthpersona_core::prompts::PersonaOrder::TraitsFirst)
            .unwrap();
        assert!(text.contains("work, family, friends"));
        assert!(text.contains("20 different Facebook status updates"));
    }
}

proptest! {
    #[test]
    fn qualifiers_are_distinct_and_sided(low in "[a-z]{3,12}", high in "[A-Z]{3,12}") {
        let m = AdjectiveMarker::new(Domain::Agreeableness, &low, &high);
        let phrases: Vec<String> = (1..=9).map(|l| qualify_adjective(&m, l).unwrap()).collect();
        let distinct: HashSet<&String> = phrases.iter().collect();
        prop_assert_eq!(distinct.len(), 9);
        for (i, p) in phrases.iter().enumerate() {
            let level = i + 1;
            prop_assert_eq!(p.contains(&low), level <= 5);
            prop_assert_eq!(p.contains(&high), level >= 5);
        }
    }

    #[test]
    fn out_of_range_levels_fail(level in prop_oneof![Just(0u8), 10u8..=255]) {
        let m = AdjectiveMarker::new(Domain::Openness, "a", "b");
        prop_assert!(qualify_adjective(&m, level).is_err());
    }
}
