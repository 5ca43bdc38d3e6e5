//! Data tables compiled into the crate so the harness and the browser demo
//! work without a data directory.

use crate::catalog::{Catalog, CriterionMap, Instrument};
use crate::prompts::PromptTables;

pub const IPIP_NEO_BANK: &str = include_str!("../data/banks/ipip-neo.tsv");
pub const BFI_BANK: &str = include_str!("../data/banks/bfi.tsv");
pub const PANAS_BANK: &str = include_str!("../data/banks/panas.tsv");
pub const BPAQ_BANK: &str = include_str!("../data/banks/bpaq.tsv");
pub const SSCS_BANK: &str = include_str!("../data/banks/sscs.tsv");
pub const PVQ_RR_BANK: &str = include_str!("../data/banks/pvq-rr.tsv");
pub const DEMO_BANK: &str = include_str!("../data/banks/demo.tsv");
pub const CRITERIA: &str = include_str!("../data/criteria.toml");

pub const DESCRIPTIONS: &str = include_str!("../data/descriptions.txt");
pub const INSTRUCTIONS: &str = include_str!("../data/instructions.txt");
pub const POSTAMBLES: &str = include_str!("../data/postambles.tsv");
pub const MARKERS: &str = include_str!("../data/markers.tsv");
pub const SHAPING_SETS: &str = include_str!("../data/shaping_sets.tsv");

/// The six-instrument battery (IPIP-NEO, BFI and the criterion measures):
/// 419 items in total.
pub fn battery() -> Catalog {
    let banks = [IPIP_NEO_BANK, BFI_BANK, PANAS_BANK, BPAQ_BANK, SSCS_BANK, PVQ_RR_BANK];
    let instruments = banks
        .iter()
        .map(|b| Instrument::parse_bank(b).expect("shipped bank is valid"))
        .collect();
    Catalog::new(instruments, CriterionMap::parse(CRITERIA).expect("shipped criteria are valid"))
        .expect("shipped catalog is valid")
}

pub fn demo_instrument() -> Instrument {
    Instrument::parse_bank(DEMO_BANK).expect("shipped demo bank is valid")
}

pub fn prompt_tables() -> PromptTables {
    PromptTables::parse(DESCRIPTIONS, INSTRUCTIONS, POSTAMBLES, MARKERS, SHAPING_SETS)
        .expect("shipped prompt tables are valid")
}
