//! Instrument banks, response scales and criterion maps.
//!
//! Banks are tab-separated text (tabs shown as `→` below). Directive lines
//! start with `@`, comments with `#`, and item rows follow a header line:
//!
//! ```text
//! @instrument→BFI
//! @scale→1→disagree strongly
//! ...
//! @subscale→EXT→Extraversion
//! instrument_id→item_id→subscale_id→keyed→text
//! BFI→bfi_01→EXT→+→...
//! ```
//!
//! [`Instrument::to_bank_string`] writes the canonical form; loading a
//! canonical file and writing it back is byte-identical.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::domain::Domain;

pub const BANK_HEADER: &str = "instrument_id\titem_id\tsubscale_id\tkeyed\ttext";

#[derive(Debug, thiserror::Error)]
pub enum CatalogError {
    #[error("io error reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("duplicate item_id {0:?}")]
    DuplicateItem(String),
    #[error("unresolved subscale {subscale:?} referenced by item {item:?}")]
    UnresolvedSubscale { item: String, subscale: String },
    #[error("scale must have 5 or 6 points, found {0}")]
    ScalePoints(usize),
    #[error("invalid scale: {0}")]
    InvalidScale(String),
    #[error("subscale {0:?} has fewer than 2 items")]
    SubscaleTooSmall(String),
    #[error("instrument {instrument}: {message}")]
    Layout { instrument: String, message: String },
    #[error("invalid criterion map: {0}")]
    Criterion(String),
    #[error("unknown instrument {0:?}")]
    UnknownInstrument(String),
}

/// One labelled point of a response scale.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScaleOption {
    pub value: u8,
    pub label: String,
}

/// Ordered Likert-type options valued `1..=points`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResponseScale {
    options: Vec<ScaleOption>,
}

impl ResponseScale {
    pub fn new(options: Vec<ScaleOption>) -> Result<Self, CatalogError> {
        let points = options.len();
        if points != 5 && points != 6 {
            return Err(CatalogError::ScalePoints(points));
        }
        let mut labels = HashSet::new();
        for (i, opt) in options.iter().enumerate() {
            if usize::from(opt.value) != i + 1 {
                return Err(CatalogError::InvalidScale(format!(
                    "option values must run 1..={points} in order, found {} at position {}",
                    opt.value,
                    i + 1
                )));
            }
            if opt.label.trim().is_empty() {
                return Err(CatalogError::InvalidScale(format!("empty label for value {}", opt.value)));
            }
            if !labels.insert(opt.label.as_str()) {
                return Err(CatalogError::InvalidScale(format!("duplicate label {:?}", opt.label)));
            }
        }
        Ok(Self { options })
    }

    /// Builds a scale from labels; values are assigned 1, 2, ...
    pub fn from_labels<S: AsRef<str>>(labels: &[S]) -> Result<Self, CatalogError> {
        Self::new(
            labels
                .iter()
                .enumerate()
                .map(|(i, l)| ScaleOption { value: (i + 1) as u8, label: l.as_ref().to_string() })
                .collect(),
        )
    }

    pub fn points(&self) -> u8 {
        self.options.len() as u8
    }

    pub fn min(&self) -> u8 {
        1
    }

    pub fn max(&self) -> u8 {
        self.points()
    }

    pub fn options(&self) -> &[ScaleOption] {
        &self.options
    }

    pub fn contains(&self, value: u8) -> bool {
        (self.min()..=self.max()).contains(&value)
    }

    pub fn label(&self, value: u8) -> Option<&str> {
        self.options.get(usize::from(value).checked_sub(1)?).map(|o| o.label.as_str())
    }
}

/// Direction in which an item is keyed relative to its subscale.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Keying {
    #[serde(rename = "+")]
    Positive,
    #[serde(rename = "-")]
    Negative,
}

impl Keying {
    pub fn symbol(self) -> &'static str {
        match self {
            Keying::Positive => "+",
            Keying::Negative => "-",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s.trim() {
            "+" => Some(Keying::Positive),
            // U+2212 shows up in banks exported from word processors.
            "-" | "\u{2212}" => Some(Keying::Negative),
            _ => None,
        }
    }
}

/// Expected direction of a correlation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sign {
    #[serde(rename = "+")]
    Positive,
    #[serde(rename = "-", alias = "\u{2212}")]
    Negative,
}

impl Sign {
    pub fn of(value: f64) -> Option<Sign> {
        if value > 0.0 {
            Some(Sign::Positive)
        } else if value < 0.0 {
            Some(Sign::Negative)
        } else {
            None
        }
    }

    pub fn factor(self) -> f64 {
        match self {
            Sign::Positive => 1.0,
            Sign::Negative => -1.0,
        }
    }
}

impl fmt::Display for Sign {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sign::Positive => "+",
            Sign::Negative => "-",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Item {
    pub item_id: String,
    pub text: String,
    pub subscale_id: String,
    pub keyed: Keying,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Subscale {
    pub subscale_id: String,
    pub construct: String,
    pub item_ids: Vec<String>,
}

impl Subscale {
    /// The Big Five domain this subscale measures, if its id is a domain code.
    pub fn domain(&self) -> Option<Domain> {
        Domain::from_code(&self.subscale_id)
    }
}

/// A validated questionnaire. Immutable once loaded.
#[derive(Debug, Clone)]
pub struct Instrument {
    instrument_id: String,
    scale: ResponseScale,
    subscales: Vec<Subscale>,
    items: Vec<Item>,
    item_index: HashMap<String, usize>,
}

impl PartialEq for Instrument {
    fn eq(&self, other: &Self) -> bool {
        self.instrument_id == other.instrument_id
            && self.scale == other.scale
            && self.subscales == other.subscales
            && self.items == other.items
    }
}

impl Instrument {
    /// Validates and assembles an instrument. Subscale membership is derived
    /// from the items, in item order.
    pub fn new(
        instrument_id: impl Into<String>,
        scale: ResponseScale,
        subscales: Vec<(String, String)>,
        items: Vec<Item>,
    ) -> Result<Self, CatalogError> {
        let instrument_id = instrument_id.into();
        let mut item_index = HashMap::with_capacity(items.len());
        for (i, item) in items.iter().enumerate() {
            if item.item_id.trim().is_empty() {
                return Err(CatalogError::Layout {
                    instrument: instrument_id.clone(),
                    message: "empty item_id".into(),
                });
            }
            if item.text.trim().is_empty() {
                return Err(CatalogError::Layout {
                    instrument: instrument_id.clone(),
                    message: format!("item {:?} has empty text", item.item_id),
                });
            }
            if item_index.insert(item.item_id.clone(), i).is_some() {
                return Err(CatalogError::DuplicateItem(item.item_id.clone()));
            }
        }
        let mut subs: Vec<Subscale> = Vec::with_capacity(subscales.len());
        for (id, construct) in subscales {
            if subs.iter().any(|s| s.subscale_id == id) {
                return Err(CatalogError::Layout {
                    instrument: instrument_id.clone(),
                    message: format!("subscale {id:?} declared twice"),
                });
            }
            subs.push(Subscale { subscale_id: id, construct, item_ids: Vec::new() });
        }
        for item in &items {
            let sub = subs.iter_mut().find(|s| s.subscale_id == item.subscale_id).ok_or_else(|| {
                CatalogError::UnresolvedSubscale { item: item.item_id.clone(), subscale: item.subscale_id.clone() }
            })?;
            sub.item_ids.push(item.item_id.clone());
        }
        if let Some(s) = subs.iter().find(|s| s.item_ids.len() < 2) {
            return Err(CatalogError::SubscaleTooSmall(s.subscale_id.clone()));
        }
        let inst = Self { instrument_id, scale, subscales: subs, items, item_index };
        inst.check_known_layout()?;
        Ok(inst)
    }

    fn check_known_layout(&self) -> Result<(), CatalogError> {
        let expect = |total: usize, per_domain: Option<usize>| -> Result<(), CatalogError> {
            let fail = |message: String| CatalogError::Layout { instrument: self.instrument_id.clone(), message };
            if self.items.len() != total {
                return Err(fail(format!("expected {total} items, found {}", self.items.len())));
            }
            for d in Domain::ALL {
                let sub = self.subscale(d.code()).ok_or_else(|| fail(format!("missing {d} subscale")))?;
                if let Some(n) = per_domain {
                    if sub.item_ids.len() != n {
                        return Err(fail(format!("{d} has {} items, expected {n}", sub.item_ids.len())));
                    }
                }
            }
            Ok(())
        };
        match self.instrument_id.as_str() {
            "IPIP-NEO" => expect(300, Some(60)),
            "BFI" => expect(44, None),
            _ => Ok(()),
        }
    }

    pub fn id(&self) -> &str {
        &self.instrument_id
    }

    pub fn scale(&self) -> &ResponseScale {
        &self.scale
    }

    pub fn subscales(&self) -> &[Subscale] {
        &self.subscales
    }

    pub fn items(&self) -> &[Item] {
        &self.items
    }

    pub fn item(&self, item_id: &str) -> Option<&Item> {
        self.item_index.get(item_id).map(|&i| &self.items[i])
    }

    /// Index of `item_id` in [`Instrument::items`].
    pub fn item_position(&self, item_id: &str) -> Option<usize> {
        self.item_index.get(item_id).copied()
    }

    pub fn subscale(&self, subscale_id: &str) -> Option<&Subscale> {
        self.subscales.iter().find(|s| s.subscale_id == subscale_id)
    }

    /// Ordered `(value, label)` pairs of the response scale.
    pub fn scale_options(&self) -> Vec<(u8, &str)> {
        self.scale.options().iter().map(|o| (o.value, o.label.as_str())).collect()
    }

    pub fn parse_bank(text: &str) -> Result<Self, CatalogError> {
        let mut instrument_id: Option<String> = None;
        let mut scale = Vec::new();
        let mut subscales = Vec::new();
        let mut items = Vec::new();
        let mut header_seen = false;
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.strip_suffix('\r').unwrap_or(raw);
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |message: String| CatalogError::Parse { line: line_no, message };
            let fields: Vec<&str> = line.split('\t').collect();
            if let Some(directive) = fields[0].strip_prefix('@') {
                if header_seen {
                    return Err(err("directive after item header".into()));
                }
                match (directive, fields.len()) {
                    ("instrument", 2) => instrument_id = Some(fields[1].trim().to_string()),
                    ("scale", 3) => {
                        let value: u8 =
                            fields[1].trim().parse().map_err(|_| err(format!("bad scale value {:?}", fields[1])))?;
                        scale.push(ScaleOption { value, label: fields[2].trim().to_string() });
                    }
                    ("subscale", 3) => subscales.push((fields[1].trim().to_string(), fields[2].trim().to_string())),
                    _ => return Err(err(format!("malformed directive {:?}", fields[0]))),
                }
                continue;
            }
            if !header_seen {
                if line != BANK_HEADER {
                    return Err(err(format!("expected header {BANK_HEADER:?}")));
                }
                header_seen = true;
                continue;
            }
            if fields.len() != 5 {
                return Err(err(format!("expected 5 tab-separated fields, found {}", fields.len())));
            }
            let inst = instrument_id.as_deref().ok_or_else(|| err("item before @instrument".into()))?;
            if fields[0] != inst {
                return Err(err(format!("item instrument {:?} does not match {inst:?}", fields[0])));
            }
            let keyed = Keying::parse(fields[3]).ok_or_else(|| err(format!("bad keying {:?}", fields[3])))?;
            items.push(Item {
                item_id: fields[1].to_string(),
                subscale_id: fields[2].to_string(),
                keyed,
                text: fields[4].to_string(),
            });
        }
        let instrument_id = instrument_id.ok_or(CatalogError::Parse { line: 0, message: "missing @instrument".into() })?;
        if !header_seen {
            return Err(CatalogError::Parse { line: 0, message: "missing item header".into() });
        }
        Instrument::new(instrument_id, ResponseScale::new(scale)?, subscales, items)
    }

    /// Canonical bank text.
    pub fn to_bank_string(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("@instrument\t{}\n", self.instrument_id));
        for o in self.scale.options() {
            out.push_str(&format!("@scale\t{}\t{}\n", o.value, o.label));
        }
        for s in &self.subscales {
            out.push_str(&format!("@subscale\t{}\t{}\n", s.subscale_id, s.construct));
        }
        out.push_str(BANK_HEADER);
        out.push('\n');
        for it in &self.items {
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\n",
                self.instrument_id,
                it.item_id,
                it.subscale_id,
                it.keyed.symbol(),
                it.text
            ));
        }
        out
    }
}

pub fn load_instrument(path: impl AsRef<Path>) -> Result<Instrument, CatalogError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|source| CatalogError::Io { path: path.display().to_string(), source })?;
    Instrument::parse_bank(&text)
}

/// One expected association between an IPIP-NEO domain and a criterion subscale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionPair {
    pub domain: Domain,
    pub instrument: String,
    pub subscale: String,
    pub sign: Sign,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub baseline: Option<f64>,
}

impl CriterionPair {
    /// Column label used in score matrices.
    pub fn column(&self) -> String {
        column_label(&self.instrument, &self.subscale)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CriterionMap {
    #[serde(rename = "pair", default)]
    pub pairs: Vec<CriterionPair>,
}

impl CriterionMap {
    pub fn parse(text: &str) -> Result<Self, CatalogError> {
        let map: CriterionMap = toml::from_str(text).map_err(|e| CatalogError::Criterion(e.to_string()))?;
        for p in &map.pairs {
            if let Some(b) = p.baseline {
                if !(-1.0..=1.0).contains(&b) {
                    return Err(CatalogError::Criterion(format!(
                        "baseline {b} for {}/{} outside [-1, 1]",
                        p.domain,
                        p.column()
                    )));
                }
            }
        }
        Ok(map)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, CatalogError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|source| CatalogError::Io { path: path.display().to_string(), source })?;
        Self::parse(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("criterion map serializes")
    }

    /// Criterion columns that load on `domain`.
    pub fn for_domain(&self, domain: Domain) -> impl Iterator<Item = &CriterionPair> {
        self.pairs.iter().filter(move |p| p.domain == domain)
    }
}

/// Score-matrix column label for an instrument subscale, e.g. `IPIP-NEO/EXT`.
pub fn column_label(instrument_id: &str, subscale_id: &str) -> String {
    format!("{instrument_id}/{subscale_id}")
}

/// Every instrument in use plus the criterion map.
#[derive(Debug, Clone, Default)]
pub struct Catalog {
    instruments: BTreeMap<String, Instrument>,
    pub criteria: CriterionMap,
}

impl Catalog {
    pub fn new(instruments: Vec<Instrument>, criteria: CriterionMap) -> Result<Self, CatalogError> {
        let mut map = BTreeMap::new();
        for inst in instruments {
            let id = inst.id().to_string();
            if map.insert(id.clone(), inst).is_some() {
                return Err(CatalogError::Layout { instrument: id, message: "instrument loaded twice".into() });
            }
        }
        let cat = Self { instruments: map, criteria };
        for p in &cat.criteria.pairs {
            if let Some(inst) = cat.instruments.get(&p.instrument) {
                if inst.subscale(&p.subscale).is_none() {
                    return Err(CatalogError::Criterion(format!("unknown criterion subscale {}", p.column())));
                }
            }
        }
        Ok(cat)
    }

    /// Loads every `*.tsv` bank in `dir` and `criteria.toml` if present.
    pub fn load_dir(dir: impl AsRef<Path>) -> Result<Self, CatalogError> {
        let dir = dir.as_ref();
        let io = |source| CatalogError::Io { path: dir.display().to_string(), source };
        let mut paths: Vec<_> = std::fs::read_dir(dir)
            .map_err(io)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|e| e == "tsv"))
            .collect();
        paths.sort();
        let instruments = paths.iter().map(load_instrument).collect::<Result<Vec<_>, _>>()?;
        let crit = dir.join("criteria.toml");
        let criteria = if crit.exists() { CriterionMap::load(crit)? } else { CriterionMap::default() };
        Catalog::new(instruments, criteria)
    }

    pub fn instrument(&self, id: &str) -> Result<&Instrument, CatalogError> {
        self.instruments.get(id).ok_or_else(|| CatalogError::UnknownInstrument(id.to_string()))
    }

    pub fn instruments(&self) -> impl Iterator<Item = &Instrument> {
        self.instruments.values()
    }

    pub fn total_items(&self) -> usize {
        self.instruments.values().map(|i| i.items().len()).sum()
    }
}
