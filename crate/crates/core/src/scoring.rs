//! Keying, subscale scoring and score matrices.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::catalog::{column_label, Instrument, Keying, ResponseScale, Subscale};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ScoringError {
    #[error("value {value} outside scale {min}..={max}")]
    OutOfScale { value: u8, min: u8, max: u8 },
    #[error("all items missing for subscale {0}")]
    AllMissing(String),
    #[error("duplicate record for profile {profile}, item {instrument}/{item}")]
    Duplicate { profile: String, instrument: String, item: String },
    #[error("record names unknown instrument {0}")]
    UnknownInstrument(String),
    #[error("record names unknown item {instrument}/{item}")]
    UnknownItem { instrument: String, item: String },
    #[error("unknown column {0}")]
    UnknownColumn(String),
    #[error("score table line {line}: {message}")]
    Parse { line: usize, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct RecordFlags {
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub tie_break: bool,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub retried: bool,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub missing: bool,
}

/// One administered item. `raw` is `None` exactly when the missing flag is set.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResponseRecord {
    pub profile_id: String,
    pub instrument_id: String,
    pub item_id: String,
    pub raw: Option<u8>,
    pub backend: String,
    #[serde(default)]
    pub flags: RecordFlags,
}

impl ResponseRecord {
    pub fn answered(profile_id: &str, instrument_id: &str, item_id: &str, raw: u8, backend: &str) -> Self {
        Self {
            profile_id: profile_id.into(),
            instrument_id: instrument_id.into(),
            item_id: item_id.into(),
            raw: Some(raw),
            backend: backend.into(),
            flags: RecordFlags::default(),
        }
    }

    pub fn missing(profile_id: &str, instrument_id: &str, item_id: &str, backend: &str) -> Self {
        Self {
            raw: None,
            flags: RecordFlags { missing: true, ..RecordFlags::default() },
            ..Self::answered(profile_id, instrument_id, item_id, 0, backend)
        }
    }
}

/// Positive items keep their value; negative items reflect to `min + max - raw`.
pub fn key_item(raw: u8, keyed: Keying, scale: &ResponseScale) -> Result<u8, ScoringError> {
    if !scale.contains(raw) {
        return Err(ScoringError::OutOfScale { value: raw, min: scale.min(), max: scale.max() });
    }
    Ok(match keyed {
        Keying::Positive => raw,
        Keying::Negative => scale.min() + scale.max() - raw,
    })
}

/// Mean keyed value over the answered items of `subscale`. `raw` looks up a
/// raw response by item id; `None` means missing.
pub fn score_subscale(
    instrument: &Instrument,
    subscale: &Subscale,
    raw: impl Fn(&str) -> Option<u8>,
) -> Result<(f64, usize), ScoringError> {
    let mut sum = 0u32;
    let mut n = 0usize;
    for id in &subscale.item_ids {
        let item = instrument
            .item(id)
            .ok_or_else(|| ScoringError::UnknownItem { instrument: instrument.id().into(), item: id.clone() })?;
        if let Some(v) = raw(id) {
            sum += u32::from(key_item(v, item.keyed, instrument.scale())?);
            n += 1;
        }
    }
    if n == 0 {
        return Err(ScoringError::AllMissing(subscale.subscale_id.clone()));
    }
    Ok((f64::from(sum) / n as f64, n))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "mode")]
pub enum MissingPolicy {
    /// Any missing item empties the (profile, subscale) cell.
    #[default]
    ExcludeRow,
    /// Score from the answered items when at most `max_missing` are missing.
    MeanImpute { max_missing: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Slot {
    Absent,
    Missing,
    Value(u8),
}

/// Validated raw responses indexed by (profile, instrument, item).
#[derive(Debug, Clone, Default)]
pub struct ResponseTable {
    profiles: Vec<String>,
    profile_index: HashMap<String, usize>,
    instrument_index: HashMap<String, usize>,
    /// `slots[profile][instrument][item position]`.
    slots: Vec<Vec<Vec<Slot>>>,
    len: usize,
}

impl ResponseTable {
    /// Rejects duplicates, unknown instruments/items and out-of-scale values.
    /// Profiles keep first-seen order.
    pub fn build<'r>(
        records: impl IntoIterator<Item = &'r ResponseRecord>,
        instruments: &[&Instrument],
    ) -> Result<Self, ScoringError> {
        let mut table = ResponseTable {
            instrument_index: instruments.iter().enumerate().map(|(i, inst)| (inst.id().to_string(), i)).collect(),
            ..ResponseTable::default()
        };
        for r in records {
            let &ii = table
                .instrument_index
                .get(&r.instrument_id)
                .ok_or_else(|| ScoringError::UnknownInstrument(r.instrument_id.clone()))?;
            let inst = instruments[ii];
            let pos = inst
                .item_position(&r.item_id)
                .ok_or_else(|| ScoringError::UnknownItem { instrument: r.instrument_id.clone(), item: r.item_id.clone() })?;
            let slot = match (r.flags.missing, r.raw) {
                (false, Some(v)) if inst.scale().contains(v) => Slot::Value(v),
                (false, Some(v)) => {
                    return Err(ScoringError::OutOfScale { value: v, min: inst.scale().min(), max: inst.scale().max() })
                }
                _ => Slot::Missing,
            };
            let pi = match table.profile_index.get(&r.profile_id) {
                Some(&pi) => pi,
                None => {
                    table.profile_index.insert(r.profile_id.clone(), table.profiles.len());
                    table.profiles.push(r.profile_id.clone());
                    table.slots.push(instruments.iter().map(|i| vec![Slot::Absent; i.items().len()]).collect());
                    table.profiles.len() - 1
                }
            };
            let cell = &mut table.slots[pi][ii][pos];
            if *cell != Slot::Absent {
                return Err(ScoringError::Duplicate {
                    profile: r.profile_id.clone(),
                    instrument: r.instrument_id.clone(),
                    item: r.item_id.clone(),
                });
            }
            *cell = slot;
            table.len += 1;
        }
        Ok(table)
    }

    pub fn profiles(&self) -> &[String] {
        &self.profiles
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    fn slot(&self, profile: &str, instrument: &Instrument, item: &str) -> Slot {
        let (Some(&pi), Some(&ii), Some(pos)) = (
            self.profile_index.get(profile),
            self.instrument_index.get(instrument.id()),
            instrument.item_position(item),
        ) else {
            return Slot::Absent;
        };
        self.slots[pi][ii][pos]
    }

    /// `None` if absent or missing.
    pub fn raw(&self, profile: &str, instrument: &Instrument, item: &str) -> Option<u8> {
        match self.slot(profile, instrument, item) {
            Slot::Value(v) => Some(v),
            _ => None,
        }
    }

    pub fn has_record(&self, profile: &str, instrument: &Instrument, item: &str) -> bool {
        self.slot(profile, instrument, item) != Slot::Absent
    }

    /// Keyed item matrix (respondents x items) for one subscale, keeping only
    /// profiles that answered every item.
    pub fn item_matrix(&self, instrument: &Instrument, subscale: &Subscale) -> (Vec<String>, Vec<Vec<f64>>) {
        let mut rows = Vec::new();
        let mut ids = Vec::new();
        'profiles: for p in &self.profiles {
            let mut row = Vec::with_capacity(subscale.item_ids.len());
            for id in &subscale.item_ids {
                let item = instrument.item(id).expect("subscale items resolve");
                match self.raw(p, instrument, id) {
                    Some(v) => row.push(f64::from(key_item(v, item.keyed, instrument.scale()).expect("validated"))),
                    None => continue 'profiles,
                }
            }
            ids.push(p.clone());
            rows.push(row);
        }
        (ids, rows)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreCell {
    pub score: Option<f64>,
    pub n_items: usize,
}

/// Profiles x subscale columns (labelled `INSTRUMENT/SUBSCALE`). Empty cells
/// are excluded under the recorded missing policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreMatrix {
    pub rows: Vec<String>,
    pub columns: Vec<String>,
    pub cells: Vec<Vec<ScoreCell>>,
    pub policy: MissingPolicy,
    /// Cells emptied by the policy, per column.
    pub excluded: BTreeMap<String, usize>,
}

impl ScoreMatrix {
    pub fn column_index(&self, label: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == label)
    }

    pub fn column(&self, label: &str) -> Result<Vec<Option<f64>>, ScoringError> {
        let j = self.column_index(label).ok_or_else(|| ScoringError::UnknownColumn(label.into()))?;
        Ok(self.cells.iter().map(|r| r[j].score).collect())
    }

    pub fn get(&self, profile: &str, label: &str) -> Option<f64> {
        let i = self.rows.iter().position(|r| r == profile)?;
        let j = self.column_index(label)?;
        self.cells[i][j].score
    }

    /// Rows complete on every listed column, as `(profile ids, one series per column)`.
    pub fn complete_rows(&self, labels: &[String]) -> Result<(Vec<String>, Vec<Vec<f64>>), ScoringError> {
        let idx = labels
            .iter()
            .map(|l| self.column_index(l).ok_or_else(|| ScoringError::UnknownColumn(l.clone())))
            .collect::<Result<Vec<_>, _>>()?;
        let mut ids = Vec::new();
        let mut series = vec![Vec::new(); labels.len()];
        for (i, row) in self.cells.iter().enumerate() {
            if idx.iter().all(|&j| row[j].score.is_some()) {
                ids.push(self.rows[i].clone());
                for (s, &j) in series.iter_mut().zip(&idx) {
                    s.push(row[j].score.expect("checked"));
                }
            }
        }
        Ok((ids, series))
    }

    /// Long-format table `profile_id  subscale_id  score  n_items`; empty
    /// cells are omitted.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("profile_id\tsubscale_id\tscore\tn_items\n");
        for (p, row) in self.rows.iter().zip(&self.cells) {
            for (c, cell) in self.columns.iter().zip(row) {
                if let Some(s) = cell.score {
                    let _ = writeln!(out, "{p}\t{c}\t{s}\t{}", cell.n_items);
                }
            }
        }
        out
    }

    pub fn from_tsv(text: &str) -> Result<Self, ScoringError> {
        let mut rows: Vec<String> = Vec::new();
        let mut columns: Vec<String> = Vec::new();
        let mut entries = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if i == 0 {
                if line != "profile_id\tsubscale_id\tscore\tn_items" {
                    return Err(ScoringError::Parse { line: 1, message: "bad header".into() });
                }
                continue;
            }
            if line.is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split('\t').collect();
            let bad = |m: &str| ScoringError::Parse { line: i + 1, message: m.into() };
            if f.len() != 4 {
                return Err(bad("expected 4 fields"));
            }
            let score: f64 = f[2].parse().map_err(|_| bad("bad score"))?;
            let n: usize = f[3].parse().map_err(|_| bad("bad n_items"))?;
            if !rows.iter().any(|r| r == f[0]) {
                rows.push(f[0].into());
            }
            if !columns.iter().any(|c| c == f[1]) {
                columns.push(f[1].into());
            }
            entries.push((f[0].to_string(), f[1].to_string(), score, n));
        }
        let ri: HashMap<&str, usize> = rows.iter().enumerate().map(|(i, r)| (r.as_str(), i)).collect();
        let ci: HashMap<&str, usize> = columns.iter().enumerate().map(|(i, c)| (c.as_str(), i)).collect();
        let mut cells = vec![vec![ScoreCell { score: None, n_items: 0 }; columns.len()]; rows.len()];
        for (p, c, s, n) in &entries {
            cells[ri[p.as_str()]][ci[c.as_str()]] = ScoreCell { score: Some(*s), n_items: *n };
        }
        Ok(Self { rows, columns, cells, policy: MissingPolicy::default(), excluded: BTreeMap::new() })
    }
}

/// One row per profile with any record, one column per subscale of each
/// instrument (in instrument order).
pub fn build_score_matrix<'r>(
    records: impl IntoIterator<Item = &'r ResponseRecord>,
    instruments: &[&Instrument],
    policy: MissingPolicy,
) -> Result<ScoreMatrix, ScoringError> {
    let table = ResponseTable::build(records, instruments)?;
    Ok(score_table(&table, instruments, policy))
}

pub fn score_table(table: &ResponseTable, instruments: &[&Instrument], policy: MissingPolicy) -> ScoreMatrix {
    let mut columns = Vec::new();
    for inst in instruments {
        for s in inst.subscales() {
            columns.push((column_label(inst.id(), &s.subscale_id), *inst, s));
        }
    }
    let mut excluded: BTreeMap<String, usize> = BTreeMap::new();
    let mut cells = Vec::with_capacity(table.profiles.len());
    for p in &table.profiles {
        let mut row = Vec::with_capacity(columns.len());
        for (label, inst, sub) in &columns {
            let lookup = |id: &str| table.raw(p, inst, id);
            let answered = sub.item_ids.iter().filter(|id| lookup(id).is_some()).count();
            let missing = sub.item_ids.len() - answered;
            let allowed = match policy {
                MissingPolicy::ExcludeRow => 0,
                MissingPolicy::MeanImpute { max_missing } => max_missing,
            };
            let administered = sub.item_ids.iter().any(|id| table.has_record(p, inst, id));
            let cell = if answered > 0 && missing <= allowed {
                let (score, n) = score_subscale(inst, sub, lookup).expect("validated records");
                ScoreCell { score: Some(score), n_items: n }
            } else {
                if administered {
                    *excluded.entry(label.clone()).or_default() += 1;
                }
                ScoreCell { score: None, n_items: answered }
            };
            row.push(cell);
        }
        cells.push(row);
    }
    ScoreMatrix {
        rows: table.profiles.clone(),
        columns: columns.into_iter().map(|(l, _, _)| l).collect(),
        cells,
        policy,
        excluded,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builtin;

    fn five() -> ResponseScale {
        ResponseScale::from_labels(&["a", "b", "c", "d", "e"]).unwrap()
    }

    #[test]
    fn keying_examples() {
        assert_eq!(key_item(5, Keying::Negative, &five()).unwrap(), 1);
        assert_eq!(key_item(3, Keying::Negative, &five()).unwrap(), 3);
        let six = ResponseScale::from_labels(&["1", "2", "3", "4", "5", "6"]).unwrap();
        assert_eq!(key_item(2, Keying::Negative, &six).unwrap(), 5);
        assert!(matches!(key_item(6, Keying::Positive, &five()), Err(ScoringError::OutOfScale { .. })));
    }

    #[test]
    fn subscale_means() {
        let demo = builtin::demo_instrument();
        let ext = demo.subscale("EXT").unwrap();
        let positive_4 = |id: &str| {
            let item = demo.item(id).unwrap();
            Some(if item.keyed == Keying::Positive { 4 } else { 2 })
        };
        assert_eq!(score_subscale(&demo, ext, positive_4).unwrap(), (4.0, 4));
        assert_eq!(score_subscale(&demo, ext, |_| None), Err(ScoringError::AllMissing("EXT".into())));
    }

    #[test]
    fn matrix_and_duplicates() {
        let demo = builtin::demo_instrument();
        let mut records: Vec<ResponseRecord> =
            demo.items().iter().map(|i| ResponseRecord::answered("p1", "DEMO", &i.item_id, 3, "mock")).collect();
        let m = build_score_matrix(&records, &[&demo], MissingPolicy::ExcludeRow).unwrap();
        assert_eq!(m.rows, vec!["p1".to_string()]);
        assert_eq!(m.columns.len(), 5);
        assert!(m.cells[0].iter().all(|c| c.score == Some(3.0)));
        assert_eq!(ScoreMatrix::from_tsv(&m.to_tsv()).unwrap().to_tsv(), m.to_tsv());

        records.push(records[0].clone());
        assert!(matches!(
            build_score_matrix(&records, &[&demo], MissingPolicy::ExcludeRow),
            Err(ScoringError::Duplicate { .. })
        ));
    }

    #[test]
    fn missing_policies() {
        let demo = builtin::demo_instrument();
        let mut records: Vec<ResponseRecord> =
            demo.items().iter().map(|i| ResponseRecord::answered("p1", "DEMO", &i.item_id, 5, "mock")).collect();
        let first_ext = demo.subscale("EXT").unwrap().item_ids[0].clone();
        let pos = records.iter().position(|r| r.item_id == first_ext).unwrap();
        records[pos] = ResponseRecord::missing("p1", "DEMO", &first_ext, "mock");
        let m = build_score_matrix(&records, &[&demo], MissingPolicy::ExcludeRow).unwrap();
        assert_eq!(m.get("p1", "DEMO/EXT"), None);
        assert_eq!(m.excluded.get("DEMO/EXT"), Some(&1));
        let m = build_score_matrix(&records, &[&demo], MissingPolicy::MeanImpute { max_missing: 1 }).unwrap();
        let c = &m.cells[0][m.column_index("DEMO/EXT").unwrap()];
        assert_eq!(c.n_items, 3);
        assert!(c.score.is_some());
    }
}
