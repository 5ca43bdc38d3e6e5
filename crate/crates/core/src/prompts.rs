//! Prompt construction for questionnaire administration, trait shaping and
//! the downstream status-update task.
//!
//! An administration prompt is the concatenation
//! `persona instruction + "description" + item instruction + "item", + postamble`.
//! Every builder here is a pure function of its inputs.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::catalog::{Catalog, Instrument, Item};
use crate::domain::Domain;

pub const PERSONA_INSTRUCTION: &str = "For the following task, respond in a way that matches this description:";

/// Placeholder replaced by the requested number of updates.
const DOWNSTREAM_TASK: &str = "Generate a list of {n} different Facebook status updates as this person. \
Each update must be verbose and reflect the person's character and description. \
The updates should cover, but should not be limited to, the following topics: work, family, friends, \
free time, romantic life, TV / music / media consumption, and communication with others.";

pub const DEFAULT_UPDATES_PER_GENERATION: usize = 20;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PromptError {
    #[error("postamble {postamble} belongs to {postamble_instrument}, not {instrument}")]
    InstrumentMismatch { postamble: u8, postamble_instrument: String, instrument: String },
    #[error("item {item:?} is not part of {instrument}")]
    ForeignItem { item: String, instrument: String },
    #[error("shaping level {0} outside 1..=9")]
    LevelOutOfRange(u8),
    #[error("no trait markers for {0}")]
    NoMarkers(Domain),
    #[error("{table} table is empty or smaller than requested ({requested} > {available})")]
    EmptyTable { table: &'static str, requested: usize, available: usize },
    #[error("unknown {table} id {id}")]
    UnknownId { table: &'static str, id: String },
    #[error("invalid shaping profile: {0}")]
    InvalidShaping(String),
    #[error("profile {0} carries no shaping persona")]
    NotShaped(String),
    #[error("{table} line {line}: {message}")]
    Parse { table: &'static str, line: usize, message: String },
    #[error("postamble {postamble} anchors disagree with {instrument} scale: {message}")]
    AnchorMismatch { postamble: u8, instrument: String, message: String },
    #[error("io error reading {path}: {message}")]
    Io { path: String, message: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BiographicDescription {
    pub id: u16,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ItemInstruction {
    pub id: u8,
    pub phrase: String,
}

/// Response directions appended after the item. Each instrument has five
/// parallel variants; `variant` is the 1-based index within the instrument.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ItemPostamble {
    pub id: u8,
    pub instrument_id: String,
    pub variant: u8,
    pub text: String,
}

impl ItemPostamble {
    /// `(value, label)` anchors quoted in the text, e.g. `1 = "very inaccurate"`.
    pub fn anchors(&self) -> Vec<(u8, String)> {
        let mut out = Vec::new();
        let mut rest = self.text.as_str();
        while let Some(pos) = rest.find(" = \"") {
            let value = rest[..pos].chars().rev().take_while(|c| c.is_ascii_digit()).collect::<String>();
            let after = &rest[pos + 4..];
            let Some(end) = after.find('"') else { break };
            if let Ok(v) = value.chars().rev().collect::<String>().parse() {
                out.push((v, after[..end].to_string()));
            }
            rest = &after[end + 1..];
        }
        out
    }
}

/// A bipolar adjective pair marking the low and high ends of a facet.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdjectiveMarker {
    pub domain: Domain,
    pub facet: String,
    pub low: String,
    pub high: String,
}

impl AdjectiveMarker {
    pub fn new(domain: Domain, low: &str, high: &str) -> Self {
        Self { domain, facet: domain.code().to_string(), low: low.into(), high: high.into() }
    }
}

/// Target levels (1..=9) per domain; `None` leaves a domain unprompted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ShapingProfile {
    levels: [Option<u8>; 5],
}

impl ShapingProfile {
    pub fn single(domain: Domain, level: u8) -> Result<Self, PromptError> {
        check_level(level)?;
        let mut levels = [None; 5];
        levels[domain.index()] = Some(level);
        Ok(Self { levels })
    }

    /// Every domain targeted at an extreme (1 or 9).
    pub fn multi(levels: [u8; 5]) -> Result<Self, PromptError> {
        if let Some(l) = levels.iter().find(|l| **l != 1 && **l != 9) {
            return Err(PromptError::InvalidShaping(format!("multi-trait levels must be 1 or 9, got {l}")));
        }
        Ok(Self { levels: levels.map(Some) })
    }

    pub fn level(&self, domain: Domain) -> Option<u8> {
        self.levels[domain.index()]
    }

    pub fn targeted(&self) -> impl Iterator<Item = (Domain, u8)> + '_ {
        Domain::ALL.into_iter().filter_map(|d| self.level(d).map(|l| (d, l)))
    }

    pub fn is_multi(&self) -> bool {
        self.levels.iter().all(Option::is_some)
    }

    /// Five digits, one per domain, `0` for unprompted (e.g. `70000`).
    pub fn code(&self) -> String {
        self.levels.iter().map(|l| char::from(b'0' + l.unwrap_or(0))).collect()
    }

    /// Inverse of [`ShapingProfile::code`].
    pub fn from_code(code: &str) -> Result<Self, PromptError> {
        let digits: Vec<u8> = code.bytes().map(|b| b.wrapping_sub(b'0')).collect();
        if digits.len() != 5 || digits.iter().any(|d| *d > 9) {
            return Err(PromptError::InvalidShaping(format!("bad shaping code {code:?}")));
        }
        let levels: [Option<u8>; 5] = std::array::from_fn(|i| (digits[i] != 0).then_some(digits[i]));
        match levels.iter().flatten().count() {
            0 => Err(PromptError::InvalidShaping("no domain targeted".into())),
            1 => Ok(Self { levels }),
            5 => Self::multi(levels.map(|l| l.expect("all set"))),
            _ => Err(PromptError::InvalidShaping(format!("partial shaping code {code:?}"))),
        }
    }
}

fn check_level(level: u8) -> Result<(), PromptError> {
    if (1..=9).contains(&level) {
        Ok(())
    } else {
        Err(PromptError::LevelOutOfRange(level))
    }
}

/// One reusable combination of persona, instruction and postamble variant.
/// Its id is derived from the components so scores join across instruments.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimulatedResponseProfile {
    pub profile_id: String,
    pub description_id: u16,
    pub instruction_id: u8,
    pub postamble_variant: u8,
    pub shaping: Option<ShapingProfile>,
}

impl SimulatedResponseProfile {
    pub fn new(description_id: u16, instruction_id: u8, postamble_variant: u8, shaping: Option<ShapingProfile>) -> Self {
        Self {
            profile_id: profile_id(description_id, instruction_id, postamble_variant, shaping.as_ref()),
            description_id,
            instruction_id,
            postamble_variant,
            shaping,
        }
    }
}

/// Recovers the components of an id built by [`profile_id`].
pub fn parse_profile_id(id: &str) -> Option<SimulatedResponseProfile> {
    let mut parts = id.split('-');
    let d = parts.next()?.strip_prefix('d')?.parse().ok()?;
    let i = parts.next()?.strip_prefix('i')?.parse().ok()?;
    let p = parts.next()?.strip_prefix('p')?.parse().ok()?;
    let shaping = match parts.next() {
        Some(s) => Some(ShapingProfile::from_code(s.strip_prefix('s')?).ok()?),
        None => None,
    };
    if parts.next().is_some() {
        return None;
    }
    let profile = SimulatedResponseProfile::new(d, i, p, shaping);
    (profile.profile_id == id).then_some(profile)
}

pub fn profile_id(description_id: u16, instruction_id: u8, postamble_variant: u8, shaping: Option<&ShapingProfile>) -> String {
    match shaping {
        Some(s) => format!("d{description_id:02}-i{instruction_id}-p{postamble_variant}-s{}", s.code()),
        None => format!("d{description_id:02}-i{instruction_id}-p{postamble_variant}"),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptSpec {
    pub profile_id: String,
    pub instrument_id: String,
    pub item_id: String,
    #[serde(rename = "prompt_text")]
    pub text: String,
}

/// Where trait adjectives go relative to the biographic description.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PersonaOrder {
    /// `"{description} I'm ..."` as used for survey shaping.
    #[default]
    DescriptionFirst,
    /// `"I'm .... {description}"` as used for the status-update task.
    TraitsFirst,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ShapingMode {
    Single,
    Multi,
}

/// Phrase for one marker at a shaping level: 1-4 qualify the low adjective
/// (`extremely`, `very`, bare, `a bit`), 5 is `neither X nor Y`, 6-9 mirror
/// with the high adjective.
pub fn qualify_adjective(marker: &AdjectiveMarker, level: u8) -> Result<String, PromptError> {
    check_level(level)?;
    let (low, high) = (&marker.low, &marker.high);
    Ok(match level {
        1 => format!("extremely {low}"),
        2 => format!("very {low}"),
        3 => low.clone(),
        4 => format!("a bit {low}"),
        5 => format!("neither {low} nor {high}"),
        6 => format!("a bit {high}"),
        7 => high.clone(),
        8 => format!("very {high}"),
        _ => format!("extremely {high}"),
    })
}

/// Comma list with an Oxford "and" before the last element.
fn oxford_join(parts: &[String]) -> String {
    match parts {
        [] => String::new(),
        [one] => one.clone(),
        [a, b] => format!("{a} and {b}"),
        [init @ .., last] => format!("{}, and {last}", init.join(", ")),
    }
}

/// Persona text for a shaping profile: the description plus one `I'm ...`
/// clause listing every qualified adjective of every targeted domain.
pub fn build_shaping_description(
    shaping: &ShapingProfile,
    sets: &BTreeMap<Domain, Vec<AdjectiveMarker>>,
    description: &str,
    order: PersonaOrder,
) -> Result<String, PromptError> {
    let mut phrases = Vec::new();
    for (domain, level) in shaping.targeted() {
        let markers = sets.get(&domain).filter(|m| !m.is_empty()).ok_or(PromptError::NoMarkers(domain))?;
        for m in markers {
            phrases.push(qualify_adjective(m, level)?);
        }
    }
    let traits = format!("I'm {}.", oxford_join(&phrases));
    let description = description.trim();
    Ok(match (order, description.is_empty()) {
        (_, true) => traits,
        (PersonaOrder::DescriptionFirst, false) => format!("{description} {traits}"),
        (PersonaOrder::TraitsFirst, false) => format!("{traits} {description}"),
    })
}

pub fn render_admin_prompt(persona: &str, instruction: &str, item_text: &str, postamble: &str) -> String {
    format!("{PERSONA_INSTRUCTION} \"{persona}\" {instruction} \"{item_text}\", {postamble}")
}

pub fn downstream_task(updates: usize) -> String {
    DOWNSTREAM_TASK.replace("{n}", &updates.to_string())
}

/// Component tables behind every prompt.
#[derive(Debug, Clone)]
pub struct PromptTables {
    pub descriptions: Vec<BiographicDescription>,
    pub instructions: Vec<ItemInstruction>,
    pub postambles: Vec<ItemPostamble>,
    pub markers: Vec<AdjectiveMarker>,
    /// Ordered adjective sets used when shaping each domain.
    pub shaping_sets: BTreeMap<Domain, Vec<AdjectiveMarker>>,
}

fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.strip_suffix('\r').unwrap_or(l)))
        .filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'))
}

fn tsv_rows<'a>(table: &'static str, text: &'a str, header: &str) -> Result<Vec<(usize, Vec<&'a str>)>, PromptError> {
    let mut lines = data_lines(text);
    let columns = header.split('\t').count();
    match lines.next() {
        Some((_, h)) if h == header => {}
        Some((line, _)) => {
            return Err(PromptError::Parse { table, line, message: format!("expected header {header:?}") })
        }
        None => return Ok(Vec::new()),
    }
    lines
        .map(|(line, l)| {
            let f: Vec<&str> = l.split('\t').collect();
            if f.len() == columns {
                Ok((line, f))
            } else {
                Err(PromptError::Parse { table, line, message: format!("expected {columns} fields") })
            }
        })
        .collect()
}

impl PromptTables {
    pub fn parse(
        descriptions: &str,
        instructions: &str,
        postambles: &str,
        markers: &str,
        shaping_sets: &str,
    ) -> Result<Self, PromptError> {
        let descriptions = data_lines(descriptions)
            .enumerate()
            .map(|(i, (_, l))| BiographicDescription { id: (i + 1) as u16, text: l.trim().to_string() })
            .collect();
        let instructions = data_lines(instructions)
            .enumerate()
            .map(|(i, (_, l))| ItemInstruction { id: (i + 1) as u8, phrase: l.trim().to_string() })
            .collect();
        let num = |table, line, s: &str| {
            s.trim().parse::<u8>().map_err(|_| PromptError::Parse { table, line, message: format!("bad number {s:?}") })
        };
        let domain = |table, line, s: &str| {
            s.parse::<Domain>().map_err(|e| PromptError::Parse { table, line, message: e.to_string() })
        };
        let postambles = tsv_rows("postambles", postambles, "postamble_id\tinstrument_id\tvariant\ttext")?
            .into_iter()
            .map(|(line, f)| {
                Ok(ItemPostamble {
                    id: num("postambles", line, f[0])?,
                    instrument_id: f[1].to_string(),
                    variant: num("postambles", line, f[2])?,
                    text: f[3].to_string(),
                })
            })
            .collect::<Result<Vec<_>, PromptError>>()?;
        let markers = tsv_rows("markers", markers, "domain\tfacet\tlow\thigh")?
            .into_iter()
            .map(|(line, f)| {
                Ok(AdjectiveMarker {
                    domain: domain("markers", line, f[0])?,
                    facet: f[1].to_string(),
                    low: f[2].to_string(),
                    high: f[3].to_string(),
                })
            })
            .collect::<Result<Vec<_>, PromptError>>()?;
        let mut sets: BTreeMap<Domain, Vec<AdjectiveMarker>> = BTreeMap::new();
        for (line, f) in tsv_rows("shaping_sets", shaping_sets, "domain\tlow\thigh")? {
            let d = domain("shaping_sets", line, f[0])?;
            sets.entry(d).or_default().push(AdjectiveMarker::new(d, f[1], f[2]));
        }
        // Domains without an explicit set fall back to every marker mapped to them.
        for d in Domain::ALL {
            let all: Vec<_> = markers.iter().filter(|m: &&AdjectiveMarker| m.domain == d).cloned().collect();
            if !all.is_empty() {
                sets.entry(d).or_insert(all);
            }
        }
        Ok(Self { descriptions, instructions, postambles, markers, shaping_sets: sets })
    }

    /// Reads `descriptions.txt`, `instructions.txt`, `postambles.tsv`,
    /// `markers.tsv` and (optionally) `shaping_sets.tsv` from `dir`.
    pub fn load_dir(dir: impl AsRef<Path>) -> Result<Self, PromptError> {
        let dir = dir.as_ref();
        let read = |name: &str| {
            let p = dir.join(name);
            std::fs::read_to_string(&p).map_err(|e| PromptError::Io { path: p.display().to_string(), message: e.to_string() })
        };
        let sets = if dir.join("shaping_sets.tsv").exists() { read("shaping_sets.tsv")? } else { String::new() };
        Self::parse(
            &read("descriptions.txt")?,
            &read("instructions.txt")?,
            &read("postambles.tsv")?,
            &read("markers.tsv")?,
            &sets,
        )
    }

    /// Checks that every postamble's quoted anchors equal its instrument's scale labels.
    pub fn check_against(&self, catalog: &Catalog) -> Result<(), PromptError> {
        for p in &self.postambles {
            let Ok(inst) = catalog.instrument(&p.instrument_id) else { continue };
            let expected: Vec<(u8, String)> = inst.scale_options().into_iter().map(|(v, l)| (v, l.to_string())).collect();
            let found = p.anchors();
            if found != expected {
                return Err(PromptError::AnchorMismatch {
                    postamble: p.id,
                    instrument: p.instrument_id.clone(),
                    message: format!("found {found:?}"),
                });
            }
        }
        for inst in catalog.instruments() {
            let n = self.postambles.iter().filter(|p| p.instrument_id == inst.id()).count();
            if n != 0 && n != 5 {
                return Err(PromptError::AnchorMismatch {
                    postamble: 0,
                    instrument: inst.id().to_string(),
                    message: format!("expected 5 postamble variants, found {n}"),
                });
            }
        }
        Ok(())
    }

    pub fn description(&self, id: u16) -> Result<&BiographicDescription, PromptError> {
        self.descriptions
            .iter()
            .find(|d| d.id == id)
            .ok_or(PromptError::UnknownId { table: "description", id: id.to_string() })
    }

    pub fn instruction(&self, id: u8) -> Result<&ItemInstruction, PromptError> {
        self.instructions
            .iter()
            .find(|i| i.id == id)
            .ok_or(PromptError::UnknownId { table: "instruction", id: id.to_string() })
    }

    pub fn postamble(&self, instrument_id: &str, variant: u8) -> Result<&ItemPostamble, PromptError> {
        self.postambles
            .iter()
            .find(|p| p.instrument_id == instrument_id && p.variant == variant)
            .ok_or_else(|| PromptError::UnknownId { table: "postamble", id: format!("{instrument_id}#{variant}") })
    }

    pub fn persona_text(&self, profile: &SimulatedResponseProfile, order: PersonaOrder) -> Result<String, PromptError> {
        let description = &self.description(profile.description_id)?.text;
        match &profile.shaping {
            Some(s) => build_shaping_description(s, &self.shaping_sets, description, order),
            None => Ok(description.clone()),
        }
    }

    pub fn build_admin_prompt(
        &self,
        profile: &SimulatedResponseProfile,
        instrument: &Instrument,
        item: &Item,
        postamble: &ItemPostamble,
    ) -> Result<PromptSpec, PromptError> {
        if postamble.instrument_id != instrument.id() {
            return Err(PromptError::InstrumentMismatch {
                postamble: postamble.id,
                postamble_instrument: postamble.instrument_id.clone(),
                instrument: instrument.id().to_string(),
            });
        }
        if instrument.item(&item.item_id).is_none() {
            return Err(PromptError::ForeignItem { item: item.item_id.clone(), instrument: instrument.id().to_string() });
        }
        let persona = self.persona_text(profile, PersonaOrder::DescriptionFirst)?;
        let instruction = &self.instruction(profile.instruction_id)?.phrase;
        Ok(PromptSpec {
            profile_id: profile.profile_id.clone(),
            instrument_id: instrument.id().to_string(),
            item_id: item.item_id.clone(),
            text: render_admin_prompt(&persona, instruction, &item.text, &postamble.text),
        })
    }

    /// Prompt for `item` under `profile`, using the profile's postamble variant.
    pub fn admin_prompt_for(
        &self,
        profile: &SimulatedResponseProfile,
        instrument: &Instrument,
        item: &Item,
    ) -> Result<PromptSpec, PromptError> {
        let postamble = self.postamble(instrument.id(), profile.postamble_variant)?;
        self.build_admin_prompt(profile, instrument, item, postamble)
    }

    /// Every (description, instruction, postamble variant) combination,
    /// descriptions outermost.
    pub fn generate_profile_matrix(
        &self,
        n_desc: usize,
        n_instr: usize,
        n_post: usize,
    ) -> Result<Vec<SimulatedResponseProfile>, PromptError> {
        let check = |table, requested: usize, available: usize| {
            if requested == 0 || requested > available {
                Err(PromptError::EmptyTable { table, requested, available })
            } else {
                Ok(())
            }
        };
        check("description", n_desc, self.descriptions.len())?;
        check("instruction", n_instr, self.instructions.len())?;
        let variants = self.postambles.iter().map(|p| p.variant).max().unwrap_or(0) as usize;
        check("postamble", n_post, variants)?;
        let mut out = Vec::with_capacity(n_desc * n_instr * n_post);
        for d in &self.descriptions[..n_desc] {
            for i in &self.instructions[..n_instr] {
                for p in 1..=n_post as u8 {
                    out.push(SimulatedResponseProfile::new(d.id, i.id, p, None));
                }
            }
        }
        Ok(out)
    }

    /// Single mode: 45 profiles (5 domains x 9 levels); multi mode: 32
    /// profiles (every high/low extreme combination). Each is crossed with
    /// every description under the default instruction and postamble.
    pub fn generate_shaping_profiles(&self, mode: ShapingMode) -> Vec<SimulatedResponseProfile> {
        let shapings: Vec<ShapingProfile> = match mode {
            ShapingMode::Single => Domain::ALL
                .into_iter()
                .flat_map(|d| (1..=9).map(move |l| ShapingProfile::single(d, l).expect("level in range")))
                .collect(),
            ShapingMode::Multi => (0u8..32)
                .map(|bits| {
                    let levels = std::array::from_fn(|i| if bits & (1 << (4 - i)) != 0 { 9 } else { 1 });
                    ShapingProfile::multi(levels).expect("extreme levels")
                })
                .collect(),
        };
        let mut out = Vec::with_capacity(shapings.len() * self.descriptions.len());
        for s in &shapings {
            for d in &self.descriptions {
                out.push(SimulatedResponseProfile::new(d.id, 1, 1, Some(*s)));
            }
        }
        out
    }

    /// Status-update generation prompt for a shaped profile.
    pub fn build_downstream_prompt(
        &self,
        profile: &SimulatedResponseProfile,
        updates: usize,
        order: PersonaOrder,
    ) -> Result<String, PromptError> {
        if profile.shaping.is_none() {
            return Err(PromptError::NotShaped(profile.profile_id.clone()));
        }
        let persona = self.persona_text(profile, order)?;
        Ok(format!("{PERSONA_INSTRUCTION} \"{persona}\"\n\n{}", downstream_task(updates)))
    }
}

/// Lazily enumerates every (profile, instrument, item) triple exactly once,
/// profiles outermost.
pub fn administration_plan<'a>(
    profiles: &'a [SimulatedResponseProfile],
    instruments: &'a [&'a Instrument],
) -> impl Iterator<Item = (&'a SimulatedResponseProfile, &'a Instrument, &'a Item)> + 'a {
    profiles.iter().flat_map(move |p| {
        instruments.iter().flat_map(move |inst| inst.items().iter().map(move |item| (p, *inst, item)))
    })
}
