use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// One of the Big Five personality domains.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Domain {
    #[serde(rename = "EXT")]
    Extraversion,
    #[serde(rename = "AGR")]
    Agreeableness,
    #[serde(rename = "CON")]
    Conscientiousness,
    #[serde(rename = "NEU")]
    Neuroticism,
    #[serde(rename = "OPE")]
    Openness,
}

impl Domain {
    pub const ALL: [Domain; 5] = [
        Domain::Extraversion,
        Domain::Agreeableness,
        Domain::Conscientiousness,
        Domain::Neuroticism,
        Domain::Openness,
    ];

    pub fn code(self) -> &'static str {
        match self {
            Domain::Extraversion => "EXT",
            Domain::Agreeableness => "AGR",
            Domain::Conscientiousness => "CON",
            Domain::Neuroticism => "NEU",
            Domain::Openness => "OPE",
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Domain::Extraversion => "Extraversion",
            Domain::Agreeableness => "Agreeableness",
            Domain::Conscientiousness => "Conscientiousness",
            Domain::Neuroticism => "Neuroticism",
            Domain::Openness => "Openness",
        }
    }

    /// Position in [`Domain::ALL`].
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_code(code: &str) -> Option<Domain> {
        Domain::ALL.into_iter().find(|d| d.code() == code)
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown Big Five domain code {0:?}")]
pub struct UnknownDomain(pub String);

impl FromStr for Domain {
    type Err = UnknownDomain;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Domain::from_code(s.trim()).ok_or_else(|| UnknownDomain(s.to_string()))
    }
}
