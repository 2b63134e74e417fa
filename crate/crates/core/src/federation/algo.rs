use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const DEFAULT_PROX_MU: f64 = 0.01;

/// Training arm. Text form: `gcfl`, `fedavg`, `fedprox:<mu>`, `skyline`,
/// `random`, `facility_location`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Algo {
    Gcfl,
    FedAvg,
    FedProx { mu: f64 },
    /// Trains on ground-truth clean rows only.
    Skyline,
    Random,
    FacilityLocation,
}

impl Algo {
    /// Arms that read the hidden clean flags.
    pub fn is_oracle(&self) -> bool {
        matches!(self, Algo::Skyline)
    }

    /// Arms that train on a per-client coreset.
    pub fn uses_coreset(&self) -> bool {
        matches!(self, Algo::Gcfl | Algo::Random | Algo::FacilityLocation)
    }
}

impl fmt::Display for Algo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Algo::Gcfl => f.write_str("gcfl"),
            Algo::FedAvg => f.write_str("fedavg"),
            Algo::FedProx { mu } => write!(f, "fedprox:{mu}"),
            Algo::Skyline => f.write_str("skyline"),
            Algo::Random => f.write_str("random"),
            Algo::FacilityLocation => f.write_str("facility_location"),
        }
    }
}

impl FromStr for Algo {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        let (name, arg) = match s.split_once([':', '(']) {
            Some((n, a)) => (n.trim(), Some(a.trim_end_matches(')').trim())),
            None => (s.as_str(), None),
        };
        let algo = match (name, arg) {
            ("gcfl", None) => Algo::Gcfl,
            ("fedavg", None) => Algo::FedAvg,
            ("fedprox", None) => Algo::FedProx { mu: DEFAULT_PROX_MU },
            ("fedprox", Some(a)) => {
                let mu: f64 = a
                    .parse()
                    .map_err(|_| Error::config(format!("fedprox mu {a:?} is not a number")))?;
                Algo::FedProx { mu }
            }
            ("skyline", None) => Algo::Skyline,
            ("random", None) => Algo::Random,
            ("facility_location" | "facility" | "fl", None) => Algo::FacilityLocation,
            _ => return Err(Error::config(format!("unknown algorithm {s:?}"))),
        };
        Ok(algo)
    }
}

impl TryFrom<String> for Algo {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Algo> for String {
    fn from(a: Algo) -> String {
        a.to_string()
    }
}
