use std::fmt;
use std::str::FromStr;

use hybrid_kf::{FilterKind, ProposalKind};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// A configured estimator: a Gaussian filter or a particle filter with the
/// given proposal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FilterId {
    Kalman(FilterKind),
    Particle(ProposalKind),
}

impl FilterId {
    pub const ALL: [FilterId; 9] = [
        FilterId::Kalman(FilterKind::Ekf),
        FilterId::Kalman(FilterKind::Ssukf),
        FilterId::Kalman(FilterKind::Spukf),
        FilterId::Kalman(FilterKind::Ukf),
        FilterId::Kalman(FilterKind::NewKf),
        FilterId::Particle(ProposalKind::Prior),
        FilterId::Particle(ProposalKind::Ekf),
        FilterId::Particle(ProposalKind::Ukf),
        FilterId::Particle(ProposalKind::NewKf),
    ];

    pub fn name(self) -> &'static str {
        match self {
            FilterId::Kalman(k) => k.name(),
            FilterId::Particle(p) => p.name(),
        }
    }

    /// Random-stream lane; fixed per filter so results do not depend on
    /// which other filters are configured.
    pub fn lane(self) -> u64 {
        1 + Self::ALL.iter().position(|f| *f == self).expect("listed") as u64
    }

    pub fn is_particle(self) -> bool {
        matches!(self, FilterId::Particle(_))
    }
}

impl fmt::Display for FilterId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FilterId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let t = s.trim();
        let lower = t.to_ascii_lowercase();
        if lower == "pf" || lower.starts_with("pf-") || lower.starts_with("pf_") {
            t.parse::<ProposalKind>()
                .map(FilterId::Particle)
                .map_err(|e| e.to_string())
        } else {
            t.parse::<FilterKind>()
                .map(FilterId::Kalman)
                .map_err(|e| e.to_string())
        }
    }
}

impl Serialize for FilterId {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for FilterId {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Parses a comma-separated filter list.
pub fn parse_filter_list(s: &str) -> Result<Vec<FilterId>, String> {
    s.split(',')
        .filter(|t| !t.trim().is_empty())
        .map(str::parse)
        .collect()
}
