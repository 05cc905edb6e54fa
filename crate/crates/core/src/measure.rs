//! Measure identifiers and their combined configuration.

use std::fmt;
use std::str::FromStr;

use crate::cf::CfConfig;
use crate::cop::CopConfig;
use crate::error::{Error, Result};
use crate::temporal::TemporalConfig;
use crate::topo::ScorerConfig;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Measure {
    Cn,
    Jc,
    Aa,
    Pa,
    Katz,
    Rpr,
    Pf,
    Ts,
    Ls,
    Tf,
    Cop,
    Tcop,
    Ucf,
    Icf,
}

impl Measure {
    pub const ALL: [Measure; 14] = [
        Measure::Cn,
        Measure::Jc,
        Measure::Aa,
        Measure::Pa,
        Measure::Katz,
        Measure::Rpr,
        Measure::Pf,
        Measure::Ts,
        Measure::Ls,
        Measure::Tf,
        Measure::Cop,
        Measure::Tcop,
        Measure::Ucf,
        Measure::Icf,
    ];

    pub fn id(self) -> &'static str {
        match self {
            Measure::Cn => "cn",
            Measure::Jc => "jc",
            Measure::Aa => "aa",
            Measure::Pa => "pa",
            Measure::Katz => "katz",
            Measure::Rpr => "rpr",
            Measure::Pf => "pf",
            Measure::Ts => "ts",
            Measure::Ls => "ls",
            Measure::Tf => "tf",
            Measure::Cop => "cop",
            Measure::Tcop => "tcop",
            Measure::Ucf => "ucf",
            Measure::Icf => "icf",
        }
    }

    /// Parses a comma-separated list; `all` expands to every measure.
    pub fn parse_list(s: &str) -> Result<Vec<Measure>> {
        let mut out = Vec::new();
        for tok in s.split(',').map(str::trim).filter(|t| !t.is_empty()) {
            if tok == "all" {
                out.extend(Measure::ALL);
            } else {
                out.push(tok.parse()?);
            }
        }
        out.sort();
        out.dedup();
        if out.is_empty() {
            return Err(Error::InvalidArgument("no measures given".into()));
        }
        Ok(out)
    }

    pub(crate) fn walks_paths(self) -> bool {
        matches!(
            self,
            Measure::Katz | Measure::Pf | Measure::Ts | Measure::Ls | Measure::Tf | Measure::Cop | Measure::Tcop
        )
    }
}

impl fmt::Display for Measure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for Measure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Measure::ALL
            .into_iter()
            .find(|m| m.id() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown measure '{s}'")))
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct MeasureConfig {
    pub scorer: ScorerConfig,
    pub temporal: TemporalConfig,
    pub cop: CopConfig,
    pub cf: CfConfig,
}

impl MeasureConfig {
    pub fn validate(&self) -> Result<()> {
        self.scorer.validate()?;
        self.temporal.validate()?;
        self.cop.validate()?;
        self.cf.validate()
    }

    /// Longest path any of `measures` needs.
    pub(crate) fn walk_len(&self, measures: &[Measure]) -> usize {
        measures
            .iter()
            .map(|m| match m {
                Measure::Katz => self.scorer.katz_max_len,
                Measure::Pf => self.scorer.propflow_max_len,
                Measure::Ts => self.temporal.ts_max_len,
                Measure::Ls | Measure::Tf => self.temporal.max_len,
                Measure::Cop | Measure::Tcop => self.cop.max_len,
                _ => 0,
            })
            .max()
            .unwrap_or(0)
    }
}
