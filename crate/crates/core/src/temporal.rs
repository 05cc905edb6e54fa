//! Path scores that weigh each path by edge recency and rating weight.
//!
//! All time arithmetic is done on integer differences before converting to
//! the configured time unit, so shifting every timestamp and `now` by the same
//! amount leaves the scores bit-for-bit unchanged.

use crate::error::{Error, Result};
use crate::graph::{check_path_len, BipartiteGraph, Ix, ItemId, UserId};
use crate::topo::pair_ix;

pub const SECONDS_PER_YEAR: f64 = 86400.0 * 365.0;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TemporalConfig {
    /// Recency damping applied as `beta^age`.
    pub beta: f64,
    /// Per-unit decay between consecutive edges of a flow.
    pub alpha: f64,
    pub max_len: usize,
    /// Path length bound for Time-Score.
    pub ts_max_len: usize,
    /// Reference time; the latest training timestamp when `None`.
    pub now: Option<i64>,
    /// Seconds per time unit used in exponents.
    pub time_unit: f64,
}

impl Default for TemporalConfig {
    fn default() -> Self {
        TemporalConfig {
            beta: 0.5,
            alpha: 0.1,
            max_len: 5,
            ts_max_len: 3,
            now: None,
            time_unit: SECONDS_PER_YEAR,
        }
    }
}

impl TemporalConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("beta", self.beta), ("alpha", self.alpha)] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::InvalidArgument(format!(
                    "temporal {name} must lie in (0, 1), got {v}"
                )));
            }
        }
        if !(self.time_unit.is_finite() && self.time_unit > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "time unit must be positive, got {}",
                self.time_unit
            )));
        }
        check_path_len(self.max_len)?;
        check_path_len(self.ts_max_len)
    }

    pub fn resolve_now(&self, g: &BipartiteGraph) -> i64 {
        self.now
            .unwrap_or_else(|| g.time_range().map(|r| r.1).unwrap_or(0))
    }

    fn units(&self, seconds: i64) -> f64 {
        seconds as f64 / self.time_unit
    }
}

/// Harmonic mean; 0 if any weight is 0.
pub fn harmonic_mean(weights: impl IntoIterator<Item = f64>) -> f64 {
    let mut n = 0usize;
    let mut inv = 0.0;
    for w in weights {
        if w == 0.0 {
            return 0.0;
        }
        n += 1;
        inv += 1.0 / w;
    }
    if n == 0 {
        0.0
    } else {
        n as f64 / inv
    }
}

fn path_hmean(g: &BipartiteGraph, edges: &[usize]) -> f64 {
    harmonic_mean(edges.iter().map(|&e| g.weight(e)))
}

fn latest_oldest(g: &BipartiteGraph, edges: &[usize]) -> (i64, i64) {
    let mut latest = i64::MIN;
    let mut oldest = i64::MAX;
    for &e in edges {
        latest = latest.max(g.time(e));
        oldest = oldest.min(g.time(e));
    }
    (latest, oldest)
}

/// One path's Time-Score contribution.
pub(crate) fn time_score_term(g: &BipartiteGraph, edges: &[usize], now: i64, cfg: &TemporalConfig) -> f64 {
    let (latest, oldest) = latest_oldest(g, edges);
    let recency = cfg.units(now - latest);
    path_hmean(g, edges) * cfg.beta.powf(recency) / (cfg.units(latest - oldest).abs() + 1.0)
}

/// Time path index of one path.
pub(crate) fn tpi(g: &BipartiteGraph, edges: &[usize], now: i64, cfg: &TemporalConfig) -> f64 {
    let (latest, _) = latest_oldest(g, edges);
    let total_age: i64 = edges.iter().map(|&e| now - g.time(e)).sum();
    let mean_age = total_age as f64 / edges.len() as f64 / cfg.time_unit;
    path_hmean(g, edges) * cfg.beta.powf(mean_age) / (cfg.units(now - latest).abs() + 1.0)
}

/// Flow along one path with each step after the first decayed by
/// `(1 - alpha)^gap`, `gap` being the time between consecutive edges.
pub(crate) fn tflow_term(g: &BipartiteGraph, nodes: &[Ix], edges: &[usize], cfg: &TemporalConfig) -> f64 {
    let mut flow = 1.0;
    let mut prev: Option<i64> = None;
    for (&z, &e) in nodes.iter().zip(edges) {
        flow *= g.weight(e) / g.strength(z);
        let t = g.time(e);
        if let Some(tp) = prev {
            flow *= (1.0 - cfg.alpha).powf(cfg.units((t - tp).abs()));
        }
        prev = Some(t);
    }
    flow
}

/// Per-length sums and counts of TPI, folded into Link-Score.
#[derive(Clone, Debug, Default)]
pub(crate) struct LinkScoreAcc {
    sums: Vec<f64>,
    counts: Vec<u64>,
}

impl LinkScoreAcc {
    pub(crate) fn add(&mut self, len: usize, tpi: f64) {
        if self.sums.len() <= len {
            self.sums.resize(len + 1, 0.0);
            self.counts.resize(len + 1, 0);
        }
        self.sums[len] += tpi;
        self.counts[len] += 1;
    }

    pub(crate) fn finish(&self) -> f64 {
        (3..self.sums.len())
            .step_by(2)
            .filter(|&l| self.counts[l] > 0)
            .map(|l| self.sums[l] / self.counts[l] as f64 / (l - 1) as f64)
            .sum()
    }
}

pub fn score_time_score(g: &BipartiteGraph, u: UserId, p: ItemId, cfg: &TemporalConfig) -> Result<f64> {
    cfg.validate()?;
    let (u, p) = pair_ix(g, u, p)?;
    let now = cfg.resolve_now(g);
    let mut total = 0.0;
    g.visit_paths(u, p, cfg.ts_max_len, |_, edges| {
        total += time_score_term(g, edges, now, cfg)
    });
    Ok(total)
}

pub fn score_link_score(g: &BipartiteGraph, u: UserId, p: ItemId, cfg: &TemporalConfig) -> Result<f64> {
    cfg.validate()?;
    let (u, p) = pair_ix(g, u, p)?;
    let now = cfg.resolve_now(g);
    let mut acc = LinkScoreAcc::default();
    g.visit_paths(u, p, cfg.max_len, |_, edges| {
        acc.add(edges.len(), tpi(g, edges, now, cfg))
    });
    Ok(acc.finish())
}

pub fn score_tflow(g: &BipartiteGraph, u: UserId, p: ItemId, cfg: &TemporalConfig) -> Result<f64> {
    cfg.validate()?;
    let (u, p) = pair_ix(g, u, p)?;
    let mut total = 0.0;
    g.visit_paths(u, p, cfg.max_len, |nodes, edges| {
        total += tflow_term(g, nodes, edges, cfg)
    });
    Ok(total)
}
