//! Neighborhood, path and random-walk link scores for user–item pairs.
//!
//! Neighborhood sets are taken within three hops (distance `1..=3`) with both
//! endpoints of the scored pair removed. Path-based scores only count odd
//! lengths from 3 upward, since a candidate pair is not itself an edge.

use log::warn;

use crate::error::{Error, Result};
use crate::graph::{check_path_len, BipartiteGraph, Ix, ItemId, Node, UserId};

/// Hop radius of the neighborhood sets used by CN, JC and AA.
pub const NEIGHBORHOOD_HOPS: usize = 3;

const RWR_TOLERANCE: f64 = 1e-10;
const RWR_MAX_ITERATIONS: usize = 200;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScorerConfig {
    pub katz_beta: f64,
    pub katz_max_len: usize,
    /// Restart probability of the rooted random walk.
    pub pr_damping: f64,
    pub propflow_max_len: usize,
}

impl Default for ScorerConfig {
    fn default() -> Self {
        ScorerConfig {
            katz_beta: 0.005,
            katz_max_len: 5,
            pr_damping: 0.15,
            propflow_max_len: 5,
        }
    }
}

impl ScorerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.katz_beta > 0.0 && self.katz_beta < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "katz beta must lie in (0, 1), got {}",
                self.katz_beta
            )));
        }
        if !(self.pr_damping > 0.0 && self.pr_damping < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "restart probability must lie in (0, 1), got {}",
                self.pr_damping
            )));
        }
        check_path_len(self.katz_max_len)?;
        check_path_len(self.propflow_max_len)
    }

    /// Warns when the truncated Katz sum is not dominated by short paths.
    pub fn check_against(&self, g: &BipartiteGraph) {
        let d = g.max_degree() as f64;
        if self.katz_beta * d >= 1.0 {
            warn!(
                "katz beta {} times max degree {} is >= 1; long paths dominate the sum",
                self.katz_beta, d
            );
        }
    }
}

pub(crate) fn pair_ix(g: &BipartiteGraph, u: UserId, p: ItemId) -> Result<(Ix, Ix)> {
    Ok((g.ix(Node::User(u))?, g.ix(Node::Item(p))?))
}

/// Three-hop neighborhoods of `u` and `p` as membership masks, each with the
/// opposite endpoint removed.
fn neighborhoods(g: &BipartiteGraph, u: Ix, p: Ix) -> (Vec<bool>, Vec<bool>) {
    let mut a = vec![false; g.n_nodes()];
    let mut b = vec![false; g.n_nodes()];
    for z in g.ball(u, NEIGHBORHOOD_HOPS) {
        a[z as usize] = true;
    }
    for z in g.ball(p, NEIGHBORHOOD_HOPS) {
        b[z as usize] = true;
    }
    a[p as usize] = false;
    b[u as usize] = false;
    (a, b)
}

pub fn score_cn(g: &BipartiteGraph, u: UserId, p: ItemId) -> Result<f64> {
    let (u, p) = pair_ix(g, u, p)?;
    let (a, b) = neighborhoods(g, u, p);
    Ok(a.iter().zip(&b).filter(|(x, y)| **x && **y).count() as f64)
}

pub fn score_jc(g: &BipartiteGraph, u: UserId, p: ItemId) -> Result<f64> {
    let (u, p) = pair_ix(g, u, p)?;
    let (a, b) = neighborhoods(g, u, p);
    let inter = a.iter().zip(&b).filter(|(x, y)| **x && **y).count();
    let union = a.iter().zip(&b).filter(|(x, y)| **x || **y).count();
    Ok(if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    })
}

/// Weight of a common neighbor whose own three-hop neighborhood has `size`
/// nodes. Sizes of at most one would divide by `ln 1 = 0` and contribute 0.
pub(crate) fn adamic_adar_weight(size: usize) -> f64 {
    if size <= 1 {
        0.0
    } else {
        1.0 / (size as f64).ln()
    }
}

pub fn score_aa(g: &BipartiteGraph, u: UserId, p: ItemId) -> Result<f64> {
    let (u, p) = pair_ix(g, u, p)?;
    let (a, b) = neighborhoods(g, u, p);
    Ok((0..g.n_nodes())
        .filter(|&z| a[z] && b[z])
        .map(|z| adamic_adar_weight(g.ball(z as Ix, NEIGHBORHOOD_HOPS).len()))
        .sum())
}

pub fn score_pa(g: &BipartiteGraph, u: UserId, p: ItemId) -> Result<f64> {
    let (u, p) = pair_ix(g, u, p)?;
    Ok((g.deg(u) * g.deg(p)) as f64)
}

/// Number of simple paths from `u` to `p` at each length `0..=max_len`.
pub(crate) fn path_counts(g: &BipartiteGraph, u: Ix, p: Ix, max_len: usize) -> Vec<u64> {
    let mut counts = vec![0u64; max_len + 1];
    g.visit_paths(u, p, max_len, |_, edges| counts[edges.len()] += 1);
    counts
}

/// Truncated Katz sum over odd lengths `3..=max_len` from per-length counts.
pub(crate) fn katz_from_counts(counts: &[u64], beta: f64, max_len: usize) -> f64 {
    (3..=max_len.min(counts.len().saturating_sub(1)))
        .step_by(2)
        .map(|l| beta.powi(l as i32) * counts[l] as f64)
        .sum()
}

pub fn score_katz(g: &BipartiteGraph, u: UserId, p: ItemId, cfg: &ScorerConfig) -> Result<f64> {
    check_path_len(cfg.katz_max_len)?;
    let (u, p) = pair_ix(g, u, p)?;
    let counts = path_counts(g, u, p, cfg.katz_max_len);
    Ok(katz_from_counts(&counts, cfg.katz_beta, cfg.katz_max_len))
}

/// Stationary distribution of a random walk that restarts at `root` with
/// probability `restart` and otherwise steps to a uniform neighbor. A walker on
/// an isolated node returns to the root.
pub fn random_walk_with_restart(g: &BipartiteGraph, root: Node, restart: f64) -> Result<Vec<(Node, f64)>> {
    let r = g.ix(root)?;
    let pi = rwr(g, r, restart)?;
    Ok(pi.iter().enumerate().map(|(x, &v)| (g.node(x as Ix), v)).collect())
}

pub(crate) fn rwr(g: &BipartiteGraph, root: Ix, restart: f64) -> Result<Vec<f64>> {
    let n = g.n_nodes();
    let mut pi = vec![0.0; n];
    pi[root as usize] = 1.0;
    let mut next = vec![0.0; n];
    let mut residual = f64::INFINITY;
    for _ in 0..RWR_MAX_ITERATIONS {
        next.iter_mut().for_each(|v| *v = 0.0);
        let mut stranded = 0.0;
        for z in 0..n {
            let mass = pi[z];
            if mass == 0.0 {
                continue;
            }
            let d = g.deg(z as Ix);
            if d == 0 {
                stranded += mass;
                continue;
            }
            let share = (1.0 - restart) * mass / d as f64;
            for &y in g.adj(z as Ix) {
                next[y as usize] += share;
            }
        }
        next[root as usize] += restart + (1.0 - restart) * stranded;
        residual = pi.iter().zip(&next).map(|(a, b)| (a - b).abs()).sum();
        std::mem::swap(&mut pi, &mut next);
        if residual < RWR_TOLERANCE {
            return Ok(pi);
        }
    }
    Err(Error::NotConverged {
        residual,
        iterations: RWR_MAX_ITERATIONS,
    })
}

/// Rooted PageRank made symmetric: `pi_u(p) + pi_p(u)`.
pub fn score_rpr(g: &BipartiteGraph, u: UserId, p: ItemId, cfg: &ScorerConfig) -> Result<f64> {
    let (u, p) = pair_ix(g, u, p)?;
    let from_u = rwr(g, u, cfg.pr_damping)?;
    let from_p = rwr(g, p, cfg.pr_damping)?;
    Ok(from_u[p as usize] + from_p[u as usize])
}

/// Flow carried to the end of one path when unit flow leaves its first node
/// and every node splits its inflow in proportion to incident edge weights.
pub(crate) fn propflow_term(g: &BipartiteGraph, nodes: &[Ix], edges: &[usize]) -> f64 {
    let mut flow = 1.0;
    for (&z, &e) in nodes.iter().zip(edges) {
        flow *= g.weight(e) / g.strength(z);
    }
    flow
}

pub fn score_propflow(g: &BipartiteGraph, u: UserId, p: ItemId, cfg: &ScorerConfig) -> Result<f64> {
    check_path_len(cfg.propflow_max_len)?;
    let (u, p) = pair_ix(g, u, p)?;
    let mut total = 0.0;
    g.visit_paths(u, p, cfg.propflow_max_len, |nodes, edges| {
        total += propflow_term(g, nodes, edges)
    });
    Ok(total)
}
