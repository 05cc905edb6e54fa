//! Co-occurrence probability of a user–item pair from a local Markov random
//! field built over the pair's central neighborhood.

pub mod bclique;
pub mod bcns;
pub mod brute;
pub mod junction;
pub mod mrf;

use log::debug;

use crate::error::{Error, Result};
use crate::graph::{BipartiteGraph, Ix, ItemId, UserId};
use crate::temporal::TemporalConfig;
use crate::topo::pair_ix;

pub use bclique::{extract_bcliques, read_bcliques, write_bcliques, BClique};
pub use bcns::compute_bcns;
pub use brute::{brute_force_joint, BRUTE_FORCE_LIMIT};
pub use junction::{calibrate_mrf, infer_joint, infer_joint_capped, Calibrated, JunctionTree};
pub use mrf::{build_potentials, CliquePotential, Decay, LocalMRF};

use bclique::IxClique;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CopConfig {
    /// Longest path considered when building the neighborhood set.
    pub max_len: usize,
    pub max_size: usize,
    /// Largest potential scope; bigger restricted cliques are truncated.
    pub clique_cap: usize,
    pub cluster_cap: usize,
    pub smoothing: f64,
}

impl Default for CopConfig {
    fn default() -> Self {
        CopConfig {
            max_len: 9,
            max_size: 5,
            clique_cap: 10,
            cluster_cap: junction::DEFAULT_CLUSTER_CAP,
            smoothing: 1.0,
        }
    }
}

impl CopConfig {
    pub fn validate(&self) -> Result<()> {
        bcns::check_args(self.max_len, self.max_size)?;
        crate::graph::check_path_len(self.max_len)?;
        if self.clique_cap < 2 || self.cluster_cap < 2 {
            return Err(Error::InvalidArgument("clique and cluster caps must be >= 2".into()));
        }
        if !(self.smoothing.is_finite() && self.smoothing >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "smoothing must be non-negative, got {}",
                self.smoothing
            )));
        }
        Ok(())
    }
}

/// B-cliques of a training graph plus an index from node to cliques.
#[derive(Clone, Debug)]
pub struct CopModel {
    cliques: Vec<IxClique>,
    by_node: Vec<Vec<u32>>,
}

impl CopModel {
    pub fn new(g: &BipartiteGraph) -> Self {
        Self::from_ix(g, bclique::extract_ix(g))
    }

    /// Uses cached cliques; each must be complete in `g`.
    pub fn from_cliques(g: &BipartiteGraph, cliques: &[BClique]) -> Result<Self> {
        Ok(Self::from_ix(g, bclique::cliques_to_ix(g, cliques)?))
    }

    fn from_ix(g: &BipartiteGraph, cliques: Vec<IxClique>) -> Self {
        let mut by_node = vec![Vec::new(); g.n_nodes()];
        for (k, c) in cliques.iter().enumerate() {
            for &x in c.users.iter().chain(&c.items) {
                by_node[x as usize].push(k as u32);
            }
        }
        CopModel { cliques, by_node }
    }

    pub fn n_cliques(&self) -> usize {
        self.cliques.len()
    }

    pub fn cliques(&self, g: &BipartiteGraph) -> Vec<BClique> {
        self.cliques
            .iter()
            .map(|c| BClique {
                users: c.users.iter().map(|&x| g.users()[x as usize]).collect(),
                items: c.items.iter().map(|&x| g.items()[x as usize - g.n_users()]).collect(),
            })
            .collect()
    }

    /// Potential scopes over a neighborhood set: every clique touching the
    /// set, restricted to it and truncated to the cap, then a pairwise scope
    /// for each set edge no scope covers. Scopes are sorted index lists.
    pub(crate) fn scopes(&self, g: &BipartiteGraph, set: &[Ix], clique_cap: usize) -> Vec<Vec<Ix>> {
        let mut touched: Vec<u32> = set
            .iter()
            .flat_map(|&x| self.by_node[x as usize].iter().copied())
            .collect();
        touched.sort_unstable();
        touched.dedup();

        let mut scopes: Vec<Vec<Ix>> = Vec::new();
        for k in touched {
            let c = &self.cliques[k as usize];
            let mut users: Vec<Ix> = set.iter().copied().filter(|x| c.users.binary_search(x).is_ok()).collect();
            let mut items: Vec<Ix> = set.iter().copied().filter(|x| c.items.binary_search(x).is_ok()).collect();
            users.sort_unstable();
            items.sort_unstable();
            if users.is_empty() || items.is_empty() {
                continue;
            }
            let mut scope = if users.len() + items.len() > clique_cap {
                debug!(
                    "truncating restricted clique of {} nodes to {clique_cap}",
                    users.len() + items.len()
                );
                truncate(g, users, items, clique_cap)
            } else {
                users.into_iter().chain(items).collect()
            };
            scope.sort_unstable();
            scopes.push(scope);
        }
        scopes.sort_unstable();
        scopes.dedup();
        let subsumed: Vec<bool> = scopes
            .iter()
            .map(|s| {
                scopes
                    .iter()
                    .any(|t| t.len() > s.len() && s.iter().all(|x| t.binary_search(x).is_ok()))
            })
            .collect();
        let mut scopes: Vec<Vec<Ix>> = scopes
            .into_iter()
            .zip(subsumed)
            .filter_map(|(s, gone)| (!gone).then_some(s))
            .collect();

        let mut extra = Vec::new();
        for &a in set.iter().filter(|&&x| g.is_user_ix(x)) {
            for &b in set.iter().filter(|&&x| !g.is_user_ix(x)) {
                if g.edge_between(a, b).is_some()
                    && !scopes.iter().any(|s| s.binary_search(&a).is_ok() && s.binary_search(&b).is_ok())
                {
                    extra.push(vec![a, b]);
                }
            }
        }
        extra.sort_unstable();
        scopes.extend(extra);
        scopes
    }

    /// Local MRF over a neighborhood set, with potentials counted from the
    /// graph's edges.
    pub(crate) fn local_mrf(
        &self,
        g: &BipartiteGraph,
        set: &[Ix],
        decay: Option<&Decay>,
        cfg: &CopConfig,
    ) -> LocalMRF {
        let potentials = self
            .scopes(g, set, cfg.clique_cap)
            .into_iter()
            .map(|scope| {
                let table = count_table(g, &scope, decay, cfg.smoothing);
                CliquePotential {
                    variables: scope.iter().map(|&x| g.node(x)).collect(),
                    table,
                }
            })
            .collect();
        LocalMRF {
            nodes: set.iter().map(|&x| g.node(x)).collect(),
            potentials,
        }
    }

    /// Joint probability for a pair given its neighborhood set.
    pub(crate) fn joint_from_set(
        &self,
        g: &BipartiteGraph,
        set: &[Ix],
        u: Ix,
        p: Ix,
        decay: Option<&Decay>,
        cfg: &CopConfig,
    ) -> Result<f64> {
        let mrf = self.local_mrf(g, set, decay, cfg);
        infer_joint_capped(&mrf, g.node(u), g.node(p), cfg.cluster_cap)
    }

    fn score(
        &self,
        g: &BipartiteGraph,
        u: UserId,
        p: ItemId,
        decay: Option<&Decay>,
        cfg: &CopConfig,
    ) -> Result<f64> {
        cfg.validate()?;
        let (ui, pi) = pair_ix(g, u, p)?;
        let mut paths = bcns::PathStore::default();
        g.visit_paths(ui, pi, cfg.max_len, |nodes, _| paths.push(nodes));
        let set = bcns::bcns_from_paths(&paths, cfg.max_size).ok_or(Error::Disjoint { user: u, item: p })?;
        self.joint_from_set(g, &set, ui, pi, decay, cfg)
    }
}

/// Keeps the highest-degree nodes (ties to the lower index), reserving one
/// slot for each side.
fn truncate(g: &BipartiteGraph, mut users: Vec<Ix>, mut items: Vec<Ix>, cap: usize) -> Vec<Ix> {
    let by_degree = |v: &mut Vec<Ix>| v.sort_by(|&a, &b| g.deg(b).cmp(&g.deg(a)).then(a.cmp(&b)));
    by_degree(&mut users);
    by_degree(&mut items);
    let mut kept = vec![users[0], items[0]];
    let mut rest: Vec<Ix> = users[1..].iter().chain(&items[1..]).copied().collect();
    by_degree(&mut rest);
    kept.extend(rest.into_iter().take(cap - 2));
    kept
}

/// Event counts over a scope, read off the adjacency of its nodes. Each edge
/// touching the scope is visited once.
pub(crate) fn count_table(g: &BipartiteGraph, scope: &[Ix], decay: Option<&Decay>, smoothing: f64) -> Vec<f64> {
    let mut table = vec![0.0; 1usize << scope.len()];
    let bit = |x: Ix| scope.iter().position(|&y| y == x).map_or(0, |k| 1usize << k);
    for &x in scope {
        let user_side = g.is_user_ix(x);
        for e in g.edges(x) {
            let other = g.target(e);
            if !user_side && scope.contains(&other) {
                continue;
            }
            table[bit(x) | bit(other)] += mrf::event_weight(decay, g.time(e));
        }
    }
    table.iter_mut().for_each(|v| *v += smoothing);
    table
}

pub fn score_cop(g: &BipartiteGraph, model: &CopModel, u: UserId, p: ItemId, cfg: &CopConfig) -> Result<f64> {
    model.score(g, u, p, None, cfg)
}

pub fn score_tcop(
    g: &BipartiteGraph,
    model: &CopModel,
    u: UserId,
    p: ItemId,
    cfg: &CopConfig,
    tcfg: &TemporalConfig,
) -> Result<f64> {
    tcfg.validate()?;
    let decay = Decay::from_config(tcfg, tcfg.resolve_now(g));
    model.score(g, u, p, Some(&decay), cfg)
}
