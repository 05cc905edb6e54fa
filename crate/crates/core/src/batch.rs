//! Scores many candidate pairs for many measures at once.
//!
//! Candidates are grouped by user. Each user gets one depth-first walk that
//! feeds every path measure and the neighborhood sets for the co-occurrence
//! measures, one random walk, and one similarity row. Users are processed in
//! parallel and results are written back in input order, so the output does
//! not depend on scheduling.

use std::collections::BTreeMap;

use log::info;
use rayon::prelude::*;

use crate::cf::{self, CfModel};
use crate::cop::{self, bcns, CopModel, Decay};
use crate::error::{Error, Result};
use crate::graph::{BipartiteGraph, Ix, ItemId, Node, UserId};
use crate::measure::{Measure, MeasureConfig};
use crate::temporal::{self, LinkScoreAcc};
use crate::topo::{self, adamic_adar_weight, NEIGHBORHOOD_HOPS};

/// Scoring context over one training graph. Models are built only for the
/// measures it was created with.
pub struct Scorer<'g> {
    g: &'g BipartiteGraph,
    cfg: MeasureConfig,
    measures: Vec<Measure>,
    now: i64,
    cop: Option<CopModel>,
    cf: Option<CfModel>,
}

impl<'g> Scorer<'g> {
    pub fn new(g: &'g BipartiteGraph, cfg: MeasureConfig, measures: &[Measure]) -> Result<Self> {
        let cop = measures
            .iter()
            .any(|m| matches!(m, Measure::Cop | Measure::Tcop))
            .then(|| CopModel::new(g));
        Self::with_cop_model(g, cfg, measures, cop)
    }

    /// Like `new`, reusing already extracted cliques.
    pub fn with_cop_model(
        g: &'g BipartiteGraph,
        cfg: MeasureConfig,
        measures: &[Measure],
        cop: Option<CopModel>,
    ) -> Result<Self> {
        cfg.validate()?;
        if measures.contains(&Measure::Katz) {
            cfg.scorer.check_against(g);
        }
        let needs_cop = measures.iter().any(|m| matches!(m, Measure::Cop | Measure::Tcop));
        let cop = if needs_cop { Some(cop.unwrap_or_else(|| CopModel::new(g))) } else { None };
        let cf = measures
            .iter()
            .any(|m| matches!(m, Measure::Ucf | Measure::Icf))
            .then(|| CfModel::new(g));
        let mut measures = measures.to_vec();
        measures.sort();
        measures.dedup();
        Ok(Scorer {
            g,
            now: cfg.temporal.resolve_now(g),
            cfg,
            measures,
            cop,
            cf,
        })
    }

    pub fn measures(&self) -> &[Measure] {
        &self.measures
    }

    fn decay(&self) -> Decay {
        Decay::from_config(&self.cfg.temporal, self.now)
    }

    /// One pair through the single-pair functions. Unknown nodes and
    /// disconnected co-occurrence pairs are errors here.
    pub fn score_pair(&self, m: Measure, u: UserId, p: ItemId) -> Result<f64> {
        let (g, c) = (self.g, &self.cfg);
        match m {
            Measure::Cn => topo::score_cn(g, u, p),
            Measure::Jc => topo::score_jc(g, u, p),
            Measure::Aa => topo::score_aa(g, u, p),
            Measure::Pa => topo::score_pa(g, u, p),
            Measure::Katz => topo::score_katz(g, u, p, &c.scorer),
            Measure::Rpr => topo::score_rpr(g, u, p, &c.scorer),
            Measure::Pf => topo::score_propflow(g, u, p, &c.scorer),
            Measure::Ts => temporal::score_time_score(g, u, p, &c.temporal),
            Measure::Ls => temporal::score_link_score(g, u, p, &c.temporal),
            Measure::Tf => temporal::score_tflow(g, u, p, &c.temporal),
            Measure::Cop => cop::score_cop(g, self.cop_model()?, u, p, &c.cop),
            Measure::Tcop => cop::score_tcop(g, self.cop_model()?, u, p, &c.cop, &c.temporal),
            Measure::Ucf => cf::predict_user_cf(g, u, p, &c.cf),
            Measure::Icf => cf::predict_item_cf(g, u, p, &c.cf),
        }
    }

    fn cop_model(&self) -> Result<&CopModel> {
        self.cop
            .as_ref()
            .ok_or_else(|| Error::InvalidArgument("scorer was built without co-occurrence measures".into()))
    }

    /// Scores of every pair for every measure of this scorer, indexed
    /// `[measure][pair]`. `None` marks an undefined score: a node missing from
    /// the training graph, or no path for the co-occurrence measures.
    /// Collaborative filtering falls back to the global mean for an unknown
    /// user and to the user's mean for an unknown item instead.
    pub fn score_batch(&self, pairs: &[(UserId, ItemId)]) -> Result<Vec<Vec<Option<f64>>>> {
        let g = self.g;
        let mut by_user: BTreeMap<UserId, Vec<usize>> = BTreeMap::new();
        for (k, &(u, _)) in pairs.iter().enumerate() {
            by_user.entry(u).or_default().push(k);
        }
        let groups: Vec<(UserId, Vec<usize>)> = by_user.into_iter().collect();

        let shared = Shared::build(self, pairs);
        info!(
            "scoring {} pairs over {} users for {} measures",
            pairs.len(),
            groups.len(),
            self.measures.len()
        );
        let results: Vec<Vec<(usize, Vec<Option<f64>>)>> = groups
            .par_iter()
            .map(|(u, idx)| {
                let items: Vec<(usize, ItemId)> = idx.iter().map(|&k| (k, pairs[k].1)).collect();
                self.score_user(&shared, g.user_index(*u), &items)
            })
            .collect::<Result<_>>()?;

        let mut out = vec![vec![None; pairs.len()]; self.measures.len()];
        for (k, row) in results.into_iter().flatten() {
            for (m, v) in row.into_iter().enumerate() {
                out[m][k] = v;
            }
        }
        Ok(out)
    }

    fn score_user(
        &self,
        shared: &Shared,
        u: Option<Ix>,
        items: &[(usize, ItemId)],
    ) -> Result<Vec<(usize, Vec<Option<f64>>)>> {
        let g = self.g;
        let ixs: Vec<Option<Ix>> = items.iter().map(|&(_, p)| g.item_index(p)).collect();
        let mut rows: Vec<Vec<Option<f64>>> = vec![vec![None; self.measures.len()]; items.len()];

        if let Some(u) = u {
            let walked = if self.measures.iter().any(|m| m.walks_paths()) {
                Some(self.walk(u, &ixs))
            } else {
                None
            };
            let rwr = if self.measures.contains(&Measure::Rpr) {
                Some(topo::rwr(g, u, self.cfg.scorer.pr_damping)?)
            } else {
                None
            };
            let user_row = match (&self.cf, self.measures.contains(&Measure::Ucf)) {
                (Some(cf), true) => Some(cf.user_row(g, u, &self.cfg.cf)),
                _ => None,
            };
            for (slot, p) in ixs.iter().enumerate() {
                let Some(p) = *p else { continue };
                for (mi, &m) in self.measures.iter().enumerate() {
                    let value = match m {
                        Measure::Cn | Measure::Jc | Measure::Aa => Some(shared.neighborhood(m, u, p)),
                        Measure::Pa => Some((g.deg(u) * g.deg(p)) as f64),
                        Measure::Rpr => {
                            let pi = rwr.as_ref().unwrap();
                            // Reverse walk score from reversibility of the
                            // walk on an undirected graph.
                            Some(pi[p as usize] + pi[p as usize] * g.deg(u) as f64 / g.deg(p) as f64)
                        }
                        Measure::Ucf => {
                            let cf = self.cf.as_ref().unwrap();
                            Some(cf.predict_user(g, u, p, user_row.as_ref().unwrap(), &self.cfg.cf))
                        }
                        Measure::Icf => {
                            let cf = self.cf.as_ref().unwrap();
                            let row = shared.item_rows[p as usize - g.n_users()].as_ref().unwrap();
                            Some(cf.predict_item(g, u, p, row, &self.cfg.cf))
                        }
                        _ => walked.as_ref().unwrap()[slot][mi],
                    };
                    rows[slot][mi] = value;
                }
            }
        }

        // Collaborative filtering fallbacks for unknown nodes.
        if let Some(cf) = &self.cf {
            for (slot, p) in ixs.iter().enumerate() {
                if u.is_some() && p.is_some() {
                    continue;
                }
                let fallback = u.map_or(cf.global_mean(), |u| cf.user_mean(u));
                for (mi, &m) in self.measures.iter().enumerate() {
                    if matches!(m, Measure::Ucf | Measure::Icf) {
                        rows[slot][mi] = Some(fallback);
                    }
                }
            }
        }
        Ok(items.iter().map(|&(k, _)| k).zip(rows).collect())
    }

    /// Path measures for one user against each target item, `[slot][measure]`.
    fn walk(&self, u: Ix, targets: &[Option<Ix>]) -> Vec<Vec<Option<f64>>> {
        let g = self.g;
        let c = &self.cfg;
        let has = |m: Measure| self.measures.contains(&m);
        let want_cop = has(Measure::Cop) || has(Measure::Tcop);

        let mut slot_of = vec![u32::MAX; g.n_nodes()];
        for (s, p) in targets.iter().enumerate() {
            if let Some(p) = p {
                slot_of[*p as usize] = s as u32;
            }
        }
        let n = targets.len();
        let mut katz = vec![vec![0u64; c.scorer.katz_max_len + 1]; n];
        let mut pf = vec![0.0; n];
        let mut tf = vec![0.0; n];
        let mut ts = vec![0.0; n];
        let mut ls = vec![LinkScoreAcc::default(); n];
        let mut paths: Vec<bcns::PathStore> = vec![bcns::PathStore::default(); n];

        let walk_len = c.walk_len(&self.measures);
        g.visit_paths_from(
            u,
            walk_len,
            |y| slot_of[y as usize] != u32::MAX,
            |nodes, edges| {
                let s = slot_of[*nodes.last().unwrap() as usize] as usize;
                let len = edges.len();
                if has(Measure::Katz) && len <= c.scorer.katz_max_len {
                    katz[s][len] += 1;
                }
                if has(Measure::Pf) && len <= c.scorer.propflow_max_len {
                    pf[s] += topo::propflow_term(g, nodes, edges);
                }
                if has(Measure::Tf) && len <= c.temporal.max_len {
                    tf[s] += temporal::tflow_term(g, nodes, edges, &c.temporal);
                }
                if has(Measure::Ts) && len <= c.temporal.ts_max_len {
                    ts[s] += temporal::time_score_term(g, edges, self.now, &c.temporal);
                }
                if has(Measure::Ls) && len <= c.temporal.max_len {
                    ls[s].add(len, temporal::tpi(g, edges, self.now, &c.temporal));
                }
                if want_cop && len <= c.cop.max_len {
                    paths[s].push(nodes);
                }
            },
        );

        let decay = self.decay();
        let mut out = vec![vec![None; self.measures.len()]; n];
        for s in 0..n {
            let Some(p) = targets[s] else { continue };
            let set = if want_cop {
                bcns::bcns_from_paths(&std::mem::take(&mut paths[s]), c.cop.max_size)
            } else {
                None
            };
            for (mi, &m) in self.measures.iter().enumerate() {
                out[s][mi] = match m {
                    Measure::Katz => Some(topo::katz_from_counts(&katz[s], c.scorer.katz_beta, c.scorer.katz_max_len)),
                    Measure::Pf => Some(pf[s]),
                    Measure::Tf => Some(tf[s]),
                    Measure::Ts => Some(ts[s]),
                    Measure::Ls => Some(ls[s].finish()),
                    Measure::Cop | Measure::Tcop => set.as_ref().map(|set| {
                        let d = (m == Measure::Tcop).then_some(&decay);
                        self.cop
                            .as_ref()
                            .unwrap()
                            .joint_from_set(g, set, u, p, d, &c.cop)
                            .unwrap_or_else(|e| {
                                log::warn!("co-occurrence inference failed for {} {}: {e}", g.node(u), g.node(p));
                                f64::NAN
                            })
                    }),
                    _ => None,
                };
                if out[s][mi].is_some_and(f64::is_nan) {
                    out[s][mi] = None;
                }
            }
        }
        out
    }
}

/// Per-graph data reused across users.
struct Shared {
    words: usize,
    /// Three-hop ball of every node as a bitset, `words` u64 per node.
    balls: Vec<u64>,
    aa_weight: Vec<f64>,
    /// Item similarity rows for candidate items, by item offset.
    item_rows: Vec<Option<Vec<f64>>>,
}

impl Shared {
    fn build(s: &Scorer, pairs: &[(UserId, ItemId)]) -> Shared {
        let g = s.g;
        let n = g.n_nodes();
        let words = n.div_ceil(64);
        let needs_balls = s.measures.iter().any(|m| matches!(m, Measure::Cn | Measure::Jc | Measure::Aa));
        let (balls, aa_weight) = if needs_balls {
            let per_node: Vec<Vec<u64>> = (0..n as Ix)
                .into_par_iter()
                .map(|x| {
                    let mut bits = vec![0u64; words];
                    for z in g.ball(x, NEIGHBORHOOD_HOPS) {
                        bits[z as usize / 64] |= 1 << (z % 64);
                    }
                    bits
                })
                .collect();
            let weights = per_node
                .iter()
                .map(|b| adamic_adar_weight(b.iter().map(|w| w.count_ones() as usize).sum()))
                .collect();
            (per_node.concat(), weights)
        } else {
            (Vec::new(), Vec::new())
        };

        let mut item_rows = vec![None; g.n_items()];
        if let (Some(cf), true) = (&s.cf, s.measures.contains(&Measure::Icf)) {
            let mut wanted: Vec<Ix> = pairs.iter().filter_map(|&(_, p)| g.item_index(p)).collect();
            wanted.sort_unstable();
            wanted.dedup();
            let rows: Vec<(Ix, Vec<f64>)> = wanted.par_iter().map(|&p| (p, cf.item_row(g, p))).collect();
            for (p, row) in rows {
                item_rows[p as usize - g.n_users()] = Some(row);
            }
        }
        Shared {
            words,
            balls,
            aa_weight,
            item_rows,
        }
    }

    fn ball(&self, x: Ix) -> &[u64] {
        &self.balls[x as usize * self.words..(x as usize + 1) * self.words]
    }

    fn contains(&self, x: Ix, z: Ix) -> bool {
        self.ball(x)[z as usize / 64] >> (z % 64) & 1 == 1
    }

    /// Neighborhood measures with `p` dropped from `u`'s ball and `u` from
    /// `p`'s; neither ball holds its own center.
    fn neighborhood(&self, m: Measure, u: Ix, p: Ix) -> f64 {
        let (a, b) = (self.ball(u), self.ball(p));
        match m {
            Measure::Cn => a.iter().zip(b).map(|(x, y)| (x & y).count_ones() as f64).sum(),
            Measure::Jc => {
                let inter: u32 = a.iter().zip(b).map(|(x, y)| (x & y).count_ones()).sum();
                let mut union: u32 = a.iter().zip(b).map(|(x, y)| (x | y).count_ones()).sum();
                union -= self.contains(u, p) as u32 + self.contains(p, u) as u32;
                if union == 0 {
                    0.0
                } else {
                    inter as f64 / union as f64
                }
            }
            Measure::Aa => {
                let mut total = 0.0;
                for (w, (x, y)) in a.iter().zip(b).enumerate() {
                    let mut bits = x & y;
                    while bits != 0 {
                        let z = w * 64 + bits.trailing_zeros() as usize;
                        total += self.aa_weight[z];
                        bits &= bits - 1;
                    }
                }
                total
            }
            _ => unreachable!("not a neighborhood measure"),
        }
    }
}

/// Maps the "undefined" errors of single-pair scoring to `None`.
pub fn defined(r: Result<f64>) -> Result<Option<f64>> {
    match r {
        Ok(v) => Ok(Some(v)),
        Err(Error::UnknownNode(_)) | Err(Error::Disjoint { .. }) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Items the user has not rated, best first, ties by item id; undefined
/// scores rank last.
pub fn recommend(scorer: &Scorer, m: Measure, u: UserId, k: usize) -> Result<Vec<(ItemId, Option<f64>)>> {
    let g = scorer.g;
    let ui = g.ix(Node::User(u))?;
    let unseen: Vec<(UserId, ItemId)> = g
        .items()
        .iter()
        .filter(|&&i| g.edge_between(ui, g.item_index(i).unwrap()).is_none())
        .map(|&i| (u, i))
        .collect();
    let mi = scorer
        .measures
        .iter()
        .position(|&x| x == m)
        .ok_or_else(|| Error::InvalidArgument(format!("scorer was not built for measure {m}")))?;
    let scores = scorer.score_batch(&unseen)?.swap_remove(mi);
    let mut ranked: Vec<(ItemId, Option<f64>)> = unseen.iter().map(|&(_, i)| i).zip(scores).collect();
    ranked.sort_by(|a, b| {
        let (x, y) = (a.1.unwrap_or(f64::NEG_INFINITY), b.1.unwrap_or(f64::NEG_INFINITY));
        y.total_cmp(&x).then(a.0.cmp(&b.0))
    });
    ranked.truncate(k);
    Ok(ranked)
}
