//! Neighborhood collaborative filtering: user-based with Pearson similarity
//! and item-based with cosine similarity. Predicted ratings serve as scores.

use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::graph::{BipartiteGraph, Ix, ItemId, Node, UserId};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CfConfig {
    pub k: usize,
    /// Fewest co-rated items for a non-zero Pearson similarity.
    pub min_overlap: usize,
}

impl Default for CfConfig {
    fn default() -> Self {
        CfConfig { k: 50, min_overlap: 2 }
    }
}

impl CfConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k < 1 || self.min_overlap < 1 {
            return Err(Error::InvalidArgument(format!(
                "CF needs k >= 1 and min_overlap >= 1, got k={} min_overlap={}",
                self.k, self.min_overlap
            )));
        }
        Ok(())
    }
}

/// Running sums for a Pearson correlation over co-rated items.
#[derive(Clone, Copy, Debug, Default)]
struct CoRated {
    n: usize,
    sx: f64,
    sy: f64,
    sxx: f64,
    syy: f64,
    sxy: f64,
}

impl CoRated {
    fn add(&mut self, x: f64, y: f64) {
        self.n += 1;
        self.sx += x;
        self.sy += y;
        self.sxx += x * x;
        self.syy += y * y;
        self.sxy += x * y;
    }

    fn pearson(&self, min_overlap: usize) -> f64 {
        if self.n < min_overlap {
            return 0.0;
        }
        let n = self.n as f64;
        let vx = n * self.sxx - self.sx * self.sx;
        let vy = n * self.syy - self.sy * self.sy;
        if vx <= 0.0 || vy <= 0.0 {
            return 0.0;
        }
        ((n * self.sxy - self.sx * self.sy) / (vx * vy).sqrt()).clamp(-1.0, 1.0)
    }
}

/// Per-node statistics shared by every prediction on one graph.
#[derive(Clone, Debug)]
pub struct CfModel {
    user_means: Vec<f64>,
    item_norms: Vec<f64>,
    global_mean: f64,
    range: (f64, f64),
}

impl CfModel {
    pub fn new(g: &BipartiteGraph) -> Self {
        let user_means = (0..g.n_users() as Ix)
            .map(|u| g.edges(u).map(|e| g.weight(e)).sum::<f64>() / g.deg(u) as f64)
            .collect();
        let item_norms = (g.n_users() as Ix..g.n_nodes() as Ix)
            .map(|i| g.edges(i).map(|e| g.weight(e).powi(2)).sum::<f64>().sqrt())
            .collect();
        let total: f64 = (0..g.n_users() as Ix).flat_map(|u| g.edges(u)).map(|e| g.weight(e)).sum();
        let global_mean = if g.n_edges() == 0 { 0.0 } else { total / g.n_edges() as f64 };
        CfModel {
            user_means,
            item_norms,
            global_mean,
            range: g.rating_range().unwrap_or((0.0, 0.0)),
        }
    }

    pub fn global_mean(&self) -> f64 {
        self.global_mean
    }

    pub(crate) fn user_mean(&self, u: Ix) -> f64 {
        self.user_means[u as usize]
    }

    fn clamp(&self, r: f64) -> f64 {
        r.clamp(self.range.0, self.range.1)
    }

    /// Pearson similarity of `u` to every user, indexed by user index.
    pub(crate) fn user_row(&self, g: &BipartiteGraph, u: Ix, cfg: &CfConfig) -> Vec<f64> {
        let mut acc = vec![CoRated::default(); g.n_users()];
        for e in g.edges(u) {
            let x = g.weight(e);
            for f in g.edges(g.target(e)) {
                acc[g.target(f) as usize].add(x, g.weight(f));
            }
        }
        acc.iter().map(|c| c.pearson(cfg.min_overlap)).collect()
    }

    /// Cosine similarity of item `i` to every item, indexed by item offset.
    pub(crate) fn item_row(&self, g: &BipartiteGraph, i: Ix) -> Vec<f64> {
        let base = g.n_users();
        let mut dot = vec![0.0; g.n_items()];
        for e in g.edges(i) {
            let x = g.weight(e);
            for f in g.edges(g.target(e)) {
                dot[g.target(f) as usize - base] += x * g.weight(f);
            }
        }
        let ni = self.item_norms[i as usize - base];
        dot.iter()
            .zip(&self.item_norms)
            .map(|(&d, &nj)| if d == 0.0 { 0.0 } else { (d / (ni * nj)).clamp(0.0, 1.0) })
            .collect()
    }

    /// Mean-centered weighted deviation over the `k` most similar raters of `i`.
    pub(crate) fn predict_user(&self, g: &BipartiteGraph, u: Ix, i: Ix, row: &[f64], cfg: &CfConfig) -> f64 {
        let neighbors: Vec<(f64, Ix, f64)> = g
            .edges(i)
            .map(|e| (g.target(e), g.weight(e)))
            .filter(|&(v, _)| v != u && row[v as usize] != 0.0)
            .map(|(v, r)| (row[v as usize], v, r))
            .collect();
        let top = top_k(neighbors, cfg.k);
        let den: f64 = top.iter().map(|t| t.0.abs()).sum();
        let mean = self.user_mean(u);
        if den == 0.0 {
            return self.clamp(mean);
        }
        let num: f64 = top.iter().map(|&(s, v, r)| s * (r - self.user_mean(v))).sum();
        self.clamp(mean + num / den)
    }

    /// Similarity-weighted average of `u`'s ratings on the `k` items most
    /// similar to `i`.
    pub(crate) fn predict_item(&self, g: &BipartiteGraph, u: Ix, i: Ix, row: &[f64], cfg: &CfConfig) -> f64 {
        let base = g.n_users();
        let rated: Vec<(f64, Ix, f64)> = g
            .edges(u)
            .map(|e| (g.target(e), g.weight(e)))
            .filter(|&(j, _)| j != i && row[j as usize - base] > 0.0)
            .map(|(j, r)| (row[j as usize - base], j, r))
            .collect();
        let top = top_k(rated, cfg.k);
        let den: f64 = top.iter().map(|t| t.0).sum();
        if den == 0.0 {
            return self.clamp(self.user_mean(u));
        }
        let num: f64 = top.iter().map(|&(s, _, r)| s * r).sum();
        self.clamp(num / den)
    }
}

/// Highest similarity first, ties to the lower index.
fn top_k(mut v: Vec<(f64, Ix, f64)>, k: usize) -> Vec<(f64, Ix, f64)> {
    v.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap_or(Ordering::Equal).then(a.1.cmp(&b.1)));
    v.truncate(k);
    v
}

fn user_ix(g: &BipartiteGraph, u: UserId) -> Result<Ix> {
    g.ix(Node::User(u))
}

fn item_ix(g: &BipartiteGraph, i: ItemId) -> Result<Ix> {
    g.ix(Node::Item(i))
}

pub fn similarity_users(g: &BipartiteGraph, u1: UserId, u2: UserId, cfg: &CfConfig) -> Result<f64> {
    cfg.validate()?;
    let (a, b) = (user_ix(g, u1)?, user_ix(g, u2)?);
    let mut acc = CoRated::default();
    for e in g.edges(a) {
        if let Some(f) = g.edge_between(b, g.target(e)) {
            acc.add(g.weight(e), g.weight(f));
        }
    }
    Ok(acc.pearson(cfg.min_overlap))
}

pub fn similarity_items(g: &BipartiteGraph, i1: ItemId, i2: ItemId) -> Result<f64> {
    let (a, b) = (item_ix(g, i1)?, item_ix(g, i2)?);
    let mut dot = 0.0;
    for e in g.edges(a) {
        if let Some(f) = g.edge_between(b, g.target(e)) {
            dot += g.weight(e) * g.weight(f);
        }
    }
    if dot == 0.0 {
        return Ok(0.0);
    }
    let norm = |x: Ix| g.edges(x).map(|e| g.weight(e).powi(2)).sum::<f64>().sqrt();
    Ok((dot / (norm(a) * norm(b))).clamp(0.0, 1.0))
}

pub fn predict_user_cf(g: &BipartiteGraph, u: UserId, i: ItemId, cfg: &CfConfig) -> Result<f64> {
    cfg.validate()?;
    let (u, i) = (user_ix(g, u)?, item_ix(g, i)?);
    let model = CfModel::new(g);
    let row = model.user_row(g, u, cfg);
    Ok(model.predict_user(g, u, i, &row, cfg))
}

pub fn predict_item_cf(g: &BipartiteGraph, u: UserId, i: ItemId, cfg: &CfConfig) -> Result<f64> {
    cfg.validate()?;
    let (u, i) = (user_ix(g, u)?, item_ix(g, i)?);
    let model = CfModel::new(g);
    let row = model.item_row(g, i);
    Ok(model.predict_item(g, u, i, &row, cfg))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_graph, Interaction};
    use approx::assert_abs_diff_eq;

    fn graph(rows: &[(u32, u32, f64)]) -> BipartiteGraph {
        let events: Vec<Interaction> = rows.iter().map(|&(u, i, r)| Interaction::new(u, i, r, 0)).collect();
        build_graph(&events).unwrap()
    }

    fn toy() -> BipartiteGraph {
        graph(&[
            (1, 1, 5.0),
            (1, 2, 3.0),
            (1, 3, 4.0),
            (2, 1, 4.0),
            (2, 2, 2.0),
            (2, 3, 5.0),
            (2, 4, 3.0),
            (3, 1, 1.0),
            (3, 2, 5.0),
            (3, 4, 4.0),
        ])
    }

    const CFG: CfConfig = CfConfig { k: 50, min_overlap: 2 };

    #[test]
    fn pearson_cases() {
        let g = graph(&[(1, 1, 2.0), (1, 2, 4.0), (2, 1, 2.0), (2, 2, 4.0), (3, 1, 5.0), (3, 2, 1.0)]);
        assert_abs_diff_eq!(similarity_users(&g, UserId(1), UserId(2), &CFG).unwrap(), 1.0, epsilon = 1e-12);
        let g = graph(&[(1, 1, 5.0), (1, 2, 1.0), (2, 1, 1.0), (2, 2, 5.0)]);
        assert_abs_diff_eq!(similarity_users(&g, UserId(1), UserId(2), &CFG).unwrap(), -1.0, epsilon = 1e-12);
        let g = graph(&[(1, 1, 5.0), (1, 2, 1.0), (2, 1, 1.0), (2, 3, 5.0)]);
        assert_eq!(similarity_users(&g, UserId(1), UserId(2), &CFG).unwrap(), 0.0);
    }

    #[test]
    fn cosine_cases() {
        let g = graph(&[(1, 1, 3.0), (2, 1, 4.0), (1, 2, 4.0), (2, 2, 3.0), (3, 3, 1.0)]);
        assert_abs_diff_eq!(similarity_items(&g, ItemId(1), ItemId(2)).unwrap(), 0.96, epsilon = 1e-12);
        assert_abs_diff_eq!(similarity_items(&g, ItemId(1), ItemId(1)).unwrap(), 1.0, epsilon = 1e-12);
        assert_eq!(similarity_items(&g, ItemId(1), ItemId(3)).unwrap(), 0.0);
    }

    #[test]
    fn toy_user_cf() {
        // Sims of user 1: 0.6547 to user 2, -1 to user 3; both rated item 4.
        let got = predict_user_cf(&toy(), UserId(1), ItemId(4), &CFG).unwrap();
        assert_abs_diff_eq!(got, 3.3992739872898268, epsilon = 1e-12);
    }

    #[test]
    fn toy_item_cf() {
        let got = predict_item_cf(&toy(), UserId(3), ItemId(3), &CFG).unwrap();
        assert_abs_diff_eq!(got, 2.826817003713267, epsilon = 1e-12);
    }

    #[test]
    fn single_neighbor_deviation() {
        // User 2 matches user 1 exactly and rated item 3 one above their mean.
        let g = graph(&[
            (1, 1, 2.0),
            (1, 2, 4.0),
            (2, 1, 2.0),
            (2, 2, 4.0),
            (2, 3, 4.0),
        ]);
        let mean2 = 10.0 / 3.0;
        let want = 3.0 + (4.0 - mean2);
        assert_abs_diff_eq!(predict_user_cf(&g, UserId(1), ItemId(3), &CFG).unwrap(), want, epsilon = 1e-12);
    }

    #[test]
    fn user_cf_fallback_to_mean() {
        let g = graph(&[(1, 1, 2.0), (1, 2, 4.0), (2, 3, 5.0)]);
        assert_eq!(predict_user_cf(&g, UserId(1), ItemId(3), &CFG).unwrap(), 3.0);
    }

    #[test]
    fn item_cf_single_rated_item() {
        let g = graph(&[(1, 1, 4.0), (2, 1, 2.0), (2, 2, 2.0)]);
        // Item 2 is rated only by user 2, so cos(1, 2) = 4 / (sqrt(20) * 2).
        // With a single rated neighbor the weighted average is that rating.
        assert_abs_diff_eq!(predict_item_cf(&g, UserId(1), ItemId(2), &CFG).unwrap(), 4.0, epsilon = 1e-12);
    }

    #[test]
    fn predictions_clamped() {
        let g = toy();
        for &u in g.users() {
            for &i in g.items() {
                for p in [
                    predict_user_cf(&g, u, i, &CFG).unwrap(),
                    predict_item_cf(&g, u, i, &CFG).unwrap(),
                ] {
                    assert!((1.0..=5.0).contains(&p));
                }
            }
        }
    }

    #[test]
    fn unknown_nodes() {
        let g = toy();
        assert!(predict_user_cf(&g, UserId(9), ItemId(1), &CFG).is_err());
        assert!(predict_item_cf(&g, UserId(1), ItemId(9), &CFG).is_err());
        assert!(similarity_items(&g, ItemId(1), ItemId(9)).is_err());
    }

    #[test]
    fn rows_match_pairwise() {
        let g = toy();
        let m = CfModel::new(&g);
        for (a, &u1) in g.users().iter().enumerate() {
            let row = m.user_row(&g, a as Ix, &CFG);
            for (b, &u2) in g.users().iter().enumerate() {
                assert_abs_diff_eq!(row[b], similarity_users(&g, u1, u2, &CFG).unwrap(), epsilon = 1e-12);
            }
        }
        for (a, &i1) in g.items().iter().enumerate() {
            let row = m.item_row(&g, (g.n_users() + a) as Ix);
            for (b, &i2) in g.items().iter().enumerate() {
                assert_abs_diff_eq!(row[b], similarity_items(&g, i1, i2).unwrap(), epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn duplicated_user_is_top_neighbor() {
        let mut rows = vec![(1, 1, 5.0), (1, 2, 2.0), (1, 3, 4.0)];
        rows.extend([(2, 1, 5.0), (2, 2, 2.0), (2, 3, 4.0)]);
        rows.extend([(3, 1, 1.0), (3, 2, 4.0), (3, 3, 3.0)]);
        let g = graph(&rows);
        let m = CfModel::new(&g);
        let row = m.user_row(&g, 0, &CFG);
        assert_abs_diff_eq!(row[1], 1.0, epsilon = 1e-12);
        assert!(row[1] > row[2]);
    }
}
