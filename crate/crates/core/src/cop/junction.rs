//! Exact inference on small binary MRFs with a junction tree.
//!
//! Clusters come from a min-fill elimination order (the elimination cliques,
//! keeping only maximal ones) and are joined by a maximum-weight spanning tree
//! on separator sizes, which gives the running intersection property.
//! Calibration is two-pass sum-product with messages rescaled to sum to one.

use crate::error::{Error, Result};

use super::mrf::LocalMRF;

pub const DEFAULT_CLUSTER_CAP: usize = 20;

/// Table over binary variables; bit `k` of an index is the value of `vars[k]`.
#[derive(Clone, Debug, PartialEq)]
pub(crate) struct Factor {
    pub vars: Vec<usize>,
    pub table: Vec<f64>,
}

impl Factor {
    pub fn ones(vars: Vec<usize>) -> Self {
        let table = vec![1.0; 1usize << vars.len()];
        Factor { vars, table }
    }

    fn positions_in(&self, sub: &[usize]) -> Vec<usize> {
        sub.iter()
            .map(|v| self.vars.iter().position(|w| w == v).expect("variable not in factor"))
            .collect()
    }

    /// Multiplies in `other`, whose variables must all belong to `self`.
    pub fn multiply(&mut self, other: &Factor) {
        let pos = self.positions_in(&other.vars);
        for (a, slot) in self.table.iter_mut().enumerate() {
            *slot *= other.table[project(a, &pos)];
        }
    }

    /// Sums out every variable not in `keep`; result variables follow `keep`.
    pub fn marginalize(&self, keep: &[usize]) -> Factor {
        let pos = self.positions_in(keep);
        let mut table = vec![0.0; 1usize << keep.len()];
        for (a, v) in self.table.iter().enumerate() {
            table[project(a, &pos)] += v;
        }
        Factor {
            vars: keep.to_vec(),
            table,
        }
    }

    fn normalize(&mut self) -> f64 {
        let z: f64 = self.table.iter().sum();
        if z > 0.0 {
            self.table.iter_mut().for_each(|v| *v /= z);
        }
        z
    }
}

/// Sub-assignment index picked out of `a` by bit positions `pos`.
fn project(a: usize, pos: &[usize]) -> usize {
    pos.iter()
        .enumerate()
        .fold(0usize, |acc, (k, &p)| acc | (((a >> p) & 1) << k))
}

fn intersection(a: &[usize], b: &[usize]) -> Vec<usize> {
    a.iter().filter(|v| b.contains(v)).copied().collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct JunctionTree {
    /// Sorted variable sets.
    pub clusters: Vec<Vec<usize>>,
    /// Tree edges between cluster indices.
    pub edges: Vec<(usize, usize)>,
}

impl JunctionTree {
    pub fn build(n_vars: usize, scopes: &[Vec<usize>], cluster_cap: usize) -> Result<Self> {
        if n_vars == 0 {
            return Err(Error::InvalidArgument("junction tree over zero variables".into()));
        }
        let mut adj = vec![vec![false; n_vars]; n_vars];
        for scope in scopes {
            for &a in scope {
                if a >= n_vars {
                    return Err(Error::InvalidArgument(format!("variable {a} out of range")));
                }
                for &b in scope {
                    if a != b {
                        adj[a][b] = true;
                    }
                }
            }
        }

        let mut alive = vec![true; n_vars];
        let mut cliques: Vec<Vec<usize>> = Vec::with_capacity(n_vars);
        for _ in 0..n_vars {
            let v = min_fill_vertex(&adj, &alive);
            let nbrs: Vec<usize> = (0..n_vars).filter(|&w| alive[w] && adj[v][w]).collect();
            for &a in &nbrs {
                for &b in &nbrs {
                    if a != b {
                        adj[a][b] = true;
                    }
                }
            }
            let mut clique = nbrs;
            clique.push(v);
            clique.sort_unstable();
            if clique.len() > cluster_cap {
                return Err(Error::TreewidthExceeded {
                    size: clique.len(),
                    cap: cluster_cap,
                });
            }
            cliques.push(clique);
            alive[v] = false;
        }

        let mut clusters: Vec<Vec<usize>> = Vec::new();
        for (k, c) in cliques.iter().enumerate() {
            let subsumed = cliques.iter().enumerate().any(|(j, d)| {
                j != k && c.iter().all(|v| d.contains(v)) && (d.len() > c.len() || j < k)
            });
            if !subsumed {
                clusters.push(c.clone());
            }
        }

        let mut candidates: Vec<(usize, usize, usize)> = Vec::new();
        for a in 0..clusters.len() {
            for b in a + 1..clusters.len() {
                candidates.push((intersection(&clusters[a], &clusters[b]).len(), a, b));
            }
        }
        candidates.sort_by(|x, y| y.0.cmp(&x.0).then((x.1, x.2).cmp(&(y.1, y.2))));
        let mut parent: Vec<usize> = (0..clusters.len()).collect();
        fn find(parent: &mut [usize], x: usize) -> usize {
            let mut r = x;
            while parent[r] != r {
                r = parent[r];
            }
            parent[x] = r;
            r
        }
        let mut edges = Vec::new();
        for (_, a, b) in candidates {
            let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
            if ra != rb {
                parent[ra] = rb;
                edges.push((a, b));
            }
        }
        Ok(JunctionTree { clusters, edges })
    }

    pub fn separator(&self, edge: usize) -> Vec<usize> {
        let (a, b) = self.edges[edge];
        intersection(&self.clusters[a], &self.clusters[b])
    }

    /// True when, for every variable, the clusters holding it form a
    /// connected subtree.
    pub fn has_running_intersection(&self) -> bool {
        let n_vars = self.clusters.iter().flatten().max().map_or(0, |m| m + 1);
        (0..n_vars).all(|v| {
            let holders: Vec<usize> = (0..self.clusters.len())
                .filter(|&c| self.clusters[c].contains(&v))
                .collect();
            if holders.is_empty() {
                return true;
            }
            // Flood through edges whose separator contains v.
            let mut seen = vec![false; self.clusters.len()];
            let mut stack = vec![holders[0]];
            seen[holders[0]] = true;
            while let Some(c) = stack.pop() {
                for &(a, b) in &self.edges {
                    let other = if a == c { b } else if b == c { a } else { continue };
                    if !seen[other] && self.clusters[other].contains(&v) {
                        seen[other] = true;
                        stack.push(other);
                    }
                }
            }
            holders.iter().all(|&c| seen[c])
        })
    }

    fn neighbors(&self) -> Vec<Vec<usize>> {
        let mut nbrs = vec![Vec::new(); self.clusters.len()];
        for &(a, b) in &self.edges {
            nbrs[a].push(b);
            nbrs[b].push(a);
        }
        nbrs
    }

    /// Runs sum-product over the tree. Each factor is attached to the first
    /// cluster containing its scope.
    pub(crate) fn calibrate(&self, factors: &[Factor]) -> Result<Calibrated> {
        let k = self.clusters.len();
        let mut tables: Vec<Factor> = self.clusters.iter().map(|c| Factor::ones(c.clone())).collect();
        for f in factors {
            let home = self
                .clusters
                .iter()
                .position(|c| f.vars.iter().all(|v| c.contains(v)))
                .ok_or_else(|| Error::InvalidArgument("factor scope not covered by any cluster".into()))?;
            tables[home].multiply(f);
        }

        // BFS order from cluster 0.
        let nbrs = self.neighbors();
        let mut order = vec![0usize];
        let mut parent = vec![usize::MAX; k];
        parent[0] = 0;
        let mut head = 0;
        while head < order.len() {
            let c = order[head];
            head += 1;
            for &d in &nbrs[c] {
                if parent[d] == usize::MAX {
                    parent[d] = c;
                    order.push(d);
                }
            }
        }
        let children: Vec<Vec<usize>> = (0..k)
            .map(|c| order[1..].iter().copied().filter(|&d| parent[d] == c).collect())
            .collect();
        let sep = |c: usize| intersection(&self.clusters[c], &self.clusters[parent[c]]);

        let mut up: Vec<Option<Factor>> = vec![None; k];
        for &c in order[1..].iter().rev() {
            let mut t = tables[c].clone();
            for &d in &children[c] {
                t.multiply(up[d].as_ref().unwrap());
            }
            let mut msg = t.marginalize(&sep(c));
            msg.normalize();
            up[c] = Some(msg);
        }
        let mut down: Vec<Option<Factor>> = vec![None; k];
        for &c in &order[1..] {
            let p = parent[c];
            let mut t = tables[p].clone();
            if let Some(m) = &down[p] {
                t.multiply(m);
            }
            for &d in &children[p] {
                if d != c {
                    t.multiply(up[d].as_ref().unwrap());
                }
            }
            let mut msg = t.marginalize(&sep(c));
            msg.normalize();
            down[c] = Some(msg);
        }

        let mut beliefs = Vec::with_capacity(k);
        for c in 0..k {
            let mut b = tables[c].clone();
            if let Some(m) = &down[c] {
                b.multiply(m);
            }
            for &d in &children[c] {
                b.multiply(up[d].as_ref().unwrap());
            }
            if b.normalize() <= 0.0 {
                return Err(Error::InvalidArgument(
                    "potentials admit no assignment with positive weight".into(),
                ));
            }
            beliefs.push(b);
        }
        let separators = self
            .edges
            .iter()
            .map(|&(a, b)| {
                let child = if parent[b] == a { b } else { a };
                beliefs[child].marginalize(&sep(child))
            })
            .collect();
        Ok(Calibrated {
            beliefs,
            separators,
        })
    }
}

fn min_fill_vertex(adj: &[Vec<bool>], alive: &[bool]) -> usize {
    let n = adj.len();
    (0..n)
        .filter(|&v| alive[v])
        .min_by_key(|&v| {
            let nbrs: Vec<usize> = (0..n).filter(|&w| alive[w] && adj[v][w]).collect();
            let mut fill = 0usize;
            for (i, &a) in nbrs.iter().enumerate() {
                for &b in &nbrs[i + 1..] {
                    if !adj[a][b] {
                        fill += 1;
                    }
                }
            }
            (fill, nbrs.len(), v)
        })
        .expect("no live vertex")
}

/// Normalized cluster and separator marginals of a calibrated tree.
#[derive(Clone, Debug)]
pub struct Calibrated {
    beliefs: Vec<Factor>,
    separators: Vec<Factor>,
}

impl Calibrated {
    /// Marginal over `vars` read from a cluster containing all of them. Bit
    /// `k` of the result index is the value of `vars[k]`.
    pub fn marginal(&self, vars: &[usize]) -> Option<Vec<f64>> {
        self.beliefs
            .iter()
            .find(|b| vars.iter().all(|v| b.vars.contains(v)))
            .map(|b| b.marginalize(vars).table)
    }

    /// Probability of a full assignment: product of cluster marginals over
    /// product of separator marginals.
    pub fn joint(&self, assignment: &[bool]) -> f64 {
        let value = |f: &Factor| {
            let idx = f
                .vars
                .iter()
                .enumerate()
                .fold(0usize, |acc, (k, &v)| acc | ((assignment[v] as usize) << k));
            f.table[idx]
        };
        let mut num = 1.0;
        for b in &self.beliefs {
            num *= value(b);
        }
        if num == 0.0 {
            return 0.0;
        }
        let mut den = 1.0;
        for s in &self.separators {
            den *= value(s);
        }
        num / den
    }
}

pub(crate) fn mrf_factors(mrf: &LocalMRF) -> Result<Vec<Factor>> {
    Ok(mrf
        .scopes()?
        .into_iter()
        .zip(&mrf.potentials)
        .map(|(vars, pot)| Factor {
            vars,
            table: pot.table.clone(),
        })
        .collect())
}

/// Builds and calibrates a junction tree for `mrf`. A constant factor over
/// `extra` is added first so that those variables share a cluster.
pub fn calibrate_mrf(mrf: &LocalMRF, extra: &[usize], cluster_cap: usize) -> Result<(JunctionTree, Calibrated)> {
    let mut factors = mrf_factors(mrf)?;
    if !extra.is_empty() {
        factors.push(Factor::ones(extra.to_vec()));
    }
    let scopes: Vec<Vec<usize>> = factors.iter().map(|f| f.vars.clone()).collect();
    let tree = JunctionTree::build(mrf.nodes.len(), &scopes, cluster_cap)?;
    let cal = tree.calibrate(&factors)?;
    Ok((tree, cal))
}

/// `P(U = 1, P = 1)` by junction-tree inference.
pub fn infer_joint(mrf: &LocalMRF, u: crate::graph::Node, p: crate::graph::Node) -> Result<f64> {
    infer_joint_capped(mrf, u, p, DEFAULT_CLUSTER_CAP)
}

pub fn infer_joint_capped(
    mrf: &LocalMRF,
    u: crate::graph::Node,
    p: crate::graph::Node,
    cluster_cap: usize,
) -> Result<f64> {
    let (iu, ip) = mrf.query_indices(u, p)?;
    let (_, cal) = calibrate_mrf(mrf, &[iu, ip], cluster_cap)?;
    let m = cal.marginal(&[iu, ip]).expect("query pair shares a cluster");
    Ok(m[3])
}
