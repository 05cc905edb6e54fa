//! Immutable weighted, timestamped user–item bipartite graph.
//!
//! Node ids are remapped to dense indices at build time: users occupy
//! `0..n_users` and items `n_users..n_users + n_items`, each range ordered by
//! the original id. Adjacency is stored CSR-style and sorted by neighbor index,
//! so iteration order always follows the original id order.

use std::collections::{HashMap, VecDeque};
use std::fmt;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense internal node index.
pub(crate) type Ix = u32;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct UserId(pub u32);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ItemId(pub u32);

impl fmt::Display for UserId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "u{}", self.0)
    }
}

impl fmt::Display for ItemId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "i{}", self.0)
    }
}

/// A node of either side. Users order before items.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Node {
    User(UserId),
    Item(ItemId),
}

impl Node {
    pub fn is_user(&self) -> bool {
        matches!(self, Node::User(_))
    }
}

impl fmt::Display for Node {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Node::User(u) => u.fmt(f),
            Node::Item(i) => i.fmt(f),
        }
    }
}

impl From<UserId> for Node {
    fn from(u: UserId) -> Self {
        Node::User(u)
    }
}

impl From<ItemId> for Node {
    fn from(i: ItemId) -> Self {
        Node::Item(i)
    }
}

/// One rating event.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interaction {
    pub user: UserId,
    pub item: ItemId,
    pub rating: f64,
    pub timestamp: i64,
}

impl Interaction {
    pub fn new(user: u32, item: u32, rating: f64, timestamp: i64) -> Self {
        Interaction {
            user: UserId(user),
            item: ItemId(item),
            rating,
            timestamp,
        }
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if !(self.rating.is_finite() && self.rating > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "rating must be positive, got {} for ({}, {})",
                self.rating, self.user, self.item
            )));
        }
        if self.timestamp < 0 {
            return Err(Error::InvalidArgument(format!(
                "timestamp must be non-negative, got {} for ({}, {})",
                self.timestamp, self.user, self.item
            )));
        }
        Ok(())
    }
}

/// A simple path alternating between users and items.
#[derive(Clone, Debug, PartialEq)]
pub struct Path {
    pub nodes: Vec<Node>,
    pub weights: Vec<f64>,
    pub timestamps: Vec<i64>,
}

impl Path {
    /// Number of edges.
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BipartiteGraph {
    users: Vec<UserId>,
    items: Vec<ItemId>,
    user_ix: HashMap<UserId, Ix>,
    item_ix: HashMap<ItemId, Ix>,
    offsets: Vec<usize>,
    targets: Vec<Ix>,
    weights: Vec<f64>,
    times: Vec<i64>,
    strength: Vec<f64>,
}

/// Builds a graph from deduplicated interactions.
pub fn build_graph(interactions: &[Interaction]) -> Result<BipartiteGraph> {
    BipartiteGraph::build(interactions)
}

impl BipartiteGraph {
    pub fn build(interactions: &[Interaction]) -> Result<Self> {
        for it in interactions {
            it.validate()?;
        }
        let mut sorted: Vec<Interaction> = interactions.to_vec();
        sorted.sort_by_key(|it| (it.user, it.item));
        if let Some(w) = sorted
            .windows(2)
            .find(|w| w[0].user == w[1].user && w[0].item == w[1].item)
        {
            return Err(Error::DuplicatePair {
                user: w[0].user,
                item: w[0].item,
            });
        }

        let mut users: Vec<UserId> = sorted.iter().map(|it| it.user).collect();
        users.dedup();
        let mut items: Vec<ItemId> = sorted.iter().map(|it| it.item).collect();
        items.sort_unstable();
        items.dedup();

        let n_users = users.len() as Ix;
        let user_ix: HashMap<UserId, Ix> = users
            .iter()
            .enumerate()
            .map(|(i, u)| (*u, i as Ix))
            .collect();
        let item_ix: HashMap<ItemId, Ix> = items
            .iter()
            .enumerate()
            .map(|(i, it)| (*it, n_users + i as Ix))
            .collect();

        let n = users.len() + items.len();
        let mut degree = vec![0usize; n];
        for it in &sorted {
            degree[user_ix[&it.user] as usize] += 1;
            degree[item_ix[&it.item] as usize] += 1;
        }
        let mut offsets = Vec::with_capacity(n + 1);
        offsets.push(0);
        for d in &degree {
            offsets.push(offsets.last().unwrap() + d);
        }
        let m2 = *offsets.last().unwrap();
        let mut targets = vec![0; m2];
        let mut weights = vec![0.0; m2];
        let mut times = vec![0; m2];
        let mut cursor: Vec<usize> = offsets[..n].to_vec();
        // Sorted by (user, item): user rows fill in item order and item rows
        // fill in user order, so both sides end up sorted by neighbor index.
        for it in &sorted {
            let u = user_ix[&it.user];
            let i = item_ix[&it.item];
            for (a, b) in [(u, i), (i, u)] {
                let slot = cursor[a as usize];
                targets[slot] = b;
                weights[slot] = it.rating;
                times[slot] = it.timestamp;
                cursor[a as usize] += 1;
            }
        }
        let strength = (0..n)
            .map(|x| weights[offsets[x]..offsets[x + 1]].iter().sum())
            .collect();

        Ok(BipartiteGraph {
            users,
            items,
            user_ix,
            item_ix,
            offsets,
            targets,
            weights,
            times,
            strength,
        })
    }

    pub fn n_users(&self) -> usize {
        self.users.len()
    }

    pub fn n_items(&self) -> usize {
        self.items.len()
    }

    pub fn n_edges(&self) -> usize {
        self.targets.len() / 2
    }

    pub fn users(&self) -> &[UserId] {
        &self.users
    }

    pub fn items(&self) -> &[ItemId] {
        &self.items
    }

    pub fn contains(&self, node: Node) -> bool {
        self.ix(node).is_ok()
    }

    pub fn degree(&self, node: Node) -> Result<usize> {
        Ok(self.deg(self.ix(node)?))
    }

    /// Direct neighbors in id order.
    pub fn neighbors(&self, node: Node) -> Result<Vec<Node>> {
        let x = self.ix(node)?;
        Ok(self.adj(x).iter().map(|&y| self.node(y)).collect())
    }

    pub fn rating(&self, user: UserId, item: ItemId) -> Option<f64> {
        let u = *self.user_ix.get(&user)?;
        let i = *self.item_ix.get(&item)?;
        self.edge_between(u, i).map(|e| self.weights[e])
    }

    /// Every edge as an interaction, ordered by (user, item).
    pub fn interactions(&self) -> impl Iterator<Item = Interaction> + '_ {
        (0..self.users.len() as Ix).flat_map(move |u| {
            self.edges(u).map(move |e| Interaction {
                user: self.users[u as usize],
                item: self.items[(self.targets[e] as usize) - self.users.len()],
                rating: self.weights[e],
                timestamp: self.times[e],
            })
        })
    }

    /// Smallest and largest edge timestamp, `None` on an empty graph.
    pub fn time_range(&self) -> Option<(i64, i64)> {
        let min = self.times.iter().min()?;
        let max = self.times.iter().max()?;
        Some((*min, *max))
    }

    pub fn rating_range(&self) -> Option<(f64, f64)> {
        if self.weights.is_empty() {
            return None;
        }
        let min = self.weights.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = self.weights.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        Some((min, max))
    }

    pub fn max_degree(&self) -> usize {
        (0..self.n_nodes()).map(|x| self.deg(x as Ix)).max().unwrap_or(0)
    }

    /// Nodes at shortest-path distance 1..=k from `x`, sorted.
    pub fn neighbors_within(&self, x: Node, k: usize) -> Result<Vec<Node>> {
        if k < 1 {
            return Err(Error::InvalidArgument("hop bound k must be >= 1".into()));
        }
        let x = self.ix(x)?;
        let mut out: Vec<Node> = self.ball(x, k).into_iter().map(|y| self.node(y)).collect();
        out.sort();
        Ok(out)
    }

    /// All simple paths from `u` to `p` of length at most `max_len`, ordered by
    /// length and then by node sequence.
    pub fn enumerate_paths(&self, u: UserId, p: ItemId, max_len: usize) -> Result<Vec<Path>> {
        check_path_len(max_len)?;
        let from = self.ix(Node::User(u))?;
        let to = self.ix(Node::Item(p))?;
        let mut raw: Vec<(Vec<Ix>, Vec<usize>)> = Vec::new();
        self.visit_paths(from, to, max_len, |nodes, edges| {
            raw.push((nodes.to_vec(), edges.to_vec()))
        });
        raw.sort_by(|a, b| a.0.len().cmp(&b.0.len()).then_with(|| a.0.cmp(&b.0)));
        Ok(raw
            .into_iter()
            .map(|(nodes, edges)| Path {
                nodes: nodes.iter().map(|&x| self.node(x)).collect(),
                weights: edges.iter().map(|&e| self.weights[e]).collect(),
                timestamps: edges.iter().map(|&e| self.times[e]).collect(),
            })
            .collect())
    }

    // ---- crate-internal index API ----

    pub(crate) fn n_nodes(&self) -> usize {
        self.offsets.len() - 1
    }

    pub(crate) fn ix(&self, node: Node) -> Result<Ix> {
        let found = match node {
            Node::User(u) => self.user_ix.get(&u),
            Node::Item(i) => self.item_ix.get(&i),
        };
        found.copied().ok_or(Error::UnknownNode(node))
    }

    pub(crate) fn user_index(&self, u: UserId) -> Option<Ix> {
        self.user_ix.get(&u).copied()
    }

    pub(crate) fn item_index(&self, i: ItemId) -> Option<Ix> {
        self.item_ix.get(&i).copied()
    }

    pub(crate) fn node(&self, x: Ix) -> Node {
        let x = x as usize;
        if x < self.users.len() {
            Node::User(self.users[x])
        } else {
            Node::Item(self.items[x - self.users.len()])
        }
    }

    pub(crate) fn is_user_ix(&self, x: Ix) -> bool {
        (x as usize) < self.users.len()
    }

    pub(crate) fn edges(&self, x: Ix) -> Range<usize> {
        self.offsets[x as usize]..self.offsets[x as usize + 1]
    }

    pub(crate) fn adj(&self, x: Ix) -> &[Ix] {
        &self.targets[self.edges(x)]
    }

    pub(crate) fn deg(&self, x: Ix) -> usize {
        self.offsets[x as usize + 1] - self.offsets[x as usize]
    }

    pub(crate) fn target(&self, e: usize) -> Ix {
        self.targets[e]
    }

    pub(crate) fn weight(&self, e: usize) -> f64 {
        self.weights[e]
    }

    pub(crate) fn time(&self, e: usize) -> i64 {
        self.times[e]
    }

    /// Sum of incident edge weights.
    pub(crate) fn strength(&self, x: Ix) -> f64 {
        self.strength[x as usize]
    }

    pub(crate) fn edge_between(&self, a: Ix, b: Ix) -> Option<usize> {
        let r = self.edges(a);
        self.targets[r.clone()]
            .binary_search(&b)
            .ok()
            .map(|k| r.start + k)
    }

    /// Nodes within `k` hops of `x`, excluding `x`, in BFS order.
    pub(crate) fn ball(&self, x: Ix, k: usize) -> Vec<Ix> {
        let mut dist = vec![u32::MAX; self.n_nodes()];
        self.bfs_into(x, k, &mut dist)
    }

    fn bfs_into(&self, x: Ix, k: usize, dist: &mut [u32]) -> Vec<Ix> {
        let mut out = Vec::new();
        let mut queue = VecDeque::new();
        dist[x as usize] = 0;
        queue.push_back(x);
        while let Some(z) = queue.pop_front() {
            let d = dist[z as usize];
            if d as usize == k {
                continue;
            }
            for &y in self.adj(z) {
                if dist[y as usize] == u32::MAX {
                    dist[y as usize] = d + 1;
                    out.push(y);
                    queue.push_back(y);
                }
            }
        }
        out
    }

    /// Calls `f(nodes, edges)` for every simple path from `from` to `to` with 2 to
    /// `max_len` edges. `edges[k]` is the CSR slot of the edge leaving
    /// `nodes[k]`. Branches that cannot reach `to` in the remaining budget are
    /// pruned using BFS distances from `to`.
    pub(crate) fn visit_paths<F>(&self, from: Ix, to: Ix, max_len: usize, mut f: F)
    where
        F: FnMut(&[Ix], &[usize]),
    {
        if from == to || max_len == 0 {
            return;
        }
        let mut dist = vec![u32::MAX; self.n_nodes()];
        self.bfs_into(to, max_len, &mut dist);
        if dist[from as usize] == u32::MAX {
            return;
        }
        let mut walk = Walk::new(self.n_nodes(), from);
        self.dfs_to(&mut walk, to, max_len, &dist, &mut f);
    }

    fn dfs_to<F>(&self, walk: &mut Walk, to: Ix, max_len: usize, dist: &[u32], f: &mut F)
    where
        F: FnMut(&[Ix], &[usize]),
    {
        let z = *walk.nodes.last().unwrap();
        let remaining = max_len - walk.edges.len();
        for e in self.edges(z) {
            let y = self.targets[e];
            if y == to {
                if !walk.edges.is_empty() {
                    walk.push(y, e);
                    f(&walk.nodes, &walk.edges);
                    walk.pop();
                }
            } else if !walk.on_path[y as usize] && (dist[y as usize] as usize) < remaining {
                walk.push(y, e);
                self.dfs_to(walk, to, max_len, dist, f);
                walk.pop();
            }
        }
    }

    /// Calls `f(nodes, edges)` for every simple path starting at `from` with
    /// between 2 and `max_len` edges that ends at a node accepted by
    /// `is_target`. For any single target the paths arrive in the same order
    /// as from `visit_paths`.
    pub(crate) fn visit_paths_from<T, F>(&self, from: Ix, max_len: usize, is_target: T, mut f: F)
    where
        T: Fn(Ix) -> bool,
        F: FnMut(&[Ix], &[usize]),
    {
        let mut walk = Walk::new(self.n_nodes(), from);
        self.dfs_from(&mut walk, max_len, &is_target, &mut f);
    }

    fn dfs_from<T, F>(&self, walk: &mut Walk, max_len: usize, is_target: &T, f: &mut F)
    where
        T: Fn(Ix) -> bool,
        F: FnMut(&[Ix], &[usize]),
    {
        let z = *walk.nodes.last().unwrap();
        let depth = walk.edges.len() + 1;
        for e in self.edges(z) {
            let y = self.targets[e];
            if walk.on_path[y as usize] {
                continue;
            }
            walk.push(y, e);
            if depth >= 2 && is_target(y) {
                f(&walk.nodes, &walk.edges);
            }
            if depth < max_len {
                self.dfs_from(walk, max_len, is_target, f);
            }
            walk.pop();
        }
    }
}

pub(crate) fn check_path_len(max_len: usize) -> Result<()> {
    if max_len < 3 || max_len.is_multiple_of(2) {
        return Err(Error::InvalidArgument(format!(
            "path length bound must be odd and >= 3, got {max_len}"
        )));
    }
    Ok(())
}

struct Walk {
    nodes: Vec<Ix>,
    edges: Vec<usize>,
    on_path: Vec<bool>,
}

impl Walk {
    fn new(n: usize, start: Ix) -> Self {
        let mut on_path = vec![false; n];
        on_path[start as usize] = true;
        Walk {
            nodes: vec![start],
            edges: Vec::new(),
            on_path,
        }
    }

    fn push(&mut self, y: Ix, e: usize) {
        self.nodes.push(y);
        self.edges.push(e);
        self.on_path[y as usize] = true;
    }

    fn pop(&mut self) {
        let y = self.nodes.pop().unwrap();
        self.edges.pop();
        self.on_path[y as usize] = false;
    }
}
