//! Central neighborhood set of a user–item pair.
//!
//! Paths are ranked by length, then by frequency score (sum over interior
//! nodes of how many enumerated paths contain that node), then by node
//! sequence. Whole paths are added in rank order until the set holds at least
//! `max_size` nodes; the path that crosses the threshold is added in full.

use crate::error::{Error, Result};
use crate::graph::{BipartiteGraph, Ix, ItemId, Node, UserId};
use crate::topo::pair_ix;

pub fn compute_bcns(
    g: &BipartiteGraph,
    u: UserId,
    p: ItemId,
    max_len: usize,
    max_size: usize,
) -> Result<Vec<Node>> {
    check_args(max_len, max_size)?;
    let (ui, pi) = pair_ix(g, u, p)?;
    let mut paths = PathStore::default();
    g.visit_paths(ui, pi, max_len, |nodes, _| paths.push(nodes));
    let set = bcns_from_paths(&paths, max_size).ok_or(Error::Disjoint { user: u, item: p })?;
    Ok(set.into_iter().map(|x| g.node(x)).collect())
}

pub(crate) fn check_args(max_len: usize, max_size: usize) -> Result<()> {
    if max_len < 3 {
        return Err(Error::InvalidArgument(format!(
            "BCNS path length must be >= 3, got {max_len}"
        )));
    }
    if max_size < 2 {
        return Err(Error::InvalidArgument(format!(
            "BCNS size must be >= 2, got {max_size}"
        )));
    }
    Ok(())
}

/// Paths packed end to end in one buffer.
#[derive(Clone, Debug, Default)]
pub(crate) struct PathStore {
    nodes: Vec<Ix>,
    ends: Vec<u32>,
}

impl PathStore {
    pub(crate) fn push(&mut self, path: &[Ix]) {
        self.nodes.extend_from_slice(path);
        self.ends.push(self.nodes.len() as u32);
    }

    pub(crate) fn len(&self) -> usize {
        self.ends.len()
    }

    pub(crate) fn is_empty(&self) -> bool {
        self.ends.is_empty()
    }

    pub(crate) fn get(&self, i: usize) -> &[Ix] {
        let start = if i == 0 { 0 } else { self.ends[i - 1] as usize };
        &self.nodes[start..self.ends[i] as usize]
    }

    pub(crate) fn iter(&self) -> impl Iterator<Item = &[Ix]> + '_ {
        (0..self.len()).map(|i| self.get(i))
    }
}

/// Frequency score of every path: interior nodes only.
pub(crate) fn frequency_scores(paths: &PathStore) -> Vec<u64> {
    let top = paths.nodes.iter().max().map_or(0, |&x| x as usize + 1);
    let mut occurrences = vec![0u64; top];
    for path in paths.iter() {
        for &z in interior(path) {
            occurrences[z as usize] += 1;
        }
    }
    paths
        .iter()
        .map(|path| interior(path).iter().map(|&z| occurrences[z as usize]).sum())
        .collect()
}

fn interior(path: &[Ix]) -> &[Ix] {
    &path[1..path.len() - 1]
}

/// Returns `None` when there are no paths. All paths must share endpoints.
pub(crate) fn bcns_from_paths(paths: &PathStore, max_size: usize) -> Option<Vec<Ix>> {
    if paths.is_empty() {
        return None;
    }
    let scores = frequency_scores(paths);
    let rank = |&a: &u32, &b: &u32| {
        let (pa, pb) = (paths.get(a as usize), paths.get(b as usize));
        pa.len()
            .cmp(&pb.len())
            .then_with(|| scores[b as usize].cmp(&scores[a as usize]))
            .then_with(|| pa.cmp(pb))
    };
    let mut order: Vec<u32> = (0..paths.len() as u32).collect();
    let mut set: Vec<Ix> = Vec::new();
    // Rank only a prefix first; the set usually fills within a few paths.
    let mut done = 0;
    let mut k = (4 * max_size).min(order.len());
    loop {
        let rest = &mut order[done..];
        if k - done < rest.len() {
            rest.select_nth_unstable_by(k - done, rank);
        }
        order[done..k].sort_unstable_by(rank);
        for &i in &order[done..k] {
            if set.len() >= max_size {
                return Some(set);
            }
            for &z in paths.get(i as usize) {
                if !set.contains(&z) {
                    set.push(z);
                }
            }
        }
        if k == order.len() {
            return Some(set);
        }
        done = k;
        k = order.len();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{self, bcns_toy};
    use crate::graph::{build_graph, Interaction};
    use std::collections::BTreeSet;

    fn as_set(nodes: &[Node]) -> BTreeSet<Node> {
        nodes.iter().copied().collect()
    }

    #[test]
    fn bcns_toy_max_size_five() {
        use bcns_toy::*;
        let got = compute_bcns(&fixtures::bcns_toy(), UserId(U), ItemId(P), 10, 5).unwrap();
        let want = [user(U), item(P2), user(U2), item(P1), item(P)];
        assert_eq!(got.len(), 5);
        assert_eq!(as_set(&got), as_set(&want));
        assert_eq!(got[0], user(U));
    }

    #[test]
    fn bcns_toy_ranking() {
        use bcns_toy::*;
        let g = fixtures::bcns_toy();
        let (u, p) = (g.ix(user(U)).unwrap(), g.ix(item(P)).unwrap());
        let mut paths = Vec::new();
        g.visit_paths(u, p, 5, |nodes, _| paths.push(nodes.to_vec()));
        paths.sort();
        let mut store = PathStore::default();
        paths.iter().for_each(|p| store.push(p));
        let scores = frequency_scores(&store);
        let named: Vec<(Vec<Node>, u64)> = paths
            .iter()
            .map(|path| path.iter().map(|&x| g.node(x)).collect())
            .zip(scores)
            .collect();
        // Occurrences over the four paths: p2 = 3, u2 = 3, p1 = 2, u3 = 2.
        assert!(named.contains(&(vec![user(U), item(P2), user(U2), item(P)], 6)));
        assert!(named.contains(&(vec![user(U), item(P1), user(U2), item(P)], 5)));
        assert!(named.contains(&(vec![user(U), item(P2), user(U3), item(P)], 5)));
        assert!(named.contains(&(
            vec![user(U), item(P1), user(U2), item(P2), user(U3), item(P)],
            10
        )));
    }

    #[test]
    fn path_graph_single_path() {
        let got = compute_bcns(
            &fixtures::path_graph(),
            UserId(fixtures::U),
            ItemId(fixtures::P),
            10,
            5,
        )
        .unwrap();
        let want = [
            Node::User(UserId(fixtures::U)),
            Node::Item(ItemId(fixtures::I)),
            Node::User(UserId(fixtures::V)),
            Node::Item(ItemId(fixtures::P)),
        ];
        assert_eq!(got, want);
    }

    #[test]
    fn disjoint_pair() {
        let g = build_graph(&[Interaction::new(1, 1, 1.0, 0), Interaction::new(2, 2, 1.0, 0)]).unwrap();
        assert!(matches!(
            compute_bcns(&g, UserId(1), ItemId(2), 10, 5),
            Err(Error::Disjoint { .. })
        ));
    }

    #[test]
    fn argument_checks() {
        let g = fixtures::bcns_toy();
        assert!(compute_bcns(&g, UserId(1), ItemId(3), 2, 5).is_err());
        assert!(compute_bcns(&g, UserId(1), ItemId(3), 5, 1).is_err());
    }

    #[test]
    fn small_max_size_takes_one_full_path() {
        use bcns_toy::*;
        let got = compute_bcns(&fixtures::bcns_toy(), UserId(U), ItemId(P), 5, 2).unwrap();
        assert_eq!(got, vec![user(U), item(P2), user(U2), item(P)]);
    }
}
