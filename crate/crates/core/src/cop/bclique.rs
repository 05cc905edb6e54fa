//! Complete bipartite subgraphs seeded from each item's set of raters.
//!
//! For an item `i` with raters `U_i`, the clique is `U_i` together with every
//! item that all of `U_i` rated. Cliques that are mostly absorbed by a larger
//! clique (more than half of their edges lie inside a single clique with
//! strictly more edges) are dropped.

use std::collections::HashMap;
use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::graph::{BipartiteGraph, Ix, ItemId, UserId};

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BClique {
    pub users: Vec<UserId>,
    pub items: Vec<ItemId>,
}

/// A clique over dense indices, both sides sorted.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub(crate) struct IxClique {
    pub users: Vec<Ix>,
    pub items: Vec<Ix>,
}

impl IxClique {
    fn n_edges(&self) -> usize {
        self.users.len() * self.items.len()
    }

    fn shared_edges(&self, other: &IxClique) -> usize {
        sorted_overlap(&self.users, &other.users) * sorted_overlap(&self.items, &other.items)
    }
}

fn sorted_overlap(a: &[Ix], b: &[Ix]) -> usize {
    let (mut i, mut j, mut n) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                n += 1;
                i += 1;
                j += 1;
            }
        }
    }
    n
}

fn intersect_into(acc: &mut Vec<Ix>, other: &[Ix]) {
    let mut j = 0;
    acc.retain(|x| {
        while j < other.len() && other[j] < *x {
            j += 1;
        }
        j < other.len() && other[j] == *x
    });
}

pub fn extract_bcliques(g: &BipartiteGraph) -> Vec<BClique> {
    extract_ix(g)
        .into_iter()
        .map(|c| BClique {
            users: c.users.iter().map(|&x| user_id(g, x)).collect(),
            items: c.items.iter().map(|&x| item_id(g, x)).collect(),
        })
        .collect()
}

fn user_id(g: &BipartiteGraph, x: Ix) -> UserId {
    g.users()[x as usize]
}

fn item_id(g: &BipartiteGraph, x: Ix) -> ItemId {
    g.items()[x as usize - g.n_users()]
}

pub(crate) fn extract_ix(g: &BipartiteGraph) -> Vec<IxClique> {
    let first_item = g.n_users() as Ix;
    let mut cliques: Vec<IxClique> = (first_item..g.n_nodes() as Ix)
        .map(|i| {
            let raters = g.adj(i).to_vec();
            let mut common = g.adj(raters[0]).to_vec();
            for &v in &raters[1..] {
                intersect_into(&mut common, g.adj(v));
            }
            IxClique {
                users: raters,
                items: common,
            }
        })
        .collect();
    cliques.sort();
    cliques.dedup();
    drop_absorbed(cliques)
}

fn drop_absorbed(cliques: Vec<IxClique>) -> Vec<IxClique> {
    let mut by_item: HashMap<Ix, Vec<usize>> = HashMap::new();
    for (k, c) in cliques.iter().enumerate() {
        for &i in &c.items {
            by_item.entry(i).or_default().push(k);
        }
    }
    let absorbed: Vec<bool> = cliques
        .iter()
        .enumerate()
        .map(|(k, c)| {
            let edges = c.n_edges();
            c.items.iter().any(|i| {
                by_item[i].iter().any(|&o| {
                    let other = &cliques[o];
                    o != k && other.n_edges() > edges && 2 * c.shared_edges(other) > edges
                })
            })
        })
        .collect();
    cliques
        .into_iter()
        .zip(absorbed)
        .filter_map(|(c, gone)| (!gone).then_some(c))
        .collect()
}

/// Writes one clique per line as `users|items`, ids comma separated. Reading
/// skips blank lines and lines starting with `#`.
pub fn write_bcliques<W: Write>(mut out: W, cliques: &[BClique]) -> Result<()> {
    for c in cliques {
        let users: Vec<String> = c.users.iter().map(|u| u.0.to_string()).collect();
        let items: Vec<String> = c.items.iter().map(|i| i.0.to_string()).collect();
        writeln!(out, "{}|{}", users.join(","), items.join(","))?;
    }
    Ok(())
}

pub fn read_bcliques<R: BufRead>(source: R) -> Result<Vec<BClique>> {
    let mut out = Vec::new();
    for (k, line) in source.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |message: String| Error::Parse { line: k + 1, message };
        let (users, items) = line
            .split_once('|')
            .ok_or_else(|| err("expected 'users|items'".into()))?;
        let ids = |s: &str| -> Result<Vec<u32>> {
            s.split(',')
                .map(|t| t.trim().parse::<u32>().map_err(|_| err(format!("bad id '{t}'"))))
                .collect()
        };
        let users: Vec<UserId> = ids(users)?.into_iter().map(UserId).collect();
        let items: Vec<ItemId> = ids(items)?.into_iter().map(ItemId).collect();
        out.push(BClique { users, items });
    }
    Ok(out)
}

/// Maps cached cliques onto a graph's indices, rejecting any clique that is
/// not complete bipartite in that graph.
pub(crate) fn cliques_to_ix(g: &BipartiteGraph, cliques: &[BClique]) -> Result<Vec<IxClique>> {
    cliques
        .iter()
        .map(|c| {
            let mut users = c
                .users
                .iter()
                .map(|&u| g.ix(u.into()))
                .collect::<Result<Vec<_>>>()?;
            let mut items = c
                .items
                .iter()
                .map(|&i| g.ix(i.into()))
                .collect::<Result<Vec<_>>>()?;
            users.sort_unstable();
            items.sort_unstable();
            if users.is_empty() || items.is_empty() {
                return Err(Error::InvalidArgument("clique with an empty side".into()));
            }
            for &u in &users {
                for &i in &items {
                    if g.edge_between(u, i).is_none() {
                        return Err(Error::InvalidArgument(format!(
                            "cached clique is not complete: no edge {} - {}",
                            g.node(u),
                            g.node(i)
                        )));
                    }
                }
            }
            Ok(IxClique { users, items })
        })
        .collect()
}
