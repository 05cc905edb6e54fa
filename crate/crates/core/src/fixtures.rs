//! Small hand-checkable graphs shared by tests, examples and benchmarks.

use crate::cop::{CliquePotential, LocalMRF};
use crate::graph::{build_graph, BipartiteGraph, Interaction, ItemId, Node, UserId};

/// Path graph `u – i – v – p` with unit weights at time 0.
pub const U: u32 = 1;
pub const V: u32 = 2;
pub const I: u32 = 1;
pub const P: u32 = 2;

pub fn path_graph_interactions() -> Vec<Interaction> {
    vec![
        Interaction::new(U, I, 1.0, 0),
        Interaction::new(V, I, 1.0, 0),
        Interaction::new(V, P, 1.0, 0),
    ]
}

pub fn path_graph() -> BipartiteGraph {
    build_graph(&path_graph_interactions()).unwrap()
}

/// Ids for the BCNS toy graph: user `u` reaches item `p` through items
/// `p1`, `p2` and users `u2`, `u3`.
pub mod bcns_toy {
    use super::*;

    pub const U: u32 = 1;
    pub const U2: u32 = 2;
    pub const U3: u32 = 3;
    pub const P1: u32 = 1;
    pub const P2: u32 = 2;
    pub const P: u32 = 3;

    pub fn user(id: u32) -> Node {
        Node::User(UserId(id))
    }

    pub fn item(id: u32) -> Node {
        Node::Item(ItemId(id))
    }

    pub fn interactions() -> Vec<Interaction> {
        [(U, P1), (U, P2), (U2, P1), (U2, P2), (U2, P), (U3, P2), (U3, P)]
            .iter()
            .map(|&(u, i)| Interaction::new(u, i, 1.0, 0))
            .collect()
    }
}

pub fn bcns_toy() -> BipartiteGraph {
    build_graph(&bcns_toy::interactions()).unwrap()
}

/// Five users, five items: `u1, u2` rate `{i1, i2}`, `u3` rates
/// `{i2, i3, i4, i5}`, `u4, u5` rate `{i3, i4, i5}`.
pub fn two_blocks_interactions() -> Vec<Interaction> {
    let baskets: [(u32, &[u32]); 5] = [
        (1, &[1, 2]),
        (2, &[1, 2]),
        (3, &[2, 3, 4, 5]),
        (4, &[3, 4, 5]),
        (5, &[3, 4, 5]),
    ];
    baskets
        .iter()
        .flat_map(|(u, items)| items.iter().map(move |&i| Interaction::new(*u, i, 1.0, 0)))
        .collect()
}

pub fn two_blocks() -> BipartiteGraph {
    build_graph(&two_blocks_interactions()).unwrap()
}

/// Seeded random MRF over `n_vars` binary variables: one potential per
/// variable plus random scopes of two to four variables, entries in
/// `[0.05, 1)`. Returns the model and two distinct query variables.
pub fn random_mrf(seed: u64, n_vars: usize) -> (LocalMRF, Node, Node) {
    use rand::seq::index::sample;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    assert!(n_vars >= 2);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let node = |k: usize| {
        if k.is_multiple_of(2) {
            Node::User(UserId(k as u32))
        } else {
            Node::Item(ItemId(k as u32))
        }
    };
    let nodes: Vec<Node> = (0..n_vars).map(node).collect();
    let mut scopes: Vec<Vec<usize>> = (0..n_vars).map(|k| vec![k]).collect();
    for _ in 0..rng.gen_range(n_vars / 2..=n_vars + 2) {
        let size = rng.gen_range(2..=4.min(n_vars));
        scopes.push(sample(&mut rng, n_vars, size).into_vec());
    }
    let potentials = scopes
        .into_iter()
        .map(|scope| {
            let table = (0..1usize << scope.len()).map(|_| rng.gen_range(0.05..1.0)).collect();
            CliquePotential::new(scope.into_iter().map(|k| nodes[k]).collect(), table).unwrap()
        })
        .collect();
    let q = sample(&mut rng, n_vars, 2);
    (LocalMRF { nodes: nodes.clone(), potentials }, nodes[q.index(0)], nodes[q.index(1)])
}
