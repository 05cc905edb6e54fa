use std::collections::BTreeSet;

use proptest::prelude::*;

use bilink_core::cop::{compute_bcns, extract_bcliques, score_cop, score_tcop, CopConfig, CopModel};
use bilink_core::eval::{auroc, rankscore_list};
use bilink_core::topo::{score_aa, score_cn, score_jc, score_katz, score_pa, score_propflow, score_rpr};
use bilink_core::{
    build_graph, score_link_score, score_tflow, score_time_score, BipartiteGraph, Interaction, ItemId, Node,
    ScorerConfig, TemporalConfig, UserId,
};

const Y: i64 = 86400 * 365;

/// Edge lists over at most 6 users and 6 items, so at most 12 nodes.
fn small_log() -> impl Strategy<Value = Vec<Interaction>> {
    prop::collection::btree_set((1u32..=6, 1u32..=6), 1..18).prop_flat_map(|pairs| {
        let n = pairs.len();
        (
            Just(pairs),
            prop::collection::vec(1u8..=5, n),
            prop::collection::vec(0i64..40 * Y, n),
        )
            .prop_map(|(pairs, ratings, times)| {
                pairs
                    .into_iter()
                    .zip(ratings)
                    .zip(times)
                    .map(|(((u, i), r), t)| Interaction::new(u, i, r as f64, t))
                    .collect()
            })
    })
}

fn users(g: &BipartiteGraph) -> Vec<UserId> {
    g.users().to_vec()
}

fn items(g: &BipartiteGraph) -> Vec<ItemId> {
    g.items().to_vec()
}

/// All simple paths of odd length 3..=max_len between `u` and `p`, found by
/// extending every node sequence one neighbor at a time.
fn brute_paths(g: &BipartiteGraph, u: Node, p: Node, max_len: usize) -> BTreeSet<Vec<Node>> {
    let mut out = BTreeSet::new();
    let mut frontier = vec![vec![u]];
    while let Some(seq) = frontier.pop() {
        let last = *seq.last().unwrap();
        let len = seq.len() - 1;
        if last == p {
            if len >= 3 && len % 2 == 1 {
                out.insert(seq);
            }
            continue;
        }
        if len == max_len {
            continue;
        }
        for y in g.neighbors(last).unwrap() {
            if !seq.contains(&y) {
                let mut next = seq.clone();
                next.push(y);
                frontier.push(next);
            }
        }
    }
    out
}

fn transpose(log: &[Interaction]) -> Vec<Interaction> {
    log.iter()
        .map(|e| Interaction::new(e.item.0, e.user.0, e.rating, e.timestamp))
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn paths_match_brute_force(log in small_log(), max_len in prop::sample::select(vec![3usize, 5, 7, 9])) {
        let g = build_graph(&log).unwrap();
        for u in users(&g) {
            for p in items(&g) {
                let got: Vec<Vec<Node>> = g
                    .enumerate_paths(u, p, max_len)
                    .unwrap()
                    .into_iter()
                    .map(|path| {
                        prop_assert_eq!(path.weights.len(), path.nodes.len() - 1);
                        for w in path.nodes.windows(2) {
                            prop_assert_ne!(w[0].is_user(), w[1].is_user());
                        }
                        Ok(path.nodes)
                    })
                    .collect::<Result<_, _>>()?;
                let set: BTreeSet<Vec<Node>> = got.iter().cloned().collect();
                prop_assert_eq!(set.len(), got.len(), "duplicate paths");
                prop_assert_eq!(set, brute_paths(&g, Node::User(u), Node::Item(p), max_len));
            }
        }
    }

    #[test]
    fn neighborhoods_grow_with_radius(log in small_log()) {
        let g = build_graph(&log).unwrap();
        let nodes = users(&g).into_iter().map(Node::User).chain(items(&g).into_iter().map(Node::Item));
        for x in nodes {
            for k in 1..5 {
                let a: BTreeSet<Node> = g.neighbors_within(x, k).unwrap().into_iter().collect();
                let b: BTreeSet<Node> = g.neighbors_within(x, k + 1).unwrap().into_iter().collect();
                prop_assert!(a.is_subset(&b));
                prop_assert!(!b.contains(&x));
            }
        }
    }

    #[test]
    fn build_ignores_order(log in small_log().prop_flat_map(|l| Just(l).prop_shuffle().prop_map(|s| s))) {
        let mut sorted = log.clone();
        sorted.sort_by_key(|e| (e.user, e.item));
        prop_assert_eq!(build_graph(&log).unwrap(), build_graph(&sorted).unwrap());
    }

    #[test]
    fn topological_scores_are_side_symmetric(log in small_log()) {
        let g = build_graph(&log).unwrap();
        let t = build_graph(&transpose(&log)).unwrap();
        let cfg = ScorerConfig::default();
        for u in users(&g) {
            for p in items(&g) {
                let (tu, tp) = (UserId(p.0), ItemId(u.0));
                let pairs = [
                    (score_cn(&g, u, p).unwrap(), score_cn(&t, tu, tp).unwrap()),
                    (score_jc(&g, u, p).unwrap(), score_jc(&t, tu, tp).unwrap()),
                    (score_aa(&g, u, p).unwrap(), score_aa(&t, tu, tp).unwrap()),
                    (score_pa(&g, u, p).unwrap(), score_pa(&t, tu, tp).unwrap()),
                    (score_katz(&g, u, p, &cfg).unwrap(), score_katz(&t, tu, tp, &cfg).unwrap()),
                ];
                for (a, b) in pairs {
                    prop_assert!(a >= 0.0 && a.is_finite());
                    prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0), "{} vs {}", a, b);
                }
                let r = score_rpr(&g, u, p, &cfg).unwrap();
                let rt = score_rpr(&t, tu, tp, &cfg).unwrap();
                prop_assert!(r >= 0.0 && r.is_finite());
                prop_assert!((r - rt).abs() < 1e-8, "rpr {} vs {}", r, rt);
            }
        }
    }

    #[test]
    fn far_edges_do_not_change_local_scores(log in small_log()) {
        let g = build_graph(&log).unwrap();
        let mut wider = log.clone();
        wider.push(Interaction::new(100, 100, 3.0, 0));
        wider.push(Interaction::new(101, 100, 2.0, 0));
        let h = build_graph(&wider).unwrap();
        let cfg = ScorerConfig::default();
        for u in users(&g) {
            for p in items(&g) {
                prop_assert_eq!(score_cn(&g, u, p).unwrap(), score_cn(&h, u, p).unwrap());
                prop_assert_eq!(score_katz(&g, u, p, &cfg).unwrap(), score_katz(&h, u, p, &cfg).unwrap());
                prop_assert_eq!(score_propflow(&g, u, p, &cfg).unwrap(), score_propflow(&h, u, p, &cfg).unwrap());
            }
        }
    }

    #[test]
    fn katz_counts_brute_force_paths(log in small_log()) {
        let g = build_graph(&log).unwrap();
        let cfg = ScorerConfig::default();
        for u in users(&g) {
            for p in items(&g) {
                let want: f64 = brute_paths(&g, Node::User(u), Node::Item(p), cfg.katz_max_len)
                    .iter()
                    .map(|path| cfg.katz_beta.powi(path.len() as i32 - 1))
                    .sum();
                let got = score_katz(&g, u, p, &cfg).unwrap();
                prop_assert!((got - want).abs() <= 1e-12 * want.max(1e-300), "{} vs {}", got, want);
            }
        }
    }

    #[test]
    fn temporal_scores_decay_and_translate(log in small_log(), shift in 0..10 * Y) {
        let g = build_graph(&log).unwrap();
        let moved: Vec<Interaction> = log
            .iter()
            .map(|e| Interaction::new(e.user.0, e.item.0, e.rating, e.timestamp + shift))
            .collect();
        let h = build_graph(&moved).unwrap();
        let latest = g.time_range().unwrap().1;
        let cfg = TemporalConfig { now: Some(latest), ..TemporalConfig::default() };
        let later = TemporalConfig { now: Some(latest + 3 * Y), ..cfg };
        let shifted = TemporalConfig { now: Some(latest + shift), ..cfg };
        for u in users(&g) {
            for p in items(&g) {
                let ts = score_time_score(&g, u, p, &cfg).unwrap();
                let ls = score_link_score(&g, u, p, &cfg).unwrap();
                let tf = score_tflow(&g, u, p, &cfg).unwrap();
                for s in [ts, ls, tf] {
                    prop_assert!(s >= 0.0 && s.is_finite());
                }
                prop_assert!(score_time_score(&g, u, p, &later).unwrap() <= ts);
                prop_assert!(score_link_score(&g, u, p, &later).unwrap() <= ls);
                prop_assert_eq!(score_time_score(&h, u, p, &shifted).unwrap(), ts);
                prop_assert_eq!(score_link_score(&h, u, p, &shifted).unwrap(), ls);
                prop_assert_eq!(score_tflow(&h, u, p, &shifted).unwrap(), tf);
            }
        }
    }

    #[test]
    fn tflow_is_propflow_without_decay(log in small_log(), alpha in prop::sample::select(vec![1e-300, 0.3])) {
        // Uniform timestamps for any alpha; any timestamps as alpha vanishes.
        let uniform = alpha > 1e-10;
        let log: Vec<Interaction> = log
            .iter()
            .map(|e| Interaction::new(e.user.0, e.item.0, 1.0, if uniform { 7 * Y } else { e.timestamp }))
            .collect();
        let g = build_graph(&log).unwrap();
        let tcfg = TemporalConfig { alpha, ..TemporalConfig::default() };
        let scfg = ScorerConfig { propflow_max_len: tcfg.max_len, ..ScorerConfig::default() };
        for u in users(&g) {
            for p in items(&g) {
                prop_assert_eq!(score_tflow(&g, u, p, &tcfg).unwrap(), score_propflow(&g, u, p, &scfg).unwrap());
            }
        }
    }

    #[test]
    fn bcliques_are_complete(log in small_log()) {
        let g = build_graph(&log).unwrap();
        let edges: BTreeSet<(u32, u32)> = log.iter().map(|e| (e.user.0, e.item.0)).collect();
        for c in extract_bcliques(&g) {
            prop_assert!(!c.users.is_empty() && !c.items.is_empty());
            for u in &c.users {
                for i in &c.items {
                    prop_assert!(edges.contains(&(u.0, i.0)));
                }
            }
        }
    }

    #[test]
    fn bcns_holds_endpoints(log in small_log(), max_size in 2usize..8) {
        let g = build_graph(&log).unwrap();
        for u in users(&g) {
            for p in items(&g) {
                let paths = brute_paths(&g, Node::User(u), Node::Item(p), 5);
                match compute_bcns(&g, u, p, 5, max_size) {
                    Ok(set) => {
                        prop_assert!(set.contains(&Node::User(u)) && set.contains(&Node::Item(p)));
                        let all: BTreeSet<Node> = paths.iter().flatten().copied().collect();
                        prop_assert!(set.len() >= max_size || set.len() == all.len());
                        prop_assert!(set.iter().all(|x| all.contains(x)));
                    }
                    Err(_) => prop_assert!(paths.is_empty()),
                }
            }
        }
    }

    #[test]
    fn tcop_without_time_spread_is_cop(log in small_log()) {
        let log: Vec<Interaction> = log.iter().map(|e| Interaction::new(e.user.0, e.item.0, e.rating, 5 * Y)).collect();
        let g = build_graph(&log).unwrap();
        let model = CopModel::new(&g);
        let cfg = CopConfig { max_len: 5, ..CopConfig::default() };
        let tcfg = TemporalConfig::default();
        for u in users(&g) {
            for p in items(&g) {
                let a = score_cop(&g, &model, u, p, &cfg);
                let b = score_tcop(&g, &model, u, p, &cfg, &tcfg);
                match (a, b) {
                    (Ok(a), Ok(b)) => {
                        prop_assert_eq!(a.to_bits(), b.to_bits());
                        prop_assert!((0.0..=1.0).contains(&a));
                    }
                    (a, b) => prop_assert!(a.is_err() && b.is_err()),
                }
            }
        }
    }

    #[test]
    fn auroc_ignores_monotone_transforms(scores in prop::collection::vec(-5.0f64..5.0, 2..200), seed in any::<u64>()) {
        let labels: Vec<bool> = scores.iter().enumerate().map(|(k, _)| (seed >> (k % 64)) & 1 == 1).collect();
        prop_assume!(labels.iter().any(|&l| l) && labels.iter().any(|&l| !l));
        let a = auroc(&scores, &labels).unwrap();
        let moved: Vec<f64> = scores.iter().map(|s| (s * 0.5).exp() * 3.0 + 1.0).collect();
        prop_assert_eq!(a, auroc(&moved, &labels).unwrap());
        let flipped: Vec<bool> = labels.iter().map(|l| !l).collect();
        prop_assert!((auroc(&scores, &flipped).unwrap() - (1.0 - a)).abs() < 1e-12);
    }

    #[test]
    fn rankscore_bounded_and_tail_insensitive(ranked in prop::collection::vec(any::<bool>(), 1..60), tail in 1usize..10) {
        prop_assume!(ranked.iter().any(|&r| r));
        let r = rankscore_list(&ranked, 5.0).unwrap();
        prop_assert!((0.0..=1.0).contains(&r));
        let last = ranked.iter().rposition(|&x| x).unwrap();
        let mut longer = ranked[..=last].to_vec();
        longer.extend(std::iter::repeat_n(false, tail));
        longer.extend_from_slice(&ranked[last + 1..]);
        prop_assert_eq!(rankscore_list(&longer, 5.0).unwrap(), r);
    }
}
