//! Candidate pairs with sampled negatives, and ranking metrics.

use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{ItemId, UserId};
use crate::ingest::Dataset;

pub const DEFAULT_HALFLIFE: f64 = 5.0;
pub const DEFAULT_RATIO: usize = 100;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Candidate {
    pub user: UserId,
    pub item: ItemId,
    pub label: bool,
}

/// Test pairs plus sampled non-edges, sorted by (user, item).
#[derive(Clone, Debug, PartialEq)]
pub struct CandidateSet {
    pub pairs: Vec<Candidate>,
    pub seed: u64,
    pub negatives_per_positive: usize,
}

impl CandidateSet {
    pub fn n_positives(&self) -> usize {
        self.pairs.iter().filter(|c| c.label).count()
    }

    pub fn n_negatives(&self) -> usize {
        self.pairs.len() - self.n_positives()
    }

    pub fn labels(&self) -> Vec<bool> {
        self.pairs.iter().map(|c| c.label).collect()
    }
}

/// Every test pair is a positive; `ratio` negatives per positive are drawn
/// uniformly from users × items seen in either set, rejecting known edges
/// and repeats.
pub fn generate_candidates(train: &Dataset, test: &Dataset, seed: u64, ratio: usize) -> Result<CandidateSet> {
    let all = || train.interactions.iter().chain(&test.interactions);
    let mut users: Vec<UserId> = all().map(|it| it.user).collect();
    let mut items: Vec<ItemId> = all().map(|it| it.item).collect();
    users.sort_unstable();
    users.dedup();
    items.sort_unstable();
    items.dedup();
    let edges: HashSet<(UserId, ItemId)> = all().map(|it| (it.user, it.item)).collect();

    let mut positives: Vec<(UserId, ItemId)> = test.interactions.iter().map(|it| (it.user, it.item)).collect();
    positives.sort_unstable();
    positives.dedup();
    if positives.is_empty() {
        return Err(Error::Empty("test set has no interactions".into()));
    }

    let wanted = positives.len().checked_mul(ratio).ok_or_else(|| Error::Sampling("ratio overflow".into()))?;
    let universe = users.len() as u128 * items.len() as u128;
    let free = universe - edges.len() as u128;
    if wanted as u128 > free {
        return Err(Error::Sampling(format!(
            "{wanted} negatives requested but only {free} non-edges exist among {} users x {} items",
            users.len(),
            items.len()
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut drawn: HashSet<(UserId, ItemId)> = HashSet::with_capacity(wanted);
    let max_draws = wanted.saturating_mul(1000).max(1_000_000);
    let mut draws = 0usize;
    while drawn.len() < wanted {
        if draws == max_draws {
            return Err(Error::Sampling(format!(
                "gave up after {draws} draws with {} of {wanted} negatives",
                drawn.len()
            )));
        }
        draws += 1;
        let pair = (users[rng.gen_range(0..users.len())], items[rng.gen_range(0..items.len())]);
        if !edges.contains(&pair) {
            drawn.insert(pair);
        }
    }

    let mut pairs: Vec<Candidate> = positives
        .into_iter()
        .map(|(user, item)| Candidate { user, item, label: true })
        .chain(drawn.into_iter().map(|(user, item)| Candidate { user, item, label: false }))
        .collect();
    pairs.sort_unstable();
    Ok(CandidateSet {
        pairs,
        seed,
        negatives_per_positive: ratio,
    })
}

fn class_counts(scores: &[f64], labels: &[bool]) -> Result<(u64, u64)> {
    if scores.len() != labels.len() {
        return Err(Error::InvalidArgument(format!(
            "{} scores but {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::InvalidArgument("NaN score".into()));
    }
    let pos = labels.iter().filter(|&&l| l).count() as u64;
    let neg = labels.len() as u64 - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::SingleClass);
    }
    Ok((pos, neg))
}

/// Groups of tied scores in ascending score order, as (positives, negatives).
fn tie_groups(scores: &[f64], labels: &[bool]) -> Vec<(u64, u64)> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut groups: Vec<(u64, u64)> = Vec::new();
    let mut last: Option<f64> = None;
    for k in order {
        if last != Some(scores[k]) {
            groups.push((0, 0));
            last = Some(scores[k]);
        }
        let g = groups.last_mut().unwrap();
        if labels[k] {
            g.0 += 1;
        } else {
            g.1 += 1;
        }
    }
    groups
}

/// Probability that a random positive outscores a random negative, ties
/// counting one half.
pub fn auroc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    let (pos, neg) = class_counts(scores, labels)?;
    // Twice the win count, kept integral.
    let mut twice: u128 = 0;
    let mut neg_below: u128 = 0;
    for (p, n) in tie_groups(scores, labels) {
        twice += 2 * p as u128 * neg_below + p as u128 * n as u128;
        neg_below += n as u128;
    }
    Ok(twice as f64 / (2 * pos as u128 * neg as u128) as f64)
}

/// Area under the precision–recall step curve, sweeping thresholds from the
/// highest score down with each tie group taken as one step.
pub fn aupr(scores: &[f64], labels: &[bool]) -> Result<f64> {
    let (pos, _) = class_counts(scores, labels)?;
    let (mut tp, mut fp) = (0u64, 0u64);
    let mut area = 0.0;
    for (p, n) in tie_groups(scores, labels).into_iter().rev() {
        tp += p;
        fp += n;
        if p > 0 {
            area += (tp as f64 / (tp + fp) as f64) * (p as f64 / pos as f64);
        }
    }
    Ok(area)
}

/// Half-life utility of one ranked list of relevance flags, normalized by the
/// best possible placement. `None` when nothing is relevant.
pub fn rankscore_list(ranked: &[bool], halflife: f64) -> Option<f64> {
    let utility = |rank: usize| 2f64.powf(-(rank as f64) / halflife);
    let got: f64 = ranked.iter().enumerate().filter(|(_, &r)| r).map(|(k, _)| utility(k)).sum();
    let n = ranked.iter().filter(|&&r| r).count();
    if n == 0 {
        return None;
    }
    let best: f64 = (0..n).map(utility).sum();
    Some(got / best)
}

/// Mean half-life utility over lists with at least one relevant entry.
pub fn rankscore(lists: &[Vec<bool>], halflife: f64) -> Result<f64> {
    if !(halflife > 0.0) {
        return Err(Error::InvalidArgument(format!("halflife must be positive, got {halflife}")));
    }
    let per_list: Vec<f64> = lists.iter().filter_map(|l| rankscore_list(l, halflife)).collect();
    if per_list.is_empty() {
        return Err(Error::Empty("no user has a relevant item".into()));
    }
    Ok(per_list.iter().sum::<f64>() / per_list.len() as f64)
}

/// Ranks each user's candidates by descending score, ties by item id.
pub fn rankings_by_user(pairs: &[Candidate], scores: &[f64]) -> Vec<Vec<bool>> {
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    order.sort_by(|&a, &b| {
        pairs[a]
            .user
            .cmp(&pairs[b].user)
            .then(scores[b].total_cmp(&scores[a]))
            .then(pairs[a].item.cmp(&pairs[b].item))
    });
    let mut lists: Vec<Vec<bool>> = Vec::new();
    let mut current: Option<UserId> = None;
    for k in order {
        if current != Some(pairs[k].user) {
            lists.push(Vec::new());
            current = Some(pairs[k].user);
        }
        lists.last_mut().unwrap().push(pairs[k].label);
    }
    lists
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub measure: String,
    pub auroc: f64,
    pub aupr: f64,
    pub rankscore: f64,
    pub n_pairs: usize,
    pub n_undefined: usize,
}

/// Scores every metric; undefined scores rank below every defined one.
pub fn evaluate(measure: &str, pairs: &[Candidate], scores: &[Option<f64>], halflife: f64) -> Result<MetricReport> {
    if pairs.len() != scores.len() {
        return Err(Error::InvalidArgument(format!(
            "{} pairs but {} scores",
            pairs.len(),
            scores.len()
        )));
    }
    let flat: Vec<f64> = scores.iter().map(|s| s.unwrap_or(f64::NEG_INFINITY)).collect();
    let labels: Vec<bool> = pairs.iter().map(|c| c.label).collect();
    Ok(MetricReport {
        measure: measure.to_string(),
        auroc: auroc(&flat, &labels)?,
        aupr: aupr(&flat, &labels)?,
        rankscore: rankscore(&rankings_by_user(pairs, &flat), halflife)?,
        n_pairs: pairs.len(),
        n_undefined: scores.iter().filter(|s| s.is_none()).count(),
    })
}
