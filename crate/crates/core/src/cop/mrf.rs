//! Local Markov random fields over binary "participates" variables.

use log::warn;

use crate::error::{Error, Result};
use crate::graph::{Interaction, Node};
use crate::temporal::TemporalConfig;

/// Non-negative table over the binary assignments of `variables`. Bit `k` of a
/// table index is the value of `variables[k]`.
#[derive(Clone, Debug, PartialEq)]
pub struct CliquePotential {
    pub variables: Vec<Node>,
    pub table: Vec<f64>,
}

impl CliquePotential {
    pub fn new(variables: Vec<Node>, table: Vec<f64>) -> Result<Self> {
        if table.len() != 1usize << variables.len() {
            return Err(Error::InvalidArgument(format!(
                "potential over {} variables needs {} entries, got {}",
                variables.len(),
                1usize << variables.len(),
                table.len()
            )));
        }
        if table.iter().any(|v| !(v.is_finite() && *v >= 0.0)) || table.iter().all(|v| *v == 0.0) {
            return Err(Error::InvalidArgument(
                "potential entries must be finite, non-negative and not all zero".into(),
            ));
        }
        Ok(CliquePotential { variables, table })
    }

    /// Entry for an assignment given as a 0/1 slice parallel to `variables`.
    pub fn value(&self, assignment: &[bool]) -> f64 {
        let idx = assignment
            .iter()
            .enumerate()
            .fold(0usize, |acc, (k, &on)| acc | ((on as usize) << k));
        self.table[idx]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LocalMRF {
    pub nodes: Vec<Node>,
    pub potentials: Vec<CliquePotential>,
}

impl LocalMRF {
    pub(crate) fn index_of(&self, node: Node) -> Result<usize> {
        self.nodes
            .iter()
            .position(|&n| n == node)
            .ok_or(Error::UnknownNode(node))
    }

    /// Potential scopes as indices into `nodes`.
    pub(crate) fn scopes(&self) -> Result<Vec<Vec<usize>>> {
        self.potentials
            .iter()
            .map(|f| f.variables.iter().map(|&v| self.index_of(v)).collect())
            .collect()
    }

    /// Checks that `u` and `p` are distinct variables of the model.
    pub(crate) fn query_indices(&self, u: Node, p: Node) -> Result<(usize, usize)> {
        if u == p {
            return Err(Error::InvalidArgument("joint query needs two distinct variables".into()));
        }
        Ok((self.index_of(u)?, self.index_of(p)?))
    }
}

/// Exponential down-weighting of older events.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Decay {
    pub beta: f64,
    pub now: i64,
    pub time_unit: f64,
}

impl Decay {
    pub fn from_config(cfg: &TemporalConfig, now: i64) -> Self {
        Decay {
            beta: cfg.beta,
            now,
            time_unit: cfg.time_unit,
        }
    }

    pub fn weight(&self, timestamp: i64) -> f64 {
        self.beta.powf((self.now - timestamp) as f64 / self.time_unit)
    }
}

pub(crate) fn event_weight(decay: Option<&Decay>, timestamp: i64) -> f64 {
    decay.map_or(1.0, |d| d.weight(timestamp))
}

/// Table cell hit by an event `(user, item)` within a scope.
pub(crate) fn cell_of(scope: &[Node], event: &Interaction) -> usize {
    scope.iter().enumerate().fold(0usize, |acc, (k, v)| {
        let on = match v {
            Node::User(u) => *u == event.user,
            Node::Item(i) => *i == event.item,
        };
        acc | ((on as usize) << k)
    })
}

/// Estimates one potential per scope from the event log. Every event that
/// touches at least one scope node adds its weight (1, or the decay weight) to
/// the cell of its projection; `smoothing` is then added to every cell.
/// Scopes lacking a user or an item are skipped.
pub fn build_potentials(
    scopes: &[Vec<Node>],
    events: &[Interaction],
    decay: Option<Decay>,
    smoothing: f64,
) -> Vec<CliquePotential> {
    scopes
        .iter()
        .filter(|scope| {
            let ok = scope.iter().any(|n| n.is_user()) && scope.iter().any(|n| !n.is_user());
            if !ok {
                warn!("skipping clique scope without both a user and an item: {scope:?}");
            }
            ok
        })
        .map(|scope| {
            let mut table = vec![0.0; 1usize << scope.len()];
            for ev in events {
                let cell = cell_of(scope, ev);
                if cell != 0 {
                    table[cell] += event_weight(decay.as_ref(), ev.timestamp);
                }
            }
            table.iter_mut().for_each(|v| *v += smoothing);
            CliquePotential {
                variables: scope.clone(),
                table,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{ItemId, UserId};

    fn u() -> Node {
        Node::User(UserId(1))
    }

    fn i() -> Node {
        Node::Item(ItemId(1))
    }

    #[test]
    fn direct_count() {
        let events = [Interaction::new(1, 1, 4.0, 10)];
        let pots = build_potentials(&[vec![u(), i()]], &events, None, 0.0);
        assert_eq!(pots[0].table, vec![0.0, 0.0, 0.0, 1.0]);
        assert_eq!(pots[0].value(&[true, true]), 1.0);
    }

    #[test]
    fn laplace_smoothing() {
        let events = [Interaction::new(1, 1, 4.0, 10)];
        let pots = build_potentials(&[vec![u(), i()]], &events, None, 1.0);
        assert_eq!(pots[0].table, vec![1.0, 1.0, 1.0, 2.0]);
    }

    #[test]
    fn zero_age_decay_is_identity() {
        let events = [Interaction::new(1, 1, 4.0, 10), Interaction::new(1, 2, 4.0, 10)];
        let decay = Decay { beta: 0.5, now: 10, time_unit: 1.0 };
        let plain = build_potentials(&[vec![u(), i()]], &events, None, 1.0);
        let timed = build_potentials(&[vec![u(), i()]], &events, Some(decay), 1.0);
        assert_eq!(plain, timed);
    }

    #[test]
    fn one_unit_age_halves_counts() {
        let events = [
            Interaction::new(1, 1, 4.0, 9),
            Interaction::new(1, 2, 4.0, 9),
            Interaction::new(2, 1, 4.0, 9),
        ];
        let decay = Decay { beta: 0.5, now: 10, time_unit: 1.0 };
        let pots = build_potentials(&[vec![u(), i()]], &events, Some(decay), 1.0);
        // Bit 0 is u, bit 1 is i: (1,2) -> 1, (2,1) -> 2, (1,1) -> 3, each weighted 0.5.
        assert_eq!(pots[0].table, vec![1.0, 1.5, 1.5, 1.5]);
    }

    #[test]
    fn one_sided_scope_skipped() {
        let pots = build_potentials(&[vec![u()]], &[Interaction::new(1, 1, 1.0, 0)], None, 1.0);
        assert!(pots.is_empty());
    }

    #[test]
    fn potential_validation() {
        assert!(CliquePotential::new(vec![u(), i()], vec![1.0; 3]).is_err());
        assert!(CliquePotential::new(vec![u(), i()], vec![0.0; 4]).is_err());
        assert!(CliquePotential::new(vec![u(), i()], vec![1.0, -1.0, 1.0, 1.0]).is_err());
        assert!(CliquePotential::new(vec![u(), i()], vec![0.0, 0.0, 0.0, 1.0]).is_ok());
    }
}
