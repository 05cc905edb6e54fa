//! Exhaustive enumeration over all assignments, for checking inference.

use crate::error::{Error, Result};
use crate::graph::Node;

use super::mrf::LocalMRF;

pub const BRUTE_FORCE_LIMIT: usize = 20;

/// `P(U = 1, P = 1)` by summing the unnormalized product over all `2^n`
/// assignments.
pub fn brute_force_joint(mrf: &LocalMRF, u: Node, p: Node) -> Result<f64> {
    let n = mrf.nodes.len();
    if n > BRUTE_FORCE_LIMIT {
        return Err(Error::TooLarge { size: n, limit: BRUTE_FORCE_LIMIT });
    }
    let (iu, ip) = mrf.query_indices(u, p)?;
    let scopes = mrf.scopes()?;
    let mut z = 0.0;
    let mut hit = 0.0;
    for x in 0usize..1 << n {
        let mut w = 1.0;
        for (scope, pot) in scopes.iter().zip(&mrf.potentials) {
            let idx = scope
                .iter()
                .enumerate()
                .fold(0usize, |acc, (k, &v)| acc | (((x >> v) & 1) << k));
            w *= pot.table[idx];
        }
        z += w;
        if (x >> iu) & 1 == 1 && (x >> ip) & 1 == 1 {
            hit += w;
        }
    }
    if z <= 0.0 {
        return Err(Error::InvalidArgument(
            "potentials admit no assignment with positive weight".into(),
        ));
    }
    Ok(hit / z)
}
