//! ε-spreadedness of a 1D point set.
//!
//! The set is ε-spreaded when no closed interval of length ε holds three
//! points and no two distinct close pairs `(x1, x2)`, `(x3, x4)` exist, where
//! `x2` and `x3` may be the same point but all roles are otherwise distinct.
//! Any two distinct close pairs share at most one point, so the set is
//! ε-spreaded exactly when at most one pair of points lies within ε.

use super::{Verdict, Witness};
use crate::error::{LabError, Result};
use crate::model::Instance;

fn sorted(instance: &Instance) -> Result<Vec<(f64, usize)>> {
    if instance.dim() != 1 {
        return Err(LabError::WrongDimension(instance.dim()));
    }
    let mut xs: Vec<(f64, usize)> = instance.points().iter().map(|p| p.coords()[0]).zip(0..).collect();
    xs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    Ok(xs)
}

pub fn check_eps_spreaded(instance: &Instance, eps: f64) -> Result<Verdict> {
    let xs = sorted(instance)?;
    if !(eps >= 0.0) {
        return Err(LabError::InvalidParameter(format!(
            "eps must be non-negative, got {eps}"
        )));
    }
    if let Some(w) = xs.windows(3).find(|w| w[2].0 - w[0].0 <= eps) {
        return Ok(Verdict::Violated {
            witness: Witness::Interval {
                lo: w[0].0,
                hi: w[0].0 + eps,
                points: w.iter().map(|x| x.1).collect(),
            },
        });
    }
    // no three points within eps, so close pairs are adjacent in sorted order
    let mut pairs = xs
        .windows(2)
        .filter(|w| w[1].0 - w[0].0 <= eps)
        .map(|w| (w[0].1, w[1].1));
    Ok(match (pairs.next(), pairs.next()) {
        (Some(first), Some(second)) => Verdict::Violated {
            witness: Witness::ClosePairs { first, second, eps },
        },
        _ => Verdict::Holds,
    })
}

/// Supremum ε at which the set is ε-spreaded: the second smallest gap
/// between sorted neighbours (the set is spreaded for every smaller ε).
/// `None` when fewer than three points exist.
pub fn max_spreaded_eps(instance: &Instance) -> Result<Option<f64>> {
    let xs = sorted(instance)?;
    let mut gaps: Vec<f64> = xs.windows(2).map(|w| w[1].0 - w[0].0).collect();
    gaps.sort_by(f64::total_cmp);
    Ok(gaps.get(1).copied())
}
