//! Checkers for the structural properties used by the drop lemmas, and the
//! lemma constants.
//!
//! A checker returns a [`Verdict`]. `Violated` always carries a [`Witness`]
//! that [`Witness::revalidate`] confirms from the instance alone; `Holds` is
//! only returned when the checker is exact for the input.

pub mod constants;
pub mod geometry;
pub mod separated;
pub mod sparse;
pub mod spreaded;

use serde::Serialize;

use crate::model::Instance;

pub use constants::{
    drop_lower_bounds, eps_separated_drop_applies, lemma_epsilon_log, w_log, DropBound, DropBoundKind, DropContext,
    LemmaConstants,
};
pub use separated::{check_eps_separated, max_separated_eps, SeparationOptions};
pub use sparse::{check_delta_sparse, KeyValue, SparseCaps};
pub use spreaded::{check_eps_spreaded, max_spreaded_eps};

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Verdict {
    Holds,
    Violated { witness: Witness },
    Unknown { reason: String },
}

impl Verdict {
    pub fn holds(&self) -> bool {
        matches!(self, Verdict::Holds)
    }

    pub fn violated(&self) -> bool {
        matches!(self, Verdict::Violated { .. })
    }

    pub fn witness(&self) -> Option<&Witness> {
        match self {
            Verdict::Violated { witness } => Some(witness),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Witness {
    /// Points within `half_width` of the hyperplane `normal . x = offset`.
    Slab {
        normal: Vec<f64>,
        offset: f64,
        half_width: f64,
        points: Vec<usize>,
    },
    /// Points inside the closed interval `[lo, hi]` (1D).
    Interval { lo: f64, hi: f64, points: Vec<usize> },
    /// Two distinct close pairs; they may share one point.
    ClosePairs {
        first: (usize, usize),
        second: (usize, usize),
        eps: f64,
    },
    /// `|K1 + K2 - K3 - K4| <= delta` with different coefficient vectors.
    KeyValues {
        key_values: [KeyValue; 4],
        distance: f64,
        delta: f64,
    },
}

impl Witness {
    /// Recompute the violation from the instance.
    pub fn revalidate(&self, instance: &Instance) -> bool {
        // relative slack for recomputed floating point distances
        let slack = |x: f64| x * (1.0 + 1e-9) + 1e-12;
        match self {
            Witness::Slab {
                normal,
                offset,
                half_width,
                points,
            } => {
                let d = instance.dim();
                let norm: f64 = normal.iter().map(|v| v * v).sum::<f64>().sqrt();
                let mut distinct = points.clone();
                distinct.sort_unstable();
                distinct.dedup();
                normal.len() == d
                    && norm > 0.0
                    && distinct.len() == points.len()
                    && points.len() > 2 * d
                    && points.iter().all(|&i| {
                        let p = instance.point(i).coords();
                        ((geometry::dot(p, normal) - offset) / norm).abs() <= slack(*half_width)
                    })
            }
            Witness::Interval { lo, hi, points } => {
                let mut distinct = points.clone();
                distinct.sort_unstable();
                distinct.dedup();
                distinct.len() >= 3
                    && points.iter().all(|&i| {
                        let x = instance.point(i).coords()[0];
                        x >= *lo && x <= *hi
                    })
            }
            Witness::ClosePairs { first, second, eps } => {
                let x = |i: usize| instance.point(i).coords()[0];
                let close = |(a, b): (usize, usize)| a != b && (x(a) - x(b)).abs() <= *eps;
                let mut a = [first.0.min(first.1), first.0.max(first.1)];
                let mut b = [second.0.min(second.1), second.0.max(second.1)];
                if a > b {
                    std::mem::swap(&mut a, &mut b);
                }
                a != b && close(*first) && close(*second)
            }
            Witness::KeyValues {
                key_values,
                distance,
                delta,
            } => {
                let [k1, k2, k3, k4] = key_values;
                let lhs = sparse::sum_coefficients(k1, k2, instance.n());
                let rhs = sparse::sum_coefficients(k3, k4, instance.n());
                let v = |k: &KeyValue| k.value(instance);
                let (a, b, c, e) = (v(k1), v(k2), v(k3), v(k4));
                let dist: f64 = (0..instance.dim())
                    .map(|j| (a[j] + b[j] - c[j] - e[j]).powi(2))
                    .sum::<f64>()
                    .sqrt();
                lhs != rhs && dist <= slack(*delta) && (dist - distance).abs() <= 1e-9 * (1.0 + dist)
            }
        }
    }
}
