//! δ-sparseness over key-values `(s/t) * cm(S)`.
//!
//! Exponential by nature; meant for tiny instances. Two sums of key-values
//! count as identical when their per-point coefficients agree as exact
//! rationals.

use itertools::Itertools;
use num_rational::Ratio;
use serde::Serialize;

use super::{Verdict, Witness};
use crate::error::{LabError, Result};
use crate::exec::Exec;
use crate::model::Instance;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct KeyValue {
    pub s: u64,
    pub t: u64,
    pub subset: Vec<usize>,
}

impl KeyValue {
    pub fn value(&self, instance: &Instance) -> Vec<f64> {
        let d = instance.dim();
        let mut acc = vec![0.0; d];
        for &i in &self.subset {
            for (a, c) in acc.iter_mut().zip(instance.point(i).coords()) {
                *a += c;
            }
        }
        let scale = self.s as f64 / (self.t as f64 * self.subset.len() as f64);
        acc.iter().map(|a| a * scale).collect()
    }

    fn coefficient(&self) -> Ratio<i64> {
        Ratio::new(self.s as i64, (self.t * self.subset.len() as u64) as i64)
    }
}

/// Combined per-point coefficients of `a + b`, zero entries removed.
pub(crate) fn sum_coefficients(a: &KeyValue, b: &KeyValue, n: usize) -> Vec<(usize, Ratio<i64>)> {
    let mut coeffs = vec![Ratio::from_integer(0); n];
    for kv in [a, b] {
        let c = kv.coefficient();
        for &i in &kv.subset {
            coeffs[i] += c;
        }
    }
    coeffs
        .into_iter()
        .enumerate()
        .filter(|(_, c)| *c != Ratio::from_integer(0))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SparseCaps {
    pub s_cap: u64,
    pub t_cap: u64,
    pub size_cap: usize,
    /// Largest number of key-value pair sums compared.
    pub budget: u64,
}

impl SparseCaps {
    pub fn new(s_cap: u64, t_cap: u64, size_cap: usize) -> Self {
        Self {
            s_cap,
            t_cap,
            size_cap,
            budget: 4_000_000,
        }
    }
}

fn key_values(n: usize, caps: &SparseCaps) -> Vec<KeyValue> {
    let mut ratios = Vec::new();
    for t in 1..=caps.t_cap {
        for s in 1..=caps.s_cap {
            if gcd(s, t) == 1 {
                ratios.push((s, t));
            }
        }
    }
    let mut out = Vec::new();
    for size in 1..=caps.size_cap.min(n) {
        for subset in (0..n).combinations(size) {
            for &(s, t) in &ratios {
                out.push(KeyValue {
                    s,
                    t,
                    subset: subset.clone(),
                });
            }
        }
    }
    out
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

pub fn check_delta_sparse(instance: &Instance, delta: f64, caps: SparseCaps, exec: Exec) -> Result<Verdict> {
    let n = instance.n();
    if !(delta >= 0.0) {
        return Err(LabError::InvalidParameter(format!(
            "delta must be non-negative, got {delta}"
        )));
    }
    if caps.s_cap == 0 || caps.t_cap == 0 || caps.size_cap == 0 {
        return Err(LabError::InvalidParameter("caps must be at least 1".into()));
    }
    if n < 2 {
        return Ok(Verdict::Holds);
    }
    if caps.s_cap > (n * n) as u64 || caps.t_cap >= n as u64 {
        return Err(LabError::InvalidParameter(format!(
            "caps exceed the key-value ranges s <= n^2 = {}, t < n = {n}",
            n * n
        )));
    }
    let kvs = key_values(n, &caps);
    let pairs = (kvs.len() as u64) * (kvs.len() as u64 + 1) / 2;
    if pairs > caps.budget {
        return Ok(Verdict::Unknown {
            reason: format!("{pairs} key-value sums exceed budget {}", caps.budget),
        });
    }
    let values: Vec<Vec<f64>> = kvs.iter().map(|k| k.value(instance)).collect();
    let mut sums: Vec<(Vec<f64>, usize, usize)> = Vec::with_capacity(pairs as usize);
    for i in 0..kvs.len() {
        for j in i..kvs.len() {
            let v: Vec<f64> = values[i].iter().zip(&values[j]).map(|(a, b)| a + b).collect();
            sums.push((v, i, j));
        }
    }
    sums.sort_by(|a, b| a.0[0].total_cmp(&b.0[0]).then((a.1, a.2).cmp(&(b.1, b.2))));

    let hit = exec.find_first(sums.len(), |a| {
        let (va, i1, j1) = &sums[a];
        for (vb, i2, j2) in &sums[a + 1..] {
            if vb[0] - va[0] > delta {
                break;
            }
            let dist = va.iter().zip(vb).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
            if dist <= delta && sum_coefficients(&kvs[*i1], &kvs[*j1], n) != sum_coefficients(&kvs[*i2], &kvs[*j2], n) {
                return Some((*i1, *j1, *i2, *j2, dist));
            }
        }
        None
    });
    Ok(match hit {
        Some((_, (i1, j1, i2, j2, distance))) => Verdict::Violated {
            witness: Witness::KeyValues {
                key_values: [kvs[i1].clone(), kvs[j1].clone(), kvs[i2].clone(), kvs[j2].clone()],
                distance,
                delta,
            },
        },
        None => Verdict::Holds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicates_break_sparseness() {
        let inst = Instance::from_rows(vec![vec![0.3, 0.7], vec![0.3, 0.7], vec![0.9, 0.1]]).unwrap();
        for delta in [0.0, 1e-9, 0.5] {
            let v = check_delta_sparse(&inst, delta, SparseCaps::new(2, 2, 1), Exec::Parallel).unwrap();
            let w = v.witness().expect("violated");
            assert!(w.revalidate(&inst));
        }
    }

    #[test]
    fn identical_coefficient_sums_are_not_violations() {
        // any instance: K1 + K2 == K2 + K1 must never be flagged, so with
        // delta = 0 on generic points nothing is reported
        let inst = Instance::from_rows(vec![vec![0.11, 0.73], vec![0.52, 0.19], vec![0.87, 0.64]]).unwrap();
        let v = check_delta_sparse(&inst, 0.0, SparseCaps::new(3, 2, 2), Exec::Sequential).unwrap();
        assert_eq!(v, Verdict::Holds);
    }

    #[test]
    fn equal_values_from_equivalent_expressions_are_filtered() {
        let a = KeyValue {
            s: 1,
            t: 1,
            subset: vec![0, 1],
        };
        let b = KeyValue {
            s: 2,
            t: 2,
            subset: vec![0, 1],
        };
        let c = KeyValue {
            s: 1,
            t: 2,
            subset: vec![0],
        };
        let e = KeyValue {
            s: 1,
            t: 2,
            subset: vec![1],
        };
        assert_eq!(sum_coefficients(&a, &b, 2), sum_coefficients(&b, &a, 2));
        assert_ne!(sum_coefficients(&a, &c, 2), sum_coefficients(&a, &e, 2));
        let half_each = sum_coefficients(&c, &e, 2);
        assert_eq!(half_each, vec![(0, Ratio::new(1, 2)), (1, Ratio::new(1, 2))]);
    }

    #[test]
    fn cap_validation_and_budget() {
        let inst = Instance::from_scalars(&[0.1, 0.4, 0.8]).unwrap();
        assert!(check_delta_sparse(&inst, 0.1, SparseCaps::new(10, 1, 1), Exec::Sequential).is_err());
        assert!(check_delta_sparse(&inst, 0.1, SparseCaps::new(1, 3, 1), Exec::Sequential).is_err());
        assert!(check_delta_sparse(&inst, -1.0, SparseCaps::new(1, 1, 1), Exec::Sequential).is_err());
        let tiny = SparseCaps {
            budget: 1,
            ..SparseCaps::new(2, 2, 2)
        };
        assert!(matches!(
            check_delta_sparse(&inst, 0.1, tiny, Exec::Sequential).unwrap(),
            Verdict::Unknown { .. }
        ));
    }
}
