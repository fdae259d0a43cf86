use std::f64::consts::PI;

use itertools::Itertools;
use lloydlab::props::separated::check_plane_by_subsets;
use lloydlab::props::{
    check_delta_sparse, check_eps_separated, check_eps_spreaded, drop_lower_bounds, lemma_epsilon_log,
    max_separated_eps, max_spreaded_eps, DropBoundKind, DropContext, LemmaConstants, SeparationOptions, SparseCaps,
    Verdict,
};
use lloydlab::rng::{seeded, uniform01};
use lloydlab::{Exec, Instance};
use proptest::prelude::*;

fn random_instance(n: usize, d: usize, seed: u64) -> Instance {
    let mut rng = seeded(seed);
    Instance::from_rows((0..n).map(|_| (0..d).map(|_| uniform01(&mut rng)).collect()).collect()).unwrap()
}

fn opts() -> SeparationOptions {
    SeparationOptions::default()
}

/// Smallest width of any 5 points, estimated over a fixed fan of directions.
fn sweep_width(inst: &Instance, directions: usize) -> f64 {
    (0..directions)
        .map(|i| {
            let theta = PI * i as f64 / directions as f64;
            let (c, s) = (theta.cos(), theta.sin());
            let mut proj: Vec<f64> = inst
                .points()
                .iter()
                .map(|p| c * p.coords()[0] + s * p.coords()[1])
                .collect();
            proj.sort_by(f64::total_cmp);
            proj.windows(5).map(|w| w[4] - w[0]).fold(f64::INFINITY, f64::min)
        })
        .fold(f64::INFINITY, f64::min)
}

#[test]
fn separated_matches_direction_sweep() {
    for seed in 0..25 {
        let inst = random_instance(8, 2, seed);
        let exact = max_separated_eps(&inst, Exec::Parallel).unwrap().unwrap();
        let swept = sweep_width(&inst, 3600) / 2.0;
        // the fan can only overestimate, and by at most diameter * angular step
        assert!(swept >= exact * (1.0 - 1e-12), "seed {seed}");
        assert!(
            swept - exact <= 2f64.sqrt() * PI / 3600.0,
            "seed {seed}: {swept} vs {exact}"
        );
        for factor in [0.25, 0.5, 0.9, 1.1, 2.0] {
            let eps = swept * factor;
            if eps > exact && eps < swept {
                continue;
            }
            let want_violated = eps >= swept;
            let v = check_eps_separated(&inst, eps, opts()).unwrap();
            assert_eq!(v.violated(), want_violated, "seed {seed} eps {eps}");
            assert_eq!(check_plane_by_subsets(&inst, eps).violated(), want_violated);
            if let Some(w) = v.witness() {
                assert!(w.revalidate(&inst));
            }
        }
    }
}

#[test]
fn separated_threshold_is_sharp() {
    for seed in 100..120 {
        let inst = random_instance(9, 2, seed);
        let exact = max_separated_eps(&inst, Exec::Sequential).unwrap().unwrap();
        assert!(check_eps_separated(&inst, exact * (1.0 + 1e-9), opts())
            .unwrap()
            .violated());
        assert!(check_eps_separated(&inst, exact * (1.0 - 1e-9), opts())
            .unwrap()
            .holds());
        assert!(check_plane_by_subsets(&inst, exact * (1.0 + 1e-9)).violated());
        assert!(check_plane_by_subsets(&inst, exact * (1.0 - 1e-9)).holds());
    }
}

#[test]
fn separated_examples() {
    let line = Instance::from_rows((0..5).map(|i| vec![i as f64, 0.0]).collect()).unwrap();
    let v = check_eps_separated(&line, 0.1, opts()).unwrap();
    assert!(v.witness().unwrap().revalidate(&line));
    let spaced = Instance::from_scalars(&[0.0, 10.0, 20.0]).unwrap();
    assert_eq!(check_eps_separated(&spaced, 1.0, opts()).unwrap(), Verdict::Holds);
    let high = random_instance(7, 3, 1);
    assert!(matches!(
        check_eps_separated(&high, 1e-6, opts()).unwrap(),
        Verdict::Unknown { .. }
    ));
    let flat = Instance::from_rows((0..7).map(|i| vec![i as f64, (i * i) as f64, 0.0]).collect()).unwrap();
    assert!(check_eps_separated(&flat, 1e-9, opts())
        .unwrap()
        .witness()
        .unwrap()
        .revalidate(&flat));
}

#[test]
fn separated_monotone_in_eps() {
    for seed in 0..10 {
        let inst = random_instance(10, 2, seed);
        let mut seen_violation = false;
        for i in 1..=40 {
            let v = check_eps_separated(&inst, i as f64 * 0.005, opts()).unwrap().violated();
            assert!(v || !seen_violation, "seed {seed}");
            seen_violation |= v;
        }
    }
}

fn spreaded_brute_force(xs: &[f64], eps: f64) -> bool {
    let n = xs.len();
    for (i, j, k) in (0..n).tuple_combinations() {
        let t = [xs[i], xs[j], xs[k]];
        let span =
            t.iter().copied().fold(f64::NEG_INFINITY, f64::max) - t.iter().copied().fold(f64::INFINITY, f64::min);
        if span <= eps {
            return false;
        }
    }
    for x1 in 0..n {
        for x2 in 0..n {
            for x3 in 0..n {
                for x4 in 0..n {
                    let distinct_pairs = x1 != x2 && x3 != x4 && (x1.min(x2), x1.max(x2)) != (x3.min(x4), x3.max(x4));
                    if distinct_pairs && (xs[x1] - xs[x2]).abs() <= eps && (xs[x3] - xs[x4]).abs() <= eps {
                        return false;
                    }
                }
            }
        }
    }
    true
}

#[test]
fn spreaded_matches_quadruple_enumeration() {
    let mut rng = seeded(77);
    for _ in 0..300 {
        let xs: Vec<f64> = (0..6).map(|_| uniform01(&mut rng)).collect();
        let inst = Instance::from_scalars(&xs).unwrap();
        for eps in [0.01, 0.03, 0.08, 0.15, 0.3] {
            let v = check_eps_spreaded(&inst, eps).unwrap();
            assert_eq!(v.holds(), spreaded_brute_force(&xs, eps), "{xs:?} eps {eps}");
            if let Some(w) = v.witness() {
                assert!(w.revalidate(&inst));
            }
        }
        let sup = max_spreaded_eps(&inst).unwrap().unwrap();
        assert!(spreaded_brute_force(&xs, sup * (1.0 - 1e-9)));
        assert!(!spreaded_brute_force(&xs, sup));
    }
}

#[test]
fn spreaded_examples() {
    let inst = Instance::from_scalars(&[0.0, 0.5, 1.0]).unwrap();
    assert!(check_eps_spreaded(&inst, 0.6).unwrap().violated());
    assert_eq!(check_eps_spreaded(&inst, 0.4).unwrap(), Verdict::Holds);
    assert!(check_eps_spreaded(&random_instance(4, 2, 0), 0.1).is_err());
}

/// Key-value sums with coefficients scaled to integers by 60, which every
/// denominator `t |S|` (t <= 3, |S| <= 2) divides.
fn sparse_brute_force(inst: &Instance, delta: f64) -> bool {
    let n = inst.n();
    let mut kvs: Vec<(Vec<i64>, Vec<f64>)> = Vec::new();
    for size in 1..=2 {
        for subset in (0..n).combinations(size) {
            for t in 1..=3i64 {
                for s in 1..=4i64 {
                    if (1..=s.min(t)).rev().find(|g| s % g == 0 && t % g == 0) != Some(1) {
                        continue;
                    }
                    let mut coeff = vec![0i64; n];
                    let mut value = vec![0.0; inst.dim()];
                    for &i in &subset {
                        coeff[i] = 60 * s / (t * size as i64);
                        for (v, c) in value.iter_mut().zip(inst.point(i).coords()) {
                            *v += c * s as f64 / (t as f64 * size as f64);
                        }
                    }
                    kvs.push((coeff, value));
                }
            }
        }
    }
    let mut sums = Vec::new();
    for a in 0..kvs.len() {
        for b in a..kvs.len() {
            let c: Vec<i64> = kvs[a].0.iter().zip(&kvs[b].0).map(|(x, y)| x + y).collect();
            let v: Vec<f64> = kvs[a].1.iter().zip(&kvs[b].1).map(|(x, y)| x + y).collect();
            sums.push((c, v));
        }
    }
    for (i, (ca, va)) in sums.iter().enumerate() {
        for (cb, vb) in &sums[i + 1..] {
            let dist = va.iter().zip(vb).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
            if dist <= delta && ca != cb {
                return false;
            }
        }
    }
    true
}

#[test]
fn sparse_generic_instances_hold() {
    let caps = SparseCaps::new(4, 3, 2);
    for seed in 0..3 {
        let inst = random_instance(5, 2, seed);
        let v = check_delta_sparse(&inst, 1e-12, caps, Exec::Parallel).unwrap();
        assert_eq!(v, Verdict::Holds);
        assert!(sparse_brute_force(&inst, 1e-12));
    }
}

#[test]
fn sparse_detects_arithmetic_coincidences() {
    // p0 + p3 == p1 + p2 on an evenly spaced line
    let inst = Instance::from_rows((0..5).map(|i| vec![0.125 * i as f64, 0.25]).collect()).unwrap();
    let caps = SparseCaps::new(4, 3, 2);
    let v = check_delta_sparse(&inst, 0.0, caps, Exec::Parallel).unwrap();
    assert!(v.witness().unwrap().revalidate(&inst));
    assert!(!sparse_brute_force(&inst, 0.0));
    // a perturbed copy still fails at a coarse delta and passes at a fine one
    let jittered = Instance::from_rows(
        (0..5)
            .map(|i| vec![0.125 * i as f64 + 1e-6 * (i * i) as f64, 0.25 + 3e-7 * i as f64])
            .collect(),
    )
    .unwrap();
    for delta in [1e-9, 1e-4] {
        let exact = sparse_brute_force(&jittered, delta);
        assert_eq!(
            check_delta_sparse(&jittered, delta, caps, Exec::Sequential)
                .unwrap()
                .holds(),
            exact
        );
    }
}

#[test]
fn frozen_constants() {
    let ln_eps = lemma_epsilon_log(10, 2, 2, 1, 0.5, 1.0, 1.0).unwrap();
    assert!((ln_eps - -64.75538172838068).abs() < 1e-10, "{ln_eps}");
    let c = LemmaConstants::compute(10, 2, 2, 1, 0.5, 1.0, Some(1.0)).unwrap();
    assert_eq!(c.eps_log, ln_eps);
    let ctx = DropContext {
        n: Some(2),
        d: Some(2),
        k: Some(2),
        a: Some(1),
        eps: Some(0.1),
        min_center_distance: Some(0.5),
        hypercube: Some(1.0),
        ..Default::default()
    };
    let b = drop_lower_bounds(&ctx, &[DropBoundKind::CloseCenters]).unwrap();
    assert!((b[0].value.unwrap() - 2.170138888888889e-6).abs() < 1e-18);
}

proptest! {
    #[test]
    fn spreaded_monotone(xs in prop::collection::vec(0.0f64..1.0, 3..10), e1 in 0.0f64..0.3, e2 in 0.0f64..0.3) {
        let inst = Instance::from_scalars(&xs).unwrap();
        let (lo, hi) = if e1 <= e2 { (e1, e2) } else { (e2, e1) };
        if check_eps_spreaded(&inst, hi).unwrap().holds() {
            prop_assert!(check_eps_spreaded(&inst, lo).unwrap().holds());
        }
    }

    #[test]
    fn separated_holds_below_supremum(seed in any::<u64>(), n in 5usize..12) {
        let inst = random_instance(n, 2, seed);
        let sup = max_separated_eps(&inst, Exec::Sequential).unwrap().unwrap();
        prop_assert!(check_eps_separated(&inst, sup * 0.999, opts()).unwrap().holds());
        let v = check_eps_separated(&inst, sup * 1.001, opts()).unwrap();
        prop_assert!(v.witness().unwrap().revalidate(&inst));
    }
}
