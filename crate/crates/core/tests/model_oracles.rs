use lloydlab::engine::{init_centers, initial_state, lloyd_step, run, InitMethod, RunConfig, Termination};
use lloydlab::model::{
    assign_nearest, bisector_distance, center_of_mass, min_center_distance, nearest_center, potential, Instance, Point,
};
use lloydlab::oracles::brute_force_optimum;
use lloydlab::rng::{seeded, uniform01};
use lloydlab::Exec;
use num_rational::BigRational;
use proptest::prelude::*;

fn exact(x: f64) -> BigRational {
    BigRational::from_float(x).expect("finite")
}

fn random_points(n: usize, d: usize, seed: u64) -> Vec<Point> {
    let mut rng = seeded(seed);
    (0..n)
        .map(|_| Point::new((0..d).map(|_| 10.0 * uniform01(&mut rng) - 5.0).collect()).unwrap())
        .collect()
}

fn rel_close(got: f64, want: &BigRational, rel: f64) -> bool {
    let diff = exact(got) - want;
    let diff = if diff < BigRational::from_integer(0.into()) {
        -diff
    } else {
        diff
    };
    let scale = if *want < BigRational::from_integer(0.into()) {
        -want.clone()
    } else {
        want.clone()
    };
    diff <= exact(rel) * scale
}

#[test]
fn potential_matches_exact_resummation() {
    for seed in 0..20 {
        let points = random_points(6, 3, seed);
        let centers = random_points(2, 3, seed + 100);
        let inst = Instance::new(points.clone()).unwrap();
        let assignment: Vec<usize> = (0..6).map(|i| (i * 7 + seed as usize) % 2).collect();
        let got = potential(&inst, &assignment, &centers).unwrap();
        let mut want = BigRational::from_integer(0.into());
        for (p, &a) in points.iter().zip(&assignment) {
            for (x, c) in p.coords().iter().zip(centers[a].coords()) {
                let diff = exact(*x) - exact(*c);
                want += &diff * &diff;
            }
        }
        assert!(rel_close(got, &want, 1e-12), "seed {seed}: {got}");
    }
}

#[test]
fn center_of_mass_matches_exact_mean() {
    for seed in 0..20 {
        let points = random_points(5, 4, seed);
        let got = center_of_mass(points.iter()).unwrap();
        for (j, g) in got.coords().iter().enumerate() {
            let sum = points
                .iter()
                .fold(BigRational::from_integer(0.into()), |acc, p| acc + exact(p.coords()[j]));
            let want = sum / BigRational::from_integer(5.into());
            assert!(rel_close(*g, &want, 1e-14), "seed {seed} coord {j}");
        }
    }
}

#[test]
fn small_examples() {
    let p = |v: &[f64]| Point::new(v.to_vec()).unwrap();
    let inst = Instance::new(vec![p(&[3.0, 4.0])]).unwrap();
    assert_eq!(potential(&inst, &[0], &[p(&[3.0, 4.0])]).unwrap(), 0.0);
    let inst = Instance::new(vec![p(&[0.0, 0.0]), p(&[2.0, 0.0])]).unwrap();
    assert_eq!(potential(&inst, &[0, 0], &[p(&[1.0, 0.0])]).unwrap(), 2.0);
    assert_eq!(center_of_mass(inst.points().iter()).unwrap(), p(&[1.0, 0.0]));
    assert_eq!(center_of_mass([p(&[1.0, 1.0])].iter()).unwrap(), p(&[1.0, 1.0]));
    assert_eq!(assign_nearest(&p(&[1.0, 0.0]), &[p(&[0.0, 0.0]), p(&[5.0, 0.0])], 1), 0);
    assert_eq!(assign_nearest(&p(&[1.0, 0.0]), &[p(&[0.0, 0.0]), p(&[2.0, 0.0])], 1), 1);
    assert_eq!(
        bisector_distance(&p(&[1.0, 0.0]), &p(&[0.0, 0.0]), &p(&[4.0, 0.0])).unwrap(),
        1.0
    );
    assert_eq!(
        bisector_distance(&p(&[2.0, 7.0]), &p(&[0.0, 0.0]), &p(&[4.0, 0.0])).unwrap(),
        0.0
    );
    assert_eq!(
        min_center_distance(&[p(&[0.0, 0.0]), p(&[3.0, 4.0]), p(&[10.0, 0.0])], None),
        Some(5.0)
    );
    assert_eq!(min_center_distance(&[p(&[1.0, 2.0]), p(&[1.0, 2.0])], None), Some(0.0));
}

#[test]
fn bisector_matches_projection_oracle() {
    for seed in 0..50 {
        let pts = random_points(3, 3, seed);
        let (x, ci, cj) = (&pts[0], &pts[1], &pts[2]);
        // hyperplane through the midpoint with unit normal along cj - ci
        let normal: Vec<f64> = cj.coords().iter().zip(ci.coords()).map(|(b, a)| b - a).collect();
        let len = normal.iter().map(|v| v * v).sum::<f64>().sqrt();
        let mid: Vec<f64> = ci
            .coords()
            .iter()
            .zip(cj.coords())
            .map(|(a, b)| (a + b) / 2.0)
            .collect();
        let want = x
            .coords()
            .iter()
            .zip(&mid)
            .zip(&normal)
            .map(|((x, m), u)| (x - m) * u / len)
            .sum::<f64>()
            .abs();
        let got = bisector_distance(x, ci, cj).unwrap();
        assert!(
            (got - want).abs() <= 1e-12 * (1.0 + want),
            "seed {seed}: {got} vs {want}"
        );
    }
}

#[test]
fn min_center_distance_matches_pair_scan() {
    for seed in 0..30 {
        let centers = random_points(8, 3, seed);
        let mut want = f64::INFINITY;
        for i in 0..8 {
            for j in 0..8 {
                if i != j {
                    want = want.min(centers[i].dist(&centers[j]));
                }
            }
        }
        assert_eq!(min_center_distance(&centers, None), Some(want));
    }
}

#[test]
fn uniform_init_frequencies() {
    let inst = Instance::new(random_points(5, 2, 9)).unwrap();
    let mut counts = [0usize; 5];
    for seed in 0..10_000 {
        let c = init_centers(&inst, 1, &InitMethod::UniformPoints, seed).unwrap();
        let i = inst.points().iter().position(|p| p.bit_eq(&c[0])).unwrap();
        counts[i] += 1;
    }
    for c in counts {
        let f = c as f64 / 10_000.0;
        assert!((f - 0.2).abs() <= 0.02, "frequency {f}");
    }
}

#[test]
fn first_k_takes_leading_points() {
    let inst = Instance::new(random_points(5, 2, 1)).unwrap();
    let c = init_centers(&inst, 2, &InitMethod::FirstK, 0).unwrap();
    assert_eq!(c, inst.points()[..2].to_vec());
}

#[test]
fn four_point_line() {
    let inst = Instance::from_scalars(&[0.0, 1.0, 10.0, 11.0]).unwrap();
    let init = InitMethod::Explicit(vec![Point::new(vec![0.0]).unwrap(), Point::new(vec![11.0]).unwrap()]);
    let state = initial_state(&inst, init_centers(&inst, 2, &init, 0).unwrap());
    assert_eq!(state.assignment, vec![0, 0, 1, 1]);
    let (next, record) = lloyd_step(&inst, &state, Exec::Sequential);
    assert_eq!(
        next.centers,
        vec![Point::new(vec![0.5]).unwrap(), Point::new(vec![10.5]).unwrap()]
    );
    // before: 0 + 1 + 1 + 0, after: four points at distance 1/2
    assert_eq!(record.potential_before, 2.0);
    assert_eq!(record.potential_after, 1.0);
    assert_eq!(record.drop, 1.0);

    let trace = run(&inst, &RunConfig::new(2, init, 0)).unwrap();
    assert_eq!(trace.termination, Termination::Converged);
    assert_eq!(trace.iterations(), 2);
    assert_eq!(trace.final_potential(), 1.0);
    let (opt, _) = brute_force_optimum(&inst, 2, Exec::Sequential).unwrap();
    assert_eq!(opt, 1.0);
}

#[test]
fn k_one_converges_quickly() {
    let inst = Instance::new(random_points(30, 3, 4)).unwrap();
    let trace = run(&inst, &RunConfig::new(1, InitMethod::UniformPoints, 3)).unwrap();
    assert!(trace.iterations() <= 2);
    assert_eq!(trace.termination, Termination::Converged);
}

#[test]
fn brute_force_closed_forms() {
    let inst = Instance::new(random_points(6, 2, 12)).unwrap();
    assert_eq!(brute_force_optimum(&inst, 6, Exec::Parallel).unwrap().0, 0.0);
    let mean = center_of_mass(inst.points().iter()).unwrap();
    let direct = potential(&inst, &[0; 6], &[mean]).unwrap();
    let (opt, assignment) = brute_force_optimum(&inst, 1, Exec::Sequential).unwrap();
    assert_eq!(assignment, vec![0; 6]);
    assert!((opt - direct).abs() <= 1e-12 * direct);
}

proptest! {
    #[test]
    fn nearest_is_exhaustive_argmin(seed in any::<u64>(), k in 1usize..8, d in 1usize..4) {
        let centers = random_points(k, d, seed);
        let x = &random_points(1, d, seed ^ 1)[0];
        let got = nearest_center(x, &centers);
        let best = centers.iter().map(|c| c.sq_dist(x)).fold(f64::INFINITY, f64::min);
        prop_assert!(centers[got].sq_dist(x) <= best * (1.0 + 1e-12));
    }

    #[test]
    fn assignment_keeps_current_on_ties(seed in any::<u64>(), k in 2usize..6) {
        let mut centers = random_points(k, 2, seed);
        centers[k - 1] = centers[0].clone();
        let x = &random_points(1, 2, seed ^ 7)[0];
        let first = nearest_center(x, &centers);
        if first == 0 {
            prop_assert_eq!(assign_nearest(x, &centers, k - 1), k - 1);
        }
    }
}
