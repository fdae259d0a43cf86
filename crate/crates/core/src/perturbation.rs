//! The smoothed input model: adversarial means in the unit cube plus
//! independent Gaussian noise on every coordinate.

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::exec::Exec;
use crate::model::{Instance, Point};
use crate::rng::{self, Gaussian};

pub const DEFAULT_KAPPA: f64 = 1.0;

/// Where a perturbed instance came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbationMeta {
    pub means: Vec<Point>,
    pub sigma: f64,
    pub seed: u64,
    pub kappa: f64,
    /// Half-width `D` of the hypercube `[-D, 1+D]^d`, once `k` is known.
    pub hypercube: Option<f64>,
}

fn means_in_unit_cube(means: &[Point]) -> bool {
    means.iter().all(|m| m.coords().iter().all(|c| (0.0..=1.0).contains(c)))
}

/// Source of the unperturbed means.
#[derive(Debug, Clone, PartialEq)]
pub enum MeanGenerator {
    /// First `n` nodes of the lexicographic grid with `ceil(n^(1/d))` nodes
    /// per axis spanning `[0, 1]`.
    UniformGrid,
    /// Independent uniform coordinates in `[0, 1)`.
    UniformRandom,
    /// Explicit means; `n` must match.
    Fixed(Vec<Point>),
}

impl MeanGenerator {
    pub fn id(&self) -> &'static str {
        match self {
            MeanGenerator::UniformGrid => "uniform-grid",
            MeanGenerator::UniformRandom => "uniform-random",
            MeanGenerator::Fixed(_) => "from-file",
        }
    }

    pub fn generate(&self, n: usize, d: usize, seed: u64) -> Result<Vec<Point>> {
        if n == 0 || d == 0 {
            return Err(LabError::InvalidParameter("n and d must be at least 1".into()));
        }
        match self {
            MeanGenerator::UniformGrid => Ok(grid_means(n, d)),
            MeanGenerator::UniformRandom => {
                let mut rng = rng::seeded(seed);
                Ok((0..n)
                    .map(|_| Point::from_raw((0..d).map(|_| rng::uniform01(&mut rng)).collect()))
                    .collect())
            }
            MeanGenerator::Fixed(means) => {
                if means.len() != n {
                    return Err(LabError::LengthMismatch {
                        what: "means",
                        expected: n,
                        found: means.len(),
                    });
                }
                if let Some(m) = means.iter().find(|m| m.dim() != d) {
                    return Err(LabError::DimensionMismatch {
                        expected: d,
                        found: m.dim(),
                    });
                }
                Ok(means.clone())
            }
        }
    }
}

impl std::str::FromStr for MeanGenerator {
    type Err = LabError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform-grid" => Ok(MeanGenerator::UniformGrid),
            "uniform-random" => Ok(MeanGenerator::UniformRandom),
            other => Err(LabError::InvalidParameter(format!(
                "unknown mean generator `{other}` (expected uniform-grid or uniform-random)"
            ))),
        }
    }
}

fn grid_means(n: usize, d: usize) -> Vec<Point> {
    let mut side = 1usize;
    while side.checked_pow(d as u32).is_some_and(|c| c < n) {
        side += 1;
    }
    let coord = |j: usize| if side == 1 { 0.5 } else { j as f64 / (side - 1) as f64 };
    (0..n)
        .map(|mut idx| {
            let mut c = vec![0.0; d];
            for slot in c.iter_mut().rev() {
                *slot = coord(idx % side);
                idx /= side;
            }
            Point::from_raw(c)
        })
        .collect()
}

/// Add `N(0, sigma^2)` noise to every coordinate of every mean.
///
/// Point `i` draws its noise from stream `i` of `seed`, so the result does not
/// depend on how points are distributed across threads.
pub fn perturb(means: &[Point], sigma: f64, seed: u64) -> Result<Instance> {
    perturb_with(means, sigma, seed, Exec::Sequential)
}

pub fn perturb_with(means: &[Point], sigma: f64, seed: u64, exec: Exec) -> Result<Instance> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(LabError::InvalidSigma(sigma));
    }
    if !means_in_unit_cube(means) {
        log::warn!("perturb: some mean coordinates lie outside [0, 1]");
    }
    let rows = exec.map_indexed(means.len(), |i| {
        let mut rng = rng::stream(seed, i as u64);
        let mut g = Gaussian::new();
        means[i]
            .coords()
            .iter()
            .map(|m| m + sigma * g.sample(&mut rng))
            .collect::<Vec<f64>>()
    });
    let meta = PerturbationMeta {
        means: means.to_vec(),
        sigma,
        seed,
        kappa: DEFAULT_KAPPA,
        hypercube: None,
    };
    Ok(Instance::from_rows(rows)?.with_meta(meta))
}

/// Result of [`hypercube_d`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HypercubeD {
    pub value: f64,
    /// True when the formula was vacuous or below 1 and the value was raised to 1.
    pub clamped: bool,
}

/// `D = sqrt(2 sigma^2 ln(n^(1+kappa k d) d sigma))`, floored at 1.
pub fn hypercube_d(n: usize, d: usize, k: usize, sigma: f64, kappa: f64) -> Result<HypercubeD> {
    if n == 0 || d == 0 || k == 0 {
        return Err(LabError::InvalidParameter("n, d, k must be at least 1".into()));
    }
    if !(sigma > 0.0) {
        return Err(LabError::InvalidSigma(sigma));
    }
    let log_arg = (1.0 + kappa * (k * d) as f64) * (n as f64).ln() + (d as f64).ln() + sigma.ln();
    if log_arg <= 0.0 {
        return Ok(HypercubeD {
            value: 1.0,
            clamped: true,
        });
    }
    let value = (2.0 * sigma * sigma * log_arg).sqrt();
    Ok(if value < 1.0 {
        HypercubeD {
            value: 1.0,
            clamped: true,
        }
    } else {
        HypercubeD { value, clamped: false }
    })
}

/// Outcome of a one-sided Monte Carlo bound check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundCheck {
    pub empirical: f64,
    pub bound: f64,
    pub sampling_error: f64,
    pub trials: u64,
    /// Set when the parameters lie outside the range the bound is stated for.
    pub out_of_range: bool,
}

impl BoundCheck {
    pub fn new(hits: u64, trials: u64, bound: f64) -> Self {
        Self {
            empirical: hits as f64 / trials as f64,
            bound,
            sampling_error: sampling_error(bound, trials),
            trials,
            out_of_range: false,
        }
    }

    pub fn margin(&self) -> f64 {
        self.bound + 3.0 * self.sampling_error
    }

    pub fn passed(&self) -> bool {
        self.empirical <= self.margin()
    }
}

/// `sqrt(min(bound, 1) / trials)`: the standard error of a frequency whose
/// true value sits at the bound (upper-bounded, for bounds below 1/2).
pub fn sampling_error(bound: f64, trials: u64) -> f64 {
    (bound.clamp(0.0, 1.0) / trials as f64).sqrt()
}

const CHUNK: u64 = 1 << 16;

/// Count hits over `samples` scalar draws `mu + sigma z`, chunked into
/// independent streams so serial and parallel execution agree.
pub(crate) fn count_scalar_hits<F>(sigma: f64, mu: f64, samples: u64, seed: u64, exec: Exec, hit: F) -> u64
where
    F: Fn(f64) -> bool + Sync + Send,
{
    let chunks = samples.div_ceil(CHUNK);
    exec.map_indexed(chunks as usize, |c| {
        let len = CHUNK.min(samples - c as u64 * CHUNK);
        let mut rng = rng::stream(seed, c as u64);
        let mut g = Gaussian::new();
        (0..len).filter(|_| hit(mu + sigma * g.sample(&mut rng))).count() as u64
    })
    .into_iter()
    .sum()
}

/// Empirical `Pr[x not in [-t, 1+t]]` for `x ~ N(mu, sigma^2)` against the
/// bound `sigma exp(-t^2 / (2 sigma^2))`.
pub fn tail_probability_check(sigma: f64, t: f64, mu: f64, samples: u64, seed: u64, exec: Exec) -> Result<BoundCheck> {
    if !(sigma > 0.0) {
        return Err(LabError::InvalidSigma(sigma));
    }
    if samples == 0 {
        return Err(LabError::InvalidParameter("samples must be positive".into()));
    }
    let bound = sigma * (-t * t / (2.0 * sigma * sigma)).exp();
    let hits = count_scalar_hits(sigma, mu, samples, seed, exec, |x| x < -t || x > 1.0 + t);
    let mut check = BoundCheck::new(hits, samples, bound);
    check.out_of_range = t < 1.0 || !(0.0..=1.0).contains(&mu) || samples < 10_000;
    Ok(check)
}

/// Fraction of perturbed instances with some point outside `[-D, 1+D]^d`,
/// checked against `n^(-kappa k d)`.
pub fn hypercube_escape_check(
    means: &[Point],
    k: usize,
    sigma: f64,
    kappa: f64,
    trials: u64,
    seed: u64,
    exec: Exec,
) -> Result<BoundCheck> {
    let n = means.len();
    let d = means.first().map_or(0, Point::dim);
    let radius = hypercube_d(n, d, k, sigma, kappa)?.value;
    let bound = (-(kappa * (k * d) as f64) * (n as f64).ln()).exp();
    let escapes = exec.map_indexed(trials as usize, |t| {
        let inst = perturb(means, sigma, rng::derive_seed(seed, t as u64)).expect("sigma validated");
        inst.points()
            .iter()
            .any(|p| p.coords().iter().any(|&c| c < -radius || c > 1.0 + radius))
    });
    let hits = escapes.into_iter().filter(|&e| e).count() as u64;
    Ok(BoundCheck::new(hits, trials, bound))
}

/// Means scaled into `[0, 1/sigma]^d` with unit noise.
#[derive(Debug, Clone, PartialEq)]
pub struct Rescaled {
    pub means: Vec<Point>,
    pub sigma: f64,
    pub scale_factor: f64,
    /// False when `sigma <= 1` and nothing was changed.
    pub applied: bool,
}

pub fn rescale_for_large_sigma(means: &[Point], sigma: f64) -> Rescaled {
    if sigma <= 1.0 {
        return Rescaled {
            means: means.to_vec(),
            sigma,
            scale_factor: 1.0,
            applied: false,
        };
    }
    let factor = 1.0 / sigma;
    Rescaled {
        means: means.iter().map(|m| m.scaled(factor)).collect(),
        sigma: 1.0,
        scale_factor: factor,
        applied: true,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize) -> Vec<Point> {
        (0..n)
            .map(|i| Point::new(vec![i as f64 / n as f64, 0.5]).unwrap())
            .collect()
    }

    #[test]
    fn grid_means_cover_unit_cube() {
        let m = MeanGenerator::UniformGrid.generate(10, 1, 0).unwrap();
        assert_eq!(m.first().unwrap().coords(), &[0.0]);
        assert_eq!(m.last().unwrap().coords(), &[1.0]);
        let m = MeanGenerator::UniformGrid.generate(5, 2, 0).unwrap();
        assert_eq!(m.len(), 5);
        assert_eq!(m[0].coords(), &[0.0, 0.0]);
        assert_eq!(m[1].coords(), &[0.0, 0.5]);
        assert_eq!(m[3].coords(), &[0.5, 0.0]);
        assert_eq!(
            MeanGenerator::UniformGrid.generate(1, 3, 0).unwrap()[0].coords(),
            &[0.5, 0.5, 0.5]
        );
    }

    #[test]
    fn random_means_deterministic() {
        let a = MeanGenerator::UniformRandom.generate(20, 3, 5).unwrap();
        assert_eq!(a, MeanGenerator::UniformRandom.generate(20, 3, 5).unwrap());
        assert!(a.iter().all(|p| p.coords().iter().all(|c| (0.0..1.0).contains(c))));
        assert!(MeanGenerator::Fixed(a.clone()).generate(19, 3, 0).is_err());
    }

    #[test]
    fn tiny_sigma_returns_means() {
        let means = grid(7);
        let inst = perturb(&means, 1e-300, 3).unwrap();
        for (p, m) in inst.points().iter().zip(&means) {
            for (a, b) in p.coords().iter().zip(m.coords()) {
                assert!((a - b).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn perturb_is_deterministic_across_exec_modes() {
        let means = grid(50);
        let a = perturb_with(&means, 0.3, 9, Exec::Sequential).unwrap();
        let b = perturb_with(&means, 0.3, 9, Exec::Parallel).unwrap();
        let c = perturb(&means, 0.3, 9).unwrap();
        assert_eq!(a, b);
        assert_eq!(a, c);
        assert_ne!(a, perturb(&means, 0.3, 10).unwrap());
    }

    #[test]
    fn invalid_sigma() {
        assert_eq!(perturb(&grid(2), 0.0, 1), Err(LabError::InvalidSigma(0.0)));
        assert!(perturb(&grid(2), -1.0, 1).is_err());
        assert!(perturb(&grid(2), f64::NAN, 1).is_err());
    }

    #[test]
    fn hypercube_clamps() {
        let tiny = hypercube_d(2, 1, 1, 1e-6, 1.0).unwrap();
        assert_eq!(
            tiny,
            HypercubeD {
                value: 1.0,
                clamped: true
            }
        );
        let big = hypercube_d(100, 2, 3, 0.5, 1.0).unwrap();
        assert!(!big.clamped);
    }

    #[test]
    fn hypercube_monotone_in_n() {
        for &sigma in &[0.01, 0.1, 0.5, 1.0, 3.0] {
            let mut prev = 0.0;
            for n in 1..300 {
                let v = hypercube_d(n, 2, 3, sigma, 1.0).unwrap().value;
                assert!(v >= prev, "n={n} sigma={sigma}");
                assert!(v >= 1.0);
                prev = v;
            }
        }
    }

    #[test]
    fn rescale_examples() {
        let m = vec![Point::new(vec![1.0, 1.0]).unwrap()];
        let r = rescale_for_large_sigma(&m, 2.0);
        assert!(r.applied);
        assert_eq!(r.means[0].coords(), &[0.5, 0.5]);
        assert_eq!(r.sigma, 1.0);
        assert_eq!(r.scale_factor, 0.5);
        let r = rescale_for_large_sigma(&m, 1.0);
        assert!(!r.applied);
        assert_eq!(r.means, m);
        assert_eq!(r.sigma, 1.0);
    }

    #[test]
    fn tail_flags_out_of_range() {
        let c = tail_probability_check(0.5, 0.5, 0.0, 10_000, 1, Exec::Parallel).unwrap();
        assert!(c.out_of_range);
        let c = tail_probability_check(0.5, 1.0, 0.0, 10_000, 1, Exec::Parallel).unwrap();
        assert!(!c.out_of_range);
    }

    #[test]
    fn tail_symmetric_in_mu() {
        let a = tail_probability_check(0.5, 1.0, 0.0, 200_000, 5, Exec::Parallel).unwrap();
        let b = tail_probability_check(0.5, 1.0, 1.0, 200_000, 6, Exec::Parallel).unwrap();
        let se = (a.empirical * (1.0 - a.empirical) / 200_000.0).sqrt();
        assert!((a.empirical - b.empirical).abs() <= 4.0 * se * std::f64::consts::SQRT_2);
    }

    #[test]
    fn escape_fraction_within_bound() {
        // n^(-kappa k d) = 10^-1 here, well inside the testable range
        let means: Vec<Point> = (0..10).map(|i| Point::new(vec![i as f64 / 9.0]).unwrap()).collect();
        let c = hypercube_escape_check(&means, 1, 0.5, 1.0, 20_000, 4, Exec::Parallel).unwrap();
        assert!(c.bound >= 1e-3);
        assert!(c.passed(), "{c:?}");
    }
}
