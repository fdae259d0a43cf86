//! Lemma constants and per-iteration drop lower bounds, carried as natural
//! logarithms. Linear values are only materialized when `|ln v| < 700`.

use serde::Serialize;

use crate::engine::IterationRecord;
use crate::error::{LabError, Result};
use crate::perturbation::hypercube_d;

const MATERIALIZE_LIMIT: f64 = 700.0;

fn materialize(log_value: f64) -> Option<f64> {
    (log_value.abs() < MATERIALIZE_LIMIT).then(|| log_value.exp())
}

/// `ln W = kappa k d ln n`.
pub fn w_log(n: usize, k: usize, d: usize, kappa: f64) -> f64 {
    kappa * (k * d) as f64 * (n as f64).ln()
}

/// Natural log of the close-points radius
/// `sigma^4 / (32 n^2 d D^2) * (sigma / (3 D n^(3 + 2 kappa)))^(4a)`.
pub fn lemma_epsilon_log(n: usize, d: usize, k: usize, a: usize, sigma: f64, radius: f64, kappa: f64) -> Result<f64> {
    if a == 0 || a > k {
        return Err(LabError::InvalidParameter(format!(
            "a must lie in [1, k = {k}], got {a}"
        )));
    }
    if !(sigma > 0.0) || !(radius > 0.0) {
        return Err(LabError::InvalidParameter("sigma and D must be positive".into()));
    }
    let (ln_n, ln_s, ln_r) = ((n as f64).ln(), sigma.ln(), radius.ln());
    let head = 4.0 * ln_s - 32f64.ln() - 2.0 * ln_n - (d as f64).ln() - 2.0 * ln_r;
    let tail = ln_s - 3f64.ln() - ln_r - (3.0 + 2.0 * kappa) * ln_n;
    Ok(head + 4.0 * a as f64 * tail)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LemmaConstants {
    pub kappa: f64,
    pub w_log: f64,
    pub eps_log: f64,
    pub hypercube: f64,
    pub hypercube_clamped: bool,
    pub a: usize,
}

impl LemmaConstants {
    /// `radius` overrides the hypercube half-width; otherwise it is derived
    /// from `n, d, k, sigma, kappa`.
    pub fn compute(
        n: usize,
        d: usize,
        k: usize,
        a: usize,
        sigma: f64,
        kappa: f64,
        radius: Option<f64>,
    ) -> Result<Self> {
        let (hypercube, hypercube_clamped) = match radius {
            Some(r) => (r, false),
            None => {
                let h = hypercube_d(n, d, k, sigma, kappa)?;
                (h.value, h.clamped)
            }
        };
        Ok(Self {
            kappa,
            w_log: w_log(n, k, d, kappa),
            eps_log: lemma_epsilon_log(n, d, k, a, sigma, hypercube, kappa)?,
            hypercube,
            hypercube_clamped,
            a,
        })
    }

    pub fn epsilon(&self) -> Option<f64> {
        materialize(self.eps_log)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum DropBoundKind {
    /// `delta^2 / (4 n^4)` over four consecutive iterations on a δ-sparse set.
    DeltaSparse,
    /// `2 eps^2 / n` on an ε-separated set.
    EpsSeparated,
    /// `eps^2 / (4 n^2)` per iteration on an ε-spreaded 1D set.
    Spreaded1d,
    /// `eps^2 min(Delta^2, 1) / (36 d D^2 k^(kd/a))` over `k^(kd/a) + 1` steps.
    CloseCenters,
}

impl DropBoundKind {
    pub const ALL: [DropBoundKind; 4] = [
        DropBoundKind::DeltaSparse,
        DropBoundKind::EpsSeparated,
        DropBoundKind::Spreaded1d,
        DropBoundKind::CloseCenters,
    ];

    pub fn applicability(self) -> &'static str {
        match self {
            DropBoundKind::DeltaSparse => {
                "instance delta-sparse; four consecutive non-terminating iterations, each with <= sqrt(k) active clusters and every cluster gaining/losing <= 2d sqrt(k) points"
            }
            DropBoundKind::EpsSeparated => {
                "instance eps-separated; iteration with <= sqrt(k) active clusters where some cluster gains or loses > 2d sqrt(k) points"
            }
            DropBoundKind::Spreaded1d => "d = 1, instance eps-spreaded; every non-terminating iteration",
            DropBoundKind::CloseCenters => {
                "every k^(kd/a)+1 consecutive steps after the first; eps from the close-points lemma, Delta the smallest center distance in the window"
            }
        }
    }
}

/// Inputs for the drop bounds; each bound reads only the fields it needs.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DropContext {
    pub n: Option<usize>,
    pub d: Option<usize>,
    pub k: Option<usize>,
    pub a: Option<usize>,
    pub delta: Option<f64>,
    pub eps: Option<f64>,
    pub min_center_distance: Option<f64>,
    pub hypercube: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DropBound {
    pub kind: DropBoundKind,
    pub log_value: f64,
    pub value: Option<f64>,
    pub applies_to: &'static str,
}

fn need<T: Copy>(v: Option<T>, name: &'static str) -> Result<T> {
    v.ok_or(LabError::MissingField(name))
}

fn evaluate(kind: DropBoundKind, ctx: &DropContext) -> Result<f64> {
    let ln_n = (need(ctx.n, "n")? as f64).ln();
    Ok(match kind {
        DropBoundKind::DeltaSparse => 2.0 * need(ctx.delta, "delta")?.ln() - 4f64.ln() - 4.0 * ln_n,
        DropBoundKind::EpsSeparated => 2f64.ln() + 2.0 * need(ctx.eps, "eps")?.ln() - ln_n,
        DropBoundKind::Spreaded1d => 2.0 * need(ctx.eps, "eps")?.ln() - 4f64.ln() - 2.0 * ln_n,
        DropBoundKind::CloseCenters => {
            let eps = need(ctx.eps, "eps")?;
            let gap = need(ctx.min_center_distance, "min_center_distance")?;
            let d = need(ctx.d, "d")? as f64;
            let k = need(ctx.k, "k")? as f64;
            let a = need(ctx.a, "a")? as f64;
            let radius = need(ctx.hypercube, "hypercube")?;
            2.0 * eps.ln() + 2.0 * gap.min(1.0).ln() - 36f64.ln() - d.ln() - 2.0 * radius.ln() - (k * d / a) * k.ln()
        }
    })
}

pub fn drop_lower_bounds(ctx: &DropContext, kinds: &[DropBoundKind]) -> Result<Vec<DropBound>> {
    kinds
        .iter()
        .map(|&kind| {
            let log_value = evaluate(kind, ctx)?;
            Ok(DropBound {
                kind,
                log_value,
                value: materialize(log_value),
                applies_to: kind.applicability(),
            })
        })
        .collect()
}

/// Whether the ε-separated drop bound applies to an iteration: at most
/// `sqrt(k)` active clusters and some cluster gaining or losing more than
/// `2 d sqrt(k)` points.
pub fn eps_separated_drop_applies(record: &IterationRecord, k: usize, d: usize) -> bool {
    let root = (k as f64).sqrt();
    record.active_clusters as f64 <= root
        && record
            .max_gain_or_loss(k)
            .iter()
            .any(|&m| m as f64 > 2.0 * d as f64 * root)
}
