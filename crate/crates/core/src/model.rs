//! Domain types and the exact geometric primitives everything else builds on.

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::perturbation::PerturbationMeta;

/// A point in `d`-dimensional space with finite coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Point(Vec<f64>);

impl Point {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(LabError::InvalidInstance("point has no coordinates".into()));
        }
        if let Some((index, &value)) = coords.iter().enumerate().find(|(_, c)| !c.is_finite()) {
            return Err(LabError::NonFinite { index, value });
        }
        Ok(Self(coords))
    }

    pub fn origin(dim: usize) -> Self {
        Self(vec![0.0; dim])
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn sq_dist(&self, other: &Point) -> f64 {
        sq_dist(&self.0, &other.0)
    }

    pub fn dist(&self, other: &Point) -> f64 {
        self.sq_dist(other).sqrt()
    }

    /// Every coordinate multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Point {
        Point(self.0.iter().map(|c| c * factor).collect())
    }

    /// Bitwise coordinate equality (distinguishes `0.0` and `-0.0`).
    pub fn bit_eq(&self, other: &Point) -> bool {
        self.0.len() == other.0.len() && self.0.iter().zip(&other.0).all(|(a, b)| a.to_bits() == b.to_bits())
    }

    pub(crate) fn from_raw(coords: Vec<f64>) -> Self {
        Self(coords)
    }
}

impl TryFrom<Vec<f64>> for Point {
    type Error = LabError;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Point::new(v)
    }
}

impl From<Point> for Vec<f64> {
    fn from(p: Point) -> Self {
        p.0
    }
}

pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// `n` points of common dimension `d`, with optional perturbation provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    points: Vec<Point>,
    dim: usize,
    meta: Option<PerturbationMeta>,
}

impl Instance {
    pub fn new(points: Vec<Point>) -> Result<Self> {
        let dim = points
            .first()
            .ok_or_else(|| LabError::InvalidInstance("instance needs at least one point".into()))?
            .dim();
        if let Some(p) = points.iter().find(|p| p.dim() != dim) {
            return Err(LabError::DimensionMismatch {
                expected: dim,
                found: p.dim(),
            });
        }
        Ok(Self {
            points,
            dim,
            meta: None,
        })
    }

    /// Build from raw coordinate rows.
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        Self::new(rows.into_iter().map(Point::new).collect::<Result<_>>()?)
    }

    /// Build a 1D instance from scalars.
    pub fn from_scalars(xs: &[f64]) -> Result<Self> {
        Self::from_rows(xs.iter().map(|&x| vec![x]).collect())
    }

    pub fn with_meta(mut self, meta: PerturbationMeta) -> Self {
        self.meta = Some(meta);
        self
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn point(&self, i: usize) -> &Point {
        &self.points[i]
    }

    pub fn n(&self) -> usize {
        self.points.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn meta(&self) -> Option<&PerturbationMeta> {
        self.meta.as_ref()
    }

    /// Uniformly scaled copy; metadata is dropped.
    pub fn scaled(&self, factor: f64) -> Instance {
        Instance {
            points: self.points.iter().map(|p| p.scaled(factor)).collect(),
            dim: self.dim,
            meta: None,
        }
    }
}

/// Assignment of every point to one of `k` clusters plus the current centers.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusteringState {
    pub assignment: Vec<usize>,
    pub centers: Vec<Point>,
    pub iteration: usize,
    pub empty_flags: Vec<bool>,
}

impl ClusteringState {
    pub fn k(&self) -> usize {
        self.centers.len()
    }

    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k()];
        for &a in &self.assignment {
            sizes[a] += 1;
        }
        sizes
    }

    /// Centers of clusters that currently have members.
    pub fn live_centers(&self) -> Vec<&Point> {
        self.centers
            .iter()
            .zip(&self.empty_flags)
            .filter(|(_, &e)| !e)
            .map(|(c, _)| c)
            .collect()
    }
}

/// A point that switched clusters, with its distance to the bisector of the
/// pre-step centers of the two clusters involved.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BisectorCrossing {
    pub point_index: usize,
    pub from_cluster: usize,
    pub to_cluster: usize,
    pub distance_to_bisector: f64,
}

fn check_dim(expected: usize, p: &Point) -> Result<()> {
    if p.dim() != expected {
        return Err(LabError::DimensionMismatch {
            expected,
            found: p.dim(),
        });
    }
    Ok(())
}

/// The k-means objective: sum of squared distances from every point to the
/// center of its cluster.
pub fn potential(instance: &Instance, assignment: &[usize], centers: &[Point]) -> Result<f64> {
    if assignment.len() != instance.n() {
        return Err(LabError::LengthMismatch {
            what: "assignment",
            expected: instance.n(),
            found: assignment.len(),
        });
    }
    for c in centers {
        check_dim(instance.dim(), c)?;
    }
    let mut total = 0.0;
    for (p, &a) in instance.points().iter().zip(assignment) {
        let c = centers.get(a).ok_or_else(|| {
            LabError::InvalidParameter(format!("cluster index {a} out of range for k = {}", centers.len()))
        })?;
        total += p.sq_dist(c);
    }
    Ok(total)
}

/// Coordinate-wise mean, summed in iteration order.
pub fn center_of_mass<'a, I>(points: I) -> Result<Point>
where
    I: IntoIterator<Item = &'a Point>,
{
    let mut iter = points.into_iter();
    let first = iter.next().ok_or(LabError::EmptyCluster)?;
    let mut acc = first.coords().to_vec();
    let mut count = 1usize;
    for p in iter {
        check_dim(acc.len(), p)?;
        for (a, c) in acc.iter_mut().zip(p.coords()) {
            *a += c;
        }
        count += 1;
    }
    let inv = count as f64;
    Ok(Point::from_raw(acc.into_iter().map(|a| a / inv).collect()))
}

/// Per-cluster centers of mass (`None` for empty clusters), summing members in
/// point-index order so identical member sets give bit-identical centers.
pub fn centers_of_mass(instance: &Instance, assignment: &[usize], k: usize) -> Vec<Option<Point>> {
    let d = instance.dim();
    let mut acc = vec![0.0; k * d];
    let mut counts = vec![0usize; k];
    for (p, &a) in instance.points().iter().zip(assignment) {
        counts[a] += 1;
        for (s, c) in acc[a * d..(a + 1) * d].iter_mut().zip(p.coords()) {
            *s += c;
        }
    }
    acc.chunks_exact(d)
        .zip(&counts)
        .map(|(sum, &m)| (m > 0).then(|| Point::from_raw(sum.iter().map(|s| s / m as f64).collect())))
        .collect()
}

/// Nearest center under the strict-improvement rule: the point keeps
/// `current` unless another center is strictly closer; among strictly closer
/// centers at equal distance the lowest index wins.
pub fn assign_nearest(point: &Point, centers: &[Point], current: usize) -> usize {
    let mut best = current;
    let mut best_d = centers.get(current).map_or(f64::INFINITY, |c| point.sq_dist(c));
    for (i, c) in centers.iter().enumerate() {
        let d = point.sq_dist(c);
        if d < best_d {
            best = i;
            best_d = d;
        }
    }
    best
}

/// Plain argmin with lowest-index ties; used when a point has no cluster yet.
pub fn nearest_center(point: &Point, centers: &[Point]) -> usize {
    assign_nearest(point, centers, usize::MAX)
}

/// Distance from `x` to the hyperplane bisecting `ci` and `cj`.
pub fn bisector_distance(x: &Point, ci: &Point, cj: &Point) -> Result<f64> {
    check_dim(x.dim(), ci)?;
    check_dim(x.dim(), cj)?;
    let gap = ci.sq_dist(cj);
    if gap == 0.0 {
        return Err(LabError::DegenerateBisector);
    }
    Ok((x.sq_dist(ci) - x.sq_dist(cj)).abs() / (2.0 * gap.sqrt()))
}

/// Smallest pairwise distance among centers not flagged empty; `None` when
/// fewer than two centers qualify.
pub fn min_center_distance(centers: &[Point], empty_flags: Option<&[bool]>) -> Option<f64> {
    let live: Vec<&Point> = match empty_flags {
        Some(flags) => centers.iter().zip(flags).filter(|(_, &e)| !e).map(|(c, _)| c).collect(),
        None => centers.iter().collect(),
    };
    let mut best: Option<f64> = None;
    for (i, a) in live.iter().enumerate() {
        for b in &live[i + 1..] {
            let d = a.sq_dist(b);
            best = Some(best.map_or(d, |m: f64| m.min(d)));
        }
    }
    best.map(f64::sqrt)
}
