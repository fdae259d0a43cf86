//! Lloyd's method with per-iteration telemetry.
//!
//! One iteration is a reassignment of every point followed by a center
//! update. A run starts from initial centers and the nearest-center
//! assignment they induce (lowest index on ties), so the first recorded step
//! moves centers only.

use std::collections::HashSet;
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::exec::Exec;
use crate::model::{
    assign_nearest, bisector_distance, centers_of_mass, min_center_distance, nearest_center, potential,
    BisectorCrossing, ClusteringState, Instance, Point,
};
use crate::rng;

pub const DEFAULT_MAX_ITERATIONS: usize = 1_000_000;

/// Longest epoch the epoch lemma allows (its proof yields four steps).
pub const EPOCH_LENGTH_LIMIT: usize = 4;

#[derive(Debug, Clone, PartialEq)]
pub enum InitMethod {
    /// `k` distinct data points sampled without replacement.
    UniformPoints,
    /// The first `k` data points.
    FirstK,
    /// Caller-supplied centers.
    Explicit(Vec<Point>),
}

impl InitMethod {
    pub fn id(&self) -> &'static str {
        match self {
            InitMethod::UniformPoints => "uniform-points",
            InitMethod::FirstK => "first-k",
            InitMethod::Explicit(_) => "explicit",
        }
    }
}

impl FromStr for InitMethod {
    type Err = LabError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform-points" => Ok(InitMethod::UniformPoints),
            "first-k" => Ok(InitMethod::FirstK),
            other => Err(LabError::InvalidParameter(format!(
                "unknown init method `{other}` (expected uniform-points or first-k)"
            ))),
        }
    }
}

pub fn init_centers(instance: &Instance, k: usize, method: &InitMethod, seed: u64) -> Result<Vec<Point>> {
    if k == 0 {
        return Err(LabError::InvalidParameter("k must be at least 1".into()));
    }
    let n = instance.n();
    match method {
        InitMethod::UniformPoints => {
            if k > n {
                return Err(LabError::InfeasibleInit { k, n });
            }
            let mut rng = rng::seeded(seed);
            let picks = index::sample(&mut rng, n, k);
            Ok(picks.iter().map(|i| instance.point(i).clone()).collect())
        }
        InitMethod::FirstK => {
            if k > n {
                return Err(LabError::InfeasibleInit { k, n });
            }
            Ok(instance.points()[..k].to_vec())
        }
        InitMethod::Explicit(centers) => {
            if centers.len() != k {
                return Err(LabError::LengthMismatch {
                    what: "explicit centers",
                    expected: k,
                    found: centers.len(),
                });
            }
            if let Some(c) = centers.iter().find(|c| c.dim() != instance.dim()) {
                return Err(LabError::DimensionMismatch {
                    expected: instance.dim(),
                    found: c.dim(),
                });
            }
            Ok(centers.clone())
        }
    }
}

/// State before the first step: given centers and the nearest-center assignment.
pub fn initial_state(instance: &Instance, centers: Vec<Point>) -> ClusteringState {
    let assignment: Vec<usize> = instance.points().iter().map(|p| nearest_center(p, &centers)).collect();
    let mut state = ClusteringState {
        assignment,
        centers,
        iteration: 0,
        empty_flags: Vec::new(),
    };
    let sizes = state.cluster_sizes();
    state.empty_flags = sizes.iter().map(|&s| s == 0).collect();
    state
}

/// Telemetry for one Lloyd step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    /// 1-based step index.
    pub iteration: usize,
    pub potential_before: f64,
    pub potential_after: f64,
    pub drop: f64,
    pub reassigned: Vec<BisectorCrossing>,
    pub active_clusters: usize,
    pub center_movements: Vec<f64>,
    /// Minimum distance between non-empty centers before the step.
    pub min_center_distance: Option<f64>,
    /// Clusters left without members after the reassignment.
    pub empty_cluster_events: Vec<usize>,
    pub centers_after: Vec<Point>,
    pub assignment_digest: u64,
}

impl IterationRecord {
    pub fn tolerance(&self) -> f64 {
        1e-9 * (1.0 + self.potential_before.abs())
    }

    /// Points gained plus points lost, per cluster.
    pub fn cluster_flux(&self, k: usize) -> Vec<usize> {
        let mut flux = vec![0; k];
        for c in &self.reassigned {
            flux[c.from_cluster] += 1;
            flux[c.to_cluster] += 1;
        }
        flux
    }

    /// Per cluster, the larger of points gained and points lost.
    pub fn max_gain_or_loss(&self, k: usize) -> Vec<usize> {
        let mut gained = vec![0; k];
        let mut lost = vec![0; k];
        for c in &self.reassigned {
            lost[c.from_cluster] += 1;
            gained[c.to_cluster] += 1;
        }
        gained.iter().zip(&lost).map(|(g, l)| *g.max(l)).collect()
    }

    pub fn max_movement(&self) -> f64 {
        self.center_movements.iter().copied().fold(0.0, f64::max)
    }
}

/// FNV-1a over the little-endian cluster indices.
pub fn assignment_digest(assignment: &[usize]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &a in assignment {
        for b in (a as u32).to_le_bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }
    h
}

/// One reassignment followed by one center update.
pub fn lloyd_step(instance: &Instance, state: &ClusteringState, exec: Exec) -> (ClusteringState, IterationRecord) {
    let k = state.k();
    let centers = &state.centers;
    let potential_before = potential(instance, &state.assignment, centers).expect("state matches instance");
    let delta = min_center_distance(centers, Some(&state.empty_flags));

    let assignment = exec.map_indexed(instance.n(), |i| {
        assign_nearest(instance.point(i), centers, state.assignment[i])
    });

    let mut reassigned = Vec::new();
    let mut active = vec![false; k];
    for (i, (&old, &new)) in state.assignment.iter().zip(&assignment).enumerate() {
        if old != new {
            let distance_to_bisector = bisector_distance(instance.point(i), &centers[old], &centers[new])
                .expect("a strictly closer center is distinct");
            reassigned.push(BisectorCrossing {
                point_index: i,
                from_cluster: old,
                to_cluster: new,
                distance_to_bisector,
            });
            active[old] = true;
            active[new] = true;
        }
    }

    let masses = centers_of_mass(instance, &assignment, k);
    let empty_flags: Vec<bool> = masses.iter().map(Option::is_none).collect();
    let new_centers: Vec<Point> = masses
        .into_iter()
        .zip(centers)
        .map(|(m, old)| m.unwrap_or_else(|| old.clone()))
        .collect();
    let center_movements: Vec<f64> = centers.iter().zip(&new_centers).map(|(a, b)| a.dist(b)).collect();
    let potential_after = potential(instance, &assignment, &new_centers).expect("state matches instance");

    let record = IterationRecord {
        iteration: state.iteration + 1,
        potential_before,
        potential_after,
        drop: potential_before - potential_after,
        active_clusters: active.iter().filter(|&&a| a).count(),
        reassigned,
        center_movements,
        min_center_distance: delta,
        empty_cluster_events: empty_flags
            .iter()
            .enumerate()
            .filter(|(_, &e)| e)
            .map(|(i, _)| i)
            .collect(),
        centers_after: new_centers.clone(),
        assignment_digest: assignment_digest(&assignment),
    };
    let next = ClusteringState {
        assignment,
        centers: new_centers,
        iteration: state.iteration + 1,
        empty_flags,
    };
    (next, record)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Termination {
    Converged,
    MaxIterations,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub k: usize,
    pub init: InitMethod,
    pub seed: u64,
    pub max_iterations: usize,
    pub exec: Exec,
}

impl RunConfig {
    pub fn new(k: usize, init: InitMethod, seed: u64) -> Self {
        Self {
            k,
            init,
            seed,
            max_iterations: DEFAULT_MAX_ITERATIONS,
            exec: Exec::Sequential,
        }
    }

    pub fn max_iterations(mut self, max_iterations: usize) -> Self {
        self.max_iterations = max_iterations;
        self
    }

    pub fn exec(mut self, exec: Exec) -> Self {
        self.exec = exec;
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunTrace {
    pub records: Vec<IterationRecord>,
    pub termination: Termination,
    pub init_method: String,
    pub seed: u64,
    pub initial_centers: Vec<Point>,
    pub initial_digest: u64,
    pub final_state: ClusteringState,
}

impl RunTrace {
    pub fn iterations(&self) -> usize {
        self.records.len()
    }

    pub fn final_potential(&self) -> f64 {
        self.records.last().map_or(f64::NAN, |r| r.potential_after)
    }

    /// Smallest center distance seen before any step of the run.
    pub fn min_delta(&self) -> Option<f64> {
        self.records
            .iter()
            .filter_map(|r| r.min_center_distance)
            .reduce(f64::min)
    }
}

/// Iterate [`lloyd_step`] until nothing changes or the cap is hit.
pub fn run(instance: &Instance, config: &RunConfig) -> Result<RunTrace> {
    if config.max_iterations == 0 {
        return Err(LabError::InvalidParameter("max_iterations must be at least 1".into()));
    }
    let centers = init_centers(instance, config.k, &config.init, config.seed)?;
    let mut state = initial_state(instance, centers.clone());
    let initial_digest = assignment_digest(&state.assignment);
    let mut records = Vec::new();
    let mut termination = Termination::MaxIterations;
    for _ in 0..config.max_iterations {
        let (next, record) = lloyd_step(instance, &state, config.exec);
        let settled = record.reassigned.is_empty() && state.centers.iter().zip(&next.centers).all(|(a, b)| a.bit_eq(b));
        records.push(record);
        state = next;
        if settled {
            termination = Termination::Converged;
            break;
        }
    }
    Ok(RunTrace {
        records,
        termination,
        init_method: config.init.id().to_string(),
        seed: config.seed,
        initial_centers: centers,
        initial_digest,
        final_state: state,
    })
}

/// Maximal block of consecutive iterations in which every center takes at
/// most two distinct positions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Epoch {
    /// Record indices, inclusive.
    pub start: usize,
    pub end: usize,
    pub distinct_positions: Vec<usize>,
}

impl Epoch {
    pub fn len(&self) -> usize {
        self.end - self.start + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// Greedy epoch partition over the post-step center positions of each record.
pub fn detect_epochs(records: &[IterationRecord]) -> Vec<Epoch> {
    let Some(first) = records.first() else {
        return Vec::new();
    };
    let k = first.centers_after.len();
    let mut epochs = Vec::new();
    let mut start = 0;
    let mut seen: Vec<Vec<&Point>> = vec![Vec::new(); k];
    for (r, record) in records.iter().enumerate() {
        let overflow = record
            .centers_after
            .iter()
            .zip(&seen)
            .any(|(c, s)| s.len() == 2 && !s.iter().any(|q| q.bit_eq(c)));
        if overflow {
            epochs.push(Epoch {
                start,
                end: r - 1,
                distinct_positions: seen.iter().map(Vec::len).collect(),
            });
            start = r;
            seen.iter_mut().for_each(Vec::clear);
        }
        for (c, s) in record.centers_after.iter().zip(seen.iter_mut()) {
            if !s.iter().any(|q| q.bit_eq(c)) {
                s.push(c);
            }
        }
    }
    epochs.push(Epoch {
        start,
        end: records.len() - 1,
        distinct_positions: seen.iter().map(Vec::len).collect(),
    });
    epochs
}

/// Invariant checks over one trace.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Audit {
    pub iterations: usize,
    pub monotone_violations: Vec<usize>,
    pub movement_violations: Vec<usize>,
    pub strict_progress_violations: Vec<usize>,
    pub long_epochs: Vec<(usize, usize)>,
    pub epochs_of_limit_length: usize,
    pub max_epoch_length: usize,
    pub repeated_clusterings: usize,
}

impl Audit {
    pub fn is_clean(&self) -> bool {
        self.monotone_violations.is_empty()
            && self.movement_violations.is_empty()
            && self.long_epochs.is_empty()
            && self.repeated_clusterings == 0
    }

    pub fn describe(&self) -> String {
        format!(
            "monotone={:?} movement={:?} long_epochs={:?} repeats={}",
            self.monotone_violations, self.movement_violations, self.long_epochs, self.repeated_clusterings
        )
    }
}

pub fn audit(trace: &RunTrace) -> Audit {
    let mut report = Audit {
        iterations: trace.records.len(),
        ..Audit::default()
    };
    for r in &trace.records {
        let tol = r.tolerance();
        if r.drop < -tol {
            report.monotone_violations.push(r.iteration);
        }
        let m = r.max_movement();
        if r.drop < m * m - tol {
            report.movement_violations.push(r.iteration);
        }
        if !r.reassigned.is_empty() && r.drop <= 0.0 {
            report.strict_progress_violations.push(r.iteration);
        }
    }
    for e in detect_epochs(&trace.records) {
        report.max_epoch_length = report.max_epoch_length.max(e.len());
        if e.len() > EPOCH_LENGTH_LIMIT {
            report.long_epochs.push((e.start, e.end));
        } else if e.len() == EPOCH_LENGTH_LIMIT {
            report.epochs_of_limit_length += 1;
        }
    }
    // consecutive equal digests are one clustering persisting across a center update
    let mut seen = HashSet::new();
    let mut last = None;
    let digests = std::iter::once(trace.initial_digest).chain(trace.records.iter().map(|r| r.assignment_digest));
    for h in digests {
        if last == Some(h) {
            continue;
        }
        if !seen.insert(h) {
            report.repeated_clusterings += 1;
        }
        last = Some(h);
    }
    report
}

impl fmt::Display for Termination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Termination::Converged => write!(f, "Converged"),
            Termination::MaxIterations => write!(f, "MaxIterations"),
        }
    }
}

/// First line of a trace file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceHeader {
    pub format: String,
    pub version: u32,
    pub n: usize,
    pub k: usize,
    pub d: usize,
    pub init_method: String,
    pub seed: u64,
    pub termination: Termination,
    pub iterations: usize,
    pub initial_centers: Vec<Point>,
    pub initial_digest: u64,
}

pub const TRACE_FORMAT: &str = "lloydlab-trace";

/// Header line, then one JSON record per line.
pub fn write_trace<W: Write>(mut out: W, instance: &Instance, trace: &RunTrace) -> Result<()> {
    let header = TraceHeader {
        format: TRACE_FORMAT.into(),
        version: 1,
        n: instance.n(),
        k: trace.final_state.k(),
        d: instance.dim(),
        init_method: trace.init_method.clone(),
        seed: trace.seed,
        termination: trace.termination,
        iterations: trace.records.len(),
        initial_centers: trace.initial_centers.clone(),
        initial_digest: trace.initial_digest,
    };
    serde_json::to_writer(&mut out, &header)?;
    out.write_all(b"\n")?;
    for r in &trace.records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_trace<R: BufRead>(input: R) -> Result<(TraceHeader, Vec<IterationRecord>)> {
    let mut lines = input.lines();
    let header: TraceHeader = match lines.next() {
        Some(line) => serde_json::from_str(&line?)?,
        None => return Err(LabError::Parse("empty trace file".into())),
    };
    if header.format != TRACE_FORMAT {
        return Err(LabError::Parse(format!("not a trace file: format `{}`", header.format)));
    }
    let mut records = Vec::with_capacity(header.iterations);
    for line in lines {
        let line = line?;
        if !line.trim().is_empty() {
            records.push(serde_json::from_str(&line)?);
        }
    }
    if records.len() != header.iterations {
        return Err(LabError::Parse(format!(
            "header announces {} records, found {}",
            header.iterations,
            records.len()
        )));
    }
    Ok((header, records))
}
