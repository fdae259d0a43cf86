//! Parameter sweeps over `(n, k, d, sigma)` grids.
//!
//! Seeds are derived per run from the config alone:
//! `cell_seed = hash_words(base_seed, [n, k, d, sigma.to_bits()])` and
//! `trial_seed = derive_seed(cell_seed, trial)`. From the trial seed, stream 0
//! draws random means, stream 1 the perturbation and stream 2 the initial
//! centers. Cells and trials can therefore run in any order or in parallel.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::engine::{audit, detect_epochs, run, write_trace, InitMethod, RunConfig, RunTrace, Termination};
use crate::error::{LabError, Result};
use crate::exec::Exec;
use crate::io::load_points;
use crate::model::Instance;
use crate::perturbation::{perturb, MeanGenerator};
use crate::rng::{derive_seed, hash_words};

pub const SWEEP_SCHEMA: u32 = 1;

pub const CSV_COLUMNS: [&str; 14] = [
    "n",
    "k",
    "d",
    "sigma",
    "trials",
    "iters_mean",
    "iters_median",
    "iters_max",
    "iters_min",
    "final_potential_mean",
    "frac_capped",
    "max_epoch_mean",
    "min_delta_mean",
    "seed",
];

fn default_means() -> String {
    "uniform-grid".into()
}

fn default_init() -> String {
    "uniform-points".into()
}

fn default_max_iterations() -> usize {
    crate::engine::DEFAULT_MAX_ITERATIONS
}

/// Sweep description, read from TOML.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub schema: u32,
    pub n: Vec<usize>,
    pub k: Vec<usize>,
    pub d: Vec<usize>,
    pub sigma: Vec<f64>,
    pub trials: usize,
    #[serde(default = "default_means")]
    pub means: String,
    /// JSON array of means, required when `means = "from-file"`.
    #[serde(default)]
    pub means_file: Option<PathBuf>,
    #[serde(default = "default_init")]
    pub init: String,
    #[serde(default = "default_max_iterations")]
    pub max_iterations: usize,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default)]
    pub output: Option<PathBuf>,
    /// Directory receiving one trace file per run.
    #[serde(default)]
    pub trace_dir: Option<PathBuf>,
}

impl SweepConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: SweepConfig = toml::from_str(text).map_err(|e| LabError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| LabError::Io(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema != SWEEP_SCHEMA {
            return Err(LabError::Parse(format!(
                "unsupported sweep schema {} (expected {SWEEP_SCHEMA})",
                self.schema
            )));
        }
        for (name, empty) in [
            ("n", self.n.is_empty()),
            ("k", self.k.is_empty()),
            ("d", self.d.is_empty()),
            ("sigma", self.sigma.is_empty()),
        ] {
            if empty {
                return Err(LabError::InvalidParameter(format!("grid `{name}` is empty")));
            }
        }
        if self.trials == 0 {
            return Err(LabError::InvalidParameter("trials must be at least 1".into()));
        }
        if self.max_iterations == 0 {
            return Err(LabError::InvalidParameter("max_iterations must be at least 1".into()));
        }
        let min_n = *self.n.iter().min().unwrap();
        if let Some(k) = self.k.iter().find(|&&k| k == 0 || k > min_n) {
            return Err(LabError::InvalidParameter(format!(
                "k = {k} is infeasible for n = {min_n}"
            )));
        }
        if self.d.contains(&0) {
            return Err(LabError::InvalidParameter("d must be at least 1".into()));
        }
        if let Some(s) = self.sigma.iter().find(|s| !(**s > 0.0 && s.is_finite())) {
            return Err(LabError::InvalidSigma(*s));
        }
        self.init_method()?;
        if self.means != "from-file" {
            self.means.parse::<MeanGenerator>()?;
        } else if self.means_file.is_none() {
            return Err(LabError::MissingField("means_file"));
        }
        Ok(())
    }

    fn init_method(&self) -> Result<InitMethod> {
        self.init.parse()
    }

    fn mean_generator(&self) -> Result<MeanGenerator> {
        if self.means == "from-file" {
            let path = self.means_file.as_ref().ok_or(LabError::MissingField("means_file"))?;
            Ok(MeanGenerator::Fixed(load_points(path)?))
        } else {
            self.means.parse()
        }
    }

    /// Cells in row order: `n`, then `k`, `d`, `sigma`.
    pub fn cells(&self) -> Vec<Cell> {
        let mut cells = Vec::new();
        for &n in &self.n {
            for &k in &self.k {
                for &d in &self.d {
                    for &sigma in &self.sigma {
                        cells.push(Cell { n, k, d, sigma });
                    }
                }
            }
        }
        cells
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Cell {
    pub n: usize,
    pub k: usize,
    pub d: usize,
    pub sigma: f64,
}

impl Cell {
    pub fn seed(&self, base_seed: u64) -> u64 {
        hash_words(
            base_seed,
            &[self.n as u64, self.k as u64, self.d as u64, self.sigma.to_bits()],
        )
    }

    fn label(&self) -> String {
        format!("n={} k={} d={} sigma={}", self.n, self.k, self.d, self.sigma)
    }
}

/// The perturbed instance and run configuration for one trial of a cell.
pub fn trial_setup(
    cell: &Cell,
    trial: usize,
    base_seed: u64,
    means: &MeanGenerator,
    init: &InitMethod,
    max_iterations: usize,
) -> Result<(Instance, RunConfig)> {
    let trial_seed = derive_seed(cell.seed(base_seed), trial as u64);
    let centers = means.generate(cell.n, cell.d, derive_seed(trial_seed, 0))?;
    let instance = perturb(&centers, cell.sigma, derive_seed(trial_seed, 1))?;
    let cfg = RunConfig::new(cell.k, init.clone(), derive_seed(trial_seed, 2)).max_iterations(max_iterations);
    Ok((instance, cfg))
}

/// Per-run quantities the aggregate is built from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RunSummary {
    pub iterations: usize,
    pub final_potential: f64,
    pub capped: bool,
    pub max_epoch: usize,
    pub min_delta: Option<f64>,
}

impl RunSummary {
    pub fn of(trace: &RunTrace) -> Self {
        Self {
            iterations: trace.iterations(),
            final_potential: trace.final_potential(),
            capped: trace.termination == Termination::MaxIterations,
            max_epoch: detect_epochs(&trace.records).iter().map(|e| e.len()).max().unwrap_or(0),
            min_delta: trace.min_delta(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CellStats {
    pub iters_mean: f64,
    pub iters_median: f64,
    pub iters_max: f64,
    pub iters_min: f64,
    pub final_potential_mean: f64,
    pub frac_capped: f64,
    pub max_epoch_mean: f64,
    /// Mean over runs that had at least two live centers; NaN when none did.
    pub min_delta_mean: f64,
}

impl CellStats {
    fn aborted() -> Self {
        Self {
            iters_mean: f64::NAN,
            iters_median: f64::NAN,
            iters_max: f64::NAN,
            iters_min: f64::NAN,
            final_potential_mean: f64::NAN,
            frac_capped: f64::NAN,
            max_epoch_mean: f64::NAN,
            min_delta_mean: f64::NAN,
        }
    }
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (sum, count) = xs.fold((0.0, 0usize), |(s, c), x| (s + x, c + 1));
    if count == 0 {
        f64::NAN
    } else {
        sum / count as f64
    }
}

pub fn aggregate(runs: &[RunSummary]) -> Result<CellStats> {
    if runs.is_empty() {
        return Err(LabError::InvalidParameter("cannot aggregate zero runs".into()));
    }
    let mut iters: Vec<usize> = runs.iter().map(|r| r.iterations).collect();
    iters.sort_unstable();
    let m = iters.len();
    let median = if m % 2 == 1 {
        iters[m / 2] as f64
    } else {
        (iters[m / 2 - 1] + iters[m / 2]) as f64 / 2.0
    };
    Ok(CellStats {
        iters_mean: mean(iters.iter().map(|&i| i as f64)),
        iters_median: median,
        iters_max: iters[m - 1] as f64,
        iters_min: iters[0] as f64,
        final_potential_mean: mean(runs.iter().map(|r| r.final_potential)),
        frac_capped: runs.iter().filter(|r| r.capped).count() as f64 / m as f64,
        max_epoch_mean: mean(runs.iter().map(|r| r.max_epoch as f64)),
        min_delta_mean: mean(runs.iter().filter_map(|r| r.min_delta)),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub cell: Cell,
    pub trials: usize,
    pub stats: CellStats,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellDiagnostic {
    pub cell: Cell,
    pub trial: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    /// Cells whose statistics were withheld because a run broke an invariant.
    pub diagnostics: Vec<CellDiagnostic>,
}

fn trace_file_name(cell: &Cell, trial: usize) -> String {
    format!(
        "n{}_k{}_d{}_sigma{}_trial{}.jsonl",
        cell.n, cell.k, cell.d, cell.sigma, trial
    )
}

/// Run every `(cell, trial)`, auditing each trace, and aggregate per cell.
pub fn run_sweep(config: &SweepConfig, exec: Exec) -> Result<SweepResult> {
    config.validate()?;
    let means = config.mean_generator()?;
    let init = config.init_method()?;
    let cells = config.cells();
    if let Some(dir) = &config.trace_dir {
        fs::create_dir_all(dir).map_err(|e| LabError::Io(format!("{}: {e}", dir.display())))?;
    }
    let jobs = cells.len() * config.trials;
    let outcomes = exec.map_indexed(jobs, |job| -> Result<(RunSummary, Option<String>)> {
        let (cell, trial) = (&cells[job / config.trials], job % config.trials);
        let (instance, cfg) = trial_setup(cell, trial, config.base_seed, &means, &init, config.max_iterations)
            .map_err(|e| LabError::InvalidParameter(format!("{}: {e}", cell.label())))?;
        let trace = run(&instance, &cfg).map_err(|e| LabError::InvalidParameter(format!("{}: {e}", cell.label())))?;
        if let Some(dir) = &config.trace_dir {
            let path = dir.join(trace_file_name(cell, trial));
            let file =
                File::create(&path).map_err(|e| LabError::Io(format!("{} ({}): {e}", path.display(), cell.label())))?;
            write_trace(BufWriter::new(file), &instance, &trace)?;
        }
        let report = audit(&trace);
        let diagnostic = (!report.is_clean()).then(|| report.describe());
        Ok((RunSummary::of(&trace), diagnostic))
    });

    let mut rows = Vec::with_capacity(cells.len());
    let mut diagnostics = Vec::new();
    let mut outcomes = outcomes.into_iter();
    for cell in &cells {
        let mut summaries = Vec::with_capacity(config.trials);
        let mut broken = false;
        for trial in 0..config.trials {
            let (summary, diagnostic) = outcomes.next().expect("one outcome per job")?;
            if let Some(message) = diagnostic {
                log::error!("{} trial {trial}: invariant violated: {message}", cell.label());
                diagnostics.push(CellDiagnostic {
                    cell: *cell,
                    trial,
                    message,
                });
                broken = true;
            }
            summaries.push(summary);
        }
        let stats = if broken {
            CellStats::aborted()
        } else {
            aggregate(&summaries)?
        };
        rows.push(SweepRow {
            cell: *cell,
            trials: config.trials,
            stats,
            seed: cell.seed(config.base_seed),
        });
    }
    Ok(SweepResult { rows, diagnostics })
}

/// Results as CSV with the columns in [`CSV_COLUMNS`].
pub fn write_results<W: Write>(out: W, rows: &[SweepRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_COLUMNS)?;
    for r in rows {
        let s = &r.stats;
        w.write_record([
            r.cell.n.to_string(),
            r.cell.k.to_string(),
            r.cell.d.to_string(),
            r.cell.sigma.to_string(),
            r.trials.to_string(),
            s.iters_mean.to_string(),
            s.iters_median.to_string(),
            s.iters_max.to_string(),
            s.iters_min.to_string(),
            s.final_potential_mean.to_string(),
            s.frac_capped.to_string(),
            s.max_epoch_mean.to_string(),
            s.min_delta_mean.to_string(),
            r.seed.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_results_file(path: &Path, rows: &[SweepRow]) -> Result<()> {
    let file = File::create(path).map_err(|e| LabError::Io(format!("{}: {e}", path.display())))?;
    write_results(BufWriter::new(file), rows)
}
