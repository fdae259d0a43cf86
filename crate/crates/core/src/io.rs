//! Instance files.
//!
//! JSON object with `format`, `version`, `dim`, `n` and any of `means`,
//! `sigma`, `seed`, `points`. When `points` is present the realized
//! coordinates are used as-is; otherwise `means` are perturbed with
//! `sigma` and `seed`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::model::{Instance, Point};
use crate::perturbation::{perturb, PerturbationMeta, DEFAULT_KAPPA};

pub const INSTANCE_FORMAT: &str = "lloydlab-instance";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceFile {
    pub format: String,
    pub version: u32,
    pub dim: usize,
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub means: Option<Vec<Point>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points: Option<Vec<Point>>,
}

impl InstanceFile {
    pub fn from_instance(instance: &Instance) -> Self {
        let meta = instance.meta();
        Self {
            format: INSTANCE_FORMAT.into(),
            version: 1,
            dim: instance.dim(),
            n: instance.n(),
            means: meta.map(|m| m.means.clone()),
            sigma: meta.map(|m| m.sigma),
            seed: meta.map(|m| m.seed),
            points: Some(instance.points().to_vec()),
        }
    }

    pub fn means_only(means: Vec<Point>) -> Self {
        Self {
            format: INSTANCE_FORMAT.into(),
            version: 1,
            dim: means.first().map_or(0, Point::dim),
            n: means.len(),
            means: Some(means),
            sigma: None,
            seed: None,
            points: None,
        }
    }

    fn check_shape(&self, points: &[Point], what: &'static str) -> Result<()> {
        if points.len() != self.n {
            return Err(LabError::LengthMismatch {
                what,
                expected: self.n,
                found: points.len(),
            });
        }
        if let Some(p) = points.iter().find(|p| p.dim() != self.dim) {
            return Err(LabError::DimensionMismatch {
                expected: self.dim,
                found: p.dim(),
            });
        }
        Ok(())
    }

    /// Realize the instance; `sigma`/`seed` override the file's values.
    pub fn realize(&self, sigma: Option<f64>, seed: Option<u64>) -> Result<Instance> {
        if self.format != INSTANCE_FORMAT {
            return Err(LabError::Parse(format!(
                "not an instance file: format `{}`",
                self.format
            )));
        }
        if let Some(means) = &self.means {
            self.check_shape(means, "means")?;
        }
        if let Some(points) = &self.points {
            self.check_shape(points, "points")?;
            let inst = Instance::new(points.clone())?;
            return Ok(match (&self.means, self.sigma, self.seed) {
                (Some(means), Some(sigma), Some(seed)) => inst.with_meta(PerturbationMeta {
                    means: means.clone(),
                    sigma,
                    seed,
                    kappa: DEFAULT_KAPPA,
                    hypercube: None,
                }),
                _ => inst,
            });
        }
        let means = self
            .means
            .as_ref()
            .ok_or_else(|| LabError::Parse("instance file has neither points nor means".into()))?;
        let sigma = sigma.or(self.sigma).ok_or(LabError::MissingField("sigma"))?;
        let seed = seed.or(self.seed).ok_or(LabError::MissingField("seed"))?;
        perturb(means, sigma, seed)
    }
}

pub fn read_instance_file(path: &Path) -> Result<InstanceFile> {
    let file = File::open(path).map_err(|e| LabError::Io(format!("{}: {e}", path.display())))?;
    Ok(serde_json::from_reader(BufReader::new(file))?)
}

pub fn load_instance(path: &Path) -> Result<Instance> {
    read_instance_file(path)?.realize(None, None)
}

pub fn save_instance(path: &Path, instance: &Instance) -> Result<()> {
    let file = File::create(path).map_err(|e| LabError::Io(format!("{}: {e}", path.display())))?;
    let mut out = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut out, &InstanceFile::from_instance(instance))?;
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(())
}

/// A bare JSON array of points, used for explicit initial centers.
pub fn load_points(path: &Path) -> Result<Vec<Point>> {
    let file = File::open(path).map_err(|e| LabError::Io(format!("{}: {e}", path.display())))?;
    Ok(serde_json::from_reader(BufReader::new(file))?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn realized_points_skip_perturbation() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("inst.json");
        let means = vec![Point::new(vec![0.2, 0.4]).unwrap(), Point::new(vec![0.9, 0.1]).unwrap()];
        let inst = perturb(&means, 0.1, 5).unwrap();
        save_instance(&path, &inst).unwrap();
        let loaded = load_instance(&path).unwrap();
        assert_eq!(loaded.points(), inst.points());
        assert_eq!(loaded.meta().unwrap().seed, 5);
    }

    #[test]
    fn means_file_is_perturbed() {
        let means = vec![Point::new(vec![0.5]).unwrap(); 3];
        let f = InstanceFile::means_only(means.clone());
        assert_eq!(f.realize(None, Some(1)), Err(LabError::MissingField("sigma")));
        let a = f.realize(Some(0.2), Some(1)).unwrap();
        assert_eq!(a, perturb(&means, 0.2, 1).unwrap());
    }

    #[test]
    fn shape_errors() {
        let mut f = InstanceFile::means_only(vec![Point::new(vec![0.5]).unwrap(); 3]);
        f.n = 4;
        assert!(f.realize(Some(0.1), Some(1)).is_err());
        let text = r#"{"format":"lloydlab-instance","version":1,"dim":1,"n":1,"points":[[1.0, 2.0]]}"#;
        let f: InstanceFile = serde_json::from_str(text).unwrap();
        assert!(f.realize(None, None).is_err());
    }
}
