//! Experiment configuration.
//!
//! Configs are TOML files. Every key is optional and unknown keys are
//! rejected. Grammar:
//!
//! ```toml
//! seed = 1                  # master RNG seed
//! repetitions = 15          # sampled chain runs per point
//! output = "out.csv"        # default output path
//! mean_n = 0.5              # TMSV photon number for register scans
//! qubits = [1, 2, 3, 4]     # register sizes N for register scans
//!
//! [sweep]                   # overrides the experiment's native axis
//! variable = "theta"        # theta | eta_r | segments
//! start = 0.0
//! stop = 1.5707963267948966
//! steps = 61
//!
//! [plan]
//! segment_km = 10.0
//! loss_db_per_km = 0.2
//! attempts = [10.0, 50.0, 100.0, 500.0]
//!
//! [errors]
//! segment_km = 60.0
//! attempts = 500.0
//! max_segments = 10
//! cutoff = 12
//! coupling_loss = [0.0, 0.01, 0.05]
//! dark_counts = [0.0, 1e-5, 5e-5, 1e-4, 1e-3]
//! detector_loss = [0.0, 0.005, 0.01, 0.05]
//! ch_l_loss = [0.0, 0.01, 0.05]
//!
//! [optimizer]
//! grid = 40
//! tol = 1e-6
//!
//! [scan]
//! segment_km = [5.0, 10.0, 15.0, 20.0, 30.0, 40.0, 60.0]
//! attempts = 100.0
//! max_distance_km = 600.0
//! ```

use std::f64::consts::FRAC_PI_2;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{AppError, AppResult};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub repetitions: usize,
    pub output: Option<PathBuf>,
    pub mean_n: f64,
    pub qubits: Vec<usize>,
    pub sweep: Option<SweepAxis>,
    pub plan: PlanConfig,
    pub errors: ErrorSweepConfig,
    pub optimizer: OptimizerConfig,
    pub scan: SegmentScanConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepAxis {
    pub variable: String,
    pub start: f64,
    pub stop: f64,
    pub steps: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlanConfig {
    pub segment_km: f64,
    pub loss_db_per_km: f64,
    pub attempts: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ErrorSweepConfig {
    pub segment_km: f64,
    pub attempts: f64,
    pub max_segments: usize,
    pub cutoff: usize,
    pub coupling_loss: Vec<f64>,
    pub dark_counts: Vec<f64>,
    pub detector_loss: Vec<f64>,
    pub ch_l_loss: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizerConfig {
    /// Coarse grid points used to bracket the maximum.
    pub grid: usize,
    /// Golden-section tolerance in radians.
    pub tol: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SegmentScanConfig {
    pub segment_km: Vec<f64>,
    pub attempts: f64,
    pub max_distance_km: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            repetitions: 15,
            output: None,
            mean_n: 0.5,
            qubits: vec![1, 2, 3, 4],
            sweep: None,
            plan: PlanConfig::default(),
            errors: ErrorSweepConfig::default(),
            optimizer: OptimizerConfig::default(),
            scan: SegmentScanConfig::default(),
        }
    }
}

impl Default for PlanConfig {
    fn default() -> Self {
        Self { segment_km: 10.0, loss_db_per_km: 0.2, attempts: vec![10.0, 50.0, 100.0, 500.0] }
    }
}

impl Default for ErrorSweepConfig {
    fn default() -> Self {
        Self {
            segment_km: 60.0,
            attempts: 500.0,
            max_segments: 10,
            cutoff: 12,
            coupling_loss: vec![0.0, 0.01, 0.05],
            dark_counts: vec![0.0, 1e-5, 5e-5, 1e-4, 1e-3],
            detector_loss: vec![0.0, 0.005, 0.01, 0.05],
            ch_l_loss: vec![0.0, 0.01, 0.05],
        }
    }
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self { grid: 40, tol: 1e-6 }
    }
}

impl Default for SegmentScanConfig {
    fn default() -> Self {
        Self { segment_km: vec![5.0, 10.0, 15.0, 20.0, 30.0, 40.0, 60.0], attempts: 100.0, max_distance_km: 600.0 }
    }
}

impl SweepAxis {
    pub fn new(variable: &str, start: f64, stop: f64, steps: usize) -> Self {
        Self { variable: variable.to_string(), start, stop, steps }
    }

    pub fn values(&self) -> Vec<f64> {
        if self.steps == 1 {
            return vec![self.start];
        }
        let step = (self.stop - self.start) / (self.steps - 1) as f64;
        (0..self.steps).map(|i| if i + 1 == self.steps { self.stop } else { self.start + step * i as f64 }).collect()
    }

    fn validate(&self) -> AppResult<()> {
        if !["theta", "eta_r", "segments"].contains(&self.variable.as_str()) {
            return Err(AppError::Config(format!("unknown sweep variable {:?}", self.variable)));
        }
        if !self.start.is_finite() || !self.stop.is_finite() {
            return Err(AppError::Config("sweep bounds must be finite".into()));
        }
        if self.steps == 0 {
            return Err(AppError::Config("sweep needs at least one step".into()));
        }
        let (lo, hi) = match self.variable.as_str() {
            "theta" => (0.0, FRAC_PI_2),
            "eta_r" => (0.0, 1.0),
            _ => (1.0, 10_000.0),
        };
        if self.start.min(self.stop) < lo || self.start.max(self.stop) > hi {
            return Err(AppError::Config(format!("sweep of {} must stay within [{lo}, {hi}]", self.variable)));
        }
        if self.variable == "segments" && (self.start.fract() != 0.0 || self.stop.fract() != 0.0) {
            return Err(AppError::Config("segment sweep bounds must be integers".into()));
        }
        Ok(())
    }
}

fn unit_interval(name: &str, values: &[f64]) -> AppResult<()> {
    match values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        Some(v) => Err(AppError::Config(format!("{name} value {v} outside [0, 1]"))),
        None => Ok(()),
    }
}

fn positive(name: &str, v: f64) -> AppResult<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(AppError::Config(format!("{name} = {v} must be positive and finite")))
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> AppResult<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| AppError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> AppResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| AppError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn validate(&self) -> AppResult<()> {
        if self.repetitions == 0 {
            return Err(AppError::Config("repetitions must be >= 1".into()));
        }
        positive("mean_n", self.mean_n)?;
        if self.qubits.is_empty() || self.qubits.iter().any(|&n| n == 0 || n > 8) {
            return Err(AppError::Config("qubits must be a non-empty list of values in 1..=8".into()));
        }
        if let Some(s) = &self.sweep {
            s.validate()?;
        }
        positive("plan.segment_km", self.plan.segment_km)?;
        if !(self.plan.loss_db_per_km >= 0.0 && self.plan.loss_db_per_km.is_finite()) {
            return Err(AppError::Config("plan.loss_db_per_km must be >= 0".into()));
        }
        if self.plan.attempts.is_empty() || self.plan.attempts.iter().any(|&a| !(a >= 1.0 && a.is_finite())) {
            return Err(AppError::Config("plan.attempts must be a non-empty list of values >= 1".into()));
        }
        let e = &self.errors;
        positive("errors.segment_km", e.segment_km)?;
        if !(e.attempts >= 1.0 && e.attempts.is_finite()) {
            return Err(AppError::Config("errors.attempts must be >= 1".into()));
        }
        if e.max_segments == 0 || e.max_segments > 14 {
            return Err(AppError::Config("errors.max_segments must be in 1..=14".into()));
        }
        if e.cutoff < 2 {
            return Err(AppError::Config("errors.cutoff must be >= 2".into()));
        }
        unit_interval("errors.coupling_loss", &e.coupling_loss)?;
        unit_interval("errors.dark_counts", &e.dark_counts)?;
        unit_interval("errors.detector_loss", &e.detector_loss)?;
        unit_interval("errors.ch_l_loss", &e.ch_l_loss)?;
        if self.optimizer.grid < 3 {
            return Err(AppError::Config("optimizer.grid must be >= 3".into()));
        }
        positive("optimizer.tol", self.optimizer.tol)?;
        if self.scan.segment_km.is_empty() {
            return Err(AppError::Config("scan.segment_km must not be empty".into()));
        }
        for &l in &self.scan.segment_km {
            positive("scan.segment_km", l)?;
        }
        if !(self.scan.attempts >= 1.0 && self.scan.attempts.is_finite()) {
            return Err(AppError::Config("scan.attempts must be >= 1".into()));
        }
        positive("scan.max_distance_km", self.scan.max_distance_km)?;
        Ok(())
    }

    /// The configured sweep if it matches `variable`, else `default`.
    pub fn axis(&self, variable: &str, default: SweepAxis) -> AppResult<SweepAxis> {
        match &self.sweep {
            Some(s) if s.variable == variable => Ok(s.clone()),
            Some(s) => Err(AppError::Config(format!("this experiment sweeps {variable}, config sweeps {}", s.variable))),
            None => Ok(default),
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// SHA-256 of the canonical TOML form, hex encoded.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_toml().as_bytes()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_is_default() {
        assert_eq!(ExperimentConfig::from_toml_str("").unwrap(), ExperimentConfig::default());
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(matches!(ExperimentConfig::from_toml_str("sed = 3"), Err(AppError::Config(_))));
        assert!(matches!(ExperimentConfig::from_toml_str("[plan]\nsegment = 3.0"), Err(AppError::Config(_))));
    }

    #[test]
    fn round_trip_and_hash() {
        let cfg = ExperimentConfig::from_toml_str(
            "seed = 9\nrepetitions = 3\n[sweep]\nvariable = \"eta_r\"\nstart = 0.1\nstop = 1.0\nsteps = 4\n",
        )
        .unwrap();
        let back = ExperimentConfig::from_toml_str(&cfg.to_toml()).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.hash(), cfg.hash());
        assert_ne!(cfg.hash(), ExperimentConfig::default().hash());
        assert_eq!(cfg.hash().len(), 64);
    }

    #[test]
    fn invalid_values_rejected() {
        for bad in [
            "repetitions = 0",
            "[sweep]\nvariable = \"theta\"\nstart = 0.0\nstop = 2.0\nsteps = 5",
            "[sweep]\nvariable = \"theta\"\nstart = 0.0\nstop = 1.0\nsteps = 0",
            "[sweep]\nvariable = \"omega\"\nstart = 0.0\nstop = 1.0\nsteps = 3",
            "[errors]\ndark_counts = [1.5]",
            "[plan]\nattempts = [0.5]",
        ] {
            assert!(ExperimentConfig::from_toml_str(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn sweep_values_hit_both_ends() {
        let v = SweepAxis::new("eta_r", 0.1, 1.0, 4).values();
        assert_eq!(v.len(), 4);
        assert_eq!(v[0], 0.1);
        assert_eq!(v[3], 1.0);
        assert!((v[1] - 0.4).abs() < 1e-15);
    }
}
