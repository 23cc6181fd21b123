//! Invariant bookkeeping for every state an experiment builds.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use repeater_core::metrics::negativity;
use repeater_core::DensityMatrix;

pub const HERMITIAN_TOL: f64 = 1e-12;
pub const PSD_TOL: f64 = 1e-10;
pub const TRACE_TOL: f64 = 1e-10;
pub const PARTY_SYMMETRY_TOL: f64 = 1e-10;

#[derive(Debug, Default)]
pub struct InvariantAudit {
    checked: AtomicUsize,
    failures: Mutex<Vec<String>>,
}

impl InvariantAudit {
    pub fn new() -> Self {
        Self::default()
    }

    /// Hermiticity, positivity and trace bounds; for bipartite states also
    /// equal negativity across the two partial transposes.
    pub fn record(&self, context: &str, rho: &DensityMatrix) {
        self.checked.fetch_add(1, Ordering::Relaxed);
        if let Err(msg) = Self::inspect(rho) {
            self.failures.lock().expect("audit lock").push(format!("{context}: {msg}"));
        }
    }

    fn inspect(rho: &DensityMatrix) -> Result<(), String> {
        let herm = rho.matrix().hermiticity_deviation();
        if herm > HERMITIAN_TOL {
            return Err(format!("hermiticity deviation {herm:.3e}"));
        }
        let trace = rho.trace();
        if trace < -TRACE_TOL || trace > 1.0 + TRACE_TOL {
            return Err(format!("trace {trace} outside [0, 1]"));
        }
        if rho.is_normalized() && (trace - 1.0).abs() > TRACE_TOL {
            return Err(format!("normalized state has trace {trace}"));
        }
        let eigen = rho.eigenvalues().map_err(|e| e.to_string())?;
        let min = eigen.iter().copied().fold(f64::INFINITY, f64::min);
        if min < -PSD_TOL {
            return Err(format!("eigenvalue {min:.3e} below -{PSD_TOL:e}"));
        }
        if rho.dims().len() == 2 && trace > 0.0 {
            let norm = rho.normalize().map_err(|e| e.to_string())?;
            let a = negativity(&norm, 0).map_err(|e| e.to_string())?;
            let b = negativity(&norm, 1).map_err(|e| e.to_string())?;
            if (a - b).abs() > PARTY_SYMMETRY_TOL {
                return Err(format!("negativity {a} vs {b} across parties"));
            }
        }
        Ok(())
    }

    pub fn checked(&self) -> usize {
        self.checked.load(Ordering::Relaxed)
    }

    pub fn failures(&self) -> Vec<String> {
        self.failures.lock().expect("audit lock").clone()
    }
}
