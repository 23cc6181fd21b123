//! Entanglement and key-distribution figures of merit for two-party states.

use std::f64::consts::SQRT_2;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{entropy_bits, hermitian_eigenvalues, ops, ComplexMatrix, DensityMatrix, TRACE_TOL};
use crate::register::{loss_amp, tmsv_amplitude, TmsvParams};

/// Tsirelson's bound 2√2.
pub const TSIRELSON: f64 = 2.0 * SQRT_2;

fn check_normalized(rho: &DensityMatrix) -> Result<()> {
    let trace = rho.trace();
    if (trace - 1.0).abs() > TRACE_TOL {
        return Err(Error::NotNormalized { trace });
    }
    Ok(())
}

fn check_bipartite(rho: &DensityMatrix) -> Result<()> {
    if rho.dims().len() != 2 {
        return Err(Error::DimensionMismatch(format!("expected a bipartite state, got dims {:?}", rho.dims())));
    }
    Ok(())
}

fn check_two_qubits(rho: &DensityMatrix) -> Result<()> {
    if rho.dims() != [2, 2] {
        return Err(Error::DimensionMismatch(format!("expected two qubits, got dims {:?}", rho.dims())));
    }
    check_normalized(rho)
}

/// |Σ of negative eigenvalues| of the partial transpose on `party`.
pub fn negativity(rho: &DensityMatrix, party: usize) -> Result<f64> {
    check_bipartite(rho)?;
    check_normalized(rho)?;
    let pt = rho.partial_transpose(party)?;
    Ok(negative_part(&hermitian_eigenvalues(&pt)?))
}

fn negative_part(eigenvalues: &[f64]) -> f64 {
    -eigenvalues.iter().filter(|&&v| v < 0.0).sum::<f64>()
}

/// Negativity of a pure state from its Schmidt amplitudes,
/// ((Σ|λ_k|)² − 1)/2 after normalizing Σ|λ_k|² to one.
pub fn pure_state_negativity(schmidt: &[Complex64]) -> Result<f64> {
    let norm: f64 = schmidt.iter().map(|c| c.norm_sqr()).sum();
    if norm <= 0.0 {
        return Err(Error::ZeroTrace("empty Schmidt vector".into()));
    }
    let l1: f64 = schmidt.iter().map(|c| c.norm()).sum::<f64>() / norm.sqrt();
    Ok(((l1 * l1 - 1.0) / 2.0).max(0.0))
}

/// Negativity of a TMSV state after pure loss η_a, η_b on its two modes,
/// truncated at `cutoff` photons per mode.
///
/// Loss preserves the photon-number difference of the two modes, so the
/// partial transpose is block diagonal in the total photon number `i + j`
/// of the transposed indices. Each block is diagonalized separately.
pub fn lossy_tmsv_negativity(p: &TmsvParams, eta_a: f64, eta_b: f64, cutoff: usize) -> Result<f64> {
    p.validate()?;
    let c: Vec<Complex64> = (0..=cutoff).map(|n| tmsv_amplitude(n, p)).collect();
    let eps = |eta: f64| -> Result<Vec<Vec<f64>>> {
        (0..=cutoff).map(|n| (0..=n).map(|l| loss_amp(n, l, eta)).collect()).collect()
    };
    let ea = eps(eta_a)?;
    let eb = eps(eta_b)?;
    // ⟨i,j|ρ|i',j'⟩ with i − j = i' − j'; l photons lost from a.
    let element = |i: usize, j: usize, i2: usize, j2: usize| -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for l in 0..=cutoff {
            let (n, m) = (i + l, i2 + l);
            if n > cutoff || m > cutoff {
                break;
            }
            if n < j || m < j2 {
                continue;
            }
            let (r, r2) = (n - j, m - j2);
            if r != r2 {
                continue;
            }
            acc += c[n] * c[m].conj() * ea[n][l] * ea[m][l] * eb[n][r] * eb[m][r];
        }
        acc
    };
    let mut trace = 0.0;
    let mut neg = 0.0;
    for total in 0..=2 * cutoff {
        let lo = total.saturating_sub(cutoff);
        let hi = total.min(cutoff);
        let size = hi - lo + 1;
        // rows (i, j') and columns (i', j) with i + j' = i' + j = total;
        // ρ^{T_b}[(i,j'),(i',j)] = ρ[(i,j),(i',j')]
        let block = ComplexMatrix::from_fn(size, size, |r, col| {
            let i = lo + r;
            let j2 = total - i;
            let i2 = lo + col;
            let j = total - i2;
            element(i, j, i2, j2)
        });
        trace += block.trace().re;
        neg += negative_part(&hermitian_eigenvalues(&block)?);
    }
    Ok(neg / trace)
}

/// Measurement basis for both parties.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Basis {
    Z,
    X,
}

impl Basis {
    pub const BOTH: [Basis; 2] = [Basis::Z, Basis::X];

    pub fn label(self) -> &'static str {
        match self {
            Basis::Z => "sigma_z",
            Basis::X => "sigma_x",
        }
    }

    /// Projectors onto the two outcomes.
    pub fn projectors(self) -> [ComplexMatrix; 2] {
        match self {
            Basis::Z => [ops::basis_projector(2, 0), ops::basis_projector(2, 1)],
            Basis::X => {
                let h = 0.5;
                [
                    ComplexMatrix::from_real(&[&[h, h], &[h, h]]),
                    ComplexMatrix::from_real(&[&[h, -h], &[-h, h]]),
                ]
            }
        }
    }
}

fn correlator(rho: &DensityMatrix, a: &ComplexMatrix, b: &ComplexMatrix) -> Result<f64> {
    rho.expectation(&a.kron(b))
}

/// S = √2(⟨σx σx⟩ + ⟨σz σz⟩) for Alice measuring {σx, σz} and Bob
/// {σx, (σx ± σz)/√2}.
pub fn chsh_value(rho: &DensityMatrix) -> Result<f64> {
    check_two_qubits(rho)?;
    let xx = correlator(rho, &ops::pauli_x(), &ops::pauli_x())?;
    let zz = correlator(rho, &ops::pauli_z(), &ops::pauli_z())?;
    Ok(SQRT_2 * (xx + zz))
}

/// Q = P(a ≠ b) when both parties measure σx.
pub fn qber(rho: &DensityMatrix) -> Result<f64> {
    check_two_qubits(rho)?;
    Ok((1.0 - correlator(rho, &ops::pauli_x(), &ops::pauli_x())?) / 2.0)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BellTestResult {
    pub chsh_s: f64,
    pub qber_q: f64,
}

pub fn bell_test(rho: &DensityMatrix) -> Result<BellTestResult> {
    Ok(BellTestResult { chsh_s: chsh_value(rho)?, qber_q: qber(rho)? })
}

/// Joint outcome distribution P(a, b).
#[derive(Clone, Debug, PartialEq)]
pub struct MeasurementRecord {
    joint: Vec<Vec<f64>>,
    basis_label: String,
}

impl MeasurementRecord {
    pub fn new(joint: Vec<Vec<f64>>, basis_label: impl Into<String>) -> Result<Self> {
        let rows = joint.len();
        if rows == 0 || joint.iter().any(|r| r.len() != joint[0].len() || r.is_empty()) {
            return Err(Error::DimensionMismatch("probability table must be a nonempty rectangle".into()));
        }
        if joint.iter().flatten().any(|&p| !(p >= -1e-15)) {
            return Err(Error::Domain("negative probability in table".into()));
        }
        let total: f64 = joint.iter().flatten().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::Domain(format!("probability table sums to {total}")));
        }
        Ok(Self { joint, basis_label: basis_label.into() })
    }

    /// Both parties measure `basis` on a normalized two-qubit state.
    pub fn from_state(rho: &DensityMatrix, basis: Basis) -> Result<Self> {
        check_two_qubits(rho)?;
        let proj = basis.projectors();
        let mut joint = vec![vec![0.0; 2]; 2];
        for (a, pa) in proj.iter().enumerate() {
            for (b, pb) in proj.iter().enumerate() {
                joint[a][b] = rho.expectation(&pa.kron(pb))?.max(0.0);
            }
        }
        let total: f64 = joint.iter().flatten().sum();
        for row in joint.iter_mut() {
            for p in row.iter_mut() {
                *p /= total;
            }
        }
        Self::new(joint, basis.label())
    }

    pub fn joint(&self) -> &[Vec<f64>] {
        &self.joint
    }

    pub fn basis_label(&self) -> &str {
        &self.basis_label
    }

    pub fn marginal_a(&self) -> Vec<f64> {
        self.joint.iter().map(|r| r.iter().sum()).collect()
    }

    pub fn marginal_b(&self) -> Vec<f64> {
        (0..self.joint[0].len()).map(|b| self.joint.iter().map(|r| r[b]).sum()).collect()
    }
}

/// I(a:b) = Σ P(a,b) log₂(P(a,b)/(P(a)P(b))).
pub fn mutual_information(rec: &MeasurementRecord) -> f64 {
    let pa = rec.marginal_a();
    let pb = rec.marginal_b();
    let mut info = 0.0;
    for (a, row) in rec.joint.iter().enumerate() {
        for (b, &p) in row.iter().enumerate() {
            if p > 0.0 {
                info += p * (p / (pa[a] * pb[b])).log2();
            }
        }
    }
    info.max(0.0)
}

/// χ = S(ρ_AB) − Σ_a P(a) S(ρ_B^a): Eve's Holevo information about Alice's
/// outcome in `basis`, with Eve holding a purification of ρ_AB.
pub fn holevo_bound(rho: &DensityMatrix, basis: Basis) -> Result<f64> {
    check_two_qubits(rho)?;
    let s_ab = rho.von_neumann_entropy()?;
    let mut conditional = 0.0;
    for proj in basis.projectors() {
        let op = proj.kron(&ComplexMatrix::identity(2));
        let branch = op.matmul(rho.matrix())?.matmul(&op)?;
        let p = branch.trace().re;
        if p <= 1e-15 {
            continue;
        }
        let (rho_b, _) = branch.scale_real(1.0 / p).partial_trace(&[2, 2], &[1])?;
        conditional += p * entropy_bits(&hermitian_eigenvalues(&rho_b)?);
    }
    Ok(s_ab - conditional)
}

pub fn binary_entropy(x: f64) -> f64 {
    if x <= 0.0 || x >= 1.0 {
        return 0.0;
    }
    -x * x.log2() - (1.0 - x) * (1.0 - x).log2()
}

/// How per-basis keys are combined into one figure.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum SiftingConvention {
    /// Unweighted mean of the σz and σx keys (asymptotically efficient
    /// basis choice).
    #[default]
    MeanOfBases,
    /// Mean of the two keys times ½ for random, unbiased basis choice.
    HalfSifted,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BasisKey {
    pub basis: Basis,
    pub mutual_info_bits: f64,
    pub holevo_bits: f64,
    /// β·I − χ, unclamped.
    pub raw_key_bits: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KeyRateResult {
    pub z: BasisKey,
    pub x: BasisKey,
    /// Basis mean of I(a:b).
    pub mutual_info_bits: f64,
    /// Basis mean of χ.
    pub holevo_bits: f64,
    /// Combined key per successful distribution, clamped at zero.
    pub key_bits_per_success: f64,
    pub reconciliation_beta: f64,
}

/// Devetak-Winter key K = β I(a:b) − χ(a:E) with Alice reconciling, β = 1.
pub fn devetak_winter_key(rho: &DensityMatrix) -> Result<KeyRateResult> {
    devetak_winter_key_with(rho, SiftingConvention::default())
}

pub fn devetak_winter_key_with(rho: &DensityMatrix, convention: SiftingConvention) -> Result<KeyRateResult> {
    let beta = 1.0;
    let per_basis = |basis: Basis| -> Result<BasisKey> {
        let info = mutual_information(&MeasurementRecord::from_state(rho, basis)?);
        let chi = holevo_bound(rho, basis)?;
        Ok(BasisKey { basis, mutual_info_bits: info, holevo_bits: chi, raw_key_bits: beta * info - chi })
    };
    let z = per_basis(Basis::Z)?;
    let x = per_basis(Basis::X)?;
    let mean = 0.5 * (z.raw_key_bits + x.raw_key_bits);
    let factor = match convention {
        SiftingConvention::MeanOfBases => 1.0,
        SiftingConvention::HalfSifted => 0.5,
    };
    Ok(KeyRateResult {
        z,
        x,
        mutual_info_bits: 0.5 * (z.mutual_info_bits + x.mutual_info_bits),
        holevo_bits: 0.5 * (z.holevo_bits + x.holevo_bits),
        key_bits_per_success: (factor * mean).max(0.0),
        reconciliation_beta: beta,
    })
}

/// r = 1 − h(Q) − h((1 + √((S/2)² − 1))/2), clamped to [0, 1]; zero for S ≤ 2.
pub fn di_key_rate(q: f64, s: f64) -> f64 {
    if s <= 2.0 {
        return 0.0;
    }
    let root = ((s / 2.0).powi(2) - 1.0).max(0.0).sqrt();
    let r = 1.0 - binary_entropy(q) - binary_entropy((1.0 + root) / 2.0);
    r.clamp(0.0, 1.0)
}

/// Repeaterless capacity −log₂(1 − η).
pub fn plob_bound(eta_total: f64) -> Result<f64> {
    if !(eta_total > 0.0 && eta_total < 1.0) {
        return Err(Error::Domain(format!("total transmission {eta_total} outside (0, 1)")));
    }
    Ok(-(-eta_total).ln_1p() / std::f64::consts::LN_2)
}

/// Fiber transmission 10^(−α L / 10) for loss α in dB/km.
pub fn fiber_transmission(length_km: f64, loss_db_per_km: f64) -> f64 {
    10f64.powf(-loss_db_per_km * length_km / 10.0)
}
