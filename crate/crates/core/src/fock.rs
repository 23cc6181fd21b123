//! Truncated Fock-space simulation of one elementary link with `N = 1`.
//!
//! A [`FockSystem`] is a list of labelled modes (optical modes with a photon
//! cutoff, or qubits) and either a state vector or a density matrix over
//! their tensor product, in row-major order of the mode list. States stay
//! pure until the first loss channel or measurement.

use std::f64::consts::FRAC_1_SQRT_2;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{strides, ComplexMatrix, DensityMatrix};
use crate::register::{binomial, check_eta, loss_amp, tmsv_amplitude, RegisterScenario, TmsvParams};

/// Largest neglected TMSV weight accepted by [`prepare_tmsv`].
pub const FOCK_TAIL_LIMIT: f64 = 1e-6;
pub const DEFAULT_FOCK_CUTOFF: usize = 12;
/// Weight pushed beyond a cutoff that counts as an overflow.
pub const OVERFLOW_TOL: f64 = 1e-12;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModeKind {
    Optical,
    Qubit,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Mode {
    pub label: String,
    pub kind: ModeKind,
    /// Local dimension: cutoff + 1 for optical modes, 2 for qubits.
    pub dim: usize,
}

impl Mode {
    pub fn optical(label: &str, cutoff: usize) -> Self {
        Self { label: label.to_string(), kind: ModeKind::Optical, dim: cutoff + 1 }
    }

    pub fn qubit(label: &str) -> Self {
        Self { label: label.to_string(), kind: ModeKind::Qubit, dim: 2 }
    }

    pub fn cutoff(&self) -> usize {
        self.dim - 1
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Repr {
    Pure(Vec<Complex64>),
    Mixed(ComplexMatrix),
}

#[derive(Clone, Debug, PartialEq)]
pub struct FockSystem {
    modes: Vec<Mode>,
    repr: Repr,
}

/// Imperfections of the optical hardware; all ones and zero dark counts is
/// the ideal setup.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ErrorModelParams {
    pub eta_ch_l: f64,
    pub eta_ch_r: f64,
    /// Emitter-to-fiber coupling.
    pub eta_coupling: f64,
    pub eta_detector: f64,
    /// Probability of one spurious count per detector and window.
    pub p_dark: f64,
}

impl ErrorModelParams {
    pub fn ideal() -> Self {
        Self { eta_ch_l: 1.0, eta_ch_r: 1.0, eta_coupling: 1.0, eta_detector: 1.0, p_dark: 0.0 }
    }

    pub fn validate(&self) -> Result<()> {
        check_eta("eta_chL", self.eta_ch_l)?;
        check_eta("eta_chR", self.eta_ch_r)?;
        check_eta("eta_coupling", self.eta_coupling)?;
        check_eta("eta_detector", self.eta_detector)?;
        check_eta("p_dark", self.p_dark)
    }
}

impl Default for ErrorModelParams {
    fn default() -> Self {
        Self::ideal()
    }
}

/// Binomial thinning probability C(n, j) η^j (1−η)^{n−j}.
fn thinning(j: usize, n: usize, eta: f64) -> f64 {
    if j > n {
        return 0.0;
    }
    binomial(n, j) * eta.powi(j as i32) * (1.0 - eta).powi((n - j) as i32)
}

/// Diagonal POVM weights w(n) = P(register `outcome` | n photons) for
/// n = 0..=max_photons: binomial thinning by the detector efficiency, then
/// at most one dark count with probability `p_dark`.
pub fn povm_weights(outcome: usize, max_photons: usize, eta_detector: f64, p_dark: f64) -> Vec<f64> {
    (0..=max_photons)
        .map(|n| {
            let clean = (1.0 - p_dark) * thinning(outcome, n, eta_detector);
            let dark = if outcome >= 1 { p_dark * thinning(outcome - 1, n, eta_detector) } else { 0.0 };
            clean + dark
        })
        .collect()
}

/// Two-mode beamsplitter a† → t a† + r b†, b† → −r a† + t b† on the
/// truncated space, with the weight each input level pushes past the cutoffs.
fn beamsplitter_matrix(da: usize, db: usize, t: f64) -> (ComplexMatrix, Vec<f64>) {
    let r = (1.0 - t * t).max(0.0).sqrt();
    let fact = |k: usize| (1..=k).fold(1.0, |acc, v| acc * v as f64);
    let mut u = ComplexMatrix::zeros(da * db, da * db);
    let mut leak = vec![0.0; da * db];
    for n in 0..da {
        for m in 0..db {
            let total = n + m;
            let mut out = vec![0.0; total + 1];
            for i in 0..=n {
                for j in 0..=m {
                    // (t a† + r b†)^n (−r a† + t b†)^m, a† power i + j
                    let coeff = binomial(n, i)
                        * binomial(m, j)
                        * t.powi(i as i32)
                        * r.powi((n - i) as i32)
                        * (-r).powi(j as i32)
                        * t.powi((m - j) as i32);
                    out[i + j] += coeff;
                }
            }
            let norm_in = (fact(n) * fact(m)).sqrt();
            for (k, c) in out.into_iter().enumerate() {
                let amp = c * (fact(k) * fact(total - k)).sqrt() / norm_in;
                if k < da && total - k < db {
                    u[(k * db + (total - k), n * db + m)] = Complex64::new(amp, 0.0);
                } else {
                    leak[n * db + m] += amp * amp;
                }
            }
        }
    }
    (u, leak)
}

/// Applies `op` (shape `out × in`) to the row index of `data` on the
/// `targets` modes; `new_target_dims` gives the dims after the map.
fn apply_rows(
    data: &ComplexMatrix,
    dims: &[usize],
    targets: &[usize],
    op: &ComplexMatrix,
    new_target_dims: &[usize],
) -> ComplexMatrix {
    let old_strides = strides(dims);
    let mut new_dims = dims.to_vec();
    for (&t, &d) in targets.iter().zip(new_target_dims) {
        new_dims[t] = d;
    }
    let new_strides = strides(&new_dims);
    let new_total: usize = new_dims.iter().product();
    let target_dims_in: Vec<usize> = targets.iter().map(|&t| dims[t]).collect();
    let in_strides = strides(&target_dims_in);
    let out_strides = strides(new_target_dims);
    let dt_in: usize = target_dims_in.iter().product();

    // old-row offset contributed by each target configuration
    let in_offsets: Vec<usize> = (0..dt_in)
        .map(|s| {
            targets
                .iter()
                .enumerate()
                .map(|(k, &t)| ((s / in_strides[k]) % target_dims_in[k]) * old_strides[t])
                .sum()
        })
        .collect();

    let cols = data.cols();
    let mut out = ComplexMatrix::zeros(new_total, cols);
    for row in 0..new_total {
        let mut rest = 0;
        let mut sub_out = 0;
        for (mode, &d) in new_dims.iter().enumerate() {
            let digit = (row / new_strides[mode]) % d;
            match targets.iter().position(|&t| t == mode) {
                Some(k) => sub_out += digit * out_strides[k],
                None => rest += digit * old_strides[mode],
            }
        }
        for (sub_in, &offset) in in_offsets.iter().enumerate() {
            let coeff = op[(sub_out, sub_in)];
            if coeff == ZERO {
                continue;
            }
            let src = rest + offset;
            for c in 0..cols {
                let v = data[(src, c)];
                if v != ZERO {
                    out[(row, c)] += coeff * v;
                }
            }
        }
    }
    out
}

impl FockSystem {
    pub fn from_pure(modes: Vec<Mode>, amplitudes: Vec<Complex64>) -> Result<Self> {
        let dim: usize = modes.iter().map(|m| m.dim).product();
        if amplitudes.len() != dim {
            return Err(Error::DimensionMismatch(format!("{} amplitudes for dimension {dim}", amplitudes.len())));
        }
        check_labels(&modes)?;
        Ok(Self { modes, repr: Repr::Pure(amplitudes) })
    }

    pub fn modes(&self) -> &[Mode] {
        &self.modes
    }

    pub fn dims(&self) -> Vec<usize> {
        self.modes.iter().map(|m| m.dim).collect()
    }

    pub fn total_dim(&self) -> usize {
        self.modes.iter().map(|m| m.dim).product()
    }

    pub fn is_pure(&self) -> bool {
        matches!(self.repr, Repr::Pure(_))
    }

    pub fn mode_index(&self, label: &str) -> Result<usize> {
        self.modes
            .iter()
            .position(|m| m.label == label)
            .ok_or_else(|| Error::Domain(format!("no mode labelled {label:?}")))
    }

    /// ⟨ψ|ψ⟩ or Tr ρ.
    pub fn norm(&self) -> f64 {
        match &self.repr {
            Repr::Pure(v) => v.iter().map(|a| a.norm_sqr()).sum(),
            Repr::Mixed(m) => m.trace().re,
        }
    }

    pub fn amplitudes(&self) -> Option<&[Complex64]> {
        match &self.repr {
            Repr::Pure(v) => Some(v),
            Repr::Mixed(_) => None,
        }
    }

    pub fn density(&self) -> ComplexMatrix {
        match &self.repr {
            Repr::Pure(v) => ComplexMatrix::outer(v),
            Repr::Mixed(m) => m.clone(),
        }
    }

    pub fn to_mixed(&mut self) {
        if let Repr::Pure(v) = &self.repr {
            self.repr = Repr::Mixed(ComplexMatrix::outer(v));
        }
    }

    /// Tensor product; labels must stay unique.
    pub fn tensor(&self, other: &Self) -> Result<Self> {
        let mut modes = self.modes.clone();
        modes.extend(other.modes.iter().cloned());
        check_labels(&modes)?;
        let repr = match (&self.repr, &other.repr) {
            (Repr::Pure(a), Repr::Pure(b)) => {
                Repr::Pure(a.iter().flat_map(|x| b.iter().map(move |y| x * y)).collect())
            }
            _ => Repr::Mixed(self.density().kron(&other.density())),
        };
        Ok(Self { modes, repr })
    }

    /// Applies an operator on the listed modes, O|ψ⟩ or OρO†.
    fn apply_op(&mut self, targets: &[usize], op: &ComplexMatrix, new_target_dims: &[usize]) {
        let dims = self.dims();
        self.repr = match &self.repr {
            Repr::Pure(v) => {
                let col = ComplexMatrix::new(v.len(), 1, v.clone()).expect("column");
                Repr::Pure(apply_rows(&col, &dims, targets, op, new_target_dims).as_slice().to_vec())
            }
            Repr::Mixed(m) => {
                let left = apply_rows(m, &dims, targets, op, new_target_dims);
                let both = apply_rows(&left.dagger(), &dims, targets, op, new_target_dims).dagger();
                Repr::Mixed(both)
            }
        };
        for (&t, &d) in targets.iter().zip(new_target_dims) {
            self.modes[t].dim = d;
        }
    }

    /// Diagonal populations of the listed modes, flattened row-major.
    fn populations(&self, targets: &[usize]) -> Vec<f64> {
        let dims = self.dims();
        let st = strides(&dims);
        let tdims: Vec<usize> = targets.iter().map(|&t| dims[t]).collect();
        let tst = strides(&tdims);
        let mut pops = vec![0.0; tdims.iter().product()];
        for idx in 0..self.total_dim() {
            let sub: usize = targets.iter().enumerate().map(|(k, &t)| ((idx / st[t]) % dims[t]) * tst[k]).sum();
            pops[sub] += match &self.repr {
                Repr::Pure(v) => v[idx].norm_sqr(),
                Repr::Mixed(m) => m[(idx, idx)].re,
            };
        }
        pops
    }

    /// Balanced or unbalanced beamsplitter with transmission amplitude `t`.
    /// Fails if a populated level would be pushed past either cutoff.
    pub fn apply_beamsplitter(&mut self, mode_a: &str, mode_b: &str, t: f64) -> Result<()> {
        let a = self.mode_index(mode_a)?;
        let b = self.mode_index(mode_b)?;
        if a == b {
            return Err(Error::Domain("beamsplitter needs two distinct modes".into()));
        }
        if self.modes[a].kind != ModeKind::Optical || self.modes[b].kind != ModeKind::Optical {
            return Err(Error::Domain("beamsplitter acts on optical modes only".into()));
        }
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::Domain(format!("transmission amplitude {t} outside [0, 1]")));
        }
        let (da, db) = (self.modes[a].dim, self.modes[b].dim);
        let (u, leak) = beamsplitter_matrix(da, db, t);
        let pops = self.populations(&[a, b]);
        for (idx, (&p, &l)) in pops.iter().zip(&leak).enumerate() {
            if p > OVERFLOW_TOL && l > OVERFLOW_TOL {
                return Err(Error::PhotonOverflow { needed: idx / db + idx % db, cutoff: da.min(db) - 1 });
            }
        }
        self.apply_op(&[a, b], &u, &[da, db]);
        Ok(())
    }

    /// Pure-loss channel with transmission η on one optical mode.
    pub fn apply_loss(&mut self, mode: &str, eta: f64) -> Result<()> {
        let k = self.mode_index(mode)?;
        check_eta("eta", eta)?;
        if eta == 1.0 {
            return Ok(());
        }
        self.to_mixed();
        let d = self.modes[k].dim;
        let dims = self.dims();
        let Repr::Mixed(rho) = &self.repr else { unreachable!() };
        let mut acc = ComplexMatrix::zeros(rho.rows(), rho.cols());
        for lost in 0..d {
            let mut kraus = ComplexMatrix::zeros(d, d);
            for n in lost..d {
                kraus[(n - lost, n)] = Complex64::new(loss_amp(n, lost, eta)?, 0.0);
            }
            let left = apply_rows(rho, &dims, &[k], &kraus, &[d]);
            let both = apply_rows(&left.dagger(), &dims, &[k], &kraus, &[d]).dagger();
            acc.add_assign(&both)?;
        }
        self.repr = Repr::Mixed(acc);
        Ok(())
    }

    /// Photon-number-resolving detection registering `outcome` counts on
    /// `mode`; the mode is removed and the conditioned state left
    /// unnormalized.
    pub fn measure_pnr(&mut self, mode: &str, outcome: usize, err: &ErrorModelParams) -> Result<()> {
        let k = self.mode_index(mode)?;
        err.validate()?;
        let d = self.modes[k].dim;
        if outcome > d - 1 {
            return Err(Error::Domain(format!("outcome {outcome} exceeds cutoff {} of mode {mode}", d - 1)));
        }
        let weights = povm_weights(outcome, d - 1, err.eta_detector, err.p_dark);
        self.to_mixed();
        let dims = self.dims();
        let Repr::Mixed(rho) = &self.repr else { unreachable!() };
        let reduced_dim = rho.rows() / d;
        let mut acc = ComplexMatrix::zeros(reduced_dim, reduced_dim);
        for (n, &w) in weights.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            let mut bra = ComplexMatrix::zeros(1, d);
            bra[(0, n)] = ONE;
            let left = apply_rows(rho, &dims, &[k], &bra, &[1]);
            let both = apply_rows(&left.dagger(), &dims, &[k], &bra, &[1]).dagger();
            acc.add_assign(&both.scale_real(w))?;
        }
        self.repr = Repr::Mixed(acc);
        self.modes.remove(k);
        Ok(())
    }

    /// Projects an optical mode onto at most `max` photons and shrinks it.
    pub fn project_max_photons(&mut self, mode: &str, max: usize) -> Result<()> {
        let k = self.mode_index(mode)?;
        let d = self.modes[k].dim;
        let new = (max + 1).min(d);
        let mut proj = ComplexMatrix::zeros(new, d);
        for n in 0..new {
            proj[(n, n)] = ONE;
        }
        self.apply_op(&[k], &proj, &[new]);
        Ok(())
    }

    /// Raises an optical mode's cutoff, padding with empty levels.
    pub fn extend_cutoff(&mut self, mode: &str, cutoff: usize) -> Result<()> {
        let k = self.mode_index(mode)?;
        let d = self.modes[k].dim;
        if cutoff + 1 < d {
            return Err(Error::Domain(format!("cannot lower cutoff of {mode} from {} to {cutoff}", d - 1)));
        }
        let mut embed = ComplexMatrix::zeros(cutoff + 1, d);
        for n in 0..d {
            embed[(n, n)] = ONE;
        }
        self.apply_op(&[k], &embed, &[cutoff + 1]);
        Ok(())
    }

    /// Applies a single-mode operator (e.g. a Pauli on a qubit).
    pub fn apply_single(&mut self, mode: &str, op: &ComplexMatrix) -> Result<()> {
        let k = self.mode_index(mode)?;
        let d = self.modes[k].dim;
        if op.rows() != d || op.cols() != d {
            return Err(Error::DimensionMismatch(format!("operator is {}x{}, mode has dim {d}", op.rows(), op.cols())));
        }
        self.apply_op(&[k], op, &[d]);
        Ok(())
    }

    pub fn trace_out(&mut self, mode: &str) -> Result<()> {
        let k = self.mode_index(mode)?;
        self.to_mixed();
        let dims = self.dims();
        let keep: Vec<usize> = (0..dims.len()).filter(|&i| i != k).collect();
        let Repr::Mixed(rho) = &self.repr else { unreachable!() };
        let (reduced, _) = rho.partial_trace(&dims, &keep)?;
        self.repr = Repr::Mixed(reduced);
        self.modes.remove(k);
        Ok(())
    }

    /// The whole state as an (unnormalized) density matrix.
    pub fn to_density(&self) -> Result<DensityMatrix> {
        DensityMatrix::new(self.density(), self.dims(), false)
    }
}

fn check_labels(modes: &[Mode]) -> Result<()> {
    for (i, m) in modes.iter().enumerate() {
        if modes[..i].iter().any(|o| o.label == m.label) {
            return Err(Error::Domain(format!("duplicate mode label {:?}", m.label)));
        }
    }
    Ok(())
}

/// Σ c_n |n, n⟩ on two optical modes, truncated at `cutoff` photons.
pub fn prepare_tmsv(p: &TmsvParams, cutoff: usize, label_a: &str, label_b: &str) -> Result<FockSystem> {
    p.validate()?;
    let tail = p.tail_weight(cutoff);
    if tail >= FOCK_TAIL_LIMIT {
        return Err(Error::CutoffTooSmall { cutoff, tail, limit: FOCK_TAIL_LIMIT });
    }
    let d = cutoff + 1;
    let mut amps = vec![ZERO; d * d];
    for n in 0..d {
        amps[n * d + n] = tmsv_amplitude(n, p);
    }
    FockSystem::from_pure(vec![Mode::optical(label_a, cutoff), Mode::optical(label_b, cutoff)], amps)
}

/// cos θ |0⟩_q |0⟩_f + sin θ |1⟩_q |1⟩_f: an emitter qubit entangled with its
/// emission mode (cutoff 1).
pub fn prepare_qubit_emitter(theta: f64, qubit_label: &str, field_label: &str) -> Result<FockSystem> {
    if !theta.is_finite() {
        return Err(Error::Domain("emitter angle must be finite".into()));
    }
    let (s, c) = theta.sin_cos();
    let amps = vec![Complex64::new(c, 0.0), ZERO, ZERO, Complex64::new(s, 0.0)];
    FockSystem::from_pure(vec![Mode::qubit(qubit_label), Mode::optical(field_label, 1)], amps)
}

/// Click patterns (detector on the TMSV-side output, detector on the emitter
/// side output) accepted at each register.
pub const ACCEPTED_PATTERNS: [(usize, usize); 2] = [(1, 0), (0, 1)];

/// Explicit optical model of one `N = 1` link, summed over the four accepted
/// click patterns. The trace of the returned two-qubit state (left qubit
/// first) is the heralding probability.
///
/// Detector inefficiency is moved in front of the register beamsplitters,
/// where it acts as equal loss on both inputs; this commutes with a balanced
/// beamsplitter. Since dark counts only add clicks, an accepted pattern (one
/// registered count per register) needs at most one real photon per
/// register, so the TMSV modes are projected onto at most one photon after
/// all losses without affecting accepted events.
pub fn simulate_segment(sc: &RegisterScenario, err: &ErrorModelParams, cutoff: usize) -> Result<DensityMatrix> {
    sc.validate()?;
    err.validate()?;
    if sc.qubits != 1 {
        return Err(Error::Domain("the optical simulation covers single-qubit registers only".into()));
    }
    let mut link = prepare_tmsv(&sc.tmsv, cutoff, "a", "b")?;
    link.apply_loss("a", sc.eta_l * err.eta_ch_l * err.eta_detector)?;
    link.apply_loss("b", sc.eta_r * err.eta_ch_r * err.eta_detector)?;
    link.project_max_photons("a", 1)?;
    link.project_max_photons("b", 1)?;

    let mut left = prepare_qubit_emitter(sc.theta_l, "qL", "fL")?;
    left.apply_loss("fL", err.eta_coupling * err.eta_detector)?;
    let mut right = prepare_qubit_emitter(sc.theta_r, "qR", "fR")?;
    right.apply_loss("fR", err.eta_coupling * err.eta_detector)?;

    let mut sys = link.tensor(&left)?.tensor(&right)?;
    for mode in ["a", "fL", "b", "fR"] {
        sys.extend_cutoff(mode, 2)?;
    }
    sys.apply_beamsplitter("a", "fL", FRAC_1_SQRT_2)?;
    sys.apply_beamsplitter("b", "fR", FRAC_1_SQRT_2)?;

    let detector = ErrorModelParams { eta_detector: 1.0, ..*err };
    let z = ComplexMatrix::from_diagonal(&[ONE, -ONE]);
    let mut total = ComplexMatrix::zeros(4, 4);
    for (ta, tf) in ACCEPTED_PATTERNS {
        let mut after_left = sys.clone();
        after_left.measure_pnr("a", ta, &detector)?;
        after_left.measure_pnr("fL", tf, &detector)?;
        if ta == 1 {
            // the emitter photon reaching this detector picked up a −1
            after_left.apply_single("qL", &z)?;
        }
        for (tb, tfr) in ACCEPTED_PATTERNS {
            let mut branch = after_left.clone();
            branch.measure_pnr("b", tb, &detector)?;
            branch.measure_pnr("fR", tfr, &detector)?;
            if tb == 1 {
                branch.apply_single("qR", &z)?;
            }
            total.add_assign(&branch.density())?;
        }
    }
    DensityMatrix::new(total, vec![2, 2], false)
}
