//! Heralded register state of one elementary link.
//!
//! A TMSV source sends one mode to each of two atomic amplifiers, each
//! holding `N` emitter qubits prepared in `cos θ|0⟩ + sin θ|1⟩`. After the
//! heralding clicks, each register is left in the symmetric subspace spanned
//! by `|I_k⟩`, the even superposition of all states with `k` bright qubits.
//! Photons lost in either channel are traced out.
//!
//! Basis ordering: the index of `|I_{kL}⟩ ⊗ |I_{kR}⟩` is `kL·(N+1) + kR`.
//! For `N = 1` this is the familiar `|00⟩, |01⟩, |10⟩, |11⟩` with `|0⟩` the
//! dark (photon-heralded) state.

use std::f64::consts::FRAC_PI_2;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{ComplexMatrix, DensityMatrix};

/// Neglected TMSV weight accepted by [`build_register_density`].
pub const REGISTER_TAIL_LIMIT: f64 = 1e-12;
/// Upper bound on any automatically chosen photon cutoff.
pub const MAX_CUTOFF: usize = 5000;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TmsvParams {
    /// Mean photon number per mode.
    pub mean_n: f64,
    /// Source phase φ.
    pub phase: f64,
}

impl TmsvParams {
    pub fn new(mean_n: f64, phase: f64) -> Result<Self> {
        let p = Self { mean_n, phase };
        p.validate()?;
        Ok(p)
    }

    /// φ = 0.
    pub fn real(mean_n: f64) -> Result<Self> {
        Self::new(mean_n, 0.0)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mean_n >= 0.0 && self.mean_n.is_finite()) {
            return Err(Error::Domain(format!("mean photon number {} must be finite and >= 0", self.mean_n)));
        }
        if !self.phase.is_finite() {
            return Err(Error::Domain("source phase must be finite".into()));
        }
        Ok(())
    }

    /// Geometric ratio n̄/(1+n̄) of the photon-number distribution.
    pub fn ratio(&self) -> f64 {
        self.mean_n / (1.0 + self.mean_n)
    }

    /// Σ_{n > cutoff} |c_n|².
    pub fn tail_weight(&self, cutoff: usize) -> f64 {
        self.ratio().powi(cutoff as i32 + 1)
    }

    /// Smallest cutoff ≥ `min` whose tail weight is below `limit`.
    pub fn cutoff_for_tail(&self, limit: f64, min: usize) -> Result<usize> {
        let lambda = self.ratio();
        if lambda == 0.0 {
            return Ok(min);
        }
        // λ^{c+1} < limit  ⇔  c + 1 > ln(limit)/ln(λ)
        let needed = (limit.ln() / lambda.ln()).floor() as usize;
        let cutoff = needed.max(min);
        if cutoff > MAX_CUTOFF {
            return Err(Error::CutoffTooSmall { cutoff: MAX_CUTOFF, tail: self.tail_weight(MAX_CUTOFF), limit });
        }
        Ok(cutoff)
    }

    pub fn amplitude(&self, n: usize) -> Complex64 {
        tmsv_amplitude(n, self)
    }
}

impl Default for TmsvParams {
    fn default() -> Self {
        Self { mean_n: 0.0, phase: 0.0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RegisterScenario {
    /// Emitter qubits per register, `N`.
    pub qubits: usize,
    pub theta_l: f64,
    pub theta_r: f64,
    pub tmsv: TmsvParams,
    pub eta_l: f64,
    pub eta_r: f64,
}

impl RegisterScenario {
    pub fn new(qubits: usize, theta_l: f64, theta_r: f64, tmsv: TmsvParams, eta_l: f64, eta_r: f64) -> Result<Self> {
        let sc = Self { qubits, theta_l, theta_r, tmsv, eta_l, eta_r };
        sc.validate()?;
        Ok(sc)
    }

    pub fn validate(&self) -> Result<()> {
        if self.qubits == 0 {
            return Err(Error::Domain("registers need at least one qubit".into()));
        }
        for (name, theta) in [("theta_L", self.theta_l), ("theta_R", self.theta_r)] {
            if !(0.0..=FRAC_PI_2).contains(&theta) {
                return Err(Error::Domain(format!("{name} = {theta} outside [0, pi/2]")));
            }
        }
        for (name, eta) in [("eta_L", self.eta_l), ("eta_R", self.eta_r)] {
            check_eta(name, eta)?;
        }
        self.tmsv.validate()
    }

    pub fn dim(&self) -> usize {
        (self.qubits + 1) * (self.qubits + 1)
    }

    pub fn is_lossless(&self) -> bool {
        self.eta_l == 1.0 && self.eta_r == 1.0
    }

    /// Index of `|I_{kL}⟩ ⊗ |I_{kR}⟩`.
    pub fn basis_index(&self, bright_l: usize, bright_r: usize) -> usize {
        bright_l * (self.qubits + 1) + bright_r
    }
}

pub(crate) fn check_eta(name: &str, eta: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&eta) {
        return Err(Error::Domain(format!("{name} = {eta} outside [0, 1]")));
    }
    Ok(())
}

/// c_n = (−e^{iφ})ⁿ √(n̄ⁿ / (1+n̄)^{n+1}).
pub fn tmsv_amplitude(n: usize, p: &TmsvParams) -> Complex64 {
    let nbar = p.mean_n;
    let magnitude = if n == 0 {
        (1.0 / (1.0 + nbar)).sqrt()
    } else {
        (p.ratio().powi(n as i32) / (1.0 + nbar)).sqrt()
    };
    let phase = Complex64::from_polar(1.0, p.phase + std::f64::consts::PI).powu(n as u32);
    phase * magnitude
}

/// β(n, θ) = cosⁿθ · sin^{N−n}θ, with `n` the number of dark qubits.
pub fn beta_amp(n: usize, theta: f64, qubits: usize) -> Result<f64> {
    if n > qubits {
        return Err(Error::Domain(format!("dark count {n} exceeds register size {qubits}")));
    }
    Ok(theta.cos().powi(n as i32) * theta.sin().powi((qubits - n) as i32))
}

/// Δ(n, θ) = √(N! / (2^N Nⁿ (N−n)!)) · β(n, θ): amplitude for `n` photons
/// entering an `N`-qubit amplifier to herald `|I_{N−n}⟩`.
pub fn delta_amp(n: usize, theta: f64, qubits: usize) -> Result<f64> {
    let beta = beta_amp(n, theta, qubits)?;
    let falling: f64 = ((qubits - n + 1)..=qubits).map(|j| j as f64 / qubits as f64).product();
    Ok((falling / 2f64.powi(qubits as i32)).sqrt() * beta)
}

/// ε(n, l) = √C(n, l) · η^{(n−l)/2} (1−η)^{l/2}: amplitude for losing `l` of
/// `n` photons in a channel of transmission η.
pub fn loss_amp(n: usize, l: usize, eta: f64) -> Result<f64> {
    if l > n {
        return Err(Error::Domain(format!("cannot lose {l} of {n} photons")));
    }
    check_eta("eta", eta)?;
    let binom = binomial(n, l);
    Ok(binom.sqrt() * eta.powf((n - l) as f64 / 2.0) * (1.0 - eta).powf(l as f64 / 2.0))
}

pub(crate) fn binomial(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Λ(n, m, l, r): coefficient of
/// `|I_{N−n+l}⟩⟨I_{N−m+l}| ⊗ |I_{N−n+r}⟩⟨I_{N−m+r}|`, with `l` (`r`) photons
/// lost towards the left (right) amplifier. Terms where more than `N`
/// photons would reach an amplifier vanish.
pub fn lambda_element(n: usize, m: usize, l: usize, r: usize, sc: &RegisterScenario) -> Result<Complex64> {
    let lo = n.min(m);
    if l > lo || r > lo {
        return Err(Error::Domain(format!("lost photons (l={l}, r={r}) exceed min(n, m) = {lo}")));
    }
    let big_n = sc.qubits;
    if n - l > big_n || n - r > big_n || m - l > big_n || m - r > big_n {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let c_n = tmsv_amplitude(n, &sc.tmsv);
    let c_m = tmsv_amplitude(m, &sc.tmsv);
    let eps = loss_amp(n, r, sc.eta_r)?
        * loss_amp(n, l, sc.eta_l)?
        * loss_amp(m, r, sc.eta_r)?
        * loss_amp(m, l, sc.eta_l)?;
    let deltas = delta_amp(n - l, sc.theta_l, big_n)?
        * delta_amp(n - r, sc.theta_r, big_n)?
        * delta_amp(m - l, sc.theta_l, big_n)?
        * delta_amp(m - r, sc.theta_r, big_n)?;
    Ok(c_n * c_m.conj() * eps * deltas)
}

/// Default photon cutoff: exact `N` for lossless channels, otherwise the
/// smallest cutoff whose TMSV tail is below [`REGISTER_TAIL_LIMIT`].
pub fn default_cutoff(sc: &RegisterScenario) -> Result<usize> {
    if sc.is_lossless() {
        return Ok(sc.qubits);
    }
    sc.tmsv.cutoff_for_tail(REGISTER_TAIL_LIMIT, sc.qubits)
}

/// Unnormalized register density with the default cutoff.
pub fn register_density(sc: &RegisterScenario) -> Result<DensityMatrix> {
    build_register_density(sc, default_cutoff(sc)?)
}

/// Unnormalized `(N+1)² × (N+1)²` register density. Its trace is the
/// probability of one particular heralding pattern; see
/// [`success_probability`].
pub fn build_register_density(sc: &RegisterScenario, n_cutoff: usize) -> Result<DensityMatrix> {
    sc.validate()?;
    let big_n = sc.qubits;
    if n_cutoff < big_n {
        return Err(Error::Domain(format!("cutoff {n_cutoff} below register size {big_n}")));
    }
    if !sc.is_lossless() {
        let tail = sc.tmsv.tail_weight(n_cutoff);
        if tail >= REGISTER_TAIL_LIMIT {
            return Err(Error::CutoffTooSmall { cutoff: n_cutoff, tail, limit: REGISTER_TAIL_LIMIT });
        }
    }
    // With no loss every photon reaches an amplifier, so n ≤ N is exact.
    let top = if sc.is_lossless() { big_n } else { n_cutoff };

    let c: Vec<Complex64> = (0..=top).map(|n| tmsv_amplitude(n, &sc.tmsv)).collect();
    let loss_table = |eta: f64| -> Result<Vec<Vec<f64>>> {
        (0..=top).map(|n| (0..=n).map(|l| loss_amp(n, l, eta)).collect()).collect()
    };
    let eps_l = loss_table(sc.eta_l)?;
    let eps_r = loss_table(sc.eta_r)?;
    let delta_l: Vec<f64> = (0..=big_n).map(|k| delta_amp(k, sc.theta_l, big_n)).collect::<Result<_>>()?;
    let delta_r: Vec<f64> = (0..=big_n).map(|k| delta_amp(k, sc.theta_r, big_n)).collect::<Result<_>>()?;

    // Per (n, l, r) the "ket" factor; Λ is ket(n,l,r) · conj(ket(m,l,r)).
    let side = big_n + 1;
    let dim = side * side;
    let mut rho = ComplexMatrix::zeros(dim, dim);
    let ket = |n: usize, l: usize, r: usize| -> Complex64 {
        c[n] * eps_l[n][l] * eps_r[n][r] * delta_l[n - l] * delta_r[n - r]
    };
    for n in 0..=top {
        for m in 0..=top {
            let lo = n.min(m);
            let start = n.max(m).saturating_sub(big_n);
            for l in start..=lo {
                for r in start..=lo {
                    let value = ket(n, l, r) * ket(m, l, r).conj();
                    let row = (big_n + l - n) * side + (big_n + r - n);
                    let col = (big_n + l - m) * side + (big_n + r - m);
                    rho[(row, col)] += value;
                }
            }
        }
    }
    DensityMatrix::new(rho, vec![side, side], false)
}

/// P_s = 4^N · Tr ρ: the four-fold (per qubit) click-pattern degeneracy
/// times the weight of one pattern.
pub fn success_probability(rho: &DensityMatrix, qubits: usize) -> Result<f64> {
    let p = 4f64.powi(qubits as i32) * rho.trace();
    if p > 1.0 + 1e-10 {
        return Err(Error::Domain(format!("success probability {p} exceeds 1")));
    }
    Ok(p)
}

/// Amplitudes `c_n Δ(n, θ_L) Δ(n, θ_R)` of `|I_{N−n}⟩_L |I_{N−n}⟩_R`,
/// indexed by `n = 0..=N`, for lossless channels.
pub fn lossless_state(sc: &RegisterScenario) -> Result<Vec<Complex64>> {
    sc.validate()?;
    if !sc.is_lossless() {
        return Err(Error::Domain("lossless_state needs eta_L = eta_R = 1".into()));
    }
    (0..=sc.qubits)
        .map(|n| {
            let d = delta_amp(n, sc.theta_l, sc.qubits)? * delta_amp(n, sc.theta_r, sc.qubits)?;
            Ok(tmsv_amplitude(n, &sc.tmsv) * d)
        })
        .collect()
}

/// Outer product of [`lossless_state`] in the register basis.
pub fn lossless_density(sc: &RegisterScenario) -> Result<DensityMatrix> {
    let amps = lossless_state(sc)?;
    let side = sc.qubits + 1;
    let mut ket = vec![Complex64::new(0.0, 0.0); side * side];
    for (n, a) in amps.into_iter().enumerate() {
        let k = sc.qubits - n;
        ket[k * side + k] = a;
    }
    DensityMatrix::new(ComplexMatrix::outer(&ket), vec![side, side], false)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_4, FRAC_PI_6};

    fn scenario(n: usize, tl: f64, tr: f64, nbar: f64, el: f64, er: f64) -> RegisterScenario {
        RegisterScenario::new(n, tl, tr, TmsvParams::real(nbar).unwrap(), el, er).unwrap()
    }

    #[test]
    fn tmsv_amplitude_examples() {
        let p = TmsvParams::real(0.5).unwrap();
        assert!((tmsv_amplitude(0, &p).re - 0.816497).abs() < 1e-6);
        assert!((tmsv_amplitude(1, &p).re + 0.471405).abs() < 1e-6);
        assert!(tmsv_amplitude(1, &p).im.abs() < 1e-15);
        let vac = TmsvParams::real(0.0).unwrap();
        assert_eq!(tmsv_amplitude(0, &vac), Complex64::new(1.0, 0.0));
        for n in 1..5 {
            assert_eq!(tmsv_amplitude(n, &vac).norm(), 0.0);
        }
    }

    #[test]
    fn tmsv_amplitudes_are_normalized() {
        let p = TmsvParams::new(0.8, 0.3).unwrap();
        let cutoff = p.cutoff_for_tail(1e-15, 0).unwrap();
        let total: f64 = (0..=cutoff).map(|n| tmsv_amplitude(n, &p).norm_sqr()).sum();
        assert!((total - 1.0).abs() < 1e-14);
        assert!((total + p.tail_weight(cutoff) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn tmsv_phase_is_carried() {
        let p = TmsvParams::new(0.5, 0.7).unwrap();
        let c2 = tmsv_amplitude(2, &p);
        let expected = Complex64::from_polar(1.0, 1.4) * (0.25f64 / 3.375).sqrt();
        assert!((c2 - expected).norm() < 1e-15);
    }

    #[test]
    fn beta_and_delta_examples() {
        assert!((beta_amp(0, FRAC_PI_2, 3).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(beta_amp(4, 0.0, 4).unwrap(), 1.0);
        assert!((beta_amp(1, FRAC_PI_4, 2).unwrap() - 0.5).abs() < 1e-15);
        assert!(beta_amp(3, 0.1, 2).is_err());

        assert!((delta_amp(0, FRAC_PI_4, 1).unwrap() - 0.5).abs() < 1e-15);
        assert!((delta_amp(1, FRAC_PI_4, 2).unwrap() - 0.25).abs() < 1e-15);
        assert_eq!(delta_amp(0, 0.0, 3).unwrap(), 0.0);
        assert!(delta_amp(3, 0.1, 2).is_err());
    }

    #[test]
    fn loss_amp_examples() {
        assert!((loss_amp(1, 0, 0.8).unwrap() - 0.8f64.sqrt()).abs() < 1e-15);
        assert!((loss_amp(2, 1, 0.5).unwrap() - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
        for n in 0..6 {
            assert_eq!(loss_amp(n, 0, 1.0).unwrap(), 1.0);
        }
        assert!(loss_amp(1, 2, 0.5).is_err());
        assert!(loss_amp(1, 0, 1.5).is_err());
    }

    #[test]
    fn loss_amp_is_normalized() {
        for eta in [0.0, 0.3, 0.7, 1.0] {
            for n in 0..=10 {
                let s: f64 = (0..=n).map(|l| loss_amp(n, l, eta).unwrap().powi(2)).sum();
                assert!((s - 1.0).abs() < 1e-13, "n={n} eta={eta} sum={s}");
            }
        }
    }

    #[test]
    fn lambda_examples() {
        let sc = scenario(1, FRAC_PI_4, FRAC_PI_4, 0.5, 1.0, 1.0);
        let v = lambda_element(1, 1, 0, 0, &sc).unwrap();
        assert!((v.re - 0.0138889).abs() < 1e-7 && v.im.abs() < 1e-15);
        // Θ gate: two photons reach a one-qubit amplifier
        assert_eq!(lambda_element(2, 2, 0, 0, &sc).unwrap().norm(), 0.0);
        assert!(lambda_element(1, 0, 1, 0, &sc).is_err());

        let lossy = RegisterScenario { eta_r: 0.6, eta_l: 0.9, tmsv: TmsvParams::new(0.4, 0.5).unwrap(), ..sc };
        let a = lambda_element(2, 1, 1, 1, &lossy).unwrap();
        let b = lambda_element(1, 2, 1, 1, &lossy).unwrap();
        assert!((a - b.conj()).norm() < 1e-16);
    }

    #[test]
    fn lossless_density_is_projected_pure_state() {
        for (tl, tr, nbar) in [(FRAC_PI_4, FRAC_PI_4, 0.5), (0.3, 1.1, 0.9), (1.4, 0.2, 0.1)] {
            let sc = scenario(1, tl, tr, nbar, 1.0, 1.0);
            let rho = register_density(&sc).unwrap();
            let c0 = tmsv_amplitude(0, &sc.tmsv);
            let c1 = tmsv_amplitude(1, &sc.tmsv);
            let mut ket = vec![Complex64::new(0.0, 0.0); 4];
            ket[0] = c1 * 0.5 * tl.cos() * tr.cos();
            ket[3] = c0 * 0.5 * tl.sin() * tr.sin();
            let oracle = ComplexMatrix::outer(&ket);
            assert!(rho.matrix().max_abs_diff(&oracle).unwrap() < 1e-12);
            let via_state = lossless_density(&sc).unwrap();
            assert!(rho.max_abs_diff(&via_state).unwrap() < 1e-15);
        }
    }

    #[test]
    fn one_sided_loss_matches_closed_form() {
        for (tl, tr, nbar, eta) in [(FRAC_PI_4, FRAC_PI_4, 0.5, 0.5), (0.4, 0.9, 0.3, 0.1), (1.2, 0.5, 1.5, 0.85)] {
            let sc = scenario(1, tl, tr, nbar, 1.0, eta);
            let rho = register_density(&sc).unwrap();
            let c0 = tmsv_amplitude(0, &sc.tmsv).re;
            let c1 = tmsv_amplitude(1, &sc.tmsv).re;
            let (cl, sl, cr, sr) = (tl.cos(), tl.sin(), tr.cos(), tr.sin());
            let mut oracle = ComplexMatrix::zeros(4, 4);
            oracle[(0, 0)] = Complex64::new(0.25 * c1 * c1 * eta * cl * cl * cr * cr, 0.0);
            oracle[(1, 1)] = Complex64::new(0.25 * c1 * c1 * (1.0 - eta) * cl * cl * sr * sr, 0.0);
            oracle[(3, 3)] = Complex64::new(0.25 * c0 * c0 * sl * sl * sr * sr, 0.0);
            let off = 0.25 * c1 * c0 * eta.sqrt() * sr * sl * cr * cl;
            oracle[(0, 3)] = Complex64::new(off, 0.0);
            oracle[(3, 0)] = Complex64::new(off, 0.0);
            let diff = rho.matrix().max_abs_diff(&oracle).unwrap();
            assert!(diff < 1e-12, "diff {diff}");
        }
    }

    #[test]
    fn success_probability_examples() {
        let sc = scenario(1, FRAC_PI_4, FRAC_PI_4, 0.5, 1.0, 1.0);
        let p = success_probability(&register_density(&sc).unwrap(), 1).unwrap();
        assert!((p - 2.0 / 9.0).abs() < 1e-12);
        let bonded = scenario(1, FRAC_PI_6, FRAC_PI_4, 0.5, 1.0, 1.0);
        let p = success_probability(&register_density(&bonded).unwrap(), 1).unwrap();
        assert!((p - 1.0 / 6.0).abs() < 1e-12);
        // all-dark registers: only the n = N term survives
        let dark = scenario(2, 0.0, 0.0, 0.5, 1.0, 1.0);
        let rho = register_density(&dark).unwrap();
        let c2 = tmsv_amplitude(2, &dark.tmsv).norm_sqr();
        let oracle = 16.0 * c2 * (2.0f64 / 16.0).powi(2);
        assert!((success_probability(&rho, 2).unwrap() - oracle).abs() < 1e-15);
        assert!((rho.get(0, 0).re - rho.trace()).abs() < 1e-15);
    }

    #[test]
    fn lossless_state_consistency() {
        let sc = scenario(3, 0.7, 0.9, 0.6, 1.0, 1.0);
        let amps = lossless_state(&sc).unwrap();
        let norm: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
        let rho = register_density(&sc).unwrap();
        assert!((norm - rho.trace()).abs() < 1e-15);
        let vac = scenario(2, 0.7, 0.9, 0.0, 1.0, 1.0);
        let amps = lossless_state(&vac).unwrap();
        assert!(amps[0].norm() > 0.0 && amps[1..].iter().all(|a| a.norm() == 0.0));
        assert!(lossless_state(&scenario(1, 0.7, 0.9, 0.6, 1.0, 0.9)).is_err());
    }

    #[test]
    fn theta_l_zero_pins_left_register() {
        // every left qubit starts in |0⟩, so only |I_0⟩ can be heralded
        let sc = scenario(2, 0.0, 0.8, 0.5, 0.7, 0.6);
        let rho = register_density(&sc).unwrap();
        let side = 3;
        for row in 0..9 {
            for col in 0..9 {
                if row / side != 0 || col / side != 0 {
                    assert_eq!(rho.get(row, col).norm(), 0.0);
                }
            }
        }
        assert!(rho.trace() > 0.0);
    }

    #[test]
    fn cutoff_checks() {
        let sc = scenario(1, 0.5, 0.5, 0.5, 0.9, 0.9);
        assert!(matches!(build_register_density(&sc, 5), Err(Error::CutoffTooSmall { .. })));
        assert!(build_register_density(&sc, 0).is_err());
        assert_eq!(default_cutoff(&sc).unwrap(), 25);
        assert_eq!(default_cutoff(&scenario(2, 0.5, 0.5, 0.5, 1.0, 1.0)).unwrap(), 2);
    }

    #[test]
    fn scenario_validation() {
        let t = TmsvParams::real(0.5).unwrap();
        assert!(RegisterScenario::new(1, -0.1, 0.2, t, 1.0, 1.0).is_err());
        assert!(RegisterScenario::new(1, 0.1, 1.7, t, 1.0, 1.0).is_err());
        assert!(RegisterScenario::new(1, 0.1, 0.2, t, 1.2, 1.0).is_err());
        assert!(RegisterScenario::new(0, 0.1, 0.2, t, 1.0, 1.0).is_err());
        assert!(TmsvParams::real(-0.1).is_err());
    }
}
