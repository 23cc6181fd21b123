//! Single-qubit amplifiers (`N = 1`) with loss on the right channel only.
//!
//! The left angle is tied to the right one ("bonded") so that the two
//! entangled diagonal populations of the heralded state are equal; the
//! remaining loss population then grows linearly under swapping.

use std::f64::consts::FRAC_PI_2;

use nalgebra::Matrix4;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{ComplexMatrix, DensityMatrix};
use crate::register::{tmsv_amplitude, TmsvParams};

/// Upper end of the θ_R interval searched by [`solve_theta_r`].
pub const THETA_R_MAX: f64 = 0.66;
/// Accepted |P(θ_R) − p| after root polishing.
pub const SOLVE_TOL: f64 = 1e-10;

fn check_transmission(eta: f64) -> Result<()> {
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(Error::Domain(format!("transmission {eta} outside (0, 1]")));
    }
    Ok(())
}

fn check_angle(name: &str, theta: f64) -> Result<()> {
    if !(0.0..=FRAC_PI_2).contains(&theta) {
        return Err(Error::Domain(format!("{name} = {theta} outside [0, pi/2]")));
    }
    Ok(())
}

/// Unnormalized heralded state for one specific click pattern, basis
/// `|00⟩, |01⟩, |10⟩, |11⟩` (left qubit first, `|0⟩` dark):
///
/// ```text
/// ¼ · [ |c1|²η cL²cR²      0                 0   c1c0*√η sL sR cL cR ]
///     [ 0                  |c1|²(1−η)cL²sR²  0   0                   ]
///     [ 0                  0                 0   0                   ]
///     [ c.c.               0                 0   |c0|² sL² sR²       ]
/// ```
pub fn one_qubit_density(theta_l: f64, theta_r: f64, p: &TmsvParams, eta: f64) -> Result<DensityMatrix> {
    check_angle("theta_L", theta_l)?;
    check_angle("theta_R", theta_r)?;
    check_transmission(eta)?;
    p.validate()?;
    let c0 = tmsv_amplitude(0, p);
    let c1 = tmsv_amplitude(1, p);
    let (sl, cl) = theta_l.sin_cos();
    let (sr, cr) = theta_r.sin_cos();
    let re = |x: f64| Complex64::new(0.25 * x, 0.0);
    let mut m = ComplexMatrix::zeros(4, 4);
    m[(0, 0)] = re(c1.norm_sqr() * eta * cl * cl * cr * cr);
    m[(1, 1)] = re(c1.norm_sqr() * (1.0 - eta) * cl * cl * sr * sr);
    m[(3, 3)] = re(c0.norm_sqr() * sl * sl * sr * sr);
    let off = c1 * c0.conj() * (0.25 * eta.sqrt() * sl * sr * cl * cr);
    m[(0, 3)] = off;
    m[(3, 0)] = off.conj();
    DensityMatrix::new(m, vec![2, 2], false)
}

/// θ_L with tan²θ_L = η |c1|² / (|c0|² tan²θ_R).
pub fn bond_theta_l(theta_r: f64, eta: f64, p: &TmsvParams) -> Result<f64> {
    check_angle("theta_R", theta_r)?;
    check_transmission(eta)?;
    p.validate()?;
    if theta_r == 0.0 {
        return Err(Error::Domain("bond undefined at theta_R = 0".into()));
    }
    let ratio = tmsv_amplitude(1, p).norm_sqr() / tmsv_amplitude(0, p).norm_sqr();
    Ok(((eta * ratio).sqrt() / theta_r.tan()).atan())
}

/// Success probability (all four click patterns) of the bonded design.
pub fn success_prob_bonded(theta_r: f64, mean_n: f64, eta: f64) -> Result<f64> {
    check_angle("theta_R", theta_r)?;
    check_transmission(eta)?;
    let p = TmsvParams::real(mean_n)?;
    let c0 = tmsv_amplitude(0, &p).norm_sqr();
    let c1 = tmsv_amplitude(1, &p).norm_sqr();
    let t = theta_r.tan().powi(2);
    let denom = t * c0 + eta * c1;
    if denom == 0.0 {
        return Ok(0.0);
    }
    Ok(theta_r.sin().powi(2) * c1 * c0 * (2.0 * eta + (1.0 - eta) * t) / denom)
}

/// Mean photon number maximizing [`success_prob_bonded`] at fixed θ_R:
/// n̄* = √(1 − η/(η + tan²θ_R)).
pub fn optimal_mean_n(theta_r: f64, eta: f64) -> Result<f64> {
    check_angle("theta_R", theta_r)?;
    check_transmission(eta)?;
    let t = theta_r.tan().powi(2);
    Ok((t / (eta + t)).sqrt())
}

/// P(θ_R; η): bonded success probability at the optimal squeezing.
pub fn success_prob_optimal(theta_r: f64, eta: f64) -> Result<f64> {
    success_prob_bonded(theta_r, optimal_mean_n(theta_r, eta)?, eta)
}

/// Coefficients (ascending powers of z = n̄*) of the quartic whose roots
/// give P(θ_R; η) = p.
pub fn quartic_coefficients(p: f64, eta: f64) -> [f64; 5] {
    [
        p,
        2.0 * p,
        eta * (p - 2.0),
        p * (2.0 * eta - 2.0),
        -p + (1.0 + p) * eta + eta * eta,
    ]
}

/// Real roots of a polynomial of degree ≤ 4 (ascending coefficients) via
/// companion-matrix eigenvalues.
fn real_roots(coeffs: &[f64; 5]) -> Vec<f64> {
    let scale = coeffs.iter().fold(0.0f64, |m, c| m.max(c.abs()));
    let mut degree = 4;
    while degree > 0 && coeffs[degree].abs() <= 1e-14 * scale {
        degree -= 1;
    }
    if degree == 0 {
        return Vec::new();
    }
    let lead = coeffs[degree];
    // companion matrix padded to 4x4; padding rows contribute zero roots
    let mut m = Matrix4::<f64>::zeros();
    for i in 1..degree {
        m[(i, i - 1)] = 1.0;
    }
    for i in 0..degree {
        m[(i, degree - 1)] = -coeffs[i] / lead;
    }
    // padding rows/columns only add spurious zero roots
    m.complex_eigenvalues()
        .iter()
        .filter(|z| z.im.abs() <= 1e-8 * (1.0 + z.re.abs()))
        .map(|z| z.re)
        .collect()
}

fn theta_from_z(z: f64, eta: f64) -> f64 {
    (eta * z * z / (1.0 - z * z)).sqrt().atan()
}

/// Smallest θ_R in (0, [`THETA_R_MAX`]) with P(θ_R; η) = `p_target`.
pub fn solve_theta_r(p_target: f64, eta: f64) -> Result<f64> {
    check_transmission(eta)?;
    if !(p_target > 0.0 && p_target < 1.0) {
        return Err(Error::Domain(format!("target probability {p_target} outside (0, 1)")));
    }
    let coeffs = quartic_coefficients(p_target, eta);
    let mut candidates: Vec<f64> = real_roots(&coeffs)
        .into_iter()
        .filter(|&z| z > 0.0 && z < 1.0)
        .map(|z| theta_from_z(z, eta))
        .filter(|&t| t > 0.0 && t < THETA_R_MAX + 1e-9)
        .collect();
    candidates.sort_by(f64::total_cmp);
    for guess in candidates {
        if let Some(theta) = polish(guess, p_target, eta) {
            if theta > 0.0 && theta < THETA_R_MAX {
                return Ok(theta);
            }
        }
    }
    Err(Error::Unattainable { p_target, eta })
}

/// Newton refinement of P(θ; η) = p, falling back to the raw guess when it
/// already meets the tolerance.
fn polish(guess: f64, p: f64, eta: f64) -> Option<f64> {
    let f = |t: f64| success_prob_optimal(t, eta).map(|v| v - p).ok();
    let mut theta = guess;
    let mut best = (f(theta)?.abs(), theta);
    for _ in 0..30 {
        let value = f(theta)?;
        if value.abs() < best.0 {
            best = (value.abs(), theta);
        }
        if value.abs() < 1e-15 {
            break;
        }
        let h = 1e-7 * theta.max(1e-3);
        let slope = (f(theta + h)? - f(theta - h)?) / (2.0 * h);
        if slope == 0.0 || !slope.is_finite() {
            break;
        }
        let next = theta - value / slope;
        if !(next > 0.0 && next < FRAC_PI_2) {
            break;
        }
        theta = next;
    }
    (best.0 < SOLVE_TOL).then_some(best.1)
}

/// Largest P(θ_R; η) reachable by [`solve_theta_r`].
pub fn max_attainable_probability(eta: f64) -> Result<f64> {
    success_prob_optimal(THETA_R_MAX, eta)
}

/// A fully specified bonded `N = 1` segment.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OneQubitDesign {
    pub theta_r: f64,
    pub theta_l: f64,
    pub mean_n: f64,
    pub eta: f64,
    /// Success probability the design was solved for.
    pub p_target: f64,
}

impl OneQubitDesign {
    /// Optimal squeezing and bonded θ_L for a given θ_R.
    pub fn from_theta_r(theta_r: f64, eta: f64) -> Result<Self> {
        let mean_n = optimal_mean_n(theta_r, eta)?;
        let theta_l = bond_theta_l(theta_r, eta, &TmsvParams::real(mean_n)?)?;
        let p_target = success_prob_bonded(theta_r, mean_n, eta)?;
        Ok(Self { theta_r, theta_l, mean_n, eta, p_target })
    }

    /// Cleanest design reaching success probability `p_target`.
    pub fn for_target(p_target: f64, eta: f64) -> Result<Self> {
        let theta_r = solve_theta_r(p_target, eta)?;
        let design = Self::from_theta_r(theta_r, eta)?;
        Ok(Self { p_target, ..design })
    }

    pub fn tmsv(&self, phase: f64) -> Result<TmsvParams> {
        TmsvParams::new(self.mean_n, phase)
    }

    /// Unnormalized heralded state of one click pattern.
    pub fn density(&self, phase: f64) -> Result<DensityMatrix> {
        one_qubit_density(self.theta_l, self.theta_r, &self.tmsv(phase)?, self.eta)
    }

    pub fn success_probability(&self) -> Result<f64> {
        success_prob_bonded(self.theta_r, self.mean_n, self.eta)
    }

    /// x₀ = (η⁻¹ − 1) tan²θ_R: loss population relative to the entangled ones.
    pub fn loss_ratio(&self) -> f64 {
        loss_ratio(0, self.theta_r, self.eta)
    }

    /// Common value k of the two entangled diagonal entries.
    pub fn prefactor(&self) -> Result<f64> {
        let c0 = tmsv_amplitude(0, &self.tmsv(0.0)?).norm_sqr();
        Ok(0.25 * c0 * (self.theta_l.sin() * self.theta_r.sin()).powi(2))
    }

    /// Bonded check: |ρ00 − ρ33| of the heralded state.
    pub fn bond_residual(&self) -> Result<f64> {
        let rho = self.density(0.0)?;
        Ok((rho.get(0, 0) - rho.get(3, 3)).norm())
    }
}

/// x_s = (s+1)(η⁻¹ − 1) tan²θ_R.
pub fn loss_ratio(swaps: usize, theta_r: f64, eta: f64) -> f64 {
    (swaps as f64 + 1.0) * (1.0 / eta - 1.0) * theta_r.tan().powi(2)
}

fn swapped_matrix(swaps: usize, theta_r: f64, eta: f64, phase: f64, scale: f64) -> ComplexMatrix {
    let x = loss_ratio(swaps, theta_r, eta);
    let u = Complex64::from_polar(1.0, phase + std::f64::consts::PI).powu(swaps as u32 + 1);
    let mut m = ComplexMatrix::zeros(4, 4);
    m[(0, 0)] = Complex64::new(scale, 0.0);
    m[(1, 1)] = Complex64::new(scale * x, 0.0);
    m[(3, 3)] = Complex64::new(scale, 0.0);
    m[(0, 3)] = u * scale;
    m[(3, 0)] = u.conj() * scale;
    m
}

/// Normalized state after `swaps` Φ⁺ swaps of bonded segments.
pub fn swapped_state_analytic(swaps: usize, theta_r: f64, eta: f64, phase: f64) -> Result<DensityMatrix> {
    check_angle("theta_R", theta_r)?;
    check_transmission(eta)?;
    let a = 1.0 / (2.0 + loss_ratio(swaps, theta_r, eta));
    DensityMatrix::new(swapped_matrix(swaps, theta_r, eta, phase, a), vec![2, 2], true)
}

/// Unnormalized counterpart: (½)^s k^{s+1} times the bracketed matrix, so
/// its trace is (½)^s k^{s+1} (2 + x_s).
pub fn swapped_state_unnormalized(swaps: usize, design: &OneQubitDesign, phase: f64) -> Result<DensityMatrix> {
    let k = design.prefactor()?;
    let scale = 0.5f64.powi(swaps as i32) * k.powi(swaps as i32 + 1);
    DensityMatrix::new(swapped_matrix(swaps, design.theta_r, design.eta, phase, scale), vec![2, 2], false)
}
