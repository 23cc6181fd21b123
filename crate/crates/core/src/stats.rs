//! Waiting-time statistics for `M` independently retried segments.
//!
//! Each segment succeeds per attempt with probability `p`; a repeater run
//! completes when the slowest segment has succeeded, so the completion time
//! is the maximum of `M` geometric variables.

use crate::error::{Error, Result};
use crate::metrics::fiber_transmission;

/// Smallest per-attempt success probability handled by the series.
pub const MIN_PROBABILITY: f64 = 1e-6;
/// Relative accuracy of every truncated series.
pub const SERIES_TOL: f64 = 1e-13;
/// Default fiber loss.
pub const DEFAULT_LOSS_DB_PER_KM: f64 = 0.2;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RepeaterPlan {
    pub segments: usize,
    pub segment_km: f64,
    pub loss_db_per_km: f64,
    /// Mean number of attempts A allowed for the whole chain.
    pub attempts: f64,
}

impl RepeaterPlan {
    pub fn new(segments: usize, segment_km: f64, loss_db_per_km: f64, attempts: f64) -> Result<Self> {
        let plan = Self { segments, segment_km, loss_db_per_km, attempts };
        if segments == 0 {
            return Err(Error::Domain("a repeater needs at least one segment".into()));
        }
        if !(segment_km > 0.0 && segment_km.is_finite()) {
            return Err(Error::Domain(format!("segment length {segment_km} km must be positive")));
        }
        if !(loss_db_per_km >= 0.0 && loss_db_per_km.is_finite()) {
            return Err(Error::Domain(format!("fiber loss {loss_db_per_km} dB/km must be >= 0")));
        }
        if !(attempts >= 1.0 && attempts.is_finite()) {
            return Err(Error::Domain(format!("allowed attempts {attempts} must be >= 1")));
        }
        Ok(plan)
    }

    pub fn total_km(&self) -> f64 {
        self.segments as f64 * self.segment_km
    }

    /// Transmission of one segment's fiber.
    pub fn segment_transmission(&self) -> f64 {
        fiber_transmission(self.segment_km, self.loss_db_per_km)
    }

    /// Transmission of the whole distance, for the repeaterless bound.
    pub fn total_transmission(&self) -> f64 {
        fiber_transmission(self.total_km(), self.loss_db_per_km)
    }

    /// Per-segment success probability giving `attempts` on average.
    pub fn segment_probability(&self) -> Result<f64> {
        solve_p_for_attempts(self.attempts, self.segments)
    }
}

fn check_p(p: f64) -> Result<()> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::Domain(format!("success probability {p} outside (0, 1]")));
    }
    if p < MIN_PROBABILITY {
        return Err(Error::Domain(format!(
            "success probability {p} below {MIN_PROBABILITY}: series would lose precision"
        )));
    }
    Ok(())
}

/// p (1 − p)^{n−1}.
pub fn geometric_pmf(n: usize, p: f64) -> Result<f64> {
    if n == 0 {
        return Err(Error::Domain("attempt numbers start at 1".into()));
    }
    check_p(p)?;
    if p == 1.0 {
        return Ok(if n == 1 { 1.0 } else { 0.0 });
    }
    Ok(p * ((n - 1) as f64 * (-p).ln_1p()).exp())
}

/// ln(1 − (1−p)^n), the log-CDF of one segment.
fn ln_segment_cdf(n: usize, p: f64) -> f64 {
    if p == 1.0 {
        return if n == 0 { f64::NEG_INFINITY } else { 0.0 };
    }
    let q_pow = (n as f64 * (-p).ln_1p()).exp();
    (-q_pow).ln_1p()
}

/// P(all M segments done within n attempts) = [1 − (1−p)^n]^M.
pub fn all_segments_cdf(n: usize, p: f64, m: usize) -> Result<f64> {
    check_p(p)?;
    Ok((m as f64 * ln_segment_cdf(n, p)).exp())
}

/// 1 − CDF_M(n), accurate when it is small.
pub fn all_segments_survival(n: usize, p: f64, m: usize) -> Result<f64> {
    check_p(p)?;
    Ok(-(m as f64 * ln_segment_cdf(n, p)).exp_m1())
}

/// P(the last segment succeeds at exactly attempt n).
pub fn all_segments_pdf(n: usize, p: f64, m: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::Domain("attempt numbers start at 1".into()));
    }
    let cdf = all_segments_cdf(n, p, m)?;
    let value = if cdf < 0.5 {
        cdf - all_segments_cdf(n - 1, p, m)?
    } else {
        all_segments_survival(n - 1, p, m)? - all_segments_survival(n, p, m)?
    };
    Ok(value.max(0.0))
}

/// Upper bound on Σ_{k > n} S(k) with S(k) ≤ M (1−p)^k.
fn survival_tail_bound(n: usize, p: f64, m: usize) -> f64 {
    m as f64 * ((n + 1) as f64 * (-p).ln_1p()).exp() / p
}

/// A = Σ n PDF_M(n), evaluated as Σ_{n ≥ 0} S(n).
pub fn expected_attempts(p: f64, m: usize) -> Result<f64> {
    check_p(p)?;
    if m == 0 {
        return Err(Error::Domain("need at least one segment".into()));
    }
    if p == 1.0 {
        return Ok(1.0);
    }
    let mut sum = 0.0;
    let mut n = 0;
    loop {
        sum += all_segments_survival(n, p, m)?;
        if survival_tail_bound(n, p, m) < SERIES_TOL * sum {
            return Ok(sum);
        }
        n += 1;
    }
}

/// p with expected_attempts(p, M) = A, by bisection.
pub fn solve_p_for_attempts(attempts: f64, m: usize) -> Result<f64> {
    if !(attempts >= 1.0 && attempts.is_finite()) {
        return Err(Error::Domain(format!("allowed attempts {attempts} must be >= 1")));
    }
    if m == 0 {
        return Err(Error::Domain("need at least one segment".into()));
    }
    if attempts == 1.0 {
        return Ok(1.0);
    }
    // 1/p ≤ A(p) ≤ H_M/p brackets the root
    let harmonic: f64 = (1..=m).map(|k| 1.0 / k as f64).sum();
    let mut lo = (0.5 / attempts).max(MIN_PROBABILITY);
    let mut hi = (2.0 * harmonic / attempts).min(1.0);
    if expected_attempts(lo, m)? < attempts {
        return Err(Error::Numerical(format!("cannot bracket p for A = {attempts}, M = {m}")));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if expected_attempts(mid, m)? > attempts {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    let p = 0.5 * (lo + hi);
    let achieved = expected_attempts(p, m)?;
    if ((achieved - attempts) / attempts).abs() > 1e-9 {
        return Err(Error::Numerical(format!("bisection stalled at A = {achieved} for target {attempts}")));
    }
    Ok(p)
}

/// Σ_n PDF_M(n)/n: expected inverse completion time.
pub fn attempts_normalization(p: f64, m: usize) -> Result<f64> {
    check_p(p)?;
    if p == 1.0 {
        return Ok(1.0);
    }
    let mut sum = 0.0;
    let mut n = 1;
    loop {
        sum += all_segments_pdf(n, p, m)? / n as f64;
        // Σ_{k>n} PDF(k)/k ≤ S(n)/(n+1)
        let tail = all_segments_survival(n, p, m)? / (n + 1) as f64;
        if tail < SERIES_TOL * sum {
            return Ok(sum);
        }
        n += 1;
    }
}

/// Key per attempt: K_M · Σ_n PDF_M(n)/n.
pub fn normalized_key_rate(key_bits: f64, p: f64, m: usize) -> Result<f64> {
    if !(key_bits >= 0.0) {
        return Err(Error::Domain(format!("key {key_bits} must be clamped to >= 0 before normalizing")));
    }
    Ok(key_bits * attempts_normalization(p, m)?)
}
