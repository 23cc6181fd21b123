//! Shared computations behind the experiments: register negativity scans,
//! the attempts → design → chain → key pipeline and its Fock-space variant.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use repeater_core::fock::{simulate_segment, ErrorModelParams};
use repeater_core::metrics::{bell_test, devetak_winter_key, di_key_rate, negativity, plob_bound};
use repeater_core::register::{register_density, RegisterScenario, TmsvParams};
use repeater_core::single_qubit::OneQubitDesign;
use repeater_core::stats::{attempts_normalization, RepeaterPlan};
use repeater_core::swap::{align_frame, chain_distribution, run_chain};
use repeater_core::{DensityMatrix, Error, Result};

use crate::audit::InvariantAudit;
use crate::optimize::grid_then_golden;

/// Per-run settings shared by all sweep points.
#[derive(Clone, Copy, Debug, Default)]
pub struct RunContext<'a> {
    pub seed: u64,
    pub audit: Option<&'a InvariantAudit>,
}

impl<'a> RunContext<'a> {
    pub fn new(seed: u64) -> Self {
        Self { seed, audit: None }
    }

    pub fn with_audit(seed: u64, audit: &'a InvariantAudit) -> Self {
        Self { seed, audit: Some(audit) }
    }

    pub fn audit(&self, context: &str, rho: &DensityMatrix) {
        if let Some(a) = self.audit {
            a.record(context, rho);
        }
    }

    /// Independent stream for sweep point `index`.
    pub fn rng(&self, index: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(index);
        rng
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Summary {
    pub mean: f64,
    /// Standard error of the mean (zero for a single sample).
    pub stderr: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        if values.len() < 2 {
            return Self { mean, stderr: 0.0 };
        }
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        Self { mean, stderr: (var / n).sqrt() }
    }

    pub fn scaled(self, f: f64) -> Self {
        Self { mean: self.mean * f, stderr: self.stderr * f }
    }
}

/// Negativity of the normalized register state.
pub fn register_negativity(sc: &RegisterScenario, ctx: &RunContext) -> Result<f64> {
    let rho = register_density(sc)?;
    ctx.audit("register", &rho);
    negativity(&rho.normalize()?, 0)
}

/// Symmetric lossless θ maximizing the register negativity.
pub fn symmetric_optimum(qubits: usize, mean_n: f64, grid: usize, tol: f64, ctx: &RunContext) -> Result<(f64, f64)> {
    let p = TmsvParams::real(mean_n)?;
    grid_then_golden(
        |t| register_negativity(&RegisterScenario::new(qubits, t, t, p, 1.0, 1.0)?, ctx),
        1e-3,
        std::f64::consts::FRAC_PI_2 - 1e-3,
        grid,
        tol,
    )
}

/// θ_R maximizing the negativity at fixed θ_L and loss η_R.
pub fn optimal_theta_r(
    qubits: usize,
    theta_l: f64,
    mean_n: f64,
    eta_r: f64,
    grid: usize,
    tol: f64,
    ctx: &RunContext,
) -> Result<(f64, f64)> {
    let p = TmsvParams::real(mean_n)?;
    grid_then_golden(
        |t| register_negativity(&RegisterScenario::new(qubits, theta_l, t, p, 1.0, eta_r)?, ctx),
        1e-3,
        std::f64::consts::FRAC_PI_2 - 1e-3,
        grid,
        tol,
    )
}

/// Segment design meeting the attempts budget of `plan`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SegmentDesign {
    pub plan: RepeaterPlan,
    pub p: f64,
    pub design: OneQubitDesign,
}

/// p from A, then θ_R, bonded θ_L and optimal ⟨n⟩. `Ok(None)` when the
/// required p is out of reach of a single-qubit segment.
pub fn design_segment(plan: &RepeaterPlan) -> Result<Option<SegmentDesign>> {
    let p = plan.segment_probability()?;
    match OneQubitDesign::for_target(p, plan.segment_transmission()) {
        Ok(design) => Ok(Some(SegmentDesign { plan: *plan, p, design })),
        Err(Error::Unattainable { .. }) => Ok(None),
        Err(e) => Err(e),
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChainPoint {
    pub segment: SegmentDesign,
    /// Devetak-Winter key per heralded pair.
    pub key: Summary,
    /// Key per attempt.
    pub rate: Summary,
    pub chsh: Summary,
    pub qber: Summary,
    pub di_key: Summary,
    pub plob: f64,
}

/// Averages `repetitions` sampled chains built from the analytic segment.
pub fn chain_point(seg: &SegmentDesign, repetitions: usize, rng: &mut ChaCha8Rng, ctx: &RunContext) -> Result<ChainPoint> {
    let m = seg.plan.segments;
    let state = seg.design.density(0.0)?;
    ctx.audit("segment", &state);
    let state = state.normalize()?;
    let (mut keys, mut chsh, mut qber, mut di) = (vec![], vec![], vec![], vec![]);
    for _ in 0..repetitions {
        let chain = run_chain(&state, m, rng)?;
        let rho = align_frame(&chain.rho)?;
        ctx.audit("chain", &rho);
        let key = devetak_winter_key(&rho)?.key_bits_per_success;
        let bell = bell_test(&rho)?;
        keys.push(key);
        chsh.push(bell.chsh_s);
        qber.push(bell.qber_q);
        di.push(di_key_rate(bell.qber_q, bell.chsh_s));
    }
    let key = Summary::of(&keys);
    let norm = attempts_normalization(seg.p, m)?;
    Ok(ChainPoint {
        segment: *seg,
        key,
        rate: key.scaled(norm),
        chsh: Summary::of(&chsh),
        qber: Summary::of(&qber),
        di_key: Summary::of(&di),
        plob: plob_bound(seg.plan.total_transmission())?,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FockPoint {
    pub segment: SegmentDesign,
    /// Heralding probability of the simulated segment.
    pub p_success: f64,
    /// Expected key per heralded chain, exact over all outcome records.
    pub key: f64,
    pub rate: f64,
    pub plob: f64,
}

/// Error-model version of the pipeline: the segment designed for the ideal
/// budget is simulated optically with `err`, its heralding probability
/// replaces p, and the chain is averaged exactly over Bell outcomes.
pub fn fock_chain_point(
    seg: &SegmentDesign,
    err: &ErrorModelParams,
    cutoff: usize,
    ctx: &RunContext,
) -> Result<FockPoint> {
    let d = &seg.design;
    let sc = RegisterScenario::new(1, d.theta_l, d.theta_r, d.tmsv(0.0)?, 1.0, d.eta)?;
    let raw = simulate_segment(&sc, err, cutoff)?;
    ctx.audit("fock segment", &raw);
    let plob = plob_bound(seg.plan.total_transmission())?;
    let p_success = raw.trace();
    if p_success <= 0.0 {
        return Ok(FockPoint { segment: *seg, p_success, key: 0.0, rate: 0.0, plob });
    }
    let m = seg.plan.segments;
    let mut key = 0.0;
    for (w, rho) in chain_distribution(&raw.normalize()?, m)? {
        ctx.audit("fock chain", &rho);
        key += w * devetak_winter_key(&rho)?.key_bits_per_success;
    }
    let rate = if key > 0.0 { key * attempts_normalization(p_success, m)? } else { 0.0 };
    Ok(FockPoint { segment: *seg, p_success, key, rate, plob })
}

#[cfg(test)]
mod tests {
    use super::*;
    use repeater_core::stats::normalized_key_rate;

    #[test]
    fn summary_statistics() {
        let s = Summary::of(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(s.mean, 2.5);
        assert!((s.stderr - (5.0f64 / 12.0).sqrt()).abs() < 1e-15);
        assert_eq!(Summary::of(&[7.0]).stderr, 0.0);
    }

    #[test]
    fn single_segment_rate_is_normalized_segment_key() {
        let plan = RepeaterPlan::new(1, 10.0, 0.2, 100.0).unwrap();
        let seg = design_segment(&plan).unwrap().unwrap();
        assert!((seg.p - 0.01).abs() < 1e-12);
        let ctx = RunContext::new(1);
        let point = chain_point(&seg, 3, &mut ctx.rng(0), &ctx).unwrap();
        let state = seg.design.density(0.0).unwrap().normalize().unwrap();
        let key = devetak_winter_key(&state).unwrap().key_bits_per_success;
        assert_eq!(point.key.stderr, 0.0);
        assert!((point.key.mean - key).abs() < 1e-14);
        assert!((point.rate.mean / normalized_key_rate(key, 0.01, 1).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ideal_fock_point_matches_analytic_segment() {
        let plan = RepeaterPlan::new(3, 60.0, 0.2, 500.0).unwrap();
        let seg = design_segment(&plan).unwrap().unwrap();
        let ctx = RunContext::new(1);
        let fock = fock_chain_point(&seg, &ErrorModelParams::ideal(), 12, &ctx).unwrap();
        assert!((fock.p_success / seg.p - 1.0).abs() < 1e-6);
        let exact: f64 = chain_distribution(&seg.design.density(0.0).unwrap().normalize().unwrap(), 3)
            .unwrap()
            .iter()
            .map(|(w, r)| w * devetak_winter_key(r).unwrap().key_bits_per_success)
            .sum();
        assert!((fock.key - exact).abs() < 1e-6);
    }

    #[test]
    fn streams_are_independent_and_reproducible() {
        use rand::Rng;
        let ctx = RunContext::new(5);
        let a: u64 = ctx.rng(0).random();
        let b: u64 = ctx.rng(1).random();
        assert_ne!(a, b);
        assert_eq!(a, ctx.rng(0).random::<u64>());
    }
}
