//! Entanglement swapping between neighbouring two-qubit links.
//!
//! Four-qubit states are ordered `L1, R1, L2, R2`; the Bell measurement acts
//! on the middle pair `(R1, L2)` and the survivors `(L1, R2)` keep their
//! order. Chains are reduced strictly left to right.

use num_complex::Complex64;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{ops, ComplexMatrix, DensityMatrix};

/// Branches whose states differ by less than this are merged by
/// [`chain_distribution`].
pub const MERGE_TOL: f64 = 1e-13;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BellOutcome {
    PhiPlus,
    PhiMinus,
    PsiPlus,
    PsiMinus,
}

impl BellOutcome {
    pub const ALL: [BellOutcome; 4] = [Self::PhiPlus, Self::PhiMinus, Self::PsiPlus, Self::PsiMinus];

    /// Normalized Bell vector over `|00⟩, |01⟩, |10⟩, |11⟩`.
    pub fn ket(self) -> [Complex64; 4] {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let z = 0.0;
        let v = match self {
            Self::PhiPlus => [s, z, z, s],
            Self::PhiMinus => [s, z, z, -s],
            Self::PsiPlus => [z, s, s, z],
            Self::PsiMinus => [z, s, -s, z],
        };
        v.map(|x| Complex64::new(x, 0.0))
    }

    /// Pauli correction on the surviving right qubit.
    pub fn correction(self) -> Pauli {
        match self {
            Self::PhiPlus => Pauli { x: false, z: false },
            Self::PhiMinus => Pauli { x: false, z: true },
            Self::PsiPlus => Pauli { x: true, z: false },
            Self::PsiMinus => Pauli { x: true, z: true },
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Self::PhiPlus => "phi+",
            Self::PhiMinus => "phi-",
            Self::PsiPlus => "psi+",
            Self::PsiMinus => "psi-",
        }
    }
}

/// Z^z X^x up to a global sign.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Pauli {
    pub x: bool,
    pub z: bool,
}

impl Pauli {
    pub fn matrix(self) -> ComplexMatrix {
        let mut m = ComplexMatrix::identity(2);
        if self.x {
            m = ops::pauli_x();
        }
        if self.z {
            m = ops::pauli_z().matmul(&m).expect("2x2");
        }
        m
    }

    pub fn compose(self, other: Pauli) -> Pauli {
        Pauli { x: self.x ^ other.x, z: self.z ^ other.z }
    }

    pub fn is_identity(self) -> bool {
        !self.x && !self.z
    }
}

fn check_four_qubits(omega: &DensityMatrix) -> Result<()> {
    if omega.dims() != [2, 2, 2, 2] {
        return Err(Error::DimensionMismatch(format!(
            "Bell projection needs dims [2, 2, 2, 2], got {:?}",
            omega.dims()
        )));
    }
    Ok(())
}

fn check_two_qubits(rho: &DensityMatrix) -> Result<()> {
    if rho.dims() != [2, 2] {
        return Err(Error::DimensionMismatch(format!("expected two qubits, got dims {:?}", rho.dims())));
    }
    Ok(())
}

/// ⟨B|_{R1 L2} Ω |B⟩_{R1 L2}: unnormalized state of `(L1, R2)` whose trace
/// is the probability of outcome `B`.
pub fn bell_project(omega: &DensityMatrix, outcome: BellOutcome) -> Result<DensityMatrix> {
    check_four_qubits(omega)?;
    let m = omega.matrix();
    let out = project_with(outcome, |a, mid, d, a2, mid2, d2| {
        m[((a << 3) | (mid << 1) | d, (a2 << 3) | (mid2 << 1) | d2)]
    });
    DensityMatrix::new(out, vec![2, 2], false)
}

/// Same as [`bell_project`] on `left ⊗ right` without forming the product.
pub fn bell_project_pair(left: &DensityMatrix, right: &DensityMatrix, outcome: BellOutcome) -> Result<DensityMatrix> {
    check_two_qubits(left)?;
    check_two_qubits(right)?;
    let (l, r) = (left.matrix(), right.matrix());
    // mid = (R1, L2) as a two-bit index
    let out = project_with(outcome, |a, mid, d, a2, mid2, d2| {
        l[((a << 1) | (mid >> 1), (a2 << 1) | (mid2 >> 1))] * r[(((mid & 1) << 1) | d, ((mid2 & 1) << 1) | d2)]
    });
    DensityMatrix::new(out, vec![2, 2], false)
}

fn project_with(
    outcome: BellOutcome,
    element: impl Fn(usize, usize, usize, usize, usize, usize) -> Complex64,
) -> ComplexMatrix {
    let bell = outcome.ket();
    let support: Vec<(usize, Complex64)> = bell.iter().copied().enumerate().filter(|(_, b)| b.norm() > 0.0).collect();
    let mut out = ComplexMatrix::zeros(4, 4);
    for row in 0..4 {
        for col in 0..4 {
            let (a, d, a2, d2) = (row >> 1, row & 1, col >> 1, col & 1);
            let mut acc = Complex64::new(0.0, 0.0);
            for &(mid, bm) in &support {
                for &(mid2, bm2) in &support {
                    acc += bm.conj() * element(a, mid, d, a2, mid2, d2) * bm2;
                }
            }
            out[(row, col)] = acc;
        }
    }
    out
}

/// Outcome probabilities (unnormalized traces), in [`BellOutcome::ALL`] order.
pub fn outcome_weights(omega: &DensityMatrix) -> Result<[f64; 4]> {
    let mut w = [0.0; 4];
    for (slot, o) in w.iter_mut().zip(BellOutcome::ALL) {
        *slot = bell_project(omega, o)?.trace().max(0.0);
    }
    Ok(w)
}

/// Draws an outcome with probability proportional to its weight.
pub fn sample_outcome<R: Rng + ?Sized>(omega: &DensityMatrix, rng: &mut R) -> Result<BellOutcome> {
    let weights = outcome_weights(omega)?;
    pick(&weights, rng)
}

/// [`sample_outcome`] on `left ⊗ right`.
pub fn sample_outcome_pair<R: Rng + ?Sized>(left: &DensityMatrix, right: &DensityMatrix, rng: &mut R) -> Result<BellOutcome> {
    let mut weights = [0.0; 4];
    for (slot, o) in weights.iter_mut().zip(BellOutcome::ALL) {
        *slot = bell_project_pair(left, right, o)?.trace().max(0.0);
    }
    pick(&weights, rng)
}

fn pick<R: Rng + ?Sized>(weights: &[f64; 4], rng: &mut R) -> Result<BellOutcome> {
    let dist = WeightedIndex::new(weights)
        .map_err(|_| Error::ZeroTrace("all Bell outcomes have zero weight".into()))?;
    Ok(BellOutcome::ALL[dist.sample(rng)])
}

/// Conjugates the right qubit by the outcome's Pauli correction.
pub fn apply_correction(rho: &DensityMatrix, outcome: BellOutcome) -> Result<DensityMatrix> {
    apply_pauli(rho, outcome.correction())
}

pub fn apply_pauli(rho: &DensityMatrix, pauli: Pauli) -> Result<DensityMatrix> {
    check_two_qubits(rho)?;
    if pauli.is_identity() {
        return Ok(rho.clone());
    }
    let u = ComplexMatrix::identity(2).kron(&pauli.matrix());
    rho.conjugate(&u)
}

/// Swaps `left = ρ(L1,R1)` with `right = ρ(L2,R2)` for a given outcome and
/// applies the correction. The result is unnormalized.
pub fn swap_pair(left: &DensityMatrix, right: &DensityMatrix, outcome: BellOutcome) -> Result<DensityMatrix> {
    apply_correction(&bell_project_pair(left, right, outcome)?, outcome)
}

/// Rotates the right qubit by a diagonal phase so that ⟨00|ρ|11⟩ is real and
/// nonnegative. The phase is fixed by the source phase and the outcome
/// record, both known to the parties.
pub fn align_frame(rho: &DensityMatrix) -> Result<DensityMatrix> {
    check_two_qubits(rho)?;
    let coherence = rho.get(0, 3);
    if coherence.norm() == 0.0 {
        return Ok(rho.clone());
    }
    let v = coherence / coherence.norm();
    let one = Complex64::new(1.0, 0.0);
    let u = ComplexMatrix::identity(2).kron(&ComplexMatrix::from_diagonal(&[one, v]));
    rho.conjugate(&u)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChainState {
    /// Normalized state of the two end qubits.
    pub rho: DensityMatrix,
    pub swaps_done: usize,
    pub outcome_log: Vec<BellOutcome>,
    /// Product of all corrections applied so far.
    pub correction_frame: Pauli,
}

impl ChainState {
    pub fn new(segment: &DensityMatrix) -> Result<Self> {
        check_two_qubits(segment)?;
        Ok(Self { rho: segment.normalize()?, swaps_done: 0, outcome_log: Vec::new(), correction_frame: Pauli::default() })
    }

    /// Extends the chain by one segment on the right.
    pub fn extend(&mut self, segment: &DensityMatrix, outcome: BellOutcome) -> Result<()> {
        let swapped = swap_pair(&self.rho, segment, outcome)?;
        if swapped.trace() <= 0.0 {
            return Err(Error::ZeroTrace(format!("outcome {} has zero weight", outcome.label())));
        }
        self.rho = swapped.normalize()?;
        self.swaps_done += 1;
        self.outcome_log.push(outcome);
        self.correction_frame = self.correction_frame.compose(outcome.correction());
        Ok(())
    }
}

/// Joins `m` copies of `segment` with `m − 1` sampled swaps.
pub fn run_chain<R: Rng + ?Sized>(segment: &DensityMatrix, m: usize, rng: &mut R) -> Result<ChainState> {
    if m == 0 {
        return Err(Error::Domain("a chain needs at least one segment".into()));
    }
    let seg = segment.normalize()?;
    let mut state = ChainState::new(&seg)?;
    for _ in 1..m {
        let outcome = sample_outcome_pair(&state.rho, &seg, rng)?;
        state.extend(&seg, outcome)?;
    }
    Ok(state)
}

/// Joins segments with a prescribed outcome sequence (length `m − 1`).
pub fn run_chain_with_outcomes(segment: &DensityMatrix, outcomes: &[BellOutcome]) -> Result<ChainState> {
    let seg = segment.normalize()?;
    let mut state = ChainState::new(&seg)?;
    for &o in outcomes {
        state.extend(&seg, o)?;
    }
    Ok(state)
}

/// Exact distribution of the end-to-end state over all outcome records,
/// merging branches that lead to the same state. Weights sum to one.
pub fn chain_distribution(segment: &DensityMatrix, m: usize) -> Result<Vec<(f64, DensityMatrix)>> {
    if m == 0 {
        return Err(Error::Domain("a chain needs at least one segment".into()));
    }
    let seg = segment.normalize()?;
    let mut branches = vec![(1.0, seg.clone())];
    for _ in 1..m {
        let mut next: Vec<(f64, DensityMatrix)> = Vec::new();
        for (w, rho) in &branches {
            for o in BellOutcome::ALL {
                let swapped = swap_pair(rho, &seg, o)?;
                let p = swapped.trace();
                if p <= 0.0 {
                    continue;
                }
                let state = swapped.normalize()?;
                let weight = w * p;
                match next.iter_mut().find(|(_, s)| s.max_abs_diff(&state).map_or(false, |d| d < MERGE_TOL)) {
                    Some(slot) => slot.0 += weight,
                    None => next.push((weight, state)),
                }
            }
        }
        branches = next;
    }
    Ok(branches)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::ops::phi_plus;
    use crate::single_qubit::{swapped_state_analytic, OneQubitDesign};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn bell_density(o: BellOutcome) -> DensityMatrix {
        DensityMatrix::pure(&o.ket(), vec![2, 2]).unwrap()
    }

    #[test]
    fn teleportation_identity() {
        let omega = phi_plus().tensor(&phi_plus()).unwrap();
        for o in BellOutcome::ALL {
            let projected = bell_project(&omega, o).unwrap();
            assert!((projected.trace() - 0.25).abs() < 1e-15);
            let expected = bell_density(o).scaled(0.25).unwrap();
            assert!(projected.max_abs_diff(&expected).unwrap() < 1e-15, "{o:?}");
            let corrected = apply_correction(&projected, o).unwrap();
            let target = phi_plus().scaled(0.25).unwrap();
            assert!(corrected.max_abs_diff(&target).unwrap() < 1e-15, "{o:?}");
        }
    }

    #[test]
    fn corrections_are_involutions() {
        let d = OneQubitDesign::from_theta_r(0.4, 0.3).unwrap().density(0.7).unwrap();
        for o in BellOutcome::ALL {
            let twice = apply_correction(&apply_correction(&d, o).unwrap(), o).unwrap();
            assert!(twice.max_abs_diff(&d).unwrap() < 1e-15);
        }
        assert_eq!(apply_correction(&d, BellOutcome::PhiPlus).unwrap(), d);
    }

    #[test]
    fn projection_rejects_wrong_dims() {
        assert!(bell_project(&phi_plus(), BellOutcome::PhiPlus).is_err());
    }

    #[test]
    fn bonded_swap_doubles_loss_entry() {
        let d = OneQubitDesign::from_theta_r(0.5, 0.4).unwrap();
        let rho = d.density(0.0).unwrap();
        let projected = bell_project(&rho.tensor(&rho).unwrap(), BellOutcome::PhiPlus).unwrap();
        let k = d.prefactor().unwrap();
        let x = d.loss_ratio();
        assert!((projected.get(0, 0).re - 0.5 * k * k).abs() < 1e-15);
        assert!((projected.get(1, 1).re - 0.5 * k * k * 2.0 * x).abs() < 1e-15);
        assert!((projected.get(3, 3).re - 0.5 * k * k).abs() < 1e-15);
        let normalized = projected.normalize().unwrap();
        let analytic = swapped_state_analytic(1, d.theta_r, d.eta, 0.0).unwrap();
        assert!(normalized.max_abs_diff(&analytic).unwrap() < 1e-12);
    }

    #[test]
    fn forced_phi_plus_chain_matches_analytic() {
        for phase in [0.0, 0.9] {
            let d = OneQubitDesign::from_theta_r(0.35, 0.6).unwrap();
            let seg = d.density(phase).unwrap();
            for s in 1..=8 {
                let chain = run_chain_with_outcomes(&seg, &vec![BellOutcome::PhiPlus; s]).unwrap();
                let analytic = swapped_state_analytic(s, d.theta_r, d.eta, phase).unwrap();
                assert!(chain.rho.max_abs_diff(&analytic).unwrap() < 1e-12, "s={s}");
            }
        }
    }

    #[test]
    fn unnormalized_prefactor_recursion() {
        use crate::single_qubit::swapped_state_unnormalized;
        let d = OneQubitDesign::from_theta_r(0.45, 0.5).unwrap();
        let seg = d.density(0.0).unwrap();
        let mut rho = seg.clone();
        for s in 1..=6 {
            let omega = rho.tensor(&seg).unwrap();
            rho = bell_project(&omega, BellOutcome::PhiPlus).unwrap();
            let analytic = swapped_state_unnormalized(s, &d, 0.0).unwrap();
            let scale = analytic.trace();
            assert!((rho.trace() - scale).abs() < 1e-12 * scale, "s={s}");
            assert!(rho.max_abs_diff(&analytic).unwrap() < 1e-12 * scale);
        }
    }

    #[test]
    fn outcome_weights_are_complete() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let a = random_two_qubit(&mut rng);
            let b = random_two_qubit(&mut rng).scaled(0.37).unwrap();
            let omega = a.tensor(&b).unwrap();
            let total: f64 = outcome_weights(&omega).unwrap().iter().sum();
            assert!((total - omega.trace()).abs() < 1e-12);
        }
    }

    #[test]
    fn bonded_branches_pairwise_coincide_after_correction() {
        let d = OneQubitDesign::from_theta_r(0.5, 0.3).unwrap();
        let rho = d.density(0.0).unwrap();
        let omega = rho.tensor(&rho).unwrap();
        let branch = |o| apply_correction(&bell_project(&omega, o).unwrap(), o).unwrap();
        let phi = (branch(BellOutcome::PhiPlus), branch(BellOutcome::PhiMinus));
        let psi = (branch(BellOutcome::PsiPlus), branch(BellOutcome::PsiMinus));
        assert!(phi.0.max_abs_diff(&phi.1).unwrap() < 1e-15);
        assert!(psi.0.max_abs_diff(&psi.1).unwrap() < 1e-15);
        // Φ and Ψ branches differ in where the loss population lands
        assert!(phi.0.max_abs_diff(&psi.0).unwrap() > 1e-6);
    }

    #[test]
    fn sampling_statistics_on_bell_pairs() {
        let omega = phi_plus().tensor(&phi_plus()).unwrap();
        let weights = outcome_weights(&omega).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let n = 100_000;
        let mut counts = [0usize; 4];
        for _ in 0..n {
            let o = pick(&weights, &mut rng).unwrap();
            counts[BellOutcome::ALL.iter().position(|&x| x == o).unwrap()] += 1;
        }
        let sigma = (n as f64 * 0.25 * 0.75).sqrt();
        for c in counts {
            assert!((c as f64 - n as f64 * 0.25).abs() < 3.0 * sigma, "{counts:?}");
        }
    }

    #[test]
    fn degenerate_weights_always_pick_the_only_branch() {
        let zero = DensityMatrix::new(ops::basis_projector(4, 0), vec![2, 2], true).unwrap();
        let omega = zero.tensor(&zero).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let weights = outcome_weights(&omega).unwrap();
        assert!((weights[0] - 0.5).abs() < 1e-15 && (weights[1] - 0.5).abs() < 1e-15);
        let only = [0.0, 0.0, 1.0, 0.0];
        for _ in 0..100 {
            assert_eq!(pick(&only, &mut rng).unwrap(), BellOutcome::PsiPlus);
        }
        assert!(pick(&[0.0; 4], &mut rng).is_err());
    }

    #[test]
    fn fixed_seed_is_reproducible() {
        let seg = OneQubitDesign::from_theta_r(0.4, 0.2).unwrap().density(0.0).unwrap();
        let a = run_chain(&seg, 12, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        let b = run_chain(&seg, 12, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.swaps_done, 11);
        assert_eq!(a.outcome_log.len(), 11);
    }

    #[test]
    fn single_segment_chain_is_the_segment() {
        let seg = OneQubitDesign::from_theta_r(0.4, 0.2).unwrap().density(0.0).unwrap();
        let chain = run_chain(&seg, 1, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert!(chain.rho.max_abs_diff(&seg.normalize().unwrap()).unwrap() < 1e-15);
        assert!(run_chain(&seg, 0, &mut ChaCha8Rng::seed_from_u64(0)).is_err());
    }

    #[test]
    fn exact_distribution_is_normalized_and_matches_sampling_mean() {
        let seg = OneQubitDesign::from_theta_r(0.4, 0.3).unwrap().density(0.0).unwrap();
        let dist = chain_distribution(&seg, 5).unwrap();
        let total: f64 = dist.iter().map(|(w, _)| w).sum();
        assert!((total - 1.0).abs() < 1e-12);
        // Φ± and Ψ± branches merge pairwise at every swap
        assert!(dist.len() <= 16, "{} branches", dist.len());
        let zz = ComplexMatrix::from_diagonal(&[1.0, -1.0, -1.0, 1.0].map(|v| Complex64::new(v, 0.0)));
        let exact: f64 = dist.iter().map(|(w, r)| w * r.expectation(&zz).unwrap()).sum();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let runs = 4000;
        let mut samples = Vec::with_capacity(runs);
        for _ in 0..runs {
            samples.push(run_chain(&seg, 5, &mut rng).unwrap().rho.expectation(&zz).unwrap());
        }
        let mean = samples.iter().sum::<f64>() / runs as f64;
        let var = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (runs - 1) as f64;
        assert!((mean - exact).abs() < 4.0 * (var / runs as f64).sqrt() + 1e-12);
    }

    #[test]
    fn frame_alignment_makes_coherence_positive() {
        let seg = OneQubitDesign::from_theta_r(0.4, 0.3).unwrap().density(1.1).unwrap();
        let chain = run_chain(&seg, 4, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        let aligned = align_frame(&chain.rho).unwrap();
        let c = aligned.get(0, 3);
        assert!(c.re > 0.0 && c.im.abs() < 1e-15);
        assert!((c.norm() - chain.rho.get(0, 3).norm()).abs() < 1e-15);
    }

    fn random_two_qubit(rng: &mut ChaCha8Rng) -> DensityMatrix {
        use rand::Rng;
        let g = ComplexMatrix::from_fn(4, 4, |_, _| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        let m = g.matmul(&g.dagger()).unwrap();
        let t = m.trace().re;
        let m = m.scale_real(1.0 / t);
        let herm = m.add(&m.dagger()).unwrap().scale_real(0.5);
        DensityMatrix::new(herm, vec![2, 2], true).unwrap()
    }
}
