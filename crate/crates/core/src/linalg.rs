//! Dense complex matrices and density matrices.
//!
//! Everything here is small (dimension at most a few hundred) and stored
//! densely in row-major order. Hermitian eigenvalues are delegated to
//! `nalgebra`; the remaining operations are index arithmetic.

use std::fmt;
use std::ops::{Index, IndexMut};

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Max elementwise |ρ − ρ†| accepted for a density matrix.
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Most negative eigenvalue accepted for a density matrix.
pub const PSD_TOL: f64 = 1e-10;
/// Trace tolerance for normalized states.
pub const TRACE_TOL: f64 = 1e-10;
/// Hermiticity required before an eigendecomposition is attempted.
pub const EIGEN_HERMITIAN_TOL: f64 = 1e-10;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

#[derive(Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl ComplexMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<Complex64>) -> Result<Self> {
        if rows * cols != data.len() {
            return Err(Error::DimensionMismatch(format!(
                "{rows}x{cols} matrix needs {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![ZERO; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = ONE;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    /// Real 2-D array literal, handy for tests and fixed operators.
    pub fn from_real(rows: &[&[f64]]) -> Self {
        let n_rows = rows.len();
        let n_cols = rows.first().map_or(0, |r| r.len());
        Self::from_fn(n_rows, n_cols, |r, c| Complex64::new(rows[r][c], 0.0))
    }

    pub fn from_diagonal(diag: &[Complex64]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
    }

    /// |v⟩⟨v|
    pub fn outer(v: &[Complex64]) -> Self {
        Self::from_fn(v.len(), v.len(), |r, c| v[r] * v[c].conj())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn dagger(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |r, c| self[(c, r)].conj())
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |r, c| self[(c, r)])
    }

    pub fn scale(&self, s: Complex64) -> Self {
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().map(|&x| x * s).collect() }
    }

    pub fn scale_real(&self, s: f64) -> Self {
        self.scale(Complex64::new(s, 0.0))
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_same_shape(other)?;
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect();
        Ok(Self { rows: self.rows, cols: self.cols, data })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_same_shape(other)?;
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        Ok(Self { rows: self.rows, cols: self.cols, data })
    }

    pub fn add_assign(&mut self, other: &Self) -> Result<()> {
        self.check_same_shape(other)?;
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
        Ok(())
    }

    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for r in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(r, k)];
                if a == ZERO {
                    continue;
                }
                let row = &other.data[k * other.cols..(k + 1) * other.cols];
                let dst = &mut out.data[r * other.cols..(r + 1) * other.cols];
                for (d, &b) in dst.iter_mut().zip(row) {
                    *d += a * b;
                }
            }
        }
        Ok(out)
    }

    /// U · self · U†
    pub fn conjugate_by(&self, u: &Self) -> Result<Self> {
        u.matmul(self)?.matmul(&u.dagger())
    }

    /// Kronecker product; the left factor indexes the slow (outer) block.
    pub fn kron(&self, other: &Self) -> Self {
        let rows = self.rows * other.rows;
        let cols = self.cols * other.cols;
        Self::from_fn(rows, cols, |r, c| {
            self[(r / other.rows, c / other.cols)] * other[(r % other.rows, c % other.cols)]
        })
    }

    pub fn max_abs_diff(&self, other: &Self) -> Result<f64> {
        self.check_same_shape(other)?;
        Ok(self.data.iter().zip(&other.data).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max))
    }

    /// max |A − A†| elementwise.
    pub fn hermiticity_deviation(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let mut dev: f64 = 0.0;
        for r in 0..self.rows {
            for c in r..self.cols {
                dev = dev.max((self[(r, c)] - self[(c, r)].conj()).norm());
            }
        }
        dev
    }

    /// Partial transpose of the `subsystem` factor of a tensor-product space
    /// with the given local dimensions:
    /// ⟨i,j|A^T|k,l⟩ = ⟨k,j|A|i,l⟩ for subsystem 0 of two, generalised.
    pub fn partial_transpose(&self, dims: &[usize], subsystem: usize) -> Result<Self> {
        check_dims(self, dims)?;
        if subsystem >= dims.len() {
            return Err(Error::InvalidSubsystem { index: subsystem, count: dims.len() });
        }
        let strides = strides(dims);
        let stride = strides[subsystem];
        let d = dims[subsystem];
        let n = self.rows;
        Ok(Self::from_fn(n, n, |r, c| {
            let dr = (r / stride) % d;
            let dc = (c / stride) % d;
            // swap the local indices of the transposed factor
            let r_src = r - dr * stride + dc * stride;
            let c_src = c - dc * stride + dr * stride;
            self[(r_src, c_src)]
        }))
    }

    /// Trace over every subsystem not listed in `keep`; kept factors retain
    /// their original order.
    pub fn partial_trace(&self, dims: &[usize], keep: &[usize]) -> Result<(Self, Vec<usize>)> {
        check_dims(self, dims)?;
        if keep.is_empty() {
            return Err(Error::EmptyKeepSet);
        }
        let mut keep_sorted = keep.to_vec();
        keep_sorted.sort_unstable();
        keep_sorted.dedup();
        if let Some(&bad) = keep_sorted.iter().find(|&&k| k >= dims.len()) {
            return Err(Error::InvalidSubsystem { index: bad, count: dims.len() });
        }
        let kept_dims: Vec<usize> = keep_sorted.iter().map(|&k| dims[k]).collect();
        let traced: Vec<usize> = (0..dims.len()).filter(|i| !keep_sorted.contains(i)).collect();
        let traced_dims: Vec<usize> = traced.iter().map(|&k| dims[k]).collect();
        let full_strides = strides(dims);
        let kept_strides = strides(&kept_dims);
        let out_dim: usize = kept_dims.iter().product();
        let env_dim: usize = traced_dims.iter().product();
        let mut out = Self::zeros(out_dim, out_dim);

        // full index from (kept multi-index, traced multi-index)
        let compose = |kept_flat: usize, env_flat: usize| -> usize {
            let mut idx = 0;
            for (slot, &sub) in keep_sorted.iter().enumerate() {
                let local = (kept_flat / kept_strides[slot]) % kept_dims[slot];
                idx += local * full_strides[sub];
            }
            let mut rem = env_flat;
            for (slot, &sub) in traced.iter().enumerate().rev() {
                let local = rem % traced_dims[slot];
                rem /= traced_dims[slot];
                idx += local * full_strides[sub];
            }
            idx
        };

        for r in 0..out_dim {
            for c in 0..out_dim {
                let mut acc = ZERO;
                for e in 0..env_dim {
                    acc += self[(compose(r, e), compose(c, e))];
                }
                out[(r, c)] = acc;
            }
        }
        Ok((out, kept_dims))
    }

    fn check_same_shape(&self, other: &Self) -> Result<()> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} vs {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        Ok(())
    }

    fn to_nalgebra(&self) -> DMatrix<Complex64> {
        DMatrix::from_row_slice(self.rows, self.cols, &self.data)
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = Complex64;

    fn index(&self, (r, c): (usize, usize)) -> &Complex64 {
        &self.data[r * self.cols + c]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut Complex64 {
        &mut self.data[r * self.cols + c]
    }
}

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ComplexMatrix {}x{} [", self.rows, self.cols)?;
        for r in 0..self.rows {
            write!(f, "  ")?;
            for c in 0..self.cols {
                let z = self[(r, c)];
                write!(f, "{:+.6e}{:+.6e}i ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

/// Row-major strides for a tensor-product index with the given local dims.
pub(crate) fn strides(dims: &[usize]) -> Vec<usize> {
    let mut s = vec![1; dims.len()];
    for i in (0..dims.len().saturating_sub(1)).rev() {
        s[i] = s[i + 1] * dims[i + 1];
    }
    s
}

fn check_dims(m: &ComplexMatrix, dims: &[usize]) -> Result<()> {
    let prod: usize = dims.iter().product();
    if !m.is_square() || prod != m.rows {
        return Err(Error::DimensionMismatch(format!(
            "subsystem dims {dims:?} (product {prod}) do not match a {}x{} matrix",
            m.rows, m.cols
        )));
    }
    Ok(())
}

/// Ascending eigenvalues of a Hermitian matrix.
pub fn hermitian_eigenvalues(m: &ComplexMatrix) -> Result<Vec<f64>> {
    Ok(hermitian_eigen(m)?.0)
}

/// Eigenvalues (ascending) and the matching eigenvectors as matrix columns.
pub fn hermitian_eigen(m: &ComplexMatrix) -> Result<(Vec<f64>, ComplexMatrix)> {
    if !m.is_square() {
        return Err(Error::DimensionMismatch(format!("{}x{} is not square", m.rows, m.cols)));
    }
    let deviation = m.hermiticity_deviation();
    if deviation > EIGEN_HERMITIAN_TOL {
        return Err(Error::NotHermitian { deviation });
    }
    let n = m.rows;
    if n == 0 {
        return Ok((Vec::new(), ComplexMatrix::zeros(0, 0)));
    }
    let eig = SymmetricEigen::new(m.to_nalgebra());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = ComplexMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    Ok((values, vectors))
}

/// −Σ λ log₂ λ over the given spectrum, with 0·log 0 = 0.
pub fn entropy_bits(eigenvalues: &[f64]) -> f64 {
    eigenvalues
        .iter()
        .map(|&l| if l > 0.0 { -l * l.log2() } else { 0.0 })
        .sum::<f64>()
        .max(0.0)
}

/// A density matrix together with its tensor-factor layout.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    matrix: ComplexMatrix,
    dims: Vec<usize>,
    normalized: bool,
}

impl DensityMatrix {
    /// Validates Hermiticity, positivity and the trace bound before wrapping.
    pub fn new(matrix: ComplexMatrix, dims: Vec<usize>, normalized: bool) -> Result<Self> {
        check_dims(&matrix, &dims)?;
        let deviation = matrix.hermiticity_deviation();
        if deviation > HERMITIAN_TOL {
            return Err(Error::NotHermitian { deviation });
        }
        let trace = matrix.trace().re;
        if normalized {
            if (trace - 1.0).abs() > TRACE_TOL {
                return Err(Error::NotNormalized { trace });
            }
        } else if !(-TRACE_TOL..=1.0 + TRACE_TOL).contains(&trace) {
            return Err(Error::InvalidDensity(format!("trace {trace} outside [0, 1]")));
        }
        let spectrum = hermitian_eigenvalues(&matrix)?;
        if let Some(&min) = spectrum.first() {
            if min < -PSD_TOL {
                return Err(Error::InvalidDensity(format!("negative eigenvalue {min:e}")));
            }
        }
        Ok(Self { matrix, dims, normalized })
    }

    /// |ψ⟩⟨ψ|; flagged normalized when ⟨ψ|ψ⟩ = 1.
    pub fn pure(amplitudes: &[Complex64], dims: Vec<usize>) -> Result<Self> {
        let norm: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum();
        Self::new(ComplexMatrix::outer(amplitudes), dims, (norm - 1.0).abs() <= TRACE_TOL)
    }

    pub fn maximally_mixed(dims: Vec<usize>) -> Self {
        let n: usize = dims.iter().product();
        let matrix = ComplexMatrix::identity(n).scale_real(1.0 / n as f64);
        Self { matrix, dims, normalized: true }
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.matrix
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace().re
    }

    pub fn get(&self, r: usize, c: usize) -> Complex64 {
        self.matrix[(r, c)]
    }

    /// ρ / Tr ρ
    pub fn normalize(&self) -> Result<Self> {
        let trace = self.trace();
        if trace <= 0.0 {
            return Err(Error::ZeroTrace("cannot normalize a zero-trace state".into()));
        }
        Self::new(self.matrix.scale_real(1.0 / trace), self.dims.clone(), true)
    }

    /// Kronecker product; subsystem dims are concatenated.
    pub fn tensor(&self, other: &Self) -> Result<Self> {
        let mut dims = self.dims.clone();
        dims.extend_from_slice(&other.dims);
        Self::new(self.matrix.kron(&other.matrix), dims, self.normalized && other.normalized)
    }

    /// ρ^{T_k}. The result is Hermitian with the same trace but in general
    /// not positive, so it is returned as a bare matrix.
    pub fn partial_transpose(&self, subsystem: usize) -> Result<ComplexMatrix> {
        self.matrix.partial_transpose(&self.dims, subsystem)
    }

    pub fn partial_trace(&self, keep: &[usize]) -> Result<Self> {
        let (m, dims) = self.matrix.partial_trace(&self.dims, keep)?;
        Self::new(m, dims, self.normalized)
    }

    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        hermitian_eigenvalues(&self.matrix)
    }

    /// Entropy in bits; eigenvalues in [−PSD_TOL, 0) are treated as zero.
    pub fn von_neumann_entropy(&self) -> Result<f64> {
        let trace = self.trace();
        if (trace - 1.0).abs() > TRACE_TOL {
            return Err(Error::NotNormalized { trace });
        }
        Ok(entropy_bits(&self.eigenvalues()?))
    }

    /// Re Tr(ρ O).
    pub fn expectation(&self, op: &ComplexMatrix) -> Result<f64> {
        Ok(self.matrix.matmul(op)?.trace().re)
    }

    /// U ρ U†, keeping the layout and normalization flag.
    pub fn conjugate(&self, u: &ComplexMatrix) -> Result<Self> {
        Self::new(self.matrix.conjugate_by(u)?, self.dims.clone(), self.normalized)
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(self.matrix.scale_real(factor), self.dims.clone(), false)
    }

    pub fn max_abs_diff(&self, other: &Self) -> Result<f64> {
        self.matrix.max_abs_diff(&other.matrix)
    }

    /// Re-runs every invariant check; useful after a long pipeline.
    pub fn check_invariants(&self) -> Result<()> {
        Self::new(self.matrix.clone(), self.dims.clone(), self.normalized).map(|_| ())
    }
}

/// Pauli and basis-state helpers shared across modules.
pub mod ops {
    use super::*;

    pub fn pauli_x() -> ComplexMatrix {
        ComplexMatrix::from_real(&[&[0.0, 1.0], &[1.0, 0.0]])
    }

    pub fn pauli_z() -> ComplexMatrix {
        ComplexMatrix::from_real(&[&[1.0, 0.0], &[0.0, -1.0]])
    }

    pub fn pauli_y() -> ComplexMatrix {
        let i = Complex64::i();
        ComplexMatrix::new(2, 2, vec![ZERO, -i, i, ZERO]).expect("2x2")
    }

    pub fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    /// (|00⟩ + |11⟩)/√2 as a normalized density matrix.
    pub fn phi_plus() -> DensityMatrix {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        DensityMatrix::pure(&[c(s), ZERO, ZERO, c(s)], vec![2, 2]).expect("valid Bell state")
    }

    pub fn basis_projector(dim: usize, k: usize) -> ComplexMatrix {
        let mut m = ComplexMatrix::zeros(dim, dim);
        m[(k, k)] = ONE;
        m
    }
}

#[cfg(test)]
mod tests {
    use super::ops::*;
    use super::*;

    fn diag(vals: &[f64]) -> ComplexMatrix {
        ComplexMatrix::from_diagonal(&vals.iter().map(|&v| c(v)).collect::<Vec<_>>())
    }

    #[test]
    fn tensor_of_maximally_mixed_is_maximally_mixed() {
        let half = DensityMatrix::maximally_mixed(vec![2]);
        let t = half.tensor(&half).unwrap();
        assert_eq!(t.dims(), &[2, 2]);
        let expected = ComplexMatrix::identity(4).scale_real(0.25);
        assert!(t.matrix().max_abs_diff(&expected).unwrap() < 1e-15);
    }

    #[test]
    fn tensor_of_basis_states_orders_left_factor_first() {
        let zero = DensityMatrix::new(basis_projector(2, 0), vec![2], true).unwrap();
        let one = DensityMatrix::new(basis_projector(2, 1), vec![2], true).unwrap();
        let t = zero.tensor(&one).unwrap();
        assert!(t.matrix().max_abs_diff(&diag(&[0.0, 1.0, 0.0, 0.0])).unwrap() < 1e-15);
    }

    #[test]
    fn partial_transpose_of_bell_state() {
        let pt = phi_plus().partial_transpose(0).unwrap();
        let ev = hermitian_eigenvalues(&pt).unwrap();
        let expected = [-0.5, 0.5, 0.5, 0.5];
        for (a, b) in ev.iter().zip(expected) {
            assert!((a - b).abs() < 1e-12, "{ev:?}");
        }
    }

    #[test]
    fn partial_transpose_rejects_bad_index() {
        assert_eq!(
            phi_plus().partial_transpose(2),
            Err(Error::InvalidSubsystem { index: 2, count: 2 })
        );
    }

    #[test]
    fn partial_trace_of_bell_state_is_maximally_mixed() {
        let marginal = phi_plus().partial_trace(&[1]).unwrap();
        let expected = ComplexMatrix::identity(2).scale_real(0.5);
        assert!(marginal.matrix().max_abs_diff(&expected).unwrap() < 1e-15);
        assert_eq!(phi_plus().partial_trace(&[]), Err(Error::EmptyKeepSet));
    }

    #[test]
    fn partial_trace_of_product_state_with_unnormalized_factor() {
        let a = DensityMatrix::new(diag(&[0.3, 0.7]), vec![2], true).unwrap();
        let b = DensityMatrix::new(diag(&[0.1, 0.2, 0.1]), vec![3], false).unwrap();
        let ab = a.tensor(&b).unwrap();
        let ra = ab.partial_trace(&[0]).unwrap();
        let expected = a.matrix().scale_real(b.trace());
        assert!(ra.matrix().max_abs_diff(&expected).unwrap() < 1e-15);
    }

    #[test]
    fn eigenvalues_of_simple_matrices() {
        assert_eq!(hermitian_eigenvalues(&diag(&[3.0, 1.0, 2.0])).unwrap(), vec![1.0, 2.0, 3.0]);
        let ev = hermitian_eigenvalues(&pauli_x()).unwrap();
        assert!((ev[0] + 1.0).abs() < 1e-15 && (ev[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn eigen_rejects_non_hermitian() {
        let m = ComplexMatrix::from_real(&[&[0.0, 1.0], &[0.0, 0.0]]);
        assert!(matches!(hermitian_eigenvalues(&m), Err(Error::NotHermitian { .. })));
    }

    #[test]
    fn entropy_values() {
        let pure = phi_plus();
        assert!(pure.von_neumann_entropy().unwrap().abs() < 1e-12);
        let mixed = DensityMatrix::maximally_mixed(vec![2]);
        assert!((mixed.von_neumann_entropy().unwrap() - 1.0).abs() < 1e-12);
        let skewed = DensityMatrix::new(diag(&[0.25, 0.75]), vec![2], true).unwrap();
        // −0.25 log₂ 0.25 − 0.75 log₂ 0.75
        let oracle = 0.5 + 0.75 * (4.0f64 / 3.0).log2();
        assert!((skewed.von_neumann_entropy().unwrap() - oracle).abs() < 1e-12);
        assert!((oracle - 0.811278).abs() < 1e-6);
    }

    #[test]
    fn entropy_rejects_unnormalized() {
        let half = DensityMatrix::new(diag(&[0.25, 0.25]), vec![2], false).unwrap();
        assert!(matches!(half.von_neumann_entropy(), Err(Error::NotNormalized { .. })));
    }

    #[test]
    fn density_validation() {
        let not_psd = diag(&[1.5, -0.5]);
        assert!(matches!(
            DensityMatrix::new(not_psd, vec![2], true),
            Err(Error::InvalidDensity(_))
        ));
        let wrong_dims = DensityMatrix::new(ComplexMatrix::identity(4), vec![2, 3], false);
        assert!(matches!(wrong_dims, Err(Error::DimensionMismatch(_))));
        assert!(ComplexMatrix::new(2, 2, vec![ZERO; 3]).is_err());
    }
}
