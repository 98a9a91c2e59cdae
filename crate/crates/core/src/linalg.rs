//! Dense complex matrix kernel sized for desk-scale Hilbert spaces.
//!
//! Everything here is a pure function on immutable values. Matrices are
//! stored dense row-major; there is no sparse path. Tolerances follow the
//! crate-wide policy: 1e-10 relative for Hermiticity and unitarity checks,
//! 1e-8 relative singular-value cutoff for rank decisions.

use num_complex::Complex64;

use crate::error::{CoreError, Result};
use crate::max_dim;

/// Relative tolerance for Hermiticity and unitarity checks.
pub const HERMITIAN_TOL: f64 = 1e-10;
/// Default relative singular-value cutoff for rank decisions.
pub const RANK_TOL: f64 = 1e-8;
/// Eigenvalues in [-PSD_CLAMP, 0) are treated as round-off and clamped to 0;
/// anything below -PSD_HARD_FLOOR is rejected as genuinely non-PSD.
pub const PSD_CLAMP: f64 = 1e-10;
const PSD_HARD_FLOOR: f64 = 1e-8;

/// Dense complex matrix, row-major storage.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl ComplexMatrix {
    /// Build from explicit row-major entries.
    pub fn new(rows: usize, cols: usize, data: Vec<Complex64>) -> Result<Self> {
        if rows == 0 || cols == 0 || data.len() != rows * cols {
            return Err(CoreError::ShapeMismatch(format!(
                "{}x{} matrix needs {} entries, got {}",
                rows,
                cols,
                rows * cols,
                data.len()
            )));
        }
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(CoreError::ShapeMismatch(
                "matrix entries must be finite".into(),
            ));
        }
        Ok(Self { rows, cols, data })
    }

    /// All-zero matrix.
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![Complex64::new(0.0, 0.0); rows * cols],
        }
    }

    /// Identity matrix of size n.
    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, Complex64::new(1.0, 0.0));
        }
        m
    }

    /// Fill from a function of (row, col).
    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// Build from a list of column vectors, all of equal length.
    pub fn from_columns(cols: &[Vec<Complex64>]) -> Result<Self> {
        if cols.is_empty() || cols[0].is_empty() {
            return Err(CoreError::ShapeMismatch("no columns given".into()));
        }
        let rows = cols[0].len();
        if cols.iter().any(|c| c.len() != rows) {
            return Err(CoreError::ShapeMismatch(
                "columns have unequal lengths".into(),
            ));
        }
        Ok(Self::from_fn(rows, cols.len(), |i, j| cols[j][i]))
    }

    /// Diagonal matrix from real entries.
    pub fn diag(entries: &[f64]) -> Self {
        let n = entries.len();
        Self::from_fn(n, n, |i, j| {
            if i == j {
                Complex64::new(entries[i], 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
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

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: Complex64) {
        self.data[i * self.cols + j] = v;
    }

    /// Row-major entry slice.
    pub fn entries(&self) -> &[Complex64] {
        &self.data
    }

    /// Column j as an owned vector.
    pub fn column(&self, j: usize) -> Vec<Complex64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    /// Conjugate transpose.
    pub fn dagger(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self.get(j, i).conj())
    }

    /// Matrix product self * other.
    pub fn mul(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(CoreError::ShapeMismatch(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let aik = self.get(i, k);
                if aik == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for j in 0..other.cols {
                    let v = out.get(i, j) + aik * other.get(k, j);
                    out.set(i, j, v);
                }
            }
        }
        Ok(out)
    }

    /// Matrix-vector product self * v.
    pub fn mul_vec(&self, v: &[Complex64]) -> Result<Vec<Complex64>> {
        if v.len() != self.cols {
            return Err(CoreError::ShapeMismatch(format!(
                "matrix has {} columns, vector has length {}",
                self.cols,
                v.len()
            )));
        }
        let out = (0..self.rows)
            .map(|i| {
                v.iter()
                    .enumerate()
                    .map(|(j, vj)| self.get(i, j) * vj)
                    .sum()
            })
            .collect();
        Ok(out)
    }

    /// Entry-wise sum.
    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(CoreError::ShapeMismatch("add: size mismatch".into()));
        }
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a + b)
            .collect();
        Self::new(self.rows, self.cols, data)
    }

    /// Entry-wise difference.
    pub fn sub(&self, other: &Self) -> Result<Self> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(CoreError::ShapeMismatch("sub: size mismatch".into()));
        }
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a - b)
            .collect();
        Self::new(self.rows, self.cols, data)
    }

    /// Scalar multiple.
    pub fn scale(&self, s: Complex64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z * s).collect(),
        }
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.rows.min(self.cols)).map(|i| self.get(i, i)).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Frobenius norm of self - other.
    pub fn frobenius_distance(&self, other: &Self) -> f64 {
        self.sub(other).map(|d| d.frobenius_norm()).unwrap_or(f64::INFINITY)
    }

    /// Hermiticity deviation ||A - A^dag||_F.
    pub fn hermitian_deviation(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let mut acc = 0.0;
        for i in 0..self.rows {
            for j in i..self.cols {
                let d = self.get(i, j) - self.get(j, i).conj();
                // off-diagonal pairs contribute twice in the Frobenius norm
                acc += if i == j { d.norm_sqr() } else { 2.0 * d.norm_sqr() };
            }
        }
        acc.sqrt()
    }

    /// True when self is Hermitian within the crate tolerance.
    pub fn is_hermitian(&self) -> bool {
        self.is_square()
            && self.hermitian_deviation() <= HERMITIAN_TOL * self.frobenius_norm().max(1.0)
    }

    /// (A + A^dag)/2; input must be square.
    pub fn symmetrize(&self) -> Result<Self> {
        if !self.is_square() {
            return Err(CoreError::ShapeMismatch("symmetrize: not square".into()));
        }
        Ok(Self::from_fn(self.rows, self.cols, |i, j| {
            (self.get(i, j) + self.get(j, i).conj()) * 0.5
        }))
    }

    /// ||U^dag U - I||_F, finite only for matrices with orthonormal columns.
    pub fn isometry_deviation(&self) -> f64 {
        match self.dagger().mul(self) {
            Ok(g) => g.frobenius_distance(&Self::identity(self.cols)),
            Err(_) => f64::INFINITY,
        }
    }
}

/// Hermitian eigendecomposition H = Q diag(lambda) Q^dag with eigenvalues
/// sorted descending and eigenvectors as the columns of `vectors`.
#[derive(Debug, Clone)]
pub struct HermitianSpectrum {
    pub eigenvalues: Vec<f64>,
    pub vectors: ComplexMatrix,
}

impl HermitianSpectrum {
    /// Largest eigenvalue.
    pub fn lambda_max(&self) -> f64 {
        self.eigenvalues.first().copied().unwrap_or(0.0)
    }

    /// Smallest eigenvalue.
    pub fn lambda_min(&self) -> f64 {
        self.eigenvalues.last().copied().unwrap_or(0.0)
    }

    /// Reassemble Q f(diag) Q^dag for a function of the eigenvalues.
    pub fn assemble(&self, f: impl Fn(f64) -> f64) -> ComplexMatrix {
        let n = self.eigenvalues.len();
        let q = &self.vectors;
        ComplexMatrix::from_fn(n, n, |i, j| {
            let mut acc = Complex64::new(0.0, 0.0);
            for k in 0..n {
                acc += q.get(i, k) * f(self.eigenvalues[k]) * q.get(j, k).conj();
            }
            acc
        })
    }
}

/// Kronecker product a (x) b.
pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<ComplexMatrix> {
    let rows = a.rows() * b.rows();
    let cols = a.cols() * b.cols();
    let cap = max_dim();
    if rows > cap || cols > cap {
        return Err(CoreError::DimensionLimit {
            requested: rows.max(cols),
            max: cap,
        });
    }
    let mut out = ComplexMatrix::zeros(rows, cols);
    for ia in 0..a.rows() {
        for ja in 0..a.cols() {
            let av = a.get(ia, ja);
            if av == Complex64::new(0.0, 0.0) {
                continue;
            }
            for ib in 0..b.rows() {
                for jb in 0..b.cols() {
                    out.set(ia * b.rows() + ib, ja * b.cols() + jb, av * b.get(ib, jb));
                }
            }
        }
    }
    Ok(out)
}

/// Kronecker product of a list of matrices, left to right.
pub fn kron_all(mats: &[ComplexMatrix]) -> Result<ComplexMatrix> {
    let mut it = mats.iter();
    let first = it
        .next()
        .ok_or_else(|| CoreError::ShapeMismatch("kron_all: empty list".into()))?;
    let mut acc = first.clone();
    for m in it {
        acc = kron(&acc, m)?;
    }
    Ok(acc)
}

fn check_partial_trace_args(rho: &ComplexMatrix, dims: &[usize], keep: &[usize]) -> Result<()> {
    if !rho.is_square() {
        return Err(CoreError::ShapeMismatch("partial_trace: not square".into()));
    }
    let total: usize = dims.iter().product();
    if total != rho.rows() {
        return Err(CoreError::ShapeMismatch(format!(
            "factor dims {:?} give total {}, matrix is {}x{}",
            dims,
            total,
            rho.rows(),
            rho.cols()
        )));
    }
    if keep.iter().any(|&k| k >= dims.len()) {
        return Err(CoreError::ShapeMismatch(format!(
            "keep set {:?} out of range for {} factors",
            keep,
            dims.len()
        )));
    }
    if keep.windows(2).any(|w| w[0] >= w[1]) {
        return Err(CoreError::ShapeMismatch(
            "keep set must be strictly increasing".into(),
        ));
    }
    Ok(())
}

/// Trace over every factor not in `keep`; kept factors retain their order.
pub fn partial_trace(rho: &ComplexMatrix, dims: &[usize], keep: &[usize]) -> Result<ComplexMatrix> {
    check_partial_trace_args(rho, dims, keep)?;
    let traced: Vec<usize> = (0..dims.len()).filter(|f| !keep.contains(f)).collect();
    let dim_keep: usize = keep.iter().map(|&f| dims[f]).product();
    let dim_tr: usize = traced.iter().map(|&f| dims[f]).product();

    // Stride of each factor in the composite index.
    let mut strides = vec![1usize; dims.len()];
    for f in (0..dims.len().saturating_sub(1)).rev() {
        strides[f] = strides[f + 1] * dims[f + 1];
    }
    let compose = |part: usize, factors: &[usize]| -> usize {
        let mut rest = part;
        let mut idx = 0;
        for (pos, &f) in factors.iter().enumerate() {
            let radix: usize = factors[pos + 1..].iter().map(|&g| dims[g]).product();
            let digit = rest / radix;
            rest %= radix;
            idx += digit * strides[f];
        }
        idx
    };

    let mut out = ComplexMatrix::zeros(dim_keep.max(1), dim_keep.max(1));
    for a in 0..dim_keep.max(1) {
        for b in 0..dim_keep.max(1) {
            let mut acc = Complex64::new(0.0, 0.0);
            for t in 0..dim_tr.max(1) {
                let r = compose(a, keep) + compose(t, &traced);
                let c = compose(b, keep) + compose(t, &traced);
                acc += rho.get(r, c);
            }
            out.set(a, b, acc);
        }
    }
    Ok(out)
}

/// Hermitian eigendecomposition via cyclic complex Jacobi rotations.
///
/// Rejects inputs whose Hermiticity deviation exceeds the crate tolerance.
pub fn hermitian_eig(h: &ComplexMatrix) -> Result<HermitianSpectrum> {
    let scale = h.frobenius_norm().max(1.0);
    let dev = h.hermitian_deviation();
    if dev > HERMITIAN_TOL * scale {
        return Err(CoreError::NotHermitian {
            deviation: dev,
            tolerance: HERMITIAN_TOL * scale,
        });
    }
    let n = h.rows();
    let mut a = h.symmetrize()?;
    let mut q = ComplexMatrix::identity(n);
    if n == 1 {
        return Ok(HermitianSpectrum {
            eigenvalues: vec![a.get(0, 0).re],
            vectors: q,
        });
    }

    let frob = a.frobenius_norm().max(f64::MIN_POSITIVE);
    let target = 1e-15 * frob;
    const MAX_SWEEPS: usize = 100;
    for _ in 0..MAX_SWEEPS {
        let mut off = 0.0;
        for p in 0..n {
            for qq in (p + 1)..n {
                off += a.get(p, qq).norm_sqr();
            }
        }
        if (2.0 * off).sqrt() <= target {
            break;
        }
        for p in 0..n {
            for r in (p + 1)..n {
                let g = a.get(p, r);
                let absg = g.norm();
                if absg <= 1e-300 {
                    continue;
                }
                // Phase factor making the pivot real, then a real rotation.
                let u = g / absg;
                let app = a.get(p, p).re;
                let arr = a.get(r, r).re;
                let tau = (arr - app) / (2.0 * absg);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                let su = s * u;
                let su_conj = s * u.conj();

                // A <- J^dag A J with J acting on the (p, r) plane:
                // J_pp = c, J_pr = s, J_rp = -conj(u) s, J_rr = conj(u) c.
                for i in 0..n {
                    let aip = a.get(i, p);
                    let air = a.get(i, r);
                    a.set(i, p, aip * c - air * su_conj);
                    a.set(i, r, aip * s + air * c * u.conj());
                }
                for j in 0..n {
                    let apj = a.get(p, j);
                    let arj = a.get(r, j);
                    a.set(p, j, apj * c - arj * su);
                    a.set(r, j, apj * s + arj * c * u);
                }
                a.set(p, r, Complex64::new(0.0, 0.0));
                a.set(r, p, Complex64::new(0.0, 0.0));
                a.set(p, p, Complex64::new(a.get(p, p).re, 0.0));
                a.set(r, r, Complex64::new(a.get(r, r).re, 0.0));
                for i in 0..n {
                    let qip = q.get(i, p);
                    let qir = q.get(i, r);
                    q.set(i, p, qip * c - qir * su_conj);
                    q.set(i, r, qip * s + qir * c * u.conj());
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        a.get(j, j)
            .re
            .partial_cmp(&a.get(i, i).re)
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let eigenvalues: Vec<f64> = order.iter().map(|&i| a.get(i, i).re).collect();
    let vectors = ComplexMatrix::from_fn(n, n, |i, j| q.get(i, order[j]));
    Ok(HermitianSpectrum {
        eigenvalues,
        vectors,
    })
}

/// Hermitian PSD square root S with S*S = rho.
///
/// Eigenvalues in [-1e-10, 0) are clamped to zero; anything below -1e-8 is
/// rejected as an invalid density operator.
pub fn psd_sqrt(rho: &ComplexMatrix) -> Result<ComplexMatrix> {
    let spec = hermitian_eig(rho)?;
    let min = spec.lambda_min();
    if min < -PSD_HARD_FLOOR {
        return Err(CoreError::NotPositive { eigenvalue: min });
    }
    Ok(spec.assemble(|l| l.max(0.0).sqrt()))
}

/// Singular values of m, sorted descending.
pub fn singular_values(m: &ComplexMatrix) -> Result<Vec<f64>> {
    // Work with the smaller Gram matrix of the two.
    let gram = if m.rows() >= m.cols() {
        m.dagger().mul(m)?
    } else {
        m.mul(&m.dagger())?
    };
    let spec = hermitian_eig(&gram.symmetrize()?)?;
    Ok(spec
        .eigenvalues
        .iter()
        .map(|&l| l.max(0.0).sqrt())
        .collect())
}

/// Number of singular values above tol * sigma_max.
pub fn rank_with_tol(m: &ComplexMatrix, tol: f64) -> Result<usize> {
    if tol <= 0.0 {
        return Err(CoreError::OutOfRange("rank tolerance must be > 0".into()));
    }
    let sv = singular_values(m)?;
    let smax = sv.first().copied().unwrap_or(0.0);
    Ok(sv.iter().filter(|&&s| s > tol * smax).count())
}

/// Extend linearly independent columns to a full unitary.
///
/// The input columns are orthonormalized by modified Gram-Schmidt (with one
/// re-orthogonalization pass) in their given order, then standard basis
/// vectors fill the remaining directions. The first `cols.cols()` columns of
/// the result span the same subspace as the input.
pub fn orthonormal_completion(cols: &ComplexMatrix) -> Result<ComplexMatrix> {
    let n = cols.rows();
    let k = cols.cols();
    if k > n {
        return Err(CoreError::ShapeMismatch(format!(
            "{} columns cannot be independent in dimension {}",
            k, n
        )));
    }
    if rank_with_tol(cols, RANK_TOL)? < k {
        return Err(CoreError::RankDeficient {
            rank: rank_with_tol(cols, RANK_TOL)?,
            expected: k,
        });
    }

    let mut basis: Vec<Vec<Complex64>> = Vec::with_capacity(n);
    let push_orthonormalized = |basis: &mut Vec<Vec<Complex64>>, v: &[Complex64]| -> bool {
        let mut w = v.to_vec();
        for _ in 0..2 {
            for b in basis.iter() {
                let overlap: Complex64 = b.iter().zip(&w).map(|(bi, wi)| bi.conj() * wi).sum();
                for (wi, bi) in w.iter_mut().zip(b) {
                    *wi -= overlap * bi;
                }
            }
        }
        let norm = w.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm < 1e-12 {
            return false;
        }
        for wi in w.iter_mut() {
            *wi /= norm;
        }
        basis.push(w);
        true
    };

    for j in 0..k {
        if !push_orthonormalized(&mut basis, &cols.column(j)) {
            return Err(CoreError::RankDeficient {
                rank: basis.len(),
                expected: k,
            });
        }
    }
    for i in 0..n {
        if basis.len() == n {
            break;
        }
        let mut e = vec![Complex64::new(0.0, 0.0); n];
        e[i] = Complex64::new(1.0, 0.0);
        push_orthonormalized(&mut basis, &e);
    }
    if basis.len() != n {
        return Err(CoreError::RankDeficient {
            rank: basis.len(),
            expected: n,
        });
    }
    ComplexMatrix::from_columns(&basis)
}

/// Inner product <a|b> with the physics convention (conjugate-linear in a).
pub fn inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// Euclidean norm of a complex vector.
pub fn vec_norm(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}
