//! State-independent maps of the conversion protocol.
//!
//! The activation unitary U_A copies each qudit level onto a dedicated
//! ancilla qubit with generalized CNOT gates; the decoupling step factors
//! the qudit out again, either unitarily (QFT followed by the phase
//! correction U_D, jointly U_B) or by a one-way LOCC channel that measures
//! the qudit and applies outcome-conditioned local phases. The module also
//! builds the Gram-matrix isometry that converts nonclassicality with
//! respect to an arbitrary linearly independent frame, plus the local
//! filter that maps its output to canonical protocol form.
//!
//! Index conventions: stored qudit indices are 0-based (level i = stored
//! i-1); all Fourier and decoupling phases use the stored indices, which
//! makes the d=2 QFT exactly the Hadamard and the decoupling exact.

use num_complex::Complex64;

use crate::error::{CoreError, Result};
use crate::hilbert::{
    attach_ancillas, binary_string_index, gram_matrix, ClassicalFrame, DensityMatrix, PureState,
    SpaceShape,
};
use crate::linalg::{self, kron, ComplexMatrix};

/// Supported qudit dimensions for the protocol maps (dim d * 2^d).
pub const MIN_QUDIT_DIM: usize = 2;
pub const MAX_QUDIT_DIM: usize = 6;

/// Minimum eigenvalue required of M(eps) during the epsilon search.
const EPS_SEARCH_FLOOR: f64 = 1e-9;

fn check_protocol_dim(d: usize) -> Result<()> {
    if !(MIN_QUDIT_DIM..=MAX_QUDIT_DIM).contains(&d) {
        return Err(CoreError::OutOfRange(format!(
            "qudit dimension {} outside {}..={}",
            d, MIN_QUDIT_DIM, MAX_QUDIT_DIM
        )));
    }
    Ok(())
}

/// Shape of the qudit plus d qubit ancillas.
pub fn protocol_shape(d: usize) -> Result<SpaceShape> {
    SpaceShape::qudit_with_ancillas(d, d, 2)
}

/// Composite index of |i>|2^(d-i)> for stored qudit index `stored` (0-based).
pub fn protocol_index(d: usize, stored: usize) -> Result<usize> {
    let string = binary_string_index(d, stored + 1)?;
    Ok(stored * (1 << d) + string)
}

/// Generalized CNOT between the qudit and ancilla qubit for level i (1-based):
/// (1_d - |i><i|) (x) 1 + |i><i| (x) sigma_x on the i-th qubit.
pub fn generalized_cnot(d: usize, i: usize) -> Result<ComplexMatrix> {
    check_protocol_dim(d)?;
    if i < 1 || i > d {
        return Err(CoreError::OutOfRange(format!("level {} outside 1..={}", i, d)));
    }
    let n = d * (1 << d);
    let flip = binary_string_index(d, i)?;
    let mut u = ComplexMatrix::zeros(n, n);
    for a in 0..d {
        for s in 0..(1 << d) {
            let col = a * (1 << d) + s;
            let row = if a == i - 1 {
                a * (1 << d) + (s ^ flip)
            } else {
                col
            };
            u.set(row, col, Complex64::new(1.0, 0.0));
        }
    }
    Ok(u)
}

/// Activation unitary U_A = sum_i |i><i| (x) sigma_x acting on the i-th
/// ancilla qubit; maps sum_i c_i |i>|0..0> to sum_i c_i |i>|2^(d-i)>.
pub fn activation_unitary(d: usize) -> Result<ComplexMatrix> {
    check_protocol_dim(d)?;
    let n = d * (1 << d);
    let mut u = ComplexMatrix::zeros(n, n);
    for a in 0..d {
        let flip = binary_string_index(d, a + 1)?;
        for s in 0..(1 << d) {
            u.set(a * (1 << d) + (s ^ flip), a * (1 << d) + s, Complex64::new(1.0, 0.0));
        }
    }
    Ok(u)
}

/// Quantum Fourier transform with entries <m|QFT|j> = exp(2 pi i j m / d)/sqrt(d)
/// over the stored indices 0..d-1.
pub fn qft(d: usize) -> Result<ComplexMatrix> {
    if d < 2 {
        return Err(CoreError::OutOfRange("QFT needs dimension >= 2".into()));
    }
    let norm = 1.0 / (d as f64).sqrt();
    Ok(ComplexMatrix::from_fn(d, d, |m, j| {
        let phase = 2.0 * std::f64::consts::PI * (j as f64) * (m as f64) / (d as f64);
        Complex64::new(0.0, phase).exp() * norm
    }))
}

/// Phase applied by the decoupling step to the string of stored level j at
/// measurement outcome m: exp(-2 pi i j m / d).
fn decoupling_phase(d: usize, j: usize, m: usize) -> Complex64 {
    let phase = -2.0 * std::f64::consts::PI * (j as f64) * (m as f64) / (d as f64);
    Complex64::new(0.0, phase).exp()
}

/// Decoupling unitary U_D: the phase exp(-2 pi i j m / d) on each basis
/// state |m>|2^(d-j)>, extended by the identity on the orthocomplement of
/// the string subspace. Diagonal in the computational basis.
pub fn decoupling_unitary(d: usize) -> Result<ComplexMatrix> {
    check_protocol_dim(d)?;
    let strings: Vec<usize> = (0..d)
        .map(|j| binary_string_index(d, j + 1))
        .collect::<Result<_>>()?;
    let n = d * (1 << d);
    let mut u = ComplexMatrix::zeros(n, n);
    for m in 0..d {
        for s in 0..(1 << d) {
            let idx = m * (1 << d) + s;
            let phase = match strings.iter().position(|&t| t == s) {
                Some(j) => decoupling_phase(d, j, m),
                None => Complex64::new(1.0, 0.0),
            };
            u.set(idx, idx, phase);
        }
    }
    Ok(u)
}

/// Combined decoupling unitary U_B = U_D (QFT (x) 1).
pub fn full_decoupling_unitary(d: usize) -> Result<ComplexMatrix> {
    let q = kron(&qft(d)?, &ComplexMatrix::identity(1 << d))?;
    decoupling_unitary(d)?.mul(&q)
}

/// Outcome-conditioned local unitary on the d qubits for measurement
/// result m: the tensor product of per-qubit phases diag(1, exp(-2 pi i q m / d)).
pub fn outcome_local_unitary(d: usize, m: usize) -> Result<ComplexMatrix> {
    check_protocol_dim(d)?;
    if m >= d {
        return Err(CoreError::OutOfRange(format!("outcome {} outside 0..{}", m, d)));
    }
    let dim = 1 << d;
    let mut u = ComplexMatrix::zeros(dim, dim);
    for s in 0..dim {
        // qubit q (0-based from the most significant bit) contributes its
        // phase when set; a single-bit string reproduces decoupling_phase.
        let mut phase = Complex64::new(1.0, 0.0);
        for q in 0..d {
            if s & (1 << (d - 1 - q)) != 0 {
                phase *= decoupling_phase(d, q, m);
            }
        }
        u.set(s, s, phase);
    }
    Ok(u)
}

/// Attach d ancilla qubits in |0>^(x d) and apply the activation unitary.
pub fn activate_pure(psi: &PureState) -> Result<PureState> {
    let dims = psi.shape().dims();
    if dims.len() != 1 {
        return Err(CoreError::ShapeMismatch(
            "activation expects a single-qudit state".into(),
        ));
    }
    let d = dims[0];
    check_protocol_dim(d)?;
    let with_anc = attach_ancillas(psi, d, 2, 0)?;
    with_anc.apply(&activation_unitary(d)?, protocol_shape(d)?)
}

/// rho' = U_A (rho (x) |0><0|^(x d)) U_A^dag.
pub fn activate_density(rho: &DensityMatrix) -> Result<DensityMatrix> {
    let dims = rho.shape().dims();
    if dims.len() != 1 {
        return Err(CoreError::ShapeMismatch(
            "activation expects a single-qudit state".into(),
        ));
    }
    let d = dims[0];
    check_protocol_dim(d)?;
    let anc_dim = 1 << d;
    let mut p0 = ComplexMatrix::zeros(anc_dim, anc_dim);
    p0.set(0, 0, Complex64::new(1.0, 0.0));
    let joint = kron(rho.matrix(), &p0)?;
    let ua = activation_unitary(d)?;
    let out = ua.mul(&joint)?.mul(&ua.dagger())?;
    DensityMatrix::new(protocol_shape(d)?, out)
}

/// One-way LOCC decoupling channel Delta: QFT on the qudit, projective
/// measurement in the stored basis, then the outcome-conditioned local
/// phases on the qubits. Exact sum over the d outcomes, no sampling.
pub fn locc_decouple(rho_prime: &DensityMatrix) -> Result<DensityMatrix> {
    let dims = rho_prime.shape().dims().to_vec();
    let d = dims[0];
    check_protocol_dim(d)?;
    if dims.len() != d + 1 || dims[1..].iter().any(|&q| q != 2) {
        return Err(CoreError::ShapeMismatch(format!(
            "expected shape (d, 2 x d) with d = {}, got {:?}",
            d, dims
        )));
    }
    let qdim = 1 << d;
    let fourier = kron(&qft(d)?, &ComplexMatrix::identity(qdim))?;
    let rotated = fourier.mul(rho_prime.matrix())?.mul(&fourier.dagger())?;

    let mut out = ComplexMatrix::zeros(qdim, qdim);
    for m in 0..d {
        // branch_m = (<m| (x) 1) rotated (|m> (x) 1)
        let mut branch = ComplexMatrix::zeros(qdim, qdim);
        for s in 0..qdim {
            for t in 0..qdim {
                branch.set(s, t, rotated.get(m * qdim + s, m * qdim + t));
            }
        }
        let um = outcome_local_unitary(d, m)?;
        let corrected = um.mul(&branch)?.mul(&um.dagger())?;
        out = out.add(&corrected)?;
    }
    DensityMatrix::new(SpaceShape::new(vec![2; d])?, out.symmetrize()?)
}

/// Which ancilla construction the Gram isometry uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IsometryVariant {
    /// Qubit ancillas, one excitation shared W-style.
    W,
    /// (d+1)-dimensional ancillas excited coherently, GHZ-style.
    Ghz,
}

/// The constructed isometry together with its ingredients, kept for audit:
/// the factor states {a_i}, {b_i}, the filter weight lambda = 1/(1+eps), and
/// the epsilon delivered by the grid search.
#[derive(Debug, Clone)]
pub struct IsometryBundle {
    pub v: ComplexMatrix,
    pub a_states: Vec<Vec<Complex64>>,
    pub b_states: Vec<Vec<Complex64>>,
    pub lambda: f64,
    pub epsilon: f64,
    pub variant: IsometryVariant,
    pub frame: ClassicalFrame,
    pub out_shape: SpaceShape,
}

impl IsometryBundle {
    fn validate(&self) -> Result<()> {
        let dev = self.v.isometry_deviation();
        if dev > 1e-9 {
            return Err(CoreError::ShapeMismatch(format!(
                "constructed map is not an isometry: deviation {:.3e}",
                dev
            )));
        }
        if (self.lambda * (1.0 + self.epsilon) - 1.0).abs() > 1e-12 {
            return Err(CoreError::ShapeMismatch(
                "lambda and epsilon are inconsistent".into(),
            ));
        }
        for (i, chi) in self.frame.vectors().iter().enumerate() {
            let image = self.v.mul_vec(chi)?;
            let target = vec_kron(&self.a_states[i], &self.b_states[i]);
            let err: f64 = image
                .iter()
                .zip(&target)
                .map(|(x, y)| (x - y).norm_sqr())
                .sum::<f64>()
                .sqrt();
            if err > 1e-8 {
                return Err(CoreError::ShapeMismatch(format!(
                    "V|chi_{}> misses |a_{}>|b_{}> by {:.3e}",
                    i, i, i, err
                )));
            }
        }
        Ok(())
    }
}

fn vec_kron(a: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
    let mut out = Vec::with_capacity(a.len() * b.len());
    for &x in a {
        for &y in b {
            out.push(x * y);
        }
    }
    out
}

fn vec_kron_power(v: &[Complex64], n: usize) -> Vec<Complex64> {
    let mut acc = vec![Complex64::new(1.0, 0.0)];
    for _ in 0..n {
        acc = vec_kron(&acc, v);
    }
    acc
}

/// Orthonormalize columns by modified Gram-Schmidt; rejects rank-deficient
/// input. Used to realize the Gram-preserving map T C^+ without explicit
/// inversion.
fn orthonormalize(m: &ComplexMatrix) -> Result<ComplexMatrix> {
    let mut cols: Vec<Vec<Complex64>> = Vec::with_capacity(m.cols());
    for j in 0..m.cols() {
        let mut w = m.column(j);
        for _ in 0..2 {
            for b in &cols {
                let overlap = linalg::inner(b, &w);
                for (wi, bi) in w.iter_mut().zip(b) {
                    *wi -= overlap * bi;
                }
            }
        }
        let norm = linalg::vec_norm(&w);
        if norm < 1e-10 {
            return Err(CoreError::RankDeficient {
                rank: cols.len(),
                expected: m.cols(),
            });
        }
        for wi in w.iter_mut() {
            *wi /= norm;
        }
        cols.push(w);
    }
    ComplexMatrix::from_columns(&cols)
}

/// Build the Gram-matrix isometry of the nonclassicality conversion.
///
/// The Gram matrix G of the frame is perturbed entrywise to
/// M(eps) = G o B(1+eps); the largest eps = 2^-t (t = 1..40) keeping
/// M(eps) positive definite wins, lambda = 1/(1+eps). A factorization of
/// M(eps) supplies {|a_i>}, the ancilla states {|b_i>} carry sqrt(lambda)
/// weights so that G = G(a) o G(b), and the unique linear map with
/// V|chi_i> = |a_i>|b_i> is an isometry because the Gram matrices agree.
pub fn killoran_isometry(
    frame: &ClassicalFrame,
    variant: IsometryVariant,
) -> Result<IsometryBundle> {
    let d = frame.dim();
    let gram = gram_matrix(frame);

    // Grid search: lambda_min(M(eps)) is non-increasing in eps, so the first
    // passing eps scanning downward from 1/2 is the largest admissible one.
    let mut found: Option<(f64, crate::linalg::HermitianSpectrum)> = None;
    for t in 1..=40u32 {
        let eps = (2.0f64).powi(-(t as i32));
        let m = ComplexMatrix::from_fn(d, d, |i, j| {
            if i == j {
                gram.get(i, j)
            } else {
                gram.get(i, j) * (1.0 + eps)
            }
        });
        let spec = linalg::hermitian_eig(&m.symmetrize()?)?;
        if spec.lambda_min() > EPS_SEARCH_FLOOR {
            found = Some((eps, spec));
            break;
        }
    }
    let (epsilon, m_spec) = found.ok_or(CoreError::EpsilonSearchFailed)?;
    let lambda = 1.0 / (1.0 + epsilon);

    // Columns of (Q sqrt(L))^dag realize the Gram matrix M(eps).
    let factor = ComplexMatrix::from_fn(d, d, |i, k| {
        m_spec.vectors.get(i, k) * m_spec.eigenvalues[k].max(0.0).sqrt()
    });
    let a_states: Vec<Vec<Complex64>> = (0..d)
        .map(|i| (0..d).map(|k| factor.get(i, k).conj()).collect())
        .collect();

    let (b_states, out_shape): (Vec<Vec<Complex64>>, SpaceShape) = match variant {
        IsometryVariant::W => {
            let lam = vec![
                Complex64::new(lambda.sqrt(), 0.0),
                Complex64::new((1.0 - lambda).sqrt(), 0.0),
            ];
            let zero = vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)];
            let states = (0..d)
                .map(|i| {
                    let mut b = vec![Complex64::new(1.0, 0.0)];
                    for q in 0..d {
                        b = vec_kron(&b, if q == i { &lam } else { &zero });
                    }
                    b
                })
                .collect();
            (states, SpaceShape::qudit_with_ancillas(d, d, 2)?)
        }
        IsometryVariant::Ghz => {
            let root = lambda.powf(1.0 / d as f64);
            let states = (0..d)
                .map(|j| {
                    let mut lam_j = vec![Complex64::new(0.0, 0.0); d + 1];
                    lam_j[0] = Complex64::new(root.sqrt(), 0.0);
                    lam_j[j + 1] = Complex64::new((1.0 - root).sqrt(), 0.0);
                    vec_kron_power(&lam_j, d)
                })
                .collect();
            (states, SpaceShape::qudit_with_ancillas(d, d, d + 1)?)
        }
    };

    // Targets t_i = a_i (x) b_i share the frame's Gram matrix; mapping the
    // orthonormalized frame onto the orthonormalized targets therefore
    // extends to an isometry: V = Q_t Q_c^dag.
    let targets: Vec<Vec<Complex64>> = (0..d)
        .map(|i| vec_kron(&a_states[i], &b_states[i]))
        .collect();
    let t_mat = ComplexMatrix::from_columns(&targets)?;
    let q_t = orthonormalize(&t_mat)?;
    let q_c = orthonormalize(&frame.as_matrix())?;
    let v = q_t.mul(&q_c.dagger())?;

    let bundle = IsometryBundle {
        v,
        a_states,
        b_states,
        lambda,
        epsilon,
        variant,
        frame: frame.clone(),
        out_shape,
    };
    bundle.validate()?;
    Ok(bundle)
}

/// Local filter S (x) L^(x d) for a W-variant bundle: S maps |a_i> to |i>
/// and L maps |0> to |0>, |lambda> to |1>. Invertible but not unitary;
/// applied to V|psi> and renormalized it exposes the canonical
/// sum_i psi_i |i>|2^(d-i)> form.
pub fn local_filter(bundle: &IsometryBundle) -> Result<ComplexMatrix> {
    if bundle.variant != IsometryVariant::W {
        return Err(CoreError::OutOfRange(
            "local filter is defined for the W variant".into(),
        ));
    }
    if bundle.lambda >= 1.0 {
        return Err(CoreError::FilterSingular);
    }
    let d = bundle.frame.dim();
    let a_mat = ComplexMatrix::from_columns(&bundle.a_states)?;
    let s = invert(&a_mat)?;
    let lam = bundle.lambda;
    let l = ComplexMatrix::new(
        2,
        2,
        vec![
            Complex64::new(1.0, 0.0),
            Complex64::new(-(lam / (1.0 - lam)).sqrt(), 0.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(1.0 / (1.0 - lam).sqrt(), 0.0),
        ],
    )?;
    let mut filter = s;
    for _ in 0..d {
        filter = kron(&filter, &l)?;
    }
    Ok(filter)
}

/// Gauss-Jordan inverse with partial pivoting; desk-scale sizes only.
fn invert(m: &ComplexMatrix) -> Result<ComplexMatrix> {
    if !m.is_square() {
        return Err(CoreError::ShapeMismatch("invert: not square".into()));
    }
    let n = m.rows();
    let mut a = m.clone();
    let mut inv = ComplexMatrix::identity(n);
    for col in 0..n {
        let pivot_row = (col..n)
            .max_by(|&i, &j| {
                a.get(i, col)
                    .norm()
                    .partial_cmp(&a.get(j, col).norm())
                    .unwrap_or(std::cmp::Ordering::Equal)
            })
            .unwrap();
        let pivot = a.get(pivot_row, col);
        if pivot.norm() < 1e-14 {
            return Err(CoreError::RankDeficient {
                rank: col,
                expected: n,
            });
        }
        if pivot_row != col {
            for j in 0..n {
                let (x, y) = (a.get(col, j), a.get(pivot_row, j));
                a.set(col, j, y);
                a.set(pivot_row, j, x);
                let (x, y) = (inv.get(col, j), inv.get(pivot_row, j));
                inv.set(col, j, y);
                inv.set(pivot_row, j, x);
            }
        }
        let inv_pivot = Complex64::new(1.0, 0.0) / a.get(col, col);
        for j in 0..n {
            a.set(col, j, a.get(col, j) * inv_pivot);
            inv.set(col, j, inv.get(col, j) * inv_pivot);
        }
        for i in 0..n {
            if i == col {
                continue;
            }
            let factor = a.get(i, col);
            if factor.norm() == 0.0 {
                continue;
            }
            for j in 0..n {
                let av = a.get(i, j) - factor * a.get(col, j);
                a.set(i, j, av);
                let iv = inv.get(i, j) - factor * inv.get(col, j);
                inv.set(i, j, iv);
            }
        }
    }
    Ok(inv)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn uniform_qudit(d: usize) -> PureState {
        let amp = 1.0 / (d as f64).sqrt();
        PureState::new(
            SpaceShape::qudit(d).unwrap(),
            vec![c(amp, 0.0); d],
        )
        .unwrap()
    }

    #[test]
    fn activation_on_uniform_qubit_pair() {
        // (|1> + |2>)/sqrt(2) (x) |00>  ->  (|1>|10> + |2>|01>)/sqrt(2)
        let out = activate_pure(&uniform_qudit(2)).unwrap();
        let s = 1.0 / 2.0f64.sqrt();
        let mut expect = vec![c(0., 0.); 8];
        expect[protocol_index(2, 0).unwrap()] = c(s, 0.);
        expect[protocol_index(2, 1).unwrap()] = c(s, 0.);
        for (a, e) in out.amplitudes().iter().zip(&expect) {
            assert!((a - e).norm() < 1e-12);
        }
    }

    #[test]
    fn activation_keeps_classical_input_product() {
        // |2> (x) |000> -> |2>|010>
        let psi = PureState::qudit_level(3, 2).unwrap();
        let out = activate_pure(&psi).unwrap();
        let expect_idx = protocol_index(3, 1).unwrap();
        for (idx, a) in out.amplitudes().iter().enumerate() {
            if idx == expect_idx {
                assert!((a - c(1., 0.)).norm() < 1e-12);
            } else {
                assert_eq!(a.norm(), 0.0);
            }
        }
    }

    #[test]
    fn activation_equals_cnot_product() {
        // Oracle: build U_A both directly and as the gate sequence.
        for d in 2..=4 {
            let direct = activation_unitary(d).unwrap();
            let mut seq = ComplexMatrix::identity(d * (1 << d));
            for i in 1..=d {
                seq = generalized_cnot(d, i).unwrap().mul(&seq).unwrap();
            }
            assert!(direct.frobenius_distance(&seq) < 1e-12);
        }
    }

    #[test]
    fn qft_d2_is_hadamard() {
        let q = qft(2).unwrap();
        let s = 1.0 / 2.0f64.sqrt();
        let h = ComplexMatrix::new(2, 2, vec![c(s, 0.), c(s, 0.), c(s, 0.), c(-s, 0.)]).unwrap();
        assert!(q.frobenius_distance(&h) < 1e-12);
    }

    #[test]
    fn qft_unitarity_and_column_norms() {
        for d in 2..=6 {
            let q = qft(d).unwrap();
            assert!(q.isometry_deviation() < 1e-12);
            for j in 0..d {
                assert!((linalg::vec_norm(&q.column(j)) - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn protocol_unitaries_are_unitary() {
        for d in MIN_QUDIT_DIM..=MAX_QUDIT_DIM {
            assert!(activation_unitary(d).unwrap().isometry_deviation() < 1e-10);
            assert!(decoupling_unitary(d).unwrap().isometry_deviation() < 1e-10);
            assert!(full_decoupling_unitary(d).unwrap().isometry_deviation() < 1e-10);
        }
    }

    #[test]
    fn decoupling_d2_uniform_gives_exact_product() {
        let psi_prime = activate_pure(&uniform_qudit(2)).unwrap();
        let ub = full_decoupling_unitary(2).unwrap();
        let out = psi_prime.apply(&ub, protocol_shape(2).unwrap()).unwrap();
        // expected: Phi+ (x) (|10> + |01>)/sqrt(2)
        let mut expect = vec![c(0., 0.); 8];
        for m in 0..2 {
            for s in [2usize, 1] {
                expect[m * 4 + s] = c(0.5, 0.0);
            }
        }
        for (a, e) in out.amplitudes().iter().zip(&expect) {
            assert!((a - e).norm() < 1e-12);
        }
    }

    #[test]
    fn decoupling_qudit_marginal_is_maximally_coherent_projector() {
        // d=3, pseudo-random coefficients
        let amps = vec![c(0.31, 0.42), c(-0.55, 0.17), c(0.12, -0.61)];
        let psi = PureState::normalized(SpaceShape::qudit(3).unwrap(), amps).unwrap();
        let psi_prime = activate_pure(&psi).unwrap();
        let ub = full_decoupling_unitary(3).unwrap();
        let out = psi_prime.apply(&ub, protocol_shape(3).unwrap()).unwrap();
        let rho = out.density();
        let qudit = rho.reduce(&[0]).unwrap();
        let third = 1.0 / 3.0;
        let expect = ComplexMatrix::from_fn(3, 3, |_, _| c(third, 0.0));
        assert!(qudit.matrix().frobenius_distance(&expect) < 1e-10);
    }

    #[test]
    fn locc_on_pure_input_matches_protocol_form() {
        let psi = uniform_qudit(2);
        let rho_prime = activate_density(&psi.density()).unwrap();
        let out = locc_decouple(&rho_prime).unwrap();
        // expected |Psi''><Psi''| with Psi'' = (|10> + |01>)/sqrt(2)
        let s = 1.0 / 2.0f64.sqrt();
        let mut psi2 = [c(0., 0.); 4];
        psi2[2] = c(s, 0.);
        psi2[1] = c(s, 0.);
        let expect = ComplexMatrix::from_fn(4, 4, |i, j| psi2[i] * psi2[j].conj());
        assert!(out.matrix().frobenius_distance(&expect) < 1e-10);
    }

    #[test]
    fn activated_uniform_qutrit_ancilla_marginal_is_flat_on_strings() {
        // tracing out the qudit from rho' leaves sum_i |c_i|^2 on the
        // string states; uniform input gives diagonal entries 1/3
        let rho_prime = activate_density(&uniform_qudit(3).density()).unwrap();
        let anc = rho_prime.reduce(&[1, 2, 3]).unwrap();
        let strings: Vec<usize> = (1..=3).map(|i| binary_string_index(3, i).unwrap()).collect();
        for i in 0..8 {
            for j in 0..8 {
                let expect = if i == j && strings.contains(&i) { 1.0 / 3.0 } else { 0.0 };
                assert!((anc.matrix().get(i, j) - c(expect, 0.0)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn epsilon_search_fails_on_nearly_dependent_frame() {
        // overlap 1 - 1e-10 passes the frame rank check but leaves no grid
        // point with lambda_min(M(eps)) above the floor
        let delta = 1e-10f64;
        let v1 = vec![c(1.0, 0.0), c(0.0, 0.0)];
        let v2 = vec![c((1.0 - delta).sqrt(), 0.0), c(delta.sqrt(), 0.0)];
        let frame = ClassicalFrame::new(vec![v1, v2]).unwrap();
        assert!(matches!(
            killoran_isometry(&frame, IsometryVariant::W),
            Err(CoreError::EpsilonSearchFailed)
        ));
    }

    #[test]
    fn filter_rejects_unit_lambda() {
        let frame = ClassicalFrame::computational(2).unwrap();
        let mut bundle = killoran_isometry(&frame, IsometryVariant::W).unwrap();
        bundle.lambda = 1.0;
        bundle.epsilon = 0.0;
        assert!(matches!(
            local_filter(&bundle),
            Err(CoreError::FilterSingular)
        ));
    }

    #[test]
    fn locc_rejects_wrong_shape() {
        let rho = uniform_qudit(2).density();
        assert!(matches!(
            locc_decouple(&rho),
            Err(CoreError::OutOfRange(_)) | Err(CoreError::ShapeMismatch(_))
        ));
    }

    #[test]
    fn locc_on_classical_input_gives_product_string() {
        let psi = PureState::qudit_level(3, 2).unwrap();
        let rho_prime = activate_density(&psi.density()).unwrap();
        let out = locc_decouple(&rho_prime).unwrap();
        let string = binary_string_index(3, 2).unwrap();
        for i in 0..8 {
            for j in 0..8 {
                let expect = if i == string && j == string { 1.0 } else { 0.0 };
                assert!((out.matrix().get(i, j) - c(expect, 0.0)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn locc_matches_unitary_path_on_mixed_input() {
        // Oracle: ancilla marginal of U_B rho' U_B^dag.
        let d = 3;
        // pseudo-random rank-2 density matrix on the qudit
        let g = ComplexMatrix::new(
            3,
            2,
            vec![
                c(0.3, -0.1),
                c(0.2, 0.5),
                c(-0.4, 0.2),
                c(0.1, 0.1),
                c(0.6, -0.3),
                c(-0.2, 0.4),
            ],
        )
        .unwrap();
        let gg = g.mul(&g.dagger()).unwrap();
        let tr = gg.trace().re;
        let rho = DensityMatrix::new(
            SpaceShape::qudit(3).unwrap(),
            gg.scale(c(1.0 / tr, 0.0)),
        )
        .unwrap();
        let rho_prime = activate_density(&rho).unwrap();
        let channel = locc_decouple(&rho_prime).unwrap();

        let ub = full_decoupling_unitary(d).unwrap();
        let conj = rho_prime.conjugate(&ub, protocol_shape(d).unwrap()).unwrap();
        let marginal = conj.reduce(&[1, 2, 3]).unwrap();
        assert!(channel.matrix().frobenius_distance(marginal.matrix()) < 1e-10);
    }

    fn oblique_frame() -> ClassicalFrame {
        let s = 1.0 / 2.0f64.sqrt();
        ClassicalFrame::new(vec![
            vec![c(1., 0.), c(0., 0.)],
            vec![c(s, 0.), c(s, 0.)],
        ])
        .unwrap()
    }

    #[test]
    fn isometry_gram_identity_for_oblique_frame() {
        let frame = oblique_frame();
        let bundle = killoran_isometry(&frame, IsometryVariant::W).unwrap();
        assert!(bundle.v.isometry_deviation() < 1e-9);
        // G(c) = G(a) o G(b) entrywise
        let g_c = gram_matrix(&frame);
        let d = frame.dim();
        for i in 0..d {
            for j in 0..d {
                let ga = linalg::inner(&bundle.a_states[i], &bundle.a_states[j]);
                let gb = linalg::inner(&bundle.b_states[i], &bundle.b_states[j]);
                assert!((ga * gb - g_c.get(i, j)).norm() < 1e-8);
            }
        }
    }

    #[test]
    fn isometry_maps_classical_to_product() {
        let frame = oblique_frame();
        let bundle = killoran_isometry(&frame, IsometryVariant::W).unwrap();
        for (i, chi) in frame.vectors().iter().enumerate() {
            let image = bundle.v.mul_vec(chi).unwrap();
            let target = vec_kron(&bundle.a_states[i], &bundle.b_states[i]);
            let err: f64 = image
                .iter()
                .zip(&target)
                .map(|(x, y)| (x - y).norm_sqr())
                .sum::<f64>()
                .sqrt();
            assert!(err < 1e-8);
        }
    }

    #[test]
    fn ghz_variant_shares_gram_identity() {
        let frame = oblique_frame();
        let bundle = killoran_isometry(&frame, IsometryVariant::Ghz).unwrap();
        assert!(bundle.v.isometry_deviation() < 1e-9);
        let g_c = gram_matrix(&frame);
        for i in 0..2 {
            for j in 0..2 {
                let ga = linalg::inner(&bundle.a_states[i], &bundle.a_states[j]);
                let gb = linalg::inner(&bundle.b_states[i], &bundle.b_states[j]);
                assert!((ga * gb - g_c.get(i, j)).norm() < 1e-8);
            }
        }
    }

    #[test]
    fn filter_restores_canonical_form_orthonormal_frame() {
        let frame = ClassicalFrame::computational(3).unwrap();
        let bundle = killoran_isometry(&frame, IsometryVariant::W).unwrap();
        let filter = local_filter(&bundle).unwrap();
        let psi = uniform_qudit(3);
        let image = bundle.v.mul_vec(psi.amplitudes()).unwrap();
        let filtered = filter.mul_vec(&image).unwrap();
        let norm = linalg::vec_norm(&filtered);
        // expect proportional to sum_i psi_i |i>|2^(d-i)>
        for (idx, f) in filtered.iter().enumerate() {
            let on_pattern = (0..3).any(|j| protocol_index(3, j).unwrap() == idx);
            if on_pattern {
                assert!((f.norm() / norm - 1.0 / 3.0f64.sqrt()).abs() < 1e-8);
            } else {
                assert!(f.norm() / norm < 1e-8);
            }
        }
    }

    #[test]
    fn filter_canonicalizes_random_frame() {
        let v1 = vec![c(0.8, 0.1), c(0.3, 0.2), c(0.2, -0.45)];
        let v2 = vec![c(0.1, -0.3), c(0.85, 0.0), c(0.15, 0.35)];
        let v3 = vec![c(0.0, 0.25), c(-0.2, 0.3), c(0.88, 0.1)];
        let normalize = |v: Vec<Complex64>| {
            let n = linalg::vec_norm(&v);
            v.into_iter().map(|z| z / n).collect::<Vec<_>>()
        };
        let frame = ClassicalFrame::new(vec![normalize(v1), normalize(v2), normalize(v3)]).unwrap();
        let bundle = killoran_isometry(&frame, IsometryVariant::W).unwrap();
        let filter = local_filter(&bundle).unwrap();

        // psi with frame coordinates (0.6, 0.0, 0.8): filtered image must be
        // proportional to 0.6 |1>|100> + 0.8 |3>|001>.
        let coords = [c(0.6, 0.0), c(0.0, 0.0), c(0.8, 0.0)];
        let mut amps = vec![c(0., 0.); 3];
        for (i, chi) in frame.vectors().iter().enumerate() {
            for (a, x) in amps.iter_mut().zip(chi) {
                *a += coords[i] * x;
            }
        }
        let psi = PureState::normalized(SpaceShape::qudit(3).unwrap(), amps).unwrap();
        let image = bundle.v.mul_vec(psi.amplitudes()).unwrap();
        let filtered = filter.mul_vec(&image).unwrap();
        let norm = linalg::vec_norm(&filtered);
        let i0 = protocol_index(3, 0).unwrap();
        let i2 = protocol_index(3, 2).unwrap();
        // the input normalization rescales both coordinates equally
        let ratio = filtered[i2].norm() / filtered[i0].norm();
        assert!((ratio - 0.8 / 0.6).abs() < 1e-8);
        for (idx, f) in filtered.iter().enumerate() {
            if idx != i0 && idx != i2 {
                assert!(f.norm() / norm < 1e-8);
            }
        }
    }

    #[test]
    fn filter_qudit_part_inverts_a_states() {
        let frame = oblique_frame();
        let bundle = killoran_isometry(&frame, IsometryVariant::W).unwrap();
        let a_mat = ComplexMatrix::from_columns(&bundle.a_states).unwrap();
        let s = invert(&a_mat).unwrap();
        let prod = s.mul(&a_mat).unwrap();
        assert!(prod.frobenius_distance(&ComplexMatrix::identity(2)) < 1e-10);
    }

    #[test]
    fn epsilon_search_picks_largest_grid_point_for_orthonormal_frame() {
        // orthonormal frame: M(eps) = I for every eps, so eps = 1/2 wins.
        let bundle =
            killoran_isometry(&ClassicalFrame::computational(2).unwrap(), IsometryVariant::W)
                .unwrap();
        assert!((bundle.epsilon - 0.5).abs() < 1e-15);
        assert!((bundle.lambda - 2.0 / 3.0).abs() < 1e-12);
    }
}
