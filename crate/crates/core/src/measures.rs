//! Resource quantifiers: coherence rank and number bounds, Schmidt rank,
//! entanglement depth, fidelity, and the fidelity-based geometric measures
//! of k-coherence and k-partite entanglement, together with the harness
//! that checks the conversion inequalities on concrete states.
//!
//! Pure-state geometric measures use the closed form
//! C_G^(k) = 1 - sum of the k-1 largest squared amplitude magnitudes;
//! protocol-form outputs obey E_G^(k+1)(psi') = C_G^(k)(psi). Mixed-state
//! values come from the certified SDP layer. Entanglement depth of pure
//! states is decided by exhaustive set-partition search with block-marginal
//! purity as the factorization test; no mixed-state depth is claimed.

use num_complex::Complex64;

use crate::error::{CoreError, Result};
use crate::hilbert::{
    binary_string_index, DensityMatrix, PureState, SetPartition, SpaceShape, StateFile,
};
use crate::linalg::{self, ComplexMatrix};
use crate::protocol::{activate_density, locc_decouple, protocol_index};
use crate::sdp::{self, SdpSolution};

/// Default amplitude tolerance for rank counting.
pub const RANK_AMPLITUDE_TOL: f64 = 1e-9;
/// Weight allowed outside the protocol image before a state is rejected.
pub const PROTOCOL_FORM_TOL: f64 = 1e-8;
/// Combined solver slack for the conversion inequalities.
pub const CONVERSION_SLACK: f64 = 2e-6;

/// Solver configuration handed to the SDP-backed measures.
#[derive(Debug, Clone, Copy)]
pub struct SdpSolver {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SdpSolver {
    fn default() -> Self {
        Self {
            tol: sdp::SDP_DEFAULT_TOL,
            max_iter: sdp::SDP_DEFAULT_MAX_ITER,
        }
    }
}

impl SdpSolver {
    /// Solve and insist on certification; a non-certified result is an error.
    pub fn solve_certified(&self, p: &sdp::SdpProblem) -> Result<SdpSolution> {
        let sol = sdp::solve(p, self.tol, self.max_iter)?;
        if !sol.certified {
            return Err(CoreError::SolverNonConvergence {
                gap: sol.duality_gap,
                iterations: sol.iterations,
            });
        }
        Ok(sol)
    }
}

/// How a measure value was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeasureMethod {
    ClosedForm,
    Sdp,
    BruteForce,
}

impl MeasureMethod {
    pub fn as_str(&self) -> &'static str {
        match self {
            MeasureMethod::ClosedForm => "closed_form",
            MeasureMethod::Sdp => "sdp",
            MeasureMethod::BruteForce => "brute_force",
        }
    }
}

/// A measure value in [0, 1], optionally with the optimizing free state and
/// the solver's duality gap.
#[derive(Debug, Clone)]
pub struct MeasureResult {
    pub value: f64,
    pub closest_state: Option<StateFile>,
    pub method: MeasureMethod,
    pub solver_gap: Option<f64>,
}

/// Entanglement depth with a witnessing partition.
#[derive(Debug, Clone)]
pub struct DepthReport {
    pub depth: usize,
    pub witness_partition: SetPartition,
    pub tolerance: f64,
}

/// Number of amplitudes above tol for a single-qudit pure state.
pub fn coherence_rank(psi: &PureState, tol: f64) -> Result<usize> {
    if psi.shape().factor_count() != 1 {
        return Err(CoreError::ShapeMismatch(
            "coherence rank expects a single-qudit state".into(),
        ));
    }
    Ok(psi.amplitudes().iter().filter(|a| a.norm() > tol).count())
}

/// Reshape the amplitude tensor across the cut (side A = `cut`, complement
/// as columns) and count singular values.
pub fn schmidt_rank(psi: &PureState, cut: &[usize], tol: f64) -> Result<usize> {
    let m = bipartition_matrix(psi, cut)?;
    linalg::rank_with_tol(&m, tol)
}

fn bipartition_matrix(psi: &PureState, cut: &[usize]) -> Result<ComplexMatrix> {
    let dims = psi.shape().dims();
    let nf = dims.len();
    if cut.is_empty() || cut.len() >= nf {
        return Err(CoreError::ShapeMismatch(
            "cut must be a proper nonempty subset of the factors".into(),
        ));
    }
    if cut.iter().any(|&f| f >= nf) || cut.windows(2).any(|w| w[0] >= w[1]) {
        return Err(CoreError::ShapeMismatch(
            "cut must be strictly increasing factor indices".into(),
        ));
    }
    let rest: Vec<usize> = (0..nf).filter(|f| !cut.contains(f)).collect();
    let dim_a: usize = cut.iter().map(|&f| dims[f]).product();
    let dim_b: usize = rest.iter().map(|&f| dims[f]).product();

    let mut out = ComplexMatrix::zeros(dim_a, dim_b);
    let mut digits = vec![0usize; nf];
    for (idx, &a) in psi.amplitudes().iter().enumerate() {
        let mut rem = idx;
        for f in (0..nf).rev() {
            digits[f] = rem % dims[f];
            rem /= dims[f];
        }
        let mut ra = 0usize;
        for &f in cut {
            ra = ra * dims[f] + digits[f];
        }
        let mut rb = 0usize;
        for &f in &rest {
            rb = rb * dims[f] + digits[f];
        }
        out.set(ra, rb, a);
    }
    Ok(out)
}

/// Purity of the reduced state on the factor subset, computed on the
/// smaller side of the cut (equal for pure global states).
fn block_purity(psi: &PureState, block: &[usize]) -> Result<f64> {
    let dims = psi.shape().dims();
    if block.len() == dims.len() {
        return Ok(1.0);
    }
    let dim_block: usize = block.iter().map(|&f| dims[f]).product();
    let total: usize = dims.iter().product();
    let m = if dim_block * dim_block <= total {
        bipartition_matrix(psi, block)?
    } else {
        let rest: Vec<usize> = (0..dims.len()).filter(|f| !block.contains(f)).collect();
        bipartition_matrix(psi, &rest)?
    };
    let gram = m.mul(&m.dagger())?;
    let mut acc = 0.0;
    for i in 0..gram.rows() {
        for j in 0..gram.cols() {
            acc += gram.get(i, j).norm_sqr();
        }
    }
    Ok(acc)
}

/// Entanglement depth of a pure state by exhaustive partition search.
///
/// A partition factorizes the state iff every block marginal is pure
/// (purity >= 1 - tol); the depth is the smallest achievable maximum block
/// size. At most 8 factors.
pub fn entanglement_depth_pure(psi: &PureState, tol: f64) -> Result<DepthReport> {
    let nf = psi.shape().factor_count();
    if nf > 8 {
        return Err(CoreError::OutOfRange(format!(
            "depth search supports at most 8 factors, got {}",
            nf
        )));
    }
    let mut purity_cache: std::collections::BTreeMap<Vec<usize>, f64> =
        std::collections::BTreeMap::new();
    for k in 1..=nf {
        for partition in crate::hilbert::enumerate_partitions(nf, k)? {
            let mut factorizes = true;
            for block in partition.blocks() {
                let purity = match purity_cache.get(block) {
                    Some(&p) => p,
                    None => {
                        let p = block_purity(psi, block)?;
                        purity_cache.insert(block.clone(), p);
                        p
                    }
                };
                if purity < 1.0 - tol {
                    factorizes = false;
                    break;
                }
            }
            if factorizes {
                return Ok(DepthReport {
                    depth: k,
                    witness_partition: partition,
                    tolerance: tol,
                });
            }
        }
    }
    unreachable!("the single-block partition always factorizes a pure state")
}

/// Uhlmann fidelity F(rho, sigma) = (Tr sqrt(sqrt(rho) sigma sqrt(rho)))^2.
pub fn fidelity(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    if rho.shape().dims() != sigma.shape().dims() {
        return Err(CoreError::ShapeMismatch(format!(
            "fidelity needs equal shapes, got {:?} and {:?}",
            rho.shape().dims(),
            sigma.shape().dims()
        )));
    }
    let s = linalg::psd_sqrt(rho.matrix())?;
    let inner = s.mul(sigma.matrix())?.mul(&s)?.symmetrize()?;
    let spec = linalg::hermitian_eig(&inner)?;
    let root_sum: f64 = spec.eigenvalues.iter().map(|&l| l.max(0.0).sqrt()).sum();
    Ok((root_sum * root_sum).clamp(0.0, 1.0 + 1e-9).min(1.0))
}

/// Indices of the k-1 largest amplitudes by magnitude, ties broken by
/// lowest index.
fn top_indices(amps: &[Complex64], count: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..amps.len()).collect();
    order.sort_by(|&i, &j| {
        amps[j]
            .norm()
            .partial_cmp(&amps[i].norm())
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(i.cmp(&j))
    });
    let mut top: Vec<usize> = order.into_iter().take(count).collect();
    top.sort_unstable();
    top
}

/// Geometric measure of k-coherence of a pure state:
/// 1 - sum of the k-1 largest |c_i|^2, with the renormalized truncation as
/// the closest at-most-(k-1)-coherent state.
pub fn geometric_coherence_pure(psi: &PureState, k: usize) -> Result<MeasureResult> {
    let dims = psi.shape().dims();
    if dims.len() != 1 {
        return Err(CoreError::ShapeMismatch(
            "geometric coherence expects a single-qudit state".into(),
        ));
    }
    let d = dims[0];
    if k < 2 || k > d {
        return Err(CoreError::OutOfRange(format!("k = {} outside 2..={}", k, d)));
    }
    let top = top_indices(psi.amplitudes(), k - 1);
    let kept: f64 = top.iter().map(|&i| psi.amplitudes()[i].norm_sqr()).sum();
    let mut truncated = vec![Complex64::new(0.0, 0.0); d];
    for &i in &top {
        truncated[i] = psi.amplitudes()[i];
    }
    let closest = if kept > 1e-12 {
        Some(StateFile::Pure(PureState::normalized(
            psi.shape().clone(),
            truncated,
        )?))
    } else {
        None
    };
    Ok(MeasureResult {
        value: (1.0 - kept).clamp(0.0, 1.0),
        closest_state: closest,
        method: MeasureMethod::ClosedForm,
        solver_gap: None,
    })
}

/// Extract the protocol-form coefficients c_i of a state
/// sum_i c_i |i>|2^(d-i)>; rejects states with weight outside the image.
pub fn protocol_coefficients(psi_prime: &PureState) -> Result<Vec<Complex64>> {
    let dims = psi_prime.shape().dims();
    let d = dims[0];
    if dims.len() != d + 1 || dims[1..].iter().any(|&q| q != 2) {
        return Err(CoreError::ShapeMismatch(format!(
            "expected shape (d, 2 x d), got {:?}",
            dims
        )));
    }
    let mut coeffs = Vec::with_capacity(d);
    let mut on_pattern = 0.0;
    for i in 0..d {
        let idx = protocol_index(d, i)?;
        let c = psi_prime.amplitudes()[idx];
        on_pattern += c.norm_sqr();
        coeffs.push(c);
    }
    let outside = (1.0 - on_pattern).max(0.0);
    if outside > PROTOCOL_FORM_TOL {
        return Err(CoreError::NotProtocolForm { weight: outside });
    }
    Ok(coeffs)
}

/// Geometric measure of (k+1)-partite entanglement for protocol-form pure
/// states: E_G^(k+1) = 1 - sum of the k-1 largest |c_i|^2, the same closed
/// form as the k-coherence of the preimage.
pub fn geometric_entanglement_protocol_pure(
    psi_prime: &PureState,
    k: usize,
) -> Result<MeasureResult> {
    let coeffs = protocol_coefficients(psi_prime)?;
    let d = coeffs.len();
    if k < 2 || k > d {
        return Err(CoreError::OutOfRange(format!("k = {} outside 2..={}", k, d)));
    }
    let top = top_indices(&coeffs, k - 1);
    let kept: f64 = top.iter().map(|&i| coeffs[i].norm_sqr()).sum();
    let closest = if kept > 1e-12 {
        let mut amps = vec![Complex64::new(0.0, 0.0); psi_prime.dim()];
        for &i in &top {
            amps[protocol_index(d, i)?] = coeffs[i];
        }
        Some(StateFile::Pure(PureState::normalized(
            psi_prime.shape().clone(),
            amps,
        )?))
    } else {
        None
    };
    Ok(MeasureResult {
        value: (1.0 - kept).clamp(0.0, 1.0),
        closest_state: closest,
        method: MeasureMethod::ClosedForm,
        solver_gap: None,
    })
}

/// Project tiny negative eigenvalues away and renormalize the trace; used
/// when reconstructing states from solver output or image-subspace pullbacks.
fn sanitize_density(shape: SpaceShape, m: &ComplexMatrix) -> Result<DensityMatrix> {
    let spec = linalg::hermitian_eig(&m.symmetrize()?)?;
    let clamped = spec.assemble(|l| l.max(0.0));
    let tr = clamped.trace().re;
    if tr <= 1e-12 {
        return Err(CoreError::TraceViolation { measured: tr });
    }
    DensityMatrix::new(shape, clamped.scale(Complex64::new(1.0 / tr, 0.0)))
}

/// Geometric measure of k-coherence for a mixed single-qudit state via the
/// certified SDP: C_G^(k) = 1 - (max sqrt-fidelity)^2.
pub fn geometric_coherence_mixed(
    rho: &DensityMatrix,
    k: usize,
    solver: &SdpSolver,
) -> Result<MeasureResult> {
    let dims = rho.shape().dims();
    if dims.len() != 1 {
        return Err(CoreError::ShapeMismatch(
            "geometric coherence expects a single-qudit state".into(),
        ));
    }
    let d = dims[0];
    let problem = sdp::build_kcoherent_fidelity_sdp(rho, k)?;
    let sol = solver.solve_certified(&problem)?;
    let opt = sol.primal_value.clamp(0.0, 1.0);
    let value = (1.0 - opt * opt).clamp(0.0, 1.0);

    // closest (k-1)-coherent state: the sigma corner of the Z block
    let z = sdp::unembed(&sol.block_values[0])?;
    let rr = sol.block_values[0].size() / 2 - d;
    let sigma = ComplexMatrix::from_fn(d, d, |i, j| z.get(rr + i, rr + j));
    let closest = sanitize_density(rho.shape().clone(), &sigma).ok();

    Ok(MeasureResult {
        value,
        closest_state: closest.map(StateFile::Mixed),
        method: MeasureMethod::Sdp,
        solver_gap: Some(sol.duality_gap),
    })
}

/// Pull a protocol-output state rho' on (d, 2 x d) back to the qudit via
/// the image basis {|i>|2^(d-i)>}; rejects states leaving the image.
pub fn pullback_activated(rho_prime: &DensityMatrix) -> Result<DensityMatrix> {
    let dims = rho_prime.shape().dims();
    let d = dims[0];
    if dims.len() != d + 1 || dims[1..].iter().any(|&q| q != 2) {
        return Err(CoreError::ShapeMismatch(format!(
            "expected shape (d, 2 x d), got {:?}",
            dims
        )));
    }
    let indices: Vec<usize> = (0..d).map(|i| protocol_index(d, i)).collect::<Result<_>>()?;
    pullback_by_indices(rho_prime, &indices, d)
}

/// Pull a decoupled state rho'' on d qubits back to the qudit via the
/// string basis {|2^(d-i)>}.
pub fn pullback_decoupled(rho_dprime: &DensityMatrix) -> Result<DensityMatrix> {
    let dims = rho_dprime.shape().dims();
    let d = dims.len();
    if dims.iter().any(|&q| q != 2) {
        return Err(CoreError::ShapeMismatch(format!(
            "expected a register of qubits, got {:?}",
            dims
        )));
    }
    let indices: Vec<usize> = (1..=d)
        .map(|i| binary_string_index(d, i))
        .collect::<Result<_>>()?;
    pullback_by_indices(rho_dprime, &indices, d)
}

fn pullback_by_indices(
    rho: &DensityMatrix,
    indices: &[usize],
    d: usize,
) -> Result<DensityMatrix> {
    let sub = ComplexMatrix::from_fn(d, d, |i, j| rho.matrix().get(indices[i], indices[j]));
    let outside = (1.0 - sub.trace().re).max(0.0);
    if outside > PROTOCOL_FORM_TOL {
        return Err(CoreError::NotProtocolForm { weight: outside });
    }
    sanitize_density(SpaceShape::qudit(d)?, &sub)
}

/// The three values compared by the conversion inequalities, all computed
/// with the fidelity-based distance D = 1 - F.
#[derive(Debug, Clone)]
pub struct ConversionReport {
    pub k: usize,
    /// C_D^(k)(rho) on the input qudit.
    pub coherence_value: f64,
    /// E_D^(k+1)(rho') after activation.
    pub entanglement_activated: f64,
    /// E_D^(k)(rho'') after LOCC decoupling.
    pub entanglement_decoupled: f64,
    pub max_solver_gap: f64,
    pub slack: f64,
    pub holds: bool,
}

/// Check C_D^(k)(rho) >= E_D^(k+1)(rho') and >= E_D^(k)(rho'') by running
/// the protocol on rho and evaluating all three sides with the SDP.
pub fn verify_conversion_bounds(
    rho: &DensityMatrix,
    k: usize,
    solver: &SdpSolver,
) -> Result<ConversionReport> {
    let c_side = geometric_coherence_mixed(rho, k, solver)?;

    let rho_prime = activate_density(rho)?;
    let pulled_prime = pullback_activated(&rho_prime)?;
    let e_prime = geometric_coherence_mixed(&pulled_prime, k, solver)?;

    let rho_dprime = locc_decouple(&rho_prime)?;
    let pulled_dprime = pullback_decoupled(&rho_dprime)?;
    let e_dprime = geometric_coherence_mixed(&pulled_dprime, k, solver)?;

    let max_gap = [&c_side, &e_prime, &e_dprime]
        .iter()
        .filter_map(|r| r.solver_gap)
        .fold(0.0, f64::max);
    let holds = c_side.value >= e_prime.value - CONVERSION_SLACK
        && c_side.value >= e_dprime.value - CONVERSION_SLACK;
    Ok(ConversionReport {
        k,
        coherence_value: c_side.value,
        entanglement_activated: e_prime.value,
        entanglement_decoupled: e_dprime.value,
        max_solver_gap: max_gap,
        slack: CONVERSION_SLACK,
        holds,
    })
}

/// SDP-certified lower bound on the coherence number: the largest k with
/// C_G^(k)(rho) > tol, or 1 when already incoherent within tol. Exact on
/// pure states.
pub fn coherence_number_lower_bound(
    rho: &DensityMatrix,
    solver: &SdpSolver,
    tol: f64,
) -> Result<usize> {
    let dims = rho.shape().dims();
    if dims.len() != 1 {
        return Err(CoreError::ShapeMismatch(
            "coherence number expects a single-qudit state".into(),
        ));
    }
    let d = dims[0];
    let mut bound = 1usize;
    for k in 2..=d {
        // C_G^(k) is non-increasing in k: stop at the first zero.
        let c = geometric_coherence_mixed(rho, k, solver)?;
        if c.value > tol {
            bound = k;
        } else {
            break;
        }
    }
    Ok(bound)
}
