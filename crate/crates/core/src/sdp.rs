//! Minimal dense semidefinite-programming layer.
//!
//! Programs are block-structured real symmetric maximization problems:
//! maximize sum_b <C_b, W_b> over W_b >= 0 subject to linear equality
//! constraints across blocks. Complex Hermitian data enters exclusively
//! through the standard real embedding (see [`realify`]); builders scale
//! their coefficient matrices so the real optimum equals the complex one.
//!
//! The solver is a primal-dual path-following method on the log-det barrier
//! with Nesterov-Todd scaling, Mehrotra-style adaptive centering, and dense
//! Cholesky factorizations of the Schur complement. Every reported solve
//! carries an explicit certificate: the dual iterate y gives a slack
//! S = A*(y) - C, and the reported duality gap is b.y - <C,W> plus penalty
//! terms (from any tiny negative slack eigenvalue, weighted by trace_cap,
//! and from the primal residual) that keep the bound valid under roundoff.
//!
//! Block layout contract for [`build_fidelity_sdp`] and
//! [`build_kcoherent_fidelity_sdp`]: block 0 (named "Z") is the embedded
//! Uhlmann block [[rho, X], [X^dag, sigma]] restricted to the support of
//! rho (and of sigma for the plain fidelity program); the remaining blocks
//! of the k-coherent program are the embedded subset variables Y_I in
//! lexicographic subset order.

use num_complex::Complex64;

use crate::error::{CoreError, Result};
use crate::hilbert::DensityMatrix;
use crate::linalg::{self, ComplexMatrix};

/// Default duality-gap target for certified solves.
pub const SDP_DEFAULT_TOL: f64 = 1e-7;
/// Default cap on total Newton steps.
pub const SDP_DEFAULT_MAX_ITER: usize = 2000;
/// Relative eigenvalue cutoff when restricting to the support of a state.
const SUPPORT_CUT: f64 = 1e-11;

/// Dense real symmetric matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SymMatrix {
    pub fn new(n: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * n {
            return Err(CoreError::ShapeMismatch(format!(
                "{}x{} symmetric matrix needs {} entries, got {}",
                n,
                n,
                n * n,
                data.len()
            )));
        }
        let scale = data.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
        for i in 0..n {
            for j in (i + 1)..n {
                if (data[i * n + j] - data[j * n + i]).abs() > 1e-12 * scale {
                    return Err(CoreError::ShapeMismatch(format!(
                        "asymmetric entry at ({}, {})",
                        i, j
                    )));
                }
            }
        }
        Ok(Self { n, data })
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn scaled_identity(n: usize, s: f64) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.data[i * n + i] = s;
        }
        m
    }

    pub fn size(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    /// Set both (i, j) and (j, i).
    pub fn set_sym(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
        self.data[j * self.n + i] = v;
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.get(i, i)).sum()
    }

    /// Tr(self * other) for symmetric matrices.
    pub fn inner(&self, other: &Self) -> f64 {
        debug_assert_eq!(self.n, other.n);
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a * b)
            .sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn add_scaled(&mut self, other: &Self, s: f64) {
        debug_assert_eq!(self.n, other.n);
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += s * b;
        }
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            n: self.n,
            data: self.data.iter().map(|v| v * s).collect(),
        }
    }

    /// View as a complex Hermitian matrix (zero imaginary part).
    pub fn to_complex(&self) -> ComplexMatrix {
        ComplexMatrix::from_fn(self.n, self.n, |i, j| Complex64::new(self.get(i, j), 0.0))
    }

    /// Cholesky factor L (lower-triangular, row-major dense); None when the
    /// matrix is not positive definite.
    fn cholesky(&self) -> Option<Vec<f64>> {
        let n = self.n;
        let mut l = vec![0.0f64; n * n];
        for i in 0..n {
            for j in 0..=i {
                let mut sum = self.get(i, j);
                for k in 0..j {
                    sum -= l[i * n + k] * l[j * n + k];
                }
                if i == j {
                    if sum <= 0.0 || !sum.is_finite() {
                        return None;
                    }
                    l[i * n + i] = sum.sqrt();
                } else {
                    l[i * n + j] = sum / l[j * n + j];
                }
            }
        }
        Some(l)
    }

    fn is_pd(&self) -> bool {
        self.cholesky().is_some()
    }

    /// Smallest eigenvalue, via the Hermitian kernel.
    pub fn lambda_min(&self) -> Result<f64> {
        Ok(linalg::hermitian_eig(&self.to_complex())?.lambda_min())
    }
}

/// W * A * W for symmetric W, A; the result is symmetrized against roundoff.
fn sandwich(w: &SymMatrix, a: &SymMatrix) -> SymMatrix {
    let n = w.n;
    let mut tmp = vec![0.0f64; n * n];
    for i in 0..n {
        for k in 0..n {
            let wik = w.data[i * n + k];
            if wik == 0.0 {
                continue;
            }
            for j in 0..n {
                tmp[i * n + j] += wik * a.data[k * n + j];
            }
        }
    }
    let mut out = vec![0.0f64; n * n];
    for i in 0..n {
        for k in 0..n {
            let tik = tmp[i * n + k];
            if tik == 0.0 {
                continue;
            }
            for j in 0..n {
                out[i * n + j] += tik * w.data[k * n + j];
            }
        }
    }
    for i in 0..n {
        for j in 0..i {
            let v = 0.5 * (out[i * n + j] + out[j * n + i]);
            out[i * n + j] = v;
            out[j * n + i] = v;
        }
    }
    SymMatrix { n, data: out }
}

/// Block name and size declaration.
#[derive(Debug, Clone)]
pub struct SdpBlock {
    pub name: String,
    pub size: usize,
}

/// One equality constraint: sum over listed blocks of <coeff, W_block> = rhs.
#[derive(Debug, Clone)]
pub struct SdpConstraint {
    pub coeffs: Vec<(usize, SymMatrix)>,
    pub rhs: f64,
}

/// Block-structured real symmetric maximization program.
#[derive(Debug, Clone)]
pub struct SdpProblem {
    pub blocks: Vec<SdpBlock>,
    /// Objective coefficient matrix per block (maximize).
    pub objective: Vec<SymMatrix>,
    pub equality_constraints: Vec<SdpConstraint>,
    /// Strictly feasible starting point, one matrix per block.
    pub initial_point: Vec<SymMatrix>,
    /// Upper bound on the trace of any feasible point; keeps the dual bound
    /// valid when the extracted slack dips marginally below the cone.
    pub trace_cap: f64,
}

impl SdpProblem {
    pub fn validate(&self) -> Result<()> {
        if self.objective.len() != self.blocks.len()
            || self.initial_point.len() != self.blocks.len()
        {
            return Err(CoreError::ShapeMismatch(
                "objective/initial point must list every block".into(),
            ));
        }
        for (b, spec) in self.blocks.iter().enumerate() {
            if self.objective[b].size() != spec.size || self.initial_point[b].size() != spec.size {
                return Err(CoreError::ShapeMismatch(format!(
                    "block {} ({}) size mismatch",
                    b, spec.name
                )));
            }
        }
        for (c, con) in self.equality_constraints.iter().enumerate() {
            for (b, m) in &con.coeffs {
                if *b >= self.blocks.len() || m.size() != self.blocks[*b].size {
                    return Err(CoreError::ShapeMismatch(format!(
                        "constraint {} references invalid block",
                        c
                    )));
                }
            }
        }
        Ok(())
    }

    fn apply_constraints(&self, w: &[SymMatrix]) -> Vec<f64> {
        self.equality_constraints
            .iter()
            .map(|con| con.coeffs.iter().map(|(b, m)| m.inner(&w[*b])).sum())
            .collect()
    }

    fn objective_value(&self, w: &[SymMatrix]) -> f64 {
        self.objective
            .iter()
            .zip(w)
            .map(|(c, wb)| c.inner(wb))
            .sum()
    }

    /// Plain-text dump for cross-checking with external solvers: block
    /// sizes, then objective and constraint entry triplets (upper triangle).
    pub fn dump_text(&self) -> String {
        use std::fmt::Write;
        let mut out = String::new();
        let _ = writeln!(out, "blocks {}", self.blocks.len());
        for (b, spec) in self.blocks.iter().enumerate() {
            let _ = writeln!(out, "block {} {} {}", b, spec.name, spec.size);
        }
        for (b, c) in self.objective.iter().enumerate() {
            for i in 0..c.size() {
                for j in i..c.size() {
                    if c.get(i, j) != 0.0 {
                        let _ = writeln!(out, "objective {} {} {} {:.17e}", b, i, j, c.get(i, j));
                    }
                }
            }
        }
        for (k, con) in self.equality_constraints.iter().enumerate() {
            let _ = writeln!(out, "constraint {} rhs {:.17e}", k, con.rhs);
            for (b, m) in &con.coeffs {
                for i in 0..m.size() {
                    for j in i..m.size() {
                        if m.get(i, j) != 0.0 {
                            let _ = writeln!(
                                out,
                                "coeff {} {} {} {} {:.17e}",
                                k,
                                b,
                                i,
                                j,
                                m.get(i, j)
                            );
                        }
                    }
                }
            }
        }
        out
    }
}

/// Certified solution of an [`SdpProblem`].
#[derive(Debug, Clone)]
pub struct SdpSolution {
    pub primal_value: f64,
    pub block_values: Vec<SymMatrix>,
    pub dual_multipliers: Vec<f64>,
    pub duality_gap: f64,
    pub iterations: usize,
    /// True when the duality gap certificate met the requested tolerance.
    pub certified: bool,
}

/// General (non-symmetric) product of two equally sized square matrices
/// given as row-major slices.
fn gen_mul(n: usize, a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0f64; n * n];
    for i in 0..n {
        for k in 0..n {
            let aik = a[i * n + k];
            if aik == 0.0 {
                continue;
            }
            for j in 0..n {
                out[i * n + j] += aik * b[k * n + j];
            }
        }
    }
    out
}

fn symmetrized(n: usize, mut data: Vec<f64>) -> SymMatrix {
    for i in 0..n {
        for j in 0..i {
            let v = 0.5 * (data[i * n + j] + data[j * n + i]);
            data[i * n + j] = v;
            data[j * n + i] = v;
        }
    }
    SymMatrix { n, data }
}

/// Spectral decomposition of a symmetric matrix, reused for powers.
struct SymSpectrum {
    eigenvalues: Vec<f64>,
    vectors: Vec<f64>, // column-major-ish: vectors[i * n + k] = component i of eigenvector k
    n: usize,
}

impl SymSpectrum {
    fn compute(m: &SymMatrix) -> Result<Self> {
        let spec = linalg::hermitian_eig(&m.to_complex())?;
        let n = m.size();
        let mut vectors = vec![0.0f64; n * n];
        for i in 0..n {
            for k in 0..n {
                vectors[i * n + k] = spec.vectors.get(i, k).re;
            }
        }
        Ok(Self {
            eigenvalues: spec.eigenvalues,
            vectors,
            n,
        })
    }

    fn assemble(&self, f: impl Fn(f64) -> f64) -> SymMatrix {
        let n = self.n;
        let mut data = vec![0.0f64; n * n];
        for k in 0..n {
            let fk = f(self.eigenvalues[k]);
            if fk == 0.0 {
                continue;
            }
            for i in 0..n {
                let vik = self.vectors[i * n + k];
                if vik == 0.0 {
                    continue;
                }
                for j in 0..n {
                    data[i * n + j] += fk * vik * self.vectors[j * n + k];
                }
            }
        }
        symmetrized(n, data)
    }
}

/// Largest alpha with X + alpha * D >= 0, given X's Cholesky factor.
fn max_step(l: &[f64], d: &SymMatrix) -> Result<f64> {
    let n = d.n;
    // T = L^-1 D L^-T, same forward-substitution route as decrement_sq
    let mut x = d.data.clone();
    for col in 0..n {
        for i in 0..n {
            let mut sum = x[i * n + col];
            for k in 0..i {
                sum -= l[i * n + k] * x[k * n + col];
            }
            x[i * n + col] = sum / l[i * n + i];
        }
    }
    let mut xt = vec![0.0f64; n * n];
    for i in 0..n {
        for j in 0..n {
            xt[j * n + i] = x[i * n + j];
        }
    }
    for col in 0..n {
        for i in 0..n {
            let mut sum = xt[i * n + col];
            for k in 0..i {
                sum -= l[i * n + k] * xt[k * n + col];
            }
            xt[i * n + col] = sum / l[i * n + i];
        }
    }
    let t = symmetrized(n, xt);
    let lmin = t.lambda_min()?;
    if lmin >= -1e-300 {
        Ok(f64::INFINITY)
    } else {
        Ok(-1.0 / lmin)
    }
}

/// A*(y) accumulated per block, minus the objective when `minus_c` is set.
fn adjoint(p: &SdpProblem, y: &[f64], minus_c: bool) -> Vec<SymMatrix> {
    let mut out: Vec<SymMatrix> = if minus_c {
        p.objective.iter().map(|c| c.scale(-1.0)).collect()
    } else {
        p.blocks
            .iter()
            .map(|b| SymMatrix::zeros(b.size))
            .collect()
    };
    for (i, con) in p.equality_constraints.iter().enumerate() {
        if y[i] == 0.0 {
            continue;
        }
        for (b, a) in &con.coeffs {
            out[*b].add_scaled(a, y[i]);
        }
    }
    out
}

struct Certificate {
    gap: f64,
    residual: f64,
}

/// Honest duality-gap bound for the current iterate: b.y - <C,X> plus a
/// trace-weighted penalty for any negative slack eigenvalue and for the
/// primal residual contracted against y.
fn certify(p: &SdpProblem, x: &[SymMatrix], y: &[f64]) -> Result<Certificate> {
    let slack = adjoint(p, y, true);
    let mut slack_min = f64::INFINITY;
    for s in &slack {
        slack_min = slack_min.min(s.lambda_min()?);
    }
    let dual_obj: f64 = p
        .equality_constraints
        .iter()
        .zip(y)
        .map(|(con, yi)| con.rhs * yi)
        .sum();
    let applied = p.apply_constraints(x);
    let mut residual = 0.0f64;
    let mut residual_penalty = 0.0f64;
    for (i, con) in p.equality_constraints.iter().enumerate() {
        let r = (applied[i] - con.rhs).abs();
        residual = residual.max(r);
        residual_penalty += y[i].abs() * r;
    }
    let penalty = (-slack_min).max(0.0) * p.trace_cap + residual_penalty;
    let gap = dual_obj + penalty - p.objective_value(x);
    Ok(Certificate { gap, residual })
}

/// Solve a maximization program by primal-dual path following with NT
/// scaling and Mehrotra-style adaptive centering.
///
/// `tol` is the duality-gap certificate target; `max_iter` caps the
/// iteration count. A solution with `certified == false` is returned when
/// the cap (or numerical stagnation) is reached first.
pub fn solve(p: &SdpProblem, tol: f64, max_iter: usize) -> Result<SdpSolution> {
    p.validate()?;
    let m = p.equality_constraints.len();
    let n_tot: usize = p.blocks.iter().map(|b| b.size).sum();

    let mut x = p.initial_point.clone();
    let applied = p.apply_constraints(&x);
    for (i, con) in p.equality_constraints.iter().enumerate() {
        if (applied[i] - con.rhs).abs() > 1e-8 * con.rhs.abs().max(1.0) {
            return Err(CoreError::InfeasibleStart(format!(
                "constraint {} violated by {:.3e}",
                i,
                (applied[i] - con.rhs).abs()
            )));
        }
    }
    for (b, xb) in x.iter().enumerate() {
        if !xb.is_pd() {
            return Err(CoreError::InfeasibleStart(format!(
                "block {} ({}) is not positive definite",
                b, p.blocks[b].name
            )));
        }
    }

    // dual start: y = 0, S = s0 * I with s0 above the objective scale
    let s0 = 1.0
        + p.objective
            .iter()
            .map(|c| c.frobenius_norm())
            .fold(0.0, f64::max);
    let mut y = vec![0.0f64; m];
    let mut s: Vec<SymMatrix> = p
        .blocks
        .iter()
        .map(|b| SymMatrix::scaled_identity(b.size, s0))
        .collect();

    let mut best: Option<SdpSolution> = None;
    let mut iterations = 0usize;

    while iterations < max_iter {
        iterations += 1;

        let cert = certify(p, &x, &y)?;
        let solution = SdpSolution {
            primal_value: p.objective_value(&x),
            block_values: x.clone(),
            dual_multipliers: y.clone(),
            duality_gap: cert.gap,
            iterations,
            certified: cert.gap <= tol && cert.gap >= -1e-9 && cert.residual <= 1e-7,
        };
        if solution.certified {
            return Ok(solution);
        }
        match &best {
            Some(b) if b.duality_gap.abs() <= cert.gap.abs() => {}
            _ => best = Some(solution),
        }

        let mu: f64 = x.iter().zip(&s).map(|(xb, sb)| xb.inner(sb)).sum::<f64>() / n_tot as f64;
        if !mu.is_finite() || mu < 1e-14 {
            break;
        }

        // per-block spectral data and NT scaling W = S^-1/2 (S^1/2 X S^1/2)^1/2 S^-1/2
        let mut w_nt: Vec<SymMatrix> = Vec::with_capacity(p.blocks.len());
        let mut s_inv: Vec<SymMatrix> = Vec::with_capacity(p.blocks.len());
        let mut ok = true;
        for (xb, sb) in x.iter().zip(&s) {
            let spec = SymSpectrum::compute(sb)?;
            if spec.eigenvalues.iter().any(|&l| l <= 0.0) {
                ok = false;
                break;
            }
            let s_half = spec.assemble(|l| l.sqrt());
            let s_half_inv = spec.assemble(|l| 1.0 / l.sqrt());
            s_inv.push(spec.assemble(|l| 1.0 / l));
            let inner = symmetrized(
                xb.n,
                gen_mul(xb.n, &s_half.data, &gen_mul(xb.n, &xb.data, &s_half.data)),
            );
            let inner_spec = SymSpectrum::compute(&inner)?;
            let inner_half = inner_spec.assemble(|l| l.max(0.0).sqrt());
            let w = symmetrized(
                xb.n,
                gen_mul(
                    xb.n,
                    &s_half_inv.data,
                    &gen_mul(xb.n, &inner_half.data, &s_half_inv.data),
                ),
            );
            w_nt.push(w);
        }
        if !ok {
            break;
        }

        // Schur complement M_ij = sum_b <A_i, W A_j W> (symmetric PD)
        let sandwiches: Vec<Vec<(usize, SymMatrix)>> = p
            .equality_constraints
            .iter()
            .map(|con| {
                con.coeffs
                    .iter()
                    .map(|(b, a)| (*b, sandwich(&w_nt[*b], a)))
                    .collect()
            })
            .collect();
        let mut mmat = vec![0.0f64; m * m];
        for j in 0..m {
            for (b, swj) in &sandwiches[j] {
                for (i, row) in mmat.chunks_mut(m).enumerate() {
                    for (bi, ai) in &p.equality_constraints[i].coeffs {
                        if bi == b {
                            row[j] += ai.inner(swj);
                        }
                    }
                }
            }
        }
        let mschur = symmetrized(m, mmat);
        let diag_scale = (0..m).map(|i| mschur.get(i, i)).fold(1e-300, f64::max);
        let mut l_m = None;
        for ridge_pow in 0..4 {
            let mut reg = mschur.clone();
            let ridge = diag_scale * 1e-14 * 10f64.powi(4 * ridge_pow);
            for i in 0..m {
                reg.data[i * m + i] += ridge;
            }
            if let Some(l) = reg.cholesky() {
                l_m = Some(l);
                break;
            }
        }
        let l_m = match l_m {
            Some(l) => l,
            None => break,
        };
        let solve_schur = |rhs: &[f64]| -> Vec<f64> {
            let mut v = rhs.to_vec();
            for i in 0..m {
                let mut sum = v[i];
                for k in 0..i {
                    sum -= l_m[i * m + k] * v[k];
                }
                v[i] = sum / l_m[i * m + i];
            }
            for i in (0..m).rev() {
                let mut sum = v[i];
                for k in (i + 1)..m {
                    sum -= l_m[k * m + i] * v[k];
                }
                v[i] = sum / l_m[i * m + i];
            }
            v
        };

        // residuals
        let applied = p.apply_constraints(&x);
        let rp: Vec<f64> = p
            .equality_constraints
            .iter()
            .zip(&applied)
            .map(|(con, v)| con.rhs - v)
            .collect();
        let mut rd = adjoint(p, &y, false); // A*(y)
        for (b, rdb) in rd.iter_mut().enumerate() {
            // Rd = C - A*(y) + S
            *rdb = {
                let mut t = p.objective[b].clone();
                t.add_scaled(rdb, -1.0);
                t.add_scaled(&s[b], 1.0);
                t
            };
        }

        let x_chols: Vec<Vec<f64>> = x
            .iter()
            .map(|xb| xb.cholesky().ok_or_else(|| {
                CoreError::ShapeMismatch("primal iterate left the cone".into())
            }))
            .collect::<Result<_>>()?;
        let s_chols: Vec<Vec<f64>> = s
            .iter()
            .map(|sb| sb.cholesky().ok_or_else(|| {
                CoreError::ShapeMismatch("dual iterate left the cone".into())
            }))
            .collect::<Result<_>>()?;

        // direction for a given centering target sigma * mu
        let direction = |sigma_mu: f64| -> Result<(Vec<SymMatrix>, Vec<f64>, Vec<SymMatrix>)> {
            // rhs_i = <A_i, sigma*mu*S^-1 - X + W Rd W> - rp_i
            let mut rhs = vec![0.0f64; m];
            let wrw: Vec<SymMatrix> = w_nt
                .iter()
                .zip(&rd)
                .map(|(wb, rdb)| sandwich(wb, rdb))
                .collect();
            for (i, con) in p.equality_constraints.iter().enumerate() {
                let mut acc = -rp[i];
                for (b, a) in &con.coeffs {
                    let mut target = s_inv[*b].scale(sigma_mu);
                    target.add_scaled(&x[*b], -1.0);
                    target.add_scaled(&wrw[*b], 1.0);
                    acc += a.inner(&target);
                }
                rhs[i] = acc;
            }
            let dy = solve_schur(&rhs);
            // dS = A*(dy) - Rd
            let mut ds = adjoint(p, &dy, false);
            for (b, dsb) in ds.iter_mut().enumerate() {
                dsb.add_scaled(&rd[b], -1.0);
            }
            // dX = sigma*mu*S^-1 - X - W dS W
            let mut dx = Vec::with_capacity(p.blocks.len());
            for b in 0..p.blocks.len() {
                let mut v = s_inv[b].scale(sigma_mu);
                v.add_scaled(&x[b], -1.0);
                v.add_scaled(&sandwich(&w_nt[b], &ds[b]), -1.0);
                dx.push(v);
            }
            Ok((dx, dy, ds))
        };

        let steps = |dx: &[SymMatrix], ds: &[SymMatrix]| -> Result<(f64, f64)> {
            let mut ap = f64::INFINITY;
            let mut ad = f64::INFINITY;
            for b in 0..p.blocks.len() {
                ap = ap.min(max_step(&x_chols[b], &dx[b])?);
                ad = ad.min(max_step(&s_chols[b], &ds[b])?);
            }
            Ok((ap, ad))
        };

        // Mehrotra predictor: affine direction fixes sigma
        let (dx_aff, _, ds_aff) = direction(0.0)?;
        let (ap_aff, ad_aff) = steps(&dx_aff, &ds_aff)?;
        let ap_aff = ap_aff.min(1.0);
        let ad_aff = ad_aff.min(1.0);
        let mut mu_aff = 0.0;
        for b in 0..p.blocks.len() {
            let mut xa = x[b].clone();
            xa.add_scaled(&dx_aff[b], 0.99 * ap_aff);
            let mut sa = s[b].clone();
            sa.add_scaled(&ds_aff[b], 0.99 * ad_aff);
            mu_aff += xa.inner(&sa);
        }
        mu_aff /= n_tot as f64;
        let sigma = (mu_aff / mu).max(0.0).powi(3).clamp(1e-4, 0.9);

        // corrector
        let (dx, dy, ds) = direction(sigma * mu)?;
        let (ap, ad) = steps(&dx, &ds)?;
        let tau = if mu > 1e-6 { 0.95 } else { 0.98 };
        let ap = (tau * ap).min(1.0);
        let ad = (tau * ad).min(1.0);
        if ap <= 1e-12 && ad <= 1e-12 {
            break;
        }
        for b in 0..p.blocks.len() {
            x[b].add_scaled(&dx[b], ap);
            s[b].add_scaled(&ds[b], ad);
        }
        for (yi, dyi) in y.iter_mut().zip(&dy) {
            *yi += ad * dyi;
        }
    }

    let cert = certify(p, &x, &y)?;
    let last = SdpSolution {
        primal_value: p.objective_value(&x),
        block_values: x,
        dual_multipliers: y,
        duality_gap: cert.gap,
        iterations,
        certified: cert.gap <= tol && cert.gap >= -1e-9 && cert.residual <= 1e-7,
    };
    if last.certified {
        return Ok(last);
    }
    Ok(match best {
        Some(b) if b.duality_gap.abs() < cert.gap.abs() => b,
        _ => last,
    })
}

/// Real embedding of a complex Hermitian matrix:
/// H -> [[Re H, -Im H], [Im H, Re H]], doubling every eigenvalue multiplicity.
pub fn realify(h: &ComplexMatrix) -> Result<SymMatrix> {
    let scale = h.frobenius_norm().max(1.0);
    let dev = h.hermitian_deviation();
    if dev > linalg::HERMITIAN_TOL * scale {
        return Err(CoreError::NotHermitian {
            deviation: dev,
            tolerance: linalg::HERMITIAN_TOL * scale,
        });
    }
    let n = h.rows();
    let mut m = SymMatrix::zeros(2 * n);
    for i in 0..n {
        for j in 0..n {
            let z = h.get(i, j);
            m.data[i * 2 * n + j] = z.re;
            m.data[(i + n) * 2 * n + (j + n)] = z.re;
            m.data[i * 2 * n + (j + n)] = -z.im;
            m.data[(i + n) * 2 * n + j] = z.im;
        }
    }
    // exact symmetry by construction for Hermitian input; normalize tiny
    // asymmetry from the tolerance window
    for i in 0..2 * n {
        for j in 0..i {
            let v = 0.5 * (m.data[i * 2 * n + j] + m.data[j * 2 * n + i]);
            m.data[i * 2 * n + j] = v;
            m.data[j * 2 * n + i] = v;
        }
    }
    Ok(m)
}

/// Inverse of [`realify`]: recover the complex Hermitian matrix from an
/// embedded (or J-averaged) real symmetric one.
pub fn unembed(w: &SymMatrix) -> Result<ComplexMatrix> {
    if !w.size().is_multiple_of(2) {
        return Err(CoreError::ShapeMismatch(
            "embedded matrix must have even size".into(),
        ));
    }
    let n = w.size() / 2;
    let m = ComplexMatrix::from_fn(n, n, |i, j| {
        let re = 0.5 * (w.get(i, j) + w.get(i + n, j + n));
        let im = 0.5 * (w.get(i + n, j) - w.get(i, j + n));
        Complex64::new(re, im)
    });
    m.symmetrize()
}

/// Support basis of a density matrix: columns spanning the range, eigenvalue
/// cut at SUPPORT_CUT relative to the largest.
fn support_basis(rho: &ComplexMatrix) -> Result<(ComplexMatrix, ComplexMatrix)> {
    let spec = linalg::hermitian_eig(rho)?;
    let lmax = spec.lambda_max().max(0.0);
    if lmax <= 0.0 {
        return Err(CoreError::NotPositive { eigenvalue: lmax });
    }
    let rank = spec
        .eigenvalues
        .iter()
        .filter(|&&l| l > SUPPORT_CUT * lmax)
        .count();
    let basis = ComplexMatrix::from_fn(rho.rows(), rank, |i, j| spec.vectors.get(i, j));
    let restricted = basis.dagger().mul(rho)?.mul(&basis)?.symmetrize()?;
    Ok((basis, restricted))
}

/// Hermitian basis elements spanning an n x n complex Hermitian space,
/// with the complex-side right-hand values for pinning to `target`.
fn hermitian_basis_with_rhs(target: &ComplexMatrix) -> Vec<(ComplexMatrix, f64)> {
    let n = target.rows();
    let mut out = Vec::with_capacity(n * n);
    for i in 0..n {
        let mut e = ComplexMatrix::zeros(n, n);
        e.set(i, i, Complex64::new(1.0, 0.0));
        out.push((e, target.get(i, i).re));
        for j in (i + 1)..n {
            let mut er = ComplexMatrix::zeros(n, n);
            er.set(i, j, Complex64::new(1.0, 0.0));
            er.set(j, i, Complex64::new(1.0, 0.0));
            out.push((er, 2.0 * target.get(i, j).re));
            let mut ei = ComplexMatrix::zeros(n, n);
            ei.set(i, j, Complex64::new(0.0, 1.0));
            ei.set(j, i, Complex64::new(0.0, -1.0));
            out.push((ei, 2.0 * target.get(i, j).im));
        }
    }
    out
}

/// Place an n x n Hermitian matrix into an nz x nz Hermitian matrix at
/// diagonal offset.
fn place(block: &ComplexMatrix, nz: usize, offset: usize) -> ComplexMatrix {
    let mut out = ComplexMatrix::zeros(nz, nz);
    for i in 0..block.rows() {
        for j in 0..block.cols() {
            out.set(i + offset, j + offset, block.get(i, j));
        }
    }
    out
}

/// Fidelity SDP: the optimum equals sqrt(F(rho, sigma)).
///
/// Maximizes Re Tr(X) subject to [[rho, X],[X^dag, sigma]] >= 0, restricted
/// to the supports of rho and sigma so that a strictly feasible interior
/// point exists even for pure inputs.
pub fn build_fidelity_sdp(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<SdpProblem> {
    if rho.dim() != sigma.dim() {
        return Err(CoreError::ShapeMismatch(format!(
            "fidelity needs equal dimensions, got {} and {}",
            rho.dim(),
            sigma.dim()
        )));
    }
    let (b_rho, rho_r) = support_basis(rho.matrix())?;
    let (b_sig, sig_r) = support_basis(sigma.matrix())?;
    let (rr, rs) = (rho_r.rows(), sig_r.rows());
    let nz = rr + rs;

    // objective: Re Tr(X) = Re Tr(Xr K) with K = B_sigma^dag B_rho
    let k_mat = b_sig.dagger().mul(&b_rho)?;
    let mut c_z = ComplexMatrix::zeros(nz, nz);
    for i in 0..rr {
        for j in 0..rs {
            // upper-right block K^dag / 2
            let v = k_mat.get(j, i).conj() * 0.5;
            c_z.set(i, rr + j, v);
            c_z.set(rr + j, i, v.conj());
        }
    }

    let mut constraints = Vec::new();
    for (e, rhs) in hermitian_basis_with_rhs(&rho_r) {
        constraints.push(SdpConstraint {
            coeffs: vec![(0, realify(&place(&e, nz, 0))?.scale(0.5))],
            rhs,
        });
    }
    for (e, rhs) in hermitian_basis_with_rhs(&sig_r) {
        constraints.push(SdpConstraint {
            coeffs: vec![(0, realify(&place(&e, nz, rr))?.scale(0.5))],
            rhs,
        });
    }

    let mut z0 = ComplexMatrix::zeros(nz, nz);
    for i in 0..rr {
        for j in 0..rr {
            z0.set(i, j, rho_r.get(i, j));
        }
    }
    for i in 0..rs {
        for j in 0..rs {
            z0.set(rr + i, rr + j, sig_r.get(i, j));
        }
    }

    Ok(SdpProblem {
        blocks: vec![SdpBlock {
            name: "Z".into(),
            size: 2 * nz,
        }],
        objective: vec![realify(&c_z)?.scale(0.5)],
        equality_constraints: constraints,
        initial_point: vec![realify(&z0)?],
        trace_cap: 2.0 * (rho_r.trace().re + sig_r.trace().re) + 1.0,
    })
}

/// All (k-1)-element subsets of {0..d-1} in lexicographic order.
pub fn coherence_subsets(d: usize, k: usize) -> Result<Vec<Vec<usize>>> {
    if k < 2 || k > d {
        return Err(CoreError::OutOfRange(format!(
            "level k = {} outside 2..={}",
            k, d
        )));
    }
    let size = k - 1;
    let mut out = Vec::new();
    let mut current: Vec<usize> = (0..size).collect();
    loop {
        out.push(current.clone());
        // next lexicographic combination
        let mut i = size;
        loop {
            if i == 0 {
                return finish_subsets(out);
            }
            i -= 1;
            if current[i] != i + d - size {
                break;
            }
        }
        current[i] += 1;
        for j in (i + 1)..size {
            current[j] = current[j - 1] + 1;
        }
    }
}

fn finish_subsets(out: Vec<Vec<usize>>) -> Result<Vec<Vec<usize>>> {
    const SUBSET_LIMIT: usize = 256;
    if out.len() > SUBSET_LIMIT {
        return Err(CoreError::SubsetOverflow {
            count: out.len(),
            limit: SUBSET_LIMIT,
        });
    }
    Ok(out)
}

/// k-coherent fidelity SDP: the optimum equals
/// sqrt(max F(rho, sigma)) over sigma in the set of at most (k-1)-coherent
/// states, expressed as sigma = sum_I P_I Y_I P_I with one PSD block per
/// (k-1)-element index subset I.
pub fn build_kcoherent_fidelity_sdp(rho: &DensityMatrix, k: usize) -> Result<SdpProblem> {
    let dims = rho.shape().dims();
    if dims.len() != 1 {
        return Err(CoreError::ShapeMismatch(
            "k-coherent program expects a single-qudit state".into(),
        ));
    }
    let d = dims[0];
    let subsets = coherence_subsets(d, k)?;
    let s = k - 1;

    let (b_rho, rho_r) = support_basis(rho.matrix())?;
    let rr = rho_r.rows();
    let nz = rr + d;

    // objective Re Tr(X) = Re Tr(Xr B_rho): K = B_rho
    let mut c_z = ComplexMatrix::zeros(nz, nz);
    for i in 0..rr {
        for j in 0..d {
            let v = b_rho.get(j, i).conj() * 0.5;
            c_z.set(i, rr + j, v);
            c_z.set(rr + j, i, v.conj());
        }
    }

    let mut blocks = vec![SdpBlock {
        name: "Z".into(),
        size: 2 * nz,
    }];
    for sub in &subsets {
        blocks.push(SdpBlock {
            name: format!("Y{:?}", sub),
            size: 2 * s,
        });
    }

    let mut constraints = Vec::new();
    // pin the rho corner of Z
    for (e, rhs) in hermitian_basis_with_rhs(&rho_r) {
        constraints.push(SdpConstraint {
            coeffs: vec![(0, realify(&place(&e, nz, 0))?.scale(0.5))],
            rhs,
        });
    }
    // couple the sigma corner of Z to the subset blocks
    let zero_d = ComplexMatrix::zeros(d, d);
    for (e, _) in hermitian_basis_with_rhs(&zero_d) {
        let mut coeffs = vec![(0usize, realify(&place(&e, nz, rr))?.scale(0.5))];
        for (si, sub) in subsets.iter().enumerate() {
            // restriction E[I, I] in local coordinates
            let mut local = ComplexMatrix::zeros(s, s);
            let mut nonzero = false;
            for (a, &ia) in sub.iter().enumerate() {
                for (b, &ib) in sub.iter().enumerate() {
                    let v = e.get(ia, ib);
                    if v != Complex64::new(0.0, 0.0) {
                        nonzero = true;
                    }
                    local.set(a, b, v);
                }
            }
            if nonzero {
                coeffs.push((1 + si, realify(&local)?.scale(-0.5)));
            }
        }
        constraints.push(SdpConstraint { coeffs, rhs: 0.0 });
    }
    // unit trace of sigma
    let mut trace_e = ComplexMatrix::zeros(nz, nz);
    for j in 0..d {
        trace_e.set(rr + j, rr + j, Complex64::new(1.0, 0.0));
    }
    constraints.push(SdpConstraint {
        coeffs: vec![(0, realify(&trace_e)?.scale(0.5))],
        rhs: 1.0,
    });

    // strictly feasible start: X = 0, sigma = I/d, Y_I = I / (d * C(d-1, k-2))
    let cover = subsets
        .iter()
        .filter(|sub| sub.contains(&0))
        .count()
        .max(1);
    let y0 = 1.0 / (d as f64 * cover as f64);
    let mut z0 = ComplexMatrix::zeros(nz, nz);
    for i in 0..rr {
        for j in 0..rr {
            z0.set(i, j, rho_r.get(i, j));
        }
    }
    for j in 0..d {
        z0.set(rr + j, rr + j, Complex64::new(1.0 / d as f64, 0.0));
    }
    let mut initial = vec![realify(&z0)?];
    for _ in &subsets {
        initial.push(SymMatrix::scaled_identity(2 * s, y0));
    }

    let mut objective = vec![realify(&c_z)?.scale(0.5)];
    for _ in &subsets {
        objective.push(SymMatrix::zeros(2 * s));
    }

    Ok(SdpProblem {
        blocks,
        objective,
        equality_constraints: constraints,
        initial_point: initial,
        trace_cap: 2.0 * (rho_r.trace().re + 1.0 + 1.0) + 1.0,
    })
}
