//! State model for composite qudit (x) qubit^d spaces.
//!
//! Conventions: the paper-facing level index i runs 1..=d and maps to the
//! stored 0-based index i-1 at every API boundary. In ancilla registers,
//! qubit 1 is the most significant bit, so the basis string for level i is
//! the binary expansion of 2^(d-i), zero-padded from the left.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::linalg::{self, ComplexMatrix};
use crate::max_dim;

/// Norm / trace tolerance for state validation.
pub const STATE_TOL: f64 = 1e-10;
/// Relative rank tolerance for frame linear-independence checks.
pub const FRAME_RANK_TOL: f64 = 1e-8;
/// Full PSD validation is skipped above this dimension (the Hermitian,
/// trace, and diagonal checks still run).
const PSD_CHECK_LIMIT: usize = 256;

/// Factor dimensions of a composite Hilbert space.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpaceShape {
    dims: Vec<usize>,
}

impl SpaceShape {
    pub fn new(dims: Vec<usize>) -> Result<Self> {
        if dims.is_empty() || dims.iter().any(|&d| d < 2) {
            return Err(CoreError::ShapeMismatch(
                "every factor dimension must be >= 2".into(),
            ));
        }
        let total: usize = dims.iter().product();
        let cap = max_dim();
        if total > cap {
            return Err(CoreError::DimensionLimit {
                requested: total,
                max: cap,
            });
        }
        Ok(Self { dims })
    }

    /// Single-factor space of dimension d.
    pub fn qudit(d: usize) -> Result<Self> {
        Self::new(vec![d])
    }

    /// Qudit of dimension d followed by n ancillas of dimension anc_dim.
    pub fn qudit_with_ancillas(d: usize, n: usize, anc_dim: usize) -> Result<Self> {
        let mut dims = vec![d];
        dims.extend(std::iter::repeat_n(anc_dim, n));
        Self::new(dims)
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn factor_count(&self) -> usize {
        self.dims.len()
    }

    pub fn total_dim(&self) -> usize {
        self.dims.iter().product()
    }
}

/// Composite basis index of the d-qubit string |2^(d-i)> for level i in 1..=d.
pub fn binary_string_index(d: usize, i: usize) -> Result<usize> {
    if d == 0 || d > 62 {
        return Err(CoreError::OutOfRange(format!("qudit dimension {} unsupported", d)));
    }
    if i < 1 || i > d {
        return Err(CoreError::OutOfRange(format!(
            "level {} outside 1..={}",
            i, d
        )));
    }
    Ok(1usize << (d - i))
}

/// Normalized pure state on a composite space.
#[derive(Debug, Clone, PartialEq)]
pub struct PureState {
    shape: SpaceShape,
    amplitudes: Vec<Complex64>,
}

impl PureState {
    pub fn new(shape: SpaceShape, amplitudes: Vec<Complex64>) -> Result<Self> {
        if amplitudes.len() != shape.total_dim() {
            return Err(CoreError::ShapeMismatch(format!(
                "shape dimension {} but {} amplitudes",
                shape.total_dim(),
                amplitudes.len()
            )));
        }
        if amplitudes
            .iter()
            .any(|z| !z.re.is_finite() || !z.im.is_finite())
        {
            return Err(CoreError::ShapeMismatch("amplitudes must be finite".into()));
        }
        let norm = linalg::vec_norm(&amplitudes);
        if (norm - 1.0).abs() > STATE_TOL {
            return Err(CoreError::NormViolation { measured: norm });
        }
        Ok(Self { shape, amplitudes })
    }

    /// Normalize then construct; rejects the zero vector.
    pub fn normalized(shape: SpaceShape, mut amplitudes: Vec<Complex64>) -> Result<Self> {
        let norm = linalg::vec_norm(&amplitudes);
        if norm < 1e-12 {
            return Err(CoreError::NormViolation { measured: norm });
        }
        for a in amplitudes.iter_mut() {
            *a /= norm;
        }
        Self::new(shape, amplitudes)
    }

    /// Basis state |index> on the given shape.
    pub fn basis(shape: SpaceShape, index: usize) -> Result<Self> {
        let n = shape.total_dim();
        if index >= n {
            return Err(CoreError::OutOfRange(format!(
                "basis index {} in dimension {}",
                index, n
            )));
        }
        let mut amps = vec![Complex64::new(0.0, 0.0); n];
        amps[index] = Complex64::new(1.0, 0.0);
        Self::new(shape, amps)
    }

    /// Single-qudit state for paper level i (1-based): |i> = basis i-1.
    pub fn qudit_level(d: usize, i: usize) -> Result<Self> {
        if i < 1 || i > d {
            return Err(CoreError::OutOfRange(format!("level {} outside 1..={}", i, d)));
        }
        Self::basis(SpaceShape::qudit(d)?, i - 1)
    }

    pub fn shape(&self) -> &SpaceShape {
        &self.shape
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    /// |psi><psi| as a density matrix.
    pub fn density(&self) -> DensityMatrix {
        let n = self.dim();
        let m = ComplexMatrix::from_fn(n, n, |i, j| {
            self.amplitudes[i] * self.amplitudes[j].conj()
        });
        DensityMatrix {
            shape: self.shape.clone(),
            matrix: m,
        }
    }

    /// Apply a unitary (or isometry) given as a matrix acting on the full
    /// composite space; the caller supplies the output shape.
    pub fn apply(&self, op: &ComplexMatrix, out_shape: SpaceShape) -> Result<PureState> {
        if op.cols() != self.dim() || op.rows() != out_shape.total_dim() {
            return Err(CoreError::ShapeMismatch(format!(
                "operator is {}x{}, state dim {} -> {}",
                op.rows(),
                op.cols(),
                self.dim(),
                out_shape.total_dim()
            )));
        }
        let amps = op.mul_vec(&self.amplitudes)?;
        PureState::new(out_shape, amps)
    }
}

/// Hermitian, PSD, unit-trace operator on a composite space.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    shape: SpaceShape,
    matrix: ComplexMatrix,
}

impl DensityMatrix {
    pub fn new(shape: SpaceShape, matrix: ComplexMatrix) -> Result<Self> {
        let n = shape.total_dim();
        if !matrix.is_square() || matrix.rows() != n {
            return Err(CoreError::ShapeMismatch(format!(
                "density matrix is {}x{}, shape dimension {}",
                matrix.rows(),
                matrix.cols(),
                n
            )));
        }
        let scale = matrix.frobenius_norm().max(1.0);
        let dev = matrix.hermitian_deviation();
        if dev > STATE_TOL * scale {
            return Err(CoreError::NotHermitian {
                deviation: dev,
                tolerance: STATE_TOL * scale,
            });
        }
        let tr = matrix.trace();
        if (tr.re - 1.0).abs() > STATE_TOL || tr.im.abs() > STATE_TOL {
            return Err(CoreError::TraceViolation { measured: tr.re });
        }
        if n <= PSD_CHECK_LIMIT {
            let spec = linalg::hermitian_eig(&matrix)?;
            if spec.lambda_min() < -STATE_TOL {
                return Err(CoreError::NotPositive {
                    eigenvalue: spec.lambda_min(),
                });
            }
        } else {
            for i in 0..n {
                if matrix.get(i, i).re < -STATE_TOL {
                    return Err(CoreError::NotPositive {
                        eigenvalue: matrix.get(i, i).re,
                    });
                }
            }
        }
        Ok(Self { shape, matrix })
    }

    pub fn shape(&self) -> &SpaceShape {
        &self.shape
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    /// Tr(rho^2).
    pub fn purity(&self) -> f64 {
        let mut acc = 0.0;
        for i in 0..self.dim() {
            for j in 0..self.dim() {
                acc += (self.matrix.get(i, j) * self.matrix.get(j, i)).re;
            }
        }
        acc
    }

    /// Reduced state on the kept factors.
    pub fn reduce(&self, keep: &[usize]) -> Result<DensityMatrix> {
        let red = linalg::partial_trace(&self.matrix, self.shape.dims(), keep)?;
        let dims: Vec<usize> = keep.iter().map(|&f| self.shape.dims()[f]).collect();
        DensityMatrix::new(SpaceShape::new(dims)?, red)
    }

    /// Conjugate by a same-dimension unitary: U rho U^dag.
    pub fn conjugate(&self, u: &ComplexMatrix, out_shape: SpaceShape) -> Result<DensityMatrix> {
        let m = u.mul(&self.matrix)?.mul(&u.dagger())?;
        DensityMatrix::new(out_shape, m)
    }
}

/// d linearly independent (not necessarily orthogonal) unit vectors that
/// define the classical states of a d-level system.
#[derive(Debug, Clone)]
pub struct ClassicalFrame {
    dim: usize,
    vectors: Vec<Vec<Complex64>>,
}

impl ClassicalFrame {
    pub fn new(vectors: Vec<Vec<Complex64>>) -> Result<Self> {
        let dim = vectors.len();
        if dim < 2 {
            return Err(CoreError::ShapeMismatch(
                "a frame needs at least two vectors".into(),
            ));
        }
        if vectors.iter().any(|v| v.len() != dim) {
            return Err(CoreError::ShapeMismatch(
                "frame vectors must live in dimension d = number of vectors".into(),
            ));
        }
        for v in &vectors {
            let norm = linalg::vec_norm(v);
            if (norm - 1.0).abs() > STATE_TOL {
                return Err(CoreError::NormViolation { measured: norm });
            }
        }
        let m = ComplexMatrix::from_columns(&vectors)?;
        let rank = linalg::rank_with_tol(&m, FRAME_RANK_TOL)?;
        if rank < dim {
            return Err(CoreError::RankDeficient {
                rank,
                expected: dim,
            });
        }
        Ok(Self { dim, vectors })
    }

    /// The computational (orthonormal) frame in dimension d.
    pub fn computational(d: usize) -> Result<Self> {
        let vectors = (0..d)
            .map(|i| {
                let mut v = vec![Complex64::new(0.0, 0.0); d];
                v[i] = Complex64::new(1.0, 0.0);
                v
            })
            .collect();
        Self::new(vectors)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn vectors(&self) -> &[Vec<Complex64>] {
        &self.vectors
    }

    /// Matrix whose columns are the frame vectors.
    pub fn as_matrix(&self) -> ComplexMatrix {
        ComplexMatrix::from_columns(&self.vectors).expect("frame validated at construction")
    }
}

/// Gram matrix with entries G(i, j) = <chi_i | chi_j> of a classical frame.
pub fn gram_matrix(frame: &ClassicalFrame) -> ComplexMatrix {
    let d = frame.dim();
    ComplexMatrix::from_fn(d, d, |i, j| {
        linalg::inner(&frame.vectors()[i], &frame.vectors()[j])
    })
}

/// Partition of {0..n-1} into disjoint nonempty blocks, stored canonically:
/// each block sorted ascending, blocks ordered by their smallest element.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SetPartition {
    blocks: Vec<Vec<usize>>,
}

impl SetPartition {
    pub fn new(mut blocks: Vec<Vec<usize>>) -> Result<Self> {
        let mut seen = std::collections::BTreeSet::new();
        let mut count = 0usize;
        for b in blocks.iter_mut() {
            if b.is_empty() {
                return Err(CoreError::ShapeMismatch("empty partition block".into()));
            }
            b.sort_unstable();
            for &x in b.iter() {
                if !seen.insert(x) {
                    return Err(CoreError::ShapeMismatch(format!(
                        "element {} appears in two blocks",
                        x
                    )));
                }
                count += 1;
            }
        }
        let n = count;
        if seen.iter().next_back().map(|&m| m + 1) != Some(n) || seen.len() != n {
            return Err(CoreError::ShapeMismatch(
                "blocks must cover {0..n-1} exactly".into(),
            ));
        }
        blocks.sort_by_key(|b| b[0]);
        Ok(Self { blocks })
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    pub fn element_count(&self) -> usize {
        self.blocks.iter().map(|b| b.len()).sum()
    }

    pub fn max_block_size(&self) -> usize {
        self.blocks.iter().map(|b| b.len()).max().unwrap_or(0)
    }
}

/// All set partitions of {0..n-1} with every block of size <= max_block, in
/// deterministic (restricted-growth) order. Guarded at n <= 8.
pub fn enumerate_partitions(n: usize, max_block: usize) -> Result<Vec<SetPartition>> {
    if n == 0 || n > 8 {
        return Err(CoreError::OutOfRange(format!(
            "partition enumeration supports 1..=8 elements, got {}",
            n
        )));
    }
    if max_block == 0 {
        return Err(CoreError::OutOfRange("max_block must be >= 1".into()));
    }
    let mut out = Vec::new();
    let mut blocks: Vec<Vec<usize>> = Vec::new();
    fn recurse(
        element: usize,
        n: usize,
        max_block: usize,
        blocks: &mut Vec<Vec<usize>>,
        out: &mut Vec<SetPartition>,
    ) {
        if element == n {
            out.push(SetPartition {
                blocks: blocks.clone(),
            });
            return;
        }
        for b in 0..blocks.len() {
            if blocks[b].len() < max_block {
                blocks[b].push(element);
                recurse(element + 1, n, max_block, blocks, out);
                blocks[b].pop();
            }
        }
        blocks.push(vec![element]);
        recurse(element + 1, n, max_block, blocks, out);
        blocks.pop();
    }
    recurse(0, n, max_block, &mut blocks, &mut out);
    Ok(out)
}

/// A state file: either a pure state or a density matrix.
#[derive(Debug, Clone)]
pub enum StateFile {
    Pure(PureState),
    Mixed(DensityMatrix),
}

impl StateFile {
    pub fn shape(&self) -> &SpaceShape {
        match self {
            StateFile::Pure(p) => p.shape(),
            StateFile::Mixed(m) => m.shape(),
        }
    }

    /// View as a density matrix regardless of underlying representation.
    pub fn density(&self) -> DensityMatrix {
        match self {
            StateFile::Pure(p) => p.density(),
            StateFile::Mixed(m) => m.clone(),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct PureJson {
    dims: Vec<usize>,
    amplitudes: Vec<[f64; 2]>,
}

#[derive(Serialize, Deserialize)]
struct MixedJson {
    dims: Vec<usize>,
    matrix: Vec<Vec<[f64; 2]>>,
}

/// Parse a state from its JSON form.
///
/// Pure: `{"dims":[d1,...],"amplitudes":[[re,im],...]}` in row-major
/// composite index order. Mixed: `{"dims":[...],"matrix":[[[re,im],...],...]}`.
pub fn parse_state(text: &str) -> Result<StateFile> {
    let value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| CoreError::InvalidJson(e.to_string()))?;
    if value.get("amplitudes").is_some() {
        let pj: PureJson =
            serde_json::from_value(value).map_err(|e| CoreError::InvalidJson(e.to_string()))?;
        let shape = SpaceShape::new(pj.dims)?;
        let amps = pj
            .amplitudes
            .iter()
            .map(|&[re, im]| Complex64::new(re, im))
            .collect();
        Ok(StateFile::Pure(PureState::new(shape, amps)?))
    } else if value.get("matrix").is_some() {
        let mj: MixedJson =
            serde_json::from_value(value).map_err(|e| CoreError::InvalidJson(e.to_string()))?;
        let shape = SpaceShape::new(mj.dims)?;
        let n = shape.total_dim();
        if mj.matrix.len() != n || mj.matrix.iter().any(|row| row.len() != n) {
            return Err(CoreError::InvalidJson(format!(
                "matrix must be {n}x{n} for dims product {n}"
            )));
        }
        let mut data = Vec::with_capacity(n * n);
        for row in &mj.matrix {
            for &[re, im] in row {
                data.push(Complex64::new(re, im));
            }
        }
        let m = ComplexMatrix::new(n, n, data)?;
        Ok(StateFile::Mixed(DensityMatrix::new(shape, m)?))
    } else {
        Err(CoreError::InvalidJson(
            "expected an \"amplitudes\" or \"matrix\" field".into(),
        ))
    }
}

/// Serialize a state to its canonical JSON form.
pub fn serialize_state(state: &StateFile) -> String {
    match state {
        StateFile::Pure(p) => {
            let pj = PureJson {
                dims: p.shape().dims().to_vec(),
                amplitudes: p.amplitudes().iter().map(|z| [z.re, z.im]).collect(),
            };
            serde_json::to_string(&pj).expect("serialization cannot fail")
        }
        StateFile::Mixed(m) => {
            let n = m.dim();
            let mj = MixedJson {
                dims: m.shape().dims().to_vec(),
                matrix: (0..n)
                    .map(|i| {
                        (0..n)
                            .map(|j| {
                                let z = m.matrix().get(i, j);
                                [z.re, z.im]
                            })
                            .collect()
                    })
                    .collect(),
            };
            serde_json::to_string(&mj).expect("serialization cannot fail")
        }
    }
}

/// Attach n ancillas of dimension anc_dim in the reference basis state
/// |ref_index> each: psi (x) |ref>^(x n).
pub fn attach_ancillas(
    psi: &PureState,
    n: usize,
    anc_dim: usize,
    ref_index: usize,
) -> Result<PureState> {
    if anc_dim < 2 || ref_index >= anc_dim {
        return Err(CoreError::OutOfRange(format!(
            "reference index {} in ancilla dimension {}",
            ref_index, anc_dim
        )));
    }
    if n == 0 {
        return Ok(psi.clone());
    }
    let mut dims = psi.shape().dims().to_vec();
    dims.extend(std::iter::repeat_n(anc_dim, n));
    let shape = SpaceShape::new(dims)?;
    let anc_total: usize = anc_dim.pow(n as u32);
    let mut ref_composite = 0usize;
    for _ in 0..n {
        ref_composite = ref_composite * anc_dim + ref_index;
    }
    let mut amps = vec![Complex64::new(0.0, 0.0); psi.dim() * anc_total];
    for (i, &a) in psi.amplitudes().iter().enumerate() {
        amps[i * anc_total + ref_composite] = a;
    }
    PureState::new(shape, amps)
}
