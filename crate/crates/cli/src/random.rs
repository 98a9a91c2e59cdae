//! Seeded random-state generation for the verification harness.
//!
//! Every trial derives its own ChaCha stream from the run seed and the
//! trial index, so reports are reproducible regardless of evaluation order.

use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use cohent_core::hilbert::{DensityMatrix, PureState, SpaceShape};
use cohent_core::linalg::ComplexMatrix;

/// Independent stream for one trial of a seeded run.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed.wrapping_add((trial + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)))
}

fn gaussian(rng: &mut ChaCha20Rng) -> f64 {
    let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Dense random pure state: complex Gaussian amplitudes, normalized.
pub fn pure_dense(d: usize, rng: &mut ChaCha20Rng) -> PureState {
    let amps: Vec<Complex64> = (0..d)
        .map(|_| Complex64::new(gaussian(rng), gaussian(rng)))
        .collect();
    PureState::normalized(SpaceShape::qudit(d).expect("guarded dimension"), amps)
        .expect("gaussian vector is nonzero")
}

/// Sparse random pure state: a uniformly chosen support size and subset,
/// Gaussian amplitudes on the support. Amplitudes below 1e-3 after
/// normalization are resampled so rank counting is unambiguous.
pub fn pure_sparse(d: usize, rng: &mut ChaCha20Rng) -> PureState {
    let support = rng.gen_range(1..=d);
    loop {
        let mut indices: Vec<usize> = (0..d).collect();
        for i in (1..d).rev() {
            let j = rng.gen_range(0..=i);
            indices.swap(i, j);
        }
        let mut amps = vec![Complex64::new(0.0, 0.0); d];
        for &i in indices.iter().take(support) {
            amps[i] = Complex64::new(gaussian(rng), gaussian(rng));
        }
        if let Ok(psi) = PureState::normalized(SpaceShape::qudit(d).unwrap(), amps) {
            if psi
                .amplitudes()
                .iter()
                .filter(|a| a.norm() > 0.0)
                .all(|a| a.norm() >= 1e-3)
            {
                return psi;
            }
        }
    }
}

/// Wishart-style random density matrix rho = G G^dag / Tr(G G^dag).
pub fn mixed_wishart(d: usize, rank: usize, rng: &mut ChaCha20Rng) -> DensityMatrix {
    let g = ComplexMatrix::from_fn(d, rank.max(1), |_, _| {
        Complex64::new(gaussian(rng), gaussian(rng))
    });
    let gg = g
        .mul(&g.dagger())
        .expect("shape by construction")
        .symmetrize()
        .expect("square");
    let tr = gg.trace().re;
    DensityMatrix::new(
        SpaceShape::qudit(d).expect("guarded dimension"),
        gg.scale(Complex64::new(1.0 / tr, 0.0)),
    )
    .expect("wishart matrix is a valid state")
}
