//! Shared helpers for the integration suites: seeded random states.
#![allow(dead_code)] // each test target uses a different subset

use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use cohent_core::hilbert::{DensityMatrix, PureState, SpaceShape};
use cohent_core::linalg::ComplexMatrix;

pub fn rng_for(seed: u64, trial: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed.wrapping_add((trial + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)))
}

fn gaussian(rng: &mut ChaCha20Rng) -> f64 {
    // Box-Muller on the open unit interval
    let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

pub fn random_pure(d: usize, rng: &mut ChaCha20Rng) -> PureState {
    let amps: Vec<Complex64> = (0..d)
        .map(|_| Complex64::new(gaussian(rng), gaussian(rng)))
        .collect();
    PureState::normalized(SpaceShape::qudit(d).unwrap(), amps).unwrap()
}

/// Random pure state with exactly `support` nonzero amplitudes, all of
/// magnitude at least 1e-3 after normalization.
pub fn random_sparse_pure(d: usize, support: usize, rng: &mut ChaCha20Rng) -> PureState {
    assert!((1..=d).contains(&support));
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
            let ok = psi
                .amplitudes()
                .iter()
                .filter(|a| a.norm() > 0.0)
                .all(|a| a.norm() >= 1e-3);
            if ok {
                return psi;
            }
        }
    }
}

/// Wishart-style random density matrix of the given rank.
pub fn random_mixed(d: usize, rank: usize, rng: &mut ChaCha20Rng) -> DensityMatrix {
    let g = ComplexMatrix::from_fn(d, rank, |_, _| Complex64::new(gaussian(rng), gaussian(rng)));
    let gg = g.mul(&g.dagger()).unwrap().symmetrize().unwrap();
    let tr = gg.trace().re;
    DensityMatrix::new(
        SpaceShape::qudit(d).unwrap(),
        gg.scale(Complex64::new(1.0 / tr, 0.0)),
    )
    .unwrap()
}
