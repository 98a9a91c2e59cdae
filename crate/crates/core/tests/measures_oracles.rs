//! Cross-route checks of the quantifiers: closed forms against each other,
//! closed forms against the SDP, and the conversion identities.

mod common;

use common::{random_mixed, random_pure, rng_for};

use cohent_core::measures::{
    fidelity, geometric_coherence_mixed, geometric_coherence_pure,
    geometric_entanglement_protocol_pure, verify_conversion_bounds, SdpSolver,
};
use cohent_core::protocol::activate_pure;
use cohent_core::sdp;

#[test]
fn geometric_equality_closed_forms_sweep() {
    // C_G^(k)(psi) = E_G^(k+1)(psi') through the two independent formulas.
    let mut max_diff = 0.0f64;
    for d in 2..=6usize {
        for trial in 0..20u64 {
            let mut rng = rng_for(2000 + d as u64, trial);
            let psi = random_pure(d, &mut rng);
            let psi_prime = activate_pure(&psi).unwrap();
            for k in 2..=d {
                let cg = geometric_coherence_pure(&psi, k).unwrap().value;
                let eg = geometric_entanglement_protocol_pure(&psi_prime, k)
                    .unwrap()
                    .value;
                max_diff = max_diff.max((cg - eg).abs());
            }
        }
    }
    assert!(max_diff <= 1e-10, "max |C_G - E_G| = {:.3e}", max_diff);
}

#[test]
fn fidelity_sdp_agrees_with_closed_form() {
    let solver = SdpSolver::default();
    for trial in 0..6u64 {
        let dim = 2 + (trial as usize % 3) * 3; // 2, 5, 8
        let mut rng = rng_for(2100, trial);
        let rho = random_mixed(dim, dim, &mut rng);
        let sigma = random_mixed(dim, dim.max(2) - 1, &mut rng);
        let exact = fidelity(&rho, &sigma).unwrap();
        let problem = sdp::build_fidelity_sdp(&rho, &sigma).unwrap();
        let sol = solver.solve_certified(&problem).unwrap();
        assert!(
            (sol.primal_value - exact.sqrt()).abs() <= 1e-6,
            "dim={} sdp={} closed={}",
            dim,
            sol.primal_value,
            exact.sqrt()
        );
    }
}

#[test]
fn kcoherent_sdp_agrees_with_appendix_formula_on_pure_states() {
    let solver = SdpSolver::default();
    for d in 2..=5usize {
        let mut rng = rng_for(2200 + d as u64, 0);
        let psi = random_pure(d, &mut rng);
        for k in 2..=d {
            let exact = geometric_coherence_pure(&psi, k).unwrap().value;
            let r = geometric_coherence_mixed(&psi.density(), k, &solver).unwrap();
            assert!(
                (r.value - exact).abs() <= 1e-5,
                "d={} k={} sdp={} closed={}",
                d,
                k,
                r.value,
                exact
            );
            assert!(r.solver_gap.unwrap() <= 1e-7);
        }
    }
}

#[test]
fn kcoherent_optimum_nondecreasing_in_k() {
    // nested feasible sets: the coherence value decreases with k
    let solver = SdpSolver::default();
    let mut rng = rng_for(2300, 0);
    let rho = random_mixed(4, 2, &mut rng);
    let mut last = f64::INFINITY;
    for k in 2..=4usize {
        let v = geometric_coherence_mixed(&rho, k, &solver).unwrap().value;
        assert!(v <= last + 1e-6, "k={} value={} last={}", k, v, last);
        last = v;
    }
}

#[test]
fn conversion_bounds_hold_on_random_low_rank_states() {
    let solver = SdpSolver::default();
    for trial in 0..4u64 {
        let mut rng = rng_for(2400, trial);
        let rho = random_mixed(3, 2, &mut rng);
        for k in 2..=3usize {
            let report = verify_conversion_bounds(&rho, k, &solver).unwrap();
            assert!(
                report.holds,
                "trial={} k={} C={} E'={} E''={}",
                trial,
                k,
                report.coherence_value,
                report.entanglement_activated,
                report.entanglement_decoupled
            );
        }
    }
}

#[test]
fn closest_mixed_state_is_feasible_and_close() {
    // the sigma returned by the SDP is (k-1)-coherent and reproduces the
    // optimal fidelity within solver tolerance
    let solver = SdpSolver::default();
    let mut rng = rng_for(2500, 0);
    let rho = random_mixed(3, 2, &mut rng);
    let r = geometric_coherence_mixed(&rho, 2, &solver).unwrap();
    let closest = match r.closest_state {
        Some(cohent_core::StateFile::Mixed(m)) => m,
        _ => panic!("expected a mixed closest state"),
    };
    // k=2: incoherent means (numerically) diagonal
    let mut off = 0.0f64;
    for i in 0..3 {
        for j in 0..3 {
            if i != j {
                off = off.max(closest.matrix().get(i, j).norm());
            }
        }
    }
    assert!(off <= 1e-5, "off-diagonal leak {:.3e}", off);
    let f = fidelity(&rho, &closest).unwrap();
    assert!((1.0 - f) >= r.value - 1e-5);
}
