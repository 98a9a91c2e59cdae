//! `cohent measure`: evaluate a resource quantifier on a state file and emit
//! the machine-readable report.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgAction, Args, ValueEnum};
use serde::Serialize;

use cohent_core::hilbert::{parse_state, serialize_state, StateFile};
use cohent_core::measures::{
    coherence_number_lower_bound, coherence_rank, entanglement_depth_pure, fidelity,
    geometric_coherence_mixed, geometric_coherence_pure, geometric_entanglement_protocol_pure,
    pullback_activated, pullback_decoupled, MeasureResult, SdpSolver,
};

use crate::CliError;

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum MeasureKind {
    #[value(name = "coherence_rank")]
    CoherenceRank,
    #[value(name = "coherence_number_bound")]
    CoherenceNumberBound,
    #[value(name = "depth")]
    Depth,
    #[value(name = "geometric_coherence")]
    GeometricCoherence,
    #[value(name = "geometric_entanglement")]
    GeometricEntanglement,
    #[value(name = "fidelity_to")]
    FidelityTo,
}

#[derive(Args)]
pub struct MeasureArgs {
    /// Input state JSON file; `fidelity_to` takes the flag twice.
    #[arg(long, action = ArgAction::Append, required = true)]
    pub input: Vec<PathBuf>,
    #[arg(long, value_enum)]
    pub measure: MeasureKind,
    /// Coherence level k (2 <= k <= d) for the geometric measures.
    #[arg(long)]
    pub k: Option<usize>,
    /// Amplitude / detection tolerance where applicable.
    #[arg(long)]
    pub tol: Option<f64>,
    /// Optional report destination (stdout otherwise).
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Serialize)]
struct MeasureReport {
    measure: String,
    k: Option<usize>,
    value: serde_json::Value,
    method: String,
    closest_state: Option<serde_json::Value>,
    solver_gap: Option<f64>,
    witness_partition: Option<Vec<Vec<usize>>>,
}

fn need_k(args: &MeasureArgs) -> Result<usize, CliError> {
    args.k
        .ok_or_else(|| CliError::Usage("this measure requires --k".into()))
}

fn closest_json(result: &MeasureResult) -> Option<serde_json::Value> {
    result
        .closest_state
        .as_ref()
        .map(|s| serde_json::from_str(&serialize_state(s)).expect("state JSON is valid"))
}

fn from_measure(name: &str, k: Option<usize>, r: &MeasureResult) -> MeasureReport {
    MeasureReport {
        measure: name.to_string(),
        k,
        value: serde_json::json!(r.value),
        method: r.method.as_str().to_string(),
        closest_state: closest_json(r),
        solver_gap: r.solver_gap,
        witness_partition: None,
    }
}

pub fn run(args: &MeasureArgs) -> Result<ExitCode, CliError> {
    let states: Vec<StateFile> = args
        .input
        .iter()
        .map(|p| -> Result<StateFile, CliError> {
            Ok(parse_state(&std::fs::read_to_string(p)?)?)
        })
        .collect::<Result<_, _>>()?;
    if matches!(args.measure, MeasureKind::FidelityTo) {
        if states.len() != 2 {
            return Err(CliError::Usage(
                "fidelity_to needs exactly two --input files".into(),
            ));
        }
    } else if states.len() != 1 {
        return Err(CliError::Usage(
            "this measure takes exactly one --input file".into(),
        ));
    }
    let state = &states[0];
    let solver = SdpSolver {
        tol: 1e-7,
        max_iter: cohent_core::sdp::SDP_DEFAULT_MAX_ITER,
    };

    let report = match args.measure {
        MeasureKind::CoherenceRank => match state {
            StateFile::Pure(psi) => {
                let rank = coherence_rank(psi, args.tol.unwrap_or(1e-9))?;
                MeasureReport {
                    measure: "coherence_rank".into(),
                    k: None,
                    value: serde_json::json!(rank),
                    method: "closed_form".into(),
                    closest_state: None,
                    solver_gap: None,
                    witness_partition: None,
                }
            }
            StateFile::Mixed(_) => {
                return Err(CliError::Usage(
                    "coherence_rank is defined for pure states; use coherence_number_bound".into(),
                ))
            }
        },
        MeasureKind::CoherenceNumberBound => {
            let rho = state.density();
            let bound = coherence_number_lower_bound(&rho, &solver, args.tol.unwrap_or(1e-7))?;
            MeasureReport {
                measure: "coherence_number_bound".into(),
                k: None,
                value: serde_json::json!(bound),
                method: "sdp".into(),
                closest_state: None,
                solver_gap: None,
                witness_partition: None,
            }
        }
        MeasureKind::Depth => match state {
            StateFile::Pure(psi) => {
                let report = entanglement_depth_pure(psi, args.tol.unwrap_or(1e-9))?;
                MeasureReport {
                    measure: "depth".into(),
                    k: None,
                    value: serde_json::json!(report.depth),
                    method: "brute_force".into(),
                    closest_state: None,
                    solver_gap: None,
                    witness_partition: Some(report.witness_partition.blocks().to_vec()),
                }
            }
            StateFile::Mixed(_) => {
                return Err(CliError::Usage(
                    "depth is computed for pure states only; mixed-state depth is not claimed"
                        .into(),
                ))
            }
        },
        MeasureKind::GeometricCoherence => {
            let k = need_k(args)?;
            match state {
                StateFile::Pure(psi) => {
                    let r = geometric_coherence_pure(psi, k)?;
                    from_measure("geometric_coherence", Some(k), &r)
                }
                StateFile::Mixed(rho) => {
                    let r = geometric_coherence_mixed(rho, k, &solver)?;
                    from_measure("geometric_coherence", Some(k), &r)
                }
            }
        }
        MeasureKind::GeometricEntanglement => {
            let k = need_k(args)?;
            match state {
                StateFile::Pure(psi) => {
                    let r = geometric_entanglement_protocol_pure(psi, k)?;
                    from_measure("geometric_entanglement", Some(k), &r)
                }
                StateFile::Mixed(rho) => {
                    // protocol-form mixed states: evaluate through the image
                    // pullback. A (2,2,2) shape fits both the activated
                    // d=2 layout and a 3-qubit register; prefer the
                    // activated reading and fall back to the register one.
                    let dims = rho.shape().dims();
                    let activated_layout = dims.len() >= 2
                        && dims.len() == dims[0] + 1
                        && dims[1..].iter().all(|&q| q == 2);
                    let qubit_register = dims.iter().all(|&q| q == 2);
                    let pulled = if activated_layout {
                        match pullback_activated(rho) {
                            Ok(p) => p,
                            Err(cohent_core::CoreError::NotProtocolForm { .. })
                                if qubit_register =>
                            {
                                pullback_decoupled(rho)?
                            }
                            Err(e) => return Err(e.into()),
                        }
                    } else if qubit_register {
                        pullback_decoupled(rho)?
                    } else {
                        return Err(CliError::Usage(format!(
                            "geometric_entanglement expects a protocol-form state, got dims {:?}",
                            dims
                        )));
                    };
                    let r = geometric_coherence_mixed(&pulled, k, &solver)?;
                    from_measure("geometric_entanglement", Some(k), &r)
                }
            }
        }
        MeasureKind::FidelityTo => {
            let rho = states[0].density();
            let sigma = states[1].density();
            let f = fidelity(&rho, &sigma)?;
            MeasureReport {
                measure: "fidelity_to".into(),
                k: None,
                value: serde_json::json!(f),
                method: "closed_form".into(),
                closest_state: None,
                solver_gap: None,
                witness_partition: None,
            }
        }
    };

    let text = serde_json::to_string(&report).expect("report serialization");
    if let Some(path) = &args.output {
        std::fs::write(path, text.clone() + "\n")?;
    }
    println!("{}", text);
    Ok(ExitCode::SUCCESS)
}
