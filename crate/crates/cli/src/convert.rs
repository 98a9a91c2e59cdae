//! `cohent convert`: apply the activation step, the full unitary protocol,
//! or the LOCC decoupling channel to a state file.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, ValueEnum};
use serde::Serialize;

use cohent_core::hilbert::{parse_state, serialize_state, PureState, StateFile};
use cohent_core::measures::{coherence_rank, entanglement_depth_pure};
use cohent_core::protocol::{
    activate_density, activate_pure, full_decoupling_unitary, killoran_isometry, locc_decouple,
    protocol_shape, IsometryVariant,
};
use cohent_core::{CoreError, DensityMatrix};

use crate::CliError;

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Mode {
    /// U_A only: qudit plus d entangled ancilla qubits.
    #[value(name = "activate")]
    Activate,
    /// U_B U_A: the qudit decouples as the maximally coherent state.
    #[value(name = "full_unitary")]
    FullUnitary,
    /// Activation followed by the one-way LOCC channel: d qubits remain.
    #[value(name = "locc")]
    Locc,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Variant {
    #[value(name = "w")]
    W,
    #[value(name = "ghz")]
    Ghz,
}

#[derive(Args)]
pub struct ConvertArgs {
    /// Input state JSON file.
    #[arg(long)]
    pub input: PathBuf,
    /// Output state JSON file.
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long, value_enum, default_value_t = Mode::Activate, ignore_case = true)]
    pub mode: Mode,
    /// W: qubit ancillas via CNOT protocol; GHZ: (d+1)-level ancillas via
    /// the Gram isometry (mode `activate` only).
    #[arg(long, value_enum, default_value_t = Variant::W, ignore_case = true)]
    pub variant: Variant,
}

#[derive(Serialize)]
struct ConvertReport {
    command: &'static str,
    mode: String,
    variant: String,
    input_dims: Vec<usize>,
    output_dims: Vec<usize>,
    input_coherence_rank: Option<usize>,
    output_depth: Option<usize>,
    output_file: String,
}

fn mode_name(mode: Mode) -> &'static str {
    match mode {
        Mode::Activate => "activate",
        Mode::FullUnitary => "full_unitary",
        Mode::Locc => "locc",
    }
}

fn qudit_dim(state: &StateFile) -> Result<usize, CliError> {
    let dims = state.shape().dims();
    if dims.len() != 1 {
        return Err(CliError::Usage(format!(
            "convert expects a single-qudit input, got factor dims {:?}",
            dims
        )));
    }
    Ok(dims[0])
}

fn convert_w(state: &StateFile, mode: Mode) -> Result<StateFile, CliError> {
    let d = qudit_dim(state)?;
    Ok(match (state, mode) {
        (StateFile::Pure(psi), Mode::Activate) => StateFile::Pure(activate_pure(psi)?),
        (StateFile::Pure(psi), Mode::FullUnitary) => {
            let prime = activate_pure(psi)?;
            let ub = full_decoupling_unitary(d)?;
            StateFile::Pure(prime.apply(&ub, protocol_shape(d)?)?)
        }
        (StateFile::Mixed(rho), Mode::Activate) => StateFile::Mixed(activate_density(rho)?),
        (StateFile::Mixed(rho), Mode::FullUnitary) => {
            let prime = activate_density(rho)?;
            let ub = full_decoupling_unitary(d)?;
            StateFile::Mixed(prime.conjugate(&ub, protocol_shape(d)?)?)
        }
        (_, Mode::Locc) => {
            let prime = match state {
                StateFile::Pure(psi) => activate_density(&psi.density())?,
                StateFile::Mixed(rho) => activate_density(rho)?,
            };
            StateFile::Mixed(locc_decouple(&prime)?)
        }
    })
}

fn convert_ghz(state: &StateFile, mode: Mode) -> Result<StateFile, CliError> {
    if !matches!(mode, Mode::Activate) {
        return Err(CliError::Usage(
            "the GHZ variant supports only --mode activate".into(),
        ));
    }
    let d = qudit_dim(state)?;
    let frame = cohent_core::ClassicalFrame::computational(d)?;
    let bundle = killoran_isometry(&frame, IsometryVariant::Ghz)?;
    match state {
        StateFile::Pure(psi) => {
            let amps = bundle.v.mul_vec(psi.amplitudes())?;
            Ok(StateFile::Pure(PureState::new(
                bundle.out_shape.clone(),
                amps,
            )?))
        }
        StateFile::Mixed(rho) => {
            let out_dim = bundle.out_shape.total_dim();
            if out_dim > 1024 {
                return Err(CliError::Core(CoreError::DimensionLimit {
                    requested: out_dim,
                    max: 1024,
                }));
            }
            let m = bundle.v.mul(rho.matrix())?.mul(&bundle.v.dagger())?;
            Ok(StateFile::Mixed(DensityMatrix::new(
                bundle.out_shape.clone(),
                m.symmetrize()?,
            )?))
        }
    }
}

pub fn run(args: &ConvertArgs) -> Result<ExitCode, CliError> {
    let text = std::fs::read_to_string(&args.input)?;
    let state = parse_state(&text)?;
    let input_rank = match &state {
        StateFile::Pure(psi) if psi.shape().factor_count() == 1 => {
            Some(coherence_rank(psi, 1e-9)?)
        }
        _ => None,
    };

    let out = match args.variant {
        Variant::W => convert_w(&state, args.mode)?,
        Variant::Ghz => convert_ghz(&state, args.mode)?,
    };

    let output_depth = match &out {
        StateFile::Pure(psi) if psi.shape().factor_count() <= 8 => {
            Some(entanglement_depth_pure(psi, 1e-9)?.depth)
        }
        _ => None,
    };

    std::fs::write(&args.output, serialize_state(&out) + "\n")?;
    let report = ConvertReport {
        command: "convert",
        mode: mode_name(args.mode).to_string(),
        variant: match args.variant {
            Variant::W => "w".into(),
            Variant::Ghz => "ghz".into(),
        },
        input_dims: state.shape().dims().to_vec(),
        output_dims: out.shape().dims().to_vec(),
        input_coherence_rank: input_rank,
        output_depth,
        output_file: args.output.display().to_string(),
    };
    println!(
        "{}",
        serde_json::to_string(&report).expect("report serialization")
    );
    Ok(ExitCode::SUCCESS)
}
