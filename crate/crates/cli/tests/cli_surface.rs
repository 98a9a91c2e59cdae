//! End-to-end exercises of the command-line surface: state files in and
//! out, report shapes, and the documented exit codes.

mod support;

use std::path::{Path, PathBuf};
use std::process::Command;

use cohent_core::hilbert::{parse_state, StateFile};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_cohent")
}

fn write_file(dir: &Path, name: &str, content: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, content).unwrap();
    path
}

fn uniform3() -> &'static str {
    r#"{"dims":[3],"amplitudes":[[0.5773502691896258,0],[0.5773502691896258,0],[0.5773502691896258,0]]}"#
}

#[test]
fn convert_activate_writes_protocol_state() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_file(dir.path(), "in.json", uniform3());
    let output = dir.path().join("out.json");
    let out = Command::new(bin())
        .args(["convert", "--input"])
        .arg(&input)
        .arg("--output")
        .arg(&output)
        .args(["--mode", "activate"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["output_dims"], serde_json::json!([3, 2, 2, 2]));
    assert_eq!(report["output_depth"], serde_json::json!(4));
    match parse_state(&std::fs::read_to_string(&output).unwrap()).unwrap() {
        StateFile::Pure(psi) => {
            // amplitudes sit on the protocol pattern |i>|2^(d-i)>
            let expected = [
                cohent_core::protocol::protocol_index(3, 0).unwrap(),
                cohent_core::protocol::protocol_index(3, 1).unwrap(),
                cohent_core::protocol::protocol_index(3, 2).unwrap(),
            ];
            for (idx, a) in psi.amplitudes().iter().enumerate() {
                if expected.contains(&idx) {
                    assert!((a.norm() - 1.0 / 3.0f64.sqrt()).abs() < 1e-10);
                } else {
                    assert_eq!(a.norm(), 0.0);
                }
            }
        }
        _ => panic!("expected a pure output state"),
    }
}

#[test]
fn convert_locc_equals_full_unitary_marginal() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_file(dir.path(), "in.json", uniform3());
    let locc_out = dir.path().join("locc.json");
    let full_out = dir.path().join("full.json");
    for (mode, out) in [("locc", &locc_out), ("full_unitary", &full_out)] {
        let st = Command::new(bin())
            .args(["convert", "--input"])
            .arg(&input)
            .arg("--output")
            .arg(out)
            .args(["--mode", mode])
            .output()
            .unwrap();
        assert!(st.status.success(), "mode {} failed", mode);
    }
    let locc = parse_state(&std::fs::read_to_string(&locc_out).unwrap()).unwrap();
    let full = parse_state(&std::fs::read_to_string(&full_out).unwrap()).unwrap();
    let locc_rho = locc.density();
    let marginal = full.density().reduce(&[1, 2, 3]).unwrap();
    assert!(
        locc_rho
            .matrix()
            .frobenius_distance(marginal.matrix())
            <= 1e-10
    );
    // qudit marginal of the full-unitary output is the maximally coherent
    // projector
    let qudit = full.density().reduce(&[0]).unwrap();
    for i in 0..3 {
        for j in 0..3 {
            assert!((qudit.matrix().get(i, j).re - 1.0 / 3.0).abs() < 1e-10);
        }
    }
}

#[test]
fn convert_ghz_variant_activate_only() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_file(dir.path(), "in.json", uniform3());
    let output = dir.path().join("ghz.json");
    let ok = Command::new(bin())
        .args(["convert", "--input"])
        .arg(&input)
        .arg("--output")
        .arg(&output)
        .args(["--mode", "activate", "--variant", "ghz"])
        .output()
        .unwrap();
    assert!(ok.status.success());
    let report: serde_json::Value = serde_json::from_slice(&ok.stdout).unwrap();
    assert_eq!(report["output_dims"], serde_json::json!([3, 4, 4, 4]));

    let bad = Command::new(bin())
        .args(["convert", "--input"])
        .arg(&input)
        .arg("--output")
        .arg(&output)
        .args(["--mode", "locc", "--variant", "ghz"])
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn measure_reports_follow_schema() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_file(dir.path(), "in.json", uniform3());
    let out = Command::new(bin())
        .args(["measure", "--input"])
        .arg(&input)
        .args(["--measure", "geometric_coherence", "--k", "2"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["measure"], "geometric_coherence");
    assert_eq!(report["k"], 2);
    assert!((report["value"].as_f64().unwrap() - 2.0 / 3.0).abs() < 1e-10);
    assert_eq!(report["method"], "closed_form");
    assert!(report["closest_state"].is_object());
}

#[test]
fn measure_depth_and_rank() {
    let dir = tempfile::tempdir().unwrap();
    let product =
        r#"{"dims":[2,2,2],"amplitudes":[[1,0],[0,0],[0,0],[0,0],[0,0],[0,0],[0,0],[0,0]]}"#;
    let input = write_file(dir.path(), "p.json", product);
    let out = Command::new(bin())
        .args(["measure", "--input"])
        .arg(&input)
        .args(["--measure", "depth"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["value"], 1);
    assert_eq!(report["method"], "brute_force");

    let qudit = write_file(dir.path(), "q.json", uniform3());
    let out = Command::new(bin())
        .args(["measure", "--input"])
        .arg(&qudit)
        .args(["--measure", "coherence_rank"])
        .output()
        .unwrap();
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["value"], 3);
}

#[test]
fn measure_coherence_number_bound_on_diagonal_state() {
    let dir = tempfile::tempdir().unwrap();
    let diag = r#"{"dims":[2],"matrix":[[[0.5,0],[0,0]],[[0,0],[0.5,0]]]}"#;
    let input = write_file(dir.path(), "d.json", diag);
    let out = Command::new(bin())
        .args(["measure", "--input"])
        .arg(&input)
        .args(["--measure", "coherence_number_bound"])
        .output()
        .unwrap();
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["value"], 1);
}

#[test]
fn measure_fidelity_takes_two_inputs() {
    let dir = tempfile::tempdir().unwrap();
    let a = write_file(
        dir.path(),
        "a.json",
        r#"{"dims":[2],"amplitudes":[[1,0],[0,0]]}"#,
    );
    let b = write_file(
        dir.path(),
        "b.json",
        r#"{"dims":[2],"matrix":[[[0.5,0],[0,0]],[[0,0],[0.5,0]]]}"#,
    );
    let out = Command::new(bin())
        .args(["measure", "--input"])
        .arg(&a)
        .arg("--input")
        .arg(&b)
        .args(["--measure", "fidelity_to"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!((report["value"].as_f64().unwrap() - 0.5).abs() < 1e-9);
}

#[test]
fn measure_entanglement_of_activated_mixed_state_matches_input_coherence() {
    // mixed rho -> rho' via the CLI, then the SDP-backed entanglement of
    // rho' equals the SDP-backed coherence of rho
    let dir = tempfile::tempdir().unwrap();
    let rho = r#"{"dims":[2],"matrix":[[[0.6,0],[0.2,0.1]],[[0.2,-0.1],[0.4,0]]]}"#;
    let input = write_file(dir.path(), "rho.json", rho);
    let activated = dir.path().join("rho_prime.json");
    let st = Command::new(bin())
        .args(["convert", "--input"])
        .arg(&input)
        .arg("--output")
        .arg(&activated)
        .args(["--mode", "activate"])
        .output()
        .unwrap();
    assert!(st.status.success());

    let coh = Command::new(bin())
        .args(["measure", "--input"])
        .arg(&input)
        .args(["--measure", "geometric_coherence", "--k", "2"])
        .output()
        .unwrap();
    assert!(coh.status.success());
    let coh: serde_json::Value = serde_json::from_slice(&coh.stdout).unwrap();

    let ent = Command::new(bin())
        .args(["measure", "--input"])
        .arg(&activated)
        .args(["--measure", "geometric_entanglement", "--k", "2"])
        .output()
        .unwrap();
    assert!(
        ent.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&ent.stderr)
    );
    let ent: serde_json::Value = serde_json::from_slice(&ent.stdout).unwrap();

    let cv = coh["value"].as_f64().unwrap();
    let ev = ent["value"].as_f64().unwrap();
    assert!((cv - ev).abs() < 1e-5, "coherence {} vs entanglement {}", cv, ev);
    assert_eq!(ent["method"], "sdp");
    assert!(ent["solver_gap"].as_f64().unwrap() <= 1e-7);
}

#[test]
fn exit_code_2_on_bad_input() {
    let dir = tempfile::tempdir().unwrap();
    // malformed JSON
    let bad = write_file(dir.path(), "bad.json", "{nope");
    let out = Command::new(bin())
        .args(["measure", "--input"])
        .arg(&bad)
        .args(["--measure", "coherence_rank"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));

    // norm violation reports the measured value on stderr
    let unnormalized = write_file(
        dir.path(),
        "n.json",
        r#"{"dims":[2],"amplitudes":[[0.9,0],[0,0]]}"#,
    );
    let out = Command::new(bin())
        .args(["measure", "--input"])
        .arg(&unnormalized)
        .args(["--measure", "coherence_rank"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("0.9"));

    // missing --k
    let good = write_file(dir.path(), "g.json", uniform3());
    let out = Command::new(bin())
        .args(["measure", "--input"])
        .arg(&good)
        .args(["--measure", "geometric_coherence"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn verify_exit_code_1_on_forced_assertion_failure() {
    // an impossible tolerance forces t8 comparisons to fail
    let out = Command::new(bin())
        .args([
            "verify", "--theorem", "t8", "--d", "3", "--trials", "2", "--seed", "1",
            "--tol=-1.0",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["pass"], false);
    assert!(report["summary"]["failed"].as_u64().unwrap() > 0);
}

#[test]
fn verify_csv_has_documented_columns() {
    let out = Command::new(bin())
        .args([
            "verify", "--theorem", "t3", "--d", "2", "--trials", "3", "--seed", "5", "--format",
            "csv",
        ])
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "trial,d,rank,depth_activated,depth_decoupled,pass"
    );
    assert_eq!(lines.filter(|l| !l.is_empty()).count(), 3);
}

#[test]
fn max_dim_env_var_overrides_guard() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_file(dir.path(), "in.json", uniform3());
    let output = dir.path().join("out.json");
    let out = Command::new(bin())
        .env("COHENT_MAX_DIM", "8")
        .args(["convert", "--input"])
        .arg(&input)
        .arg("--output")
        .arg(&output)
        .args(["--mode", "activate"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("exceeds"));
}
