use anharmonic::pipeline::{solve_classical, Numerics};
use anharmonic::profiles::{make_tanh_frequency, Scenario};
use anharmonic::smatrix::w0_legendre;
use std::path::Path;
use std::process::{Command, Output};

const TANH: &str = r#"
[scenario]
omega = { kind = "tanh-frequency", omega_in = 1.0, omega_out = 2.0, ramp_time = 1.0 }
tau_span = [-40.0, 40.0]
"#;

const QUARTIC: &str = r#"
[scenario]
omega = { kind = "tanh-frequency", omega_in = 1.0, omega_out = 1.5, ramp_time = 1.0 }
beta = { kind = "adiabatic-switch", value_plus = -1.0, ramp_time = 10.0 }
lambda = 0.05
tau_span = [-120.0, 120.0]
"#;

fn run(dir: &Path, cmd: &str, config: &str) -> Output {
    let cfg = dir.join("run.toml");
    std::fs::write(&cfg, config).unwrap();
    Command::new(env!("CARGO_BIN_EXE_anharmonic"))
        .args([cmd, "--config", cfg.to_str().unwrap(), "--out", dir.join("out").to_str().unwrap()])
        .output()
        .unwrap()
}

fn stdout_value(o: &Output, key: &str) -> f64 {
    let text = String::from_utf8_lossy(&o.stdout);
    let line = text.lines().find(|l| l.starts_with(key)).unwrap_or_else(|| panic!("no {key} in {text}"));
    line.split('=').nth(1).unwrap().trim().parse().unwrap()
}

/// `(m, n, w, flags)` rows of a transitions CSV.
fn w_column(path: &Path) -> Vec<(usize, usize, f64, String)> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[0].parse().unwrap(), f[1].parse().unwrap(), f[8].parse().unwrap(), f[10].to_string())
        })
        .collect()
}

#[test]
fn constant_frequency_prints_zero_reflection() {
    let d = tempfile::tempdir().unwrap();
    let cfg = "[scenario]\nomega = { kind = \"constant\", value = 1.3 }\ntau_span = [0.0, 30.0]\n";
    let o = run(d.path(), "classical", cfg);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(stdout_value(&o, "rho"), 0.0);
    assert!(d.path().join("out/trajectory.csv").exists());
}

#[test]
fn printed_rho_is_bit_exact() {
    let d = tempfile::tempdir().unwrap();
    let o = run(d.path(), "classical", TANH);
    assert_eq!(o.status.code(), Some(0));
    let s = Scenario::harmonic(make_tanh_frequency(1.0, 2.0, 1.0).unwrap(), [-40.0, 40.0]);
    let (_, p) = solve_classical(&s, &Numerics::default()).unwrap();
    assert_eq!(stdout_value(&o, "rho").to_bits(), p.rho.to_bits());
}

#[test]
fn config_errors_exit_with_two() {
    let d = tempfile::tempdir().unwrap();
    assert_eq!(run(d.path(), "classical", "[scenario]\ntau_span = [0.0, 1.0]\n").status.code(), Some(2));
    assert_eq!(run(d.path(), "oracle-compare", &format!("{TANH}[sweep]\nlambda = []\n")).status.code(), Some(2));
    assert_eq!(run(d.path(), "transitions", &format!("{TANH}[numerics]\nn_max = 70\n")).status.code(), Some(2));
    let none = Command::new(env!("CARGO_BIN_EXE_anharmonic")).arg("classical").output().unwrap();
    assert_eq!(none.status.code(), Some(2));
    let bad = Command::new(env!("CARGO_BIN_EXE_anharmonic")).arg("bogus").output().unwrap();
    assert_eq!(bad.status.code(), Some(2));
    let help = Command::new(env!("CARGO_BIN_EXE_anharmonic")).arg("--help").output().unwrap();
    assert_eq!(help.status.code(), Some(0));
}

#[test]
fn numeric_failure_exits_with_three() {
    // the frequency is still ramping at tau_end, so the asymptotic fit fails
    let d = tempfile::tempdir().unwrap();
    let cfg = TANH.replace("[-40.0, 40.0]", "[-40.0, 1.0]");
    assert_eq!(run(d.path(), "classical", &cfg).status.code(), Some(3));
}

#[test]
fn zero_coupling_table_matches_legendre() {
    let d = tempfile::tempdir().unwrap();
    let o = run(d.path(), "transitions", &format!("{TANH}[numerics]\nn_max = 6\n"));
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let rho = anharmonic::classical::tanh_profile_rho(1.0, 2.0, 1.0);
    let rows = w_column(&d.path().join("out/transitions.csv"));
    assert_eq!(rows.len(), 49);
    for (m, n, w, _) in rows {
        assert!((w - w0_legendre(m, n, rho).unwrap()).abs() < 1e-9, "({m},{n})");
    }
}

#[test]
fn quartic_run_flags_vanishing_entries() {
    let d = tempfile::tempdir().unwrap();
    let o = run(d.path(), "transitions", &format!("{QUARTIC}[numerics]\nn_max = 4\n"));
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = w_column(&d.path().join("out/transitions.csv"));
    // odd m + n: S0 vanishes by parity
    for (m, n, _, flags) in &rows {
        assert_eq!(flags.contains("indeterminate"), (m + n) % 2 == 1, "({m},{n}) {flags}");
    }
}

#[test]
fn truncation_and_determinism() {
    let d = tempfile::tempdir().unwrap();
    let a = run(d.path(), "transitions", &format!("{QUARTIC}[numerics]\nn_max = 16\n"));
    assert_eq!(a.status.code(), Some(0));
    let csv16 = std::fs::read(d.path().join("out/transitions.csv")).unwrap();
    let w16 = stdout_value(&a, "W00");
    run(d.path(), "transitions", &format!("{QUARTIC}[numerics]\nn_max = 16\n"));
    assert_eq!(std::fs::read(d.path().join("out/transitions.csv")).unwrap(), csv16);
    let b = run(d.path(), "transitions", &format!("{QUARTIC}[numerics]\nn_max = 20\n"));
    assert!((stdout_value(&b, "W00") - w16).abs() < 1e-10);
}

#[test]
fn fig1_edges() {
    let d = tempfile::tempdir().unwrap();
    let o = run(d.path(), "fig1", &format!("{TANH}[sweep]\nlambda_tilde = [0.0, 0.5]\nrho = [0.0, 0.5]\n"));
    assert_eq!(o.status.code(), Some(0));
    let text = std::fs::read_to_string(d.path().join("out/fig1.csv")).unwrap();
    let rows: Vec<Vec<f64>> = text
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').take(3).map(|x| x.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows[0], vec![0.0, 0.0, 1.0]);
    assert!(rows[1][2] < 1.0 && (rows[1][2] - (-0.5f64).exp()).abs() < 1e-15);
    assert!((rows[2][2] - 0.5f64.sqrt()).abs() < 1e-15);
}
