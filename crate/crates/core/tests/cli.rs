use std::path::Path;
use std::process::{Command, Output};

use twofluid::config::{parse_config, RunConfig};
use twofluid::io::read_csv;

const FIXTURE: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures/std1d.cfg");

fn twofluid(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_twofluid"))
        .args(args)
        .output()
        .unwrap()
}

fn header(path: &Path) -> String {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .next()
        .unwrap()
        .to_string()
}

fn stdout_value(out: &Output, key: &str) -> String {
    let text = String::from_utf8_lossy(&out.stdout);
    let prefix = format!("{key} = ");
    text.lines()
        .find_map(|l| l.strip_prefix(&prefix))
        .unwrap_or_else(|| panic!("no `{key}` in {text}"))
        .to_string()
}

#[test]
fn fixture_round_trips_and_equals_defaults() {
    let text = std::fs::read_to_string(FIXTURE).unwrap();
    let cfg = parse_config(&text).unwrap();
    assert_eq!(cfg, RunConfig::default());
    assert_eq!(parse_config(&cfg.to_text()).unwrap(), cfg);
}

#[test]
fn simulate_writes_diagnostics_with_monotone_time() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let run = twofluid(&["simulate", "--config", FIXTURE, "--out", out]);
    assert_eq!(
        run.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&run.stderr)
    );
    let diag = dir.path().join("diagnostics.csv");
    assert_eq!(
        header(&diag),
        "t,dt,mass_R,mass_Q,energy,dissipation,min_R,min_Q,max_u,floor_hits"
    );
    assert_eq!(
        header(&dir.path().join("energy.csv")),
        "t,kinetic,internal,dissipation_rate,cumulative_dissipation,defect"
    );
    let t = read_csv(&diag).unwrap().column("t").unwrap();
    assert!(t.windows(2).all(|w| w[1] > w[0]));
    assert_eq!(*t.last().unwrap(), 0.5);
    assert!(run.stderr.is_empty());
}

#[test]
fn simulate_is_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        let run = twofluid(&[
            "simulate",
            "--out",
            d.path().to_str().unwrap(),
            "--set",
            "grid.n=32",
        ]);
        assert_eq!(run.status.code(), Some(0));
    }
    let read = |d: &tempfile::TempDir| std::fs::read(d.path().join("diagnostics.csv")).unwrap();
    assert_eq!(read(&a), read(&b));
}

#[test]
fn field_dumps_are_written_on_request() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let run = twofluid(&[
        "simulate",
        "--out",
        out,
        "--set",
        "grid.n=16",
        "--set",
        "physics.t_end=0.01",
        "--set",
        "output.fields=true",
    ]);
    assert_eq!(run.status.code(), Some(0));
    let first = header(&dir.path().join("fields/R_00000.dat"));
    assert_eq!(first, "# 1 16 6.2831853071795862e0 0.0000000000000000e0 R");
}

#[test]
fn compare_with_zero_delta_gives_zero_differences() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let run = twofluid(&[
        "compare",
        "--out",
        out,
        "--set",
        "perturbation.delta=0",
        "--set",
        "grid.n=32",
    ]);
    assert_eq!(
        run.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&run.stderr)
    );
    let path = dir.path().join("compare.csv");
    assert_eq!(
        header(&path),
        "t,norm_frakR,norm_calQ,norm_wU,norm_gradU,norm_U6,mean_U,int_gradU,M_bound"
    );
    let table = read_csv(&path).unwrap();
    for name in [
        "norm_frakR",
        "norm_calQ",
        "norm_wU",
        "norm_gradU",
        "norm_U6",
        "mean_U",
        "int_gradU",
    ] {
        assert!(
            table.column(name).unwrap().iter().all(|&v| v == 0.0),
            "{name}"
        );
    }
    assert!(table.column("M_bound").unwrap().iter().all(|&v| v > 1.0));
    assert_eq!(
        header(&dir.path().join("gronwall_trace.csv")),
        "t,f,gprime,alpha,beta"
    );
    assert_eq!(stdout_value(&run, "gronwall_verdict"), "true");
}

#[test]
fn sweep_report_columns() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let run = twofluid(&[
        "sweep",
        "--out",
        out,
        "--jobs",
        "3",
        "--set",
        "grid.n=32",
        "--set",
        "physics.t_end=0.2",
    ]);
    assert_eq!(
        run.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&run.stderr)
    );
    let path = dir.path().join("sweep.csv");
    assert_eq!(header(&path), "delta,sup_distance,ratio,fitted_C");
    let table = read_csv(&path).unwrap();
    assert_eq!(table.column("delta").unwrap(), vec![1e-2, 1e-3, 1e-4]);
    for k in 0..3 {
        assert!(dir.path().join(format!("run_{k:03}/compare.csv")).exists());
    }
}

#[test]
fn closure_table_columns() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let run = twofluid(&[
        "closure-table",
        "--out",
        out,
        "--set",
        "closure_table.points=5",
    ]);
    assert_eq!(run.status.code(), Some(0));
    let path = dir.path().join("closure_table.csv");
    assert_eq!(
        header(&path),
        "R,Q,gamma_plus,gamma_minus,Z,alpha,p,dZdR,dZdQ,residual"
    );
    assert_eq!(read_csv(&path).unwrap().rows.len(), 25);
}

fn write_trace(path: &Path, f: impl Fn(f64) -> f64) {
    let mut text = String::from("t,f,gprime,alpha,beta\n");
    for k in 0..=100 {
        let t = k as f64 / 100.0;
        text.push_str(&format!("{t},{},0,0,0\n", f(t)));
    }
    std::fs::write(path, text).unwrap();
}

#[test]
fn gronwall_check_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let constant = dir.path().join("constant.csv");
    write_trace(&constant, |_| 2.0);
    let run = twofluid(&[
        "gronwall-check",
        "--out",
        out,
        "--input",
        constant.to_str().unwrap(),
    ]);
    assert_eq!(run.status.code(), Some(0));
    assert_eq!(stdout_value(&run, "max_margin"), "0.0000000000000000e0");

    let growing = dir.path().join("growing.csv");
    write_trace(&growing, |t| 1.0 + t);
    let run = twofluid(&[
        "gronwall-check",
        "--out",
        out,
        "--input",
        growing.to_str().unwrap(),
    ]);
    assert_eq!(run.status.code(), Some(1));
    assert_ne!(stdout_value(&run, "hypothesis_violations"), "0");

    let missing = dir.path().join("missing.csv");
    let run = twofluid(&[
        "gronwall-check",
        "--out",
        out,
        "--input",
        missing.to_str().unwrap(),
    ]);
    assert_eq!(run.status.code(), Some(2));
}

#[test]
fn energy_audit_rereads_diagnostics() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    assert_eq!(
        twofluid(&["simulate", "--out", out, "--set", "grid.n=32"])
            .status
            .code(),
        Some(0)
    );
    let simulated = std::fs::read_to_string(dir.path().join("energy.csv")).unwrap();
    let audit_dir = dir.path().join("audit");
    let diag = dir.path().join("diagnostics.csv");
    let run = twofluid(&[
        "energy-audit",
        "--out",
        audit_dir.to_str().unwrap(),
        "--input",
        diag.to_str().unwrap(),
    ]);
    assert_eq!(run.status.code(), Some(0));
    let audited = read_csv(&audit_dir.join("energy.csv")).unwrap();
    let original = read_csv(&dir.path().join("energy.csv")).unwrap();
    assert_eq!(
        audited.column("defect").unwrap(),
        original.column("defect").unwrap()
    );
    assert!(audited
        .column("kinetic")
        .unwrap()
        .iter()
        .all(|v| v.is_nan()));
    assert!(simulated.starts_with("t,kinetic"));
    let strict = twofluid(&[
        "energy-audit",
        "--out",
        audit_dir.to_str().unwrap(),
        "--input",
        diag.to_str().unwrap(),
        "--tol",
        "1e-30",
    ]);
    assert_eq!(strict.status.code(), Some(1));
}

#[test]
fn configuration_errors_exit_2_on_stderr() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let run = twofluid(&["simulate", "--out", out, "--set", "physics.gamma_plus=0.5"]);
    assert_eq!(run.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&run.stderr).contains("gamma_plus must exceed 1"));
    assert!(run.stdout.is_empty());
    assert!(!dir.path().join("diagnostics.csv").exists());

    let cfg = dir.path().join("bad.cfg");
    std::fs::write(&cfg, "[grid]\nn = 64\nspeed = 3\n").unwrap();
    let run = twofluid(&["simulate", "--out", out, "--config", cfg.to_str().unwrap()]);
    assert_eq!(run.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&run.stderr).contains("line 3"));
}

#[test]
fn runtime_errors_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let run = twofluid(&["simulate", "--out", out, "--set", "physics.dt_min=1"]);
    assert_eq!(run.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&run.stderr).contains("vanishing time step"));
}
