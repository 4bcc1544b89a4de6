use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use twofluid::config::{self, RunConfig};
use twofluid::dynamics::{self, Schedule, State};
use twofluid::energy;
use twofluid::gronwall;
use twofluid::harness::{self, TraceForm};
use twofluid::io;

#[derive(Parser)]
#[command(
    name = "twofluid",
    version,
    about = "Two-fluid compressible flow laboratory"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Configuration file; defaults apply when omitted.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory (overrides `output.dir`).
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Worker threads for sweeps.
    #[arg(long, value_name = "N", default_value_t = 1)]
    jobs: usize,
    /// Override one configuration key, e.g. `--set physics.mu=0.2`.
    #[arg(long = "set", value_name = "SECTION.KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Run one trajectory and write its diagnostics.
    Simulate(Common),
    /// Run a reference and a perturbed trajectory and compare them.
    Compare(Common),
    /// Twin experiments over the configured perturbation amplitudes.
    Sweep(Common),
    /// Tabulate the pressure closure over a grid of densities.
    ClosureTable(Common),
    /// Check a Gronwall trace CSV.
    GronwallCheck {
        #[command(flatten)]
        common: Common,
        /// Trace CSV with columns t,f,gprime,alpha,beta.
        #[arg(long, value_name = "PATH")]
        input: PathBuf,
    },
    /// Recompute energy defects from a diagnostics CSV.
    EnergyAudit {
        #[command(flatten)]
        common: Common,
        /// Per-step diagnostics CSV.
        #[arg(long, value_name = "PATH")]
        input: PathBuf,
        /// Fail when the largest defect exceeds this value.
        #[arg(long)]
        tol: Option<f64>,
    },
}

enum Failure {
    Verdict(String),
    Config(String),
    Runtime(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Verdict(_) => 1,
            Failure::Config(_) => 2,
            Failure::Runtime(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Verdict(m) | Failure::Config(m) | Failure::Runtime(m) => m,
        }
    }
}

fn runtime(e: impl std::fmt::Display) -> Failure {
    Failure::Runtime(e.to_string())
}

struct Setup {
    cfg: RunConfig,
    out: PathBuf,
    jobs: usize,
}

fn load(common: &Common) -> Result<Setup, Failure> {
    let text = match &common.config {
        Some(path) => fs::read_to_string(path)
            .map_err(|e| Failure::Config(format!("cannot read {}: {e}", path.display())))?,
        None => String::new(),
    };
    let cfg = config::parse_config_with(&text, &common.set)
        .map_err(|e| Failure::Config(e.to_string()))?;
    let out = common.out.clone().unwrap_or_else(|| cfg.output.dir.clone());
    fs::create_dir_all(&out).map_err(|e| {
        Failure::Config(format!(
            "output directory {} is not writable: {e}",
            out.display()
        ))
    })?;
    if common.jobs == 0 {
        return Err(Failure::Config("--jobs must be at least 1".into()));
    }
    Ok(Setup {
        cfg,
        out,
        jobs: common.jobs,
    })
}

fn initial(cfg: &RunConfig) -> Result<State, Failure> {
    cfg.initial_state()
        .map_err(|e| Failure::Config(e.to_string()))
}

fn dump_fields(dir: &Path, states: &[State], floor: f64) -> Result<(), Failure> {
    fs::create_dir_all(dir).map_err(runtime)?;
    for (k, s) in states.iter().enumerate() {
        io::write_field(&dir.join(format!("R_{k:05}.dat")), &s.r, s.t, "R").map_err(runtime)?;
        io::write_field(&dir.join(format!("Q_{k:05}.dat")), &s.q, s.t, "Q").map_err(runtime)?;
        let (u, _) = s.velocity(floor);
        for (axis, c) in u.components().iter().enumerate() {
            let name = ["ux", "uy", "uz"][axis];
            io::write_field(&dir.join(format!("{name}_{k:05}.dat")), c, s.t, name)
                .map_err(runtime)?;
        }
    }
    Ok(())
}

fn simulate(setup: &Setup) -> Result<(), Failure> {
    let cfg = &setup.cfg;
    let traj = dynamics::run(&initial(cfg)?, &cfg.params, &Schedule::Adaptive).map_err(runtime)?;
    if cfg.output.diagnostics {
        io::write_diagnostics(&setup.out.join("diagnostics.csv"), &traj.diagnostics)
            .map_err(runtime)?;
    }
    let audit = energy::audit_energy(&energy::samples_from_diagnostics(&traj.diagnostics));
    if cfg.output.energy {
        io::write_energy(&setup.out.join("energy.csv"), &audit).map_err(runtime)?;
    }
    if cfg.output.fields {
        dump_fields(
            &setup.out.join("fields"),
            &traj.snapshots,
            cfg.params.density_floor,
        )?;
    }
    let first = &traj.diagnostics[0];
    let last = traj
        .diagnostics
        .last()
        .expect("diagnostics start with the initial state");
    println!("steps = {}", traj.dts.len());
    println!("t_end = {}", io::fmt_f64(last.t));
    println!(
        "mass_R_drift = {}",
        io::fmt_f64((last.mass_r - first.mass_r) / first.mass_r)
    );
    println!(
        "mass_Q_drift = {}",
        io::fmt_f64((last.mass_q - first.mass_q) / first.mass_q)
    );
    println!("max_energy_defect = {}", io::fmt_f64(audit.max_defect()));
    Ok(())
}

fn compare(setup: &Setup) -> Result<(), Failure> {
    let cfg = &setup.cfg;
    let twin = harness::twin_run(
        &initial(cfg)?,
        &cfg.params,
        &cfg.perturbation.perturbation(),
    )
    .map_err(runtime)?;
    let diag = &twin.diagnostics;
    if cfg.output.comparison {
        io::write_compare(&setup.out.join("compare.csv"), diag).map_err(runtime)?;
    }
    if cfg.output.diagnostics {
        io::write_diagnostics(
            &setup.out.join("diagnostics_reference.csv"),
            &twin.strong.diagnostics,
        )
        .map_err(runtime)?;
        io::write_diagnostics(
            &setup.out.join("diagnostics_perturbed.csv"),
            &twin.weak.diagnostics,
        )
        .map_err(runtime)?;
    }

    let mut failures = Vec::new();
    let density = harness::check_density_stability(diag);
    println!("density_constant = {}", io::fmt_f64(density.fitted));
    println!("density_constant_median = {}", io::fmt_f64(density.median));
    println!("density_verdict = {}", density.verdict());
    if !density.verdict() {
        failures.push("density stability");
    }

    match harness::check_mean_velocity(diag) {
        Ok(mv) => {
            let holds = mv.identity_holds(1e-12);
            println!(
                "mean_identity_max_relative_residual = {}",
                io::fmt_f64(mv.max_relative_residual)
            );
            println!("mean_identity_verdict = {holds}");
            println!("mean_velocity_constant = {}", io::fmt_f64(mv.fitted));
            if !holds {
                failures.push("mean-velocity identity");
            }
        }
        Err(e) => println!("mean_identity_verdict = skipped ({e})"),
    }

    let rates = harness::check_transport_rates(diag);
    println!("transport_constant_R = {}", io::fmt_f64(rates.r.fitted));
    println!("transport_constant_Q = {}", io::fmt_f64(rates.q.fitted));

    let constant = cfg.gronwall.constant.unwrap_or(density.fitted);
    let trace = harness::build_gronwall_trace(diag, &cfg.params, constant, cfg.gronwall.form)
        .map_err(runtime)?;
    io::write_trace(&setup.out.join("gronwall_trace.csv"), &trace).map_err(runtime)?;
    let con = gronwall::check_conclusion(&trace, cfg.gronwall.slack);
    println!("gronwall_constant = {}", io::fmt_f64(constant));
    println!("gronwall_form = {}", cfg.gronwall.form.name());
    println!(
        "gronwall_hypothesis_violations = {}",
        con.hypothesis.violations().len()
    );
    println!("gronwall_max_margin = {}", io::fmt_f64(con.max_margin()));
    println!("gronwall_tolerance = {}", io::fmt_f64(con.tolerance));
    println!("gronwall_verdict = {}", con.verdict());
    if !con.verdict() {
        failures.push("gronwall conclusion");
    }
    let other = match cfg.gronwall.form {
        TraceForm::Weighted => TraceForm::Literal,
        TraceForm::Literal => TraceForm::Weighted,
    };
    let alt = harness::build_gronwall_trace(diag, &cfg.params, constant, other).map_err(runtime)?;
    let alt = gronwall::check_conclusion(&alt, cfg.gronwall.slack);
    println!(
        "gronwall_{}_max_margin = {}",
        other.name(),
        io::fmt_f64(alt.max_margin())
    );

    if failures.is_empty() {
        Ok(())
    } else {
        Err(Failure::Verdict(format!("failed: {}", failures.join(", "))))
    }
}

fn sweep(setup: &Setup) -> Result<(), Failure> {
    let cfg = &setup.cfg;
    let p = &cfg.perturbation;
    let report = harness::stability_sweep(
        &initial(cfg)?,
        &cfg.params,
        &p.deltas,
        p.target,
        p.mode,
        setup.jobs,
    )
    .map_err(runtime)?;
    io::write_sweep(&setup.out.join("sweep.csv"), &report).map_err(runtime)?;
    if cfg.output.comparison {
        for (k, diag) in report.runs.iter().enumerate() {
            let dir = setup.out.join(format!("run_{k:03}"));
            fs::create_dir_all(&dir).map_err(runtime)?;
            io::write_compare(&dir.join("compare.csv"), diag).map_err(runtime)?;
        }
    }
    println!("ratio_spread = {}", io::fmt_f64(report.ratio_spread()));
    println!("sweep_verdict = {}", report.verdict());
    if report.verdict() {
        Ok(())
    } else {
        Err(Failure::Verdict(
            "distance/delta varies by more than a factor 2".into(),
        ))
    }
}

fn closure_table(setup: &Setup) -> Result<(), Failure> {
    let cfg = &setup.cfg;
    let rows = io::closure_table(&cfg.closure_table, &cfg.params.closure, &cfg.params.tol)
        .map_err(runtime)?;
    io::write_csv(
        &setup.out.join("closure_table.csv"),
        &io::CLOSURE_TABLE_HEADER,
        &rows,
    )
    .map_err(runtime)?;
    println!("rows = {}", rows.len());
    Ok(())
}

fn gronwall_check(setup: &Setup, input: &Path) -> Result<(), Failure> {
    let trace = io::read_trace(input).map_err(|e| Failure::Config(e.to_string()))?;
    let con = gronwall::check_conclusion(&trace, setup.cfg.gronwall.slack);
    let violations = con.hypothesis.violations();
    println!("hypothesis_violations = {}", violations.len());
    if let Some(&k) = violations.first() {
        let iv = &con.hypothesis.intervals[k];
        println!(
            "first_violation = [{}, {}]",
            io::fmt_f64(iv.t0),
            io::fmt_f64(iv.t1)
        );
    }
    println!("max_margin = {}", io::fmt_f64(con.max_margin()));
    println!("tolerance = {}", io::fmt_f64(con.tolerance));
    println!("verdict = {}", con.verdict());
    if con.verdict() {
        Ok(())
    } else {
        Err(Failure::Verdict(
            "conclusion margin exceeds tolerance".into(),
        ))
    }
}

fn energy_audit(setup: &Setup, input: &Path, tol: Option<f64>) -> Result<(), Failure> {
    let samples = io::read_energy_samples(input).map_err(|e| Failure::Config(e.to_string()))?;
    let audit = energy::audit_energy(&samples);
    io::write_energy(&setup.out.join("energy.csv"), &audit).map_err(runtime)?;
    let worst = audit.max_defect();
    println!("max_defect = {}", io::fmt_f64(worst));
    match tol {
        Some(tol) if worst > tol => Err(Failure::Verdict(format!(
            "energy defect {worst:e} exceeds {tol:e}"
        ))),
        _ => Ok(()),
    }
}

fn dispatch(cli: &Cli) -> Result<(), Failure> {
    match &cli.command {
        Command::Simulate(c) => simulate(&load(c)?),
        Command::Compare(c) => compare(&load(c)?),
        Command::Sweep(c) => sweep(&load(c)?),
        Command::ClosureTable(c) => closure_table(&load(c)?),
        Command::GronwallCheck { common, input } => gronwall_check(&load(common)?, input),
        Command::EnergyAudit { common, input, tol } => energy_audit(&load(common)?, input, *tol),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
