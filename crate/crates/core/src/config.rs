//! Run configuration: a line-based `key = value` format with `[section]`
//! headers and `#` comments.
//!
//! ```text
//! [grid]
//! dim = 1
//! n = 128
//! length = 6.283185307179586
//!
//! [initial.R]
//! constant = 1.0
//! modes = 0.2:1:0.0
//! ```
//!
//! A Fourier mode is written `amplitude:k1[,k2[,k3]]:phase` and contributes
//! `amplitude * sin(2 pi (k . x) / length + phase)`; several modes are
//! separated by `;`, and `none` (or an empty value) means no modes. Every key
//! has a default and the defaults together form the `std1d` fixture.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::PathBuf;

use thiserror::Error;

use crate::closure::ClosureParams;
use crate::dynamics::{SimParams, State, ViscousStencil};
use crate::grid::{PeriodicGrid, ScalarField, VectorField};
use crate::gronwall::DEFAULT_SLACK;
use crate::harness::{Perturbation, PerturbationTarget, TraceForm};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("{origin}: {message}")]
    Parse { origin: String, message: String },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mode {
    pub amplitude: f64,
    pub wavevector: [i64; 3],
    pub phase: f64,
}

/// `constant + sum of modes`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FieldSpec {
    pub constant: f64,
    pub modes: Vec<Mode>,
}

impl FieldSpec {
    pub fn constant(value: f64) -> Self {
        Self {
            constant: value,
            modes: Vec::new(),
        }
    }

    pub fn with_mode(mut self, amplitude: f64, wavevector: [i64; 3], phase: f64) -> Self {
        self.modes.push(Mode {
            amplitude,
            wavevector,
            phase,
        });
        self
    }

    /// Lower bound `constant - sum |amplitude|`.
    pub fn lower_bound(&self) -> f64 {
        self.constant - self.modes.iter().map(|m| m.amplitude.abs()).sum::<f64>()
    }

    pub fn sample(&self, grid: &PeriodicGrid) -> ScalarField {
        let scale = 2.0 * std::f64::consts::PI / grid.length();
        ScalarField::from_fn(*grid, |x| {
            let mut v = self.constant;
            for m in &self.modes {
                let kx: f64 = (0..3).map(|i| m.wavevector[i] as f64 * x[i]).sum();
                v += m.amplitude * (scale * kx + m.phase).sin();
            }
            v
        })
    }

    fn render_modes(&self) -> String {
        if self.modes.is_empty() {
            return "none".to_string();
        }
        self.modes
            .iter()
            .map(|m| {
                let k = m.wavevector.map(|k| k.to_string()).join(",");
                format!("{:?}:{}:{:?}", m.amplitude, k, m.phase)
            })
            .collect::<Vec<_>>()
            .join("; ")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub dim: usize,
    pub n: usize,
    pub length: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InitialSpec {
    pub r: FieldSpec,
    pub q: FieldSpec,
    pub u: [FieldSpec; 3],
}

#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationSpec {
    pub target: PerturbationTarget,
    pub delta: f64,
    pub mode: u32,
    /// Amplitudes visited by `sweep`.
    pub deltas: Vec<f64>,
}

impl PerturbationSpec {
    pub fn perturbation(&self) -> Perturbation {
        Perturbation {
            target: self.target,
            delta: self.delta,
            mode: self.mode,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputSpec {
    pub dir: PathBuf,
    pub fields: bool,
    pub diagnostics: bool,
    pub energy: bool,
    pub comparison: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GronwallSpec {
    /// `None` uses the fitted density-stability constant.
    pub constant: Option<f64>,
    pub slack: f64,
    pub form: TraceForm,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClosureTableSpec {
    pub r_max: f64,
    pub q_max: f64,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub grid: GridSpec,
    pub params: SimParams,
    pub initial: InitialSpec,
    pub perturbation: PerturbationSpec,
    pub output: OutputSpec,
    pub gronwall: GronwallSpec,
    pub closure_table: ClosureTableSpec,
}

impl Default for RunConfig {
    /// The `std1d` fixture.
    fn default() -> Self {
        let closure = ClosureParams::new(1.5, 3.0).expect("default exponents are valid");
        let mut params =
            SimParams::new(0.1, 0.0, closure, 0.4, 0.5).expect("std1d parameters are valid");
        params.viscous_stencil = ViscousStencil::Wide;
        Self {
            grid: GridSpec {
                dim: 1,
                n: 128,
                length: 2.0 * std::f64::consts::PI,
            },
            params,
            initial: InitialSpec {
                r: FieldSpec::constant(1.0).with_mode(0.2, [1, 0, 0], 0.0),
                q: FieldSpec::constant(1.0).with_mode(0.2, [1, 0, 0], std::f64::consts::FRAC_PI_2),
                u: [
                    FieldSpec::constant(0.0).with_mode(0.1, [1, 0, 0], 0.0),
                    FieldSpec::constant(0.0),
                    FieldSpec::constant(0.0),
                ],
            },
            perturbation: PerturbationSpec {
                target: PerturbationTarget::Velocity,
                delta: 1e-3,
                mode: 2,
                deltas: vec![1e-2, 1e-3, 1e-4],
            },
            output: OutputSpec {
                dir: PathBuf::from("out"),
                fields: false,
                diagnostics: true,
                energy: true,
                comparison: true,
            },
            gronwall: GronwallSpec {
                constant: None,
                slack: DEFAULT_SLACK,
                form: TraceForm::Weighted,
            },
            closure_table: ClosureTableSpec {
                r_max: 10.0,
                q_max: 10.0,
                points: 11,
            },
        }
    }
}

impl RunConfig {
    pub fn grid(&self) -> Result<PeriodicGrid, ConfigError> {
        PeriodicGrid::new(self.grid.dim, self.grid.n, self.grid.length)
            .map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    pub fn initial_state(&self) -> Result<State, ConfigError> {
        let grid = self.grid()?;
        let r = self.initial.r.sample(&grid);
        let q = self.initial.q.sample(&grid);
        let comps = (0..grid.dim())
            .map(|i| self.initial.u[i].sample(&grid))
            .collect();
        Ok(State::from_primitive(
            r,
            q,
            &VectorField::from_components(comps),
            0.0,
        ))
    }

    /// Check every invariant not enforced by the parser.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |m: String| Err(ConfigError::Invalid(m));
        let grid = self.grid()?;
        let p = &self.params;
        let (gp, gm) = (p.closure.gamma_plus(), p.closure.gamma_minus());
        if !(gp > 1.0) || !gp.is_finite() {
            return invalid(format!("gamma_plus must exceed 1, got {gp}"));
        }
        if !(gm > 1.0) || !gm.is_finite() {
            return invalid(format!("gamma_minus must exceed 1, got {gm}"));
        }
        p.validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        for (name, f) in [("R", &self.initial.r), ("Q", &self.initial.q)] {
            let lb = f.lower_bound();
            if !(lb > 0.0) {
                return invalid(format!(
                    "initial {name} must stay positive: constant - sum |amplitude| = {lb} <= 0"
                ));
            }
        }
        let fields = [
            ("R", &self.initial.r),
            ("Q", &self.initial.q),
            ("ux", &self.initial.u[0]),
            ("uy", &self.initial.u[1]),
            ("uz", &self.initial.u[2]),
        ];
        for (name, f) in fields {
            if !f.constant.is_finite() {
                return invalid(format!("initial {name} constant must be finite"));
            }
            for m in &f.modes {
                if !m.amplitude.is_finite() || !m.phase.is_finite() {
                    return invalid(format!("initial {name} has a non-finite mode"));
                }
                if m.wavevector[grid.dim()..].iter().any(|&k| k != 0) {
                    return invalid(format!(
                        "initial {name} has a wavevector component beyond dimension {}",
                        grid.dim()
                    ));
                }
            }
        }
        for (axis, name) in ["ux", "uy", "uz"].iter().enumerate().skip(grid.dim()) {
            let f = &self.initial.u[axis];
            if f.constant != 0.0 || !f.modes.is_empty() {
                return invalid(format!(
                    "initial {name} is set but the grid has dimension {}",
                    grid.dim()
                ));
            }
        }
        let pert = &self.perturbation;
        if !pert.delta.is_finite() {
            return invalid("perturbation delta must be finite".into());
        }
        if pert.mode == 0 {
            return invalid("perturbation mode must be at least 1".into());
        }
        if pert.deltas.is_empty() || pert.deltas.iter().any(|d| !d.is_finite()) {
            return invalid("perturbation deltas must be a nonempty list of finite numbers".into());
        }
        let g = &self.gronwall;
        if !(g.slack >= 0.0) || !g.slack.is_finite() {
            return invalid(format!(
                "gronwall slack must be nonnegative, got {}",
                g.slack
            ));
        }
        if let Some(c) = g.constant {
            if !(c >= 0.0) || !c.is_finite() {
                return invalid(format!("gronwall constant must be nonnegative, got {c}"));
            }
        }
        let t = &self.closure_table;
        if !(t.r_max >= 0.0) || !(t.q_max >= 0.0) || !t.r_max.is_finite() || !t.q_max.is_finite() {
            return invalid("closure_table ranges must be finite and nonnegative".into());
        }
        if t.points < 2 {
            return invalid(format!(
                "closure_table points must be at least 2, got {}",
                t.points
            ));
        }
        Ok(())
    }

    /// Render every key; parsing the result reproduces `self`.
    pub fn to_text(&self) -> String {
        let p = &self.params;
        let mut s = String::new();
        let w = &mut s;
        let _ = writeln!(
            w,
            "[grid]\ndim = {}\nn = {}\nlength = {:?}\n",
            self.grid.dim, self.grid.n, self.grid.length
        );
        let _ = writeln!(w, "[physics]");
        let _ = writeln!(w, "gamma_plus = {:?}", p.closure.gamma_plus());
        let _ = writeln!(w, "gamma_minus = {:?}", p.closure.gamma_minus());
        let _ = writeln!(
            w,
            "mu = {:?}\nlambda = {:?}\ncfl = {:?}\nt_end = {:?}",
            p.mu, p.lambda, p.cfl, p.t_end
        );
        let _ = writeln!(
            w,
            "output_interval = {:?}\ndensity_floor = {:?}\ndt_min = {:?}",
            p.output_interval, p.density_floor, p.dt_min
        );
        let stencil = match p.viscous_stencil {
            ViscousStencil::Wide => "wide",
            ViscousStencil::Compact => "compact",
        };
        let _ = writeln!(w, "viscous_stencil = {stencil}\n");
        let _ = writeln!(
            w,
            "[solver]\nabs_tol = {:?}\nrel_tol = {:?}\nmax_iter = {}\n",
            p.tol.abs, p.tol.rel, p.tol.max_iter
        );
        let fields = [
            ("R", &self.initial.r),
            ("Q", &self.initial.q),
            ("ux", &self.initial.u[0]),
            ("uy", &self.initial.u[1]),
            ("uz", &self.initial.u[2]),
        ];
        for (name, f) in fields {
            let _ = writeln!(
                w,
                "[initial.{name}]\nconstant = {:?}\nmodes = {}\n",
                f.constant,
                f.render_modes()
            );
        }
        let pert = &self.perturbation;
        let deltas = pert
            .deltas
            .iter()
            .map(|d| format!("{d:?}"))
            .collect::<Vec<_>>()
            .join(", ");
        let _ = writeln!(
            w,
            "[perturbation]\ntarget = {}\ndelta = {:?}\nmode = {}\ndeltas = {deltas}\n",
            pert.target.name(),
            pert.delta,
            pert.mode
        );
        let o = &self.output;
        let _ = writeln!(
            w,
            "[output]\ndir = {}\nfields = {}\ndiagnostics = {}\nenergy = {}\ncomparison = {}\n",
            o.dir.display(),
            o.fields,
            o.diagnostics,
            o.energy,
            o.comparison
        );
        let g = &self.gronwall;
        let constant = g.constant.map_or("auto".to_string(), |c| format!("{c:?}"));
        let _ = writeln!(
            w,
            "[gronwall]\nconstant = {constant}\nslack = {:?}\nform = {}\n",
            g.slack,
            g.form.name()
        );
        let t = &self.closure_table;
        let _ = writeln!(
            w,
            "[closure_table]\nr_max = {:?}\nq_max = {:?}\npoints = {}",
            t.r_max, t.q_max, t.points
        );
        s
    }
}

struct Entry {
    section: String,
    key: String,
    value: String,
    origin: String,
}

fn parse_error(origin: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Parse {
        origin: origin.to_string(),
        message: message.into(),
    }
}

fn unquote(v: &str) -> &str {
    let v = v.trim();
    if v.len() >= 2 && v.starts_with('"') && v.ends_with('"') {
        &v[1..v.len() - 1]
    } else {
        v
    }
}

fn lex(text: &str) -> Result<Vec<Entry>, ConfigError> {
    let mut entries: Vec<Entry> = Vec::new();
    let mut seen = BTreeSet::new();
    let mut section = String::new();
    for (i, raw) in text.lines().enumerate() {
        let origin = format!("line {}", i + 1);
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or_else(|| parse_error(&origin, "unterminated section header"))?
                .trim();
            if name.is_empty() {
                return Err(parse_error(&origin, "empty section name"));
            }
            section = name.to_string();
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            parse_error(&origin, format!("expected `key = value`, found `{line}`"))
        })?;
        let key = key.trim();
        if key.is_empty() {
            return Err(parse_error(&origin, "missing key"));
        }
        if section.is_empty() {
            return Err(parse_error(
                &origin,
                format!("key `{key}` appears before any section"),
            ));
        }
        if !seen.insert((section.clone(), key.to_string())) {
            return Err(parse_error(
                &origin,
                format!("duplicate key `{key}` in [{section}]"),
            ));
        }
        entries.push(Entry {
            section: section.clone(),
            key: key.to_string(),
            value: unquote(value).to_string(),
            origin,
        });
    }
    Ok(entries)
}

fn apply_override(entries: &mut Vec<Entry>, item: &str) -> Result<(), ConfigError> {
    let origin = format!("--set {item}");
    let (path, value) = item
        .split_once('=')
        .ok_or_else(|| parse_error(&origin, "expected `section.key=value`"))?;
    let (section, key) = path
        .trim()
        .rsplit_once('.')
        .ok_or_else(|| parse_error(&origin, "expected `section.key=value`"))?;
    let value = unquote(value).to_string();
    if let Some(e) = entries
        .iter_mut()
        .find(|e| e.section == section && e.key == key)
    {
        e.value = value;
        e.origin = origin;
    } else {
        entries.push(Entry {
            section: section.to_string(),
            key: key.to_string(),
            value,
            origin,
        });
    }
    Ok(())
}

fn num<T: std::str::FromStr>(e: &Entry) -> Result<T, ConfigError> {
    e.value.parse().map_err(|_| {
        parse_error(
            &e.origin,
            format!("`{}` is not a valid value for `{}`", e.value, e.key),
        )
    })
}

fn boolean(e: &Entry) -> Result<bool, ConfigError> {
    match e.value.as_str() {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(parse_error(
            &e.origin,
            format!("`{}` must be true or false", e.key),
        )),
    }
}

fn modes(e: &Entry) -> Result<Vec<Mode>, ConfigError> {
    let v = e.value.trim();
    if v.is_empty() || v == "none" {
        return Ok(Vec::new());
    }
    let bad = |m: &str| {
        parse_error(
            &e.origin,
            format!("malformed mode `{m}`; expected amplitude:k1[,k2[,k3]]:phase"),
        )
    };
    v.split(';')
        .map(|m| {
            let m = m.trim();
            let parts: Vec<&str> = m.split(':').collect();
            if parts.len() != 3 {
                return Err(bad(m));
            }
            let amplitude = parts[0].trim().parse().map_err(|_| bad(m))?;
            let phase = parts[2].trim().parse().map_err(|_| bad(m))?;
            let ks: Vec<&str> = parts[1].split(',').collect();
            if ks.is_empty() || ks.len() > 3 {
                return Err(bad(m));
            }
            let mut wavevector = [0_i64; 3];
            for (slot, k) in wavevector.iter_mut().zip(ks) {
                *slot = k.trim().parse().map_err(|_| bad(m))?;
            }
            Ok(Mode {
                amplitude,
                wavevector,
                phase,
            })
        })
        .collect()
}

fn list(e: &Entry) -> Result<Vec<f64>, ConfigError> {
    e.value
        .split(',')
        .map(|s| {
            s.trim().parse().map_err(|_| {
                parse_error(&e.origin, format!("`{}` is not a list of numbers", e.value))
            })
        })
        .collect()
}

/// Parse and validate configuration text, then apply `--set` overrides.
pub fn parse_config_with(text: &str, overrides: &[String]) -> Result<RunConfig, ConfigError> {
    let mut entries = lex(text)?;
    for item in overrides {
        apply_override(&mut entries, item)?;
    }
    let mut cfg = RunConfig::default();
    let mut gamma_plus = cfg.params.closure.gamma_plus();
    let mut gamma_minus = cfg.params.closure.gamma_minus();
    for e in &entries {
        let p = &mut cfg.params;
        match (e.section.as_str(), e.key.as_str()) {
            ("grid", "dim") => cfg.grid.dim = num(e)?,
            ("grid", "n") => cfg.grid.n = num(e)?,
            ("grid", "length") => cfg.grid.length = num(e)?,
            ("physics", "gamma_plus") => gamma_plus = num(e)?,
            ("physics", "gamma_minus") => gamma_minus = num(e)?,
            ("physics", "mu") => p.mu = num(e)?,
            ("physics", "lambda") => p.lambda = num(e)?,
            ("physics", "cfl") => p.cfl = num(e)?,
            ("physics", "t_end") => p.t_end = num(e)?,
            ("physics", "output_interval") => p.output_interval = num(e)?,
            ("physics", "density_floor") => p.density_floor = num(e)?,
            ("physics", "dt_min") => p.dt_min = num(e)?,
            ("physics", "viscous_stencil") => {
                p.viscous_stencil = match e.value.as_str() {
                    "wide" => ViscousStencil::Wide,
                    "compact" => ViscousStencil::Compact,
                    _ => {
                        return Err(parse_error(
                            &e.origin,
                            "viscous_stencil must be `wide` or `compact`",
                        ))
                    }
                }
            }
            ("solver", "abs_tol") => p.tol.abs = num(e)?,
            ("solver", "rel_tol") => p.tol.rel = num(e)?,
            ("solver", "max_iter") => p.tol.max_iter = num(e)?,
            (s, key) if s.starts_with("initial.") => {
                let field = match &s["initial.".len()..] {
                    "R" => &mut cfg.initial.r,
                    "Q" => &mut cfg.initial.q,
                    "ux" => &mut cfg.initial.u[0],
                    "uy" => &mut cfg.initial.u[1],
                    "uz" => &mut cfg.initial.u[2],
                    _ => return Err(parse_error(&e.origin, format!("unknown section [{s}]"))),
                };
                match key {
                    "constant" => field.constant = num(e)?,
                    "modes" => field.modes = modes(e)?,
                    _ => {
                        return Err(parse_error(
                            &e.origin,
                            format!("unknown key `{key}` in [{s}]"),
                        ))
                    }
                }
            }
            ("perturbation", "target") => {
                cfg.perturbation.target = PerturbationTarget::parse(&e.value).ok_or_else(|| {
                    parse_error(&e.origin, "target must be `velocity`, `densities` or `all`")
                })?
            }
            ("perturbation", "delta") => cfg.perturbation.delta = num(e)?,
            ("perturbation", "mode") => cfg.perturbation.mode = num(e)?,
            ("perturbation", "deltas") => cfg.perturbation.deltas = list(e)?,
            ("output", "dir") => cfg.output.dir = PathBuf::from(&e.value),
            ("output", "fields") => cfg.output.fields = boolean(e)?,
            ("output", "diagnostics") => cfg.output.diagnostics = boolean(e)?,
            ("output", "energy") => cfg.output.energy = boolean(e)?,
            ("output", "comparison") => cfg.output.comparison = boolean(e)?,
            ("gronwall", "constant") => {
                cfg.gronwall.constant = if e.value == "auto" {
                    None
                } else {
                    Some(num(e)?)
                }
            }
            ("gronwall", "slack") => cfg.gronwall.slack = num(e)?,
            ("gronwall", "form") => {
                cfg.gronwall.form = TraceForm::parse(&e.value)
                    .ok_or_else(|| parse_error(&e.origin, "form must be `weighted` or `literal`"))?
            }
            ("closure_table", "r_max") => cfg.closure_table.r_max = num(e)?,
            ("closure_table", "q_max") => cfg.closure_table.q_max = num(e)?,
            ("closure_table", "points") => cfg.closure_table.points = num(e)?,
            (s, key) => {
                const SECTIONS: [&str; 7] = [
                    "grid",
                    "physics",
                    "solver",
                    "perturbation",
                    "output",
                    "gronwall",
                    "closure_table",
                ];
                let message = if SECTIONS.contains(&s) {
                    format!("unknown key `{key}` in [{s}]")
                } else {
                    format!("unknown section [{s}]")
                };
                return Err(parse_error(&e.origin, message));
            }
        }
    }
    if !(gamma_plus > 1.0) {
        return Err(ConfigError::Invalid(format!(
            "gamma_plus must exceed 1, got {gamma_plus}"
        )));
    }
    if !(gamma_minus > 1.0) {
        return Err(ConfigError::Invalid(format!(
            "gamma_minus must exceed 1, got {gamma_minus}"
        )));
    }
    cfg.params.closure = ClosureParams::new(gamma_plus, gamma_minus)
        .map_err(|e| ConfigError::Invalid(e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    parse_config_with(text, &[])
}
