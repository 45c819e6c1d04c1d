//! Run configuration and experiment orchestration.
//!
//! Configs are flat `key = value` text (one per line, `#` comments); CLI
//! flags of the same names override file values. A run initializes the grid
//! from the analytic initial data, advances it `steps` times, and records a
//! CSV line per `record_every` steps:
//!
//! ```text
//! step,t,analytic_err,constraint_err,wall_ms
//! ```
//!
//! `constraint_err` is empty when the towers are too small to carry neighbor
//! information (`H_stored < 2`) or for the RK4 baseline.

use crate::baseline::MolSolver;
use crate::equations::System;
use crate::evolver::{
    analytic_error, analytic_error_values, constraint_violation, DiagnosticsRecord, EvolverConfig,
    Grid, Scheme, Stacking, Stepper,
};
use std::fmt;
use std::io::Write;
use std::time::Instant;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EquationKind {
    Wave,
    Mkdv,
}

impl fmt::Display for EquationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EquationKind::Wave => write!(f, "wave"),
            EquationKind::Mkdv => write!(f, "mkdv"),
        }
    }
}

/// Fully validated run description.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub equation: EquationKind,
    pub scheme: Scheme,
    pub n: usize,
    pub length: f64,
    pub dt: f64,
    pub steps: usize,
    pub h_stored: usize,
    pub radius: usize,
    pub stacking: Stacking,
    pub max_order: usize,
    pub rk4_accuracy: usize,
    pub a_param: f64,
    pub output_path: String,
    pub record_every: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub key: Option<String>,
    pub message: String,
}

impl ConfigError {
    fn keyed(key: &str, message: String) -> Self {
        ConfigError { line: None, key: Some(key.to_string()), message }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (&self.line, &self.key) {
            (Some(l), Some(k)) => write!(f, "line {l}, key `{k}`: {}", self.message),
            (Some(l), None) => write!(f, "line {l}: {}", self.message),
            (None, Some(k)) => write!(f, "key `{k}`: {}", self.message),
            (None, None) => write!(f, "{}", self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Clone, Debug, Default)]
struct Draft {
    equation: Option<EquationKind>,
    scheme: Option<Scheme>,
    n: Option<usize>,
    length: Option<f64>,
    dt: Option<f64>,
    steps: Option<usize>,
    h_stored: Option<usize>,
    radius: Option<usize>,
    stacking: Option<Stacking>,
    max_order: Option<usize>,
    rk4_accuracy: Option<usize>,
    a_param: Option<f64>,
    output_path: Option<String>,
    record_every: Option<usize>,
}

impl Draft {
    fn assign(&mut self, key: &str, value: &str, line: Option<usize>) -> Result<(), ConfigError> {
        let err = |message: String| ConfigError { line, key: Some(key.to_string()), message };
        fn parse<T: std::str::FromStr>(
            value: &str,
            mk: impl Fn(String) -> ConfigError,
        ) -> Result<T, ConfigError> {
            value.trim().parse().map_err(|_| mk(format!("malformed value `{}`", value.trim())))
        }
        match key {
            "equation" => {
                self.equation = Some(match value.trim() {
                    "wave" => EquationKind::Wave,
                    "mkdv" => EquationKind::Mkdv,
                    other => return Err(err(format!("unknown equation `{other}` (wave|mkdv)"))),
                })
            }
            "scheme" => {
                self.scheme = Some(match value.trim() {
                    "imdtm" => Scheme::Imdtm,
                    "rk4" => Scheme::Rk4,
                    other => return Err(err(format!("unknown scheme `{other}` (imdtm|rk4)"))),
                })
            }
            "N" => self.n = Some(parse(value, err)?),
            "L" => self.length = Some(parse(value, err)?),
            "dt" => self.dt = Some(parse(value, err)?),
            "steps" => self.steps = Some(parse(value, err)?),
            "H_stored" => self.h_stored = Some(parse(value, err)?),
            "radius" => self.radius = Some(parse(value, err)?),
            "stacking" => {
                self.stacking = Some(match value.trim() {
                    "none" => Stacking::None,
                    "pairs" => Stacking::Pairs,
                    other => return Err(err(format!("unknown stacking `{other}` (none|pairs)"))),
                })
            }
            "max_order" => self.max_order = Some(parse(value, err)?),
            "rk4_accuracy" => self.rk4_accuracy = Some(parse(value, err)?),
            "a_param" => self.a_param = Some(parse(value, err)?),
            "output_path" => self.output_path = Some(value.trim().to_string()),
            "record_every" => self.record_every = Some(parse(value, err)?),
            other => return Err(err(format!("unknown key `{other}`"))),
        }
        Ok(())
    }
}

/// Parse config text plus `(key, value)` overrides (CLI flags win).
pub fn parse_config(text: &str, overrides: &[(String, String)]) -> Result<RunConfig, ConfigError> {
    let mut draft = Draft::default();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let stripped = raw.split('#').next().unwrap_or("").trim();
        if stripped.is_empty() {
            continue;
        }
        let (key, value) = stripped.split_once('=').ok_or(ConfigError {
            line: Some(line),
            key: None,
            message: format!("expected `key = value`, got `{stripped}`"),
        })?;
        draft.assign(key.trim(), value, Some(line))?;
    }
    for (key, value) in overrides {
        draft.assign(key, value, None)?;
    }
    validate(draft)
}

fn validate(d: Draft) -> Result<RunConfig, ConfigError> {
    let require = |name: &str| ConfigError::keyed(name, "missing required key".into());
    let equation = d.equation.ok_or_else(|| require("equation"))?;
    let n = d.n.ok_or_else(|| require("N"))?;
    let length = d.length.ok_or_else(|| require("L"))?;
    let dt = d.dt.ok_or_else(|| require("dt"))?;
    let steps = d.steps.ok_or_else(|| require("steps"))?;
    let h_stored = d.h_stored.ok_or_else(|| require("H_stored"))?;
    let radius = d.radius.ok_or_else(|| require("radius"))?;

    let scheme = d.scheme.unwrap_or(Scheme::Imdtm);
    let stacking = d.stacking.unwrap_or(if h_stored > 2 {
        Stacking::Pairs
    } else {
        Stacking::None
    });
    let rk4_accuracy = d.rk4_accuracy.unwrap_or(8);
    let record_every = d.record_every.unwrap_or(1);
    let output_path = d.output_path.unwrap_or_else(|| "-".to_string());

    let positive = |name: &str, ok: bool| {
        if ok {
            Ok(())
        } else {
            Err(ConfigError::keyed(name, "must be positive".into()))
        }
    };
    positive("N", n > 0)?;
    positive("L", length > 0.0)?;
    positive("dt", dt > 0.0)?;
    positive("H_stored", h_stored > 0)?;
    positive("record_every", record_every > 0)?;
    if radius == 0 {
        return Err(ConfigError::keyed(
            "radius",
            "must be at least 1 (the neighborhood must include neighbors)".into(),
        ));
    }
    if n < 2 * radius + 1 {
        return Err(ConfigError::keyed(
            "radius",
            format!("neighborhood 2*radius+1 = {} exceeds N = {n}", 2 * radius + 1),
        ));
    }
    if !matches!(rk4_accuracy, 2 | 8) {
        return Err(ConfigError::keyed("rk4_accuracy", "must be 2 or 8".into()));
    }
    if stacking == Stacking::Pairs && h_stored % 2 != 0 {
        return Err(ConfigError::keyed(
            "stacking",
            format!("pairs needs an even H_stored, got {h_stored}"),
        ));
    }
    let a_param = d.a_param.unwrap_or(std::f64::consts::PI / length);
    positive("a_param", a_param > 0.0)?;

    let m = 2 * radius + 1;
    let band = if stacking == Stacking::Pairs { 2 } else { h_stored.min(2) };
    let capacity_cap = (h_stored - band) + m * band - 1;
    let max_order = d
        .max_order
        .unwrap_or_else(|| crate::evolver::default_max_order(h_stored, radius, stacking));
    if max_order > capacity_cap {
        return Err(ConfigError::keyed(
            "max_order",
            format!("exceeds interpolant capacity {capacity_cap}"),
        ));
    }

    Ok(RunConfig {
        equation,
        scheme,
        n,
        length,
        dt,
        steps,
        h_stored,
        radius,
        stacking,
        max_order,
        rk4_accuracy,
        a_param,
        output_path,
        record_every,
    })
}

impl RunConfig {
    pub fn system(&self) -> System {
        match self.equation {
            EquationKind::Wave => System::wave(self.length),
            EquationKind::Mkdv => System::mkdv(self.a_param),
        }
    }

    pub fn evolver_config(&self) -> EvolverConfig {
        EvolverConfig {
            dt: self.dt,
            steps: self.steps,
            radius: self.radius,
            h_stored: self.h_stored,
            stacking: self.stacking,
            max_order: self.max_order,
            scheme: self.scheme,
        }
    }

    /// Serialize back to config text; parsing the result reproduces `self`.
    pub fn to_text(&self) -> String {
        format!(
            "equation = {}\nscheme = {}\nN = {}\nL = {}\ndt = {}\nsteps = {}\n\
             H_stored = {}\nradius = {}\nstacking = {}\nmax_order = {}\n\
             rk4_accuracy = {}\na_param = {}\noutput_path = {}\nrecord_every = {}\n",
            self.equation,
            self.scheme,
            self.n,
            self.length,
            self.dt,
            self.steps,
            self.h_stored,
            self.radius,
            self.stacking,
            self.max_order,
            self.rk4_accuracy,
            self.a_param,
            self.output_path,
            self.record_every,
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RunOutcome {
    Completed,
    /// First step that produced non-finite coefficients.
    Diverged { step: usize },
}

fn write_record(out: &mut dyn Write, rec: &DiagnosticsRecord) -> std::io::Result<()> {
    let constraint = rec
        .constraint_err
        .map(|c| c.to_string())
        .unwrap_or_default();
    writeln!(
        out,
        "{},{},{},{},{}",
        rec.step, rec.t, rec.analytic_err, constraint, rec.wall_ms
    )
}

/// Number of point-update workers: `IMDTM_THREADS` caps it, 0 or unset means
/// a single worker per available CPU.
fn worker_count() -> usize {
    match std::env::var("IMDTM_THREADS") {
        Ok(v) => v.trim().parse().unwrap_or(0),
        Err(_) => 0,
    }
}

/// Execute a run, streaming CSV diagnostics to `out`.
pub fn run(cfg: &RunConfig, out: &mut dyn Write) -> std::io::Result<RunOutcome> {
    writeln!(out, "step,t,analytic_err,constraint_err,wall_ms")?;
    let system = cfg.system();
    match cfg.scheme {
        Scheme::Imdtm => {
            let stepper = Stepper::new(system.clone(), cfg.n, cfg.length, &cfg.evolver_config())
                .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidInput, e.to_string()))?
                .with_threads(worker_count());
            let mut grid = Grid::from_initial(&system, cfg.n, cfg.length, cfg.h_stored);
            let record = |grid: &Grid, step: usize, wall_ms: f64| DiagnosticsRecord {
                step,
                t: step as f64 * cfg.dt,
                analytic_err: analytic_error(grid, &system, step as f64 * cfg.dt),
                constraint_err: (cfg.h_stored >= 2).then(|| constraint_violation(grid)),
                wall_ms,
            };
            write_record(out, &record(&grid, 0, 0.0))?;
            for step in 1..=cfg.steps {
                let clock = Instant::now();
                match stepper.step(&grid) {
                    Ok(next) => grid = next,
                    Err(_) => return Ok(RunOutcome::Diverged { step }),
                }
                let wall_ms = clock.elapsed().as_secs_f64() * 1e3;
                if step % cfg.record_every == 0 {
                    write_record(out, &record(&grid, step, wall_ms))?;
                }
            }
        }
        Scheme::Rk4 => {
            let solver = MolSolver::new(&system, cfg.n, cfg.length, cfg.rk4_accuracy)
                .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidInput, e.to_string()))?;
            let mut state = solver.initial_state(&system);
            let record = |state: &[f64], step: usize, wall_ms: f64| DiagnosticsRecord {
                step,
                t: step as f64 * cfg.dt,
                analytic_err: analytic_error_values(
                    solver.values(state),
                    &system,
                    solver.dx(),
                    step as f64 * cfg.dt,
                ),
                constraint_err: None,
                wall_ms,
            };
            write_record(out, &record(&state, 0, 0.0))?;
            for step in 1..=cfg.steps {
                let clock = Instant::now();
                match solver.step(&state, cfg.dt) {
                    Ok(next) => state = next,
                    Err(_) => return Ok(RunOutcome::Diverged { step }),
                }
                let wall_ms = clock.elapsed().as_secs_f64() * 1e3;
                if step % cfg.record_every == 0 {
                    write_record(out, &record(&state, step, wall_ms))?;
                }
            }
        }
    }
    Ok(RunOutcome::Completed)
}

/// Run with output routed to `output_path` (`-` = stdout). Returns the
/// process exit code: 0 complete, 1 I/O failure, 2 diverged (partial CSV is
/// kept).
pub fn run_to_path(cfg: &RunConfig) -> i32 {
    let outcome = if cfg.output_path == "-" {
        let stdout = std::io::stdout();
        run(cfg, &mut stdout.lock())
    } else {
        match std::fs::File::create(&cfg.output_path) {
            Ok(mut file) => run(cfg, &mut file),
            Err(e) => {
                eprintln!("cannot write `{}`: {e}", cfg.output_path);
                return 1;
            }
        }
    };
    match outcome {
        Ok(RunOutcome::Completed) => 0,
        Ok(RunOutcome::Diverged { step }) => {
            eprintln!("run diverged at step {step}; partial diagnostics kept");
            2
        }
        Err(e) => {
            eprintln!("I/O error: {e}");
            1
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const FIG_CONFIG: &str =
        "equation = wave\nN = 16\nL = 18\ndt = 1\nsteps = 100\nH_stored = 14\nradius = 5\n";

    #[test]
    fn parses_the_stacked_wave_experiment() {
        let cfg = parse_config(FIG_CONFIG, &[]).unwrap();
        assert_eq!(cfg.equation, EquationKind::Wave);
        assert_eq!((cfg.n, cfg.length, cfg.dt), (16, 18.0, 1.0));
        assert_eq!(cfg.h_stored, 14);
        assert_eq!(cfg.radius, 5);
        assert_eq!(cfg.stacking, Stacking::Pairs); // default for H_stored > 2
        assert_eq!(cfg.max_order, 26); // default: stored top + 13, inside capacity
        assert_eq!(cfg.record_every, 1);
        assert_eq!(cfg.scheme, Scheme::Imdtm);
    }

    #[test]
    fn flags_only_and_overrides() {
        let flags: Vec<(String, String)> = [
            ("equation", "mkdv"),
            ("N", "78"),
            ("L", "43.875"),
            ("dt", "0.001"),
            ("steps", "10"),
            ("H_stored", "2"),
            ("radius", "5"),
            ("max_order", "17"),
        ]
        .iter()
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect();
        let cfg = parse_config("", &flags).unwrap();
        assert_eq!(cfg.equation, EquationKind::Mkdv);
        assert_eq!(cfg.max_order, 17);
        assert!((cfg.a_param - std::f64::consts::PI / 43.875).abs() < 1e-15);

        // flags override file values
        let over = vec![("radius".to_string(), "3".to_string())];
        let cfg = parse_config(FIG_CONFIG, &over).unwrap();
        assert_eq!(cfg.radius, 3);
    }

    #[test]
    fn rejects_bad_input_with_context() {
        let err = parse_config("equation = wave\nbogus = 3\n", &[]).unwrap_err();
        assert_eq!(err.line, Some(2));
        assert_eq!(err.key.as_deref(), Some("bogus"));

        let err = parse_config(&FIG_CONFIG.replace("radius = 5", "radius = 0"), &[]).unwrap_err();
        assert_eq!(err.key.as_deref(), Some("radius"));

        let err = parse_config(&FIG_CONFIG.replace("dt = 1", "dt = wat"), &[]).unwrap_err();
        assert!(err.message.contains("malformed"));
        assert_eq!(err.line, Some(4));

        // capacity violation
        let err = parse_config(
            &format!("{FIG_CONFIG}max_order = 40\n"),
            &[],
        )
        .unwrap_err();
        assert_eq!(err.key.as_deref(), Some("max_order"));
    }

    #[test]
    fn comments_and_blank_lines_ignored() {
        let text = "# experiment\n\nequation = wave # standing wave\nN = 16\nL = 18\n\
                    dt = 1\nsteps = 1\nH_stored = 1\nradius = 1\n";
        let cfg = parse_config(text, &[]).unwrap();
        assert_eq!(cfg.h_stored, 1);
        assert_eq!(cfg.stacking, Stacking::None);
        assert_eq!(cfg.max_order, 2); // capacity of a 3-point value-only fit
    }

    #[test]
    fn config_text_round_trip() {
        let cfg = parse_config(FIG_CONFIG, &[]).unwrap();
        let reparsed = parse_config(&cfg.to_text(), &[]).unwrap();
        assert_eq!(cfg, reparsed);
    }

    #[test]
    fn zero_step_run_emits_exact_initial_row() {
        let text = "equation = wave\nN = 16\nL = 18\ndt = 1\nsteps = 0\nH_stored = 2\nradius = 3\n";
        let cfg = parse_config(text, &[]).unwrap();
        let mut buf = Vec::new();
        let outcome = run(&cfg, &mut buf).unwrap();
        assert_eq!(outcome, RunOutcome::Completed);
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 2);
        assert_eq!(lines[0], "step,t,analytic_err,constraint_err,wall_ms");
        let fields: Vec<&str> = lines[1].split(',').collect();
        assert_eq!(fields[0], "0");
        assert_eq!(fields[1], "0");
        let analytic: f64 = fields[2].parse().unwrap();
        assert!(analytic <= -10.0, "initialization error {analytic}");
        let constraint: f64 = fields[3].parse().unwrap();
        assert!(constraint <= -3.0);
    }

    #[test]
    fn rk4_rows_leave_constraint_empty() {
        let text = "equation = wave\nscheme = rk4\nN = 32\nL = 18\ndt = 0.05\nsteps = 4\n\
                    H_stored = 1\nradius = 1\nrk4_accuracy = 2\nrecord_every = 2\n";
        let cfg = parse_config(text, &[]).unwrap();
        let mut buf = Vec::new();
        run(&cfg, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        // header + t=0 + steps 2 and 4
        assert_eq!(lines.len(), 4);
        for line in &lines[1..] {
            let fields: Vec<&str> = line.split(',').collect();
            assert_eq!(fields.len(), 5);
            assert!(fields[3].is_empty());
        }
    }
}
