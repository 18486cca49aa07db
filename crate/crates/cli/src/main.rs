//! `dnls`: symbol tables, lifespan prediction, simulations, profile ODE runs and the
//! self-check suite, each driven by a JSON config and writing into one output directory.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use dnls_core::analysis::{compute_e, predict_tau0, profile_ode_consistency};
use dnls_core::nonlinearity::ComplexValue;
use dnls_core::profile_ode::{
    blowup_time, bound_trial, integrate_perturbed_log, solve_unperturbed_log, write_trial_reports, BoundTrialConfig,
    IntegrateOptions, OdeProblem, Sampling, Symbol,
};
use dnls_core::solver::{self, DatumSpec, RunFlag, SolverConfig};
use dnls_core::spectral::{fmt_f64, g_at, GridSpec};
use dnls_core::verify::{run_suite, VerifyConfig};
use dnls_core::{defaults, Complex64, CubicNonlinearity, Error, Grid};

#[derive(Parser)]
#[command(name = "dnls", version, about = "Cubic derivative NLS: lifespan prediction and simulation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Tabulate the symbol ν(ξ) with a quadrature cross-check.
    Nu(Common),
    /// Predict the lifespan constant τ̃₀ of a datum.
    Lifespan(Common),
    /// Run the pseudo-spectral solver.
    Simulate(Common),
    /// Integrate the reduced profile ODE.
    Ode(Common),
    /// Run the self-check suite; exits 4 on any failure.
    Verify(Common),
}

#[derive(Args, Clone)]
struct Common {
    /// JSON config; `verify` falls back to its built-in defaults without one.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory, created atomically; must not exist or be empty.
    #[arg(long)]
    out: PathBuf,
    /// Seed for randomized suites (overrides the config).
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; defaults to all cores.
    #[arg(long)]
    workers: Option<usize>,
}

/// How a command failed, mapped onto the exit codes 2, 3 and 4.
#[derive(Debug)]
enum Failure {
    Config(String),
    Numerical(String),
    Verification(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 2,
            Failure::Numerical(_) => 3,
            Failure::Verification(_) => 4,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Config(m) => write!(f, "config error: {m}"),
            Failure::Numerical(m) => write!(f, "numerical failure: {m}"),
            Failure::Verification(m) => write!(f, "verification failed: {m}"),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config { .. } | Error::WeakCondition(_) | Error::Json(_) => Failure::Config(e.to_string()),
            _ => Failure::Numerical(e.to_string()),
        }
    }
}

fn io_failure(what: &str, e: impl std::fmt::Display) -> Failure {
    Failure::Numerical(format!("{what}: {e}"))
}

type Outcome<T> = Result<T, Failure>;

/// Parses a config, reporting the path of the offending field.
fn load<T: DeserializeOwned>(path: &Path) -> Outcome<T> {
    let text = fs::read_to_string(path).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
    let de = &mut serde_json::Deserializer::from_str(&text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let field = e.path().to_string();
        Failure::Config(format!("{}: field `{field}`: {}", path.display(), e.inner()))
    })
}

fn require_config(c: &Common) -> Outcome<&Path> {
    c.config.as_deref().ok_or_else(|| Failure::Config("--config is required for this command".into()))
}

/// A scratch directory next to `out` that is renamed into place once complete.
struct Staging {
    dir: tempfile::TempDir,
    out: PathBuf,
}

impl Staging {
    fn new(out: &Path) -> Outcome<Self> {
        if out.exists() {
            let empty = fs::read_dir(out).map(|mut d| d.next().is_none()).unwrap_or(false);
            if !empty {
                return Err(Failure::Config(format!("output directory {} exists and is not empty", out.display())));
            }
        }
        let parent = match out.parent() {
            Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
            _ => PathBuf::from("."),
        };
        fs::create_dir_all(&parent).map_err(|e| Failure::Config(format!("{}: {e}", parent.display())))?;
        let dir = tempfile::Builder::new()
            .prefix(".dnls-")
            .tempdir_in(&parent)
            .map_err(|e| Failure::Config(format!("{}: {e}", parent.display())))?;
        Ok(Self { dir, out: out.to_path_buf() })
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn write_json<T: Serialize>(&self, name: &str, v: &T) -> Outcome<()> {
        let text = serde_json::to_string_pretty(v).map_err(|e| io_failure(name, e))?;
        self.write_text(name, &(text + "\n"))
    }

    fn write_text(&self, name: &str, text: &str) -> Outcome<()> {
        fs::write(self.path(name), text).map_err(|e| io_failure(name, e))
    }

    fn commit(self) -> Outcome<()> {
        if self.out.exists() {
            fs::remove_dir(&self.out).map_err(|e| io_failure("output directory", e))?;
        }
        let tmp = self.dir.keep();
        fs::rename(&tmp, &self.out).map_err(|e| {
            let _ = fs::remove_dir_all(&tmp);
            io_failure("output directory", e)
        })
    }
}

#[derive(Serialize)]
struct RunManifest<'a, C: Serialize> {
    command: &'a str,
    config_path: Option<&'a Path>,
    out: &'a Path,
    seed: Option<u64>,
    workers: usize,
    version: &'a str,
    resolved_config: &'a C,
}

fn write_manifest<C: Serialize>(st: &Staging, command: &str, c: &Common, seed: Option<u64>, cfg: &C) -> Outcome<()> {
    st.write_json(
        "manifest.json",
        &RunManifest {
            command,
            config_path: c.config.as_deref(),
            out: &c.out,
            seed,
            workers: rayon::current_num_threads(),
            version: env!("CARGO_PKG_VERSION"),
            resolved_config: cfg,
        },
    )
}

// --- nu -----------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NuConfig {
    #[serde(default)]
    nonlinearity: CubicNonlinearity,
    #[serde(default = "default_xi_min")]
    xi_min: f64,
    #[serde(default = "default_xi_max")]
    xi_max: f64,
    #[serde(default = "default_nu_points")]
    points: usize,
    #[serde(default = "default_quadrature_nodes")]
    quadrature_nodes: usize,
}

fn default_xi_min() -> f64 {
    -8.0
}
fn default_xi_max() -> f64 {
    8.0
}
fn default_nu_points() -> usize {
    257
}
fn default_quadrature_nodes() -> usize {
    64
}

fn cmd_nu(c: &Common) -> Outcome<()> {
    let cfg: NuConfig = load(require_config(c)?)?;
    if !(cfg.xi_min.is_finite() && cfg.xi_max.is_finite() && cfg.xi_min < cfg.xi_max) {
        return Err(Failure::Config("field `xi_min`/`xi_max`: need finite xi_min < xi_max".into()));
    }
    if cfg.points < 2 {
        return Err(Failure::Config("field `points`: need at least 2".into()));
    }
    let st = Staging::new(&c.out)?;
    write_manifest(&st, "nu", c, None, &cfg)?;
    let n = cfg.nonlinearity;
    let mut w = csv::Writer::from_path(st.path("nu.csv")).map_err(|e| io_failure("nu.csv", e))?;
    w.write_record(["xi", "re", "im", "residual"]).map_err(|e| io_failure("nu.csv", e))?;
    let mut worst = 0.0f64;
    for i in 0..cfg.points {
        let xi = cfg.xi_min + (cfg.xi_max - cfg.xi_min) * i as f64 / (cfg.points - 1) as f64;
        let v = n.nu(xi);
        let r = (n.nu_quadrature(xi, cfg.quadrature_nodes)? - v).norm();
        worst = worst.max(r);
        w.write_record([fmt_f64(xi), fmt_f64(v.re), fmt_f64(v.im), fmt_f64(r)]).map_err(|e| io_failure("nu.csv", e))?;
    }
    w.flush().map_err(|e| io_failure("nu.csv", e))?;
    st.commit()?;
    println!("ν tabulated at {} points; max quadrature residual {worst:.3e}", cfg.points);
    Ok(())
}

// --- lifespan -----------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LifespanConfig {
    #[serde(default)]
    grid: GridSpec,
    #[serde(default)]
    datum: DatumSpec,
    #[serde(default)]
    nonlinearity: CubicNonlinearity,
}

fn cmd_lifespan(c: &Common) -> Outcome<()> {
    let path = require_config(c)?;
    let mut cfg: LifespanConfig = load(path)?;
    cfg.datum.resolve_paths(path.parent().unwrap_or(Path::new(".")));
    let grid = Grid::from_spec(&cfg.grid)?;
    let phi = cfg.datum.sample(&grid)?;
    let rep = predict_tau0(&phi, &cfg.nonlinearity)?;
    let st = Staging::new(&c.out)?;
    write_manifest(&st, "lifespan", c, None, &cfg)?;
    st.write_json("lifespan.json", &rep)?;
    st.commit()?;
    println!("tau0 = {}", dnls_core::extended::display(rep.tau0));
    println!("regime = {}", serde_json::to_value(rep.regime).unwrap_or_default().as_str().unwrap_or("?"));
    Ok(())
}

// --- simulate -----------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum Expect {
    Completed,
    Blowup,
    ResolutionLoss,
    Any,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConsistencySpec {
    xi: f64,
    #[serde(default = "default_window")]
    window: (f64, f64),
}

fn default_window() -> (f64, f64) {
    defaults::COMPARISON_WINDOW
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SimulateConfig {
    solver: SolverConfig,
    /// Outcome that counts as success; anything else exits 3.
    #[serde(default = "default_expect")]
    expect: Expect,
    /// Weight of the `E` functional; `e_functional.csv` is written when present.
    #[serde(default)]
    gamma: Option<f64>,
    /// Profile ODE comparison at a probe frequency.
    #[serde(default)]
    consistency: Option<ConsistencySpec>,
}

fn default_expect() -> Expect {
    Expect::Completed
}

fn cmd_simulate(c: &Common) -> Outcome<()> {
    let path = require_config(c)?;
    let mut cfg: SimulateConfig = load(path)?;
    cfg.solver.datum.resolve_paths(path.parent().unwrap_or(Path::new(".")));
    if let Some(cs) = &cfg.consistency {
        if !cfg.solver.probe_xi.iter().any(|x| x == &cs.xi) {
            cfg.solver.probe_xi.push(cs.xi);
        }
    }
    cfg.solver = cfg.solver.resolved();
    cfg.solver.validate()?;
    if let Some(g) = cfg.gamma {
        if !(g > 0.0 && g < 1.0 / 12.0) {
            return Err(Failure::Config(format!("field `gamma`: must lie in (0, 1/12), got {g}")));
        }
    }
    let st = Staging::new(&c.out)?;
    write_manifest(&st, "simulate", c, None, &cfg)?;
    let tr = solver::run(&cfg.solver)?;
    tr.write_diagnostics_csv(&st.path("diagnostics.csv"))?;
    tr.write_summary_json(&st.path("summary.json"))?;
    tr.final_state.write_csv(&st.path("final_state.csv"))?;
    if !tr.snapshots.is_empty() {
        fs::create_dir(st.path("snapshots")).map_err(|e| io_failure("snapshots", e))?;
        for (i, s) in tr.snapshots.iter().enumerate() {
            s.write_csv(&st.path(&format!("snapshots/{i:04}.csv")))?;
        }
    }
    if let Some(g) = cfg.gamma {
        compute_e(&tr, g)?.write_csv(&st.path("e_functional.csv"))?;
    }
    if let Some(cs) = &cfg.consistency {
        match profile_ode_consistency(&tr, &cfg.solver.nonlinearity, cs.xi, cs.window) {
            Ok(rep) => st.write_json("consistency.json", &rep)?,
            Err(e) => log::warn!("profile comparison skipped: {e}"),
        }
    }
    st.commit()?;
    println!("{}", solver::describe(&tr.summary));
    let ok = match cfg.expect {
        Expect::Any => true,
        Expect::Completed => tr.summary.flag == RunFlag::Completed,
        Expect::Blowup => tr.summary.flag == RunFlag::Blowup,
        Expect::ResolutionLoss => tr.summary.flag == RunFlag::ResolutionLoss,
    };
    if ok {
        Ok(())
    } else {
        Err(Failure::Numerical(format!(
            "run ended {:?} at t = {}, expected {:?}",
            tr.summary.flag, tr.summary.t_observed, cfg.expect
        )))
    }
}

// --- ode ----------------------------------------------------------------------

/// Either constant `κ, θ₀` or the reduced problem of a nonlinearity and datum.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct OdeConfig {
    epsilon: f64,
    #[serde(default)]
    kappa: Option<ComplexValue>,
    #[serde(default)]
    theta0: Option<ComplexValue>,
    #[serde(default)]
    nonlinearity: Option<CubicNonlinearity>,
    #[serde(default)]
    datum: Option<DatumSpec>,
    #[serde(default)]
    grid: GridSpec,
    #[serde(default = "default_ode_xi")]
    xi: Vec<f64>,
    /// End time; defaults to `blowup_fraction · t_b` for constant coefficients.
    #[serde(default)]
    t_end: Option<f64>,
    #[serde(default = "default_blowup_fraction")]
    blowup_fraction: f64,
    #[serde(default = "default_ode_tol")]
    tol: f64,
    #[serde(default = "default_output_points")]
    output_points: usize,
}

fn default_ode_xi() -> Vec<f64> {
    vec![0.0]
}
fn default_blowup_fraction() -> f64 {
    0.9
}
fn default_ode_tol() -> f64 {
    defaults::ODE_TOL
}
fn default_output_points() -> usize {
    64
}

#[derive(Serialize)]
struct OdeSummary {
    epsilon: f64,
    #[serde(with = "dnls_core::extended")]
    t_blowup: f64,
    log_t_end: f64,
    steps: usize,
    sup_abs: f64,
    /// Largest relative deviation from the closed form (constant coefficients only).
    closed_form_error: Option<f64>,
}

/// Randomized checks of the perturbed bound: `{"trials": {"count": 200}}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TrialsDoc {
    trials: TrialsSpec,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TrialsSpec {
    count: usize,
    #[serde(default)]
    seed: u64,
    #[serde(default)]
    settings: BoundTrialConfig,
}

#[derive(Serialize)]
struct TrialsSummary {
    trials: usize,
    violations: usize,
    worst_ratio: f64,
}

fn cmd_ode_trials(c: &Common, path: &Path) -> Outcome<()> {
    let mut doc: TrialsDoc = load(path)?;
    if let Some(s) = c.seed {
        doc.trials.seed = s;
    }
    let spec = &doc.trials;
    let st = Staging::new(&c.out)?;
    write_manifest(&st, "ode", c, Some(spec.seed), &doc)?;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(spec.seed);
    let reports = (0..spec.count).map(|i| bound_trial(i, &mut rng, &spec.settings)).collect::<Result<Vec<_>, _>>()?;
    write_trial_reports(&st.path("trials.jsonl"), &reports)?;
    let summary = TrialsSummary {
        trials: reports.len(),
        violations: reports.iter().filter(|r| !r.holds).count(),
        worst_ratio: reports.iter().map(|r| r.observed_sup / r.bound.bound).fold(0.0, f64::max),
    };
    st.write_json("trials_summary.json", &summary)?;
    st.commit()?;
    println!(
        "{} trials, {} violations, worst sup/bound {:.4}",
        summary.trials, summary.violations, summary.worst_ratio
    );
    if summary.violations == 0 {
        Ok(())
    } else {
        Err(Failure::Verification(format!("{} trials violate the bound", summary.violations)))
    }
}

fn cmd_ode(c: &Common) -> Outcome<()> {
    let path = require_config(c)?;
    let is_trials = fs::read_to_string(path)
        .ok()
        .and_then(|t| serde_json::from_str::<serde_json::Value>(&t).ok())
        .is_some_and(|v| v.get("trials").is_some());
    if is_trials {
        return cmd_ode_trials(c, path);
    }
    let mut cfg: OdeConfig = load(path)?;
    if !(cfg.epsilon > 0.0 && cfg.epsilon.is_finite()) {
        return Err(Failure::Config(format!("field `epsilon`: must be positive, got {}", cfg.epsilon)));
    }
    if !(cfg.blowup_fraction > 0.0 && cfg.blowup_fraction < 1.0) {
        return Err(Failure::Config("field `blowup_fraction`: must lie in (0, 1)".into()));
    }
    let sampling = Sampling::default();
    let (problem, constant) = match (cfg.kappa, cfg.theta0, cfg.nonlinearity, cfg.datum.as_mut()) {
        (Some(k), Some(t), None, None) => {
            let (k, t) = (Complex64::from(k), Complex64::from(t));
            let ks: Symbol = Arc::new(move |_| k);
            let ts: Symbol = Arc::new(move |_| t);
            (OdeProblem::unperturbed(ks, ts, cfg.epsilon, &sampling), Some((k, t)))
        }
        (None, None, Some(n), Some(d)) => {
            d.resolve_paths(path.parent().unwrap_or(Path::new(".")));
            let grid = Grid::from_spec(&cfg.grid)?;
            let phi = d.sample(&grid)?;
            let phi_hat: Symbol = Arc::new(move |xi| g_at(&phi, xi));
            (OdeProblem::from_nonlinearity(&n, phi_hat, cfg.epsilon, &sampling), None)
        }
        _ => {
            return Err(Failure::Config(
                "field `kappa`/`theta0`/`nonlinearity`/`datum`: give either kappa and theta0, or nonlinearity and datum".into(),
            ))
        }
    };
    let t_b = constant.map_or(f64::INFINITY, |(k, t)| blowup_time(k, t, cfg.epsilon));
    let log_t_end = match cfg.t_end {
        Some(t) if t > 1.0 && t.is_finite() => t.ln(),
        Some(t) => return Err(Failure::Config(format!("field `t_end`: must exceed 1, got {t}"))),
        None if t_b.is_finite() => t_b.ln() + cfg.blowup_fraction.ln(),
        None if constant.is_some() => {
            // t_b overflows f64; work with log t_b = 1/(2ε²|θ₀|² Im κ) directly.
            let (k, t) = constant.unwrap();
            let g = 2.0 * cfg.epsilon * cfg.epsilon * t.norm_sqr() * k.im;
            if g > 0.0 {
                1.0 / g + cfg.blowup_fraction.ln()
            } else {
                return Err(Failure::Config("field `t_end`: required when there is no blow-up".into()));
            }
        }
        None => return Err(Failure::Config("field `t_end`: required for a nonlinearity and datum".into())),
    };
    cfg.t_end = Some(log_t_end.exp());
    let opts = IntegrateOptions {
        tol: cfg.tol,
        output_log_times: None,
        output_points: cfg.output_points,
        ceiling_factor: defaults::ODE_CEILING_FACTOR,
    };
    let st = Staging::new(&c.out)?;
    write_manifest(&st, "ode", c, None, &cfg)?;
    let traj = integrate_perturbed_log(&problem, &cfg.xi, log_t_end, &opts)?;
    traj.write_csv(&st.path("profile.csv"))?;
    let mut closed_form_error = None;
    if let Some((k, t)) = constant {
        let mut w = csv::Writer::from_path(st.path("closed_form.csv")).map_err(|e| io_failure("closed_form.csv", e))?;
        w.write_record(["t", "abs_numeric", "abs_closed_form", "relative_error"])
            .map_err(|e| io_failure("closed_form.csv", e))?;
        let mut worst = 0.0f64;
        for (i, &lt) in traj.log_times.iter().enumerate() {
            let want = solve_unperturbed_log(k, t, cfg.epsilon, lt)?;
            let got = traj.beta[0][i];
            let rel = (got - want).norm() / want.norm();
            worst = worst.max(rel);
            w.write_record([fmt_f64(lt.exp()), fmt_f64(got.norm()), fmt_f64(want.norm()), fmt_f64(rel)])
                .map_err(|e| io_failure("closed_form.csv", e))?;
        }
        w.flush().map_err(|e| io_failure("closed_form.csv", e))?;
        closed_form_error = Some(worst);
    }
    let summary = OdeSummary {
        epsilon: cfg.epsilon,
        t_blowup: t_b,
        log_t_end,
        steps: traj.steps.iter().sum(),
        sup_abs: traj.sup_over_all(),
        closed_form_error,
    };
    st.write_json("ode.json", &summary)?;
    st.commit()?;
    println!(
        "integrated {} node(s) to log t = {log_t_end:.6}; sup|β| = {:.6e}",
        cfg.xi.len(),
        summary.sup_abs
    );
    if let Some(e) = closed_form_error {
        println!("max relative deviation from the closed form: {e:.3e}");
    }
    Ok(())
}

// --- verify -------------------------------------------------------------------

fn cmd_verify(c: &Common) -> Outcome<()> {
    let mut cfg: VerifyConfig = match &c.config {
        Some(p) => load(p)?,
        None => VerifyConfig::default(),
    };
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    if let Some(k) = cfg.only.iter().find(|k| !(1..=12).contains(*k)) {
        return Err(Failure::Config(format!("field `only`: no criterion {k}")));
    }
    let st = Staging::new(&c.out)?;
    write_manifest(&st, "verify", c, Some(cfg.seed), &cfg)?;
    let report = run_suite(&cfg);
    let lines = report.lines();
    for l in &lines {
        println!("{l}");
    }
    st.write_text("verify.txt", &(lines.join("\n") + "\n"))?;
    st.write_text("verify.json", &(report.to_stable_json()? + "\n"))?;
    st.commit()?;
    if report.passed {
        Ok(())
    } else {
        let failed: Vec<String> =
            report.criteria.iter().filter(|r| !r.passed).map(|r| r.criterion.to_string()).collect();
        Err(Failure::Verification(format!("criteria {}", failed.join(", "))))
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let (name, common) = match &cli.command {
        Command::Nu(c) => ("nu", c),
        Command::Lifespan(c) => ("lifespan", c),
        Command::Simulate(c) => ("simulate", c),
        Command::Ode(c) => ("ode", c),
        Command::Verify(c) => ("verify", c),
    };
    if let Some(w) = common.workers {
        if w == 0 {
            eprintln!("dnls {name}: config error: --workers must be positive");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(w).build_global() {
            log::warn!("worker pool not configured: {e}");
        }
    }
    let result = match &cli.command {
        Command::Nu(c) => cmd_nu(c),
        Command::Lifespan(c) => cmd_lifespan(c),
        Command::Simulate(c) => cmd_simulate(c),
        Command::Ode(c) => cmd_ode(c),
        Command::Verify(c) => cmd_verify(c),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("dnls {name}: {f}");
            ExitCode::from(f.code())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn errors_map_to_exit_codes() {
        assert_eq!(Failure::from(Error::Domain("x".into())).code(), 3);
        assert_eq!(Failure::from(Error::BlowUp { t: 1.0, magnitude: 2.0 }).code(), 3);
        let bad: Result<SimulateConfig, _> = serde_json::from_str("{}");
        assert_eq!(Failure::from(Error::from(bad.unwrap_err())).code(), 2);
        assert_eq!(Failure::Verification(String::new()).code(), 4);
    }

    #[test]
    fn staging_refuses_non_empty_directories() {
        let tmp = tempfile::tempdir().unwrap();
        fs::write(tmp.path().join("x"), "1").unwrap();
        assert!(matches!(Staging::new(tmp.path()), Err(Failure::Config(_))));
        let out = tmp.path().join("run");
        let st = Staging::new(&out).unwrap();
        st.write_text("a.txt", "hi").unwrap();
        assert!(!out.exists());
        st.commit().unwrap();
        assert_eq!(fs::read_to_string(out.join("a.txt")).unwrap(), "hi");
    }
}
