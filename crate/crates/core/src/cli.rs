//! Command-line front end. Exit codes: 0 success, 2 configuration error, 3 numeric failure.

use crate::basis::{default_half_width, write_wavefunction, Grid};
use crate::classical::tanh_profile_rho;
use crate::config::RunConfig;
use crate::error::Error;
use crate::pipeline::{oracle_compare, solve_classical, Numerics, Pipeline};
use crate::profiles::{make_tanh_frequency, validate_asymptotics, ScalarProfile, Scenario};
use crate::smatrix::{lambda_tilde, w00_closed_form, ExponentVariant};
use clap::{Parser, Subcommand};
use rayon::prelude::*;
use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

#[derive(Debug, Parser)]
#[command(name = "anharmonic", version, about = "Transition probabilities of a nonstationary anharmonic oscillator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// TOML configuration file
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory (overrides `outputs.dir`)
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads (default: all cores)
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[arg(long, short, global = true)]
    pub verbose: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Classical trajectory and scattering parameters
    Classical,
    /// Full first-order transition table
    Transitions,
    /// Closed-form W00 surface over (lambda_tilde, rho)
    Fig1,
    /// Both exponent conventions against the TDSE
    OracleCompare,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Self::Classical => "classical",
            Self::Transitions => "transitions",
            Self::Fig1 => "fig1",
            Self::OracleCompare => "oracle-compare",
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => 2,
            Self::Numeric(_) => 3,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidParameter(_) | Error::InvalidSpan(_) | Error::Domain(_) | Error::Capacity(_) => Self::Config(e.to_string()),
            _ => Self::Numeric(e.to_string()),
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

/// Parses `args` (including the program name), runs, returns the exit code.
pub fn run_from_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn run(cli: &Cli) -> CliResult<()> {
    let path = cli.config.as_ref().ok_or_else(|| CliError::Config("--config PATH is required".into()))?;
    let (cfg, hash) = RunConfig::load(path)?;
    let dir = cli.out.clone().unwrap_or_else(|| cfg.outputs.dir.clone());
    std::fs::create_dir_all(&dir).map_err(|e| CliError::Config(format!("cannot create {}: {e}", dir.display())))?;
    let ctx = Context {
        cfg,
        dir,
        hash,
        command: cli.command,
        verbose: cli.verbose,
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads.unwrap_or(0))
        .build()
        .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    pool.install(|| match cli.command {
        Command::Classical => cmd_classical(&ctx),
        Command::Transitions => cmd_transitions(&ctx),
        Command::Fig1 => cmd_fig1(&ctx),
        Command::OracleCompare => cmd_oracle_compare(&ctx),
    })
}

struct Context {
    cfg: RunConfig,
    dir: PathBuf,
    hash: u64,
    command: Command,
    verbose: bool,
}

impl Context {
    fn log(&self, msg: impl AsRef<str>) {
        if self.verbose {
            eprintln!("[{}] {}", self.command.name(), msg.as_ref());
        }
    }

    /// CSV file with `#` metadata lines.
    fn csv(&self, name: &str, extra: &[String]) -> CliResult<BufWriter<File>> {
        let path = self.dir.join(name);
        let f = File::create(&path).map_err(|e| io_err(&path, e))?;
        let mut w = BufWriter::new(f);
        let mut meta = vec![
            format!("anharmonic {}", env!("CARGO_PKG_VERSION")),
            format!("command {}", self.command.name()),
            format!("config-hash {:016x}", self.hash),
        ];
        meta.extend_from_slice(extra);
        for m in meta {
            writeln!(w, "# {m}").map_err(|e| io_err(&path, e))?;
        }
        Ok(w)
    }

    fn write<F>(&self, name: &str, extra: &[String], body: F) -> CliResult<()>
    where
        F: FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
    {
        let mut w = self.csv(name, extra)?;
        body(&mut w).and_then(|_| w.flush()).map_err(|e| io_err(&self.dir.join(name), e))
    }
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Config(format!("cannot write {}: {e}", path.display()))
}

fn cmd_classical(ctx: &Context) -> CliResult<()> {
    let cfg = &ctx.cfg;
    let (sol, p) = solve_classical(&cfg.scenario, &cfg.numerics)?;
    let report = validate_asymptotics(&cfg.scenario, 1e-8, 5.0)?;
    ctx.log(format!("asymptotic deviation {:.3e} (pass: {})", report.max_deviation(), report.pass()));
    if cfg.outputs.trajectory {
        ctx.write("trajectory.csv", &[], |w| sol.write_trajectory(w))?;
    }
    let rows = [
        ("omega_in", p.omega_in),
        ("omega_out", p.omega_out),
        ("rho", p.rho),
        ("re_c1", p.c1.re),
        ("im_c1", p.c1.im),
        ("re_c2", p.c2.re),
        ("im_c2", p.c2.im),
        ("delta1", p.delta1),
        ("delta2", p.delta2),
        ("re_d_plus", p.d_plus.re),
        ("im_d_plus", p.d_plus.im),
        ("nu", p.nu),
        ("beta_phase", p.beta_phase),
        ("theta", p.theta),
        ("kbar0", p.kbar0),
        ("wronskian_norm", p.wronskian_norm),
        ("fit_residual", p.fit_residual),
        ("max_wronskian_drift", sol.max_wronskian_drift),
    ];
    ctx.write("scattering.csv", &[], |w| {
        writeln!(w, "name,value")?;
        for (k, v) in rows {
            writeln!(w, "{k},{v:.16e}")?;
        }
        Ok(())
    })?;
    println!("rho = {}", p.rho);
    println!("nu = {}", p.nu);
    println!("theta = {}", p.theta);
    println!("kbar0 = {}", p.kbar0);
    Ok(())
}

fn cmd_transitions(ctx: &Context) -> CliResult<()> {
    let cfg = &ctx.cfg;
    let s = &cfg.scenario;
    let pipe = Pipeline::run(s, &cfg.numerics)?;
    let t = &pipe.table;
    ctx.log(format!("S0 via {}, rho = {}", t.method.label(), pipe.params.rho));
    let meta = [
        format!("lambda {}", t.lambda),
        format!("variant {:?}", t.variant),
        format!("convention {:?}", cfg.numerics.convention),
        format!("rho {:.16e}", pipe.params.rho),
    ];
    ctx.write("transitions.csv", &meta, |w| t.write_csv(w))?;
    if cfg.outputs.trajectory {
        ctx.write("trajectory.csv", &[], |w| pipe.classical.write_trajectory(w))?;
    }
    if cfg.outputs.coefficients {
        for a in &pipe.amplitudes {
            ctx.write(&format!("coefficients_n{}.csv", a.n), &[], |w| a.write_coefficients(w))?;
        }
    }
    if !cfg.outputs.snapshots.is_empty() {
        let grid = Grid::new(default_half_width(&pipe.classical, s.n_in), cfg.numerics.grid_points)?;
        let xs = grid.points();
        for (i, &tau) in cfg.outputs.snapshots.iter().enumerate() {
            let psi = pipe.in_state(s.n_in, s.lambda, &xs, tau)?;
            ctx.write(&format!("snapshot_{i}.csv"), &[format!("tau {tau:.16e}"), format!("n {}", s.n_in)], |w| write_wavefunction(w, &xs, &psi))?;
        }
    }
    let flagged = t.flags.iter().flatten().filter(|f| f.indeterminate || f.out_of_bounds).count();
    println!("W00 = {}", t.w[0][0]);
    println!("flagged entries = {flagged}");
    Ok(())
}

/// Tanh ramp time giving reflection coefficient `rho` between the two frequencies.
pub fn realize_ramp_time(omega_in: f64, omega_out: f64, rho: f64) -> Option<f64> {
    let sudden = tanh_profile_rho(omega_in, omega_out, 0.0);
    if !(rho > 0.0 && rho < sudden) {
        return None;
    }
    // rho(T) decreases monotonically in T
    let (mut lo, mut hi) = (0.0, 1.0);
    while tanh_profile_rho(omega_in, omega_out, hi) > rho {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if tanh_profile_rho(omega_in, omega_out, mid) > rho {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    Some(0.5 * (lo + hi))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Fig1Row {
    pub lambda_tilde: f64,
    pub rho: f64,
    pub w00_closed: f64,
    pub w00_closed_double: f64,
    pub w00_pipeline: Option<f64>,
    pub rho_realized: Option<f64>,
    /// Entry flags of the pipeline value (empty when clean or not realized).
    pub pipeline_flags: String,
    /// Closed form did not increase from the previous `lambda_tilde` at this `rho`.
    pub monotone: bool,
}

/// Closed-form surface (reference single exponent plus the doubled one),
/// optionally realized through the pipeline.
pub fn fig1_rows(cfg: &RunConfig, realize: bool) -> Result<Vec<Fig1Row>, Error> {
    let sw = &cfg.sweep;
    let per_rho: Vec<(Option<Pipeline>, f64)> = sw
        .rho
        .par_iter()
        .map(|&rho| {
            if !realize {
                return Ok((None, rho));
            }
            match realized_scenario(&cfg.scenario, rho)? {
                Some(s) => {
                    let num = Numerics {
                        n_max: 0,
                        ..cfg.numerics.clone()
                    };
                    Ok((Some(Pipeline::run(&s, &num)?), rho))
                }
                None => Ok((None, rho)),
            }
        })
        .collect::<Result<_, Error>>()?;
    let beta = cfg.scenario.beta.value_plus();
    let wo = cfg.scenario.omega_out();
    let mut rows = Vec::with_capacity(sw.rho.len() * sw.lambda_tilde.len());
    for (pipe, rho) in &per_rho {
        let mut prev: Option<f64> = None;
        for &lt in &sw.lambda_tilde {
            let w = w00_closed_form(lt, *rho, false)?;
            let (w_pipe, flags) = match pipe {
                Some(p) => {
                    // lambda_tilde -> lambda for the configured quartic limit
                    let lam = lt / lambda_tilde(1.0, beta.abs(), wo);
                    let t = p.transition_table(lam, cfg.numerics.variant)?;
                    (Some(t.w[0][0]), t.flags[0][0].label())
                }
                None => (None, String::new()),
            };
            rows.push(Fig1Row {
                lambda_tilde: lt,
                rho: *rho,
                w00_closed: w,
                w00_closed_double: w00_closed_form(lt, *rho, true)?,
                w00_pipeline: w_pipe,
                rho_realized: pipe.as_ref().map(|p| p.params.rho),
                pipeline_flags: flags,
                monotone: prev.is_none_or(|p| w <= p),
            });
            prev = Some(w);
        }
    }
    Ok(rows)
}

fn realized_scenario(template: &Scenario, rho: f64) -> Result<Option<Scenario>, Error> {
    if template.beta.value_plus() == 0.0 {
        return Err(Error::InvalidParameter("fig1 realization needs a nonzero beta limit".into()));
    }
    let (wi, wo) = (template.omega_in(), template.omega_out());
    let omega = if rho == 0.0 {
        ScalarProfile::constant(wo)
    } else {
        match realize_ramp_time(wi, wo, rho) {
            Some(t) => make_tanh_frequency(wi, wo, t)?,
            None => return Ok(None),
        }
    };
    Ok(Some(Scenario {
        omega,
        force: ScalarProfile::zero(),
        n_in: 0,
        ..template.clone()
    }))
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.16e}")).unwrap_or_default()
}

fn cmd_fig1(ctx: &Context) -> CliResult<()> {
    let cfg = &ctx.cfg;
    let rows = fig1_rows(cfg, cfg.sweep.realize)?;
    let all_monotone = rows.iter().all(|r| r.monotone);
    ctx.write("fig1.csv", &[format!("realized {}", cfg.sweep.realize)], |w| {
        writeln!(w, "lambda_tilde,rho,w00_closed,w00_closed_double,w00_pipeline,rho_realized,pipeline_flags,monotone")?;
        for r in &rows {
            writeln!(
                w,
                "{:.16e},{:.16e},{:.16e},{:.16e},{},{},{},{}",
                r.lambda_tilde,
                r.rho,
                r.w00_closed,
                r.w00_closed_double,
                opt(r.w00_pipeline),
                opt(r.rho_realized),
                r.pipeline_flags,
                r.monotone
            )?;
        }
        Ok(())
    })?;
    println!("rows = {}", rows.len());
    println!("monotone in lambda_tilde = {all_monotone}");
    Ok(())
}

/// Positive entries must form a geometric progression.
fn check_lambdas(l: &[f64]) -> CliResult<()> {
    if l.len() < 2 {
        return Err(CliError::Config("sweep.lambda needs at least two values".into()));
    }
    let pos: Vec<f64> = l.iter().copied().filter(|x| *x > 0.0).collect();
    let ratios: Vec<f64> = pos.windows(2).map(|w| w[1] / w[0]).collect();
    if ratios.windows(2).any(|r| (r[0] - r[1]).abs() > 1e-9 * r[0].abs()) {
        return Err(CliError::Config("positive sweep.lambda values must form a geometric progression".into()));
    }
    Ok(())
}

fn cmd_oracle_compare(ctx: &Context) -> CliResult<()> {
    let cfg = &ctx.cfg;
    check_lambdas(&cfg.sweep.lambda)?;
    let m = cfg.sweep.m;
    if m > cfg.numerics.n_max || cfg.scenario.n_in > cfg.numerics.n_max {
        return Err(CliError::Config("sweep.m and scenario.n_in must not exceed numerics.n_max".into()));
    }
    let pipe = Pipeline::run(&cfg.scenario, &cfg.numerics)?;
    ctx.log("pipeline done; propagating");
    let cmp = oracle_compare(&pipe, m, &cfg.sweep.lambda)?;
    let verdict = |v: ExponentVariant| if cmp.consistent.contains(&v) { "consistent" } else { "inconsistent" };
    let meta = [
        format!("m {} n {}", cmp.m, cmp.n),
        format!("convention {:?}", cfg.numerics.convention),
        format!("variant-a {}", verdict(ExponentVariant::A)),
        format!("variant-b {}", verdict(ExponentVariant::B)),
    ];
    ctx.write("oracle_compare.csv", &meta, |w| {
        writeln!(w, "lambda,w_pert_a,w_pert_b,w_exact,err_a,err_b,ratio_a,ratio_b")?;
        for r in &cmp.rows {
            writeln!(
                w,
                "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{},{}",
                r.lambda,
                r.w_pert_a,
                r.w_pert_b,
                r.w_exact,
                r.err_a,
                r.err_b,
                opt(r.ratio_a),
                opt(r.ratio_b)
            )?;
        }
        Ok(())
    })?;
    println!("variant A: {}", verdict(ExponentVariant::A));
    println!("variant B: {}", verdict(ExponentVariant::B));
    Ok(())
}
