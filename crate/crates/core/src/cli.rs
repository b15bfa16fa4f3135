//! The `frontlab` command line.
//!
//! Exit codes: `0` pass, `1` scientific failure (failed verdict, shooting
//! without a bracket, blow-up), `2` usage or configuration error.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::front::{
    bracket_scan, find_bracket, integrate_orbit, shoot_speed, spatial_eigenvalues, FrontEnd, FrontProfile, FrontState,
};
use crate::model::{BlockSystem, ModelParams};
use crate::norms::{fit_decay, verify, NormSeries, Verdict};
use crate::output::{fmt_f64, write_csv, Report};
use crate::scenario::{FrontMode, Scenario, SweepCommand};
use crate::sim::{build_perturbation, write_snapshot, Grid, InitialField, RunOutput, Simulator};
use crate::spectral::{
    abscissa_unweighted, abscissa_weighted, axis_grid, optimal_weight, semigroup_envelope, sweep, tensor_sum_check,
    SymbolMatrix, DEFAULT_ENVELOPE_CAP,
};

#[derive(Debug, Parser)]
#[command(name = "frontlab", version, about = "Stability experiments for combustion fronts")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Scenario file (TOML).
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory.
    #[arg(long, default_value = "./out")]
    pub out: PathBuf,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Essential-spectrum sweeps, abscissas and the semigroup envelope.
    Spectrum(Common),
    /// Traveling-wave shooting (ε = 0) or orbit integration (ε > 0).
    Front(Common),
    /// Perturbation run; writes the norm table and snapshots.
    Simulate(Common),
    /// Perturbation run followed by the stability verdict.
    Verify(Common),
    /// Runs a sub-command over a list of parameter values.
    Sweep(Common),
}

impl Command {
    fn common(&self) -> &Common {
        match self {
            Command::Spectrum(c) | Command::Front(c) | Command::Simulate(c) | Command::Verify(c) | Command::Sweep(c) => c,
        }
    }

    fn name(&self) -> &'static str {
        match self {
            Command::Spectrum(_) => "spectrum",
            Command::Front(_) => "front",
            Command::Simulate(_) => "simulate",
            Command::Verify(_) => "verify",
            Command::Sweep(_) => "sweep",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Outcome {
    Pass,
    Fail,
}

impl Outcome {
    fn from_bool(ok: bool) -> Self {
        if ok {
            Outcome::Pass
        } else {
            Outcome::Fail
        }
    }
}

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

/// Exit code for an error that aborted a command.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config { .. }
        | Error::InvalidParameter { .. }
        | Error::DimensionMismatch { .. }
        | Error::SupportExceedsGrid { .. }
        | Error::Io(_) => EXIT_USAGE,
        _ => EXIT_FAIL,
    }
}

/// Parses `args` (program name first), runs the command and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_PASS };
        }
    };
    match execute(&cli.command) {
        Ok(Outcome::Pass) => EXIT_PASS,
        Ok(Outcome::Fail) => EXIT_FAIL,
        Err(e) => {
            eprintln!("frontlab {}: {e}", cli.command.name());
            exit_code(&e)
        }
    }
}

pub fn execute(command: &Command) -> Result<Outcome> {
    let common = command.common();
    let scenario = Scenario::load(&common.config)?;
    fs::create_dir_all(&common.out)?;
    let (mut report, outcome) = match command {
        Command::Spectrum(_) => cmd_spectrum(&scenario, Some(&common.out))?,
        Command::Front(_) => cmd_front(&scenario, &common.out, common.seed)?,
        Command::Simulate(_) => cmd_simulate(&scenario, &common.out)?,
        Command::Verify(_) => cmd_verify(&scenario, Some(&common.out))?,
        Command::Sweep(_) => cmd_sweep(&scenario, &common.out)?,
    };
    report.push("command", command.name());
    report.push("seed", common.seed);
    for (k, v) in scenario.resolved_entries() {
        report.push(k, v);
    }
    let text = report.render();
    fs::write(common.out.join("summary.txt"), &text)?;
    print!("{text}");
    Ok(outcome)
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![a],
        _ => (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect(),
    }
}

/// Spectrum sweeps and closed forms; CSVs are written when `out` is given.
pub fn cmd_spectrum(s: &Scenario, out: Option<&Path>) -> Result<(Report, Outcome)> {
    let params = s.params()?;
    let cfg = &s.spectrum;
    if !(1..=2).contains(&cfg.space_dim) {
        return Err(Error::param("spectrum.space_dim", format!("must be 1 or 2, got {}", cfg.space_dim)));
    }
    let weighted = SymbolMatrix::combustion(&params, cfg.space_dim, params.alpha);
    let unweighted = weighted.with_alpha(0.0);
    let sw_u = sweep(&unweighted, cfg.extent, cfg.samples)?;
    let sw_w = sweep(&weighted, cfg.extent, cfg.samples)?;
    if let Some(dir) = out {
        sw_u.write_csv(&dir.join("spectrum_unweighted.csv"))?;
        sw_w.write_csv(&dir.join("spectrum_weighted.csv"))?;
    }
    let (alpha_opt, abscissa_opt) = optimal_weight(params.c)?;
    let mut r = Report::new();
    r.push_f64("alpha", params.alpha);
    r.push_f64("abscissa_unweighted", abscissa_unweighted(&params));
    r.push_f64("abscissa_unweighted_realized", sw_u.realized_abscissa);
    r.push_f64("abscissa_weighted", abscissa_weighted(&params));
    r.push_f64("abscissa_weighted_realized", sw_w.realized_abscissa);
    r.push_f64("sweep_extent", sw_w.extent);
    r.push_f64("sweep_resolution", sw_w.resolution);
    r.push_f64("optimal_alpha", alpha_opt);
    r.push_f64("optimal_abscissa", abscissa_opt);
    let nu = -abscissa_weighted(&params);
    r.push_f64("nu", nu);
    let t_grid = linspace(0.0, cfg.envelope_t_max, cfg.envelope_t_samples);
    let xi_grid = axis_grid(sw_w.extent, cfg.samples);
    let env = semigroup_envelope(&params, &t_grid, &xi_grid, DEFAULT_ENVELOPE_CAP)?;
    r.push_f64("k_est", env.k_est);
    let mut ok = true;
    if cfg.space_dim == 2 {
        let ts = tensor_sum_check(&params, sw_w.extent, cfg.samples)?;
        r.push_f64("tensor_sum.abscissa_1d", ts.abscissa_1d);
        r.push_f64("tensor_sum.abscissa_2d", ts.abscissa_2d);
        r.push_f64("tensor_sum.difference", ts.difference);
        r.push("tensor_sum.verdict", if ts.passed { "pass" } else { "fail" });
        ok &= ts.passed;
    }
    Ok((r, Outcome::from_bool(ok)))
}

fn push_profile(r: &mut Report, profile: &FrontProfile, params: &ModelParams) {
    let left = profile.left();
    r.push_f64("c_star", profile.c);
    r.push_f64("phi1_left", left.phi1);
    r.push_f64("phi1_left_error", (left.phi1 - 1.0 / params.kappa).abs());
    r.push_f64("k", profile.k);
    r.push_f64("max_k_drift", profile.max_k_drift());
    r.push_f64("left_residual", profile.left_residual);
    r.push_f64("right_residual", profile.right_residual);
    r.push("phi2_monotonicity_violations", profile.phi2_monotonicity_violations());
}

pub fn cmd_front(s: &Scenario, out: &Path, seed: u64) -> Result<(Report, Outcome)> {
    let cfg = &s.front;
    let params = ModelParams {
        alpha: 0.0,
        ..s.params()?
    };
    let shoot = match cfg.mode {
        FrontMode::Auto => params.epsilon == 0.0,
        FrontMode::Shoot => true,
        FrontMode::Orbit => false,
    };
    let mut r = Report::new();
    if shoot {
        let opts = cfg.shoot_options();
        let bracket = match cfg.c_bracket {
            Some([lo, hi]) => (lo, hi),
            None => {
                let speeds = linspace(cfg.scan_speeds[0], cfg.scan_speeds[1], cfg.scan_samples);
                let scan = bracket_scan(&params, &speeds, &opts)?;
                find_bracket(&scan).ok_or(Error::NoSignChange {
                    lo: cfg.scan_speeds[0],
                    hi: cfg.scan_speeds[1],
                    f_lo: scan.first().map_or(f64::NAN, |p| p.1),
                    f_hi: scan.last().map_or(f64::NAN, |p| p.1),
                })?
            }
        };
        let res = shoot_speed(&params, bracket, cfg.tol, &opts)?;
        res.profile.write_csv(&out.join("front_profile.csv"))?;
        r.push("mode", "shoot");
        push_profile(&mut r, &res.profile, &params);
        r.push("bisections", res.bisections);
        r.push_f64("bracket.lo", res.final_bracket.0);
        r.push_f64("bracket.hi", res.final_bracket.1);
        let with_speed = ModelParams { c: res.c_star, ..params };
        for (end, name) in [(FrontEnd::Burned, "burned"), (FrontEnd::Unburned, "unburned")] {
            let ev = spatial_eigenvalues(&with_speed, end);
            for (j, mu) in ev.iter().enumerate() {
                r.push_f64(format!("spatial_eigenvalue.{name}.{}", j + 1), *mu);
            }
        }
        return Ok((r, Outcome::Pass));
    }
    let initial = match cfg.initial {
        Some(a) => FrontState::from_array(a),
        None => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut a = [0.0, 1.0, 0.0, 0.0];
            for x in a.iter_mut() {
                *x += rng.random_range(-0.1..0.1);
            }
            FrontState::from_array(a)
        }
    };
    let span = (cfg.z_span[0], cfg.z_span[1]);
    let orbit = integrate_orbit(&params, &initial, span, cfg.orbit_tol)?;
    let bound = 10.0 * cfg.orbit_tol * (span.1 - span.0).abs();
    let header: Vec<String> = FrontProfile::CSV_HEADER.iter().map(|s| s.to_string()).collect();
    let rows = orbit.z.iter().zip(&orbit.states).map(|(z, st)| {
        let drift = (crate::front::conserved_k(&params, st) - orbit.k0).abs();
        [*z, st.phi1, st.phi2, st.phi3, st.phi4, drift]
    });
    write_csv(&out.join("front_orbit.csv"), &header, rows)?;
    r.push("mode", "orbit");
    for (j, x) in initial.to_array().iter().enumerate() {
        r.push_f64(format!("initial.phi{}", j + 1), *x);
    }
    r.push_f64("k0", orbit.k0);
    r.push_f64("max_k_drift", orbit.max_drift);
    r.push_f64("drift_bound", bound);
    r.push("samples", orbit.z.len());
    let ok = orbit.max_drift <= bound;
    r.push("verdict", if ok { "pass" } else { "fail" });
    Ok((r, Outcome::from_bool(ok)))
}

struct Run {
    params: ModelParams,
    nonlinear: bool,
    grid: Grid,
    initial: InitialField,
    output: RunOutput,
}

fn simulate(s: &Scenario) -> Result<Run> {
    let params = s.params()?;
    let g = s.grid_section()?;
    let grid = Grid::new(&g.half_length, &g.points)?;
    let cfg = s.run_config()?;
    let mut sim = Simulator::new(BlockSystem::combustion(&params), grid.clone(), s.model.nonlinear);
    let initial = build_perturbation(&grid, &s.perturbation()?, params.alpha)?;
    let output = sim.run(&initial.state, &cfg)?;
    Ok(Run {
        params,
        nonlinear: s.model.nonlinear,
        grid,
        initial,
        output,
    })
}

fn run_report(run: &Run) -> Report {
    let mut r = Report::new();
    r.push("nonlinear", run.nonlinear);
    r.push("steps", run.output.steps);
    r.push_f64("dt", run.output.dt);
    r.push_f64("initial.norm0", run.initial.norm0);
    r.push_f64("initial.norm_alpha", run.initial.norm_alpha);
    r.push_f64("initial.norm_e", run.initial.norm_e);
    if let Some(last) = run.output.series.at_k(0).last() {
        r.push_f64("final.t", last.t);
        r.push_f64("final.norm0", last.norm0_v);
        r.push_f64("final.norm_alpha", last.normalpha_v);
        r.push_f64("final.norm_e", last.norm_e);
    }
    r.push("warnings", run.output.warnings.len());
    for (i, w) in run.output.warnings.iter().enumerate() {
        r.push(format!("warning.{}", i + 1), w);
    }
    r
}

fn write_run(run: &Run, out: &Path) -> Result<()> {
    run.output.series.write_csv(&out.join("norms.csv"))?;
    let meta = serde_json::json!({
        "epsilon": run.params.epsilon,
        "kappa": run.params.kappa,
        "c": run.params.c,
        "alpha": run.params.alpha,
    });
    let dir = out.join("snapshots");
    fs::create_dir_all(&dir)?;
    for (i, snap) in run.output.snapshots.iter().enumerate() {
        write_snapshot(&dir, &format!("snap_{i:04}"), &run.grid, snap, &meta)?;
    }
    write_snapshot(&dir, "final", &run.grid, &run.output.final_state, &meta)
}

pub fn cmd_simulate(s: &Scenario, out: &Path) -> Result<(Report, Outcome)> {
    let run = simulate(s)?;
    write_run(&run, out)?;
    let mut r = run_report(&run);
    for (name, pick) in [
        ("fit.norm_alpha", (|x: &crate::norms::NormSample| x.normalpha_v) as fn(&_) -> f64),
        ("fit.norm0_v2", |x| x.norm0_v2),
    ] {
        let (t, v) = run.output.series.column(0, pick);
        if let Ok(fit) = fit_decay(&t, &v, &Default::default()) {
            r.push_f64(format!("{name}.rate"), fit.rate);
            r.push_f64(format!("{name}.r_squared"), fit.r_squared);
        }
    }
    Ok((r, Outcome::Pass))
}

fn verdict_for(s: &Scenario, series: &NormSeries, eta: f64) -> Result<Verdict> {
    verify(series, eta, &s.targets(eta)?)
}

/// Runs the scenario and evaluates the verdict; files are written when `out` is given.
pub fn cmd_verify(s: &Scenario, out: Option<&Path>) -> Result<(Report, Outcome)> {
    let run = simulate(s)?;
    if let Some(dir) = out {
        write_run(&run, dir)?;
    }
    let eta = run.initial.norm_e;
    let verdict = verdict_for(s, &run.output.series, eta)?;
    let mut r = run_report(&run);
    r.extend("", &verdict.report());
    Ok((r, Outcome::from_bool(verdict.passed())))
}

/// One row of a sweep table.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub value: f64,
    pub error: Option<String>,
    pub abscissa_unweighted: Option<f64>,
    pub abscissa_weighted: Option<f64>,
    pub weighted_rate: Option<f64>,
    pub v2_rate: Option<f64>,
    pub verdict: Option<bool>,
}

pub const SWEEP_HEADER: &str =
    "index,value,status,abscissa_unweighted,abscissa_weighted,fitted_weighted_rate,fitted_v2_rate,verdict,message";

fn sweep_one(base: &Scenario, parameter: &str, value: f64, command: SweepCommand) -> SweepRow {
    let mut row = SweepRow {
        value,
        error: None,
        abscissa_unweighted: None,
        abscissa_weighted: None,
        weighted_rate: None,
        v2_rate: None,
        verdict: None,
    };
    let result = (|| -> Result<()> {
        let s = base.with_parameter(parameter, value)?;
        let params = s.params()?;
        row.abscissa_unweighted = Some(abscissa_unweighted(&params));
        row.abscissa_weighted = Some(abscissa_weighted(&params));
        match command {
            SweepCommand::Spectrum => {
                let (r, outcome) = cmd_spectrum(&s, None)?;
                row.abscissa_weighted = r.get("abscissa_weighted_realized").and_then(|v| v.parse().ok());
                row.verdict = Some(outcome == Outcome::Pass);
            }
            SweepCommand::Verify => {
                let run = simulate(&s)?;
                let verdict = verdict_for(&s, &run.output.series, run.initial.norm_e)?;
                let rate = |item: u8| {
                    verdict
                        .item(item)
                        .and_then(|i| i.measured.iter().find(|(k, _)| *k == "fitted_rate"))
                        .map(|(_, v)| *v)
                };
                row.weighted_rate = rate(3);
                row.v2_rate = rate(5);
                row.verdict = Some(verdict.passed());
            }
        }
        Ok(())
    })();
    if let Err(e) = result {
        row.error = Some(e.to_string());
    }
    row
}

/// Worker count from `FRONTLAB_THREADS`, if set to a positive integer.
pub fn thread_cap() -> Option<usize> {
    std::env::var("FRONTLAB_THREADS").ok()?.trim().parse().ok().filter(|n| *n > 0)
}

/// Runs every sweep value (concurrently) and returns rows in value order.
pub fn run_sweep(s: &Scenario) -> Result<Vec<SweepRow>> {
    let sw = s.sweep_section()?;
    s.with_parameter(&sw.parameter, 0.0)?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = thread_cap() {
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| Error::Config {
        line: 0,
        message: format!("cannot start worker pool: {e}"),
    })?;
    Ok(pool.install(|| {
        sw.values
            .par_iter()
            .map(|&v| sweep_one(s, &sw.parameter, v, sw.command))
            .collect()
    }))
}

fn opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = format!("{SWEEP_HEADER}\n");
    for (i, row) in rows.iter().enumerate() {
        let status = if row.error.is_some() { "failed" } else { "ok" };
        let verdict = match row.verdict {
            Some(true) => "pass",
            Some(false) => "fail",
            None => "",
        };
        let message = row.error.as_deref().unwrap_or("").replace([',', '\n'], ";");
        out.push_str(&format!(
            "{i},{},{status},{},{},{},{},{verdict},{message}\n",
            fmt_f64(row.value),
            opt(row.abscissa_unweighted),
            opt(row.abscissa_weighted),
            opt(row.weighted_rate),
            opt(row.v2_rate),
        ));
    }
    out
}

pub fn cmd_sweep(s: &Scenario, out: &Path) -> Result<(Report, Outcome)> {
    let rows = run_sweep(s)?;
    fs::write(out.join("sweep.csv"), sweep_csv(&rows))?;
    let sw = s.sweep_section()?;
    let mut r = Report::new();
    r.push("sweep.parameter", &sw.parameter);
    r.push("sweep.rows", rows.len());
    r.push("sweep.failed_rows", rows.iter().filter(|r| r.error.is_some()).count());
    r.push("sweep.failed_verdicts", rows.iter().filter(|r| r.verdict == Some(false)).count());
    Ok((r, Outcome::Pass))
}
