//! Command-line front end shared by the `blockade-ghz` binary and the tests.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use log::{info, warn};
use serde::{Deserialize, Serialize};

use crate::config::{InitialState, RunConfig, ScheduleKind};
use crate::error::{Error, Result};
use crate::hamiltonian::{oracle_check, InjectedFault, OracleReport};
use crate::integrator::Stats;
use crate::propagator::{self, DecayParams};
use crate::protocols::{self, RunOptions};
use crate::pulses::{make_w_schedule, PulseSchedule};
use crate::sweeps::{self, MinArea, ScalingFit, SweepSpec};
use crate::symbasis::{collective_state, CollectiveLabel, StateVector, SymmetricBasis};

/// Exit status for a failed oracle comparison.
pub const EXIT_ORACLE: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "blockade-ghz", version, about = "Collective W and GHZ dynamics of blockaded three-level atoms")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// TOML configuration file.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Built-in configuration: fig2, fig3_top, fig3_bottom or fig4.
    #[arg(long, global = true, value_name = "NAME", conflicts_with = "config")]
    pub preset: Option<String>,
    /// Output directory; overrides `output_dir` of the configuration.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Worker threads for sweeps and scaling studies.
    #[arg(long, global = true, value_name = "K")]
    pub workers: Option<usize>,
    /// Seed of the random draws in oracle-check; the dynamics is deterministic.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Propagate one pulse pair and write the population time series.
    Simulate,
    /// Run the three-step GHZ sequence.
    Ghz,
    /// Scan one parameter of the superposition transfer.
    Sweep,
    /// Minimum transfer area against atom number, with a power-law fit.
    Scaling,
    /// Compare the chain Hamiltonian with the full-space construction.
    OracleCheck(OracleArgs),
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    /// Atom numbers to check (default: the configured n_atoms, or 2..6).
    #[arg(long, value_delimiter = ',')]
    pub atoms: Vec<usize>,
    /// Random draws per atom number (default: `oracle_draws` or 100).
    #[arg(long)]
    pub draws: Option<usize>,
    #[arg(long, hide = true, value_parser = parse_fault, value_name = "ROW,COL,SHIFT")]
    pub inject_fault: Option<InjectedFault>,
}

fn parse_fault(s: &str) -> std::result::Result<InjectedFault, String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 3 {
        return Err("expected ROW,COL,SHIFT".into());
    }
    let i = parts[0].trim().parse().map_err(|e| format!("row: {e}"))?;
    let j = parts[1].trim().parse().map_err(|e| format!("column: {e}"))?;
    let x = parts[2].trim().parse().map_err(|e| format!("shift: {e}"))?;
    Ok((i, j, x))
}

/// Summary written by `simulate`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulateSummary {
    pub n_atoms: usize,
    pub initial: InitialState,
    pub schedule: ScheduleKind,
    pub window: (f64, f64),
    pub labels: Vec<String>,
    pub initial_populations: Vec<f64>,
    pub final_populations: Vec<f64>,
    pub p_all_a: f64,
    pub p_all_b: f64,
    pub p_b_rydberg: f64,
    pub final_norm2: f64,
    /// Largest `|1 - norm^2|` over the samples; only meaningful without decay.
    pub norm_drift: f64,
    pub success_probability: f64,
    pub max_rydberg_population: f64,
    pub adiabaticity_integral: f64,
    pub adiabaticity_metric: f64,
    pub stats: Stats,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingPoint {
    pub n_atoms: usize,
    pub result: Option<MinArea>,
    pub status: String,
}

/// Summary written by `scaling`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingReport {
    pub threshold: f64,
    pub points: Vec<ScalingPoint>,
    pub fit: Option<ScalingFit>,
    pub strictly_increasing: bool,
    pub local_slopes_decreasing: bool,
}

/// Run metadata; the only emitted file that varies between identical runs.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub version: String,
    pub config_source: String,
    pub files: Vec<String>,
    pub elapsed_seconds: f64,
    pub finished_unix: u64,
    pub exit_code: i32,
}

struct Output {
    dir: PathBuf,
    files: Vec<String>,
}

impl Output {
    fn new(dir: PathBuf) -> Result<Self> {
        std::fs::create_dir_all(&dir)?;
        Ok(Self {
            dir,
            files: Vec::new(),
        })
    }

    fn path(&mut self, name: &str) -> PathBuf {
        self.files.push(name.to_string());
        self.dir.join(name)
    }

    fn text(&mut self, name: &str, body: &str) -> Result<()> {
        let path = self.path(name);
        std::fs::write(path, body)?;
        Ok(())
    }

    fn columns(&mut self, name: &str, names: (&str, &str), pts: &[(f64, f64)]) -> Result<()> {
        let path = self.path(name);
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        sweeps::write_columns(&mut f, names, pts)?;
        f.flush()?;
        Ok(())
    }
}

fn load_config(cli: &Cli) -> Result<Option<(RunConfig, String)>> {
    match (&cli.config, &cli.preset) {
        (Some(path), _) => Ok(Some((
            RunConfig::from_file(path)?,
            path.display().to_string(),
        ))),
        (None, Some(name)) => Ok(Some((RunConfig::preset(name)?, format!("preset:{name}")))),
        (None, None) => Ok(None),
    }
}

fn require(cfg: Option<(RunConfig, String)>) -> Result<(RunConfig, String)> {
    cfg.ok_or_else(|| Error::Config("no configuration given; pass --config PATH or --preset NAME".into()))
}

fn run_options(cfg: &RunConfig, keep: bool) -> Result<RunOptions> {
    Ok(RunOptions {
        integrator: cfg.integrator,
        decay: DecayParams::new(cfg.gamma_t).map_err(|e| Error::Config(e.to_string()))?,
        keep_trajectories: keep,
    })
}

/// Parses arguments, runs the command and returns the exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn run(cli: &Cli) -> Result<i32> {
    let start = Instant::now();
    let cfg = load_config(cli)?;
    let (name, cfg) = match &cli.command {
        Command::Simulate => ("simulate", Some(require(cfg)?)),
        Command::Ghz => ("ghz", Some(require(cfg)?)),
        Command::Sweep => ("sweep", Some(require(cfg)?)),
        Command::Scaling => ("scaling", Some(require(cfg)?)),
        Command::OracleCheck(_) => ("oracle-check", cfg),
    };
    let dir = cli
        .out
        .clone()
        .or_else(|| cfg.as_ref().map(|(c, _)| c.output_dir()))
        .unwrap_or_else(|| PathBuf::from("out"));
    let mut out = Output::new(dir)?;
    if let Some((c, _)) = &cfg {
        out.text("config.toml", &c.to_toml()?)?;
    }
    let code = match &cli.command {
        Command::Simulate => simulate(&cfg.as_ref().expect("checked").0, &mut out)?,
        Command::Ghz => ghz(&cfg.as_ref().expect("checked").0, &mut out)?,
        Command::Sweep => sweep(&cfg.as_ref().expect("checked").0, cli.workers, &mut out)?,
        Command::Scaling => scaling(&cfg.as_ref().expect("checked").0, cli.workers, &mut out)?,
        Command::OracleCheck(args) => oracle(cfg.as_ref().map(|c| &c.0), args, cli.seed, &mut out)?,
    };
    let manifest = Manifest {
        command: name.to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        config_source: cfg.map_or_else(|| "none".to_string(), |c| c.1),
        files: out.files.clone(),
        elapsed_seconds: start.elapsed().as_secs_f64(),
        finished_unix: std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map_or(0, |d| d.as_secs()),
        exit_code: code,
    };
    std::fs::write(
        out.dir.join("manifest.json"),
        serde_json::to_string_pretty(&manifest)?,
    )?;
    info!("{name}: wrote {} files to {}", out.files.len(), out.dir.display());
    Ok(code)
}

fn initial_state(basis: SymmetricBasis, kind: InitialState) -> Result<StateVector> {
    let n = basis.n_atoms();
    match kind {
        InitialState::Superposition => sweeps::ideal_superposition(n),
        InitialState::AllA => collective_state(basis, CollectiveLabel::AllA),
        InitialState::AllB => collective_state(basis, CollectiveLabel::AllB),
        InitialState::BRydberg => collective_state(basis, CollectiveLabel::R(n - 1)),
    }
}

fn simulate_schedule(cfg: &RunConfig) -> Result<PulseSchedule> {
    let w = || make_w_schedule(cfg.omega_m_t, 1.0, cfg.tau_over_t, cfg.delta_t, cfg.order);
    match cfg.simulate.schedule {
        ScheduleKind::W => w(),
        ScheduleKind::WInverse => Ok(w()?.time_reversed()),
        ScheduleKind::Prepare => cfg.prep().schedule(cfg.n_atoms),
    }
}

pub fn simulate_summary(cfg: &RunConfig) -> Result<(SimulateSummary, propagator::Trajectory)> {
    let basis = SymmetricBasis::new(cfg.n_atoms)?;
    let start = initial_state(basis, cfg.simulate.initial)?;
    let pulses = simulate_schedule(cfg)?;
    let opts = run_options(cfg, true)?;
    let traj = propagator::propagate(&start, &pulses, pulses.window(), &opts.integrator, opts.decay)?;
    let end = traj.final_state();
    let norms = traj.norms();
    let pops = end.populations();
    let n = cfg.n_atoms;
    let integral = protocols::adiabaticity_integral(&pulses);
    let summary = SimulateSummary {
        n_atoms: n,
        initial: cfg.simulate.initial,
        schedule: cfg.simulate.schedule,
        window: pulses.window(),
        labels: basis.label_names(),
        initial_populations: start.populations(),
        p_all_a: pops[basis.g(0)],
        p_all_b: pops[basis.g(n)],
        p_b_rydberg: pops[basis.r(n - 1)],
        final_populations: pops,
        final_norm2: end.norm_sqr(),
        norm_drift: norms.iter().map(|x| (1.0 - x).abs()).fold(0.0, f64::max),
        success_probability: propagator::success_probability(&traj),
        max_rydberg_population: traj.max_rydberg_population(),
        adiabaticity_integral: integral,
        adiabaticity_metric: cfg.gamma_t * integral,
        stats: traj.stats,
    };
    Ok((summary, traj))
}

fn simulate(cfg: &RunConfig, out: &mut Output) -> Result<i32> {
    let (summary, traj) = simulate_summary(cfg)?;
    traj.save_csv(&out.path("trajectory.csv"))?;
    out.text("summary.json", &serde_json::to_string_pretty(&summary)?)?;
    println!(
        "simulate N={}: P(a^N) = {:.4}, P(b^(N-1) r) = {:.4}, norm drift {:.1e}",
        summary.n_atoms, summary.p_all_a, summary.p_b_rydberg, summary.norm_drift
    );
    Ok(0)
}

fn ghz(cfg: &RunConfig, out: &mut Output) -> Result<i32> {
    let opts = run_options(cfg, true)?;
    let mut result = protocols::ghz_protocol(cfg.n_atoms, &cfg.ghz_params(), &opts)?;
    let dir = out.dir.clone();
    result.save_trajectories(&dir, "ghz")?;
    for s in &result.summary.steps {
        if let Some(name) = &s.trajectory_csv {
            out.files.push(name.clone());
        }
    }
    out.text("ghz.json", &result.to_json()?)?;
    let s = &result.summary;
    println!(
        "ghz N={}: fidelity {:.4}, phase {:.4}, success probability {:.4}",
        s.n_atoms, s.ghz_fidelity, s.ghz_phase, s.success_probability
    );
    Ok(0)
}

fn sweep(cfg: &RunConfig, workers: Option<usize>, out: &mut Output) -> Result<i32> {
    let block = cfg
        .sweep
        .as_ref()
        .ok_or_else(|| Error::Config("sweep needs a [sweep] block".into()))?;
    let spec = SweepSpec {
        parameter: block.parameter,
        grid: block.grid.values(),
        n_atoms: cfg.n_atoms,
        fixed: cfg.ghz_params(),
        observable: block.observable,
        gamma_t: cfg.gamma_t,
    };
    spec.validate().map_err(|e| Error::Config(e.to_string()))?;
    let opts = run_options(cfg, false)?;
    let result = sweeps::run_sweep(&spec, &opts, workers)?;
    result.save_csv(&out.path("sweep.csv"))?;
    let x = block.parameter.name();
    let column = |f: fn(&sweeps::SweepRow) -> f64| -> Vec<(f64, f64)> {
        result.rows.iter().map(|r| (r.value, f(r))).collect()
    };
    out.columns("p_all_a.dat", (x, "p_all_a"), &column(|r| r.p_all_a))?;
    out.columns("p_b_rydberg.dat", (x, "p_b_rydberg"), &column(|r| r.p_b_rydberg))?;
    if block.observable == sweeps::Observable::GhzFidelity {
        out.columns("ghz_fidelity.dat", (x, "ghz_fidelity"), &column(|r| r.ghz_fidelity))?;
    }
    let failed = result.rows.iter().filter(|r| r.status != "ok").count();
    println!("sweep over {x}: {} points, {failed} failed", result.rows.len());
    if failed > 0 {
        for r in result.rows.iter().filter(|r| r.status != "ok") {
            warn!("{x} = {}: {}", r.value, r.status);
        }
        eprintln!("error: {failed} sweep points failed; completed rows were written");
        return Ok(2);
    }
    Ok(0)
}

/// Assembles the report from per-`N` search results.
pub fn scaling_report(threshold: f64, found: Vec<(usize, Result<MinArea>)>) -> ScalingReport {
    let points: Vec<ScalingPoint> = found
        .into_iter()
        .map(|(n, r)| match r {
            Ok(m) => ScalingPoint {
                n_atoms: n,
                result: Some(m),
                status: "ok".into(),
            },
            Err(e) => ScalingPoint {
                n_atoms: n,
                result: None,
                status: format!("error: {e}"),
            },
        })
        .collect();
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter_map(|p| p.result.as_ref())
        .map(|m| (m.n_atoms as f64, m.omega_m_t_min))
        .collect();
    let fit = sweeps::fit_scaling(&pts).ok();
    let complete = pts.len() == points.len();
    let strictly_increasing = complete && pts.windows(2).all(|w| w[1].1 > w[0].1);
    let local_slopes_decreasing = fit
        .as_ref()
        .is_some_and(|f| f.local_slopes.windows(2).all(|w| w[1].1 < w[0].1));
    ScalingReport {
        threshold,
        points,
        fit,
        strictly_increasing,
        local_slopes_decreasing,
    }
}

fn scaling(cfg: &RunConfig, workers: Option<usize>, out: &mut Output) -> Result<i32> {
    let block = cfg
        .scaling
        .as_ref()
        .ok_or_else(|| Error::Config("scaling needs a [scaling] block".into()))?;
    let search = block.search();
    let opts = run_options(cfg, false)?;
    let found = sweeps::min_area_points(&block.n_values, &cfg.ghz_params(), &search, &opts, workers)?;
    let report = scaling_report(
        search.fidelity_threshold,
        block.n_values.iter().copied().zip(found).collect(),
    );
    {
        let path = out.path("scaling_points.csv");
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["n_atoms", "omega_m_t_min", "tau_over_t", "fidelity", "evaluations", "status"])?;
        for p in &report.points {
            let m = p.result.as_ref();
            w.write_record([
                p.n_atoms.to_string(),
                m.map_or("NaN".into(), |m| format!("{}", m.omega_m_t_min)),
                m.map_or("NaN".into(), |m| format!("{}", m.tau_over_t)),
                m.map_or("NaN".into(), |m| format!("{}", m.fidelity)),
                m.map_or("0".into(), |m| m.evaluations.to_string()),
                p.status.clone(),
            ])?;
        }
        w.flush()?;
    }
    let pts: Vec<(f64, f64)> = report
        .points
        .iter()
        .filter_map(|p| p.result.as_ref())
        .map(|m| (m.n_atoms as f64, m.omega_m_t_min))
        .collect();
    out.columns("min_area.dat", ("n_atoms", "omega_m_t_min"), &pts)?;
    out.text("scaling.json", &serde_json::to_string_pretty(&report)?)?;
    match &report.fit {
        Some(f) => println!("scaling: alpha = {:.4} over {} points", f.alpha, pts.len()),
        None => println!("scaling: too few points for a fit"),
    }
    let failed = report.points.len() - pts.len();
    if failed > 0 {
        eprintln!("error: minimum-area search failed for {failed} atom numbers");
        return Ok(2);
    }
    Ok(0)
}

fn oracle(cfg: Option<&RunConfig>, args: &OracleArgs, seed: u64, out: &mut Output) -> Result<i32> {
    let atoms: Vec<usize> = if !args.atoms.is_empty() {
        args.atoms.clone()
    } else if let Some(c) = cfg {
        vec![c.n_atoms]
    } else {
        (2..=6).collect()
    };
    let draws = args.draws.or(cfg.map(|c| c.oracle_draws)).unwrap_or(100);
    let report: OracleReport = oracle_check(&atoms, draws, seed, args.inject_fault)?;
    out.text("oracle_report.json", &serde_json::to_string_pretty(&report)?)?;
    if report.passed() {
        println!(
            "oracle-check passed: N = {:?}, {} draws, max deviation {:.1e}, max leakage {:.1e}",
            atoms, draws, report.max_deviation, report.max_leakage
        );
        Ok(0)
    } else {
        let loc = report
            .worst_entry
            .map_or("none".to_string(), |(n, i, j)| format!("N = {n}, entry ({i}, {j})"));
        eprintln!(
            "oracle-check FAILED: max deviation {:.3e} at {loc}, max leakage {:.3e} (tolerance {:.0e})",
            report.max_deviation, report.max_leakage, report.tolerance
        );
        Ok(EXIT_ORACLE)
    }
}

/// Files in `dir` other than the manifest, sorted by name.
pub fn data_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.file_name().is_some_and(|n| n != "manifest.json"))
        .collect();
    files.sort();
    Ok(files)
}
