//! Parameter sweeps over the superposition-transfer step and the minimum-area
//! search behind the `T_min ~ N^alpha` scaling.

use std::io::Write;
use std::path::Path;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::propagator::{self, DecayParams};
use crate::protocols::{self, Direction, GhzParams, RunOptions, WParams};
use crate::symbasis::{StateVector, SymmetricBasis};

/// Delay grid of the per-`N` optimisation, in units of `T`.
pub const TAU_GRID: [f64; 5] = [0.3, 0.4, 0.5, 0.6, 0.7];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweptParameter {
    #[serde(alias = "tau_over_T")]
    TauOverT,
    #[serde(alias = "omega_m_T")]
    OmegaMT,
    #[serde(alias = "delta_T")]
    DeltaT,
    NAtoms,
}

impl SweptParameter {
    pub fn name(&self) -> &'static str {
        match self {
            SweptParameter::TauOverT => "tau_over_t",
            SweptParameter::OmegaMT => "omega_m_t",
            SweptParameter::DeltaT => "delta_t",
            SweptParameter::NAtoms => "n_atoms",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Observable {
    /// Transfer step alone, started from the ideal superposition.
    FinalPopulations,
    /// Full three-step protocol.
    GhzFidelity,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub parameter: SweptParameter,
    pub grid: Vec<f64>,
    pub n_atoms: usize,
    /// Fixed parameters; the swept value replaces the transfer-step field.
    pub fixed: GhzParams,
    pub observable: Observable,
    /// Rydberg decay rate in units of `1/T`, used for the adiabaticity metric.
    #[serde(default)]
    pub gamma_t: f64,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.grid.is_empty() {
            return Err(Error::InvalidArgument("sweep grid is empty".into()));
        }
        if self.grid.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("sweep grid has non-finite values".into()));
        }
        let up = self.grid.windows(2).all(|w| w[1] > w[0]);
        let down = self.grid.windows(2).all(|w| w[1] < w[0]);
        if !(up || down) {
            return Err(Error::InvalidArgument(
                "sweep grid must be strictly monotone".into(),
            ));
        }
        if self.parameter == SweptParameter::NAtoms
            && self.grid.iter().any(|&v| v < 1.0 || v.fract() != 0.0)
        {
            return Err(Error::InvalidArgument(
                "n_atoms grid must hold positive integers".into(),
            ));
        }
        if self.parameter != SweptParameter::NAtoms && self.n_atoms == 0 {
            return Err(Error::InvalidArgument("n_atoms must be at least 1".into()));
        }
        Ok(())
    }

    fn point(&self, value: f64) -> (usize, GhzParams) {
        let mut params = self.fixed;
        let mut n = self.n_atoms;
        match self.parameter {
            SweptParameter::TauOverT => params.transfer.tau_over_t = value,
            SweptParameter::OmegaMT => params.transfer.omega_m_t = value,
            SweptParameter::DeltaT => params.transfer.delta_t = value,
            SweptParameter::NAtoms => n = value as usize,
        }
        (n, params)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub value: f64,
    pub n_atoms: usize,
    pub omega_m_t: f64,
    pub delta_t: f64,
    pub tau_over_t: f64,
    pub p_all_a: f64,
    pub p_b_rydberg: f64,
    pub p_all_b: f64,
    pub ghz_fidelity: f64,
    pub adiabaticity_integral: f64,
    pub adiabaticity_metric: f64,
    pub status: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepResult {
    pub parameter: SweptParameter,
    pub rows: Vec<SweepRow>,
}

impl SweepResult {
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            self.parameter.name(),
            "n_atoms",
            "omega_m_t",
            "delta_t",
            "tau_over_t",
            "p_all_a",
            "p_b_rydberg",
            "p_all_b",
            "ghz_fidelity",
            "adiabaticity_integral",
            "adiabaticity_metric",
            "status",
        ])?;
        for r in &self.rows {
            w.write_record([
                format!("{}", r.value),
                r.n_atoms.to_string(),
                format!("{}", r.omega_m_t),
                format!("{}", r.delta_t),
                format!("{}", r.tau_over_t),
                format!("{:.10e}", r.p_all_a),
                format!("{:.10e}", r.p_b_rydberg),
                format!("{:.10e}", r.p_all_b),
                format!("{:.10e}", r.ghz_fidelity),
                format!("{:.10e}", r.adiabaticity_integral),
                format!("{:.10e}", r.adiabaticity_metric),
                r.status.clone(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_csv(&mut f)?;
        f.flush()?;
        Ok(())
    }

    /// Reads a table written by [`write_csv`](Self::write_csv).
    pub fn read_csv<R: std::io::Read>(input: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let headers = r.headers()?.clone();
        let parameter = match headers.get(0) {
            Some("tau_over_t") => SweptParameter::TauOverT,
            Some("omega_m_t") => SweptParameter::OmegaMT,
            Some("delta_t") => SweptParameter::DeltaT,
            Some("n_atoms") => SweptParameter::NAtoms,
            other => {
                return Err(Error::Config(format!("unknown sweep column {other:?}")));
            }
        };
        let mut rows = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            let f = |i: usize| -> Result<f64> {
                rec.get(i)
                    .unwrap_or("")
                    .parse()
                    .map_err(|e| Error::Config(format!("bad number in column {i}: {e}")))
            };
            rows.push(SweepRow {
                value: f(0)?,
                n_atoms: f(1)? as usize,
                omega_m_t: f(2)?,
                delta_t: f(3)?,
                tau_over_t: f(4)?,
                p_all_a: f(5)?,
                p_b_rydberg: f(6)?,
                p_all_b: f(7)?,
                ghz_fidelity: f(8)?,
                adiabaticity_integral: f(9)?,
                adiabaticity_metric: f(10)?,
                status: rec.get(11).unwrap_or("").to_string(),
            });
        }
        Ok(Self { parameter, rows })
    }
}

/// Writes `(x, y)` pairs as a whitespace-separated two-column file with a
/// `#` header line.
pub fn write_columns<W: std::io::Write>(
    mut out: W,
    names: (&str, &str),
    points: &[(f64, f64)],
) -> Result<()> {
    writeln!(out, "# {} {}", names.0, names.1)?;
    for (x, y) in points {
        writeln!(out, "{x} {y:.10e}")?;
    }
    out.flush()?;
    Ok(())
}

/// Reads a file written by [`write_columns`]: column names and pairs.
pub fn read_columns<R: std::io::BufRead>(input: R) -> Result<((String, String), Vec<(f64, f64)>)> {
    let mut names = (String::new(), String::new());
    let mut points = Vec::new();
    for line in input.lines() {
        let line = line?;
        if let Some(head) = line.strip_prefix('#') {
            let mut it = head.split_whitespace();
            names = (
                it.next().unwrap_or("").to_string(),
                it.next().unwrap_or("").to_string(),
            );
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let mut it = line.split_whitespace().map(str::parse::<f64>);
        match (it.next(), it.next()) {
            (Some(Ok(x)), Some(Ok(y))) => points.push((x, y)),
            _ => return Err(Error::Config(format!("bad two-column line {line:?}"))),
        }
    }
    Ok((names, points))
}

/// `(|a^N> + |a^{N-1} r>) / sqrt(2)`.
pub fn ideal_superposition(n_atoms: usize) -> Result<StateVector> {
    let basis = SymmetricBasis::new(n_atoms)?;
    let mut s = StateVector::zeros(basis);
    let h = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    s.amplitudes_mut()[basis.g(0)] = h;
    s.amplitudes_mut()[basis.r(0)] = h;
    Ok(s)
}

fn evaluate(spec: &SweepSpec, value: f64, opts: &RunOptions) -> SweepRow {
    let (n, params) = spec.point(value);
    let w = params.transfer;
    let mut row = SweepRow {
        value,
        n_atoms: n,
        omega_m_t: w.omega_m_t,
        delta_t: w.delta_t,
        tau_over_t: w.tau_over_t,
        p_all_a: f64::NAN,
        p_b_rydberg: f64::NAN,
        p_all_b: f64::NAN,
        ghz_fidelity: f64::NAN,
        adiabaticity_integral: f64::NAN,
        adiabaticity_metric: f64::NAN,
        status: "ok".into(),
    };
    let result = match spec.observable {
        Observable::FinalPopulations => ideal_superposition(n)
            .and_then(|s| protocols::superposition_transfer(&s, &w, opts)),
        Observable::GhzFidelity => protocols::ghz_protocol(n, &params, opts),
    };
    match result {
        Ok(r) => {
            let s = &r.summary;
            row.p_all_a = s.p_all_a;
            row.p_b_rydberg = s.p_b_rydberg;
            row.p_all_b = s.p_all_b;
            if spec.observable == Observable::GhzFidelity {
                row.ghz_fidelity = s.ghz_fidelity;
            }
            let integral: f64 = s.steps.iter().map(|st| st.adiabaticity_integral).sum();
            row.adiabaticity_integral = integral;
            row.adiabaticity_metric = spec.gamma_t * integral;
        }
        Err(e) => row.status = format!("error: {e}"),
    }
    row
}

fn with_workers<T: Send>(workers: Option<usize>, job: impl FnOnce() -> T + Send) -> Result<T> {
    match workers {
        None => Ok(job()),
        Some(k) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(k.max(1))
                .build()
                .map_err(|e| Error::InvalidArgument(format!("worker pool: {e}")))?;
            Ok(pool.install(job))
        }
    }
}

/// One protocol run per grid point, evaluated in parallel; rows follow the
/// grid order and per-point failures are recorded in the status column.
pub fn run_sweep(spec: &SweepSpec, opts: &RunOptions, workers: Option<usize>) -> Result<SweepResult> {
    spec.validate()?;
    let rows = with_workers(workers, || {
        spec.grid
            .par_iter()
            .map(|&v| evaluate(spec, v, opts))
            .collect::<Vec<_>>()
    })?;
    Ok(SweepResult {
        parameter: spec.parameter,
        rows,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MinAreaSearch {
    pub fidelity_threshold: f64,
    /// Bracket of transfer-step areas `Omega_m T`.
    pub search_range: (f64, f64),
    /// Relative width at which bisection stops.
    pub tolerance: f64,
    /// Coarse scan points used to locate the first success plateau.
    pub scan_points: usize,
    /// Transfer-step detuning as a fraction of the area; `None` keeps the
    /// detuning of the fixed parameters.
    pub delta_ratio: Option<f64>,
    /// Golden-section iterations refining the delay around the best grid value.
    pub tau_refinements: usize,
}

impl Default for MinAreaSearch {
    fn default() -> Self {
        Self {
            fidelity_threshold: 0.95,
            search_range: (20.0, 2000.0),
            tolerance: 0.01,
            scan_points: 40,
            delta_ratio: None,
            tau_refinements: 4,
        }
    }
}

impl MinAreaSearch {
    pub fn validate(&self) -> Result<()> {
        let t = self.fidelity_threshold;
        if !(t > 0.0 && t < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "fidelity threshold must lie in (0, 1), got {t}"
            )));
        }
        let (lo, hi) = self.search_range;
        if !(lo > 0.0 && hi > lo) {
            return Err(Error::InvalidArgument(format!(
                "search range must satisfy 0 < lo < hi, got [{lo}, {hi}]"
            )));
        }
        if !(self.tolerance > 0.0) || self.scan_points < 2 {
            return Err(Error::InvalidArgument(
                "tolerance must be positive and scan_points at least 2".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MinArea {
    pub n_atoms: usize,
    pub omega_m_t_min: f64,
    pub tau_over_t: f64,
    pub fidelity: f64,
    pub evaluations: usize,
}

/// Success predicate of the minimum-area search. The preparation and the
/// final inverse W do not depend on the searched transfer step, so the
/// prepared state and the two needed rows of the final propagator are
/// computed once.
struct Probe<'a> {
    search: &'a MinAreaSearch,
    transfer: WParams,
    prepared: StateVector,
    rows: [Vec<Complex64>; 2],
    opts: RunOptions,
    evaluations: usize,
}

impl<'a> Probe<'a> {
    fn new(
        n_atoms: usize,
        base: &GhzParams,
        search: &'a MinAreaSearch,
        opts: &RunOptions,
    ) -> Result<Self> {
        let opts = RunOptions {
            decay: DecayParams::none(),
            keep_trajectories: false,
            ..*opts
        };
        let prepared = protocols::prepare_superposition(n_atoms, &base.prepare, &opts)?.final_state;
        protocols::check_isolated_regime(&base.inverse)?;
        let last = protocols::w_schedule(&base.inverse, Direction::Inverse)?;
        let basis = prepared.basis();
        let u = propagator::propagator_matrix(basis, &last, last.window(), &opts.integrator)?;
        let row = |i: usize| (0..basis.dim()).map(|j| u[(i, j)]).collect::<Vec<_>>();
        Ok(Self {
            search,
            transfer: base.transfer,
            rows: [row(basis.g(0)), row(basis.g(n_atoms))],
            prepared,
            opts,
            evaluations: 0,
        })
    }

    fn fidelity(&mut self, area: f64, tau: f64) -> f64 {
        self.evaluations += 1;
        let w = WParams {
            omega_m_t: area,
            tau_over_t: tau,
            delta_t: self
                .search
                .delta_ratio
                .map_or(self.transfer.delta_t, |r| r * area),
            ..self.transfer
        };
        if w.omega_m_t < 2.0 * w.delta_t.abs() {
            return 0.0;
        }
        let Ok(pulses) = w.schedule() else {
            return 0.0;
        };
        let Ok(out) = propagator::propagate_final(
            &self.prepared,
            &pulses,
            pulses.window(),
            &self.opts.integrator,
            self.opts.decay,
        ) else {
            return 0.0;
        };
        let project = |row: &[Complex64]| -> Complex64 {
            row.iter().zip(out.amplitudes()).map(|(u, a)| u * a).sum()
        };
        let (ca, cb) = (project(&self.rows[0]), project(&self.rows[1]));
        (0.5 * (ca.norm_sqr() + cb.norm_sqr()) + (ca.conj() * cb).norm()).clamp(0.0, 1.0)
    }

    /// Lower edge of the first success plateau at fixed delay, searched only
    /// below `cap`.
    fn min_area(&mut self, tau: f64, cap: f64) -> Option<(f64, f64)> {
        let thr = self.search.fidelity_threshold;
        let (lo, hi) = self.search.search_range;
        let hi = hi.min(cap);
        if lo > hi {
            return None;
        }
        let f_lo = self.fidelity(lo, tau);
        if f_lo >= thr {
            return Some((lo, f_lo));
        }
        let (lo_all, hi_all) = self.search.search_range;
        let ratio = (hi_all / lo_all).powf(1.0 / (self.search.scan_points - 1) as f64);
        let mut prev = lo;
        let mut a = lo;
        while a < hi {
            a = (a * ratio).min(hi);
            let f = self.fidelity(a, tau);
            if f >= thr {
                // the next scan point must succeed too, so isolated spikes
                // are not mistaken for the plateau
                let next = (a * ratio).min(hi_all);
                if next > a && self.fidelity(next, tau) < thr {
                    prev = a;
                    continue;
                }
                return Some(self.bisect(prev, a, f, tau));
            }
            prev = a;
        }
        None
    }

    fn bisect(&mut self, mut fail: f64, mut pass: f64, mut f_pass: f64, tau: f64) -> (f64, f64) {
        let thr = self.search.fidelity_threshold;
        while (pass - fail) > self.search.tolerance * pass {
            let mid = 0.5 * (fail + pass);
            let f = self.fidelity(mid, tau);
            if f >= thr {
                pass = mid;
                f_pass = f;
            } else {
                fail = mid;
            }
        }
        (pass, f_pass)
    }
}

/// Smallest transfer-step area reaching the fidelity threshold, with the
/// delay optimised over [`TAU_GRID`] and refined by golden section.
///
/// The search runs without decay; the first and last steps keep the
/// parameters of `base`.
pub fn find_min_area(
    n_atoms: usize,
    base: &GhzParams,
    search: &MinAreaSearch,
    opts: &RunOptions,
) -> Result<MinArea> {
    search.validate()?;
    let mut probe = Probe::new(n_atoms, base, search, opts)?;
    let mut best: Option<(f64, f64, f64)> = None;
    let consider = |tau: f64, probe: &mut Probe, best: &mut Option<(f64, f64, f64)>| -> f64 {
        let cap = best.map_or(f64::INFINITY, |(a, _, _)| a);
        match probe.min_area(tau, cap) {
            Some((a, f)) => {
                if best.is_none_or(|(b, _, _)| a < b) {
                    *best = Some((a, tau, f));
                }
                a
            }
            None => f64::INFINITY,
        }
    };
    for &tau in &TAU_GRID {
        consider(tau, &mut probe, &mut best);
    }
    let Some((_, tau0, _)) = best else {
        return Err(Error::Unbracketed(format!(
            "no GHZ fidelity >= {} for N = {n_atoms} in [{}, {}]",
            search.fidelity_threshold, search.search_range.0, search.search_range.1
        )));
    };
    let golden = 0.5 * (5f64.sqrt() - 1.0);
    let (mut a, mut b) = (tau0 - 0.1, tau0 + 0.1);
    let mut c = b - golden * (b - a);
    let mut d = a + golden * (b - a);
    let mut fc = consider(c, &mut probe, &mut best);
    let mut fd = consider(d, &mut probe, &mut best);
    for _ in 0..search.tau_refinements {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - golden * (b - a);
            fc = consider(c, &mut probe, &mut best);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + golden * (b - a);
            fd = consider(d, &mut probe, &mut best);
        }
    }
    let (area, tau, fidelity) = best.expect("grid produced a bracket");
    Ok(MinArea {
        n_atoms,
        omega_m_t_min: area,
        tau_over_t: tau,
        fidelity,
        evaluations: probe.evaluations,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub points: Vec<(f64, f64)>,
    pub alpha: f64,
    pub prefactor: f64,
    /// Euclidean norm of the log-space residuals.
    pub residual: f64,
    /// `(sqrt(N_i N_{i+1}), slope)` between consecutive points.
    pub local_slopes: Vec<(f64, f64)>,
}

/// Least-squares fit of `log y = log C + alpha log N`.
pub fn fit_scaling(points: &[(f64, f64)]) -> Result<ScalingFit> {
    if points.len() < 3 {
        return Err(Error::InvalidArgument(format!(
            "scaling fit needs at least 3 points, got {}",
            points.len()
        )));
    }
    if points.iter().any(|&(x, y)| !(x > 0.0 && y > 0.0)) {
        return Err(Error::InvalidArgument(
            "scaling fit needs positive coordinates".into(),
        ));
    }
    let logs: Vec<(f64, f64)> = points.iter().map(|&(x, y)| (x.ln(), y.ln())).collect();
    let n = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx <= 1e-300 {
        return Err(Error::InvalidArgument("degenerate abscissae".into()));
    }
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let alpha = sxy / sxx;
    let intercept = my - alpha * mx;
    let residual = logs
        .iter()
        .map(|p| (p.1 - intercept - alpha * p.0).powi(2))
        .sum::<f64>()
        .sqrt();
    let local_slopes = points
        .windows(2)
        .filter(|w| w[1].0 != w[0].0)
        .map(|w| {
            let s = (w[1].1.ln() - w[0].1.ln()) / (w[1].0.ln() - w[0].0.ln());
            ((w[0].0 * w[1].0).sqrt(), s)
        })
        .collect();
    Ok(ScalingFit {
        points: points.to_vec(),
        alpha,
        prefactor: intercept.exp(),
        residual,
        local_slopes,
    })
}

/// [`find_min_area`] for each `N`, in parallel, keeping per-`N` failures.
pub fn min_area_points(
    n_values: &[usize],
    base: &GhzParams,
    search: &MinAreaSearch,
    opts: &RunOptions,
    workers: Option<usize>,
) -> Result<Vec<Result<MinArea>>> {
    search.validate()?;
    with_workers(workers, || {
        n_values
            .par_iter()
            .map(|&n| find_min_area(n, base, search, opts))
            .collect::<Vec<_>>()
    })
}

/// Runs [`find_min_area`] for each `N` in parallel and fits the result.
pub fn scaling_study(
    n_values: &[usize],
    base: &GhzParams,
    search: &MinAreaSearch,
    opts: &RunOptions,
    workers: Option<usize>,
) -> Result<(Vec<MinArea>, ScalingFit)> {
    let found = min_area_points(n_values, base, search, opts, workers)?;
    let found: Vec<MinArea> = found.into_iter().collect::<Result<_>>()?;
    let pts: Vec<(f64, f64)> = found
        .iter()
        .map(|m| (m.n_atoms as f64, m.omega_m_t_min))
        .collect();
    let fit = fit_scaling(&pts)?;
    Ok((found, fit))
}
