//! Composite adiabatic operations: W and its inverse, preparation of the
//! `|a^N> + |a^{N-1} r>` superposition, the superposition transfer, and the
//! three-step GHZ sequence.
//!
//! Times are in units of the pulse width `T`, frequencies in units of `1/T`.

use std::path::Path;

use log::warn;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hamiltonian::DressedFrame;
use crate::propagator::{self, DecayParams, IntegratorConfig, Trajectory};
use crate::pulses::{
    make_half_rap_schedule_with_cut, make_w_schedule, PulseOrder, PulseSchedule, RapVariant,
};
use crate::quad;
use crate::symbasis::{collective_state, CollectiveLabel, StateVector, SymmetricBasis};

/// Largest `|Delta sin 2theta| / E_1` accepted for an isolated W, where `E_1`
/// is the single-quantum bright gap.
pub const ISOLATED_COUPLING_LIMIT: f64 = 0.05;

/// Adiabaticity metric above which protocol drivers warn.
pub const ADIABATICITY_WARNING: f64 = 0.1;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WParams {
    #[serde(rename = "omega_m_T", alias = "omega_m_t")]
    pub omega_m_t: f64,
    #[serde(rename = "delta_T", alias = "delta_t")]
    pub delta_t: f64,
    #[serde(rename = "tau_over_T", alias = "tau_over_t")]
    pub tau_over_t: f64,
    #[serde(default = "default_order")]
    pub order: PulseOrder,
}

fn default_order() -> PulseOrder {
    PulseOrder::Intuitive
}

impl WParams {
    pub fn new(omega_m_t: f64, delta_t: f64, tau_over_t: f64) -> Self {
        Self {
            omega_m_t,
            delta_t,
            tau_over_t,
            order: PulseOrder::Intuitive,
        }
    }

    /// Parameters of a stand-alone W operation.
    pub fn isolated() -> Self {
        Self::new(250.0, 10.0, 1.0)
    }

    /// Parameters of the superposition transfer step.
    pub fn superposition() -> Self {
        Self::new(125.0, 50.0, 0.5)
    }

    /// Transfer settings that hold up across atom numbers in the GHZ sequence.
    pub fn ghz_transfer() -> Self {
        Self::new(175.0, 50.0, 0.43)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("omega_m_t", self.omega_m_t),
            ("delta_t", self.delta_t),
            ("tau_over_t", self.tau_over_t),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        Ok(())
    }

    pub fn schedule(&self) -> Result<PulseSchedule> {
        self.validate()?;
        make_w_schedule(
            self.omega_m_t,
            1.0,
            self.tau_over_t,
            self.delta_t,
            self.order,
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PrepParams {
    pub variant: RapVariant,
    #[serde(rename = "omega_m_T", alias = "omega_m_t")]
    pub omega_m_t: f64,
    /// Initial chirp detuning of the half-chirp variant.
    #[serde(rename = "delta_max_T", alias = "delta_max_t", default = "default_delta_max")]
    pub delta_max_t: f64,
    /// Cut-off time of the half-chirp relative to the pulse centre.
    #[serde(rename = "cut_over_T", alias = "cut_over_t", default)]
    pub cut_over_t: f64,
}

fn default_delta_max() -> f64 {
    PrepParams::default().delta_max_t
}

impl Default for PrepParams {
    fn default() -> Self {
        Self {
            variant: RapVariant::HalfChirp,
            omega_m_t: 125.0,
            delta_max_t: 250.0,
            cut_over_t: 0.0,
        }
    }
}

impl PrepParams {
    pub fn schedule(&self, n_atoms: usize) -> Result<PulseSchedule> {
        make_half_rap_schedule_with_cut(
            self.omega_m_t,
            1.0,
            self.delta_max_t,
            self.variant,
            n_atoms,
            self.cut_over_t,
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Forward,
    Inverse,
}

/// Parameters of the three GHZ steps.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GhzParams {
    pub prepare: PrepParams,
    pub transfer: WParams,
    pub inverse: WParams,
}

impl Default for GhzParams {
    fn default() -> Self {
        Self {
            prepare: PrepParams::default(),
            transfer: WParams::ghz_transfer(),
            inverse: WParams::isolated(),
        }
    }
}

/// Numerical settings shared by all protocol steps.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct RunOptions {
    pub integrator: IntegratorConfig,
    pub decay: DecayParams,
    /// Keep sampled trajectories; otherwise only final states are computed.
    pub keep_trajectories: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepSummary {
    pub name: String,
    pub window: (f64, f64),
    /// Probability of no decay during this step.
    pub success_probability: f64,
    /// Final populations of the step, renormalized, in storage order.
    pub populations: Vec<f64>,
    /// `int theta'^2 / Omega_bar^2 dt`.
    pub adiabaticity_integral: f64,
    /// `gamma` times the integral.
    pub adiabaticity_metric: f64,
    /// `int Omega_bar dt` over the window, the dynamical phase of the closed-form W.
    pub dynamical_phase: f64,
    /// Largest `|Delta sin 2theta| / E_1` along the schedule.
    pub coupling_ratio: f64,
    pub contract_met: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trajectory_csv: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProtocolSummary {
    pub n_atoms: usize,
    pub labels: Vec<String>,
    /// Final amplitudes as `[re, im]` pairs, conditional on no decay.
    pub final_amplitudes: Vec<[f64; 2]>,
    pub ghz_fidelity: f64,
    /// `arg(c_a^* c_b)` of the two GHZ branches.
    pub ghz_phase: f64,
    pub p_all_a: f64,
    pub p_all_b: f64,
    pub p_b_rydberg: f64,
    pub rydberg_population: f64,
    pub success_probability: f64,
    pub adiabaticity_metric: f64,
    pub steps: Vec<StepSummary>,
}

#[derive(Clone, Debug)]
pub struct ProtocolResult {
    pub final_state: StateVector,
    /// One entry per step, present when trajectories were kept.
    pub trajectories: Vec<Option<Trajectory>>,
    pub summary: ProtocolSummary,
}

impl ProtocolResult {
    fn from_steps(
        final_state: StateVector,
        steps: Vec<(StepSummary, Option<Trajectory>)>,
    ) -> Self {
        let basis = final_state.basis();
        let n = basis.n_atoms();
        let pops = final_state.populations();
        let (summaries, trajectories): (Vec<_>, Vec<_>) = steps.into_iter().unzip();
        let summary = ProtocolSummary {
            n_atoms: n,
            labels: basis.label_names(),
            final_amplitudes: final_state.amplitudes().iter().map(|a| [a.re, a.im]).collect(),
            ghz_fidelity: ghz_fidelity(&final_state),
            ghz_phase: ghz_phase(&final_state),
            p_all_a: pops[basis.g(0)],
            p_all_b: pops[basis.g(n)],
            p_b_rydberg: pops[basis.r(n - 1)],
            rydberg_population: final_state.rydberg_population(),
            success_probability: summaries.iter().map(|s: &StepSummary| s.success_probability).product(),
            adiabaticity_metric: summaries.iter().map(|s| s.adiabaticity_metric).sum(),
            steps: summaries,
        };
        Self {
            final_state,
            trajectories,
            summary,
        }
    }

    pub fn population(&self, label: CollectiveLabel) -> f64 {
        self.final_state.population(label).unwrap_or(0.0)
    }

    pub fn ghz_fidelity(&self) -> f64 {
        self.summary.ghz_fidelity
    }

    /// Writes each kept trajectory as `<stem>_<step>.csv` in `dir` and records
    /// the paths in the step summaries.
    pub fn save_trajectories(&mut self, dir: &Path, stem: &str) -> Result<()> {
        for (summary, traj) in self.summary.steps.iter_mut().zip(&self.trajectories) {
            if let Some(traj) = traj {
                let name = format!("{stem}_{}.csv", summary.name);
                traj.save_csv(&dir.join(&name))?;
                summary.trajectory_csv = Some(name);
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.summary)?)
    }
}

/// `max_phi |<GHZ(phi)|psi>|^2 = (P_a + P_b)/2 + |c_a^* c_b|`.
pub fn ghz_fidelity(state: &StateVector) -> f64 {
    let (ca, cb) = ghz_branches(state);
    (0.5 * (ca.norm_sqr() + cb.norm_sqr()) + (ca.conj() * cb).norm()).clamp(0.0, 1.0)
}

/// Relative phase of the `|b^N>` branch against the `|a^N>` branch.
pub fn ghz_phase(state: &StateVector) -> f64 {
    let (ca, cb) = ghz_branches(state);
    (ca.conj() * cb).arg()
}

fn ghz_branches(state: &StateVector) -> (Complex64, Complex64) {
    let b = state.basis();
    let amps = state.amplitudes();
    (amps[b.g(0)], amps[b.g(b.n_atoms())])
}

/// `gamma * int theta'^2 / Omega_bar^2 dt` over the schedule window.
pub fn adiabaticity_metric(pulses: &PulseSchedule, gamma: f64) -> f64 {
    if gamma == 0.0 {
        return 0.0;
    }
    gamma * adiabaticity_integral(pulses)
}

pub fn adiabaticity_integral(pulses: &PulseSchedule) -> f64 {
    let (a, b) = pulses.window();
    let h = 1e-6 * (b - a);
    let integrand = |t: f64| {
        let v = pulses.eval(t);
        let o2 = v.omega1 * v.omega1 + v.omega2 * v.omega2;
        if o2 == 0.0 {
            return 0.0;
        }
        let lo = pulses.eval((t - h).max(a));
        let hi = pulses.eval((t + h).min(b));
        let dt = (t + h).min(b) - (t - h).max(a);
        let d1 = (hi.omega1 - lo.omega1) / dt;
        let d2 = (hi.omega2 - lo.omega2) / dt;
        let theta_dot = (d1 * v.omega2 - v.omega1 * d2) / o2;
        let frame = DressedFrame::from_values(v, v.omega1.atan2(v.omega2));
        if frame.omega_bar == 0.0 {
            return 0.0;
        }
        (theta_dot / frame.omega_bar).powi(2)
    };
    quad::gauss_legendre_split(integrand, a, b, &pulses.breakpoints(), 200.0)
}

fn dynamical_phase(pulses: &PulseSchedule) -> f64 {
    let (a, b) = pulses.window();
    quad::gauss_legendre_split(
        |t| DressedFrame::from_values(pulses.eval(t), pulses.tracked_mixing_angle(t)).omega_bar,
        a,
        b,
        &pulses.breakpoints(),
        200.0,
    )
}

/// Largest ratio of the dark-bright coupling `|Delta sin 2theta|` to the
/// single-quantum bright gap along the schedule.
pub fn coupling_ratio(pulses: &PulseSchedule) -> f64 {
    let (a, b) = pulses.window();
    let n = 4000;
    (0..=n)
        .map(|k| {
            let t = a + (b - a) * k as f64 / n as f64;
            let frame = DressedFrame::from_values(pulses.eval(t), pulses.tracked_mixing_angle(t));
            let (_, gap) = frame.manifold(1);
            if gap == 0.0 {
                0.0
            } else {
                frame.dark_bright_coupling.abs() / gap
            }
        })
        .fold(0.0, f64::max)
}

fn run_step(
    name: &str,
    state: &StateVector,
    pulses: &PulseSchedule,
    opts: &RunOptions,
) -> Result<(StateVector, StepSummary, Option<Trajectory>)> {
    let window = pulses.window();
    let (end, traj) = if opts.keep_trajectories {
        let tr = propagator::propagate(state, pulses, window, &opts.integrator, opts.decay)?;
        (tr.final_state(), Some(tr))
    } else {
        let s = propagator::propagate_final(state, pulses, window, &opts.integrator, opts.decay)?;
        (s, None)
    };
    let norm2 = end.norm_sqr();
    if !(norm2 > 0.0) {
        return Err(Error::Tolerance(format!("state lost all norm in step {name}")));
    }
    if opts.decay.rate() == 0.0 && (norm2 - 1.0).abs() > 1e-9 {
        warn!("step {name}: norm drift {:e}", (norm2 - 1.0).abs());
    }
    let end = if opts.decay.rate() > 0.0 {
        end.normalized()
    } else {
        end
    };
    let integral = adiabaticity_integral(pulses);
    let metric = opts.decay.rate() * integral;
    if metric >= ADIABATICITY_WARNING {
        warn!("step {name}: adiabaticity metric {metric:.3} >= {ADIABATICITY_WARNING}");
    }
    let summary = StepSummary {
        name: name.to_string(),
        window,
        success_probability: norm2.min(1.0),
        populations: end.populations(),
        adiabaticity_integral: integral,
        adiabaticity_metric: metric,
        dynamical_phase: dynamical_phase(pulses),
        coupling_ratio: coupling_ratio(pulses),
        contract_met: true,
        trajectory_csv: None,
    };
    Ok((end, summary, traj))
}

/// Schedule of W in the requested direction; the inverse is the forward
/// schedule played backwards with all fields negated.
pub fn w_schedule(params: &WParams, direction: Direction) -> Result<PulseSchedule> {
    let fwd = params.schedule()?;
    Ok(match direction {
        Direction::Forward => fwd,
        Direction::Inverse => fwd.time_reversed(),
    })
}

/// Fails with a regime error when the dark-bright coupling is not negligible.
pub fn check_isolated_regime(params: &WParams) -> Result<f64> {
    let ratio = coupling_ratio(&params.schedule()?);
    if ratio > ISOLATED_COUPLING_LIMIT {
        return Err(Error::Regime(format!(
            "dark-bright coupling ratio {ratio:.3} exceeds {ISOLATED_COUPLING_LIMIT} \
             (omega_m_t {}, delta_t {}, tau_over_t {}); increase omega_m_t or reduce delta_t",
            params.omega_m_t, params.delta_t, params.tau_over_t
        )));
    }
    Ok(ratio)
}

pub fn w_operation(
    state: &StateVector,
    params: &WParams,
    direction: Direction,
    opts: &RunOptions,
) -> Result<ProtocolResult> {
    check_isolated_regime(params)?;
    let pulses = w_schedule(params, direction)?;
    let name = match direction {
        Direction::Forward => "w",
        Direction::Inverse => "w_inverse",
    };
    let (end, summary, traj) = run_step(name, state, &pulses, opts)?;
    Ok(ProtocolResult::from_steps(end, vec![(summary, traj)]))
}

/// `|<psi| W^-1 W |psi>|^2`.
pub fn w_roundtrip_fidelity(
    state: &StateVector,
    params: &WParams,
    opts: &RunOptions,
) -> Result<f64> {
    let fwd = w_operation(state, params, Direction::Forward, opts)?;
    let back = w_operation(&fwd.final_state, params, Direction::Inverse, opts)?;
    Ok(state.inner(&back.final_state).norm_sqr())
}

fn superposition_contract(state: &StateVector, tolerance: f64) -> bool {
    let b = state.basis();
    let p = state.populations();
    let (g0, r0) = (b.g(0), b.r(0));
    (p[g0] - 0.5).abs() <= tolerance
        && (p[r0] - 0.5).abs() <= tolerance
        && p.iter()
            .enumerate()
            .all(|(i, &x)| i == g0 || i == r0 || x <= tolerance)
}

/// Drives `|a^N>` into `(|a^N> + e^{i phi} |a^{N-1} r>) / sqrt(2)`.
pub fn prepare_superposition(
    n_atoms: usize,
    params: &PrepParams,
    opts: &RunOptions,
) -> Result<ProtocolResult> {
    let basis = SymmetricBasis::new(n_atoms)?;
    let start = collective_state(basis, CollectiveLabel::AllA)?;
    let pulses = params.schedule(n_atoms)?;
    let (end, mut summary, traj) = run_step("prepare", &start, &pulses, opts)?;
    summary.contract_met = superposition_contract(&end, 0.01);
    if !summary.contract_met {
        let p = end.populations();
        return Err(Error::Tolerance(format!(
            "{:?} preparation did not converge: P(g_0) = {:.4}, P(r_0) = {:.4}",
            params.variant,
            p[basis.g(0)],
            p[basis.r(0)]
        )));
    }
    Ok(ProtocolResult::from_steps(end, vec![(summary, traj)]))
}

fn transfer_contract(state: &StateVector) -> bool {
    let b = state.basis();
    let n = b.n_atoms();
    let p = state.populations();
    let (pa, pr) = (p[b.g(0)], p[b.r(n - 1)]);
    let target = std::f64::consts::FRAC_1_SQRT_2;
    pa >= 0.45
        && pr >= 0.45
        && (pa.sqrt() - target).abs() <= 0.05
        && (pr.sqrt() - target).abs() <= 0.05
}

/// Adiabatic return of `|a^N>` together with Raman passage of
/// `|a^{N-1} r>` to `|b^{N-1} r>`.
pub fn superposition_transfer(
    state: &StateVector,
    params: &WParams,
    opts: &RunOptions,
) -> Result<ProtocolResult> {
    params.validate()?;
    if params.omega_m_t < 2.0 * params.delta_t.abs() {
        return Err(Error::Regime(format!(
            "superposition transfer needs omega_m_t >= 2 |delta_t| (got {} vs {})",
            params.omega_m_t, params.delta_t
        )));
    }
    if params.omega_m_t < 5.0 * params.delta_t.abs() {
        warn!(
            "omega_m_t = {} is less than 5 |delta_t| = {}",
            params.omega_m_t,
            5.0 * params.delta_t.abs()
        );
    }
    let pulses = params.schedule()?;
    let (end, mut summary, traj) = run_step("transfer", state, &pulses, opts)?;
    summary.contract_met = transfer_contract(&end);
    Ok(ProtocolResult::from_steps(end, vec![(summary, traj)]))
}

/// Preparation, superposition transfer and inverse W in sequence.
pub fn ghz_protocol(
    n_atoms: usize,
    params: &GhzParams,
    opts: &RunOptions,
) -> Result<ProtocolResult> {
    if n_atoms < 2 {
        return Err(Error::InvalidArgument(format!(
            "GHZ protocol needs at least 2 atoms, got {n_atoms}"
        )));
    }
    let prep = prepare_superposition(n_atoms, &params.prepare, opts)?;
    let transfer = superposition_transfer(&prep.final_state, &params.transfer, opts)?;
    let inverse = w_operation(&transfer.final_state, &params.inverse, Direction::Inverse, opts)?;
    let mut steps = Vec::with_capacity(3);
    for r in [prep, transfer, inverse.clone()] {
        steps.extend(r.summary.steps.into_iter().zip(r.trajectories));
    }
    Ok(ProtocolResult::from_steps(inverse.final_state, steps))
}
