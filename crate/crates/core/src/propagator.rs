//! Time evolution on the symmetric subspace with optional Rydberg loss.

use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hamiltonian::ChainHamiltonian;
use crate::integrator::{self, Stats, Tolerances};
use crate::pulses::PulseSchedule;
use crate::symbasis::{StateVector, SymmetricBasis};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IntegratorConfig {
    pub rtol: f64,
    pub atol: f64,
    /// Upper bound on the step; derived from the schedule when absent.
    pub max_step: Option<f64>,
    /// Number of trajectory samples including both endpoints.
    pub samples: usize,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            rtol: 1e-12,
            atol: 1e-14,
            max_step: None,
            samples: 2000,
        }
    }
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rtol > 0.0 && self.atol > 0.0) {
            return Err(Error::Tolerance(format!(
                "tolerances must be positive (rtol {}, atol {})",
                self.rtol, self.atol
            )));
        }
        if let Some(h) = self.max_step {
            if !(h > 0.0) {
                return Err(Error::Tolerance(format!("max_step must be positive, got {h}")));
            }
        }
        if self.samples < 2 {
            return Err(Error::InvalidArgument(format!(
                "need at least 2 samples, got {}",
                self.samples
            )));
        }
        Ok(())
    }

    /// `0.1 min(1, 1/peak)` unless set explicitly, and never above that bound.
    pub fn tolerances(&self, pulses: &PulseSchedule) -> Tolerances {
        let peak = pulses.peak_frequency();
        let bound = 0.1 * if peak > 1.0 { 1.0 / peak } else { 1.0 };
        Tolerances {
            rtol: self.rtol,
            atol: self.atol,
            max_step: self.max_step.map_or(bound, |h| h.min(bound)),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DecayParams {
    pub gamma: f64,
    pub enabled: bool,
}

impl DecayParams {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn new(gamma: f64) -> Result<Self> {
        if !(gamma >= 0.0) || !gamma.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "decay rate must be non-negative, got {gamma}"
            )));
        }
        Ok(Self {
            gamma,
            enabled: gamma > 0.0,
        })
    }

    pub fn rate(&self) -> f64 {
        if self.enabled {
            self.gamma
        } else {
            0.0
        }
    }
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    basis: SymmetricBasis,
    pub times: Vec<f64>,
    pub states: Vec<Vec<Complex64>>,
    pub stats: Stats,
}

impl Trajectory {
    pub fn basis(&self) -> SymmetricBasis {
        self.basis
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn final_state(&self) -> StateVector {
        let amps = self.states.last().cloned().unwrap_or_default();
        StateVector::from_amplitudes(self.basis, amps).expect("trajectory states match basis")
    }

    pub fn norms(&self) -> Vec<f64> {
        self.states
            .iter()
            .map(|s| s.iter().map(|a| a.norm_sqr()).sum())
            .collect()
    }

    /// `populations()[k][i]` is the population of basis state `i` at sample `k`.
    pub fn populations(&self) -> Vec<Vec<f64>> {
        self.states
            .iter()
            .map(|s| s.iter().map(|a| a.norm_sqr()).collect())
            .collect()
    }

    pub fn max_rydberg_population(&self) -> f64 {
        let n = self.basis.n_atoms();
        self.states
            .iter()
            .map(|s| s[n + 1..].iter().map(|a| a.norm_sqr()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["t".to_string()];
        header.extend(self.basis.label_names());
        header.push("norm2".into());
        w.write_record(&header)?;
        for (t, s) in self.times.iter().zip(&self.states) {
            let mut row = Vec::with_capacity(header.len());
            row.push(format!("{t:.12e}"));
            let mut norm = 0.0;
            for a in s {
                let p = a.norm_sqr();
                norm += p;
                row.push(format!("{p:.12e}"));
            }
            row.push(format!("{norm:.12e}"));
            w.write_record(&row)?;
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
}

/// Uniform sample grid over `span` with `count >= 2` points.
pub fn sample_grid(span: (f64, f64), count: usize) -> Vec<f64> {
    let count = count.max(2);
    let step = (span.1 - span.0) / (count - 1) as f64;
    let mut grid: Vec<f64> = (0..count).map(|k| span.0 + k as f64 * step).collect();
    grid[count - 1] = span.1;
    grid
}

/// Integrates `y' = rhs(t, y)` across `span`, restarting at each breakpoint
/// so that kinks in the drive never fall inside a step.
pub fn evolve<F>(
    mut rhs: F,
    y0: &[Complex64],
    span: (f64, f64),
    breaks: &[f64],
    samples: &[f64],
    tol: Tolerances,
    mut on_sample: impl FnMut(usize, f64, &[Complex64]),
    stats: &mut Stats,
) -> Result<Vec<Complex64>>
where
    F: FnMut(f64, &[Complex64], &mut [Complex64]),
{
    let (a, b) = span;
    if !(b > a) {
        return Err(Error::InvalidArgument(format!(
            "empty propagation window [{a}, {b}]"
        )));
    }
    let mut edges = vec![a];
    edges.extend(breaks.iter().copied().filter(|&t| t > a && t < b));
    edges.push(b);
    let mut y = y0.to_vec();
    let mut next = 0;
    for seg in edges.windows(2) {
        let (s0, s1) = (seg[0], seg[1]);
        let last = s1 == b;
        let start = next;
        while next < samples.len() && (samples[next] < s1 || (last && samples[next] <= s1)) {
            next += 1;
        }
        let local: Vec<f64> = samples[start..next]
            .iter()
            .map(|&t| t.clamp(s0, s1))
            .collect();
        y = integrator::integrate(
            &mut rhs,
            s0,
            s1,
            &y,
            &local,
            tol,
            |k, t, s| on_sample(start + k, t, s),
            stats,
        )?;
    }
    Ok(y)
}

fn check_span(pulses: &PulseSchedule, span: (f64, f64)) -> Result<()> {
    let (a, b) = pulses.window();
    let slack = 1e-9 * (b - a);
    if span.0 < a - slack || span.1 > b + slack || !(span.1 > span.0) {
        return Err(Error::InvalidArgument(format!(
            "propagation window [{}, {}] outside schedule support [{a}, {b}]",
            span.0, span.1
        )));
    }
    Ok(())
}

/// Solves `i psi' = (H(t) - i gamma/2 P_r) psi` over `span`.
pub fn propagate(
    state: &StateVector,
    pulses: &PulseSchedule,
    span: (f64, f64),
    config: &IntegratorConfig,
    decay: DecayParams,
) -> Result<Trajectory> {
    config.validate()?;
    check_span(pulses, span)?;
    let norm = state.norm_sqr();
    if (norm - 1.0).abs() > 1e-6 {
        return Err(Error::InvalidArgument(format!(
            "initial state not normalized (norm^2 = {norm})"
        )));
    }
    let basis = state.basis();
    let gamma = decay.rate();
    let grid = sample_grid(span, config.samples);
    let mut states = vec![Vec::new(); grid.len()];
    let mut stats = Stats::default();
    evolve(
        |t, y, dy| ChainHamiltonian::new(basis, pulses.eval(t)).apply_schrodinger(y, dy, gamma),
        state.amplitudes(),
        span,
        &pulses.breakpoints(),
        &grid,
        config.tolerances(pulses),
        |k, _, s| states[k] = s.to_vec(),
        &mut stats,
    )?;
    Ok(Trajectory {
        basis,
        times: grid,
        states,
        stats,
    })
}

/// Final state only, without storing samples.
pub fn propagate_final(
    state: &StateVector,
    pulses: &PulseSchedule,
    span: (f64, f64),
    config: &IntegratorConfig,
    decay: DecayParams,
) -> Result<StateVector> {
    config.validate()?;
    check_span(pulses, span)?;
    let basis = state.basis();
    let gamma = decay.rate();
    let mut stats = Stats::default();
    let y = evolve(
        |t, y, dy| ChainHamiltonian::new(basis, pulses.eval(t)).apply_schrodinger(y, dy, gamma),
        state.amplitudes(),
        span,
        &pulses.breakpoints(),
        &[],
        config.tolerances(pulses),
        |_, _, _| {},
        &mut stats,
    )?;
    StateVector::from_amplitudes(basis, y)
}

/// Columns are the propagated basis states.
pub fn propagator_matrix(
    basis: SymmetricBasis,
    pulses: &PulseSchedule,
    span: (f64, f64),
    config: &IntegratorConfig,
) -> Result<DMatrix<Complex64>> {
    let dim = basis.dim();
    let mut u = DMatrix::zeros(dim, dim);
    for j in 0..dim {
        let mut e = StateVector::zeros(basis);
        e.amplitudes_mut()[j] = Complex64::new(1.0, 0.0);
        let col = propagate_final(&e, pulses, span, config, DecayParams::none())?;
        for (i, a) in col.amplitudes().iter().enumerate() {
            u[(i, j)] = *a;
        }
    }
    Ok(u)
}

pub fn success_probability(trajectory: &Trajectory) -> f64 {
    trajectory.final_state().norm_sqr().clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pulses::{PulseValues, Waveform};
    use crate::symbasis::{build_basis, collective_state, CollectiveLabel};
    use approx::assert_abs_diff_eq;

    #[test]
    fn zero_field_is_identity() {
        let b = build_basis(3).unwrap();
        let s = PulseSchedule::constant(PulseValues::new(0.0, 0.0, 0.7, -0.3), (0.0, 5.0)).unwrap();
        let u = propagator_matrix(b, &s, (0.0, 5.0), &IntegratorConfig::default()).unwrap();
        for i in 0..b.dim() {
            assert_abs_diff_eq!(u[(i, i)].norm(), 1.0, epsilon = 1e-10);
        }
        assert!((u.map(|z| z.norm()) - DMatrix::identity(7, 7)).abs().max() < 1e-10);
    }

    #[test]
    fn single_atom_rabi() {
        let b = build_basis(1).unwrap();
        let om = 1.3;
        let s = PulseSchedule::constant(PulseValues::new(om, 0.0, 0.0, 0.0), (0.0, 3.0)).unwrap();
        let psi = collective_state(b, CollectiveLabel::AllA).unwrap();
        let cfg = IntegratorConfig {
            samples: 31,
            ..Default::default()
        };
        let tr = propagate(&psi, &s, (0.0, 3.0), &cfg, DecayParams::none()).unwrap();
        for (t, p) in tr.times.iter().zip(tr.populations()) {
            assert_abs_diff_eq!(p[b.r(0)], (om * t).sin().powi(2), epsilon = 1e-9);
        }
    }

    #[test]
    fn decay_only_touches_rydberg() {
        let b = build_basis(2).unwrap();
        let s = PulseSchedule::constant(PulseValues::new(0.0, 0.0, 0.0, 0.0), (0.0, 1.0)).unwrap();
        let psi = collective_state(b, CollectiveLabel::AllA).unwrap();
        let tr = propagate(
            &psi,
            &s,
            (0.0, 1.0),
            &IntegratorConfig::default(),
            DecayParams::new(0.5).unwrap(),
        )
        .unwrap();
        assert_abs_diff_eq!(success_probability(&tr), 1.0, epsilon = 1e-12);

        let psi = collective_state(b, CollectiveLabel::R(0)).unwrap();
        let tr = propagate(
            &psi,
            &s,
            (0.0, 1.0),
            &IntegratorConfig::default(),
            DecayParams::new(0.5).unwrap(),
        )
        .unwrap();
        assert_abs_diff_eq!(success_probability(&tr), (-0.5f64).exp(), epsilon = 1e-9);
    }

    #[test]
    fn rejects_bad_inputs() {
        let b = build_basis(1).unwrap();
        let s = PulseSchedule::zero((0.0, 1.0)).unwrap();
        let psi = collective_state(b, CollectiveLabel::AllA).unwrap();
        let cfg = IntegratorConfig::default();
        assert!(propagate(&psi, &s, (0.0, 2.0), &cfg, DecayParams::none()).is_err());
        let bad = IntegratorConfig {
            rtol: 0.0,
            ..cfg
        };
        assert!(propagate(&psi, &s, (0.0, 1.0), &bad, DecayParams::none()).is_err());
        assert!(DecayParams::new(-1.0).is_err());
        let half = psi.scaled(Complex64::new(0.5, 0.0));
        assert!(propagate(&half, &s, (0.0, 1.0), &cfg, DecayParams::none()).is_err());
    }

    #[test]
    fn samples_straddle_breakpoints() {
        let b = build_basis(1).unwrap();
        let s = PulseSchedule::new(
            Waveform::Rect {
                amplitude: 1.0,
                start: 0.3,
                end: 0.7,
            },
            Waveform::Constant(0.0),
            Waveform::Constant(0.0),
            Waveform::Constant(0.0),
            (0.0, 1.0),
        )
        .unwrap();
        let psi = collective_state(b, CollectiveLabel::AllA).unwrap();
        let cfg = IntegratorConfig {
            samples: 11,
            ..Default::default()
        };
        let tr = propagate(&psi, &s, (0.0, 1.0), &cfg, DecayParams::none()).unwrap();
        assert_eq!(tr.len(), 11);
        let p = tr.populations();
        assert_abs_diff_eq!(p[10][b.r(0)], 0.4f64.sin().powi(2), epsilon = 1e-9);
        assert_abs_diff_eq!(p[5][b.r(0)], 0.2f64.sin().powi(2), epsilon = 1e-9);
        assert_eq!(p[2][b.r(0)], 0.0);
    }

    #[test]
    fn csv_layout() {
        let b = build_basis(2).unwrap();
        let s = PulseSchedule::zero((0.0, 1.0)).unwrap();
        let psi = collective_state(b, CollectiveLabel::AllA).unwrap();
        let cfg = IntegratorConfig {
            samples: 3,
            ..Default::default()
        };
        let tr = propagate(&psi, &s, (0.0, 1.0), &cfg, DecayParams::none()).unwrap();
        let mut buf = Vec::new();
        tr.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let first = text.lines().next().unwrap();
        assert_eq!(first, "t,g_0,g_1,g_2,r_0,r_1,norm2");
        assert_eq!(text.lines().count(), 4);
    }

    #[test]
    fn reversed_schedule_is_the_adjoint() {
        use crate::pulses::{make_w_schedule, PulseOrder};
        let b = build_basis(3).unwrap();
        let s = make_w_schedule(40.0, 1.0, 0.8, 12.0, PulseOrder::Intuitive).unwrap();
        let r = s.time_reversed();
        let cfg = IntegratorConfig::default();
        let u = propagator_matrix(b, &s, s.window(), &cfg).unwrap();
        let v = propagator_matrix(b, &r, r.window(), &cfg).unwrap();
        assert!((&v - u.adjoint()).camax() < 1e-3);
        let id = &v * &u;
        let phase = id[(0, 0)] / id[(0, 0)].norm();
        let dev = (&id - DMatrix::identity(b.dim(), b.dim()) * phase).camax();
        assert!(dev < 1e-3, "{dev}");
        // mixing is non-trivial
        assert!((u[(0, 0)].norm() - 1.0).abs() > 0.1);
    }
}
