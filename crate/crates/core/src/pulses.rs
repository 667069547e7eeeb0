//! Time-dependent Rabi frequencies and detunings.
//!
//! Times are measured in units of the Gaussian width `T` and frequencies in
//! units of `1/T`, so the dimensionless products `Omega_m T` and `Delta T`
//! are the natural parameters.

use std::f64::consts::FRAC_PI_4;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Pulse half-support beyond the outermost peak, in units of the width.
pub const SUPPORT_WIDTHS: f64 = 5.0;

/// Duration of the smooth switch-off that models an abrupt cut.
pub const CUTOFF_RAMP: f64 = 0.05;

/// Instantaneous field values `(Omega_1, Omega_2, Delta_1, Delta_2)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PulseValues {
    pub omega1: f64,
    pub omega2: f64,
    pub delta1: f64,
    pub delta2: f64,
}

impl PulseValues {
    pub fn new(omega1: f64, omega2: f64, delta1: f64, delta2: f64) -> Self {
        Self {
            omega1,
            omega2,
            delta1,
            delta2,
        }
    }

    /// rms Rabi frequency `sqrt(Omega_1^2 + Omega_2^2)`.
    pub fn omega0(&self) -> f64 {
        self.omega1.hypot(self.omega2)
    }

    /// Mixing angle with `tan(theta) = Omega_1 / Omega_2`; `None` when both vanish.
    pub fn mixing_angle(&self) -> Option<f64> {
        if self.omega0() == 0.0 {
            None
        } else {
            Some(self.omega1.atan2(self.omega2))
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianPulse {
    pub amplitude: f64,
    pub center: f64,
    pub width: f64,
}

impl GaussianPulse {
    pub fn new(amplitude: f64, center: f64, width: f64) -> Result<Self> {
        if !(width > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "pulse width must be positive, got {width}"
            )));
        }
        if !(amplitude >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "pulse amplitude must be non-negative, got {amplitude}"
            )));
        }
        Ok(Self {
            amplitude,
            center,
            width,
        })
    }

    pub fn value(&self, t: f64) -> f64 {
        let x = (t - self.center) / self.width;
        self.amplitude * (-x * x).exp()
    }
}

/// Linear detuning sweep, constant outside `[t_a, t_b]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChirpRamp {
    pub start_value: f64,
    pub end_value: f64,
    pub t_a: f64,
    pub t_b: f64,
}

impl ChirpRamp {
    pub fn value(&self, t: f64) -> f64 {
        if t <= self.t_a {
            self.start_value
        } else if t >= self.t_b {
            self.end_value
        } else {
            let s = (t - self.t_a) / (self.t_b - self.t_a);
            self.start_value + s * (self.end_value - self.start_value)
        }
    }
}

/// Scalar time profile used for both envelopes and detunings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Waveform {
    Constant(f64),
    Gaussian(GaussianPulse),
    /// Flat top on `[start, end)`, zero elsewhere.
    Rect { amplitude: f64, start: f64, end: f64 },
    /// Gaussian up to `cut`, then a cosine-squared switch-off lasting `ramp`.
    CutGaussian {
        pulse: GaussianPulse,
        cut: f64,
        ramp: f64,
    },
    Ramp(ChirpRamp),
    /// `inner(axis - t)`.
    Mirrored { inner: Box<Waveform>, axis: f64 },
    Scaled { inner: Box<Waveform>, factor: f64 },
}

impl Waveform {
    pub fn value(&self, t: f64) -> f64 {
        match self {
            Waveform::Constant(v) => *v,
            Waveform::Gaussian(g) => g.value(t),
            Waveform::Rect {
                amplitude,
                start,
                end,
            } => {
                if t >= *start && t < *end {
                    *amplitude
                } else {
                    0.0
                }
            }
            Waveform::CutGaussian { pulse, cut, ramp } => {
                if t <= *cut {
                    pulse.value(t)
                } else if t >= cut + ramp {
                    0.0
                } else {
                    let s = (t - cut) / ramp;
                    let c = (0.5 * std::f64::consts::PI * s).cos();
                    pulse.value(t) * c * c
                }
            }
            Waveform::Ramp(r) => r.value(t),
            Waveform::Mirrored { inner, axis } => inner.value(axis - t),
            Waveform::Scaled { inner, factor } => factor * inner.value(t),
        }
    }

    /// Times where the profile or its derivative may jump.
    pub fn breakpoints(&self) -> Vec<f64> {
        match self {
            Waveform::Constant(_) | Waveform::Gaussian(_) => Vec::new(),
            Waveform::Rect { start, end, .. } => vec![*start, *end],
            Waveform::CutGaussian { cut, ramp, .. } => vec![*cut, cut + ramp],
            Waveform::Ramp(r) => vec![r.t_a, r.t_b],
            Waveform::Mirrored { inner, axis } => {
                inner.breakpoints().into_iter().map(|b| axis - b).collect()
            }
            Waveform::Scaled { inner, .. } => inner.breakpoints(),
        }
    }

    fn mirrored(&self, axis: f64) -> Waveform {
        match self {
            Waveform::Constant(v) => Waveform::Constant(*v),
            Waveform::Mirrored { inner, axis: a } if *a == axis => (**inner).clone(),
            other => Waveform::Mirrored {
                inner: Box::new(other.clone()),
                axis,
            },
        }
    }

    fn negated(&self) -> Waveform {
        match self {
            Waveform::Constant(v) => Waveform::Constant(-v),
            Waveform::Scaled { inner, factor } if *factor == -1.0 => (**inner).clone(),
            other => Waveform::Scaled {
                inner: Box::new(other.clone()),
                factor: -1.0,
            },
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PulseOrder {
    /// `Omega_1` precedes `Omega_2`.
    Intuitive,
    Counterintuitive,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RapVariant {
    /// Chirped Gaussian stopped at resonance.
    HalfChirp,
    /// Collective resonant rectangle producing an equal superposition.
    ResonantHalfPi,
}

/// Complete drive of the ensemble over a finite window.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PulseSchedule {
    pub omega1: Waveform,
    pub omega2: Waveform,
    pub delta1: Waveform,
    pub delta2: Waveform,
    window: (f64, f64),
}

impl PulseSchedule {
    pub fn new(
        omega1: Waveform,
        omega2: Waveform,
        delta1: Waveform,
        delta2: Waveform,
        window: (f64, f64),
    ) -> Result<Self> {
        if !(window.1 > window.0) {
            return Err(Error::InvalidArgument(format!(
                "empty schedule window [{}, {}]",
                window.0, window.1
            )));
        }
        Ok(Self {
            omega1,
            omega2,
            delta1,
            delta2,
            window,
        })
    }

    /// All fields off over `window`.
    pub fn zero(window: (f64, f64)) -> Result<Self> {
        Self::constant(PulseValues::new(0.0, 0.0, 0.0, 0.0), window)
    }

    pub fn constant(v: PulseValues, window: (f64, f64)) -> Result<Self> {
        Self::new(
            Waveform::Constant(v.omega1),
            Waveform::Constant(v.omega2),
            Waveform::Constant(v.delta1),
            Waveform::Constant(v.delta2),
            window,
        )
    }

    pub fn window(&self) -> (f64, f64) {
        self.window
    }

    pub fn duration(&self) -> f64 {
        self.window.1 - self.window.0
    }

    /// Field values at `t`; outside the window the boundary value is held.
    pub fn eval(&self, t: f64) -> PulseValues {
        let t = t.clamp(self.window.0, self.window.1);
        PulseValues {
            omega1: self.omega1.value(t),
            omega2: self.omega2.value(t),
            delta1: self.delta1.value(t),
            delta2: self.delta2.value(t),
        }
    }

    /// Sorted interior breakpoints, deduplicated.
    pub fn breakpoints(&self) -> Vec<f64> {
        let (a, b) = self.window;
        let mut pts: Vec<f64> = [&self.omega1, &self.omega2, &self.delta1, &self.delta2]
            .iter()
            .flat_map(|w| w.breakpoints())
            .filter(|&t| t > a && t < b)
            .collect();
        pts.sort_by(|x, y| x.total_cmp(y));
        pts.dedup_by(|x, y| (*x - *y).abs() < 1e-12);
        pts
    }

    /// Schedule played backwards in time with every field negated, so that
    /// `H_rev(t) = -H(a + b - t)` and the propagator is the adjoint of the
    /// forward one. A sign flip of the Rabi envelopes is a pi laser phase.
    pub fn time_reversed(&self) -> PulseSchedule {
        let axis = self.window.0 + self.window.1;
        PulseSchedule {
            omega1: self.omega1.mirrored(axis).negated(),
            omega2: self.omega2.mirrored(axis).negated(),
            delta1: self.delta1.mirrored(axis).negated(),
            delta2: self.delta2.mirrored(axis).negated(),
            window: self.window,
        }
    }

    /// Mixing angle at `t`, frozen at the nearest well-defined value when both
    /// Rabi frequencies vanish. Falls back to pi/4 for an all-zero drive.
    pub fn tracked_mixing_angle(&self, t: f64) -> f64 {
        if let Some(theta) = self.eval(t).mixing_angle() {
            return theta;
        }
        let (a, b) = self.window;
        let n = 4096;
        let step = (b - a) / n as f64;
        let mut s = t;
        while s > a {
            s -= step;
            if let Some(theta) = self.eval(s).mixing_angle() {
                return theta;
            }
        }
        let mut s = t;
        while s < b {
            s += step;
            if let Some(theta) = self.eval(s).mixing_angle() {
                return theta;
            }
        }
        FRAC_PI_4
    }

    /// Peak of `sqrt(Omega_0^2 + ((Delta_1 - Delta_2)/2)^2)` on a uniform grid.
    pub fn peak_frequency(&self) -> f64 {
        let (a, b) = self.window;
        let n = 2000;
        (0..=n)
            .map(|k| {
                let v = self.eval(a + (b - a) * k as f64 / n as f64);
                v.omega0().hypot(0.5 * (v.delta1 - v.delta2))
            })
            .fold(0.0, f64::max)
    }
}

pub fn eval_schedule(schedule: &PulseSchedule, t: f64) -> PulseValues {
    schedule.eval(t)
}

/// Gaussian pair with opposite constant detunings `Delta_1 = -Delta_2 = delta`.
///
/// Intuitive order puts the `Omega_1` peak at `-tau` and the `Omega_2` peak at
/// `+tau`. The window extends `5 T` beyond both peaks.
pub fn make_w_schedule(
    omega_m: f64,
    width: f64,
    tau: f64,
    delta: f64,
    order: PulseOrder,
) -> Result<PulseSchedule> {
    if !(width > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "pulse width must be positive, got {width}"
        )));
    }
    if !(tau >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "pulse delay must be non-negative, got {tau}"
        )));
    }
    let (c1, c2) = match order {
        PulseOrder::Intuitive => (-tau, tau),
        PulseOrder::Counterintuitive => (tau, -tau),
    };
    let half = SUPPORT_WIDTHS * width + tau;
    PulseSchedule::new(
        Waveform::Gaussian(GaussianPulse::new(omega_m, c1, width)?),
        Waveform::Gaussian(GaussianPulse::new(omega_m, c2, width)?),
        Waveform::Constant(delta),
        Waveform::Constant(-delta),
        (-half, half),
    )
}

/// Duration of the collective rectangle giving an equal `g_0`/`r_0` superposition.
pub fn half_pi_duration(omega_m: f64, n_atoms: usize) -> f64 {
    FRAC_PI_4 / ((n_atoms as f64).sqrt() * omega_m)
}

/// Preparation drive for the `(|a^N> + |a^{N-1} r>)/sqrt(2)` superposition.
///
/// `HalfChirp` sweeps `Delta_1` linearly from `-delta_max` at the window start
/// to resonance at the pulse centre, then switches `Omega_1` off while on
/// resonance. `ResonantHalfPi` is a resonant rectangle of duration
/// [`half_pi_duration`].
pub fn make_half_rap_schedule(
    omega_m: f64,
    width: f64,
    delta_max: f64,
    variant: RapVariant,
    n_atoms: usize,
) -> Result<PulseSchedule> {
    make_half_rap_schedule_with_cut(omega_m, width, delta_max, variant, n_atoms, 0.0)
}

/// As [`make_half_rap_schedule`], with the half-chirp cut-off moved to `cut`
/// (relative to the pulse centre, in the same time unit as `width`).
pub fn make_half_rap_schedule_with_cut(
    omega_m: f64,
    width: f64,
    delta_max: f64,
    variant: RapVariant,
    n_atoms: usize,
    cut: f64,
) -> Result<PulseSchedule> {
    if !(width > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "pulse width must be positive, got {width}"
        )));
    }
    if n_atoms == 0 {
        return Err(Error::InvalidArgument("n_atoms must be at least 1".into()));
    }
    match variant {
        RapVariant::HalfChirp => {
            if !(delta_max > 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "half_chirp needs delta_max > 0, got {delta_max}"
                )));
            }
            let start = -SUPPORT_WIDTHS * width;
            let ramp = CUTOFF_RAMP * width;
            PulseSchedule::new(
                Waveform::CutGaussian {
                    pulse: GaussianPulse::new(omega_m, 0.0, width)?,
                    cut,
                    ramp,
                },
                Waveform::Constant(0.0),
                Waveform::Ramp(ChirpRamp {
                    start_value: -delta_max,
                    end_value: 0.0,
                    t_a: start,
                    t_b: cut,
                }),
                Waveform::Constant(0.0),
                (start, cut + ramp),
            )
        }
        RapVariant::ResonantHalfPi => {
            if !(omega_m > 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "resonant_half_pi needs omega_m > 0, got {omega_m}"
                )));
            }
            let tp = half_pi_duration(omega_m, n_atoms);
            PulseSchedule::new(
                Waveform::Rect {
                    amplitude: omega_m,
                    start: 0.0,
                    end: tp,
                },
                Waveform::Constant(0.0),
                Waveform::Constant(0.0),
                Waveform::Constant(0.0),
                (0.0, tp),
            )
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn gaussian_values() {
        let g = GaussianPulse::new(3.0, 0.4, 1.0).unwrap();
        assert_eq!(g.value(0.4), 3.0);
        assert_abs_diff_eq!(g.value(1.4), 3.0 * (-1f64).exp(), epsilon = 1e-15);
        assert!(g.value(0.4 + 5.0) < 1.4e-11 * 3.0);
        assert!(GaussianPulse::new(1.0, 0.0, 0.0).is_err());
        assert!(GaussianPulse::new(-1.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn fig2_schedule_midpoint() {
        let s = make_w_schedule(125.0, 1.0, 0.5, 50.0, PulseOrder::Intuitive).unwrap();
        let v = s.eval(0.0);
        let expect = 125.0 * (-0.25f64).exp();
        assert_abs_diff_eq!(v.omega1, expect, epsilon = 1e-12);
        assert_abs_diff_eq!(v.omega2, expect, epsilon = 1e-12);
        assert_eq!((v.delta1, v.delta2), (50.0, -50.0));
        assert_eq!(s.window(), (-5.5, 5.5));
        // Omega_1 peaks first
        assert_abs_diff_eq!(s.eval(-0.5).omega1, 125.0);
    }

    #[test]
    fn intuitive_mixing_angle_runs_from_half_pi_to_zero() {
        let s = make_w_schedule(125.0, 1.0, 1.0, 50.0, PulseOrder::Intuitive).unwrap();
        let (a, b) = s.window();
        assert_abs_diff_eq!(s.eval(a).mixing_angle().unwrap(), FRAC_PI_4 * 2.0, epsilon = 1e-6);
        assert_abs_diff_eq!(s.eval(b).mixing_angle().unwrap(), 0.0, epsilon = 1e-6);
    }

    #[test]
    fn zero_delay_locks_mixing_angle() {
        let s = make_w_schedule(10.0, 1.0, 0.0, 5.0, PulseOrder::Intuitive).unwrap();
        for k in 0..50 {
            let t = -5.0 + 0.2 * k as f64;
            let v = s.eval(t);
            assert_eq!(v.omega1, v.omega2);
            assert_abs_diff_eq!(v.mixing_angle().unwrap(), FRAC_PI_4);
        }
    }

    #[test]
    fn eval_holds_boundary_values_outside_window() {
        let s = make_half_rap_schedule(10.0, 1.0, 20.0, RapVariant::HalfChirp, 3).unwrap();
        let (a, b) = s.window();
        assert_eq!(s.eval(a - 10.0), s.eval(a));
        assert_eq!(s.eval(b + 10.0), s.eval(b));
        assert_eq!(s.eval(b).omega1, 0.0);
        assert_eq!(s.eval(0.0).delta1, 0.0);
        assert_eq!(s.eval(a).delta1, -20.0);
    }

    #[test]
    fn resonant_half_pi_duration() {
        let s = make_half_rap_schedule(1.0, 1.0, 0.0, RapVariant::ResonantHalfPi, 4).unwrap();
        assert_abs_diff_eq!(s.duration(), std::f64::consts::PI / 8.0, epsilon = 1e-15);
        assert_eq!(s.eval(0.1).omega1, 1.0);
        assert_eq!(s.eval(0.1).omega2, 0.0);
        assert!(make_half_rap_schedule(0.0, 1.0, 0.0, RapVariant::ResonantHalfPi, 4).is_err());
        assert!(make_half_rap_schedule(1.0, 1.0, 0.0, RapVariant::HalfChirp, 4).is_err());
    }

    #[test]
    fn non_positive_width_rejected() {
        assert!(make_w_schedule(1.0, 0.0, 1.0, 1.0, PulseOrder::Intuitive).is_err());
        assert!(make_w_schedule(1.0, -1.0, 1.0, 1.0, PulseOrder::Intuitive).is_err());
    }

    #[test]
    fn breakpoints_are_interior_and_sorted() {
        let s = make_half_rap_schedule(10.0, 1.0, 20.0, RapVariant::HalfChirp, 3).unwrap();
        assert_eq!(s.breakpoints(), vec![0.0]);
        let r = s.time_reversed();
        let (a, b) = r.window();
        let bp = r.breakpoints();
        assert!(bp.iter().all(|&t| t > a && t < b));
    }

    proptest! {
        #[test]
        fn mirror_symmetry(om in 0.1f64..300.0, tau in 0.01f64..2.0, d in -80f64..80.0, t in -6.0f64..6.0) {
            let i = make_w_schedule(om, 1.0, tau, d, PulseOrder::Intuitive).unwrap();
            let c = make_w_schedule(om, 1.0, tau, d, PulseOrder::Counterintuitive).unwrap();
            let a = i.eval(-t);
            let b = c.eval(t);
            prop_assert_eq!(a.omega1, b.omega1);
            prop_assert_eq!(a.omega2, b.omega2);
        }

        #[test]
        fn mixing_angle_monotone_between_peaks(om in 1.0f64..300.0, tau in 0.05f64..2.0) {
            let s = make_w_schedule(om, 1.0, tau, 10.0, PulseOrder::Intuitive).unwrap();
            let mut prev = f64::INFINITY;
            for k in 0..=100 {
                let t = -tau + 2.0 * tau * k as f64 / 100.0;
                let th = s.eval(t).mixing_angle().unwrap();
                prop_assert!(th <= prev);
                prev = th;
            }
        }

        #[test]
        fn eval_is_pure(om in 0.0f64..300.0, tau in 0.0f64..2.0, t in -8.0f64..8.0) {
            let s = make_w_schedule(om, 1.0, tau, 50.0, PulseOrder::Intuitive).unwrap();
            let a = s.eval(t);
            let b = s.clone().eval(t);
            prop_assert_eq!(a.omega1.to_bits(), b.omega1.to_bits());
            prop_assert_eq!(a.omega2.to_bits(), b.omega2.to_bits());
        }

        #[test]
        fn time_reversal_mirrors_fields(om in 0.1f64..300.0, tau in 0.0f64..2.0, d in -80f64..80.0, t in -6.0f64..6.0) {
            let s = make_w_schedule(om, 1.0, tau, d, PulseOrder::Intuitive).unwrap();
            let r = s.time_reversed();
            let a = s.eval(-t);
            let b = r.eval(t);
            prop_assert!((a.omega1 + b.omega1).abs() <= 1e-12 * om);
            prop_assert!((a.omega2 + b.omega2).abs() <= 1e-12 * om);
            prop_assert_eq!(a.delta1, -b.delta1);
        }
    }
}
