//! Adaptive Dormand-Prince 8(5,3) integrator for complex linear systems with
//! 7th-order dense output.

mod tableau;

use num_complex::Complex64;

use crate::error::{Error, Result};

const SAFETY: f64 = 0.9;
const MIN_FACTOR: f64 = 0.2;
const MAX_FACTOR: f64 = 10.0;
const ERROR_EXPONENT: f64 = -1.0 / 8.0;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tolerances {
    pub rtol: f64,
    pub atol: f64,
    pub max_step: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct Stats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

/// Integrates `y' = f(t, y)` from `t0` to `t1 > t0`.
///
/// `samples` must be sorted and lie in `[t0, t1]`; the state at each is
/// written to `on_sample` via dense output. Returns the final state.
pub fn integrate<F, S>(
    mut f: F,
    t0: f64,
    t1: f64,
    y0: &[Complex64],
    samples: &[f64],
    tol: Tolerances,
    mut on_sample: S,
    stats: &mut Stats,
) -> Result<Vec<Complex64>>
where
    F: FnMut(f64, &[Complex64], &mut [Complex64]),
    S: FnMut(usize, f64, &[Complex64]),
{
    if !(tol.rtol > 0.0 && tol.atol > 0.0 && tol.max_step > 0.0) {
        return Err(Error::Tolerance(format!(
            "tolerances must be positive (rtol {}, atol {}, max_step {})",
            tol.rtol, tol.atol, tol.max_step
        )));
    }
    if tol.rtol < 100.0 * f64::EPSILON {
        return Err(Error::Tolerance(format!(
            "rtol {:e} below machine resolution",
            tol.rtol
        )));
    }
    let n = y0.len();
    let mut y = y0.to_vec();
    let mut next_sample = 0;
    while next_sample < samples.len() && samples[next_sample] <= t0 {
        on_sample(next_sample, samples[next_sample], &y);
        next_sample += 1;
    }
    if t1 <= t0 {
        return Ok(y);
    }

    let zero = Complex64::new(0.0, 0.0);
    let mut k = vec![vec![zero; n]; tableau::N_STAGES_EXTENDED];
    let mut y_new = vec![zero; n];
    let mut tmp = vec![zero; n];
    let mut f_new = vec![zero; n];
    let mut dense = vec![vec![zero; n]; tableau::INTERPOLATOR_POWER];

    let mut f0 = vec![zero; n];
    f(t0, &y, &mut f0);
    stats.evaluations += 1;

    let mut t = t0;
    let mut h = initial_step(&mut f, t0, &y, &f0, tol, stats).min(t1 - t0);

    loop {
        let min_step = 10.0 * f64::EPSILON * t.abs().max(1.0);
        if h < min_step {
            return Err(Error::StepUnderflow { t, h });
        }
        let mut step_rejected = false;
        let t_new = loop {
            let h_try = h.min(t1 - t);
            let t_try = if t + h_try >= t1 { t1 } else { t + h_try };
            let h_try = t_try - t;
            // stages
            k[0].copy_from_slice(&f0);
            for s in 1..tableau::N_STAGES {
                for i in 0..n {
                    let mut acc = zero;
                    for (j, kj) in k.iter().enumerate().take(s) {
                        let a = tableau::A[s][j];
                        if a != 0.0 {
                            acc += kj[i] * a;
                        }
                    }
                    tmp[i] = y[i] + acc * h_try;
                }
                let (_, tail) = k.split_at_mut(s);
                f(t + tableau::C[s] * h_try, &tmp, &mut tail[0]);
            }
            for i in 0..n {
                let mut acc = zero;
                for (j, kj) in k.iter().enumerate().take(tableau::N_STAGES) {
                    acc += kj[i] * tableau::B[j];
                }
                y_new[i] = y[i] + acc * h_try;
            }
            f(t_try, &y_new, &mut f_new);
            k[tableau::N_STAGES].copy_from_slice(&f_new);
            stats.evaluations += tableau::N_STAGES;

            let err = error_norm(&k, &y, &y_new, h_try, tol);
            if err < 1.0 {
                let factor = if err == 0.0 {
                    MAX_FACTOR
                } else {
                    (SAFETY * err.powf(ERROR_EXPONENT)).min(MAX_FACTOR)
                };
                let factor = if step_rejected { factor.min(1.0) } else { factor };
                h = (h_try * factor).min(tol.max_step);
                stats.accepted += 1;
                break t_try;
            }
            stats.rejected += 1;
            step_rejected = true;
            h = h_try * (SAFETY * err.powf(ERROR_EXPONENT)).max(MIN_FACTOR);
            if h < min_step {
                return Err(Error::StepUnderflow { t, h });
            }
        };

        if next_sample < samples.len() && samples[next_sample] <= t_new {
            build_dense(&mut f, &mut k, &mut dense, &mut tmp, t, t_new - t, &y, &y_new, &f0, &f_new, stats);
            while next_sample < samples.len() && samples[next_sample] <= t_new {
                let x = (samples[next_sample] - t) / (t_new - t);
                evaluate_dense(&dense, &y, x, &mut tmp);
                on_sample(next_sample, samples[next_sample], &tmp);
                next_sample += 1;
            }
        }

        t = t_new;
        std::mem::swap(&mut y, &mut y_new);
        f0.copy_from_slice(&f_new);
        if t >= t1 {
            break;
        }
        if !y.iter().all(|c| c.re.is_finite() && c.im.is_finite()) {
            return Err(Error::Tolerance(format!("non-finite state at t = {t}")));
        }
    }
    Ok(y)
}

fn error_norm(
    k: &[Vec<Complex64>],
    y: &[Complex64],
    y_new: &[Complex64],
    h: f64,
    tol: Tolerances,
) -> f64 {
    let n = y.len();
    let mut e5 = 0.0;
    let mut e3 = 0.0;
    for i in 0..n {
        let scale = tol.atol + tol.rtol * y[i].norm().max(y_new[i].norm());
        let mut a5 = Complex64::new(0.0, 0.0);
        let mut a3 = Complex64::new(0.0, 0.0);
        for (j, kj) in k.iter().enumerate().take(tableau::N_STAGES + 1) {
            a5 += kj[i] * tableau::E5[j];
            a3 += kj[i] * tableau::E3[j];
        }
        e5 += (a5 / scale).norm_sqr();
        e3 += (a3 / scale).norm_sqr();
    }
    if e5 == 0.0 && e3 == 0.0 {
        return 0.0;
    }
    let denom = e5 + 0.01 * e3;
    h.abs() * e5 / (denom * n as f64).sqrt()
}

#[allow(clippy::too_many_arguments)]
fn build_dense<F>(
    f: &mut F,
    k: &mut [Vec<Complex64>],
    dense: &mut [Vec<Complex64>],
    tmp: &mut [Complex64],
    t: f64,
    h: f64,
    y_old: &[Complex64],
    y_new: &[Complex64],
    f_old: &[Complex64],
    f_new: &[Complex64],
    stats: &mut Stats,
) where
    F: FnMut(f64, &[Complex64], &mut [Complex64]),
{
    let n = y_old.len();
    for s in tableau::N_STAGES + 1..tableau::N_STAGES_EXTENDED {
        for i in 0..n {
            let mut acc = Complex64::new(0.0, 0.0);
            for (j, kj) in k.iter().enumerate().take(s) {
                let a = tableau::A[s][j];
                if a != 0.0 {
                    acc += kj[i] * a;
                }
            }
            tmp[i] = y_old[i] + acc * h;
        }
        let (_, tail) = k.split_at_mut(s);
        f(t + tableau::C[s] * h, tmp, &mut tail[0]);
        stats.evaluations += 1;
    }
    for i in 0..n {
        let dy = y_new[i] - y_old[i];
        dense[0][i] = dy;
        dense[1][i] = f_old[i] * h - dy;
        dense[2][i] = dy * 2.0 - (f_new[i] + f_old[i]) * h;
        for (row, drow) in tableau::D.iter().enumerate() {
            let mut acc = Complex64::new(0.0, 0.0);
            for (j, kj) in k.iter().enumerate() {
                acc += kj[i] * drow[j];
            }
            dense[3 + row][i] = acc * h;
        }
    }
}

fn evaluate_dense(dense: &[Vec<Complex64>], y_old: &[Complex64], x: f64, out: &mut [Complex64]) {
    let n = y_old.len();
    for i in 0..n {
        let mut acc = Complex64::new(0.0, 0.0);
        for (p, row) in dense.iter().rev().enumerate() {
            acc += row[i];
            acc *= if p % 2 == 0 { x } else { 1.0 - x };
        }
        out[i] = y_old[i] + acc;
    }
}

fn initial_step<F>(
    f: &mut F,
    t0: f64,
    y0: &[Complex64],
    f0: &[Complex64],
    tol: Tolerances,
    stats: &mut Stats,
) -> f64
where
    F: FnMut(f64, &[Complex64], &mut [Complex64]),
{
    let n = y0.len() as f64;
    let scale = |y: Complex64| tol.atol + tol.rtol * y.norm();
    let d0 = (y0.iter().map(|&y| (y.norm() / scale(y)).powi(2)).sum::<f64>() / n).sqrt();
    let d1 = (y0
        .iter()
        .zip(f0)
        .map(|(&y, fy)| (fy.norm() / scale(y)).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    let h0 = if d0 < 1e-5 || d1 < 1e-5 {
        1e-6
    } else {
        0.01 * d0 / d1
    }
    .min(tol.max_step);
    let y1: Vec<Complex64> = y0.iter().zip(f0).map(|(y, fy)| y + fy * h0).collect();
    let mut f1 = vec![Complex64::new(0.0, 0.0); y0.len()];
    f(t0 + h0, &y1, &mut f1);
    stats.evaluations += 1;
    let d2 = (y0
        .iter()
        .zip(f0.iter().zip(&f1))
        .map(|(&y, (a, b))| ((b - a).norm() / scale(y)).powi(2))
        .sum::<f64>()
        / n)
        .sqrt()
        / h0;
    let h1 = if d1 <= 1e-15 && d2 <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(1.0 / 8.0)
    };
    (100.0 * h0).min(h1).min(tol.max_step)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn tol() -> Tolerances {
        Tolerances {
            rtol: 1e-11,
            atol: 1e-13,
            max_step: 1.0,
        }
    }

    #[test]
    fn exponential_decay_and_rotation() {
        // y' = (-0.3 - 2i) y
        let lam = Complex64::new(-0.3, -2.0);
        let mut stats = Stats::default();
        let y = integrate(
            |_, y, dy| dy[0] = lam * y[0],
            0.0,
            3.0,
            &[Complex64::new(1.0, 0.0)],
            &[],
            tol(),
            |_, _, _| {},
            &mut stats,
        )
        .unwrap();
        let exact = (lam * 3.0).exp();
        assert_abs_diff_eq!(y[0].re, exact.re, epsilon = 1e-10);
        assert_abs_diff_eq!(y[0].im, exact.im, epsilon = 1e-10);
        assert!(stats.accepted > 0);
    }

    #[test]
    fn dense_output_matches_exact_solution() {
        // time-dependent rate exercises interpolation between steps
        let samples: Vec<f64> = (0..=40).map(|k| k as f64 * 0.1).collect();
        let mut got = vec![Complex64::new(0.0, 0.0); samples.len()];
        let mut stats = Stats::default();
        integrate(
            |t, y, dy| dy[0] = Complex64::new(0.0, -t) * y[0],
            0.0,
            4.0,
            &[Complex64::new(1.0, 0.0)],
            &samples,
            Tolerances {
                max_step: 0.7,
                ..tol()
            },
            |i, _, y| got[i] = y[0],
            &mut stats,
        )
        .unwrap();
        for (t, y) in samples.iter().zip(&got) {
            let exact = Complex64::new(0.0, -t * t / 2.0).exp();
            assert!((y - exact).norm() < 1e-9, "t={t}: {y} vs {exact}");
        }
    }

    #[test]
    fn rejects_bad_tolerances() {
        let mut stats = Stats::default();
        let r = integrate(
            |_, _, dy| dy[0] = Complex64::new(0.0, 0.0),
            0.0,
            1.0,
            &[Complex64::new(1.0, 0.0)],
            &[],
            Tolerances {
                rtol: 1e-20,
                atol: 1e-12,
                max_step: 1.0,
            },
            |_, _, _| {},
            &mut stats,
        );
        assert!(matches!(r, Err(Error::Tolerance(_))));
    }

    #[test]
    fn error_shrinks_with_tolerance() {
        let run = |rtol: f64| {
            let mut stats = Stats::default();
            let y = integrate(
                |t, y, dy| {
                    let w = 5.0 * (-(t - 2.0) * (t - 2.0)).exp();
                    dy[0] = Complex64::new(0.0, -w) * y[1];
                    dy[1] = Complex64::new(0.0, -w) * y[0];
                },
                0.0,
                4.0,
                &[Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)],
                &[],
                Tolerances {
                    rtol,
                    atol: rtol * 1e-2,
                    max_step: 1.0,
                },
                |_, _, _| {},
                &mut stats,
            )
            .unwrap();
            y
        };
        let reference = run(1e-13);
        let err = |rtol| {
            let y = run(rtol);
            ((y[0] - reference[0]).norm_sqr() + (y[1] - reference[1]).norm_sqr()).sqrt()
        };
        let errs: Vec<f64> = [1e-5, 1e-7, 1e-9].iter().map(|&r| err(r)).collect();
        assert!(errs[0] > errs[1] && errs[1] > errs[2], "{errs:?}");
    }
}
