//! Chain Hamiltonian on the symmetric blockaded subspace, the dark/bright
//! mode frame, and the closed-form adiabatic propagator of the model with the
//! dark-bright coupling neglected.
//!
//! In the interleaved ordering `g_0, r_0, g_1, r_1, ..., r_{N-1}, g_N` the
//! Hamiltonian is tridiagonal: `Omega_1` links `g_m <-> r_m` with strength
//! `Omega_1 sqrt(N-m)` and `Omega_2` links `r_m <-> g_{m+1}` with strength
//! `Omega_2 sqrt(m+1)`.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::pulses::{PulseSchedule, PulseValues};
use crate::quad;
use crate::symbasis::SymmetricBasis;

const I: Complex64 = Complex64::new(0.0, 1.0);

#[derive(Clone, Debug, PartialEq)]
pub struct ChainHamiltonian {
    basis: SymmetricBasis,
    /// Storage order.
    diagonal: Vec<f64>,
    /// Link `p` joins chain positions `p` and `p + 1`.
    links: Vec<f64>,
}

impl ChainHamiltonian {
    pub fn new(basis: SymmetricBasis, v: PulseValues) -> Self {
        let n = basis.n_atoms();
        let mut diagonal = vec![0.0; basis.dim()];
        for i in 0..basis.dim() {
            let (n_a, n_b) = basis.occupations(i);
            diagonal[i] = v.delta1 * n_a as f64 + v.delta2 * n_b as f64;
        }
        let mut links = Vec::with_capacity(2 * n);
        for m in 0..n {
            links.push(v.omega1 * ((n - m) as f64).sqrt());
            links.push(v.omega2 * ((m + 1) as f64).sqrt());
        }
        Self {
            basis,
            diagonal,
            links,
        }
    }

    pub fn basis(&self) -> SymmetricBasis {
        self.basis
    }

    /// Storage index of chain position `p`.
    pub fn chain_index(&self, p: usize) -> usize {
        if p % 2 == 0 {
            p / 2
        } else {
            self.basis.n_atoms() + 1 + p / 2
        }
    }

    pub fn diagonal(&self) -> &[f64] {
        &self.diagonal
    }

    pub fn links(&self) -> &[f64] {
        &self.links
    }

    /// `out = H psi`.
    pub fn apply(&self, psi: &[Complex64], out: &mut [Complex64]) {
        for (o, (d, p)) in out.iter_mut().zip(self.diagonal.iter().zip(psi)) {
            *o = p * d;
        }
        for (p, &w) in self.links.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            let i = self.chain_index(p);
            let j = self.chain_index(p + 1);
            out[i] += psi[j] * w;
            out[j] += psi[i] * w;
        }
    }

    /// `out = -i (H - i gamma/2 P_r) psi`.
    pub fn apply_schrodinger(&self, psi: &[Complex64], out: &mut [Complex64], gamma: f64) {
        self.apply(psi, out);
        let n = self.basis.n_atoms();
        for (i, o) in out.iter_mut().enumerate() {
            let mut v = -I * *o;
            if gamma != 0.0 && i > n {
                v -= psi[i] * (0.5 * gamma);
            }
            *o = v;
        }
    }

    pub fn to_dense(&self) -> DMatrix<Complex64> {
        self.to_dense_real().map(|x| Complex64::new(x, 0.0))
    }

    pub fn to_dense_real(&self) -> DMatrix<f64> {
        let dim = self.basis.dim();
        let mut h = DMatrix::zeros(dim, dim);
        for (i, &d) in self.diagonal.iter().enumerate() {
            h[(i, i)] = d;
        }
        for (p, &w) in self.links.iter().enumerate() {
            let i = self.chain_index(p);
            let j = self.chain_index(p + 1);
            h[(i, j)] = w;
            h[(j, i)] = w;
        }
        h
    }
}

pub fn assemble(basis: SymmetricBasis, pulses: &PulseSchedule, t: f64) -> ChainHamiltonian {
    ChainHamiltonian::new(basis, pulses.eval(t))
}

/// Dark/bright decomposition of the two lower-level modes at one instant.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DressedFrame {
    /// `tan(theta) = Omega_1 / Omega_2`.
    pub theta: f64,
    pub omega0: f64,
    /// `atan2(Omega_0, Delta cos 2theta)`, in `[0, pi]`.
    pub beta: f64,
    /// `sqrt(Omega_0^2 + Delta^2 cos^2 2theta)`.
    pub omega_bar: f64,
    /// `(Delta_1 + Delta_2) / 2`.
    pub common_mode: f64,
    /// `(Delta_1 - Delta_2) / 2 * cos 2theta`.
    pub difference_mode: f64,
    /// `(Delta_1 - Delta_2) / 2 * sin 2theta`.
    pub dark_bright_coupling: f64,
}

impl DressedFrame {
    pub fn from_values(v: PulseValues, theta: f64) -> Self {
        let omega0 = v.omega0();
        let half_diff = 0.5 * (v.delta1 - v.delta2);
        let (s2, c2) = (2.0 * theta).sin_cos();
        let x = half_diff * c2;
        Self {
            theta,
            omega0,
            beta: omega0.atan2(x),
            omega_bar: omega0.hypot(x),
            common_mode: 0.5 * (v.delta1 + v.delta2),
            difference_mode: x,
            dark_bright_coupling: half_diff * s2,
        }
    }

    /// Dressing angle and gap of the bright manifold holding `m` quanta, where
    /// the effective coupling is `2 sqrt(M) Omega_0`.
    pub fn manifold(&self, m: usize) -> (f64, f64) {
        let g = 2.0 * (m as f64).sqrt() * self.omega0;
        (g.atan2(self.difference_mode), g.hypot(self.difference_mode))
    }
}

pub fn dark_bright_decomposition(pulses: &PulseSchedule, t: f64) -> Result<DressedFrame> {
    let v = pulses.eval(t);
    let theta = v.mixing_angle().ok_or(Error::DegenerateFrame { t })?;
    Ok(DressedFrame::from_values(v, theta))
}

fn frame_at(pulses: &PulseSchedule, t: f64) -> DressedFrame {
    DressedFrame::from_values(pulses.eval(t), pulses.tracked_mixing_angle(t))
}

/// Angular momentum operators `(J_1, J_2, J_3)` on one bright manifold in the
/// `(|B^{M-1} r>, |B^M>)` basis.
pub fn spin_operators() -> [nalgebra::Matrix2<Complex64>; 3] {
    let h = Complex64::new(0.5, 0.0);
    let z = Complex64::new(0.0, 0.0);
    let ih = Complex64::new(0.0, 0.5);
    [
        nalgebra::Matrix2::new(z, h, h, z),
        nalgebra::Matrix2::new(z, -ih, ih, z),
        nalgebra::Matrix2::new(h, z, z, -h),
    ]
}

/// Model with the dark-bright coupling dropped, solved in closed form under
/// adiabatic following of each bright manifold.
///
/// The dark/bright basis mirrors the lab storage order: index `j` is
/// `|D^{N-j} B^j>` and index `N + 1 + j` is `|D^{N-1-j} B^j r>`. Bright
/// manifold `M = j` pairs `|D^{N-j} B^j>` with `|D^{N-j} B^{j-1} r>`; the
/// number of dark quanta and `M` are both conserved.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AnalyticModel {
    basis: SymmetricBasis,
}

impl AnalyticModel {
    pub fn new(basis: SymmetricBasis) -> Self {
        Self { basis }
    }

    pub fn basis(&self) -> SymmetricBasis {
        self.basis
    }

    /// Conserved bright-Rydberg excitation number of a dark/bright basis index.
    pub fn excitation_number(&self, index: usize) -> usize {
        let n = self.basis.n_atoms();
        if index <= n {
            index
        } else {
            index - n
        }
    }

    /// Orthogonal change of basis whose columns are the dark/bright Fock
    /// states expressed in the lab `(a, b)` basis at mixing angle `theta`.
    pub fn frame_rotation(&self, theta: f64) -> DMatrix<f64> {
        let n = self.basis.n_atoms();
        let dim = self.basis.dim();
        let mut r = DMatrix::zeros(dim, dim);
        for j in 0..=n {
            for m in 0..=n {
                r[(m, j)] = two_mode_rotation(n, j, m, theta);
            }
        }
        for j in 0..n {
            for m in 0..n {
                r[(n + 1 + m, n + 1 + j)] = two_mode_rotation(n - 1, j, m, theta);
            }
        }
        r
    }

    /// Eq.-(5)-type Hamiltonian in the dark/bright basis at one instant,
    /// including the dark-mode and manifold-dependent diagonal terms.
    pub fn approximate_hamiltonian(&self, v: PulseValues, theta: f64) -> DMatrix<Complex64> {
        let n = self.basis.n_atoms();
        let dim = self.basis.dim();
        let frame = DressedFrame::from_values(v, theta);
        let x = frame.difference_mode;
        let mut h = DMatrix::zeros(dim, dim);
        for j in 0..=n {
            // n_D = N - j, n_B = j
            h[(j, j)] = Complex64::new(x * (n as f64 - 2.0 * j as f64), 0.0);
        }
        for j in 0..n {
            // n_D = N - 1 - j, n_B = j
            h[(n + 1 + j, n + 1 + j)] =
                Complex64::new(x * (n as f64 - 1.0 - 2.0 * j as f64), 0.0);
        }
        for j in 1..=n {
            let up = n + j;
            let g = Complex64::new(frame.omega0 * (j as f64).sqrt(), 0.0);
            h[(up, j)] = g;
            h[(j, up)] = g;
        }
        h
    }

    fn check_regime(&self, pulses: &PulseSchedule, t: f64) -> Result<()> {
        let (a, _) = pulses.window();
        for s in [a, 0.5 * (a + t), t] {
            let v = pulses.eval(s);
            let scale = v.delta1.abs().max(v.delta2.abs()).max(1.0);
            if (v.delta1 + v.delta2).abs() > 1e-12 * scale {
                return Err(Error::Regime(format!(
                    "analytic propagator needs Delta_1 = -Delta_2 (t = {s}: {} vs {})",
                    v.delta1, v.delta2
                )));
            }
        }
        Ok(())
    }

    /// Closed-form propagator from the window start to `t`, in the
    /// dark/bright basis.
    pub fn propagator_db(&self, pulses: &PulseSchedule, t: f64) -> Result<DMatrix<Complex64>> {
        self.check_regime(pulses, t)?;
        let n = self.basis.n_atoms();
        let dim = self.basis.dim();
        let (t0, t1) = pulses.window();
        let t = t.clamp(t0, t1);
        let start = frame_at(pulses, t0);
        if start.omega0 == 0.0 && start.difference_mode == 0.0 {
            return Err(Error::Regime(format!(
                "initial dressing angle undefined at t = {t0}: Omega_0 and Delta cos 2theta both vanish"
            )));
        }
        let now = frame_at(pulses, t);
        let breaks = pulses.breakpoints();
        let panels = 4000.0 / (t1 - t0);
        let integral = |f: &dyn Fn(&DressedFrame) -> f64| {
            quad::gauss_legendre_split(|s| f(&frame_at(pulses, s)), t0, t, &breaks, panels)
        };
        let detuning_area = integral(&|fr| fr.difference_mode);

        let mut u = DMatrix::zeros(dim, dim);
        // dark sector
        u[(0, 0)] = (-I * (n as f64 * detuning_area)).exp();
        for j in 1..=n {
            let (beta0, _) = start.manifold(j);
            let (beta1, _) = now.manifold(j);
            let phi = integral(&|fr| fr.manifold(j).1);
            let mean = (n as f64 - 2.0 * j as f64 + 0.5) * detuning_area;
            let u2 = rotation(beta1)
                * nalgebra::Matrix2::new(
                    (-I * 0.5 * phi).exp(),
                    Complex64::new(0.0, 0.0),
                    Complex64::new(0.0, 0.0),
                    (I * 0.5 * phi).exp(),
                )
                * rotation(beta0).transpose()
                * (-I * mean).exp();
            let up = n + j;
            let idx = [up, j];
            for (r, &ri) in idx.iter().enumerate() {
                for (c, &ci) in idx.iter().enumerate() {
                    u[(ri, ci)] = u2[(r, c)];
                }
            }
        }
        Ok(u)
    }

    /// Closed-form propagator in the lab basis.
    pub fn propagator(&self, pulses: &PulseSchedule, t: f64) -> Result<DMatrix<Complex64>> {
        let (t0, t1) = pulses.window();
        let t = t.clamp(t0, t1);
        let u_db = self.propagator_db(pulses, t)?;
        let r0 = self.frame_rotation(pulses.tracked_mixing_angle(t0)).map(real);
        let r1 = self.frame_rotation(pulses.tracked_mixing_angle(t)).map(real);
        Ok(r1 * u_db * r0.transpose())
    }

    /// Propagator over the full window.
    pub fn w_operator(&self, pulses: &PulseSchedule) -> Result<DMatrix<Complex64>> {
        self.propagator(pulses, pulses.window().1)
    }

    /// Upper bound on the first-order non-adiabatic transition probability,
    /// maximised over bright manifolds: `max_M A_M^2` with
    /// `A_M = (|b'/E|(t0) + |b'/E|(t1) + TV(b'/E)) / 2`, where `b` is the
    /// manifold dressing angle, `E` its gap, and `TV` the total variation.
    pub fn adiabaticity_defect(&self, pulses: &PulseSchedule) -> f64 {
        let (t0, t1) = pulses.window();
        let samples = 20_000;
        let dt = (t1 - t0) / samples as f64;
        let hd = 1e-4 * dt;
        (1..=self.basis.n_atoms())
            .map(|m| {
                let ratio = |t: f64| {
                    let lo = (t - hd).max(t0);
                    let hi = (t + hd).min(t1);
                    let (b_lo, _) = frame_at(pulses, lo).manifold(m);
                    let (b_hi, _) = frame_at(pulses, hi).manifold(m);
                    let (_, gap) = frame_at(pulses, t).manifold(m);
                    (b_hi - b_lo) / (hi - lo) / gap
                };
                let vals: Vec<f64> = (0..=samples).map(|k| ratio(t0 + k as f64 * dt)).collect();
                let tv: f64 = vals.windows(2).map(|w| (w[1] - w[0]).abs()).sum();
                let a = 0.5 * (vals[0].abs() + vals[samples].abs() + tv);
                a * a
            })
            .fold(0.0, f64::max)
    }
}

pub fn analytic_propagator(
    model: &AnalyticModel,
    pulses: &PulseSchedule,
    t: f64,
) -> Result<DMatrix<Complex64>> {
    model.propagator(pulses, t)
}

fn real(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

/// `exp(-i beta J_2)` in the `(up, down)` basis.
fn rotation(beta: f64) -> nalgebra::Matrix2<Complex64> {
    let (s, c) = (0.5 * beta).sin_cos();
    nalgebra::Matrix2::new(real(c), real(-s), real(s), real(c))
}

/// `<a^{n-m} b^m | D^{n-j} B^j>` with `D = a cos - b sin`, `B = a sin + b cos`.
fn two_mode_rotation(n: usize, j: usize, m: usize, theta: f64) -> f64 {
    let (s, c) = theta.sin_cos();
    let total_a = n - m;
    let mut acc = 0.0;
    for p in 0..=(n - j) {
        if p > total_a {
            break;
        }
        let q = total_a - p;
        if q > j {
            continue;
        }
        acc += binomial(n - j, p)
            * binomial(j, q)
            * c.powi((p + j - q) as i32)
            * (-s).powi((n - j - p) as i32)
            * s.powi(q as i32);
    }
    acc * (factorial(n - m) * factorial(m) / (factorial(n - j) * factorial(j))).sqrt()
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|x| x as f64).product()
}

fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Instantaneous spectrum along a time grid with eigenvectors matched between
/// neighbouring points by maximal overlap.
#[derive(Clone, Debug)]
pub struct EigenTrack {
    pub times: Vec<f64>,
    /// `eigenvalues[k][branch]`.
    pub eigenvalues: Vec<Vec<f64>>,
    /// Columns follow the branch order.
    pub eigenvectors: Vec<DMatrix<f64>>,
}

impl EigenTrack {
    /// Smallest distance between `branch` and any other branch along the track.
    pub fn min_gap(&self, branch: usize) -> f64 {
        self.eigenvalues
            .iter()
            .map(|ev| {
                ev.iter()
                    .enumerate()
                    .filter(|&(i, _)| i != branch)
                    .map(|(_, &e)| (e - ev[branch]).abs())
                    .fold(f64::INFINITY, f64::min)
            })
            .fold(f64::INFINITY, f64::min)
    }
}

pub fn eigen_tracking(
    basis: SymmetricBasis,
    pulses: &PulseSchedule,
    t_grid: &[f64],
) -> Result<EigenTrack> {
    if t_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidArgument(
            "time grid must be strictly increasing".into(),
        ));
    }
    let dim = basis.dim();
    let mut track = EigenTrack {
        times: Vec::with_capacity(t_grid.len()),
        eigenvalues: Vec::with_capacity(t_grid.len()),
        eigenvectors: Vec::with_capacity(t_grid.len()),
    };
    for &t in t_grid {
        let h = assemble(basis, pulses, t).to_dense_real();
        let eig = SymmetricEigen::new(h);
        let (vals, vecs) = match track.eigenvectors.last() {
            None => {
                let mut order: Vec<usize> = (0..dim).collect();
                order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
                let vals: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
                let vecs = DMatrix::from_fn(dim, dim, |r, c| eig.eigenvectors[(r, order[c])]);
                (vals, vecs)
            }
            Some(prev) => {
                let overlap = prev.transpose() * &eig.eigenvectors;
                let mut taken = vec![false; dim];
                let mut vals = vec![0.0; dim];
                let mut vecs = DMatrix::zeros(dim, dim);
                let frame = frame_at(pulses, t);
                let gap_tol = 1e-10 * frame.omega_bar.max(1.0);
                // assign strongest overlaps first
                let mut pairs: Vec<(usize, usize, f64)> = (0..dim)
                    .flat_map(|i| (0..dim).map(move |j| (i, j)))
                    .map(|(i, j)| (i, j, overlap[(i, j)].abs()))
                    .collect();
                pairs.sort_by(|a, b| b.2.total_cmp(&a.2));
                let mut assigned = vec![false; dim];
                for (branch, j, w) in pairs {
                    if assigned[branch] || taken[j] {
                        continue;
                    }
                    if w * w < 0.5 {
                        let ej = eig.eigenvalues[j];
                        let gap = (0..dim)
                            .filter(|&k| k != j)
                            .map(|k| (eig.eigenvalues[k] - ej).abs())
                            .fold(f64::INFINITY, f64::min);
                        if gap < gap_tol {
                            return Err(Error::AmbiguousCrossing { t, gap });
                        }
                    }
                    assigned[branch] = true;
                    taken[j] = true;
                    let sign = overlap[(branch, j)].signum();
                    vals[branch] = eig.eigenvalues[j];
                    for r in 0..dim {
                        vecs[(r, branch)] = sign * eig.eigenvectors[(r, j)];
                    }
                }
                (vals, vecs)
            }
        };
        track.times.push(t);
        track.eigenvalues.push(vals);
        track.eigenvectors.push(vecs);
    }
    Ok(track)
}

/// Largest discrepancy found by [`oracle_check`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OracleReport {
    pub atoms: Vec<usize>,
    pub draws: usize,
    /// Largest `|H_chain - P^T H_full P|` entry.
    pub max_deviation: f64,
    /// `(N, row, column)` of that entry in storage order.
    pub worst_entry: Option<(usize, usize, usize)>,
    /// Largest norm of `H_full P e_j` outside the symmetric subspace.
    pub max_leakage: f64,
    pub tolerance: f64,
}

impl OracleReport {
    pub fn passed(&self) -> bool {
        self.max_deviation <= self.tolerance && self.max_leakage <= self.tolerance
    }
}

/// Fault injected into the chain matrix before comparison: `(row, column, shift)`.
pub type InjectedFault = (usize, usize, f64);

/// Compares the chain Hamiltonian against the blockade-projected full-space
/// Hamiltonian for random field values and checks that the symmetric
/// subspace is invariant.
pub fn oracle_check(
    atoms: &[usize],
    draws: usize,
    seed: u64,
    fault: Option<InjectedFault>,
) -> Result<OracleReport> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let tolerance = 1e-12;
    let mut report = OracleReport {
        atoms: atoms.to_vec(),
        draws,
        max_deviation: 0.0,
        worst_entry: None,
        max_leakage: 0.0,
        tolerance,
    };
    for &n in atoms {
        let oracle = crate::symbasis::FullSpaceOracle::new(n)?;
        let basis = SymmetricBasis::new(n)?;
        let p = oracle.embedding().map(|x| Complex64::new(x, 0.0));
        for _ in 0..draws {
            let v = PulseValues::new(
                rng.gen_range(-200.0..200.0),
                rng.gen_range(-200.0..200.0),
                rng.gen_range(-100.0..100.0),
                rng.gen_range(-100.0..100.0),
            );
            let full = oracle.hamiltonian(v);
            let reduced = oracle.restrict(&full);
            let mut chain = ChainHamiltonian::new(basis, v).to_dense();
            if let Some((i, j, shift)) = fault {
                if i < basis.dim() && j < basis.dim() {
                    chain[(i, j)] += shift;
                }
            }
            for i in 0..basis.dim() {
                for j in 0..basis.dim() {
                    let d = (chain[(i, j)] - reduced[(i, j)]).norm();
                    if d > report.max_deviation {
                        report.max_deviation = d;
                        report.worst_entry = Some((n, i, j));
                    }
                }
            }
            let image = &full * &p;
            for col in image.column_iter() {
                let leak = oracle.symmetric_leakage(&col.into_owned());
                report.max_leakage = report.max_leakage.max(leak);
            }
        }
    }
    Ok(report)
}
