//! Permutation-symmetric collective states of N blockaded atoms.
//!
//! With perfect blockade at most one atom sits in the Rydberg level, so the
//! symmetric sector is spanned by the ground-manifold states
//! `g_m = |a^{N-m} b^m>` (m = 0..=N) and the singly-excited states
//! `r_m = |a^{N-1-m} b^m r>` (m = 0..N). Storage order puts the ground
//! manifold first: `g_m -> m`, `r_m -> N + 1 + m`.

use std::collections::HashMap;
use std::fmt;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pulses::PulseValues;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SymmetricBasis {
    n_atoms: usize,
}

/// A collective basis state.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CollectiveLabel {
    /// `|a^N>`, same as `G(0)`.
    AllA,
    /// `|b^N>`, same as `G(N)`.
    AllB,
    /// Ground manifold with `m` atoms in `b`.
    G(usize),
    /// One Rydberg excitation with `m` atoms in `b`.
    R(usize),
}

impl fmt::Display for CollectiveLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CollectiveLabel::AllA => write!(f, "all_a"),
            CollectiveLabel::AllB => write!(f, "all_b"),
            CollectiveLabel::G(m) => write!(f, "g_{m}"),
            CollectiveLabel::R(m) => write!(f, "r_{m}"),
        }
    }
}

pub fn build_basis(n_atoms: usize) -> Result<SymmetricBasis> {
    SymmetricBasis::new(n_atoms)
}

impl SymmetricBasis {
    pub fn new(n_atoms: usize) -> Result<Self> {
        if n_atoms == 0 {
            return Err(Error::InvalidArgument("n_atoms must be at least 1".into()));
        }
        Ok(Self { n_atoms })
    }

    pub fn n_atoms(&self) -> usize {
        self.n_atoms
    }

    pub fn dim(&self) -> usize {
        2 * self.n_atoms + 1
    }

    pub fn g(&self, m: usize) -> usize {
        debug_assert!(m <= self.n_atoms);
        m
    }

    pub fn r(&self, m: usize) -> usize {
        debug_assert!(m < self.n_atoms);
        self.n_atoms + 1 + m
    }

    pub fn index(&self, label: CollectiveLabel) -> Result<usize> {
        let n = self.n_atoms;
        match label {
            CollectiveLabel::AllA => Ok(0),
            CollectiveLabel::AllB => Ok(n),
            CollectiveLabel::G(m) if m <= n => Ok(m),
            CollectiveLabel::G(m) => Err(Error::OutOfRange {
                what: "g_m",
                index: m,
                max: n,
            }),
            CollectiveLabel::R(m) if m < n => Ok(n + 1 + m),
            CollectiveLabel::R(m) => Err(Error::OutOfRange {
                what: "r_m",
                index: m,
                max: n - 1,
            }),
        }
    }

    /// Inverse of [`index`](Self::index); always returns `G` or `R`.
    pub fn label(&self, index: usize) -> Result<CollectiveLabel> {
        let n = self.n_atoms;
        if index <= n {
            Ok(CollectiveLabel::G(index))
        } else if index < self.dim() {
            Ok(CollectiveLabel::R(index - n - 1))
        } else {
            Err(Error::OutOfRange {
                what: "basis index",
                index,
                max: self.dim() - 1,
            })
        }
    }

    /// Column labels `g_0..g_N, r_0..r_{N-1}` in storage order.
    pub fn label_names(&self) -> Vec<String> {
        (0..self.dim())
            .map(|i| self.label(i).map(|l| l.to_string()).unwrap_or_default())
            .collect()
    }

    pub fn is_rydberg(&self, index: usize) -> bool {
        index > self.n_atoms && index < self.dim()
    }

    /// Number of atoms in `a` and in `b` for a basis index.
    pub fn occupations(&self, index: usize) -> (usize, usize) {
        let n = self.n_atoms;
        if index <= n {
            (n - index, index)
        } else {
            let m = index - n - 1;
            (n - 1 - m, m)
        }
    }
}

/// Complex amplitudes over a [`SymmetricBasis`].
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    basis: SymmetricBasis,
    amplitudes: Vec<Complex64>,
}

impl StateVector {
    pub fn zeros(basis: SymmetricBasis) -> Self {
        Self {
            basis,
            amplitudes: vec![Complex64::new(0.0, 0.0); basis.dim()],
        }
    }

    pub fn from_amplitudes(basis: SymmetricBasis, amplitudes: Vec<Complex64>) -> Result<Self> {
        if amplitudes.len() != basis.dim() {
            return Err(Error::InvalidArgument(format!(
                "expected {} amplitudes, got {}",
                basis.dim(),
                amplitudes.len()
            )));
        }
        Ok(Self { basis, amplitudes })
    }

    pub fn basis(&self) -> SymmetricBasis {
        self.basis
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn amplitudes_mut(&mut self) -> &mut [Complex64] {
        &mut self.amplitudes
    }

    pub fn into_amplitudes(self) -> Vec<Complex64> {
        self.amplitudes
    }

    pub fn amplitude(&self, label: CollectiveLabel) -> Result<Complex64> {
        Ok(self.amplitudes[self.basis.index(label)?])
    }

    pub fn population(&self, label: CollectiveLabel) -> Result<f64> {
        Ok(self.amplitude(label)?.norm_sqr())
    }

    pub fn populations(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|c| c.norm_sqr()).collect()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|c| c.norm_sqr()).sum()
    }

    pub fn rydberg_population(&self) -> f64 {
        let n = self.basis.n_atoms();
        self.amplitudes[n + 1..].iter().map(|c| c.norm_sqr()).sum()
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &StateVector) -> Complex64 {
        self.amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    pub fn scaled(&self, factor: Complex64) -> StateVector {
        StateVector {
            basis: self.basis,
            amplitudes: self.amplitudes.iter().map(|c| c * factor).collect(),
        }
    }

    pub fn add(&self, other: &StateVector) -> StateVector {
        StateVector {
            basis: self.basis,
            amplitudes: self
                .amplitudes
                .iter()
                .zip(&other.amplitudes)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    pub fn normalized(&self) -> StateVector {
        let norm = self.norm_sqr().sqrt();
        self.scaled(Complex64::new(1.0 / norm, 0.0))
    }

    pub fn conj(&self) -> StateVector {
        StateVector {
            basis: self.basis,
            amplitudes: self.amplitudes.iter().map(|c| c.conj()).collect(),
        }
    }

    pub fn to_dvector(&self) -> DVector<Complex64> {
        DVector::from_column_slice(&self.amplitudes)
    }
}

pub fn collective_state(basis: SymmetricBasis, label: CollectiveLabel) -> Result<StateVector> {
    let mut state = StateVector::zeros(basis);
    let i = basis.index(label)?;
    state.amplitudes[i] = Complex64::new(1.0, 0.0);
    Ok(state)
}

/// Single-atom level in the product basis.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Level {
    A,
    B,
    R,
}

/// Unreduced N-atom space with at most one Rydberg excitation, used to check
/// the symmetric reduction.
#[derive(Clone, Debug)]
pub struct FullSpaceOracle {
    n_atoms: usize,
    states: Vec<Vec<Level>>,
    lookup: HashMap<Vec<Level>, usize>,
    /// Columns are the embedded symmetric basis states.
    embedding: DMatrix<f64>,
}

impl FullSpaceOracle {
    pub const MAX_ATOMS: usize = 6;

    pub fn new(n_atoms: usize) -> Result<Self> {
        if n_atoms == 0 {
            return Err(Error::InvalidArgument("n_atoms must be at least 1".into()));
        }
        if n_atoms > Self::MAX_ATOMS {
            return Err(Error::OracleTooLarge {
                got: n_atoms,
                max: Self::MAX_ATOMS,
            });
        }
        let mut states = Vec::new();
        enumerate_products(n_atoms, &mut Vec::with_capacity(n_atoms), &mut states);
        let lookup: HashMap<_, _> = states
            .iter()
            .enumerate()
            .map(|(i, s)| (s.clone(), i))
            .collect();

        let basis = SymmetricBasis::new(n_atoms)?;
        let mut embedding = DMatrix::zeros(states.len(), basis.dim());
        for (row, s) in states.iter().enumerate() {
            let n_b = s.iter().filter(|&&l| l == Level::B).count();
            let n_r = s.iter().filter(|&&l| l == Level::R).count();
            let col = if n_r == 0 { basis.g(n_b) } else { basis.r(n_b) };
            embedding[(row, col)] = 1.0;
        }
        for mut col in embedding.column_iter_mut() {
            let norm = col.norm();
            col /= norm;
        }
        Ok(Self {
            n_atoms,
            states,
            lookup,
            embedding,
        })
    }

    pub fn n_atoms(&self) -> usize {
        self.n_atoms
    }

    /// `2^N + N 2^(N-1)`.
    pub fn dim_full(&self) -> usize {
        self.states.len()
    }

    pub fn product_states(&self) -> &[Vec<Level>] {
        &self.states
    }

    pub fn product_index(&self, levels: &[Level]) -> Option<usize> {
        self.lookup.get(levels).copied()
    }

    pub fn embedding(&self) -> &DMatrix<f64> {
        &self.embedding
    }

    pub fn embed_full(&self, state: &StateVector) -> Result<DVector<Complex64>> {
        if state.basis().n_atoms() != self.n_atoms {
            return Err(Error::InvalidArgument(format!(
                "state has {} atoms, oracle has {}",
                state.basis().n_atoms(),
                self.n_atoms
            )));
        }
        let mut out = DVector::zeros(self.dim_full());
        for (col, amp) in state.amplitudes().iter().enumerate() {
            for row in 0..self.dim_full() {
                let w = self.embedding[(row, col)];
                if w != 0.0 {
                    out[row] += amp * w;
                }
            }
        }
        Ok(out)
    }

    /// Blockade-projected sum of single-atom couplings and detunings.
    pub fn hamiltonian(&self, v: PulseValues) -> DMatrix<Complex64> {
        let dim = self.dim_full();
        let mut h = DMatrix::<Complex64>::zeros(dim, dim);
        for (i, s) in self.states.iter().enumerate() {
            let diag: f64 = s
                .iter()
                .map(|l| match l {
                    Level::A => v.delta1,
                    Level::B => v.delta2,
                    Level::R => 0.0,
                })
                .sum();
            h[(i, i)] += diag;
            if s.contains(&Level::R) {
                continue;
            }
            // excite each atom in turn; double excitations are projected out
            for atom in 0..self.n_atoms {
                let omega = match s[atom] {
                    Level::A => v.omega1,
                    Level::B => v.omega2,
                    Level::R => unreachable!(),
                };
                let mut excited = s.clone();
                excited[atom] = Level::R;
                let j = self.lookup[&excited];
                h[(j, i)] += omega;
                h[(i, j)] += omega;
            }
        }
        h
    }

    /// `P^T H P` in the symmetric basis.
    pub fn restrict(&self, h_full: &DMatrix<Complex64>) -> DMatrix<Complex64> {
        let p = self.embedding.map(|x| Complex64::new(x, 0.0));
        p.transpose() * h_full * &p
    }

    /// Norm of the component of `full` outside the symmetric sector.
    pub fn symmetric_leakage(&self, full: &DVector<Complex64>) -> f64 {
        let p = self.embedding.map(|x| Complex64::new(x, 0.0));
        let coeffs = p.transpose() * full;
        let back = &p * coeffs;
        (full - back).norm()
    }
}

pub fn embed_full(oracle: &FullSpaceOracle, state: &StateVector) -> Result<DVector<Complex64>> {
    oracle.embed_full(state)
}

pub fn oracle_hamiltonian(
    oracle: &FullSpaceOracle,
    pulses: &crate::pulses::PulseSchedule,
    t: f64,
) -> DMatrix<Complex64> {
    oracle.hamiltonian(pulses.eval(t))
}

fn enumerate_products(n: usize, prefix: &mut Vec<Level>, out: &mut Vec<Vec<Level>>) {
    if prefix.len() == n {
        out.push(prefix.clone());
        return;
    }
    let has_r = prefix.contains(&Level::R);
    for level in [Level::A, Level::B, Level::R] {
        if level == Level::R && has_r {
            continue;
        }
        prefix.push(level);
        enumerate_products(n, prefix, out);
        prefix.pop();
    }
}
