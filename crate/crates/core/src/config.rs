//! TOML run configuration and the bundled presets.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::propagator::IntegratorConfig;
use crate::protocols::{GhzParams, PrepParams, WParams};
use crate::pulses::{PulseOrder, RapVariant};
use crate::sweeps::{MinAreaSearch, Observable, SweptParameter};

pub const PRESETS: [(&str, &str); 4] = [
    ("fig2", include_str!("../presets/fig2.toml")),
    ("fig3_top", include_str!("../presets/fig3_top.toml")),
    ("fig3_bottom", include_str!("../presets/fig3_bottom.toml")),
    ("fig4", include_str!("../presets/fig4.toml")),
];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialState {
    /// `(|a^N> + |a^{N-1} r>) / sqrt(2)`.
    Superposition,
    AllA,
    AllB,
    /// `|b^{N-1} r>`.
    BRydberg,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleKind {
    /// Gaussian pair built from the top-level pulse parameters.
    W,
    /// Same pair played backwards with negated detunings.
    WInverse,
    /// Preparation drive of the `[prepare]` block.
    Prepare,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateBlock {
    #[serde(default = "default_initial")]
    pub initial: InitialState,
    #[serde(default = "default_schedule")]
    pub schedule: ScheduleKind,
}

fn default_initial() -> InitialState {
    InitialState::Superposition
}

fn default_schedule() -> ScheduleKind {
    ScheduleKind::W
}

impl Default for SimulateBlock {
    fn default() -> Self {
        Self {
            initial: default_initial(),
            schedule: default_schedule(),
        }
    }
}

/// Grid given either as explicit values or as an evenly spaced range.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GridSpec {
    Values(Vec<f64>),
    Range { start: f64, stop: f64, points: usize },
}

impl GridSpec {
    pub fn values(&self) -> Vec<f64> {
        match self {
            GridSpec::Values(v) => v.clone(),
            GridSpec::Range {
                start,
                stop,
                points,
            } => match points {
                0 => Vec::new(),
                1 => vec![*start],
                _ => (0..*points)
                    .map(|k| {
                        let f = k as f64 / (*points - 1) as f64;
                        start * (1.0 - f) + stop * f
                    })
                    .collect(),
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepBlock {
    pub parameter: SweptParameter,
    pub grid: GridSpec,
    #[serde(default = "default_observable")]
    pub observable: Observable,
}

fn default_observable() -> Observable {
    Observable::FinalPopulations
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScalingBlock {
    pub n_values: Vec<usize>,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    #[serde(default = "default_range")]
    pub search_range: (f64, f64),
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    #[serde(default = "default_scan_points")]
    pub scan_points: usize,
    #[serde(default)]
    pub delta_ratio: Option<f64>,
    #[serde(default = "default_refinements")]
    pub tau_refinements: usize,
}

fn default_threshold() -> f64 {
    MinAreaSearch::default().fidelity_threshold
}
fn default_range() -> (f64, f64) {
    MinAreaSearch::default().search_range
}
fn default_tolerance() -> f64 {
    MinAreaSearch::default().tolerance
}
fn default_scan_points() -> usize {
    MinAreaSearch::default().scan_points
}
fn default_refinements() -> usize {
    MinAreaSearch::default().tau_refinements
}

impl ScalingBlock {
    pub fn search(&self) -> MinAreaSearch {
        MinAreaSearch {
            fidelity_threshold: self.threshold,
            search_range: self.search_range,
            tolerance: self.tolerance,
            scan_points: self.scan_points,
            delta_ratio: self.delta_ratio,
            tau_refinements: self.tau_refinements,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PrepareBlock {
    #[serde(rename = "omega_m_T", alias = "omega_m_t", default = "default_prep_area")]
    pub omega_m_t: f64,
    #[serde(rename = "delta_max_T", alias = "delta_max_t", default = "default_delta_max")]
    pub delta_max_t: f64,
    #[serde(rename = "cut_over_T", alias = "cut_over_t", default)]
    pub cut_over_t: f64,
}

fn default_prep_area() -> f64 {
    PrepParams::default().omega_m_t
}
fn default_delta_max() -> f64 {
    PrepParams::default().delta_max_t
}

impl Default for PrepareBlock {
    fn default() -> Self {
        Self {
            omega_m_t: default_prep_area(),
            delta_max_t: default_delta_max(),
            cut_over_t: 0.0,
        }
    }
}

/// Complete run configuration. The top-level pulse parameters describe the
/// superposition-transfer step (or the simulated pulse pair).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub n_atoms: usize,
    #[serde(rename = "omega_m_T", alias = "omega_m_t")]
    pub omega_m_t: f64,
    #[serde(rename = "delta_T", alias = "delta_t")]
    pub delta_t: f64,
    #[serde(rename = "tau_over_T", alias = "tau_over_t")]
    pub tau_over_t: f64,
    #[serde(default = "default_order")]
    pub order: PulseOrder,
    #[serde(default = "default_variant")]
    pub rap_variant: RapVariant,
    #[serde(rename = "gamma_T", alias = "gamma_t", default)]
    pub gamma_t: f64,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub integrator: IntegratorConfig,
    #[serde(default)]
    pub prepare: PrepareBlock,
    /// Parameters of the stand-alone W used in the final step.
    #[serde(default = "WParams::isolated")]
    pub inverse: WParams,
    #[serde(default)]
    pub simulate: SimulateBlock,
    #[serde(default)]
    pub sweep: Option<SweepBlock>,
    #[serde(default)]
    pub scaling: Option<ScalingBlock>,
    /// Random draws per atom number for the oracle check.
    #[serde(default = "default_draws")]
    pub oracle_draws: usize,
}

fn default_order() -> PulseOrder {
    PulseOrder::Intuitive
}
fn default_variant() -> RapVariant {
    RapVariant::HalfChirp
}
fn default_draws() -> usize {
    100
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn preset(name: &str) -> Result<Self> {
        let (_, text) = PRESETS.iter().find(|(n, _)| *n == name).ok_or_else(|| {
            let names: Vec<&str> = PRESETS.iter().map(|(n, _)| *n).collect();
            Error::Config(format!("unknown preset {name:?} (available: {})", names.join(", ")))
        })?;
        Self::from_toml(text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.n_atoms == 0 {
            return bad("n_atoms must be at least 1".into());
        }
        if !(self.omega_m_t >= 0.0 && self.omega_m_t.is_finite()) {
            return bad(format!("omega_m_T must be non-negative, got {}", self.omega_m_t));
        }
        if !self.delta_t.is_finite() {
            return bad(format!("delta_T must be finite, got {}", self.delta_t));
        }
        if !(self.tau_over_t >= 0.0 && self.tau_over_t.is_finite()) {
            return bad(format!("tau_over_T must be non-negative, got {}", self.tau_over_t));
        }
        if !(self.gamma_t >= 0.0 && self.gamma_t.is_finite()) {
            return bad(format!("gamma_T must be non-negative, got {}", self.gamma_t));
        }
        self.integrator
            .validate()
            .map_err(|e| Error::Config(e.to_string()))?;
        self.inverse
            .validate()
            .map_err(|e| Error::Config(format!("[inverse]: {e}")))?;
        if let Some(s) = &self.sweep {
            if s.grid.values().is_empty() {
                return bad("[sweep] grid is empty".into());
            }
        }
        if let Some(s) = &self.scaling {
            if s.n_values.len() < 3 {
                return bad("[scaling] needs at least 3 n_values".into());
            }
            s.search()
                .validate()
                .map_err(|e| Error::Config(format!("[scaling]: {e}")))?;
        }
        Ok(())
    }

    pub fn transfer(&self) -> WParams {
        WParams {
            omega_m_t: self.omega_m_t,
            delta_t: self.delta_t,
            tau_over_t: self.tau_over_t,
            order: self.order,
        }
    }

    pub fn prep(&self) -> PrepParams {
        PrepParams {
            variant: self.rap_variant,
            omega_m_t: self.prepare.omega_m_t,
            delta_max_t: self.prepare.delta_max_t,
            cut_over_t: self.prepare.cut_over_t,
        }
    }

    pub fn ghz_params(&self) -> GhzParams {
        GhzParams {
            prepare: self.prep(),
            transfer: self.transfer(),
            inverse: self.inverse,
        }
    }

    pub fn output_dir(&self) -> PathBuf {
        self.output_dir.clone().unwrap_or_else(|| PathBuf::from("out"))
    }
}
