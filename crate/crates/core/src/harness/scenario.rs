//! Scenario files.
//!
//! A scenario is a JSON document; every field has a default, so `{}` is the
//! default link (M = 16, N = 8, K = 4, L = 2, 20° spreads, 16×16 uniform-cos
//! grid, M_RF·N_RF = 30, SNR 10 dB, T = 30, 100 trials).

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::channel_model::{ArrayGeometry, ChannelParams, LinkGeometry};
use crate::dictionary::GridScheme;
use crate::estimators::{GradientForm, SolverOptions};
use crate::sensing::BeamformerStyle;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Dsomp,
    Ppsomp,
    Dcomp,
    Ppcomp,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [Algorithm::Dsomp, Algorithm::Ppsomp, Algorithm::Dcomp, Algorithm::Ppcomp];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Dsomp => "DSOMP",
            Algorithm::Ppsomp => "PPSOMP",
            Algorithm::Dcomp => "DCOMP",
            Algorithm::Ppcomp => "PPCOMP",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|a| a.name().eq_ignore_ascii_case(name))
    }

    /// Channel estimators report NMSE-H and covariance metrics through the
    /// sample covariance of their channel estimates.
    pub fn estimates_channel(self) -> bool {
        matches!(self, Algorithm::Dsomp | Algorithm::Ppsomp)
    }

    pub fn perturbed(self) -> bool {
        matches!(self, Algorithm::Ppsomp | Algorithm::Ppcomp)
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Reference covariance the covariance metrics compare against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CovarianceReference {
    /// Expectation over the gains with the angles fixed.
    #[default]
    Analytic,
    /// `(1/T) Σ_t h_t h_t^H` over the simulated snapshots.
    Sample,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelSection {
    pub bs_antennas: usize,
    pub ue_antennas: usize,
    pub element_spacing: f64,
    pub clusters: usize,
    pub paths_per_cluster: usize,
    pub sigma_as_aoa_deg: f64,
    pub sigma_as_aod_deg: f64,
    pub beta: f64,
}

impl Default for ChannelSection {
    fn default() -> Self {
        ChannelSection {
            bs_antennas: 16,
            ue_antennas: 8,
            element_spacing: 0.5,
            clusters: 4,
            paths_per_cluster: 2,
            sigma_as_aoa_deg: 20.0,
            sigma_as_aod_deg: 20.0,
            beta: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RfChains {
    pub m_rf: usize,
    pub n_rf: usize,
}

impl RfChains {
    pub fn product(&self) -> usize {
        self.m_rf * self.n_rf
    }

    /// Split used by the presets for a given `M_RF·N_RF`.
    pub fn for_measurements(total: usize) -> Option<Self> {
        let (m_rf, n_rf) = match total {
            20 => (4, 5),
            30 => (5, 6),
            40 => (5, 8),
            50 => (10, 5),
            _ => return None,
        };
        Some(RfChains { m_rf, n_rf })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingSection {
    pub rf_chains: Vec<RfChains>,
    pub snapshots: Vec<usize>,
    pub snr_db: Vec<f64>,
    pub beamformer_style: BeamformerStyle,
}

impl Default for TrainingSection {
    fn default() -> Self {
        TrainingSection {
            rf_chains: vec![RfChains { m_rf: 5, n_rf: 6 }],
            snapshots: vec![30],
            snr_db: vec![10.0],
            beamformer_style: BeamformerStyle::UnitModulusRandomPhase,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    pub scheme: GridScheme,
    pub g_bs: usize,
    pub g_ue: usize,
}

impl Default for GridSection {
    fn default() -> Self {
        GridSection {
            scheme: GridScheme::UniformCosTheta,
            g_bs: 16,
            g_ue: 16,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSection {
    pub epsilon: f64,
    /// Defaults to twice the number of paths.
    pub k_max: Option<usize>,
    pub mu0: f64,
    pub p_max: usize,
    pub tol_step: f64,
    pub max_halvings: usize,
    pub gradient_form: GradientForm,
    pub noise_stop: f64,
}

impl Default for SolverSection {
    fn default() -> Self {
        let d = SolverOptions::default();
        SolverSection {
            epsilon: d.epsilon,
            k_max: None,
            mu0: d.mu0,
            p_max: d.p_max,
            tol_step: d.tol_step,
            max_halvings: d.max_halvings,
            gradient_form: d.gradient_form,
            noise_stop: d.noise_stop,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Scenario {
    pub id: String,
    pub channel: ChannelSection,
    pub training: TrainingSection,
    pub grid: GridSection,
    pub solver: SolverSection,
    pub algorithms: Vec<Algorithm>,
    /// Subspace rank for the relative efficiency; defaults to the cluster count.
    pub metric_rank: Option<usize>,
    pub covariance_reference: CovarianceReference,
    pub trials: usize,
    pub base_seed: u64,
    /// Write measured wall time; when false the column is 0 so output is
    /// byte-reproducible.
    pub record_timing: bool,
}

impl Default for Scenario {
    fn default() -> Self {
        Scenario {
            id: "default".into(),
            channel: ChannelSection::default(),
            training: TrainingSection::default(),
            grid: GridSection::default(),
            solver: SolverSection::default(),
            algorithms: Algorithm::ALL.to_vec(),
            metric_rank: None,
            covariance_reference: CovarianceReference::Analytic,
            trials: 100,
            base_seed: 1,
            record_timing: true,
        }
    }
}

/// One `(M_RF·N_RF, SNR, T)` combination of a scenario.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepPoint {
    pub rf: RfChains,
    pub snr_db: f64,
    pub snapshots: usize,
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self> {
        let s: Scenario = serde_json::from_str(text).map_err(|e| Error::config("<root>", e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn geometry(&self) -> LinkGeometry {
        LinkGeometry {
            bs: ArrayGeometry {
                num_antennas: self.channel.bs_antennas,
                element_spacing_over_wavelength: self.channel.element_spacing,
            },
            ue: ArrayGeometry {
                num_antennas: self.channel.ue_antennas,
                element_spacing_over_wavelength: self.channel.element_spacing,
            },
        }
    }

    pub fn num_paths(&self) -> usize {
        self.channel.clusters * self.channel.paths_per_cluster
    }

    pub fn channel_params(&self, snapshots: usize, seed: u64) -> ChannelParams {
        ChannelParams {
            clusters: self.channel.clusters,
            paths_per_cluster: self.channel.paths_per_cluster,
            sigma_as_aoa: self.channel.sigma_as_aoa_deg.to_radians(),
            sigma_as_aod: self.channel.sigma_as_aod_deg.to_radians(),
            snapshots,
            beta: self.channel.beta,
            rng_seed: seed,
        }
    }

    pub fn solver_options(&self) -> SolverOptions {
        let s = &self.solver;
        SolverOptions {
            epsilon: s.epsilon,
            k_max: s.k_max.unwrap_or(2 * self.num_paths()),
            mu0: s.mu0,
            p_max: s.p_max,
            tol_step: s.tol_step,
            max_halvings: s.max_halvings,
            perturbation_enabled: true,
            gradient_form: s.gradient_form,
            noise_stop: s.noise_stop,
        }
    }

    pub fn metric_rank(&self) -> usize {
        self.metric_rank.unwrap_or(self.channel.clusters)
    }

    /// Sweep points in output order: RF chains, then SNR, then snapshots.
    pub fn sweep_points(&self) -> Vec<SweepPoint> {
        let mut out = Vec::new();
        for &rf in &self.training.rf_chains {
            for &snr_db in &self.training.snr_db {
                for &snapshots in &self.training.snapshots {
                    out.push(SweepPoint { rf, snr_db, snapshots });
                }
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let c = &self.channel;
        if self.id.is_empty() || self.id.contains([',', '\n', '"']) {
            return Err(Error::config("id", "must be non-empty without commas, quotes or newlines"));
        }
        if c.bs_antennas == 0 {
            return Err(Error::config("channel.bs_antennas", "must be >= 1"));
        }
        if c.ue_antennas == 0 {
            return Err(Error::config("channel.ue_antennas", "must be >= 1"));
        }
        if !(c.element_spacing.is_finite() && c.element_spacing > 0.0) {
            return Err(Error::config("channel.element_spacing", "must be positive"));
        }
        if c.clusters == 0 {
            return Err(Error::config("channel.clusters", "must be >= 1"));
        }
        if c.paths_per_cluster == 0 {
            return Err(Error::config("channel.paths_per_cluster", "must be >= 1"));
        }
        if !(c.sigma_as_aoa_deg >= 0.0 && c.sigma_as_aoa_deg.is_finite()) {
            return Err(Error::config("channel.sigma_as_aoa_deg", "must be finite and >= 0"));
        }
        if !(c.sigma_as_aod_deg >= 0.0 && c.sigma_as_aod_deg.is_finite()) {
            return Err(Error::config("channel.sigma_as_aod_deg", "must be finite and >= 0"));
        }
        if !(c.beta.is_finite() && c.beta > 0.0) {
            return Err(Error::config("channel.beta", "must be positive"));
        }

        let t = &self.training;
        if t.rf_chains.is_empty() {
            return Err(Error::config("training.rf_chains", "must not be empty"));
        }
        for (i, rf) in t.rf_chains.iter().enumerate() {
            if rf.m_rf == 0 || rf.m_rf > c.bs_antennas {
                return Err(Error::config(
                    format!("training.rf_chains[{i}].m_rf"),
                    format!("must be in 1..={}", c.bs_antennas),
                ));
            }
            if rf.n_rf == 0 || rf.n_rf > c.ue_antennas {
                return Err(Error::config(
                    format!("training.rf_chains[{i}].n_rf"),
                    format!("must be in 1..={}", c.ue_antennas),
                ));
            }
        }
        if t.snapshots.is_empty() {
            return Err(Error::config("training.snapshots", "must not be empty"));
        }
        if let Some(i) = t.snapshots.iter().position(|&s| s == 0) {
            return Err(Error::config(format!("training.snapshots[{i}]"), "must be >= 1"));
        }
        if t.snr_db.is_empty() {
            return Err(Error::config("training.snr_db", "must not be empty"));
        }
        if let Some(i) = t.snr_db.iter().position(|s| !s.is_finite()) {
            return Err(Error::config(format!("training.snr_db[{i}]"), "must be finite"));
        }

        let g = &self.grid;
        if g.g_bs < 2 {
            return Err(Error::config("grid.g_bs", "must be >= 2"));
        }
        if g.g_ue < 2 {
            return Err(Error::config("grid.g_ue", "must be >= 2"));
        }

        let s = &self.solver;
        for (name, v) in [("epsilon", s.epsilon), ("mu0", s.mu0), ("tol_step", s.tol_step)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::config(format!("solver.{name}"), "must be positive"));
            }
        }
        if !(s.noise_stop.is_finite() && s.noise_stop >= 0.0) {
            return Err(Error::config("solver.noise_stop", "must be finite and >= 0"));
        }
        if s.p_max == 0 {
            return Err(Error::config("solver.p_max", "must be >= 1"));
        }
        let k_max = s.k_max.unwrap_or(2 * self.num_paths());
        if k_max == 0 || k_max > g.g_bs * g.g_ue {
            return Err(Error::config("solver.k_max", format!("must be in 1..={}", g.g_bs * g.g_ue)));
        }

        if self.algorithms.is_empty() {
            return Err(Error::config("algorithms", "must not be empty"));
        }
        let dim = c.bs_antennas * c.ue_antennas;
        if let Some(r) = self.metric_rank {
            if r == 0 || r > dim {
                return Err(Error::config("metric_rank", format!("must be in 1..={dim}")));
            }
        } else if c.clusters > dim {
            return Err(Error::config("metric_rank", format!("default (clusters) exceeds {dim}")));
        }
        if self.trials == 0 {
            return Err(Error::config("trials", "must be >= 1"));
        }
        Ok(())
    }
}
