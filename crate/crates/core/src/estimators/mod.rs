//! Greedy off-grid aware estimators.
//!
//! [`ppsomp`] estimates per-snapshot channels; with perturbation disabled it
//! is the on-grid DSOMP baseline. [`ppcomp`] estimates the spatial covariance
//! directly from per-snapshot measurement covariances; with perturbation
//! disabled it is the DCOMP baseline.
//!
//! Both solvers alternate between a closed-form least-squares fit of the
//! gains and a clipped, backtracked gradient step on all selected angles.

mod atoms;
mod channel;
mod covariance;

use serde::{Deserialize, Serialize};

use crate::dictionary::{perturbation_bounds, Grid, PerturbationBounds};
use crate::{CMatrix, CVector, Error, Result};

pub use channel::{
    channel_gradient, channel_objective, fit_channel_gains, indirect_covariance, perturb_channel,
    ppsomp, ChannelFit, ChannelPerturbation,
};
pub use covariance::{
    covariance_gradient, covariance_objective, fit_cross_gains, measurement_covariances,
    perturb_covariance, ppcomp, CovarianceFit, CovariancePerturbation,
};

/// Which angle-update direction the perturbation solvers use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum GradientForm {
    /// Exact gradient of the summed per-snapshot objective.
    #[default]
    Exact,
    /// Derivative matrix applied to the residual summed over snapshots.
    /// Equal to [`GradientForm::Exact`] for a single snapshot.
    SummedResidual,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverOptions {
    /// Stop once the residual energy falls to `epsilon` times the initial one.
    pub epsilon: f64,
    /// Maximum support size.
    pub k_max: usize,
    /// Initial backtracking step, radians of movement along the
    /// max-normalized gradient.
    pub mu0: f64,
    /// Maximum perturbation iterations per greedy step.
    pub p_max: usize,
    /// Stop perturbing once no angle moves more than this, radians.
    pub tol_step: f64,
    /// Maximum step halvings per perturbation iteration.
    pub max_halvings: usize,
    pub perturbation_enabled: bool,
    pub gradient_form: GradientForm,
    /// Also stop once the residual energy reaches this multiple of its
    /// expected noise-only value; 0 disables.
    pub noise_stop: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            epsilon: 1e-2,
            k_max: 16,
            mu0: 0.05,
            p_max: 40,
            tol_step: 1e-7,
            max_halvings: 20,
            perturbation_enabled: true,
            gradient_form: GradientForm::Exact,
            noise_stop: 1.0,
        }
    }
}

impl SolverOptions {
    /// Defaults with `k_max = 2·num_paths`.
    pub fn for_paths(num_paths: usize) -> Self {
        SolverOptions {
            k_max: 2 * num_paths.max(1),
            ..Default::default()
        }
    }

    /// The on-grid baseline of these options.
    pub fn on_grid(self) -> Self {
        SolverOptions {
            perturbation_enabled: false,
            ..self
        }
    }

    pub fn validate(&self, grid: &Grid) -> Result<()> {
        let positive = [
            ("epsilon", self.epsilon),
            ("mu0", self.mu0),
            ("tol_step", self.tol_step),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(format!("{name} must be positive, got {v}")));
            }
        }
        if self.k_max == 0 || self.k_max > grid.num_cells() {
            return Err(Error::invalid(format!(
                "k_max = {} must be in 1..={}",
                self.k_max,
                grid.num_cells()
            )));
        }
        if !(self.noise_stop.is_finite() && self.noise_stop >= 0.0) {
            return Err(Error::invalid(format!("noise_stop must be finite and >= 0, got {}", self.noise_stop)));
        }
        if self.p_max == 0 {
            return Err(Error::invalid("p_max must be >= 1"));
        }
        Ok(())
    }
}

/// A selected grid cell and the continuous offsets found for it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SupportEntry {
    pub aoa_index: usize,
    pub aod_index: usize,
    pub delta_aoa: f64,
    pub delta_aod: f64,
}

impl SupportEntry {
    pub fn on_grid(aoa_index: usize, aod_index: usize) -> Self {
        SupportEntry {
            aoa_index,
            aod_index,
            delta_aoa: 0.0,
            delta_aod: 0.0,
        }
    }

    pub fn aoa(&self, grid: &Grid) -> f64 {
        grid.aoa_angles[self.aoa_index] + self.delta_aoa
    }

    pub fn aod(&self, grid: &Grid) -> f64 {
        grid.aod_angles[self.aod_index] + self.delta_aod
    }

    pub fn bounds(&self, grid: &Grid) -> Result<(PerturbationBounds, PerturbationBounds)> {
        perturbation_bounds(grid, self.aoa_index, self.aod_index)
    }
}

#[derive(Debug, Clone)]
pub struct ChannelEstimate {
    pub support: Vec<SupportEntry>,
    /// `T × k`, gain of path `l` in snapshot `t`.
    pub gains: CMatrix,
    /// Reconstructed `vec(Ĥ_t)`.
    pub h_hat: Vec<CVector>,
    /// Residual energy before the first and after every greedy iteration.
    pub residual_history: Vec<f64>,
    /// A selected atom was dropped for making the atom set rank deficient.
    pub rank_warning: bool,
}

#[derive(Debug, Clone)]
pub struct CovarianceEstimate {
    pub support: Vec<SupportEntry>,
    /// `Γ_t`, `k × k` Hermitian per snapshot.
    pub cross_gains: Vec<CMatrix>,
    /// `MN × MN` Hermitian estimate of the channel covariance.
    pub r_hat: CMatrix,
    /// `Σ_t ‖R_⊥,t‖_F²` before the first and after every greedy iteration.
    pub residual_history: Vec<f64>,
    pub rank_warning: bool,
}
