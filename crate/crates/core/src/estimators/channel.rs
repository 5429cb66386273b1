//! Channel estimation: PPSOMP and the DSOMP baseline.

use std::collections::HashSet;

use crate::dictionary::Dictionary;
use crate::estimators::atoms::{self, descend, AtomResponses};
use crate::estimators::{ChannelEstimate, GradientForm, SolverOptions, SupportEntry};
use crate::linalg::{full_column_rank, pinv};
use crate::sensing::SensingBlock;
use crate::{CMatrix, CVector, Error, Result, C64};

/// Least-squares gains for a fixed set of angles.
#[derive(Debug, Clone)]
pub struct ChannelFit {
    /// `T × k`.
    pub gains: CMatrix,
    /// `ỹ_⊥,t = ỹ_t - Φ_t Σ_l α_{l,t} a_l`.
    pub residuals: Vec<CVector>,
    /// `Σ_t ‖ỹ_⊥,t‖²`.
    pub objective: f64,
    pub ridge_used: bool,
}

fn fit_projected(block: &SensingBlock, projected: &[CMatrix]) -> ChannelFit {
    let k = projected.first().map_or(0, |a| a.ncols());
    let mut gains = CMatrix::zeros(block.frames(), k);
    let mut residuals = Vec::with_capacity(block.frames());
    let mut objective = 0.0;
    let mut ridge_used = false;
    for (t, (a, y)) in projected.iter().zip(&block.y).enumerate() {
        let (p, ridge) = pinv(a);
        ridge_used |= ridge;
        let alpha = &p * y;
        let r = y - a * &alpha;
        objective += r.norm_squared();
        gains.row_mut(t).copy_from(&alpha.transpose());
        residuals.push(r);
    }
    ChannelFit {
        gains,
        residuals,
        objective,
        ridge_used,
    }
}

/// Per-snapshot least-squares gains `α_t = A_t^† ỹ_t` over the joint atom
/// matrix `A_t = [Φ_t a(θ_1), …, Φ_t a(θ_k)]`.
pub fn fit_channel_gains(
    block: &SensingBlock,
    dict: &Dictionary,
    support: &[SupportEntry],
) -> Result<ChannelFit> {
    let atoms = atoms::responses(support, &dict.grid, block)?;
    Ok(fit_projected(block, &atoms::projected_atoms(block, &atoms)))
}

/// `Σ_t ‖ỹ_t - Φ_t Σ_l α_{l,t} a_l‖²` for given gains (`T × k`).
pub fn channel_objective(
    block: &SensingBlock,
    dict: &Dictionary,
    support: &[SupportEntry],
    gains: &CMatrix,
) -> Result<f64> {
    let atoms = atoms::responses(support, &dict.grid, block)?;
    let projected = atoms::projected_atoms(block, &atoms);
    Ok(projected
        .iter()
        .zip(&block.y)
        .enumerate()
        .map(|(t, (a, y))| (y - a * gains.row(t).transpose()).norm_squared())
        .sum())
}

fn gradient_from(
    form: GradientForm,
    d_rx: &[CMatrix],
    d_tx: &[CMatrix],
    gains: &CMatrix,
    residuals: &[CVector],
) -> (Vec<f64>, Vec<f64>) {
    let k = gains.ncols();
    let mut g_rx = vec![0.0; k];
    let mut g_tx = vec![0.0; k];
    match form {
        GradientForm::Exact => {
            for (t, r) in residuals.iter().enumerate() {
                let c_rx = d_rx[t].ad_mul(r);
                let c_tx = d_tx[t].ad_mul(r);
                for l in 0..k {
                    let a = gains[(t, l)].conj();
                    g_rx[l] += (a * c_rx[l]).re;
                    g_tx[l] += (a * c_tx[l]).re;
                }
            }
        }
        GradientForm::SummedResidual => {
            let Some(first) = residuals.first() else {
                return (g_rx, g_tx);
            };
            let mut r_sum = CVector::zeros(first.len());
            for r in residuals {
                r_sum += r;
            }
            for l in 0..k {
                let mut b_rx = CVector::zeros(first.len());
                let mut b_tx = CVector::zeros(first.len());
                for t in 0..residuals.len() {
                    b_rx += d_rx[t].column(l) * gains[(t, l)];
                    b_tx += d_tx[t].column(l) * gains[(t, l)];
                }
                g_rx[l] = b_rx.dotc(&r_sum).re;
                g_tx[l] = b_tx.dotc(&r_sum).re;
            }
        }
    }
    (g_rx, g_tx)
}

/// Descent direction for the support angles:
/// `g_l = Σ_t Re{ α_{l,t}^* (Φ_t ∂a_l/∂θ)^H ỹ_⊥,t }`, so that the residual
/// energy has slope `-2 g_l` in `θ_l` at fixed gains.
pub fn channel_gradient(
    block: &SensingBlock,
    dict: &Dictionary,
    support: &[SupportEntry],
    gains: &CMatrix,
    residuals: &[CVector],
    form: GradientForm,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if gains.ncols() != support.len() || residuals.len() != block.frames() {
        return Err(Error::invalid("gradient inputs do not match support/frames"));
    }
    let atoms = atoms::responses(support, &dict.grid, block)?;
    let (d_rx, d_tx) = atoms::projected_derivatives(block, &atoms);
    Ok(gradient_from(form, &d_rx, &d_tx, gains, residuals))
}

#[derive(Debug, Clone)]
pub struct ChannelPerturbation {
    /// Support with refined offsets.
    pub support: Vec<SupportEntry>,
    pub fit: ChannelFit,
    /// Objective after every accepted step, initial value first.
    pub objective_history: Vec<f64>,
}

/// Alternates least-squares gains with a clipped, backtracked gradient step
/// on all `k` angle pairs until `p_max` or the step stalls.
pub fn perturb_channel(
    block: &SensingBlock,
    dict: &Dictionary,
    support: &[SupportEntry],
    opts: &SolverOptions,
) -> Result<ChannelPerturbation> {
    if support.is_empty() {
        return Err(Error::invalid("perturbation needs a non-empty support"));
    }
    let grid = &dict.grid;
    let mut refined = support.to_vec();
    let eval = |s: &[SupportEntry]| -> Result<(f64, (ChannelFit, Vec<AtomResponses>))> {
        let atoms = atoms::responses(s, grid, block)?;
        let fit = fit_projected(block, &atoms::projected_atoms(block, &atoms));
        Ok((fit.objective, (fit, atoms)))
    };
    let grad = |_: &[SupportEntry], st: &(ChannelFit, Vec<AtomResponses>)| {
        let (fit, atoms) = st;
        let (d_rx, d_tx) = atoms::projected_derivatives(block, atoms);
        Ok(gradient_from(opts.gradient_form, &d_rx, &d_tx, &fit.gains, &fit.residuals))
    };
    let ((fit, _), objective_history) = descend(grid, &mut refined, opts, eval, grad)?;
    Ok(ChannelPerturbation {
        support: refined,
        fit,
        objective_history,
    })
}

/// Simultaneous OMP over time-varying sensing matrices with bounded angle
/// refinement. With `perturbation_enabled = false` this is DSOMP.
pub fn ppsomp(block: &SensingBlock, dict: &Dictionary, opts: &SolverOptions) -> Result<ChannelEstimate> {
    opts.validate(&dict.grid)?;
    if block.geometry != dict.geometry {
        return Err(Error::invalid("dictionary and sensing block use different arrays"));
    }
    let grid = &dict.grid;
    let frames = block.frames();
    let m = block.measurements_per_frame();
    let dim = block.geometry.channel_dim();
    let initial = block.energy();
    let floor = (opts.epsilon * initial).max(opts.noise_stop * block.expected_noise_energy());

    let projected_dict: Vec<CMatrix> = (0..frames)
        .map(|t| atoms::project_dictionary(block, dict, t))
        .collect();

    let mut support: Vec<SupportEntry> = Vec::new();
    let mut excluded: HashSet<usize> = HashSet::new();
    let mut residuals = block.y.clone();
    let mut gains = CMatrix::zeros(frames, 0);
    let mut residual = initial;
    let mut history = vec![initial];
    let mut rank_warning = false;

    while initial > 0.0
        && (support.is_empty() || residual > floor)
        && support.len() < opts.k_max.min(m)
    {
        let mut score = vec![0.0; grid.num_cells()];
        for (p, r) in projected_dict.iter().zip(&residuals) {
            let c = p.ad_mul(r);
            for (s, z) in score.iter_mut().zip(c.iter()) {
                *s += z.norm();
            }
        }
        let taken: HashSet<usize> = support
            .iter()
            .map(|e| grid.column_index(e.aoa_index, e.aod_index))
            .collect();
        // lowest index wins ties
        let best = (0..grid.num_cells())
            .filter(|j| !taken.contains(j) && !excluded.contains(j))
            .fold(None, |best: Option<usize>, j| match best {
                Some(b) if score[b] >= score[j] => Some(b),
                _ => Some(j),
            });
        let Some(best) = best else { break };
        let (i_rx, i_tx) = grid.cell(best);

        let mut candidate = support.clone();
        candidate.push(SupportEntry::on_grid(i_rx, i_tx));
        let cand_atoms = atoms::responses(&candidate, grid, block)?;
        let cand_projected = atoms::projected_atoms(block, &cand_atoms);
        if !cand_projected.iter().all(full_column_rank) {
            excluded.insert(best);
            rank_warning = true;
            continue;
        }

        let fit = if opts.perturbation_enabled {
            let pert = perturb_channel(block, dict, &candidate, opts)?;
            candidate = pert.support;
            pert.fit
        } else {
            fit_projected(block, &cand_projected)
        };
        support = candidate;
        residuals = fit.residuals;
        gains = fit.gains;
        residual = fit.objective;
        history.push(residual);
    }

    let atoms = atoms::responses(&support, grid, block)?;
    let basis = atoms::full_atoms(&atoms, dim);
    let h_hat = (0..frames)
        .map(|t| {
            if support.is_empty() {
                CVector::zeros(dim)
            } else {
                &basis * gains.row(t).transpose()
            }
        })
        .collect();
    Ok(ChannelEstimate {
        support,
        gains,
        h_hat,
        residual_history: history,
        rank_warning,
    })
}

/// `R̂_h = (1/T) Σ_t ĥ_t ĥ_t^H`.
pub fn indirect_covariance(est: &ChannelEstimate) -> CMatrix {
    let dim = est.h_hat.first().map_or(0, |h| h.len());
    let mut r = CMatrix::zeros(dim, dim);
    for h in &est.h_hat {
        r += h * h.adjoint();
    }
    if !est.h_hat.is_empty() {
        r /= C64::from(est.h_hat.len() as f64);
    }
    r
}
