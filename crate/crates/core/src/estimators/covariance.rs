//! Explicit covariance estimation: PPCOMP and the DCOMP baseline.
//!
//! Works on the per-snapshot measurement covariances `R_t = ỹ_t ỹ_t^H` and
//! models them as `B_t Γ_t B_t^H` with `B_t = [Φ_t a(θ_1), …]` and
//! Hermitian cross gains `Γ_t`.

use std::collections::HashSet;

use crate::dictionary::Dictionary;
use crate::estimators::atoms::{self, descend, AtomResponses};
use crate::estimators::{CovarianceEstimate, GradientForm, SolverOptions, SupportEntry};
use crate::linalg::{full_column_rank, pinv};
use crate::sensing::SensingBlock;
use crate::{CMatrix, Error, Result, C64};

/// `R_ỹ,t = ỹ_t ỹ_t^H` for every frame.
pub fn measurement_covariances(block: &SensingBlock) -> Vec<CMatrix> {
    block.y.iter().map(|y| y * y.adjoint()).collect()
}

#[derive(Debug, Clone)]
pub struct CovarianceFit {
    /// `Γ_t` per frame.
    pub cross_gains: Vec<CMatrix>,
    /// `R_⊥,t = R_t - B_t Γ_t B_t^H`.
    pub residuals: Vec<CMatrix>,
    /// `(1/T) Σ_t ‖R_⊥,t‖_F²`.
    pub objective: f64,
    pub ridge_used: bool,
}

fn fit_projected(covs: &[CMatrix], projected: &[CMatrix]) -> CovarianceFit {
    let frames = covs.len();
    let mut cross_gains = Vec::with_capacity(frames);
    let mut residuals = Vec::with_capacity(frames);
    let mut total = 0.0;
    let mut ridge_used = false;
    for (r, b) in covs.iter().zip(projected) {
        let k = b.ncols();
        let (p, ridge) = pinv(b);
        ridge_used |= ridge;
        let pr = &p * r;
        let mut gamma = CMatrix::zeros(k, k);
        for l in 0..k {
            for q in l..k {
                // Γ_lq = P_l R P_q^H, upper triangle only
                let v = pr.row(l).iter().zip(p.row(q).iter()).map(|(a, b)| a * b.conj()).sum::<C64>();
                gamma[(l, q)] = v;
            }
        }
        for l in 0..k {
            gamma[(l, l)].im = 0.0;
            for q in 0..l {
                gamma[(l, q)] = gamma[(q, l)].conj();
            }
        }
        let e = r - b * &gamma * b.adjoint();
        total += e.norm_squared();
        cross_gains.push(gamma);
        residuals.push(e);
    }
    CovarianceFit {
        cross_gains,
        residuals,
        objective: if frames == 0 { 0.0 } else { total / frames as f64 },
        ridge_used,
    }
}

/// Cross gains `Γ_{l,q,t} = [B_t^†]_l R_t [B_t^†]_q^H`, evaluated for
/// `q >= l` and mirrored.
pub fn fit_cross_gains(
    block: &SensingBlock,
    dict: &Dictionary,
    covs: &[CMatrix],
    support: &[SupportEntry],
) -> Result<CovarianceFit> {
    check_covs(block, covs)?;
    let atoms = atoms::responses(support, &dict.grid, block)?;
    Ok(fit_projected(covs, &atoms::projected_atoms(block, &atoms)))
}

fn check_covs(block: &SensingBlock, covs: &[CMatrix]) -> Result<()> {
    let m = block.measurements_per_frame();
    if covs.len() != block.frames() || covs.iter().any(|c| c.shape() != (m, m)) {
        return Err(Error::invalid("measurement covariances do not match the sensing block"));
    }
    Ok(())
}

/// `(1/T) Σ_t ‖R_t - B_t Γ_t B_t^H‖_F²` for given cross gains.
pub fn covariance_objective(
    block: &SensingBlock,
    dict: &Dictionary,
    covs: &[CMatrix],
    support: &[SupportEntry],
    cross_gains: &[CMatrix],
) -> Result<f64> {
    check_covs(block, covs)?;
    let atoms = atoms::responses(support, &dict.grid, block)?;
    let projected = atoms::projected_atoms(block, &atoms);
    let total: f64 = covs
        .iter()
        .zip(&projected)
        .zip(cross_gains)
        .map(|((r, b), g)| (r - b * g * b.adjoint()).norm_squared())
        .sum();
    Ok(total / covs.len().max(1) as f64)
}

fn gradient_from(
    form: GradientForm,
    projected: &[CMatrix],
    d_rx: &[CMatrix],
    d_tx: &[CMatrix],
    cross_gains: &[CMatrix],
    residuals: &[CMatrix],
) -> (Vec<f64>, Vec<f64>) {
    let frames = residuals.len();
    let k = projected.first().map_or(0, |b| b.ncols());
    let mut g_rx = vec![0.0; k];
    let mut g_tx = vec![0.0; k];
    if frames == 0 {
        return (g_rx, g_tx);
    }
    match form {
        GradientForm::Exact => {
            let scale = 2.0 / frames as f64;
            for t in 0..frames {
                // c_l = B Γ e_l; slope is -4/T Σ Re(c_l^H E d_l)
                let c = &projected[t] * &cross_gains[t];
                let ec = residuals[t].ad_mul(&c);
                for l in 0..k {
                    g_rx[l] += scale * ec.column(l).dotc(&d_rx[t].column(l)).re;
                    g_tx[l] += scale * ec.column(l).dotc(&d_tx[t].column(l)).re;
                }
            }
        }
        GradientForm::SummedResidual => {
            let m = residuals[0].nrows();
            let mut e_sum = CMatrix::zeros(m, m);
            for e in residuals {
                e_sum += e;
            }
            for l in 0..k {
                for (d, g) in [(d_rx, &mut g_rx), (d_tx, &mut g_tx)] {
                    let mut s = CMatrix::zeros(m, m);
                    for t in 0..frames {
                        let b = &projected[t];
                        let dl = d[t].column(l);
                        // ∂/∂θ_l of Σ_{l,q} Γ_lq b_l b_q^H, path l on either side
                        for q in 0..k {
                            s += dl * b.column(q).adjoint() * cross_gains[t][(l, q)];
                            s += b.column(q) * dl.adjoint() * cross_gains[t][(q, l)];
                        }
                    }
                    g[l] = s.iter().zip(e_sum.iter()).map(|(a, b)| a.conj() * b).sum::<C64>().re;
                }
            }
        }
    }
    (g_rx, g_tx)
}

/// Descent direction of `(1/T) Σ_t ‖R_⊥,t‖_F²` at fixed cross gains; the
/// objective has slope `-2 g_l` in `θ_l`.
pub fn covariance_gradient(
    block: &SensingBlock,
    dict: &Dictionary,
    support: &[SupportEntry],
    cross_gains: &[CMatrix],
    residuals: &[CMatrix],
    form: GradientForm,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if cross_gains.len() != block.frames() || residuals.len() != block.frames() {
        return Err(Error::invalid("gradient inputs do not match frames"));
    }
    if cross_gains.iter().any(|g| g.shape() != (support.len(), support.len())) {
        return Err(Error::invalid("cross gain size does not match support"));
    }
    let atoms = atoms::responses(support, &dict.grid, block)?;
    let projected = atoms::projected_atoms(block, &atoms);
    let (d_rx, d_tx) = atoms::projected_derivatives(block, &atoms);
    Ok(gradient_from(form, &projected, &d_rx, &d_tx, cross_gains, residuals))
}

#[derive(Debug, Clone)]
pub struct CovariancePerturbation {
    pub support: Vec<SupportEntry>,
    pub fit: CovarianceFit,
    pub objective_history: Vec<f64>,
}

/// Alternates cross-gain fitting with a clipped, backtracked gradient step.
pub fn perturb_covariance(
    block: &SensingBlock,
    dict: &Dictionary,
    covs: &[CMatrix],
    support: &[SupportEntry],
    opts: &SolverOptions,
) -> Result<CovariancePerturbation> {
    if support.is_empty() {
        return Err(Error::invalid("perturbation needs a non-empty support"));
    }
    check_covs(block, covs)?;
    let grid = &dict.grid;
    let mut refined = support.to_vec();
    type State = (CovarianceFit, Vec<AtomResponses>, Vec<CMatrix>);
    let eval = |s: &[SupportEntry]| -> Result<(f64, State)> {
        let atoms = atoms::responses(s, grid, block)?;
        let projected = atoms::projected_atoms(block, &atoms);
        let fit = fit_projected(covs, &projected);
        Ok((fit.objective, (fit, atoms, projected)))
    };
    let grad = |_: &[SupportEntry], st: &State| {
        let (fit, atoms, projected) = st;
        let (d_rx, d_tx) = atoms::projected_derivatives(block, atoms);
        Ok(gradient_from(
            opts.gradient_form,
            projected,
            &d_rx,
            &d_tx,
            &fit.cross_gains,
            &fit.residuals,
        ))
    };
    let ((fit, _, _), objective_history) = descend(grid, &mut refined, opts, eval, grad)?;
    Ok(CovariancePerturbation {
        support: refined,
        fit,
        objective_history,
    })
}

/// Expected `Σ_t ‖R_⊥,t‖_F²` once the signal is fully captured:
/// `‖ñ‖⁴ + 2‖ñ‖²‖s‖²` per frame, with `‖s‖²` estimated as `‖ỹ‖² - tr C`.
fn noise_floor(block: &SensingBlock) -> f64 {
    block
        .noise_moments()
        .iter()
        .zip(&block.y)
        .map(|(&(tr, tr_sq), y)| {
            let signal = (y.norm_squared() - tr).max(0.0);
            tr * tr + tr_sq + 2.0 * tr * signal
        })
        .sum()
}

/// Covariance OMP with quadratic-form projection and bounded angle
/// refinement. With `perturbation_enabled = false` this is DCOMP.
pub fn ppcomp(block: &SensingBlock, dict: &Dictionary, opts: &SolverOptions) -> Result<CovarianceEstimate> {
    opts.validate(&dict.grid)?;
    if block.geometry != dict.geometry {
        return Err(Error::invalid("dictionary and sensing block use different arrays"));
    }
    let grid = &dict.grid;
    let frames = block.frames();
    let m = block.measurements_per_frame();
    let dim = block.geometry.channel_dim();
    let covs = measurement_covariances(block);
    let initial: f64 = covs.iter().map(|r| r.norm_squared()).sum();
    let floor = (opts.epsilon * initial).max(opts.noise_stop * noise_floor(block));

    let projected_dict: Vec<CMatrix> = (0..frames)
        .map(|t| atoms::project_dictionary(block, dict, t))
        .collect();

    let mut support: Vec<SupportEntry> = Vec::new();
    let mut excluded: HashSet<usize> = HashSet::new();
    let mut residuals = covs.clone();
    let mut cross_gains: Vec<CMatrix> = vec![CMatrix::zeros(0, 0); frames];
    let mut residual = initial;
    let mut history = vec![initial];
    let mut rank_warning = false;

    while initial > 0.0
        && (support.is_empty() || residual > floor)
        && support.len() < opts.k_max.min(m)
    {
        let mut score = vec![0.0; grid.num_cells()];
        for (p, r) in projected_dict.iter().zip(&residuals) {
            let rp = r * p;
            for (j, s) in score.iter_mut().enumerate() {
                *s += p.column(j).dotc(&rp.column(j)).norm();
            }
        }
        let taken: HashSet<usize> = support
            .iter()
            .map(|e| grid.column_index(e.aoa_index, e.aod_index))
            .collect();
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
            let pert = perturb_covariance(block, dict, &covs, &candidate, opts)?;
            candidate = pert.support;
            pert.fit
        } else {
            fit_projected(&covs, &cand_projected)
        };
        support = candidate;
        residual = fit.objective * frames as f64;
        residuals = fit.residuals;
        cross_gains = fit.cross_gains;
        history.push(residual);
    }

    let atoms = atoms::responses(&support, grid, block)?;
    let basis = atoms::full_atoms(&atoms, dim);
    let mut r_hat = CMatrix::zeros(dim, dim);
    if !support.is_empty() {
        for gamma in &cross_gains {
            r_hat += &basis * gamma * basis.adjoint();
        }
        r_hat /= C64::from(frames as f64);
        r_hat = crate::linalg::hermitian_part(&r_hat);
    }
    Ok(CovarianceEstimate {
        support,
        cross_gains,
        r_hat,
        residual_history: history,
        rank_warning,
    })
}
