//! Atom evaluation and the shared clipped descent loop.

use crate::channel_model::{array_response, array_response_derivative, vec_outer};
use crate::dictionary::{Dictionary, Grid};
use crate::estimators::{SolverOptions, SupportEntry};
use crate::sensing::SensingBlock;
use crate::{CMatrix, CVector, Result};

/// Array responses and their angle derivatives for one support entry.
pub(crate) struct AtomResponses {
    pub a_ue: CVector,
    pub a_bs: CVector,
    pub da_ue: CVector,
    pub da_bs: CVector,
}

pub(crate) fn responses(
    support: &[SupportEntry],
    grid: &Grid,
    block: &SensingBlock,
) -> Result<Vec<AtomResponses>> {
    let geom = &block.geometry;
    support
        .iter()
        .map(|e| {
            let (rx, tx) = (e.aoa(grid), e.aod(grid));
            Ok(AtomResponses {
                a_ue: array_response(rx, &geom.ue)?,
                a_bs: array_response(tx, &geom.bs)?,
                da_ue: array_response_derivative(rx, &geom.ue)?,
                da_bs: array_response_derivative(tx, &geom.bs)?,
            })
        })
        .collect()
}

/// `[Φ_t a_1, …, Φ_t a_k]` per frame.
pub(crate) fn projected_atoms(block: &SensingBlock, atoms: &[AtomResponses]) -> Vec<CMatrix> {
    (0..block.frames())
        .map(|t| {
            let cols: Vec<CVector> = atoms
                .iter()
                .map(|a| block.project_outer(t, &a.a_ue, &a.a_bs))
                .collect();
            columns(block.measurements_per_frame(), cols)
        })
        .collect()
}

/// `[Φ_t ∂a_l/∂θ_rx]` and `[Φ_t ∂a_l/∂θ_tx]` per frame.
pub(crate) fn projected_derivatives(
    block: &SensingBlock,
    atoms: &[AtomResponses],
) -> (Vec<CMatrix>, Vec<CMatrix>) {
    let m = block.measurements_per_frame();
    let mut rx = Vec::with_capacity(block.frames());
    let mut tx = Vec::with_capacity(block.frames());
    for t in 0..block.frames() {
        rx.push(columns(
            m,
            atoms.iter().map(|a| block.project_outer(t, &a.da_ue, &a.a_bs)).collect(),
        ));
        tx.push(columns(
            m,
            atoms.iter().map(|a| block.project_outer(t, &a.a_ue, &a.da_bs)).collect(),
        ));
    }
    (rx, tx)
}

fn columns(rows: usize, cols: Vec<CVector>) -> CMatrix {
    if cols.is_empty() {
        CMatrix::zeros(rows, 0)
    } else {
        CMatrix::from_columns(&cols)
    }
}

/// `[vec(a_UE a_BS^H)]` over the support, `MN × k`.
pub(crate) fn full_atoms(atoms: &[AtomResponses], dim: usize) -> CMatrix {
    columns(dim, atoms.iter().map(|a| vec_outer(&a.a_ue, &a.a_bs)).collect())
}

/// `Φ_t Ψ` built from per-symbol factors `W^H A_UE` and `A_BS^H f`.
pub(crate) fn project_dictionary(block: &SensingBlock, dict: &Dictionary, frame: usize) -> CMatrix {
    let grid = &dict.grid;
    let geom = &block.geometry;
    let a_ue = CMatrix::from_columns(
        &grid
            .aoa_angles
            .iter()
            .map(|&t| array_response(t, &geom.ue).expect("grid angles are finite"))
            .collect::<Vec<_>>(),
    );
    let a_bs = CMatrix::from_columns(
        &grid
            .aod_angles
            .iter()
            .map(|&t| array_response(t, &geom.bs).expect("grid angles are finite"))
            .collect::<Vec<_>>(),
    );
    let symbols = &block.beams.frames[frame];
    let n_rf = symbols[0].combiner.ncols();
    let mut out = CMatrix::zeros(symbols.len() * n_rf, grid.num_cells());
    for (s, sym) in symbols.iter().enumerate() {
        let wu = sym.combiner.ad_mul(&a_ue);
        let bf = a_bs.ad_mul(&sym.precoder);
        for j in 0..grid.g_bs() {
            for i in 0..grid.g_ue() {
                let col = grid.column_index(i, j);
                for r in 0..n_rf {
                    out[(s * n_rf + r, col)] = wu[(r, i)] * bf[j];
                }
            }
        }
    }
    out
}

/// Clipped gradient descent with backtracking over the offsets of every
/// support entry. `eval` returns the objective and whatever state the
/// gradient needs; `grad` returns the descent direction `(g_rx, g_tx)`
/// (the objective decreases along `+g`). Returns the final state and the
/// objective after every accepted step, starting with the initial value.
pub(crate) fn descend<S>(
    grid: &Grid,
    support: &mut [SupportEntry],
    opts: &SolverOptions,
    mut eval: impl FnMut(&[SupportEntry]) -> Result<(f64, S)>,
    grad: impl Fn(&[SupportEntry], &S) -> Result<(Vec<f64>, Vec<f64>)>,
) -> Result<(S, Vec<f64>)> {
    let bounds = support
        .iter()
        .map(|e| e.bounds(grid))
        .collect::<Result<Vec<_>>>()?;
    let (mut f, mut state) = eval(support)?;
    let mut history = vec![f];
    let floor = f * 1e-28;
    let mut mu_last = opts.mu0;

    for _ in 0..opts.p_max {
        if f <= floor || f == 0.0 {
            break;
        }
        let (mut g_rx, mut g_tx) = grad(support, &state)?;
        // components pushing against an active bound cannot move
        for (l, (b_rx, b_tx)) in bounds.iter().enumerate() {
            let e = &support[l];
            if (e.delta_aoa <= b_rx.lower && g_rx[l] < 0.0) || (e.delta_aoa >= b_rx.upper && g_rx[l] > 0.0) {
                g_rx[l] = 0.0;
            }
            if (e.delta_aod <= b_tx.lower && g_tx[l] < 0.0) || (e.delta_aod >= b_tx.upper && g_tx[l] > 0.0) {
                g_tx[l] = 0.0;
            }
        }
        let g_max = g_rx.iter().chain(&g_tx).fold(0.0f64, |m, g| m.max(g.abs()));
        if !g_max.is_finite() || g_max <= 0.0 {
            break;
        }

        let mut mu = (2.0 * mu_last).min(opts.mu0);
        let mut accepted = None;
        let mut moved = 0.0;
        for _ in 0..=opts.max_halvings {
            let trial: Vec<SupportEntry> = support
                .iter()
                .zip(&bounds)
                .enumerate()
                .map(|(l, (e, (b_rx, b_tx)))| SupportEntry {
                    delta_aoa: b_rx.clamp(e.delta_aoa + mu * g_rx[l] / g_max),
                    delta_aod: b_tx.clamp(e.delta_aod + mu * g_tx[l] / g_max),
                    ..*e
                })
                .collect();
            moved = trial
                .iter()
                .zip(support.iter())
                .map(|(a, b)| (a.delta_aoa - b.delta_aoa).abs().max((a.delta_aod - b.delta_aod).abs()))
                .fold(0.0, f64::max);
            if moved < opts.tol_step {
                break;
            }
            let (f_trial, s_trial) = eval(&trial)?;
            if f_trial <= f {
                accepted = Some((trial, f_trial, s_trial));
                break;
            }
            mu *= 0.5;
        }
        let Some((trial, f_trial, s_trial)) = accepted else {
            break;
        };
        support.copy_from_slice(&trial);
        f = f_trial;
        state = s_trial;
        history.push(f);
        mu_last = mu;
        if moved < opts.tol_step {
            break;
        }
    }
    Ok((state, history))
}
