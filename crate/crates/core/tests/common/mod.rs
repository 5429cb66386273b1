#![allow(dead_code)]

use offgrid::channel_model::{
    draw_gains, draw_paths, link_atom, synthesize_channel, ChannelParams, ChannelRealization, LinkGeometry, PathSet,
};
use offgrid::dictionary::{build_dictionary, build_grid, Dictionary, GridScheme};
use offgrid::estimators::{
    channel_gradient, channel_objective, covariance_gradient, covariance_objective, fit_cross_gains,
    measurement_covariances, GradientForm, SupportEntry,
};
use offgrid::sensing::{draw_beamformers, measure, SensingBlock, TrainingConfig};
use offgrid::{CMatrix, CVector, C64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub struct Fixture {
    pub geom: LinkGeometry,
    pub dict: Dictionary,
    pub block: SensingBlock,
    pub channel: ChannelRealization,
    pub paths: PathSet,
}

pub struct Setup {
    pub m: usize,
    pub n: usize,
    pub m_rf: usize,
    pub n_rf: usize,
    pub frames: usize,
    pub noise_variance: f64,
    pub g: usize,
    pub scheme: GridScheme,
}

impl Default for Setup {
    fn default() -> Self {
        Setup {
            m: 16,
            n: 8,
            m_rf: 5,
            n_rf: 6,
            frames: 5,
            noise_variance: 0.0,
            g: 16,
            scheme: GridScheme::UniformCosTheta,
        }
    }
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn dictionary(setup: &Setup) -> Dictionary {
    let geom = LinkGeometry::half_wavelength(setup.m, setup.n);
    build_dictionary(build_grid(setup.scheme, setup.g, setup.g).unwrap(), &geom).unwrap()
}

/// Measures the given paths with unit-variance gains.
pub fn fixture_with_paths(setup: &Setup, paths: PathSet, seed: u64) -> Fixture {
    let geom = LinkGeometry::half_wavelength(setup.m, setup.n);
    let dict = dictionary(setup);
    let mut r = rng(seed);
    let params = ChannelParams {
        clusters: 1,
        paths_per_cluster: paths.len(),
        snapshots: setup.frames,
        ..Default::default()
    };
    let gains = draw_gains(&params, &mut r);
    let channel = synthesize_channel(&paths, &gains, 1.0, &geom).unwrap();
    let cfg = TrainingConfig {
        m_rf: setup.m_rf,
        n_rf: setup.n_rf,
        frames: setup.frames,
        noise_variance: setup.noise_variance,
        style: Default::default(),
    };
    let beams = draw_beamformers(&cfg, &geom, &mut r).unwrap();
    let block = measure(&channel, beams, &cfg, &geom, &mut r).unwrap();
    Fixture {
        geom,
        dict,
        block,
        channel,
        paths,
    }
}

/// Random clustered channel with `clusters × per_cluster` paths.
pub fn random_fixture(setup: &Setup, clusters: usize, per_cluster: usize, seed: u64) -> Fixture {
    let params = ChannelParams {
        clusters,
        paths_per_cluster: per_cluster,
        snapshots: setup.frames,
        ..Default::default()
    };
    let paths = draw_paths(&params, &mut rng(seed ^ 0x5eed));
    fixture_with_paths(setup, paths, seed)
}

/// Random support of `k` distinct cells with offsets strictly inside
/// their bounds.
pub fn random_support(dict: &Dictionary, k: usize, r: &mut impl Rng) -> Vec<SupportEntry> {
    let grid = &dict.grid;
    let mut out: Vec<SupportEntry> = Vec::new();
    while out.len() < k {
        let i = r.random_range(0..grid.g_ue());
        let j = r.random_range(0..grid.g_bs());
        if out.iter().any(|e| e.aoa_index == i && e.aod_index == j) {
            continue;
        }
        let mut e = SupportEntry::on_grid(i, j);
        let (b_rx, b_tx) = e.bounds(grid).unwrap();
        e.delta_aoa = b_rx.lower + (b_rx.upper - b_rx.lower) * r.random_range(0.1..0.9);
        e.delta_aod = b_tx.lower + (b_tx.upper - b_tx.lower) * r.random_range(0.1..0.9);
        out.push(e);
    }
    out
}

pub fn random_cn(r: &mut impl Rng) -> C64 {
    C64::new(r.random::<f64>() - 0.5, r.random::<f64>() - 0.5)
}

/// Columns `vec(a_UE a_BS^H)` of the support angles.
pub fn support_atoms(dict: &Dictionary, geom: &LinkGeometry, support: &[SupportEntry]) -> CMatrix {
    let cols: Vec<CVector> = support
        .iter()
        .map(|e| link_atom(e.aoa(&dict.grid), e.aod(&dict.grid), geom).unwrap())
        .collect();
    CMatrix::from_columns(&cols)
}

/// Angle of the path closest to `(aoa, aod)` in the max-norm.
pub fn nearest_path_error(paths: &PathSet, aoa: f64, aod: f64) -> f64 {
    paths
        .aoa
        .iter()
        .zip(&paths.aod)
        .map(|(&r, &t)| (r - aoa).abs().max((t - aod).abs()))
        .fold(f64::INFINITY, f64::min)
}

/// Textbook single-vector OMP on a dense dictionary: pick the column with
/// the largest `|d_j^H r|` (lowest index on ties, no repeats), refit all
/// picked columns by least squares, stop at `k_max` or once
/// `‖r‖² ≤ epsilon ‖y‖²`. Returns flat column indices in pick order.
pub fn reference_omp(d: &CMatrix, y: &CVector, k_max: usize, epsilon: f64) -> Vec<usize> {
    let initial = y.norm_squared();
    let mut picked: Vec<usize> = Vec::new();
    let mut r = y.clone();
    while picked.len() < k_max && r.norm_squared() > epsilon * initial {
        let mut best: Option<(usize, f64)> = None;
        for j in 0..d.ncols() {
            if picked.contains(&j) {
                continue;
            }
            let s = d.column(j).dotc(&r).norm();
            if best.is_none_or(|(_, b)| s > b) {
                best = Some((j, s));
            }
        }
        let Some((j, _)) = best else { break };
        picked.push(j);
        let cols: Vec<CVector> = picked.iter().map(|&c| d.column(c).into_owned()).collect();
        let a = CMatrix::from_columns(&cols);
        let x = a.clone().svd(true, true).solve(y, 1e-14).unwrap();
        r = y - a * x;
    }
    picked
}

const FD_STEP: f64 = 1e-6;

fn shifted(support: &[SupportEntry], l: usize, rx: bool, h: f64) -> Vec<SupportEntry> {
    let mut s = support.to_vec();
    if rx {
        s[l].delta_aoa += h;
    } else {
        s[l].delta_aod += h;
    }
    s
}

/// Largest deviation between `-2g` and central finite-difference slopes,
/// relative to the largest slope.
pub fn slope_mismatch(
    support: &[SupportEntry],
    g: &(Vec<f64>, Vec<f64>),
    f: impl Fn(&[SupportEntry]) -> f64,
) -> f64 {
    let mut worst: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for l in 0..support.len() {
        for (rx, gl) in [(true, g.0[l]), (false, g.1[l])] {
            let fd = (f(&shifted(support, l, rx, FD_STEP)) - f(&shifted(support, l, rx, -FD_STEP))) / (2.0 * FD_STEP);
            worst = worst.max((fd + 2.0 * gl).abs());
            scale = scale.max(fd.abs()).max((2.0 * gl).abs());
        }
    }
    if scale == 0.0 {
        0.0
    } else {
        worst / scale
    }
}

fn gradient_setup(state: u64) -> Setup {
    Setup {
        frames: 1 + (state as usize % 4),
        noise_variance: 0.05,
        ..Default::default()
    }
}

/// Finite-difference mismatch of the channel gradient at random state
/// `state`: random support, offsets, gains and noisy measurements.
pub fn channel_gradient_error(state: u64) -> f64 {
    let setup = gradient_setup(state);
    let fx = random_fixture(&setup, 2, 2, 100 + state);
    let mut r = rng(state);
    let k = r.random_range(1..=4);
    let support = random_support(&fx.dict, k, &mut r);
    let frames = setup.frames;
    let gains = CMatrix::from_fn(frames, k, |_, _| random_cn(&mut r));
    // residuals from dense Φ_t and explicit atoms
    let basis = support_atoms(&fx.dict, &fx.geom, &support);
    let residuals: Vec<CVector> = (0..frames)
        .map(|t| &fx.block.y[t] - &fx.block.phi[t] * (&basis * gains.row(t).transpose()))
        .collect();
    let g = channel_gradient(&fx.block, &fx.dict, &support, &gains, &residuals, GradientForm::Exact).unwrap();
    slope_mismatch(&support, &g, |s| channel_objective(&fx.block, &fx.dict, s, &gains).unwrap())
}

/// As [`channel_gradient_error`] for the covariance gradient; odd states
/// move the cross gains off their least-squares values.
pub fn covariance_gradient_error(state: u64) -> f64 {
    let setup = gradient_setup(state);
    let fx = random_fixture(&setup, 2, 2, 200 + state);
    let mut r = rng(1000 + state);
    let k = r.random_range(1..=4);
    let support = random_support(&fx.dict, k, &mut r);
    let covs = measurement_covariances(&fx.block);
    let fit = fit_cross_gains(&fx.block, &fx.dict, &covs, &support).unwrap();
    let gammas: Vec<CMatrix> = if state.is_multiple_of(2) {
        fit.cross_gains.clone()
    } else {
        fit.cross_gains
            .iter()
            .map(|g| {
                let x = CMatrix::from_fn(k, k, |_, _| random_cn(&mut r));
                g + (&x + x.adjoint()) * C64::from(0.5)
            })
            .collect()
    };
    let basis = support_atoms(&fx.dict, &fx.geom, &support);
    let residuals: Vec<CMatrix> = (0..setup.frames)
        .map(|t| {
            let b = &fx.block.phi[t] * &basis;
            &covs[t] - &b * &gammas[t] * b.adjoint()
        })
        .collect();
    let g = covariance_gradient(&fx.block, &fx.dict, &support, &gammas, &residuals, GradientForm::Exact).unwrap();
    slope_mismatch(&support, &g, |s| covariance_objective(&fx.block, &fx.dict, &covs, s, &gammas).unwrap())
}
