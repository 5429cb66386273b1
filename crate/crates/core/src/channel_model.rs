//! Geometric multipath channel model for uniform linear arrays.
//!
//! A channel is a sum of `K·L` rank-one terms `α·a_UE(θ_rx)·a_BS(θ_tx)^H`.
//! Angles are fixed across snapshots; the complex gains are redrawn for every
//! snapshot.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::{CMatrix, CVector, Error, Result, C64};

/// Uniform linear array. Spacing is in wavelengths.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArrayGeometry {
    pub num_antennas: usize,
    #[serde(default = "default_spacing")]
    pub element_spacing_over_wavelength: f64,
}

fn default_spacing() -> f64 {
    0.5
}

impl ArrayGeometry {
    pub fn new(num_antennas: usize, element_spacing_over_wavelength: f64) -> Result<Self> {
        let geom = ArrayGeometry {
            num_antennas,
            element_spacing_over_wavelength,
        };
        geom.validate()?;
        Ok(geom)
    }

    /// Half-wavelength ULA.
    pub fn half_wavelength(num_antennas: usize) -> Self {
        ArrayGeometry {
            num_antennas,
            element_spacing_over_wavelength: 0.5,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_antennas == 0 {
            return Err(Error::invalid("array needs at least one antenna"));
        }
        let d = self.element_spacing_over_wavelength;
        if !(d.is_finite() && d > 0.0) {
            return Err(Error::invalid(format!("element spacing must be positive, got {d}")));
        }
        Ok(())
    }
}

/// Base station (transmit, `M` antennas) and user equipment (receive, `N`
/// antennas) arrays of one link.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkGeometry {
    pub bs: ArrayGeometry,
    pub ue: ArrayGeometry,
}

impl LinkGeometry {
    pub fn half_wavelength(m_bs: usize, n_ue: usize) -> Self {
        LinkGeometry {
            bs: ArrayGeometry::half_wavelength(m_bs),
            ue: ArrayGeometry::half_wavelength(n_ue),
        }
    }

    /// `M·N`, the length of `vec(H)`.
    pub fn channel_dim(&self) -> usize {
        self.bs.num_antennas * self.ue.num_antennas
    }
}

fn check_angle(theta: f64) -> Result<()> {
    if theta.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("angle must be finite, got {theta}")))
    }
}

/// Normalized ULA response: `[a]_n = e^{j2π d (n-1) cos θ} / √N`.
pub fn array_response(theta: f64, geometry: &ArrayGeometry) -> Result<CVector> {
    check_angle(theta)?;
    let n = geometry.num_antennas;
    let scale = 1.0 / (n as f64).sqrt();
    let k = 2.0 * PI * geometry.element_spacing_over_wavelength * theta.cos();
    Ok(CVector::from_fn(n, |i, _| C64::from_polar(scale, k * i as f64)))
}

/// Exact derivative of [`array_response`] with respect to `θ`.
pub fn array_response_derivative(theta: f64, geometry: &ArrayGeometry) -> Result<CVector> {
    check_angle(theta)?;
    let n = geometry.num_antennas;
    let scale = 1.0 / (n as f64).sqrt();
    let two_pi_d = 2.0 * PI * geometry.element_spacing_over_wavelength;
    let k = two_pi_d * theta.cos();
    let s = theta.sin();
    Ok(CVector::from_fn(n, |i, _| {
        let i = i as f64;
        C64::from_polar(scale, k * i) * C64::new(0.0, -two_pi_d * i * s)
    }))
}

/// `vec(a_UE a_BS^H)`, i.e. `conj(a_BS) ⊗ a_UE`. Entry `n + N·m` is
/// `a_ue[n]·conj(a_bs[m])`.
pub fn vec_outer(a_ue: &CVector, a_bs: &CVector) -> CVector {
    let n = a_ue.len();
    CVector::from_fn(n * a_bs.len(), |idx, _| a_ue[idx % n] * a_bs[idx / n].conj())
}

/// Vectorized two-sided response for an (AoA, AoD) pair.
pub fn link_atom(aoa: f64, aod: f64, geometry: &LinkGeometry) -> Result<CVector> {
    let a_ue = array_response(aoa, &geometry.ue)?;
    let a_bs = array_response(aod, &geometry.bs)?;
    Ok(vec_outer(&a_ue, &a_bs))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelParams {
    /// Number of clusters.
    pub clusters: usize,
    /// Paths per cluster.
    pub paths_per_cluster: usize,
    /// Laplacian scale of the AoA offsets, radians.
    pub sigma_as_aoa: f64,
    /// Laplacian scale of the AoD offsets, radians.
    pub sigma_as_aod: f64,
    /// Number of snapshots.
    pub snapshots: usize,
    /// Average path loss.
    pub beta: f64,
    pub rng_seed: u64,
}

impl Default for ChannelParams {
    fn default() -> Self {
        ChannelParams {
            clusters: 4,
            paths_per_cluster: 2,
            sigma_as_aoa: 20f64.to_radians(),
            sigma_as_aod: 20f64.to_radians(),
            snapshots: 1,
            beta: 1.0,
            rng_seed: 0,
        }
    }
}

impl ChannelParams {
    pub fn num_paths(&self) -> usize {
        self.clusters * self.paths_per_cluster
    }

    pub fn validate(&self) -> Result<()> {
        if self.clusters == 0 || self.paths_per_cluster == 0 || self.snapshots == 0 {
            return Err(Error::invalid("clusters, paths per cluster and snapshots must be >= 1"));
        }
        if !(self.sigma_as_aoa >= 0.0 && self.sigma_as_aod >= 0.0) {
            return Err(Error::invalid("angular spreads must be non-negative"));
        }
        if !(self.beta.is_finite() && self.beta > 0.0) {
            return Err(Error::invalid("path loss beta must be positive"));
        }
        Ok(())
    }
}

/// True continuous path angles, cluster-major (`k·L + l`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathSet {
    pub aoa: Vec<f64>,
    pub aod: Vec<f64>,
}

impl PathSet {
    pub fn len(&self) -> usize {
        self.aoa.len()
    }

    pub fn is_empty(&self) -> bool {
        self.aoa.is_empty()
    }
}

/// One Laplace(0, `scale`) draw by inverse CDF.
pub fn sample_laplace<R: Rng + ?Sized>(rng: &mut R, scale: f64) -> f64 {
    if scale == 0.0 {
        return 0.0;
    }
    let u: f64 = rng.random::<f64>() - 0.5;
    -scale * u.signum() * (1.0 - 2.0 * u.abs()).ln()
}

fn wrap_angle(theta: f64) -> f64 {
    let w = theta.rem_euclid(PI);
    // rem_euclid can round up to exactly π for tiny negative inputs
    if w >= PI {
        0.0
    } else {
        w
    }
}

/// Cluster centres uniform on `[0, π)`, per-path Laplacian offsets, wrapped
/// back into `[0, π)`.
pub fn draw_paths<R: Rng + ?Sized>(params: &ChannelParams, rng: &mut R) -> PathSet {
    let n = params.num_paths();
    let mut aoa = Vec::with_capacity(n);
    let mut aod = Vec::with_capacity(n);
    for _ in 0..params.clusters {
        let centre_rx = rng.random::<f64>() * PI;
        let centre_tx = rng.random::<f64>() * PI;
        for _ in 0..params.paths_per_cluster {
            aoa.push(wrap_angle(centre_rx + sample_laplace(rng, params.sigma_as_aoa)));
            aod.push(wrap_angle(centre_tx + sample_laplace(rng, params.sigma_as_aod)));
        }
    }
    PathSet { aoa, aod }
}

/// One `CN(0, 1)` draw.
pub fn sample_cn<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> C64 {
    let s = (variance / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(s * re, s * im)
}

/// `T × K·L` i.i.d. `CN(0, 1)` gains, drawn snapshot by snapshot so a longer
/// run shares its prefix with a shorter one on the same stream.
pub fn draw_gains<R: Rng + ?Sized>(params: &ChannelParams, rng: &mut R) -> CMatrix {
    let (t, n) = (params.snapshots, params.num_paths());
    let mut gains = CMatrix::zeros(t, n);
    for row in 0..t {
        for col in 0..n {
            gains[(row, col)] = sample_cn(rng, 1.0);
        }
    }
    gains
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    /// `N × M` channel per snapshot.
    pub h: Vec<CMatrix>,
    /// `T × K·L` gains.
    pub gains: CMatrix,
}

impl ChannelRealization {
    pub fn snapshots(&self) -> usize {
        self.h.len()
    }

    /// `vec(H_t)` for every snapshot.
    pub fn vectorized(&self) -> Vec<CVector> {
        self.h
            .iter()
            .map(|h| CVector::from_column_slice(h.as_slice()))
            .collect()
    }
}

/// `H_t = (1/β) Σ α_{p,t} a_UE(θ_rx,p) a_BS(θ_tx,p)^H`.
pub fn synthesize_channel(
    paths: &PathSet,
    gains: &CMatrix,
    beta: f64,
    geometry: &LinkGeometry,
) -> Result<ChannelRealization> {
    if gains.ncols() != paths.len() {
        return Err(Error::invalid(format!(
            "gain matrix has {} columns for {} paths",
            gains.ncols(),
            paths.len()
        )));
    }
    let (n, m) = (geometry.ue.num_antennas, geometry.bs.num_antennas);
    let outers = paths
        .aoa
        .iter()
        .zip(&paths.aod)
        .map(|(&rx, &tx)| {
            let a_ue = array_response(rx, &geometry.ue)?;
            let a_bs = array_response(tx, &geometry.bs)?;
            Ok(&a_ue * a_bs.adjoint())
        })
        .collect::<Result<Vec<CMatrix>>>()?;
    let inv_beta = 1.0 / beta;
    let h = (0..gains.nrows())
        .map(|t| {
            let mut ht = CMatrix::zeros(n, m);
            for (p, outer) in outers.iter().enumerate() {
                ht += outer * (gains[(t, p)] * inv_beta);
            }
            ht
        })
        .collect();
    Ok(ChannelRealization {
        h,
        gains: gains.clone(),
    })
}

/// Expected covariance `E[h h^H]` for fixed angles and i.i.d. unit-variance
/// gains: `(1/β²) Σ_p v_p v_p^H` with `v_p = vec(a_UE a_BS^H)`.
pub fn true_covariance(paths: &PathSet, beta: f64, geometry: &LinkGeometry) -> Result<CMatrix> {
    let dim = geometry.channel_dim();
    let mut r = CMatrix::zeros(dim, dim);
    for (&rx, &tx) in paths.aoa.iter().zip(&paths.aod) {
        let v = link_atom(rx, tx, geometry)?;
        r += &v * v.adjoint();
    }
    Ok(r / C64::from(beta * beta))
}

/// Sample covariance `(1/T) Σ_t h_t h_t^H` over a realization.
pub fn sample_covariance(channel: &ChannelRealization) -> CMatrix {
    let hs = channel.vectorized();
    let dim = hs.first().map_or(0, |h| h.len());
    let mut r = CMatrix::zeros(dim, dim);
    for h in &hs {
        r += h * h.adjoint();
    }
    if !hs.is_empty() {
        r /= C64::from(hs.len() as f64);
    }
    r
}
