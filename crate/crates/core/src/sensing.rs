//! Time-varying hybrid training: analog precoders/combiners, aggregated
//! sensing matrices and noisy baseband measurements.
//!
//! In frame `t` the BS sends `M_RF` pilot symbols. Symbol `s` uses precoder
//! `f_{t,s}` (length `M`) and combiner `W_{t,s}` (`N × N_RF`), giving
//! `y_{t,s} = W^H H f + W^H n`. Stacking the symbols yields
//! `ỹ_t = Φ_t vec(H_t) + ñ_t` with row block `s` of `Φ_t` equal to
//! `f^T ⊗ W^H`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel_model::{sample_cn, ChannelRealization, LinkGeometry};
use crate::{CMatrix, CVector, Error, Result, C64};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum BeamformerStyle {
    /// Entries `e^{jφ}/√dim` with i.i.d. uniform phases.
    #[default]
    UnitModulusRandomPhase,
    /// i.i.d. complex Gaussian columns scaled to unit norm.
    GaussianNormalized,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainingConfig {
    pub m_rf: usize,
    pub n_rf: usize,
    pub frames: usize,
    pub noise_variance: f64,
    #[serde(default)]
    pub style: BeamformerStyle,
}

impl TrainingConfig {
    /// `σ_n² = 10^{-SNR/10}`.
    pub fn noise_variance_for_snr_db(snr_db: f64) -> f64 {
        10f64.powf(-snr_db / 10.0)
    }

    pub fn measurements_per_frame(&self) -> usize {
        self.m_rf * self.n_rf
    }

    pub fn validate(&self, geometry: &LinkGeometry) -> Result<()> {
        if self.m_rf == 0 || self.n_rf == 0 || self.frames == 0 {
            return Err(Error::invalid("RF chain counts and frame count must be >= 1"));
        }
        if self.m_rf > geometry.bs.num_antennas {
            return Err(Error::invalid(format!(
                "m_rf = {} exceeds {} BS antennas",
                self.m_rf, geometry.bs.num_antennas
            )));
        }
        if self.n_rf > geometry.ue.num_antennas {
            return Err(Error::invalid(format!(
                "n_rf = {} exceeds {} UE antennas",
                self.n_rf, geometry.ue.num_antennas
            )));
        }
        if !(self.noise_variance >= 0.0 && self.noise_variance.is_finite()) {
            return Err(Error::invalid("noise variance must be finite and >= 0"));
        }
        Ok(())
    }
}

/// Precoder and combiner of one training symbol.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolBeams {
    /// `M`-vector, unit norm.
    pub precoder: CVector,
    /// `N × N_RF`, unit-norm columns.
    pub combiner: CMatrix,
}

/// `frames[t][s]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Beamformers {
    pub frames: Vec<Vec<SymbolBeams>>,
}

fn unit_column<R: Rng + ?Sized>(rng: &mut R, dim: usize, style: BeamformerStyle) -> CVector {
    match style {
        BeamformerStyle::UnitModulusRandomPhase => {
            let scale = 1.0 / (dim as f64).sqrt();
            CVector::from_fn(dim, |_, _| {
                C64::from_polar(scale, rng.random::<f64>() * std::f64::consts::TAU)
            })
        }
        BeamformerStyle::GaussianNormalized => loop {
            let v = CVector::from_fn(dim, |_, _| sample_cn(rng, 1.0));
            let norm = v.norm();
            if norm > 0.0 {
                break v / C64::from(norm);
            }
        },
    }
}

/// Fresh precoder and combiner for every symbol of every frame.
pub fn draw_beamformers<R: Rng + ?Sized>(
    cfg: &TrainingConfig,
    geometry: &LinkGeometry,
    rng: &mut R,
) -> Result<Beamformers> {
    cfg.validate(geometry)?;
    let (m, n) = (geometry.bs.num_antennas, geometry.ue.num_antennas);
    let frames = (0..cfg.frames)
        .map(|_| {
            (0..cfg.m_rf)
                .map(|_| {
                    let precoder = unit_column(rng, m, cfg.style);
                    let cols: Vec<CVector> =
                        (0..cfg.n_rf).map(|_| unit_column(rng, n, cfg.style)).collect();
                    SymbolBeams {
                        precoder,
                        combiner: CMatrix::from_columns(&cols),
                    }
                })
                .collect()
        })
        .collect();
    Ok(Beamformers { frames })
}

/// `Φ_t`: row block `s` is `f_{t,s}^T ⊗ W_{t,s}^H`, shape `(M_RF·N_RF) × MN`.
pub fn aggregate_sensing(beams: &Beamformers, frame: usize) -> Result<CMatrix> {
    let symbols = beams
        .frames
        .get(frame)
        .ok_or_else(|| Error::invalid(format!("frame {frame} out of range")))?;
    let first = symbols
        .first()
        .ok_or_else(|| Error::invalid("frame has no training symbols"))?;
    let m = first.precoder.len();
    let (n, n_rf) = first.combiner.shape();
    let mut phi = CMatrix::zeros(symbols.len() * n_rf, m * n);
    for (s, sym) in symbols.iter().enumerate() {
        for r in 0..n_rf {
            let row = s * n_rf + r;
            for mm in 0..m {
                let f = sym.precoder[mm];
                for nn in 0..n {
                    phi[(row, mm * n + nn)] = f * sym.combiner[(nn, r)].conj();
                }
            }
        }
    }
    Ok(phi)
}

/// Sensing matrices, beamformers and measurements of one training block.
#[derive(Debug, Clone)]
pub struct SensingBlock {
    pub geometry: LinkGeometry,
    pub beams: Beamformers,
    /// `Φ_t` per frame.
    pub phi: Vec<CMatrix>,
    /// `ỹ_t` per frame.
    pub y: Vec<CVector>,
    pub noise_variance: f64,
}

impl SensingBlock {
    /// Assemble a block from precomputed beamformers and measurement vectors.
    pub fn new(geometry: LinkGeometry, beams: Beamformers, y: Vec<CVector>, noise_variance: f64) -> Result<Self> {
        if beams.frames.len() != y.len() {
            return Err(Error::invalid(format!(
                "{} beamformer frames for {} measurement vectors",
                beams.frames.len(),
                y.len()
            )));
        }
        let phi = (0..y.len())
            .map(|t| aggregate_sensing(&beams, t))
            .collect::<Result<Vec<_>>>()?;
        for (t, (p, yt)) in phi.iter().zip(&y).enumerate() {
            if p.nrows() != yt.len() || p.ncols() != geometry.channel_dim() {
                return Err(Error::invalid(format!("frame {t}: sensing/measurement shape mismatch")));
            }
        }
        Ok(SensingBlock {
            geometry,
            beams,
            phi,
            y,
            noise_variance,
        })
    }

    pub fn frames(&self) -> usize {
        self.y.len()
    }

    pub fn measurements_per_frame(&self) -> usize {
        self.y.first().map_or(0, |y| y.len())
    }

    /// `Φ_t vec(u b^H)` for a UE-side vector `u` and BS-side vector `b`,
    /// computed per symbol as `(W^H u)(b^H f)` without touching `Φ_t`.
    pub fn project_outer(&self, frame: usize, u: &CVector, b: &CVector) -> CVector {
        let symbols = &self.beams.frames[frame];
        let n_rf = symbols[0].combiner.ncols();
        let mut out = CVector::zeros(symbols.len() * n_rf);
        for (s, sym) in symbols.iter().enumerate() {
            let c = b.dotc(&sym.precoder);
            let wu = sym.combiner.ad_mul(u);
            for r in 0..n_rf {
                out[s * n_rf + r] = wu[r] * c;
            }
        }
        out
    }

    /// Total residual energy `Σ_t ‖ỹ_t‖²`.
    pub fn energy(&self) -> f64 {
        self.y.iter().map(|y| y.norm_squared()).sum()
    }

    /// Per-frame noise moments `(tr C_t, tr C_t²)` with
    /// `C_t = σ² blkdiag(W_{t,s}^H W_{t,s})` the covariance of `ñ_t`.
    pub fn noise_moments(&self) -> Vec<(f64, f64)> {
        let s2 = self.noise_variance;
        self.beams
            .frames
            .iter()
            .map(|symbols| {
                symbols.iter().fold((0.0, 0.0), |(a, b), s| {
                    let g = s.combiner.ad_mul(&s.combiner);
                    (a + s2 * g.trace().re, b + s2 * s2 * g.norm_squared())
                })
            })
            .collect()
    }

    /// `E Σ_t ‖ñ_t‖²`.
    pub fn expected_noise_energy(&self) -> f64 {
        self.noise_moments().iter().map(|m| m.0).sum()
    }
}

/// `ỹ_t = Φ_t vec(H_t) + ñ_t`, `ñ` stacking `W_{t,s}^H n_{t,s}` with
/// `n ~ CN(0, σ_n² I_N)` drawn per symbol. Pilot symbol is 1.
pub fn measure<R: Rng + ?Sized>(
    channel: &ChannelRealization,
    beams: Beamformers,
    cfg: &TrainingConfig,
    geometry: &LinkGeometry,
    rng: &mut R,
) -> Result<SensingBlock> {
    cfg.validate(geometry)?;
    if beams.frames.len() != channel.snapshots() {
        return Err(Error::invalid(format!(
            "{} beamformer frames for {} channel snapshots",
            beams.frames.len(),
            channel.snapshots()
        )));
    }
    let n = geometry.ue.num_antennas;
    let sigma2 = cfg.noise_variance;
    let mut y = Vec::with_capacity(channel.snapshots());
    for (h, symbols) in channel.h.iter().zip(&beams.frames) {
        let n_rf = symbols[0].combiner.ncols();
        let mut yt = CVector::zeros(symbols.len() * n_rf);
        for (s, sym) in symbols.iter().enumerate() {
            let mut rx = h * &sym.precoder;
            if sigma2 > 0.0 {
                for i in 0..n {
                    rx[i] += sample_cn(rng, sigma2);
                }
            }
            let ys = sym.combiner.ad_mul(&rx);
            yt.rows_mut(s * n_rf, n_rf).copy_from(&ys);
        }
        y.push(yt);
    }
    SensingBlock::new(*geometry, beams, y, sigma2)
}
