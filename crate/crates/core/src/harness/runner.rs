use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::scenario::{Algorithm, CovarianceReference, Scenario, SweepPoint};
use crate::channel_model::{draw_gains, draw_paths, sample_covariance, synthesize_channel, true_covariance};
use crate::dictionary::{build_dictionary, build_grid, Dictionary};
use crate::estimators::{indirect_covariance, ppcomp, ppsomp, SolverOptions};
use crate::metrics::{nmse_c, nmse_h, relative_efficiency};
use crate::sensing::{draw_beamformers, measure, TrainingConfig};
use crate::{Error, Result};

/// One algorithm on one trial at one sweep point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultRow {
    pub scenario_id: String,
    pub algorithm: Algorithm,
    pub snapshots: usize,
    pub snr_db: f64,
    pub mrf_nrf: usize,
    pub trial: usize,
    /// NaN for covariance-only estimators.
    pub nmse_h: f64,
    pub nmse_c: f64,
    pub eta: f64,
    pub wall_ms: f64,
    pub support_size: usize,
}

/// Mean and sample standard deviation of the metrics over trials.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub algorithm: Algorithm,
    pub snapshots: usize,
    pub snr_db: f64,
    pub mrf_nrf: usize,
    pub trials: usize,
    pub nmse_h_mean: f64,
    pub nmse_h_std: f64,
    pub nmse_c_mean: f64,
    pub nmse_c_std: f64,
    pub eta_mean: f64,
    pub eta_std: f64,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    /// Worker threads; `None` uses the rayon default.
    pub threads: Option<usize>,
}

/// Independent ChaCha streams for one trial. The paths, gains, beams and
/// noise of trial `i` depend only on `base_seed + i`, so every sweep point
/// and algorithm sees the same randomness for the same trial.
#[derive(Debug, Clone, Copy)]
pub struct TrialSeeds {
    pub seed: u64,
}

impl TrialSeeds {
    pub fn new(base_seed: u64, trial: usize) -> Self {
        TrialSeeds {
            seed: base_seed.wrapping_add(trial as u64),
        }
    }

    fn stream(&self, id: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(id);
        rng
    }

    pub fn paths(&self) -> ChaCha8Rng {
        self.stream(0)
    }

    pub fn gains(&self) -> ChaCha8Rng {
        self.stream(1)
    }

    pub fn beams(&self) -> ChaCha8Rng {
        self.stream(2)
    }

    pub fn noise(&self) -> ChaCha8Rng {
        self.stream(3)
    }
}

/// Runs every algorithm of `scenario` on trial `trial` at `point`.
pub fn run_trial(
    scenario: &Scenario,
    dict: &Dictionary,
    opts: &SolverOptions,
    point: &SweepPoint,
    trial: usize,
) -> Result<Vec<ResultRow>> {
    let geom = scenario.geometry();
    let seeds = TrialSeeds::new(scenario.base_seed, trial);
    let params = scenario.channel_params(point.snapshots, seeds.seed);
    let paths = draw_paths(&params, &mut seeds.paths());
    let gains = draw_gains(&params, &mut seeds.gains());
    let channel = synthesize_channel(&paths, &gains, params.beta, &geom)?;
    let cfg = TrainingConfig {
        m_rf: point.rf.m_rf,
        n_rf: point.rf.n_rf,
        frames: point.snapshots,
        noise_variance: TrainingConfig::noise_variance_for_snr_db(point.snr_db),
        style: scenario.training.beamformer_style,
    };
    let beams = draw_beamformers(&cfg, &geom, &mut seeds.beams())?;
    let block = measure(&channel, beams, &cfg, &geom, &mut seeds.noise())?;
    let r_true = match scenario.covariance_reference {
        CovarianceReference::Analytic => true_covariance(&paths, params.beta, &geom)?,
        CovarianceReference::Sample => sample_covariance(&channel),
    };
    let truth = channel.vectorized();
    let rank = scenario.metric_rank();

    scenario
        .algorithms
        .iter()
        .map(|&alg| {
            let alg_opts = if alg.perturbed() { *opts } else { opts.on_grid() };
            let start = Instant::now();
            let (h, r_hat, support_size) = if alg.estimates_channel() {
                let est = ppsomp(&block, dict, &alg_opts)?;
                let r = indirect_covariance(&est);
                (Some(est.h_hat), r, est.support.len())
            } else {
                let est = ppcomp(&block, dict, &alg_opts)?;
                (None, est.r_hat, est.support.len())
            };
            let elapsed = start.elapsed().as_secs_f64() * 1e3;
            Ok(ResultRow {
                scenario_id: scenario.id.clone(),
                algorithm: alg,
                snapshots: point.snapshots,
                snr_db: point.snr_db,
                mrf_nrf: point.rf.product(),
                trial,
                nmse_h: match h {
                    Some(h) => nmse_h(&truth, &h)?,
                    None => f64::NAN,
                },
                nmse_c: nmse_c(&r_true, &r_hat)?,
                eta: relative_efficiency(&r_true, &r_hat, rank)?,
                wall_ms: if scenario.record_timing { elapsed } else { 0.0 },
                support_size,
            })
        })
        .collect()
}

/// Runs all sweep points and trials. Rows come out in sweep order, then
/// trial, then algorithm, independent of the thread count.
pub fn run_scenario(scenario: &Scenario, run: &RunOptions) -> Result<Vec<ResultRow>> {
    scenario.validate()?;
    let grid = build_grid(scenario.grid.scheme, scenario.grid.g_bs, scenario.grid.g_ue)?;
    let dict = build_dictionary(grid, &scenario.geometry())?;
    let opts = scenario.solver_options();
    let jobs: Vec<(SweepPoint, usize)> = scenario
        .sweep_points()
        .into_iter()
        .flat_map(|p| (0..scenario.trials).map(move |t| (p, t)))
        .collect();
    let work = || -> Result<Vec<ResultRow>> {
        let nested: Vec<Vec<ResultRow>> = jobs
            .par_iter()
            .map(|(p, t)| run_trial(scenario, &dict, &opts, p, *t))
            .collect::<Result<_>>()?;
        Ok(nested.into_iter().flatten().collect())
    };
    match run.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::invalid(format!("thread pool: {e}")))?
            .install(work),
        None => work(),
    }
}

fn mean_std(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let v: Vec<f64> = values.filter(|x| !x.is_nan()).collect();
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Groups rows by (algorithm, T, SNR, M_RF·N_RF) in first-seen order.
pub fn summarize(rows: &[ResultRow]) -> Vec<SummaryRow> {
    let mut keys: Vec<(Algorithm, usize, f64, usize)> = Vec::new();
    for r in rows {
        let k = (r.algorithm, r.snapshots, r.snr_db, r.mrf_nrf);
        if !keys.contains(&k) {
            keys.push(k);
        }
    }
    keys.into_iter()
        .map(|(algorithm, snapshots, snr_db, mrf_nrf)| {
            let group: Vec<&ResultRow> = rows
                .iter()
                .filter(|r| {
                    r.algorithm == algorithm && r.snapshots == snapshots && r.snr_db == snr_db && r.mrf_nrf == mrf_nrf
                })
                .collect();
            let (nmse_h_mean, nmse_h_std) = mean_std(group.iter().map(|r| r.nmse_h));
            let (nmse_c_mean, nmse_c_std) = mean_std(group.iter().map(|r| r.nmse_c));
            let (eta_mean, eta_std) = mean_std(group.iter().map(|r| r.eta));
            SummaryRow {
                algorithm,
                snapshots,
                snr_db,
                mrf_nrf,
                trials: group.len(),
                nmse_h_mean,
                nmse_h_std,
                nmse_c_mean,
                nmse_c_std,
                eta_mean,
                eta_std,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::{RfChains, TrainingSection};

    fn small() -> Scenario {
        Scenario {
            id: "small".into(),
            channel: crate::harness::ChannelSection {
                bs_antennas: 4,
                ue_antennas: 4,
                clusters: 1,
                paths_per_cluster: 2,
                ..Default::default()
            },
            training: TrainingSection {
                rf_chains: vec![RfChains { m_rf: 2, n_rf: 3 }],
                snapshots: vec![2, 3],
                snr_db: vec![20.0],
                ..Default::default()
            },
            grid: crate::harness::GridSection {
                g_bs: 8,
                g_ue: 8,
                ..Default::default()
            },
            trials: 3,
            record_timing: false,
            ..Default::default()
        }
    }

    #[test]
    fn row_layout_and_thread_independence() {
        let s = small();
        let one = run_scenario(&s, &RunOptions { threads: Some(1) }).unwrap();
        let two = run_scenario(&s, &RunOptions { threads: Some(2) }).unwrap();
        assert_eq!(one.len(), 2 * 3 * 4);
        assert_eq!(format!("{one:?}"), format!("{two:?}"));
        assert_eq!(one[0].algorithm, Algorithm::Dsomp);
        assert_eq!(one[4].trial, 1);
        assert_eq!(one[12].snapshots, 3);
        for r in &one {
            assert_eq!(r.wall_ms, 0.0);
            assert_eq!(r.nmse_h.is_nan(), !r.algorithm.estimates_channel());
            assert!(r.eta > 0.0 && r.eta <= 1.0 + 1e-9);
        }
    }

    #[test]
    fn trial_seeds_share_paths_across_points() {
        let s = small();
        let a = TrialSeeds::new(s.base_seed, 2);
        let p1 = draw_paths(&s.channel_params(2, a.seed), &mut a.paths());
        let p2 = draw_paths(&s.channel_params(3, a.seed), &mut a.paths());
        assert_eq!(p1.aoa, p2.aoa);
        let b = TrialSeeds::new(s.base_seed, 3);
        assert_ne!(p1.aoa, draw_paths(&s.channel_params(2, b.seed), &mut b.paths()).aoa);
    }

    #[test]
    fn summary_statistics() {
        let s = small();
        let rows = run_scenario(&s, &RunOptions { threads: Some(1) }).unwrap();
        let sum = summarize(&rows);
        assert_eq!(sum.len(), 8);
        let first = &sum[0];
        let vals: Vec<f64> = rows
            .iter()
            .filter(|r| r.algorithm == first.algorithm && r.snapshots == first.snapshots)
            .map(|r| r.nmse_c)
            .collect();
        let mean = vals.iter().sum::<f64>() / 3.0;
        assert!((first.nmse_c_mean - mean).abs() < 1e-15);
        assert!(sum.iter().filter(|r| !r.algorithm.estimates_channel()).all(|r| r.nmse_h_mean.is_nan()));
    }
}
