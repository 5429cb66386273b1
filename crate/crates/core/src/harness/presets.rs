//! Bundled experiment scenarios, one set per result figure.

use super::scenario::{Algorithm, GridSection, RfChains, Scenario, TrainingSection};
use crate::dictionary::GridScheme;
use crate::{Error, Result};

pub const PRESET_FIGURES: [u8; 8] = [2, 3, 4, 5, 6, 7, 8, 9];

const SNAPSHOTS: [usize; 7] = [1, 5, 10, 20, 30, 40, 50];

fn rf(totals: &[usize]) -> Vec<RfChains> {
    totals
        .iter()
        .map(|&t| RfChains::for_measurements(t).expect("preset measurement counts have a split"))
        .collect()
}

fn base(id: &str, algorithms: &[Algorithm]) -> Scenario {
    Scenario {
        id: id.into(),
        training: TrainingSection {
            rf_chains: rf(&[30]),
            snapshots: SNAPSHOTS.to_vec(),
            snr_db: vec![10.0],
            ..Default::default()
        },
        algorithms: algorithms.to_vec(),
        ..Default::default()
    }
}

/// Scenarios reproducing figure `figure` (2 to 9). Parameters that are not
/// sweep axes (grid scheme, grid size, array size) produce one scenario per
/// value.
pub fn preset(figure: u8) -> Result<Vec<Scenario>> {
    use Algorithm::*;
    let covariance = [Dcomp, Ppcomp];
    let scenarios = match figure {
        2 => {
            let mut s = base("fig2", &[Dsomp, Ppsomp]);
            s.training.rf_chains = rf(&[20, 30, 40, 50]);
            vec![s]
        }
        3 => vec![base("fig3", &Algorithm::ALL)],
        4 => vec![base("fig4", &Algorithm::ALL)],
        5 => [
            ("fig5_cos", GridScheme::UniformCosTheta),
            ("fig5_theta", GridScheme::UniformTheta),
        ]
        .into_iter()
        .map(|(id, scheme)| {
            let mut s = base(id, &[Ppsomp, Ppcomp]);
            s.grid.scheme = scheme;
            s
        })
        .collect(),
        6 => {
            let mut out = vec![base("fig6_ppcomp_g16", &[Ppcomp])];
            for g in [16, 32, 64] {
                let mut s = base(&format!("fig6_dcomp_g{g}"), &[Dcomp]);
                s.grid = GridSection {
                    g_bs: g,
                    g_ue: g,
                    ..Default::default()
                };
                out.push(s);
            }
            out
        }
        7 => {
            let mut s = base("fig7", &covariance);
            s.training.snapshots = vec![1, 10, 40];
            s.training.snr_db = (-2..=5).map(|i| 5.0 * i as f64).collect();
            vec![s]
        }
        8 => {
            let mut s = base("fig8", &covariance);
            s.training.rf_chains = rf(&[20, 30, 40]);
            vec![s]
        }
        9 => [(12, 6), (16, 8), (24, 12)]
            .into_iter()
            .map(|(m, n)| {
                let mut s = base(&format!("fig9_m{m}_n{n}"), &covariance);
                s.channel.bs_antennas = m;
                s.channel.ue_antennas = n;
                s
            })
            .collect(),
        _ => {
            return Err(Error::config(
                "figure",
                format!("no preset for figure {figure}; expected one of {PRESET_FIGURES:?}"),
            ))
        }
    };
    Ok(scenarios)
}
