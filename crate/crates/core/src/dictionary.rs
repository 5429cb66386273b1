//! Angle grids, the virtual channel dictionary and perturbation bounds.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::channel_model::{array_response, vec_outer, LinkGeometry};
use crate::{CMatrix, CVector, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum GridScheme {
    /// `θ_i = (i-1)π/G`.
    UniformTheta,
    /// `cos θ_i = 1 - 2(i-1)/G`.
    #[default]
    UniformCosTheta,
}

impl GridScheme {
    pub fn angles(self, points: usize) -> Result<Vec<f64>> {
        if points < 2 {
            return Err(Error::invalid(format!("grid needs at least 2 points, got {points}")));
        }
        let g = points as f64;
        let mut angles: Vec<f64> = (0..points)
            .map(|i| match self {
                GridScheme::UniformTheta => i as f64 * PI / g,
                GridScheme::UniformCosTheta => (1.0 - 2.0 * i as f64 / g).acos(),
            })
            .collect();
        angles.sort_by(|a, b| a.total_cmp(b));
        Ok(angles)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    /// AoD grid, `G_BS` angles ascending.
    pub aod_angles: Vec<f64>,
    /// AoA grid, `G_UE` angles ascending.
    pub aoa_angles: Vec<f64>,
    pub scheme: GridScheme,
}

pub fn build_grid(scheme: GridScheme, g_bs: usize, g_ue: usize) -> Result<Grid> {
    Ok(Grid {
        aod_angles: scheme.angles(g_bs)?,
        aoa_angles: scheme.angles(g_ue)?,
        scheme,
    })
}

impl Grid {
    pub fn g_bs(&self) -> usize {
        self.aod_angles.len()
    }

    pub fn g_ue(&self) -> usize {
        self.aoa_angles.len()
    }

    pub fn num_cells(&self) -> usize {
        self.g_bs() * self.g_ue()
    }

    /// Flat column index in `Ψ = conj(A_BS) ⊗ A_UE` ordering.
    pub fn column_index(&self, aoa_index: usize, aod_index: usize) -> usize {
        aod_index * self.g_ue() + aoa_index
    }

    /// Inverse of [`Grid::column_index`]: `(aoa_index, aod_index)`.
    pub fn cell(&self, column: usize) -> (usize, usize) {
        (column % self.g_ue(), column / self.g_ue())
    }
}

/// Offsets relative to a grid angle; `lower <= 0 <= upper`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerturbationBounds {
    pub lower: f64,
    pub upper: f64,
}

impl PerturbationBounds {
    pub fn clamp(&self, delta: f64) -> f64 {
        delta.clamp(self.lower, self.upper)
    }

    pub fn contains(&self, delta: f64) -> bool {
        delta >= self.lower && delta <= self.upper
    }
}

/// Half the distance to each neighbour. The first cell stops at angle 0 and
/// the last one extends halfway to π, which is where the next grid point of
/// either scheme would fall.
fn cell_bounds(angles: &[f64], index: usize) -> PerturbationBounds {
    let theta = angles[index];
    let lower = if index == 0 {
        -theta
    } else {
        -(theta - angles[index - 1]) / 2.0
    };
    let upper = match angles.get(index + 1) {
        Some(next) => (next - theta) / 2.0,
        None => (PI - theta) / 2.0,
    };
    PerturbationBounds { lower, upper }
}

/// Bounds for the `(AoA, AoD)` perturbations of one grid cell.
pub fn perturbation_bounds(
    grid: &Grid,
    aoa_index: usize,
    aod_index: usize,
) -> Result<(PerturbationBounds, PerturbationBounds)> {
    if aoa_index >= grid.g_ue() || aod_index >= grid.g_bs() {
        return Err(Error::invalid(format!(
            "cell ({aoa_index}, {aod_index}) outside {}x{} grid",
            grid.g_ue(),
            grid.g_bs()
        )));
    }
    Ok((
        cell_bounds(&grid.aoa_angles, aoa_index),
        cell_bounds(&grid.aod_angles, aod_index),
    ))
}

#[derive(Debug, Clone)]
pub struct Dictionary {
    pub grid: Grid,
    pub geometry: LinkGeometry,
    /// `MN × G_BS·G_UE`; column `(i_rx, i_tx)` is `vec(a_UE a_BS^H)`.
    pub psi: CMatrix,
}

pub fn build_dictionary(grid: Grid, geometry: &LinkGeometry) -> Result<Dictionary> {
    geometry.bs.validate()?;
    geometry.ue.validate()?;
    let a_ue = grid
        .aoa_angles
        .iter()
        .map(|&t| array_response(t, &geometry.ue))
        .collect::<Result<Vec<_>>>()?;
    let a_bs = grid
        .aod_angles
        .iter()
        .map(|&t| array_response(t, &geometry.bs))
        .collect::<Result<Vec<_>>>()?;
    let dim = geometry.channel_dim();
    let mut psi = CMatrix::zeros(dim, grid.num_cells());
    for (j, bs) in a_bs.iter().enumerate() {
        for (i, ue) in a_ue.iter().enumerate() {
            psi.set_column(grid.column_index(i, j), &vec_outer(ue, bs));
        }
    }
    Ok(Dictionary {
        grid,
        geometry: *geometry,
        psi,
    })
}

impl Dictionary {
    pub fn atom(&self, aoa_index: usize, aod_index: usize) -> CVector {
        self.psi.column(self.grid.column_index(aoa_index, aod_index)).into_owned()
    }

    /// Largest `|<ψ_i, ψ_j>|` over distinct unit-norm columns.
    pub fn mutual_coherence(&self) -> f64 {
        let gram = self.psi.adjoint() * &self.psi;
        let n = gram.nrows();
        let mut mu = 0.0f64;
        for j in 0..n {
            for i in 0..j {
                mu = mu.max(gram[(i, j)].norm());
            }
        }
        mu
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::C64;

    #[test]
    fn uniform_theta_four_points() {
        let a = GridScheme::UniformTheta.angles(4).unwrap();
        let expected = [0.0, PI / 4.0, PI / 2.0, 3.0 * PI / 4.0];
        for (x, y) in a.iter().zip(expected) {
            assert!((x - y).abs() < 1e-15);
        }
    }

    #[test]
    fn uniform_cos_four_points() {
        let a = GridScheme::UniformCosTheta.angles(4).unwrap();
        let expected = [0.0, PI / 3.0, PI / 2.0, 2.0 * PI / 3.0];
        for (x, y) in a.iter().zip(expected) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn uniform_cos_sixteen_has_even_cosine_steps() {
        let a = GridScheme::UniformCosTheta.angles(16).unwrap();
        for w in a.windows(2) {
            assert!(w[0] < w[1]);
            let step = w[0].cos() - w[1].cos();
            assert!((step - 0.125).abs() < 1e-12);
        }
    }

    #[test]
    fn too_small_grid_rejected() {
        assert!(matches!(
            build_grid(GridScheme::UniformTheta, 1, 4),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn small_dictionary_matches_enumeration() {
        let geom = LinkGeometry::half_wavelength(2, 2);
        let grid = build_grid(GridScheme::UniformTheta, 2, 2).unwrap();
        let dict = build_dictionary(grid.clone(), &geom).unwrap();
        assert_eq!(dict.psi.shape(), (4, 4));
        for i_tx in 0..2 {
            for i_rx in 0..2 {
                let u = array_response(grid.aoa_angles[i_rx], &geom.ue).unwrap();
                let b = array_response(grid.aod_angles[i_tx], &geom.bs).unwrap();
                let outer = &u * b.adjoint();
                let col = dict.atom(i_rx, i_tx);
                for (x, y) in col.iter().zip(outer.as_slice()) {
                    assert!((x - y).norm() < 1e-14);
                }
                assert!((col.norm() - 1.0).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn on_grid_channel_peaks_at_its_column() {
        let geom = LinkGeometry::half_wavelength(4, 4);
        for scheme in [GridScheme::UniformTheta, GridScheme::UniformCosTheta] {
            let grid = build_grid(scheme, 4, 4).unwrap();
            let dict = build_dictionary(grid, &geom).unwrap();
            for col in 0..16 {
                let h = dict.psi.column(col).into_owned();
                let corr = dict.psi.adjoint() * h;
                let best = (0..16)
                    .max_by(|&a, &b| corr[a].norm().total_cmp(&corr[b].norm()).then(b.cmp(&a)))
                    .unwrap();
                assert_eq!(best, col, "{scheme:?}");
            }
        }
    }

    #[test]
    fn uniform_theta_bounds_are_symmetric() {
        let grid = build_grid(GridScheme::UniformTheta, 16, 16).unwrap();
        for i in 1..16 {
            let (rx, tx) = perturbation_bounds(&grid, i, i).unwrap();
            for b in [rx, tx] {
                assert!((b.lower + PI / 32.0).abs() < 1e-12);
                assert!((b.upper - PI / 32.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn uniform_cos_bounds_use_neighbours() {
        let grid = build_grid(GridScheme::UniformCosTheta, 4, 4).unwrap();
        let (rx, _) = perturbation_bounds(&grid, 1, 0).unwrap();
        assert!((rx.lower + (PI / 3.0) / 2.0).abs() < 1e-12);
        assert!((rx.upper - (PI / 2.0 - PI / 3.0) / 2.0).abs() < 1e-12);
        let (first, _) = perturbation_bounds(&grid, 0, 0).unwrap();
        assert_eq!(first.lower, 0.0);
        assert!(perturbation_bounds(&grid, 4, 0).is_err());
        assert!(perturbation_bounds(&grid, 0, 4).is_err());
    }

    #[test]
    fn cells_tile_the_domain() {
        for scheme in [GridScheme::UniformTheta, GridScheme::UniformCosTheta] {
            let grid = build_grid(scheme, 16, 12).unwrap();
            for i in 0..11 {
                let (a, _) = perturbation_bounds(&grid, i, 0).unwrap();
                let (b, _) = perturbation_bounds(&grid, i + 1, 0).unwrap();
                let lhs = grid.aoa_angles[i] + a.upper;
                let rhs = grid.aoa_angles[i + 1] + b.lower;
                assert!((lhs - rhs).abs() < 1e-12);
            }
            let (last, _) = perturbation_bounds(&grid, 11, 0).unwrap();
            assert!(grid.aoa_angles[11] + last.upper < PI);
        }
    }

    #[test]
    fn kronecker_identity_on_sparse_virtual_channels() {
        use rand::{Rng, SeedableRng};
        let geom = LinkGeometry::half_wavelength(4, 4);
        let grid = build_grid(GridScheme::UniformCosTheta, 4, 4).unwrap();
        let dict = build_dictionary(grid.clone(), &geom).unwrap();
        let a_ue = CMatrix::from_columns(
            &grid
                .aoa_angles
                .iter()
                .map(|&t| array_response(t, &geom.ue).unwrap())
                .collect::<Vec<_>>(),
        );
        let a_bs = CMatrix::from_columns(
            &grid
                .aod_angles
                .iter()
                .map(|&t| array_response(t, &geom.bs).unwrap())
                .collect::<Vec<_>>(),
        );
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        for _ in 0..50 {
            let mut hv = CMatrix::zeros(4, 4);
            for _ in 0..3 {
                let (i, j) = (rng.random_range(0..4), rng.random_range(0..4));
                hv[(i, j)] = C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5);
            }
            let lhs = &dict.psi * CVector::from_column_slice(hv.as_slice());
            let rhs = &a_ue * &hv * a_bs.adjoint();
            let diff = (lhs - CVector::from_column_slice(rhs.as_slice())).norm();
            assert!(diff < 1e-12);
        }
    }

    #[test]
    fn cosine_grid_lowers_coherence() {
        let geom = LinkGeometry::half_wavelength(16, 16);
        let uni = build_dictionary(build_grid(GridScheme::UniformTheta, 16, 16).unwrap(), &geom).unwrap();
        let cos = build_dictionary(build_grid(GridScheme::UniformCosTheta, 16, 16).unwrap(), &geom).unwrap();
        assert!(cos.mutual_coherence() <= uni.mutual_coherence());
    }
}
