//! Estimation quality metrics.

use serde::{Deserialize, Serialize};

use crate::linalg::hermitian_eigen;
use crate::{CMatrix, CVector, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub nmse_h: f64,
    pub nmse_c: f64,
    pub eta: f64,
    pub subspace_rank: usize,
}

impl MetricReport {
    pub fn nmse_h_db(&self) -> f64 {
        to_db(self.nmse_h)
    }

    pub fn nmse_c_db(&self) -> f64 {
        to_db(self.nmse_c)
    }
}

pub fn to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

/// Mean over snapshots of `‖h_t - ĥ_t‖² / ‖h_t‖²` (vectorized channels).
pub fn nmse_h(truth: &[CVector], estimate: &[CVector]) -> Result<f64> {
    if truth.len() != estimate.len() || truth.is_empty() {
        return Err(Error::invalid(format!(
            "nmse_h needs equal non-empty lists, got {} and {}",
            truth.len(),
            estimate.len()
        )));
    }
    let mut total = 0.0;
    for (h, e) in truth.iter().zip(estimate) {
        if h.len() != e.len() {
            return Err(Error::invalid("channel dimension mismatch"));
        }
        let denom = h.norm_squared();
        if denom == 0.0 {
            return Err(Error::Undefined("nmse_h with an all-zero true channel".into()));
        }
        total += (h - e).norm_squared() / denom;
    }
    Ok(total / truth.len() as f64)
}

/// `‖R̂ - R‖_F² / ‖R‖_F²`.
pub fn nmse_c(r_true: &CMatrix, r_hat: &CMatrix) -> Result<f64> {
    if r_true.shape() != r_hat.shape() {
        return Err(Error::invalid("covariance shape mismatch"));
    }
    let denom = r_true.norm_squared();
    if denom == 0.0 {
        return Err(Error::Undefined("nmse_c with a zero reference covariance".into()));
    }
    Ok((r_hat - r_true).norm_squared() / denom)
}

/// Relative efficiency `tr(Û^H R Û) / tr(U^H R U)` with `Û`, `U` the
/// dominant `r`-dimensional eigenspaces of `R̂` and `R`.
pub fn relative_efficiency(r_true: &CMatrix, r_hat: &CMatrix, rank: usize) -> Result<f64> {
    let n = r_true.nrows();
    if r_true.shape() != (n, n) || r_hat.shape() != (n, n) {
        return Err(Error::invalid("covariances must be square and equally sized"));
    }
    if rank == 0 || rank > n {
        return Err(Error::invalid(format!("subspace rank {rank} outside 1..={n}")));
    }
    let (vals, _) = hermitian_eigen(r_true);
    let best: f64 = vals.iter().take(rank).sum();
    if best.is_nan() || best <= 0.0 {
        return Err(Error::Undefined("relative efficiency with a zero reference covariance".into()));
    }
    let (_, u_hat) = hermitian_eigen(r_hat);
    let basis = u_hat.columns(0, rank);
    let captured = (basis.adjoint() * r_true * basis).trace().re;
    Ok(captured / best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::C64;
    use rand::{Rng, SeedableRng};

    fn random_psd(rng: &mut impl Rng, n: usize, rank: usize) -> CMatrix {
        let x = CMatrix::from_fn(n, rank, |_, _| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
        &x * x.adjoint()
    }

    fn random_unitary(rng: &mut impl Rng, n: usize) -> CMatrix {
        let x = CMatrix::from_fn(n, n, |_, _| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
        x.qr().q()
    }

    #[test]
    fn nmse_h_reference_values() {
        let h = vec![CVector::from_vec(vec![C64::new(1.0, 2.0), C64::new(-0.5, 0.0)])];
        assert_eq!(nmse_h(&h, &h).unwrap(), 0.0);
        let zero = vec![CVector::zeros(2)];
        assert!((nmse_h(&h, &zero).unwrap() - 1.0).abs() < 1e-15);
        let doubled = vec![&h[0] * C64::from(2.0)];
        assert!((nmse_h(&h, &doubled).unwrap() - 1.0).abs() < 1e-15);
        assert!(nmse_h(&h, &[]).is_err());
    }

    #[test]
    fn nmse_c_reference_values() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let r = random_psd(&mut rng, 5, 3);
        assert_eq!(nmse_c(&r, &r).unwrap(), 0.0);
        assert!((nmse_c(&r, &CMatrix::zeros(5, 5)).unwrap() - 1.0).abs() < 1e-14);
        let e = random_psd(&mut rng, 5, 2);
        let e = &e * C64::from(0.1 * r.norm() / e.norm());
        assert!((nmse_c(&r, &(&r + e)).unwrap() - 0.01).abs() < 1e-12);
        for c in [0.0, 0.5, 2.0, -1.0] {
            let v = nmse_c(&r, &(&r * C64::from(c))).unwrap();
            assert!((v - (1.0 - c) * (1.0 - c)).abs() < 1e-12);
        }
        assert!(matches!(
            nmse_c(&CMatrix::zeros(2, 2), &CMatrix::zeros(2, 2)),
            Err(Error::Undefined(_))
        ));
    }

    #[test]
    fn eta_of_exact_and_scaled_estimates_is_one() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        for rank in 1..=4 {
            let r = random_psd(&mut rng, 6, 4);
            assert!((relative_efficiency(&r, &r, rank).unwrap() - 1.0).abs() < 1e-10);
            let scaled = &r * C64::from(3.7);
            assert!((relative_efficiency(&r, &scaled, rank).unwrap() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn eta_diagonal_mismatch() {
        let d = |v: [f64; 4]| CMatrix::from_diagonal(&CVector::from_iterator(4, v.iter().map(|&x| C64::from(x))));
        let r = d([4.0, 3.0, 2.0, 1.0]);
        let r_hat = d([0.0, 0.0, 5.0, 6.0]);
        let eta = relative_efficiency(&r, &r_hat, 2).unwrap();
        assert!((eta - 3.0 / 7.0).abs() < 1e-12);
    }

    #[test]
    fn eta_unitary_invariance() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let r = random_psd(&mut rng, 6, 3);
        let r_hat = random_psd(&mut rng, 6, 2);
        let q = random_unitary(&mut rng, 6);
        let a = relative_efficiency(&r, &r_hat, 2).unwrap();
        let b = relative_efficiency(&(&q * &r * q.adjoint()), &(&q * &r_hat * q.adjoint()), 2).unwrap();
        assert!((a - b).abs() < 1e-10);
        assert!((0.0..=1.0 + 1e-9).contains(&a));
    }

    #[test]
    fn eta_errors() {
        let r = CMatrix::identity(3, 3);
        assert!(relative_efficiency(&r, &r, 0).is_err());
        assert!(relative_efficiency(&r, &r, 4).is_err());
        assert!(matches!(
            relative_efficiency(&CMatrix::zeros(3, 3), &r, 1),
            Err(Error::Undefined(_))
        ));
    }
}
