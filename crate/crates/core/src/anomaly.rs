//! Bhattacharyya coefficient and Hellinger distance between Gaussians.
//!
//! For two Gaussians the overlap integral `∫ √(p q) dx` has the closed form
//! `exp(-D_B)` with
//!
//! ```text
//! D_B = ⅛ (μ₁-μ₂)ᵀ Σ̄⁻¹ (μ₁-μ₂) + ½ ln( det Σ̄ / √(det Σ₁ det Σ₂) ),  Σ̄ = (Σ₁+Σ₂)/2
//! ```
//!
//! and the Hellinger distance is `√(1-λ)`, which lies in `[0, 1]`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg;

const COEFF_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianDensity {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
}

impl GaussianDensity {
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        if cov.nrows() != mean.len() || cov.ncols() != mean.len() {
            return Err(Error::DimensionMismatch {
                expected: mean.len(),
                found: cov.nrows(),
            });
        }
        if mean.iter().any(|v| !v.is_finite()) || linalg::cholesky(&cov).is_none() {
            return Err(Error::NotPositiveDefinite);
        }
        Ok(Self { mean, cov })
    }

    pub fn univariate(mean: f64, var: f64) -> Result<Self> {
        Self::new(DVector::from_element(1, mean), DMatrix::from_element(1, 1, var))
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

/// Bhattacharyya distance `D_B` (non-negative; `λ = exp(-D_B)`).
pub fn bhattacharyya_distance(p: &GaussianDensity, q: &GaussianDensity) -> Result<f64> {
    if p.dim() != q.dim() {
        return Err(Error::DimensionMismatch {
            expected: p.dim(),
            found: q.dim(),
        });
    }
    let cp = linalg::cholesky(&p.cov).ok_or(Error::NotPositiveDefinite)?;
    let cq = linalg::cholesky(&q.cov).ok_or(Error::NotPositiveDefinite)?;
    let avg = (&p.cov + &q.cov) * 0.5;
    let ca = linalg::cholesky(&avg).ok_or(Error::NotPositiveDefinite)?;
    let diff = &p.mean - &q.mean;
    let maha = linalg::quad_form(&ca, &diff);
    let log_ratio = linalg::log_det(&ca) - 0.5 * (linalg::log_det(&cp) + linalg::log_det(&cq));
    // log_ratio >= 0 analytically; clip rounding noise
    Ok((0.125 * maha + 0.5 * log_ratio).max(0.0))
}

/// Bhattacharyya coefficient `λ ∈ (0, 1]`.
pub fn bhattacharyya_gaussian(p: &GaussianDensity, q: &GaussianDensity) -> Result<f64> {
    Ok((-bhattacharyya_distance(p, q)?).exp())
}

/// Hellinger distance `θ = √(1-λ)`.
///
/// Coefficients within `1e-12` outside `[0, 1]` are clamped; anything further
/// out is an error.
pub fn hellinger(lambda: f64) -> Result<f64> {
    if !(-COEFF_SLACK..=1.0 + COEFF_SLACK).contains(&lambda) {
        return Err(Error::CoefficientOutOfRange(lambda));
    }
    Ok((1.0 - lambda.clamp(0.0, 1.0)).sqrt())
}

/// Hellinger distance between two Gaussians.
pub fn hellinger_gaussian(p: &GaussianDensity, q: &GaussianDensity) -> Result<f64> {
    hellinger(bhattacharyya_gaussian(p, q)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Quadrature oracle: composite Simpson on `∫ √(p q)` over a box wide
    /// enough for both densities.
    fn overlap_1d(m1: f64, v1: f64, m2: f64, v2: f64) -> f64 {
        let pdf = |x: f64, m: f64, v: f64| {
            (-(x - m) * (x - m) / (2.0 * v)).exp() / (2.0 * std::f64::consts::PI * v).sqrt()
        };
        let s = v1.sqrt().max(v2.sqrt());
        let (a, b) = (m1.min(m2) - 14.0 * s, m1.max(m2) + 14.0 * s);
        let n = 20_000;
        let h = (b - a) / n as f64;
        let f = |x: f64| (pdf(x, m1, v1) * pdf(x, m2, v2)).sqrt();
        let mut acc = f(a) + f(b);
        for i in 1..n {
            acc += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        acc * h / 3.0
    }

    fn g1(m: f64, v: f64) -> GaussianDensity {
        GaussianDensity::univariate(m, v).unwrap()
    }

    #[test]
    fn identical_gaussians_overlap_fully() {
        let p = GaussianDensity::new(
            DVector::from_vec(vec![1.0, -2.0]),
            DMatrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 0.5]),
        )
        .unwrap();
        assert!((bhattacharyya_gaussian(&p, &p).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(hellinger_gaussian(&p, &p).unwrap(), 0.0);
    }

    #[test]
    fn unit_shift_matches_quadrature() {
        let oracle = overlap_1d(0.0, 1.0, 1.0, 1.0);
        assert!((oracle - 0.882_497).abs() < 1e-6);
        let lam = bhattacharyya_gaussian(&g1(0.0, 1.0), &g1(1.0, 1.0)).unwrap();
        assert!((lam - oracle).abs() < 1e-6);
        let theta = hellinger(lam).unwrap();
        assert!((theta - (1.0 - oracle).sqrt()).abs() < 1e-6);
        assert!((theta - 0.342_787).abs() < 1e-6);
    }

    #[test]
    fn far_apart_overlap_vanishes() {
        assert!(bhattacharyya_gaussian(&g1(0.0, 1.0), &g1(100.0, 1.0)).unwrap() < 1e-10);
    }

    #[test]
    fn hellinger_endpoints_and_range() {
        assert_eq!(hellinger(1.0).unwrap(), 0.0);
        assert_eq!(hellinger(0.0).unwrap(), 1.0);
        assert_eq!(hellinger(1.0 + 5e-13).unwrap(), 0.0);
        assert_eq!(hellinger(-5e-13).unwrap(), 1.0);
        assert!(matches!(hellinger(1.1), Err(Error::CoefficientOutOfRange(_))));
        assert!(matches!(hellinger(-0.5), Err(Error::CoefficientOutOfRange(_))));
    }

    #[test]
    fn errors() {
        let p2 = GaussianDensity::new(DVector::zeros(2), DMatrix::identity(2, 2)).unwrap();
        assert!(matches!(
            bhattacharyya_gaussian(&g1(0.0, 1.0), &p2),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(matches!(
            GaussianDensity::univariate(0.0, -1.0),
            Err(Error::NotPositiveDefinite)
        ));
        let bad = GaussianDensity {
            mean: DVector::zeros(1),
            cov: DMatrix::from_element(1, 1, 0.0),
        };
        assert!(matches!(
            bhattacharyya_gaussian(&bad, &g1(0.0, 1.0)),
            Err(Error::NotPositiveDefinite)
        ));
    }

    #[test]
    fn seeded_1d_pairs_match_quadrature() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10 {
            let (m1, m2) = (rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0));
            let (v1, v2) = (rng.random_range(0.2..3.0), rng.random_range(0.2..3.0));
            let lam = bhattacharyya_gaussian(&g1(m1, v1), &g1(m2, v2)).unwrap();
            assert!((lam - overlap_1d(m1, v1, m2, v2)).abs() < 1e-6);
        }
    }

    proptest! {
        #[test]
        fn symmetric_and_bounded(m1 in -5.0f64..5.0, m2 in -5.0f64..5.0, v1 in 0.01f64..10.0, v2 in 0.01f64..10.0) {
            let (p, q) = (g1(m1, v1), g1(m2, v2));
            let a = bhattacharyya_gaussian(&p, &q).unwrap();
            let b = bhattacharyya_gaussian(&q, &p).unwrap();
            prop_assert!((a - b).abs() < 1e-12);
            let t = hellinger(a).unwrap();
            prop_assert!((0.0..=1.0).contains(&t));
        }

        #[test]
        fn theta_grows_with_mean_separation(d1 in 0.0f64..10.0, extra in 0.01f64..10.0, v in 0.1f64..4.0) {
            let base = g1(0.0, v);
            let near = hellinger_gaussian(&base, &g1(d1, v)).unwrap();
            let far = hellinger_gaussian(&base, &g1(d1 + extra, v)).unwrap();
            prop_assert!(far >= near);
        }
    }
}
