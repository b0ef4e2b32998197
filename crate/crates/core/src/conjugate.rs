//! Exact conditionals for the linear coefficients and the residual variance.
//!
//! Given frequencies and variance the coefficient posterior is Gaussian with
//! precision `X'X / sigma2 + I / sigma2_beta`; given coefficients the variance
//! posterior is Inverse-Gamma. Both drive every proposal in the sampler.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

use crate::error::{Error, Result};
use crate::model::{fill_basis, min_segment_len};
use crate::priors::log_inverse_gamma;

/// Design matrix with one basis row per time index `t_start..t_start + len`.
pub fn design_matrix(t_start: usize, len: usize, omega: &[f64]) -> Result<DMatrix<f64>> {
    let p = 2 * omega.len() + 2;
    if len < min_segment_len(omega.len()) {
        return Err(Error::SegmentTooShort {
            len,
            m: omega.len(),
            needed: p,
        });
    }
    let mut x = DMatrix::zeros(len, p);
    let mut row = Vec::with_capacity(p);
    for i in 0..len {
        fill_basis(t_start + i, omega, &mut row);
        for (j, v) in row.iter().enumerate() {
            x[(i, j)] = *v;
        }
    }
    Ok(x)
}

/// Cross products `X'X` and `X'y` of a segment for fixed frequencies.
#[derive(Debug, Clone)]
pub struct CrossProducts {
    pub xtx: DMatrix<f64>,
    pub xty: DVector<f64>,
}

impl CrossProducts {
    pub fn from_matrix(y: &[f64], x: &DMatrix<f64>) -> Self {
        let yv = DVector::from_column_slice(y);
        Self {
            xtx: x.transpose() * x,
            xty: x.transpose() * yv,
        }
    }

    /// Accumulates the cross products row by row without forming `X`.
    pub fn for_segment(y: &[f64], t_start: usize, omega: &[f64]) -> Result<Self> {
        let p = 2 * omega.len() + 2;
        if y.len() < p {
            return Err(Error::SegmentTooShort {
                len: y.len(),
                m: omega.len(),
                needed: p,
            });
        }
        let mut xtx = vec![0.0; p * p];
        let mut xty = vec![0.0; p];
        let mut row = Vec::with_capacity(p);
        for (i, &v) in y.iter().enumerate() {
            fill_basis(t_start + i, omega, &mut row);
            for a in 0..p {
                let ra = row[a];
                xty[a] += ra * v;
                let col = &mut xtx[a * p..a * p + p];
                for b in a..p {
                    col[b] += ra * row[b];
                }
            }
        }
        // Column-major buffer: entry (b, a) for b >= a holds the lower triangle.
        let mut m = DMatrix::from_column_slice(p, p, &xtx);
        for a in 0..p {
            for b in a + 1..p {
                m[(a, b)] = m[(b, a)];
            }
        }
        Ok(Self {
            xtx: m,
            xty: DVector::from_vec(xty),
        })
    }
}

/// A Gaussian stored by its mean and the Cholesky factor of its precision.
#[derive(Debug, Clone)]
pub struct GaussianConditional {
    mean: DVector<f64>,
    /// Lower-triangular `L` with `precision = L L'`.
    chol_l: DMatrix<f64>,
}

impl GaussianConditional {
    fn from_precision(precision: DMatrix<f64>, rhs: DVector<f64>) -> Result<Self> {
        if precision.iter().chain(rhs.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("coefficient precision"));
        }
        let chol = precision
            .cholesky()
            .ok_or(Error::NonFinite("coefficient precision (not positive definite)"))?;
        let mean = chol.solve(&rhs);
        Ok(Self {
            mean,
            chol_l: chol.unpack(),
        })
    }

    /// `N(0, sigma2_beta I)`: the conditional when the likelihood is constant.
    pub fn isotropic(dim: usize, sigma2_beta: f64) -> Self {
        Self {
            mean: DVector::zeros(dim),
            chol_l: DMatrix::from_diagonal_element(dim, dim, sigma2_beta.recip().sqrt()),
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn precision(&self) -> DMatrix<f64> {
        &self.chol_l * self.chol_l.transpose()
    }

    pub fn covariance(&self) -> DMatrix<f64> {
        let p = self.dim();
        let linv = self
            .chol_l
            .solve_lower_triangular(&DMatrix::identity(p, p))
            .expect("Cholesky factor has a positive diagonal");
        linv.transpose() * linv
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let z = DVector::from_fn(self.dim(), |_, _| rng.sample::<f64, _>(StandardNormal));
        let offset = self
            .chol_l
            .tr_solve_lower_triangular(&z)
            .expect("Cholesky factor has a positive diagonal");
        (&self.mean + offset).iter().copied().collect()
    }

    pub fn log_density(&self, x: &[f64]) -> f64 {
        let p = self.dim();
        debug_assert_eq!(x.len(), p);
        let diff = DVector::from_column_slice(x) - &self.mean;
        let w = self.chol_l.tr_mul(&diff);
        let log_det: f64 = self.chol_l.diagonal().iter().map(|d| d.ln()).sum();
        -0.5 * p as f64 * (2.0 * PI).ln() + log_det - 0.5 * w.norm_squared()
    }
}

/// Conditional posterior of the coefficients given design matrix `x`.
pub fn beta_conditional(
    y: &[f64],
    x: &DMatrix<f64>,
    sigma2: f64,
    sigma2_beta: f64,
) -> Result<GaussianConditional> {
    beta_conditional_from(&CrossProducts::from_matrix(y, x), sigma2, sigma2_beta)
}

/// Same as [`beta_conditional`] from precomputed cross products.
pub fn beta_conditional_from(
    cp: &CrossProducts,
    sigma2: f64,
    sigma2_beta: f64,
) -> Result<GaussianConditional> {
    if !(sigma2 > 0.0 && sigma2.is_finite()) {
        return Err(Error::NonPositiveVariance(sigma2));
    }
    let p = cp.xty.len();
    let mut precision = &cp.xtx / sigma2;
    for i in 0..p {
        precision[(i, i)] += 1.0 / sigma2_beta;
    }
    GaussianConditional::from_precision(precision, &cp.xty / sigma2)
}

/// Inverse-Gamma distribution by shape and scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InverseGamma {
    pub shape: f64,
    pub scale: f64,
}

impl InverseGamma {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let g = Gamma::new(self.shape, 1.0)
            .expect("positive shape")
            .sample(rng);
        self.scale / g
    }

    pub fn log_density(&self, x: f64) -> f64 {
        log_inverse_gamma(x, self.shape, self.scale)
    }
}

/// Variance conditional for a segment of `n` observations with residual sum
/// of squares `rss`.
pub fn sigma2_conditional_from_rss(n: usize, rss: f64, nu0: f64, gamma0: f64) -> InverseGamma {
    InverseGamma {
        shape: (n as f64 + nu0) / 2.0,
        scale: (gamma0 + rss) / 2.0,
    }
}

/// Variance conditional given the design matrix and coefficients.
pub fn sigma2_conditional_params(
    y: &[f64],
    x: &DMatrix<f64>,
    beta: &[f64],
    nu0: f64,
    gamma0: f64,
) -> InverseGamma {
    let fitted = x * DVector::from_column_slice(beta);
    let rss: f64 = y
        .iter()
        .zip(fitted.iter())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    sigma2_conditional_from_rss(y.len(), rss, nu0, gamma0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::basis_vector;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_problem(rng: &mut ChaCha8Rng, n: usize, p: usize) -> (Vec<f64>, DMatrix<f64>) {
        let x = DMatrix::from_fn(n, p, |_, _| rng.random::<f64>() * 2.0 - 1.0);
        let y = (0..n).map(|_| rng.random::<f64>() * 3.0).collect();
        (y, x)
    }

    #[test]
    fn design_matrix_rows_are_basis_vectors() {
        let x = design_matrix(1, 4, &[0.25]).unwrap();
        for i in 0..4 {
            let want = basis_vector(i + 1, &[0.25]);
            for j in 0..4 {
                assert_eq!(x[(i, j)], want[j]);
            }
        }
        let x0 = design_matrix(10, 3, &[]).unwrap();
        assert_eq!(x0.ncols(), 2);
        assert_eq!(x0[(2, 1)], 12.0);
        assert!(design_matrix(1, 3, &[0.1]).is_err());
    }

    #[test]
    fn accumulated_cross_products_match_matrix_route() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let y: Vec<f64> = (0..40).map(|_| rng.random::<f64>()).collect();
        let omega = [0.05, 0.21, 0.33];
        let x = design_matrix(17, 40, &omega).unwrap();
        let a = CrossProducts::from_matrix(&y, &x);
        let b = CrossProducts::for_segment(&y, 17, &omega).unwrap();
        assert!((a.xtx - b.xtx).abs().max() < 1e-8);
        assert!((a.xty - b.xty).abs().max() < 1e-9);
    }

    #[test]
    fn flat_prior_identity_design() {
        let x = DMatrix::identity(3, 3);
        let y = [1.0, -2.0, 0.5];
        let g = beta_conditional(&y, &x, 1.0, 1e14).unwrap();
        for i in 0..3 {
            assert!((g.mean()[i] - y[i]).abs() < 1e-10);
        }
        assert!((g.covariance() - DMatrix::identity(3, 3)).abs().max() < 1e-10);
        let zero = beta_conditional(&[0.0; 3], &x, 2.0, 10.0).unwrap();
        assert!(zero.mean().norm() == 0.0);
    }

    #[test]
    fn log_density_matches_explicit_formula() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let (y, x) = random_problem(&mut rng, 20, 4);
        let g = beta_conditional(&y, &x, 0.7, 5.0).unwrap();
        let cov = g.covariance();
        let inv = cov.clone().try_inverse().unwrap();
        let b: Vec<f64> = (0..4).map(|_| rng.random::<f64>()).collect();
        let d = DVector::from_column_slice(&b) - g.mean();
        let q = (d.transpose() * &inv * &d)[(0, 0)];
        let want = -2.0 * (2.0 * PI).ln() - 0.5 * cov.determinant().ln() - 0.5 * q;
        assert!((g.log_density(&b) - want).abs() < 1e-9);
    }

    #[test]
    fn samples_have_the_stated_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let (y, x) = random_problem(&mut rng, 12, 2);
        let g = beta_conditional(&y, &x, 0.5, 3.0).unwrap();
        let draws: Vec<Vec<f64>> = (0..40_000).map(|_| g.sample(&mut rng)).collect();
        let cov = g.covariance();
        for i in 0..2 {
            let mean = draws.iter().map(|d| d[i]).sum::<f64>() / draws.len() as f64;
            let var = draws.iter().map(|d| (d[i] - mean).powi(2)).sum::<f64>() / draws.len() as f64;
            let se = (cov[(i, i)] / draws.len() as f64).sqrt();
            assert!((mean - g.mean()[i]).abs() < 5.0 * se);
            assert!((var / cov[(i, i)] - 1.0).abs() < 0.05);
        }
    }

    #[test]
    fn sigma2_params() {
        let x = design_matrix(1, 10, &[]).unwrap();
        let beta = [1.0, 0.5];
        let y: Vec<f64> = (1..=10).map(|t| 1.0 + 0.5 * t as f64).collect();
        let ig = sigma2_conditional_params(&y, &x, &beta, 0.01, 0.3);
        assert!((ig.scale - 0.15).abs() < 1e-12);
        assert!((ig.shape - 5.005).abs() < 1e-12);
    }

    #[test]
    fn isotropic_is_the_prior() {
        let g = GaussianConditional::isotropic(4, 9.0);
        let b = [1.0, -2.0, 0.0, 3.0];
        let want = crate::priors::log_prior_beta(&b, 9.0);
        assert!((g.log_density(&b) - want).abs() < 1e-12);
    }

    /// Log posterior written out directly from the model.
    fn log_post(y: &[f64], x: &DMatrix<f64>, b: &[f64], sigma2: f64, sigma2_beta: f64) -> f64 {
        let mut rss = 0.0;
        for i in 0..y.len() {
            let fit: f64 = (0..b.len()).map(|j| x[(i, j)] * b[j]).sum();
            rss += (y[i] - fit).powi(2);
        }
        -rss / (2.0 * sigma2) - b.iter().map(|v| v * v).sum::<f64>() / (2.0 * sigma2_beta)
    }

    fn golden_max(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
        let g = (5f64.sqrt() - 1.0) / 2.0;
        for _ in 0..200 {
            let a = hi - g * (hi - lo);
            let b = lo + g * (hi - lo);
            if f(a) > f(b) {
                hi = b;
            } else {
                lo = a;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn mean_and_precision_match_numerical_optimum_and_hessian() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let (y, x) = random_problem(&mut rng, 25, 4);
        let (s2, s2b) = (0.8, 4.0);
        let g = beta_conditional(&y, &x, s2, s2b).unwrap();

        let mut b = vec![0.0; 4];
        for _ in 0..300 {
            for j in 0..4 {
                let best = golden_max(
                    |v| {
                        let mut c = b.clone();
                        c[j] = v;
                        log_post(&y, &x, &c, s2, s2b)
                    },
                    -20.0,
                    20.0,
                );
                b[j] = best;
            }
        }
        for j in 0..4 {
            assert!((b[j] - g.mean()[j]).abs() < 1e-6, "{} vs {}", b[j], g.mean()[j]);
        }

        let h = 1e-2;
        let prec = g.precision();
        for i in 0..4 {
            for j in 0..4 {
                let at = |di: f64, dj: f64| {
                    let mut c = b.clone();
                    c[i] += di;
                    c[j] += dj;
                    log_post(&y, &x, &c, s2, s2b)
                };
                let fd = (at(h, h) - at(h, -h) - at(-h, h) + at(-h, -h)) / (4.0 * h * h);
                let want = prec[(i, j)];
                assert!((-fd - want).abs() <= 1e-6 * want.abs().max(1.0), "{i},{j}: {fd} {want}");
            }
        }
    }

    #[test]
    fn smaller_prior_variance_shrinks_the_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let (y, x) = random_problem(&mut rng, 30, 3);
        let norms: Vec<f64> = [1e4, 100.0, 1.0, 0.1, 1e-3]
            .iter()
            .map(|&v| beta_conditional(&y, &x, 1.0, v).unwrap().mean().norm())
            .collect();
        assert!(norms.windows(2).all(|w| w[1] < w[0]), "{norms:?}");
        assert!(norms[4] < 0.1);
    }

    #[test]
    fn inverse_gamma_density_matches_reference() {
        use statrs::distribution::{Continuous, InverseGamma as Reference};
        let ig = sigma2_conditional_from_rss(40, 12.5, 0.01, 0.01);
        let reference = Reference::new(ig.shape, ig.scale).unwrap();
        let (lo, hi, steps) = (1e-3, 5.0, 200_000);
        let dx = (hi - lo) / steps as f64;
        let mut mass = 0.0;
        let mut first = 0.0;
        for i in 0..steps {
            let v = lo + (i as f64 + 0.5) * dx;
            let d = ig.log_density(v).exp();
            let r = reference.pdf(v);
            if d > 1e-250 {
                assert!((d - r).abs() <= 1e-9 * d, "{v}: {d} vs {r}");
            }
            mass += d * dx;
            first += v * d * dx;
        }
        assert!((mass - 1.0).abs() < 1e-6, "{mass}");
        assert!((first - ig.scale / (ig.shape - 1.0)).abs() < 1e-6);
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(64))]

        #[test]
        fn factor_reproduces_a_positive_definite_precision(
            seed in 0u64..u64::MAX,
            n in 6usize..40,
            m in 0usize..3,
            sigma2 in 1e-3f64..1e3,
            sigma2_beta in 1e-2f64..1e6,
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = n.max(2 * m + 2);
            let omega: Vec<f64> = (0..m).map(|j| 0.05 + 0.15 * j as f64 + 0.1 * rng.random::<f64>()).collect();
            let y: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
            let cp = CrossProducts::for_segment(&y, 1 + (seed % 500) as usize, &omega).unwrap();
            let g = beta_conditional_from(&cp, sigma2, sigma2_beta).unwrap();
            let mut want = &cp.xtx / sigma2;
            for i in 0..want.nrows() {
                want[(i, i)] += 1.0 / sigma2_beta;
            }
            let got = g.precision();
            let scale = want.abs().max();
            proptest::prop_assert!((got - &want).abs().max() <= 1e-9 * scale);
            proptest::prop_assert!(g.chol_l.diagonal().iter().all(|d| *d > 0.0));
        }
    }
}
