//! Stochastic kriging.
//!
//! Observed scalarized means are modelled as `y_i = mu + M(x_i) + eps_i`,
//! where `M` is a zero-mean Gaussian process with an anisotropic Gaussian
//! kernel `sigma2 * exp(-sum_k theta_k (x_k - x'_k)^2)` and `eps_i` is the
//! intrinsic noise of the mean, whose variance is fixed to the replication
//! estimate (`nugget_i`). Only `theta`, `sigma2` and the constant trend `mu`
//! are estimated; `mu` by generalized least squares inside the likelihood.
//!
//! Inputs are scaled to the unit cube before kernel evaluation.

use log::warn;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::archive::Archive;
use crate::doe::latin_hypercube;
use crate::error::{Error, Result};
use crate::optim::bfgs;
use crate::scalarize::ScalarizedDataset;
use crate::space::{DesignPoint, SearchSpace};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GpConfig {
    /// Independent local searches of the likelihood.
    pub restarts: usize,
    pub theta_bounds: (f64, f64),
    /// Bounds of `sigma2` as multiples of the sample variance of `y`.
    pub sigma2_bounds: (f64, f64),
    /// Diagonal jitters tried, in order, when the covariance fails to factor.
    pub jitter_ladder: Vec<f64>,
    /// Include the trend-estimation term in the predictive variance.
    pub trend_correction: bool,
    pub max_iters: usize,
}

impl Default for GpConfig {
    fn default() -> Self {
        Self {
            restarts: 10,
            theta_bounds: (1e-3, 1e3),
            sigma2_bounds: (1e-8, 1e3),
            jitter_ladder: vec![1e-10, 1e-9, 1e-8, 1e-7, 1e-6],
            trend_correction: true,
            max_iters: 200,
        }
    }
}

impl GpConfig {
    /// Same settings with every jitter raised 100-fold, used to retry a fit
    /// that failed to factor.
    pub fn escalated(&self) -> Self {
        let mut cfg = self.clone();
        cfg.jitter_ladder = self.jitter_ladder.iter().map(|j| j * 100.0).collect();
        if cfg.jitter_ladder.is_empty() {
            cfg.jitter_ladder = vec![1e-8, 1e-6, 1e-4];
        }
        cfg
    }

    pub fn validate(&self) -> Result<()> {
        let (t0, t1) = self.theta_bounds;
        let (s0, s1) = self.sigma2_bounds;
        if self.restarts == 0 {
            return Err(Error::Config("gp.restarts must be >= 1".into()));
        }
        if !(t0 > 0.0 && t1 > t0 && s0 > 0.0 && s1 > s0) {
            return Err(Error::Config("gp bounds must be positive and increasing".into()));
        }
        if self.jitter_ladder.iter().any(|j| !(*j >= 0.0)) {
            return Err(Error::Config("gp.jitter_ladder entries must be >= 0".into()));
        }
        Ok(())
    }
}

/// Kernel hyperparameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GpParams {
    /// Inverse squared lengthscales, one per dimension.
    pub theta: Vec<f64>,
    /// Process (extrinsic) variance.
    pub sigma2: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GpPrediction {
    pub mean: f64,
    /// Ordinary-kriging standard deviation: extrinsic uncertainty only.
    pub std_ok: f64,
}

/// Training data in unit-cube coordinates.
#[derive(Clone, Debug)]
struct TrainingSet {
    x: Vec<Vec<f64>>,
    /// Targets minus their arithmetic mean; the GLS trend absorbs the shift.
    y: DVector<f64>,
    y_offset: f64,
    nugget: DVector<f64>,
    /// Squared coordinate differences per dimension, each n x n.
    sq_diff: Vec<DMatrix<f64>>,
}

impl TrainingSet {
    fn new(space: &SearchSpace, points: &[DesignPoint], y: &[f64], nugget: &[f64]) -> Result<Self> {
        let n = points.len();
        if n == 0 || y.len() != n || nugget.len() != n {
            return Err(Error::Shape {
                expected: n,
                actual: y.len().min(nugget.len()),
            });
        }
        if nugget.iter().any(|v| !(*v >= 0.0)) {
            return Err(Error::Config("nugget values must be finite and >= 0".into()));
        }
        let x: Vec<Vec<f64>> = points
            .iter()
            .map(|p| {
                if p.dim() != space.dim() {
                    return Err(Error::Shape {
                        expected: space.dim(),
                        actual: p.dim(),
                    });
                }
                Ok(space.to_unit(p.coords()))
            })
            .collect::<Result<_>>()?;
        let d = space.dim();
        let sq_diff = (0..d)
            .map(|k| DMatrix::from_fn(n, n, |i, j| (x[i][k] - x[j][k]).powi(2)))
            .collect();
        let y_offset = y.iter().sum::<f64>() / n as f64;
        Ok(Self {
            x,
            y: DVector::from_iterator(n, y.iter().map(|v| v - y_offset)),
            y_offset,
            nugget: DVector::from_column_slice(nugget),
            sq_diff,
        })
    }

    fn n(&self) -> usize {
        self.y.len()
    }

    fn correlation(&self, theta: &[f64]) -> DMatrix<f64> {
        let n = self.n();
        let mut r = DMatrix::zeros(n, n);
        for (t, d2) in theta.iter().zip(&self.sq_diff) {
            r -= d2 * *t;
        }
        r.apply(|v| *v = v.exp());
        r
    }
}

/// Covariance factorization plus the GLS quantities derived from it.
struct Factorized {
    /// Lower Cholesky factor of C.
    l: DMatrix<f64>,
    jitter: f64,
    mu: f64,
    /// C^-1 (y - mu 1)
    alpha: DVector<f64>,
    /// C^-1 1
    c_inv_one: DVector<f64>,
    one_c_inv_one: f64,
    log_likelihood: f64,
    chol: nalgebra::Cholesky<f64, nalgebra::Dyn>,
}

fn factorize(
    data: &TrainingSet,
    r: &DMatrix<f64>,
    sigma2: f64,
    ladder: &[f64],
) -> Option<Factorized> {
    let n = data.n();
    let mut base = r * sigma2;
    for i in 0..n {
        base[(i, i)] += data.nugget[i];
    }
    let chol_jitter = std::iter::once(0.0)
        .chain(ladder.iter().copied())
        .find_map(|jitter| {
            let mut c = base.clone();
            if jitter > 0.0 {
                for i in 0..n {
                    c[(i, i)] += jitter;
                }
            }
            c.cholesky().map(|ch| (ch, jitter))
        });
    let (chol, jitter) = chol_jitter?;
    let ones = DVector::from_element(n, 1.0);
    let c_inv_y = chol.solve(&data.y);
    let c_inv_one = chol.solve(&ones);
    let one_c_inv_one = c_inv_one.sum();
    if !(one_c_inv_one > 0.0) {
        return None;
    }
    let mu = c_inv_y.sum() / one_c_inv_one;
    let alpha = &c_inv_y - &c_inv_one * mu;
    let resid = &data.y - &ones * mu;
    let l = chol.l();
    let log_det: f64 = 2.0 * l.diagonal().iter().map(|v| v.ln()).sum::<f64>();
    let quad = resid.dot(&alpha);
    let log_likelihood =
        -0.5 * quad - 0.5 * log_det - 0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln();
    if !log_likelihood.is_finite() {
        return None;
    }
    Some(Factorized {
        l,
        jitter,
        mu,
        alpha,
        c_inv_one,
        one_c_inv_one,
        log_likelihood,
        chol,
    })
}

/// Profile log marginal likelihood over `(ln theta, ln sigma2)` with the
/// nugget held fixed and the trend at its GLS estimate.
pub struct Likelihood {
    data: TrainingSet,
    jitter_ladder: Vec<f64>,
}

impl Likelihood {
    pub fn new(
        space: &SearchSpace,
        points: &[DesignPoint],
        y: &[f64],
        nugget: &[f64],
        jitter_ladder: &[f64],
    ) -> Result<Self> {
        Ok(Self {
            data: TrainingSet::new(space, points, y, nugget)?,
            jitter_ladder: jitter_ladder.to_vec(),
        })
    }

    /// Log-likelihood at `log_params = [ln theta_1..ln theta_d, ln sigma2]`.
    pub fn value(&self, log_params: &[f64]) -> Option<f64> {
        let (theta, sigma2) = split_params(log_params);
        let r = self.data.correlation(&theta);
        factorize(&self.data, &r, sigma2, &self.jitter_ladder).map(|f| f.log_likelihood)
    }

    /// Log-likelihood and its gradient with respect to the log parameters.
    pub fn value_and_gradient(&self, log_params: &[f64]) -> Option<(f64, Vec<f64>)> {
        let (theta, sigma2) = split_params(log_params);
        let r = self.data.correlation(&theta);
        let fact = factorize(&self.data, &r, sigma2, &self.jitter_ladder)?;
        // dl/dp = 1/2 tr((a a^T - C^-1) dC/dp)
        let mut w = fact.chol.inverse();
        w.ger(-1.0, &fact.alpha, &fact.alpha, 1.0);
        w.neg_mut();
        // w = a a^T - C^-1; k = sigma2 * R
        let k_w = r.component_mul(&w) * sigma2;
        let mut grad = Vec::with_capacity(theta.len() + 1);
        for (t, d2) in theta.iter().zip(&self.data.sq_diff) {
            grad.push(-0.5 * t * k_w.dot(d2));
        }
        grad.push(0.5 * k_w.sum());
        Some((fact.log_likelihood, grad))
    }
}

fn split_params(log_params: &[f64]) -> (Vec<f64>, f64) {
    let d = log_params.len() - 1;
    let theta = log_params[..d].iter().map(|v| v.exp()).collect();
    (theta, log_params[d].exp())
}

/// A fitted stochastic-kriging model. Immutable once built.
pub struct GpModel {
    space: SearchSpace,
    data: TrainingSet,
    params: GpParams,
    fact: Factorized,
    trend_correction: bool,
}

impl std::fmt::Debug for GpModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GpModel")
            .field("n", &self.data.n())
            .field("params", &self.params)
            .field("mu", &self.mu())
            .field("jitter", &self.fact.jitter)
            .field("log_likelihood", &self.fact.log_likelihood)
            .finish()
    }
}

impl GpModel {
    /// Builds the model at fixed hyperparameters.
    pub fn with_params(
        space: &SearchSpace,
        points: &[DesignPoint],
        y: &[f64],
        nugget: &[f64],
        params: GpParams,
        config: &GpConfig,
    ) -> Result<Self> {
        let data = TrainingSet::new(space, points, y, nugget)?;
        if params.theta.len() != space.dim() {
            return Err(Error::Shape {
                expected: space.dim(),
                actual: params.theta.len(),
            });
        }
        let r = data.correlation(&params.theta);
        let fact = factorize(&data, &r, params.sigma2, &config.jitter_ladder).ok_or(
            Error::NotPositiveDefinite {
                jitter: config.jitter_ladder.last().copied().unwrap_or(0.0),
            },
        )?;
        Ok(Self {
            space: space.clone(),
            data,
            params,
            fact,
            trend_correction: config.trend_correction,
        })
    }

    /// Maximum-likelihood fit from `config.restarts` Latin-hypercube starts in
    /// log-parameter space. `warm_start`, if given, replaces the first start.
    pub fn fit<R: Rng + ?Sized>(
        space: &SearchSpace,
        points: &[DesignPoint],
        y: &[f64],
        nugget: &[f64],
        config: &GpConfig,
        warm_start: Option<&GpParams>,
        rng: &mut R,
    ) -> Result<Self> {
        config.validate()?;
        let d = space.dim();
        let n = points.len();
        if n < d + 2 {
            warn!("fitting a GP on {n} points in {d} dimensions; the fit is poorly determined");
        }
        let lik = Likelihood::new(space, points, y, nugget, &config.jitter_ladder)?;
        let var_y = sample_variance(y);
        let scale = if var_y > 0.0 && var_y.is_finite() { var_y } else { 1.0 };
        let mut lo = vec![config.theta_bounds.0.ln(); d];
        let mut hi = vec![config.theta_bounds.1.ln(); d];
        lo.push((config.sigma2_bounds.0 * scale).ln());
        hi.push((config.sigma2_bounds.1 * scale).ln());

        let start_space = SearchSpace::unit_cube(d + 1)?;
        let design = latin_hypercube(&start_space, config.restarts, rng);
        let mut starts: Vec<Vec<f64>> = design
            .points
            .iter()
            .map(|p| {
                p.coords()
                    .iter()
                    .zip(lo.iter().zip(&hi))
                    .map(|(u, (a, b))| a + (b - a) * (0.02 + 0.96 * u))
                    .collect()
            })
            .collect();
        if let Some(ws) = warm_start.filter(|ws| ws.theta.len() == d) {
            let mut s: Vec<f64> = ws.theta.iter().map(|t| t.ln()).collect();
            s.push(ws.sigma2.ln());
            for (v, (a, b)) in s.iter_mut().zip(lo.iter().zip(&hi)) {
                let margin = 1e-3 * (b - a);
                *v = v.clamp(a + margin, b - margin);
            }
            starts[0] = s;
        }

        let to_log = |u: &[f64]| -> Vec<f64> {
            u.iter()
                .zip(lo.iter().zip(&hi))
                .map(|(ui, (a, b))| a + (b - a) * sigmoid(*ui))
                .collect()
        };
        let objective = |u: &[f64]| -> Option<(f64, Vec<f64>)> {
            let p = to_log(u);
            let (ll, g) = lik.value_and_gradient(&p)?;
            let grad = g
                .iter()
                .zip(u.iter().zip(lo.iter().zip(&hi)))
                .map(|(gi, (ui, (a, b)))| {
                    let s = sigmoid(*ui);
                    -gi * (b - a) * s * (1.0 - s)
                })
                .collect();
            Some((-ll, grad))
        };

        let results: Vec<Option<(f64, Vec<f64>)>> = starts
            .par_iter()
            .map(|s| {
                let u0: Vec<f64> = s
                    .iter()
                    .zip(lo.iter().zip(&hi))
                    .map(|(v, (a, b))| logit((v - a) / (b - a)))
                    .collect();
                let best = bfgs(&objective, &u0, config.max_iters, 1e-7)?;
                Some((-best.value, to_log(&best.x)))
            })
            .collect();
        let mut best: Option<(f64, Vec<f64>)> = None;
        for (ll, p) in results.into_iter().flatten() {
            if best.as_ref().is_none_or(|(b, _)| ll > *b) {
                best = Some((ll, p));
            }
        }
        let (_, log_params) = best.ok_or(Error::NotPositiveDefinite {
            jitter: config.jitter_ladder.last().copied().unwrap_or(0.0),
        })?;
        let (theta, sigma2) = split_params(&log_params);
        Self::with_params(space, points, y, nugget, GpParams { theta, sigma2 }, config)
    }

    /// Fits the model on the archive's points and a scalarized dataset.
    pub fn fit_scalarized<R: Rng + ?Sized>(
        archive: &Archive,
        dataset: &ScalarizedDataset,
        config: &GpConfig,
        warm_start: Option<&GpParams>,
        rng: &mut R,
    ) -> Result<Self> {
        let points: Vec<DesignPoint> = archive.records().iter().map(|r| r.point.clone()).collect();
        Self::fit(
            archive.space(),
            &points,
            &dataset.scalar_mean,
            &dataset.scalar_var_of_mean,
            config,
            warm_start,
            rng,
        )
    }

    pub fn params(&self) -> &GpParams {
        &self.params
    }

    /// Estimated constant trend.
    pub fn mu(&self) -> f64 {
        self.fact.mu + self.data.y_offset
    }

    pub fn jitter(&self) -> f64 {
        self.fact.jitter
    }

    pub fn log_likelihood(&self) -> f64 {
        self.fact.log_likelihood
    }

    pub fn n_train(&self) -> usize {
        self.data.n()
    }

    pub fn space(&self) -> &SearchSpace {
        &self.space
    }

    pub fn predict(&self, x: &DesignPoint) -> GpPrediction {
        self.predict_coords(x.coords())
    }

    pub fn predict_coords(&self, coords: &[f64]) -> GpPrediction {
        let u = self.space.to_unit(coords);
        let n = self.data.n();
        let sigma2 = self.params.sigma2;
        let c: Vec<f64> = self
            .data
            .x
            .iter()
            .map(|xi| {
                let e: f64 = xi
                    .iter()
                    .zip(&u)
                    .zip(&self.params.theta)
                    .map(|((a, b), t)| t * (a - b) * (a - b))
                    .sum();
                sigma2 * (-e).exp()
            })
            .collect();
        let mean = self.mu() + c.iter().zip(self.fact.alpha.iter()).map(|(a, b)| a * b).sum::<f64>();

        // v = L^-1 c by forward substitution
        let l = &self.fact.l;
        let mut v = vec![0.0; n];
        for i in 0..n {
            let mut s = c[i];
            for (j, vj) in v.iter().enumerate().take(i) {
                s -= l[(i, j)] * vj;
            }
            v[i] = s / l[(i, i)];
        }
        let mut var = sigma2 - v.iter().map(|x| x * x).sum::<f64>();
        if self.trend_correction {
            let one_c_inv_c: f64 = self.fact.c_inv_one.iter().zip(&c).map(|(a, b)| a * b).sum();
            var += (1.0 - one_c_inv_c).powi(2) / self.fact.one_c_inv_one;
        }
        GpPrediction {
            mean,
            std_ok: var.max(0.0).sqrt(),
        }
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn logit(p: f64) -> f64 {
    let p = p.clamp(1e-12, 1.0 - 1e-12);
    (p / (1.0 - p)).ln()
}

fn sample_variance(y: &[f64]) -> f64 {
    if y.len() < 2 {
        return 0.0;
    }
    let n = y.len() as f64;
    let mean = y.iter().sum::<f64>() / n;
    y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;

    fn pts(v: &[f64]) -> Vec<DesignPoint> {
        v.iter().map(|&x| DesignPoint::new(vec![x])).collect()
    }

    #[test]
    fn constant_targets_give_flat_predictions() {
        let space = SearchSpace::unit_cube(1).unwrap();
        let x = pts(&[0.0, 0.25, 0.5, 0.75, 1.0]);
        let y = vec![2.5; 5];
        let model = GpModel::fit(
            &space,
            &x,
            &y,
            &[0.0; 5],
            &GpConfig::default(),
            None,
            &mut RngStream::new(1, 0).rng(),
        )
        .unwrap();
        assert!((model.mu() - 2.5).abs() < 1e-6);
        for i in 0..=20 {
            let p = model.predict_coords(&[i as f64 / 20.0]);
            assert!((p.mean - 2.5).abs() < 1e-6, "{model:?} {p:?}");
        }
    }

    #[test]
    fn noise_free_sinusoid_is_interpolated() {
        let space = SearchSpace::unit_cube(1).unwrap();
        let xs = [0.05, 0.3, 0.5, 0.72, 0.95];
        let y: Vec<f64> = xs.iter().map(|x| (2.0 * std::f64::consts::PI * x).sin()).collect();
        let model = GpModel::fit(
            &space,
            &pts(&xs),
            &y,
            &[0.0; 5],
            &GpConfig::default(),
            None,
            &mut RngStream::new(2, 0).rng(),
        )
        .unwrap();
        for (x, yi) in xs.iter().zip(&y) {
            let p = model.predict_coords(&[*x]);
            assert!((p.mean - yi).abs() < 1e-6, "{} vs {}", p.mean, yi);
            assert!(p.std_ok < 1e-3 * model.params().sigma2.sqrt());
        }
    }

    #[test]
    fn far_points_revert_to_prior() {
        let space = SearchSpace::uniform_box(1, 0.0, 100.0).unwrap();
        let model = GpModel::with_params(
            &space,
            &pts(&[0.0, 1.0, 2.0]),
            &[1.0, 2.0, 0.5],
            &[0.01, 0.02, 0.0],
            GpParams {
                theta: vec![500.0],
                sigma2: 0.7,
            },
            &GpConfig::default(),
        )
        .unwrap();
        let p = model.predict_coords(&[90.0]);
        assert!((p.mean - model.mu()).abs() < 1e-12);
        let trend = 1.0 / model.fact.one_c_inv_one;
        assert!((p.std_ok.powi(2) - (0.7 + trend)).abs() < 1e-12);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let space = SearchSpace::unit_cube(2).unwrap();
        let mut rng = RngStream::new(4, 0).rng();
        let points: Vec<DesignPoint> = (0..12)
            .map(|_| DesignPoint::new(vec![rng.random(), rng.random()]))
            .collect();
        let y: Vec<f64> = points.iter().map(|p| (3.0 * p.0[0]).sin() + p.0[1] * p.0[1]).collect();
        let nugget: Vec<f64> = (0..12).map(|i| 1e-3 * (1 + i % 3) as f64).collect();
        let lik = Likelihood::new(&space, &points, &y, &nugget, &GpConfig::default().jitter_ladder).unwrap();
        for _ in 0..20 {
            let p = vec![
                rng.random_range(-2.0..3.0),
                rng.random_range(-2.0..3.0),
                rng.random_range(-3.0..1.0),
            ];
            let (_, g) = lik.value_and_gradient(&p).unwrap();
            for k in 0..3 {
                let h = 1e-5;
                let mut a = p.clone();
                let mut b = p.clone();
                a[k] += h;
                b[k] -= h;
                let fd = (lik.value(&a).unwrap() - lik.value(&b).unwrap()) / (2.0 * h);
                let rel = (g[k] - fd).abs() / fd.abs().max(1e-3);
                assert!(rel < 1e-4, "param {k}: analytic {} vs fd {fd}", g[k]);
            }
        }
    }

    #[test]
    fn larger_nugget_weakens_the_pull() {
        let space = SearchSpace::unit_cube(1).unwrap();
        let x = pts(&[0.1, 0.4, 0.6, 0.9]);
        let y = [0.0, 1.0, -0.5, 0.3];
        let params = GpParams {
            theta: vec![8.0],
            sigma2: 1.0,
        };
        let mut last = -1.0;
        for nug in [0.0, 0.01, 0.1, 1.0, 10.0] {
            let model = GpModel::with_params(
                &space,
                &x,
                &y,
                &[0.0, nug, 0.0, 0.0],
                params.clone(),
                &GpConfig::default(),
            )
            .unwrap();
            let gap = (model.predict_coords(&[0.4]).mean - y[1]).abs();
            assert!(gap >= last - 1e-12);
            last = gap;
        }
        assert!(last > 0.1);
    }
}
