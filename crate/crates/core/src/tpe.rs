//! Per-dimension Parzen estimators for the good (`l`) and poor (`g`) subsets.
//!
//! Each estimator is an equally weighted mixture of Gaussians truncated to
//! the dimension's bounds, with one extra prior kernel at the midpoint whose
//! bandwidth is the full width. The prior keeps both densities positive on
//! the whole box, so the log ratio is always finite.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::archive::Archive;
use crate::error::{Error, Result};
use crate::normal;
use crate::pareto::SplitResult;
use crate::rng::RngStream;
use crate::space::{DesignPoint, DimKind, DimensionSpec, SearchSpace};

/// Floor applied to densities before taking logs.
pub const DENSITY_FLOOR: f64 = 1e-300;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TpeConfig {
    /// `sigma_min = width / min(bandwidth_floor_divisor, n_centers)`.
    pub bandwidth_floor_divisor: f64,
    /// `sigma_max = bandwidth_cap_frac * width`.
    pub bandwidth_cap_frac: f64,
}

impl Default for TpeConfig {
    fn default() -> Self {
        Self {
            bandwidth_floor_divisor: 100.0,
            bandwidth_cap_frac: 1.0,
        }
    }
}

impl TpeConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.bandwidth_floor_divisor >= 1.0) {
            return Err(Error::Config("bandwidth_floor_divisor must be >= 1".into()));
        }
        if !(self.bandwidth_cap_frac > 0.0 && self.bandwidth_cap_frac.is_finite()) {
            return Err(Error::Config("bandwidth_cap_frac must be positive".into()));
        }
        Ok(())
    }
}

/// Truncated-Gaussian mixture on `[lower, upper]`.
#[derive(Clone, Debug, PartialEq)]
pub struct ParzenEstimator1D {
    pub centers: Vec<f64>,
    pub bandwidths: Vec<f64>,
    pub weights: Vec<f64>,
    pub lower: f64,
    pub upper: f64,
    /// Per-kernel mass inside the bounds.
    mass: Vec<f64>,
}

impl ParzenEstimator1D {
    /// Builds the estimator from observed values. The prior center is
    /// appended last.
    pub fn new(observed: &[f64], lower: f64, upper: f64, config: &TpeConfig) -> Self {
        let width = upper - lower;
        let mid = 0.5 * (lower + upper);
        let n_centers = observed.len() + 1;
        let sigma_min = width / config.bandwidth_floor_divisor.min(n_centers as f64);
        let sigma_max = config.bandwidth_cap_frac * width;

        // neighbor distances among the sorted centers, prior included, with
        // the bounds acting as outer neighbors
        let mut sorted: Vec<(f64, usize)> = observed.iter().copied().zip(0..).collect();
        sorted.push((mid, observed.len()));
        sorted.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let mut bandwidths = vec![0.0; n_centers];
        for (k, &(c, idx)) in sorted.iter().enumerate() {
            let left = if k == 0 { lower } else { sorted[k - 1].0 };
            let right = if k + 1 == sorted.len() { upper } else { sorted[k + 1].0 };
            let gap = (c - left).max(right - c);
            bandwidths[idx] = gap.max(sigma_min).min(sigma_max);
        }
        bandwidths[observed.len()] = width;

        let mut centers = observed.to_vec();
        centers.push(mid);
        let weights = vec![1.0 / n_centers as f64; n_centers];
        let mass = centers
            .iter()
            .zip(&bandwidths)
            .map(|(&c, &s)| normal::cdf((upper - c) / s) - normal::cdf((lower - c) / s))
            .collect();
        Self {
            centers,
            bandwidths,
            weights,
            lower,
            upper,
            mass,
        }
    }

    pub fn n_centers(&self) -> usize {
        self.centers.len()
    }

    /// Density; zero outside the bounds.
    pub fn pdf(&self, x: f64) -> f64 {
        if !(x >= self.lower && x <= self.upper) {
            return 0.0;
        }
        self.kernels()
            .map(|(c, s, w, z)| w * normal::pdf((x - c) / s) / (s * z))
            .sum()
    }

    pub fn log_pdf(&self, x: f64) -> f64 {
        self.pdf(x).max(DENSITY_FLOOR).ln()
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x <= self.lower {
            return 0.0;
        }
        if x >= self.upper {
            return 1.0;
        }
        let lo = self.lower;
        self.kernels()
            .map(|(c, s, w, z)| w * (normal::cdf((x - c) / s) - normal::cdf((lo - c) / s)) / z)
            .sum::<f64>()
            .clamp(0.0, 1.0)
    }

    /// One draw: pick a kernel, then reject normal draws outside the bounds.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let k = rng.random_range(0..self.n_centers());
        let (c, s) = (self.centers[k], self.bandwidths[k]);
        loop {
            let z: f64 = rng.sample(StandardNormal);
            let x = c + s * z;
            if x >= self.lower && x <= self.upper {
                return x;
            }
        }
    }

    fn kernels(&self) -> impl Iterator<Item = (f64, f64, f64, f64)> + '_ {
        self.centers
            .iter()
            .zip(&self.bandwidths)
            .zip(&self.weights)
            .zip(&self.mass)
            .map(|(((&c, &s), &w), &z)| (c, s, w, z))
    }
}

/// Support of the estimator for one dimension. Integer dimensions get half a
/// unit of slack on each side so the end values are not under-weighted.
fn support(dim: &DimensionSpec) -> (f64, f64) {
    match dim.kind {
        DimKind::Continuous => (dim.lower, dim.upper),
        DimKind::Integer => (dim.lower - 0.5, dim.upper + 0.5),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TpeDensityPair {
    pub space: SearchSpace,
    pub l: Vec<ParzenEstimator1D>,
    pub g: Vec<ParzenEstimator1D>,
}

pub fn build_density_pair(
    archive: &Archive,
    split: &SplitResult,
    space: &SearchSpace,
    config: &TpeConfig,
) -> Result<TpeDensityPair> {
    if split.good.is_empty() {
        return Err(Error::EmptyGoodSet);
    }
    let records = archive.records();
    let column = |idx: &[usize], j: usize| -> Vec<f64> { idx.iter().map(|&i| records[i].point.coords()[j]).collect() };
    let mut l = Vec::with_capacity(space.dim());
    let mut g = Vec::with_capacity(space.dim());
    for (j, dim) in space.dims().iter().enumerate() {
        let (lo, hi) = support(dim);
        l.push(ParzenEstimator1D::new(&column(&split.good, j), lo, hi, config));
        g.push(ParzenEstimator1D::new(&column(&split.poor, j), lo, hi, config));
    }
    Ok(TpeDensityPair {
        space: space.clone(),
        l,
        g,
    })
}

impl TpeDensityPair {
    pub fn dim(&self) -> usize {
        self.l.len()
    }

    /// `log l_j(x) - log g_j(x)` for one dimension.
    pub fn log_ratio(&self, j: usize, x: f64) -> f64 {
        self.l[j].log_pdf(x) - self.g[j].log_pdf(x)
    }

    /// `n_c` draws from `l_j`, snapped to the dimension.
    fn sample_column(&self, j: usize, n_c: usize, stream: &RngStream) -> Vec<f64> {
        let mut rng = stream.derive(j as u64).rng();
        let dim = &self.space.dims()[j];
        (0..n_c).map(|_| dim.snap(self.l[j].sample(&mut rng))).collect()
    }
}

/// `n_c` candidate points; dimension `j` is drawn from `l_j` on its own
/// sub-stream.
pub fn sample_candidates(pair: &TpeDensityPair, n_c: usize, stream: &RngStream) -> Vec<DesignPoint> {
    let columns: Vec<Vec<f64>> = (0..pair.dim()).map(|j| pair.sample_column(j, n_c, stream)).collect();
    (0..n_c)
        .map(|i| DesignPoint::new(columns.iter().map(|c| c[i]).collect()))
        .collect()
}

/// `AS(x) = sum_j log l_j(x_j) - log g_j(x_j)`.
pub fn aggregated_score(pair: &TpeDensityPair, x: &[f64]) -> f64 {
    x.iter().enumerate().map(|(j, &v)| pair.log_ratio(j, v)).sum()
}

/// Classic MOTPE rule: per dimension keep the draw with the largest log
/// ratio (first index on ties).
pub fn motpe_select(pair: &TpeDensityPair, n_c: usize, stream: &RngStream) -> DesignPoint {
    assert!(n_c >= 1);
    let coords = (0..pair.dim())
        .map(|j| {
            let column = pair.sample_column(j, n_c, stream);
            let mut best = (column[0], pair.log_ratio(j, column[0]));
            for &v in &column[1..] {
                let r = pair.log_ratio(j, v);
                if r > best.1 {
                    best = (v, r);
                }
            }
            best.0
        })
        .collect();
    DesignPoint::new(coords)
}
