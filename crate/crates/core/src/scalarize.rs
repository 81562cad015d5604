//! Augmented Tchebycheff scalarization with random simplex weights.
//!
//! Each replication is scalarized on its own, so the scalarized mean and the
//! variance of that mean come from the same replication set.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::archive::Archive;
use crate::error::{Error, Result};

pub const DEFAULT_RHO: f64 = 0.05;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightVector {
    pub w: Vec<f64>,
    pub rho: f64,
}

/// Uniform draw from the unit simplex (spacings of sorted uniforms).
pub fn draw_weights<R: Rng + ?Sized>(m: usize, rho: f64, rng: &mut R) -> WeightVector {
    assert!(m >= 2, "scalarization needs at least two objectives");
    let mut cuts: Vec<f64> = (0..m - 1).map(|_| rng.random::<f64>()).collect();
    cuts.sort_by(f64::total_cmp);
    let mut w = Vec::with_capacity(m);
    let mut prev = 0.0;
    for c in cuts {
        w.push(c - prev);
        prev = c;
    }
    w.push(1.0 - prev);
    WeightVector { w, rho }
}

/// `max_j(w_j f̄_j) + rho * sum_j(w_j f̄_j)` with `f̄_j = (f_j - lo_j) / (hi_j - lo_j)`.
pub fn scalarize_replication(f: &[f64], wv: &WeightVector, anchors: &[(f64, f64)]) -> Result<f64> {
    if f.len() != wv.w.len() || anchors.len() != wv.w.len() {
        return Err(Error::Shape {
            expected: wv.w.len(),
            actual: f.len().min(anchors.len()),
        });
    }
    let mut max = f64::NEG_INFINITY;
    let mut sum = 0.0;
    for (j, ((&fj, &wj), &(lo, hi))) in f.iter().zip(&wv.w).zip(anchors).enumerate() {
        if !(hi > lo) {
            return Err(Error::DegenerateAnchors { objective: j, lo, hi });
        }
        let term = wj * (fj - lo) / (hi - lo);
        max = max.max(term);
        sum += term;
    }
    Ok(max + wv.rho * sum)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScalarizedDataset {
    pub scalar_mean: Vec<f64>,
    /// Sample variance of the scalarized replications divided by their count.
    pub scalar_var_of_mean: Vec<f64>,
    /// Records with a single replication, whose variance is uninformative.
    pub low_information: Vec<bool>,
    pub anchors: Vec<(f64, f64)>,
    pub weights: WeightVector,
}

impl ScalarizedDataset {
    pub fn len(&self) -> usize {
        self.scalar_mean.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scalar_mean.is_empty()
    }

    /// Index of the smallest scalarized mean; ties go to the lowest index.
    pub fn argmin(&self) -> usize {
        let mut best = 0;
        for (i, &v) in self.scalar_mean.iter().enumerate() {
            if v < self.scalar_mean[best] {
                best = i;
            }
        }
        best
    }
}

/// Per-objective min/max of the archive's sample means. A collapsed range
/// (all means equal) is widened to unit width so normalization stays
/// defined.
pub fn mean_anchors(archive: &Archive) -> Vec<(f64, f64)> {
    let m = archive.n_objectives();
    let mut anchors = vec![(f64::INFINITY, f64::NEG_INFINITY); m];
    for rec in archive.records() {
        for (a, &v) in anchors.iter_mut().zip(&rec.sample_mean) {
            a.0 = a.0.min(v);
            a.1 = a.1.max(v);
        }
    }
    for a in &mut anchors {
        if !(a.1 - a.0 > f64::EPSILON * a.0.abs().max(a.1.abs()).max(1.0)) {
            a.1 = a.0 + 1.0;
        }
    }
    anchors
}

pub fn build_scalarized_dataset(archive: &Archive, wv: &WeightVector) -> Result<ScalarizedDataset> {
    let anchors = mean_anchors(archive);
    let n = archive.len();
    let mut scalar_mean = Vec::with_capacity(n);
    let mut scalar_var_of_mean = Vec::with_capacity(n);
    let mut low_information = Vec::with_capacity(n);
    for rec in archive.records() {
        let values = rec
            .replications
            .iter()
            .map(|f| scalarize_replication(f, wv, &anchors))
            .collect::<Result<Vec<f64>>>()?;
        let r = values.len() as f64;
        let mean = values.iter().sum::<f64>() / r;
        // shifted by the first value so identical replications give exactly 0
        let shift = values[0];
        let (s1, s2) = values
            .iter()
            .fold((0.0, 0.0), |(a, b), v| (a + (v - shift), b + (v - shift).powi(2)));
        let var = if values.len() >= 2 {
            ((s2 - s1 * s1 / r) / (r - 1.0)).max(0.0)
        } else {
            0.0
        };
        scalar_mean.push(mean);
        scalar_var_of_mean.push(var / r);
        low_information.push(values.len() < 2);
    }
    Ok(ScalarizedDataset {
        scalar_mean,
        scalar_var_of_mean,
        low_information,
        anchors,
        weights: wv.clone(),
    })
}
