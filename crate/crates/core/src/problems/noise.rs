//! Heteroscedastic Gaussian observation noise whose standard deviation falls
//! linearly with the objective value.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::space::DesignPoint;

use super::benchmarks::Problem;

pub const TAU_MIN_FRAC: f64 = 0.01;
pub const TAU_MAX_FRAC: f64 = 0.5;

/// Linear noise line of one objective: `tau = a (f + b)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseLine {
    pub a: f64,
    pub b: f64,
    pub f_min: f64,
    pub f_max: f64,
    /// Objective range `f_max - f_min`.
    pub omega: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub lines: Vec<NoiseLine>,
    pub tau_min_frac: f64,
    pub tau_max_frac: f64,
}

impl NoiseModel {
    /// Fits the noise lines so that `tau = tau_max_frac * omega` at `f_min`
    /// and `tau = tau_min_frac * omega` at `f_max`.
    pub fn from_ranges(ranges: &[(f64, f64)]) -> Self {
        Self::with_fractions(ranges, TAU_MIN_FRAC, TAU_MAX_FRAC)
    }

    pub fn with_fractions(ranges: &[(f64, f64)], tau_min_frac: f64, tau_max_frac: f64) -> Self {
        let lines = ranges
            .iter()
            .map(|&(f_min, f_max)| {
                let omega = f_max - f_min;
                if omega > 0.0 {
                    let a = (tau_min_frac - tau_max_frac) * omega / (f_max - f_min);
                    let b = tau_max_frac * omega / a - f_min;
                    NoiseLine {
                        a,
                        b,
                        f_min,
                        f_max,
                        omega,
                    }
                } else {
                    NoiseLine {
                        a: 0.0,
                        b: 0.0,
                        f_min,
                        f_max,
                        omega: 0.0,
                    }
                }
            })
            .collect();
        Self {
            lines,
            tau_min_frac,
            tau_max_frac,
        }
    }

    /// Model that adds no noise at all.
    pub fn silent(m: usize) -> Self {
        Self::with_fractions(&vec![(0.0, 0.0); m], 0.0, 0.0)
    }

    pub fn for_problem(problem: &Problem) -> Self {
        Self::from_ranges(&problem.ideal_range())
    }

    /// Standard deviation of the noise at objective values `f`, clamped to
    /// `[tau_min_frac, tau_max_frac] * omega`.
    pub fn noise_std(&self, f: &[f64]) -> Vec<f64> {
        self.lines
            .iter()
            .zip(f)
            .map(|(line, &fj)| {
                let lo = self.tau_min_frac * line.omega;
                let hi = self.tau_max_frac * line.omega;
                (line.a * (fj + line.b)).clamp(lo, hi)
            })
            .collect()
    }
}

/// `r` noisy replications of the deterministic objectives at `point`.
pub fn eval_noisy<R: Rng + ?Sized>(
    problem: &Problem,
    model: &NoiseModel,
    point: &DesignPoint,
    r: usize,
    rng: &mut R,
) -> Result<Vec<Vec<f64>>> {
    let f = problem.eval_deterministic(point)?;
    let tau = model.noise_std(&f);
    Ok((0..r)
        .map(|_| {
            f.iter()
                .zip(&tau)
                .map(|(&fj, &tj)| {
                    let z: f64 = rng.sample(StandardNormal);
                    fj + tj * z
                })
                .collect()
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::Benchmark;
    use crate::rng::RngStream;

    #[test]
    fn unit_range_endpoints_and_midpoint() {
        let model = NoiseModel::from_ranges(&[(0.0, 1.0)]);
        assert!((model.noise_std(&[0.0])[0] - 0.5).abs() < 1e-12);
        assert!((model.noise_std(&[1.0])[0] - 0.01).abs() < 1e-12);
        assert!((model.noise_std(&[0.5])[0] - 0.255).abs() < 1e-12);
    }

    #[test]
    fn clamps_outside_range() {
        let model = NoiseModel::from_ranges(&[(2.0, 6.0)]);
        assert!((model.noise_std(&[-10.0])[0] - 2.0).abs() < 1e-12);
        assert!((model.noise_std(&[100.0])[0] - 0.04).abs() < 1e-12);
    }

    #[test]
    fn silent_model_reproduces_deterministic_values() {
        let prob = Problem::new(Benchmark::Zdt1, 5).unwrap();
        let x = DesignPoint::new(vec![0.3, 0.1, 0.2, 0.9, 0.5]);
        let reps = eval_noisy(&prob, &NoiseModel::silent(2), &x, 7, &mut RngStream::new(1, 1).rng())
            .unwrap();
        let f = prob.eval_deterministic(&x).unwrap();
        assert_eq!(reps.len(), 7);
        assert!(reps.iter().all(|r| *r == f));
    }

    #[test]
    fn monte_carlo_std_matches_tau() {
        let prob = Problem::new(Benchmark::Zdt1, 5).unwrap();
        let model = NoiseModel::from_ranges(&[(0.0, 1.0), (0.0, 10.0)]);
        let x = DesignPoint::new(vec![0.25, 0.5, 0.5, 0.5, 0.5]);
        let n = 100_000;
        let reps = eval_noisy(&prob, &model, &x, n, &mut RngStream::new(2, 0).rng()).unwrap();
        let tau = model.noise_std(&prob.eval_deterministic(&x).unwrap());
        for j in 0..2 {
            let mean = reps.iter().map(|r| r[j]).sum::<f64>() / n as f64;
            let var = reps.iter().map(|r| (r[j] - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            assert!((var.sqrt() / tau[j] - 1.0).abs() < 0.01, "objective {j}");
        }
    }

    #[test]
    fn fixed_stream_is_bit_reproducible() {
        let prob = Problem::new(Benchmark::Dtlz7, 5).unwrap();
        let model = NoiseModel::from_ranges(&[(0.0, 1.0), (2.0, 22.0)]);
        let x = DesignPoint::new(vec![0.5; 5]);
        let a = eval_noisy(&prob, &model, &x, 5, &mut RngStream::new(3, 3).rng()).unwrap();
        let b = eval_noisy(&prob, &model, &x, 5, &mut RngStream::new(3, 3).rng()).unwrap();
        let bits = |v: &Vec<Vec<f64>>| -> Vec<u64> { v.iter().flatten().map(|x| x.to_bits()).collect() };
        assert_eq!(bits(&a), bits(&b));
    }
}
