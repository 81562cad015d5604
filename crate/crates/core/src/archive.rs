//! The evaluation archive: every configuration evaluated so far together with
//! its replicated objective vectors.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::space::{DesignPoint, SearchSpace};

/// One evaluated configuration.
///
/// `sample_var` is the unbiased per-objective variance of the replications
/// (not divided by the replication count). With a single replication it is
/// zero and [`ObservationRecord::is_low_information`] reports it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObservationRecord {
    pub point: DesignPoint,
    pub replications: Vec<Vec<f64>>,
    pub sample_mean: Vec<f64>,
    pub sample_var: Vec<f64>,
}

impl ObservationRecord {
    pub fn new(point: DesignPoint, replications: Vec<Vec<f64>>) -> Self {
        let (sample_mean, sample_var) = moments(&replications);
        Self {
            point,
            replications,
            sample_mean,
            sample_var,
        }
    }

    pub fn n_replications(&self) -> usize {
        self.replications.len()
    }

    pub fn is_low_information(&self) -> bool {
        self.replications.len() < 2
    }

    /// Per-objective standard deviation of the replications.
    pub fn sample_std(&self) -> Vec<f64> {
        self.sample_var.iter().map(|v| v.sqrt()).collect()
    }

    fn pool(&mut self, reps: Vec<Vec<f64>>) {
        self.replications.extend(reps);
        let (mean, var) = moments(&self.replications);
        self.sample_mean = mean;
        self.sample_var = var;
    }
}

/// Welford accumulation of the componentwise mean and unbiased variance.
fn moments(reps: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let m = reps.first().map_or(0, Vec::len);
    let mut mean = vec![0.0; m];
    let mut m2 = vec![0.0; m];
    for (k, rep) in reps.iter().enumerate() {
        let count = (k + 1) as f64;
        for j in 0..m {
            let delta = rep[j] - mean[j];
            mean[j] += delta / count;
            m2[j] += delta * (rep[j] - mean[j]);
        }
    }
    let var = if reps.len() >= 2 {
        let denom = (reps.len() - 1) as f64;
        m2.iter().map(|s| (s / denom).max(0.0)).collect()
    } else {
        vec![0.0; m]
    };
    (mean, var)
}

/// Outcome of [`Archive::merge_observation`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Merge {
    Appended(usize),
    Pooled(usize),
}

impl Merge {
    pub fn index(self) -> usize {
        match self {
            Merge::Appended(i) | Merge::Pooled(i) => i,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Archive {
    records: Vec<ObservationRecord>,
    m: usize,
    space: SearchSpace,
}

impl Archive {
    pub fn new(space: SearchSpace, m: usize) -> Self {
        Self {
            records: Vec::new(),
            m,
            space,
        }
    }

    pub fn records(&self) -> &[ObservationRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn n_objectives(&self) -> usize {
        self.m
    }

    pub fn space(&self) -> &SearchSpace {
        &self.space
    }

    pub fn position(&self, coords: &[f64]) -> Option<usize> {
        self.records.iter().position(|r| r.point.same_as(coords))
    }

    pub fn contains(&self, coords: &[f64]) -> bool {
        self.position(coords).is_some()
    }

    pub fn means(&self) -> Vec<Vec<f64>> {
        self.records.iter().map(|r| r.sample_mean.clone()).collect()
    }

    /// Adds replications at `point`, pooling them into an existing record
    /// when the point was evaluated before.
    pub fn merge_observation(&mut self, point: DesignPoint, reps: Vec<Vec<f64>>) -> Result<Merge> {
        self.space.check(point.coords())?;
        if reps.is_empty() {
            return Err(Error::Shape {
                expected: self.m,
                actual: 0,
            });
        }
        if let Some(bad) = reps.iter().find(|r| r.len() != self.m) {
            return Err(Error::Shape {
                expected: self.m,
                actual: bad.len(),
            });
        }
        match self.position(point.coords()) {
            Some(i) => {
                self.records[i].pool(reps);
                Ok(Merge::Pooled(i))
            }
            None => {
                self.records.push(ObservationRecord::new(point, reps));
                Ok(Merge::Appended(self.records.len() - 1))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;
    use proptest::prelude::*;
    use rand::Rng;

    fn archive2() -> Archive {
        Archive::new(SearchSpace::unit_cube(2).unwrap(), 2)
    }

    #[test]
    fn single_replication_record() {
        let mut a = archive2();
        let p = DesignPoint::new(vec![0.2, 0.3]);
        assert_eq!(a.merge_observation(p, vec![vec![1.0, 2.0]]).unwrap(), Merge::Appended(0));
        let r = &a.records()[0];
        assert_eq!(r.sample_mean, vec![1.0, 2.0]);
        assert_eq!(r.sample_var, vec![0.0, 0.0]);
        assert!(r.is_low_information());
    }

    #[test]
    fn pooling_at_same_point() {
        let mut a = archive2();
        let p = DesignPoint::new(vec![0.2, 0.3]);
        a.merge_observation(p.clone(), vec![vec![1.0, 2.0]]).unwrap();
        assert_eq!(a.merge_observation(p, vec![vec![3.0, 4.0]]).unwrap(), Merge::Pooled(0));
        assert_eq!(a.len(), 1);
        assert_eq!(a.records()[0].sample_mean, vec![2.0, 3.0]);
        assert_eq!(a.records()[0].sample_var, vec![2.0, 2.0]);
    }

    #[test]
    fn shape_errors() {
        let mut a = archive2();
        let p = DesignPoint::new(vec![0.2, 0.3]);
        assert!(matches!(
            a.merge_observation(p.clone(), vec![vec![1.0]]),
            Err(Error::Shape { .. })
        ));
        assert!(a.merge_observation(p, vec![]).is_err());
        assert!(a
            .merge_observation(DesignPoint::new(vec![0.2]), vec![vec![1.0, 1.0]])
            .is_err());
        assert!(a.is_empty());
    }

    #[test]
    fn variance_matches_two_pass_oracle() {
        let mut rng = RngStream::new(3, 1).rng();
        let reps: Vec<Vec<f64>> = (0..100)
            .map(|_| vec![rng.random::<f64>() * 10.0 + 5.0, rng.random::<f64>() - 0.5])
            .collect();
        let mut a = archive2();
        a.merge_observation(DesignPoint::new(vec![0.5, 0.5]), reps.clone()).unwrap();
        let rec = &a.records()[0];
        for j in 0..2 {
            let n = reps.len() as f64;
            let mean = reps.iter().map(|r| r[j]).sum::<f64>() / n;
            let var = reps.iter().map(|r| (r[j] - mean).powi(2)).sum::<f64>() / (n - 1.0);
            assert!((rec.sample_mean[j] - mean).abs() < 1e-12);
            assert!((rec.sample_var[j] - var).abs() < 1e-10);
        }
    }

    proptest! {
        #[test]
        fn pooling_is_order_insensitive(
            batches in prop::collection::vec(
                prop::collection::vec((-50.0f64..50.0, -1.0f64..1.0), 1..6), 1..6),
            seed in any::<u64>(),
        ) {
            let batches: Vec<Vec<Vec<f64>>> = batches
                .into_iter()
                .map(|b| b.into_iter().map(|(x, y)| vec![x, y]).collect())
                .collect();
            let p = DesignPoint::new(vec![0.4, 0.6]);
            let mut forward = archive2();
            for b in &batches {
                forward.merge_observation(p.clone(), b.clone()).unwrap();
            }
            let mut order: Vec<usize> = (0..batches.len()).collect();
            let mut rng = RngStream::new(seed, 0).rng();
            for i in (1..order.len()).rev() {
                order.swap(i, rng.random_range(0..=i));
            }
            let mut shuffled = archive2();
            for &i in &order {
                shuffled.merge_observation(p.clone(), batches[i].clone()).unwrap();
            }
            let (a, b) = (&forward.records()[0], &shuffled.records()[0]);
            for j in 0..2 {
                prop_assert!((a.sample_mean[j] - b.sample_mean[j]).abs() <= 1e-10);
                prop_assert!((a.sample_var[j] - b.sample_var[j]).abs() <= 1e-10);
            }
        }
    }
}
