//! Initial designs.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::space::{sample_uniform, DesignPoint, SearchSpace};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DesignScheme {
    Lhs,
    Random,
}

#[derive(Clone, Debug, PartialEq)]
pub struct InitialDesign {
    pub points: Vec<DesignPoint>,
    pub scheme: DesignScheme,
}

impl InitialDesign {
    pub fn size(&self) -> usize {
        self.points.len()
    }
}

/// Default initial-design size, `11 d - 1`.
pub fn default_size(d: usize) -> usize {
    11 * d - 1
}

/// Plain Latin hypercube: each dimension is cut into `n` equal strata, every
/// stratum receives exactly one point, and points are jittered uniformly
/// inside their stratum.
pub fn latin_hypercube<R: Rng + ?Sized>(space: &SearchSpace, n: usize, rng: &mut R) -> InitialDesign {
    assert!(n >= 1, "a Latin hypercube needs at least one point");
    let d = space.dim();
    let mut unit = vec![vec![0.0; d]; n];
    let mut strata: Vec<usize> = (0..n).collect();
    for j in 0..d {
        strata.shuffle(rng);
        for (row, &k) in unit.iter_mut().zip(&strata) {
            // stays strictly inside [k/n, (k+1)/n)
            let u = (k as f64 + rng.random::<f64>()) / n as f64;
            row[j] = u.min(((k + 1) as f64 / n as f64).next_down());
        }
    }
    InitialDesign {
        points: unit.iter().map(|u| space.from_unit(u)).collect(),
        scheme: DesignScheme::Lhs,
    }
}

pub fn random_design<R: Rng + ?Sized>(space: &SearchSpace, n: usize, rng: &mut R) -> InitialDesign {
    InitialDesign {
        points: (0..n).map(|_| sample_uniform(space, rng)).collect(),
        scheme: DesignScheme::Random,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;

    /// Count of points per stratum along one axis, via floor(n * u).
    fn occupancy(space: &SearchSpace, design: &InitialDesign, j: usize) -> Vec<usize> {
        let n = design.size();
        let mut counts = vec![0usize; n];
        for p in &design.points {
            let u = space.dims()[j].to_unit(p.coords()[j]);
            let k = ((n as f64 * u).floor() as usize).min(n - 1);
            counts[k] += 1;
        }
        counts
    }

    #[test]
    fn single_point_design() {
        let space = SearchSpace::uniform_box(3, -1.0, 4.0).unwrap();
        let design = latin_hypercube(&space, 1, &mut RngStream::new(0, 0).rng());
        assert_eq!(design.size(), 1);
        assert!(space.contains(design.points[0].coords()));
    }

    #[test]
    fn default_size_five_dims() {
        assert_eq!(default_size(5), 54);
        let space = SearchSpace::unit_cube(5).unwrap();
        let design = latin_hypercube(&space, default_size(5), &mut RngStream::new(9, 1).rng());
        for j in 0..5 {
            assert!(occupancy(&space, &design, j).iter().all(|&c| c == 1));
        }
    }

    #[test]
    fn ten_points_two_dims_distinct_strata() {
        let space = SearchSpace::new(vec![
            crate::space::DimensionSpec::continuous("a", 0.0, 2.0),
            crate::space::DimensionSpec::continuous("b", -5.0, 5.0),
        ])
        .unwrap();
        let design = latin_hypercube(&space, 10, &mut RngStream::new(4, 4).rng());
        for j in 0..2 {
            let mut idx: Vec<usize> = design
                .points
                .iter()
                .map(|p| (10.0 * space.dims()[j].to_unit(p.coords()[j])).floor() as usize)
                .collect();
            idx.sort_unstable();
            assert_eq!(idx, (0..10).collect::<Vec<_>>());
        }
    }

    #[test]
    fn deterministic() {
        let space = SearchSpace::unit_cube(3).unwrap();
        let a = latin_hypercube(&space, 7, &mut RngStream::new(1, 2).rng());
        let b = latin_hypercube(&space, 7, &mut RngStream::new(1, 2).rng());
        assert_eq!(a, b);
    }
}
