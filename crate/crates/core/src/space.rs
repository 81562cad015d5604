//! Search-space definition and design points.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DimKind {
    Continuous,
    Integer,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DimensionSpec {
    pub name: String,
    pub kind: DimKind,
    pub lower: f64,
    pub upper: f64,
}

impl DimensionSpec {
    pub fn continuous(name: impl Into<String>, lower: f64, upper: f64) -> Self {
        Self {
            name: name.into(),
            kind: DimKind::Continuous,
            lower,
            upper,
        }
    }

    pub fn integer(name: impl Into<String>, lower: i64, upper: i64) -> Self {
        Self {
            name: name.into(),
            kind: DimKind::Integer,
            lower: lower as f64,
            upper: upper as f64,
        }
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    /// Maps a unit-interval coordinate onto this dimension.
    ///
    /// Integer dimensions spread the unit interval over `[lower - 0.5,
    /// upper + 0.5]` before rounding so every integer gets equal mass.
    pub fn from_unit(&self, u: f64) -> f64 {
        match self.kind {
            DimKind::Continuous => (self.lower + u * self.width()).clamp(self.lower, self.upper),
            DimKind::Integer => {
                let v = (self.lower - 0.5) + u * (self.width() + 1.0);
                v.round().clamp(self.lower, self.upper)
            }
        }
    }

    pub fn to_unit(&self, x: f64) -> f64 {
        (x - self.lower) / self.width()
    }

    /// Rounds integer coordinates and clamps into bounds.
    pub fn snap(&self, x: f64) -> f64 {
        let x = match self.kind {
            DimKind::Continuous => x,
            DimKind::Integer => x.round(),
        };
        x.clamp(self.lower, self.upper)
    }
}

/// An ordered box of continuous and integer dimensions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchSpace {
    dims: Vec<DimensionSpec>,
}

impl SearchSpace {
    pub fn new(dims: Vec<DimensionSpec>) -> Result<Self> {
        if dims.is_empty() {
            return Err(Error::InvalidSpace("at least one dimension is required".into()));
        }
        for dim in &dims {
            if !(dim.lower.is_finite() && dim.upper.is_finite()) || dim.lower >= dim.upper {
                return Err(Error::InvalidSpace(format!(
                    "dimension `{}` needs finite bounds with lower < upper, got [{}, {}]",
                    dim.name, dim.lower, dim.upper
                )));
            }
            if dim.kind == DimKind::Integer
                && (dim.lower.fract() != 0.0 || dim.upper.fract() != 0.0)
            {
                return Err(Error::InvalidSpace(format!(
                    "integer dimension `{}` has non-integral bounds [{}, {}]",
                    dim.name, dim.lower, dim.upper
                )));
            }
        }
        Ok(Self { dims })
    }

    /// `[lower, upper]^d` with continuous dimensions named `x1..xd`.
    pub fn uniform_box(d: usize, lower: f64, upper: f64) -> Result<Self> {
        Self::new(
            (0..d)
                .map(|i| DimensionSpec::continuous(format!("x{}", i + 1), lower, upper))
                .collect(),
        )
    }

    pub fn unit_cube(d: usize) -> Result<Self> {
        Self::uniform_box(d, 0.0, 1.0)
    }

    pub fn dims(&self) -> &[DimensionSpec] {
        &self.dims
    }

    pub fn dim(&self) -> usize {
        self.dims.len()
    }

    pub fn contains(&self, coords: &[f64]) -> bool {
        coords.len() == self.dim()
            && self
                .dims
                .iter()
                .zip(coords)
                .all(|(d, &x)| x >= d.lower && x <= d.upper)
    }

    pub fn check(&self, coords: &[f64]) -> Result<()> {
        if coords.len() != self.dim() {
            return Err(Error::Shape {
                expected: self.dim(),
                actual: coords.len(),
            });
        }
        if let Some((dim, &x)) = self
            .dims
            .iter()
            .zip(coords)
            .find(|(d, &x)| !(x >= d.lower && x <= d.upper))
        {
            return Err(Error::Domain {
                point: coords.to_vec(),
                reason: format!("{} = {x} not in [{}, {}]", dim.name, dim.lower, dim.upper),
            });
        }
        Ok(())
    }

    pub fn to_unit(&self, coords: &[f64]) -> Vec<f64> {
        self.dims.iter().zip(coords).map(|(d, &x)| d.to_unit(x)).collect()
    }

    pub fn from_unit(&self, unit: &[f64]) -> DesignPoint {
        DesignPoint(self.dims.iter().zip(unit).map(|(d, &u)| d.from_unit(u)).collect())
    }

    pub fn snap(&self, coords: &[f64]) -> DesignPoint {
        DesignPoint(self.dims.iter().zip(coords).map(|(d, &x)| d.snap(x)).collect())
    }
}

/// A point of the search space. Integer coordinates are stored as integral
/// reals.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DesignPoint(pub Vec<f64>);

impl DesignPoint {
    pub fn new(coords: Vec<f64>) -> Self {
        Self(coords)
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    /// Bitwise coordinate equality, the identity used by the archive.
    pub fn same_as(&self, other: &[f64]) -> bool {
        self.0.len() == other.len()
            && self
                .0
                .iter()
                .zip(other)
                .all(|(a, b)| a.to_bits() == b.to_bits() || (*a == 0.0 && *b == 0.0))
    }
}

impl From<Vec<f64>> for DesignPoint {
    fn from(coords: Vec<f64>) -> Self {
        Self(coords)
    }
}

/// Draws one point uniformly from the box.
pub fn sample_uniform<R: Rng + ?Sized>(space: &SearchSpace, rng: &mut R) -> DesignPoint {
    let unit: Vec<f64> = (0..space.dim()).map(|_| rng.random::<f64>()).collect();
    space.from_unit(&unit)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;

    #[test]
    fn rejects_bad_spaces() {
        assert!(SearchSpace::new(vec![]).is_err());
        assert!(SearchSpace::new(vec![DimensionSpec::continuous("a", 1.0, 1.0)]).is_err());
        assert!(SearchSpace::new(vec![DimensionSpec::continuous("a", 2.0, 1.0)]).is_err());
        let bad_int = DimensionSpec {
            name: "n".into(),
            kind: DimKind::Integer,
            lower: 0.5,
            upper: 3.0,
        };
        assert!(SearchSpace::new(vec![bad_int]).is_err());
    }

    #[test]
    fn uniform_draws_stay_in_unit_box() {
        let space = SearchSpace::unit_cube(6).unwrap();
        let mut rng = RngStream::new(1, 0).rng();
        for _ in 0..1000 {
            let p = sample_uniform(&space, &mut rng);
            assert!(space.contains(p.coords()));
        }
    }

    #[test]
    fn integer_dimension_frequencies() {
        let space = SearchSpace::new(vec![DimensionSpec::integer("k", 1, 10)]).unwrap();
        let mut rng = RngStream::new(11, 2).rng();
        let mut counts = [0usize; 10];
        let n = 10_000;
        for _ in 0..n {
            let v = sample_uniform(&space, &mut rng).0[0];
            assert_eq!(v.fract(), 0.0);
            assert!((1.0..=10.0).contains(&v));
            counts[v as usize - 1] += 1;
        }
        // binomial(n, 0.1): sd = sqrt(n p (1-p)) = 30
        let sd = (n as f64 * 0.1 * 0.9).sqrt();
        for c in counts {
            assert!((c as f64 - 1000.0).abs() <= 5.0 * sd, "count {c}");
        }
    }

    #[test]
    fn fresh_streams_repeat_points() {
        let space = SearchSpace::uniform_box(4, -2.0, 3.0).unwrap();
        let a = sample_uniform(&space, &mut RngStream::new(5, 9).rng());
        let b = sample_uniform(&space, &mut RngStream::new(5, 9).rng());
        assert_eq!(a, b);
    }

    #[test]
    fn check_reports_shape_and_domain() {
        let space = SearchSpace::unit_cube(2).unwrap();
        assert!(matches!(space.check(&[0.1]), Err(Error::Shape { .. })));
        assert!(matches!(space.check(&[0.1, 1.5]), Err(Error::Domain { .. })));
        assert!(space.check(&[0.0, 1.0]).is_ok());
    }
}
