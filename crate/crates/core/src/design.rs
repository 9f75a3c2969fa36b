//! Design-space boxes and Latin-hypercube sampling.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Axis-aligned box in design space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Bounds(Vec<(f64, f64)>);

impl Bounds {
    /// Intervals must be finite with `lo <= hi`; `lo == hi` pins the coordinate.
    pub fn new(intervals: Vec<(f64, f64)>) -> Result<Self> {
        if intervals.is_empty() {
            return Err(Error::InvalidData("bounds need at least one dimension".into()));
        }
        for (i, (lo, hi)) in intervals.iter().enumerate() {
            if !(lo.is_finite() && hi.is_finite()) || lo > hi {
                return Err(Error::InvalidData(format!("invalid interval [{lo}, {hi}] on axis {i}")));
            }
        }
        Ok(Self(intervals))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn intervals(&self) -> &[(f64, f64)] {
        &self.0
    }

    pub fn width(&self, axis: usize) -> f64 {
        self.0[axis].1 - self.0[axis].0
    }

    pub fn is_degenerate(&self) -> bool {
        self.0.iter().any(|(lo, hi)| lo == hi)
    }

    pub fn clamp(&self, x: &mut [f64]) {
        for (v, (lo, hi)) in x.iter_mut().zip(&self.0) {
            *v = v.clamp(*lo, *hi);
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim() && x.iter().zip(&self.0).all(|(v, (lo, hi))| *v >= *lo && *v <= *hi)
    }

    pub fn sample_uniform<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        self.0.iter().map(|(lo, hi)| lo + (hi - lo) * rng.random::<f64>()).collect()
    }
}

/// `count` points with exactly one point in each of `count` equal-width
/// strata along every axis.
pub fn latin_hypercube<R: Rng + ?Sized>(bounds: &Bounds, count: usize, rng: &mut R) -> Vec<Vec<f64>> {
    let mut points = vec![vec![0.0; bounds.dim()]; count];
    for (axis, (lo, hi)) in bounds.intervals().iter().enumerate() {
        let mut strata: Vec<usize> = (0..count).collect();
        strata.shuffle(rng);
        for (p, s) in points.iter_mut().zip(strata) {
            let u = (s as f64 + rng.random::<f64>()) / count as f64;
            p[axis] = lo + (hi - lo) * u;
        }
    }
    points
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;

    #[test]
    fn one_point_per_stratum() {
        let b = Bounds::new(vec![(0.0, 1.0), (-5.0, 5.0)]).unwrap();
        let pts = latin_hypercube(&b, 10, &mut substream(3, 0));
        for axis in 0..2 {
            let (lo, _) = b.intervals()[axis];
            let mut seen: Vec<usize> = pts
                .iter()
                .map(|p| (((p[axis] - lo) / b.width(axis)) * 10.0).floor() as usize)
                .collect();
            seen.sort();
            assert_eq!(seen, (0..10).collect::<Vec<_>>());
        }
        assert!(pts.iter().all(|p| b.contains(p)));
    }

    #[test]
    fn rejects_inverted_interval() {
        assert!(Bounds::new(vec![(1.0, 0.0)]).is_err());
        assert!(Bounds::new(vec![(1.0, 1.0)]).unwrap().is_degenerate());
    }
}
