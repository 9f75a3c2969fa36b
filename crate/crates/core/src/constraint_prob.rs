//! Monte-Carlo probability that a design point satisfies preference-order
//! constraints under the GP gradient posteriors.

use rand_distr::{Distribution, StandardNormal};

use crate::cone::{ConeBasis, SignTolerance};
use crate::error::{Error, Result};
use crate::gp::{GpModel, GradientPosterior};
use crate::rng;

pub const DEFAULT_PROB_SAMPLES: usize = 1000;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProbEstimate {
    pub value: f64,
    pub count: usize,
    pub num_samples: usize,
    pub std_error: f64,
}

impl ProbEstimate {
    fn from_count(count: usize, num_samples: usize) -> Self {
        let value = count as f64 / num_samples as f64;
        Self {
            value,
            count,
            num_samples,
            std_error: (value * (1.0 - value) / num_samples as f64).sqrt(),
        }
    }
}

/// Estimates `Pr(x satisfies every basis | data)` from `samples` joint draws
/// of the objective gradients.
///
/// Each round draws one full gradient per objective, assembles the per-axis
/// vectors of partial derivatives and counts the round when each of them is
/// in the perpendicular set of every basis. Draws come from substream 0 of
/// `key` in a fixed order, so equal keys give equal draws regardless of the
/// bases passed.
pub fn prob_satisfies(
    models: &[GpModel],
    bases: &[ConeBasis],
    x: &[f64],
    samples: usize,
    key: u64,
) -> Result<ProbEstimate> {
    if models.is_empty() {
        return Err(Error::Contract("at least one model is required".into()));
    }
    let posteriors = models
        .iter()
        .map(|m| m.gradient_posterior(x))
        .collect::<Result<Vec<_>>>()?;
    prob_from_posteriors(&posteriors, bases, samples, key)
}

/// [`prob_satisfies`] with the gradient posteriors already computed.
pub fn prob_from_posteriors(
    posteriors: &[GradientPosterior],
    bases: &[ConeBasis],
    samples: usize,
    key: u64,
) -> Result<ProbEstimate> {
    if bases.is_empty() {
        return Err(Error::Contract("at least one preference basis is required".into()));
    }
    if samples == 0 {
        return Err(Error::Contract("number of samples must be positive".into()));
    }
    let m = posteriors.len();
    if bases.iter().any(|b| b.num_objectives() != m) {
        return Err(Error::Contract(format!(
            "bases do not match the {m} objective models"
        )));
    }
    let n = posteriors[0].dim();
    if posteriors.iter().any(|p| p.dim() != n) {
        return Err(Error::Contract("models disagree on the design dimension".into()));
    }

    let mut r = rng::substream(key, 0);
    let mut z = vec![0.0; n];
    let mut u = vec![0.0; n];
    // grads[i * n + j] = d f_i / d x_j
    let mut grads = vec![0.0; m * n];
    let mut v = vec![0.0; m];
    let tol = SignTolerance::default();
    let mut count = 0;
    for _ in 0..samples {
        for (i, post) in posteriors.iter().enumerate() {
            for zj in z.iter_mut() {
                *zj = StandardNormal.sample(&mut r);
            }
            post.transform_into(&z, &mut u);
            grads[i * n..(i + 1) * n].copy_from_slice(&u);
        }
        let passes = (0..n).all(|j| {
            for (i, vi) in v.iter_mut().enumerate() {
                *vi = grads[i * n + j];
            }
            bases.iter().all(|b| b.in_s_perp_with(&v, tol))
        });
        if passes {
            count += 1;
        }
    }
    Ok(ProbEstimate::from_count(count, samples))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cone::PreferenceTuple;
    use nalgebra::{DMatrix, DVector};

    fn basis(indices: Vec<usize>, m: usize) -> ConeBasis {
        ConeBasis::build(&PreferenceTuple::new(indices, m).unwrap())
    }

    fn fixed(mean: &[f64], sd: f64) -> GradientPosterior {
        let n = mean.len();
        GradientPosterior::new(DVector::from_column_slice(mean), DMatrix::identity(n, n) * (sd * sd)).unwrap()
    }

    #[test]
    fn deterministic_gradients_give_zero_or_one() {
        let b = vec![basis(vec![0, 1], 2)];
        // n = 1: df0/dx = 1, df1/dx = -1 -> v = (1, -1) passes
        let pass = [fixed(&[1.0], 0.0), fixed(&[-1.0], 0.0)];
        assert_eq!(prob_from_posteriors(&pass, &b, 50, 1).unwrap().value, 1.0);
        let fail = [fixed(&[1.0], 0.0), fixed(&[1.0], 0.0)];
        assert_eq!(prob_from_posteriors(&fail, &b, 50, 1).unwrap().value, 0.0);
    }

    #[test]
    fn near_deterministic_limit() {
        let b = vec![basis(vec![0, 1], 2)];
        // v = (1, -1) sits on the boundary of the perpendicular set (b = (1, 0));
        // once the spread is below the sign tolerance every draw passes.
        let posts = [fixed(&[1.0], 1e-12), fixed(&[-1.0], 1e-12)];
        assert_eq!(prob_from_posteriors(&posts, &b, 2000, 3).unwrap().value, 1.0);
        let posts = [fixed(&[1.0], 1e-6), fixed(&[-2.0], 1e-6)];
        assert_eq!(prob_from_posteriors(&posts, &b, 2000, 3).unwrap().value, 1.0);
    }

    #[test]
    fn estimate_is_a_fraction_and_reproducible() {
        let b = vec![basis(vec![0, 1], 2)];
        let posts = [fixed(&[0.3, -0.2], 1.0), fixed(&[-0.5, 0.1], 1.0)];
        let a = prob_from_posteriors(&posts, &b, 777, 42).unwrap();
        let c = prob_from_posteriors(&posts, &b, 777, 42).unwrap();
        assert_eq!(a, c);
        assert!((0.0..=1.0).contains(&a.value));
        assert_eq!(a.value * 777.0, a.count as f64);
    }

    #[test]
    fn adding_a_basis_never_increases_the_count() {
        let posts = [fixed(&[0.3, -0.2], 1.0), fixed(&[-0.5, 0.1], 1.0), fixed(&[0.0, 0.4], 1.0)];
        let one = vec![basis(vec![0, 1], 3)];
        let two = vec![basis(vec![0, 1], 3), basis(vec![2, 1], 3)];
        let p1 = prob_from_posteriors(&posts, &one, 3000, 8).unwrap();
        let p2 = prob_from_posteriors(&posts, &two, 3000, 8).unwrap();
        assert!(p2.count <= p1.count);
    }

    #[test]
    fn empty_bases_is_a_contract_error() {
        let posts = [fixed(&[1.0], 0.0), fixed(&[-1.0], 0.0)];
        assert!(matches!(prob_from_posteriors(&posts, &[], 10, 0), Err(Error::Contract(_))));
    }
}
