//! Expected hypervolume improvement (EHI) and its preference-weighted
//! variant (PEHI), both estimated by Monte Carlo, plus the inner maximiser.
//!
//! For a candidate `x` PEHI draws `y ~ N(mu(x), sigma^2(x))` per objective and
//! accumulates
//!
//! ```text
//! s_x * Σ_{k : y ⪰ corner_k} vol(c_k) * Π_{j : y_j ⪰ corner_k} (1 - s_j)
//! ```
//!
//! over the cells of the grid of `D ∪ {y}`, where `s_x` and `s_j` are the
//! probabilities that the candidate and the archive points satisfy the
//! preference constraints. With every probability equal to one the sum is the
//! plain hypervolume improvement, so EHI is the same estimator with unit
//! probabilities.

use rand_distr::{Distribution, StandardNormal};

use crate::cone::ConeBasis;
use crate::constraint_prob::{prob_satisfies, ProbEstimate, DEFAULT_PROB_SAMPLES};
use crate::design::{latin_hypercube, Bounds};
use crate::error::{Error, Result};
use crate::gp::GpModel;
use crate::hypervolume::{improvement_by_rebuild, ImprovementGrid};
use crate::rng;

pub const DEFAULT_ACQUISITION_SAMPLES: usize = 500;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AcquisitionKind {
    Ehi,
    Pehi,
}

/// How the per-sample cell sum is evaluated.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum CellEvaluation {
    /// Partial-sum tables built once per context (falls back to rebuilding
    /// when the tables would be too large).
    #[default]
    Tabulated,
    /// Rebuild the grid of `D ∪ {y}` for every sample.
    Rebuild,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AcquisitionSettings {
    /// Objective samples per acquisition evaluation.
    pub acquisition_samples: usize,
    /// Gradient samples per constraint probability.
    pub prob_samples: usize,
    pub cell_evaluation: CellEvaluation,
}

impl Default for AcquisitionSettings {
    fn default() -> Self {
        Self {
            acquisition_samples: DEFAULT_ACQUISITION_SAMPLES,
            prob_samples: DEFAULT_PROB_SAMPLES,
            cell_evaluation: CellEvaluation::default(),
        }
    }
}

/// Monte-Carlo estimate with its standard error.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AcqEstimate {
    pub value: f64,
    pub std_error: f64,
    /// Constraint probability at the candidate (`None` for EHI).
    pub s_x: Option<f64>,
}

/// Everything an acquisition evaluation needs, fixed for one BO iteration.
#[derive(Clone, Debug)]
pub struct AcquisitionContext {
    models: Vec<GpModel>,
    observations: Vec<Vec<f64>>,
    reference: Vec<f64>,
    bases: Vec<ConeBasis>,
    settings: AcquisitionSettings,
    archive_probs: Vec<f64>,
    ehi_grid: Option<ImprovementGrid>,
    pehi_grid: Option<ImprovementGrid>,
}

impl AcquisitionContext {
    /// `observations` are objective vectors (maximisation convention) of the
    /// archive in the same order as the models' training rows. Archive
    /// probabilities are estimated once here, each from its own stream of `key`.
    pub fn new(
        models: Vec<GpModel>,
        observations: Vec<Vec<f64>>,
        reference: Vec<f64>,
        bases: Vec<ConeBasis>,
        settings: AcquisitionSettings,
        key: u64,
    ) -> Result<Self> {
        if models.is_empty() {
            return Err(Error::Contract("at least one model is required".into()));
        }
        if models.len() != reference.len() {
            return Err(Error::Contract(format!(
                "{} models for a {}-objective reference point",
                models.len(),
                reference.len()
            )));
        }
        if settings.acquisition_samples == 0 || settings.prob_samples == 0 {
            return Err(Error::Contract("sample counts must be positive".into()));
        }
        let archive_probs = if bases.is_empty() {
            vec![1.0; observations.len()]
        } else {
            let inputs = models[0].inputs();
            if inputs.nrows() != observations.len() {
                return Err(Error::Contract("models and observations disagree on the archive size".into()));
            }
            (0..observations.len())
                .map(|j| {
                    let x: Vec<f64> = inputs.row(j).iter().copied().collect();
                    prob_satisfies(&models, &bases, &x, settings.prob_samples, rng::derive_key(key, j as u64))
                        .map(|p| p.value)
                })
                .collect::<Result<Vec<_>>>()?
        };
        let mut ctx = Self {
            models,
            observations,
            reference,
            bases,
            settings,
            archive_probs,
            ehi_grid: None,
            pehi_grid: None,
        };
        ctx.rebuild_grids()?;
        Ok(ctx)
    }

    /// Replaces the cached archive probabilities.
    pub fn with_archive_probs(mut self, probs: Vec<f64>) -> Result<Self> {
        if probs.len() != self.observations.len() {
            return Err(Error::Contract("one probability per archive point is required".into()));
        }
        if probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::Contract("probabilities must lie in [0, 1]".into()));
        }
        self.archive_probs = probs;
        self.rebuild_grids()?;
        Ok(self)
    }

    fn rebuild_grids(&mut self) -> Result<()> {
        let (ehi, pehi) = match self.settings.cell_evaluation {
            CellEvaluation::Rebuild => (None, None),
            CellEvaluation::Tabulated => {
                let zeros = vec![0.0; self.observations.len()];
                let misses: Vec<f64> = self.archive_probs.iter().map(|p| 1.0 - p).collect();
                (
                    ImprovementGrid::new(&self.observations, &zeros, &self.reference)?,
                    ImprovementGrid::new(&self.observations, &misses, &self.reference)?,
                )
            }
        };
        self.ehi_grid = ehi;
        self.pehi_grid = pehi;
        Ok(())
    }

    pub fn models(&self) -> &[GpModel] {
        &self.models
    }

    pub fn bases(&self) -> &[ConeBasis] {
        &self.bases
    }

    pub fn reference(&self) -> &[f64] {
        &self.reference
    }

    pub fn archive_probs(&self) -> &[f64] {
        &self.archive_probs
    }

    pub fn settings(&self) -> &AcquisitionSettings {
        &self.settings
    }

    /// Monte-Carlo mean of `improvement(y)` over posterior draws of `y`;
    /// the draws come from substream 1 of `key`.
    fn mean_improvement(&self, x: &[f64], weights: Weights, key: u64) -> Result<(f64, f64)> {
        let moments = self
            .models
            .iter()
            .map(|m| m.posterior(x).map(|(mu, var)| (mu, var.sqrt())))
            .collect::<Result<Vec<_>>>()?;
        let grid = match weights {
            Weights::Unit => self.ehi_grid.as_ref(),
            Weights::Archive => self.pehi_grid.as_ref(),
        };
        let rebuild_weights: Vec<f64> = match weights {
            Weights::Unit => vec![0.0; self.observations.len()],
            Weights::Archive => self.archive_probs.iter().map(|p| 1.0 - p).collect(),
        };
        let mut r = rng::substream(key, 1);
        let samples = self.settings.acquisition_samples;
        let mut y = vec![0.0; moments.len()];
        let (mut sum, mut sum_sq) = (0.0, 0.0);
        for _ in 0..samples {
            for (yi, (mu, sd)) in y.iter_mut().zip(&moments) {
                let e: f64 = StandardNormal.sample(&mut r);
                *yi = mu + sd * e;
            }
            let v = match grid {
                Some(g) => g.improvement(&y),
                None => improvement_by_rebuild(&self.observations, &rebuild_weights, &self.reference, &y)?,
            };
            sum += v;
            sum_sq += v * v;
        }
        let n = samples as f64;
        let mean = sum / n;
        let var = if samples > 1 { ((sum_sq - n * mean * mean) / (n - 1.0)).max(0.0) } else { 0.0 };
        Ok((mean, (var / n).sqrt()))
    }

    /// Expected hypervolume improvement at `x`.
    pub fn ehi(&self, x: &[f64], key: u64) -> Result<f64> {
        Ok(self.ehi_estimate(x, key)?.value)
    }

    pub fn ehi_estimate(&self, x: &[f64], key: u64) -> Result<AcqEstimate> {
        let (value, std_error) = self.mean_improvement(x, Weights::Unit, key)?;
        Ok(AcqEstimate { value, std_error, s_x: None })
    }

    /// Constraint probability at `x`, drawn from a stream of `key` that is
    /// independent of the objective samples.
    pub fn prob_at(&self, x: &[f64], key: u64) -> Result<ProbEstimate> {
        prob_satisfies(&self.models, &self.bases, x, self.settings.prob_samples, rng::derive_key(key, u64::MAX))
    }

    /// Preference-weighted expected hypervolume improvement at `x`.
    pub fn pehi(&self, x: &[f64], key: u64) -> Result<f64> {
        Ok(self.pehi_estimate(x, key)?.value)
    }

    pub fn pehi_estimate(&self, x: &[f64], key: u64) -> Result<AcqEstimate> {
        let s_x = self.prob_at(x, key)?.value;
        self.pehi_given_prob(x, s_x, key)
    }

    /// PEHI with the candidate's constraint probability supplied by the caller.
    pub fn pehi_given_prob(&self, x: &[f64], s_x: f64, key: u64) -> Result<AcqEstimate> {
        if !(0.0..=1.0).contains(&s_x) {
            return Err(Error::Contract(format!("probability {s_x} outside [0, 1]")));
        }
        if s_x == 0.0 {
            return Ok(AcqEstimate { value: 0.0, std_error: 0.0, s_x: Some(0.0) });
        }
        let (mean, se) = self.mean_improvement(x, Weights::Archive, key)?;
        Ok(AcqEstimate {
            value: s_x * mean,
            std_error: s_x * se,
            s_x: Some(s_x),
        })
    }

    pub fn evaluate(&self, kind: AcquisitionKind, x: &[f64], key: u64) -> Result<AcqEstimate> {
        match kind {
            AcquisitionKind::Ehi => self.ehi_estimate(x, key),
            AcquisitionKind::Pehi => self.pehi_estimate(x, key),
        }
    }
}

#[derive(Clone, Copy)]
enum Weights {
    Unit,
    Archive,
}

/// Evaluation budget of the inner maximiser.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SearchBudget {
    /// Latin-hypercube screening candidates.
    pub screen_count: usize,
    /// Pattern-search refinements started from the best screened candidates.
    pub local_restarts: usize,
    /// Evaluations per refinement.
    pub local_evals: usize,
}

impl Default for SearchBudget {
    fn default() -> Self {
        Self {
            screen_count: 200,
            local_restarts: 3,
            local_evals: 50,
        }
    }
}

/// Where the maximiser may look.
#[derive(Clone, Debug, PartialEq)]
pub enum SearchSpace {
    Box(Bounds),
    /// A finite set of admissible points (tabular data).
    Candidates(Vec<Vec<f64>>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Candidate {
    pub x: Vec<f64>,
    pub value: f64,
    pub s_x: Option<f64>,
}

/// Result of a maximisation: every evaluated point, best first.
#[derive(Clone, Debug, PartialEq)]
pub struct Ranking {
    pub candidates: Vec<Candidate>,
}

impl Ranking {
    pub fn best(&self) -> &Candidate {
        &self.candidates[0]
    }
}

/// Maximises `f` over `space`; deterministic given `key`.
///
/// Box spaces are screened with a Latin hypercube, then the best
/// `local_restarts` screened points are refined by compass search with a
/// step that halves after every unsuccessful sweep. Candidate spaces are
/// evaluated exhaustively.
pub fn maximize<F>(f: F, space: &SearchSpace, budget: &SearchBudget, key: u64) -> Result<Ranking>
where
    F: Fn(&[f64]) -> Result<AcqEstimate>,
{
    let mut evaluated: Vec<Candidate> = Vec::new();
    let mut eval = |x: Vec<f64>, evaluated: &mut Vec<Candidate>| -> Result<f64> {
        let est = f(&x)?;
        evaluated.push(Candidate { x, value: est.value, s_x: est.s_x });
        Ok(est.value)
    };
    match space {
        SearchSpace::Candidates(points) => {
            if points.is_empty() {
                return Err(Error::Contract("no candidates to search".into()));
            }
            for p in points {
                eval(p.clone(), &mut evaluated)?;
            }
        }
        SearchSpace::Box(bounds) => {
            if budget.screen_count == 0 {
                return Err(Error::Contract("screening budget must be positive".into()));
            }
            let mut r = rng::substream(key, 3);
            for p in latin_hypercube(bounds, budget.screen_count, &mut r) {
                eval(p, &mut evaluated)?;
            }
            let mut order: Vec<usize> = (0..evaluated.len()).collect();
            order.sort_by(|&a, &b| evaluated[b].value.total_cmp(&evaluated[a].value));
            let starts: Vec<Candidate> = order
                .iter()
                .take(budget.local_restarts)
                .map(|&i| evaluated[i].clone())
                .collect();
            for start in starts {
                compass_search(&mut eval, &mut evaluated, bounds, start, budget.local_evals)?;
            }
        }
    }
    // stable: ties keep evaluation order
    evaluated.sort_by(|a, b| b.value.total_cmp(&a.value));
    evaluated.dedup_by(|a, b| a.x == b.x);
    Ok(Ranking { candidates: evaluated })
}

fn compass_search<E>(
    eval: &mut E,
    evaluated: &mut Vec<Candidate>,
    bounds: &Bounds,
    start: Candidate,
    max_evals: usize,
) -> Result<()>
where
    E: FnMut(Vec<f64>, &mut Vec<Candidate>) -> Result<f64>,
{
    let dim = bounds.dim();
    let mut step: Vec<f64> = (0..dim).map(|d| 0.05 * bounds.width(d)).collect();
    let mut x = start.x;
    let mut fx = start.value;
    let mut used = 0;
    if step.iter().all(|s| *s == 0.0) {
        return Ok(());
    }
    while used < max_evals {
        let mut improved = false;
        'axes: for d in 0..dim {
            if step[d] == 0.0 {
                continue;
            }
            for sign in [1.0, -1.0] {
                if used >= max_evals {
                    break 'axes;
                }
                let mut trial = x.clone();
                trial[d] += sign * step[d];
                bounds.clamp(&mut trial);
                if trial == x {
                    continue;
                }
                let ft = eval(trial.clone(), evaluated)?;
                used += 1;
                if ft > fx {
                    x = trial;
                    fx = ft;
                    improved = true;
                    break;
                }
            }
        }
        if !improved {
            step.iter_mut().for_each(|s| *s *= 0.5);
            if step.iter().zip(0..dim).all(|(s, d)| *s <= 1e-9 * bounds.width(d).max(1e-300)) {
                break;
            }
        }
    }
    Ok(())
}

/// Maximises the context's acquisition over `space`.
pub fn maximize_acquisition(
    ctx: &AcquisitionContext,
    kind: AcquisitionKind,
    space: &SearchSpace,
    budget: &SearchBudget,
    key: u64,
) -> Result<Ranking> {
    if kind == AcquisitionKind::Pehi && ctx.bases().is_empty() {
        return Err(Error::Contract("PEHI needs at least one preference basis".into()));
    }
    // one evaluation key for all candidates: common random numbers across x
    let eval_key = rng::derive_key(key, 1);
    maximize(|x| ctx.evaluate(kind, x, eval_key), space, budget, key)
}
