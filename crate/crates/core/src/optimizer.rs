//! The outer optimisation loop: initial design, per-iteration GP fits and
//! acquisition maximisation, evaluation with retries, and the run-level merge
//! of separately constrained runs.
//!
//! Objectives are negated at the boundary when minimised, so everything below
//! [`run`] maximises. Records and Pareto sets are reported in user units.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::acquisition::{
    maximize_acquisition, AcquisitionContext, AcquisitionKind, AcquisitionSettings, SearchBudget, SearchSpace,
};
use crate::cone::{satisfies_preference, ConeBasis, PreferenceTuple, SignTolerance};
use crate::constraint_prob::prob_satisfies;
use crate::design::latin_hypercube;
use crate::error::{Error, Result};
use crate::gp::{FitOptions, GpModel, KernelSpec};
use crate::hypervolume::{default_reference, dominant_indices, hypervolume};
use crate::rng;

/// Attempts per iteration: the best candidate plus this many fallbacks.
pub const MAX_RETRIES: usize = 3;

/// A black-box vector-valued function.
pub trait Objective {
    fn num_inputs(&self) -> usize;

    fn num_objectives(&self) -> usize;

    fn evaluate(&self, x: &[f64]) -> Result<Vec<f64>>;

    /// `n x m` matrix of partial derivatives, when known in closed form.
    fn analytic_gradient(&self, _x: &[f64]) -> Option<DMatrix<f64>> {
        None
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    #[serde(alias = "maximize")]
    Maximise,
    #[serde(alias = "minimize")]
    Minimise,
}

impl Direction {
    fn sign(self) -> f64 {
        match self {
            Direction::Maximise => 1.0,
            Direction::Minimise => -1.0,
        }
    }
}

fn to_internal(y: &[f64], directions: &[Direction]) -> Vec<f64> {
    y.iter().zip(directions).map(|(v, d)| v * d.sign()).collect()
}

/// How several preference tuples are combined.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConstraintMode {
    /// One run; a point must satisfy every tuple at once.
    #[default]
    Conjunction,
    /// One run per tuple, with the results merged afterwards.
    Merge,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub directions: Vec<Direction>,
    /// Preference tuples driving the acquisition; empty means plain EHI.
    pub preferences: Vec<Vec<usize>>,
    /// Tuples used for the compliance report (defaults to `preferences`).
    pub compliance_preferences: Option<Vec<Vec<usize>>>,
    pub iterations: usize,
    /// Defaults to `max(5, 2n)`.
    pub initial_design: Option<usize>,
    pub seed: u64,
    /// Fixed reference point in user units; recomputed from the data when absent.
    pub reference_point: Option<Vec<f64>>,
    pub acquisition: AcquisitionSettings,
    pub search: SearchBudget,
    pub constraint_mode: ConstraintMode,
    pub gp_restarts: usize,
    pub allow_degenerate_bounds: bool,
}

impl RunConfig {
    pub fn new(directions: Vec<Direction>, iterations: usize, seed: u64) -> Self {
        Self {
            directions,
            preferences: Vec::new(),
            compliance_preferences: None,
            iterations,
            initial_design: None,
            seed,
            reference_point: None,
            acquisition: AcquisitionSettings::default(),
            search: SearchBudget::default(),
            constraint_mode: ConstraintMode::default(),
            gp_restarts: FitOptions::default().restarts,
            allow_degenerate_bounds: false,
        }
    }

    pub fn initial_size(&self, num_inputs: usize) -> usize {
        self.initial_design.unwrap_or((2 * num_inputs).max(5))
    }

    fn compliance_tuples(&self) -> &[Vec<usize>] {
        self.compliance_preferences.as_deref().unwrap_or(&self.preferences)
    }

    pub fn validate(&self, objective: &dyn Objective, space: &SearchSpace) -> Result<()> {
        let m = objective.num_objectives();
        let n = objective.num_inputs();
        if self.iterations == 0 {
            return Err(Error::Config("iterations must be at least 1".into()));
        }
        if self.initial_size(n) < 2 {
            return Err(Error::Config("initial design needs at least 2 points".into()));
        }
        if self.directions.len() != m {
            return Err(Error::Config(format!("{} directions for {m} objectives", self.directions.len())));
        }
        for tuple in self.preferences.iter().chain(self.compliance_tuples()) {
            PreferenceTuple::new(tuple.clone(), m).map_err(|e| Error::Config(e.to_string()))?;
        }
        if self.constraint_mode == ConstraintMode::Merge && self.preferences.is_empty() {
            return Err(Error::Config("merge mode needs at least one preference tuple".into()));
        }
        if self.constraint_mode == ConstraintMode::Merge && self.iterations < self.preferences.len() {
            return Err(Error::Config("merge mode needs at least one iteration per tuple".into()));
        }
        if let Some(z) = &self.reference_point {
            if z.len() != m || z.iter().any(|v| !v.is_finite()) {
                return Err(Error::Config(format!("reference point must hold {m} finite values")));
            }
        }
        if self.acquisition.acquisition_samples == 0 || self.acquisition.prob_samples == 0 {
            return Err(Error::Config("sample counts must be positive".into()));
        }
        if self.search.screen_count == 0 {
            return Err(Error::Config("screen_count must be positive".into()));
        }
        if self.gp_restarts == 0 {
            return Err(Error::Config("gp_restarts must be positive".into()));
        }
        match space {
            SearchSpace::Box(b) => {
                if b.dim() != n {
                    return Err(Error::Config(format!("bounds have {} axes for {n} inputs", b.dim())));
                }
                if b.is_degenerate() && !self.allow_degenerate_bounds {
                    return Err(Error::Config("degenerate bounds need allow_degenerate_bounds".into()));
                }
            }
            SearchSpace::Candidates(rows) => {
                if rows.len() < self.initial_size(n) {
                    return Err(Error::Config(format!(
                        "{} candidate rows cannot cover an initial design of {}",
                        rows.len(),
                        self.initial_size(n)
                    )));
                }
                if rows.iter().any(|r| r.len() != n) {
                    return Err(Error::Config("candidate rows do not match the input dimension".into()));
                }
            }
        }
        Ok(())
    }

    fn bases(&self, m: usize) -> Result<Vec<ConeBasis>> {
        build_bases(&self.preferences, m)
    }
}

fn build_bases(tuples: &[Vec<usize>], m: usize) -> Result<Vec<ConeBasis>> {
    tuples
        .iter()
        .map(|t| PreferenceTuple::new(t.clone(), m).map(|t| ConeBasis::build(&t)))
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Initial,
    Search,
}

#[derive(Clone, Debug, PartialEq)]
pub struct IterationRecord {
    /// Position in the archive.
    pub t: usize,
    pub phase: Phase,
    pub x: Vec<f64>,
    /// Observed objectives in user units.
    pub y: Vec<f64>,
    pub s_x: Option<f64>,
    pub acquisition: Option<f64>,
    /// Hypervolume of the archive up to this record, against the final reference point.
    pub hv: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvaluationFailure {
    pub t: usize,
    pub x: Vec<f64>,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "lowercase")]
pub enum RunStatus {
    Completed,
    /// Every candidate row was evaluated before the budget ran out.
    Exhausted,
    Aborted { reason: String },
}

#[derive(Clone, Debug)]
pub struct RunTrace {
    pub seed: u64,
    pub directions: Vec<Direction>,
    pub preferences: Vec<Vec<usize>>,
    pub records: Vec<IterationRecord>,
    /// Seconds spent producing each record; kept apart so records stay reproducible.
    pub wall_times: Vec<f64>,
    pub failures: Vec<EvaluationFailure>,
    /// Reference point in user units.
    pub reference_point: Vec<f64>,
    pub status: RunStatus,
}

impl RunTrace {
    pub fn archive_x(&self) -> Vec<Vec<f64>> {
        self.records.iter().map(|r| r.x.clone()).collect()
    }

    pub fn archive_y(&self) -> Vec<Vec<f64>> {
        self.records.iter().map(|r| r.y.clone()).collect()
    }

    pub fn final_hypervolume(&self) -> f64 {
        self.records.last().map_or(0.0, |r| r.hv)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParetoPoint {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    /// Constraint probability under each tuple, in tuple order.
    pub probs: Vec<f64>,
}

/// Non-dominated archive points in user units.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParetoSet {
    pub directions: Vec<Direction>,
    pub preferences: Vec<Vec<usize>>,
    pub reference_point: Vec<f64>,
    pub hypervolume: f64,
    pub points: Vec<ParetoPoint>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GradientSource {
    Analytic,
    Gp,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Combine {
    /// A point complies when it satisfies every tuple.
    All,
    /// A point complies when it satisfies at least one tuple.
    Any,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Compliance {
    pub fraction: f64,
    pub satisfied: usize,
    pub total: usize,
    /// Set when there were no points to check and the fraction is vacuously 1.
    pub vacuous: bool,
    pub source: GradientSource,
    pub combine: Combine,
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub runs: Vec<RunTrace>,
    pub pareto: ParetoSet,
    pub compliance: Option<Compliance>,
    pub status: RunStatus,
}

fn fit_models(xs: &[Vec<f64>], ys: &[Vec<f64>], warm: Option<&[KernelSpec]>, restarts: usize, key: u64) -> Result<Vec<GpModel>> {
    let n = xs[0].len();
    let m = ys[0].len();
    let inputs = DMatrix::from_fn(xs.len(), n, |r, c| xs[r][c]);
    (0..m)
        .map(|i| {
            let targets = DVector::from_iterator(ys.len(), ys.iter().map(|y| y[i]));
            let options = FitOptions {
                restarts,
                warm_start: warm.map(|w| w[i].clone()),
                seed: rng::derive_key(key, i as u64),
                ..FitOptions::default()
            };
            GpModel::fit(inputs.clone(), targets, &options)
        })
        .collect()
}

fn checked_evaluate(objective: &dyn Objective, x: &[f64]) -> Result<Vec<f64>> {
    let y = objective.evaluate(x)?;
    if y.len() != objective.num_objectives() {
        return Err(Error::Evaluation(format!(
            "expected {} objective values, got {}",
            objective.num_objectives(),
            y.len()
        )));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::Evaluation(format!("non-finite objective values {y:?}")));
    }
    Ok(y)
}

/// Runs one optimisation with every tuple of `config.preferences` applied in
/// conjunction. Deterministic given the config.
pub fn run(objective: &dyn Objective, space: &SearchSpace, config: &RunConfig) -> Result<RunTrace> {
    config.validate(objective, space)?;
    let n = objective.num_inputs();
    let m = objective.num_objectives();
    let bases = config.bases(m)?;
    let dirs = &config.directions;

    let mut records: Vec<IterationRecord> = Vec::new();
    let mut wall_times = Vec::new();
    let mut failures = Vec::new();
    let mut status = RunStatus::Completed;

    // initial design, with uniform or unused-row replacements on failure
    let init_key = rng::derive_key(config.seed, 0);
    let mut r = rng::substream(init_key, 0);
    let mut queue: Vec<Vec<f64>> = match space {
        SearchSpace::Box(b) => latin_hypercube(b, config.initial_size(n), &mut r),
        SearchSpace::Candidates(rows) => {
            let mut order: Vec<usize> = (0..rows.len()).collect();
            order.shuffle(&mut r);
            order.into_iter().map(|i| rows[i].clone()).collect()
        }
    };
    let mut replacements = 0;
    let mut next = 0;
    while records.len() < config.initial_size(n) {
        let x = if next < queue.len() {
            next += 1;
            queue[next - 1].clone()
        } else {
            match space {
                SearchSpace::Box(b) => b.sample_uniform(&mut r),
                SearchSpace::Candidates(_) => {
                    status = RunStatus::Aborted { reason: "initial design ran out of candidate rows".into() };
                    break;
                }
            }
        };
        let start = Instant::now();
        match checked_evaluate(objective, &x) {
            Ok(y) => {
                records.push(IterationRecord {
                    t: records.len(),
                    phase: Phase::Initial,
                    x,
                    y,
                    s_x: None,
                    acquisition: None,
                    hv: 0.0,
                });
                wall_times.push(start.elapsed().as_secs_f64());
            }
            Err(e) => {
                failures.push(EvaluationFailure { t: records.len(), x, message: e.to_string() });
                replacements += 1;
                if replacements > MAX_RETRIES {
                    status = RunStatus::Aborted { reason: format!("initial design evaluation failed: {e}") };
                    break;
                }
                if matches!(space, SearchSpace::Box(_)) {
                    // replace the failed design point
                    queue.truncate(next);
                }
            }
        }
    }
    if let SearchSpace::Candidates(_) = space {
        queue.clear();
    }

    let mut warm: Option<Vec<KernelSpec>> = None;
    if status == RunStatus::Completed {
        for it in 0..config.iterations {
            let start = Instant::now();
            let iter_key = rng::derive_key(config.seed, 1 + it as u64);
            let xs: Vec<Vec<f64>> = records.iter().map(|r| r.x.clone()).collect();
            let ys: Vec<Vec<f64>> = records.iter().map(|r| to_internal(&r.y, dirs)).collect();

            let search_space = match space {
                SearchSpace::Box(_) => space.clone(),
                SearchSpace::Candidates(rows) => {
                    let remaining: Vec<Vec<f64>> = rows.iter().filter(|row| !xs.contains(row)).cloned().collect();
                    if remaining.is_empty() {
                        status = RunStatus::Exhausted;
                        break;
                    }
                    SearchSpace::Candidates(remaining)
                }
            };

            let step = (|| -> Result<_> {
                let models = fit_models(&xs, &ys, warm.as_deref(), config.gp_restarts, rng::derive_key(iter_key, 0))?;
                let z = match &config.reference_point {
                    Some(z) => to_internal(z, dirs),
                    None => default_reference(&ys),
                };
                let ctx = AcquisitionContext::new(
                    models,
                    ys.clone(),
                    z,
                    bases.clone(),
                    config.acquisition.clone(),
                    rng::derive_key(iter_key, 2),
                )?;
                let kind = if bases.is_empty() { AcquisitionKind::Ehi } else { AcquisitionKind::Pehi };
                let ranking =
                    maximize_acquisition(&ctx, kind, &search_space, &config.search, rng::derive_key(iter_key, 3))?;
                Ok((ctx.models().iter().map(|g| g.kernel().clone()).collect::<Vec<_>>(), ranking))
            })();
            let (kernels, ranking) = match step {
                Ok(v) => v,
                Err(e) => {
                    status = RunStatus::Aborted { reason: format!("iteration {it}: {e}") };
                    break;
                }
            };
            warm = Some(kernels);

            let mut accepted = false;
            for cand in ranking.candidates.iter().take(1 + MAX_RETRIES) {
                match checked_evaluate(objective, &cand.x) {
                    Ok(y) => {
                        records.push(IterationRecord {
                            t: records.len(),
                            phase: Phase::Search,
                            x: cand.x.clone(),
                            y,
                            s_x: cand.s_x,
                            acquisition: Some(cand.value),
                            hv: 0.0,
                        });
                        wall_times.push(start.elapsed().as_secs_f64());
                        accepted = true;
                        break;
                    }
                    Err(e) => failures.push(EvaluationFailure {
                        t: records.len(),
                        x: cand.x.clone(),
                        message: e.to_string(),
                    }),
                }
            }
            if !accepted {
                status = RunStatus::Aborted {
                    reason: format!("iteration {it}: every attempted candidate failed to evaluate"),
                };
                break;
            }
        }
    }

    let ys: Vec<Vec<f64>> = records.iter().map(|r| to_internal(&r.y, dirs)).collect();
    let z = match &config.reference_point {
        Some(z) => to_internal(z, dirs),
        None if ys.is_empty() => vec![0.0; m],
        None => default_reference(&ys),
    };
    for k in 0..records.len() {
        records[k].hv = hypervolume(&ys[..=k], &z)?;
    }
    Ok(RunTrace {
        seed: config.seed,
        directions: dirs.clone(),
        preferences: config.preferences.clone(),
        records,
        wall_times,
        failures,
        reference_point: to_internal(&z, dirs),
        status,
    })
}

/// Pareto set of the union of `traces`, with per-tuple constraint
/// probabilities from GPs fitted to the union.
///
/// The reference point is the componentwise worst of the traces' points.
pub fn merge_runs(traces: &[RunTrace], preferences: &[Vec<usize>], config: &RunConfig) -> Result<ParetoSet> {
    let first = traces.first().ok_or_else(|| Error::Contract("nothing to merge".into()))?;
    let dirs = &first.directions;
    let shape = |t: &RunTrace| t.records.first().map(|r| (r.x.len(), r.y.len()));
    for t in traces {
        if &t.directions != dirs || (shape(t).is_some() && shape(first).is_some() && shape(t) != shape(first)) {
            return Err(Error::Contract("traces disagree on the objective specification".into()));
        }
    }
    let xs: Vec<Vec<f64>> = traces.iter().flat_map(|t| t.archive_x()).collect();
    let ys: Vec<Vec<f64>> = traces.iter().flat_map(|t| t.archive_y()).collect();
    let internal: Vec<Vec<f64>> = ys.iter().map(|y| to_internal(y, dirs)).collect();
    let z_user = match &config.reference_point {
        Some(z) => z.clone(),
        None if internal.is_empty() => vec![0.0; dirs.len()],
        None => {
            let worst: Vec<f64> = (0..dirs.len())
                .map(|i| traces.iter().map(|t| to_internal(&t.reference_point, dirs)[i]).fold(f64::INFINITY, f64::min))
                .collect();
            to_internal(&worst, dirs)
        }
    };
    pareto_set(&xs, &ys, dirs, preferences, &z_user, config, rng::derive_key(config.seed, u64::MAX))
}

fn pareto_set(
    xs: &[Vec<f64>],
    ys: &[Vec<f64>],
    dirs: &[Direction],
    preferences: &[Vec<usize>],
    z_user: &[f64],
    config: &RunConfig,
    key: u64,
) -> Result<ParetoSet> {
    let internal: Vec<Vec<f64>> = ys.iter().map(|y| to_internal(y, dirs)).collect();
    let z = to_internal(z_user, dirs);
    let idx = dominant_indices(&internal);
    let bases = build_bases(preferences, dirs.len())?;
    let models = if bases.is_empty() || xs.is_empty() {
        None
    } else {
        Some(fit_models(xs, &internal, None, config.gp_restarts, rng::derive_key(key, 0))?)
    };
    let points = idx
        .iter()
        .map(|&j| {
            let probs = match &models {
                None => Ok(Vec::new()),
                Some(models) => bases
                    .iter()
                    .enumerate()
                    .map(|(b, basis)| {
                        prob_satisfies(
                            models,
                            std::slice::from_ref(basis),
                            &xs[j],
                            config.acquisition.prob_samples,
                            rng::derive_key(rng::derive_key(key, 1 + b as u64), j as u64),
                        )
                        .map(|p| p.value)
                    })
                    .collect::<Result<Vec<_>>>(),
            }?;
            Ok(ParetoPoint { x: xs[j].clone(), y: ys[j].clone(), probs })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ParetoSet {
        directions: dirs.to_vec(),
        preferences: preferences.to_vec(),
        reference_point: z_user.to_vec(),
        hypervolume: if internal.is_empty() { 0.0 } else { hypervolume(&internal, &z)? },
        points,
    })
}

/// Gradients of the objectives at a point, in the maximisation convention.
pub enum Gradients<'a> {
    Analytic(&'a dyn Objective),
    /// Posterior mean gradients of models fitted to maximised objectives.
    Gp(&'a [GpModel]),
}

impl Gradients<'_> {
    fn source(&self) -> GradientSource {
        match self {
            Gradients::Analytic(_) => GradientSource::Analytic,
            Gradients::Gp(_) => GradientSource::Gp,
        }
    }

    fn at(&self, x: &[f64], dirs: &[Direction]) -> Result<DMatrix<f64>> {
        match self {
            Gradients::Analytic(obj) => {
                let mut g = obj
                    .analytic_gradient(x)
                    .ok_or_else(|| Error::Contract("objective has no analytic gradient".into()))?;
                for (i, d) in dirs.iter().enumerate() {
                    g.column_mut(i).scale_mut(d.sign());
                }
                Ok(g)
            }
            Gradients::Gp(models) => {
                let cols = models
                    .iter()
                    .map(|m| m.gradient_posterior(x).map(|p| p.mean))
                    .collect::<Result<Vec<_>>>()?;
                Ok(DMatrix::from_columns(&cols))
            }
        }
    }
}

/// Fraction of `points` whose gradients satisfy the tuples.
pub fn compliance(
    points: &[Vec<f64>],
    preferences: &[Vec<usize>],
    dirs: &[Direction],
    gradients: &Gradients<'_>,
    combine: Combine,
) -> Result<Compliance> {
    let bases = build_bases(preferences, dirs.len())?;
    if bases.is_empty() {
        return Err(Error::Contract("compliance needs at least one preference tuple".into()));
    }
    let mut satisfied = 0;
    for x in points {
        let g = gradients.at(x, dirs)?;
        let mut tests = bases.iter().map(|b| satisfies_preference(&g, b, SignTolerance::default()));
        let ok = match combine {
            Combine::All => tests.all(|t| t),
            Combine::Any => tests.any(|t| t),
        };
        if ok {
            satisfied += 1;
        }
    }
    let total = points.len();
    Ok(Compliance {
        fraction: if total == 0 { 1.0 } else { satisfied as f64 / total as f64 },
        satisfied,
        total,
        vacuous: total == 0,
        source: gradients.source(),
        combine,
    })
}

/// Compliance of a Pareto set, using analytic gradients when the objective
/// has them and GP mean gradients fitted to `xs`, `ys` (user units) otherwise.
pub fn pareto_compliance(
    objective: &dyn Objective,
    pareto: &ParetoSet,
    preferences: &[Vec<usize>],
    combine: Combine,
    archive: (&[Vec<f64>], &[Vec<f64>]),
    config: &RunConfig,
) -> Result<Compliance> {
    let xs: Vec<Vec<f64>> = pareto.points.iter().map(|p| p.x.clone()).collect();
    let dirs = &pareto.directions;
    let analytic = xs.first().is_none_or(|x| objective.analytic_gradient(x).is_some());
    if analytic {
        return compliance(&xs, preferences, dirs, &Gradients::Analytic(objective), combine);
    }
    let internal: Vec<Vec<f64>> = archive.1.iter().map(|y| to_internal(y, dirs)).collect();
    let models = fit_models(
        archive.0,
        &internal,
        None,
        config.gp_restarts,
        rng::derive_key(rng::derive_key(config.seed, u64::MAX), 0),
    )?;
    compliance(&xs, preferences, dirs, &Gradients::Gp(&models), combine)
}

/// Iterations given to each tuple in merge mode: an even split with the
/// remainder going to the first tuples.
pub fn split_iterations(total: usize, parts: usize) -> Vec<usize> {
    (0..parts).map(|k| total / parts + usize::from(k < total % parts)).collect()
}

/// Runs the configured experiment: a single run in conjunction mode, or one
/// run per tuple followed by a merge.
pub fn execute(objective: &dyn Objective, space: &SearchSpace, config: &RunConfig) -> Result<RunOutcome> {
    config.validate(objective, space)?;
    let (runs, pareto, combine) = match config.constraint_mode {
        ConstraintMode::Conjunction => {
            let trace = run(objective, space, config)?;
            let pareto = pareto_set(
                &trace.archive_x(),
                &trace.archive_y(),
                &config.directions,
                &config.preferences,
                &trace.reference_point,
                config,
                rng::derive_key(config.seed, u64::MAX),
            )?;
            (vec![trace], pareto, Combine::All)
        }
        ConstraintMode::Merge => {
            let split = split_iterations(config.iterations, config.preferences.len());
            let runs = config
                .preferences
                .iter()
                .zip(split)
                .enumerate()
                .map(|(k, (tuple, iterations))| {
                    let sub = RunConfig {
                        preferences: vec![tuple.clone()],
                        constraint_mode: ConstraintMode::Conjunction,
                        iterations,
                        seed: rng::derive_key(config.seed, k as u64),
                        ..config.clone()
                    };
                    run(objective, space, &sub)
                })
                .collect::<Result<Vec<_>>>()?;
            let pareto = merge_runs(&runs, &config.preferences, config)?;
            (runs, pareto, Combine::Any)
        }
    };
    let status = runs
        .iter()
        .map(|r| r.status.clone())
        .find(|s| *s != RunStatus::Completed)
        .unwrap_or(RunStatus::Completed);
    let tuples = config.compliance_tuples();
    let compliance = if tuples.is_empty() {
        None
    } else {
        let xs: Vec<Vec<f64>> = runs.iter().flat_map(|r| r.archive_x()).collect();
        let ys: Vec<Vec<f64>> = runs.iter().flat_map(|r| r.archive_y()).collect();
        Some(pareto_compliance(objective, &pareto, tuples, combine, (&xs, &ys), config)?)
    };
    Ok(RunOutcome { runs, pareto, compliance, status })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::Bounds;

    struct Constant;

    impl Objective for Constant {
        fn num_inputs(&self) -> usize {
            1
        }
        fn num_objectives(&self) -> usize {
            2
        }
        fn evaluate(&self, _x: &[f64]) -> Result<Vec<f64>> {
            Ok(vec![1.0, 2.0])
        }
    }

    struct Flaky;

    impl Objective for Flaky {
        fn num_inputs(&self) -> usize {
            1
        }
        fn num_objectives(&self) -> usize {
            2
        }
        fn evaluate(&self, x: &[f64]) -> Result<Vec<f64>> {
            if x[0] > 0.5 {
                Err(Error::Evaluation("simulator crashed".into()))
            } else {
                Ok(vec![x[0], 1.0 - x[0] * x[0]])
            }
        }
    }

    fn quick(config: &mut RunConfig) {
        config.acquisition.acquisition_samples = 50;
        config.acquisition.prob_samples = 50;
        config.search = SearchBudget { screen_count: 20, local_restarts: 1, local_evals: 10 };
        config.gp_restarts = 2;
    }

    fn unit_box() -> SearchSpace {
        SearchSpace::Box(Bounds::new(vec![(0.0, 1.0)]).unwrap())
    }

    #[test]
    fn constant_objective_grows_by_one() {
        let mut c = RunConfig::new(vec![Direction::Minimise; 2], 1, 3);
        quick(&mut c);
        let t = run(&Constant, &unit_box(), &c).unwrap();
        assert_eq!(t.records.len(), c.initial_size(1) + 1);
        assert_eq!(t.status, RunStatus::Completed);
        assert!(t.records.windows(2).all(|w| w[1].hv >= w[0].hv));
    }

    #[test]
    fn split_gives_remainder_to_first() {
        assert_eq!(split_iterations(7, 3), vec![3, 2, 2]);
        assert_eq!(split_iterations(6, 2), vec![3, 3]);
    }

    #[test]
    fn failing_region_is_skipped_or_aborts() {
        let mut c = RunConfig::new(vec![Direction::Maximise; 2], 3, 5);
        quick(&mut c);
        let t = run(&Flaky, &unit_box(), &c).unwrap();
        assert!(t.records.iter().all(|r| r.x[0] <= 0.5));
        match &t.status {
            RunStatus::Completed => assert_eq!(t.records.len(), 8),
            RunStatus::Aborted { .. } => assert!(!t.failures.is_empty()),
            RunStatus::Exhausted => panic!("box runs cannot exhaust"),
        }
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let c = RunConfig::new(vec![Direction::Minimise; 2], 0, 0);
        assert!(matches!(run(&Constant, &unit_box(), &c), Err(Error::Config(_))));
        let mut c = RunConfig::new(vec![Direction::Minimise; 2], 2, 0);
        c.preferences = vec![vec![0, 0]];
        assert!(matches!(run(&Constant, &unit_box(), &c), Err(Error::Config(_))));
    }

    #[test]
    fn empty_point_set_is_vacuously_compliant() {
        let c = compliance(&[], &[vec![0, 1]], &[Direction::Minimise; 2], &Gradients::Gp(&[]), Combine::All).unwrap();
        assert!(c.vacuous);
        assert_eq!(c.fraction, 1.0);
    }
}
