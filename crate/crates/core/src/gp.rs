//! Gaussian-process regression with a squared-exponential ARD kernel.
//!
//! Besides the usual posterior mean and variance, a fitted model exposes the
//! joint Gaussian posterior of its gradient at a point, which is what the
//! preference-order constraint probabilities are built from.
//!
//! One model is fitted per objective; objectives are treated as independent.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{ensure_finite, Error, Result};
use crate::rng;

const JITTER_START: f64 = 1e-10;
const JITTER_MAX: f64 = 1e-4;
const VARIANCE_CLIP: f64 = 1e-9;

/// Squared-exponential kernel with one lengthscale per input dimension.
#[derive(Clone, Debug, PartialEq)]
pub struct KernelSpec {
    pub signal_variance: f64,
    pub lengthscales: Vec<f64>,
    pub noise_variance: f64,
}

impl KernelSpec {
    pub fn new(signal_variance: f64, lengthscales: Vec<f64>, noise_variance: f64) -> Result<Self> {
        let spec = Self {
            signal_variance,
            lengthscales,
            noise_variance,
        };
        spec.validate()?;
        Ok(spec)
    }

    fn validate(&self) -> Result<()> {
        if !(self.signal_variance > 0.0 && self.signal_variance.is_finite()) {
            return Err(Error::InvalidData("signal variance must be positive".into()));
        }
        if self.lengthscales.is_empty() || self.lengthscales.iter().any(|l| !(*l > 0.0 && l.is_finite())) {
            return Err(Error::InvalidData("lengthscales must be positive".into()));
        }
        if !(self.noise_variance >= 0.0 && self.noise_variance.is_finite()) {
            return Err(Error::InvalidData("noise variance must be non-negative".into()));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.lengthscales.len()
    }

    /// k(a, b) without the noise term.
    pub fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        let r2: f64 = a
            .iter()
            .zip(b)
            .zip(&self.lengthscales)
            .map(|((ai, bi), l)| {
                let d = (ai - bi) / l;
                d * d
            })
            .sum();
        self.signal_variance * (-0.5 * r2).exp()
    }

    /// Prior variance of each gradient component, `signal_variance / l_d^2`.
    pub fn prior_gradient_variance(&self) -> Vec<f64> {
        self.lengthscales
            .iter()
            .map(|l| self.signal_variance / (l * l))
            .collect()
    }
}

/// Box constraints for hyperparameter fitting.
///
/// Signal and noise variances are relative to the sample variance of the
/// targets; lengthscales are relative to the per-dimension input range.
#[derive(Clone, Debug, PartialEq)]
pub struct HyperBounds {
    pub signal_variance: (f64, f64),
    pub lengthscale: (f64, f64),
    pub noise_variance: (f64, f64),
}

impl Default for HyperBounds {
    fn default() -> Self {
        Self {
            signal_variance: (0.05, 20.0),
            lengthscale: (0.02, 20.0),
            noise_variance: (1e-9, 0.1),
        }
    }
}

#[derive(Clone, Debug)]
pub struct FitOptions {
    pub bounds: HyperBounds,
    /// Number of optimiser starts (the warm start, if any, counts as one).
    pub restarts: usize,
    /// Objective evaluations per start.
    pub max_evals: usize,
    /// Previous hyperparameters in raw units, used as the first start.
    pub warm_start: Option<KernelSpec>,
    pub seed: u64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            bounds: HyperBounds::default(),
            restarts: 5,
            max_evals: 200,
            warm_start: None,
            seed: 0,
        }
    }
}

/// A fitted Gaussian process for one objective.
#[derive(Clone, Debug)]
pub struct GpModel {
    kernel: KernelSpec,
    inputs: DMatrix<f64>,
    targets: DVector<f64>,
    prior_mean: f64,
    chol: Cholesky<f64, Dyn>,
    alpha: DVector<f64>,
    jitter: f64,
}

/// Posterior of the gradient of a GP at one point.
#[derive(Clone, Debug)]
pub struct GradientPosterior {
    pub mean: DVector<f64>,
    pub covariance: DMatrix<f64>,
    factor: DMatrix<f64>,
}

fn check_inputs(inputs: &DMatrix<f64>, targets: &DVector<f64>) -> Result<()> {
    if inputs.nrows() != targets.len() {
        return Err(Error::InvalidData(format!(
            "{} input rows but {} targets",
            inputs.nrows(),
            targets.len()
        )));
    }
    if inputs.nrows() == 0 || inputs.ncols() == 0 {
        return Err(Error::InvalidData("empty training set".into()));
    }
    ensure_finite(inputs.as_slice(), "inputs")?;
    ensure_finite(targets.as_slice(), "targets")
}

fn gram(kernel: &KernelSpec, inputs: &DMatrix<f64>) -> DMatrix<f64> {
    let n = inputs.nrows();
    let rows: Vec<Vec<f64>> = (0..n).map(|i| inputs.row(i).iter().copied().collect()).collect();
    let mut k = DMatrix::zeros(n, n);
    for i in 0..n {
        k[(i, i)] = kernel.signal_variance + kernel.noise_variance;
        for j in 0..i {
            let v = kernel.eval(&rows[i], &rows[j]);
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    k
}

/// Cholesky of `a + jitter * I` with jitter escalating from `1e-10 * scale`
/// by factors of ten up to `1e-4 * scale`.
pub(crate) fn factorize_with_jitter(a: &DMatrix<f64>, scale: f64) -> Result<(Cholesky<f64, Dyn>, f64)> {
    let mut jitter = JITTER_START * scale;
    while jitter <= JITTER_MAX * scale * (1.0 + 1e-12) {
        let mut m = a.clone();
        for i in 0..m.nrows() {
            m[(i, i)] += jitter;
        }
        if let Some(chol) = Cholesky::new(m) {
            return Ok((chol, jitter));
        }
        jitter *= 10.0;
    }
    Err(Error::Numeric(format!(
        "matrix not positive definite after jitter {:.1e}",
        JITTER_MAX * scale
    )))
}

impl GpModel {
    /// Conditions a zero-mean GP with fixed hyperparameters on the data.
    pub fn new(kernel: KernelSpec, inputs: DMatrix<f64>, targets: DVector<f64>) -> Result<Self> {
        Self::with_prior_mean(kernel, inputs, targets, 0.0)
    }

    /// Like [`GpModel::new`] with a constant prior mean.
    pub fn with_prior_mean(
        kernel: KernelSpec,
        inputs: DMatrix<f64>,
        targets: DVector<f64>,
        prior_mean: f64,
    ) -> Result<Self> {
        kernel.validate()?;
        check_inputs(&inputs, &targets)?;
        if kernel.dim() != inputs.ncols() {
            return Err(Error::InvalidData(format!(
                "kernel has {} lengthscales but inputs have {} columns",
                kernel.dim(),
                inputs.ncols()
            )));
        }
        let k = gram(&kernel, &inputs);
        let (chol, jitter) = factorize_with_jitter(&k, kernel.signal_variance)?;
        let centred = targets.add_scalar(-prior_mean);
        let alpha = chol.solve(&centred);
        Ok(Self {
            kernel,
            inputs,
            targets,
            prior_mean,
            chol,
            alpha,
            jitter,
        })
    }

    /// Fits hyperparameters by maximising the log marginal likelihood.
    ///
    /// Targets are centred on their sample mean, which becomes the constant
    /// prior mean, and the search runs on standardised targets in log space.
    pub fn fit(inputs: DMatrix<f64>, targets: DVector<f64>, options: &FitOptions) -> Result<Self> {
        check_inputs(&inputs, &targets)?;
        if inputs.nrows() < 2 {
            return Err(Error::InvalidData("at least two observations are required".into()));
        }
        let n_obs = targets.len() as f64;
        let mean = targets.mean();
        let var = targets.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / n_obs;
        let scale = if var.sqrt() > 1e-12 * mean.abs().max(1.0) { var.sqrt() } else { 1.0 };
        let standardised = targets.map(|t| (t - mean) / scale);

        let dim = inputs.ncols();
        let ranges: Vec<f64> = (0..dim)
            .map(|d| {
                let col = inputs.column(d);
                let r = col.max() - col.min();
                if r > 0.0 { r } else { 1.0 }
            })
            .collect();

        let b = &options.bounds;
        let mut lower = Vec::with_capacity(dim + 2);
        let mut upper = Vec::with_capacity(dim + 2);
        lower.push(b.signal_variance.0.ln());
        upper.push(b.signal_variance.1.ln());
        for r in &ranges {
            lower.push((b.lengthscale.0 * r).ln());
            upper.push((b.lengthscale.1 * r).ln());
        }
        lower.push(b.noise_variance.0.ln());
        upper.push(b.noise_variance.1.ln());

        let decode = |theta: &[f64]| KernelSpec {
            signal_variance: theta[0].exp(),
            lengthscales: theta[1..=dim].iter().map(|v| v.exp()).collect(),
            noise_variance: theta[dim + 1].exp(),
        };
        let objective = |theta: &[f64]| -> f64 {
            match log_marginal_likelihood(&decode(theta), &inputs, &standardised) {
                Some(v) => -v,
                None => f64::INFINITY,
            }
        };

        let mut starts: Vec<Vec<f64>> = Vec::new();
        if let Some(w) = &options.warm_start {
            if w.dim() == dim {
                let mut t = vec![(w.signal_variance / (scale * scale)).ln()];
                t.extend(w.lengthscales.iter().map(|l| l.ln()));
                t.push((w.noise_variance / (scale * scale)).max(1e-300).ln());
                starts.push(clamp(&t, &lower, &upper));
            }
        }
        // centre of the box in log space, with a modest noise level
        let mut centre: Vec<f64> = lower.iter().zip(&upper).map(|(l, u)| 0.5 * (l + u)).collect();
        centre[0] = 0.0f64.clamp(lower[0], upper[0]);
        centre[dim + 1] = (1e-4f64).ln().clamp(lower[dim + 1], upper[dim + 1]);
        starts.push(centre);
        let mut r = rng::substream(options.seed, 0);
        while starts.len() < options.restarts.max(1) {
            starts.push(
                lower
                    .iter()
                    .zip(&upper)
                    .map(|(l, u)| l + (u - l) * r.random::<f64>())
                    .collect(),
            );
        }

        let mut best: Option<(Vec<f64>, f64)> = None;
        for start in &starts {
            let (theta, value) = nelder_mead(&objective, start, &lower, &upper, options.max_evals);
            if value.is_finite() && best.as_ref().is_none_or(|(_, b)| value < *b) {
                best = Some((theta, value));
            }
        }
        let (theta, _) = best.ok_or_else(|| {
            Error::Numeric("log marginal likelihood could not be evaluated at any start".into())
        })?;
        let std_kernel = decode(&theta);
        let kernel = KernelSpec {
            signal_variance: std_kernel.signal_variance * scale * scale,
            lengthscales: std_kernel.lengthscales,
            noise_variance: std_kernel.noise_variance * scale * scale,
        };
        Self::with_prior_mean(kernel, inputs, targets, mean)
    }

    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }

    pub fn inputs(&self) -> &DMatrix<f64> {
        &self.inputs
    }

    pub fn targets(&self) -> &DVector<f64> {
        &self.targets
    }

    pub fn prior_mean(&self) -> f64 {
        self.prior_mean
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn dim(&self) -> usize {
        self.inputs.ncols()
    }

    /// Lower-triangular factor of `K + noise * I + jitter * I`.
    pub fn chol_factor(&self) -> DMatrix<f64> {
        self.chol.l()
    }

    pub fn alpha(&self) -> &DVector<f64> {
        &self.alpha
    }

    fn cross_covariance(&self, x: &[f64]) -> DVector<f64> {
        let mut buf = vec![0.0; self.dim()];
        DVector::from_iterator(
            self.inputs.nrows(),
            (0..self.inputs.nrows()).map(|j| {
                for (d, b) in buf.iter_mut().enumerate() {
                    *b = self.inputs[(j, d)];
                }
                self.kernel.eval(x, &buf)
            }),
        )
    }

    fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::InvalidData(format!(
                "query point has {} coordinates, model expects {}",
                x.len(),
                self.dim()
            )));
        }
        ensure_finite(x, "query point")
    }

    /// Posterior mean and variance of the latent function at `x`.
    pub fn posterior(&self, x: &[f64]) -> Result<(f64, f64)> {
        self.check_point(x)?;
        let k = self.cross_covariance(x);
        let mean = self.prior_mean + k.dot(&self.alpha);
        let v = self
            .chol
            .l_dirty()
            .solve_lower_triangular(&k)
            .ok_or_else(|| Error::Numeric("triangular solve failed".into()))?;
        let raw = self.kernel.signal_variance - v.norm_squared();
        Ok((mean, clip_variance(raw, self.kernel.signal_variance)?))
    }

    /// Joint posterior of the gradient at `x`.
    pub fn gradient_posterior(&self, x: &[f64]) -> Result<GradientPosterior> {
        self.check_point(x)?;
        let n_obs = self.inputs.nrows();
        let dim = self.dim();
        let k = self.cross_covariance(x);
        let inv_l2: Vec<f64> = self.kernel.lengthscales.iter().map(|l| 1.0 / (l * l)).collect();
        // d k(x, x_j) / d x_d
        let mut dk = DMatrix::zeros(n_obs, dim);
        for j in 0..n_obs {
            for d in 0..dim {
                dk[(j, d)] = -k[j] * (x[d] - self.inputs[(j, d)]) * inv_l2[d];
            }
        }
        let mean = dk.tr_mul(&self.alpha);
        let w = self
            .chol
            .l_dirty()
            .solve_lower_triangular(&dk)
            .ok_or_else(|| Error::Numeric("triangular solve failed".into()))?;
        let mut cov = -w.tr_mul(&w);
        for d in 0..dim {
            cov[(d, d)] += self.kernel.signal_variance * inv_l2[d];
        }
        GradientPosterior::new(mean, cov)
    }
}

fn clip_variance(raw: f64, scale: f64) -> Result<f64> {
    if raw >= 0.0 {
        Ok(raw)
    } else if raw >= -VARIANCE_CLIP * scale.max(1.0) {
        Ok(0.0)
    } else {
        Err(Error::Numeric(format!("posterior variance {raw:e} is negative")))
    }
}

impl GradientPosterior {
    /// Symmetrises `covariance` and factorises it for sampling.
    pub fn new(mean: DVector<f64>, covariance: DMatrix<f64>) -> Result<Self> {
        let n = mean.len();
        if covariance.nrows() != n || covariance.ncols() != n {
            return Err(Error::InvalidData("gradient covariance shape mismatch".into()));
        }
        ensure_finite(mean.as_slice(), "gradient mean")?;
        ensure_finite(covariance.as_slice(), "gradient covariance")?;
        let covariance = (&covariance + covariance.transpose()) * 0.5;
        let scale = (0..n).map(|i| covariance[(i, i)]).fold(0.0, f64::max);
        let factor = if scale == 0.0 {
            DMatrix::zeros(n, n)
        } else {
            factorize_with_jitter(&covariance, scale)?.0.unpack()
        };
        Ok(Self {
            mean,
            covariance,
            factor,
        })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Lower-triangular factor used for sampling.
    pub fn factor(&self) -> &DMatrix<f64> {
        &self.factor
    }

    /// Writes `mean + L z` into `out` for standard-normal `z`.
    pub fn transform_into(&self, z: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate().take(self.dim()) {
            let mut acc = self.mean[i];
            for (j, zj) in z.iter().enumerate().take(i + 1) {
                acc += self.factor[(i, j)] * zj;
            }
            *o = acc;
        }
    }
}

/// One draw from the gradient posterior.
pub fn sample_gradient<R: Rng + ?Sized>(posterior: &GradientPosterior, rng: &mut R) -> DVector<f64> {
    let z: Vec<f64> = (0..posterior.dim()).map(|_| rng.sample(StandardNormal)).collect();
    let mut out = vec![0.0; posterior.dim()];
    posterior.transform_into(&z, &mut out);
    DVector::from_vec(out)
}

/// Log marginal likelihood, or `None` when the covariance cannot be factorised.
pub fn log_marginal_likelihood(kernel: &KernelSpec, inputs: &DMatrix<f64>, targets: &DVector<f64>) -> Option<f64> {
    let k = gram(kernel, inputs);
    let (chol, _) = factorize_with_jitter(&k, kernel.signal_variance).ok()?;
    let alpha = chol.solve(targets);
    let l = chol.l_dirty();
    let log_det: f64 = (0..l.nrows()).map(|i| l[(i, i)].ln()).sum();
    let n = targets.len() as f64;
    let v = -0.5 * targets.dot(&alpha) - log_det - 0.5 * n * (2.0 * std::f64::consts::PI).ln();
    v.is_finite().then_some(v)
}

fn clamp(x: &[f64], lower: &[f64], upper: &[f64]) -> Vec<f64> {
    x.iter()
        .zip(lower.iter().zip(upper))
        .map(|(v, (l, u))| v.clamp(*l, *u))
        .collect()
}

/// Bounded Nelder-Mead minimisation; trial points are clamped into the box.
fn nelder_mead<F: Fn(&[f64]) -> f64>(
    f: &F,
    start: &[f64],
    lower: &[f64],
    upper: &[f64],
    max_evals: usize,
) -> (Vec<f64>, f64) {
    let dim = start.len();
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(dim + 1);
    let x0 = clamp(start, lower, upper);
    let f0 = f(&x0);
    simplex.push((x0.clone(), f0));
    for i in 0..dim {
        let mut x = x0.clone();
        let step = 0.1 * (upper[i] - lower[i]).max(1e-3);
        x[i] = if x[i] + step <= upper[i] { x[i] + step } else { x[i] - step };
        let fx = f(&x);
        simplex.push((x, fx));
    }
    let mut evals = dim + 1;
    let by_value = |a: &(Vec<f64>, f64), b: &(Vec<f64>, f64)| a.1.total_cmp(&b.1);
    while evals < max_evals {
        simplex.sort_by(by_value);
        let best = simplex[0].1;
        let worst = simplex[dim].1;
        if (worst - best).abs() <= 1e-10 * (1.0 + best.abs()) && best.is_finite() {
            break;
        }
        let centroid: Vec<f64> = (0..dim)
            .map(|d| simplex[..dim].iter().map(|p| p.0[d]).sum::<f64>() / dim as f64)
            .collect();
        let towards = |coef: f64| -> Vec<f64> {
            let x: Vec<f64> = (0..dim)
                .map(|d| centroid[d] + coef * (simplex[dim].0[d] - centroid[d]))
                .collect();
            clamp(&x, lower, upper)
        };
        let xr = towards(-1.0);
        let fr = f(&xr);
        evals += 1;
        if fr < simplex[0].1 {
            let xe = towards(-2.0);
            let fe = f(&xe);
            evals += 1;
            simplex[dim] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[dim - 1].1 {
            simplex[dim] = (xr, fr);
        } else {
            let (xc, fc) = if fr < simplex[dim].1 {
                let xc = towards(-0.5);
                let fc = f(&xc);
                (xc, fc)
            } else {
                let xc = towards(0.5);
                let fc = f(&xc);
                (xc, fc)
            };
            evals += 1;
            if fc < simplex[dim].1.min(fr) {
                simplex[dim] = (xc, fc);
            } else {
                let x_best = simplex[0].0.clone();
                for p in simplex.iter_mut().skip(1) {
                    let x: Vec<f64> = p.0.iter().zip(&x_best).map(|(v, b)| b + 0.5 * (v - b)).collect();
                    p.1 = f(&x);
                    p.0 = x;
                    evals += 1;
                }
            }
        }
    }
    simplex.sort_by(by_value);
    simplex.swap_remove(0)
}
