//! Downstream models over fingerprint vectors.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PredictorError {
    #[error("no training rows")]
    Empty,
    #[error("need at least {0} training rows")]
    TooFewRows(usize),
    #[error("non-finite value in the training data")]
    NonFinite,
    #[error("feature dimension {found}, expected {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("{rows} rows but {targets} targets")]
    LengthMismatch { rows: usize, targets: usize },
    #[error("training labels contain a single class")]
    SingleClass,
    #[error("training diverged")]
    Divergence,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Task {
    Regression,
    Classification,
}

pub trait Predictor: Send + Sync {
    /// Regression values, or positive-class probabilities for classifiers.
    fn predict(&self, x: &[Vec<f64>]) -> Result<Vec<f64>, PredictorError>;
}

fn check(x: &[Vec<f64>], y: &[f64]) -> Result<usize, PredictorError> {
    if x.is_empty() {
        return Err(PredictorError::Empty);
    }
    if x.len() != y.len() {
        return Err(PredictorError::LengthMismatch {
            rows: x.len(),
            targets: y.len(),
        });
    }
    let d = x[0].len();
    if let Some(r) = x.iter().find(|r| r.len() != d) {
        return Err(PredictorError::DimensionMismatch {
            expected: d,
            found: r.len(),
        });
    }
    if x.iter().flatten().chain(y).any(|v| !v.is_finite()) {
        return Err(PredictorError::NonFinite);
    }
    Ok(d)
}

fn matrix(x: &[Vec<f64>]) -> DMatrix<f64> {
    let d = x.first().map_or(0, Vec::len);
    DMatrix::from_row_iterator(x.len(), d, x.iter().flatten().copied())
}

fn check_dims(x: &[Vec<f64>], d: usize) -> Result<(), PredictorError> {
    match x.iter().find(|r| r.len() != d) {
        Some(r) => Err(PredictorError::DimensionMismatch {
            expected: d,
            found: r.len(),
        }),
        None => Ok(()),
    }
}

fn linear(w: &[f64], b: f64, x: &[Vec<f64>]) -> Result<Vec<f64>, PredictorError> {
    check_dims(x, w.len())?;
    Ok(x.iter().map(|r| b + r.iter().zip(w).map(|(a, c)| a * c).sum::<f64>()).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RidgeModel {
    pub w: Vec<f64>,
    pub b: f64,
    pub lambda: f64,
}

impl RidgeModel {
    /// `‖Xw + b − y‖² + λ‖w‖²`.
    pub fn objective(&self, x: &[Vec<f64>], y: &[f64]) -> f64 {
        let p = linear(&self.w, self.b, x).expect("dimensions checked by caller");
        let sse: f64 = p.iter().zip(y).map(|(a, b)| (a - b).powi(2)).sum();
        sse + self.lambda * self.w.iter().map(|v| v * v).sum::<f64>()
    }
}

impl Predictor for RidgeModel {
    fn predict(&self, x: &[Vec<f64>]) -> Result<Vec<f64>, PredictorError> {
        linear(&self.w, self.b, x)
    }
}

/// Minimize `‖Xw + b − y‖² + λ‖w‖²` with an unpenalized intercept.
///
/// Solves the centered normal equations by Cholesky, in the `d × d` primal
/// form when `d ≤ n` and the `n × n` kernel form otherwise. A singular
/// system falls back to the minimum-norm solution from an SVD.
pub fn ridge_fit(x: &[Vec<f64>], y: &[f64], lambda: f64) -> Result<RidgeModel, PredictorError> {
    let d = check(x, y)?;
    if !lambda.is_finite() || lambda < 0.0 {
        return Err(PredictorError::NonFinite);
    }
    let n = x.len();
    let mut xm = matrix(x);
    let x_mean: Vec<f64> = (0..d).map(|j| xm.column(j).mean()).collect();
    for (j, m) in x_mean.iter().enumerate() {
        xm.column_mut(j).add_scalar_mut(-m);
    }
    let y_mean = y.iter().sum::<f64>() / n as f64;
    let yc = DVector::from_iterator(n, y.iter().map(|v| v - y_mean));

    let solved = if d <= n {
        let mut a = xm.tr_mul(&xm);
        for i in 0..d {
            a[(i, i)] += lambda;
        }
        a.cholesky().map(|c| c.solve(&xm.tr_mul(&yc)))
    } else {
        let mut k = &xm * xm.transpose();
        for i in 0..n {
            k[(i, i)] += lambda;
        }
        k.cholesky().map(|c| xm.tr_mul(&c.solve(&yc)))
    };
    let w = match solved {
        Some(w) if w.iter().all(|v| v.is_finite()) => w,
        _ => {
            let svd = xm.svd(true, true);
            let (u, vt) = (svd.u.unwrap(), svd.v_t.unwrap());
            let smax = svd.singular_values.max();
            let cutoff = smax * 1e-12 * n.max(d) as f64;
            let uty = u.tr_mul(&yc);
            let scaled = DVector::from_iterator(
                svd.singular_values.len(),
                svd.singular_values.iter().zip(uty.iter()).map(|(&s, &c)| {
                    if s > cutoff {
                        c * s / (s * s + lambda)
                    } else {
                        0.0
                    }
                }),
            );
            vt.tr_mul(&scaled)
        }
    };
    let w: Vec<f64> = w.iter().copied().collect();
    let b = y_mean - w.iter().zip(&x_mean).map(|(a, m)| a * m).sum::<f64>();
    Ok(RidgeModel { w, b, lambda })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverReport {
    pub iterations: usize,
    pub grad_norm: f64,
    /// Objective value before each accepted step and after the last.
    pub objective_trace: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    pub w: Vec<f64>,
    pub b: f64,
    pub lambda: f64,
    pub report: SolverReport,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

impl Predictor for LogisticModel {
    fn predict(&self, x: &[Vec<f64>]) -> Result<Vec<f64>, PredictorError> {
        Ok(linear(&self.w, self.b, x)?.into_iter().map(sigmoid).collect())
    }
}

pub const LOGISTIC_TOL: f64 = 1e-6;
pub const LOGISTIC_MAX_ITER: usize = 5000;

struct Logistic<'a> {
    x: &'a DMatrix<f64>,
    y: &'a [f64],
    lambda: f64,
}

impl Logistic<'_> {
    /// Parameters are `[w.., b]`.
    fn objective(&self, theta: &DVector<f64>) -> f64 {
        let n = self.y.len() as f64;
        let d = self.x.ncols();
        let w = theta.rows(0, d);
        let z = self.x * w;
        let b = theta[d];
        let loss: f64 = z
            .iter()
            .zip(self.y)
            .map(|(&zi, &yi)| softplus(zi + b) - yi * (zi + b))
            .sum::<f64>()
            / n;
        loss + self.lambda * w.norm_squared() / n
    }

    fn gradient(&self, theta: &DVector<f64>) -> DVector<f64> {
        let n = self.y.len() as f64;
        let d = self.x.ncols();
        let w = theta.rows(0, d);
        let b = theta[d];
        let z = self.x * w;
        let r = DVector::from_iterator(self.y.len(), z.iter().zip(self.y).map(|(&zi, &yi)| sigmoid(zi + b) - yi));
        let gw = self.x.tr_mul(&r) / n + w * (2.0 * self.lambda / n);
        let mut g = DVector::zeros(d + 1);
        g.rows_mut(0, d).copy_from(&gw);
        g[d] = r.sum() / n;
        g
    }
}

/// Minimize mean log-loss `+ λ‖w‖²/n` by gradient descent with Armijo
/// backtracking. Directions are scaled by the diagonal of a Hessian bound
/// and each line search starts from the Barzilai-Borwein step.
pub fn logistic_fit(x: &[Vec<f64>], y: &[f64], lambda: f64) -> Result<LogisticModel, PredictorError> {
    let d = check(x, y)?;
    let positives = y.iter().filter(|&&v| v > 0.5).count();
    if positives == 0 || positives == y.len() {
        return Err(PredictorError::SingleClass);
    }
    let y: Vec<f64> = y.iter().map(|&v| if v > 0.5 { 1.0 } else { 0.0 }).collect();
    let n = y.len() as f64;
    let xm = matrix(x);
    let problem = Logistic { x: &xm, y: &y, lambda };
    let mut diag = DVector::from_element(d + 1, 0.25);
    for j in 0..d {
        diag[j] = (xm.column(j).norm_squared() / (4.0 * n) + 2.0 * lambda / n).max(1e-12);
    }
    let mut theta = DVector::zeros(d + 1);
    let mut f = problem.objective(&theta);
    let mut g = problem.gradient(&theta);
    let mut trace = vec![f];
    let mut step = 1.0;
    let mut iterations = 0;
    while g.norm() >= LOGISTIC_TOL && iterations < LOGISTIC_MAX_ITER {
        let dir = -g.component_div(&diag);
        let slope = g.dot(&dir);
        let mut t = step;
        let (next, f_next) = loop {
            let cand = &theta + &dir * t;
            let fc = problem.objective(&cand);
            if fc <= f + 1e-4 * t * slope || t < 1e-20 {
                break (cand, fc);
            }
            t *= 0.5;
        };
        if f_next > f {
            break;
        }
        let g_next = problem.gradient(&next);
        let s = &next - &theta;
        let sy = s.dot(&(&g_next - &g));
        let sds = s.component_mul(&diag).dot(&s);
        step = if sy > 0.0 { sds / sy } else { t * 2.0 };
        theta = next;
        f = f_next;
        g = g_next;
        trace.push(f);
        iterations += 1;
    }
    if !f.is_finite() {
        return Err(PredictorError::Divergence);
    }
    Ok(LogisticModel {
        w: theta.rows(0, d).iter().copied().collect(),
        b: theta[d],
        lambda,
        report: SolverReport {
            iterations,
            grad_norm: g.norm(),
            objective_trace: trace,
        },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MlpConfig {
    pub hidden: usize,
    pub lr: f64,
    pub alpha: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub validation_fraction: f64,
    pub patience: usize,
    /// Minimum relative decrease in the monitored loss that counts as improvement.
    pub tol: f64,
    pub seed: u64,
}

impl Default for MlpConfig {
    fn default() -> Self {
        MlpConfig {
            hidden: 100,
            lr: 1e-3,
            alpha: 1e-4,
            batch_size: 200,
            max_epochs: 200,
            validation_fraction: 0.1,
            patience: 10,
            tol: 1e-4,
            seed: 0,
        }
    }
}

/// One hidden ReLU layer with a linear (regression) or sigmoid
/// (classification) output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    pub task: Task,
    /// `[d][hidden]`
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: f64,
    pub inputs: usize,
    pub epochs_run: usize,
}

impl MlpModel {
    fn hidden(&self) -> usize {
        self.b1.len()
    }

    fn forward_row(&self, row: &[f64], h: &mut [f64]) -> f64 {
        let k = self.hidden();
        h.copy_from_slice(&self.b1);
        for (i, &v) in row.iter().enumerate() {
            if v != 0.0 {
                let w = &self.w1[i * k..(i + 1) * k];
                for (hj, wj) in h.iter_mut().zip(w) {
                    *hj += v * wj;
                }
            }
        }
        h.iter_mut().for_each(|v| *v = v.max(0.0));
        self.b2 + h.iter().zip(&self.w2).map(|(a, b)| a * b).sum::<f64>()
    }

    fn loss(&self, x: &[Vec<f64>], y: &[f64], idx: &[usize]) -> f64 {
        let mut h = vec![0.0; self.hidden()];
        let total: f64 = idx
            .iter()
            .map(|&i| {
                let z = self.forward_row(&x[i], &mut h);
                match self.task {
                    Task::Regression => 0.5 * (z - y[i]).powi(2),
                    Task::Classification => softplus(z) - y[i] * z,
                }
            })
            .sum();
        total / idx.len().max(1) as f64
    }
}

impl Predictor for MlpModel {
    fn predict(&self, x: &[Vec<f64>]) -> Result<Vec<f64>, PredictorError> {
        check_dims(x, self.inputs)?;
        let mut h = vec![0.0; self.hidden()];
        Ok(x.iter()
            .map(|r| {
                let z = self.forward_row(r, &mut h);
                match self.task {
                    Task::Regression => z,
                    Task::Classification => sigmoid(z),
                }
            })
            .collect())
    }
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Adam {
    fn new(n: usize) -> Adam {
        Adam {
            m: vec![0.0; n],
            v: vec![0.0; n],
        }
    }

    fn step(&mut self, p: &mut [f64], g: &[f64], lr: f64, t: i32) {
        let (b1, b2) = (0.9f64, 0.999f64);
        let step = lr * (1.0 - b2.powi(t)).sqrt() / (1.0 - b1.powi(t));
        for i in 0..p.len() {
            self.m[i] = b1 * self.m[i] + (1.0 - b1) * g[i];
            self.v[i] = b2 * self.v[i] + (1.0 - b2) * g[i] * g[i];
            p[i] -= step * self.m[i] / (self.v[i].sqrt() + 1e-8);
        }
    }
}

/// Train a one-hidden-layer network with Adam on mini-batches, stopping
/// early when the held-out loss stalls for `patience` epochs and restoring
/// the best weights seen.
pub fn mlp_fit(x: &[Vec<f64>], y: &[f64], task: Task, cfg: &MlpConfig) -> Result<MlpModel, PredictorError> {
    let d = check(x, y)?;
    if x.len() < 2 {
        return Err(PredictorError::TooFewRows(2));
    }
    let k = cfg.hidden;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut glorot = |fan_in: usize, fan_out: usize, n: usize| -> Vec<f64> {
        let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
        (0..n).map(|_| rng.random_range(-bound..bound)).collect()
    };
    let mut model = MlpModel {
        task,
        w1: glorot(d, k, d * k),
        b1: glorot(d, k, k),
        w2: glorot(k, 1, k),
        b2: glorot(k, 1, 1)[0],
        inputs: d,
        epochs_run: 0,
    };

    let mut order: Vec<usize> = (0..x.len()).collect();
    order.shuffle(&mut rng);
    let n_val = (cfg.validation_fraction * x.len() as f64).floor() as usize;
    let (val, train) = order.split_at(n_val);
    let mut train = train.to_vec();
    let monitor: Vec<usize> = if val.is_empty() { train.clone() } else { val.to_vec() };
    let batch = cfg.batch_size.min(train.len()).max(1);

    let n_params = d * k + k + k + 1;
    let mut adam = Adam::new(n_params);
    let mut grad = vec![0.0; n_params];
    let mut params = vec![0.0; n_params];
    let mut h = vec![0.0; k];
    let mut t = 0;
    let mut best = (f64::INFINITY, model.clone());
    let mut stale = 0;
    for epoch in 0..cfg.max_epochs {
        train.shuffle(&mut rng);
        for chunk in train.chunks(batch) {
            grad.iter_mut().for_each(|g| *g = 0.0);
            let (gw1, rest) = grad.split_at_mut(d * k);
            let (gb1, rest) = rest.split_at_mut(k);
            let (gw2, gb2) = rest.split_at_mut(k);
            let scale = 1.0 / chunk.len() as f64;
            for &i in chunk {
                let z = model.forward_row(&x[i], &mut h);
                let dz = match task {
                    Task::Regression => z - y[i],
                    Task::Classification => sigmoid(z) - y[i],
                } * scale;
                gb2[0] += dz;
                for j in 0..k {
                    gw2[j] += dz * h[j];
                    if h[j] > 0.0 {
                        let dh = dz * model.w2[j];
                        gb1[j] += dh;
                        for (f, &v) in x[i].iter().enumerate() {
                            if v != 0.0 {
                                gw1[f * k + j] += dh * v;
                            }
                        }
                    }
                }
            }
            let l2 = cfg.alpha * scale;
            for (g, w) in gw1.iter_mut().zip(&model.w1) {
                *g += l2 * w;
            }
            for (g, w) in gw2.iter_mut().zip(&model.w2) {
                *g += l2 * w;
            }
            params[..d * k].copy_from_slice(&model.w1);
            params[d * k..d * k + k].copy_from_slice(&model.b1);
            params[d * k + k..d * k + 2 * k].copy_from_slice(&model.w2);
            params[n_params - 1] = model.b2;
            t += 1;
            adam.step(&mut params, &grad, cfg.lr, t);
            model.w1.copy_from_slice(&params[..d * k]);
            model.b1.copy_from_slice(&params[d * k..d * k + k]);
            model.w2.copy_from_slice(&params[d * k + k..d * k + 2 * k]);
            model.b2 = params[n_params - 1];
        }
        model.epochs_run = epoch + 1;
        let loss = model.loss(x, y, &monitor);
        if !loss.is_finite() {
            return Err(PredictorError::Divergence);
        }
        if loss < best.0 * (1.0 - cfg.tol) {
            best = (loss, model.clone());
            stale = 0;
        } else {
            stale += 1;
            if loss < best.0 {
                best = (loss, model.clone());
            }
            if stale >= cfg.patience {
                break;
            }
        }
    }
    let mut out = best.1;
    out.epochs_run = model.epochs_run;
    Ok(out)
}

/// Predicts one fixed value; a reference point for the harness.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstantModel(pub f64);

impl Predictor for ConstantModel {
    fn predict(&self, x: &[Vec<f64>]) -> Result<Vec<f64>, PredictorError> {
        Ok(vec![self.0; x.len()])
    }
}

/// A way of fitting a predictor to a task.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ModelFamily {
    /// Ridge for regression, L2 logistic regression for classification.
    Linear { lambda: f64 },
    Mlp(MlpConfig),
    Constant(f64),
}

impl ModelFamily {
    pub fn name(&self) -> &'static str {
        match self {
            ModelFamily::Linear { .. } => "linear",
            ModelFamily::Mlp(_) => "mlp",
            ModelFamily::Constant(_) => "constant",
        }
    }

    /// Fit on `(x, y)`; `seed` perturbs stochastic families only.
    pub fn fit(&self, x: &[Vec<f64>], y: &[f64], task: Task, seed: u64) -> Result<Box<dyn Predictor>, PredictorError> {
        Ok(match *self {
            ModelFamily::Linear { lambda } => match task {
                Task::Regression => Box::new(ridge_fit(x, y, lambda)?),
                Task::Classification => Box::new(logistic_fit(x, y, lambda)?),
            },
            ModelFamily::Mlp(cfg) => Box::new(mlp_fit(x, y, task, &MlpConfig { seed, ..cfg })?),
            ModelFamily::Constant(c) => Box::new(ConstantModel(c)),
        })
    }
}
