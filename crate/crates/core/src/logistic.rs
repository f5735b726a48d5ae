//! L2-penalised logistic regression fitted with damped Newton iterations.
//!
//! The objective is
//!
//! ```text
//! J(b, w) = ||w||^2 / (2 C) + sum_i logloss(y_i, sigmoid(b + w . x_i))
//! ```
//!
//! with the intercept `b` left unpenalised. Each iteration solves the Newton
//! system with a Cholesky factorisation and halves the step until the
//! objective does not increase. Convergence is declared when the largest
//! component of the per-sample gradient `grad J / n` falls below `tol`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{extract_features, FeatureVector, FEATURE_NAMES, N_FEATURES};
use crate::shot::{ShotDataset, ShotRecord};

#[derive(Debug, Clone)]
pub struct TrainOptions {
    pub penalty_c: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub max_halvings: usize,
    /// Starting point `[intercept, w_1, .., w_d]`; zeros when absent.
    pub init: Option<Vec<f64>>,
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions {
            penalty_c: 1.0,
            tol: 1e-8,
            max_iter: 100,
            max_halvings: 30,
            init: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub n_train: usize,
    pub converged: bool,
    pub iterations: usize,
    pub final_loss: f64,
    pub gradient_max_norm: f64,
    #[serde(default)]
    pub loss_history: Vec<f64>,
}

/// Output of [`fit_logistic`] on an arbitrary design.
#[derive(Debug, Clone, PartialEq)]
pub struct LogisticFit<const D: usize> {
    pub intercept: f64,
    pub weights: [f64; D],
    pub meta: TrainingMeta,
}

#[inline]
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// log(1 + exp(z)) without overflow.
#[inline]
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

#[inline]
fn linear<const D: usize>(theta: &[f64], x: &[f64; D]) -> f64 {
    let mut z = theta[0];
    for j in 0..D {
        z += theta[j + 1] * x[j];
    }
    z
}

/// Penalised negative log-likelihood at `theta = [b, w..]`.
pub fn penalized_loss<const D: usize>(
    rows: &[[f64; D]],
    labels: &[bool],
    theta: &[f64],
    penalty_c: f64,
) -> f64 {
    let data: f64 = rows
        .iter()
        .zip(labels)
        .map(|(x, &y)| {
            let z = linear(theta, x);
            softplus(z) - if y { z } else { 0.0 }
        })
        .sum();
    let ridge: f64 = theta[1..].iter().map(|w| w * w).sum::<f64>() / (2.0 * penalty_c);
    data + ridge
}

/// Analytic gradient of [`penalized_loss`].
pub fn penalized_gradient<const D: usize>(
    rows: &[[f64; D]],
    labels: &[bool],
    theta: &[f64],
    penalty_c: f64,
) -> Vec<f64> {
    let mut g = vec![0.0; D + 1];
    for (x, &y) in rows.iter().zip(labels) {
        let r = sigmoid(linear(theta, x)) - y as u8 as f64;
        g[0] += r;
        for j in 0..D {
            g[j + 1] += r * x[j];
        }
    }
    for j in 1..=D {
        g[j] += theta[j] / penalty_c;
    }
    g
}

/// `penalized_loss(theta + step) - penalized_loss(theta)`, summed from
/// per-sample differences so that changes far below the loss's own rounding
/// error are still resolved.
pub fn penalized_loss_change<const D: usize>(
    rows: &[[f64; D]],
    labels: &[bool],
    theta: &[f64],
    step: &[f64],
    penalty_c: f64,
) -> f64 {
    let mut data = 0.0;
    for (x, &y) in rows.iter().zip(labels) {
        let z = linear(theta, x);
        let mut d = step[0];
        for j in 0..D {
            d += step[j + 1] * x[j];
        }
        // softplus(z + d) - softplus(z) = ln(1 + sigmoid(z) (e^d - 1))
        data += (sigmoid(z) * d.exp_m1()).ln_1p() - if y { d } else { 0.0 };
    }
    let ridge: f64 = theta[1..]
        .iter()
        .zip(&step[1..])
        .map(|(w, s)| s * (2.0 * w + s))
        .sum::<f64>()
        / (2.0 * penalty_c);
    data + ridge
}

fn gradient_and_hessian<const D: usize>(
    rows: &[[f64; D]],
    labels: &[bool],
    theta: &[f64],
    penalty_c: f64,
) -> (DVector<f64>, DMatrix<f64>) {
    let k = D + 1;
    let mut g = DVector::zeros(k);
    let mut h = DMatrix::zeros(k, k);
    let mut aug = vec![1.0; k];
    for (x, &y) in rows.iter().zip(labels) {
        aug[1..].copy_from_slice(x);
        let p = sigmoid(linear(theta, x));
        let r = p - y as u8 as f64;
        let w = p * (1.0 - p);
        for a in 0..k {
            g[a] += r * aug[a];
            let wa = w * aug[a];
            for b in 0..=a {
                h[(a, b)] += wa * aug[b];
            }
        }
    }
    for a in 0..k {
        for b in 0..a {
            h[(b, a)] = h[(a, b)];
        }
    }
    for j in 1..k {
        g[j] += theta[j] / penalty_c;
        h[(j, j)] += 1.0 / penalty_c;
    }
    (g, h)
}

fn newton_direction(g: &DVector<f64>, h: DMatrix<f64>) -> Result<DVector<f64>> {
    if let Some(chol) = h.clone().cholesky() {
        return Ok(chol.solve(g));
    }
    let scale = h.trace().abs().max(1.0);
    let mut ridge = 1e-10 * scale;
    for _ in 0..6 {
        let mut boosted = h.clone();
        for i in 0..boosted.nrows() {
            boosted[(i, i)] += ridge;
        }
        if let Some(chol) = boosted.cholesky() {
            log::warn!("hessian not positive definite, ridge {ridge:e} applied");
            return Ok(chol.solve(g));
        }
        ridge *= 100.0;
    }
    Err(Error::SingularHessian)
}

/// Fits `P(y = 1 | x) = sigmoid(b + w . x)` on a dense design.
pub fn fit_logistic<const D: usize>(
    rows: &[[f64; D]],
    labels: &[bool],
    opts: &TrainOptions,
) -> Result<LogisticFit<D>> {
    if rows.len() != labels.len() {
        return Err(Error::invalid(format!(
            "{} rows but {} labels",
            rows.len(),
            labels.len()
        )));
    }
    if rows.is_empty() {
        return Err(Error::Empty("training set"));
    }
    let positives = labels.iter().filter(|&&y| y).count();
    if positives == 0 {
        return Err(Error::SingleClass { present: "misses" });
    }
    if positives == labels.len() {
        return Err(Error::SingleClass { present: "goals" });
    }
    if rows.iter().any(|r| r.iter().any(|v| !v.is_finite())) {
        return Err(Error::NonFinite("design matrix"));
    }
    if !(opts.penalty_c > 0.0) {
        return Err(Error::invalid("penalty C must be positive"));
    }

    let n = rows.len() as f64;
    let mut theta = match &opts.init {
        Some(init) if init.len() == D + 1 => init.clone(),
        Some(init) => {
            return Err(Error::invalid(format!(
                "initial point has {} entries, expected {}",
                init.len(),
                D + 1
            )))
        }
        None => vec![0.0; D + 1],
    };
    let mut loss = penalized_loss(rows, labels, &theta, opts.penalty_c);
    let mut history = vec![loss];
    let mut iterations = 0;
    let mut grad_norm = f64::INFINITY;
    let mut converged = false;

    while iterations < opts.max_iter {
        let (g, h) = gradient_and_hessian(rows, labels, &theta, opts.penalty_c);
        grad_norm = g.amax();
        if grad_norm / n <= opts.tol {
            converged = true;
            break;
        }
        let direction = newton_direction(&g, h)?;
        iterations += 1;

        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..=opts.max_halvings {
            let delta: Vec<f64> = direction.iter().map(|d| -step * d).collect();
            let change = penalized_loss_change(rows, labels, &theta, &delta, opts.penalty_c);
            if change <= 0.0 {
                accepted = Some((delta, change));
                break;
            }
            step *= 0.5;
        }
        match accepted {
            Some((delta, change)) => {
                for (t, d) in theta.iter_mut().zip(&delta) {
                    *t += d;
                }
                // tracked through exact differences, so the history is
                // non-increasing by construction
                loss += change;
                history.push(loss);
            }
            // numerically at the optimum: no step decreases the loss any more
            None => break,
        }
    }
    if !converged {
        let g = penalized_gradient(rows, labels, &theta, opts.penalty_c);
        grad_norm = g.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        converged = grad_norm / n <= opts.tol;
    }

    let mut weights = [0.0; D];
    weights.copy_from_slice(&theta[1..]);
    Ok(LogisticFit {
        intercept: theta[0],
        weights,
        meta: TrainingMeta {
            n_train: rows.len(),
            converged,
            iterations,
            final_loss: loss,
            gradient_max_norm: grad_norm,
            loss_history: history,
        },
    })
}

/// A fitted xG model. Immutable once trained; prediction is pure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct XgModel {
    pub feature_names: Vec<String>,
    pub weights: Vec<f64>,
    pub intercept: f64,
    pub penalty: f64,
    pub meta: TrainingMeta,
}

impl XgModel {
    pub fn from_parts(intercept: f64, weights: [f64; N_FEATURES], penalty: f64, meta: TrainingMeta) -> Self {
        XgModel {
            feature_names: FEATURE_NAMES.iter().map(|s| s.to_string()).collect(),
            weights: weights.to_vec(),
            intercept,
            penalty,
            meta,
        }
    }

    pub fn theta(&self) -> Vec<f64> {
        std::iter::once(self.intercept)
            .chain(self.weights.iter().copied())
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        let expected: Vec<String> = FEATURE_NAMES.iter().map(|s| s.to_string()).collect();
        if self.feature_names != expected || self.weights.len() != N_FEATURES {
            return Err(Error::invalid(format!(
                "model features {:?} do not match {:?}",
                self.feature_names, expected
            )));
        }
        Ok(())
    }

    pub fn linear_score(&self, features: &FeatureVector) -> f64 {
        self.intercept
            + self
                .weights
                .iter()
                .zip(features.as_array())
                .map(|(w, x)| w * x)
                .sum::<f64>()
    }

    /// Goal probability, strictly inside (0, 1).
    pub fn predict(&self, features: &FeatureVector) -> Result<f64> {
        if !features.is_finite() {
            return Err(Error::NonFinite("feature vector"));
        }
        Ok(self.predict_unchecked(features))
    }

    pub(crate) fn predict_unchecked(&self, features: &FeatureVector) -> f64 {
        sigmoid(self.linear_score(features)).clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0)
    }

    pub fn predict_shot(&self, shot: &ShotRecord) -> Result<f64> {
        self.predict(&extract_features(shot)?)
    }

    pub fn predict_dataset(&self, shots: &[ShotRecord]) -> Result<Vec<f64>> {
        shots.iter().map(|s| self.predict_shot(s)).collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let model: XgModel = serde_json::from_str(text)?;
        model.validate()?;
        Ok(model)
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

/// Convenience alias for [`XgModel::predict`].
pub fn predict_xg(model: &XgModel, features: &FeatureVector) -> Result<f64> {
    model.predict(features)
}

pub fn design_matrix(shots: &[ShotRecord]) -> Result<(Vec<[f64; N_FEATURES]>, Vec<bool>)> {
    let mut rows = Vec::with_capacity(shots.len());
    let mut labels = Vec::with_capacity(shots.len());
    for s in shots {
        rows.push(extract_features(s)?.as_array());
        labels.push(s.is_goal);
    }
    Ok((rows, labels))
}

pub fn train_on_design(
    rows: &[[f64; N_FEATURES]],
    labels: &[bool],
    opts: &TrainOptions,
) -> Result<XgModel> {
    let fit = fit_logistic(rows, labels, opts)?;
    if !fit.meta.converged {
        log::warn!(
            "logistic regression stopped after {} iterations without converging (|g|={:e})",
            fit.meta.iterations,
            fit.meta.gradient_max_norm
        );
    }
    Ok(XgModel::from_parts(
        fit.intercept,
        fit.weights,
        opts.penalty_c,
        fit.meta,
    ))
}

/// Trains the reference xG model on a shot dataset.
pub fn train_logistic(train: &ShotDataset, opts: &TrainOptions) -> Result<XgModel> {
    let (rows, labels) = design_matrix(&train.shots)?;
    train_on_design(&rows, &labels, opts)
}
