//! Training-set augmentation: add synthetic shots from skilled finishers to
//! the training data and watch a target player's GAX move.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{extract_features, FeatureVector, N_FEATURES};
use crate::logistic::{design_matrix, train_on_design, TrainOptions, XgModel};
use crate::rng;
use crate::sampler::{check_alpha, sample_shot, SpatialShotDistribution};
use crate::shot::{ShotDataset, ShotRecord};

/// Share of failed retrainings above which the experiment is aborted.
pub const MAX_FAILURE_SHARE: f64 = 0.10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentationConfig {
    pub alphas: Vec<f64>,
    pub m_values: Vec<usize>,
    pub runs: usize,
    pub seed: u64,
}

impl AugmentationConfig {
    pub fn standard(seed: u64) -> Self {
        AugmentationConfig {
            alphas: vec![0.0, 5.0, 10.0, 15.0, 25.0],
            m_values: (0..=10).map(|i| i * 500).collect(),
            runs: 100,
            seed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AugmentationPoint {
    pub alpha: f64,
    pub m: usize,
    pub mean_gax: f64,
    pub sd_gax: f64,
    pub ci95_low: f64,
    pub ci95_high: f64,
    pub runs_ok: usize,
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentationResult {
    pub points: Vec<AugmentationPoint>,
    pub runs: usize,
    pub seed: u64,
    pub eval_shots: usize,
    pub eval_goals: usize,
    /// Target GAX under the model trained without any synthetic shots.
    pub base_gax: f64,
}

impl AugmentationResult {
    pub fn get(&self, alpha: f64, m: usize) -> Option<&AugmentationPoint> {
        self.points.iter().find(|p| p.alpha == alpha && p.m == m)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("alpha,m,mean_gax,ci95_low,ci95_high,sd_gax,runs_ok,failures\n");
        for p in &self.points {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                p.alpha, p.m, p.mean_gax, p.ci95_low, p.ci95_high, p.sd_gax, p.runs_ok, p.failures
            ));
        }
        out
    }
}

fn target_gax(model: &XgModel, eval: &[FeatureVector], goals: usize) -> Result<f64> {
    let xg = eval.iter().map(|f| model.predict(f)).sum::<Result<f64>>()?;
    Ok(goals as f64 - xg)
}

/// For every (alpha, m): `runs` times, sample `m` shots from `dist` with
/// labels drawn from `(1 + alpha/100)·xG_base`, append them to the base
/// training set, retrain (warm-started at the base fit) and score the
/// target's shots. `base_train` must not contain the target's shots.
pub fn run_training_augmentation(
    base_train: &ShotDataset,
    eval_shots: &[ShotRecord],
    dist: &SpatialShotDistribution,
    train_opts: &TrainOptions,
    cfg: &AugmentationConfig,
) -> Result<AugmentationResult> {
    if cfg.alphas.is_empty() || cfg.m_values.is_empty() || cfg.runs == 0 {
        return Err(Error::invalid("augmentation grid and runs must be non-empty"));
    }
    for &a in &cfg.alphas {
        check_alpha(a)?;
    }
    if eval_shots.is_empty() {
        return Err(Error::Empty("target shots"));
    }
    let eval_ids: std::collections::HashSet<&str> =
        eval_shots.iter().map(|s| s.shot_id.as_str()).collect();
    if base_train.shots.iter().any(|s| eval_ids.contains(s.shot_id.as_str())) {
        return Err(Error::invalid("base training data contains target shots"));
    }

    let (rows, labels) = design_matrix(&base_train.shots)?;
    let base = train_on_design(&rows, &labels, train_opts)?;
    let eval: Vec<FeatureVector> = eval_shots
        .iter()
        .map(extract_features)
        .collect::<Result<_>>()?;
    let eval_goals = eval_shots.iter().filter(|s| s.is_goal).count();
    let base_gax = target_gax(&base, &eval, eval_goals)?;
    let warm = TrainOptions {
        init: Some(base.theta()),
        ..train_opts.clone()
    };

    let mut points = Vec::new();
    for &alpha in &cfg.alphas {
        for &m in &cfg.m_values {
            let outcomes: Vec<Option<f64>> = if m == 0 {
                // no synthetic data: every run is the base fit
                vec![Some(base_gax); cfg.runs]
            } else {
                (0..cfg.runs as u64)
                    .into_par_iter()
                    .map(|run| {
                        let mut r = rng::stream(cfg.seed, &[rng::tag(alpha), m as u64, run]);
                        let mut x: Vec<[f64; N_FEATURES]> = Vec::with_capacity(rows.len() + m);
                        x.extend_from_slice(&rows);
                        let mut y = labels.clone();
                        for _ in 0..m {
                            let (s, _) = sample_shot(dist, &base, alpha, &mut r);
                            x.push(s.features.as_array());
                            y.push(s.outcome);
                        }
                        match train_on_design(&x, &y, &warm) {
                            Ok(model) if model.meta.converged => target_gax(&model, &eval, eval_goals).ok(),
                            Ok(_) => None,
                            Err(e) => {
                                log::warn!("alpha={alpha} m={m} run={run}: retraining failed: {e}");
                                None
                            }
                        }
                    })
                    .collect()
            };
            let ok: Vec<f64> = outcomes.iter().flatten().copied().collect();
            let failures = cfg.runs - ok.len();
            if failures as f64 > MAX_FAILURE_SHARE * cfg.runs as f64 {
                return Err(Error::Experiment(format!(
                    "{failures} of {} retrainings failed at alpha={alpha}, m={m}",
                    cfg.runs
                )));
            }
            let k = ok.len() as f64;
            let mean = ok.iter().sum::<f64>() / k;
            let sd = if ok.len() > 1 {
                (ok.iter().map(|g| (g - mean).powi(2)).sum::<f64>() / (k - 1.0)).sqrt()
            } else {
                0.0
            };
            let half = 1.96 * sd / k.sqrt();
            points.push(AugmentationPoint {
                alpha,
                m,
                mean_gax: mean,
                sd_gax: sd,
                ci95_low: mean - half,
                ci95_high: mean + half,
                runs_ok: ok.len(),
                failures,
            });
        }
    }
    Ok(AugmentationResult {
        points,
        runs: cfg.runs,
        seed: cfg.seed,
        eval_shots: eval_shots.len(),
        eval_goals,
        base_gax,
    })
}
