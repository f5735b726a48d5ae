//! Skill-mixture experiment: train on data mixing finishers of different
//! skill levels, then measure GAX of test players against the generator.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::N_FEATURES;
use crate::logistic::{train_on_design, TrainOptions, XgModel};
use crate::rng;
use crate::sampler::{check_alpha, sample_shot, SpatialShotDistribution};

pub const DEFAULT_ALPHA_LEVELS: [f64; 4] = [-5.0, 0.0, 10.0, 20.0];
/// Shot counts (thousands) per skill level, in level order.
pub const DEFAULT_ALLOCATIONS: [[f64; 4]; 3] = [
    [100.0, 800.0, 50.0, 50.0],
    [50.0, 750.0, 100.0, 100.0],
    [50.0, 650.0, 100.0, 200.0],
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureConfig {
    pub alpha_levels: Vec<f64>,
    /// Relative shot counts per level; rescaled to `train_size`.
    pub allocations: Vec<Vec<f64>>,
    pub train_size: usize,
    pub test_alphas: Vec<f64>,
    pub test_ns: Vec<usize>,
    pub reps: usize,
    pub seed: u64,
}

impl MixtureConfig {
    /// The reference design at a given training size (1,000,000 for the
    /// full experiment, 100,000 at desk scale).
    pub fn standard(train_size: usize, seed: u64) -> Self {
        MixtureConfig {
            alpha_levels: DEFAULT_ALPHA_LEVELS.to_vec(),
            allocations: DEFAULT_ALLOCATIONS.iter().map(|a| a.to_vec()).collect(),
            train_size,
            test_alphas: DEFAULT_ALPHA_LEVELS.to_vec(),
            test_ns: vec![25, 50, 75, 100, 125, 150],
            reps: 10_000,
            seed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixtureCell {
    pub alpha: f64,
    pub n: usize,
    /// Mean of goals minus xG under the trained model.
    pub mean_gax: f64,
    pub se: f64,
    /// Mean of goals minus xG under the generating model.
    pub truth_gax: f64,
    pub bias: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocationResult {
    pub counts: Vec<usize>,
    pub model: XgModel,
    pub cells: Vec<MixtureCell>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureResult {
    pub alpha_levels: Vec<f64>,
    pub allocations: Vec<AllocationResult>,
    pub reps: usize,
    pub seed: u64,
}

impl MixtureResult {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("allocation,counts,alpha,n,mean_gax,se,truth_gax,bias\n");
        for (i, a) in self.allocations.iter().enumerate() {
            let counts: Vec<String> = a.counts.iter().map(usize::to_string).collect();
            for c in &a.cells {
                out.push_str(&format!(
                    "{},{},{},{},{},{},{},{}\n",
                    i,
                    counts.join("|"),
                    c.alpha,
                    c.n,
                    c.mean_gax,
                    c.se,
                    c.truth_gax,
                    c.bias
                ));
            }
        }
        out
    }
}

/// Integer counts proportional to `weights` that sum to `total`
/// (largest remainder, ties to the lower index).
pub fn allocation_counts(weights: &[f64], total: usize) -> Result<Vec<usize>> {
    let sum: f64 = weights.iter().sum();
    if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) || !(sum > 0.0) {
        return Err(Error::invalid(format!("invalid allocation {weights:?}")));
    }
    let exact: Vec<f64> = weights.iter().map(|w| w / sum * total as f64).collect();
    let mut counts: Vec<usize> = exact.iter().map(|x| x.floor() as usize).collect();
    let mut rest = total - counts.iter().sum::<usize>();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        let (fa, fb) = (exact[a] - exact[a].floor(), exact[b] - exact[b].floor());
        fb.total_cmp(&fa).then(a.cmp(&b))
    });
    for i in order {
        if rest == 0 {
            break;
        }
        counts[i] += 1;
        rest -= 1;
    }
    Ok(counts)
}

/// `generator` labels every training and test shot; it is also the
/// ground truth the observed GAX is compared against.
pub fn run_skill_mixture(
    generator: &XgModel,
    dist: &SpatialShotDistribution,
    train_opts: &TrainOptions,
    cfg: &MixtureConfig,
) -> Result<MixtureResult> {
    if cfg.allocations.is_empty() || cfg.test_alphas.is_empty() || cfg.test_ns.is_empty() {
        return Err(Error::invalid("allocations and test grids must be non-empty"));
    }
    if cfg.reps == 0 || cfg.train_size == 0 {
        return Err(Error::invalid("reps and train_size must be positive"));
    }
    for a in cfg.alpha_levels.iter().chain(&cfg.test_alphas) {
        check_alpha(*a)?;
    }
    for (i, alloc) in cfg.allocations.iter().enumerate() {
        if alloc.len() != cfg.alpha_levels.len() {
            return Err(Error::invalid(format!(
                "allocation {i} has {} entries for {} skill levels",
                alloc.len(),
                cfg.alpha_levels.len()
            )));
        }
    }

    let warm = TrainOptions {
        init: Some(generator.theta()),
        ..train_opts.clone()
    };
    let mut trained = Vec::new();
    for (ai, alloc) in cfg.allocations.iter().enumerate() {
        let counts = allocation_counts(alloc, cfg.train_size)?;
        let mut x: Vec<[f64; N_FEATURES]> = Vec::with_capacity(cfg.train_size);
        let mut y = Vec::with_capacity(cfg.train_size);
        for (li, (&alpha, &count)) in cfg.alpha_levels.iter().zip(&counts).enumerate() {
            let mut r = rng::stream(cfg.seed, &[1, ai as u64, li as u64]);
            for _ in 0..count {
                let (s, _) = sample_shot(dist, generator, alpha, &mut r);
                x.push(s.features.as_array());
                y.push(s.outcome);
            }
        }
        let model = train_on_design(&x, &y, &warm)?;
        if !model.meta.converged {
            return Err(Error::Experiment(format!("training on allocation {ai} did not converge")));
        }
        log::info!("allocation {ai} {counts:?}: trained on {} shots", x.len());
        trained.push((counts, model));
    }

    let n_alloc = trained.len();
    let mut cells: Vec<Vec<MixtureCell>> = vec![Vec::new(); n_alloc];
    for &alpha in &cfg.test_alphas {
        for &n in &cfg.test_ns {
            // one test season per rep, scored by every trained model
            let per_rep: Vec<(Vec<f64>, f64)> = (0..cfg.reps as u64)
                .into_par_iter()
                .map(|rep| {
                    let mut r = rng::stream(cfg.seed, &[2, rng::tag(alpha), n as u64, rep]);
                    let mut goals = 0u32;
                    let mut truth = 0.0;
                    let mut xg = vec![0.0; n_alloc];
                    for _ in 0..n {
                        let (s, _) = sample_shot(dist, generator, alpha, &mut r);
                        goals += s.outcome as u32;
                        truth += s.xg_raw;
                        for (k, (_, m)) in trained.iter().enumerate() {
                            xg[k] += m.predict_unchecked(&s.features);
                        }
                    }
                    let g = goals as f64;
                    (xg.into_iter().map(|x| g - x).collect(), g - truth)
                })
                .collect();
            let k = cfg.reps as f64;
            let truth_gax = per_rep.iter().map(|r| r.1).sum::<f64>() / k;
            for (a, out) in cells.iter_mut().enumerate() {
                let obs: Vec<f64> = per_rep.iter().map(|r| r.0[a]).collect();
                let mean = obs.iter().sum::<f64>() / k;
                let var = if cfg.reps > 1 {
                    obs.iter().map(|g| (g - mean).powi(2)).sum::<f64>() / (k - 1.0)
                } else {
                    0.0
                };
                let bias = per_rep.iter().map(|r| r.0[a] - r.1).sum::<f64>() / k;
                out.push(MixtureCell {
                    alpha,
                    n,
                    mean_gax: mean,
                    se: (var / k).sqrt(),
                    truth_gax,
                    bias,
                });
            }
        }
    }
    Ok(MixtureResult {
        alpha_levels: cfg.alpha_levels.clone(),
        allocations: trained
            .into_iter()
            .zip(cells)
            .map(|((counts, model), cells)| AllocationResult { counts, model, cells })
            .collect(),
        reps: cfg.reps,
        seed: cfg.seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampler::build_distribution;
    use crate::synthetic;

    #[test]
    fn counts_preserve_total_and_proportions() {
        let c = allocation_counts(&DEFAULT_ALLOCATIONS[0], 100_000).unwrap();
        assert_eq!(c, vec![10_000, 80_000, 5_000, 5_000]);
        let c = allocation_counts(&[1.0, 1.0, 1.0], 10).unwrap();
        assert_eq!(c.iter().sum::<usize>(), 10);
        assert_eq!(c, vec![4, 3, 3]);
        assert!(allocation_counts(&[0.0, 0.0], 10).is_err());
    }

    #[test]
    fn level_mismatch_is_an_error() {
        let ds = synthetic::shot_dataset(2_000, 1);
        let dist = build_distribution(&ds.shots).unwrap();
        let mut cfg = MixtureConfig::standard(1_000, 1);
        cfg.allocations = vec![vec![1.0, 2.0]];
        assert!(run_skill_mixture(&synthetic::reference_model(), &dist, &TrainOptions::default(), &cfg).is_err());
    }

    #[test]
    fn pure_average_training_gives_near_zero_bias() {
        let ds = synthetic::shot_dataset(10_000, 5);
        let dist = build_distribution(&ds.shots).unwrap();
        let cfg = MixtureConfig {
            alpha_levels: vec![0.0],
            allocations: vec![vec![1.0]],
            train_size: 100_000,
            test_alphas: vec![0.0],
            test_ns: vec![100],
            reps: 2_000,
            seed: 8,
        };
        let r = run_skill_mixture(&synthetic::reference_model(), &dist, &TrainOptions::default(), &cfg).unwrap();
        let c = r.allocations[0].cells[0];
        assert!(c.mean_gax.abs() < 4.0 * c.se + 0.1, "{c:?}");
        assert!(c.bias.abs() < 0.3, "{c:?}");
    }
}
