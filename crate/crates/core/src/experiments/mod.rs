//! End-to-end simulation experiments on top of the shot sampler.
//!
//! Every experiment is a pure function of its inputs and a master seed.
//! Repetitions run in parallel on independently keyed streams and are
//! reduced in index order, so results do not depend on the thread count.

mod augmentation;
mod mixture;

pub use augmentation::{run_training_augmentation, AugmentationConfig, AugmentationPoint, AugmentationResult};
pub use mixture::{
    allocation_counts, run_skill_mixture, AllocationResult, MixtureCell, MixtureConfig, MixtureResult,
    DEFAULT_ALLOCATIONS, DEFAULT_ALPHA_LEVELS,
};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::logistic::XgModel;
use crate::sampler::{
    build_distribution, consistency_probability, overperformance_probability, OverperformanceEstimate,
    SpatialShotDistribution,
};
use crate::shot::ShotRecord;

pub const H1_ALPHAS: [f64; 5] = [0.0, 5.0, 10.0, 15.0, 25.0];
pub const H1_SHOTS: [usize; 6] = [25, 50, 75, 100, 125, 150];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct H1Result {
    /// Alpha-major, then n, in the order given.
    pub cells: Vec<OverperformanceEstimate>,
    pub reps: usize,
    pub seed: u64,
}

impl H1Result {
    pub fn get(&self, alpha: f64, n: usize) -> Option<&OverperformanceEstimate> {
        self.cells.iter().find(|c| c.alpha == alpha && c.n == n)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("alpha,n,mean_gax,std_gax,p_overperform,se\n");
        for c in &self.cells {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                c.alpha, c.n, c.mean_gax, c.std_gax, c.p_overperform, c.se
            ));
        }
        out
    }

    /// `P(at least k of m seasons overperform)` per cell.
    pub fn consistency(&self, k: u32, m: u32) -> Result<Vec<(f64, usize, f64)>> {
        self.cells
            .iter()
            .map(|c| Ok((c.alpha, c.n, consistency_probability(c.p_overperform, k, m)?)))
            .collect()
    }
}

fn check_grid(alphas: &[f64], ns: &[usize], reps: usize) -> Result<()> {
    if alphas.is_empty() || ns.is_empty() {
        return Err(Error::invalid("alpha and shot-count grids must be non-empty"));
    }
    if reps == 0 {
        return Err(Error::invalid("reps must be at least 1"));
    }
    Ok(())
}

/// Table-1 style grid. All alphas share the draws of a given (n, rep), so
/// per-repetition goals are monotone in alpha.
pub fn run_h1(
    model: &XgModel,
    dist: &SpatialShotDistribution,
    alphas: &[f64],
    ns: &[usize],
    reps: usize,
    seed: u64,
) -> Result<H1Result> {
    check_grid(alphas, ns, reps)?;
    let mut cells = Vec::with_capacity(alphas.len() * ns.len());
    for &alpha in alphas {
        for &n in ns {
            let est = overperformance_probability(dist, model, alpha, n, reps, seed)?;
            log::debug!(
                "h1 alpha={alpha} n={n}: mean {:.3} sd {:.3} p {:.4}",
                est.mean_gax,
                est.std_gax,
                est.p_overperform
            );
            cells.push(est);
        }
    }
    Ok(H1Result { cells, reps, seed })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileCell {
    pub alpha: f64,
    pub n: usize,
    pub p_player: f64,
    pub p_global: f64,
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlayerProfileResult {
    pub players: BTreeMap<String, Vec<ProfileCell>>,
    pub skipped: Vec<String>,
}

impl PlayerProfileResult {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("player,alpha,n,p_player,p_global,delta\n");
        for (player, cells) in &self.players {
            for c in cells {
                out.push_str(&format!(
                    "{},{},{},{},{},{}\n",
                    csv_field(player),
                    c.alpha,
                    c.n,
                    c.p_player,
                    c.p_global,
                    c.delta
                ));
            }
        }
        out
    }
}

pub(crate) fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Overperformance probability from each player's own shot map minus the
/// probability under the global map. Both use the same random streams, so a
/// player whose map equals the global one gets a delta of exactly zero.
#[allow(clippy::too_many_arguments)]
pub fn run_player_profiles(
    model: &XgModel,
    global: &SpatialShotDistribution,
    player_shots: &BTreeMap<String, Vec<ShotRecord>>,
    alphas: &[f64],
    ns: &[usize],
    reps: usize,
    seed: u64,
) -> Result<PlayerProfileResult> {
    check_grid(alphas, ns, reps)?;
    let baseline = run_h1(model, global, alphas, ns, reps, seed)?;
    let mut result = PlayerProfileResult {
        players: BTreeMap::new(),
        skipped: Vec::new(),
    };
    for (player, shots) in player_shots {
        if shots.is_empty() {
            log::warn!("player '{player}' has no shots; skipped");
            result.skipped.push(player.clone());
            continue;
        }
        let dist = build_distribution(shots)?;
        let own = run_h1(model, &dist, alphas, ns, reps, seed)?;
        let cells = own
            .cells
            .iter()
            .zip(&baseline.cells)
            .map(|(p, g)| ProfileCell {
                alpha: p.alpha,
                n: p.n,
                p_player: p.p_overperform,
                p_global: g.p_overperform,
                delta: p.p_overperform - g.p_overperform,
            })
            .collect();
        result.players.insert(player.clone(), cells);
    }
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{PITCH_LENGTH_M, PITCH_WIDTH_M};
    use crate::shot::{BodyPart, PROVIDER_LENGTH, PROVIDER_WIDTH};
    use crate::synthetic;

    fn setup() -> (XgModel, SpatialShotDistribution, crate::shot::ShotDataset) {
        let ds = synthetic::shot_dataset(20_000, 12);
        let dist = build_distribution(&ds.shots).unwrap();
        (synthetic::reference_model(), dist, ds)
    }

    #[test]
    fn h1_grid_shape_and_determinism() {
        let (model, dist, _) = setup();
        let a = run_h1(&model, &dist, &[0.0, 25.0], &[25, 50], 300, 4).unwrap();
        let b = run_h1(&model, &dist, &[0.0, 25.0], &[25, 50], 300, 4).unwrap();
        assert_eq!(a.cells.len(), 4);
        assert_eq!(a.to_csv(), b.to_csv());
        assert!(a.to_csv().starts_with("alpha,n,mean_gax,std_gax,p_overperform,se\n"));
        assert!(run_h1(&model, &dist, &[], &[25], 10, 1).is_err());
    }

    #[test]
    fn means_monotone_in_alpha_with_shared_draws() {
        let (model, dist, _) = setup();
        let r = run_h1(&model, &dist, &H1_ALPHAS, &[50, 100], 500, 9).unwrap();
        for n in [50, 100] {
            let means: Vec<f64> = H1_ALPHAS.iter().map(|a| r.get(*a, n).unwrap().mean_gax).collect();
            assert!(means.windows(2).all(|w| w[0] <= w[1]), "{means:?}");
        }
    }

    #[test]
    fn identical_player_map_has_zero_delta() {
        let (model, dist, ds) = setup();
        let mut sets = BTreeMap::new();
        sets.insert("everyone".to_string(), ds.shots.clone());
        sets.insert("nobody".to_string(), Vec::new());
        let r = run_player_profiles(&model, &dist, &sets, &[0.0, 10.0], &[50], 300, 3).unwrap();
        assert!(r.players["everyone"].iter().all(|c| c.delta == 0.0));
        assert_eq!(r.skipped, vec!["nobody".to_string()]);
    }

    #[test]
    fn close_range_player_has_positive_delta() {
        let (model, dist, ds) = setup();
        // every shot from 3 m, central
        let x = (PITCH_LENGTH_M - 3.0) * PROVIDER_LENGTH / PITCH_LENGTH_M;
        let y = PITCH_WIDTH_M / 2.0 * PROVIDER_WIDTH / PITCH_WIDTH_M;
        let shots: Vec<ShotRecord> = ds.shots[..200]
            .iter()
            .map(|s| ShotRecord {
                start_x: x,
                start_y: y,
                body_part: BodyPart::Foot,
                ..s.clone()
            })
            .collect();
        let mut sets = BTreeMap::new();
        sets.insert("poacher".to_string(), shots);
        let r = run_player_profiles(&model, &dist, &sets, &[5.0, 25.0], &[50, 100], 2_000, 5).unwrap();
        for c in &r.players["poacher"] {
            assert!(c.delta > 0.0, "{c:?}");
        }
    }
}
