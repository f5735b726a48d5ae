//! Shared inputs for the benchmarks.

use xgbias::logistic::design_matrix;
use xgbias::pipeline::default_keys;
use xgbias::{synthetic, ShotDataset, SubgroupKey};

pub struct Fixture {
    pub shots: ShotDataset,
    pub rows: Vec<[f64; 6]>,
    pub labels: Vec<bool>,
    pub keys: Vec<SubgroupKey>,
}

pub fn fixture(n: usize) -> Fixture {
    let shots = synthetic::shot_dataset(n, 7);
    let (rows, labels) = design_matrix(&shots.shots).expect("synthetic shots are in frame");
    let keys = default_keys(&shots).expect("synthetic players have minutes");
    Fixture {
        shots,
        rows,
        labels,
        keys,
    }
}

/// Shot probabilities spread like a season's worth of xG values.
pub fn xg_list(n: usize) -> Vec<f64> {
    (0..n).map(|i| 0.02 + 0.6 * ((i * 7919) % 1000) as f64 / 1000.0).collect()
}
