use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::rng;
use crate::shot::ShotDataset;

/// Seeded train/test split that keeps the goal/miss ratio in both parts.
///
/// The test part holds `round(test_fraction * N)` shots; goals are allotted
/// to it in proportion to the overall goal rate. Shots keep their original
/// order within each part.
pub fn stratified_split(
    dataset: &ShotDataset,
    test_fraction: f64,
    seed: u64,
) -> Result<(ShotDataset, ShotDataset)> {
    if !(0.0..1.0).contains(&test_fraction) {
        return Err(Error::invalid(format!(
            "test fraction {test_fraction} outside [0, 1)"
        )));
    }
    if dataset.is_empty() {
        return Err(Error::Empty("dataset to split"));
    }
    let (mut goals, mut misses): (Vec<usize>, Vec<usize>) =
        (0..dataset.len()).partition(|&i| dataset.shots[i].is_goal);
    if goals.is_empty() {
        return Err(Error::SingleClass { present: "misses" });
    }
    if misses.is_empty() {
        return Err(Error::SingleClass { present: "goals" });
    }
    let n = dataset.len() as f64;
    let n_test = (test_fraction * n).round() as usize;
    let test_goals = ((n_test as f64) * goals.len() as f64 / n).round() as usize;
    let test_misses = n_test - test_goals;

    goals.shuffle(&mut rng::stream(seed, &[0]));
    misses.shuffle(&mut rng::stream(seed, &[1]));

    let mut in_test = vec![false; dataset.len()];
    for &i in goals.iter().take(test_goals).chain(misses.iter().take(test_misses)) {
        in_test[i] = true;
    }
    let (test, train): (Vec<_>, Vec<_>) = dataset
        .shots
        .iter()
        .cloned()
        .zip(in_test)
        .partition(|(_, t)| *t);
    let strip = |v: Vec<(crate::shot::ShotRecord, bool)>| v.into_iter().map(|(s, _)| s).collect();
    Ok((
        dataset.with_shots(strip(train), format!("{} [train seed={seed}]", dataset.provenance)),
        dataset.with_shots(strip(test), format!("{} [test seed={seed}]", dataset.provenance)),
    ))
}
