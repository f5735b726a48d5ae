//! Dataset selections and the standard modelling chain shared by the CLI
//! and the end-to-end checks.

use crate::error::{Error, Result};
use crate::logistic::{train_logistic, TrainOptions, XgModel};
use crate::metrics::{evaluate, EvalReport};
use crate::multicalib::{fit_multicalibration, MultiCalibOptions, MultiCalibratedModel};
use crate::shot::{ShotDataset, ShotRecord};
use crate::split::stratified_split;
use crate::statsbomb::MatchSelector;
use crate::subgroup::{shot_groups, PositionPriors, SubgroupKey, VolumeThresholds};

/// StatsBomb open-data competition ids of the five major European leagues.
pub const BIG5_COMPETITIONS: [u64; 5] = [2, 11, 12, 9, 7];
pub const BIG5_SEASON: &str = "2015/2016";
pub const LA_LIGA: u64 = 11;
pub const PREMIER_LEAGUE: &str = "Premier League";
pub const TEST_FRACTION: f64 = 0.1;

pub fn big5_selector() -> MatchSelector {
    MatchSelector {
        competition_ids: BIG5_COMPETITIONS.to_vec(),
        season_names: vec![BIG5_SEASON.to_string()],
    }
}

/// Every La Liga season in the open data (the Messi biography).
pub fn la_liga_selector() -> MatchSelector {
    MatchSelector {
        competition_ids: vec![LA_LIGA],
        season_names: Vec::new(),
    }
}

#[derive(Debug, Clone)]
pub struct StandardFit {
    pub model: XgModel,
    pub train: ShotDataset,
    pub test: ShotDataset,
    pub report: EvalReport,
}

/// Stratified 90/10 split, fit on the training part, score the held-out part.
pub fn standard_model(ds: &ShotDataset, seed: u64, opts: &TrainOptions) -> Result<StandardFit> {
    let (train, test) = stratified_split(ds, TEST_FRACTION, seed)?;
    let model = train_logistic(&train, opts)?;
    let report = evaluate(&model, &test)?;
    Ok(StandardFit {
        model,
        train,
        test,
        report,
    })
}

/// Subgroup key per shot with the default priors and volume thresholds.
pub fn default_keys(ds: &ShotDataset) -> Result<Vec<SubgroupKey>> {
    shot_groups(ds, &PositionPriors::default(), &VolumeThresholds::default())
}

pub fn multicalibrate(
    base: &XgModel,
    ds: &ShotDataset,
    opts: &MultiCalibOptions,
) -> Result<(MultiCalibratedModel, Vec<SubgroupKey>)> {
    let keys = default_keys(ds)?;
    let mc = fit_multicalibration(base, &ds.shots, &keys, opts)?;
    Ok((mc, keys))
}

/// Resolves a player by id or name fragment and returns their shots.
pub fn player_shots(ds: &ShotDataset, needle: &str) -> Result<(u64, String, Vec<ShotRecord>)> {
    let id = ds
        .find_player(needle)
        .ok_or_else(|| Error::invalid(format!("no player matches '{needle}'")))?;
    let name = ds.player_names.get(&id).cloned().unwrap_or_else(|| id.to_string());
    let shots = ds.shots.iter().filter(|s| s.player_id == id).cloned().collect();
    Ok((id, name, shots))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic;

    #[test]
    fn standard_chain_on_synthetic_data() {
        let ds = synthetic::shot_dataset(20_000, 4);
        let fit = standard_model(&ds, 1, &TrainOptions::default()).unwrap();
        assert_eq!(fit.test.len(), 2_000);
        assert!(fit.model.meta.converged);
        assert!(fit.report.auroc.unwrap() > 0.7, "{:?}", fit.report);
        let (mc, keys) = multicalibrate(&fit.model, &ds, &MultiCalibOptions::default()).unwrap();
        assert_eq!(keys.len(), ds.len());
        assert!(mc.converged);
    }

    #[test]
    fn player_lookup_by_name_and_id() {
        let ds = synthetic::shot_dataset(3_000, 2);
        let (id, name, shots) = player_shots(&ds, "Player 17").unwrap();
        assert_eq!((id, name.as_str()), (17, "Player 17"));
        assert!(shots.iter().all(|s| s.player_id == 17));
        assert!(player_shots(&ds, "nobody at all").is_err());
    }
}
