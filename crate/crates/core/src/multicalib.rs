//! Multi-calibration post-processing and "average player" baselines.
//!
//! Fitting repeatedly finds the (group, bin) cell whose mean prediction is
//! furthest from its conversion rate and shifts every prediction in it by
//! the gap. The recorded shifts are replayed at prediction time, so a shot
//! can be re-scored as if its shooter belonged to any fitted group.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{extract_features, FeatureVector};
use crate::logistic::XgModel;
use crate::shot::{Position, ShotDataset, ShotRecord, TeamTier};
use crate::subgroup::{SubgroupKey, VolumeTier};

pub const BIN_EDGES: [f64; 11] = [
    0.0, 0.015, 0.023, 0.034, 0.052, 0.079, 0.12, 0.18, 0.27, 0.40, 1.0,
];
pub const TOLERANCE: f64 = 0.01;
pub const MAX_ITERATIONS: usize = 100;
pub const MIN_SUPPORT: usize = 100;
pub const CLAMP_LO: f64 = 0.001;
pub const CLAMP_HI: f64 = 0.999;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinSchema {
    pub edges: Vec<f64>,
}

impl Default for BinSchema {
    fn default() -> Self {
        BinSchema {
            edges: BIN_EDGES.to_vec(),
        }
    }
}

impl BinSchema {
    pub fn new(edges: Vec<f64>) -> Result<Self> {
        let ok = edges.len() >= 2
            && edges[0] == 0.0
            && *edges.last().unwrap() == 1.0
            && edges.windows(2).all(|w| w[0] < w[1]);
        if !ok {
            return Err(Error::invalid(format!(
                "bin edges must increase strictly from 0 to 1, got {edges:?}"
            )));
        }
        Ok(BinSchema { edges })
    }

    pub fn n_bins(&self) -> usize {
        self.edges.len() - 1
    }

    /// Half-open `[e_i, e_{i+1})`, last bin closed.
    pub fn bin_of(&self, p: f64) -> usize {
        let last = self.n_bins() - 1;
        self.edges[1..last + 1]
            .iter()
            .position(|&hi| p < hi)
            .unwrap_or(last)
    }
}

/// Subgroup predicate; `None` matches anything.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct GroupPattern {
    pub volume: Option<VolumeTier>,
    pub position: Option<Position>,
    pub team: Option<TeamTier>,
}

impl GroupPattern {
    pub fn matches(&self, key: &SubgroupKey) -> bool {
        self.volume.is_none_or(|v| v == key.volume)
            && self.position.is_none_or(|p| p == key.position)
            && self.team.is_none_or(|t| t == key.team)
    }

    pub fn label(&self) -> String {
        let part = |s: Option<&'static str>| s.unwrap_or("*");
        format!(
            "{}/{}/{}",
            part(self.position.map(Position::as_str)),
            part(self.volume.map(VolumeTier::as_str)),
            part(self.team.map(TeamTier::as_str)),
        )
    }
}

/// The nine position × volume cells, position-major; team is a wildcard.
pub fn position_volume_groups() -> Vec<GroupPattern> {
    Position::ALL
        .iter()
        .flat_map(|&p| {
            VolumeTier::ALL.iter().map(move |&v| GroupPattern {
                volume: Some(v),
                position: Some(p),
                team: None,
            })
        })
        .collect()
}

/// Representative key for a position × volume baseline.
pub fn baseline_key(position: Position, volume: VolumeTier) -> SubgroupKey {
    SubgroupKey {
        volume,
        position,
        team: TeamTier::Other,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationUpdate {
    pub group: GroupPattern,
    pub bin: usize,
    pub delta: f64,
    pub iter: usize,
}

/// The single update rule used by both fitting and replay.
#[inline]
pub fn apply_update(p: f64, update: &CalibrationUpdate, schema: &BinSchema) -> f64 {
    if schema.bin_of(p) == update.bin {
        (p + update.delta).clamp(CLAMP_LO, CLAMP_HI)
    } else {
        p
    }
}

pub fn replay(mut p: f64, key: &SubgroupKey, updates: &[CalibrationUpdate], schema: &BinSchema) -> f64 {
    for u in updates {
        if u.group.matches(key) {
            p = apply_update(p, u, schema);
        }
    }
    p
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiCalibOptions {
    pub groups: Vec<GroupPattern>,
    pub schema: BinSchema,
    pub tolerance: f64,
    pub max_iter: usize,
    pub min_support: usize,
}

impl Default for MultiCalibOptions {
    fn default() -> Self {
        MultiCalibOptions {
            groups: position_volume_groups(),
            schema: BinSchema::default(),
            tolerance: TOLERANCE,
            max_iter: MAX_ITERATIONS,
            min_support: MIN_SUPPORT,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellStats {
    pub group: usize,
    pub bin: usize,
    pub n: usize,
    pub mean_pred: f64,
    pub conversion: f64,
}

impl CellStats {
    pub fn violation(&self) -> f64 {
        (self.conversion - self.mean_pred).abs()
    }
}

/// Statistics for every (group, bin) cell with at least `min_support` shots.
pub fn supported_cells(
    predictions: &[f64],
    outcomes: &[bool],
    membership: &[Vec<usize>],
    n_groups: usize,
    schema: &BinSchema,
    min_support: usize,
) -> Vec<CellStats> {
    let nb = schema.n_bins();
    let mut n = vec![0usize; n_groups * nb];
    let mut sum_p = vec![0.0f64; n_groups * nb];
    let mut goals = vec![0usize; n_groups * nb];
    for ((p, y), groups) in predictions.iter().zip(outcomes).zip(membership) {
        let b = schema.bin_of(*p);
        for &g in groups {
            let c = g * nb + b;
            n[c] += 1;
            sum_p[c] += p;
            goals[c] += *y as usize;
        }
    }
    (0..n_groups * nb)
        .filter(|&c| n[c] >= min_support && n[c] > 0)
        .map(|c| CellStats {
            group: c / nb,
            bin: c % nb,
            n: n[c],
            mean_pred: sum_p[c] / n[c] as f64,
            conversion: goals[c] as f64 / n[c] as f64,
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationFit {
    pub updates: Vec<CalibrationUpdate>,
    pub converged: bool,
    pub predictions: Vec<f64>,
}

/// Runs the boosting loop on raw predictions.
pub fn fit_updates(
    base_predictions: &[f64],
    outcomes: &[bool],
    keys: &[SubgroupKey],
    opts: &MultiCalibOptions,
) -> Result<CalibrationFit> {
    if base_predictions.len() != outcomes.len() || keys.len() != outcomes.len() {
        return Err(Error::invalid(
            "predictions, outcomes and subgroup keys must have equal length",
        ));
    }
    if opts.groups.is_empty() {
        return Err(Error::invalid("no groups declared"));
    }
    if !(opts.tolerance > 0.0) {
        return Err(Error::invalid("tolerance must be positive"));
    }
    for (index, &value) in base_predictions.iter().enumerate() {
        if !(0.0..=1.0).contains(&value) {
            return Err(Error::InvalidProbability { index, value });
        }
    }
    let membership: Vec<Vec<usize>> = keys
        .iter()
        .map(|k| {
            opts.groups
                .iter()
                .enumerate()
                .filter(|(_, g)| g.matches(k))
                .map(|(i, _)| i)
                .collect()
        })
        .collect();

    let mut preds = base_predictions.to_vec();
    let mut updates = Vec::new();
    let mut converged = false;
    for iter in 0..=opts.max_iter {
        let cells = supported_cells(
            &preds,
            outcomes,
            &membership,
            opts.groups.len(),
            &opts.schema,
            opts.min_support,
        );
        if iter == 0 && cells.is_empty() {
            return Err(Error::invalid(format!(
                "no (group, bin) cell reaches the minimum support of {} shots",
                opts.min_support
            )));
        }
        // cells come ordered by group then bin, so strict > keeps the
        // lowest-index cell on ties
        let mut worst: Option<CellStats> = None;
        for c in cells {
            if c.violation() > opts.tolerance
                && worst.is_none_or(|w| c.violation() > w.violation())
            {
                worst = Some(c);
            }
        }
        let Some(cell) = worst else {
            converged = true;
            break;
        };
        if iter == opts.max_iter {
            break;
        }
        let update = CalibrationUpdate {
            group: opts.groups[cell.group],
            bin: cell.bin,
            delta: cell.conversion - cell.mean_pred,
            iter,
        };
        for (p, groups) in preds.iter_mut().zip(&membership) {
            if groups.contains(&cell.group) {
                *p = apply_update(*p, &update, &opts.schema);
            }
        }
        log::debug!(
            "iteration {iter}: {} bin {} delta {:+.5} (n = {})",
            update.group.label(),
            cell.bin,
            update.delta,
            cell.n
        );
        updates.push(update);
    }
    Ok(CalibrationFit {
        updates,
        converged,
        predictions: preds,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiCalibratedModel {
    pub base_model: XgModel,
    pub bin_edges: Vec<f64>,
    pub groups: Vec<GroupPattern>,
    pub updates: Vec<CalibrationUpdate>,
    pub tolerance: f64,
    pub max_iter: usize,
    pub min_support: usize,
    pub converged: bool,
}

pub fn fit_multicalibration(
    base: &XgModel,
    shots: &[ShotRecord],
    keys: &[SubgroupKey],
    opts: &MultiCalibOptions,
) -> Result<MultiCalibratedModel> {
    let preds = base.predict_dataset(shots)?;
    let outcomes: Vec<bool> = shots.iter().map(|s| s.is_goal).collect();
    let fit = fit_updates(&preds, &outcomes, keys, opts)?;
    if !fit.converged {
        log::warn!(
            "multi-calibration stopped after {} iterations without reaching tolerance {}",
            opts.max_iter,
            opts.tolerance
        );
    }
    Ok(MultiCalibratedModel {
        base_model: base.clone(),
        bin_edges: opts.schema.edges.clone(),
        groups: opts.groups.clone(),
        updates: fit.updates,
        tolerance: opts.tolerance,
        max_iter: opts.max_iter,
        min_support: opts.min_support,
        converged: fit.converged,
    })
}

impl MultiCalibratedModel {
    pub fn schema(&self) -> Result<BinSchema> {
        BinSchema::new(self.bin_edges.clone())
    }

    pub fn is_fitted_group(&self, key: &SubgroupKey) -> bool {
        self.groups.iter().any(|g| g.matches(key))
    }

    /// Replays the updates on a base probability for `key`.
    pub fn adjust(&self, base_p: f64, key: &SubgroupKey) -> Result<f64> {
        Ok(replay(base_p, key, &self.updates, &self.schema()?))
    }

    pub fn predict_as_group(&self, features: &FeatureVector, baseline: &SubgroupKey) -> Result<f64> {
        if !self.is_fitted_group(baseline) {
            return Err(Error::invalid(format!(
                "baseline {baseline:?} matches none of the fitted groups"
            )));
        }
        self.adjust(self.base_model.predict(features)?, baseline)
    }

    /// Multi-calibrated predictions for shots under their own keys.
    pub fn predict_shots(&self, shots: &[ShotRecord], keys: &[SubgroupKey]) -> Result<Vec<f64>> {
        if shots.len() != keys.len() {
            return Err(Error::invalid("one subgroup key per shot is required"));
        }
        let schema = self.schema()?;
        shots
            .iter()
            .zip(keys)
            .map(|(s, k)| {
                let p = self.base_model.predict_shot(s)?;
                Ok(replay(p, k, &self.updates, &schema))
            })
            .collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let m: MultiCalibratedModel = serde_json::from_str(text)?;
        m.schema()?;
        m.base_model.validate()?;
        Ok(m)
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

/// `Σ_shots Σ_g w_g · predict_as_group(shot, g)`.
pub fn weighted_average_player(
    mc: &MultiCalibratedModel,
    features: &[FeatureVector],
    weights: &[(SubgroupKey, f64)],
) -> Result<f64> {
    let total: f64 = weights.iter().map(|(_, w)| w).sum();
    if (total - 1.0).abs() > 1e-9 || weights.iter().any(|(_, w)| !(*w >= 0.0)) {
        return Err(Error::invalid(format!(
            "baseline weights must be non-negative and sum to 1 (sum = {total})"
        )));
    }
    let mut cum = 0.0;
    for f in features {
        for (key, w) in weights {
            if *w > 0.0 {
                cum += w * mc.predict_as_group(f, key)?;
            }
        }
    }
    Ok(cum)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BaselineWeighting {
    Players,
    Shots,
}

impl std::str::FromStr for BaselineWeighting {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "players" => Ok(BaselineWeighting::Players),
            "shots" => Ok(BaselineWeighting::Shots),
            other => Err(Error::invalid(format!("unknown weighting '{other}' (players|shots)"))),
        }
    }
}

/// Share of players (with at least one shot) or of shots per position ×
/// volume baseline, from per-shot subgroup keys.
pub fn baseline_weights(
    ds: &ShotDataset,
    keys: &[SubgroupKey],
    weighting: BaselineWeighting,
) -> Result<Vec<(SubgroupKey, f64)>> {
    if keys.len() != ds.shots.len() {
        return Err(Error::invalid("one subgroup key per shot is required"));
    }
    let mut counts: BTreeMap<(Position, VolumeTier), f64> = BTreeMap::new();
    match weighting {
        BaselineWeighting::Shots => {
            for k in keys {
                *counts.entry((k.position, k.volume)).or_default() += 1.0;
            }
        }
        BaselineWeighting::Players => {
            let mut seen: BTreeMap<u64, (Position, VolumeTier)> = BTreeMap::new();
            for (s, k) in ds.shots.iter().zip(keys) {
                seen.entry(s.player_id).or_insert((k.position, k.volume));
            }
            for cell in seen.into_values() {
                *counts.entry(cell).or_default() += 1.0;
            }
        }
    }
    let total: f64 = counts.values().sum();
    if total == 0.0 {
        return Err(Error::Empty("shots for baseline weights"));
    }
    Ok(counts
        .into_iter()
        .map(|((p, v), c)| (baseline_key(p, v), c / total))
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineCell {
    pub position: Position,
    pub volume: VolumeTier,
    pub cum_xg: f64,
    pub gax: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineReport {
    pub n_shots: usize,
    pub goals: usize,
    pub standard_xg: f64,
    pub standard_gax: f64,
    pub cells: Vec<BaselineCell>,
    pub weighting: BaselineWeighting,
    pub weighted_average_xg: f64,
    pub weighted_average_gax: f64,
    /// Relative change of GAX against the weighted average player vs the
    /// standard model, in percent.
    pub gax_increase_pct: f64,
}

pub fn baseline_report(
    mc: &MultiCalibratedModel,
    shots: &[ShotRecord],
    weights: &[(SubgroupKey, f64)],
    weighting: BaselineWeighting,
) -> Result<BaselineReport> {
    let features = shots
        .iter()
        .map(extract_features)
        .collect::<Result<Vec<_>>>()?;
    let goals = shots.iter().filter(|s| s.is_goal).count();
    let standard_xg: f64 = features
        .iter()
        .map(|f| mc.base_model.predict(f))
        .sum::<Result<f64>>()?;
    let mut cells = Vec::new();
    for position in Position::ALL {
        for volume in VolumeTier::ALL {
            let key = baseline_key(position, volume);
            let cum_xg = features
                .iter()
                .map(|f| mc.predict_as_group(f, &key))
                .sum::<Result<f64>>()?;
            cells.push(BaselineCell {
                position,
                volume,
                cum_xg,
                gax: goals as f64 - cum_xg,
            });
        }
    }
    let weighted_average_xg = weighted_average_player(mc, &features, weights)?;
    let standard_gax = goals as f64 - standard_xg;
    let weighted_average_gax = goals as f64 - weighted_average_xg;
    Ok(BaselineReport {
        n_shots: shots.len(),
        goals,
        standard_xg,
        standard_gax,
        cells,
        weighting,
        weighted_average_xg,
        weighted_average_gax,
        gax_increase_pct: 100.0 * (weighted_average_gax - standard_gax) / standard_gax.abs(),
    })
}

impl BaselineReport {
    /// Nine rows `position,volume,cum_xg`.
    pub fn to_long_csv(&self) -> String {
        let mut out = String::from("position,volume,cum_xg\n");
        for c in &self.cells {
            out.push_str(&format!("{},{},{}\n", c.position, c.volume, c.cum_xg));
        }
        out
    }

    /// Positions as rows, volume tiers as columns.
    pub fn to_matrix_csv(&self) -> String {
        let mut out = String::from("position,low,mid,high\n");
        for position in Position::ALL {
            let row: Vec<String> = VolumeTier::ALL
                .iter()
                .map(|v| {
                    self.cells
                        .iter()
                        .find(|c| c.position == position && c.volume == *v)
                        .map(|c| c.cum_xg.to_string())
                        .unwrap_or_default()
                })
                .collect();
            out.push_str(&format!("{position},{}\n", row.join(",")));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeaderboardRow {
    pub rank: usize,
    pub player_id: u64,
    pub player: String,
    pub shots: usize,
    pub goals: usize,
    pub provider_xg: Option<f64>,
    pub provider_gax: Option<f64>,
    pub standard_xg: f64,
    pub standard_gax: f64,
    pub standard_pct: f64,
    pub multicalibrated_xg: f64,
    pub multicalibrated_gax: f64,
    pub multicalibrated_pct: f64,
}

/// Over- and underperformance across the qualifying cohort for one model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CohortSummary {
    pub exceeders: usize,
    /// Mean of `100 (G - xG) / xG` over players with G > xG.
    pub mean_pct_over_exceeders: f64,
    /// Mean of the same ratio over every qualifying player.
    pub mean_pct_all: f64,
    /// `100 (ΣG - ΣxG) / ΣxG` over the exceeders.
    pub pooled_pct_over_exceeders: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Leaderboard {
    pub rows: Vec<LeaderboardRow>,
    pub min_goals: usize,
    pub standard: Option<CohortSummary>,
    pub multicalibrated: Option<CohortSummary>,
    pub provider: Option<CohortSummary>,
    /// Rank correlation between standard and multi-calibrated GAX.
    pub spearman: Option<f64>,
}

fn pct(goals: usize, xg: f64) -> f64 {
    100.0 * (goals as f64 - xg) / xg
}

fn cohort(entries: &[(usize, f64)]) -> Option<CohortSummary> {
    if entries.is_empty() {
        return None;
    }
    let ex: Vec<&(usize, f64)> = entries.iter().filter(|(g, x)| *g as f64 > *x).collect();
    let mean = |v: &[f64]| if v.is_empty() { 0.0 } else { v.iter().sum::<f64>() / v.len() as f64 };
    let ex_pct: Vec<f64> = ex.iter().map(|(g, x)| pct(*g, *x)).collect();
    let all_pct: Vec<f64> = entries.iter().map(|(g, x)| pct(*g, *x)).collect();
    let (g_sum, x_sum) = ex
        .iter()
        .fold((0usize, 0.0), |(a, b), (g, x)| (a + g, b + x));
    Some(CohortSummary {
        exceeders: ex.len(),
        mean_pct_over_exceeders: mean(&ex_pct),
        mean_pct_all: mean(&all_pct),
        pooled_pct_over_exceeders: if x_sum > 0.0 { pct(g_sum, x_sum) } else { 0.0 },
    })
}

fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && values[idx[j + 1]] == values[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

/// Pearson correlation of average ranks. `None` for fewer than two points
/// or a constant input.
pub fn spearman(a: &[f64], b: &[f64]) -> Option<f64> {
    if a.len() != b.len() || a.len() < 2 {
        return None;
    }
    let (ra, rb) = (average_ranks(a), average_ranks(b));
    let n = ra.len() as f64;
    let (ma, mb) = (ra.iter().sum::<f64>() / n, rb.iter().sum::<f64>() / n);
    let cov: f64 = ra.iter().zip(&rb).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = ra.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = rb.iter().map(|y| (y - mb).powi(2)).sum();
    (va > 0.0 && vb > 0.0).then(|| cov / (va * vb).sqrt())
}

/// Per-player GAX under the standard and multi-calibrated models (and the
/// provider's values when every shot of the player carries one), for
/// players with at least `min_goals` goals. Sorted by standard GAX.
pub fn gax_leaderboard(
    season: &ShotDataset,
    standard: &[f64],
    multicalibrated: &[f64],
    min_goals: usize,
) -> Result<Leaderboard> {
    let n = season.shots.len();
    if standard.len() != n || multicalibrated.len() != n {
        return Err(Error::invalid("one prediction per shot is required for both models"));
    }
    #[derive(Default)]
    struct Acc {
        shots: usize,
        goals: usize,
        std: f64,
        mc: f64,
        provider: Option<f64>,
    }
    let mut acc: BTreeMap<u64, Acc> = BTreeMap::new();
    for (i, s) in season.shots.iter().enumerate() {
        let a = acc.entry(s.player_id).or_insert_with(|| Acc {
            provider: Some(0.0),
            ..Default::default()
        });
        a.shots += 1;
        a.goals += s.is_goal as usize;
        a.std += standard[i];
        a.mc += multicalibrated[i];
        a.provider = match (a.provider, s.provider_xg) {
            (Some(t), Some(x)) => Some(t + x),
            _ => None,
        };
    }
    let mut rows: Vec<LeaderboardRow> = acc
        .into_iter()
        .filter(|(_, a)| a.goals >= min_goals)
        .map(|(id, a)| LeaderboardRow {
            rank: 0,
            player_id: id,
            player: season.player_names.get(&id).cloned().unwrap_or_else(|| id.to_string()),
            shots: a.shots,
            goals: a.goals,
            provider_xg: a.provider,
            provider_gax: a.provider.map(|x| a.goals as f64 - x),
            standard_xg: a.std,
            standard_gax: a.goals as f64 - a.std,
            standard_pct: pct(a.goals, a.std),
            multicalibrated_xg: a.mc,
            multicalibrated_gax: a.goals as f64 - a.mc,
            multicalibrated_pct: pct(a.goals, a.mc),
        })
        .collect();
    rows.sort_by(|a, b| {
        b.standard_gax
            .total_cmp(&a.standard_gax)
            .then(a.player_id.cmp(&b.player_id))
    });
    for (i, r) in rows.iter_mut().enumerate() {
        r.rank = i + 1;
    }
    let std_entries: Vec<(usize, f64)> = rows.iter().map(|r| (r.goals, r.standard_xg)).collect();
    let mc_entries: Vec<(usize, f64)> =
        rows.iter().map(|r| (r.goals, r.multicalibrated_xg)).collect();
    let provider_entries: Option<Vec<(usize, f64)>> =
        rows.iter().map(|r| r.provider_xg.map(|x| (r.goals, x))).collect();
    let gs: Vec<f64> = rows.iter().map(|r| r.standard_gax).collect();
    let gm: Vec<f64> = rows.iter().map(|r| r.multicalibrated_gax).collect();
    Ok(Leaderboard {
        standard: cohort(&std_entries),
        multicalibrated: cohort(&mc_entries),
        provider: provider_entries.and_then(|e| cohort(&e)),
        spearman: spearman(&gs, &gm),
        rows,
        min_goals,
    })
}

impl Leaderboard {
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in &self.rows {
            w.serialize(r)?;
        }
        if self.rows.is_empty() {
            w.write_record([
                "rank",
                "player_id",
                "player",
                "shots",
                "goals",
                "provider_xg",
                "provider_gax",
                "standard_xg",
                "standard_gax",
                "standard_pct",
                "multicalibrated_xg",
                "multicalibrated_gax",
                "multicalibrated_pct",
            ])?;
        }
        let bytes = w.into_inner().map_err(|e| Error::invalid(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use crate::synthetic;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::Rng;

    fn key(p: Position, v: VolumeTier) -> SubgroupKey {
        baseline_key(p, v)
    }

    /// Nine groups, log-uniform predictions, outcomes drawn from the
    /// predictions except in `bumped`, whose true rate is prediction + bump.
    fn synthetic_cells(
        per_group: usize,
        bumped: Option<usize>,
        bump: f64,
        seed: u64,
    ) -> (Vec<f64>, Vec<bool>, Vec<SubgroupKey>) {
        let groups = position_volume_groups();
        let mut r = rng::stream(seed, &[77]);
        let (mut p, mut y, mut k) = (Vec::new(), Vec::new(), Vec::new());
        for (gi, g) in groups.iter().enumerate() {
            for _ in 0..per_group {
                let pred = (0.005f64.ln() + r.random::<f64>() * (0.8f64 / 0.005).ln()).exp();
                let truth = if Some(gi) == bumped { (pred + bump).min(1.0) } else { pred };
                p.push(pred);
                y.push(r.random::<f64>() < truth);
                k.push(key(g.position.unwrap(), g.volume.unwrap()));
            }
        }
        (p, y, k)
    }

    #[test]
    fn bins_half_open_last_closed() {
        let s = BinSchema::default();
        assert_eq!(s.n_bins(), 10);
        assert_eq!(s.bin_of(0.0), 0);
        assert_eq!(s.bin_of(0.015), 1);
        assert_eq!(s.bin_of(0.0149), 0);
        assert_eq!(s.bin_of(0.40), 9);
        assert_eq!(s.bin_of(1.0), 9);
        assert!(BinSchema::new(vec![0.0, 0.5, 0.4, 1.0]).is_err());
        assert!(BinSchema::new(vec![0.1, 1.0]).is_err());
    }

    #[test]
    fn nine_groups_position_major() {
        let g = position_volume_groups();
        assert_eq!(g.len(), 9);
        assert_eq!(g[0].position, Some(Position::Defender));
        assert_eq!(g[0].volume, Some(VolumeTier::Low));
        assert_eq!(g[8].position, Some(Position::Attacker));
        assert!(g[4].matches(&SubgroupKey {
            volume: VolumeTier::Mid,
            position: Position::Midfielder,
            team: TeamTier::UclWinner
        }));
    }

    #[test]
    fn calibrated_input_needs_no_updates() {
        // every cell's conversion equals its mean prediction exactly
        let mut p = Vec::new();
        let mut y = Vec::new();
        let mut k = Vec::new();
        for g in position_volume_groups() {
            for i in 0..1000 {
                p.push(0.1);
                y.push(i % 10 == 0);
                k.push(key(g.position.unwrap(), g.volume.unwrap()));
            }
        }
        let fit = fit_updates(&p, &y, &k, &MultiCalibOptions::default()).unwrap();
        assert!(fit.updates.is_empty());
        assert!(fit.converged);
    }

    #[test]
    fn first_update_targets_injected_group() {
        let (p, y, k) = synthetic_cells(20_000, Some(4), 0.10, 1);
        let opts = MultiCalibOptions::default();
        // brute-force scan of every cell before fitting
        let membership: Vec<Vec<usize>> = k
            .iter()
            .map(|key| (0..9).filter(|&g| opts.groups[g].matches(key)).collect())
            .collect();
        let mut best = (0.0, 0, 0);
        for g in 0..9 {
            for b in 0..10 {
                let idx: Vec<usize> = (0..p.len())
                    .filter(|&i| membership[i].contains(&g) && opts.schema.bin_of(p[i]) == b)
                    .collect();
                if idx.len() < MIN_SUPPORT {
                    continue;
                }
                let m = idx.iter().map(|&i| p[i]).sum::<f64>() / idx.len() as f64;
                let c = idx.iter().filter(|&&i| y[i]).count() as f64 / idx.len() as f64;
                if (c - m).abs() > best.0 {
                    best = ((c - m).abs(), g, b);
                }
            }
        }
        let fit = fit_updates(&p, &y, &k, &opts).unwrap();
        let first = fit.updates[0];
        assert_eq!(first.group, opts.groups[4]);
        assert_eq!((best.1, best.2), (4, first.bin));
        assert!(first.delta > 0.07 && first.delta < 0.13, "delta {}", first.delta);
    }

    #[test]
    fn too_little_support_is_an_error() {
        let (p, y, k) = synthetic_cells(50, None, 0.0, 2);
        assert!(fit_updates(&p, &y, &k, &MultiCalibOptions::default()).is_err());
    }

    #[test]
    fn fit_and_replay_agree_bitwise_after_json() {
        let ds = synthetic::shot_dataset(20_000, 5);
        let keys: Vec<SubgroupKey> = ds
            .shots
            .iter()
            .map(|s| {
                let pos = ds.position_of(s.player_id);
                let vol = VolumeTier::ALL[(s.player_id % 3) as usize];
                key(pos, vol)
            })
            .collect();
        let base = synthetic::reference_model();
        let opts = MultiCalibOptions {
            min_support: 50,
            ..Default::default()
        };
        let mc = fit_multicalibration(&base, &ds.shots, &keys, &opts).unwrap();
        let preds = base.predict_dataset(&ds.shots).unwrap();
        let outcomes: Vec<bool> = ds.shots.iter().map(|s| s.is_goal).collect();
        let fit = fit_updates(&preds, &outcomes, &keys, &opts).unwrap();
        let back = MultiCalibratedModel::from_json(&mc.to_json().unwrap()).unwrap();
        let replayed = back.predict_shots(&ds.shots, &keys).unwrap();
        for (a, b) in replayed.iter().zip(&fit.predictions) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        // own group is the identity baseline
        let f = extract_features(&ds.shots[0]).unwrap();
        assert_eq!(
            back.predict_as_group(&f, &keys[0]).unwrap().to_bits(),
            replayed[0].to_bits()
        );
    }

    #[test]
    fn weights_validation_and_concentration() {
        let ds = synthetic::shot_dataset(4_000, 6);
        let keys: Vec<SubgroupKey> = ds
            .shots
            .iter()
            .map(|s| key(ds.position_of(s.player_id), VolumeTier::ALL[(s.player_id % 3) as usize]))
            .collect();
        let mc = fit_multicalibration(
            &synthetic::reference_model(),
            &ds.shots,
            &keys,
            &MultiCalibOptions {
                min_support: 30,
                ..Default::default()
            },
        )
        .unwrap();
        let feats: Vec<FeatureVector> =
            ds.shots[..50].iter().map(|s| extract_features(s).unwrap()).collect();
        let k = key(Position::Attacker, VolumeTier::High);
        let one = weighted_average_player(&mc, &feats, &[(k, 1.0)]).unwrap();
        let direct: f64 = feats.iter().map(|f| mc.predict_as_group(f, &k).unwrap()).sum();
        assert_abs_diff_eq!(one, direct, epsilon = 1e-12);
        assert!(weighted_average_player(&mc, &feats, &[(k, 0.5)]).is_err());

        let uniform: Vec<(SubgroupKey, f64)> = position_volume_groups()
            .iter()
            .map(|g| (key(g.position.unwrap(), g.volume.unwrap()), 1.0 / 9.0))
            .collect();
        let report = baseline_report(&mc, &ds.shots[..50], &uniform, BaselineWeighting::Players).unwrap();
        let mean9 = report.cells.iter().map(|c| c.cum_xg).sum::<f64>() / 9.0;
        assert_abs_diff_eq!(report.weighted_average_xg, mean9, epsilon = 1e-9);

        let w = baseline_weights(&ds, &keys, BaselineWeighting::Players).unwrap();
        assert_abs_diff_eq!(w.iter().map(|x| x.1).sum::<f64>(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn unfitted_baseline_rejected() {
        let mc = MultiCalibratedModel {
            base_model: synthetic::reference_model(),
            bin_edges: BIN_EDGES.to_vec(),
            groups: vec![GroupPattern {
                volume: Some(VolumeTier::High),
                position: Some(Position::Attacker),
                team: None,
            }],
            updates: vec![],
            tolerance: TOLERANCE,
            max_iter: MAX_ITERATIONS,
            min_support: MIN_SUPPORT,
            converged: true,
        };
        let f = FeatureVector::central(10.0, crate::shot::BodyPart::Foot);
        assert!(mc.predict_as_group(&f, &key(Position::Defender, VolumeTier::Low)).is_err());
    }

    #[test]
    fn spearman_basics() {
        assert_abs_diff_eq!(spearman(&[1.0, 2.0, 3.0], &[10.0, 20.0, 30.0]).unwrap(), 1.0);
        assert_abs_diff_eq!(spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap(), -1.0);
        assert!(spearman(&[1.0], &[1.0]).is_none());
    }

    #[test]
    fn leaderboard_min_goals_and_order() {
        let ds = synthetic::shot_dataset(3_000, 8);
        let preds = synthetic::reference_model().predict_dataset(&ds.shots).unwrap();
        let lb = gax_leaderboard(&ds, &preds, &preds, 5).unwrap();
        assert!(lb.rows.iter().all(|r| r.goals >= 5));
        assert!(lb.rows.windows(2).all(|w| w[0].standard_gax >= w[1].standard_gax));
        assert_abs_diff_eq!(lb.spearman.unwrap(), 1.0, epsilon = 1e-12);
        let empty = gax_leaderboard(&ds, &preds, &preds, 10_000).unwrap();
        assert!(empty.rows.is_empty());
        assert!(empty.to_csv().unwrap().starts_with("rank,"));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn postconditions_hold(seed in 0u64..1000, bump in -0.05f64..0.15) {
            let (p, y, k) = synthetic_cells(3_000, Some((seed % 9) as usize), bump, seed);
            let opts = MultiCalibOptions::default();
            let fit = fit_updates(&p, &y, &k, &opts).unwrap();
            prop_assert!(fit.predictions.iter().zip(&p).all(|(a, b)| a == b || (CLAMP_LO..=CLAMP_HI).contains(a)));
            // every update shrinks its own cell's violation
            let mut cur = p.clone();
            for u in &fit.updates {
                let idx: Vec<usize> = (0..cur.len())
                    .filter(|&i| u.group.matches(&k[i]) && opts.schema.bin_of(cur[i]) == u.bin)
                    .collect();
                let conv = idx.iter().filter(|&&i| y[i]).count() as f64 / idx.len() as f64;
                let before = (conv - idx.iter().map(|&i| cur[i]).sum::<f64>() / idx.len() as f64).abs();
                for &i in &idx {
                    cur[i] = apply_update(cur[i], u, &opts.schema);
                }
                let after = (conv - idx.iter().map(|&i| cur[i]).sum::<f64>() / idx.len() as f64).abs();
                prop_assert!(after < before);
            }
            if fit.converged {
                let membership: Vec<Vec<usize>> = k.iter()
                    .map(|key| (0..9).filter(|&g| opts.groups[g].matches(key)).collect())
                    .collect();
                for c in supported_cells(&fit.predictions, &y, &membership, 9, &opts.schema, MIN_SUPPORT) {
                    prop_assert!(c.violation() <= TOLERANCE);
                }
            }
        }
    }
}
