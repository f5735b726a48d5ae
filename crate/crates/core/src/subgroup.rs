//! Proxy subgroups (shot volume, position, team strength), calibration
//! curves and conversion-by-distance tables.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::shot_distance;
use crate::shot::{BodyPart, PlayerProfile, Position, ShotDataset, ShotRecord, TeamRating, TeamTier};

/// Prior weight in minutes (three full games).
pub const PRIOR_MINUTES: f64 = 270.0;
pub const LOW_VOLUME_THRESHOLD: f64 = 0.875;
pub const HIGH_VOLUME_THRESHOLD: f64 = 2.526;
pub const MIN_BIN_N: usize = 100;
pub const DEFAULT_BANDWIDTH: f64 = 0.02;
pub const CALIBRATION_BINS: usize = 100;
/// Distance band edges in meters; the last band is open-ended.
pub const DISTANCE_BANDS_M: [f64; 5] = [0.0, 5.0, 11.0, 16.0, 25.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VolumeTier {
    Low,
    Mid,
    High,
}

impl VolumeTier {
    pub const ALL: [VolumeTier; 3] = [VolumeTier::Low, VolumeTier::Mid, VolumeTier::High];

    pub fn as_str(self) -> &'static str {
        match self {
            VolumeTier::Low => "low",
            VolumeTier::Mid => "mid",
            VolumeTier::High => "high",
        }
    }
}

impl fmt::Display for VolumeTier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for VolumeTier {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "low" => Ok(VolumeTier::Low),
            "mid" | "medium" => Ok(VolumeTier::Mid),
            "high" => Ok(VolumeTier::High),
            other => Err(Error::invalid(format!("unknown volume tier '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SubgroupKey {
    pub volume: VolumeTier,
    pub position: Position,
    pub team: TeamTier,
}

/// Shots per 90 minutes by position.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PositionPriors {
    pub defender: f64,
    pub midfielder: f64,
    pub attacker: f64,
}

impl Default for PositionPriors {
    fn default() -> Self {
        PositionPriors {
            defender: 0.4,
            midfielder: 1.1,
            attacker: 2.1,
        }
    }
}

impl PositionPriors {
    pub fn get(&self, position: Position) -> f64 {
        match position {
            Position::Defender => self.defender,
            Position::Midfielder => self.midfielder,
            Position::Attacker => self.attacker,
        }
    }
}

/// `90 (shots + 3 prior) / (minutes + 270)`: the positional prior acts as
/// three extra games at the position's average rate.
pub fn smoothed_volume(shots: f64, minutes: f64, prior_per90: f64) -> Result<f64> {
    if !(shots >= 0.0) || !(minutes >= 0.0) || !(prior_per90 > 0.0) {
        return Err(Error::invalid(format!(
            "shot volume needs shots >= 0, minutes >= 0, prior > 0 (got {shots}, {minutes}, {prior_per90})"
        )));
    }
    if !minutes.is_finite() || !shots.is_finite() || !prior_per90.is_finite() {
        return Err(Error::NonFinite("shot volume input"));
    }
    let prior_shots = prior_per90 * PRIOR_MINUTES / 90.0;
    Ok(90.0 * (shots + prior_shots) / (minutes + PRIOR_MINUTES))
}

pub fn smoothed_shot_volume(profile: &PlayerProfile, priors: &PositionPriors) -> Result<f64> {
    smoothed_volume(
        profile.total_shots as f64,
        profile.total_minutes as f64,
        priors.get(profile.primary_position),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VolumeThresholds {
    pub low: f64,
    pub high: f64,
}

impl Default for VolumeThresholds {
    fn default() -> Self {
        VolumeThresholds {
            low: LOW_VOLUME_THRESHOLD,
            high: HIGH_VOLUME_THRESHOLD,
        }
    }
}

impl VolumeThresholds {
    /// Strict on both sides: a volume equal to a threshold is mid.
    pub fn tier(&self, theta: f64) -> VolumeTier {
        if theta < self.low {
            VolumeTier::Low
        } else if theta > self.high {
            VolumeTier::High
        } else {
            VolumeTier::Mid
        }
    }

    /// 20th/80th percentiles of smoothed volume over players with at least
    /// one shot (linear interpolation between order statistics).
    pub fn from_percentiles(ds: &ShotDataset, priors: &PositionPriors) -> Result<Self> {
        let mut thetas = ds
            .players
            .values()
            .filter(|p| p.total_shots > 0)
            .map(|p| smoothed_shot_volume(p, priors))
            .collect::<Result<Vec<f64>>>()?;
        if thetas.is_empty() {
            return Err(Error::Empty("players with shots"));
        }
        thetas.sort_by(f64::total_cmp);
        Ok(VolumeThresholds {
            low: percentile(&thetas, 0.2),
            high: percentile(&thetas, 0.8),
        })
    }
}

fn percentile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

pub fn assign_groups(
    profile: &PlayerProfile,
    rating: &TeamRating,
    priors: &PositionPriors,
    thresholds: &VolumeThresholds,
) -> Result<SubgroupKey> {
    let theta = smoothed_shot_volume(profile, priors)?;
    Ok(SubgroupKey {
        volume: thresholds.tier(theta),
        position: profile.primary_position,
        team: rating.tier,
    })
}

/// One key per shot, from the shooter's profile and the shooting team.
/// Unknown players fall back to a zero-shot midfielder profile.
pub fn shot_groups(
    ds: &ShotDataset,
    priors: &PositionPriors,
    thresholds: &VolumeThresholds,
) -> Result<Vec<SubgroupKey>> {
    let mut per_player: BTreeMap<u64, f64> = BTreeMap::new();
    ds.shots
        .iter()
        .map(|s| {
            let theta = match per_player.get(&s.player_id) {
                Some(t) => *t,
                None => {
                    let profile = ds.players.get(&s.player_id).cloned().unwrap_or(PlayerProfile {
                        player_id: s.player_id,
                        total_shots: 0,
                        total_minutes: 0,
                        primary_position: Position::Midfielder,
                    });
                    let t = smoothed_shot_volume(&profile, priors)?;
                    per_player.insert(s.player_id, t);
                    t
                }
            };
            Ok(SubgroupKey {
                volume: thresholds.tier(theta),
                position: ds.position_of(s.player_id),
                team: ds.tier_of(s.team_id),
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GroupBy {
    Volume,
    Position,
    Team,
}

impl GroupBy {
    pub fn label(self, key: &SubgroupKey) -> &'static str {
        match self {
            GroupBy::Volume => key.volume.as_str(),
            GroupBy::Position => key.position.as_str(),
            GroupBy::Team => key.team.as_str(),
        }
    }
}

impl FromStr for GroupBy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "volume" => Ok(GroupBy::Volume),
            "position" => Ok(GroupBy::Position),
            "team" => Ok(GroupBy::Team),
            other => Err(Error::invalid(format!(
                "unknown grouping '{other}' (volume|position|team)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationBin {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
    pub goals: usize,
    /// `None` for empty bins.
    pub mean_pred: Option<f64>,
    pub conv_rate: Option<f64>,
    pub masked: bool,
    /// Kernel-smoothed conversion at `mean_pred`, unmasked bins only.
    pub smoothed: Option<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationCurve {
    pub bins: Vec<CalibrationBin>,
    pub min_bin_n: usize,
    pub bandwidth: f64,
    pub total: usize,
}

fn calibration_bin_index(p: f64) -> usize {
    ((p * CALIBRATION_BINS as f64).floor() as usize).min(CALIBRATION_BINS - 1)
}

/// 1%-wide reliability bins plus a count-weighted Gaussian-kernel
/// (Nadaraya-Watson) smooth over the unmasked bins. Support points sit at
/// each bin's mean prediction rather than its midpoint.
pub fn calibration_curve(
    predictions: &[f64],
    outcomes: &[bool],
    min_bin_n: usize,
    bandwidth: f64,
) -> Result<CalibrationCurve> {
    if predictions.len() != outcomes.len() {
        return Err(Error::invalid(format!(
            "{} predictions but {} outcomes",
            predictions.len(),
            outcomes.len()
        )));
    }
    if predictions.is_empty() {
        return Err(Error::Empty("calibration input"));
    }
    if !(bandwidth > 0.0) || !bandwidth.is_finite() {
        return Err(Error::invalid(format!("bandwidth must be positive, got {bandwidth}")));
    }
    let mut n = vec![0usize; CALIBRATION_BINS];
    let mut goals = vec![0usize; CALIBRATION_BINS];
    let mut sum_p = vec![0.0f64; CALIBRATION_BINS];
    for (index, (&p, &y)) in predictions.iter().zip(outcomes).enumerate() {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidProbability { index, value: p });
        }
        let b = calibration_bin_index(p);
        n[b] += 1;
        goals[b] += y as usize;
        sum_p[b] += p;
    }

    let mut bins: Vec<CalibrationBin> = (0..CALIBRATION_BINS)
        .map(|b| {
            let mean_pred = (n[b] > 0).then(|| sum_p[b] / n[b] as f64);
            let conv_rate = (n[b] > 0).then(|| goals[b] as f64 / n[b] as f64);
            CalibrationBin {
                lo: b as f64 / CALIBRATION_BINS as f64,
                hi: (b + 1) as f64 / CALIBRATION_BINS as f64,
                n: n[b],
                goals: goals[b],
                mean_pred,
                conv_rate,
                masked: n[b] < min_bin_n,
                smoothed: None,
            }
        })
        .collect();

    let support: Vec<(f64, f64, f64)> = bins
        .iter()
        .filter(|b| !b.masked && b.n > 0)
        .map(|b| (b.mean_pred.unwrap(), b.conv_rate.unwrap(), b.n as f64))
        .collect();
    for bin in bins.iter_mut().filter(|b| !b.masked && b.n > 0) {
        let x = bin.mean_pred.unwrap();
        bin.smoothed = Some((x, nadaraya_watson(&support, x, bandwidth)));
    }

    Ok(CalibrationCurve {
        bins,
        min_bin_n,
        bandwidth,
        total: predictions.len(),
    })
}

fn nadaraya_watson(support: &[(f64, f64, f64)], x: f64, h: f64) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for &(xj, yj, wj) in support {
        let u = (x - xj) / h;
        let k = wj * (-0.5 * u * u).exp();
        num += k * yj;
        den += k;
    }
    num / den
}

impl CalibrationCurve {
    pub fn to_csv(&self) -> String {
        fn opt(v: Option<f64>) -> String {
            v.map(|x| x.to_string()).unwrap_or_default()
        }
        let mut out =
            String::from("bin_lo,bin_hi,n,mean_pred,conv_rate,masked,smoothed_x,smoothed_y\n");
        for b in &self.bins {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                b.lo,
                b.hi,
                b.n,
                opt(b.mean_pred),
                opt(b.conv_rate),
                b.masked,
                opt(b.smoothed.map(|s| s.0)),
                opt(b.smoothed.map(|s| s.1)),
            ));
        }
        out
    }

    /// Largest `|smoothed - x|` over the unmasked support.
    pub fn max_smoothed_deviation(&self) -> Option<f64> {
        self.bins
            .iter()
            .filter_map(|b| b.smoothed)
            .map(|(x, y)| (y - x).abs())
            .reduce(f64::max)
    }
}

/// Curves per group label (e.g. low/mid/high).
pub fn calibration_by_group(
    predictions: &[f64],
    outcomes: &[bool],
    keys: &[SubgroupKey],
    group_by: GroupBy,
    min_bin_n: usize,
    bandwidth: f64,
) -> Result<BTreeMap<&'static str, CalibrationCurve>> {
    if keys.len() != predictions.len() {
        return Err(Error::invalid("one subgroup key per prediction is required"));
    }
    let mut split: BTreeMap<&'static str, (Vec<f64>, Vec<bool>)> = BTreeMap::new();
    for ((p, y), k) in predictions.iter().zip(outcomes).zip(keys) {
        let e = split.entry(group_by.label(k)).or_default();
        e.0.push(*p);
        e.1.push(*y);
    }
    split
        .into_iter()
        .map(|(label, (p, y))| Ok((label, calibration_curve(&p, &y, min_bin_n, bandwidth)?)))
        .collect()
}

pub fn distance_band(d: f64) -> usize {
    DISTANCE_BANDS_M.iter().rposition(|&lo| d >= lo).unwrap_or(0)
}

pub fn band_label(band: usize) -> String {
    match DISTANCE_BANDS_M.get(band + 1) {
        Some(hi) => format!("{}-{}m", DISTANCE_BANDS_M[band], hi),
        None => format!(">{}m", DISTANCE_BANDS_M[band]),
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ConversionCell {
    pub n: usize,
    pub goals: usize,
}

impl ConversionCell {
    /// Undefined for an empty cell.
    pub fn rate(&self) -> Option<f64> {
        (self.n > 0).then(|| self.goals as f64 / self.n as f64)
    }
}

/// Foot and head shots only.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConversionTable {
    pub cells: BTreeMap<(VolumeTier, BodyPart, usize), ConversionCell>,
}

impl ConversionTable {
    pub fn get(&self, volume: VolumeTier, body: BodyPart, band: usize) -> ConversionCell {
        self.cells.get(&(volume, body, band)).copied().unwrap_or_default()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("volume,body_part,band,n,goals,conversion_rate\n");
        for v in VolumeTier::ALL {
            for body in [BodyPart::Foot, BodyPart::Head] {
                for band in 0..DISTANCE_BANDS_M.len() {
                    let c = self.get(v, body, band);
                    out.push_str(&format!(
                        "{v},{body},{},{},{},{}\n",
                        band_label(band),
                        c.n,
                        c.goals,
                        c.rate().map(|r| r.to_string()).unwrap_or_default()
                    ));
                }
            }
        }
        out
    }
}

pub fn conversion_by_distance(shots: &[ShotRecord], volumes: &[VolumeTier]) -> Result<ConversionTable> {
    if shots.len() != volumes.len() {
        return Err(Error::invalid("one volume tier per shot is required"));
    }
    let mut table = ConversionTable::default();
    for (s, v) in shots.iter().zip(volumes) {
        if s.body_part == BodyPart::Other {
            continue;
        }
        let band = distance_band(shot_distance(s)?);
        let cell = table.cells.entry((*v, s.body_part, band)).or_default();
        cell.n += 1;
        cell.goals += s.is_goal as usize;
    }
    Ok(table)
}
