//! Exact goal-count distributions and facet filters over a player's shots.

use std::collections::BTreeSet;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::shot_distance;
use crate::shot::{BodyPart, ShotRecord};

pub const METERS_PER_YARD: f64 = 0.9144;

/// Poisson-binomial PMF over the number of goals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoalDistribution {
    pub pmf: Vec<f64>,
    pub n_shots: usize,
    pub total_xg: f64,
}

impl GoalDistribution {
    pub fn mean(&self) -> f64 {
        self.pmf
            .iter()
            .enumerate()
            .map(|(k, p)| k as f64 * p)
            .sum()
    }

    pub fn variance(&self) -> f64 {
        let mean = self.mean();
        self.pmf
            .iter()
            .enumerate()
            .map(|(k, p)| (k as f64 - mean).powi(2) * p)
            .sum()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("k,probability\n");
        for (k, p) in self.pmf.iter().enumerate() {
            out.push_str(&format!("{k},{p}\n"));
        }
        out
    }
}

/// Folds one shot at a time into the PMF:
/// `pmf'[k] = pmf[k] (1 - p) + pmf[k - 1] p`.
pub fn poisson_binomial(xgs: &[f64]) -> Result<GoalDistribution> {
    for (index, &value) in xgs.iter().enumerate() {
        if !(0.0..=1.0).contains(&value) {
            return Err(Error::InvalidProbability { index, value });
        }
    }
    let mut pmf = Vec::with_capacity(xgs.len() + 1);
    pmf.push(1.0);
    for &p in xgs {
        pmf.push(0.0);
        for k in (1..pmf.len()).rev() {
            pmf[k] = pmf[k] * (1.0 - p) + pmf[k - 1] * p;
        }
        pmf[0] *= 1.0 - p;
    }
    Ok(GoalDistribution {
        pmf,
        n_shots: xgs.len(),
        total_xg: xgs.iter().sum(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailProbabilities {
    pub p_at_most: f64,
    pub p_at_least: f64,
}

/// Both tails include the observed count.
pub fn tail_probabilities(dist: &GoalDistribution, observed: usize) -> Result<TailProbabilities> {
    if observed > dist.n_shots {
        return Err(Error::invalid(format!(
            "observed {observed} goals from only {} shots",
            dist.n_shots
        )));
    }
    Ok(TailProbabilities {
        p_at_most: dist.pmf[..=observed].iter().sum::<f64>().min(1.0),
        p_at_least: dist.pmf[observed..].iter().sum::<f64>().min(1.0),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DistanceUnit {
    Meters,
    Yards,
}

/// Half-open distance band `[lo, hi)` in the stated unit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistanceBand {
    pub lo: f64,
    pub hi: f64,
    pub unit: DistanceUnit,
}

impl DistanceBand {
    pub fn new(lo: f64, hi: f64, unit: DistanceUnit) -> Result<Self> {
        if !(lo < hi) {
            return Err(Error::invalid(format!("distance band [{lo}, {hi}) is empty")));
        }
        Ok(DistanceBand { lo, hi, unit })
    }

    pub fn in_meters(&self) -> (f64, f64) {
        match self.unit {
            DistanceUnit::Meters => (self.lo, self.hi),
            DistanceUnit::Yards => (self.lo * METERS_PER_YARD, self.hi * METERS_PER_YARD),
        }
    }

    pub fn contains_meters(&self, d: f64) -> bool {
        let (lo, hi) = self.in_meters();
        d >= lo && d < hi
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ShotFilter {
    pub exclude_deflected: bool,
    /// `None` keeps every body part.
    pub body_parts: Option<BTreeSet<BodyPart>>,
    pub distance_band: Option<DistanceBand>,
    /// Custom predicate: keep shots whose minute lies in `[lo, hi]`.
    pub minute_range: Option<(u32, u32)>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterCounts {
    pub deflected: usize,
    pub body_part: usize,
    pub distance: usize,
    pub minute: usize,
    pub total_removed: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterOutcome {
    pub kept: Vec<(ShotRecord, f64)>,
    pub removed: FilterCounts,
}

impl ShotFilter {
    pub fn validate(&self) -> Result<()> {
        if let Some(b) = &self.distance_band {
            DistanceBand::new(b.lo, b.hi, b.unit)?;
        }
        if let Some((lo, hi)) = self.minute_range {
            if lo > hi {
                return Err(Error::invalid(format!("minute range {lo}-{hi} is empty")));
            }
        }
        Ok(())
    }

    pub fn is_identity(&self) -> bool {
        !self.exclude_deflected
            && self.body_parts.is_none()
            && self.distance_band.is_none()
            && self.minute_range.is_none()
    }
}

/// Parses `deflected=exclude,band=25-35yd,body=foot|head,minute=0-80`.
/// An empty string is the identity filter.
impl FromStr for ShotFilter {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut filter = ShotFilter::default();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (key, value) = part
                .split_once('=')
                .ok_or_else(|| Error::invalid(format!("filter '{part}' is not key=value")))?;
            match key.trim() {
                "deflected" => match value.trim() {
                    "exclude" => filter.exclude_deflected = true,
                    "include" => filter.exclude_deflected = false,
                    v => return Err(Error::invalid(format!("deflected={v}: use exclude|include"))),
                },
                "band" => {
                    let v = value.trim();
                    let (nums, unit) = if let Some(n) = v.strip_suffix("yd") {
                        (n, DistanceUnit::Yards)
                    } else if let Some(n) = v.strip_suffix('m') {
                        (n, DistanceUnit::Meters)
                    } else {
                        return Err(Error::invalid(format!(
                            "band={v}: unit suffix 'm' or 'yd' is required"
                        )));
                    };
                    let (lo, hi) = nums
                        .split_once('-')
                        .ok_or_else(|| Error::invalid(format!("band={v}: expected lo-hi")))?;
                    let parse = |x: &str| {
                        let x = x.trim();
                        if x.eq_ignore_ascii_case("inf") {
                            Ok(f64::INFINITY)
                        } else {
                            x.parse::<f64>()
                                .map_err(|_| Error::invalid(format!("band bound '{x}'")))
                        }
                    };
                    filter.distance_band = Some(DistanceBand::new(parse(lo)?, parse(hi)?, unit)?);
                }
                "body" => {
                    let parts = value
                        .split('|')
                        .map(|b| b.parse::<BodyPart>())
                        .collect::<Result<BTreeSet<_>>>()?;
                    filter.body_parts = Some(parts);
                }
                "minute" => {
                    let (lo, hi) = value
                        .split_once('-')
                        .ok_or_else(|| Error::invalid(format!("minute={value}: expected lo-hi")))?;
                    let lo = lo.trim().parse().map_err(|_| Error::invalid("minute lower bound"))?;
                    let hi = hi.trim().parse().map_err(|_| Error::invalid("minute upper bound"))?;
                    filter.minute_range = Some((lo, hi));
                }
                other => return Err(Error::invalid(format!("unknown filter key '{other}'"))),
            }
        }
        filter.validate()?;
        Ok(filter)
    }
}

/// Keeps exactly the shots satisfying every active criterion. A removed shot
/// is counted under each criterion it fails.
pub fn filter_shots(shots: &[(ShotRecord, f64)], filter: &ShotFilter) -> Result<FilterOutcome> {
    filter.validate()?;
    let mut removed = FilterCounts::default();
    let mut kept = Vec::with_capacity(shots.len());
    for (shot, xg) in shots {
        let mut keep = true;
        if filter.exclude_deflected && shot.is_deflected {
            removed.deflected += 1;
            keep = false;
        }
        if let Some(parts) = &filter.body_parts {
            if !parts.contains(&shot.body_part) {
                removed.body_part += 1;
                keep = false;
            }
        }
        if let Some(band) = &filter.distance_band {
            if !band.contains_meters(shot_distance(shot)?) {
                removed.distance += 1;
                keep = false;
            }
        }
        if let Some((lo, hi)) = filter.minute_range {
            if shot.minute < lo || shot.minute > hi {
                removed.minute += 1;
                keep = false;
            }
        }
        if keep {
            kept.push((shot.clone(), *xg));
        } else {
            removed.total_removed += 1;
        }
    }
    Ok(FilterOutcome { kept, removed })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinishingSummary {
    pub n: usize,
    pub total_xg: f64,
    pub observed: usize,
    pub p_at_most: f64,
    pub p_at_least: f64,
}

/// Distribution and tails for a filtered shot list.
pub fn finishing_summary(shots: &[(ShotRecord, f64)]) -> Result<(GoalDistribution, FinishingSummary)> {
    let xgs: Vec<f64> = shots.iter().map(|(_, xg)| *xg).collect();
    let dist = poisson_binomial(&xgs)?;
    let observed = shots.iter().filter(|(s, _)| s.is_goal).count();
    let tails = tail_probabilities(&dist, observed)?;
    Ok((
        dist.clone(),
        FinishingSummary {
            n: dist.n_shots,
            total_xg: dist.total_xg,
            observed,
            p_at_most: tails.p_at_most,
            p_at_least: tails.p_at_least,
        },
    ))
}
