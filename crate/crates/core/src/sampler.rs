//! Empirical 1 m shot-location grid and skill-scaled shot simulation.
//!
//! A simulated shooter with finishing skill `alpha` converts a chance with
//! probability `min(1, (1 + alpha/100) * xG)`, where `xG` comes from the
//! reference model. Goals above expectation are always measured against the
//! unscaled xG.
//!
//! Each simulated season draws its uniforms in a fixed order that does not
//! depend on `alpha`, and its stream is keyed by `(seed, n, repetition)`.
//! Two skill levels evaluated with the same seed therefore see the same shot
//! locations and the same outcome uniforms, which makes every per-repetition
//! goal count non-decreasing in `alpha`.

use std::collections::BTreeMap;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{extract_features, FeatureVector, PITCH_LENGTH_M, PITCH_WIDTH_M};
use crate::logistic::XgModel;
use crate::rng;
use crate::shot::{BodyPart, ShotRecord};

pub const CELL_SIZE_M: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellStats {
    pub count: u64,
    pub prob: f64,
    /// Foot, head, other shares; sums to 1.
    pub bodypart_mix: [f64; 3],
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpatialShotDistribution {
    pub cell_size: f64,
    pub cells: BTreeMap<(u16, u16), CellStats>,
    pub source_n: usize,
    keys: Vec<(u16, u16)>,
    cumulative: Vec<f64>,
}

fn cell_of(x: f64, y: f64) -> (u16, u16) {
    let max_x = (PITCH_LENGTH_M / CELL_SIZE_M) as u16 - 1;
    let max_y = (PITCH_WIDTH_M / CELL_SIZE_M) as u16 - 1;
    (
        ((x / CELL_SIZE_M).floor().max(0.0) as u16).min(max_x),
        ((y / CELL_SIZE_M).floor().max(0.0) as u16).min(max_y),
    )
}

impl SpatialShotDistribution {
    /// Builds the grid from meter-frame locations.
    pub fn from_locations<I>(locations: I) -> Result<Self>
    where
        I: IntoIterator<Item = (f64, f64, BodyPart)>,
    {
        let mut counts: BTreeMap<(u16, u16), [u64; 3]> = BTreeMap::new();
        let mut n = 0usize;
        for (x, y, body) in locations {
            if !x.is_finite() || !y.is_finite() {
                return Err(Error::NonFinite("shot location"));
            }
            counts.entry(cell_of(x, y)).or_default()[body.index()] += 1;
            n += 1;
        }
        if n == 0 {
            return Err(Error::Empty("shots for the spatial distribution"));
        }
        let cells = counts
            .into_iter()
            .map(|(k, c)| {
                let total = c.iter().sum::<u64>();
                let t = total as f64;
                (
                    k,
                    CellStats {
                        count: total,
                        prob: t / n as f64,
                        bodypart_mix: [c[0] as f64 / t, c[1] as f64 / t, c[2] as f64 / t],
                    },
                )
            })
            .collect();
        let mut dist = SpatialShotDistribution {
            cell_size: CELL_SIZE_M,
            cells,
            source_n: n,
            keys: Vec::new(),
            cumulative: Vec::new(),
        };
        dist.rebuild_index();
        Ok(dist)
    }

    fn rebuild_index(&mut self) {
        self.keys = self.cells.keys().copied().collect();
        let mut acc = 0.0;
        self.cumulative = self
            .cells
            .values()
            .map(|c| {
                acc += c.prob;
                acc
            })
            .collect();
    }

    pub fn total_probability(&self) -> f64 {
        self.cells.values().map(|c| c.prob).sum()
    }

    fn pick_cell(&self, u: f64) -> usize {
        let target = u * self.cumulative.last().copied().unwrap_or(1.0);
        self.cumulative
            .partition_point(|&c| c <= target)
            .min(self.keys.len() - 1)
    }

    /// Draws a meter-frame location and body part. Always consumes exactly
    /// four uniforms.
    pub fn sample_location<R: Rng + ?Sized>(&self, rng: &mut R) -> (f64, f64, BodyPart) {
        assert!(!self.keys.is_empty(), "sampling index not built");
        let u_cell: f64 = rng.random();
        let u_x: f64 = rng.random();
        let u_y: f64 = rng.random();
        let u_body: f64 = rng.random();
        let idx = self.pick_cell(u_cell);
        let (ix, iy) = self.keys[idx];
        let stats = &self.cells[&(ix, iy)];
        let x = (ix as f64 + u_x) * self.cell_size;
        let y = (iy as f64 + u_y) * self.cell_size;
        let mix = stats.bodypart_mix;
        let body = if u_body < mix[0] {
            BodyPart::Foot
        } else if u_body < mix[0] + mix[1] {
            BodyPart::Head
        } else if mix[2] > 0.0 {
            BodyPart::Other
        } else if mix[1] > 0.0 {
            BodyPart::Head
        } else {
            BodyPart::Foot
        };
        (x.min(PITCH_LENGTH_M), y.min(PITCH_WIDTH_M), body)
    }
}

/// Builds the empirical grid from provider-frame shots.
pub fn build_distribution(shots: &[ShotRecord]) -> Result<SpatialShotDistribution> {
    let mut locs = Vec::with_capacity(shots.len());
    for s in shots {
        let f = extract_features(s)?;
        locs.push((f.start_x, f.start_y, s.body_part));
    }
    SpatialShotDistribution::from_locations(locs)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticShot {
    pub features: FeatureVector,
    pub xg_raw: f64,
    pub xg_scaled: f64,
    pub outcome: bool,
}

/// `(min(1, (1 + alpha/100) * xg), clamped?)`.
pub fn scale_xg(xg: f64, alpha: f64) -> (f64, bool) {
    let scaled = (1.0 + alpha / 100.0) * xg;
    if scaled > 1.0 {
        (1.0, true)
    } else {
        (scaled.max(0.0), false)
    }
}

pub fn check_alpha(alpha: f64) -> Result<()> {
    if !alpha.is_finite() || alpha < -100.0 {
        return Err(Error::invalid(format!(
            "alpha {alpha} would give negative scoring probabilities"
        )));
    }
    Ok(())
}

/// One synthetic shot. Consumes exactly five uniforms.
pub fn sample_shot<R: Rng + ?Sized>(
    dist: &SpatialShotDistribution,
    model: &XgModel,
    alpha: f64,
    rng: &mut R,
) -> (SyntheticShot, bool) {
    let (x, y, body) = dist.sample_location(rng);
    let features = FeatureVector::from_meters(x, y, body);
    let xg_raw = model.predict_unchecked(&features);
    let (xg_scaled, clamped) = scale_xg(xg_raw, alpha);
    let u: f64 = rng.random();
    (
        SyntheticShot {
            features,
            xg_raw,
            xg_scaled,
            outcome: u < xg_scaled,
        },
        clamped,
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleBatch {
    pub shots: Vec<SyntheticShot>,
    pub clamp_events: usize,
}

pub fn sample_shots(
    dist: &SpatialShotDistribution,
    model: &XgModel,
    n: usize,
    alpha: f64,
    seed: u64,
) -> Result<SampleBatch> {
    if n == 0 {
        return Err(Error::invalid("n must be at least 1"));
    }
    check_alpha(alpha)?;
    let mut r = rng::stream(seed, &[n as u64]);
    let mut clamp_events = 0;
    let shots = (0..n)
        .map(|_| {
            let (s, c) = sample_shot(dist, model, alpha, &mut r);
            clamp_events += c as usize;
            s
        })
        .collect();
    Ok(SampleBatch {
        shots,
        clamp_events,
    })
}

/// Goals and raw xG of one simulated season.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeasonOutcome {
    pub goals: u32,
    pub total_xg: f64,
    pub clamp_events: u32,
}

impl SeasonOutcome {
    pub fn gax(&self) -> f64 {
        self.goals as f64 - self.total_xg
    }

    pub fn overperformed(&self) -> bool {
        self.goals as f64 > self.total_xg
    }
}

pub fn simulate_season<R: Rng + ?Sized>(
    dist: &SpatialShotDistribution,
    model: &XgModel,
    n: usize,
    alpha: f64,
    rng: &mut R,
) -> SeasonOutcome {
    let mut out = SeasonOutcome {
        goals: 0,
        total_xg: 0.0,
        clamp_events: 0,
    };
    for _ in 0..n {
        let (s, c) = sample_shot(dist, model, alpha, rng);
        out.goals += s.outcome as u32;
        out.total_xg += s.xg_raw;
        out.clamp_events += c as u32;
    }
    out
}

/// Repetition `rep` of a season of `n` shots; keyed so that every alpha
/// shares the same draws.
pub fn simulate_repetition(
    dist: &SpatialShotDistribution,
    model: &XgModel,
    n: usize,
    alpha: f64,
    seed: u64,
    rep: u64,
) -> SeasonOutcome {
    let mut r = rng::stream(seed, &[n as u64, rep]);
    simulate_season(dist, model, n, alpha, &mut r)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OverperformanceEstimate {
    pub alpha: f64,
    pub n: usize,
    pub reps: usize,
    pub mean_gax: f64,
    pub std_gax: f64,
    pub p_overperform: f64,
    pub se: f64,
    pub clamp_events: u64,
}

/// Summarises repetitions in index order.
pub fn summarize(alpha: f64, n: usize, outcomes: &[SeasonOutcome]) -> OverperformanceEstimate {
    let reps = outcomes.len();
    let k = reps as f64;
    let mean = outcomes.iter().map(|o| o.gax()).sum::<f64>() / k;
    let var = if reps > 1 {
        outcomes
            .iter()
            .map(|o| (o.gax() - mean).powi(2))
            .sum::<f64>()
            / (k - 1.0)
    } else {
        0.0
    };
    let p = outcomes.iter().filter(|o| o.overperformed()).count() as f64 / k;
    OverperformanceEstimate {
        alpha,
        n,
        reps,
        mean_gax: mean,
        std_gax: var.sqrt(),
        p_overperform: p,
        se: (p * (1.0 - p) / k).sqrt(),
        clamp_events: outcomes.iter().map(|o| o.clamp_events as u64).sum(),
    }
}

/// Fraction of `reps` simulated seasons in which goals strictly exceed
/// cumulative (unscaled) xG, with its binomial standard error.
pub fn overperformance_probability(
    dist: &SpatialShotDistribution,
    model: &XgModel,
    alpha: f64,
    n: usize,
    reps: usize,
    seed: u64,
) -> Result<OverperformanceEstimate> {
    if reps == 0 {
        return Err(Error::invalid("reps must be at least 1"));
    }
    if n == 0 {
        return Err(Error::invalid("n must be at least 1"));
    }
    check_alpha(alpha)?;
    let outcomes: Vec<SeasonOutcome> = (0..reps as u64)
        .into_par_iter()
        .map(|rep| simulate_repetition(dist, model, n, alpha, seed, rep))
        .collect();
    Ok(summarize(alpha, n, &outcomes))
}

/// `P(X >= k)` for `X ~ Binomial(m, p)`, summed exactly over the tail.
pub fn consistency_probability(p_season: f64, k: u32, m: u32) -> Result<f64> {
    if !(0.0..=1.0).contains(&p_season) {
        return Err(Error::InvalidProbability {
            index: 0,
            value: p_season,
        });
    }
    if k > m {
        return Err(Error::invalid(format!("k = {k} exceeds m = {m}")));
    }
    let mut total = 0.0;
    let mut coeff = 1.0; // C(m, j), built incrementally
    for j in 0..=m {
        if j > 0 {
            coeff = coeff * (m - j + 1) as f64 / j as f64;
        }
        if j >= k {
            total += coeff * p_season.powi(j as i32) * (1.0 - p_season).powi((m - j) as i32);
        }
    }
    Ok(total.min(1.0))
}
