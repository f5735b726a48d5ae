//! Synthetic shots for tests, benchmarks and offline demos.
//!
//! Locations follow a plausible open-play shot map (most attempts inside or
//! around the box, headers close in), labels are drawn from the
//! reference coefficients. Nothing here touches real event data.

use std::collections::BTreeMap;

use rand::Rng;

use crate::features::{FeatureVector, PITCH_LENGTH_M, PITCH_WIDTH_M};
use crate::logistic::{TrainingMeta, XgModel};
use crate::rng;
use crate::shot::{
    BodyPart, MatchInfo, PlayerProfile, Position, ShotDataset, ShotRecord, TeamRating,
    PROVIDER_LENGTH, PROVIDER_WIDTH,
};

/// Reference coefficients in feature order
/// `start_x, start_y, distance, angle, bodypart_head, bodypart_other`.
pub const REFERENCE_WEIGHTS: [f64; 6] = [
    -0.12903395599643944,
    0.0007081390917350903,
    -0.31351026346703825,
    0.09095528657471205,
    -1.2946488935455573,
    -0.19292432746094432,
];
pub const REFERENCE_INTERCEPT: f64 = 14.301040398979099;

pub fn reference_model() -> XgModel {
    XgModel::from_parts(
        REFERENCE_INTERCEPT,
        REFERENCE_WEIGHTS,
        1.0,
        TrainingMeta {
            n_train: 0,
            converged: true,
            iterations: 0,
            final_loss: 0.0,
            gradient_max_norm: 0.0,
            loss_history: Vec::new(),
        },
    )
}

fn normal<R: Rng>(rng: &mut R) -> f64 {
    let u1: f64 = 1.0 - rng.random::<f64>();
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Draws one (x, y, body part) in meters.
pub fn shot_location<R: Rng>(rng: &mut R) -> (f64, f64, BodyPart) {
    loop {
        // distance: 3 m offset plus a gamma(2, 5.5) tail
        let d = 3.0 - 5.5 * ((1.0 - rng.random::<f64>()).ln() + (1.0 - rng.random::<f64>()).ln());
        let phi = 0.55 * normal(rng);
        let x = PITCH_LENGTH_M - d * phi.cos();
        let y = PITCH_WIDTH_M / 2.0 + d * phi.sin();
        if !(0.0..=PITCH_LENGTH_M).contains(&x) || !(0.0..=PITCH_WIDTH_M).contains(&y) || x < 55.0 {
            continue;
        }
        let u: f64 = rng.random();
        let head_share = if d < 12.0 { 0.28 } else { 0.03 };
        let body = if u < head_share {
            BodyPart::Head
        } else if u < head_share + 0.03 {
            BodyPart::Other
        } else {
            BodyPart::Foot
        };
        return (x, y, body);
    }
}

pub fn features<R: Rng>(rng: &mut R) -> FeatureVector {
    let (x, y, b) = shot_location(rng);
    FeatureVector::from_meters(x, y, b)
}

/// `n` synthetic shots from 240 players on 20 teams, labelled by the
/// reference model. Player profiles, team tiers and match metadata are
/// filled in so that every downstream module can run on the result.
pub fn shot_dataset(n: usize, seed: u64) -> ShotDataset {
    let model = reference_model();
    let mut r = rng::stream(seed, &[0x5a7]);
    let n_teams = 20u64;
    let n_players = 240u64;

    let mut ds = ShotDataset {
        provenance: format!("synthetic:n={n},seed={seed}"),
        ..Default::default()
    };
    for t in 1..=n_teams {
        let elo = 2000.0 - 15.0 * t as f64;
        ds.team_names.insert(t, format!("Team {t}"));
        ds.teams.insert(
            t,
            TeamRating {
                team_id: t,
                elo: Some(elo),
                tier: crate::elo::tier_for(elo, t as usize),
            },
        );
    }
    let mut weights = Vec::new();
    for p in 1..=n_players {
        let position = Position::ALL[(p % 3) as usize];
        let base = match position {
            Position::Defender => 0.4,
            Position::Midfielder => 1.1,
            Position::Attacker => 2.1,
        };
        weights.push(base * (0.3 + r.random::<f64>() * 1.4));
        ds.player_names.insert(p, format!("Player {p}"));
        ds.players.insert(
            p,
            PlayerProfile {
                player_id: p,
                total_shots: 0,
                total_minutes: (r.random::<f64>() * 3000.0) as u32,
                primary_position: position,
            },
        );
    }
    let total_w: f64 = weights.iter().sum();
    let n_matches = (n / 25).max(1) as u64;
    for m in 1..=n_matches {
        ds.matches.insert(
            m,
            MatchInfo {
                match_id: m,
                competition_id: 1,
                season_id: 1,
                competition: "Synthetic League".into(),
                season: "2015/2016".into(),
            },
        );
    }

    for i in 0..n {
        let mut pick = r.random::<f64>() * total_w;
        let mut player = n_players;
        for (k, w) in weights.iter().enumerate() {
            if pick < *w {
                player = k as u64 + 1;
                break;
            }
            pick -= w;
        }
        let (x, y, body) = shot_location(&mut r);
        let f = FeatureVector::from_meters(x, y, body);
        let p = model.predict_unchecked(&f);
        let shot = ShotRecord {
            shot_id: format!("syn-{seed}-{i}"),
            match_id: 1 + (i as u64 % n_matches),
            player_id: player,
            team_id: 1 + (player - 1) % n_teams,
            minute: r.random_range(0..95),
            start_x: (x * PROVIDER_LENGTH / PITCH_LENGTH_M).clamp(0.0, PROVIDER_LENGTH),
            start_y: (y * PROVIDER_WIDTH / PITCH_WIDTH_M).clamp(0.0, PROVIDER_WIDTH),
            body_part: body,
            is_goal: r.random::<f64>() < p,
            is_open_play: true,
            is_deflected: r.random::<f64>() < 0.023,
            is_own_goal: false,
            provider_xg: None,
        };
        ds.players.get_mut(&player).unwrap().total_shots += 1;
        ds.shots.push(shot);
    }
    ds
}

/// Groups of synthetic shots keyed by player id.
pub fn shots_by_player(ds: &ShotDataset) -> BTreeMap<u64, Vec<ShotRecord>> {
    let mut out: BTreeMap<u64, Vec<ShotRecord>> = BTreeMap::new();
    for s in &ds.shots {
        out.entry(s.player_id).or_default().push(s.clone());
    }
    out
}
