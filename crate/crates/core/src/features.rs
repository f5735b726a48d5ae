//! Shot features for the reference xG model.
//!
//! Provider coordinates (120 x 80) are rescaled to a 105 x 68 m pitch before
//! anything else is derived, so every feature (including the raw start
//! coordinates) is expressed in meters.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::shot::{BodyPart, ShotRecord, PROVIDER_LENGTH, PROVIDER_WIDTH};

pub const PITCH_LENGTH_M: f64 = 105.0;
pub const PITCH_WIDTH_M: f64 = 68.0;

pub const N_FEATURES: usize = 6;

pub const FEATURE_NAMES: [&str; N_FEATURES] = [
    "start_x",
    "start_y",
    "distance",
    "angle",
    "bodypart_head",
    "bodypart_other",
];

/// How the angle feature is measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AngleConvention {
    /// Bearing of the shot relative to the line through the goal center,
    /// 0 for a central shot and pi/2 on the goal line.
    OffCenterBearing,
}

pub const ANGLE_CONVENTION: AngleConvention = AngleConvention::OffCenterBearing;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub start_x: f64,
    pub start_y: f64,
    pub distance: f64,
    pub angle: f64,
    pub bodypart_head: f64,
    pub bodypart_other: f64,
}

impl FeatureVector {
    /// Builds features from a location on the 105 x 68 m pitch.
    pub fn from_meters(x: f64, y: f64, body_part: BodyPart) -> FeatureVector {
        let dx = (PITCH_LENGTH_M - x).max(0.0);
        let dy = (y - PITCH_WIDTH_M / 2.0).abs();
        let distance = dx.hypot(dy);
        let angle = match ANGLE_CONVENTION {
            AngleConvention::OffCenterBearing => {
                if distance == 0.0 {
                    0.0
                } else {
                    dy.atan2(dx)
                }
            }
        };
        FeatureVector {
            start_x: x,
            start_y: y,
            distance,
            angle,
            bodypart_head: (body_part == BodyPart::Head) as u8 as f64,
            bodypart_other: (body_part == BodyPart::Other) as u8 as f64,
        }
    }

    pub fn as_array(&self) -> [f64; N_FEATURES] {
        [
            self.start_x,
            self.start_y,
            self.distance,
            self.angle,
            self.bodypart_head,
            self.bodypart_other,
        ]
    }

    pub fn is_finite(&self) -> bool {
        self.as_array().iter().all(|v| v.is_finite())
    }

    /// Same location and body part, moved so that the distance to goal is `distance`
    /// along the central axis. Handy for monotonicity checks.
    pub fn central(distance: f64, body_part: BodyPart) -> FeatureVector {
        FeatureVector::from_meters(PITCH_LENGTH_M - distance, PITCH_WIDTH_M / 2.0, body_part)
    }
}

pub fn provider_to_meters(x: f64, y: f64) -> (f64, f64) {
    (
        x * PITCH_LENGTH_M / PROVIDER_LENGTH,
        y * PITCH_WIDTH_M / PROVIDER_WIDTH,
    )
}

pub fn extract_features(shot: &ShotRecord) -> Result<FeatureVector> {
    if !shot.start_x.is_finite() || !shot.start_y.is_finite() || !shot.in_frame() {
        return Err(Error::OutOfFrame {
            shot_id: shot.shot_id.clone(),
            x: shot.start_x,
            y: shot.start_y,
        });
    }
    let (x, y) = provider_to_meters(shot.start_x, shot.start_y);
    Ok(FeatureVector::from_meters(x, y, shot.body_part))
}

/// Distance to goal center in meters for a provider-frame shot.
pub fn shot_distance(shot: &ShotRecord) -> Result<f64> {
    extract_features(shot).map(|f| f.distance)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn shot(x: f64, y: f64, body_part: BodyPart) -> ShotRecord {
        ShotRecord {
            shot_id: "s".into(),
            match_id: 1,
            player_id: 1,
            team_id: 1,
            minute: 10,
            start_x: x,
            start_y: y,
            body_part,
            is_goal: false,
            is_open_play: true,
            is_deflected: false,
            is_own_goal: false,
            provider_xg: None,
        }
    }

    #[test]
    fn central_shot_has_zero_angle() {
        let f = extract_features(&shot(108.0, 40.0, BodyPart::Foot)).unwrap();
        assert_eq!(f.angle, 0.0);
        assert_eq!(f.bodypart_head, 0.0);
        assert_eq!(f.bodypart_other, 0.0);
    }

    #[test]
    fn distance_uses_meter_conversion() {
        let f = extract_features(&shot(108.0, 40.0, BodyPart::Foot)).unwrap();
        // (120 - 108) * 105 / 120
        assert_abs_diff_eq!(f.distance, 10.5, epsilon = 1e-12);
        assert_abs_diff_eq!(f.start_x, 94.5, epsilon = 1e-12);
        assert_abs_diff_eq!(f.start_y, 34.0, epsilon = 1e-12);
    }

    #[test]
    fn header_dummy() {
        let f = extract_features(&shot(110.0, 30.0, BodyPart::Head)).unwrap();
        assert_eq!((f.bodypart_head, f.bodypart_other), (1.0, 0.0));
        let f = extract_features(&shot(110.0, 30.0, BodyPart::Other)).unwrap();
        assert_eq!((f.bodypart_head, f.bodypart_other), (0.0, 1.0));
    }

    #[test]
    fn off_center_angle() {
        // 10.5 m out, 8.5 m lateral
        let f = extract_features(&shot(108.0, 50.0, BodyPart::Foot)).unwrap();
        assert_abs_diff_eq!(f.angle, (8.5f64 / 10.5).atan(), epsilon = 1e-12);
        let on_line = extract_features(&shot(120.0, 10.0, BodyPart::Foot)).unwrap();
        assert_abs_diff_eq!(on_line.angle, std::f64::consts::FRAC_PI_2, epsilon = 1e-12);
        let at_goal = extract_features(&shot(120.0, 40.0, BodyPart::Foot)).unwrap();
        assert_eq!((at_goal.distance, at_goal.angle), (0.0, 0.0));
    }

    #[test]
    fn out_of_frame_rejected_with_id() {
        let mut s = shot(121.0, 40.0, BodyPart::Foot);
        s.shot_id = "abc".into();
        match extract_features(&s) {
            Err(Error::OutOfFrame { shot_id, .. }) => assert_eq!(shot_id, "abc"),
            other => panic!("unexpected {other:?}"),
        }
        assert!(extract_features(&shot(f64::NAN, 40.0, BodyPart::Foot)).is_err());
    }
}
