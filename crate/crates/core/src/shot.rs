//! Shot events and the metadata attached to them.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// Length and width of the provider's pitch frame.
pub const PROVIDER_LENGTH: f64 = 120.0;
pub const PROVIDER_WIDTH: f64 = 80.0;

/// Marker for identifiers that could not be resolved.
pub const UNKNOWN_ID: u64 = 0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BodyPart {
    Foot,
    Head,
    Other,
}

impl BodyPart {
    pub const ALL: [BodyPart; 3] = [BodyPart::Foot, BodyPart::Head, BodyPart::Other];

    pub fn as_str(self) -> &'static str {
        match self {
            BodyPart::Foot => "foot",
            BodyPart::Head => "head",
            BodyPart::Other => "other",
        }
    }

    pub(crate) fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for BodyPart {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BodyPart {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "foot" => Ok(BodyPart::Foot),
            "head" => Ok(BodyPart::Head),
            "other" => Ok(BodyPart::Other),
            other => Err(Error::invalid(format!("unknown body part '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Position {
    Defender,
    Midfielder,
    Attacker,
}

impl Position {
    pub const ALL: [Position; 3] = [Position::Defender, Position::Midfielder, Position::Attacker];

    pub fn as_str(self) -> &'static str {
        match self {
            Position::Defender => "defender",
            Position::Midfielder => "midfielder",
            Position::Attacker => "attacker",
        }
    }
}

impl fmt::Display for Position {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Position {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "defender" => Ok(Position::Defender),
            "midfielder" => Ok(Position::Midfielder),
            "attacker" => Ok(Position::Attacker),
            other => Err(Error::invalid(format!("unknown position '{other}'"))),
        }
    }
}

/// Team-strength bucket derived from Elo ratings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TeamTier {
    UclWinner,
    Top25,
    Other,
}

impl TeamTier {
    pub const ALL: [TeamTier; 3] = [TeamTier::UclWinner, TeamTier::Top25, TeamTier::Other];

    pub fn as_str(self) -> &'static str {
        match self {
            TeamTier::UclWinner => "ucl_winner",
            TeamTier::Top25 => "top25",
            TeamTier::Other => "other",
        }
    }
}

impl fmt::Display for TeamTier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TeamTier {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "ucl_winner" => Ok(TeamTier::UclWinner),
            "top25" => Ok(TeamTier::Top25),
            "other" => Ok(TeamTier::Other),
            other => Err(Error::invalid(format!("unknown team tier '{other}'"))),
        }
    }
}

/// One shot event in the provider frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShotRecord {
    pub shot_id: String,
    pub match_id: u64,
    pub player_id: u64,
    pub team_id: u64,
    pub minute: u32,
    pub start_x: f64,
    pub start_y: f64,
    pub body_part: BodyPart,
    pub is_goal: bool,
    pub is_open_play: bool,
    pub is_deflected: bool,
    #[serde(default)]
    pub is_own_goal: bool,
    /// Provider's own xG value, when the feed carries one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provider_xg: Option<f64>,
}

impl ShotRecord {
    pub fn in_frame(&self) -> bool {
        (0.0..=PROVIDER_LENGTH).contains(&self.start_x)
            && (0.0..=PROVIDER_WIDTH).contains(&self.start_y)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlayerProfile {
    pub player_id: u64,
    pub total_shots: u32,
    pub total_minutes: u32,
    pub primary_position: Position,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TeamRating {
    pub team_id: u64,
    /// `None` when the club could not be found in the ratings table.
    pub elo: Option<f64>,
    pub tier: TeamTier,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchInfo {
    pub match_id: u64,
    pub competition_id: u64,
    pub season_id: u64,
    pub competition: String,
    pub season: String,
}

/// A validated set of shots plus the player, team and match metadata they refer to.
///
/// Immutable after construction; share it by reference across workers.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ShotDataset {
    pub shots: Vec<ShotRecord>,
    pub players: BTreeMap<u64, PlayerProfile>,
    pub teams: BTreeMap<u64, TeamRating>,
    pub player_names: BTreeMap<u64, String>,
    pub team_names: BTreeMap<u64, String>,
    pub matches: BTreeMap<u64, MatchInfo>,
    pub provenance: String,
}

impl ShotDataset {
    pub fn len(&self) -> usize {
        self.shots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.shots.is_empty()
    }

    pub fn goals(&self) -> usize {
        self.shots.iter().filter(|s| s.is_goal).count()
    }

    pub fn goal_rate(&self) -> f64 {
        if self.shots.is_empty() {
            return 0.0;
        }
        self.goals() as f64 / self.shots.len() as f64
    }

    /// Same metadata, shots restricted to those matching `keep`.
    pub fn filter<F>(&self, keep: F, provenance: impl Into<String>) -> ShotDataset
    where
        F: Fn(&ShotRecord) -> bool,
    {
        ShotDataset {
            shots: self.shots.iter().filter(|s| keep(s)).cloned().collect(),
            provenance: provenance.into(),
            ..self.metadata_only()
        }
    }

    pub fn with_shots(&self, shots: Vec<ShotRecord>, provenance: impl Into<String>) -> ShotDataset {
        ShotDataset {
            shots,
            provenance: provenance.into(),
            ..self.metadata_only()
        }
    }

    fn metadata_only(&self) -> ShotDataset {
        ShotDataset {
            shots: Vec::new(),
            players: self.players.clone(),
            teams: self.teams.clone(),
            player_names: self.player_names.clone(),
            team_names: self.team_names.clone(),
            matches: self.matches.clone(),
            provenance: self.provenance.clone(),
        }
    }

    pub fn shots_of_player(&self, player_id: u64) -> Vec<&ShotRecord> {
        self.shots.iter().filter(|s| s.player_id == player_id).collect()
    }

    /// Case-insensitive substring lookup over player names.
    pub fn find_player(&self, needle: &str) -> Option<u64> {
        if let Ok(id) = needle.parse::<u64>() {
            if self.player_names.contains_key(&id) || self.players.contains_key(&id) {
                return Some(id);
            }
        }
        let needle = needle.to_lowercase();
        self.player_names
            .iter()
            .find(|(_, name)| name.to_lowercase().contains(&needle))
            .map(|(id, _)| *id)
    }

    pub fn tier_of(&self, team_id: u64) -> TeamTier {
        self.teams
            .get(&team_id)
            .map(|t| t.tier)
            .unwrap_or(TeamTier::Other)
    }

    pub fn position_of(&self, player_id: u64) -> Position {
        self.players
            .get(&player_id)
            .map(|p| p.primary_position)
            .unwrap_or(Position::Midfielder)
    }

    /// Shots whose match belongs to the given competition/season names (case-insensitive).
    pub fn in_competition(&self, competition: &str, season: &str) -> ShotDataset {
        let comp = competition.to_lowercase();
        let season = season.to_lowercase();
        let ids: std::collections::BTreeSet<u64> = self
            .matches
            .values()
            .filter(|m| m.competition.to_lowercase() == comp && m.season.to_lowercase() == season)
            .map(|m| m.match_id)
            .collect();
        self.filter(
            |s| ids.contains(&s.match_id),
            format!("{} [{competition} {season}]", self.provenance),
        )
    }
}
