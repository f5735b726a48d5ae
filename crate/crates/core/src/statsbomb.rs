//! Loader for the StatsBomb open-data directory layout.
//!
//! ```text
//! <root>/competitions.json
//! <root>/matches/<competition_id>/<season_id>.json
//! <root>/events/<match_id>.json
//! ```
//!
//! Shots are read from `Shot` events. Minutes played come from the
//! `Starting XI` lineups, substitutions, `Player Off` events and red cards.
//! Event files are parsed in parallel; the merged dataset is ordered by
//! match id and event index so re-parsing the same bytes is deterministic.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use log::{info, warn};
use rayon::prelude::*;
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::shot::{
    BodyPart, MatchInfo, PlayerProfile, Position, ShotDataset, ShotRecord, TeamRating, TeamTier,
};

#[derive(Debug, Clone)]
pub struct ShotPolicy {
    pub open_play_only: bool,
    pub exclude_own_goals: bool,
}

impl Default for ShotPolicy {
    fn default() -> Self {
        ShotPolicy {
            open_play_only: true,
            exclude_own_goals: true,
        }
    }
}

/// Which matches to read. Empty lists select everything.
#[derive(Debug, Clone, Default)]
pub struct MatchSelector {
    pub competition_ids: Vec<u64>,
    pub season_names: Vec<String>,
}

impl MatchSelector {
    fn accepts(&self, competition_id: u64, season_name: &str) -> bool {
        (self.competition_ids.is_empty() || self.competition_ids.contains(&competition_id))
            && (self.season_names.is_empty()
                || self
                    .season_names
                    .iter()
                    .any(|s| s.eq_ignore_ascii_case(season_name)))
    }
}

#[derive(Debug, Clone, Default)]
pub struct IngestReport {
    pub files_parsed: usize,
    /// (file, message) for every document that failed to parse.
    pub errors: Vec<(String, String)>,
    /// Accepted shots per "competition season" source.
    pub shots_per_source: BTreeMap<String, usize>,
    pub shots_seen: usize,
    pub shots_rejected_by_policy: usize,
    pub shots_out_of_frame: usize,
    pub warnings: Vec<String>,
}

#[derive(Deserialize)]
struct CompetitionRow {
    competition_id: u64,
    season_id: u64,
    competition_name: String,
    season_name: String,
}

#[derive(Deserialize)]
struct MatchRow {
    match_id: u64,
}

#[derive(Deserialize)]
struct Named {
    id: u64,
    #[serde(default)]
    name: String,
}

#[derive(Deserialize)]
struct NameOnly {
    #[serde(default)]
    name: String,
}

#[derive(Deserialize)]
struct Event {
    #[serde(default)]
    id: String,
    #[serde(default)]
    index: u64,
    #[serde(default)]
    minute: u32,
    #[serde(default)]
    second: u32,
    #[serde(rename = "type")]
    kind: NameOnly,
    team: Option<Named>,
    player: Option<Named>,
    position: Option<NameOnly>,
    location: Option<Vec<f64>>,
    tactics: Option<Tactics>,
    substitution: Option<Substitution>,
    shot: Option<ShotAttrs>,
    foul_committed: Option<CardHolder>,
    bad_behaviour: Option<CardHolder>,
}

#[derive(Deserialize)]
struct Tactics {
    #[serde(default)]
    lineup: Vec<LineupEntry>,
}

#[derive(Deserialize)]
struct LineupEntry {
    player: Named,
    position: Option<NameOnly>,
}

#[derive(Deserialize)]
struct Substitution {
    replacement: Option<Named>,
}

#[derive(Deserialize)]
struct ShotAttrs {
    statsbomb_xg: Option<f64>,
    #[serde(rename = "type")]
    kind: Option<NameOnly>,
    outcome: Option<NameOnly>,
    body_part: Option<NameOnly>,
    #[serde(default)]
    deflected: bool,
}

#[derive(Deserialize)]
struct CardHolder {
    card: Option<NameOnly>,
}

/// Maps a provider position name onto the three analysis classes.
pub fn classify_position(name: &str) -> Option<Position> {
    let n = name.to_ascii_lowercase();
    if n.is_empty() {
        None
    } else if n.contains("back") || n.contains("goalkeeper") {
        Some(Position::Defender)
    } else if n.contains("midfield") {
        Some(Position::Midfielder)
    } else if n.contains("forward") || n.contains("striker") || n.contains("wing") {
        Some(Position::Attacker)
    } else {
        None
    }
}

pub fn map_body_part(name: &str) -> BodyPart {
    let n = name.to_ascii_lowercase();
    if n.contains("foot") {
        BodyPart::Foot
    } else if n.contains("head") {
        BodyPart::Head
    } else {
        BodyPart::Other
    }
}

/// Everything extracted from a single match file.
#[derive(Default)]
struct MatchExtract {
    shots: Vec<ShotRecord>,
    minutes: BTreeMap<u64, f64>,
    start_positions: BTreeMap<u64, Vec<Position>>,
    event_positions: BTreeMap<u64, Vec<Position>>,
    player_names: BTreeMap<u64, String>,
    team_names: BTreeMap<u64, String>,
    shots_seen: usize,
    rejected_by_policy: usize,
    out_of_frame: usize,
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> std::result::Result<T, String> {
    let bytes = fs::read(path).map_err(|e| e.to_string())?;
    serde_json::from_slice(&bytes).map_err(|e| e.to_string())
}

fn is_red_card(holder: &Option<CardHolder>) -> bool {
    holder
        .as_ref()
        .and_then(|h| h.card.as_ref())
        .map(|c| c.name == "Red Card" || c.name == "Second Yellow")
        .unwrap_or(false)
}

fn extract_match(match_id: u64, events: Vec<Event>, policy: &ShotPolicy) -> MatchExtract {
    let mut out = MatchExtract::default();
    let clock = |e: &Event| e.minute as f64 + e.second as f64 / 60.0;
    let match_end = events.iter().map(clock).fold(0.0_f64, f64::max);

    let mut shots: Vec<(u64, ShotRecord)> = Vec::new();
    // player -> time they came on
    let mut on_pitch: BTreeMap<u64, f64> = BTreeMap::new();

    for event in &events {
        if let Some(team) = &event.team {
            out.team_names
                .entry(team.id)
                .or_insert_with(|| team.name.clone());
        }
        if let Some(player) = &event.player {
            out.player_names
                .entry(player.id)
                .or_insert_with(|| player.name.clone());
            if let Some(pos) = event.position.as_ref().and_then(|p| classify_position(&p.name)) {
                out.event_positions.entry(player.id).or_default().push(pos);
            }
        }
        let t = clock(event);
        match event.kind.name.as_str() {
            "Starting XI" => {
                if let Some(tactics) = &event.tactics {
                    for entry in &tactics.lineup {
                        out.player_names
                            .entry(entry.player.id)
                            .or_insert_with(|| entry.player.name.clone());
                        on_pitch.insert(entry.player.id, 0.0);
                        if let Some(pos) = entry
                            .position
                            .as_ref()
                            .and_then(|p| classify_position(&p.name))
                        {
                            out.start_positions
                                .entry(entry.player.id)
                                .or_default()
                                .push(pos);
                        }
                    }
                }
            }
            "Substitution" => {
                if let Some(off) = &event.player {
                    if let Some(since) = on_pitch.remove(&off.id) {
                        *out.minutes.entry(off.id).or_default() += (t - since).max(0.0);
                    }
                }
                if let Some(on) = event.substitution.as_ref().and_then(|s| s.replacement.as_ref()) {
                    out.player_names
                        .entry(on.id)
                        .or_insert_with(|| on.name.clone());
                    on_pitch.insert(on.id, t);
                }
            }
            "Player Off" => {
                if let Some(p) = &event.player {
                    if let Some(since) = on_pitch.remove(&p.id) {
                        *out.minutes.entry(p.id).or_default() += (t - since).max(0.0);
                    }
                }
            }
            "Player On" => {
                if let Some(p) = &event.player {
                    on_pitch.entry(p.id).or_insert(t);
                }
            }
            "Foul Committed" | "Bad Behaviour" => {
                let red = is_red_card(&event.foul_committed) || is_red_card(&event.bad_behaviour);
                if let (true, Some(p)) = (red, &event.player) {
                    if let Some(since) = on_pitch.remove(&p.id) {
                        *out.minutes.entry(p.id).or_default() += (t - since).max(0.0);
                    }
                }
            }
            "Shot" => {
                out.shots_seen += 1;
                let Some(attrs) = &event.shot else { continue };
                let shot_type = attrs.kind.as_ref().map(|k| k.name.as_str()).unwrap_or("");
                let is_open_play = shot_type == "Open Play";
                let is_own_goal = false;
                if (policy.open_play_only && !is_open_play) || (policy.exclude_own_goals && is_own_goal) {
                    out.rejected_by_policy += 1;
                    continue;
                }
                let (x, y) = match event.location.as_deref() {
                    Some([x, y, ..]) => (*x, *y),
                    _ => {
                        out.out_of_frame += 1;
                        continue;
                    }
                };
                let record = ShotRecord {
                    shot_id: event.id.clone(),
                    match_id,
                    player_id: event.player.as_ref().map(|p| p.id).unwrap_or(crate::shot::UNKNOWN_ID),
                    team_id: event.team.as_ref().map(|p| p.id).unwrap_or(crate::shot::UNKNOWN_ID),
                    minute: event.minute,
                    start_x: x,
                    start_y: y,
                    body_part: attrs
                        .body_part
                        .as_ref()
                        .map(|b| map_body_part(&b.name))
                        .unwrap_or(BodyPart::Other),
                    is_goal: attrs.outcome.as_ref().map(|o| o.name == "Goal").unwrap_or(false),
                    is_open_play,
                    is_deflected: attrs.deflected,
                    is_own_goal,
                    provider_xg: attrs.statsbomb_xg,
                };
                if !record.in_frame() {
                    out.out_of_frame += 1;
                    continue;
                }
                shots.push((event.index, record));
            }
            _ => {}
        }
    }
    for (player, since) in on_pitch {
        *out.minutes.entry(player).or_default() += (match_end - since).max(0.0);
    }
    shots.sort_by_key(|(index, _)| *index);
    out.shots = shots.into_iter().map(|(_, s)| s).collect();
    out
}

fn most_frequent(positions: &[Position]) -> Option<Position> {
    let mut counts = [0usize; 3];
    for p in positions {
        counts[*p as usize] += 1;
    }
    Position::ALL
        .iter()
        .copied()
        .filter(|p| counts[*p as usize] > 0)
        .max_by_key(|p| (counts[*p as usize], *p))
}

/// Parses a StatsBomb open-data directory into a shot dataset.
///
/// Malformed documents are recorded in the report and skipped. An empty or
/// missing `competitions.json` yields an empty dataset with a warning; a
/// missing root directory is an error.
pub fn parse_event_data(
    root: &Path,
    selector: &MatchSelector,
    policy: &ShotPolicy,
) -> Result<(ShotDataset, IngestReport)> {
    if !root.is_dir() {
        return Err(Error::io(
            root,
            std::io::Error::new(std::io::ErrorKind::NotFound, "events directory not found"),
        ));
    }
    let mut report = IngestReport::default();
    let competitions_path = root.join("competitions.json");
    let competitions: Vec<CompetitionRow> = if competitions_path.exists() {
        match read_json(&competitions_path) {
            Ok(rows) => {
                report.files_parsed += 1;
                rows
            }
            Err(e) => {
                report
                    .errors
                    .push((competitions_path.display().to_string(), e));
                Vec::new()
            }
        }
    } else {
        Vec::new()
    };

    let mut matches: BTreeMap<u64, MatchInfo> = BTreeMap::new();
    for comp in competitions
        .iter()
        .filter(|c| selector.accepts(c.competition_id, &c.season_name))
    {
        let path = root
            .join("matches")
            .join(comp.competition_id.to_string())
            .join(format!("{}.json", comp.season_id));
        match read_json::<Vec<MatchRow>>(&path) {
            Ok(rows) => {
                report.files_parsed += 1;
                for row in rows {
                    matches.insert(
                        row.match_id,
                        MatchInfo {
                            match_id: row.match_id,
                            competition_id: comp.competition_id,
                            season_id: comp.season_id,
                            competition: comp.competition_name.clone(),
                            season: comp.season_name.clone(),
                        },
                    );
                }
            }
            Err(e) => report.errors.push((path.display().to_string(), e)),
        }
    }

    let files: Vec<(u64, PathBuf)> = matches
        .keys()
        .map(|id| (*id, root.join("events").join(format!("{id}.json"))))
        .collect();
    let extracts: Vec<(u64, std::result::Result<MatchExtract, (String, String)>)> = files
        .par_iter()
        .map(|(id, path)| {
            let res = read_json::<Vec<Event>>(path)
                .map(|events| extract_match(*id, events, policy))
                .map_err(|e| (path.display().to_string(), e));
            (*id, res)
        })
        .collect();

    let mut dataset = ShotDataset {
        provenance: format!("statsbomb:{}", root.display()),
        ..Default::default()
    };
    let mut minutes: BTreeMap<u64, f64> = BTreeMap::new();
    let mut start_positions: BTreeMap<u64, Vec<Position>> = BTreeMap::new();
    let mut event_positions: BTreeMap<u64, Vec<Position>> = BTreeMap::new();
    let mut used_matches = BTreeSet::new();
    for (match_id, res) in extracts {
        let ex = match res {
            Ok(ex) => ex,
            Err(e) => {
                report.errors.push(e);
                continue;
            }
        };
        report.files_parsed += 1;
        used_matches.insert(match_id);
        report.shots_seen += ex.shots_seen;
        report.shots_rejected_by_policy += ex.rejected_by_policy;
        report.shots_out_of_frame += ex.out_of_frame;
        let info = &matches[&match_id];
        *report
            .shots_per_source
            .entry(format!("{} {}", info.competition, info.season))
            .or_default() += ex.shots.len();
        for (p, m) in ex.minutes {
            *minutes.entry(p).or_default() += m;
        }
        for (p, v) in ex.start_positions {
            start_positions.entry(p).or_default().extend(v);
        }
        for (p, v) in ex.event_positions {
            event_positions.entry(p).or_default().extend(v);
        }
        for (id, name) in ex.player_names {
            dataset.player_names.entry(id).or_insert(name);
        }
        for (id, name) in ex.team_names {
            dataset.team_names.entry(id).or_insert(name);
        }
        dataset.shots.extend(ex.shots);
    }
    dataset.matches = matches
        .into_iter()
        .filter(|(id, _)| used_matches.contains(id))
        .collect();

    let mut shot_counts: BTreeMap<u64, u32> = BTreeMap::new();
    for s in &dataset.shots {
        *shot_counts.entry(s.player_id).or_default() += 1;
    }
    let mut defaulted_positions = 0usize;
    let player_ids: BTreeSet<u64> = minutes
        .keys()
        .chain(shot_counts.keys())
        .copied()
        .filter(|id| *id != crate::shot::UNKNOWN_ID)
        .collect();
    for id in player_ids {
        let position = start_positions
            .get(&id)
            .and_then(|v| most_frequent(v))
            .or_else(|| event_positions.get(&id).and_then(|v| most_frequent(v)))
            .unwrap_or_else(|| {
                defaulted_positions += 1;
                Position::Midfielder
            });
        dataset.players.insert(
            id,
            PlayerProfile {
                player_id: id,
                total_shots: shot_counts.get(&id).copied().unwrap_or(0),
                total_minutes: minutes.get(&id).copied().unwrap_or(0.0).round() as u32,
                primary_position: position,
            },
        );
    }
    if defaulted_positions > 0 {
        report.warnings.push(format!(
            "{defaulted_positions} players without a known position defaulted to midfielder"
        ));
    }
    for (&id, _) in dataset.team_names.iter() {
        dataset.teams.insert(
            id,
            TeamRating {
                team_id: id,
                elo: None,
                tier: TeamTier::Other,
            },
        );
    }

    for (file, err) in &report.errors {
        warn!("failed to parse {file}: {err}");
    }
    if dataset.shots.is_empty() {
        let msg = format!("no shots left after filtering in {}", root.display());
        warn!("{msg}");
        report.warnings.push(msg);
    }
    for (source, n) in &report.shots_per_source {
        info!("{source}: {n} shots");
    }
    Ok((dataset, report))
}
