//! Flat-file shot cache.
//!
//! The shot table uses a fixed header. Player, team, match and provider-xG
//! metadata live in sidecar files next to it (`<stem>.players.csv`,
//! `<stem>.teams.csv`, `<stem>.matches.csv`, `<stem>.provider_xg.csv`);
//! sidecars are optional on read.

use std::fs::File;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::shot::{
    BodyPart, MatchInfo, PlayerProfile, Position, ShotDataset, ShotRecord, TeamRating, TeamTier,
};

pub const SHOT_HEADER: [&str; 11] = [
    "shot_id",
    "match_id",
    "player_id",
    "team_id",
    "minute",
    "start_x",
    "start_y",
    "body_part",
    "is_goal",
    "is_open_play",
    "is_deflected",
];

#[derive(Debug, Serialize, Deserialize)]
struct ShotRow {
    shot_id: String,
    match_id: u64,
    player_id: u64,
    team_id: u64,
    minute: u32,
    start_x: f64,
    start_y: f64,
    body_part: BodyPart,
    is_goal: bool,
    is_open_play: bool,
    is_deflected: bool,
}

#[derive(Debug, Serialize, Deserialize)]
struct PlayerRow {
    player_id: u64,
    player_name: String,
    total_shots: u32,
    total_minutes: u32,
    primary_position: Position,
}

#[derive(Debug, Serialize, Deserialize)]
struct TeamRow {
    team_id: u64,
    team_name: String,
    elo: Option<f64>,
    tier: TeamTier,
}

#[derive(Debug, Serialize, Deserialize)]
struct ProviderXgRow {
    shot_id: String,
    provider_xg: f64,
}

pub fn sidecar(path: &Path, kind: &str) -> PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "shots".into());
    path.with_file_name(format!("{stem}.{kind}.csv"))
}

pub fn write_shots<W: Write>(writer: W, shots: &[ShotRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for s in shots {
        w.serialize(ShotRow {
            shot_id: s.shot_id.clone(),
            match_id: s.match_id,
            player_id: s.player_id,
            team_id: s.team_id,
            minute: s.minute,
            start_x: s.start_x,
            start_y: s.start_y,
            body_part: s.body_part,
            is_goal: s.is_goal,
            is_open_play: s.is_open_play,
            is_deflected: s.is_deflected,
        })?;
    }
    if shots.is_empty() {
        w.write_record(SHOT_HEADER)?;
    }
    w.flush().map_err(|e| Error::io("<shot cache>", e))?;
    Ok(())
}

pub fn read_shots<R: Read>(reader: R) -> Result<Vec<ShotRecord>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if header != SHOT_HEADER {
        return Err(Error::Malformed {
            file: "shot cache".into(),
            message: format!("unexpected header {header:?}"),
        });
    }
    let mut shots = Vec::new();
    for row in rdr.deserialize::<ShotRow>() {
        let r = row?;
        let shot = ShotRecord {
            shot_id: r.shot_id,
            match_id: r.match_id,
            player_id: r.player_id,
            team_id: r.team_id,
            minute: r.minute,
            start_x: r.start_x,
            start_y: r.start_y,
            body_part: r.body_part,
            is_goal: r.is_goal,
            is_open_play: r.is_open_play,
            is_deflected: r.is_deflected,
            is_own_goal: false,
            provider_xg: None,
        };
        if !shot.in_frame() {
            return Err(Error::OutOfFrame {
                shot_id: shot.shot_id,
                x: shot.start_x,
                y: shot.start_y,
            });
        }
        shots.push(shot);
    }
    Ok(shots)
}

fn create(path: &Path) -> Result<File> {
    File::create(path).map_err(|e| Error::io(path, e))
}

/// Writes the shot table and all sidecars.
pub fn write_cache(path: &Path, ds: &ShotDataset) -> Result<Vec<PathBuf>> {
    write_shots(create(path)?, &ds.shots)?;

    let players_path = sidecar(path, "players");
    let mut w = csv::Writer::from_writer(create(&players_path)?);
    for p in ds.players.values() {
        w.serialize(PlayerRow {
            player_id: p.player_id,
            player_name: ds.player_names.get(&p.player_id).cloned().unwrap_or_default(),
            total_shots: p.total_shots,
            total_minutes: p.total_minutes,
            primary_position: p.primary_position,
        })?;
    }
    w.flush().map_err(|e| Error::io(&players_path, e))?;

    let teams_path = sidecar(path, "teams");
    let mut w = csv::Writer::from_writer(create(&teams_path)?);
    for t in ds.teams.values() {
        w.serialize(TeamRow {
            team_id: t.team_id,
            team_name: ds.team_names.get(&t.team_id).cloned().unwrap_or_default(),
            elo: t.elo,
            tier: t.tier,
        })?;
    }
    w.flush().map_err(|e| Error::io(&teams_path, e))?;

    let matches_path = sidecar(path, "matches");
    let mut w = csv::Writer::from_writer(create(&matches_path)?);
    for m in ds.matches.values() {
        w.serialize(m)?;
    }
    w.flush().map_err(|e| Error::io(&matches_path, e))?;

    let xg_path = sidecar(path, "provider_xg");
    let mut w = csv::Writer::from_writer(create(&xg_path)?);
    for s in &ds.shots {
        if let Some(xg) = s.provider_xg {
            w.serialize(ProviderXgRow {
                shot_id: s.shot_id.clone(),
                provider_xg: xg,
            })?;
        }
    }
    w.flush().map_err(|e| Error::io(&xg_path, e))?;

    Ok(vec![
        path.to_path_buf(),
        players_path,
        teams_path,
        matches_path,
        xg_path,
    ])
}

fn open_optional(path: &Path) -> Result<Option<File>> {
    match File::open(path) {
        Ok(f) => Ok(Some(f)),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
        Err(e) => Err(Error::io(path, e)),
    }
}

/// Loads a cache written by [`write_cache`]. Missing sidecars leave the
/// corresponding maps empty; players and teams referenced by shots but
/// absent from the sidecars are filled with defaults.
pub fn read_cache(path: &Path) -> Result<ShotDataset> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut ds = ShotDataset {
        shots: read_shots(file)?,
        provenance: format!("cache:{}", path.display()),
        ..Default::default()
    };

    if let Some(f) = open_optional(&sidecar(path, "players"))? {
        for row in csv::Reader::from_reader(f).deserialize::<PlayerRow>() {
            let r = row?;
            ds.player_names.insert(r.player_id, r.player_name);
            ds.players.insert(
                r.player_id,
                PlayerProfile {
                    player_id: r.player_id,
                    total_shots: r.total_shots,
                    total_minutes: r.total_minutes,
                    primary_position: r.primary_position,
                },
            );
        }
    }
    if let Some(f) = open_optional(&sidecar(path, "teams"))? {
        for row in csv::Reader::from_reader(f).deserialize::<TeamRow>() {
            let r = row?;
            ds.team_names.insert(r.team_id, r.team_name);
            ds.teams.insert(
                r.team_id,
                TeamRating {
                    team_id: r.team_id,
                    elo: r.elo,
                    tier: r.tier,
                },
            );
        }
    }
    if let Some(f) = open_optional(&sidecar(path, "matches"))? {
        for row in csv::Reader::from_reader(f).deserialize::<MatchInfo>() {
            let m = row?;
            ds.matches.insert(m.match_id, m);
        }
    }
    if let Some(f) = open_optional(&sidecar(path, "provider_xg"))? {
        let mut xg = std::collections::HashMap::new();
        for row in csv::Reader::from_reader(f).deserialize::<ProviderXgRow>() {
            let r = row?;
            xg.insert(r.shot_id, r.provider_xg);
        }
        for s in &mut ds.shots {
            s.provider_xg = xg.get(&s.shot_id).copied();
        }
    }

    let mut counts = std::collections::BTreeMap::<u64, u32>::new();
    for s in &ds.shots {
        *counts.entry(s.player_id).or_default() += 1;
        ds.teams.entry(s.team_id).or_insert(TeamRating {
            team_id: s.team_id,
            elo: None,
            tier: TeamTier::Other,
        });
    }
    for (id, n) in counts {
        ds.players.entry(id).or_insert(PlayerProfile {
            player_id: id,
            total_shots: n,
            total_minutes: 0,
            primary_position: Position::Midfielder,
        });
    }
    Ok(ds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic;

    #[test]
    fn header_is_fixed() {
        let mut buf = Vec::new();
        write_shots(&mut buf, &[]).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap().trim_end(),
            "shot_id,match_id,player_id,team_id,minute,start_x,start_y,body_part,is_goal,is_open_play,is_deflected"
        );
    }

    #[test]
    fn quoting_follows_rfc4180() {
        let mut ds = synthetic::shot_dataset(3, 1);
        ds.shots[0].shot_id = "a,\"b\"".into();
        let mut buf = Vec::new();
        write_shots(&mut buf, &ds.shots).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.contains("\"a,\"\"b\"\"\""));
        assert_eq!(read_shots(&buf[..]).unwrap()[0].shot_id, "a,\"b\"");
    }

    #[test]
    fn full_cache_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("shots.csv");
        let mut ds = synthetic::shot_dataset(500, 9);
        ds.shots[0].provider_xg = Some(0.125);
        let files = write_cache(&path, &ds).unwrap();
        assert_eq!(files.len(), 5);
        assert!(dir.path().join("shots.players.csv").exists());
        let back = read_cache(&path).unwrap();
        assert_eq!(back.shots, ds.shots);
        assert_eq!(back.players, ds.players);
        assert_eq!(back.teams, ds.teams);
        assert_eq!(back.player_names, ds.player_names);
    }

    #[test]
    fn wrong_header_rejected() {
        let text = "id,x\n1,2\n";
        assert!(matches!(read_shots(text.as_bytes()), Err(Error::Malformed { .. })));
    }
}
