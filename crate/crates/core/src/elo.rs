//! Club-Elo ratings and team-strength tiers.

use std::collections::BTreeMap;
use std::io::Read;

use log::info;
use serde::Deserialize;

use crate::error::Result;
use crate::shot::{TeamRating, TeamTier};

/// Strictly above this Elo a team counts as a potential Champions League winner.
pub const UCL_WINNER_ELO: f64 = 1950.0;
pub const TOP_RANK: usize = 25;

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct EloRow {
    #[serde(rename = "Rank", deserialize_with = "lenient_rank")]
    pub rank: Option<u32>,
    #[serde(rename = "Club")]
    pub club: String,
    #[serde(rename = "Country", default)]
    pub country: String,
    #[serde(rename = "Level", default)]
    pub level: String,
    #[serde(rename = "Elo")]
    pub elo: f64,
    #[serde(rename = "From", default)]
    pub from: String,
    #[serde(rename = "To", default)]
    pub to: String,
}

fn lenient_rank<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Option<u32>, D::Error> {
    let s = String::deserialize(d)?;
    Ok(s.trim().parse().ok())
}

pub fn read_elo_csv<R: Read>(reader: R) -> Result<Vec<EloRow>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let mut rows = Vec::new();
    for row in rdr.deserialize() {
        rows.push(row?);
    }
    Ok(rows)
}

/// Reads a two-column `provider_name,elo_name` alignment table.
pub fn read_aliases<R: Read>(reader: R) -> Result<BTreeMap<String, String>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let mut out = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec?;
        if rec.len() >= 2 {
            out.insert(normalize(&rec[0]), rec[1].trim().to_string());
        }
    }
    Ok(out)
}

/// Provider names that differ from Club-Elo's short names beyond what
/// normalisation can bridge.
const BUILTIN_ALIASES: &[(&str, &str)] = &[
    ("Manchester City", "Man City"),
    ("Manchester United", "Man United"),
    ("Paris Saint-Germain", "Paris SG"),
    ("Bayern Munich", "Bayern"),
    ("Borussia Dortmund", "Dortmund"),
    ("Borussia Mönchengladbach", "Gladbach"),
    ("Bayer Leverkusen", "Leverkusen"),
    ("Atlético Madrid", "Atletico"),
    ("Athletic Club", "Bilbao"),
    ("Real Sociedad", "Sociedad"),
    ("Real Betis", "Betis"),
    ("Deportivo La Coruña", "Depor"),
    ("Internazionale", "Inter"),
    ("AC Milan", "Milan"),
    ("Hellas Verona", "Verona"),
    ("Olympique Lyonnais", "Lyon"),
    ("Olympique Marseille", "Marseille"),
    ("Saint-Étienne", "Saint-Etienne"),
    ("West Bromwich Albion", "West Brom"),
    ("Tottenham Hotspur", "Tottenham"),
    ("Newcastle United", "Newcastle"),
    ("AFC Bournemouth", "Bournemouth"),
    ("Leicester City", "Leicester"),
    ("Stoke City", "Stoke"),
    ("Swansea City", "Swansea"),
    ("Norwich City", "Norwich"),
    ("West Ham United", "West Ham"),
    ("Hamburger SV", "Hamburg"),
    ("Hertha Berlin", "Hertha"),
    ("FC Köln", "Koeln"),
    ("1. FC Köln", "Koeln"),
    ("Eintracht Frankfurt", "Frankfurt"),
    ("Werder Bremen", "Werder"),
    ("Hoffenheim", "Hoffenheim"),
];

const STOP_TOKENS: &[&str] = &[
    "fc", "cf", "afc", "ac", "as", "ss", "ssc", "sc", "us", "ud", "cd", "rc", "rcd", "sd", "ca",
    "club", "de", "calcio", "1", "ogc", "sco", "vfl", "vfb", "tsg", "sv", "fsv", "hsc",
];

fn fold_char(c: char) -> char {
    match c {
        'á' | 'à' | 'â' | 'ä' | 'ã' | 'å' => 'a',
        'é' | 'è' | 'ê' | 'ë' => 'e',
        'í' | 'ì' | 'î' | 'ï' => 'i',
        'ó' | 'ò' | 'ô' | 'ö' | 'õ' | 'ø' => 'o',
        'ú' | 'ù' | 'û' | 'ü' => 'u',
        'ñ' => 'n',
        'ç' => 'c',
        other => other,
    }
}

/// Lowercase, accent-folded, punctuation-free name without club-type tokens.
pub fn normalize(name: &str) -> String {
    let folded: String = name
        .to_lowercase()
        .chars()
        .map(fold_char)
        .map(|c| if c.is_alphanumeric() { c } else { ' ' })
        .collect();
    folded
        .split_whitespace()
        .filter(|t| !STOP_TOKENS.contains(t))
        .collect::<Vec<_>>()
        .join("")
}

/// Tier rule: `UclWinner` iff `elo > 1950`; `Top25` iff ranked in the top 25
/// by Elo and not a UCL winner; otherwise `Other`.
pub fn tier_for(elo: f64, rank: usize) -> TeamTier {
    if elo > UCL_WINNER_ELO {
        TeamTier::UclWinner
    } else if rank <= TOP_RANK {
        TeamTier::Top25
    } else {
        TeamTier::Other
    }
}

/// Keeps one row per club, restricted to rows valid on `date` when given.
/// Returns (club, elo, rank by elo) sorted by rank.
pub fn ranked_clubs(rows: &[EloRow], date: Option<&str>) -> Vec<(String, f64, usize)> {
    let mut latest: BTreeMap<String, &EloRow> = BTreeMap::new();
    for row in rows {
        let valid = match date {
            Some(d) => {
                (row.from.is_empty() || row.from.as_str() <= d)
                    && (row.to.is_empty() || d <= row.to.as_str())
            }
            None => true,
        };
        if !valid {
            continue;
        }
        latest
            .entry(row.club.clone())
            .and_modify(|r| {
                if row.from > r.from {
                    *r = row;
                }
            })
            .or_insert(row);
    }
    let mut clubs: Vec<(String, f64)> = latest.into_iter().map(|(c, r)| (c, r.elo)).collect();
    clubs.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    clubs
        .into_iter()
        .enumerate()
        .map(|(i, (c, e))| (c, e, i + 1))
        .collect()
}

#[derive(Debug, Clone, Default)]
pub struct RatingLog {
    pub matched: Vec<(String, String)>,
    pub fuzzy: Vec<(String, String)>,
    pub missing: Vec<String>,
}

/// Assigns every provider team a rating and exactly one tier.
///
/// Teams are aligned by explicit alias, then by normalised name, then by a
/// unique substring match of normalised names. Teams that cannot be aligned
/// get tier `Other` and are listed in the log.
pub fn load_team_ratings(
    rows: &[EloRow],
    team_names: &BTreeMap<u64, String>,
    aliases: &BTreeMap<String, String>,
    date: Option<&str>,
) -> (BTreeMap<u64, TeamRating>, RatingLog) {
    let ranked = ranked_clubs(rows, date);
    let by_norm: BTreeMap<String, (f64, usize, &str)> = ranked
        .iter()
        .map(|(c, e, r)| (normalize(c), (*e, *r, c.as_str())))
        .collect();
    let builtin: BTreeMap<String, &str> = BUILTIN_ALIASES
        .iter()
        .map(|(p, e)| (normalize(p), *e))
        .collect();

    let mut log = RatingLog::default();
    let mut out = BTreeMap::new();
    for (&team_id, name) in team_names {
        let key = normalize(name);
        let alias = aliases
            .get(&key)
            .map(String::as_str)
            .or_else(|| builtin.get(&key).copied());
        let mut hit = alias.and_then(|a| by_norm.get(&normalize(a)).copied());
        if hit.is_none() {
            hit = by_norm.get(&key).copied();
        }
        let mut fuzzy = false;
        if hit.is_none() && !key.is_empty() {
            let candidates: Vec<_> = by_norm
                .iter()
                .filter(|(k, _)| k.len() >= 4 && (key.contains(k.as_str()) || k.contains(&key)))
                .collect();
            if candidates.len() == 1 {
                hit = Some(*candidates[0].1);
                fuzzy = true;
            }
        }
        let rating = match hit {
            Some((elo, rank, club)) => {
                if fuzzy {
                    log.fuzzy.push((name.clone(), club.to_string()));
                } else {
                    log.matched.push((name.clone(), club.to_string()));
                }
                TeamRating {
                    team_id,
                    elo: Some(elo),
                    tier: tier_for(elo, rank),
                }
            }
            None => {
                info!("team '{name}' not found in ratings; tier set to other");
                log.missing.push(name.clone());
                TeamRating {
                    team_id,
                    elo: None,
                    tier: TeamTier::Other,
                }
            }
        };
        out.insert(team_id, rating);
    }
    (out, log)
}
