//! One parameter struct per command. Every field is optional on the command
//! line; `prepare` fills defaults so the serialised struct is the resolved
//! configuration recorded in the manifest.

use std::collections::BTreeMap;
use std::fs::File;
use std::path::{Path, PathBuf};

use clap::Args;
use serde::{Deserialize, Serialize};
use serde_json::json;

use xgbias::experiments::{
    run_h1, run_player_profiles, run_skill_mixture, run_training_augmentation, AugmentationConfig,
    MixtureConfig, H1_ALPHAS, H1_SHOTS, DEFAULT_ALLOCATIONS, DEFAULT_ALPHA_LEVELS,
};
use xgbias::goal_dist::{filter_shots, finishing_summary};
use xgbias::multicalib::{
    baseline_report, baseline_weights, baseline_key, gax_leaderboard, BaselineWeighting, MultiCalibOptions,
    MultiCalibratedModel,
};
use xgbias::pipeline::{self, BIG5_SEASON, PREMIER_LEAGUE};
use xgbias::shot::Position;
use xgbias::statsbomb::{parse_event_data, MatchSelector, ShotPolicy};
use xgbias::subgroup::{calibration_by_group, calibration_curve, conversion_by_distance, GroupBy, VolumeTier};
use xgbias::{
    build_distribution, evaluate, ShotDataset, ShotFilter, SubgroupKey, TrainOptions, XgModel,
};

use crate::config::{check_output, data_root, non_empty, require, resolve_dir, resolve_input};
use crate::error::{CliError, CliResult};
use crate::run::{RunCtx, Step};

pub const DEFAULT_ELO_DATE: &str = "2015-08-01";
const SEED_REQUIRED: &str = "an explicit --seed is required for randomized commands";

fn stem_of(out: &Path) -> String {
    let s = out.to_string_lossy();
    s.rsplit_once('.').map(|(a, _)| a.to_string()).unwrap_or_else(|| s.into_owned())
}

fn out_default(out: &mut Option<PathBuf>, name: &str) -> CliResult<()> {
    let o = out.get_or_insert_with(|| PathBuf::from(name));
    check_output("out", o)
}

fn input(field: &str, p: &mut Option<PathBuf>) -> CliResult<()> {
    let v = p
        .as_ref()
        .ok_or_else(|| CliError::config(field, "is required"))?;
    *p = Some(resolve_input(field, v)?);
    Ok(())
}

fn opt_input(field: &str, p: &mut Option<PathBuf>) -> CliResult<()> {
    if let Some(v) = p.as_ref() {
        *p = Some(resolve_input(field, v)?);
    }
    Ok(())
}

fn path(p: &Option<PathBuf>) -> &Path {
    p.as_deref().expect("resolved in prepare")
}

fn load_cache(ctx: &mut RunCtx, p: &Path) -> CliResult<ShotDataset> {
    ctx.input_file(p)?;
    for kind in ["players", "teams", "matches", "provider_xg"] {
        let side = xgbias::cache::sidecar(p, kind);
        if side.exists() {
            ctx.input_file(&side)?;
        }
    }
    let ds = xgbias::cache::read_cache(p)?;
    if ds.is_empty() {
        return Err(CliError::Data(format!("{} holds no shots", p.display())));
    }
    Ok(ds)
}

fn load_model(ctx: &mut RunCtx, p: &Path) -> CliResult<XgModel> {
    ctx.input_file(p)?;
    // a multi-calibrated model file carries its base model
    let text = std::fs::read_to_string(p).map_err(|e| CliError::Data(format!("{}: {e}", p.display())))?;
    match XgModel::from_json(&text) {
        Ok(m) => Ok(m),
        Err(first) => MultiCalibratedModel::from_json(&text)
            .map(|mc| mc.base_model)
            .map_err(|_| CliError::Data(format!("{}: {first}", p.display()))),
    }
}

fn load_mc(ctx: &mut RunCtx, p: &Path) -> CliResult<MultiCalibratedModel> {
    ctx.input_file(p)?;
    Ok(MultiCalibratedModel::load(p)?)
}

fn train_opts(penalty_c: Option<f64>, tol: Option<f64>, max_iter: Option<usize>) -> TrainOptions {
    let d = TrainOptions::default();
    TrainOptions {
        penalty_c: penalty_c.unwrap_or(d.penalty_c),
        tol: tol.unwrap_or(d.tol),
        max_iter: max_iter.unwrap_or(d.max_iter),
        ..d
    }
}

fn check_positive(field: &str, v: f64) -> CliResult<()> {
    if !(v > 0.0) || !v.is_finite() {
        return Err(CliError::config(field, format!("must be positive, got {v}")));
    }
    Ok(())
}

// ---------------------------------------------------------------- ingest

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct IngestArgs {
    /// StatsBomb open-data directory (holding competitions.json).
    #[arg(long)]
    pub events_dir: Option<PathBuf>,
    /// Club-Elo CSV (Rank,Club,Country,Level,Elo,From,To).
    #[arg(long)]
    pub elo: Option<PathBuf>,
    /// Optional provider_name,elo_name alias table.
    #[arg(long)]
    pub aliases: Option<PathBuf>,
    /// Ratings snapshot date (YYYY-MM-DD).
    #[arg(long)]
    pub elo_date: Option<String>,
    /// big5 (2015/16 top five leagues), la-liga (all seasons) or all.
    #[arg(long)]
    pub preset: Option<String>,
    #[arg(long, value_delimiter = ',')]
    pub competitions: Option<Vec<u64>>,
    #[arg(long, value_delimiter = ',')]
    pub seasons: Option<Vec<String>>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl Step for IngestArgs {
    const NAME: &'static str = "ingest";

    fn prepare(&mut self) -> CliResult<()> {
        if self.events_dir.is_none() {
            let root = data_root().ok_or_else(|| {
                CliError::config("events_dir", "not given and XGBIAS_DATA_DIR is not set")
            })?;
            self.events_dir = Some(if root.join("data").join("competitions.json").exists() {
                root.join("data")
            } else {
                root
            });
        }
        self.events_dir = Some(resolve_dir("events_dir", path(&self.events_dir))?);
        if self.elo.is_none() {
            self.elo = data_root().map(|r| r.join("clubelo.csv")).filter(|p| p.exists());
        }
        opt_input("elo", &mut self.elo)?;
        opt_input("aliases", &mut self.aliases)?;
        self.elo_date.get_or_insert_with(|| DEFAULT_ELO_DATE.to_string());
        let preset = self.preset.get_or_insert_with(|| "big5".to_string()).clone();
        let base = match preset.as_str() {
            "big5" => pipeline::big5_selector(),
            "la-liga" => pipeline::la_liga_selector(),
            "all" => MatchSelector::default(),
            other => return Err(CliError::config("preset", format!("unknown preset '{other}' (big5|la-liga|all)"))),
        };
        self.competitions.get_or_insert(base.competition_ids);
        self.seasons.get_or_insert(base.season_names);
        out_default(&mut self.out, "shots.csv")
    }

    fn run(&self, ctx: &mut RunCtx) -> CliResult<()> {
        let root = path(&self.events_dir);
        let selector = MatchSelector {
            competition_ids: self.competitions.clone().unwrap_or_default(),
            season_names: self.seasons.clone().unwrap_or_default(),
        };
        let (mut ds, report) = parse_event_data(root, &selector, &ShotPolicy::default())?;
        for (file, msg) in &report.errors {
            log::warn!("skipped {file}: {msg}");
        }

        let mut files = vec!["competitions.json".to_string()];
        let mut seasons: Vec<(u64, u64)> = ds.matches.values().map(|m| (m.competition_id, m.season_id)).collect();
        seasons.sort();
        seasons.dedup();
        files.extend(seasons.iter().map(|(c, s)| format!("matches/{c}/{s}.json")));
        files.extend(ds.matches.keys().map(|id| format!("events/{id}.json")));
        files.retain(|f| root.join(f).exists());
        ctx.input_dir(root, files)?;

        let mut ratings = json!(null);
        if let Some(elo_path) = &self.elo {
            ctx.input_file(elo_path)?;
            let rows = xgbias::elo::read_elo_csv(open(elo_path)?)?;
            let aliases = match &self.aliases {
                Some(a) => {
                    ctx.input_file(a)?;
                    xgbias::elo::read_aliases(open(a)?)?
                }
                None => BTreeMap::new(),
            };
            let (teams, log) =
                xgbias::elo::load_team_ratings(&rows, &ds.team_names, &aliases, self.elo_date.as_deref());
            ds.teams = teams;
            ratings = json!({"matched": log.matched.len(), "fuzzy": log.fuzzy, "missing": log.missing});
        } else {
            log::warn!("no ratings file: every team is tier 'other'");
        }

        let out = ctx.path_for(path(&self.out))?;
        let written = xgbias::cache::write_cache(&out, &ds)?;
        for w in &written {
            ctx.written(w);
        }
        let summary = json!({
            "shots": ds.len(),
            "goals": ds.goals(),
            "players": ds.players.len(),
            "teams": ds.teams.len(),
            "matches": ds.matches.len(),
            "files_parsed": report.files_parsed,
            "errors": report.errors,
            "shots_per_source": report.shots_per_source,
            "shots_seen": report.shots_seen,
            "shots_rejected_by_policy": report.shots_rejected_by_policy,
            "shots_out_of_frame": report.shots_out_of_frame,
            "warnings": report.warnings,
            "ratings": ratings,
        });
        ctx.emit_json(format!("{}.report.json", stem_of(path(&self.out))), &summary);
        ctx.summary("shots", ds.len());
        Ok(())
    }
}

fn open(p: &Path) -> CliResult<File> {
    File::open(p).map_err(|e| CliError::Data(format!("{}: {e}", p.display())))
}

// ---------------------------------------------------------------- train / evaluate

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainArgs {
    #[arg(long)]
    pub cache: Option<PathBuf>,
    /// Seed of the stratified 90/10 train/test split.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Inverse ridge strength C.
    #[arg(long)]
    pub penalty_c: Option<f64>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl Step for TrainArgs {
    const NAME: &'static str = "train";

    fn prepare(&mut self) -> CliResult<()> {
        input("cache", &mut self.cache)?;
        require("seed", self.seed, SEED_REQUIRED)?;
        let d = TrainOptions::default();
        check_positive("penalty_c", *self.penalty_c.get_or_insert(d.penalty_c))?;
        check_positive("tol", *self.tol.get_or_insert(d.tol))?;
        self.max_iter.get_or_insert(d.max_iter);
        out_default(&mut self.out, "model.json")
    }

    fn run(&self, ctx: &mut RunCtx) -> CliResult<()> {
        let ds = load_cache(ctx, path(&self.cache))?;
        let opts = train_opts(self.penalty_c, self.tol, self.max_iter);
        let fit = pipeline::standard_model(&ds, self.seed.unwrap_or_default(), &opts)?;
        ctx.emit(path(&self.out), fit.model.to_json()?);
        ctx.emit_json(format!("{}.eval.json", stem_of(path(&self.out))), &fit.report);
        ctx.summary("n_train", fit.train.len());
        ctx.summary("eval", &fit.report);
        if !fit.model.meta.converged {
            ctx.not_converged(format!(
                "Newton iterations stopped at gradient {:.3e} after {} iterations",
                fit.model.meta.gradient_max_norm, fit.model.meta.iterations
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub cache: Option<PathBuf>,
    /// Score only the held-out part of the split with this seed.
    #[arg(long)]
    pub split_seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl Step for EvaluateArgs {
    const NAME: &'static str = "evaluate";

    fn prepare(&mut self) -> CliResult<()> {
        input("model", &mut self.model)?;
        input("cache", &mut self.cache)?;
        out_default(&mut self.out, "eval.json")
    }

    fn run(&self, ctx: &mut RunCtx) -> CliResult<()> {
        let model = load_model(ctx, path(&self.model))?;
        let ds = load_cache(ctx, path(&self.cache))?;
        let test = match self.split_seed {
            Some(seed) => xgbias::split::stratified_split(&ds, pipeline::TEST_FRACTION, seed)?.1,
            None => ds,
        };
        let report = evaluate(&model, &test)?;
        ctx.summary("eval", &report);
        ctx.emit_json(path(&self.out), &report);
        Ok(())
    }
}

// ---------------------------------------------------------------- simulate

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct H1Args {
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Shot cache whose locations define the sampling map.
    #[arg(long)]
    pub cache: Option<PathBuf>,
    /// Skill levels in percent.
    #[arg(long, value_delimiter = ',')]
    pub alphas: Option<Vec<f64>>,
    /// Shots per simulated season.
    #[arg(long, value_delimiter = ',')]
    pub shots: Option<Vec<usize>>,
    #[arg(long)]
    pub reps: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn grids(alphas: &mut Option<Vec<f64>>, shots: &mut Option<Vec<usize>>, reps: &mut Option<usize>) -> CliResult<()> {
    non_empty("alphas", alphas.get_or_insert_with(|| H1_ALPHAS.to_vec()))?;
    let s = shots.get_or_insert_with(|| H1_SHOTS.to_vec());
    non_empty("shots", s)?;
    if s.contains(&0) {
        return Err(CliError::config("shots", "shot counts must be positive"));
    }
    if *reps.get_or_insert(10_000) == 0 {
        return Err(CliError::config("reps", "must be at least 1"));
    }
    Ok(())
}

impl Step for H1Args {
    const NAME: &'static str = "simulate h1";

    fn prepare(&mut self) -> CliResult<()> {
        input("model", &mut self.model)?;
        input("cache", &mut self.cache)?;
        require("seed", self.seed, SEED_REQUIRED)?;
        grids(&mut self.alphas, &mut self.shots, &mut self.reps)?;
        out_default(&mut self.out, "h1.csv")
    }

    fn run(&self, ctx: &mut RunCtx) -> CliResult<()> {
        let model = load_model(ctx, path(&self.model))?;
        let ds = load_cache(ctx, path(&self.cache))?;
        let dist = build_distribution(&ds.shots)?;
        let r = run_h1(
            &model,
            &dist,
            self.alphas.as_deref().unwrap_or_default(),
            self.shots.as_deref().unwrap_or_default(),
            self.reps.unwrap_or_default(),
            self.seed.unwrap_or_default(),
        )?;
        ctx.emit(path(&self.out), r.to_csv());
        Ok(())
    }
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct ProfilesArgs {
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub cache: Option<PathBuf>,
    /// Player ids or name fragments.
    #[arg(long, value_delimiter = ',')]
    pub players: Option<Vec<String>>,
    #[arg(long, value_delimiter = ',')]
    pub alphas: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    pub shots: Option<Vec<usize>>,
    #[arg(long)]
    pub reps: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl Step for ProfilesArgs {
    const NAME: &'static str = "simulate profiles";

    fn prepare(&mut self) -> CliResult<()> {
        input("model", &mut self.model)?;
        input("cache", &mut self.cache)?;
        require("seed", self.seed, SEED_REQUIRED)?;
        non_empty("players", self.players.get_or_insert_with(Vec::new))?;
        grids(&mut self.alphas, &mut self.shots, &mut self.reps)?;
        out_default(&mut self.out, "profiles.csv")
    }

    fn run(&self, ctx: &mut RunCtx) -> CliResult<()> {
        let model = load_model(ctx, path(&self.model))?;
        let ds = load_cache(ctx, path(&self.cache))?;
        let global = build_distribution(&ds.shots)?;
        let mut sets = BTreeMap::new();
        for needle in self.players.as_deref().unwrap_or_default() {
            let (_, name, shots) = pipeline::player_shots(&ds, needle)
                .map_err(|e| CliError::config("players", e.to_string()))?;
            sets.insert(name, shots);
        }
        let r = run_player_profiles(
            &model,
            &global,
            &sets,
            self.alphas.as_deref().unwrap_or_default(),
            self.shots.as_deref().unwrap_or_default(),
            self.reps.unwrap_or_default(),
            self.seed.unwrap_or_default(),
        )?;
        ctx.summary("skipped", &r.skipped);
        ctx.emit(path(&self.out), r.to_csv());
        Ok(())
    }
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct H3aArgs {
    /// Training population (its split's training part is the base training set).
    #[arg(long)]
    pub cache: Option<PathBuf>,
    /// Cache holding the target's shots; defaults to --cache.
    #[arg(long)]
    pub target_cache: Option<PathBuf>,
    /// Target player id or name fragment.
    #[arg(long)]
    pub target: Option<String>,
    /// Split seed of the base model; defaults to --seed.
    #[arg(long)]
    pub split_seed: Option<u64>,
    #[arg(long, value_delimiter = ',')]
    pub alphas: Option<Vec<f64>>,
    /// Numbers of synthetic shots added to the training data.
    #[arg(long, value_delimiter = ',')]
    pub m_values: Option<Vec<usize>>,
    #[arg(long)]
    pub runs: Option<usize>,
    #[arg(long)]
    pub penalty_c: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl Step for H3aArgs {
    const NAME: &'static str = "simulate h3a";

    fn prepare(&mut self) -> CliResult<()> {
        input("cache", &mut self.cache)?;
        if self.target_cache.is_none() {
            self.target_cache = self.cache.clone();
        }
        input("target_cache", &mut self.target_cache)?;
        if self.target.is_none() {
            return Err(CliError::config("target", "is required"));
        }
        let seed = require("seed", self.seed, SEED_REQUIRED)?;
        self.split_seed.get_or_insert(seed);
        let defaults = AugmentationConfig::standard(seed);
        non_empty("alphas", self.alphas.get_or_insert(defaults.alphas))?;
        non_empty("m_values", self.m_values.get_or_insert(defaults.m_values))?;
        if *self.runs.get_or_insert(defaults.runs) == 0 {
            return Err(CliError::config("runs", "must be at least 1"));
        }
        check_positive("penalty_c", *self.penalty_c.get_or_insert(TrainOptions::default().penalty_c))?;
        out_default(&mut self.out, "h3a.csv")
    }

    fn run(&self, ctx: &mut RunCtx) -> CliResult<()> {
        let ds = load_cache(ctx, path(&self.cache))?;
        let target_ds = load_cache(ctx, path(&self.target_cache))?;
        let (_, name, eval) = pipeline::player_shots(&target_ds, self.target.as_deref().unwrap_or_default())
            .map_err(|e| CliError::config("target", e.to_string()))?;
        let (train, _) = xgbias::split::stratified_split(&ds, pipeline::TEST_FRACTION, self.split_seed.unwrap_or_default())?;
        let ids: std::collections::HashSet<&str> = eval.iter().map(|s| s.shot_id.as_str()).collect();
        let base_train = train.filter(|s| !ids.contains(s.shot_id.as_str()), "augmentation base");
        let dist = build_distribution(&ds.shots)?;
        let cfg = AugmentationConfig {
            alphas: self.alphas.clone().unwrap_or_default(),
            m_values: self.m_values.clone().unwrap_or_default(),
            runs: self.runs.unwrap_or_default(),
            seed: self.seed.unwrap_or_default(),
        };
        let opts = train_opts(self.penalty_c, None, None);
        let r = run_training_augmentation(&base_train, &eval, &dist, &opts, &cfg)?;
        ctx.summary("target", name);
        ctx.summary("base_gax", r.base_gax);
        ctx.summary("excluded_target_shots", train.len() - base_train.len());
        ctx.emit(path(&self.out), r.to_csv());
        Ok(())
    }
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct H3bArgs {
    /// Generating model (also the ground truth).
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Shot cache whose locations define the sampling map.
    #[arg(long)]
    pub cache: Option<PathBuf>,
    /// Training shots per allocation (default 100,000).
    #[arg(long)]
    pub train_size: Option<usize>,
    /// Use the full 1,000,000-shot training sets.
    #[arg(long)]
    pub full: Option<bool>,
    #[arg(long, value_delimiter = ',')]
    pub alpha_levels: Option<Vec<f64>>,
    /// Relative shot counts per skill level, one list per allocation
    /// (config file only).
    #[arg(skip)]
    pub allocations: Option<Vec<Vec<f64>>>,
    #[arg(long, value_delimiter = ',')]
    pub test_alphas: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    pub test_shots: Option<Vec<usize>>,
    #[arg(long)]
    pub reps: Option<usize>,
    #[arg(long)]
    pub penalty_c: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl Step for H3bArgs {
    const NAME: &'static str = "simulate h3b";

    fn prepare(&mut self) -> CliResult<()> {
        input("model", &mut self.model)?;
        input("cache", &mut self.cache)?;
        let seed = require("seed", self.seed, SEED_REQUIRED)?;
        let full = *self.full.get_or_insert(false);
        let size = *self
            .train_size
            .get_or_insert(if full { 1_000_000 } else { 100_000 });
        let defaults = MixtureConfig::standard(size, seed);
        if size == 0 {
            return Err(CliError::config("train_size", "must be positive"));
        }
        let levels = self.alpha_levels.get_or_insert(DEFAULT_ALPHA_LEVELS.to_vec()).len();
        non_empty("alpha_levels", self.alpha_levels.as_deref().unwrap_or_default())?;
        let allocs = self
            .allocations
            .get_or_insert_with(|| DEFAULT_ALLOCATIONS.iter().map(|a| a.to_vec()).collect());
        non_empty("allocations", allocs)?;
        if let Some(bad) = allocs.iter().position(|a| a.len() != levels) {
            return Err(CliError::config(
                "allocations",
                format!("allocation {bad} does not have one entry per alpha level ({levels})"),
            ));
        }
        non_empty("test_alphas", self.test_alphas.get_or_insert(defaults.test_alphas))?;
        non_empty("test_shots", self.test_shots.get_or_insert(defaults.test_ns))?;
        if *self.reps.get_or_insert(defaults.reps) == 0 {
            return Err(CliError::config("reps", "must be at least 1"));
        }
        check_positive("penalty_c", *self.penalty_c.get_or_insert(TrainOptions::default().penalty_c))?;
        out_default(&mut self.out, "h3b.csv")
    }

    fn run(&self, ctx: &mut RunCtx) -> CliResult<()> {
        let model = load_model(ctx, path(&self.model))?;
        let ds = load_cache(ctx, path(&self.cache))?;
        let dist = build_distribution(&ds.shots)?;
        let cfg = MixtureConfig {
            alpha_levels: self.alpha_levels.clone().unwrap_or_default(),
            allocations: self.allocations.clone().unwrap_or_default(),
            train_size: self.train_size.unwrap_or_default(),
            test_alphas: self.test_alphas.clone().unwrap_or_default(),
            test_ns: self.test_shots.clone().unwrap_or_default(),
            reps: self.reps.unwrap_or_default(),
            seed: self.seed.unwrap_or_default(),
        };
        let r = run_skill_mixture(&model, &dist, &train_opts(self.penalty_c, None, None), &cfg)?;
        let counts: Vec<&Vec<usize>> = r.allocations.iter().map(|a| &a.counts).collect();
        ctx.summary("counts", counts);
        ctx.emit(path(&self.out), r.to_csv());
        Ok(())
    }
}

// ---------------------------------------------------------------- finishing / calibration

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct FinishingArgs {
    #[arg(long)]
    pub cache: Option<PathBuf>,
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Player id or name fragment.
    #[arg(long)]
    pub player: Option<String>,
    /// e.g. `deflected=exclude,band=25-35yd,body=foot|head,minute=0-80`.
    #[arg(long)]
    pub filters: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl Step for FinishingArgs {
    const NAME: &'static str = "finishing";

    fn prepare(&mut self) -> CliResult<()> {
        input("cache", &mut self.cache)?;
        input("model", &mut self.model)?;
        if self.player.is_none() {
            return Err(CliError::config("player", "is required"));
        }
        let f = self.filters.get_or_insert_with(String::new);
        f.parse::<ShotFilter>()
            .map_err(|e| CliError::config("filters", e.to_string()))?;
        out_default(&mut self.out, "dist.csv")
    }

    fn run(&self, ctx: &mut RunCtx) -> CliResult<()> {
        let ds = load_cache(ctx, path(&self.cache))?;
        let model = load_model(ctx, path(&self.model))?;
        let filter: ShotFilter = self.filters.as_deref().unwrap_or_default().parse()?;
        let (id, name, shots) = pipeline::player_shots(&ds, self.player.as_deref().unwrap_or_default())
            .map_err(|e| CliError::config("player", e.to_string()))?;
        let scored = shots
            .into_iter()
            .map(|s| model.predict_shot(&s).map(|p| (s, p)))
            .collect::<xgbias::Result<Vec<_>>>()?;
        let kept = filter_shots(&scored, &filter)?;
        let (dist, summary) = finishing_summary(&kept.kept)?;
        ctx.emit(path(&self.out), dist.to_csv());
        let record = json!({
            "player_id": id,
            "player": name,
            "n": summary.n,
            "total_xg": summary.total_xg,
            "observed": summary.observed,
            "p_at_most": summary.p_at_most,
            "p_at_least": summary.p_at_least,
            "removed": kept.removed,
        });
        ctx.emit_json(format!("{}.summary.json", stem_of(path(&self.out))), &record);
        Ok(())
    }
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct CalibrationArgs {
    #[arg(long)]
    pub cache: Option<PathBuf>,
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// volume, position or team.
    #[arg(long)]
    pub group_by: Option<String>,
    #[arg(long)]
    pub min_bin_n: Option<usize>,
    #[arg(long)]
    pub bandwidth: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl Step for CalibrationArgs {
    const NAME: &'static str = "calibration";

    fn prepare(&mut self) -> CliResult<()> {
        input("cache", &mut self.cache)?;
        input("model", &mut self.model)?;
        self.group_by
            .get_or_insert_with(|| "volume".to_string())
            .parse::<GroupBy>()
            .map_err(|e| CliError::config("group_by", e.to_string()))?;
        self.min_bin_n.get_or_insert(xgbias::subgroup::MIN_BIN_N);
        check_positive("bandwidth", *self.bandwidth.get_or_insert(xgbias::subgroup::DEFAULT_BANDWIDTH))?;
        out_default(&mut self.out, "curve.csv")
    }

    fn run(&self, ctx: &mut RunCtx) -> CliResult<()> {
        let ds = load_cache(ctx, path(&self.cache))?;
        let model = load_model(ctx, path(&self.model))?;
        let group_by: GroupBy = self.group_by.as_deref().unwrap_or_default().parse()?;
        let preds = model.predict_dataset(&ds.shots)?;
        let outcomes: Vec<bool> = ds.shots.iter().map(|s| s.is_goal).collect();
        let keys = pipeline::default_keys(&ds)?;
        let (min_n, bw) = (self.min_bin_n.unwrap_or_default(), self.bandwidth.unwrap_or_default());
        let stem = stem_of(path(&self.out));

        let pooled = calibration_curve(&preds, &outcomes, min_n, bw)?;
        ctx.emit(path(&self.out), pooled.to_csv());
        let mut deviation = BTreeMap::new();
        for (label, curve) in calibration_by_group(&preds, &outcomes, &keys, group_by, min_n, bw)? {
            deviation.insert(label, curve.max_smoothed_deviation());
            ctx.emit(format!("{stem}.{label}.csv"), curve.to_csv());
        }
        let volumes: Vec<VolumeTier> = keys.iter().map(|k| k.volume).collect();
        ctx.emit(format!("{stem}.conversion.csv"), conversion_by_distance(&ds.shots, &volumes)?.to_csv());
        ctx.summary("max_smoothed_deviation", deviation);
        Ok(())
    }
}

// ---------------------------------------------------------------- multicalib

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct McFitArgs {
    #[arg(long)]
    pub cache: Option<PathBuf>,
    /// Standard model to correct.
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub tolerance: Option<f64>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    #[arg(long)]
    pub min_support: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl Step for McFitArgs {
    const NAME: &'static str = "multicalib fit";

    fn prepare(&mut self) -> CliResult<()> {
        input("cache", &mut self.cache)?;
        input("model", &mut self.model)?;
        let d = MultiCalibOptions::default();
        check_positive("tolerance", *self.tolerance.get_or_insert(d.tolerance))?;
        self.max_iter.get_or_insert(d.max_iter);
        if *self.min_support.get_or_insert(d.min_support) == 0 {
            return Err(CliError::config("min_support", "must be at least 1"));
        }
        out_default(&mut self.out, "multicalib.json")
    }

    fn run(&self, ctx: &mut RunCtx) -> CliResult<()> {
        let ds = load_cache(ctx, path(&self.cache))?;
        let base = load_model(ctx, path(&self.model))?;
        let opts = MultiCalibOptions {
            tolerance: self.tolerance.unwrap_or_default(),
            max_iter: self.max_iter.unwrap_or_default(),
            min_support: self.min_support.unwrap_or_default(),
            ..MultiCalibOptions::default()
        };
        let (mc, _) = pipeline::multicalibrate(&base, &ds, &opts)?;
        ctx.summary("updates", mc.updates.len());
        ctx.emit(path(&self.out), mc.to_json()?);
        if !mc.converged {
            ctx.not_converged(format!(
                "multi-calibration did not reach tolerance {} within {} iterations",
                opts.tolerance, opts.max_iter
            ));
        }
        Ok(())
    }
}

fn parse_group(s: &str) -> CliResult<SubgroupKey> {
    let (pos, vol) = s
        .split_once('/')
        .ok_or_else(|| CliError::config("as_group", format!("'{s}' is not position/volume")))?;
    let position: Position = pos.parse().map_err(|e: xgbias::Error| CliError::config("as_group", e.to_string()))?;
    let volume: VolumeTier = vol.parse().map_err(|e: xgbias::Error| CliError::config("as_group", e.to_string()))?;
    Ok(baseline_key(position, volume))
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct McPredictArgs {
    /// Multi-calibrated model file.
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub cache: Option<PathBuf>,
    /// Score every shot as this `position/volume` baseline instead of the
    /// shooter's own group.
    #[arg(long)]
    pub as_group: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl Step for McPredictArgs {
    const NAME: &'static str = "multicalib predict";

    fn prepare(&mut self) -> CliResult<()> {
        input("model", &mut self.model)?;
        input("cache", &mut self.cache)?;
        if let Some(g) = &self.as_group {
            parse_group(g)?;
        }
        out_default(&mut self.out, "predictions.csv")
    }

    fn run(&self, ctx: &mut RunCtx) -> CliResult<()> {
        let mc = load_mc(ctx, path(&self.model))?;
        let ds = load_cache(ctx, path(&self.cache))?;
        let keys = match &self.as_group {
            Some(g) => vec![parse_group(g)?; ds.len()],
            None => pipeline::default_keys(&ds)?,
        };
        let base = mc.base_model.predict_dataset(&ds.shots)?;
        let adjusted = mc.predict_shots(&ds.shots, &keys)?;
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["shot_id", "player_id", "position", "volume", "team", "base_xg", "multicalibrated_xg"])
            .map_err(|e| CliError::Data(e.to_string()))?;
        for ((s, k), (b, a)) in ds.shots.iter().zip(&keys).zip(base.iter().zip(&adjusted)) {
            w.write_record([
                s.shot_id.clone(),
                s.player_id.to_string(),
                k.position.to_string(),
                k.volume.to_string(),
                k.team.to_string(),
                b.to_string(),
                a.to_string(),
            ])
            .map_err(|e| CliError::Data(e.to_string()))?;
        }
        ctx.emit(path(&self.out), w.into_inner().map_err(|e| CliError::Data(e.to_string()))?);
        Ok(())
    }
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct BaselinesArgs {
    /// Multi-calibrated model file.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Population defining the average-player weights.
    #[arg(long)]
    pub cache: Option<PathBuf>,
    /// Cache holding the player's shots; defaults to --cache.
    #[arg(long)]
    pub target_cache: Option<PathBuf>,
    #[arg(long)]
    pub player: Option<String>,
    /// players or shots.
    #[arg(long)]
    pub weighting: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl Step for BaselinesArgs {
    const NAME: &'static str = "multicalib baselines";

    fn prepare(&mut self) -> CliResult<()> {
        input("model", &mut self.model)?;
        input("cache", &mut self.cache)?;
        if self.target_cache.is_none() {
            self.target_cache = self.cache.clone();
        }
        input("target_cache", &mut self.target_cache)?;
        if self.player.is_none() {
            return Err(CliError::config("player", "is required"));
        }
        self.weighting
            .get_or_insert_with(|| "players".to_string())
            .parse::<BaselineWeighting>()
            .map_err(|e| CliError::config("weighting", e.to_string()))?;
        out_default(&mut self.out, "baselines.csv")
    }

    fn run(&self, ctx: &mut RunCtx) -> CliResult<()> {
        let mc = load_mc(ctx, path(&self.model))?;
        let pop = load_cache(ctx, path(&self.cache))?;
        let target = load_cache(ctx, path(&self.target_cache))?;
        let weighting: BaselineWeighting = self.weighting.as_deref().unwrap_or_default().parse()?;
        let keys = pipeline::default_keys(&pop)?;
        let weights = baseline_weights(&pop, &keys, weighting)?;
        let (id, name, shots) = pipeline::player_shots(&target, self.player.as_deref().unwrap_or_default())
            .map_err(|e| CliError::config("player", e.to_string()))?;
        let report = baseline_report(&mc, &shots, &weights, weighting)?;
        let stem = stem_of(path(&self.out));
        ctx.emit(path(&self.out), report.to_long_csv());
        ctx.emit(format!("{stem}.matrix.csv"), report.to_matrix_csv());
        ctx.emit_json(
            format!("{stem}.json"),
            &json!({"player_id": id, "player": name, "report": report, "weights": weights
                .iter()
                .map(|(k, w)| json!({"position": k.position, "volume": k.volume, "weight": w}))
                .collect::<Vec<_>>()}),
        );
        ctx.summary("weighted_average_xg", report.weighted_average_xg);
        ctx.summary("gax_increase_pct", report.gax_increase_pct);
        Ok(())
    }
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct LeaderboardArgs {
    /// Multi-calibrated model file (its base model is the standard model).
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub cache: Option<PathBuf>,
    #[arg(long)]
    pub competition: Option<String>,
    #[arg(long)]
    pub season: Option<String>,
    #[arg(long)]
    pub min_goals: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl Step for LeaderboardArgs {
    const NAME: &'static str = "multicalib leaderboard";

    fn prepare(&mut self) -> CliResult<()> {
        input("model", &mut self.model)?;
        input("cache", &mut self.cache)?;
        self.competition.get_or_insert_with(|| PREMIER_LEAGUE.to_string());
        self.season.get_or_insert_with(|| BIG5_SEASON.to_string());
        self.min_goals.get_or_insert(5);
        out_default(&mut self.out, "leaderboard.csv")
    }

    fn run(&self, ctx: &mut RunCtx) -> CliResult<()> {
        let mc = load_mc(ctx, path(&self.model))?;
        let ds = load_cache(ctx, path(&self.cache))?;
        let season = ds.in_competition(
            self.competition.as_deref().unwrap_or_default(),
            self.season.as_deref().unwrap_or_default(),
        );
        if season.is_empty() {
            return Err(CliError::Data(format!(
                "no shots for {} {} in the cache",
                self.competition.as_deref().unwrap_or_default(),
                self.season.as_deref().unwrap_or_default()
            )));
        }
        let keys = pipeline::default_keys(&season)?;
        let standard = mc.base_model.predict_dataset(&season.shots)?;
        let adjusted = mc.predict_shots(&season.shots, &keys)?;
        let board = gax_leaderboard(&season, &standard, &adjusted, self.min_goals.unwrap_or_default())?;
        ctx.emit(path(&self.out), board.to_csv()?);
        ctx.emit_json(
            format!("{}.summary.json", stem_of(path(&self.out))),
            &json!({
                "players": board.rows.len(),
                "min_goals": board.min_goals,
                "standard": board.standard,
                "multicalibrated": board.multicalibrated,
                "provider": board.provider,
                "spearman": board.spearman,
            }),
        );
        ctx.summary("players", board.rows.len());
        Ok(())
    }
}
