//! End-to-end acceptance checks, one line per criterion.
//!
//! Criteria 1-6 run on synthetic data with oracles written here rather than
//! borrowed from the library. Criteria 7-14 need the StatsBomb open data:
//! point `XGBIAS_DATA_DIR` at a checkout (the directory holding
//! `competitions.json`, or its parent) to run them; otherwise they SKIP.

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::OnceLock;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use xgbias::experiments::{run_skill_mixture, run_training_augmentation, AugmentationConfig, MixtureConfig};
use xgbias::experiments::{run_h1, run_player_profiles, H1Result, H1_ALPHAS, H1_SHOTS};
use xgbias::logistic::{design_matrix, fit_logistic, penalized_gradient, train_on_design};
use xgbias::multicalib::{
    baseline_report, baseline_weights, fit_updates, gax_leaderboard, replay, BaselineWeighting,
    BinSchema,
};
use xgbias::pipeline::{self, StandardFit};
use xgbias::rng::stream;
use xgbias::sampler::{build_distribution, consistency_probability, overperformance_probability};
use xgbias::split::stratified_split;
use xgbias::statsbomb::{parse_event_data, ShotPolicy};
use xgbias::synthetic;
use xgbias::{
    poisson_binomial, MultiCalibOptions, MultiCalibratedModel, Position, ShotDataset, ShotRecord, SubgroupKey,
    TeamTier, TrainOptions, VolumeTier,
};

#[derive(Clone, Copy, PartialEq)]
enum Status {
    Pass,
    Fail,
    Skip,
}

struct Outcome {
    status: Status,
    detail: String,
}

fn judge(ok: bool, detail: String) -> Outcome {
    Outcome {
        status: if ok { Status::Pass } else { Status::Fail },
        detail,
    }
}

fn fail(detail: impl Into<String>) -> Outcome {
    Outcome {
        status: Status::Fail,
        detail: detail.into(),
    }
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

fn normal<R: Rng>(r: &mut R) -> f64 {
    // Box-Muller; 1 - u keeps the log argument in (0, 1]
    let u: f64 = 1.0 - r.random::<f64>();
    let v: f64 = r.random();
    (-2.0 * u.ln()).sqrt() * (std::f64::consts::TAU * v).cos()
}

// ---------------------------------------------------------------- 1

fn brute_force_pmf(ps: &[f64]) -> Vec<f64> {
    let n = ps.len();
    let mut pmf = vec![0.0; n + 1];
    for mask in 0u32..(1 << n) {
        let mut prob = 1.0;
        for (i, p) in ps.iter().enumerate() {
            prob *= if mask >> i & 1 == 1 { *p } else { 1.0 - p };
        }
        pmf[mask.count_ones() as usize] += prob;
    }
    pmf
}

fn c1_poisson_binomial() -> Outcome {
    let mut r = stream(101, &[1]);
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let n = r.random_range(0..=15);
        let ps: Vec<f64> = (0..n)
            .map(|_| match r.random_range(0..20) {
                0 => 0.0,
                1 => 1.0,
                _ => r.random::<f64>(),
            })
            .collect();
        let got = match poisson_binomial(&ps) {
            Ok(d) => d.pmf,
            Err(e) => return fail(format!("rejected a valid list: {e}")),
        };
        let want = brute_force_pmf(&ps);
        if got.len() != want.len() {
            return fail(format!("pmf has {} entries for {n} shots", got.len()));
        }
        for (a, b) in got.iter().zip(&want) {
            worst = worst.max((a - b).abs());
        }
    }
    judge(worst <= 1e-12, format!("max |error| {worst:.2e} over 200 lists, N <= 15 (limit 1e-12)"))
}

// ---------------------------------------------------------------- 2

fn oracle_loss(rows: &[[f64; 6]], labels: &[bool], theta: &[f64], c: f64) -> f64 {
    let mut total = 0.0;
    for (x, &y) in rows.iter().zip(labels) {
        let z = theta[0] + x.iter().zip(&theta[1..]).map(|(a, w)| a * w).sum::<f64>();
        // -log p(y | z), evaluated on the stable side
        let s = if y { -z } else { z };
        total += if s > 0.0 { s + (-s).exp().ln_1p() } else { s.exp().ln_1p() };
    }
    total + theta[1..].iter().map(|w| w * w).sum::<f64>() / (2.0 * c)
}

fn c2_gradient_and_descent() -> Outcome {
    let ds = synthetic::shot_dataset(4_000, 21);
    let (rows, labels) = design_matrix(&ds.shots).unwrap();
    let c = 1.0;
    let scale: Vec<f64> = (0..6)
        .map(|j| (rows.iter().map(|x| x[j] * x[j]).sum::<f64>() / rows.len() as f64).sqrt().max(1.0))
        .collect();
    let mut base = vec![synthetic::REFERENCE_INTERCEPT];
    base.extend(synthetic::REFERENCE_WEIGHTS);

    let mut r = stream(102, &[2]);
    let mut worst_norm = 0.0f64;
    let mut worst_coord = 0.0f64;
    for _ in 0..20 {
        let theta: Vec<f64> = base
            .iter()
            .enumerate()
            .map(|(j, t)| {
                let s = if j == 0 { 1.0 } else { scale[j - 1] };
                t + r.random_range(-1.0..1.0) * 0.5 / s
            })
            .collect();
        let g = penalized_gradient(&rows, &labels, &theta, c);
        let mut fd = vec![0.0; 7];
        for j in 0..7 {
            let h = 1e-5 / if j == 0 { 1.0 } else { scale[j - 1] };
            let mut up = theta.clone();
            let mut down = theta.clone();
            up[j] += h;
            down[j] -= h;
            fd[j] = (oracle_loss(&rows, &labels, &up, c) - oracle_loss(&rows, &labels, &down, c)) / (2.0 * h);
        }
        let gnorm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        let dnorm = g.iter().zip(&fd).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        worst_norm = worst_norm.max(dnorm / gnorm);
        let ginf = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for (a, b) in g.iter().zip(&fd) {
            worst_coord = worst_coord.max((a - b).abs() / a.abs().max(1e-3 * ginf));
        }
    }

    // Newton iterates, re-derived by truncating the fit after k steps and
    // scored with the oracle loss.
    let mut descent_ok = true;
    let mut steps = 0;
    for (n, seed) in [(5_000, 22), (40_000, 23)] {
        let ds = synthetic::shot_dataset(n, seed);
        let (rows, labels) = design_matrix(&ds.shots).unwrap();
        let full = fit_logistic(&rows, &labels, &TrainOptions::default()).unwrap();
        let mut prev = oracle_loss(&rows, &labels, &[0.0; 7], c);
        descent_ok &= (full.meta.loss_history[0] - prev).abs() <= 1e-9 * prev;
        for k in 1..=full.meta.iterations {
            let opts = TrainOptions {
                max_iter: k,
                ..TrainOptions::default()
            };
            let fit = fit_logistic(&rows, &labels, &opts).unwrap();
            let mut theta = vec![fit.intercept];
            theta.extend(fit.weights);
            let loss = oracle_loss(&rows, &labels, &theta, c);
            descent_ok &= loss <= prev + 1e-10 * prev.abs();
            descent_ok &= (loss - fit.meta.final_loss).abs() <= 1e-9 * loss;
            prev = loss;
            steps += 1;
        }
        descent_ok &= full.meta.converged;
        descent_ok &= full.meta.loss_history.windows(2).all(|w| w[1] <= w[0]);
    }
    judge(
        worst_norm <= 1e-5 && worst_coord <= 1e-5 && descent_ok,
        format!(
            "20 points: relative error {worst_norm:.1e} (norm), {worst_coord:.1e} (per coordinate), limit 1e-5; \
             loss non-increasing over {steps} Newton steps: {descent_ok}"
        ),
    )
}

// ---------------------------------------------------------------- 3

fn c3_null_skill() -> Outcome {
    let ds = synthetic::shot_dataset(100_000, 31);
    let dist = build_distribution(&ds.shots).unwrap();
    let est = overperformance_probability(&dist, &synthetic::reference_model(), 0.0, 100, 10_000, 32).unwrap();
    judge(
        est.mean_gax.abs() <= 0.12,
        format!(
            "alpha 0, n 100, 10000 reps: mean GAX {:+.4} (|.| <= 0.12), sd {:.3}",
            est.mean_gax, est.std_gax
        ),
    )
}

// ---------------------------------------------------------------- 4

const EDGES: [f64; 11] = [0.0, 0.015, 0.023, 0.034, 0.052, 0.079, 0.12, 0.18, 0.27, 0.40, 1.0];

fn bin_of(p: f64) -> usize {
    EDGES[1..10].iter().filter(|&&e| p >= e).count()
}

/// Largest |conversion - mean prediction| over (position, volume) x bin cells
/// with at least 100 shots.
fn worst_cell(preds: &[f64], outcomes: &[bool], keys: &[SubgroupKey]) -> (f64, usize) {
    let mut cells: BTreeMap<(Position, VolumeTier, usize), (usize, f64, usize)> = BTreeMap::new();
    for ((p, y), k) in preds.iter().zip(outcomes).zip(keys) {
        let c = cells.entry((k.position, k.volume, bin_of(*p))).or_default();
        c.0 += 1;
        c.1 += p;
        c.2 += *y as usize;
    }
    let supported: Vec<_> = cells.values().filter(|c| c.0 >= 100).collect();
    let worst = supported
        .iter()
        .map(|(n, s, g)| (*g as f64 / *n as f64 - s / *n as f64).abs())
        .fold(0.0, f64::max);
    (worst, supported.len())
}

fn c4_multicalibration() -> Outcome {
    let mut r = stream(401, &[4]);
    let biased = (Position::Midfielder, VolumeTier::Mid);
    let n = 540_000;
    let mut preds = Vec::with_capacity(n);
    let mut outcomes = Vec::with_capacity(n);
    let mut keys = Vec::with_capacity(n);
    for i in 0..n {
        let position = Position::ALL[i % 3];
        let volume = VolumeTier::ALL[(i / 3) % 3];
        let team = TeamTier::ALL[r.random_range(0..3)];
        // log-uniform on [0.005, 0.8]
        let p = (0.005f64.ln() + r.random::<f64>() * (0.8f64 / 0.005).ln()).exp();
        let truth = if (position, volume) == biased { p + 0.10 } else { p };
        preds.push(p);
        outcomes.push(r.random::<f64>() < truth);
        keys.push(SubgroupKey {
            volume,
            position,
            team,
        });
    }
    let (before, _) = worst_cell(&preds, &outcomes, &keys);
    let opts = MultiCalibOptions::default();
    let fit = match fit_updates(&preds, &outcomes, &keys, &opts) {
        Ok(f) => f,
        Err(e) => return fail(format!("fit failed: {e}")),
    };
    let (after, cells) = worst_cell(&fit.predictions, &outcomes, &keys);
    let schema = BinSchema::default();
    let replay_ok = preds
        .iter()
        .zip(&keys)
        .zip(&fit.predictions)
        .all(|((p, k), q)| replay(*p, k, &fit.updates, &schema) == *q);
    judge(
        after <= 0.01 && replay_ok && before > 0.05,
        format!(
            "+0.10 injected: worst cell {before:.4} before, {after:.4} after over {cells} supported cells \
             (limit 0.01); {} updates, converged {}, replay exact {replay_ok}",
            fit.updates.len(),
            fit.converged
        ),
    )
}

// ---------------------------------------------------------------- 5

fn library_fingerprint() -> String {
    let ds = synthetic::shot_dataset(30_000, 51);
    let model = synthetic::reference_model();
    let dist = build_distribution(&ds.shots).unwrap();
    let mut parts = Vec::new();

    let h1 = run_h1(&model, &dist, &[0.0, 25.0], &[50, 100], 2_000, 52).unwrap();
    parts.push(serde_json::to_string(&h1).unwrap());

    let mut players = BTreeMap::new();
    for id in [3u64, 9] {
        let shots: Vec<ShotRecord> = ds.shots.iter().filter(|s| s.player_id == id).cloned().collect();
        players.insert(format!("Player {id}"), shots);
    }
    let profiles = run_player_profiles(&model, &dist, &players, &[10.0], &[50], 1_000, 53).unwrap();
    parts.push(serde_json::to_string(&profiles).unwrap());

    let (train, test) = stratified_split(&ds, 0.1, 54).unwrap();
    parts.push(test.shots.iter().map(|s| s.shot_id.as_str()).collect::<Vec<_>>().join(","));
    let fitted = xgbias::train_logistic(&train, &TrainOptions::default()).unwrap();
    parts.push(fitted.to_json().unwrap());

    let (mc, _) = pipeline::multicalibrate(&fitted, &ds, &MultiCalibOptions::default()).unwrap();
    parts.push(mc.to_json().unwrap());

    let target: Vec<ShotRecord> = ds.shots.iter().filter(|s| s.player_id == 3).cloned().collect();
    let cfg = AugmentationConfig {
        alphas: vec![25.0],
        m_values: vec![0, 500],
        runs: 3,
        seed: 55,
    };
    let base = train.filter(|s| s.player_id != 3, "augmentation base");
    let aug = run_training_augmentation(&base, &target, &dist, &TrainOptions::default(), &cfg).unwrap();
    parts.push(serde_json::to_string(&aug).unwrap());

    let mut mix_cfg = MixtureConfig::standard(20_000, 56);
    mix_cfg.test_ns = vec![50];
    mix_cfg.reps = 200;
    let mix = run_skill_mixture(&model, &dist, &TrainOptions::default(), &mix_cfg).unwrap();
    parts.push(serde_json::to_string(&mix).unwrap());
    parts.join("\n")
}

fn cli(args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_xgbias"))
        .args(args)
        .env_remove("XGBIAS_DATA_DIR")
        .env("RUST_LOG", "error")
        .output()
        .map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(format!("{args:?}: {}", String::from_utf8_lossy(&out.stderr).trim()))
    }
}

fn output_files(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .unwrap()
        .filter_map(|e| {
            let path = e.unwrap().path();
            let name = path.file_name()?.to_str()?.to_string();
            // manifests record argv, thread count and timing by design
            (path.is_file() && !name.ends_with(".manifest.json")).then(|| (name, fs::read(&path).unwrap()))
        })
        .collect()
}

fn cli_run(root: &Path, label: &str, threads: usize) -> Result<BTreeMap<String, Vec<u8>>, String> {
    let cache = root.join("shots.csv").display().to_string();
    let out = root.join(label);
    let out_s = out.display().to_string();
    let model = out.join("model.json").display().to_string();
    let t = threads.to_string();
    let common = ["--out-dir", out_s.as_str(), "--threads", t.as_str()];
    let with = |args: &[&str]| -> Vec<String> { args.iter().chain(&common).map(|s| s.to_string()).collect() };
    let steps: Vec<Vec<String>> = vec![
        with(&["train", "--cache", &cache, "--seed", "3"]),
        with(&[
            "simulate", "h1", "--model", &model, "--cache", &cache, "--alphas", "0,25", "--shots", "50,100", "--reps",
            "2000", "--seed", "7",
        ]),
        with(&[
            "simulate", "profiles", "--model", &model, "--cache", &cache, "--players", "Player 3,Player 9",
            "--alphas", "10", "--shots", "50", "--reps", "1000", "--seed", "7",
        ]),
        with(&[
            "simulate", "h3a", "--cache", &cache, "--target-cache", &cache, "--target", "Player 3", "--split-seed",
            "3", "--alphas", "25", "--m-values", "0,500", "--runs", "3", "--seed", "7",
        ]),
        with(&[
            "simulate", "h3b", "--model", &model, "--cache", &cache, "--train-size", "20000", "--test-alphas",
            "0,20", "--test-shots", "50", "--reps", "200", "--seed", "7",
        ]),
    ];
    for step in &steps {
        let args: Vec<&str> = step.iter().map(String::as_str).collect();
        cli(&args)?;
    }
    Ok(output_files(&out))
}

fn c5_determinism() -> Outcome {
    let mut lib = Vec::new();
    for threads in [1, 4, 4] {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        lib.push(pool.install(library_fingerprint));
    }
    let lib_ok = lib.windows(2).all(|w| w[0] == w[1]);

    let dir = tempfile::tempdir().unwrap();
    let ds = synthetic::shot_dataset(20_000, 57);
    xgbias::cache::write_cache(&dir.path().join("shots.csv"), &ds).unwrap();
    let mut runs = Vec::new();
    for (label, threads) in [("t1", 1), ("t4a", 4), ("t4b", 4)] {
        match cli_run(dir.path(), label, threads) {
            Ok(files) => runs.push(files),
            Err(e) => return fail(format!("command failed: {e}")),
        }
    }
    let cli_ok = runs.windows(2).all(|w| w[0] == w[1]);
    let n_files = runs[0].len();
    let expected = ["model.json", "model.eval.json", "h1.csv", "profiles.csv", "h3a.csv", "h3b.csv"];
    let complete = expected.iter().all(|f| runs[0].contains_key(*f));
    judge(
        lib_ok && cli_ok && complete,
        format!(
            "library results identical on 1/4/4 threads: {lib_ok}; {n_files} CLI output files \
             (train, h1, profiles, h3a, h3b) byte-identical on 1/4/4 threads: {cli_ok}"
        ),
    )
}

// ---------------------------------------------------------------- 6

/// Inverse observed information at `theta`; ridge acts on the weights only.
fn fisher_se(rows: &[[f64; 6]], theta: &[f64], c: f64) -> Vec<f64> {
    let mut info = DMatrix::<f64>::zeros(7, 7);
    for x in rows {
        let mut xt = DVector::<f64>::zeros(7);
        xt[0] = 1.0;
        for j in 0..6 {
            xt[j + 1] = x[j];
        }
        let p = sigmoid(theta.iter().zip(xt.iter()).map(|(a, b)| a * b).sum());
        info += (p * (1.0 - p)) * &xt * xt.transpose();
    }
    for j in 1..7 {
        info[(j, j)] += 1.0 / c;
    }
    let cov = info.try_inverse().expect("information matrix is invertible");
    (0..7).map(|j| cov[(j, j)].sqrt()).collect()
}

fn c6_recovery() -> Outcome {
    let truth = [-1.1, 0.7, -0.45, 0.3, -0.2, 0.55, -0.35];
    let n = 200_000;
    let mut r = stream(601, &[6]);
    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let mut x = [0.0; 6];
        for v in x.iter_mut() {
            *v = normal(&mut r);
        }
        let z = truth[0] + x.iter().zip(&truth[1..]).map(|(a, w)| a * w).sum::<f64>();
        rows.push(x);
        labels.push(r.random::<f64>() < sigmoid(z));
    }
    let fit = fit_logistic(&rows, &labels, &TrainOptions::default()).unwrap();
    let mut est = vec![fit.intercept];
    est.extend(fit.weights);
    let worst = est.iter().zip(&truth).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);

    // The shot-geometry design is far less informative (the intercept's
    // standard error alone is of order one at 200k shots), so there the
    // check is that the estimates sit within 4 standard errors.
    let ds = synthetic::shot_dataset(n, 602);
    let (grows, glabels) = design_matrix(&ds.shots).unwrap();
    let model = train_on_design(&grows, &glabels, &TrainOptions::default()).unwrap();
    let mut gtruth = vec![synthetic::REFERENCE_INTERCEPT];
    gtruth.extend(synthetic::REFERENCE_WEIGHTS);
    let se = fisher_se(&grows, &model.theta(), 1.0);
    let z = model
        .theta()
        .iter()
        .zip(&gtruth)
        .zip(&se)
        .map(|((a, b), s)| ((a - b) / s).abs())
        .fold(0.0, f64::max);
    let gworst = model.theta().iter().zip(&gtruth).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    judge(
        worst <= 0.02 && fit.meta.converged && z <= 4.0 && model.meta.converged,
        format!(
            "200k shots, unit-variance design: max |error| {worst:.4} (limit 0.02); shot-geometry design: \
             max |error| {gworst:.3}, max {z:.2} standard errors (limit 4)"
        ),
    )
}

// ---------------------------------------------------------------- data

enum Gate {
    Skip(String),
    Broken(String),
}

struct RealData {
    big5: ShotDataset,
    fit: StandardFit,
    messi: Vec<ShotRecord>,
    mc: MultiCalibratedModel,
    keys: Vec<SubgroupKey>,
}

fn events_root() -> Result<PathBuf, Gate> {
    let Some(root) = std::env::var_os("XGBIAS_DATA_DIR") else {
        return Err(Gate::Skip("XGBIAS_DATA_DIR not set (needs StatsBomb open data)".into()));
    };
    let root = PathBuf::from(root);
    [root.join("data"), root.clone()]
        .into_iter()
        .find(|d| d.join("competitions.json").is_file())
        .ok_or_else(|| Gate::Skip(format!("no competitions.json under {}", root.display())))
}

fn load_real() -> Result<RealData, Gate> {
    let root = events_root()?;
    let broken = |e: xgbias::Error| Gate::Broken(e.to_string());
    let (big5, _) = parse_event_data(&root, &pipeline::big5_selector(), &ShotPolicy::default()).map_err(broken)?;
    let (laliga, _) =
        parse_event_data(&root, &pipeline::la_liga_selector(), &ShotPolicy::default()).map_err(broken)?;
    let fit = pipeline::standard_model(&big5, 0, &TrainOptions::default()).map_err(broken)?;
    let (_, _, messi) = pipeline::player_shots(&laliga, "Messi").map_err(broken)?;
    let (mc, keys) = pipeline::multicalibrate(&fit.model, &big5, &MultiCalibOptions::default()).map_err(broken)?;
    Ok(RealData {
        big5,
        fit,
        messi,
        mc,
        keys,
    })
}

fn real() -> Result<&'static RealData, Outcome> {
    static REAL: OnceLock<Result<RealData, Gate>> = OnceLock::new();
    match REAL.get_or_init(load_real) {
        Ok(d) => Ok(d),
        Err(Gate::Skip(why)) => Err(Outcome {
            status: Status::Skip,
            detail: why.clone(),
        }),
        Err(Gate::Broken(why)) => Err(fail(format!("could not load the open data: {why}"))),
    }
}

fn real_h1() -> Result<&'static H1Result, Outcome> {
    static H1: OnceLock<Result<H1Result, String>> = OnceLock::new();
    let d = real()?;
    H1.get_or_init(|| {
        let dist = build_distribution(&d.big5.shots).map_err(|e| e.to_string())?;
        run_h1(&d.fit.model, &dist, &H1_ALPHAS, &H1_SHOTS, 10_000, 1).map_err(|e| e.to_string())
    })
    .as_ref()
    .map_err(|e| fail(e.clone()))
}

macro_rules! gated {
    ($e:expr) => {
        match $e {
            Ok(v) => v,
            Err(outcome) => return outcome,
        }
    };
}

fn c7_shot_count() -> Outcome {
    let d = gated!(real());
    judge(d.big5.len() == 43_110, format!("{} open-play shots (expected 43110)", d.big5.len()))
}

fn c8_discrimination() -> Outcome {
    let d = gated!(real());
    let auroc = d.fit.report.auroc.unwrap_or(f64::NAN);
    let brier = d.fit.report.brier;
    judge(
        (auroc - 0.7990).abs() <= 0.010 && (brier - 0.0793).abs() <= 0.005,
        format!("AUROC {auroc:.4} (0.7990 +/- 0.010), Brier {brier:.4} (0.0793 +/- 0.005)"),
    )
}

/// Mean and sd of simulated GAX by alpha (rows) and shot count (columns).
const REFERENCE_GRID: [(f64, [(f64, f64); 6]); 5] = [
    (0.0, [(-0.00, 1.39), (-0.02, 1.97), (-0.01, 2.42), (-0.06, 2.78), (-0.00, 3.06), (0.01, 3.43)]),
    (5.0, [(0.12, 1.41), (0.22, 2.01), (0.36, 2.47), (0.44, 2.83), (0.61, 3.11), (0.75, 3.50)]),
    (10.0, [(0.23, 1.43), (0.48, 2.03), (0.73, 2.52), (0.93, 2.87), (1.23, 3.16), (1.48, 3.55)]),
    (15.0, [(0.35, 1.46), (0.72, 2.07), (1.11, 2.57), (1.42, 2.92), (1.84, 3.23), (2.21, 3.61)]),
    (25.0, [(0.60, 1.51), (1.22, 2.14), (1.85, 2.65), (2.38, 3.00), (3.08, 3.34), (3.70, 3.73)]),
];

fn c9_simulation_grid() -> Outcome {
    let h1 = gated!(real_h1());
    let mut worst_mean = 0.0f64;
    let mut worst_sd = 0.0f64;
    for (alpha, row) in REFERENCE_GRID {
        for (n, (mean, sd)) in H1_SHOTS.iter().zip(row) {
            let Some(c) = h1.get(alpha, *n) else {
                return fail(format!("missing cell alpha {alpha}, n {n}"));
            };
            worst_mean = worst_mean.max((c.mean_gax - mean).abs());
            worst_sd = worst_sd.max((c.std_gax - sd).abs());
        }
    }
    judge(
        worst_mean <= 0.15 && worst_sd <= 0.20,
        format!("30 cells: max mean deviation {worst_mean:.3} (limit 0.15), max sd deviation {worst_sd:.3} (limit 0.20)"),
    )
}

fn c10_consistency() -> Outcome {
    let h1 = gated!(real_h1());
    let mut ok = true;
    let mut parts = Vec::new();
    for (alpha, n, want) in [(25.0, 100, 0.700), (10.0, 125, 0.416)] {
        let p = h1.get(alpha, n).map(|c| c.p_overperform).unwrap_or(f64::NAN);
        let got = consistency_probability(p, 4, 5).unwrap_or(f64::NAN);
        ok &= (got - want).abs() <= 0.03;
        parts.push(format!("alpha {alpha} n {n}: {got:.3} (expected {want:.3} +/- 0.03)"));
    }
    judge(ok, format!("P(>= 4 of 5 seasons) {}", parts.join("; ")))
}

fn c11_career_totals() -> Outcome {
    let d = gated!(real());
    let goals = d.messi.iter().filter(|s| s.is_goal).count();
    let xg: f64 = gated!(d.fit.model.predict_dataset(&d.messi).map_err(|e| fail(e.to_string()))).iter().sum();
    let gax = goals as f64 - xg;
    judge(
        d.messi.len() == 1862 && goals == 375 && (xg - 247.43).abs() <= 2.5 && (gax - 127.57).abs() <= 2.5,
        format!(
            "{} shots, {goals} goals (expected 1862 / 375); xG {xg:.2} (247.43 +/- 2.5), GAX {gax:.2} (127.57 +/- 2.5)",
            d.messi.len()
        ),
    )
}

const REFERENCE_BASELINES: [(Position, [f64; 3]); 3] = [
    (Position::Midfielder, [207.6, 257.8, 285.3]),
    (Position::Attacker, [201.9, 252.0, 274.3]),
    (Position::Defender, [191.5, 241.6, 270.1]),
];

fn c12_baselines() -> Outcome {
    let d = gated!(real());
    let weights = gated!(
        baseline_weights(&d.big5, &d.keys, BaselineWeighting::Players).map_err(|e| fail(e.to_string()))
    );
    let report = gated!(
        baseline_report(&d.mc, &d.messi, &weights, BaselineWeighting::Players).map_err(|e| fail(e.to_string()))
    );
    let mut worst = 0.0f64;
    for (position, row) in REFERENCE_BASELINES {
        for (volume, want) in VolumeTier::ALL.iter().zip(row) {
            let got = report
                .cells
                .iter()
                .find(|c| c.position == position && c.volume == *volume)
                .map(|c| c.cum_xg)
                .unwrap_or(f64::NAN);
            worst = worst.max((got - want).abs());
        }
    }
    let wavg = report.weighted_average_xg;
    let inc = report.gax_increase_pct;
    judge(
        worst <= 5.0 && (wavg - 225.01).abs() <= 5.0 && (inc - 17.0).abs() <= 3.0,
        format!(
            "9 cells max deviation {worst:.2} (limit 5); weighted average {wavg:.2} (225.01 +/- 5); \
             GAX increase {inc:.1}% (17 +/- 3)"
        ),
    )
}

fn c13_augmentation() -> Outcome {
    let d = gated!(real());
    let ids: HashSet<&str> = d.messi.iter().map(|s| s.shot_id.as_str()).collect();
    let base = d.fit.train.filter(|s| !ids.contains(s.shot_id.as_str()), "augmentation base");
    let dist = gated!(build_distribution(&d.big5.shots).map_err(|e| fail(e.to_string())));
    let cfg = AugmentationConfig {
        alphas: vec![25.0],
        m_values: vec![0, 4000],
        runs: 100,
        seed: 2,
    };
    let r = gated!(
        run_training_augmentation(&base, &d.messi, &dist, &TrainOptions::default(), &cfg)
            .map_err(|e| fail(e.to_string()))
    );
    let (Some(g0), Some(g4)) = (r.get(25.0, 0), r.get(25.0, 4000)) else {
        return fail("augmentation grid is missing a point");
    };
    let drop = g4.mean_gax - g0.mean_gax;
    judge(
        drop <= -5.0 && (g0.mean_gax - 127.6).abs() <= 2.5 && (g4.mean_gax - 120.8).abs() <= 2.5,
        format!(
            "alpha 25, 100 runs: GAX {:.2} at m=0 (127.6 +/- 2.5), {:.2} at m=4000 (120.8 +/- 2.5), change {drop:+.2} (<= -5)",
            g0.mean_gax, g4.mean_gax
        ),
    )
}

fn c14_leaderboard() -> Outcome {
    let d = gated!(real());
    let season = d.big5.in_competition(pipeline::PREMIER_LEAGUE, pipeline::BIG5_SEASON);
    let board = gated!((|| {
        let keys = pipeline::default_keys(&season)?;
        let standard = d.mc.base_model.predict_dataset(&season.shots)?;
        let adjusted = d.mc.predict_shots(&season.shots, &keys)?;
        gax_leaderboard(&season, &standard, &adjusted, 5)
    })()
    .map_err(|e| fail(e.to_string())));
    let (Some(s), Some(m)) = (board.standard, board.multicalibrated) else {
        return fail("empty leaderboard");
    };
    let rho = board.spearman.unwrap_or(f64::NAN);
    judge(
        board.rows.len() == 63
            && s.exceeders.abs_diff(50) <= 2
            && m.exceeders.abs_diff(51) <= 2
            && (s.mean_pct_over_exceeders - 16.72).abs() <= 2.0
            && (m.mean_pct_over_exceeders - 20.00).abs() <= 2.0
            && rho >= 0.9,
        format!(
            "{} players (63); exceeders {} / {} (50 / 51 +/- 2); mean excess {:.2}% / {:.2}% (16.72 / 20.00 +/- 2); \
             Spearman {rho:.3} (>= 0.9)",
            board.rows.len(),
            s.exceeders,
            m.exceeders,
            s.mean_pct_over_exceeders,
            m.mean_pct_over_exceeders
        ),
    )
}

fn main() {
    // `cargo test -- --list` and friends probe test binaries for names
    if std::env::args().any(|a| a == "--list") {
        println!("acceptance: test");
        return;
    }
    // panics become FAIL lines carrying the message
    std::panic::set_hook(Box::new(|_| {}));
    let criteria: [(u32, &str, fn() -> Outcome); 14] = [
        (1, "Poisson-binomial PMF vs brute force", c1_poisson_binomial),
        (2, "gradient vs finite differences; descent", c2_gradient_and_descent),
        (3, "zero skill gives zero mean GAX", c3_null_skill),
        (4, "multicalibration removes injected bias", c4_multicalibration),
        (5, "determinism across runs and threads", c5_determinism),
        (6, "coefficient recovery", c6_recovery),
        (7, "open-play shot count", c7_shot_count),
        (8, "held-out AUROC and Brier", c8_discrimination),
        (9, "simulated GAX grid", c9_simulation_grid),
        (10, "multi-season consistency", c10_consistency),
        (11, "career shot, goal and xG totals", c11_career_totals),
        (12, "position x volume baselines", c12_baselines),
        (13, "training-set augmentation", c13_augmentation),
        (14, "season GAX leaderboard", c14_leaderboard),
    ];
    let mut counts = [0usize; 3];
    for (id, title, check) in criteria {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|panic| {
            let msg = panic
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            fail(format!("panicked: {msg}"))
        });
        let label = match outcome.status {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Skip => "SKIP",
        };
        counts[outcome.status as usize] += 1;
        println!(
            "{label} {id:>2}  {title:<42} {} [{:.1}s]",
            outcome.detail,
            start.elapsed().as_secs_f64()
        );
    }
    println!(
        "acceptance: {} passed, {} failed, {} skipped",
        counts[0], counts[1], counts[2]
    );
    if counts[Status::Fail as usize] > 0 {
        std::process::exit(1);
    }
}
