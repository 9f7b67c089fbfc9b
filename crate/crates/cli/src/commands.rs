use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::Serialize;

use rltraj::campaign::{self, run_episode, Driver, EpisodeTrace, PlannerKind};
use rltraj::config::RunConfig;
use rltraj::env::Scene;
use rltraj::geometry::fit_trajectory_spline;
use rltraj::policy::{rolling_median, write_atomic, Checkpoint, Trainer};

use crate::svg;
use crate::UsageError;

const MEDIAN_WINDOW: usize = 1000;
const SPLINE_SAMPLES: usize = 200;

fn read_config(path: &Path) -> Result<RunConfig> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    RunConfig::from_toml(&text).with_context(|| format!("in {}", path.display()))
}

fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    Checkpoint::load(path).with_context(|| format!("loading checkpoint {}", path.display()))
}

/// Settings for evaluation commands: the given config file, or the
/// checkpoint's training settings with default evaluation overrides.
fn eval_config(ckpt: Option<&Checkpoint>, config: Option<&Path>) -> Result<RunConfig> {
    if let Some(p) = config {
        return read_config(p);
    }
    let mut run = RunConfig::default();
    if let Some(c) = ckpt {
        run.episode = c.episode.clone();
        run.weights = c.weights;
        run.safety = c.safety.clone();
        run.ppo = c.ppo.clone();
        run.seed = c.ppo.seed;
    }
    Ok(run)
}

fn write(path: &Path, contents: &str) -> Result<()> {
    write_atomic(path, contents.as_bytes()).with_context(|| format!("writing {}", path.display()))
}

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'a str,
    config_hash: String,
    seed: u64,
    files: Vec<String>,
}

fn write_manifest(dir: &Path, command: &str, run: &RunConfig, seed: u64, files: &[&str]) -> Result<()> {
    let m = Manifest {
        command,
        config_hash: run.hash(),
        seed,
        files: files.iter().map(|s| s.to_string()).collect(),
    };
    write(&dir.join("manifest.json"), &serde_json::to_string_pretty(&m)?)
}

pub fn train(config_path: &Path, resume: Option<&Path>) -> Result<()> {
    let run = read_config(config_path)?;
    let out = run.out_dir.clone();
    fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    let mut trainer = match resume {
        Some(c) => {
            let ckpt = load_checkpoint(c)?;
            if ckpt.episode != run.episode || ckpt.weights != run.weights {
                bail!("checkpoint {} was trained with different episode settings or weights", c.display());
            }
            Trainer::resume(ckpt, Some(run.ppo.total_steps))?
        }
        None => Trainer::new(run.training(), run.episode.clone(), run.weights, run.safety.clone())?,
    };
    let csv_path = out.join("rewards.csv");
    let mut previous: Vec<(f64, usize, String)> = Vec::new();
    if resume.is_some() {
        if let Ok(text) = fs::read_to_string(&csv_path) {
            previous = parse_rewards_csv(&text)?;
        }
    }
    write(&out.join("config.toml"), &format!("# config-hash: {}\n{}", run.hash(), run.to_toml()))?;

    let total = trainer.ppo.num_updates();
    trainer.run(|t, stats| {
        let recent = &t.history.episodes[t.history.episodes.len().saturating_sub(100)..];
        let mean = if recent.is_empty() {
            f64::NAN
        } else {
            recent.iter().map(|e| e.reward).sum::<f64>() / recent.len() as f64
        };
        eprintln!(
            "update {}/{} steps {} episodes {} mean reward (last 100) {:.3} entropy {:.3}",
            t.updates,
            total,
            t.steps,
            previous.len() + t.history.episodes.len(),
            mean,
            stats.loss.entropy
        );
    })?;

    trainer
        .checkpoint()
        .save(&out.join("checkpoint.json"))
        .context("saving checkpoint")?;
    let mut rows = previous;
    rows.extend(
        trainer
            .history
            .episodes
            .iter()
            .map(|e| (e.reward, e.steps, e.terminal.as_str().to_string())),
    );
    let rewards: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let median = rolling_median(&rewards, MEDIAN_WINDOW);
    let mut csv = String::from("episode,reward,steps,terminal,rolling_median\n");
    for (i, ((r, s, term), m)) in rows.iter().zip(&median).enumerate() {
        csv.push_str(&format!("{i},{r},{s},{term},{m}\n"));
    }
    write(&csv_path, &csv)?;
    write(
        &out.join("training_curve.svg"),
        &svg::training_curve(&rewards, &median, MEDIAN_WINDOW),
    )?;
    write_manifest(
        &out,
        "train",
        &run,
        run.seed,
        &["config.toml", "checkpoint.json", "rewards.csv", "training_curve.svg"],
    )?;
    println!(
        "trained {} steps over {} updates, {} episodes; artifacts in {}",
        trainer.steps,
        trainer.updates,
        rows.len(),
        out.display()
    );
    Ok(())
}

fn parse_rewards_csv(text: &str) -> Result<Vec<(f64, usize, String)>> {
    text.lines()
        .enumerate()
        .skip(1)
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            let f: Vec<&str> = l.split(',').collect();
            if f.len() != 5 {
                bail!("rewards.csv line {}: expected 5 fields", i + 1);
            }
            Ok((
                f[1].parse().with_context(|| format!("rewards.csv line {}", i + 1))?,
                f[2].parse().with_context(|| format!("rewards.csv line {}", i + 1))?,
                f[3].to_string(),
            ))
        })
        .collect()
}

pub fn compare(ckpt_path: &Path, episodes: usize, seed: u64, out: &Path, config: Option<&Path>) -> Result<()> {
    if episodes == 0 {
        return Err(UsageError("--episodes must be at least 1".into()).into());
    }
    let ckpt = load_checkpoint(ckpt_path)?;
    let run = eval_config(Some(&ckpt), config)?;
    let params = ckpt.params()?;
    let episode = run.evaluation_episode();
    if params.policy.input_len() != episode.observation_len() {
        bail!("checkpoint does not match the episode settings' observation size");
    }
    let report = campaign::compare(
        &params,
        &episode,
        &run.weights,
        &run.safety,
        &run.search,
        episodes,
        seed,
    )?;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    write(&out.join("episodes.csv"), &report.episodes_csv())?;
    write(&out.join("summary.csv"), &report.table.to_csv())?;
    let mut md = report.table.to_markdown();
    md.push('\n');
    for kind in [PlannerKind::Rl, PlannerKind::Exhaustive] {
        let eps = report.episodes(kind);
        md.push_str(&format!(
            "{}: {} success, {} collision, {} no_path, {} safety stops\n",
            kind.as_str(),
            report.count(kind, rltraj::env::TerminalKind::Success),
            report.count(kind, rltraj::env::TerminalKind::Collision),
            report.count(kind, rltraj::env::TerminalKind::NoPath),
            eps.iter().map(|e| e.safety_stops).sum::<usize>(),
        ));
    }
    write(&out.join("summary.md"), &md)?;
    write_manifest(out, "compare", &run, seed, &["episodes.csv", "summary.csv", "summary.md"])?;
    print!("{md}");
    Ok(())
}

pub fn bench(ckpt_path: &Path, queries: usize, seed: u64, config: Option<&Path>, out: Option<&Path>) -> Result<()> {
    if queries == 0 {
        return Err(UsageError("--queries must be at least 1".into()).into());
    }
    let ckpt = load_checkpoint(ckpt_path)?;
    let run = eval_config(Some(&ckpt), config)?;
    let params = ckpt.params()?;
    let episode = run.evaluation_episode();
    if params.policy.input_len() != episode.observation_len() {
        bail!("checkpoint does not match the episode settings' observation size");
    }
    let scenes = campaign::bench_scenes(&episode, queries, seed);
    let report = campaign::bench(&params, &episode, &run.weights, &run.safety, &run.search, &scenes);
    let csv = report.to_csv();
    if let Some(dir) = out {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        write(&dir.join("latency.csv"), &csv)?;
        write(&dir.join("latency.json"), &serde_json::to_string_pretty(&report)?)?;
        write_manifest(dir, "bench", &run, seed, &["latency.csv", "latency.json"])?;
    }
    print!("{csv}");
    Ok(())
}

/// One executed point of an episode in absolute layer coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathPoint {
    pub layer: usize,
    pub n: f64,
    pub v: f64,
}

/// The start state followed by every executed point.
pub fn executed_path(trace: &EpisodeTrace) -> Result<Vec<PathPoint>> {
    let first: Scene = trace.initial_scene()?;
    let mut pts = vec![PathPoint {
        layer: 0,
        n: first.n0,
        v: first.v0,
    }];
    let mut before = 0;
    for step in &trace.steps {
        let advanced = step.progress - before;
        for (j, p) in step.planned.points.iter().take(advanced).enumerate() {
            pts.push(PathPoint {
                layer: before + j + 1,
                n: p.n,
                v: p.v,
            });
        }
        before = step.progress;
    }
    Ok(pts)
}

pub fn plot(trace_path: &Path, out: &Path) -> Result<()> {
    let text = fs::read_to_string(trace_path).with_context(|| format!("reading {}", trace_path.display()))?;
    let trace = EpisodeTrace::from_json(&text).with_context(|| format!("parsing {}", trace_path.display()))?;
    let path = executed_path(&trace)?;
    let grid = svg::RoadGrid::from_trace(&trace)?;

    let knots: Vec<(f64, f64)> = path.iter().map(|p| (p.layer as f64, p.n)).collect();
    let spline_samples = if knots.len() >= 2 {
        fit_trajectory_spline(&knots)?.sample(SPLINE_SAMPLES)
    } else {
        Vec::new()
    };

    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let mut csv = String::from("layer,n,v\n");
    for p in &path {
        csv.push_str(&format!("{},{},{}\n", p.layer, p.n, p.v));
    }
    write(&out.join("path.csv"), &csv)?;
    let mut csv = String::from("layer,n\n");
    for (x, y) in &spline_samples {
        csv.push_str(&format!("{x},{y}\n"));
    }
    write(&out.join("spline.csv"), &csv)?;
    let mut csv = String::from("layer,v\n");
    for p in &path {
        csv.push_str(&format!("{},{}\n", p.layer, p.v));
    }
    write(&out.join("velocity.csv"), &csv)?;
    write(&out.join("path.svg"), &svg::path_plot(&grid, &path, &spline_samples))?;
    write(&out.join("velocity.svg"), &svg::velocity_plot(&path))?;
    println!(
        "{} points over {} layers; wrote path.svg, velocity.svg and CSV series to {}",
        path.len(),
        grid.layers(),
        out.display()
    );
    Ok(())
}

pub fn replay(
    scene_path: &Path,
    planner: PlannerKind,
    ckpt_path: Option<&Path>,
    config: Option<&Path>,
    seed: u64,
    out: &Path,
) -> Result<()> {
    let ckpt = match (planner, ckpt_path) {
        (PlannerKind::Rl, None) => {
            return Err(UsageError("the rl planner needs --ckpt".into()).into());
        }
        (_, Some(p)) => Some(load_checkpoint(p)?),
        (_, None) => None,
    };
    let text = fs::read_to_string(scene_path).with_context(|| format!("reading {}", scene_path.display()))?;
    let scene: Scene = text
        .parse()
        .with_context(|| format!("parsing scene {}", scene_path.display()))?;
    let run = eval_config(ckpt.as_ref(), config)?;
    let mut episode = run.evaluation_episode();
    let driver = match &ckpt {
        Some(c) if planner == PlannerKind::Rl => Driver::Rl(c.params()?),
        _ => {
            // The search adapts to the snapshot's shape.
            episode.lanes = scene.lanes();
            episode.sensor_depth = scene.depth();
            episode.plan_horizon = episode.plan_horizon.min(scene.depth());
            episode.move_layers = episode.move_layers.min(episode.plan_horizon);
            Driver::Exhaustive(run.search.clone())
        }
    };
    let trace = run_episode(&driver, &episode, &run.weights, &run.safety, seed, Some(scene))?;
    write(out, &trace.to_json())?;
    println!(
        "{} steps, terminal {}, return {:.4}; trace written to {}",
        trace.steps.len(),
        trace.terminal.as_str(),
        trace.total_reward,
        out.display()
    );
    Ok(())
}
