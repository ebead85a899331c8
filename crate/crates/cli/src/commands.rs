//! Subcommand implementations. Every run writes into a fresh directory named
//! by timestamp and seed, containing a config snapshot and run metadata.

use std::cell::RefCell;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde_json::json;

use rcnav_core::env::CrowdNavEnv;
use rcnav_core::metrics::{default_ego_radius, evaluate_suite, write_csv, SuiteConfig};
use rcnav_core::policy::{ActorPolicy, NavPolicy, ScriptedAvoidPolicy};
use rcnav_core::td3::{load_actor, train_with, NavEnvAdapter};
use rcnav_core::trajlog::{read_episode, write_episode};
use rcnav_core::world::Behavior;

use crate::config::{parse_config, Mode, RunConfig};
use crate::svg::{render_svg, ReplayWorld};
use crate::{Cmd, EvalArgs, ReplayArgs, TrainArgs};

pub(crate) fn execute(cmd: Cmd, out: &mut dyn Write) -> Result<()> {
    match cmd {
        Cmd::Scenarios => scenarios(out),
        Cmd::Train(args) => train(args, out),
        Cmd::Eval(args) => eval(args, out),
        Cmd::Replay(args) => replay(args, out),
    }
}

fn scenarios(out: &mut dyn Write) -> Result<()> {
    let describe = |b: Behavior| match b {
        Behavior::Crossing => "crowd crosses the robot's route perpendicular to it",
        Behavior::Towards => "crowd moves toward the robot's start region",
        Behavior::Ahead => "crowd moves ahead of the robot along its route",
        Behavior::Random => "crowd moves in uniformly random directions",
        Behavior::TrainingRandom => "random directions and speeds in (0, 0.2] m/s (training)",
    };
    for b in Behavior::ALL {
        writeln!(out, "{:<16} {}", b.name(), describe(b))?;
    }
    Ok(())
}

/// Load the config file (or defaults), remembering whether it pinned a seed.
fn load_config(path: Option<&Path>, mode: Mode) -> Result<(RunConfig, bool)> {
    let text = match path {
        Some(p) => {
            fs::read_to_string(p).with_context(|| format!("reading config {}", p.display()))?
        }
        None => String::new(),
    };
    let cfg = parse_config(&text, mode)?;
    Ok((cfg, config_sets_seed(&text)))
}

/// Whether the config text assigns the top-level seed key.
fn config_sets_seed(text: &str) -> bool {
    for raw in text.lines() {
        let line = match raw.find('#') {
            Some(p) => &raw[..p],
            None => raw,
        }
        .trim();
        if line.starts_with('[') {
            return false; // top-level region ended
        }
        if let Some((key, _)) = line.split_once('=') {
            if key.trim() == "seed" {
                return true;
            }
        }
    }
    false
}

fn resolve_seed(cfg: &mut RunConfig, flag: Option<u64>, set_in_file: bool) {
    let seed = if let Some(s) = flag {
        Some(s)
    } else if set_in_file {
        None // keep the file's value
    } else {
        std::env::var("RCNAV_SEED").ok().and_then(|v| v.parse().ok())
    };
    if let Some(s) = seed {
        cfg.seed = s;
        cfg.td3.seed = s;
    }
}

fn apply_scenario_overrides(
    cfg: &mut RunConfig,
    k: Option<usize>,
    alpha: Option<f64>,
    obstacles: Option<usize>,
    speed: Option<f64>,
) -> Result<()> {
    if let Some(k) = k {
        cfg.env.risk.k = k;
    }
    if let Some(a) = alpha {
        if !(0.0..=1.0).contains(&a) {
            bail!("--alpha must be in [0, 1], got {a}");
        }
        cfg.env.risk.alpha = a;
    }
    if let Some(n) = obstacles {
        cfg.obstacle_count = n;
    }
    if let Some(s) = speed {
        if !(s.is_finite() && s >= 0.0) {
            bail!("--speed must be >= 0, got {s}");
        }
        cfg.obstacle_speed = s;
    }
    Ok(())
}

/// `<root>/<epoch-seconds>-seed<seed>[-<n>]`, created fresh.
fn create_run_dir(root: &Path, seed: u64) -> Result<PathBuf> {
    let stamp = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    for attempt in 0..1000u32 {
        let name = if attempt == 0 {
            format!("{stamp}-seed{seed}")
        } else {
            format!("{stamp}-seed{seed}-{attempt}")
        };
        let dir = root.join(name);
        match fs::create_dir_all(root).and_then(|_| fs::create_dir(&dir)) {
            Ok(()) => return Ok(dir),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => continue,
            Err(e) => {
                return Err(e).with_context(|| format!("creating run directory in {}", root.display()))
            }
        }
    }
    bail!("could not create a unique run directory under {}", root.display());
}

fn write_run_metadata(dir: &Path, cfg: &RunConfig, command: &str) -> Result<()> {
    fs::write(dir.join("run_config.txt"), cfg.to_text())?;
    let info = json!({
        "command": command,
        "seed": cfg.seed,
        "build": env!("RCNAV_BUILD"),
    });
    fs::write(dir.join("run_info.json"), format!("{}\n", serde_json::to_string_pretty(&info)?))?;
    Ok(())
}

fn train(args: TrainArgs, out: &mut dyn Write) -> Result<()> {
    let (mut cfg, seed_in_file) = load_config(args.config.as_deref(), Mode::Train)?;
    resolve_seed(&mut cfg, args.seed, seed_in_file);
    apply_scenario_overrides(&mut cfg, args.k, args.alpha, args.obstacles, args.speed)?;
    if let Some(e) = args.episodes {
        cfg.td3.episodes = e;
    }
    if let Some(c) = args.checkpoint_every {
        cfg.checkpoint_every = c;
    }
    if let Some(o) = args.out {
        cfg.out_dir = o;
    }

    let run_dir = create_run_dir(&cfg.out_dir, cfg.seed)?;
    write_run_metadata(&run_dir, &cfg, "train")?;
    let ckpt_dir = run_dir.join("checkpoints");
    fs::create_dir(&ckpt_dir)?;

    let scenario = cfg.scenario_spec();
    scenario.validate()?;
    let env = CrowdNavEnv::new(scenario, cfg.env.clone())?;
    let mut adapter = NavEnvAdapter::new(env);

    let log_file = RefCell::new(BufWriter::new(File::create(run_dir.join("train_log.jsonl"))?));
    let hook_err: RefCell<Option<anyhow::Error>> = RefCell::new(None);
    let checkpoint_every = cfg.checkpoint_every;

    writeln!(out, "training: {} episodes, seed {}, K = {}", cfg.td3.episodes, cfg.seed, cfg.env.risk.k)?;
    let result = train_with(&mut adapter, &cfg.td3, |summary, agent| {
        if hook_err.borrow().is_some() {
            return;
        }
        let record = json!({
            "episode": summary.episode,
            "steps": summary.steps,
            "reward": summary.reward_total,
            "outcome": summary.outcome,
            "env_steps_total": summary.env_steps_total,
        });
        let attempt = || -> Result<()> {
            writeln!(log_file.borrow_mut(), "{record}")?;
            if checkpoint_every > 0 && (summary.episode + 1) % checkpoint_every == 0 {
                let path = ckpt_dir.join(format!("ep{:05}.bin", summary.episode + 1));
                agent.save_checkpoint(&path)?;
            }
            Ok(())
        };
        if let Err(e) = attempt() {
            *hook_err.borrow_mut() = Some(e);
        }
    })?;
    log_file.into_inner().flush()?;
    if let Some(e) = hook_err.into_inner() {
        return Err(e.context("writing training outputs"));
    }

    let final_path = run_dir.join("checkpoint_final.bin");
    result.agent.save_checkpoint(&final_path)?;
    let goals = result.episodes.iter().filter(|e| e.outcome == "goal").count();
    writeln!(
        out,
        "done: {} episodes ({} reached the goal), checkpoint at {}",
        result.episodes.len(),
        goals,
        final_path.display()
    )?;
    writeln!(out, "run directory: {}", run_dir.display())?;
    Ok(())
}

fn parse_behaviors(arg: Option<&str>) -> Result<Vec<Behavior>> {
    match arg {
        None => Ok(Behavior::TEST_SUITE.to_vec()),
        Some(list) => list
            .split(',')
            .map(|p| p.trim().parse::<Behavior>().map_err(anyhow::Error::msg))
            .collect(),
    }
}

fn eval(args: EvalArgs, out: &mut dyn Write) -> Result<()> {
    let (mut cfg, seed_in_file) = load_config(args.config.as_deref(), Mode::Eval)?;
    resolve_seed(&mut cfg, args.seed, seed_in_file);
    apply_scenario_overrides(&mut cfg, args.k, args.alpha, args.obstacles, args.speed)?;
    if let Some(r) = args.runs {
        cfg.runs_per_behavior = r;
    }
    if let Some(o) = args.out {
        cfg.out_dir = o;
    }
    if args.tracked_n {
        cfg.tracked_n_scores = true;
    }
    if args.log_tracks {
        cfg.log_tracks = true;
    }

    let mut policy: Box<dyn NavPolicy> = match args.policy.as_str() {
        "scripted" => Box::new(ScriptedAvoidPolicy::default()),
        _ => {
            let path = args.checkpoint.as_deref().expect("clap enforces --checkpoint");
            let actor = load_actor(path)
                .with_context(|| format!("loading checkpoint {}", path.display()))?;
            Box::new(ActorPolicy::new(actor))
        }
    };

    let behaviors = parse_behaviors(args.behaviors.as_deref())?;
    let scenarios: Vec<_> = behaviors.iter().map(|&b| cfg.scenario_for(b)).collect();
    for s in &scenarios {
        s.validate()?;
    }
    let suite = SuiteConfig {
        runs_per_behavior: cfg.runs_per_behavior,
        suite_seed: cfg.seed,
        env: cfg.env.clone(),
        ego_radius: default_ego_radius(),
        log_tracks: cfg.log_tracks,
    };

    let run_dir = create_run_dir(&cfg.out_dir, cfg.seed)?;
    write_run_metadata(&run_dir, &cfg, "eval")?;

    let result = evaluate_suite(policy.as_mut(), &scenarios, &suite)?;

    let episodes_dir = run_dir.join("episodes");
    fs::create_dir(&episodes_dir)?;
    for (behavior, logs) in behaviors.iter().zip(&result.episodes) {
        for (run, log) in logs.iter().enumerate() {
            let path = episodes_dir.join(format!("{}-run{run:02}.jsonl", behavior.name()));
            write_episode(&path, &log.meta, &log.steps)?;
        }
    }
    let mut csv = Vec::new();
    write_csv(&result.reports, cfg.tracked_n_scores, &mut csv)?;
    fs::write(run_dir.join("report.csv"), &csv)?;

    writeln!(
        out,
        "{:<12} {:>4} {:>8} {:>10} {:>7} {:>7} {:>8}",
        "behavior", "obs", "success", "arrival_s", "ego", "social", "overall"
    )?;
    for r in &result.reports {
        let arrival = r.mean_arrival_time.map_or("-".to_string(), |t| format!("{t:.2}"));
        writeln!(
            out,
            "{:<12} {:>4} {:>7.1}% {:>10} {:>7.2} {:>7.2} {:>8.2}",
            r.behavior, r.obstacles, r.success_rate, arrival, r.ego_score, r.social_score,
            r.overall
        )?;
    }
    writeln!(out, "run directory: {}", run_dir.display())?;
    Ok(())
}

fn replay(args: ReplayArgs, out: &mut dyn Write) -> Result<()> {
    let (meta, steps) =
        read_episode(&args.log).with_context(|| format!("reading {}", args.log.display()))?;
    if steps.is_empty() {
        bail!("{} contains no step records", args.log.display());
    }
    let mut world = match &meta {
        Some(m) => ReplayWorld::from_meta(m),
        None => ReplayWorld::from_steps(&steps),
    };
    if let Some(h) = args.half_extent {
        if h <= 0.0 {
            bail!("--half-extent must be positive");
        }
        world.half_extent = h;
    }
    let svg = render_svg(&world, &steps)?;
    fs::write(&args.out, svg).with_context(|| format!("writing {}", args.out.display()))?;
    writeln!(out, "wrote {}", args.out.display())?;
    Ok(())
}
