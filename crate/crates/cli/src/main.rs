//! `ovmm`: run evaluation suites, replay traces, and diff reports for the
//! grid-world rearrangement benchmark.

use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use ovmm_core::render::{render_ascii, render_pgm, MapChannel, RenderMarks};
use ovmm_core::trace::{read_trace, write_trace, TraceHeader, TraceRecord};
use ovmm_core::{
    generate_scene, run_episode_on, run_suite, AgentConfig, ClassRegistry, EpisodeRun,
    RunConfig, StepView,
};

#[derive(Parser)]
#[command(name = "ovmm", about = "Grid-world rearrangement benchmark runner", version)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run an evaluation suite and write reports into --out.
    Run(RunArgs),
    /// Re-execute a trace from its embedded configuration and show the result.
    Replay(ReplayArgs),
    /// Diff two suite reports variant by variant.
    Compare(CompareArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Seed range `A..B` (inclusive on both ends) or a single seed `N`.
    #[arg(long)]
    seeds: String,
    /// Flat key = value configuration file; defaults apply when omitted.
    #[arg(long)]
    scene_config: Option<PathBuf>,
    /// baseline (all improvements off), uniteam (all on), or custom
    /// (baseline plus --ablate overrides).
    #[arg(long, default_value = "uniteam")]
    agent: String,
    /// Override one improvement flag, e.g. --ablate oscillation_guard=off.
    /// Repeatable; applies on top of the chosen agent.
    #[arg(long = "ablate")]
    ablate: Vec<String>,
    /// Step budget per episode; overrides the config file.
    #[arg(long)]
    budget: Option<u32>,
    /// Output directory for report.csv, report.txt, and episodes.csv.
    #[arg(long)]
    out: PathBuf,
    /// Also write the final belief map per episode (text and PGM).
    #[arg(long)]
    dump_maps: bool,
    /// Also write a per-step JSON-lines trace per episode.
    #[arg(long)]
    trace: bool,
}

#[derive(Args)]
struct ReplayArgs {
    /// Trace file written by `ovmm run --trace`.
    #[arg(long)]
    trace: PathBuf,
    /// Output format; only `ascii` is supported.
    #[arg(long, default_value = "ascii")]
    render: String,
}

#[derive(Args)]
struct CompareArgs {
    /// Two report.csv files to diff.
    #[arg(long, num_args = 2)]
    reports: Vec<PathBuf>,
}

/// Errors that mean the invocation itself was wrong; they exit with 2.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
struct ConfigProblem(String);

fn config_err(msg: impl Into<String>) -> anyhow::Error {
    anyhow::Error::new(ConfigProblem(msg.into()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.cmd {
        Cmd::Run(args) => cmd_run(args),
        Cmd::Replay(args) => cmd_replay(args),
        Cmd::Compare(args) => cmd_compare(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.chain().any(|c| c.is::<ConfigProblem>()) {
                ExitCode::from(2)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}

/// `A..B` inclusive, or a single seed.
fn parse_seeds(text: &str) -> Result<Vec<u64>> {
    let parse_one = |s: &str| -> Result<u64> {
        s.trim()
            .parse()
            .map_err(|_| config_err(format!("bad seed `{s}` in `{text}`")))
    };
    if let Some((a, b)) = text.split_once("..") {
        let (a, b) = (parse_one(a)?, parse_one(b)?);
        if b < a {
            return Err(config_err(format!("empty seed range `{text}`")));
        }
        Ok((a..=b).collect())
    } else {
        Ok(vec![parse_one(text)?])
    }
}

/// Agent choice plus ablation overrides, named for the report.
fn build_variant(args: &RunArgs, run: &RunConfig) -> Result<(String, AgentConfig)> {
    let mut cfg = match args.agent.as_str() {
        "uniteam" => AgentConfig::uniteam(),
        "baseline" | "custom" => AgentConfig::baseline(),
        other => {
            return Err(config_err(format!(
                "unknown agent `{other}`; expected baseline, uniteam, or custom"
            )))
        }
    };
    cfg.thresholds = run.thresholds;
    let mut name = args.agent.clone();
    for spec in &args.ablate {
        let Some((flag, value)) = spec.split_once('=') else {
            return Err(config_err(format!("bad --ablate `{spec}`; expected FLAG=on|off")));
        };
        let on = match value {
            "on" => true,
            "off" => false,
            other => {
                return Err(config_err(format!(
                    "bad --ablate value `{other}` for `{flag}`; expected on or off"
                )))
            }
        };
        cfg.flags
            .set(flag, on)
            .map_err(|e| config_err(e.to_string()))?;
        name.push(if on { '+' } else { '-' });
        name.push_str(flag);
    }
    Ok((name, cfg))
}

fn load_run_config(path: Option<&Path>, budget: Option<u32>) -> Result<RunConfig> {
    let mut run = match path {
        Some(p) => {
            let text = fs::read_to_string(p)
                .with_context(|| format!("reading {}", p.display()))
                .map_err(|e| config_err(format!("{e:#}")))?;
            RunConfig::parse(&text).map_err(|e| config_err(e.to_string()))?
        }
        None => RunConfig::default(),
    };
    if let Some(b) = budget {
        run.budget = b;
    }
    Ok(run)
}

fn cmd_run(args: RunArgs) -> Result<()> {
    let registry = ClassRegistry::default();
    let run = load_run_config(args.scene_config.as_deref(), args.budget)?;
    let seeds = parse_seeds(&args.seeds)?;
    let variant = build_variant(&args, &run)?;

    let report = run_suite(&seeds, &run, &registry, std::slice::from_ref(&variant))?;
    fs::create_dir_all(&args.out)
        .with_context(|| format!("creating {}", args.out.display()))?;
    fs::write(args.out.join("report.csv"), report.to_csv())?;
    fs::write(args.out.join("report.txt"), report.to_text())?;
    fs::write(args.out.join("episodes.csv"), report.episodes_csv())?;

    if args.trace || args.dump_maps {
        let (name, cfg) = &variant;
        for &seed in &seeds {
            let scene = generate_scene(seed, &run.scene, &registry)?;
            let mut records: Vec<TraceRecord> = Vec::new();
            let episode = run_episode_on(
                scene,
                &registry,
                *cfg,
                &run.noise,
                run.budget,
                seed,
                |view: StepView<'_>| {
                    if args.trace {
                        records.push(TraceRecord {
                            step: view.step,
                            phase: view.status.phase.name().to_string(),
                            action: view.action,
                            event: view.event,
                            pose: view.robot.pose,
                            goal: view.status.selected.map(|s| s.cell),
                        });
                    }
                },
            );
            if args.trace {
                let header = TraceHeader {
                    seed,
                    scene: run.scene.clone(),
                    agent: *cfg,
                    noise: run.noise,
                    budget: run.budget,
                    fingerprint: report.fingerprint.clone(),
                };
                let path = args.out.join(format!("trace-{name}-{seed}.jsonl"));
                let file = fs::File::create(&path)
                    .with_context(|| format!("creating {}", path.display()))?;
                write_trace(std::io::BufWriter::new(file), &header, &records)?;
            }
            if args.dump_maps {
                dump_maps(&args.out, name, seed, &episode, &registry)?;
            }
        }
    }

    print!("{}", report.to_text());
    Ok(())
}

fn dump_maps(
    out: &Path,
    variant: &str,
    seed: u64,
    episode: &EpisodeRun,
    registry: &ClassRegistry,
) -> Result<()> {
    let map = episode.agent.map();
    let marks = RenderMarks {
        robot: Some(episode.robot.pose.cell),
        goal: Some(episode.scene.goal),
        ..RenderMarks::default()
    };
    fs::write(out.join(format!("map-{variant}-{seed}.txt")), render_ascii(map, &marks))?;
    let stem = |channel: &str| out.join(format!("map-{variant}-{seed}-{channel}.pgm"));
    fs::write(stem("explored"), render_pgm(map, MapChannel::Explored))?;
    fs::write(stem("obstacle"), render_pgm(map, MapChannel::Obstacle))?;
    let goal = episode.scene.goal;
    for class in [
        goal.object_class,
        goal.start_receptacle_class,
        goal.end_receptacle_class,
    ] {
        fs::write(
            stem(&format!("prob-{}", registry.name(class))),
            render_pgm(map, MapChannel::ClassProb(class)),
        )?;
    }
    Ok(())
}

fn cmd_replay(args: ReplayArgs) -> Result<()> {
    if args.render != "ascii" {
        return Err(config_err(format!(
            "unsupported render format `{}`; expected ascii",
            args.render
        )));
    }
    let registry = ClassRegistry::default();
    let file = fs::File::open(&args.trace)
        .with_context(|| format!("opening {}", args.trace.display()))
        .map_err(|e| config_err(format!("{e:#}")))?;
    let (header, stored) = read_trace(BufReader::new(file))?;

    let scene = generate_scene(header.seed, &header.scene, &registry)?;
    let mut replayed: Vec<TraceRecord> = Vec::new();
    let episode = run_episode_on(
        scene,
        &registry,
        header.agent,
        &header.noise,
        header.budget,
        header.seed,
        |view: StepView<'_>| {
            replayed.push(TraceRecord {
                step: view.step,
                phase: view.status.phase.name().to_string(),
                action: view.action,
                event: view.event,
                pose: view.robot.pose,
                goal: view.status.selected.map(|s| s.cell),
            });
        },
    );

    let divergence = stored
        .iter()
        .zip(&replayed)
        .position(|(a, b)| a != b)
        .or_else(|| (stored.len() != replayed.len()).then(|| stored.len().min(replayed.len())));
    let marks = RenderMarks {
        robot: Some(episode.robot.pose.cell),
        goal: Some(episode.scene.goal),
        ..RenderMarks::default()
    };
    print!("{}", render_ascii(episode.agent.map(), &marks));
    let r = &episode.outcome.result;
    println!(
        "seed {}  steps {}  termination {}  overall {}  partial {:.2}",
        header.seed, r.steps, r.termination, r.overall_success, r.partial_success
    );
    match divergence {
        None => {
            println!("trace verified: {} steps match", stored.len());
            Ok(())
        }
        Some(at) => Err(anyhow::anyhow!(
            "replay diverged from the stored trace at step {at}"
        )),
    }
}

/// Rows of a report.csv, keyed by variant.
fn read_report(path: &Path) -> Result<Vec<(String, Vec<f64>)>> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))
        .map_err(|e| config_err(format!("{e:#}")))?;
    let mut rows = Vec::new();
    for line in text.lines() {
        if line.starts_with('#') || line.starts_with("variant,") || line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split(',');
        let name = fields
            .next()
            .ok_or_else(|| config_err(format!("bad report row `{line}`")))?
            .to_string();
        let nums: Vec<f64> = fields
            .map(|f| {
                f.parse()
                    .map_err(|_| config_err(format!("bad number `{f}` in `{line}`")))
            })
            .collect::<Result<_>>()?;
        if nums.len() != 4 {
            return Err(config_err(format!("bad report row `{line}`")));
        }
        rows.push((name, nums));
    }
    Ok(rows)
}

fn cmd_compare(args: CompareArgs) -> Result<()> {
    let [a, b] = args.reports.as_slice() else {
        return Err(config_err("--reports takes exactly two files".to_string()));
    };
    let left = read_report(a)?;
    let right = read_report(b)?;
    println!(
        "{:<24}  {:>9}  {:>9}  {:>11}",
        "variant", "Δoverall%", "Δpartial%", "Δmean steps"
    );
    for (name, l) in &left {
        match right.iter().find(|(n, _)| n == name) {
            Some((_, r)) => println!(
                "{:<24}  {:>9.2}  {:>9.2}  {:>11.2}",
                name,
                r[1] - l[1],
                r[2] - l[2],
                r[3] - l[3]
            ),
            None => println!("{name:<24}  only in {}", a.display()),
        }
    }
    for (name, _) in &right {
        if !left.iter().any(|(n, _)| n == name) {
            println!("{name:<24}  only in {}", b.display());
        }
    }
    Ok(())
}
