//! Command-line harness: corpus generation, episode runs, benchmarks,
//! parameter sweeps, metric recomputation, and occupancy-map dumps.
//!
//! Exit codes: 0 success, 1 usage error, 2 data/invariant error,
//! 3 scorer-endpoint failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use eqa_core::error::Error;
use eqa_core::explorer::{run_episode, EpisodeLog, ExplorerConfig};
use eqa_core::gen::{doc_to_ron, generate_doc, GenConfig};
use eqa_core::harness::{
    aggregate, format_bench, format_report, format_sweep, load_corpus, run_bench, run_sweep,
    RunConfig,
};
use eqa_core::occupancy::OccupancyVolume;
use eqa_core::relevance::ScorerBinding;
use eqa_core::scene::{load_scene, AgentState};

#[derive(Parser)]
#[command(name = "eqa", about = "Embodied question answering on grid worlds")]
struct Cli {
    /// JSON run configuration (explorer + scorer + generator settings).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a scene corpus.
    Gen(GenArgs),
    /// Run one episode and write its log.
    Run(RunArgs),
    /// Run the corpus repeatedly and report aggregate metrics with spread.
    Bench(BenchArgs),
    /// Sweep one parameter across values over the corpus.
    Sweep(SweepArgs),
    /// Recompute metrics from saved episode logs.
    Metrics(MetricsArgs),
    /// Print the explored occupancy slice for an episode prefix.
    DumpMap(DumpMapArgs),
}

#[derive(Args)]
struct GenArgs {
    /// Output directory for .ron scene files.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 4)]
    count: usize,
}

#[derive(Args)]
struct RunArgs {
    /// Scene file (.ron).
    #[arg(long)]
    scene: PathBuf,
    /// Question id within the scene.
    #[arg(long)]
    question: String,
    /// Where to write the episode log (JSON); stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    /// Directory of .ron scenes.
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long, default_value_t = 3)]
    trials: usize,
    /// Optional JSON output path for the summary.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    corpus: PathBuf,
    /// Parameter name (lambda, k, w_size, w_dist, stop_threshold, eps,
    /// min_pts, delta, gamma_n, fbe_only, eq1_literal, raw_cosine, cot).
    #[arg(long)]
    parameter: String,
    /// Comma-separated values.
    #[arg(long, value_delimiter = ',', required = true)]
    values: Vec<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct MetricsArgs {
    /// Episode log files (JSON).
    #[arg(required = true)]
    logs: Vec<PathBuf>,
}

#[derive(Args)]
struct DumpMapArgs {
    #[arg(long)]
    scene: PathBuf,
    #[arg(long)]
    question: String,
    /// Stop after this many steps (full episode when omitted).
    #[arg(long)]
    steps: Option<u32>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help/version requests are successes; anything else is usage.
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let run_config = match &cli.config {
        Some(path) => match RunConfig::from_file(path) {
            Ok(c) => c,
            Err(e) => return fail(e),
        },
        None => RunConfig::default(),
    };
    match dispatch(cli.command, run_config) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(e),
    }
}

fn fail(e: Error) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(e.exit_code() as u8)
}

fn dispatch(command: Command, config: RunConfig) -> eqa_core::Result<()> {
    match command {
        Command::Gen(args) => cmd_gen(args, &config.gen),
        Command::Run(args) => cmd_run(args, &config.explorer, &config.scorer),
        Command::Bench(args) => cmd_bench(args, &config.explorer, &config.scorer),
        Command::Sweep(args) => cmd_sweep(args, &config.explorer, &config.scorer),
        Command::Metrics(args) => cmd_metrics(args),
        Command::DumpMap(args) => cmd_dump_map(args, &config.explorer, &config.scorer),
    }
}

fn cmd_gen(args: GenArgs, gen: &GenConfig) -> eqa_core::Result<()> {
    std::fs::create_dir_all(&args.out)?;
    for i in 0..args.count {
        let seed = args.seed + i as u64;
        let doc = generate_doc(seed, gen)?;
        let path = args.out.join(format!("scene_{seed:04}.ron"));
        std::fs::write(&path, doc_to_ron(&doc)?)?;
        println!("{}", path.display());
    }
    Ok(())
}

fn load_scene_file(path: &PathBuf) -> eqa_core::Result<eqa_core::scene::Scene> {
    let text = std::fs::read_to_string(path)?;
    load_scene(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

fn scene_stem(path: &PathBuf) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

fn cmd_run(args: RunArgs, explorer: &ExplorerConfig, scorer: &ScorerBinding) -> eqa_core::Result<()> {
    let scene = load_scene_file(&args.scene)?;
    let log = run_episode(&scene, &scene_stem(&args.scene), &args.question, explorer, scorer)?;
    let json = log.to_json();
    match args.out {
        Some(path) => std::fs::write(path, json)?,
        None => println!("{json}"),
    }
    eprintln!(
        "answer={} correct={} steps={} stop={:?}",
        log.answer, log.correct, log.steps_taken, log.stop_reason
    );
    Ok(())
}

fn cmd_bench(
    args: BenchArgs,
    explorer: &ExplorerConfig,
    scorer: &ScorerBinding,
) -> eqa_core::Result<()> {
    let corpus = load_corpus(&args.corpus)?;
    let summary = run_bench(&corpus, explorer, scorer, args.trials)?;
    print!("{}", format_bench(&summary));
    if let Some(path) = args.out {
        std::fs::write(
            path,
            serde_json::to_string_pretty(&summary)
                .map_err(|e| Error::Parse(e.to_string()))?,
        )?;
    }
    Ok(())
}

fn cmd_sweep(
    args: SweepArgs,
    explorer: &ExplorerConfig,
    scorer: &ScorerBinding,
) -> eqa_core::Result<()> {
    let corpus = load_corpus(&args.corpus)?;
    let rows = run_sweep(&corpus, explorer, scorer, &args.parameter, &args.values)?;
    print!("{}", format_sweep(&rows));
    if let Some(path) = args.out {
        std::fs::write(
            path,
            serde_json::to_string_pretty(&rows).map_err(|e| Error::Parse(e.to_string()))?,
        )?;
    }
    Ok(())
}

fn cmd_metrics(args: MetricsArgs) -> eqa_core::Result<()> {
    let logs = args
        .logs
        .iter()
        .map(|path| {
            let text = std::fs::read_to_string(path)?;
            EpisodeLog::from_json(&text)
                .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
        })
        .collect::<eqa_core::Result<Vec<_>>>()?;
    let rep = aggregate(&logs)?;
    println!("{}", format_report(&rep));
    Ok(())
}

fn cmd_dump_map(
    args: DumpMapArgs,
    explorer: &ExplorerConfig,
    scorer: &ScorerBinding,
) -> eqa_core::Result<()> {
    let scene = load_scene_file(&args.scene)?;
    let log = run_episode(&scene, &scene_stem(&args.scene), &args.question, explorer, scorer)?;
    // Replay the logged actions into a fresh volume up to the step cut-off.
    let mut volume = OccupancyVolume::for_scene(&scene, explorer.subdivision);
    let mut state = AgentState::at_start(&scene);
    let limit = args.steps.unwrap_or(u32::MAX);
    for step in &log.steps {
        if step.step > limit {
            break;
        }
        state = eqa_core::scene::apply_action(
            &scene,
            &state,
            step.action,
            explorer.translation_cap_m,
        )?;
        let obs = eqa_core::scene::render_observation(
            &scene,
            &state,
            step.observation_id,
            explorer.fov,
            explorer.max_range_m,
            explorer.rays,
        );
        volume.fuse_scan(&obs);
    }
    print!("{}", volume.slice().graymap());
    Ok(())
}
