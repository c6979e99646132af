use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use roadloc::boundary::FileSource;
use roadloc::eval::{align_to_reference, compare, emit_report, summarise, Summary, SUMMARY_FORMAT_VERSION};
use roadloc::experiment::{build_map_for, generate_passes, observe_live, ExperimentConfig, PairSeeds};
use roadloc::pipeline::{read_estimates, write_estimates};
use roadloc::{
    run_sequence, DetectionMode, Error, FrameStatus, HintProvider, MapStore, NearestPoseHints, TableHints, Trajectory,
    WorldModel,
};

const EXIT_CONFIG: u8 = 2;
const EXIT_MISSING: u8 = 3;
const EXIT_FORMAT: u8 = 4;
const EXIT_RUNTIME: u8 = 5;

#[derive(Parser)]
#[command(name = "roadloc", version, about = "Road-boundary lateral localisation experiments")]
struct Cli {
    #[command(flatten)]
    config: ConfigArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// Experiment config (JSON). Defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override a config value, e.g. `--set icp.trim_fraction=0.2`.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Validate the effective config, or print it with --dump.
    Config {
        #[arg(long)]
        dump: bool,
    },
    /// Generate a world and its map and live trajectories.
    GenWorld {
        #[arg(long)]
        out: PathBuf,
    },
    /// Observe the map pass and write a map directory.
    BuildMap {
        #[arg(long)]
        world: PathBuf,
        #[arg(long)]
        trajectory: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Localise every live frame against a map; writes JSON lines.
    Localise {
        #[arg(long)]
        map: PathBuf,
        #[arg(long)]
        live: PathBuf,
        /// World used to render live observations.
        #[arg(long, required_unless_present = "observations")]
        world: Option<PathBuf>,
        /// Stored live observations (manifest.json) instead of rendering.
        #[arg(long)]
        observations: Option<PathBuf>,
        /// Hint table CSV (`live_timestamp,map_timestamp`).
        #[arg(long)]
        hints: Option<PathBuf>,
        #[arg(long)]
        mode: DetectionMode,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Score one estimate file, or compare two (baseline first).
    Evaluate {
        #[arg(long)]
        reference: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(required = true, num_args = 1..=2)]
        estimates: Vec<PathBuf>,
    },
}

fn load_config(args: &ConfigArgs) -> roadloc::Result<ExperimentConfig> {
    let base = match &args.config {
        Some(path) => ExperimentConfig::load(path).map_err(|e| Error::Config(e.to_string()))?,
        None => ExperimentConfig::default(),
    };
    let mut cfg = base.with_overrides(&args.overrides)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.chain().find_map(|e| e.downcast_ref::<Error>()) {
        Some(Error::Config(_)) => EXIT_CONFIG,
        Some(Error::Io { source, .. }) if source.kind() == std::io::ErrorKind::NotFound => EXIT_MISSING,
        Some(Error::Format { .. }) => EXIT_FORMAT,
        _ => EXIT_RUNTIME,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = load_config(&cli.config)
        .map_err(anyhow::Error::from)
        .and_then(|cfg| run(cli.command, &cfg));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}

fn run(command: Command, cfg: &ExperimentConfig) -> anyhow::Result<()> {
    let seeds = PairSeeds::new(cfg.seed, 0);
    match command {
        Command::Config { dump } => {
            if dump {
                println!("{}", cfg.to_json());
            } else {
                println!("config ok");
            }
        }
        Command::GenWorld { out } => {
            let (world, map, live) = generate_passes(cfg, seeds)?;
            create_dir(&out)?;
            world.save(&out.join("world.json"))?;
            map.save_csv(&out.join("map_trajectory.csv"))?;
            live.save_csv(&out.join("live_trajectory.csv"))?;
            println!(
                "world: {:.1} m, {} occluders; map pass {} samples; live pass {} samples",
                world.centreline.length(),
                world.occluders.len(),
                map.len(),
                live.len()
            );
        }
        Command::BuildMap { world, trajectory, out } => {
            let world = WorldModel::load(&world)?;
            let trajectory = Trajectory::load_csv(&trajectory)?;
            let store = build_map_for(cfg, &world, &trajectory, seeds.map_detection)?;
            store.save(&out)?;
            println!("{} keyframes written to {}", store.len(), out.display());
        }
        Command::Localise { map, live, world, observations, hints, mode, out, workers } => {
            let store = MapStore::load(&map)?;
            let live_traj = Trajectory::load_csv(&live)?;
            let frames = match (&observations, &world) {
                (Some(manifest), _) => FileSource::open(manifest)?.load_all(DetectionMode::VisibleAndOccluded)?,
                (None, Some(world)) => {
                    let world = WorldModel::load(world)?;
                    observe_live(cfg, &world, &live_traj, seeds.live_detection)?
                }
                (None, None) => bail!("either --world or --observations is required"),
            };
            let provider: Box<dyn HintProvider> = match &hints {
                Some(path) => Box::new(TableHints::load_csv(path, &store)?),
                None => Box::new(NearestPoseHints::new(live_traj, &store, cfg.hint_along_track_offset_m)?),
            };
            let estimates = run_sequence(&frames, &store, provider.as_ref(), mode, &cfg.icp, workers.unwrap_or(cfg.workers));
            write_estimates(&out, &estimates)?;
            let ok = estimates.iter().filter(|e| e.status == FrameStatus::Ok).count();
            println!("{ok}/{} frames ok ({mode})", estimates.len());
        }
        Command::Evaluate { reference, out, estimates } => {
            let reference = Trajectory::load_csv(&reference)?;
            let labels = labels_for(&estimates);
            let mut modes = Vec::new();
            let mut records = Vec::new();
            for (path, label) in estimates.iter().zip(&labels) {
                let est = read_estimates(path)?;
                let alignment = align_to_reference(&est, &reference);
                modes.push(summarise(label, &alignment));
                records.push(alignment.records);
            }
            let comparison = (modes.len() == 2).then(|| compare(&modes[0], &modes[1]));
            let summary = Summary { format_version: SUMMARY_FORMAT_VERSION, modes, comparison };
            let pairs: Vec<(&str, &[_])> = labels.iter().map(String::as_str).zip(records.iter().map(Vec::as_slice)).collect();
            emit_report(&out, &summary, &pairs)?;
            for m in &summary.modes {
                println!(
                    "{}: {} frames, mean lateral {}, mean yaw {}",
                    m.label,
                    m.frames,
                    fmt_opt(m.mean_lateral),
                    fmt_opt(m.mean_yaw)
                );
            }
            if let Some(c) = &summary.comparison {
                println!("delta ({} - {}): lateral {}, yaw {}", c.candidate, c.baseline, fmt_opt(c.delta_mean_lateral), fmt_opt(c.delta_mean_yaw));
            }
        }
    }
    Ok(())
}

/// File stems, disambiguated when both inputs share one.
fn labels_for(paths: &[PathBuf]) -> Vec<String> {
    let stems: Vec<String> = paths
        .iter()
        .map(|p| p.file_stem().map_or_else(|| "estimates".into(), |s| s.to_string_lossy().into_owned()))
        .collect();
    if stems.len() == 2 && stems[0] == stems[1] {
        return vec![format!("{}#1", stems[0]), format!("{}#2", stems[1])];
    }
    stems
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".into(), |x| format!("{x:.6}"))
}

fn create_dir(path: &Path) -> anyhow::Result<()> {
    std::fs::create_dir_all(path).with_context(|| format!("creating {}", path.display()))
}
