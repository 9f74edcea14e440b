//! `semvox`: drive the pseudo-label pipeline from the command line.
//!
//! Staged commands (`explore`, `labels build`, `eval`, `train toy`) work on a
//! run directory and read what the previous stage left there. `pipeline run`
//! does all stages in one go and also writes a MANIFEST.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use semvox_core::detector::diagonal_confusion;
use semvox_core::eval::{evaluate_pseudo_labels, evaluate_raw_detections, EvalRow};
use semvox_core::explore::run_episode;
use semvox_core::pipeline::{
    self, build_labels, eval_csv_bytes, output_root, read_trajectory_file, run_grid, run_pipeline, EvalJson,
    GridSpec, RunDir, CONFIG_FILE, EVAL_CSV_FILE, EVAL_JSON_FILE, PSEUDO_DATASET_FILE, TRAIN_REPORT_FILE,
    TRAJECTORY_FILE, VOXELMAP_FILE,
};
use semvox_core::consensus::VoxelMapDump;
use semvox_core::reproject::{CocoDataset, PseudoDataset};
use semvox_core::train::toy_finetune;
use semvox_core::{Policy, RunConfig};

#[derive(Parser)]
#[command(name = "semvox", version, about = "Consistent pseudo-labels from an exploring agent")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Scene generation.
    #[command(subcommand)]
    Scene(SceneCmd),
    /// Explore a scene and write config.json and trajectory.jsonl.
    Explore {
        #[command(flatten)]
        run: RunArgs,
        /// Run directory (default: $SEMVOX_OUTPUT_ROOT/<policy>_seed<seed>).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Pseudo-labels from a run directory's trajectory.
    #[command(subcommand)]
    Labels(LabelsCmd),
    /// Score a run directory's pseudo-labels and raw detections.
    Eval {
        #[arg(long)]
        run: PathBuf,
    },
    /// Toy head training.
    #[command(subcommand)]
    Train(TrainCmd),
    /// End-to-end runs.
    #[command(subcommand)]
    Pipeline(PipelineCmd),
    /// Parameter grids.
    #[command(subcommand)]
    Grid(GridCmd),
}

#[derive(Subcommand)]
enum SceneCmd {
    /// Generate a scene and write it as JSON.
    Gen {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Subcommand)]
enum LabelsCmd {
    /// Voxel map and reprojected pseudo-labels.
    Build {
        #[arg(long)]
        run: PathBuf,
    },
}

#[derive(Subcommand)]
enum TrainCmd {
    /// Fit the toy head to a run directory's pseudo-labels.
    Toy {
        #[arg(long)]
        run: PathBuf,
        #[command(flatten)]
        opt: TrainArgs,
    },
}

#[derive(Subcommand)]
enum PipelineCmd {
    /// Every stage, written to one run directory.
    Run {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum GridCmd {
    /// One pipeline run per (policy, alpha, seed) cell plus an aggregate CSV.
    Run {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, value_delimiter = ',', default_values = ["random", "frontier"])]
        policies: Vec<Policy>,
        #[arg(long, value_delimiter = ',', default_values_t = [0.0, 0.1, 0.7, 1.0])]
        alphas: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_values_t = [1, 2, 3])]
        seeds: Vec<u64>,
        /// Worker threads (0 = one per core).
        #[arg(long, default_value_t = 0)]
        workers: usize,
        /// Grid directory (default: $SEMVOX_OUTPUT_ROOT/grid).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args, Default)]
struct TrainArgs {
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    margin: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
}

/// Config file plus flag overrides; flags win.
#[derive(Args)]
struct RunArgs {
    /// JSON run config; missing fields take defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    policy: Option<Policy>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    scene_file: Option<PathBuf>,
    /// Diagonal of the detector confusion matrix.
    #[arg(long)]
    confusion_diagonal: Option<f64>,
    #[arg(long)]
    dropout_base: Option<f64>,
    #[arg(long)]
    dropout_per_meter: Option<f64>,
    #[arg(long)]
    voxel_size: Option<f64>,
    #[arg(long)]
    min_instance_voxels: Option<usize>,
    #[arg(long)]
    occlusion_tolerance: Option<f64>,
    /// Skip the toy head.
    #[arg(long)]
    no_train: bool,
    #[command(flatten)]
    train: TrainArgs,
}

impl TrainArgs {
    fn apply(&self, cfg: &mut semvox_core::TrainConfig) {
        if let Some(v) = self.alpha {
            cfg.alpha = v;
        }
        if let Some(v) = self.margin {
            cfg.margin = v;
        }
        if let Some(v) = self.epochs {
            cfg.epochs = v;
        }
        if let Some(v) = self.lr {
            cfg.lr = v;
        }
        if let Some(v) = self.batch_size {
            cfg.batch_size = v;
        }
    }
}

impl RunArgs {
    fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => {
                let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
                serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))?
            }
            None => RunConfig::default(),
        };
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.policy {
            cfg.policy = v;
        }
        if let Some(v) = self.steps {
            cfg.episode.steps = v;
        }
        if let Some(v) = &self.scene_file {
            cfg.scene_file = Some(v.clone());
        }
        if let Some(v) = self.confusion_diagonal {
            cfg.noise.confusion = diagonal_confusion(v);
        }
        if let Some(v) = self.dropout_base {
            cfg.noise.dropout_base = v;
        }
        if let Some(v) = self.dropout_per_meter {
            cfg.noise.dropout_per_meter = v;
        }
        if let Some(v) = self.voxel_size {
            cfg.voxel.voxel_size = v;
        }
        if let Some(v) = self.min_instance_voxels {
            cfg.voxel.min_instance_voxels = v;
        }
        if let Some(v) = self.occlusion_tolerance {
            cfg.occlusion_tolerance = v;
        }
        if self.no_train {
            cfg.train_enabled = false;
        }
        self.train.apply(&mut cfg.train);
        cfg.validate()?;
        Ok(cfg)
    }
}

fn default_run_dir(cfg: &RunConfig) -> PathBuf {
    output_root().join(format!("{}_seed{}", cfg.policy.as_str(), cfg.seed))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

fn load_run(dir: &Path) -> Result<RunConfig> {
    let cfg: RunConfig = read_json(&dir.join(CONFIG_FILE))?;
    cfg.validate()?;
    Ok(cfg)
}

fn load_dataset(dir: &Path) -> Result<PseudoDataset> {
    let coco: CocoDataset = read_json(&dir.join(PSEUDO_DATASET_FILE))?;
    Ok(PseudoDataset::try_from(coco)?)
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Scene(SceneCmd::Gen { run, out }) => {
            let cfg = run.resolve()?;
            let scene = cfg.load_scene()?;
            write_json(&out, &scene)?;
            println!("{} objects, {} obstacles -> {}", scene.objects.len(), scene.obstacles.len(), out.display());
        }
        Command::Explore { run, out } => {
            let cfg = run.resolve()?;
            let dir = out.unwrap_or_else(|| default_run_dir(&cfg));
            let scene = cfg.load_scene()?;
            let ep = run_episode(&scene, cfg.policy, &cfg.noise, &cfg.episode, &cfg.camera, cfg.seed)?;
            let mut rd = RunDir::create(&dir)?;
            rd.write_json(CONFIG_FILE, &cfg)?;
            rd.write_bytes(TRAJECTORY_FILE, &pipeline::trajectory_bytes(&ep.trajectory)?)?;
            println!("{} frames -> {}", ep.trajectory.len(), dir.display());
        }
        Command::Labels(LabelsCmd::Build { run }) => {
            let cfg = load_run(&run)?;
            let traj = read_trajectory_file(&run.join(TRAJECTORY_FILE))?;
            let (map, dataset) = build_labels(&traj, &cfg.camera, &cfg.voxel, cfg.occlusion_tolerance)?;
            write_json(&run.join(VOXELMAP_FILE), &VoxelMapDump::from(&map))?;
            write_json(&run.join(PSEUDO_DATASET_FILE), &CocoDataset::from(&dataset))?;
            println!("{} instances, {} labels over {} frames", map.instances.len(), dataset.label_count(), dataset.len());
        }
        Command::Eval { run } => {
            let cfg = load_run(&run)?;
            let scene = cfg.load_scene()?;
            let traj = read_trajectory_file(&run.join(TRAJECTORY_FILE))?;
            let dataset = load_dataset(&run)?;
            let pseudo = evaluate_pseudo_labels(&dataset, &traj, &scene, &cfg.eval)?;
            let raw = evaluate_raw_detections(&traj, &scene, &cfg.eval)?;
            let row = EvalRow::new(cfg.policy.as_str(), cfg.train.alpha, cfg.seed, &pseudo, &raw);
            fs::write(run.join(EVAL_CSV_FILE), eval_csv_bytes(std::slice::from_ref(&row))?)?;
            write_json(
                &run.join(EVAL_JSON_FILE),
                &EvalJson {
                    pseudo,
                    raw,
                    improvement: row.improvement,
                },
            )?;
            println!("map50 {:.4} raw {:.4} improvement {:+.4}", row.map50, row.raw_map50, row.improvement);
        }
        Command::Train(TrainCmd::Toy { run, opt }) => {
            let mut cfg = load_run(&run)?;
            opt.apply(&mut cfg.train);
            cfg.validate()?;
            let scene = cfg.load_scene()?;
            let traj = read_trajectory_file(&run.join(TRAJECTORY_FILE))?;
            let dataset = load_dataset(&run)?;
            let report = toy_finetune(&dataset, &traj, &scene, &cfg.train_config())?;
            write_json(&run.join(TRAIN_REPORT_FILE), &report)?;
            println!("alpha {} held-out accuracy {:.4}", report.alpha, report.final_accuracy);
        }
        Command::Pipeline(PipelineCmd::Run { run, out }) => {
            let cfg = run.resolve()?;
            let dir = out.unwrap_or_else(|| default_run_dir(&cfg));
            let outputs = run_pipeline(&cfg, &dir)?;
            let row = outputs.eval_row(&cfg);
            println!(
                "map50 {:.4} raw {:.4} improvement {:+.4} -> {}",
                row.map50,
                row.raw_map50,
                row.improvement,
                dir.display()
            );
        }
        Command::Grid(GridCmd::Run {
            run,
            policies,
            alphas,
            seeds,
            workers,
            out,
        }) => {
            let base = run.resolve()?;
            let dir = out.unwrap_or_else(|| output_root().join("grid"));
            let grid = GridSpec {
                policies,
                alphas,
                seeds,
                workers,
            };
            let outcome = run_grid(&base, &grid, &dir)?;
            let failed = outcome.runs.iter().filter(|r| r.error.is_some()).count();
            println!(
                "{} runs ({failed} failed), {} aggregate rows -> {}",
                outcome.runs.len(),
                outcome.aggregate.len(),
                dir.display()
            );
            if failed == outcome.runs.len() {
                bail!("every grid cell failed");
            }
        }
    }
    Ok(())
}
