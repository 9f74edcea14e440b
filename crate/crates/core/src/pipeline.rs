//! End-to-end runs: explore, accumulate, resolve, extract, reproject,
//! optionally train the toy head, evaluate, and write a run directory.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::consensus::{accumulate_trajectory, finalize, SemanticVoxelMap, VoxelMapConfig, VoxelMapDump};
use crate::detector::NoiseModel;
use crate::error::{Error, Result};
use crate::eval::{evaluate_pseudo_labels, evaluate_raw_detections, write_eval_csv, EvalConfig, EvalReport, EvalRow};
use crate::explore::log::{read_trajectory, write_trajectory};
use crate::explore::{run_episode, Episode, EpisodeConfig, Policy, Trajectory};
use crate::math::mean_std;
use crate::reproject::{build_pseudo_dataset, CocoDataset, PseudoDataset};
use crate::scene::{generate_scene, CameraIntrinsics, SceneParams, SceneSpec};
use crate::seed::{derive_seed, sha256_hex};
use crate::train::{toy_finetune, TrainConfig, TrainReport};

/// Environment variable naming the directory under which run directories are
/// created when no explicit output path is given.
pub const OUTPUT_ROOT_ENV: &str = "SEMVOX_OUTPUT_ROOT";

pub const CONFIG_FILE: &str = "config.json";
pub const TRAJECTORY_FILE: &str = "trajectory.jsonl";
pub const VOXELMAP_FILE: &str = "voxelmap.json";
pub const PSEUDO_DATASET_FILE: &str = "pseudo_dataset.json";
pub const EVAL_JSON_FILE: &str = "eval.json";
pub const EVAL_CSV_FILE: &str = "eval.csv";
pub const TRAIN_REPORT_FILE: &str = "train_report.json";
pub const MANIFEST_FILE: &str = "MANIFEST.json";

pub fn output_root() -> PathBuf {
    std::env::var_os(OUTPUT_ROOT_ENV).map_or_else(|| PathBuf::from("runs"), PathBuf::from)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Master seed; every stage seed is derived from it.
    pub seed: u64,
    pub policy: Policy,
    pub scene: SceneParams,
    /// Load the scene from this JSON file instead of generating it.
    pub scene_file: Option<PathBuf>,
    pub episode: EpisodeConfig,
    pub camera: CameraIntrinsics,
    pub noise: NoiseModel,
    pub voxel: VoxelMapConfig,
    /// Depth tolerance (meters) of the reprojection visibility test.
    pub occlusion_tolerance: f64,
    pub eval: EvalConfig,
    /// Run the toy head after reprojection.
    pub train_enabled: bool,
    /// Toy head settings. Inside a pipeline run its `seed` is ignored and
    /// derived from the master seed instead.
    pub train: TrainConfig,
    #[serde(skip)]
    pub output_dir: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            policy: Policy::Frontier,
            scene: SceneParams::default(),
            scene_file: None,
            episode: EpisodeConfig::default(),
            camera: CameraIntrinsics::default(),
            noise: NoiseModel::default(),
            voxel: VoxelMapConfig::default(),
            occlusion_tolerance: 0.1,
            eval: EvalConfig::default(),
            train_enabled: true,
            train: TrainConfig::default(),
            output_dir: None,
        }
    }
}

impl RunConfig {
    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: Self = serde_json::from_str(&text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if let Some(p) = &self.scene_file {
            if !p.is_file() {
                return bad(format!("scene file {} does not exist", p.display()));
            }
        }
        if self.episode.steps == 0 {
            return bad("steps must be at least 1".into());
        }
        if !(self.voxel.voxel_size > 0.0 && self.voxel.voxel_size.is_finite()) {
            return bad(format!("voxel_size must be positive, got {}", self.voxel.voxel_size));
        }
        if !(self.occlusion_tolerance > 0.0 && self.occlusion_tolerance.is_finite()) {
            return bad(format!(
                "occlusion_tolerance must be positive, got {}",
                self.occlusion_tolerance
            ));
        }
        if !(self.eval.iou_threshold > 0.0 && self.eval.iou_threshold <= 1.0) {
            return bad(format!("iou_threshold must be in (0, 1], got {}", self.eval.iou_threshold));
        }
        self.scene.validate()?;
        self.camera.validate()?;
        self.noise.validate()?;
        self.train.validate()
    }

    /// SHA-256 of the canonical JSON form (the output directory is not part
    /// of it).
    pub fn hash(&self) -> String {
        sha256_hex(&serde_json::to_vec(self).expect("config serializes"))
    }

    pub fn load_scene(&self) -> Result<SceneSpec> {
        match &self.scene_file {
            Some(p) => {
                let text = fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
                let scene: SceneSpec = serde_json::from_str(&text)?;
                scene.validate()?;
                Ok(scene)
            }
            None => generate_scene(&self.scene, derive_seed(self.seed, "scene", 0)),
        }
    }

    /// Toy head settings with the seed derived from the master seed.
    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            seed: derive_seed(self.seed, "train", 0),
            ..self.train.clone()
        }
    }
}

/// Everything one run produces, kept in memory.
#[derive(Debug, Clone)]
pub struct RunOutputs {
    pub config_hash: String,
    pub scene: SceneSpec,
    pub episode: Episode,
    pub map: SemanticVoxelMap,
    pub dataset: PseudoDataset,
    pub pseudo_eval: EvalReport,
    pub raw_eval: EvalReport,
    pub train: Option<TrainReport>,
}

impl RunOutputs {
    pub fn eval_row(&self, config: &RunConfig) -> EvalRow {
        EvalRow::new(
            config.policy.as_str(),
            config.train.alpha,
            config.seed,
            &self.pseudo_eval,
            &self.raw_eval,
        )
    }
}

/// Pseudo-label and raw-detection reports side by side.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalJson {
    pub pseudo: EvalReport,
    pub raw: EvalReport,
    pub improvement: f64,
}

fn stage<T>(name: &'static str, hash: &str, r: Result<T>) -> Result<T> {
    r.map_err(|e| Error::Stage {
        stage: name,
        config_hash: hash.to_string(),
        source: Box::new(e),
    })
}

/// Voxel map and pseudo-labels from a trajectory.
pub fn build_labels(
    trajectory: &Trajectory,
    k: &CameraIntrinsics,
    voxel: &VoxelMapConfig,
    occlusion_tolerance: f64,
) -> Result<(SemanticVoxelMap, PseudoDataset)> {
    let mut map = accumulate_trajectory(trajectory, voxel.voxel_size, k);
    finalize(&mut map, voxel)?;
    let dataset = build_pseudo_dataset(trajectory, &map, k, occlusion_tolerance);
    Ok((map, dataset))
}

/// Scene, trajectory, consistent labels and evaluation, without touching disk.
pub fn execute(config: &RunConfig) -> Result<RunOutputs> {
    let hash = config.hash();
    stage("config", &hash, config.validate())?;
    let scene = stage("scene", &hash, config.load_scene())?;
    let episode = stage(
        "explore",
        &hash,
        run_episode(
            &scene,
            config.policy,
            &config.noise,
            &config.episode,
            &config.camera,
            config.seed,
        ),
    )?;
    let (map, dataset) = stage(
        "labels",
        &hash,
        build_labels(&episode.trajectory, &config.camera, &config.voxel, config.occlusion_tolerance),
    )?;
    let train = if config.train_enabled {
        Some(stage(
            "train",
            &hash,
            toy_finetune(&dataset, &episode.trajectory, &scene, &config.train_config()),
        )?)
    } else {
        None
    };
    let pseudo_eval = stage(
        "eval",
        &hash,
        evaluate_pseudo_labels(&dataset, &episode.trajectory, &scene, &config.eval),
    )?;
    let raw_eval = stage("eval", &hash, evaluate_raw_detections(&episode.trajectory, &scene, &config.eval))?;
    Ok(RunOutputs {
        config_hash: hash,
        scene,
        episode,
        map,
        dataset,
        pseudo_eval,
        raw_eval,
        train,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Complete,
    Failed,
}

/// Content hashes of a run directory. Holds no timestamps, so the same
/// config always yields the same bytes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub status: RunStatus,
    pub config_hash: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    /// File name to SHA-256 of its bytes.
    pub files: BTreeMap<String, String>,
}

impl Manifest {
    pub fn read(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST_FILE);
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// Writes files into a run directory and records their hashes.
pub struct RunDir {
    dir: PathBuf,
    files: BTreeMap<String, String>,
}

impl RunDir {
    pub fn create(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            files: BTreeMap::new(),
        })
    }

    pub fn path(&self) -> &Path {
        &self.dir
    }

    pub fn write_bytes(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
        self.files.insert(name.to_string(), sha256_hex(bytes));
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut bytes = serde_json::to_vec_pretty(value)?;
        bytes.push(b'\n');
        self.write_bytes(name, &bytes)
    }

    pub fn finish(self, status: RunStatus, config_hash: &str, error: Option<String>) -> Result<Manifest> {
        let manifest = Manifest {
            status,
            config_hash: config_hash.to_string(),
            error,
            files: self.files,
        };
        let path = self.dir.join(MANIFEST_FILE);
        let mut bytes = serde_json::to_vec_pretty(&manifest)?;
        bytes.push(b'\n');
        fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
        Ok(manifest)
    }
}

pub fn trajectory_bytes(trajectory: &Trajectory) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    write_trajectory(trajectory, &mut buf)?;
    Ok(buf)
}

pub fn read_trajectory_file(path: &Path) -> Result<Trajectory> {
    let f = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_trajectory(BufReader::new(f))
}

pub fn eval_csv_bytes(rows: &[EvalRow]) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    write_eval_csv(rows, &mut buf)?;
    Ok(buf)
}

fn write_outputs(run: &mut RunDir, config: &RunConfig, out: &RunOutputs) -> Result<()> {
    run.write_bytes(TRAJECTORY_FILE, &trajectory_bytes(&out.episode.trajectory)?)?;
    run.write_json(VOXELMAP_FILE, &VoxelMapDump::from(&out.map))?;
    run.write_json(PSEUDO_DATASET_FILE, &CocoDataset::from(&out.dataset))?;
    let row = out.eval_row(config);
    run.write_json(
        EVAL_JSON_FILE,
        &EvalJson {
            pseudo: out.pseudo_eval.clone(),
            raw: out.raw_eval.clone(),
            improvement: row.improvement,
        },
    )?;
    run.write_bytes(EVAL_CSV_FILE, &eval_csv_bytes(&[row])?)?;
    if let Some(report) = &out.train {
        run.write_json(TRAIN_REPORT_FILE, report)?;
    }
    Ok(())
}

/// Run every stage and write the run directory. On failure the directory
/// still gets a MANIFEST with status `failed` and the error, listing whatever
/// was written before the failure.
pub fn run_pipeline(config: &RunConfig, dir: &Path) -> Result<RunOutputs> {
    let hash = config.hash();
    let mut run = RunDir::create(dir)?;
    run.write_json(CONFIG_FILE, config)?;
    let result = execute(config).and_then(|out| write_outputs(&mut run, config, &out).map(|()| out));
    match result {
        Ok(out) => {
            run.finish(RunStatus::Complete, &hash, None)?;
            Ok(out)
        }
        Err(e) => {
            run.finish(RunStatus::Failed, &hash, Some(e.to_string()))?;
            Err(e)
        }
    }
}

/// Cartesian grid of runs sharing one base config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub policies: Vec<Policy>,
    pub alphas: Vec<f64>,
    pub seeds: Vec<u64>,
    /// Worker threads; 0 uses the rayon default.
    #[serde(default)]
    pub workers: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            policies: vec![Policy::RandomGoals, Policy::Frontier],
            alphas: vec![0.0, 0.1, 0.7, 1.0],
            seeds: vec![1, 2, 3],
            workers: 0,
        }
    }
}

impl GridSpec {
    /// Cells in `(policy, alpha, seed)` order.
    pub fn cells(&self, base: &RunConfig) -> Vec<RunConfig> {
        let mut out = Vec::new();
        for &policy in &self.policies {
            for &alpha in &self.alphas {
                for &seed in &self.seeds {
                    let mut c = base.clone();
                    c.policy = policy;
                    c.train.alpha = alpha;
                    c.seed = seed;
                    out.push(c);
                }
            }
        }
        out
    }
}

pub fn cell_dir_name(config: &RunConfig) -> String {
    format!("{}_alpha{}_seed{}", config.policy.as_str(), config.train.alpha, config.seed)
}

/// One row per grid cell, failed cells included.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridRunRow {
    pub policy: String,
    pub alpha: f64,
    pub seed: u64,
    pub status: RunStatus,
    pub map50: Option<f64>,
    pub raw_map50: Option<f64>,
    pub improvement: Option<f64>,
    pub final_accuracy: Option<f64>,
    pub dir: String,
    pub error: Option<String>,
}

/// Mean and sample standard deviation over the seeds of one
/// `(policy, alpha)` cell. Statistics are empty when no run succeeded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridAggregateRow {
    pub policy: String,
    pub alpha: f64,
    pub runs: usize,
    pub failed: usize,
    pub map50_mean: Option<f64>,
    pub map50_std: Option<f64>,
    pub raw_map50_mean: Option<f64>,
    pub raw_map50_std: Option<f64>,
    pub improvement_mean: Option<f64>,
    pub improvement_std: Option<f64>,
    pub accuracy_mean: Option<f64>,
    pub accuracy_std: Option<f64>,
}

pub const GRID_RUNS_FILE: &str = "grid_runs.csv";
pub const GRID_AGGREGATE_FILE: &str = "aggregate.csv";

#[derive(Debug, Clone)]
pub struct GridOutcome {
    pub runs: Vec<GridRunRow>,
    pub aggregate: Vec<GridAggregateRow>,
}

fn stats(values: impl Iterator<Item = Option<f64>>) -> (Option<f64>, Option<f64>) {
    let v: Vec<f64> = values.flatten().collect();
    if v.is_empty() {
        return (None, None);
    }
    let (m, s) = mean_std(&v);
    (Some(m), Some(s))
}

/// Group run rows by `(policy, alpha)` in first-appearance order.
pub fn aggregate_runs(runs: &[GridRunRow]) -> Vec<GridAggregateRow> {
    let mut keys: Vec<(String, f64)> = Vec::new();
    for r in runs {
        if !keys.iter().any(|(p, a)| *p == r.policy && a.to_bits() == r.alpha.to_bits()) {
            keys.push((r.policy.clone(), r.alpha));
        }
    }
    keys.into_iter()
        .map(|(policy, alpha)| {
            let cell: Vec<&GridRunRow> = runs
                .iter()
                .filter(|r| r.policy == policy && r.alpha.to_bits() == alpha.to_bits())
                .collect();
            let ok = || cell.iter().filter(|r| r.status == RunStatus::Complete);
            let (map50_mean, map50_std) = stats(ok().map(|r| r.map50));
            let (raw_map50_mean, raw_map50_std) = stats(ok().map(|r| r.raw_map50));
            let (improvement_mean, improvement_std) = stats(ok().map(|r| r.improvement));
            let (accuracy_mean, accuracy_std) = stats(ok().map(|r| r.final_accuracy));
            GridAggregateRow {
                failed: cell.len() - ok().count(),
                runs: cell.len(),
                policy,
                alpha,
                map50_mean,
                map50_std,
                raw_map50_mean,
                raw_map50_std,
                improvement_mean,
                improvement_std,
                accuracy_mean,
                accuracy_std,
            }
        })
        .collect()
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(f));
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

pub fn read_csv<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let f = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = csv::Reader::from_reader(BufReader::new(f));
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

/// One pipeline run per cell, each in its own subdirectory of `root`, on a
/// bounded worker pool. A failing cell is recorded and the grid continues.
pub fn run_grid(base: &RunConfig, grid: &GridSpec, root: &Path) -> Result<GridOutcome> {
    if grid.policies.is_empty() || grid.alphas.is_empty() || grid.seeds.is_empty() {
        return Err(Error::InvalidConfig("grid must have at least one policy, alpha and seed".into()));
    }
    fs::create_dir_all(root).map_err(|e| Error::io(root, e))?;
    let cells = grid.cells(base);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(grid.workers)
        .build()
        .map_err(|e| Error::Internal(e.to_string()))?;
    let runs: Vec<GridRunRow> = pool.install(|| {
        cells
            .par_iter()
            .map(|cfg| {
                let name = cell_dir_name(cfg);
                let result = run_pipeline(cfg, &root.join(&name));
                let mut row = GridRunRow {
                    policy: cfg.policy.as_str().to_string(),
                    alpha: cfg.train.alpha,
                    seed: cfg.seed,
                    status: RunStatus::Complete,
                    map50: None,
                    raw_map50: None,
                    improvement: None,
                    final_accuracy: None,
                    dir: name,
                    error: None,
                };
                match result {
                    Ok(out) => {
                        let eval = out.eval_row(cfg);
                        row.map50 = Some(eval.map50);
                        row.raw_map50 = Some(eval.raw_map50);
                        row.improvement = Some(eval.improvement);
                        row.final_accuracy = out.train.map(|t| t.final_accuracy);
                    }
                    Err(e) => {
                        row.status = RunStatus::Failed;
                        row.error = Some(e.to_string());
                    }
                }
                row
            })
            .collect()
    });
    let aggregate = aggregate_runs(&runs);
    write_csv(&root.join(GRID_RUNS_FILE), &runs)?;
    write_csv(&root.join(GRID_AGGREGATE_FILE), &aggregate)?;
    Ok(GridOutcome { runs, aggregate })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config() -> RunConfig {
        let mut c = RunConfig::default();
        c.episode.steps = 30;
        c.train.embed_dim = 32;
        c.train.epochs = 2;
        c
    }

    #[test]
    fn config_json_round_trip() {
        let mut c = small_config();
        c.noise.dropout_base = 0.2;
        c.train.alpha = 0.1;
        let text = serde_json::to_string_pretty(&c).unwrap();
        let back: RunConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back, c);
        assert_eq!(serde_json::to_string_pretty(&back).unwrap(), text);
    }

    #[test]
    fn partial_config_fills_defaults() {
        let c: RunConfig = serde_json::from_str(r#"{"seed": 9, "policy": "random", "episode": {"steps": 7}}"#).unwrap();
        assert_eq!(c.seed, 9);
        assert_eq!(c.policy, Policy::RandomGoals);
        assert_eq!(c.episode.steps, 7);
        assert_eq!(c.noise, NoiseModel::default());
    }

    #[test]
    fn unknown_fields_are_rejected() {
        assert!(serde_json::from_str::<RunConfig>(r#"{"sead": 9}"#).is_err());
    }

    #[test]
    fn invalid_ranges_are_rejected() {
        let mut c = small_config();
        c.voxel.voxel_size = 0.0;
        assert!(matches!(c.validate(), Err(Error::InvalidConfig(_))));
        let mut c = small_config();
        c.scene_file = Some("/nonexistent/scene.json".into());
        assert!(matches!(c.validate(), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn hash_ignores_output_dir_and_tracks_fields() {
        let a = small_config();
        let mut b = a.clone();
        b.output_dir = Some("/tmp/x".into());
        assert_eq!(a.hash(), b.hash());
        b.seed += 1;
        assert_ne!(a.hash(), b.hash());
    }

    #[test]
    fn stage_errors_carry_stage_and_hash() {
        let mut c = small_config();
        c.scene.objects_per_class = [[40, 40]; 6];
        let err = execute(&c).unwrap_err();
        match err {
            Error::Stage { stage, config_hash, .. } => {
                assert_eq!(stage, "scene");
                assert_eq!(config_hash, c.hash());
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn failed_run_writes_failed_manifest() {
        let tmp = tempfile::tempdir().unwrap();
        let mut c = small_config();
        c.scene.objects_per_class = [[40, 40]; 6];
        assert!(run_pipeline(&c, tmp.path()).is_err());
        let m = Manifest::read(tmp.path()).unwrap();
        assert_eq!(m.status, RunStatus::Failed);
        assert!(m.error.unwrap().contains("scene"));
        assert_eq!(m.files.keys().collect::<Vec<_>>(), [CONFIG_FILE]);
    }

    #[test]
    fn aggregate_groups_and_skips_failures() {
        let row = |policy: &str, alpha, seed, map50: Option<f64>| GridRunRow {
            policy: policy.into(),
            alpha,
            seed,
            status: if map50.is_some() { RunStatus::Complete } else { RunStatus::Failed },
            map50,
            raw_map50: map50.map(|m| m - 0.1),
            improvement: map50.map(|_| 0.1),
            final_accuracy: None,
            dir: String::new(),
            error: None,
        };
        let runs = vec![
            row("frontier", 0.7, 1, Some(0.5)),
            row("frontier", 0.7, 2, Some(0.7)),
            row("frontier", 0.7, 3, None),
            row("random", 0.7, 1, None),
        ];
        let agg = aggregate_runs(&runs);
        assert_eq!(agg.len(), 2);
        assert_eq!((agg[0].runs, agg[0].failed), (3, 1));
        assert!((agg[0].map50_mean.unwrap() - 0.6).abs() < 1e-12);
        assert!((agg[0].map50_std.unwrap() - 0.02f64.sqrt()).abs() < 1e-12);
        assert_eq!(agg[0].accuracy_mean, None);
        assert_eq!(agg[1].map50_mean, None);
        assert_eq!(agg[1].failed, 1);
    }

    #[test]
    fn empty_grid_is_rejected() {
        let tmp = tempfile::tempdir().unwrap();
        let grid = GridSpec {
            seeds: vec![],
            ..GridSpec::default()
        };
        assert!(run_grid(&small_config(), &grid, tmp.path()).is_err());
    }
}
