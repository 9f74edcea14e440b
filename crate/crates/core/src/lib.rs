//! Semantic voxel consensus for self-supervised pseudo-labels.
//!
//! An agent explores a synthetic indoor scene with a depth camera and a noisy
//! detector. Detections are lifted into a sparse semantic voxel map, per-voxel
//! disagreements are settled by max-score consensus, 26-connected components
//! become object instances with averaged soft targets, and the instances are
//! projected back onto every frame as consistent pseudo-labels. The crate also
//! carries the training losses used on those labels, a toy trainable head, and
//! mAP@50 evaluation against the synthetic ground truth.

pub mod classes;
pub mod consensus;
pub mod detector;
pub mod error;
pub mod eval;
pub mod explore;
pub mod losses;
pub mod mask;
pub mod math;
pub mod pipeline;
pub mod reproject;
pub mod rle;
pub mod scene;
pub mod seed;
pub mod train;

pub use classes::{ClassId, CLASS_NAMES, NUM_CLASSES};
pub use consensus::{
    InstanceRecord, ResolutionRule, SemanticVoxelMap, VoxelKey, VoxelMapConfig, VoxelRecord,
};
pub use detector::{Detection, DetectionSet, NoiseModel};
pub use error::{Error, Result};
pub use eval::{EvalReport, ScoredBox};
pub use losses::{Gradients, LossValue};
pub use explore::{Action, AgentState, EpisodeConfig, OccupancyGrid, Policy, Trajectory};
pub use mask::{BBox, Mask};
pub use pipeline::RunConfig;
pub use reproject::{PseudoDataset, PseudoLabel};
pub use scene::{Aabb, CameraIntrinsics, FrameObservation, ObjectInstance, Pose, SceneSpec};
pub use train::{TrainConfig, TrainReport};
