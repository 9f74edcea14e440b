//! Project extracted instances back onto every frame as pseudo-labels.
//!
//! Each instance voxel centre is projected into the frame and splatted over
//! its projected footprint. A splat pixel is claimed only if the rendered
//! depth there agrees with the voxel depth within a tolerance, which keeps
//! labels from bleeding through occluders. Where instances overlap the nearer
//! claim wins.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classes::{ClassId, CLASS_NAMES, NUM_CLASSES};
use crate::consensus::SemanticVoxelMap;
use crate::error::{Error, Result};
use crate::explore::Trajectory;
use crate::mask::{BBox, Mask};
use crate::rle::CocoRle;
use crate::scene::{world_to_pixel, CameraIntrinsics, FrameObservation};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PseudoLabel {
    pub u: u32,
    pub class_id: ClassId,
    pub lambda_bar: [f64; NUM_CLASSES],
    pub mask: Mask,
    pub bbox: BBox,
}

impl PseudoLabel {
    /// Ranking confidence: the largest consistent-logit entry.
    pub fn score(&self) -> f64 {
        self.lambda_bar.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Pseudo-labels per frame, aligned with the trajectory.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PseudoDataset {
    pub width: usize,
    pub height: usize,
    pub frames: Vec<Vec<PseudoLabel>>,
}

impl PseudoDataset {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn label_count(&self) -> usize {
        self.frames.iter().map(Vec::len).sum()
    }

    pub fn labels(&self) -> impl Iterator<Item = (usize, &PseudoLabel)> {
        self.frames.iter().enumerate().flat_map(|(i, f)| f.iter().map(move |l| (i, l)))
    }
}

pub fn mask_to_bbox(mask: &Mask) -> Result<BBox> {
    mask.bbox()
}

/// Pixels covered by the projected footprint of a voxel centred at planar
/// depth `depth`: a square of this half-width around the centre pixel.
pub fn splat_radius(voxel_size: f64, fx: f64, depth: f64) -> i64 {
    (voxel_size * fx / (2.0 * depth)).ceil() as i64
}

/// Pseudo-labels of every instance visible in `frame`, ordered by id.
pub fn project_instance_masks(
    map: &SemanticVoxelMap,
    frame: &FrameObservation,
    k: &CameraIntrinsics,
    occlusion_tolerance: f64,
) -> Vec<PseudoLabel> {
    let (w, h) = (frame.width as i64, frame.height as i64);
    // nearest claim per pixel: (voxel depth, instance id)
    let mut zbuf: Vec<Option<(f64, u32)>> = vec![None; frame.width * frame.height];
    for inst in map.instances.values() {
        for key in &inst.voxels {
            let Some((pu, pv, zc)) = world_to_pixel(key.center(map.voxel_size), k, &frame.pose) else {
                continue;
            };
            let (cu, cv) = (pu.round() as i64, pv.round() as i64);
            let r = splat_radius(map.voxel_size, k.fx, zc);
            if cu + r < 0 || cv + r < 0 || cu - r >= w || cv - r >= h {
                continue;
            }
            for v in (cv - r).max(0)..=(cv + r).min(h - 1) {
                for u in (cu - r).max(0)..=(cu + r).min(w - 1) {
                    let idx = (v * w + u) as usize;
                    let d = frame.depth[idx];
                    if d <= 0.0 || (zc - d).abs() > occlusion_tolerance {
                        continue;
                    }
                    if zbuf[idx].is_none_or(|(z, _)| zc < z) {
                        zbuf[idx] = Some((zc, inst.u));
                    }
                }
            }
        }
    }

    let mut claimed: BTreeMap<u32, Vec<(u32, u32)>> = BTreeMap::new();
    for (idx, claim) in zbuf.iter().enumerate() {
        if let Some((_, u)) = claim {
            claimed
                .entry(*u)
                .or_default()
                .push(((idx % frame.width) as u32, (idx / frame.width) as u32));
        }
    }
    claimed
        .into_iter()
        .map(|(u, pixels)| {
            let inst = &map.instances[&u];
            let mask = Mask::from_pixels(pixels);
            let bbox = mask.bbox().expect("claimed pixels are nonempty");
            PseudoLabel {
                u,
                class_id: inst.class_id,
                lambda_bar: inst.consistent_logits,
                mask,
                bbox,
            }
        })
        .collect()
}

pub fn build_pseudo_dataset(
    trajectory: &Trajectory,
    map: &SemanticVoxelMap,
    k: &CameraIntrinsics,
    occlusion_tolerance: f64,
) -> PseudoDataset {
    let frames = trajectory
        .steps
        .par_iter()
        .map(|s| project_instance_masks(map, &s.frame, k, occlusion_tolerance))
        .collect();
    PseudoDataset {
        width: k.width,
        height: k.height,
        frames,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CocoImage {
    pub id: usize,
    pub file_name: String,
    pub width: usize,
    pub height: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CocoAnnotation {
    pub id: usize,
    pub image_id: usize,
    pub instance_uid: u32,
    pub category_id: ClassId,
    /// `[x, y, width, height]` in whole pixels, inclusive of the far edge.
    pub bbox: [u32; 4],
    pub area: usize,
    pub segmentation: CocoRle,
    pub lambda_bar: [f64; NUM_CLASSES],
    pub iscrowd: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CocoCategory {
    pub id: ClassId,
    pub name: String,
}

/// On-disk form of a [`PseudoDataset`]. Image ids are frame indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CocoDataset {
    pub images: Vec<CocoImage>,
    pub annotations: Vec<CocoAnnotation>,
    pub categories: Vec<CocoCategory>,
}

impl From<&PseudoDataset> for CocoDataset {
    fn from(ds: &PseudoDataset) -> Self {
        let images = (0..ds.frames.len())
            .map(|i| CocoImage {
                id: i,
                file_name: format!("frame_{i:06}"),
                width: ds.width,
                height: ds.height,
            })
            .collect();
        let annotations = ds
            .labels()
            .enumerate()
            .map(|(id, (frame, l))| CocoAnnotation {
                id,
                image_id: frame,
                instance_uid: l.u,
                category_id: l.class_id,
                bbox: l.bbox.to_xywh(),
                area: l.mask.len(),
                segmentation: CocoRle::from_pixels(ds.width, ds.height, l.mask.pixels()),
                lambda_bar: l.lambda_bar,
                iscrowd: 0,
            })
            .collect();
        let categories = CLASS_NAMES
            .iter()
            .enumerate()
            .map(|(id, name)| CocoCategory { id, name: name.to_string() })
            .collect();
        Self {
            images,
            annotations,
            categories,
        }
    }
}

impl TryFrom<CocoDataset> for PseudoDataset {
    type Error = Error;

    fn try_from(coco: CocoDataset) -> Result<Self> {
        let (width, height) = coco.images.first().map(|i| (i.width, i.height)).unwrap_or((0, 0));
        let mut frames: Vec<Vec<PseudoLabel>> = vec![Vec::new(); coco.images.len()];
        for a in coco.annotations {
            let frame = frames
                .get_mut(a.image_id)
                .ok_or_else(|| Error::InvalidConfig(format!("annotation {} references unknown image {}", a.id, a.image_id)))?;
            let mask = Mask::from_pixels(a.segmentation.to_pixels());
            let bbox = mask.bbox()?;
            if a.category_id >= NUM_CLASSES {
                return Err(Error::InvalidConfig(format!("annotation {} has category {}", a.id, a.category_id)));
            }
            frame.push(PseudoLabel {
                u: a.instance_uid,
                class_id: a.category_id,
                lambda_bar: a.lambda_bar,
                mask,
                bbox,
            });
        }
        Ok(Self { width, height, frames })
    }
}
