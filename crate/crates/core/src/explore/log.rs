//! JSON-lines trajectory log: one record per step.
//!
//! ```text
//! {"step":0,"pose":{..},"depth_mm":{"width":..,"height":..,"runs":[[mm,n],..]},
//!  "gt_instance":{"width":..,"height":..,"runs":[[id_or_-1,n],..]},
//!  "detections":[{"class_id":..,"logits":[..],"score":..,"bbox":{..},
//!                 "mask":{"size":[h,w],"counts":[..]},"diag_gt_id":..}]}
//! ```
//!
//! Depth is stored in whole millimetres, so a replayed trajectory differs from
//! the in-memory one by at most 0.5 mm per pixel.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::episode::{Trajectory, TrajectoryStep};
use crate::classes::NUM_CLASSES;
use crate::detector::{Detection, DetectionSet};
use crate::error::{Error, Result};
use crate::mask::{BBox, Mask};
use crate::rle::{CocoRle, ValueRle};
use crate::scene::{FrameObservation, Pose};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionRecord {
    pub class_id: usize,
    pub logits: [f64; NUM_CLASSES],
    pub score: f64,
    pub bbox: BBox,
    pub mask: CocoRle,
    pub diag_gt_id: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub pose: Pose,
    pub depth_mm: ValueRle<u32>,
    pub gt_instance: ValueRle<i64>,
    pub detections: Vec<DetectionRecord>,
}

impl StepRecord {
    pub fn from_step(index: usize, step: &TrajectoryStep) -> Self {
        let f = &step.frame;
        let depth_mm: Vec<u32> = f.depth.iter().map(|d| (d * 1000.0).round() as u32).collect();
        let gt: Vec<i64> = f.gt_instance.iter().map(|g| g.map_or(-1, i64::from)).collect();
        let detections = step
            .detections
            .detections
            .iter()
            .zip(&step.detections.diagnostic_gt_ids)
            .map(|(d, &gt_id)| DetectionRecord {
                class_id: d.class_id,
                logits: d.logits,
                score: d.score,
                bbox: d.bbox,
                mask: CocoRle::from_pixels(f.width, f.height, d.mask.pixels()),
                diag_gt_id: gt_id,
            })
            .collect();
        Self {
            step: index,
            pose: f.pose,
            depth_mm: ValueRle::encode(f.width, f.height, &depth_mm),
            gt_instance: ValueRle::encode(f.width, f.height, &gt),
            detections,
        }
    }

    pub fn into_step(self) -> Result<TrajectoryStep> {
        let (w, h) = (self.depth_mm.width, self.depth_mm.height);
        let depth: Vec<f64> = self.depth_mm.decode().into_iter().map(|mm| mm as f64 / 1000.0).collect();
        let gt_instance: Vec<Option<u32>> = self
            .gt_instance
            .decode()
            .into_iter()
            .map(|g| u32::try_from(g).ok())
            .collect();
        if depth.len() != w * h || gt_instance.len() != w * h {
            return Err(Error::InvalidConfig(format!("step {}: image runs do not cover {w}x{h}", self.step)));
        }
        let mut detections = DetectionSet {
            frame_index: self.step,
            ..Default::default()
        };
        for d in self.detections {
            detections.detections.push(Detection {
                mask: Mask::from_pixels(d.mask.to_pixels()),
                bbox: d.bbox,
                class_id: d.class_id,
                logits: d.logits,
                score: d.score,
            });
            detections.diagnostic_gt_ids.push(d.diag_gt_id);
        }
        Ok(TrajectoryStep {
            frame: FrameObservation {
                pose: self.pose,
                width: w,
                height: h,
                depth,
                gt_instance,
            },
            detections,
        })
    }
}

pub fn write_trajectory<W: Write>(trajectory: &Trajectory, mut out: W) -> Result<()> {
    for (i, step) in trajectory.steps.iter().enumerate() {
        let line = serde_json::to_string(&StepRecord::from_step(i, step))?;
        out.write_all(line.as_bytes())
            .and_then(|_| out.write_all(b"\n"))
            .map_err(|e| Error::io("<trajectory>", e))?;
    }
    Ok(())
}

pub fn read_trajectory<R: BufRead>(input: R) -> Result<Trajectory> {
    let mut trajectory = Trajectory::default();
    for line in input.lines() {
        let line = line.map_err(|e| Error::io("<trajectory>", e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: StepRecord = serde_json::from_str(&line)?;
        if record.step != trajectory.len() {
            return Err(Error::InvalidConfig(format!(
                "trajectory log is not contiguous: expected step {}, found {}",
                trajectory.len(),
                record.step
            )));
        }
        trajectory.steps.push(record.into_step()?);
    }
    Ok(trajectory)
}
