//! Parametric stand-in for an off-the-shelf instance detector.
//!
//! For every sufficiently visible object the simulator may drop it
//! (distance-dependent), report a class drawn from a confusion matrix, emit a
//! sharpened one-hot logit vector with Gaussian noise, and jitter the mask by
//! a small dilation or erosion. Detections scoring under the threshold are
//! discarded, as a real detector's post-filter would.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::classes::{ClassId, NUM_CLASSES};
use crate::error::{Error, Result};
use crate::mask::{BBox, Mask};
use crate::math::{argmax, softmax_unchecked};
use crate::scene::{FrameObservation, SceneSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseModel {
    /// Row `t` is the distribution of the reported class for true class `t`.
    pub confusion: [[f64; NUM_CLASSES]; NUM_CLASSES],
    pub dropout_base: f64,
    pub dropout_per_meter: f64,
    pub logit_sharpness: f64,
    /// Standard deviation of the iid Gaussian added to every logit.
    pub logit_noise_std: f64,
    pub mask_jitter_px: u32,
    pub score_threshold: f64,
    /// Objects with fewer visible pixels are never detected.
    pub min_pixels: usize,
}

impl Default for NoiseModel {
    /// Illustrative moderate noise; these values are not calibrated against
    /// any real detector. Mask jitter is off by default: a dilated mask lifts
    /// background pixels onto the surfaces behind the object, which the voxel
    /// map then labels as that object.
    fn default() -> Self {
        Self {
            confusion: diagonal_confusion(0.75),
            dropout_base: 0.1,
            dropout_per_meter: 0.05,
            logit_sharpness: 4.0,
            logit_noise_std: 1.0,
            mask_jitter_px: 0,
            score_threshold: 0.7,
            min_pixels: 50,
        }
    }
}

impl NoiseModel {
    /// Perfect detector: identity confusion, no dropout, exact masks.
    pub fn noiseless() -> Self {
        Self {
            confusion: diagonal_confusion(1.0),
            dropout_base: 0.0,
            dropout_per_meter: 0.0,
            logit_sharpness: 10.0,
            logit_noise_std: 0.0,
            mask_jitter_px: 0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(format!("noise model: {m}")));
        for (t, row) in self.confusion.iter().enumerate() {
            if row.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
                return bad(format!("confusion row {t} has an entry outside [0, 1]"));
            }
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > 1e-9 {
                return bad(format!("confusion row {t} sums to {s}"));
            }
        }
        for (name, p) in [
            ("dropout_base", self.dropout_base),
            ("dropout_per_meter", self.dropout_per_meter),
            ("score_threshold", self.score_threshold),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} = {p} outside [0, 1]"));
            }
        }
        if !(self.logit_sharpness > 0.0) || !(self.logit_noise_std >= 0.0) {
            return bad("logit_sharpness must be > 0 and logit_noise_std >= 0".into());
        }
        Ok(())
    }
}

/// `diag` on the diagonal, the rest spread evenly over the other classes.
pub fn diagonal_confusion(diag: f64) -> [[f64; NUM_CLASSES]; NUM_CLASSES] {
    let off = (1.0 - diag) / (NUM_CLASSES - 1) as f64;
    let mut m = [[off; NUM_CLASSES]; NUM_CLASSES];
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = diag;
    }
    m
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub mask: Mask,
    pub bbox: BBox,
    pub class_id: ClassId,
    pub logits: [f64; NUM_CLASSES],
    /// Max of `softmax(logits)`.
    pub score: f64,
}

/// Detector output for one frame.
///
/// `diagnostic_gt_ids` pairs each detection with the object that produced it.
/// It exists for evaluation diagnostics only; the label pipeline consumes
/// `detections` alone.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DetectionSet {
    pub frame_index: usize,
    pub detections: Vec<Detection>,
    pub diagnostic_gt_ids: Vec<u32>,
}

fn sample_categorical<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let x: f64 = rng.random();
    let mut acc = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if x < acc {
            return i;
        }
    }
    // rounding left a sliver above the last cumulative sum
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(probs.len() - 1)
}

/// Reported class and noisy logits for one detection of true class `true_class`.
pub fn sample_class_and_logits<R: Rng + ?Sized>(
    true_class: ClassId,
    noise: &NoiseModel,
    rng: &mut R,
) -> (ClassId, [f64; NUM_CLASSES]) {
    let reported = sample_categorical(&noise.confusion[true_class], rng);
    let mut logits = [0.0; NUM_CLASSES];
    logits[reported] = noise.logit_sharpness;
    if noise.logit_noise_std > 0.0 {
        let gauss = Normal::new(0.0, noise.logit_noise_std).expect("validated std");
        for l in &mut logits {
            *l += gauss.sample(rng);
        }
    }
    (reported, logits)
}

/// Simulate the detector on one rendered frame.
pub fn simulate_detections<R: Rng + ?Sized>(
    frame_index: usize,
    frame: &FrameObservation,
    scene: &SceneSpec,
    noise: &NoiseModel,
    rng: &mut R,
) -> DetectionSet {
    let mut out = DetectionSet {
        frame_index,
        ..Default::default()
    };
    for (gt_id, pixels) in frame.gt_pixels() {
        if pixels.len() < noise.min_pixels {
            continue;
        }
        let Some(object) = scene.object(gt_id) else {
            continue;
        };
        let distance = pixels
            .iter()
            .map(|&(u, v)| frame.depth_at(u as usize, v as usize))
            .sum::<f64>()
            / pixels.len() as f64;
        let p_drop = (noise.dropout_base + noise.dropout_per_meter * distance).min(1.0);
        if rng.random::<f64>() < p_drop {
            continue;
        }
        let (_, logits) = sample_class_and_logits(object.class_id, noise, rng);
        let probs = softmax_unchecked(&logits);
        // The detector reports the argmax of what it emits.
        let class_id = argmax(&logits);
        let score = probs[class_id];

        let gt_mask = Mask::from_pixels(pixels);
        let jitter = noise.mask_jitter_px as i32;
        let radius = if jitter > 0 {
            rng.random_range(-jitter..=jitter)
        } else {
            0
        };
        let mut mask = gt_mask.morph(radius, frame.width, frame.height);
        if mask.is_empty() {
            mask = gt_mask;
        }
        if score < noise.score_threshold {
            continue;
        }
        let bbox = mask.bbox().expect("mask is nonempty");
        out.detections.push(Detection {
            mask,
            bbox,
            class_id,
            logits,
            score,
        });
        out.diagnostic_gt_ids.push(gt_id);
    }
    out
}
