//! Training losses with analytic gradients.
//!
//! `detection_loss` combines an instance-matching triplet loss on feature
//! vectors, a soft-distillation cross-entropy against consistent logits, and
//! a head loss (classification, box regression, optional mask BCE):
//! `L = L_im + alpha * L_distill + L_head`.

use serde::{Deserialize, Serialize};

use crate::classes::ClassId;
use crate::error::{Error, Result};
use crate::math::{euclidean, log_softmax, softmax_unchecked};

/// Gradients with respect to each differentiable input. A field is empty when
/// the loss does not depend on that input.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Gradients {
    /// One row per feature vector.
    pub features: Vec<Vec<f64>>,
    /// One row per logit vector.
    pub logits: Vec<Vec<f64>>,
    /// One row per predicted box.
    pub boxes: Vec<[f64; 4]>,
    /// One row per predicted mask.
    pub mask_logits: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct LossValue {
    pub value: f64,
    pub grads: Gradients,
}

impl LossValue {
    pub fn zero() -> Self {
        Self::default()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    pub instance_uid: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogitsPrediction {
    pub logits: Vec<f64>,
    pub target_lambda_bar: Vec<f64>,
    pub target_class: ClassId,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TripletMining {
    /// Every valid (anchor, positive, negative) triple.
    #[default]
    BatchAll,
    /// Per anchor, only the farthest positive and the nearest negative.
    BatchHard,
}

fn check_features(features: &[FeatureVector]) -> Result<usize> {
    let dim = features.first().map_or(0, |f| f.values.len());
    for (i, f) in features.iter().enumerate() {
        if f.values.len() != dim {
            return Err(Error::InvalidFeatures(format!(
                "feature {i} has dimension {}, expected {dim}",
                f.values.len()
            )));
        }
        if f.values.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidFeatures(format!("feature {i} has a non-finite entry")));
        }
    }
    Ok(dim)
}

/// Accumulate the subgradient of one active term `d(a,p) - d(a,n) + margin`.
fn add_triplet_grad(grads: &mut [Vec<f64>], x: &[FeatureVector], a: usize, p: usize, n: usize, d: &[Vec<f64>], w: f64) {
    let dap = d[a][p];
    let dan = d[a][n];
    for k in 0..x[a].values.len() {
        let gp = if dap > 0.0 { (x[a].values[k] - x[p].values[k]) / dap } else { 0.0 };
        let gn = if dan > 0.0 { (x[a].values[k] - x[n].values[k]) / dan } else { 0.0 };
        grads[a][k] += w * (gp - gn);
        grads[p][k] -= w * gp;
        grads[n][k] += w * gn;
    }
}

/// Instance-matching triplet loss over Euclidean distances, averaged over the
/// active (positive-loss) terms.
pub fn triplet_loss(features: &[FeatureVector], margin: f64, mining: TripletMining) -> Result<LossValue> {
    let dim = check_features(features)?;
    let n = features.len();
    let zero = || LossValue {
        value: 0.0,
        grads: Gradients {
            features: vec![vec![0.0; dim]; n],
            ..Default::default()
        },
    };
    let d: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| euclidean(&features[i].values, &features[j].values)).collect())
        .collect();
    let same = |i: usize, j: usize| features[i].instance_uid == features[j].instance_uid;

    let mut active: Vec<(usize, usize, usize, f64)> = Vec::new();
    match mining {
        TripletMining::BatchAll => {
            for a in 0..n {
                for p in (0..n).filter(|&p| p != a && same(a, p)) {
                    for q in (0..n).filter(|&q| !same(a, q)) {
                        let l = d[a][p] - d[a][q] + margin;
                        if l > 0.0 {
                            active.push((a, p, q, l));
                        }
                    }
                }
            }
        }
        TripletMining::BatchHard => {
            for a in 0..n {
                // ties keep the lowest index
                let hardest_pos = (0..n)
                    .filter(|&p| p != a && same(a, p))
                    .fold(None, |best: Option<usize>, p| match best {
                        Some(b) if d[a][b] >= d[a][p] => Some(b),
                        _ => Some(p),
                    });
                let hardest_neg = (0..n)
                    .filter(|&q| !same(a, q))
                    .fold(None, |best: Option<usize>, q| match best {
                        Some(b) if d[a][b] <= d[a][q] => Some(b),
                        _ => Some(q),
                    });
                if let (Some(p), Some(q)) = (hardest_pos, hardest_neg) {
                    let l = d[a][p] - d[a][q] + margin;
                    if l > 0.0 {
                        active.push((a, p, q, l));
                    }
                }
            }
        }
    }
    if active.is_empty() {
        return Ok(zero());
    }
    let mut out = zero();
    let w = 1.0 / active.len() as f64;
    for &(a, p, q, l) in &active {
        out.value += l;
        add_triplet_grad(&mut out.grads.features, features, a, p, q, &d, w);
    }
    out.value *= w;
    Ok(out)
}

fn check_soft_target(i: usize, t: &[f64]) -> Result<()> {
    if t.iter().any(|&p| !p.is_finite() || p < 0.0) {
        return Err(Error::InvalidSoftTarget(format!("target {i} has a negative or non-finite entry")));
    }
    let s: f64 = t.iter().sum();
    if (s - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidSoftTarget(format!("target {i} sums to {s}")));
    }
    Ok(())
}

/// Soft-target cross-entropy `-sum_c t_c log softmax(z)_c`, averaged over the
/// batch.
pub fn distill_loss(preds: &[LogitsPrediction]) -> Result<LossValue> {
    if preds.is_empty() {
        return Err(Error::InvalidSoftTarget("empty batch".into()));
    }
    let b = preds.len() as f64;
    let mut out = LossValue::zero();
    for (i, p) in preds.iter().enumerate() {
        check_soft_target(i, &p.target_lambda_bar)?;
        if p.logits.len() != p.target_lambda_bar.len() || p.logits.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidLogits(format!("prediction {i} has malformed logits")));
        }
        let logp = log_softmax(&p.logits);
        let ce: f64 = p
            .target_lambda_bar
            .iter()
            .zip(&logp)
            .filter(|(t, _)| **t > 0.0)
            .map(|(t, l)| -t * l)
            .sum();
        out.value += ce / b;
        let sm = softmax_unchecked(&p.logits);
        out.grads
            .logits
            .push(sm.iter().zip(&p.target_lambda_bar).map(|(s, t)| (s - t) / b).collect());
    }
    Ok(out)
}

fn smooth_l1(x: f64) -> (f64, f64) {
    if x.abs() < 1.0 {
        (0.5 * x * x, x)
    } else {
        (x.abs() - 0.5, x.signum())
    }
}

/// Per-pixel mask logits with binary targets.
#[derive(Debug, Clone, Copy)]
pub struct MaskTerm<'a> {
    pub logits: &'a [f64],
    pub targets: &'a [bool],
}

/// Classification cross-entropy + smooth-L1 box regression, plus mean
/// per-pixel binary cross-entropy when `mask` is given. Boxes are
/// `(u_min, v_min, u_max, v_max)` normalised by image size.
pub fn head_loss(
    pred_logits: &[f64],
    pred_box: [f64; 4],
    target_class: ClassId,
    target_box: [f64; 4],
    mask: Option<MaskTerm<'_>>,
) -> Result<LossValue> {
    if target_box[0] > target_box[2] || target_box[1] > target_box[3] || target_box.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidBox(format!("target box {target_box:?} has min > max")));
    }
    if target_class >= pred_logits.len() || pred_logits.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidLogits(format!(
            "class {target_class} with {} logits",
            pred_logits.len()
        )));
    }
    if pred_box.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidBox(format!("predicted box {pred_box:?} is not finite")));
    }
    let mut out = LossValue::zero();

    let logp = log_softmax(pred_logits);
    out.value += -logp[target_class];
    let mut g = softmax_unchecked(pred_logits);
    g[target_class] -= 1.0;
    out.grads.logits.push(g);

    let mut gb = [0.0; 4];
    for k in 0..4 {
        let (v, dv) = smooth_l1(pred_box[k] - target_box[k]);
        out.value += v;
        gb[k] = dv;
    }
    out.grads.boxes.push(gb);

    if let Some(m) = mask {
        if m.logits.len() != m.targets.len() || m.logits.is_empty() {
            return Err(Error::InvalidLogits("mask logits and targets differ in length".into()));
        }
        let n = m.logits.len() as f64;
        let mut gm = Vec::with_capacity(m.logits.len());
        let mut bce = 0.0;
        for (&x, &t) in m.logits.iter().zip(m.targets) {
            let t = if t { 1.0 } else { 0.0 };
            bce += x.max(0.0) - x * t + (-x.abs()).exp().ln_1p();
            let sig = 1.0 / (1.0 + (-x).exp());
            gm.push((sig - t) / n);
        }
        out.value += bce / n;
        out.grads.mask_logits.push(gm);
    }
    Ok(out)
}

fn add_rows<T: Clone>(dst: &mut Vec<T>, src: &[T], add: impl Fn(&mut T, &T)) -> Result<()> {
    if src.is_empty() {
        return Ok(());
    }
    if dst.is_empty() {
        dst.extend_from_slice(src);
        return Ok(());
    }
    if dst.len() != src.len() {
        return Err(Error::Internal(format!(
            "gradient row counts differ: {} vs {}",
            dst.len(),
            src.len()
        )));
    }
    for (d, s) in dst.iter_mut().zip(src) {
        add(d, s);
    }
    Ok(())
}

fn scaled(l: &LossValue, w: f64) -> LossValue {
    let sv = |rows: &[Vec<f64>]| rows.iter().map(|r| r.iter().map(|x| w * x).collect()).collect();
    LossValue {
        value: w * l.value,
        grads: Gradients {
            features: sv(&l.grads.features),
            logits: sv(&l.grads.logits),
            boxes: l.grads.boxes.iter().map(|b| b.map(|x| w * x)).collect(),
            mask_logits: sv(&l.grads.mask_logits),
        },
    }
}

/// `im + alpha * distill + head`, values and gradients alike.
pub fn detection_loss(im: &LossValue, distill: &LossValue, head: &LossValue, alpha: f64) -> Result<LossValue> {
    if !(alpha >= 0.0) {
        return Err(Error::InvalidConfig(format!("alpha must be >= 0, got {alpha}")));
    }
    let mut out = im.clone();
    for part in [scaled(distill, alpha), head.clone()] {
        out.value += part.value;
        let vec_add = |d: &mut Vec<f64>, s: &Vec<f64>| {
            for (a, b) in d.iter_mut().zip(s) {
                *a += b;
            }
        };
        add_rows(&mut out.grads.features, &part.grads.features, vec_add)?;
        add_rows(&mut out.grads.logits, &part.grads.logits, vec_add)?;
        add_rows(&mut out.grads.mask_logits, &part.grads.mask_logits, vec_add)?;
        add_rows(&mut out.grads.boxes, &part.grads.boxes, |d, s| {
            for k in 0..4 {
                d[k] += s[k];
            }
        })?;
    }
    Ok(out)
}
