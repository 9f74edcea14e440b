//! mAP@50 against synthetic ground truth, plus class-consistency diagnostics.
//!
//! Ground truth per frame is the minimal box around each object's visible
//! pixels. Objects with fewer than `min_gt_pixels` visible pixels are treated
//! as ignore regions: a prediction that lands on one counts neither as a hit
//! nor as a false positive. Predictions from all frames are ranked together;
//! matching happens within each frame.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::classes::{ClassId, NUM_CLASSES};
use crate::error::{Error, Result};
use crate::explore::Trajectory;
use crate::mask::BBox;
use crate::reproject::PseudoDataset;
use crate::scene::SceneSpec;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoredBox {
    pub bbox: BBox,
    pub score: f64,
}

/// A class-tagged scored box in one frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub class_id: ClassId,
    pub bbox: BBox,
    pub score: f64,
}

/// Intersection over union of inclusive pixel boxes.
pub fn iou(a: &BBox, b: &BBox) -> Result<f64> {
    a.validate()?;
    b.validate()?;
    Ok(iou_unchecked(a, b))
}

fn iou_unchecked(a: &BBox, b: &BBox) -> f64 {
    let iw = (a.u_max.min(b.u_max) as i64 - a.u_min.max(b.u_min) as i64 + 1).max(0) as u64;
    let ih = (a.v_max.min(b.v_max) as i64 - a.v_min.max(b.v_min) as i64 + 1).max(0) as u64;
    let inter = iw * ih;
    if inter == 0 {
        return 0.0;
    }
    inter as f64 / (a.area() + b.area() - inter) as f64
}

/// One frame's input to pooled AP for a single class.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ApImage {
    pub preds: Vec<ScoredBox>,
    pub gts: Vec<BBox>,
    /// Regions whose predictions are neither hits nor false positives.
    pub ignored: Vec<BBox>,
}

/// Ranked match outcome of one prediction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatchOutcome {
    TruePositive,
    FalsePositive,
    Ignored,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ApResult {
    /// `None` when there is no ground truth.
    pub ap: Option<f64>,
    pub tp: usize,
    pub fp: usize,
    pub num_gt: usize,
    /// Outcomes in ranked order (descending score, ties by input order).
    pub ranked: Vec<MatchOutcome>,
}

/// Greedy matching in global score order, then all-points interpolated AP.
pub fn pooled_average_precision(images: &[ApImage], iou_thresh: f64) -> ApResult {
    let mut order: Vec<(usize, usize)> = images
        .iter()
        .enumerate()
        .flat_map(|(i, im)| (0..im.preds.len()).map(move |j| (i, j)))
        .collect();
    // stable: equal scores keep input order
    order.sort_by(|&(ia, ja), &(ib, jb)| images[ib].preds[jb].score.total_cmp(&images[ia].preds[ja].score));

    let mut taken: Vec<Vec<bool>> = images.iter().map(|im| vec![false; im.gts.len()]).collect();
    let mut ranked = Vec::with_capacity(order.len());
    for (i, j) in order {
        let p = &images[i].preds[j].bbox;
        let mut best: Option<(f64, usize)> = None;
        for (g, gt) in images[i].gts.iter().enumerate() {
            if taken[i][g] {
                continue;
            }
            let o = iou_unchecked(p, gt);
            if o >= iou_thresh && best.is_none_or(|(bo, _)| o > bo) {
                best = Some((o, g));
            }
        }
        let outcome = match best {
            Some((_, g)) => {
                taken[i][g] = true;
                MatchOutcome::TruePositive
            }
            None if images[i].ignored.iter().any(|ig| iou_unchecked(p, ig) >= iou_thresh) => MatchOutcome::Ignored,
            None => MatchOutcome::FalsePositive,
        };
        ranked.push(outcome);
    }

    let num_gt: usize = images.iter().map(|im| im.gts.len()).sum();
    let tp = ranked.iter().filter(|o| **o == MatchOutcome::TruePositive).count();
    let fp = ranked.iter().filter(|o| **o == MatchOutcome::FalsePositive).count();
    let ap = (num_gt > 0).then(|| ap_from_ranked(&ranked, num_gt));
    ApResult { ap, tp, fp, num_gt, ranked }
}

fn ap_from_ranked(ranked: &[MatchOutcome], num_gt: usize) -> f64 {
    let mut recall = Vec::new();
    let mut precision = Vec::new();
    let (mut tp, mut fp) = (0usize, 0usize);
    for o in ranked {
        match o {
            MatchOutcome::TruePositive => tp += 1,
            MatchOutcome::FalsePositive => fp += 1,
            MatchOutcome::Ignored => continue,
        }
        recall.push(tp as f64 / num_gt as f64);
        precision.push(tp as f64 / (tp + fp) as f64);
    }
    // precision envelope, right to left
    for i in (0..precision.len().saturating_sub(1)).rev() {
        precision[i] = precision[i].max(precision[i + 1]);
    }
    let mut ap = 0.0;
    let mut prev_r = 0.0;
    for (r, p) in recall.iter().zip(&precision) {
        if *r > prev_r {
            ap += (r - prev_r) * p;
            prev_r = *r;
        }
    }
    ap
}

/// Single-image AP for one class; `None` when `gts` is empty.
pub fn average_precision(preds: &[ScoredBox], gts: &[BBox], iou_thresh: f64) -> Option<f64> {
    let image = ApImage {
        preds: preds.to_vec(),
        gts: gts.to_vec(),
        ignored: Vec::new(),
    };
    pooled_average_precision(&[image], iou_thresh).ap
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    pub iou_threshold: f64,
    /// Visible-pixel count below which an object is an ignore region.
    pub min_gt_pixels: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            iou_threshold: 0.5,
            min_gt_pixels: 50,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ClassCounts {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

/// Fraction of objects whose labels disagree on class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyStats {
    /// Over raw detections, grouped by the object that produced them.
    pub disagreeing_before: f64,
    pub objects_before: usize,
    /// Over pseudo-labels, grouped by the object under most of their pixels.
    pub disagreeing_after: f64,
    pub objects_after: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// `None` for classes without ground truth.
    pub per_class_ap: [Option<f64>; NUM_CLASSES],
    /// Mean of `per_class_ap` over classes with ground truth; 0 when none has.
    pub map50: f64,
    pub counts: [ClassCounts; NUM_CLASSES],
    pub num_predictions: usize,
    pub num_gt: usize,
    pub consistency_stats: Option<ConsistencyStats>,
}

/// Ground truth of one frame: `(class, box, ignored)` per visible object.
pub fn frame_ground_truth(
    frame: &crate::scene::FrameObservation,
    scene: &SceneSpec,
    min_gt_pixels: usize,
) -> Vec<(ClassId, BBox, bool)> {
    frame
        .gt_pixels()
        .into_iter()
        .filter_map(|(id, px)| {
            let class = scene.object(id)?.class_id;
            let bbox = crate::mask::Mask::from_pixels(px.clone()).bbox().ok()?;
            Some((class, bbox, px.len() < min_gt_pixels))
        })
        .collect()
}

/// Score per-frame predictions against the trajectory's ground truth.
pub fn evaluate_predictions(
    preds: &[Vec<Prediction>],
    trajectory: &Trajectory,
    scene: &SceneSpec,
    cfg: &EvalConfig,
) -> Result<EvalReport> {
    if preds.len() != trajectory.len() {
        return Err(Error::DatasetMismatch {
            labels: preds.len(),
            frames: trajectory.len(),
        });
    }
    let mut per_class: Vec<Vec<ApImage>> = vec![Vec::with_capacity(preds.len()); NUM_CLASSES];
    for (frame_preds, step) in preds.iter().zip(&trajectory.steps) {
        let mut images: Vec<ApImage> = vec![ApImage::default(); NUM_CLASSES];
        for (class, bbox, ignored) in frame_ground_truth(&step.frame, scene, cfg.min_gt_pixels) {
            if ignored {
                images[class].ignored.push(bbox);
            } else {
                images[class].gts.push(bbox);
            }
        }
        for p in frame_preds {
            if p.class_id >= NUM_CLASSES {
                return Err(Error::Internal(format!("prediction with class {}", p.class_id)));
            }
            images[p.class_id].preds.push(ScoredBox { bbox: p.bbox, score: p.score });
        }
        for (c, im) in images.into_iter().enumerate() {
            per_class[c].push(im);
        }
    }

    let mut per_class_ap = [None; NUM_CLASSES];
    let mut counts = [ClassCounts::default(); NUM_CLASSES];
    let mut num_gt = 0;
    for c in 0..NUM_CLASSES {
        let r = pooled_average_precision(&per_class[c], cfg.iou_threshold);
        per_class_ap[c] = r.ap;
        counts[c] = ClassCounts { tp: r.tp, fp: r.fp, fn_: r.num_gt - r.tp };
        num_gt += r.num_gt;
    }
    let present: Vec<f64> = per_class_ap.iter().flatten().copied().collect();
    let map50 = if present.is_empty() { 0.0 } else { present.iter().sum::<f64>() / present.len() as f64 };
    Ok(EvalReport {
        per_class_ap,
        map50,
        counts,
        num_predictions: preds.iter().map(Vec::len).sum(),
        num_gt,
        consistency_stats: None,
    })
}

/// Pseudo-labels as predictions, ranked by `max(lambda_bar)`.
pub fn pseudo_label_predictions(dataset: &PseudoDataset) -> Vec<Vec<Prediction>> {
    dataset
        .frames
        .iter()
        .map(|f| {
            f.iter()
                .map(|l| Prediction { class_id: l.class_id, bbox: l.bbox, score: l.score() })
                .collect()
        })
        .collect()
}

/// Raw detector output as predictions, ranked by detector score.
pub fn raw_detection_predictions(trajectory: &Trajectory) -> Vec<Vec<Prediction>> {
    trajectory
        .steps
        .iter()
        .map(|s| {
            s.detections
                .detections
                .iter()
                .map(|d| Prediction { class_id: d.class_id, bbox: d.bbox, score: d.score })
                .collect()
        })
        .collect()
}

pub fn evaluate_pseudo_labels(
    dataset: &PseudoDataset,
    trajectory: &Trajectory,
    scene: &SceneSpec,
    cfg: &EvalConfig,
) -> Result<EvalReport> {
    let mut report = evaluate_predictions(&pseudo_label_predictions(dataset), trajectory, scene, cfg)?;
    report.consistency_stats = Some(consistency_stats(trajectory, dataset)?);
    Ok(report)
}

pub fn evaluate_raw_detections(trajectory: &Trajectory, scene: &SceneSpec, cfg: &EvalConfig) -> Result<EvalReport> {
    evaluate_predictions(&raw_detection_predictions(trajectory), trajectory, scene, cfg)
}

fn disagreeing_fraction(groups: &BTreeMap<u32, BTreeSet<ClassId>>) -> f64 {
    if groups.is_empty() {
        return 0.0;
    }
    groups.values().filter(|s| s.len() > 1).count() as f64 / groups.len() as f64
}

/// Class disagreement per object before consensus (raw detections, via the
/// detector's diagnostic object ids) and after (pseudo-labels, via the
/// object under the majority of each mask's pixels).
pub fn consistency_stats(trajectory: &Trajectory, dataset: &PseudoDataset) -> Result<ConsistencyStats> {
    if dataset.len() != trajectory.len() {
        return Err(Error::DatasetMismatch {
            labels: dataset.len(),
            frames: trajectory.len(),
        });
    }
    let mut before: BTreeMap<u32, BTreeSet<ClassId>> = BTreeMap::new();
    for step in &trajectory.steps {
        for (d, gt) in step.detections.detections.iter().zip(&step.detections.diagnostic_gt_ids) {
            before.entry(*gt).or_default().insert(d.class_id);
        }
    }
    let mut after: BTreeMap<u32, BTreeSet<ClassId>> = BTreeMap::new();
    for (labels, step) in dataset.frames.iter().zip(&trajectory.steps) {
        for l in labels {
            if let Some(gt) = majority_gt(&step.frame, l.mask.pixels()) {
                after.entry(gt).or_default().insert(l.class_id);
            }
        }
    }
    Ok(ConsistencyStats {
        disagreeing_before: disagreeing_fraction(&before),
        objects_before: before.len(),
        disagreeing_after: disagreeing_fraction(&after),
        objects_after: after.len(),
    })
}

/// Object id under most of `pixels` (ties to the lower id); `None` when most
/// pixels show no object.
pub fn majority_gt(frame: &crate::scene::FrameObservation, pixels: &[(u32, u32)]) -> Option<u32> {
    let mut votes: BTreeMap<Option<u32>, usize> = BTreeMap::new();
    for &(u, v) in pixels {
        *votes.entry(frame.gt_instance[frame.index(u as usize, v as usize)]).or_default() += 1;
    }
    let mut best: Option<(usize, Option<u32>)> = None;
    for (id, n) in votes {
        if best.is_none_or(|(bn, _)| n > bn) {
            best = Some((n, id));
        }
    }
    best.and_then(|(_, id)| id)
}

/// One CSV row per pipeline run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub policy: String,
    pub alpha: f64,
    pub seed: u64,
    pub map50: f64,
    pub ap_0: Option<f64>,
    pub ap_1: Option<f64>,
    pub ap_2: Option<f64>,
    pub ap_3: Option<f64>,
    pub ap_4: Option<f64>,
    pub ap_5: Option<f64>,
    pub raw_map50: f64,
    /// `map50 - raw_map50`, as a fraction (0.01 is one mAP point).
    pub improvement: f64,
}

impl EvalRow {
    pub fn new(policy: &str, alpha: f64, seed: u64, pseudo: &EvalReport, raw: &EvalReport) -> Self {
        let ap = pseudo.per_class_ap;
        Self {
            policy: policy.to_string(),
            alpha,
            seed,
            map50: pseudo.map50,
            ap_0: ap[0],
            ap_1: ap[1],
            ap_2: ap[2],
            ap_3: ap[3],
            ap_4: ap[4],
            ap_5: ap[5],
            raw_map50: raw.map50,
            improvement: pseudo.map50 - raw.map50,
        }
    }
}

/// Write rows with a header line.
pub fn write_eval_csv<W: std::io::Write>(rows: &[EvalRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

pub fn read_eval_csv<R: std::io::Read>(input: R) -> Result<Vec<EvalRow>> {
    let mut r = csv::Reader::from_reader(input);
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn b(u0: u32, v0: u32, u1: u32, v1: u32) -> BBox {
        BBox::new(u0, v0, u1, v1).unwrap()
    }

    fn sb(bbox: BBox, score: f64) -> ScoredBox {
        ScoredBox { bbox, score }
    }

    #[test]
    fn iou_examples() {
        assert_eq!(iou(&b(0, 0, 3, 3), &b(0, 0, 3, 3)).unwrap(), 1.0);
        assert_eq!(iou(&b(0, 0, 1, 1), &b(5, 5, 6, 6)).unwrap(), 0.0);
        assert!((iou(&b(0, 0, 1, 1), &b(1, 1, 2, 2)).unwrap() - 1.0 / 7.0).abs() < 1e-15);
        let bad = BBox { u_min: 3, v_min: 0, u_max: 1, v_max: 1 };
        assert!(matches!(iou(&bad, &b(0, 0, 1, 1)), Err(Error::InvalidBox(_))));
    }

    #[test]
    fn ap_examples() {
        let g = b(10, 10, 20, 20);
        assert_eq!(average_precision(&[sb(g, 0.9)], &[g], 0.5), Some(1.0));
        // TP then FP: PR points (1, 1), (0.5, 1)
        assert_eq!(average_precision(&[sb(g, 0.9), sb(b(50, 50, 60, 60), 0.8)], &[g], 0.5), Some(1.0));
        // FP ranked first halves the precision at full recall
        assert_eq!(average_precision(&[sb(g, 0.7), sb(b(50, 50, 60, 60), 0.8)], &[g], 0.5), Some(0.5));
        assert_eq!(average_precision(&[sb(g, 0.9)], &[], 0.5), None);
        assert_eq!(average_precision(&[], &[g], 0.5), Some(0.0));
    }

    #[test]
    fn duplicates_are_false_positives() {
        let g = b(10, 10, 20, 20);
        let r = pooled_average_precision(&[ApImage { preds: vec![sb(g, 0.9), sb(g, 0.8)], gts: vec![g], ignored: vec![] }], 0.5);
        assert_eq!((r.tp, r.fp), (1, 1));
    }

    #[test]
    fn ignored_regions_absorb_predictions() {
        let g = b(10, 10, 20, 20);
        let ig = b(40, 40, 45, 45);
        let im = ApImage { preds: vec![sb(ig, 0.95), sb(g, 0.9)], gts: vec![g], ignored: vec![ig] };
        let r = pooled_average_precision(&[im], 0.5);
        assert_eq!(r.ap, Some(1.0));
        assert_eq!(r.ranked, vec![MatchOutcome::Ignored, MatchOutcome::TruePositive]);
    }

    #[test]
    fn matching_does_not_cross_images() {
        let g = b(10, 10, 20, 20);
        let images = [
            ApImage { preds: vec![sb(g, 0.9)], gts: vec![], ignored: vec![] },
            ApImage { preds: vec![], gts: vec![g], ignored: vec![] },
        ];
        assert_eq!(pooled_average_precision(&images, 0.5).ap, Some(0.0));
    }

    /// Walk the PR curve point by point and integrate the interpolated
    /// precision at each distinct recall level.
    fn brute_force_ap(preds: &[ScoredBox], gts: &[BBox], thresh: f64) -> Option<f64> {
        if gts.is_empty() {
            return None;
        }
        let mut idx: Vec<usize> = (0..preds.len()).collect();
        idx.sort_by(|&a, &b| preds[b].score.partial_cmp(&preds[a].score).unwrap().then(a.cmp(&b)));
        let mut used = vec![false; gts.len()];
        let mut points: Vec<(f64, f64)> = Vec::new();
        let mut tp = 0;
        for (rank, &i) in idx.iter().enumerate() {
            let mut cands: Vec<(f64, usize)> = gts
                .iter()
                .enumerate()
                .filter(|(g, _)| !used[*g])
                .map(|(g, gt)| (iou(&preds[i].bbox, gt).unwrap(), g))
                .filter(|(o, _)| *o >= thresh)
                .collect();
            cands.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
            if let Some(&(_, g)) = cands.first() {
                used[g] = true;
                tp += 1;
            }
            points.push((tp as f64 / gts.len() as f64, tp as f64 / (rank + 1) as f64));
        }
        let mut levels: Vec<f64> = points.iter().map(|p| p.0).filter(|r| *r > 0.0).collect();
        levels.dedup();
        let mut ap = 0.0;
        let mut prev = 0.0;
        for r in levels {
            let p = points.iter().filter(|q| q.0 >= r).map(|q| q.1).fold(0.0, f64::max);
            ap += (r - prev) * p;
            prev = r;
        }
        Some(ap)
    }

    fn random_box(rng: &mut ChaCha8Rng) -> BBox {
        let u0 = rng.random_range(0..30);
        let v0 = rng.random_range(0..30);
        b(u0, v0, u0 + rng.random_range(0..12), v0 + rng.random_range(0..12))
    }

    #[test]
    fn ap_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..300 {
            let gts: Vec<BBox> = (0..rng.random_range(0..8)).map(|_| random_box(&mut rng)).collect();
            let mut preds: Vec<ScoredBox> = Vec::new();
            for _ in 0..rng.random_range(0..12) {
                let bbox = if !gts.is_empty() && rng.random_bool(0.5) {
                    gts[rng.random_range(0..gts.len())]
                } else {
                    random_box(&mut rng)
                };
                // coarse scores to exercise ties
                preds.push(sb(bbox, rng.random_range(0..5) as f64 / 4.0));
            }
            let got = average_precision(&preds, &gts, 0.5);
            let want = brute_force_ap(&preds, &gts, 0.5);
            match (got, want) {
                (Some(a), Some(b)) => assert!((a - b).abs() < 1e-12, "{a} vs {b}"),
                (a, b) => assert_eq!(a, b),
            }
        }
    }

    #[test]
    fn csv_round_trip_and_header() {
        let rep = EvalReport {
            per_class_ap: [Some(0.5), None, Some(1.0), Some(0.25), None, Some(0.0)],
            map50: 0.4375,
            counts: Default::default(),
            num_predictions: 0,
            num_gt: 0,
            consistency_stats: None,
        };
        let raw = EvalReport { map50: 0.4, ..rep.clone() };
        let row = EvalRow::new("frontier", 0.7, 3, &rep, &raw);
        let mut buf = Vec::new();
        write_eval_csv(std::slice::from_ref(&row), &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("policy,alpha,seed,map50,ap_0,ap_1,ap_2,ap_3,ap_4,ap_5,raw_map50,improvement\n"));
        assert_eq!(read_eval_csv(buf.as_slice()).unwrap(), vec![row]);
    }

    proptest! {
        #[test]
        fn iou_is_symmetric(a in (0u32..50, 0u32..50, 0u32..20, 0u32..20), c in (0u32..50, 0u32..50, 0u32..20, 0u32..20)) {
            let x = b(a.0, a.1, a.0 + a.2, a.1 + a.3);
            let y = b(c.0, c.1, c.0 + c.2, c.1 + c.3);
            let o = iou(&x, &y).unwrap();
            prop_assert_eq!(o, iou(&y, &x).unwrap());
            prop_assert!((0.0..=1.0).contains(&o));
        }

        #[test]
        fn top_ranked_fp_never_helps(seed in 0u64..500) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let gts: Vec<BBox> = (0..rng.random_range(1..6)).map(|_| random_box(&mut rng)).collect();
            let preds: Vec<ScoredBox> = (0..rng.random_range(0..10)).map(|_| sb(random_box(&mut rng), rng.random_range(0.0..1.0))).collect();
            let base = average_precision(&preds, &gts, 0.5).unwrap();
            // a box far from every gt, scored above all others
            let mut with_fp = preds.clone();
            with_fp.push(sb(b(200, 200, 205, 205), 2.0));
            prop_assert!(average_precision(&with_fp, &gts, 0.5).unwrap() <= base + 1e-15);

            // removing any FP never lowers AP
            let r = pooled_average_precision(&[ApImage { preds: preds.clone(), gts: gts.clone(), ignored: vec![] }], 0.5);
            let mut order: Vec<usize> = (0..preds.len()).collect();
            order.sort_by(|&a, &b| preds[b].score.total_cmp(&preds[a].score));
            for (rank, &i) in order.iter().enumerate() {
                if r.ranked[rank] == MatchOutcome::FalsePositive {
                    let mut fewer = preds.clone();
                    fewer.remove(i);
                    prop_assert!(average_precision(&fewer, &gts, 0.5).unwrap() >= base - 1e-15);
                }
            }
        }

        /// Ground truths sit 50 px apart so no box can reach the threshold
        /// against two of them; otherwise a duplicate may rightly match a
        /// second object.
        #[test]
        fn lower_scored_duplicates_never_help(seed in 0u64..500) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let shift = |bb: BBox, k: u32| b(bb.u_min + 50 * k, bb.v_min, bb.u_max + 50 * k, bb.v_max);
            let n_gt = rng.random_range(1..6);
            let gts: Vec<BBox> = (0..n_gt).map(|k| shift(random_box(&mut rng), k)).collect();
            let preds: Vec<ScoredBox> = (0..rng.random_range(1..10))
                .map(|_| sb(shift(random_box(&mut rng), rng.random_range(0..n_gt)), rng.random_range(0.5..1.0)))
                .collect();
            let base = average_precision(&preds, &gts, 0.5).unwrap();
            let mut dup = preds.clone();
            dup.extend(preds.iter().map(|p| sb(p.bbox, p.score - 0.5)));
            prop_assert!(average_precision(&dup, &gts, 0.5).unwrap() <= base + 1e-15);
        }
    }
}
