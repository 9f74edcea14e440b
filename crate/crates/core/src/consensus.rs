//! Semantic voxel map with multi-view consensus.
//!
//! Detections are lifted into world space and every voxel keeps the full list
//! of detections that hit it. Resolution assigns each voxel the class of its
//! single highest-scoring observation; voxels that share a class and touch
//! through any face, edge or corner are grouped into object instances; each
//! instance gets the mean of the softmaxed logits of the detections that
//! contributed to it.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classes::{ClassId, NUM_CLASSES};
use crate::detector::Detection;
use crate::error::{Error, Result};
use crate::explore::Trajectory;
use crate::math::{argmax, softmax_unchecked};
use crate::scene::{pixel_to_world_unchecked, CameraIntrinsics, FrameObservation};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(from = "[i32; 3]", into = "[i32; 3]")]
pub struct VoxelKey {
    pub ix: i32,
    pub iy: i32,
    pub iz: i32,
}

impl From<[i32; 3]> for VoxelKey {
    fn from([ix, iy, iz]: [i32; 3]) -> Self {
        Self { ix, iy, iz }
    }
}

impl From<VoxelKey> for [i32; 3] {
    fn from(k: VoxelKey) -> Self {
        [k.ix, k.iy, k.iz]
    }
}

impl VoxelKey {
    pub fn new(ix: i32, iy: i32, iz: i32) -> Self {
        Self { ix, iy, iz }
    }

    pub fn from_point(p: [f64; 3], voxel_size: f64) -> Self {
        Self {
            ix: (p[0] / voxel_size).floor() as i32,
            iy: (p[1] / voxel_size).floor() as i32,
            iz: (p[2] / voxel_size).floor() as i32,
        }
    }

    pub fn center(&self, voxel_size: f64) -> [f64; 3] {
        [
            (self.ix as f64 + 0.5) * voxel_size,
            (self.iy as f64 + 0.5) * voxel_size,
            (self.iz as f64 + 0.5) * voxel_size,
        ]
    }

    /// The 26 face, edge and corner neighbours.
    pub fn neighbors26(self) -> impl Iterator<Item = VoxelKey> {
        (-1..=1).flat_map(move |dx| {
            (-1..=1).flat_map(move |dy| {
                (-1..=1).filter_map(move |dz| {
                    (dx != 0 || dy != 0 || dz != 0).then(|| VoxelKey::new(self.ix + dx, self.iy + dy, self.iz + dz))
                })
            })
        })
    }
}

/// Identifies one detection: `(frame index, index within the frame)`.
pub type DetectionRef = (u32, u32);

/// Logits and score of one detection, stored once and shared by all voxels
/// the detection touches.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionEvidence {
    pub logits: [f64; NUM_CLASSES],
    pub score: f64,
}

impl DetectionEvidence {
    pub fn class(&self) -> ClassId {
        argmax(&self.logits)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct VoxelRecord {
    /// One entry per lifted mask pixel that landed in this voxel.
    pub observations: Vec<DetectionRef>,
    pub resolved_class: Option<ClassId>,
    pub instance_id: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceRecord {
    pub u: u32,
    pub class_id: ClassId,
    /// Sorted member voxels.
    pub voxels: Vec<VoxelKey>,
    pub consistent_logits: [f64; NUM_CLASSES],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResolutionRule {
    /// Class of the single observation with the highest score.
    #[default]
    MaxScore,
    /// Argmax of the summed softmax over the voxel's distinct detections.
    SummedMass,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VoxelMapConfig {
    pub voxel_size: f64,
    pub min_instance_voxels: usize,
    pub rule: ResolutionRule,
}

impl Default for VoxelMapConfig {
    fn default() -> Self {
        Self {
            voxel_size: 0.05,
            min_instance_voxels: 5,
            rule: ResolutionRule::MaxScore,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SemanticVoxelMap {
    pub voxel_size: f64,
    pub voxels: BTreeMap<VoxelKey, VoxelRecord>,
    pub evidence: BTreeMap<DetectionRef, DetectionEvidence>,
    pub instances: BTreeMap<u32, InstanceRecord>,
    resolved: bool,
}

impl SemanticVoxelMap {
    pub fn new(voxel_size: f64) -> Self {
        Self {
            voxel_size,
            voxels: BTreeMap::new(),
            evidence: BTreeMap::new(),
            instances: BTreeMap::new(),
            resolved: false,
        }
    }

    pub fn is_resolved(&self) -> bool {
        self.resolved
    }

    pub fn observation_count(&self) -> usize {
        self.voxels.values().map(|v| v.observations.len()).sum()
    }

    /// Append another partial map. Observation lists are concatenated, so
    /// merging is commutative up to list order.
    pub fn merge(&mut self, other: SemanticVoxelMap) {
        for (k, rec) in other.voxels {
            self.voxels.entry(k).or_default().observations.extend(rec.observations);
        }
        self.evidence.extend(other.evidence);
        self.resolved = false;
    }

    pub fn instance(&self, u: u32) -> Option<&InstanceRecord> {
        self.instances.get(&u)
    }
}

/// Lift every mask pixel with valid depth and append the detection to the
/// voxel it lands in.
pub fn accumulate_frame(
    map: &mut SemanticVoxelMap,
    frame_index: usize,
    frame: &FrameObservation,
    detections: &[Detection],
    k: &CameraIntrinsics,
) {
    for (det_index, det) in detections.iter().enumerate() {
        let id: DetectionRef = (frame_index as u32, det_index as u32);
        map.evidence.insert(
            id,
            DetectionEvidence {
                logits: det.logits,
                score: det.score,
            },
        );
        for &(u, v) in det.mask.pixels() {
            let d = frame.depth_at(u as usize, v as usize);
            if d <= 0.0 {
                continue;
            }
            let p = pixel_to_world_unchecked(u as f64, v as f64, d, k, &frame.pose);
            let key = VoxelKey::from_point(p, map.voxel_size);
            map.voxels.entry(key).or_default().observations.push(id);
        }
    }
    map.resolved = false;
}

/// Accumulate a whole trajectory, one partial map per frame, merged in frame
/// order.
pub fn accumulate_trajectory(trajectory: &Trajectory, voxel_size: f64, k: &CameraIntrinsics) -> SemanticVoxelMap {
    trajectory
        .steps
        .par_iter()
        .enumerate()
        .map(|(i, step)| {
            let mut partial = SemanticVoxelMap::new(voxel_size);
            accumulate_frame(&mut partial, i, &step.frame, &step.detections.detections, k);
            partial
        })
        .reduce(
            || SemanticVoxelMap::new(voxel_size),
            |mut a, b| {
                a.merge(b);
                a
            },
        )
}

fn resolve_one(observations: &[DetectionRef], evidence: &BTreeMap<DetectionRef, DetectionEvidence>, rule: ResolutionRule) -> Option<ClassId> {
    match rule {
        ResolutionRule::MaxScore => {
            // max score, then lowest class, then lowest (frame, detection)
            let mut best: Option<(f64, ClassId, DetectionRef)> = None;
            for &id in observations {
                let ev = evidence.get(&id)?;
                let cand = (ev.score, ev.class(), id);
                let better = match best {
                    None => true,
                    Some((s, c, r)) => cand.0 > s || (cand.0 == s && (cand.1, cand.2) < (c, r)),
                };
                if better {
                    best = Some(cand);
                }
            }
            best.map(|b| b.1)
        }
        ResolutionRule::SummedMass => {
            let distinct: BTreeSet<DetectionRef> = observations.iter().copied().collect();
            let mut mass = [0.0; NUM_CLASSES];
            for id in distinct {
                let p = softmax_unchecked(&evidence.get(&id)?.logits);
                for (m, q) in mass.iter_mut().zip(p) {
                    *m += q;
                }
            }
            (!observations.is_empty()).then(|| argmax(&mass))
        }
    }
}

/// Give every stored voxel a single hard label. Idempotent.
pub fn resolve_voxels(map: &mut SemanticVoxelMap, rule: ResolutionRule) -> Result<()> {
    for (key, rec) in map.voxels.iter_mut() {
        rec.resolved_class = Some(resolve_one(&rec.observations, &map.evidence, rule).ok_or_else(|| {
            Error::Internal(format!("voxel {key:?} has no resolvable observation"))
        })?);
    }
    map.resolved = true;
    Ok(())
}

/// Group resolved voxels into 26-connected single-class components, drop the
/// ones smaller than `min_instance_voxels`, and number the rest in order of
/// their smallest key. Also computes each instance's consistent logits.
pub fn extract_instances(map: &mut SemanticVoxelMap, min_instance_voxels: usize) -> Result<()> {
    if !map.resolved {
        return Err(Error::Internal("extract_instances called before resolve_voxels".into()));
    }
    let class_of: HashMap<VoxelKey, ClassId> = map
        .voxels
        .iter()
        .map(|(k, r)| (*k, r.resolved_class.expect("resolved")))
        .collect();
    let mut visited: HashMap<VoxelKey, bool> = HashMap::with_capacity(class_of.len());
    let mut components: Vec<(ClassId, Vec<VoxelKey>)> = Vec::new();

    for (&seed, rec) in &map.voxels {
        if visited.contains_key(&seed) {
            continue;
        }
        let class = rec.resolved_class.expect("resolved");
        visited.insert(seed, true);
        let mut queue = VecDeque::from([seed]);
        let mut members = Vec::new();
        while let Some(cur) = queue.pop_front() {
            members.push(cur);
            for nb in cur.neighbors26() {
                if class_of.get(&nb) == Some(&class) && !visited.contains_key(&nb) {
                    visited.insert(nb, true);
                    queue.push_back(nb);
                }
            }
        }
        members.sort_unstable();
        components.push((class, members));
    }

    for rec in map.voxels.values_mut() {
        rec.instance_id = None;
    }
    map.instances.clear();
    let mut next_u = 0u32;
    for (class_id, voxels) in components {
        if voxels.len() < min_instance_voxels.max(1) {
            continue;
        }
        let u = next_u;
        next_u += 1;
        for k in &voxels {
            map.voxels.get_mut(k).expect("member voxel").instance_id = Some(u);
        }
        let mut inst = InstanceRecord {
            u,
            class_id,
            voxels,
            consistent_logits: [0.0; NUM_CLASSES],
        };
        inst.consistent_logits = consistent_logits(&inst, map)?;
        map.instances.insert(u, inst);
    }
    Ok(())
}

/// Detections contributing to an instance, one entry per detection.
pub fn contributing_detections(instance: &InstanceRecord, map: &SemanticVoxelMap) -> BTreeSet<DetectionRef> {
    instance
        .voxels
        .iter()
        .filter_map(|k| map.voxels.get(k))
        .flat_map(|r| r.observations.iter().copied())
        .collect()
}

/// Mean of the softmaxed logits of every detection that touched the instance,
/// each detection counted once regardless of how many voxels it hit.
pub fn consistent_logits(instance: &InstanceRecord, map: &SemanticVoxelMap) -> Result<[f64; NUM_CLASSES]> {
    let q = contributing_detections(instance, map);
    if q.is_empty() {
        return Err(Error::Internal(format!("instance {} has no contributing detections", instance.u)));
    }
    let mut mean = [0.0; NUM_CLASSES];
    for id in &q {
        let ev = map
            .evidence
            .get(id)
            .ok_or_else(|| Error::Internal(format!("missing evidence for detection {id:?}")))?;
        for (m, p) in mean.iter_mut().zip(softmax_unchecked(&ev.logits)) {
            *m += p;
        }
    }
    let n = q.len() as f64;
    for m in &mut mean {
        *m /= n;
    }
    Ok(mean)
}

/// Resolve and extract in one call.
pub fn finalize(map: &mut SemanticVoxelMap, cfg: &VoxelMapConfig) -> Result<()> {
    resolve_voxels(map, cfg.rule)?;
    extract_instances(map, cfg.min_instance_voxels)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoxelDump {
    pub key: VoxelKey,
    pub resolved_class: Option<ClassId>,
    pub instance_id: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceDump {
    pub u: u32,
    pub class_id: ClassId,
    pub lambda_bar: [f64; NUM_CLASSES],
    pub voxel_count: usize,
}

/// Inspection dump of a finalised map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoxelMapDump {
    pub voxel_size: f64,
    pub voxels: Vec<VoxelDump>,
    pub instances: Vec<InstanceDump>,
}

impl From<&SemanticVoxelMap> for VoxelMapDump {
    fn from(map: &SemanticVoxelMap) -> Self {
        Self {
            voxel_size: map.voxel_size,
            voxels: map
                .voxels
                .iter()
                .map(|(k, r)| VoxelDump {
                    key: *k,
                    resolved_class: r.resolved_class,
                    instance_id: r.instance_id,
                })
                .collect(),
            instances: map
                .instances
                .values()
                .map(|i| InstanceDump {
                    u: i.u,
                    class_id: i.class_id,
                    lambda_bar: i.consistent_logits,
                    voxel_count: i.voxels.len(),
                })
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mask::Mask;
    use crate::scene::Pose;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn logits_for(class: ClassId, sharp: f64) -> [f64; NUM_CLASSES] {
        let mut l = [0.0; NUM_CLASSES];
        l[class] = sharp;
        l
    }

    fn score_of(l: &[f64; NUM_CLASSES]) -> f64 {
        softmax_unchecked(l).into_iter().fold(0.0, f64::max)
    }

    /// Map with hand-placed observations; each `(key, class, score)` is its own
    /// detection in frame `i`.
    fn map_with(obs: &[(VoxelKey, ClassId, f64)]) -> SemanticVoxelMap {
        let mut map = SemanticVoxelMap::new(0.05);
        for (i, &(key, class, score)) in obs.iter().enumerate() {
            let id = (i as u32, 0);
            map.evidence.insert(id, DetectionEvidence { logits: logits_for(class, 5.0), score });
            map.voxels.entry(key).or_default().observations.push(id);
        }
        map
    }

    #[test]
    fn max_score_rule() {
        let k = VoxelKey::new(0, 0, 0);
        let mut map = map_with(&[(k, 1, 0.9), (k, 2, 0.8)]);
        resolve_voxels(&mut map, ResolutionRule::MaxScore).unwrap();
        assert_eq!(map.voxels[&k].resolved_class, Some(1));
    }

    #[test]
    fn equal_scores_pick_lower_class() {
        let k = VoxelKey::new(0, 0, 0);
        let mut map = map_with(&[(k, 5, 0.7), (k, 2, 0.7)]);
        resolve_voxels(&mut map, ResolutionRule::MaxScore).unwrap();
        assert_eq!(map.voxels[&k].resolved_class, Some(2));
        // idempotent
        let before = map.clone();
        resolve_voxels(&mut map, ResolutionRule::MaxScore).unwrap();
        assert_eq!(map, before);
    }

    #[test]
    fn summed_mass_rule_counts_each_detection_once() {
        let k = VoxelKey::new(0, 0, 0);
        let mut map = map_with(&[(k, 1, 0.99), (k, 2, 0.8), (k, 2, 0.8)]);
        resolve_voxels(&mut map, ResolutionRule::SummedMass).unwrap();
        assert_eq!(map.voxels[&k].resolved_class, Some(2));
        // the same single detection repeated many times does not outvote two
        let mut map = map_with(&[(k, 2, 0.8), (k, 2, 0.8)]);
        for _ in 0..10 {
            map.voxels.get_mut(&k).unwrap().observations.push((99, 0));
        }
        map.evidence.insert((99, 0), DetectionEvidence { logits: logits_for(1, 5.0), score: 0.99 });
        resolve_voxels(&mut map, ResolutionRule::SummedMass).unwrap();
        assert_eq!(map.voxels[&k].resolved_class, Some(2));
    }

    #[test]
    fn diagonal_neighbors_join() {
        let mut map = map_with(&[(VoxelKey::new(0, 0, 0), 1, 0.9), (VoxelKey::new(1, 1, 1), 1, 0.9)]);
        resolve_voxels(&mut map, ResolutionRule::MaxScore).unwrap();
        extract_instances(&mut map, 1).unwrap();
        assert_eq!(map.instances.len(), 1);

        let mut map = map_with(&[(VoxelKey::new(0, 0, 0), 1, 0.9), (VoxelKey::new(2, 0, 0), 1, 0.9)]);
        resolve_voxels(&mut map, ResolutionRule::MaxScore).unwrap();
        extract_instances(&mut map, 1).unwrap();
        assert_eq!(map.instances.len(), 2);
    }

    #[test]
    fn different_classes_do_not_join() {
        let mut map = map_with(&[(VoxelKey::new(0, 0, 0), 1, 0.9), (VoxelKey::new(1, 0, 0), 2, 0.9)]);
        resolve_voxels(&mut map, ResolutionRule::MaxScore).unwrap();
        extract_instances(&mut map, 1).unwrap();
        assert_eq!(map.instances.len(), 2);
    }

    #[test]
    fn small_components_are_dropped() {
        let obs: Vec<_> = (0..4).map(|i| (VoxelKey::new(i, 0, 0), 3, 0.9)).collect();
        let mut map = map_with(&obs);
        resolve_voxels(&mut map, ResolutionRule::MaxScore).unwrap();
        extract_instances(&mut map, 5).unwrap();
        assert!(map.instances.is_empty());
        assert!(map.voxels.values().all(|v| v.instance_id.is_none()));
        extract_instances(&mut map, 4).unwrap();
        assert_eq!(map.instances.len(), 1);
    }

    #[test]
    fn extraction_requires_resolution() {
        let mut map = map_with(&[(VoxelKey::new(0, 0, 0), 1, 0.9)]);
        assert!(extract_instances(&mut map, 1).is_err());
    }

    #[test]
    fn instance_ids_follow_min_key_order() {
        let mut map = map_with(&[
            (VoxelKey::new(10, 0, 0), 1, 0.9),
            (VoxelKey::new(-5, 3, 0), 2, 0.9),
            (VoxelKey::new(0, 0, 0), 4, 0.9),
        ]);
        resolve_voxels(&mut map, ResolutionRule::MaxScore).unwrap();
        extract_instances(&mut map, 1).unwrap();
        let order: Vec<_> = map.instances.values().map(|i| (i.u, i.voxels[0])).collect();
        assert_eq!(
            order,
            vec![(0, VoxelKey::new(-5, 3, 0)), (1, VoxelKey::new(0, 0, 0)), (2, VoxelKey::new(10, 0, 0))]
        );
    }

    #[test]
    fn consistent_logits_examples() {
        // singleton
        let k = VoxelKey::new(0, 0, 0);
        let mut map = SemanticVoxelMap::new(0.05);
        let l = [0.3, -1.0, 2.0, 0.0, 0.5, 0.1];
        map.evidence.insert((0, 0), DetectionEvidence { logits: l, score: score_of(&l) });
        map.voxels.entry(k).or_default().observations.extend([(0, 0), (0, 0), (0, 0)]);
        resolve_voxels(&mut map, ResolutionRule::MaxScore).unwrap();
        extract_instances(&mut map, 1).unwrap();
        let got = map.instances[&0].consistent_logits;
        let want = softmax_unchecked(&l);
        for c in 0..NUM_CLASSES {
            assert!((got[c] - want[c]).abs() < 1e-12);
        }

        // two detections, each hitting several voxels
        let mut map = SemanticVoxelMap::new(0.05);
        let a = [2f64.ln(), 0.0, 0.0, -800.0, -800.0, -800.0];
        let b = [0.0, 0.0, 0.0, -800.0, -800.0, -800.0];
        map.evidence.insert((0, 0), DetectionEvidence { logits: a, score: 0.5 });
        map.evidence.insert((1, 0), DetectionEvidence { logits: b, score: 1.0 / 3.0 });
        for i in 0..3 {
            let rec = map.voxels.entry(VoxelKey::new(i, 0, 0)).or_default();
            rec.observations.push((0, 0));
            rec.observations.push((1, 0));
        }
        resolve_voxels(&mut map, ResolutionRule::MaxScore).unwrap();
        extract_instances(&mut map, 1).unwrap();
        let got = map.instances[&0].consistent_logits;
        assert!((got[0] - 5.0 / 12.0).abs() < 1e-12);
        assert!((got[1] - 7.0 / 24.0).abs() < 1e-12);
        assert!((got[2] - 7.0 / 24.0).abs() < 1e-12);
    }

    #[test]
    fn accumulation_single_voxel_counts_pixels() {
        // A wall-parallel plane 2 m ahead. The pose keeps the lifted points
        // clear of voxel boundaries.
        let k = CameraIntrinsics::default();
        let pose = Pose { camera_height: 1.29, ..Pose::new(0.02, 0.02, 0.0) };
        let frame = FrameObservation {
            pose,
            width: k.width,
            height: k.height,
            depth: vec![2.0; k.pixel_count()],
            gt_instance: vec![None; k.pixel_count()],
        };
        let mask = Mask::from_pixels(vec![(64, 48)]);
        let det = Detection { bbox: mask.bbox().unwrap(), mask, class_id: 1, logits: logits_for(1, 5.0), score: 0.9 };
        let mut map = SemanticVoxelMap::new(0.05);
        accumulate_frame(&mut map, 0, &frame, &[], &k);
        assert!(map.voxels.is_empty());
        accumulate_frame(&mut map, 0, &frame, &[det.clone(), det.clone()], &k);
        assert_eq!(map.voxels.len(), 1);
        assert_eq!(map.observation_count(), 2);

        let mask = Mask::from_pixels(vec![(64, 48), (64, 49)]);
        let det = Detection { bbox: mask.bbox().unwrap(), mask, ..det };
        let mut map = SemanticVoxelMap::new(0.05);
        accumulate_frame(&mut map, 3, &frame, &[det], &k);
        // 2 m away a pixel spans ~3 cm, so both pixels share a voxel here
        assert_eq!(map.voxels.len(), 1);
        assert_eq!(map.voxels.values().next().unwrap().observations, vec![(3, 0), (3, 0)]);
    }

    /// Independent 26-connectivity oracle: union-find over all adjacent pairs.
    fn union_find_partition(labels: &BTreeMap<VoxelKey, ClassId>) -> BTreeSet<BTreeSet<VoxelKey>> {
        let keys: Vec<VoxelKey> = labels.keys().copied().collect();
        let index: HashMap<VoxelKey, usize> = keys.iter().enumerate().map(|(i, k)| (*k, i)).collect();
        let mut parent: Vec<usize> = (0..keys.len()).collect();
        fn find(p: &mut [usize], x: usize) -> usize {
            let mut r = x;
            while p[r] != r {
                r = p[r];
            }
            let mut y = x;
            while p[y] != r {
                let next = p[y];
                p[y] = r;
                y = next;
            }
            r
        }
        for (i, k) in keys.iter().enumerate() {
            for dx in -1..=1 {
                for dy in -1..=1 {
                    for dz in -1..=1 {
                        let n = VoxelKey::new(k.ix + dx, k.iy + dy, k.iz + dz);
                        if let Some(&j) = index.get(&n) {
                            if labels[k] == labels[&n] {
                                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                                parent[a] = b;
                            }
                        }
                    }
                }
            }
        }
        let mut groups: BTreeMap<usize, BTreeSet<VoxelKey>> = BTreeMap::new();
        for (i, k) in keys.iter().enumerate() {
            let r = find(&mut parent, i);
            groups.entry(r).or_default().insert(*k);
        }
        groups.into_values().collect()
    }

    #[test]
    fn components_match_union_find_on_random_sets() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for _ in 0..30 {
            let n = rng.random_range(1..2000);
            let mut obs = Vec::new();
            for _ in 0..n {
                let key = VoxelKey::new(rng.random_range(-8..8), rng.random_range(-8..8), rng.random_range(-4..4));
                obs.push((key, rng.random_range(0..3), rng.random_range(0.7..1.0)));
            }
            let mut map = map_with(&obs);
            resolve_voxels(&mut map, ResolutionRule::MaxScore).unwrap();
            extract_instances(&mut map, 1).unwrap();
            let labels: BTreeMap<VoxelKey, ClassId> =
                map.voxels.iter().map(|(k, r)| (*k, r.resolved_class.unwrap())).collect();
            let expected = union_find_partition(&labels);
            let got: BTreeSet<BTreeSet<VoxelKey>> =
                map.instances.values().map(|i| i.voxels.iter().copied().collect()).collect();
            assert_eq!(got, expected);
            for inst in map.instances.values() {
                assert!(inst.voxels.iter().all(|k| labels[k] == inst.class_id));
                let s: f64 = inst.consistent_logits.iter().sum();
                assert!((s - 1.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn resolution_matches_linear_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let mut obs = Vec::new();
            for _ in 0..200 {
                let key = VoxelKey::new(rng.random_range(0..5), rng.random_range(0..5), 0);
                // coarse scores so ties happen
                let score = rng.random_range(7..10) as f64 / 10.0;
                obs.push((key, rng.random_range(0..NUM_CLASSES), score));
            }
            let mut map = map_with(&obs);
            resolve_voxels(&mut map, ResolutionRule::MaxScore).unwrap();
            for (key, rec) in &map.voxels {
                // scan: highest score wins, ties by class then frame index
                let mut members: Vec<(usize, ClassId, f64)> = obs
                    .iter()
                    .enumerate()
                    .filter(|(_, o)| o.0 == *key)
                    .map(|(i, o)| (i, o.1, o.2))
                    .collect();
                members.sort_by(|a, b| b.2.partial_cmp(&a.2).unwrap().then(a.1.cmp(&b.1)).then(a.0.cmp(&b.0)));
                assert_eq!(rec.resolved_class, Some(members[0].1));
            }
        }
    }

    #[test]
    fn merge_is_order_independent_for_resolution() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut parts = Vec::new();
        for f in 0..6u32 {
            let mut m = SemanticVoxelMap::new(0.05);
            let class = rng.random_range(0..NUM_CLASSES);
            let score = rng.random_range(7..10) as f64 / 10.0;
            m.evidence.insert((f, 0), DetectionEvidence { logits: logits_for(class, 4.0), score });
            for _ in 0..20 {
                let key = VoxelKey::new(rng.random_range(0..4), rng.random_range(0..4), 0);
                m.voxels.entry(key).or_default().observations.push((f, 0));
            }
            parts.push(m);
        }
        let mut forward = SemanticVoxelMap::new(0.05);
        for p in parts.iter().cloned() {
            forward.merge(p);
        }
        let mut backward = SemanticVoxelMap::new(0.05);
        for p in parts.iter().rev().cloned() {
            backward.merge(p);
        }
        finalize(&mut forward, &VoxelMapConfig { min_instance_voxels: 1, ..Default::default() }).unwrap();
        finalize(&mut backward, &VoxelMapConfig { min_instance_voxels: 1, ..Default::default() }).unwrap();
        assert_eq!(VoxelMapDump::from(&forward), VoxelMapDump::from(&backward));
    }
}
