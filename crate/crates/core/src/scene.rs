//! Synthetic indoor scenes made of axis-aligned boxes, plus a pinhole depth
//! camera with ground-truth instance visibility.
//!
//! World frame is z-up and right-handed; an agent with yaw 0 faces +x. The
//! camera frame is x right, y down, z forward, with pitch fixed at zero.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::classes::{ClassId, NUM_CLASSES};
use crate::error::{Error, Result};

/// Obstacles whose top lies below this height (the floor slab) do not block
/// motion and do not register in the occupancy map.
pub const FLOOR_CLEARANCE: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl Aabb {
    pub fn new(min: [f64; 3], max: [f64; 3]) -> Self {
        Self { min, max }
    }

    pub fn extent(&self) -> [f64; 3] {
        [
            self.max[0] - self.min[0],
            self.max[1] - self.min[1],
            self.max[2] - self.min[2],
        ]
    }

    pub fn has_positive_extent(&self) -> bool {
        self.extent().iter().all(|&e| e > 0.0)
    }

    pub fn contains_box(&self, other: &Aabb) -> bool {
        (0..3).all(|k| other.min[k] >= self.min[k] && other.max[k] <= self.max[k])
    }

    pub fn contains_point(&self, p: [f64; 3]) -> bool {
        (0..3).all(|k| p[k] >= self.min[k] && p[k] <= self.max[k])
    }

    /// Horizontal gap between two footprints: the largest per-axis separation.
    /// Zero or negative means the footprints overlap.
    pub fn footprint_gap(&self, other: &Aabb) -> f64 {
        let gx = (other.min[0] - self.max[0]).max(self.min[0] - other.max[0]);
        let gy = (other.min[1] - self.max[1]).max(self.min[1] - other.max[1]);
        gx.max(gy)
    }

    /// Euclidean distance from a planar point to the footprint.
    pub fn footprint_distance(&self, x: f64, y: f64) -> f64 {
        let dx = (self.min[0] - x).max(0.0).max(x - self.max[0]);
        let dy = (self.min[1] - y).max(0.0).max(y - self.max[1]);
        (dx * dx + dy * dy).sqrt()
    }

    /// Slab test. Returns the entry parameter `t > 0` of `origin + t * dir`,
    /// or `None` when the ray misses or starts inside the box.
    pub fn ray_entry(&self, origin: [f64; 3], dir: [f64; 3]) -> Option<f64> {
        let mut t_near = f64::NEG_INFINITY;
        let mut t_far = f64::INFINITY;
        for k in 0..3 {
            if dir[k] == 0.0 {
                if origin[k] < self.min[k] || origin[k] > self.max[k] {
                    return None;
                }
                continue;
            }
            let inv = 1.0 / dir[k];
            let (mut t0, mut t1) = ((self.min[k] - origin[k]) * inv, (self.max[k] - origin[k]) * inv);
            if t0 > t1 {
                std::mem::swap(&mut t0, &mut t1);
            }
            t_near = t_near.max(t0);
            t_far = t_far.min(t1);
            if t_near > t_far {
                return None;
            }
        }
        (t_near > 0.0).then_some(t_near)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectInstance {
    pub gt_id: u32,
    pub class_id: ClassId,
    #[serde(rename = "box")]
    pub bbox: Aabb,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub bounds: Aabb,
    pub obstacles: Vec<Aabb>,
    pub objects: Vec<ObjectInstance>,
    #[serde(default)]
    pub seed: u64,
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        for (i, obj) in self.objects.iter().enumerate() {
            if obj.gt_id as usize != i {
                return Err(Error::InvalidConfig(format!(
                    "object ids must be dense from 0; position {i} has id {}",
                    obj.gt_id
                )));
            }
            if obj.class_id >= NUM_CLASSES {
                return Err(Error::InvalidConfig(format!(
                    "object {} has class {} outside the class set",
                    obj.gt_id, obj.class_id
                )));
            }
            if !obj.bbox.has_positive_extent() {
                return Err(Error::InvalidConfig(format!(
                    "object {} has a degenerate box",
                    obj.gt_id
                )));
            }
            if !self.bounds.contains_box(&obj.bbox) {
                return Err(Error::InvalidConfig(format!(
                    "object {} lies outside the scene bounds",
                    obj.gt_id
                )));
            }
        }
        Ok(())
    }

    pub fn object(&self, gt_id: u32) -> Option<&ObjectInstance> {
        self.objects.get(gt_id as usize)
    }

    /// Boxes that block a walking agent: walls, clutter and objects.
    pub fn blocking_boxes(&self) -> impl Iterator<Item = &Aabb> {
        self.obstacles
            .iter()
            .chain(self.objects.iter().map(|o| &o.bbox))
            .filter(|b| b.max[2] > FLOOR_CLEARANCE)
    }

    /// True when a disc of `radius` at `(x, y)` is inside the bounds and clear
    /// of every blocking box.
    pub fn is_free(&self, x: f64, y: f64, radius: f64) -> bool {
        let b = &self.bounds;
        if x - radius < b.min[0] || x + radius > b.max[0] || y - radius < b.min[1] || y + radius > b.max[1] {
            return false;
        }
        self.blocking_boxes()
            .all(|bx| bx.footprint_distance(x, y) > radius)
    }

    /// True when a disc of `radius` swept from `from` to `to` touches a
    /// blocking box or leaves the bounds.
    pub fn segment_collides(&self, from: [f64; 2], to: [f64; 2], radius: f64) -> bool {
        if !self.is_free(to[0], to[1], radius) {
            return true;
        }
        self.blocking_boxes()
            .any(|bx| segment_footprint_distance(bx, from, to) <= radius)
    }
}

/// Distance along a segment to a footprint is convex in the segment parameter,
/// so a ternary search finds the minimum.
fn segment_footprint_distance(bx: &Aabb, from: [f64; 2], to: [f64; 2]) -> f64 {
    let at = |t: f64| {
        bx.footprint_distance(from[0] + t * (to[0] - from[0]), from[1] + t * (to[1] - from[1]))
    };
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..80 {
        let m1 = lo + (hi - lo) / 3.0;
        let m2 = hi - (hi - lo) / 3.0;
        if at(m1) <= at(m2) {
            hi = m2;
        } else {
            lo = m1;
        }
    }
    at(0.5 * (lo + hi)).min(at(0.0)).min(at(1.0))
}

/// Size template for one object class: per-axis extent ranges and the height
/// of the box's base above the floor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassTemplate {
    pub size_min: [f64; 3],
    pub size_max: [f64; 3],
    pub base_min: f64,
    pub base_max: f64,
}

pub const DEFAULT_TEMPLATES: [ClassTemplate; NUM_CLASSES] = [
    // toilet
    ClassTemplate { size_min: [0.40, 0.60, 0.75], size_max: [0.50, 0.70, 0.85], base_min: 0.0, base_max: 0.0 },
    // couch
    ClassTemplate { size_min: [1.60, 0.80, 0.80], size_max: [2.20, 1.00, 0.95], base_min: 0.0, base_max: 0.0 },
    // bed
    ClassTemplate { size_min: [1.90, 1.40, 0.50], size_max: [2.10, 1.80, 0.65], base_min: 0.0, base_max: 0.0 },
    // dining table
    ClassTemplate { size_min: [1.20, 0.80, 0.72], size_max: [1.80, 1.00, 0.78], base_min: 0.0, base_max: 0.0 },
    // potted plant
    ClassTemplate { size_min: [0.30, 0.30, 0.60], size_max: [0.50, 0.50, 1.20], base_min: 0.0, base_max: 0.0 },
    // tv, on a stand
    ClassTemplate { size_min: [0.90, 0.08, 0.50], size_max: [1.30, 0.15, 0.75], base_min: 0.60, base_max: 0.90 },
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SceneParams {
    /// Smallest room footprint `[x, y]` in meters.
    pub room_min: [f64; 2],
    pub room_max: [f64; 2],
    pub wall_height: f64,
    pub wall_thickness: f64,
    /// Up to two interior partitions, each with one doorway.
    pub interior_walls: usize,
    pub door_width: f64,
    /// Inclusive `[min, max]` object count per class.
    pub objects_per_class: [[usize; 2]; NUM_CLASSES],
    /// Unlabeled clutter boxes (cabinets and the like).
    pub clutter: usize,
    /// Minimum footprint gap between any two placed boxes (objects, clutter).
    pub min_separation: f64,
    /// Minimum footprint gap between an object and a wall.
    pub wall_margin: f64,
    pub max_attempts: usize,
    pub templates: [ClassTemplate; NUM_CLASSES],
}

impl Default for SceneParams {
    fn default() -> Self {
        Self {
            room_min: [6.0, 5.0],
            room_max: [8.0, 6.5],
            wall_height: 2.6,
            wall_thickness: 0.1,
            interior_walls: 1,
            door_width: 1.0,
            objects_per_class: [[1, 1]; NUM_CLASSES],
            clutter: 0,
            min_separation: 0.6,
            wall_margin: 0.05,
            max_attempts: 2000,
            templates: DEFAULT_TEMPLATES,
        }
    }
}

impl SceneParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(format!("scene params: {m}")));
        if (0..2).any(|k| self.room_min[k] <= 2.0 * self.wall_thickness || self.room_max[k] < self.room_min[k]) {
            return bad("room size range is empty or smaller than the walls");
        }
        if self.interior_walls > 2 {
            return bad("at most two interior walls are supported");
        }
        if self.objects_per_class.iter().any(|[lo, hi]| lo > hi) {
            return bad("object count range has min > max");
        }
        if self.min_separation < 0.0 || self.wall_margin < 0.0 || self.wall_thickness <= 0.0 {
            return bad("negative separation or non-positive wall thickness");
        }
        Ok(())
    }
}

/// Deterministically build a scene from `params` and `seed`.
pub fn generate_scene(params: &SceneParams, seed: u64) -> Result<SceneSpec> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w = rng.random_range(params.room_min[0]..=params.room_max[0]);
    let l = rng.random_range(params.room_min[1]..=params.room_max[1]);
    let h = params.wall_height;
    let t = params.wall_thickness;

    let bounds = Aabb::new([0.0, 0.0, -0.1], [w, l, h]);
    let mut obstacles = vec![
        Aabb::new([0.0, 0.0, -0.1], [w, l, 0.0]),
        Aabb::new([0.0, 0.0, 0.0], [t, l, h]),
        Aabb::new([w - t, 0.0, 0.0], [w, l, h]),
        Aabb::new([0.0, 0.0, 0.0], [w, t, h]),
        Aabb::new([0.0, l - t, 0.0], [w, l, h]),
    ];
    // Footprints that nothing may be placed on (doorways and their approaches).
    let mut keep_out: Vec<Aabb> = Vec::new();
    let door = params.door_width;
    let approach = 0.8;

    if params.interior_walls >= 1 {
        let x0 = rng.random_range(0.4 * w..=0.6 * w);
        let door_y = rng.random_range(t + 0.2..=(l - t - 0.2 - door).max(t + 0.2));
        obstacles.push(Aabb::new([x0, t, 0.0], [x0 + t, door_y, h]));
        obstacles.push(Aabb::new([x0, door_y + door, 0.0], [x0 + t, l - t, h]));
        keep_out.push(Aabb::new([x0 - approach, door_y, 0.0], [x0 + t + approach, door_y + door, h]));
    }
    if params.interior_walls >= 2 {
        // Second partition runs along x through the left part of the room.
        let x_end = obstacles[5].min[0];
        let y0 = rng.random_range(0.4 * l..=0.6 * l);
        let door_x = rng.random_range(t + 0.2..=(x_end - 0.2 - door).max(t + 0.2));
        obstacles.push(Aabb::new([t, y0, 0.0], [door_x, y0 + t, h]));
        obstacles.push(Aabb::new([door_x + door, y0, 0.0], [x_end, y0 + t, h]));
        keep_out.push(Aabb::new([door_x, y0 - approach, 0.0], [door_x + door, y0 + t + approach, h]));
    }

    let interior = Aabb::new([t, t, 0.0], [w - t, l - t, h]);

    // Sizes are drawn once; positions are retried as a whole layout.
    let mut wanted: Vec<(Option<ClassId>, [f64; 3], f64, String)> = Vec::new();
    for i in 0..params.clutter {
        let size = [
            rng.random_range(0.3..=0.8),
            rng.random_range(0.3..=0.8),
            rng.random_range(0.4..=1.8),
        ];
        wanted.push((None, size, 0.0, format!("clutter #{i}")));
    }
    for class_id in 0..NUM_CLASSES {
        let [lo, hi] = params.objects_per_class[class_id];
        let count = if lo == hi { lo } else { rng.random_range(lo..=hi) };
        let tpl = &params.templates[class_id];
        for k in 0..count {
            let mut size = [0.0; 3];
            for (axis, s) in size.iter_mut().enumerate() {
                *s = rng.random_range(tpl.size_min[axis]..=tpl.size_max[axis]);
            }
            if rng.random_bool(0.5) {
                size.swap(0, 1);
            }
            let base = if tpl.base_max > tpl.base_min {
                rng.random_range(tpl.base_min..=tpl.base_max)
            } else {
                tpl.base_min
            };
            wanted.push((Some(class_id), size, base, format!("{} #{k}", crate::classes::class_name(class_id))));
        }
    }
    for (_, size, base, what) in &wanted {
        let fits_x = interior.max[0] - interior.min[0] - 2.0 * params.wall_margin >= size[0];
        let fits_y = interior.max[1] - interior.min[1] - 2.0 * params.wall_margin >= size[1];
        if !fits_x || !fits_y || base + size[2] > h {
            return Err(Error::SceneInfeasible(format!("{what} does not fit inside the room")));
        }
    }
    // big footprints first
    let mut order: Vec<usize> = (0..wanted.len()).collect();
    order.sort_by(|&a, &b| {
        let area = |i: usize| wanted[i].1[0] * wanted[i].1[1];
        area(b).total_cmp(&area(a)).then(a.cmp(&b))
    });

    let tries_per_item = 100;
    let layouts = params.max_attempts.div_ceil(tries_per_item).max(1);
    let mut layout: Option<Vec<Aabb>> = None;
    let mut stuck_on = String::new();
    'layout: for _ in 0..layouts {
        let mut placed: Vec<Option<Aabb>> = vec![None; wanted.len()];
        for &i in &order {
            let (_, size, base, what) = &wanted[i];
            let lo_x = interior.min[0] + params.wall_margin;
            let hi_x = interior.max[0] - params.wall_margin - size[0];
            let lo_y = interior.min[1] + params.wall_margin;
            let hi_y = interior.max[1] - params.wall_margin - size[1];
            let mut found = None;
            for _ in 0..tries_per_item {
                let x = rng.random_range(lo_x..=hi_x);
                let y = rng.random_range(lo_y..=hi_y);
                let candidate = Aabb::new([x, y, *base], [x + size[0], y + size[1], base + size[2]]);
                let clear_walls = obstacles[5..]
                    .iter()
                    .all(|o| candidate.footprint_gap(o) >= params.wall_margin);
                let clear_doors = keep_out.iter().all(|k| candidate.footprint_gap(k) > 0.0);
                let clear_others = placed
                    .iter()
                    .flatten()
                    .all(|o| candidate.footprint_gap(o) >= params.min_separation);
                if clear_walls && clear_doors && clear_others {
                    found = Some(candidate);
                    break;
                }
            }
            match found {
                Some(b) => placed[i] = Some(b),
                None => {
                    stuck_on.clone_from(what);
                    continue 'layout;
                }
            }
        }
        layout = Some(placed.into_iter().map(|b| b.expect("all placed")).collect());
        break;
    }
    let Some(layout) = layout else {
        return Err(Error::SceneInfeasible(format!(
            "could not place {stuck_on} with min_separation {} m after {} attempts",
            params.min_separation, params.max_attempts
        )));
    };

    let mut objects = Vec::new();
    for ((class_id, ..), bbox) in wanted.iter().zip(layout) {
        match class_id {
            Some(class_id) => objects.push(ObjectInstance {
                gt_id: objects.len() as u32,
                class_id: *class_id,
                bbox,
            }),
            None => obstacles.push(bbox),
        }
    }

    let scene = SceneSpec {
        bounds,
        obstacles,
        objects,
        seed,
    };
    scene.validate()?;
    Ok(scene)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
    /// Planar depth beyond this reads as 0 ("no hit").
    #[serde(default = "default_max_range")]
    pub max_range: f64,
}

fn default_max_range() -> f64 {
    10.0
}

impl Default for CameraIntrinsics {
    fn default() -> Self {
        Self {
            fx: 64.0,
            fy: 64.0,
            cx: 64.0,
            cy: 48.0,
            width: 128,
            height: 96,
            max_range: default_max_range(),
        }
    }
}

impl CameraIntrinsics {
    pub fn validate(&self) -> Result<()> {
        let ok = self.fx > 0.0
            && self.fy > 0.0
            && self.cx > 0.0
            && self.cx < self.width as f64
            && self.cy > 0.0
            && self.cy < self.height as f64
            && self.max_range > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!("invalid camera intrinsics {self:?}")))
        }
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    /// Full horizontal field of view in radians.
    pub fn horizontal_fov(&self) -> f64 {
        (self.cx / self.fx).atan() + ((self.width as f64 - 1.0 - self.cx) / self.fx).atan()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    /// Heading in `[-pi, pi)`, 0 facing +x.
    pub yaw: f64,
    pub camera_height: f64,
}

pub const DEFAULT_CAMERA_HEIGHT: f64 = 1.25;

impl Pose {
    pub fn new(x: f64, y: f64, yaw: f64) -> Self {
        Self {
            x,
            y,
            yaw: crate::math::normalize_angle(yaw),
            camera_height: DEFAULT_CAMERA_HEIGHT,
        }
    }

    fn origin(&self) -> [f64; 3] {
        [self.x, self.y, self.camera_height]
    }

    fn forward(&self) -> [f64; 3] {
        [self.yaw.cos(), self.yaw.sin(), 0.0]
    }

    /// Camera +x expressed in world coordinates.
    fn right(&self) -> [f64; 3] {
        [self.yaw.sin(), -self.yaw.cos(), 0.0]
    }

    /// World direction of the (unnormalised) ray through pixel `(u, v)`; its
    /// camera-frame z component is 1, so the ray parameter is planar depth.
    pub fn ray_direction(&self, u: f64, v: f64, k: &CameraIntrinsics) -> [f64; 3] {
        let x = (u - k.cx) / k.fx;
        let y = (v - k.cy) / k.fy;
        let (f, r) = (self.forward(), self.right());
        [f[0] + x * r[0], f[1] + x * r[1], -y]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameObservation {
    pub pose: Pose,
    pub width: usize,
    pub height: usize,
    /// Row-major planar z-depth; 0 means no hit within range.
    pub depth: Vec<f64>,
    /// Row-major ground-truth object id of the nearest hit.
    pub gt_instance: Vec<Option<u32>>,
}

impl FrameObservation {
    #[inline]
    pub fn index(&self, u: usize, v: usize) -> usize {
        v * self.width + u
    }

    #[inline]
    pub fn depth_at(&self, u: usize, v: usize) -> f64 {
        self.depth[self.index(u, v)]
    }

    /// Pixels per visible ground-truth object, keyed by id.
    pub fn gt_pixels(&self) -> std::collections::BTreeMap<u32, Vec<(u32, u32)>> {
        let mut out: std::collections::BTreeMap<u32, Vec<(u32, u32)>> = Default::default();
        for v in 0..self.height {
            for u in 0..self.width {
                if let Some(id) = self.gt_instance[self.index(u, v)] {
                    out.entry(id).or_default().push((u as u32, v as u32));
                }
            }
        }
        out
    }
}

/// Nearest hit along one ray: `(planar depth, object id)`.
fn cast(scene: &SceneSpec, origin: [f64; 3], dir: [f64; 3]) -> Option<(f64, Option<u32>)> {
    let mut best: Option<(f64, Option<u32>)> = None;
    for obj in &scene.objects {
        if let Some(t) = obj.bbox.ray_entry(origin, dir) {
            if best.is_none_or(|(bt, _)| t < bt) {
                best = Some((t, Some(obj.gt_id)));
            }
        }
    }
    for ob in &scene.obstacles {
        if let Some(t) = ob.ray_entry(origin, dir) {
            if best.is_none_or(|(bt, _)| t < bt) {
                best = Some((t, None));
            }
        }
    }
    best
}

/// Render planar depth and ground-truth instance ids for one pose.
pub fn render_frame(scene: &SceneSpec, pose: &Pose, k: &CameraIntrinsics) -> FrameObservation {
    let (w, h) = (k.width, k.height);
    let mut depth = vec![0.0; w * h];
    let mut gt_instance = vec![None; w * h];
    let origin = pose.origin();
    for v in 0..h {
        for u in 0..w {
            let dir = pose.ray_direction(u as f64, v as f64, k);
            if let Some((t, id)) = cast(scene, origin, dir) {
                if t <= k.max_range {
                    depth[v * w + u] = t;
                    gt_instance[v * w + u] = id;
                }
            }
        }
    }
    FrameObservation {
        pose: *pose,
        width: w,
        height: h,
        depth,
        gt_instance,
    }
}

/// Lift pixel `(u, v)` at planar depth `d` into world coordinates.
pub fn pixel_to_world(u: f64, v: f64, d: f64, k: &CameraIntrinsics, pose: &Pose) -> Result<[f64; 3]> {
    if d.is_nan() || d <= 0.0 {
        return Err(Error::InvalidDepth(d));
    }
    Ok(pixel_to_world_unchecked(u, v, d, k, pose))
}

#[inline]
pub(crate) fn pixel_to_world_unchecked(u: f64, v: f64, d: f64, k: &CameraIntrinsics, pose: &Pose) -> [f64; 3] {
    let xc = (u - k.cx) * d / k.fx;
    let yc = (v - k.cy) * d / k.fy;
    let (f, r, o) = (pose.forward(), pose.right(), pose.origin());
    [
        o[0] + xc * r[0] + d * f[0],
        o[1] + xc * r[1] + d * f[1],
        o[2] - yc,
    ]
}

/// Project a world point to `(u, v, planar depth)`; `None` when the point is
/// at or behind the image plane. Out-of-image coordinates are returned as-is.
pub fn world_to_pixel(p: [f64; 3], k: &CameraIntrinsics, pose: &Pose) -> Option<(f64, f64, f64)> {
    let o = pose.origin();
    let rel = [p[0] - o[0], p[1] - o[1], p[2] - o[2]];
    let (f, r) = (pose.forward(), pose.right());
    let zc = rel[0] * f[0] + rel[1] * f[1];
    if zc <= 0.0 {
        return None;
    }
    let xc = rel[0] * r[0] + rel[1] * r[1];
    let yc = -rel[2];
    Some((k.cx + k.fx * xc / zc, k.cy + k.fy * yc / zc, zc))
}
