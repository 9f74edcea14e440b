use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use semvox_core::scene::{
    generate_scene, pixel_to_world, render_frame, world_to_pixel, Aabb, CameraIntrinsics, Pose, SceneParams,
    SceneSpec,
};

fn inside(b: &Aabb, p: [f64; 3]) -> bool {
    (0..3).all(|i| p[i] >= b.min[i] && p[i] <= b.max[i])
}

/// First box containing a point on the ray, stepping 1 mm along it. Returns
/// planar depth and the object id (None for obstacles).
fn march(scene: &SceneSpec, pose: &Pose, u: usize, v: usize, k: &CameraIntrinsics) -> Option<(f64, Option<u32>)> {
    let (x, y) = ((u as f64 - k.cx) / k.fx, (v as f64 - k.cy) / k.fy);
    let (c, s) = (pose.yaw.cos(), pose.yaw.sin());
    // forward (c, s, 0), right (s, -c, 0), down (0, 0, -1)
    let dir = [c + x * s, s - x * c, -y];
    let norm = (dir[0] * dir[0] + dir[1] * dir[1] + dir[2] * dir[2]).sqrt();
    let step = 0.001;
    let mut dist = 0.0;
    while dist / norm <= k.max_range + step {
        let t = dist / norm;
        let p = [pose.x + t * dir[0], pose.y + t * dir[1], pose.camera_height + t * dir[2]];
        for o in &scene.objects {
            if inside(&o.bbox, p) {
                return Some((t, Some(o.gt_id)));
            }
        }
        if scene.obstacles.iter().any(|b| inside(b, p)) {
            return Some((t, None));
        }
        dist += step;
    }
    None
}

fn random_pose(scene: &SceneSpec, rng: &mut ChaCha8Rng) -> Pose {
    let b = &scene.bounds;
    loop {
        let x = rng.random_range(b.min[0]..b.max[0]);
        let y = rng.random_range(b.min[1]..b.max[1]);
        if scene.is_free(x, y, 0.2) {
            return Pose::new(x, y, rng.random_range(-std::f64::consts::PI..std::f64::consts::PI));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn render_matches_ray_march(seed in 0u64..10_000) {
        let scene = generate_scene(&SceneParams::default(), seed).unwrap();
        let k = CameraIntrinsics::default();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pose = random_pose(&scene, &mut rng);
        let frame = render_frame(&scene, &pose, &k);
        let mut hits = 0;
        for _ in 0..48 {
            let (u, v) = (rng.random_range(0..k.width), rng.random_range(0..k.height));
            let d = frame.depth_at(u, v);
            let id = frame.gt_instance[frame.index(u, v)];
            match march(&scene, &pose, u, v, &k) {
                Some((t, oid)) if t <= k.max_range => {
                    prop_assert!((d - t).abs() <= 0.002, "pixel ({u},{v}): render {d} march {t}");
                    prop_assert_eq!(id, oid, "pixel ({}, {})", u, v);
                    hits += 1;
                }
                Some((t, _)) => prop_assert!(d == 0.0 || (d - t).abs() <= 0.002),
                None => prop_assert_eq!(d, 0.0),
            }
            if d == 0.0 {
                prop_assert_eq!(id, None);
            }
        }
        // the room is closed, so most rays end on something
        prop_assert!(hits > 24);
    }

    #[test]
    fn pixel_world_round_trip(seed in any::<u64>()) {
        let k = CameraIntrinsics::default();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for yaw_i in 0..16 {
            let yaw = -std::f64::consts::PI + yaw_i as f64 * std::f64::consts::PI / 8.0;
            let pose = Pose::new(rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0), yaw);
            let u = rng.random_range(0.0..(k.width as f64 - 1.0));
            let v = rng.random_range(0.0..(k.height as f64 - 1.0));
            let d = rng.random_range(0.1..k.max_range);
            let p = pixel_to_world(u, v, d, &k, &pose).unwrap();
            let (u2, v2, d2) = world_to_pixel(p, &k, &pose).unwrap();
            prop_assert!((u - u2).abs() < 0.5 && (v - v2).abs() < 0.5);
            prop_assert!((d - d2).abs() < 1e-9);
        }
    }
}

#[test]
fn points_behind_camera_do_not_project() {
    let k = CameraIntrinsics::default();
    let pose = Pose::new(0.0, 0.0, 0.7);
    let behind = [-(0.7f64.cos()), -(0.7f64.sin()), 1.25];
    assert!(world_to_pixel(behind, &k, &pose).is_none());
}
