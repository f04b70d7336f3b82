mod common;

use std::collections::BTreeSet;

use common::{intrinsics, scene_from_tracks};
use nalgebra::{Point3, Rotation3, Vector3};
use proptest::prelude::*;
use sem4d_core::camera::CameraModel;
use sem4d_core::evaluation::{direction_error, interval_iou, pit_error, spatial_error, Prediction};
use sem4d_core::fixture::presets;
use sem4d_core::knn::SpatialHashGrid;
use sem4d_core::lifting::{filter_jumps, lift_tracks, maintain_depth, ControlPointCloud, LiftConfig};
use sem4d_core::scene_io::{SceneBundle, TrackSet};

fn intervals() -> impl Strategy<Value = Vec<[i64; 2]>> {
    prop::collection::vec((0i64..60, 0i64..12), 0..6).prop_map(|v| v.into_iter().map(|(a, l)| [a, a + l]).collect())
}

fn nonempty_intervals() -> impl Strategy<Value = Vec<[i64; 2]>> {
    prop::collection::vec((0i64..60, 0i64..12), 1..6).prop_map(|v| v.into_iter().map(|(a, l)| [a, a + l]).collect())
}

fn timestep_set(iv: &[[i64; 2]]) -> BTreeSet<i64> {
    iv.iter().flat_map(|&[a, b]| a..=b).collect()
}

fn set_iou(a: &[[i64; 2]], b: &[[i64; 2]]) -> f64 {
    let (a, b) = (timestep_set(a), timestep_set(b));
    let union = a.union(&b).count();
    if union == 0 {
        0.0
    } else {
        a.intersection(&b).count() as f64 / union as f64
    }
}

fn direction() -> impl Strategy<Value = [i8; 3]> {
    [-1i8..=1, -1i8..=1, -1i8..=1]
}

proptest! {
    #[test]
    fn iou_matches_set_enumeration(p in intervals(), g in nonempty_intervals()) {
        prop_assert!((interval_iou(Some(&p), &g) - set_iou(&p, &g)).abs() < 1e-12);
    }

    #[test]
    fn iou_is_symmetric(p in nonempty_intervals(), g in nonempty_intervals()) {
        prop_assert_eq!(interval_iou(Some(&p), &g), interval_iou(Some(&g), &p));
    }

    #[test]
    fn iou_ignores_order_and_splits(p in nonempty_intervals(), g in nonempty_intervals(), cut in 0i64..12) {
        let base = interval_iou(Some(&p), &g);
        let mut rev = p.clone();
        rev.reverse();
        prop_assert_eq!(interval_iou(Some(&rev), &g), base);
        let split: Vec<[i64; 2]> = p
            .iter()
            .flat_map(|&[a, b]| {
                let m = a + cut;
                if m < b { vec![[a, m], [m + 1, b]] } else { vec![[a, b]] }
            })
            .collect();
        prop_assert_eq!(interval_iou(Some(&split), &g), base);
        prop_assert_eq!(interval_iou(Some(&g), &g), 1.0);
    }

    #[test]
    fn pit_error_is_symmetric_inside_the_clip(a in 0usize..40, b in 0usize..40) {
        prop_assert_eq!(pit_error(Some(a as i64), b, 40), pit_error(Some(b as i64), a, 40));
        prop_assert_eq!(pit_error(None, b, 40), 40.0);
    }

    #[test]
    fn masked_axes_do_not_matter(p in direction(), g in direction(), noise in direction()) {
        prop_assume!(g != [0, 0, 0]);
        let mut q = p;
        for a in 0..3 {
            if g[a] == 0 {
                q[a] = noise[a];
            }
        }
        prop_assert_eq!(direction_error(Some(p), g).unwrap(), direction_error(Some(q), g).unwrap());
        prop_assert_eq!(direction_error(Some(g), g).unwrap(), 0.0);
    }

    #[test]
    fn spatial_error_ignores_depth_along_the_ray(
        u in 0.0..160.0f64, v in 0.0..128.0f64, z1 in 0.1..5.0f64, z2 in 0.1..5.0f64,
        gu in 0.0..160.0f64, gv in 0.0..128.0f64,
    ) {
        let cam = CameraModel::static_identity(intrinsics(), 2);
        let p1 = cam.unproject(u, v, z1, 1).unwrap();
        let p2 = cam.unproject(u, v, z2, 1).unwrap();
        let e1 = spatial_error(&Prediction::Point(p1.coords.into()), [gu, gv], &cam, 1, 204.0);
        let e2 = spatial_error(&Prediction::Point(p2.coords.into()), [gu, gv], &cam, 1, 204.0);
        prop_assert!((e1 - e2).abs() < 1e-6);
        let direct = ((u - gu).powi(2) + (v - gv).powi(2)).sqrt();
        prop_assert!((e1 - direct).abs() < 1e-6);
    }

    #[test]
    fn knn_ignores_member_order(
        pts in prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64), 1..80),
        q in (-1.2..1.2f64, -1.2..1.2f64, -1.2..1.2f64),
        k in 1usize..10,
    ) {
        let pts: Vec<Point3<f64>> = pts.into_iter().map(|(x, y, z)| Point3::new(x, y, z)).collect();
        let fwd: Vec<usize> = (0..pts.len()).collect();
        let rev: Vec<usize> = fwd.iter().rev().copied().collect();
        let q = Point3::new(q.0, q.1, q.2);
        let a = SpatialHashGrid::with_auto_cell(&pts, &fwd).knn(&q, k);
        let b = SpatialHashGrid::with_auto_cell(&pts, &rev).knn(&q, k);
        prop_assert_eq!(a, b);
    }
}

/// Random control cloud on a static identity camera, with depths following
/// a smooth drift plus optional spikes.
fn random_cloud(seed: u64, n: usize, t_n: usize) -> (ControlPointCloud, TrackSet, CameraModel) {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let cam = CameraModel::static_identity(intrinsics(), t_n);
    let mut coords = Vec::new();
    let mut visible = Vec::new();
    let mut depths = Vec::new();
    let mut positions = Vec::new();
    for _ in 0..n {
        let z0 = rng.random_range(0.8..2.0);
        let spike = rng.random_bool(0.2);
        for t in 0..t_n {
            let (u, v) = (rng.random_range(0.0..159.0f64), rng.random_range(0.0..127.0f64));
            let mut z: f64 = z0 + 0.005 * t as f64 + rng.random_range(-0.002..0.002);
            if spike && t % 5 == 2 {
                z += rng.random_range(0.05..0.8);
            }
            let vis = rng.random_bool(0.8);
            coords.extend([u as f32, v as f32]);
            visible.push(vis);
            depths.push(if vis { z } else { 0.0 });
            positions.push(if vis {
                cam.unproject(u as f32 as f64, v as f32 as f64, z, t).unwrap()
            } else {
                Point3::new(f64::NAN, f64::NAN, f64::NAN)
            });
        }
    }
    let cloud = ControlPointCloud {
        num_points: n,
        num_timesteps: t_n,
        positions,
        depths,
        visibility: visible.clone(),
        alive: vec![true; n],
        init_timestep: 0,
        point_init: vec![0; n],
    };
    let tracks = TrackSet {
        init_timestep: 0,
        num_points: n,
        num_timesteps: t_n,
        coords,
        visible,
    };
    (cloud, tracks, cam)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn maintenance_keeps_visible_samples(seed in any::<u64>()) {
        let (cloud, tracks, cam) = random_cloud(seed, 20, 12);
        let out = maintain_depth(&cloud, &cam, &tracks);
        for n in 0..cloud.num_points {
            for t in 0..cloud.num_timesteps {
                if cloud.is_visible(n, t) {
                    prop_assert_eq!(out.position(n, t), cloud.position(n, t));
                    prop_assert_eq!(out.depth(n, t), cloud.depth(n, t));
                } else if out.alive[n] {
                    prop_assert!(out.depth(n, t) > 0.0);
                    let [u, v] = tracks.coord(n, t);
                    let p = cam.project(out.position(n, t), t).unwrap();
                    prop_assert!((p.u - u).abs() < 1e-6 && (p.v - v).abs() < 1e-6);
                }
            }
        }
    }

    #[test]
    fn jump_filter_is_monotone_in_kappa(seed in any::<u64>(), k1 in 0.5..20.0f64, k2 in 0.5..20.0f64) {
        let (cloud, _, _) = random_cloud(seed, 25, 12);
        let (lo, hi) = if k1 <= k2 { (k1, k2) } else { (k2, k1) };
        let strict: BTreeSet<usize> = filter_jumps(&cloud, lo, 0.05).unwrap().1.removed.into_iter().collect();
        let loose: BTreeSet<usize> = filter_jumps(&cloud, hi, 0.05).unwrap().1.removed.into_iter().collect();
        prop_assert!(loose.is_subset(&strict));
    }

    #[test]
    fn tools_are_rigid_equivariant(
        angles in (-3.1..3.1f64, -1.5..1.5f64, -3.1..3.1f64),
        shift in (-2.0..2.0f64, -2.0..2.0f64, -2.0..2.0f64),
        seed in any::<u64>(),
    ) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let t_n = 4;
        let mut object = |c: f64| -> Vec<Vec<Point3<f64>>> {
            let v = Vector3::new(rng.random_range(-0.1..0.1), rng.random_range(-0.1..0.1), 0.0);
            (0..15)
                .map(|_| {
                    let p = Point3::new(c + rng.random_range(-0.2..0.2), rng.random_range(-0.2..0.2), 1.0 + rng.random_range(-0.2..0.2));
                    (0..t_n).map(|t| p + v * t as f64).collect()
                })
                .collect()
        };
        let objects = vec![(2u16, object(0.0)), (1u16, object(0.5))];
        let rot = Rotation3::from_euler_angles(angles.0, angles.1, angles.2);
        let tr = Vector3::new(shift.0, shift.1, shift.2);
        let moved: Vec<(u16, Vec<Vec<Point3<f64>>>)> = objects
            .iter()
            .map(|(c, tracks)| (*c, tracks.iter().map(|tr_| tr_.iter().map(|p| rot * p + tr).collect()).collect()))
            .collect();
        let a = scene_from_tracks(&objects, t_n, 0.05);
        let b = scene_from_tracks(&moved, t_n, 0.05);
        for t in 0..t_n {
            let da = a.min_distance(0, 1, t).unwrap().value;
            let db = b.min_distance(0, 1, t).unwrap().value;
            prop_assert!((da - db).abs() < 1e-9);
            let oa = a.overlap_score(0, 1, t).unwrap().value;
            let ob = b.overlap_score(0, 1, t).unwrap().value;
            // Coverage flips only for pairs within rounding of the radius.
            prop_assert!((oa - ob).abs() <= 1.0 / 15.0 + 1e-12);
        }
        let sa = a.scene_summary();
        let sb = b.scene_summary();
        for (x, y) in sa.iter().zip(&sb) {
            let ca = Point3::from(Vector3::from(x.centroid));
            let cb = Point3::from(Vector3::from(y.centroid));
            prop_assert!(((rot * ca + tr) - cb).norm() < 1e-9);
        }
        let ra = Vector3::from(a.relative_motion(0, 1, 0, t_n - 1).unwrap().value);
        let rb = Vector3::from(b.relative_motion(0, 1, 0, t_n - 1).unwrap().value);
        prop_assert!((rot * ra - rb).norm() < 1e-9);
    }
}

/// Bilinear depth with a nearest-pixel fallback next to invalid depth.
fn oracle_depth(b: &SceneBundle, t: usize, u: f64, v: f64) -> f64 {
    let (w, h) = (b.width() as f64, b.height() as f64);
    let (uc, vc) = (u.clamp(0.0, w - 1.0), v.clamp(0.0, h - 1.0));
    let (x0, y0) = (uc.floor(), vc.floor());
    let (x1, y1) = ((x0 + 1.0).min(w - 1.0), (y0 + 1.0).min(h - 1.0));
    let d = |x: f64, y: f64| b.depth_at(t, x as usize, y as usize) as f64;
    let corners = [d(x0, y0), d(x1, y0), d(x0, y1), d(x1, y1)];
    if corners.iter().any(|&c| c <= 0.0) {
        return d(u.round().clamp(0.0, w - 1.0), v.round().clamp(0.0, h - 1.0));
    }
    let (fx, fy) = (uc - x0, vc - y0);
    let top = corners[0] * (1.0 - fx) + corners[1] * fx;
    let bottom = corners[2] * (1.0 - fx) + corners[3] * fx;
    top * (1.0 - fy) + bottom * fy
}

#[test]
fn naive_lift_is_per_frame_unprojection() {
    for fx in [presets::occluding_box(), presets::rigid_motion()] {
        let fx = fx.generate().unwrap();
        let b = &fx.bundle;
        let cloud = lift_tracks(b, &LiftConfig::naive()).unwrap();
        let tracks = b.primary_tracks();
        assert!(cloud.alive.iter().all(|&a| a));
        for n in 0..cloud.num_points {
            for t in 0..cloud.num_timesteps {
                let [u, v] = tracks.coord(n, t);
                let z = oracle_depth(b, t, u, v);
                let got = cloud.position(n, t);
                if z > 0.0 {
                    let want = b.camera.unproject(u, v, z, t).unwrap();
                    assert!((got - want).norm() < 1e-9, "n={n} t={t}");
                } else {
                    assert!(got.x.is_nan());
                }
            }
        }
    }
}
