use std::collections::{BTreeMap, BTreeSet, VecDeque};

use nalgebra::Point3;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sem4d_core::densification::DensePointCloud;
use sem4d_core::fixture::{BoxSpec, PlaneSpec, Recipe};
use sem4d_core::lifting::ControlPointCloud;
use sem4d_core::pipeline::{self, FrameSpec, PipelineConfig};
use sem4d_core::semantics::{
    connected_components, containment_score, group_by_merges, lift_to_ref, merge_instances, presence_over_time,
    Connectivity, FrameInstance, MergeConfig,
};

/// Breadth-first labeling used as an independent reference.
fn flood_fill(mask: &[u16], w: usize, h: usize, eight: bool) -> BTreeSet<(u16, Vec<u32>)> {
    let mut seen = vec![false; mask.len()];
    let mut out = BTreeSet::new();
    for start in 0..mask.len() {
        if seen[start] || mask[start] == 0 {
            continue;
        }
        let class = mask[start];
        let mut comp = Vec::new();
        let mut queue = VecDeque::from([start]);
        seen[start] = true;
        while let Some(i) = queue.pop_front() {
            comp.push(i as u32);
            let (x, y) = ((i % w) as i64, (i / w) as i64);
            for dy in -1i64..=1 {
                for dx in -1i64..=1 {
                    if (dx == 0 && dy == 0) || (!eight && dx != 0 && dy != 0) {
                        continue;
                    }
                    let (nx, ny) = (x + dx, y + dy);
                    if nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 {
                        continue;
                    }
                    let j = ny as usize * w + nx as usize;
                    if !seen[j] && mask[j] == class {
                        seen[j] = true;
                        queue.push_back(j);
                    }
                }
            }
        }
        comp.sort_unstable();
        out.insert((class, comp));
    }
    out
}

#[test]
fn components_match_flood_fill_on_random_frames() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for round in 0..40 {
        let (w, h) = (64, 64);
        // Blocky labels give large components as well as single pixels.
        let block = 1 + round % 5;
        let labels: Vec<u16> = (0..(w / block + 1) * (h / block + 1)).map(|_| rng.random_range(0..4)).collect();
        let mask: Vec<u16> = (0..w * h)
            .map(|i| {
                let (x, y) = (i % w, i / w);
                if rng.random_bool(0.05) {
                    rng.random_range(0..4)
                } else {
                    labels[(y / block) * (w / block + 1) + x / block]
                }
            })
            .collect();
        for (conn, eight) in [(Connectivity::Four, false), (Connectivity::Eight, true)] {
            let got: BTreeSet<(u16, Vec<u32>)> = connected_components(&mask, w, h, 0, 1, conn)
                .into_iter()
                .map(|f| (f.class_id, f.pixels))
                .collect();
            assert_eq!(got, flood_fill(&mask, w, h, eight), "round {round}, {conn:?}");
        }
        let ordered = connected_components(&mask, w, h, 0, 1, Connectivity::Four);
        assert!(ordered
            .windows(2)
            .all(|p| (p[0].class_id, p[0].pixels[0]) < (p[1].class_id, p[1].pixels[0])));
    }
}

/// Transitive closure by repeated boolean matrix squaring.
fn closure_groups(n: usize, edges: &[(usize, usize)]) -> BTreeSet<Vec<usize>> {
    let mut reach = vec![vec![false; n]; n];
    for (i, row) in reach.iter_mut().enumerate() {
        row[i] = true;
    }
    for &(a, b) in edges {
        reach[a][b] = true;
        reach[b][a] = true;
    }
    for k in 0..n {
        for i in 0..n {
            if reach[i][k] {
                for j in 0..n {
                    if reach[k][j] {
                        reach[i][j] = true;
                    }
                }
            }
        }
    }
    (0..n).map(|i| (0..n).filter(|&j| reach[i][j]).collect()).collect()
}

#[test]
fn union_find_groups_equal_transitive_closure() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..50 {
        let n = 50;
        let p = rng.random_range(0.0..0.08);
        let edges: Vec<(usize, usize)> = (0..n)
            .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
            .filter(|_| rng.random_bool(p))
            .collect();
        let got: BTreeSet<Vec<usize>> = group_by_merges(n, &edges).into_iter().collect();
        assert_eq!(got, closure_groups(n, &edges));
    }
}

fn static_dense(points: &[Point3<f64>], t_n: usize) -> DensePointCloud {
    let m = points.len();
    DensePointCloud {
        num_points: m,
        num_timesteps: t_n,
        t_obs: vec![0; m],
        pixels: (0..m).map(|i| [i as u32, 0]).collect(),
        positions: points.iter().flat_map(|p| std::iter::repeat_n(*p, t_n)).collect(),
        k: 1,
        neighbors: (0..m as u32).collect(),
        weights: vec![1.0; m],
        class_ids: vec![1; m],
    }
}

fn blob(center: [f64; 3], n: usize, spacing: f64) -> Vec<Point3<f64>> {
    (0..n)
        .flat_map(|i| (0..n).map(move |j| Point3::new(center[0] + i as f64 * spacing, center[1] + j as f64 * spacing, center[2])))
        .collect()
}

fn frame_instance(seed: usize, class: u16, members: std::ops::Range<u32>) -> FrameInstance {
    FrameInstance {
        seed_frame: seed,
        class_id: class,
        pixels: members.clone().collect(),
        members: members.collect(),
    }
}

fn merge_config(seeds: Vec<usize>, r: f64) -> MergeConfig {
    MergeConfig {
        seed_frames: seeds,
        t_ref: 0,
        radius: r,
        tau: 0.6,
        min_component_pixels: 1,
        connectivity: Connectivity::Four,
        presence_fraction: 0.2,
    }
}

#[test]
fn one_object_from_three_seeds_merges() {
    // Three views of the same 5×5 patch, slightly offset.
    let mut pts = blob([0.0, 0.0, 1.0], 5, 0.02);
    pts.extend(blob([0.003, 0.0, 1.0], 5, 0.02));
    pts.extend(blob([0.0, 0.004, 1.0], 5, 0.02));
    let dense = static_dense(&pts, 3);
    let parts = vec![frame_instance(0, 2, 0..25), frame_instance(1, 2, 25..50), frame_instance(2, 2, 50..75)];
    let table = merge_instances(&parts, &dense, &merge_config(vec![0, 1, 2], 0.01)).unwrap();
    assert_eq!(table.instances.len(), 1);
    assert_eq!(table.instances[0].contributors.len(), 3);
    assert_eq!(table.instances[0].members.len(), 75);
}

#[test]
fn distant_same_class_objects_stay_apart() {
    let r = 0.02;
    let mut pts = blob([0.0, 0.0, 1.0], 5, 0.01);
    pts.extend(blob([10.0 * r + 0.04, 0.0, 1.0], 5, 0.01));
    let dense = static_dense(&pts, 3);
    let parts = vec![frame_instance(0, 2, 0..25), frame_instance(1, 2, 25..50)];
    let table = merge_instances(&parts, &dense, &merge_config(vec![0, 1], r)).unwrap();
    assert_eq!(table.instances.len(), 2);
}

#[test]
fn lifted_box_moves_with_its_motion() {
    let recipe = Recipe {
        scene_id: "slide".into(),
        width: 160,
        height: 128,
        num_timesteps: 5,
        intrinsics: sem4d_core::fixture::desk_intrinsics(),
        camera_velocity: [0.0; 3],
        camera_yaw_per_step: 0.0,
        plane: Some(PlaneSpec {
            depth: 3.0,
            velocity: [0.0; 3],
            class_id: 1,
        }),
        boxes: vec![BoxSpec {
            center: [-0.4, 0.0, 2.0],
            half_extents: [0.2, 0.2, 0.1],
            velocity: [0.2, 0.0, 0.0],
            stop_at: None,
            class_id: 2,
        }],
        track_stride: 6,
        track_margin: 2,
        track_init_timestep: Some(2),
        extra_track_inits: vec![],
        jumpers: vec![],
        classes: BTreeMap::from([(1, "tissue".into()), (2, "tool".into())]),
        render_frames: false,
    };
    let fx = recipe.generate().unwrap();
    let mut config = PipelineConfig::default();
    config.semantics.seed_frames = vec![FrameSpec::Index(0)];
    config.semantics.t_ref = Some(FrameSpec::Index(2));
    let out = pipeline::run_stages(&fx.bundle, &config, None).unwrap();
    let parts = sem4d_core::semantics::frame_instances(&fx.bundle, &out.dense, &out.merge_config);
    let tool = parts.iter().find(|f| f.class_id == 2).unwrap();
    let at_ref = lift_to_ref(tool, &out.dense, 2).unwrap();
    let at_seed = lift_to_ref(tool, &out.dense, 0).unwrap();
    for (a, b) in at_ref.iter().zip(&at_seed) {
        assert!((a - b - nalgebra::Vector3::new(0.4, 0.0, 0.0)).norm() < 1e-3);
    }
    // Seed frame equal to t_ref on a static scene: the lift is the unprojection itself.
    let cam = &fx.bundle.camera;
    for &m in &tool.members {
        let m = m as usize;
        let [x, y] = out.dense.pixels[m];
        let direct = cam
            .unproject(x as f64, y as f64, fx.bundle.depth_at(0, x as usize, y as usize) as f64, 0)
            .unwrap();
        assert_eq!(*out.dense.position(m, 0), direct);
    }
}

fn presence_fixture(visible: impl Fn(usize, usize) -> bool, n: usize, t_n: usize) -> Vec<bool> {
    let controls = ControlPointCloud {
        num_points: n,
        num_timesteps: t_n,
        positions: vec![Point3::origin(); n * t_n],
        depths: vec![1.0; n * t_n],
        visibility: (0..n).flat_map(|c| (0..t_n).map(move |t| (c, t))).map(|(c, t)| visible(c, t)).collect(),
        alive: vec![true; n],
        init_timestep: 0,
        point_init: vec![0; n],
    };
    // Each dense point leans on two controls.
    let m = n;
    let dense = DensePointCloud {
        num_points: m,
        num_timesteps: t_n,
        t_obs: vec![0; m],
        pixels: vec![[0, 0]; m],
        positions: vec![Point3::origin(); m * t_n],
        k: 2,
        neighbors: (0..m).flat_map(|i| [i as u32, ((i + 1) % n) as u32]).collect(),
        weights: vec![0.5; 2 * m],
        class_ids: vec![2; m],
    };
    presence_over_time(&(0..m as u32).collect::<Vec<_>>(), &dense, &controls, 0.2)
}

#[test]
fn presence_patterns() {
    assert!(presence_fixture(|_, _| true, 10, 12).iter().all(|&p| p));
    let entering = presence_fixture(|_, t| t >= 5, 10, 12);
    assert_eq!(entering, (0..12).map(|t| t >= 5).collect::<Vec<_>>());
    let blink = presence_fixture(|_, t| t != 7, 10, 12);
    assert_eq!(blink, (0..12).map(|t| t != 7).collect::<Vec<_>>());
    // One visible control in ten is below the 0.2 fraction.
    let sparse = presence_fixture(|c, _| c == 0, 10, 3);
    assert!(sparse.iter().all(|&p| !p));
}

fn point_set() -> impl Strategy<Value = Vec<Point3<f64>>> {
    prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64, 0.5..2.0f64), 1..60)
        .prop_map(|v| v.into_iter().map(|(x, y, z)| Point3::new(x, y, z)).collect())
}

proptest! {
    #[test]
    fn self_containment_is_one(a in point_set(), r in 1e-4..1.0f64) {
        prop_assert_eq!(containment_score(&a, &a, r).unwrap(), 1.0);
    }

    #[test]
    fn merge_is_order_independent(seed in 0u64..1000, perm_seed in 0u64..1000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut pts = Vec::new();
        let mut parts = Vec::new();
        for i in 0..8u32 {
            let c = [rng.random_range(0..3) as f64 * 0.1, 0.0, 1.0];
            let start = pts.len() as u32;
            pts.extend(blob(c, 3, 0.01));
            parts.push(frame_instance(rng.random_range(0..3), 1 + (i % 2) as u16, start..start + 9));
        }
        let dense = static_dense(&pts, 3);
        let cfg = merge_config(vec![0, 1, 2], 0.015);
        let base = merge_instances(&parts, &dense, &cfg).unwrap();
        let mut shuffled = parts.clone();
        let mut prng = ChaCha8Rng::seed_from_u64(perm_seed);
        for i in (1..shuffled.len()).rev() {
            shuffled.swap(i, prng.random_range(0..=i));
        }
        let other = merge_instances(&shuffled, &dense, &cfg).unwrap();
        let key = |t: &sem4d_core::InstanceTable| t.instances.iter().map(|i| (i.id, i.class_id, i.members.clone())).collect::<Vec<_>>();
        prop_assert_eq!(key(&base), key(&other));
        for inst in &base.instances {
            prop_assert!(inst.contributors.iter().all(|c| c.class_id == inst.class_id));
        }
        prop_assert!(base.check(dense.num_points, 3).is_ok());
    }

    #[test]
    fn cross_class_pairs_never_merge(r in 1e-3..10.0f64, tau in 0.01..1.0f64) {
        let pts = blob([0.0, 0.0, 1.0], 4, 0.01);
        let mut all = pts.clone();
        all.extend(pts.iter().copied());
        let dense = static_dense(&all, 3);
        let parts = vec![frame_instance(0, 1, 0..16), frame_instance(1, 2, 16..32)];
        let cfg = MergeConfig { tau, ..merge_config(vec![0, 1], r) };
        prop_assert_eq!(merge_instances(&parts, &dense, &cfg).unwrap().instances.len(), 2);
    }
}
