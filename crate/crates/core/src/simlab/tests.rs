use super::*;
use crate::dropoutnet::{NetworkParams, NetworkSpec};
use crate::planner::PlanConfig;
use crate::voxelgrid::{jaccard, voxelize_in};
use crate::Vec3;
use proptest::prelude::*;
use rand::Rng;
use std::f64::consts::PI;

fn at_origin(p: Primitive) -> ObjectSpec {
    ObjectSpec::single(p, Pose::default())
}

#[test]
fn sphere_occupancy_matches_volume() {
    for r in [0.025, 0.031, 0.04] {
        let obj = SimObject::new("s".into(), Split::Training, at_origin(Primitive::Sphere { radius: r }), 16).unwrap();
        let cell = obj.grid.resolution().powi(3);
        let expected = 4.0 / 3.0 * PI * r.powi(3) / cell;
        let got = obj.grid.occupied_count() as f64;
        assert!((got - expected).abs() <= 0.1 * expected, "r {r}: {got} vs {expected}");
    }
}

#[test]
fn primitive_meshes_are_closed_with_expected_volume() {
    let cases = [
        (Primitive::Box { half_extents: [0.02, 0.03, 0.04] }, 8.0 * 0.02 * 0.03 * 0.04),
        (Primitive::Cylinder { radius: 0.03, half_height: 0.04 }, PI * 0.03f64.powi(2) * 0.08),
        (Primitive::Sphere { radius: 0.03 }, 4.0 / 3.0 * PI * 0.03f64.powi(3)),
        (
            Primitive::Capsule { radius: 0.02, half_length: 0.03 },
            PI * 0.02f64.powi(2) * 0.06 + 4.0 / 3.0 * PI * 0.02f64.powi(3),
        ),
    ];
    for (p, volume) in cases {
        let m = p.local_mesh();
        assert!(m.is_closed(), "{p:?}");
        let v = m.signed_volume();
        assert!(v > 0.97 * volume && v <= volume * (1.0 + 1e-12), "{p:?}: {v} vs {volume}");
    }
}

#[test]
fn membership_agrees_with_mesh_away_from_the_surface() {
    let mut r = crate::rng::seeded(5);
    for kind in [ShapeKind::Box, ShapeKind::Cylinder, ShapeKind::Sphere, ShapeKind::Capsule, ShapeKind::Composite] {
        let spec = random_object(kind, &mut r);
        let mesh = spec.mesh();
        let mut checked = 0;
        for _ in 0..400 {
            let p = Vec3::new(r.gen_range(-0.08..0.08), r.gen_range(-0.08..0.08), r.gen_range(-0.08..0.08));
            if mesh.distance_to(&p) < 2e-3 {
                continue;
            }
            checked += 1;
            let inside = spec.parts.iter().any(|part| {
                let local = part.pose.inverse_apply(&spec.pose.inverse_apply(&p));
                part.primitive.local_mesh().contains(&local)
            });
            assert_eq!(spec.contains(&p), inside, "{kind:?} at {p:?}");
        }
        assert!(checked > 300);
    }
}

#[test]
fn splits_are_deterministic_and_disjoint_in_kind() {
    let counts = SplitCounts { training: 7, holdout_views: 4, holdout_models: 5 };
    let a = gen_objects(3, &counts, 16).unwrap();
    let b = gen_objects(3, &counts, 16).unwrap();
    assert_eq!(a, b);
    assert_ne!(a.0[0].spec, gen_objects(4, &counts, 16).unwrap().0[0].spec);
    let (train, views, models) = a;
    assert_eq!((train.len(), views.len(), models.len()), (7, 4, 5));
    for m in &models {
        assert!(!train.iter().any(|t| t.spec.kind() == m.spec.kind()));
    }
    for (v, t) in views.iter().zip(&train) {
        assert_eq!(v.spec, t.spec);
        assert_eq!(v.split, Split::HoldoutViews);
    }
    assert!(gen_objects(3, &SplitCounts { holdout_models: 0, ..counts }, 16).is_err());
}

fn sphere_object() -> SimObject {
    SimObject::new("ball".into(), Split::Training, at_origin(Primitive::Sphere { radius: 0.03 }), 16).unwrap()
}

#[test]
fn camera_sees_only_its_own_side() {
    let cfg = CameraConfig::default();
    for obj in [
        sphere_object(),
        SimObject::new("box".into(), Split::Training, at_origin(Primitive::Box { half_extents: [0.02, 0.03, 0.025] }), 16)
            .unwrap(),
    ] {
        let cam = cfg.camera_for(&obj, &Vec3::x()).unwrap();
        let cloud = crate::meshing::depth_render(&obj.mesh, &cam).unwrap();
        assert!(cloud.len() > 100);
        assert!(cloud.points().iter().all(|p| p.x > 0.0));
    }
}

#[test]
fn opposite_views_together_beat_either_alone() {
    let obj = SimObject::new("cyl".into(), Split::Training, at_origin(Primitive::Cylinder { radius: 0.03, half_height: 0.04 }), 16)
        .unwrap();
    let cfg = CameraConfig::default();
    let dir = Vec3::new(1.0, 0.4, 0.3).normalize();
    let render = |d: Vec3| crate::meshing::depth_render(&obj.mesh, &cfg.camera_for(&obj, &d).unwrap()).unwrap();
    let (a, b) = (render(dir), render(-dir));
    let frame = *obj.grid.frame();
    let j = |c: &crate::voxelgrid::PointCloud| jaccard(&voxelize_in(c, frame).unwrap(), &obj.grid).unwrap();
    let union = j(&a.merged(&b));
    assert!(union > j(&a) && union > j(&b), "{union} {} {}", j(&a), j(&b));
}

#[test]
fn views_are_deterministic() {
    let objs = vec![sphere_object()];
    let cfg = CameraConfig::default();
    let a = make_partial_views(&objs, 3, &cfg, 9, "t").unwrap();
    assert_eq!(a, make_partial_views(&objs, 3, &cfg, 9, "t").unwrap());
    assert_ne!(a, make_partial_views(&objs, 3, &cfg, 9, "u").unwrap());
    assert_eq!(a.len(), 3);
    assert!(make_partial_views(&[], 3, &cfg, 9, "t").is_err());
}

/// Brute-force one-sided p: enumerate every sign assignment of the ranks.
fn enumerate_p(ranks: &[f64], t: f64, alt: Alternative) -> f64 {
    let n = ranks.len();
    let mut hits = 0u64;
    for mask in 0u64..(1 << n) {
        let s: f64 = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| ranks[i]).sum();
        let hit = match alt {
            Alternative::Less => s <= t + 1e-9,
            Alternative::Greater => s >= t - 1e-9,
        };
        hits += u64::from(hit);
    }
    hits as f64 / (1u64 << n) as f64
}

#[test]
fn wilcoxon_examples() {
    let same: Vec<_> = (0..8).map(|i| (i as f64, i as f64)).collect();
    assert_eq!(wilcoxon_signed_rank(&same, Alternative::Less), Err(SimError::TooFewPairs(0)));
    let pairs: Vec<_> = (1..=6).map(|i| (0.0, i as f64 * 0.7)).collect();
    let w = wilcoxon_signed_rank(&pairs, Alternative::Less).unwrap();
    assert_eq!((w.t, w.p, w.n, w.exact), (0.0, 0.015625, 6, true));
    let flipped: Vec<_> = pairs.iter().map(|&(a, b)| (b, a)).collect();
    let w = wilcoxon_signed_rank(&flipped, Alternative::Greater).unwrap();
    assert_eq!((w.t, w.p), (21.0, 0.015625));
    assert_eq!(wilcoxon_signed_rank(&flipped, Alternative::Less).unwrap().p, 1.0);
}

#[test]
fn ranks_average_over_ties_and_drop_zeros() {
    let (d, r) = signed_ranks(&[(1.0, 1.0), (3.0, 1.0), (0.0, 2.0), (5.0, 4.0), (0.0, 1.0)]);
    assert_eq!(d, vec![1.0, -1.0, 2.0, -2.0]);
    assert_eq!(r, vec![1.5, 1.5, 3.5, 3.5]);
}

fn small_pairs() -> impl Strategy<Value = Vec<(f64, f64)>> {
    proptest::collection::vec((0u8..6, 0u8..6), 5..=12)
        .prop_map(|v| v.into_iter().map(|(a, b)| (a as f64 * 0.25, b as f64 * 0.25)).collect())
}

proptest! {
    #[test]
    fn exact_path_matches_enumeration(pairs in small_pairs()) {
        let (d, ranks) = signed_ranks(&pairs);
        prop_assume!(d.len() >= MIN_PAIRS);
        for alt in [Alternative::Less, Alternative::Greater] {
            let w = wilcoxon_signed_rank(&pairs, alt).unwrap();
            prop_assert_eq!(w.p, enumerate_p(&ranks, w.t, alt));
            prop_assert!(w.p > 0.0 && w.p <= 1.0);
        }
    }

    #[test]
    fn swapping_pairs_mirrors_the_test(pairs in small_pairs()) {
        let (d, ranks) = signed_ranks(&pairs);
        prop_assume!(d.len() >= MIN_PAIRS);
        let swapped: Vec<_> = pairs.iter().map(|&(a, b)| (b, a)).collect();
        let fwd = wilcoxon_signed_rank(&pairs, Alternative::Less).unwrap();
        let back = wilcoxon_signed_rank(&swapped, Alternative::Less).unwrap();
        let total: f64 = ranks.iter().sum();
        prop_assert_eq!(back.t, total - fwd.t);
        prop_assert_eq!(back.p, enumerate_p(&ranks, fwd.t, Alternative::Greater));
    }

    #[test]
    fn normal_approximation_tracks_exact_at_twelve(xs in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 12)) {
        let (d, ranks) = signed_ranks(&xs);
        prop_assume!(d.len() == 12);
        let t: f64 = d.iter().zip(&ranks).filter(|(d, _)| **d > 0.0).map(|(_, r)| r).sum();
        for alt in [Alternative::Less, Alternative::Greater] {
            prop_assert!((exact_p(&ranks, t, alt) - normal_p(&ranks, t, alt)).abs() <= 0.02);
        }
    }
}

#[test]
fn large_samples_use_the_normal_approximation() {
    let pairs: Vec<_> = (0..30).map(|i| (i as f64 * 0.1, i as f64 * 0.1 + 0.05 + (i % 3) as f64)).collect();
    let w = wilcoxon_signed_rank(&pairs, Alternative::Less).unwrap();
    assert!(!w.exact && w.n == 30 && w.t == 0.0 && w.p < 1e-5);
}

fn tiny_dataset() -> Dataset {
    let cfg = DatasetConfig {
        counts: SplitCounts { training: 3, holdout_views: 2, holdout_models: 5 },
        training_views: 2,
        camera: CameraConfig { width: 24, height: 24, ..Default::default() },
        ..Default::default()
    };
    Dataset::generate(&cfg, 21).unwrap()
}

fn tiny_experiment() -> ExperimentConfig {
    ExperimentConfig {
        samples: 3,
        plan: PlanConfig { candidates: 20, ..Default::default() },
        ground_truth: crate::planner::EvalConfig {
            quality: crate::wrench::QualityConfig { volume_directions: 2048, ..Default::default() },
            ..Default::default()
        },
        splits: vec![Split::HoldoutModels],
        ..Default::default()
    }
}

#[test]
fn dataset_round_trips_through_disk() {
    let ds = tiny_dataset();
    assert_eq!(ds.split(Split::Training).views.len(), 6);
    assert_eq!(ds.training_pairs().unwrap().len(), 6);
    let dir = tempfile::tempdir().unwrap();
    ds.write(dir.path()).unwrap();
    let back = Dataset::read(dir.path()).unwrap();
    assert_eq!(back, ds);
    let again = tempfile::tempdir().unwrap();
    back.write(again.path()).unwrap();
    for f in ["manifest.json", "views/holdout-models/holdout-models-000-v0.xyz", "objects/training/training-001.vgb"] {
        assert_eq!(std::fs::read(dir.path().join(f)).unwrap(), std::fs::read(again.path().join(f)).unwrap(), "{f}");
    }
    std::fs::write(dir.path().join("views/training/training-000-v1.xyz"), "1 2\n").unwrap();
    let err = Dataset::read(dir.path()).unwrap_err().to_string();
    assert!(err.contains("training-000-v1.xyz"), "{err}");
}

#[test]
fn zero_dropout_makes_methods_agree() {
    let ds = tiny_dataset();
    let params = NetworkParams::init(&NetworkSpec::hourglass(16, 0.2), 1).unwrap();
    let cfg = ExperimentConfig { dropout_rate: Some(0.0), ..tiny_experiment() };
    let report = run_experiment(&ds, &params, &cfg, 2).unwrap();
    let views = ds.split(Split::HoldoutModels).views.len() - report.excluded.len();
    assert_eq!(report.rows.len(), views * 2);
    for pair in report.rows.chunks(2) {
        assert_eq!((pair[0].method, pair[1].method), (Method::Ods, Method::Od));
        assert_eq!(pair[0].selections, pair[1].selections);
        assert_eq!(pair[0].jaccard, pair[1].jaccard);
    }
    let s = report.summary(Split::HoldoutModels).unwrap();
    assert!(matches!(s.tests[0].outcome, TestOutcome::TooFewPairs { nonzero: 0 }));
}

#[test]
fn scoring_only_touches_ground_truth_meshes() {
    let ds = tiny_dataset();
    let params = NetworkParams::init(&NetworkSpec::hourglass(16, 0.3), 1).unwrap();
    let cfg = tiny_experiment();
    let report = run_experiment(&ds, &params, &cfg, 2).unwrap();
    let data = ds.split(Split::HoldoutModels);
    for row in &report.rows {
        let obj = data.objects.iter().find(|o| o.id == row.object).unwrap();
        for s in &row.selections {
            assert_eq!(s.scored_on, mesh_hash(&obj.mesh));
        }
    }
    assert_eq!(report, run_experiment(&ds, &params, &cfg, 2).unwrap());
    let other = run_experiment(&ds, &params, &cfg, 3).unwrap();
    assert_eq!(other.rows.len(), report.rows.len());
    assert_eq!(
        other.rows.iter().map(|r| (&r.view, &r.object, r.jaccard_input)).collect::<Vec<_>>(),
        report.rows.iter().map(|r| (&r.view, &r.object, r.jaccard_input)).collect::<Vec<_>>()
    );
    let back = ExperimentReport::from_json(&report.to_json()).unwrap();
    assert_eq!(back, report);
    assert_eq!(report.to_csv().lines().count(), 1 + report.rows.len());
    assert!(report.to_table().contains("holdout-models"));
}
