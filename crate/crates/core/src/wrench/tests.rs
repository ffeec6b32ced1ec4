use super::*;
use nalgebra::Rotation3;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};

fn cross_polytope(d: usize) -> WrenchSet {
    let mut rows = Vec::new();
    for k in 0..d {
        for s in [1.0, -1.0] {
            let mut w = vec![0.0; d];
            w[k] = s;
            rows.push(w);
        }
    }
    WrenchSet::from_vectors(d, &rows, 1.0).unwrap()
}

fn contact(p: [f64; 3], n: [f64; 3], mu: f64) -> Contact {
    Contact::new(Vec3::from(p), Vec3::from(n), mu).unwrap()
}

#[test]
fn frictionless_cone_is_inward_normal() {
    let c = contact([1.0, 2.0, 3.0], [0.0, 3.0, 4.0], 0.0);
    assert_eq!(friction_cone_edges(&c, 8), vec![Vec3::new(0.0, -0.6, -0.8)]);
}

#[test]
fn unit_friction_four_edges_at_45_degrees() {
    let c = contact([0.0; 3], [0.0, 0.0, 1.0], 1.0);
    let e = friction_cone_edges(&c, 4);
    assert_eq!(e.len(), 4);
    for f in &e {
        assert!((f.norm() - 1.0).abs() < 1e-12);
        assert!((f.dot(&-Vec3::z()) - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-9);
    }
    // Opposite edges mirror each other through the cone axis.
    for k in 0..2 {
        let s = e[k] + e[k + 2];
        assert!(s.x.abs() < 1e-12 && s.y.abs() < 1e-12 && s.z < 0.0);
    }
}

proptest! {
    #[test]
    fn cone_edges_have_the_friction_angle(
        mu in 0.01f64..3.0, m in 3usize..16,
        nx in -1.0f64..1.0, ny in -1.0f64..1.0, nz in -1.0f64..1.0,
    ) {
        prop_assume!(Vec3::new(nx, ny, nz).norm() > 0.1);
        let c = contact([0.0; 3], [nx, ny, nz], mu);
        let e = friction_cone_edges(&c, m);
        prop_assert_eq!(e.len(), m);
        let cos = mu.atan().cos();
        for f in &e {
            prop_assert!((f.dot(&-c.normal) - cos).abs() < 1e-9);
        }
        let mean = e.iter().sum::<Vec3>() / m as f64;
        prop_assert!(mean.cross(&c.normal).norm() < 1e-9);
        prop_assert!(mean.dot(&c.normal) < 0.0);
    }
}

#[test]
fn contact_validation() {
    assert!(Contact::new(Vec3::zeros(), Vec3::zeros(), 0.5).is_err());
    assert!(Contact::new(Vec3::zeros(), Vec3::x(), -0.1).is_err());
    let c = Contact::new(Vec3::zeros(), Vec3::new(0.0, 0.0, 2.0), 0.5).unwrap();
    assert!((c.normal.norm() - 1.0).abs() < 1e-15);
}

#[test]
fn zero_lever_arm_gives_zero_torque() {
    let c = contact([0.0; 3], [0.3, -0.2, 0.9], 0.7);
    let ws = wrench_set(&[c], 8, 1.0, &Vec3::zeros()).unwrap();
    for w in ws.wrenches() {
        assert_eq!(&w[3..], &[0.0, 0.0, 0.0]);
    }
    assert_eq!(wrench_set(&[], 8, 1.0, &Vec3::zeros()).unwrap_err(), WrenchError::NoContacts);
}

#[test]
fn antipodal_frictionless_pair() {
    let cs = [contact([1.0, 0.0, 0.0], [1.0, 0.0, 0.0], 0.0), contact([-1.0, 0.0, 0.0], [-1.0, 0.0, 0.0], 0.0)];
    let ws = wrench_set(&cs, 8, 1.0, &Vec3::zeros()).unwrap();
    let rows: Vec<&[f64]> = ws.wrenches().collect();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0], &[-1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
    assert_eq!(rows[1], &[1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
}

/// Moving the torque origin by `delta` adds `-delta x f / lambda` to each
/// torque (cone edges are phased by a fixed tangent here so the forces stay
/// put).
#[test]
fn translated_origin_shifts_torques() {
    let cs = [contact([0.2, 0.1, -0.3], [0.0, 0.0, 1.0], 0.0), contact([-0.5, 0.4, 0.0], [1.0, 1.0, 0.0], 0.0)];
    let delta = Vec3::new(0.3, -0.7, 0.2);
    let lambda = 0.8;
    let a = wrench_set(&cs, 8, lambda, &Vec3::zeros()).unwrap();
    let b = wrench_set(&cs, 8, lambda, &delta).unwrap();
    for (wa, wb) in a.wrenches().zip(b.wrenches()) {
        let f = Vec3::from_column_slice(&wa[..3]);
        let expect = Vec3::from_column_slice(&wa[3..]) - delta.cross(&f) / lambda;
        assert!((Vec3::from_column_slice(&wb[3..]) - expect).norm() < 1e-15);
    }
}

#[test]
fn cross_polytope_closed_forms() {
    let ws = cross_polytope(6);
    let cfg = QualityConfig::default();
    assert!(force_closure(&ws));
    let eps = epsilon_measure(&ws, &cfg);
    assert!((eps - 1.0 / 6f64.sqrt()).abs() < 1e-9, "epsilon {eps}");
    let v = v_measure(&ws, &cfg);
    let exact = 64.0 / 720.0;
    assert!((v - exact).abs() / exact < 0.05, "v {v}");
}

#[test]
fn degenerate_sets() {
    let cfg = QualityConfig::default();
    let one = WrenchSet::from_vectors(6, &[vec![1.0, 0.0, 0.0, 0.0, 0.0, 0.0]], 1.0).unwrap();
    assert_eq!(epsilon_measure(&one, &cfg), 0.0);
    assert!(!force_closure(&one));
    let six: Vec<Vec<f64>> = (0..6).map(|k| (0..6).map(|j| if j == k { 1.0 } else { -0.1 }).collect()).collect();
    let ws = WrenchSet::from_vectors(6, &six, 1.0).unwrap();
    assert_eq!(v_measure(&ws, &cfg), 0.0);
    assert_eq!(epsilon_measure(&ws, &cfg), 0.0);
}

#[test]
fn half_space_sets_are_not_closed() {
    let mut r = rand_chacha::ChaCha8Rng::seed_from_u64(2);
    let u = sample_direction(&mut r, 6);
    let rows: Vec<Vec<f64>> = (0..40)
        .map(|_| {
            let mut w = sample_direction(&mut r, 6);
            let s = w.dot(&u);
            if s >= 0.0 {
                w -= &u * (s + 0.01);
            }
            w.iter().copied().collect()
        })
        .collect();
    let ws = WrenchSet::from_vectors(6, &rows, 1.0).unwrap();
    assert!(!force_closure(&ws));
    assert_eq!(epsilon_measure(&ws, &QualityConfig::default()), 0.0);
}

/// Two antipodal point contacts cannot resist torsion about the line
/// joining them, whatever the friction; two antipodal pads can.
#[test]
fn antipodal_contacts_on_a_sphere() {
    let cfg = QualityConfig { volume_directions: 0, ..Default::default() };
    let r = 0.05;
    let points = |mu| vec![contact([r, 0.0, 0.0], [1.0, 0.0, 0.0], mu), contact([-r, 0.0, 0.0], [-1.0, 0.0, 0.0], mu)];
    for mu in [0.0, 0.5] {
        let cs = points(mu);
        let ws = wrench_set(&cs, 8, default_lambda(&cs, &Vec3::zeros()), &Vec3::zeros()).unwrap();
        assert!(!force_closure(&ws));
    }
    let pads = |mu| {
        let mut cs = Vec::new();
        for s in [1.0, -1.0] {
            // Points on the sphere around each pole, normals radial.
            for (a, b) in [(0.2, 0.2), (0.2, -0.2), (-0.2, 0.2), (-0.2, -0.2)] {
                let n = Vec3::new(s, a, b).normalize();
                cs.push(Contact::new(n * r, n, mu).unwrap());
            }
        }
        cs
    };
    let frictional = pads(0.5);
    let ws = wrench_set(&frictional, 8, default_lambda(&frictional, &Vec3::zeros()), &Vec3::zeros()).unwrap();
    assert!(force_closure(&ws));
    assert!(grasp_quality(&ws, &cfg).epsilon > 0.0);
    let smooth = pads(0.0);
    let ws = wrench_set(&smooth, 8, default_lambda(&smooth, &Vec3::zeros()), &Vec3::zeros()).unwrap();
    assert!(!force_closure(&ws));
    assert_eq!(grasp_quality(&ws, &cfg).epsilon, 0.0);
}

fn random_grasp(r: &mut impl Rng, contacts: usize, mu: f64) -> Vec<Contact> {
    (0..contacts)
        .map(|_| {
            let n = Vec3::from_column_slice(sample_direction(r, 3).as_slice());
            let p = n * r.gen_range(0.03..0.08) + Vec3::from_fn(|_, _| r.gen_range(-0.01..0.01));
            Contact::new(p, n, mu).unwrap()
        })
        .collect()
}

fn quality(cs: &[Contact], cfg: &QualityConfig) -> GraspQuality {
    let ws = wrench_set(cs, 8, default_lambda(cs, &Vec3::zeros()), &Vec3::zeros()).unwrap();
    grasp_quality(&ws, cfg)
}

#[test]
fn scaling_is_homogeneous() {
    let mut r = rand_chacha::ChaCha8Rng::seed_from_u64(5);
    let cfg = QualityConfig { volume_directions: 2000, ..Default::default() };
    let ws = loop {
        let cs = random_grasp(&mut r, 4, 0.6);
        let ws = wrench_set(&cs, 8, 0.1, &Vec3::zeros()).unwrap();
        if force_closure(&ws) {
            break ws;
        }
    };
    let (e, v) = (epsilon_measure(&ws, &cfg), v_measure(&ws, &cfg));
    assert!(e > 0.0 && v > 0.0);
    for c in [0.5, 3.0] {
        let s = ws.scaled(c);
        assert!((epsilon_measure(&s, &cfg) - c * e).abs() < 1e-9 * c * e);
        assert!((v_measure(&s, &cfg) - c.powi(6) * v).abs() < 1e-9 * c.powi(6) * v);
    }
}

#[test]
fn rigid_rotation_leaves_metrics_unchanged() {
    let mut r = rand_chacha::ChaCha8Rng::seed_from_u64(8);
    let cfg = QualityConfig { volume_directions: 2000, ..Default::default() };
    let mut tested = 0;
    while tested < 6 {
        let cs = random_grasp(&mut r, 4, 0.5);
        let q = quality(&cs, &cfg);
        if !q.force_closure {
            continue;
        }
        let axis = Vec3::from_column_slice(sample_direction(&mut r, 3).as_slice());
        let rot = Rotation3::from_axis_angle(&nalgebra::Unit::new_normalize(axis), r.gen_range(0.1..3.0));
        let rotated: Vec<Contact> =
            cs.iter().map(|c| Contact::new(rot * c.point, rot * c.normal, c.mu).unwrap()).collect();
        let qr = quality(&rotated, &cfg);
        assert!((q.epsilon - qr.epsilon).abs() < 1e-6, "{q:?} vs {qr:?}");
        assert!((q.v - qr.v).abs() < 1e-6 * q.v.max(1.0), "{q:?} vs {qr:?}");
        tested += 1;
    }
}

#[test]
fn epsilon_positive_iff_force_closure() {
    let mut r = rand_chacha::ChaCha8Rng::seed_from_u64(13);
    let cfg = QualityConfig { volume_directions: 0, ..Default::default() };
    let (mut yes, mut no) = (0, 0);
    for i in 0..60 {
        let cs = random_grasp(&mut r, 2 + i % 4, [0.0, 0.3, 0.8][i % 3]);
        let ws = wrench_set(&cs, 8, default_lambda(&cs, &Vec3::zeros()), &Vec3::zeros()).unwrap();
        let fc = force_closure(&ws);
        assert_eq!(epsilon_measure(&ws, &cfg) > 0.0, fc);
        if fc {
            yes += 1;
        } else {
            no += 1;
        }
    }
    assert!(yes > 5 && no > 5, "{yes} closed, {no} open");
}

/// Adding a wrench never shrinks the hull. Epsilon is an exact facet
/// distance; the volume estimate is compared with the slack of its sampling
/// error.
#[test]
fn adding_a_wrench_is_monotone() {
    let mut r = rand_chacha::ChaCha8Rng::seed_from_u64(21);
    let cfg = QualityConfig { volume_directions: 8000, ..Default::default() };
    for _ in 0..8 {
        let cs = random_grasp(&mut r, 4, 0.5);
        let ws = wrench_set(&cs, 8, 0.08, &Vec3::zeros()).unwrap();
        let extra: Vec<f64> = sample_direction(&mut r, 6).iter().map(|v| v * r.gen_range(0.2..1.5)).collect();
        let more = ws.with_wrench(&extra).unwrap();
        assert!(epsilon_measure(&more, &cfg) >= epsilon_measure(&ws, &cfg) - 1e-12);
        let (v0, v1) = (v_measure(&ws, &cfg), v_measure(&more, &cfg));
        assert!(v1 >= v0 * 0.97, "{v0} -> {v1}");
    }
}

#[test]
fn planar_sets_are_three_dimensional() {
    let cs = [
        PlanarContact { point: Vector2::new(1.0, 0.0), normal: Vector2::new(1.0, 0.0), mu: 0.0 },
        PlanarContact { point: Vector2::new(0.0, 1.0), normal: Vector2::new(0.0, 1.0), mu: 0.5 },
    ];
    let ws = planar_wrench_set(&cs, 1.0, &Vector2::zeros()).unwrap();
    assert_eq!(ws.dim(), 3);
    assert_eq!(ws.len(), 3);
    assert_eq!(ws.wrench(0), &[-1.0, 0.0, 0.0]);
}
