//! Hard-contact Coulomb friction, grasp wrench spaces and their quality
//! metrics.
//!
//! Both metrics work in any dimension, so the same code scores full 6D
//! grasps and reduced planar problems (3D wrench spaces).
//!
//! * Force closure: a small LP asks for a strictly positive convex
//!   combination of the wrenches that sums to zero, plus a rank check.
//! * Epsilon: the distance from the origin to the nearest facet of the hull.
//!   Facets of the hull are vertices `a` of the polar polytope
//!   `{a : w_i·a <= 1}`, at distance `1/|a|`, so the metric is found by
//!   maximizing `|a|` over that polytope: from the best of many sampled
//!   directions, repeatedly take the vertex that maximizes `u·a` (an LP) and
//!   point `u` at it, then hop between neighbouring facets while that helps.
//!   Every step lands on an exact facet.
//! * Volume: radial integration `v = |S^{d-1}|/d · E[rho(u)^d]` about the
//!   wrench centroid, where the boundary distance `rho` along each sampled
//!   direction is the reciprocal of an LP gauge. For three dimensions an
//!   exact hull is used instead.
//!
//! Sampled directions live in the principal frame of the wrench set, so the
//! results are unchanged when every contact is rotated together.

mod hull3;
pub mod lp;

use nalgebra::{DMatrix, DVector, SymmetricEigen, Vector2};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::{rng, Vec3};
use lp::{minimize, LpOutcome};

pub use hull3::hull_volume as hull_volume_3d;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum WrenchError {
    #[error("grasp has no contacts")]
    NoContacts,
    #[error("invalid contact: {0}")]
    InvalidContact(String),
    #[error("invalid wrench set: {0}")]
    Invalid(String),
}

/// Hard point contact. `normal` points out of the object.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Contact {
    pub point: Vec3,
    pub normal: Vec3,
    pub mu: f64,
}

impl Contact {
    /// Normalizes `normal`; rejects zero or non-finite input and negative `mu`.
    pub fn new(point: Vec3, normal: Vec3, mu: f64) -> Result<Self, WrenchError> {
        let len = normal.norm();
        if !(len.is_finite() && len > 0.0) || !point.iter().all(|c| c.is_finite()) {
            return Err(WrenchError::InvalidContact("point and normal must be finite, normal non-zero".into()));
        }
        if !(mu.is_finite() && mu >= 0.0) {
            return Err(WrenchError::InvalidContact(format!("friction coefficient {mu} must be >= 0")));
        }
        Ok(Self { point, normal: normal / len, mu })
    }
}

/// Contact in the plane for reduced (3D wrench space) problems.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlanarContact {
    pub point: Vector2<f64>,
    pub normal: Vector2<f64>,
    pub mu: f64,
}

pub const DEFAULT_CONE_EDGES: usize = 8;

fn fixed_tangent(n: &Vec3) -> Vec3 {
    let axis = if n.x.abs() <= n.y.abs() && n.x.abs() <= n.z.abs() {
        Vec3::x()
    } else if n.y.abs() <= n.z.abs() {
        Vec3::y()
    } else {
        Vec3::z()
    };
    n.cross(&axis).normalize()
}

/// Cone edges with the first edge tilted toward `reference` projected into
/// the tangent plane (or a fixed tangent if that projection vanishes).
fn cone_edges(contact: &Contact, m: usize, reference: Option<&Vec3>) -> Vec<Vec3> {
    let n = contact.normal;
    if contact.mu == 0.0 {
        return vec![-n];
    }
    let t1 = reference
        .map(|r| r - n * n.dot(r))
        .filter(|t| t.norm() > 1e-9 * (1.0 + reference.map_or(0.0, |r| r.norm())))
        .map(|t| t.normalize())
        .unwrap_or_else(|| fixed_tangent(&n));
    let t2 = n.cross(&t1);
    let alpha = contact.mu.atan();
    let (s, c) = alpha.sin_cos();
    (0..m)
        .map(|k| {
            let theta = 2.0 * std::f64::consts::PI * k as f64 / m as f64;
            (-n * c + (t1 * theta.cos() + t2 * theta.sin()) * s).normalize()
        })
        .collect()
}

/// `m` unit force directions evenly spaced on the friction cone, pressing
/// into the surface. A frictionless contact yields the single edge `-normal`.
pub fn friction_cone_edges(contact: &Contact, m: usize) -> Vec<Vec3> {
    cone_edges(contact, m.max(3), None)
}

/// Unit-force wrenches of a grasp, all of the same dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct WrenchSet {
    dim: usize,
    /// Row-major, one wrench per row.
    data: Vec<f64>,
    lambda: f64,
}

impl WrenchSet {
    pub fn from_vectors(dim: usize, wrenches: &[Vec<f64>], lambda: f64) -> Result<Self, WrenchError> {
        if dim == 0 || wrenches.is_empty() {
            return Err(WrenchError::NoContacts);
        }
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(WrenchError::Invalid(format!("lambda {lambda} must be > 0")));
        }
        let mut data = Vec::with_capacity(dim * wrenches.len());
        for w in wrenches {
            if w.len() != dim || !w.iter().all(|v| v.is_finite()) {
                return Err(WrenchError::Invalid(format!("expected {dim} finite entries per wrench")));
            }
            data.extend_from_slice(w);
        }
        Ok(Self { dim, data, lambda })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn wrench(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn wrenches(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks(self.dim)
    }

    /// Every wrench multiplied by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        Self { data: self.data.iter().map(|v| v * c).collect(), ..self.clone() }
    }

    /// Copy with one more wrench.
    pub fn with_wrench(&self, w: &[f64]) -> Result<Self, WrenchError> {
        if w.len() != self.dim || !w.iter().all(|v| v.is_finite()) {
            return Err(WrenchError::Invalid("wrench dimension mismatch".into()));
        }
        let mut out = self.clone();
        out.data.extend_from_slice(w);
        Ok(out)
    }

    fn matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.len(), self.dim, &self.data)
    }
}

/// Torque scale: the largest contact distance from `origin`.
pub fn default_lambda(contacts: &[Contact], origin: &Vec3) -> f64 {
    contacts.iter().map(|c| (c.point - origin).norm()).fold(0.0, f64::max)
}

/// Wrenches `(f, (p - origin) x f / lambda)` for every cone edge `f` of every
/// contact.
pub fn wrench_set(contacts: &[Contact], m: usize, lambda: f64, origin: &Vec3) -> Result<WrenchSet, WrenchError> {
    if contacts.is_empty() {
        return Err(WrenchError::NoContacts);
    }
    let mut rows = Vec::new();
    for c in contacts {
        let arm = c.point - origin;
        // Phase the cone by the lever arm so the set rotates with the grasp.
        for f in cone_edges(c, m.max(3), Some(&arm)) {
            let t = arm.cross(&f) / lambda;
            rows.push(vec![f.x, f.y, f.z, t.x, t.y, t.z]);
        }
    }
    WrenchSet::from_vectors(6, &rows, lambda)
}

/// Planar wrenches `(fx, fy, (p - origin) x f / lambda)`. A frictional
/// contact contributes the two edges of its planar cone.
pub fn planar_wrench_set(
    contacts: &[PlanarContact],
    lambda: f64,
    origin: &Vector2<f64>,
) -> Result<WrenchSet, WrenchError> {
    if contacts.is_empty() {
        return Err(WrenchError::NoContacts);
    }
    let mut rows = Vec::new();
    for c in contacts {
        let n = c.normal.normalize();
        let t = Vector2::new(-n.y, n.x);
        let alpha = c.mu.atan();
        let edges = if c.mu == 0.0 {
            vec![-n]
        } else {
            vec![-n * alpha.cos() + t * alpha.sin(), -n * alpha.cos() - t * alpha.sin()]
        };
        let arm = c.point - origin;
        for f in edges {
            rows.push(vec![f.x, f.y, (arm.x * f.y - arm.y * f.x) / lambda]);
        }
    }
    WrenchSet::from_vectors(3, &rows, lambda)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QualityConfig {
    /// Directions sampled to seed the epsilon search.
    pub epsilon_directions: usize,
    /// Best seeds refined by the facet ascent.
    pub epsilon_refine: usize,
    /// Directions for the volume integral (antithetic pairs count twice).
    /// Zero skips the volume metric.
    pub volume_directions: usize,
    pub seed: u64,
}

impl Default for QualityConfig {
    fn default() -> Self {
        Self { epsilon_directions: 4096, epsilon_refine: 8, volume_directions: 16384, seed: 0x5eed }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct GraspQuality {
    pub epsilon: f64,
    pub v: f64,
    pub force_closure: bool,
}

impl GraspQuality {
    pub const NONE: GraspQuality = GraspQuality { epsilon: 0.0, v: 0.0, force_closure: false };
}

/// Wrenches expressed in an orthonormal frame fixed by the set itself:
/// eigenvectors of the second-moment matrix (about `center`), ordered by
/// eigenvalue, signed by the third moment.
struct Frame {
    /// `n x d` coordinates.
    w: DMatrix<f64>,
}

fn principal_frame(ws: &WrenchSet, center: &DVector<f64>) -> Frame {
    let d = ws.dim;
    let mut w = ws.matrix();
    for mut row in w.row_iter_mut() {
        row -= center.transpose();
    }
    let m = w.transpose() * &w;
    let eig = SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let mut basis = DMatrix::zeros(d, d);
    for (k, &j) in order.iter().enumerate() {
        let mut e = eig.eigenvectors.column(j).into_owned();
        let proj = &w * &e;
        let third: f64 = proj.iter().map(|p| p * p * p).sum();
        let flip = if third.abs() > 1e-12 * proj.amax().powi(3).max(1e-300) {
            third < 0.0
        } else {
            // Symmetric along this axis: fall back to the first clear component.
            e.iter().find(|c| c.abs() > 1e-6).is_some_and(|c| *c < 0.0)
        };
        if flip {
            e = -e;
        }
        basis.set_column(k, &e);
    }
    Frame { w: w * basis }
}

fn rank(w: &DMatrix<f64>) -> usize {
    if w.nrows() == 0 {
        return 0;
    }
    let sv = w.clone().svd(false, false).singular_values;
    let top = sv.max();
    if top <= 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > 1e-9 * top).count()
}

fn row_major(w: &DMatrix<f64>) -> Vec<f64> {
    let mut out = Vec::with_capacity(w.len());
    for r in 0..w.nrows() {
        out.extend(w.row(r).iter());
    }
    out
}

/// LP `min sum(y) s.t. sum y_i w_i = u, y >= 0` with `a_t` the `d x n`
/// constraint matrix (row-major).
fn gauge(a_t: &[f64], n: usize, u: &[f64]) -> LpOutcome {
    minimize(a_t, u, &vec![1.0; n])
}

fn transpose_rows(w: &DMatrix<f64>) -> Vec<f64> {
    row_major(&w.transpose())
}

fn sample_direction(r: &mut impl Rng, d: usize) -> DVector<f64> {
    loop {
        let v = DVector::from_fn(d, |_, _| r.sample::<f64, _>(StandardNormal));
        let n = v.norm();
        if n > 1e-12 {
            return v / n;
        }
    }
}

/// True iff the origin is strictly inside the hull of the wrenches.
pub fn force_closure(ws: &WrenchSet) -> bool {
    let (n, d) = (ws.len(), ws.dim);
    if n <= d || rank(&ws.matrix()) < d {
        return false;
    }
    // Variables (s, mu_1..mu_n) >= 0 with lambda_i = s + mu_i:
    //   s * sum(w) + sum(mu_i w_i) = 0,  n s + sum(mu) = 1,  maximize s.
    let cols = n + 1;
    let mut a = vec![0.0; (d + 1) * cols];
    for k in 0..d {
        let row = &mut a[k * cols..(k + 1) * cols];
        for i in 0..n {
            let v = ws.data[i * d + k];
            row[0] += v;
            row[i + 1] = v;
        }
    }
    let last = &mut a[d * cols..];
    last[0] = n as f64;
    last[1..].fill(1.0);
    let mut b = vec![0.0; d + 1];
    b[d] = 1.0;
    let mut c = vec![0.0; cols];
    c[0] = -1.0;
    match minimize(&a, &b, &c) {
        LpOutcome::Optimal { x, .. } => x[0] > 1e-12,
        _ => false,
    }
}

/// Support function `max_i w_i·u`.
fn support(w: &DMatrix<f64>, u: &DVector<f64>) -> f64 {
    (w * u).max()
}

/// Radius of the largest origin-centered ball inside the hull; 0 without
/// force closure.
pub fn epsilon_measure(ws: &WrenchSet, cfg: &QualityConfig) -> f64 {
    if !force_closure(ws) {
        return 0.0;
    }
    let d = ws.dim;
    let frame = principal_frame(ws, &DVector::zeros(d));
    let w = &frame.w;
    let a_t = transpose_rows(w);
    let n = ws.len();

    let mut r = rng::stream(cfg.seed, "epsilon", 0);
    let mut seeds: Vec<(f64, DVector<f64>)> = (0..cfg.epsilon_directions.max(1))
        .map(|_| {
            let u = sample_direction(&mut r, d);
            (support(w, &u), u)
        })
        .collect();
    seeds.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut best = seeds[0].0;

    for (_, seed) in seeds.iter().take(cfg.epsilon_refine.max(1)) {
        let mut u = seed.clone();
        let mut last = f64::INFINITY;
        let mut basis = Vec::new();
        for _ in 0..64 {
            let LpOutcome::Optimal { basis: b, .. } = gauge(&a_t, n, u.as_slice()) else {
                break;
            };
            if b.iter().any(|&j| j >= n) {
                break;
            }
            let Some(a) = facet(w, &b) else { break };
            let next = a.normalize();
            // h at any unit direction bounds the metric from above.
            let dist = support(w, &next);
            best = best.min(dist);
            basis = b;
            if dist >= last * (1.0 - 1e-13) {
                break;
            }
            last = dist;
            u = next;
        }
        if !basis.is_empty() {
            best = best.min(climb(w, basis));
        }
    }
    best.max(0.0)
}

/// Normal `a` of the hyperplane `w_j·a = 1` through the wrenches in `basis`.
fn facet(w: &DMatrix<f64>, basis: &[usize]) -> Option<DVector<f64>> {
    let d = w.ncols();
    let wb = DMatrix::from_fn(d, d, |r, c| w[(basis[r], c)]);
    let a = wb.lu().solve(&DVector::from_element(d, 1.0))?;
    let len = a.norm();
    (len.is_finite() && len > 0.0).then_some(a)
}

/// Walk across ridges to neighbouring facets while that moves the facet
/// farther from the origin. The neighbour across the ridge opposite basis
/// point `r` is found by rotating the hyperplane about the ridge until it
/// meets another wrench (gift wrapping). Returns the smallest support value
/// seen, which bounds the metric from above.
fn climb(w: &DMatrix<f64>, mut basis: Vec<usize>) -> f64 {
    let (n, d) = (w.nrows(), w.ncols());
    let mut best = f64::INFINITY;
    for _ in 0..10 * n {
        let wb = DMatrix::from_fn(d, d, |r, c| w[(basis[r], c)]);
        let lu = wb.lu();
        let Some(a) = lu.solve(&DVector::from_element(d, 1.0)) else { break };
        let wa = w * &a;
        best = best.min(support(w, &a.normalize()));
        let mut next: Option<(f64, usize, usize)> = None;
        for r in 0..d {
            let mut e = DVector::zeros(d);
            e[r] = -1.0;
            let Some(b) = lu.solve(&e) else { continue };
            let wbv = w * &b;
            let scale = b.norm() * w.amax();
            let mut hit: Option<(f64, usize)> = None;
            for j in 0..n {
                if basis.contains(&j) || wbv[j] <= 1e-12 * scale {
                    continue;
                }
                let t = (1.0 - wa[j]).max(0.0) / wbv[j];
                if hit.is_none_or(|(bt, _)| t < bt) {
                    hit = Some((t, j));
                }
            }
            let Some((t, j)) = hit else { continue };
            let len = (&a + &b * t).norm();
            if len > a.norm() * (1.0 + 1e-12) && next.is_none_or(|(bl, _, _)| len > bl) {
                next = Some((len, r, j));
            }
        }
        match next {
            Some((_, r, j)) => basis[r] = j,
            None => break,
        }
    }
    best
}

fn unit_sphere_area(d: usize) -> f64 {
    let half = d as f64 / 2.0;
    2.0 * std::f64::consts::PI.powf(half) / statrs::function::gamma::gamma(half)
}

/// Volume of the hull of the wrenches; exact in three dimensions, a
/// seeded radial Monte-Carlo estimate otherwise.
pub fn v_measure(ws: &WrenchSet, cfg: &QualityConfig) -> f64 {
    if ws.dim == 3 {
        let pts: Vec<nalgebra::Vector3<f64>> =
            ws.wrenches().map(nalgebra::Vector3::from_column_slice).collect();
        return hull3::hull_volume(&pts);
    }
    v_measure_sampled(ws, cfg)
}

/// Radial Monte-Carlo volume in any dimension.
pub fn v_measure_sampled(ws: &WrenchSet, cfg: &QualityConfig) -> f64 {
    let (n, d) = (ws.len(), ws.dim);
    if n <= d || cfg.volume_directions == 0 {
        return 0.0;
    }
    let center = ws.matrix().row_mean().transpose();
    let frame = principal_frame(ws, &center);
    if rank(&frame.w) < d {
        return 0.0;
    }
    let a_t = transpose_rows(&frame.w);
    let pairs = cfg.volume_directions.div_ceil(2);
    let mut r = rng::stream(cfg.seed, "volume", 0);
    let dirs: Vec<DVector<f64>> = (0..pairs).map(|_| sample_direction(&mut r, d)).collect();
    let terms: Vec<f64> = dirs
        .par_iter()
        .map(|u| {
            let neg = -u;
            [u, &neg]
                .iter()
                .map(|dir| match gauge(&a_t, n, dir.as_slice()) {
                    LpOutcome::Optimal { value, .. } if value > 0.0 => value.powi(-(d as i32)),
                    _ => 0.0,
                })
                .sum::<f64>()
        })
        .collect();
    let mean = terms.iter().sum::<f64>() / (2 * pairs) as f64;
    unit_sphere_area(d) / d as f64 * mean
}

/// Force closure, epsilon and (when enabled) volume of a wrench set.
pub fn grasp_quality(ws: &WrenchSet, cfg: &QualityConfig) -> GraspQuality {
    let epsilon = epsilon_measure(ws, cfg);
    let v = if cfg.volume_directions > 0 { v_measure(ws, cfg) } else { 0.0 };
    GraspQuality { epsilon, v, force_closure: epsilon > 0.0 }
}

#[cfg(test)]
mod tests;
