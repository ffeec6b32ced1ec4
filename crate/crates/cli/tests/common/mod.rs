//! Independent reference implementations used by the integration suites.
//! Nothing here calls into the code it checks.

#![allow(dead_code)]

use nalgebra::{Vector2, Vector3};

pub type P3 = Vector3<f64>;

/// Facets of the convex hull of `pts` found by brute force over point
/// triples: `(outward unit normal, offset)` with `n·x <= offset` inside.
/// Empty when the points do not span three dimensions.
pub fn brute_hull_facets(pts: &[P3]) -> Vec<(P3, f64)> {
    let scale = pts.iter().map(|p| p.norm()).fold(0.0, f64::max).max(1e-300);
    let tol = 1e-9 * scale;
    let mut planes: Vec<(P3, f64)> = Vec::new();
    let n = pts.len();
    for i in 0..n {
        for j in i + 1..n {
            for k in j + 1..n {
                let raw = (pts[j] - pts[i]).cross(&(pts[k] - pts[i]));
                if raw.norm() <= 1e-12 * scale * scale {
                    continue;
                }
                let mut nrm = raw.normalize();
                let side: Vec<f64> = pts.iter().map(|p| nrm.dot(&(p - pts[i]))).collect();
                let above = side.iter().any(|&s| s > tol);
                let below = side.iter().any(|&s| s < -tol);
                if above && below || !(above || below) {
                    continue;
                }
                if above {
                    nrm = -nrm;
                }
                let off = nrm.dot(&pts[i]);
                if !planes.iter().any(|(m, o)| (m - nrm).norm() < 1e-9 && (o - off).abs() < tol) {
                    planes.push((nrm, off));
                }
            }
        }
    }
    planes
}

/// Area of the convex polygon spanned by coplanar points.
fn planar_hull_area(pts: &[P3], normal: &P3) -> f64 {
    let a = if normal.x.abs() < 0.9 { P3::x() } else { P3::y() };
    let e1 = normal.cross(&a).normalize();
    let e2 = normal.cross(&e1);
    let mut q: Vec<Vector2<f64>> = pts.iter().map(|p| Vector2::new(p.dot(&e1), p.dot(&e2))).collect();
    q.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    q.dedup_by(|a, b| (*a - *b).norm() < 1e-15);
    if q.len() < 3 {
        return 0.0;
    }
    let cross = |o: &Vector2<f64>, a: &Vector2<f64>, b: &Vector2<f64>| (a - o).perp(&(b - o));
    let mut hull: Vec<Vector2<f64>> = Vec::new();
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &Vector2<f64>>> =
            if pass == 0 { Box::new(q.iter()) } else { Box::new(q.iter().rev()) };
        for p in iter {
            while hull.len() >= start + 2 && cross(&hull[hull.len() - 2], &hull[hull.len() - 1], p) <= 0.0 {
                hull.pop();
            }
            hull.push(*p);
        }
        hull.pop();
    }
    let m = hull.len();
    (0..m).map(|i| hull[i].perp(&hull[(i + 1) % m])).sum::<f64>().abs() / 2.0
}

/// Epsilon (origin-to-boundary distance, zero unless strictly interior)
/// and volume of the hull of `pts`, both by brute force.
pub fn brute_hull_metrics(pts: &[P3]) -> (f64, f64) {
    let facets = brute_hull_facets(pts);
    if facets.is_empty() {
        return (0.0, 0.0);
    }
    let eps = facets.iter().map(|(_, o)| *o).fold(f64::INFINITY, f64::min).max(0.0);
    let scale = pts.iter().map(|p| p.norm()).fold(0.0, f64::max);
    let center = pts.iter().sum::<P3>() / pts.len() as f64;
    let mut vol = 0.0;
    for (nrm, off) in &facets {
        let on: Vec<P3> = pts.iter().filter(|p| (nrm.dot(p) - off).abs() <= 1e-9 * scale).copied().collect();
        vol += (off - nrm.dot(&center)) * planar_hull_area(&on, nrm) / 3.0;
    }
    (eps, vol)
}

/// Loss-gradient checker for one scalar parameter: central differences at
/// `h` and `h/2`. Returns `(fd, kinked)` where `kinked` flags a probe whose
/// two estimates disagree, i.e. a piecewise-linear kink inside the stencil.
pub fn central_difference(mut loss_at: impl FnMut(f64) -> f64, x0: f64, h: f64) -> (f64, bool) {
    let fd = |h: f64, f: &mut dyn FnMut(f64) -> f64| (f(x0 + h) - f(x0 - h)) / (2.0 * h);
    let a = fd(h, &mut loss_at);
    let b = fd(h / 2.0, &mut loss_at);
    let kinked = (a - b).abs() > 1e-4 * a.abs().max(b.abs()).max(1e-6);
    (a, kinked)
}

/// Relative error with an absolute floor for vanishing gradients.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6)
}

/// Average ranks of `|d|` over the non-zero differences.
fn ranks_of(d: &[f64]) -> Vec<f64> {
    d.iter()
        .map(|x| {
            let below = d.iter().filter(|y| y.abs() < x.abs()).count() as f64;
            let equal = d.iter().filter(|y| y.abs() == x.abs()).count() as f64;
            below + (equal + 1.0) / 2.0
        })
        .collect()
}

/// Signed-rank test by explicit enumeration of every sign assignment.
/// Returns `(T+, p_less, p_greater)` with `T+` the positive-rank sum of
/// `a - b`, or `None` when no difference is non-zero.
pub fn wilcoxon_enumerate(pairs: &[(f64, f64)]) -> Option<(f64, f64, f64)> {
    let d: Vec<f64> = pairs.iter().map(|(a, b)| a - b).filter(|x| *x != 0.0).collect();
    if d.is_empty() {
        return None;
    }
    let r = ranks_of(&d);
    let t: f64 = d.iter().zip(&r).filter(|(x, _)| **x > 0.0).map(|(_, r)| r).sum();
    let n = d.len();
    let (mut le, mut ge) = (0u64, 0u64);
    for signs in 0u64..1 << n {
        let s: f64 = (0..n).filter(|i| signs >> i & 1 == 1).map(|i| r[i]).sum();
        if s <= t + 1e-9 {
            le += 1;
        }
        if s >= t - 1e-9 {
            ge += 1;
        }
    }
    let total = (1u64 << n) as f64;
    Some((t, le as f64 / total, ge as f64 / total))
}
