//! Incremental convex hull in three dimensions, used for exact volumes of
//! planar-grasp wrench spaces.

use std::collections::HashMap;

use nalgebra::Vector3;

type P = Vector3<f64>;

struct Face {
    v: [usize; 3],
    normal: P,
    offset: f64,
    alive: bool,
}

impl Face {
    fn new(pts: &[P], v: [usize; 3]) -> Self {
        let n = (pts[v[1]] - pts[v[0]]).cross(&(pts[v[2]] - pts[v[0]]));
        let normal = n / n.norm();
        Face { v, normal, offset: normal.dot(&pts[v[0]]), alive: true }
    }

    fn height(&self, p: &P) -> f64 {
        self.normal.dot(p) - self.offset
    }
}

/// Volume of the convex hull of `pts`; 0 when they are (nearly) coplanar.
pub fn hull_volume(pts: &[P]) -> f64 {
    let scale = pts.iter().map(|p| p.amax()).fold(0.0, f64::max).max(1e-300);
    let eps = 1e-10 * scale;
    let Some(seed) = initial_tetrahedron(pts, eps) else {
        return 0.0;
    };
    let inside = seed.iter().map(|&i| pts[i]).sum::<P>() / 4.0;
    let mut faces: Vec<Face> = Vec::new();
    let [a, b, c, d] = seed;
    for tri in [[a, b, c], [a, b, d], [a, c, d], [b, c, d]] {
        let mut f = Face::new(pts, tri);
        if f.height(&inside) > 0.0 {
            f = Face::new(pts, [tri[0], tri[2], tri[1]]);
        }
        faces.push(f);
    }
    for (i, p) in pts.iter().enumerate() {
        if seed.contains(&i) {
            continue;
        }
        let visible: Vec<usize> = (0..faces.len())
            .filter(|&f| faces[f].alive && faces[f].height(p) > eps)
            .collect();
        if visible.is_empty() {
            continue;
        }
        // Directed edges of visible faces; a horizon edge has no reverse.
        let mut edges: HashMap<(usize, usize), ()> = HashMap::new();
        for &f in &visible {
            let v = faces[f].v;
            for e in 0..3 {
                edges.insert((v[e], v[(e + 1) % 3]), ());
            }
            faces[f].alive = false;
        }
        let mut horizon: Vec<(usize, usize)> =
            edges.keys().filter(|&&(x, y)| !edges.contains_key(&(y, x))).copied().collect();
        horizon.sort_unstable();
        for (x, y) in horizon {
            let f = Face::new(pts, [x, y, i]);
            faces.push(f);
        }
    }
    faces
        .iter()
        .filter(|f| f.alive)
        .map(|f| {
            let [a, b, c] = f.v.map(|k| pts[k] - inside);
            a.dot(&b.cross(&c)) / 6.0
        })
        .sum()
}

fn initial_tetrahedron(pts: &[P], eps: f64) -> Option<[usize; 4]> {
    let a = 0;
    let b = (0..pts.len()).max_by(|&i, &j| (pts[i] - pts[a]).norm().total_cmp(&(pts[j] - pts[a]).norm()))?;
    if (pts[b] - pts[a]).norm() <= eps {
        return None;
    }
    let ab = pts[b] - pts[a];
    let c = (0..pts.len())
        .max_by(|&i, &j| ab.cross(&(pts[i] - pts[a])).norm().total_cmp(&ab.cross(&(pts[j] - pts[a])).norm()))?;
    let n = ab.cross(&(pts[c] - pts[a]));
    if n.norm() <= eps * ab.norm() {
        return None;
    }
    let n = n.normalize();
    let d = (0..pts.len())
        .max_by(|&i, &j| n.dot(&(pts[i] - pts[a])).abs().total_cmp(&n.dot(&(pts[j] - pts[a])).abs()))?;
    if n.dot(&(pts[d] - pts[a])).abs() <= eps {
        return None;
    }
    Some([a, b, c, d])
}
