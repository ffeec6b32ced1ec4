//! Dense two-phase simplex for the tiny linear programs behind the wrench
//! metrics (a handful of rows, a few hundred columns). Bland's rule keeps
//! it cycle-free; the problems are too small for anything cleverer to pay.

const TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    Optimal { x: Vec<f64>, value: f64, basis: Vec<usize> },
    Infeasible,
    Unbounded,
}

struct Tableau {
    /// `rows` constraint rows followed by the objective row; each row has
    /// `cols` coefficients then the right-hand side.
    t: Vec<f64>,
    rows: usize,
    cols: usize,
    basis: Vec<usize>,
}

impl Tableau {
    #[inline]
    fn at(&self, r: usize, c: usize) -> f64 {
        self.t[r * (self.cols + 1) + c]
    }

    #[inline]
    fn rhs(&self, r: usize) -> f64 {
        self.t[r * (self.cols + 1) + self.cols]
    }

    fn pivot(&mut self, pr: usize, pc: usize) {
        let w = self.cols + 1;
        let p = self.at(pr, pc);
        for c in 0..w {
            self.t[pr * w + c] /= p;
        }
        let (before, rest) = self.t.split_at_mut(pr * w);
        let (prow, after) = rest.split_at_mut(w);
        for row in before.chunks_mut(w).chain(after.chunks_mut(w)) {
            let f = row[pc];
            if f != 0.0 {
                for (v, &pv) in row.iter_mut().zip(prow.iter()) {
                    *v -= f * pv;
                }
                row[pc] = 0.0;
            }
        }
        self.basis[pr] = pc;
    }

    /// Minimize the objective row over columns `0..allowed`. Returns false
    /// if unbounded.
    fn optimize(&mut self, allowed: usize) -> bool {
        let obj = self.rows;
        loop {
            let Some(pc) = (0..allowed).find(|&c| self.at(obj, c) < -TOL) else {
                return true;
            };
            let mut best: Option<(f64, usize, usize)> = None;
            for r in 0..self.rows {
                let a = self.at(r, pc);
                if a > TOL {
                    let ratio = self.rhs(r) / a;
                    let better = match best {
                        None => true,
                        Some((br, _, bb)) => ratio < br - TOL || (ratio <= br + TOL && self.basis[r] < bb),
                    };
                    if better {
                        best = Some((ratio, r, self.basis[r]));
                    }
                }
            }
            match best {
                Some((_, pr, _)) => self.pivot(pr, pc),
                None => return false,
            }
        }
    }
}

/// Minimize `c·x` subject to `A x = b`, `x >= 0`. `a` is row-major with
/// `b.len()` rows of `c.len()` entries.
pub fn minimize(a: &[f64], b: &[f64], c: &[f64]) -> LpOutcome {
    let m = b.len();
    let n = c.len();
    debug_assert_eq!(a.len(), m * n);
    let cols = n + m;
    let w = cols + 1;
    let mut t = vec![0.0; (m + 1) * w];
    for r in 0..m {
        let sign = if b[r] < 0.0 { -1.0 } else { 1.0 };
        for j in 0..n {
            t[r * w + j] = sign * a[r * n + j];
        }
        t[r * w + n + r] = 1.0;
        t[r * w + cols] = sign * b[r];
    }
    // Phase one: minimize the sum of artificials, written in terms of the
    // non-basic columns.
    for r in 0..m {
        for j in 0..n {
            t[m * w + j] -= t[r * w + j];
        }
        t[m * w + cols] -= t[r * w + cols];
    }
    let mut tab = Tableau { t, rows: m, cols, basis: (n..n + m).collect() };
    tab.optimize(n);
    let scale = 1.0 + b.iter().fold(0.0f64, |s, v| s.max(v.abs()));
    if -tab.rhs(m) > 1e-9 * scale {
        return LpOutcome::Infeasible;
    }
    // Drive leftover artificials out of the basis; rows where that is
    // impossible are redundant and can stay (their artificial is zero).
    for r in 0..m {
        if tab.basis[r] >= n {
            if let Some(pc) = (0..n).find(|&j| tab.at(r, j).abs() > 1e-9) {
                tab.pivot(r, pc);
            }
        }
    }
    // Phase two objective row: c minus the basic combination.
    for j in 0..w {
        tab.t[m * w + j] = if j < n { c[j] } else { 0.0 };
    }
    for r in 0..m {
        let bj = tab.basis[r];
        let cb = if bj < n { c[bj] } else { 0.0 };
        if cb != 0.0 {
            for j in 0..w {
                let v = tab.t[r * w + j];
                tab.t[m * w + j] -= cb * v;
            }
        }
    }
    if !tab.optimize(n) {
        return LpOutcome::Unbounded;
    }
    let mut x = vec![0.0; n];
    for r in 0..m {
        if tab.basis[r] < n {
            x[tab.basis[r]] = tab.rhs(r).max(0.0);
        }
    }
    let value = c.iter().zip(&x).map(|(ci, xi)| ci * xi).sum();
    LpOutcome::Optimal { x, value, basis: tab.basis }
}
