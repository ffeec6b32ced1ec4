//! Occupancy grids and the point-cloud operations that feed them.
//!
//! A [`VoxelGrid`] stores one scalar in `[0, 1]` per cubic cell. Network
//! outputs are probabilistic grids; observations and ground truth are
//! binary. Cell `(i, j, k)` covers the closed box
//! `origin + [i, i+1] x [j, j+1] x [k, k+1] * resolution`, and values are
//! stored row-major with `k` varying fastest.

mod io;

pub use io::{read_cloud, read_grid, read_grid_text, write_cloud, write_grid_binary, write_grid_text};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::Vec3;

/// Default binarization level for probabilistic grids.
pub const DEFAULT_THRESHOLD: f64 = 0.5;
/// Default bounding-box padding used by [`voxelize`] callers.
pub const DEFAULT_PADDING: f64 = 0.1;
/// Extent assigned to a cloud whose points all coincide.
pub const MIN_EXTENT: f64 = 1e-3;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum VoxelError {
    #[error("point cloud is empty")]
    EmptyCloud,
    #[error("non-finite coordinate in point {0}")]
    NonFinite(usize),
    #[error("grid dimensions differ: {0:?} vs {1:?}")]
    DimMismatch([usize; 3], [usize; 3]),
    #[error("grid frames differ (origin or resolution)")]
    FrameMismatch,
    #[error("empty grid list")]
    EmptyList,
    #[error("invalid grid: {0}")]
    Invalid(String),
}

/// Measured 3D points in a world frame.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PointCloud {
    points: Vec<Vec3>,
}

impl PointCloud {
    pub fn new(points: Vec<Vec3>) -> Result<Self, VoxelError> {
        if let Some(i) = points.iter().position(|p| !p.iter().all(|c| c.is_finite())) {
            return Err(VoxelError::NonFinite(i));
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &[Vec3] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Axis-aligned bounds `(min, max)`, or `None` for an empty cloud.
    pub fn bounds(&self) -> Option<(Vec3, Vec3)> {
        let first = *self.points.first()?;
        Some(self.points.iter().fold((first, first), |(lo, hi), p| {
            (lo.inf(p), hi.sup(p))
        }))
    }

    /// Concatenate two clouds.
    pub fn merged(&self, other: &PointCloud) -> PointCloud {
        let mut points = self.points.clone();
        points.extend_from_slice(&other.points);
        PointCloud { points }
    }
}

/// Placement of a grid in the world: dimensions, min corner and cell size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridFrame {
    pub dims: [usize; 3],
    pub origin: Vec3,
    pub resolution: f64,
}

impl GridFrame {
    pub fn new(dims: [usize; 3], origin: Vec3, resolution: f64) -> Result<Self, VoxelError> {
        if dims.iter().any(|&d| d == 0) {
            return Err(VoxelError::Invalid(format!("dims must be positive, got {dims:?}")));
        }
        if !(resolution.is_finite() && resolution > 0.0) {
            return Err(VoxelError::Invalid(format!("resolution must be > 0, got {resolution}")));
        }
        if !origin.iter().all(|c| c.is_finite()) {
            return Err(VoxelError::Invalid("origin must be finite".into()));
        }
        Ok(Self { dims, origin, resolution })
    }

    /// Frame that encloses the cloud's bounding box, expanded on every side by
    /// `padding` times the longest extent and centered on the box.
    pub fn around_cloud(
        cloud: &PointCloud,
        dims: [usize; 3],
        padding: f64,
    ) -> Result<Self, VoxelError> {
        let (lo, hi) = cloud.bounds().ok_or(VoxelError::EmptyCloud)?;
        if dims.iter().any(|&d| d == 0) {
            return Err(VoxelError::Invalid(format!("dims must be positive, got {dims:?}")));
        }
        if !(padding.is_finite() && padding >= 0.0) {
            return Err(VoxelError::Invalid(format!("padding must be >= 0, got {padding}")));
        }
        let longest = (hi - lo).max().max(MIN_EXTENT);
        let padded = longest * (1.0 + 2.0 * padding);
        let max_dim = *dims.iter().max().unwrap() as f64;
        let resolution = padded / max_dim;
        let center = (lo + hi) * 0.5;
        let half = Vec3::new(dims[0] as f64, dims[1] as f64, dims[2] as f64) * (0.5 * resolution);
        Self::new(dims, center - half, resolution)
    }

    pub fn len(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.dims[1] + j) * self.dims[2] + k
    }

    #[inline]
    pub fn unindex(&self, idx: usize) -> [usize; 3] {
        let k = idx % self.dims[2];
        let j = (idx / self.dims[2]) % self.dims[1];
        let i = idx / (self.dims[1] * self.dims[2]);
        [i, j, k]
    }

    pub fn cell_center(&self, i: usize, j: usize, k: usize) -> Vec3 {
        self.origin + Vec3::new(i as f64 + 0.5, j as f64 + 0.5, k as f64 + 0.5) * self.resolution
    }

    /// Cell containing `p`, or `None` if `p` lies outside the frame.
    /// Points on the outer max face are assigned to the last cell.
    pub fn cell_of(&self, p: &Vec3) -> Option<[usize; 3]> {
        let mut out = [0usize; 3];
        for a in 0..3 {
            let u = (p[a] - self.origin[a]) / self.resolution;
            let n = self.dims[a] as f64;
            let tol = 1e-9 * n.max(1.0);
            if !(u >= -tol && u <= n + tol) {
                return None;
            }
            out[a] = (u.floor().max(0.0) as usize).min(self.dims[a] - 1);
        }
        Some(out)
    }

    /// Max corner of the frame.
    pub fn upper(&self) -> Vec3 {
        self.origin
            + Vec3::new(self.dims[0] as f64, self.dims[1] as f64, self.dims[2] as f64)
                * self.resolution
    }
}

/// Axis-aligned occupancy grid with values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct VoxelGrid {
    frame: GridFrame,
    values: Vec<f64>,
}

impl VoxelGrid {
    pub fn zeros(frame: GridFrame) -> Self {
        Self { values: vec![0.0; frame.len()], frame }
    }

    pub fn filled(frame: GridFrame, value: f64) -> Result<Self, VoxelError> {
        Self::from_values(frame, vec![value; frame.len()])
    }

    pub fn from_values(frame: GridFrame, values: Vec<f64>) -> Result<Self, VoxelError> {
        if values.len() != frame.len() {
            return Err(VoxelError::Invalid(format!(
                "expected {} values, got {}",
                frame.len(),
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !(0.0..=1.0).contains(v)) {
            return Err(VoxelError::Invalid(format!(
                "value {} at cell {i} outside [0, 1]",
                values[i]
            )));
        }
        Ok(Self { frame, values })
    }

    /// Build a binary grid by evaluating `inside` at every cell center.
    pub fn from_fn(frame: GridFrame, mut inside: impl FnMut(&Vec3) -> bool) -> Self {
        let mut grid = Self::zeros(frame);
        for idx in 0..frame.len() {
            let [i, j, k] = frame.unindex(idx);
            if inside(&frame.cell_center(i, j, k)) {
                grid.values[idx] = 1.0;
            }
        }
        grid
    }

    pub fn frame(&self) -> &GridFrame {
        &self.frame
    }

    pub fn dims(&self) -> [usize; 3] {
        self.frame.dims
    }

    pub fn origin(&self) -> Vec3 {
        self.frame.origin
    }

    pub fn resolution(&self) -> f64 {
        self.frame.resolution
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.values[self.frame.index(i, j, k)]
    }

    /// Set one cell; values are clamped into `[0, 1]`.
    pub fn set(&mut self, i: usize, j: usize, k: usize, value: f64) {
        let idx = self.frame.index(i, j, k);
        self.values[idx] = value.clamp(0.0, 1.0);
    }

    pub fn is_binary(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0 || v == 1.0)
    }

    /// Number of cells at or above `DEFAULT_THRESHOLD`.
    pub fn occupied_count(&self) -> usize {
        self.values.iter().filter(|&&v| v >= DEFAULT_THRESHOLD).count()
    }

    /// Indices of cells at or above `DEFAULT_THRESHOLD`.
    pub fn occupied(&self) -> impl Iterator<Item = [usize; 3]> + '_ {
        self.values
            .iter()
            .enumerate()
            .filter(|(_, &v)| v >= DEFAULT_THRESHOLD)
            .map(|(idx, _)| self.frame.unindex(idx))
    }

    /// Copy with every cell containing a point of `cloud` forced to 1.
    /// Points outside the frame are ignored.
    pub fn with_observed(&self, cloud: &PointCloud) -> VoxelGrid {
        let mut out = self.clone();
        for p in cloud.points() {
            if let Some([i, j, k]) = self.frame.cell_of(p) {
                out.set(i, j, k, 1.0);
            }
        }
        out
    }
}

/// Binary occupancy of `cloud` in a frame fitted to its bounding box.
pub fn voxelize(cloud: &PointCloud, dims: [usize; 3], padding: f64) -> Result<VoxelGrid, VoxelError> {
    if cloud.is_empty() {
        return Err(VoxelError::EmptyCloud);
    }
    if let Some(i) = cloud.points().iter().position(|p| !p.iter().all(|c| c.is_finite())) {
        return Err(VoxelError::NonFinite(i));
    }
    let frame = GridFrame::around_cloud(cloud, dims, padding)?;
    voxelize_in(cloud, frame)
}

/// Binary occupancy of `cloud` in a given frame. Points outside are dropped.
pub fn voxelize_in(cloud: &PointCloud, frame: GridFrame) -> Result<VoxelGrid, VoxelError> {
    if cloud.is_empty() {
        return Err(VoxelError::EmptyCloud);
    }
    Ok(VoxelGrid::zeros(frame).with_observed(cloud))
}

/// Intersection over union of the occupied sets (cells >= 0.5).
/// Two empty grids are identical, so their similarity is 1.
pub fn jaccard(a: &VoxelGrid, b: &VoxelGrid) -> Result<f64, VoxelError> {
    if a.dims() != b.dims() {
        return Err(VoxelError::DimMismatch(a.dims(), b.dims()));
    }
    let (mut inter, mut union) = (0usize, 0usize);
    for (&x, &y) in a.values.iter().zip(&b.values) {
        let (x, y) = (x >= DEFAULT_THRESHOLD, y >= DEFAULT_THRESHOLD);
        inter += usize::from(x && y);
        union += usize::from(x || y);
    }
    Ok(if union == 0 { 1.0 } else { inter as f64 / union as f64 })
}

/// Cell-wise arithmetic mean.
///
/// Each cell's values are summed in sorted order so the result does not
/// depend on argument order, and a cell whose values all agree keeps that
/// value exactly.
pub fn mean_grid(grids: &[VoxelGrid]) -> Result<VoxelGrid, VoxelError> {
    let first = grids.first().ok_or(VoxelError::EmptyList)?;
    for g in &grids[1..] {
        if g.dims() != first.dims() {
            return Err(VoxelError::DimMismatch(first.dims(), g.dims()));
        }
        if g.frame != first.frame {
            return Err(VoxelError::FrameMismatch);
        }
    }
    let mut column = Vec::with_capacity(grids.len());
    let values = (0..first.values.len())
        .map(|idx| {
            column.clear();
            column.extend(grids.iter().map(|g| g.values[idx]));
            exact_order_mean(&mut column)
        })
        .collect();
    Ok(VoxelGrid { frame: first.frame, values })
}

/// Mean that is invariant to input order and exact for constant inputs.
pub(crate) fn exact_order_mean(xs: &mut [f64]) -> f64 {
    xs.sort_by(f64::total_cmp);
    let (lo, hi) = (xs[0], xs[xs.len() - 1]);
    if lo == hi {
        return lo;
    }
    let mean = xs.iter().sum::<f64>() / xs.len() as f64;
    mean.clamp(lo, hi)
}

/// Binarize: a cell becomes 1 iff its value is at least `t`.
pub fn threshold(grid: &VoxelGrid, t: f64) -> VoxelGrid {
    VoxelGrid {
        frame: grid.frame,
        values: grid.values.iter().map(|&v| if v >= t { 1.0 } else { 0.0 }).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn frame(n: usize) -> GridFrame {
        GridFrame::new([n, n, n], Vec3::zeros(), 1.0).unwrap()
    }

    fn grid_with(n: usize, cells: &[usize]) -> VoxelGrid {
        let mut g = VoxelGrid::zeros(frame(n));
        for &c in cells {
            g.values[c] = 1.0;
        }
        g
    }

    #[test]
    fn single_point_occupies_its_voxel() {
        let cloud = PointCloud::new(vec![Vec3::zeros()]).unwrap();
        let g = voxelize(&cloud, [4, 4, 4], 0.1).unwrap();
        assert_eq!(g.occupied_count(), 1);
        let [i, j, k] = g.occupied().next().unwrap();
        let lo = g.origin() + Vec3::new(i as f64, j as f64, k as f64) * g.resolution();
        let hi = lo + Vec3::repeat(g.resolution());
        let eps = 1e-12;
        assert!((0..3).all(|a| lo[a] - eps <= 0.0 && 0.0 <= hi[a] + eps));
    }

    #[test]
    fn unit_cube_corners_fill_all_octants() {
        let mut pts = Vec::new();
        for x in [0.0, 1.0] {
            for y in [0.0, 1.0] {
                for z in [0.0, 1.0] {
                    pts.push(Vec3::new(x, y, z));
                }
            }
        }
        let g = voxelize(&PointCloud::new(pts).unwrap(), [2, 2, 2], 0.0).unwrap();
        assert_eq!(g.occupied_count(), 8);
        assert_eq!(g.resolution(), 0.5);
        assert!(g.is_binary());
    }

    #[test]
    fn empty_and_nonfinite_clouds_rejected() {
        assert_eq!(
            voxelize(&PointCloud::default(), [4, 4, 4], 0.1).unwrap_err(),
            VoxelError::EmptyCloud
        );
        assert_eq!(
            PointCloud::new(vec![Vec3::zeros(), Vec3::new(f64::NAN, 0.0, 0.0)]).unwrap_err(),
            VoxelError::NonFinite(1)
        );
    }

    #[test]
    fn flat_cloud_collapses_to_one_layer() {
        let pts = (0..10).map(|i| Vec3::new(i as f64 * 0.1, (i % 3) as f64 * 0.1, 0.0)).collect();
        let g = voxelize(&PointCloud::new(pts).unwrap(), [8, 8, 8], 0.1).unwrap();
        let layers: std::collections::BTreeSet<usize> = g.occupied().map(|c| c[2]).collect();
        assert_eq!(layers.len(), 1);
    }

    #[test]
    fn jaccard_examples() {
        let a = grid_with(3, &[1, 2, 3]);
        let b = grid_with(3, &[2, 3, 4, 5]);
        assert_eq!(jaccard(&a, &b).unwrap(), 0.4);
        assert_eq!(jaccard(&a, &a).unwrap(), 1.0);
        assert_eq!(jaccard(&a, &grid_with(3, &[7, 8])).unwrap(), 0.0);
        assert_eq!(jaccard(&grid_with(3, &[]), &grid_with(3, &[])).unwrap(), 1.0);
        assert!(matches!(
            jaccard(&a, &grid_with(2, &[1])),
            Err(VoxelError::DimMismatch(..))
        ));
    }

    #[test]
    fn mean_examples() {
        let g = grid_with(3, &[0, 5, 9]);
        let m = mean_grid(&[g.clone(), g.clone(), g.clone()]).unwrap();
        assert_eq!(m, g);

        let zeros = VoxelGrid::zeros(frame(2));
        let ones = VoxelGrid::filled(frame(2), 1.0).unwrap();
        let m = mean_grid(&[zeros.clone(), ones]).unwrap();
        assert!(m.values().iter().all(|&v| v == 0.5));

        let m = mean_grid(&[grid_with(2, &[3]), zeros.clone(), zeros.clone()]).unwrap();
        assert!((m.values()[3] - 1.0 / 3.0).abs() < 1e-15);

        assert_eq!(mean_grid(&[]).unwrap_err(), VoxelError::EmptyList);
        assert!(matches!(
            mean_grid(&[zeros, VoxelGrid::zeros(frame(3))]),
            Err(VoxelError::DimMismatch(..))
        ));
    }

    #[test]
    fn threshold_examples() {
        let half = VoxelGrid::filled(frame(2), 0.5).unwrap();
        assert!(threshold(&half, 0.5).values().iter().all(|&v| v == 1.0));
        let f = GridFrame::new([2, 1, 1], Vec3::zeros(), 1.0).unwrap();
        let g = VoxelGrid::from_values(f, vec![0.2, 0.8]).unwrap();
        assert_eq!(threshold(&g, 0.5).values(), &[0.0, 1.0]);
        let b = grid_with(3, &[4, 20]);
        assert_eq!(threshold(&b, 0.01), b);
        assert_eq!(threshold(&b, 0.99), b);
    }

    #[test]
    fn invalid_values_rejected() {
        assert!(VoxelGrid::from_values(frame(1), vec![1.5]).is_err());
        assert!(VoxelGrid::from_values(frame(1), vec![f64::NAN]).is_err());
        assert!(GridFrame::new([0, 1, 1], Vec3::zeros(), 1.0).is_err());
    }

    fn binary_grid() -> impl Strategy<Value = VoxelGrid> {
        proptest::collection::vec(any::<bool>(), 27).prop_map(|bits| {
            let values = bits.into_iter().map(|b| if b { 1.0 } else { 0.0 }).collect();
            VoxelGrid::from_values(frame(3), values).unwrap()
        })
    }

    fn unit_grid() -> impl Strategy<Value = VoxelGrid> {
        proptest::collection::vec(0.0f64..=1.0, 27)
            .prop_map(|v| VoxelGrid::from_values(frame(3), v).unwrap())
    }

    proptest! {
        #[test]
        fn jaccard_symmetric(a in binary_grid(), b in binary_grid()) {
            prop_assert_eq!(jaccard(&a, &b).unwrap(), jaccard(&b, &a).unwrap());
        }

        #[test]
        fn jaccard_one_iff_equal_sets(a in binary_grid(), b in binary_grid()) {
            let j = jaccard(&a, &b).unwrap();
            prop_assert_eq!(j == 1.0, a == b);
        }

        #[test]
        fn mean_permutation_invariant(gs in proptest::collection::vec(unit_grid(), 1..6), seed in any::<u64>()) {
            use rand::seq::SliceRandom;
            let mut shuffled = gs.clone();
            shuffled.shuffle(&mut crate::rng::seeded(seed));
            prop_assert_eq!(mean_grid(&gs).unwrap(), mean_grid(&shuffled).unwrap());
        }

        #[test]
        fn threshold_of_repeated_mean(g in binary_grid(), k in 1usize..6, t in 0.01f64..0.99) {
            let reps = vec![g.clone(); k];
            prop_assert_eq!(threshold(&mean_grid(&reps).unwrap(), t), threshold(&g, t));
        }

        #[test]
        fn every_point_lands_in_occupied_voxel(
            pts in proptest::collection::vec((-2.0f64..2.0, -2.0f64..2.0, -0.5f64..0.5), 1..60),
            n in 2usize..12,
            pad in 0.0f64..0.5,
        ) {
            let cloud = PointCloud::new(pts.iter().map(|&(x, y, z)| Vec3::new(x, y, z)).collect()).unwrap();
            let g = voxelize(&cloud, [n, n, n], pad).unwrap();
            prop_assert!(g.is_binary());
            for p in cloud.points() {
                let [i, j, k] = g.frame().cell_of(p).expect("point inside frame");
                prop_assert_eq!(g.get(i, j, k), 1.0);
            }
        }
    }
}
