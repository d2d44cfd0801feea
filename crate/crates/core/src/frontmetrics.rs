//! Discrete free boundaries and their geometry: extraction, Hausdorff distance, sphericity.

use thiserror::Error;

use crate::grid::GridFunction;
use crate::scalar::Scalar;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FrontError {
    #[error("front point set is empty")]
    Empty,
    #[error("front dimensions differ ({0} vs {1})")]
    DimensionMismatch(usize, usize),
}

/// Point cloud approximating `Γ_t = ∂{U(·, t) > 0}`.
#[derive(Debug, Clone, PartialEq)]
pub struct FrontSet<T> {
    pub dimension: usize,
    /// Unused trailing coordinates are zero.
    pub points: Vec<[T; 3]>,
    /// Extraction resolution.
    pub h: T,
    pub t: T,
}

impl<T: Scalar> FrontSet<T> {
    pub fn new(dimension: usize, points: Vec<[T; 3]>, h: T, t: T) -> Self {
        Self {
            dimension,
            points,
            h,
            t,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn with_time(mut self, t: T) -> Self {
        self.t = t;
        self
    }

    /// Multiplies every point (and the resolution) by `factor`.
    pub fn scaled(&self, factor: T) -> Self {
        Self {
            dimension: self.dimension,
            points: self
                .points
                .iter()
                .map(|p| [p[0] * factor, p[1] * factor, p[2] * factor])
                .collect(),
            h: self.h * factor,
            t: self.t,
        }
    }

    /// Minimum and maximum distance of the points from the origin.
    pub fn radial_extent(&self) -> Option<(T, T)> {
        if self.points.is_empty() {
            return None;
        }
        let mut lo = T::infinity();
        let mut hi = T::zero();
        for p in &self.points {
            let r = norm(p);
            lo = lo.min(r);
            hi = hi.max(r);
        }
        Some((lo, hi))
    }

    /// Samples of the sphere `|x| = radius` with spacing at most `spacing`.
    pub fn sphere(dimension: usize, radius: T, spacing: T, t: T) -> Self {
        let mut points = Vec::new();
        let pi = T::PI();
        let two = T::lit(2.0);
        if dimension == 2 {
            let count = ((two * pi * radius / spacing).ceil().to_usize().unwrap_or(1)).max(8);
            for k in 0..count {
                let th = two * pi * T::from_usize_lossy(k) / T::from_usize_lossy(count);
                points.push([radius * th.cos(), radius * th.sin(), T::zero()]);
            }
        } else {
            let rings = ((pi * radius / spacing).ceil().to_usize().unwrap_or(1)).max(4);
            for i in 0..=rings {
                let phi = pi * T::from_usize_lossy(i) / T::from_usize_lossy(rings);
                let ring_r = radius * phi.sin();
                let count = ((two * pi * ring_r / spacing).ceil().to_usize().unwrap_or(1)).max(1);
                for k in 0..count {
                    let th = two * pi * T::from_usize_lossy(k) / T::from_usize_lossy(count);
                    points.push([ring_r * th.cos(), ring_r * th.sin(), radius * phi.cos()]);
                }
            }
        }
        Self::new(dimension, points, spacing, t)
    }
}

#[inline]
fn norm<T: Scalar>(p: &[T; 3]) -> T {
    (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt()
}

#[inline]
fn dist2<T: Scalar>(a: &[T; 3], b: &[T; 3]) -> T {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    dx * dx + dy * dy + dz * dz
}

/// Boundary of the positivity set `{U > 1e-12 · max U}`.
///
/// Every grid cell (square or cube) whose corners contain both positive and non-positive nodes
/// contributes one point per connected group of positive corners: the mean of the midpoints of
/// the cell edges leaving that group. In 2D this is the segment midpoint of marching squares on
/// the 0/1 indicator, with saddles resolved by separating the positive corners; in 3D it is the
/// vertex centroid of the corresponding marching-cubes facet. Cells touching the faces of the box
/// are skipped, so a field positive on every interior node has an empty front.
pub fn extract_front<T: Scalar>(u: &GridFunction<T>) -> FrontSet<T> {
    let grid = &u.grid;
    let n = grid.dimension();
    let h = grid.h();
    let max = u.max_value();
    let mut points = Vec::new();
    if !(max > T::zero()) {
        return FrontSet::new(n, points, h, T::zero());
    }
    let eps = T::lit(1e-12) * max;
    let dims = grid.dims();
    let strides = grid.strides();
    let corners = 1usize << n;
    let kmax = if n == 3 { dims[2] - 2 } else { 1 };
    let k_range = if n == 3 { 1..kmax } else { 0..1 };
    let mut pos = [false; 8];
    for k in k_range {
        for j in 1..dims[1] - 2 {
            for i in 1..dims[0] - 2 {
                let base = grid.index([i, j, k]);
                let mut count = 0;
                for (c, p) in pos.iter_mut().enumerate().take(corners) {
                    let mut idx = base;
                    for d in 0..n {
                        if c >> d & 1 == 1 {
                            idx += strides[d];
                        }
                    }
                    *p = u.values[idx] > eps;
                    count += *p as usize;
                }
                if count == 0 || count == corners {
                    continue;
                }
                cell_points(&pos[..corners], n, [i, j, k], grid, &mut points);
            }
        }
    }
    FrontSet::new(n, points, h, T::zero())
}

fn cell_points<T: Scalar>(
    pos: &[bool],
    n: usize,
    base: [usize; 3],
    grid: &crate::grid::CartesianGrid<T>,
    out: &mut Vec<[T; 3]>,
) {
    let corners = pos.len();
    // Union-find over positive corners connected by cell edges.
    let mut parent = [0usize; 8];
    for (c, p) in parent.iter_mut().enumerate() {
        *p = c;
    }
    fn find(parent: &mut [usize; 8], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for c in 0..corners {
        if !pos[c] {
            continue;
        }
        for d in 0..n {
            let o = c ^ (1 << d);
            if pos[o] {
                let (a, b) = (find(&mut parent, c), find(&mut parent, o));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    let mut sums = [[T::zero(); 3]; 8];
    let mut counts = [0usize; 8];
    let h = grid.h();
    let half = T::lit(0.5);
    for c in 0..corners {
        if !pos[c] {
            continue;
        }
        let root = find(&mut parent, c);
        for d in 0..n {
            let o = c ^ (1 << d);
            if pos[o] {
                continue;
            }
            // Midpoint of the edge from corner c along axis d.
            for e in 0..n {
                sums[root][e] += if e == d {
                    grid.axis_coordinate(base[e]) + h * half
                } else {
                    grid.axis_coordinate(base[e] + (c >> e & 1))
                };
            }
            counts[root] += 1;
        }
    }
    for r in 0..corners {
        if counts[r] > 0 {
            let k = T::from_usize_lossy(counts[r]);
            out.push([sums[r][0] / k, sums[r][1] / k, sums[r][2] / k]);
        }
    }
}

/// Uniform bucket index for exact nearest-neighbour queries.
#[derive(Debug, Clone)]
pub struct PointIndex<'a, T> {
    points: &'a [[T; 3]],
    dimension: usize,
    origin: [T; 3],
    cell: T,
    dims: [usize; 3],
    starts: Vec<usize>,
    order: Vec<u32>,
}

impl<'a, T: Scalar> PointIndex<'a, T> {
    pub fn new(points: &'a [[T; 3]], dimension: usize) -> Self {
        assert!(!points.is_empty());
        let mut lo = [T::infinity(); 3];
        let mut hi = [T::neg_infinity(); 3];
        for p in points {
            for d in 0..dimension {
                lo[d] = lo[d].min(p[d]);
                hi[d] = hi[d].max(p[d]);
            }
        }
        let mut volume = T::one();
        let mut largest = T::zero();
        for d in 0..dimension {
            let span = hi[d] - lo[d];
            largest = largest.max(span);
            volume *= span.max(T::min_positive_value());
        }
        // About two points per bucket, but never more than ~4 buckets per point overall.
        let per_bucket = T::lit(2.0);
        let mut cell = (volume * per_bucket / T::from_usize_lossy(points.len()))
            .powf(T::one() / T::from_usize_lossy(dimension));
        let floor = largest / T::lit(4096.0);
        if !(cell > floor) {
            cell = floor;
        }
        if !(cell > T::zero()) {
            cell = T::one();
        }
        let mut dims = [1usize; 3];
        for d in 0..dimension {
            dims[d] = ((hi[d] - lo[d]) / cell).floor().to_usize().unwrap_or(0) + 1;
        }
        let mut origin = [T::zero(); 3];
        origin[..dimension].copy_from_slice(&lo[..dimension]);
        let mut index = Self {
            points,
            dimension,
            origin,
            cell,
            dims,
            starts: Vec::new(),
            order: Vec::new(),
        };
        let buckets = dims[0] * dims[1] * dims[2];
        let mut counts = vec![0usize; buckets + 1];
        let keys: Vec<usize> = points.iter().map(|p| index.bucket_of(p)).collect();
        for &k in &keys {
            counts[k + 1] += 1;
        }
        for b in 0..buckets {
            counts[b + 1] += counts[b];
        }
        let mut fill = counts.clone();
        let mut order = vec![0u32; points.len()];
        for (i, &k) in keys.iter().enumerate() {
            order[fill[k]] = i as u32;
            fill[k] += 1;
        }
        index.starts = counts;
        index.order = order;
        index
    }

    fn cell_coord(&self, p: &[T; 3], d: usize) -> usize {
        let s = ((p[d] - self.origin[d]) / self.cell).floor();
        if s < T::zero() {
            0
        } else {
            s.to_usize().unwrap_or(usize::MAX).min(self.dims[d] - 1)
        }
    }

    fn bucket_of(&self, p: &[T; 3]) -> usize {
        let mut b = 0;
        let mut stride = 1;
        for d in 0..self.dimension {
            b += self.cell_coord(p, d) * stride;
            stride *= self.dims[d];
        }
        b
    }

    /// Distance from `q` to the nearest indexed point.
    pub fn nearest_distance(&self, q: &[T; 3]) -> T {
        let mut c = [0usize; 3];
        for d in 0..self.dimension {
            c[d] = self.cell_coord(q, d);
        }
        let max_ring = (0..self.dimension).map(|d| self.dims[d]).max().unwrap_or(1);
        let mut best = T::infinity();
        for ring in 0..=max_ring {
            self.visit_ring(&c, ring, |idx| {
                let d2 = dist2(q, &self.points[idx]);
                if d2 < best {
                    best = d2;
                }
            });
            // Unvisited buckets are at least `ring * cell` away.
            let bound = T::from_usize_lossy(ring) * self.cell;
            if best <= bound * bound {
                break;
            }
        }
        best.sqrt()
    }

    fn visit_ring(&self, c: &[usize; 3], ring: usize, mut f: impl FnMut(usize)) {
        let r = ring as isize;
        let n = self.dimension;
        let range = |d: usize| -> (isize, isize) {
            if d < n {
                let lo = (c[d] as isize - r).max(0);
                let hi = (c[d] as isize + r).min(self.dims[d] as isize - 1);
                (lo, hi)
            } else {
                (0, 0)
            }
        };
        let (x0, x1) = range(0);
        let (y0, y1) = range(1);
        let (z0, z1) = range(2);
        for z in z0..=z1 {
            for y in y0..=y1 {
                for x in x0..=x1 {
                    let cheb = (x - c[0] as isize)
                        .abs()
                        .max((y - c[1] as isize).abs())
                        .max(if n == 3 { (z - c[2] as isize).abs() } else { 0 });
                    if cheb != r {
                        continue;
                    }
                    let b = x as usize
                        + y as usize * self.dims[0]
                        + z as usize * self.dims[0] * self.dims[1];
                    for &i in &self.order[self.starts[b]..self.starts[b + 1]] {
                        f(i as usize);
                    }
                }
            }
        }
    }
}

/// `sup_{a ∈ A} dist(a, B)`.
pub fn directed_hausdorff<T: Scalar>(a: &FrontSet<T>, b: &FrontSet<T>) -> Result<T, FrontError> {
    if a.is_empty() || b.is_empty() {
        return Err(FrontError::Empty);
    }
    if a.dimension != b.dimension {
        return Err(FrontError::DimensionMismatch(a.dimension, b.dimension));
    }
    let index = PointIndex::new(&b.points, b.dimension);
    Ok(a.points
        .iter()
        .map(|p| index.nearest_distance(p))
        .fold(T::zero(), |m, d| m.max(d)))
}

/// Symmetric Hausdorff distance between two finite point sets.
pub fn hausdorff<T: Scalar>(a: &FrontSet<T>, b: &FrontSet<T>) -> Result<T, FrontError> {
    Ok(directed_hausdorff(a, b)?.max(directed_hausdorff(b, a)?))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SphereDeviation<T> {
    pub r_min: T,
    pub r_max: T,
    /// `(r_max − r_min) / r_mid`, `r_mid = (r_max + r_min) / 2`.
    pub deviation: T,
}

pub fn sphere_deviation<T: Scalar>(
    front: &FrontSet<T>,
    center: &[T],
) -> Result<SphereDeviation<T>, FrontError> {
    if front.is_empty() {
        return Err(FrontError::Empty);
    }
    let mut c = [T::zero(); 3];
    for (d, &x) in center.iter().enumerate().take(front.dimension) {
        c[d] = x;
    }
    let mut r_min = T::infinity();
    let mut r_max = T::zero();
    for p in &front.points {
        let r = dist2(p, &c).sqrt();
        r_min = r_min.min(r);
        r_max = r_max.max(r);
    }
    let mid = (r_min + r_max) / T::lit(2.0);
    Ok(SphereDeviation {
        r_min,
        r_max,
        deviation: (r_max - r_min) / mid,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::CartesianGrid;

    fn cloud(points: &[[f64; 2]]) -> FrontSet<f64> {
        FrontSet::new(
            2,
            points.iter().map(|p| [p[0], p[1], 0.0]).collect(),
            1.0,
            0.0,
        )
    }

    #[test]
    fn empty_for_zero_field() {
        let g = CartesianGrid::<f64>::new(2, 0.1, 10);
        assert!(extract_front(&GridFunction::zeros(g)).is_empty());
    }

    #[test]
    fn empty_for_everywhere_positive() {
        let g = CartesianGrid::<f64>::new(2, 0.1, 10);
        let f = GridFunction::from_fn(g, |_| 1.0);
        assert!(extract_front(&f).is_empty());
    }

    #[test]
    fn cone_front_near_unit_circle() {
        let g = CartesianGrid::<f64>::covering(2, 0.01, 1.5);
        let f = GridFunction::from_fn(g, |x| (1.0 - (x[0] * x[0] + x[1] * x[1]).sqrt()).max(0.0));
        let front = extract_front(&f);
        assert!(front.len() > 100);
        for p in &front.points {
            assert!((norm(p) - 1.0).abs() < 0.02);
        }
    }

    #[test]
    fn cone_front_in_3d() {
        let g = CartesianGrid::<f64>::covering(3, 0.05, 1.5);
        let f = GridFunction::from_fn(g, |x| {
            (1.0 - (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt()).max(0.0)
        });
        let front = extract_front(&f);
        assert!(front.len() > 500);
        let dev = sphere_deviation(&front, &[0.0, 0.0, 0.0]).unwrap();
        assert!(dev.r_min > 1.0 - 0.05 * 3f64.sqrt());
        assert!(dev.r_max < 1.0 + 0.05 * 3f64.sqrt());
    }

    #[test]
    fn points_are_between_positive_and_zero_nodes() {
        let g = CartesianGrid::<f64>::covering(2, 0.05, 1.0);
        let f = GridFunction::from_fn(g.clone(), |x| {
            (0.3 - x[0].abs() - 0.5 * x[1].abs()).max(0.0)
        });
        let front = extract_front(&f);
        let pos: Vec<[f64; 3]> = (0..g.len())
            .filter(|&i| f.values[i] > 0.0)
            .map(|i| {
                let mut x = [0.0; 3];
                g.position(i, &mut x);
                x
            })
            .collect();
        let zero: Vec<[f64; 3]> = (0..g.len())
            .filter(|&i| f.values[i] == 0.0)
            .map(|i| {
                let mut x = [0.0; 3];
                g.position(i, &mut x);
                x
            })
            .collect();
        let pi = PointIndex::new(&pos, 2);
        let zi = PointIndex::new(&zero, 2);
        let bound = 0.05 * 2f64.sqrt() + 1e-12;
        for p in &front.points {
            assert!(pi.nearest_distance(p) <= bound);
            assert!(zi.nearest_distance(p) <= bound);
        }
    }

    #[test]
    fn saddle_cell_gives_two_points() {
        let g = CartesianGrid::<f64>::new(2, 1.0, 2);
        let mut f = GridFunction::zeros(g.clone());
        // Cell with lower corner (1,1) spans nodes (1..=2, 1..=2), away from the faces (0 and 4).
        f.values[g.index([1, 1, 0])] = 1.0;
        f.values[g.index([2, 2, 0])] = 1.0;
        let front = extract_front(&f);
        // The (1,1) cell is a saddle; neighbouring interior cells also see single corners.
        let in_cell: Vec<_> = front
            .points
            .iter()
            .filter(|p| p[0] > -1.0 && p[0] < 0.0 && p[1] > -1.0 && p[1] < 0.0)
            .collect();
        assert_eq!(in_cell.len(), 2);
    }

    #[test]
    fn hausdorff_basic() {
        let a = cloud(&[[0.0, 0.0]]);
        let b = cloud(&[[3.0, 4.0]]);
        assert_eq!(hausdorff(&a, &b).unwrap(), 5.0);
        assert_eq!(hausdorff(&a, &a).unwrap(), 0.0);
        assert_eq!(hausdorff(&a, &cloud(&[])), Err(FrontError::Empty));
    }

    #[test]
    fn concentric_circles() {
        let a = FrontSet::<f64>::sphere(2, 1.0, 1e-3, 0.0);
        let b = FrontSet::sphere(2, 2.0, 1e-3, 0.0);
        let d = hausdorff(&a, &b).unwrap();
        assert!((d - 1.0).abs() < 1e-3);
    }

    #[test]
    fn ellipse_deviation() {
        let pts: Vec<[f64; 2]> = (0..4000)
            .map(|k| {
                let th = k as f64 * std::f64::consts::TAU / 4000.0;
                [2.0 * th.cos(), th.sin()]
            })
            .collect();
        let dev = sphere_deviation(&cloud(&pts), &[0.0, 0.0]).unwrap();
        assert!((dev.r_min - 1.0).abs() < 1e-12);
        assert!((dev.r_max - 2.0).abs() < 1e-12);
        assert!((dev.deviation - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn exact_sphere_has_no_deviation() {
        let s = FrontSet::sphere(3, 1.3, 0.05, 0.0);
        let dev = sphere_deviation(&s, &[0.0, 0.0, 0.0]).unwrap();
        assert!(dev.deviation < 1e-12);
    }
}
