//! Origin-centred uniform Cartesian grids and functions sampled on them.

use crate::scalar::Scalar;

/// A uniform grid with `2 * half + 1` nodes per axis, node `i` at coordinate `(i - half) * h`.
/// The origin is always a node. Two-dimensional grids use a unit third axis.
#[derive(Debug, Clone, PartialEq)]
pub struct CartesianGrid<T> {
    dimension: usize,
    h: T,
    half: usize,
    dims: [usize; 3],
    strides: [usize; 3],
}

impl<T: Scalar> CartesianGrid<T> {
    /// # Panics
    /// If `dimension` is not 2 or 3, or `h` is not positive.
    pub fn new(dimension: usize, h: T, half: usize) -> Self {
        assert!(dimension == 2 || dimension == 3, "dimension must be 2 or 3");
        assert!(h > T::zero(), "mesh size must be positive");
        let per_axis = 2 * half + 1;
        let dims = [
            per_axis,
            per_axis,
            if dimension == 3 { per_axis } else { 1 },
        ];
        let strides = [1, dims[0], dims[0] * dims[1]];
        Self {
            dimension,
            h,
            half,
            dims,
            strides,
        }
    }

    /// Smallest grid with mesh `h` whose box `[-extent, extent]^n` is covered.
    pub fn covering(dimension: usize, h: T, extent: T) -> Self {
        let half = (extent / h - T::lit(1e-9))
            .ceil()
            .to_usize()
            .unwrap_or(0)
            .max(1);
        Self::new(dimension, h, half)
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }
    pub fn h(&self) -> T {
        self.h
    }
    pub fn half(&self) -> usize {
        self.half
    }
    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }
    pub fn strides(&self) -> [usize; 3] {
        self.strides
    }
    pub fn len(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
    pub fn nodes_per_axis(&self) -> usize {
        self.dims[0]
    }
    /// Half-width of the box.
    pub fn extent(&self) -> T {
        self.h * T::from_usize_lossy(self.half)
    }

    #[inline]
    pub fn index(&self, ijk: [usize; 3]) -> usize {
        ijk[0] + ijk[1] * self.strides[1] + ijk[2] * self.strides[2]
    }

    #[inline]
    pub fn coords(&self, idx: usize) -> [usize; 3] {
        let i = idx % self.dims[0];
        let j = (idx / self.strides[1]) % self.dims[1];
        let k = idx / self.strides[2];
        [i, j, k]
    }

    #[inline]
    pub fn axis_coordinate(&self, i: usize) -> T {
        (T::from_usize_lossy(i) - T::from_usize_lossy(self.half)) * self.h
    }

    /// Writes the position of node `idx` into `x` (third entry zero in 2D).
    #[inline]
    pub fn position(&self, idx: usize, x: &mut [T; 3]) {
        let c = self.coords(idx);
        for d in 0..3 {
            x[d] = if d < self.dimension {
                self.axis_coordinate(c[d])
            } else {
                T::zero()
            };
        }
    }

    #[inline]
    pub fn radius(&self, idx: usize) -> T {
        let mut x = [T::zero(); 3];
        self.position(idx, &mut x);
        (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt()
    }

    /// True for nodes on a face of the box.
    #[inline]
    pub fn on_box_face(&self, idx: usize) -> bool {
        let c = self.coords(idx);
        (0..self.dimension).any(|d| c[d] == 0 || c[d] + 1 == self.dims[d])
    }
}

/// Values attached to the nodes of a [`CartesianGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction<T> {
    pub grid: CartesianGrid<T>,
    pub values: Vec<T>,
}

impl<T: Scalar> GridFunction<T> {
    pub fn new(grid: CartesianGrid<T>, values: Vec<T>) -> Self {
        assert_eq!(grid.len(), values.len(), "value count must match the grid");
        Self { grid, values }
    }

    pub fn zeros(grid: CartesianGrid<T>) -> Self {
        let n = grid.len();
        Self::new(grid, vec![T::zero(); n])
    }

    /// Samples `f` at every node.
    pub fn from_fn(grid: CartesianGrid<T>, mut f: impl FnMut(&[T]) -> T) -> Self {
        let n = grid.dimension();
        let mut x = [T::zero(); 3];
        let values = (0..grid.len())
            .map(|idx| {
                grid.position(idx, &mut x);
                f(&x[..n])
            })
            .collect();
        Self { grid, values }
    }

    pub fn max_value(&self) -> T {
        self.values
            .iter()
            .copied()
            .fold(T::neg_infinity(), |a, b| a.max(b))
    }

    /// Multilinear interpolation at `x`; `None` outside the box.
    pub fn interpolate(&self, x: &[T]) -> Option<T> {
        let n = self.grid.dimension();
        let dims = self.grid.dims();
        let half = T::from_usize_lossy(self.grid.half());
        let mut base = [0usize; 3];
        let mut frac = [T::zero(); 3];
        for d in 0..n {
            let s = x[d] / self.grid.h() + half;
            if !(s >= T::zero()) {
                return None;
            }
            let last = T::from_usize_lossy(dims[d] - 1);
            if s > last {
                return None;
            }
            // Snap round-off so that nodes are reproduced exactly.
            let nearest = s.round();
            let s = if (s - nearest).abs() <= T::lit(1e-9) {
                nearest
            } else {
                s
            };
            let mut i = s.floor().to_usize()?;
            if i + 1 >= dims[d] {
                i = dims[d] - 2;
            }
            base[d] = i;
            frac[d] = s - T::from_usize_lossy(i);
        }
        let strides = self.grid.strides();
        let origin = self.grid.index(base);
        let mut acc = T::zero();
        for corner in 0..(1usize << n) {
            let mut w = T::one();
            let mut idx = origin;
            for d in 0..n {
                if corner >> d & 1 == 1 {
                    w *= frac[d];
                    idx += strides[d];
                } else {
                    w *= T::one() - frac[d];
                }
            }
            if w != T::zero() {
                acc += w * self.values[idx];
            }
        }
        Some(acc)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn node_layout() {
        let g = CartesianGrid::<f64>::new(2, 0.5, 4);
        assert_eq!(g.dims(), [9, 9, 1]);
        assert_eq!(g.len(), 81);
        let origin = g.index([4, 4, 0]);
        assert_eq!(g.radius(origin), 0.0);
        let mut x = [0.0; 3];
        g.position(g.index([8, 0, 0]), &mut x);
        assert_eq!(x, [2.0, -2.0, 0.0]);
        assert!(g.on_box_face(g.index([8, 3, 0])));
        assert!(!g.on_box_face(g.index([7, 3, 0])));
        for idx in [0, 17, 80] {
            assert_eq!(g.index(g.coords(idx)), idx);
        }
    }

    #[test]
    fn interpolation_reproduces_linear_functions() {
        let g = CartesianGrid::<f64>::new(3, 0.25, 4);
        let f = GridFunction::from_fn(g, |x| 1.0 + 2.0 * x[0] - x[1] + 0.5 * x[2]);
        for p in [[0.1, -0.3, 0.77], [1.0, 1.0, 1.0], [-0.99, 0.0, 0.2]] {
            let v = f.interpolate(&p).unwrap();
            assert!((v - (1.0 + 2.0 * p[0] - p[1] + 0.5 * p[2])).abs() < 1e-12);
        }
        assert!(f.interpolate(&[1.01, 0.0, 0.0]).is_none());
    }

    #[test]
    fn covering_grid_contains_extent() {
        let g = CartesianGrid::<f64>::covering(2, 0.02, 2.0);
        assert_eq!(g.nodes_per_axis(), 201);
        let g = CartesianGrid::<f64>::covering(2, 0.3, 2.0);
        assert!(g.extent() >= 2.0);
    }
}
