//! Finite rectangular lattice windows with periodic or absorbing boundary.

use crate::error::{CoreError, CoreResult};

/// Boundary handling for the finite window approximating the infinite lattice.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Boundary {
    /// Index arithmetic wraps modulo the extent (torus). Default.
    Periodic,
    /// Sites outside the window carry zero mass; dispersal out of the
    /// window is lost. Used for finite-initial-condition extinction studies.
    Absorbing,
}

/// Shape of a finite lattice window.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Geometry {
    extents: Vec<usize>,
    boundary: Boundary,
    strides: Vec<usize>,
    len: usize,
}

impl Geometry {
    pub fn new(extents: Vec<usize>, boundary: Boundary) -> Self {
        assert!(!extents.is_empty(), "geometry needs at least one axis");
        assert!(extents.iter().all(|&e| e >= 1), "extents must be positive");
        let mut strides = vec![0usize; extents.len()];
        let mut acc = 1usize;
        // Row-major: the last axis is contiguous.
        for axis in (0..extents.len()).rev() {
            strides[axis] = acc;
            acc *= extents[axis];
        }
        Geometry { extents, boundary, strides, len: acc }
    }

    pub fn torus(extents: Vec<usize>) -> Self {
        Self::new(extents, Boundary::Periodic)
    }

    pub fn dim(&self) -> usize {
        self.extents.len()
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn extents(&self) -> &[usize] {
        &self.extents
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    pub fn coords_of(&self, mut index: usize) -> Vec<i64> {
        debug_assert!(index < self.len);
        let mut coords = vec![0i64; self.dim()];
        for axis in 0..self.dim() {
            coords[axis] = (index / self.strides[axis]) as i64;
            index %= self.strides[axis];
        }
        coords
    }

    /// Linear index of in-window coordinates (each `0 <= c < extent`).
    pub fn index_of(&self, coords: &[i64]) -> usize {
        debug_assert_eq!(coords.len(), self.dim());
        let mut idx = 0usize;
        for axis in 0..self.dim() {
            debug_assert!(coords[axis] >= 0 && (coords[axis] as usize) < self.extents[axis]);
            idx += coords[axis] as usize * self.strides[axis];
        }
        idx
    }

    /// Resolve arbitrary integer coordinates to a site index, wrapping on a
    /// torus and returning `None` outside an absorbing window.
    pub fn resolve(&self, coords: &[i64]) -> Option<usize> {
        let mut idx = 0usize;
        for axis in 0..self.dim() {
            let e = self.extents[axis] as i64;
            let c = coords[axis];
            let c = match self.boundary {
                Boundary::Periodic => c.rem_euclid(e),
                Boundary::Absorbing => {
                    if c < 0 || c >= e {
                        return None;
                    }
                    c
                }
            };
            idx += c as usize * self.strides[axis];
        }
        Some(idx)
    }

    /// Site reached from `index` by `offset`, respecting the boundary.
    pub fn step(&self, index: usize, offset: &[i64]) -> Option<usize> {
        let mut coords = self.coords_of(index);
        for axis in 0..self.dim() {
            coords[axis] += offset[axis];
        }
        self.resolve(&coords)
    }

    /// Index of the site at the coordinate origin.
    pub fn origin(&self) -> usize {
        0
    }

    /// Shortest signed displacement between two coordinates along one axis.
    pub fn wrapped_delta(&self, axis: usize, from: i64, to: i64) -> i64 {
        let e = self.extents[axis] as i64;
        match self.boundary {
            Boundary::Absorbing => to - from,
            Boundary::Periodic => {
                let mut d = (to - from).rem_euclid(e);
                if d > e / 2 {
                    d -= e;
                }
                d
            }
        }
    }

    /// All site indices within sup-norm distance `radius` of `center`
    /// (respecting the boundary), each listed once.
    pub fn ball(&self, center: &[i64], radius: i64) -> Vec<usize> {
        assert!(radius >= 0);
        let mut out = Vec::new();
        let mut seen = vec![false; self.len];
        let mut offset = vec![-radius; self.dim()];
        loop {
            let coords: Vec<i64> = center.iter().zip(&offset).map(|(c, o)| c + o).collect();
            if let Some(idx) = self.resolve(&coords) {
                if !seen[idx] {
                    seen[idx] = true;
                    out.push(idx);
                }
            }
            // odometer increment
            let mut axis = self.dim();
            loop {
                if axis == 0 {
                    return out;
                }
                axis -= 1;
                offset[axis] += 1;
                if offset[axis] <= radius {
                    break;
                }
                offset[axis] = -radius;
            }
        }
    }
}

/// Sup-norm ball, the window shape used by convergence and coupling checks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Ball {
    pub center: Vec<i64>,
    pub radius: i64,
}

impl Ball {
    pub fn new(center: Vec<i64>, radius: i64) -> Self {
        assert!(radius >= 0);
        Ball { center, radius }
    }

    pub fn at_origin(dim: usize, radius: i64) -> Self {
        Ball::new(vec![0; dim], radius)
    }

    pub fn sites(&self, geom: &Geometry) -> Vec<usize> {
        geom.ball(&self.center, self.radius)
    }

    /// Ball grown by `k` in sup-norm (the k-neighborhood).
    pub fn grown(&self, k: i64) -> Ball {
        Ball::new(self.center.clone(), self.radius + k)
    }
}

/// Nested sup-norm balls used when certifying local convergence: an outer
/// ball and a chain shrinking back to the original window.
#[derive(Debug, Clone)]
pub struct NestedBoxes {
    /// Outer ball of radius `window + (n0 + n1) * r`.
    pub outer: Ball,
    /// `chain[i]` has radius `window + (n0 - i) * r`; `chain[n0]` is the window.
    pub chain: Vec<Ball>,
}

/// Build the nested-ball chain around `window` with per-step reach `r`
/// (`r = R_p` for pure-dispersal arguments, `r = R_p + R_lambda` when
/// competition widens the stencil).
pub fn nested_boxes(window: &Ball, n0: u32, n1: u32, r: i64, geom: &Geometry) -> CoreResult<NestedBoxes> {
    assert!(r >= 0);
    let outer_radius = window.radius + (n0 as i64 + n1 as i64) * r;
    for (axis, &e) in geom.extents().iter().enumerate() {
        // A ball of radius rho lists 2*rho+1 distinct sites per axis only if
        // it fits the period.
        if 2 * outer_radius + 1 > e as i64 {
            return Err(CoreError::BoxExceedsTorus { radius: outer_radius, extent: e, axis });
        }
    }
    let chain = (0..=n0).map(|i| window.grown((n0 - i) as i64 * r)).collect();
    Ok(NestedBoxes { outer: window.grown((n0 as i64 + n1 as i64) * r), chain })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_index_coords() {
        let g = Geometry::torus(vec![4, 5]);
        for idx in 0..g.len() {
            assert_eq!(g.index_of(&g.coords_of(idx)), idx);
        }
    }

    #[test]
    fn periodic_wrap() {
        let g = Geometry::torus(vec![5]);
        assert_eq!(g.resolve(&[-1]), Some(4));
        assert_eq!(g.resolve(&[7]), Some(2));
        assert_eq!(g.wrapped_delta(0, 4, 0), 1);
    }

    #[test]
    fn absorbing_boundary() {
        let g = Geometry::new(vec![5], Boundary::Absorbing);
        assert_eq!(g.resolve(&[-1]), None);
        assert_eq!(g.resolve(&[5]), None);
        assert_eq!(g.resolve(&[3]), Some(3));
    }

    #[test]
    fn ball_counts() {
        let g = Geometry::torus(vec![9, 9]);
        assert_eq!(g.ball(&[0, 0], 1).len(), 9);
        assert_eq!(g.ball(&[0, 0], 4).len(), 81); // whole torus, each site once
    }

    #[test]
    fn nested_chain_radii() {
        let g = Geometry::torus(vec![9]);
        let nb = nested_boxes(&Ball::at_origin(1, 0), 2, 1, 1, &g).unwrap();
        assert_eq!(nb.outer.radius, 3);
        let radii: Vec<i64> = nb.chain.iter().map(|b| b.radius).collect();
        assert_eq!(radii, vec![2, 1, 0]);
    }

    #[test]
    fn nested_chain_too_big() {
        let g = Geometry::torus(vec![5]);
        assert!(nested_boxes(&Ball::at_origin(1, 0), 2, 1, 1, &g).is_err());
    }
}
