//! Dispersal and competition kernels, kernel powers, the colonization
//! horizon and the space-time boxes derived from them.

use std::collections::BTreeMap;

use crate::error::{CoreError, CoreResult};
use crate::geometry::Geometry;
use crate::scalar::Real;

/// Finitely supported weights over integer offsets, kept sorted for
/// deterministic iteration (and hence bit-stable sums).
#[derive(Debug, Clone, PartialEq)]
pub struct OffsetMap<R> {
    dim: usize,
    entries: Vec<(Vec<i64>, R)>,
}

impl<R: Real> OffsetMap<R> {
    pub fn new(dim: usize, mut entries: Vec<(Vec<i64>, R)>) -> CoreResult<Self> {
        if entries.is_empty() {
            return Err(CoreError::KernelEmpty);
        }
        for (off, _) in &entries {
            if off.len() != dim {
                return Err(CoreError::KernelDimensionMismatch {
                    offset: off.clone(),
                    got: off.len(),
                    expected: dim,
                });
            }
        }
        entries.sort_by(|a, b| a.0.cmp(&b.0));
        for w in entries.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(CoreError::KernelDuplicateOffset { offset: w[0].0.clone() });
            }
        }
        Ok(OffsetMap { dim, entries })
    }

    pub fn point_mass(dim: usize) -> Self {
        OffsetMap { dim, entries: vec![(vec![0; dim], R::one())] }
    }

    pub fn empty(dim: usize) -> Self {
        OffsetMap { dim, entries: Vec::new() }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[(Vec<i64>, R)] {
        &self.entries
    }

    pub fn get(&self, offset: &[i64]) -> R {
        match self.entries.binary_search_by(|e| e.0.as_slice().cmp(offset)) {
            Ok(i) => self.entries[i].1,
            Err(_) => R::zero(),
        }
    }

    pub fn sum(&self) -> R {
        self.entries.iter().fold(R::zero(), |a, (_, w)| a + *w)
    }

    /// Sup-norm radius of the support.
    pub fn support_radius(&self) -> i64 {
        self.entries
            .iter()
            .filter(|(_, w)| *w != R::zero())
            .flat_map(|(off, _)| off.iter().map(|c| c.abs()))
            .max()
            .unwrap_or(0)
    }

    /// Convolution of two offset maps.
    pub fn convolve(&self, other: &OffsetMap<R>) -> OffsetMap<R> {
        assert_eq!(self.dim, other.dim);
        let mut acc: BTreeMap<Vec<i64>, R> = BTreeMap::new();
        for (a, wa) in &self.entries {
            for (b, wb) in &other.entries {
                let off: Vec<i64> = a.iter().zip(b).map(|(x, y)| x + y).collect();
                let e = acc.entry(off).or_insert_with(R::zero);
                *e = *e + *wa * *wb;
            }
        }
        OffsetMap { dim: self.dim, entries: acc.into_iter().collect() }
    }
}

/// Offspring dispersal kernel: finite range, stochastic, zero mean, aperiodic.
#[derive(Debug, Clone, PartialEq)]
pub struct DispersalKernel<R> {
    weights: OffsetMap<R>,
    range: i64,
}

impl<R: Real> DispersalKernel<R> {
    /// Validate and build a dispersal kernel. Weight sums within `1e-9` of 1
    /// are renormalized; the stored sum is exact to `1e-12`.
    pub fn new(dim: usize, entries: Vec<(Vec<i64>, R)>) -> CoreResult<Self> {
        let mut weights = OffsetMap::new(dim, entries)?;
        for (off, w) in weights.entries() {
            if *w < R::zero() {
                return Err(CoreError::KernelNegativeWeight {
                    offset: off.clone(),
                    weight: w.to_f64_lossy(),
                });
            }
        }
        let sum = weights.sum().to_f64_lossy();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(CoreError::KernelBadSum { sum });
        }
        let inv = R::one() / weights.sum();
        for e in &mut weights.entries {
            e.1 = e.1 * inv;
        }
        let mean: Vec<f64> = (0..dim)
            .map(|axis| {
                weights
                    .entries()
                    .iter()
                    .map(|(off, w)| off[axis] as f64 * w.to_f64_lossy())
                    .sum()
            })
            .collect();
        if mean.iter().any(|m| m.abs() > 1e-9) {
            return Err(CoreError::KernelNonzeroMean { mean });
        }
        let support: Vec<&[i64]> = weights
            .entries()
            .iter()
            .filter(|(_, w)| *w > R::zero())
            .map(|(off, _)| off.as_slice())
            .collect();
        check_aperiodic(dim, &support)?;
        let range = weights.support_radius().max(1);
        Ok(DispersalKernel { weights, range })
    }

    pub fn dim(&self) -> usize {
        self.weights.dim()
    }

    /// Sup-norm range `R_p >= 1`.
    pub fn range(&self) -> i64 {
        self.range
    }

    pub fn weights(&self) -> &OffsetMap<R> {
        &self.weights
    }

    /// n-fold convolution; the 0th power is the point mass at the origin.
    pub fn power(&self, n: u32) -> OffsetMap<R> {
        let mut acc = OffsetMap::point_mass(self.dim());
        for _ in 0..n {
            acc = acc.convolve(&self.weights);
        }
        acc
    }
}

/// Return-time periodicity check by breadth-first enumeration of the sites
/// reachable in `n` steps, up to horizon `2 * R * d + 16`. The support is
/// aperiodic iff the gcd of the step counts at which the walk can sit at
/// the origin reaches 1.
fn check_aperiodic(dim: usize, support: &[&[i64]]) -> CoreResult<()> {
    let radius = support
        .iter()
        .flat_map(|off| off.iter().map(|c| c.abs()))
        .max()
        .unwrap_or(0)
        .max(1);
    let horizon = 2 * radius as u64 * dim as u64 + 16;
    let mut frontier: Vec<Vec<i64>> = vec![vec![0; dim]];
    let mut gcd: u64 = 0;
    for step in 1..=horizon {
        let mut next: BTreeMap<Vec<i64>, ()> = BTreeMap::new();
        for pos in &frontier {
            for off in support {
                let cand: Vec<i64> = pos.iter().zip(off.iter()).map(|(p, o)| p + o).collect();
                // Positions that cannot return within the horizon are dead weight.
                let dist = cand.iter().map(|c| c.abs()).max().unwrap_or(0);
                if dist as u64 <= (horizon - step) * radius as u64 {
                    next.insert(cand, ());
                }
            }
        }
        frontier = next.into_keys().collect();
        if frontier.iter().any(|p| p.iter().all(|&c| c == 0)) {
            gcd = gcd_u64(gcd, step);
            if gcd == 1 {
                return Ok(());
            }
        }
    }
    Err(CoreError::KernelPeriodic { gcd, horizon })
}

fn gcd_u64(a: u64, b: u64) -> u64 {
    if a == 0 {
        b
    } else {
        gcd_u64(b % a, a)
    }
}

/// Competition kernel split into the on-site coefficient, the total
/// off-diagonal mass and the normalized off-diagonal shape.
#[derive(Debug, Clone, PartialEq)]
pub struct CompetitionKernel<R> {
    dim: usize,
    range: i64,
    lambda0: R,
    kappa: R,
    gamma: OffsetMap<R>,
}

impl<R: Real> CompetitionKernel<R> {
    /// Decompose a raw kernel (offset -> coefficient, on-site entry at the
    /// zero offset) into `(lambda0, kappa, gamma)`.
    pub fn from_raw(dim: usize, entries: Vec<(Vec<i64>, R)>) -> CoreResult<Self> {
        let raw = OffsetMap::new(dim, entries)?;
        for (off, w) in raw.entries() {
            if *w < R::zero() {
                return Err(CoreError::CompetitionNegativeEntry {
                    offset: off.clone(),
                    weight: w.to_f64_lossy(),
                });
            }
        }
        let zero = vec![0i64; dim];
        let lambda0 = raw.get(&zero);
        if lambda0 <= R::zero() {
            return Err(CoreError::CompetitionNonpositiveOnSite { value: lambda0.to_f64_lossy() });
        }
        let off_diag: Vec<(Vec<i64>, R)> = raw
            .entries()
            .iter()
            .filter(|(off, w)| off != &zero && *w > R::zero())
            .cloned()
            .collect();
        let kappa = off_diag.iter().fold(R::zero(), |a, (_, w)| a + *w);
        let gamma = if kappa > R::zero() {
            let normalized =
                off_diag.iter().map(|(off, w)| (off.clone(), *w / kappa)).collect::<Vec<_>>();
            OffsetMap::new(dim, normalized)?
        } else {
            OffsetMap { dim, entries: Vec::new() }
        };
        let range = raw.support_radius().max(1);
        Ok(CompetitionKernel { dim, range, lambda0, kappa, gamma })
    }

    /// Purely on-site competition with coefficient `lambda0`.
    pub fn on_site(dim: usize, lambda0: R) -> CoreResult<Self> {
        Self::from_raw(dim, vec![(vec![0; dim], lambda0)])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Sup-norm range `R_lambda >= 1`.
    pub fn range(&self) -> i64 {
        self.range
    }

    pub fn lambda0(&self) -> R {
        self.lambda0
    }

    pub fn kappa(&self) -> R {
        self.kappa
    }

    /// Normalized off-diagonal shape (empty when `kappa == 0`).
    pub fn gamma(&self) -> &OffsetMap<R> {
        &self.gamma
    }

    /// Raw coefficient at an offset: `lambda0` on-site, `kappa * gamma` off.
    pub fn raw(&self, offset: &[i64]) -> R {
        if offset.iter().all(|&c| c == 0) {
            self.lambda0
        } else {
            self.kappa * self.gamma.get(offset)
        }
    }

    /// Total mass `lambda0 + kappa`.
    pub fn total(&self) -> R {
        self.lambda0 + self.kappa
    }

    /// Raw kernel entries including the on-site coefficient.
    pub fn raw_entries(&self) -> Vec<(Vec<i64>, R)> {
        let mut out = vec![(vec![0i64; self.dim], self.lambda0)];
        for (off, g) in self.gamma.entries() {
            out.push((off.clone(), self.kappa * *g));
        }
        out
    }
}

/// A finite set of (site offset, time) pairs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpaceTimeBox {
    pub points: Vec<(Vec<i64>, u32)>,
}

impl SpaceTimeBox {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn contains(&self, offset: &[i64], time: u32) -> bool {
        self.points.iter().any(|(o, t)| *t == time && o == offset)
    }
}

/// Minimal number of steps after which the kernel-spread mass, grown by
/// `growth` per step, reaches level 1 at every site of the unit ball:
/// the smallest `j` with `p^j(y) * growth^j >= 1` for all `|y|_inf <= 1`.
pub fn colonization_horizon<R: Real>(
    kernel: &DispersalKernel<R>,
    growth: R,
    cap: u32,
) -> CoreResult<u32> {
    if growth <= R::one() {
        return Err(CoreError::GrowthFactorTooSmall { value: growth.to_f64_lossy() });
    }
    let dim = kernel.dim();
    let mut power = OffsetMap::point_mass(dim);
    let mut factor = R::one();
    let unit_ball = unit_ball_offsets(dim);
    for j in 1..=cap {
        power = power.convolve(kernel.weights());
        factor = factor * growth;
        if unit_ball.iter().all(|y| power.get(y) * factor >= R::one()) {
            return Ok(j);
        }
    }
    Err(CoreError::HorizonCapExceeded { cap })
}

pub const HORIZON_CAP_DEFAULT: u32 = 256;

fn unit_ball_offsets(dim: usize) -> Vec<Vec<i64>> {
    let mut out = vec![vec![]];
    for _ in 0..dim {
        out = out
            .into_iter()
            .flat_map(|prefix: Vec<i64>| {
                (-1..=1).map(move |c| {
                    let mut v = prefix.clone();
                    v.push(c);
                    v
                })
            })
            .collect();
    }
    out
}

/// Space-time support of the kernel powers up to `n_star`:
/// `{(y, j) : p^j(y) > 0, 0 <= j <= n_star}`.
pub fn reachable_box<R: Real>(kernel: &DispersalKernel<R>, n_star: u32) -> SpaceTimeBox {
    let mut points = Vec::new();
    let mut power = OffsetMap::point_mass(kernel.dim());
    for j in 0..=n_star {
        if j > 0 {
            power = power.convolve(kernel.weights());
        }
        for (off, w) in power.entries() {
            if *w > R::zero() {
                points.push((off.clone(), j));
            }
        }
    }
    SpaceTimeBox { points }
}

/// Space-time cone constraining perturbations:
/// `{(y, n) : n < n_star, |y|_inf <= n * reach}` with `reach = R_p + R_lambda`.
pub fn perturbation_box(dim: usize, reach: i64, n_star: u32) -> SpaceTimeBox {
    assert!(reach >= 0);
    let mut points = Vec::new();
    for n in 0..n_star {
        let radius = n as i64 * reach;
        let mut offset = vec![-radius; dim];
        loop {
            points.push((offset.clone(), n));
            let mut axis = dim;
            let mut done = false;
            loop {
                if axis == 0 {
                    done = true;
                    break;
                }
                axis -= 1;
                offset[axis] += 1;
                if offset[axis] <= radius {
                    break;
                }
                offset[axis] = -radius;
            }
            if done {
                break;
            }
        }
    }
    SpaceTimeBox { points }
}

/// Lookup tables to evaluate `dst[x] = sum_k w_k * src[x + off_k]` fast on a
/// fixed geometry. Dispersal gathers use negated offsets so the same
/// machinery computes `sum_y f(y) p(x - y)`.
#[derive(Debug, Clone)]
pub struct Convolver<R> {
    weights: Vec<R>,
    // One table per offset: source index for each site, or SENTINEL outside
    // an absorbing window.
    tables: Vec<Vec<u32>>,
    sites: usize,
}

const SENTINEL: u32 = u32::MAX;

impl<R: Real> Convolver<R> {
    pub fn new(geom: &Geometry, entries: &[(Vec<i64>, R)], negate: bool) -> Self {
        assert!(geom.len() < SENTINEL as usize);
        let mut weights = Vec::with_capacity(entries.len());
        let mut tables = Vec::with_capacity(entries.len());
        for (off, w) in entries {
            if *w == R::zero() {
                continue;
            }
            let off: Vec<i64> = if negate { off.iter().map(|c| -c).collect() } else { off.clone() };
            let table = (0..geom.len())
                .map(|i| match geom.step(i, &off) {
                    Some(j) => j as u32,
                    None => SENTINEL,
                })
                .collect();
            weights.push(*w);
            tables.push(table);
        }
        Convolver { weights, tables, sites: geom.len() }
    }

    /// Gather for dispersal: `dst[x] = sum_k w_k * src[x - off_k]`.
    pub fn dispersal(geom: &Geometry, kernel: &DispersalKernel<R>) -> Self {
        Self::new(geom, kernel.weights().entries(), true)
    }

    /// Gather for competition shape: `dst[x] = sum_k gamma_k * src[x + off_k]`.
    pub fn competition(geom: &Geometry, kernel: &CompetitionKernel<R>) -> Self {
        Self::new(geom, kernel.gamma().entries(), false)
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn apply(&self, src: &[R], dst: &mut [R]) {
        assert_eq!(src.len(), self.sites);
        assert_eq!(dst.len(), self.sites);
        dst.fill(R::zero());
        match self.boundary_free() {
            true => {
                for (w, table) in self.weights.iter().zip(&self.tables) {
                    for (d, &j) in dst.iter_mut().zip(table.iter()) {
                        *d = *d + *w * src[j as usize];
                    }
                }
            }
            false => {
                for (w, table) in self.weights.iter().zip(&self.tables) {
                    for (d, &j) in dst.iter_mut().zip(table.iter()) {
                        if j != SENTINEL {
                            *d = *d + *w * src[j as usize];
                        }
                    }
                }
            }
        }
    }

    fn boundary_free(&self) -> bool {
        self.tables.iter().all(|t| t.iter().all(|&j| j != SENTINEL))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lazy_walk() -> DispersalKernel<f64> {
        DispersalKernel::new(1, vec![(vec![-1], 0.25), (vec![0], 0.5), (vec![1], 0.25)]).unwrap()
    }

    fn five_point() -> CoreResult<DispersalKernel<f64>> {
        DispersalKernel::new(
            2,
            vec![
                (vec![0, 0], 0.2),
                (vec![1, 0], 0.2),
                (vec![-1, 0], 0.2),
                (vec![0, 1], 0.2),
                (vec![0, -1], 0.2),
            ],
        )
    }

    #[test]
    fn lazy_walk_valid() {
        let k = lazy_walk();
        assert_eq!(k.range(), 1);
        assert!((k.weights().sum() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn simple_walk_periodic() {
        let err = DispersalKernel::<f64>::new(1, vec![(vec![-1], 0.5), (vec![1], 0.5)]).unwrap_err();
        assert!(matches!(err, CoreError::KernelPeriodic { gcd: 2, .. }));
    }

    #[test]
    fn five_point_2d_valid() {
        let k = five_point().unwrap();
        assert_eq!(k.range(), 1);
    }

    #[test]
    fn period_three_support_detected() {
        // steps +2 and -1 return only at multiples of 3
        let err = DispersalKernel::<f64>::new(1, vec![(vec![2], 1.0 / 3.0), (vec![-1], 2.0 / 3.0)])
            .unwrap_err();
        assert!(matches!(err, CoreError::KernelPeriodic { gcd: 3, .. }));
    }

    #[test]
    fn nonzero_mean_rejected() {
        let err =
            DispersalKernel::<f64>::new(1, vec![(vec![0], 0.5), (vec![1], 0.5)]).unwrap_err();
        assert!(matches!(err, CoreError::KernelNonzeroMean { .. }));
    }

    #[test]
    fn near_one_sum_normalized() {
        let k = DispersalKernel::<f64>::new(
            1,
            vec![(vec![-1], 0.25), (vec![0], 0.5 + 3e-10), (vec![1], 0.25)],
        )
        .unwrap();
        assert!((k.weights().sum() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn far_sum_rejected() {
        let err = DispersalKernel::<f64>::new(1, vec![(vec![-1], 0.3), (vec![0], 0.5), (vec![1], 0.3)])
            .unwrap_err();
        assert!(matches!(err, CoreError::KernelBadSum { .. }));
    }

    #[test]
    fn competition_decomposition() {
        let k = CompetitionKernel::<f64>::from_raw(
            1,
            vec![(vec![0], 0.01), (vec![1], 0.001), (vec![-1], 0.001)],
        )
        .unwrap();
        assert_eq!(k.lambda0(), 0.01);
        assert!((k.kappa() - 0.002).abs() < 1e-15);
        assert!((k.gamma().get(&[1]) - 0.5).abs() < 1e-15);
        assert_eq!(k.gamma().get(&[0]), 0.0);
        // raw reconstruction
        assert!((k.raw(&[1]) - 0.001).abs() < 1e-18);
    }

    #[test]
    fn competition_on_site_only() {
        let k = CompetitionKernel::<f64>::on_site(1, 0.01).unwrap();
        assert_eq!(k.kappa(), 0.0);
        assert!(k.gamma().entries().is_empty());
        assert_eq!(k.range(), 1);
    }

    #[test]
    fn competition_zero_on_site_rejected() {
        let err = CompetitionKernel::<f64>::from_raw(1, vec![(vec![0], 0.0)]).unwrap_err();
        assert!(matches!(err, CoreError::CompetitionNonpositiveOnSite { .. }));
    }

    #[test]
    fn power_zero_is_identity() {
        let k = lazy_walk();
        let p0 = k.power(0);
        assert_eq!(p0.entries().len(), 1);
        assert_eq!(p0.get(&[0]), 1.0);
        let p1 = k.power(1);
        assert_eq!(p1.entries(), k.weights().entries());
    }

    #[test]
    fn lazy_walk_square() {
        let p2 = lazy_walk().power(2);
        let expect = [(-2, 1.0 / 16.0), (-1, 0.25), (0, 0.375), (1, 0.25), (2, 1.0 / 16.0)];
        for (off, w) in expect {
            assert!((p2.get(&[off]) - w).abs() < 1e-15, "offset {off}");
        }
    }

    #[test]
    fn horizon_lazy_walk() {
        let n = colonization_horizon(&lazy_walk(), 1.5, HORIZON_CAP_DEFAULT).unwrap();
        assert_eq!(n, 4);
        // one step earlier the unit ball is not yet covered
        let p3 = lazy_walk().power(3);
        assert!(p3.get(&[1]) * 1.5f64.powi(3) < 1.0);
    }

    #[test]
    fn horizon_cap_exceeded() {
        let k = DispersalKernel::<f64>::new(
            1,
            vec![(vec![-1], 0.005), (vec![0], 0.99), (vec![1], 0.005)],
        )
        .unwrap();
        let err = colonization_horizon(&k, 1.0001, 64).unwrap_err();
        assert!(matches!(err, CoreError::HorizonCapExceeded { cap: 64 }));
    }

    #[test]
    fn perturbation_box_count() {
        // d=1, reach 2, n*=4: sum over n<4 of (4n+1) sites
        let b = perturbation_box(1, 2, 4);
        assert_eq!(b.len(), 1 + 5 + 9 + 13);
        let b1 = perturbation_box(1, 2, 1);
        assert_eq!(b1.points, vec![(vec![0], 0)]);
    }

    #[test]
    fn reachable_box_contains_origin() {
        let s = reachable_box(&lazy_walk(), 4);
        assert!(s.contains(&[0], 0));
        assert!(s.contains(&[4], 4));
        assert!(!s.contains(&[5], 4));
    }

    #[test]
    fn convolver_matches_direct_sum() {
        let geom = Geometry::torus(vec![7]);
        let k = lazy_walk();
        let conv = Convolver::dispersal(&geom, &k);
        let src: Vec<f64> = (0..7).map(|i| (i * i) as f64).collect();
        let mut dst = vec![0.0; 7];
        conv.apply(&src, &mut dst);
        for x in 0..7i64 {
            let mut want = 0.0;
            for (off, w) in k.weights().entries() {
                let y = (x - off[0]).rem_euclid(7);
                want += w * src[y as usize];
            }
            assert!((dst[x as usize] - want).abs() < 1e-12);
        }
    }

    #[test]
    fn convolver_absorbing_drops_outside() {
        let geom = Geometry::new(vec![3], crate::geometry::Boundary::Absorbing);
        let k = lazy_walk();
        let conv = Convolver::dispersal(&geom, &k);
        let src = vec![1.0, 0.0, 0.0];
        let mut dst = vec![0.0; 3];
        conv.apply(&src, &mut dst);
        // mass 0.25 leaves the window to the left
        assert_eq!(dst, vec![0.5, 0.25, 0.0]);
    }
}
