//! One-dimensional logistic machinery: the single-site map, exact interval
//! images, shrinking invariant interval sequences, occupancy-margin
//! selection, contraction bounds and the sandwich maps.

use crate::error::{CoreError, CoreResult};
use crate::kernel::{colonization_horizon, reachable_box, DispersalKernel, OffsetMap, HORIZON_CAP_DEFAULT};
use crate::scalar::Real;

/// The map `x -> x * (m - shift - scale*x)^+` on the nonnegative half-line.
///
/// `shift = 0, scale = 1` is the normalized single-site map; general
/// `scale = lambda0` gives the unnormalized one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogisticMap<R> {
    pub m: R,
    pub shift: R,
    pub scale: R,
}

impl<R: Real> LogisticMap<R> {
    pub fn normalized(m: R) -> Self {
        LogisticMap { m, shift: R::zero(), scale: R::one() }
    }

    pub fn shifted(m: R, shift: R) -> Self {
        LogisticMap { m, shift, scale: R::one() }
    }

    pub fn scaled(m: R, scale: R) -> Self {
        LogisticMap { m, shift: R::zero(), scale }
    }

    pub fn eval(&self, x: R) -> R {
        x * (self.m - self.shift - self.scale * x).max(R::zero())
    }

    /// Effective growth rate `m - shift`.
    pub fn rate(&self) -> R {
        self.m - self.shift
    }

    /// Fixed points: 0 always; the positive one `(m - shift - 1)/scale`
    /// exists only when `m - shift > 1`.
    pub fn fixed_points(&self) -> (R, Option<R>) {
        if self.rate() > R::one() {
            (R::zero(), Some((self.rate() - R::one()) / self.scale))
        } else {
            (R::zero(), None)
        }
    }

    /// Argmax `(m - shift) / (2 scale)` of the parabola.
    pub fn vertex(&self) -> R {
        self.rate() / (R::two() * self.scale)
    }

    /// Maximal value `(m - shift)^2 / (4 scale)`.
    pub fn peak(&self) -> R {
        let r = self.rate();
        r * r / (R::from_f64_lossy(4.0) * self.scale)
    }

    /// Exact image of `[a, b]`, `0 <= a <= b`. The map is unimodal on the
    /// half-line, so the minimum sits at an endpoint and the maximum at an
    /// endpoint or the vertex.
    pub fn interval_image(&self, a: R, b: R) -> (R, R) {
        debug_assert!(R::zero() <= a && a <= b);
        let fa = self.eval(a);
        let fb = self.eval(b);
        let lo = fa.min(fb);
        let v = self.vertex();
        let hi = if a <= v && v <= b { self.eval(v) } else { fa.max(fb) };
        (lo, hi)
    }

    /// Larger solution of `eval(x) = c` for `0 <= c <= peak`.
    pub fn upper_preimage(&self, c: R) -> R {
        let half = self.vertex();
        let disc = (half * half - c / self.scale).max(R::zero());
        half + disc.sqrt()
    }
}

/// Shrinking pair of monotone sequences squeezing the attracting fixed
/// point of the normalized logistic map, together with the perturbation
/// budget `gamma` they tolerate.
#[derive(Debug, Clone)]
pub struct IntervalSequencePair<R> {
    /// Strictly increasing lower edges, indices `0..=n0+1`.
    pub alphas: Vec<R>,
    /// Strictly decreasing upper edges, same length.
    pub betas: Vec<R>,
    /// Perturbation bound: containment holds for every shift in `[0, gamma]`.
    pub gamma: R,
    /// First index at which both edges are within `eps` of the fixed point.
    pub n0: usize,
}

impl<R: Real> IntervalSequencePair<R> {
    /// Containment at one index for both the unshifted and the
    /// `gamma`-shifted map: image of `[alpha_n, beta_n]` strictly inside
    /// `(alpha_{n+1}, beta_{n+1})`.
    pub fn contains_step(&self, m: R, n: usize) -> bool {
        let maps = [LogisticMap::normalized(m), LogisticMap::shifted(m, self.gamma)];
        let (a, b) = (self.alphas[n], self.betas[n]);
        let (a1, b1) = (self.alphas[n + 1], self.betas[n + 1]);
        maps.iter().all(|map| {
            let (lo, hi) = map.interval_image(a, b);
            a1 < lo && hi < b1
        })
    }
}

const SEQUENCE_RETRIES: u32 = 40;
const SEQUENCE_MAX_LEN: usize = 200_000;

/// Build the shrinking interval sequences for the normalized map with
/// growth rate `m` in `(1, 3)` and target half-width `eps`.
///
/// The construction differs with the slope of the map at its attracting
/// fixed point (positive below 2, zero at 2, negative above). The
/// perturbation budget starts at half the available slack and is halved on
/// verification failure, up to 40 times.
pub fn shrinking_intervals<R: Real>(m: R, eps: R) -> CoreResult<IntervalSequencePair<R>> {
    let one = R::one();
    if !(m > one && m < R::from_f64_lossy(3.0)) {
        return Err(CoreError::GrowthRateOutOfRange { m: m.to_f64_lossy(), lo: 1.0, hi: 3.0 });
    }
    if eps <= R::zero() {
        return Err(CoreError::Invalid(format!("eps must be positive, got {eps}")));
    }
    let slack = if m < R::two() {
        (m - one).min(R::two() - m)
    } else if m > R::two() {
        m - R::two()
    } else {
        one
    };
    let mut gamma = R::half() * eps.min(slack);
    for _ in 0..SEQUENCE_RETRIES {
        if let Some(pair) = try_build(m, eps, gamma) {
            if (0..=pair.n0).all(|n| pair.contains_step(m, n)) {
                return Ok(pair);
            }
        }
        gamma = gamma * R::half();
    }
    Err(CoreError::IntervalConstructionFailed {
        m: m.to_f64_lossy(),
        eps: eps.to_f64_lossy(),
        retries: SEQUENCE_RETRIES,
    })
}

fn try_build<R: Real>(m: R, eps: R, gamma: R) -> Option<IntervalSequencePair<R>> {
    let fixed = m - R::one();
    let band_lo = fixed - eps;
    let band_hi = fixed + eps;
    let f = LogisticMap::normalized(m);
    let fg = LogisticMap::shifted(m, gamma);
    let fg_fixed = fg.fixed_points().1?;

    let mut alphas: Vec<R> = Vec::new();
    let mut betas: Vec<R> = Vec::new();

    if m < R::two() {
        // increasing regime: midpoint relaxations on both edges
        let alpha0 = default_alpha0(m, eps).min(fg_fixed * R::half());
        let beta0 = fg.upper_preimage(fg.eval(alpha0));
        if !(beta0 > m * R::half()) {
            return None;
        }
        alphas.push(alpha0);
        betas.push(beta0);
        let beta1 = (f.peak() + m * R::half()) * R::half();
        let mut n = 0usize;
        loop {
            let a = alphas[n];
            alphas.push((a + fg.eval(a)) * R::half());
            if n == 0 {
                betas.push(beta1);
            } else {
                let b = betas[n];
                betas.push((f.eval(b) + b) * R::half());
            }
            n += 1;
            if alphas[n] >= band_lo && betas[n] <= band_hi {
                break;
            }
            if n > SEQUENCE_MAX_LEN {
                return None;
            }
        }
    } else if m == R::two() {
        // flat-top regime: the upper edge is the conjugate root of the lower
        let alpha0 = default_alpha0(m, eps).min(gamma * R::half());
        alphas.push(alpha0);
        betas.push(fg.upper_preimage(fg.eval(alpha0)));
        let mut n = 0usize;
        loop {
            let a = alphas[n];
            let a_next = (fg.eval(a) + a) * R::half();
            alphas.push(a_next);
            betas.push(fg.upper_preimage(fg.eval(a_next)));
            n += 1;
            if alphas[n] >= band_lo && betas[n] <= band_hi {
                break;
            }
            if n > SEQUENCE_MAX_LEN {
                return None;
            }
        }
    } else {
        // overshooting regime: two phases, roles of the edges cross over
        let peak = f.peak();
        let fg_peak = fg.eval(peak);
        let half_m = m * R::half();
        if !(fg_fixed > fg_peak && fg_peak > half_m) {
            return None;
        }
        let alpha0 = default_alpha0(m, eps).min(fg.rate() * R::half() * R::half());
        alphas.push(alpha0);
        // phase 1 lower edges, until the midpoint step would cross m/2
        loop {
            let a = *alphas.last().unwrap();
            let cand = (a + fg.eval(a)) * R::half();
            if cand > half_m {
                alphas.push(cand.min((half_m + fg_peak) * R::half()));
                break;
            }
            alphas.push(cand);
            if alphas.len() > SEQUENCE_MAX_LEN {
                return None;
            }
        }
        let crossover = alphas.len() - 2;
        // phase 1 upper edges: strictly decreasing, above the peak, each
        // keeping its shifted image above the next lower edge
        let mut prev = m;
        for i in 0..=crossover {
            let constraint = fg.upper_preimage(alphas[i + 1].min(fg_peak));
            let upper = constraint.min(prev);
            if upper <= peak {
                return None;
            }
            let b = (peak + upper) * R::half();
            if b >= prev {
                return None;
            }
            betas.push(b);
            prev = b;
        }
        betas.push((prev + peak) * R::half());
        debug_assert_eq!(betas.len(), alphas.len());
        // phase 2: crossed midpoint recursion
        let mut n = alphas.len() - 1;
        loop {
            let (a, b) = (alphas[n], betas[n]);
            alphas.push((fg.eval(b) + a) * R::half());
            betas.push((b + f.eval(a)) * R::half());
            n += 1;
            if alphas[n] >= band_lo && betas[n] <= band_hi {
                break;
            }
            if n > SEQUENCE_MAX_LEN {
                return None;
            }
        }
    }
    finish(alphas, betas, gamma, m, f, fg, fg_fixed)
}

fn default_alpha0<R: Real>(m: R, eps: R) -> R {
    let fixed = m - R::one();
    eps.min(fixed / R::from_f64_lossy(10.0))
}

/// Extend by one index (the containment at `n0` references `n0 + 1`) and
/// run the monotonicity checks the construction promises.
fn finish<R: Real>(
    mut alphas: Vec<R>,
    mut betas: Vec<R>,
    gamma: R,
    _m: R,
    f: LogisticMap<R>,
    fg: LogisticMap<R>,
    fg_fixed: R,
) -> Option<IntervalSequencePair<R>> {
    let n0 = alphas.len() - 1;
    let (a, b) = (alphas[n0], betas[n0]);
    let monotone_tail = fg.eval(a) > a && f.eval(b) < b && fg.eval(a) < fg_fixed;
    if monotone_tail {
        alphas.push((a + fg.eval(a)) * R::half());
        betas.push((f.eval(b) + b) * R::half());
    } else {
        alphas.push((fg.eval(b) + a) * R::half());
        betas.push((b + f.eval(a)) * R::half());
    }
    let increasing = alphas.windows(2).all(|w| w[0] < w[1]);
    let decreasing = betas.windows(2).all(|w| w[0] > w[1]);
    let ordered = alphas.iter().zip(&betas).all(|(x, y)| x < y);
    if increasing && decreasing && ordered {
        Some(IntervalSequencePair { alphas, betas, gamma, n0 })
    } else {
        None
    }
}

/// Margins selected for the occupancy window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OccupancyMargins<R> {
    pub eps1: R,
    pub eps2: R,
    /// Colonization horizon used to enumerate the reachable set.
    pub n_star: u32,
    /// max over the reachable set of `p^n(y) * growth^n`.
    pub reach_max: R,
    /// min over the reachable set of `p^n(y) * growth^n`.
    pub reach_min: R,
}

/// Select `(eps1, eps2)` for growth rate `m` in `(1, 4)`, relative noise
/// `delta` and intermediate growth `m_tilde` in `(1, m(1-delta))`.
///
/// `eps2` is the largest value passing both
/// `m (1-delta) (1 - eps2 m/(m-1)) >= m_tilde` (growth survives the noise
/// and the margin) and `m^2/4 <= (1 - 2 eps2) m` (one-site peak stays below
/// the cap; needs `m < 4`), scaled by 0.95. `eps1` then keeps
/// `p^n(y) m_tilde^n eps1 <= eps2 (m+1)/m` over the whole reachable set,
/// scaled by 0.95.
pub fn occupancy_margins<R: Real>(
    m: R,
    delta: R,
    m_tilde: R,
    kernel: &DispersalKernel<R>,
) -> CoreResult<OccupancyMargins<R>> {
    let one = R::one();
    let four = R::from_f64_lossy(4.0);
    if !(m > one && m < four) {
        return Err(CoreError::GrowthRateOutOfRange { m: m.to_f64_lossy(), lo: 1.0, hi: 4.0 });
    }
    if !(m_tilde > one && m * (one - delta) > m_tilde) {
        return Err(CoreError::Invalid(format!(
            "need m(1-delta) > m_tilde > 1, got m={m}, delta={delta}, m_tilde={m_tilde}"
        )));
    }
    let safety = R::from_f64_lossy(0.95);
    let growth_clause = (one - m_tilde / (m * (one - delta))) * (m - one) / m;
    let cap_clause = (one - m / four) * R::half();
    let bound = growth_clause.min(cap_clause);
    if bound <= R::zero() {
        return Err(CoreError::NoFeasibleMargin {
            m: m.to_f64_lossy(),
            delta: delta.to_f64_lossy(),
        });
    }
    let eps2 = safety * bound;

    let n_star = colonization_horizon(kernel, m_tilde, HORIZON_CAP_DEFAULT)?;
    let (reach_min, reach_max) = reach_extremes(kernel, m_tilde, n_star);
    let eps1 = safety * eps2 * (m + one) / m / reach_max;
    Ok(OccupancyMargins { eps1, eps2, n_star, reach_max, reach_min })
}

/// Margins for the colonization sandbox, which must additionally absorb
/// off-diagonal competition pressure of size `alpha` and keep cap-valued
/// sites productive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SandboxMargins<R> {
    pub eps1: R,
    pub eps2: R,
    pub n_star: u32,
    pub reach_min: R,
    pub reach_max: R,
    /// Growth reserved for neighbor competition.
    pub alpha: R,
}

/// Like [`occupancy_margins`] but with a competition reserve `alpha`
/// subtracted from the growth rate wherever the lower bounds need it.
///
/// Starting from `alpha = (m - m_tilde/(1-delta)) / 2`, the reserve is
/// halved until three conditions hold with a 0.95 margin: the reduced rate
/// still clears `m_tilde` after the noise, the reserve stays below
/// `eps2 * m` (so a site at the cap still produces offspring under the
/// reduced map), and the cap-valued endpoint still grows by `m_tilde`
/// relative to the largest reachable mass bound.
pub fn colonization_margins<R: Real>(
    m: R,
    delta: R,
    m_tilde: R,
    kernel: &DispersalKernel<R>,
) -> CoreResult<SandboxMargins<R>> {
    let one = R::one();
    let four = R::from_f64_lossy(4.0);
    if !(m > one && m < four) {
        return Err(CoreError::GrowthRateOutOfRange { m: m.to_f64_lossy(), lo: 1.0, hi: 4.0 });
    }
    if !(m_tilde > one && m * (one - delta) > m_tilde) {
        return Err(CoreError::Invalid(format!(
            "need m(1-delta) > m_tilde > 1, got m={m}, delta={delta}, m_tilde={m_tilde}"
        )));
    }
    let n_star = colonization_horizon(kernel, m_tilde, HORIZON_CAP_DEFAULT)?;
    let (reach_min, reach_max) = reach_extremes(kernel, m_tilde, n_star);
    let mut alpha = R::half() * (m - m_tilde / (one - delta));
    for _ in 0..60 {
        if let Some((eps1, eps2)) = margins_for_reserve(m, delta, m_tilde, alpha, reach_max) {
            return Ok(SandboxMargins { eps1, eps2, n_star, reach_min, reach_max, alpha });
        }
        alpha = alpha * R::half();
    }
    Err(CoreError::NoFeasibleMargin { m: m.to_f64_lossy(), delta: delta.to_f64_lossy() })
}

fn margins_for_reserve<R: Real>(m: R, delta: R, m_tilde: R, alpha: R, reach_max: R) -> Option<(R, R)> {
    let one = R::one();
    let four = R::from_f64_lossy(4.0);
    let safety = R::from_f64_lossy(0.95);
    let g = m - alpha;
    let noisy_target = m_tilde / (one - delta);
    if g <= noisy_target {
        return None;
    }
    let growth_clause = (one - m_tilde / (g * (one - delta))) * (m - one) / m;
    let cap_clause = (one - m / four) * R::half();
    let bound = growth_clause.min(cap_clause);
    if bound <= R::zero() {
        return None;
    }
    let eps2 = safety * bound;
    if alpha >= eps2 * m {
        return None;
    }
    let growth_bound = (g - noisy_target) / (m - one);
    let eps1 = safety * growth_bound.min(eps2 * (m + one) / m) / reach_max;
    // a cap-valued site under the reduced map must still multiply the
    // largest reachable mass bound by m_tilde
    let lhs = (one - delta) * (one - eps2) * m * (eps2 * m - alpha);
    let rhs = m_tilde * (reach_max * eps1) * (m - one);
    if safety * lhs >= rhs {
        Some((eps1, eps2))
    } else {
        None
    }
}

/// (min, max) of `p^n(y) * growth^n` over the reachable set up to `n_star`.
pub fn reach_extremes<R: Real>(kernel: &DispersalKernel<R>, growth: R, n_star: u32) -> (R, R) {
    let sbox = reachable_box(kernel, n_star);
    let mut powers: Vec<OffsetMap<R>> = Vec::with_capacity(n_star as usize + 1);
    let mut p = OffsetMap::point_mass(kernel.dim());
    powers.push(p.clone());
    for _ in 0..n_star {
        p = p.convolve(kernel.weights());
        powers.push(p.clone());
    }
    let mut lo = R::infinity();
    let mut hi = R::zero();
    for (off, j) in &sbox.points {
        let v = powers[*j as usize].get(off) * growth.powi(*j as i32);
        lo = lo.min(v);
        hi = hi.max(v);
    }
    (lo, hi)
}

/// Gradient bound of the local interaction map over a configuration box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContractionReport<R> {
    /// sup over the box of the l1 norm of the gradient.
    pub grad_sup: R,
    /// Margin constant; contraction certified when `grad_sup < 1 - eps/2`.
    pub eps: R,
    pub contraction_ok: bool,
}

/// Analytic supremum of the l1 gradient norm of `zeta -> f(x; zeta)` when
/// every value of `zeta` lies in `[(m-1-delta)/lambda0, (m-1+delta)/lambda0]`.
///
/// With `kappa_hat = kappa/lambda0` and `u = lambda0 * zeta(x)`,
/// `v = lambda0 * (weighted neighbor average)`, the own-site partial is
/// `m - 2u - kappa_hat v` and the off-site partials sum to at most
/// `kappa_hat (m-1+delta)`.
pub fn contraction_bound<R: Real>(
    m: R,
    lambda0: R,
    kappa: R,
    delta: R,
) -> CoreResult<ContractionReport<R>> {
    let one = R::one();
    let two = R::two();
    let kappa_hat = kappa / lambda0;
    let hi = m - one + delta;
    let lo = m - one - delta;
    if lo <= R::zero() {
        return Err(CoreError::Invalid(format!("box reaches 0: m - 1 - delta = {lo}")));
    }
    if one - delta - kappa_hat * hi <= R::zero() {
        return Err(CoreError::BoxLeavesPositivePart);
    }
    let own_low = m - (two + kappa_hat) * hi;
    let own_high = m - (two + kappa_hat) * lo;
    let grad_sup = own_low.abs().max(own_high.abs()) + kappa_hat * hi;
    let linear = (m - two).abs() + two * delta + kappa_hat * (delta + m - one);
    let eps = if linear < one { R::from_f64_lossy(0.95) * (one - linear) } else { R::zero() };
    let contraction_ok = eps > R::zero()
        && grad_sup < one - eps * R::half()
        && kappa_hat <= (delta / (m - one)).min(eps / (two * (two + delta)));
    Ok(ContractionReport { grad_sup, eps, contraction_ok })
}

/// Off-diagonal budget: any `kappa/lambda0` below `kappa_star` passes
/// [`contraction_bound`] with the stated `delta`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContractionConstants<R> {
    pub kappa_star: R,
    pub eps: R,
}

pub fn contraction_constants<R: Real>(m: R, delta: R) -> CoreResult<ContractionConstants<R>> {
    let one = R::one();
    let two = R::two();
    let base = (m - two).abs() + two * delta;
    if base >= one || m <= one + delta {
        return Err(CoreError::NoContractionConstants {
            m: m.to_f64_lossy(),
            delta: delta.to_f64_lossy(),
        });
    }
    let eps = R::half() * (one - base);
    let from_linear = (one - eps - base) / (delta + m - one);
    let from_delta = delta / (m - one);
    let from_cross = eps / (two * (two + delta));
    let kappa_star = R::from_f64_lossy(0.95) * from_linear.min(from_delta).min(from_cross);
    if kappa_star <= R::zero() {
        return Err(CoreError::NoContractionConstants {
            m: m.to_f64_lossy(),
            delta: delta.to_f64_lossy(),
        });
    }
    Ok(ContractionConstants { kappa_star, eps })
}

/// Normalized one-dimensional maps bracketing the local interaction when
/// configurations stay in `[0, m]` after scaling by `lambda0`: the lower
/// map gives up `m * kappa/lambda0` of growth, the upper one ignores the
/// neighbors entirely.
pub fn sandwich_maps<R: Real>(
    m: R,
    lambda0: R,
    kappa: R,
) -> CoreResult<(LogisticMap<R>, LogisticMap<R>)> {
    let loss = m * kappa / lambda0;
    if loss >= m - R::one() {
        return Err(CoreError::SandwichDegenerate {
            product: loss.to_f64_lossy(),
            limit: (m - R::one()).to_f64_lossy(),
        });
    }
    Ok((LogisticMap::shifted(m, loss), LogisticMap::normalized(m)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eval_and_fixed_points() {
        let f = LogisticMap::normalized(2.0f64);
        assert_eq!(f.eval(1.0), 1.0);
        assert_eq!(f.eval(0.0), 0.0);
        let ft = LogisticMap::scaled(2.0f64, 0.01);
        assert!((ft.eval(100.0) - 100.0).abs() < 1e-12);
        assert_eq!(f.fixed_points(), (0.0, Some(1.0)));
        let fp = LogisticMap::shifted(2.0f64, 0.1).fixed_points().1.unwrap();
        assert!((fp - 0.9).abs() < 1e-15);
        assert_eq!(LogisticMap::normalized(1.0f64).fixed_points().1, None);
    }

    #[test]
    fn interval_images() {
        let f = LogisticMap::normalized(2.0f64);
        assert_eq!(f.interval_image(0.5, 1.5), (0.75, 1.0));
        assert_eq!(f.interval_image(1.0, 1.0), (1.0, 1.0));
        let ft = LogisticMap::scaled(2.0f64, 0.01);
        let (lo, hi) = ft.interval_image(10.0, 180.0);
        assert!((lo - 19.0).abs() < 1e-12);
        assert!((hi - 100.0).abs() < 1e-12);
    }

    #[test]
    fn peak_containment_boundary() {
        // below rate 4 the map sends its positive region into itself
        let f = LogisticMap::normalized(3.9f64);
        assert!(f.peak() <= 3.9);
        let f = LogisticMap::normalized(4.1f64);
        assert!(f.peak() > 4.1);
    }

    fn check_pair(m: f64, eps: f64) {
        let pair = shrinking_intervals::<f64>(m, eps).unwrap();
        let fixed = m - 1.0;
        let n0 = pair.n0;
        assert!(pair.alphas[n0] >= fixed - eps);
        assert!(pair.betas[n0] <= fixed + eps);
        assert!(pair.betas[n0] - pair.alphas[n0] <= 2.0 * eps);
        for n in 0..=n0 {
            assert!(pair.contains_step(m, n), "containment failed at n={n}, m={m}");
        }
    }

    #[test]
    fn sequences_low_regime() {
        check_pair(1.5, 0.05);
        let pair = shrinking_intervals(1.5, 0.05f64).unwrap();
        // lower edges approach the shifted fixed point from below
        assert!(pair.alphas[pair.n0] < 0.5 - pair.gamma);
        assert!(pair.betas[pair.n0] > 0.5);
    }

    #[test]
    fn sequences_flat_regime() {
        check_pair(2.0, 0.05);
        let pair = shrinking_intervals(2.0, 0.05f64).unwrap();
        // upper edges are conjugate roots, decreasing toward 1
        assert!(pair.betas[pair.n0] > 1.0 && pair.betas[pair.n0] < 1.05);
    }

    #[test]
    fn sequences_high_regime() {
        check_pair(2.5, 0.05);
    }

    #[test]
    fn sequences_out_of_range() {
        assert!(shrinking_intervals(3.2f64, 0.05).is_err());
        assert!(shrinking_intervals(0.9f64, 0.05).is_err());
    }

    #[test]
    fn margins_worked_example() {
        let kernel =
            DispersalKernel::new(1, vec![(vec![-1], 0.25), (vec![0], 0.5), (vec![1], 0.25)])
                .unwrap();
        let m = occupancy_margins(2.0f64, 0.1, 1.5, &kernel).unwrap();
        // growth clause 1/12 binds against cap clause 1/4
        assert!((m.eps2 - 0.95 / 12.0).abs() < 1e-12);
        assert_eq!(m.n_star, 4);
        // the largest reach weight is the origin term at the horizon
        let p4 = kernel.power(4);
        assert!((m.reach_max - p4.get(&[0]) * 1.5f64.powi(4)).abs() < 1e-12);
        let expected_eps1 = 0.95 * m.eps2 * 1.5 / m.reach_max;
        assert!((m.eps1 - expected_eps1).abs() < 1e-12);
        // substituted back, the selection inequalities hold
        assert!(2.0 * 0.9 * (1.0 - m.eps2 * 2.0) >= 1.5);
        assert!(1.0 <= (1.0 - 2.0 * m.eps2) * 2.0);
        assert!(m.reach_max * m.eps1 <= m.eps2 * 1.5);
    }

    #[test]
    fn margins_collapse_near_four() {
        let kernel =
            DispersalKernel::new(1, vec![(vec![-1], 0.25), (vec![0], 0.5), (vec![1], 0.25)])
                .unwrap();
        let m = occupancy_margins(3.999f64, 0.0, 1.5, &kernel).unwrap();
        assert!(m.eps2 < 2e-4);
        assert!(occupancy_margins(5.0f64, 0.0, 1.5, &kernel).is_err());
    }

    #[test]
    fn contraction_examples() {
        let r = contraction_bound(2.0f64, 1.0, 0.0, 0.1).unwrap();
        assert!((r.grad_sup - 0.2).abs() < 1e-12);
        assert!(r.contraction_ok);
        // |m-2| + 2 delta reaches 1: no margin left
        let r = contraction_bound(2.0f64, 1.0, 0.0, 0.5).unwrap();
        assert!(!r.contraction_ok);
        let r = contraction_bound(2.8f64, 1.0, 0.0, 0.15).unwrap();
        assert!(!r.contraction_ok);
    }

    #[test]
    fn contraction_constants_cover_bound() {
        for m in [1.5, 2.0, 2.5, 2.9] {
            let delta = (1.0 - (m - 2.0f64).abs()) / 8.0;
            let c = contraction_constants(m, delta).unwrap();
            let r = contraction_bound(m, 1.0, c.kappa_star, delta).unwrap();
            assert!(r.contraction_ok, "m={m}");
        }
    }

    #[test]
    fn sandwich_fixed_points() {
        let (lower, upper) = sandwich_maps(2.0f64, 1.0, 0.01).unwrap();
        assert!((lower.fixed_points().1.unwrap() - 0.98).abs() < 1e-12);
        assert_eq!(upper.fixed_points().1.unwrap(), 1.0);
        let (lower, upper) = sandwich_maps(2.0f64, 1.0, 0.0).unwrap();
        assert_eq!(lower, upper);
        assert!(sandwich_maps(2.0f64, 1.0, 0.6).is_err());
    }
}
