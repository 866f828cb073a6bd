//! Colonization sandbox: drive the perturbed lattice from a single
//! occupied site with an adversarial perturbation that saturates the
//! cap/noise contract, and check that occupancy spreads to the unit ball
//! after the colonization horizon.

use crate::cml::{cap_violation, noise_violation, run_perturbed, PerturbationProvider};
use crate::error::{CoreError, CoreResult};
use crate::field::Field;
use crate::geometry::Geometry;
use crate::kernel::{perturbation_box, CompetitionKernel, DispersalKernel, SpaceTimeBox};
use crate::logistic::{colonization_margins, SandboxMargins};
use crate::model::{derived_constants, is_occupied, ModelParams, OccupancyParams};
use crate::rng::{streams, RngKeyStream};
use crate::scalar::Real;

/// Everything derived from `(m, kernel, delta, k_threshold, m_tilde)` that
/// the sandbox needs: occupancy margins, the colonization horizon, and the
/// two parameter thresholds under which the spread is guaranteed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SandboxThresholds<R> {
    pub eps1: R,
    pub eps2: R,
    pub n_star: u32,
    /// min over the reachable set of `p^n(y) m_tilde^n`.
    pub reach_min: R,
    /// On-site coefficient threshold: keeps every reachable mean >= K.
    pub lambda0_star: R,
    /// Off-diagonal budget per unit of `lambda0`.
    pub kappa_star: R,
    /// Competition absorbed into the growth margin.
    pub alpha: R,
}

/// Compute the sandbox thresholds. The margin selection reserves `alpha`
/// of growth for off-diagonal competition; `lambda0_star` makes the lowest
/// reachable mean hit `k_threshold`, and `kappa_star` keeps the total
/// neighbor pressure below `alpha`.
pub fn sandbox_thresholds<R: Real>(
    m: R,
    kernel: &DispersalKernel<R>,
    delta: R,
    k_threshold: R,
    m_tilde: R,
) -> CoreResult<SandboxThresholds<R>> {
    if k_threshold <= R::zero() {
        return Err(CoreError::SandboxPrecondition {
            reason: format!("k_threshold must be positive, got {k_threshold}"),
        });
    }
    let margins = colonization_margins(m, delta, m_tilde, kernel)?;
    let SandboxMargins { eps1, eps2, n_star, reach_min, alpha, .. } = margins;
    let lambda0_star = eps1 * (m - R::one()) * reach_min / k_threshold;
    let kappa_star = alpha / ((R::one() - eps2) * m);
    Ok(SandboxThresholds { eps1, eps2, n_star, reach_min, lambda0_star, kappa_star, alpha })
}

/// Verdict of one sandbox run.
#[derive(Debug, Clone)]
pub struct SandboxVerdict<R> {
    /// All sites of the unit ball are occupied at the horizon.
    pub all_occupied: bool,
    /// First cap-condition violation on the space-time cone, if any.
    pub cap_violation: Option<(Vec<i64>, u32)>,
    /// First noise-condition violation on the cone, if any.
    pub noise_violation: Option<(Vec<i64>, u32)>,
    pub final_field: Field<R>,
}

impl<R> SandboxVerdict<R> {
    pub fn in_contract(&self) -> bool {
        self.cap_violation.is_none() && self.noise_violation.is_none()
    }
}

/// Adversary that saturates the contract at every site with an independent
/// random sign: where the mean is large it applies the full relative
/// perturbation, elsewhere it either fills the site up to the cap or
/// empties it.
pub struct SaturatingAdversary<R> {
    rng: RngKeyStream,
    pub cap: R,
    pub delta_rel: R,
    pub k_threshold: R,
}

impl<R: Real> SaturatingAdversary<R> {
    pub fn new(seed: u64, cap: R, delta_rel: R, k_threshold: R) -> Self {
        SaturatingAdversary { rng: RngKeyStream::new(seed, streams::ADVERSARY), cap, delta_rel, k_threshold }
    }
}

impl<R: Real> PerturbationProvider<R> for SaturatingAdversary<R> {
    fn delta(&mut self, site: &[i64], time: u64, mean: R) -> R {
        let positive = self.rng.uniform(time, site, 0) < 0.5;
        if mean >= self.k_threshold {
            let full = self.delta_rel * mean;
            if positive {
                full.min(self.cap - mean)
            } else {
                -full
            }
        } else if positive {
            self.cap - mean
        } else {
            -mean
        }
    }
}

/// Run the sandbox with the saturating adversary.
///
/// Preconditions: `lambda0 <= lambda0_star`, `kappa <= kappa_star * lambda0`,
/// a usable horizon (`n_star >= 2`), and an initial mass inside the
/// occupancy window (defaults to its lower edge).
pub fn colonization_sandbox<R: Real>(
    m: R,
    dispersal: &DispersalKernel<R>,
    competition: &CompetitionKernel<R>,
    thresholds: &SandboxThresholds<R>,
    delta: R,
    k_threshold: R,
    initial_mass: Option<R>,
    adversary_seed: u64,
) -> CoreResult<SandboxVerdict<R>> {
    let lambda0 = competition.lambda0();
    let kappa = competition.kappa();
    if lambda0 > thresholds.lambda0_star {
        return Err(CoreError::SandboxPrecondition {
            reason: format!(
                "lambda0 = {lambda0} exceeds lambda0_star = {}",
                thresholds.lambda0_star
            ),
        });
    }
    if kappa > thresholds.kappa_star * lambda0 {
        return Err(CoreError::SandboxPrecondition {
            reason: format!(
                "kappa = {kappa} exceeds kappa_star * lambda0 = {}",
                thresholds.kappa_star * lambda0
            ),
        });
    }
    if thresholds.n_star < 2 {
        return Err(CoreError::SandboxPrecondition {
            reason: format!("colonization horizon {} is too short", thresholds.n_star),
        });
    }
    let derived = derived_constants(m, lambda0, kappa);
    let cap = (R::one() - thresholds.eps2) * derived.cutoff;
    let low = thresholds.eps1 * derived.equilibrium_on_site;
    let start = initial_mass.unwrap_or(low);
    if !(start >= low && start <= cap) {
        return Err(CoreError::SandboxPrecondition {
            reason: format!("initial mass {start} outside the occupancy window [{low}, {cap}]"),
        });
    }

    let reach = dispersal.range() + competition.range();
    let min_extent = 2 * (reach + competition.range()) as usize + 1;
    let extent = (2 * thresholds.n_star as usize * reach as usize + 1).max(min_extent);
    let geometry = Geometry::torus(vec![extent; dispersal.dim()]);
    let params = ModelParams::new(m, dispersal.clone(), competition.clone(), geometry.clone())?;

    let mut field: Field<R> = Field::zero(geometry.clone());
    field.set(geometry.origin(), start);

    let mut adversary = SaturatingAdversary::new(adversary_seed, cap, delta, k_threshold);
    let (final_field, trace) = run_perturbed(&field, &params, &mut adversary, thresholds.n_star)?;

    let sbox = cone(dispersal, competition, thresholds.n_star);
    let origin = vec![0i64; geometry.dim()];
    let cap_hit = cap_violation(&trace, cap, &sbox, &origin, 0);
    let noise_hit = noise_violation(&trace, delta, k_threshold, &sbox, &origin, 0);

    let occ = OccupancyParams::new(thresholds.eps1, thresholds.eps2)?;
    let all_occupied = geometry
        .ball(&origin, 1)
        .into_iter()
        .all(|site| is_occupied(&params, &final_field, site, &occ));

    Ok(SandboxVerdict { all_occupied, cap_violation: cap_hit, noise_violation: noise_hit, final_field })
}

fn cone<R: Real>(
    dispersal: &DispersalKernel<R>,
    competition: &CompetitionKernel<R>,
    n_star: u32,
) -> SpaceTimeBox {
    perturbation_box(dispersal.dim(), dispersal.range() + competition.range(), n_star)
}
