//! Deterministic coupled map lattice: the plain step, the generalized
//! single-site-map step, the perturbed step with its cap/noise condition
//! checkers, and local convergence certification.

use crate::error::{CoreError, CoreResult};
use crate::field::Field;
use crate::geometry::{Ball, Geometry};
pub use crate::geometry::{nested_boxes, NestedBoxes};
use crate::kernel::{Convolver, DispersalKernel, SpaceTimeBox};
use crate::logistic::LogisticMap;
use crate::model::{MeanPipeline, ModelParams};
use crate::scalar::Real;

/// One deterministic step: every site receives the dispersed offspring mean
/// of the previous configuration.
pub fn cml_step<R: Real>(field: &Field<R>, params: &ModelParams<R>) -> Field<R> {
    let mut pipeline = MeanPipeline::new(params);
    let mut out = Field::zero(field.geometry().clone());
    pipeline.dispersed_means(field.values(), out.values_mut());
    out
}

/// A single-site map `g: [0, bound] -> [0, bound]` with an attracting
/// fixed point, driving the generalized lattice step.
pub struct SingleSiteMap<R> {
    g: Box<dyn Fn(R) -> R + Send + Sync>,
    pub bound: R,
    pub fixed_point: R,
}

impl<R: Real> SingleSiteMap<R> {
    pub fn new(g: impl Fn(R) -> R + Send + Sync + 'static, bound: R, fixed_point: R) -> Self {
        SingleSiteMap { g: Box::new(g), bound, fixed_point }
    }

    /// Logistic single-site map on `[0, rate/scale]`; needs a positive
    /// fixed point (`rate > 1`) and self-mapping (`rate < 4`).
    pub fn logistic(map: LogisticMap<R>) -> CoreResult<Self> {
        let rate = map.rate();
        if !(rate > R::one() && rate < R::from_f64_lossy(4.0)) {
            return Err(CoreError::GrowthRateOutOfRange {
                m: rate.to_f64_lossy(),
                lo: 1.0,
                hi: 4.0,
            });
        }
        let bound = rate / map.scale;
        let fixed_point = map.fixed_points().1.expect("rate > 1");
        Ok(SingleSiteMap { g: Box::new(move |x| map.eval(x)), bound, fixed_point })
    }

    pub fn eval(&self, x: R) -> R {
        (self.g)(x)
    }
}

/// Generalized step `next(x) = sum_y g(prev(y)) p(y, x)`. Errors when `g`
/// sends a value outside `[0, bound]`.
pub fn generalized_cml_step<R: Real>(
    field: &Field<R>,
    map: &SingleSiteMap<R>,
    kernel: &DispersalKernel<R>,
) -> CoreResult<Field<R>> {
    let geom = field.geometry();
    let mut mapped = vec![R::zero(); field.len()];
    for (site, (out, &v)) in mapped.iter_mut().zip(field.values()).enumerate() {
        let g = map.eval(v);
        if g < R::zero() || g > map.bound {
            return Err(CoreError::MapRangeEscape {
                value: g.to_f64_lossy(),
                bound: map.bound.to_f64_lossy(),
                site,
            });
        }
        *out = g;
    }
    let conv = Convolver::dispersal(geom, kernel);
    let mut out = Field::zero(geom.clone());
    conv.apply(&mapped, out.values_mut());
    Ok(out)
}

/// Per-site additive perturbation of the deterministic step.
pub trait PerturbationProvider<R> {
    fn delta(&mut self, site: &[i64], time: u64, mean: R) -> R;
}

impl<R, F: FnMut(&[i64], u64, R) -> R> PerturbationProvider<R> for F {
    fn delta(&mut self, site: &[i64], time: u64, mean: R) -> R {
        self(site, time, mean)
    }
}

/// Record of a perturbed run: the dispersed means entering each step and
/// the perturbations applied to them, both indexed `[step][site]`.
#[derive(Debug, Clone)]
pub struct PerturbedTrace<R> {
    pub geometry: Geometry,
    pub means: Vec<Vec<R>>,
    pub deltas: Vec<Vec<R>>,
}

impl<R: Real> PerturbedTrace<R> {
    pub fn steps(&self) -> usize {
        self.means.len()
    }
}

/// One perturbed step: `next(x) = mean(x) + delta(x)` with `delta >= -mean`.
/// Negatives below round-off scale are clamped to zero; anything larger is
/// a provider contract violation.
pub fn perturbed_step<R: Real>(
    field: &Field<R>,
    params: &ModelParams<R>,
    provider: &mut dyn PerturbationProvider<R>,
    time: u64,
) -> CoreResult<Field<R>> {
    let mut pipeline = MeanPipeline::new(params);
    let (out, _, _) = perturbed_step_inner(field, &mut pipeline, provider, time)?;
    Ok(out)
}

fn perturbed_step_inner<R: Real>(
    field: &Field<R>,
    pipeline: &mut MeanPipeline<R>,
    provider: &mut dyn PerturbationProvider<R>,
    time: u64,
) -> CoreResult<(Field<R>, Vec<R>, Vec<R>)> {
    let geom = field.geometry();
    let mut means = vec![R::zero(); field.len()];
    pipeline.dispersed_means(field.values(), &mut means);
    let mut deltas = vec![R::zero(); field.len()];
    let mut out = Field::zero(geom.clone());
    for site in 0..field.len() {
        let coords = geom.coords_of(site);
        let mean = means[site];
        let delta = provider.delta(&coords, time, mean);
        let tol = R::from_f64_lossy(1e-9) * mean.max(R::one());
        if delta < -mean - tol {
            return Err(CoreError::PerturbationBelowMean {
                delta: delta.to_f64_lossy(),
                mean: mean.to_f64_lossy(),
                site,
            });
        }
        out.set(site, (mean + delta).max(R::zero()));
        deltas[site] = delta;
    }
    Ok((out, means, deltas))
}

/// Run `steps` perturbed steps from `field0`, recording means and deltas.
pub fn run_perturbed<R: Real>(
    field0: &Field<R>,
    params: &ModelParams<R>,
    provider: &mut dyn PerturbationProvider<R>,
    steps: u32,
) -> CoreResult<(Field<R>, PerturbedTrace<R>)> {
    let mut pipeline = MeanPipeline::new(params);
    let mut trace = PerturbedTrace {
        geometry: field0.geometry().clone(),
        means: Vec::with_capacity(steps as usize),
        deltas: Vec::with_capacity(steps as usize),
    };
    let mut field = field0.clone();
    for t in 0..steps {
        let (next, means, deltas) =
            perturbed_step_inner(&field, &mut pipeline, provider, t as u64)?;
        trace.means.push(means);
        trace.deltas.push(deltas);
        field = next;
    }
    Ok((field, trace))
}

/// First box point where the perturbed value `mean + delta` exceeds `cap`,
/// with the box translated to `(origin_site, origin_time)`.
pub fn cap_violation<R: Real>(
    trace: &PerturbedTrace<R>,
    cap: R,
    sbox: &SpaceTimeBox,
    origin_site: &[i64],
    origin_time: u32,
) -> Option<(Vec<i64>, u32)> {
    for (offset, t) in &sbox.points {
        let time = origin_time + t;
        if (time as usize) >= trace.steps() {
            continue;
        }
        let coords: Vec<i64> = origin_site.iter().zip(offset).map(|(o, d)| o + d).collect();
        if let Some(idx) = trace.geometry.resolve(&coords) {
            let v = trace.means[time as usize][idx] + trace.deltas[time as usize][idx];
            if v > cap {
                return Some((coords, time));
            }
        }
    }
    None
}

/// Whether every box point keeps the perturbed value at or below `cap`.
pub fn cap_condition_holds<R: Real>(
    trace: &PerturbedTrace<R>,
    cap: R,
    sbox: &SpaceTimeBox,
    origin_site: &[i64],
    origin_time: u32,
) -> bool {
    cap_violation(trace, cap, sbox, origin_site, origin_time).is_none()
}

/// First box point with `mean >= threshold` but `|delta| > delta_rel * mean`.
pub fn noise_violation<R: Real>(
    trace: &PerturbedTrace<R>,
    delta_rel: R,
    threshold: R,
    sbox: &SpaceTimeBox,
    origin_site: &[i64],
    origin_time: u32,
) -> Option<(Vec<i64>, u32)> {
    for (offset, t) in &sbox.points {
        let time = origin_time + t;
        if (time as usize) >= trace.steps() {
            continue;
        }
        let coords: Vec<i64> = origin_site.iter().zip(offset).map(|(o, d)| o + d).collect();
        if let Some(idx) = trace.geometry.resolve(&coords) {
            let mean = trace.means[time as usize][idx];
            if mean >= threshold && trace.deltas[time as usize][idx].abs() > delta_rel * mean {
                return Some((coords, time));
            }
        }
    }
    None
}

/// Whether every box point with a large mean keeps its perturbation
/// relatively small (closed inequalities on both sides).
pub fn noise_condition_holds<R: Real>(
    trace: &PerturbedTrace<R>,
    delta_rel: R,
    threshold: R,
    sbox: &SpaceTimeBox,
    origin_site: &[i64],
    origin_time: u32,
) -> bool {
    noise_violation(trace, delta_rel, threshold, sbox, origin_site, origin_time).is_none()
}

/// Outcome of iterating the lattice and watching a window.
#[derive(Debug, Clone)]
pub struct ConvergenceReport<R> {
    pub converged: bool,
    /// First step from which the window deviation stays within tolerance.
    pub n0: Option<u64>,
    /// Max deviation from the target over the window, per step (step 0 first).
    pub history: Vec<R>,
    pub target: R,
}

/// Iterate the full interaction dynamics and report pointwise convergence
/// of the window to the equilibrium `(m-1)/(lambda0+kappa)`. Non-convergence
/// within `max_steps` is a report, not an error.
pub fn converge_locally<R: Real>(
    field0: &Field<R>,
    params: &ModelParams<R>,
    window: &Ball,
    tol: R,
    max_steps: u64,
) -> ConvergenceReport<R> {
    let target = params.derived().equilibrium;
    let mut pipeline = MeanPipeline::new(params);
    let mut field = field0.clone();
    let mut next = Field::zero(field.geometry().clone());
    let sites = window.sites(field.geometry());
    let mut history = Vec::with_capacity(max_steps as usize + 1);
    history.push(window_deviation(&field, &sites, target));
    for _ in 0..max_steps {
        pipeline.dispersed_means(field.values(), next.values_mut());
        std::mem::swap(&mut field, &mut next);
        history.push(window_deviation(&field, &sites, target));
    }
    summarize(history, target, tol)
}

/// Same report for the generalized dynamics, targeting the fixed point of
/// the single-site map.
pub fn converge_locally_map<R: Real>(
    field0: &Field<R>,
    map: &SingleSiteMap<R>,
    kernel: &DispersalKernel<R>,
    window: &Ball,
    tol: R,
    max_steps: u64,
) -> CoreResult<ConvergenceReport<R>> {
    let mut field = field0.clone();
    let sites = window.sites(field.geometry());
    let mut history = Vec::with_capacity(max_steps as usize + 1);
    history.push(window_deviation(&field, &sites, map.fixed_point));
    for _ in 0..max_steps {
        field = generalized_cml_step(&field, map, kernel)?;
        history.push(window_deviation(&field, &sites, map.fixed_point));
    }
    Ok(summarize(history, map.fixed_point, tol))
}

fn window_deviation<R: Real>(field: &Field<R>, sites: &[usize], target: R) -> R {
    sites.iter().fold(R::zero(), |acc, &i| acc.max((*field.get(i) - target).abs()))
}

fn summarize<R: Real>(history: Vec<R>, target: R, tol: R) -> ConvergenceReport<R> {
    let last_bad = history.iter().rposition(|d| *d > tol);
    let (converged, n0) = match last_bad {
        None => (true, Some(0)),
        Some(i) if i + 1 < history.len() => (true, Some(i as u64 + 1)),
        Some(_) => (false, None),
    };
    ConvergenceReport { converged, n0, history, target }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{perturbation_box, CompetitionKernel};

    fn lazy_walk() -> DispersalKernel<f64> {
        DispersalKernel::new(1, vec![(vec![-1], 0.25), (vec![0], 0.5), (vec![1], 0.25)]).unwrap()
    }

    fn params(m: f64, lambda0: f64, extent: usize) -> ModelParams<f64> {
        ModelParams::new(
            m,
            lazy_walk(),
            CompetitionKernel::on_site(1, lambda0).unwrap(),
            Geometry::torus(vec![extent]),
        )
        .unwrap()
    }

    #[test]
    fn fixed_point_and_zero_preserved() {
        let p = params(2.0, 0.01, 9);
        let f = Field::constant(p.geometry.clone(), 100.0);
        let g = cml_step(&f, &p);
        for i in 0..g.len() {
            assert!((g.get(i) - 100.0).abs() < 1e-10);
        }
        let z: Field<f64> = Field::zero(p.geometry.clone());
        assert!(cml_step(&z, &p).is_extinct());
    }

    #[test]
    fn point_mass_profile() {
        let p = params(2.0, 0.01, 9);
        let mut f: Field<f64> = Field::zero(p.geometry.clone());
        f.set(0, 40.0);
        let g = cml_step(&f, &p);
        let produced = 40.0 * (2.0 - 0.4);
        assert!((g.get(0) - produced * 0.5).abs() < 1e-12);
        assert!((g.get(1) - produced * 0.25).abs() < 1e-12);
        assert!((g.get(8) - produced * 0.25).abs() < 1e-12);
    }

    #[test]
    fn generalized_matches_plain_when_on_site() {
        let p = params(2.5, 1.0, 9);
        let map = SingleSiteMap::logistic(LogisticMap::normalized(2.5)).unwrap();
        let f = Field::from_fn(p.geometry.clone(), |c| 0.3 + 0.1 * (c[0] as f64));
        let a = cml_step(&f, &p);
        let b = generalized_cml_step(&f, &map, &p.dispersal).unwrap();
        for i in 0..a.len() {
            assert_eq!(a.get(i), b.get(i));
        }
    }

    #[test]
    fn generalized_identity_conserves_mass() {
        let map = SingleSiteMap::new(|x: f64| x, 10.0, 1.0);
        let geom = Geometry::torus(vec![9]);
        let f = Field::from_fn(geom, |c| (c[0] as f64) / 2.0);
        let g = generalized_cml_step(&f, &map, &lazy_walk()).unwrap();
        assert!((g.total_mass::<f64>() - f.total_mass::<f64>()).abs() < 1e-12);
    }

    #[test]
    fn generalized_escape_detected() {
        let map = SingleSiteMap::new(|x: f64| x * 3.0, 1.0, 0.5);
        let geom = Geometry::torus(vec![9]);
        let f = Field::constant(geom, 0.9);
        assert!(matches!(
            generalized_cml_step(&f, &map, &lazy_walk()),
            Err(CoreError::MapRangeEscape { .. })
        ));
    }

    #[test]
    fn perturbed_zero_provider_is_plain_step() {
        let p = params(2.0, 0.01, 9);
        let f = Field::from_fn(p.geometry.clone(), |c| 30.0 + c[0] as f64);
        let plain = cml_step(&f, &p);
        let mut zero = |_: &[i64], _: u64, _: f64| 0.0;
        let pert = perturbed_step(&f, &p, &mut zero, 0).unwrap();
        assert_eq!(plain.values(), pert.values());
    }

    #[test]
    fn perturbed_scaling_provider() {
        let p = params(2.0, 0.01, 9);
        let f = Field::from_fn(p.geometry.clone(), |c| 30.0 + c[0] as f64);
        let plain = cml_step(&f, &p);
        let mut scale = |_: &[i64], _: u64, mean: f64| 0.01 * mean;
        let pert = perturbed_step(&f, &p, &mut scale, 0).unwrap();
        for i in 0..f.len() {
            assert!((pert.get(i) - plain.get(i) * 1.01).abs() < 1e-12);
        }
    }

    #[test]
    fn perturbed_contract_violation() {
        let p = params(2.0, 0.01, 9);
        let f = Field::constant(p.geometry.clone(), 50.0);
        let mut bad = |_: &[i64], _: u64, mean: f64| -mean - 1.0;
        assert!(matches!(
            perturbed_step(&f, &p, &mut bad, 0),
            Err(CoreError::PerturbationBelowMean { .. })
        ));
    }

    #[test]
    fn condition_checkers_see_box_points() {
        let p = params(2.0, 0.01, 21);
        let mut f: Field<f64> = Field::zero(p.geometry.clone());
        f.set(0, 50.0);
        let mut spike = |site: &[i64], time: u64, mean: f64| {
            if time == 1 && site == [1] {
                190.0 - mean // push this site above the cap
            } else {
                0.0
            }
        };
        let (_, trace) = run_perturbed(&f, &p, &mut spike, 3).unwrap();
        let sbox = perturbation_box(1, 2, 3);
        let cap = (1.0 - 0.1) * 200.0;
        assert!(!cap_condition_holds(&trace, cap, &sbox, &[0], 0));
        let hit = cap_violation(&trace, cap, &sbox, &[0], 0).unwrap();
        assert_eq!(hit, (vec![1], 1));
        // the spike is also a large relative perturbation at a large mean
        assert!(!noise_condition_holds(&trace, 0.1, 1.0, &sbox, &[0], 0));
        // zero perturbations pass both
        let mut zero = |_: &[i64], _: u64, _: f64| 0.0;
        let (_, trace) = run_perturbed(&f, &p, &mut zero, 3).unwrap();
        assert!(cap_condition_holds(&trace, cap, &sbox, &[0], 0));
        assert!(noise_condition_holds(&trace, 0.1, 1.0, &sbox, &[0], 0));
    }

    #[test]
    fn noise_condition_boundary_is_closed() {
        let p = params(2.0, 0.01, 21);
        let f = Field::constant(p.geometry.clone(), 100.0);
        // exactly delta * mean at every large-mean site: allowed
        let mut edge = |_: &[i64], _: u64, mean: f64| 0.1 * mean;
        let (_, trace) = run_perturbed(&f, &p, &mut edge, 2).unwrap();
        let sbox = perturbation_box(1, 2, 2);
        assert!(noise_condition_holds(&trace, 0.1, 100.0, &sbox, &[0], 0));
    }

    #[test]
    fn convergence_from_point_mass() {
        let p = params(2.5, 1.0, 33);
        let mut f: Field<f64> = Field::zero(p.geometry.clone());
        f.set(0, 1.0);
        let report = converge_locally(&f, &p, &Ball::at_origin(1, 0), 1e-8, 2000);
        assert!(report.converged);
        assert!((report.target - 1.5).abs() < 1e-12);
        assert!(report.n0.unwrap() > 0);
    }

    #[test]
    fn convergence_trivial_cases() {
        let p = params(2.0, 0.01, 9);
        let z: Field<f64> = Field::zero(p.geometry.clone());
        let report = converge_locally(&z, &p, &Ball::at_origin(1, 1), 1e-8, 50);
        assert!(!report.converged);
        let eq = Field::constant(p.geometry.clone(), 100.0);
        let report = converge_locally(&eq, &p, &Ball::at_origin(1, 1), 1e-8, 50);
        assert!(report.converged);
        assert_eq!(report.n0, Some(0));
    }
}
