//! Model parameters and the per-site offspring machinery.

use crate::error::{CoreError, CoreResult};
use crate::field::Field;
use crate::geometry::Geometry;
use crate::kernel::{CompetitionKernel, Convolver, DispersalKernel};
use crate::scalar::{Mass, Real};

/// Full single-species parameter set on a finite window.
#[derive(Debug, Clone)]
pub struct ModelParams<R> {
    pub m: R,
    pub dispersal: DispersalKernel<R>,
    pub competition: CompetitionKernel<R>,
    pub geometry: Geometry,
}

impl<R: Real> ModelParams<R> {
    pub fn new(
        m: R,
        dispersal: DispersalKernel<R>,
        competition: CompetitionKernel<R>,
        geometry: Geometry,
    ) -> CoreResult<Self> {
        if dispersal.dim() != geometry.dim() {
            return Err(CoreError::GeometryDimensionMismatch {
                got: geometry.dim(),
                expected: dispersal.dim(),
            });
        }
        if competition.dim() != geometry.dim() {
            return Err(CoreError::GeometryDimensionMismatch {
                got: geometry.dim(),
                expected: competition.dim(),
            });
        }
        let minimum = 2 * (dispersal.range() + competition.range()) as usize + 1;
        for (axis, &extent) in geometry.extents().iter().enumerate() {
            if extent < minimum {
                return Err(CoreError::ExtentTooSmall { axis, extent, minimum });
            }
        }
        Ok(ModelParams { m, dispersal, competition, geometry })
    }

    pub fn lambda0(&self) -> R {
        self.competition.lambda0()
    }

    pub fn kappa(&self) -> R {
        self.competition.kappa()
    }

    /// Combined interaction reach `R_p + R_lambda`.
    pub fn reach(&self) -> i64 {
        self.dispersal.range() + self.competition.range()
    }

    pub fn derived(&self) -> DerivedConstants<R> {
        derived_constants(self.m, self.lambda0(), self.kappa())
    }

    /// Offspring mean produced at one site:
    /// `eta(x) * (m - lambda0*eta(x) - kappa * sum gamma*eta)^+`.
    pub fn offspring_mean<T: Mass>(&self, field: &Field<T>, site: usize) -> R {
        let eta: R = field.get(site).to_real();
        if eta == R::zero() {
            return R::zero();
        }
        let mut competition = self.lambda0() * eta;
        if self.kappa() > R::zero() {
            let mut neighbors = R::zero();
            let coords = field.geometry().coords_of(site);
            for (off, g) in self.competition.gamma().entries() {
                let shifted: Vec<i64> = coords.iter().zip(off).map(|(c, o)| c + o).collect();
                neighbors = neighbors + *g * field.at_coords(&shifted).to_real();
            }
            competition = competition + self.kappa() * neighbors;
        }
        eta * (self.m - competition).max(R::zero())
    }

    /// Mean arrivals at one site after dispersal: `sum_y f(y) p(x - y)`.
    pub fn dispersed_mean<T: Mass>(&self, field: &Field<T>, site: usize) -> R {
        let coords = field.geometry().coords_of(site);
        let mut total = R::zero();
        for (off, w) in self.dispersal.weights().entries() {
            let source: Vec<i64> = coords.iter().zip(off).map(|(c, o)| c - o).collect();
            if let Some(idx) = field.geometry().resolve(&source) {
                total = total + *w * self.offspring_mean(field, idx);
            }
        }
        total
    }
}

/// Constants derived from `(m, lambda0, kappa)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivedConstants<R> {
    /// Largest possible offspring mean at one site: `m^2 / (4 lambda0)`.
    pub max_offspring: R,
    /// Mass level above which a site produces nothing: `m / lambda0`.
    pub cutoff: R,
    /// Equilibrium with off-diagonal competition: `(m-1)/(lambda0+kappa)`.
    pub equilibrium: R,
    /// On-site-only equilibrium: `(m-1)/lambda0`.
    pub equilibrium_on_site: R,
    /// False when `m <= 1` (no positive equilibrium; both values above are 0).
    pub equilibrium_defined: bool,
}

pub fn derived_constants<R: Real>(m: R, lambda0: R, kappa: R) -> DerivedConstants<R> {
    let four = R::from_f64_lossy(4.0);
    let max_offspring = m * m / (four * lambda0);
    let cutoff = m / lambda0;
    if m > R::one() {
        DerivedConstants {
            max_offspring,
            cutoff,
            equilibrium: (m - R::one()) / (lambda0 + kappa),
            equilibrium_on_site: (m - R::one()) / lambda0,
            equilibrium_defined: true,
        }
    } else {
        DerivedConstants {
            max_offspring,
            cutoff,
            equilibrium: R::zero(),
            equilibrium_on_site: R::zero(),
            equilibrium_defined: false,
        }
    }
}

/// Margins for the occupancy window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OccupancyParams<R> {
    pub eps1: R,
    pub eps2: R,
}

impl<R: Real> OccupancyParams<R> {
    pub fn new(eps1: R, eps2: R) -> CoreResult<Self> {
        let ok = |e: R| e > R::zero() && e < R::one();
        if !ok(eps1) || !ok(eps2) {
            return Err(CoreError::Invalid(format!(
                "occupancy margins must lie in (0,1), got eps1={eps1}, eps2={eps2}"
            )));
        }
        Ok(OccupancyParams { eps1, eps2 })
    }
}

/// A site is occupied when its mass sits in
/// `[eps1 * (m-1)/lambda0, (1-eps2) * m/lambda0]` and no site within the
/// competition range exceeds the upper edge.
pub fn is_occupied<R: Real, T: Mass>(
    params: &ModelParams<R>,
    field: &Field<T>,
    site: usize,
    occ: &OccupancyParams<R>,
) -> bool {
    let derived = params.derived();
    let lower = occ.eps1 * derived.equilibrium_on_site;
    let upper = (R::one() - occ.eps2) * derived.cutoff;
    let value: R = field.get(site).to_real();
    if value < lower || value > upper {
        return false;
    }
    let coords = field.geometry().coords_of(site);
    for idx in field.geometry().ball(&coords, params.competition.range()) {
        let v: R = field.get(idx).to_real();
        if v > upper {
            return false;
        }
    }
    true
}

/// Number of occupied sites in the field.
pub fn occupied_count<R: Real, T: Mass>(
    params: &ModelParams<R>,
    field: &Field<T>,
    occ: &OccupancyParams<R>,
) -> usize {
    (0..field.len()).filter(|&i| is_occupied(params, field, i, occ)).count()
}

/// Reusable pipeline computing the dispersed-mean field in two convolver
/// passes. All per-step allocations live here.
#[derive(Debug, Clone)]
pub struct MeanPipeline<R> {
    dispersal: Convolver<R>,
    gamma: Option<Convolver<R>>,
    m: R,
    lambda0: R,
    kappa: R,
    offspring: Vec<R>,
    neighbors: Vec<R>,
}

impl<R: Real> MeanPipeline<R> {
    pub fn new(params: &ModelParams<R>) -> Self {
        let dispersal = Convolver::dispersal(&params.geometry, &params.dispersal);
        let gamma = if params.kappa() > R::zero() {
            Some(Convolver::competition(&params.geometry, &params.competition))
        } else {
            None
        };
        let sites = params.geometry.len();
        MeanPipeline {
            dispersal,
            gamma,
            m: params.m,
            lambda0: params.lambda0(),
            kappa: params.kappa(),
            offspring: vec![R::zero(); sites],
            neighbors: vec![R::zero(); sites],
        }
    }

    /// Fill `means` with the dispersed mean field of `values`.
    pub fn dispersed_means(&mut self, values: &[R], means: &mut [R]) {
        self.offspring_means(values);
        self.dispersal.apply(&self.offspring, means);
    }

    /// Per-site offspring means, kept in an internal buffer.
    pub fn offspring_means(&mut self, values: &[R]) -> &[R] {
        match &self.gamma {
            Some(conv) => {
                conv.apply(values, &mut self.neighbors);
                for ((out, &eta), &nb) in
                    self.offspring.iter_mut().zip(values).zip(self.neighbors.iter())
                {
                    *out = eta * (self.m - self.lambda0 * eta - self.kappa * nb).max(R::zero());
                }
            }
            None => {
                for (out, &eta) in self.offspring.iter_mut().zip(values) {
                    *out = eta * (self.m - self.lambda0 * eta).max(R::zero());
                }
            }
        }
        &self.offspring
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Geometry;

    fn simple_params(m: f64, lambda0: f64, extent: usize) -> ModelParams<f64> {
        let p = DispersalKernel::new(1, vec![(vec![-1], 0.25), (vec![0], 0.5), (vec![1], 0.25)])
            .unwrap();
        let lam = CompetitionKernel::on_site(1, lambda0).unwrap();
        ModelParams::new(m, p, lam, Geometry::torus(vec![extent])).unwrap()
    }

    #[test]
    fn derived_values() {
        let d = derived_constants(2.0, 0.01, 0.0);
        assert_eq!(d.max_offspring, 100.0);
        assert_eq!(d.cutoff, 200.0);
        assert_eq!(d.equilibrium, 100.0);
        assert_eq!(d.equilibrium_on_site, 100.0);
        let d = derived_constants(2.0, 0.01, 0.01);
        assert_eq!(d.equilibrium, 50.0);
        let d = derived_constants(1.0, 0.01, 0.0);
        assert!(!d.equilibrium_defined);
        assert_eq!(d.equilibrium, 0.0);
    }

    #[test]
    fn offspring_mean_cases() {
        let params = simple_params(2.0, 0.01, 9);
        // constant field at the equilibrium reproduces itself
        let field = Field::constant(params.geometry.clone(), 100.0);
        assert!((params.offspring_mean(&field, 0) - 100.0).abs() < 1e-12);
        // above the cutoff nothing is produced
        let field = Field::constant(params.geometry.clone(), 250.0);
        assert_eq!(params.offspring_mean(&field, 0), 0.0);
        // zero mass
        let field: Field<f64> = Field::zero(params.geometry.clone());
        assert_eq!(params.offspring_mean(&field, 0), 0.0);
    }

    #[test]
    fn dispersed_mean_fixed_point_and_point_mass() {
        let params = simple_params(2.0, 0.01, 9);
        let field = Field::constant(params.geometry.clone(), 100.0);
        for site in 0..field.len() {
            assert!((params.dispersed_mean(&field, site) - 100.0).abs() < 1e-10);
        }
        // single point mass: hand convolution of the one-point offspring value
        let mut field: Field<f64> = Field::zero(params.geometry.clone());
        field.set(0, 40.0);
        let produced = 40.0 * (2.0 - 0.01 * 40.0);
        assert!((params.dispersed_mean(&field, 0) - produced * 0.5).abs() < 1e-12);
        assert!((params.dispersed_mean(&field, 1) - produced * 0.25).abs() < 1e-12);
        assert!((params.dispersed_mean(&field, 8) - produced * 0.25).abs() < 1e-12);
        assert_eq!(params.dispersed_mean(&field, 4), 0.0);
    }

    #[test]
    fn occupancy_window() {
        let params = simple_params(2.0, 0.01, 9);
        let occ = OccupancyParams::new(0.1, 0.1).unwrap();
        // window is [10, 180]
        let mut field = Field::constant(params.geometry.clone(), 50.0);
        assert!(is_occupied(&params, &field, 4, &occ));
        field.set(5, 190.0);
        assert!(!is_occupied(&params, &field, 4, &occ));
        // two steps away is outside the competition range
        field.set(5, 50.0);
        field.set(6, 190.0);
        assert!(is_occupied(&params, &field, 4, &occ));
        field.set(4, 5.0);
        assert!(!is_occupied(&params, &field, 4, &occ));
    }

    #[test]
    fn pipeline_matches_pointwise() {
        let p = DispersalKernel::new(1, vec![(vec![-1], 0.25), (vec![0], 0.5), (vec![1], 0.25)])
            .unwrap();
        let lam = CompetitionKernel::from_raw(
            1,
            vec![(vec![0], 0.02), (vec![1], 0.004), (vec![-1], 0.002), (vec![2], 0.001)],
        )
        .unwrap();
        let params = ModelParams::new(1.7, p, lam, Geometry::torus(vec![11])).unwrap();
        let field = Field::from_fn(params.geometry.clone(), |c| 3.0 + (c[0] as f64).sin().abs() * 40.0);
        let mut pipe = MeanPipeline::new(&params);
        let mut means = vec![0.0; field.len()];
        pipe.dispersed_means(field.values(), &mut means);
        for site in 0..field.len() {
            assert!((means[site] - params.dispersed_mean(&field, site)).abs() < 1e-11);
        }
    }
}
