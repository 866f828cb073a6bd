//! Per-site mass configurations.

use crate::error::{CoreError, CoreResult};
use crate::geometry::Geometry;
use crate::scalar::{Mass, Real};
use crate::Count;

/// A configuration: one nonnegative value per site of a finite window.
/// `T` is an integer count for stochastic runs, a [`Real`] for
/// deterministic ones.
#[derive(Debug, Clone, PartialEq)]
pub struct Field<T> {
    geometry: Geometry,
    values: Vec<T>,
}

impl<T: Clone + Default> Field<T> {
    pub fn zero(geometry: Geometry) -> Self {
        let values = vec![T::default(); geometry.len()];
        Field { geometry, values }
    }

    pub fn constant(geometry: Geometry, value: T) -> Self {
        let values = vec![value; geometry.len()];
        Field { geometry, values }
    }

    pub fn from_values(geometry: Geometry, values: Vec<T>) -> CoreResult<Self> {
        if values.len() != geometry.len() {
            return Err(CoreError::Invalid(format!(
                "field has {} values, geometry needs {}",
                values.len(),
                geometry.len()
            )));
        }
        Ok(Field { geometry, values })
    }

    pub fn from_fn(geometry: Geometry, mut f: impl FnMut(&[i64]) -> T) -> Self {
        let values = (0..geometry.len()).map(|i| f(&geometry.coords_of(i))).collect();
        Field { geometry, values }
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geometry
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    pub fn get(&self, index: usize) -> &T {
        &self.values[index]
    }

    pub fn set(&mut self, index: usize, value: T) {
        self.values[index] = value;
    }

    /// Value at arbitrary integer coordinates; zero outside an absorbing window.
    pub fn at_coords(&self, coords: &[i64]) -> T {
        match self.geometry.resolve(coords) {
            Some(idx) => self.values[idx].clone(),
            None => T::default(),
        }
    }

    /// Field translated by `shift` (periodic windows only): the new value at
    /// coordinates `x` is the old value at `x - shift`.
    pub fn shifted(&self, shift: &[i64]) -> Self {
        let mut out = self.clone();
        for idx in 0..self.values.len() {
            let mut coords = self.geometry.coords_of(idx);
            for (c, s) in coords.iter_mut().zip(shift) {
                *c -= *s;
            }
            let src = self.geometry.resolve(&coords).expect("shift requires periodic geometry");
            out.values[idx] = self.values[src].clone();
        }
        out
    }
}

impl<T: Mass> Field<T> {
    /// Total mass viewed in the scalar `R`. Exact for counts below 2^53.
    pub fn total_mass<R: Real>(&self) -> R {
        self.values.iter().fold(R::zero(), |a, v| a + v.to_real())
    }

    pub fn is_extinct(&self) -> bool {
        self.values.iter().all(|v| v.to_real::<f64>() == 0.0)
    }

    /// Real-valued copy of the values for mean computations.
    pub fn to_real<R: Real>(&self, out: &mut Vec<R>) {
        out.clear();
        out.extend(self.values.iter().map(|v| v.to_real::<R>()));
    }
}

impl Field<Count> {
    pub fn total_count(&self) -> u128 {
        self.values.iter().map(|&v| v as u128).sum()
    }
}
