//! Closed-form solution families and the tools that evaluate them.
//!
//! Every evaluator implements [`Field`]: a map from `(t, x, y)` to a real vector
//! of unknowns, ordered as the unknowns of the system it is checked against.

mod params;
mod plasticity;
mod simple_wave;
mod trace;
mod wave;

use std::sync::Arc;

use crate::Result;

pub use params::{random_damped_params, Coeff, Family, PlasticityParams};
pub use plasticity::{
    adaptive_simpson, admissible_on_default_grid, case_i_sigma_closed_form, h_eval, omega_value, plasticity_fields,
    plasticity_fields_from_h, sigma_quadrature, FieldSample, HValue, Layout, Plasticity, PlasticityField,
    Source,
};
pub use simple_wave::{simple_wave_integrate, SampledPath, Stepping};
pub use trace::trace_condition_residual;
pub use wave::{wave_particle_fields, HolomorphicFn, WaveParticleField, WaveSample};

/// A real vector field sampled at `(t, x, y)`.
pub trait Field: Send + Sync {
    fn components(&self) -> usize;

    fn eval(&self, point: [f64; 3]) -> Result<Vec<f64>>;

    /// Points excluded from verification by predicate, e.g. near a singular locus.
    fn masked(&self, _point: [f64; 3]) -> bool {
        false
    }

    /// Period of an angle-valued component. Difference stencils unwrap such
    /// components, so a branch jump inside a stencil does not show up as a slope.
    fn period(&self, _component: usize) -> Option<f64> {
        None
    }
}

impl<F: Field + ?Sized> Field for Arc<F> {
    fn components(&self) -> usize {
        (**self).components()
    }

    fn eval(&self, point: [f64; 3]) -> Result<Vec<f64>> {
        (**self).eval(point)
    }

    fn masked(&self, point: [f64; 3]) -> bool {
        (**self).masked(point)
    }

    fn period(&self, component: usize) -> Option<f64> {
        (**self).period(component)
    }
}

impl<F: Field + ?Sized> Field for &F {
    fn components(&self) -> usize {
        (**self).components()
    }

    fn eval(&self, point: [f64; 3]) -> Result<Vec<f64>> {
        (**self).eval(point)
    }

    fn masked(&self, point: [f64; 3]) -> bool {
        (**self).masked(point)
    }

    fn period(&self, component: usize) -> Option<f64> {
        (**self).period(component)
    }
}

/// A field given by a closure.
pub struct FnField<F> {
    components: usize,
    f: F,
}

impl<F> FnField<F>
where
    F: Fn([f64; 3]) -> Result<Vec<f64>> + Send + Sync,
{
    pub fn new(components: usize, f: F) -> Self {
        Self { components, f }
    }
}

impl<F> Field for FnField<F>
where
    F: Fn([f64; 3]) -> Result<Vec<f64>> + Send + Sync,
{
    fn components(&self) -> usize {
        self.components
    }

    fn eval(&self, point: [f64; 3]) -> Result<Vec<f64>> {
        (self.f)(point)
    }
}

/// Negative control: adds `x²` to one component of an otherwise valid field.
pub struct CorruptedField<F> {
    pub inner: F,
    pub component: usize,
}

impl<F: Field> Field for CorruptedField<F> {
    fn components(&self) -> usize {
        self.inner.components()
    }

    fn eval(&self, point: [f64; 3]) -> Result<Vec<f64>> {
        let mut v = self.inner.eval(point)?;
        if let Some(c) = v.get_mut(self.component) {
            *c += point[1] * point[1];
        }
        Ok(v)
    }

    fn masked(&self, point: [f64; 3]) -> bool {
        self.inner.masked(point)
    }

    fn period(&self, component: usize) -> Option<f64> {
        self.inner.period(component)
    }
}
