//! Trace conditions `tr(A^μ (∂f/∂R) Λ) = 0` for constant wave vectors.

use num_complex::Complex64;

use super::Field;
use crate::algebra::ComplexMatrix;
use crate::systems::SystemSpec;
use crate::verify::{coordinate_axes, numeric_jacobian, right_inverse, Jacobian, Scheme, DEFAULT_STEP};
use crate::{Error, Result};

/// Evaluates the `m` traces at one point.
///
/// `lambda` stacks the wave vectors and their conjugates as rows. The derivatives
/// with respect to the invariants are recovered from the spatial Jacobian `J` as
/// `U = J Λ⁺` with `Λ⁺` a right inverse of `Λ`.
pub fn trace_condition_residual(
    sys: &SystemSpec,
    field: &dyn Field,
    lambda: &ComplexMatrix,
    point: [f64; 3],
) -> Result<Vec<Complex64>> {
    if lambda.cols() != sys.p {
        return Err(Error::Shape(format!("Lambda has {} columns, system has {} coordinates", lambda.cols(), sys.p)));
    }
    if field.components() != sys.q {
        return Err(Error::Shape(format!("field has {} components, system has {} unknowns", field.components(), sys.q)));
    }
    let axes = coordinate_axes(sys)?;
    let jac = match numeric_jacobian(field, point, &axes, Scheme::Central4, DEFAULT_STEP) {
        Jacobian::Value { jacobian, .. } => jacobian,
        Jacobian::Masked(reason) => {
            return Err(Error::Eval(format!("cannot difference the field at {point:?}: {reason}")));
        }
    };
    let j = ComplexMatrix::new(
        sys.q,
        sys.p,
        jac.iter().flatten().map(|&v| Complex64::new(v, 0.0)).collect(),
    )?;
    let u_r = j.mul(&right_inverse(lambda)?)?;
    let projected = u_r.mul(lambda)?;
    let values = field.eval(point)?;
    let u: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    let coords: Vec<f64> = axes.iter().map(|&a| point[a]).collect();
    let (a, _) = sys.eval_at(&u, &coords)?;
    Ok((0..sys.m)
        .map(|mu| {
            let mut tr = Complex64::new(0.0, 0.0);
            for (i, ai) in a.iter().enumerate() {
                for alpha in 0..sys.q {
                    tr += ai[(mu, alpha)] * projected[(alpha, i)];
                }
            }
            tr
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solutions::{CorruptedField, FnField};
    use crate::systems::builtin_system;

    fn lambda() -> ComplexMatrix {
        let i = Complex64::new(0.0, 1.0);
        let one = Complex64::new(1.0, 0.0);
        ComplexMatrix::from_rows(&[vec![one, i], vec![one, -i]]).unwrap()
    }

    #[test]
    fn test_constant_solution_has_zero_trace() {
        let sys = builtin_system("plasticity-subsystem").unwrap();
        let f = FnField::new(4, |_| Ok(vec![0.3, -0.2, 1.0, 2.0]));
        let tr = trace_condition_residual(&sys, &f, &lambda(), [0.0, 0.4, 0.1]).unwrap();
        assert!(tr.iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn test_corrupted_field_has_nonzero_trace() {
        let sys = builtin_system("plasticity-subsystem").unwrap();
        let f = FnField::new(4, |p| Ok(vec![0.0, 0.0, 4.0 * p[1], -4.0 * p[2]]));
        let tr = trace_condition_residual(&sys, &f, &lambda(), [0.0, 0.5, 0.2]).unwrap();
        assert!(tr.iter().all(|z| z.norm() < 1e-9));
        let bad = CorruptedField { inner: f, component: 2 };
        let tr = trace_condition_residual(&sys, &bad, &lambda(), [0.0, 0.5, 0.2]).unwrap();
        assert!(tr.iter().map(|z| z.norm()).fold(0.0, f64::max) > 0.5);
    }
}
