//! Complex error functions: `erf`, `erfi = -i erf(iz)` and a Newton inverse of `erf`.
//!
//! `erf` sums the Maclaurin series where cancellation is mild and switches to the
//! continued fraction for `erfc` in the right half-plane away from the imaginary
//! axis. Arguments with `|z| > 12` are outside the accuracy envelope.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::{Error, Result};

/// Largest modulus accepted by [`erf_c`] and [`erfi_c`].
pub const ENVELOPE: f64 = 12.0;

const FRAC_2_SQRT_PI: f64 = std::f64::consts::FRAC_2_SQRT_PI;
const MAX_NEWTON: usize = 64;

fn check_arg(z: Complex64) -> Result<()> {
    if !z.is_finite() {
        return Err(Error::Input(format!("non-finite argument {z}")));
    }
    if z.norm() > ENVELOPE {
        return Err(Error::Domain(format!("|z| = {} exceeds {ENVELOPE}", z.norm())));
    }
    Ok(())
}

/// Complex error function.
pub fn erf_c(z: Complex64) -> Result<Complex64> {
    check_arg(z)?;
    Ok(erf_unchecked(z))
}

/// Imaginary error function, `erfi(z) = -i·erf(i z)`.
pub fn erfi_c(z: Complex64) -> Result<Complex64> {
    let iz = Complex64::new(-z.im, z.re);
    let e = erf_c(iz)?;
    Ok(Complex64::new(e.im, -e.re))
}

fn erf_unchecked(z: Complex64) -> Complex64 {
    if z.re < 0.0 {
        return -erf_unchecked(-z);
    }
    // Series cancellation grows like exp(Re(z)²); below this bound it stays near 1e-14.
    if z.norm() <= 3.0 || z.re * z.re <= 2.5 {
        erf_series(z)
    } else {
        Complex64::new(1.0, 0.0) - erfc_continued_fraction(z)
    }
}

fn erf_series(z: Complex64) -> Complex64 {
    let z2 = z * z;
    let mut term = z; // (-1)^n z^(2n+1) / n!
    let mut sum = z;
    for n in 1..2000 {
        term *= -z2 / n as f64;
        let contrib = term / (2 * n + 1) as f64;
        sum += contrib;
        if contrib.norm() <= 1e-17 * sum.norm() {
            break;
        }
    }
    sum * FRAC_2_SQRT_PI
}

/// erfc(z) = e^{-z²}/√π · 1/(z + ½/(z + 1/(z + 3/2/(z + …)))) by modified Lentz.
fn erfc_continued_fraction(z: Complex64) -> Complex64 {
    let tiny = Complex64::new(1e-300, 0.0);
    let mut f = z;
    let mut c = z;
    let mut d = Complex64::new(0.0, 0.0);
    for k in 1..5000 {
        let a = k as f64 / 2.0;
        d = z + a * d;
        if d.norm() == 0.0 {
            d = tiny;
        }
        c = z + a / c;
        if c.norm() == 0.0 {
            c = tiny;
        }
        d = d.inv();
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).norm() < 1e-16 {
            break;
        }
    }
    (-z * z).exp() / (PI.sqrt() * f)
}

fn erf_derivative(z: Complex64) -> Complex64 {
    FRAC_2_SQRT_PI * (-z * z).exp()
}

/// Series initializer √π/2·(w + π/12 w³ + 7π²/480 w⁵ + 127π³/40320 w⁷).
fn series_guess(w: Complex64) -> Complex64 {
    let w2 = w * w;
    let s = w * (1.0 + w2 * (PI / 12.0 + w2 * (7.0 * PI * PI / 480.0 + w2 * 127.0 * PI.powi(3) / 40320.0)));
    s * PI.sqrt() / 2.0
}

fn newton(w: Complex64, start: Complex64) -> Result<Complex64> {
    let mut z = start;
    for _ in 0..MAX_NEWTON {
        if z.norm() > ENVELOPE {
            return Err(Error::Convergence { iterations: MAX_NEWTON, last: z });
        }
        let step = (erf_unchecked(z) - w) / erf_derivative(z);
        z -= step;
        if !z.is_finite() {
            break;
        }
        if step.norm() <= 1e-15 * z.norm().max(1e-300) {
            return Ok(z);
        }
    }
    Err(Error::Convergence { iterations: MAX_NEWTON, last: z })
}

fn continue_from_origin(w: Complex64) -> Result<Complex64> {
    let steps = (w.norm() * 16.0).ceil().max(16.0) as usize;
    let mut z = Complex64::new(0.0, 0.0);
    for k in 1..=steps {
        z = newton(w * (k as f64 / steps as f64), z)?;
    }
    Ok(z)
}

/// Principal inverse of `erf`: the root connected to `z = 0` at `w = 0`.
///
/// Without a guess, `|w| < 0.9` starts Newton from the series initializer; larger
/// `|w|`, or a Newton run that drifts away from the initializer, continues the
/// root along the segment from 0 to `w`, which is how the principal branch is
/// pinned down. The result satisfies
/// `|erf(z) − w| ≤ 1e-11·max(1, |w|)`.
pub fn inverse_erf_c(w: Complex64, guess: Option<Complex64>) -> Result<Complex64> {
    if !w.is_finite() {
        return Err(Error::Input(format!("non-finite argument {w}")));
    }
    if w.im == 0.0 && w.re.abs() >= 1.0 {
        return Err(Error::Domain(format!("erf⁻¹ undefined on the real ray through {w}")));
    }
    let z = match guess {
        Some(g) => newton(w, g)?,
        None => {
            let direct = if w.norm() < 0.9 { newton(w, series_guess(w)).ok() } else { None };
            // Newton from the series guess can land on another root; keep it only
            // if it is the root nearest the guess's basin, else continue from 0.
            match direct {
                Some(z) if (z - series_guess(w)).norm() < 0.5 => z,
                _ => continue_from_origin(w)?,
            }
        }
    };
    let miss = (erf_unchecked(z) - w).norm();
    if miss > 1e-11 * w.norm().max(1.0) {
        return Err(Error::Convergence { iterations: MAX_NEWTON, last: z });
    }
    Ok(z)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn assert_rel(got: Complex64, want: Complex64, tol: f64) {
        let err = (got - want).norm() / want.norm().max(1e-300);
        assert!(err <= tol, "got {got}, want {want}, rel err {err:e}");
    }

    #[test]
    fn test_erf_reference_values() {
        // Computed with mpmath at 40 digits.
        let table = [
            (c(1.0, 0.0), c(0.84270079294971486934, 0.0)),
            (c(0.3, 0.7), c(0.52116100486014968686, 0.83091097636835162277)),
            (c(2.5, -1.2), c(0.99842079571060602308, -0.00019405961549512917788)),
            (c(-1.7, 0.4), c(-0.99953800103299605351, 0.018737115541508883287)),
            (c(3.5, 1.0), c(0.99999890719126689688, 1.6217213345228874061e-6)),
            (c(4.2, -2.5), c(1.0000011506132273968, -5.8696600135534962027e-7)),
            (c(0.5, 5.0), c(-6318073744.0867658113, 1173041985.7103307861)),
            (c(1.4, 6.0), c(-42530058019900.798632, -36867205413883.873615)),
            (c(7.0, 3.0), c(1.0, -3.1283358803360064234e-19)),
            (c(-9.0, 2.0), c(-1.0, -2.1982097597467948865e-35)),
            (c(0.2, 9.5), c(-5.3478324117996937161e37, -7.2260795953825631129e37)),
            (c(11.0, -4.0), c(1.0, 1.7311639278875251315e-45)),
            (c(2.0, 2.0), c(1.151310866398069024, 0.12729162946314079101)),
            (c(3.0, -0.1), c(0.99998198339146270305, -0.000013146330996617972419)),
            (c(1.6, 2.9), c(39.530619849304115619, -46.503584174305648123)),
            (c(2.2, 2.3), c(1.032183274583417533, -0.27512746281735779081)),
        ];
        for (z, want) in table {
            assert_rel(erf_c(z).unwrap(), want, 1e-12);
        }
    }

    #[test]
    fn test_erf_zero_and_reflection() {
        assert_eq!(erf_c(c(0.0, 0.0)).unwrap(), c(0.0, 0.0));
        let z = c(0.3, 0.7);
        assert_rel(erf_c(z.conj()).unwrap(), erf_c(z).unwrap().conj(), 1e-15);
    }

    #[test]
    fn test_erf_outside_envelope() {
        assert!(matches!(erf_c(c(12.5, 0.0)), Err(Error::Domain(_))));
    }

    #[test]
    fn test_erfi_reference_values() {
        assert_eq!(erfi_c(c(0.0, 0.0)).unwrap(), c(0.0, 0.0));
        assert_rel(erfi_c(c(1.0, 0.0)).unwrap(), c(1.650425758797542876, 0.0), 1e-14);
        assert_rel(erfi_c(c(0.3, 0.7)).unwrap(), c(0.20739557153081302311, 0.72269550016403486767), 1e-13);
        assert_rel(erfi_c(c(1.5, -0.4)).unwrap(), c(2.4748897450899580219, -3.1938211136471516761), 1e-13);
        assert_rel(erfi_c(c(0.0, 1.0)).unwrap(), c(0.0, 0.84270079294971486934), 1e-14);
    }

    #[test]
    fn test_inverse_erf_examples() {
        assert_eq!(inverse_erf_c(c(0.0, 0.0), None).unwrap(), c(0.0, 0.0));
        let z = inverse_erf_c(c(0.8427007929497149, 0.0), None).unwrap();
        assert!((z - 1.0).norm() <= 1e-10);
        let target = c(0.5, 0.2);
        let z = inverse_erf_c(erf_c(target).unwrap(), None).unwrap();
        assert!((z - target).norm() <= 1e-12);
    }

    #[test]
    fn test_inverse_erf_rejects_real_branch_points() {
        assert!(inverse_erf_c(c(1.0, 0.0), None).is_err());
        assert!(inverse_erf_c(c(-1.5, 0.0), None).is_err());
    }

    #[test]
    fn test_inverse_erf_reports_nonconvergence() {
        // A guess far outside the envelope cannot converge.
        let err = inverse_erf_c(c(0.5, 0.0), Some(c(11.9, 11.9))).unwrap_err();
        assert!(matches!(err, Error::Convergence { .. }));
    }

    #[test]
    fn test_roundtrip_random_disk() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let r = 1.5 * rng.random::<f64>().sqrt();
            let a = rng.random::<f64>() * std::f64::consts::TAU;
            let z = Complex64::from_polar(r, a);
            let back = inverse_erf_c(erf_c(z).unwrap(), None).unwrap();
            assert!((back - z).norm() <= 1e-9, "z = {z}, back = {back}");
        }
    }

    #[test]
    fn test_oddness_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..500 {
            let z = c(rng.random_range(-6.0..6.0), rng.random_range(-6.0..6.0));
            let (p, m) = (erf_c(z).unwrap(), erf_c(-z).unwrap());
            assert!((p.re + m.re).abs() <= 1e-13 * p.re.abs().max(1.0));
            assert!((p.im + m.im).abs() <= 1e-13 * p.im.abs().max(1.0));
        }
    }

    #[test]
    fn test_derivative_matches_gaussian() {
        let h = 1e-5;
        for z in [c(0.2, 0.1), c(1.0, -0.5), c(-0.7, 1.2), c(2.5, 0.3)] {
            let fd = (erf_c(z + h).unwrap() - erf_c(z - h).unwrap()) / (2.0 * h);
            assert!((fd - erf_derivative(z)).norm() <= 1e-6);
        }
    }
}
