//! Special functions and quadrature helpers used by the phonon module:
//! the gamma function, the Riemann zeta function and an adaptive Simpson
//! integrator.

use crate::{cst, Error, Real, Result};

/// Lanczos coefficients (g = 7, 9 terms), accurate to about 15 digits for
/// positive arguments.
const LANCZOS_G: f64 = 7.0;
const LANCZOS_COEFFS: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

/// Gamma function for positive real arguments via the Lanczos
/// approximation.
pub fn gamma_fn<T: Real>(x: T) -> Result<T> {
    if !(x > T::zero()) || !x.is_finite() {
        return Err(Error::domain(
            "gamma argument",
            format!("must be positive and finite, got {x}"),
        ));
    }
    let z = x - T::one();
    let mut acc = cst::<T>(LANCZOS_COEFFS[0]);
    for (i, &c) in LANCZOS_COEFFS.iter().enumerate().skip(1) {
        acc += cst::<T>(c) / (z + cst::<T>(i as f64));
    }
    let t = z + cst::<T>(LANCZOS_G) + cst::<T>(0.5);
    let sqrt_two_pi = T::two_pi().sqrt();
    Ok(sqrt_two_pi * t.powf(z + cst::<T>(0.5)) * (-t).exp() * acc)
}

/// Riemann zeta function for arguments greater than 1, via Euler-Maclaurin
/// summation with three Bernoulli correction terms.
pub fn zeta<T: Real>(s: T) -> Result<T> {
    if !(s > T::one()) || !s.is_finite() {
        return Err(Error::domain(
            "zeta argument",
            format!("must exceed 1, got {s}"),
        ));
    }
    let n = cst::<T>(24.0);
    let mut sum = T::zero();
    for k in 1..24 {
        sum += cst::<T>(f64::from(k)).powf(-s);
    }
    sum += n.powf(T::one() - s) / (s - T::one());
    sum += n.powf(-s) / cst::<T>(2.0);
    // Correction terms B_{2j} / (2j)! * s (s+1) ... (s+2j-2) * n^{-(s+2j-1)}.
    let bern = [1.0 / 12.0, -1.0 / 720.0, 1.0 / 30_240.0];
    let mut rising = s;
    let mut power = n.powf(-s - T::one());
    for (j, &b) in bern.iter().enumerate() {
        sum += cst::<T>(b) * rising * power;
        if j + 1 < bern.len() {
            let base = s + cst::<T>((2 * j + 1) as f64);
            rising *= base * (base + T::one());
            power /= n * n;
        }
    }
    Ok(sum)
}

/// Adaptive Simpson integration of `f` over `[a, b]` to the given absolute
/// tolerance.
pub fn adaptive_simpson<T: Real>(f: &dyn Fn(T) -> T, a: T, b: T, abs_tol: T) -> Result<T> {
    if !(b > a) {
        return Err(Error::domain(
            "integration interval",
            format!("upper bound {b} must exceed lower bound {a}"),
        ));
    }
    let m = (a + b) / cst::<T>(2.0);
    let fa = f(a);
    let fm = f(m);
    let fb = f(b);
    let whole = simpson_rule(a, b, fa, fm, fb);
    let result = simpson_recurse(f, a, fa, m, fm, b, fb, whole, abs_tol, 60)?;
    if result.is_finite() {
        Ok(result)
    } else {
        Err(Error::Numerical(
            "quadrature produced a non-finite value".into(),
        ))
    }
}

fn simpson_rule<T: Real>(a: T, b: T, fa: T, fm: T, fb: T) -> T {
    (b - a) / cst::<T>(6.0) * (fa + cst::<T>(4.0) * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn simpson_recurse<T: Real>(
    f: &dyn Fn(T) -> T,
    a: T,
    fa: T,
    m: T,
    fm: T,
    b: T,
    fb: T,
    whole: T,
    tol: T,
    depth: u32,
) -> Result<T> {
    let two = cst::<T>(2.0);
    let lm = (a + m) / two;
    let rm = (m + b) / two;
    let flm = f(lm);
    let frm = f(rm);
    let left = simpson_rule(a, m, fa, flm, fm);
    let right = simpson_rule(m, b, fm, frm, fb);
    let delta = left + right - whole;
    if delta.abs() <= cst::<T>(15.0) * tol {
        return Ok(left + right + delta / cst::<T>(15.0));
    }
    if depth == 0 {
        return Err(Error::Numerical(
            "adaptive quadrature failed to converge".into(),
        ));
    }
    let half_tol = tol / two;
    let l = simpson_recurse(f, a, fa, lm, flm, m, fm, left, half_tol, depth - 1)?;
    let r = simpson_recurse(f, m, fm, rm, frm, b, fb, right, half_tol, depth - 1)?;
    Ok(l + r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    #[test]
    fn gamma_matches_reference_values() {
        // Half-integer and integer references from extended-precision
        // arithmetic.
        assert_relative_eq!(
            gamma_fn(4.5_f64).unwrap(),
            11.6317283965674489,
            max_relative = 1e-13
        );
        assert_relative_eq!(gamma_fn(5.0_f64).unwrap(), 24.0, max_relative = 1e-13);
        assert_relative_eq!(gamma_fn(1.0_f64).unwrap(), 1.0, max_relative = 1e-13);
        assert_relative_eq!(gamma_fn(0.5_f64).unwrap(), PI.sqrt(), max_relative = 1e-13);
        assert_relative_eq!(
            gamma_fn(2.5_f64).unwrap(),
            1.5 * 0.5 * PI.sqrt(),
            max_relative = 1e-13
        );
    }

    #[test]
    fn gamma_satisfies_recurrence() {
        for &x in &[0.7_f64, 1.3, 2.9, 4.2, 6.8] {
            let lhs = gamma_fn(x + 1.0).unwrap();
            let rhs = x * gamma_fn(x).unwrap();
            assert_relative_eq!(lhs, rhs, max_relative = 1e-12);
        }
    }

    #[test]
    fn gamma_rejects_bad_arguments() {
        assert!(gamma_fn(0.0_f64).is_err());
        assert!(gamma_fn(-1.5_f64).is_err());
        assert!(gamma_fn(f64::NAN).is_err());
    }

    #[test]
    fn zeta_matches_reference_values() {
        assert_relative_eq!(zeta(2.0_f64).unwrap(), PI * PI / 6.0, max_relative = 1e-13);
        assert_relative_eq!(
            zeta(4.0_f64).unwrap(),
            PI.powi(4) / 90.0,
            max_relative = 1e-13
        );
        assert_relative_eq!(
            zeta(3.0_f64).unwrap(),
            1.20205690315959429,
            max_relative = 1e-13
        );
        assert_relative_eq!(
            zeta(3.5_f64).unwrap(),
            1.12673386731705665,
            max_relative = 1e-13
        );
    }

    #[test]
    fn zeta_rejects_bad_arguments() {
        assert!(zeta(1.0_f64).is_err());
        assert!(zeta(0.5_f64).is_err());
    }

    #[test]
    fn simpson_integrates_known_functions() {
        let result = adaptive_simpson(&|x: f64| x.sin(), 0.0, PI, 1e-12).unwrap();
        assert_relative_eq!(result, 2.0, max_relative = 1e-10);
        let result = adaptive_simpson(&|x: f64| (-x).exp(), 0.0, 30.0, 1e-12).unwrap();
        assert_relative_eq!(result, 1.0 - (-30.0_f64).exp(), max_relative = 1e-10);
        let result = adaptive_simpson(&|x: f64| x * x * x, -1.0, 2.0, 1e-13).unwrap();
        assert_relative_eq!(result, 15.0 / 4.0, max_relative = 1e-10);
    }

    #[test]
    fn simpson_rejects_empty_interval() {
        assert!(adaptive_simpson(&|x: f64| x, 1.0, 1.0, 1e-10).is_err());
        assert!(adaptive_simpson(&|x: f64| x, 2.0, 1.0, 1e-10).is_err());
    }
}
