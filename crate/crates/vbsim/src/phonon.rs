//! Two-phonon (Raman) dephasing of the defect spin and its combination
//! with the nuclear-bath coherence envelope.
//!
//! The dephasing rate follows from a quadratic spin-phonon coupling
//! integrated over a Debye spectrum. With `x = hbar omega / (k_B T)` the
//! occupation-weighted integral is
//!
//! ```text
//! J(y) = integral_0^y x^(4 upsilon + 2) e^x / (e^x - 1)^2 dx,
//! y = hbar omega_D / (k_B T),
//! ```
//!
//! and the rate is `gamma = P (k_B T / hbar)^(4 upsilon + 3)
//! J(y) / omega_D^(4 upsilon)` with the prefactor
//! `P = 16 pi^3 A^2 lambda00^2 / v_s^4`. Two closed forms bound the
//! temperature regimes:
//!
//! * low temperature (`y -> infinity`): `J` tends to
//!   `Gamma(4 upsilon + 3) zeta(4 upsilon + 2)`; the zeta factor is the
//!   exact limit of the full Bose weight `e^x (e^x - 1)^-2
//!   = sum_k k e^(-k x)`, summed over all `k`;
//! * high temperature (`y -> 0`): the integrand tends to `x^(4 upsilon)`,
//!   so `gamma = P omega_D (k_B T / hbar)^2 / (4 upsilon + 1)`.
//!
//! Only the quadratic coupling `lambda00` produces dephasing here; the
//! linear coupling `lambda0` is carried in the parameter set for
//! completeness but never enters the rates.

use nalgebra::Complex;

use crate::linalg::CMatrix;
use crate::special::{adaptive_simpson, gamma_fn, zeta};
use crate::{consts, cst, Error, Real, Result};

/// Shape parameters of the canonical stretched-exponential fit of the
/// nuclear-bath echo envelope, `exp(-(c t / T2')^n)` with
/// `c = 0.92, n = 6`.
pub const ENVELOPE_RATE_FACTOR: f64 = 0.92;
/// See [`ENVELOPE_RATE_FACTOR`].
pub const ENVELOPE_EXPONENT: f64 = 6.0;

/// Parameters of the phonon dephasing channel.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhononParams<T> {
    /// Lattice temperature (K).
    pub temperature: T,
    /// Debye cutoff frequency (rad/s).
    pub debye_frequency: T,
    /// Effective sound speed (m/s).
    pub sound_speed: T,
    /// Spectral-density exponent parameter.
    pub upsilon: T,
    /// Quadratic (two-phonon) spin-phonon coupling (rad/s).
    pub lambda00: T,
    /// Linear spin-phonon coupling (rad/s); does not produce dephasing and
    /// never enters the rates.
    pub lambda0: T,
    /// Geometric prefactor of the coupling (m).
    pub cell_factor: T,
}

impl<T: Real> PhononParams<T> {
    /// Default parameter set at the given temperature and quadratic
    /// coupling.
    pub fn new(temperature: T, lambda00: T) -> Self {
        PhononParams {
            temperature,
            debye_frequency: cst(consts::DEBYE_FREQUENCY),
            sound_speed: cst(consts::SOUND_SPEED),
            upsilon: cst(consts::UPSILON),
            lambda00,
            lambda0: T::zero(),
            cell_factor: cst(consts::CELL_FACTOR),
        }
    }

    /// Default parameter set at room temperature.
    pub fn room_temperature(lambda00: T) -> Self {
        Self::new(cst(consts::ROOM_TEMPERATURE), lambda00)
    }

    /// Checks that every parameter is inside its domain.
    pub fn validate(&self) -> Result<()> {
        let positive: [(&'static str, T); 4] = [
            ("temperature", self.temperature),
            ("debye_frequency", self.debye_frequency),
            ("sound_speed", self.sound_speed),
            ("cell_factor", self.cell_factor),
        ];
        for (name, value) in positive {
            if !(value > T::zero()) || !value.is_finite() {
                return Err(Error::domain(
                    name,
                    format!("must be positive and finite, got {value}"),
                ));
            }
        }
        if !(self.upsilon > T::zero()) || self.upsilon > cst(5.0) {
            return Err(Error::domain(
                "upsilon",
                format!("must lie in (0, 5], got {}", self.upsilon),
            ));
        }
        for (name, value) in [("lambda00", self.lambda00), ("lambda0", self.lambda0)] {
            if !(value >= T::zero()) || !value.is_finite() {
                return Err(Error::domain(
                    name,
                    format!("must be non-negative and finite, got {value}"),
                ));
            }
        }
        Ok(())
    }

    /// Thermal frequency `k_B T / hbar` (1/s).
    pub fn thermal_frequency(&self) -> T {
        cst::<T>(consts::K_B / consts::HBAR) * self.temperature
    }

    /// Dimensionless Debye cutoff `hbar omega_D / (k_B T)`.
    pub fn beta_omega_d(&self) -> T {
        self.debye_frequency / self.thermal_frequency()
    }

    /// Coupling prefactor `16 pi^3 A^2 lambda00^2 / v_s^4`.
    fn prefactor(&self) -> T {
        let pi = T::pi();
        let a2 = self.cell_factor * self.cell_factor;
        let l2 = self.lambda00 * self.lambda00;
        let v4 = self.sound_speed.powi(4);
        cst::<T>(16.0) * pi * pi * pi * a2 * l2 / v4
    }
}

/// Occupation-weighted spectral integral `J` up to the dimensionless cutoff
/// `beta_omega_d`, accurate to better than `1e-8` relative.
///
/// The integrand `x^(4 upsilon + 2) e^x / (e^x - 1)^2` is handled by a
/// power series below `x = 1/2` (the `1/(e^x - 1)^2` singularity cancels
/// analytically) and adaptive quadrature above it; the tail beyond `x = 60`
/// is dropped, which is far below the accuracy target.
pub fn spectral_integral<T: Real>(upsilon: T, beta_omega_d: T) -> Result<T> {
    if !(upsilon > T::zero()) || upsilon > cst(5.0) {
        return Err(Error::domain(
            "upsilon",
            format!("must lie in (0, 5], got {upsilon}"),
        ));
    }
    if !(beta_omega_d > T::zero()) || !beta_omega_d.is_finite() {
        return Err(Error::domain(
            "beta_omega_d",
            format!("must be positive and finite, got {beta_omega_d}"),
        ));
    }
    let p = cst::<T>(4.0) * upsilon;
    let split = cst::<T>(0.5);
    let series_upper = if beta_omega_d < split {
        beta_omega_d
    } else {
        split
    };

    // x^(4u + 2) e^x / (e^x - 1)^2 = x^(4u) (1 - x^2/12 + x^4/240
    // - x^6/6048 + x^8/172800 - ...), integrated term by term.
    let coeffs = [
        1.0,
        -1.0 / 12.0,
        1.0 / 240.0,
        -1.0 / 6048.0,
        1.0 / 172_800.0,
    ];
    let mut series = T::zero();
    for (k, &c) in coeffs.iter().enumerate() {
        let power = p + cst::<T>(2.0 * k as f64 + 1.0);
        series += cst::<T>(c) * series_upper.powf(power) / power;
    }
    if beta_omega_d <= split {
        return Ok(series);
    }

    let upper = if beta_omega_d < cst(60.0) {
        beta_omega_d
    } else {
        cst(60.0)
    };
    let exponent = p + cst::<T>(2.0);
    let integrand = move |x: T| {
        // e^x / (e^x - 1)^2 written with decaying exponentials for
        // stability at large x.
        let em = (-x).exp();
        let denom = T::one() - em;
        x.powf(exponent) * em / (denom * denom)
    };
    // The infinite-cutoff value bounds J, giving a sound absolute
    // tolerance for the requested relative accuracy.
    let bound = gamma_fn(exponent + T::one())? * zeta(exponent)?;
    let tail = adaptive_simpson(&integrand, split, upper, cst::<T>(1e-11) * bound)?;
    Ok(series + tail)
}

/// Dephasing rate (1/s) using the low-temperature closed form
/// `J -> Gamma(4 upsilon + 3) zeta(4 upsilon + 2)`.
pub fn decay_rate_low_t<T: Real>(params: &PhononParams<T>) -> Result<T> {
    params.validate()?;
    let p = cst::<T>(4.0) * params.upsilon;
    let j_limit = gamma_fn(p + cst(3.0))? * zeta(p + cst(2.0))?;
    let thermal = params.thermal_frequency();
    Ok(params.prefactor() * thermal.powf(p + cst(3.0)) * j_limit / params.debye_frequency.powf(p))
}

/// Dephasing rate (1/s) using the high-temperature closed form, valid when
/// `k_B T` far exceeds the Debye energy.
pub fn decay_rate_high_t<T: Real>(params: &PhononParams<T>) -> Result<T> {
    params.validate()?;
    let thermal = params.thermal_frequency();
    Ok(
        params.prefactor() * params.debye_frequency * thermal * thermal
            / (cst::<T>(4.0) * params.upsilon + T::one()),
    )
}

/// Dephasing rate (1/s) from full numerical quadrature of the spectral
/// integral; valid at every temperature.
pub fn decay_rate_quadrature<T: Real>(params: &PhononParams<T>) -> Result<T> {
    params.validate()?;
    let p = cst::<T>(4.0) * params.upsilon;
    let j = spectral_integral(params.upsilon, params.beta_omega_d())?;
    let thermal = params.thermal_frequency();
    Ok(params.prefactor() * thermal.powf(p + cst(3.0)) * j / params.debye_frequency.powf(p))
}

/// Combined coherence envelope `exp(-gamma t - (c t / T2')^n)` of phonon
/// dephasing at rate `gamma` on top of a spin-bath echo with coherence
/// time `t2_spin_bath`.
pub fn combined_envelope<T: Real>(gamma: T, t2_spin_bath: T, t: T) -> T {
    let c = cst::<T>(ENVELOPE_RATE_FACTOR);
    let n = cst::<T>(ENVELOPE_EXPONENT);
    (-gamma * t - (c * t / t2_spin_bath).powf(n)).exp()
}

/// Total coherence time: the time at which [`combined_envelope`] crosses
/// one half.
///
/// Solved by bisection on the monotone exponent
/// `gamma t + (c t / T2')^n = ln 2`; with `gamma = 0` the closed form
/// `(T2' / c) (ln 2)^(1/n)` is returned directly.
pub fn combined_t2<T: Real>(gamma: T, t2_spin_bath: T) -> Result<T> {
    if !(t2_spin_bath > T::zero()) || !t2_spin_bath.is_finite() {
        return Err(Error::domain(
            "t2_spin_bath",
            format!("must be positive and finite, got {t2_spin_bath}"),
        ));
    }
    if !(gamma >= T::zero()) || !gamma.is_finite() {
        return Err(Error::domain(
            "gamma",
            format!("must be non-negative and finite, got {gamma}"),
        ));
    }
    let ln2 = cst::<T>(2.0).ln();
    let c = cst::<T>(ENVELOPE_RATE_FACTOR);
    let n = cst::<T>(ENVELOPE_EXPONENT);
    let bath_only = t2_spin_bath / c * ln2.powf(T::one() / n);
    if gamma == T::zero() {
        return Ok(bath_only);
    }
    // Each term alone reaches ln 2 at its own root, so the combined root
    // lies below both.
    let phonon_only = ln2 / gamma;
    let mut hi = if bath_only < phonon_only {
        bath_only
    } else {
        phonon_only
    };
    let mut lo = T::zero();
    let target = |t: T| gamma * t + (c * t / t2_spin_bath).powf(n) - ln2;
    for _ in 0..200 {
        let mid = (lo + hi) / cst(2.0);
        if target(mid) > T::zero() {
            hi = mid;
        } else {
            lo = mid;
        }
        if (hi - lo) <= cst::<T>(1e-12) * hi {
            break;
        }
    }
    Ok((lo + hi) / cst(2.0))
}

/// One point of a coupling-strength sweep.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LambdaSweepPoint<T> {
    /// Quadratic coupling (rad/s).
    pub lambda00: T,
    /// Closed-form high-temperature dephasing rate at this coupling (1/s).
    pub gamma: T,
    /// Combined coherence time (s).
    pub t2: T,
}

/// Sweeps the quadratic coupling, computing the dephasing rate and the
/// combined coherence time at each value.
///
/// The sweep targets the room-temperature regime, so the closed-form
/// high-temperature rate is used; [`decay_rate_quadrature`] remains
/// available when the exact spectral integral is wanted instead.
pub fn t2_vs_lambda<T: Real>(
    base: &PhononParams<T>,
    lambdas: &[T],
    t2_spin_bath: T,
) -> Result<Vec<LambdaSweepPoint<T>>> {
    let mut out = Vec::with_capacity(lambdas.len());
    for &lambda00 in lambdas {
        let params = PhononParams { lambda00, ..*base };
        let gamma = if lambda00 == T::zero() {
            params.validate()?;
            T::zero()
        } else {
            decay_rate_high_t(&params)?
        };
        out.push(LambdaSweepPoint {
            lambda00,
            gamma,
            t2: combined_t2(gamma, t2_spin_bath)?,
        });
    }
    Ok(out)
}

/// Right-hand side of the pure-dephasing master equation
/// `d rho / dt = -gamma (Z rho + rho Z - 2 Z rho Z)` with `Z = Sz^2` on the
/// spin-1 defect.
///
/// Populations are untouched, coherences between `m = 0` and `m = +-1`
/// decay at `gamma`, and the `+1 <-> -1` coherence is untouched because
/// both levels carry the same `Sz^2` eigenvalue.
pub fn raman_dephasing_rhs<T: Real>(gamma: T, sz2: &CMatrix<T>, rho: &CMatrix<T>) -> CMatrix<T> {
    let two = Complex::new(cst::<T>(2.0), T::zero());
    let g = Complex::new(gamma, T::zero());
    (sz2 * rho + rho * sz2 - (sz2 * rho * sz2) * two) * (-g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spin::spin_matrices;
    use approx::assert_relative_eq;

    // Reference values from extended-precision arithmetic.
    const J_AT_50: f64 = 13.1058623198460679; // upsilon = 3/8
    const J_LIMIT: f64 = 13.1058623198460681; // Gamma(4.5) zeta(3.5)
    const J_AT_01: f64 = 1.26432565974186e-3; // upsilon = 3/8
    const BETA_OMEGA_D_300K: f64 = 6.76930223757088;
    const BATH_ONLY_FACTOR: f64 = 1.02254653834758201; // (ln 2)^(1/6) / 0.92

    #[test]
    fn spectral_integral_matches_references() {
        let j50 = spectral_integral(0.375_f64, 50.0).unwrap();
        assert_relative_eq!(j50, J_AT_50, max_relative = 1e-9);
        assert_relative_eq!(j50, J_LIMIT, max_relative = 1e-8);
        let j01 = spectral_integral(0.375_f64, 0.1).unwrap();
        assert_relative_eq!(j01, J_AT_01, max_relative = 1e-9);
    }

    #[test]
    fn spectral_integral_agrees_with_brute_force() {
        // Independent route: flat composite Simpson on a fine grid,
        // starting just above zero where the integrand is regular anyway.
        for &upsilon in &[0.25_f64, 0.375, 0.5] {
            for &cutoff in &[0.5_f64, 3.0, 10.0, 30.0] {
                let p = 4.0 * upsilon + 2.0;
                let f = |x: f64| {
                    let em = (-x).exp();
                    x.powf(p) * em / (1.0 - em).powi(2)
                };
                let n = 40_000;
                let a = 1e-7;
                let h = (cutoff - a) / n as f64;
                let mut acc = f(a) + f(cutoff);
                for k in 1..n {
                    let w = if k % 2 == 1 { 4.0 } else { 2.0 };
                    acc += w * f(a + h * k as f64);
                }
                let brute = acc * h / 3.0 + a.powf(p - 1.0) / (p - 1.0);
                let fast = spectral_integral(upsilon, cutoff).unwrap();
                assert_relative_eq!(fast, brute, max_relative = 1e-7);
            }
        }
    }

    #[test]
    fn quadrature_rate_approaches_low_t_form() {
        // beta omega_D = 50 puts the integral within a whisker of its
        // infinite-cutoff limit.
        let t = consts::HBAR * consts::DEBYE_FREQUENCY / (consts::K_B * 50.0);
        let params = PhononParams::new(t, 1.0e8_f64);
        let quad = decay_rate_quadrature(&params).unwrap();
        let low = decay_rate_low_t(&params).unwrap();
        assert_relative_eq!(quad, low, max_relative = 1e-8);
    }

    #[test]
    fn quadrature_rate_approaches_high_t_form() {
        let t = consts::HBAR * consts::DEBYE_FREQUENCY / (consts::K_B * 0.1);
        let params = PhononParams::new(t, 1.0e8_f64);
        let quad = decay_rate_quadrature(&params).unwrap();
        let high = decay_rate_high_t(&params).unwrap();
        // x^(4u) approximation of the integrand is good to O(x^2/12).
        assert_relative_eq!(quad, high, max_relative = 1e-3);
        assert!(quad < high);
    }

    #[test]
    fn room_temperature_cutoff_matches_reference() {
        let params = PhononParams::room_temperature(1.0_f64);
        assert_relative_eq!(
            params.beta_omega_d(),
            BETA_OMEGA_D_300K,
            max_relative = 1e-12
        );
    }

    #[test]
    fn rates_scale_as_expected() {
        let base = PhononParams::new(10.0_f64, 1.0e7);

        // Low-T rate scales as T^(4 upsilon + 3) = T^4.5.
        let hot = PhononParams {
            temperature: 20.0,
            ..base
        };
        let ratio = decay_rate_low_t(&hot).unwrap() / decay_rate_low_t(&base).unwrap();
        assert_relative_eq!(ratio, 2.0_f64.powf(4.5), max_relative = 1e-10);

        // High-T rate scales as T^2.
        let ratio = decay_rate_high_t(&hot).unwrap() / decay_rate_high_t(&base).unwrap();
        assert_relative_eq!(ratio, 4.0, max_relative = 1e-12);

        // Every rate scales as lambda00^2.
        let strong = PhononParams {
            lambda00: 3.0e7,
            ..base
        };
        for rate in [
            decay_rate_low_t as fn(&PhononParams<f64>) -> Result<f64>,
            decay_rate_high_t,
            decay_rate_quadrature,
        ] {
            let ratio = rate(&strong).unwrap() / rate(&base).unwrap();
            assert_relative_eq!(ratio, 9.0, max_relative = 1e-8);
        }
    }

    #[test]
    fn linear_coupling_never_enters_rates() {
        let quiet = PhononParams::new(77.0_f64, 5.0e6);
        let loud = PhononParams {
            lambda0: 1.0e12,
            ..quiet
        };
        assert_eq!(
            decay_rate_low_t(&quiet).unwrap(),
            decay_rate_low_t(&loud).unwrap()
        );
        assert_eq!(
            decay_rate_high_t(&quiet).unwrap(),
            decay_rate_high_t(&loud).unwrap()
        );
        assert_eq!(
            decay_rate_quadrature(&quiet).unwrap(),
            decay_rate_quadrature(&loud).unwrap()
        );
    }

    #[test]
    fn combined_t2_limits_and_root() {
        let t2_bath = 3.0e-5_f64;
        // Without phonons the closed form applies.
        let t2 = combined_t2(0.0, t2_bath).unwrap();
        assert_relative_eq!(t2, BATH_ONLY_FACTOR * t2_bath, max_relative = 1e-12);
        // With phonons the returned time solves the envelope equation.
        let gamma = 2.0e4;
        let t2 = combined_t2(gamma, t2_bath).unwrap();
        assert_relative_eq!(
            combined_envelope(gamma, t2_bath, t2),
            0.5,
            max_relative = 1e-8
        );
        // Stronger dephasing shortens the coherence monotonically.
        let faster = combined_t2(2.0 * gamma, t2_bath).unwrap();
        assert!(faster < t2);
        // Phonon-dominated limit.
        let t2 = combined_t2(1.0e9, t2_bath).unwrap();
        assert_relative_eq!(t2, 2.0_f64.ln() / 1.0e9, max_relative = 1e-6);
    }

    #[test]
    fn lambda_sweep_is_monotone() {
        let base = PhononParams::room_temperature(0.0_f64);
        let lambdas: Vec<f64> = (0..8).map(|k| 1.0e6 * k as f64).collect();
        let sweep = t2_vs_lambda(&base, &lambdas, 3.0e-5).unwrap();
        assert_eq!(sweep.len(), 8);
        assert_eq!(sweep[0].gamma, 0.0);
        for pair in sweep.windows(2) {
            assert!(pair[1].gamma >= pair[0].gamma);
            assert!(pair[1].t2 <= pair[0].t2);
        }
    }

    #[test]
    fn master_equation_damps_single_quantum_coherences() {
        // RK4 integration of the dephasing generator on the spin-1 defect.
        let ops = spin_matrices(1.0_f64).unwrap();
        let sz2 = &ops.iz * &ops.iz;
        let gamma = 1.0;
        let psi = nalgebra::DVector::from_element(3, Complex::new(1.0 / 3.0_f64.sqrt(), 0.0));
        let mut rho: CMatrix<f64> = &psi * psi.adjoint();
        let rho0 = rho.clone();
        let t_end = 2.0;
        let n_steps = 2000;
        let h = t_end / n_steps as f64;
        for _ in 0..n_steps {
            let k1 = raman_dephasing_rhs(gamma, &sz2, &rho);
            let k2 = raman_dephasing_rhs(gamma, &sz2, &(&rho + &k1 * Complex::new(h / 2.0, 0.0)));
            let k3 = raman_dephasing_rhs(gamma, &sz2, &(&rho + &k2 * Complex::new(h / 2.0, 0.0)));
            let k4 = raman_dephasing_rhs(gamma, &sz2, &(&rho + &k3 * Complex::new(h, 0.0)));
            rho += (k1 + k2 * Complex::new(2.0, 0.0) + k3 * Complex::new(2.0, 0.0) + k4)
                * Complex::new(h / 6.0, 0.0);
        }
        let decay = (-gamma * t_end).exp();
        for i in 0..3 {
            // Populations are conserved.
            assert_relative_eq!(rho[(i, i)].re, rho0[(i, i)].re, epsilon = 1e-8);
        }
        // m = 0 <-> m = +-1 coherences decay at gamma.
        assert_relative_eq!(rho[(0, 1)].re, rho0[(0, 1)].re * decay, epsilon = 1e-8);
        assert_relative_eq!(rho[(1, 2)].re, rho0[(1, 2)].re * decay, epsilon = 1e-8);
        // The +1 <-> -1 coherence is untouched.
        assert_relative_eq!(rho[(0, 2)].re, rho0[(0, 2)].re, epsilon = 1e-10);
    }

    #[test]
    fn invalid_parameters_are_rejected() {
        let mut p = PhononParams::new(300.0_f64, 1.0e7);
        p.upsilon = 0.0;
        assert!(p.validate().is_err());
        let mut p = PhononParams::new(300.0_f64, 1.0e7);
        p.temperature = -1.0;
        assert!(p.validate().is_err());
        let mut p = PhononParams::new(300.0_f64, 1.0e7);
        p.lambda00 = -1.0;
        assert!(p.validate().is_err());
        assert!(combined_t2(-1.0_f64, 1.0).is_err());
        assert!(combined_t2(1.0_f64, 0.0).is_err());
        assert!(spectral_integral(0.375_f64, -1.0).is_err());
    }
}
