//! Single-spin operators, thermal states and many-body embedding.
//!
//! Operators act on the `2 s + 1` dimensional Hilbert space of one nuclear
//! spin. Basis states are ordered by decreasing magnetic quantum number,
//! `m = s, s - 1, ..., -s`, so row 0 corresponds to `m = +s`. A level `m`
//! carries Zeeman energy `hbar omega m`; for positive Larmor frequency the
//! thermal ground state is `m = -s`, and the excitation number of level `m`
//! is `n = m + s`. This matches the bosonic-mode picture used by the
//! [`crate::hpa`] engine, where `n` counts quanta above the ground state.

use nalgebra::Complex;

use crate::linalg::CMatrix;
use crate::{consts, cst, Error, Real, Result};

/// Angular-momentum operators of a single spin.
#[derive(Clone, Debug)]
pub struct SpinOps<T: Real> {
    /// Twice the spin quantum number.
    pub two_s: u32,
    /// `I_z`, diagonal in the ordered basis.
    pub iz: CMatrix<T>,
    /// Raising operator `I_+`.
    pub iplus: CMatrix<T>,
    /// Lowering operator `I_-`.
    pub iminus: CMatrix<T>,
}

impl<T: Real> SpinOps<T> {
    /// Hilbert-space dimension `2 s + 1`.
    pub fn dim(&self) -> usize {
        self.two_s as usize + 1
    }

    /// Spin quantum number `s` as a scalar.
    pub fn s(&self) -> T {
        cst(f64::from(self.two_s) / 2.0)
    }
}

/// Builds the spin operators for spin quantum number `s`.
///
/// `s` must be a positive integer or half-integer (within `1e-9`), i.e.
/// `2 s` must round to an integer of at least 1.
pub fn spin_matrices<T: Real>(s: T) -> Result<SpinOps<T>> {
    let two_s = s + s;
    let rounded = two_s.round();
    let deviation = (two_s - rounded).abs();
    if deviation > cst(1e-9) || rounded < T::one() {
        return Err(Error::domain(
            "spin",
            format!("s = {s} is not a positive integer or half-integer"),
        ));
    }
    let two_s = rounded
        .to_u32()
        .ok_or_else(|| Error::domain("spin", format!("s = {s} is too large")))?;
    Ok(spin_matrices_from_two_s(two_s))
}

/// Builds the spin operators from twice the spin quantum number (`>= 1`).
pub fn spin_matrices_from_two_s<T: Real>(two_s: u32) -> SpinOps<T> {
    assert!(two_s >= 1, "two_s must be at least 1");
    let dim = two_s as usize + 1;
    let s = cst::<T>(f64::from(two_s) / 2.0);
    let mut iz = CMatrix::<T>::zeros(dim, dim);
    let mut iplus = CMatrix::<T>::zeros(dim, dim);
    for k in 0..dim {
        let m = s - cst::<T>(k as f64);
        iz[(k, k)] = Complex::new(m, T::zero());
        if k >= 1 {
            // Matrix element <m + 1 | I_+ | m> on the superdiagonal.
            let amp = (s * (s + T::one()) - m * (m + T::one())).sqrt();
            iplus[(k - 1, k)] = Complex::new(amp, T::zero());
        }
    }
    let iminus = iplus.adjoint();
    SpinOps {
        two_s,
        iz,
        iplus,
        iminus,
    }
}

/// Boltzmann probabilities of the excitation numbers `n = 0..=2s` of a spin
/// with Larmor frequency `omega` (rad/s) at the given temperature (K).
///
/// Level `n` sits `n hbar omega` above the ground state, so
/// `p(n)` is proportional to `exp(-n hbar omega / (k_B T))`. The exponent is
/// shifted by its extremum before exponentiation, which keeps the
/// normalisation finite for arbitrarily large `|omega| / T`.
pub fn boltzmann_occupation_probs<T: Real>(two_s: u32, omega: T, temperature: T) -> Result<Vec<T>> {
    if !(temperature > T::zero()) {
        return Err(Error::domain(
            "temperature",
            format!("must be positive, got {temperature}"),
        ));
    }
    let beta_hbar = cst::<T>(consts::HBAR) / (cst::<T>(consts::K_B) * temperature);
    let exponents: Vec<T> = (0..=two_s)
        .map(|n| -beta_hbar * omega * cst::<T>(f64::from(n)))
        .collect();
    let max = exponents
        .iter()
        .copied()
        .fold(exponents[0], |a, b| if b > a { b } else { a });
    let weights: Vec<T> = exponents.iter().map(|&e| (e - max).exp()).collect();
    let norm = weights.iter().fold(T::zero(), |a, &w| a + w);
    Ok(weights.into_iter().map(|w| w / norm).collect())
}

/// Thermal density matrix of a single spin with Larmor frequency `omega`
/// (rad/s) at the given temperature (K), diagonal in the ordered basis.
pub fn thermal_state<T: Real>(two_s: u32, omega: T, temperature: T) -> Result<CMatrix<T>> {
    let probs = boltzmann_occupation_probs(two_s, omega, temperature)?;
    let dim = two_s as usize + 1;
    let mut rho = CMatrix::<T>::zeros(dim, dim);
    for k in 0..dim {
        // Row k has m = s - k, i.e. excitation number n = 2s - k.
        let n = two_s as usize - k;
        rho[(k, k)] = Complex::new(probs[n], T::zero());
    }
    Ok(rho)
}

/// Embeds a single-site operator into the tensor-product space of all
/// sites, acting as the identity elsewhere.
///
/// `dims` lists the per-site Hilbert dimensions in site order; `op` must be
/// square with dimension `dims[site]`.
pub fn embed<T: Real>(op: &CMatrix<T>, site: usize, dims: &[usize]) -> CMatrix<T> {
    assert!(site < dims.len(), "site index out of range");
    assert_eq!(op.nrows(), op.ncols(), "operator must be square");
    assert_eq!(op.nrows(), dims[site], "operator dimension mismatch");
    let mut acc = CMatrix::<T>::identity(1, 1);
    for (k, &dim) in dims.iter().enumerate() {
        if k == site {
            acc = acc.kronecker(op);
        } else {
            acc = acc.kronecker(&CMatrix::<T>::identity(dim, dim));
        }
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn commutator(a: &CMatrix<f64>, b: &CMatrix<f64>) -> CMatrix<f64> {
        a * b - b * a
    }

    fn max_abs(m: &CMatrix<f64>) -> f64 {
        m.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    #[test]
    fn spin_half_matrices_are_pauli_halves() {
        let ops = spin_matrices(0.5_f64).unwrap();
        assert_eq!(ops.dim(), 2);
        assert_relative_eq!(ops.iz[(0, 0)].re, 0.5);
        assert_relative_eq!(ops.iz[(1, 1)].re, -0.5);
        assert_relative_eq!(ops.iplus[(0, 1)].re, 1.0);
        assert_relative_eq!(ops.iplus[(1, 0)].re, 0.0);
    }

    #[test]
    fn spin_one_and_three_half_elements_match_ladder_formula() {
        let ops1 = spin_matrices(1.0_f64).unwrap();
        assert_relative_eq!(ops1.iplus[(0, 1)].re, 2.0_f64.sqrt(), max_relative = 1e-15);
        assert_relative_eq!(ops1.iplus[(1, 2)].re, 2.0_f64.sqrt(), max_relative = 1e-15);

        let ops32 = spin_matrices(1.5_f64).unwrap();
        let expected = [3.0_f64.sqrt(), 2.0, 3.0_f64.sqrt()];
        for (k, &want) in expected.iter().enumerate() {
            assert_relative_eq!(ops32.iplus[(k, k + 1)].re, want, max_relative = 1e-15);
        }
    }

    #[test]
    fn angular_momentum_algebra_holds() {
        for two_s in 1..=5_u32 {
            let ops = spin_matrices_from_two_s::<f64>(two_s);
            // [I_z, I_+] = +I_+ and [I_+, I_-] = 2 I_z.
            let c1 = commutator(&ops.iz, &ops.iplus) - &ops.iplus;
            assert!(max_abs(&c1) < 1e-13, "two_s = {two_s}");
            let c2 = commutator(&ops.iplus, &ops.iminus) - ops.iz.scale(2.0);
            assert!(max_abs(&c2) < 1e-13, "two_s = {two_s}");

            // Casimir invariant I^2 = s (s + 1).
            let ix = (&ops.iplus + &ops.iminus).scale(0.5);
            let iy = (&ops.iplus - &ops.iminus).scale(0.5) * nalgebra::Complex::new(0.0, -1.0);
            let total = &ix * &ix + &iy * &iy + &ops.iz * &ops.iz;
            let s = ops.s();
            let expected = CMatrix::<f64>::identity(ops.dim(), ops.dim()).scale(s * (s + 1.0));
            assert!(max_abs(&(total - expected)) < 1e-13, "two_s = {two_s}");
        }
    }

    #[test]
    fn invalid_spin_values_are_rejected() {
        assert!(spin_matrices(0.3_f64).is_err());
        assert!(spin_matrices(0.0_f64).is_err());
        assert!(spin_matrices(-1.0_f64).is_err());
        assert!(spin_matrices(1.5_f64 + 1e-6).is_err());
        assert!(spin_matrices(1.5_f64 + 1e-12).is_ok());
    }

    #[test]
    fn thermal_state_has_boltzmann_ratios() {
        // Boron-11 at 1 T and 0.1 K: hbar omega / (k_B T) computed
        // independently with extended precision.
        let omega = consts::GAMMA_B11;
        let beta_omega: f64 = 6.55576603420141e-3;
        let rho = thermal_state::<f64>(3, omega, 0.1).unwrap();
        let trace: f64 = (0..4).map(|k| rho[(k, k)].re).sum();
        assert_relative_eq!(trace, 1.0, max_relative = 1e-14);
        for k in 0..3 {
            // Row k has m = s - k; population ratio between adjacent rows is
            // exp(+beta hbar omega) because energy decreases with k.
            let ratio = rho[(k + 1, k + 1)].re / rho[(k, k)].re;
            assert_relative_eq!(ratio, beta_omega.exp(), max_relative = 1e-12);
        }
        // Ground state m = -3/2 is the most occupied.
        assert!(rho[(3, 3)].re > rho[(0, 0)].re);
    }

    #[test]
    fn thermal_state_limits() {
        // Very high temperature: uniform populations.
        let rho = thermal_state::<f64>(2, consts::GAMMA_N14, 1e9).unwrap();
        for k in 0..3 {
            assert_relative_eq!(rho[(k, k)].re, 1.0 / 3.0, max_relative = 1e-9);
        }
        // Very low temperature: pure ground state in the last row.
        let rho = thermal_state::<f64>(2, consts::GAMMA_N14, 1e-12).unwrap();
        assert_relative_eq!(rho[(2, 2)].re, 1.0, max_relative = 1e-14);
        assert!(rho[(0, 0)].re.abs() < 1e-300);
        // Zero frequency: uniform at any temperature.
        let rho = thermal_state::<f64>(3, 0.0, 1e-6).unwrap();
        for k in 0..4 {
            assert_relative_eq!(rho[(k, k)].re, 0.25, max_relative = 1e-14);
        }
    }

    #[test]
    fn occupation_probs_reject_nonpositive_temperature() {
        assert!(boltzmann_occupation_probs::<f64>(2, 1.0, 0.0).is_err());
        assert!(boltzmann_occupation_probs::<f64>(2, 1.0, -1.0).is_err());
    }

    #[test]
    fn embedding_acts_on_the_right_slot() {
        let dims = [2_usize, 3, 2];
        let ops = spin_matrices_from_two_s::<f64>(2);
        let big = embed(&ops.iz, 1, &dims);
        assert_eq!(big.nrows(), 12);
        // Trace of I_z vanishes and embedding preserves that.
        let trace: f64 = (0..12).map(|k| big[(k, k)].re).sum();
        assert!(trace.abs() < 1e-14);
        // Element check: basis index 0 has middle-spin m = +1.
        assert_relative_eq!(big[(0, 0)].re, 1.0);
        // Operators embedded on different sites commute.
        let half = spin_matrices_from_two_s::<f64>(1);
        let a = embed(&half.iplus, 0, &dims);
        let b = embed(&ops.iplus, 1, &dims);
        assert!(max_abs(&commutator(&a, &b)) < 1e-15);
    }
}
