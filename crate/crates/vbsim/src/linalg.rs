//! Shared dense linear algebra: complex matrix aliases, checked Hermitian
//! and real-symmetric eigendecompositions, and unitary propagators built
//! from spectral data.

use nalgebra::{Complex, ComplexField, DMatrix, DVector};

use crate::{cst, Error, Real, Result};

/// Dense complex matrix over the active scalar.
pub type CMatrix<T> = DMatrix<Complex<T>>;
/// Dense complex vector over the active scalar.
pub type CVector<T> = DVector<Complex<T>>;

/// Largest absolute value of any element (sup norm).
pub fn max_abs<T: Real>(m: &CMatrix<T>) -> T {
    m.iter().fold(T::zero(), |acc, c| {
        let n = c.modulus();
        if n > acc {
            n
        } else {
            acc
        }
    })
}

/// Largest absolute deviation from Hermiticity, `max |M - M^dagger|`.
pub fn hermiticity_defect<T: Real>(m: &CMatrix<T>) -> T {
    let mut defect = T::zero();
    for i in 0..m.nrows() {
        for j in i..m.ncols() {
            let d = (m[(i, j)] - m[(j, i)].conj()).modulus();
            if d > defect {
                defect = d;
            }
        }
    }
    defect
}

/// Replaces `m` by its Hermitian part `(M + M^dagger) / 2`.
pub fn hermitize<T: Real>(m: &mut CMatrix<T>) {
    let half = Complex::new(cst::<T>(0.5), T::zero());
    let adj = m.adjoint();
    *m += adj;
    *m *= half;
}

fn check_finite_complex<T: Real>(m: &CMatrix<T>) -> Result<()> {
    if m.iter().all(|c| c.re.is_finite() && c.im.is_finite()) {
        Ok(())
    } else {
        Err(Error::Numerical(
            "matrix contains non-finite entries".into(),
        ))
    }
}

/// Eigendecomposition `M = W diag(values) W^dagger` of a Hermitian matrix.
#[derive(Clone, Debug)]
pub struct HermitianEigen<T: Real> {
    /// Orthonormal eigenvectors, one per column.
    pub vectors: CMatrix<T>,
    /// Real eigenvalues in the order of the columns of `vectors`.
    pub values: DVector<T>,
}

impl<T: Real> HermitianEigen<T> {
    /// Decomposes `m`, verifying first that it is square, finite and
    /// Hermitian to within a small relative tolerance.
    pub fn new(m: &CMatrix<T>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::domain("matrix", "must be square"));
        }
        check_finite_complex(m)?;
        let scale = max_abs(m);
        let tol = cst::<T>(1e-9) * scale + cst::<T>(1e-300);
        let defect = hermiticity_defect(m);
        if defect > tol {
            return Err(Error::domain(
                "matrix",
                format!("not Hermitian: defect {defect} exceeds tolerance {tol}"),
            ));
        }
        let eig = nalgebra::SymmetricEigen::try_new(m.clone(), T::default_epsilon(), 100_000)
            .ok_or_else(|| {
                Error::Numerical("Hermitian eigendecomposition did not converge".into())
            })?;
        Ok(HermitianEigen {
            vectors: eig.eigenvectors,
            values: eig.eigenvalues,
        })
    }

    /// Unitary propagator `exp(-i M t) = W diag(exp(-i lambda t)) W^dagger`.
    pub fn propagator(&self, t: T) -> CMatrix<T> {
        let dim = self.values.len();
        let mut scaled = self.vectors.clone();
        for k in 0..dim {
            let phase = Complex::new(T::zero(), -self.values[k] * t).exp();
            for i in 0..dim {
                scaled[(i, k)] *= phase;
            }
        }
        &scaled * self.vectors.adjoint()
    }
}

/// Eigendecomposition `M = Q diag(values) Q^T` of a real symmetric matrix.
#[derive(Clone, Debug)]
pub struct RealSymEigen<T: Real> {
    /// Orthonormal eigenvectors, one per column.
    pub vectors: DMatrix<T>,
    /// Eigenvalues in the order of the columns of `vectors`.
    pub values: DVector<T>,
}

impl<T: Real> RealSymEigen<T> {
    /// Decomposes `m`, verifying first that it is square, finite and
    /// symmetric to within a small relative tolerance.
    pub fn new(m: &DMatrix<T>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::domain("matrix", "must be square"));
        }
        if !m.iter().all(|x| x.is_finite()) {
            return Err(Error::Numerical(
                "matrix contains non-finite entries".into(),
            ));
        }
        let scale = m.iter().fold(
            T::zero(),
            |acc, &x| {
                if x.abs() > acc {
                    x.abs()
                } else {
                    acc
                }
            },
        );
        let tol = cst::<T>(1e-9) * scale + cst::<T>(1e-300);
        let mut defect = T::zero();
        for i in 0..m.nrows() {
            for j in i..m.ncols() {
                let d = (m[(i, j)] - m[(j, i)]).abs();
                if d > defect {
                    defect = d;
                }
            }
        }
        if defect > tol {
            return Err(Error::domain(
                "matrix",
                format!("not symmetric: defect {defect} exceeds tolerance {tol}"),
            ));
        }
        let eig = nalgebra::SymmetricEigen::try_new(m.clone(), T::default_epsilon(), 100_000)
            .ok_or_else(|| {
                Error::Numerical("symmetric eigendecomposition did not converge".into())
            })?;
        Ok(RealSymEigen {
            vectors: eig.eigenvectors,
            values: eig.eigenvalues,
        })
    }
}
