//! Dipolar coupling tables derived from site geometry.
//!
//! With the magnetic field along the out-of-plane axis, every secular
//! dipolar coefficient between two moments with gyromagnetic ratios
//! `gamma_1`, `gamma_2` at in-plane separation `r` reduces to
//!
//! ```text
//! g = (mu_0 / 4 pi) * gamma_1 * gamma_2 * hbar / r^3    (rad/s)
//! ```
//!
//! because the angular factor of the dipolar tensor is 1 for in-plane
//! separation vectors perpendicular to the field. The electron-nuclear
//! coupling `g_e[i]` uses the electron and nuclear ratios; the
//! nuclear-nuclear couplings `g_nn[i][j]` use the two nuclear ratios.
//! Nuclear Zeeman frequencies are `omega_n[i] = gamma_i B`, and the defect
//! transition frequency is `omega_e = D - gamma_e B` with `D` the
//! zero-field splitting. All frequencies are angular (rad/s).

use nalgebra::{DMatrix, DVector};

use crate::lattice::Site;
use crate::{consts, cst, Error, Real, Result};

/// Shortest separation (m) below which two moments are treated as
/// coincident and rejected.
const MIN_SEPARATION: f64 = 1e-15;

/// Magnetic field and defect-spin parameters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FieldParams<T> {
    /// Out-of-plane magnetic field (T).
    pub b_field: T,
    /// Zero-field splitting of the defect ground state (rad/s).
    pub zero_field_splitting: T,
    /// Electron gyromagnetic ratio (rad s^-1 T^-1).
    pub gamma_e: T,
}

impl<T: Real> FieldParams<T> {
    /// Parameters at the given field with default splitting and electron
    /// gyromagnetic ratio.
    pub fn new(b_field: T) -> Self {
        FieldParams {
            b_field,
            zero_field_splitting: cst(consts::ZERO_FIELD_SPLITTING),
            gamma_e: cst(consts::GAMMA_E),
        }
    }

    /// Angular frequency `D - gamma_e B` of the addressed defect
    /// transition (rad/s); negative above the level anticrossing.
    pub fn electron_frequency(&self) -> T {
        self.zero_field_splitting - self.gamma_e * self.b_field
    }
}

/// Secular dipolar coupling (rad/s) between two moments with the given
/// gyromagnetic ratios (rad s^-1 T^-1) at separation `r` (m).
pub fn dipolar_coupling<T: Real>(gamma_1: T, gamma_2: T, r: T) -> T {
    let mu0_hbar = cst::<T>(consts::MU0_OVER_4PI) * cst::<T>(consts::HBAR);
    mu0_hbar * gamma_1 * gamma_2 / (r * r * r)
}

/// Electron-nuclear couplings `g_e[i]` (rad/s) for every site.
pub fn hyperfine_couplings<T: Real>(
    sites: &[Site<T>],
    field: &FieldParams<T>,
) -> Result<DVector<T>> {
    let min_sep = cst::<T>(MIN_SEPARATION);
    let mut g = DVector::zeros(sites.len());
    for (k, site) in sites.iter().enumerate() {
        let r = site.distance();
        if r < min_sep {
            return Err(Error::domain(
                "sites",
                format!("site {k} coincides with the defect"),
            ));
        }
        g[k] = dipolar_coupling(field.gamma_e, site.species.gamma, r);
    }
    Ok(g)
}

/// Nuclear-nuclear couplings `g_nn[i][j]` (rad/s); symmetric with zero
/// diagonal.
pub fn nuclear_couplings<T: Real>(sites: &[Site<T>]) -> Result<DMatrix<T>> {
    let min_sep = cst::<T>(MIN_SEPARATION);
    let n = sites.len();
    let mut g = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let r = (sites[i].position - sites[j].position).norm();
            if r < min_sep {
                return Err(Error::domain(
                    "sites",
                    format!("sites {i} and {j} coincide"),
                ));
            }
            let gij = dipolar_coupling(sites[i].species.gamma, sites[j].species.gamma, r);
            g[(i, j)] = gij;
            g[(j, i)] = gij;
        }
    }
    Ok(g)
}

/// Nuclear Zeeman angular frequencies `omega_n[i] = gamma_i B` (rad/s).
pub fn zeeman_frequencies<T: Real>(sites: &[Site<T>], b_field: T) -> DVector<T> {
    DVector::from_iterator(
        sites.len(),
        sites.iter().map(|site| site.species.gamma * b_field),
    )
}

/// Complete coupling tables of one bath geometry in one field.
#[derive(Clone, Debug, PartialEq)]
pub struct CouplingSet<T> {
    /// Defect transition frequency `D - gamma_e B` (rad/s).
    pub omega_e: T,
    /// Electron-nuclear couplings (rad/s), indexed by site.
    pub g_e: DVector<T>,
    /// Nuclear-nuclear couplings (rad/s), symmetric, zero diagonal.
    pub g_nn: DMatrix<T>,
    /// Nuclear Zeeman frequencies (rad/s), indexed by site.
    pub omega_n: DVector<T>,
}

impl<T: Real> CouplingSet<T> {
    /// Builds all coupling tables for the given sites and field.
    pub fn build(sites: &[Site<T>], field: &FieldParams<T>) -> Result<Self> {
        if sites.is_empty() {
            return Err(Error::domain("sites", "at least one site is required"));
        }
        Ok(CouplingSet {
            omega_e: field.electron_frequency(),
            g_e: hyperfine_couplings(sites, field)?,
            g_nn: nuclear_couplings(sites)?,
            omega_n: zeeman_frequencies(sites, field.b_field),
        })
    }

    /// Number of bath sites covered by the tables.
    pub fn len(&self) -> usize {
        self.g_e.len()
    }

    /// Whether the tables are empty.
    pub fn is_empty(&self) -> bool {
        self.g_e.len() == 0
    }
}
