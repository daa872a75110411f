//! Deterministic construction of nuclear-site sets around the defect.
//!
//! The host crystal is a honeycomb monolayer made of two interleaved
//! triangular sublattices: boron sites at integer combinations `i a1 + j a2`
//! of the primitive vectors `a1 = sqrt(3) a (1, 0)` and
//! `a2 = sqrt(3) a (1/2, sqrt(3)/2)`, and nitrogen sites displaced from them
//! by `(0, a)`, where `a` is the bond length. The defect sits at the origin
//! in place of a boron atom, so the boron site at `(0, 0)` is excluded.
//!
//! Squared site distances are exact integers in units of `a^2`:
//! `3 (i^2 + i j + j^2)` on the boron sublattice and
//! `3 (i^2 + i j + j^2 + j) + 1` on the nitrogen sublattice. Because these
//! are `0 mod 3` and `1 mod 3` respectively, a given distance ring always
//! contains a single species. Rings are indexed from 1 outward over the
//! merged distance ladder of both species, and sites are ordered by
//! `(squared distance, polar angle)` with the angle canonicalised to
//! `[0, 2 pi)`, which makes every produced site list deterministic.

use nalgebra::Vector2;

use crate::{consts, cst, Error, Real, Result};

/// Nuclear species occupying lattice sites.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Species {
    /// Boron-11, nuclear spin 3/2.
    B11,
    /// Nitrogen-14, nuclear spin 1.
    N14,
}

impl Species {
    /// Short text label used in file output and error messages.
    pub fn label(self) -> &'static str {
        match self {
            Species::B11 => "B11",
            Species::N14 => "N14",
        }
    }
}

impl std::str::FromStr for Species {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "B11" | "b11" => Ok(Species::B11),
            "N14" | "n14" => Ok(Species::N14),
            other => Err(Error::domain(
                "species",
                format!("unknown species {other:?}, expected \"B11\" or \"N14\""),
            )),
        }
    }
}

/// Spin quantum number and gyromagnetic ratio of one nuclear species.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpeciesParams<T> {
    /// Which species this parameter set describes.
    pub species: Species,
    /// Twice the nuclear spin quantum number (so spin 3/2 stores 3).
    pub two_s: u32,
    /// Gyromagnetic ratio (rad s^-1 T^-1).
    pub gamma: T,
}

impl<T: Real> SpeciesParams<T> {
    /// Parameters of boron-11 (spin 3/2).
    pub fn boron11() -> Self {
        SpeciesParams {
            species: Species::B11,
            two_s: consts::TWO_S_B11,
            gamma: cst(consts::GAMMA_B11),
        }
    }

    /// Parameters of nitrogen-14 (spin 1).
    pub fn nitrogen14() -> Self {
        SpeciesParams {
            species: Species::N14,
            two_s: consts::TWO_S_N14,
            gamma: cst(consts::GAMMA_N14),
        }
    }

    /// Parameters of the given species.
    pub fn for_species(species: Species) -> Self {
        match species {
            Species::B11 => Self::boron11(),
            Species::N14 => Self::nitrogen14(),
        }
    }

    /// Spin quantum number `s` as a scalar.
    pub fn s(&self) -> T {
        cst(f64::from(self.two_s) / 2.0)
    }

    /// Hilbert-space dimension `2 s + 1` of a single spin.
    pub fn dim(&self) -> usize {
        self.two_s as usize + 1
    }
}

/// One nuclear site of a constructed bath.
#[derive(Clone, Debug, PartialEq)]
pub struct Site<T> {
    /// Position of this site in the deterministic `(distance, angle)` order.
    pub index: usize,
    /// In-plane position relative to the defect (m).
    pub position: Vector2<T>,
    /// Species parameters of the nucleus at this site.
    pub species: SpeciesParams<T>,
    /// 1-based distance ring of the site, counted over both species.
    pub ring: usize,
}

impl<T: Real> Site<T> {
    /// Distance from the defect (m).
    pub fn distance(&self) -> T {
        self.position.norm()
    }
}

/// Rule selecting which lattice sites belong to the bath.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Selection {
    /// All sites out to and including the given 1-based ring index.
    Rings(usize),
    /// The nearest `boron` boron sites and nearest `nitrogen` nitrogen
    /// sites, each chosen by `(distance, angle)` order within its species.
    NearestCounts {
        /// Number of boron sites to keep.
        boron: usize,
        /// Number of nitrogen sites to keep.
        nitrogen: usize,
    },
    /// The first `count` sites of one species within one ring, ordered by
    /// polar angle.
    RingSubset {
        /// Species expected to populate the ring.
        species: Species,
        /// 1-based ring index.
        ring: usize,
        /// Number of sites to keep from the ring.
        count: usize,
    },
}

/// Geometry specification for a bath construction.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LatticeSpec<T> {
    /// Bond length between neighbouring sites (m).
    pub bond_length: T,
    /// Site selection rule.
    pub selection: Selection,
}

impl<T: Real> LatticeSpec<T> {
    /// Specification with the default bond length.
    pub fn new(selection: Selection) -> Self {
        LatticeSpec {
            bond_length: cst(consts::BOND_LENGTH),
            selection,
        }
    }

    /// Specification with an explicit bond length (m).
    pub fn with_bond_length(selection: Selection, bond_length: T) -> Self {
        LatticeSpec {
            bond_length,
            selection,
        }
    }
}

/// Named bath geometries used by the command-line interface and tests.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BathPreset {
    /// The 3 nitrogen sites of ring 1 (nearest neighbours).
    Fig1NRing1,
    /// 3 of the 6 boron sites of ring 2, lowest polar angles first.
    Fig1BRing2,
    /// 3 of the 6 boron sites of ring 5.
    Fig1BRing5,
    /// 3 of the 6 nitrogen sites of ring 7.
    Fig1NRing7,
    /// All 30 sites of rings 1 through 6 (12 nitrogen, 18 boron).
    Fig2Rings30,
    /// The nearest 120 boron and 120 nitrogen sites.
    Fig3Nearest240,
}

impl BathPreset {
    /// Every available preset, in documentation order.
    pub const ALL: [BathPreset; 6] = [
        BathPreset::Fig1NRing1,
        BathPreset::Fig1BRing2,
        BathPreset::Fig1BRing5,
        BathPreset::Fig1NRing7,
        BathPreset::Fig2Rings30,
        BathPreset::Fig3Nearest240,
    ];

    /// Command-line name of the preset.
    pub fn name(self) -> &'static str {
        match self {
            BathPreset::Fig1NRing1 => "fig1-n-ring1",
            BathPreset::Fig1BRing2 => "fig1-b-ring2",
            BathPreset::Fig1BRing5 => "fig1-b-ring5",
            BathPreset::Fig1NRing7 => "fig1-n-ring7",
            BathPreset::Fig2Rings30 => "fig2-30",
            BathPreset::Fig3Nearest240 => "fig3-240",
        }
    }

    /// Selection rule realising the preset.
    pub fn selection(self) -> Selection {
        match self {
            BathPreset::Fig1NRing1 => Selection::RingSubset {
                species: Species::N14,
                ring: 1,
                count: 3,
            },
            BathPreset::Fig1BRing2 => Selection::RingSubset {
                species: Species::B11,
                ring: 2,
                count: 3,
            },
            BathPreset::Fig1BRing5 => Selection::RingSubset {
                species: Species::B11,
                ring: 5,
                count: 3,
            },
            BathPreset::Fig1NRing7 => Selection::RingSubset {
                species: Species::N14,
                ring: 7,
                count: 3,
            },
            BathPreset::Fig2Rings30 => Selection::Rings(6),
            BathPreset::Fig3Nearest240 => Selection::NearestCounts {
                boron: 120,
                nitrogen: 120,
            },
        }
    }
}

impl std::str::FromStr for BathPreset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        BathPreset::ALL
            .iter()
            .copied()
            .find(|p| p.name() == s)
            .ok_or_else(|| {
                let names: Vec<&str> = BathPreset::ALL.iter().map(|p| p.name()).collect();
                Error::domain(
                    "preset",
                    format!("unknown preset {s:?}, expected one of {}", names.join(", ")),
                )
            })
    }
}

/// Builds the site set of a named preset with the default bond length.
pub fn standard_bath<T: Real>(preset: BathPreset) -> Result<Vec<Site<T>>> {
    build_lattice(&LatticeSpec::new(preset.selection()))
}

/// Builds the site set described by `spec`.
///
/// The generation extent grows automatically until the selection is
/// satisfied, subject to a generous default budget on the number of
/// candidate sites.
pub fn build_lattice<T: Real>(spec: &LatticeSpec<T>) -> Result<Vec<Site<T>>> {
    build_lattice_bounded(spec, DEFAULT_SITE_BUDGET)
}

/// Default candidate-site budget of [`build_lattice`].
pub const DEFAULT_SITE_BUDGET: usize = 2_000_000;

/// Builds the site set described by `spec` with an explicit candidate-site
/// budget.
///
/// Returns [`Error::Resource`] when satisfying the selection would require
/// generating more candidate sites than `max_sites`.
pub fn build_lattice_bounded<T: Real>(
    spec: &LatticeSpec<T>,
    max_sites: usize,
) -> Result<Vec<Site<T>>> {
    if !(spec.bond_length > T::zero()) {
        return Err(Error::domain(
            "bond_length",
            format!("must be positive, got {}", spec.bond_length),
        ));
    }
    validate_selection(&spec.selection)?;

    let mut m_cap = initial_cap(&spec.selection);
    loop {
        // Two species have roughly 2.42 sites per unit of squared distance
        // (in bond-length units); refuse extents whose candidate count would
        // blow the budget.
        let estimated = (2.5 * m_cap as f64) as usize;
        if estimated > max_sites {
            return Err(Error::Resource(format!(
                "insufficient lattice extent: selection {:?} needs more than \
                 {max_sites} candidate sites",
                spec.selection
            )));
        }
        let candidates = candidates_up_to(m_cap);
        if let Some(sites) = try_select(spec, &candidates)? {
            return Ok(sites);
        }
        m_cap = m_cap * 2 + 8;
    }
}

fn validate_selection(selection: &Selection) -> Result<()> {
    match *selection {
        Selection::Rings(0) => Err(Error::domain("selection", "ring count must be at least 1")),
        Selection::NearestCounts {
            boron: 0,
            nitrogen: 0,
        } => Err(Error::domain(
            "selection",
            "at least one site must be requested",
        )),
        Selection::RingSubset { ring: 0, .. } => {
            Err(Error::domain("selection", "ring index must be at least 1"))
        }
        Selection::RingSubset { count: 0, .. } => {
            Err(Error::domain("selection", "site count must be at least 1"))
        }
        _ => Ok(()),
    }
}

fn initial_cap(selection: &Selection) -> u64 {
    match *selection {
        Selection::Rings(k) => 4 * k as u64 + 9,
        Selection::RingSubset { ring, .. } => 4 * ring as u64 + 9,
        Selection::NearestCounts { boron, nitrogen } => {
            let needed = boron.max(nitrogen) as f64;
            (needed * 1.3 + 16.0) as u64
        }
    }
}

/// Candidate site in exact integer coordinates; `m` is the squared distance
/// in units of the squared bond length.
struct Candidate {
    species: Species,
    m: u64,
    i: i64,
    j: i64,
}

/// Enumerates every site of both sublattices with squared distance at most
/// `m_cap` (in squared-bond-length units).
///
/// Uses `i^2 + i j + j^2 >= 3/4 max(i, j)^2` to bound the index range.
fn candidates_up_to(m_cap: u64) -> Vec<Candidate> {
    let k = (2.0 * (m_cap as f64).sqrt() / 3.0).ceil() as i64 + 2;
    let mut out = Vec::new();
    for i in -k..=k {
        for j in -k..=k {
            let q = i * i + i * j + j * j;
            let m_boron = 3 * q;
            if (i, j) != (0, 0) && m_boron as u64 <= m_cap {
                out.push(Candidate {
                    species: Species::B11,
                    m: m_boron as u64,
                    i,
                    j,
                });
            }
            let m_nitrogen = 3 * (q + j) + 1;
            if m_nitrogen >= 0 && m_nitrogen as u64 <= m_cap {
                out.push(Candidate {
                    species: Species::N14,
                    m: m_nitrogen as u64,
                    i,
                    j,
                });
            }
        }
    }
    out
}

/// Candidate placed in the plane, ready for angular ordering.
struct Placed<T> {
    species: Species,
    m: u64,
    position: Vector2<T>,
    angle: T,
}

fn place<T: Real>(candidate: &Candidate, bond_length: T) -> Placed<T> {
    let sqrt3 = cst::<T>(3.0).sqrt();
    let half = cst::<T>(0.5);
    let i = T::from_i64(candidate.i).expect("index fits scalar");
    let j = T::from_i64(candidate.j).expect("index fits scalar");
    let x = sqrt3 * bond_length * (i + j * half);
    let mut y = bond_length * (T::one() + half) * j;
    if candidate.species == Species::N14 {
        y += bond_length;
    }
    let mut angle = y.atan2(x);
    if angle < T::zero() {
        angle += T::two_pi();
    }
    Placed {
        species: candidate.species,
        m: candidate.m,
        position: Vector2::new(x, y),
        angle,
    }
}

/// Attempts the selection on the current candidate set; `None` means the
/// extent must grow.
fn try_select<T: Real>(
    spec: &LatticeSpec<T>,
    candidates: &[Candidate],
) -> Result<Option<Vec<Site<T>>>> {
    // Merged distance ladder of both species: ring index = rank of the
    // squared distance among all distinct values.
    let mut distinct: Vec<u64> = candidates.iter().map(|c| c.m).collect();
    distinct.sort_unstable();
    distinct.dedup();
    let ring_of = |m: u64| -> usize {
        distinct
            .binary_search(&m)
            .expect("selected m was generated")
            + 1
    };

    let chosen: Vec<Placed<T>> = match spec.selection {
        Selection::Rings(k) => {
            if distinct.len() < k {
                return Ok(None);
            }
            let cutoff = distinct[k - 1];
            candidates
                .iter()
                .filter(|c| c.m <= cutoff)
                .map(|c| place(c, spec.bond_length))
                .collect()
        }
        Selection::RingSubset {
            species,
            ring,
            count,
        } => {
            if distinct.len() < ring {
                return Ok(None);
            }
            let m_ring = distinct[ring - 1];
            let mut members: Vec<Placed<T>> = candidates
                .iter()
                .filter(|c| c.m == m_ring)
                .map(|c| place(c, spec.bond_length))
                .collect();
            if members.iter().any(|p| p.species != species) {
                return Err(Error::domain(
                    "selection",
                    format!(
                        "ring {ring} is populated by {}, not {}",
                        members[0].species.label(),
                        species.label()
                    ),
                ));
            }
            if members.len() < count {
                return Err(Error::domain(
                    "selection",
                    format!(
                        "ring {ring} holds {} sites, fewer than {count}",
                        members.len()
                    ),
                ));
            }
            members.sort_by(|a, b| a.angle.partial_cmp(&b.angle).expect("finite angles"));
            members.truncate(count);
            members
        }
        Selection::NearestCounts { boron, nitrogen } => {
            let mut selected = Vec::with_capacity(boron + nitrogen);
            for (species, needed) in [(Species::B11, boron), (Species::N14, nitrogen)] {
                let mut members: Vec<Placed<T>> = candidates
                    .iter()
                    .filter(|c| c.species == species)
                    .map(|c| place(c, spec.bond_length))
                    .collect();
                if members.len() < needed {
                    return Ok(None);
                }
                members.sort_by(|a, b| {
                    a.m.cmp(&b.m)
                        .then_with(|| a.angle.partial_cmp(&b.angle).expect("finite angles"))
                });
                members.truncate(needed);
                selected.extend(members);
            }
            selected
        }
    };

    let mut chosen = chosen;
    chosen.sort_by(|a, b| {
        a.m.cmp(&b.m)
            .then_with(|| a.angle.partial_cmp(&b.angle).expect("finite angles"))
    });
    let sites = chosen
        .into_iter()
        .enumerate()
        .map(|(index, p)| Site {
            index,
            position: p.position,
            species: SpeciesParams::for_species(p.species),
            ring: ring_of(p.m),
        })
        .collect();
    Ok(Some(sites))
}
