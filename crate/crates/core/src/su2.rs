//! Spin-l representations of su(2), the monomial operator basis, and
//! block-decomposed Hilbert-space traces.
//!
//! A chain of L spin-1/2 sites carries collective operators
//! J_i = (1/2) sum_j sigma_i^j which generate su(2). The 2^L-dimensional
//! Hilbert space reduces to a direct sum of spin-l irreps, the sector l
//! entering d_l = (2l+1)/(L+1) * C(L+1, L/2+l+1) times, with l running over
//! l_min, l_min+1, ..., L/2 and l_min = 0 (L even) or 1/2 (L odd). Storing
//! one dense (2l+1)-dimensional matrix per sector turns full-space traces
//! into multiplicity-weighted sums of small traces, so nothing here ever
//! touches a 2^L-dimensional object.
//!
//! Half-integer spin labels are represented as the integer 2l throughout.

use std::collections::BTreeMap;

use ndarray::prelude::*;
use num_complex::Complex64 as c64;

use crate::error::{Result, SpinbootError};

/// Largest supported site count; exact u128 binomials overflow past this.
pub const MAX_SITES: u32 = 64;

/// One irreducible block of the collective-spin representation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SpinSector {
    /// Twice the spin label l, always a non-negative integer.
    pub twice_l: u32,
    /// Block dimension 2l+1.
    pub dim: usize,
    /// Number of times this irrep appears in the 2^L-dimensional space.
    pub multiplicity: u128,
}

impl SpinSector {
    /// Spin label l as a float.
    pub fn l(&self) -> f64 {
        f64::from(self.twice_l) / 2.0
    }

    /// Casimir eigenvalue l(l+1).
    pub fn casimir(&self) -> f64 {
        let l = self.l();
        l * (l + 1.0)
    }
}

fn check_sites(sites: u32) -> Result<()> {
    if !(1..=MAX_SITES).contains(&sites) {
        return Err(SpinbootError::InvalidConfig(format!(
            "site count L={sites} outside supported range [1, {MAX_SITES}]"
        )));
    }
    Ok(())
}

/// Exact binomial coefficient; n stays <= 65 here so u128 never overflows.
fn binomial(n: u32, k: u32) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * u128::from(n - i) / u128::from(i + 1);
    }
    acc
}

/// Multiplicity d_l of the spin-l irrep for L sites, as an exact integer.
pub fn multiplicity(sites: u32, twice_l: u32) -> Result<u128> {
    check_sites(sites)?;
    if twice_l > sites || twice_l % 2 != sites % 2 {
        return Err(SpinbootError::InvalidConfig(format!(
            "sector 2l={twice_l} is not admissible for L={sites}"
        )));
    }
    // (2l+1) * C(L+1, L/2+l+1) / (L+1); the division is exact.
    let num = u128::from(twice_l + 1) * binomial(sites + 1, (sites + twice_l) / 2 + 1);
    Ok(num / u128::from(sites + 1))
}

/// All admissible sectors for L sites, ascending in l.
pub fn sectors(sites: u32) -> Result<Vec<SpinSector>> {
    check_sites(sites)?;
    (sites % 2..=sites)
        .step_by(2)
        .map(|twice_l| {
            Ok(SpinSector {
                twice_l,
                dim: twice_l as usize + 1,
                multiplicity: multiplicity(sites, twice_l)?,
            })
        })
        .collect()
}

/// The ordered operator basis {J_x^a J_y^b J_z^c : a+b+c <= L}.
///
/// Entries are graded by total degree; within a degree the order is
/// lexicographic with a, then b, descending, so index 0 is the identity and
/// degree-1 entries follow as (1,0,0), (0,1,0), (0,0,1).
#[derive(Debug, Clone)]
pub struct MonomialBasis {
    sites: u32,
    entries: Vec<[u32; 3]>,
    index: BTreeMap<[u32; 3], usize>,
}

impl MonomialBasis {
    /// Number of basis operators, (L+1)(L+2)(L+3)/6.
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Site count the basis was built for.
    pub fn sites(&self) -> u32 {
        self.sites
    }

    pub fn entries(&self) -> &[[u32; 3]] {
        &self.entries
    }

    pub fn entry(&self, alpha: usize) -> [u32; 3] {
        self.entries[alpha]
    }

    /// Flat index of an exponent triple, if present.
    pub fn idx(&self, entry: [u32; 3]) -> Option<usize> {
        self.index.get(&entry).copied()
    }

    /// Builds a basis from an explicit entry list (used by the restricted
    /// single-generator pipeline); entries must be distinct.
    pub fn from_entries(sites: u32, entries: Vec<[u32; 3]>) -> Result<Self> {
        check_sites(sites)?;
        let mut index = BTreeMap::new();
        for (i, &e) in entries.iter().enumerate() {
            let degree = e[0] + e[1] + e[2];
            if degree > sites {
                return Err(SpinbootError::InvalidConfig(format!(
                    "basis entry ({},{},{}) exceeds degree cap L={sites}",
                    e[0], e[1], e[2]
                )));
            }
            if index.insert(e, i).is_some() {
                return Err(SpinbootError::InvalidConfig(format!(
                    "duplicate basis entry ({},{},{})",
                    e[0], e[1], e[2]
                )));
            }
        }
        Ok(Self {
            sites,
            entries,
            index,
        })
    }
}

/// Enumerates all monomials J_x^a J_y^b J_z^c with a+b+c <= L in canonical
/// order.
pub fn enumerate_basis(sites: u32) -> Result<MonomialBasis> {
    check_sites(sites)?;
    let mut entries = Vec::new();
    for degree in 0..=sites {
        for a in (0..=degree).rev() {
            for b in (0..=degree - a).rev() {
                entries.push([a, b, degree - a - b]);
            }
        }
    }
    MonomialBasis::from_entries(sites, entries)
}

/// Spin matrices (J_x, J_y, J_z) for one sector, in the J_z eigenbasis with
/// diagonal l, l-1, ..., -l. Built from the ladder operators, so the su(2)
/// relations hold to rounding error.
pub fn spin_matrices(twice_l: u32) -> [Array2<c64>; 3] {
    let n = twice_l as usize + 1;
    let l = f64::from(twice_l) / 2.0;
    let mut jz = Array2::<c64>::zeros((n, n));
    let mut jp = Array2::<c64>::zeros((n, n));
    for k in 0..n {
        let m = l - k as f64;
        jz[[k, k]] = c64::new(m, 0.0);
        if k > 0 {
            // <l, m+1| J_+ |l, m> with m the row-(k) magnetization
            jp[[k - 1, k]] = c64::new((l * (l + 1.0) - m * (m + 1.0)).sqrt(), 0.0);
        }
    }
    let jm = jp.t().mapv(|z| z.conj());
    let jx = (&jp + &jm).mapv(|z| z * 0.5);
    let jy = (&jp - &jm).mapv(|z| z * c64::new(0.0, -0.5));
    [jx, jy, jz]
}

/// One monomial realized in a single sector: (J_x^(l))^a (J_y^(l))^b (J_z^(l))^c.
pub fn monomial_block(entry: [u32; 3], twice_l: u32) -> Array2<c64> {
    let [jx, jy, jz] = spin_matrices(twice_l);
    let n = twice_l as usize + 1;
    let mut out = Array2::<c64>::eye(n);
    for (gen, &power) in [jx, jy, jz].iter().zip(entry.iter()) {
        for _ in 0..power {
            out = out.dot(gen);
        }
    }
    out
}

/// Every basis monomial realized in one sector, sharing cached generator
/// powers: each entry costs two matrix products.
#[derive(Debug, Clone)]
pub struct SectorBlocks {
    pub sector: SpinSector,
    pub mats: Vec<Array2<c64>>,
}

/// Builds the per-sector block matrices for an entire basis.
pub fn monomial_blocks(basis: &MonomialBasis) -> Result<Vec<SectorBlocks>> {
    let sites = basis.sites();
    let max_pow = basis
        .entries()
        .iter()
        .fold([0u32; 3], |m, e| [m[0].max(e[0]), m[1].max(e[1]), m[2].max(e[2])]);
    sectors(sites)?
        .into_iter()
        .map(|sector| {
            let n = sector.dim;
            let gens = spin_matrices(sector.twice_l);
            let mut powers: [Vec<Array2<c64>>; 3] =
                [vec![Array2::eye(n)], vec![Array2::eye(n)], vec![Array2::eye(n)]];
            for (axis, gen) in gens.iter().enumerate() {
                for _ in 0..max_pow[axis] {
                    let next = powers[axis].last().unwrap().dot(gen);
                    powers[axis].push(next);
                }
            }
            let mats = basis
                .entries()
                .iter()
                .map(|&[a, b, c]| {
                    powers[0][a as usize]
                        .dot(&powers[1][b as usize])
                        .dot(&powers[2][c as usize])
                })
                .collect();
            Ok(SectorBlocks { sector, mats })
        })
        .collect()
}

/// Full 2^L-space trace of a product of up to three monomials, evaluated as
/// sum_l d_l tr(per-sector product). The empty product traces to 2^L.
pub fn weighted_trace(ops: &[[u32; 3]], sites: u32) -> Result<c64> {
    let secs = sectors(sites)?;
    let mut total = c64::new(0.0, 0.0);
    for sector in secs {
        let n = sector.dim;
        let mut prod = Array2::<c64>::eye(n);
        for &entry in ops {
            prod = prod.dot(&monomial_block(entry, sector.twice_l));
        }
        let tr: c64 = (0..n).map(|i| prod[[i, i]]).sum();
        total += c64::new(sector.multiplicity as f64, 0.0) * tr;
    }
    Ok(total)
}
