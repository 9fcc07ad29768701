//! Collective-sector oracle: diagonalizes the (2l+1)-dimensional block.

use ndarray::{Array1, Array2};
use ndarray_linalg::{Eigh, UPLO};
use num_complex::Complex64 as c64;

use crate::error::Result;
use crate::measures::MomentSet;
use crate::su2::{multiplicity, spin_matrices};

/// The exact spectrum of one angular momentum sector.
#[derive(Debug, Clone)]
pub struct SectorSpectrum {
    pub twice_l: u32,
    /// Copies of this block in the full 2^L space.
    pub degeneracy: u128,
    /// Ascending.
    pub energies: Array1<f64>,
    /// Column k is the eigenvector of energies[k] in the |l, m> basis.
    pub vectors: Array2<f64>,
    jmats: [Array2<c64>; 3],
    sites: u32,
}

/// The sector Hamiltonian, a real symmetric (2l+1) x (2l+1) matrix.
///
/// The spin matrices are complex but every term here has a real matrix
/// representation (Jy only enters squared), so the imaginary parts vanish
/// identically and are dropped.
pub fn hamiltonian_block(
    sites: u32,
    gamma: f64,
    hx: f64,
    hz: f64,
    twice_l: u32,
) -> Result<Array2<f64>> {
    multiplicity(sites, twice_l)?;
    let [jx, jy, jz] = spin_matrices(twice_l);
    let l = f64::from(sites);
    let dim = twice_l as usize + 1;
    let mut h = Array2::<c64>::zeros((dim, dim));
    h.scaled_add(c64::new(-(1.0 + gamma) / (2.0 * l), 0.0), &jx.dot(&jx));
    h.scaled_add(c64::new(-(1.0 - gamma) / (2.0 * l), 0.0), &jy.dot(&jy));
    h.scaled_add(c64::new(-hx, 0.0), &jx);
    h.scaled_add(c64::new(-hz, 0.0), &jz);
    for k in 0..dim {
        h[[k, k]] += 0.25;
    }
    Ok(h.mapv(|z| z.re))
}

/// Exact eigenpairs of one sector.
pub fn angular_momentum_solve(
    sites: u32,
    gamma: f64,
    hx: f64,
    hz: f64,
    twice_l: u32,
) -> Result<SectorSpectrum> {
    let degeneracy = multiplicity(sites, twice_l)?;
    let h = hamiltonian_block(sites, gamma, hx, hz, twice_l)?;
    let (energies, vectors) = h.eigh(UPLO::Lower)?;
    Ok(SectorSpectrum {
        twice_l,
        degeneracy,
        energies,
        vectors,
        jmats: spin_matrices(twice_l),
        sites,
    })
}

impl SectorSpectrum {
    pub fn len(&self) -> usize {
        self.energies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.energies.is_empty()
    }

    /// Collective moments of one eigenstate.
    pub fn state_moments(&self, state: usize) -> Result<MomentSet> {
        self.average_moments(std::slice::from_ref(&state))
    }

    /// Moments averaged over a degenerate cluster of states.
    ///
    /// The average over an orthonormal cluster basis is basis independent,
    /// which makes it comparable across solvers even when individual
    /// degenerate eigenvectors are arbitrary.
    pub fn average_moments(&self, members: &[usize]) -> Result<MomentSet> {
        assert!(!members.is_empty());
        let weight = 1.0 / members.len() as f64;
        let mut first = [c64::new(0.0, 0.0); 3];
        let mut second = Array2::<c64>::zeros((3, 3));
        for &k in members {
            let psi = self.vectors.column(k).mapv(|x| c64::new(x, 0.0));
            let jpsi: Vec<Array1<c64>> = self.jmats.iter().map(|j| j.dot(&psi)).collect();
            for i in 0..3 {
                let bra: c64 = psi.iter().zip(jpsi[i].iter()).map(|(a, b)| a.conj() * b).sum();
                first[i] += weight * bra;
                for j in 0..3 {
                    let val: c64 = jpsi[i]
                        .iter()
                        .zip(jpsi[j].iter())
                        .map(|(a, b)| a.conj() * b)
                        .sum();
                    second[[i, j]] += weight * val;
                }
            }
        }
        MomentSet::new(self.sites, Some(self.twice_l), first, second)
    }

    /// Worst eigenpair residual, for validation against the block matrix.
    pub fn max_residual(&self, h: &Array2<f64>) -> f64 {
        let mut worst = 0.0_f64;
        for k in 0..self.len() {
            let psi = self.vectors.column(k);
            let hpsi = h.dot(&psi);
            let dev = hpsi
                .iter()
                .zip(psi.iter())
                .map(|(a, b)| (a - self.energies[k] * b).abs())
                .fold(0.0, f64::max);
            worst = worst.max(dev);
        }
        worst
    }
}
