//! Dense product-basis oracle for small systems.
//!
//! Bit conventions: basis index s has bit i set when site i points up
//! (sigma_z eigenvalue +1), and |up up ... up> is index 2^L - 1.

use ndarray::{Array1, Array2};
use ndarray_linalg::{Eigh, UPLO};
use num_complex::Complex64 as c64;

use crate::error::{Result, SpinbootError};
use crate::measures::{MomentSet, TwoQubitDensity};

/// Largest system the dense solver accepts (4096-dimensional).
pub const ED_CAP: u32 = 12;

/// One labeled eigenstate of the full 2^L problem.
#[derive(Debug, Clone)]
pub struct EdState {
    pub energy: f64,
    /// Sector label recovered from <J^2>.
    pub twice_l: u32,
    /// Real because the Hamiltonian is real in the product basis.
    pub amplitudes: Array1<f64>,
}

fn check_cap(sites: u32) -> Result<()> {
    if sites > ED_CAP {
        return Err(SpinbootError::TooLarge {
            requested: sites,
            cap: ED_CAP,
        });
    }
    if sites == 0 {
        return Err(SpinbootError::InvalidConfig(
            "need at least one site".into(),
        ));
    }
    Ok(())
}

fn z_at(s: usize, i: u32) -> f64 {
    if s >> i & 1 == 1 {
        1.0
    } else {
        -1.0
    }
}

/// The LMG Hamiltonian in its pairwise form, as a full 2^L matrix. The
/// collective-operator form carries a +1/4 that cancels exactly against the
/// pair rewriting, so no constant shift appears here.
pub fn hamiltonian_dense(sites: u32, gamma: f64, hx: f64, hz: f64) -> Array2<f64> {
    let dim = 1usize << sites;
    let l = f64::from(sites);
    let mut h = Array2::<f64>::zeros((dim, dim));
    for s in 0..dim {
        let mut diag = 0.0;
        for i in 0..sites {
            diag -= hz / 2.0 * z_at(s, i);
            h[[s ^ (1 << i), s]] -= hx / 2.0;
        }
        for i in 0..sites {
            for j in (i + 1)..sites {
                let t = s ^ (1 << i) ^ (1 << j);
                let zz = z_at(s, i) * z_at(s, j);
                // sigma_x sigma_x maps |s> -> |t>; sigma_y sigma_y adds -zz
                h[[t, s]] -= ((1.0 + gamma) - (1.0 - gamma) * zz) / (4.0 * l);
            }
        }
        h[[s, s]] += diag;
    }
    h
}

/// Total angular momentum squared in the product basis.
pub fn casimir_dense(sites: u32) -> Array2<f64> {
    let dim = 1usize << sites;
    let l = f64::from(sites);
    let mut j2 = Array2::<f64>::zeros((dim, dim));
    for s in 0..dim {
        let mut diag = 3.0 * l / 4.0;
        for i in 0..sites {
            for j in (i + 1)..sites {
                let zz = z_at(s, i) * z_at(s, j);
                diag += zz / 2.0;
                if zz < 0.0 {
                    // flip-flop acts only on anti-aligned pairs
                    j2[[s ^ (1 << i) ^ (1 << j), s]] += 1.0;
                }
            }
        }
        j2[[s, s]] += diag;
    }
    j2
}

/// Full exact diagonalization with J^2 labels, J^2 resolved first.
///
/// States are sorted by (sector, energy); within a degenerate energy the
/// eigenvector choice is whatever the dense solver returns.
pub fn dense_ed(sites: u32, gamma: f64, hx: f64, hz: f64) -> Result<Vec<EdState>> {
    check_cap(sites)?;
    let h = hamiltonian_dense(sites, gamma, hx, hz);
    let j2 = casimir_dense(sites);
    let (w2, q) = j2.eigh(UPLO::Lower)?;
    let dim = w2.len();
    let mut states = Vec::with_capacity(dim);
    let mut start = 0;
    while start < dim {
        let mut end = start + 1;
        while end < dim && w2[end] - w2[start] < 1e-6 {
            end += 1;
        }
        let block = q.slice(ndarray::s![.., start..end]);
        let hp = block.t().dot(&h).dot(&block);
        let (energies, vecs) = hp.eigh(UPLO::Lower)?;
        let lifted = block.dot(&vecs);
        let casimir = w2.slice(ndarray::s![start..end]).mean().unwrap();
        let l_val = 0.5 * (-1.0 + (1.0 + 4.0 * casimir).sqrt());
        let twice_l = (2.0 * l_val).round() as u32;
        let assigned = f64::from(twice_l) / 2.0;
        if (casimir - assigned * (assigned + 1.0)).abs() > 1e-8 {
            return Err(SpinbootError::InvalidConfig(format!(
                "Casimir eigenvalue {casimir} is not of the form l(l+1)"
            )));
        }
        for k in 0..energies.len() {
            states.push(EdState {
                energy: energies[k],
                twice_l,
                amplitudes: lifted.column(k).to_owned(),
            });
        }
        start = end;
    }
    states.sort_by(|a, b| {
        (a.twice_l, a.energy)
            .partial_cmp(&(b.twice_l, b.energy))
            .unwrap()
    });
    Ok(states)
}

impl EdState {
    pub fn sites(&self) -> u32 {
        self.amplitudes.len().trailing_zeros()
    }

    /// Applies J_i to the amplitude vector.
    fn spin_apply(&self, axis: usize) -> Array1<c64> {
        let sites = self.sites();
        let dim = self.amplitudes.len();
        let mut out = Array1::<c64>::zeros(dim);
        for s in 0..dim {
            let amp = self.amplitudes[s];
            if amp == 0.0 {
                continue;
            }
            for i in 0..sites {
                match axis {
                    // sigma_x/2: flip
                    0 => out[s ^ (1 << i)] += c64::new(amp / 2.0, 0.0),
                    // sigma_y/2: flip with phase +-i/2, +i when flipping down
                    1 => out[s ^ (1 << i)] += c64::new(0.0, z_at(s, i) * amp / 2.0),
                    // sigma_z/2
                    _ => out[s] += c64::new(z_at(s, i) * amp / 2.0, 0.0),
                }
            }
        }
        out
    }

    /// Collective first and second moments from the amplitudes.
    pub fn collective_moments(&self) -> Result<MomentSet> {
        let psi = self.amplitudes.mapv(|x| c64::new(x, 0.0));
        let jpsi: Vec<Array1<c64>> = (0..3).map(|axis| self.spin_apply(axis)).collect();
        let mut first = [c64::new(0.0, 0.0); 3];
        let mut second = Array2::<c64>::zeros((3, 3));
        for i in 0..3 {
            first[i] = psi.iter().zip(jpsi[i].iter()).map(|(a, b)| a.conj() * b).sum();
            for j in 0..3 {
                second[[i, j]] = jpsi[i]
                    .iter()
                    .zip(jpsi[j].iter())
                    .map(|(a, b)| a.conj() * b)
                    .sum();
            }
        }
        MomentSet::new(self.sites(), Some(self.twice_l), first, second)
    }

    /// Exact reduced density matrix of one site pair, |up> indexed first.
    pub fn pair_density(&self, j1: u32, j2: u32) -> Result<TwoQubitDensity> {
        assert!(j1 != j2, "need two distinct sites");
        let dim = self.amplitudes.len();
        let pair_index = |s: usize| -> usize {
            let b1 = 1 - (s >> j1 & 1);
            let b2 = 1 - (s >> j2 & 1);
            2 * b1 + b2
        };
        let place = |s: usize, p: usize| -> usize {
            let mut t = s & !(1usize << j1) & !(1usize << j2);
            if p & 2 == 0 {
                t |= 1 << j1;
            }
            if p & 1 == 0 {
                t |= 1 << j2;
            }
            t
        };
        let mut rho = Array2::<c64>::zeros((4, 4));
        for s in 0..dim {
            let amp = self.amplitudes[s];
            if amp == 0.0 {
                continue;
            }
            let pa = pair_index(s);
            for pb in 0..4 {
                rho[[pa, pb]] += c64::new(amp * self.amplitudes[place(s, pb)], 0.0);
            }
        }
        TwoQubitDensity::from_matrix(rho)
    }
}

/// The representative pairs (0-based): (0,1), (0, L/4), (0, L/2), deduplicated.
pub fn default_pairs(sites: u32) -> Vec<(u32, u32)> {
    let mut pairs = Vec::new();
    for j2 in [1, sites / 4, sites / 2] {
        if j2 > 0 && j2 < sites && !pairs.contains(&(0, j2)) {
            pairs.push((0, j2));
        }
    }
    pairs
}

/// Concurrence of each requested site pair, by exact partial trace.
pub fn site_resolved_concurrences(state: &EdState, pairs: &[(u32, u32)]) -> Result<Vec<f64>> {
    pairs
        .iter()
        .map(|&(a, b)| Ok(crate::measures::concurrence(&state.pair_density(a, b)?)))
        .collect()
}
