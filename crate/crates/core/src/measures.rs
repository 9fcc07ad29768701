//! Entanglement measures from collective-spin moments.
//!
//! Everything here is derived from first and second moments of (Jx, Jy, Jz)
//! alone: the two-site reduced density matrix of a permutation-symmetric
//! state, Wootters concurrence, the one-vs-rest tangle and its entropy, the
//! monogamy residual, and quantum Fisher information with producibility
//! bounds. No wavefunction ever enters.

use ndarray::linalg::kron;
use ndarray::{array, Array2};
use ndarray_linalg::{Eig, Eigh, UPLO};
use num_complex::Complex64 as c64;

use crate::engine::BootstrapSolution;
use crate::error::{Result, SpinbootError, Warning};
use crate::su2::MonomialBasis;

/// How far off a moment vector may be from exact hermiticity before it is
/// rejected as a bad solution rather than tolerated as roundoff.
const HERMITICITY_REJECT: f64 = 1e-4;

/// First and second moments of the collective spin for one eigenstate.
#[derive(Debug, Clone)]
pub struct MomentSet {
    sites: u32,
    twice_l: Option<u32>,
    first: [f64; 3],
    /// 3x3 with entry (i,j) = <J_i J_j> in operator order i then j.
    second: Array2<c64>,
    hermiticity_residual: f64,
}

impl MomentSet {
    /// Validates the hermiticity structure of raw moment data.
    ///
    /// Checked: first moments and diagonal second moments real; off-diagonal
    /// pairs adjoint-conjugate; imaginary parts of the off-diagonals equal to
    /// the commutator values (Im<JxJy> = <Jz>/2 and cyclic); the diagonal sum
    /// equal to l(l+1) when the sector is known. The worst deviation is kept
    /// as a diagnostic and rejects the data beyond `HERMITICITY_REJECT`.
    pub fn new(
        sites: u32,
        twice_l: Option<u32>,
        first: [c64; 3],
        second: Array2<c64>,
    ) -> Result<Self> {
        assert_eq!(second.dim(), (3, 3));
        let mut residual: f64 = 0.0;
        for z in &first {
            residual = residual.max(z.im.abs());
        }
        for i in 0..3 {
            residual = residual.max(second[[i, i]].im.abs());
        }
        for i in 0..3 {
            for j in (i + 1)..3 {
                residual = residual.max((second[[i, j]] - second[[j, i]].conj()).norm());
            }
        }
        // [J_i, J_j] = i e_ijk J_k fixes every off-diagonal imaginary part
        let comm = [
            (0, 1, first[2].re / 2.0),
            (1, 2, first[0].re / 2.0),
            (0, 2, -first[1].re / 2.0),
        ];
        for (i, j, want) in comm {
            residual = residual.max((second[[i, j]].im - want).abs());
        }
        if let Some(tl) = twice_l {
            let l = f64::from(tl) / 2.0;
            let trace: f64 = (0..3).map(|i| second[[i, i]].re).sum();
            residual = residual.max((trace - l * (l + 1.0)).abs());
        }
        if residual > HERMITICITY_REJECT {
            return Err(SpinbootError::HermiticityViolated { residual });
        }
        Ok(Self {
            sites,
            twice_l,
            first: [first[0].re, first[1].re, first[2].re],
            second,
            hermiticity_residual: residual,
        })
    }

    pub fn sites(&self) -> u32 {
        self.sites
    }

    pub fn twice_l(&self) -> Option<u32> {
        self.twice_l
    }

    /// (<Jx>, <Jy>, <Jz>), imaginary parts already discarded.
    pub fn first(&self) -> [f64; 3] {
        self.first
    }

    pub fn second(&self) -> &Array2<c64> {
        &self.second
    }

    pub fn hermiticity_residual(&self) -> f64 {
        self.hermiticity_residual
    }

    /// Uniform average over a degenerate cluster.
    ///
    /// Basis independent, so it can be compared across solvers whose
    /// individual degenerate eigenvectors are arbitrary. All sets must share
    /// the system size and sector label.
    pub fn average(sets: &[MomentSet]) -> Result<MomentSet> {
        let head = sets.first().ok_or_else(|| {
            SpinbootError::InvalidConfig("cannot average an empty moment cluster".into())
        })?;
        for m in sets {
            if m.sites != head.sites || m.twice_l != head.twice_l {
                return Err(SpinbootError::InvalidConfig(
                    "moment cluster mixes system sizes or sectors".into(),
                ));
            }
        }
        let weight = 1.0 / sets.len() as f64;
        let mut first = [c64::new(0.0, 0.0); 3];
        let mut second = Array2::<c64>::zeros((3, 3));
        for m in sets {
            for (acc, v) in first.iter_mut().zip(&m.first) {
                *acc += weight * *v;
            }
            second.scaled_add(c64::new(weight, 0.0), &m.second);
        }
        MomentSet::new(head.sites, head.twice_l, first, second)
    }
}

/// Extracts the nine moments a solved expectation vector determines.
pub fn moments_from_solution(
    basis: &MonomialBasis,
    solution: &BootstrapSolution,
) -> Result<MomentSet> {
    let at = |entry: [u32; 3]| -> Result<c64> {
        let idx = basis.idx(entry).ok_or_else(|| {
            SpinbootError::InvalidConfig(format!(
                "basis lacks entry ({},{},{}) needed for moment extraction",
                entry[0], entry[1], entry[2]
            ))
        })?;
        Ok(solution.expectations[idx])
    };
    let first = [at([1, 0, 0])?, at([0, 1, 0])?, at([0, 0, 1])?];
    let xy = at([1, 1, 0])?;
    let xz = at([1, 0, 1])?;
    let yz = at([0, 1, 1])?;
    let second = array![
        [at([2, 0, 0])?, xy, xz],
        [xy.conj(), at([0, 2, 0])?, yz],
        [xz.conj(), yz.conj(), at([0, 0, 2])?],
    ];
    MomentSet::new(basis.sites(), solution.twice_l, first, second)
}

/// The identity and the three Pauli matrices, in witness index order.
pub fn pauli() -> [Array2<c64>; 4] {
    let o = c64::new(0.0, 0.0);
    let e = c64::new(1.0, 0.0);
    let i = c64::new(0.0, 1.0);
    [
        array![[e, o], [o, e]],
        array![[o, e], [e, o]],
        array![[o, -i], [i, o]],
        array![[e, o], [o, -e]],
    ]
}

/// Reduced state of one site pair, reconstructed from collective moments.
#[derive(Debug, Clone)]
pub struct TwoQubitDensity {
    /// Coefficients of rho = sum f_ab sigma^a x sigma^b; symmetric, f[0][0] = 1/4.
    f: [[f64; 4]; 4],
    rho: Array2<c64>,
    min_eigenvalue: f64,
}

impl TwoQubitDensity {
    fn assemble(f: [[f64; 4]; 4]) -> Result<Self> {
        let sigma = pauli();
        let mut rho = Array2::<c64>::zeros((4, 4));
        for (a, row) in f.iter().enumerate() {
            for (b, &coeff) in row.iter().enumerate() {
                if coeff != 0.0 {
                    rho.scaled_add(c64::new(coeff, 0.0), &kron(&sigma[a], &sigma[b]));
                }
            }
        }
        let evals = rho.eigh(UPLO::Lower)?.0;
        Ok(Self {
            f,
            rho,
            min_eigenvalue: evals[0],
        })
    }

    /// Wraps an explicitly given density matrix, recovering the Pauli table.
    pub fn from_matrix(rho: Array2<c64>) -> Result<Self> {
        assert_eq!(rho.dim(), (4, 4));
        let trace = rho.diag().sum();
        if (trace - c64::new(1.0, 0.0)).norm() > 1e-10 {
            return Err(SpinbootError::InvalidConfig(format!(
                "density matrix trace {trace} is not 1"
            )));
        }
        let herm = (&rho - &rho.t().mapv(|z| z.conj()))
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max);
        if herm > 1e-10 {
            return Err(SpinbootError::HermiticityViolated { residual: herm });
        }
        let sigma = pauli();
        let mut f = [[0.0; 4]; 4];
        for (a, fa) in f.iter_mut().enumerate() {
            for (b, fab) in fa.iter_mut().enumerate() {
                let basis_op = kron(&sigma[a], &sigma[b]);
                *fab = basis_op.dot(&rho).diag().sum().re / 4.0;
            }
        }
        let evals = rho.eigh(UPLO::Lower)?.0;
        Ok(Self {
            f,
            rho,
            min_eigenvalue: evals[0],
        })
    }

    pub fn f(&self) -> &[[f64; 4]; 4] {
        &self.f
    }

    pub fn rho(&self) -> &Array2<c64> {
        &self.rho
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.min_eigenvalue
    }

    /// Mild negativity worth surfacing in output rows.
    pub fn positivity_warning(&self) -> Option<Warning> {
        (self.min_eigenvalue < -1e-8).then_some(Warning::NonPhysicalRdm)
    }

    /// Hard negativity: the assumed symmetric superposition does not exist.
    pub fn check_physical(&self) -> Result<()> {
        if self.min_eigenvalue < -1e-6 {
            return Err(SpinbootError::NonPhysicalDensity {
                min_eigenvalue: self.min_eigenvalue,
            });
        }
        Ok(())
    }
}

/// Two-site reduced density matrix of a permutation-symmetric state.
///
/// For sectors with l < L/2 this presumes a symmetric superposition of the
/// degenerate copies exists; callers flag such states and the positivity
/// diagnostic catches the cases where the presumption fails.
pub fn two_qubit_rdm(m: &MomentSet) -> Result<TwoQubitDensity> {
    if m.sites < 2 {
        return Err(SpinbootError::InvalidConfig(format!(
            "two-qubit reduction needs at least 2 sites, got {}",
            m.sites
        )));
    }
    let l = f64::from(m.sites);
    let pair = l * (l - 1.0);
    let half_i = c64::new(0.0, 0.5);
    let mut f = [[0.0; 4]; 4];
    f[0][0] = 0.25;
    for i in 0..3 {
        f[0][i + 1] = m.first[i] / (2.0 * l);
        f[i + 1][0] = f[0][i + 1];
        f[i + 1][i + 1] = (m.second[[i, i]].re / l - 0.25) / (l - 1.0);
    }
    // symmetrized products: subtracting the commutator half leaves the real part
    f[1][2] = ((m.second[[0, 1]] - half_i * m.first[2]) / pair).re;
    f[1][3] = ((m.second[[0, 2]] + half_i * m.first[1]) / pair).re;
    f[2][3] = ((m.second[[1, 2]] - half_i * m.first[0]) / pair).re;
    f[2][1] = f[1][2];
    f[3][1] = f[1][3];
    f[3][2] = f[2][3];
    TwoQubitDensity::assemble(f)
}

/// Wootters concurrence of a two-qubit state.
///
/// Uses the eigenvalues of rho (sy x sy) rho* (sy x sy), whose square roots
/// coincide with the spectrum of the usual square-root operator; conjugation
/// is entrywise, i.e. in the sigma_z eigenbasis.
pub fn concurrence(density: &TwoQubitDensity) -> f64 {
    let sigma = pauli();
    let yy = kron(&sigma[2], &sigma[2]);
    let rho_c = density.rho.mapv(|z| z.conj());
    let product = density.rho.dot(&yy).dot(&rho_c).dot(&yy);
    let (evals, _) = product.eig().expect("4x4 eigensolve");
    let mut lambda: Vec<f64> = evals.iter().map(|z| z.re.max(0.0).sqrt()).collect();
    lambda.sort_by(|a, b| b.partial_cmp(a).unwrap());
    (lambda[0] - lambda[1] - lambda[2] - lambda[3]).max(0.0)
}

/// One-vs-rest tangle tau = 1 - (4/L^2) sum_i <J_i>^2, clamped to [0, 1].
pub fn tangle(m: &MomentSet) -> f64 {
    let l = f64::from(m.sites);
    let norm2: f64 = m.first.iter().map(|x| x * x).sum();
    (1.0 - 4.0 * norm2 / (l * l)).clamp(0.0, 1.0)
}

/// Entanglement entropy of one site against the rest, in natural log units.
pub fn entropy_from_tangle(tau: f64) -> Result<f64> {
    if !(-1e-9..=1.0 + 1e-9).contains(&tau) {
        return Err(SpinbootError::InvalidConfig(format!(
            "tangle {tau} outside [0, 1]"
        )));
    }
    let x = (1.0 + (1.0 - tau.clamp(0.0, 1.0)).sqrt()) / 2.0;
    let mut s = 0.0;
    for p in [x, 1.0 - x] {
        if p > 0.0 {
            s -= p * p.ln();
        }
    }
    Ok(s)
}

/// Monogamy residual dtau = tau - (L-1) C^2.
///
/// Non-negative for any genuine symmetric state; a violation beyond noise
/// marks a pseudo-state whose assumed symmetrization does not exist.
pub fn residual_tangle(tau: f64, concurrence: f64, sites: u32) -> Result<f64> {
    let delta_tau = tau - f64::from(sites - 1) * concurrence * concurrence;
    if delta_tau < -1e-6 {
        return Err(SpinbootError::CkwViolated { delta_tau });
    }
    Ok(delta_tau)
}

/// Quantum Fisher information along the axes and over all directions.
#[derive(Debug, Clone)]
pub struct QfiReport {
    pub f_x: f64,
    pub f_y: f64,
    pub f_z: f64,
    pub f_sum: f64,
    pub f_max: f64,
    /// Unit vector realizing f_max; sign fixed by its largest component.
    pub direction: [f64; 3],
    /// Witnessed entanglement depth: 1 + the largest k whose producibility
    /// bound is exceeded, or 1.
    pub depth: u32,
}

/// Pure-state QFI from the covariance matrix of (Jx, Jy, Jz).
///
/// F_n = 4 n^T Gamma n is maximized exactly by the top eigenvector of Gamma,
/// so no angular scan is involved.
pub fn qfi(m: &MomentSet) -> QfiReport {
    let mut gamma = Array2::<f64>::zeros((3, 3));
    for i in 0..3 {
        for j in 0..3 {
            let sym = (m.second[[i, j]].re + m.second[[j, i]].re) / 2.0;
            gamma[[i, j]] = sym - m.first[i] * m.first[j];
        }
    }
    let (evals, evecs) = gamma.eigh(UPLO::Lower).expect("3x3 symmetric eigensolve");
    let f_max = (4.0 * evals[2]).max(0.0);
    let mut direction = [evecs[[0, 2]], evecs[[1, 2]], evecs[[2, 2]]];
    let lead = (0..3).max_by(|&a, &b| {
        direction[a]
            .abs()
            .partial_cmp(&direction[b].abs())
            .unwrap()
    });
    if let Some(lead) = lead {
        if direction[lead] < 0.0 {
            for d in &mut direction {
                *d = -*d;
            }
        }
    }
    let f_axis = [
        (4.0 * gamma[[0, 0]]).max(0.0),
        (4.0 * gamma[[1, 1]]).max(0.0),
        (4.0 * gamma[[2, 2]]).max(0.0),
    ];
    let f_sum = f_axis.iter().sum();
    let mut depth = 1;
    for k in 1..m.sites {
        let (bound_max, bound_sum) = producibility_bounds(m.sites, k).expect("k in range");
        let exceeds = |f: f64, bound: f64| f > bound + 1e-9 * (1.0 + bound);
        if exceeds(f_max, bound_max) || exceeds(f_sum, bound_sum) {
            depth = k + 1;
        }
    }
    QfiReport {
        f_x: f_axis[0],
        f_y: f_axis[1],
        f_z: f_axis[2],
        f_sum,
        f_max,
        direction,
        depth,
    }
}

/// Largest (F_max, F_sum) a k-producible state can reach on L sites.
///
/// Partitions L = nk + r and fills n blocks of size k plus one of size r;
/// the k = 1 bounds are the separable ones (L, 2L), and a leftover block of
/// one site contributes 2 rather than r(r+2) to the sum bound.
pub fn producibility_bounds(sites: u32, k: u32) -> Result<(f64, f64)> {
    if k < 1 || k > sites {
        return Err(SpinbootError::InvalidConfig(format!(
            "producibility block size {k} outside [1, {sites}]"
        )));
    }
    let l = f64::from(sites);
    if k == 1 {
        return Ok((l, 2.0 * l));
    }
    let n = f64::from(sites / k);
    let k = f64::from(k);
    let r = l - n * k;
    let bound_max = n * k * k + r * r;
    let bound_sum = n * k * (k + 2.0) + if r == 1.0 { 2.0 } else { r * (r + 2.0) };
    Ok((bound_max, bound_sum))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{solve_sector, Tolerances, Workspace};
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> c64 {
        c64::new(re, im)
    }

    /// |l, l> with l = L/2: first = (0, 0, L/2), diag second = (L/4, L/4, L^2/4).
    fn polarized(sites: u32) -> MomentSet {
        let l = f64::from(sites);
        let first = [c(0.0, 0.0), c(0.0, 0.0), c(l / 2.0, 0.0)];
        let second = array![
            [c(l / 4.0, 0.0), c(0.0, l / 4.0), c(0.0, 0.0)],
            [c(0.0, -l / 4.0), c(l / 4.0, 0.0), c(0.0, 0.0)],
            [c(0.0, 0.0), c(0.0, 0.0), c(l * l / 4.0, 0.0)],
        ];
        MomentSet::new(sites, Some(sites), first, second).unwrap()
    }

    #[test]
    fn polarized_state_is_a_product_state() {
        let m = polarized(4);
        let rdm = two_qubit_rdm(&m).unwrap();
        assert!((rdm.rho()[[0, 0]] - c(1.0, 0.0)).norm() < 1e-12);
        for i in 0..4 {
            for j in 0..4 {
                if (i, j) != (0, 0) {
                    assert!(rdm.rho()[[i, j]].norm() < 1e-12);
                }
            }
        }
        assert!(rdm.min_eigenvalue() > -1e-12);
        assert!(rdm.positivity_warning().is_none());
        assert!(concurrence(&rdm) < 1e-10);
        assert!(tangle(&m) < 1e-12);
        let q = qfi(&m);
        assert!((q.f_z).abs() < 1e-12);
        assert!((q.f_x - 4.0).abs() < 1e-12);
        assert!((q.f_y - 4.0).abs() < 1e-12);
        assert!((q.f_max - 4.0).abs() < 1e-12);
        assert!((q.f_sum - 8.0).abs() < 1e-12);
        assert_eq!(q.depth, 1);
    }

    #[test]
    fn maximally_mixed_moments_give_identity_rdm() {
        let l = 2.0;
        let first = [c(0.0, 0.0); 3];
        let mut second = Array2::<c64>::zeros((3, 3));
        for i in 0..3 {
            second[[i, i]] = c(l / 4.0, 0.0);
        }
        let m = MomentSet::new(2, None, first, second).unwrap();
        let rdm = two_qubit_rdm(&m).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let want = if i == j { 0.25 } else { 0.0 };
                assert!((rdm.rho()[[i, j]] - c(want, 0.0)).norm() < 1e-12);
            }
        }
        assert!(concurrence(&rdm) < 1e-10);
    }

    #[test]
    fn bell_pair_moments_give_unit_concurrence() {
        // the Dicke state |1, 0> on two sites is (|ud> + |du>)/sqrt(2)
        let first = [c(0.0, 0.0); 3];
        let second = array![
            [c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)],
            [c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)],
            [c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)],
        ];
        let m = MomentSet::new(2, Some(2), first, second).unwrap();
        let rdm = two_qubit_rdm(&m).unwrap();
        assert!((rdm.f()[1][1] - 0.25).abs() < 1e-12);
        assert!((rdm.f()[3][3] + 0.25).abs() < 1e-12);
        assert!((concurrence(&rdm) - 1.0).abs() < 1e-10);
        assert!((tangle(&m) - 1.0).abs() < 1e-12);
        // tau = 1, C = 1, L = 2: monogamy is saturated
        let dt = residual_tangle(1.0, 1.0, 2).unwrap();
        assert!(dt.abs() < 1e-12);
    }

    #[test]
    fn w_state_saturates_monogamy() {
        let tau = 1.0 - (4.0 / 9.0) * 0.25;
        let c_val = 2.0 / 3.0;
        let dt = residual_tangle(tau, c_val, 3).unwrap();
        assert!(dt.abs() < 1e-12, "dtau = {dt}");
        assert!(residual_tangle(0.0, 0.5, 3).is_err());
    }

    #[test]
    fn ghz_moments_witness_full_depth() {
        let sites = 4;
        let l = f64::from(sites);
        let first = [c(0.0, 0.0); 3];
        let mut second = Array2::<c64>::zeros((3, 3));
        second[[0, 0]] = c(l / 4.0, 0.0);
        second[[1, 1]] = c(l / 4.0, 0.0);
        second[[2, 2]] = c(l * l / 4.0, 0.0);
        let m = MomentSet::new(sites, Some(sites), first, second).unwrap();
        let q = qfi(&m);
        assert!((q.f_max - l * l).abs() < 1e-12);
        assert!((q.f_sum - (l * l + 2.0 * l)).abs() < 1e-12);
        assert_eq!(q.depth, sites);
        assert!((q.direction[2] - 1.0).abs() < 1e-12);
        assert!((tangle(&m) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn entropy_closed_forms() {
        assert!(entropy_from_tangle(0.0).unwrap().abs() < 1e-14);
        assert!((entropy_from_tangle(1.0).unwrap() - 2.0_f64.ln()).abs() < 1e-14);
        let want = -0.75 * 0.75_f64.ln() - 0.25 * 0.25_f64.ln();
        assert!((entropy_from_tangle(0.75).unwrap() - want).abs() < 1e-14);
        assert!(entropy_from_tangle(1.1).is_err());
        assert!(entropy_from_tangle(-0.1).is_err());
    }

    #[test]
    fn producibility_bound_examples() {
        assert_eq!(producibility_bounds(4, 1).unwrap(), (4.0, 8.0));
        assert_eq!(producibility_bounds(4, 2).unwrap(), (8.0, 16.0));
        assert_eq!(producibility_bounds(5, 2).unwrap(), (9.0, 18.0));
        assert_eq!(producibility_bounds(4, 4).unwrap(), (16.0, 24.0));
        assert!(producibility_bounds(4, 0).is_err());
        assert!(producibility_bounds(4, 5).is_err());
    }

    #[test]
    fn producibility_bounds_grow_with_block_size() {
        for sites in 2..=24u32 {
            let mut prev = producibility_bounds(sites, 1).unwrap();
            for k in 2..=sites {
                let cur = producibility_bounds(sites, k).unwrap();
                assert!(
                    cur.0 >= prev.0 - 1e-12 && cur.1 >= prev.1 - 1e-12,
                    "L={sites} k={k}: {prev:?} -> {cur:?}"
                );
                prev = cur;
            }
        }
    }

    #[test]
    fn hermiticity_gate_rejects_corrupt_moments() {
        let first = [c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)];
        let mut second = Array2::<c64>::zeros((3, 3));
        second[[0, 0]] = c(0.5, 0.0);
        second[[1, 1]] = c(0.5, 0.0);
        second[[2, 2]] = c(1.0, 0.0);
        // Im<JxJy> should be <Jz>/2 = 0.5, make it wildly wrong
        second[[0, 1]] = c(0.0, 0.4);
        second[[1, 0]] = c(0.0, -0.4);
        let err = MomentSet::new(2, Some(2), first, second).unwrap_err();
        assert!(matches!(
            err,
            SpinbootError::HermiticityViolated { residual } if residual > 0.09
        ));
    }

    fn random_density(rng: &mut ChaCha8Rng, dim: usize) -> Array2<c64> {
        let a = Array2::from_shape_fn((dim, dim), |_| {
            c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        });
        let rho = a.dot(&a.t().mapv(|z| z.conj()));
        let tr = rho.diag().sum();
        rho.mapv(|z| z / tr)
    }

    fn sqrt_psd(m: &Array2<c64>) -> Array2<c64> {
        // this eigh returns V with m . conj(V_col) = w conj(V_col)
        let (evals, evecs) = m.eigh(UPLO::Lower).unwrap();
        let mut out = Array2::<c64>::zeros(m.dim());
        for (k, &lam) in evals.iter().enumerate() {
            let u: Vec<c64> = evecs.column(k).iter().map(|z| z.conj()).collect();
            let s = lam.max(0.0).sqrt();
            for i in 0..m.nrows() {
                for j in 0..m.ncols() {
                    out[[i, j]] += c(s, 0.0) * u[i] * u[j].conj();
                }
            }
        }
        out
    }

    #[test]
    fn concurrence_matches_square_root_operator_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let sigma = pauli();
        let yy = kron(&sigma[2], &sigma[2]);
        for _ in 0..200 {
            let rho = random_density(&mut rng, 4);
            let rho_tilde = yy.dot(&rho.mapv(|z| z.conj())).dot(&yy);

            let product = rho.dot(&rho_tilde);
            let (evals, _) = product.eig().unwrap();
            let mut fast: Vec<f64> = evals.iter().map(|z| z.re.max(0.0).sqrt()).collect();
            fast.sort_by(|a, b| b.partial_cmp(a).unwrap());

            let root = sqrt_psd(&rho);
            let inner = root.dot(&rho_tilde).dot(&root);
            let (herm_evals, _) = inner.eigh(UPLO::Lower).unwrap();
            let mut slow: Vec<f64> = herm_evals.iter().map(|x| x.max(0.0).sqrt()).collect();
            slow.sort_by(|a, b| b.partial_cmp(a).unwrap());

            for (a, b) in fast.iter().zip(&slow) {
                assert!((a - b).abs() < 1e-8, "{fast:?} vs {slow:?}");
            }
            let direct = concurrence(&TwoQubitDensity::from_matrix(rho).unwrap());
            let from_slow = (slow[0] - slow[1] - slow[2] - slow[3]).max(0.0);
            assert!((direct - from_slow).abs() < 1e-8);
        }
    }

    fn random_moments(rng: &mut ChaCha8Rng, sites: u32) -> MomentSet {
        let l = f64::from(sites);
        let first: Vec<f64> = (0..3).map(|_| rng.random_range(-0.2..0.2) * l).collect();
        // random PSD covariance, scaled to stay physical-looking
        let a = Array2::from_shape_fn((3, 3), |_| rng.random_range(-1.0..1.0));
        let gamma = a.dot(&a.t()).mapv(|x| x * l / 6.0);
        let mut second = Array2::<c64>::zeros((3, 3));
        let comm = [[0.0, first[2], -first[1]], [
            -first[2], 0.0, first[0],
        ], [first[1], -first[0], 0.0]];
        for i in 0..3 {
            for j in 0..3 {
                second[[i, j]] = c(
                    gamma[[i, j]] + first[i] * first[j],
                    comm[i][j] / 2.0,
                );
            }
        }
        let first_c = [c(first[0], 0.0), c(first[1], 0.0), c(first[2], 0.0)];
        MomentSet::new(sites, None, first_c, second).unwrap()
    }

    #[test]
    fn angular_scan_never_beats_eigenvalue_f_max() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let m = random_moments(&mut rng, 6);
            let q = qfi(&m);
            let mut gamma = Array2::<f64>::zeros((3, 3));
            for i in 0..3 {
                for j in 0..3 {
                    gamma[[i, j]] = m.second()[[i, j]].re - m.first()[i] * m.first()[j];
                }
            }
            let mut best = 0.0_f64;
            for ti in 0..180 {
                let theta = std::f64::consts::PI * (ti as f64 + 0.5) / 180.0;
                for pi_ in 0..360 {
                    let phi = 2.0 * std::f64::consts::PI * (pi_ as f64) / 360.0;
                    let n = [
                        theta.sin() * phi.cos(),
                        theta.sin() * phi.sin(),
                        theta.cos(),
                    ];
                    let mut v = 0.0;
                    for i in 0..3 {
                        for j in 0..3 {
                            v += n[i] * gamma[[i, j]] * n[j];
                        }
                    }
                    best = best.max(4.0 * v);
                }
            }
            assert!(best <= q.f_max + 1e-6, "scan {best} > eigen {}", q.f_max);
            // and the reported direction realizes the maximum
            let mut v = 0.0;
            for i in 0..3 {
                for j in 0..3 {
                    v += q.direction[i] * gamma[[i, j]] * q.direction[j];
                }
            }
            assert!((4.0 * v - q.f_max).abs() < 1e-9);
        }
    }

    #[test]
    fn tangle_agrees_with_single_qubit_determinant() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..100 {
            let mut r = [0.0; 3];
            loop {
                for x in &mut r {
                    *x = rng.random_range(-1.0..1.0);
                }
                if r.iter().map(|x| x * x).sum::<f64>() <= 1.0 {
                    break;
                }
            }
            let det4 = 1.0 - r.iter().map(|x| x * x).sum::<f64>();
            let first = [c(r[0] / 2.0, 0.0), c(r[1] / 2.0, 0.0), c(r[2] / 2.0, 0.0)];
            let mut second = Array2::<c64>::zeros((3, 3));
            for i in 0..3 {
                second[[i, i]] = c(0.25, 0.0);
            }
            second[[0, 1]] = c(0.0, r[2] / 4.0);
            second[[1, 0]] = c(0.0, -r[2] / 4.0);
            second[[1, 2]] = c(0.0, r[0] / 4.0);
            second[[2, 1]] = c(0.0, -r[0] / 4.0);
            second[[0, 2]] = c(0.0, -r[1] / 4.0);
            second[[2, 0]] = c(0.0, r[1] / 4.0);
            let m = MomentSet::new(1, Some(1), first, second).unwrap();
            assert!((tangle(&m) - det4).abs() < 1e-10);
        }
    }

    #[test]
    fn two_site_spectrum_measures_match_exact_references() {
        let ws = Workspace::lmg(2).unwrap();
        let out = solve_sector(&ws, 1.0, 1.0, 1.0, 2, &Tolerances::default()).unwrap();
        assert_eq!(out.solutions.len(), 3);
        // reference values from an independent dense diagonalization
        let want = [
            // (E, C, tau, S, Fx, Fy, Fz, Fmax, depth)
            (
                -1.5630990343,
                0.0614766087,
                0.0037793734,
                0.0075309782,
                0.7403195627,
                1.8770467827,
                1.3977511483,
                2.1229532173,
                2,
            ),
            (
                -0.0075690236,
                0.9395553565,
                0.8827642882,
                0.6333266224,
                1.9291252200,
                3.8791107346,
                1.7228211982,
                3.8791107346,
                2,
            ),
            (
                1.3206680578,
                0.1219212407,
                0.0148647891,
                0.0245793796,
                1.2178791609,
                2.2438424828,
                0.5977375127,
                2.2438424828,
                2,
            ),
        ];
        for (sol, w) in out.solutions.iter().zip(&want) {
            assert!((sol.energy - w.0).abs() < 1e-9);
            let m = moments_from_solution(&ws.basis, sol).unwrap();
            assert!(m.hermiticity_residual() < 1e-10);
            let rdm = two_qubit_rdm(&m).unwrap();
            rdm.check_physical().unwrap();
            let c_val = concurrence(&rdm);
            let tau = tangle(&m);
            let s = entropy_from_tangle(tau).unwrap();
            let dt = residual_tangle(tau, c_val, 2).unwrap();
            let q = qfi(&m);
            assert!((c_val - w.1).abs() < 1e-8, "C at E={}", sol.energy);
            assert!((tau - w.2).abs() < 1e-8);
            assert!((s - w.3).abs() < 1e-8);
            assert!(dt.abs() < 1e-6);
            assert!((q.f_x - w.4).abs() < 1e-8);
            assert!((q.f_y - w.5).abs() < 1e-8);
            assert!((q.f_z - w.6).abs() < 1e-8);
            assert!((q.f_max - w.7).abs() < 1e-8);
            assert!((q.f_sum - (q.f_x + q.f_y + q.f_z)).abs() < 1e-9);
            assert_eq!(q.depth, w.8);
        }
    }

    #[test]
    fn moment_extraction_reads_the_right_entries() {
        let ws = Workspace::lmg(2).unwrap();
        let out = solve_sector(&ws, 1.0, 1.0, 1.0, 2, &Tolerances::default()).unwrap();
        let m = moments_from_solution(&ws.basis, &out.solutions[0]).unwrap();
        assert!((m.first()[0] - 0.8083751347).abs() < 1e-8);
        assert!(m.first()[1].abs() < 1e-10);
        assert!((m.first()[2] - 0.5854487751).abs() < 1e-8);
        assert_eq!(m.twice_l(), Some(2));
        assert_eq!(m.sites(), 2);
        // Casimir row: diagonal of second sums to l(l+1) = 2
        let tr: f64 = (0..3).map(|i| m.second()[[i, i]].re).sum();
        assert!((tr - 2.0).abs() < 1e-10);
    }
}
