//! Constraint assembly and the sector eigensolver.
//!
//! The solver never touches wavefunctions. For a Hamiltonian H = sum_b h_b O_b
//! and a symmetry generator P = J^2, the expectation values v_a = <O_a> of an
//! energy eigenstate obey linear relations built from the structure constants
//! g_{bag}: vanishing commutators <[H, O_a]> = 0 and <[P, O_a]> = 0, the
//! symmetry eigenvalue equations <P O_a> = l(l+1) <O_a>, and the energy
//! eigenvalue equations <H O_a> = E <O_a>. Everything except the last group
//! is independent of E, so the admissible v's live in the nullspace of a
//! stacked constraint matrix K, and the energies come out of a small dense
//! eigenproblem projected into that nullspace.

mod gram;
mod solve;

use std::collections::BTreeMap;

use ndarray::prelude::*;
use num_complex::Complex64 as c64;

use crate::error::{Result, SpinbootError, Warning};
use crate::su2::{enumerate_basis, monomial_blocks, MonomialBasis, SectorBlocks};

pub use gram::{GramMatrix, MultiplicationSlice, Side};
pub use solve::{solve_sector, solve_toy_model};

/// Numerical thresholds of the sector solver. All three are relative.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// SVD nullspace cut, as a fraction of the largest singular value.
    pub tau_null: f64,
    /// Residual above which a candidate direction is discarded as spurious.
    pub tau_res: f64,
    /// Energy clustering width, as a fraction of the sector spectral width.
    pub tau_deg: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            tau_null: 1e-9,
            tau_res: 1e-7,
            tau_deg: 1e-8,
        }
    }
}

impl Tolerances {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("tau_null", self.tau_null),
            ("tau_res", self.tau_res),
            ("tau_deg", self.tau_deg),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(SpinbootError::InvalidConfig(format!(
                    "tolerance {name} must be positive and finite, got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// An operator written in the monomial basis: finitely many nonzero
/// coefficients, in the unscaled convention.
#[derive(Debug, Clone)]
pub struct OperatorExpansion {
    coeffs: BTreeMap<usize, c64>,
}

impl OperatorExpansion {
    pub fn new(coeffs: BTreeMap<usize, c64>) -> Self {
        Self { coeffs }
    }

    /// The LMG Hamiltonian
    /// H = -(1/L) [ (1+gamma)/2 Jx^2 + (1-gamma)/2 Jy^2 ] + 1/4 - hx Jx - hz Jz,
    /// exactly five nonzero coefficients.
    pub fn lmg_hamiltonian(basis: &MonomialBasis, gamma: f64, hx: f64, hz: f64) -> Result<Self> {
        let sites = f64::from(basis.sites());
        let mut coeffs = BTreeMap::new();
        for (entry, value) in [
            ([0, 0, 0], 0.25),
            ([1, 0, 0], -hx),
            ([0, 0, 1], -hz),
            ([2, 0, 0], -(1.0 + gamma) / (2.0 * sites)),
            ([0, 2, 0], -(1.0 - gamma) / (2.0 * sites)),
        ] {
            let idx = basis.idx(entry).ok_or_else(|| {
                SpinbootError::InvalidConfig(format!(
                    "basis lacks entry ({},{},{}) needed by the Hamiltonian",
                    entry[0], entry[1], entry[2]
                ))
            })?;
            coeffs.insert(idx, c64::new(value, 0.0));
        }
        Ok(Self { coeffs })
    }

    /// The Casimir J^2 = Jx^2 + Jy^2 + Jz^2.
    pub fn casimir(basis: &MonomialBasis) -> Result<Self> {
        let mut coeffs = BTreeMap::new();
        for entry in [[2, 0, 0], [0, 2, 0], [0, 0, 2]] {
            let idx = basis.idx(entry).ok_or_else(|| {
                SpinbootError::InvalidConfig(format!(
                    "basis lacks entry ({},{},{}) needed by the Casimir",
                    entry[0], entry[1], entry[2]
                ))
            })?;
            coeffs.insert(idx, c64::new(1.0, 0.0));
        }
        Ok(Self { coeffs })
    }

    pub fn coeffs(&self) -> &BTreeMap<usize, c64> {
        &self.coeffs
    }

    /// Support of the expansion: basis indices with nonzero coefficient.
    pub fn support(&self) -> impl Iterator<Item = usize> + '_ {
        self.coeffs
            .iter()
            .filter(|(_, z)| z.norm() > 0.0)
            .map(|(&i, _)| i)
    }
}

/// One bootstrap eigenstate (or degenerate cluster thereof).
#[derive(Debug, Clone)]
pub struct BootstrapSolution {
    pub energy: f64,
    /// Twice the sector label; None for the single-generator toy pipeline.
    pub twice_l: Option<u32>,
    /// Expectation values <O_a> in the unscaled convention; index 0 is 1.
    pub expectations: Array1<c64>,
    /// States sharing this energy: eigenspace_dim = multiplicity^2.
    pub multiplicity: usize,
    pub eigenspace_dim: usize,
    pub residual_commutator: f64,
    pub residual_eigen: f64,
    pub residual_symmetry: f64,
    pub warnings: Vec<Warning>,
}

/// Per-sector bookkeeping emitted next to the accepted solutions.
#[derive(Debug, Clone)]
pub struct SectorDiagnostics {
    pub twice_l: Option<u32>,
    pub expected: usize,
    /// Accepted states counted with multiplicity.
    pub accepted: usize,
    pub nullity: usize,
    pub rejected_complex: usize,
    pub rejected_residual: usize,
    pub rejected_identity: usize,
    pub gram_condition: f64,
}

impl SectorDiagnostics {
    pub fn wrong_state_count(&self) -> bool {
        self.accepted != self.expected
    }

    /// The solver-level error this sector would raise, if any.
    pub fn error(&self) -> Option<SpinbootError> {
        self.wrong_state_count().then(|| SpinbootError::WrongStateCount {
            scope: match self.twice_l {
                Some(tl) => format!("sector 2l={tl}"),
                None => "toy ladder".into(),
            },
            found: self.accepted,
            expected: self.expected,
        })
    }
}

/// Accepted solutions plus diagnostics for one sector solve.
#[derive(Debug)]
pub struct SectorOutcome {
    pub solutions: Vec<BootstrapSolution>,
    pub diagnostics: SectorDiagnostics,
}

/// Everything that depends on the basis but not on (gamma, hx, hz, l):
/// blocks, scales, the Gram matrix, and the g slices for the fixed support.
/// Build once per system size, reuse across parameter sweeps and sectors.
pub struct Workspace {
    pub basis: MonomialBasis,
    pub blocks: Vec<SectorBlocks>,
    pub scales: Vec<f64>,
    pub gram: GramMatrix,
    slices: BTreeMap<(usize, Side), Array2<c64>>,
}

impl Workspace {
    /// Workspace over the full monomial basis with slices for every operator
    /// appearing in the LMG Hamiltonian or the Casimir.
    pub fn lmg(sites: u32) -> Result<Self> {
        let basis = enumerate_basis(sites)?;
        let support: Vec<[u32; 3]> = vec![
            [0, 0, 0],
            [1, 0, 0],
            [0, 0, 1],
            [2, 0, 0],
            [0, 2, 0],
            [0, 0, 2],
        ];
        Self::build(basis, &support)
    }

    /// Workspace over the restricted basis {Jz^a : a <= L} used by the
    /// single-generator closed-form model.
    pub fn toy(sites: u32) -> Result<Self> {
        let entries = (0..=sites).map(|a| [0, 0, a]).collect();
        let basis = MonomialBasis::from_entries(sites, entries)?;
        Self::build(basis, &[[0, 0, 1]])
    }

    fn build(basis: MonomialBasis, support: &[[u32; 3]]) -> Result<Self> {
        let blocks = monomial_blocks(&basis)?;
        let scales = gram::basis_scales(&blocks);
        let gram = GramMatrix::assemble(&blocks, &scales)?;
        let mut slices = BTreeMap::new();
        for &entry in support {
            let beta = basis.idx(entry).ok_or_else(|| {
                SpinbootError::InvalidConfig(format!(
                    "slice operator ({},{},{}) is not in the basis",
                    entry[0], entry[1], entry[2]
                ))
            })?;
            if beta == 0 {
                // identity: O~_0 O~_a = (1/s_0) O~_a on either side
                let eye = Array2::<c64>::eye(basis.len()).mapv(|z| z / scales[0]);
                slices.insert((beta, Side::Left), eye.clone());
                slices.insert((beta, Side::Right), eye);
                continue;
            }
            let c_left = gram::triple_trace_left(&blocks, &scales, beta);
            // right-side traces are the transpose by cyclicity
            let g_left = gram.solve_rows(&c_left)?;
            let g_right = gram.solve_rows(&c_left.t().to_owned())?;
            slices.insert((beta, Side::Left), g_left);
            slices.insert((beta, Side::Right), g_right);
        }
        Ok(Self {
            basis,
            blocks,
            scales,
            gram,
            slices,
        })
    }

    /// The rescaled slice matrix, as used internally.
    pub(crate) fn scaled_slice(&self, beta: usize, side: Side) -> Result<&Array2<c64>> {
        self.slices.get(&(beta, side)).ok_or_else(|| {
            SpinbootError::InvalidConfig(format!("no slice materialized for beta={beta}"))
        })
    }

    /// One slice of the structure constants in the unscaled convention:
    /// matrix[a, g] satisfies O_b O_a = sum_g matrix[a, g] O_g (left side).
    pub fn multiplication_slice(&self, beta: usize, side: Side) -> Result<MultiplicationSlice> {
        let scaled = self.scaled_slice(beta, side)?;
        let n = self.basis.len();
        let mut matrix = Array2::<c64>::zeros((n, n));
        for a in 0..n {
            for g in 0..n {
                matrix[[a, g]] =
                    scaled[[a, g]] * self.scales[a] * self.scales[beta] / self.scales[g];
            }
        }
        Ok(MultiplicationSlice {
            beta,
            side,
            matrix,
        })
    }

    /// Scaled coefficient vector of an expansion: h~_b = h_b s_b.
    fn scaled_coeffs(&self, op: &OperatorExpansion) -> Vec<(usize, c64)> {
        op.coeffs()
            .iter()
            .filter(|(_, z)| z.norm() > 0.0)
            .map(|(&b, &z)| (b, z * self.scales[b]))
            .collect()
    }
}

/// The E-independent constraint matrix K and the energy-equation matrix A
/// for one sector, in the rescaled convention.
pub struct SectorConstraints {
    /// A[a, g] = sum_b h~_b g~_{bag}; the eigenvalue equation is A u = E u.
    pub a: Array2<c64>,
    /// Commutator rows of the Hamiltonian.
    pub k_hamiltonian: Array2<c64>,
    /// Commutator and eigenvalue rows of the symmetry generator; empty
    /// (zero rows) when no generator is supplied.
    pub k_symmetry: Array2<c64>,
}

impl SectorConstraints {
    /// All constraint rows stacked.
    pub fn stacked(&self) -> Array2<c64> {
        if self.k_symmetry.nrows() == 0 {
            return self.k_hamiltonian.clone();
        }
        ndarray::concatenate(
            Axis(0),
            &[self.k_hamiltonian.view(), self.k_symmetry.view()],
        )
        .expect("constraint stacking")
    }
}

/// Builds A and K from the workspace slices. `symmetry` carries the
/// generator expansion and its eigenvalue P = l(l+1); pass None to impose
/// only the Hamiltonian constraints.
///
/// All rows of K are independent of E: the Hamiltonian commutator rows
/// sum_b h_b (g_{bag} - g_{abg}), the symmetry commutator rows with p, and
/// the symmetry eigenvalue rows sum_b p_b g_{bag} - P delta_{ag}.
pub fn assemble_sector_constraints(
    ws: &Workspace,
    h: &OperatorExpansion,
    symmetry: Option<(&OperatorExpansion, f64)>,
) -> Result<SectorConstraints> {
    let n = ws.basis.len();
    let mut a = Array2::<c64>::zeros((n, n));
    let mut k_h = Array2::<c64>::zeros((n, n));
    for (beta, hb) in ws.scaled_coeffs(h) {
        let left = ws.scaled_slice(beta, Side::Left)?;
        let right = ws.scaled_slice(beta, Side::Right)?;
        a.zip_mut_with(left, |acc, &g| *acc += hb * g);
        k_h.zip_mut_with(left, |acc, &g| *acc += hb * g);
        k_h.zip_mut_with(right, |acc, &g| *acc -= hb * g);
    }
    let k_symmetry = match symmetry {
        None => Array2::<c64>::zeros((0, n)),
        Some((p, eigenvalue)) => {
            let mut k_pc = Array2::<c64>::zeros((n, n));
            let mut k_pe = Array2::<c64>::eye(n).mapv(|z| z * c64::new(-eigenvalue, 0.0));
            for (beta, pb) in ws.scaled_coeffs(p) {
                let left = ws.scaled_slice(beta, Side::Left)?;
                let right = ws.scaled_slice(beta, Side::Right)?;
                k_pc.zip_mut_with(left, |acc, &g| *acc += pb * g);
                k_pc.zip_mut_with(right, |acc, &g| *acc -= pb * g);
                k_pe.zip_mut_with(left, |acc, &g| *acc += pb * g);
            }
            ndarray::concatenate(Axis(0), &[k_pc.view(), k_pe.view()])
                .expect("symmetry stacking")
        }
    };
    Ok(SectorConstraints {
        a,
        k_hamiltonian: k_h,
        k_symmetry,
    })
}
