//! The sector eigensolver: nullspace projection, a small dense
//! eigenproblem, eigenpair polish, and degenerate-cluster extraction.

use ndarray::prelude::*;
use ndarray_linalg::{Eig, Factorize, Solve, SVD};
use num_complex::Complex64 as c64;

use crate::error::{Result, SpinbootError, Warning};

use super::{
    assemble_sector_constraints, BootstrapSolution, OperatorExpansion, SectorConstraints,
    SectorDiagnostics, SectorOutcome, Tolerances, Workspace,
};

fn fro_norm(a: &Array2<c64>) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn vec_norm(v: &Array1<c64>) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn dagger(a: &Array2<c64>) -> Array2<c64> {
    a.t().mapv(|z| z.conj())
}

/// ||M w - lambda w|| for a unit vector w.
fn eigen_residual(m: &Array2<c64>, lambda: f64, w: &Array1<c64>) -> f64 {
    let r = m.dot(w) - w.mapv(|z| z * c64::new(lambda, 0.0));
    vec_norm(&r)
}

/// Inverse iteration with Rayleigh-quotient updates. The LAPACK
/// eigenvector of a simple eigenpair carries O(eps * kappa) error; two or
/// three shifted solves push it back to machine precision, which the
/// closed-form pipeline needs. Returns the best (lambda, w) seen, never
/// worse than the input.
fn polish_eigenpair(m: &Array2<c64>, lambda0: f64, w0: ArrayView1<c64>) -> (f64, Array1<c64>) {
    let n = m.nrows();
    let mut w = w0.to_owned();
    let nrm = vec_norm(&w);
    if nrm == 0.0 {
        return (lambda0, w);
    }
    w.mapv_inplace(|z| z / nrm);
    let mut lambda = lambda0;
    let mut best = (lambda0, w.clone(), eigen_residual(m, lambda0, &w));
    for _ in 0..3 {
        let shift = c64::new(lambda + 1e-13 * (1.0 + lambda.abs()), 0.0);
        let mut shifted = m.clone();
        for i in 0..n {
            shifted[[i, i]] -= shift;
        }
        let z = match shifted.factorize().and_then(|f| f.solve(&w).map(|z| z.to_owned())) {
            Ok(z) => z,
            Err(_) => break,
        };
        if !z.iter().all(|c| c.re.is_finite() && c.im.is_finite()) {
            break;
        }
        let znrm = vec_norm(&z);
        if znrm == 0.0 {
            break;
        }
        w = z.mapv(|c| c / znrm);
        let mw = m.dot(&w);
        let rayleigh: c64 = w.iter().zip(mw.iter()).map(|(a, b)| a.conj() * b).sum();
        lambda = rayleigh.re;
        // refuse any drift toward a different eigenvalue
        if (lambda - lambda0).abs() > 1e-6 * (1.0 + lambda0.abs()) {
            break;
        }
        let res = eigen_residual(m, lambda, &w);
        if res < best.2 {
            best = (lambda, w.clone(), res);
        }
    }
    (best.0, best.1)
}

/// Orthonormal nullspace basis of K at the relative threshold tau_null.
/// A constraint matrix that vanishes identically (up to rounding measured
/// against the problem scale) constrains nothing: the nullspace is the
/// whole space.
fn nullspace(k: &Array2<c64>, problem_scale: f64, tau_null: f64) -> Result<Array2<c64>> {
    let n = k.ncols();
    let (_, sigma, vt) = k.svd(false, true)?;
    let vt = vt.expect("requested vt");
    let smax = sigma.iter().cloned().fold(0.0, f64::max);
    if smax <= 1e-12 * problem_scale.max(1.0) {
        return Ok(Array2::<c64>::eye(n));
    }
    let nullity = sigma.iter().filter(|&&s| s <= tau_null * smax).count();
    let mut v = Array2::<c64>::zeros((n, nullity));
    for j in 0..nullity {
        let row = vt.row(n - nullity + j);
        for a in 0..n {
            v[[a, j]] = row[a].conj();
        }
    }
    Ok(v)
}

struct Cluster {
    energies: Vec<f64>,
    members: Vec<usize>,
}

impl Cluster {
    fn mean_energy(&self) -> f64 {
        self.energies.iter().sum::<f64>() / self.energies.len() as f64
    }
}

/// Groups the kept eigenvalues (ascending) into chains of neighbors closer
/// than the degeneracy tolerance.
fn cluster_energies(sorted: &[(usize, f64)], tau_deg: f64) -> Vec<Cluster> {
    if sorted.is_empty() {
        return Vec::new();
    }
    let width = sorted.last().unwrap().1 - sorted.first().unwrap().1;
    let maxabs = sorted.iter().map(|&(_, e)| e.abs()).fold(0.0, f64::max);
    let tol = (tau_deg * width).max(1e-10 * (1.0 + maxabs));
    let mut out: Vec<Cluster> = Vec::new();
    for &(idx, e) in sorted {
        match out.last_mut() {
            Some(c) if (e - *c.energies.last().unwrap()).abs() <= tol => {
                c.energies.push(e);
                c.members.push(idx);
            }
            _ => out.push(Cluster {
                energies: vec![e],
                members: vec![idx],
            }),
        }
    }
    out
}

/// Solves one LMG sector: Hamiltonian plus Casimir constraints with
/// P = l(l+1), expecting 2l+1 states.
pub fn solve_sector(
    ws: &Workspace,
    gamma: f64,
    hx: f64,
    hz: f64,
    twice_l: u32,
    tol: &Tolerances,
) -> Result<SectorOutcome> {
    let sites = ws.basis.sites();
    if twice_l > sites || twice_l % 2 != sites % 2 {
        return Err(SpinbootError::InvalidConfig(format!(
            "sector 2l={twice_l} is not admissible for L={sites}"
        )));
    }
    tol.validate()?;
    let h = OperatorExpansion::lmg_hamiltonian(&ws.basis, gamma, hx, hz)?;
    let p = OperatorExpansion::casimir(&ws.basis)?;
    let l = f64::from(twice_l) / 2.0;
    let constraints = assemble_sector_constraints(ws, &h, Some((&p, l * (l + 1.0))))?;
    solve_constrained(ws, &constraints, Some(twice_l), twice_l as usize + 1, tol)
}

/// Runs the same pipeline on the restricted basis {Jz^a} with H = Jz.
/// The Hamiltonian commutes with every basis operator, so K vanishes and
/// the eigenproblem runs over the whole (L+1)-dimensional space, returning
/// the L+1 closed-form solutions E = m, v_a = m^a.
pub fn solve_toy_model(sites: u32, tol: &Tolerances) -> Result<SectorOutcome> {
    tol.validate()?;
    let ws = Workspace::toy(sites)?;
    let jz = ws.basis.idx([0, 0, 1]).expect("toy basis has Jz");
    let h = OperatorExpansion::new([(jz, c64::new(1.0, 0.0))].into());
    let constraints = assemble_sector_constraints(&ws, &h, None)?;
    solve_constrained(&ws, &constraints, None, sites as usize + 1, tol)
}

/// Shared constrained-eigenproblem driver; `label` is the sector 2l when
/// the Casimir constraint is active.
pub(crate) fn solve_constrained(
    ws: &Workspace,
    constraints: &SectorConstraints,
    label: Option<u32>,
    expected: usize,
    tol: &Tolerances,
) -> Result<SectorOutcome> {
    let n = ws.basis.len();
    let a = &constraints.a;
    let k = constraints.stacked();
    let v = nullspace(&k, fro_norm(a), tol.tau_null)?;
    let nullity = v.ncols();

    let mut diagnostics = SectorDiagnostics {
        twice_l: label,
        expected,
        accepted: 0,
        nullity,
        rejected_complex: 0,
        rejected_residual: 0,
        rejected_identity: 0,
        gram_condition: ws.gram.condition_estimate,
    };
    if nullity == 0 {
        return Ok(SectorOutcome {
            solutions: Vec::new(),
            diagnostics,
        });
    }

    let vdag = dagger(&v);
    let m = vdag.dot(a).dot(&v);
    let (lambda, smat) = m.eig()?;

    let mut kept: Vec<(usize, f64)> = lambda
        .iter()
        .enumerate()
        .filter(|(_, z)| z.im.abs() <= 1e-8 * (1.0 + z.re.abs()))
        .map(|(j, z)| (j, z.re))
        .collect();
    diagnostics.rejected_complex = nullity - kept.len();
    kept.sort_by(|x, y| x.1.partial_cmp(&y.1).expect("finite energies"));
    let clusters = cluster_energies(&kept, tol.tau_deg);

    // spectral projection data for degenerate clusters, built on demand
    let mut projection: Option<(Array1<c64>, ndarray_linalg::LUFactorized<ndarray::OwnedRepr<c64>>)> =
        None;
    if let Some(twice_l) =
        label.filter(|_| clusters.iter().any(|c| c.members.len() > 1))
    {
        let sb = ws
            .blocks
            .iter()
            .find(|sb| sb.sector.twice_l == twice_l)
            .expect("sector blocks");
        let dim = sb.sector.dim as f64;
        let umix = Array1::from_iter((0..n).map(|alpha| {
            let tr: c64 = (0..sb.sector.dim).map(|i| sb.mats[alpha][[i, i]]).sum();
            tr / c64::new(dim * ws.scales[alpha], 0.0)
        }));
        let cmix = vdag.dot(&umix);
        let xi = smat.factorize()?.solve(&cmix)?.to_owned();
        projection = Some((xi, smat.factorize()?));
    }

    let mut solutions = Vec::new();
    for cluster in clusters {
        let gdim = cluster.members.len();
        let mult = (gdim as f64).sqrt().round() as usize;
        let mut energy = cluster.mean_energy();
        let mut warnings = Vec::new();

        let w: Array1<c64> = if gdim == 1 {
            let (e_polished, w) =
                polish_eigenpair(&m, energy, smat.column(cluster.members[0]));
            energy = e_polished;
            w
        } else {
            warnings.push(Warning::DegenerateCluster);
            match &projection {
                Some((xi, _)) => {
                    // keep only this cluster's eigencomponents of the
                    // maximally mixed sector vector, then recombine
                    let mut masked = Array1::<c64>::zeros(nullity);
                    for &j in &cluster.members {
                        masked[j] = xi[j];
                    }
                    smat.dot(&masked)
                }
                None => smat.column(cluster.members[0]).to_owned(),
            }
        };

        let u = v.dot(&w);
        let mut values = Array1::<c64>::zeros(n);
        for alpha in 0..n {
            values[alpha] = u[alpha] * c64::new(ws.scales[alpha], 0.0);
        }
        let vmax = values.iter().map(|z| z.norm()).fold(0.0, f64::max);
        if values[0].norm() < 1e-10 * vmax {
            diagnostics.rejected_identity += gdim;
            continue;
        }
        let v0 = values[0];
        values.mapv_inplace(|z| z / v0);

        let ut = Array1::from_iter(
            (0..n).map(|alpha| values[alpha] / c64::new(ws.scales[alpha], 0.0)),
        );
        let unrm = vec_norm(&ut);
        let residual_eigen = {
            let r = a.dot(&ut) - ut.mapv(|z| z * c64::new(energy, 0.0));
            vec_norm(&r) / unrm
        };
        let residual_commutator = vec_norm(&constraints.k_hamiltonian.dot(&ut)) / unrm;
        let residual_symmetry = if constraints.k_symmetry.nrows() == 0 {
            0.0
        } else {
            vec_norm(&constraints.k_symmetry.dot(&ut)) / unrm
        };
        if residual_eigen.max(residual_commutator).max(residual_symmetry) > tol.tau_res {
            diagnostics.rejected_residual += gdim;
            continue;
        }

        diagnostics.accepted += mult;
        solutions.push(BootstrapSolution {
            energy,
            twice_l: label,
            expectations: values,
            multiplicity: mult,
            eigenspace_dim: gdim,
            residual_commutator,
            residual_eigen,
            residual_symmetry,
            warnings,
        });
    }

    Ok(SectorOutcome {
        solutions,
        diagnostics,
    })
}
