//! Independent exact solvers used to cross-validate the bootstrap.
//!
//! Two routes: a per-sector collective solver working in the (2l+1)-dim
//! angular momentum blocks, and a dense product-basis diagonalization for
//! small systems. They share nothing with the bootstrap beyond the spin
//! matrices, which is the point.

mod angular;
mod dense;
mod toy;

pub use angular::{angular_momentum_solve, hamiltonian_block, SectorSpectrum};
pub use dense::{
    casimir_dense, default_pairs, dense_ed, hamiltonian_dense, site_resolved_concurrences,
    EdState, ED_CAP,
};
pub use toy::{toy_exact, ToySolution};

/// Groups an ascending energy list into near-degenerate clusters.
///
/// Chain rule: a state joins the cluster if its gap to the previous member
/// is below tol, matching how the bootstrap groups its eigenvalues.
pub fn cluster_ascending(energies: &[f64], tol_scale: f64) -> Vec<Vec<usize>> {
    let mut clusters: Vec<Vec<usize>> = Vec::new();
    let scale = energies
        .iter()
        .fold(0.0_f64, |acc, e| acc.max(e.abs()));
    let tol = tol_scale.max(1e-10 * (1.0 + scale));
    for (k, &e) in energies.iter().enumerate() {
        match clusters.last_mut() {
            Some(c) if e - energies[*c.last().unwrap()] <= tol => c.push(k),
            _ => clusters.push(vec![k]),
        }
    }
    clusters
}
