//! Closed-form single-generator fixture: H = Jz on the restricted basis.

use ndarray::Array1;

use crate::error::Result;
use crate::su2::multiplicity;

/// One closed-form solution E = m with v_a = m^a.
#[derive(Debug, Clone)]
pub struct ToySolution {
    pub energy: f64,
    /// Expectation of Jz^a for a = 0..=L.
    pub expectations: Array1<f64>,
}

/// All L+1 solutions, ascending in m = -L/2 ... L/2.
pub fn toy_exact(sites: u32) -> Result<Vec<ToySolution>> {
    multiplicity(sites, sites)?;
    let half = f64::from(sites) / 2.0;
    Ok((0..=sites)
        .map(|k| {
            let m = f64::from(k) - half;
            ToySolution {
                energy: m,
                expectations: Array1::from_iter((0..=sites).map(|a| m.powi(a as i32))),
            }
        })
        .collect())
}
