//! Gram-matrix and structure-constant assembly from block traces.
//!
//! All trace contractions run over flattened sector blocks: with
//! F1[i] = ravel(M_i) and F2[j] = ravel(M_j^T), the bilinear product
//! F1 F2^T collects tr(M_i M_j) for a whole sector at once, and the full
//! trace is the multiplicity-weighted sum over sectors. The basis is
//! rescaled as O~_a = O_a / s_a with s_a the full-space Frobenius norm,
//! which keeps the Gram matrix well conditioned at every system size; all
//! internal data (B, g slices, Hamiltonian coefficients) lives in the
//! rescaled convention and is converted back only at the edges.

use ndarray::prelude::*;
use num_complex::Complex64 as c64;
use rayon::prelude::*;

use crate::error::{Result, SpinbootError};
use crate::su2::SectorBlocks;

/// Which side of the product a slice multiplies on: left gives
/// O_b O_a = sum_g g_{bag} O_g, right gives O_a O_b = sum_g g_{abg} O_g.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Side {
    Left,
    Right,
}

/// out[i, j] = sum_k f1[i, k] * f2[j, k], parallel over output rows.
/// This is a plain bilinear contraction: no conjugation on either factor.
pub(crate) fn bilinear_product(f1: &Array2<c64>, f2: &Array2<c64>) -> Array2<c64> {
    let (n1, k) = f1.dim();
    let n2 = f2.nrows();
    debug_assert_eq!(k, f2.ncols());
    let mut out = vec![c64::new(0.0, 0.0); n1 * n2];
    out.par_chunks_mut(n2).enumerate().for_each(|(i, row)| {
        let a = f1.row(i);
        let a = a.as_slice().expect("contiguous row");
        for (j, cell) in row.iter_mut().enumerate() {
            let b = f2.row(j);
            let b = b.as_slice().expect("contiguous row");
            let mut acc = c64::new(0.0, 0.0);
            for (x, y) in a.iter().zip(b.iter()) {
                acc += x * y;
            }
            *cell = acc;
        }
    });
    Array2::from_shape_vec((n1, n2), out).expect("shape")
}

/// Frobenius scale of every basis operator over the full Hilbert space:
/// s_a = sqrt(sum_l d_l ||M_a^(l)||_F^2).
pub(crate) fn basis_scales(blocks: &[SectorBlocks]) -> Vec<f64> {
    let n_ops = blocks.first().map_or(0, |b| b.mats.len());
    (0..n_ops)
        .map(|i| {
            blocks
                .iter()
                .map(|sb| {
                    let d = sb.sector.multiplicity as f64;
                    d * sb.mats[i].iter().map(|z| z.norm_sqr()).sum::<f64>()
                })
                .sum::<f64>()
                .sqrt()
        })
        .collect()
}

/// Rows of the flattened, rescaled sector blocks; transpose first if asked.
fn flatten(sb: &SectorBlocks, scales: &[f64], transpose: bool) -> Array2<c64> {
    let n2 = sb.sector.dim * sb.sector.dim;
    let mut out = Array2::<c64>::zeros((sb.mats.len(), n2));
    for (i, m) in sb.mats.iter().enumerate() {
        let inv = c64::new(1.0 / scales[i], 0.0);
        let src = if transpose {
            m.t().to_owned()
        } else {
            m.clone()
        };
        out.row_mut(i)
            .iter_mut()
            .zip(src.iter())
            .for_each(|(dst, &z)| *dst = z * inv);
    }
    out
}

/// The rescaled Gram matrix B~_{ab} = tr(O~_a O~_b) with its LU
/// factorization, SVD-based rank certificate, and condition estimate.
///
/// B is complex symmetric (tr(AB) = tr(BA)), not Hermitian.
pub struct GramMatrix {
    scaled: Array2<c64>,
    factor: ndarray_linalg::LUFactorized<ndarray::OwnedRepr<c64>>,
    /// sigma_max / sigma_min of the rescaled Gram matrix.
    pub condition_estimate: f64,
    /// Numerical rank at threshold 1e-10 * sigma_max.
    pub rank: usize,
}

impl GramMatrix {
    /// Builds B~ from per-sector blocks, verifies full rank, factorizes.
    pub(crate) fn assemble(blocks: &[SectorBlocks], scales: &[f64]) -> Result<Self> {
        use ndarray_linalg::{Factorize, SVD};
        let n_ops = scales.len();
        let mut scaled = Array2::<c64>::zeros((n_ops, n_ops));
        for sb in blocks {
            let d = c64::new(sb.sector.multiplicity as f64, 0.0);
            let f1 = flatten(sb, scales, false);
            let f2 = flatten(sb, scales, true);
            scaled = scaled + bilinear_product(&f1, &f2).mapv(|z| z * d);
        }
        let (_, sigma, _) = scaled.svd(false, false)?;
        let smax = sigma.iter().cloned().fold(0.0, f64::max);
        let tol = 1e-10 * smax;
        let rank = sigma.iter().filter(|&&s| s > tol).count();
        if rank < n_ops {
            return Err(SpinbootError::SingularGram {
                rank,
                dim: n_ops,
                tol,
            });
        }
        let smin = sigma.iter().cloned().fold(f64::INFINITY, f64::min);
        let factor = scaled.factorize()?;
        Ok(Self {
            scaled,
            factor,
            condition_estimate: smax / smin,
            rank,
        })
    }

    /// The rescaled Gram matrix itself.
    pub fn scaled(&self) -> &Array2<c64> {
        &self.scaled
    }

    /// One entry in the unscaled convention, tr(O_a O_b).
    pub fn unscaled_entry(&self, a: usize, b: usize, scales: &[f64]) -> c64 {
        self.scaled[[a, b]] * scales[a] * scales[b]
    }

    /// Solves G B~ = C for G, one row at a time: B~ is symmetric, so row_a(G)
    /// solves B~ x = row_a(C).
    pub(crate) fn solve_rows(&self, c: &Array2<c64>) -> Result<Array2<c64>> {
        use ndarray_linalg::Solve;
        let (rows, cols) = c.dim();
        let solved: Vec<Array1<c64>> = (0..rows)
            .into_par_iter()
            .map(|a| self.factor.solve(&c.row(a).to_owned()))
            .collect::<std::result::Result<_, _>>()?;
        let mut g = Array2::<c64>::zeros((rows, cols));
        for (a, row) in solved.into_iter().enumerate() {
            g.row_mut(a).assign(&row);
        }
        Ok(g)
    }
}

/// One materialized slice of the structure-constant tensor in the unscaled
/// convention: matrix[a, g] = g_{bag} (left) or g_{abg} (right).
pub struct MultiplicationSlice {
    pub beta: usize,
    pub side: Side,
    pub matrix: Array2<c64>,
}

/// Trace matrices C for one beta: C_left[a, d] = tr(O~_b O~_a O~_d).
/// The right-hand variant is the transpose by cyclicity of the trace, so
/// only the left product is ever contracted.
pub(crate) fn triple_trace_left(
    blocks: &[SectorBlocks],
    scales: &[f64],
    beta: usize,
) -> Array2<c64> {
    let n_ops = scales.len();
    let mut c = Array2::<c64>::zeros((n_ops, n_ops));
    for sb in blocks {
        let d = c64::new(sb.sector.multiplicity as f64, 0.0);
        let mb = sb.mats[beta].mapv(|z| z / scales[beta]);
        let products = SectorBlocks {
            sector: sb.sector,
            mats: sb
                .mats
                .iter()
                .map(|m| mb.dot(m))
                .collect(),
        };
        let f1 = flatten(&products, scales, false);
        let f2 = flatten(sb, scales, true);
        c = c + bilinear_product(&f1, &f2).mapv(|z| z * d);
    }
    c
}
