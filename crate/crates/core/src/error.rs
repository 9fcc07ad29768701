//! Error types shared across the crate.

use thiserror::Error;

/// Everything that can go wrong while building operators, solving
/// constraint systems, or evaluating measures.
#[derive(Debug, Error)]
pub enum SpinbootError {
    /// The Gram matrix lost numerical rank; the operator basis is unusable.
    #[error("Gram matrix is numerically singular (rank {rank} < {dim} at tolerance {tol:e})")]
    SingularGram { rank: usize, dim: usize, tol: f64 },

    /// A candidate eigenvector has no overlap with the identity operator.
    #[error("identity component vanishes (|w_0| = {magnitude:e} < 1e-10) for candidate E = {energy}")]
    IdentityComponentVanishes { energy: f64, magnitude: f64 },

    /// A solve produced a number of accepted states other than expected.
    #[error("{scope}: accepted {found} states, expected {expected}")]
    WrongStateCount {
        scope: String,
        found: usize,
        expected: usize,
    },

    /// Moment data violates the operator-adjoint identities too badly to use.
    #[error("hermiticity violated: moment residual {residual:e} exceeds 1e-4")]
    HermiticityViolated { residual: f64 },

    /// A reduced density matrix has a significantly negative eigenvalue.
    #[error("non-physical density matrix: min eigenvalue {min_eigenvalue:e}")]
    NonPhysicalDensity { min_eigenvalue: f64 },

    /// The residual tangle came out significantly negative.
    #[error("CKW inequality violated: residual tangle {delta_tau:e}")]
    CkwViolated { delta_tau: f64 },

    /// Exact diagonalization was requested beyond the configured cap.
    #[error("system size L={requested} exceeds the exact-diagonalization cap {cap}")]
    TooLarge { requested: u32, cap: u32 },

    /// Configuration rejected before any solve started.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// A LAPACK call failed (ill-conditioned input or driver error).
    #[error("linear algebra backend error: {0}")]
    Linalg(#[from] ndarray_linalg::error::LinalgError),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, SpinbootError>;

/// Non-fatal per-state flags surfaced in result rows and run summaries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Warning {
    /// Measures for an l < L/2 state assume a permutation-invariant
    /// superposition of the degenerate multiplet exists.
    AssumedSymmetric,
    /// The state is a degenerate energy cluster; reported expectation
    /// values describe the cluster average, not an individual state.
    DegenerateCluster,
    /// The reconstructed two-qubit density matrix has a negative eigenvalue
    /// beyond tolerance; derived measures are formal.
    NonPhysicalRdm,
}

impl std::fmt::Display for Warning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Warning::AssumedSymmetric => "assumed_symmetric",
            Warning::DegenerateCluster => "degenerate_cluster",
            Warning::NonPhysicalRdm => "non_physical_rdm",
        };
        f.write_str(s)
    }
}

impl std::str::FromStr for Warning {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "assumed_symmetric" => Ok(Warning::AssumedSymmetric),
            "degenerate_cluster" => Ok(Warning::DegenerateCluster),
            "non_physical_rdm" => Ok(Warning::NonPhysicalRdm),
            other => Err(format!("unknown warning {other:?}")),
        }
    }
}
