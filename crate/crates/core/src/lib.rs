//! # phasebound
//!
//! Multi-parameter phase estimation bounds for multimode optical probe states.
//!
//! The crate answers one question in several independent ways: given a pure
//! bosonic probe state sent through `M` optical modes with linear phase
//! shifts, how precisely can a set of derived phases be estimated?
//!
//! - [`fock`] represents multimode pure states as sparse amplitude maps over
//!   photon-occupation vectors in a truncated Fock space, and evaluates
//!   number-operator moments exactly over the stored amplitudes.
//! - [`qfim`] builds the commuting phase generators for the two estimation
//!   schemes (parallel interferometers, phases against a common reference)
//!   and computes the quantum Fisher information matrix both from number
//!   covariances and from an independent finite-difference oracle.
//! - [`bounds`] turns a QFIM or measured symmetry parameters into per-phase
//!   Cramér-Rao bounds, including the closed-form inverse for
//!   identity-plus-ones structured matrices and the Mandel-Q / correlation-J
//!   parameterisations.
//! - [`families`] constructs the probe-state families under study (entangled
//!   coherent sums, unbalanced cat products, generalised NOON states,
//!   single-mode `|N> + nu|0>` superpositions) with closed-form analytics
//!   alongside their Fock-space realisations.
//!
//! Every quantity is either analytic or exactly computable on a small sparse
//! Fock support, so the numerical routes can be cross-checked against the
//! closed forms to tight tolerances.

#![forbid(unsafe_code)]

pub use num_complex;

use thiserror::Error;

pub mod bounds;
pub mod families;
pub mod fock;
pub mod qfim;

pub use bounds::{
    aggregate_phi, crb_from_qfim, diagnostics, imaging_bound, imaging_bound_mandel,
    ones_structured_inverse, parallel_bound, parallel_bound_mandel, precision_report,
    ModeDiagnostics, PrecisionReport, Route, Scheme, SchemeParams, SymmetryParamsImaging,
    SymmetryParamsParallel,
};
pub use families::{
    build, build_gecs, build_gns, build_noon_pair, build_ucs, build_uno, crossover_nu,
    match_mean_photon, single_mode_analogue, FamilyAnalytics, FamilySpec, Gamma,
};
pub use fock::{
    apply_phase, coherent_mode, fock_basis, number_moments, overlap, superpose, tensor,
    NumberMoments, OccupationVector, SparseState, TruncationReport,
};
pub use qfim::{
    extract_minus_block, imaging_generators, parallel_generators, qfim_covariance,
    qfim_fd_oracle, qfim_fd_oracle_refined, Generator, Qfim, QfimSource,
};

/// Hard caps and numerical tolerances used across the crate.
///
/// Each constant records its rationale so that no tolerance is an ad-hoc
/// magic number at its point of use.
pub mod limits {
    /// Maximum number of optical modes in a state. Keeps occupation vectors
    /// inline (fixed array) and every desk-scale computation bounded.
    pub const MAX_MODES: usize = 16;

    /// Maximum photon count per mode. Occupations are stored as `u16`.
    pub const MAX_OCCUPATION: u16 = u16::MAX;

    /// Maximum number of stored amplitudes in a single state. Exceeding this
    /// is a resource error rather than a silent slowdown.
    pub const SUPPORT_CAP: u64 = 10_000_000;

    /// Tolerance on `|sum of squared amplitudes - 1|` at state construction.
    /// Violations are errors, not silent renormalisations, except directly
    /// after a deliberate truncation.
    pub const NORM_TOL: f64 = 1e-12;

    /// Amplitudes with magnitude below this are dropped to keep states
    /// sparse; they are below double-precision relevance.
    pub const PRUNE_THRESHOLD: f64 = 1e-15;

    /// A superposition whose unnormalised norm falls below this is treated
    /// as a cancellation to zero.
    pub const DEGENERACY_TOL: f64 = 1e-12;

    /// Default truncation target: per-mode Poisson tail mass kept below this
    /// when building coherent amplitudes.
    pub const DEFAULT_EPSILON: f64 = 1e-12;

    /// Required symmetry of a quantum Fisher information matrix.
    pub const QFIM_SYMMETRY_TOL: f64 = 1e-12;

    /// Numerical floor for the positive-semidefiniteness check of a QFIM:
    /// the smallest eigenvalue may round slightly below zero.
    pub const QFIM_PSD_FLOOR: f64 = -1e-10;

    /// Absolute tolerance on the cross blocks of a parallel-scheme QFIM when
    /// extracting the difference-generator block: well above floating-point
    /// noise, well below physical covariances of interest.
    pub const OFF_BLOCK_TOL: f64 = 1e-8;

    /// Default absolute tolerance on the covariance equalities checked by
    /// the symmetry diagnostics.
    pub const SYMMETRY_TOL: f64 = 1e-9;

    /// Condition-number limit above which a QFIM is reported as
    /// non-identifiable instead of being inverted.
    pub const CONDITION_LIMIT: f64 = 1e12;

    /// Default step for the finite-difference QFIM oracle.
    pub const FD_DEFAULT_STEP: f64 = 1e-4;

    /// Largest admissible finite-difference step.
    pub const FD_MAX_STEP: f64 = 1e-2;

    /// Bisection bracket for matching a family's mean photon number by
    /// adjusting the coherent amplitude.
    pub const ALPHA_BRACKET_MAX: f64 = 64.0;

    /// Convergence target on the mean photon number during matching.
    pub const MATCH_TOL: f64 = 1e-12;
}

/// Errors produced by state construction, QFIM evaluation and bound
/// computation.
#[derive(Debug, Error)]
pub enum Error {
    #[error("occupation {occupation} exceeds cutoff {cutoff}")]
    CutoffExceeded { occupation: u16, cutoff: u16 },

    #[error("mode count {got} outside supported range 1..={max}")]
    ModeCountUnsupported { got: usize, max: usize },

    #[error("mode index {index} out of range for {mode_count} modes")]
    ModeIndexOutOfRange { index: usize, mode_count: usize },

    #[error("mode count mismatch: {left} vs {right}")]
    ModeCountMismatch { left: usize, right: usize },

    #[error("cutoff mismatch: {left} vs {right}")]
    CutoffMismatch { left: u16, right: u16 },

    #[error("state support would need {needed} amplitudes, cap is {cap}")]
    SupportCapExceeded { needed: u64, cap: u64 },

    #[error("required cutoff {needed} exceeds hard cap {cap}")]
    CutoffCapExceeded { needed: u64, cap: u64 },

    #[error("state is not normalized: |norm^2 - 1| = {error:.3e}")]
    NotNormalized { error: f64 },

    #[error("degenerate superposition: norm {norm:.3e} below threshold")]
    DegenerateSuperposition { norm: f64 },

    #[error("phase vector length {got} does not match mode count {expected}")]
    PhaseLengthMismatch { got: usize, expected: usize },

    #[error("generator length {got} does not match mode count {expected}")]
    GeneratorLengthMismatch { got: usize, expected: usize },

    #[error("non-finite value for {name}")]
    NonFinite { name: &'static str },

    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("finite-difference step {step:.3e} outside (0, {max:.0e}]")]
    StepOutOfRange { step: f64, max: f64 },

    #[error("matrix not symmetric: max asymmetry {asymmetry:.3e}")]
    NotSymmetric { asymmetry: f64 },

    #[error("matrix not positive semidefinite: min eigenvalue {min_eigenvalue:.3e}")]
    NotPositiveSemidefinite { min_eigenvalue: f64 },

    #[error("asymmetric state: {detail}")]
    AsymmetricState { detail: String },

    #[error("non-identifiable: {detail}")]
    NonIdentifiable { detail: String },

    #[error("no phase information: {detail}")]
    NoInformation { detail: String },

    #[error("structured matrix singular: 1 + omega*d = {value:.3e}")]
    SingularStructuredMatrix { value: f64 },

    #[error("Mandel Q undefined: mode {mode} has zero mean occupation")]
    MandelQUndefined { mode: usize },

    #[error("target mean photon number {target} unreachable: {reason}")]
    UnreachableTarget { target: f64, reason: String },
}

impl Error {
    /// True for errors caused by hitting a hard resource cap.
    pub fn is_resource(&self) -> bool {
        matches!(
            self,
            Error::SupportCapExceeded { .. }
                | Error::CutoffCapExceeded { .. }
                | Error::ModeCountUnsupported { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
