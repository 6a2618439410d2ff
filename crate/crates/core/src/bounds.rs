//! Cramér-Rao phase-precision bounds.
//!
//! Per-phase bounds `dphi_i^2 >= (F^{-1})_{ii} / mu` are computed two ways:
//! numerically, by inverting a measured QFIM, and in closed form for probe
//! states with the natural symmetries of each scheme. For the parallel
//! scheme the symmetric QFIM is block diagonal and the difference block is
//! `2(V - C_intra) I`, so each phase obeys `dphi^2 >= 1/(2(V - C_intra))`
//! independently of the number of interferometers and of any correlation
//! between them. For the reference-mode scheme the QFIM has the
//! identity-plus-ones form `4(V-C)(I + C/(V-C) J)` whose inverse is closed
//! form, giving `dphi^2 >= (V+(d-2)C) / (4(V-C)(V+(d-1)C))`.
//!
//! Both bounds are also exposed in the Mandel-Q / correlation-J
//! parameterisation with `V = n(1+Q)` and `C = J V`.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::fock::{self, SparseState};
use crate::limits::CONDITION_LIMIT;
use crate::qfim::{extract_minus_block, imaging_generators, parallel_generators, qfim_covariance, Qfim};
use crate::{Error, Result};

/// Estimation scheme selecting the generator construction and the symmetry
/// assumptions of the closed-form route.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scheme {
    /// `d` parallel two-mode interferometers over `2d` modes; the phases of
    /// interest are the arm differences.
    Parallel,
    /// `d` phases measured against one common reference mode, `d + 1` modes
    /// in total with the reference phase pinned to zero.
    Imaging,
}

impl Scheme {
    pub fn mode_count(&self, d: usize) -> usize {
        match self {
            Scheme::Parallel => 2 * d,
            Scheme::Imaging => d + 1,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Scheme::Parallel => "parallel",
            Scheme::Imaging => "imaging",
        }
    }
}

/// Symmetry parameters of a parallel-scheme probe: common per-mode number
/// variance, covariance within an interferometer, covariance between
/// interferometers.
#[derive(Clone, Copy, Debug)]
pub struct SymmetryParamsParallel {
    pub v: f64,
    pub c_intra: f64,
    pub c_inter: f64,
    pub d: usize,
}

impl SymmetryParamsParallel {
    pub fn new(v: f64, c_intra: f64, c_inter: f64, d: usize) -> Result<Self> {
        let params = Self {
            v,
            c_intra,
            c_inter,
            d,
        };
        params.validate()?;
        Ok(params)
    }

    fn validate(&self) -> Result<()> {
        validate_variance("v", self.v)?;
        validate_covariance("c_intra", self.c_intra, self.v)?;
        validate_covariance("c_inter", self.c_inter, self.v)?;
        validate_dimension(self.d)
    }
}

/// Symmetry parameters of a reference-mode probe: common probe-mode
/// variance and probe-pair covariance.
#[derive(Clone, Copy, Debug)]
pub struct SymmetryParamsImaging {
    pub v: f64,
    pub c: f64,
    pub d: usize,
}

impl SymmetryParamsImaging {
    pub fn new(v: f64, c: f64, d: usize) -> Result<Self> {
        let params = Self { v, c, d };
        params.validate()?;
        Ok(params)
    }

    fn validate(&self) -> Result<()> {
        validate_variance("v", self.v)?;
        validate_covariance("c", self.c, self.v)?;
        validate_dimension(self.d)
    }
}

/// Scheme-specific symmetry parameters measured from a state.
#[derive(Clone, Copy, Debug)]
pub enum SchemeParams {
    Parallel(SymmetryParamsParallel),
    Imaging(SymmetryParamsImaging),
}

/// Per-mode diagnostics of a probe state.
#[derive(Clone, Copy, Debug)]
pub struct ModeDiagnostics {
    /// Mean photon number of a probe mode.
    pub mean_per_mode: f64,
    /// Mean total photon number over all modes, reference included.
    pub mean_total: f64,
    /// Mandel Q of a probe mode, `(V - n) / n`.
    pub mandel_q: f64,
    /// Normalised two-mode number correlation of the scheme's probe pairs,
    /// zero by convention when the state has a single probe pair partner or
    /// no number fluctuations.
    pub correlation_j: f64,
}

/// Which route produced a precision value.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Route {
    ClosedForm,
    MatrixInverse,
}

impl Route {
    pub fn name(&self) -> &'static str {
        match self {
            Route::ClosedForm => "closed-form",
            Route::MatrixInverse => "matrix-inverse",
        }
    }
}

/// Per-phase Cramér-Rao bounds with mode diagnostics.
///
/// `per_phase` holds variance-level bounds `dphi_i^2`; `aggregate_phi` sums
/// the corresponding standard deviations, `sum_i sqrt(dphi_i^2)`, keeping
/// both representations explicit.
#[derive(Clone, Debug)]
pub struct PrecisionReport {
    pub per_phase: Vec<f64>,
    pub aggregate_phi: f64,
    pub mandel_q: f64,
    pub correlation_j: f64,
    pub mean_per_mode: f64,
    pub mean_total: f64,
    pub route: Route,
}

impl PrecisionReport {
    pub fn new(per_phase: Vec<f64>, diag: ModeDiagnostics, route: Route) -> Result<Self> {
        let aggregate_phi = aggregate_phi(&per_phase)?;
        Ok(Self {
            per_phase,
            aggregate_phi,
            mandel_q: diag.mandel_q,
            correlation_j: diag.correlation_j,
            mean_per_mode: diag.mean_per_mode,
            mean_total: diag.mean_total,
            route,
        })
    }
}

fn validate_variance(name: &'static str, v: f64) -> Result<()> {
    if !v.is_finite() || v < 0.0 {
        return Err(Error::InvalidParameter {
            name,
            reason: format!("variance {v} must be finite and non-negative"),
        });
    }
    Ok(())
}

fn validate_covariance(name: &'static str, c: f64, v: f64) -> Result<()> {
    if !c.is_finite() {
        return Err(Error::NonFinite { name });
    }
    // Cauchy-Schwarz with a little rounding slack.
    if c.abs() > v * (1.0 + 1e-9) + 1e-12 {
        return Err(Error::InvalidParameter {
            name,
            reason: format!("|{c}| exceeds the variance {v}"),
        });
    }
    Ok(())
}

fn validate_dimension(d: usize) -> Result<()> {
    if d == 0 {
        return Err(Error::InvalidParameter {
            name: "d",
            reason: "need at least one phase".into(),
        });
    }
    Ok(())
}

/// Per-phase bounds `(F^{-1})_{ii} / repetitions` from a QFIM.
///
/// The matrix is inverted through its eigendecomposition; a condition
/// number above [`CONDITION_LIMIT`] means some parameter combination
/// carries no usable information and is reported instead of inverted.
pub fn crb_from_qfim(qfim: &Qfim, repetitions: u32) -> Result<Vec<f64>> {
    if repetitions == 0 {
        return Err(Error::InvalidParameter {
            name: "repetitions",
            reason: "must be at least 1".into(),
        });
    }
    let eig = SymmetricEigen::new(qfim.matrix().clone());
    let lambda_max = eig.eigenvalues.iter().copied().fold(0.0f64, f64::max);
    if lambda_max <= 0.0 {
        return Err(Error::NonIdentifiable {
            detail: "QFIM is zero: no parameter carries information".into(),
        });
    }
    let lambda_min = eig
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    if lambda_min < lambda_max / CONDITION_LIMIT {
        return Err(Error::NonIdentifiable {
            detail: format!(
                "condition number {:.3e} exceeds {CONDITION_LIMIT:.0e}",
                lambda_max / lambda_min
            ),
        });
    }
    let inv_diag = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| 1.0 / l));
    let inverse = &eig.eigenvectors * inv_diag * eig.eigenvectors.transpose();
    let mu = repetitions as f64;
    let per_phase: Vec<f64> = (0..qfim.dim()).map(|i| inverse[(i, i)] / mu).collect();
    if per_phase.iter().any(|&b| !b.is_finite() || b <= 0.0) {
        return Err(Error::NonIdentifiable {
            detail: "inverse QFIM has a non-positive diagonal entry".into(),
        });
    }
    Ok(per_phase)
}

/// Closed-form inverse of `M = lambda (I + omega J)` with `J` the all-ones
/// matrix: `M^{-1} = (1/lambda)(I - omega/(1 + omega d) J)`, which follows
/// from `J^2 = d J`.
pub fn ones_structured_inverse(lambda: f64, omega: f64, d: usize) -> Result<DMatrix<f64>> {
    validate_dimension(d)?;
    if !lambda.is_finite() || !omega.is_finite() {
        return Err(Error::NonFinite { name: "lambda/omega" });
    }
    if lambda == 0.0 {
        return Err(Error::InvalidParameter {
            name: "lambda",
            reason: "must be nonzero".into(),
        });
    }
    let t = 1.0 + omega * d as f64;
    if t.abs() < 1e-12 {
        return Err(Error::SingularStructuredMatrix { value: t });
    }
    let off = omega / t;
    let mut inv = DMatrix::zeros(d, d);
    for i in 0..d {
        for j in 0..d {
            let delta = if i == j { 1.0 } else { 0.0 };
            inv[(i, j)] = (delta - off) / lambda;
        }
    }
    Ok(inv)
}

/// Parallel-scheme per-phase bound `1/(2(V - C_intra))`.
///
/// Independent of `d` and of the inter-interferometer covariance by
/// construction: correlations between interferometers cannot improve the
/// per-phase precision.
pub fn parallel_bound(params: &SymmetryParamsParallel) -> Result<f64> {
    params.validate()?;
    let info = params.v - params.c_intra;
    if info <= 0.0 {
        return Err(Error::NoInformation {
            detail: format!("V - C_intra = {info} is not positive"),
        });
    }
    Ok(1.0 / (2.0 * info))
}

/// Parallel-scheme bound in the Mandel parameterisation,
/// `1/(2 n (1+Q)(1-J))`; identical to [`parallel_bound`] under
/// `V = n(1+Q)`, `C_intra = J V`.
pub fn parallel_bound_mandel(n_bar: f64, q: f64, j: f64) -> Result<f64> {
    validate_mandel(n_bar, q, j)?;
    let denom = 2.0 * n_bar * (1.0 + q) * (1.0 - j);
    if denom <= 0.0 {
        return Err(Error::NoInformation {
            detail: format!("2 n (1+Q)(1-J) = {denom} is not positive"),
        });
    }
    Ok(1.0 / denom)
}

/// Reference-mode per-phase bound `(V+(d-2)C) / (4(V-C)(V+(d-1)C))`.
///
/// The single-phase case reduces to `1/(4V)` and is computed directly in
/// that form.
pub fn imaging_bound(params: &SymmetryParamsImaging) -> Result<f64> {
    params.validate()?;
    let SymmetryParamsImaging { v, c, d } = *params;
    if d == 1 {
        if v <= 0.0 {
            return Err(Error::NonIdentifiable {
                detail: "zero probe-mode variance".into(),
            });
        }
        return Ok(1.0 / (4.0 * v));
    }
    let vm = v - c;
    let vp = v + (d as f64 - 1.0) * c;
    if vm <= 0.0 || vp <= 0.0 {
        return Err(Error::NonIdentifiable {
            detail: format!("V - C = {vm}, V + (d-1)C = {vp}; both must be positive"),
        });
    }
    Ok((v + (d as f64 - 2.0) * c) / (4.0 * vm * vp))
}

/// Reference-mode bound in the Mandel parameterisation,
/// `f(d,J) / (4 n (1+Q)(1-J))` with `f(d,J) = (1+(d-2)J) / (1+(d-1)J)`.
///
/// `f(d,0) = 1`, and for `d = 1` the bound reduces to `1/(4V)` exactly.
pub fn imaging_bound_mandel(n_bar: f64, q: f64, j: f64, d: usize) -> Result<f64> {
    validate_mandel(n_bar, q, j)?;
    validate_dimension(d)?;
    if 1.0 + q <= 0.0 {
        return Err(Error::NonIdentifiable {
            detail: "zero probe-mode variance (Q = -1)".into(),
        });
    }
    if d == 1 {
        return Ok(1.0 / (4.0 * n_bar * (1.0 + q)));
    }
    let dm = 1.0 - j;
    let dp = 1.0 + (d as f64 - 1.0) * j;
    if dm <= 0.0 || dp <= 0.0 {
        return Err(Error::NonIdentifiable {
            detail: format!("1 - J = {dm}, 1 + (d-1)J = {dp}; both must be positive"),
        });
    }
    let f = (1.0 + (d as f64 - 2.0) * j) / dp;
    Ok(f / (4.0 * n_bar * (1.0 + q) * dm))
}

fn validate_mandel(n_bar: f64, q: f64, j: f64) -> Result<()> {
    if !n_bar.is_finite() || !q.is_finite() || !j.is_finite() {
        return Err(Error::NonFinite { name: "n_bar/q/j" });
    }
    if n_bar <= 0.0 {
        return Err(Error::InvalidParameter {
            name: "n_bar",
            reason: format!("mean photon number {n_bar} must be positive"),
        });
    }
    if q < -1.0 {
        return Err(Error::InvalidParameter {
            name: "q",
            reason: format!("Mandel Q {q} below -1"),
        });
    }
    if j.abs() > 1.0 + 1e-9 {
        return Err(Error::InvalidParameter {
            name: "j",
            reason: format!("correlation {j} outside [-1, 1]"),
        });
    }
    Ok(())
}

/// Aggregate precision `Phi = sum_i sqrt(dphi_i^2)` from per-phase variance
/// bounds; equals `d * dphi` in the symmetric case.
pub fn aggregate_phi(per_phase_variances: &[f64]) -> Result<f64> {
    if per_phase_variances.is_empty() {
        return Err(Error::InvalidParameter {
            name: "per_phase_variances",
            reason: "empty".into(),
        });
    }
    if per_phase_variances.iter().any(|&v| !v.is_finite() || v <= 0.0) {
        return Err(Error::InvalidParameter {
            name: "per_phase_variances",
            reason: "entries must be positive and finite".into(),
        });
    }
    Ok(per_phase_variances.iter().map(|v| v.sqrt()).sum())
}

struct MeasuredMoments {
    means: Vec<f64>,
    cov: Vec<f64>,
    m: usize,
}

fn measure(state: &SparseState, scheme: Scheme, d: usize) -> Result<MeasuredMoments> {
    validate_dimension(d)?;
    let expected = scheme.mode_count(d);
    if state.mode_count() != expected {
        return Err(Error::ModeCountMismatch {
            left: state.mode_count(),
            right: expected,
        });
    }
    let (means, cov) = fock::number_covariances(state);
    Ok(MeasuredMoments {
        m: means.len(),
        means,
        cov,
    })
}

fn probe_modes(scheme: Scheme, d: usize) -> usize {
    match scheme {
        Scheme::Parallel => 2 * d,
        Scheme::Imaging => d,
    }
}

fn check_equal(
    kind: &str,
    labels: (usize, usize),
    a: f64,
    b: f64,
    tol: f64,
) -> Result<()> {
    if (a - b).abs() > tol {
        return Err(Error::AsymmetricState {
            detail: format!(
                "{kind} of modes {} and {} differ: {a:.12e} vs {b:.12e}",
                labels.0 + 1,
                labels.1 + 1
            ),
        });
    }
    Ok(())
}

/// Measure a probe state's symmetry parameters and per-mode diagnostics.
///
/// Verifies the scheme's symmetry equalities (equal probe means and
/// variances, equal within-interferometer covariances, equal
/// between-interferometer / probe-pair covariances) within `tol` before
/// averaging; the first violated equality is reported with the offending
/// mode pair. Gate only for the closed-form route: the full-matrix CRB
/// needs no symmetry.
pub fn diagnostics(
    state: &SparseState,
    scheme: Scheme,
    d: usize,
    tol: f64,
) -> Result<(SchemeParams, ModeDiagnostics)> {
    let mm = measure(state, scheme, d)?;
    let probes = probe_modes(scheme, d);
    // Symmetry equalities first: a lopsided probe is reported as asymmetric
    // even when some mode also has zero mean occupation.
    for i in 1..probes {
        check_equal("mean occupation", (i, 0), mm.means[i], mm.means[0], tol)?;
        check_equal(
            "number variance",
            (i, 0),
            mm.cov[i * mm.m + i],
            mm.cov[0],
            tol,
        )?;
    }
    for i in 0..probes {
        if mm.means[i] <= 0.0 {
            return Err(Error::MandelQUndefined { mode: i });
        }
    }
    let params = match scheme {
        Scheme::Parallel => {
            let first_intra = mm.cov[1]; // modes (1, 2)
            for k in 1..d {
                let c_k = mm.cov[(2 * k) * mm.m + 2 * k + 1];
                check_equal("intra covariance", (2 * k, 2 * k + 1), c_k, first_intra, tol)?;
            }
            let mut inter_ref: Option<f64> = None;
            let mut inter_sum = 0.0;
            let mut inter_count = 0usize;
            for i in 0..probes {
                for j in (i + 1)..probes {
                    if i / 2 == j / 2 {
                        continue;
                    }
                    let c_ij = mm.cov[i * mm.m + j];
                    match inter_ref {
                        None => inter_ref = Some(c_ij),
                        Some(r) => check_equal("inter covariance", (i, j), c_ij, r, tol)?,
                    }
                    inter_sum += c_ij;
                    inter_count += 1;
                }
            }
            let v = (0..probes).map(|i| mm.cov[i * mm.m + i]).sum::<f64>() / probes as f64;
            let c_intra =
                (0..d).map(|k| mm.cov[(2 * k) * mm.m + 2 * k + 1]).sum::<f64>() / d as f64;
            let c_inter = if inter_count == 0 {
                0.0
            } else {
                inter_sum / inter_count as f64
            };
            SchemeParams::Parallel(SymmetryParamsParallel {
                v,
                c_intra,
                c_inter,
                d,
            })
        }
        Scheme::Imaging => {
            let mut pair_ref: Option<f64> = None;
            let mut pair_sum = 0.0;
            let mut pair_count = 0usize;
            for i in 0..probes {
                for j in (i + 1)..probes {
                    let c_ij = mm.cov[i * mm.m + j];
                    match pair_ref {
                        None => pair_ref = Some(c_ij),
                        Some(r) => check_equal("probe covariance", (i, j), c_ij, r, tol)?,
                    }
                    pair_sum += c_ij;
                    pair_count += 1;
                }
            }
            let v = (0..probes).map(|i| mm.cov[i * mm.m + i]).sum::<f64>() / probes as f64;
            let c = if pair_count == 0 {
                0.0
            } else {
                pair_sum / pair_count as f64
            };
            SchemeParams::Imaging(SymmetryParamsImaging { v, c, d })
        }
    };
    let diag = assemble_diagnostics(&mm, scheme, d, &params);
    Ok((params, diag))
}

/// Averaged diagnostics without the symmetry gate, for reporting on states
/// where [`diagnostics`] rejects the closed-form route.
pub fn raw_mode_diagnostics(state: &SparseState, scheme: Scheme, d: usize) -> Result<ModeDiagnostics> {
    let mm = measure(state, scheme, d)?;
    let probes = probe_modes(scheme, d);
    for i in 0..probes {
        if mm.means[i] <= 0.0 {
            return Err(Error::MandelQUndefined { mode: i });
        }
    }
    let v = (0..probes).map(|i| mm.cov[i * mm.m + i]).sum::<f64>() / probes as f64;
    let params = match scheme {
        Scheme::Parallel => {
            let c_intra = (0..d).map(|k| mm.cov[(2 * k) * mm.m + 2 * k + 1]).sum::<f64>() / d as f64;
            SchemeParams::Parallel(SymmetryParamsParallel {
                v,
                c_intra,
                c_inter: 0.0,
                d,
            })
        }
        Scheme::Imaging => {
            let mut pair_sum = 0.0;
            let mut pair_count = 0usize;
            for i in 0..probes {
                for j in (i + 1)..probes {
                    pair_sum += mm.cov[i * mm.m + j];
                    pair_count += 1;
                }
            }
            let c = if pair_count == 0 { 0.0 } else { pair_sum / pair_count as f64 };
            SchemeParams::Imaging(SymmetryParamsImaging { v, c, d })
        }
    };
    Ok(assemble_diagnostics(&mm, scheme, d, &params))
}

fn assemble_diagnostics(
    mm: &MeasuredMoments,
    scheme: Scheme,
    d: usize,
    params: &SchemeParams,
) -> ModeDiagnostics {
    let probes = probe_modes(scheme, d);
    let mean_per_mode = mm.means[..probes].iter().sum::<f64>() / probes as f64;
    let mean_total = mm.means.iter().sum::<f64>();
    let (v, c_pair) = match params {
        SchemeParams::Parallel(p) => (p.v, p.c_intra),
        SchemeParams::Imaging(p) => (p.v, p.c),
    };
    let mandel_q = (v - mean_per_mode) / mean_per_mode;
    let correlation_j = if v == 0.0 { 0.0 } else { c_pair / v };
    ModeDiagnostics {
        mean_per_mode,
        mean_total,
        mandel_q,
        correlation_j,
    }
}

/// Per-phase CRB of a Fock-space probe via the measured covariance QFIM.
#[derive(Clone, Debug)]
pub struct FockCrb {
    pub per_phase: Vec<f64>,
    /// True when the parallel-scheme cross blocks did not vanish and the
    /// full `2d x 2d` matrix was inverted instead of the difference block.
    pub symmetry_fallback: bool,
}

/// Invert the measured covariance QFIM of a probe state into per-phase
/// bounds for the given scheme.
pub fn fock_crb(state: &SparseState, scheme: Scheme, d: usize) -> Result<FockCrb> {
    validate_dimension(d)?;
    match scheme {
        Scheme::Imaging => {
            let qfim = qfim_covariance(state, &imaging_generators(d))?;
            Ok(FockCrb {
                per_phase: crb_from_qfim(&qfim, 1)?,
                symmetry_fallback: false,
            })
        }
        Scheme::Parallel => {
            let qfim = qfim_covariance(state, &parallel_generators(d))?;
            match extract_minus_block(&qfim, d) {
                Ok(block) => Ok(FockCrb {
                    per_phase: crb_from_qfim(&block, 1)?,
                    symmetry_fallback: false,
                }),
                Err(Error::AsymmetricState { .. }) => {
                    let full = crb_from_qfim(&qfim, 1)?;
                    Ok(FockCrb {
                        per_phase: full[..d].to_vec(),
                        symmetry_fallback: true,
                    })
                }
                Err(e) => Err(e),
            }
        }
    }
}

/// Full precision report through the matrix-inverse route.
///
/// The per-phase bounds never require symmetry; the Q/J diagnostics fall
/// back to plain averages when the symmetry gate rejects the state.
pub fn precision_report(
    state: &SparseState,
    scheme: Scheme,
    d: usize,
    tol: f64,
) -> Result<PrecisionReport> {
    let crb = fock_crb(state, scheme, d)?;
    let diag = match diagnostics(state, scheme, d, tol) {
        Ok((_, diag)) => diag,
        Err(Error::AsymmetricState { .. }) => raw_mode_diagnostics(state, scheme, d)?,
        Err(e) => return Err(e),
    };
    PrecisionReport::new(crb.per_phase, diag, Route::MatrixInverse)
}

/// Full precision report through the closed-form route; requires the
/// scheme's symmetry diagnostics to pass.
pub fn closed_form_report(
    state: &SparseState,
    scheme: Scheme,
    d: usize,
    tol: f64,
) -> Result<PrecisionReport> {
    let (params, diag) = diagnostics(state, scheme, d, tol)?;
    let bound = match &params {
        SchemeParams::Parallel(p) => parallel_bound(p)?,
        SchemeParams::Imaging(p) => imaging_bound(p)?,
    };
    PrecisionReport::new(vec![bound; d], diag, Route::ClosedForm)
}
