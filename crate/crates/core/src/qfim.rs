//! Phase generators and the quantum Fisher information matrix.
//!
//! All generators here are real combinations of mode number operators, so
//! any two commute structurally and the pure-state QFIM reduces to
//! `F_lm = 4 Cov(O_l, O_m)` over the input state. That covariance route is
//! exact on the stored amplitudes. An independent check comes from the
//! finite-difference oracle, which builds central-difference derivative
//! states with [`apply_phase`] and evaluates
//! `F_lm = 4 Re[<d_l psi|d_m psi> - <d_l psi|psi><psi|d_m psi>]`
//! without ever touching the moment accumulators.

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::fock::{self, apply_phase, OccupationVector, SparseState};
use crate::limits::{FD_MAX_STEP, OFF_BLOCK_TOL, QFIM_PSD_FLOOR, QFIM_SYMMETRY_TOL};
use crate::{Error, Result};

/// Real combination of mode number operators, `O = sum_j coeffs_j n_j`.
#[derive(Clone, Debug, PartialEq)]
pub struct Generator {
    coeffs: Vec<f64>,
}

impl Generator {
    pub fn new(coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::InvalidParameter {
                name: "coeffs",
                reason: "empty generator".into(),
            });
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite { name: "coeffs" });
        }
        Ok(Self { coeffs })
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn mode_count(&self) -> usize {
        self.coeffs.len()
    }
}

impl fmt::Display for Generator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let active: Vec<(usize, f64)> = self
            .coeffs
            .iter()
            .copied()
            .enumerate()
            .filter(|(_, c)| *c != 0.0)
            .collect();
        if active.is_empty() {
            return write!(f, "0");
        }
        // Compact forms for the two standard constructions.
        if active.len() == 1 && active[0].1 == 1.0 {
            return write!(f, "n{}", active[0].0 + 1);
        }
        if active.len() == 2 && active[0].1 == 0.5 && active[1].1.abs() == 0.5 {
            let sign = if active[1].1 > 0.0 { '+' } else { '-' };
            return write!(f, "(n{} {} n{})/2", active[0].0 + 1, sign, active[1].0 + 1);
        }
        for (k, (mode, c)) in active.iter().enumerate() {
            if k > 0 {
                write!(f, " + ")?;
            }
            write!(f, "{c}*n{}", mode + 1)?;
        }
        Ok(())
    }
}

/// Generators for estimating `d` phases against a common reference mode.
///
/// Acts on `M = d + 1` modes with the reference phase pinned to zero, so the
/// generator of phase `i` is just `n_i`; the reference mode carries no
/// coefficient.
pub fn imaging_generators(d: usize) -> Vec<Generator> {
    assert!(d >= 1, "need at least one phase");
    (0..d)
        .map(|i| {
            let mut coeffs = vec![0.0; d + 1];
            coeffs[i] = 1.0;
            Generator { coeffs }
        })
        .collect()
}

/// Generators for `d` parallel two-mode interferometers.
///
/// Acts on `M = 2d` modes, interferometer `i` on modes `2i-1, 2i` (1-based).
/// Returns `2d` generators ordered as the `d` difference generators
/// `(n_{2i-1} - n_{2i})/2` followed by the `d` sum generators
/// `(n_{2i-1} + n_{2i})/2`; the phases of interest are conjugate to the
/// difference block.
pub fn parallel_generators(d: usize) -> Vec<Generator> {
    assert!(d >= 1, "need at least one interferometer");
    let mut gens = Vec::with_capacity(2 * d);
    for sign in [-1.0, 1.0] {
        for i in 0..d {
            let mut coeffs = vec![0.0; 2 * d];
            coeffs[2 * i] = 0.5;
            coeffs[2 * i + 1] = sign * 0.5;
            gens.push(Generator { coeffs });
        }
    }
    gens
}

/// Which route produced a QFIM.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QfimSource {
    AnalyticCovariance,
    FiniteDifferenceOracle,
}

/// Quantum Fisher information matrix with generator labels.
///
/// Construction verifies symmetry within [`QFIM_SYMMETRY_TOL`] and positive
/// semidefiniteness down to the [`QFIM_PSD_FLOOR`] rounding floor.
#[derive(Clone, Debug)]
pub struct Qfim {
    matrix: DMatrix<f64>,
    labels: Vec<String>,
    source: QfimSource,
}

impl Qfim {
    pub fn new(matrix: DMatrix<f64>, labels: Vec<String>, source: QfimSource) -> Result<Self> {
        let n = matrix.nrows();
        if matrix.ncols() != n || labels.len() != n || n == 0 {
            return Err(Error::InvalidParameter {
                name: "matrix",
                reason: format!(
                    "need square matrix with one label per row, got {}x{} with {} labels",
                    matrix.nrows(),
                    matrix.ncols(),
                    labels.len()
                ),
            });
        }
        let mut asymmetry = 0.0f64;
        for i in 0..n {
            for j in (i + 1)..n {
                asymmetry = asymmetry.max((matrix[(i, j)] - matrix[(j, i)]).abs());
            }
        }
        if asymmetry > QFIM_SYMMETRY_TOL {
            return Err(Error::NotSymmetric { asymmetry });
        }
        let min_eigenvalue = SymmetricEigen::new(matrix.clone())
            .eigenvalues
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min);
        if min_eigenvalue < QFIM_PSD_FLOOR {
            return Err(Error::NotPositiveSemidefinite { min_eigenvalue });
        }
        Ok(Self {
            matrix,
            labels,
            source,
        })
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn entry(&self, l: usize, m: usize) -> f64 {
        self.matrix[(l, m)]
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn source(&self) -> QfimSource {
        self.source
    }

    /// Largest absolute entry; zero matrices report 0.
    pub fn max_abs(&self) -> f64 {
        self.matrix.iter().fold(0.0f64, |a, x| a.max(x.abs()))
    }
}

fn check_generators(state: &SparseState, gens: &[Generator]) -> Result<()> {
    if gens.is_empty() {
        return Err(Error::InvalidParameter {
            name: "generators",
            reason: "empty generator list".into(),
        });
    }
    for g in gens {
        if g.mode_count() != state.mode_count() {
            return Err(Error::GeneratorLengthMismatch {
                got: g.mode_count(),
                expected: state.mode_count(),
            });
        }
    }
    Ok(())
}

/// QFIM from the covariance identity `F_lm = 4 Cov(O_l, O_m)`, exact for
/// the mutually commuting number-diagonal generators used here.
pub fn qfim_covariance(state: &SparseState, gens: &[Generator]) -> Result<Qfim> {
    check_generators(state, gens)?;
    let m = state.mode_count();
    let (_, cov) = fock::number_covariances(state);
    let n = gens.len();
    let mut matrix = DMatrix::zeros(n, n);
    for l in 0..n {
        for mm in l..n {
            let mut acc = 0.0;
            for j in 0..m {
                let gl = gens[l].coeffs()[j];
                if gl == 0.0 {
                    continue;
                }
                for k in 0..m {
                    let gm = gens[mm].coeffs()[k];
                    if gm == 0.0 {
                        continue;
                    }
                    acc += gl * gm * cov[j * m + k];
                }
            }
            let f = 4.0 * acc;
            matrix[(l, mm)] = f;
            matrix[(mm, l)] = f;
        }
    }
    let labels = gens.iter().map(|g| g.to_string()).collect();
    Qfim::new(matrix, labels, QfimSource::AnalyticCovariance)
}

/// Central-difference derivative state `(U(+h)|psi> - U(-h)|psi>)/(2h)`
/// along one generator direction, as a raw amplitude map.
fn central_difference_state(
    state: &SparseState,
    gen: &Generator,
    step: f64,
) -> Result<BTreeMap<OccupationVector, Complex64>> {
    let theta_plus: Vec<f64> = gen.coeffs().iter().map(|c| c * step).collect();
    let theta_minus: Vec<f64> = gen.coeffs().iter().map(|c| -c * step).collect();
    let plus = apply_phase(state, &theta_plus)?;
    let minus = apply_phase(state, &theta_minus)?;
    let inv = 1.0 / (2.0 * step);
    let mut diff = BTreeMap::new();
    for ((occ, ap), (_, am)) in plus.iter().zip(minus.iter()) {
        diff.insert(*occ, (ap - am) * inv);
    }
    Ok(diff)
}

/// Finite-difference QFIM oracle.
///
/// Discretises the pure-state identity
/// `F_lm = 4 Re[<d_l psi|d_m psi> - <d_l psi|psi><psi|d_m psi>]`
/// with second-order central differences of step `step` along each
/// generator direction, then symmetrises by averaging `(l,m)` and `(m,l)`.
/// The discretisation error scales as `O(step^2)`.
pub fn qfim_fd_oracle(state: &SparseState, gens: &[Generator], step: f64) -> Result<Qfim> {
    if !(step > 0.0 && step <= FD_MAX_STEP) {
        return Err(Error::StepOutOfRange {
            step,
            max: FD_MAX_STEP,
        });
    }
    check_generators(state, gens)?;
    let n = gens.len();
    let diffs: Vec<BTreeMap<OccupationVector, Complex64>> = gens
        .iter()
        .map(|g| central_difference_state(state, g, step))
        .collect::<Result<_>>()?;
    // u_l = <psi|d_l psi>
    let u: Vec<Complex64> = diffs.iter().map(|d| fock::raw_overlap(state.map(), d)).collect();
    let mut matrix = DMatrix::zeros(n, n);
    for l in 0..n {
        for m in l..n {
            let g = fock::raw_overlap(&diffs[l], &diffs[m]);
            let f_lm = 4.0 * (g.re - (u[l].conj() * u[m]).re);
            let g_rev = fock::raw_overlap(&diffs[m], &diffs[l]);
            let f_ml = 4.0 * (g_rev.re - (u[m].conj() * u[l]).re);
            let avg = 0.5 * (f_lm + f_ml);
            matrix[(l, m)] = avg;
            matrix[(m, l)] = avg;
        }
    }
    let labels = gens.iter().map(|g| g.to_string()).collect();
    Qfim::new(matrix, labels, QfimSource::FiniteDifferenceOracle)
}

/// One step of Richardson extrapolation over [`qfim_fd_oracle`]:
/// `(4 F(h/2) - F(h)) / 3` cancels the leading `O(h^2)` error term.
pub fn qfim_fd_oracle_refined(state: &SparseState, gens: &[Generator], step: f64) -> Result<Qfim> {
    let coarse = qfim_fd_oracle(state, gens, step)?;
    let fine = qfim_fd_oracle(state, gens, step / 2.0)?;
    let matrix = (fine.matrix() * 4.0 - coarse.matrix()) / 3.0;
    Qfim::new(
        matrix,
        coarse.labels().to_vec(),
        QfimSource::FiniteDifferenceOracle,
    )
}

/// Extract the difference-generator block of a parallel-scheme QFIM.
///
/// For probe states symmetric within each interferometer the cross blocks
/// between difference and sum generators vanish and the inverse of the full
/// matrix restricts to the inverse of the top-left `d x d` block. The cross
/// blocks are verified to be at most [`OFF_BLOCK_TOL`] before being
/// discarded; otherwise the closed-form route does not apply and the caller
/// must invert the full `2d x 2d` matrix.
pub fn extract_minus_block(qfim: &Qfim, d: usize) -> Result<Qfim> {
    if qfim.dim() != 2 * d || d == 0 {
        return Err(Error::InvalidParameter {
            name: "d",
            reason: format!("QFIM is {}x{0}, expected {}x{1}", qfim.dim(), 2 * d),
        });
    }
    for i in 0..d {
        for j in d..2 * d {
            let value = qfim.entry(i, j);
            if value.abs() > OFF_BLOCK_TOL {
                return Err(Error::AsymmetricState {
                    detail: format!(
                        "cross-block entry F[{},{}] = {value:.6e} exceeds {OFF_BLOCK_TOL:.0e}",
                        i + 1,
                        j + 1
                    ),
                });
            }
        }
    }
    let block = qfim.matrix().view((0, 0), (d, d)).into_owned();
    Qfim::new(block, qfim.labels()[..d].to_vec(), qfim.source())
}
