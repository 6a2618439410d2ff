//! Probe-state families: closed-form analytics and Fock realisations.
//!
//! Families under comparison, with their defining superpositions:
//!
//! - GECS: normalised sum over the `2d` modes of a single-mode displacement,
//!   `sum_a D_a(alpha)|0>`. Multimode entangled.
//! - UCS: mode-separable product of `2d` unbalanced cat modes,
//!   `(|alpha> + nu|0>)^(x2d)`.
//! - COHERENT: product of `2d` identical coherent modes (shot-noise probe).
//! - GNS: one `N`-photon excitation shared over `d` probe modes plus a
//!   reference mode weighted by `gamma`, normalised by `sqrt(d + gamma^2)`.
//! - UNO: single-mode `|N> + nu|0>`, optionally replicated per probe mode.
//! - NOON pair: `(|N,0> + |0,N>)/sqrt(2)` in one interferometer.
//!
//! Each builder returns the sparse state together with analytics evaluated
//! from the closed forms, so numerical CRBs can be checked against exact
//! values. The crossover between the entangled sum and the separable cat
//! product at matched mean photon number sits at `nu^2 = 2d`.

use num_complex::Complex64;

use crate::bounds::{imaging_bound, parallel_bound, ModeDiagnostics, Scheme, SymmetryParamsImaging, SymmetryParamsParallel};
use crate::fock::{coherent_mode, fock_basis, superpose, tensor, OccupationVector, SparseState};
use crate::limits::{ALPHA_BRACKET_MAX, MATCH_TOL, MAX_MODES, SYMMETRY_TOL};
use crate::{Error, Result};

/// Reference-mode weighting of the shared-excitation family.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Gamma {
    /// Resolves to the optimum `d^(1/4)`.
    Auto,
    Fixed(f64),
}

impl Gamma {
    pub fn resolve(&self, d: usize) -> f64 {
        match self {
            Gamma::Auto => (d as f64).sqrt().sqrt(),
            Gamma::Fixed(g) => *g,
        }
    }
}

/// Parameters of one probe-state family; fields exist exactly where the
/// family has them.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum FamilySpec {
    Gecs {
        d: usize,
        alpha: Complex64,
        epsilon: f64,
    },
    Ucs {
        d: usize,
        alpha: Complex64,
        nu: f64,
        epsilon: f64,
    },
    Coherent {
        d: usize,
        alpha: Complex64,
        epsilon: f64,
    },
    Gns {
        d: usize,
        gamma: Gamma,
        n_photons: u16,
    },
    Uno {
        n_photons: u16,
        nu: f64,
        /// Probe modes when assembled for estimation; the state itself is
        /// single-mode.
        d: usize,
    },
    NoonPair {
        n_photons: u16,
    },
}

impl FamilySpec {
    pub fn family_name(&self) -> &'static str {
        match self {
            FamilySpec::Gecs { .. } => "gecs",
            FamilySpec::Ucs { .. } => "ucs",
            FamilySpec::Coherent { .. } => "coherent",
            FamilySpec::Gns { .. } => "gns",
            FamilySpec::Uno { .. } => "uno",
            FamilySpec::NoonPair { .. } => "noon_pair",
        }
    }

    /// Natural estimation scheme of the family.
    pub fn scheme(&self) -> Scheme {
        match self {
            FamilySpec::Gecs { .. }
            | FamilySpec::Ucs { .. }
            | FamilySpec::Coherent { .. }
            | FamilySpec::NoonPair { .. } => Scheme::Parallel,
            FamilySpec::Gns { .. } | FamilySpec::Uno { .. } => Scheme::Imaging,
        }
    }

    /// Number of estimated phases when the family is assembled for its
    /// natural scheme.
    pub fn scheme_d(&self) -> usize {
        match self {
            FamilySpec::Gecs { d, .. }
            | FamilySpec::Ucs { d, .. }
            | FamilySpec::Coherent { d, .. }
            | FamilySpec::Gns { d, .. }
            | FamilySpec::Uno { d, .. } => *d,
            FamilySpec::NoonPair { .. } => 1,
        }
    }

    pub fn alpha(&self) -> Option<Complex64> {
        match self {
            FamilySpec::Gecs { alpha, .. }
            | FamilySpec::Ucs { alpha, .. }
            | FamilySpec::Coherent { alpha, .. } => Some(*alpha),
            _ => None,
        }
    }

    pub fn nu(&self) -> Option<f64> {
        match self {
            FamilySpec::Ucs { nu, .. } | FamilySpec::Uno { nu, .. } => Some(*nu),
            _ => None,
        }
    }

    pub fn gamma(&self) -> Option<f64> {
        match self {
            FamilySpec::Gns { gamma, d, .. } => Some(gamma.resolve(*d)),
            _ => None,
        }
    }

    pub fn n_photons(&self) -> Option<u16> {
        match self {
            FamilySpec::Gns { n_photons, .. }
            | FamilySpec::Uno { n_photons, .. }
            | FamilySpec::NoonPair { n_photons } => Some(*n_photons),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.scheme_d();
        if d == 0 {
            return Err(Error::InvalidParameter {
                name: "d",
                reason: "need at least one phase".into(),
            });
        }
        let modes = self.scheme().mode_count(d);
        if modes > MAX_MODES {
            return Err(Error::ModeCountUnsupported {
                got: modes,
                max: MAX_MODES,
            });
        }
        if let Some(alpha) = self.alpha() {
            if !alpha.re.is_finite() || !alpha.im.is_finite() {
                return Err(Error::NonFinite { name: "alpha" });
            }
        }
        if let Some(nu) = self.nu() {
            if !nu.is_finite() || nu < 0.0 {
                return Err(Error::InvalidParameter {
                    name: "nu",
                    reason: format!("{nu} must be finite and non-negative"),
                });
            }
        }
        if let FamilySpec::Gns {
            gamma: Gamma::Fixed(g),
            ..
        } = self
        {
            if !g.is_finite() || *g <= 0.0 {
                return Err(Error::InvalidParameter {
                    name: "gamma",
                    reason: format!("{g} must be finite and positive"),
                });
            }
        }
        if let Some(n) = self.n_photons() {
            if n == 0 {
                return Err(Error::InvalidParameter {
                    name: "n",
                    reason: "need at least one photon".into(),
                });
            }
        }
        if let FamilySpec::Gecs { epsilon, .. }
        | FamilySpec::Ucs { epsilon, .. }
        | FamilySpec::Coherent { epsilon, .. } = self
        {
            if !(*epsilon > 0.0 && *epsilon < 1.0) {
                return Err(Error::InvalidParameter {
                    name: "epsilon",
                    reason: format!("{epsilon} outside (0, 1)"),
                });
            }
        }
        Ok(())
    }

    /// Same family with the coherent amplitude rescaled to magnitude `a`,
    /// preserving its phase.
    fn with_alpha_magnitude(&self, a: f64) -> Result<FamilySpec> {
        let rescale = |alpha: Complex64| {
            if alpha.norm() == 0.0 {
                Complex64::new(a, 0.0)
            } else {
                alpha / alpha.norm() * a
            }
        };
        match *self {
            FamilySpec::Gecs { d, alpha, epsilon } => Ok(FamilySpec::Gecs {
                d,
                alpha: rescale(alpha),
                epsilon,
            }),
            FamilySpec::Ucs {
                d,
                alpha,
                nu,
                epsilon,
            } => Ok(FamilySpec::Ucs {
                d,
                alpha: rescale(alpha),
                nu,
                epsilon,
            }),
            FamilySpec::Coherent { d, alpha, epsilon } => Ok(FamilySpec::Coherent {
                d,
                alpha: rescale(alpha),
                epsilon,
            }),
            _ => Err(Error::InvalidParameter {
                name: "family",
                reason: format!("{} has no free amplitude parameter", self.family_name()),
            }),
        }
    }
}

/// Closed-form quantities of one family instance.
#[derive(Clone, Copy, Debug)]
pub struct FamilyAnalytics {
    /// Mean total photon number of the built state.
    pub n_total: f64,
    /// Exact per-phase precision bound of the family in its natural scheme.
    pub bound_exact: f64,
    /// Large-amplitude approximation where the family has one.
    pub bound_approx: Option<f64>,
    /// Normalisation constant of the defining superposition or product.
    pub normalization: f64,
}

/// Closed-form mean total photon number as a function of the coherent
/// amplitude magnitude, for the families that have one.
fn mean_photon_formula(spec: &FamilySpec, a: f64) -> Option<f64> {
    let lambda = a * a;
    match spec {
        FamilySpec::Gecs { d, .. } => {
            let m = 2.0 * *d as f64;
            Some(lambda / (1.0 + (m - 1.0) * (-lambda).exp()))
        }
        FamilySpec::Ucs { d, nu, .. } => {
            let den = 1.0 + nu * nu + 2.0 * nu * (-0.5 * lambda).exp();
            Some(2.0 * *d as f64 * lambda / den)
        }
        FamilySpec::Coherent { d, .. } => Some(2.0 * *d as f64 * lambda),
        _ => None,
    }
}

/// Evaluate a family's closed-form analytics without building any state.
pub fn closed_form_analytics(spec: &FamilySpec) -> Result<FamilyAnalytics> {
    spec.validate()?;
    match *spec {
        FamilySpec::Gecs { d, alpha, .. } => {
            let lambda = alpha.norm_sqr();
            let m = 2.0 * d as f64;
            let n_total = mean_photon_formula(spec, alpha.norm()).unwrap();
            if n_total <= 0.0 {
                return Err(Error::NoInformation {
                    detail: "zero mean photon number".into(),
                });
            }
            let bound_exact = d as f64 / (n_total * (lambda + 1.0));
            let bound_approx = d as f64 / (n_total * (n_total + 1.0));
            let normalization = 1.0 / (m * (1.0 + (m - 1.0) * (-lambda).exp())).sqrt();
            Ok(FamilyAnalytics {
                n_total,
                bound_exact,
                bound_approx: Some(bound_approx),
                normalization,
            })
        }
        FamilySpec::Ucs { d, alpha, nu, .. } => {
            let lambda = alpha.norm_sqr();
            let den = 1.0 + nu * nu + 2.0 * nu * (-0.5 * lambda).exp();
            let n_total = mean_photon_formula(spec, alpha.norm()).unwrap();
            if n_total <= 0.0 {
                return Err(Error::NoInformation {
                    detail: "zero mean photon number".into(),
                });
            }
            let per_mode = n_total / (2.0 * d as f64);
            let bound_exact = d as f64 / (n_total * (lambda + 1.0 - per_mode));
            let bound_approx =
                d as f64 / (n_total * (nu * nu * n_total / (2.0 * d as f64) + 1.0));
            Ok(FamilyAnalytics {
                n_total,
                bound_exact,
                bound_approx: Some(bound_approx),
                normalization: den.powi(-(d as i32)),
            })
        }
        FamilySpec::Coherent { d, alpha, .. } => {
            let lambda = alpha.norm_sqr();
            if lambda <= 0.0 {
                return Err(Error::NoInformation {
                    detail: "zero mean photon number".into(),
                });
            }
            Ok(FamilyAnalytics {
                n_total: 2.0 * d as f64 * lambda,
                bound_exact: 1.0 / (2.0 * lambda),
                bound_approx: None,
                normalization: 1.0,
            })
        }
        FamilySpec::Gns {
            d,
            gamma,
            n_photons,
        } => {
            let n = n_photons as f64;
            let g2 = match gamma {
                // gamma = d^(1/4): the bound simplifies to (1+sqrt(d))^2/4N^2
                // and is computed in that form for numerical exactness.
                Gamma::Auto => (d as f64).sqrt(),
                Gamma::Fixed(g) => g * g,
            };
            let bound_exact = match gamma {
                Gamma::Auto => {
                    let s = 1.0 + (d as f64).sqrt();
                    s * s / (4.0 * n * n)
                }
                Gamma::Fixed(_) => {
                    (d as f64 + g2) * (1.0 + g2) / (4.0 * g2 * n * n)
                }
            };
            Ok(FamilyAnalytics {
                n_total: n,
                bound_exact,
                bound_approx: None,
                normalization: 1.0 / (d as f64 + g2).sqrt(),
            })
        }
        FamilySpec::Uno { n_photons, nu, .. } => {
            if nu == 0.0 {
                return Err(Error::NoInformation {
                    detail: "nu = 0 leaves a number eigenstate with zero variance".into(),
                });
            }
            let n = n_photons as f64;
            let den = 1.0 + nu * nu;
            let v = n * n * nu * nu / (den * den);
            let bound_exact = imaging_bound(&SymmetryParamsImaging::new(v, 0.0, 1)?)?;
            Ok(FamilyAnalytics {
                n_total: n / den,
                bound_exact,
                bound_approx: None,
                normalization: 1.0 / den.sqrt(),
            })
        }
        FamilySpec::NoonPair { n_photons } => {
            let n = n_photons as f64;
            let v = n * n / 4.0;
            let bound_exact =
                parallel_bound(&SymmetryParamsParallel::new(v, -v, 0.0, 1)?)?;
            Ok(FamilyAnalytics {
                n_total: n,
                bound_exact,
                bound_approx: None,
                normalization: 1.0 / 2.0f64.sqrt(),
            })
        }
    }
}

/// Closed-form per-mode diagnostics of a family, matching what
/// [`crate::bounds::diagnostics`] measures on the Fock realisation.
pub fn closed_form_diagnostics(spec: &FamilySpec) -> Result<ModeDiagnostics> {
    spec.validate()?;
    let (n_bar, n_total, v, c_pair) = match *spec {
        FamilySpec::Gecs { d, alpha, .. } => {
            let lambda = alpha.norm_sqr();
            let m = 2.0 * d as f64;
            let s = 1.0 / (m * (1.0 + (m - 1.0) * (-lambda).exp()));
            let n_bar = lambda * s;
            let v = (lambda * lambda + lambda) * s - n_bar * n_bar;
            let c = -n_bar * n_bar;
            (n_bar, m * n_bar, v, c)
        }
        FamilySpec::Ucs { d, alpha, nu, .. } => {
            let lambda = alpha.norm_sqr();
            let den = 1.0 + nu * nu + 2.0 * nu * (-0.5 * lambda).exp();
            let n_bar = lambda / den;
            let v = n_bar * (lambda + 1.0 - n_bar);
            (n_bar, 2.0 * d as f64 * n_bar, v, 0.0)
        }
        FamilySpec::Coherent { d, alpha, .. } => {
            let lambda = alpha.norm_sqr();
            (lambda, 2.0 * d as f64 * lambda, lambda, 0.0)
        }
        FamilySpec::Gns {
            d,
            gamma,
            n_photons,
        } => {
            let n = n_photons as f64;
            let g = gamma.resolve(d);
            let weight = d as f64 + g * g;
            let n_bar = n / weight;
            let v = n * n * (weight - 1.0) / (weight * weight);
            let c = if d >= 2 { -n * n / (weight * weight) } else { 0.0 };
            (n_bar, n, v, c)
        }
        FamilySpec::Uno { n_photons, nu, .. } => {
            let n = n_photons as f64;
            let den = 1.0 + nu * nu;
            let n_bar = n / den;
            let v = n * n * nu * nu / (den * den);
            (n_bar, n_bar, v, 0.0)
        }
        FamilySpec::NoonPair { n_photons } => {
            let n = n_photons as f64;
            (n / 2.0, n, n * n / 4.0, -n * n / 4.0)
        }
    };
    if n_bar <= 0.0 {
        return Err(Error::MandelQUndefined { mode: 0 });
    }
    Ok(ModeDiagnostics {
        mean_per_mode: n_bar,
        mean_total: n_total,
        mandel_q: (v - n_bar) / n_bar,
        correlation_j: if v == 0.0 { 0.0 } else { c_pair / v },
    })
}

fn vacuum(cutoff: u16) -> Result<SparseState> {
    fock_basis(&OccupationVector::new(&[0])?, cutoff)
}

/// Entangled sum of one displaced mode over all `2d` modes.
///
/// The realisation is normalised numerically from the overlaps of its
/// truncated terms and cross-checked against the closed-form constant, so a
/// too-coarse truncation is caught instead of silently skewing moments.
pub fn build_gecs(d: usize, alpha: Complex64, epsilon: f64) -> Result<(SparseState, FamilyAnalytics)> {
    let spec = FamilySpec::Gecs { d, alpha, epsilon };
    let analytics = closed_form_analytics(&spec)?;
    let (coh, _) = coherent_mode(alpha, epsilon)?;
    let vac = vacuum(0)?;
    let modes = 2 * d;
    let mut terms = Vec::with_capacity(modes);
    for a in 0..modes {
        let factors: Vec<SparseState> = (0..modes)
            .map(|m| if m == a { coh.clone() } else { vac.clone() })
            .collect();
        terms.push(tensor(&factors)?);
    }
    let one = Complex64::new(1.0, 0.0);
    let refs: Vec<(Complex64, &SparseState)> = terms.iter().map(|t| (one, t)).collect();
    let (state, norm) = superpose(&refs)?;
    let expected = 1.0 / analytics.normalization;
    if (norm - expected).abs() / expected > 1e-6 {
        return Err(Error::InvalidParameter {
            name: "epsilon",
            reason: format!(
                "truncation too coarse: measured norm {norm} vs closed form {expected}"
            ),
        });
    }
    Ok((state, analytics))
}

/// Mode-separable product of `2d` unbalanced cat modes `|alpha> + nu|0>`.
pub fn build_ucs(
    d: usize,
    alpha: Complex64,
    nu: f64,
    epsilon: f64,
) -> Result<(SparseState, FamilyAnalytics)> {
    let spec = FamilySpec::Ucs {
        d,
        alpha,
        nu,
        epsilon,
    };
    let analytics = closed_form_analytics(&spec)?;
    let (coh, _) = coherent_mode(alpha, epsilon)?;
    let vac = vacuum(coh.cutoff())?;
    let (cat, _) = superpose(&[
        (Complex64::new(1.0, 0.0), &coh),
        (Complex64::new(nu, 0.0), &vac),
    ])?;
    let state = tensor(&vec![cat; 2 * d])?;
    Ok((state, analytics))
}

/// Product of `2d` identical coherent modes: the shot-noise baseline.
pub fn build_coherent(
    d: usize,
    alpha: Complex64,
    epsilon: f64,
) -> Result<(SparseState, FamilyAnalytics)> {
    let spec = FamilySpec::Coherent { d, alpha, epsilon };
    let analytics = closed_form_analytics(&spec)?;
    let (coh, _) = coherent_mode(alpha, epsilon)?;
    let state = tensor(&vec![coh; 2 * d])?;
    Ok((state, analytics))
}

/// One `N`-photon excitation shared over `d` probe modes plus a
/// `gamma`-weighted reference mode; exact finite support, no truncation.
pub fn build_gns(d: usize, gamma: Gamma, n_photons: u16) -> Result<(SparseState, FamilyAnalytics)> {
    let spec = FamilySpec::Gns {
        d,
        gamma,
        n_photons,
    };
    let analytics = closed_form_analytics(&spec)?;
    let g = gamma.resolve(d);
    let modes = d + 1;
    let mut terms = Vec::with_capacity(modes);
    let mut coeffs = Vec::with_capacity(modes);
    for mode in 0..modes {
        let mut counts = vec![0u16; modes];
        counts[mode] = n_photons;
        terms.push(fock_basis(&OccupationVector::new(&counts)?, n_photons)?);
        coeffs.push(if mode == d { g } else { 1.0 });
    }
    let refs: Vec<(Complex64, &SparseState)> = coeffs
        .iter()
        .zip(&terms)
        .map(|(c, t)| (Complex64::new(*c, 0.0), t))
        .collect();
    let (state, _) = superpose(&refs)?;
    Ok((state, analytics))
}

fn uno_state(n_photons: u16, nu: f64) -> Result<SparseState> {
    let excited = fock_basis(&OccupationVector::new(&[n_photons])?, n_photons)?;
    let vac = vacuum(n_photons)?;
    let (state, _) = superpose(&[
        (Complex64::new(1.0, 0.0), &excited),
        (Complex64::new(nu, 0.0), &vac),
    ])?;
    Ok(state)
}

/// Single-mode `|N> + nu|0>`; the local counterpart of the shared-excitation
/// family, with `nu ~ sqrt(d)` matching its precision scaling.
pub fn build_uno(n_photons: u16, nu: f64, d: usize) -> Result<(SparseState, FamilyAnalytics)> {
    let spec = FamilySpec::Uno { n_photons, nu, d };
    let analytics = closed_form_analytics(&spec)?;
    Ok((uno_state(n_photons, nu)?, analytics))
}

/// `d` independent copies of the single-mode state plus a vacuum reference,
/// laid out for the reference-mode scheme.
pub fn uno_array(n_photons: u16, nu: f64, d: usize) -> Result<SparseState> {
    if nu == 0.0 && n_photons == 0 {
        return Err(Error::DegenerateSuperposition { norm: 0.0 });
    }
    let single = uno_state(n_photons, nu)?;
    let mut factors = vec![single; d];
    factors.push(vacuum(0)?);
    tensor(&factors)
}

/// `(|N,0> + |0,N>)/sqrt(2)`: the maximally path-entangled baseline of one
/// interferometer, with per-phase bound `1/N^2`.
pub fn build_noon_pair(n_photons: u16) -> Result<(SparseState, FamilyAnalytics)> {
    let spec = FamilySpec::NoonPair { n_photons };
    let analytics = closed_form_analytics(&spec)?;
    let left = fock_basis(&OccupationVector::new(&[n_photons, 0])?, n_photons)?;
    let right = fock_basis(&OccupationVector::new(&[0, n_photons])?, n_photons)?;
    let one = Complex64::new(1.0, 0.0);
    let (state, _) = superpose(&[(one, &left), (one, &right)])?;
    Ok((state, analytics))
}

/// Build a family as its defining state.
pub fn build(spec: &FamilySpec) -> Result<(SparseState, FamilyAnalytics)> {
    match *spec {
        FamilySpec::Gecs { d, alpha, epsilon } => build_gecs(d, alpha, epsilon),
        FamilySpec::Ucs {
            d,
            alpha,
            nu,
            epsilon,
        } => build_ucs(d, alpha, nu, epsilon),
        FamilySpec::Coherent { d, alpha, epsilon } => build_coherent(d, alpha, epsilon),
        FamilySpec::Gns {
            d,
            gamma,
            n_photons,
        } => build_gns(d, gamma, n_photons),
        FamilySpec::Uno { n_photons, nu, d } => build_uno(n_photons, nu, d),
        FamilySpec::NoonPair { n_photons } => build_noon_pair(n_photons),
    }
}

/// Build a family laid out for its natural estimation scheme: identical to
/// [`build`] except that the single-mode family is replicated over its `d`
/// probe modes and given a vacuum reference.
pub fn build_for_estimation(spec: &FamilySpec) -> Result<(SparseState, FamilyAnalytics)> {
    match *spec {
        FamilySpec::Uno { n_photons, nu, d } => {
            let analytics = closed_form_analytics(spec)?;
            Ok((uno_array(n_photons, nu, d)?, analytics))
        }
        _ => build(spec),
    }
}

/// Single-mode analogue of a path-symmetric multimode state: amplitudes are
/// the square roots of one mode's photon-number marginal.
///
/// By construction the analogue has the same per-mode mean photon number
/// and Mandel Q as every mode of the input, which is why a separable
/// product of analogues reproduces the input's per-phase precision up to
/// the bounded correlation factor. Amplitude phases are discarded; mode 1
/// supplies the marginal, path symmetry making the choice immaterial.
pub fn single_mode_analogue(state: &SparseState) -> Result<SparseState> {
    let reference = state.mode_marginal(0)?;
    for mode in 1..state.mode_count() {
        let other = state.mode_marginal(mode)?;
        for (n, (a, b)) in reference.iter().zip(&other).enumerate() {
            if (a - b).abs() > SYMMETRY_TOL {
                return Err(Error::AsymmetricState {
                    detail: format!(
                        "marginal of mode {} differs from mode 1 at n = {n}: {b:.12e} vs {a:.12e}",
                        mode + 1
                    ),
                });
            }
        }
    }
    let terms: Vec<(Complex64, SparseState)> = reference
        .iter()
        .enumerate()
        .filter(|(_, p)| **p > 0.0)
        .map(|(n, p)| {
            let basis = fock_basis(&OccupationVector::new(&[n as u16])?, state.cutoff())?;
            Ok((Complex64::new(p.sqrt(), 0.0), basis))
        })
        .collect::<Result<_>>()?;
    let refs: Vec<(Complex64, &SparseState)> = terms.iter().map(|(c, s)| (*c, s)).collect();
    Ok(superpose(&refs)?.0)
}

/// Adjust a family's coherent amplitude so its closed-form mean total
/// photon number hits `target_n_total`, by bisection on the monotone
/// `n_total(|alpha|)` over `[0, ALPHA_BRACKET_MAX]`.
pub fn match_mean_photon(spec: &FamilySpec, target_n_total: f64) -> Result<FamilySpec> {
    spec.validate()?;
    if mean_photon_formula(spec, 0.0).is_none() {
        return Err(Error::InvalidParameter {
            name: "family",
            reason: format!("{} has no free amplitude parameter", spec.family_name()),
        });
    }
    if !target_n_total.is_finite() || target_n_total < 0.0 {
        return Err(Error::UnreachableTarget {
            target: target_n_total,
            reason: "target must be finite and non-negative".into(),
        });
    }
    if target_n_total == 0.0 {
        // alpha = 0 reaches zero exactly; the boundary is accepted.
        return spec.with_alpha_magnitude(0.0);
    }
    let n_at = |a: f64| mean_photon_formula(spec, a).unwrap();
    let mut lo = 0.0f64;
    let mut hi = ALPHA_BRACKET_MAX;
    if n_at(hi) < target_n_total {
        return Err(Error::UnreachableTarget {
            target: target_n_total,
            reason: format!(
                "exceeds n_total({hi}) = {} for this family",
                n_at(hi)
            ),
        });
    }
    let mut mid = 0.5 * hi;
    for _ in 0..200 {
        mid = 0.5 * (lo + hi);
        let n_mid = n_at(mid);
        if (n_mid - target_n_total).abs() <= MATCH_TOL {
            break;
        }
        if n_mid < target_n_total {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if (n_at(mid) - target_n_total).abs() > 1e-10 {
        return Err(Error::UnreachableTarget {
            target: target_n_total,
            reason: format!("bisection stalled at n_total = {}", n_at(mid)),
        });
    }
    spec.with_alpha_magnitude(mid)
}

/// Threshold `nu = sqrt(2d)` above which the separable cat product beats
/// the entangled coherent sum at matched mean photon number.
pub fn crossover_nu(d: usize) -> f64 {
    assert!(d >= 1, "need at least one interferometer");
    (2.0 * d as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bounds::{diagnostics, fock_crb, Scheme};
    use crate::fock::number_moments;
    use crate::limits::DEFAULT_EPSILON;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn measured_n_total(state: &SparseState) -> f64 {
        (0..state.mode_count())
            .map(|i| number_moments(state, i, i).unwrap().mean_i)
            .sum()
    }

    #[test]
    fn large_alpha_approximations_stay_within_five_percent() {
        for alpha in [4.0, 5.0] {
            for d in [1usize, 2] {
                let gecs = FamilySpec::Gecs {
                    d,
                    alpha: c(alpha),
                    epsilon: DEFAULT_EPSILON,
                };
                let a = closed_form_analytics(&gecs).unwrap();
                let approx = a.bound_approx.unwrap();
                assert!((a.bound_exact - approx).abs() / a.bound_exact < 0.05);
                for nu in [0.5, 1.0, 3.0] {
                    let ucs = FamilySpec::Ucs {
                        d,
                        alpha: c(alpha),
                        nu,
                        epsilon: DEFAULT_EPSILON,
                    };
                    let a = closed_form_analytics(&ucs).unwrap();
                    let approx = a.bound_approx.unwrap();
                    assert!(
                        (a.bound_exact - approx).abs() / a.bound_exact < 0.05,
                        "alpha={alpha} nu={nu} d={d}"
                    );
                }
            }
        }
    }

    #[test]
    fn gecs_fock_realisation_matches_closed_forms() {
        let (state, analytics) = build_gecs(2, c(2.0), DEFAULT_EPSILON).unwrap();
        assert_eq!(state.mode_count(), 4);
        assert!((measured_n_total(&state) - analytics.n_total).abs() < 1e-6);
        let crb = fock_crb(&state, Scheme::Parallel, 2).unwrap();
        assert!(!crb.symmetry_fallback);
        for b in &crb.per_phase {
            assert!(
                (b - analytics.bound_exact).abs() / analytics.bound_exact < 1e-6,
                "{b} vs {}",
                analytics.bound_exact
            );
        }
    }

    #[test]
    fn ucs_reduces_to_shot_noise_at_nu_zero() {
        let spec = FamilySpec::Ucs {
            d: 2,
            alpha: c(1.5),
            nu: 0.0,
            epsilon: DEFAULT_EPSILON,
        };
        let a = closed_form_analytics(&spec).unwrap();
        assert!((a.bound_exact - 1.0 / (2.0 * 2.25)).abs() < 1e-12);
    }

    #[test]
    fn ucs_mean_photon_hand_value() {
        // d = 1, alpha = 1, nu = 1: N = 2/(2 + 2 e^{-1/2}).
        let spec = FamilySpec::Ucs {
            d: 1,
            alpha: c(1.0),
            nu: 1.0,
            epsilon: DEFAULT_EPSILON,
        };
        let a = closed_form_analytics(&spec).unwrap();
        let expected = 2.0 / (2.0 + 2.0 * (-0.5f64).exp());
        assert!((a.n_total - expected).abs() < 1e-12);
        let (state, _) = build_ucs(1, c(1.0), 1.0, DEFAULT_EPSILON).unwrap();
        assert!((measured_n_total(&state) - expected).abs() < 1e-9);
    }

    #[test]
    fn ucs_bound_equals_inverse_mode_variance() {
        // Algebraic identity: the exact bound is 1/(2 V_mode) with
        // V_mode = n (lambda + 1 - n), n the per-mode mean.
        for &alpha in &[0.5, 1.0, 2.0, 4.0] {
            for &nu in &[0.0, 0.5, 1.0, 3.0] {
                for d in [1usize, 2] {
                    let spec = FamilySpec::Ucs {
                        d,
                        alpha: c(alpha),
                        nu,
                        epsilon: DEFAULT_EPSILON,
                    };
                    let a = closed_form_analytics(&spec).unwrap();
                    let lambda = alpha * alpha;
                    let n = a.n_total / (2.0 * d as f64);
                    let v_mode = n * (lambda + 1.0 - n);
                    assert!(
                        (a.bound_exact * 2.0 * v_mode - 1.0).abs() < 1e-12,
                        "alpha={alpha} nu={nu} d={d}"
                    );
                }
            }
        }
    }

    #[test]
    fn ucs_fock_oracle_agrees_with_formula() {
        let (state, analytics) = build_ucs(2, c(2.0), 1.0, DEFAULT_EPSILON).unwrap();
        let crb = fock_crb(&state, Scheme::Parallel, 2).unwrap();
        for b in &crb.per_phase {
            assert!((b - analytics.bound_exact).abs() / analytics.bound_exact < 1e-6);
        }
    }

    #[test]
    fn ucs_fock_oracle_large_unbalanced_cat() {
        // Millions of product amplitudes; the measured CRB still matches
        // the closed form to oracle precision.
        let (state, analytics) = build_ucs(2, c(4.0), 3.0, DEFAULT_EPSILON).unwrap();
        assert!(state.support_len() > 1_000_000);
        let crb = fock_crb(&state, Scheme::Parallel, 2).unwrap();
        for b in &crb.per_phase {
            assert!((b - analytics.bound_exact).abs() / analytics.bound_exact < 1e-6);
        }
        assert!((measured_n_total(&state) - analytics.n_total).abs() < 1e-6);
    }

    #[test]
    fn gns_fixture_and_automatic_gamma() {
        let (_, a) = build_gns(2, Gamma::Fixed(1.0), 1).unwrap();
        assert!((a.bound_exact - 1.5).abs() < 1e-15);
        assert_eq!(a.n_total, 1.0);

        let (_, auto4) = build_gns(4, Gamma::Auto, 1).unwrap();
        assert_eq!(auto4.bound_exact, 9.0 / 4.0);
        let (_, auto4n2) = build_gns(4, Gamma::Auto, 2).unwrap();
        assert_eq!(auto4n2.bound_exact, 9.0 / 16.0);
    }

    #[test]
    fn gns_diagnostics_correlation() {
        let (state, _) = build_gns(2, Gamma::Fixed(1.0), 1).unwrap();
        let (_, diag) = diagnostics(&state, Scheme::Imaging, 2, SYMMETRY_TOL).unwrap();
        assert!((diag.correlation_j + 0.5).abs() < 1e-12);
        let cf = closed_form_diagnostics(&FamilySpec::Gns {
            d: 2,
            gamma: Gamma::Fixed(1.0),
            n_photons: 1,
        })
        .unwrap();
        assert!((cf.correlation_j + 0.5).abs() < 1e-15);
    }

    #[test]
    fn gns_reduces_to_noon_pair_at_d_one() {
        for n in [1u16, 2, 3] {
            let (gns, _) = build_gns(1, Gamma::Fixed(1.0), n).unwrap();
            let (noon, noon_analytics) = build_noon_pair(n).unwrap();
            for (occ, amp) in gns.iter() {
                assert!((noon.amplitude(occ) - amp).norm() < 1e-15);
            }
            let crb = fock_crb(&gns, Scheme::Imaging, 1).unwrap();
            assert!((crb.per_phase[0] - noon_analytics.bound_exact).abs() < 1e-9);
        }
    }

    #[test]
    fn uno_hand_values_and_zero_nu() {
        let (_, a) = build_uno(2, 1.0, 1).unwrap();
        assert_eq!(a.bound_exact, 0.25);
        assert!(matches!(
            build_uno(2, 0.0, 1),
            Err(Error::NoInformation { .. })
        ));
    }

    #[test]
    fn uno_with_sqrt_d_tracks_shared_excitation_scaling() {
        // nu = sqrt(d) gives bound (1+d)^2/(4 d N^2): within the O(d/N^2)
        // class, between 1x and 4x of d/(4 N^2) for all d.
        let n = 2u16;
        for d in [1usize, 2, 4, 8] {
            let nu = (d as f64).sqrt();
            let (_, a) = build_uno(n, nu, d).unwrap();
            let expected = (1.0 + d as f64).powi(2) / (4.0 * d as f64 * (n as f64).powi(2));
            assert!((a.bound_exact - expected).abs() < 1e-12);
            let class = d as f64 / (4.0 * (n as f64).powi(2));
            assert!(a.bound_exact >= class && a.bound_exact <= 4.0 * class);
        }
    }

    #[test]
    fn uno_array_oracle_matches_single_mode_bound() {
        let (_, analytics) = build_uno(2, 1.0, 2).unwrap();
        let state = uno_array(2, 1.0, 2).unwrap();
        assert_eq!(state.mode_count(), 3);
        let crb = fock_crb(&state, Scheme::Imaging, 2).unwrap();
        for b in &crb.per_phase {
            assert!((b - analytics.bound_exact).abs() < 1e-9);
        }
    }

    #[test]
    fn noon_pair_bounds() {
        for n in [1u16, 2, 3, 4] {
            let (state, a) = build_noon_pair(n).unwrap();
            assert!((a.bound_exact - 1.0 / (n as f64).powi(2)).abs() < 1e-12);
            let crb = fock_crb(&state, Scheme::Parallel, 1).unwrap();
            assert!((crb.per_phase[0] - a.bound_exact).abs() < 1e-12);
        }
    }

    #[test]
    fn coherent_family_is_shot_noise_probe() {
        let (state, a) = build_coherent(2, c(1.0), DEFAULT_EPSILON).unwrap();
        assert!((a.bound_exact - 0.5).abs() < 1e-12);
        let crb = fock_crb(&state, Scheme::Parallel, 2).unwrap();
        for b in &crb.per_phase {
            assert!((b - 0.5).abs() < 1e-8);
        }
    }

    #[test]
    fn analogue_of_cat_product_is_the_cat() {
        let (coh, _) = coherent_mode(c(1.0), DEFAULT_EPSILON).unwrap();
        let vac = vacuum(coh.cutoff()).unwrap();
        let (cat, _) = superpose(&[(c(1.0), &coh), (c(1.0), &vac)]).unwrap();
        let probe = tensor(&vec![cat.clone(); 4]).unwrap();
        let analogue = single_mode_analogue(&probe).unwrap();
        for (occ, amp) in cat.iter() {
            assert!((analogue.amplitude(occ).re - amp.re.abs()).abs() < 1e-12);
        }
        let min = number_moments(&cat, 0, 0).unwrap();
        let mout = number_moments(&analogue, 0, 0).unwrap();
        assert!((min.mean_i - mout.mean_i).abs() < 1e-12);
        assert!((min.cov - mout.cov).abs() < 1e-12);
    }

    #[test]
    fn analogue_of_shared_two_photon_state() {
        let (state, _) = build_gns(2, Gamma::Fixed(1.0), 2).unwrap();
        let analogue = single_mode_analogue(&state).unwrap();
        let a0 = analogue
            .amplitude(&OccupationVector::new(&[0]).unwrap())
            .re;
        let a2 = analogue
            .amplitude(&OccupationVector::new(&[2]).unwrap())
            .re;
        assert!((a0 - (2.0f64 / 3.0).sqrt()).abs() < 1e-12);
        assert!((a2 - (1.0f64 / 3.0).sqrt()).abs() < 1e-12);
        assert_eq!(
            analogue
                .amplitude(&OccupationVector::new(&[1]).unwrap())
                .norm(),
            0.0
        );
        let q = |s: &SparseState| {
            let m = number_moments(s, 0, 0).unwrap();
            (m.cov - m.mean_i) / m.mean_i
        };
        assert!((q(&state) - q(&analogue)).abs() < 1e-12);
    }

    #[test]
    fn analogue_preserves_mandel_q_for_truncated_sum() {
        let (state, _) = build_gecs(1, c(2.0), DEFAULT_EPSILON).unwrap();
        let analogue = single_mode_analogue(&state).unwrap();
        let q = |s: &SparseState, mode: usize| {
            let m = number_moments(s, mode, mode).unwrap();
            (m.cov - m.mean_i) / m.mean_i
        };
        assert!((q(&state, 0) - q(&analogue, 0)).abs() < 1e-8);
    }

    #[test]
    fn analogue_rejects_asymmetric_input() {
        let (coh, _) = coherent_mode(c(1.0), DEFAULT_EPSILON).unwrap();
        let vac = vacuum(coh.cutoff()).unwrap();
        let probe = tensor(&[coh, vac]).unwrap();
        assert!(matches!(
            single_mode_analogue(&probe),
            Err(Error::AsymmetricState { .. })
        ));
    }

    #[test]
    fn match_mean_photon_closed_form_cases() {
        // nu = 0 cat product is a coherent product: N = 2 d |alpha|^2, so a
        // target of 4 at d = 1 needs alpha = sqrt(2).
        let spec = FamilySpec::Ucs {
            d: 1,
            alpha: c(1.0),
            nu: 0.0,
            epsilon: DEFAULT_EPSILON,
        };
        let matched = match_mean_photon(&spec, 4.0).unwrap();
        assert!((matched.alpha().unwrap().re - 2.0f64.sqrt()).abs() < 1e-10);

        let gecs = FamilySpec::Gecs {
            d: 2,
            alpha: c(1.0),
            epsilon: DEFAULT_EPSILON,
        };
        let target = mean_photon_formula(&gecs, 3.0).unwrap();
        let matched = match_mean_photon(&gecs, target).unwrap();
        assert!((matched.alpha().unwrap().re - 3.0).abs() < 1e-10);
    }

    #[test]
    fn match_mean_photon_boundaries() {
        let spec = FamilySpec::Ucs {
            d: 1,
            alpha: c(1.0),
            nu: 1.0,
            epsilon: DEFAULT_EPSILON,
        };
        let zero = match_mean_photon(&spec, 0.0).unwrap();
        assert_eq!(zero.alpha().unwrap(), c(0.0));
        assert!(matches!(
            match_mean_photon(&spec, -1.0),
            Err(Error::UnreachableTarget { .. })
        ));
        assert!(matches!(
            match_mean_photon(&spec, 1e9),
            Err(Error::UnreachableTarget { .. })
        ));
        let gns = FamilySpec::Gns {
            d: 2,
            gamma: Gamma::Auto,
            n_photons: 1,
        };
        assert!(matches!(
            match_mean_photon(&gns, 1.0),
            Err(Error::InvalidParameter { .. })
        ));
    }

    #[test]
    fn crossover_threshold_values() {
        assert_eq!(crossover_nu(2), 2.0);
        assert!((crossover_nu(1) - 2.0f64.sqrt()).abs() < 1e-15);
        assert_eq!(crossover_nu(8), 4.0);
    }

    #[test]
    fn crossover_verdict_flips_at_matched_mean_photon() {
        for d in [1usize, 2, 3] {
            let gecs = FamilySpec::Gecs {
                d,
                alpha: c(4.0),
                epsilon: DEFAULT_EPSILON,
            };
            let target = closed_form_analytics(&gecs).unwrap().n_total;
            let gecs_bound = closed_form_analytics(&gecs).unwrap().bound_exact;
            let margin = 0.1;
            for (factor, ucs_should_win) in [(1.0 - margin, false), (1.0 + margin, true)] {
                let nu = (2.0 * d as f64 * factor).sqrt();
                let ucs = FamilySpec::Ucs {
                    d,
                    alpha: c(4.0),
                    nu,
                    epsilon: DEFAULT_EPSILON,
                };
                let matched = match_mean_photon(&ucs, target).unwrap();
                let ucs_bound = closed_form_analytics(&matched).unwrap().bound_exact;
                if ucs_should_win {
                    assert!(ucs_bound < gecs_bound, "d={d} nu^2={}", nu * nu);
                } else {
                    assert!(ucs_bound > gecs_bound, "d={d} nu^2={}", nu * nu);
                }
            }
        }
    }

    #[test]
    fn closed_form_diagnostics_match_measured_ones() {
        let specs = [
            FamilySpec::Gecs {
                d: 2,
                alpha: c(1.5),
                epsilon: DEFAULT_EPSILON,
            },
            FamilySpec::Ucs {
                d: 1,
                alpha: c(1.0),
                nu: 1.0,
                epsilon: DEFAULT_EPSILON,
            },
            FamilySpec::Coherent {
                d: 1,
                alpha: c(1.2),
                epsilon: DEFAULT_EPSILON,
            },
            FamilySpec::Gns {
                d: 3,
                gamma: Gamma::Fixed(1.0),
                n_photons: 2,
            },
            FamilySpec::Uno {
                n_photons: 2,
                nu: 1.5,
                d: 2,
            },
            FamilySpec::NoonPair { n_photons: 3 },
        ];
        for spec in &specs {
            let cf = closed_form_diagnostics(spec).unwrap();
            let (state, _) = build_for_estimation(spec).unwrap();
            let (_, measured) =
                diagnostics(&state, spec.scheme(), spec.scheme_d(), SYMMETRY_TOL).unwrap();
            assert!(
                (cf.mean_per_mode - measured.mean_per_mode).abs() < 1e-7,
                "{spec:?}: mean"
            );
            assert!(
                (cf.mandel_q - measured.mandel_q).abs() < 1e-6,
                "{spec:?}: Q {} vs {}",
                cf.mandel_q,
                measured.mandel_q
            );
            assert!(
                (cf.correlation_j - measured.correlation_j).abs() < 1e-7,
                "{spec:?}: J"
            );
        }
    }

    #[test]
    fn analytics_match_fock_oracle_across_families() {
        // Every family at feasible sizes: the measured CRB and mean photon
        // number reproduce the closed forms to oracle precision.
        let specs = [
            FamilySpec::Gecs {
                d: 1,
                alpha: c(2.0),
                epsilon: DEFAULT_EPSILON,
            },
            FamilySpec::Gecs {
                d: 3,
                alpha: c(2.0),
                epsilon: DEFAULT_EPSILON,
            },
            FamilySpec::Ucs {
                d: 1,
                alpha: c(2.0),
                nu: 0.5,
                epsilon: DEFAULT_EPSILON,
            },
            FamilySpec::Ucs {
                d: 3,
                alpha: c(0.8),
                nu: 2.0,
                epsilon: DEFAULT_EPSILON,
            },
            FamilySpec::Coherent {
                d: 2,
                alpha: c(1.5),
                epsilon: DEFAULT_EPSILON,
            },
            FamilySpec::Gns {
                d: 3,
                gamma: Gamma::Fixed(1.0),
                n_photons: 4,
            },
            FamilySpec::Gns {
                d: 2,
                gamma: Gamma::Auto,
                n_photons: 2,
            },
            FamilySpec::Uno {
                n_photons: 4,
                nu: 2.0,
                d: 3,
            },
            FamilySpec::NoonPair { n_photons: 4 },
        ];
        for spec in &specs {
            let (state, analytics) = build_for_estimation(spec).unwrap();
            assert!(
                (measured_n_total(&state) - mean_total_for(spec, &analytics)).abs() < 1e-6,
                "{spec:?}: mean photon number"
            );
            let crb = fock_crb(&state, spec.scheme(), spec.scheme_d()).unwrap();
            for b in &crb.per_phase {
                let rel = (b - analytics.bound_exact).abs() / analytics.bound_exact;
                assert!(rel < 1e-6, "{spec:?}: CRB {b} vs {}", analytics.bound_exact);
            }
        }
    }

    /// Expected total mean photons of the estimation layout; the single-mode
    /// family is replicated over its probe modes.
    fn mean_total_for(spec: &FamilySpec, analytics: &FamilyAnalytics) -> f64 {
        match spec {
            FamilySpec::Uno { d, .. } => analytics.n_total * *d as f64,
            _ => analytics.n_total,
        }
    }

    #[test]
    fn parameter_validation() {
        assert!(FamilySpec::Gecs {
            d: 9,
            alpha: c(1.0),
            epsilon: DEFAULT_EPSILON
        }
        .validate()
        .is_err());
        assert!(FamilySpec::Gns {
            d: 15,
            gamma: Gamma::Auto,
            n_photons: 1
        }
        .validate()
        .is_ok());
        assert!(FamilySpec::Gns {
            d: 16,
            gamma: Gamma::Auto,
            n_photons: 1
        }
        .validate()
        .is_err());
        assert!(FamilySpec::Ucs {
            d: 1,
            alpha: c(1.0),
            nu: -0.5,
            epsilon: DEFAULT_EPSILON
        }
        .validate()
        .is_err());
        assert!(FamilySpec::Gns {
            d: 2,
            gamma: Gamma::Fixed(0.0),
            n_photons: 1
        }
        .validate()
        .is_err());
    }
}
