//! Command implementations. Each command turns a [`RunConfig`] into a list
//! of CSV rows plus an exit code:
//!
//! - 0: every row succeeded and every discrepancy stayed within tolerance;
//! - 1: a tolerance or row-level evaluation failure;
//! - 2: configuration error (reported on stderr, no CSV written);
//! - 3: a resource cap was hit.
//!
//! Output is deterministic: no randomness, ordered maps throughout the
//! library, rows emitted in axis order, floats formatted with shortest
//! round-trip precision.

use std::fmt::Write as _;

use phasebound::bounds::{
    diagnostics, fock_crb, raw_mode_diagnostics, ModeDiagnostics, Scheme,
};
use phasebound::families::{
    build_for_estimation, closed_form_analytics, closed_form_diagnostics, crossover_nu,
    match_mean_photon, FamilyAnalytics, FamilySpec,
};
use phasebound::limits::FD_DEFAULT_STEP;
use phasebound::qfim::{imaging_generators, parallel_generators, qfim_covariance, qfim_fd_oracle};
use phasebound::Error;

use crate::config::{apply_sweep_value, ConfigError, MatchRule, RefSide, RunConfig};

/// Acceptable relative deviation between the finite-difference QFIM oracle
/// and the covariance QFIM during validation, at the default step.
const FD_GATE: f64 = 1e-5;

/// Floor for relative-discrepancy denominators.
const DISCREPANCY_FLOOR: f64 = 1e-15;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Bound,
    Validate,
    Sweep,
    Compare,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Bound => "bound",
            Command::Validate => "validate",
            Command::Sweep => "sweep",
            Command::Compare => "compare",
        }
    }
}

/// One output row; `None` renders as an empty cell.
#[derive(Clone, Debug, Default)]
struct Row {
    command: String,
    family: String,
    scheme: String,
    d: Option<usize>,
    alpha: Option<f64>,
    nu: Option<f64>,
    gamma: Option<f64>,
    n_photons: Option<u16>,
    epsilon: Option<f64>,
    tol: f64,
    n_total: Option<f64>,
    bound_analytic: Option<f64>,
    bound_oracle: Option<f64>,
    discrepancy: Option<f64>,
    mandel_q: Option<f64>,
    correlation_j: Option<f64>,
    route: String,
    status: String,
    verdict: Option<String>,
    verdict_total_budget: Option<String>,
    crossover_nu: Option<f64>,
}

const BASE_COLUMNS: &str = "command,family,scheme,d,alpha,nu,gamma,n_photons,epsilon,tol,\
n_total,bound_analytic,bound_oracle,discrepancy,mandel_q,correlation_j,route,status";

fn fmt_opt_f64(v: Option<f64>) -> String {
    v.map(|x| format!("{x}")).unwrap_or_default()
}

impl Row {
    fn new(command: Command, spec: &FamilySpec, tol: f64) -> Self {
        Row {
            command: command.name().to_string(),
            family: spec.family_name().to_string(),
            scheme: spec.scheme().name().to_string(),
            d: Some(spec.scheme_d()),
            alpha: spec.alpha().map(|a| a.re),
            nu: spec.nu(),
            gamma: spec.gamma(),
            n_photons: spec.n_photons(),
            epsilon: match spec {
                FamilySpec::Gecs { epsilon, .. }
                | FamilySpec::Ucs { epsilon, .. }
                | FamilySpec::Coherent { epsilon, .. } => Some(*epsilon),
                _ => None,
            },
            tol,
            route: String::new(),
            status: String::new(),
            ..Row::default()
        }
    }

    fn to_csv(&self, compare: bool) -> String {
        let mut line = String::new();
        let _ = write!(
            line,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.command,
            self.family,
            self.scheme,
            self.d.map(|d| d.to_string()).unwrap_or_default(),
            fmt_opt_f64(self.alpha),
            fmt_opt_f64(self.nu),
            fmt_opt_f64(self.gamma),
            self.n_photons.map(|n| n.to_string()).unwrap_or_default(),
            fmt_opt_f64(self.epsilon),
            self.tol,
            fmt_opt_f64(self.n_total),
            fmt_opt_f64(self.bound_analytic),
            fmt_opt_f64(self.bound_oracle),
            fmt_opt_f64(self.discrepancy),
            fmt_opt_f64(self.mandel_q),
            fmt_opt_f64(self.correlation_j),
            self.route,
            self.status,
        );
        if compare {
            let _ = write!(
                line,
                ",{},{},{}",
                self.verdict.clone().unwrap_or_default(),
                self.verdict_total_budget.clone().unwrap_or_default(),
                fmt_opt_f64(self.crossover_nu),
            );
        }
        line
    }
}

fn error_kind(e: &Error) -> &'static str {
    if e.is_resource() {
        return "resource";
    }
    match e {
        Error::NoInformation { .. } | Error::MandelQUndefined { .. } => "no-information",
        Error::NonIdentifiable { .. } => "non-identifiable",
        Error::AsymmetricState { .. } => "asymmetric",
        Error::UnreachableTarget { .. } => "unreachable",
        _ => "invalid",
    }
}

fn fill_closed_form(row: &mut Row, analytics: &FamilyAnalytics, diag: &ModeDiagnostics) {
    row.n_total = Some(analytics.n_total);
    row.bound_analytic = Some(analytics.bound_exact);
    row.mandel_q = Some(diag.mandel_q);
    row.correlation_j = Some(diag.correlation_j);
    row.route = "closed-form".to_string();
    row.status = "ok".to_string();
}

fn closed_form_row(command: Command, spec: &FamilySpec, tol: f64) -> Row {
    let mut row = Row::new(command, spec, tol);
    match closed_form_analytics(spec).and_then(|a| Ok((a, closed_form_diagnostics(spec)?))) {
        Ok((analytics, diag)) => fill_closed_form(&mut row, &analytics, &diag),
        Err(e) => {
            row.route = "closed-form".to_string();
            row.status = format!("error({})", error_kind(&e));
        }
    }
    row
}

fn check_scheme(config: &RunConfig, spec: &FamilySpec) -> Result<(), ConfigError> {
    if let Some(scheme) = config.scheme {
        if scheme != spec.scheme() {
            return Err(ConfigError(format!(
                "key 'scheme': family '{}' runs in the {} scheme",
                spec.family_name(),
                spec.scheme().name()
            )));
        }
    }
    Ok(())
}

fn single_family(config: &RunConfig) -> Result<&FamilySpec, ConfigError> {
    match config.families.as_slice() {
        [(_, spec)] => Ok(spec),
        [] => Err(ConfigError("a [family] section is required".into())),
        _ => Err(ConfigError(
            "exactly one [family] section is expected for this command".into(),
        )),
    }
}

/// Analytic bound at one parameter point; no Fock construction.
fn run_bound(config: &RunConfig) -> Result<(Vec<Row>, i32), ConfigError> {
    let spec = single_family(config)?;
    check_scheme(config, spec)?;
    // Parameter problems on a single-point evaluation are config errors.
    closed_form_analytics(spec).map_err(|e| ConfigError(format!("family parameters: {e}")))?;
    let row = closed_form_row(Command::Bound, spec, config.tol);
    Ok((vec![row], 0))
}

/// Build the Fock realisation, measure its QFIM both ways, invert, and
/// compare with the analytic bound.
fn run_validate(config: &RunConfig) -> Result<(Vec<Row>, i32), ConfigError> {
    let spec = single_family(config)?;
    check_scheme(config, spec)?;
    let analytics =
        closed_form_analytics(spec).map_err(|e| ConfigError(format!("family parameters: {e}")))?;
    let mut row = Row::new(Command::Validate, spec, config.tol);
    row.n_total = Some(analytics.n_total);
    row.bound_analytic = Some(analytics.bound_exact);

    let scheme = spec.scheme();
    let d = spec.scheme_d();
    let state = match build_for_estimation(spec) {
        Ok((state, _)) => state,
        Err(e) => {
            row.route = "matrix-inverse".to_string();
            row.status = format!("error({})", error_kind(&e));
            let code = if e.is_resource() { 3 } else { 1 };
            return Ok((vec![row], code));
        }
    };

    let evaluation = (|| -> Result<(Vec<f64>, bool, f64), Error> {
        let gens = match scheme {
            Scheme::Parallel => parallel_generators(d),
            Scheme::Imaging => imaging_generators(d),
        };
        let cov = qfim_covariance(&state, &gens)?;
        let fd = qfim_fd_oracle(&state, &gens, FD_DEFAULT_STEP)?;
        let mut fd_dev = 0.0f64;
        for i in 0..cov.dim() {
            for j in 0..cov.dim() {
                fd_dev = fd_dev.max((cov.entry(i, j) - fd.entry(i, j)).abs());
            }
        }
        let fd_rel = fd_dev / cov.max_abs().max(1.0);
        let crb = fock_crb(&state, scheme, d)?;
        Ok((crb.per_phase, crb.symmetry_fallback, fd_rel))
    })();

    let (per_phase, fallback, fd_rel) = match evaluation {
        Ok(v) => v,
        Err(e) => {
            row.route = "matrix-inverse".to_string();
            row.status = format!("error({})", error_kind(&e));
            let code = if e.is_resource() { 3 } else { 1 };
            return Ok((vec![row], code));
        }
    };

    let oracle = per_phase.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let discrepancy =
        (analytics.bound_exact - oracle).abs() / analytics.bound_exact.max(DISCREPANCY_FLOOR);
    row.bound_oracle = Some(oracle);
    row.discrepancy = Some(discrepancy);
    row.route = if fallback {
        "matrix-inverse-fallback".to_string()
    } else {
        "matrix-inverse".to_string()
    };
    let diag = match diagnostics(&state, scheme, d, phasebound::limits::SYMMETRY_TOL) {
        Ok((_, diag)) => Some(diag),
        Err(Error::AsymmetricState { .. }) => raw_mode_diagnostics(&state, scheme, d).ok(),
        Err(_) => None,
    };
    if let Some(diag) = diag {
        row.mandel_q = Some(diag.mandel_q);
        row.correlation_j = Some(diag.correlation_j);
    }

    let mut code = 0;
    if fd_rel > FD_GATE {
        row.status = "error(fd-mismatch)".to_string();
        code = 1;
    } else if discrepancy > config.tol {
        row.status = "error(tolerance)".to_string();
        code = 1;
    } else {
        row.status = "ok".to_string();
    }
    Ok((vec![row], code))
}

/// Analytic bound along one parameter axis, optionally re-matching the mean
/// photon number at every point.
fn run_sweep(config: &RunConfig) -> Result<(Vec<Row>, i32), ConfigError> {
    let spec = single_family(config)?;
    check_scheme(config, spec)?;
    let Some(axis) = &config.sweep else {
        return Err(ConfigError("sweep requires a [sweep] section".into()));
    };
    // Surface unusable axis parameters before producing rows.
    apply_sweep_value(spec, &axis.parameter, axis.from)?;

    let mut rows = Vec::with_capacity(axis.steps);
    let mut any_failed = false;
    let mut any_resource = false;
    for value in axis.points() {
        let point = match apply_sweep_value(spec, &axis.parameter, value) {
            Ok(point) => point,
            Err(_) => {
                let mut row = Row::new(Command::Sweep, spec, config.tol);
                row.status = "error(invalid)".to_string();
                any_failed = true;
                rows.push(row);
                continue;
            }
        };
        let matched = match axis.match_n_total {
            Some(target) => match match_mean_photon(&point, target) {
                Ok(m) => m,
                Err(e) => {
                    let mut row = Row::new(Command::Sweep, &point, config.tol);
                    row.status = format!("error({})", error_kind(&e));
                    any_resource |= e.is_resource();
                    any_failed = true;
                    rows.push(row);
                    continue;
                }
            },
            None => point,
        };
        let row = closed_form_row(Command::Sweep, &matched, config.tol);
        if row.status != "ok" {
            any_failed = true;
            any_resource |= row.status.contains("resource");
        }
        rows.push(row);
    }
    let code = if any_resource {
        3
    } else if any_failed {
        1
    } else {
        0
    };
    Ok((rows, code))
}

/// Evaluate two families side by side and add verdict columns.
fn run_compare(config: &RunConfig) -> Result<(Vec<Row>, i32), ConfigError> {
    let mut pairs: Vec<&(String, FamilySpec)> = config.families.iter().collect();
    // Side 'a' is the lexicographically first section name, so the
    // [compare] reference key is independent of file order.
    pairs.sort_by(|x, y| x.0.cmp(&y.0));
    let [(_, spec_a), (_, spec_b)] = pairs.as_slice() else {
        return Err(ConfigError(
            "compare requires exactly two family sections ([family.a] and [family.b])".into(),
        ));
    };
    let Some(rule) = &config.compare else {
        return Err(ConfigError("compare requires a [compare] section".into()));
    };

    let (spec_a, spec_b) = match rule.match_rule {
        MatchRule::EqualNTotal => {
            let (reference, other) = match rule.reference {
                RefSide::A => (spec_a, spec_b),
                RefSide::B => (spec_b, spec_a),
            };
            let target = closed_form_analytics(reference)
                .map_err(|e| ConfigError(format!("reference family: {e}")))?
                .n_total;
            let matched = match_mean_photon(other, target)
                .map_err(|e| ConfigError(format!("photon matching: {e}")))?;
            match rule.reference {
                RefSide::A => (*spec_a, matched),
                RefSide::B => (matched, *spec_b),
            }
        }
        MatchRule::None => (*spec_a, *spec_b),
    };

    let mut row_a = closed_form_row(Command::Compare, &spec_a, config.tol);
    let mut row_b = closed_form_row(Command::Compare, &spec_b, config.tol);
    let code = if row_a.status != "ok" || row_b.status != "ok" {
        1
    } else {
        0
    };

    if let (Some(a), Some(b)) = (row_a.bound_analytic, row_b.bound_analytic) {
        let verdict = if a < b {
            spec_a.family_name()
        } else if b < a {
            spec_b.family_name()
        } else {
            "tie"
        };
        row_a.verdict = Some(verdict.to_string());
        row_b.verdict = Some(verdict.to_string());

        match rule.match_rule {
            MatchRule::EqualNTotal => {
                // Totals are equal by construction, so the same verdict
                // holds under the total-budget convention.
                row_a.verdict_total_budget = Some(verdict.to_string());
                row_b.verdict_total_budget = Some(verdict.to_string());
            }
            MatchRule::None => {
                if let Some(budget_verdict) =
                    shared_vs_single_budget_verdict(&spec_a, &spec_b, a, b)
                {
                    row_a.verdict_total_budget = Some(budget_verdict.clone());
                    row_b.verdict_total_budget = Some(budget_verdict);
                }
            }
        }
    }

    // The separable-vs-entangled pair carries its analytic threshold.
    let names = (spec_a.family_name(), spec_b.family_name());
    if (names == ("ucs", "gecs") || names == ("gecs", "ucs"))
        && spec_a.scheme_d() == spec_b.scheme_d()
    {
        let threshold = crossover_nu(spec_a.scheme_d());
        row_a.crossover_nu = Some(threshold);
        row_b.crossover_nu = Some(threshold);
    }

    Ok((vec![row_a, row_b], code))
}

/// Verdict for the shared-excitation family against the single-mode array
/// when both are granted the same total photon budget: the array's bound
/// rescales to `d^2 / (4 nu^2 N_total^2)`.
fn shared_vs_single_budget_verdict(
    spec_a: &FamilySpec,
    spec_b: &FamilySpec,
    bound_a: f64,
    bound_b: f64,
) -> Option<String> {
    let (gns, uno, gns_bound) = match (spec_a, spec_b) {
        (FamilySpec::Gns { .. }, FamilySpec::Uno { .. }) => (spec_a, spec_b, bound_a),
        (FamilySpec::Uno { .. }, FamilySpec::Gns { .. }) => (spec_b, spec_a, bound_b),
        _ => return None,
    };
    let FamilySpec::Gns { d, n_photons, .. } = gns else {
        return None;
    };
    let FamilySpec::Uno { nu, .. } = uno else {
        return None;
    };
    if *nu == 0.0 {
        return None;
    }
    let budget = *n_photons as f64;
    let uno_at_budget = (*d as f64) * (*d as f64) / (4.0 * nu * nu * budget * budget);
    let verdict = if uno_at_budget < gns_bound {
        "uno"
    } else if gns_bound < uno_at_budget {
        "gns"
    } else {
        "tie"
    };
    Some(verdict.to_string())
}

/// Render rows as CSV with the fixed column order.
fn to_csv(command: Command, rows: &[Row]) -> String {
    let compare = command == Command::Compare;
    let mut out = String::from(BASE_COLUMNS);
    if compare {
        out.push_str(",verdict,verdict_total_budget,crossover_nu");
    }
    out.push('\n');
    for row in rows {
        out.push_str(&row.to_csv(compare));
        out.push('\n');
    }
    out
}

pub fn execute(command: Command, config: &RunConfig) -> Result<(String, i32), ConfigError> {
    let (rows, code) = match command {
        Command::Bound => run_bound(config)?,
        Command::Validate => run_validate(config)?,
        Command::Sweep => run_sweep(config)?,
        Command::Compare => run_compare(config)?,
    };
    Ok((to_csv(command, &rows), code))
}
