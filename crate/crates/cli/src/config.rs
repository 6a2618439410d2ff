//! Declarative run configuration: a flat key-value file with one nesting
//! level of named sections, e.g.
//!
//! ```text
//! tol = 1e-9
//!
//! [family]
//! family = gns
//! d = 2
//! gamma = 1
//! n = 1
//! ```
//!
//! Sweeps go in a `[sweep]` section, comparisons pair `[family.a]` and
//! `[family.b]` with a `[compare]` section. Every parse failure names the
//! offending key so misconfigurations are config errors, not runtime ones.

use phasebound::num_complex::Complex64;
use phasebound::bounds::Scheme;
use phasebound::families::{FamilySpec, Gamma};

/// Config-level failure with a human-readable message naming the field.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

fn err<T>(message: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError(message.into()))
}

/// Raw key-value lines, order-preserving.
struct Section {
    name: String,
    entries: Vec<(String, String, bool)>,
}

impl Section {
    fn take(&mut self, key: &str) -> Option<String> {
        for (k, v, consumed) in &mut self.entries {
            if k == key && !*consumed {
                *consumed = true;
                return Some(v.clone());
            }
        }
        None
    }

    fn require(&mut self, key: &str) -> Result<String, ConfigError> {
        match self.take(key) {
            Some(v) => Ok(v),
            None => err(format!("section [{}] requires key '{key}'", self.name)),
        }
    }

    fn finish(&self) -> Result<(), ConfigError> {
        for (k, _, consumed) in &self.entries {
            if !consumed {
                return err(format!("unknown key '{k}' in section [{}]", self.name));
            }
        }
        Ok(())
    }
}

fn parse_sections(text: &str) -> Result<Vec<Section>, ConfigError> {
    let mut sections = vec![Section {
        name: "top".into(),
        entries: Vec::new(),
    }];
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
            let name = name.trim().to_string();
            if name.is_empty() {
                return err(format!("line {}: empty section name", lineno + 1));
            }
            sections.push(Section {
                name,
                entries: Vec::new(),
            });
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return err(format!("line {}: expected 'key = value', got '{line}'", lineno + 1));
        };
        let key = key.trim().to_string();
        let value = value.trim().to_string();
        let section = sections.last_mut().unwrap();
        if section.entries.iter().any(|(k, _, _)| *k == key) {
            return err(format!(
                "duplicate key '{key}' in section [{}]",
                section.name
            ));
        }
        section.entries.push((key, value, false));
    }
    Ok(sections)
}

fn parse_f64(name: &str, value: &str) -> Result<f64, ConfigError> {
    match value.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => err(format!("key '{name}': '{value}' is not a finite number")),
    }
}

fn parse_usize(name: &str, value: &str) -> Result<usize, ConfigError> {
    match value.parse::<usize>() {
        Ok(v) => Ok(v),
        _ => err(format!("key '{name}': '{value}' is not a non-negative integer")),
    }
}

fn parse_u16(name: &str, value: &str) -> Result<u16, ConfigError> {
    match value.parse::<u16>() {
        Ok(v) => Ok(v),
        _ => err(format!("key '{name}': '{value}' is not an integer in 0..65536")),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Spacing {
    Linear,
    Log,
}

#[derive(Clone, Debug)]
pub struct SweepAxis {
    pub parameter: String,
    pub from: f64,
    pub to: f64,
    pub steps: usize,
    pub spacing: Spacing,
    pub match_n_total: Option<f64>,
}

impl SweepAxis {
    /// Axis values in order.
    pub fn points(&self) -> Vec<f64> {
        if self.steps == 1 {
            return vec![self.from];
        }
        (0..self.steps)
            .map(|k| {
                let t = k as f64 / (self.steps - 1) as f64;
                match self.spacing {
                    Spacing::Linear => self.from + t * (self.to - self.from),
                    Spacing::Log => self.from * (self.to / self.from).powf(t),
                }
            })
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MatchRule {
    EqualNTotal,
    None,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RefSide {
    A,
    B,
}

#[derive(Clone, Debug)]
pub struct CompareRule {
    pub match_rule: MatchRule,
    pub reference: RefSide,
}

/// Fully parsed run configuration.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub scheme: Option<Scheme>,
    pub tol: f64,
    pub out: Option<String>,
    pub families: Vec<(String, FamilySpec)>,
    pub sweep: Option<SweepAxis>,
    pub compare: Option<CompareRule>,
}

/// Flag overrides from the command line; they win over file values.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub out: Option<String>,
    pub tol: Option<f64>,
    pub epsilon: Option<f64>,
}

fn require_float(section: &mut Section, family: &str, key: &str) -> Result<f64, ConfigError> {
    match section.take(key) {
        Some(v) => parse_f64(key, &v),
        None => err(format!(
            "family '{family}' in [{}] requires key '{key}'",
            section.name
        )),
    }
}

fn family_from_section(
    section: &mut Section,
    epsilon: f64,
) -> Result<FamilySpec, ConfigError> {
    let family = section.require("family")?;
    let spec = match family.as_str() {
        "gecs" | "ucs" | "coherent" => {
            let alpha = Complex64::new(require_float(section, &family, "alpha")?, 0.0);
            let nu = if family == "ucs" {
                require_float(section, &family, "nu")?
            } else {
                0.0
            };
            let d = parse_usize("d", &section.require("d")?)?;
            match family.as_str() {
                "gecs" => FamilySpec::Gecs { d, alpha, epsilon },
                "ucs" => FamilySpec::Ucs {
                    d,
                    alpha,
                    nu,
                    epsilon,
                },
                _ => FamilySpec::Coherent { d, alpha, epsilon },
            }
        }
        "gns" => {
            let d = parse_usize("d", &section.require("d")?)?;
            let gamma_raw = section.require("gamma")?;
            let gamma = if gamma_raw == "auto" {
                Gamma::Auto
            } else {
                Gamma::Fixed(parse_f64("gamma", &gamma_raw)?)
            };
            let n_photons = parse_u16("n", &section.require("n")?)?;
            FamilySpec::Gns {
                d,
                gamma,
                n_photons,
            }
        }
        "uno" => {
            let n_photons = parse_u16("n", &section.require("n")?)?;
            let nu = parse_f64("nu", &section.require("nu")?)?;
            let d = match section.take("d") {
                Some(v) => parse_usize("d", &v)?,
                None => 1,
            };
            FamilySpec::Uno { n_photons, nu, d }
        }
        "noon_pair" => {
            let n_photons = parse_u16("n", &section.require("n")?)?;
            FamilySpec::NoonPair { n_photons }
        }
        other => return err(format!("unknown family '{other}'")),
    };
    section.finish()?;
    if let Err(e) = spec.validate() {
        return err(format!("family '{family}': {e}"));
    }
    Ok(spec)
}

pub fn load(text: &str, overrides: &Overrides) -> Result<RunConfig, ConfigError> {
    let mut sections = parse_sections(text)?;

    let mut scheme = None;
    let mut tol = 1e-6;
    let mut epsilon = 1e-12;
    let mut out = None;
    {
        let top = &mut sections[0];
        if let Some(v) = top.take("scheme") {
            scheme = Some(match v.as_str() {
                "parallel" => Scheme::Parallel,
                "imaging" => Scheme::Imaging,
                other => return err(format!("key 'scheme': unknown scheme '{other}'")),
            });
        }
        if let Some(v) = top.take("tol") {
            tol = parse_f64("tol", &v)?;
        }
        if let Some(v) = top.take("epsilon") {
            epsilon = parse_f64("epsilon", &v)?;
        }
        out = top.take("out").or(out);
        top.finish()?;
    }
    if let Some(t) = overrides.tol {
        tol = t;
    }
    if let Some(e) = overrides.epsilon {
        epsilon = e;
    }
    if overrides.out.is_some() {
        out = overrides.out.clone();
    }
    if tol <= 0.0 {
        return err(format!("key 'tol': {tol} must be positive"));
    }
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return err(format!("key 'epsilon': {epsilon} outside (0, 1)"));
    }

    let mut families = Vec::new();
    let mut sweep = None;
    let mut compare = None;
    for section in &mut sections[1..] {
        let section_name = section.name.clone();
        match section_name.as_str() {
            name if name == "family" || name.starts_with("family.") => {
                let spec = family_from_section(section, epsilon)?;
                families.push((name.to_string(), spec));
            }
            "sweep" => {
                let parameter = section.require("parameter")?;
                let from = parse_f64("from", &section.require("from")?)?;
                let to = parse_f64("to", &section.require("to")?)?;
                let steps = parse_usize("steps", &section.require("steps")?)?;
                let spacing = match section.take("spacing").as_deref() {
                    None | Some("linear") => Spacing::Linear,
                    Some("log") => Spacing::Log,
                    Some(other) => {
                        return err(format!("key 'spacing': unknown spacing '{other}'"))
                    }
                };
                let match_n_total = match section.take("match_n_total") {
                    Some(v) => Some(parse_f64("match_n_total", &v)?),
                    None => None,
                };
                section.finish()?;
                if steps < 1 {
                    return err("key 'steps': must be at least 1");
                }
                if from >= to {
                    return err(format!("sweep range: from = {from} must be below to = {to}"));
                }
                if spacing == Spacing::Log && from <= 0.0 {
                    return err("key 'spacing': log spacing requires from > 0");
                }
                sweep = Some(SweepAxis {
                    parameter,
                    from,
                    to,
                    steps,
                    spacing,
                    match_n_total,
                });
            }
            "compare" => {
                let match_rule = match section.require("match")?.as_str() {
                    "equal_n_total" => MatchRule::EqualNTotal,
                    "none" => MatchRule::None,
                    other => return err(format!("key 'match': unknown rule '{other}'")),
                };
                let reference = match section.take("reference").as_deref() {
                    Some("a") => RefSide::A,
                    Some("b") | None => RefSide::B,
                    Some(other) => {
                        return err(format!("key 'reference': expected 'a' or 'b', got '{other}'"))
                    }
                };
                section.finish()?;
                compare = Some(CompareRule {
                    match_rule,
                    reference,
                });
            }
            other => return err(format!("unknown section [{other}]")),
        }
    }

    Ok(RunConfig {
        scheme,
        tol,
        out,
        families,
        sweep,
        compare,
    })
}

/// Replace the swept parameter in a family spec; integer parameters are
/// rounded to the nearest admissible value.
pub fn apply_sweep_value(
    spec: &FamilySpec,
    parameter: &str,
    value: f64,
) -> Result<FamilySpec, ConfigError> {
    let family = spec.family_name();
    let unsupported = || {
        err(format!(
            "sweep parameter '{parameter}' does not exist for family '{family}'"
        ))
    };
    let as_u16 = |value: f64| -> Result<u16, ConfigError> {
        let rounded = value.round();
        if rounded < 1.0 || rounded > u16::MAX as f64 {
            return err(format!("sweep value {value} out of range for '{parameter}'"));
        }
        Ok(rounded as u16)
    };
    let updated = match (parameter, *spec) {
        ("alpha", FamilySpec::Gecs { d, epsilon, .. }) => FamilySpec::Gecs {
            d,
            alpha: Complex64::new(value, 0.0),
            epsilon,
        },
        ("alpha", FamilySpec::Ucs { d, nu, epsilon, .. }) => FamilySpec::Ucs {
            d,
            alpha: Complex64::new(value, 0.0),
            nu,
            epsilon,
        },
        ("alpha", FamilySpec::Coherent { d, epsilon, .. }) => FamilySpec::Coherent {
            d,
            alpha: Complex64::new(value, 0.0),
            epsilon,
        },
        ("nu", FamilySpec::Ucs { d, alpha, epsilon, .. }) => FamilySpec::Ucs {
            d,
            alpha,
            nu: value,
            epsilon,
        },
        ("nu", FamilySpec::Uno { n_photons, d, .. }) => FamilySpec::Uno {
            n_photons,
            nu: value,
            d,
        },
        ("gamma", FamilySpec::Gns { d, n_photons, .. }) => FamilySpec::Gns {
            d,
            gamma: Gamma::Fixed(value),
            n_photons,
        },
        ("n", FamilySpec::Gns { d, gamma, .. }) => FamilySpec::Gns {
            d,
            gamma,
            n_photons: as_u16(value)?,
        },
        ("n", FamilySpec::Uno { nu, d, .. }) => FamilySpec::Uno {
            n_photons: as_u16(value)?,
            nu,
            d,
        },
        ("n", FamilySpec::NoonPair { .. }) => FamilySpec::NoonPair {
            n_photons: as_u16(value)?,
        },
        ("d", FamilySpec::Gecs { alpha, epsilon, .. }) => FamilySpec::Gecs {
            d: as_u16(value)? as usize,
            alpha,
            epsilon,
        },
        ("d", FamilySpec::Ucs { alpha, nu, epsilon, .. }) => FamilySpec::Ucs {
            d: as_u16(value)? as usize,
            alpha,
            nu,
            epsilon,
        },
        ("d", FamilySpec::Coherent { alpha, epsilon, .. }) => FamilySpec::Coherent {
            d: as_u16(value)? as usize,
            alpha,
            epsilon,
        },
        ("d", FamilySpec::Gns { gamma, n_photons, .. }) => FamilySpec::Gns {
            d: as_u16(value)? as usize,
            gamma,
            n_photons,
        },
        ("d", FamilySpec::Uno { n_photons, nu, .. }) => FamilySpec::Uno {
            n_photons,
            nu,
            d: as_u16(value)? as usize,
        },
        _ => return unsupported(),
    };
    Ok(updated)
}
