//! Scenario files.
//!
//! Grammar, one item per line:
//!
//! ```text
//! # comment            (also allowed after a value)
//! [section]
//! key = value
//! ```
//!
//! Keys and section names are case-sensitive. Lists are comma separated.
//! Unknown sections and keys are rejected, as are keys that do not apply to
//! the selected family. Every key has a default, and the resolved values are
//! echoed by the `Display` impl in the same grammar.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use nldisp_core::reaction::Reaction;
use nldisp_core::{
    lipschitz_estimate, make_kernel, Cap, Extension, Grid, Kernel, Profile, Scheme, Window,
};

use crate::output::read_tabulated_kernel;

/// One problem found in a scenario file.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub section: String,
    pub key: Option<String>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(line) = self.line {
            write!(f, "line {line}: ")?;
        }
        write!(f, "[{}]", self.section)?;
        if let Some(key) = &self.key {
            write!(f, " {key}")?;
        }
        write!(f, ": {}", self.message)
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{}", .0.iter().map(|e| e.to_string()).collect::<Vec<_>>().join("\n"))]
pub struct ValidationErrors(pub Vec<ConfigError>);

const SCHEMA: &[(&str, &[&str])] = &[
    (
        "kernel",
        &[
            "family",
            "sigma",
            "half_width",
            "rate",
            "param",
            "file",
            "mass_tolerance",
            "quadrature_step",
            "step",
        ],
    ),
    ("domain", &["x_min", "x_max", "h", "extension"]),
    ("reaction", &["family", "r", "r0", "r1", "L"]),
    ("model", &["D", "cap", "steady_tol", "steady_max_time"]),
    (
        "evolve",
        &[
            "scheme",
            "dt",
            "horizon",
            "snapshot_interval",
            "snapshot_times",
            "series_tolerance",
            "initial",
            "initial_amplitude",
            "initial_width",
            "initial_center",
        ],
    ),
    ("speed", &["mu_min", "mu_max", "level", "fit_window", "tol"]),
    ("window", &["a", "b"]),
    (
        "diagnostics",
        &[
            "ensemble",
            "members",
            "amplitude",
            "width",
            "spacing",
            "modes",
            "times",
            "k",
            "trials",
            "t",
        ],
    ),
    ("output", &["svg", "trajectory_stride"]),
];

#[derive(Debug, Clone, PartialEq)]
pub enum KernelFamily {
    Gaussian {
        sigma: f64,
    },
    Uniform {
        half_width: f64,
    },
    Laplace {
        rate: f64,
    },
    Tabulated {
        file: PathBuf,
        xs: Vec<f64>,
        values: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct KernelConfig {
    pub family: KernelFamily,
    pub mass_tolerance: f64,
    pub quadrature_step: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DomainConfig {
    pub x_min: f64,
    pub x_max: f64,
    pub h: f64,
    pub extension: Extension,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ReactionConfig {
    None,
    Logistic { r: f64 },
    PeriodicKpp { r0: f64, r1: f64, period: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub dispersal: f64,
    pub cap: f64,
    pub cap_auto: bool,
    pub steady_tol: f64,
    pub steady_max_time: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitialShape {
    /// `cos^2` bump of half-width `initial_width`.
    Bump,
    /// Indicator of `|x - center| <= width`.
    Step,
    Constant,
}

impl InitialShape {
    fn name(&self) -> &'static str {
        match self {
            InitialShape::Bump => "bump",
            InitialShape::Step => "step",
            InitialShape::Constant => "constant",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvolveConfig {
    pub scheme: Scheme,
    pub dt: f64,
    pub horizon: f64,
    pub snapshot_times: Vec<f64>,
    pub snapshot_interval: Option<f64>,
    pub series_tolerance: f64,
    pub initial: InitialShape,
    pub initial_amplitude: f64,
    pub initial_width: f64,
    pub initial_center: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpeedConfig {
    pub mu_min: f64,
    pub mu_max: f64,
    pub level: f64,
    pub fit_window: (f64, f64),
    pub tol: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnsembleChoice {
    Translates,
    RandomFourier,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticsConfig {
    pub ensemble: EnsembleChoice,
    pub members: usize,
    pub amplitude: f64,
    pub width: f64,
    pub spacing: f64,
    pub modes: usize,
    pub times: Vec<f64>,
    pub k: usize,
    pub trials: usize,
    pub t: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputConfig {
    pub svg: bool,
    pub trajectory_stride: usize,
}

/// A fully resolved scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub kernel: KernelConfig,
    pub domain: DomainConfig,
    pub reaction: ReactionConfig,
    pub model: ModelConfig,
    pub evolve: EvolveConfig,
    pub speed: SpeedConfig,
    pub window: Window,
    pub diagnostics: DiagnosticsConfig,
    pub output: OutputConfig,
    /// `k_f` of the reaction on `[0, cap]`.
    pub lipschitz: f64,
}

struct Entry {
    value: String,
    line: usize,
    used: bool,
}

struct Section {
    line: usize,
    entries: BTreeMap<String, Entry>,
}

/// Parse and validate scenario text. Relative file paths resolve against
/// `base_dir`.
pub fn validate(text: &str, base_dir: &Path) -> Result<ScenarioConfig, ValidationErrors> {
    let mut errors = Vec::new();
    let mut sections = parse(text, &mut errors);
    if !errors.is_empty() {
        return Err(ValidationErrors(errors));
    }
    let mut r = Resolver {
        sections: &mut sections,
        errors: &mut errors,
    };
    let config = r.resolve(base_dir);
    for (name, sec) in sections.iter() {
        for (key, e) in &sec.entries {
            if !e.used {
                let known = SCHEMA
                    .iter()
                    .find(|(s, _)| s == name)
                    .map(|(_, k)| *k)
                    .unwrap_or(&[]);
                if known.contains(&key.as_str()) {
                    errors.push(ConfigError {
                        line: Some(e.line),
                        section: name.clone(),
                        key: Some(key.clone()),
                        message: "does not apply to the selected family".into(),
                    });
                }
            }
        }
    }
    match config {
        Some(c) if errors.is_empty() => Ok(c),
        _ => {
            errors.sort_by_key(|e| e.line.unwrap_or(usize::MAX));
            Err(ValidationErrors(errors))
        }
    }
}

fn suggestion(word: &str, candidates: impl Iterator<Item = String>) -> Option<String> {
    candidates
        .map(|c| (strsim::jaro_winkler(word, &c), c))
        .filter(|(s, _)| *s > 0.8)
        .max_by(|a, b| a.0.total_cmp(&b.0))
        .map(|(_, c)| c)
}

fn parse(text: &str, errors: &mut Vec<ConfigError>) -> BTreeMap<String, Section> {
    let mut sections: BTreeMap<String, Section> = BTreeMap::new();
    let mut current: Option<String> = None;
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(rest) = content.strip_prefix('[') {
            let Some(name) = rest.strip_suffix(']') else {
                errors.push(ConfigError {
                    line: Some(line),
                    section: rest.to_string(),
                    key: None,
                    message: "unterminated section header".into(),
                });
                current = None;
                continue;
            };
            let name = name.trim().to_string();
            if !SCHEMA.iter().any(|(s, _)| *s == name) {
                let hint = suggestion(&name, SCHEMA.iter().map(|(s, _)| s.to_string()))
                    .map(|s| format!("; did you mean [{s}]?"))
                    .unwrap_or_default();
                errors.push(ConfigError {
                    line: Some(line),
                    section: name.clone(),
                    key: None,
                    message: format!("unknown section{hint}"),
                });
                current = None;
                continue;
            }
            if sections.contains_key(&name) {
                errors.push(ConfigError {
                    line: Some(line),
                    section: name.clone(),
                    key: None,
                    message: "section appears twice".into(),
                });
            }
            sections.entry(name.clone()).or_insert(Section {
                line,
                entries: BTreeMap::new(),
            });
            current = Some(name);
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            errors.push(ConfigError {
                line: Some(line),
                section: current.clone().unwrap_or_default(),
                key: None,
                message: format!("expected `key = value`, got `{content}`"),
            });
            continue;
        };
        let key = key.trim().to_string();
        let value = value.trim().to_string();
        let Some(sec_name) = current.clone() else {
            // a bare key before any header: the nearest section name is the
            // likeliest intent
            let hint = suggestion(&key, SCHEMA.iter().map(|(s, _)| s.to_string()))
                .map(|s| format!("; did you mean the section [{s}]?"))
                .unwrap_or_default();
            errors.push(ConfigError {
                line: Some(line),
                section: String::new(),
                key: Some(key),
                message: format!("key outside any section{hint}"),
            });
            continue;
        };
        let known = SCHEMA
            .iter()
            .find(|(s, _)| *s == sec_name)
            .map(|(_, k)| *k)
            .unwrap_or(&[]);
        if !known.contains(&key.as_str()) {
            let keys = known.iter().map(|k| k.to_string());
            let sections_named = SCHEMA.iter().map(|(s, _)| s.to_string());
            let hint = suggestion(&key, keys)
                .map(|k| format!("; did you mean `{k}`?"))
                .or_else(|| {
                    suggestion(&key, sections_named)
                        .map(|s| format!("; did you mean the section [{s}]?"))
                })
                .unwrap_or_default();
            errors.push(ConfigError {
                line: Some(line),
                section: sec_name,
                key: Some(key),
                message: format!("unknown key{hint}"),
            });
            continue;
        }
        let sec = sections.get_mut(&sec_name).expect("section registered");
        if sec.entries.contains_key(&key) {
            errors.push(ConfigError {
                line: Some(line),
                section: sec_name,
                key: Some(key),
                message: "key appears twice".into(),
            });
            continue;
        }
        sec.entries.insert(
            key,
            Entry {
                value,
                line,
                used: false,
            },
        );
    }
    sections
}

struct Resolver<'a> {
    sections: &'a mut BTreeMap<String, Section>,
    errors: &'a mut Vec<ConfigError>,
}

impl Resolver<'_> {
    fn raw(&mut self, section: &str, key: &str) -> Option<(String, usize)> {
        let e = self.sections.get_mut(section)?.entries.get_mut(key)?;
        e.used = true;
        Some((e.value.clone(), e.line))
    }

    /// `alias` if only it is present, else `key`; both present is an error.
    fn alias(&mut self, section: &str, key: &'static str, alias: &'static str) -> &'static str {
        let has = |r: &Self, k: &str| {
            r.sections
                .get(section)
                .is_some_and(|s| s.entries.contains_key(k))
        };
        match (has(self, key), has(self, alias)) {
            (false, true) => alias,
            (true, true) => {
                self.raw(section, alias);
                self.err(
                    section,
                    Some(alias),
                    format!("conflicts with `{key}`; give only one"),
                );
                key
            }
            _ => key,
        }
    }

    fn line_of(&self, section: &str, key: &str) -> Option<usize> {
        let sec = self.sections.get(section)?;
        Some(sec.entries.get(key).map(|e| e.line).unwrap_or(sec.line))
    }

    fn err(&mut self, section: &str, key: Option<&str>, message: impl Into<String>) {
        let line = key
            .and_then(|k| self.line_of(section, k))
            .or_else(|| self.sections.get(section).map(|s| s.line));
        self.errors.push(ConfigError {
            line,
            section: section.into(),
            key: key.map(String::from),
            message: message.into(),
        });
    }

    fn number(&mut self, section: &str, key: &str) -> Option<f64> {
        let (v, line) = self.raw(section, key)?;
        match v.parse::<f64>() {
            Ok(x) if x.is_finite() => Some(x),
            _ => {
                self.errors.push(ConfigError {
                    line: Some(line),
                    section: section.into(),
                    key: Some(key.into()),
                    message: format!("expected a finite number, got `{v}`"),
                });
                None
            }
        }
    }

    fn float(&mut self, section: &str, key: &str, default: f64, check: Check) -> f64 {
        let v = self.number(section, key).unwrap_or(default);
        if let Some(msg) = check.violation(v) {
            self.err(section, Some(key), msg);
        }
        v
    }

    fn count(&mut self, section: &str, key: &str, default: usize, min: usize) -> usize {
        let Some((v, line)) = self.raw(section, key) else {
            return default;
        };
        match v.parse::<usize>() {
            Ok(n) if n >= min => n,
            _ => {
                self.errors.push(ConfigError {
                    line: Some(line),
                    section: section.into(),
                    key: Some(key.into()),
                    message: format!("expected an integer >= {min}, got `{v}`"),
                });
                default
            }
        }
    }

    fn list(&mut self, section: &str, key: &str) -> Option<Vec<f64>> {
        let (v, line) = self.raw(section, key)?;
        let parsed: Result<Vec<f64>, _> = v.split(',').map(|s| s.trim().parse::<f64>()).collect();
        match parsed {
            Ok(xs) if xs.iter().all(|x| x.is_finite()) => Some(xs),
            _ => {
                self.errors.push(ConfigError {
                    line: Some(line),
                    section: section.into(),
                    key: Some(key.into()),
                    message: format!("expected a comma-separated list of numbers, got `{v}`"),
                });
                None
            }
        }
    }

    fn choice<T: Copy>(
        &mut self,
        section: &str,
        key: &str,
        default: T,
        options: &[(&str, T)],
    ) -> T {
        let Some((v, line)) = self.raw(section, key) else {
            return default;
        };
        match options.iter().find(|(name, _)| *name == v) {
            Some((_, t)) => *t,
            None => {
                let names: Vec<&str> = options.iter().map(|(n, _)| *n).collect();
                self.errors.push(ConfigError {
                    line: Some(line),
                    section: section.into(),
                    key: Some(key.into()),
                    message: format!("expected one of {}, got `{v}`", names.join(" | ")),
                });
                default
            }
        }
    }

    fn resolve(&mut self, base_dir: &Path) -> Option<ScenarioConfig> {
        // [domain]
        let x_min = self.float("domain", "x_min", -20.0, Check::Any);
        let x_max = self.float("domain", "x_max", 20.0, Check::Any);
        let h = self.float("domain", "h", 0.05, Check::Positive);
        let extension = self.choice(
            "domain",
            "extension",
            Extension::Constant,
            &[
                ("constant", Extension::Constant),
                ("zero", Extension::ZeroPad),
                ("periodic", Extension::Periodic),
            ],
        );
        let domain = DomainConfig {
            x_min,
            x_max,
            h,
            extension,
        };
        let grid = match build_grid(&domain) {
            Ok(g) => Some(g),
            Err(e) => {
                self.err("domain", None, e.to_string());
                None
            }
        };

        // [kernel]
        #[derive(Clone, Copy)]
        enum Fam {
            G,
            U,
            L,
            T,
        }
        let fam = self.choice(
            "kernel",
            "family",
            Fam::G,
            &[
                ("gaussian", Fam::G),
                ("uniform", Fam::U),
                ("laplace", Fam::L),
                ("tabulated", Fam::T),
            ],
        );
        // `param` and `step` are family-agnostic spellings
        let param = |r: &mut Self, name: &'static str| {
            let key = r.alias("kernel", name, "param");
            r.float("kernel", key, 1.0, Check::Positive)
        };
        let family = match fam {
            Fam::G => KernelFamily::Gaussian {
                sigma: param(self, "sigma"),
            },
            Fam::U => KernelFamily::Uniform {
                half_width: param(self, "half_width"),
            },
            Fam::L => KernelFamily::Laplace {
                rate: param(self, "rate"),
            },
            Fam::T => match self.raw("kernel", "file") {
                None => {
                    self.err("kernel", Some("file"), "required for family tabulated");
                    KernelFamily::Tabulated {
                        file: PathBuf::new(),
                        xs: vec![],
                        values: vec![],
                    }
                }
                Some((f, _)) => {
                    let path = base_dir.join(&f);
                    match read_tabulated_kernel(&path) {
                        Ok((xs, values)) => KernelFamily::Tabulated {
                            file: PathBuf::from(f),
                            xs,
                            values,
                        },
                        Err(e) => {
                            self.err(
                                "kernel",
                                Some("file"),
                                format!("cannot use `{}`: {e}", path.display()),
                            );
                            KernelFamily::Tabulated {
                                file: PathBuf::from(f),
                                xs: vec![],
                                values: vec![],
                            }
                        }
                    }
                }
            },
        };
        let mass_tolerance = self.float("kernel", "mass_tolerance", 1e-12, Check::Open(0.0, 1.0));
        let step_key = self.alias("kernel", "quadrature_step", "step");
        let quadrature_step = self.float("kernel", step_key, h, Check::Positive);
        let kernel_cfg = KernelConfig {
            family,
            mass_tolerance,
            quadrature_step,
        };
        let kernel = match build_kernel(&kernel_cfg) {
            Ok(k) => Some(k),
            Err(e) => {
                if !matches!(&kernel_cfg.family, KernelFamily::Tabulated { xs, .. } if xs.is_empty())
                {
                    self.err("kernel", None, e.to_string());
                }
                None
            }
        };
        if let (Some(k), Some(g)) = (&kernel, &grid) {
            if let Err(e) = nldisp_core::Convolver::new(k, *g, extension) {
                self.err("domain", None, e.to_string());
            }
        }

        // [reaction]
        #[derive(Clone, Copy)]
        enum RFam {
            N,
            L,
            P,
        }
        let rfam = self.choice(
            "reaction",
            "family",
            RFam::L,
            &[
                ("none", RFam::N),
                ("logistic", RFam::L),
                ("periodic-kpp", RFam::P),
            ],
        );
        let reaction_cfg = match rfam {
            RFam::N => ReactionConfig::None,
            RFam::L => ReactionConfig::Logistic {
                r: self.float("reaction", "r", 1.0, Check::Any),
            },
            RFam::P => ReactionConfig::PeriodicKpp {
                r0: self.float("reaction", "r0", 1.0, Check::Any),
                r1: self.float("reaction", "r1", 0.5, Check::Any),
                period: self.float("reaction", "L", 2.0, Check::Positive),
            },
        };
        let reaction = build_reaction(&reaction_cfg).ok();

        // [model]
        let dispersal = self.float("model", "D", 1.0, Check::NonNegative);
        let auto_cap = match reaction_cfg {
            ReactionConfig::None => 1.0,
            ReactionConfig::Logistic { r } => r,
            ReactionConfig::PeriodicKpp { r0, r1, .. } => r0 + r1.abs(),
        };
        let (cap, cap_auto) = match self.raw("model", "cap") {
            None => (auto_cap, true),
            Some((v, _)) if v == "auto" => (auto_cap, true),
            Some((v, line)) => match v.parse::<f64>() {
                Ok(x) if x.is_finite() => (x, false),
                _ => {
                    self.errors.push(ConfigError {
                        line: Some(line),
                        section: "model".into(),
                        key: Some("cap".into()),
                        message: format!("expected `auto` or a number, got `{v}`"),
                    });
                    (auto_cap, false)
                }
            },
        };
        if !(cap > 0.0) {
            self.err(
                "model",
                Some("cap"),
                format!("must be > 0, got {cap}; set it explicitly"),
            );
        }
        let steady_tol = self.float("model", "steady_tol", 1e-8, Check::Positive);
        let steady_max_time = self.float("model", "steady_max_time", 2000.0, Check::Positive);
        let model = ModelConfig {
            dispersal,
            cap,
            cap_auto,
            steady_tol,
            steady_max_time,
        };
        let lipschitz = match &reaction {
            Some(r) if cap > 0.0 => {
                lipschitz_estimate(r, &Cap::Constant(cap), 256, 256).unwrap_or(f64::NAN)
            }
            _ => f64::NAN,
        };

        // [evolve]
        let scheme = self.choice(
            "evolve",
            "scheme",
            Scheme::VocExponentialEuler,
            &[
                ("voc-exponential-euler", Scheme::VocExponentialEuler),
                ("mol-rk4", Scheme::MolRk4),
            ],
        );
        let default_dt = if lipschitz > 0.0 {
            (0.1 / lipschitz).min(0.01)
        } else {
            0.01
        };
        let dt = self.float("evolve", "dt", default_dt, Check::Positive);
        if dt * lipschitz >= 1.0 {
            self.err(
                "evolve",
                Some("dt"),
                format!("dt * k_f = {} must be below 1", dt * lipschitz),
            );
        }
        let horizon = self.float("evolve", "horizon", 10.0, Check::Positive);
        if !is_multiple(horizon, dt) {
            self.err(
                "evolve",
                Some("horizon"),
                format!("must be a multiple of dt = {dt}"),
            );
        }
        let interval = self.number("evolve", "snapshot_interval");
        let listed = self.list("evolve", "snapshot_times");
        let (snapshot_times, snapshot_interval) = match (interval, listed) {
            (Some(_), Some(_)) => {
                self.err(
                    "evolve",
                    Some("snapshot_times"),
                    "give either snapshot_times or snapshot_interval",
                );
                (vec![], None)
            }
            (None, Some(ts)) => (ts, None),
            (iv, None) => {
                let iv = iv.unwrap_or(1.0);
                if !(iv > 0.0) || !is_multiple(iv, dt) {
                    self.err(
                        "evolve",
                        Some("snapshot_interval"),
                        format!("must be a positive multiple of dt = {dt}"),
                    );
                    (vec![], Some(iv))
                } else {
                    let n = (horizon / iv).floor() as usize;
                    (interval_times(iv, n, horizon), Some(iv))
                }
            }
        };
        for &s in &snapshot_times {
            if !(0.0..=horizon).contains(&s) || !is_multiple(s, dt) {
                self.err(
                    "evolve",
                    Some("snapshot_times"),
                    format!("time {s} must lie in [0, {horizon}] and be a multiple of dt = {dt}"),
                );
                break;
            }
        }
        if snapshot_times.windows(2).any(|w| !(w[1] > w[0])) {
            self.err("evolve", Some("snapshot_times"), "must be increasing");
        }
        let series_tolerance =
            self.float("evolve", "series_tolerance", 1e-12, Check::Open(0.0, 1.0));
        let initial = self.choice(
            "evolve",
            "initial",
            InitialShape::Step,
            &[
                ("bump", InitialShape::Bump),
                ("step", InitialShape::Step),
                ("constant", InitialShape::Constant),
            ],
        );
        let initial_amplitude =
            self.float("evolve", "initial_amplitude", 0.5 * cap, Check::NonNegative);
        if initial_amplitude > cap {
            self.err(
                "evolve",
                Some("initial_amplitude"),
                format!("must not exceed cap = {cap}"),
            );
        }
        let initial_width = self.float("evolve", "initial_width", 5.0, Check::Positive);
        let initial_center = self.float(
            "evolve",
            "initial_center",
            0.5 * (x_min + x_max),
            Check::Any,
        );
        let evolve = EvolveConfig {
            scheme,
            dt,
            horizon,
            snapshot_times,
            snapshot_interval,
            series_tolerance,
            initial,
            initial_amplitude,
            initial_width,
            initial_center,
        };

        // [speed]
        let mu_min = self.float("speed", "mu_min", 0.2, Check::Positive);
        let mu_max = self.float("speed", "mu_max", 3.0, Check::Positive);
        if !(mu_max > mu_min) {
            self.err(
                "speed",
                Some("mu_max"),
                format!("must exceed mu_min = {mu_min}"),
            );
        }
        let level = self.float("speed", "level", 0.5 * cap, Check::Any);
        if !(level > 0.0 && level < cap) {
            self.err(
                "speed",
                Some("level"),
                format!("must lie strictly between 0 and cap = {cap}"),
            );
        }
        let fit_window = match self.list("speed", "fit_window") {
            None => (0.5 * horizon, horizon),
            Some(v) if v.len() == 2 => (v[0], v[1]),
            Some(_) => {
                self.err("speed", Some("fit_window"), "expected two times `t0, t1`");
                (0.5 * horizon, horizon)
            }
        };
        if !(fit_window.0 >= 0.0 && fit_window.1 > fit_window.0 && fit_window.1 <= horizon) {
            self.err(
                "speed",
                Some("fit_window"),
                format!(
                    "[{}, {}] must be a nonempty interval within [0, {horizon}]",
                    fit_window.0, fit_window.1
                ),
            );
        }
        let tol = self.float("speed", "tol", 1e-8, Check::Positive);
        let speed = SpeedConfig {
            mu_min,
            mu_max,
            level,
            fit_window,
            tol,
        };

        // [window]
        let quarter = 0.25 * (x_max - x_min);
        let a = self.float("window", "a", x_min + quarter, Check::Any);
        let b = self.float("window", "b", x_max - quarter, Check::Any);
        let window = match Window::new(a, b) {
            Ok(w) => {
                if !(a >= x_min - 1e-12 && b <= x_max + 1e-12) {
                    self.err(
                        "window",
                        None,
                        format!("[{a}, {b}] lies outside the domain [{x_min}, {x_max}]"),
                    );
                }
                w
            }
            Err(e) => {
                self.err("window", None, e.to_string());
                Window { a: x_min, b: x_max }
            }
        };

        // [diagnostics]
        let ensemble = self.choice(
            "diagnostics",
            "ensemble",
            EnsembleChoice::Translates,
            &[
                ("translates", EnsembleChoice::Translates),
                ("random-fourier", EnsembleChoice::RandomFourier),
            ],
        );
        let members = self.count("diagnostics", "members", 4, 2);
        let (amplitude, width, spacing, modes) = match ensemble {
            EnsembleChoice::Translates => {
                let amp = self.float("diagnostics", "amplitude", cap, Check::NonNegative);
                if amp > cap {
                    self.err(
                        "diagnostics",
                        Some("amplitude"),
                        format!("must not exceed cap = {cap}"),
                    );
                }
                (
                    amp,
                    self.float("diagnostics", "width", 2.0, Check::Positive),
                    self.float("diagnostics", "spacing", 1.0, Check::Any),
                    0,
                )
            }
            EnsembleChoice::RandomFourier => {
                (cap, 0.0, 0.0, self.count("diagnostics", "modes", 6, 1))
            }
        };
        let times = self
            .list("diagnostics", "times")
            .unwrap_or_else(|| vec![0.0, 1.0, 2.0]);
        if times.first() != Some(&0.0) || times.windows(2).any(|w| !(w[1] > w[0])) {
            self.err("diagnostics", Some("times"), "must start at 0 and increase");
        } else if times.iter().any(|&t| !is_multiple(t, dt)) {
            self.err(
                "diagnostics",
                Some("times"),
                format!("every time must be a multiple of dt = {dt}"),
            );
        }
        let k = self.count("diagnostics", "k", 2, 1);
        if k > members {
            self.err(
                "diagnostics",
                Some("k"),
                format!("must not exceed members = {members}"),
            );
        }
        let trials = self.count("diagnostics", "trials", 1000, 1);
        let t = self.float("diagnostics", "t", 1.0, Check::NonNegative);
        let diagnostics = DiagnosticsConfig {
            ensemble,
            members,
            amplitude,
            width,
            spacing,
            modes,
            times,
            k,
            trials,
            t,
        };

        // [output]
        let svg = self.choice("output", "svg", false, &[("true", true), ("false", false)]);
        let trajectory_stride = self.count("output", "trajectory_stride", 1, 1);
        let output = OutputConfig {
            svg,
            trajectory_stride,
        };

        Some(ScenarioConfig {
            kernel: kernel_cfg,
            domain,
            reaction: reaction_cfg,
            model,
            evolve,
            speed,
            window,
            diagnostics,
            output,
            lipschitz,
        })
    }
}

#[derive(Clone, Copy)]
enum Check {
    Any,
    Positive,
    NonNegative,
    Open(f64, f64),
}

impl Check {
    fn violation(self, v: f64) -> Option<String> {
        match self {
            Check::Any => None,
            Check::Positive if !(v > 0.0) => Some(format!("must be > 0, got {v}")),
            Check::NonNegative if !(v >= 0.0) => Some(format!("must be >= 0, got {v}")),
            Check::Open(lo, hi) if !(v > lo && v < hi) => {
                Some(format!("must lie in ({lo}, {hi}), got {v}"))
            }
            _ => None,
        }
    }
}

fn is_multiple(t: f64, dt: f64) -> bool {
    let n = (t / dt).round();
    (n * dt - t).abs() <= 1e-9 * t.abs().max(dt)
}

fn interval_times(interval: f64, count: usize, horizon: f64) -> Vec<f64> {
    let mut v: Vec<f64> = (0..=count).map(|i| i as f64 * interval).collect();
    if (v.last().copied().unwrap_or(0.0) - horizon).abs() > 1e-9 * horizon {
        v.push(horizon);
    }
    v
}

pub fn build_grid(d: &DomainConfig) -> nldisp_core::Result<Grid> {
    match d.extension {
        Extension::Periodic => {
            let period = d.x_max - d.x_min;
            let n = (period / d.h).round();
            if !((n * d.h - period).abs() <= 1e-9 * period) || n < 1.0 {
                return Err(nldisp_core::Error::InvalidParameter {
                    name: "h",
                    reason: format!("period {period} is not a multiple of h = {}", d.h),
                });
            }
            Grid::periodic(d.x_min, period, n as usize)
        }
        _ => Grid::with_step(d.x_min, d.x_max, d.h),
    }
}

pub fn build_kernel(k: &KernelConfig) -> nldisp_core::Result<Kernel> {
    let profile = match &k.family {
        KernelFamily::Gaussian { sigma } => Profile::Gaussian { sigma: *sigma },
        KernelFamily::Uniform { half_width } => Profile::Uniform {
            half_width: *half_width,
        },
        KernelFamily::Laplace { rate } => Profile::Laplace { rate: *rate },
        KernelFamily::Tabulated { xs, values, .. } => Profile::Tabulated {
            xs: xs.clone(),
            values: values.clone(),
        },
    };
    make_kernel(profile, k.mass_tolerance, k.quadrature_step)
}

pub fn build_reaction(r: &ReactionConfig) -> nldisp_core::Result<Reaction> {
    match r {
        ReactionConfig::None => Ok(Reaction::zero()),
        ReactionConfig::Logistic { r } => Reaction::logistic(*r),
        ReactionConfig::PeriodicKpp { r0, r1, period } => Reaction::periodic_kpp(*r0, *r1, *period),
    }
}

fn num(x: f64) -> String {
    format!("{x}")
}

fn nums(xs: &[f64]) -> String {
    xs.iter().map(|x| num(*x)).collect::<Vec<_>>().join(", ")
}

impl fmt::Display for ScenarioConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "[kernel]")?;
        match &self.kernel.family {
            KernelFamily::Gaussian { sigma } => {
                writeln!(f, "family = gaussian\nsigma = {}", num(*sigma))?
            }
            KernelFamily::Uniform { half_width } => {
                writeln!(f, "family = uniform\nhalf_width = {}", num(*half_width))?
            }
            KernelFamily::Laplace { rate } => {
                writeln!(f, "family = laplace\nrate = {}", num(*rate))?
            }
            KernelFamily::Tabulated { file, .. } => {
                writeln!(f, "family = tabulated\nfile = {}", file.display())?
            }
        }
        writeln!(f, "mass_tolerance = {}", num(self.kernel.mass_tolerance))?;
        writeln!(f, "quadrature_step = {}", num(self.kernel.quadrature_step))?;

        let d = &self.domain;
        writeln!(f, "\n[domain]")?;
        writeln!(
            f,
            "x_min = {}\nx_max = {}\nh = {}",
            num(d.x_min),
            num(d.x_max),
            num(d.h)
        )?;
        let ext = match d.extension {
            Extension::Constant => "constant",
            Extension::ZeroPad => "zero",
            Extension::Periodic => "periodic",
        };
        writeln!(f, "extension = {ext}")?;

        writeln!(f, "\n[reaction]")?;
        match &self.reaction {
            ReactionConfig::None => writeln!(f, "family = none")?,
            ReactionConfig::Logistic { r } => writeln!(f, "family = logistic\nr = {}", num(*r))?,
            ReactionConfig::PeriodicKpp { r0, r1, period } => writeln!(
                f,
                "family = periodic-kpp\nr0 = {}\nr1 = {}\nL = {}",
                num(*r0),
                num(*r1),
                num(*period)
            )?,
        }

        let m = &self.model;
        writeln!(f, "\n[model]")?;
        writeln!(f, "D = {}", num(m.dispersal))?;
        writeln!(f, "cap = {}", num(m.cap))?;
        writeln!(
            f,
            "steady_tol = {}\nsteady_max_time = {}",
            num(m.steady_tol),
            num(m.steady_max_time)
        )?;

        let e = &self.evolve;
        writeln!(f, "\n[evolve]")?;
        writeln!(f, "scheme = {}", e.scheme.name())?;
        writeln!(f, "dt = {}\nhorizon = {}", num(e.dt), num(e.horizon))?;
        match e.snapshot_interval {
            Some(iv) => writeln!(f, "snapshot_interval = {}", num(iv))?,
            None => writeln!(f, "snapshot_times = {}", nums(&e.snapshot_times))?,
        }
        writeln!(f, "series_tolerance = {}", num(e.series_tolerance))?;
        writeln!(f, "initial = {}", e.initial.name())?;
        writeln!(
            f,
            "initial_amplitude = {}\ninitial_width = {}\ninitial_center = {}",
            num(e.initial_amplitude),
            num(e.initial_width),
            num(e.initial_center)
        )?;

        let s = &self.speed;
        writeln!(f, "\n[speed]")?;
        writeln!(f, "mu_min = {}\nmu_max = {}", num(s.mu_min), num(s.mu_max))?;
        writeln!(f, "level = {}", num(s.level))?;
        writeln!(
            f,
            "fit_window = {}, {}",
            num(s.fit_window.0),
            num(s.fit_window.1)
        )?;
        writeln!(f, "tol = {}", num(s.tol))?;

        writeln!(f, "\n[window]")?;
        writeln!(f, "a = {}\nb = {}", num(self.window.a), num(self.window.b))?;

        let g = &self.diagnostics;
        writeln!(f, "\n[diagnostics]")?;
        match g.ensemble {
            EnsembleChoice::Translates => {
                writeln!(f, "ensemble = translates")?;
                writeln!(f, "members = {}", g.members)?;
                writeln!(
                    f,
                    "amplitude = {}\nwidth = {}\nspacing = {}",
                    num(g.amplitude),
                    num(g.width),
                    num(g.spacing)
                )?;
            }
            EnsembleChoice::RandomFourier => {
                writeln!(f, "ensemble = random-fourier")?;
                writeln!(f, "members = {}\nmodes = {}", g.members, g.modes)?;
            }
        }
        writeln!(f, "times = {}", nums(&g.times))?;
        writeln!(f, "k = {}\ntrials = {}\nt = {}", g.k, g.trials, num(g.t))?;

        writeln!(f, "\n[output]")?;
        writeln!(f, "svg = {}", self.output.svg)?;
        write!(f, "trajectory_stride = {}", self.output.trajectory_stride)?;
        writeln!(f)
    }
}

impl ScenarioConfig {
    /// Problems that only matter for one subcommand.
    pub fn check_for(&self, subcommand: &str) -> Result<(), ValidationErrors> {
        let mut errors = Vec::new();
        let mut push = |section: &str, key: Option<&str>, message: String| {
            errors.push(ConfigError {
                line: None,
                section: section.into(),
                key: key.map(String::from),
                message,
            })
        };
        if subcommand == "steady" {
            if self.domain.extension != Extension::Periodic {
                push(
                    "domain",
                    Some("extension"),
                    "steady states need `extension = periodic`".into(),
                );
            }
            let period = match self.reaction {
                ReactionConfig::PeriodicKpp { period, .. } => Some(period),
                _ => None,
            };
            if let Some(l) = period {
                if !is_multiple(self.domain.x_max - self.domain.x_min, l) {
                    push(
                        "domain",
                        None,
                        format!(
                            "the domain length must be a multiple of L = {l} for steady states"
                        ),
                    );
                }
            }
        }
        if subcommand == "speed" {
            let last = self.evolve.snapshot_times.last().copied().unwrap_or(0.0);
            let inside = self
                .evolve
                .snapshot_times
                .iter()
                .filter(|&&t| {
                    t >= self.speed.fit_window.0 - 1e-9 && t <= self.speed.fit_window.1 + 1e-9
                })
                .count();
            if inside < nldisp_core::speed::MIN_FIT_SNAPSHOTS
                || last < self.speed.fit_window.1 - 1e-9
            {
                push(
                    "speed",
                    Some("fit_window"),
                    format!(
                        "holds {inside} snapshots; at least {} are needed (adjust [evolve] snapshot_interval)",
                        nldisp_core::speed::MIN_FIT_SNAPSHOTS
                    ),
                );
            }
        }
        if errors.is_empty() {
            Ok(())
        } else {
            Err(ValidationErrors(errors))
        }
    }

    pub fn grid(&self) -> Grid {
        build_grid(&self.domain).expect("validated")
    }

    pub fn kernel(&self) -> Kernel {
        build_kernel(&self.kernel).expect("validated")
    }

    pub fn reaction(&self) -> Reaction {
        build_reaction(&self.reaction).expect("validated")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ok(text: &str) -> ScenarioConfig {
        validate(text, Path::new(".")).unwrap_or_else(|e| panic!("{e}"))
    }

    fn errs(text: &str) -> Vec<ConfigError> {
        validate(text, Path::new(".")).unwrap_err().0
    }

    #[test]
    fn minimal_config_fills_defaults() {
        let c = ok("[kernel]\nfamily = gaussian\n[reaction]\nfamily = logistic\n");
        assert_eq!(c.model.cap, 1.0);
        assert_eq!(c.evolve.dt, 0.01);
        assert_eq!(c.speed.level, 0.5);
        let echoed = c.to_string();
        assert!(echoed.contains("sigma = 1"));
        assert!(echoed.contains("scheme = voc-exponential-euler"));
        // the echo is itself a valid config describing the same scenario,
        // with the automatic cap written out as a number
        let mut again = ok(&echoed);
        assert!(!again.model.cap_auto);
        again.model.cap_auto = true;
        assert_eq!(again, c);
    }

    #[test]
    fn window_outside_domain_names_window() {
        let e = errs("[domain]\nx_min = -10\nx_max = 10\n[window]\na = -20\nb = 0\n");
        assert_eq!(e.len(), 1, "{e:?}");
        assert_eq!(e[0].section, "window");
    }

    #[test]
    fn misspelled_section_gets_a_suggestion() {
        let e = errs("[kernell]\nfamily = gaussian\n");
        assert!(e[0].message.contains("[kernel]"), "{}", e[0]);
        let e = errs("kernell = gaussian\n");
        assert!(e[0].message.contains("[kernel]"), "{}", e[0]);
        let e = errs("[kernel]\nsigmaa = 2\n");
        assert!(e[0].message.contains("`sigma`"), "{}", e[0]);
    }

    #[test]
    fn family_specific_keys_are_enforced() {
        let e = errs("[kernel]\nfamily = uniform\nsigma = 2\n");
        assert_eq!(e[0].key.as_deref(), Some("sigma"));
        assert_eq!(e[0].line, Some(3));
    }

    #[test]
    fn generic_kernel_keys() {
        let c = ok("[kernel]\nfamily = uniform\nparam = 2\nstep = 0.01\n");
        assert_eq!(c.kernel.family, KernelFamily::Uniform { half_width: 2.0 });
        assert_eq!(c.kernel.quadrature_step, 0.01);
        let e = errs("[kernel]\nsigma = 1\nparam = 2\n");
        assert_eq!(e[0].key.as_deref(), Some("param"));
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let e = errs("[kernel]\nfamily gaussian\n");
        assert_eq!(e[0].line, Some(2));
        let e = errs("[domain]\nh = abc\n");
        assert_eq!(e[0].line, Some(2));
        assert_eq!(e[0].key.as_deref(), Some("h"));
    }

    #[test]
    fn numeric_ranges() {
        assert!(!errs("[domain]\nh = -1\n").is_empty());
        assert!(!errs("[reaction]\nr = 1\n[evolve]\ndt = 0.003\nhorizon = 1.0001\n").is_empty());
        assert!(!errs("[reaction]\nr = 200\n[evolve]\ndt = 0.01\n").is_empty());
    }
}
