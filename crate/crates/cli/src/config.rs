//! Flat `key = value` configuration text with `[section]` headers.
//!
//! ```text
//! problem = example1
//! c = 1
//! gamma = 0.5
//!
//! [metric]
//! mode = closed-form
//! schedule = constant
//! tau = 0.25
//! ```

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use pdflow::problem::{EXAMPLE1_X0, EXAMPLE1_Y0};
use pdflow::proxlib::DEFAULT_INNER_TOL;
use pdflow::{Integrator, TauSchedule};

/// A configuration problem, optionally anchored to a line of the input.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub message: String,
}

impl ConfigError {
    pub fn new(message: impl Into<String>) -> Self {
        Self {
            line: None,
            message: message.into(),
        }
    }

    pub fn at(line: usize, message: impl Into<String>) -> Self {
        Self {
            line: Some(line),
            message: message.into(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone)]
pub struct Entry {
    pub key: String,
    pub value: String,
    pub line: usize,
}

#[derive(Debug, Clone)]
pub struct Section {
    /// Empty for the entries before the first header.
    pub name: String,
    pub line: usize,
    pub entries: Vec<Entry>,
}

/// Parsed configuration text. Line numbers are kept for error messages and
/// ignored by equality.
#[derive(Debug, Clone)]
pub struct Document {
    pub sections: Vec<Section>,
}

fn valid_name(s: &str) -> bool {
    !s.is_empty()
        && s
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-' || c == '.')
}

impl Document {
    pub fn empty() -> Self {
        Self {
            sections: vec![Section {
                name: String::new(),
                line: 0,
                entries: Vec::new(),
            }],
        }
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut doc = Self::empty();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            if let Some(rest) = content.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| ConfigError::at(line, "unterminated section header"))?
                    .trim();
                if !valid_name(name) {
                    return Err(ConfigError::at(line, format!("invalid section name `{name}`")));
                }
                if doc.sections.iter().any(|s| s.name == name) {
                    return Err(ConfigError::at(line, format!("duplicate section [{name}]")));
                }
                doc.sections.push(Section {
                    name: name.to_string(),
                    line,
                    entries: Vec::new(),
                });
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| ConfigError::at(line, "expected `key = value` or `[section]`"))?;
            let (key, value) = (key.trim(), value.trim());
            if !valid_name(key) {
                return Err(ConfigError::at(line, format!("invalid key `{key}`")));
            }
            let section = doc.sections.last_mut().expect("root section");
            if section.entries.iter().any(|e| e.key == key) {
                return Err(ConfigError::at(line, format!("duplicate key `{key}`")));
            }
            section.entries.push(Entry {
                key: key.to_string(),
                value: value.to_string(),
                line,
            });
        }
        Ok(doc)
    }

    pub fn section(&self, name: &str) -> Option<&Section> {
        self.sections.iter().find(|s| s.name == name)
    }

    pub fn get(&self, section: &str, key: &str) -> Option<&Entry> {
        self.section(section)?.entries.iter().find(|e| e.key == key)
    }

    /// Appends `key = value` to `section`, creating the section if needed.
    pub fn set(&mut self, section: &str, key: &str, value: impl Into<String>) {
        let idx = match self.sections.iter().position(|s| s.name == section) {
            Some(i) => i,
            None => {
                self.sections.push(Section {
                    name: section.to_string(),
                    line: 0,
                    entries: Vec::new(),
                });
                self.sections.len() - 1
            }
        };
        let value = value.into();
        let entries = &mut self.sections[idx].entries;
        match entries.iter_mut().find(|e| e.key == key) {
            Some(e) => e.value = value,
            None => entries.push(Entry {
                key: key.to_string(),
                value,
                line: 0,
            }),
        }
    }

    /// Section name → key → value, the content compared by equality.
    pub fn normalized(&self) -> BTreeMap<String, BTreeMap<String, String>> {
        self.sections
            .iter()
            .filter(|s| !s.name.is_empty() || !s.entries.is_empty())
            .map(|s| {
                (
                    s.name.clone(),
                    s.entries
                        .iter()
                        .map(|e| (e.key.clone(), e.value.clone()))
                        .collect(),
                )
            })
            .collect()
    }
}

impl PartialEq for Document {
    fn eq(&self, other: &Self) -> bool {
        self.normalized() == other.normalized()
    }
}

impl fmt::Display for Document {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for s in &self.sections {
            if s.name.is_empty() {
                if s.entries.is_empty() {
                    continue;
                }
            } else {
                if !first {
                    writeln!(f)?;
                }
                writeln!(f, "[{}]", s.name)?;
            }
            for e in &s.entries {
                writeln!(f, "{} = {}", e.key, e.value)?;
            }
            first = false;
        }
        Ok(())
    }
}

/// Where the problem comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum ProblemSource {
    Catalog(String),
    Custom(CustomProblem),
}

/// A problem assembled from a dense `A` file and function kinds.
#[derive(Debug, Clone, PartialEq)]
pub struct CustomProblem {
    pub a_file: PathBuf,
    pub f: FunctionSpec,
    pub g: FunctionSpec,
    /// `½‖Bx - b‖²` when present, zero otherwise.
    pub least_squares: Option<(PathBuf, Vec<f64>)>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum FunctionSpec {
    Zero,
    SqNorm(f64),
    L1(f64),
    Box { lo: Vec<f64>, hi: Vec<f64> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MetricKind {
    ClosedForm,
    General,
}

/// The step parameter τ: chosen from the problem data, or given.
#[derive(Debug, Clone, PartialEq)]
pub enum TauChoice {
    Auto,
    Given(TauSchedule),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    Admm,
    PrimalDual,
    ChambollePock,
}

impl Scheme {
    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::Admm => "admm",
            Scheme::PrimalDual => "primal-dual",
            Scheme::ChambollePock => "chambolle-pock",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum StartSpec {
    /// `(-10, 10)`
    Example1Default,
    Zero,
    /// `z⁰ = Ax⁰`
    Split,
    Values(Vec<f64>),
}

/// A fully resolved run configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub problem: ProblemSource,
    pub c: f64,
    pub gamma: f64,
    pub metric: MetricKind,
    pub tau: TauChoice,
    pub inner_tol: f64,
    pub integrator: Integrator,
    pub horizon: f64,
    pub sample_dt: f64,
    pub scheme: Scheme,
    pub max_iters: usize,
    pub stop_tol: f64,
    pub x0: StartSpec,
    pub z0: StartSpec,
    pub y0: StartSpec,
    pub sweep_gammas: Vec<f64>,
    pub sweep_tau_cs: Vec<f64>,
    pub hit_threshold: f64,
    pub dump_state: bool,
    pub out_dir: Option<PathBuf>,
    /// Config line of each key read from a file, for error anchoring.
    pub lines: BTreeMap<String, usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            problem: ProblemSource::Catalog("example1".into()),
            c: 1.0,
            gamma: 0.5,
            metric: MetricKind::ClosedForm,
            tau: TauChoice::Auto,
            inner_tol: DEFAULT_INNER_TOL,
            integrator: Integrator::Rk4 { step: 0.01 },
            horizon: 200.0,
            sample_dt: 0.01,
            scheme: Scheme::Admm,
            max_iters: 1000,
            stop_tol: 1e-8,
            x0: StartSpec::Example1Default,
            z0: StartSpec::Split,
            y0: StartSpec::Example1Default,
            sweep_gammas: vec![0.99, 0.5, 0.01],
            sweep_tau_cs: vec![0.49, 0.25, 0.1],
            hit_threshold: 1e-2,
            dump_state: false,
            out_dir: None,
            lines: BTreeMap::new(),
        }
    }
}

pub fn format_vector(v: &[f64]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ")
}

fn parse_f64(e: &Entry) -> Result<f64, ConfigError> {
    e.value
        .parse::<f64>()
        .map_err(|_| ConfigError::at(e.line, format!("`{}` expects a number, got `{}`", e.key, e.value)))
}

fn parse_usize(e: &Entry) -> Result<usize, ConfigError> {
    e.value.parse::<usize>().map_err(|_| {
        ConfigError::at(
            e.line,
            format!("`{}` expects a nonnegative integer, got `{}`", e.key, e.value),
        )
    })
}

fn parse_bool(e: &Entry) -> Result<bool, ConfigError> {
    match e.value.as_str() {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        v => Err(ConfigError::at(e.line, format!("`{}` expects true or false, got `{v}`", e.key))),
    }
}

fn parse_list(e: &Entry) -> Result<Vec<f64>, ConfigError> {
    parse_vector_str(&e.value).map_err(|m| ConfigError::at(e.line, format!("`{}`: {m}", e.key)))
}

/// Comma-separated decimals.
pub fn parse_vector_str(s: &str) -> Result<Vec<f64>, String> {
    if s.trim().is_empty() {
        return Err("empty vector".into());
    }
    s.split(',')
        .map(|t| {
            let t = t.trim();
            t.parse::<f64>().map_err(|_| format!("invalid number `{t}`"))
        })
        .collect()
}

fn parse_start(e: &Entry, allow_split: bool) -> Result<StartSpec, ConfigError> {
    match e.value.as_str() {
        "example1-default" => Ok(StartSpec::Example1Default),
        "zero" => Ok(StartSpec::Zero),
        "split" if allow_split => Ok(StartSpec::Split),
        _ => parse_list(e).map(StartSpec::Values),
    }
}

fn parse_function(
    doc: &Document,
    prefix: &str,
    kind: &Entry,
) -> Result<FunctionSpec, ConfigError> {
    let param = |name: &str| {
        doc.get("problem", &format!("{prefix}_{name}")).ok_or_else(|| {
            ConfigError::at(kind.line, format!("`{prefix} = {}` needs `{prefix}_{name}`", kind.value))
        })
    };
    match kind.value.as_str() {
        "zero" => Ok(FunctionSpec::Zero),
        "sq_norm" => Ok(FunctionSpec::SqNorm(parse_f64(param("coef")?)?)),
        "l1" => Ok(FunctionSpec::L1(parse_f64(param("weight")?)?)),
        "box" => Ok(FunctionSpec::Box {
            lo: parse_list(param("lo")?)?,
            hi: parse_list(param("hi")?)?,
        }),
        other => Err(ConfigError::at(
            kind.line,
            format!("unknown function kind `{other}` (zero, sq_norm, l1, box)"),
        )),
    }
}

const KNOWN_KEYS: &[(&str, &[&str])] = &[
    ("", &["problem", "c", "gamma"]),
    ("metric", &["mode", "schedule", "tau", "tau_initial", "tau_limit", "inner_tol"]),
    (
        "integrator",
        &["kind", "step", "rel_tol", "abs_tol", "h_min", "h_max", "horizon", "sample_dt"],
    ),
    ("discrete", &["scheme", "max_iters", "stop_tol"]),
    ("start", &["x0", "z0", "y0"]),
    ("sweep", &["gammas", "tau_cs", "hit_threshold"]),
    ("output", &["dir", "dump_state"]),
    (
        "problem",
        &[
            "a_file", "f", "f_coef", "f_weight", "f_lo", "f_hi", "g", "g_coef", "g_weight", "g_lo",
            "g_hi", "h", "h_b_file", "h_b",
        ],
    ),
];

impl RunConfig {
    /// Reads a configuration; relative file paths resolve against `base_dir`.
    pub fn from_document(doc: &Document, base_dir: &Path) -> Result<Self, ConfigError> {
        for s in &doc.sections {
            let known = KNOWN_KEYS
                .iter()
                .find(|(name, _)| *name == s.name)
                .ok_or_else(|| ConfigError::at(s.line, format!("unknown section [{}]", s.name)))?;
            for e in &s.entries {
                if !known.1.contains(&e.key.as_str()) {
                    let place = if s.name.is_empty() {
                        String::new()
                    } else {
                        format!(" in [{}]", s.name)
                    };
                    return Err(ConfigError::at(e.line, format!("unknown key `{}`{place}", e.key)));
                }
            }
        }

        let mut cfg = RunConfig::default();
        for s in &doc.sections {
            for e in &s.entries {
                let full = if s.name.is_empty() {
                    e.key.clone()
                } else {
                    format!("{}.{}", s.name, e.key)
                };
                cfg.lines.insert(full, e.line);
            }
        }

        if let Some(e) = doc.get("", "problem") {
            cfg.problem = if e.value == "custom" {
                let a = doc
                    .get("problem", "a_file")
                    .ok_or_else(|| ConfigError::at(e.line, "custom problem needs [problem] a_file"))?;
                let f = match doc.get("problem", "f") {
                    Some(k) => parse_function(doc, "f", k)?,
                    None => FunctionSpec::Zero,
                };
                let g = match doc.get("problem", "g") {
                    Some(k) => parse_function(doc, "g", k)?,
                    None => FunctionSpec::Zero,
                };
                let least_squares = match doc.get("problem", "h") {
                    None => None,
                    Some(h) if h.value == "zero" => None,
                    Some(h) if h.value == "least_squares" => {
                        let bf = doc.get("problem", "h_b_file").ok_or_else(|| {
                            ConfigError::at(h.line, "`h = least_squares` needs `h_b_file`")
                        })?;
                        let b = doc
                            .get("problem", "h_b")
                            .ok_or_else(|| ConfigError::at(h.line, "`h = least_squares` needs `h_b`"))?;
                        Some((base_dir.join(&bf.value), parse_list(b)?))
                    }
                    Some(h) => {
                        return Err(ConfigError::at(
                            h.line,
                            format!("unknown smooth kind `{}` (zero, least_squares)", h.value),
                        ))
                    }
                };
                ProblemSource::Custom(CustomProblem {
                    a_file: base_dir.join(&a.value),
                    f,
                    g,
                    least_squares,
                })
            } else {
                ProblemSource::Catalog(e.value.clone())
            };
            if e.value != "example1" {
                cfg.x0 = StartSpec::Zero;
                cfg.y0 = StartSpec::Zero;
            }
        }
        if let Some(e) = doc.get("", "c") {
            cfg.c = parse_f64(e)?;
        }
        if let Some(e) = doc.get("", "gamma") {
            cfg.gamma = parse_f64(e)?;
        }

        if let Some(e) = doc.get("metric", "mode") {
            cfg.metric = match e.value.as_str() {
                "closed-form" => MetricKind::ClosedForm,
                "general" => MetricKind::General,
                v => {
                    return Err(ConfigError::at(
                        e.line,
                        format!("unknown metric mode `{v}` (closed-form, general)"),
                    ))
                }
            };
        }
        let schedule = doc.get("metric", "schedule");
        let tau = doc.get("metric", "tau");
        cfg.tau = match schedule.map(|e| e.value.as_str()) {
            None | Some("constant") => match tau {
                None => TauChoice::Auto,
                Some(t) if t.value == "auto" => TauChoice::Auto,
                Some(t) => TauChoice::Given(TauSchedule::Constant(parse_f64(t)?)),
            },
            Some("saturating") => {
                let s = schedule.expect("schedule present");
                let need = |k: &str| {
                    doc.get("metric", k).ok_or_else(|| {
                        ConfigError::at(s.line, format!("`schedule = saturating` needs `{k}`"))
                    })
                };
                TauChoice::Given(TauSchedule::Saturating {
                    initial: parse_f64(need("tau_initial")?)?,
                    limit: parse_f64(need("tau_limit")?)?,
                })
            }
            Some(v) => {
                let s = schedule.expect("schedule present");
                return Err(ConfigError::at(
                    s.line,
                    format!("unknown schedule `{v}` (constant, saturating)"),
                ));
            }
        };
        if let Some(e) = doc.get("metric", "inner_tol") {
            cfg.inner_tol = parse_f64(e)?;
        }

        let num = |k: &str, default: f64| -> Result<f64, ConfigError> {
            doc.get("integrator", k).map_or(Ok(default), parse_f64)
        };
        let kind = doc.get("integrator", "kind");
        cfg.integrator = match kind.map(|e| e.value.as_str()) {
            None | Some("rk4") => Integrator::Rk4 { step: num("step", 0.01)? },
            Some("euler") => Integrator::Euler { step: num("step", 0.01)? },
            Some("adaptive") => Integrator::Adaptive {
                rel_tol: num("rel_tol", 1e-8)?,
                abs_tol: num("abs_tol", 1e-10)?,
                h_min: num("h_min", 1e-10)?,
                h_max: num("h_max", 0.5)?,
            },
            Some(v) => {
                return Err(ConfigError::at(
                    kind.expect("kind present").line,
                    format!("unknown integrator `{v}` (euler, rk4, adaptive)"),
                ))
            }
        };
        cfg.horizon = num("horizon", cfg.horizon)?;
        cfg.sample_dt = num("sample_dt", cfg.sample_dt)?;

        if let Some(e) = doc.get("discrete", "scheme") {
            cfg.scheme = match e.value.as_str() {
                "admm" => Scheme::Admm,
                "primal-dual" => Scheme::PrimalDual,
                "chambolle-pock" => Scheme::ChambollePock,
                v => {
                    return Err(ConfigError::at(
                        e.line,
                        format!("unknown scheme `{v}` (admm, primal-dual, chambolle-pock)"),
                    ))
                }
            };
        }
        if let Some(e) = doc.get("discrete", "max_iters") {
            cfg.max_iters = parse_usize(e)?;
        }
        if let Some(e) = doc.get("discrete", "stop_tol") {
            cfg.stop_tol = parse_f64(e)?;
        }

        if let Some(e) = doc.get("start", "x0") {
            cfg.x0 = parse_start(e, false)?;
        }
        if let Some(e) = doc.get("start", "z0") {
            cfg.z0 = parse_start(e, true)?;
        }
        if let Some(e) = doc.get("start", "y0") {
            cfg.y0 = parse_start(e, false)?;
        }

        if let Some(e) = doc.get("sweep", "gammas") {
            cfg.sweep_gammas = parse_list(e)?;
        }
        if let Some(e) = doc.get("sweep", "tau_cs") {
            cfg.sweep_tau_cs = parse_list(e)?;
        }
        if let Some(e) = doc.get("sweep", "hit_threshold") {
            cfg.hit_threshold = parse_f64(e)?;
        }

        if let Some(e) = doc.get("output", "dir") {
            cfg.out_dir = Some(base_dir.join(&e.value));
        }
        if let Some(e) = doc.get("output", "dump_state") {
            cfg.dump_state = parse_bool(e)?;
        }

        cfg.validate()?;
        Ok(cfg)
    }

    pub fn parse(text: &str, base_dir: &Path) -> Result<Self, ConfigError> {
        Self::from_document(&Document::parse(text)?, base_dir)
    }

    fn fail(&self, key: &str, message: impl Into<String>) -> ConfigError {
        ConfigError {
            line: self.lines.get(key).copied(),
            message: message.into(),
        }
    }

    /// Range checks on the scalar parameters.
    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(self.fail("gamma", "gamma must lie in [0,1]"));
        }
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(self.fail("c", "c must be positive"));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(self.fail("integrator.horizon", "horizon must be positive"));
        }
        if !(self.sample_dt > 0.0) {
            return Err(self.fail("integrator.sample_dt", "sample_dt must be positive"));
        }
        match self.integrator {
            Integrator::Euler { step } | Integrator::Rk4 { step } if !(step > 0.0) => {
                return Err(self.fail("integrator.step", "step must be positive"))
            }
            _ => {}
        }
        if !(self.inner_tol > 0.0) {
            return Err(self.fail("metric.inner_tol", "inner_tol must be positive"));
        }
        if let TauChoice::Given(t) = &self.tau {
            t.validate().map_err(|e| self.fail("metric.tau", e.to_string()))?;
        }
        if !(self.stop_tol >= 0.0) {
            return Err(self.fail("discrete.stop_tol", "stop_tol must be nonnegative"));
        }
        if self.sweep_gammas.iter().any(|g| !(0.0..=1.0).contains(g)) {
            return Err(self.fail("sweep.gammas", "gamma must lie in [0,1]"));
        }
        if self.sweep_tau_cs.iter().any(|t| !(*t > 0.0)) {
            return Err(self.fail("sweep.tau_cs", "tau_c values must be positive"));
        }
        Ok(())
    }

    /// The configuration as text that parses back to an equal configuration.
    pub fn to_document(&self) -> Document {
        let mut d = Document::empty();
        match &self.problem {
            ProblemSource::Catalog(name) => d.set("", "problem", name.clone()),
            ProblemSource::Custom(cp) => {
                d.set("", "problem", "custom");
                d.set("problem", "a_file", cp.a_file.display().to_string());
                for (prefix, spec) in [("f", &cp.f), ("g", &cp.g)] {
                    match spec {
                        FunctionSpec::Zero => d.set("problem", prefix, "zero"),
                        FunctionSpec::SqNorm(c) => {
                            d.set("problem", prefix, "sq_norm");
                            d.set("problem", &format!("{prefix}_coef"), c.to_string());
                        }
                        FunctionSpec::L1(w) => {
                            d.set("problem", prefix, "l1");
                            d.set("problem", &format!("{prefix}_weight"), w.to_string());
                        }
                        FunctionSpec::Box { lo, hi } => {
                            d.set("problem", prefix, "box");
                            d.set("problem", &format!("{prefix}_lo"), format_vector(lo));
                            d.set("problem", &format!("{prefix}_hi"), format_vector(hi));
                        }
                    }
                }
                match &cp.least_squares {
                    None => d.set("problem", "h", "zero"),
                    Some((path, b)) => {
                        d.set("problem", "h", "least_squares");
                        d.set("problem", "h_b_file", path.display().to_string());
                        d.set("problem", "h_b", format_vector(b));
                    }
                }
            }
        }
        d.set("", "c", self.c.to_string());
        d.set("", "gamma", self.gamma.to_string());

        d.set(
            "metric",
            "mode",
            match self.metric {
                MetricKind::ClosedForm => "closed-form",
                MetricKind::General => "general",
            },
        );
        match &self.tau {
            TauChoice::Auto => {
                d.set("metric", "schedule", "constant");
                d.set("metric", "tau", "auto");
            }
            TauChoice::Given(TauSchedule::Saturating { initial, limit }) => {
                d.set("metric", "schedule", "saturating");
                d.set("metric", "tau_initial", initial.to_string());
                d.set("metric", "tau_limit", limit.to_string());
            }
            TauChoice::Given(t) => {
                d.set("metric", "schedule", "constant");
                d.set("metric", "tau", t.value(0.0).to_string());
            }
        }
        d.set("metric", "inner_tol", self.inner_tol.to_string());

        match self.integrator {
            Integrator::Euler { step } => {
                d.set("integrator", "kind", "euler");
                d.set("integrator", "step", step.to_string());
            }
            Integrator::Rk4 { step } => {
                d.set("integrator", "kind", "rk4");
                d.set("integrator", "step", step.to_string());
            }
            Integrator::Adaptive {
                rel_tol,
                abs_tol,
                h_min,
                h_max,
            } => {
                d.set("integrator", "kind", "adaptive");
                d.set("integrator", "rel_tol", rel_tol.to_string());
                d.set("integrator", "abs_tol", abs_tol.to_string());
                d.set("integrator", "h_min", h_min.to_string());
                d.set("integrator", "h_max", h_max.to_string());
            }
        }
        d.set("integrator", "horizon", self.horizon.to_string());
        d.set("integrator", "sample_dt", self.sample_dt.to_string());

        d.set("discrete", "scheme", self.scheme.as_str());
        d.set("discrete", "max_iters", self.max_iters.to_string());
        d.set("discrete", "stop_tol", self.stop_tol.to_string());

        let start = |s: &StartSpec| match s {
            StartSpec::Example1Default => "example1-default".to_string(),
            StartSpec::Zero => "zero".to_string(),
            StartSpec::Split => "split".to_string(),
            StartSpec::Values(v) => format_vector(v),
        };
        d.set("start", "x0", start(&self.x0));
        d.set("start", "z0", start(&self.z0));
        d.set("start", "y0", start(&self.y0));

        d.set("sweep", "gammas", format_vector(&self.sweep_gammas));
        d.set("sweep", "tau_cs", format_vector(&self.sweep_tau_cs));
        d.set("sweep", "hit_threshold", self.hit_threshold.to_string());

        if let Some(dir) = &self.out_dir {
            d.set("output", "dir", dir.display().to_string());
        }
        d.set("output", "dump_state", self.dump_state.to_string());
        d
    }

    /// Resolves a start specification for a vector of length `n`.
    pub fn start_vector(&self, spec: &StartSpec, n: usize, is_y: bool) -> Result<Vec<f64>, ConfigError> {
        let key = if is_y { "start.y0" } else { "start.x0" };
        match spec {
            StartSpec::Example1Default => {
                let v = if is_y { EXAMPLE1_Y0 } else { EXAMPLE1_X0 };
                if n != v.len() {
                    return Err(self.fail(key, format!("example1-default has length 2, problem needs {n}")));
                }
                Ok(v.to_vec())
            }
            StartSpec::Zero => Ok(vec![0.0; n]),
            StartSpec::Split => Err(self.fail(key, "`split` applies only to z0")),
            StartSpec::Values(v) if v.len() == n => Ok(v.clone()),
            StartSpec::Values(v) => Err(self.fail(key, format!("expected {n} entries, found {}", v.len()))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_sections_and_comments() {
        let d = Document::parse("a = 1 # note\n\n[s]\nb = x, y\n").unwrap();
        assert_eq!(d.get("", "a").unwrap().value, "1");
        assert_eq!(d.get("s", "b").unwrap().value, "x, y");
        assert_eq!(d.get("s", "b").unwrap().line, 4);
    }

    #[test]
    fn errors_are_line_anchored() {
        let e = Document::parse("a = 1\nnot a pair\n").unwrap_err();
        assert_eq!(e.line, Some(2));
        let e = Document::parse("[s]\nk = 1\nk = 2\n").unwrap_err();
        assert_eq!(e.line, Some(3));
        let e = Document::parse("[s\n").unwrap_err();
        assert_eq!(e.line, Some(1));
        let e = RunConfig::parse("c = 1\n[metric]\nbogus = 2\n", Path::new(".")).unwrap_err();
        assert_eq!(e.line, Some(3));
        let e = RunConfig::parse("c = 1\ngamma = 1.5\n", Path::new(".")).unwrap_err();
        assert_eq!(e.to_string(), "line 2: gamma must lie in [0,1]");
    }

    #[test]
    fn default_round_trip() {
        let cfg = RunConfig::default();
        let text = cfg.to_document().to_string();
        let mut back = RunConfig::parse(&text, Path::new("")).unwrap();
        back.lines.clear();
        assert_eq!(back, cfg);
    }

    #[test]
    fn custom_problem_keys() {
        let text = "problem = custom\n[problem]\na_file = A.txt\nf = sq_norm\nf_coef = 2\ng = box\ng_lo = -1, -1\ng_hi = 1, 1\n";
        let cfg = RunConfig::parse(text, Path::new("/data")).unwrap();
        match cfg.problem {
            ProblemSource::Custom(cp) => {
                assert_eq!(cp.a_file, PathBuf::from("/data/A.txt"));
                assert_eq!(cp.f, FunctionSpec::SqNorm(2.0));
                assert_eq!(
                    cp.g,
                    FunctionSpec::Box {
                        lo: vec![-1.0, -1.0],
                        hi: vec![1.0, 1.0]
                    }
                );
            }
            other => panic!("{other:?}"),
        }
        assert_eq!(cfg.x0, StartSpec::Zero);
    }
}
