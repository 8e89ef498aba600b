use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;

use crate::error::{Error, Result};
use crate::nonlinearity::parse_call;
use crate::nonlinearity::{ComparisonFunction, ComparisonKind, ScalarField, Weight};

#[derive(Debug, Clone, PartialEq)]
pub enum Domain {
    Interval { a: f64, b: f64, n: usize },
    Rectangle { ax: f64, bx: f64, ay: f64, by: f64, nx: usize, ny: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pipeline {
    Eigen,
    Solve,
    Conditions,
    Incomparability,
    All,
}

impl Pipeline {
    pub fn solves(self) -> bool {
        matches!(self, Pipeline::Solve | Pipeline::All)
    }

    pub fn audits(self) -> bool {
        matches!(self, Pipeline::Conditions | Pipeline::All)
    }

    pub fn tabulates(self) -> bool {
        matches!(self, Pipeline::Incomparability | Pipeline::All)
    }
}

/// A real number that may be given as a multiple of the first eigenvalue.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Scalar {
    Value(f64),
    /// `factor * lambda1`
    Lambda1(f64),
}

impl Scalar {
    pub fn resolve(self, lambda1: f64) -> f64 {
        match self {
            Scalar::Value(v) => v,
            Scalar::Lambda1(k) => k * lambda1,
        }
    }
}

/// Right-hand side `h`.
#[derive(Debug, Clone, PartialEq)]
pub enum LoadSpec {
    Zero,
    /// `<h, v> = integral g v`
    Density(ScalarField),
    /// `<h, v> = c integral phi1 v`
    Phi1(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub enum NonlinearityChoice {
    Zero,
    Constant { c: f64 },
    ScaledPower { mu: Scalar },
    PowerPerturbation { lambda: Scalar, beta: f64 },
    PaperExample { d: Weight },
    EtaPhi { eta: Weight, phi: ComparisonFunction, lambda: Scalar },
    EtaLinear { eta: Weight, lambda: Scalar },
    Example4 { a: Weight, phi: ComparisonFunction, lambda: Scalar },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tolerances {
    pub eigen_residual: f64,
    pub eigen_max_iterations: usize,
    pub stationarity: f64,
    pub max_iterations: usize,
    pub random_starts: usize,
    pub start_amplitude: f64,
    pub weak_residual: f64,
    /// `None` uses twice the sup norm of the solution.
    pub truncation_radius: Option<f64>,
    pub limsup_radius: f64,
    pub limsup_levels: usize,
    /// `None` skips the `(f_0)` check.
    pub f0_radius: Option<f64>,
    pub growth_q: Vec<f64>,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            eigen_residual: 1e-9,
            eigen_max_iterations: 5000,
            stationarity: 1e-8,
            max_iterations: 2000,
            random_starts: 5,
            start_amplitude: 1.0,
            weak_residual: 1e-6,
            truncation_radius: None,
            limsup_radius: 1.0,
            limsup_levels: 40,
            f0_radius: Some(10.0),
            growth_q: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub domain: Domain,
    pub p: f64,
    pub nonlinearity: NonlinearityChoice,
    pub h: LoadSpec,
    pub pipeline: Pipeline,
    pub tolerances: Tolerances,
    pub seed: u64,
    pub out: PathBuf,
}

const GENERAL_KEYS: &[&str] = &[
    "domain",
    "cells",
    "p",
    "pipeline",
    "nonlinearity",
    "h",
    "seed",
    "out",
    "eigen_tol",
    "eigen_max_iterations",
    "stationarity_tol",
    "max_iterations",
    "random_starts",
    "start_amplitude",
    "weak_tol",
    "truncation_radius",
    "limsup_radius",
    "limsup_levels",
    "f0_radius",
    "growth_q",
];

/// Keys accepted as parameters of each nonlinearity.
fn parameters_of(name: &str) -> Option<&'static [&'static str]> {
    Some(match name {
        "zero" => &[],
        "constant" => &["c"],
        "scaled_power" => &["mu"],
        "power_perturbation" => &["lambda", "beta"],
        "paper_example" => &["d", "d_exponent"],
        "eta_phi" => &["eta", "eta_exponent", "phi", "lambda"],
        "eta_linear" => &["eta", "eta_exponent", "lambda"],
        "example4" => &["a", "phi", "lambda"],
        _ => return None,
    })
}

const ALL_PARAMETERS: &[&str] = &["c", "mu", "lambda", "beta", "d", "d_exponent", "eta", "eta_exponent", "a", "phi"];

struct Entry {
    line: usize,
    value: String,
}

struct Parser {
    entries: BTreeMap<String, Entry>,
    errors: Vec<String>,
}

impl Parser {
    fn error(&mut self, key: &str, msg: impl fmt::Display) {
        match self.entries.get(key) {
            Some(e) => self.errors.push(format!("line {}: `{key}`: {msg}", e.line)),
            None => self.errors.push(format!("`{key}`: {msg}")),
        }
    }

    fn raw(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|e| e.value.as_str())
    }

    fn required(&mut self, key: &str) -> Option<String> {
        let v = self.raw(key).map(str::to_owned);
        if v.is_none() {
            self.errors.push(format!("missing required key `{key}`"));
        }
        v
    }

    fn parsed<T>(&mut self, key: &str, default: T, parse: impl FnOnce(&str) -> std::result::Result<T, String>) -> T {
        let Some(raw) = self.raw(key).map(str::to_owned) else {
            return default;
        };
        match parse(&raw) {
            Ok(v) => v,
            Err(msg) => {
                self.error(key, msg);
                default
            }
        }
    }
}

fn real(text: &str) -> std::result::Result<f64, String> {
    text.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| format!("expected a finite number, got `{text}`"))
}

fn positive(text: &str) -> std::result::Result<f64, String> {
    let v = real(text)?;
    if v > 0.0 {
        Ok(v)
    } else {
        Err(format!("must be positive, got {v}"))
    }
}

fn count(text: &str) -> std::result::Result<usize, String> {
    text.parse::<usize>().map_err(|_| format!("expected a nonnegative integer, got `{text}`"))
}

fn optional_positive(text: &str) -> std::result::Result<Option<f64>, String> {
    if text == "auto" || text == "none" {
        Ok(None)
    } else {
        positive(text).map(Some)
    }
}

fn scalar(text: &str) -> std::result::Result<Scalar, String> {
    let t = text.replace(' ', "");
    if t == "lambda1" {
        return Ok(Scalar::Lambda1(1.0));
    }
    if let Some(k) = t.strip_suffix("*lambda1") {
        return real(k).map(Scalar::Lambda1);
    }
    real(&t).map(Scalar::Value)
}

fn field(text: &str) -> std::result::Result<ScalarField, String> {
    ScalarField::parse(text).map_err(|e| e.to_string())
}

fn comparison(text: &str) -> std::result::Result<ComparisonFunction, String> {
    let bad = || format!("expected `power(alpha)` or `power_log(alpha)`, got `{text}`");
    let (name, args) = parse_call(text.trim()).ok_or_else(bad)?;
    if args.len() != 1 {
        return Err(bad());
    }
    match name {
        "power" => ComparisonFunction::power(args[0]),
        "power_log" => ComparisonFunction::power_log(args[0]),
        _ => return Err(bad()),
    }
    .map_err(|e| e.to_string())
}

fn domain(text: &str, cells: Option<&str>) -> std::result::Result<Domain, String> {
    let (name, args) = parse_call(text.trim())
        .ok_or_else(|| format!("expected `interval(a, b)` or `rectangle(ax, bx, ay, by)`, got `{text}`"))?;
    let cells: Vec<usize> = match cells {
        Some(c) => c
            .split(',')
            .map(|v| count(v.trim()))
            .collect::<std::result::Result<_, _>>()?,
        None => Vec::new(),
    };
    if cells.contains(&0) {
        return Err("cell counts must be positive".into());
    }
    let ordered = |lo: f64, hi: f64| {
        if lo < hi {
            Ok(())
        } else {
            Err(format!("empty extent [{lo}, {hi}]"))
        }
    };
    match (name, args.as_slice()) {
        ("interval", &[a, b]) => {
            ordered(a, b)?;
            let n = match cells.as_slice() {
                [] => 64,
                [n] => *n,
                _ => return Err("an interval takes a single cell count".into()),
            };
            if n < 2 {
                return Err("an interval needs at least 2 cells".into());
            }
            Ok(Domain::Interval { a, b, n })
        }
        ("rectangle", &[ax, bx, ay, by]) => {
            ordered(ax, bx)?;
            ordered(ay, by)?;
            let (nx, ny) = match cells.as_slice() {
                [] => (16, 16),
                [n] => (*n, *n),
                [nx, ny] => (*nx, *ny),
                _ => return Err("a rectangle takes one or two cell counts".into()),
            };
            if nx < 2 || ny < 2 {
                return Err("a rectangle needs at least 2 cells per direction".into());
            }
            Ok(Domain::Rectangle { ax, bx, ay, by, nx, ny })
        }
        _ => Err(format!("expected `interval(a, b)` or `rectangle(ax, bx, ay, by)`, got `{text}`")),
    }
}

fn load(text: &str) -> std::result::Result<LoadSpec, String> {
    let t = text.trim();
    if t == "zero" || t == "0" {
        return Ok(LoadSpec::Zero);
    }
    if let Some(inner) = t.strip_prefix("density(").and_then(|r| r.strip_suffix(')')) {
        return field(inner).map(LoadSpec::Density);
    }
    if let Some((name, args)) = parse_call(t) {
        if name == "phi1" && args.len() == 1 {
            return Ok(LoadSpec::Phi1(args[0]));
        }
    }
    Err(format!("expected `zero`, `density(field)` or `phi1(c)`, got `{text}`"))
}

/// Parse and validate an experiment description. Every problem found is
/// reported, not only the first.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let mut ps = Parser {
        entries: BTreeMap::new(),
        errors: Vec::new(),
    };
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        let content = line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            ps.errors.push(format!("line {line_no}: expected `key = value`, got `{content}`"));
            continue;
        };
        let key = key.trim().to_owned();
        let value = value.trim().trim_matches('"').to_owned();
        if !GENERAL_KEYS.contains(&key.as_str()) && !ALL_PARAMETERS.contains(&key.as_str()) {
            ps.errors.push(format!("line {line_no}: unknown key `{key}`"));
            continue;
        }
        if let Some(prev) = ps.entries.get(&key) {
            ps.errors.push(format!("line {line_no}: duplicate key `{key}` (first set on line {})", prev.line));
            continue;
        }
        ps.entries.insert(key, Entry { line: line_no, value });
    }

    let domain_text = ps.required("domain");
    let cells = ps.raw("cells").map(str::to_owned);
    let domain = domain_text.and_then(|d| match domain(&d, cells.as_deref()) {
        Ok(d) => Some(d),
        Err(msg) => {
            ps.error("domain", msg);
            None
        }
    });

    let p = ps.required("p").and_then(|raw| match real(&raw) {
        Ok(p) if p > 1.0 => Some(p),
        Ok(_) => {
            ps.error("p", "p must exceed 1");
            None
        }
        Err(msg) => {
            ps.error("p", msg);
            None
        }
    });

    let pipeline = ps.required("pipeline").and_then(|raw| {
        let v = match raw.as_str() {
            "eigen" => Pipeline::Eigen,
            "solve" => Pipeline::Solve,
            "conditions" => Pipeline::Conditions,
            "incomparability" => Pipeline::Incomparability,
            "all" => Pipeline::All,
            other => {
                ps.error("pipeline", format!("unknown pipeline `{other}`"));
                return None;
            }
        };
        Some(v)
    });

    let nonlinearity = parse_nonlinearity(&mut ps);
    let h = ps.parsed("h", LoadSpec::Zero, load);
    let d = Tolerances::default();
    let tolerances = Tolerances {
        eigen_residual: ps.parsed("eigen_tol", d.eigen_residual, positive),
        eigen_max_iterations: ps.parsed("eigen_max_iterations", d.eigen_max_iterations, count),
        stationarity: ps.parsed("stationarity_tol", d.stationarity, positive),
        max_iterations: ps.parsed("max_iterations", d.max_iterations, count),
        random_starts: ps.parsed("random_starts", d.random_starts, count),
        start_amplitude: ps.parsed("start_amplitude", d.start_amplitude, positive),
        weak_residual: ps.parsed("weak_tol", d.weak_residual, positive),
        truncation_radius: ps.parsed("truncation_radius", d.truncation_radius, optional_positive),
        limsup_radius: ps.parsed("limsup_radius", d.limsup_radius, positive),
        limsup_levels: ps.parsed("limsup_levels", d.limsup_levels, |t| {
            let n = count(t)?;
            if (8..=60).contains(&n) {
                Ok(n)
            } else {
                Err(format!("must lie in 8..=60, got {n}"))
            }
        }),
        f0_radius: ps.parsed("f0_radius", d.f0_radius, optional_positive),
        growth_q: ps.parsed("growth_q", d.growth_q, |t| {
            if t.is_empty() || t == "none" {
                return Ok(Vec::new());
            }
            t.split(',').map(|q| positive(q.trim())).collect()
        }),
    };
    let seed = ps.parsed("seed", 0, |t| t.parse::<u64>().map_err(|_| format!("expected an unsigned integer, got `{t}`")));
    let out = ps.parsed("out", PathBuf::from("plapvar-out"), |t| {
        if t.is_empty() {
            Err("must not be empty".into())
        } else {
            Ok(PathBuf::from(t))
        }
    });

    if !ps.errors.is_empty() {
        return Err(Error::Config(ps.errors));
    }
    let (Some(domain), Some(p), Some(pipeline), Some(nonlinearity)) = (domain, p, pipeline, nonlinearity) else {
        unreachable!("missing values always record an error")
    };
    Ok(ExperimentConfig {
        domain,
        p,
        nonlinearity,
        h,
        pipeline,
        tolerances,
        seed,
        out,
    })
}

fn parse_nonlinearity(ps: &mut Parser) -> Option<NonlinearityChoice> {
    let name = ps.raw("nonlinearity").unwrap_or("zero").to_owned();
    let Some(allowed) = parameters_of(&name) else {
        ps.error("nonlinearity", format!("unknown nonlinearity `{name}`"));
        return None;
    };
    let stray: Vec<String> = ALL_PARAMETERS
        .iter()
        .filter(|k| ps.raw(k).is_some() && !allowed.contains(k))
        .map(|k| k.to_string())
        .collect();
    for k in stray {
        ps.error(&k, format!("not a parameter of nonlinearity `{name}`"));
    }
    let before = ps.errors.len();
    let need = |ps: &mut Parser, key: &str| -> Option<String> {
        let v = ps.raw(key).map(str::to_owned);
        if v.is_none() {
            ps.errors.push(format!("nonlinearity `{name}` requires key `{key}`"));
        }
        v
    };
    let weight = |ps: &mut Parser, key: &str, text: Option<String>, exponent_key: &str| -> Option<Weight> {
        let f = match field(&text?) {
            Ok(f) => f,
            Err(msg) => {
                ps.error(key, msg);
                return None;
            }
        };
        let exponent = ps.parsed(exponent_key, f64::INFINITY, |t| {
            if t == "inf" {
                return Ok(f64::INFINITY);
            }
            let e = real(t)?;
            if e >= 1.0 {
                Ok(e)
            } else {
                Err(format!("must be >= 1 or `inf`, got {e}"))
            }
        });
        Weight::with_exponent(f, exponent).ok()
    };
    let lambda = ps.parsed("lambda", Scalar::Lambda1(1.0), scalar);
    let choice = match name.as_str() {
        "zero" => Some(NonlinearityChoice::Zero),
        "constant" => need(ps, "c").and_then(|t| match real(&t) {
            Ok(c) => Some(NonlinearityChoice::Constant { c }),
            Err(msg) => {
                ps.error("c", msg);
                None
            }
        }),
        "scaled_power" => need(ps, "mu").and_then(|t| match scalar(&t) {
            Ok(mu) => Some(NonlinearityChoice::ScaledPower { mu }),
            Err(msg) => {
                ps.error("mu", msg);
                None
            }
        }),
        "power_perturbation" => need(ps, "beta").and_then(|t| match real(&t) {
            Ok(beta) => Some(NonlinearityChoice::PowerPerturbation { lambda, beta }),
            Err(msg) => {
                ps.error("beta", msg);
                None
            }
        }),
        "paper_example" => {
            let text = Some(ps.raw("d").unwrap_or("1").to_owned());
            weight(ps, "d", text, "d_exponent").map(|d| NonlinearityChoice::PaperExample { d })
        }
        "eta_phi" | "example4" => {
            let key = if name == "eta_phi" { "eta" } else { "a" };
            let text = need(ps, key);
            let exponent_key = if name == "eta_phi" { "eta_exponent" } else { "a_exponent" };
            let w = weight(ps, key, text, exponent_key);
            let phi = need(ps, "phi").and_then(|t| match comparison(&t) {
                Ok(c) => Some(c),
                Err(msg) => {
                    ps.error("phi", msg);
                    None
                }
            });
            match (w, phi) {
                (Some(eta), Some(phi)) if name == "eta_phi" => Some(NonlinearityChoice::EtaPhi { eta, phi, lambda }),
                (Some(a), Some(phi)) => Some(NonlinearityChoice::Example4 { a, phi, lambda }),
                _ => None,
            }
        }
        "eta_linear" => {
            let text = need(ps, "eta");
            weight(ps, "eta", text, "eta_exponent").map(|eta| NonlinearityChoice::EtaLinear { eta, lambda })
        }
        _ => unreachable!(),
    };
    if ps.errors.len() > before {
        None
    } else {
        choice
    }
}

fn fmt_scalar(s: Scalar) -> String {
    match s {
        Scalar::Value(v) => format!("{v}"),
        Scalar::Lambda1(k) if k == 1.0 => "lambda1".into(),
        Scalar::Lambda1(k) => format!("{k}*lambda1"),
    }
}

fn fmt_exponent(e: f64) -> String {
    if e.is_infinite() {
        "inf".into()
    } else {
        format!("{e}")
    }
}

fn fmt_comparison(phi: &ComparisonFunction) -> String {
    match phi.kind {
        ComparisonKind::Power => format!("power({})", phi.alpha),
        ComparisonKind::PowerLog => format!("power_log({})", phi.alpha),
    }
}

fn fmt_optional(v: Option<f64>, none: &str) -> String {
    v.map_or_else(|| none.to_owned(), |r| format!("{r}"))
}

impl ExperimentConfig {
    /// The fully resolved configuration as ordered `key = value` pairs.
    /// Parsing their rendering yields the same configuration.
    pub fn resolved(&self) -> Vec<(String, String)> {
        let mut kv: Vec<(&str, String)> = Vec::new();
        match self.domain {
            Domain::Interval { a, b, n } => {
                kv.push(("domain", format!("interval({a}, {b})")));
                kv.push(("cells", n.to_string()));
            }
            Domain::Rectangle { ax, bx, ay, by, nx, ny } => {
                kv.push(("domain", format!("rectangle({ax}, {bx}, {ay}, {by})")));
                kv.push(("cells", format!("{nx}, {ny}")));
            }
        }
        kv.push(("p", format!("{}", self.p)));
        kv.push((
            "pipeline",
            match self.pipeline {
                Pipeline::Eigen => "eigen",
                Pipeline::Solve => "solve",
                Pipeline::Conditions => "conditions",
                Pipeline::Incomparability => "incomparability",
                Pipeline::All => "all",
            }
            .into(),
        ));
        match &self.nonlinearity {
            NonlinearityChoice::Zero => kv.push(("nonlinearity", "zero".into())),
            NonlinearityChoice::Constant { c } => {
                kv.push(("nonlinearity", "constant".into()));
                kv.push(("c", format!("{c}")));
            }
            NonlinearityChoice::ScaledPower { mu } => {
                kv.push(("nonlinearity", "scaled_power".into()));
                kv.push(("mu", fmt_scalar(*mu)));
            }
            NonlinearityChoice::PowerPerturbation { lambda, beta } => {
                kv.push(("nonlinearity", "power_perturbation".into()));
                kv.push(("lambda", fmt_scalar(*lambda)));
                kv.push(("beta", format!("{beta}")));
            }
            NonlinearityChoice::PaperExample { d } => {
                kv.push(("nonlinearity", "paper_example".into()));
                kv.push(("d", d.field.to_string()));
                kv.push(("d_exponent", fmt_exponent(d.exponent)));
            }
            NonlinearityChoice::EtaPhi { eta, phi, lambda } => {
                kv.push(("nonlinearity", "eta_phi".into()));
                kv.push(("eta", eta.field.to_string()));
                kv.push(("eta_exponent", fmt_exponent(eta.exponent)));
                kv.push(("phi", fmt_comparison(phi)));
                kv.push(("lambda", fmt_scalar(*lambda)));
            }
            NonlinearityChoice::EtaLinear { eta, lambda } => {
                kv.push(("nonlinearity", "eta_linear".into()));
                kv.push(("eta", eta.field.to_string()));
                kv.push(("eta_exponent", fmt_exponent(eta.exponent)));
                kv.push(("lambda", fmt_scalar(*lambda)));
            }
            NonlinearityChoice::Example4 { a, phi, lambda } => {
                kv.push(("nonlinearity", "example4".into()));
                kv.push(("a", a.field.to_string()));
                kv.push(("phi", fmt_comparison(phi)));
                kv.push(("lambda", fmt_scalar(*lambda)));
            }
        }
        kv.push((
            "h",
            match &self.h {
                LoadSpec::Zero => "zero".into(),
                LoadSpec::Density(g) => format!("density({g})"),
                LoadSpec::Phi1(c) => format!("phi1({c})"),
            },
        ));
        let t = &self.tolerances;
        kv.push(("eigen_tol", format!("{:e}", t.eigen_residual)));
        kv.push(("eigen_max_iterations", t.eigen_max_iterations.to_string()));
        kv.push(("stationarity_tol", format!("{:e}", t.stationarity)));
        kv.push(("max_iterations", t.max_iterations.to_string()));
        kv.push(("random_starts", t.random_starts.to_string()));
        kv.push(("start_amplitude", format!("{}", t.start_amplitude)));
        kv.push(("weak_tol", format!("{:e}", t.weak_residual)));
        kv.push(("truncation_radius", fmt_optional(t.truncation_radius, "auto")));
        kv.push(("limsup_radius", format!("{}", t.limsup_radius)));
        kv.push(("limsup_levels", t.limsup_levels.to_string()));
        kv.push(("f0_radius", fmt_optional(t.f0_radius, "none")));
        let qs: Vec<String> = t.growth_q.iter().map(|q| format!("{q}")).collect();
        kv.push(("growth_q", if qs.is_empty() { "none".into() } else { qs.join(", ") }));
        kv.push(("seed", self.seed.to_string()));
        kv.push(("out", self.out.display().to_string()));
        kv.into_iter().map(|(k, v)| (k.to_owned(), v)).collect()
    }

    pub fn to_manifest(&self) -> String {
        self.resolved()
            .into_iter()
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }
}
