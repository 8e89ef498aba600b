use std::fs;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};

use super::config::{Domain, ExperimentConfig, LoadSpec, NonlinearityChoice};
use crate::conditions::{
    check_coercivity, check_g0, check_growth, check_theorem_g1, check_theorem_g2, check_theorem_g3,
    incomparability_suite, HypothesisReport, LimsupGrid, SampleBox, TheoremOptions, Verdict,
};
use crate::eigen::{first_eigenpair, EigenOptions, EigenResult};
use crate::error::Result;
use crate::fem::{build_interval_mesh, build_rectangle_mesh, load_vector, nonlinear_load, DiscreteField, DualVector, Mesh};
use crate::nonlinearity::{
    constant, eta_linear, eta_phi, example4, paper_example, power_perturbation, scaled_power, zero, NonlinearitySpec,
};
use crate::solver::{minimize_phi, probe_local_minimum, verify_weak_solution, SolveOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Ok,
    Inconclusive,
}

impl Status {
    fn as_str(self) -> &'static str {
        match self {
            Status::Ok => "ok",
            Status::Inconclusive => "inconclusive",
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub status: Status,
    pub out_dir: PathBuf,
    pub files: Vec<PathBuf>,
    /// One human-readable line per pipeline stage.
    pub summary: Vec<String>,
}

impl RunOutcome {
    pub fn exit_code(&self) -> i32 {
        match self.status {
            Status::Ok => 0,
            Status::Inconclusive => 2,
        }
    }
}

pub fn build_mesh(domain: &Domain) -> Result<Mesh> {
    match *domain {
        Domain::Interval { a, b, n } => build_interval_mesh(a, b, n),
        Domain::Rectangle { ax, bx, ay, by, nx, ny } => build_rectangle_mesh(ax, bx, ay, by, nx, ny),
    }
}

pub fn build_nonlinearity(choice: &NonlinearityChoice, lambda1: f64, p: f64) -> Result<NonlinearitySpec> {
    match choice {
        NonlinearityChoice::Zero => Ok(zero()),
        NonlinearityChoice::Constant { c } => Ok(constant(*c)),
        NonlinearityChoice::ScaledPower { mu } => scaled_power(mu.resolve(lambda1), p),
        NonlinearityChoice::PowerPerturbation { lambda, beta } => power_perturbation(lambda.resolve(lambda1), *beta, p),
        NonlinearityChoice::PaperExample { d } => paper_example(d.clone()),
        NonlinearityChoice::EtaPhi { eta, phi, lambda } => eta_phi(eta.clone(), *phi, lambda.resolve(lambda1), p),
        NonlinearityChoice::EtaLinear { eta, lambda } => eta_linear(eta.clone(), lambda.resolve(lambda1), p),
        NonlinearityChoice::Example4 { a, phi, lambda } => example4(a.clone(), *phi, lambda.resolve(lambda1), p),
    }
}

pub fn build_load(spec: &LoadSpec, mesh: &Mesh, eigen: &EigenResult) -> Result<DualVector> {
    match spec {
        LoadSpec::Zero => Ok(mesh.zero_dual()),
        LoadSpec::Density(g) => load_vector(mesh, |x| g.eval(x)),
        LoadSpec::Phi1(c) => nonlinear_load(mesh, &eigen.phi1, |_, s| Ok(c * s)),
    }
}

/// Seventeen significant digits.
fn num(v: f64) -> String {
    format!("{v:.16e}")
}

struct Csv {
    text: String,
}

impl Csv {
    fn new<S: AsRef<str>>(header: &[S]) -> Csv {
        let names: Vec<&str> = header.iter().map(|h| h.as_ref()).collect();
        Csv {
            text: format!("{}\n", names.join(",")),
        }
    }

    fn row(&mut self, cells: &[String]) {
        self.text.push_str(&cells.join(","));
        self.text.push('\n');
    }
}

fn coordinate_header<'a>(mesh: &Mesh, last: &'a str) -> Vec<&'a str> {
    let mut h = if mesh.dim() == 1 { vec!["x"] } else { vec!["x", "y"] };
    h.push(last);
    h
}

fn coordinates(mesh: &Mesh, v: usize) -> Vec<String> {
    mesh.vertex(v)[..mesh.dim()].iter().map(|c| num(*c)).collect()
}

fn field_csv(mesh: &Mesh, u: &DiscreteField, name: &str) -> String {
    let mut csv = Csv::new(&coordinate_header(mesh, name));
    let vv = mesh.vertex_values(u);
    for (v, value) in vv.iter().enumerate() {
        let mut row = coordinates(mesh, v);
        row.push(num(*value));
        csv.row(&row);
    }
    csv.text
}

struct Writer {
    dir: PathBuf,
    files: Vec<PathBuf>,
}

impl Writer {
    fn write(&mut self, name: &str, content: &str) -> Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, content)?;
        self.files.push(path);
        Ok(())
    }
}

struct Tally {
    inconclusive: Vec<String>,
}

impl Tally {
    fn verdict(&mut self, what: &str, v: Verdict) {
        if v == Verdict::Inconclusive {
            self.inconclusive.push(what.to_owned());
        }
    }
}

fn verdict_rows(csv: &mut Csv, report: &HypothesisReport) {
    for h in &report.hypotheses {
        csv.row(&[report.theorem.clone(), h.name.clone(), h.verdict.to_string()]);
    }
    csv.row(&[report.theorem.clone(), "overall".into(), report.overall.to_string()]);
}

/// Run the configured pipeline, writing all artifacts into the output
/// directory. On error a report with `"status": "error"` is still written
/// when possible.
pub fn run(config: &ExperimentConfig) -> Result<RunOutcome> {
    let dir = config.out.clone();
    fs::create_dir_all(&dir)?;
    let mut w = Writer {
        dir: dir.clone(),
        files: Vec::new(),
    };
    w.write("manifest.txt", &config.to_manifest())?;
    match execute(config, &mut w) {
        Ok(outcome) => Ok(outcome),
        Err(e) => {
            let report = json!({
                "status": "error",
                "error": e.to_string(),
                "config": manifest_json(config),
            });
            // best effort; the original error is what matters
            let _ = fs::write(dir.join("report.json"), pretty(&report));
            Err(e)
        }
    }
}

fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("report serializes");
    s.push('\n');
    s
}

fn manifest_json(config: &ExperimentConfig) -> Value {
    Value::Object(config.resolved().into_iter().map(|(k, v)| (k, Value::String(v))).collect())
}

fn execute(config: &ExperimentConfig, w: &mut Writer) -> Result<RunOutcome> {
    let p = config.p;
    let t = &config.tolerances;
    let mut summary = Vec::new();
    let mut tally = Tally {
        inconclusive: Vec::new(),
    };
    let mut report = serde_json::Map::new();
    report.insert("config".into(), manifest_json(config));

    let mesh = build_mesh(&config.domain)?;
    report.insert(
        "mesh".into(),
        json!({
            "dim": mesh.dim(),
            "cells": mesh.num_cells(),
            "vertices": mesh.num_vertices(),
            "free": mesh.num_free(),
            "element_scale": mesh.element_scale(),
        }),
    );

    let eigen = first_eigenpair(
        &mesh,
        p,
        &EigenOptions {
            residual_tol: t.eigen_residual,
            max_iterations: t.eigen_max_iterations,
            seed: config.seed,
            ..Default::default()
        },
    )?;
    report.insert(
        "eigen".into(),
        json!({
            "p": p,
            "lambda1": eigen.lambda1,
            "iterations": eigen.iterations,
            "residual": eigen.residual,
        }),
    );
    w.write("eigenfunction.csv", &field_csv(&mesh, &eigen.phi1, "phi1"))?;
    summary.push(format!("eigen: lambda1 = {} ({} iterations)", eigen.lambda1, eigen.iterations));

    let spec = build_nonlinearity(&config.nonlinearity, eigen.lambda1, p)?;
    let h = build_load(&config.h, &mesh, &eigen)?;

    if config.pipeline.solves() {
        let opts = SolveOptions {
            max_iterations: t.max_iterations,
            stationarity_tol: t.stationarity,
            random_starts: t.random_starts,
            start_amplitude: t.start_amplitude,
            seed: config.seed,
            ..Default::default()
        };
        let sol = minimize_phi(&mesh, &spec, &h, p, &opts)?;
        let weak = verify_weak_solution(&mesh, &sol.minimizer, &spec, &h, p, t.truncation_radius, t.weak_residual)?;
        let probe = probe_local_minimum(&mesh, &spec, &h, &sol.minimizer, p)?;
        if !sol.converged {
            tally.inconclusive.push("solve did not converge".into());
        }
        if !weak.passed {
            tally.inconclusive.push("weak residual above tolerance".into());
        }
        w.write("solution.csv", &field_csv(&mesh, &sol.minimizer, "u"))?;
        let mut csv = Csv::new(&coordinate_header(&mesh, "residual"));
        for (j, &v) in mesh.free_vertices().iter().enumerate() {
            let mut row = coordinates(&mesh, v);
            row.push(num(weak.residuals[j]));
            csv.row(&row);
        }
        w.write("residuals.csv", &csv.text)?;
        summary.push(format!(
            "solve: converged = {}, Phi = {}, stationarity = {:e}, weak residual = {:e}",
            sol.converged, sol.phi_value, sol.stationarity, weak.relative_residual
        ));
        report.insert("solve".into(), serde_json::to_value(&sol).expect("serializable"));
        report.insert("weak_residual".into(), serde_json::to_value(&weak).expect("serializable"));
        report.insert("local_minimum".into(), serde_json::to_value(&probe).expect("serializable"));
    }

    let opts = TheoremOptions {
        grid: LimsupGrid {
            radius: t.limsup_radius,
            levels: t.limsup_levels,
        },
        f0_radius: t.f0_radius,
    };

    if config.pipeline.audits() {
        let mut csv = Csv::new(&["check", "item", "verdict"]);
        let mut conditions = serde_json::Map::new();
        let g1 = check_theorem_g1(&mesh, &spec, &eigen, &opts)?;
        let phi = match &config.nonlinearity {
            NonlinearityChoice::EtaPhi { phi, .. } | NonlinearityChoice::Example4 { phi, .. } => Some(*phi),
            _ => spec.comparison,
        };
        let g2 = match phi {
            Some(phi) => Some(check_theorem_g2(&mesh, &spec, &eigen, Some(phi), &opts)?),
            None => None,
        };
        let g3 = check_theorem_g3(&mesh, &spec, &eigen, &h, &opts)?;
        let mut line = Vec::new();
        for r in [Some(&g1), g2.as_ref(), Some(&g3)].into_iter().flatten() {
            verdict_rows(&mut csv, r);
            tally.verdict(&r.theorem, r.overall);
            line.push(format!("{} {}", r.theorem, r.overall));
            conditions.insert(r.theorem.clone(), serde_json::to_value(r).expect("serializable"));
        }
        if g2.is_none() {
            conditions.insert("G2".into(), json!({"skipped": "no comparison function configured"}));
        }
        if spec.autonomous {
            let g0 = check_g0(&spec, eigen.lambda1, p, opts.grid)?;
            csv.row(&["G0".into(), "G0".into(), g0.verdict.to_string()]);
            tally.verdict("G0", g0.verdict);
            line.push(format!("G0 {}", g0.verdict));
            conditions.insert("G0".into(), serde_json::to_value(&g0).expect("serializable"));
        }
        let sample = SampleBox::from_mesh(&mesh);
        let coercive = check_coercivity(&spec, eigen.lambda1, p, &sample.points, opts.grid)?;
        csv.row(&["coercivity".into(), "F".into(), coercive.verdict.to_string()]);
        tally.verdict("coercivity", coercive.verdict);
        line.push(format!("coercivity {}", coercive.verdict));
        conditions.insert("coercivity".into(), serde_json::to_value(&coercive).expect("serializable"));
        let mut growth = Vec::new();
        for &q in &t.growth_q {
            let g = check_growth(&spec, q, &sample)?;
            csv.row(&["growth".into(), format!("q={q}"), g.verdict.to_string()]);
            tally.verdict("growth", g.verdict);
            growth.push(serde_json::to_value(&g).expect("serializable"));
        }
        conditions.insert("growth".into(), Value::Array(growth));
        w.write("verdicts.csv", &csv.text)?;
        summary.push(format!("conditions: {}", line.join(", ")));
        report.insert("conditions".into(), Value::Object(conditions));
    }

    if config.pipeline.tabulates() {
        let table = incomparability_suite(&mesh, &eigen, &opts)?;
        let mut csv = Csv::new(&["example", "G1", "G2", "G3"]);
        for row in &table.rows {
            let mut cells = vec![row.example.clone()];
            for v in row.verdicts {
                tally.verdict(&row.example, v);
                cells.push(v.to_string());
            }
            csv.row(&cells);
        }
        w.write("incomparability.csv", &csv.text)?;
        summary.push(format!("incomparability: diagonal = {}", table.is_diagonal()));
        let mut value = serde_json::to_value(&table).expect("serializable");
        value["diagonal"] = json!(table.is_diagonal());
        report.insert("incomparability".into(), value);
    }

    let status = if tally.inconclusive.is_empty() {
        Status::Ok
    } else {
        Status::Inconclusive
    };
    report.insert("status".into(), json!(status.as_str()));
    report.insert("inconclusive".into(), json!(tally.inconclusive));
    w.write("report.json", &pretty(&Value::Object(report)))?;
    Ok(RunOutcome {
        status,
        out_dir: w.dir.clone(),
        files: w.files.clone(),
        summary,
    })
}

/// Read and parse a configuration file.
pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = fs::read_to_string(path)?;
    super::config::parse_config(&text)
}
