use serde::Serialize;
use vspectra::coefficients::{Severity, SpecDiagnostics};
use vspectra::io::write_functions_csv;
use vspectra::reduction::{Eligibility, Provenance};

use super::{emit, emit_json, Options};
use crate::config::ProblemConfig;
use crate::error::CliResult;

#[derive(Serialize)]
struct DiagnosticRecord {
    severity: &'static str,
    message: String,
}

#[derive(Serialize)]
struct FormHeader {
    m: usize,
    n: usize,
    provenance: Provenance,
    multiplier_is_identity: bool,
    eligibility: Eligibility,
    spectral_eligible: bool,
    grid_points: usize,
    min_abs_q0: Option<f64>,
    b_squared_range: Option<(f64, f64)>,
    diagnostics: Vec<DiagnosticRecord>,
}

pub(crate) fn severity_name(s: Severity) -> &'static str {
    match s {
        Severity::Info => "info",
        Severity::Warning => "warning",
        Severity::Error => "error",
    }
}

pub(crate) fn report_diagnostics(d: &SpecDiagnostics) {
    for m in d.messages.iter().filter(|m| m.severity >= Severity::Warning) {
        eprintln!("{}: {}", severity_name(m.severity), m.message);
    }
}

pub fn reduce(cfg: &ProblemConfig, opts: &Options) -> CliResult<()> {
    let grid = cfg.grid()?;
    let problem = cfg.problem(&grid)?;
    let form = &problem.form;
    if let Some(d) = &problem.diagnostics {
        report_diagnostics(d);
    }
    let dir = &opts.out_dir;
    emit(dir, "kernel.csv", |w| form.kernel().write_csv(w))?;
    let names: Vec<String> = (1..=form.n()).map(|k| format!("u{k}")).collect();
    let rank: Vec<_> = form.rank_part().iter().collect();
    emit(dir, "u.csv", |w| write_functions_csv(w, &names, &rank))?;
    let eligibility = form.eligibility();
    let header = FormHeader {
        m: form.m(),
        n: form.n(),
        provenance: form.provenance(),
        multiplier_is_identity: form.multiplier_is_identity(),
        eligibility,
        spectral_eligible: eligibility.is_eligible(),
        grid_points: grid.len(),
        min_abs_q0: problem.diagnostics.as_ref().and_then(|d| d.min_abs_q0),
        b_squared_range: problem.diagnostics.as_ref().and_then(|d| d.b_squared_range),
        diagnostics: problem
            .diagnostics
            .iter()
            .flat_map(|d| d.messages.iter())
            .map(|m| DiagnosticRecord {
                severity: severity_name(m.severity),
                message: m.message.clone(),
            })
            .collect(),
    };
    emit_json(dir, "form.json", &header)?;
    println!(
        "reduced order {} form (m = {}, n = {}) on {} nodes; artifacts in {}",
        form.order(),
        form.m(),
        form.n(),
        grid.len(),
        dir.display()
    );
    if !eligibility.is_eligible() {
        println!("form is not spectral-eligible: {eligibility:?}");
    }
    Ok(())
}
