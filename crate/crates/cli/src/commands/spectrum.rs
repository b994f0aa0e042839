use std::io::Write;

use vspectra::bvp::{assemble_inverse, normalize_bc, Split};
use vspectra::coefficients::{evaluate, FunctionDescriptor};
use vspectra::io::{format_complex, format_float};
use vspectra::reduction::{shift, Provenance};
use vspectra::spectral::{self, check_khromov, completeness_residual, SpectralResult};
use vspectra::C64;

use super::reduce::report_diagnostics;
use super::{emit, emit_json, emit_text, Options};
use crate::config::{ProblemConfig, SpectralConfig};
use crate::error::{CliError, CliResult};
use crate::plot::{Plot, Series, Style};

fn default_spectral() -> SpectralConfig {
    serde_json::from_str("{}").expect("all spectral fields have defaults")
}

/// `1, 2, 4, …` up to the number of root functions available.
fn default_m_values(available: usize) -> Vec<usize> {
    std::iter::successors(Some(1usize), |m| Some(m * 2))
        .take_while(|&m| m <= available)
        .collect()
}

/// Eigenvalues of `L` itself; with a shift `a` the computed ones are `λ + a`.
fn write_eigenvalues<W: Write>(w: &mut W, result: &SpectralResult, a: C64) -> vspectra::Result<()> {
    writeln!(w, "index,re,im,multiplicity,residual")?;
    for (k, c) in result.clusters().iter().enumerate() {
        let lambda = c.lambda - a;
        writeln!(
            w,
            "{},{},{},{},{}",
            k + 1,
            format_float(lambda.re),
            format_float(lambda.im),
            c.multiplicity,
            format_float(c.residual)
        )?;
    }
    Ok(())
}

pub fn spectrum(cfg: &ProblemConfig, opts: &Options) -> CliResult<()> {
    let grid = cfg.grid()?;
    let problem = cfg.problem(&grid)?;
    if let Some(d) = &problem.diagnostics {
        report_diagnostics(d);
    }
    let a = cfg.shift_value()?.unwrap_or_default();
    let form = shift(&problem.form, a)?;

    let bc = cfg.boundary()?;
    if bc.order() != form.order() {
        return Err(CliError::Config(format!(
            "boundary rows have {} columns but the expression has order {}",
            bc.order(),
            form.order()
        )));
    }
    if bc.l() == bc.order() {
        return Err(vspectra::Error::NoRightConditions.into());
    }
    match bc.split() {
        Split::Regular => eprintln!("warning: 2l = N: regular case out of scope; results are not covered by the completeness check"),
        Split::RightHeavy if form.provenance() != Provenance::Raw => eprintln!(
            "warning: N - l > l with l = {}; the completeness check expects more left conditions than right ones",
            bc.l()
        ),
        _ => {}
    }
    let op = assemble_inverse(&form, &normalize_bc(&bc)?)?;

    let spec = cfg.spectral.clone().unwrap_or_else(default_spectral);
    let result = spectral::spectrum(&op, spec.count)?;
    let report = check_khromov(&op, form.order());

    let dir = &opts.out_dir;
    emit(dir, "eigenvalues.csv", |w| write_eigenvalues(w, &result, a))?;
    emit(dir, "rootfns.csv", |w| result.write_rootfns_csv(w))?;
    emit_json(dir, "khromov.json", &report)?;
    emit(dir, "gv.csv", |w| op.write_gv_csv(w))?;
    emit(dir, "m_kernel.csv", |w| op.kernel().write_csv(w))?;

    let mut curve = None;
    if let Some(source) = &spec.test_function {
        let f = evaluate(&FunctionDescriptor::parse(source)?, &grid)?;
        let available = result.root_functions().len();
        let requested = if spec.m_values.is_empty() {
            default_m_values(available)
        } else {
            spec.m_values.clone()
        };
        let (m_values, skipped): (Vec<usize>, Vec<usize>) = requested.into_iter().partition(|&m| m <= available);
        if !skipped.is_empty() {
            eprintln!("warning: only {available} root functions computed; skipping m = {skipped:?}");
        }
        let residuals = completeness_residual(&result, &f, &m_values)?;
        let norm = completeness_residual(&result, &f, &[0])?[0];
        emit(dir, "completeness.csv", |w| {
            writeln!(w, "m,residual,relative")?;
            for (m, r) in m_values.iter().zip(&residuals) {
                let relative = if norm > 0.0 { r / norm } else { 0.0 };
                writeln!(w, "{m},{},{}", format_float(*r), format_float(relative))?;
            }
            Ok(())
        })?;
        curve = Some((m_values, residuals));
    }

    if opts.plot {
        let points = result
            .clusters()
            .iter()
            .map(|c| {
                let lambda = c.lambda - a;
                (lambda.re, lambda.im)
            })
            .collect();
        let scatter = Plot {
            title: "eigenvalues".into(),
            x_label: "Re".into(),
            y_label: "Im".into(),
            log_y: false,
            series: vec![Series {
                points,
                style: Style::Points,
            }],
        };
        emit_text(dir, "eigenvalues.svg", &scatter.render())?;
        if let Some((m_values, residuals)) = &curve {
            let points: Vec<(f64, f64)> = m_values.iter().zip(residuals).map(|(&m, &r)| (m as f64, r)).collect();
            let plot = Plot {
                title: "projection residual".into(),
                x_label: "m".into(),
                y_label: "residual".into(),
                log_y: true,
                series: vec![
                    Series {
                        points: points.clone(),
                        style: Style::Line,
                    },
                    Series {
                        points,
                        style: Style::Points,
                    },
                ],
            };
            emit_text(dir, "completeness.svg", &plot.render())?;
        }
    }

    for (k, c) in result.clusters().iter().enumerate() {
        println!(
            "lambda_{} = {}  multiplicity {}  residual {:.3e}",
            k + 1,
            format_complex(c.lambda - a),
            c.multiplicity,
            c.residual
        );
    }
    if let Some((m_values, residuals)) = &curve {
        for (m, r) in m_values.iter().zip(residuals) {
            println!("residual m = {m}: {r:.6e}");
        }
    }
    println!(
        "completeness hypotheses {}",
        if report.applicable { "hold" } else { "do not all hold" }
    );
    for m in &report.messages {
        println!("  {m}");
    }
    Ok(())
}
