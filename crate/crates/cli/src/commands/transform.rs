use vspectra::io::write_functions_csv;
use vspectra::quadrature::SampledFunction;
use vspectra::quasideriv::{solve_system, transform_frames, QuasiFrameVector, ShinZettlMatrix};
use vspectra::C64;

use super::{emit, Options};
use crate::config::{complex_list, ProblemConfig};
use crate::error::{CliError, CliResult};

/// Nearest node to `x0 ∈ [0, 1]`.
fn node_index(x0: f64, points: usize) -> CliResult<usize> {
    if !(0.0..=1.0).contains(&x0) {
        return Err(CliError::Config(format!("transform.x0 = {x0} is outside [0, 1]")));
    }
    Ok((x0 * (points - 1) as f64).round() as usize)
}

/// Frames `Ỹ` of `Q̃` from the given data at `x₀`, the difference `Ŷ` and `Y = Ỹ + Ŷ`.
pub fn transform_qd(cfg: &ProblemConfig, opts: &Options) -> CliResult<()> {
    let t = cfg
        .transform
        .as_ref()
        .ok_or_else(|| CliError::Config("missing `transform` block".into()))?;
    let grid = cfg.grid()?;
    let q = ShinZettlMatrix::from_expressions(&t.q, &grid)?;
    let q_tilde = ShinZettlMatrix::from_expressions(&t.q_tilde, &grid)?;
    let x0 = node_index(t.x0, grid.len())?;
    let initial = complex_list(&t.initial)?;
    let hat_at_x0 = match &t.hat_at_x0 {
        Some(v) => complex_list(v)?,
        None => vec![C64::new(0.0, 0.0); q.dim()],
    };
    let tilde = solve_system(&q_tilde, x0, &initial, None)?;
    let hat = transform_frames(&tilde, &q, &q_tilde, x0, &hat_at_x0)?;
    let full = QuasiFrameVector::recombine(&tilde, &hat)?;

    let d = q.dim();
    let mut names = Vec::with_capacity(3 * d);
    let mut columns: Vec<&SampledFunction> = Vec::with_capacity(3 * d);
    for (prefix, frame) in [("tilde", &tilde), ("hat", &hat), ("y", &full)] {
        for k in 0..d {
            names.push(format!("{prefix}{k}_"));
            columns.push(frame.component(k));
        }
    }
    let path = emit(&opts.out_dir, "frames.csv", |w| write_functions_csv(w, &names, &columns))?;
    let largest = hat.components().iter().map(SampledFunction::max_abs).fold(0.0, f64::max);
    println!("dimension {d}, x0 node {x0}, max |Y - Y~| = {largest:.6e}");
    println!("wrote {}", path.display());
    Ok(())
}
