//! First-order systems `Y′ = Q(x) Y` for quasi-derivative frames, their matrix
//! resolvents, and the transform relating frames of two regularizations of
//! the same expression.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::coefficients::{evaluate, FunctionDescriptor};
use crate::quadrature::{GridRef, SampledFunction};
use crate::{Error, Result, C64};

/// Square matrix function `Q(x)` sampled on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ShinZettlMatrix {
    dim: usize,
    /// Row-major, `dim × dim`.
    entries: Vec<SampledFunction>,
}

impl ShinZettlMatrix {
    pub fn new(dim: usize, entries: Vec<SampledFunction>) -> Result<Self> {
        if dim == 0 || entries.len() != dim * dim {
            return Err(Error::DimensionMismatch(format!(
                "{} entries for a {dim}×{dim} matrix",
                entries.len()
            )));
        }
        for e in &entries[1..] {
            entries[0].check_grid(e)?;
        }
        if let Some(bad) = entries.iter().position(|e| !e.is_finite()) {
            return Err(Error::InvalidSpec(format!(
                "matrix entry ({}, {}) is not finite",
                bad / dim,
                bad % dim
            )));
        }
        Ok(ShinZettlMatrix { dim, entries })
    }

    /// Parses a square array of expression rows.
    pub fn from_expressions<S: AsRef<str>>(rows: &[Vec<S>], grid: &GridRef) -> Result<Self> {
        let dim = rows.len();
        let mut entries = Vec::with_capacity(dim * dim);
        for row in rows {
            if row.len() != dim {
                return Err(Error::DimensionMismatch(format!(
                    "matrix row of length {} in a {dim}×{dim} matrix",
                    row.len()
                )));
            }
            for s in row {
                entries.push(evaluate(&FunctionDescriptor::parse(s.as_ref())?, grid)?);
            }
        }
        Self::new(dim, entries)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn grid(&self) -> &GridRef {
        self.entries[0].grid()
    }

    pub fn entry(&self, r: usize, c: usize) -> &SampledFunction {
        &self.entries[r * self.dim + c]
    }

    pub fn at(&self, i: usize) -> DMatrix<C64> {
        DMatrix::from_fn(self.dim, self.dim, |r, c| self.entry(r, c).at(i))
    }

    pub fn sub(&self, other: &ShinZettlMatrix) -> Result<Self> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch(format!(
                "{}×{0} minus {}×{1}",
                self.dim, other.dim
            )));
        }
        let entries = self
            .entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| a.sub(b))
            .collect::<Result<_>>()?;
        Self::new(self.dim, entries)
    }
}

/// `[[σ₁, 1], [q₁ − σ₁², −σ₁]]`, encoding `y″ = (σ₁′ + q₁) y` with
/// `y^[1] = y′ − σ₁ y`.
pub fn second_order_matrix(sigma1: &SampledFunction, q1: &SampledFunction) -> Result<ShinZettlMatrix> {
    sigma1.check_grid(q1)?;
    let one = SampledFunction::constant(sigma1.grid(), C64::new(1.0, 0.0));
    let lower = q1.zip_with(sigma1, |q, s| q - s * s)?;
    let neg = sigma1.scale(C64::new(-1.0, 0.0));
    ShinZettlMatrix::new(2, vec![sigma1.clone(), one, lower, neg])
}

/// Components `y^[0], …, y^[N−1]` of a quasi-derivative frame.
#[derive(Debug, Clone, PartialEq)]
pub struct QuasiFrameVector {
    components: Vec<SampledFunction>,
}

impl QuasiFrameVector {
    pub fn new(components: Vec<SampledFunction>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::DimensionMismatch("empty frame".into()));
        }
        for c in &components[1..] {
            components[0].check_grid(c)?;
        }
        Ok(QuasiFrameVector { components })
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    pub fn grid(&self) -> &GridRef {
        self.components[0].grid()
    }

    pub fn components(&self) -> &[SampledFunction] {
        &self.components
    }

    pub fn component(&self, k: usize) -> &SampledFunction {
        &self.components[k]
    }

    pub fn at(&self, i: usize) -> Vec<C64> {
        self.components.iter().map(|c| c.at(i)).collect()
    }

    fn from_node_vectors(grid: &GridRef, rows: &[Vec<C64>]) -> Self {
        let dim = rows[0].len();
        let components = (0..dim)
            .map(|k| SampledFunction::new(grid.clone(), rows.iter().map(|r| r[k]).collect()).expect("one row per node"))
            .collect();
        QuasiFrameVector { components }
    }

    /// `Y = Ỹ + Ŷ`. The first component is taken from `Ỹ` as is: `y^[0] = y`
    /// for every regularization.
    pub fn recombine(tilde: &QuasiFrameVector, hat: &QuasiFrameVector) -> Result<Self> {
        if tilde.dim() != hat.dim() {
            return Err(Error::DimensionMismatch(format!(
                "frames of dimension {} and {}",
                tilde.dim(),
                hat.dim()
            )));
        }
        let mut components = vec![tilde.components[0].clone()];
        for k in 1..tilde.dim() {
            components.push(tilde.components[k].add(&hat.components[k])?);
        }
        Ok(QuasiFrameVector { components })
    }
}

fn identity(d: usize) -> DMatrix<C64> {
    DMatrix::identity(d, d)
}

fn solve(a: DMatrix<C64>, b: DMatrix<C64>) -> Result<DMatrix<C64>> {
    a.lu()
        .solve(&b)
        .ok_or_else(|| Error::InvalidSpec("implicit trapezoid step is singular; refine the grid".into()))
}

/// Solves `Y′ = QY + f(x) e_last` from `Y(x₀) = y0` by the implicit trapezoid
/// rule, marching both ways from `x₀`.
pub fn solve_system(
    q: &ShinZettlMatrix,
    x0: usize,
    y0: &[C64],
    forcing: Option<&SampledFunction>,
) -> Result<QuasiFrameVector> {
    let d = q.dim();
    let grid = q.grid().clone();
    if y0.len() != d {
        return Err(Error::DimensionMismatch(format!("initial vector of length {} for dimension {d}", y0.len())));
    }
    if x0 >= grid.len() {
        return Err(Error::InvalidSpec(format!("x0 index {x0} outside the grid")));
    }
    if let Some(f) = forcing {
        f.check_grid(q.entry(0, 0))?;
    }
    let h = grid.step();
    let force = |i: usize| forcing.map_or(C64::new(0.0, 0.0), |f| f.at(i));
    let mut rows = vec![vec![C64::new(0.0, 0.0); d]; grid.len()];
    rows[x0] = y0.to_vec();
    for i in x0 + 1..grid.len() {
        let mut rhs = (identity(d) + q.at(i - 1) * C64::new(0.5 * h, 0.0)) * DMatrix::from_column_slice(d, 1, &rows[i - 1]);
        rhs[(d - 1, 0)] += 0.5 * h * (force(i - 1) + force(i));
        let y = solve(identity(d) - q.at(i) * C64::new(0.5 * h, 0.0), rhs)?;
        rows[i] = y.as_slice().to_vec();
    }
    for i in (0..x0).rev() {
        let mut rhs = (identity(d) - q.at(i + 1) * C64::new(0.5 * h, 0.0)) * DMatrix::from_column_slice(d, 1, &rows[i + 1]);
        rhs[(d - 1, 0)] -= 0.5 * h * (force(i) + force(i + 1));
        let y = solve(identity(d) + q.at(i) * C64::new(0.5 * h, 0.0), rhs)?;
        rows[i] = y.as_slice().to_vec();
    }
    Ok(QuasiFrameVector::from_node_vectors(&grid, &rows))
}

/// `R(x, t)` on the full square, `∂R/∂x = Q(x)R`, `R(t, t) = E`.
#[derive(Debug, Clone)]
pub struct MatrixResolvent {
    grid: GridRef,
    dim: usize,
    /// Block `(i, j)` holds `R(xᵢ, tⱼ)` row-major.
    data: Vec<C64>,
}

impl MatrixResolvent {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn grid(&self) -> &GridRef {
        &self.grid
    }

    fn block(&self, i: usize, j: usize) -> &[C64] {
        let n = self.grid.len();
        let s = self.dim * self.dim;
        let start = (i * n + j) * s;
        &self.data[start..start + s]
    }

    pub fn get(&self, i: usize, j: usize) -> DMatrix<C64> {
        DMatrix::from_row_slice(self.dim, self.dim, self.block(i, j))
    }

    /// `R(xᵢ, tⱼ) v`.
    fn apply(&self, i: usize, j: usize, v: &[C64]) -> Vec<C64> {
        let b = self.block(i, j);
        (0..self.dim)
            .map(|r| (0..self.dim).map(|c| b[r * self.dim + c] * v[c]).sum())
            .collect()
    }
}

/// Matrix resolvent of `Q` by implicit trapezoid steps. The one-step
/// propagators do not depend on the column, so each column is a chain of
/// precomputed products and `R(x,s)R(s,t) = R(x,t)` holds exactly along a
/// monotone chain.
pub fn matrix_resolvent(q: &ShinZettlMatrix) -> Result<MatrixResolvent> {
    let d = q.dim();
    let grid = q.grid().clone();
    let n = grid.len();
    let half = C64::new(0.5 * grid.step(), 0.0);
    let forward: Vec<DMatrix<C64>> = (1..n)
        .map(|i| solve(identity(d) - q.at(i) * half, identity(d) + q.at(i - 1) * half))
        .collect::<Result<_>>()?;
    let backward: Vec<DMatrix<C64>> = (0..n - 1)
        .map(|i| solve(identity(d) + q.at(i) * half, identity(d) - q.at(i + 1) * half))
        .collect::<Result<_>>()?;
    let columns: Vec<Vec<DMatrix<C64>>> = (0..n)
        .into_par_iter()
        .map(|j| {
            let mut col = vec![identity(d); n];
            for i in j + 1..n {
                col[i] = &forward[i - 1] * &col[i - 1];
            }
            for i in (0..j).rev() {
                col[i] = &backward[i] * &col[i + 1];
            }
            col
        })
        .collect();
    let mut data = vec![C64::new(0.0, 0.0); n * n * d * d];
    for (j, col) in columns.iter().enumerate() {
        for (i, m) in col.iter().enumerate() {
            let start = (i * n + j) * d * d;
            for r in 0..d {
                for c in 0..d {
                    data[start + r * d + c] = m[(r, c)];
                }
            }
        }
    }
    Ok(MatrixResolvent { grid, dim: d, data })
}

/// Signed trapezoid `∫_{x₀}^{xᵢ} g` for node values `g`.
fn signed_segment_integral(grid: &GridRef, x0: usize, i: usize, g: impl Fn(usize) -> Vec<C64>, d: usize) -> Vec<C64> {
    let (lo, hi, sign) = if i >= x0 { (x0, i, 1.0) } else { (i, x0, -1.0) };
    let mut acc = vec![C64::new(0.0, 0.0); d];
    for q in lo..=hi {
        let w = sign * grid.segment_weight(lo, hi, q);
        if w != 0.0 {
            for (a, v) in acc.iter_mut().zip(g(q)) {
                *a += w * v;
            }
        }
    }
    acc
}

/// `Ŷ = Y − Ỹ` for frames of two regularizations `Q`, `Q̃` of one expression:
/// `Ŷ(x) = Y₀(x) + ∫_{x₀}^x R(x,t) Q(t) Y₀(t) dt` with
/// `Y₀(x) = Ŷ(x₀) + ∫_{x₀}^x (Q − Q̃) Ỹ` and `R` the matrix resolvent of `Q`.
pub fn transform_frames(
    tilde: &QuasiFrameVector,
    q: &ShinZettlMatrix,
    q_tilde: &ShinZettlMatrix,
    x0: usize,
    hat_at_x0: &[C64],
) -> Result<QuasiFrameVector> {
    let d = q.dim();
    if q_tilde.dim() != d || tilde.dim() != d || hat_at_x0.len() != d {
        return Err(Error::DimensionMismatch(format!(
            "Q is {d}×{d}, Q̃ is {0}×{0}, frame has {1} components, Ŷ(x₀) has {2}",
            q_tilde.dim(),
            tilde.dim(),
            hat_at_x0.len()
        )));
    }
    let grid = q.grid().clone();
    tilde.component(0).check_grid(q.entry(0, 0))?;
    q.entry(0, 0).check_grid(q_tilde.entry(0, 0))?;
    if x0 >= grid.len() {
        return Err(Error::InvalidSpec(format!("x0 index {x0} outside the grid")));
    }
    let q_hat = q.sub(q_tilde)?;
    let mat_vec = |m: &DMatrix<C64>, v: &[C64]| -> Vec<C64> {
        (0..d).map(|r| (0..d).map(|c| m[(r, c)] * v[c]).sum()).collect()
    };
    let f: Vec<Vec<C64>> = (0..grid.len()).map(|i| mat_vec(&q_hat.at(i), &tilde.at(i))).collect();

    // Y₀ by cumulative trapezoid from x₀ in both directions.
    let h = grid.step();
    let mut y0 = vec![hat_at_x0.to_vec(); grid.len()];
    for i in x0 + 1..grid.len() {
        y0[i] = (0..d).map(|k| y0[i - 1][k] + 0.5 * h * (f[i - 1][k] + f[i][k])).collect();
    }
    for i in (0..x0).rev() {
        y0[i] = (0..d).map(|k| y0[i + 1][k] - 0.5 * h * (f[i][k] + f[i + 1][k])).collect();
    }

    let r = matrix_resolvent(q)?;
    let qy0: Vec<Vec<C64>> = (0..grid.len()).map(|i| mat_vec(&q.at(i), &y0[i])).collect();
    let rows: Vec<Vec<C64>> = (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let integral = signed_segment_integral(&grid, x0, i, |t| r.apply(i, t, &qy0[t]), d);
            (0..d).map(|k| y0[i][k] + integral[k]).collect()
        })
        .collect();
    Ok(QuasiFrameVector::from_node_vectors(&grid, &rows))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::{make_grid, Scheme};

    fn grid(n: usize) -> GridRef {
        make_grid(n, Scheme::UniformTrapezoid).unwrap()
    }

    fn c(v: f64) -> C64 {
        C64::new(v, 0.0)
    }

    fn max_block_err(r: &MatrixResolvent, exact: impl Fn(f64, f64) -> DMatrix<C64>) -> f64 {
        let g = r.grid();
        let mut e: f64 = 0.0;
        for i in 0..g.len() {
            for j in 0..g.len() {
                e = e.max((r.get(i, j) - exact(g.x(i), g.x(j))).camax());
            }
        }
        e
    }

    /// `exp(A)` by scaling and squaring with a Taylor core.
    fn expm(a: &DMatrix<C64>) -> DMatrix<C64> {
        let norm = a.iter().map(|v| v.norm()).sum::<f64>();
        let s = (norm.log2().ceil().max(0.0) as i32) + 4;
        let scaled = a * C64::new(0.5f64.powi(s), 0.0);
        let mut term = DMatrix::identity(a.nrows(), a.ncols());
        let mut sum = term.clone();
        for k in 1..20 {
            term = &term * &scaled * C64::new(1.0 / k as f64, 0.0);
            sum += &term;
        }
        for _ in 0..s {
            sum = &sum * &sum;
        }
        sum
    }

    #[test]
    fn second_order_matrix_entries() {
        let g = grid(11);
        let zero = SampledFunction::zeros(&g);
        let free = second_order_matrix(&zero, &zero).unwrap();
        assert_eq!(free.at(5), DMatrix::from_row_slice(2, 2, &[c(0.0), c(1.0), c(0.0), c(0.0)]));
        let step = SampledFunction::from_real_fn(&g, |x| if x >= 0.5 { 1.0 } else { 0.0 });
        let delta = second_order_matrix(&step, &zero).unwrap();
        assert_eq!(delta.at(2), free.at(2));
        assert_eq!(delta.at(7), DMatrix::from_row_slice(2, 2, &[c(1.0), c(1.0), c(-1.0), c(-1.0)]));
        let q = SampledFunction::from_real_fn(&g, |x| x * x);
        let sl = second_order_matrix(&zero, &q).unwrap();
        assert_eq!(sl.at(10), DMatrix::from_row_slice(2, 2, &[c(0.0), c(1.0), c(1.0), c(0.0)]));
    }

    #[test]
    fn resolvent_of_zero_matrix() {
        let g = grid(11);
        let z = ShinZettlMatrix::new(2, vec![SampledFunction::zeros(&g); 4]).unwrap();
        let r = matrix_resolvent(&z).unwrap();
        assert_eq!(max_block_err(&r, |_, _| DMatrix::identity(2, 2)), 0.0);
    }

    #[test]
    fn resolvent_of_constant_matrix() {
        let g = grid(201);
        let a = DMatrix::from_row_slice(2, 2, &[c(0.3), c(1.0), C64::new(-2.0, 0.5), c(-0.1)]);
        let entries = a.transpose().iter().map(|&v| SampledFunction::constant(&g, v)).collect();
        let q = ShinZettlMatrix::new(2, entries).unwrap();
        let r = matrix_resolvent(&q).unwrap();
        let err = max_block_err(&r, |x, t| expm(&(&a * C64::new(x - t, 0.0))));
        assert!(err < 1e-4, "{err}");
        let scalar = ShinZettlMatrix::new(1, vec![SampledFunction::constant(&g, c(1.0))]).unwrap();
        let r1 = matrix_resolvent(&scalar).unwrap();
        let e1 = max_block_err(&r1, |x, t| DMatrix::from_element(1, 1, c((x - t).exp())));
        assert!(e1 < 1e-4, "{e1}");
    }

    #[test]
    fn resolvent_semigroup() {
        let g = grid(81);
        let q = ShinZettlMatrix::from_expressions(&[vec!["sin(3*x)", "1"], vec!["x-2", "0-sin(3*x)"]], &g).unwrap();
        let r = matrix_resolvent(&q).unwrap();
        for t in (0..81).step_by(10) {
            for s in (t..81).step_by(10) {
                for x in (s..81).step_by(10) {
                    let lhs = r.get(x, s) * r.get(s, t);
                    assert!((lhs - r.get(x, t)).camax() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn equal_matrices_give_zero_transform() {
        let g = grid(51);
        let q = ShinZettlMatrix::from_expressions(&[vec!["x", "1"], vec!["cos(x)-x^2", "0-x"]], &g).unwrap();
        let frame = solve_system(&q, 0, &[c(1.0), c(0.0)], None).unwrap();
        let hat = transform_frames(&frame, &q, &q, 10, &[c(0.0), c(0.0)]).unwrap();
        assert!(hat.components().iter().all(|comp| comp.max_abs() == 0.0));
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let g = grid(11);
        let q2 = ShinZettlMatrix::from_expressions(&[vec!["0", "1"], vec!["0", "0"]], &g).unwrap();
        let q1 = ShinZettlMatrix::from_expressions(&[vec!["1"]], &g).unwrap();
        let frame = solve_system(&q2, 0, &[c(1.0), c(0.0)], None).unwrap();
        assert!(matches!(
            transform_frames(&frame, &q2, &q1, 0, &[c(0.0), c(0.0)]),
            Err(Error::DimensionMismatch(_))
        ));
        assert!(ShinZettlMatrix::from_expressions(&[vec!["1", "2"]], &g).is_err());
    }

    #[test]
    fn transform_matches_direct_solve_with_forcing() {
        // Two regularizations of y″ = (σ′ + q₁) y + f with σ = x², q₁ = 1 versus
        // σ = 0, q₁ = 2x + 1; both frames are solved directly and compared.
        let g = grid(401);
        let q = ShinZettlMatrix::from_expressions(&[vec!["x^2", "1"], vec!["1-x^4", "0-x^2"]], &g).unwrap();
        let qt = ShinZettlMatrix::from_expressions(&[vec!["0", "1"], vec!["2*x+1", "0"]], &g).unwrap();
        let f = SampledFunction::from_real_fn(&g, |x| (2.0 * x).cos());
        let x0 = 100;
        let tilde = solve_system(&qt, x0, &[c(1.0), c(-0.5)], Some(&f)).unwrap();
        let x = g.x(x0);
        let direct = solve_system(&q, x0, &[c(1.0), c(-0.5 - x * x)], Some(&f)).unwrap();
        let hat = transform_frames(&tilde, &q, &qt, x0, &[c(0.0), c(-x * x)]).unwrap();
        for k in 0..2 {
            let sum = tilde.component(k).add(hat.component(k)).unwrap();
            let err = sum.max_abs_diff(direct.component(k)).unwrap();
            assert!(err < 1e-3, "component {k}: {err}");
        }
    }

    #[test]
    fn continuous_frames_stay_continuous() {
        let g = grid(201);
        let q = ShinZettlMatrix::from_expressions(&[vec!["H(x-0.5)", "1"], vec!["0-H(x-0.5)", "0-H(x-0.5)"]], &g).unwrap();
        let qt = ShinZettlMatrix::from_expressions(&[vec!["0", "1"], vec!["0", "0"]], &g).unwrap();
        let tilde = solve_system(&qt, 0, &[c(1.0), c(1.0)], None).unwrap();
        let hat = transform_frames(&tilde, &q, &qt, 0, &[c(0.0), c(0.0)]).unwrap();
        let h = g.step();
        let bound = (0..g.len())
            .map(|i| {
                let m = q.sub(&qt).unwrap().at(i);
                let v = tilde.at(i);
                (0..2).map(|r| (0..2).map(|cc| m[(r, cc)] * v[cc]).sum::<C64>().norm()).fold(0.0, f64::max)
            })
            .fold(0.0, f64::max);
        for comp in hat.components() {
            for i in 1..g.len() {
                assert!((comp.at(i) - comp.at(i - 1)).norm() <= 10.0 * h * bound.max(1.0));
            }
        }
    }
}
