//! Lower-triangular kernels `K(x, t)`, `t ≤ x`, on a uniform grid.
//!
//! Storage is packed row-major over the lower triangle, so row `i` (all `t ≤ xᵢ`)
//! is a contiguous slice. Every integral over `[tⱼ, xᵢ]` uses the trapezoid
//! rule on the nodes `j..=i`.

use std::io::{BufRead, Write};

use rayon::prelude::*;

use crate::io::{format_float, parse_float};
use crate::quadrature::{same_grid, GridRef, SampledFunction};
use crate::{taylor_monomial, Error, Result, C64};

const DIAGONAL_TOL: f64 = 1e-12;

#[inline]
pub(crate) fn packed_index(i: usize, j: usize) -> usize {
    debug_assert!(j <= i);
    i * (i + 1) / 2 + j
}

#[derive(Debug, Clone, PartialEq)]
pub struct TriangularKernel {
    grid: GridRef,
    values: Vec<C64>,
    diagonal_zero: bool,
}

impl TriangularKernel {
    /// Wraps packed row-major values; the diagonal flag is derived from them.
    pub fn from_packed(grid: GridRef, values: Vec<C64>) -> Result<Self> {
        let n = grid.len();
        let expected = n * (n + 1) / 2;
        if values.len() != expected {
            return Err(Error::LengthMismatch {
                expected,
                actual: values.len(),
            });
        }
        let diagonal_zero = (0..n).all(|i| values[packed_index(i, i)].norm() < DIAGONAL_TOL);
        Ok(TriangularKernel {
            grid,
            values,
            diagonal_zero,
        })
    }

    pub fn zeros(grid: &GridRef) -> Self {
        let n = grid.len();
        TriangularKernel {
            grid: grid.clone(),
            values: vec![C64::new(0.0, 0.0); n * (n + 1) / 2],
            diagonal_zero: true,
        }
    }

    /// Samples `k(x, t)` on the triangle, rows in parallel.
    pub fn from_fn(grid: &GridRef, k: impl Fn(f64, f64) -> C64 + Sync) -> Self {
        Self::from_index_fn(grid, |i, j| k(grid.x(i), grid.x(j)))
    }

    pub fn from_index_fn(grid: &GridRef, k: impl Fn(usize, usize) -> C64 + Sync) -> Self {
        let rows: Vec<Vec<C64>> = (0..grid.len())
            .into_par_iter()
            .map(|i| (0..=i).map(|j| k(i, j)).collect())
            .collect();
        Self::from_packed(grid.clone(), rows.concat()).expect("row lengths match the triangle")
    }

    /// Fallible variant of [`TriangularKernel::from_index_fn`].
    pub fn try_from_index_fn(
        grid: &GridRef,
        k: impl Fn(usize, usize) -> Result<C64> + Sync,
    ) -> Result<Self> {
        let rows: Vec<Vec<C64>> = (0..grid.len())
            .into_par_iter()
            .map(|i| (0..=i).map(|j| k(i, j)).collect::<Result<Vec<_>>>())
            .collect::<Result<_>>()?;
        Self::from_packed(grid.clone(), rows.concat())
    }

    fn from_columns(grid: &GridRef, columns: Vec<Vec<C64>>) -> Self {
        Self::from_index_fn(grid, |i, j| columns[j][i - j])
    }

    pub fn grid(&self) -> &GridRef {
        &self.grid
    }

    pub fn size(&self) -> usize {
        self.grid.len()
    }

    pub fn diagonal_zero(&self) -> bool {
        self.diagonal_zero
    }

    pub fn packed(&self) -> &[C64] {
        &self.values
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.values[packed_index(i, j)]
    }

    /// `K(xᵢ, t₀..=tᵢ)`.
    #[inline]
    pub fn row(&self, i: usize) -> &[C64] {
        let start = packed_index(i, 0);
        &self.values[start..=start + i]
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.norm()))
    }

    pub fn is_identically_zero(&self) -> bool {
        self.values.iter().all(|v| *v == C64::new(0.0, 0.0))
    }

    pub fn max_abs_diff(&self, other: &TriangularKernel) -> Result<f64> {
        self.check_grid(other.grid())?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (a, b)| m.max((a - b).norm())))
    }

    pub fn check_grid(&self, grid: &GridRef) -> Result<()> {
        if same_grid(&self.grid, grid) {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    pub fn map(&self, f: impl Fn(usize, usize, C64) -> C64 + Sync) -> Self {
        Self::from_index_fn(&self.grid, |i, j| f(i, j, self.get(i, j)))
    }

    pub fn add(&self, other: &TriangularKernel) -> Result<Self> {
        self.check_grid(other.grid())?;
        Ok(self.map(|i, j, v| v + other.get(i, j)))
    }

    /// Kernel of the composition `K∘L`: `∫_t^x K(x,τ) L(τ,t) dτ`.
    pub fn compose(&self, other: &TriangularKernel) -> Result<Self> {
        self.check_grid(other.grid())?;
        let h = self.grid.step();
        Ok(Self::from_index_fn(&self.grid, |i, j| {
            if i == j {
                return C64::new(0.0, 0.0);
            }
            let row = self.row(i);
            let inner: C64 = (j + 1..i).map(|k| row[k] * other.get(k, j)).sum();
            h * inner + 0.5 * h * (row[j] * other.get(j, j) + row[i] * other.get(i, j))
        }))
    }

    /// `(Kf)(xᵢ) = ∫₀^{xᵢ} K(xᵢ, t) f(t) dt`.
    pub fn apply(&self, f: &SampledFunction) -> Result<SampledFunction> {
        self.check_grid(f.grid())?;
        let g = &self.grid;
        let values: Vec<C64> = (0..g.len())
            .into_par_iter()
            .map(|i| {
                let row = self.row(i);
                (0..=i).map(|j| g.segment_weight(0, i, j) * row[j] * f.at(j)).sum()
            })
            .collect();
        SampledFunction::new(g.clone(), values)
    }

    /// `f + Kf`.
    pub fn apply_identity_plus(&self, f: &SampledFunction) -> Result<SampledFunction> {
        self.apply(f)?.add(f)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "i,j,x,t,re,im")?;
        let x = self.grid.nodes();
        for i in 0..self.size() {
            for (j, v) in self.row(i).iter().enumerate() {
                writeln!(
                    w,
                    "{i},{j},{},{},{},{}",
                    format_float(x[i]),
                    format_float(x[j]),
                    format_float(v.re),
                    format_float(v.im)
                )?;
            }
        }
        Ok(())
    }

    /// Reads the format of [`TriangularKernel::write_csv`]; every `(i, j)` of the
    /// triangle must appear exactly once, in any order.
    pub fn read_csv<R: BufRead>(grid: &GridRef, r: R) -> Result<Self> {
        let n = grid.len();
        let total = n * (n + 1) / 2;
        let mut values = vec![C64::new(0.0, 0.0); total];
        let mut seen = vec![false; total];
        let mut lines = r.lines().enumerate();
        match lines.next() {
            Some((_, Ok(h))) if h.trim() == "i,j,x,t,re,im" => {}
            _ => {
                return Err(Error::Csv {
                    line: 1,
                    message: "expected header `i,j,x,t,re,im`".into(),
                })
            }
        }
        for (lineno, line) in lines {
            let line = line?;
            let lineno = lineno + 1;
            if line.trim().is_empty() {
                continue;
            }
            let bad = |message: String| Error::Csv {
                line: lineno,
                message,
            };
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != 6 {
                return Err(bad(format!("expected 6 fields, got {}", fields.len())));
            }
            let i: usize = fields[0].parse().map_err(|_| bad("bad row index".into()))?;
            let j: usize = fields[1].parse().map_err(|_| bad("bad column index".into()))?;
            if j > i || i >= n {
                return Err(bad(format!("index ({i}, {j}) outside the triangle of {n} nodes")));
            }
            let re = parse_float(fields[4]).ok_or_else(|| bad("bad real part".into()))?;
            let im = parse_float(fields[5]).ok_or_else(|| bad("bad imaginary part".into()))?;
            let k = packed_index(i, j);
            if seen[k] {
                return Err(bad(format!("duplicate entry ({i}, {j})")));
            }
            seen[k] = true;
            values[k] = C64::new(re, im);
        }
        if let Some(k) = seen.iter().position(|s| !s) {
            let i = ((((8 * k + 1) as f64).sqrt() - 1.0) / 2.0).floor() as usize;
            return Err(Error::Csv {
                line: 0,
                message: format!("missing entry ({i}, {})", k - packed_index(i, 0)),
            });
        }
        Self::from_packed(grid.clone(), values)
    }
}

/// `(Kf)(xᵢ)` by triangular trapezoid quadrature.
pub fn apply(k: &TriangularKernel, f: &SampledFunction) -> Result<SampledFunction> {
    k.apply(f)
}

/// Resolvent kernel `R` of `I + K`: `K + R + K∘R = 0`.
///
/// Each column `t = tⱼ` is a forward substitution of the trapezoid-discretised
/// equation; columns are independent and run in parallel.
pub fn resolvent(k: &TriangularKernel) -> TriangularKernel {
    let grid = k.grid();
    if k.is_identically_zero() {
        return TriangularKernel::zeros(grid);
    }
    let n = grid.len();
    let h = grid.step();
    let columns: Vec<Vec<C64>> = (0..n)
        .into_par_iter()
        .map(|j| {
            let mut r = vec![C64::new(0.0, 0.0); n - j];
            r[0] = -k.get(j, j);
            for i in j + 1..n {
                let row = k.row(i);
                let mut acc = C64::new(0.0, 0.0);
                for kk in j + 1..i {
                    acc += row[kk] * r[kk - j];
                }
                let rhs = -row[j] - 0.5 * h * row[j] * r[0] - h * acc;
                r[i - j] = rhs / (1.0 + 0.5 * h * row[i]);
            }
            r
        })
        .collect();
    TriangularKernel::from_columns(grid, columns)
}

/// The Green-type kernel `M = Jⁿ(I+R)Jᵐ` with its building block
/// `S(τ, t) = ∫_t^τ R(τ, ξ) (ξ−t)^{m−1}/(m−1)! dξ` kept for derivative queries.
#[derive(Debug, Clone)]
pub struct MKernel {
    m: usize,
    n: usize,
    grid: GridRef,
    /// `None` when `R ≡ 0`.
    s: Option<TriangularKernel>,
}

impl MKernel {
    pub fn new(r: &TriangularKernel, m: usize, n: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidSpec("M kernel needs m ≥ 1".into()));
        }
        let grid = r.grid().clone();
        let s = if r.is_identically_zero() {
            None
        } else {
            let x = grid.nodes();
            Some(TriangularKernel::from_index_fn(&grid, |k, j| {
                let row = r.row(k);
                (j..=k)
                    .map(|q| grid.segment_weight(j, k, q) * row[q] * taylor_monomial(x[q] - x[j], m - 1))
                    .sum()
            }))
        };
        Ok(MKernel { m, n, grid, s })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn order(&self) -> usize {
        self.m + self.n
    }

    /// `∫_{tⱼ}^{xₑ} (xₑ−τ)^p/p! S(τ, tⱼ) dτ`.
    fn smoothed(&self, s: &TriangularKernel, e: usize, j: usize, p: usize) -> C64 {
        let x = self.grid.nodes();
        (j..=e)
            .map(|q| self.grid.segment_weight(j, e, q) * taylor_monomial(x[e] - x[q], p) * s.get(q, j))
            .sum()
    }

    pub fn kernel(&self) -> TriangularKernel {
        let big_n = self.order();
        let x = self.grid.nodes();
        let poly = |i: usize, j: usize| C64::new(taylor_monomial(x[i] - x[j], big_n - 1), 0.0);
        match &self.s {
            None => TriangularKernel::from_index_fn(&self.grid, poly),
            Some(s) if self.n == 0 => TriangularKernel::from_index_fn(&self.grid, |i, j| poly(i, j) + s.get(i, j)),
            Some(s) => TriangularKernel::from_index_fn(&self.grid, |i, j| {
                poly(i, j) + self.smoothed(s, i, j, self.n - 1)
            }),
        }
    }

    /// `∂ᵏM/∂xᵏ (xₑ, t)` for `k < n`, from the differentiated closed form.
    pub fn x_derivative(&self, k: usize, e: usize) -> Result<SampledFunction> {
        if k >= self.n {
            return Err(Error::DerivativeOrder { k, n: self.n });
        }
        let big_n = self.order();
        let x = self.grid.nodes();
        let values = (0..self.grid.len())
            .map(|j| {
                if j > e {
                    return C64::new(0.0, 0.0);
                }
                let poly = C64::new(taylor_monomial(x[e] - x[j], big_n - 1 - k), 0.0);
                match &self.s {
                    None => poly,
                    Some(s) => poly + self.smoothed(s, e, j, self.n - 1 - k),
                }
            })
            .collect();
        SampledFunction::new(self.grid.clone(), values)
    }
}

/// Kernel of `Jⁿ(I+R)Jᵐ`.
pub fn m_kernel(r: &TriangularKernel, m: usize, n: usize) -> Result<TriangularKernel> {
    Ok(MKernel::new(r, m, n)?.kernel())
}

/// `∂ᵏM/∂xᵏ` at the node `x_eval` as a function of `t` (zero for `t > x_eval`).
pub fn m_kernel_x_derivative(
    r: &TriangularKernel,
    m: usize,
    n: usize,
    k: usize,
    x_eval: usize,
) -> Result<SampledFunction> {
    if k >= n {
        return Err(Error::DerivativeOrder { k, n });
    }
    MKernel::new(r, m, n)?.x_derivative(k, x_eval)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::{make_grid, Scheme};
    use proptest::prelude::*;

    fn grid(n: usize) -> GridRef {
        make_grid(n, Scheme::UniformTrapezoid).unwrap()
    }

    fn c(v: f64) -> C64 {
        C64::new(v, 0.0)
    }

    fn max_err(k: &TriangularKernel, exact: impl Fn(f64, f64) -> f64) -> f64 {
        let g = k.grid();
        let mut e: f64 = 0.0;
        for i in 0..g.len() {
            for j in 0..=i {
                e = e.max((k.get(i, j) - exact(g.x(i), g.x(j))).norm());
            }
        }
        e
    }

    /// Truncated Neumann series `R = Σ (−K)^{∘p}`, a small-grid cross-check.
    fn neumann_resolvent(k: &TriangularKernel, terms: usize) -> TriangularKernel {
        let neg = k.map(|_, _, v| -v);
        let mut power = neg.clone();
        let mut sum = neg.clone();
        for _ in 1..terms {
            power = power.compose(&neg).unwrap();
            sum = sum.add(&power).unwrap();
        }
        sum
    }

    #[test]
    fn packed_layout() {
        let g = grid(4);
        let k = TriangularKernel::from_index_fn(&g, |i, j| c((10 * i + j) as f64));
        assert_eq!(k.row(2), &[c(20.0), c(21.0), c(22.0)]);
        assert_eq!(k.get(3, 1), c(31.0));
        assert_eq!(k.packed().len(), 10);
        assert!(!k.diagonal_zero());
        assert!(TriangularKernel::zeros(&g).diagonal_zero());
    }

    #[test]
    fn apply_examples() {
        let g = grid(101);
        let one = SampledFunction::constant(&g, c(1.0));
        assert_eq!(apply(&TriangularKernel::zeros(&g), &one).unwrap().max_abs(), 0.0);
        let unit = TriangularKernel::from_fn(&g, |_, _| c(1.0));
        let x = SampledFunction::from_real_fn(&g, |x| x);
        assert!(apply(&unit, &one).unwrap().max_abs_diff(&x).unwrap() < 1e-14);
        let lin = TriangularKernel::from_fn(&g, |x, t| c(x - t));
        let half_sq = SampledFunction::from_real_fn(&g, |x| x * x / 2.0);
        assert!(apply(&lin, &one).unwrap().max_abs_diff(&half_sq).unwrap() < 1e-4);
        let other = SampledFunction::constant(&grid(11), c(1.0));
        assert!(matches!(apply(&unit, &other), Err(Error::GridMismatch)));
    }

    #[test]
    fn resolvent_of_zero() {
        let g = grid(21);
        assert!(resolvent(&TriangularKernel::zeros(&g)).is_identically_zero());
    }

    #[test]
    fn resolvent_closed_forms() {
        let g = grid(201);
        let r = resolvent(&TriangularKernel::from_fn(&g, |x, t| c(x - t)));
        assert!(max_err(&r, |x, t| -(x - t).sin()) < 1e-4);
        assert!(r.diagonal_zero());
        let r1 = resolvent(&TriangularKernel::from_fn(&g, |_, _| c(1.0)));
        assert!(max_err(&r1, |x, t| -(-(x - t)).exp()) < 1e-4);
    }

    #[test]
    fn resolvent_matches_neumann_series() {
        let g = grid(21);
        let k = TriangularKernel::from_fn(&g, |x, t| C64::new(x - t, 0.5 * x * t));
        let direct = resolvent(&k);
        let series = neumann_resolvent(&k, 30);
        // Both discretise the same equation at O(h²); they differ only in the
        // placement of quadrature weights.
        assert!(direct.max_abs_diff(&series).unwrap() < 5e-3);
    }

    #[test]
    fn resolvent_is_an_involution() {
        let g = grid(201);
        let k = TriangularKernel::from_fn(&g, |x, t| C64::new((x * t).cos() - 1.0, x - t));
        let back = resolvent(&resolvent(&k));
        assert!(back.max_abs_diff(&k).unwrap() < 1e-4);
    }

    #[test]
    fn inverse_identity_is_second_order() {
        let err = |n: usize| {
            let g = grid(n);
            let k = TriangularKernel::from_fn(&g, |x, t| c(2.0 * (x - t) + x * t));
            let r = resolvent(&k);
            let f = SampledFunction::from_real_fn(&g, |x| (3.0 * x).sin() + x);
            let back = r.apply_identity_plus(&k.apply_identity_plus(&f).unwrap()).unwrap();
            back.max_abs_diff(&f).unwrap()
        };
        let (e1, e2) = (err(101), err(201));
        let order = (e1 / e2).log2();
        assert!((1.5..=2.5).contains(&order), "order {order}");
    }

    #[test]
    fn m_kernel_without_resolvent() {
        let g = grid(41);
        let zero = TriangularKernel::zeros(&g);
        for (m, n) in [(1, 2), (2, 1)] {
            let mk = m_kernel(&zero, m, n).unwrap();
            assert!(max_err(&mk, |x, t| (x - t).powi(2) / 2.0) < 1e-15);
        }
        let d0 = m_kernel_x_derivative(&zero, 1, 2, 0, g.last()).unwrap();
        let d1 = m_kernel_x_derivative(&zero, 2, 2, 1, g.last()).unwrap();
        for j in 0..g.len() {
            let s = 1.0 - g.x(j);
            assert!((d0.at(j) - s * s / 2.0).norm() < 1e-15);
            assert!((d1.at(j) - s * s / 2.0).norm() < 1e-15);
        }
        assert!(matches!(
            m_kernel_x_derivative(&zero, 2, 1, 1, g.last()),
            Err(Error::DerivativeOrder { k: 1, n: 1 })
        ));
    }

    #[test]
    fn m_kernel_matches_nested_quadrature() {
        // Columns of Jⁿ(I+R)Jᵐ applied to node deltas, built from the
        // generic operators only.
        let g = grid(161);
        let r = TriangularKernel::from_fn(&g, |x, t| c(-(x - t).sin()));
        let (m, n) = (1, 1);
        let mk = m_kernel(&r, m, n).unwrap();
        let exact = |x: f64, t: f64| {
            // J(I+R)J δ_t: J δ_t = H(·−t); (I+R) gives cos(·−t); J gives sin(x−t).
            (x - t).sin()
        };
        assert!(max_err(&mk, exact) < 1e-4);
        let e = g.last();
        let d0 = m_kernel_x_derivative(&r, m, n, 0, e).unwrap();
        for j in 0..g.len() {
            assert!((d0.at(j) - mk.get(e, j)).norm() < 1e-14);
        }
        // Nested quadrature of one column: Jδ_t = H(· − t), then (I+R), then J,
        // every integral restricted to [t, x].
        let j = 40;
        let inner: Vec<C64> = (0..g.len())
            .map(|i| {
                if i < j {
                    return c(0.0);
                }
                c(1.0) + (j..=i).map(|q| g.segment_weight(j, i, q) * r.get(i, q)).sum::<C64>()
            })
            .collect();
        for i in j..g.len() {
            let outer: C64 = (j..=i).map(|q| g.segment_weight(j, i, q) * inner[q]).sum();
            assert!((outer - mk.get(i, j)).norm() < 1e-4);
        }
    }

    #[test]
    fn m_kernel_near_diagonal_asymptotics() {
        let g = grid(201);
        let k = TriangularKernel::from_fn(&g, |x, t| c((x - t) * (1.0 + x)));
        let r = resolvent(&k);
        assert!(r.diagonal_zero());
        let (m, n) = (1, 2);
        let mk = m_kernel(&r, m, n).unwrap();
        let mut worst: f64 = 0.0;
        for i in 0..g.len() {
            for j in 0..i {
                let s = g.x(i) - g.x(j);
                if s <= 0.1 {
                    let dev = (mk.get(i, j) - s * s / 2.0).norm();
                    worst = worst.max(dev / s.powi(4));
                }
            }
        }
        assert!(worst < 1.0, "fitted constant {worst}");
    }

    #[test]
    fn csv_round_trip() {
        let g = grid(7);
        let k = TriangularKernel::from_fn(&g, |x, t| C64::new(x - t, x * t / 3.0));
        let mut buf = Vec::new();
        k.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("i,j,x,t,re,im\n0,0,"));
        let back = TriangularKernel::read_csv(&g, buf.as_slice()).unwrap();
        assert_eq!(back, k);
        let truncated: String = text.lines().take(10).map(|l| format!("{l}\n")).collect();
        assert!(matches!(
            TriangularKernel::read_csv(&g, truncated.as_bytes()),
            Err(Error::Csv { .. })
        ));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn resolvent_keeps_zero_diagonal(a in -2.0..2.0f64, b in -2.0..2.0f64, c0 in -1.0..1.0f64) {
            let g = grid(31);
            let k = TriangularKernel::from_fn(&g, |x, t| C64::new(a * (x - t), b * (x * x - t * t) + c0 * (x - t) * t));
            prop_assert!(k.diagonal_zero());
            prop_assert!(resolvent(&k).diagonal_zero());
        }
    }
}
