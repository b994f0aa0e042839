//! Uniform grids on `[0, 1]`, sampled functions and the iterated integration
//! operators `Jᵏ`.
//!
//! All integrals over a sub-interval `[0, xᵢ]` (or `[tⱼ, xᵢ]`) use the trapezoid
//! rule on the nodes that fall inside it, whatever the outer scheme of the grid
//! is. The outer weights only enter `∫₀¹` pairings such as [`inner_product`].

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::{taylor_monomial, Error, Result, C64};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    UniformTrapezoid,
    CompositeSimpson,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    panel_count: usize,
    scheme: Scheme,
}

pub type GridRef = Arc<Grid>;

/// Builds a uniform grid with the standard weights of `scheme`.
pub fn make_grid(point_count: usize, scheme: Scheme) -> Result<GridRef> {
    Grid::new(point_count, scheme).map(Arc::new)
}

impl Grid {
    pub fn new(point_count: usize, scheme: Scheme) -> Result<Grid> {
        if point_count < 3 {
            return Err(Error::TooFewPoints(point_count));
        }
        if scheme == Scheme::CompositeSimpson && point_count % 2 == 0 {
            return Err(Error::SimpsonParity(point_count));
        }
        let panels = point_count - 1;
        let h = 1.0 / panels as f64;
        let nodes = (0..point_count)
            .map(|i| i as f64 / panels as f64)
            .collect();
        let weights = match scheme {
            Scheme::UniformTrapezoid => (0..point_count)
                .map(|i| if i == 0 || i == panels { h / 2.0 } else { h })
                .collect(),
            Scheme::CompositeSimpson => (0..point_count)
                .map(|i| {
                    if i == 0 || i == panels {
                        h / 3.0
                    } else if i % 2 == 1 {
                        4.0 * h / 3.0
                    } else {
                        2.0 * h / 3.0
                    }
                })
                .collect(),
        };
        Ok(Grid {
            nodes,
            weights,
            panel_count: panels,
            scheme,
        })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn panel_count(&self) -> usize {
        self.panel_count
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn step(&self) -> f64 {
        1.0 / self.panel_count as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        self.nodes[i]
    }

    pub fn last(&self) -> usize {
        self.nodes.len() - 1
    }

    /// Trapezoid weight of node `j` in the rule for `∫` over `[x_lo, x_hi]`.
    #[inline]
    pub fn segment_weight(&self, lo: usize, hi: usize, j: usize) -> f64 {
        debug_assert!(lo <= j && j <= hi);
        if lo == hi {
            0.0
        } else if j == lo || j == hi {
            0.5 * self.step()
        } else {
            self.step()
        }
    }

    /// Trapezoid weights over the whole interval, the rule every `∫₀¹` pairing of
    /// the operator pipeline uses.
    pub fn trapezoid_weights(&self) -> Vec<f64> {
        let hi = self.last();
        (0..self.len()).map(|j| self.segment_weight(0, hi, j)).collect()
    }
}

/// Values of a function at every node of a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledFunction {
    grid: GridRef,
    values: Vec<C64>,
}

pub(crate) fn same_grid(a: &GridRef, b: &GridRef) -> bool {
    Arc::ptr_eq(a, b) || **a == **b
}

impl SampledFunction {
    pub fn new(grid: GridRef, values: Vec<C64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::LengthMismatch {
                expected: grid.len(),
                actual: values.len(),
            });
        }
        Ok(SampledFunction { grid, values })
    }

    pub fn from_fn(grid: &GridRef, f: impl Fn(f64) -> C64) -> Self {
        let values = grid.nodes().iter().map(|&x| f(x)).collect();
        SampledFunction {
            grid: grid.clone(),
            values,
        }
    }

    pub fn from_real_fn(grid: &GridRef, f: impl Fn(f64) -> f64) -> Self {
        Self::from_fn(grid, |x| C64::new(f(x), 0.0))
    }

    pub fn constant(grid: &GridRef, c: C64) -> Self {
        Self::from_fn(grid, |_| c)
    }

    pub fn zeros(grid: &GridRef) -> Self {
        Self::constant(grid, C64::new(0.0, 0.0))
    }

    pub fn grid(&self) -> &GridRef {
        &self.grid
    }

    pub fn values(&self) -> &[C64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [C64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<C64> {
        self.values
    }

    pub fn at(&self, i: usize) -> C64 {
        self.values[i]
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn first(&self) -> C64 {
        self.values[0]
    }

    pub fn last(&self) -> C64 {
        self.values[self.values.len() - 1]
    }

    pub fn check_grid(&self, other: &SampledFunction) -> Result<()> {
        if same_grid(&self.grid, &other.grid) {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    pub fn map(&self, f: impl Fn(f64, C64) -> C64) -> Self {
        let values = self
            .grid
            .nodes()
            .iter()
            .zip(&self.values)
            .map(|(&x, &v)| f(x, v))
            .collect();
        SampledFunction {
            grid: self.grid.clone(),
            values,
        }
    }

    pub fn zip_with(
        &self,
        other: &SampledFunction,
        f: impl Fn(C64, C64) -> C64,
    ) -> Result<Self> {
        self.check_grid(other)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| f(a, b))
            .collect();
        Ok(SampledFunction {
            grid: self.grid.clone(),
            values,
        })
    }

    pub fn scale(&self, c: C64) -> Self {
        self.map(|_, v| c * v)
    }

    pub fn add(&self, other: &SampledFunction) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &SampledFunction) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn mul(&self, other: &SampledFunction) -> Result<Self> {
        self.zip_with(other, |a, b| a * b)
    }

    /// `self += c * other`
    pub fn axpy(&mut self, c: C64, other: &SampledFunction) -> Result<()> {
        self.check_grid(other)?;
        for (a, &b) in self.values.iter_mut().zip(&other.values) {
            *a += c * b;
        }
        Ok(())
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.norm()))
    }

    pub fn max_abs_diff(&self, other: &SampledFunction) -> Result<f64> {
        self.check_grid(other)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (a, b)| m.max((a - b).norm())))
    }

    /// Quadrature L₂(0,1) norm with the grid's own weights.
    pub fn l2_norm(&self) -> f64 {
        self.grid
            .weights()
            .iter()
            .zip(&self.values)
            .map(|(w, v)| w * v.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.re.is_finite() && v.im.is_finite())
    }
}

/// `Jᵏf(xᵢ) = ∫₀^{xᵢ} (xᵢ−t)^{k−1}/(k−1)! f(t) dt`, evaluated through the single
/// kernel form with trapezoid weights on `[0, xᵢ]`.
pub fn iterated_integral(f: &SampledFunction, k: usize) -> Result<SampledFunction> {
    if k == 0 {
        return Err(Error::ZeroIntegralOrder);
    }
    let grid = f.grid();
    let x = grid.nodes();
    let values = (0..grid.len())
        .map(|i| {
            (0..=i)
                .map(|j| grid.segment_weight(0, i, j) * taylor_monomial(x[i] - x[j], k - 1) * f.at(j))
                .sum()
        })
        .collect();
    SampledFunction::new(grid.clone(), values)
}

/// `Jᵏf` for `k ≥ 0`, with `J⁰` the identity.
pub(crate) fn integrate_times(f: &SampledFunction, k: usize) -> SampledFunction {
    if k == 0 {
        f.clone()
    } else {
        iterated_integral(f, k).expect("k >= 1")
    }
}

/// Quadrature pairing `Σ wᵢ f(xᵢ) conj(g(xᵢ))` with the grid's own weights.
pub fn inner_product(f: &SampledFunction, g: &SampledFunction) -> Result<C64> {
    f.check_grid(g)?;
    Ok(f.grid()
        .weights()
        .iter()
        .zip(f.values().iter().zip(g.values()))
        .map(|(&w, (a, b))| w * a * b.conj())
        .sum())
}

/// Bilinear `∫₀¹ f g` with the trapezoid rule, the pairing used by the
/// finite-rank part of the inverse operator.
pub(crate) fn trapezoid_pairing(f: &[C64], g: &[C64], grid: &Grid) -> C64 {
    let hi = grid.last();
    (0..grid.len())
        .map(|j| grid.segment_weight(0, hi, j) * f[j] * g[j])
        .sum()
}

/// Quasi-derivatives `y^⟨0⟩, …, y^⟨N−1⟩` of one function.
#[derive(Debug, Clone, PartialEq)]
pub struct QuasiDerivativeFrame {
    entries: Vec<SampledFunction>,
}

impl QuasiDerivativeFrame {
    pub fn new(entries: Vec<SampledFunction>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::DimensionMismatch("empty quasi-derivative frame".into()));
        }
        for e in &entries[1..] {
            entries[0].check_grid(e)?;
        }
        Ok(QuasiDerivativeFrame { entries })
    }

    pub fn order(&self) -> usize {
        self.entries.len()
    }

    pub fn entries(&self) -> &[SampledFunction] {
        &self.entries
    }

    pub fn entry(&self, j: usize) -> &SampledFunction {
        &self.entries[j]
    }

    /// The frame evaluated at node `i`.
    pub fn at(&self, i: usize) -> Vec<C64> {
        self.entries.iter().map(|e| e.at(i)).collect()
    }

    pub fn at_start(&self) -> Vec<C64> {
        self.at(0)
    }

    pub fn at_end(&self) -> Vec<C64> {
        self.at(self.entries[0].len() - 1)
    }
}
