//! Coefficients of singular expressions, entered through their regular
//! antiderivatives.
//!
//! A distributional coefficient `p_k` never appears directly. The even builder
//! takes `P_k` (a `k`-th antiderivative of `p_k`) and `Q_k`, the odd builder the
//! analogous family together with `q₀` and `q₀′`. Antiderivatives are used as
//! given; the assembled kernel does not depend on the integration constants.

mod expr;

use std::fmt;
use std::str::FromStr;

pub use expr::Expr;

use crate::quadrature::{same_grid, GridRef, SampledFunction};
use crate::{Error, Result, C64};

/// A scalar function on `[0, 1]`: a closed-form expression or samples on a grid.
#[derive(Debug, Clone, PartialEq)]
pub enum FunctionDescriptor {
    Closed(Expr),
    /// Samples on their own grid. With `resample` set, evaluation on another grid
    /// interpolates linearly; otherwise a different grid is an error.
    Sampled {
        samples: SampledFunction,
        resample: bool,
    },
}

impl FunctionDescriptor {
    pub fn parse(source: &str) -> Result<Self> {
        Expr::parse(source).map(FunctionDescriptor::Closed)
    }

    pub fn constant(c: C64) -> Self {
        FunctionDescriptor::Closed(Expr::constant(c))
    }

    pub fn zero() -> Self {
        Self::constant(C64::new(0.0, 0.0))
    }

    pub fn sampled(samples: SampledFunction) -> Self {
        FunctionDescriptor::Sampled {
            samples,
            resample: false,
        }
    }

    pub fn sampled_resampling(samples: SampledFunction) -> Self {
        FunctionDescriptor::Sampled {
            samples,
            resample: true,
        }
    }

    pub fn expr(&self) -> Option<&Expr> {
        match self {
            FunctionDescriptor::Closed(e) => Some(e),
            FunctionDescriptor::Sampled { .. } => None,
        }
    }

    pub fn is_closed_form(&self) -> bool {
        matches!(self, FunctionDescriptor::Closed(_))
    }

    /// Closed form that folds to the constant 0.
    pub fn is_structurally_zero(&self) -> bool {
        self.expr().is_some_and(Expr::is_zero)
    }

    /// Closed form with no moving step. Samples are never certified continuous.
    pub fn is_structurally_continuous(&self) -> bool {
        self.expr().is_some_and(Expr::is_continuous)
    }

    /// Value at an arbitrary point of `[0, 1]`. Samples are interpolated linearly.
    pub fn eval_at(&self, x: f64) -> Result<C64> {
        match self {
            FunctionDescriptor::Closed(e) => e.eval(x),
            FunctionDescriptor::Sampled { samples, .. } => Ok(interpolate(samples, x)),
        }
    }

    /// Symbolic derivative of a closed form.
    pub fn derivative(&self) -> Result<FunctionDescriptor> {
        match self {
            FunctionDescriptor::Closed(e) => e.derivative().map(FunctionDescriptor::Closed),
            FunctionDescriptor::Sampled { .. } => Err(Error::NotDifferentiable(
                "sampled function".to_string(),
            )),
        }
    }

    pub fn nth_derivative(&self, k: usize) -> Result<FunctionDescriptor> {
        (0..k).try_fold(self.clone(), |d, _| d.derivative())
    }
}

impl FromStr for FunctionDescriptor {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::parse(s)
    }
}

impl fmt::Display for FunctionDescriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FunctionDescriptor::Closed(e) => write!(f, "{e}"),
            FunctionDescriptor::Sampled { samples, .. } => {
                write!(f, "<sampled on {} nodes>", samples.len())
            }
        }
    }
}

fn interpolate(samples: &SampledFunction, x: f64) -> C64 {
    let grid = samples.grid();
    let last = grid.last();
    let pos = (x.clamp(0.0, 1.0) * grid.panel_count() as f64).max(0.0);
    let k = (pos.floor() as usize).min(last - 1);
    let s = pos - k as f64;
    samples.at(k) * (1.0 - s) + samples.at(k + 1) * s
}

/// Pointwise evaluation on the nodes of `grid`.
pub fn evaluate(descriptor: &FunctionDescriptor, grid: &GridRef) -> Result<SampledFunction> {
    match descriptor {
        FunctionDescriptor::Closed(e) => {
            let values = grid
                .nodes()
                .iter()
                .map(|&x| e.eval(x))
                .collect::<Result<Vec<_>>>()?;
            SampledFunction::new(grid.clone(), values)
        }
        FunctionDescriptor::Sampled { samples, resample } => {
            if same_grid(samples.grid(), grid) {
                Ok(samples.clone())
            } else if *resample {
                Ok(SampledFunction::from_fn(grid, |x| interpolate(samples, x)))
            } else {
                Err(Error::GridMismatch)
            }
        }
    }
}

/// Even order `N = 2n`: `P = (P₁, …, Pₙ)`, `Q = (Q₀, …, Q_{n−1})`, `b² = p₀`.
#[derive(Debug, Clone, PartialEq)]
pub struct EvenCoefficientSpec {
    pub n: usize,
    pub weight_b: FunctionDescriptor,
    pub p: Vec<FunctionDescriptor>,
    pub q: Vec<FunctionDescriptor>,
}

/// Odd order `N = 2n+1`: `P = (P₀, …, Pₙ)`, `Q = (Q₁, …, Qₙ)`; `Q₀ = q₀′`.
#[derive(Debug, Clone, PartialEq)]
pub struct OddCoefficientSpec {
    pub n: usize,
    pub q0: FunctionDescriptor,
    pub q0_prime: FunctionDescriptor,
    pub p: Vec<FunctionDescriptor>,
    pub q: Vec<FunctionDescriptor>,
}

/// `y⁽ᴺ⁾ + p_{N−2} y⁽ᴺ⁻²⁾ + … + p₀ y`, with `p = (p₀, …, p_{N−2})`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolynomialCoefficientSpec {
    pub order: usize,
    pub p: Vec<FunctionDescriptor>,
}

impl EvenCoefficientSpec {
    pub fn new(
        n: usize,
        weight_b: FunctionDescriptor,
        p: Vec<FunctionDescriptor>,
        q: Vec<FunctionDescriptor>,
    ) -> Result<Self> {
        let spec = EvenCoefficientSpec { n, weight_b, p, q };
        spec.check_shape()?;
        Ok(spec)
    }

    /// Unit weight and all antiderivatives zero except the supplied `P_k`.
    pub fn with_p(n: usize, p: Vec<FunctionDescriptor>) -> Result<Self> {
        Self::new(
            n,
            FunctionDescriptor::constant(C64::new(1.0, 0.0)),
            p,
            vec![FunctionDescriptor::zero(); n],
        )
    }

    pub fn order(&self) -> usize {
        2 * self.n
    }

    pub fn check_shape(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidSpec("even order needs n ≥ 1".into()));
        }
        if self.p.len() != self.n || self.q.len() != self.n {
            return Err(Error::InvalidSpec(format!(
                "even spec with n = {} needs {} P and {} Q entries, got {} and {}",
                self.n,
                self.n,
                self.n,
                self.p.len(),
                self.q.len()
            )));
        }
        Ok(())
    }

    /// `P_k` for `k = 1..=n`.
    pub fn big_p(&self, k: usize) -> &FunctionDescriptor {
        &self.p[k - 1]
    }

    /// `Q_k` for `k = 0..n`.
    pub fn big_q(&self, k: usize) -> &FunctionDescriptor {
        &self.q[k]
    }
}

impl OddCoefficientSpec {
    pub fn new(
        n: usize,
        q0: FunctionDescriptor,
        q0_prime: FunctionDescriptor,
        p: Vec<FunctionDescriptor>,
        q: Vec<FunctionDescriptor>,
    ) -> Result<Self> {
        let spec = OddCoefficientSpec {
            n,
            q0,
            q0_prime,
            p,
            q,
        };
        spec.check_shape()?;
        Ok(spec)
    }

    /// Derives `q₀′` symbolically from a closed-form `q₀`.
    pub fn with_derived_q0_prime(
        n: usize,
        q0: FunctionDescriptor,
        p: Vec<FunctionDescriptor>,
        q: Vec<FunctionDescriptor>,
    ) -> Result<Self> {
        let q0_prime = q0.derivative()?;
        Self::new(n, q0, q0_prime, p, q)
    }

    pub fn order(&self) -> usize {
        2 * self.n + 1
    }

    pub fn check_shape(&self) -> Result<()> {
        if self.p.len() != self.n + 1 || self.q.len() != self.n {
            return Err(Error::InvalidSpec(format!(
                "odd spec with n = {} needs {} P and {} Q entries, got {} and {}",
                self.n,
                self.n + 1,
                self.n,
                self.p.len(),
                self.q.len()
            )));
        }
        Ok(())
    }

    /// `P_k` for `k = 0..=n`.
    pub fn big_p(&self, k: usize) -> &FunctionDescriptor {
        &self.p[k]
    }

    /// `Q_k` for `k = 0..=n`, with `Q₀ = q₀′`.
    pub fn big_q(&self, k: usize) -> &FunctionDescriptor {
        if k == 0 {
            &self.q0_prime
        } else {
            &self.q[k - 1]
        }
    }
}

impl PolynomialCoefficientSpec {
    pub fn new(order: usize, p: Vec<FunctionDescriptor>) -> Result<Self> {
        let spec = PolynomialCoefficientSpec { order, p };
        spec.check_shape()?;
        Ok(spec)
    }

    pub fn check_shape(&self) -> Result<()> {
        if self.order < 3 {
            return Err(Error::InvalidSpec(format!(
                "polynomial form needs N ≥ 3, got {}",
                self.order
            )));
        }
        if self.p.len() != self.order - 1 {
            return Err(Error::InvalidSpec(format!(
                "polynomial spec of order {} needs {} coefficients, got {}",
                self.order,
                self.order - 1,
                self.p.len()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum CoefficientSpec {
    Even(EvenCoefficientSpec),
    Odd(OddCoefficientSpec),
    Polynomial(PolynomialCoefficientSpec),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Severity {
    Info,
    Warning,
    Error,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostic {
    pub severity: Severity,
    pub message: String,
}

/// Structural and numerical facts about a coefficient spec on a grid.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SpecDiagnostics {
    /// Odd case only.
    pub min_abs_q0: Option<f64>,
    /// Even case only: range of `|b²|`.
    pub b_squared_range: Option<(f64, f64)>,
    pub multiplier_is_identity: bool,
    /// Every antiderivative is a closed form without moving steps.
    pub continuous: bool,
    /// The diagonal of the assembled kernel is guaranteed to vanish.
    pub diagonal_vanishing: bool,
    pub messages: Vec<Diagnostic>,
}

impl SpecDiagnostics {
    pub fn has_errors(&self) -> bool {
        self.messages.iter().any(|d| d.severity == Severity::Error)
    }

    fn push(&mut self, severity: Severity, message: impl Into<String>) {
        self.messages.push(Diagnostic {
            severity,
            message: message.into(),
        });
    }
}

const IDENTITY_TOL: f64 = 1e-12;

fn all_close(f: &SampledFunction, target: C64, tol: f64) -> bool {
    f.values().iter().all(|v| (v - target).norm() <= tol)
}

/// Reports conditions on the coefficients; never fails.
pub fn validate_spec(spec: &CoefficientSpec, grid: &GridRef) -> SpecDiagnostics {
    let mut d = SpecDiagnostics::default();
    let shape = match spec {
        CoefficientSpec::Even(s) => s.check_shape(),
        CoefficientSpec::Odd(s) => s.check_shape(),
        CoefficientSpec::Polynomial(s) => s.check_shape(),
    };
    if let Err(e) = shape {
        d.push(Severity::Error, e.to_string());
        return d;
    }
    let sample = |fd: &FunctionDescriptor, name: &str, d: &mut SpecDiagnostics| match evaluate(fd, grid) {
        Ok(s) => Some(s),
        Err(e) => {
            d.push(Severity::Error, format!("{name}: {e}"));
            None
        }
    };
    match spec {
        CoefficientSpec::Even(s) => {
            if let Some(b) = sample(&s.weight_b, "b", &mut d) {
                let b2 = b.map(|_, v| v * v);
                let (lo, hi) = b2
                    .values()
                    .iter()
                    .fold((f64::INFINITY, 0.0f64), |(lo, hi), v| (lo.min(v.norm()), hi.max(v.norm())));
                d.b_squared_range = Some((lo, hi));
                d.multiplier_is_identity = all_close(&b2, C64::new(1.0, 0.0), IDENTITY_TOL);
                if lo <= IDENTITY_TOL {
                    d.push(Severity::Error, "b² vanishes on the grid");
                }
            }
            let all: Vec<_> = s.p.iter().chain(&s.q).collect();
            for (k, fd) in all.iter().enumerate() {
                let _ = sample(fd, &format!("antiderivative #{k}"), &mut d);
            }
            d.continuous = all.iter().all(|f| f.is_structurally_continuous());
            d.diagonal_vanishing = d.continuous && s.big_q(0).is_structurally_zero();
        }
        CoefficientSpec::Odd(s) => {
            if let Some(q0) = sample(&s.q0, "q0", &mut d) {
                let min = q0.values().iter().fold(f64::INFINITY, |m, v| m.min(v.norm()));
                d.min_abs_q0 = Some(min);
                if min <= IDENTITY_TOL {
                    d.push(Severity::Error, format!("q0 vanishes (min |q0| = {min:e})"));
                }
                let beta = q0.scale(C64::new(0.0, 2.0));
                d.multiplier_is_identity = all_close(&beta, C64::new(1.0, 0.0), IDENTITY_TOL);
            }
            let _ = sample(&s.q0_prime, "q0'", &mut d);
            let mut family: Vec<&FunctionDescriptor> = s.p.iter().chain(&s.q).collect();
            family.push(&s.q0_prime);
            d.continuous = family.iter().all(|f| f.is_structurally_continuous())
                && s.q0.is_structurally_continuous();
            let p0 = sample(s.big_p(0), "P0", &mut d);
            let q0p = evaluate(&s.q0_prime, grid).ok();
            let p0_matches = match (p0, q0p) {
                (Some(p0), Some(q0p)) => p0
                    .values()
                    .iter()
                    .zip(q0p.values())
                    .all(|(a, b)| (a - C64::new(0.0, 1.0) * b).norm() <= IDENTITY_TOL),
                _ => false,
            };
            for (k, fd) in s.p.iter().enumerate().skip(1).chain(s.q.iter().enumerate()) {
                let _ = sample(fd, &format!("antiderivative #{k}"), &mut d);
            }
            d.diagonal_vanishing = d.continuous && p0_matches;
        }
        CoefficientSpec::Polynomial(s) => {
            for (j, fd) in s.p.iter().enumerate() {
                let _ = sample(fd, &format!("p{j}"), &mut d);
            }
            d.multiplier_is_identity = true;
            d.continuous = true;
            d.diagonal_vanishing = true;
        }
    }
    if !d.multiplier_is_identity {
        d.push(
            Severity::Warning,
            "multiplier is not identically 1; the form is not eligible for the spectral pipeline",
        );
    }
    if d.diagonal_vanishing {
        d.push(Severity::Info, "diagonal-vanishing kernel guaranteed");
    }
    d
}
