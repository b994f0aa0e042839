//! Operator forms `ℓy = dᵐ/dxᵐ (B y⁽ⁿ⁾ + C y)` with `B = β·I + K` and
//! `Cy = Σ_ν y⁽ᵛ⁾(0) u_ν`, assembled from antiderivative coefficient data.
//!
//! Kernel entries containing `∫_t^x (x−τ)^a/a! p(τ) (τ−t)^b/b! dτ` are computed
//! with a four-point Gauss–Legendre rule on every grid panel, evaluating the
//! descriptor off-grid. The rule is exact for polynomial `p` of degree up to 7,
//! so the kernel is insensitive to the polynomial ambiguity of antiderivatives
//! up to rounding. The rank part uses [`iterated_integral`].
//!
//! [`iterated_integral`]: crate::quadrature::iterated_integral

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coefficients::{
    evaluate, EvenCoefficientSpec, Expr, FunctionDescriptor, OddCoefficientSpec,
    PolynomialCoefficientSpec,
};
use crate::quadrature::{integrate_times, GridRef, SampledFunction};
use crate::volterra::TriangularKernel;
use crate::{binomial, taylor_monomial, Error, Result, C64};

const IDENTITY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Even,
    Odd,
    Polynomial,
    Raw,
}

/// Which of the spectral-pipeline hypotheses a form satisfies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Eligibility {
    pub multiplier_identity: bool,
    pub kernel_continuous: bool,
    pub diagonal_zero: bool,
}

impl Eligibility {
    pub fn is_eligible(&self) -> bool {
        self.multiplier_identity && self.kernel_continuous && self.diagonal_zero
    }
}

#[derive(Debug, Clone)]
pub struct OperatorForm {
    m: usize,
    n: usize,
    multiplier: SampledFunction,
    kernel: TriangularKernel,
    rank_part: Vec<SampledFunction>,
    provenance: Provenance,
    kernel_continuous: bool,
}

impl OperatorForm {
    pub fn new(
        m: usize,
        n: usize,
        multiplier: SampledFunction,
        kernel: TriangularKernel,
        rank_part: Vec<SampledFunction>,
        provenance: Provenance,
        kernel_continuous: bool,
    ) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidSpec("operator form needs m ≥ 1".into()));
        }
        if rank_part.len() != n {
            return Err(Error::InvalidSpec(format!(
                "n = {n} needs {n} rank functions, got {}",
                rank_part.len()
            )));
        }
        kernel.check_grid(multiplier.grid())?;
        for u in &rank_part {
            kernel.check_grid(u.grid())?;
        }
        Ok(OperatorForm {
            m,
            n,
            multiplier,
            kernel,
            rank_part,
            provenance,
            kernel_continuous,
        })
    }

    /// A form given directly by its kernel and rank functions, with `β ≡ 1`.
    /// The kernel is assumed continuous.
    pub fn raw(
        m: usize,
        n: usize,
        kernel: TriangularKernel,
        rank_part: Vec<SampledFunction>,
    ) -> Result<Self> {
        let one = SampledFunction::constant(kernel.grid(), C64::new(1.0, 0.0));
        Self::new(m, n, one, kernel, rank_part, Provenance::Raw, true)
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

    pub fn grid(&self) -> &GridRef {
        self.kernel.grid()
    }

    pub fn multiplier(&self) -> &SampledFunction {
        &self.multiplier
    }

    pub fn kernel(&self) -> &TriangularKernel {
        &self.kernel
    }

    pub fn rank_part(&self) -> &[SampledFunction] {
        &self.rank_part
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn multiplier_is_identity(&self) -> bool {
        self.multiplier
            .values()
            .iter()
            .all(|v| (v - 1.0).norm() <= IDENTITY_TOL)
    }

    pub fn eligibility(&self) -> Eligibility {
        Eligibility {
            multiplier_identity: self.multiplier_is_identity(),
            kernel_continuous: self.kernel_continuous,
            diagonal_zero: self.kernel.diagonal_zero(),
        }
    }

    /// Fails unless `β ≡ 1`, the hard requirement of the boundary-value pipeline.
    pub fn require_unit_multiplier(&self) -> Result<()> {
        if self.multiplier_is_identity() {
            Ok(())
        } else {
            Err(Error::IneligibleForm(
                "multiplier is not identically 1".into(),
            ))
        }
    }

    /// `B y⁽ⁿ⁾ + C y` for a sampled `y⁽ⁿ⁾` and initial values `y⁽ᵛ⁾(0)`, `ν < n`.
    pub fn inner_expression(&self, yn: &SampledFunction, initial: &[C64]) -> Result<SampledFunction> {
        if initial.len() != self.n {
            return Err(Error::LengthMismatch {
                expected: self.n,
                actual: initial.len(),
            });
        }
        let mut f = self.multiplier.mul(yn)?.add(&self.kernel.apply(yn)?)?;
        for (u, &c) in self.rank_part.iter().zip(initial) {
            f.axpy(c, u)?;
        }
        Ok(f)
    }
}

const GL_NODES: [f64; 4] = [
    -0.861_136_311_594_052_6,
    -0.339_981_043_584_856_3,
    0.339_981_043_584_856_3,
    0.861_136_311_594_052_6,
];
const GL_WEIGHTS: [f64; 4] = [
    0.347_854_845_137_453_8,
    0.652_145_154_862_546_2,
    0.652_145_154_862_546_2,
    0.347_854_845_137_453_8,
];

/// Descriptor values at the Gauss points of every panel.
struct PanelSamples(Vec<[C64; 4]>);

impl PanelSamples {
    fn new(fd: &FunctionDescriptor, grid: &GridRef) -> Result<Self> {
        // Surfaces grid mismatches of sampled descriptors.
        evaluate(fd, grid)?;
        let h = grid.step();
        let panels = (0..grid.panel_count())
            .map(|p| {
                let mut v = [C64::new(0.0, 0.0); 4];
                for (q, slot) in v.iter_mut().enumerate() {
                    *slot = fd.eval_at(grid.x(p) + 0.5 * h * (1.0 + GL_NODES[q]))?;
                }
                Ok(v)
            })
            .collect::<Result<_>>()?;
        Ok(PanelSamples(panels))
    }
}

/// `coef · ∫_t^x (x−τ)^a/a! p(τ) (τ−t)^b/b! dτ` with `p` the `source`-th sampler.
#[derive(Debug, Clone, Copy)]
struct ConvTerm {
    source: usize,
    coef: C64,
    a: usize,
    b: usize,
}

/// Collects convolution terms over a set of descriptors, skipping zero ones.
struct KernelTerms<'a> {
    grid: &'a GridRef,
    descriptors: Vec<&'a FunctionDescriptor>,
    terms: Vec<ConvTerm>,
}

impl<'a> KernelTerms<'a> {
    fn new(grid: &'a GridRef) -> Self {
        KernelTerms {
            grid,
            descriptors: Vec::new(),
            terms: Vec::new(),
        }
    }

    fn push(&mut self, fd: &'a FunctionDescriptor, coef: C64, a: usize, b: usize) {
        if coef == C64::new(0.0, 0.0) || fd.is_structurally_zero() {
            return;
        }
        let source = match self.descriptors.iter().position(|d| std::ptr::eq(*d, fd)) {
            Some(s) => s,
            None => {
                self.descriptors.push(fd);
                self.descriptors.len() - 1
            }
        };
        self.terms.push(ConvTerm { source, coef, a, b });
    }

    /// Kernel = `pointwise(i, j)` plus all convolution terms, column by column.
    fn assemble(
        self,
        pointwise: impl Fn(usize, usize) -> C64 + Sync,
    ) -> Result<TriangularKernel> {
        let grid = self.grid;
        let samples = self
            .descriptors
            .iter()
            .map(|fd| PanelSamples::new(fd, grid))
            .collect::<Result<Vec<_>>>()?;
        let mut rmax = vec![0usize; samples.len()];
        for t in &self.terms {
            rmax[t.source] = rmax[t.source].max(t.a + t.b);
        }
        let n = grid.len();
        let h = grid.step();
        let x = grid.nodes();
        let terms = &self.terms;
        let columns: Vec<Vec<C64>> = (0..n)
            .into_par_iter()
            .map(|j| {
                let mut moments: Vec<Vec<C64>> =
                    rmax.iter().map(|&r| vec![C64::new(0.0, 0.0); r + 1]).collect();
                let mut col = Vec::with_capacity(n - j);
                col.push(pointwise(j, j));
                for i in j + 1..n {
                    let p = i - 1;
                    for (s, sample) in samples.iter().enumerate() {
                        for q in 0..4 {
                            let d = x[p] + 0.5 * h * (1.0 + GL_NODES[q]) - x[j];
                            let fw = sample.0[p][q] * (0.5 * h * GL_WEIGHTS[q]);
                            let mut mono = 1.0;
                            for (r, mom) in moments[s].iter_mut().enumerate() {
                                *mom += fw * mono;
                                mono *= d / (r + 1) as f64;
                            }
                        }
                    }
                    let s = x[i] - x[j];
                    let mut v = pointwise(i, j);
                    for t in terms {
                        let mom = &moments[t.source];
                        let mut acc = C64::new(0.0, 0.0);
                        for c in 0..=t.a {
                            let sign = if c % 2 == 0 { 1.0 } else { -1.0 };
                            acc += mom[t.b + c]
                                * (sign
                                    * binomial((t.b + c) as i64, c as i64)
                                    * taylor_monomial(s, t.a - c));
                        }
                        v += t.coef * acc;
                    }
                    col.push(v);
                }
                col
            })
            .collect();
        TriangularKernel::try_from_index_fn(grid, |i, j| Ok(columns[j][i - j]))
    }
}

fn sign(k: usize) -> f64 {
    if k % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

const I: C64 = C64 { re: 0.0, im: 1.0 };

fn real(v: f64) -> C64 {
    C64::new(v, 0.0)
}

/// `Σ coef · J^q (xᵖ/p! · f)` accumulated into `acc`.
fn add_integrated_monomial(
    acc: &mut SampledFunction,
    coef: C64,
    q: usize,
    p: usize,
    f: &SampledFunction,
) -> Result<()> {
    if coef == C64::new(0.0, 0.0) {
        return Ok(());
    }
    let g = f.map(|x, v| v * taylor_monomial(x, p));
    acc.axpy(coef, &integrate_times(&g, q))
}

fn all_continuous<'a>(fds: impl IntoIterator<Item = &'a FunctionDescriptor>) -> bool {
    fds.into_iter().all(FunctionDescriptor::is_structurally_continuous)
}

/// Even order `2n`: `m = n`, `β = b²`.
pub fn build_even(spec: &EvenCoefficientSpec, grid: &GridRef) -> Result<OperatorForm> {
    spec.check_shape()?;
    let n = spec.n;
    let b = evaluate(&spec.weight_b, grid)?;
    let multiplier = b.mul(&b)?;
    let p: Vec<SampledFunction> = spec.p.iter().map(|f| evaluate(f, grid)).collect::<Result<_>>()?;
    let q: Vec<SampledFunction> = spec.q.iter().map(|f| evaluate(f, grid)).collect::<Result<_>>()?;
    let big_p = |k: usize| &p[k - 1];
    let big_q = |k: usize| &q[k];

    let mut terms = KernelTerms::new(grid);
    for k in 1..=n {
        for nu in 1..k {
            let s = sign(nu);
            terms.push(spec.big_p(k), real(s * binomial(k as i64, nu as i64)), nu - 1, k - 1 - nu);
            let cq = binomial(k as i64 - 1, nu as i64) - binomial(k as i64 - 1, nu as i64 - 1);
            terms.push(spec.big_q(k - 1), I * (s * cq), nu - 1, k - 1 - nu);
        }
    }
    let x = grid.nodes();
    let kernel = terms.assemble(|i, j| {
        (1..=n)
            .map(|k| {
                let bx = big_p(k).at(i) + I * big_q(k - 1).at(i);
                let bt = big_p(k).at(j) - I * big_q(k - 1).at(j);
                (bx + sign(k) * bt) * taylor_monomial(x[i] - x[j], k - 1)
            })
            .sum()
    })?;

    let mut rank_part = Vec::with_capacity(n);
    for j in 0..n {
        let mut u = SampledFunction::zeros(grid);
        for k in 1..=n {
            for nu in 0..=k {
                if j + k >= n + nu {
                    let c = real(sign(nu) * binomial(k as i64, nu as i64));
                    add_integrated_monomial(&mut u, c, nu, j + k - n - nu, big_p(k))?;
                }
            }
        }
        for k in 0..n {
            for nu in 0..=k {
                let c = I * (sign(nu) * binomial(k as i64, nu as i64));
                if j + k + 1 >= n + nu {
                    add_integrated_monomial(&mut u, c, nu, j + k + 1 - n - nu, big_q(k))?;
                }
                if k >= 1 && j + k >= n + nu {
                    add_integrated_monomial(&mut u, c, nu + 1, j + k - n - nu, big_q(k))?;
                }
            }
        }
        rank_part.push(u);
    }
    let continuous = all_continuous(spec.p.iter().chain(&spec.q));
    OperatorForm::new(n, n, multiplier, kernel, rank_part, Provenance::Even, continuous)
}

/// Odd order `2n+1`: `m = n+1`, `β = 2i·q₀`.
pub fn build_odd(spec: &OddCoefficientSpec, grid: &GridRef) -> Result<OperatorForm> {
    spec.check_shape()?;
    let n = spec.n;
    let q0 = evaluate(&spec.q0, grid)?;
    let min = q0.values().iter().fold(f64::INFINITY, |m, v| m.min(v.norm()));
    if min <= IDENTITY_TOL {
        return Err(Error::Q0Vanishes(min));
    }
    let multiplier = q0.scale(2.0 * I);
    let p: Vec<SampledFunction> = (0..=n).map(|k| evaluate(spec.big_p(k), grid)).collect::<Result<_>>()?;
    let q: Vec<SampledFunction> = (0..=n).map(|k| evaluate(spec.big_q(k), grid)).collect::<Result<_>>()?;

    let mut terms = KernelTerms::new(grid);
    for k in 1..=n {
        terms.push(spec.big_p(k), real(1.0), 0, k - 1);
        terms.push(spec.big_q(k), I, 0, k - 1);
        for nu in 1..k {
            let s = sign(nu);
            terms.push(spec.big_p(k), real(s * binomial(k as i64, nu as i64)), nu, k - 1 - nu);
            let cq = binomial(k as i64 - 1, nu as i64) - binomial(k as i64 - 1, nu as i64 - 1);
            terms.push(spec.big_q(k), I * (s * cq), nu, k - 1 - nu);
        }
    }
    let x = grid.nodes();
    let kernel = terms.assemble(|i, j| {
        (0..=n)
            .map(|k| (p[k].at(j) - I * q[k].at(j)) * (sign(k) * taylor_monomial(x[i] - x[j], k)))
            .sum()
    })?;

    let mut rank_part = Vec::with_capacity(n);
    for j in 0..n {
        let mut u = SampledFunction::zeros(grid);
        for k in 1..=n {
            for nu in 0..k {
                let c = I * (sign(nu) * binomial(k as i64 - 1, nu as i64));
                if j + k >= n + nu + 1 {
                    add_integrated_monomial(&mut u, c, nu + 2, j + k - n - nu - 1, &q[k])?;
                }
                if j + k >= n + nu {
                    add_integrated_monomial(&mut u, c, nu + 1, j + k - n - nu, &q[k])?;
                }
            }
        }
        for (k, pk) in p.iter().enumerate() {
            for nu in 0..=k {
                if j + k >= n + nu {
                    let c = real(sign(nu) * binomial(k as i64, nu as i64));
                    add_integrated_monomial(&mut u, c, nu + 1, j + k - n - nu, pk)?;
                }
            }
        }
        rank_part.push(u);
    }
    let continuous = all_continuous(spec.p.iter().chain(&spec.q).chain([&spec.q0_prime]));
    OperatorForm::new(n + 1, n, multiplier, kernel, rank_part, Provenance::Odd, continuous)
}

/// `y⁽ᴺ⁾ + Σ p_j y⁽ʲ⁾` written as `d/dx (y⁽ᴺ⁻¹⁾ + Σ_j J(p_j y⁽ʲ⁾))`:
/// `m = 1`, `n = N−1`, `K(x,t) = Σ_j ∫_t^x p_j(τ)(τ−t)^{N−2−j}/(N−2−j)! dτ`,
/// `u_s = Σ_{j≤s} J(p_j x^{s−j}/(s−j)!)`.
pub fn build_polynomial(spec: &PolynomialCoefficientSpec, grid: &GridRef) -> Result<OperatorForm> {
    spec.check_shape()?;
    let big_n = spec.order;
    let n = big_n - 1;
    let mut terms = KernelTerms::new(grid);
    for (j, pj) in spec.p.iter().enumerate() {
        terms.push(pj, real(1.0), 0, big_n - 2 - j);
    }
    let kernel = terms.assemble(|_, _| C64::new(0.0, 0.0))?;
    let p: Vec<SampledFunction> = spec.p.iter().map(|f| evaluate(f, grid)).collect::<Result<_>>()?;
    let mut rank_part = Vec::with_capacity(n);
    for s in 0..n {
        let mut u = SampledFunction::zeros(grid);
        for (j, pj) in p.iter().enumerate().take(s + 1) {
            add_integrated_monomial(&mut u, real(1.0), 1, s - j, pj)?;
        }
        rank_part.push(u);
    }
    let one = SampledFunction::constant(grid, real(1.0));
    OperatorForm::new(1, n, one, kernel, rank_part, Provenance::Polynomial, true)
}

/// `ℓ̃ = ℓ + a`: `K̃ = K + a(x−t)^{N−1}/(N−1)!`, `ũ_ν = u_ν + a x^{ν+m}/(ν+m)!`.
pub fn shift(form: &OperatorForm, a: C64) -> Result<OperatorForm> {
    form.require_unit_multiplier()?;
    if a == C64::new(0.0, 0.0) {
        return Ok(form.clone());
    }
    let big_n = form.order();
    let x = form.grid().nodes();
    let kernel = form
        .kernel
        .map(|i, j, v| v + a * taylor_monomial(x[i] - x[j], big_n - 1));
    let rank_part = form
        .rank_part
        .iter()
        .enumerate()
        .map(|(nu, u)| u.map(|x, v| v + a * taylor_monomial(x, nu + form.m)))
        .collect();
    OperatorForm::new(
        form.m,
        form.n,
        form.multiplier.clone(),
        kernel,
        rank_part,
        form.provenance,
        form.kernel_continuous,
    )
}

/// Smooth coefficients in closed form, used to evaluate `ℓy` classically.
#[derive(Debug, Clone)]
pub enum ClassicalExpression {
    Even(EvenCoefficientSpec),
    Odd(OddCoefficientSpec),
    Polynomial(PolynomialCoefficientSpec),
}

fn closed(fd: &FunctionDescriptor) -> Result<Expr> {
    fd.expr()
        .cloned()
        .ok_or_else(|| Error::NotDifferentiable("sampled coefficient".into()))
}

fn dn(e: &Expr, k: usize) -> Result<Expr> {
    e.nth_derivative(k)
}

fn product(a: Expr, b: Expr) -> Expr {
    Expr::Mul(Box::new(a), Box::new(b)).simplify()
}

impl ClassicalExpression {
    pub fn order(&self) -> usize {
        match self {
            ClassicalExpression::Even(s) => s.order(),
            ClassicalExpression::Odd(s) => s.order(),
            ClassicalExpression::Polynomial(s) => s.order,
        }
    }

    /// `ℓy` as an expression tree, by symbolic differentiation.
    pub fn apply(&self, y: &Expr) -> Result<Expr> {
        let mut terms: Vec<Expr> = Vec::new();
        match self {
            ClassicalExpression::Even(s) => {
                let n = s.n;
                let b = closed(&s.weight_b)?;
                let mut pk = vec![product(b.clone(), b)];
                for k in 1..=n {
                    pk.push(dn(&closed(s.big_p(k))?, k)?);
                }
                for (k, p) in pk.iter().enumerate() {
                    terms.push(dn(&product(p.clone(), dn(y, n - k)?), n - k)?);
                }
                for k in 0..n {
                    let qk = dn(&closed(s.big_q(k))?, k)?;
                    let a = dn(&product(qk.clone(), dn(y, n - k - 1)?), n - k)?;
                    let b = dn(&product(qk, dn(y, n - k)?), n - k - 1)?;
                    terms.push(product(Expr::constant(I), Expr::Add(Box::new(a), Box::new(b))));
                }
            }
            ClassicalExpression::Odd(s) => {
                let n = s.n;
                for k in 0..=n {
                    let qk = if k == 0 {
                        closed(&s.q0)?
                    } else {
                        dn(&closed(s.big_q(k))?, k - 1)?
                    };
                    let a = dn(&product(qk.clone(), dn(y, n - k + 1)?), n - k)?;
                    let b = dn(&product(qk, dn(y, n - k)?), n - k + 1)?;
                    terms.push(product(Expr::constant(I), Expr::Add(Box::new(a), Box::new(b))));
                    let pk = dn(&closed(s.big_p(k))?, k)?;
                    terms.push(dn(&product(pk, dn(y, n - k)?), n - k)?);
                }
            }
            ClassicalExpression::Polynomial(s) => {
                terms.push(dn(y, s.order)?);
                for (j, p) in s.p.iter().enumerate() {
                    terms.push(product(closed(p)?, dn(y, j)?));
                }
            }
        }
        Ok(terms
            .into_iter()
            .reduce(|a, b| Expr::Add(Box::new(a), Box::new(b)))
            .expect("at least one term")
            .simplify())
    }
}

/// `dᵐF` by central differences (second-order accurate); entries closer than
/// `⌈m/2⌉` nodes to an end are left at zero.
fn central_derivative(f: &[C64], m: usize, h: f64) -> Vec<C64> {
    let n = f.len();
    let mut cur = f.to_vec();
    let mut valid = 0usize;
    for _ in 0..m / 2 {
        let mut next = vec![C64::new(0.0, 0.0); n];
        for i in valid + 1..n - valid - 1 {
            next[i] = (cur[i + 1] - 2.0 * cur[i] + cur[i - 1]) / (h * h);
        }
        cur = next;
        valid += 1;
    }
    if m % 2 == 1 {
        let mut next = vec![C64::new(0.0, 0.0); n];
        for i in valid + 1..n - valid - 1 {
            next[i] = (cur[i + 1] - cur[i - 1]) / (2.0 * h);
        }
        cur = next;
    }
    cur
}

/// Max interior discrepancy between the classical `ℓy` and `dᵐ(B y⁽ⁿ⁾ + Cy)`,
/// the latter differentiated numerically. A layer of `max(3, m)` nodes at each
/// end is excluded.
pub fn verify_against_classical(
    form: &OperatorForm,
    classical: &ClassicalExpression,
    y: &Expr,
) -> Result<f64> {
    if classical.order() != form.order() {
        return Err(Error::DimensionMismatch(format!(
            "classical order {} vs form order {}",
            classical.order(),
            form.order()
        )));
    }
    let grid = form.grid();
    let lhs = classical.apply(y)?;
    let yn_expr = y.nth_derivative(form.n)?;
    let yn = evaluate(&FunctionDescriptor::Closed(yn_expr), grid)?;
    let initial = (0..form.n)
        .map(|nu| y.nth_derivative(nu)?.eval(0.0))
        .collect::<Result<Vec<_>>>()?;
    let inner = form.inner_expression(&yn, &initial)?;
    let rhs = central_derivative(inner.values(), form.m, grid.step());
    let layer = 3.max(form.m);
    let mut worst: f64 = 0.0;
    for i in layer..grid.len() - layer {
        let classical = lhs.eval(grid.x(i))?;
        worst = worst.max((classical - rhs[i]).norm());
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::{make_grid, Scheme};
    use proptest::prelude::*;

    fn grid(n: usize) -> GridRef {
        make_grid(n, Scheme::UniformTrapezoid).unwrap()
    }

    fn fd(s: &str) -> FunctionDescriptor {
        FunctionDescriptor::parse(s).unwrap()
    }

    fn zeros(n: usize) -> Vec<FunctionDescriptor> {
        vec![FunctionDescriptor::zero(); n]
    }

    fn kernel_err(k: &TriangularKernel, exact: impl Fn(f64, f64) -> C64) -> f64 {
        let g = k.grid();
        let mut e: f64 = 0.0;
        for i in 0..g.len() {
            for j in 0..=i {
                e = e.max((k.get(i, j) - exact(g.x(i), g.x(j))).norm());
            }
        }
        e
    }

    fn fn_err(f: &SampledFunction, exact: impl Fn(f64) -> C64) -> f64 {
        f.grid()
            .nodes()
            .iter()
            .zip(f.values())
            .fold(0.0, |m, (&x, v)| m.max((v - exact(x)).norm()))
    }

    fn odd(n: usize, p: Vec<FunctionDescriptor>, q: Vec<FunctionDescriptor>) -> OddCoefficientSpec {
        OddCoefficientSpec::with_derived_q0_prime(n, fd("1/(2*i)"), p, q).unwrap()
    }

    #[test]
    fn even_first_order_step_potential() {
        let g = grid(101);
        let spec = EvenCoefficientSpec::with_p(1, vec![fd("H(x-0.5)")]).unwrap();
        let form = build_even(&spec, &g).unwrap();
        let h = |x: f64| if x >= 0.5 { 1.0 } else { 0.0 };
        assert_eq!(kernel_err(form.kernel(), |x, t| C64::new(h(x) - h(t), 0.0)), 0.0);
        assert_eq!(fn_err(&form.rank_part()[0], |x| C64::new(h(x), 0.0)), 0.0);
        assert!(form.multiplier_is_identity());
        assert!(!form.eligibility().kernel_continuous);
        assert_eq!((form.m(), form.n()), (1, 1));
    }

    #[test]
    fn even_zero_coefficients() {
        let g = grid(21);
        let form = build_even(&EvenCoefficientSpec::with_p(3, zeros(3)).unwrap(), &g).unwrap();
        assert!(form.kernel().is_identically_zero());
        assert!(form.rank_part().iter().all(|u| u.max_abs() == 0.0));
        assert!(form.eligibility().is_eligible());
    }

    #[test]
    fn even_second_order_linear_p1() {
        let g = grid(51);
        let spec = EvenCoefficientSpec::with_p(2, vec![fd("x"), fd("0")]).unwrap();
        let form = build_even(&spec, &g).unwrap();
        assert!(kernel_err(form.kernel(), |x, t| C64::new(x - t, 0.0)) < 1e-14);
        assert!(form.kernel().diagonal_zero());
    }

    #[test]
    fn odd_constant_q0() {
        let g = grid(21);
        let spec = OddCoefficientSpec::with_derived_q0_prime(0, fd("3"), vec![fd("0")], vec![]).unwrap();
        let form = build_odd(&spec, &g).unwrap();
        assert!(form.kernel().is_identically_zero());
        assert!(form.rank_part().is_empty());
        assert!(fn_err(form.multiplier(), |_| C64::new(0.0, 6.0)) < 1e-15);
        let unit = build_odd(&odd(0, zeros(1), vec![]), &g).unwrap();
        assert!(unit.multiplier_is_identity());
        assert!(unit.eligibility().is_eligible());
    }

    #[test]
    fn odd_third_order_hand_values() {
        let g = grid(101);
        let form = build_odd(&odd(1, vec![fd("0"), fd("x")], zeros(1)), &g).unwrap();
        assert!((form.kernel().get(100, 0) - 0.5).norm() < 1e-14);
        assert!(kernel_err(form.kernel(), |x, t| C64::new((x - t).powi(2) / 2.0, 0.0)) < 1e-14);
        assert!(fn_err(&form.rank_part()[0], |x| C64::new(x * x / 2.0, 0.0)) < 1e-4);
        assert_eq!((form.m(), form.n()), (2, 1));
    }

    #[test]
    fn odd_rejects_vanishing_q0() {
        let g = grid(11);
        let spec = OddCoefficientSpec::with_derived_q0_prime(0, fd("x"), zeros(1), vec![]).unwrap();
        assert!(matches!(build_odd(&spec, &g), Err(Error::Q0Vanishes(_))));
    }

    #[test]
    fn polynomial_forms() {
        let g = grid(101);
        let zero = build_polynomial(&PolynomialCoefficientSpec::new(4, zeros(3)).unwrap(), &g).unwrap();
        assert!(zero.kernel().is_identically_zero());
        let spec = PolynomialCoefficientSpec::new(3, vec![fd("1"), fd("0")]).unwrap();
        let form = build_polynomial(&spec, &g).unwrap();
        assert!(kernel_err(form.kernel(), |x, t| C64::new((x - t).powi(2) / 2.0, 0.0)) < 1e-14);
        assert!(fn_err(&form.rank_part()[0], |x| C64::new(x, 0.0)) < 1e-14);
        assert!(fn_err(&form.rank_part()[1], |x| C64::new(x * x / 2.0, 0.0)) < 1e-4);
        assert!(form.kernel().diagonal_zero());
        assert_eq!((form.m(), form.n()), (1, 2));
        let varying = PolynomialCoefficientSpec::new(4, vec![fd("sin(x)"), fd("H(x-0.3)"), fd("x")]).unwrap();
        assert!(build_polynomial(&varying, &g).unwrap().kernel().diagonal_zero());
    }

    #[test]
    fn classical_smooth_equivalence() {
        let g = grid(2001);
        let y = Expr::parse("sin(2*x)").unwrap();
        let even = EvenCoefficientSpec::with_p(1, vec![fd("x")]).unwrap();
        let form = build_even(&even, &g).unwrap();
        let r = verify_against_classical(&form, &ClassicalExpression::Even(even), &y).unwrap();
        assert!(r <= 1e-2, "{r}");

        let cubic = Expr::parse("x^3").unwrap();
        let poly = PolynomialCoefficientSpec::new(3, zeros(2)).unwrap();
        let form = build_polynomial(&poly, &g).unwrap();
        let r = verify_against_classical(&form, &ClassicalExpression::Polynomial(poly), &cubic).unwrap();
        assert!(r <= 1e-8, "{r}");

        let e = Expr::parse("exp(x)").unwrap();
        let spec = odd(0, zeros(1), vec![]);
        let form = build_odd(&spec, &g).unwrap();
        let r = verify_against_classical(&form, &ClassicalExpression::Odd(spec), &e).unwrap();
        assert!(r <= 1e-2, "{r}");
    }

    #[test]
    fn classical_equivalence_higher_orders() {
        let g = grid(801);
        let y = Expr::parse("x^3*exp(x)").unwrap();
        let cases: Vec<ClassicalExpression> = vec![
            ClassicalExpression::Even(
                EvenCoefficientSpec::new(
                    2,
                    fd("1"),
                    vec![fd("x^2/2"), fd("cos(x)")],
                    vec![fd("0"), fd("x^2")],
                )
                .unwrap(),
            ),
            ClassicalExpression::Even(
                EvenCoefficientSpec::new(3, fd("1"), vec![fd("x"), fd("x^3"), fd("sin(x)")], vec![fd("0"), fd("x"), fd("exp(x)")])
                    .unwrap(),
            ),
            ClassicalExpression::Odd(odd(1, vec![fd("0"), fd("x^2")], vec![fd("sin(x)")])),
            ClassicalExpression::Odd(odd(2, vec![fd("0"), fd("x"), fd("cos(x)")], vec![fd("x"), fd("x^2")])),
            ClassicalExpression::Polynomial(
                PolynomialCoefficientSpec::new(4, vec![fd("x"), fd("1"), fd("exp(x)")]).unwrap(),
            ),
        ];
        for c in cases {
            let form = match &c {
                ClassicalExpression::Even(s) => build_even(s, &g),
                ClassicalExpression::Odd(s) => build_odd(s, &g),
                ClassicalExpression::Polynomial(s) => build_polynomial(s, &g),
            }
            .unwrap();
            let r = verify_against_classical(&form, &c, &y).unwrap();
            assert!(r <= 1e-2, "{c:?}: {r}");
        }
    }

    #[test]
    fn non_unit_multiplier_is_not_shiftable() {
        let g = grid(21);
        let spec = EvenCoefficientSpec::new(1, fd("2"), vec![fd("x")], vec![fd("0")]).unwrap();
        let form = build_even(&spec, &g).unwrap();
        assert!(!form.eligibility().is_eligible());
        assert!(matches!(shift(&form, C64::new(1.0, 0.0)), Err(Error::IneligibleForm(_))));
    }

    #[test]
    fn shift_examples() {
        let g = grid(41);
        let form = build_polynomial(&PolynomialCoefficientSpec::new(3, zeros(2)).unwrap(), &g).unwrap();
        let same = shift(&form, C64::new(0.0, 0.0)).unwrap();
        assert_eq!(same.kernel(), form.kernel());
        let shifted = shift(&form, C64::new(1.0, 0.0)).unwrap();
        assert!(kernel_err(shifted.kernel(), |x, t| C64::new((x - t).powi(2) / 2.0, 0.0)) < 1e-15);
        assert!(fn_err(&shifted.rank_part()[1], |x| C64::new(x * x / 2.0, 0.0)) < 1e-15);
    }

    #[test]
    fn gauge_invariance_odd() {
        let g = grid(101);
        let base = build_odd(&odd(2, vec![fd("0"), fd("x^2"), fd("sin(x)")], vec![fd("x"), fd("cos(x)")]), &g).unwrap();
        let moved = build_odd(
            &odd(2, vec![fd("0"), fd("x^2+3"), fd("sin(x)+2-5*x")], vec![fd("x"), fd("cos(x)+7")]),
            &g,
        )
        .unwrap();
        assert!(base.kernel().max_abs_diff(moved.kernel()).unwrap() <= 1e-10);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn gauge_invariance_even(c0 in -5.0..5.0f64, c1 in -5.0..5.0f64, d0 in -5.0..5.0f64, e0 in -5.0..5.0f64, e1 in -5.0..5.0f64, e2 in -5.0..5.0f64) {
            let g = grid(61);
            let p = |s: &str| fd(s);
            let base = EvenCoefficientSpec::new(3, p("1"), vec![p("sin(x)"), p("x^3"), p("exp(x)")], vec![p("0"), p("cos(x)"), p("x^4")]).unwrap();
            let moved = EvenCoefficientSpec::new(
                3,
                p("1"),
                vec![
                    p(&format!("sin(x)+{}", c0.abs())),
                    p(&format!("x^3+{}+{}*x", c1.abs(), d0.abs())),
                    p(&format!("exp(x)+{}+{}*x+{}*x^2", e0.abs(), e1.abs(), e2.abs())),
                ],
                vec![p("0"), p(&format!("cos(x)+{}", c0.abs())), p(&format!("x^4+{}+{}*x", c1.abs(), e1.abs()))],
            )
            .unwrap();
            let k0 = build_even(&base, &g).unwrap();
            let k1 = build_even(&moved, &g).unwrap();
            prop_assert!(k0.kernel().max_abs_diff(k1.kernel()).unwrap() <= 1e-10);
        }

        #[test]
        fn smooth_hypotheses_give_zero_diagonal(a in -3.0..3.0f64, b in -3.0..3.0f64) {
            let g = grid(41);
            let even = EvenCoefficientSpec::new(
                2, fd("1"),
                vec![fd(&format!("{}*sin(x)", a.abs())), fd(&format!("{}*x^2", b.abs()))],
                vec![fd("0"), fd(&format!("{}*cos(x)", a.abs()))],
            ).unwrap();
            prop_assert!(build_even(&even, &g).unwrap().kernel().diagonal_zero());
            let o = odd(1, vec![fd("0"), fd(&format!("{}*exp(x)", a.abs()))], vec![fd(&format!("{}*x", b.abs()))]);
            prop_assert!(build_odd(&o, &g).unwrap().kernel().diagonal_zero());
        }
    }
}
