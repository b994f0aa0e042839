//! Separated boundary conditions, the fundamental system of `ℓy = 0`, the
//! Cauchy solver, and the inverse operator `Af = Mf + Σ g_k ∫ f v_k`.
//!
//! Frames `y^⟨0⟩, …, y^⟨N−1⟩` hold ordinary derivatives below `n` and the
//! quasi-derivatives `dˢ/dxˢ((I+K)y⁽ⁿ⁾ + Cy)` from `n` on. For solutions of
//! `ℓy = 0` the latter are polynomials fixed by the initial frame, so they are
//! evaluated exactly rather than differentiated numerically.
//!
//! All `∫₀¹` pairings of the rank part use trapezoid weights, the same rule as
//! the rows of the `M` kernel, so boundary functionals of `Af` cancel to
//! rounding.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::io::format_float;
use crate::quadrature::{integrate_times, trapezoid_pairing, GridRef, QuasiDerivativeFrame, SampledFunction};
use crate::reduction::{OperatorForm, Provenance};
use crate::volterra::{resolvent, MKernel, TriangularKernel};
use crate::{taylor_monomial, Error, Result, C64};

/// Beyond this condition number of the boundary matrix, 0 is treated as an
/// eigenvalue.
pub const SINGULAR_CONDITION: f64 = 1e10;
/// Shift proposed when 0 is in the spectrum.
pub const SUGGESTED_SHIFT: f64 = 1.0;
/// Exponent fits further than this from an integer are flagged.
pub const EXPONENT_MISMATCH: f64 = 0.3;
const FIT_NODES: usize = 5;

fn zero() -> C64 {
    C64::new(0.0, 0.0)
}

/// How the conditions split between the ends.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Split {
    /// `l > N − l`.
    LeftHeavy,
    /// `N − l > l`.
    RightHeavy,
    /// `2l = N`.
    Regular,
}

/// Rows `0..l` act at `x = 0`, rows `l..N` at `x = 1`, on the frame `y^⟨k⟩`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryConditions {
    alpha: DMatrix<C64>,
    l: usize,
}

impl BoundaryConditions {
    pub fn new(alpha: DMatrix<C64>, l: usize) -> Result<Self> {
        let n = alpha.nrows();
        if n == 0 || alpha.ncols() != n {
            return Err(Error::InvalidBoundary(format!(
                "coefficient matrix must be square and non-empty, got {}×{}",
                alpha.nrows(),
                alpha.ncols()
            )));
        }
        if l == n {
            return Err(Error::NoRightConditions);
        }
        if l == 0 {
            return Err(Error::InvalidBoundary("no left-end conditions (l = 0)".into()));
        }
        if l > n {
            return Err(Error::InvalidBoundary(format!("split l = {l} exceeds N = {n}")));
        }
        if alpha.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::InvalidBoundary("non-finite coefficient".into()));
        }
        Ok(BoundaryConditions { alpha, l })
    }

    pub fn from_rows(rows: &[Vec<C64>], l: usize) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidBoundary(format!("expected {n} coefficients per row")));
        }
        Self::new(DMatrix::from_fn(n, n, |r, c| rows[r][c]), l)
    }

    pub fn order(&self) -> usize {
        self.alpha.nrows()
    }

    pub fn l(&self) -> usize {
        self.l
    }

    pub fn alpha(&self) -> &DMatrix<C64> {
        &self.alpha
    }

    pub fn split(&self) -> Split {
        let right = self.order() - self.l;
        match self.l.cmp(&right) {
            std::cmp::Ordering::Greater => Split::LeftHeavy,
            std::cmp::Ordering::Less => Split::RightHeavy,
            std::cmp::Ordering::Equal => Split::Regular,
        }
    }
}

/// Staircase form: `α[j][σ_j] = 1`, `α[j][k] = 0` for `k > σ_j`, and `σ`
/// strictly increasing within each group. Pivot columns are also cleared from
/// the other rows of their group.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedBC {
    alpha: DMatrix<C64>,
    sigma: Vec<usize>,
    l: usize,
}

impl NormalizedBC {
    pub fn alpha(&self) -> &DMatrix<C64> {
        &self.alpha
    }

    pub fn sigma(&self) -> &[usize] {
        &self.sigma
    }

    pub fn l(&self) -> usize {
        self.l
    }

    pub fn order(&self) -> usize {
        self.alpha.nrows()
    }

    /// `d = N − l`.
    pub fn rank(&self) -> usize {
        self.order() - self.l
    }

    pub fn row(&self, j: usize) -> Vec<C64> {
        self.alpha.row(j).iter().copied().collect()
    }

    /// `U_j` applied to a frame value vector.
    pub fn functional(&self, j: usize, frame: &[C64]) -> C64 {
        (0..self.order()).map(|k| self.alpha[(j, k)] * frame[k]).sum()
    }
}

fn reduce_group(rows: &[Vec<C64>], group: &'static str) -> Result<Vec<(usize, Vec<C64>)>> {
    let mut rows = rows.to_vec();
    let n = rows.first().map_or(0, Vec::len);
    let scale = rows.iter().flatten().fold(0.0f64, |m, v| m.max(v.norm()));
    if scale == 0.0 {
        return Err(Error::DegenerateBoundaryConditions { group });
    }
    let tol = 1e-12 * scale;
    let mut pivot_of: Vec<Option<usize>> = vec![None; rows.len()];
    for col in (0..n).rev() {
        let candidate = (0..rows.len())
            .filter(|&r| pivot_of[r].is_none())
            .max_by(|&a, &b| rows[a][col].norm().total_cmp(&rows[b][col].norm()));
        let Some(p) = candidate else { break };
        if rows[p][col].norm() <= tol {
            continue;
        }
        let lead = rows[p][col];
        for v in rows[p].iter_mut() {
            *v /= lead;
        }
        rows[p][col] = C64::new(1.0, 0.0);
        for r in 0..rows.len() {
            if r != p {
                let factor = rows[r][col];
                if factor != zero() {
                    for c in 0..n {
                        let delta = factor * rows[p][c];
                        rows[r][c] -= delta;
                    }
                    rows[r][col] = zero();
                }
            }
        }
        pivot_of[p] = Some(col);
    }
    if pivot_of.iter().any(Option::is_none) {
        return Err(Error::DegenerateBoundaryConditions { group });
    }
    let mut out: Vec<(usize, Vec<C64>)> = pivot_of
        .into_iter()
        .map(|p| p.expect("checked above"))
        .zip(rows)
        .collect();
    out.sort_by_key(|(s, _)| *s);
    Ok(out)
}

/// Gauss elimination within each end's group of rows.
pub fn normalize_bc(bc: &BoundaryConditions) -> Result<NormalizedBC> {
    let n = bc.order();
    let rows: Vec<Vec<C64>> = (0..n).map(|r| bc.alpha.row(r).iter().copied().collect()).collect();
    let left = reduce_group(&rows[..bc.l], "at x = 0")?;
    let right = reduce_group(&rows[bc.l..], "at x = 1")?;
    let all: Vec<(usize, Vec<C64>)> = left.into_iter().chain(right).collect();
    let sigma = all.iter().map(|(s, _)| *s).collect();
    let alpha = DMatrix::from_fn(n, n, |r, c| all[r].1[c]);
    Ok(NormalizedBC { alpha, sigma, l: bc.l })
}

/// `y₁, …, y_N` with identity initial frames, their full frames, and the
/// intermediate `ξ_j = (I+R)xʲ/j!`, `η_ν = −(I+R)u_ν`.
#[derive(Debug, Clone)]
pub struct FundamentalSystem {
    m: usize,
    n: usize,
    resolvent: TriangularKernel,
    functions: Vec<SampledFunction>,
    frames: Vec<QuasiDerivativeFrame>,
    xi: Vec<SampledFunction>,
    eta: Vec<SampledFunction>,
}

/// `x^p/p!` sampled, or zero when `p < 0`.
fn monomial(grid: &GridRef, p: i64) -> SampledFunction {
    if p < 0 {
        SampledFunction::zeros(grid)
    } else {
        SampledFunction::from_real_fn(grid, |x| taylor_monomial(x, p as usize))
    }
}

pub fn fundamental_system(form: &OperatorForm) -> Result<FundamentalSystem> {
    form.require_unit_multiplier()?;
    let (m, n) = (form.m(), form.n());
    let grid = form.grid().clone();
    let r = resolvent(form.kernel());
    let mut functions = Vec::with_capacity(m + n);
    let mut frames = Vec::with_capacity(m + n);
    let mut eta = Vec::with_capacity(n);
    for (nu, u) in form.rank_part().iter().enumerate() {
        let e = r.apply_identity_plus(u)?.scale(C64::new(-1.0, 0.0));
        let mut entries = Vec::with_capacity(m + n);
        for k in 0..n {
            entries.push(monomial(&grid, nu as i64 - k as i64).add(&integrate_times(&e, n - k))?);
        }
        for _ in 0..m {
            entries.push(SampledFunction::zeros(&grid));
        }
        functions.push(entries[0].clone());
        frames.push(QuasiDerivativeFrame::new(entries)?);
        eta.push(e);
    }
    let mut xi = Vec::with_capacity(m);
    for j in 0..m {
        let x = r.apply_identity_plus(&monomial(&grid, j as i64))?;
        let mut entries = Vec::with_capacity(m + n);
        for k in 0..n {
            entries.push(integrate_times(&x, n - k));
        }
        for s in 0..m {
            entries.push(monomial(&grid, j as i64 - s as i64));
        }
        functions.push(if n == 0 { x.clone() } else { entries[0].clone() });
        frames.push(QuasiDerivativeFrame::new(entries)?);
        xi.push(x);
    }
    Ok(FundamentalSystem {
        m,
        n,
        resolvent: r,
        functions,
        frames,
        xi,
        eta,
    })
}

impl FundamentalSystem {
    pub fn order(&self) -> usize {
        self.m + self.n
    }

    pub fn resolvent(&self) -> &TriangularKernel {
        &self.resolvent
    }

    /// `y_{j+1}`, zero-based.
    pub fn function(&self, j: usize) -> &SampledFunction {
        &self.functions[j]
    }

    pub fn functions(&self) -> &[SampledFunction] {
        &self.functions
    }

    pub fn frame(&self, j: usize) -> &QuasiDerivativeFrame {
        &self.frames[j]
    }

    pub fn xi(&self) -> &[SampledFunction] {
        &self.xi
    }

    pub fn eta(&self) -> &[SampledFunction] {
        &self.eta
    }

    /// Frames of all `y_j` at node `i`, one column per function.
    pub fn frame_matrix(&self, i: usize) -> DMatrix<C64> {
        let big_n = self.order();
        DMatrix::from_fn(big_n, big_n, |k, j| self.frames[j].entry(k).at(i))
    }

    /// `y = Mf + Σ initial_j y_{j+1}` with its frame; `(Mf)^⟨n+s⟩ = J^{m−s} f`.
    pub fn solve_cauchy(
        &self,
        f: &SampledFunction,
        initial: &[C64],
    ) -> Result<(SampledFunction, QuasiDerivativeFrame)> {
        let big_n = self.order();
        if initial.len() != big_n {
            return Err(Error::LengthMismatch {
                expected: big_n,
                actual: initial.len(),
            });
        }
        let w = self.resolvent.apply_identity_plus(&integrate_times(f, self.m))?;
        let mut entries = Vec::with_capacity(big_n);
        for k in 0..self.n {
            entries.push(integrate_times(&w, self.n - k));
        }
        for s in 0..self.m {
            entries.push(integrate_times(f, self.m - s));
        }
        let mut y = if self.n == 0 { w } else { entries[0].clone() };
        for (j, &c) in initial.iter().enumerate() {
            if c == zero() {
                continue;
            }
            y.axpy(c, &self.functions[j])?;
            for (k, e) in entries.iter_mut().enumerate() {
                e.axpy(c, self.frames[j].entry(k))?;
            }
        }
        Ok((y, QuasiDerivativeFrame::new(entries)?))
    }
}

/// Solves the Cauchy problem `ℓy = f` with the given initial frame.
pub fn solve_cauchy(
    form: &OperatorForm,
    f: &SampledFunction,
    initial: &[C64],
) -> Result<(SampledFunction, QuasiDerivativeFrame)> {
    fundamental_system(form)?.solve_cauchy(f, initial)
}

/// Least-squares power law `|f| ≈ a·sᵖ` at an endpoint, `s` the distance to it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExponentFit {
    pub exponent: f64,
    pub rounded: usize,
    pub mismatch: f64,
    /// `lim f/s^rounded` by linear extrapolation from the two nearest nodes.
    pub amplitude: C64,
    pub flagged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum End {
    Left,
    Right,
}

/// Fits on the five nodes nearest `end`, excluding the endpoint itself.
pub fn fit_endpoint_exponent(f: &SampledFunction, end: End) -> ExponentFit {
    let grid = f.grid();
    let last = grid.last();
    let h = grid.step();
    let pick = |k: usize| match end {
        End::Left => k,
        End::Right => last - k,
    };
    let count = FIT_NODES.min(last.saturating_sub(1)).max(2);
    let pts: Vec<(f64, f64)> = (1..=count)
        .filter_map(|k| {
            let v = f.at(pick(k)).norm();
            (v > 0.0).then(|| ((k as f64 * h).ln(), v.ln()))
        })
        .collect();
    let exponent = if pts.len() < 2 {
        f64::INFINITY
    } else {
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / pts.len() as f64;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / pts.len() as f64;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        sxy / sxx
    };
    let rounded = if exponent.is_finite() {
        exponent.round().max(0.0) as usize
    } else {
        0
    };
    let mismatch = (exponent - rounded as f64).abs();
    let ratio = |k: usize| f.at(pick(k)) / (k as f64 * h).powi(rounded as i32);
    let amplitude = 2.0 * ratio(1) - ratio(2);
    ExponentFit {
        exponent,
        rounded,
        mismatch,
        amplitude,
        flagged: !(mismatch <= EXPONENT_MISMATCH),
    }
}

/// Condition of `W = R·F·B`, measured against the sizes of its factors so
/// that a `W` small through cancellation counts as singular.
fn condition_number(w: &DMatrix<C64>, factor_scale: f64) -> f64 {
    let sv = w.clone().svd(false, false).singular_values;
    let max = sv.iter().cloned().fold(0.0, f64::max);
    let min = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    if min == 0.0 {
        f64::INFINITY
    } else {
        max.max(factor_scale) / min
    }
}

/// Solutions `g_k` of `ℓy = 0` meeting the left conditions with
/// `U_{l+j}(g_k) = −δ_{jk}` for the mixed right functionals, after the sweep
/// that makes the leading exponents at 0 distinct.
#[derive(Debug, Clone)]
pub struct HomogeneousSolutions {
    /// `g_k = Σ_c beta[(c, k)] y_{c+1}`; column `k` is also the initial frame.
    pub beta: DMatrix<C64>,
    pub g: Vec<SampledFunction>,
    /// Leading exponent at 0 from the expansion, `χ_k = b_k − 1`; strictly
    /// decreasing in `k`.
    pub chi: Vec<usize>,
    /// Row `k` expresses the functional paired with `g_k` in the original
    /// right rows: `Ũ_k = Σ_j mix[(k, j)] U_{l+j}`.
    pub mix: DMatrix<C64>,
    /// Original right-row index whose asymptotics row `k` inherits.
    pub leading_row: Vec<usize>,
}

fn leading_index(col: &[C64]) -> usize {
    let scale = col.iter().fold(0.0f64, |m, v| m.max(v.norm()));
    col.iter()
        .position(|v| v.norm() > 1e-10 * scale)
        .unwrap_or(col.len())
}

fn compute_homogeneous(fs: &FundamentalSystem, nbc: &NormalizedBC) -> Result<HomogeneousSolutions> {
    let big_n = nbc.order();
    if fs.order() != big_n {
        return Err(Error::DimensionMismatch(format!(
            "boundary conditions of order {big_n} for an operator of order {}",
            fs.order()
        )));
    }
    let (l, d) = (nbc.l(), nbc.rank());
    let sigma = nbc.sigma();
    // Null space of the left rows: frames at 0 are the identity.
    let free: Vec<usize> = (0..big_n).filter(|c| !sigma[..l].contains(c)).collect();
    let mut basis = DMatrix::from_element(big_n, d, zero());
    for (k, &f) in free.iter().enumerate() {
        basis[(f, k)] = C64::new(1.0, 0.0);
        for j in 0..l {
            basis[(sigma[j], k)] = -nbc.alpha()[(j, f)];
        }
    }
    let at_one = fs.frame_matrix(fs.functions[0].grid().last());
    let right = DMatrix::from_fn(d, big_n, |j, c| nbc.alpha()[(l + j, c)]);
    let w = &right * &at_one * &basis;
    let factor_scale = right.norm() * (&at_one * &basis).norm();
    let condition = condition_number(&w, factor_scale);
    if !(condition <= SINGULAR_CONDITION) {
        return Err(Error::ZeroInSpectrum {
            condition,
            suggested_shift: SUGGESTED_SHIFT,
        });
    }
    let w_inv = w.try_inverse().ok_or(Error::ZeroInSpectrum {
        condition,
        suggested_shift: SUGGESTED_SHIFT,
    })?;
    let mut beta = -(basis * w_inv);
    let mut mix = DMatrix::<C64>::identity(d, d);

    let lead = |beta: &DMatrix<C64>, k: usize| -> usize {
        let col: Vec<C64> = beta.column(k).iter().copied().collect();
        leading_index(&col)
    };
    loop {
        let b: Vec<usize> = (0..d).map(|k| lead(&beta, k)).collect();
        let clash = (0..d).find_map(|i| ((i + 1)..d).find(|&j| b[i] == b[j]).map(|j| (i, j)));
        let Some((i, j)) = clash else { break };
        let alpha = beta[(b[i], i)] / beta[(b[j], j)];
        let gj = beta.column(j).clone_owned();
        beta.column_mut(i).axpy(-alpha, &gj, C64::new(1.0, 0.0));
        beta[(b[i], i)] = zero();
        for c in 0..d {
            let delta = alpha * mix[(i, c)];
            mix[(j, c)] += delta;
        }
    }
    let b: Vec<usize> = (0..d).map(|k| lead(&beta, k)).collect();
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&p, &q| b[q].cmp(&b[p]));
    let beta = DMatrix::from_fn(big_n, d, |r, k| beta[(r, order[k])]);
    let mix = DMatrix::from_fn(d, d, |k, c| mix[(order[k], c)]);
    let chi = order.iter().map(|&k| b[k]).collect();

    let grid = fs.functions[0].grid();
    let g = (0..d)
        .map(|k| {
            let mut acc = SampledFunction::zeros(grid);
            for c in 0..big_n {
                if beta[(c, k)] != zero() {
                    acc.axpy(beta[(c, k)], &fs.functions[c])?;
                }
            }
            Ok(acc)
        })
        .collect::<Result<_>>()?;
    Ok(HomogeneousSolutions {
        beta,
        g,
        chi,
        mix,
        leading_row: order,
    })
}

pub fn homogeneous_solutions(form: &OperatorForm, nbc: &NormalizedBC) -> Result<HomogeneousSolutions> {
    compute_homogeneous(&fundamental_system(form)?, nbc)
}

/// Kernels `v_j` of the right functionals of `Mf`, before any mixing:
/// `U_{l+j}(Mf) = ∫₀¹ f v_j`.
fn raw_functional_kernels(mk: &MKernel, nbc: &NormalizedBC, grid: &GridRef) -> Result<Vec<SampledFunction>> {
    let (n, big_n, l) = (mk.n(), mk.order(), nbc.l());
    let last = grid.last();
    let derivatives: Vec<SampledFunction> = (0..n).map(|k| mk.x_derivative(k, last)).collect::<Result<_>>()?;
    (0..nbc.rank())
        .map(|j| {
            let row = l + j;
            let s = nbc.sigma()[row];
            let mut v = SampledFunction::zeros(grid);
            for k in 0..=s.min(n.saturating_sub(1)) {
                if k < n {
                    v.axpy(nbc.alpha()[(row, k)], &derivatives[k])?;
                }
            }
            for k in n..=s {
                let tail = SampledFunction::from_real_fn(grid, |t| taylor_monomial(1.0 - t, big_n - 1 - k));
                v.axpy(nbc.alpha()[(row, k)], &tail)?;
            }
            Ok(v)
        })
        .collect()
}

pub fn functional_kernels(form: &OperatorForm, nbc: &NormalizedBC) -> Result<Vec<SampledFunction>> {
    form.require_unit_multiplier()?;
    let r = resolvent(form.kernel());
    let mk = MKernel::new(&r, form.m(), form.n())?;
    raw_functional_kernels(&mk, nbc, form.grid())
}

/// `Af(x) = ∫₀ˣ M(x,t) f(t) dt + Σ_k g_k(x) ∫₀¹ f v_k`.
#[derive(Debug, Clone)]
pub struct FiniteRankOperator {
    m: usize,
    n: usize,
    nbc: NormalizedBC,
    kernel: TriangularKernel,
    /// `∂ᵏM/∂xᵏ(1, ·)`, `k < n`.
    m_derivatives_at_one: Vec<SampledFunction>,
    g: Vec<SampledFunction>,
    v: Vec<SampledFunction>,
    /// Frames of the `g_k` at 0 and at 1 (column `k`).
    g_frames_at_zero: DMatrix<C64>,
    g_frames_at_one: DMatrix<C64>,
    chi: Vec<usize>,
    kappa: Vec<usize>,
    chi_fit: Vec<ExponentFit>,
    kappa_fit: Vec<ExponentFit>,
    mix: DMatrix<C64>,
}

/// Kernels that do not come from a differential expression need more left
/// conditions than right ones.
fn check_split(form: &OperatorForm, nbc: &NormalizedBC) -> Result<()> {
    if form.provenance() == Provenance::Raw && nbc.rank() > nbc.l() {
        return Err(Error::InvalidBoundary(format!(
            "a raw kernel needs l > N − l, got l = {} with N = {}",
            nbc.l(),
            nbc.order()
        )));
    }
    Ok(())
}

pub fn assemble_inverse(form: &OperatorForm, nbc: &NormalizedBC) -> Result<FiniteRankOperator> {
    check_split(form, nbc)?;
    let fs = fundamental_system(form)?;
    let hs = compute_homogeneous(&fs, nbc)?;
    let grid = form.grid();
    let mk = MKernel::new(fs.resolvent(), form.m(), form.n())?;
    let raw_v = raw_functional_kernels(&mk, nbc, grid)?;
    let d = nbc.rank();
    let v: Vec<SampledFunction> = (0..d)
        .map(|k| {
            let mut acc = SampledFunction::zeros(grid);
            for (j, vj) in raw_v.iter().enumerate() {
                if hs.mix[(k, j)] != zero() {
                    acc.axpy(hs.mix[(k, j)], vj)?;
                }
            }
            Ok(acc)
        })
        .collect::<Result<_>>()?;
    let big_n = form.order();
    let kappa = hs
        .leading_row
        .iter()
        .map(|&j| big_n - 1 - nbc.sigma()[nbc.l() + j])
        .collect();
    let last = grid.last();
    let m_derivatives_at_one = (0..form.n())
        .map(|k| mk.x_derivative(k, last))
        .collect::<Result<_>>()?;
    let chi_fit = hs.g.iter().map(|g| fit_endpoint_exponent(g, End::Left)).collect();
    let kappa_fit = v.iter().map(|v| fit_endpoint_exponent(v, End::Right)).collect();
    Ok(FiniteRankOperator {
        m: form.m(),
        n: form.n(),
        nbc: nbc.clone(),
        kernel: mk.kernel(),
        m_derivatives_at_one,
        g_frames_at_zero: fs.frame_matrix(0) * &hs.beta,
        g_frames_at_one: fs.frame_matrix(last) * &hs.beta,
        g: hs.g,
        v,
        chi: hs.chi.iter().map(|b| *b).collect(),
        kappa,
        chi_fit,
        kappa_fit,
        mix: hs.mix,
    })
}

impl FiniteRankOperator {
    /// Builds an operator from its parts directly. Endpoint frames of the `g_k`
    /// are left at zero, so boundary-functional queries are meaningless.
    pub fn from_parts(
        kernel: TriangularKernel,
        g: Vec<SampledFunction>,
        v: Vec<SampledFunction>,
        order: usize,
    ) -> Result<Self> {
        if g.len() != v.len() {
            return Err(Error::DimensionMismatch(format!("{} g for {} v", g.len(), v.len())));
        }
        for f in g.iter().chain(&v) {
            kernel.check_grid(f.grid())?;
        }
        let d = g.len();
        if order == 0 || d > order {
            return Err(Error::DimensionMismatch(format!("rank {d} for order {order}")));
        }
        let nbc = NormalizedBC {
            alpha: DMatrix::identity(order, order),
            sigma: (0..order).collect(),
            l: order - d,
        };
        let chi_fit = g.iter().map(|g| fit_endpoint_exponent(g, End::Left)).collect::<Vec<_>>();
        let kappa_fit = v.iter().map(|v| fit_endpoint_exponent(v, End::Right)).collect::<Vec<_>>();
        Ok(FiniteRankOperator {
            m: order,
            n: 0,
            nbc,
            kernel,
            m_derivatives_at_one: Vec::new(),
            chi: chi_fit.iter().map(|f| f.rounded).collect(),
            kappa: kappa_fit.iter().map(|f| f.rounded).collect(),
            chi_fit,
            kappa_fit,
            g,
            v,
            g_frames_at_zero: DMatrix::from_element(order, d, zero()),
            g_frames_at_one: DMatrix::from_element(order, d, zero()),
            mix: DMatrix::identity(d, d),
        })
    }

    pub fn order(&self) -> usize {
        self.m + self.n
    }

    pub fn rank(&self) -> usize {
        self.g.len()
    }

    pub fn grid(&self) -> &GridRef {
        self.kernel.grid()
    }

    pub fn kernel(&self) -> &TriangularKernel {
        &self.kernel
    }

    pub fn g(&self) -> &[SampledFunction] {
        &self.g
    }

    pub fn v(&self) -> &[SampledFunction] {
        &self.v
    }

    pub fn boundary(&self) -> &NormalizedBC {
        &self.nbc
    }

    /// Exponents at 0 of the `g_k` from their fundamental-system expansion.
    pub fn chi(&self) -> &[usize] {
        &self.chi
    }

    /// `N − 1 − σ` of the right row each `v_k` inherits its asymptotics from.
    pub fn kappa(&self) -> &[usize] {
        &self.kappa
    }

    pub fn chi_fit(&self) -> &[ExponentFit] {
        &self.chi_fit
    }

    pub fn kappa_fit(&self) -> &[ExponentFit] {
        &self.kappa_fit
    }

    pub fn mix(&self) -> &DMatrix<C64> {
        &self.mix
    }

    /// `∫₀¹ f v_k` for every `k`.
    pub fn rank_coefficients(&self, f: &SampledFunction) -> Result<Vec<C64>> {
        self.kernel.check_grid(f.grid())?;
        Ok(self
            .v
            .iter()
            .map(|v| trapezoid_pairing(f.values(), v.values(), self.grid()))
            .collect())
    }

    pub fn apply(&self, f: &SampledFunction) -> Result<SampledFunction> {
        let mut out = self.kernel.apply(f)?;
        for (g, c) in self.g.iter().zip(self.rank_coefficients(f)?) {
            out.axpy(c, g)?;
        }
        Ok(out)
    }

    /// Frame of `Af` at an endpoint.
    pub fn frame_at(&self, f: &SampledFunction, end: End) -> Result<Vec<C64>> {
        let big_n = self.order();
        let c = self.rank_coefficients(f)?;
        let (mut frame, g_frames) = match end {
            End::Left => (vec![zero(); big_n], &self.g_frames_at_zero),
            End::Right => {
                let grid = self.grid();
                let mut fr = Vec::with_capacity(big_n);
                for dm in &self.m_derivatives_at_one {
                    fr.push(trapezoid_pairing(dm.values(), f.values(), grid));
                }
                let last = grid.last();
                for k in self.n..big_n {
                    let p = big_n - 1 - k;
                    let w: C64 = (0..grid.len())
                        .map(|j| grid.segment_weight(0, last, j) * taylor_monomial(1.0 - grid.x(j), p) * f.at(j))
                        .sum();
                    fr.push(w);
                }
                (fr, &self.g_frames_at_one)
            }
        };
        for (k, ck) in c.iter().enumerate() {
            for (r, slot) in frame.iter_mut().enumerate() {
                *slot += ck * g_frames[(r, k)];
            }
        }
        Ok(frame)
    }

    /// All `N` normalized boundary functionals of `Af`.
    pub fn boundary_values(&self, f: &SampledFunction) -> Result<Vec<C64>> {
        let left = self.frame_at(f, End::Left)?;
        let right = self.frame_at(f, End::Right)?;
        Ok((0..self.order())
            .map(|j| {
                let frame = if j < self.nbc.l() { &left } else { &right };
                self.nbc.functional(j, frame)
            })
            .collect())
    }

    /// `node,g1re,g1im,…,vdre,vdim`.
    pub fn write_gv_csv<W: std::io::Write>(&self, mut w: W) -> Result<()> {
        write!(w, "node")?;
        for (prefix, count) in [("g", self.g.len()), ("v", self.v.len())] {
            for k in 1..=count {
                write!(w, ",{prefix}{k}re,{prefix}{k}im")?;
            }
        }
        writeln!(w)?;
        for i in 0..self.grid().len() {
            write!(w, "{i}")?;
            for f in self.g.iter().chain(&self.v) {
                let z = f.at(i);
                write!(w, ",{},{}", format_float(z.re), format_float(z.im))?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    /// `Ũ_k(g_j)` for the mixed right functionals; `−I` by construction.
    pub fn pairing_matrix(&self) -> DMatrix<C64> {
        let d = self.rank();
        let l = self.nbc.l();
        let raw = DMatrix::from_fn(d, d, |j, k| {
            let frame: Vec<C64> = self.g_frames_at_one.column(k).iter().copied().collect();
            self.nbc.functional(l + j, &frame)
        });
        &self.mix * raw
    }
}
