//! Nyström discretization of `A`, eigenvalues and root subspaces of `L = A⁻¹`,
//! completeness diagnostics and the hypothesis checker for the finite-rank
//! completeness criterion.
//!
//! Root functions are kept as orthonormal bases of invariant subspaces, one per
//! eigenvalue cluster; Jordan chains are never formed. Orthonormality is in the
//! trapezoid-weighted `L₂(0,1)` inner product.

use std::io::Write;

use nalgebra::{DMatrix, DVector, Schur};
use rayon::prelude::*;
use serde::Serialize;

use crate::bvp::{fit_endpoint_exponent, End, ExponentFit, FiniteRankOperator};
use crate::io::{format_float, write_functions_csv};
use crate::quadrature::{GridRef, SampledFunction};
use crate::volterra::TriangularKernel;
use crate::{factorial, Error, Result, C64};

/// Eigenvalues of the discretized `A` below this modulus are discarded.
pub const NOISE_FLOOR: f64 = 1e-10;
/// Relative distance under which eigenvalues of `A` are merged into a cluster.
pub const CLUSTER_TOLERANCE: f64 = 1e-6;
/// Half-width of the band `x − t ≤ BAND` used by the kernel checks.
pub const BAND: f64 = 0.1;
/// Kernel deviations below this are taken as exact.
pub const EXACT_DEVIATION: f64 = 1e-12;

/// Dense matrix of `A` on the grid, trapezoid weights throughout.
pub fn discretize(a: &FiniteRankOperator) -> DMatrix<C64> {
    let grid = a.grid().clone();
    let size = grid.len();
    let last = grid.last();
    let w: Vec<f64> = (0..size).map(|j| grid.segment_weight(0, last, j)).collect();
    let kernel = a.kernel();
    let rows: Vec<Vec<C64>> = (0..size)
        .into_par_iter()
        .map(|i| {
            let mut row = vec![C64::new(0.0, 0.0); size];
            for (j, slot) in row.iter_mut().enumerate().take(i + 1) {
                *slot = grid.segment_weight(0, i, j) * kernel.get(i, j);
            }
            for (g, v) in a.g().iter().zip(a.v()) {
                let gi = g.at(i);
                for (j, slot) in row.iter_mut().enumerate() {
                    *slot += gi * w[j] * v.at(j);
                }
            }
            row
        })
        .collect();
    DMatrix::from_fn(size, size, |i, j| rows[i][j])
}

/// One group of numerically coincident eigenvalues.
#[derive(Debug, Clone)]
pub struct Cluster {
    /// Eigenvalue of `L`, the reciprocal of the cluster mean of `A`'s.
    pub lambda: C64,
    pub mu: C64,
    pub multiplicity: usize,
    /// Weighted-orthonormal basis of the invariant subspace.
    pub basis: Vec<SampledFunction>,
    /// `‖AΦ − ΦB‖/‖Φ‖` with `B` the restriction of `A` to the subspace.
    pub residual: f64,
}

#[derive(Debug, Clone)]
pub struct SpectralResult {
    grid: GridRef,
    clusters: Vec<Cluster>,
}

impl SpectralResult {
    pub fn grid(&self) -> &GridRef {
        &self.grid
    }

    pub fn clusters(&self) -> &[Cluster] {
        &self.clusters
    }

    /// Sorted by modulus, one per cluster.
    pub fn eigenvalues(&self) -> Vec<C64> {
        self.clusters.iter().map(|c| c.lambda).collect()
    }

    pub fn residuals(&self) -> Vec<f64> {
        self.clusters.iter().map(|c| c.residual).collect()
    }

    /// All cluster bases concatenated in eigenvalue order.
    pub fn root_functions(&self) -> Vec<&SampledFunction> {
        self.clusters.iter().flat_map(|c| c.basis.iter()).collect()
    }

    pub fn write_eigenvalues_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "index,re,im,multiplicity,residual")?;
        for (k, c) in self.clusters.iter().enumerate() {
            writeln!(
                w,
                "{},{},{},{},{}",
                k + 1,
                format_float(c.lambda.re),
                format_float(c.lambda.im),
                c.multiplicity,
                format_float(c.residual)
            )?;
        }
        Ok(())
    }

    /// Columns `c<cluster>_<member>`, node-major.
    pub fn write_rootfns_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut names = Vec::new();
        let mut functions = Vec::new();
        for (k, c) in self.clusters.iter().enumerate() {
            for (j, f) in c.basis.iter().enumerate() {
                names.push(format!("c{}_{}", k + 1, j + 1));
                functions.push(f);
            }
        }
        if functions.is_empty() {
            let mut w = w;
            writeln!(w, "node,x")?;
            for (i, &x) in self.grid.nodes().iter().enumerate() {
                writeln!(w, "{i},{}", format_float(x))?;
            }
            return Ok(());
        }
        write_functions_csv(w, &names, &functions)
    }
}

/// `(c, s)` with `[c s; −s̄ c]·[f; g] = [r; 0]`, `c` real.
fn givens(f: C64, g: C64) -> (f64, C64) {
    if g.norm() == 0.0 {
        return (1.0, C64::new(0.0, 0.0));
    }
    if f.norm() == 0.0 {
        return (0.0, g.conj() / g.norm());
    }
    let norm = f.norm().hypot(g.norm());
    (f.norm() / norm, (f / f.norm()) * g.conj() / norm)
}

/// `x ← c·x + s·y`, `y ← c·y − s̄·x` elementwise.
fn rotate(x: &mut [C64], y: &mut [C64], c: f64, s: C64) {
    for (a, b) in x.iter_mut().zip(y.iter_mut()) {
        let t = c * *a + s * *b;
        *b = c * *b - s.conj() * *a;
        *a = t;
    }
}

/// Swaps diagonal entries `k` and `k+1` of the upper-triangular `t`, updating
/// the Schur vectors `q`.
fn swap_adjacent(t: &mut DMatrix<C64>, q: &mut DMatrix<C64>, k: usize) {
    let size = t.nrows();
    let (t11, t22) = (t[(k, k)], t[(k + 1, k + 1)]);
    let (c, s) = givens(t[(k, k + 1)], t22 - t11);
    if k + 2 < size {
        let mut a: Vec<C64> = (k + 2..size).map(|j| t[(k, j)]).collect();
        let mut b: Vec<C64> = (k + 2..size).map(|j| t[(k + 1, j)]).collect();
        rotate(&mut a, &mut b, c, s);
        for (idx, j) in (k + 2..size).enumerate() {
            t[(k, j)] = a[idx];
            t[(k + 1, j)] = b[idx];
        }
    }
    let mut a: Vec<C64> = (0..k).map(|i| t[(i, k)]).collect();
    let mut b: Vec<C64> = (0..k).map(|i| t[(i, k + 1)]).collect();
    rotate(&mut a, &mut b, c, s.conj());
    for i in 0..k {
        t[(i, k)] = a[i];
        t[(i, k + 1)] = b[i];
    }
    t[(k, k)] = t22;
    t[(k + 1, k + 1)] = t11;
    t[(k + 1, k)] = C64::new(0.0, 0.0);
    let mut a: Vec<C64> = q.column(k).iter().copied().collect();
    let mut b: Vec<C64> = q.column(k + 1).iter().copied().collect();
    rotate(&mut a, &mut b, c, s.conj());
    q.set_column(k, &DVector::from_vec(a));
    q.set_column(k + 1, &DVector::from_vec(b));
}

/// Solves `A₁₁X − XA₂₂ = −A₁₂` for upper-triangular `A₁₁`, `A₂₂`.
fn triangular_sylvester(a11: &DMatrix<C64>, a22: &DMatrix<C64>, a12: &DMatrix<C64>) -> DMatrix<C64> {
    let (s, p) = (a11.nrows(), a22.nrows());
    let mut x = DMatrix::from_element(s, p, C64::new(0.0, 0.0));
    for c in 0..p {
        let mut rhs: Vec<C64> = (0..s).map(|i| -a12[(i, c)]).collect();
        for r in 0..c {
            for i in 0..s {
                rhs[i] += x[(i, r)] * a22[(r, c)];
            }
        }
        let shift = a22[(c, c)];
        for i in (0..s).rev() {
            let mut acc = rhs[i];
            for j in i + 1..s {
                acc -= a11[(i, j)] * x[(j, c)];
            }
            x[(i, c)] = acc / (a11[(i, i)] - shift);
        }
    }
    x
}

fn sqrt_weights(grid: &GridRef) -> Vec<f64> {
    let last = grid.last();
    (0..grid.len()).map(|j| grid.segment_weight(0, last, j).sqrt()).collect()
}

/// Weighted-orthonormal basis of the column span of `v`, rank-revealing.
fn weighted_orthonormal(v: &DMatrix<C64>, sw: &[f64]) -> DMatrix<C64> {
    let scaled = DMatrix::from_fn(v.nrows(), v.ncols(), |i, j| v[(i, j)] * sw[i]);
    let svd = scaled.svd(true, false);
    let u = svd.u.expect("left vectors requested");
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let keep: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&k| svd.singular_values[k] > 1e-12 * smax)
        .collect();
    DMatrix::from_fn(v.nrows(), keep.len(), |i, k| u[(i, keep[k])])
}

/// Groups indices whose values agree to `CLUSTER_TOLERANCE` (transitively).
fn cluster_indices(mu: &[(usize, C64)]) -> Vec<Vec<usize>> {
    let mut parent: Vec<usize> = (0..mu.len()).collect();
    fn find(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    for a in 0..mu.len() {
        for b in a + 1..mu.len() {
            let (x, y) = (mu[a].1, mu[b].1);
            if (x - y).norm() <= CLUSTER_TOLERANCE * x.norm().max(y.norm()) {
                let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
                parent[ra.max(rb)] = ra.min(rb);
            }
        }
    }
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut root_slot = vec![usize::MAX; mu.len()];
    for a in 0..mu.len() {
        let r = find(&mut parent, a);
        if root_slot[r] == usize::MAX {
            root_slot[r] = groups.len();
            groups.push(Vec::new());
        }
        groups[root_slot[r]].push(mu[a].0);
    }
    groups
}

/// The `count` clusters of smallest `|λ|` with invariant-subspace bases.
pub fn spectrum(a: &FiniteRankOperator, count: usize) -> Result<SpectralResult> {
    let d = discretize(a);
    spectrum_of_matrix(&d, a.grid(), count)
}

/// As [`spectrum`], for an already discretized operator on `grid`.
pub fn spectrum_of_matrix(d: &DMatrix<C64>, grid: &GridRef, count: usize) -> Result<SpectralResult> {
    let size = d.nrows();
    if d.ncols() != size || size != grid.len() {
        return Err(Error::DimensionMismatch(format!(
            "{}×{} matrix on a {}-node grid",
            d.nrows(),
            d.ncols(),
            grid.len()
        )));
    }
    let schur = Schur::try_new(d.clone(), 1e-15, 100 * size.max(10)).ok_or(Error::EigenSolver)?;
    let (mut q, mut t) = schur.unpack();
    for i in 0..size {
        for j in 0..i {
            t[(i, j)] = C64::new(0.0, 0.0);
        }
    }

    let mut candidates: Vec<(usize, C64)> = (0..size)
        .map(|i| (i, t[(i, i)]))
        .filter(|(_, m)| m.norm() > NOISE_FLOOR && m.re.is_finite() && m.im.is_finite())
        .collect();
    candidates.sort_by(|a, b| b.1.norm().total_cmp(&a.1.norm()).then(a.0.cmp(&b.0)));
    let mut groups = cluster_indices(&candidates);
    let mean = |g: &Vec<usize>, t: &DMatrix<C64>| -> C64 {
        g.iter().map(|&i| t[(i, i)]).sum::<C64>() / g.len() as f64
    };
    groups.sort_by(|a, b| mean(b, &t).norm().total_cmp(&mean(a, &t).norm()));
    groups.truncate(count);
    let mus: Vec<C64> = groups.iter().map(|g| mean(g, &t)).collect();

    // Bring the selected eigenvalues to the top, cluster by cluster.
    let mut label: Vec<Option<usize>> = vec![None; size];
    for (c, g) in groups.iter().enumerate() {
        for &i in g {
            label[i] = Some(c);
        }
    }
    let mut pos = 0;
    let mut spans = Vec::with_capacity(groups.len());
    for (c, g) in groups.iter().enumerate() {
        let start = pos;
        for _ in 0..g.len() {
            let from = (pos..size).find(|&i| label[i] == Some(c)).expect("cluster member present");
            for k in (pos..from).rev() {
                swap_adjacent(&mut t, &mut q, k);
                label.swap(k, k + 1);
            }
            pos += 1;
        }
        spans.push(start..pos);
    }

    let sw = sqrt_weights(grid);
    let clusters = spans
        .into_par_iter()
        .zip(mus.into_par_iter())
        .map(|(span, mu)| {
            let (s, p) = (span.start, span.len());
            let a22 = t.view((s, s), (p, p)).clone_owned();
            let mut coords = DMatrix::from_element(size, p, C64::new(0.0, 0.0));
            coords.view_mut((s, 0), (p, p)).copy_from(&DMatrix::identity(p, p));
            if s > 0 {
                let a11 = t.view((0, 0), (s, s)).clone_owned();
                let a12 = t.view((0, s), (s, p)).clone_owned();
                coords
                    .view_mut((0, 0), (s, p))
                    .copy_from(&triangular_sylvester(&a11, &a22, &a12));
            }
            let vectors = &q * coords;
            let ortho = weighted_orthonormal(&vectors, &sw);
            let phi = DMatrix::from_fn(size, ortho.ncols(), |i, k| ortho[(i, k)] / sw[i]);
            let dphi = d * &phi;
            let residual = if phi.ncols() == 1 {
                weighted_norm(&(&dphi - &phi * mu), &sw)
            } else {
                let weighted = DMatrix::from_fn(size, phi.ncols(), |i, k| phi[(i, k)] * sw[i] * sw[i]);
                let b = weighted.adjoint() * &dphi;
                weighted_norm(&(&dphi - &phi * b), &sw) / (phi.ncols() as f64).sqrt()
            };
            let basis = (0..phi.ncols())
                .map(|k| SampledFunction::new(grid.clone(), phi.column(k).iter().copied().collect()))
                .collect::<Result<Vec<_>>>()?;
            Ok(Cluster {
                lambda: C64::new(1.0, 0.0) / mu,
                mu,
                multiplicity: p,
                basis,
                residual,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SpectralResult {
        grid: grid.clone(),
        clusters,
    })
}

fn weighted_norm(m: &DMatrix<C64>, sw: &[f64]) -> f64 {
    m.row_iter()
        .zip(sw)
        .map(|(row, w)| row.iter().map(|v| v.norm_sqr()).sum::<f64>() * w * w)
        .sum::<f64>()
        .sqrt()
}

fn weighted_columns(functions: &[&SampledFunction], sw: &[f64]) -> DMatrix<C64> {
    DMatrix::from_fn(sw.len(), functions.len(), |i, k| functions[k].at(i) * sw[i])
}

/// Distance from `f` to the span of the first `m` root functions, for each `m`.
pub fn completeness_residual(result: &SpectralResult, f: &SampledFunction, m_values: &[usize]) -> Result<Vec<f64>> {
    let roots = result.root_functions();
    let grid = result.grid();
    if !crate::quadrature::same_grid(f.grid(), grid) {
        return Err(Error::GridMismatch);
    }
    let sw = sqrt_weights(grid);
    let ones = vec![1.0; sw.len()];
    let target = DVector::from_fn(sw.len(), |i, _| f.at(i) * sw[i]);
    m_values
        .iter()
        .map(|&m| {
            if m > roots.len() {
                return Err(Error::BasisTooSmall {
                    requested: m,
                    available: roots.len(),
                });
            }
            if m == 0 {
                return Ok(target.norm());
            }
            let basis = weighted_orthonormal(&weighted_columns(&roots[..m], &sw), &ones);
            let projection = &basis * (basis.adjoint() * &target);
            Ok((&target - projection).norm())
        })
        .collect()
}

/// Principal angles between two spans of sampled functions, ascending.
pub fn principal_angles(a: &[&SampledFunction], b: &[&SampledFunction]) -> Result<Vec<f64>> {
    let Some(first) = a.first().or(b.first()) else {
        return Ok(Vec::new());
    };
    for f in a.iter().chain(b) {
        first.check_grid(f)?;
    }
    let sw = sqrt_weights(first.grid());
    let ones = vec![1.0; sw.len()];
    let qa = weighted_orthonormal(&weighted_columns(a, &sw), &ones);
    let qb = weighted_orthonormal(&weighted_columns(b, &sw), &ones);
    let sv = (qa.adjoint() * qb).svd(false, false).singular_values;
    let mut angles: Vec<f64> = sv.iter().map(|s| s.min(1.0).acos()).collect();
    angles.sort_by(f64::total_cmp);
    Ok(angles)
}

/// Fit of `|M(x,t) − (x−t)^{N−1}/(N−1)!|` against `x − t` on the band.
#[derive(Debug, Clone, Serialize)]
pub struct KernelAsymptotics {
    /// Log-log slope; `None` when the deviation is exact zero to rounding.
    pub fitted_exponent: Option<f64>,
    pub max_deviation: f64,
    pub exact: bool,
    pub required: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct EndpointExponents {
    /// Exponents read off the construction, when known.
    pub structural: Vec<usize>,
    pub fits: Vec<ExponentFit>,
    pub distinct: bool,
    pub in_range: bool,
    pub flagged: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct SmoothnessProbe {
    /// Largest forward-difference estimate of `∂ₓᵃ∂ₜᵇM`, `a + b ≤ N`, on the band.
    pub max_mixed_difference: f64,
    pub bounded: bool,
    pub note: &'static str,
}

/// Hypothesis check for completeness of the root functions of `A`. Pure data.
#[derive(Debug, Clone, Serialize)]
pub struct KhromovReport {
    pub order: usize,
    pub rank: usize,
    pub rank_condition: bool,
    pub m_asymptotic: KernelAsymptotics,
    pub chi: EndpointExponents,
    pub kappa: EndpointExponents,
    pub amplitudes_nonzero: bool,
    pub smoothness_probe: SmoothnessProbe,
    pub applicable: bool,
    pub messages: Vec<String>,
}

fn kernel_asymptotics(kernel: &TriangularKernel, order: usize) -> KernelAsymptotics {
    let grid = kernel.grid();
    let h = grid.step();
    let band = ((BAND / h).floor() as usize).min(grid.last()).max(1);
    let lead = |s: f64| s.powi(order as i32 - 1) / factorial(order - 1);
    let deviation: Vec<(f64, f64)> = (1..=band)
        .map(|k| {
            let s = k as f64 * h;
            let dev = (k..grid.len())
                .map(|i| (kernel.get(i, i - k) - lead(s)).norm())
                .fold(0.0, f64::max);
            (s, dev)
        })
        .collect();
    let max_deviation = deviation.iter().map(|p| p.1).fold(0.0, f64::max);
    let required = order as f64 - 0.3;
    if max_deviation <= EXACT_DEVIATION {
        return KernelAsymptotics {
            fitted_exponent: None,
            max_deviation,
            exact: true,
            required,
            pass: true,
        };
    }
    let pts: Vec<(f64, f64)> = deviation
        .iter()
        .filter(|p| p.1 > 0.0)
        .map(|&(s, v)| (s.ln(), v.ln()))
        .collect();
    let slope = if pts.len() < 2 {
        f64::NAN
    } else {
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        sxy / sxx
    };
    KernelAsymptotics {
        fitted_exponent: Some(slope),
        max_deviation,
        exact: false,
        required,
        pass: slope > required,
    }
}

fn smoothness_probe(kernel: &TriangularKernel, order: usize) -> SmoothnessProbe {
    let grid = kernel.grid();
    let h = grid.step();
    let size = grid.len();
    let band = ((BAND / h).floor() as usize).max(1);
    let stride = (size / 50).max(1);
    let mut worst = 0.0f64;
    for total in 1..=order {
        for a in 0..=total {
            let b = total - a;
            for i in (0..size).step_by(stride) {
                for j in (0..=i).step_by(stride) {
                    if i - j > band || i + a >= size || j + b > i {
                        continue;
                    }
                    let mut acc = C64::new(0.0, 0.0);
                    for p in 0..=a {
                        for r in 0..=b {
                            let sign = if (a - p + b - r) % 2 == 0 { 1.0 } else { -1.0 };
                            let coef = sign * crate::binomial(a as i64, p as i64) * crate::binomial(b as i64, r as i64);
                            acc += coef * kernel.get(i + p, j + r);
                        }
                    }
                    worst = worst.max(acc.norm() / h.powi(total as i32));
                }
            }
        }
    }
    SmoothnessProbe {
        max_mixed_difference: worst,
        bounded: worst.is_finite() && worst < 1e6,
        note: "finite-difference probe; indicative only",
    }
}

fn endpoint_exponents(structural: &[usize], fits: Vec<ExponentFit>, order: usize) -> EndpointExponents {
    let rounded: Vec<usize> = fits.iter().map(|f| f.rounded).collect();
    let distinct = rounded
        .iter()
        .enumerate()
        .all(|(i, r)| !rounded[i + 1..].contains(r));
    let in_range = rounded.iter().all(|&r| r < order);
    let flagged = fits.iter().any(|f| f.flagged);
    EndpointExponents {
        structural: structural.to_vec(),
        fits,
        distinct,
        in_range,
        flagged,
    }
}

pub fn check_khromov(a: &FiniteRankOperator, order: usize) -> KhromovReport {
    let rank = a.rank();
    let rank_condition = 2 * rank < order;
    let m_asymptotic = kernel_asymptotics(a.kernel(), order.max(1));
    let chi_fits: Vec<ExponentFit> = a.g().iter().map(|g| fit_endpoint_exponent(g, End::Left)).collect();
    let kappa_fits: Vec<ExponentFit> = a.v().iter().map(|v| fit_endpoint_exponent(v, End::Right)).collect();
    let amplitudes_nonzero = kappa_fits.iter().all(|f| f.amplitude.norm() > 1e-8);
    let chi = endpoint_exponents(a.chi(), chi_fits, order);
    let kappa = endpoint_exponents(a.kappa(), kappa_fits, order);
    let smoothness_probe = smoothness_probe(a.kernel(), order.max(1));

    let mut messages = Vec::new();
    if !rank_condition {
        messages.push(format!("2d < N fails (d = {rank}, N = {order}); the completeness criterion is inapplicable"));
    }
    if !m_asymptotic.pass {
        messages.push(format!(
            "kernel deviates from (x−t)^(N−1)/(N−1)! at order {:.3}, need > {:.1}",
            m_asymptotic.fitted_exponent.unwrap_or(f64::NAN),
            m_asymptotic.required
        ));
    }
    for (name, e) in [("chi", &chi), ("kappa", &kappa)] {
        if !e.distinct {
            messages.push(format!("{name} exponents are not distinct"));
        }
        if !e.in_range {
            messages.push(format!("{name} exponents exceed N − 1"));
        }
        if e.flagged {
            messages.push(format!("{name} fit is far from an integer"));
        }
    }
    if !amplitudes_nonzero {
        messages.push("a vanishing amplitude a_k".into());
    }
    let applicable = rank_condition
        && m_asymptotic.pass
        && chi.distinct
        && chi.in_range
        && !chi.flagged
        && kappa.distinct
        && kappa.in_range
        && !kappa.flagged
        && amplitudes_nonzero;
    KhromovReport {
        order,
        rank,
        rank_condition,
        m_asymptotic,
        chi,
        kappa,
        amplitudes_nonzero,
        smoothness_probe,
        applicable,
        messages,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bvp::{assemble_inverse, normalize_bc, BoundaryConditions};
    use crate::coefficients::{FunctionDescriptor, PolynomialCoefficientSpec};
    use crate::quadrature::{make_grid, Scheme};
    use crate::reduction::build_polynomial;

    fn c(v: f64) -> C64 {
        C64::new(v, 0.0)
    }

    fn jackson(points: usize) -> FiniteRankOperator {
        let grid = make_grid(points, Scheme::UniformTrapezoid).unwrap();
        let spec = PolynomialCoefficientSpec::new(3, vec![FunctionDescriptor::zero(); 2]).unwrap();
        let form = build_polynomial(&spec, &grid).unwrap();
        let one = c(1.0);
        let z = c(0.0);
        let bc = BoundaryConditions::from_rows(&[vec![one, z, z], vec![z, one, z], vec![one, z, z]], 2).unwrap();
        assemble_inverse(&form, &normalize_bc(&bc).unwrap()).unwrap()
    }

    #[test]
    fn rank_one_discretization() {
        let grid = make_grid(11, Scheme::UniformTrapezoid).unwrap();
        let one = SampledFunction::constant(&grid, c(1.0));
        let a = FiniteRankOperator::from_parts(TriangularKernel::zeros(&grid), vec![one.clone()], vec![one], 2).unwrap();
        let d = discretize(&a);
        let w = grid.trapezoid_weights();
        for i in 0..11 {
            for j in 0..11 {
                assert!((d[(i, j)] - w[j]).norm() < 1e-15);
            }
        }
        let result = spectrum(&a, 5).unwrap();
        assert_eq!(result.clusters().len(), 1);
        assert!((result.eigenvalues()[0] - 1.0).norm() < 1e-12);
    }

    #[test]
    fn jackson_matrix_action() {
        let a = jackson(201);
        let d = discretize(&a);
        let grid = a.grid();
        let f = DVector::from_element(grid.len(), c(1.0));
        let af = d * f;
        for (i, &x) in grid.nodes().iter().enumerate() {
            assert!((af[i] - (x.powi(3) / 6.0 - x * x / 6.0)).norm() < 1e-4);
        }
    }

    #[test]
    fn schur_swap_preserves_similarity() {
        let m = DMatrix::from_fn(6, 6, |i, j| C64::new(((i * 7 + j * 3) % 5) as f64 - 2.0, (i as f64 - j as f64) * 0.1));
        let (mut q, mut t) = Schur::new(m.clone()).unpack();
        for i in 0..6 {
            for j in 0..i {
                t[(i, j)] = c(0.0);
            }
        }
        let before: Vec<C64> = (0..6).map(|i| t[(i, i)]).collect();
        swap_adjacent(&mut t, &mut q, 2);
        assert!((t[(2, 2)] - before[3]).norm() < 1e-12);
        assert!((t[(3, 3)] - before[2]).norm() < 1e-12);
        let back = &q * &t * q.adjoint();
        assert!((back - m).camax() < 1e-10);
    }

    #[test]
    fn sylvester_solution() {
        let a11 = DMatrix::from_row_slice(2, 2, &[c(1.0), c(2.0), c(0.0), c(3.0)]);
        let a22 = DMatrix::from_row_slice(2, 2, &[c(-1.0), c(0.5), c(0.0), c(-2.0)]);
        let a12 = DMatrix::from_row_slice(2, 2, &[c(1.0), c(-1.0), c(4.0), c(0.25)]);
        let x = triangular_sylvester(&a11, &a22, &a12);
        let lhs = &a11 * &x - &x * &a22;
        assert!((lhs + a12).camax() < 1e-13);
    }

    #[test]
    fn completeness_trivial_cases() {
        let a = jackson(101);
        let result = spectrum(&a, 4).unwrap();
        let first = result.root_functions()[0].clone();
        let r = completeness_residual(&result, &first, &[0, 1, 2]).unwrap();
        assert!((r[0] - 1.0).abs() < 1e-10);
        assert!(r[1] < 1e-10 && r[2] < 1e-10);
        assert!(matches!(
            completeness_residual(&result, &first, &[100]),
            Err(Error::BasisTooSmall { .. })
        ));
    }

    #[test]
    fn principal_angles_of_equal_spans() {
        let grid = make_grid(21, Scheme::UniformTrapezoid).unwrap();
        let f = SampledFunction::from_real_fn(&grid, |x| x);
        let g = SampledFunction::from_real_fn(&grid, |x| 1.0 + x);
        let h = SampledFunction::from_real_fn(&grid, |_| 2.0);
        let angles = principal_angles(&[&f, &g], &[&h, &f]).unwrap();
        assert!(angles.iter().all(|a| *a < 1e-7));
        let orth = SampledFunction::from_real_fn(&grid, |x| x - 0.5);
        let angle = principal_angles(&[&h], &[&orth]).unwrap();
        assert!((angle[0] - std::f64::consts::FRAC_PI_2).abs() < 1e-7);
    }

    #[test]
    fn jackson_report() {
        let a = jackson(401);
        let r = check_khromov(&a, 3);
        assert!(r.rank_condition);
        assert!(r.m_asymptotic.pass && r.m_asymptotic.exact);
        assert_eq!(r.chi.fits[0].rounded, 2);
        assert_eq!(r.kappa.fits[0].rounded, 2);
        assert!((r.kappa.fits[0].amplitude - 0.5).norm() < 1e-3);
        assert!(r.applicable);
        serde_json::to_string(&r).unwrap();
    }

    #[test]
    fn report_rejects_large_rank_and_wrong_order() {
        let grid = make_grid(201, Scheme::UniformTrapezoid).unwrap();
        let g1 = SampledFunction::from_real_fn(&grid, |x| x);
        let g2 = SampledFunction::from_real_fn(&grid, |x| x * x);
        let v1 = SampledFunction::from_real_fn(&grid, |t| 1.0 - t);
        let v2 = SampledFunction::from_real_fn(&grid, |t| (1.0 - t).powi(2));
        let wrong = TriangularKernel::from_fn(&grid, |x, t| c(x - t));
        let a = FiniteRankOperator::from_parts(wrong, vec![g1, g2], vec![v1, v2], 3).unwrap();
        let r = check_khromov(&a, 3);
        assert!(!r.rank_condition);
        assert!(!r.m_asymptotic.pass);
        assert!(!r.applicable);
    }
}
