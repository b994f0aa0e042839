#![allow(dead_code)]

use vspectra::bvp::{assemble_inverse, normalize_bc, BoundaryConditions, FiniteRankOperator};
use vspectra::coefficients::{EvenCoefficientSpec, FunctionDescriptor, PolynomialCoefficientSpec};
use vspectra::quadrature::{make_grid, GridRef, Scheme};
use vspectra::reduction::{build_even, build_polynomial, OperatorForm};
use vspectra::C64;

pub fn c(v: f64) -> C64 {
    C64::new(v, 0.0)
}

pub fn grid(points: usize) -> GridRef {
    make_grid(points, Scheme::UniformTrapezoid).unwrap()
}

/// `y^(N)` with all lower coefficients zero, `N ≥ 3`.
pub fn pure_derivative(order: usize, points: usize) -> OperatorForm {
    let spec = PolynomialCoefficientSpec::new(order, vec![FunctionDescriptor::zero(); order - 1]).unwrap();
    build_polynomial(&spec, &grid(points)).unwrap()
}

/// `y(0) = y′(0) = 0`, `y(1) = 0`.
pub fn jackson_bc() -> BoundaryConditions {
    let (one, z) = (c(1.0), c(0.0));
    BoundaryConditions::from_rows(&[vec![one, z, z], vec![z, one, z], vec![one, z, z]], 2).unwrap()
}

pub fn jackson_form(points: usize) -> OperatorForm {
    pure_derivative(3, points)
}

pub fn inverse(form: &OperatorForm, bc: &BoundaryConditions) -> FiniteRankOperator {
    assemble_inverse(form, &normalize_bc(bc).unwrap()).unwrap()
}

pub fn jackson(points: usize) -> FiniteRankOperator {
    inverse(&jackson_form(points), &jackson_bc())
}

/// `y(0) = 0`, `y(1) = 0` for `y″`.
pub fn dirichlet(points: usize) -> FiniteRankOperator {
    let (one, z) = (c(1.0), c(0.0));
    let bc = BoundaryConditions::from_rows(&[vec![one, z], vec![one, z]], 1).unwrap();
    let spec = EvenCoefficientSpec::with_p(1, vec![FunctionDescriptor::zero()]).unwrap();
    inverse(&build_even(&spec, &grid(points)).unwrap(), &bc)
}

/// `y(1; λ)` for `y‴ = λy`, `y(0) = y′(0) = 0`, `y″(0) = 1`, by classical RK4.
pub fn shoot(lambda: C64, steps: usize) -> C64 {
    let h = 1.0 / steps as f64;
    let rhs = |y: [C64; 3]| [y[1], y[2], lambda * y[0]];
    let mut y = [c(0.0), c(0.0), c(1.0)];
    let axpy = |y: [C64; 3], k: [C64; 3], s: f64| [y[0] + k[0] * s, y[1] + k[1] * s, y[2] + k[2] * s];
    for _ in 0..steps {
        let k1 = rhs(y);
        let k2 = rhs(axpy(y, k1, h / 2.0));
        let k3 = rhs(axpy(y, k2, h / 2.0));
        let k4 = rhs(axpy(y, k3, h));
        for i in 0..3 {
            y[i] += (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]) * (h / 6.0);
        }
    }
    y[0]
}

/// Complex Newton on `λ ↦ y(1; λ)` with a central-difference derivative.
pub fn shooting_eigenvalue(guess: C64) -> C64 {
    let steps = 4000;
    let mut lambda = guess;
    for _ in 0..60 {
        let delta = 1e-6 * lambda.norm().max(1.0);
        let f = shoot(lambda, steps);
        let df = (shoot(lambda + delta, steps) - shoot(lambda - delta, steps)) / (2.0 * delta);
        let step = f / df;
        lambda -= step;
        if step.norm() <= 1e-13 * lambda.norm() {
            break;
        }
    }
    lambda
}

/// Relative error `|a − b|/|b|`.
pub fn rel(a: C64, b: C64) -> f64 {
    (a - b).norm() / b.norm()
}
