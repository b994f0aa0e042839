mod common;

use common::*;
use proptest::prelude::*;
use vspectra::bvp::FiniteRankOperator;
use vspectra::quadrature::{inner_product, SampledFunction};
use vspectra::spectral::{check_khromov, completeness_residual, discretize, spectrum};
use vspectra::volterra::TriangularKernel;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn rank_one_operator_has_one_eigenvalue(a in 0.5..2.0f64, b in -1.0..1.0f64, p in 0.5..2.0f64) {
        let g = grid(41);
        let gf = SampledFunction::from_real_fn(&g, |x| a + b * x);
        let vf = SampledFunction::from_real_fn(&g, |t| p + t * t);
        let op = FiniteRankOperator::from_parts(TriangularKernel::zeros(&g), vec![gf.clone()], vec![vf.clone()], 2).unwrap();
        let d = discretize(&op);
        let w = g.trapezoid_weights();
        let pairing: f64 = (0..g.len()).map(|j| w[j] * (p + g.x(j).powi(2)) * (a + b * g.x(j))).sum();
        let result = spectrum(&op, 4).unwrap();
        prop_assert_eq!(result.clusters().len(), 1);
        prop_assert!((result.eigenvalues()[0] - 1.0 / pairing).norm() < 1e-10 / pairing.abs().min(1.0));
        prop_assert!(result.clusters()[0].residual < 1e-12);
        prop_assert!(d.nrows() == g.len());
    }
}

#[test]
fn residuals_and_ordering() {
    let result = spectrum(&jackson(201), 8).unwrap();
    let lambdas = result.eigenvalues();
    assert!(lambdas.windows(2).all(|w| w[0].norm() <= w[1].norm()));
    assert!(result.residuals().iter().all(|r| *r < 1e-6));
}

#[test]
fn bases_are_weighted_orthonormal() {
    let result = spectrum(&jackson(201), 4).unwrap();
    for f in result.root_functions() {
        assert!((inner_product(f, f).unwrap().re - 1.0).abs() < 1e-10);
    }
}

#[test]
fn residual_curve_is_monotone() {
    let a = jackson(201);
    let result = spectrum(&a, 20).unwrap();
    let f = SampledFunction::from_real_fn(a.grid(), |x| (3.0 * x).sin() + x);
    let r = completeness_residual(&result, &f, &[0, 2, 4, 8, 16]).unwrap();
    assert!(r.windows(2).all(|w| w[1] <= w[0] + 1e-12));
}

#[test]
fn report_flags_rank_and_serializes() {
    let g = grid(101);
    let one = SampledFunction::from_real_fn(&g, |x| 1.0 + x);
    let two = SampledFunction::from_real_fn(&g, |x| x * x);
    let k = TriangularKernel::from_fn(&g, |x, t| c((x - t).powi(2) / 2.0));
    let op = FiniteRankOperator::from_parts(k, vec![one.clone(), two.clone()], vec![two, one], 3).unwrap();
    let report = check_khromov(&op, 3);
    assert!(!report.rank_condition);
    assert!(report.messages.iter().any(|m| m.contains("inapplicable")));
    let json = serde_json::to_value(&report).unwrap();
    assert_eq!(json["rank"], 2);
}
