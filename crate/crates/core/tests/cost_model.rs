mod common;

use common::*;
use orthnewton::cost::{kurtosis, Contrast, SampleMatrix};
use orthnewton::group::SkewCoordinates;
use orthnewton::newton::model_value;

fn directional_gradient_check(cost: &dyn Contrast, y: &SampleMatrix, seed: u64) -> f64 {
    let eval = cost.evaluate(y).unwrap();
    let delta = random_skew(y.n(), seed);
    let analytic = (delta.matrix() * &eval.r).trace();
    let eps = 1e-5;
    let fd = (cost_after(cost, y, &delta.scale(eps)) - cost_after(cost, y, &delta.scale(-eps))) / (2.0 * eps);
    (fd - analytic).abs() / analytic.abs().max(1e-300)
}

#[test]
fn gradient_matches_central_differences() {
    for (name, cost) in cost_families() {
        for &n in &[3, 4] {
            for seed in 0..5 {
                let y = whitened_data(n, 3000, 40 + seed);
                let rel = directional_gradient_check(cost.as_ref(), &y, seed);
                assert!(rel < 1e-5, "{name} n={n} seed={seed}: {rel}");
            }
        }
    }
}

#[test]
fn gradient_on_unwhitened_data() {
    for (name, cost) in cost_families() {
        let y = raw_data(3, 500, 12);
        let rel = directional_gradient_check(cost.as_ref(), &y, 5);
        assert!(rel < 1e-5, "{name}: {rel}");
    }
}

fn remainder(cost: &dyn Contrast, y: &SampleMatrix, delta: &SkewCoordinates) -> f64 {
    let eval = cost.evaluate(y).unwrap();
    cost_after(cost, y, delta) - model_value(&eval, delta)
}

#[test]
fn second_order_model_error_is_cubic() {
    for (name, cost) in cost_families() {
        for &n in &[3, 4] {
            let y = whitened_data(n, 3000, 90 + n as u64);
            let dir = random_skew(n, 17);
            let delta = dir.scale(2e-3 / dir.norm());
            let ratio = remainder(cost.as_ref(), &y, &delta.scale(0.5)) / remainder(cost.as_ref(), &y, &delta);
            assert!((ratio - 0.125).abs() <= 0.2 * 0.125, "{name} n={n}: ratio {ratio}");
        }
    }
}

#[test]
fn quadratic_cost_statistics_are_second_moments() {
    use orthnewton::cost::{Polynomial, SeparableCost};
    let y = raw_data(3, 200, 3);
    let eval = SeparableCost::uniform("half-square", Polynomial::new(vec![0.0, 0.0, 0.5])).evaluate(&y).unwrap();
    let m = y.matrix();
    let second = m * m.transpose() / y.t() as f64;
    assert!((&eval.r - &second).abs().max() < 1e-13);
    for u in &eval.u {
        assert!((u - &second).abs().max() < 1e-13);
    }
}

#[test]
fn kurtosis_of_standard_shapes() {
    let two_point: Vec<f64> = (0..1000).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
    assert!((kurtosis(&two_point).unwrap() + 2.0).abs() < 1e-12);
    let grid: Vec<f64> = (0..100_000).map(|i| (i as f64 + 0.5) / 100_000.0 - 0.5).collect();
    assert!((kurtosis(&grid).unwrap() + 1.2).abs() < 1e-6);
}
