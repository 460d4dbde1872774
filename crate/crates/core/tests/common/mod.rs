#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use orthnewton::cost::{make_neg_kurtosis, make_neg_kurtosis_squared, Contrast, SampleMatrix};
use orthnewton::group::{expm_skew, SkewCoordinates};
use orthnewton::ica::{prewhiten, SourceKind, SyntheticProblem};
use rand::{Rng, SeedableRng};

/// Whitened mixture of non-Gaussian sources, `n` channels.
pub fn whitened_data(n: usize, t: usize, seed: u64) -> SampleMatrix {
    let kinds: Vec<SourceKind> = (0..n)
        .map(|i| [SourceKind::Uniform, SourceKind::Laplace, SourceKind::TwoPoint][i % 3])
        .collect();
    let problem = SyntheticProblem::generate(&kinds, t, seed).unwrap();
    prewhiten(&problem.mixed).unwrap().0
}

/// Raw random data, not whitened: uniform entries on (-2, 2).
pub fn raw_data(n: usize, t: usize, seed: u64) -> SampleMatrix {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    SampleMatrix::new(DMatrix::from_fn(n, t, |_, _| rng.random_range(-2.0..2.0))).unwrap()
}

pub fn cost_families() -> Vec<(&'static str, Box<dyn Contrast>)> {
    vec![
        ("neg-kurtosis", Box::new(make_neg_kurtosis())),
        ("neg-kurtosis-squared", Box::new(make_neg_kurtosis_squared())),
    ]
}

pub fn random_skew(n: usize, seed: u64) -> SkewCoordinates {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    SkewCoordinates::from_upper(n, |_, _| rng.random_range(-1.0..1.0))
}

/// `F(exp(Δ) Y)` evaluated directly.
pub fn cost_after(cost: &dyn Contrast, y: &SampleMatrix, delta: &SkewCoordinates) -> f64 {
    let d = expm_skew(delta).unwrap();
    cost.value(&y.left_mul(d.matrix()).unwrap()).unwrap()
}

/// Skew matrix for reduced coordinates `x` over pairs (r, c), r < c:
/// Δ[r][c] = x/√2, Δ[c][r] = -x/√2. Written independently of the library mapping.
pub fn skew_from_coords(n: usize, x: &DVector<f64>) -> SkewCoordinates {
    let mut k = 0;
    let mut m = DMatrix::zeros(n, n);
    for c in 0..n {
        for r in 0..c {
            m[(r, c)] = x[k] / 2f64.sqrt();
            m[(c, r)] = -x[k] / 2f64.sqrt();
            k += 1;
        }
    }
    SkewCoordinates::from_matrix(&m, 0.0).unwrap()
}

/// Central second-difference Hessian of `x ↦ F(exp(Δ(x)) Y)` at x = 0.
pub fn fd_hessian(cost: &dyn Contrast, y: &SampleMatrix, n: usize, h: f64) -> DMatrix<f64> {
    let na = n * (n - 1) / 2;
    let phi = |x: &DVector<f64>| cost_after(cost, y, &skew_from_coords(n, x));
    let e = |k: usize| DVector::from_fn(na, |i, _| if i == k { h } else { 0.0 });
    let f0 = phi(&DVector::zeros(na));
    DMatrix::from_fn(na, na, |a, b| {
        if a == b {
            (phi(&e(a)) - 2.0 * f0 + phi(&(-e(a)))) / (h * h)
        } else {
            let (ea, eb) = (e(a), e(b));
            (phi(&(&ea + &eb)) - phi(&(&ea - &eb)) - phi(&(&eb - &ea)) + phi(&(-&ea - &eb)))
                / (4.0 * h * h)
        }
    })
}
