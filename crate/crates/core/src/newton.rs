//! The Newton system on the skew subspace and its solution.
//!
//! The second-order model of `F(exp(Δ) Y)` is assembled in the operator
//! `W = ½(R'⊗I + I⊗R) + (⊕_k U_k) T` acting on column strings. Rotating by
//! `H + P_D` splits coordinates into symmetric and antisymmetric slots; only
//! the `n(n-1)/2` antisymmetric slots carry the step.
//!
//! Reduced coordinates: slot `a` belongs to the pair `(r, c)`, `r < c`, and
//! `x_a` maps to `Δ[(r, c)] = x_a/√2`, `Δ[(c, r)] = -x_a/√2` (the action of
//! `H'` on an antisymmetric-only vector). In these coordinates the reduced
//! block of `P_A H W H' P_A` equals **minus** the Hessian of the model, since
//! `W = T·∇²` and `H T = -H` on antisymmetric rows. [`NewtonSystem`] stores the
//! Hessian itself, so Levenberg-Marquardt damping `+λI` always moves towards
//! gradient descent. The undamped step is identical to the closed-form
//! pure-Newton update `cs(Δ) = -H'(P_A H W H' P_A + P_S)^{-1} P_A H cs(R)`.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::cost::CostEvaluation;
use crate::error::{Error, Result};
use crate::group::SkewCoordinates;
use crate::operators::{
    antisymmetric_pairs, build_h, build_pa, build_ps, build_t, cs, cs_index, cs_inv_slice,
    direct_sum, kron, OperatorN2,
};

/// Condition estimate beyond which a solve is refused.
pub const MAX_CONDITION: f64 = 1e12;

/// Gradient norm below which the step is taken to be exactly zero.
pub const STATIONARY_RHS: f64 = 1e-14;

/// Entry `W[p][q]` for cs positions `p = (l, k)`, `q = (l', k')`.
#[inline]
pub fn w_entry(eval: &CostEvaluation, p: usize, q: usize) -> f64 {
    let n = eval.n();
    let (l, k) = (p % n, p / n);
    let (lq, kq) = (q % n, q / n);
    let mut w = 0.0;
    if l == lq {
        w += 0.5 * eval.r[(kq, k)];
    }
    if k == kq {
        w += 0.5 * eval.r[(l, lq)];
    }
    if k == lq {
        w += eval.u_at(k, l, kq);
    }
    w
}

/// `W = ½(R'⊗I + I⊗R) + (⊕_k U_k) T` built from explicit operator algebra.
pub fn build_w(eval: &CostEvaluation) -> OperatorN2 {
    let n = eval.n();
    let eye = DMatrix::<f64>::identity(n, n);
    let first = (kron(&eval.r.transpose(), &eye) + kron(&eye, &eval.r)) * 0.5;
    let second = direct_sum(&eval.u) * build_t(n).matrix();
    OperatorN2::from_matrix(n, first + second).expect("dimensions are n² by construction")
}

/// The reduced Newton system at one iterate.
#[derive(Debug, Clone)]
pub struct NewtonSystem {
    n: usize,
    lambda: f64,
    pairs: Vec<(usize, usize)>,
    hessian: DMatrix<f64>,
    gradient: DVector<f64>,
}

impl NewtonSystem {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Copy of the system with a different damping.
    pub fn with_lambda(&self, lambda: f64) -> Self {
        Self {
            lambda,
            ..self.clone()
        }
    }

    /// Number of antisymmetric coordinates, `n(n-1)/2`.
    pub fn reduced_dim(&self) -> usize {
        self.pairs.len()
    }

    /// Pair `(r, c)`, `r < c`, behind each reduced coordinate.
    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    /// Undamped Hessian of the second-order model in the reduced coordinates.
    pub fn hessian(&self) -> &DMatrix<f64> {
        &self.hessian
    }

    /// Gradient of the model at `Δ = 0` in reduced coordinates, `-[P_A H cs(R)]`.
    pub fn gradient(&self) -> &DVector<f64> {
        &self.gradient
    }

    /// `hessian + λI`.
    pub fn damped(&self) -> DMatrix<f64> {
        let mut m = self.hessian.clone();
        for k in 0..m.nrows() {
            m[(k, k)] += self.lambda;
        }
        m
    }

    /// Converts reduced coordinates into a skew matrix.
    pub fn skew_from_reduced(&self, x: &DVector<f64>) -> SkewCoordinates {
        reduced_to_skew(self.n, &self.pairs, x)
    }

    /// Reduced coordinates of a skew matrix (inverse of [`Self::skew_from_reduced`]).
    pub fn reduced_from_skew(&self, delta: &SkewCoordinates) -> DVector<f64> {
        let m = delta.matrix();
        DVector::from_iterator(
            self.pairs.len(),
            self.pairs
                .iter()
                .map(|&(r, c)| (m[(r, c)] - m[(c, r)]) * std::f64::consts::FRAC_1_SQRT_2),
        )
    }
}

fn reduced_to_skew(n: usize, pairs: &[(usize, usize)], x: &DVector<f64>) -> SkewCoordinates {
    let mut upper = DMatrix::zeros(n, n);
    for (&(r, c), &v) in pairs.iter().zip(x.iter()) {
        upper[(r, c)] = v * std::f64::consts::FRAC_1_SQRT_2;
    }
    SkewCoordinates::from_upper(n, |r, c| upper[(r, c)])
}

/// Assembles the reduced system entry by entry from `W`, without forming n²×n² products.
pub fn assemble(eval: &CostEvaluation, lambda: f64) -> Result<NewtonSystem> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::Config(format!("damping must be finite and >= 0, got {lambda}")));
    }
    let n = eval.n();
    if eval.u.len() != n || eval.u.iter().any(|u| u.nrows() != n || u.ncols() != n) {
        return Err(Error::Dimension("U blocks do not match R".into()));
    }
    let pairs = antisymmetric_pairs(n);
    // (upper slot a, mirrored slot b) for each pair
    let slots: Vec<(usize, usize)> = pairs
        .iter()
        .map(|&(r, c)| (cs_index(n, r, c), cs_index(n, c, r)))
        .collect();
    let na = pairs.len();
    let hessian = DMatrix::from_fn(na, na, |x, y| {
        let (a, b) = slots[x];
        let (a2, b2) = slots[y];
        // [H W H']_{a a2} with H rows (e_a - e_b)/√2; the Hessian is its negative
        -0.5 * (w_entry(eval, a, a2) - w_entry(eval, a, b2) - w_entry(eval, b, a2)
            + w_entry(eval, b, b2))
    });
    let gradient = DVector::from_iterator(
        na,
        pairs
            .iter()
            .map(|&(r, c)| -(eval.r[(r, c)] - eval.r[(c, r)]) * std::f64::consts::FRAC_1_SQRT_2),
    );
    Ok(NewtonSystem {
        n,
        lambda,
        pairs,
        hessian,
        gradient,
    })
}

/// A solved step with diagnostics.
#[derive(Debug, Clone)]
pub struct Step {
    pub delta: SkewCoordinates,
    /// Reduced coordinates of `delta`.
    pub reduced: DVector<f64>,
    /// Condition estimate of the damped reduced matrix (1 when the solve was skipped).
    pub condition: f64,
}

/// Solves `(hessian + λI) x = -gradient` and maps `x` to a skew step.
pub fn solve_step(system: &NewtonSystem) -> Result<Step> {
    let na = system.reduced_dim();
    if system.gradient.norm() < STATIONARY_RHS {
        return Ok(Step {
            delta: SkewCoordinates::zeros(system.n),
            reduced: DVector::zeros(na),
            condition: 1.0,
        });
    }
    let m = system.damped();
    let sym = (&m + m.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    let abs: Vec<f64> = eig.eigenvalues.iter().map(|v| v.abs()).collect();
    let max = abs.iter().copied().fold(0.0, f64::max);
    let min = abs.iter().copied().fold(f64::INFINITY, f64::min);
    let condition = if min == 0.0 || !min.is_finite() { f64::INFINITY } else { max / min };
    if !(condition <= MAX_CONDITION) {
        return Err(Error::IllConditioned { condition });
    }
    let v = &eig.eigenvectors;
    let mut coeffs = v.transpose() * &system.gradient;
    for (c, ev) in coeffs.iter_mut().zip(eig.eigenvalues.iter()) {
        *c = -*c / ev;
    }
    let reduced = v * coeffs;
    Ok(Step {
        delta: system.skew_from_reduced(&reduced),
        reduced,
        condition,
    })
}

/// `P_S - P_A H W H' P_A + λI` built from explicit n²×n² operators.
///
/// Block-diagonal under the symmetric/antisymmetric slot split: `(1+λ)I` on
/// the symmetric slots and the damped Hessian on the antisymmetric ones.
pub fn full_operator(eval: &CostEvaluation, lambda: f64) -> OperatorN2 {
    let n = eval.n();
    let core = undamped_block_operator(eval);
    let mut m = build_ps(n).matrix() - core.matrix();
    for k in 0..n * n {
        m[(k, k)] += lambda;
    }
    OperatorN2::from_matrix(n, m).expect("dimensions are n² by construction")
}

/// `P_A H W H' P_A + P_S`, the undamped system matrix exactly as it appears
/// in the closed-form pure-Newton update.
pub fn pure_newton_operator(eval: &CostEvaluation) -> OperatorN2 {
    let n = eval.n();
    undamped_block_operator(eval).add(&build_ps(n))
}

fn undamped_block_operator(eval: &CostEvaluation) -> OperatorN2 {
    let n = eval.n();
    let h = build_h(n);
    let pa = build_pa(n);
    let w = build_w(eval);
    pa.compose(&h).compose(&w).compose(&h.transpose()).compose(&pa)
}

/// Solves the step on the full n² system, as an independent route to [`solve_step`].
pub fn solve_full(eval: &CostEvaluation, lambda: f64) -> Result<SkewCoordinates> {
    let n = eval.n();
    let h = build_h(n);
    let rhs = build_pa(n).compose(&h).apply(&cs(&eval.r));
    let k = full_operator(eval, lambda);
    let sol = k
        .matrix()
        .clone()
        .lu()
        .solve(rhs.as_vector())
        .ok_or(Error::IllConditioned { condition: f64::INFINITY })?;
    let delta = h.matrix().transpose() * sol;
    let m = cs_inv_slice(delta.as_slice())?;
    SkewCoordinates::from_matrix(&m, 1e-12)
}

/// Closed-form pure-Newton step `-H'(P_A H W H' P_A + P_S)^{-1} P_A H cs(R)`.
pub fn solve_pure_newton_closed_form(eval: &CostEvaluation) -> Result<SkewCoordinates> {
    let n = eval.n();
    let h = build_h(n);
    let rhs = build_pa(n).compose(&h).apply(&cs(&eval.r));
    let sol = pure_newton_operator(eval)
        .matrix()
        .clone()
        .lu()
        .solve(rhs.as_vector())
        .ok_or(Error::IllConditioned { condition: f64::INFINITY })?;
    let delta = -(h.matrix().transpose() * sol);
    let m = cs_inv_slice(delta.as_slice())?;
    SkewCoordinates::from_matrix(&m, 1e-12)
}

/// `F + tr(ΔR) + ½tr(Δ²R) + ½ Σ_{i,k,l} Δ_ik Δ_il U_ikl`.
pub fn model_value(eval: &CostEvaluation, delta: &SkewCoordinates) -> f64 {
    let d = delta.matrix();
    let dr = d * &eval.r;
    let linear = dr.trace();
    let quad_r = 0.5 * (d * dr).trace();
    let n = eval.n();
    let mut quad_u = 0.0;
    for i in 0..n {
        let row = d.row(i).transpose();
        quad_u += (row.transpose() * &eval.u[i] * &row)[(0, 0)];
    }
    eval.f + linear + quad_r + 0.5 * quad_u
}

/// Sparsity of the undamped system matrix.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SparsityReport {
    pub n: usize,
    /// Size of the antisymmetric block, `n(n-1)/2`.
    pub antisymmetric_block: usize,
    /// Size of the identity block on symmetric slots, `n(n+1)/2`.
    pub symmetric_block: usize,
    /// Off-diagonal nonzeros of the antisymmetric block.
    pub nnz_offdiag: usize,
    /// `n(n-1)(n-2)`.
    pub bound: usize,
}

pub fn sparsity_report(system: &NewtonSystem) -> SparsityReport {
    let n = system.n;
    let m = &system.hessian;
    let nnz_offdiag = (0..m.nrows())
        .flat_map(|r| (0..m.ncols()).map(move |c| (r, c)))
        .filter(|&(r, c)| r != c && m[(r, c)] != 0.0)
        .count();
    SparsityReport {
        n,
        antisymmetric_block: system.reduced_dim(),
        symmetric_block: n * (n + 1) / 2,
        nnz_offdiag,
        bound: n * n.saturating_sub(1) * n.saturating_sub(2),
    }
}

/// Nonzero positions `(row, col)` of the undamped n²×n² system matrix, as cs indices.
pub fn nonzero_positions(system: &NewtonSystem) -> Vec<(usize, usize)> {
    let n = system.n;
    let slots: Vec<usize> = system.pairs.iter().map(|&(r, c)| cs_index(n, r, c)).collect();
    let mut out: Vec<(usize, usize)> = (0..n * n)
        .filter(|&k| crate::operators::is_symmetric_slot(n, k))
        .map(|k| (k, k))
        .collect();
    for (x, &a) in slots.iter().enumerate() {
        for (y, &b) in slots.iter().enumerate() {
            if system.hessian[(x, y)] != 0.0 {
                out.push((a, b));
            }
        }
    }
    out.sort_unstable();
    out
}

/// Norm of the reduced gradient; zero exactly at stationary points of `F` on O(n).
pub fn stationarity(eval: &CostEvaluation) -> f64 {
    let n = eval.n();
    let mut s = 0.0;
    for c in 0..n {
        for r in 0..c {
            let g = eval.r[(r, c)] - eval.r[(c, r)];
            s += 0.5 * g * g;
        }
    }
    s.sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn eval_from(r: DMatrix<f64>, u: Vec<DMatrix<f64>>) -> CostEvaluation {
        CostEvaluation { f: 0.0, r, u }
    }

    fn random_eval(n: usize, seed: u64) -> CostEvaluation {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let r = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        let u = (0..n)
            .map(|_| {
                let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
                &a + a.transpose()
            })
            .collect();
        CostEvaluation { f: rng.random_range(-1.0..1.0), r, u }
    }

    #[test]
    fn w_is_identity_for_identity_r() {
        let n = 3;
        let e = eval_from(DMatrix::identity(n, n), vec![DMatrix::zeros(n, n); n]);
        assert_eq!(build_w(&e).matrix(), &DMatrix::identity(9, 9));
    }

    #[test]
    fn w_entries_match_operator_algebra() {
        let e = random_eval(4, 3);
        let w = build_w(&e);
        for p in 0..16 {
            for q in 0..16 {
                assert!((w.matrix()[(p, q)] - w_entry(&e, p, q)).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn symmetric_r_gives_zero_rhs_and_zero_step() {
        let e = random_eval(4, 4);
        let sym = (&e.r + e.r.transpose()) * 0.5;
        let e = CostEvaluation { r: sym, ..e };
        let sys = assemble(&e, 0.0).unwrap();
        assert!(sys.gradient().iter().all(|&g| g == 0.0));
        let step = solve_step(&sys).unwrap();
        assert_eq!(step.delta.norm(), 0.0);
    }

    #[test]
    fn damping_rejects_bad_lambda() {
        let e = random_eval(3, 1);
        assert!(assemble(&e, -1.0).is_err());
        assert!(assemble(&e, f64::NAN).is_err());
    }

    #[test]
    fn singular_system_signals_condition() {
        let n = 3;
        let e = CostEvaluation {
            f: 0.0,
            r: DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]),
            u: vec![DMatrix::zeros(n, n); n],
        };
        let sys = assemble(&e, 0.0).unwrap();
        let singular = NewtonSystem {
            hessian: DMatrix::zeros(3, 3),
            ..sys
        };
        assert!(matches!(solve_step(&singular), Err(Error::IllConditioned { .. })));
    }

    #[test]
    fn sparsity_small_cases() {
        let r2 = sparsity_report(&assemble(&random_eval(2, 1), 0.0).unwrap());
        assert_eq!((r2.antisymmetric_block, r2.symmetric_block, r2.bound, r2.nnz_offdiag), (1, 3, 0, 0));
        let r3 = sparsity_report(&assemble(&random_eval(3, 1), 0.0).unwrap());
        assert_eq!((r3.antisymmetric_block, r3.symmetric_block, r3.bound), (3, 6, 6));
        assert!(r3.nnz_offdiag <= 6);
    }

    #[test]
    fn nonzero_positions_cover_identity_block() {
        let n = 3;
        let sys = assemble(&random_eval(n, 2), 0.0).unwrap();
        let pos = nonzero_positions(&sys);
        let full = pure_newton_operator(&random_eval(n, 2));
        for r in 0..n * n {
            for c in 0..n * n {
                let nz = full.matrix()[(r, c)].abs() > 1e-14;
                assert_eq!(nz, pos.binary_search(&(r, c)).is_ok(), "({r},{c})");
            }
        }
    }

    #[test]
    fn model_at_zero_is_cost() {
        let e = random_eval(3, 5);
        assert_eq!(model_value(&e, &SkewCoordinates::zeros(3)), e.f);
    }

    #[test]
    fn reduced_round_trip() {
        let e = random_eval(5, 6);
        let sys = assemble(&e, 0.0).unwrap();
        let x = DVector::from_fn(sys.reduced_dim(), |k, _| k as f64 - 3.5);
        let back = sys.reduced_from_skew(&sys.skew_from_reduced(&x));
        assert!((back - x).abs().max() < 1e-14);
    }
}
