//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each,
//! and exits non-zero if any fails.

mod common;

use std::process::ExitCode;
use std::time::{Duration, Instant};

use common::*;
use nalgebra::DMatrix;
use orthnewton::cost::{make_neg_kurtosis, make_neg_kurtosis_squared, Contrast, SampleMatrix};
use orthnewton::group::{expm_skew, OrthogonalMatrix, SkewCoordinates};
use orthnewton::ica::{haar_orthogonal, prewhiten, SyntheticProblem, DEFAULT_SOURCES};
use orthnewton::newton::{assemble, full_operator, model_value, solve_step, sparsity_report};
use orthnewton::operators::{build_h, build_pa, build_pd, build_ps, build_t, cs};
use orthnewton::optimizer::{run, run_with_observer, IterateState, IterationRecord, OptimizerConfig, Termination};

type Verdict = Result<String, String>;

fn check(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok { Ok(()) } else { Err(msg.into()) }
}

/// Worst covariance and orthogonality deviations seen over accepted iterates.
#[derive(Default)]
struct Invariants {
    cov: f64,
    drift: f64,
    iterates: usize,
}

impl Invariants {
    fn observe(&mut self, rec: &IterationRecord, state: &IterateState) {
        let n = state.y.n();
        let cov = (state.y.covariance() - DMatrix::<f64>::identity(n, n)).abs().max();
        self.cov = self.cov.max(cov);
        self.drift = self.drift.max(rec.ortho_drift).max(state.c.drift());
        self.iterates += 1;
    }
}

fn operator_exactness() -> Verdict {
    let mut worst = 0.0f64;
    for n in 2..=8 {
        let n2 = n * n;
        let eye = DMatrix::<f64>::identity(n2, n2);
        let (h, pd, ps, pa, t) = (build_h(n), build_pd(n), build_ps(n), build_pa(n), build_t(n));
        let q = h.matrix() + pd.matrix();
        worst = worst.max((q.transpose() * &q - &eye).abs().max());
        worst = worst.max((t.matrix() * t.matrix() - &eye).abs().max());
        worst = worst.max((ps.matrix() + pa.matrix() - &eye).abs().max());
        for p in [&ps, &pa, &pd] {
            worst = worst.max((p.matrix() * p.matrix() - p.matrix()).abs().max());
        }
        worst = worst.max((pa.matrix() * &q - pa.matrix() * h.matrix()).abs().max());
        for seed in 0..5 {
            let d = random_skew(n, seed);
            worst = worst.max((ps.matrix() * &q * cs(d.matrix()).as_vector()).abs().max());
        }
    }
    check(worst <= 1e-12, format!("max deviation {worst:.2e}"))?;
    Ok(format!("max deviation {worst:.2e} over n = 2..8"))
}

fn gradient_hessian_fidelity() -> Verdict {
    let (mut grad, mut hess, mut ratio_dev) = (0.0f64, 0.0f64, 0.0f64);
    for (name, cost) in cost_families() {
        for &n in &[3, 4] {
            for seed in 0..3 {
                let y = whitened_data(n, 2000, 500 + 10 * n as u64 + seed);
                let eval = cost.evaluate(&y).unwrap();
                for dir in 0..3 {
                    let d = random_skew(n, 100 * seed + dir);
                    let analytic = (d.matrix() * &eval.r).trace();
                    let eps = 1e-5;
                    let fd = (cost_after(cost.as_ref(), &y, &d.scale(eps)) - cost_after(cost.as_ref(), &y, &d.scale(-eps)))
                        / (2.0 * eps);
                    let rel = (fd - analytic).abs() / analytic.abs();
                    check(rel < 1e-5, format!("{name} n={n}: gradient relative error {rel:.2e}"))?;
                    grad = grad.max(rel);

                    let delta = d.scale(2e-3 / d.norm());
                    let rem = |s: f64| {
                        let step = delta.scale(s);
                        cost_after(cost.as_ref(), &y, &step) - model_value(&eval, &step)
                    };
                    let ratio = rem(0.5) / rem(1.0);
                    let dev = (ratio - 0.125).abs() / 0.125;
                    check(dev <= 0.2, format!("{name} n={n}: remainder ratio {ratio:.4}"))?;
                    ratio_dev = ratio_dev.max(dev);
                }
                let system = assemble(&eval, 0.0).unwrap();
                let fd = fd_hessian(cost.as_ref(), &y, n, 1e-4);
                let rel = (&fd - system.hessian()).abs().max() / system.hessian().abs().max();
                check(rel < 1e-4, format!("{name} n={n}: Hessian relative error {rel:.2e}"))?;
                hess = hess.max(rel);
            }
        }
    }
    Ok(format!(
        "gradient rel err {grad:.1e}, Hessian rel err {hess:.1e}, remainder ratio within {:.1}% of 1/8",
        100.0 * ratio_dev
    ))
}

/// First and second derivatives at 0 of a 2π-periodic trigonometric
/// polynomial of degree < 16, from its values on a uniform grid.
///
/// The cost along a plane rotation is such a polynomial (degree 4 for the
/// kurtosis contrast, 8 for its square), so this is the exact limit of
/// central differences of every order.
fn angle_derivatives(phi: &dyn Fn(f64) -> f64) -> (f64, f64) {
    const M: usize = 32;
    let samples: Vec<f64> = (0..M).map(|j| phi(2.0 * std::f64::consts::PI * j as f64 / M as f64)).collect();
    let (mut d1, mut d2) = (0.0, 0.0);
    for k in 1..M / 2 {
        let (mut a, mut b) = (0.0, 0.0);
        for (j, v) in samples.iter().enumerate() {
            let arg = 2.0 * std::f64::consts::PI * (k * j) as f64 / M as f64;
            a += v * arg.cos();
            b += v * arg.sin();
        }
        let (a, b, kf) = (2.0 * a / M as f64, 2.0 * b / M as f64, k as f64);
        d1 += kf * b;
        d2 -= kf * kf * a;
    }
    (d1, d2)
}

fn angle_oracle() -> Verdict {
    let mut worst = 0.0f64;
    for k in 0..50u64 {
        let cost: Box<dyn Contrast> = if k % 2 == 0 {
            Box::new(make_neg_kurtosis_squared())
        } else {
            Box::new(make_neg_kurtosis())
        };
        let base = whitened_data(2, 1000, 700 + k);
        let start = expm_skew(&random_skew(2, k)).unwrap();
        let y = base.left_mul(start.matrix()).unwrap();
        let eval = cost.evaluate(&y).unwrap();
        let delta = solve_step(&assemble(&eval, 0.0).unwrap()).unwrap().delta;

        let phi = |theta: f64| cost_after(cost.as_ref(), &y, &SkewCoordinates::from_upper(2, |_, _| theta));
        let (d1, d2) = angle_derivatives(&phi);
        let theta = -d1 / d2;
        let diff = (delta.matrix()[(0, 1)] - theta).abs();
        check(diff < 1e-8, format!("dataset {k}: |Δ12 - θ| = {diff:.2e}"))?;

        // plain five-point stencils agree up to their own rounding error
        let h = 1e-3;
        let (p2, p1, p0, m1, m2) = (phi(2.0 * h), phi(h), phi(0.0), phi(-h), phi(-2.0 * h));
        let s1 = (-p2 + 8.0 * p1 - 8.0 * m1 + m2) / (12.0 * h);
        let s2 = (-p2 + 16.0 * p1 - 30.0 * p0 + 16.0 * m1 - m2) / (12.0 * h * h);
        let stencil = (-s1 / s2 - theta).abs();
        check(stencil < 1e-6 * (1.0 + theta.abs()), format!("dataset {k}: stencil disagrees by {stencil:.2e}"))?;
        worst = worst.max(diff);
    }
    Ok(format!("max |Δ12 - θ| = {worst:.2e} over 50 datasets"))
}

fn sparsity_structure() -> Verdict {
    let n = 10;
    let y = raw_data(n, 200, 10);
    let eval = make_neg_kurtosis_squared().evaluate(&y).unwrap();
    let report = sparsity_report(&assemble(&eval, 0.0).unwrap());
    check(report.antisymmetric_block == 45 && report.symmetric_block == 55, format!("blocks {report:?}"))?;
    check(report.bound == 720 && report.nnz_offdiag <= 720, format!("nnz {} bound {}", report.nnz_offdiag, report.bound))?;

    let full = full_operator(&eval, 0.0);
    let m = full.matrix();
    let sym: Vec<usize> = (0..n * n).filter(|k| k % n >= k / n).collect();
    let anti: Vec<usize> = (0..n * n).filter(|k| k % n < k / n).collect();
    for &a in &sym {
        for b in 0..n * n {
            let expected = if a == b { 1.0 } else { 0.0 };
            check(m[(a, b)] == expected && m[(b, a)] == expected, format!("symmetric slot {a} couples to {b}"))?;
        }
    }
    let nnz = anti.iter().flat_map(|&a| anti.iter().map(move |&b| (a, b))).filter(|&(a, b)| a != b && m[(a, b)] != 0.0).count();
    check(nnz == report.nnz_offdiag, format!("dense count {nnz} vs report {}", report.nnz_offdiag))?;
    Ok(format!("45 + 55 direct sum, {nnz} off-diagonal nonzeros <= 720"))
}

fn acceptance_problem(seed: u64, t: usize) -> SampleMatrix {
    let p = SyntheticProblem::generate(&DEFAULT_SOURCES, t, seed).unwrap();
    prewhiten(&p.mixed).unwrap().0
}

/// Steps that land at or below this are at the limit of double precision.
const PRECISION_FLOOR: f64 = 1e-13;

fn quadratic_convergence(inv: &mut Invariants) -> Verdict {
    let cost = make_neg_kurtosis_squared();
    let mut summary = Vec::new();
    for seed in 0..5u64 {
        let x = acceptance_problem(seed, 10_000);
        // LM locates the minimum; its cost comparisons stall near √ε, so
        // undamped steps polish the reference point.
        let lm = run(&cost, &x, OrthogonalMatrix::identity(3), &OptimizerConfig::default()).unwrap();
        let polish = OptimizerConfig { max_iter: 10, ..OptimizerConfig::pure_newton() };
        let opt = run(&cost, &x, lm.c_final, &polish).unwrap();
        check(opt.final_gradient < 1e-10, format!("seed {seed}: reference gradient {:.1e}", opt.final_gradient))?;

        let d = random_skew(3, 900 + seed);
        let c0 = OrthogonalMatrix::new(expm_skew(&d.scale(0.04 / d.norm())).unwrap().matrix() * opt.c_final.matrix()).unwrap();
        let config = OptimizerConfig { tol_step: 0.0, tol_cost: 0.0, max_iter: 6, ..OptimizerConfig::pure_newton() };
        let res = run_with_observer(&cost, &x, c0, &config, |r, s| inv.observe(r, s)).unwrap();
        let e: Vec<f64> = res.trace[1..].iter().map(|r| r.step_norm).collect();
        check(e[0] < 0.05, format!("seed {seed}: first step {:.3} not within 0.05", e[0]))?;

        // Digits doubling, -log e_{t+1} >= -2 log e_t, is e_{t+1} <= C e_t^2 with C = 1.
        let live: Vec<f64> = e.iter().copied().take_while(|&v| v > PRECISION_FLOOR).collect();
        let c = live.windows(2).map(|w| w[1] / (w[0] * w[0])).fold(0.0, f64::max);
        let mut doubled = 0;
        for w in e.windows(2) {
            let (prev, next) = (w[0], w[1]);
            if prev <= PRECISION_FLOOR {
                break;
            }
            let ok = if next > PRECISION_FLOOR {
                next <= prev * prev
            } else {
                // the doubled-digit prediction is itself below the floor
                prev * prev <= PRECISION_FLOOR
            };
            check(ok, format!("seed {seed}: steps {e:?} do not double their digits"))?;
            doubled += 1;
        }
        check(live.len() >= 3 && doubled >= 3, format!("seed {seed}: only {doubled} doubling iterations in {e:?}"))?;
        summary.push(format!("C={c:.2}"));
    }
    Ok(format!("5 starts, >= 3 digit-doubling steps each ({})", summary.join(", ")))
}

fn desk_reproduction(inv: &mut Invariants) -> Verdict {
    let cost = make_neg_kurtosis_squared();
    let config = OptimizerConfig::default();
    let mut percents = Vec::new();
    let mut converged = 0;
    for trial in 0..20u64 {
        let p = SyntheticProblem::generate(&DEFAULT_SOURCES, 10_000, trial).unwrap();
        let (x, w) = prewhiten(&p.mixed).unwrap();
        let res = run_with_observer(&cost, &x, OrthogonalMatrix::identity(3), &config, |r, s| inv.observe(r, s)).unwrap();
        check(res.trace.windows(2).all(|w| w[1].f <= w[0].f), format!("trial {trial}: cost increased"))?;
        if matches!(res.termination, Termination::StepTol | Termination::CostTol) {
            converged += 1;
        }
        let g = orthnewton::ica::global_transfer(&res.c_final, &w, &p.mixing.a).unwrap();
        percents.push(orthnewton::ica::crosstalk(&g).unwrap().mean_percent);
    }
    let mean = percents.iter().sum::<f64>() / 20.0;
    let mut sorted = percents.clone();
    sorted.sort_by(f64::total_cmp);
    let median = 0.5 * (sorted[9] + sorted[10]);
    let msg = format!("mean {mean:.2}%, median {median:.2}%, {converged}/20 converged");
    check(mean < 5.0 && median < 2.0 && converged >= 18, msg.clone())?;
    Ok(msg)
}

fn global_behavior(inv: &mut Invariants) -> Verdict {
    let cost = make_neg_kurtosis_squared();
    let (mut lm_ok, mut newton_ok) = (0, 0);
    for trial in 0..50u64 {
        let x = acceptance_problem(1000 + trial, 10_000);
        let c0 = haar_orthogonal(3, trial).unwrap();
        for (config, hits) in [
            (OptimizerConfig::default(), &mut lm_ok),
            (OptimizerConfig::pure_newton(), &mut newton_ok),
        ] {
            let res = run_with_observer(&cost, &x, c0.clone(), &config, |r, s| inv.observe(r, s)).unwrap();
            check(res.trace.iter().all(|r| r.f.is_finite()), format!("trial {trial}: non-finite cost"))?;
            if res.final_gradient < 1e-6 {
                *hits += 1;
            } else {
                check(
                    matches!(res.termination, Termination::LambdaOverflow | Termination::MaxIter),
                    format!("trial {trial} {:?}: unclean failure {:?}", config.mode, res.termination),
                )?;
            }
        }
    }
    let msg = format!("LM stationary in {lm_ok}/50, pure Newton in {newton_ok}/50");
    check(lm_ok >= 45, msg.clone())?;
    Ok(msg)
}

fn invariance(inv: &Invariants) -> Verdict {
    let msg = format!(
        "{} iterates: max cov deviation {:.1e}, max drift {:.1e}",
        inv.iterates, inv.cov, inv.drift
    );
    check(inv.iterates > 0 && inv.cov <= 1e-8 && inv.drift <= 1e-9, msg.clone())?;
    Ok(msg)
}

fn main() -> ExitCode {
    let mut inv = Invariants::default();
    let mut failed = 0;
    let mut report = |id: u32, title: &str, limit: Option<Duration>, f: &mut dyn FnMut() -> Verdict| {
        let start = Instant::now();
        let verdict = f();
        let elapsed = start.elapsed();
        let verdict = match (verdict, limit) {
            (Ok(msg), Some(limit)) if elapsed > limit => Err(format!("{msg}; took {elapsed:.2?}, limit {limit:?}")),
            (v, _) => v,
        };
        match verdict {
            Ok(msg) => println!("PASS [{id}] {title} ({elapsed:.2?}): {msg}"),
            Err(msg) => {
                failed += 1;
                println!("FAIL [{id}] {title} ({elapsed:.2?}): {msg}");
            }
        }
    };
    let secs = |s| Some(Duration::from_secs(s));
    report(1, "operator exactness", secs(1), &mut operator_exactness);
    report(2, "gradient and Hessian fidelity", secs(10), &mut gradient_hessian_fidelity);
    report(3, "two-channel angle oracle", secs(5), &mut angle_oracle);
    report(4, "direct-sum structure and sparsity", None, &mut sparsity_structure);
    report(5, "second-order convergence", None, &mut || quadratic_convergence(&mut inv));
    report(6, "desk-scale separation", secs(60), &mut || desk_reproduction(&mut inv));
    report(7, "global behavior of the damped variant", None, &mut || global_behavior(&mut inv));
    report(8, "invariance", None, &mut || invariance(&inv));
    if failed == 0 {
        println!("acceptance: all criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {failed} criteria failed");
        ExitCode::FAILURE
    }
}
