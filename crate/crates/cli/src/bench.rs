use std::time::Instant;

use orthnewton::cost::Contrast;
use orthnewton::ica::{crosstalk, global_transfer, haar_orthogonal, prewhiten, SyntheticProblem, DEFAULT_SOURCES};
use orthnewton::optimizer::{self, OptimizerConfig};
use orthnewton::{OrthogonalMatrix, Result, SkewCoordinates, Termination};
use rayon::prelude::*;
use serde::Serialize;

use crate::args::BenchArgs;
use crate::manifest::{write_json, RunManifest};
use crate::Failure;

/// Distance of the `--near-solution` start from the located minimum.
const NEAR_RADIUS: f64 = 0.04;

#[derive(Serialize, Clone)]
struct Trial {
    trial: usize,
    seed: u64,
    crosstalk_percent: f64,
    iterations: usize,
    termination: Termination,
    final_cost: f64,
    final_gradient: f64,
    seconds: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    step_norms: Option<Vec<f64>>,
}

#[derive(Serialize)]
struct Summary {
    trials: usize,
    mean_crosstalk_percent: f64,
    median_crosstalk_percent: f64,
    converged: usize,
    mean_iterations: f64,
    trial_seconds_total: f64,
    wall_seconds: f64,
}

/// Worker count from `ORTHNEWTON_THREADS`, if set to a positive integer.
fn thread_cap() -> Option<usize> {
    std::env::var("ORTHNEWTON_THREADS").ok()?.trim().parse().ok().filter(|&n| n > 0)
}

/// Minimum located by the damped loop, then polished with undamped steps.
fn locate_minimum(cost: &dyn Contrast, x: &orthnewton::SampleMatrix) -> Result<OrthogonalMatrix> {
    let lm = optimizer::run(cost, x, OrthogonalMatrix::identity(x.n()), &OptimizerConfig::default())?;
    let polish = OptimizerConfig { max_iter: 10, ..OptimizerConfig::pure_newton() };
    Ok(optimizer::run(cost, x, lm.c_final, &polish)?.c_final)
}

fn near_start(cost: &dyn Contrast, x: &orthnewton::SampleMatrix, seed: u64) -> Result<OrthogonalMatrix> {
    let opt = locate_minimum(cost, x)?;
    let q = haar_orthogonal(x.n(), seed)?;
    let dir = SkewCoordinates::from_matrix(&((q.matrix() - q.matrix().transpose()) * 0.5), 0.0)?;
    let delta = dir.scale(NEAR_RADIUS / dir.norm());
    OrthogonalMatrix::new(orthnewton::group::expm_skew(&delta)?.matrix() * opt.matrix())
}

fn one_trial(args: &BenchArgs, config: &OptimizerConfig, trial: usize) -> Result<Trial> {
    let seed = args.opt.seed.wrapping_add(trial as u64);
    let cost = args.opt.cost.build();
    let problem = SyntheticProblem::generate(&DEFAULT_SOURCES, args.samples, seed)?;
    let (x, w) = prewhiten(&problem.mixed)?;
    let c0 = if args.near_solution {
        near_start(cost.as_ref(), &x, seed)?
    } else {
        OrthogonalMatrix::identity(x.n())
    };
    let start = Instant::now();
    let res = optimizer::run(cost.as_ref(), &x, c0, config)?;
    let seconds = start.elapsed().as_secs_f64();
    let g = global_transfer(&res.c_final, &w, &problem.mixing.a)?;
    Ok(Trial {
        trial,
        seed,
        crosstalk_percent: crosstalk(&g)?.mean_percent,
        iterations: res.iterations(),
        termination: res.termination,
        final_cost: res.final_cost(),
        final_gradient: res.final_gradient,
        seconds,
        step_norms: args
            .near_solution
            .then(|| res.trace.iter().skip(1).map(|r| r.step_norm).collect()),
    })
}

fn run_bench(args: &BenchArgs) -> std::result::Result<(Vec<Trial>, Summary, OptimizerConfig), Failure> {
    let mut config = args.opt.config();
    if let Some(iters) = args.fixed_iters {
        config.max_iter = iters;
        config.tol_step = 0.0;
        config.tol_cost = 0.0;
    }
    config.validate()?;
    if args.trials == 0 {
        return Err(Failure::Input("--trials must be positive".into()));
    }

    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = thread_cap() {
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| Failure::Input(e.to_string()))?;
    let wall = Instant::now();
    let mut trials = pool.install(|| {
        (0..args.trials)
            .into_par_iter()
            .map(|t| one_trial(args, &config, t))
            .collect::<Result<Vec<_>>>()
    })?;
    let wall_seconds = wall.elapsed().as_secs_f64();
    trials.sort_by_key(|t| t.trial);

    let mut ct: Vec<f64> = trials.iter().map(|t| t.crosstalk_percent).collect();
    ct.sort_by(f64::total_cmp);
    let k = ct.len();
    let median = if k % 2 == 1 { ct[k / 2] } else { 0.5 * (ct[k / 2 - 1] + ct[k / 2]) };
    let summary = Summary {
        trials: k,
        mean_crosstalk_percent: ct.iter().sum::<f64>() / k as f64,
        median_crosstalk_percent: median,
        converged: trials
            .iter()
            .filter(|t| matches!(t.termination, Termination::StepTol | Termination::CostTol))
            .count(),
        mean_iterations: trials.iter().map(|t| t.iterations as f64).sum::<f64>() / k as f64,
        trial_seconds_total: trials.iter().map(|t| t.seconds).sum(),
        wall_seconds,
    };
    Ok((trials, summary, config))
}

pub fn run(args: BenchArgs) -> std::result::Result<(), Failure> {
    let (trials, summary, config) = run_bench(&args)?;

    println!("{:>5} {:>20} {:>11} {:>6} {:>15} {:>9}", "trial", "seed", "crosstalk%", "iters", "termination", "seconds");
    for t in &trials {
        println!(
            "{:>5} {:>20} {:>11.4} {:>6} {:>15} {:>9.4}",
            t.trial,
            t.seed,
            t.crosstalk_percent,
            t.iterations,
            format!("{:?}", t.termination),
            t.seconds
        );
        if let Some(steps) = &t.step_norms {
            let shown: Vec<String> = steps.iter().map(|s| format!("{s:.3e}")).collect();
            println!("      step norms: {}", shown.join(" "));
        }
    }
    println!(
        "mean crosstalk {:.4}%, median {:.4}%, converged {}/{}, mean iterations {:.1}, optimizer time {:.3} s, wall {:.3} s",
        summary.mean_crosstalk_percent,
        summary.median_crosstalk_percent,
        summary.converged,
        summary.trials,
        summary.mean_iterations,
        summary.trial_seconds_total,
        summary.wall_seconds
    );

    if let Some(dir) = &args.out {
        std::fs::create_dir_all(dir)?;
        let trials_path = dir.join("trials.json");
        let summary_path = dir.join("summary.json");
        write_json(&trials_path, &trials)?;
        write_json(&summary_path, &summary)?;
        let mut manifest = RunManifest::new("bench");
        manifest.config = Some(config);
        manifest.cost = Some(args.opt.cost.name().into());
        manifest.seeds = trials.iter().map(|t| t.seed).collect();
        manifest.outputs = vec![trials_path, summary_path];
        manifest.write(&dir.join("manifest.json"))?;
    }
    if let Some(t) = trials.iter().find(|t| t.termination.is_failure()) {
        return Err(Failure::Optimizer(format!("trial {}: {:?}", t.trial, t.termination)));
    }
    Ok(())
}
