//! Outer iteration `C(t+1) = exp(Δ(t)) C(t)` in pure-Newton or
//! Levenberg-Marquardt mode.
//!
//! LM mode follows the damping schedule: solve with the current `λ`; if the
//! candidate raises the cost, multiply `λ` by `α` and solve again; otherwise
//! accept, divide `λ` by `α`, and move on. `λ` is carried across iterations.

use serde::{Deserialize, Serialize};

use crate::cost::{Contrast, CostEvaluation, SampleMatrix};
use crate::error::{Error, Result};
use crate::group::{expm_skew, ortho_drift, reorthogonalize, OrthogonalMatrix, SkewCoordinates, ORTHO_TOL};
use crate::newton::{assemble, solve_step, stationarity, NewtonSystem};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    PureNewton,
    LevenbergMarquardt,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerConfig {
    pub lambda0: f64,
    pub alpha: f64,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub max_iter: usize,
    /// Rejected candidates allowed within one outer iteration.
    pub max_inner: usize,
    pub tol_step: f64,
    pub tol_cost: f64,
    pub mode: Mode,
    pub seed: u64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            lambda0: 50.0,
            alpha: 10.0,
            lambda_min: 1e-12,
            lambda_max: 1e12,
            max_iter: 200,
            max_inner: 60,
            tol_step: 1e-10,
            tol_cost: 1e-12,
            mode: Mode::LevenbergMarquardt,
            seed: 0,
        }
    }
}

impl OptimizerConfig {
    pub fn pure_newton() -> Self {
        Self {
            mode: Mode::PureNewton,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if !(self.alpha > 1.0) {
            return bad(format!("alpha must exceed 1, got {}", self.alpha));
        }
        if !(0.0 <= self.lambda_min && self.lambda_min <= self.lambda0 && self.lambda0 <= self.lambda_max)
        {
            return bad(format!(
                "need 0 <= lambda_min <= lambda0 <= lambda_max, got {} / {} / {}",
                self.lambda_min, self.lambda0, self.lambda_max
            ));
        }
        if !self.lambda_max.is_finite() {
            return bad("lambda_max must be finite".into());
        }
        if !(self.tol_step >= 0.0 && self.tol_cost >= 0.0) {
            return bad("tolerances must be non-negative".into());
        }
        Ok(())
    }
}

/// One row of the run trace. Record `t = 0` is the starting point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub t: usize,
    #[serde(rename = "F")]
    pub f: f64,
    pub step_norm: f64,
    /// Damping of the accepted (or last tried) candidate; 0 in pure-Newton mode.
    pub lambda: f64,
    pub rejected: usize,
    pub ortho_drift: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    StepTol,
    CostTol,
    MaxIter,
    LambdaOverflow,
    SolverFailure,
}

impl Termination {
    pub fn is_failure(self) -> bool {
        matches!(self, Self::LambdaOverflow | Self::SolverFailure)
    }
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub c_final: OrthogonalMatrix,
    pub y_final: SampleMatrix,
    pub trace: Vec<IterationRecord>,
    pub termination: Termination,
    /// Norm of the reduced gradient at `y_final`.
    pub final_gradient: f64,
    pub final_lambda: f64,
}

impl RunResult {
    pub fn iterations(&self) -> usize {
        self.trace.last().map_or(0, |r| r.t)
    }

    pub fn final_cost(&self) -> f64 {
        self.trace.last().map_or(f64::NAN, |r| r.f)
    }
}

/// Optimizer state at one accepted iterate.
#[derive(Debug, Clone)]
pub struct IterateState {
    pub c: OrthogonalMatrix,
    pub y: SampleMatrix,
    pub f: f64,
    pub eval: CostEvaluation,
    /// Undamped reduced system at this iterate.
    pub system: NewtonSystem,
}

impl IterateState {
    pub fn new(cost: &dyn Contrast, x: &SampleMatrix, c: OrthogonalMatrix) -> Result<Self> {
        if c.n() != x.n() {
            return Err(Error::Dimension(format!(
                "initial matrix is {0}x{0}, data has {1} channels",
                c.n(),
                x.n()
            )));
        }
        let y = x.left_mul(c.matrix())?;
        let eval = cost.evaluate(&y)?;
        let system = assemble(&eval, 0.0)?;
        Ok(Self {
            c,
            y,
            f: eval.f,
            eval,
            system,
        })
    }
}

/// A candidate produced by one damped solve.
#[derive(Debug, Clone)]
pub struct Candidate {
    pub delta: SkewCoordinates,
    pub c: OrthogonalMatrix,
    pub y: SampleMatrix,
    pub f: f64,
    /// `f <= state.f`; ties are accepted.
    pub accepted: bool,
}

/// `exp(Δ) C`, reorthogonalized when the product drifts past [`ORTHO_TOL`].
fn advance(c: &OrthogonalMatrix, delta: &SkewCoordinates) -> Result<OrthogonalMatrix> {
    let d = expm_skew(delta)?;
    let prod = d.matrix() * c.matrix();
    if ortho_drift(&prod) > ORTHO_TOL {
        reorthogonalize(&prod)
    } else {
        OrthogonalMatrix::new(prod)
    }
}

/// Evaluates one candidate at damping `lambda` without touching `state`.
pub fn lm_inner_step(
    cost: &dyn Contrast,
    x: &SampleMatrix,
    state: &IterateState,
    lambda: f64,
) -> Result<Candidate> {
    let step = solve_step(&state.system.with_lambda(lambda))?;
    let c = advance(&state.c, &step.delta)?;
    let y = x.left_mul(c.matrix())?;
    let f = cost.value(&y)?;
    Ok(Candidate {
        delta: step.delta,
        accepted: f <= state.f,
        c,
        y,
        f,
    })
}

/// Stopping rule applied after each recorded iteration.
pub fn check_convergence(trace: &[IterationRecord], config: &OptimizerConfig) -> Option<Termination> {
    let last = trace.last()?;
    if last.t == 0 {
        return None;
    }
    if last.step_norm < config.tol_step {
        return Some(Termination::StepTol);
    }
    if let Some(prev) = trace.len().checked_sub(2).map(|k| &trace[k]) {
        if (last.f - prev.f).abs() < config.tol_cost {
            return Some(Termination::CostTol);
        }
    }
    if last.t >= config.max_iter {
        return Some(Termination::MaxIter);
    }
    None
}

/// Runs the optimizer from `c0` on data `x`.
pub fn run(
    cost: &dyn Contrast,
    x: &SampleMatrix,
    c0: OrthogonalMatrix,
    config: &OptimizerConfig,
) -> Result<RunResult> {
    run_with_observer(cost, x, c0, config, |_, _| {})
}

/// Like [`run`], calling `observer` with every trace record and the iterate it describes.
pub fn run_with_observer(
    cost: &dyn Contrast,
    x: &SampleMatrix,
    c0: OrthogonalMatrix,
    config: &OptimizerConfig,
    mut observer: impl FnMut(&IterationRecord, &IterateState),
) -> Result<RunResult> {
    config.validate()?;
    let mut state = IterateState::new(cost, x, c0)?;
    let mut lambda = match config.mode {
        Mode::PureNewton => 0.0,
        Mode::LevenbergMarquardt => config.lambda0,
    };
    let mut trace = vec![IterationRecord {
        t: 0,
        f: state.f,
        step_norm: 0.0,
        lambda,
        rejected: 0,
        ortho_drift: state.c.drift(),
    }];
    observer(&trace[0], &state);
    if config.max_iter == 0 {
        return Ok(finish(state, trace, Termination::MaxIter, lambda));
    }

    let mut t = 0;
    let termination = loop {
        t += 1;
        let outcome = match config.mode {
            Mode::PureNewton => newton_iteration(cost, x, &state),
            Mode::LevenbergMarquardt => lm_iteration(cost, x, &state, &mut lambda, config),
        };
        let (candidate, record_lambda, rejected) = match outcome {
            Ok(v) => v,
            Err(reason) => break reason,
        };
        let step_norm = candidate.delta.norm();
        let moved = candidate.accepted;
        if moved {
            let Ok(eval) = cost.evaluate(&candidate.y) else {
                break Termination::SolverFailure;
            };
            let Ok(system) = assemble(&eval, 0.0) else {
                break Termination::SolverFailure;
            };
            state = IterateState {
                c: candidate.c,
                y: candidate.y,
                f: candidate.f,
                eval,
                system,
            };
        }
        let record = IterationRecord {
            t,
            f: state.f,
            step_norm,
            lambda: record_lambda,
            rejected,
            ortho_drift: state.c.drift(),
        };
        observer(&record, &state);
        trace.push(record);
        if let Some(reason) = check_convergence(&trace, config) {
            break reason;
        }
    };
    Ok(finish(state, trace, termination, lambda))
}

type IterationOutcome = std::result::Result<(Candidate, f64, usize), Termination>;

fn newton_iteration(cost: &dyn Contrast, x: &SampleMatrix, state: &IterateState) -> IterationOutcome {
    let step = solve_step(&state.system).map_err(|_| Termination::SolverFailure)?;
    let c = advance(&state.c, &step.delta).map_err(|_| Termination::SolverFailure)?;
    let y = x.left_mul(c.matrix()).map_err(|_| Termination::SolverFailure)?;
    let f = cost.value(&y).map_err(|_| Termination::SolverFailure)?;
    Ok((
        Candidate {
            delta: step.delta,
            c,
            y,
            f,
            accepted: true,
        },
        0.0,
        0,
    ))
}

fn lm_iteration(
    cost: &dyn Contrast,
    x: &SampleMatrix,
    state: &IterateState,
    lambda: &mut f64,
    config: &OptimizerConfig,
) -> IterationOutcome {
    let mut rejected = 0;
    loop {
        let tried = *lambda;
        match lm_inner_step(cost, x, state, tried) {
            Ok(candidate) if candidate.accepted || candidate.delta.norm() < config.tol_step => {
                if candidate.accepted {
                    *lambda = (tried / config.alpha).max(config.lambda_min);
                }
                return Ok((candidate, tried, rejected));
            }
            // rejected candidate or a solve the damping has to repair
            Ok(_) | Err(_) => {}
        }
        rejected += 1;
        *lambda = tried * config.alpha;
        if *lambda > config.lambda_max || rejected > config.max_inner {
            return Err(Termination::LambdaOverflow);
        }
    }
}

fn finish(state: IterateState, trace: Vec<IterationRecord>, termination: Termination, lambda: f64) -> RunResult {
    RunResult {
        final_gradient: stationarity(&state.eval),
        c_final: state.c,
        y_final: state.y,
        trace,
        termination,
        final_lambda: lambda,
    }
}
