//! Prewhitening, synthetic mixing, and separation scoring.
//!
//! All randomness comes from ChaCha8 (`rand_chacha::ChaCha8Rng`) seeded with
//! `seed_from_u64(seed)`, with a fixed stream id per purpose (see [`streams`]).

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cost::{Contrast, SampleMatrix};
use crate::error::{Error, Result};
use crate::group::OrthogonalMatrix;
use crate::optimizer::{run, OptimizerConfig, RunResult};

/// ChaCha stream ids, one per independent use of a seed.
pub mod streams {
    pub const MIXING: u64 = 0;
    pub const SOURCES: u64 = 1;
    pub const INITIAL: u64 = 2;
    pub const STATISTICS: u64 = 3;
}

/// The generator used for every seeded draw in this crate.
pub fn seeded_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Affine map `x ↦ matrix·(x - mean)` producing identity sample covariance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WhiteningTransform {
    pub mean: DVector<f64>,
    pub matrix: DMatrix<f64>,
}

impl WhiteningTransform {
    pub fn apply(&self, x: &SampleMatrix) -> Result<SampleMatrix> {
        if x.n() != self.mean.len() {
            return Err(Error::Dimension("whitening/data channel mismatch".into()));
        }
        let mut centered = x.matrix().clone();
        for mut col in centered.column_iter_mut() {
            col -= &self.mean;
        }
        SampleMatrix::new(&self.matrix * centered)
    }
}

/// Symmetric prewhitening: `matrix = Σ^{-1/2}` from the eigendecomposition of
/// the mean-centered sample covariance.
pub fn prewhiten(x_raw: &SampleMatrix) -> Result<(SampleMatrix, WhiteningTransform)> {
    let cov = x_raw.covariance();
    let eig = cov.symmetric_eigen();
    let max = eig.eigenvalues.max();
    let min = eig.eigenvalues.min();
    if !(max > 0.0) || min <= 1e-12 * max {
        return Err(Error::RankDeficientData { min, max });
    }
    let inv_sqrt = DMatrix::from_diagonal(&eig.eigenvalues.map(|v| 1.0 / v.sqrt()));
    let matrix = &eig.eigenvectors * inv_sqrt * eig.eigenvectors.transpose();
    let transform = WhiteningTransform {
        mean: x_raw.mean(),
        matrix,
    };
    let white = transform.apply(x_raw)?;
    Ok((white, transform))
}

/// A seeded mixing matrix `A = I + S`, `S` uniform on `(-1/2, 1/2)`.
///
/// Diagonal dominance is not guaranteed: a row's off-diagonal magnitudes can
/// sum past its diagonal entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixingSpec {
    pub n: usize,
    pub seed: u64,
    pub a: DMatrix<f64>,
}

pub fn make_mixing(n: usize, seed: u64) -> Result<MixingSpec> {
    if n < 2 {
        return Err(Error::Dimension(format!("mixing needs n >= 2, got {n}")));
    }
    let mut rng = seeded_rng(seed, streams::MIXING);
    let mut a = DMatrix::identity(n, n);
    // column-major fill so the draw order is fixed
    for v in a.iter_mut() {
        *v += open_half_interval(&mut rng);
    }
    Ok(MixingSpec { n, seed, a })
}

fn open_half_interval(rng: &mut impl Rng) -> f64 {
    loop {
        let v: f64 = rng.random_range(-0.5..0.5);
        if v != -0.5 {
            return v;
        }
    }
}

/// Unit-variance source families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceKind {
    /// Uniform on `[-√3, √3]`, kurtosis -1.2.
    Uniform,
    /// Laplace with scale `1/√2`, kurtosis 3.
    Laplace,
    /// Equiprobable ±1, kurtosis -2.
    TwoPoint,
    /// Standard normal, kurtosis 0.
    Gaussian,
}

impl SourceKind {
    pub fn parse(name: &str) -> Result<Self> {
        match name.trim().to_ascii_lowercase().as_str() {
            "uniform" => Ok(Self::Uniform),
            "laplace" => Ok(Self::Laplace),
            "twopoint" | "two-point" | "two_point" => Ok(Self::TwoPoint),
            "gaussian" | "normal" => Ok(Self::Gaussian),
            other => Err(Error::Config(format!("unknown source kind '{other}'"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Uniform => "uniform",
            Self::Laplace => "laplace",
            Self::TwoPoint => "twopoint",
            Self::Gaussian => "gaussian",
        }
    }

    fn sample(self, rng: &mut impl Rng) -> f64 {
        match self {
            Self::Uniform => 3f64.sqrt() * rng.random_range(-1.0..1.0),
            Self::Laplace => {
                let u = open_half_interval(rng);
                -std::f64::consts::FRAC_1_SQRT_2 * u.signum() * (1.0 - 2.0 * u.abs()).ln()
            }
            Self::TwoPoint => {
                if rng.random::<bool>() {
                    1.0
                } else {
                    -1.0
                }
            }
            Self::Gaussian => rng.sample(rand_distr::StandardNormal),
        }
    }
}

/// The three-source acceptance set: uniform, Laplace, two-point.
pub const DEFAULT_SOURCES: [SourceKind; 3] = [SourceKind::Uniform, SourceKind::Laplace, SourceKind::TwoPoint];

/// `t` samples of each source kind, drawn sample-major from one seeded stream.
pub fn synthetic_sources(kinds: &[SourceKind], t: usize, seed: u64) -> Result<SampleMatrix> {
    let mut rng = seeded_rng(seed, streams::SOURCES);
    let n = kinds.len();
    let mut data = DMatrix::zeros(n, t);
    for s in 0..t {
        for (i, kind) in kinds.iter().enumerate() {
            data[(i, s)] = kind.sample(&mut rng);
        }
    }
    SampleMatrix::new(data)
}

/// Haar-distributed orthogonal matrix (QR of a Gaussian matrix with sign correction).
pub fn haar_orthogonal(n: usize, seed: u64) -> Result<OrthogonalMatrix> {
    let mut rng = seeded_rng(seed, streams::INITIAL);
    let g = DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(rand_distr::StandardNormal));
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..n {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    crate::group::reorthogonalize(&q)
}

/// `G = C · whitening · A`.
pub fn global_transfer(c: &OrthogonalMatrix, whitening: &WhiteningTransform, a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = c.n();
    if whitening.matrix.nrows() != n || a.nrows() != n || a.ncols() != n {
        return Err(Error::Dimension("global transfer operands disagree in size".into()));
    }
    Ok(c.matrix() * &whitening.matrix * a)
}

/// Residual crosstalk of a global transfer matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrosstalkReport {
    pub g: DMatrix<f64>,
    /// `Σ_{j≠j*} |G_ij| / |G_ij*|` per output row.
    pub per_channel: Vec<f64>,
    pub mean_percent: f64,
    /// Dominant source index per output row.
    pub permutation: Vec<usize>,
    /// False when two outputs claim the same source.
    pub is_bijection: bool,
    /// Amari index of `G` (diagnostic only).
    pub amari_index: f64,
}

pub fn crosstalk(g: &DMatrix<f64>) -> Result<CrosstalkReport> {
    let mut per_channel = Vec::with_capacity(g.nrows());
    let mut permutation = Vec::with_capacity(g.nrows());
    for (i, row) in g.row_iter().enumerate() {
        let mut best = 0;
        for j in 1..row.len() {
            if row[j].abs() > row[best].abs() {
                best = j;
            }
        }
        let peak = row[best].abs();
        if !(peak > 0.0) || !peak.is_finite() {
            return Err(Error::Dimension(format!("row {i} of the transfer matrix is zero")));
        }
        let leak: f64 = row.iter().enumerate().filter(|&(j, _)| j != best).map(|(_, v)| v.abs()).sum();
        per_channel.push(leak / peak);
        permutation.push(best);
    }
    let mut seen = vec![false; g.ncols()];
    let is_bijection = g.nrows() == g.ncols() && permutation.iter().all(|&j| !std::mem::replace(&mut seen[j], true));
    let mean_percent = 100.0 * per_channel.iter().sum::<f64>() / per_channel.len() as f64;
    Ok(CrosstalkReport {
        g: g.clone(),
        per_channel,
        mean_percent,
        permutation,
        is_bijection,
        amari_index: amari_index(g),
    })
}

/// Normalized Amari index in `[0, 1]`; zero iff `G` is a scaled permutation.
pub fn amari_index(g: &DMatrix<f64>) -> f64 {
    let n = g.nrows();
    if n < 2 {
        return 0.0;
    }
    let abs = g.abs();
    let mut total = 0.0;
    for row in abs.row_iter() {
        total += row.sum() / row.max() - 1.0;
    }
    for col in abs.column_iter() {
        total += col.sum() / col.max() - 1.0;
    }
    total / (2.0 * n as f64 * (n as f64 - 1.0))
}

/// Result of [`run_ica`].
#[derive(Debug, Clone)]
pub struct IcaOutcome {
    pub run: RunResult,
    pub whitening: WhiteningTransform,
    pub crosstalk: Option<CrosstalkReport>,
}

/// Prewhiten, optimize over O(n) from `c0` (identity when `None`), and score
/// against `truth` when the mixing matrix is known.
pub fn run_ica(
    x_raw: &SampleMatrix,
    cost: &dyn Contrast,
    config: &OptimizerConfig,
    c0: Option<OrthogonalMatrix>,
    truth: Option<&DMatrix<f64>>,
) -> Result<IcaOutcome> {
    let (white, whitening) = prewhiten(x_raw)?;
    let c0 = c0.unwrap_or_else(|| OrthogonalMatrix::identity(x_raw.n()));
    let run = run(cost, &white, c0, config)?;
    let crosstalk = truth
        .map(|a| global_transfer(&run.c_final, &whitening, a).and_then(|g| crosstalk(&g)))
        .transpose()?;
    Ok(IcaOutcome {
        run,
        whitening,
        crosstalk,
    })
}

/// One seeded synthetic separation problem.
#[derive(Debug, Clone)]
pub struct SyntheticProblem {
    pub sources: SampleMatrix,
    pub mixing: MixingSpec,
    pub mixed: SampleMatrix,
}

impl SyntheticProblem {
    pub fn generate(kinds: &[SourceKind], t: usize, seed: u64) -> Result<Self> {
        let sources = synthetic_sources(kinds, t, seed)?;
        let mixing = make_mixing(kinds.len(), seed)?;
        let mixed = sources.left_mul(&mixing.a)?;
        Ok(Self { sources, mixing, mixed })
    }
}
