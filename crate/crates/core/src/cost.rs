//! Separable contrast functions and the statistics `F`, `R`, `U` they induce.
//!
//! For a cost `F(Y) = Σ_i E f_i(Y_i)` the first- and second-order statistics are
//!
//! ```text
//! R[k][i]    = E( f_i'(Y_i)  Y_k )
//! U_i[k][l]  = E( f_i''(Y_i) Y_k Y_l )
//! ```
//!
//! with `E` the uniform sample mean. They fully determine the second-order
//! expansion of `F(exp(Δ) Y)` in the skew coordinates `Δ`.

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Second moment below which a channel is considered degenerate.
pub const DEGENERATE_VARIANCE: f64 = 1e-12;

/// Channels × samples data matrix. Row `i` holds the samples of channel `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleMatrix(DMatrix<f64>);

impl SampleMatrix {
    pub fn new(data: DMatrix<f64>) -> Result<Self> {
        if data.nrows() == 0 {
            return Err(Error::Dimension("sample matrix has no channels".into()));
        }
        if data.ncols() < 2 {
            return Err(Error::Dimension(format!(
                "sample matrix needs at least 2 samples, got {}",
                data.ncols()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("sample matrix"));
        }
        Ok(Self(data))
    }

    /// Builds from per-channel sample vectors of equal length.
    pub fn from_channels(channels: &[Vec<f64>]) -> Result<Self> {
        let n = channels.len();
        let t = channels.first().map_or(0, Vec::len);
        if channels.iter().any(|c| c.len() != t) {
            return Err(Error::Dimension("channels have unequal lengths".into()));
        }
        Self::new(DMatrix::from_fn(n, t, |i, s| channels[i][s]))
    }

    pub fn n(&self) -> usize {
        self.0.nrows()
    }

    pub fn t(&self) -> usize {
        self.0.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }

    pub fn channel(&self, i: usize) -> Vec<f64> {
        self.0.row(i).iter().copied().collect()
    }

    /// `m · Y` for an n×n (or k×n) matrix `m`.
    pub fn left_mul(&self, m: &DMatrix<f64>) -> Result<Self> {
        if m.ncols() != self.n() {
            return Err(Error::Dimension(format!(
                "cannot multiply {}x{} matrix into {} channels",
                m.nrows(),
                m.ncols(),
                self.n()
            )));
        }
        Ok(Self(m * &self.0))
    }

    pub fn mean(&self) -> nalgebra::DVector<f64> {
        self.0.column_mean()
    }

    /// Mean-centered sample covariance with `1/t` normalization.
    pub fn covariance(&self) -> DMatrix<f64> {
        let t = self.t() as f64;
        let mean = self.mean();
        let mut centered = self.0.clone();
        for mut col in centered.column_iter_mut() {
            col -= &mean;
        }
        (&centered * centered.transpose()) / t
    }
}

/// A smooth function of one real variable together with its first two derivatives.
pub trait ScalarFunction: Send + Sync + fmt::Debug {
    fn value(&self, x: f64) -> f64;
    fn d1(&self, x: f64) -> f64;
    fn d2(&self, x: f64) -> f64;
}

/// Polynomial `Σ_k c_k x^k` with exact derivative coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial {
    coeffs: Vec<f64>,
    d1: Vec<f64>,
    d2: Vec<f64>,
}

impl Polynomial {
    /// Coefficients in ascending degree.
    pub fn new(coeffs: Vec<f64>) -> Self {
        let derive = |c: &[f64]| -> Vec<f64> {
            c.iter()
                .enumerate()
                .skip(1)
                .map(|(k, v)| k as f64 * v)
                .collect()
        };
        let d1 = derive(&coeffs);
        let d2 = derive(&d1);
        Self { coeffs, d1, d2 }
    }

    fn horner(c: &[f64], x: f64) -> f64 {
        c.iter().rev().fold(0.0, |acc, &v| acc * x + v)
    }
}

impl ScalarFunction for Polynomial {
    fn value(&self, x: f64) -> f64 {
        Self::horner(&self.coeffs, x)
    }
    fn d1(&self, x: f64) -> f64 {
        Self::horner(&self.d1, x)
    }
    fn d2(&self, x: f64) -> f64 {
        Self::horner(&self.d2, x)
    }
}

type RealFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A scalar function assembled from three closures.
#[derive(Clone)]
pub struct Smooth {
    name: String,
    f: RealFn,
    d1: RealFn,
    d2: RealFn,
}

impl Smooth {
    pub fn new(
        name: impl Into<String>,
        f: impl Fn(f64) -> f64 + Send + Sync + 'static,
        d1: impl Fn(f64) -> f64 + Send + Sync + 'static,
        d2: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            name: name.into(),
            f: Arc::new(f),
            d1: Arc::new(d1),
            d2: Arc::new(d2),
        }
    }
}

impl fmt::Debug for Smooth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Smooth").field("name", &self.name).finish()
    }
}

impl ScalarFunction for Smooth {
    fn value(&self, x: f64) -> f64 {
        (self.f)(x)
    }
    fn d1(&self, x: f64) -> f64 {
        (self.d1)(x)
    }
    fn d2(&self, x: f64) -> f64 {
        (self.d2)(x)
    }
}

/// Statistics of a cost at the current estimates `Y`.
#[derive(Debug, Clone, PartialEq)]
pub struct CostEvaluation {
    pub f: f64,
    /// `r[(k, i)] = E(f_i'(Y_i) Y_k)`.
    pub r: DMatrix<f64>,
    /// `u[i][(k, l)] = E(f_i''(Y_i) Y_k Y_l)`; each block is symmetric.
    pub u: Vec<DMatrix<f64>>,
}

impl CostEvaluation {
    pub fn n(&self) -> usize {
        self.r.nrows()
    }

    /// `U_{ikl}`.
    #[inline]
    pub fn u_at(&self, i: usize, k: usize, l: usize) -> f64 {
        self.u[i][(k, l)]
    }

    fn check_finite(self) -> Result<Self> {
        if !self.f.is_finite() {
            return Err(Error::NonFiniteStatistic("F"));
        }
        if self.r.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteStatistic("R"));
        }
        if self.u.iter().flat_map(|m| m.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteStatistic("U"));
        }
        Ok(self)
    }
}

/// A cost whose value and second-order statistics can be computed from samples.
pub trait Contrast: Send + Sync {
    fn name(&self) -> &str;

    /// `F(Y)` only; cheaper than [`Contrast::evaluate`].
    fn value(&self, y: &SampleMatrix) -> Result<f64>;

    fn evaluate(&self, y: &SampleMatrix) -> Result<CostEvaluation>;
}

/// Per-channel function selection.
#[derive(Debug, Clone)]
pub enum ChannelFunctions {
    /// The same function on every channel.
    Uniform(Arc<dyn ScalarFunction>),
    /// One function per channel; the length must equal the channel count.
    PerChannel(Vec<Arc<dyn ScalarFunction>>),
}

impl ChannelFunctions {
    fn get(&self, i: usize) -> &dyn ScalarFunction {
        match self {
            Self::Uniform(f) => f.as_ref(),
            Self::PerChannel(v) => v[i].as_ref(),
        }
    }

    fn check(&self, n: usize) -> Result<()> {
        match self {
            Self::PerChannel(v) if v.len() != n => Err(Error::Dimension(format!(
                "cost defines {} channel functions, data has {n} channels",
                v.len()
            ))),
            _ => Ok(()),
        }
    }
}

/// `F(Y) = Σ_i E f_i(Y_i)`.
#[derive(Debug, Clone)]
pub struct SeparableCost {
    name: String,
    functions: ChannelFunctions,
    min_second_moment: Option<f64>,
}

impl SeparableCost {
    pub fn new(name: impl Into<String>, functions: ChannelFunctions) -> Self {
        Self {
            name: name.into(),
            functions,
            min_second_moment: None,
        }
    }

    pub fn uniform(name: impl Into<String>, f: impl ScalarFunction + 'static) -> Self {
        Self::new(name, ChannelFunctions::Uniform(Arc::new(f)))
    }

    /// Rejects data whose channels have second moment at or below `floor`.
    pub fn with_degenerate_check(mut self, floor: f64) -> Self {
        self.min_second_moment = Some(floor);
        self
    }
}

impl Contrast for SeparableCost {
    fn name(&self) -> &str {
        &self.name
    }

    fn value(&self, y: &SampleMatrix) -> Result<f64> {
        self.functions.check(y.n())?;
        check_channels(y, self.min_second_moment)?;
        let means = channel_means(y, |i| self.functions.get(i));
        let f: f64 = means.iter().sum();
        if f.is_finite() {
            Ok(f)
        } else {
            Err(Error::NonFiniteStatistic("F"))
        }
    }

    fn evaluate(&self, y: &SampleMatrix) -> Result<CostEvaluation> {
        self.functions.check(y.n())?;
        check_channels(y, self.min_second_moment)?;
        let m = raw_statistics(y, |i| self.functions.get(i));
        CostEvaluation {
            f: m.means.iter().sum(),
            r: m.r,
            u: m.u,
        }
        .check_finite()
    }
}

/// `F(Y) = Σ_i g(E f(Y_i))`: an outer function applied to per-channel means.
///
/// Statistics follow from the chain rule with `u_i = E f(Y_i)`:
/// `R[k][i] = g'(u_i) R^f[k][i]` and
/// `U_i[k][l] = g'(u_i) U^f_i[k][l] + g''(u_i) R^f[k][i] R^f[l][i]`.
#[derive(Debug, Clone)]
pub struct CompositeCost {
    name: String,
    inner: Arc<dyn ScalarFunction>,
    outer: Arc<dyn ScalarFunction>,
    min_second_moment: Option<f64>,
}

impl CompositeCost {
    pub fn new(
        name: impl Into<String>,
        inner: impl ScalarFunction + 'static,
        outer: impl ScalarFunction + 'static,
    ) -> Self {
        Self {
            name: name.into(),
            inner: Arc::new(inner),
            outer: Arc::new(outer),
            min_second_moment: None,
        }
    }

    pub fn with_degenerate_check(mut self, floor: f64) -> Self {
        self.min_second_moment = Some(floor);
        self
    }
}

impl Contrast for CompositeCost {
    fn name(&self) -> &str {
        &self.name
    }

    fn value(&self, y: &SampleMatrix) -> Result<f64> {
        check_channels(y, self.min_second_moment)?;
        let means = channel_means(y, |_| self.inner.as_ref());
        let f: f64 = means.iter().map(|&u| self.outer.value(u)).sum();
        if f.is_finite() {
            Ok(f)
        } else {
            Err(Error::NonFiniteStatistic("F"))
        }
    }

    fn evaluate(&self, y: &SampleMatrix) -> Result<CostEvaluation> {
        check_channels(y, self.min_second_moment)?;
        let n = y.n();
        let m = raw_statistics(y, |_| self.inner.as_ref());
        let mut r = m.r;
        let mut u = m.u;
        let mut f = 0.0;
        for i in 0..n {
            let ui = m.means[i];
            let g1 = self.outer.d1(ui);
            let g2 = self.outer.d2(ui);
            f += self.outer.value(ui);
            let rf_col: Vec<f64> = r.column(i).iter().copied().collect();
            for k in 0..n {
                for l in 0..n {
                    u[i][(k, l)] = g1 * u[i][(k, l)] + g2 * rf_col[k] * rf_col[l];
                }
            }
            for k in 0..n {
                r[(k, i)] = g1 * rf_col[k];
            }
        }
        CostEvaluation { f, r, u }.check_finite()
    }
}

fn check_channels(y: &SampleMatrix, floor: Option<f64>) -> Result<()> {
    let Some(floor) = floor else {
        return Ok(());
    };
    let t = y.t() as f64;
    for (i, row) in y.matrix().row_iter().enumerate() {
        let moment = row.iter().map(|v| v * v).sum::<f64>() / t;
        if moment <= floor {
            return Err(Error::DegenerateChannel { channel: i, moment });
        }
    }
    Ok(())
}

fn channel_means<'a>(y: &SampleMatrix, fun: impl Fn(usize) -> &'a dyn ScalarFunction) -> Vec<f64> {
    let (n, t) = (y.n(), y.t());
    let data = y.matrix().as_slice();
    let mut sums = vec![0.0; n];
    for s in 0..t {
        let col = &data[s * n..(s + 1) * n];
        for (i, sum) in sums.iter_mut().enumerate() {
            *sum += fun(i).value(col[i]);
        }
    }
    sums.into_iter().map(|v| v / t as f64).collect()
}

struct RawStatistics {
    means: Vec<f64>,
    r: DMatrix<f64>,
    u: Vec<DMatrix<f64>>,
}

fn raw_statistics<'a>(
    y: &SampleMatrix,
    fun: impl Fn(usize) -> &'a dyn ScalarFunction,
) -> RawStatistics {
    let (n, t) = (y.n(), y.t());
    let data = y.matrix().as_slice();
    let mut means = vec![0.0; n];
    let mut r = vec![0.0; n * n];
    // upper triangle (l >= k) of each U_i, flattened as i*n*n + k*n + l
    let mut u = vec![0.0; n * n * n];
    let mut d1 = vec![0.0; n];
    let mut d2 = vec![0.0; n];
    for s in 0..t {
        let col = &data[s * n..(s + 1) * n];
        for i in 0..n {
            let f = fun(i);
            means[i] += f.value(col[i]);
            d1[i] = f.d1(col[i]);
            d2[i] = f.d2(col[i]);
        }
        for i in 0..n {
            for k in 0..n {
                r[k + i * n] += d1[i] * col[k];
            }
        }
        for i in 0..n {
            let base = i * n * n;
            for k in 0..n {
                let w = d2[i] * col[k];
                for l in k..n {
                    u[base + k * n + l] += w * col[l];
                }
            }
        }
    }
    let inv_t = 1.0 / t as f64;
    let means = means.into_iter().map(|v| v * inv_t).collect();
    let r = DMatrix::from_column_slice(n, n, &r) * inv_t;
    let u = (0..n)
        .map(|i| {
            let base = i * n * n;
            DMatrix::from_fn(n, n, |k, l| {
                let (a, b) = if k <= l { (k, l) } else { (l, k) };
                u[base + a * n + b] * inv_t
            })
        })
        .collect();
    RawStatistics { means, r, u }
}

/// Sample excess kurtosis `E(A⁴)/E(A²)² - 3` from raw moments.
pub fn kurtosis(samples: &[f64]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::DegenerateChannel { channel: 0, moment: 0.0 });
    }
    let t = samples.len() as f64;
    let (m2, m4) = samples.iter().fold((0.0, 0.0), |(m2, m4), &a| {
        let a2 = a * a;
        (m2 + a2, m4 + a2 * a2)
    });
    let (m2, m4) = (m2 / t, m4 / t);
    if m2 <= DEGENERATE_VARIANCE {
        return Err(Error::DegenerateChannel { channel: 0, moment: m2 });
    }
    Ok(m4 / (m2 * m2) - 3.0)
}

/// `f(y) = -(y⁴ - 3)`: minus the kurtosis under unit variance.
pub fn make_neg_kurtosis() -> SeparableCost {
    SeparableCost::uniform("neg-kurtosis", Polynomial::new(vec![3.0, 0.0, 0.0, 0.0, -1.0]))
        .with_degenerate_check(DEGENERATE_VARIANCE)
}

/// `F_i = -κ_i²` with `κ_i = E(Y_i⁴) - 3` under unit variance.
pub fn make_neg_kurtosis_squared() -> CompositeCost {
    CompositeCost::new(
        "neg-kurtosis-squared",
        Polynomial::new(vec![-3.0, 0.0, 0.0, 0.0, 1.0]),
        Polynomial::new(vec![0.0, 0.0, -1.0]),
    )
    .with_degenerate_check(DEGENERATE_VARIANCE)
}
