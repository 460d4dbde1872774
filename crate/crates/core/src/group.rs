//! Skew-symmetric coordinates and the orthogonal matrices they generate.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Orthogonality tolerance enforced after every accepted update.
pub const ORTHO_TOL: f64 = 1e-10;

/// An n×n skew-symmetric matrix, `Δ' = -Δ` exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct SkewCoordinates(DMatrix<f64>);

impl SkewCoordinates {
    pub fn zeros(n: usize) -> Self {
        Self(DMatrix::zeros(n, n))
    }

    /// Builds Δ from its strict upper triangle; the lower triangle is mirrored with a sign flip.
    pub fn from_upper(n: usize, mut upper: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = DMatrix::zeros(n, n);
        for col in 0..n {
            for row in 0..col {
                let v = upper(row, col);
                m[(row, col)] = v;
                m[(col, row)] = -v;
            }
        }
        Self(m)
    }

    /// Accepts `m` if it is skew-symmetric within `tol`, then antisymmetrizes it exactly.
    pub fn from_matrix(m: &DMatrix<f64>, tol: f64) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::Dimension("skew matrix must be square".into()));
        }
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("skew coordinates"));
        }
        let asym = (m + m.transpose()).abs().max();
        if asym > tol {
            return Err(Error::NotSkew(asym));
        }
        let n = m.nrows();
        Ok(Self::from_upper(n, |r, c| 0.5 * (m[(r, c)] - m[(c, r)])))
    }

    pub fn n(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.norm()
    }

    pub fn scale(&self, s: f64) -> Self {
        Self(&self.0 * s)
    }
}

impl std::ops::Neg for &SkewCoordinates {
    type Output = SkewCoordinates;
    fn neg(self) -> SkewCoordinates {
        SkewCoordinates(-&self.0)
    }
}

/// An n×n matrix with `||C'C - I||_F <= ORTHO_TOL`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DMatrix<f64>", into = "DMatrix<f64>")]
pub struct OrthogonalMatrix(DMatrix<f64>);

impl OrthogonalMatrix {
    pub fn identity(n: usize) -> Self {
        Self(DMatrix::identity(n, n))
    }

    /// Checks orthogonality against [`ORTHO_TOL`].
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::Dimension("orthogonal matrix must be square".into()));
        }
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("orthogonal matrix"));
        }
        let drift = ortho_drift(&m);
        if drift > ORTHO_TOL {
            return Err(Error::NotOrthogonal(drift));
        }
        Ok(Self(m))
    }

    pub(crate) fn new_unchecked(m: DMatrix<f64>) -> Self {
        Self(m)
    }

    pub fn n(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }

    pub fn drift(&self) -> f64 {
        ortho_drift(&self.0)
    }

    /// `self · rhs`, reorthogonalized if the product drifts beyond [`ORTHO_TOL`].
    pub fn mul(&self, rhs: &OrthogonalMatrix) -> Result<Self> {
        let prod = &self.0 * &rhs.0;
        if ortho_drift(&prod) > ORTHO_TOL {
            reorthogonalize(&prod)
        } else {
            Ok(Self(prod))
        }
    }
}

impl TryFrom<DMatrix<f64>> for OrthogonalMatrix {
    type Error = Error;
    fn try_from(m: DMatrix<f64>) -> Result<Self> {
        Self::new(m)
    }
}

impl From<OrthogonalMatrix> for DMatrix<f64> {
    fn from(m: OrthogonalMatrix) -> Self {
        m.0
    }
}

/// `||C'C - I||_F`.
pub fn ortho_drift(c: &DMatrix<f64>) -> f64 {
    let n = c.ncols();
    (c.transpose() * c - DMatrix::<f64>::identity(n, n)).norm()
}

/// Matrix exponential of a skew-symmetric matrix by scaling and squaring.
///
/// The scaled argument has norm at most 1/4, where a degree-18 Taylor
/// polynomial is accurate to well below machine precision.
pub fn expm_skew(delta: &SkewCoordinates) -> Result<OrthogonalMatrix> {
    let a = delta.matrix();
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("skew coordinates"));
    }
    let n = a.nrows();
    let norm = a.norm();
    if norm == 0.0 {
        return Ok(OrthogonalMatrix::identity(n));
    }
    let squarings = (norm / 0.25).log2().ceil().max(0.0) as i32;
    let scaled = a / 2f64.powi(squarings);

    // Horner form of sum_{k<=18} A^k / k!
    const DEGREE: u32 = 18;
    let eye = DMatrix::<f64>::identity(n, n);
    let mut result = eye.clone();
    for k in (1..=DEGREE).rev() {
        result = &eye + (&scaled * &result) / f64::from(k);
    }
    for _ in 0..squarings {
        result = &result * &result;
    }
    Ok(OrthogonalMatrix::new_unchecked(result))
}

/// Nearest orthogonal matrix in Frobenius norm (the orthogonal polar factor `U V'`).
pub fn reorthogonalize(c: &DMatrix<f64>) -> Result<OrthogonalMatrix> {
    if !c.is_square() {
        return Err(Error::Dimension("reorthogonalize expects a square matrix".into()));
    }
    if c.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("matrix to reorthogonalize"));
    }
    let svd = c.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if smax == 0.0 || smin <= 1e-12 * smax {
        return Err(Error::RankDeficient(smin));
    }
    let (Some(u), Some(v_t)) = (svd.u, svd.v_t) else {
        return Err(Error::RankDeficient(smin));
    };
    Ok(OrthogonalMatrix::new_unchecked(u * v_t))
}
