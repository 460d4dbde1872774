//! Column-string vectorization and the fixed n²×n² operators built on it.
//!
//! Indexing is zero-based throughout: the entry `A[(row, col)]` of an n×n
//! matrix lives at position `row + col * n` of its column string.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Position of `A[(row, col)]` inside `cs(A)`.
#[inline]
pub fn cs_index(n: usize, row: usize, col: usize) -> usize {
    row + col * n
}

/// Column-major flattening of an n×n matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ColumnString {
    n: usize,
    entries: DVector<f64>,
}

impl ColumnString {
    pub fn new(entries: DVector<f64>) -> Result<Self> {
        let n = exact_sqrt(entries.len()).ok_or(Error::NotPerfectSquare(entries.len()))?;
        Ok(Self { n, entries })
    }

    pub fn from_slice(values: &[f64]) -> Result<Self> {
        Self::new(DVector::from_column_slice(values))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn as_vector(&self) -> &DVector<f64> {
        &self.entries
    }

    pub fn into_vector(self) -> DVector<f64> {
        self.entries
    }

    pub fn as_slice(&self) -> &[f64] {
        self.entries.as_slice()
    }
}

fn exact_sqrt(len: usize) -> Option<usize> {
    let root = (len as f64).sqrt().round() as usize;
    (root * root == len).then_some(root)
}

/// `cs(A)`: stacks the columns of `a`.
///
/// Panics if `a` is not square.
pub fn cs(a: &DMatrix<f64>) -> ColumnString {
    assert!(a.is_square(), "cs expects a square matrix, got {}x{}", a.nrows(), a.ncols());
    // nalgebra stores matrices column-major, which is exactly the cs order.
    ColumnString {
        n: a.nrows(),
        entries: DVector::from_column_slice(a.as_slice()),
    }
}

/// Inverse of [`cs`].
pub fn cs_inv(v: &ColumnString) -> DMatrix<f64> {
    DMatrix::from_column_slice(v.n, v.n, v.entries.as_slice())
}

/// Inverse of [`cs`] for a raw vector whose length must be a perfect square.
pub fn cs_inv_slice(values: &[f64]) -> Result<DMatrix<f64>> {
    let n = exact_sqrt(values.len()).ok_or(Error::NotPerfectSquare(values.len()))?;
    Ok(DMatrix::from_column_slice(n, n, values))
}

/// A real n²×n² operator acting on column strings.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorN2 {
    n: usize,
    matrix: DMatrix<f64>,
    is_permutation: bool,
    is_projection: bool,
}

impl OperatorN2 {
    pub fn from_matrix(n: usize, matrix: DMatrix<f64>) -> Result<Self> {
        let m = n * n;
        if matrix.nrows() != m || matrix.ncols() != m {
            return Err(Error::Dimension(format!(
                "operator for n={n} must be {m}x{m}, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        Ok(Self {
            n,
            matrix,
            is_permutation: false,
            is_projection: false,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.matrix
    }

    pub fn is_permutation(&self) -> bool {
        self.is_permutation
    }

    pub fn is_projection(&self) -> bool {
        self.is_projection
    }

    pub fn apply(&self, v: &ColumnString) -> ColumnString {
        assert_eq!(v.n, self.n, "operator/vector dimension mismatch");
        ColumnString {
            n: self.n,
            entries: &self.matrix * &v.entries,
        }
    }

    pub fn transpose(&self) -> Self {
        Self {
            n: self.n,
            matrix: self.matrix.transpose(),
            is_permutation: self.is_permutation,
            is_projection: self.is_projection,
        }
    }

    /// Operator product `self · rhs`. Structural flags are dropped.
    pub fn compose(&self, rhs: &Self) -> Self {
        assert_eq!(self.n, rhs.n, "operator dimension mismatch");
        Self {
            n: self.n,
            matrix: &self.matrix * &rhs.matrix,
            is_permutation: false,
            is_projection: false,
        }
    }

    pub fn add(&self, rhs: &Self) -> Self {
        assert_eq!(self.n, rhs.n, "operator dimension mismatch");
        Self {
            n: self.n,
            matrix: &self.matrix + &rhs.matrix,
            is_permutation: false,
            is_projection: false,
        }
    }

    fn diagonal(n: usize, select: impl Fn(usize) -> bool) -> Self {
        let m = n * n;
        let diag = DVector::from_fn(m, |k, _| if select(k) { 1.0 } else { 0.0 });
        Self {
            n,
            matrix: DMatrix::from_diagonal(&diag),
            is_permutation: false,
            is_projection: true,
        }
    }
}

/// The commutation matrix `T` with `T·cs(A) = cs(A')`.
pub fn build_t(n: usize) -> OperatorN2 {
    let m = n * n;
    let mut t = DMatrix::zeros(m, m);
    for col in 0..n {
        for row in 0..n {
            // cs(A')[row + col n] = A[(col, row)] = cs(A)[col + row n]
            t[(cs_index(n, row, col), cs_index(n, col, row))] = 1.0;
        }
    }
    OperatorN2 {
        n,
        matrix: t,
        is_permutation: true,
        is_projection: false,
    }
}

/// Sum of π/4 rotations pairing each upper-triangle slot with its mirror.
///
/// For every pair `i > j` the upper slot `a = cs_index(j, i)` and the lower
/// slot `b = cs_index(i, j)` receive
/// `[Hx]_a = (x_a - x_b)/√2` and `[Hx]_b = (x_a + x_b)/√2`.
/// Diagonal slots are left empty; `H + P_D` is orthogonal.
pub fn build_h(n: usize) -> OperatorN2 {
    let m = n * n;
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut h = DMatrix::zeros(m, m);
    for i in 0..n {
        for j in 0..i {
            let a = cs_index(n, j, i);
            let b = cs_index(n, i, j);
            h[(a, a)] = s;
            h[(a, b)] = -s;
            h[(b, a)] = s;
            h[(b, b)] = s;
        }
    }
    OperatorN2 {
        n,
        matrix: h,
        is_permutation: false,
        is_projection: false,
    }
}

/// Projector onto the diagonal slots `cs_index(i, i)`.
pub fn build_pd(n: usize) -> OperatorN2 {
    OperatorN2::diagonal(n, |k| k % n == k / n)
}

/// Projector onto the lower-triangle slots `cs_index(i, j)`, `j <= i`.
pub fn build_ps(n: usize) -> OperatorN2 {
    OperatorN2::diagonal(n, |k| is_symmetric_slot(n, k))
}

/// Complement of [`build_ps`]: the strict upper-triangle slots.
pub fn build_pa(n: usize) -> OperatorN2 {
    OperatorN2::diagonal(n, |k| !is_symmetric_slot(n, k))
}

/// True when cs position `k` is a symmetric-combination slot after rotation by `H + P_D`.
#[inline]
pub fn is_symmetric_slot(n: usize, k: usize) -> bool {
    let (row, col) = (k % n, k / n);
    col <= row
}

/// The strict upper-triangle pairs `(row, col)`, `row < col`, in ascending cs order.
///
/// This is the ordering of the reduced antisymmetric coordinates.
pub fn antisymmetric_pairs(n: usize) -> Vec<(usize, usize)> {
    let mut pairs = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    for col in 0..n {
        for row in 0..col {
            pairs.push((row, col));
        }
    }
    pairs
}

/// Kronecker product `A ⊗ B` with block `(k, k')` equal to `A[(k, k')]·B`.
pub fn kron(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    a.kronecker(b)
}

/// Block-diagonal direct sum of square blocks.
pub fn direct_sum(blocks: &[DMatrix<f64>]) -> DMatrix<f64> {
    let size: usize = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = DMatrix::zeros(size, size);
    let mut offset = 0;
    for block in blocks {
        let k = block.nrows();
        out.view_mut((offset, offset), (k, k)).copy_from(block);
        offset += k;
    }
    out
}
