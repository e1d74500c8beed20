//! Dense square matrices and the kernels built on them: log singular values,
//! compound (exterior power) matrices, the generalized singular value
//! function and an overflow-safe scaled product accumulator.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A dense `d × d` real matrix stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    dim: usize,
    data: Vec<f64>,
}

impl Matrix {
    /// Builds a matrix from row-major data of length `dim * dim`.
    pub fn new(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Input("matrix dimension must be at least 1".into()));
        }
        if data.len() != dim * dim {
            return Err(Error::Input(format!(
                "expected {} entries for a {dim}x{dim} matrix, got {}",
                dim * dim,
                data.len()
            )));
        }
        Ok(Self { dim, data })
    }

    /// Builds a matrix from a list of rows; every row must have `rows.len()` entries.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let dim = rows.len();
        let mut data = Vec::with_capacity(dim * dim);
        for (i, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != dim {
                return Err(Error::Input(format!(
                    "row {} has {} entries, expected {dim}",
                    i + 1,
                    row.len()
                )));
            }
            data.extend_from_slice(row);
        }
        Self::new(dim, data)
    }

    pub fn identity(dim: usize) -> Self {
        Self::diag(&vec![1.0; dim])
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: vec![0.0; dim * dim],
        }
    }

    pub fn diag(entries: &[f64]) -> Self {
        let dim = entries.len();
        let mut m = Self::zeros(dim);
        for (i, &v) in entries.iter().enumerate() {
            m.data[i * dim + i] = v;
        }
        m
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.dim + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        self.data[row * self.dim + col] = value;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks(self.dim).map(<[f64]>::to_vec).collect()
    }

    pub fn column(&self, col: usize) -> Vec<f64> {
        (0..self.dim).map(|r| self.get(r, col)).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Matrix product `self · rhs`.
    pub fn mul(&self, rhs: &Matrix) -> Matrix {
        let mut out = Matrix::zeros(self.dim);
        mul_into(self, rhs, &mut out);
        out
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        let d = self.dim;
        (0..d)
            .map(|i| (0..d).map(|j| self.data[i * d + j] * v[j]).sum())
            .collect()
    }

    pub fn scaled(&self, factor: f64) -> Matrix {
        Matrix {
            dim: self.dim,
            data: self.data.iter().map(|v| v * factor).collect(),
        }
    }

    pub fn transpose(&self) -> Matrix {
        let d = self.dim;
        let mut out = Matrix::zeros(d);
        for i in 0..d {
            for j in 0..d {
                out.data[j * d + i] = self.data[i * d + j];
            }
        }
        out
    }

    /// Maximum absolute row sum.
    pub fn inf_norm(&self) -> f64 {
        self.data
            .chunks(self.dim)
            .map(|row| row.iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Signed determinant via Gaussian elimination with partial pivoting.
    pub fn det(&self) -> f64 {
        let (sign, log_abs) = self.sign_log_abs_det();
        if sign == 0.0 {
            0.0
        } else {
            sign * log_abs.exp()
        }
    }

    /// `log |det|`, `-inf` for singular matrices.
    pub fn log_abs_det(&self) -> f64 {
        self.sign_log_abs_det().1
    }

    fn sign_log_abs_det(&self) -> (f64, f64) {
        let d = self.dim;
        let mut a = self.data.clone();
        let mut sign = 1.0;
        let mut log_abs = 0.0;
        for col in 0..d {
            let pivot = (col..d)
                .max_by(|&x, &y| a[x * d + col].abs().total_cmp(&a[y * d + col].abs()))
                .unwrap_or(col);
            let p = a[pivot * d + col];
            if p == 0.0 {
                return (0.0, f64::NEG_INFINITY);
            }
            if pivot != col {
                for j in 0..d {
                    a.swap(pivot * d + j, col * d + j);
                }
                sign = -sign;
            }
            if p < 0.0 {
                sign = -sign;
            }
            log_abs += p.abs().ln();
            for r in col + 1..d {
                let factor = a[r * d + col] / p;
                if factor != 0.0 {
                    for j in col..d {
                        a[r * d + j] -= factor * a[col * d + j];
                    }
                }
            }
        }
        (sign, log_abs)
    }

    pub fn inverse(&self) -> Result<Matrix> {
        let inv = self
            .to_nalgebra()
            .try_inverse()
            .ok_or_else(|| Error::Numeric("matrix is not invertible".into()))?;
        let m = Matrix::from_nalgebra(&inv);
        if !m.is_finite() {
            return Err(Error::Numeric("inverse has non-finite entries".into()));
        }
        Ok(m)
    }

    pub fn to_nalgebra(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.dim, self.dim, &self.data)
    }

    pub fn from_nalgebra(m: &DMatrix<f64>) -> Matrix {
        let dim = m.nrows();
        let mut out = Matrix::zeros(dim);
        for i in 0..dim {
            for j in 0..dim {
                out.data[i * dim + j] = m[(i, j)];
            }
        }
        out
    }
}

/// `out = a · b`; `out` must not alias either operand.
pub fn mul_into(a: &Matrix, b: &Matrix, out: &mut Matrix) {
    let d = a.dim;
    debug_assert_eq!(b.dim, d);
    debug_assert_eq!(out.dim, d);
    for i in 0..d {
        let row = &a.data[i * d..(i + 1) * d];
        let dst = &mut out.data[i * d..(i + 1) * d];
        dst.fill(0.0);
        for (k, &aik) in row.iter().enumerate() {
            if aik != 0.0 {
                let brow = &b.data[k * d..(k + 1) * d];
                for (o, &bkj) in dst.iter_mut().zip(brow) {
                    *o += aik * bkj;
                }
            }
        }
    }
}

/// Parameter vector `q` of the generalized singular value function.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct QVector(Vec<f64>);

impl QVector {
    pub fn new(q: Vec<f64>) -> Result<Self> {
        if q.iter().any(|v| !v.is_finite()) {
            return Err(Error::Input("q has non-finite entries".into()));
        }
        Ok(Self(q))
    }

    pub fn zeros(d: usize) -> Self {
        Self(vec![0.0; d])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl std::ops::Deref for QVector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// Natural logs of the singular values, sorted nonincreasing.
#[derive(Clone, Debug, PartialEq)]
pub struct SingularSpectrum {
    log_sigma: Vec<f64>,
}

impl SingularSpectrum {
    pub fn log_sigma(&self) -> &[f64] {
        &self.log_sigma
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.log_sigma
    }

    /// `log σ_1 + … + log σ_m`, i.e. `log ‖∧^m M‖`.
    pub fn log_norm_of_power(&self, m: usize) -> f64 {
        self.log_sigma[..m].iter().sum()
    }

    /// `Σ q_i log σ_i`, with `0 · (-inf)` read as `0`.
    pub fn log_psi(&self, q: &[f64]) -> Result<f64> {
        if q.len() != self.log_sigma.len() {
            return Err(Error::Input(format!(
                "q has length {}, expected {}",
                q.len(),
                self.log_sigma.len()
            )));
        }
        let mut acc = 0.0;
        for (&qi, &ls) in q.iter().zip(&self.log_sigma) {
            if qi == 0.0 {
                continue;
            }
            if ls == f64::NEG_INFINITY && qi < 0.0 {
                return Err(Error::Domain(
                    "negative exponent on a zero singular value".into(),
                ));
            }
            acc += qi * ls;
        }
        Ok(acc)
    }
}

/// Log singular values of `base`, shifted by `log_scale`, with the smallest
/// recovered from `log_abs_det` (the log-determinant of the represented
/// matrix) so that the sum is exact up to rounding.
pub(crate) fn log_singular_values_raw(base: &Matrix, log_scale: f64, log_abs_det: f64) -> Vec<f64> {
    let d = base.dim;
    if d == 1 {
        return vec![base.data[0].abs().ln() + log_scale];
    }
    let mut sv: Vec<f64> = base
        .to_nalgebra()
        .singular_values()
        .iter()
        .map(|s| s.ln() + log_scale)
        .collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    if log_abs_det.is_finite() {
        let head: f64 = sv[..d - 1].iter().sum();
        sv[d - 1] = log_abs_det - head;
        sv.sort_by(|a, b| b.total_cmp(a));
    }
    sv
}

/// Log singular values of `m`, sorted nonincreasing.
pub fn singular_values(m: &Matrix) -> Result<SingularSpectrum> {
    if !m.is_finite() {
        return Err(Error::Input("matrix has non-finite entries".into()));
    }
    let scaled = ScaledMatrix::from_matrix(m)?;
    Ok(scaled.singular_spectrum())
}

/// `log ψ^q(M) = Σ q_i log σ_i(M)`.
pub fn log_psi(m: &Matrix, q: &[f64]) -> Result<f64> {
    singular_values(m)?.log_psi(q)
}

/// `log ψ^q(M)` through the compound-matrix factorization
/// `Σ_{m<d} (q_m − q_{m+1}) log‖∧^m M‖ + q_d log‖∧^d M‖`.
pub fn log_psi_via_exterior_powers(m: &Matrix, q: &[f64]) -> Result<f64> {
    let d = m.dim();
    if q.len() != d {
        return Err(Error::Input(format!("q has length {}, expected {d}", q.len())));
    }
    let mut acc = 0.0;
    for power in 1..=d {
        let weight = if power < d {
            q[power - 1] - q[power]
        } else {
            q[d - 1]
        };
        if weight == 0.0 {
            continue;
        }
        let compound = exterior_power(m, power)?;
        let top = compound
            .to_nalgebra()
            .singular_values()
            .iter()
            .fold(0.0_f64, |a, &b| a.max(b));
        if top == 0.0 && weight < 0.0 {
            return Err(Error::Domain(
                "negative exponent on a zero singular value".into(),
            ));
        }
        acc += weight * top.ln();
    }
    Ok(acc)
}

/// All `m`-element subsets of `0..n` in lexicographic order.
pub fn combinations(n: usize, m: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    if m > n {
        return out;
    }
    let mut current: Vec<usize> = (0..m).collect();
    loop {
        out.push(current.clone());
        let Some(i) = (0..m).rev().find(|&i| current[i] < n - m + i) else {
            break;
        };
        current[i] += 1;
        for j in i + 1..m {
            current[j] = current[j - 1] + 1;
        }
    }
    out
}

/// The `m`-th compound matrix: entries are the `m × m` minors of `mat`,
/// rows and columns indexed by lexicographically ordered `m`-subsets.
pub fn exterior_power(mat: &Matrix, m: usize) -> Result<Matrix> {
    let d = mat.dim();
    if m == 0 || m > d {
        return Err(Error::Input(format!(
            "exterior power {m} out of range 1..={d}"
        )));
    }
    let subsets = combinations(d, m);
    let size = subsets.len();
    let mut out = Matrix::zeros(size);
    let mut minor = Matrix::zeros(m);
    for (r, rows) in subsets.iter().enumerate() {
        for (c, cols) in subsets.iter().enumerate() {
            for (i, &ri) in rows.iter().enumerate() {
                for (j, &cj) in cols.iter().enumerate() {
                    minor.set(i, j, mat.get(ri, cj));
                }
            }
            out.set(r, c, minor.det());
        }
    }
    Ok(out)
}

/// A matrix represented as `exp(log_scale) · base` with `base` kept inside
/// the max-row-sum window `[1/2, 2]`.
#[derive(Clone, Debug, PartialEq)]
pub struct ScaledMatrix {
    base: Matrix,
    log_scale: f64,
    log_abs_det: f64,
}

impl ScaledMatrix {
    pub const NORM_LOW: f64 = 0.5;
    pub const NORM_HIGH: f64 = 2.0;

    pub fn identity(dim: usize) -> Self {
        Self {
            base: Matrix::identity(dim),
            log_scale: 0.0,
            log_abs_det: 0.0,
        }
    }

    pub fn from_matrix(m: &Matrix) -> Result<Self> {
        let mut s = Self {
            base: m.clone(),
            log_scale: 0.0,
            log_abs_det: m.log_abs_det(),
        };
        s.renormalize()?;
        Ok(s)
    }

    pub fn base(&self) -> &Matrix {
        &self.base
    }

    pub fn log_scale(&self) -> f64 {
        self.log_scale
    }

    /// `log |det|` of the represented matrix.
    pub fn log_abs_det(&self) -> f64 {
        self.log_abs_det
    }

    pub fn dim(&self) -> usize {
        self.base.dim
    }

    /// The represented matrix; entries overflow to infinity for huge scales.
    pub fn to_matrix(&self) -> Matrix {
        self.base.scaled(self.log_scale.exp())
    }

    /// Replaces `self` by `m · self`. `m_log_abs_det` must be `log|det m|`;
    /// `scratch` is a same-size buffer.
    pub fn mul_left_with(
        &mut self,
        m: &Matrix,
        m_log_abs_det: f64,
        scratch: &mut Matrix,
    ) -> Result<()> {
        mul_into(m, &self.base, scratch);
        std::mem::swap(&mut self.base, scratch);
        self.log_abs_det += m_log_abs_det;
        self.renormalize()
    }

    /// `m · self` as a new value.
    pub fn mul_left(&self, m: &Matrix) -> Result<Self> {
        let mut out = self.clone();
        let mut scratch = Matrix::zeros(self.dim());
        out.mul_left_with(m, m.log_abs_det(), &mut scratch)?;
        Ok(out)
    }

    /// Overwrites `self` with `m · src` without allocating.
    pub(crate) fn assign_product(
        &mut self,
        m: &Matrix,
        m_log_abs_det: f64,
        src: &ScaledMatrix,
    ) -> Result<()> {
        mul_into(m, &src.base, &mut self.base);
        self.log_scale = src.log_scale;
        self.log_abs_det = src.log_abs_det + m_log_abs_det;
        self.renormalize()
    }

    fn renormalize(&mut self) -> Result<()> {
        if !self.base.is_finite() {
            return Err(Error::Numeric("scaled product has non-finite entries".into()));
        }
        let mut norm = self.base.inf_norm();
        if norm == 0.0 {
            return Err(Error::Numeric("scaled product collapsed to zero".into()));
        }
        // powers of two keep the rescaling exact; large exponents take
        // several steps so that neither the factor nor the row sums overflow
        while !(Self::NORM_LOW..=Self::NORM_HIGH).contains(&norm) {
            let exponent = (-norm.log2().round()).clamp(-1000.0, 1000.0) as i32;
            let factor = 2f64.powi(exponent);
            for v in &mut self.base.data {
                *v *= factor;
            }
            self.log_scale -= exponent as f64 * std::f64::consts::LN_2;
            norm = self.base.inf_norm();
            if norm == 0.0 || !norm.is_finite() {
                return Err(Error::Numeric("scaled product left the floating point range".into()));
            }
        }
        if self.log_scale.abs() > 1e300 {
            return Err(Error::Numeric("log scale overflow".into()));
        }
        Ok(())
    }

    pub fn log_singular_values(&self) -> Vec<f64> {
        log_singular_values_raw(&self.base, self.log_scale, self.log_abs_det)
    }

    pub fn singular_spectrum(&self) -> SingularSpectrum {
        SingularSpectrum {
            log_sigma: self.log_singular_values(),
        }
    }
}

/// Returns a scaled representation of `m · acc`.
pub fn scaled_multiply(acc: &ScaledMatrix, m: &Matrix) -> Result<ScaledMatrix> {
    if m.dim() != acc.dim() {
        return Err(Error::Input("dimension mismatch in scaled multiply".into()));
    }
    acc.mul_left(m)
}
