//! Dense real/complex matrix kernels.
//!
//! Storage and products come from `nalgebra`; the spectral kernels used by
//! the rest of the crate are implemented here: cyclic Jacobi for Hermitian
//! eigenproblems, one-sided (Hestenes) Jacobi for the SVD, Takagi
//! factorization of complex symmetric matrices, and Parlett–Reid
//! elimination for log-domain Pfaffians.

use std::ops::{Add, Div, Mul, Neg, Sub};

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::dd::Dd;
use crate::error::{domain, Result};

pub type CMat = DMatrix<Complex64>;

const EPS: f64 = f64::EPSILON;
const MAX_SWEEPS: usize = 80;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Field {
    Real,
    Complex,
}

/// A dense matrix with complex storage and a field tag.
///
/// Real matrices keep identically zero imaginary parts.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    field: Field,
    data: CMat,
}

impl DenseMatrix {
    pub fn real(m: &DMatrix<f64>) -> Result<Self> {
        let data = m.map(|x| Complex64::new(x, 0.0));
        Self::with_field(Field::Real, data)
    }

    pub fn complex(data: CMat) -> Result<Self> {
        Self::with_field(Field::Complex, data)
    }

    pub fn with_field(field: Field, mut data: CMat) -> Result<Self> {
        if data.nrows() == 0 || data.ncols() == 0 {
            return domain("matrix must have at least one row and column");
        }
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return domain("matrix has non-finite entries");
        }
        if field == Field::Real {
            if data.iter().any(|z| z.im != 0.0) {
                return domain("real matrix has nonzero imaginary parts");
            }
            data.iter_mut().for_each(|z| z.im = 0.0);
        }
        Ok(DenseMatrix { field, data })
    }

    /// Row-major real constructor, mostly for tests and examples.
    pub fn from_real_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let m = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != m) {
            return domain("ragged rows");
        }
        Self::real(&DMatrix::from_fn(n, m, |i, j| rows[i][j]))
    }

    pub fn identity(n: usize, field: Field) -> Self {
        DenseMatrix {
            field,
            data: CMat::identity(n, n),
        }
    }

    pub fn diag_real(values: &[f64]) -> Self {
        let n = values.len();
        DenseMatrix {
            field: Field::Real,
            data: CMat::from_fn(n, n, |i, j| {
                if i == j {
                    Complex64::new(values[i], 0.0)
                } else {
                    Complex64::new(0.0, 0.0)
                }
            }),
        }
    }

    pub fn field(&self) -> Field {
        self.field
    }

    pub fn nrows(&self) -> usize {
        self.data.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.data.ncols()
    }

    pub fn as_mat(&self) -> &CMat {
        &self.data
    }

    pub fn into_mat(self) -> CMat {
        self.data
    }

    pub fn is_square(&self) -> bool {
        self.nrows() == self.ncols()
    }

    /// Largest entry of `|A - A†|`, relative to `max(1, max |A_ij|)`.
    pub fn self_adjoint_residual(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let scale = max_abs(&self.data).max(1.0);
        max_abs(&(&self.data - self.data.adjoint())) / scale
    }
}

/// Eigendecomposition of a self-adjoint matrix, values ascending.
#[derive(Debug, Clone)]
pub struct EigenSystem {
    pub values: Vec<f64>,
    pub basis: CMat,
}

impl EigenSystem {
    /// `basis · diag(f(values)) · basis†`.
    pub fn reconstruct_with(&self, f: impl Fn(f64) -> f64) -> CMat {
        let mapped: Vec<f64> = self.values.iter().map(|&x| f(x)).collect();
        from_spectrum(&self.basis, &mapped)
    }
}

/// Sign-and-log representation of a real scalar.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogValue {
    pub sign: i8,
    pub log_abs: f64,
}

impl LogValue {
    pub const ZERO: LogValue = LogValue {
        sign: 0,
        log_abs: f64::NEG_INFINITY,
    };
    pub const ONE: LogValue = LogValue {
        sign: 1,
        log_abs: 0.0,
    };

    pub fn from_f64(x: f64) -> Self {
        if x == 0.0 {
            Self::ZERO
        } else {
            LogValue {
                sign: if x > 0.0 { 1 } else { -1 },
                log_abs: x.abs().ln(),
            }
        }
    }

    pub fn value(self) -> f64 {
        match self.sign {
            0 => 0.0,
            s => s as f64 * self.log_abs.exp(),
        }
    }
}

impl Mul for LogValue {
    type Output = LogValue;
    fn mul(self, rhs: LogValue) -> LogValue {
        if self.sign == 0 || rhs.sign == 0 {
            return LogValue::ZERO;
        }
        LogValue {
            sign: self.sign * rhs.sign,
            log_abs: self.log_abs + rhs.log_abs,
        }
    }
}

pub(crate) fn max_abs(m: &CMat) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

pub(crate) fn hermitian_part(m: &CMat) -> CMat {
    (m + m.adjoint()).map(|z| z * 0.5)
}

/// `basis · diag(values) · basis†` without forming the diagonal matrix.
pub(crate) fn from_spectrum(basis: &CMat, values: &[f64]) -> CMat {
    let mut scaled = basis.clone();
    for (j, &v) in values.iter().enumerate() {
        scaled.column_mut(j).iter_mut().for_each(|z| *z *= v);
    }
    hermitian_part(&(scaled * basis.adjoint()))
}

/// Unitary 2×2 rotation `[[c, s], [-s·d, c·d]]` that zeroes the (p, q) entry
/// of a Hermitian matrix with diagonal `(app, aqq)` and off-diagonal `apq`.
/// Returns `(c, s, d, t)` where `t` is the tangent of the real rotation.
#[inline]
fn jacobi_rotation(app: f64, aqq: f64, apq: Complex64) -> (f64, f64, Complex64, f64) {
    let g = apq.norm();
    let d = (apq / g).conj();
    let theta = (aqq - app) / (2.0 * g);
    let t = if theta.abs() > 1e150 {
        0.5 / theta
    } else {
        theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
    };
    let c = 1.0 / (t * t + 1.0).sqrt();
    (c, t * c, d, t)
}

#[inline]
fn rotate_columns(m: &mut CMat, p: usize, q: usize, c: f64, s: f64, d: Complex64) {
    let rows = m.nrows();
    let data = m.as_mut_slice();
    for k in 0..rows {
        let xp = data[p * rows + k];
        let xq = data[q * rows + k];
        data[p * rows + k] = xp * c - xq * d * s;
        data[q * rows + k] = xp * s + xq * d * c;
    }
}

#[inline]
fn rotate_rows(m: &mut CMat, p: usize, q: usize, c: f64, s: f64, d: Complex64) {
    let rows = m.nrows();
    let cols = m.ncols();
    let dc = d.conj();
    let data = m.as_mut_slice();
    for k in 0..cols {
        let xp = data[k * rows + p];
        let xq = data[k * rows + q];
        data[k * rows + p] = xp * c - xq * dc * s;
        data[k * rows + q] = xp * s + xq * dc * c;
    }
}

/// Cyclic Jacobi on the Hermitian part of `a`; no input validation.
pub(crate) fn eigh_unchecked(a: &CMat) -> EigenSystem {
    let n = a.nrows();
    let mut m = hermitian_part(a);
    let mut v = CMat::identity(n, n);
    for _ in 0..MAX_SWEEPS {
        let mut off = 0.0;
        let mut diag = 0.0;
        for j in 0..n {
            for i in 0..n {
                let x = m[(i, j)].norm_sqr();
                if i == j {
                    diag += x;
                } else {
                    off += x;
                }
            }
        }
        if off == 0.0 || off.sqrt() <= 1e-14 * diag.sqrt() {
            break;
        }
        for p in 0..n.saturating_sub(1) {
            for q in (p + 1)..n {
                let apq = m[(p, q)];
                if apq.norm() == 0.0 {
                    continue;
                }
                let app = m[(p, p)].re;
                let aqq = m[(q, q)].re;
                let (c, s, d, t) = jacobi_rotation(app, aqq, apq);
                let g = apq.norm();
                rotate_columns(&mut m, p, q, c, s, d);
                rotate_rows(&mut m, p, q, c, s, d);
                rotate_columns(&mut v, p, q, c, s, d);
                m[(p, p)] = Complex64::new(app - t * g, 0.0);
                m[(q, q)] = Complex64::new(aqq + t * g, 0.0);
                m[(p, q)] = Complex64::new(0.0, 0.0);
                m[(q, p)] = Complex64::new(0.0, 0.0);
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[(i, i)].re.total_cmp(&m[(j, j)].re));
    let values = order.iter().map(|&i| m[(i, i)].re).collect();
    let basis = CMat::from_fn(n, n, |i, j| v[(i, order[j])]);
    EigenSystem { values, basis }
}

/// Eigendecomposition of a self-adjoint matrix.
pub fn eigh(a: &DenseMatrix) -> Result<EigenSystem> {
    if !a.is_square() {
        return domain(format!("eigh needs a square matrix, got {}x{}", a.nrows(), a.ncols()));
    }
    if a.nrows() > 512 {
        return domain("eigh supports N <= 512");
    }
    let r = a.self_adjoint_residual();
    if r > 1e-12 {
        return domain(format!("matrix is not self-adjoint (residual {r:.3e})"));
    }
    Ok(eigh_unchecked(a.as_mat()))
}

/// Scalar maps applied through the spectrum of a self-adjoint matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatrixFn {
    Log,
    Exp,
    Sqrt,
    InvSqrt,
    /// `arctanh` restricted to eigenvalues in `[0, 1)`.
    ArctanhUnit,
}

impl MatrixFn {
    fn apply(self, x: f64) -> Option<f64> {
        match self {
            MatrixFn::Log if x > 0.0 => Some(x.ln()),
            MatrixFn::Exp => Some(x.exp()),
            MatrixFn::Sqrt if x > 0.0 => Some(x.sqrt()),
            MatrixFn::InvSqrt if x > 0.0 => Some(1.0 / x.sqrt()),
            MatrixFn::ArctanhUnit if (0.0..1.0).contains(&x) => Some(x.atanh()),
            _ => None,
        }
    }
}

pub fn matrix_function(a: &DenseMatrix, f: MatrixFn) -> Result<DenseMatrix> {
    let eig = eigh(a)?;
    let mut mapped = Vec::with_capacity(eig.values.len());
    for &x in &eig.values {
        match f.apply(x) {
            Some(y) => mapped.push(y),
            None => return domain(format!("eigenvalue {x:e} is outside the domain of {f:?}")),
        }
    }
    let out = from_spectrum(&eig.basis, &mapped);
    match a.field() {
        Field::Real => DenseMatrix::real(&out.map(|z| z.re)),
        Field::Complex => DenseMatrix::complex(out),
    }
}

/// Singular value decomposition `A = U · diag(s) · V†`, `s` descending.
#[derive(Debug, Clone)]
pub struct Svd {
    pub u: CMat,
    pub s: Vec<f64>,
    pub v: CMat,
}

/// Hestenes one-sided Jacobi: orthogonalizes the columns of `g` by right
/// rotations. Accurate in the relative sense for column-scaled
/// well-conditioned matrices, which is how graded SPD factors arrive here.
pub(crate) fn hestenes(mut g: CMat) -> Svd {
    let m = g.nrows();
    let n = g.ncols();
    let mut v = CMat::identity(n, n);
    let tol = (m as f64) * EPS;
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n.saturating_sub(1) {
            for q in (p + 1)..n {
                let (alpha, beta, gamma) = {
                    let data = g.as_slice();
                    let cp = &data[p * m..(p + 1) * m];
                    let cq = &data[q * m..(q + 1) * m];
                    let mut a = 0.0;
                    let mut b = 0.0;
                    let mut c = Complex64::new(0.0, 0.0);
                    for k in 0..m {
                        a += cp[k].norm_sqr();
                        b += cq[k].norm_sqr();
                        c += cp[k].conj() * cq[k];
                    }
                    (a, b, c)
                };
                let gn = gamma.norm();
                if gn == 0.0 || gn <= tol * (alpha.sqrt() * beta.sqrt()) {
                    continue;
                }
                rotated = true;
                let (c, s, d, _) = jacobi_rotation(alpha, beta, gamma);
                rotate_columns(&mut g, p, q, c, s, d);
                rotate_columns(&mut v, p, q, c, s, d);
            }
        }
        if !rotated {
            break;
        }
    }
    let mut s: Vec<f64> = (0..n).map(|j| g.column(j).norm()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| s[j].total_cmp(&s[i]));
    let mut u = CMat::zeros(m, n);
    let vs = CMat::from_fn(n, n, |i, j| v[(i, order[j])]);
    let s_max = order.first().map_or(0.0, |&i| s[i]);
    let mut filled = vec![false; n];
    for (j, &src) in order.iter().enumerate() {
        let norm = s[src];
        if norm > 0.0 && norm > s_max * 1e-300 {
            u.set_column(j, &(g.column(src) / Complex64::new(norm, 0.0)));
            filled[j] = true;
        }
    }
    complete_orthonormal(&mut u, &filled);
    s = order.iter().map(|&i| s[i]).collect();
    Svd { u, s, v: vs }
}

/// Fills the unmarked columns of `u` with an orthonormal completion of the
/// marked ones (Gram–Schmidt over the standard basis).
pub(crate) fn complete_orthonormal(u: &mut CMat, filled: &[bool]) {
    let m = u.nrows();
    let mut candidate = 0;
    for j in 0..u.ncols() {
        if filled[j] {
            continue;
        }
        loop {
            assert!(candidate < m, "orthonormal completion ran out of candidates");
            let mut w = nalgebra::DVector::<Complex64>::zeros(m);
            w[candidate] = Complex64::new(1.0, 0.0);
            candidate += 1;
            for _ in 0..2 {
                for k in 0..u.ncols() {
                    if k == j || !(filled[k] || k < j) {
                        continue;
                    }
                    let col = u.column(k);
                    let proj = col.dotc(&w);
                    w -= col * proj;
                }
            }
            let nw = w.norm();
            if nw > 1e-8 {
                u.set_column(j, &(w / Complex64::new(nw, 0.0)));
                break;
            }
        }
    }
}

pub fn svd(a: &DenseMatrix) -> Result<Svd> {
    if a.nrows() < a.ncols() {
        let t = hestenes(a.as_mat().adjoint());
        return Ok(Svd {
            u: t.v,
            s: t.s,
            v: t.u,
        });
    }
    Ok(hestenes(a.as_mat().clone()))
}

/// Householder QR, `A = Q R`.
pub fn qr(a: &DenseMatrix) -> (CMat, CMat) {
    let f = a.as_mat().clone().qr();
    (f.q(), f.r())
}

/// Takagi factorization `S = U · diag(lambda) · Uᵀ` of a complex symmetric
/// matrix, `lambda` descending.
#[derive(Debug, Clone)]
pub struct Takagi {
    pub u: CMat,
    pub lambda: Vec<f64>,
}

/// Takagi factorization through the real symmetric embedding
/// `[[Re S, Im S], [Im S, -Re S]]`, whose eigenpairs `(σ, (x; y))` with
/// `σ ≥ 0` give Takagi vectors `x + i·y`.
pub fn takagi(s: &DenseMatrix) -> Result<Takagi> {
    if !s.is_square() {
        return domain("takagi needs a square matrix");
    }
    let a = s.as_mat();
    let n = a.nrows();
    let scale = max_abs(a).max(1.0);
    let asym = max_abs(&(a - a.transpose())) / scale;
    if asym > 1e-12 {
        return domain(format!("matrix is not symmetric (residual {asym:.3e})"));
    }
    let sym = (a + a.transpose()).map(|z| z * 0.5);
    let emb = CMat::from_fn(2 * n, 2 * n, |i, j| {
        let (bi, ri) = (i / n, i % n);
        let (bj, rj) = (j / n, j % n);
        let z = sym[(ri, rj)];
        let x = match (bi, bj) {
            (0, 0) => z.re,
            (1, 1) => -z.re,
            _ => z.im,
        };
        Complex64::new(x, 0.0)
    });
    let eig = eigh_unchecked(&emb);
    let top = eig.values[2 * n - 1].max(0.0);
    let cutoff = 1e-12 * top.max(f64::MIN_POSITIVE);
    let mut u = CMat::zeros(n, n);
    let mut lambda = Vec::with_capacity(n);
    let mut filled = vec![false; n];
    for j in 0..n {
        let idx = 2 * n - 1 - j;
        let val = eig.values[idx];
        if val > cutoff {
            for i in 0..n {
                u[(i, j)] = Complex64::new(eig.basis[(i, idx)].re, eig.basis[(i + n, idx)].re);
            }
            let nrm = u.column(j).norm();
            u.column_mut(j).iter_mut().for_each(|z| *z /= nrm);
            filled[j] = true;
            lambda.push(val);
        } else {
            lambda.push(0.0);
        }
    }
    complete_orthonormal(&mut u, &filled);
    Ok(Takagi { u, lambda })
}

/// Scalars the Pfaffian elimination can run on.
pub(crate) trait PfScalar:
    Copy + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> + Div<Output = Self> + Neg<Output = Self>
{
    fn magnitude(self) -> f64;
    fn sign(self) -> f64;
    fn ln_abs(self) -> f64;
}

impl PfScalar for f64 {
    fn magnitude(self) -> f64 {
        self.abs()
    }
    fn sign(self) -> f64 {
        self.signum()
    }
    fn ln_abs(self) -> f64 {
        self.abs().ln()
    }
}

impl PfScalar for Dd {
    fn magnitude(self) -> f64 {
        self.hi.abs()
    }
    fn sign(self) -> f64 {
        self.signum()
    }
    fn ln_abs(self) -> f64 {
        Dd::ln_abs(self)
    }
}

/// Parlett–Reid skew elimination on a row-major skew-symmetric matrix,
/// pivoting on the largest entry of the working column.
pub(crate) fn pfaffian_log_in<T: PfScalar>(mut a: Vec<T>, n: usize) -> LogValue {
    debug_assert_eq!(a.len(), n * n);
    if n == 0 {
        return LogValue::ONE;
    }
    let mut sign = 1.0;
    let mut log_abs = 0.0;
    let mut k = 0;
    while k + 1 < n {
        let mut kp = k + 1;
        let mut best = a[(k + 1) * n + k].magnitude();
        for i in (k + 2)..n {
            let m = a[i * n + k].magnitude();
            if m > best {
                best = m;
                kp = i;
            }
        }
        if best == 0.0 {
            return LogValue::ZERO;
        }
        if kp != k + 1 {
            a.swap_rows(n, k + 1, kp);
            for r in 0..n {
                a.swap(r * n + k + 1, r * n + kp);
            }
            sign = -sign;
        }
        let piv = a[k * n + k + 1];
        sign *= piv.sign();
        log_abs += piv.ln_abs();
        if k + 2 < n {
            let tau: Vec<T> = ((k + 2)..n).map(|j| a[k * n + j] / piv).collect();
            let col: Vec<T> = ((k + 2)..n).map(|i| a[i * n + k + 1]).collect();
            for (ii, i) in ((k + 2)..n).enumerate() {
                for (jj, j) in ((k + 2)..n).enumerate() {
                    let upd = tau[ii] * col[jj] - col[ii] * tau[jj];
                    a[i * n + j] = a[i * n + j] + upd;
                }
            }
        }
        k += 2;
    }
    LogValue {
        sign: sign as i8,
        log_abs,
    }
}

trait SwapRows {
    fn swap_rows(&mut self, n: usize, r1: usize, r2: usize);
}

impl<T> SwapRows for Vec<T> {
    fn swap_rows(&mut self, n: usize, r1: usize, r2: usize) {
        for c in 0..n {
            self.swap(r1 * n + c, r2 * n + c);
        }
    }
}

/// Log-domain Pfaffian of a real skew-symmetric matrix of even dimension.
pub fn log_pfaffian(a: &DenseMatrix) -> Result<LogValue> {
    if !a.is_square() {
        return domain("Pfaffian needs a square matrix");
    }
    let n = a.nrows();
    if n % 2 == 1 {
        return domain(format!("Pfaffian needs an even dimension, got {n}"));
    }
    if a.field() != Field::Real {
        return domain("Pfaffian is implemented for real matrices only");
    }
    let m = a.as_mat();
    let scale = max_abs(m).max(1.0);
    let skew = max_abs(&(m + m.transpose())) / scale;
    if skew > 1e-12 {
        return domain(format!("matrix is not skew-symmetric (residual {skew:.3e})"));
    }
    let mut rows = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            rows[i * n + j] = 0.5 * (m[(i, j)].re - m[(j, i)].re);
        }
    }
    Ok(pfaffian_log_in(rows, n))
}
