//! Affine-invariant geometry of positive-definite matrices.
//!
//! Points are stored in spectral form `Y = V · diag(e^r) · V†`. Samples at
//! moderate σ already have condition numbers near e⁴⁰, and a dense `f64`
//! matrix loses its small eigenvalues long before that. Every operation
//! below works from the log-eigenvalues and a unitary basis instead, and
//! products of the form `A^{1/2} B A^{1/2}` go through the SVD of a graded
//! factor (see [`sandwich`]).

use nalgebra::DMatrix;

use crate::error::{domain, Result};
use crate::matrix::{
    eigh, eigh_unchecked, from_spectrum, hermitian_part, hestenes, max_abs, CMat, DenseMatrix,
    Field,
};

/// Admission threshold for dense input: `λ_min > ADMIT · λ_max`.
pub const ADMIT: f64 = 1e-13;

#[derive(Debug, Clone, PartialEq)]
pub struct SpdMatrix {
    beta: u32,
    basis: CMat,
    log_eigs: Vec<f64>,
}

pub(crate) fn check_beta(beta: u32) -> Result<()> {
    if beta == 1 || beta == 2 {
        Ok(())
    } else {
        domain(format!("matrix-level operations need beta in {{1, 2}}, got {beta}"))
    }
}

impl SpdMatrix {
    /// Admits a dense self-adjoint positive-definite matrix.
    pub fn new(beta: u32, mat: &DenseMatrix) -> Result<Self> {
        check_beta(beta)?;
        if beta == 1 && mat.field() != Field::Real {
            return domain("beta = 1 needs a real matrix");
        }
        let eig = eigh(mat)?;
        let lo = eig.values[0];
        let hi = *eig.values.last().unwrap();
        if !(lo > 0.0) || lo <= ADMIT * hi {
            return domain(format!(
                "matrix is not positive-definite enough: smallest eigenvalue {lo:e}, largest {hi:e}"
            ));
        }
        let log_eigs = eig.values.iter().map(|x| x.ln()).collect();
        Ok(SpdMatrix {
            beta,
            basis: clean_basis(beta, eig.basis),
            log_eigs,
        })
    }

    /// Builds `V · diag(e^r) · V†` from a unitary `V` and log-eigenvalues `r`.
    pub fn from_spectral(beta: u32, basis: CMat, log_eigs: Vec<f64>) -> Result<Self> {
        check_beta(beta)?;
        let n = log_eigs.len();
        if n == 0 || basis.nrows() != n || basis.ncols() != n {
            return domain("basis and log-eigenvalues have mismatched sizes");
        }
        if log_eigs.iter().any(|x| !x.is_finite()) {
            return domain("log-eigenvalues must be finite");
        }
        if max_abs(&(basis.adjoint() * &basis - CMat::identity(n, n))) > 1e-8 {
            return domain("basis is not unitary");
        }
        if beta == 1 && basis.iter().any(|z| z.im.abs() > 1e-12) {
            return domain("beta = 1 needs a real basis");
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| log_eigs[i].total_cmp(&log_eigs[j]));
        let sorted = CMat::from_fn(n, n, |i, j| basis[(i, order[j])]);
        Ok(SpdMatrix {
            beta,
            basis: clean_basis(beta, sorted),
            log_eigs: order.iter().map(|&i| log_eigs[i]).collect(),
        })
    }

    pub fn identity(n: usize, beta: u32) -> Result<Self> {
        Self::from_spectral(beta, CMat::identity(n, n), vec![0.0; n])
    }

    /// Diagonal matrix `diag(e^{r_1}, …, e^{r_N})`.
    pub fn from_log_diagonal(beta: u32, r: &[f64]) -> Result<Self> {
        Self::from_spectral(beta, CMat::identity(r.len(), r.len()), r.to_vec())
    }

    pub fn beta(&self) -> u32 {
        self.beta
    }

    pub fn n(&self) -> usize {
        self.log_eigs.len()
    }

    pub fn basis(&self) -> &CMat {
        &self.basis
    }

    /// Log-eigenvalues, ascending.
    pub fn log_eigs(&self) -> &[f64] {
        &self.log_eigs
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        self.log_eigs.iter().map(|x| x.exp()).collect()
    }

    pub fn log_det(&self) -> f64 {
        self.log_eigs.iter().sum()
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let m = from_spectrum(&self.basis, &self.eigenvalues());
        dense_of(self.beta, m)
    }

    /// `Y^p` as a dense matrix.
    pub fn power(&self, p: f64) -> DenseMatrix {
        let vals: Vec<f64> = self.log_eigs.iter().map(|x| (p * x).exp()).collect();
        dense_of(self.beta, from_spectrum(&self.basis, &vals))
    }

    /// `c · Y` for `c > 0`.
    pub fn scale(&self, c: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return domain(format!("scale factor must be positive, got {c}"));
        }
        self.shift_log(c.ln())
    }

    /// `e^s · Y`, exact on the log-eigenvalues.
    pub fn shift_log(&self, s: f64) -> Result<Self> {
        Self::from_spectral(
            self.beta,
            self.basis.clone(),
            self.log_eigs.iter().map(|x| x + s).collect(),
        )
    }

    /// The congruence action `A · Y · A†` of an invertible matrix.
    pub fn congruence(&self, a: &DenseMatrix) -> Result<Self> {
        let n = self.n();
        if a.nrows() != n || a.ncols() != n {
            return domain("congruence matrix has the wrong size");
        }
        if self.beta == 1 && a.field() != Field::Real {
            return domain("beta = 1 congruence needs a real matrix");
        }
        let mut f = a.as_mat() * &self.basis;
        for (j, r) in self.log_eigs.iter().enumerate() {
            let s = (0.5 * r).exp();
            f.column_mut(j).iter_mut().for_each(|z| *z *= s);
        }
        let d = hestenes(f.adjoint());
        if d.s.iter().any(|&s| !(s > 0.0)) {
            return domain("congruence matrix is singular");
        }
        Self::from_spectral(
            self.beta,
            d.v,
            d.s.iter().map(|s| 2.0 * s.ln()).collect(),
        )
    }

    fn check_compatible(&self, other: &SpdMatrix) -> Result<()> {
        if self.beta != other.beta || self.n() != other.n() {
            return domain(format!(
                "incompatible points: (beta {}, n {}) vs (beta {}, n {})",
                self.beta,
                self.n(),
                other.beta,
                other.n()
            ));
        }
        Ok(())
    }
}

fn clean_basis(beta: u32, mut basis: CMat) -> CMat {
    if beta == 1 {
        basis.iter_mut().for_each(|z| z.im = 0.0);
    }
    basis
}

fn dense_of(beta: u32, m: CMat) -> DenseMatrix {
    match beta {
        1 => DenseMatrix::real(&m.map(|z| z.re)).expect("finite real matrix"),
        _ => DenseMatrix::complex(m).expect("finite complex matrix"),
    }
}

/// Spectrum of `A·B·A` with `A = V_a e^{s_a} V_a†` and `B = V_b e^{2 s_b} V_b†`.
///
/// Writes `A·B·A = F F†` with `F = V_a · G`, `G = e^{s_a} (V_a† V_b) e^{s_b}`
/// and takes the one-sided Jacobi SVD of `G` (or of `G†`, whichever puts
/// the wider scaling on the columns). Returns the eigenvectors `V_a · U`
/// and log-eigenvalues `2 log σ`, ascending.
pub(crate) fn sandwich(va: &CMat, sa: &[f64], vb: &CMat, sb: &[f64]) -> (CMat, Vec<f64>) {
    let n = sa.len();
    let c = va.adjoint() * vb;
    let spread = |s: &[f64]| {
        s.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
            - s.iter().cloned().fold(f64::INFINITY, f64::min)
    };
    let hi = sa.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        + sb.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lo = sa.iter().cloned().fold(f64::INFINITY, f64::min)
        + sb.iter().cloned().fold(f64::INFINITY, f64::min);
    let shift = 0.5 * (hi + lo);
    let g = CMat::from_fn(n, n, |i, j| c[(i, j)] * (sa[i] + sb[j] - shift).exp());
    let (u, sv) = if spread(sa) > spread(sb) {
        let t = hestenes(g.adjoint());
        (t.v, t.s)
    } else {
        let t = hestenes(g);
        (t.u, t.s)
    };
    let mut pairs: Vec<(f64, usize)> = sv
        .iter()
        .enumerate()
        .map(|(i, s)| (2.0 * (s.ln() + shift), i))
        .collect();
    pairs.sort_by(|x, y| x.0.total_cmp(&y.0));
    let vecs = va * &u;
    let basis = CMat::from_fn(n, n, |i, j| vecs[(i, pairs[j].1)]);
    (basis, pairs.iter().map(|p| p.0).collect())
}

/// Whitened logarithm of `X` seen from `Y`: the spectral form `(P, ℓ)` of
/// `log(Y^{-1/2} X Y^{-1/2})`, with `P` in ambient coordinates.
pub(crate) fn whitened_log(y: &SpdMatrix, x: &SpdMatrix) -> (CMat, Vec<f64>) {
    let sa: Vec<f64> = y.log_eigs.iter().map(|r| -0.5 * r).collect();
    let sb: Vec<f64> = x.log_eigs.iter().map(|r| 0.5 * r).collect();
    sandwich(&y.basis, &sa, &x.basis, &sb)
}

/// `Y^{1/2} · exp(T) · Y^{1/2}` for a whitened tangent `T = Q τ Q†`.
pub(crate) fn exp_whitened(y: &SpdMatrix, q: &CMat, tau: &[f64]) -> Result<SpdMatrix> {
    let sa: Vec<f64> = y.log_eigs.iter().map(|r| 0.5 * r).collect();
    let sb: Vec<f64> = tau.iter().map(|t| 0.5 * t).collect();
    let (basis, log_eigs) = sandwich(&y.basis, &sa, q, &sb);
    SpdMatrix::from_spectral(y.beta, basis, log_eigs)
}

/// `Ā^{1/2} · U e^{r} U† · Ā^{1/2}`: moves a point given relative to the
/// identity so that it is given relative to `center`.
pub fn transport_from_identity(center: &SpdMatrix, u: &CMat, r: &[f64]) -> Result<SpdMatrix> {
    exp_whitened(center, u, r)
}

/// A tangent vector (self-adjoint matrix) at a base point.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentVector {
    base: SpdMatrix,
    vec: DenseMatrix,
}

impl TangentVector {
    pub fn new(base: &SpdMatrix, vec: &DenseMatrix) -> Result<Self> {
        let n = base.n();
        if vec.nrows() != n || vec.ncols() != n {
            return domain("tangent vector has the wrong size");
        }
        if base.beta == 1 && vec.field() != Field::Real {
            return domain("beta = 1 tangent vectors must be real");
        }
        let r = vec.self_adjoint_residual();
        if r > 1e-12 {
            return domain(format!("tangent vector is not self-adjoint (residual {r:.3e})"));
        }
        Ok(TangentVector {
            base: base.clone(),
            vec: dense_of(base.beta, hermitian_part(vec.as_mat())),
        })
    }

    pub fn zero(base: &SpdMatrix) -> Self {
        let n = base.n();
        TangentVector {
            base: base.clone(),
            vec: dense_of(base.beta, CMat::zeros(n, n)),
        }
    }

    pub fn base(&self) -> &SpdMatrix {
        &self.base
    }

    pub fn vec(&self) -> &DenseMatrix {
        &self.vec
    }

    /// `e^{-r/2} V† u V e^{-r/2}`: the vector whitened and written in the
    /// eigenbasis of the base point.
    fn whitened(&self) -> CMat {
        let b = &self.base;
        let mut h = b.basis.adjoint() * self.vec.as_mat() * &b.basis;
        let n = b.n();
        for j in 0..n {
            for i in 0..n {
                h[(i, j)] *= (-0.5 * (b.log_eigs[i] + b.log_eigs[j])).exp();
            }
        }
        hermitian_part(&h)
    }

    pub fn norm(&self) -> f64 {
        metric_inner(&self.base, self, self)
            .expect("same base")
            .max(0.0)
            .sqrt()
    }
}

/// `⟨u, v⟩_Y = Re tr(Y⁻¹ u Y⁻¹ v)`.
pub fn metric_inner(y: &SpdMatrix, u: &TangentVector, v: &TangentVector) -> Result<f64> {
    if &u.base != y || &v.base != y {
        return domain("tangent vectors are not based at the given point");
    }
    let hu = u.whitened();
    let hv = v.whitened();
    let n = y.n();
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            acc += (hu[(i, j)] * hv[(j, i)]).re;
        }
    }
    Ok(acc)
}

pub fn distance_sq(x: &SpdMatrix, y: &SpdMatrix) -> Result<f64> {
    x.check_compatible(y)?;
    let (_, l) = whitened_log(x, y);
    Ok(l.iter().map(|v| v * v).sum())
}

/// Geodesic distance `d(X, Y) = ‖log(X^{-1/2} Y X^{-1/2})‖_F`.
pub fn distance(x: &SpdMatrix, y: &SpdMatrix) -> Result<f64> {
    Ok(distance_sq(x, y)?.sqrt())
}

/// `Y^{1/2} exp(Y^{-1/2} u Y^{-1/2}) Y^{1/2}`.
pub fn exp_map(y: &SpdMatrix, u: &TangentVector) -> Result<SpdMatrix> {
    if &u.base != y {
        return domain("tangent vector is not based at the given point");
    }
    let h = u.whitened();
    let e = eigh_unchecked(&h);
    let q = &y.basis * &e.basis;
    exp_whitened(y, &q, &e.values)
}

/// `Y^{1/2} log(Y^{-1/2} X Y^{-1/2}) Y^{1/2}`.
pub fn log_map(y: &SpdMatrix, x: &SpdMatrix) -> Result<TangentVector> {
    y.check_compatible(x)?;
    let (p, l) = whitened_log(y, x);
    // Y^{1/2} P = V e^{r/2} V† P
    let mut half = y.basis.clone();
    for (j, r) in y.log_eigs.iter().enumerate() {
        let s = (0.5 * r).exp();
        half.column_mut(j).iter_mut().for_each(|z| *z *= s);
    }
    let f = half * (y.basis.adjoint() * p);
    let m = from_spectrum(&f, &l);
    Ok(TangentVector {
        base: y.clone(),
        vec: dense_of(y.beta, m),
    })
}

/// Real symmetric matrix from row-major rows; convenience for callers that
/// hold plain `f64` data.
pub fn real_matrix(rows: &[Vec<f64>]) -> Result<DenseMatrix> {
    DenseMatrix::from_real_rows(rows)
}

/// `A · A†` promoted to an SPD point, for building seeded test points.
pub fn gram(beta: u32, a: &CMat) -> Result<SpdMatrix> {
    let m = a * a.adjoint();
    let d = match beta {
        1 => DenseMatrix::real(&DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)].re))?,
        _ => DenseMatrix::complex(hermitian_part(&m))?,
    };
    SpdMatrix::new(beta, &d)
}
