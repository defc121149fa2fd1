//! Siegel domains: complex N×N matrices of operator norm < 1 (β = 2), or
//! complex symmetric ones (β = 1), with the metric
//! `⟨u, v⟩_Ω = Re tr[(I − ΩΩ†)⁻¹ u (I − Ω†Ω)⁻¹ v†]`.
//!
//! A Riemannian Gaussian centered at 0 factors as `Ω = U tanh(r) V†`
//! (β = 2) or `U tanh(r) Uᵀ` (β = 1) with Haar `U, V` and radial density
//!
//! ```text
//! p(r) ∝ ∏ᵢ exp(−rᵢ²/2σ²) sinh(2rᵢ) ∏_{i<j} (sinh|rᵢ − r_j| sinh(rᵢ + r_j))^β,
//! ```
//!
//! and other centers are reached through the Möbius isometry `Ψ`.

use num_complex::Complex64;

use crate::error::{domain, Error, Result};
use crate::matrix::{hestenes, max_abs, takagi, CMat, DenseMatrix};
use crate::partition::{ln_factorial, log_sinh, mc_blocks, EnsembleSpec, LogZResult, LseAcc, PartitionMethod};
use crate::rng::stream_rng;
use crate::sampler::{haar_with, metropolis, ChainConfig};
use crate::spd::check_beta;

/// Margin kept between the operator norm and 1.
pub const BOUNDARY_MARGIN: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct SiegelPoint {
    beta: u32,
    mat: CMat,
}

fn symmetry_residual(m: &CMat) -> f64 {
    max_abs(&(m - m.transpose())) / max_abs(m).max(1.0)
}

fn singular_values(m: &CMat) -> Vec<f64> {
    hestenes(m.clone()).s
}

impl SiegelPoint {
    pub fn new(beta: u32, mat: &DenseMatrix) -> Result<Self> {
        Self::from_mat(beta, mat.as_mat().clone())
    }

    fn from_mat(beta: u32, mut mat: CMat) -> Result<Self> {
        if beta != 1 && beta != 2 {
            return domain(format!("Siegel domains need beta 1 or 2, got {beta}"));
        }
        if !mat.is_square() || mat.nrows() == 0 {
            return domain("Siegel point must be a nonempty square matrix");
        }
        if mat.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return domain("Siegel point has non-finite entries");
        }
        if beta == 1 {
            let res = symmetry_residual(&mat);
            if res > 1e-12 {
                return domain(format!("beta = 1 point is not symmetric (residual {res:.3e})"));
            }
            mat = (&mat + mat.transpose()).map(|z| z * 0.5);
        }
        let norm = singular_values(&mat)[0];
        if norm >= 1.0 - BOUNDARY_MARGIN {
            return domain(format!("operator norm {norm} is not below 1"));
        }
        Ok(SiegelPoint { beta, mat })
    }

    pub fn zero(n: usize, beta: u32) -> Result<Self> {
        Self::from_mat(beta, CMat::zeros(n, n))
    }

    /// `U tanh(r) V†`, or `U tanh(r) Uᵀ` when `v` is `None` (β = 1).
    pub fn from_polar(beta: u32, u: &CMat, v: Option<&CMat>, r: &[f64]) -> Result<Self> {
        if r.iter().any(|x| !(*x >= 0.0 && x.is_finite())) {
            return domain("radial coordinates must be nonnegative and finite");
        }
        let mut left = u.clone();
        for (j, x) in r.iter().enumerate() {
            let t = Complex64::new(x.tanh(), 0.0);
            left.column_mut(j).iter_mut().for_each(|z| *z *= t);
        }
        let right = match (beta, v) {
            (1, _) => u.transpose(),
            (_, Some(v)) => v.adjoint(),
            (_, None) => return domain("beta = 2 polar form needs V"),
        };
        Self::from_mat(beta, left * right)
    }

    pub fn beta(&self) -> u32 {
        self.beta
    }

    pub fn n(&self) -> usize {
        self.mat.nrows()
    }

    pub fn as_mat(&self) -> &CMat {
        &self.mat
    }

    pub fn to_dense(&self) -> DenseMatrix {
        DenseMatrix::complex(self.mat.clone()).expect("square matrix")
    }

    pub fn operator_norm(&self) -> f64 {
        singular_values(&self.mat)[0]
    }

    pub fn is_zero(&self) -> bool {
        self.mat.iter().all(|z| z.re == 0.0 && z.im == 0.0)
    }

    fn check_compatible(&self, o: &SiegelPoint) -> Result<()> {
        if self.beta != o.beta || self.n() != o.n() {
            return domain(format!(
                "incompatible points: (beta {}, n {}) vs (beta {}, n {})",
                self.beta,
                self.n(),
                o.beta,
                o.n()
            ));
        }
        Ok(())
    }
}

/// Matrix cross-ratio
/// `R(Ξ, Ω) = (Ξ − Ω)(I − Ω†Ξ)⁻¹(Ξ† − Ω†)(I − ΩΞ†)⁻¹`.
/// Not Hermitian in general; its eigenvalues are real and in `[0, 1)`.
pub fn cross_ratio(xi: &SiegelPoint, om: &SiegelPoint) -> Result<CMat> {
    xi.check_compatible(om)?;
    let n = xi.n();
    let id = CMat::identity(n, n);
    let (x, o) = (&xi.mat, &om.mat);
    let d = x - o;
    let inv = |m: CMat| {
        m.try_inverse()
            .ok_or_else(|| Error::Numerical("singular factor in cross-ratio".into()))
    };
    let a = inv(&id - o.adjoint() * x)?;
    let b = inv(&id - o * x.adjoint())?;
    Ok(&d * a * d.adjoint() * b)
}

/// The Möbius isometry
/// `Ψ(Ω) = (I − Ω̄Ω̄†)^{−1/2} (Ω − Ω̄)(I − Ω̄†Ω)⁻¹ (I − Ω̄†Ω̄)^{1/2}`
/// sending `center` to 0, and its inverse, which is the same map built on
/// `−center`.
#[derive(Debug, Clone)]
pub struct Mobius {
    center: SiegelPoint,
    left: CMat,
    right: CMat,
}

/// `U diag(f(1−s²)) U†` from an SVD column basis, with `1 − s²` formed
/// as `(1 − s)(1 + s)`.
fn defect_power(basis: &CMat, s: &[f64], p: f64) -> CMat {
    let mut scaled = basis.clone();
    for (j, &x) in s.iter().enumerate() {
        let f = Complex64::new(((1.0 - x) * (1.0 + x)).powf(p), 0.0);
        scaled.column_mut(j).iter_mut().for_each(|z| *z *= f);
    }
    scaled * basis.adjoint()
}

pub fn mobius_to_origin(center: &SiegelPoint) -> Mobius {
    let svd = hestenes(center.mat.clone());
    Mobius {
        center: center.clone(),
        left: defect_power(&svd.u, &svd.s, -0.5),
        right: defect_power(&svd.v, &svd.s, 0.5),
    }
}

impl Mobius {
    pub fn center(&self) -> &SiegelPoint {
        &self.center
    }

    /// The map with center `sign · Ω̄`. The defect factors do not depend on
    /// the sign.
    fn raw(&self, p: &SiegelPoint, sign: f64) -> Result<CMat> {
        self.center.check_compatible(p)?;
        if self.center.is_zero() {
            return Ok(p.mat.clone());
        }
        let n = p.n();
        let c = self.center.mat.map(|z| z * sign);
        let m = CMat::identity(n, n) - c.adjoint() * &p.mat;
        let inv = m
            .try_inverse()
            .ok_or_else(|| Error::Numerical("singular factor in Möbius map".into()))?;
        Ok(&self.left * (&p.mat - &c) * inv * &self.right)
    }

    fn apply(&self, p: &SiegelPoint, sign: f64) -> Result<SiegelPoint> {
        let mut out = self.raw(p, sign)?;
        if p.beta == 1 {
            out = (&out + out.transpose()).map(|z| z * 0.5);
        }
        let norm = singular_values(&out)[0];
        if norm >= 1.0 - BOUNDARY_MARGIN {
            return Err(Error::Numerical(format!(
                "Möbius image has operator norm {norm}; it left the domain through rounding"
            )));
        }
        Ok(SiegelPoint {
            beta: p.beta,
            mat: out,
        })
    }

    pub fn forward(&self, p: &SiegelPoint) -> Result<SiegelPoint> {
        self.apply(p, 1.0)
    }

    pub fn inverse(&self, p: &SiegelPoint) -> Result<SiegelPoint> {
        self.apply(p, -1.0)
    }
}

fn atanh_checked(s: f64) -> Result<f64> {
    if s >= 1.0 {
        return domain(format!("cross-ratio eigenvalue {} is not below 1", s * s));
    }
    Ok(s.atanh())
}

/// Geodesic distance `d²(Ξ, Ω) = Σ arctanh²(sᵢ)` with `sᵢ` the singular
/// values of `Ψ_Ω(Ξ)`; their squares are the eigenvalues of the
/// cross-ratio `R(Ξ, Ω)`.
pub fn siegel_distance_sq(xi: &SiegelPoint, om: &SiegelPoint) -> Result<f64> {
    xi.check_compatible(om)?;
    let w = mobius_to_origin(om).raw(xi, 1.0)?;
    let mut acc = 0.0;
    for s in singular_values(&w) {
        let a = atanh_checked(s)?;
        acc += a * a;
    }
    Ok(acc)
}

pub fn siegel_distance(xi: &SiegelPoint, om: &SiegelPoint) -> Result<f64> {
    siegel_distance_sq(xi, om).map(f64::sqrt)
}

/// `Ω = U tanh(r) V†` (β = 2) or `U tanh(r) Uᵀ` (β = 1, `v = None`);
/// `r` descending.
#[derive(Debug, Clone)]
pub struct PolarFactor {
    pub u: CMat,
    pub v: Option<CMat>,
    pub r: Vec<f64>,
}

pub fn polar_factor(om: &SiegelPoint) -> Result<PolarFactor> {
    if om.beta == 1 {
        let t = takagi(&om.to_dense())?;
        let r = t.lambda.iter().map(|&s| atanh_checked(s)).collect::<Result<_>>()?;
        Ok(PolarFactor { u: t.u, v: None, r })
    } else {
        let s = hestenes(om.mat.clone());
        let r = s.s.iter().map(|&x| atanh_checked(x)).collect::<Result<_>>()?;
        Ok(PolarFactor {
            u: s.u,
            v: Some(s.v),
            r,
        })
    }
}

/// Log of the unnormalized radial density; `−∞` when some `rᵢ = 0` or
/// two coordinates coincide.
pub fn siegel_radial_log_density(r: &[f64], spec: &EnsembleSpec) -> Result<f64> {
    if spec.beta > 2 {
        return domain("Siegel domains need beta 1 or 2");
    }
    if r.iter().any(|x| !(*x >= 0.0)) {
        return domain("radial coordinates must be nonnegative");
    }
    let inv2s2 = 1.0 / (2.0 * spec.sigma * spec.sigma);
    let beta = spec.beta as f64;
    let mut acc = 0.0;
    for (i, &ri) in r.iter().enumerate() {
        acc += -ri * ri * inv2s2 + log_sinh(2.0 * ri);
        for &rj in &r[i + 1..] {
            acc += beta * (log_sinh((ri - rj).abs()) + log_sinh(ri + rj));
        }
    }
    Ok(acc)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SiegelGaussianModel {
    pub center: SiegelPoint,
    pub sigma: f64,
}

impl SiegelGaussianModel {
    pub fn new(center: SiegelPoint, sigma: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return domain(format!("sigma must be positive and finite, got {sigma}"));
        }
        Ok(SiegelGaussianModel { center, sigma })
    }

    pub fn spec(&self) -> EnsembleSpec {
        EnsembleSpec {
            n: self.center.n(),
            beta: self.center.beta,
            sigma: self.sigma,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SiegelSamples {
    pub points: Vec<SiegelPoint>,
    pub radial: Vec<Vec<f64>>,
    pub acceptance: f64,
    pub warning: Option<String>,
}

/// Radial chain on stream 0 of `cfg.seed`, Haar factors on stream 1, then
/// the inverse Möbius map when the center is not 0.
pub fn sample_siegel_gaussian(model: &SiegelGaussianModel, count: usize, cfg: &ChainConfig) -> Result<SiegelSamples> {
    let spec = model.spec();
    let n = spec.n;
    let inv2s2 = 1.0 / (2.0 * spec.sigma * spec.sigma);
    let beta = spec.beta as f64;
    let init: Vec<f64> = (0..n).map(|i| spec.sigma * (i + 1) as f64).collect();
    let chain = metropolis(init, count, cfg, |r, k, x| {
        if x <= 0.0 {
            return f64::NEG_INFINITY;
        }
        let old = r[k];
        let mut d = (old * old - x * x) * inv2s2 + log_sinh(2.0 * x) - log_sinh(2.0 * old);
        for (j, &rj) in r.iter().enumerate() {
            if j == k {
                continue;
            }
            let dn = (x - rj).abs();
            if dn == 0.0 {
                return f64::NEG_INFINITY;
            }
            d += beta
                * (log_sinh(dn) + log_sinh(x + rj) - log_sinh((old - rj).abs()) - log_sinh(old + rj));
        }
        d
    })?;
    let mut rng = stream_rng(cfg.seed, 1);
    let mobius = (!model.center.is_zero()).then(|| mobius_to_origin(&model.center));
    let mut points = Vec::with_capacity(count);
    let mut radial = Vec::with_capacity(count);
    for s in chain.samples {
        let u = haar_with(n, 2, &mut rng);
        let p = if spec.beta == 1 {
            SiegelPoint::from_polar(1, &u, None, &s.r)?
        } else {
            let v = haar_with(n, 2, &mut rng);
            SiegelPoint::from_polar(2, &u, Some(&v), &s.r)?
        };
        let p = match &mobius {
            Some(m) => m.inverse(&p)?,
            None => p,
        };
        points.push(p);
        radial.push(s.r);
    }
    Ok(SiegelSamples {
        points,
        radial,
        acceptance: chain.acceptance,
        warning: chain.warning,
    })
}

/// Monte Carlo estimate of
/// `z = (1/N!) ∫_{(1,∞)ᴺ} |V(x)|^β ∏ exp(−acosh²(xᵢ)/8σ²) dx`.
/// With `xᵢ = cosh(2rᵢ)` the integrand becomes
/// `∏ e^{−rᵢ²/2σ²} 2 sinh(2rᵢ) ∏_{i<j} (2 sinh|rᵢ − r_j| sinh(rᵢ + r_j))^β`
/// on `r > 0`, importance-sampled with `rᵢ = σ|zᵢ|`.
pub fn log_z_acosh_mc(spec: &EnsembleSpec, samples: usize, seed: u64) -> Result<LogZResult> {
    check_beta(spec.beta)?;
    if spec.beta > 2 {
        return domain("acosh-normal ensembles need beta 1 or 2");
    }
    if samples < 1000 {
        return domain(format!("Monte Carlo needs at least 1000 samples, got {samples}"));
    }
    let n = spec.n;
    let sigma = spec.sigma;
    let beta = spec.beta as f64;
    let ln2 = std::f64::consts::LN_2;
    // Half-normal proposal density is 2/√(2πσ²)·e^{−r²/2σ²}.
    let base = n as f64 * (0.5 * (2.0 * std::f64::consts::PI * sigma * sigma).ln() - ln2)
        - ln_factorial(n);
    let acc = mc_blocks(
        n,
        samples,
        seed,
        LseAcc::new,
        |acc, z| {
            let r: Vec<f64> = z.iter().map(|v| sigma * v.abs()).collect();
            let mut w = 0.0;
            for (i, &ri) in r.iter().enumerate() {
                w += ln2 + log_sinh(2.0 * ri);
                for &rj in &r[i + 1..] {
                    w += beta * (ln2 + log_sinh((ri - rj).abs()) + log_sinh(ri + rj));
                }
            }
            acc.push(if w.is_nan() { f64::NEG_INFINITY } else { w });
        },
        LseAcc::merge,
    );
    let (lm, se) = acc.log_mean()?;
    Ok(LogZResult {
        log_z: base + lm,
        method: PartitionMethod::MonteCarlo,
        stderr: se,
    })
}

/// Closed form at N = 1: `z = √(2πσ²) e^{2σ²} erf(√2 σ)`, in logs.
pub fn log_z_acosh_single(sigma: f64) -> Result<f64> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return domain(format!("sigma must be positive and finite, got {sigma}"));
    }
    Ok(0.5 * (2.0 * std::f64::consts::PI * sigma * sigma).ln()
        + 2.0 * sigma * sigma
        + libm::erf(std::f64::consts::SQRT_2 * sigma).ln())
}
