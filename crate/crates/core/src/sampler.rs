//! Haar matrices, Metropolis sampling of the radial (log-eigenvalue) density,
//! and Riemannian Gaussian samples built from the two.
//!
//! A Gaussian sample is `Y = Ȳ^{1/2} · U e^{diag(r)} U† · Ȳ^{1/2}` with `U`
//! Haar on O(N) or U(N) and `r` drawn from
//!
//! ```text
//! p(r) ∝ ∏ᵢ exp(−rᵢ²/2σ²) ∏_{i<j} sinh^β(|rᵢ − r_j|/2).
//! ```

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{domain, Result};
use crate::matrix::{CMat, DenseMatrix};
use crate::partition::{log_sinh, EnsembleSpec};
use crate::rng::{stream_rng, Rng};
use crate::spd::{check_beta, transport_from_identity, SpdMatrix};
use crate::spectral::density_params;

/// Metropolis chain controls. `burn_in` and `thinning` count
/// single-coordinate updates (coordinates are visited cyclically).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainConfig {
    pub burn_in: usize,
    pub thinning: usize,
    pub step: f64,
    pub seed: u64,
}

impl ChainConfig {
    /// Burn-in 10⁴, thinning 10·N, step σ/√N.
    pub fn for_spec(spec: &EnsembleSpec, seed: u64) -> Self {
        ChainConfig {
            burn_in: 10_000,
            thinning: 10 * spec.n,
            step: spec.sigma / (spec.n as f64).sqrt(),
            seed,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.thinning == 0 {
            return domain("thinning must be at least 1");
        }
        if !(self.step > 0.0 && self.step.is_finite()) {
            return domain(format!("step must be positive, got {}", self.step));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RadialSample {
    pub r: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RadialChain {
    pub samples: Vec<RadialSample>,
    /// Acceptance rate after burn-in.
    pub acceptance: f64,
    /// Set when the acceptance rate falls outside (0.05, 0.95).
    pub warning: Option<String>,
}

/// Haar-distributed orthogonal (β = 1) or unitary (β = 2) matrix from the QR
/// factorization of a Ginibre matrix, with the phases of `diag(R)` moved
/// into `Q`.
pub(crate) fn haar_with(n: usize, beta: u32, rng: &mut Rng) -> CMat {
    let (q, r) = if beta == 1 {
        let g = DMatrix::<f64>::from_fn(n, n, |_, _| StandardNormal.sample(rng));
        let f = g.qr();
        let to_c = |m: DMatrix<f64>| m.map(|x| Complex64::new(x, 0.0));
        (to_c(f.q()), to_c(f.r()))
    } else {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let g = CMat::from_fn(n, n, |_, _| {
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = StandardNormal.sample(rng);
            Complex64::new(s * re, s * im)
        });
        let f = g.qr();
        (f.q(), f.r())
    };
    let mut q = q;
    for j in 0..n {
        let d = r[(j, j)];
        let ph = if d.norm() > 0.0 {
            d / d.norm()
        } else {
            Complex64::new(1.0, 0.0)
        };
        q.column_mut(j).iter_mut().for_each(|z| *z *= ph);
    }
    if beta == 1 {
        q.iter_mut().for_each(|z| z.im = 0.0);
    }
    q
}

pub fn haar(n: usize, beta: u32, seed: u64) -> Result<DenseMatrix> {
    check_beta(beta)?;
    if n == 0 {
        return domain("n must be at least 1");
    }
    let q = haar_with(n, beta, &mut stream_rng(seed, 1));
    match beta {
        1 => DenseMatrix::real(&q.map(|z| z.re)),
        _ => DenseMatrix::complex(q),
    }
}

/// Unnormalized log-density of the log-eigenvalues; `−∞` at coincidences.
pub fn radial_log_density(r: &RadialSample, spec: &EnsembleSpec) -> f64 {
    let r = &r.r;
    let s2 = spec.sigma * spec.sigma;
    let mut acc = -r.iter().map(|x| x * x).sum::<f64>() / (2.0 * s2);
    let beta = spec.beta as f64;
    for i in 0..r.len() {
        for j in (i + 1)..r.len() {
            let d = (r[i] - r[j]).abs();
            if d == 0.0 {
                return f64::NEG_INFINITY;
            }
            acc += beta * log_sinh(0.5 * d);
        }
    }
    acc
}

/// Component-wise Gaussian random-walk Metropolis. `delta(r, k, x)` returns
/// the change in log-density when `r[k]` is replaced by `x`.
pub(crate) fn metropolis(
    init: Vec<f64>,
    count: usize,
    cfg: &ChainConfig,
    delta: impl Fn(&[f64], usize, f64) -> f64,
) -> Result<RadialChain> {
    cfg.validate()?;
    if count == 0 {
        return domain("count must be at least 1");
    }
    let n = init.len();
    let mut rng = stream_rng(cfg.seed, 0);
    let mut r = init;
    let mut k = 0;
    let mut update = |r: &mut Vec<f64>, rng: &mut Rng| -> bool {
        let z: f64 = StandardNormal.sample(rng);
        let x = r[k] + cfg.step * z;
        let d = delta(r, k, x);
        let u: f64 = rng.random();
        let accept = d >= 0.0 || u.ln() < d;
        if accept {
            r[k] = x;
        }
        k = (k + 1) % n;
        accept
    };
    for _ in 0..cfg.burn_in {
        update(&mut r, &mut rng);
    }
    let mut accepted = 0usize;
    let mut samples = Vec::with_capacity(count);
    for _ in 0..count {
        for _ in 0..cfg.thinning {
            accepted += update(&mut r, &mut rng) as usize;
        }
        samples.push(RadialSample { r: r.clone() });
    }
    let acceptance = accepted as f64 / (count * cfg.thinning) as f64;
    let warning = if acceptance <= 0.05 || acceptance >= 0.95 {
        let msg = format!(
            "Metropolis acceptance rate {acceptance:.3} is outside (0.05, 0.95); consider another step size"
        );
        log::warn!("{msg}");
        Some(msg)
    } else {
        None
    };
    Ok(RadialChain {
        samples,
        acceptance,
        warning,
    })
}

/// Starting point: N points evenly spread over the support of the limiting
/// eigenvalue density in log-coordinates.
fn initial_state(spec: &EnsembleSpec) -> Vec<f64> {
    let n = spec.n;
    if n == 1 {
        return vec![0.0];
    }
    let xi = 0.5 * spec.beta as f64 * spec.t();
    let w = density_params(xi).map(|d| d.b.ln()).unwrap_or(1.0).max(1e-3);
    (0..n)
        .map(|i| -w + 2.0 * w * i as f64 / (n - 1) as f64)
        .collect()
}

/// Draws `count` log-eigenvalue vectors from the radial density.
pub fn sample_radial(spec: &EnsembleSpec, count: usize, cfg: &ChainConfig) -> Result<RadialChain> {
    let inv2s2 = 1.0 / (2.0 * spec.sigma * spec.sigma);
    let beta = spec.beta as f64;
    metropolis(initial_state(spec), count, cfg, |r, k, x| {
        let old = r[k];
        let mut d = (old * old - x * x) * inv2s2;
        for (j, &rj) in r.iter().enumerate() {
            if j == k {
                continue;
            }
            let dn = (x - rj).abs();
            if dn == 0.0 {
                return f64::NEG_INFINITY;
            }
            d += beta * (log_sinh(0.5 * dn) - log_sinh(0.5 * (old - rj).abs()));
        }
        d
    })
}

/// Parameters of a Riemannian Gaussian: center `Ȳ` and dispersion `σ`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianModel {
    pub mean: SpdMatrix,
    pub sigma: f64,
}

impl GaussianModel {
    pub fn new(mean: SpdMatrix, sigma: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return domain(format!("sigma must be positive and finite, got {sigma}"));
        }
        Ok(GaussianModel { mean, sigma })
    }

    pub fn spec(&self) -> EnsembleSpec {
        EnsembleSpec {
            n: self.mean.n(),
            beta: self.mean.beta(),
            sigma: self.sigma,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpdSamples {
    pub points: Vec<SpdMatrix>,
    pub acceptance: f64,
    pub warning: Option<String>,
}

/// Riemannian Gaussian samples. The radial chain uses stream 0 of
/// `cfg.seed` and the Haar factors stream 1.
pub fn sample_gaussian_spd(model: &GaussianModel, count: usize, cfg: &ChainConfig) -> Result<SpdSamples> {
    let spec = model.spec();
    let chain = sample_radial(&spec, count, cfg)?;
    let mut rng = stream_rng(cfg.seed, 1);
    let mean = &model.mean;
    let le = mean.log_eigs();
    let scalar = le.iter().all(|&x| x == le[0]);
    let mut points = Vec::with_capacity(count);
    for s in &chain.samples {
        let u = haar_with(spec.n, spec.beta, &mut rng);
        let y = if scalar {
            SpdMatrix::from_spectral(spec.beta, u, s.r.iter().map(|x| x + le[0]).collect())?
        } else {
            transport_from_identity(mean, &u, &s.r)?
        };
        points.push(y);
    }
    Ok(SpdSamples {
        points,
        acceptance: chain.acceptance,
        warning: chain.warning,
    })
}

/// `X = e^{N_β σ²} · Y`, the rescaling that turns a Riemannian Gaussian
/// sample centered at the identity into a log-normal ensemble draw.
pub fn to_log_normal_ensemble(y: &SpdMatrix, sigma: f64) -> Result<SpdMatrix> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return domain(format!("sigma must be nonnegative, got {sigma}"));
    }
    let n_beta = 0.5 * y.beta() as f64 * (y.n() as f64 - 1.0) + 1.0;
    y.shift_log(n_beta * sigma * sigma)
}
