//! Evaluators of the radial normalizing integral
//!
//! ```text
//! z_β(σ) = (1/N!) ∫_{ℝᴺ} ∏ᵢ exp(−rᵢ²/2σ²) ∏_{i<j} (2 sinh(|rᵢ − r_j|/2))^β dr
//! ```
//!
//! and of `φ(σ) = σ³ d/dσ log z_β(σ)`, the population mean squared distance
//! to the center of a Riemannian Gaussian.
//!
//! The factor 2 inside the product is the normalization under which the
//! β = 2 closed form, the β = 1 Pfaffian formula and the trilogarithm limit
//! hold; without it every method would be off by `βN(N−1)/2 · log 2`.

use std::fmt;
use std::str::FromStr;

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::dd::Dd;
use crate::error::{domain, Error, Result};
use crate::matrix::pfaffian_log_in;
use crate::rng::stream_rng;
use crate::specfun::{
    erf_dd, phi_planar_corrected, phi_planar_corrected_deriv, phi_trilog, phi_trilog_deriv,
};

/// Eigenvalue-ensemble parameters `(N, β, σ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnsembleSpec {
    pub n: usize,
    pub beta: u32,
    pub sigma: f64,
}

impl EnsembleSpec {
    pub fn new(n: usize, beta: u32, sigma: f64) -> Result<Self> {
        if n == 0 {
            return domain("n must be at least 1");
        }
        if ![1, 2, 4].contains(&beta) {
            return domain(format!("beta must be 1, 2 or 4, got {beta}"));
        }
        if !(sigma > 0.0 && sigma.is_finite()) {
            return domain(format!("sigma must be positive and finite, got {sigma}"));
        }
        Ok(EnsembleSpec { n, beta, sigma })
    }

    pub fn with_sigma(&self, sigma: f64) -> Result<Self> {
        Self::new(self.n, self.beta, sigma)
    }

    /// `N_β = (β/2)(N − 1) + 1`.
    pub fn n_beta(&self) -> f64 {
        0.5 * self.beta as f64 * (self.n as f64 - 1.0) + 1.0
    }

    /// The 't Hooft coupling `t = Nσ²`.
    pub fn t(&self) -> f64 {
        self.n as f64 * self.sigma * self.sigma
    }

    fn half_beta(&self) -> f64 {
        0.5 * self.beta as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PartitionMethod {
    ExactBeta2,
    PfaffianBeta1,
    Trilog,
    TrilogCorrected,
    MonteCarlo,
}

impl PartitionMethod {
    pub fn name(self) -> &'static str {
        match self {
            PartitionMethod::ExactBeta2 => "exact",
            PartitionMethod::PfaffianBeta1 => "pfaffian",
            PartitionMethod::Trilog => "trilog",
            PartitionMethod::TrilogCorrected => "trilog-corrected",
            PartitionMethod::MonteCarlo => "mc",
        }
    }
}

impl fmt::Display for PartitionMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PartitionMethod {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(PartitionMethod::ExactBeta2),
            "pfaffian" => Ok(PartitionMethod::PfaffianBeta1),
            "trilog" => Ok(PartitionMethod::Trilog),
            "trilog-corrected" => Ok(PartitionMethod::TrilogCorrected),
            "mc" => Ok(PartitionMethod::MonteCarlo),
            _ => domain(format!(
                "unknown method '{s}' (expected exact, pfaffian, trilog, trilog-corrected or mc)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogZResult {
    pub log_z: f64,
    pub method: PartitionMethod,
    /// Standard error of `log_z`; zero for deterministic methods.
    pub stderr: f64,
}

impl LogZResult {
    fn exact(log_z: f64, method: PartitionMethod) -> Self {
        LogZResult {
            log_z,
            method,
            stderr: 0.0,
        }
    }
}

fn gaussian_part(spec: &EnsembleSpec) -> f64 {
    0.5 * spec.n as f64 * (2.0 * std::f64::consts::PI * spec.sigma * spec.sigma).ln()
}

pub(crate) fn ln_factorial(n: usize) -> f64 {
    (2..=n).map(|k| (k as f64).ln()).sum()
}

/// `log sinh(y)` for `y > 0` without overflow.
pub(crate) fn log_sinh(y: f64) -> f64 {
    if y > 20.0 {
        y - std::f64::consts::LN_2 + (-(-2.0 * y).exp()).ln_1p()
    } else {
        y.sinh().ln()
    }
}

/// Closed form for β = 2.
pub fn log_z_exact_beta2(spec: &EnsembleSpec) -> Result<LogZResult> {
    if spec.beta != 2 {
        return domain(format!("the closed form needs beta = 2, got {}", spec.beta));
    }
    let n = spec.n as f64;
    let s2 = spec.sigma * spec.sigma;
    let mut acc = gaussian_part(spec) + n * (n * n - 1.0) * s2 / 6.0;
    for k in 1..spec.n {
        acc += (n - k as f64) * (-(-(k as f64) * s2).exp_m1()).ln();
    }
    Ok(LogZResult::exact(acc, PartitionMethod::ExactBeta2))
}

fn phi_exact_beta2(spec: &EnsembleSpec) -> f64 {
    let n = spec.n as f64;
    let s2 = spec.sigma * spec.sigma;
    let s4 = s2 * s2;
    let mut acc = n * s2 + n * (n * n - 1.0) * s4 / 3.0;
    for k in 1..spec.n {
        let kf = k as f64;
        acc += (n - kf) * 2.0 * kf * s4 / (kf * s2).exp_m1();
    }
    acc
}

/// Relative size of the deterministic perturbation used to test whether the
/// double-double Pfaffian is trustworthy.
const PFAFFIAN_PROBE: f64 = 1e-30;
const PFAFFIAN_PROBE_TOL: f64 = 1e-6;

fn erf_toeplitz(n: usize, sigma: f64, probe: bool) -> Vec<Dd> {
    let half = 0.5 * sigma;
    let mut a = vec![Dd::ZERO; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let mut v = erf_dd(Dd::from_prod((j - i) as f64, half));
            if probe {
                let p = ((i * 7 + j * 13) % 17) as f64 / 8.5 - 1.0;
                v = v + v.mul_f64(PFAFFIAN_PROBE * p);
            }
            a[i * n + j] = v;
            a[j * n + i] = -v;
        }
    }
    a
}

/// log Pf of `A_ij = erf((j − i)σ/2)`, in double-double arithmetic.
///
/// At small σ the matrix is close to singular in a structured way and the
/// elimination cancels most leading digits; the result is re-derived from a
/// perturbed copy of `A` and rejected if the two disagree.
pub fn log_pfaffian_erf(n: usize, sigma: f64) -> Result<f64> {
    if n % 2 == 1 {
        return domain(format!(
            "the Pfaffian formula needs an even dimension, got n = {n}"
        ));
    }
    let pf = pfaffian_log_in(erf_toeplitz(n, sigma, false), n);
    if pf.sign <= 0 {
        return Err(Error::Numerical(format!(
            "Pfaffian of the erf matrix is not positive at n = {n}, sigma = {sigma} (sign {})",
            pf.sign
        )));
    }
    let check = pfaffian_log_in(erf_toeplitz(n, sigma, true), n);
    let gap = (check.log_abs - pf.log_abs).abs();
    if check.sign != pf.sign || !(gap <= PFAFFIAN_PROBE_TOL) {
        return Err(Error::Numerical(format!(
            "Pfaffian of the erf matrix is ill-conditioned at n = {n}, sigma = {sigma}: \
             a 1e-30 relative perturbation moved log Pf by {gap:.3e}"
        )));
    }
    Ok(pf.log_abs)
}

/// Pfaffian formula for β = 1 and even N, through the factorization
/// `M = D·A·D` with `D = diag(exp(i²σ²/2))`.
pub fn log_z_pfaffian_beta1(spec: &EnsembleSpec) -> Result<LogZResult> {
    if spec.beta != 1 {
        return domain(format!("the Pfaffian formula needs beta = 1, got {}", spec.beta));
    }
    let n = spec.n as f64;
    let s2 = spec.sigma * spec.sigma;
    // −N(N+1)²σ²/8 + (σ²/2)·Σ i² combined into one term.
    let poly = n * (n * n - 1.0) * s2 / 24.0;
    let lp = log_pfaffian_erf(spec.n, spec.sigma)?;
    Ok(LogZResult::exact(
        gaussian_part(spec) + poly + lp,
        PartitionMethod::PfaffianBeta1,
    ))
}

/// `N²·(β/2)·Φ((β/2)Nσ²)`.
pub fn log_z_trilog(spec: &EnsembleSpec, corrected: bool) -> Result<LogZResult> {
    let hb = spec.half_beta();
    let xi = hb * spec.t();
    let n2 = (spec.n * spec.n) as f64;
    let (phi, method) = if corrected {
        (phi_planar_corrected(xi)?, PartitionMethod::TrilogCorrected)
    } else {
        (phi_trilog(xi)?, PartitionMethod::Trilog)
    };
    Ok(LogZResult::exact(n2 * hb * phi, method))
}

/// Samples per Monte Carlo stream; streams are merged in index order.
pub const MC_BLOCK: usize = 1 << 16;

/// Running log-sum-exp state of `w` and `2w`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct LseAcc {
    max: f64,
    s1: f64,
    s2: f64,
    count: usize,
}

impl LseAcc {
    pub(crate) fn new() -> Self {
        LseAcc {
            max: f64::NEG_INFINITY,
            s1: 0.0,
            s2: 0.0,
            count: 0,
        }
    }

    pub(crate) fn push(&mut self, w: f64) {
        self.count += 1;
        if w == f64::NEG_INFINITY {
            return;
        }
        if w > self.max {
            let f = (self.max - w).exp();
            self.s1 = self.s1 * f + 1.0;
            self.s2 = self.s2 * f * f + 1.0;
            self.max = w;
        } else {
            let e = (w - self.max).exp();
            self.s1 += e;
            self.s2 += e * e;
        }
    }

    pub(crate) fn merge(mut self, o: LseAcc) -> Self {
        self.count += o.count;
        if o.max == f64::NEG_INFINITY {
            return self;
        }
        if o.max > self.max {
            let f = (self.max - o.max).exp();
            self.s1 = self.s1 * f + o.s1;
            self.s2 = self.s2 * f * f + o.s2;
            self.max = o.max;
        } else {
            let f = (o.max - self.max).exp();
            self.s1 += o.s1 * f;
            self.s2 += o.s2 * f * f;
        }
        self
    }

    /// `(log mean e^w, delta-method stderr of that log)`.
    pub(crate) fn log_mean(&self) -> Result<(f64, f64)> {
        if self.max == f64::NEG_INFINITY || self.count == 0 {
            return Err(Error::Numerical("all Monte Carlo weights are zero".into()));
        }
        let m = self.count as f64;
        let lm = self.max + self.s1.ln() - m.ln();
        let rel_var = (self.s2 * m / (self.s1 * self.s1) - 1.0).max(0.0);
        Ok((lm, (rel_var / m).sqrt()))
    }
}

fn vandermonde_log(r: &[f64], beta: f64) -> f64 {
    let mut acc = 0.0;
    for i in 0..r.len() {
        for j in (i + 1)..r.len() {
            let d = (r[i] - r[j]).abs();
            if d == 0.0 {
                return f64::NEG_INFINITY;
            }
            acc += std::f64::consts::LN_2 + log_sinh(0.5 * d);
        }
    }
    beta * acc
}

/// Runs `f` on `samples` standard-normal N-vectors drawn in fixed blocks,
/// one ChaCha stream per block, and merges the block results in order.
pub(crate) fn mc_blocks<T, F, M>(
    n: usize,
    samples: usize,
    seed: u64,
    init: impl Fn() -> T + Sync,
    f: F,
    merge: M,
) -> T
where
    T: Send,
    F: Fn(&mut T, &[f64]) + Sync,
    M: Fn(T, T) -> T,
{
    let blocks = samples.div_ceil(MC_BLOCK);
    let parts: Vec<T> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut rng = stream_rng(seed, b as u64);
            let count = MC_BLOCK.min(samples - b * MC_BLOCK);
            let mut acc = init();
            let mut z = vec![0.0; n];
            for _ in 0..count {
                for v in z.iter_mut() {
                    *v = StandardNormal.sample(&mut rng);
                }
                f(&mut acc, &z);
            }
            acc
        })
        .collect();
    let mut it = parts.into_iter();
    let first = it.next().unwrap_or_else(&init);
    it.fold(first, merge)
}

/// Importance sampling from the Gaussian factor: `r ~ N(0, σ²I)`, weight
/// `∏_{i<j} (2 sinh(|rᵢ − r_j|/2))^β`.
pub fn log_z_monte_carlo(spec: &EnsembleSpec, samples: usize, seed: u64) -> Result<LogZResult> {
    if samples < 1000 {
        return domain(format!("Monte Carlo needs at least 1000 samples, got {samples}"));
    }
    let base = gaussian_part(spec) - ln_factorial(spec.n);
    if spec.n == 1 {
        return Ok(LogZResult::exact(base, PartitionMethod::MonteCarlo));
    }
    let sigma = spec.sigma;
    let beta = spec.beta as f64;
    let acc = mc_blocks(
        spec.n,
        samples,
        seed,
        LseAcc::new,
        |acc, z| {
            let r: Vec<f64> = z.iter().map(|v| sigma * v).collect();
            acc.push(vandermonde_log(&r, beta));
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

/// Monte Carlo φ(σ) = E|r|² under the radial density, as a self-normalized
/// importance-sampling ratio over `r = σz`. With a fixed seed the same `z`
/// are reused for every σ, so the estimate is a smooth function of σ.
/// Returns `(φ, stderr)`.
pub fn phi_sigma_monte_carlo(spec: &EnsembleSpec, samples: usize, seed: u64) -> Result<(f64, f64)> {
    if samples < 1000 {
        return domain(format!("Monte Carlo needs at least 1000 samples, got {samples}"));
    }
    let n = spec.n;
    let sigma = spec.sigma;
    let beta = spec.beta as f64;
    if n == 1 {
        return Ok((sigma * sigma, 0.0));
    }
    // Per-block: (max log-weight, Σw, Σw·q, Σw², Σw²q, Σw²q²) with weights
    // rescaled by the block max.
    #[derive(Clone, Copy)]
    struct Acc {
        max: f64,
        w: f64,
        wq: f64,
        w2: f64,
        w2q: f64,
        w2q2: f64,
    }
    let scale = |a: Acc, f: f64| Acc {
        max: a.max,
        w: a.w * f,
        wq: a.wq * f,
        w2: a.w2 * f * f,
        w2q: a.w2q * f * f,
        w2q2: a.w2q2 * f * f,
    };
    let empty = || Acc {
        max: f64::NEG_INFINITY,
        w: 0.0,
        wq: 0.0,
        w2: 0.0,
        w2q: 0.0,
        w2q2: 0.0,
    };
    let add = |a: Acc, b: Acc| -> Acc {
        if b.max == f64::NEG_INFINITY {
            return a;
        }
        if a.max == f64::NEG_INFINITY {
            return b;
        }
        let m = a.max.max(b.max);
        let a = scale(a, (a.max - m).exp());
        let b = scale(b, (b.max - m).exp());
        Acc {
            max: m,
            w: a.w + b.w,
            wq: a.wq + b.wq,
            w2: a.w2 + b.w2,
            w2q: a.w2q + b.w2q,
            w2q2: a.w2q2 + b.w2q2,
        }
    };
    let acc = mc_blocks(
        n,
        samples,
        seed,
        empty,
        |acc, z| {
            let r: Vec<f64> = z.iter().map(|v| sigma * v).collect();
            let lw = vandermonde_log(&r, beta);
            if lw == f64::NEG_INFINITY {
                return;
            }
            let q: f64 = r.iter().map(|v| v * v).sum();
            let one = Acc {
                max: lw,
                w: 1.0,
                wq: q,
                w2: 1.0,
                w2q: q,
                w2q2: q * q,
            };
            *acc = add(*acc, one);
        },
        add,
    );
    if acc.max == f64::NEG_INFINITY {
        return Err(Error::Numerical("all Monte Carlo weights are zero".into()));
    }
    let phi = acc.wq / acc.w;
    // Delta-method variance of a ratio estimator: Σw²(q − φ)² / (Σw)².
    let var = (acc.w2q2 - 2.0 * phi * acc.w2q + phi * phi * acc.w2) / (acc.w * acc.w);
    Ok((phi, var.max(0.0).sqrt()))
}

/// `φ(σ) = σ³ d/dσ log z_β(σ)` for the deterministic methods.
pub fn phi_sigma(spec: &EnsembleSpec, method: PartitionMethod) -> Result<f64> {
    match method {
        PartitionMethod::ExactBeta2 => {
            if spec.beta != 2 {
                return domain(format!("exact method needs beta = 2, got {}", spec.beta));
            }
            Ok(phi_exact_beta2(spec))
        }
        PartitionMethod::PfaffianBeta1 => {
            let h = 1e-4 * spec.sigma;
            let up = log_z_pfaffian_beta1(&spec.with_sigma(spec.sigma + h)?)?.log_z;
            let down = log_z_pfaffian_beta1(&spec.with_sigma(spec.sigma - h)?)?.log_z;
            Ok(spec.sigma.powi(3) * (up - down) / (2.0 * h))
        }
        PartitionMethod::Trilog | PartitionMethod::TrilogCorrected => {
            let hb = spec.half_beta();
            let xi = hb * spec.t();
            let d = if method == PartitionMethod::Trilog {
                phi_trilog_deriv(xi)?
            } else {
                phi_planar_corrected_deriv(xi)?
            };
            let n = spec.n as f64;
            Ok(2.0 * hb * hb * n.powi(3) * spec.sigma.powi(4) * d)
        }
        PartitionMethod::MonteCarlo => domain(
            "phi by Monte Carlo needs a sample count and seed; use phi_sigma_monte_carlo",
        ),
    }
}

/// Monte Carlo settings used when a dispatcher needs them.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct McConfig {
    pub samples: usize,
    pub seed: u64,
}

impl Default for McConfig {
    fn default() -> Self {
        McConfig {
            samples: 1_000_000,
            seed: 0,
        }
    }
}

/// Dispatches to the requested method. β = 1 with odd N has no Pfaffian
/// formula and falls back to Monte Carlo with a warning.
pub fn log_z(spec: &EnsembleSpec, method: PartitionMethod, mc: McConfig) -> Result<LogZResult> {
    match method {
        PartitionMethod::ExactBeta2 => log_z_exact_beta2(spec),
        PartitionMethod::PfaffianBeta1 if spec.beta == 1 && spec.n % 2 == 1 => {
            log::warn!(
                "no Pfaffian formula for odd n = {}; falling back to Monte Carlo",
                spec.n
            );
            log_z_monte_carlo(spec, mc.samples, mc.seed)
        }
        PartitionMethod::PfaffianBeta1 => log_z_pfaffian_beta1(spec),
        PartitionMethod::Trilog => log_z_trilog(spec, false),
        PartitionMethod::TrilogCorrected => log_z_trilog(spec, true),
        PartitionMethod::MonteCarlo => log_z_monte_carlo(spec, mc.samples, mc.seed),
    }
}
