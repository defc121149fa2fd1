//! Maximum-likelihood fitting of a Riemannian Gaussian: the Fréchet mean of
//! the data, then σ̂ solving `φ(σ) = (1/M) Σ d²(Y_m, Ŷ)`.

use rayon::prelude::*;

use crate::error::{domain, Error, Result};
use crate::matrix::{eigh_unchecked, from_spectrum, CMat};
use crate::partition::{phi_sigma, phi_sigma_monte_carlo, EnsembleSpec, McConfig, PartitionMethod};
use crate::rng::derive_seed;
use crate::sampler::{sample_gaussian_spd, ChainConfig, GaussianModel};
use crate::spd::{exp_whitened, whitened_log, SpdMatrix};

#[derive(Debug, Clone, PartialEq)]
pub struct FrechetResult {
    pub mean: SpdMatrix,
    /// Number of update steps taken.
    pub iterations: usize,
    /// Metric norm of the mean tangent vector at `mean`.
    pub gradient_norm: f64,
    /// `(1/M) Σ d²(Y_m, Y_k)` at every iterate `Y_k`, including the last.
    pub variance_history: Vec<f64>,
    /// Set when the iteration stopped at its rounding floor above `tol`.
    /// Whitened logarithms of widely spread matrices carry absolute errors
    /// around `ε·e^{spread}`, which bounds how small the gradient can get.
    pub stalled: bool,
}

impl FrechetResult {
    /// `(1/M) Σ d²(Y_m, mean)`.
    pub fn mean_sq_dist(&self) -> f64 {
        *self.variance_history.last().unwrap()
    }
}

pub const FRECHET_TOL: f64 = 1e-9;
pub const FRECHET_MAX_ITER: usize = 200;
/// Newton steps without a halving of the gradient before the rounding
/// floor is declared.
const STALL_LIMIT: usize = 3;
/// Largest gradient norm, relative to `1 + √variance`, accepted as a
/// rounding floor.
const STALL_GRADIENT: f64 = 1e-6;

/// Points per work unit; sums run over fixed chunks in order so results do
/// not depend on the thread count.
const CHUNK: usize = 64;

/// Whitened logarithms `log(Y^{-1/2} Y_m Y^{-1/2}) = P diag(ℓ) P†` of the
/// data at one base point, with their mean `T̄` and the variance.
struct Whitened {
    parts: Vec<(CMat, Vec<f64>)>,
    mean: CMat,
    var: f64,
}

fn ordered_sum<T: Sync>(
    data: &[T],
    zero: impl Fn() -> CMat + Sync,
    f: impl Fn(&mut CMat, &T) + Sync,
) -> CMat {
    let partial: Vec<CMat> = data
        .par_chunks(CHUNK)
        .map(|c| {
            let mut acc = zero();
            for x in c {
                f(&mut acc, x);
            }
            acc
        })
        .collect();
    let mut total = zero();
    for p in partial {
        total += p;
    }
    total
}

fn whiten(y: &SpdMatrix, data: &[SpdMatrix]) -> Whitened {
    let n = y.n();
    let parts: Vec<(CMat, Vec<f64>)> = data.par_iter().map(|x| whitened_log(y, x)).collect();
    let inv = 1.0 / data.len() as f64;
    let sum = ordered_sum(&parts, || CMat::zeros(n, n), |acc, (p, l)| *acc += from_spectrum(p, l));
    let var = parts
        .iter()
        .map(|(_, l)| l.iter().map(|v| v * v).sum::<f64>())
        .sum::<f64>()
        * inv;
    Whitened {
        parts,
        mean: sum.map(|z| z * inv),
        var,
    }
}

fn inner(a: &CMat, b: &CMat) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x.conj() * y).re).sum()
}

/// `x coth x`, the Hessian weight of `½d²` for an eigenvalue gap `2x`.
fn x_coth_x(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        1.0 + x * x / 3.0
    } else {
        x / x.tanh()
    }
}

impl Whitened {
    /// Hessian of `½ · variance` at the base point, in whitened
    /// coordinates: `(1/M) Σ P ((P†HP) ∘ Γ) P†` with
    /// `Γ_ij = ((ℓ_i − ℓ_j)/2) coth((ℓ_i − ℓ_j)/2)`.
    fn hessian(&self, h: &CMat) -> CMat {
        let n = h.nrows();
        let inv = 1.0 / self.parts.len() as f64;
        let sum = ordered_sum(
            &self.parts,
            || CMat::zeros(n, n),
            |acc, (p, l)| {
                let mut hh = p.adjoint() * h * p;
                for j in 0..n {
                    for i in 0..n {
                        hh[(i, j)] *= x_coth_x(0.5 * (l[i] - l[j]));
                    }
                }
                *acc += p * hh * p.adjoint();
            },
        );
        sum.map(|z| z * inv)
    }

    /// Conjugate gradients for `Hess · h = T̄`, stopped at relative
    /// residual `eta`. The Hessian is bounded below by the identity, so
    /// the iteration is well posed.
    fn newton_direction(&self, eta: f64) -> CMat {
        let b = &self.mean;
        let mut x = b.clone();
        let mut r = b - self.hessian(&x);
        let mut d = r.clone();
        let mut rr = inner(&r, &r);
        let stop = eta * eta * inner(b, b);
        for _ in 0..100 {
            if rr <= stop {
                break;
            }
            let ad = self.hessian(&d);
            let alpha = rr / inner(&d, &ad);
            x += d.map(|z| z * alpha);
            r -= ad.map(|z| z * alpha);
            let rr_new = inner(&r, &r);
            d = &r + d.map(|z| z * (rr_new / rr));
            rr = rr_new;
        }
        // Hermitian part only; rounding in the products breaks it slightly.
        (&x + x.adjoint()).map(|z| z * 0.5)
    }
}

/// Riemannian Newton iteration for the minimizer of
/// `(1/M) Σ d²(Y_m, Y)`, started at `data[0]`.
///
/// The gradient of `½ · variance` is `−T̄`, the mean whitened logarithm.
/// Each step solves the Newton system by conjugate gradients and backtracks
/// on the variance (Armijo). Stops when `‖T̄‖ < tol`.
pub fn frechet_mean(data: &[SpdMatrix], tol: f64, max_iter: usize) -> Result<FrechetResult> {
    let first = data.first().ok_or_else(|| Error::Domain("data set is empty".into()))?;
    if data.iter().any(|x| x.beta() != first.beta() || x.n() != first.n()) {
        return domain("data points have mixed beta or dimension");
    }
    let norm = |t: &CMat| inner(t, t).sqrt();
    let mut y = first.clone();
    let mut w = whiten(&y, data);
    let mut grad = norm(&w.mean);
    let mut history = vec![w.var];
    let mut stall = 0;
    for it in 0..=max_iter {
        let floor = grad < STALL_GRADIENT * (1.0 + w.var.sqrt());
        if grad < tol || (stall >= STALL_LIMIT && floor) {
            return Ok(FrechetResult {
                mean: y,
                iterations: it,
                gradient_norm: grad,
                variance_history: history,
                stalled: grad >= tol,
            });
        }
        if it == max_iter {
            break;
        }
        // Inexact Newton: a loose solve far from the minimum, tighter as the
        // gradient shrinks (superlinear convergence).
        let eta = grad.sqrt().clamp(1e-10, 0.5);
        let mut dir = w.newton_direction(eta);
        let mut slope = -2.0 * inner(&w.mean, &dir);
        if !(slope < 0.0) {
            dir = w.mean.clone();
            slope = -2.0 * grad * grad;
        }
        let e = eigh_unchecked(&dir);
        let slack = 16.0 * f64::EPSILON * w.var;
        let mut step = 1.0;
        let mut accepted = None;
        while step > 1e-10 {
            let tau: Vec<f64> = e.values.iter().map(|v| step * v).collect();
            let cand = exp_whitened(&y, &e.basis, &tau)?;
            let wc = whiten(&cand, data);
            let gc = norm(&wc.mean);
            if wc.var <= w.var + 1e-4 * step * slope || (wc.var <= w.var + slack && gc < grad) {
                accepted = Some((cand, wc, gc));
                break;
            }
            step *= 0.5;
        }
        let Some((cand, wc, gc)) = accepted else {
            if floor {
                stall = STALL_LIMIT;
                continue;
            }
            break;
        };
        stall = if gc > 0.5 * grad { stall + 1 } else { 0 };
        history.push(wc.var);
        y = cand;
        w = wc;
        grad = gc;
    }
    Err(Error::MeanNoConvergence {
        last: Box::new(y),
        gradient_norm: grad,
        iterations: history.len() - 1,
    })
}

/// Optional quadratic penalty `λ(σ − σ₀)²` on the per-sample negative
/// log-likelihood. It adds `2λσ³(σ − σ₀)` to the estimating equation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Penalty {
    pub lambda: f64,
    pub sigma0: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SigmaEstimate {
    pub sigma: f64,
    pub iterations: usize,
}

const SIGMA_MIN: f64 = 1e-3;
const SIGMA_MAX: f64 = 1e3;

/// Solves `g(σ) = φ(σ) [+ penalty] − m = 0` for an arbitrary φ.
///
/// The bracket grows geometrically from σ = 1 (halving the lower end,
/// doubling the upper) until `g` changes sign, without leaving
/// `[1e-3, 1e3]`. Newton steps with a central-difference slope are taken
/// while they stay inside the bracket; bisection otherwise.
pub fn solve_phi(
    m: f64,
    phi: impl Fn(f64) -> Result<f64>,
    penalty: Option<Penalty>,
) -> Result<SigmaEstimate> {
    if !(m > 0.0 && m.is_finite()) {
        return domain(format!("mean squared distance must be positive, got {m}"));
    }
    let g = |s: f64| -> Result<f64> {
        let mut v = phi(s)? - m;
        if let Some(p) = penalty {
            v += 2.0 * p.lambda * s.powi(3) * (s - p.sigma0);
        }
        Ok(v)
    };
    let mut lo = 1.0;
    let mut glo = g(lo)?;
    let mut hi = 1.0;
    let mut ghi = glo;
    while glo > 0.0 && lo > SIGMA_MIN {
        hi = lo;
        ghi = glo;
        lo = (lo * 0.5).max(SIGMA_MIN);
        glo = g(lo)?;
    }
    while ghi < 0.0 && hi < SIGMA_MAX {
        lo = hi;
        glo = ghi;
        hi = (hi * 2.0).min(SIGMA_MAX);
        ghi = g(hi)?;
    }
    for (s, gs) in [(lo, glo), (hi, ghi)] {
        if gs == 0.0 {
            return Ok(SigmaEstimate {
                sigma: s,
                iterations: 0,
            });
        }
    }
    if !(glo < 0.0 && ghi > 0.0) {
        return Err(Error::NoBracket {
            lo,
            hi,
            f_lo: glo + m,
            f_hi: ghi + m,
        });
    }
    let mut s = (lo * hi).sqrt();
    for it in 1..=200 {
        let gs = g(s)?;
        if gs.abs() < 1e-8 * m {
            return Ok(SigmaEstimate {
                sigma: s,
                iterations: it,
            });
        }
        if gs < 0.0 {
            lo = s;
        } else {
            hi = s;
        }
        if hi - lo <= 4.0 * f64::EPSILON * hi {
            return Ok(SigmaEstimate {
                sigma: s,
                iterations: it,
            });
        }
        let h = 1e-6 * s;
        let slope = (g(s + h)? - g(s - h)?) / (2.0 * h);
        let newton = s - gs / slope;
        s = if slope > 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
    }
    Err(Error::NoConvergence {
        iterations: 200,
        residual: g(s)?.abs(),
    })
}

/// φ for dimension `n`, index `beta` and a method, as a function of σ.
pub fn phi_function(
    n: usize,
    beta: u32,
    method: PartitionMethod,
    mc: McConfig,
) -> impl Fn(f64) -> Result<f64> {
    move |s| {
        let spec = EnsembleSpec::new(n, beta, s)?;
        match method {
            PartitionMethod::MonteCarlo => Ok(phi_sigma_monte_carlo(&spec, mc.samples, mc.seed)?.0),
            PartitionMethod::PfaffianBeta1 if n % 2 == 1 => {
                Ok(phi_sigma_monte_carlo(&spec, mc.samples, mc.seed)?.0)
            }
            _ => phi_sigma(&spec, method),
        }
    }
}

/// σ̂ solving `φ(σ) = mean_sq_dist`.
pub fn estimate_sigma(
    mean_sq_dist: f64,
    n: usize,
    beta: u32,
    method: PartitionMethod,
    mc: McConfig,
    penalty: Option<Penalty>,
) -> Result<SigmaEstimate> {
    EnsembleSpec::new(n, beta, 1.0)?;
    solve_phi(mean_sq_dist, phi_function(n, beta, method, mc), penalty)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    pub mean: SpdMatrix,
    pub sigma_hat: Option<f64>,
    pub mean_sq_dist: f64,
    pub iterations_mean: usize,
    pub iterations_sigma: usize,
    pub method: PartitionMethod,
    pub converged: bool,
    /// Why σ̂ is missing, when it is.
    pub note: Option<String>,
}

const ZERO_DISPERSION: f64 = 1e-20;

/// Fréchet mean, mean squared distance, then σ̂. A failed σ solve (for
/// example a single data point, which gives a zero mean squared distance)
/// is reported as a non-converged fit rather than an error.
pub fn fit_gaussian(
    data: &[SpdMatrix],
    method: PartitionMethod,
    mc: McConfig,
    penalty: Option<Penalty>,
) -> Result<FitReport> {
    let fm = frechet_mean(data, FRECHET_TOL, FRECHET_MAX_ITER)?;
    let m = fm.mean_sq_dist();
    let first = &data[0];
    // Rounding leaves d² around 1e-30 for coincident points; a positive
    // residue like that would otherwise reach the solver as data.
    let est = if data.len() < 2 || m <= ZERO_DISPERSION {
        domain(format!("data have no dispersion (mean squared distance {m:e}); the likelihood has no interior maximum"))
    } else {
        estimate_sigma(m, first.n(), first.beta(), method, mc, penalty)
    };
    let (sigma_hat, iterations_sigma, note) = match est {
        Ok(e) => (Some(e.sigma), e.iterations, None),
        Err(e) => (None, 0, Some(e.to_string())),
    };
    Ok(FitReport {
        mean: fm.mean,
        converged: sigma_hat.is_some(),
        sigma_hat,
        mean_sq_dist: m,
        iterations_mean: fm.iterations,
        iterations_sigma,
        method,
        note,
    })
}

/// Settings for a σ-recovery experiment: for each true σ, `trials` data
/// sets of `m` Gaussian samples centered at the identity are fitted.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub n: usize,
    pub beta: u32,
    pub sigmas: Vec<f64>,
    pub m: usize,
    pub trials: usize,
    pub method: PartitionMethod,
    /// Samples per φ evaluation when `method` is Monte Carlo.
    pub mc_samples: usize,
    pub seed: u64,
}

impl ExperimentConfig {
    /// The three reference set-ups: 1 = (β 1, N 10, M 10³, trilog),
    /// 2 = same with Monte Carlo φ, 3 = (β 1, N 20, M 10⁴, trilog).
    pub fn table(table: u32, seed: u64) -> Result<Self> {
        let sigmas = (1..=7).map(|s| s as f64).collect();
        let base = ExperimentConfig {
            n: 10,
            beta: 1,
            sigmas,
            m: 1000,
            trials: 20,
            method: PartitionMethod::Trilog,
            mc_samples: 100_000,
            seed,
        };
        match table {
            1 => Ok(base),
            2 => Ok(ExperimentConfig {
                method: PartitionMethod::MonteCarlo,
                ..base
            }),
            3 => Ok(ExperimentConfig {
                n: 20,
                m: 10_000,
                ..base
            }),
            _ => domain(format!("table must be 1, 2 or 3, got {table}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    pub sigma_true: f64,
    pub trial: usize,
    pub seed: u64,
    pub sigma_hat: Option<f64>,
    pub mean_sq_dist: f64,
    pub iterations_mean: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentRow {
    pub sigma_true: f64,
    /// Average and standard deviation of σ̂ over the converged trials.
    pub mean: f64,
    pub sd: f64,
    pub converged: usize,
    pub trials: Vec<TrialResult>,
}

/// One trial: sample, fit, report.
pub fn run_trial(cfg: &ExperimentConfig, sigma: f64, trial: usize, seed: u64) -> Result<TrialResult> {
    let model = GaussianModel::new(SpdMatrix::identity(cfg.n, cfg.beta)?, sigma)?;
    let chain = ChainConfig::for_spec(&model.spec(), seed);
    let data = sample_gaussian_spd(&model, cfg.m, &chain)?.points;
    let mc = McConfig {
        samples: cfg.mc_samples,
        seed: derive_seed(seed, 1),
    };
    let fit = fit_gaussian(&data, cfg.method, mc, None)?;
    Ok(TrialResult {
        sigma_true: sigma,
        trial,
        seed,
        sigma_hat: fit.sigma_hat,
        mean_sq_dist: fit.mean_sq_dist,
        iterations_mean: fit.iterations_mean,
    })
}

/// Runs every (σ, trial) pair in parallel with seeds derived from
/// `cfg.seed`; rows come back in σ order, trials in index order.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<ExperimentRow>> {
    let jobs: Vec<(usize, f64, usize)> = cfg
        .sigmas
        .iter()
        .enumerate()
        .flat_map(|(i, &s)| (0..cfg.trials).map(move |t| (i, s, t)))
        .collect();
    let results: Vec<Result<TrialResult>> = jobs
        .par_iter()
        .map(|&(i, s, t)| run_trial(cfg, s, t, derive_seed(cfg.seed, (i * 100_000 + t) as u64)))
        .collect();
    let mut rows = Vec::new();
    let mut it = results.into_iter();
    for &s in &cfg.sigmas {
        let trials: Vec<TrialResult> = it.by_ref().take(cfg.trials).collect::<Result<_>>()?;
        let vals: Vec<f64> = trials.iter().filter_map(|t| t.sigma_hat).collect();
        let k = vals.len() as f64;
        let mean = vals.iter().sum::<f64>() / k;
        let sd = (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / k).sqrt();
        rows.push(ExperimentRow {
            sigma_true: s,
            mean,
            sd,
            converged: vals.len(),
            trials,
        });
    }
    Ok(rows)
}
