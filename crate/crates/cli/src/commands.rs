use std::str::FromStr;

use spdgauss::inference::{fit_gaussian, run_experiment, ExperimentConfig, Penalty};
use spdgauss::partition::{log_z, phi_sigma, phi_sigma_monte_carlo, EnsembleSpec, McConfig, PartitionMethod};
use spdgauss::sampler::{sample_gaussian_spd, ChainConfig, GaussianModel};
use spdgauss::siegel::{
    log_z_acosh_mc, log_z_acosh_single, sample_siegel_gaussian, siegel_distance, SiegelGaussianModel, SiegelPoint,
};
use spdgauss::spd::SpdMatrix;
use spdgauss::spectral::{compare_empirical, density_eval, density_params};

use crate::args::*;
use crate::error::CliError;
use crate::io::{csv, jsonl, num, read_siegel, read_spd, Sink};

pub const LOGZ_SCHEMA: &str = "spdgauss-logz/1";
pub const PHI_SCHEMA: &str = "spdgauss-phi/1";
pub const EXPERIMENT_SCHEMA: &str = "spdgauss-experiment/1";
pub const TRIALS_SCHEMA: &str = "spdgauss-experiment-trials/1";
pub const SPECTRUM_SCHEMA: &str = "spdgauss-spectrum/1";
pub const SPECTRUM_CDF_SCHEMA: &str = "spdgauss-spectrum-cdf/1";
pub const SIEGEL_DIST_SCHEMA: &str = "spdgauss-siegel-dist/1";
pub const SIEGEL_LOGZ_SCHEMA: &str = "spdgauss-siegel-logz/1";

fn usage<T>(msg: impl Into<String>) -> Result<T, CliError> {
    Err(CliError::Usage(msg.into()))
}

fn need_seed(seed: Option<u64>, what: &str) -> Result<u64, CliError> {
    seed.ok_or_else(|| CliError::Usage(format!("{what} is stochastic and needs --seed")))
}

/// `x`, `a,b,c` or inclusive `start:stop:step`.
pub fn parse_grid(s: &str) -> Result<Vec<f64>, CliError> {
    let bad = || CliError::Usage(format!("cannot parse '{s}' as a value, list or start:stop:step range"));
    let parts: Vec<&str> = s.split(':').collect();
    let vals = match parts.as_slice() {
        [a, b, h] => {
            let (a, b, h): (f64, f64, f64) = (
                a.trim().parse().map_err(|_| bad())?,
                b.trim().parse().map_err(|_| bad())?,
                h.trim().parse().map_err(|_| bad())?,
            );
            if !(h > 0.0) || b < a {
                return Err(bad());
            }
            let count = ((b - a) / h + 1e-9).floor() as usize + 1;
            (0..count).map(|k| a + k as f64 * h).collect()
        }
        [list] => list
            .split(',')
            .map(|v| v.trim().parse::<f64>().map_err(|_| bad()))
            .collect::<Result<Vec<_>, _>>()?,
        _ => return Err(bad()),
    };
    if vals.is_empty() || vals.len() > 1_000_000 {
        return Err(bad());
    }
    Ok(vals)
}

fn parse_methods(s: &str) -> Result<Vec<PartitionMethod>, CliError> {
    s.split(',')
        .map(|m| PartitionMethod::from_str(m.trim()).map_err(|e| CliError::Usage(e.to_string())))
        .collect()
}

fn spec(n: usize, beta: u32, sigma: f64) -> Result<EnsembleSpec, CliError> {
    EnsembleSpec::new(n, beta, sigma).map_err(|e| CliError::Usage(e.to_string()))
}

fn uses_mc(m: PartitionMethod, n: usize) -> bool {
    m == PartitionMethod::MonteCarlo || (m == PartitionMethod::PfaffianBeta1 && n % 2 == 1)
}

fn chain_config(spec: &EnsembleSpec, seed: u64, a: &ChainArgs) -> ChainConfig {
    let d = ChainConfig::for_spec(spec, seed);
    ChainConfig {
        burn_in: a.burn_in.unwrap_or(d.burn_in),
        thinning: a.thinning.unwrap_or(d.thinning),
        step: a.step.unwrap_or(d.step),
        seed,
    }
}

pub fn logz(a: &LogzArgs, seed: Option<u64>, sink: &mut Sink) -> Result<(), CliError> {
    let sigmas = parse_grid(&a.sigma)?;
    let methods = parse_methods(&a.methods)?;
    spec(a.n, a.beta, 1.0)?;
    let mc_seed = if methods.iter().any(|&m| uses_mc(m, a.n)) {
        need_seed(seed, "Monte Carlo")?
    } else {
        0
    };
    let mc = McConfig {
        samples: a.mc_samples,
        seed: mc_seed,
    };
    let n2 = (a.n * a.n) as f64;
    let mut rows = Vec::new();
    for &s in &sigmas {
        let sp = spec(a.n, a.beta, s)?;
        for &m in &methods {
            let r = log_z(&sp, m, mc)?;
            rows.push(vec![
                a.beta.to_string(),
                a.n.to_string(),
                num(s),
                r.method.to_string(),
                num(r.log_z),
                num(r.log_z / n2),
                num(r.stderr),
            ]);
        }
    }
    let header = ["beta", "n", "sigma", "method", "log_z", "log_z_over_n2", "stderr"];
    sink.write_main(&csv(LOGZ_SCHEMA, &header, &rows))
}

pub fn phi(a: &LogzArgs, seed: Option<u64>, sink: &mut Sink) -> Result<(), CliError> {
    let sigmas = parse_grid(&a.sigma)?;
    let methods = parse_methods(&a.methods)?;
    spec(a.n, a.beta, 1.0)?;
    let mc_seed = if methods.iter().any(|&m| uses_mc(m, a.n)) {
        need_seed(seed, "Monte Carlo")?
    } else {
        0
    };
    let mut rows = Vec::new();
    for &s in &sigmas {
        let sp = spec(a.n, a.beta, s)?;
        for &m in &methods {
            let (label, v, se) = if uses_mc(m, a.n) {
                let (v, se) = phi_sigma_monte_carlo(&sp, a.mc_samples, mc_seed)?;
                (PartitionMethod::MonteCarlo, v, se)
            } else {
                (m, phi_sigma(&sp, m)?, 0.0)
            };
            rows.push(vec![
                a.beta.to_string(),
                a.n.to_string(),
                num(s),
                label.to_string(),
                num(v),
                num(se),
            ]);
        }
    }
    let header = ["beta", "n", "sigma", "method", "phi", "stderr"];
    sink.write_main(&csv(PHI_SCHEMA, &header, &rows))
}

pub fn sample(a: &SampleArgs, seed: Option<u64>, sink: &mut Sink) -> Result<(), CliError> {
    let seed = need_seed(seed, "sample")?;
    let sp = spec(a.n, a.beta, a.sigma)?;
    let mean = match &a.mean {
        Some(p) => {
            let m = read_spd(p)?.swap_remove(0);
            if m.n() != a.n || m.beta() != a.beta {
                return usage("the mean file does not match --n/--beta");
            }
            m
        }
        None => SpdMatrix::identity(a.n, a.beta)?,
    };
    let model = GaussianModel::new(mean, a.sigma)?;
    let s = sample_gaussian_spd(&model, a.count, &chain_config(&sp, seed, &a.chain))?;
    let mats: Vec<_> = s.points.iter().map(|p| p.to_dense().into_mat()).collect();
    sink.write_main(&jsonl(mats.iter().map(|m| (a.beta, m))))
}

/// Fit report; keys follow the documented schema.
#[derive(serde::Serialize)]
struct FitJson {
    beta: u32,
    n: usize,
    m: usize,
    sigma_hat: Option<f64>,
    mean_sq_dist: f64,
    iterations_mean: usize,
    iterations_sigma: usize,
    method: String,
    converged: bool,
}

pub fn fit(a: &FitArgs, seed: Option<u64>, sink: &mut Sink) -> Result<(), CliError> {
    let data = read_spd(&a.input)?;
    let method = PartitionMethod::from_str(&a.method).map_err(|e| CliError::Usage(e.to_string()))?;
    let (n, beta) = (data[0].n(), data[0].beta());
    let mc = McConfig {
        samples: a.mc_samples,
        seed: if uses_mc(method, n) { need_seed(seed, "a Monte Carlo fit")? } else { 0 },
    };
    let penalty = match (a.penalty_lambda, a.penalty_sigma0) {
        (Some(lambda), Some(sigma0)) => Some(Penalty { lambda, sigma0 }),
        _ => None,
    };
    let r = fit_gaussian(&data, method, mc, penalty)?;
    let out = FitJson {
        beta,
        n,
        m: data.len(),
        sigma_hat: r.sigma_hat,
        mean_sq_dist: r.mean_sq_dist,
        iterations_mean: r.iterations_mean,
        iterations_sigma: r.iterations_sigma,
        method: r.method.to_string(),
        converged: r.converged,
    };
    sink.write_main(&(serde_json::to_string_pretty(&out).expect("serializable") + "\n"))?;
    match r.note {
        Some(note) if !r.converged => Err(CliError::NotConverged(note)),
        _ => Ok(()),
    }
}

pub fn experiment(a: &ExperimentArgs, seed: Option<u64>, sink: &mut Sink) -> Result<(), CliError> {
    let seed = need_seed(seed, "experiment")?;
    let mut cfg = ExperimentConfig::table(a.table, seed)?;
    if let Some(s) = &a.sigmas {
        cfg.sigmas = parse_grid(s)?;
    }
    if let Some(t) = a.trials {
        cfg.trials = t;
    }
    if let Some(m) = a.m {
        cfg.m = m;
    }
    if let Some(k) = a.mc_samples {
        cfg.mc_samples = k;
    }
    if cfg.trials == 0 || cfg.m == 0 {
        return usage("--trials and --m must be positive");
    }
    let rows = run_experiment(&cfg)?;
    let summary: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                num(r.sigma_true),
                num(r.mean),
                num(r.sd),
                r.converged.to_string(),
                r.trials.len().to_string(),
            ]
        })
        .collect();
    let trials: Vec<Vec<String>> = rows
        .iter()
        .flat_map(|r| &r.trials)
        .map(|t| {
            vec![
                num(t.sigma_true),
                t.trial.to_string(),
                t.seed.to_string(),
                t.sigma_hat.map(num).unwrap_or_default(),
                num(t.mean_sq_dist),
                t.iterations_mean.to_string(),
            ]
        })
        .collect();
    let h1 = ["sigma_true", "mean", "sd", "converged", "trials"];
    let h2 = ["sigma_true", "trial", "seed", "sigma_hat", "mean_sq_dist", "iterations_mean"];
    sink.write_main(&csv(EXPERIMENT_SCHEMA, &h1, &summary))?;
    sink.write_companion("trials.csv", &csv(TRIALS_SCHEMA, &h2, &trials))
}

pub fn spectrum(a: &SpectrumArgs, seed: Option<u64>, sink: &mut Sink) -> Result<(), CliError> {
    if !(a.t > 0.0 && a.t.is_finite()) || a.points < 2 {
        return usage("--t must be positive and --points at least 2");
    }
    let sp = spec(a.n, a.beta, (a.t / a.n as f64).sqrt())?;
    let sd = density_params(0.5 * a.beta as f64 * a.t)?;
    let rows: Vec<Vec<String>> = (0..a.points)
        .map(|k| {
            let y = sd.a + (sd.b - sd.a) * k as f64 / (a.points - 1) as f64;
            vec![num(y), num(density_eval(y, &sd))]
        })
        .collect();
    sink.write_main(&csv(SPECTRUM_SCHEMA, &["y", "density_asymptotic"], &rows))?;
    if a.samples == 0 {
        return Ok(());
    }
    let seed = need_seed(seed, "the empirical spectrum")?;
    let model = GaussianModel::new(SpdMatrix::identity(a.n, a.beta)?, sp.sigma)?;
    let s = sample_gaussian_spd(&model, a.samples, &chain_config(&sp, seed, &a.chain))?;
    let eigs: Vec<Vec<f64>> = s.points.iter().map(|p| p.eigenvalues()).collect();
    let cmp = compare_empirical(&eigs, &sp)?;
    eprintln!("sup CDF distance: {:.6}", cmp.sup_distance);
    let rows: Vec<Vec<String>> = cmp.points.iter().map(|&(y, e, f)| vec![num(y), num(e), num(f)]).collect();
    sink.write_companion(
        "cdf.csv",
        &csv(SPECTRUM_CDF_SCHEMA, &["y", "empirical_cdf", "asymptotic_cdf"], &rows),
    )
}

pub fn siegel_dist(a: &SiegelDistArgs, sink: &mut Sink) -> Result<(), CliError> {
    let xs = read_siegel(&a.a)?;
    let ys = read_siegel(&a.b)?;
    if ys.len() != 1 && ys.len() != xs.len() {
        return usage(format!(
            "--b must hold one point or as many as --a ({} vs {})",
            ys.len(),
            xs.len()
        ));
    }
    let rows = xs
        .iter()
        .enumerate()
        .map(|(i, x)| {
            let y = &ys[if ys.len() == 1 { 0 } else { i }];
            Ok(vec![i.to_string(), num(siegel_distance(x, y)?)])
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    sink.write_main(&csv(SIEGEL_DIST_SCHEMA, &["index", "distance"], &rows))
}

pub fn siegel_logz(a: &SiegelLogzArgs, seed: Option<u64>, sink: &mut Sink) -> Result<(), CliError> {
    let seed = need_seed(seed, "siegel-logz")?;
    if a.beta > 2 {
        return usage("Siegel domains need --beta 1 or 2");
    }
    let mut rows = Vec::new();
    for s in parse_grid(&a.sigma)? {
        let sp = spec(a.n, a.beta, s)?;
        let mut row = |method: &str, v: f64, se: f64| {
            rows.push(vec![
                a.beta.to_string(),
                a.n.to_string(),
                num(s),
                method.to_string(),
                num(v),
                num(se),
            ])
        };
        if a.n == 1 {
            row("closed-form", log_z_acosh_single(s)?, 0.0);
        }
        let r = log_z_acosh_mc(&sp, a.mc_samples, seed)?;
        row("mc", r.log_z, r.stderr);
    }
    let header = ["beta", "n", "sigma", "method", "log_z", "stderr"];
    sink.write_main(&csv(SIEGEL_LOGZ_SCHEMA, &header, &rows))
}

pub fn siegel_sample(a: &SiegelSampleArgs, seed: Option<u64>, sink: &mut Sink) -> Result<(), CliError> {
    let seed = need_seed(seed, "siegel-sample")?;
    if a.beta > 2 {
        return usage("Siegel domains need --beta 1 or 2");
    }
    let sp = spec(a.n, a.beta, a.sigma)?;
    let center = match &a.center {
        Some(p) => {
            let c = read_siegel(p)?.swap_remove(0);
            if c.n() != a.n || c.beta() != a.beta {
                return usage("the center file does not match --n/--beta");
            }
            c
        }
        None => SiegelPoint::zero(a.n, a.beta)?,
    };
    let model = SiegelGaussianModel::new(center, a.sigma)?;
    let s = sample_siegel_gaussian(&model, a.count, &chain_config(&sp, seed, &a.chain))?;
    sink.write_main(&jsonl(s.points.iter().map(|p| (a.beta, p.as_mat()))))
}
