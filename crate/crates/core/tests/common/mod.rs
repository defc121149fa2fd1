#![allow(dead_code)]

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use spdgauss::matrix::{CMat, DenseMatrix};
use spdgauss::rng::{stream_rng, Rng};
use spdgauss::siegel::SiegelPoint;
use spdgauss::spd::SpdMatrix;

pub fn normal(rng: &mut Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// Ginibre matrix: real Gaussian entries for β = 1, complex for β = 2.
pub fn ginibre(n: usize, beta: u32, rng: &mut Rng) -> CMat {
    DMatrix::from_fn(n, n, |_, _| {
        let im = if beta == 2 { normal(rng) } else { 0.0 };
        Complex64::new(normal(rng), im)
    })
}

pub fn hermitian(n: usize, beta: u32, rng: &mut Rng) -> CMat {
    let g = ginibre(n, beta, rng);
    (&g + g.adjoint()).map(|z| z * 0.5)
}

pub fn dense(beta: u32, m: CMat) -> DenseMatrix {
    if beta == 1 {
        DenseMatrix::real(&m.map(|z| z.re)).unwrap()
    } else {
        DenseMatrix::complex(m).unwrap()
    }
}

/// `exp(H)` for a Hermitian `H` with entries of size `scale`.
pub fn random_spd(n: usize, beta: u32, scale: f64, rng: &mut Rng) -> SpdMatrix {
    let h = hermitian(n, beta, rng).map(|z| z * scale);
    let eig = spdgauss::matrix::eigh(&dense(beta, h)).unwrap();
    SpdMatrix::from_spectral(beta, eig.basis, eig.values).unwrap()
}

/// A point of the Siegel domain with operator norm at most `radius`.
pub fn random_siegel(n: usize, beta: u32, radius: f64, rng: &mut Rng) -> SiegelPoint {
    let g = ginibre(n, 2, rng);
    let m = if beta == 1 { (&g + g.transpose()).map(|z| z * 0.5) } else { g };
    let norm = m.clone().svd(false, false).singular_values[0];
    let target = radius * rng.random::<f64>().max(0.05);
    SiegelPoint::new(beta, &DenseMatrix::complex(m.map(|z| z * (target / norm))).unwrap()).unwrap()
}

pub fn rng(seed: u64) -> Rng {
    stream_rng(seed, 0)
}

pub fn max_abs(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Kolmogorov–Smirnov distance between a sample and a CDF.
pub fn ks_distance(mut xs: Vec<f64>, cdf: impl Fn(f64) -> f64) -> f64 {
    xs.sort_by(f64::total_cmp);
    let m = xs.len() as f64;
    let mut sup: f64 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let f = cdf(x);
        sup = sup.max((f - i as f64 / m).abs()).max((f - (i + 1) as f64 / m).abs());
    }
    sup
}

/// Two-sample Kolmogorov–Smirnov distance.
pub fn ks_two_sample(mut a: Vec<f64>, mut b: Vec<f64>) -> f64 {
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut sup) = (0, 0, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        sup = sup.max((i as f64 / na - j as f64 / nb).abs());
    }
    sup
}

/// CDF on a grid of points from a density by cumulative quadrature.
pub fn tabulated_cdf(density: impl Fn(f64) -> f64, lo: f64, hi: f64, cells: usize) -> impl Fn(f64) -> f64 {
    let h = (hi - lo) / cells as f64;
    let mut acc = vec![0.0];
    for k in 0..cells {
        let a = lo + k as f64 * h;
        let v = spdgauss::quadrature::integrate(&density, a, a + h, 1e-14, 1e-11).unwrap();
        acc.push(acc[k] + v);
    }
    let total = acc[cells];
    move |x: f64| {
        if x <= lo {
            return 0.0;
        }
        if x >= hi {
            return 1.0;
        }
        let k = (((x - lo) / h) as usize).min(cells - 1);
        let a = lo + k as f64 * h;
        let part = spdgauss::quadrature::integrate(&density, a, x, 1e-14, 1e-11).unwrap();
        (acc[k] + part) / total
    }
}
