use spdgauss::partition::{
    log_z, log_z_exact_beta2, log_z_monte_carlo, log_z_pfaffian_beta1, log_z_trilog, phi_sigma,
    phi_sigma_monte_carlo, EnsembleSpec, McConfig, PartitionMethod,
};
use spdgauss::quadrature::integrate_2d;
use spdgauss::specfun::erf;

fn spec(n: usize, beta: u32, sigma: f64) -> EnsembleSpec {
    EnsembleSpec::new(n, beta, sigma).unwrap()
}

/// `z` at N = 2 by 2-D quadrature over `r₁ < r₂` (the 1/N! cancels the
/// two orderings).
fn quadrature_z2(beta: u32, sigma: f64) -> f64 {
    let s2 = sigma * sigma;
    let l = 10.0 * sigma + 2.0 * beta as f64 * s2;
    integrate_2d(
        |r1, r2| {
            (2.0 * (0.5 * (r2 - r1)).sinh()).powi(beta as i32) * (-(r1 * r1 + r2 * r2) / (2.0 * s2)).exp()
        },
        -l,
        l,
        |r1| r1,
        |_| l,
        1e-12,
    )
    .unwrap()
    .ln()
}

/// Pfaffian formula evaluated straight from its entries
/// `M_ij = exp((i² + j²)σ²/2)·erf((j − i)σ/2)`, with the 2×2 and 4×4
/// Pfaffians written out.
fn direct_pfaffian_log_z(n: usize, sigma: f64) -> f64 {
    let s2 = sigma * sigma;
    let m = |i: usize, j: usize| {
        (((i * i + j * j) as f64) * s2 / 2.0).exp() * erf((j as f64 - i as f64) * sigma / 2.0)
    };
    let pf = match n {
        2 => m(1, 2),
        4 => m(1, 2) * m(3, 4) - m(1, 3) * m(2, 4) + m(1, 4) * m(2, 3),
        _ => unreachable!(),
    };
    let nf = n as f64;
    0.5 * nf * (2.0 * std::f64::consts::PI * s2).ln() - nf * (nf + 1.0).powi(2) * s2 / 8.0 + pf.ln()
}

#[test]
fn n2_closed_forms_match_quadrature() {
    for sigma in [0.3, 0.5, 1.0, 2.0] {
        let q = quadrature_z2(2, sigma);
        let e = log_z_exact_beta2(&spec(2, 2, sigma)).unwrap().log_z;
        assert!((q - e).abs() < 1e-9, "beta 2, sigma {sigma}: {q} vs {e}");
        let q = quadrature_z2(1, sigma);
        let p = log_z_pfaffian_beta1(&spec(2, 1, sigma)).unwrap().log_z;
        assert!((q - p).abs() < 1e-9, "beta 1, sigma {sigma}: {q} vs {p}");
    }
}

#[test]
fn stabilized_pfaffian_matches_direct_entries() {
    for n in [2, 4] {
        for sigma in [0.3, 0.5, 1.0, 1.5] {
            let d = direct_pfaffian_log_z(n, sigma);
            let p = log_z_pfaffian_beta1(&spec(n, 1, sigma)).unwrap().log_z;
            assert!((d - p).abs() < 1e-10, "n {n}, sigma {sigma}: {d} vs {p}");
        }
    }
}

#[test]
fn monte_carlo_agrees_with_closed_forms() {
    for sigma in [0.3, 0.5, 1.0] {
        for n in [2, 3, 4] {
            let s = spec(n, 2, sigma);
            let e = log_z_exact_beta2(&s).unwrap().log_z;
            let mc = log_z_monte_carlo(&s, 200_000, 17).unwrap();
            assert!((mc.log_z - e).abs() <= 3.0 * mc.stderr, "beta 2 n {n} sigma {sigma}");
        }
        for n in [2, 4] {
            let s = spec(n, 1, sigma);
            let p = log_z_pfaffian_beta1(&s).unwrap().log_z;
            let mc = log_z_monte_carlo(&s, 200_000, 19).unwrap();
            assert!((mc.log_z - p).abs() <= 3.0 * mc.stderr, "beta 1 n {n} sigma {sigma}");
        }
    }
}

#[test]
fn phi_is_positive_on_a_sigma_grid() {
    for k in 1..=20 {
        let sigma = 0.5 * k as f64;
        for n in [2, 5, 10] {
            assert!(phi_sigma(&spec(n, 2, sigma), PartitionMethod::ExactBeta2).unwrap() > 0.0);
        }
        for n in [2, 4, 10] {
            assert!(phi_sigma(&spec(n, 1, sigma), PartitionMethod::PfaffianBeta1).unwrap() > 0.0);
        }
    }
}

#[test]
fn exact_phi_is_the_mean_square_radius() {
    // φ = σ³ d/dσ log z equals E|r|² under the radial density; the Monte
    // Carlo route estimates the latter directly. Its weights get
    // heavy-tailed at larger σ, hence the moderate values.
    for sigma in [0.3, 0.5] {
        let s = spec(3, 2, sigma);
        let exact = phi_sigma(&s, PartitionMethod::ExactBeta2).unwrap();
        let (mc, se) = phi_sigma_monte_carlo(&s, 1_000_000, 5).unwrap();
        assert!((mc - exact).abs() < 4.0 * se, "sigma {sigma}: {mc} ± {se} vs {exact}");
    }
}

#[test]
fn figure_one_gap() {
    let s = spec(10, 2, 1.0);
    let e = log_z_exact_beta2(&s).unwrap().log_z / 100.0;
    let t = log_z_trilog(&s, false).unwrap().log_z / 100.0;
    assert!((e - 1.6838).abs() < 5e-5);
    assert!((t - 1.6787).abs() < 5e-5);
    assert!(((e - t) - 0.0051).abs() <= 0.001);
    // trilog − exact changes sign near σ = 3.5 and then keeps growing.
    let gap = |sigma: f64| {
        let s = spec(10, 2, sigma);
        (log_z_trilog(&s, false).unwrap().log_z - log_z_exact_beta2(&s).unwrap().log_z) / 100.0
    };
    let mut prev = gap(2.0);
    for k in 3..=10 {
        let g = gap(k as f64);
        assert!(g > prev, "gap shrank at sigma {k}");
        prev = g;
    }
    assert!((gap(10.0) - 1.3445155).abs() < 1e-6);
}

#[test]
fn dispatcher_routes_every_method() {
    let mc = McConfig { samples: 20_000, seed: 1 };
    let s2 = spec(4, 2, 0.5);
    let s1 = spec(4, 1, 0.5);
    assert_eq!(log_z(&s2, PartitionMethod::ExactBeta2, mc).unwrap(), log_z_exact_beta2(&s2).unwrap());
    assert_eq!(log_z(&s1, PartitionMethod::PfaffianBeta1, mc).unwrap(), log_z_pfaffian_beta1(&s1).unwrap());
    assert_eq!(log_z(&s2, PartitionMethod::Trilog, mc).unwrap(), log_z_trilog(&s2, false).unwrap());
    assert_eq!(log_z(&s2, PartitionMethod::TrilogCorrected, mc).unwrap(), log_z_trilog(&s2, true).unwrap());
    assert_eq!(log_z(&s2, PartitionMethod::MonteCarlo, mc).unwrap(), log_z_monte_carlo(&s2, 20_000, 1).unwrap());
    assert!(log_z(&s1, PartitionMethod::ExactBeta2, mc).is_err());
}

#[test]
fn monte_carlo_is_bit_reproducible() {
    let s = spec(5, 1, 0.7);
    let a = log_z_monte_carlo(&s, 150_000, 42).unwrap();
    let b = log_z_monte_carlo(&s, 150_000, 42).unwrap();
    assert_eq!(a.log_z.to_bits(), b.log_z.to_bits());
    assert_eq!(a.stderr.to_bits(), b.stderr.to_bits());
    let c = log_z_monte_carlo(&s, 150_000, 43).unwrap();
    assert_ne!(a.log_z.to_bits(), c.log_z.to_bits());
}
