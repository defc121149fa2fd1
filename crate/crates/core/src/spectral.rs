//! Limiting eigenvalue density of a Riemannian Gaussian sample centered at
//! the identity, in the regime N → ∞, σ → 0 with t = Nσ² fixed:
//!
//! ```text
//! n(y|ξ) = arctan(√(4e^ξ y − (y+1)²) / (y+1)) / (πξy),   a(ξ) ≤ y ≤ b(ξ),
//! ```
//!
//! evaluated at ξ = βt/2.

use crate::error::{domain, Result};
use crate::partition::EnsembleSpec;
use crate::quadrature::integrate;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralDensity {
    pub xi: f64,
    pub c: f64,
    pub a: f64,
    pub b: f64,
}

/// Support of the density: `a = c(1+√(1−c))⁻²`, `b = c(1−√(1−c))⁻² = 1/a`,
/// `c = e^{−ξ}`. `b` is taken as `1/a`, which avoids the cancellation in
/// `1 − √(1−c)` at large ξ.
pub fn density_params(xi: f64) -> Result<SpectralDensity> {
    if !(xi > 0.0 && xi.is_finite()) {
        return domain(format!("xi must be positive and finite, got {xi}"));
    }
    let c = (-xi).exp();
    let root = (-(-xi).exp_m1()).sqrt();
    let a = c / ((1.0 + root) * (1.0 + root));
    Ok(SpectralDensity {
        xi,
        c,
        a,
        b: 1.0 / a,
    })
}

/// `4e^ξ y − (y+1)²`, the quantity under the square root.
pub fn radicand(y: f64, sd: &SpectralDensity) -> f64 {
    4.0 * sd.xi.exp() * y - (y + 1.0) * (y + 1.0)
}

/// Density value; zero outside `(a, b)`. A radicand made slightly negative
/// by rounding inside the support is clamped to zero.
pub fn density_eval(y: f64, sd: &SpectralDensity) -> f64 {
    if !(y > sd.a && y < sd.b) {
        return 0.0;
    }
    let rad = radicand(y, sd).max(0.0);
    (rad.sqrt() / (y + 1.0)).atan() / (std::f64::consts::PI * sd.xi * y)
}

/// `y(θ) = a + (b − a) sin²θ`; absorbs the square-root zeros at both ends.
fn y_of_theta(theta: f64, sd: &SpectralDensity) -> f64 {
    let s = theta.sin();
    sd.a + (sd.b - sd.a) * s * s
}

fn theta_of_y(y: f64, sd: &SpectralDensity) -> f64 {
    let u = ((y - sd.a) / (sd.b - sd.a)).clamp(0.0, 1.0);
    u.sqrt().asin()
}

fn integrand(theta: f64, sd: &SpectralDensity) -> f64 {
    density_eval(y_of_theta(theta, sd), sd) * (sd.b - sd.a) * (2.0 * theta).sin()
}

fn mass_between(t0: f64, t1: f64, sd: &SpectralDensity) -> Result<f64> {
    integrate(|t| integrand(t, sd), t0, t1, 1e-13, 1e-12)
}

/// Total mass of the density (1 up to quadrature error).
pub fn normalization(sd: &SpectralDensity) -> Result<f64> {
    mass_between(0.0, std::f64::consts::FRAC_PI_2, sd)
}

/// Cumulative distribution function of the limiting density.
pub fn cdf(y: f64, sd: &SpectralDensity) -> Result<f64> {
    if y <= sd.a {
        return Ok(0.0);
    }
    if y >= sd.b {
        return Ok(1.0);
    }
    mass_between(0.0, theta_of_y(y, sd), sd)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CdfComparison {
    pub xi: f64,
    /// `(y, empirical CDF, limiting CDF)` at every pooled eigenvalue, sorted.
    pub points: Vec<(f64, f64, f64)>,
    /// Kolmogorov–Smirnov distance between the two CDFs.
    pub sup_distance: f64,
}

/// Pools eigenvalues from samples drawn at `Ȳ = I` and compares their
/// empirical CDF with the limiting CDF at ξ = βt/2.
pub fn compare_empirical(eigenvalues: &[Vec<f64>], spec: &EnsembleSpec) -> Result<CdfComparison> {
    let mut ys: Vec<f64> = eigenvalues.iter().flatten().copied().collect();
    if ys.is_empty() {
        return domain("no eigenvalues to compare");
    }
    if ys.iter().any(|y| !(*y > 0.0 && y.is_finite())) {
        return domain("eigenvalues must be positive and finite");
    }
    ys.sort_by(f64::total_cmp);
    let xi = 0.5 * spec.beta as f64 * spec.t();
    let sd = density_params(xi)?;
    let m = ys.len() as f64;
    let mut points = Vec::with_capacity(ys.len());
    let mut sup: f64 = 0.0;
    let mut acc = 0.0;
    let mut theta_prev = 0.0;
    for (i, &y) in ys.iter().enumerate() {
        let theta = theta_of_y(y, &sd);
        if theta > theta_prev {
            acc += mass_between(theta_prev, theta, &sd)?;
            theta_prev = theta;
        }
        let f = acc.clamp(0.0, 1.0);
        let lo = i as f64 / m;
        let hi = (i + 1) as f64 / m;
        sup = sup.max((f - lo).abs()).max((f - hi).abs());
        points.push((y, hi, f));
    }
    Ok(CdfComparison {
        xi,
        points,
        sup_distance: sup,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn params_examples() {
        let sd = density_params(2f64.ln()).unwrap();
        assert!((sd.a - 0.171573).abs() < 1e-6);
        assert!((sd.b - 5.828427).abs() < 1e-6);
        for xi in [0.1, 1.0, 5.0] {
            let sd = density_params(xi).unwrap();
            assert!((sd.a * sd.b - 1.0).abs() < 1e-12);
            assert!(radicand(sd.a, &sd).abs() < 1e-10 * sd.b.max(1.0));
            assert!(radicand(sd.b, &sd).abs() < 1e-10 * sd.b * sd.b.max(1.0));
        }
        let tiny = density_params(1e-10).unwrap();
        assert!((tiny.a - 1.0).abs() < 1e-4 && (tiny.b - 1.0).abs() < 1e-4);
        assert!(density_params(0.0).is_err());
    }

    #[test]
    fn support_grows_with_xi() {
        let mut prev = density_params(0.05).unwrap();
        for k in 2..40 {
            let sd = density_params(0.05 * k as f64).unwrap();
            assert!(sd.a < prev.a && sd.b > prev.b);
            prev = sd;
        }
    }

    #[test]
    fn density_vanishes_outside_and_at_endpoints() {
        let sd = density_params(1.0).unwrap();
        assert_eq!(density_eval(sd.a, &sd), 0.0);
        assert_eq!(density_eval(sd.b, &sd), 0.0);
        assert_eq!(density_eval(0.5 * sd.a, &sd), 0.0);
        assert_eq!(density_eval(2.0 * sd.b, &sd), 0.0);
        assert!(density_eval(1.0, &sd) > 0.0);
    }

    #[test]
    fn density_is_normalized() {
        for xi in [0.5, 1.0, 2.0, 5.0] {
            let sd = density_params(xi).unwrap();
            assert!((normalization(&sd).unwrap() - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn inversion_pushforward_is_normalized() {
        // y → 1/y maps [a, b] onto itself since ab = 1.
        let sd = density_params(1.5).unwrap();
        let pushed = integrate(
            |y| density_eval(1.0 / y, &sd) / (y * y),
            sd.a,
            sd.b,
            1e-12,
            1e-12,
        )
        .unwrap();
        assert!((pushed - 1.0).abs() < 1e-6);
    }

    #[test]
    fn cdf_endpoints() {
        let sd = density_params(1.0).unwrap();
        assert_eq!(cdf(0.0, &sd).unwrap(), 0.0);
        assert_eq!(cdf(sd.b * 2.0, &sd).unwrap(), 1.0);
        // Symmetry y → 1/y puts half the mass below y = 1.
        assert!((cdf(1.0, &sd).unwrap() - 0.5).abs() < 1e-8);
    }
}
