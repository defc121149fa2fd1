//! Dilogarithm, trilogarithm, error function, and the planar free-energy
//! function `Φ(ξ) = ξ/6 − (Li₃(e^{−ξ}) − ζ(3))/ξ²` with its derivative.

use crate::dd::{Dd, TWO_OVER_SQRT_PI};
use crate::error::{domain, Error, Result};

/// ζ(2) = π²/6.
pub const ZETA2: f64 = 1.6449340668482264;
/// ζ(3), Apéry's constant.
pub const ZETA3: f64 = 1.2020569031595942;

/// ζ(−n) for n = 0, 1, …, 25.
const ZETA_NEG: [f64; 26] = [
    -0.5,
    -1.0 / 12.0,
    0.0,
    1.0 / 120.0,
    0.0,
    -1.0 / 252.0,
    0.0,
    1.0 / 240.0,
    0.0,
    -1.0 / 132.0,
    0.0,
    691.0 / 32760.0,
    0.0,
    -1.0 / 12.0,
    0.0,
    3617.0 / 8160.0,
    0.0,
    -43867.0 / 14364.0,
    0.0,
    174611.0 / 6600.0,
    0.0,
    -77683.0 / 276.0,
    0.0,
    236364091.0 / 65520.0,
    0.0,
    -657931.0 / 12.0,
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PolylogOrder {
    Two,
    Three,
}

impl TryFrom<u32> for PolylogOrder {
    type Error = Error;
    fn try_from(s: u32) -> Result<Self> {
        match s {
            2 => Ok(PolylogOrder::Two),
            3 => Ok(PolylogOrder::Three),
            _ => domain(format!("polylog order {s} is not supported (only 2 and 3)")),
        }
    }
}

/// Power series Σ x^k / k^s for 0 ≤ x ≤ 1/2.
fn polylog_series(s: i32, x: f64) -> f64 {
    let mut sum = 0.0;
    let mut pow = x;
    for k in 1..200 {
        let term = pow / (k as f64).powi(s);
        sum += term;
        if term < 1e-18 * sum {
            break;
        }
        pow *= x;
    }
    sum
}

/// Σ_{k ≥ k0} ζ(s − k) μ^k / k!, the analytic tail of the expansion of
/// Li_s(e^μ) around μ = 0.
fn log_series_tail(s: usize, k0: usize, mu: f64) -> f64 {
    let mut fact = 1.0;
    let mut pow = 1.0;
    for k in 1..k0 {
        fact *= k as f64;
        pow *= mu;
    }
    let mut sum = 0.0;
    for k in k0..(s + ZETA_NEG.len()) {
        fact *= k as f64;
        pow *= mu;
        sum += ZETA_NEG[k - s] * pow / fact;
    }
    sum
}

/// Li₃(e^{−ξ}) − ζ(3), accurate when ξ is small.
fn li3_exp_neg_minus_zeta3(xi: f64) -> f64 {
    if xi >= std::f64::consts::LN_2 {
        return polylog_series(3, (-xi).exp()) - ZETA3;
    }
    let mu = -xi;
    ZETA2 * mu + 0.5 * mu * mu * (1.5 - xi.ln()) + log_series_tail(3, 3, mu)
}

/// Li₂(e^{−ξ}) for ξ ≥ 0.
fn li2_exp_neg(xi: f64) -> f64 {
    if xi == 0.0 {
        return ZETA2;
    }
    if xi >= std::f64::consts::LN_2 {
        return polylog_series(2, (-xi).exp());
    }
    let mu = -xi;
    ZETA2 + mu * (1.0 - xi.ln()) + log_series_tail(2, 2, mu)
}

/// Li₂(x) or Li₃(x) for x in [0, 1].
pub fn polylog(s: PolylogOrder, x: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) {
        return domain(format!("polylog argument {x} is outside [0, 1]"));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    if x == 1.0 {
        return Ok(match s {
            PolylogOrder::Two => ZETA2,
            PolylogOrder::Three => ZETA3,
        });
    }
    if x <= 0.5 {
        return Ok(match s {
            PolylogOrder::Two => polylog_series(2, x),
            PolylogOrder::Three => polylog_series(3, x),
        });
    }
    let xi = -x.ln();
    Ok(match s {
        PolylogOrder::Two => li2_exp_neg(xi),
        PolylogOrder::Three => ZETA3 + li3_exp_neg_minus_zeta3(xi),
    })
}

pub fn erf(x: f64) -> f64 {
    libm::erf(x)
}

/// erf to double-double accuracy.
///
/// Uses the all-positive series `erf(x) = (2/√π) e^{−x²} Σ 2ⁿ x^{2n+1} / (2n+1)!!`
/// for |x| ≤ 7 and `1 − erfc(|x|)` beyond, where erfc < 5e-23.
pub fn erf_dd(x: Dd) -> Dd {
    if x.hi < 0.0 {
        return -erf_dd(-x);
    }
    if x.is_zero() {
        return Dd::ZERO;
    }
    if x.hi > 7.0 {
        return Dd::ONE - Dd::from_f64(libm::erfc(x.hi));
    }
    let x2 = x.sqr();
    let two_x2 = x2.mul_f64(2.0);
    let mut term = x;
    let mut sum = x;
    for n in 1..400 {
        term = term * two_x2 / Dd::from_f64((2 * n + 1) as f64);
        sum = sum + term;
        if term.hi < 1e-34 * sum.hi {
            break;
        }
    }
    TWO_OVER_SQRT_PI * (-x2).exp() * sum
}

fn check_xi(xi: f64) -> Result<()> {
    if xi > 0.0 && xi.is_finite() {
        Ok(())
    } else {
        domain(format!("xi must be positive and finite, got {xi}"))
    }
}

const SMALL_XI: f64 = 1e-4;

/// Φ(ξ) = ξ/6 − (Li₃(e^{−ξ}) − ζ(3))/ξ².
pub fn phi_trilog(xi: f64) -> Result<f64> {
    check_xi(xi)?;
    if xi < SMALL_XI {
        return Ok(ZETA2 / xi + 0.5 * xi.ln() - 0.75 + xi / 12.0 + xi * xi / 288.0
            - xi.powi(4) / 86400.0);
    }
    Ok(xi / 6.0 - li3_exp_neg_minus_zeta3(xi) / (xi * xi))
}

/// dΦ/dξ = 1/6 + 2(Li₃(e^{−ξ}) − ζ(3))/ξ³ + Li₂(e^{−ξ})/ξ².
pub fn phi_trilog_deriv(xi: f64) -> Result<f64> {
    check_xi(xi)?;
    if xi < SMALL_XI {
        return Ok(-ZETA2 / (xi * xi) + 0.5 / xi + 1.0 / 12.0 + xi / 144.0
            - xi.powi(3) / 21600.0);
    }
    Ok(1.0 / 6.0
        + 2.0 * li3_exp_neg_minus_zeta3(xi) / xi.powi(3)
        + li2_exp_neg(xi) / (xi * xi))
}

/// The exact value of the planar Riemann-sum limit, `Φ(ξ) − ζ(2)/ξ`.
pub fn phi_planar_corrected(xi: f64) -> Result<f64> {
    Ok(phi_trilog(xi)? - ZETA2 / xi)
}

pub fn phi_planar_corrected_deriv(xi: f64) -> Result<f64> {
    Ok(phi_trilog_deriv(xi)? + ZETA2 / (xi * xi))
}
