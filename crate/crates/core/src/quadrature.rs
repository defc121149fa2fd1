//! Adaptive Gauss–Kronrod (7/15) quadrature.

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];

const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];

const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

/// One G7/K15 panel: (Kronrod estimate, |Kronrod − Gauss|).
fn panel(f: &mut impl FnMut(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = fc * WGK[7];
    let mut g = fc * WG[3];
    for j in 0..7 {
        let x = h * XGK[j];
        let s = f(c - x) + f(c + x);
        k += WGK[j] * s;
        if j % 2 == 1 {
            g += WG[j / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

/// ∫ₐᵇ f with a global error target `max(abs_tol, rel_tol·|I|)`.
///
/// Panels are bisected worst-first; integrable endpoint singularities (log,
/// inverse square root) are handled because no node sits on an endpoint.
pub fn integrate(
    mut f: impl FnMut(f64) -> f64,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    let mut panels = vec![{
        let (v, e) = panel(&mut f, a, b);
        (a, b, v, e)
    }];
    for _ in 0..20_000 {
        let total: f64 = panels.iter().map(|p| p.2).sum();
        let err: f64 = panels.iter().map(|p| p.3).sum();
        if !total.is_finite() {
            return Err(Error::Numerical("integrand is not finite".into()));
        }
        if err <= abs_tol.max(rel_tol * total.abs()) {
            return Ok(total);
        }
        let worst = panels
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .map(|(i, _)| i)
            .unwrap();
        let (lo, hi, _, _) = panels.swap_remove(worst);
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            return Ok(total);
        }
        let (v1, e1) = panel(&mut f, lo, mid);
        let (v2, e2) = panel(&mut f, mid, hi);
        panels.push((lo, mid, v1, e1));
        panels.push((mid, hi, v2, e2));
    }
    let err: f64 = panels.iter().map(|p| p.3).sum();
    Err(Error::NoConvergence {
        iterations: 20_000,
        residual: err,
    })
}

/// Iterated 2-D integral ∫ₐᵇ ∫_{c(x)}^{d(x)} f(x, y) dy dx.
pub fn integrate_2d(
    f: impl Fn(f64, f64) -> f64,
    a: f64,
    b: f64,
    c: impl Fn(f64) -> f64,
    d: impl Fn(f64) -> f64,
    tol: f64,
) -> Result<f64> {
    let mut inner_err = None;
    let v = integrate(
        |x| match integrate(|y| f(x, y), c(x), d(x), tol * 1e-2, tol * 1e-2) {
            Ok(v) => v,
            Err(e) => {
                inner_err.get_or_insert(e);
                0.0
            }
        },
        a,
        b,
        tol,
        tol,
    )?;
    match inner_err {
        Some(e) => Err(e),
        None => Ok(v),
    }
}
