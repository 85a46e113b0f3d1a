//! Independent reference computations used by the checks. None of these
//! touch the assembled matrices.

use crate::error::{Error, Result};
use crate::kernel::{standard_constant, FractionalOrder};
use crate::quadrature::adaptive;

/// `(α, getoor constant, C_{1,α})` evaluated in 30-digit arithmetic.
pub const FROZEN_CONSTANTS: [(f64, f64, f64); 3] = [
    (0.5, 0.886_226_925_452_758_013_65, 0.199_471_140_200_716_338_97),
    (1.0, 1.0, 0.318_309_886_183_790_671_54),
    (1.5, 1.329_340_388_179_137_020_5, 0.299_206_710_301_074_508_45),
];

/// `2 ∫_{|y|≥1} |x−y|^{−1−α} dy` by adaptive quadrature on each half-line,
/// mapped to (0, 1) via `y − 1 = t²/(1−t)²`, which keeps the transformed
/// integrand bounded at both ends for α ≥ 1/2.
pub fn exterior_weight_quadrature(x: f64, alpha: f64) -> Result<f64> {
    if !(x.abs() < 1.0) {
        return Err(Error::Domain(format!("x = {x} not in (-1, 1)")));
    }
    let half = |d: f64| -> Result<f64> {
        // d = distance from x to the nearer endpoint of the half-line
        let f = |t: f64| {
            let s = (t / (1.0 - t)).powi(2);
            (d + s).powf(-1.0 - alpha) * 2.0 * t / (1.0 - t).powi(3)
        };
        adaptive(f, 0.0, 1.0, 1e-12, 0.0, 50_000)
            .ok_or_else(|| Error::Check(format!("exterior quadrature did not converge at x = {x}")))
    };
    Ok(2.0 * (half(1.0 - x)? + half(1.0 + x)?))
}

/// `(−Δ)^{α/2}(1−y²)_+^{α/2}` at `x` by direct quadrature of the symmetric
/// principal-value integral `C ∫_0^∞ (2u(x) − u(x+r) − u(x−r)) r^{−1−α} dr`.
pub fn getoor_image_quadrature(x: f64, alpha: FractionalOrder) -> Result<f64> {
    if !(x.abs() < 1.0) {
        return Err(Error::Domain(format!("x = {x} not in (-1, 1)")));
    }
    let a = alpha.value();
    let beta = a / 2.0;
    let w = |y: f64| 1.0 - y * y;
    let ux = w(x).powf(beta);
    // u(x) − u(x+r) with the difference of w taken exactly: w(x) − w(x+r) = r(2x + r)
    let drop = |r: f64| {
        let wy = w(x + r);
        if wy <= 0.0 {
            return ux;
        }
        -ux * (beta * (-(r * (2.0 * x + r)) / w(x)).ln_1p()).exp_m1()
    };
    let g = |r: f64| (drop(r) + {
        let wy = w(x - r);
        if wy <= 0.0 {
            ux
        } else {
            -ux * (beta * ((r * (2.0 * x - r)) / w(x)).ln_1p()).exp_m1()
        }
    }) * r.powf(-1.0 - a);
    let (r1, r2) = ((1.0 - x.abs()).min(1.0 + x.abs()), 1.0 + x.abs());
    // below eps the second difference is −u''(x) r² to O(r⁴)
    let eps = 1e-4f64;
    let wx = w(x);
    let u2 = -2.0 * beta * wx.powf(beta - 1.0) + 4.0 * beta * (beta - 1.0) * x * x * wx.powf(beta - 2.0);
    let mut total = -u2 * eps.powf(2.0 - a) / (2.0 - a);
    total += adaptive(g, eps, r1, 1e-12, 1e-14, 50_000)
        .ok_or_else(|| Error::Check("getoor quadrature failed near the origin".into()))?;
    total += adaptive(g, r1, r2, 1e-12, 1e-14, 50_000)
        .ok_or_else(|| Error::Check("getoor quadrature failed between the kinks".into()))?;
    // beyond r2 only u(x) survives
    total += 2.0 * ux * r2.powf(-a) / a;
    Ok(standard_constant(alpha) * total)
}

/// Variance after `steps` drift-implicit Euler–Maruyama steps of
/// `dc = −λc dt + s dW`, starting from `var0`.
pub fn implicit_ou_variance(var0: f64, lambda: f64, s2: f64, dt: f64, steps: usize) -> f64 {
    let r = 1.0 / (1.0 + lambda * dt);
    let mut v = var0;
    for _ in 0..steps {
        v = r * r * (v + s2 * dt);
    }
    v
}

/// Eigenvalue asymptotics of the standard-normalized operator on (−1, 1):
/// `(kπ/2 − (2−α)π/8)^α`, k ≥ 1.
pub fn eigenvalue_asymptotic(k: usize, alpha: f64) -> f64 {
    let pi = std::f64::consts::PI;
    (k as f64 * pi / 2.0 - (2.0 - alpha) * pi / 8.0).powf(alpha)
}
