//! Modified Bessel functions of the second kind, orders 0 and 1.
//!
//! K0 and K1 are evaluated together: a Temme-style series below x = 2 and a
//! Steed continued fraction above (Thompson & Barnett, J. Comput. Phys. 64,
//! 490 (1986)), both specialized to integer order zero. Relative accuracy is
//! close to machine precision across the supported range.

use std::f64::consts::PI;

use crate::error::{Error, Result};

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
const MAX_ITER: usize = 500;

/// K0(x) for x > 0.
pub fn bessel_k0(x: f64) -> Result<f64> {
    Ok(bessel_k0_k1(x)?.0)
}

/// K1(x) for x > 0.
pub fn bessel_k1(x: f64) -> Result<f64> {
    Ok(bessel_k0_k1(x)?.1)
}

/// Evaluates (K0, K1) simultaneously.
pub fn bessel_k0_k1(x: f64) -> Result<(f64, f64)> {
    if !(x > 0.0) {
        return Err(Error::domain(format!(
            "modified Bessel K is defined for x > 0, got {x}"
        )));
    }
    if x <= 2.0 {
        Ok(temme_k0_k1(x))
    } else {
        Ok(cf2_k0_k1(x))
    }
}

/// Series evaluation for x ≤ 2 (Temme's method at order zero).
fn temme_k0_k1(x: f64) -> (f64, f64) {
    let a = (0.5 * x).ln();
    let mut p = 0.5;
    let mut q = 0.5;
    let mut f = -(EULER_GAMMA + a);
    let mut h = p;
    let mut coef = 1.0;
    let mut sum = f;
    let mut sum1 = h;
    let x2_over_4 = 0.25 * x * x;

    for k in 1..MAX_ITER {
        let kf = k as f64;
        f = (kf * f + p + q) / (kf * kf);
        p /= kf;
        q /= kf;
        h = p - kf * f;
        coef *= x2_over_4 / kf;
        sum += coef * f;
        sum1 += coef * h;
        if (coef * f).abs() < sum.abs() * f64::EPSILON {
            break;
        }
    }
    (sum, 2.0 * sum1 / x)
}

/// Continued-fraction evaluation for x > 2 (Steed's algorithm).
fn cf2_k0_k1(x: f64) -> (f64, f64) {
    let mut a = -0.25;
    let mut b = 2.0 * (x + 1.0);
    let mut d = 1.0 / b;
    let mut delta = d;
    let mut f = d;
    let mut prev = 0.0;
    let mut cur = 1.0;
    let mut q = 0.25;
    let mut c = 0.25;
    let mut s = 1.0 + q * delta;

    for k in 2..MAX_ITER {
        let kf = k as f64;
        a -= 2.0 * (kf - 1.0);
        b += 2.0;
        d = 1.0 / (a * d + b);
        delta *= b * d - 1.0;
        f += delta;

        let t = (prev - (b - 2.0) * cur) / a;
        prev = cur;
        cur = t;
        c *= -a / kf;
        q += c * t;
        s += q * delta;

        if (q * delta).abs() < s.abs() * f64::EPSILON * 0.5 {
            break;
        }
    }

    let k0 = (PI / (2.0 * x)).sqrt() * (-x).exp() / s;
    let k1 = k0 * (0.5 + x - 0.25 * f) / x;
    (k0, k1)
}

/// (Δ/s)·K1(Δ·s) with s = √(Q²+κ²): the 2D Fourier kernel of the
/// Δ-regularized K0, reducing to 1/s² as Δ → 0.
pub fn regularized_coulomb_kernel(q2: f64, kappa: f64, delta: f64) -> f64 {
    let s2 = q2 + kappa * kappa;
    if delta <= 0.0 {
        return 1.0 / s2;
    }
    let s = s2.sqrt();
    let arg = delta * s;
    if arg < 1e-8 {
        // K1(z) → 1/z; avoids spurious cancellation for tiny arguments
        1.0 / s2
    } else {
        delta / s * bessel_k1(arg).expect("positive argument")
    }
}
