//! Special functions behind the radial profile: unit-ball volumes, the
//! regular radial solution of `-Δw = μw` written as `0F1`, and the
//! exponentially scaled modified Bessel function of the second kind.

use std::f64::consts::PI;

/// `Γ(n/2 + 1)`, exact up to rounding for the half-integer arguments met here.
pub fn gamma_half_plus_one(n: usize) -> f64 {
    // Γ(x + 1) = x Γ(x), down to Γ(1) = 1 or Γ(1/2) = √π
    let mut x = n as f64 / 2.0;
    let mut acc = 1.0;
    while x > 0.0 {
        acc *= x;
        x -= 1.0;
    }
    if n % 2 == 1 {
        acc * PI.sqrt()
    } else {
        acc
    }
}

/// Lebesgue measure of the unit ball in `R^n`, `π^{n/2} / Γ(n/2 + 1)`.
///
/// `n = 0` gives 1, which is the convention needed for the half-space
/// moments in one dimension.
pub fn unit_ball_volume(n: usize) -> f64 {
    PI.powf(n as f64 / 2.0) / gamma_half_plus_one(n)
}

/// Confluent limit function `0F1(; b; z)` summed as a power series.
///
/// Accurate for the moderate arguments met by the radial profile
/// (`|z|` up to a few tens); the series is entire so it always converges.
pub fn hyp0f1(b: f64, z: f64) -> f64 {
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut k = 0.0;
    loop {
        term *= z / ((b + k) * (k + 1.0));
        sum += term;
        k += 1.0;
        if k > z.abs().sqrt() + 2.0 && term.abs() <= 0.25 * f64::EPSILON * sum.abs() {
            return sum;
        }
        if k > 1000.0 {
            return sum;
        }
    }
}

/// `e^x K_ν(x)` for `x > 0`.
///
/// Uses the representation `K_ν(x) = ∫_0^∞ exp(-x cosh t) cosh(νt) dt`. The
/// integrand is analytic in the strip `|Im t| < π/2`, so the trapezoidal
/// rule converges geometrically in the step size.
pub fn bessel_k_scaled(nu: f64, x: f64) -> f64 {
    debug_assert!(x > 0.0);
    let step = 0.05;
    let nu = nu.abs();
    // the integrand peaks where x sinh t = ν; only stop past that point
    let peak = (nu / x).asinh();
    let mut sum = 0.5;
    let mut i = 1usize;
    loop {
        let t = i as f64 * step;
        let term = (-x * (t.cosh() - 1.0) + nu * t).exp() * 0.5 * (1.0 + (-2.0 * nu * t).exp());
        sum += term;
        if t > peak && term < 1e-18 * sum {
            break;
        }
        i += 1;
    }
    sum * step
}

/// Ratio `K_{ν+1}(x) / K_ν(x)`.
pub fn bessel_k_ratio(nu: f64, x: f64) -> f64 {
    bessel_k_scaled(nu + 1.0, x) / bessel_k_scaled(nu, x)
}

/// First positive zero of `x ↦ 0F1(; n/2; -x²/4)`, i.e. of the regular
/// radial solution of `-Δw = w` in `R^n`. Equals `j_{n/2-1,1}`.
pub fn first_radial_zero(n: usize) -> f64 {
    let b = n as f64 / 2.0;
    let f = |x: f64| hyp0f1(b, -0.25 * x * x);
    let mut lo = 0.0;
    let mut hi = 0.05;
    while f(hi) > 0.0 {
        lo = hi;
        hi += 0.05;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}
