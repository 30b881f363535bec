//! Radial limit problem on `R^N`: the ball of measure `k` carrying weight
//! `1` inside and `-β` outside.
//!
//! The principal eigenfunction is radial. Inside the ball it is the regular
//! solution of `-Δw = μw`, `w = 0F1(; N/2; -μr²/4)`; outside it is the
//! decaying solution of `-Δw = -μβw`, `w = C r^{-ν} K_ν(√(μβ) r)` with
//! `ν = N/2 - 1`. The eigenvalue `μ` is the first value at which the two
//! logarithmic derivatives agree at the ball radius `R̄`.
//!
//! Every profile quantity is computed two ways: from the special functions
//! above, and by shooting the radial ODE with an adaptive Runge–Kutta
//! integrator. The second route is the independent check of the first.

use thiserror::Error;

use crate::ode::{Dopri5, OdeError};
use crate::quadrature::{Quadrature, QuadratureError};
use crate::special::{bessel_k_ratio, bessel_k_scaled, first_radial_zero, hyp0f1, unit_ball_volume};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LimitError {
    #[error("invalid limit configuration: {0}")]
    InvalidConfig(String),
    #[error("mu = {mu} is past the principal branch (interior profile vanishes for mu >= {cap})")]
    PastPrincipalBranch { mu: f64, cap: f64 },
    #[error("no sign change of the matching mismatch found on [{lo}, {hi}]")]
    Bracketing { lo: f64, hi: f64 },
    #[error("root polish stalled at mu = {mu} with mismatch {residual}")]
    RootNotConverged { mu: f64, residual: f64 },
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
    #[error("radial shooting failed: {0}")]
    Ode(#[from] OdeError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LimitConfig {
    pub dim: usize,
    pub beta: f64,
    pub mass: f64,
}

impl LimitConfig {
    pub fn new(dim: usize, beta: f64) -> Self {
        Self { dim, beta, mass: 1.0 }
    }

    pub fn with_mass(self, mass: f64) -> Self {
        Self { mass, ..self }
    }

    pub fn validate(&self) -> Result<(), LimitError> {
        if self.dim == 0 {
            return Err(LimitError::InvalidConfig("dim must be at least 1".into()));
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(LimitError::InvalidConfig(format!("beta must be positive, got {}", self.beta)));
        }
        if !(self.mass > 0.0 && self.mass.is_finite()) {
            return Err(LimitError::InvalidConfig(format!("mass must be positive, got {}", self.mass)));
        }
        Ok(())
    }

    /// Radius of the ball of measure `mass`.
    pub fn rbar(&self) -> f64 {
        (self.mass / unit_ball_volume(self.dim)).powf(1.0 / self.dim as f64)
    }

    fn nu(&self) -> f64 {
        0.5 * self.dim as f64 - 1.0
    }

    /// Interior Dirichlet threshold: for `μ ≥ μ_cap` the interior profile
    /// has a zero inside the ball.
    pub fn mu_cap(&self) -> f64 {
        (first_radial_zero(self.dim) / self.rbar()).powi(2)
    }
}

/// How profile log-derivatives are evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Method {
    #[default]
    SpecialFunction,
    Shooting,
}

/// A radial profile with value continuity at `R̄`, normalised by `w(0) = 1`.
/// When `mu` is the principal eigenvalue (the output of [`solve_limit`]) the
/// derivative also matches and this is the limit eigenfunction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadialSolution {
    pub config: LimitConfig,
    pub mu: f64,
    pub rbar: f64,
    /// `A` in `w = A·0F1(; N/2; -μr²/4)` for `r ≤ R̄`.
    pub interior_coeff: f64,
    /// `C` in `w = C r^{-ν} K_ν(√(μβ) r)` for `r > R̄`.
    pub exterior_coeff: f64,
    /// Value of `w(0)`.
    pub normalization: f64,
}

fn interior(dim: usize, mu: f64, r: f64) -> (f64, f64) {
    let b = 0.5 * dim as f64;
    let z = -0.25 * mu * r * r;
    (hyp0f1(b, z), -(mu * r / dim as f64) * hyp0f1(b + 1.0, z))
}

// r^{-ν} K_ν(s r), without the coefficient
fn exterior_shape(nu: f64, s: f64, r: f64) -> f64 {
    let x = s * r;
    r.powf(-nu) * (-x).exp() * bessel_k_scaled(nu, x)
}

fn exterior_log_derivative(nu: f64, s: f64, r: f64) -> f64 {
    -s * bessel_k_ratio(nu, s * r)
}

impl RadialSolution {
    /// Builds the value-matched profile for an arbitrary trial `mu` below
    /// the interior threshold.
    pub fn trial(config: LimitConfig, mu: f64) -> Result<Self, LimitError> {
        config.validate()?;
        let cap = config.mu_cap();
        if !(mu > 0.0) || mu >= cap {
            return Err(LimitError::PastPrincipalBranch { mu, cap });
        }
        let rbar = config.rbar();
        let s = (mu * config.beta).sqrt();
        let (w_wall, _) = interior(config.dim, mu, rbar);
        let exterior_coeff = w_wall / exterior_shape(config.nu(), s, rbar);
        Ok(Self {
            config,
            mu,
            rbar,
            interior_coeff: 1.0,
            exterior_coeff,
            normalization: 1.0,
        })
    }

    /// Exterior decay rate `√(μβ)`.
    pub fn decay_rate(&self) -> f64 {
        (self.mu * self.config.beta).sqrt()
    }

    /// Truncation radius for quadrature and shooting, `R̄ + 40/√(μβ)`.
    pub fn r_max(&self) -> f64 {
        self.rbar + 40.0 / self.decay_rate()
    }

    /// `lim r^{(N-1)/2} e^{√(μβ) r} w(r)`, from the large-argument form of `K_ν`.
    pub fn decay_constant(&self) -> f64 {
        let s = self.decay_rate();
        self.exterior_coeff * (std::f64::consts::PI / (2.0 * s)).sqrt() * s.powf(-self.config.nu())
    }

    /// `w(r)` and `w'(r)`.
    pub fn eval(&self, r: f64) -> (f64, f64) {
        let r = r.abs();
        if r <= self.rbar {
            let (w, dw) = interior(self.config.dim, self.mu, r);
            (self.interior_coeff * w, self.interior_coeff * dw)
        } else {
            let nu = self.config.nu();
            let s = self.decay_rate();
            let w = self.exterior_coeff * exterior_shape(nu, s, r);
            (w, w * exterior_log_derivative(nu, s, r))
        }
    }

    /// One-sided limits `(w(R̄⁻), w'(R̄⁻), w(R̄⁺), w'(R̄⁺))`.
    pub fn wall_traces(&self) -> (f64, f64, f64, f64) {
        let (wi, dwi) = interior(self.config.dim, self.mu, self.rbar);
        let nu = self.config.nu();
        let s = self.decay_rate();
        let we = self.exterior_coeff * exterior_shape(nu, s, self.rbar);
        let dwe = we * exterior_log_derivative(nu, s, self.rbar);
        (self.interior_coeff * wi, self.interior_coeff * dwi, we, dwe)
    }
}

/// Evaluates the profile of `sol`.
pub fn eval_profile(sol: &RadialSolution, r: f64) -> (f64, f64) {
    sol.eval(r)
}

// ---------------------------------------------------------------------------
// Shooting

fn shooter() -> Dopri5 {
    Dopri5 {
        rtol: 1e-13,
        atol: 1e-300,
        max_steps: 200_000,
    }
}

// interior solution normalised by w(0) = 1, integrated from a Taylor start
fn shoot_interior(dim: usize, mu: f64, r: f64) -> Result<(f64, f64), OdeError> {
    let n = dim as f64;
    let taylor = |r: f64| {
        let r2 = r * r;
        let w = 1.0 - mu * r2 / (2.0 * n) + mu * mu * r2 * r2 / (8.0 * n * (n + 2.0));
        let dw = -mu * r / n + mu * mu * r2 * r / (2.0 * n * (n + 2.0));
        (w, dw)
    };
    let r0 = 1e-3 / mu.sqrt();
    if r <= r0 {
        return Ok(taylor(r));
    }
    let (w0, dw0) = taylor(r0);
    let y = shooter().integrate(
        |t, y: &[f64; 2]| [y[1], -(n - 1.0) / t * y[1] - mu * y[0]],
        r0,
        [w0, dw0],
        r,
    )?;
    Ok((y[0], y[1]))
}

// decaying exterior solution integrated inward from `start`, unnormalised
fn shoot_exterior(dim: usize, mu: f64, beta: f64, start: f64, r: f64) -> Result<(f64, f64), OdeError> {
    let n = dim as f64;
    let s2 = mu * beta;
    let slope = -s2.sqrt() - (n - 1.0) / (2.0 * start);
    let y = shooter().integrate(
        |t, y: &[f64; 2]| [y[1], -(n - 1.0) / t * y[1] + s2 * y[0]],
        start,
        [1.0, slope],
        r,
    )?;
    Ok((y[0], y[1]))
}

/// Profile of `sol` recomputed by shooting the radial ODE. The exterior
/// branch is scaled to match the shot interior value at `R̄`.
pub fn shoot_profile(sol: &RadialSolution, r: f64) -> Result<(f64, f64), LimitError> {
    let r = r.abs();
    let cfg = &sol.config;
    if r <= sol.rbar {
        let (w, dw) = shoot_interior(cfg.dim, sol.mu, r)?;
        return Ok((sol.interior_coeff * w, sol.interior_coeff * dw));
    }
    let (w_wall, _) = shoot_interior(cfg.dim, sol.mu, sol.rbar)?;
    let start = sol.r_max().max(r + 40.0 / sol.decay_rate());
    let (e_wall, _) = shoot_exterior(cfg.dim, sol.mu, cfg.beta, start, sol.rbar)?;
    let (e, de) = shoot_exterior(cfg.dim, sol.mu, cfg.beta, start, r)?;
    let scale = sol.interior_coeff * w_wall / e_wall;
    Ok((scale * e, scale * de))
}

// ---------------------------------------------------------------------------
// Matching and root finding

/// Exterior minus interior logarithmic derivative of the trial profile at
/// `R̄`. Negative below the principal eigenvalue, zero at it, and tending to
/// `+∞` as `mu_trial` approaches the interior threshold.
pub fn matching_mismatch(config: &LimitConfig, mu_trial: f64, method: Method) -> Result<f64, LimitError> {
    config.validate()?;
    let cap = config.mu_cap();
    if !(mu_trial > 0.0) || mu_trial >= cap {
        return Err(LimitError::PastPrincipalBranch { mu: mu_trial, cap });
    }
    let rbar = config.rbar();
    match method {
        Method::SpecialFunction => {
            let (w, dw) = interior(config.dim, mu_trial, rbar);
            let s = (mu_trial * config.beta).sqrt();
            Ok(exterior_log_derivative(config.nu(), s, rbar) - dw / w)
        }
        Method::Shooting => {
            let (w, dw) = shoot_interior(config.dim, mu_trial, rbar)?;
            if w <= 0.0 {
                return Err(LimitError::PastPrincipalBranch { mu: mu_trial, cap });
            }
            let start = rbar + 40.0 / (mu_trial * config.beta).sqrt();
            let (e, de) = shoot_exterior(config.dim, mu_trial, config.beta, start, rbar)?;
            Ok(de / e - dw / w)
        }
    }
}

/// Geometric scan (ratio 1.2) of `(0, μ_cap)` for the first sign change of
/// the mismatch. Returns `(lo, hi)` with `mismatch(lo) < 0 < mismatch(hi)`.
pub fn bracket_limit(config: &LimitConfig, method: Method) -> Result<(f64, f64), LimitError> {
    let cap = config.mu_cap();
    let top = cap * (1.0 - 1e-9);
    let mut lo = cap * 1e-4;
    while matching_mismatch(config, lo, method)? >= 0.0 {
        lo /= 1.2f64.powi(10);
        if lo < cap * 1e-14 {
            return Err(LimitError::Bracketing { lo, hi: top });
        }
    }
    loop {
        let hi = (lo * 1.2).min(top);
        if matching_mismatch(config, hi, method)? > 0.0 {
            return Ok((lo, hi));
        }
        if hi >= top {
            return Err(LimitError::Bracketing { lo: cap * 1e-4, hi: top });
        }
        lo = hi;
    }
}

fn find_root(config: &LimitConfig, method: Method) -> Result<f64, LimitError> {
    let f = |mu: f64| matching_mismatch(config, mu, method);
    let (mut a, mut b) = bracket_limit(config, method)?;
    let (mut fa, mut fb) = (f(a)?, f(b)?);
    // Illinois-modified regula falsi, falling back to bisection
    let mut side = 0i8;
    for _ in 0..300 {
        assert!(fa < 0.0 && fb > 0.0, "bracket lost its sign pattern");
        let width = b - a;
        let mut x = (a * fb - b * fa) / (fb - fa);
        if !(x > a && x < b) || width > 0.25 * b {
            x = 0.5 * (a + b);
        }
        let fx = f(x)?;
        if fx == 0.0 || width <= 4.0 * f64::EPSILON * b {
            return Ok(x);
        }
        if fx < 0.0 {
            a = x;
            fa = fx;
            if side == -1 {
                fb *= 0.5;
            }
            side = -1;
        } else {
            b = x;
            fb = fx;
            if side == 1 {
                fa *= 0.5;
            }
            side = 1;
        }
        if fx.abs() < 1e-14 {
            return Ok(x);
        }
    }
    let x = 0.5 * (a + b);
    Ok(x)
}

/// Principal eigenvalue of the limit problem and its profile.
///
/// The root is found for unit mass and carried to mass `k` through the exact
/// scaling `μ_k = k^{-2/N} μ_1`, `w_k(r) = w_1(k^{-1/N} r)`.
pub fn solve_limit(config: &LimitConfig) -> Result<RadialSolution, LimitError> {
    solve_limit_with(config, Method::SpecialFunction)
}

pub fn solve_limit_with(config: &LimitConfig, method: Method) -> Result<RadialSolution, LimitError> {
    config.validate()?;
    let unit = LimitConfig { mass: 1.0, ..*config };
    let mu1 = find_root(&unit, method)?;
    let residual = matching_mismatch(&unit, mu1, method)?;
    if residual.abs() >= 1e-10 {
        return Err(LimitError::RootNotConverged { mu: mu1, residual });
    }
    let mu = if config.mass == 1.0 {
        mu1
    } else {
        mu1 * config.mass.powf(-2.0 / config.dim as f64)
    };
    RadialSolution::trial(*config, mu)
}

// ---------------------------------------------------------------------------
// Constants and identities

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LimitConstants {
    /// `(1/(N+1)) ∫_{R^N_+} |∇w|² z_N`.
    pub gamma: f64,
    /// `∫_{R^N_+} m w² z_N`.
    pub gamma1: f64,
    /// Curvature coefficient of the upper bound. Independent of the amplitude
    /// of `w`; scales like `k^{1/N}` with the mass.
    pub big_gamma: f64,
    /// `∫_{R^N_+} |∇w|²`.
    pub grad_half: f64,
    /// `∫_{R^N_+} m w²`.
    pub mass_half: f64,
    /// `w(R̄)`.
    pub wall_value: f64,
    /// Analytic bound on the relative contribution of `r > R_max` to the
    /// integrals above; not added to them.
    pub tail_bound: f64,
}

struct RadialMoments {
    grad: f64,
    grad_z: f64,
    mass: f64,
    mass_z: f64,
}

fn radial_moments(sol: &RadialSolution, quad: &Quadrature) -> Result<RadialMoments, LimitError> {
    let n = sol.config.dim as i32;
    let beta = sol.config.beta;
    let rb = sol.rbar;
    let s = sol.decay_rate();
    // split the exterior so the adaptive rule sees the decay scale
    let cuts = [rb, rb + 2.0 / s, rb + 8.0 / s, sol.r_max()];
    let integrate = |f: &dyn Fn(f64, f64, f64) -> f64| -> Result<f64, LimitError> {
        let (inside, _) = quad.integrate(
            |r| {
                let (w, dw) = sol.eval(r);
                f(r, w, dw)
            },
            0.0,
            rb,
        )?;
        let mut outside = 0.0;
        for pair in cuts.windows(2) {
            let (v, _) = quad.integrate(
                |r| {
                    let (w, dw) = sol.eval(r);
                    f(r, w, dw)
                },
                pair[0],
                pair[1],
            )?;
            outside += v;
        }
        Ok(inside + outside)
    };
    let grad = integrate(&|r, _, dw| dw * dw * r.powi(n - 1))?;
    let grad_z = integrate(&|r, _, dw| dw * dw * r.powi(n))?;
    let weight = |r: f64| if r <= rb { 1.0 } else { -beta };
    let mass = integrate(&|r, w, _| weight(r) * w * w * r.powi(n - 1))?;
    let mass_z = integrate(&|r, w, _| weight(r) * w * w * r.powi(n))?;
    Ok(RadialMoments {
        grad,
        grad_z,
        mass,
        mass_z,
    })
}

fn tail_bound(sol: &RadialSolution, moments: &RadialMoments) -> f64 {
    let n = sol.config.dim as i32;
    let s = sol.decay_rate();
    let big_r = sol.r_max();
    let (w, dw) = sol.eval(big_r);
    // w(r) ≤ w(R)(R/r)^{(N-1)/2} e^{-s(r-R)} beyond R, up to a factor 1 + O(1/r)
    let lin = big_r.powi(n - 1) * (big_r / (2.0 * s) + 1.0 / (4.0 * s * s));
    let bound = 2.0 * lin * (w * w + dw * dw);
    let scale = moments.grad.abs().min(moments.grad_z.abs()).min(moments.mass_z.abs());
    bound / scale
}

/// Half-space moments of the profile, by radial reduction and adaptive
/// quadrature at relative tolerance `1e-12`.
pub fn limit_constants(sol: &RadialSolution) -> Result<LimitConstants, LimitError> {
    limit_constants_with(sol, &Quadrature::default())
}

pub fn limit_constants_with(sol: &RadialSolution, quad: &Quadrature) -> Result<LimitConstants, LimitError> {
    let nn = sol.config.dim;
    let n = nn as f64;
    let half_sphere = 0.5 * n * unit_ball_volume(nn);
    let omega_prev = unit_ball_volume(nn - 1);
    let m = radial_moments(sol, quad)?;
    let grad_half = half_sphere * m.grad;
    let gamma = omega_prev * m.grad_z / (n + 1.0);
    let big_gamma = 2f64.powf(1.0 + 1.0 / n) * (n - 1.0) / (n + 1.0) * omega_prev * m.grad_z / grad_half;
    Ok(LimitConstants {
        gamma,
        gamma1: omega_prev * m.mass_z,
        big_gamma,
        grad_half,
        mass_half: half_sphere * m.mass,
        wall_value: sol.eval(sol.rbar).0,
        tail_bound: tail_bound(sol, &m),
    })
}

/// Normalised residuals of the integral identities satisfied by the limit
/// eigenfunction. Each is divided by the largest term it contains.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdentityResiduals {
    /// `μγ₁ - (N-1)γ + 2γ - 4μ ω_{N-1} R̄ ∫_{R^N_+} m w² / (N(N+1)ω_N)`,
    /// obtained by testing the equation with `z_N² ∂_N w`.
    pub technical: f64,
    /// `∫|∇w|² - μ(1+β)/4 · Nω_N R̄^N w(R̄)²` on the half space.
    pub pohozaev: f64,
    /// `∫|∇w|² - μ ∫ m w²` on the half space.
    pub rayleigh: f64,
    /// Jump of `w` across `R̄`.
    pub matching_value: f64,
    /// Jump of `w'` across `R̄`.
    pub matching_derivative: f64,
}

impl IdentityResiduals {
    pub fn named(&self) -> [(&'static str, f64); 5] {
        [
            ("technical", self.technical),
            ("pohozaev", self.pohozaev),
            ("rayleigh", self.rayleigh),
            ("matching_value", self.matching_value),
            ("matching_derivative", self.matching_derivative),
        ]
    }

    pub fn max_abs(&self) -> f64 {
        self.named().iter().map(|(_, v)| v.abs()).fold(0.0, f64::max)
    }
}

fn normalised(terms: &[f64]) -> f64 {
    let scale = terms.iter().map(|t| t.abs()).fold(0.0, f64::max);
    if scale == 0.0 {
        0.0
    } else {
        terms.iter().sum::<f64>() / scale
    }
}

pub fn check_identities(sol: &RadialSolution) -> Result<IdentityResiduals, LimitError> {
    let c = limit_constants(sol)?;
    Ok(identities_from(sol, &c))
}

pub fn identities_from(sol: &RadialSolution, c: &LimitConstants) -> IdentityResiduals {
    identities_with_mu(sol, c, sol.mu)
}

/// Residuals with `mu` substituted for the eigenvalue in every identity
/// while the profile and its moments stay fixed.
pub fn identities_with_mu(sol: &RadialSolution, c: &LimitConstants, mu: f64) -> IdentityResiduals {
    let nn = sol.config.dim;
    let n = nn as f64;
    let omega = unit_ball_volume(nn);
    let omega_prev = unit_ball_volume(nn - 1);
    let (wi, dwi, we, dwe) = sol.wall_traces();
    let closure = 4.0 * mu * omega_prev * sol.rbar * c.mass_half / (n * (n + 1.0) * omega);
    let technical = normalised(&[mu * c.gamma1, -(n - 1.0) * c.gamma, 2.0 * c.gamma, -closure]);
    let wall = mu * (1.0 + sol.config.beta) / 4.0 * n * omega * sol.rbar.powf(n) * wi * wi;
    IdentityResiduals {
        technical,
        pohozaev: normalised(&[c.grad_half, -wall]),
        rayleigh: normalised(&[c.grad_half, -mu * c.mass_half]),
        matching_value: normalised(&[wi, -we]),
        matching_derivative: normalised(&[dwi, -dwe]),
    }
}
