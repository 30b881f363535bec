//! Small-δ behaviour of the optimal threshold: expansion algebra, the
//! curvature-corrected upper bound, and sweeps that measure how optimal
//! designs concentrate at the boundary.

use rayon::prelude::*;
use thiserror::Error;

use crate::design::Design;
use crate::eigen::{EigenResult, Operators};
use crate::mesh::{generate, Mesh, MeshError, Shape};
use crate::optimizer::{default_seeds, optimize, seed_designs, OptError, OptSettings, SeedStrategy};
use crate::radial::{limit_constants, solve_limit, LimitConfig, LimitConstants, LimitError, RadialSolution};
use crate::special::unit_ball_volume;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SweepError {
    #[error("mesh: {0}")]
    Mesh(#[from] MeshError),
    #[error("optimizer: {0}")]
    Opt(#[from] OptError),
    #[error("limit problem: {0}")]
    Limit(#[from] LimitError),
}

/// Coefficients of `δ = a rᴺ(1 - b r + o(r))` and `ν = c r⁻²(1 - d r + o(r))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpansionPair {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

/// Eliminates `r`: `ν = C δ^{-2/N}(1 - K δ^{1/N} + o(δ^{1/N}))`, returning
/// `(C, K)`.
pub fn compose_expansions(p: &ExpansionPair, dim: usize) -> (f64, f64) {
    assert!(p.a > 0.0 && p.c > 0.0, "a and c must be positive");
    let n = dim as f64;
    (p.c * p.a.powf(2.0 / n), p.a.powf(-1.0 / n) * (2.0 * p.b + n * p.d) / n)
}

/// Expansions of the measure and of the Rayleigh quotient of the half-ball
/// competitor placed at a boundary point whose curvature sum is `alpha`
/// (`α = (N-1)H`), for the unit-mass limit profile `sol`.
pub fn competitor_expansions(sol: &RadialSolution, c: &LimitConstants, alpha: f64) -> ExpansionPair {
    let n = sol.config.dim;
    let nf = n as f64;
    let omega_n = unit_ball_volume(n);
    let omega_nm1 = unit_ball_volume(n - 1);
    let half_moment = omega_nm1 * omega_n.powf(-(nf + 1.0) / nf) / (nf + 1.0);
    ExpansionPair {
        a: 0.5,
        b: 2.0 * half_moment * alpha,
        c: sol.mu,
        d: alpha * (2.0 * c.gamma / (sol.mu * c.mass_half) - 4.0 * half_moment / nf),
    }
}

/// `4^{-1/N} I δ^{-2/N}(1 - Γ Ĥ δ^{1/N})` with `I` and `Γ` taken at unit mass.
pub fn predicted_bound(delta: f64, sol: &RadialSolution, c: &LimitConstants, hhat: f64) -> f64 {
    let n = sol.config.dim as f64;
    let k = sol.config.mass;
    let mu1 = sol.mu * k.powf(2.0 / n);
    let big_gamma1 = c.big_gamma * k.powf(-1.0 / n);
    4f64.powf(-1.0 / n) * mu1 * delta.powf(-2.0 / n) * (1.0 - big_gamma1 * hhat * delta.powf(1.0 / n))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSettings {
    /// Mesh size `h = factor · δ^{1/N}`, capped by the generator's limit.
    pub h_factor: f64,
    pub opt: OptSettings,
    /// Extra random ball seeds on top of the default ones.
    pub random_seeds: Option<(usize, u64)>,
    pub annulus_eps: Vec<f64>,
}

impl Default for SweepSettings {
    fn default() -> Self {
        Self {
            h_factor: 1.0 / 12.0,
            opt: OptSettings::default(),
            random_seeds: None,
            annulus_eps: vec![0.25, 0.5],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRecord {
    pub delta: f64,
    pub h: f64,
    pub od_value: f64,
    /// `od · δ^{2/N}`.
    pub rescaled: f64,
    /// Nodal argmax of `u`, lowest index on ties.
    pub maximizer: [f64; 2],
    pub dist_boundary: f64,
    pub annulus_ok: Vec<(f64, bool)>,
    /// Total measure of boundary facets on elements with weight ≥ 0.
    pub boundary_contact: f64,
    /// `δ^{1/2} · min_D u` for the L²-normalised eigenfunction.
    pub min_over_d: f64,
    pub connected_components: usize,
    pub predicted: f64,
    pub seed_id: usize,
    pub converged: bool,
    pub iterations: usize,
    pub decay: Vec<DecayRow>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepFailure {
    pub delta: f64,
    pub error: String,
}

pub fn maximizer_node(u: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in u.iter().enumerate() {
        if v > u[best] {
            best = i;
        }
    }
    best
}

/// `u / ‖u‖_{L²}` with the discrete (lumped) mass.
pub fn l2_normalized(ops: &Operators, design: &Design, u: &[f64]) -> Vec<f64> {
    let m = ops.assemble(design).expect("design checked by caller").mass;
    let norm = m.quad(u).sqrt();
    u.iter().map(|v| v / norm).collect()
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Whether `B_{r-}(P) ∩ Ω ⊂ D ⊂ B_{r+}(P)` with `|B_{r±}| = 2δ(1 ± ε)`,
/// judged on element centroids.
pub fn annulus_contains(mesh: &Mesh, design: &Design, p: [f64; 2], delta: f64, eps: f64) -> bool {
    let n = mesh.dim as f64;
    let omega = unit_ball_volume(mesh.dim);
    let radius = |s: f64| (2.0 * delta * s / omega).powf(1.0 / n);
    let (r_minus, r_plus) = (radius(1.0 - eps), radius(1.0 + eps));
    (0..mesh.num_elements()).all(|e| {
        let d = dist(mesh.centroid(e), p);
        let inside = design.fill[e] > 0.0;
        !(d < r_minus && !inside) && !(inside && d > r_plus)
    })
}

pub fn boundary_contact(mesh: &Mesh, design: &Design) -> f64 {
    mesh.boundary_facets
        .iter()
        .filter(|f| design.weight(f.element) >= 0.0)
        .map(|f| mesh.facet_measure(f))
        .sum()
}

fn record(
    mesh: &Mesh,
    ops: &Operators,
    design: &Design,
    eigen: &EigenResult,
    delta: f64,
    h: f64,
    eps: &[f64],
) -> SweepRecord {
    let n = mesh.dim as f64;
    let node = maximizer_node(&eigen.u);
    let p = mesh.vertices[node];
    let un = l2_normalized(ops, design, &eigen.u);
    let min_d = (0..mesh.num_elements())
        .filter(|&e| design.fill[e] >= 1.0)
        .flat_map(|e| mesh.nodes(e).iter().map(|&i| un[i]))
        .fold(f64::INFINITY, f64::min);
    SweepRecord {
        delta,
        h,
        od_value: eigen.lambda,
        rescaled: eigen.lambda * delta.powf(2.0 / n),
        maximizer: p,
        dist_boundary: mesh.boundary_distance(p),
        annulus_ok: eps.iter().map(|&e| (e, annulus_contains(mesh, design, p, delta, e))).collect(),
        boundary_contact: boundary_contact(mesh, design),
        min_over_d: delta.sqrt() * min_d,
        connected_components: mesh.components_where(|e| design.fill[e] > 0.0),
        predicted: f64::NAN,
        seed_id: 0,
        converged: false,
        iterations: 0,
        decay: decay_rows(mesh, &un, p, delta, DECAY_ROWS),
    }
}

fn sweep_one(shape: Shape, beta: f64, delta: f64, limit: &(RadialSolution, LimitConstants), s: &SweepSettings) -> Result<SweepRecord, SweepError> {
    let n = shape.dim() as f64;
    let h = (s.h_factor * delta.powf(1.0 / n)).min(shape.max_mesh_size());
    let (mesh, geometry) = generate(shape, h)?;
    let mut seeds = default_seeds(&mesh, beta, delta).map_err(OptError::from)?;
    if let Some((count, seed)) = s.random_seeds {
        seeds.extend(seed_designs(&mesh, beta, delta, SeedStrategy::Random { count, seed }).map_err(OptError::from)?);
    }
    let out = optimize(&mesh, beta, delta, &seeds, &s.opt)?;
    let ops = Operators::new(&mesh).map_err(OptError::from)?;
    let best = &out.best;
    let mut r = record(&mesh, &ops, &best.design, &best.eigen, delta, h, &s.annulus_eps);
    r.predicted = predicted_bound(delta, &limit.0, &limit.1, geometry.hhat());
    r.seed_id = best.seed_id;
    r.converged = best.converged;
    r.iterations = best.iteration;
    Ok(r)
}

/// Optimises at every `δ` (concurrently) and collects diagnostics, in the
/// order given. A failure at one `δ` is recorded and the sweep continues.
pub fn sweep(
    shape: Shape,
    beta: f64,
    deltas: &[f64],
    settings: &SweepSettings,
) -> Result<Vec<Result<SweepRecord, SweepFailure>>, SweepError> {
    let config = LimitConfig::new(shape.dim(), beta);
    let sol = solve_limit(&config)?;
    let constants = limit_constants(&sol)?;
    let limit = (sol, constants);
    Ok(deltas
        .par_iter()
        .map(|&delta| {
            sweep_one(shape, beta, delta, &limit, settings).map_err(|e| SweepFailure {
                delta,
                error: e.to_string(),
            })
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayRow {
    pub j: usize,
    pub radius: f64,
    /// `δ^{1/2} · max{u(x) : |x - P| ≥ radius}` for L²-normalised `u`.
    pub value: f64,
}

const DECAY_ROWS: usize = 12;

/// Decay of the eigenfunction away from its maximum point, on radii
/// `j · δ^{1/N}`, `j = 0, 1, ...` while nodes remain beyond the radius.
pub fn decay_report(mesh: &Mesh, eigen: &EigenResult, design: &Design, delta: f64, max_rows: usize) -> Vec<DecayRow> {
    let ops = Operators::new(mesh).expect("mesh already solved on");
    let un = l2_normalized(&ops, design, &eigen.u);
    let p = mesh.vertices[maximizer_node(&eigen.u)];
    decay_rows(mesh, &un, p, delta, max_rows)
}

fn decay_rows(mesh: &Mesh, un: &[f64], p: [f64; 2], delta: f64, max_rows: usize) -> Vec<DecayRow> {
    let step = delta.powf(1.0 / mesh.dim as f64);
    let d: Vec<f64> = mesh.vertices.iter().map(|&v| dist(v, p)).collect();
    let mut rows = Vec::new();
    for j in 0..max_rows {
        let radius = j as f64 * step;
        let m = d
            .iter()
            .zip(un)
            .filter(|(di, _)| **di >= radius)
            .map(|(_, u)| *u)
            .fold(f64::NEG_INFINITY, f64::max);
        if m == f64::NEG_INFINITY {
            break;
        }
        rows.push(DecayRow {
            j,
            radius,
            value: delta.sqrt() * m,
        });
    }
    rows
}
