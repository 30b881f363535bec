//! Minimisation of `λ(D)` over `|D| = δ` by alternating principal
//! eigensolves with bathtub rearrangements, from several starting designs.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::design::{check_admissible, Design, DesignError};
use crate::eigen::{EigenError, EigenResult, Operators};
use crate::mesh::Mesh;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OptError {
    #[error("design: {0}")]
    Design(#[from] DesignError),
    #[error("eigensolver: {0}")]
    Eigen(#[from] EigenError),
    #[error("seed {seed} has measure {got}, expected {expected}")]
    SeedMeasure { seed: usize, got: f64, expected: f64 },
    #[error("no seeds given")]
    NoSeeds,
    #[error("all {0} seeds failed; first: {1}")]
    AllSeedsFailed(usize, String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptSettings {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for OptSettings {
    fn default() -> Self {
        Self { tol: 1e-9, max_iter: 100 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptState {
    pub design: Design,
    pub eigen: EigenResult,
    pub iteration: usize,
    pub lambda_history: Vec<f64>,
    /// `|D_k Δ D_{k+1}|` per bathtub step.
    pub sym_diff_history: Vec<f64>,
    pub converged: bool,
    pub seed_id: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeedFailure {
    pub seed_id: usize,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptOutcome {
    pub best: OptState,
    /// Final state of every seed that ran to completion, by seed id.
    pub states: Vec<OptState>,
    pub failures: Vec<SeedFailure>,
}

impl OptOutcome {
    /// Final states whose `λ` agrees with the best within `tol` (relative),
    /// keeping one per distinct design.
    pub fn minimizers(&self, tol: f64, mesh: &Mesh) -> Vec<&OptState> {
        let mut out: Vec<&OptState> = Vec::new();
        for s in &self.states {
            if (s.eigen.lambda - self.best.eigen.lambda).abs() > tol * self.best.eigen.lambda {
                continue;
            }
            let seen = out
                .iter()
                .any(|o| o.design.symmetric_difference(&s.design, mesh) <= tol * mesh.domain_measure);
            if !seen {
                out.push(s);
            }
        }
        out
    }
}

/// Mean of `u²` over each element under the nodal (lumped) quadrature used
/// for the mass matrices, so that `∫ m u² = Σ_e |e| w_e f_e` exactly.
pub fn element_u2_means(u: &[f64], mesh: &Mesh) -> Vec<f64> {
    (0..mesh.num_elements())
        .map(|e| {
            let nodes = mesh.nodes(e);
            nodes.iter().map(|&i| u[i] * u[i]).sum::<f64>() / nodes.len() as f64
        })
        .collect()
}

/// Favourable set as the superlevel set of the element means of `u²` with
/// measure `delta`; returns the design and the realised cut value.
pub fn bathtub_update(u: &[f64], mesh: &Mesh, beta: f64, delta: f64) -> Result<(Design, f64), DesignError> {
    check_admissible(mesh, beta, delta)?;
    let f = element_u2_means(u, mesh);
    let mut order: Vec<usize> = (0..f.len()).collect();
    order.sort_by(|&a, &b| f[b].total_cmp(&f[a]).then(a.cmp(&b)));
    let design = Design::greedy(mesh, beta, &order, delta)?;
    let threshold = order
        .iter()
        .rev()
        .find(|&&e| design.fill[e] > 0.0)
        .map_or(f64::INFINITY, |&e| f[e]);
    Ok((design, threshold))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeedStrategy {
    /// Balls around `n` boundary points equispaced in arc length (the two
    /// endpoints in 1D).
    BoundaryCaps(usize),
    /// Balls around uniformly drawn element centroids.
    Random { count: usize, seed: u64 },
    /// One ball around the centroid of the domain.
    Centered,
}

fn ball_around(mesh: &Mesh, beta: f64, delta: f64, p: [f64; 2]) -> Result<Design, DesignError> {
    let dist: Vec<f64> = (0..mesh.num_elements())
        .map(|e| {
            let c = mesh.centroid(e);
            (c[0] - p[0]).hypot(c[1] - p[1])
        })
        .collect();
    let mut order: Vec<usize> = (0..dist.len()).collect();
    order.sort_by(|&a, &b| dist[a].total_cmp(&dist[b]).then(a.cmp(&b)));
    Design::greedy(mesh, beta, &order, delta)
}

fn boundary_points(mesh: &Mesh, n: usize) -> Vec<[f64; 2]> {
    if mesh.dim == 1 {
        let mut ends: Vec<[f64; 2]> = mesh.boundary_vertices.iter().map(|&v| mesh.vertices[v]).collect();
        ends.sort_by(|a, b| a[0].total_cmp(&b[0]));
        ends.truncate(n);
        return ends;
    }
    let lp = mesh.boundary_loop();
    let pts: Vec<[f64; 2]> = lp.iter().map(|&v| mesh.vertices[v]).collect();
    let mut cum = vec![0.0];
    for i in 0..pts.len() {
        let a = pts[i];
        let b = pts[(i + 1) % pts.len()];
        cum.push(cum[i] + (b[0] - a[0]).hypot(b[1] - a[1]));
    }
    let total = cum[pts.len()];
    (0..n)
        .map(|k| {
            let s = total * k as f64 / n as f64;
            let i = cum.partition_point(|&c| c <= s).saturating_sub(1).min(pts.len() - 1);
            let t = (s - cum[i]) / (cum[i + 1] - cum[i]);
            let a = pts[i];
            let b = pts[(i + 1) % pts.len()];
            [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]
        })
        .collect()
}

pub fn seed_designs(mesh: &Mesh, beta: f64, delta: f64, strategy: SeedStrategy) -> Result<Vec<Design>, DesignError> {
    check_admissible(mesh, beta, delta)?;
    match strategy {
        SeedStrategy::BoundaryCaps(n) => boundary_points(mesh, n)
            .into_iter()
            .map(|p| ball_around(mesh, beta, delta, p))
            .collect(),
        SeedStrategy::Centered => {
            let mut c = [0.0, 0.0];
            for e in 0..mesh.num_elements() {
                let g = mesh.centroid(e);
                c[0] += g[0] * mesh.element_measure[e];
                c[1] += g[1] * mesh.element_measure[e];
            }
            c[0] /= mesh.domain_measure;
            c[1] /= mesh.domain_measure;
            Ok(vec![ball_around(mesh, beta, delta, c)?])
        }
        SeedStrategy::Random { count, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..count)
                .map(|_| {
                    let e = rng.random_range(0..mesh.num_elements());
                    ball_around(mesh, beta, delta, mesh.centroid(e))
                })
                .collect()
        }
    }
}

/// Eight boundary caps followed by the centred ball.
pub fn default_seeds(mesh: &Mesh, beta: f64, delta: f64) -> Result<Vec<Design>, DesignError> {
    let mut seeds = seed_designs(mesh, beta, delta, SeedStrategy::BoundaryCaps(8))?;
    seeds.extend(seed_designs(mesh, beta, delta, SeedStrategy::Centered)?);
    Ok(seeds)
}

/// Runs the alternation from one seed.
pub fn descend(
    ops: &Operators,
    mesh: &Mesh,
    seed: Design,
    seed_id: usize,
    settings: &OptSettings,
) -> Result<OptState, OptError> {
    let (beta, delta) = (seed.beta, seed.delta);
    let mut eigen = ops.principal(&seed, None)?;
    let mut state = OptState {
        design: seed,
        lambda_history: vec![eigen.lambda],
        eigen: eigen.clone(),
        iteration: 0,
        sym_diff_history: Vec::new(),
        converged: false,
        seed_id,
    };
    while state.iteration < settings.max_iter {
        state.iteration += 1;
        let (next, _) = bathtub_update(&state.eigen.u, mesh, beta, delta)?;
        let sd = state.design.symmetric_difference(&next, mesh);
        state.sym_diff_history.push(sd);
        if sd == 0.0 {
            state.converged = true;
            break;
        }
        let trial = ops.principal(&next, Some(&state.eigen))?;
        // a rearrangement cannot raise the quotient; a rise is rounding noise
        if trial.lambda > state.eigen.lambda * (1.0 + 1e-12) {
            state.converged = sd < settings.tol * mesh.domain_measure;
            break;
        }
        let drop = state.eigen.lambda - trial.lambda;
        eigen = trial;
        state.lambda_history.push(eigen.lambda);
        state.design = next;
        state.eigen = eigen.clone();
        if drop < settings.tol * state.lambda_history[state.lambda_history.len() - 2]
            && sd < settings.tol * mesh.domain_measure
        {
            state.converged = true;
            break;
        }
    }
    Ok(state)
}

/// Runs every seed (in parallel) and keeps the smallest `λ`, ties going to
/// the lowest seed id. Failed seeds are reported, not fatal, unless all fail.
pub fn optimize(
    mesh: &Mesh,
    beta: f64,
    delta: f64,
    seeds: &[Design],
    settings: &OptSettings,
) -> Result<OptOutcome, OptError> {
    check_admissible(mesh, beta, delta)?;
    if seeds.is_empty() {
        return Err(OptError::NoSeeds);
    }
    for (i, s) in seeds.iter().enumerate() {
        if (s.delta - delta).abs() > 1e-12 * mesh.domain_measure.max(1.0) {
            return Err(OptError::SeedMeasure {
                seed: i,
                got: s.delta,
                expected: delta,
            });
        }
    }
    let ops = Operators::new(mesh)?;
    let results: Vec<Result<OptState, OptError>> = seeds
        .par_iter()
        .enumerate()
        .map(|(i, s)| descend(&ops, mesh, s.clone(), i, settings))
        .collect();
    let mut states = Vec::new();
    let mut failures = Vec::new();
    for (i, r) in results.into_iter().enumerate() {
        match r {
            Ok(s) => states.push(s),
            Err(e) => failures.push(SeedFailure {
                seed_id: i,
                error: e.to_string(),
            }),
        }
    }
    let best = states
        .iter()
        .min_by(|a, b| a.eigen.lambda.total_cmp(&b.eigen.lambda).then(a.seed_id.cmp(&b.seed_id)))
        .cloned()
        .ok_or_else(|| OptError::AllSeedsFailed(seeds.len(), failures[0].error.clone()))?;
    Ok(OptOutcome { best, states, failures })
}
