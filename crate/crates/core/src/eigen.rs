//! Positive principal eigenvalue of `-Δu = λ m u` with natural boundary
//! conditions, discretised with P1 elements and nodal (lumped) mass.
//!
//! Lumping keeps every off-diagonal of `K - λW + σM` equal to that of `K`,
//! which is nonpositive on the generated meshes; the shifted operator is
//! then a Stieltjes matrix, so the principal eigenvector is positive and
//! the Cholesky solves involve no cancellation.
//!
//! The indefinite pencil `(K, W)` is never attacked directly. Instead
//! `ρ(λ)`, the smallest eigenvalue of `(K - λW, M)`, is computed by shifted
//! inverse iteration; `ρ` is concave with `ρ(0) = 0`, and its positive root
//! is `λ(m)`. The root is bracketed by a geometric scan and refined by
//! Newton steps from above, which are monotone for a concave function.

use faer::dyn_stack::{MemBuffer, MemStack};
use faer::sparse::linalg::cholesky::{factorize_symbolic_cholesky, LltRef, SymbolicCholesky, SymmetricOrdering};
use faer::sparse::{SparseColMatRef, SymbolicSparseColMatRef};
use faer::{Conj, MatMut, Par, Side};
use thiserror::Error;

use crate::design::Design;
use crate::mesh::Mesh;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EigenError {
    #[error("design belongs to mesh {design:#x}, not {mesh:#x}")]
    MeshMismatch { mesh: u64, design: u64 },
    #[error("nonnegative-average weight: integral of m is {integral} >= 0, so there is no positive principal eigenvalue")]
    NonNegativeAverage { integral: f64 },
    #[error("design not resolved by the mesh: no node carries positive lumped weight")]
    Unresolved,
    #[error("bracket scan exhausted on [{lo}, {hi}]")]
    BracketExhausted { lo: f64, hi: f64 },
    #[error("inner eigen-iteration did not converge at lambda = {lambda}: residual {residual} after {iterations} iterations")]
    InnerNotConverged { lambda: f64, residual: f64, iterations: usize },
    #[error("sparse factorisation failed: {0}")]
    Factorization(String),
    #[error("eigenvector not positive: u[{node}] = {value}")]
    NonPositiveEigenvector { node: usize, value: f64 },
}

/// Symmetric sparse matrix stored as its lower triangle in compressed
/// columns (sorted rows).
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricCsc {
    pub n: usize,
    pub colptr: Vec<usize>,
    pub rowidx: Vec<usize>,
    pub values: Vec<f64>,
}

impl SymmetricCsc {
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        sym_matvec(&self.colptr, &self.rowidx, &self.values, x, &mut y);
        y
    }

    pub fn quad(&self, x: &[f64]) -> f64 {
        dot(x, &self.matvec(x))
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (r, c) = if i >= j { (i, j) } else { (j, i) };
        let rows = &self.rowidx[self.colptr[c]..self.colptr[c + 1]];
        match rows.binary_search(&r) {
            Ok(k) => self.values[self.colptr[c] + k],
            Err(_) => 0.0,
        }
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.n]; self.n];
        for c in 0..self.n {
            for k in self.colptr[c]..self.colptr[c + 1] {
                let r = self.rowidx[k];
                d[r][c] = self.values[k];
                d[c][r] = self.values[k];
            }
        }
        d
    }
}

fn sym_matvec(colptr: &[usize], rowidx: &[usize], vals: &[f64], x: &[f64], y: &mut [f64]) {
    y.iter_mut().for_each(|v| *v = 0.0);
    for c in 0..colptr.len() - 1 {
        let xc = x[c];
        let mut acc = 0.0;
        for k in colptr[c]..colptr[c + 1] {
            let r = rowidx[k];
            let v = vals[k];
            if r == c {
                acc += v * xc;
            } else {
                y[r] += v * xc;
                acc += v * x[r];
            }
        }
        y[c] += acc;
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Assembled {
    pub stiffness: SymmetricCsc,
    pub mass: SymmetricCsc,
    pub weighted_mass: SymmetricCsc,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EigenResult {
    pub lambda: f64,
    /// Nodal values, positive and scaled to maximum 1.
    pub u: Vec<f64>,
    /// `|ρ(λ)|` at the accepted upper bracket point.
    pub rho_residual: f64,
    /// `uᵀKu / uᵀWu`.
    pub rayleigh: f64,
    /// `‖Ku - λWu‖ / ‖Mu‖`.
    pub equation_residual: f64,
    /// Number of `ρ` evaluations.
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenSettings {
    /// Relative width of the certified bracket around `λ`.
    pub rel_tol: f64,
    /// Scale-free residual at which inverse iteration stops.
    pub inner_tol: f64,
    pub max_inner: usize,
    pub max_outer: usize,
}

impl Default for EigenSettings {
    fn default() -> Self {
        Self {
            rel_tol: 1e-9,
            inner_tol: 1e-12,
            max_inner: 400,
            max_outer: 200,
        }
    }
}

/// Mesh-dependent part of the discretisation, shared by every design on
/// the same mesh: sparsity pattern, stiffness and mass values, per-element
/// local mass entries with their slots, and the symbolic factorisation.
pub struct Operators {
    mesh_id: u64,
    n: usize,
    colptr: Vec<usize>,
    rowidx: Vec<usize>,
    stiffness: Vec<f64>,
    mass: Vec<f64>,
    // per element, the slot and local mass value of each lower-triangle pair
    local_slots: Vec<usize>,
    local_mass: Vec<f64>,
    pairs_per_element: usize,
    symbolic: SymbolicCholesky<usize>,
    base_scale: f64,
    pub settings: EigenSettings,
}

// local stiffness and mass over pairs (i, j), i <= j, in row-major order
fn local_matrices(mesh: &Mesh, e: usize) -> (Vec<f64>, Vec<f64>) {
    let nodes = mesh.nodes(e);
    let area = mesh.element_measure[e];
    if mesh.dim == 1 {
        let l = area;
        (vec![1.0 / l, -1.0 / l, 1.0 / l], vec![l / 2.0, 0.0, l / 2.0])
    } else {
        let p: Vec<[f64; 2]> = nodes.iter().map(|&i| mesh.vertices[i]).collect();
        let b = [p[1][1] - p[2][1], p[2][1] - p[0][1], p[0][1] - p[1][1]];
        let c = [p[2][0] - p[1][0], p[0][0] - p[2][0], p[1][0] - p[0][0]];
        let mut k = Vec::with_capacity(6);
        let mut m = Vec::with_capacity(6);
        for i in 0..3 {
            for j in i..3 {
                k.push((b[i] * b[j] + c[i] * c[j]) / (4.0 * area));
                m.push(if i == j { area / 3.0 } else { 0.0 });
            }
        }
        (k, m)
    }
}

struct Workspace {
    shifted: Vec<f64>,
    factor: Vec<f64>,
    factor_mem: MemBuffer,
    solve_mem: MemBuffer,
    kx: Vec<f64>,
    wx: Vec<f64>,
    mx: Vec<f64>,
}

struct RhoEval {
    rho: f64,
    // M-normalised eigenvector estimate
    x: Vec<f64>,
    // xᵀWx with xᵀMx = 1, i.e. -ρ'(λ)
    wq: f64,
}

impl Operators {
    pub fn new(mesh: &Mesh) -> Result<Self, EigenError> {
        let n = mesh.num_vertices();
        let k = mesh.dim + 1;
        let mut cols: Vec<Vec<usize>> = vec![Vec::new(); n];
        for e in 0..mesh.num_elements() {
            let nodes = mesh.nodes(e);
            for &a in nodes {
                for &b in nodes {
                    if a >= b {
                        cols[b].push(a);
                    }
                }
            }
        }
        let mut colptr = vec![0usize];
        let mut rowidx = Vec::new();
        for col in &mut cols {
            col.sort_unstable();
            col.dedup();
            rowidx.extend_from_slice(col);
            colptr.push(rowidx.len());
        }
        let slot = |r: usize, c: usize| -> usize {
            let (r, c) = if r >= c { (r, c) } else { (c, r) };
            let rows = &rowidx[colptr[c]..colptr[c + 1]];
            colptr[c] + rows.binary_search(&r).expect("pattern contains every element pair")
        };
        let pairs_per_element = k * (k + 1) / 2;
        let mut stiffness = vec![0.0; rowidx.len()];
        let mut mass = vec![0.0; rowidx.len()];
        let mut local_slots = Vec::with_capacity(pairs_per_element * mesh.num_elements());
        let mut local_mass = Vec::with_capacity(pairs_per_element * mesh.num_elements());
        for e in 0..mesh.num_elements() {
            let nodes = mesh.nodes(e);
            let (ke, me) = local_matrices(mesh, e);
            let mut p = 0;
            for i in 0..k {
                for j in i..k {
                    let s = slot(nodes[i], nodes[j]);
                    stiffness[s] += ke[p];
                    mass[s] += me[p];
                    local_slots.push(s);
                    local_mass.push(me[p]);
                    p += 1;
                }
            }
        }
        let sym = SymbolicSparseColMatRef::new_checked(n, n, &colptr, None, &rowidx);
        let symbolic = factorize_symbolic_cholesky(sym, Side::Lower, SymmetricOrdering::Amd, Default::default())
            .map_err(|e| EigenError::Factorization(format!("{e:?}")))?;
        let diam = mesh.diameter();
        Ok(Self {
            mesh_id: mesh.id,
            n,
            colptr,
            rowidx,
            stiffness,
            mass,
            local_slots,
            local_mass,
            pairs_per_element,
            symbolic,
            base_scale: 1.0 / (diam * diam),
            settings: EigenSettings::default(),
        })
    }

    pub fn with_settings(mut self, settings: EigenSettings) -> Self {
        self.settings = settings;
        self
    }

    pub fn num_dofs(&self) -> usize {
        self.n
    }

    fn check(&self, design: &Design) -> Result<(), EigenError> {
        if design.mesh_id != self.mesh_id {
            return Err(EigenError::MeshMismatch {
                mesh: self.mesh_id,
                design: design.mesh_id,
            });
        }
        Ok(())
    }

    fn csc(&self, values: Vec<f64>) -> SymmetricCsc {
        SymmetricCsc {
            n: self.n,
            colptr: self.colptr.clone(),
            rowidx: self.rowidx.clone(),
            values,
        }
    }

    pub fn weighted_mass_values(&self, design: &Design) -> Result<Vec<f64>, EigenError> {
        self.check(design)?;
        let mut w = vec![0.0; self.rowidx.len()];
        let p = self.pairs_per_element;
        for (e, chunk) in self.local_slots.chunks(p).enumerate() {
            let weight = design.weight(e);
            for (q, &s) in chunk.iter().enumerate() {
                w[s] += weight * self.local_mass[e * p + q];
            }
        }
        Ok(w)
    }

    pub fn assemble(&self, design: &Design) -> Result<Assembled, EigenError> {
        let w = self.weighted_mass_values(design)?;
        Ok(Assembled {
            stiffness: self.csc(self.stiffness.clone()),
            mass: self.csc(self.mass.clone()),
            weighted_mass: self.csc(w),
        })
    }

    fn workspace(&self) -> Workspace {
        let par = Par::Seq;
        Workspace {
            shifted: vec![0.0; self.rowidx.len()],
            factor: vec![0.0; self.symbolic.len_val()],
            factor_mem: MemBuffer::new(self.symbolic.factorize_numeric_llt_scratch::<f64>(par, Default::default())),
            solve_mem: MemBuffer::new(self.symbolic.solve_in_place_scratch::<f64>(1, par)),
            kx: vec![0.0; self.n],
            wx: vec![0.0; self.n],
            mx: vec![0.0; self.n],
        }
    }

    fn factor(&self, ws: &mut Workspace) -> bool {
        let sym = SymbolicSparseColMatRef::new_checked(self.n, self.n, &self.colptr, None, &self.rowidx);
        let a = SparseColMatRef::new(sym, &ws.shifted);
        self.symbolic
            .factorize_numeric_llt(
                &mut ws.factor,
                a,
                Side::Lower,
                Default::default(),
                Par::Seq,
                MemStack::new(&mut ws.factor_mem),
                Default::default(),
            )
            .is_ok()
    }

    fn solve(&self, ws: &mut Workspace, rhs: &mut [f64]) {
        let llt = LltRef::new(&self.symbolic, &ws.factor);
        let n = self.n;
        llt.solve_in_place_with_conj(
            Conj::No,
            MatMut::from_column_major_slice_mut(rhs, n, 1),
            Par::Seq,
            MemStack::new(&mut ws.solve_mem),
        );
    }

    // M-normalises x in place and returns (xᵀ(K-λW)x, xᵀWx, scale-free residual)
    fn rayleigh(&self, ws: &mut Workspace, w: &[f64], lambda: f64, x: &mut [f64]) -> (f64, f64, f64) {
        sym_matvec(&self.colptr, &self.rowidx, &self.mass, x, &mut ws.mx);
        let mn = dot(x, &ws.mx).sqrt();
        x.iter_mut().for_each(|v| *v /= mn);
        ws.mx.iter_mut().for_each(|v| *v /= mn);
        sym_matvec(&self.colptr, &self.rowidx, &self.stiffness, x, &mut ws.kx);
        sym_matvec(&self.colptr, &self.rowidx, w, x, &mut ws.wx);
        let wq = dot(x, &ws.wx);
        let rho = dot(x, &ws.kx) - lambda * wq;
        let mut r2 = 0.0;
        for i in 0..self.n {
            let r = ws.kx[i] - lambda * ws.wx[i] - rho * ws.mx[i];
            r2 += r * r;
        }
        let scale = norm(&ws.kx) + lambda * norm(&ws.wx) + (rho.abs() + self.base_scale) * norm(&ws.mx);
        let res = if scale > 0.0 { r2.sqrt() / scale } else { 0.0 };
        (rho, wq, res)
    }

    // smallest eigenpair of (K - λW, M) by shifted inverse iteration
    fn rho_eval(&self, ws: &mut Workspace, w: &[f64], lambda: f64, start: &[f64]) -> Result<RhoEval, EigenError> {
        let scale = lambda.max(self.base_scale);
        let mut x = start.to_vec();
        let (mut est, _, _) = self.rayleigh(ws, w, lambda, &mut x);
        // σ > λ always gives an SPD matrix because ρ ≥ -λ
        let safe = lambda + 1e-3 * scale;
        let mut tau = 0.02 * scale;
        let mut iterations = 0usize;
        let mut last_res = f64::INFINITY;
        while iterations < self.settings.max_inner {
            let sigma = (-est + tau).min(safe);
            for (s, ((k, m), wv)) in ws.shifted.iter_mut().zip(self.stiffness.iter().zip(&self.mass).zip(w)) {
                *s = k - lambda * wv + sigma * m;
            }
            if !self.factor(ws) {
                if sigma >= safe {
                    return Err(EigenError::Factorization(format!(
                        "shifted operator not positive definite at lambda = {lambda}, sigma = {sigma}"
                    )));
                }
                tau *= 4.0;
                continue;
            }
            let mut rhs = vec![0.0; self.n];
            let mut prev_rho = est;
            for _ in 0..40 {
                iterations += 1;
                sym_matvec(&self.colptr, &self.rowidx, &self.mass, &x, &mut rhs);
                self.solve(ws, &mut rhs);
                if rhs.iter().sum::<f64>() < 0.0 {
                    rhs.iter_mut().for_each(|v| *v = -*v);
                }
                x.copy_from_slice(&rhs);
                let (rho, wq, res) = self.rayleigh(ws, w, lambda, &mut x);
                last_res = res;
                if res <= self.settings.inner_tol {
                    return Ok(RhoEval { rho, x, wq });
                }
                // stagnation at rounding level counts as converged
                if (rho - prev_rho).abs() <= 4.0 * f64::EPSILON * scale && res <= 1e3 * self.settings.inner_tol {
                    return Ok(RhoEval { rho, x, wq });
                }
                prev_rho = rho;
                est = rho;
                if iterations >= self.settings.max_inner {
                    break;
                }
            }
            // slow contraction: move the shift closer to the current estimate
            tau *= 0.25;
        }
        Err(EigenError::InnerNotConverged {
            lambda,
            residual: last_res,
            iterations,
        })
    }

    /// `ρ(λ)`: smallest eigenvalue of `(K - λW, M)`.
    pub fn rho(&self, design: &Design, lambda: f64) -> Result<f64, EigenError> {
        let w = self.weighted_mass_values(design)?;
        let mut ws = self.workspace();
        let start = vec![1.0; self.n];
        Ok(self.rho_eval(&mut ws, &w, lambda, &start)?.rho)
    }

    /// Principal eigenpair, optionally warm-started from a previous result
    /// (its `λ` seeds the bracket scan and its `u` the inverse iteration).
    pub fn principal(&self, design: &Design, hint: Option<&EigenResult>) -> Result<EigenResult, EigenError> {
        let w = self.weighted_mass_values(design)?;
        // 1ᵀW1 = ∫m
        let integral = self.quad(&w, &vec![1.0; self.n]);
        if integral >= 0.0 {
            return Err(EigenError::NonNegativeAverage { integral });
        }
        // with diagonal W, some xᵀWx > 0 (hence ρ → -∞) iff some W_ii > 0
        let favourable = (0..self.n).any(|c| w[self.colptr[c]] > 0.0);
        if !favourable {
            return Err(EigenError::Unresolved);
        }
        let mut ws = self.workspace();
        let tol = self.settings.rel_tol;
        let mut evals = 0usize;
        let mut start: Vec<f64> = match hint {
            Some(h) if h.u.len() == self.n => h.u.clone(),
            _ => vec![1.0; self.n],
        };
        let mut eval = |lambda: f64, start: &[f64], ws: &mut Workspace| {
            evals += 1;
            self.rho_eval(ws, &w, lambda, start)
        };

        // bracket: ρ(lo) > 0 > ρ(hi)
        let lam0 = hint.map_or(self.base_scale, |h| h.lambda);
        let first = eval(lam0, &start, &mut ws)?;
        let (mut lo, mut hi, mut at_hi);
        if first.rho < 0.0 {
            hi = lam0;
            at_hi = first;
            lo = lam0;
            let mut steps = 0;
            loop {
                lo *= 0.5;
                steps += 1;
                let r = eval(lo, &at_hi.x, &mut ws)?;
                if r.rho > 0.0 {
                    break;
                }
                hi = lo;
                at_hi = r;
                if steps > 200 {
                    return Err(EigenError::BracketExhausted { lo, hi });
                }
            }
        } else {
            lo = lam0;
            hi = lam0;
            start = first.x;
            let mut steps = 0;
            loop {
                hi *= 2.0;
                steps += 1;
                let r = eval(hi, &start, &mut ws)?;
                if r.rho < 0.0 {
                    at_hi = r;
                    break;
                }
                lo = hi;
                start = r.x;
                if steps > 200 {
                    return Err(EigenError::BracketExhausted { lo, hi });
                }
            }
        }

        // Newton from above, with a probe just below hi to certify the width
        for _ in 0..self.settings.max_outer {
            let newton = hi - at_hi.rho / (-at_hi.wq);
            let converged_rho = at_hi.rho.abs() <= 1e-13 * hi;
            if hi - lo <= tol * hi && (converged_rho || hi - newton <= 4.0 * f64::EPSILON * hi) {
                break;
            }
            let mut cand = if newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
            if hi - lo > tol * hi && hi - cand < 0.5 * tol * hi {
                cand = (hi * (1.0 - 0.5 * tol)).max(0.5 * (lo + hi));
            }
            if cand <= lo || cand >= hi {
                break;
            }
            let r = eval(cand, &at_hi.x, &mut ws)?;
            if r.rho < 0.0 {
                hi = cand;
                at_hi = r;
            } else if r.rho > 0.0 {
                lo = cand;
            } else {
                lo = cand;
                hi = cand;
                at_hi = r;
            }
        }

        let x = at_hi.x;
        let kq = self.quad(&self.stiffness, &x);
        let wq = self.quad(&w, &x);
        let rayleigh = kq / wq;
        let lambda = rayleigh;
        let umax = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let u: Vec<f64> = x.iter().map(|v| v / umax).collect();
        if let Some((node, &value)) = u.iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
            return Err(EigenError::NonPositiveEigenvector { node, value });
        }
        sym_matvec(&self.colptr, &self.rowidx, &self.stiffness, &u, &mut ws.kx);
        sym_matvec(&self.colptr, &self.rowidx, &w, &u, &mut ws.wx);
        sym_matvec(&self.colptr, &self.rowidx, &self.mass, &u, &mut ws.mx);
        let r: Vec<f64> = ws.kx.iter().zip(&ws.wx).map(|(k, wv)| k - lambda * wv).collect();
        let equation_residual = norm(&r) / norm(&ws.mx);
        Ok(EigenResult {
            lambda,
            u,
            rho_residual: at_hi.rho.abs(),
            rayleigh,
            equation_residual,
            iterations: evals,
        })
    }

    fn quad(&self, vals: &[f64], x: &[f64]) -> f64 {
        let mut y = vec![0.0; self.n];
        sym_matvec(&self.colptr, &self.rowidx, vals, x, &mut y);
        dot(x, &y)
    }
}

/// Stiffness, mass and weighted mass matrices of `design` on `mesh`.
pub fn assemble(mesh: &Mesh, design: &Design) -> Result<Assembled, EigenError> {
    Operators::new(mesh)?.assemble(design)
}

pub fn rho(mesh: &Mesh, design: &Design, lambda: f64) -> Result<f64, EigenError> {
    Operators::new(mesh)?.rho(design, lambda)
}

pub fn principal_lambda(mesh: &Mesh, design: &Design) -> Result<EigenResult, EigenError> {
    Operators::new(mesh)?.principal(design, None)
}
