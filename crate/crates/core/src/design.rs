//! Piecewise-constant bang-bang weights on a mesh.
//!
//! A design stores, per element, the filled fraction `θ_e ∈ [0, 1]` of the
//! favourable set. The weight is `1` where `θ = 1`, `-β` where `θ = 0`, and
//! the mixture `-β + (1+β)θ` on the single element allowed to be partially
//! filled.

use thiserror::Error;

use crate::mesh::Mesh;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DesignError {
    #[error("delta = {delta} is not admissible: need 0 < delta < beta|Omega|/(beta+1) = {bound}")]
    Inadmissible { delta: f64, bound: f64 },
    #[error("beta must be positive, got {0}")]
    InvalidBeta(f64),
    #[error("fill has {got} entries, mesh has {expected} elements")]
    WrongLength { got: usize, expected: usize },
    #[error("fill value {value} of element {element} outside [0, 1]")]
    FillOutOfRange { element: usize, value: f64 },
    #[error("elements {0} and {1} are both partially filled")]
    TwoFractional(usize, usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Design {
    pub mesh_id: u64,
    pub beta: f64,
    pub fill: Vec<f64>,
    /// Measure of the favourable set, `Σ |e| θ_e`.
    pub delta: f64,
}

/// Largest admissible favourable measure, `β|Ω|/(β+1)` (exclusive).
pub fn admissible_bound(mesh: &Mesh, beta: f64) -> f64 {
    beta * mesh.domain_measure / (beta + 1.0)
}

pub fn check_admissible(mesh: &Mesh, beta: f64, delta: f64) -> Result<(), DesignError> {
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(DesignError::InvalidBeta(beta));
    }
    let bound = admissible_bound(mesh, beta);
    if !(delta > 0.0 && delta < bound) {
        return Err(DesignError::Inadmissible { delta, bound });
    }
    Ok(())
}

// relative slack under which a nearly full or nearly empty element snaps
const SNAP: f64 = 1e-10;

impl Design {
    pub fn from_fill(mesh: &Mesh, beta: f64, fill: Vec<f64>) -> Result<Self, DesignError> {
        if fill.len() != mesh.num_elements() {
            return Err(DesignError::WrongLength {
                got: fill.len(),
                expected: mesh.num_elements(),
            });
        }
        let mut fractional: Option<usize> = None;
        for (e, &t) in fill.iter().enumerate() {
            if !(0.0..=1.0).contains(&t) {
                return Err(DesignError::FillOutOfRange { element: e, value: t });
            }
            if t > 0.0 && t < 1.0 {
                if let Some(f) = fractional {
                    return Err(DesignError::TwoFractional(f, e));
                }
                fractional = Some(e);
            }
        }
        let delta = fill.iter().zip(&mesh.element_measure).map(|(t, m)| t * m).sum();
        check_admissible(mesh, beta, delta)?;
        Ok(Self {
            mesh_id: mesh.id,
            beta,
            fill,
            delta,
        })
    }

    /// Fills elements in the given order until the favourable measure is
    /// `delta`; the element where the target is reached is filled partially.
    pub fn greedy(mesh: &Mesh, beta: f64, order: &[usize], delta: f64) -> Result<Self, DesignError> {
        check_admissible(mesh, beta, delta)?;
        let mut fill = vec![0.0; mesh.num_elements()];
        let mut remaining = delta;
        for &e in order {
            let m = mesh.element_measure[e];
            if remaining >= m * (1.0 - SNAP) {
                fill[e] = 1.0;
                remaining -= m;
            } else {
                if remaining > m * SNAP {
                    fill[e] = remaining / m;
                }
                remaining = 0.0;
            }
            if remaining <= 0.0 {
                break;
            }
        }
        Self::from_fill(mesh, beta, fill)
    }

    pub fn weight(&self, e: usize) -> f64 {
        let t = self.fill[e];
        if t >= 1.0 {
            1.0
        } else if t <= 0.0 {
            -self.beta
        } else {
            -self.beta + (1.0 + self.beta) * t
        }
    }

    pub fn weights(&self) -> Vec<f64> {
        (0..self.fill.len()).map(|e| self.weight(e)).collect()
    }

    pub fn fractional_element(&self) -> Option<usize> {
        self.fill.iter().position(|&t| t > 0.0 && t < 1.0)
    }

    /// `∫_Ω m`.
    pub fn weight_integral(&self, mesh: &Mesh) -> f64 {
        (0..self.fill.len()).map(|e| mesh.element_measure[e] * self.weight(e)).sum()
    }

    /// Measure of the symmetric difference of the favourable sets, counting
    /// partial elements by their fill.
    pub fn symmetric_difference(&self, other: &Design, mesh: &Mesh) -> f64 {
        self.fill
            .iter()
            .zip(&other.fill)
            .zip(&mesh.element_measure)
            .map(|((a, b), m)| (a - b).abs() * m)
            .sum()
    }

    /// Favourable set of a 1D design as a union of intervals. A partial
    /// element extends the run it touches (to the left if it touches none).
    pub fn intervals(&self, mesh: &Mesh) -> Vec<(f64, f64)> {
        let mut order: Vec<usize> = (0..mesh.num_elements()).collect();
        let left = |e: usize| mesh.vertices[mesh.nodes(e)[0]][0];
        let right = |e: usize| mesh.vertices[mesh.nodes(e)[1]][0];
        order.sort_by(|&a, &b| left(a).total_cmp(&left(b)));
        let mut out: Vec<(f64, f64)> = Vec::new();
        let mut pos = 0;
        while pos < order.len() {
            let e = order[pos];
            if self.fill[e] <= 0.0 {
                pos += 1;
                continue;
            }
            let mut start = left(e);
            let mut end = if self.fill[e] >= 1.0 {
                right(e)
            } else {
                left(e) + self.fill[e] * mesh.element_measure[e]
            };
            let first_partial = self.fill[e] < 1.0;
            let run_start = pos;
            pos += 1;
            while pos < order.len() && self.fill[order[pos]] > 0.0 {
                let f = order[pos];
                end = if self.fill[f] >= 1.0 {
                    right(f)
                } else {
                    left(f) + self.fill[f] * mesh.element_measure[f]
                };
                pos += 1;
            }
            if first_partial && pos > run_start + 1 {
                // partial element on the left of a run hugs the run
                start = right(e) - self.fill[e] * mesh.element_measure[e];
            }
            out.push((start, end));
        }
        out
    }
}
