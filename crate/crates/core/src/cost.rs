//! Cell cost: expected locational cost under the GP mean plus `β^{1/2}` times
//! the standard deviation of the locational cost under the GP covariance.
//!
//! Both terms are grid quadratures over the agent's cell with the sensing
//! function `f(q) = ½‖q − p‖²`. Gradients are exact derivatives of those
//! quadrature sums with the cell held fixed.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Cell, Point, VoronoiPartition};
use crate::gp::SparseGP;
use crate::scenario::DensityField;

/// Masses below this fall back to the geometric center.
pub const MASS_FLOOR: f64 = 1e-12;

/// Below this standard deviation the exploration gradient is zero.
pub const STD_FLOOR: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CostError {
    #[error("invalid quadrature spec: {0}")]
    InvalidQuadrature(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    /// Lattice stride for the single integrals.
    pub single_stride: usize,
    /// Upper bound on points used by the double integral.
    pub pair_budget: usize,
    /// Exploration weight.
    pub beta: f64,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self { single_stride: 1, pair_budget: 256, beta: 2.0 }
    }
}

impl QuadratureSpec {
    pub fn validate(&self) -> Result<(), CostError> {
        if self.single_stride == 0 {
            return Err(CostError::InvalidQuadrature("single_stride must be >= 1".into()));
        }
        if self.pair_budget < 4 {
            return Err(CostError::InvalidQuadrature("pair_budget must be >= 4".into()));
        }
        if !(self.beta.is_finite() && self.beta >= 0.0) {
            return Err(CostError::InvalidQuadrature(format!("beta must be >= 0, got {}", self.beta)));
        }
        Ok(())
    }
}

/// Equal-weight quadrature nodes whose weights sum to the cell area.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub points: Vec<Point>,
    pub weight: f64,
}

impl QuadratureRule {
    fn over(cell: &Cell<'_>, pixels: Vec<usize>) -> Self {
        let points: Vec<Point> = pixels.iter().map(|&p| cell.domain.center(p)).collect();
        let weight = if points.is_empty() { 0.0 } else { cell.area() / points.len() as f64 };
        Self { points, weight }
    }

    pub fn total_weight(&self) -> f64 {
        self.weight * self.points.len() as f64
    }
}

fn lattice(cell: &Cell<'_>, stride: usize) -> Vec<usize> {
    cell.pixels
        .iter()
        .copied()
        .filter(|&p| {
            let (col, row) = cell.domain.col_row(p);
            col % stride == 0 && row % stride == 0
        })
        .collect()
}

/// Pixels on the global `stride` lattice; all pixels if none fall on it.
pub fn single_rule(cell: &Cell<'_>, stride: usize) -> QuadratureRule {
    let mut picked = if stride <= 1 { cell.pixels.to_vec() } else { lattice(cell, stride) };
    if picked.is_empty() {
        picked = cell.pixels.to_vec();
    }
    QuadratureRule::over(cell, picked)
}

/// Deterministic stratified subsample with at most `budget` nodes: the whole
/// cell if it fits, else the coarsest-needed global lattice.
pub fn pair_rule(cell: &Cell<'_>, budget: usize) -> QuadratureRule {
    let n = cell.len();
    if n <= budget {
        return QuadratureRule::over(cell, cell.pixels.to_vec());
    }
    let mut stride = ((n as f64 / budget as f64).sqrt().floor() as usize).max(2);
    loop {
        let picked = lattice(cell, stride);
        if picked.is_empty() {
            // Thin cell that misses the lattice: even picks along the pixel list.
            let step = n.div_ceil(budget);
            let picked = cell.pixels.iter().copied().step_by(step).collect();
            return QuadratureRule::over(cell, picked);
        }
        if picked.len() <= budget {
            return QuadratureRule::over(cell, picked);
        }
        stride += 1;
    }
}

/// Ground-truth locational cost `Σ_i Σ_{q ∈ V_i} ½‖q − p_i‖² φ(q) · area`.
pub fn true_locational_cost(positions: &[Point], partition: &VoronoiPartition, density: &DensityField) -> f64 {
    let domain = partition.domain;
    let area = domain.pixel_area();
    partition
        .cells
        .iter()
        .zip(positions)
        .map(|(cell, p)| {
            cell.iter().map(|&idx| 0.5 * (domain.center(idx) - p).norm_squared() * density.values[idx]).sum::<f64>()
                * area
        })
        .sum()
}

fn weighted_mass_centroid(points: &[Point], values: &[f64], weight: f64) -> (f64, Option<Point>) {
    let mut mass = 0.0;
    let mut moment = Point::zeros();
    for (q, &v) in points.iter().zip(values) {
        let m = v.max(0.0) * weight;
        mass += m;
        moment += q * m;
    }
    if mass < MASS_FLOOR {
        (mass, None)
    } else {
        (mass, Some(moment / mass))
    }
}

/// Mass and centroid of a cell under a per-pixel field (aligned with
/// `cell.pixels`). Negative values count as zero.
pub fn mass_centroid(cell: &Cell<'_>, field: &[f64]) -> (f64, Point) {
    let points: Vec<Point> = cell.centers().collect();
    let (mass, centroid) = weighted_mass_centroid(&points, field, cell.domain.pixel_area());
    (mass, centroid.unwrap_or_else(|| cell.geometric_center()))
}

/// Exploitation term and its gradient.
pub fn expected_cost(cell: &Cell<'_>, pos: &Point, gp: &SparseGP, quad: &QuadratureSpec) -> (f64, Point) {
    let rule = single_rule(cell, quad.single_stride);
    let means = gp.means(&rule.points);
    expected_from_rule(&rule, &means, pos)
}

fn expected_from_rule(rule: &QuadratureRule, means: &[f64], pos: &Point) -> (f64, Point) {
    let mut value = 0.0;
    let mut grad = Point::zeros();
    for (q, &mu) in rule.points.iter().zip(means) {
        let m = mu.max(0.0) * rule.weight;
        let d = q - pos;
        value += 0.5 * d.norm_squared() * m;
        grad -= d * m;
    }
    (value, grad)
}

/// Exploration term before and after the square root.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VarianceTerm {
    /// Quadrature variance, not clamped.
    pub variance: f64,
    pub std: f64,
    pub grad_std: Point,
}

/// Variance of the cell's locational cost under the posterior covariance.
pub fn variance_term(cell: &Cell<'_>, pos: &Point, gp: &SparseGP, quad: &QuadratureSpec) -> VarianceTerm {
    let rule = pair_rule(cell, quad.pair_budget);
    let cov = gp.covariance(&rule.points);
    variance_from_rule(&rule, &cov, pos)
}

fn variance_from_rule(rule: &QuadratureRule, cov: &nalgebra::DMatrix<f64>, pos: &Point) -> VarianceTerm {
    let n = rule.points.len();
    if n == 0 {
        return VarianceTerm { variance: 0.0, std: 0.0, grad_std: Point::zeros() };
    }
    let w = rule.weight;
    let a = nalgebra::DVector::from_iterator(n, rule.points.iter().map(|q| (q - pos).norm_squared() * w));
    let ca = cov * &a;
    let variance = 0.25 * a.dot(&ca);
    let std = variance.max(0.0).sqrt();
    let grad_std = if std < STD_FLOOR {
        Point::zeros()
    } else {
        let s: Point = rule.points.iter().zip(ca.iter()).map(|(q, c)| (q - pos) * (w * c)).sum();
        -s / (2.0 * std)
    };
    VarianceTerm { variance, std, grad_std }
}

/// `(std, grad_std)` of the exploration term.
pub fn variance_cost(cell: &Cell<'_>, pos: &Point, gp: &SparseGP, quad: &QuadratureSpec) -> (f64, Point) {
    let t = variance_term(cell, pos, gp, quad);
    (t.std, t.grad_std)
}

/// Everything an agent needs from its cell for one control step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellCostReport {
    pub expected: f64,
    pub std: f64,
    pub total: f64,
    pub grad_expected: Point,
    pub grad_std: Point,
    /// `grad_expected + β^{1/2} · grad_std`.
    pub gradient: Point,
    pub mass: f64,
    pub centroid: Point,
}

pub fn cell_cost_report(cell: &Cell<'_>, pos: &Point, gp: &SparseGP, quad: &QuadratureSpec) -> CellCostReport {
    let single = single_rule(cell, quad.single_stride);
    let means = gp.means(&single.points);
    let (expected, grad_expected) = expected_from_rule(&single, &means, pos);
    let (mass, centroid) = weighted_mass_centroid(&single.points, &means, single.weight);
    let centroid = centroid.unwrap_or_else(|| if cell.is_empty() { *pos } else { cell.geometric_center() });

    let var = variance_term(cell, pos, gp, quad);
    let scale = quad.beta.sqrt();
    CellCostReport {
        expected,
        std: var.std,
        total: expected + scale * var.std,
        grad_expected,
        grad_std: var.grad_std,
        gradient: grad_expected + var.grad_std * scale,
        mass,
        centroid,
    }
}
