//! Grid Voronoi partition, Delaunay neighbor graph, and graph Laplacian.
//!
//! The domain is a rectangle of `width × height` pixels. A pixel belongs to
//! the agent closest to its center; equidistant pixels go to the lowest agent
//! index. Two agents are neighbors when their cells contain 4-adjacent pixels.

use std::collections::BTreeSet;

use nalgebra::{DMatrix, Vector2};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// A planar point or vector in world units.
pub type Point = Vector2<f64>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("agent {agent} at ({x}, {y}) lies outside the domain")]
    OutsideDomain { agent: usize, x: f64, y: f64 },
    #[error("at least one agent is required")]
    NoAgents,
    #[error("invalid domain: {0}")]
    InvalidDomain(String),
    #[error("neighbor relation is not symmetric: {0} lists {1} but not vice versa")]
    Asymmetric(usize, usize),
    #[error("agent {0} lists itself as a neighbor")]
    SelfLoop(usize),
    #[error("neighbor index {index} out of range for {n} agents")]
    IndexOutOfRange { index: usize, n: usize },
}

/// Rectangular pixel grid with a world-unit pixel size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    pub width: usize,
    pub height: usize,
    #[serde(default = "default_cell_size")]
    pub cell_size: f64,
}

fn default_cell_size() -> f64 {
    1.0
}

impl Domain {
    pub fn new(width: usize, height: usize) -> Result<Self, GeometryError> {
        Self::with_cell_size(width, height, 1.0)
    }

    pub fn with_cell_size(width: usize, height: usize, cell_size: f64) -> Result<Self, GeometryError> {
        let domain = Self { width, height, cell_size };
        domain.validate()?;
        Ok(domain)
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        if self.width == 0 || self.height == 0 {
            return Err(GeometryError::InvalidDomain(format!(
                "grid must be at least 1x1, got {}x{}",
                self.width, self.height
            )));
        }
        if !(self.cell_size.is_finite() && self.cell_size > 0.0) {
            return Err(GeometryError::InvalidDomain(format!("cell size must be positive, got {}", self.cell_size)));
        }
        Ok(())
    }

    pub fn num_pixels(&self) -> usize {
        self.width * self.height
    }

    /// World-unit extent along x.
    pub fn world_width(&self) -> f64 {
        self.width as f64 * self.cell_size
    }

    pub fn world_height(&self) -> f64 {
        self.height as f64 * self.cell_size
    }

    /// Area of one pixel in world units.
    pub fn pixel_area(&self) -> f64 {
        self.cell_size * self.cell_size
    }

    /// Row-major pixel index.
    pub fn index(&self, col: usize, row: usize) -> usize {
        row * self.width + col
    }

    pub fn col_row(&self, index: usize) -> (usize, usize) {
        (index % self.width, index / self.width)
    }

    pub fn center(&self, index: usize) -> Point {
        let (col, row) = self.col_row(index);
        Point::new((col as f64 + 0.5) * self.cell_size, (row as f64 + 0.5) * self.cell_size)
    }

    /// Closed rectangle test.
    pub fn contains(&self, p: &Point) -> bool {
        p.x >= 0.0 && p.y >= 0.0 && p.x <= self.world_width() && p.y <= self.world_height()
    }

    /// Euclidean projection onto the closed domain rectangle.
    pub fn clamp(&self, p: &Point) -> Point {
        Point::new(p.x.clamp(0.0, self.world_width()), p.y.clamp(0.0, self.world_height()))
    }

    /// Center of the rectangle.
    pub fn midpoint(&self) -> Point {
        Point::new(0.5 * self.world_width(), 0.5 * self.world_height())
    }
}

/// Graph Laplacian `L = D − A` of an undirected, loop-free graph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Laplacian(DMatrix<i64>);

impl Laplacian {
    pub fn matrix(&self) -> &DMatrix<i64> {
        &self.0
    }

    pub fn size(&self) -> usize {
        self.0.nrows()
    }

    pub fn degree(&self, i: usize) -> usize {
        self.0[(i, i)] as usize
    }

    pub fn max_degree(&self) -> usize {
        (0..self.size()).map(|i| self.degree(i)).max().unwrap_or(0)
    }

    pub fn edge_count(&self) -> usize {
        (0..self.size()).map(|i| self.degree(i)).sum::<usize>() / 2
    }

    pub fn to_f64(&self) -> DMatrix<f64> {
        self.0.map(|v| v as f64)
    }

    pub fn get(&self, i: usize, j: usize) -> i64 {
        self.0[(i, j)]
    }
}

/// Builds `L = D − A` from per-agent neighbor sets.
pub fn laplacian_of(neighbors: &[BTreeSet<usize>]) -> Result<Laplacian, GeometryError> {
    let n = neighbors.len();
    let mut lap = DMatrix::<i64>::zeros(n, n);
    for (i, set) in neighbors.iter().enumerate() {
        for &j in set {
            if j >= n {
                return Err(GeometryError::IndexOutOfRange { index: j, n });
            }
            if j == i {
                return Err(GeometryError::SelfLoop(i));
            }
            if !neighbors[j].contains(&i) {
                return Err(GeometryError::Asymmetric(i, j));
            }
            lap[(i, j)] = -1;
        }
        lap[(i, i)] = set.len() as i64;
    }
    Ok(Laplacian(lap))
}

/// Pixels owned by one agent, with enough context to turn them into points.
#[derive(Debug, Clone, Copy)]
pub struct Cell<'a> {
    pub domain: Domain,
    pub pixels: &'a [usize],
}

impl<'a> Cell<'a> {
    pub fn new(domain: Domain, pixels: &'a [usize]) -> Self {
        Self { domain, pixels }
    }

    pub fn len(&self) -> usize {
        self.pixels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }

    pub fn area(&self) -> f64 {
        self.pixels.len() as f64 * self.domain.pixel_area()
    }

    pub fn centers(&self) -> impl Iterator<Item = Point> + '_ {
        self.pixels.iter().map(move |&p| self.domain.center(p))
    }

    /// Unweighted mean of the pixel centers; the domain midpoint for an empty cell.
    pub fn geometric_center(&self) -> Point {
        if self.pixels.is_empty() {
            return self.domain.midpoint();
        }
        let sum = self.centers().fold(Point::zeros(), |acc, c| acc + c);
        sum / self.pixels.len() as f64
    }

    /// Bounding box of the pixel centers as (min, max).
    pub fn bounding_box(&self) -> Option<(Point, Point)> {
        let mut it = self.centers();
        let first = it.next()?;
        Some(it.fold((first, first), |(lo, hi), c| {
            (Point::new(lo.x.min(c.x), lo.y.min(c.y)), Point::new(hi.x.max(c.x), hi.y.max(c.y)))
        }))
    }
}

/// Cell ownership, neighbor graph, and Laplacian for one agent configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct VoronoiPartition {
    pub domain: Domain,
    /// Owner of every pixel, row-major.
    pub owner: Vec<usize>,
    /// Owned pixel indices per agent, ascending.
    pub cells: Vec<Vec<usize>>,
    pub neighbors: Vec<BTreeSet<usize>>,
    pub laplacian: Laplacian,
}

impl VoronoiPartition {
    pub fn num_agents(&self) -> usize {
        self.cells.len()
    }

    pub fn cell(&self, agent: usize) -> Cell<'_> {
        Cell::new(self.domain, &self.cells[agent])
    }

    /// Undirected edges `(i, j)` with `i < j`, sorted.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        self.neighbors
            .iter()
            .enumerate()
            .flat_map(|(i, set)| set.iter().filter(move |&&j| j > i).map(move |&j| (i, j)))
            .collect()
    }
}

/// Nearest-agent assignment of every pixel plus the induced neighbor graph.
pub fn compute_partition(positions: &[Point], domain: &Domain) -> Result<VoronoiPartition, GeometryError> {
    domain.validate()?;
    if positions.is_empty() {
        return Err(GeometryError::NoAgents);
    }
    for (agent, p) in positions.iter().enumerate() {
        if !(p.x.is_finite() && p.y.is_finite()) || !domain.contains(p) {
            return Err(GeometryError::OutsideDomain { agent, x: p.x, y: p.y });
        }
    }

    let n = positions.len();
    let mut owner = vec![0usize; domain.num_pixels()];
    let mut cells = vec![Vec::new(); n];
    for (idx, slot) in owner.iter_mut().enumerate() {
        let c = domain.center(idx);
        let mut best = 0;
        let mut best_d = (c - positions[0]).norm_squared();
        for (j, p) in positions.iter().enumerate().skip(1) {
            let d = (c - p).norm_squared();
            if d < best_d {
                best = j;
                best_d = d;
            }
        }
        *slot = best;
        cells[best].push(idx);
    }

    let mut neighbors = vec![BTreeSet::new(); n];
    for row in 0..domain.height {
        for col in 0..domain.width {
            let a = owner[domain.index(col, row)];
            if col + 1 < domain.width {
                let b = owner[domain.index(col + 1, row)];
                if a != b {
                    neighbors[a].insert(b);
                    neighbors[b].insert(a);
                }
            }
            if row + 1 < domain.height {
                let b = owner[domain.index(col, row + 1)];
                if a != b {
                    neighbors[a].insert(b);
                    neighbors[b].insert(a);
                }
            }
        }
    }

    let laplacian = laplacian_of(&neighbors)?;
    Ok(VoronoiPartition { domain: *domain, owner, cells, neighbors, laplacian })
}
