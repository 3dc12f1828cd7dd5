//! Ground-truth density fields.
//!
//! Canonical scenarios are defined on a 960 × 540 world. Other domains scale
//! centers and spreads by `world_width / 960`; the hotspot centers are
//! fractions of the domain and scale on their own.

use std::io::Write;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Domain, Point};

pub const CANONICAL_WIDTH: f64 = 960.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScenarioError {
    #[error("unknown scenario `{0}`")]
    Unknown(String),
    #[error("invalid scenario parameters: {0}")]
    InvalidParams(String),
    #[error("point ({0}, {1}) lies outside the domain")]
    OutsideDomain(f64, f64),
    #[error("field has {got} values but the domain has {expected} pixels")]
    SizeMismatch { expected: usize, got: usize },
    #[error("density value {value} at pixel {index} is negative or not finite")]
    BadValue { index: usize, value: f64 },
}

/// One isotropic Gaussian bump.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bump {
    pub center: [f64; 2],
    pub sigma: f64,
    pub amplitude: f64,
}

/// Sum of isotropic Gaussians plus a constant background.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct GaussianMixture {
    pub bumps: Vec<Bump>,
    #[serde(default)]
    pub background: f64,
}

impl GaussianMixture {
    pub fn validate(&self) -> Result<(), ScenarioError> {
        if !(self.background.is_finite() && self.background >= 0.0) {
            return Err(ScenarioError::InvalidParams(format!("background {} < 0", self.background)));
        }
        for b in &self.bumps {
            let ok = b.sigma.is_finite()
                && b.sigma > 0.0
                && b.amplitude.is_finite()
                && b.amplitude >= 0.0
                && b.center.iter().all(|c| c.is_finite());
            if !ok {
                return Err(ScenarioError::InvalidParams(format!("bad bump {b:?}")));
            }
        }
        Ok(())
    }

    pub fn eval(&self, p: &Point) -> f64 {
        self.background
            + self
                .bumps
                .iter()
                .map(|b| {
                    let d2 = (p - Point::new(b.center[0], b.center[1])).norm_squared();
                    b.amplitude * (-0.5 * d2 / (b.sigma * b.sigma)).exp()
                })
                .sum::<f64>()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Scenario {
    FourGaussians,
    SinglePeak,
    Uniform,
    Hotspots,
    Custom(GaussianMixture),
}

impl Scenario {
    pub fn name(&self) -> &'static str {
        match self {
            Scenario::FourGaussians => "four_gaussians",
            Scenario::SinglePeak => "single_peak",
            Scenario::Uniform => "uniform",
            Scenario::Hotspots => "hotspots",
            Scenario::Custom(_) => "custom",
        }
    }

    /// The analytic mixture this scenario describes on `domain`.
    pub fn mixture(&self, domain: &Domain) -> GaussianMixture {
        let w = domain.world_width();
        let h = domain.world_height();
        let scale = w / CANONICAL_WIDTH;
        let bump = |x: f64, y: f64, sigma: f64, amplitude: f64| Bump { center: [x, y], sigma, amplitude };
        match self {
            Scenario::FourGaussians => GaussianMixture {
                bumps: [(100.0, 100.0), (850.0, 450.0), (100.0, 450.0), (850.0, 100.0)]
                    .iter()
                    .map(|&(x, y)| bump(x * scale, y * scale, 10.0 * scale, 1.0))
                    .collect(),
                background: 0.0,
            },
            Scenario::Hotspots => GaussianMixture {
                bumps: vec![
                    bump(0.2 * w, 0.3 * h, 80.0 * scale, 150.0),
                    bump(0.8 * w, 0.7 * h, 120.0 * scale, 150.0),
                    bump(0.6 * w, 0.2 * h, 60.0 * scale, 150.0),
                ],
                background: 20.0,
            },
            Scenario::SinglePeak => {
                GaussianMixture { bumps: vec![bump(0.5 * w, 0.5 * h, 80.0 * scale, 150.0)], background: 0.0 }
            }
            Scenario::Uniform => GaussianMixture { bumps: Vec::new(), background: 1.0 },
            Scenario::Custom(m) => m.clone(),
        }
    }
}

impl FromStr for Scenario {
    type Err = ScenarioError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "four_gaussians" | "fourgaussians" => Ok(Scenario::FourGaussians),
            "single_peak" | "singlepeak" => Ok(Scenario::SinglePeak),
            "uniform" => Ok(Scenario::Uniform),
            "hotspots" => Ok(Scenario::Hotspots),
            _ => Err(ScenarioError::Unknown(s.to_string())),
        }
    }
}

/// Non-negative density sampled at pixel centers.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityField {
    pub domain: Domain,
    pub values: Vec<f64>,
    pub analytic: Option<GaussianMixture>,
}

impl DensityField {
    pub fn from_values(domain: Domain, values: Vec<f64>) -> Result<Self, ScenarioError> {
        if values.len() != domain.num_pixels() {
            return Err(ScenarioError::SizeMismatch { expected: domain.num_pixels(), got: values.len() });
        }
        if let Some((index, &value)) = values.iter().enumerate().find(|(_, v)| !(v.is_finite() && **v >= 0.0)) {
            return Err(ScenarioError::BadValue { index, value });
        }
        Ok(Self { domain, values, analytic: None })
    }

    pub fn from_mixture(domain: Domain, mixture: GaussianMixture) -> Result<Self, ScenarioError> {
        mixture.validate()?;
        let values = (0..domain.num_pixels()).map(|i| mixture.eval(&domain.center(i))).collect();
        Ok(Self { domain, values, analytic: Some(mixture) })
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    pub fn at_pixel(&self, col: usize, row: usize) -> f64 {
        self.values[self.domain.index(col, row)]
    }

    /// Bilinear interpolation between pixel centers, constant past the outer centers.
    pub fn bilinear(&self, p: &Point) -> Result<f64, ScenarioError> {
        if !self.domain.contains(p) {
            return Err(ScenarioError::OutsideDomain(p.x, p.y));
        }
        let d = &self.domain;
        let axis = |coord: f64, n: usize| {
            let u = (coord / d.cell_size - 0.5).clamp(0.0, (n - 1) as f64);
            let i0 = (u.floor() as usize).min(n - 1);
            let i1 = (i0 + 1).min(n - 1);
            (i0, i1, u - i0 as f64)
        };
        let (c0, c1, fx) = axis(p.x, d.width);
        let (r0, r1, fy) = axis(p.y, d.height);
        let top = self.at_pixel(c0, r0) * (1.0 - fx) + self.at_pixel(c1, r0) * fx;
        let bottom = self.at_pixel(c0, r1) * (1.0 - fx) + self.at_pixel(c1, r1) * fx;
        Ok(top * (1.0 - fy) + bottom * fy)
    }

    /// Grid as CSV: one line per row, `.` decimals.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for row in 0..self.domain.height {
            let line: Vec<String> = (0..self.domain.width).map(|col| self.at_pixel(col, row).to_string()).collect();
            writeln!(out, "{}", line.join(","))?;
        }
        Ok(())
    }
}

pub fn build_scenario(scenario: &Scenario, domain: &Domain) -> Result<DensityField, ScenarioError> {
    domain.validate().map_err(|e| ScenarioError::InvalidParams(e.to_string()))?;
    DensityField::from_mixture(*domain, scenario.mixture(domain))
}

/// Noisy point measurement `φ(p) + ε`, `ε ~ N(0, noise_sigma²)`.
pub fn sample_density<R: Rng + ?Sized>(
    field: &DensityField,
    p: &Point,
    noise_sigma: f64,
    rng: &mut R,
) -> Result<f64, ScenarioError> {
    let value = field.bilinear(p)?;
    if noise_sigma > 0.0 {
        let noise = Normal::new(0.0, noise_sigma).map_err(|e| ScenarioError::InvalidParams(e.to_string()))?.sample(rng);
        Ok(value + noise)
    } else {
        Ok(value)
    }
}
