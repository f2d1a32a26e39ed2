//! Skew normal density and its integration over layer-index bins.
//!
//! The density is the standard unit-mass form
//!
//! ```text
//! f(x) = 2/ω · φ((x-ξ)/ω) · Φ(α(x-ξ)/ω)
//! ```
//!
//! where `φ`/`Φ` are the standard normal density and distribution function.
//! Bin masses are computed with the composite trapezoidal rule plus its
//! Euler–Maclaurin end correction `-h²/12·(f'(b) - f'(a))`, which lifts the
//! error from O(h²) to O(h⁴) at the cost of two derivative evaluations.
//! Plain trapezoid at 128 sub-intervals leaves up to ~1e-5 per bin on the
//! narrowest grid members (ω = 0.5); the corrected rule stays below 1e-9.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Trapezoid sub-intervals per layer bin unless overridden.
pub const DEFAULT_SUBDIVISIONS: usize = 128;

const FRAC_2_SQRT_PI: f64 = std::f64::consts::FRAC_2_SQRT_PI;

/// Beyond this |x|, `1 - |erf(x)|` is below 2.2e-17 and erf rounds to ±1.
const ERF_SATURATION: f64 = 6.0;

/// Crossover between the power series and the continued fraction.
const ERF_SERIES_LIMIT: f64 = 3.0;

/// Location, scale and shape of a skew normal distribution, in layer-index
/// units for location and scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SkewNormalParams {
    pub xi: f64,
    pub omega: f64,
    pub alpha: f64,
}

impl SkewNormalParams {
    pub fn new(xi: f64, omega: f64, alpha: f64) -> Result<Self> {
        let params = SkewNormalParams { xi, omega, alpha };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.xi.is_finite() && self.omega.is_finite() && self.alpha.is_finite()) {
            return Err(Error::domain(format!(
                "skew normal parameters must be finite, got {self:?}"
            )));
        }
        if self.omega <= 0.0 {
            return Err(Error::domain(format!(
                "scale omega must be positive, got {}",
                self.omega
            )));
        }
        Ok(())
    }

    /// Analytic mean `ξ + ω·δ·√(2/π)` with `δ = α/√(1+α²)`.
    pub fn mean(&self) -> f64 {
        let delta = self.alpha / (1.0 + self.alpha * self.alpha).sqrt();
        self.xi + self.omega * delta * (2.0 / PI).sqrt()
    }
}

/// How the real line is cut into layer bins.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BinConvention {
    /// Layer `i` (1-based) covers `[i-1, i]`; the layer range is `[0, L]`.
    #[default]
    LeftClosed,
    /// Layer `i` covers `[i-0.5, i+0.5]`, centered on the integer index.
    Centered,
}

impl BinConvention {
    /// Interval `[lo, hi]` of 1-based layer `layer`.
    pub fn bounds(self, layer: usize) -> (f64, f64) {
        let i = layer as f64;
        match self {
            BinConvention::LeftClosed => (i - 1.0, i),
            BinConvention::Centered => (i - 0.5, i + 0.5),
        }
    }

    /// Midpoint of the whole layer range for `layer_count` layers.
    pub fn midpoint(self, layer_count: usize) -> f64 {
        let (lo, _) = self.bounds(1);
        let (_, hi) = self.bounds(layer_count);
        0.5 * (lo + hi)
    }

    pub fn name(self) -> &'static str {
        match self {
            BinConvention::LeftClosed => "left-closed",
            BinConvention::Centered => "centered",
        }
    }
}

impl std::str::FromStr for BinConvention {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "left-closed" | "left" => Ok(BinConvention::LeftClosed),
            "centered" => Ok(BinConvention::Centered),
            other => Err(Error::domain(format!("unknown bin convention `{other}`"))),
        }
    }
}

/// Probability mass integrated over each layer bin.
#[derive(Debug, Clone, PartialEq)]
pub struct BinMasses {
    pub masses: Vec<f64>,
    pub layer_count: usize,
    pub subdivisions: usize,
    pub convention: BinConvention,
}

impl BinMasses {
    /// Mass falling inside the layer range; whatever lies outside is lost.
    pub fn captured(&self) -> f64 {
        self.masses.iter().sum()
    }
}

/// Error function, accurate to about 1e-15 absolute over the real line.
pub fn erf(x: f64) -> Result<f64> {
    if !x.is_finite() {
        return Err(Error::domain(format!("erf of non-finite value {x}")));
    }
    Ok(erf_finite(x))
}

pub(crate) fn erf_finite(x: f64) -> f64 {
    let ax = x.abs();
    let magnitude = if ax < ERF_SERIES_LIMIT {
        erf_series(ax)
    } else if ax < ERF_SATURATION {
        1.0 - erfc_continued_fraction(ax)
    } else {
        1.0
    };
    magnitude.copysign(x)
}

// erf(x) = 2/√π · e^{-x²} · Σ 2ⁿ x^{2n+1} / (1·3·…·(2n+1)); every term is
// positive so nothing cancels.
fn erf_series(x: f64) -> f64 {
    let x2 = x * x;
    let mut term = x;
    let mut sum = x;
    let mut n = 0.0;
    loop {
        n += 1.0;
        term *= 2.0 * x2 / (2.0 * n + 1.0);
        sum += term;
        if term <= sum * 1e-17 {
            break;
        }
    }
    FRAC_2_SQRT_PI * (-x2).exp() * sum
}

// erfc(x) = e^{-x²}/√π · 1/(x + (1/2)/(x + (2/2)/(x + (3/2)/(x + …)))),
// evaluated bottom-up. 60 levels converge to machine precision for x ≥ 3.
fn erfc_continued_fraction(x: f64) -> f64 {
    let mut tail = x;
    for k in (1..=60).rev() {
        tail = x + 0.5 * k as f64 / tail;
    }
    (-x * x).exp() / (PI.sqrt() * tail)
}

/// Skew normal density at `x`.
pub fn pdf(params: &SkewNormalParams, x: f64) -> f64 {
    let z = (x - params.xi) / params.omega;
    let normal = (-0.5 * z * z).exp() / (params.omega * (2.0 * PI).sqrt());
    let skew = 0.5 * (1.0 + erf_finite(params.alpha * z * FRAC_1_SQRT_2));
    2.0 * normal * skew
}

/// Derivative of the density with respect to `x`.
pub fn pdf_derivative(params: &SkewNormalParams, x: f64) -> f64 {
    let z = (x - params.xi) / params.omega;
    let inv_sqrt_2pi = 1.0 / (2.0 * PI).sqrt();
    let phi = (-0.5 * z * z).exp() * inv_sqrt_2pi;
    let az = params.alpha * z;
    let cdf = 0.5 * (1.0 + erf_finite(az * FRAC_1_SQRT_2));
    let phi_a = (-0.5 * az * az).exp() * inv_sqrt_2pi;
    2.0 * phi * (params.alpha * phi_a - z * cdf) / (params.omega * params.omega)
}

/// Composite trapezoidal integral of the density over `[lo, hi]`.
pub fn trapezoid(params: &SkewNormalParams, lo: f64, hi: f64, subdivisions: usize) -> f64 {
    let h = (hi - lo) / subdivisions as f64;
    let interior: f64 = (1..subdivisions)
        .map(|k| pdf(params, lo + k as f64 * h))
        .sum();
    h * (0.5 * (pdf(params, lo) + pdf(params, hi)) + interior)
}

/// Trapezoid with the first Euler–Maclaurin end correction.
pub fn corrected_trapezoid(
    params: &SkewNormalParams,
    lo: f64,
    hi: f64,
    subdivisions: usize,
) -> f64 {
    let h = (hi - lo) / subdivisions as f64;
    trapezoid(params, lo, hi, subdivisions)
        - h * h / 12.0 * (pdf_derivative(params, hi) - pdf_derivative(params, lo))
}

/// Integrate the density over each of `layer_count` bins using the default
/// bin convention.
pub fn bin_masses(
    params: &SkewNormalParams,
    layer_count: usize,
    subdivisions: usize,
) -> Result<BinMasses> {
    bin_masses_with(params, layer_count, subdivisions, BinConvention::default())
}

pub fn bin_masses_with(
    params: &SkewNormalParams,
    layer_count: usize,
    subdivisions: usize,
    convention: BinConvention,
) -> Result<BinMasses> {
    params.validate()?;
    if layer_count == 0 {
        return Err(Error::domain("layer count must be at least 1"));
    }
    if subdivisions == 0 {
        return Err(Error::domain("subdivisions must be at least 1"));
    }
    let masses = (1..=layer_count)
        .map(|layer| {
            let (lo, hi) = convention.bounds(layer);
            corrected_trapezoid(params, lo, hi, subdivisions).max(0.0)
        })
        .collect();
    Ok(BinMasses {
        masses,
        layer_count,
        subdivisions,
        convention,
    })
}
