//! Domain types and physical constants.
//!
//! Coordinate convention: x and y run along the surface, z is depth,
//! positive downward, with the origin on the surface. All bodies live
//! strictly below the surface.

use std::f64::consts::PI;

use crate::{Error, Result};

/// Gravitational constant in mGal·km² per 10⁹ t.
///
/// CODATA G = 6.674e-11 m³/(kg·s²) converted to the working units: with mass
/// in 10⁹ t (= 10¹² kg) and distance in km, G·M/r² comes out in units of
/// 6.674e-5 m/s² = 6.674 mGal. The reciprocal 1/γ ≈ 0.1498 is the 0.15 of
/// the practical depth-mass formulas.
pub const GAMMA: f64 = 6.674;

/// A surface measurement point; `vz` is present when the intensity has been
/// measured or simulated there.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Station {
    /// x coordinate, km.
    pub x: f64,
    /// y coordinate, km.
    pub y: f64,
    /// Vertical intensity in mGal, if available.
    pub vz: Option<f64>,
}

impl Station {
    /// A station with no measured value.
    pub fn position(x: f64, y: f64) -> Self {
        Station { x, y, vz: None }
    }

    /// A station carrying a measured or simulated intensity.
    pub fn measured(x: f64, y: f64, vz: f64) -> Self {
        Station { x, y, vz: Some(vz) }
    }

    /// Horizontal distance to another surface point, km.
    pub fn distance_to(&self, x: f64, y: f64) -> f64 {
        ((self.x - x).powi(2) + (self.y - y).powi(2)).sqrt()
    }

    /// True if both coordinates and any value are finite.
    pub fn is_valid(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.vz.map_or(true, f64::is_finite)
    }
}

/// One vertical bar of a discretized body: a rectangular footprint and one
/// or more depth segments. Multiple segments encode interior voids that must
/// be excluded from the integration.
#[derive(Debug, Clone, PartialEq)]
pub struct BarCell {
    /// Footprint center x, km.
    pub xc: f64,
    /// Footprint center y, km.
    pub yc: f64,
    /// Footprint width in x, km.
    pub dx: f64,
    /// Footprint width in y, km.
    pub dy: f64,
    /// Disjoint `(z_min, z_max)` depth intervals, sorted by `z_min`,
    /// each with `0 < z_min < z_max`.
    pub segments: Vec<(f64, f64)>,
}

impl BarCell {
    /// Build a cell, validating footprint and segment invariants.
    pub fn new(xc: f64, yc: f64, dx: f64, dy: f64, segments: Vec<(f64, f64)>) -> Result<Self> {
        if !(dx > 0.0 && dy > 0.0) {
            return Err(Error::Domain(format!(
                "bar cell footprint must be positive, got dx={dx}, dy={dy}"
            )));
        }
        if segments.is_empty() {
            return Err(Error::Domain("bar cell needs at least one segment".into()));
        }
        let mut prev_max = 0.0_f64;
        for &(zmin, zmax) in &segments {
            if !(zmin > 0.0 && zmax > zmin) {
                return Err(Error::Domain(format!(
                    "bar segment must satisfy 0 < z_min < z_max, got ({zmin}, {zmax})"
                )));
            }
            if zmin < prev_max {
                return Err(Error::Domain(
                    "bar segments must be disjoint and sorted by z_min".into(),
                ));
            }
            prev_max = zmax;
        }
        Ok(BarCell { xc, yc, dx, dy, segments })
    }

    /// Total bar length Σ(z_max − z_min), km.
    pub fn height(&self) -> f64 {
        self.segments.iter().map(|(a, b)| b - a).sum()
    }
}

/// A homogeneous body given as a set of vertical bars.
///
/// `rho` is the density anomaly in g/cm³ (numerically 10⁹ t/km³); it may be
/// negative for a density deficit.
#[derive(Debug, Clone, PartialEq)]
pub struct BarBody {
    /// Density anomaly, g/cm³.
    pub rho: f64,
    /// Constituent bars.
    pub cells: Vec<BarCell>,
}

impl BarBody {
    /// Build a body; the density must be finite and nonzero and there must
    /// be at least one cell.
    pub fn new(rho: f64, cells: Vec<BarCell>) -> Result<Self> {
        if !rho.is_finite() || rho == 0.0 {
            return Err(Error::Domain(format!(
                "bar body density must be finite and nonzero, got {rho}"
            )));
        }
        if cells.is_empty() {
            return Err(Error::Domain("bar body needs at least one cell".into()));
        }
        Ok(BarBody { rho, cells })
    }

    /// Body volume Σ dx·dy·height, km³.
    pub fn volume(&self) -> f64 {
        self.cells.iter().map(|c| c.dx * c.dy * c.height()).sum()
    }

    /// Body mass ρ·volume, 10⁹ t.
    pub fn mass(&self) -> f64 {
        self.rho * self.volume()
    }
}

/// A homogeneous ellipsoid of revolution about the vertical axis.
///
/// Semiaxes are `a = b` horizontal and `c = eps·a` vertical; the body is
/// oblate for `eps < 1`, prolate for `eps > 1`, a sphere for `eps = 1`.
/// The buried invariant `z0 > eps·a` keeps the whole body strictly below
/// the surface, so every surface point is exterior.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Spheroid {
    /// Equatorial semiaxis, km.
    pub a: f64,
    /// Axis ratio ε = c/a.
    pub eps: f64,
    /// Density anomaly, g/cm³.
    pub rho: f64,
    /// Center x, km.
    pub x0: f64,
    /// Center y, km.
    pub y0: f64,
    /// Center depth, km (positive downward).
    pub z0: f64,
}

impl Spheroid {
    /// Build a spheroid, enforcing positivity and the buried invariant.
    pub fn new(a: f64, eps: f64, rho: f64, x0: f64, y0: f64, z0: f64) -> Result<Self> {
        if !(a > 0.0 && eps > 0.0 && z0 > 0.0) {
            return Err(Error::Domain(format!(
                "spheroid needs a > 0, eps > 0, z0 > 0; got a={a}, eps={eps}, z0={z0}"
            )));
        }
        if !(rho.is_finite() && a.is_finite() && eps.is_finite()) {
            return Err(Error::Domain("spheroid parameters must be finite".into()));
        }
        let s = Spheroid { a, eps, rho, x0, y0, z0 };
        if !s.is_buried() {
            return Err(Error::NotBuried { index: 0, top: z0 - s.c() });
        }
        Ok(s)
    }

    /// Vertical semiaxis c = ε·a, km.
    pub fn c(&self) -> f64 {
        self.eps * self.a
    }

    /// True if the body top lies strictly below the surface.
    pub fn is_buried(&self) -> bool {
        self.z0 > self.c()
    }

    /// Volume (4/3)π·ε·a³, km³.
    pub fn volume(&self) -> f64 {
        4.0 / 3.0 * PI * self.eps * self.a.powi(3)
    }

    /// Mass ρ·(4/3)π·ε·a³, 10⁹ t.
    pub fn mass(&self) -> f64 {
        self.rho * self.volume()
    }
}

/// Mass of a spheroid, 10⁹ t: (4/3)π·ε·ρ·a³.
pub fn spheroid_mass(s: &Spheroid) -> f64 {
    s.mass()
}

/// Equatorial semiaxis of a spheroid with mass `m`, axis ratio `eps` and
/// density `rho`: the cube root of m / ((4/3)π·ε·ρ).
pub fn semiaxis_from_mass(m: f64, eps: f64, rho: f64) -> Result<f64> {
    if !(m > 0.0 && eps > 0.0 && rho > 0.0) {
        return Err(Error::Domain(format!(
            "semiaxis_from_mass needs positive arguments, got m={m}, eps={eps}, rho={rho}"
        )));
    }
    Ok((m / (4.0 / 3.0 * PI * eps * rho)).cbrt())
}
