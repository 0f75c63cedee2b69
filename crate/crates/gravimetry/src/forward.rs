//! Direct problem: vertical intensity V_z at surface points.
//!
//! Bar assemblies are integrated bar by bar with the midpoint rule (the bar
//! kernel is exact in depth; only the footprint integral is approximated by
//! evaluating at the footprint center). Spheroids use closed forms with three
//! branches: oblate, prolate, and the sphere, selected on the axis ratio.

use crate::model::{BarBody, BarCell, Spheroid, Station, GAMMA};
use crate::{Error, Result};
use std::f64::consts::PI;

/// Axis ratios within this band of 1 are evaluated with the sphere formula;
/// both spheroid branches lose all significant digits as e → 0 long before
/// this band matters physically.
const SPHERE_BAND: f64 = 1e-9;

/// Floor for the prolate branch discriminant, which can round to zero at
/// stations on the body axis.
const T_FLOOR: f64 = 1e-300;

/// A regular raster of V_z over a rectangular surface window, row-major with
/// x varying fastest: `values[iy * nx + ix]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldGrid {
    /// Window lower x bound, km.
    pub x_min: f64,
    /// Window upper x bound, km.
    pub x_max: f64,
    /// Window lower y bound, km.
    pub y_min: f64,
    /// Window upper y bound, km.
    pub y_max: f64,
    /// Number of samples along x (≥ 2, endpoints included).
    pub nx: usize,
    /// Number of samples along y (≥ 2, endpoints included).
    pub ny: usize,
    /// Raster values, mGal.
    pub values: Vec<f64>,
}

impl FieldGrid {
    /// Build a grid from parts, checking the raster invariants.
    pub fn new(
        x_min: f64,
        x_max: f64,
        y_min: f64,
        y_max: f64,
        nx: usize,
        ny: usize,
        values: Vec<f64>,
    ) -> Result<Self> {
        if !(nx >= 2 && ny >= 2 && x_min < x_max && y_min < y_max) {
            return Err(Error::Domain(format!(
                "grid needs nx, ny >= 2 and a nonempty window; got nx={nx}, ny={ny}, \
                 x=[{x_min}, {x_max}], y=[{y_min}, {y_max}]"
            )));
        }
        if values.len() != nx * ny || values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain(format!(
                "grid needs exactly nx*ny = {} finite values, got {}",
                nx * ny,
                values.len()
            )));
        }
        Ok(FieldGrid { x_min, x_max, y_min, y_max, nx, ny, values })
    }

    /// Lattice spacing along x, km.
    pub fn step_x(&self) -> f64 {
        (self.x_max - self.x_min) / (self.nx - 1) as f64
    }

    /// Lattice spacing along y, km.
    pub fn step_y(&self) -> f64 {
        (self.y_max - self.y_min) / (self.ny - 1) as f64
    }

    /// x coordinate of column `ix`.
    pub fn x_at(&self, ix: usize) -> f64 {
        self.x_min + ix as f64 * self.step_x()
    }

    /// y coordinate of row `iy`.
    pub fn y_at(&self, iy: usize) -> f64 {
        self.y_min + iy as f64 * self.step_y()
    }

    /// Raster value at `(ix, iy)`.
    pub fn value(&self, ix: usize, iy: usize) -> f64 {
        self.values[iy * self.nx + ix]
    }

    /// Bilinear sample at an arbitrary point, clamped to the window.
    pub fn sample(&self, x: f64, y: f64) -> f64 {
        let fx = ((x - self.x_min) / self.step_x()).clamp(0.0, (self.nx - 1) as f64);
        let fy = ((y - self.y_min) / self.step_y()).clamp(0.0, (self.ny - 1) as f64);
        let ix = (fx.floor() as usize).min(self.nx - 2);
        let iy = (fy.floor() as usize).min(self.ny - 2);
        let tx = fx - ix as f64;
        let ty = fy - iy as f64;
        let v00 = self.value(ix, iy);
        let v10 = self.value(ix + 1, iy);
        let v01 = self.value(ix, iy + 1);
        let v11 = self.value(ix + 1, iy + 1);
        v00 * (1.0 - tx) * (1.0 - ty)
            + v10 * tx * (1.0 - ty)
            + v01 * (1.0 - tx) * ty
            + v11 * tx * ty
    }

    /// Largest raster value.
    pub fn max_value(&self) -> f64 {
        self.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Either kind of forward model body.
#[derive(Debug, Clone, PartialEq)]
pub enum Body {
    /// A bar-discretized body.
    Bars(BarBody),
    /// A closed-form spheroid.
    Spheroid(Spheroid),
}

impl Body {
    /// V_z of this body at a surface station, mGal.
    pub fn vz(&self, p: &Station) -> f64 {
        match self {
            Body::Bars(b) => body_vz(b, p),
            Body::Spheroid(s) => spheroid_vz(s, p),
        }
    }
}

/// V_z of one vertical bar with density `rho` at station `p`, mGal.
///
/// Each segment contributes
/// γρ·[1/√(d² + z_min²) − 1/√(d² + z_max²)]·dx·dy with d the horizontal
/// distance from the station to the footprint center; segments sum, which
/// excludes interior voids. `z_min > 0` keeps the kernel finite even at
/// d = 0.
pub fn bar_vz(cell: &BarCell, rho: f64, p: &Station) -> f64 {
    let d2 = (p.x - cell.xc).powi(2) + (p.y - cell.yc).powi(2);
    let mut sum = 0.0;
    for &(zmin, zmax) in &cell.segments {
        sum += 1.0 / (d2 + zmin * zmin).sqrt() - 1.0 / (d2 + zmax * zmax).sqrt();
    }
    GAMMA * rho * sum * cell.dx * cell.dy
}

/// V_z of a bar-assembled body at station `p`, mGal.
pub fn body_vz(b: &BarBody, p: &Station) -> f64 {
    b.cells.iter().map(|c| bar_vz(c, b.rho, p)).sum()
}

/// V_z of a buried spheroid at a surface station, mGal.
///
/// Dispatch on the axis ratio: a sphere within [`SPHERE_BAND`] of ε = 1,
/// otherwise the oblate (ε < 1) or prolate (ε > 1) closed form. The buried
/// invariant of [`Spheroid`] guarantees every surface station is exterior.
pub fn spheroid_vz(s: &Spheroid, p: &Station) -> f64 {
    let s2 = (p.x - s.x0).powi(2) + (p.y - s.y0).powi(2);
    let r2 = s2 + s.z0 * s.z0;
    let r = r2.sqrt();

    if (s.eps - 1.0).abs() <= SPHERE_BAND {
        // Sphere: the field of the whole mass concentrated at the center.
        return 4.0 / 3.0 * PI * GAMMA * s.rho * s.a.powi(3) * s.z0 / (r2 * r);
    }

    if s.eps < 1.0 {
        let e = (1.0 - s.eps * s.eps).sqrt();
        let q = e * s.a / r;
        let one_q2 = 1.0 - q * q;
        let disc = (one_q2 * one_q2 + 4.0 * q * q * s.z0 * s.z0 / r2).sqrt();
        let tau = 0.5 * (one_q2 + disc);
        let p_val = q / tau.sqrt();
        4.0 * PI * GAMMA * s.rho * s.eps / (e * e * e) * (p_val - p_val.atan()) * s.z0
    } else {
        let e = (s.eps * s.eps - 1.0).sqrt();
        let q = e * s.a / r;
        let one_q2 = 1.0 - q * q;
        // The prolate discriminant carries the horizontal distance, not z0;
        // on the axis it can round to zero, hence the floor.
        let disc = (one_q2 * one_q2 + 4.0 * q * q * s2 / r2).sqrt();
        let t = (0.5 * (one_q2 + disc)).max(T_FLOOR);
        let p_val = q / t.sqrt();
        let hyp = (1.0 + p_val * p_val).sqrt();
        4.0 * PI * GAMMA * s.rho * s.eps / (e * e * e)
            * ((p_val + hyp).ln() - p_val / hyp)
            * s.z0
    }
}

/// Per-station V_z of a whole model, summed over bodies in input order.
///
/// Output order matches station order; summation order is fixed, so the
/// result is deterministic.
pub fn field_at(model: &[Body], stations: &[Station]) -> Vec<f64> {
    stations
        .iter()
        .map(|p| model.iter().map(|b| b.vz(p)).sum())
        .collect()
}

/// Evaluate a model on a regular lattice including both endpoints.
pub fn field_grid(
    model: &[Body],
    x_min: f64,
    x_max: f64,
    y_min: f64,
    y_max: f64,
    nx: usize,
    ny: usize,
) -> Result<FieldGrid> {
    if !(nx >= 2 && ny >= 2 && x_min < x_max && y_min < y_max) {
        return Err(Error::Domain(format!(
            "grid needs nx, ny >= 2 and a nonempty window; got nx={nx}, ny={ny}"
        )));
    }
    let sx = (x_max - x_min) / (nx - 1) as f64;
    let sy = (y_max - y_min) / (ny - 1) as f64;
    let mut values = Vec::with_capacity(nx * ny);
    for iy in 0..ny {
        let y = y_min + iy as f64 * sy;
        for ix in 0..nx {
            let x = x_min + ix as f64 * sx;
            let p = Station::position(x, y);
            values.push(model.iter().map(|b| b.vz(&p)).sum());
        }
    }
    FieldGrid::new(x_min, x_max, y_min, y_max, nx, ny, values)
}
