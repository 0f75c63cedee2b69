//! Parameter refinement: box-constrained coordinate descent on a Tikhonov
//! smoothing functional, with decrementally narrowed constraint boxes.
//!
//! Each body contributes five free parameters (ε, ρ, x0, y0, z0); its
//! equatorial semiaxis is slaved to the current mass estimate through
//! a = (M / ((4/3)π·ε·ρ))^(1/3), so mass is held fixed while the descent
//! runs and is re-fit to the data between rounds. The stabilizer weights
//! q_j = 1/p_mid_j² make every stabilizer summand dimensionless.

use crate::bulakh;
use crate::detect::{self, DetectConfig, PeakCandidate};
use crate::forward::spheroid_vz;
use crate::model::{semiaxis_from_mass, Spheroid, Station};
use crate::{Error, Result};

/// Golden-section iterations per coordinate line search; reduces the
/// interval by ~1e-10 of the box width.
const LINE_SEARCH_ITERS: usize = 48;

/// Fraction of the box width within which an estimate counts as hugging a
/// boundary; that side is then left in place when the box is narrowed.
const BOUNDARY_FREEZE_FRAC: f64 = 0.01;

/// Mass line-search bracket, as a factor around the current estimate.
const MASS_BRACKET: f64 = 1.7;

/// Cap on descent/mass-refit alternations within one constraint round.
const MAX_ALTERNATIONS: usize = 30;

/// Choice of smoothing functional.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Functional {
    /// Misfit + α·Σ q_j (p_j − p_mid_j)².
    F1,
    /// Misfit + α·Σ q_j p_j².
    F2,
}

/// Per-parameter lower/upper bounds with derived midpoints and stabilizer
/// weights.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterBox {
    /// Parameter labels, e.g. `eps[0]`, `rho[0]`, …
    pub names: Vec<String>,
    /// Lower bounds.
    pub p_min: Vec<f64>,
    /// Upper bounds.
    pub p_max: Vec<f64>,
}

/// Bounds for the five parameters of one body.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BodyBounds {
    /// Axis ratio range.
    pub eps: (f64, f64),
    /// Density range, g/cm³.
    pub rho: (f64, f64),
    /// Center x range, km.
    pub x0: (f64, f64),
    /// Center y range, km.
    pub y0: (f64, f64),
    /// Center depth range, km.
    pub z0: (f64, f64),
}

impl ParameterBox {
    /// Build a box from explicit names and bounds.
    pub fn new(names: Vec<String>, p_min: Vec<f64>, p_max: Vec<f64>) -> Result<Self> {
        if names.len() != p_min.len() || p_min.len() != p_max.len() || p_min.is_empty() {
            return Err(Error::InfeasibleBox("names and bounds must have equal nonzero length".into()));
        }
        for j in 0..p_min.len() {
            if !(p_min[j].is_finite() && p_max[j].is_finite() && p_min[j] < p_max[j]) {
                return Err(Error::InfeasibleBox(format!(
                    "parameter {} needs p_min < p_max, got [{}, {}]",
                    names[j], p_min[j], p_max[j]
                )));
            }
        }
        Ok(ParameterBox { names, p_min, p_max })
    }

    /// Build a box with generated names `p0..pn`.
    pub fn unnamed(p_min: Vec<f64>, p_max: Vec<f64>) -> Result<Self> {
        let names = (0..p_min.len()).map(|j| format!("p{j}")).collect();
        ParameterBox::new(names, p_min, p_max)
    }

    /// Build the standard 5-parameters-per-body box.
    pub fn for_bodies(bodies: &[BodyBounds]) -> Result<Self> {
        let mut names = Vec::new();
        let mut p_min = Vec::new();
        let mut p_max = Vec::new();
        for (i, b) in bodies.iter().enumerate() {
            for (label, (lo, hi)) in [
                ("eps", b.eps),
                ("rho", b.rho),
                ("x0", b.x0),
                ("y0", b.y0),
                ("z0", b.z0),
            ] {
                names.push(format!("{label}[{i}]"));
                p_min.push(lo);
                p_max.push(hi);
            }
        }
        ParameterBox::new(names, p_min, p_max)
    }

    /// Number of parameters.
    pub fn len(&self) -> usize {
        self.p_min.len()
    }

    /// True if the box holds no parameters (never, by construction).
    pub fn is_empty(&self) -> bool {
        self.p_min.is_empty()
    }

    /// Number of 5-parameter body blocks.
    pub fn n_bodies(&self) -> usize {
        self.len() / 5
    }

    /// Midpoints (p_min + p_max)/2.
    pub fn midpoints(&self) -> Vec<f64> {
        self.p_min.iter().zip(&self.p_max).map(|(a, b)| 0.5 * (a + b)).collect()
    }

    /// Stabilizer weights q_j = 1/p_mid_j²; fails when some midpoint is
    /// zero.
    pub fn weights(&self) -> Result<Vec<f64>> {
        self.midpoints()
            .iter()
            .enumerate()
            .map(|(j, &m)| {
                if m == 0.0 {
                    Err(Error::InfeasibleBox(format!(
                        "parameter {} has zero midpoint; no stabilizer weight",
                        self.names[j]
                    )))
                } else {
                    Ok(1.0 / (m * m))
                }
            })
            .collect()
    }

    /// True when `p` lies inside the box componentwise.
    pub fn contains(&self, p: &[f64]) -> bool {
        p.len() == self.len()
            && p.iter()
                .zip(self.p_min.iter().zip(&self.p_max))
                .all(|(v, (lo, hi))| *v >= *lo && *v <= *hi)
    }

    /// Componentwise projection onto the box.
    pub fn clamp(&self, p: &[f64]) -> Vec<f64> {
        p.iter()
            .zip(self.p_min.iter().zip(&self.p_max))
            .map(|(v, (lo, hi))| v.clamp(*lo, *hi))
            .collect()
    }

    /// Narrow every interval to half-width `eta`·(previous half-width)
    /// centered on `center`, clipped to the current box, never below the
    /// per-parameter half-width `floors`. A side is left in place when the
    /// center hugs it (the optimum may lie outside).
    pub fn shrunk_around(&self, center: &[f64], eta: f64, floors: &[f64]) -> ParameterBox {
        let mut p_min = self.p_min.clone();
        let mut p_max = self.p_max.clone();
        for j in 0..self.len() {
            let width = self.p_max[j] - self.p_min[j];
            let half = (eta * 0.5 * width).max(floors[j]);
            let c = center[j];
            let hug_lo = c - self.p_min[j] <= BOUNDARY_FREEZE_FRAC * width;
            let hug_hi = self.p_max[j] - c <= BOUNDARY_FREEZE_FRAC * width;
            if !hug_lo {
                p_min[j] = (c - half).max(self.p_min[j]);
            }
            if !hug_hi {
                p_max[j] = (c + half).min(self.p_max[j]);
            }
            if p_min[j] >= p_max[j] {
                // Degenerate after clipping; keep the old interval.
                p_min[j] = self.p_min[j];
                p_max[j] = self.p_max[j];
            }
        }
        ParameterBox { names: self.names.clone(), p_min, p_max }
    }
}

/// Half-width floors for the 5-parameter body blocks: 0.01 for ε and ρ,
/// 0.05 km for the coordinates.
pub fn body_floors(n_params: usize) -> Vec<f64> {
    (0..n_params).map(|j| if j % 5 < 2 { 0.01 } else { 0.05 }).collect()
}

/// Build the trial spheroids encoded by `params` (5 per body) and the fixed
/// per-body masses, slaving each semiaxis to its mass.
pub fn build_spheroids(params: &[f64], masses: &[f64]) -> Result<Vec<Spheroid>> {
    if params.len() != 5 * masses.len() {
        return Err(Error::Domain(format!(
            "expected 5 parameters per body: {} params for {} masses",
            params.len(),
            masses.len()
        )));
    }
    masses
        .iter()
        .enumerate()
        .map(|(i, &m)| {
            let b = &params[5 * i..5 * i + 5];
            let (eps, rho, x0, y0, z0) = (b[0], b[1], b[2], b[3], b[4]);
            let a = semiaxis_from_mass(m, eps, rho)?;
            Spheroid::new(a, eps, rho, x0, y0, z0).map_err(|e| match e {
                Error::NotBuried { top, .. } => Error::NotBuried { index: i, top },
                other => other,
            })
        })
        .collect()
}

/// Data misfit Σ (Ṽ_zi − V_zi)² in mGal², with V_zi the forward field of
/// the encoded spheroids. Every station must carry a measured value.
pub fn misfit(params: &[f64], masses: &[f64], stations: &[Station]) -> Result<f64> {
    let spheroids = build_spheroids(params, masses)?;
    misfit_of(&spheroids, stations)
}

fn misfit_of(spheroids: &[Spheroid], stations: &[Station]) -> Result<f64> {
    let mut sum = 0.0;
    for p in stations {
        let measured = p
            .vz
            .ok_or_else(|| Error::Domain(format!("station ({}, {}) has no measured value", p.x, p.y)))?;
        let model: f64 = spheroids.iter().map(|s| spheroid_vz(s, p)).sum();
        let r = measured - model;
        sum += r * r;
    }
    Ok(sum)
}

/// Smoothing functional F1: misfit + α·Σ q_j (p_j − p_mid_j)².
pub fn tikhonov_f1(
    params: &[f64],
    masses: &[f64],
    stations: &[Station],
    pbox: &ParameterBox,
    alpha: f64,
) -> Result<f64> {
    let q = pbox.weights()?;
    let mid = pbox.midpoints();
    let stab: f64 = params
        .iter()
        .zip(mid.iter().zip(&q))
        .map(|(p, (m, w))| w * (p - m) * (p - m))
        .sum();
    Ok(misfit(params, masses, stations)? + alpha * stab)
}

/// Smoothing functional F2: misfit + α·Σ q_j p_j².
pub fn tikhonov_f2(
    params: &[f64],
    masses: &[f64],
    stations: &[Station],
    pbox: &ParameterBox,
    alpha: f64,
) -> Result<f64> {
    let q = pbox.weights()?;
    let stab: f64 = params.iter().zip(&q).map(|(p, w)| w * p * p).sum();
    Ok(misfit(params, masses, stations)? + alpha * stab)
}

/// Mean square solution error sqrt((1/mk)·Σ q_j (p_j − p̄_j)²).
pub fn solution_error(params: &[f64], exact: &[f64], weights: &[f64]) -> f64 {
    let mk = params.len() as f64;
    let sum: f64 = params
        .iter()
        .zip(exact.iter().zip(weights))
        .map(|(p, (e, q))| q * (p - e) * (p - e))
        .sum();
    (sum / mk).sqrt()
}

/// Golden-section minimum of `f` on `[lo, hi]`; returns `(x_min, f_min)`.
fn golden_section_min(
    mut f: impl FnMut(f64) -> f64,
    mut lo: f64,
    mut hi: f64,
    iters: usize,
) -> (f64, f64) {
    const RESP: f64 = 2.0 - 1.618_033_988_749_895; // 2 - phi
    let mut x1 = lo + RESP * (hi - lo);
    let mut x2 = hi - RESP * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..iters {
        if f1 < f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = lo + RESP * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = hi - RESP * (hi - lo);
            f2 = f(x2);
        }
    }
    if f1 < f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

/// Result of one coordinate-descent run.
#[derive(Debug, Clone)]
pub struct DescentResult {
    /// Final parameters, inside the box componentwise.
    pub params: Vec<f64>,
    /// Objective value after each completed sweep; non-increasing.
    pub sweep_values: Vec<f64>,
    /// Objective at the final parameters.
    pub value: f64,
}

/// Cyclic coordinate descent over the box.
///
/// Each coordinate is minimized on its interval by golden-section search
/// with [`LINE_SEARCH_ITERS`] iterations; a move is taken only when it
/// strictly improves the objective, so the sweep trace is non-increasing
/// and iterates never leave the box. Stops when the relative decrease over
/// a full sweep falls below `tol` or after `max_sweeps`.
pub fn coordinate_descent(
    objective: impl Fn(&[f64]) -> f64,
    pbox: &ParameterBox,
    start: &[f64],
    tol: f64,
    max_sweeps: usize,
) -> Result<DescentResult> {
    if !(tol > 0.0) {
        return Err(Error::Domain(format!("descent tolerance must be positive, got {tol}")));
    }
    if !pbox.contains(start) {
        return Err(Error::Domain("descent start point must lie inside the box".into()));
    }
    let mut current = start.to_vec();
    let mut f_cur = objective(&current);
    let mut sweep_values = Vec::new();
    for _ in 0..max_sweeps {
        let f_before = f_cur;
        for j in 0..pbox.len() {
            let mut trial = current.clone();
            let (xj, fj) = golden_section_min(
                |t| {
                    trial[j] = t;
                    objective(&trial)
                },
                pbox.p_min[j],
                pbox.p_max[j],
                LINE_SEARCH_ITERS,
            );
            if fj < f_cur {
                current[j] = xj;
                f_cur = fj;
            }
        }
        sweep_values.push(f_cur);
        let drop = f_before - f_cur;
        if drop <= tol * f_before.abs().max(f64::MIN_POSITIVE) {
            break;
        }
    }
    Ok(DescentResult { params: current, value: f_cur, sweep_values })
}

/// Settings for [`decremental_solve`].
#[derive(Debug, Clone, Copy)]
pub struct SolveSettings {
    /// Regularization parameter α.
    pub alpha: f64,
    /// Which smoothing functional to minimize.
    pub functional: Functional,
    /// Number of constraint-narrowing rounds.
    pub rounds: usize,
    /// Box half-width shrink factor per round.
    pub shrink: f64,
    /// Relative per-sweep decrease below which a round stops.
    pub tol: f64,
    /// Sweep cap per round.
    pub max_sweeps: usize,
    /// Re-fit each body's mass to the data between rounds.
    pub refresh_mass: bool,
}

impl Default for SolveSettings {
    fn default() -> Self {
        SolveSettings {
            alpha: 1e-8,
            functional: Functional::F1,
            rounds: 10,
            shrink: 0.7,
            tol: 1e-6,
            max_sweeps: 200,
            refresh_mass: true,
        }
    }
}

/// One body of an inversion solution with its derived quantities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BodySolution {
    /// Axis ratio.
    pub eps: f64,
    /// Density, g/cm³.
    pub rho: f64,
    /// Center x, km.
    pub x0: f64,
    /// Center y, km.
    pub y0: f64,
    /// Center depth, km.
    pub z0: f64,
    /// Semiaxis from the mass coupling, km.
    pub a: f64,
    /// Volume, km³.
    pub volume: f64,
    /// Mass, 10⁹ t.
    pub mass: f64,
}

/// Outcome of a decremental inversion.
#[derive(Debug, Clone)]
pub struct InversionResult {
    /// Final parameter vector (5 per body), inside the final box.
    pub params: Vec<f64>,
    /// Final per-body masses, 10⁹ t.
    pub masses: Vec<f64>,
    /// Per-body solutions with derived semiaxis, volume and mass.
    pub bodies: Vec<BodySolution>,
    /// Functional value at the starting point of the first round.
    pub f_initial: f64,
    /// Functional value at the final parameters.
    pub f_final: f64,
    /// Rounds actually run.
    pub rounds: usize,
    /// Regularization parameter used.
    pub alpha: f64,
    /// Functional minimized.
    pub functional: Functional,
    /// The narrowed box of the last round.
    pub final_box: ParameterBox,
    /// Per-round sweep traces of the objective.
    pub sweep_traces: Vec<Vec<f64>>,
}

fn functional_value(
    f: Functional,
    params: &[f64],
    masses: &[f64],
    stations: &[Station],
    pbox: &ParameterBox,
    alpha: f64,
) -> Result<f64> {
    match f {
        Functional::F1 => tikhonov_f1(params, masses, stations, pbox, alpha),
        Functional::F2 => tikhonov_f2(params, masses, stations, pbox, alpha),
    }
}

/// Objective closure for the descent: the chosen functional, with
/// infeasible trial bodies (not buried) mapped to +∞ so the line searches
/// avoid them.
fn make_objective<'a>(
    f: Functional,
    masses: &'a [f64],
    stations: &'a [Station],
    pbox: &'a ParameterBox,
    alpha: f64,
) -> impl Fn(&[f64]) -> f64 + 'a {
    let q = pbox.weights().unwrap_or_else(|_| vec![0.0; pbox.len()]);
    let mid = pbox.midpoints();
    move |params: &[f64]| {
        let m = misfit(params, masses, stations);
        match m {
            Ok(v) => {
                let stab: f64 = match f {
                    Functional::F1 => params
                        .iter()
                        .zip(mid.iter().zip(&q))
                        .map(|(p, (c, w))| w * (p - c) * (p - c))
                        .sum(),
                    Functional::F2 => params.iter().zip(&q).map(|(p, w)| w * p * p).sum(),
                };
                v + alpha * stab
            }
            Err(_) => f64::INFINITY,
        }
    }
}

/// Re-fit one body's mass by a golden-section line search on the misfit,
/// holding all shape parameters fixed. The bracket spans
/// [M/[`MASS_BRACKET`], M·[`MASS_BRACKET`]]; the incumbent is kept when no
/// improvement is found.
fn refit_mass(
    body: usize,
    params: &[f64],
    masses: &mut [f64],
    stations: &[Station],
) -> Result<()> {
    let m0 = masses[body];
    let mut trial = masses.to_vec();
    let f_inc = misfit(params, masses, stations).unwrap_or(f64::INFINITY);
    let (m_best, f_best) = golden_section_min(
        |m| {
            trial[body] = m;
            misfit(params, &trial, stations).unwrap_or(f64::INFINITY)
        },
        m0 / MASS_BRACKET,
        m0 * MASS_BRACKET,
        LINE_SEARCH_ITERS,
    );
    if f_best < f_inc {
        masses[body] = m_best;
    }
    Ok(())
}

fn body_solutions(params: &[f64], masses: &[f64]) -> Result<Vec<BodySolution>> {
    build_spheroids(params, masses)
        .map(|spheroids| {
            spheroids
                .iter()
                .map(|s| BodySolution {
                    eps: s.eps,
                    rho: s.rho,
                    x0: s.x0,
                    y0: s.y0,
                    z0: s.z0,
                    a: s.a,
                    volume: s.volume(),
                    mass: s.mass(),
                })
                .collect()
        })
}

/// Minimize the smoothing functional under decrementally narrowed boxes.
///
/// Each round runs a full coordinate descent from the current estimate,
/// then (between rounds) re-fits the per-body masses to the data and
/// narrows every interval around the estimate by the shrink factor, down to
/// the per-parameter half-width floors. Midpoints and weights are recomputed
/// from each narrowed box. With `rounds = 1` this is exactly one coordinate
/// descent.
pub fn decremental_solve(
    stations: &[Station],
    initial_box: &ParameterBox,
    initial_masses: &[f64],
    settings: &SolveSettings,
) -> Result<InversionResult> {
    if settings.rounds == 0 {
        return Err(Error::Domain("decremental solve needs at least one round".into()));
    }
    if initial_box.len() != 5 * initial_masses.len() {
        return Err(Error::InfeasibleBox(format!(
            "box has {} parameters but {} masses were given",
            initial_box.len(),
            initial_masses.len()
        )));
    }
    if initial_masses.iter().any(|m| !(*m > 0.0)) {
        return Err(Error::Domain("initial masses must be positive".into()));
    }
    // The descent can only start from a feasible (buried) midpoint.
    build_spheroids(&initial_box.midpoints(), initial_masses).map_err(|e| {
        Error::InfeasibleBox(format!("box midpoint is not a feasible model: {e}"))
    })?;

    let floors = body_floors(initial_box.len());
    let mut pbox = initial_box.clone();
    let mut masses = initial_masses.to_vec();
    let mut params = pbox.midpoints();
    let f_initial =
        functional_value(settings.functional, &params, &masses, stations, &pbox, settings.alpha)?;

    let mut sweep_traces = Vec::new();
    let mut rounds_run = 0;
    let mut f_final = f_initial;
    for round in 0..settings.rounds {
        // Alternate full descents with per-body mass re-fits: the mass and
        // depth compensate each other along a curved valley, so a single
        // pass of either one stalls short of the joint minimum.
        let mut trace = Vec::new();
        let mut f_prev = f64::INFINITY;
        for _ in 0..MAX_ALTERNATIONS {
            let objective =
                make_objective(settings.functional, &masses, stations, &pbox, settings.alpha);
            let res =
                coordinate_descent(&objective, &pbox, &params, settings.tol, settings.max_sweeps)?;
            drop(objective);
            params = res.params;
            f_final = res.value;
            trace.extend(res.sweep_values);
            if settings.refresh_mass {
                for b in 0..masses.len() {
                    refit_mass(b, &params, &mut masses, stations)?;
                }
                f_final = functional_value(
                    settings.functional,
                    &params,
                    &masses,
                    stations,
                    &pbox,
                    settings.alpha,
                )?;
            }
            if f_prev - f_final <= settings.tol * f_prev.abs().max(f64::MIN_POSITIVE)
                || !settings.refresh_mass
            {
                break;
            }
            f_prev = f_final;
        }
        sweep_traces.push(trace);
        rounds_run = round + 1;

        let at_floors = (0..pbox.len())
            .all(|j| 0.5 * (pbox.p_max[j] - pbox.p_min[j]) <= floors[j] * 1.0001);
        if round + 1 == settings.rounds || at_floors {
            break;
        }
        pbox = pbox.shrunk_around(&params, settings.shrink, &floors);
        params = pbox.clamp(&params);
    }

    let bodies = body_solutions(&params, &masses)?;
    Ok(InversionResult {
        params,
        masses,
        bodies,
        f_initial,
        f_final,
        rounds: rounds_run,
        alpha: settings.alpha,
        functional: settings.functional,
        final_box: pbox,
        sweep_traces,
    })
}

/// Configuration of the end-to-end pipeline.
#[derive(Debug, Clone)]
pub struct PipelineConfig {
    /// Raster resolution for peak detection.
    pub grid_nx: usize,
    /// Raster resolution for peak detection.
    pub grid_ny: usize,
    /// Suppression radius for raw local maxima, km.
    pub min_separation: f64,
    /// Survey noise level as a fraction of the strongest pole.
    pub noise_level: f64,
    /// Valley/noise thresholds for body selection.
    pub detect: DetectConfig,
    /// Prior density bounds, g/cm³. These carry the uniqueness burden:
    /// the data alone constrain density only weakly, so tighten them
    /// whenever regional knowledge allows.
    pub rho_bounds: (f64, f64),
    /// Axis-ratio bounds for the initial box.
    pub eps_bounds: (f64, f64),
    /// Half-width of the (x0, y0) boxes around detected peaks, km.
    pub center_halfwidth: f64,
    /// Solver settings.
    pub solve: SolveSettings,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            grid_nx: 61,
            grid_ny: 61,
            min_separation: 2.0,
            noise_level: 0.05,
            detect: DetectConfig::default(),
            rho_bounds: (1.0, 3.5),
            eps_bounds: (0.2, 2.2),
            center_halfwidth: 1.0,
            solve: SolveSettings::default(),
        }
    }
}

/// Everything the pipeline produced, including intermediate diagnostics.
#[derive(Debug, Clone)]
pub struct PipelineOutcome {
    /// All peak candidates with acceptance flags.
    pub peaks: Vec<PeakCandidate>,
    /// Initial depth/mass estimates per accepted peak.
    pub estimates: Vec<bulakh::DepthMassEstimate>,
    /// The inversion result; absent when no body was detected.
    pub result: Option<InversionResult>,
    /// Final fitted spheroids, one per accepted peak.
    pub spheroids: Vec<Spheroid>,
}

/// Clamp an initial mass so the box-midpoint body stays buried.
fn clamp_mass_for_midpoint(bounds: &BodyBounds, mass: f64) -> f64 {
    let eps_mid = 0.5 * (bounds.eps.0 + bounds.eps.1);
    let rho_mid = 0.5 * (bounds.rho.0 + bounds.rho.1);
    let z0_mid = 0.5 * (bounds.z0.0 + bounds.z0.1);
    // Buried means c = (M eps^2 / ((4/3)pi rho))^(1/3) < z0.
    let m_max = 4.0 / 3.0 * std::f64::consts::PI * rho_mid * z0_mid.powi(3) / (eps_mid * eps_mid);
    mass.min(0.95 * m_max)
}

/// Clip overlapping (x0, y0) boxes of two bodies at the half-distance
/// between their peaks, so two blocks cannot collapse onto one anomaly.
fn clip_overlapping_centers(bounds: &mut [BodyBounds], peaks: &[PeakCandidate]) {
    for i in 0..bounds.len() {
        for j in (i + 1)..bounds.len() {
            let overlap_x = bounds[i].x0.1 > bounds[j].x0.0 && bounds[j].x0.1 > bounds[i].x0.0;
            let overlap_y = bounds[i].y0.1 > bounds[j].y0.0 && bounds[j].y0.1 > bounds[i].y0.0;
            if !(overlap_x && overlap_y) {
                continue;
            }
            let dx = peaks[j].x0 - peaks[i].x0;
            let dy = peaks[j].y0 - peaks[i].y0;
            if dx.abs() >= dy.abs() {
                let mid = 0.5 * (peaks[i].x0 + peaks[j].x0);
                if dx >= 0.0 {
                    bounds[i].x0.1 = bounds[i].x0.1.min(mid);
                    bounds[j].x0.0 = bounds[j].x0.0.max(mid);
                } else {
                    bounds[i].x0.0 = bounds[i].x0.0.max(mid);
                    bounds[j].x0.1 = bounds[j].x0.1.min(mid);
                }
            } else {
                let mid = 0.5 * (peaks[i].y0 + peaks[j].y0);
                if dy >= 0.0 {
                    bounds[i].y0.1 = bounds[i].y0.1.min(mid);
                    bounds[j].y0.0 = bounds[j].y0.0.max(mid);
                } else {
                    bounds[i].y0.0 = bounds[i].y0.0.max(mid);
                    bounds[j].y0.1 = bounds[j].y0.1.min(mid);
                }
            }
        }
    }
}

/// The full four-step scheme: detect bodies, seed depth and mass per body,
/// build initial boxes, and run the decremental inversion. Masses get a
/// final re-fit to the data and the semiaxes follow from the mass coupling.
pub fn refine_pipeline(stations: &[Station], cfg: &PipelineConfig) -> Result<PipelineOutcome> {
    let grid = detect::rasterize_idw(stations, cfg.grid_nx, cfg.grid_ny)?;
    let raw = detect::find_peaks(&grid, cfg.min_separation)?;
    let resolved = detect::resolve_bodies(&raw, &grid, cfg.noise_level, &cfg.detect)?;
    let accepted = detect::accepted(&resolved);
    if accepted.is_empty() {
        return Ok(PipelineOutcome {
            peaks: resolved,
            estimates: vec![],
            result: None,
            spheroids: vec![],
        });
    }

    let spacing = bulakh::median_station_spacing(stations)?;
    let mut estimates = Vec::with_capacity(accepted.len());
    for peak in &accepted {
        let est = bulakh::estimate_body_iterated(peak, &accepted, stations).unwrap_or_else(|_| {
            // Fall back to the spacing hint and the peak reading.
            let mass = (peak.vz_peak * spacing * spacing / crate::model::GAMMA).max(1.0);
            bulakh::DepthMassEstimate {
                z0: spacing,
                mass,
                n_pairs: 0,
                spread: 0.0,
                rejected_pairs: 0,
            }
        });
        estimates.push(est);
    }

    let mut bounds: Vec<BodyBounds> = accepted
        .iter()
        .zip(&estimates)
        .map(|(peak, est)| {
            let z_lo = (0.6 * est.z0).min(est.z0 - 0.5 * est.spread).max(0.2);
            let z_hi = (1.4 * est.z0).max(est.z0 + 0.5 * est.spread);
            BodyBounds {
                eps: cfg.eps_bounds,
                rho: cfg.rho_bounds,
                x0: (peak.x0 - cfg.center_halfwidth, peak.x0 + cfg.center_halfwidth),
                y0: (peak.y0 - cfg.center_halfwidth, peak.y0 + cfg.center_halfwidth),
                z0: (z_lo, z_hi),
            }
        })
        .collect();
    clip_overlapping_centers(&mut bounds, &accepted);

    let masses: Vec<f64> = bounds
        .iter()
        .zip(&estimates)
        .map(|(b, e)| clamp_mass_for_midpoint(b, e.mass))
        .collect();
    let pbox = ParameterBox::for_bodies(&bounds)?;
    let mut result = decremental_solve(stations, &pbox, &masses, &cfg.solve)?;

    // Final data-consistent mass refinement before deriving the semiaxes.
    let mut final_masses = result.masses.clone();
    for b in 0..final_masses.len() {
        refit_mass(b, &result.params, &mut final_masses, stations)?;
    }
    result.masses = final_masses;
    result.bodies = body_solutions(&result.params, &result.masses)?;
    result.f_final = functional_value(
        result.functional,
        &result.params,
        &result.masses,
        stations,
        &result.final_box,
        result.alpha,
    )?;
    let spheroids = build_spheroids(&result.params, &result.masses)?;

    Ok(PipelineOutcome { peaks: resolved, estimates, result: Some(result), spheroids })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forward::{field_at, Body};
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn measured_from(model: &[Body], positions: &[(f64, f64)]) -> Vec<Station> {
        let pos: Vec<Station> = positions.iter().map(|&(x, y)| Station::position(x, y)).collect();
        let vals = field_at(model, &pos);
        pos.iter().zip(vals).map(|(p, v)| Station::measured(p.x, p.y, v)).collect()
    }

    fn grid_positions(n: usize, span: f64) -> Vec<(f64, f64)> {
        let mut out = Vec::new();
        for i in 0..n {
            for j in 0..n {
                out.push((i as f64 * span / (n - 1) as f64, j as f64 * span / (n - 1) as f64));
            }
        }
        out
    }

    #[test]
    fn misfit_zero_at_generating_model() {
        let s = Spheroid::new(1.5, 0.8, 2.0, 7.0, 7.0, 4.0).unwrap();
        let stations = measured_from(&[Body::Spheroid(s)], &grid_positions(5, 14.0));
        let params = vec![s.eps, s.rho, s.x0, s.y0, s.z0];
        let m = misfit(&params, &[s.mass()], &stations).unwrap();
        assert_abs_diff_eq!(m, 0.0, epsilon = 1e-18);
    }

    #[test]
    fn misfit_single_station_hand_check() {
        let s = Spheroid::new(1.0, 1.0, 2.0, 0.0, 0.0, 3.0).unwrap();
        let p = Station::measured(1.0, 1.0, 10.0);
        let params = vec![1.0, 2.0, 0.0, 0.0, 3.0];
        let model = spheroid_vz(&s, &p);
        let expect = (10.0 - model) * (10.0 - model);
        assert_relative_eq!(misfit(&params, &[s.mass()], &[p]).unwrap(), expect, max_relative = 1e-12);
    }

    #[test]
    fn misfit_invariant_under_body_relabeling() {
        let s1 = Spheroid::new(1.0, 0.9, 1.8, 3.0, 3.0, 3.0).unwrap();
        let s2 = Spheroid::new(1.2, 1.3, 2.4, 9.0, 8.0, 4.0).unwrap();
        let stations = measured_from(
            &[Body::Spheroid(s1), Body::Spheroid(s2)],
            &grid_positions(4, 12.0),
        );
        // Perturb so the misfit is nonzero.
        let p12 = vec![0.9, 1.8, 3.1, 3.0, 3.2, 1.3, 2.4, 8.9, 8.0, 4.1];
        let p21 = vec![1.3, 2.4, 8.9, 8.0, 4.1, 0.9, 1.8, 3.1, 3.0, 3.2];
        let m12 = misfit(&p12, &[s1.mass(), s2.mass()], &stations).unwrap();
        let m21 = misfit(&p21, &[s2.mass(), s1.mass()], &stations).unwrap();
        assert_relative_eq!(m12, m21, max_relative = 1e-12);
    }

    #[test]
    fn functionals_reduce_to_misfit() {
        let s = Spheroid::new(1.0, 1.0, 2.0, 5.0, 5.0, 3.0).unwrap();
        let stations = measured_from(&[Body::Spheroid(s)], &grid_positions(4, 10.0));
        let pbox = ParameterBox::for_bodies(&[BodyBounds {
            eps: (0.5, 1.5),
            rho: (1.0, 3.0),
            x0: (4.0, 6.0),
            y0: (4.0, 6.0),
            z0: (2.0, 4.0),
        }])
        .unwrap();
        let params = vec![1.1, 2.1, 5.1, 4.9, 3.1];
        let masses = [s.mass()];
        let m = misfit(&params, &masses, &stations).unwrap();
        assert_eq!(tikhonov_f1(&params, &masses, &stations, &pbox, 0.0).unwrap(), m);
        assert_eq!(tikhonov_f2(&params, &masses, &stations, &pbox, 0.0).unwrap(), m);

        // At the midpoint the F1 stabilizer vanishes and the F2 stabilizer
        // counts one per parameter.
        let mid = pbox.midpoints();
        let m_mid = misfit(&mid, &masses, &stations).unwrap();
        assert_relative_eq!(
            tikhonov_f1(&mid, &masses, &stations, &pbox, 0.5).unwrap(),
            m_mid,
            max_relative = 1e-12
        );
        assert_relative_eq!(
            tikhonov_f2(&mid, &masses, &stations, &pbox, 0.5).unwrap(),
            m_mid + 0.5 * mid.len() as f64,
            max_relative = 1e-12
        );
    }

    #[test]
    fn weights_normalization_identity() {
        let pbox = ParameterBox::unnamed(vec![1.0, 0.5, 3.0], vec![2.0, 1.5, 5.0]).unwrap();
        let q = pbox.weights().unwrap();
        for (w, m) in q.iter().zip(pbox.midpoints()) {
            assert_relative_eq!(w * m * m, 1.0, max_relative = 1e-15);
        }
    }

    #[test]
    fn descent_separable_quadratic_inside_box() {
        let c = [0.3, -0.7, 1.9];
        let pbox = ParameterBox::unnamed(vec![-2.0, -2.0, -2.0], vec![2.0, 2.0, 2.0]).unwrap();
        let obj = |p: &[f64]| -> f64 {
            p.iter().zip(&c).map(|(x, cc)| (x - cc) * (x - cc)).sum()
        };
        let start = pbox.midpoints();
        let res = coordinate_descent(obj, &pbox, &start, 1e-12, 10).unwrap();
        for (x, cc) in res.params.iter().zip(&c) {
            assert_abs_diff_eq!(x, cc, epsilon = 1e-6);
        }
        assert!(res.sweep_values.len() <= 3, "converged in {} sweeps", res.sweep_values.len());
    }

    #[test]
    fn descent_clamps_exterior_optimum_to_box() {
        let c = [3.5, -4.0];
        let pbox = ParameterBox::unnamed(vec![-1.0, -1.0], vec![1.0, 1.0]).unwrap();
        let obj =
            |p: &[f64]| -> f64 { p.iter().zip(&c).map(|(x, cc)| (x - cc) * (x - cc)).sum() };
        let res = coordinate_descent(obj, &pbox, &[0.0, 0.0], 1e-12, 20).unwrap();
        assert_abs_diff_eq!(res.params[0], 1.0, epsilon = 1e-6);
        assert_abs_diff_eq!(res.params[1], -1.0, epsilon = 1e-6);
    }

    #[test]
    fn descent_trace_is_monotone_and_feasible() {
        let pbox = ParameterBox::unnamed(vec![-3.0; 4], vec![3.0; 4]).unwrap();
        // A non-separable bowl.
        let obj = |p: &[f64]| -> f64 {
            let mut f = 0.0;
            for i in 0..p.len() {
                f += (p[i] - 0.5).powi(2);
                if i > 0 {
                    f += 0.3 * p[i] * p[i - 1];
                }
            }
            f
        };
        let res = coordinate_descent(obj, &pbox, &[2.0, -2.0, 2.0, -2.0], 1e-10, 50).unwrap();
        for w in res.sweep_values.windows(2) {
            assert!(w[1] <= w[0] + 1e-15);
        }
        assert!(pbox.contains(&res.params));
    }

    #[test]
    fn single_round_equals_plain_descent() {
        let s = Spheroid::new(1.2, 0.9, 2.0, 6.0, 6.0, 3.5).unwrap();
        let stations = measured_from(&[Body::Spheroid(s)], &grid_positions(5, 12.0));
        let pbox = ParameterBox::for_bodies(&[BodyBounds {
            eps: (0.7, 1.1),
            rho: (1.8, 2.2),
            x0: (5.5, 6.5),
            y0: (5.5, 6.5),
            z0: (3.0, 4.0),
        }])
        .unwrap();
        let masses = [s.mass()];
        let settings =
            SolveSettings { rounds: 1, refresh_mass: false, ..SolveSettings::default() };
        let solved = decremental_solve(&stations, &pbox, &masses, &settings).unwrap();
        let obj = make_objective(Functional::F1, &masses, &stations, &pbox, settings.alpha);
        let direct =
            coordinate_descent(obj, &pbox, &pbox.midpoints(), settings.tol, settings.max_sweeps)
                .unwrap();
        assert_eq!(solved.params, direct.params);
        assert_eq!(solved.masses.to_vec(), masses.to_vec());
    }

    #[test]
    fn noise_free_sphere_recovered_from_wide_box() {
        let truth = Spheroid::new(1.5, 1.0, 2.5, 7.0, 8.0, 4.0).unwrap();
        let stations = measured_from(&[Body::Spheroid(truth)], &grid_positions(7, 15.0));
        let pbox = ParameterBox::for_bodies(&[BodyBounds {
            eps: (0.5, 1.5),
            rho: (1.25, 3.75),
            x0: (3.5, 10.5),
            y0: (4.0, 12.0),
            z0: (2.0, 6.0),
        }])
        .unwrap();
        // Start the mass 25% off.
        let settings = SolveSettings { rounds: 6, ..SolveSettings::default() };
        let res = decremental_solve(&stations, &pbox, &[truth.mass() * 1.25], &settings).unwrap();
        let b = &res.bodies[0];
        assert_relative_eq!(b.z0, truth.z0, max_relative = 0.01);
        assert_relative_eq!(b.x0, truth.x0, max_relative = 0.01);
        assert_relative_eq!(b.y0, truth.y0, max_relative = 0.01);
        assert_relative_eq!(b.mass, truth.mass(), max_relative = 0.01);
        assert!(res.f_final <= res.f_initial);
        assert!(res.final_box.contains(&res.params));
    }

    #[test]
    fn decremental_boxes_nest_and_recenter() {
        let pbox = ParameterBox::unnamed(vec![0.0, 1.0], vec![10.0, 9.0]).unwrap();
        let shrunk = pbox.shrunk_around(&[5.0, 2.0], 0.7, &[0.01, 0.01]);
        for j in 0..2 {
            assert!(shrunk.p_min[j] >= pbox.p_min[j]);
            assert!(shrunk.p_max[j] <= pbox.p_max[j]);
        }
        // Re-derived weights still satisfy q * mid^2 = 1.
        let q = shrunk.weights().unwrap();
        for (w, m) in q.iter().zip(shrunk.midpoints()) {
            assert_relative_eq!(w * m * m, 1.0, max_relative = 1e-15);
        }
        // A center hugging a side freezes that side.
        let hugging = pbox.shrunk_around(&[0.05, 8.95], 0.7, &[0.01, 0.01]);
        assert_eq!(hugging.p_min[0], pbox.p_min[0]);
        assert_eq!(hugging.p_max[1], pbox.p_max[1]);
    }

    #[test]
    fn body_permutation_symmetry() {
        let s1 = Spheroid::new(1.0, 0.8, 1.9, 4.0, 4.0, 3.0).unwrap();
        let s2 = Spheroid::new(1.1, 1.2, 2.6, 11.0, 10.0, 3.6).unwrap();
        let stations = measured_from(
            &[Body::Spheroid(s1), Body::Spheroid(s2)],
            &grid_positions(6, 15.0),
        );
        let b1 = BodyBounds {
            eps: (0.6, 1.0),
            rho: (1.5, 2.3),
            x0: (3.0, 5.0),
            y0: (3.0, 5.0),
            z0: (2.5, 3.5),
        };
        let b2 = BodyBounds {
            eps: (1.0, 1.4),
            rho: (2.2, 3.0),
            x0: (10.0, 12.0),
            y0: (9.0, 11.0),
            z0: (3.0, 4.2),
        };
        let settings = SolveSettings { rounds: 2, ..SolveSettings::default() };
        let r12 = decremental_solve(
            &stations,
            &ParameterBox::for_bodies(&[b1, b2]).unwrap(),
            &[s1.mass(), s2.mass()],
            &settings,
        )
        .unwrap();
        let r21 = decremental_solve(
            &stations,
            &ParameterBox::for_bodies(&[b2, b1]).unwrap(),
            &[s2.mass(), s1.mass()],
            &settings,
        )
        .unwrap();
        for j in 0..5 {
            assert_relative_eq!(r12.params[j], r21.params[5 + j], max_relative = 1e-9);
            assert_relative_eq!(r12.params[5 + j], r21.params[j], max_relative = 1e-9);
        }
    }

    #[test]
    fn solution_error_examples() {
        let q = [1.0, 1.0];
        assert_eq!(solution_error(&[1.0, 2.0], &[1.0, 2.0], &q), 0.0);
        // One parameter off by exactly p_mid with q = 1/p_mid^2 gives 1.
        let p_mid = 2.5_f64;
        let delta = solution_error(&[2.0 * p_mid], &[p_mid], &[1.0 / (p_mid * p_mid)]);
        assert_relative_eq!(delta, 1.0, max_relative = 1e-15);
    }

    #[test]
    fn infeasible_midpoint_is_rejected() {
        // eps and z0 ranges whose midpoint body pokes through the surface.
        let pbox = ParameterBox::for_bodies(&[BodyBounds {
            eps: (1.5, 2.5),
            rho: (1.0, 1.4),
            x0: (4.0, 6.0),
            y0: (4.0, 6.0),
            z0: (0.4, 0.8),
        }])
        .unwrap();
        let stations = vec![Station::measured(5.0, 5.0, 10.0)];
        let err = decremental_solve(&stations, &pbox, &[50.0], &SolveSettings::default());
        assert!(matches!(err, Err(Error::InfeasibleBox(_))));
    }
}
