//! Closed-form initial depth and mass estimates under a homogeneous-sphere
//! assumption.
//!
//! A buried point mass at depth z0 produces V_z(s) = γ·M·z0/(z0² + s²)^(3/2)
//! at horizontal distance s from its epicenter. Two intensity readings pin
//! both unknowns: the ratio v of a far probe P to a near probe C determines
//! μ = z0/s through μ(v, ψ) = sqrt((v^(2/3) − ψ²)/(1 − v^(2/3))), where
//! ψ = Δ/s accounts for C sitting off the epicenter by Δ; the depth is
//! z0 = μ·s and the mass follows from the reading at C.

use crate::detect::PeakCandidate;
use crate::model::{Station, GAMMA};
use crate::{Error, Result};

/// Probe-pair geometry filter: P must lie between these multiples of the
/// depth hint from the peak, operationalizing the s ≈ z0 accuracy rule.
const PROBE_WINDOW: (f64, f64) = (0.5, 2.0);

/// A depth/mass estimate averaged over probe pairs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DepthMassEstimate {
    /// Estimated center depth, km.
    pub z0: f64,
    /// Estimated mass, 10⁹ t.
    pub mass: f64,
    /// Number of probe pairs averaged.
    pub n_pairs: usize,
    /// Spread (max − min) of the per-pair depths, km.
    pub spread: f64,
    /// Probe pairs dropped because their geometry contradicted the sphere
    /// model (noise can push the intensity ratio out of range).
    pub rejected_pairs: usize,
}

/// Depth-to-distance ratio μ from the intensity ratio `v` of a probe to the
/// epicenter maximum: sqrt(v^(2/3)/(1 − v^(2/3))). Strictly increasing on
/// (0, 1).
pub fn mu_of_v(v: f64) -> Result<f64> {
    if !(v > 0.0 && v < 1.0) {
        return Err(Error::Domain(format!("intensity ratio must lie in (0, 1), got {v}")));
    }
    let t = v.powf(2.0 / 3.0);
    Ok((t / (1.0 - t)).sqrt())
}

/// Generalized μ for a near probe C off the epicenter: with ψ = Δ/s,
/// sqrt((v^(2/3) − ψ²)/(1 − v^(2/3))). Reduces to [`mu_of_v`] at ψ = 0.
pub fn mu_general(v: f64, psi: f64) -> Result<f64> {
    if !(v > 0.0 && v < 1.0) {
        return Err(Error::Domain(format!("intensity ratio must lie in (0, 1), got {v}")));
    }
    if !(0.0..1.0).contains(&psi) {
        return Err(Error::Domain(format!("offset ratio must lie in [0, 1), got {psi}")));
    }
    let t = v.powf(2.0 / 3.0);
    if t <= psi * psi {
        return Err(Error::InconsistentProbe { v, psi });
    }
    Ok(((t - psi * psi) / (1.0 - t)).sqrt())
}

/// Depth of a spherical body from one probe pair: `z0 = μ(v, ψ)·s` with
/// v = vz_p/vz_c and ψ = delta/s.
///
/// `s` is the distance of probe P from the peak, `delta` the distance of the
/// near probe C from the peak; requires `0 < vz_p < vz_c` and
/// `0 ≤ delta < s`.
pub fn depth_from_pair(vz_p: f64, vz_c: f64, s: f64, delta: f64) -> Result<f64> {
    if !(vz_p > 0.0 && vz_c > vz_p) {
        return Err(Error::Domain(format!(
            "probe intensities must satisfy 0 < vz_p < vz_c, got {vz_p}, {vz_c}"
        )));
    }
    if !(s > 0.0 && delta >= 0.0 && delta < s) {
        return Err(Error::Domain(format!(
            "probe geometry must satisfy 0 <= delta < s, got delta={delta}, s={s}"
        )));
    }
    Ok(mu_general(vz_p / vz_c, delta / s)? * s)
}

/// Mass of a spherical body from the reading `vz_c` at distance `delta`
/// from the epicenter, given its depth: (1/γ)·(z0² + Δ²)^(3/2)/z0·vz_c.
/// At Δ = 0 this is the familiar M = (1/γ)·z0²·V_zmax.
pub fn mass_from_point(z0: f64, delta: f64, vz_c: f64) -> Result<f64> {
    if !(z0 > 0.0 && delta >= 0.0 && vz_c > 0.0) {
        return Err(Error::Domain(format!(
            "mass_from_point needs z0 > 0, delta >= 0, vz_c > 0; got {z0}, {delta}, {vz_c}"
        )));
    }
    Ok((z0 * z0 + delta * delta).powf(1.5) / z0 * vz_c / GAMMA)
}

/// Estimate depth and mass for the body under `peak` by averaging over
/// probe pairs.
///
/// The near probe C is the measured station closest to the peak. Far probes
/// P are stations whose distance s from the peak lies within
/// [`PROBE_WINDOW`] of `z0_hint`, that read less than C, and that are not
/// closer to any other peak in `other_peaks` than to this one. Pairs whose
/// geometry contradicts the sphere model are dropped and counted.
pub fn estimate_body(
    peak: &PeakCandidate,
    other_peaks: &[PeakCandidate],
    stations: &[Station],
    z0_hint: f64,
) -> Result<DepthMassEstimate> {
    if !(z0_hint > 0.0) {
        return Err(Error::Domain(format!("z0 hint must be positive, got {z0_hint}")));
    }
    let measured: Vec<&Station> = stations.iter().filter(|s| s.vz.is_some()).collect();
    let c = measured
        .iter()
        .min_by(|a, b| {
            a.distance_to(peak.x0, peak.y0).total_cmp(&b.distance_to(peak.x0, peak.y0))
        })
        .ok_or_else(|| Error::EstimationFailed("no measured stations".into()))?;
    let vz_c = c.vz.unwrap();
    if vz_c <= 0.0 {
        return Err(Error::EstimationFailed("near probe reads a non-positive value".into()));
    }
    let delta = c.distance_to(peak.x0, peak.y0);

    let mut depths = Vec::new();
    let mut masses = Vec::new();
    let mut rejected = 0usize;
    for p in &measured {
        let s = p.distance_to(peak.x0, peak.y0);
        if s < PROBE_WINDOW.0 * z0_hint || s > PROBE_WINDOW.1 * z0_hint {
            continue;
        }
        if s <= delta {
            continue;
        }
        // Ownership: skip probes that belong to another body's anomaly.
        let owned_elsewhere = other_peaks.iter().any(|o| {
            (o.x0 != peak.x0 || o.y0 != peak.y0) && p.distance_to(o.x0, o.y0) < s
        });
        if owned_elsewhere {
            continue;
        }
        let vz_p = p.vz.unwrap();
        if !(vz_p > 0.0 && vz_p < vz_c) {
            rejected += 1;
            continue;
        }
        match depth_from_pair(vz_p, vz_c, s, delta) {
            Ok(z0) => {
                let m = mass_from_point(z0, delta, vz_c)?;
                depths.push(z0);
                masses.push(m);
            }
            Err(Error::InconsistentProbe { .. }) | Err(Error::Domain(_)) => rejected += 1,
            Err(e) => return Err(e),
        }
    }
    if depths.is_empty() {
        return Err(Error::EstimationFailed(format!(
            "no valid probe pair near peak ({:.2}, {:.2}); {} rejected",
            peak.x0, peak.y0, rejected
        )));
    }
    let n = depths.len() as f64;
    let z0 = depths.iter().sum::<f64>() / n;
    let mass = masses.iter().sum::<f64>() / n;
    let spread = depths.iter().cloned().fold(f64::MIN, f64::max)
        - depths.iter().cloned().fold(f64::MAX, f64::min);
    Ok(DepthMassEstimate { z0, mass, n_pairs: depths.len(), spread, rejected_pairs: rejected })
}

/// Median nearest-neighbor distance among stations: the default depth hint
/// when nothing better is known. The estimate is then rerun once with the
/// first pass's depth.
pub fn median_station_spacing(stations: &[Station]) -> Result<f64> {
    if stations.len() < 2 {
        return Err(Error::Domain("need at least 2 stations for a spacing".into()));
    }
    let mut nearest: Vec<f64> = stations
        .iter()
        .enumerate()
        .map(|(i, a)| {
            stations
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .map(|(_, b)| a.distance_to(b.x, b.y))
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    nearest.sort_by(f64::total_cmp);
    Ok(nearest[nearest.len() / 2])
}

/// Run [`estimate_body`] with the default spacing hint, then once more with
/// the first pass's depth as the hint.
pub fn estimate_body_iterated(
    peak: &PeakCandidate,
    other_peaks: &[PeakCandidate],
    stations: &[Station],
) -> Result<DepthMassEstimate> {
    let hint = median_station_spacing(stations)?;
    let first = estimate_body(peak, other_peaks, stations, hint)?;
    estimate_body(peak, other_peaks, stations, first.z0).or(Ok(first))
}
