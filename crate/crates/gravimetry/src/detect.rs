//! Peak detection: how many bodies, and where.
//!
//! Scattered surveys are first rasterized by inverse-distance-squared
//! interpolation; strict local maxima of the raster are candidate bodies.
//! Two candidates count as separate bodies only when the intensity valley
//! between them is deep enough relative to their peak values and the noise
//! is small enough relative to the same values, both thresholds defaulting
//! to 20%.

use crate::forward::FieldGrid;
use crate::model::Station;
use crate::{Error, Result};

/// Number of bilinear samples taken along the inter-peak chord when
/// measuring the valley.
const VALLEY_SAMPLES: usize = 65;

/// A local maximum of the rasterized field.
#[derive(Debug, Clone, PartialEq)]
pub struct PeakCandidate {
    /// Refined peak x, km.
    pub x0: f64,
    /// Refined peak y, km.
    pub y0: f64,
    /// Raster value at the raw maximum, mGal.
    pub vz_peak: f64,
    /// False once the candidate has been merged into a stronger peak.
    pub accepted: bool,
    /// Valley fraction to the nearest stronger accepted peak, when one
    /// exists.
    pub valley_to_nearest: Option<f64>,
    /// True when the raw maximum sits on the raster boundary, where the
    /// centroid refinement is unreliable.
    pub on_boundary: bool,
}

/// Detection thresholds; both default to the 20% rule.
#[derive(Debug, Clone, Copy)]
pub struct DetectConfig {
    /// Minimum valley fraction for two peaks to stay distinct.
    pub valley_threshold: f64,
    /// Maximum tolerated noise fraction of the pair's mean pole intensity.
    pub noise_threshold: f64,
}

impl Default for DetectConfig {
    fn default() -> Self {
        DetectConfig { valley_threshold: 0.20, noise_threshold: 0.20 }
    }
}

/// Rasterize scattered measured stations onto a regular grid over their
/// bounding box using inverse-distance-squared weights over all stations.
pub fn rasterize_idw(stations: &[Station], nx: usize, ny: usize) -> Result<FieldGrid> {
    let measured: Vec<&Station> = stations.iter().filter(|s| s.vz.is_some()).collect();
    if measured.len() < 3 {
        return Err(Error::Domain(format!(
            "rasterization needs at least 3 measured stations, got {}",
            measured.len()
        )));
    }
    let x_min = measured.iter().map(|s| s.x).fold(f64::INFINITY, f64::min);
    let x_max = measured.iter().map(|s| s.x).fold(f64::NEG_INFINITY, f64::max);
    let y_min = measured.iter().map(|s| s.y).fold(f64::INFINITY, f64::min);
    let y_max = measured.iter().map(|s| s.y).fold(f64::NEG_INFINITY, f64::max);
    if !(x_min < x_max && y_min < y_max) {
        return Err(Error::Domain("stations are collinear or coincident".into()));
    }
    let sx = (x_max - x_min) / (nx - 1) as f64;
    let sy = (y_max - y_min) / (ny - 1) as f64;
    let mut values = Vec::with_capacity(nx * ny);
    for iy in 0..ny {
        let y = y_min + iy as f64 * sy;
        for ix in 0..nx {
            let x = x_min + ix as f64 * sx;
            let mut num = 0.0;
            let mut den = 0.0;
            let mut exact = None;
            for s in &measured {
                let d2 = (s.x - x).powi(2) + (s.y - y).powi(2);
                if d2 < 1e-12 {
                    exact = s.vz;
                    break;
                }
                let w = 1.0 / d2;
                num += w * s.vz.unwrap();
                den += w;
            }
            values.push(exact.unwrap_or(num / den));
        }
    }
    FieldGrid::new(x_min, x_max, y_min, y_max, nx, ny, values)
}

/// Strict 8-neighborhood local maxima of the raster, each refined to the
/// intensity-weighted centroid of nearby cells above 80% of the peak value.
///
/// Maxima within `min_separation` of a stronger maximum are suppressed;
/// the result is sorted by descending peak value. An all-constant grid has
/// no strict maxima and yields an empty list.
pub fn find_peaks(grid: &FieldGrid, min_separation: f64) -> Result<Vec<PeakCandidate>> {
    if !(min_separation > 0.0) {
        return Err(Error::Domain(format!(
            "min_separation must be positive, got {min_separation}"
        )));
    }
    let (nx, ny) = (grid.nx, grid.ny);
    let mut raw: Vec<(usize, usize, f64)> = Vec::new();
    for iy in 0..ny {
        for ix in 0..nx {
            let v = grid.value(ix, iy);
            let mut is_max = true;
            'neigh: for dy in -1_i64..=1 {
                for dx in -1_i64..=1 {
                    if dx == 0 && dy == 0 {
                        continue;
                    }
                    let jx = ix as i64 + dx;
                    let jy = iy as i64 + dy;
                    if jx < 0 || jy < 0 || jx >= nx as i64 || jy >= ny as i64 {
                        continue;
                    }
                    if grid.value(jx as usize, jy as usize) >= v {
                        is_max = false;
                        break 'neigh;
                    }
                }
            }
            if is_max {
                raw.push((ix, iy, v));
            }
        }
    }
    raw.sort_by(|a, b| b.2.total_cmp(&a.2));

    // Non-maximum suppression within min_separation of a stronger peak.
    let mut kept: Vec<(usize, usize, f64)> = Vec::new();
    for (ix, iy, v) in raw {
        let x = grid.x_at(ix);
        let y = grid.y_at(iy);
        let close = kept.iter().any(|&(kx, ky, _)| {
            let dx = grid.x_at(kx) - x;
            let dy = grid.y_at(ky) - y;
            (dx * dx + dy * dy).sqrt() < min_separation
        });
        if !close {
            kept.push((ix, iy, v));
        }
    }

    let peaks = kept
        .into_iter()
        .map(|(ix, iy, v)| {
            let px = grid.x_at(ix);
            let py = grid.y_at(iy);
            let on_boundary = ix == 0 || iy == 0 || ix == nx - 1 || iy == ny - 1;
            // Intensity-weighted centroid of cells near the peak that carry
            // at least 80% of the peak value.
            let mut wx = 0.0;
            let mut wy = 0.0;
            let mut wsum = 0.0;
            for jy in 0..ny {
                for jx in 0..nx {
                    let cv = grid.value(jx, jy);
                    if cv < 0.8 * v {
                        continue;
                    }
                    let cx = grid.x_at(jx);
                    let cy = grid.y_at(jy);
                    let d = ((cx - px).powi(2) + (cy - py).powi(2)).sqrt();
                    if d >= min_separation {
                        continue;
                    }
                    wx += cv * cx;
                    wy += cv * cy;
                    wsum += cv;
                }
            }
            let (x0, y0) =
                if wsum > 0.0 && !on_boundary { (wx / wsum, wy / wsum) } else { (px, py) };
            PeakCandidate {
                x0,
                y0,
                vz_peak: v,
                accepted: true,
                valley_to_nearest: None,
                on_boundary,
            }
        })
        .collect();
    Ok(peaks)
}

/// Fractional intensity valley between two peaks.
///
/// The reference intensity is the mean of the two pole values; the valley
/// floor is the minimum of bilinear samples along the straight segment
/// between the poles. Returns `(V - v) / V`.
pub fn valley_fraction(pa: &PeakCandidate, pb: &PeakCandidate, grid: &FieldGrid) -> Result<f64> {
    let dist = ((pa.x0 - pb.x0).powi(2) + (pa.y0 - pb.y0).powi(2)).sqrt();
    if dist < 1e-9 {
        return Err(Error::DegeneratePair { x: pa.x0, y: pa.y0 });
    }
    let v_ref = 0.5 * (pa.vz_peak + pb.vz_peak);
    let mut floor = f64::INFINITY;
    for k in 0..VALLEY_SAMPLES {
        let t = k as f64 / (VALLEY_SAMPLES - 1) as f64;
        let x = pa.x0 + t * (pb.x0 - pa.x0);
        let y = pa.y0 + t * (pb.y0 - pa.y0);
        floor = floor.min(grid.sample(x, y));
    }
    Ok((v_ref - floor) / v_ref)
}

/// Apply the two-condition body selection rule.
///
/// Peaks are visited strongest first; a peak stays accepted only if, against
/// every stronger accepted peak, the valley fraction reaches
/// `valley_threshold` and the noise stays below `noise_threshold` of the
/// pair's mean pole intensity. Otherwise it is merged into the stronger
/// peak (flagged, not removed).
///
/// `noise_level` is the noise standard deviation as a fraction of the
/// strongest pole; the condition is rescaled per pair so that weak spurious
/// maxima in low-intensity regions fail it.
pub fn resolve_bodies(
    peaks: &[PeakCandidate],
    grid: &FieldGrid,
    noise_level: f64,
    cfg: &DetectConfig,
) -> Result<Vec<PeakCandidate>> {
    if noise_level < 0.0 {
        return Err(Error::Domain(format!("noise level must be >= 0, got {noise_level}")));
    }
    let mut sorted: Vec<PeakCandidate> = peaks.to_vec();
    sorted.sort_by(|a, b| b.vz_peak.total_cmp(&a.vz_peak));
    let sigma_abs = noise_level * sorted.first().map_or(0.0, |p| p.vz_peak);

    let mut resolved: Vec<PeakCandidate> = Vec::with_capacity(sorted.len());
    for cand in sorted {
        let mut cand = cand.clone();
        let mut distinct = true;
        let mut nearest: Option<(f64, f64)> = None; // (distance, valley)
        for prev in resolved.iter().filter(|p| p.accepted) {
            let valley = valley_fraction(&cand, prev, grid)?;
            let pair_ref = 0.5 * (cand.vz_peak + prev.vz_peak);
            let noise_ok = sigma_abs <= cfg.noise_threshold * pair_ref;
            let d = ((cand.x0 - prev.x0).powi(2) + (cand.y0 - prev.y0).powi(2)).sqrt();
            if nearest.map_or(true, |(nd, _)| d < nd) {
                nearest = Some((d, valley));
            }
            if valley < cfg.valley_threshold || !noise_ok {
                distinct = false;
            }
        }
        cand.accepted = distinct;
        cand.valley_to_nearest = nearest.map(|(_, v)| v);
        resolved.push(cand);
    }
    Ok(resolved)
}

/// Accepted peaks of a resolved list.
pub fn accepted(peaks: &[PeakCandidate]) -> Vec<PeakCandidate> {
    peaks.iter().filter(|p| p.accepted).cloned().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forward::{field_grid, Body};
    use crate::model::Spheroid;

    fn sphere_grid(x0: f64, y0: f64, n: usize) -> FieldGrid {
        let s = Spheroid::new(1.0, 1.0, 2.5, x0, y0, 3.0).unwrap();
        field_grid(&[Body::Spheroid(s)], 0.0, 15.0, 0.0, 15.0, n, n).unwrap()
    }

    #[test]
    fn single_sphere_yields_one_peak_at_center() {
        let g = sphere_grid(7.3, 6.1, 61);
        let peaks = find_peaks(&g, 2.0).unwrap();
        assert_eq!(peaks.len(), 1);
        assert!((peaks[0].x0 - 7.3).abs() < 0.25);
        assert!((peaks[0].y0 - 6.1).abs() < 0.25);
    }

    #[test]
    fn constant_grid_has_no_peaks() {
        let g = FieldGrid::new(0.0, 1.0, 0.0, 1.0, 4, 4, vec![2.0; 16]).unwrap();
        assert!(find_peaks(&g, 0.5).unwrap().is_empty());
    }

    #[test]
    fn peak_detection_converges_with_grid_refinement() {
        let mut errs = Vec::new();
        for n in [31usize, 61, 121] {
            let g = sphere_grid(7.3, 6.1, n);
            let peaks = find_peaks(&g, 2.0).unwrap();
            assert_eq!(peaks.len(), 1);
            let e = ((peaks[0].x0 - 7.3).powi(2) + (peaks[0].y0 - 6.1).powi(2)).sqrt();
            errs.push(e);
        }
        assert!(errs[1] <= errs[0] * 0.75 + 1e-9, "{errs:?}");
        assert!(errs[2] <= errs[1] * 0.75 + 1e-9, "{errs:?}");
    }

    #[test]
    fn valley_is_symmetric_and_grows_with_separation() {
        let make = |sep: f64| {
            let s1 = Spheroid::new(1.0, 1.0, 2.5, 7.5 - sep / 2.0, 7.5, 2.0).unwrap();
            let s2 = Spheroid::new(1.0, 1.0, 2.5, 7.5 + sep / 2.0, 7.5, 2.0).unwrap();
            let g = field_grid(
                &[Body::Spheroid(s1), Body::Spheroid(s2)],
                -10.0,
                25.0,
                -10.0,
                25.0,
                141,
                141,
            )
            .unwrap();
            let peaks = find_peaks(&g, 1.5).unwrap();
            assert_eq!(peaks.len(), 2);
            let v_ab = valley_fraction(&peaks[0], &peaks[1], &g).unwrap();
            let v_ba = valley_fraction(&peaks[1], &peaks[0], &g).unwrap();
            assert!((v_ab - v_ba).abs() < 1e-12);
            v_ab
        };
        let near = make(6.0);
        let far = make(20.0); // 10x the depth
        assert!(far > near);
        assert!(far > 0.9, "well separated spheres should have valley near 1, got {far}");
    }

    #[test]
    fn coincident_peaks_error() {
        let g = sphere_grid(7.5, 7.5, 31);
        let peaks = find_peaks(&g, 2.0).unwrap();
        assert!(matches!(
            valley_fraction(&peaks[0], &peaks[0], &g),
            Err(Error::DegeneratePair { .. })
        ));
    }

    #[test]
    fn high_noise_merges_everything() {
        let s1 = Spheroid::new(1.0, 1.0, 2.5, 4.0, 7.5, 2.0).unwrap();
        let s2 = Spheroid::new(1.0, 1.0, 2.5, 11.0, 7.5, 2.0).unwrap();
        let g = field_grid(
            &[Body::Spheroid(s1), Body::Spheroid(s2)],
            0.0,
            15.0,
            0.0,
            15.0,
            61,
            61,
        )
        .unwrap();
        let peaks = find_peaks(&g, 1.5).unwrap();
        assert_eq!(peaks.len(), 2);
        let cfg = DetectConfig::default();
        let low = resolve_bodies(&peaks, &g, 0.05, &cfg).unwrap();
        assert_eq!(accepted(&low).len(), 2);
        let high = resolve_bodies(&peaks, &g, 0.5, &cfg).unwrap();
        assert_eq!(accepted(&high).len(), 1);
    }

    #[test]
    fn acceptance_decisions_are_scale_invariant() {
        let s1 = Spheroid::new(1.0, 1.0, 2.5, 5.0, 7.5, 2.5).unwrap();
        let s2 = Spheroid::new(1.0, 1.0, 1.8, 10.0, 7.5, 2.5).unwrap();
        let g = field_grid(
            &[Body::Spheroid(s1), Body::Spheroid(s2)],
            0.0,
            15.0,
            0.0,
            15.0,
            61,
            61,
        )
        .unwrap();
        let scaled = FieldGrid::new(
            g.x_min,
            g.x_max,
            g.y_min,
            g.y_max,
            g.nx,
            g.ny,
            g.values.iter().map(|v| v * 7.0).collect(),
        )
        .unwrap();
        let cfg = DetectConfig::default();
        let p1 = find_peaks(&g, 2.0).unwrap();
        let p2 = find_peaks(&scaled, 2.0).unwrap();
        assert_eq!(p1.len(), p2.len());
        for (a, b) in p1.iter().zip(&p2) {
            assert!((a.x0 - b.x0).abs() < 1e-9 && (a.y0 - b.y0).abs() < 1e-9);
        }
        let r1 = resolve_bodies(&p1, &g, 0.1, &cfg).unwrap();
        let r2 = resolve_bodies(&p2, &scaled, 0.1, &cfg).unwrap();
        let acc1: Vec<bool> = r1.iter().map(|p| p.accepted).collect();
        let acc2: Vec<bool> = r2.iter().map(|p| p.accepted).collect();
        assert_eq!(acc1, acc2);
    }

    #[test]
    fn accepted_never_exceeds_raw_count() {
        let g = sphere_grid(7.5, 7.5, 41);
        let peaks = find_peaks(&g, 2.0).unwrap();
        let resolved = resolve_bodies(&peaks, &g, 0.05, &DetectConfig::default()).unwrap();
        assert!(accepted(&resolved).len() <= peaks.len());
    }

    #[test]
    fn idw_reproduces_station_values_and_finds_peak() {
        let s = Spheroid::new(1.2, 0.8, 2.0, 8.0, 6.0, 3.0).unwrap();
        let stations: Vec<Station> = (0..81)
            .map(|k| {
                let x = (k % 9) as f64 * 15.0 / 8.0;
                let y = (k / 9) as f64 * 15.0 / 8.0;
                let p = Station::position(x, y);
                Station::measured(x, y, crate::forward::spheroid_vz(&s, &p))
            })
            .collect();
        let g = rasterize_idw(&stations, 61, 61).unwrap();
        let peaks = find_peaks(&g, 2.0).unwrap();
        assert!(!peaks.is_empty());
        assert!((peaks[0].x0 - 8.0).abs() < 0.8);
        assert!((peaks[0].y0 - 6.0).abs() < 0.8);
    }
}
