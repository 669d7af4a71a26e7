//! Spatial mode grids inside the illuminated beam region.
//!
//! A mode grid assigns one camera pixel per symbol of the d-dimensional
//! alphabet. Three lattice layouts are supported: a Cartesian grid aligned
//! with the pixel axes, the same grid rotated by 45 degrees, and a hexagonal
//! (triangular) lattice. Alice and Bob share a grid through a conjugate
//! pixel mapping: identity in the position basis, point reflection through
//! the beam center in the momentum basis.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::num::Real;
use crate::physics::Plane;
use crate::qkd::QkdMetrics;

#[derive(Debug, Error, PartialEq)]
pub enum LayoutError {
    #[error("target pixel count must be at least 1")]
    EmptyTarget,
    #[error("mode spacing must be at least 1 pixel, got {0}")]
    SpacingTooSmall(f64),
    #[error("grid degenerated to {0} mode(s); at least 2 required")]
    TooFewModes(usize),
    #[error("pixel ({x}, {y}) lies outside the beam region")]
    OutOfRegion { x: i32, y: i32 },
}

/// Integer camera pixel coordinate in a detector's local frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Pixel {
    pub x: i32,
    pub y: i32,
}

impl Pixel {
    pub fn new(x: i32, y: i32) -> Self {
        Self { x, y }
    }

    fn dist_sq(&self, other: &Pixel) -> i64 {
        let dx = (self.x - other.x) as i64;
        let dy = (self.y - other.y) as i64;
        dx * dx + dy * dy
    }
}

/// Lattice layout kind. The declaration order is the merge tie-break order.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(rename_all = "snake_case")]
pub enum Layout {
    Cartesian,
    Angled45,
    Hex,
}

impl std::fmt::Display for Layout {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Layout::Cartesian => write!(f, "cartesian"),
            Layout::Angled45 => write!(f, "angled45"),
            Layout::Hex => write!(f, "hex"),
        }
    }
}

impl Layout {
    /// Smallest mode spacing at which every native lattice pitch of this
    /// layout stays at or above one pixel. Below this the pre-rounding
    /// lattice has sub-pixel structure and rounding aliases it onto a
    /// different lattice: the rotated grid's diagonal rows are s/sqrt(2)
    /// apart, the hexagonal rows s*sqrt(3)/2.
    pub fn min_spacing_px(&self) -> f64 {
        match self {
            Layout::Cartesian => 1.0,
            Layout::Angled45 => std::f64::consts::SQRT_2,
            Layout::Hex => 2.0 / 3f64.sqrt(),
        }
    }
}

/// Circular set of integer pixels around the beam center.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct BeamRegion {
    pub center: Pixel,
    pub radius_px: f64,
    pub pixel_count: usize,
}

impl BeamRegion {
    pub fn contains(&self, p: Pixel) -> bool {
        (p.dist_sq(&self.center) as f64) <= self.radius_px * self.radius_px + 1e-9
    }
}

/// Smallest circular region around `center` containing at least
/// `target_pixel_count` integer pixel sites.
pub fn beam_region(center: Pixel, target_pixel_count: usize) -> Result<BeamRegion, LayoutError> {
    if target_pixel_count == 0 {
        return Err(LayoutError::EmptyTarget);
    }
    let bound = ((target_pixel_count as f64 / std::f64::consts::PI).sqrt().ceil() as i64) + 2;
    let mut dist_sq: Vec<i64> = Vec::with_capacity(((2 * bound + 1) * (2 * bound + 1)) as usize);
    for dy in -bound..=bound {
        for dx in -bound..=bound {
            dist_sq.push(dx * dx + dy * dy);
        }
    }
    dist_sq.sort_unstable();
    let chosen_sq = dist_sq[target_pixel_count - 1];
    let pixel_count = dist_sq.iter().take_while(|&&d| d <= chosen_sq).count();
    Ok(BeamRegion {
        center,
        radius_px: (chosen_sq as f64).sqrt(),
        pixel_count,
    })
}

/// An ordered set of mode pixels, one pixel per mode.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModeGrid {
    pub layout: Layout,
    pub spacing_px: f64,
    pub center: Pixel,
    pub radius_px: f64,
    pub modes: Vec<Pixel>,
}

impl ModeGrid {
    pub fn d(&self) -> usize {
        self.modes.len()
    }

    pub fn region(&self) -> BeamRegion {
        BeamRegion {
            center: self.center,
            radius_px: self.radius_px,
            // Count is not stored in the serialized form; recompute lazily
            // where it matters (analytic background density uses
            // DetectionParams::pixels_n, not this).
            pixel_count: 0,
        }
    }

    /// Index of the mode at exactly this pixel, if any.
    pub fn mode_index(&self, p: Pixel) -> Option<usize> {
        self.modes.binary_search(&p).ok()
    }

    /// Builds a grid from explicit pixels, enforcing the grid invariants.
    pub fn from_pixels(
        layout: Layout,
        spacing_px: f64,
        region: &BeamRegion,
        pixels: Vec<Pixel>,
    ) -> Result<Self, LayoutError> {
        let mut seen = HashSet::new();
        let mut modes = Vec::with_capacity(pixels.len());
        for p in pixels {
            if !region.contains(p) {
                return Err(LayoutError::OutOfRegion { x: p.x, y: p.y });
            }
            if seen.insert(p) {
                modes.push(p);
            }
        }
        modes.sort_by_key(|p| (p.y, p.x));
        if modes.len() < 2 {
            return Err(LayoutError::TooFewModes(modes.len()));
        }
        Ok(Self {
            layout,
            spacing_px,
            center: region.center,
            radius_px: region.radius_px,
            modes,
        })
    }
}

/// Generates a mode grid of the requested layout and spacing inside the
/// region. Lattice sites are rounded to the nearest pixel, sites outside
/// the region are discarded, duplicates after rounding are dropped, and
/// the surviving modes are ordered row-major by (y, x).
pub fn generate_grid(
    layout: Layout,
    spacing_px: f64,
    region: &BeamRegion,
) -> Result<ModeGrid, LayoutError> {
    if !(spacing_px >= layout.min_spacing_px()) {
        return Err(LayoutError::SpacingTooSmall(spacing_px));
    }
    let n = (region.radius_px / spacing_px).ceil() as i64 + 2;
    let cx = region.center.x as f64;
    let cy = region.center.y as f64;
    let mut pixels = Vec::new();
    match layout {
        Layout::Cartesian => {
            for j in -n..=n {
                for i in -n..=n {
                    let x = cx + i as f64 * spacing_px;
                    let y = cy + j as f64 * spacing_px;
                    pixels.push(Pixel::new(x.round() as i32, y.round() as i32));
                }
            }
        }
        Layout::Angled45 => {
            let inv_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;
            for j in -n..=n {
                for i in -n..=n {
                    let u = (i - j) as f64 * spacing_px * inv_sqrt2;
                    let v = (i + j) as f64 * spacing_px * inv_sqrt2;
                    pixels.push(Pixel::new((cx + u).round() as i32, (cy + v).round() as i32));
                }
            }
        }
        Layout::Hex => {
            let row_height = spacing_px * 3f64.sqrt() / 2.0;
            let rows = (region.radius_px / row_height).ceil() as i64 + 2;
            for j in -rows..=rows {
                let y = cy + j as f64 * row_height;
                let offset = if j.rem_euclid(2) == 1 { 0.5 } else { 0.0 };
                for i in -n..=n {
                    let x = cx + (i as f64 + offset) * spacing_px;
                    pixels.push(Pixel::new(x.round() as i32, y.round() as i32));
                }
            }
        }
    }
    let inside: Vec<Pixel> = pixels.into_iter().filter(|p| region.contains(*p)).collect();
    ModeGrid::from_pixels(layout, spacing_px, region, inside)
}

/// Bob's pixel conjugate to an Alice mode pixel, in Bob's local frame.
///
/// Position-basis images register identically after calibration; momentum
/// anticorrelation maps to a point reflection through the beam center, so
/// the reversed idler momentum lines up matched modes on the matrix
/// diagonal.
pub fn bob_mode_pixel(
    alice_pixel: Pixel,
    basis: Plane,
    region_bob: &BeamRegion,
) -> Result<Pixel, LayoutError> {
    let mapped = match basis {
        Plane::Position => alice_pixel,
        Plane::Momentum => Pixel::new(
            2 * region_bob.center.x - alice_pixel.x,
            2 * region_bob.center.y - alice_pixel.y,
        ),
    };
    if !region_bob.contains(mapped) {
        return Err(LayoutError::OutOfRegion {
            x: mapped.x,
            y: mapped.y,
        });
    }
    Ok(mapped)
}

/// One sweep result: a dimension, the layout that produced it, and its
/// metrics.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SweepRow<T> {
    pub d: usize,
    pub layout: Layout,
    pub metrics: QkdMetrics<T>,
}

/// Combines multi-layout sweep results: for each distinct dimension the
/// entry with the lowest QDER wins, ties broken by layout order
/// (cartesian < angled45 < hex). Output is sorted by ascending d.
pub fn merge_sweeps<T: Real>(mut rows: Vec<SweepRow<T>>) -> Vec<SweepRow<T>> {
    rows.sort_by(|a, b| {
        a.d.cmp(&b.d)
            .then(a.metrics.qder_e.partial_cmp(&b.metrics.qder_e).unwrap())
            .then(a.layout.cmp(&b.layout))
    });
    rows.dedup_by_key(|r| r.d);
    rows
}

#[cfg(test)]
mod tests {
    use super::*;

    fn default_region() -> BeamRegion {
        beam_region(Pixel::new(64, 64), 4293).unwrap()
    }

    /// Brute-force lattice enumeration oracle for the pixel count at a radius.
    fn count_within(center: Pixel, radius: f64) -> usize {
        let r = radius.ceil() as i32 + 1;
        let mut n = 0;
        for dy in -r..=r {
            for dx in -r..=r {
                if ((dx * dx + dy * dy) as f64) <= radius * radius + 1e-9 {
                    n += 1;
                }
            }
        }
        let _ = center;
        n
    }

    #[test]
    fn beam_region_minimal_target() {
        let r = beam_region(Pixel::new(10, 10), 1).unwrap();
        assert_eq!(r.pixel_count, 1);
        assert_eq!(r.radius_px, 0.0);
        assert!(beam_region(Pixel::new(0, 0), 0).is_err());
    }

    #[test]
    fn beam_region_default_matches_enumeration() {
        let region = default_region();
        assert!(region.pixel_count >= 4293);
        assert!((region.radius_px - 37.0).abs() < 1.0, "{}", region.radius_px);
        assert_eq!(count_within(region.center, region.radius_px), region.pixel_count);
        // Smallest such radius: shrinking below the chosen lattice distance
        // must fall under the target.
        let shrunk = region.radius_px - 1e-6;
        assert!(count_within(region.center, shrunk) < 4293 || shrunk < 0.0);
    }

    #[test]
    fn beam_region_counts_monotone_in_target() {
        let mut prev = 0;
        for target in [1usize, 5, 20, 100, 500, 4293] {
            let r = beam_region(Pixel::new(64, 64), target).unwrap();
            assert!(r.pixel_count >= prev);
            assert!(r.pixel_count >= target);
            prev = r.pixel_count;
        }
    }

    #[test]
    fn cartesian_three_by_three() {
        let region = BeamRegion {
            center: Pixel::new(64, 64),
            radius_px: 1.5,
            pixel_count: 9,
        };
        let grid = generate_grid(Layout::Cartesian, 1.0, &region).unwrap();
        assert_eq!(grid.d(), 9);
        assert_eq!(grid.modes[0], Pixel::new(63, 63));
        assert_eq!(grid.modes[8], Pixel::new(65, 65));
    }

    #[test]
    fn oversized_spacing_fails() {
        let region = default_region();
        for layout in [Layout::Cartesian, Layout::Angled45, Layout::Hex] {
            let err = generate_grid(layout, 2.5 * region.radius_px, &region).unwrap_err();
            assert_eq!(err, LayoutError::TooFewModes(1), "{layout}");
        }
        assert!(matches!(
            generate_grid(Layout::Cartesian, 0.5, &region),
            Err(LayoutError::SpacingTooSmall(_))
        ));
    }

    #[test]
    fn hex_packs_denser_than_cartesian() {
        // Enumeration over radii at and beyond 10 spacings.
        for radius in [20.0, 30.0, 40.0] {
            let region = BeamRegion {
                center: Pixel::new(64, 64),
                radius_px: radius,
                pixel_count: 0,
            };
            let hex = generate_grid(Layout::Hex, 2.0, &region).unwrap();
            let cart = generate_grid(Layout::Cartesian, 2.0, &region).unwrap();
            assert!(
                hex.d() >= cart.d(),
                "radius {radius}: hex {} < cart {}",
                hex.d(),
                cart.d()
            );
        }
    }

    #[test]
    fn all_modes_inside_region_and_distinct() {
        let region = default_region();
        for layout in [Layout::Cartesian, Layout::Angled45, Layout::Hex] {
            for spacing in [1.0, 2.8, 3.3, 6.9, 11.0] {
                let grid = generate_grid(layout, spacing, &region).unwrap();
                let unique: HashSet<_> = grid.modes.iter().collect();
                assert_eq!(unique.len(), grid.d());
                assert!(grid.modes.iter().all(|p| region.contains(*p)));
                // Row-major order.
                let mut sorted = grid.modes.clone();
                sorted.sort_by_key(|p| (p.y, p.x));
                assert_eq!(sorted, grid.modes);
            }
        }
    }

    #[test]
    fn min_pairwise_distance_respects_rounding_slack() {
        let region = default_region();
        for layout in [Layout::Cartesian, Layout::Angled45, Layout::Hex] {
            for spacing in [2.0, 3.3, 5.7] {
                let grid = generate_grid(layout, spacing, &region).unwrap();
                let mut min_sq = i64::MAX;
                for (i, a) in grid.modes.iter().enumerate() {
                    for b in &grid.modes[i + 1..] {
                        min_sq = min_sq.min(a.dist_sq(b));
                    }
                }
                let slack = spacing - std::f64::consts::SQRT_2;
                assert!(
                    (min_sq as f64).sqrt() >= slack,
                    "{layout} spacing {spacing}: min dist {}",
                    (min_sq as f64).sqrt()
                );
            }
        }
    }

    #[test]
    fn grid_generation_is_deterministic() {
        let region = default_region();
        let a = generate_grid(Layout::Hex, 3.3, &region).unwrap();
        let b = generate_grid(Layout::Hex, 3.3, &region).unwrap();
        assert_eq!(serde_json::to_vec(&a).unwrap(), serde_json::to_vec(&b).unwrap());
    }

    #[test]
    fn mode_fraction_stays_below_13_percent() {
        assert!(545.0 / 4293.0 < 0.13);
        let region = default_region();
        let grid = generate_grid(Layout::Cartesian, 2.8, &region).unwrap();
        assert!(grid.d() as f64 / region.pixel_count as f64 <= 0.145, "{}", grid.d());
    }

    #[test]
    fn bob_pixel_mapping() {
        let region = default_region();
        assert_eq!(
            bob_mode_pixel(Pixel::new(10, 20), Plane::Position, &region),
            Err(LayoutError::OutOfRegion { x: 10, y: 20 })
        );
        let inside = Pixel::new(40, 60);
        assert_eq!(
            bob_mode_pixel(inside, Plane::Position, &region).unwrap(),
            inside
        );
        let reflected = bob_mode_pixel(Pixel::new(60, 70), Plane::Momentum, &region).unwrap();
        assert_eq!(reflected, Pixel::new(68, 58));
        // Involution.
        let back = bob_mode_pixel(reflected, Plane::Momentum, &region).unwrap();
        assert_eq!(back, Pixel::new(60, 70));
        // Reflection landing outside the region is rejected.
        let region_small = BeamRegion {
            center: Pixel::new(64, 64),
            radius_px: 5.0,
            pixel_count: 0,
        };
        let off = Pixel::new(60, 61);
        assert!(region_small.contains(off));
        assert!(bob_mode_pixel(off, Plane::Momentum, &region_small).is_ok());
    }

    fn metrics(d: usize, e: f64) -> QkdMetrics<f64> {
        QkdMetrics {
            d,
            qder_e: e,
            threshold_e: 0.5,
            bits_per_photon: 1.0,
            sifted_rate: 1.0,
            bit_rate: 1.0,
        }
    }

    #[test]
    fn merge_keeps_lowest_error_per_dimension() {
        let rows = vec![
            SweepRow { d: 90, layout: Layout::Cartesian, metrics: metrics(90, 0.10) },
            SweepRow { d: 90, layout: Layout::Hex, metrics: metrics(90, 0.08) },
            SweepRow { d: 50, layout: Layout::Angled45, metrics: metrics(50, 0.02) },
        ];
        let merged = merge_sweeps(rows);
        assert_eq!(merged.len(), 2);
        assert_eq!(merged[0].d, 50);
        assert_eq!(merged[1].layout, Layout::Hex);
        assert!((merged[1].metrics.qder_e - 0.08).abs() < 1e-15);
    }

    #[test]
    fn merge_tie_breaks_by_layout_order() {
        let rows = vec![
            SweepRow { d: 90, layout: Layout::Hex, metrics: metrics(90, 0.10) },
            SweepRow { d: 90, layout: Layout::Cartesian, metrics: metrics(90, 0.10) },
        ];
        let merged = merge_sweeps(rows);
        assert_eq!(merged.len(), 1);
        assert_eq!(merged[0].layout, Layout::Cartesian);
    }

    #[test]
    fn merge_empty_and_disjoint() {
        assert!(merge_sweeps::<f64>(vec![]).is_empty());
        let rows = vec![
            SweepRow { d: 20, layout: Layout::Cartesian, metrics: metrics(20, 0.1) },
            SweepRow { d: 30, layout: Layout::Hex, metrics: metrics(30, 0.2) },
        ];
        let merged = merge_sweeps(rows.clone());
        assert_eq!(merged.len(), 2);
        assert_eq!(merged[0].d, rows[0].d);
        assert_eq!(merged[1].d, rows[1].d);
    }
}
