//! Closed-form joint detection matrix over a mode grid.
//!
//! Each matrix cell is the sum of four parts: the correlated pair terms
//! alpha for the position and momentum configurations, and the accidental
//! coincidence terms beta for both. Cells are evaluated in mode-label
//! coordinates (Alice's local pixel frame). For the momentum plane the
//! label of Bob's mode is the point reflection of his physical pixel, which
//! folds the sign reversal of the idler momentum into the cell formula, so
//! both planes share one functional form: narrow Gaussian on the label
//! difference, broad Gaussian on the centered label sum.
//!
//! Efficiency convention: `eta_s`/`eta_i` are the per-arm system detection
//! efficiencies at a balanced basis splitter (the directly fitted
//! quantity: per-beam singles = eta (P + B)). A biased splitter rescales
//! the arms by 2*split and 2*(1-split).

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::layouts::{BeamRegion, ModeGrid, Pixel};
use crate::num::{lit, Real};
use crate::physics::{marginal_width_sq, CorrelationWidths, OpticsParams, Plane, SourceParams};

#[derive(Debug, Error, PartialEq)]
pub enum AnalyticError {
    #[error("{name} must lie in [0, 1], got {value}")]
    EfficiencyOutOfRange { name: &'static str, value: f64 },
    #[error("{name} must be strictly positive, got {value}")]
    NonPositive { name: &'static str, value: f64 },
    #[error("{name} must be nonnegative, got {value}")]
    Negative { name: &'static str, value: f64 },
    #[error("joint detection matrix needs d >= 2, got {0}")]
    DegenerateGrid(usize),
    #[error("count for cell ({bob}, {alice}) is negative or non-finite")]
    InvalidCount { bob: usize, alice: usize },
    #[error("counts length {len} is not d*d for d = {d}")]
    ShapeMismatch { len: usize, d: usize },
}

/// Detector-system parameters entering the coincidence model.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DetectionParams<T> {
    /// Signal-arm system efficiency (balanced-splitter convention).
    pub eta_s: T,
    /// Idler-arm system efficiency.
    pub eta_i: T,
    /// Coincidence gate width tau (total window), nanoseconds.
    pub tau_ns: T,
    /// Total background photon rate per beam, photons/s.
    pub background_per_s: T,
    /// Number of pixels in the illuminated beam region (B is spread
    /// uniformly over them).
    pub pixels_n: usize,
    /// Acquisition time, seconds.
    pub acquisition_s: T,
}

impl<T: Real> DetectionParams<T> {
    pub fn validate(&self) -> Result<(), AnalyticError> {
        for (name, value) in [("eta_s", self.eta_s), ("eta_i", self.eta_i)] {
            if !(value >= T::zero() && value <= T::one()) {
                return Err(AnalyticError::EfficiencyOutOfRange {
                    name,
                    value: value.to_f64().unwrap_or(f64::NAN),
                });
            }
        }
        if !(self.tau_ns >= T::zero()) {
            return Err(AnalyticError::Negative {
                name: "tau_ns",
                value: self.tau_ns.to_f64().unwrap_or(f64::NAN),
            });
        }
        if !(self.background_per_s >= T::zero()) {
            return Err(AnalyticError::Negative {
                name: "background_per_s",
                value: self.background_per_s.to_f64().unwrap_or(f64::NAN),
            });
        }
        if self.pixels_n == 0 {
            return Err(AnalyticError::NonPositive {
                name: "pixels_n",
                value: 0.0,
            });
        }
        if !(self.acquisition_s > T::zero()) {
            return Err(AnalyticError::NonPositive {
                name: "acquisition_s",
                value: self.acquisition_s.to_f64().unwrap_or(f64::NAN),
            });
        }
        Ok(())
    }

    /// Reference detector of the experiment: eta = 0.02, tau = 20 ns,
    /// B = 6.75e6 photons/s over 4293 pixels.
    pub fn current_experiment() -> Self {
        Self {
            eta_s: lit(0.02),
            eta_i: lit(0.02),
            tau_ns: lit(20.0),
            background_per_s: lit(6.75e6),
            pixels_n: 4293,
            acquisition_s: lit(100.0),
        }
    }
}

/// Projection parameters for next-generation detectors.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct NextGenParams<T> {
    pub eta: T,
    pub tau_ns: T,
    /// Spatial-resolution improvement factor: the effective pixel scale
    /// shrinks by this factor and the correlation widths shrink by it in
    /// pixel units.
    pub resolution_gain: T,
}

impl<T: Real> Default for NextGenParams<T> {
    fn default() -> Self {
        Self {
            eta: lit(0.3),
            tau_ns: lit(0.1),
            resolution_gain: lit(1.5),
        }
    }
}

/// How cells are integrated over pixel areas.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PixelIntegration {
    /// Density at the pixel-center pair times the pixel areas. Valid while
    /// the correlation width spans at least a pixel, which holds for
    /// camera-measured widths (they already carry the pixel quantization).
    Midpoint,
    /// n x n sub-pixel midpoint refinement of each pixel integral.
    Subpixel(u8),
    /// Per plane: midpoint while the amplitude correlation width is at
    /// least one pixel, 8 x 8 sub-pixel refinement below that (where the
    /// density is no longer flat across a cell and midpoint overestimates
    /// the capture).
    Auto,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ResolvedIntegration {
    Midpoint,
    Subpixel(u8),
}

/// Everything needed to evaluate expected coincidence counts on a grid.
#[derive(Debug, Clone)]
pub struct AnalyticModel<T> {
    pub source: SourceParams<T>,
    pub widths: CorrelationWidths<T>,
    pub optics: OpticsParams<T>,
    pub detection: DetectionParams<T>,
    pub region: BeamRegion,
    /// Probability that a photon routes to the position basis.
    pub split_ratio: T,
    pub integration: PixelIntegration,
}

/// Pixel-unit quantities for one plane.
struct PlaneCtx<T> {
    delta_px: T,
    sigma_px: T,
    /// Normalization of the pair density in px^-4.
    pair_norm: T,
    /// Marginal width^2 in px^2.
    marg_wsq: T,
    /// eta_s_arm * eta_i_arm for this plane.
    weight: T,
    /// Per-pixel background rate, photons/s.
    bg_px: T,
    integration: ResolvedIntegration,
}

impl<T: Real> AnalyticModel<T> {
    pub fn validate(&self) -> Result<(), AnalyticError> {
        self.detection.validate()?;
        if !(self.split_ratio > T::zero() && self.split_ratio < T::one()) {
            return Err(AnalyticError::EfficiencyOutOfRange {
                name: "split_ratio",
                value: self.split_ratio.to_f64().unwrap_or(f64::NAN),
            });
        }
        Ok(())
    }

    fn plane_ctx(&self, plane: Plane) -> PlaneCtx<T> {
        let scale = self.optics.plane_scale(plane);
        let delta_px = self.widths.narrow(plane) / scale;
        let sigma_px = self.widths.broad(plane) / scale;
        let pi2 = T::PI() * T::PI();
        let pair_norm = lit::<T>(4.0) / (pi2 * delta_px * delta_px * sigma_px * sigma_px);
        let marg_wsq = marginal_width_sq(plane, &self.widths) / (scale * scale);
        let arm = match plane {
            Plane::Position => lit::<T>(2.0) * self.split_ratio,
            Plane::Momentum => lit::<T>(2.0) * (T::one() - self.split_ratio),
        };
        let integration = match self.integration {
            PixelIntegration::Midpoint => ResolvedIntegration::Midpoint,
            PixelIntegration::Subpixel(n) => ResolvedIntegration::Subpixel(n.max(1)),
            PixelIntegration::Auto => {
                if delta_px >= T::one() {
                    ResolvedIntegration::Midpoint
                } else {
                    ResolvedIntegration::Subpixel(8)
                }
            }
        };
        PlaneCtx {
            delta_px,
            sigma_px,
            pair_norm,
            marg_wsq,
            weight: (arm * self.detection.eta_s) * (arm * self.detection.eta_i),
            bg_px: self.detection.background_per_s / lit(self.detection.pixels_n as f64),
            integration,
        }
    }

    /// Centered pixel coordinate in label space.
    fn centered(&self, p: Pixel) -> [T; 2] {
        [
            lit((p.x - self.region.center.x) as f64),
            lit((p.y - self.region.center.y) as f64),
        ]
    }

    /// Pair density factor for one axis pair, integrated per the
    /// resolved scheme over the two unit pixel cells.
    fn pair_axis_integral(&self, u: T, v: T, ctx: &PlaneCtx<T>) -> T {
        let d2 = ctx.delta_px * ctx.delta_px;
        let s2 = ctx.sigma_px * ctx.sigma_px;
        match ctx.integration {
            ResolvedIntegration::Midpoint => (-u * u / d2 - v * v / s2).exp(),
            ResolvedIntegration::Subpixel(n) => {
                let n = n as usize;
                let inv_n = lit::<T>(1.0 / n as f64);
                let mut acc = T::zero();
                for p in 0..n {
                    let da = (lit::<T>(p as f64) + lit(0.5)) * inv_n - lit(0.5);
                    for q in 0..n {
                        let db = (lit::<T>(q as f64) + lit(0.5)) * inv_n - lit(0.5);
                        let uu = u + da - db;
                        let vv = v + da + db;
                        acc += (-uu * uu / d2 - vv * vv / s2).exp();
                    }
                }
                acc * inv_n * inv_n
            }
        }
    }

    /// Marginal beam density at a pixel (per pixel), integrated per the
    /// resolved scheme.
    fn marginal_px(&self, p: Pixel, ctx: &PlaneCtx<T>) -> T {
        let c = self.centered(p);
        self.marginal_px_at(c, ctx)
    }

    fn marginal_px_at(&self, c: [T; 2], ctx: &PlaneCtx<T>) -> T {
        let four = lit::<T>(4.0);
        match ctx.integration {
            ResolvedIntegration::Midpoint => {
                four / (T::PI() * ctx.marg_wsq)
                    * (-four * (c[0] * c[0] + c[1] * c[1]) / ctx.marg_wsq).exp()
            }
            ResolvedIntegration::Subpixel(n) => {
                let n = n as usize;
                let inv_n = lit::<T>(1.0 / n as f64);
                let mut per_axis = [T::zero(); 2];
                for (axis, acc) in per_axis.iter_mut().enumerate() {
                    for p in 0..n {
                        let off = (lit::<T>(p as f64) + lit(0.5)) * inv_n - lit(0.5);
                        let t = c[axis] + off;
                        *acc += (-four * t * t / ctx.marg_wsq).exp();
                    }
                    *acc *= inv_n;
                }
                four / (T::PI() * ctx.marg_wsq) * per_axis[0] * per_axis[1]
            }
        }
    }

    /// Expected correlated-pair coincidences between Alice's mode pixel and
    /// Bob's mode label over the acquisition time, for one plane.
    ///
    /// Momentum arguments are mode labels: Bob's physical far-field pixel
    /// is the reflection of `bob_label`, which is what makes the
    /// anticorrelated pair appear on the label diagonal.
    pub fn alpha(&self, alice: Pixel, bob_label: Pixel, plane: Plane) -> T {
        let ctx = self.plane_ctx(plane);
        self.alpha_with(&ctx, alice, bob_label)
    }

    fn alpha_with(&self, ctx: &PlaneCtx<T>, alice: Pixel, bob_label: Pixel) -> T {
        let a = self.centered(alice);
        let b = self.centered(bob_label);
        let ix = self.pair_axis_integral(a[0] - b[0], a[0] + b[0], ctx);
        let iy = self.pair_axis_integral(a[1] - b[1], a[1] + b[1], ctx);
        ctx.weight
            * self.source.pair_rate_per_s
            * ctx.pair_norm
            * ix
            * iy
            * self.detection.acquisition_s
    }

    /// Expected accidental coincidences between two mode labels over the
    /// acquisition time, for one plane.
    pub fn beta(&self, alice: Pixel, bob_label: Pixel, plane: Plane) -> T {
        let ctx = self.plane_ctx(plane);
        self.beta_with(&ctx, alice, bob_label)
    }

    fn beta_with(&self, ctx: &PlaneCtx<T>, alice: Pixel, bob_label: Pixel) -> T {
        let tau_s = self.detection.tau_ns * lit(1e-9);
        let p_a = self.source.pair_rate_per_s * self.marginal_px(alice, ctx);
        let p_b = self.source.pair_rate_per_s * self.marginal_px(bob_label, ctx);
        ctx.weight * tau_s * (p_a + ctx.bg_px) * (p_b + ctx.bg_px) * self.detection.acquisition_s
    }

    /// Expected counts in one matrix cell: both matched-basis
    /// configurations summed.
    pub fn cell(&self, alice: Pixel, bob_label: Pixel) -> T {
        let pos = self.plane_ctx(Plane::Position);
        let mom = self.plane_ctx(Plane::Momentum);
        self.alpha_with(&pos, alice, bob_label)
            + self.beta_with(&pos, alice, bob_label)
            + self.alpha_with(&mom, alice, bob_label)
            + self.beta_with(&mom, alice, bob_label)
    }

    /// Precomputed per-plane evaluator for a fixed grid: the alpha axis
    /// integrals live in a lookup table over the integer (difference, sum)
    /// coordinates and the beta factors are cached per mode.
    fn grid_tables(&self, grid: &ModeGrid, plane: Plane) -> GridTables<T> {
        let ctx = self.plane_ctx(plane);
        let cx = self.region.center.x;
        let cy = self.region.center.y;
        let coords: Vec<(i32, i32)> = grid
            .modes
            .iter()
            .map(|p| (p.x - cx, p.y - cy))
            .collect();
        let max_abs = coords
            .iter()
            .map(|&(x, y)| x.abs().max(y.abs()))
            .max()
            .unwrap_or(0);
        let extent = (2 * max_abs) as usize;
        let size = 2 * extent + 1;
        let mut axis = vec![T::zero(); size * size];
        for (iu, row) in axis.chunks_mut(size).enumerate() {
            let u = lit::<T>(iu as f64 - extent as f64);
            for (iv, slot) in row.iter_mut().enumerate() {
                let v = lit::<T>(iv as f64 - extent as f64);
                *slot = self.pair_axis_integral(u, v, &ctx);
            }
        }
        let tau_s = self.detection.tau_ns * lit(1e-9);
        let singles: Vec<T> = coords
            .iter()
            .map(|&(x, y)| {
                let c = [lit::<T>(x as f64), lit::<T>(y as f64)];
                self.source.pair_rate_per_s * self.marginal_px_at(c, &ctx) + ctx.bg_px
            })
            .collect();
        GridTables {
            coords,
            axis,
            extent: extent as i32,
            size,
            alpha_scale: ctx.weight
                * self.source.pair_rate_per_s
                * ctx.pair_norm
                * self.detection.acquisition_s,
            beta_scale: ctx.weight * tau_s * self.detection.acquisition_s,
            singles,
        }
    }

    /// Full expected joint detection matrix for a grid.
    pub fn build_joint_matrix(
        &self,
        grid: &ModeGrid,
    ) -> Result<JointDetectionMatrix<T>, AnalyticError> {
        self.validate()?;
        let d = grid.d();
        if d < 2 {
            return Err(AnalyticError::DegenerateGrid(d));
        }
        let pos = self.grid_tables(grid, Plane::Position);
        let mom = self.grid_tables(grid, Plane::Momentum);
        let rows: Vec<Vec<T>> = (0..d)
            .into_par_iter()
            .map(|bob| {
                (0..d)
                    .map(|alice| pos.cell(alice, bob) + mom.cell(alice, bob))
                    .collect()
            })
            .collect();
        let mut counts = Vec::with_capacity(d * d);
        for row in rows {
            counts.extend(row);
        }
        JointDetectionMatrix::from_counts(d, counts)
    }

    /// QDER and sifted rate of a grid without materializing the d x d
    /// matrix; memory stays O(d).
    pub fn evaluate_grid(&self, grid: &ModeGrid) -> Result<GridEvaluation<T>, AnalyticError> {
        self.validate()?;
        let d = grid.d();
        if d < 2 {
            return Err(AnalyticError::DegenerateGrid(d));
        }
        let pos = self.grid_tables(grid, Plane::Position);
        let mom = self.grid_tables(grid, Plane::Momentum);
        let columns: Vec<(T, T)> = (0..d)
            .into_par_iter()
            .map(|alice| {
                let mut column_sum = T::zero();
                let mut diagonal = T::zero();
                for bob in 0..d {
                    let cell = pos.cell(alice, bob) + mom.cell(alice, bob);
                    column_sum += cell;
                    if bob == alice {
                        diagonal = cell;
                    }
                }
                (column_sum, diagonal)
            })
            .collect();
        let mut total = T::zero();
        let mut trace = T::zero();
        let mut usable = 0usize;
        for (column_sum, diagonal) in &columns {
            total += *column_sum;
            if *column_sum > T::zero() {
                trace += *diagonal / *column_sum;
                usable += 1;
            }
        }
        if usable == 0 {
            return Err(AnalyticError::DegenerateGrid(0));
        }
        Ok(GridEvaluation {
            d,
            qder_e: T::one() - trace / lit(usable as f64),
            sifted_rate: total / self.detection.acquisition_s,
        })
    }

    /// Expected matched-basis symbol rate on the grid's mode pixels,
    /// symbols per second.
    pub fn sifted_rate(&self, grid: &ModeGrid) -> Result<T, AnalyticError> {
        Ok(self.evaluate_grid(grid)?.sifted_rate)
    }

    /// Projection onto next-generation detectors: the effective pixel
    /// scale shrinks by the resolution gain (the beam spans more pixels,
    /// the region grows accordingly) and the measured correlation widths
    /// shrink by the gain in pixel units; eta and tau are replaced, all
    /// other parameters inherited.
    pub fn with_next_gen(&self, ng: &NextGenParams<T>) -> AnalyticModel<T> {
        let g = ng.resolution_gain;
        let g2 = g * g;
        let mut model = self.clone();
        model.optics.pixel_pitch_um = self.optics.pixel_pitch_um / g;
        model.widths.delta_r_um = self.widths.delta_r_um / g2;
        model.widths.delta_k_inv_um = self.widths.delta_k_inv_um / g2;
        let scaled_target =
            ((self.detection.pixels_n as f64) * g2.to_f64().unwrap_or(1.0)).round() as usize;
        let region = crate::layouts::beam_region(self.region.center, scaled_target.max(1))
            .expect("scaled beam region");
        model.region = region;
        model.detection.eta_s = ng.eta;
        model.detection.eta_i = ng.eta;
        model.detection.tau_ns = ng.tau_ns;
        model.detection.pixels_n = region.pixel_count;
        model
    }
}

/// Cached per-plane cell evaluation for one grid.
struct GridTables<T> {
    coords: Vec<(i32, i32)>,
    axis: Vec<T>,
    extent: i32,
    size: usize,
    alpha_scale: T,
    beta_scale: T,
    singles: Vec<T>,
}

impl<T: Real> GridTables<T> {
    #[inline]
    fn axis_at(&self, u: i32, v: i32) -> T {
        let iu = (u + self.extent) as usize;
        let iv = (v + self.extent) as usize;
        self.axis[iu * self.size + iv]
    }

    /// alpha + beta for (alice column, bob row), in expected counts.
    #[inline]
    fn cell(&self, alice: usize, bob: usize) -> T {
        let (ax, ay) = self.coords[alice];
        let (bx, by) = self.coords[bob];
        let ix = self.axis_at(ax - bx, ax + bx);
        let iy = self.axis_at(ay - by, ay + by);
        self.alpha_scale * ix * iy + self.beta_scale * self.singles[alice] * self.singles[bob]
    }
}

/// Result of a streaming grid evaluation.
#[derive(Debug, Clone, Copy)]
pub struct GridEvaluation<T> {
    pub d: usize,
    pub qder_e: T,
    pub sifted_rate: T,
}

/// d x d expected (or measured) coincidence counts between Alice's and
/// Bob's modes in matched bases, with the column-normalized conditional
/// form. Row index = Bob's mode, column index = Alice's mode.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JointDetectionMatrix<T> {
    d: usize,
    counts: Vec<T>,
    conditional: Vec<T>,
    usable: Vec<bool>,
}

impl<T: Real> JointDetectionMatrix<T> {
    /// Builds the matrix from row-major counts (`counts[bob * d + alice]`),
    /// normalizing each Alice column to 1. Columns with zero total counts
    /// are flagged unusable and left zero in the conditional form.
    pub fn from_counts(d: usize, counts: Vec<T>) -> Result<Self, AnalyticError> {
        if d < 2 {
            return Err(AnalyticError::DegenerateGrid(d));
        }
        if counts.len() != d * d {
            return Err(AnalyticError::ShapeMismatch { len: counts.len(), d });
        }
        for bob in 0..d {
            for alice in 0..d {
                let v = counts[bob * d + alice];
                if !(v >= T::zero()) || !v.is_finite() {
                    return Err(AnalyticError::InvalidCount { bob, alice });
                }
            }
        }
        let mut conditional = vec![T::zero(); d * d];
        let mut usable = vec![false; d];
        for alice in 0..d {
            let mut sum = T::zero();
            for bob in 0..d {
                sum += counts[bob * d + alice];
            }
            if sum > T::zero() {
                usable[alice] = true;
                for bob in 0..d {
                    conditional[bob * d + alice] = counts[bob * d + alice] / sum;
                }
            }
        }
        Ok(Self {
            d,
            counts,
            conditional,
            usable,
        })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn count(&self, bob: usize, alice: usize) -> T {
        self.counts[bob * self.d + alice]
    }

    pub fn conditional(&self, bob: usize, alice: usize) -> T {
        self.conditional[bob * self.d + alice]
    }

    pub fn conditional_column_sum(&self, alice: usize) -> T {
        (0..self.d).map(|bob| self.conditional[bob * self.d + alice]).sum()
    }

    pub fn column_usable(&self, alice: usize) -> bool {
        self.usable[alice]
    }

    pub fn unusable_columns(&self) -> Vec<usize> {
        (0..self.d).filter(|&c| !self.usable[c]).collect()
    }

    pub fn total_counts(&self) -> T {
        self.counts.iter().copied().sum()
    }

    /// CSV form: a `d` header line, then d rows of d conditional
    /// probabilities (row = Bob's mode, column = Alice's mode).
    pub fn to_csv<W: std::io::Write>(&self, mut sink: W) -> std::io::Result<()> {
        writeln!(sink, "{}", self.d)?;
        for bob in 0..self.d {
            let row: Vec<String> = (0..self.d)
                .map(|alice| format!("{}", self.conditional[bob * self.d + alice].to_f64().unwrap()))
                .collect();
            writeln!(sink, "{}", row.join(","))?;
        }
        Ok(())
    }
}
