//! Dimension sweeps: evaluate the analytic model over layouts and mode
//! spacings, merge to one best entry per dimension, and emit the
//! machine-readable performance table.

use rayon::prelude::*;
use thiserror::Error;

use crate::analytic::{AnalyticError, AnalyticModel};
use crate::layouts::{generate_grid, merge_sweeps, Layout, LayoutError, ModeGrid, SweepRow};
use crate::num::Real;
use crate::qkd::{key_rate, security_threshold, QkdError, QkdMetrics};

#[derive(Debug, Error)]
pub enum SweepError {
    #[error(transparent)]
    Analytic(#[from] AnalyticError),
    #[error(transparent)]
    Layout(#[from] LayoutError),
    #[error(transparent)]
    Qkd(#[from] QkdError),
    #[error("sweep produced no grids; check spacings against the region size")]
    Empty,
}

/// Spacing ladder bracketing the current-detector sweep, d from ~7 up to
/// the experiment's maximum of ~545 modes.
pub fn default_spacings_current() -> Vec<f64> {
    vec![
        2.8, 3.0, 3.2, 3.45, 3.7, 4.0, 4.4, 4.8, 5.2, 5.7, 6.2, 6.9, 7.6, 8.5, 9.5, 11.0, 13.0,
        15.5, 18.5, 24.0,
    ]
}

/// Spacing ladder for the next-generation projection; the finer pixel
/// scale admits several thousand modes.
pub fn default_spacings_next_gen() -> Vec<f64> {
    vec![
        1.1, 1.2, 1.3, 1.4, 1.5, 1.65, 1.8, 2.0, 2.2, 2.4, 2.7, 3.0, 3.4, 3.8, 4.3, 5.0, 6.0,
        7.0, 8.5, 10.0, 12.0, 15.0, 18.0, 24.0,
    ]
}

/// Metrics of one grid under the model.
pub fn metrics_for_grid<T: Real>(
    model: &AnalyticModel<T>,
    grid: &ModeGrid,
) -> Result<QkdMetrics<T>, SweepError> {
    let eval = model.evaluate_grid(grid)?;
    let threshold = security_threshold::<T>(eval.d)?;
    let bits = key_rate(eval.qder_e, eval.d)?;
    Ok(QkdMetrics {
        d: eval.d,
        qder_e: eval.qder_e,
        threshold_e: threshold,
        bits_per_photon: bits,
        sifted_rate: eval.sifted_rate,
        bit_rate: bits.max(T::zero()) * eval.sifted_rate,
    })
}

/// Runs the sweep over every (layout, spacing) combination, skipping
/// spacings too coarse to yield at least two modes, and merges the rows to
/// the lowest-QDER entry per dimension.
pub fn dimension_sweep<T: Real>(
    model: &AnalyticModel<T>,
    layouts: &[Layout],
    spacings: &[f64],
) -> Result<Vec<SweepRow<T>>, SweepError> {
    let combos: Vec<(Layout, f64)> = layouts
        .iter()
        .flat_map(|&l| spacings.iter().map(move |&s| (l, s)))
        .collect();
    let rows: Vec<Result<Option<SweepRow<T>>, SweepError>> = combos
        .par_iter()
        .map(|&(layout, spacing)| {
            let grid = match generate_grid(layout, spacing, &model.region) {
                Ok(grid) => grid,
                Err(LayoutError::TooFewModes(_)) | Err(LayoutError::SpacingTooSmall(_)) => {
                    return Ok(None)
                }
                Err(e) => return Err(e.into()),
            };
            let metrics = metrics_for_grid(model, &grid)?;
            Ok(Some(SweepRow {
                d: grid.d(),
                layout,
                metrics,
            }))
        })
        .collect();
    let mut collected = Vec::with_capacity(rows.len());
    for row in rows {
        if let Some(row) = row? {
            collected.push(row);
        }
    }
    if collected.is_empty() {
        return Err(SweepError::Empty);
    }
    Ok(merge_sweeps(collected))
}

/// CSV header shared by the sweep outputs.
pub const SWEEP_CSV_HEADER: &str = "d,layout,qder,threshold,bits_per_photon,sifted_rate,bit_rate";

/// Writes merged sweep rows as CSV (the machine-readable performance
/// figure).
pub fn write_sweep_csv<T: Real, W: std::io::Write>(
    rows: &[SweepRow<T>],
    mut sink: W,
) -> std::io::Result<()> {
    writeln!(sink, "{SWEEP_CSV_HEADER}")?;
    for row in rows {
        let m = &row.metrics;
        writeln!(
            sink,
            "{},{},{},{},{},{},{}",
            row.d,
            row.layout,
            m.qder_e.to_f64().unwrap(),
            m.threshold_e.to_f64().unwrap(),
            m.bits_per_photon.to_f64().unwrap(),
            m.sifted_rate.to_f64().unwrap(),
            m.bit_rate.to_f64().unwrap(),
        )?;
    }
    Ok(())
}

/// The row with the highest photon information efficiency.
pub fn peak_bits_per_photon<T: Real>(rows: &[SweepRow<T>]) -> Option<&SweepRow<T>> {
    rows.iter().max_by(|a, b| {
        a.metrics
            .bits_per_photon
            .partial_cmp(&b.metrics.bits_per_photon)
            .unwrap()
    })
}

/// The row with the highest bit rate.
pub fn peak_bit_rate<T: Real>(rows: &[SweepRow<T>]) -> Option<&SweepRow<T>> {
    rows.iter()
        .max_by(|a, b| a.metrics.bit_rate.partial_cmp(&b.metrics.bit_rate).unwrap())
}

/// QDER as a function of shrinking spacing for one layout; used by the
/// cross-talk monotonicity check.
pub fn qder_ladder<T: Real>(
    model: &AnalyticModel<T>,
    layout: Layout,
    spacings: &[f64],
) -> Result<Vec<(f64, T)>, SweepError> {
    let mut out = Vec::new();
    for &s in spacings {
        match generate_grid(layout, s, &model.region) {
            Ok(grid) => {
                let eval = model.evaluate_grid(&grid)?;
                out.push((s, eval.qder_e));
            }
            Err(LayoutError::TooFewModes(_)) => continue,
            Err(e) => return Err(e.into()),
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::{DetectionParams, PixelIntegration};
    use crate::layouts::{beam_region, Pixel};
    use crate::physics::{CorrelationWidths, OpticsParams, SourceParams};

    fn paper_model() -> AnalyticModel<f64> {
        let optics = OpticsParams::<f64>::default();
        AnalyticModel {
            source: SourceParams::new(480.0, 1.0, 405.0, 8.25e6),
            widths: CorrelationWidths::measured(&optics),
            optics,
            detection: DetectionParams::current_experiment(),
            region: beam_region(Pixel::new(64, 64), 4293).unwrap(),
            split_ratio: 0.5,
            integration: PixelIntegration::Midpoint,
        }
    }

    #[test]
    fn sweep_merges_and_sorts() {
        let model = paper_model();
        let rows = dimension_sweep(
            &model,
            &[Layout::Cartesian, Layout::Hex],
            &[6.0, 8.0, 10.0, 40.0],
        )
        .unwrap();
        assert!(!rows.is_empty());
        for pair in rows.windows(2) {
            assert!(pair[0].d < pair[1].d);
        }
    }

    #[test]
    fn single_spacing_single_layout_yields_one_row() {
        let model = paper_model();
        let rows = dimension_sweep(&model, &[Layout::Cartesian], &[8.0]).unwrap();
        assert_eq!(rows.len(), 1);
        assert!(rows[0].metrics.bit_rate >= 0.0);
    }

    #[test]
    fn qder_grows_as_spacing_shrinks() {
        let model = paper_model();
        let ladder = default_spacings_current();
        let points = qder_ladder(&model, Layout::Cartesian, &ladder).unwrap();
        // Ladder is ordered ascending in spacing, so walk pairs: smaller
        // spacing must not have smaller QDER.
        for pair in points.windows(2) {
            let (s_fine, e_fine) = pair[0];
            let (s_coarse, e_coarse) = pair[1];
            assert!(s_fine < s_coarse);
            assert!(
                e_fine >= e_coarse - 1e-12,
                "QDER not monotone: {e_fine} at {s_fine} vs {e_coarse} at {s_coarse}"
            );
        }
    }

    #[test]
    fn efficiency_rescaling_leaves_qder_curve_invariant() {
        // eta -> 0 sends every bit rate to 0 while the normalized matrix,
        // hence the QDER, is unchanged.
        let model = paper_model();
        let mut faint = model.clone();
        faint.detection.eta_s = 1e-6;
        faint.detection.eta_i = 1e-6;
        let rows = dimension_sweep(&model, &[Layout::Cartesian], &[5.0, 9.0]).unwrap();
        let faint_rows = dimension_sweep(&faint, &[Layout::Cartesian], &[5.0, 9.0]).unwrap();
        for (a, b) in rows.iter().zip(&faint_rows) {
            assert_eq!(a.d, b.d);
            assert!((a.metrics.qder_e - b.metrics.qder_e).abs() < 1e-9);
            assert!(b.metrics.bit_rate < 1e-3);
        }
    }
}
