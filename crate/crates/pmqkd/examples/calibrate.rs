use pmqkd::analytic::{AnalyticModel, DetectionParams, NextGenParams, PixelIntegration};
use pmqkd::layouts::{beam_region, Layout, Pixel};
use pmqkd::physics::{CorrelationWidths, OpticsParams, SourceParams};
use pmqkd::sweep::*;

fn model(integration: PixelIntegration) -> AnalyticModel<f64> {
    let optics = OpticsParams::<f64>::default();
    AnalyticModel {
        source: SourceParams::new(480.0, 1.0, 405.0, 8.25e6),
        widths: CorrelationWidths::measured(&optics),
        optics,
        detection: DetectionParams::current_experiment(),
        region: beam_region(Pixel::new(64, 64), 4293).unwrap(),
        split_ratio: 0.5,
        integration,
    }
}

fn report(label: &str, rows: &[pmqkd::layouts::SweepRow<f64>]) {
    let pb = peak_bits_per_photon(rows).unwrap();
    let pr = peak_bit_rate(rows).unwrap();
    println!(
        "{label}: peak_bits={:.3} at d={} [{}] (e={:.4}); peak_rate={:.4e} b/s at d={} [{}] (e={:.4})",
        pb.metrics.bits_per_photon,
        pb.d,
        pb.layout,
        pb.metrics.qder_e,
        pr.metrics.bit_rate,
        pr.d,
        pr.layout,
        pr.metrics.qder_e
    );
}

fn main() {
    let layouts = [Layout::Cartesian, Layout::Angled45, Layout::Hex];
    for (label, integ) in [
        ("midpoint", PixelIntegration::Midpoint),
        ("subpix8 ", PixelIntegration::Subpixel(8)),
        ("auto    ", PixelIntegration::Auto),
    ] {
        let t0 = std::time::Instant::now();
        let m = model(integ);
        let rows = dimension_sweep(&m, &layouts, &default_spacings_current()).unwrap();
        report(&format!("current {label}"), &rows);
        let ng = m.with_next_gen(&NextGenParams::default());
        let ng_rows = dimension_sweep(&ng, &layouts, &default_spacings_next_gen()).unwrap();
        report(&format!("nextgen {label}"), &ng_rows);
        println!("   elapsed both sweeps: {:?}", t0.elapsed());
    }
}
