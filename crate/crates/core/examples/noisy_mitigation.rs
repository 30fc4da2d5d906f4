//! FTNS on coherence data carrying 0.1% and 1% Gaussian readout noise, with
//! and without the tail-fit and low-pass mitigation.

use ftns::fid::{reconstruct_fid, PrepOptions};
use ftns::forward::simulate_trace;
use ftns::prep::MitigationConfig;
use ftns::report::error_report;
use ftns::sequence::PulseSequence;
use ftns::spectrum::presets;
use ftns::trace::MeasurementPlan;

fn main() -> ftns::Result<()> {
    let model = presets::double_lorentzian();
    let t_max = 598.0 * 0.005156;
    for (sigma, window) in [(0.001, (0.8, 0.99)), (0.01, (0.359, 0.718))] {
        let plan = MeasurementPlan {
            noise_sigma: sigma,
            seed: 7,
            ..MeasurementPlan::ideal(0.002 * t_max, t_max)
        };
        let trace = simulate_trace(&model, &PulseSequence::Fid, &plan)?;
        let raw = reconstruct_fid(&trace, &PrepOptions { no_mitigation: true, ..Default::default() })?;
        let mitigation = MitigationConfig {
            tail_window: Some(window),
            lowpass2_enabled: false,
            ..Default::default()
        };
        let clean = reconstruct_fid(&trace, &PrepOptions { mitigation: Some(mitigation), ..Default::default() })?;
        let band = Some((0.0, 30.0));
        let (r0, r1) = (error_report(&model, &raw, band)?, error_report(&model, &clean, band)?);
        println!("noise {:.1}%: max |d| raw {:.3}, mitigated {:.3}", sigma * 100.0, r0.max_delta, r1.max_delta);
        for p in &r1.peak_errors {
            println!(
                "  peak at {:6.3} (S = {:.3}): found at {:6.3}, height off by {:.1}%",
                p.omega,
                p.height,
                p.found_omega.unwrap_or(f64::NAN),
                100.0 * p.height_rel_error.unwrap_or(f64::NAN)
            );
        }
    }
    Ok(())
}
