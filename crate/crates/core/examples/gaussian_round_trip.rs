//! Simulate FID coherence for a Gaussian spectrum and invert it.
//!
//! The attenuation has a closed form here, so the only error left is the
//! discretisation of the transform.

use ftns::fid::{reconstruct_fid, PrepOptions};
use ftns::forward::simulate_trace;
use ftns::sequence::PulseSequence;
use ftns::spectrum::{SpectrumComponent, SpectrumModel};
use ftns::trace::MeasurementPlan;

fn main() -> ftns::Result<()> {
    let model = SpectrumModel::new(
        vec![SpectrumComponent::Gaussian { a: 1.0, sigma: 1.0, mu: 0.0 }],
        false,
    )?;
    let plan = MeasurementPlan {
        coherence_floor: 0.0,
        ..MeasurementPlan::ideal(0.01, 20.0)
    };
    let trace = simulate_trace(&model, &PulseSequence::Fid, &plan)?;
    let rec = reconstruct_fid(&trace, &PrepOptions::default())?;

    println!("{} samples -> {} frequencies, d_omega = {:.5}", trace.len(), rec.omega.len(), rec.d_omega);
    println!("{:>6} {:>12} {:>12} {:>10}", "omega", "S_rec", "S_true", "rel.err");
    // Grid frequencies nearest to each target; interpolating between them
    // would add its own error.
    for target in [0.0, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0] {
        let k = (target / rec.d_omega).round() as usize;
        let (w, s) = (rec.omega[k], rec.s[k]);
        let t = model.evaluate(w)?;
        println!("{w:6.3} {s:12.6e} {t:12.6e} {:10.2e}", (s - t).abs() / t);
    }
    let worst = rec
        .omega
        .iter()
        .zip(&rec.s)
        .filter(|(w, _)| **w <= 3.0)
        .map(|(w, s)| (s - (-w * w).exp()).abs() / (-w * w).exp())
        .fold(0.0, f64::max);
    println!("max relative error on [0, 3]: {worst:.2e}");
    Ok(())
}
