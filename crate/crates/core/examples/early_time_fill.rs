//! Points before the shortest realizable delay are withheld, refilled from a
//! t², t⁴, t⁶ fit, and stitched to the data with the error-function seam.

use ftns::fid::{reconstruct_fid, PrepOptions};
use ftns::forward::simulate_trace;
use ftns::prep::{fit_early_time, to_attenuation, ChiSource};
use ftns::sequence::PulseSequence;
use ftns::spectrum::presets;
use ftns::trace::MeasurementPlan;

fn main() -> ftns::Result<()> {
    let model = presets::gaussian_mixture();
    let dt = 0.006291;
    let full = MeasurementPlan::ideal(dt, 595.0 * dt);
    let masked = MeasurementPlan { tau_min: 0.05, ..full };

    let att = to_attenuation(&simulate_trace(&model, &PulseSequence::Fid, &masked)?)?;
    let fit = fit_early_time(&att, &PulseSequence::Fid, 0.05, 10.0 * dt)?;
    let tau = 2.0 * std::f64::consts::PI;
    let exact = [model.moment(0) / (2.0 * tau), -model.moment(2) / (24.0 * tau), model.moment(4) / (720.0 * tau)];
    println!("kappa fitted {:?}", fit.kappa);
    println!("kappa exact  {exact:?}");

    let reference = reconstruct_fid(&simulate_trace(&model, &PulseSequence::Fid, &full)?, &PrepOptions::default())?;
    let trace = simulate_trace(&model, &PulseSequence::Fid, &masked)?;
    let withheld = trace.mask.iter().filter(|m| m.as_str() == "withheld_below_tau_min").count();
    let filled = reconstruct_fid(&trace, &PrepOptions::default())?;
    println!("{withheld} samples withheld, {:?} source used below tau_min", ChiSource::EarlyFit);
    let worst = reference.s.iter().zip(&filled.s).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    println!("largest spectral change caused by the refill: {worst:.3e}");
    println!("{:>6} {:>10} {:>10}", "omega", "full", "filled");
    for w in [0.0, 1.0, 1.272, 2.5, 4.77] {
        println!("{w:6.3} {:10.6} {:10.6}", reference.interpolate(w), filled.interpolate(w));
    }
    Ok(())
}
