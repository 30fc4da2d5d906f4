//! Separate a 1/f^n background from a finite peak using spin-echo data: fit
//! χ ≈ α t^γ + β t + δ, remove the power law, invert the rest, add A/ω^n back.

use ftns::fid::{log_and_fill, PrepOptions};
use ftns::forward::simulate_trace;
use ftns::se::{fit_one_over_f, reconstruct_with_one_over_f};
use ftns::sequence::PulseSequence;
use ftns::spectrum::presets;
use ftns::trace::MeasurementPlan;

fn main() -> ftns::Result<()> {
    let model = presets::one_over_f_with_peaks();
    let plan = MeasurementPlan::ideal(0.005, 6.0);
    let trace = simulate_trace(&model, &PulseSequence::SpinEcho, &plan)?;
    let prep = PrepOptions::default();
    let att = log_and_fill(&trace, &prep)?;
    println!("record ends at t = {:.3} (C > {})", att.t.last().unwrap(), plan.coherence_floor);
    match fit_one_over_f(&att)? {
        Some(f) => println!(
            "alpha {:.6}  beta {:.6}  delta {:.6}  gamma {:.5}  ->  S = {:.4}/w^{:.4}",
            f.alpha, f.beta, f.delta, f.gamma, f.a_coef, f.n
        ),
        None => println!("no 1/f content"),
    }
    let rec = reconstruct_with_one_over_f(&trace, &prep)?;
    println!("{:>6} {:>10} {:>10}", "omega", "true", "rec");
    for w in [0.5, 1.0, 2.0, 5.0, 10.0, 11.5, 12.5, 13.5, 15.0] {
        println!("{w:6.2} {:10.4} {:10.4}", model.evaluate(w)?, rec.interpolate(w));
    }
    Ok(())
}
