//! Spin-echo inversion of a spectrum with a strong, very narrow zero-frequency
//! line. The echo hides that line but keeps the coherence alive long enough
//! to resolve the structure between 1 and 3.

use ftns::fid::{reconstruct_fid, PrepOptions};
use ftns::forward::simulate_trace;
use ftns::se::reconstruct_se;
use ftns::sequence::PulseSequence;
use ftns::spectrum::presets;
use ftns::trace::MeasurementPlan;

fn main() -> ftns::Result<()> {
    let model = presets::echo_multiplet();
    let plan = MeasurementPlan::ideal(0.01, 40.0);
    let fid = simulate_trace(&model, &PulseSequence::Fid, &plan)?;
    let echo = simulate_trace(&model, &PulseSequence::SpinEcho, &plan)?;
    println!("usable samples: FID {}, echo {}", fid.retained_len(), echo.retained_len());

    let s_fid = reconstruct_fid(&fid, &PrepOptions::default())?;
    let s_echo = reconstruct_se(&echo, &PrepOptions::default())?;
    println!("recursion residual {:.2e}", s_echo.extra["self_consistency_residual"].as_f64().unwrap());
    println!("{:>5} {:>9} {:>9} {:>9}", "omega", "true", "FID", "echo");
    for k in 0..=14 {
        let w = 0.25 * k as f64;
        println!("{w:5.2} {:9.3} {:9.3} {:9.3}", model.evaluate(w)?, s_fid.interpolate(w), s_echo.interpolate(w));
    }
    Ok(())
}
