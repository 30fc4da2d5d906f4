//! A Lorentzian spectrum seen by FTNS, by the 32-pulse Álvarez-Suter inversion,
//! and by the single-δ approximation over the same delay ladder.

use ftns::ddns::{run_alvarez_suter, run_single_delta, DdnsPlan};
use ftns::fid::{reconstruct_fid, PrepOptions};
use ftns::forward::simulate_trace;
use ftns::sequence::PulseSequence;
use ftns::spectrum::presets;
use ftns::trace::MeasurementPlan;

fn main() -> ftns::Result<()> {
    let model = presets::lorentzian_single();
    let plan = MeasurementPlan {
        coherence_floor: 0.0,
        ..MeasurementPlan::ideal(0.00314, 6.06)
    };
    let trace = simulate_trace(&model, &PulseSequence::Fid, &plan)?;
    let ftns = reconstruct_fid(&trace, &PrepOptions::default())?;

    // 32 pulses with total times between 0.101 and 368.1.
    let ddns = DdnsPlan::new(32, 41, 0.101 / 32.0, 368.1 / 32.0);
    let as_ = run_alvarez_suter(&model, &ddns)?;
    let delta = run_single_delta(&model, &ddns)?;
    println!(
        "FTNS: {} points; AS: {} probes, condition ~ {:.2e}",
        trace.len(),
        as_.omega.len(),
        as_.extra["condition_number"].as_f64().unwrap()
    );
    println!("{:>7} {:>9} {:>11} {:>11} {:>11}", "omega", "S", "|d| FTNS", "|d| AS", "|d| delta");
    for i in 0..8 {
        let w = as_.omega[i];
        let t = model.evaluate(w)?;
        println!(
            "{w:7.4} {t:9.5} {:11.3e} {:11.3e} {:11.3e}",
            (ftns.interpolate(w) - t).abs(),
            (as_.s[i] - t).abs(),
            (delta.s[i] - t).abs()
        );
    }
    Ok(())
}
