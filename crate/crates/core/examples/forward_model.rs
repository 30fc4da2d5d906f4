//! The forward model: χ(t) for FID, echo and CPMG from frequency-domain
//! quadrature, from the lag sum, and from closed forms where they exist.

use ftns::forward::{attenuation_with, simulate_trace, t2_from_trace, Route, T2Definition};
use ftns::sequence::PulseSequence;
use ftns::spectrum::{closed_form_chi, presets, SpectrumComponent, SpectrumModel};
use ftns::trace::MeasurementPlan;

fn main() -> ftns::Result<()> {
    let model = SpectrumModel::new(vec![SpectrumComponent::Gaussian { a: 1.0, sigma: 2.0, mu: 0.0 }], false)?;
    for seq in [PulseSequence::Fid, PulseSequence::SpinEcho, PulseSequence::Cpmg { n_pulses: 4 }] {
        for t in [0.1, 1.0, 3.0] {
            let q = attenuation_with(&model, &seq, t, Route::Quadrature)?;
            let l = attenuation_with(&model, &seq, t, Route::Lagged)?;
            let c = closed_form_chi(&model, &seq, t);
            println!("{:<10} t = {t:3.1}: quadrature {q:.12}  lagged {l:.12}  closed {c:?}", seq.label());
        }
    }
    let trace = simulate_trace(&presets::echo_multiplet(), &PulseSequence::SpinEcho, &MeasurementPlan::ideal(0.01, 10.0))?;
    println!("echo 1/e time of the multiplet spectrum: {:.4}", t2_from_trace(&trace, T2Definition::EFolding)?);
    Ok(())
}
