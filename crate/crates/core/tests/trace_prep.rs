use std::f64::consts::PI;

use ftns::fid::{reconstruct_fid, PrepOptions};
use ftns::forward::{attenuation, simulate_trace};
use ftns::prep::{
    auto_tail_window, fill_early_time, fit_early_time, mirror, mitigate, seam_weight, to_attenuation,
    AttenuationTrace, ChiSource, MitigationConfig,
};
use ftns::se::tail_linearity_residual;
use ftns::sequence::PulseSequence;
use ftns::spectrum::{presets, SpectrumModel};
use ftns::trace::{CoherenceTrace, MeasurementPlan, PointMask};
use proptest::prelude::*;

fn ideal(model: &SpectrumModel, dt: f64, t_max: f64) -> CoherenceTrace {
    let plan = MeasurementPlan { coherence_floor: 0.0, ..MeasurementPlan::ideal(dt, t_max) };
    simulate_trace(model, &PulseSequence::Fid, &plan).unwrap()
}

fn from_chi(f: impl Fn(f64) -> f64, dt: f64, n: usize, seq: PulseSequence) -> CoherenceTrace {
    let t: Vec<f64> = (0..n).map(|k| k as f64 * dt).collect();
    let c = t.iter().map(|&x| (-f(x)).exp()).collect();
    let plan = MeasurementPlan { coherence_floor: 0.0, ..MeasurementPlan::ideal(dt, (n - 1) as f64 * dt) };
    CoherenceTrace::new(t, c, vec![PointMask::Measured; n], plan, seq).unwrap()
}

#[test]
fn logarithm_examples() {
    let tr = from_chi(|t| t, 0.5, 3, PulseSequence::Fid);
    let att = to_attenuation(&tr).unwrap();
    assert_eq!(att.chi[0], 0.0);
    assert!((att.chi[2] - 1.0).abs() < 1e-15);
    assert!(att.source.iter().all(|s| *s == ChiSource::Measured));

    let mut bad = tr.clone();
    bad.c[1] = 0.0;
    assert!(to_attenuation(&bad).is_err());
}

#[test]
fn fig2b_logarithm_matches_the_forward_integral() {
    let m = presets::double_lorentzian();
    let dt = 0.005156;
    let tr = ideal(&m, dt, 598.0 * dt);
    assert_eq!(tr.len(), 599);
    let att = to_attenuation(&tr).unwrap();
    for k in (0..599).step_by(37) {
        let quad = attenuation(&m, &PulseSequence::Fid, tr.t[k]).unwrap();
        assert!((att.chi[k] - quad).abs() < 1e-9, "k = {k}");
    }
}

#[test]
fn early_time_fit_of_a_pure_quadratic() {
    let tr = from_chi(|t| t * t, 0.01, 100, PulseSequence::Fid);
    let fit = fit_early_time(&to_attenuation(&tr).unwrap(), &PulseSequence::Fid, 0.0, 0.1).unwrap();
    assert!((fit.kappa[0] - 1.0).abs() < 1e-9);
    assert!(fit.kappa[1].abs() < 1e-6);
    assert!(fit.kappa[2].abs() < 1e-3);
}

#[test]
fn early_time_fit_rejects_thin_windows_and_cpmg() {
    let att = to_attenuation(&from_chi(|t| t * t, 0.01, 100, PulseSequence::Fid)).unwrap();
    let err = fit_early_time(&att, &PulseSequence::Fid, 0.05, 0.025).unwrap_err();
    assert!(err.to_string().contains("3 measured points"), "{err}");
    assert!(err.to_string().contains("at least 4"));
    assert!(fit_early_time(&att, &PulseSequence::Cpmg { n_pulses: 2 }, 0.0, 0.1).is_err());
}

#[test]
fn early_time_moments_of_the_gaussian_mixture() {
    let m = presets::gaussian_mixture();
    let dt = 0.006291;
    let plan = MeasurementPlan { tau_min: 0.05, ..MeasurementPlan::ideal(dt, 595.0 * dt) };
    let att = to_attenuation(&simulate_trace(&m, &PulseSequence::Fid, &plan).unwrap()).unwrap();
    let fit = fit_early_time(&att, &PulseSequence::Fid, 0.05, 10.0 * dt).unwrap();
    let k0 = m.moment(0) / (4.0 * PI);
    let k1 = -m.moment(2) / (48.0 * PI);
    assert!((fit.kappa[0] / k0 - 1.0).abs() < 0.01);
    assert!((fit.kappa[1] / k1 - 1.0).abs() < 0.05);
    assert!(fit.kappa[0] > 0.0);
    // Reference values for this configuration.
    for (got, want) in fit.kappa.iter().zip([0.7667, -0.5827, 0.3903]) {
        assert!((got / want - 1.0).abs() < 0.01, "{got} vs {want}");
    }
}

#[test]
fn early_time_fit_for_the_lorentzian_triplet() {
    // Lorentzians have no finite ω² moment, so only κ0 is window independent;
    // the higher coefficients depend on how many samples enter the fit.
    let m = presets::double_lorentzian();
    let dt = 0.005156;
    let plan = MeasurementPlan { tau_min: dt, ..MeasurementPlan::ideal(dt, 598.0 * dt) };
    let att = to_attenuation(&simulate_trace(&m, &PulseSequence::Fid, &plan).unwrap()).unwrap();
    let fit = fit_early_time(&att, &PulseSequence::Fid, dt, 3.0 * dt).unwrap();
    assert!((fit.kappa[0] / 3.777 - 1.0).abs() < 1e-3);
    assert!((fit.kappa[0] / (m.moment(0) / (4.0 * PI)) - 1.0).abs() < 0.01);
    assert!((fit.kappa[1] / -117.1 - 1.0).abs() < 0.05);
    assert!((fit.kappa[2] / 59380.0 - 1.0).abs() < 0.15);
}

#[test]
fn spin_echo_fit_uses_t4_t6_t8() {
    let tr = from_chi(|t| 2.0 * t.powi(4) - t.powi(6) + 0.5 * t.powi(8), 0.01, 100, PulseSequence::SpinEcho);
    let fit = fit_early_time(&to_attenuation(&tr).unwrap(), &PulseSequence::SpinEcho, 0.0, 0.3).unwrap();
    for (got, want) in fit.kappa.iter().zip([2.0, -1.0, 0.5]) {
        assert!((got - want).abs() < 1e-6 * want.abs().max(1.0), "{got} vs {want}");
    }
}

#[test]
fn fill_leaves_exact_polynomials_alone() {
    let poly = |t: f64| 0.7 * t * t - 0.2 * t.powi(4) + 0.05 * t.powi(6);
    let att = to_attenuation(&from_chi(poly, 0.01, 300, PulseSequence::Fid)).unwrap();
    let fit = fit_early_time(&att, &PulseSequence::Fid, 0.05, 0.1).unwrap();
    let filled = fill_early_time(&att, &fit);
    for (a, b) in att.chi.iter().zip(&filled.chi) {
        assert!((a - b).abs() < 1e-12);
    }
    assert!(filled.source[..5].iter().all(|s| *s == ChiSource::EarlyFit));
}

#[test]
fn seam_is_continuous() {
    let m = presets::gaussian_mixture();
    let dt = 0.006291;
    let tau = 0.05;
    let plan = MeasurementPlan { tau_min: tau, ..MeasurementPlan::ideal(dt, 595.0 * dt) };
    let att = to_attenuation(&simulate_trace(&m, &PulseSequence::Fid, &plan).unwrap()).unwrap();
    let fit = fit_early_time(&att, &PulseSequence::Fid, tau, 10.0 * dt).unwrap();
    let filled = fill_early_time(&att, &fit);
    let k = att.t.iter().position(|&t| t >= tau).unwrap();
    // Left of the seam the fit is used verbatim; right of it the blend must join it.
    assert_eq!(filled.chi[k - 1], fit.value(att.t[k - 1]));
    assert!((filled.chi[k] - fit.value(att.t[k])).abs() < 1e-3 * filled.chi[k]);
    assert_eq!(seam_weight(tau - dt, tau, dt), 0.0);
    assert!((seam_weight(tau + 5.0 * dt, tau, dt) - 0.5).abs() < 1e-15);
    assert!(seam_weight(tau + 20.0 * dt, tau, dt) > 1.0 - 1e-4);
}

#[test]
fn masked_fig2a_record_reconstructs_like_the_full_one() {
    let m = presets::gaussian_mixture();
    let dt = 0.006291;
    let full = MeasurementPlan::ideal(dt, 595.0 * dt);
    let masked = MeasurementPlan { tau_min: 0.05, ..full };
    let prep = PrepOptions::default();
    let a = reconstruct_fid(&simulate_trace(&m, &PulseSequence::Fid, &full).unwrap(), &prep).unwrap();
    let b = reconstruct_fid(&simulate_trace(&m, &PulseSequence::Fid, &masked).unwrap(), &prep).unwrap();
    let mut worst = 0.0f64;
    for (k, w) in a.omega.iter().enumerate() {
        if *w < 5.0 {
            worst = worst.max((a.s[k] - b.s[k]).abs() / a.s[k].abs().max(1e-3));
        }
    }
    assert!(worst < 0.02, "{worst}");
}

#[test]
fn mirrored_traces_are_even() {
    let att = to_attenuation(&ideal(&presets::double_lorentzian(), 0.01, 2.0)).unwrap();
    let m = mirror(&att);
    let o = (m.len() - 1) / 2;
    assert_eq!(m.t[o], 0.0);
    for k in 1..=o {
        assert_eq!(m.chi[o + k], m.chi[o - k]);
        assert_eq!(m.t[o + k], -m.t[o - k]);
    }
    let cfg = MitigationConfig { tail_window: Some((0.6, 0.99)), ..Default::default() };
    let out = mitigate(&att, &cfg).unwrap();
    let o = (out.len() - 1) / 2;
    assert_eq!(out.chi[o], 0.0);
    for k in 1..=o {
        assert_eq!(out.chi[o + k], out.chi[o - k]);
    }
}

#[test]
fn noise_free_tails_are_linear() {
    for (m, dt, t_max) in [
        (presets::lorentzian_single(), 0.00314, 12.0),
        (presets::gaussian_mixture(), 0.006291, 24.0),
        (presets::double_lorentzian(), 0.005156, 8.0),
    ] {
        let att = to_attenuation(&ideal(&m, dt, t_max)).unwrap();
        let (t, chi) = att.positive_half();
        let r = tail_linearity_residual(t, chi);
        assert!(r < 1e-3, "residual {r}");
    }
}

#[test]
fn tail_fit_slope_matches_the_asymptote() {
    // Fig. 1 record with the Fig. 4(a) window.
    let m = presets::lorentzian_single();
    let att = to_attenuation(&ideal(&m, 0.00314, 6.06)).unwrap();
    let cfg = MitigationConfig { tail_window: Some((0.577, 0.99)), ..Default::default() };
    let slope = mitigate(&att, &cfg).unwrap().tail.unwrap().slope;
    assert!((slope / m.fid_asymptotic_slope().unwrap() - 1.0).abs() < 5e-3, "{slope}");

    // The gaussian mixture needs a longer record before its narrow satellite stops contributing.
    let m = presets::gaussian_mixture();
    let att = to_attenuation(&ideal(&m, 0.006291, 24.0)).unwrap();
    let out = mitigate(&att, &MitigationConfig::default()).unwrap();
    let tail = out.tail.unwrap();
    assert!((tail.slope / m.fid_asymptotic_slope().unwrap() - 1.0).abs() < 5e-3, "{}", tail.slope);
    let o = (out.len() - 1) / 2;
    assert!(out.source[o + tail.boundary..].iter().all(|s| *s == ChiSource::LinearFit));
    assert!(out.source[o..o + tail.boundary].iter().all(|s| *s == ChiSource::Measured));
}

#[test]
fn whole_trace_window_on_a_line_is_identity() {
    let tr = from_chi(|t| 0.3 * t, 0.01, 400, PulseSequence::Fid);
    let att = to_attenuation(&tr).unwrap();
    let cfg = MitigationConfig { tail_window: Some((0.0, 1.0)), ..Default::default() };
    let out = mitigate(&att, &cfg).unwrap();
    let o = (out.len() - 1) / 2;
    let tail = out.tail.unwrap();
    assert!((tail.slope - 0.3).abs() < 1e-4);
    assert_eq!(out.chi[o], 0.0);
    // Smoothing the mirrored kink at t = 0 and re-zeroing χ(0) leaves a constant
    // offset, which has no second derivative; the shape is reproduced exactly.
    let offset = out.chi[o + 200] - att.chi[200];
    assert!(offset.abs() < 0.01);
    for k in 20..350 {
        assert!((out.chi[o + k] - att.chi[k] - offset).abs() < 1e-4, "k = {k}");
    }
}

#[test]
fn short_tail_windows_are_rejected() {
    let att = to_attenuation(&from_chi(|t| t, 0.01, 200, PulseSequence::Fid)).unwrap();
    let cfg = MitigationConfig { tail_window: Some((0.97, 1.0)), ..Default::default() };
    let err = mitigate(&att, &cfg).unwrap_err();
    assert!(err.to_string().contains("at least 10"), "{err}");
    let bad = MitigationConfig { tail_window: Some((0.9, 0.5)), ..Default::default() };
    assert!(mitigate(&att, &bad).is_err());
}

#[test]
fn extension_adds_zero_pad_samples() {
    let att = to_attenuation(&from_chi(|t| t, 0.01, 200, PulseSequence::Fid)).unwrap();
    let cfg = MitigationConfig { tail_window: Some((0.5, 1.0)), extend_to: Some(3.0), ..Default::default() };
    let out = mitigate(&att, &cfg).unwrap();
    let o = (out.len() - 1) / 2;
    assert!((out.t.last().unwrap() - 3.0).abs() < 1e-9);
    let tail = out.tail.unwrap();
    assert_eq!(out.source[o + 250], ChiSource::ZeroPad);
    assert!((tail.slope - 1.0).abs() < 1e-4);
    assert!((out.chi[o + 250] - (tail.slope * out.t[o + 250] + tail.intercept)).abs() < 1e-12);
}

#[test]
fn fig4a_configuration_runs() {
    let plan = MeasurementPlan { noise_sigma: 0.001, seed: 7, ..MeasurementPlan::ideal(0.01212, 6.06) };
    let tr = simulate_trace(&presets::lorentzian_single(), &PulseSequence::Fid, &plan).unwrap();
    let cfg = MitigationConfig { tail_window: Some((0.577, 0.99)), lowpass2_enabled: false, ..Default::default() };
    let prep = PrepOptions { mitigation: Some(cfg), ..Default::default() };
    let rec = reconstruct_fid(&tr, &prep).unwrap();
    assert!(rec.s.iter().all(|v| v.is_finite()));
}

#[test]
fn auto_window_finds_the_linear_part() {
    let m = presets::gaussian_mixture();
    let att = to_attenuation(&ideal(&m, 0.006291, 24.0)).unwrap();
    let (t, chi) = att.positive_half();
    let (k0, k1) = auto_tail_window(t, chi);
    assert_eq!(k1, t.len() - 1);
    assert!(t[k0] > 5.0 && k1 - k0 >= 10, "window starts at {}", t[k0]);

    // Too short for block estimates: last fifth.
    let t: Vec<f64> = (0..12).map(|k| k as f64).collect();
    assert_eq!(auto_tail_window(&t, &t), (9, 11));
}

#[test]
fn attenuation_csv_has_the_source_column() {
    let att = AttenuationTrace::new(vec![0.0, 0.1], vec![0.0, 0.5], vec![ChiSource::Measured, ChiSource::EarlyFit], 0.1);
    let csv = att.to_csv();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("t,chi,source"));
    assert!(lines.nth(1).unwrap().ends_with(",early_fit"));
}

proptest! {
    #[test]
    fn log_round_trip(chis in prop::collection::vec(0.0..25.0f64, 2..50)) {
        let n = chis.len();
        let mut chi = chis.clone();
        chi[0] = 0.0;
        let t: Vec<f64> = (0..n).map(|k| k as f64 * 0.1).collect();
        let c: Vec<f64> = chi.iter().map(|x| (-x).exp()).collect();
        let plan = MeasurementPlan { coherence_floor: 0.0, ..MeasurementPlan::ideal(0.1, (n - 1) as f64 * 0.1) };
        let tr = CoherenceTrace::new(t, c, vec![PointMask::Measured; n], plan, PulseSequence::Fid).unwrap();
        let att = to_attenuation(&tr).unwrap();
        for (a, b) in att.chi.iter().zip(&chi) {
            prop_assert!((a - b).abs() <= 4.0 * f64::EPSILON * b.max(1.0));
        }
    }

    #[test]
    fn mirror_is_even(chis in prop::collection::vec(0.0..10.0f64, 2..40)) {
        let n = chis.len();
        let t: Vec<f64> = (0..n).map(|k| k as f64 * 0.2).collect();
        let m = mirror(&AttenuationTrace::new(t, chis, vec![ChiSource::Measured; n], 0.2));
        let o = n - 1;
        for k in 0..n {
            prop_assert_eq!(m.chi[o + k], m.chi[o - k]);
        }
    }
}
