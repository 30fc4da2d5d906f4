//! One PASS/FAIL line per acceptance criterion.
//!
//! Exits non-zero on any failure that is not listed in `KNOWN_DEFECTS`. Those
//! are criteria whose stated target contradicts other stated values; they are
//! still evaluated as written and reported as FAIL.

use std::f64::consts::{LN_2, PI};
use std::path::Path;
use std::process::ExitCode;

use ftns::batch::{cmd_reconstruct, cmd_simulate, run_pipeline, RunConfig};
use ftns::ddns::{
    comb_coefficients, run_alvarez_suter, single_delta_bias, single_delta_probe, CombModel, DdnsPlan,
};
use ftns::fid::{log_and_fill, reconstruct_fid, PrepOptions, Transform};
use ftns::forward::{attenuation_with, simulate_trace, Route};
use ftns::prep::{mitigate, to_attenuation, MitigationConfig};
use ftns::report::error_report;
use ftns::se::{fit_one_over_f, m_from_s, recursion_s_from_m, MArray};
use ftns::sequence::PulseSequence;
use ftns::special::se_power_law_coefficient;
use ftns::spectrum::{presets, SpectrumComponent, SpectrumModel, WidthForm};
use ftns::trace::MeasurementPlan;

type Check = ftns::Result<(bool, String)>;

const KNOWN_DEFECTS: &[(&str, &str)] = &[(
    "AC7",
    "the stated n = 1 coefficient ln2/(4π) is half of what the same filter and \
     normalization give; the n = 2 value 1/24 (which passes) fixes the convention, \
     and under it the n = 1 coefficient is ln2/(2π)",
)];

fn fixture(name: &str) -> ftns::Result<RunConfig> {
    RunConfig::load(&Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name))
}

fn noise_free(dt: f64, t_max: f64) -> MeasurementPlan {
    MeasurementPlan { coherence_floor: 0.0, ..MeasurementPlan::ideal(dt, t_max) }
}

fn ac1() -> Check {
    let model = SpectrumModel::new(vec![SpectrumComponent::Gaussian { a: 1.0, mu: 0.0, sigma: 1.0 }], false)?;
    let trace = simulate_trace(&model, &PulseSequence::Fid, &noise_free(0.01, 20.0))?;
    let rec = reconstruct_fid(&trace, &PrepOptions { pad_factor: 8, ..Default::default() })?;
    let worst = rec
        .omega
        .iter()
        .zip(&rec.s)
        .filter(|(w, _)| **w <= 3.0)
        .map(|(w, s)| (s - (-w * w).exp()).abs() / (-w * w).exp())
        .fold(0.0, f64::max);
    Ok((worst < 1e-3, format!("max relative error on |ω| ≤ 3: {worst:.2e}")))
}

fn ac2() -> Check {
    let fid = fixture("fig1_fid.json")?;
    let (trace, rec) = run_pipeline(&fid)?;
    let points = trace.map_or(0, |t| t.len());
    let model = fid.spectrum.as_ref().unwrap();
    let max_delta = error_report(model, &rec, Some((0.0, 2.0)))?.max_delta;

    let (_, baseline) = run_pipeline(&fixture("fig1_ddns_as.json")?)?;
    let mut probes = 0;
    let mut beaten = 0;
    for (w, s) in baseline.omega.iter().zip(&baseline.s) {
        if *w <= 1.0 {
            probes += 1;
            let truth = model.evaluate(*w)?;
            if (s - truth).abs() > (rec.interpolate(*w) - truth).abs() {
                beaten += 1;
            }
        }
    }
    let pass = points == 1930 && max_delta < 0.02 * 2.0 && probes > 0 && beaten == probes;
    Ok((
        pass,
        format!(
            "{points} points, max Δ on [0, 2] = {max_delta:.4} (gate 0.04); \
             AS error larger at {beaten}/{probes} probes ≤ 1"
        ),
    ))
}

fn ac3() -> Check {
    let fig1 = presets::lorentzian_single();
    let att = to_attenuation(&simulate_trace(&fig1, &PulseSequence::Fid, &noise_free(0.00314, 6.06))?)?;
    let cfg = MitigationConfig { tail_window: Some((0.577, 0.99)), ..Default::default() };
    let s1 = mitigate(&att, &cfg)?.tail.unwrap().slope / fig1.fid_asymptotic_slope()? - 1.0;

    let mix = presets::gaussian_mixture();
    let att = to_attenuation(&simulate_trace(&mix, &PulseSequence::Fid, &noise_free(0.006291, 24.0))?)?;
    let s2 = mitigate(&att, &MitigationConfig::default())?.tail.unwrap().slope / mix.fid_asymptotic_slope()? - 1.0;
    Ok((
        s1.abs() < 5e-3 && s2.abs() < 5e-3,
        format!("slope vs asymptote: Lorentzian {:+.3}%, Gaussian mixture {:+.3}%", 100.0 * s1, 100.0 * s2),
    ))
}

fn ac4() -> Check {
    let mut ok = true;
    let mut lines = Vec::new();
    let runs = [
        ("fig4a_noisy.json", 0.001, None, 0.2),
        ("fig4b_noisy.json", 0.001, None, 0.2),
        ("fig4a_noisy.json", 0.01, None, 0.5),
        ("fig4b_noisy.json", 0.01, Some((0.359, 0.718)), 0.5),
    ];
    for (name, sigma, window, tol) in runs {
        let mut cfg = fixture(name)?;
        cfg.plan.as_mut().unwrap().noise_sigma = sigma;
        if let Some(w) = window {
            cfg.mitigation.as_mut().unwrap().tail_window = Some(w);
        }
        let (_, rec) = run_pipeline(&cfg)?;
        let rep = error_report(cfg.spectrum.as_ref().unwrap(), &rec, None)?;
        for p in &rep.peak_errors {
            let hit = p.captured(rec.d_omega, tol);
            ok &= hit;
            lines.push(format!(
                "{} {:.1}% peak {:.2}: dω-units {:.2}, height {:+.1}%",
                &name[..5],
                sigma * 100.0,
                p.omega,
                p.position_error.unwrap_or(f64::NAN) / rec.d_omega,
                100.0 * p.height_rel_error.unwrap_or(f64::NAN)
            ));
        }
        ok &= !rep.peak_errors.is_empty();
    }
    Ok((ok, lines.join("; ")))
}

fn ac5() -> Check {
    let cfg = fixture("fig6_se_1f.json")?;
    let trace = ftns::batch::simulate(&cfg)?;
    let last = trace.t[trace.retained_len() - 1];
    let att = log_and_fill(&trace, &cfg.prep_options())?;
    let Some(f) = fit_one_over_f(&att)? else {
        return Ok((false, "no power-law component was fitted".into()));
    };
    let truth = (3.45..=3.57).contains(&f.gamma) && (f.a_coef - 1.0).abs() < 0.05 && (f.n - 2.5).abs() < 0.05;
    let rel = |x: f64, r: f64| x / r - 1.0;
    let (ra, rg, rc) = (rel(f.alpha, 0.0385433), rel(f.gamma, 3.51096), rel(f.a_coef, 0.974526));
    let reference = ra.abs() < 0.02 && rg.abs() < 0.02 && rc.abs() < 0.02;
    Ok((
        truth && reference,
        format!(
            "record to C > 0.005 ends at t = {last:.3}; γ = {:.5}, A = {:.4}, n = {:.4}; \
             vs reference: α {:+.2}%, γ {:+.2}%, A {:+.2}%",
            f.gamma,
            f.a_coef,
            f.n,
            100.0 * ra,
            100.0 * rg,
            100.0 * rc
        ),
    ))
}

fn ac6() -> Check {
    let lor = |s0, wc, d| SpectrumComponent::Lorentzian { s0, omega_c: wc, d, width_form: WidthForm::PlainHwhm };
    let model = SpectrumModel::new(vec![lor(1.0, 1.2, 0.0), lor(0.5, 0.8, 3.0)], true)?;
    let d_omega = 0.02;
    let m: Vec<f64> = (0..512)
        .map(|k| {
            let w = k as f64 * d_omega;
            model.evaluate(w).unwrap() - model.evaluate(w / 2.0).unwrap() / 2.0
        })
        .collect();
    let rec = recursion_s_from_m(&MArray { d_omega, m: m.clone() });
    let worst = (0..256)
        .map(|k| {
            let t = model.evaluate(rec.omega[k]).unwrap();
            (rec.s[k] - t).abs() / t
        })
        .fold(0.0, f64::max);
    let back = m_from_s(&rec.s);
    let scale = m.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let resid = (0..512).step_by(2).map(|k| (back[k] - m[k]).abs()).fold(0.0, f64::max) / scale;
    Ok((
        worst < 0.01 && resid < 1e-12,
        format!("max relative error on lower half {worst:.2e}; residual at even indices {resid:.1e}"),
    ))
}

fn ac7() -> Check {
    let mut ok = true;
    let mut parts = Vec::new();
    for (n, stated) in [(1.0, LN_2 / (4.0 * PI)), (2.0, 1.0 / 24.0)] {
        let model = SpectrumModel::new(vec![SpectrumComponent::OneOverF { a_coef: 1.0, n }], false)?;
        let mut worst = 0.0f64;
        for t in [0.5f64, 1.0, 2.0] {
            let want = stated * t.powf(n + 1.0);
            let quad = attenuation_with(&model, &PulseSequence::SpinEcho, t, Route::Quadrature)?;
            let closed = se_power_law_coefficient(n) * t.powf(n + 1.0);
            worst = worst.max((quad / want - 1.0).abs()).max((closed / want - 1.0).abs());
        }
        ok &= worst < 1e-8;
        parts.push(format!("n = {n}: worst relative deviation {worst:.2e}"));
    }
    Ok((ok, parts.join("; ")))
}

fn ac8() -> Check {
    let plan = DdnsPlan::new(16, 41, PI / 10.0, PI / 0.5);
    let w_max = plan.band().1;
    let planted = move |w: f64| {
        let x = w / w_max;
        if x >= 1.0 { 0.0 } else { (1.0 - x * x).powi(2) * (1.0 + (3.0 * w).sin().powi(2)) }
    };
    let oracle = CombModel { coefficients: comb_coefficients(16, 41)?, spectrum: planted };
    let rec = run_alvarez_suter(&oracle, &plan)?;
    let exact = rec.omega.iter().zip(&rec.s).map(|(w, s)| (s - planted(*w)).abs()).fold(0.0, f64::max);

    let flat = SpectrumModel::new(vec![SpectrumComponent::Constant { c: 1.0 }], false)?;
    let rec = run_alvarez_suter(&flat, &DdnsPlan::new(32, 41, PI / 8.0, PI / 0.5))?;
    let flat_err = rec.s.iter().map(|s| (s - 1.0).abs()).fold(0.0, f64::max);

    let reading = single_delta_probe(&flat, &DdnsPlan::new(32, 41, 0.5, 2.0), 2.0)?;
    let bias = single_delta_bias(&comb_coefficients(32, 2001)?);
    let bias_err = ((reading - 1.0) / bias - 1.0).abs();
    Ok((
        exact < 1e-10 && flat_err < 0.01 && bias_err < 0.05,
        format!(
            "comb-model inversion error {exact:.1e}; flat recovery {:.2}%; \
             single-δ bias {:.4} vs computed {bias:.4}",
            100.0 * flat_err,
            reading - 1.0
        ),
    ))
}

fn ac9() -> Check {
    let model = SpectrumModel::new(vec![SpectrumComponent::Gaussian { a: 1.0, mu: 0.0, sigma: 1.0 }], false)?;
    let mut laws = true;
    for (dt, t_max, pad) in [(0.01, 20.0, 8), (0.00314, 6.06, 8), (0.05, 3.0, 1), (0.02, 4.0, 3)] {
        let trace = simulate_trace(&model, &PulseSequence::Fid, &noise_free(dt, t_max))?;
        let rec = reconstruct_fid(&trace, &PrepOptions { pad_factor: pad, ..Default::default() })?;
        laws &= rec.omega_max == PI / dt && rec.d_omega == 2.0 * PI / rec.t_padded.unwrap();
    }
    let trace = simulate_trace(&model, &PulseSequence::Fid, &noise_free(0.01, 20.0))?;
    let mut shift = 0.0f64;
    for transform in [Transform::Direct, Transform::Fft] {
        let run = |pad| reconstruct_fid(&trace, &PrepOptions { pad_factor: pad, transform, ..Default::default() });
        let (a, b) = (run(8)?, run(16)?);
        let peak = a.s.iter().fold(0.0f64, |m, v| m.max(*v));
        // Every grid frequency at pad 8 is the even-indexed one at pad 16.
        let d = a.s.iter().enumerate().map(|(k, s)| (s - b.s[2 * k]).abs()).fold(0.0, f64::max);
        shift = shift.max(d / peak);
    }
    Ok((
        laws && shift < 1e-6,
        format!("ω_max and δω exact: {laws}; padding 8 to 16 moves S by {shift:.1e} of max"),
    ))
}

fn ac10() -> Check {
    let dir = tempfile::tempdir().map_err(|e| ftns::FtnsError::Numeric(e.to_string()))?;
    let cfg = fixture("fig4b_noisy.json")?.with_seed(Some(11));
    let mut blobs = Vec::new();
    for run in ["a", "b"] {
        let out = dir.path().join(run);
        cmd_simulate(&cfg, &out)?;
        cmd_reconstruct(&cfg, Some(&out.join("trace.csv")), &out.join("rec"))?;
        let read = |p: &Path| std::fs::read(p).unwrap();
        blobs.push([
            read(&out.join("trace.csv")),
            read(&out.join("trace.json")),
            read(&out.join("rec/spectrum.csv")),
            read(&out.join("rec/spectrum.json")),
        ]);
    }
    let same = blobs[0] == blobs[1];
    Ok((same, format!("trace and spectrum files identical across runs: {same}")))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Check); 10] = [
        ("AC1", ac1),
        ("AC2", ac2),
        ("AC3", ac3),
        ("AC4", ac4),
        ("AC5", ac5),
        ("AC6", ac6),
        ("AC7", ac7),
        ("AC8", ac8),
        ("AC9", ac9),
        ("AC10", ac10),
    ];
    let mut unexpected = 0;
    for (id, check) in criteria {
        let (pass, detail) = check().unwrap_or_else(|e| (false, format!("error: {e}")));
        println!("{id} {} {detail}", if pass { "PASS" } else { "FAIL" });
        if !pass {
            match KNOWN_DEFECTS.iter().find(|(k, _)| *k == id) {
                Some((_, why)) => println!("     known defect in the stated target: {why}"),
                None => unexpected += 1,
            }
        }
    }
    if unexpected == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
