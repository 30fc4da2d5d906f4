//! Free-induction-decay inversion: S(ω) = 2∫₀^∞ χ̈(t) cos(ωt) dt.

use std::f64::consts::PI;

use rayon::prelude::*;
use rustfft::{num_complex::Complex64, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, FtnsError, Result};
use crate::lowpass;
use crate::prep::{
    fill_early_time_with, fit_early_time, mirror, mitigate, to_attenuation, AttenuationTrace,
    ChiSource, MitigationConfig,
};
use crate::reconstruction::{Method, ReconstructedSpectrum};
use crate::sequence::PulseSequence;
use crate::trace::CoherenceTrace;

/// χ̈ samples on the grid of the attenuation trace they came from.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivativeTrace {
    pub t: Vec<f64>,
    pub values: Vec<f64>,
    pub dt: f64,
}

impl DerivativeTrace {
    fn origin(&self) -> usize {
        if self.t[0] < 0.0 {
            (self.t.len() - 1) / 2
        } else {
            0
        }
    }
}

/// Centered differences inside, first-order one-sided differences at both ends.
pub fn gradient(y: &[f64], dt: f64) -> Vec<f64> {
    let n = y.len();
    let mut g = vec![0.0; n];
    g[0] = (y[1] - y[0]) / dt;
    g[n - 1] = (y[n - 1] - y[n - 2]) / dt;
    for i in 1..n - 1 {
        g[i] = (y[i + 1] - y[i - 1]) / (2.0 * dt);
    }
    g
}

/// Two successive first derivatives. When the trace carries a tail fit, the two
/// first-derivative samples next to the fit boundary are set to the fitted slope
/// and the optional second low-pass runs between the two differentiations.
pub fn second_derivative(att: &AttenuationTrace) -> Result<DerivativeTrace> {
    let n = att.len();
    if n < 5 {
        return Err(invalid(format!("second derivative needs >= 5 samples, got {n}")));
    }
    let dt = att.dt;
    for (k, w) in att.t.windows(2).enumerate() {
        if ((w[1] - w[0]) - dt).abs() > 1e-9 * dt {
            return Err(invalid(format!("non-uniform grid between samples {k} and {}", k + 1)));
        }
    }
    let mut first = gradient(&att.chi, dt);
    if let Some(tail) = att.tail {
        let o = att.origin();
        let b = tail.boundary;
        for k in [b.saturating_sub(1), b] {
            if o + k < n {
                first[o + k] = tail.slope;
            }
            if att.is_mirrored() && k > 0 && k <= o {
                first[o - k] = -tail.slope;
            }
        }
        if let Some(cut) = tail.lowpass2 {
            first = lowpass::zero_phase(&first, cut);
            if att.is_mirrored() {
                let o = att.origin();
                first[o] = 0.0;
                for k in 1..=o {
                    first[o - k] = -first[o + k];
                }
            }
        }
    }
    Ok(DerivativeTrace {
        t: att.t.clone(),
        values: gradient(&first, dt),
        dt,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Transform {
    /// Trapezoidal cosine sum at each grid frequency.
    #[default]
    Direct,
    /// Same sum evaluated with an FFT of the zero-padded samples.
    Fft,
}

/// Frequency grid of a transform: ω_k = k·2π/(N·dt), k = 0..N/2, with N = pad·(samples − 1) rounded up to even.
pub fn transform_grid(samples: usize, dt: f64, pad_factor: usize) -> (usize, f64, f64) {
    let mut n_pad = pad_factor.max(1) * (samples - 1);
    if n_pad % 2 == 1 {
        n_pad += 1;
    }
    let t_padded = n_pad as f64 * dt;
    (n_pad, t_padded, 2.0 * PI / t_padded)
}

pub fn fourier_to_spectrum(ddchi: &DerivativeTrace, pad_factor: usize) -> Result<ReconstructedSpectrum> {
    fourier_to_spectrum_with(ddchi, pad_factor, Transform::Direct)
}

/// S(ω_k) = dt·[χ̈₀ + 2Σ_{j≥1} χ̈_j cos(ω_k t_j)] over the t ≥ 0 samples; the
/// zero padding to T̃_max = pad_factor·T_max only sets the grid.
pub fn fourier_to_spectrum_with(
    ddchi: &DerivativeTrace,
    pad_factor: usize,
    transform: Transform,
) -> Result<ReconstructedSpectrum> {
    if pad_factor == 0 {
        return Err(invalid("pad_factor must be >= 1"));
    }
    let o = ddchi.origin();
    let x = &ddchi.values[o..];
    let ts = &ddchi.t[o..];
    let dt = ddchi.dt;
    let (n_pad, t_padded, d_omega) = transform_grid(x.len(), dt, pad_factor);
    let k_max = n_pad / 2;
    let omega_max = PI / dt;
    let omega: Vec<f64> = (0..=k_max)
        .map(|k| omega_max * (k as f64 / k_max as f64))
        .collect();

    let s: Vec<f64> = match transform {
        Transform::Direct => omega
            .par_iter()
            .map(|&w| {
                let mut acc = 0.0;
                for j in 1..x.len() {
                    acc += x[j] * (w * ts[j]).cos();
                }
                dt * (x[0] + 2.0 * acc)
            })
            .collect(),
        Transform::Fft => {
            // cos(ω_k t_j) is N-periodic in j, so samples past the padded length fold back.
            let mut buf = vec![Complex64::new(0.0, 0.0); n_pad];
            for (j, v) in x.iter().enumerate() {
                buf[j % n_pad].re += v;
            }
            FftPlanner::new().plan_fft_forward(n_pad).process(&mut buf);
            (0..=k_max).map(|k| dt * (2.0 * buf[k].re - x[0])).collect()
        }
    };

    if o > 0 {
        // Sine residue of the full two-sided sum; vanishes for even data.
        let full = &ddchi.values;
        let residue = omega
            .par_iter()
            .map(|&w| {
                let mut acc = 0.0;
                for (v, t) in full.iter().zip(&ddchi.t) {
                    acc += v * (w * t).sin();
                }
                (acc * dt).abs()
            })
            .reduce(|| 0.0, f64::max);
        let peak = s.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if residue > 1e-10 * peak.max(f64::MIN_POSITIVE) {
            return Err(FtnsError::Numeric(format!(
                "imaginary residue {residue:e} exceeds 1e-10 of max |S| = {peak:e}"
            )));
        }
    }

    Ok(ReconstructedSpectrum {
        omega,
        s,
        method: Method::FidFtns,
        d_omega,
        omega_max,
        t_padded: Some(t_padded),
        extra: Default::default(),
    })
}

fn default_pad() -> usize {
    8
}

fn default_true() -> bool {
    true
}

/// Preparation choices shared by the FID and spin-echo inversions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PrepOptions {
    #[serde(default = "default_pad")]
    pub pad_factor: usize,
    /// Early-time fit window length beyond τ_min; 10·dt when absent.
    #[serde(default)]
    pub epsilon: Option<f64>,
    /// Blend the early-time fit into the data with the error-function seam.
    #[serde(default = "default_true")]
    pub seam: bool,
    /// Noise mitigation; applied with defaults to noisy traces when absent.
    #[serde(default)]
    pub mitigation: Option<MitigationConfig>,
    /// Skip mitigation even for noisy traces.
    #[serde(default)]
    pub no_mitigation: bool,
    #[serde(default)]
    pub transform: Transform,
}

impl Default for PrepOptions {
    fn default() -> Self {
        Self {
            pad_factor: default_pad(),
            epsilon: None,
            seam: true,
            mitigation: None,
            no_mitigation: false,
            transform: Transform::Direct,
        }
    }
}

/// Log, early-time fill, and either mitigation or plain mirroring.
pub fn prepare(trace: &CoherenceTrace, prep: &PrepOptions) -> Result<AttenuationTrace> {
    let att = log_and_fill(trace, prep)?;
    finish(&att, prep, trace.plan.noise_sigma > 0.0)
}

/// One-sided attenuation with any withheld early-time samples filled in.
pub fn log_and_fill(trace: &CoherenceTrace, prep: &PrepOptions) -> Result<AttenuationTrace> {
    let mut att = to_attenuation(trace)?;
    let tau_min = trace.plan.tau_min;
    let needs_fill = att.source.contains(&ChiSource::Withheld) || tau_min > trace.dt();
    if needs_fill {
        let eps = prep.epsilon.unwrap_or(10.0 * trace.dt());
        let fit = fit_early_time(&att, &trace.sequence, tau_min, eps)?;
        att = fill_early_time_with(&att, &fit, prep.seam);
    }
    Ok(att)
}

/// Mitigation when configured (or when the data are noisy), plain mirroring otherwise.
pub fn finish(att: &AttenuationTrace, prep: &PrepOptions, noisy: bool) -> Result<AttenuationTrace> {
    let att = att.clone();
    match prep.mitigation {
        Some(cfg) if !prep.no_mitigation => mitigate(&att, &cfg),
        None if noisy && !prep.no_mitigation => mitigate(&att, &MitigationConfig::default()),
        _ => Ok(mirror(&att)),
    }
}

pub fn reconstruct_fid(trace: &CoherenceTrace, prep: &PrepOptions) -> Result<ReconstructedSpectrum> {
    if trace.sequence != PulseSequence::Fid {
        return Err(invalid(format!(
            "FID reconstruction needs an FID trace, got {}",
            trace.sequence.label()
        )));
    }
    let att = prepare(trace, prep)?;
    let dd = second_derivative(&att)?;
    let mut spec = fourier_to_spectrum_with(&dd, prep.pad_factor, prep.transform)?;
    spec.method = Method::FidFtns;
    if let Some(tail) = att.tail {
        spec.note("tail_fit", serde_json::to_value(tail).unwrap());
    }
    Ok(spec)
}
