//! From coherence samples to a complete attenuation record.
//!
//! The steps are: take the logarithm, fill the unmeasured early-time window
//! from a short-time expansion, mirror about t = 0, and for noisy data apply
//! the low-pass plus tail-line mitigation.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, FtnsError, Result};
use crate::fit::{line_fit, lstsq};
use crate::lowpass;
use crate::sequence::PulseSequence;
use crate::special::erf;
use crate::trace::{CoherenceTrace, PointMask};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChiSource {
    Measured,
    /// Below τ_min; awaiting an early-time fill.
    Withheld,
    EarlyFit,
    LinearFit,
    ZeroPad,
}

impl ChiSource {
    pub fn as_str(&self) -> &'static str {
        match self {
            ChiSource::Measured => "measured",
            ChiSource::Withheld => "withheld",
            ChiSource::EarlyFit => "early_fit",
            ChiSource::LinearFit => "linear_fit",
            ChiSource::ZeroPad => "zero_pad",
        }
    }
}

/// Straight line fitted to the attenuation tail, carried along for the derivative patch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailFit {
    pub slope: f64,
    pub intercept: f64,
    /// One-sided sample index where the fitted line takes over.
    pub boundary: usize,
    pub window: (f64, f64),
    /// Cutoff (rad/sample) of the optional filter on the first derivative.
    pub lowpass2: Option<f64>,
}

/// χ = −ln C on a one-sided (0..T) or mirrored (−T..T) uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct AttenuationTrace {
    pub t: Vec<f64>,
    pub chi: Vec<f64>,
    pub source: Vec<ChiSource>,
    pub dt: f64,
    pub tail: Option<TailFit>,
}

impl AttenuationTrace {
    pub fn new(t: Vec<f64>, chi: Vec<f64>, source: Vec<ChiSource>, dt: f64) -> Self {
        Self {
            t,
            chi,
            source,
            dt,
            tail: None,
        }
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn is_mirrored(&self) -> bool {
        self.t.first().is_some_and(|t| *t < 0.0)
    }

    /// Index of the t = 0 sample.
    pub fn origin(&self) -> usize {
        if self.is_mirrored() {
            (self.len() - 1) / 2
        } else {
            0
        }
    }

    /// The t ≥ 0 half as (t, χ) slices.
    pub fn positive_half(&self) -> (&[f64], &[f64]) {
        let o = self.origin();
        (&self.t[o..], &self.chi[o..])
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,chi,source\n");
        for k in 0..self.len() {
            out.push_str(&format!(
                "{:.16e},{:.16e},{}\n",
                self.t[k],
                self.chi[k],
                self.source[k].as_str()
            ));
        }
        out
    }
}

/// χ = −ln C over the retained part of the trace.
pub fn to_attenuation(trace: &CoherenceTrace) -> Result<AttenuationTrace> {
    let n = trace.retained_len();
    let mut chi = Vec::with_capacity(n);
    let mut source = Vec::with_capacity(n);
    for k in 0..n {
        let c = trace.c[k];
        if !(c > 0.0 && c.is_finite()) {
            return Err(invalid(format!(
                "coherence at t = {} is {c}; the logarithm needs C > 0",
                trace.t[k]
            )));
        }
        chi.push(-c.ln());
        source.push(match trace.mask[k] {
            PointMask::WithheldBelowTauMin => ChiSource::Withheld,
            _ => ChiSource::Measured,
        });
    }
    Ok(AttenuationTrace::new(
        trace.t[..n].to_vec(),
        chi,
        source,
        trace.dt(),
    ))
}

/// Short-time expansion χ ≈ κ0 t^p + κ1 t^(p+2) + κ2 t^(p+4), with p = 2 for FID and 4 for a spin echo.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EarlyTimeFit {
    pub kappa: [f64; 3],
    pub sequence: PulseSequence,
    pub tau_min: f64,
    pub fit_window: (f64, f64),
}

impl EarlyTimeFit {
    pub fn powers(sequence: &PulseSequence) -> Result<[i32; 3]> {
        match sequence {
            PulseSequence::Fid => Ok([2, 4, 6]),
            PulseSequence::SpinEcho => Ok([4, 6, 8]),
            PulseSequence::Cpmg { .. } => Err(FtnsError::Unsupported(
                "early-time expansion is defined for FID and spin echo only".into(),
            )),
        }
    }

    pub fn value(&self, t: f64) -> f64 {
        let p = Self::powers(&self.sequence).unwrap();
        (0..3).map(|i| self.kappa[i] * t.powi(p[i])).sum()
    }
}

pub fn fit_early_time(
    att: &AttenuationTrace,
    sequence: &PulseSequence,
    tau_min: f64,
    epsilon: f64,
) -> Result<EarlyTimeFit> {
    let powers = EarlyTimeFit::powers(sequence)?;
    let end = tau_min + epsilon;
    let (t, chi) = att.positive_half();
    let o = att.origin();
    let idx: Vec<usize> = (0..t.len())
        .filter(|&k| {
            t[k] > 0.0
                && t[k] >= tau_min - 1e-9 * att.dt
                && t[k] <= end + 1e-9 * att.dt
                && att.source[o + k] == ChiSource::Measured
        })
        .collect();
    if idx.len() < 4 {
        return Err(invalid(format!(
            "early-time window [{tau_min}, {end}] holds {} measured points; at least 4 are required",
            idx.len()
        )));
    }
    // Fit in the scaled variable u = t/end for conditioning.
    let cols: Vec<Vec<f64>> = powers
        .iter()
        .map(|&p| idx.iter().map(|&k| (t[k] / end).powi(p)).collect())
        .collect();
    let y: Vec<f64> = idx.iter().map(|&k| chi[k]).collect();
    let c = lstsq(&cols, &y)
        .ok_or_else(|| FtnsError::Numeric("early-time fit is rank deficient".into()))?;
    let mut kappa = [0.0; 3];
    for i in 0..3 {
        kappa[i] = c[i] / end.powi(powers[i]);
    }
    Ok(EarlyTimeFit {
        kappa,
        sequence: *sequence,
        tau_min,
        fit_window: (0.0, end),
    })
}

/// Seam weight: a shifted error function rising over 5·dt, centered at τ_min + 5·dt.
pub fn seam_weight(t: f64, tau_min: f64, dt: f64) -> f64 {
    if t < tau_min {
        return 0.0;
    }
    let width = 5.0 * dt;
    0.5 * (1.0 + erf((t - (tau_min + width)) / width))
}

/// Replaces samples below τ_min by the fit and blends across the seam when `blend` is set.
pub fn fill_early_time_with(att: &AttenuationTrace, fit: &EarlyTimeFit, blend: bool) -> AttenuationTrace {
    let mut out = att.clone();
    let o = att.origin();
    let n = att.len();
    for i in 0..n {
        let t = att.t[i].abs();
        let fitted = fit.value(t);
        if t < fit.tau_min - 1e-9 * att.dt || att.source[i] == ChiSource::Withheld {
            out.chi[i] = if i == o { 0.0 } else { fitted };
            out.source[i] = ChiSource::EarlyFit;
        } else if blend && matches!(att.source[i], ChiSource::Measured) {
            let w = seam_weight(t, fit.tau_min, att.dt);
            out.chi[i] = w * att.chi[i] + (1.0 - w) * fitted;
        }
    }
    out
}

pub fn fill_early_time(att: &AttenuationTrace, fit: &EarlyTimeFit) -> AttenuationTrace {
    fill_early_time_with(att, fit, true)
}

/// Even extension of a one-sided trace onto −T..T.
pub fn mirror(att: &AttenuationTrace) -> AttenuationTrace {
    if att.is_mirrored() {
        return att.clone();
    }
    let n = att.len();
    let mut t = Vec::with_capacity(2 * n - 1);
    let mut chi = Vec::with_capacity(2 * n - 1);
    let mut source = Vec::with_capacity(2 * n - 1);
    for k in (1..n).rev() {
        t.push(-att.t[k]);
        chi.push(att.chi[k]);
        source.push(att.source[k]);
    }
    t.extend_from_slice(&att.t);
    chi.extend_from_slice(&att.chi);
    source.extend_from_slice(&att.source);
    AttenuationTrace {
        t,
        chi,
        source,
        dt: att.dt,
        tail: att.tail,
    }
}

fn default_lowpass1() -> f64 {
    0.5
}

fn default_lowpass2() -> f64 {
    0.25
}

fn default_true() -> bool {
    true
}

/// Settings of the noisy-data pipeline. Cutoffs are in radians per sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MitigationConfig {
    /// Tail window as fractions of T_max; chosen automatically when absent.
    #[serde(default)]
    pub tail_window: Option<(f64, f64)>,
    #[serde(default = "default_lowpass1")]
    pub lowpass1_cutoff: f64,
    #[serde(default = "default_true")]
    pub lowpass2_enabled: bool,
    #[serde(default = "default_lowpass2")]
    pub lowpass2_cutoff: f64,
    /// Continue the fitted line out to this time.
    #[serde(default)]
    pub extend_to: Option<f64>,
}

impl Default for MitigationConfig {
    fn default() -> Self {
        Self {
            tail_window: None,
            lowpass1_cutoff: default_lowpass1(),
            lowpass2_enabled: true,
            lowpass2_cutoff: default_lowpass2(),
            extend_to: None,
        }
    }
}

impl MitigationConfig {
    pub fn validate(&self) -> Result<()> {
        if let Some((a, b)) = self.tail_window {
            if !(0.0..1.0).contains(&a) || !(a < b && b <= 1.0) {
                return Err(invalid(format!(
                    "mitigation.tail_window must satisfy 0 <= start < end <= 1, got [{a}, {b}]"
                )));
            }
        }
        for (name, v) in [
            ("lowpass1_cutoff", self.lowpass1_cutoff),
            ("lowpass2_cutoff", self.lowpass2_cutoff),
        ] {
            if !(v > 0.0) {
                return Err(invalid(format!("mitigation.{name} must be > 0, got {v}")));
            }
        }
        Ok(())
    }
}

/// Largest suffix on which the local curvature of χ stays below 5% of its
/// maximum. Curvature comes from quadratic fits over sliding blocks of a tenth
/// of the record, which keeps it usable on noisy data. Falls back to the last
/// fifth of the record when no such suffix holds 10 samples.
pub fn auto_tail_window(t: &[f64], chi: &[f64]) -> (usize, usize) {
    let n = chi.len();
    let fallback = ((n as f64 * 0.8) as usize, n - 1);
    let w = (n / 10).max(7);
    let half = w / 2;
    if n < 2 * w {
        return fallback;
    }
    let stride = (n / 200).max(1);
    let curv: Vec<(usize, f64)> = (half..n - half)
        .step_by(stride)
        .filter_map(|k| {
            let x: Vec<f64> = t[k - half..=k + half].iter().map(|v| v - t[k]).collect();
            let cols = vec![x.iter().map(|v| v * v).collect(), x.clone(), vec![1.0; x.len()]];
            lstsq(&cols, &chi[k - half..=k + half]).map(|c| (k, (2.0 * c[0]).abs()))
        })
        .collect();
    let peak = curv.iter().map(|p| p.1).fold(0.0, f64::max);
    let mut start = n;
    for &(k, v) in curv.iter().rev() {
        if v < 0.05 * peak {
            start = k;
        } else {
            break;
        }
    }
    if start + 10 > n {
        return fallback;
    }
    (start, n - 1)
}

/// Noisy-data pipeline: mirror, low-pass C, log, fit a line to the tail, replace the tail by it.
pub fn mitigate(att: &AttenuationTrace, cfg: &MitigationConfig) -> Result<AttenuationTrace> {
    cfg.validate()?;
    let one_sided = if att.is_mirrored() {
        let o = att.origin();
        AttenuationTrace::new(
            att.t[o..].to_vec(),
            att.chi[o..].to_vec(),
            att.source[o..].to_vec(),
            att.dt,
        )
    } else {
        att.clone()
    };
    let n = one_sided.len();
    let mirrored = mirror(&one_sided);

    let coherence: Vec<f64> = mirrored.chi.iter().map(|x| (-x).exp()).collect();
    let smoothed = lowpass::zero_phase(&coherence, cfg.lowpass1_cutoff);
    let o = n - 1;
    let mut chi_pos: Vec<f64> = smoothed[o..].iter().map(|c| -c.max(1e-12).ln()).collect();
    let shift = chi_pos[0];
    for v in chi_pos.iter_mut() {
        *v -= shift;
    }

    let (k0, k1) = match cfg.tail_window {
        Some((a, b)) => {
            let last = (n - 1) as f64;
            ((a * last).ceil() as usize, ((b * last).floor() as usize).min(n - 1))
        }
        None => auto_tail_window(&one_sided.t, &chi_pos),
    };
    if k1 < k0 || k1 - k0 + 1 < 10 {
        return Err(invalid(format!(
            "tail window holds {} samples; at least 10 are required",
            (k1 + 1).saturating_sub(k0)
        )));
    }
    let (slope, intercept) = line_fit(&one_sided.t[k0..=k1], &chi_pos[k0..=k1]);

    let mut t = one_sided.t.clone();
    let mut source = one_sided.source.clone();
    // χ(0) = 0 survives even when the window starts at the origin.
    for k in k0.max(1)..n {
        chi_pos[k] = slope * t[k] + intercept;
        source[k] = ChiSource::LinearFit;
    }
    if let Some(t_ext) = cfg.extend_to {
        let mut k = n;
        while (k as f64) * att.dt <= t_ext + 1e-9 * att.dt {
            let tk = k as f64 * att.dt;
            t.push(tk);
            chi_pos.push(slope * tk + intercept);
            source.push(ChiSource::ZeroPad);
            k += 1;
        }
    }
    let window = (one_sided.t[k0], one_sided.t[k1]);
    let mut out = mirror(&AttenuationTrace::new(t, chi_pos, source, att.dt));
    out.tail = Some(TailFit {
        slope,
        intercept,
        boundary: k0,
        window,
        lowpass2: cfg.lowpass2_enabled.then_some(cfg.lowpass2_cutoff),
    });
    Ok(out)
}
