//! Reconstruction error against a known spectrum: pointwise Δ(ω) and peak capture.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::reconstruction::ReconstructedSpectrum;
use crate::spectrum::SpectrumModel;

/// A true-spectrum peak and how well a reconstruction captured it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeakError {
    pub omega: f64,
    pub height: f64,
    /// Location of the largest reconstructed value within ±3·d_omega.
    pub found_omega: Option<f64>,
    pub found_height: Option<f64>,
    pub position_error: Option<f64>,
    pub height_rel_error: Option<f64>,
}

impl PeakError {
    /// Position within `3·d_omega` (strict) and relative height within `height_tol`.
    pub fn captured(&self, d_omega: f64, height_tol: f64) -> bool {
        matches!(
            (self.position_error, self.height_rel_error),
            (Some(p), Some(h)) if p < 3.0 * d_omega && h < height_tol
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub band: (f64, f64),
    pub d_omega: f64,
    pub omega: Vec<f64>,
    pub delta_abs: Vec<f64>,
    pub max_delta: f64,
    pub peak_errors: Vec<PeakError>,
}

impl ErrorReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("omega,delta\n");
        for (w, d) in self.omega.iter().zip(&self.delta_abs) {
            out.push_str(&format!("{w:.16e},{d:.16e}\n"));
        }
        out
    }

    pub fn all_peaks_captured(&self, height_tol: f64) -> bool {
        self.peak_errors.iter().all(|p| p.captured(self.d_omega, height_tol))
    }
}

/// Local maxima of the true spectrum in [lo, hi] above 5% of its largest
/// value there, located on a grid of spacing `step` and polished by golden
/// section. A maximum at ω = 0 counts, the spectrum being even there.
pub fn true_peaks(model: &SpectrumModel, lo: f64, hi: f64, step: f64) -> Vec<(f64, f64)> {
    let n = ((hi - lo) / step).ceil() as usize + 1;
    let grid: Vec<f64> = (0..n).map(|k| (lo + k as f64 * step).min(hi)).collect();
    let vals: Vec<f64> = grid.iter().map(|w| model.value_unchecked(*w)).collect();
    let finite_max = vals.iter().filter(|v| v.is_finite()).fold(0.0f64, |a, v| a.max(*v));
    let mut peaks = Vec::new();
    for k in 0..n {
        let v = vals[k];
        if !v.is_finite() || v < 0.05 * finite_max {
            continue;
        }
        let left = if k == 0 {
            if grid[0] == 0.0 { Some(vals[1.min(n - 1)]) } else { None }
        } else {
            Some(vals[k - 1])
        };
        let right = if k + 1 < n { Some(vals[k + 1]) } else { None };
        let (Some(l), Some(r)) = (left, right) else { continue };
        if !(v >= l && v > r) || !l.is_finite() {
            continue;
        }
        let w = if k == 0 { grid[0] } else { polish(model, grid[k - 1], grid[k + 1]) };
        peaks.push((w, model.value_unchecked(w)));
    }
    peaks
}

fn polish(model: &SpectrumModel, mut a: f64, mut b: f64) -> f64 {
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    let f = |w: f64| -model.value_unchecked(w);
    let mut x1 = b - phi * (b - a);
    let mut x2 = a + phi * (b - a);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..80 {
        if f1 < f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - phi * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + phi * (b - a);
            f2 = f(x2);
        }
    }
    0.5 * (a + b)
}

/// Δ(ω) = |S(ω) − S_rec(ω)| at the reconstruction's own grid points inside
/// `band` (default: its whole grid), plus peak matching. Points where either
/// value is non-finite are skipped.
pub fn error_report(
    model: &SpectrumModel,
    rec: &ReconstructedSpectrum,
    band: Option<(f64, f64)>,
) -> Result<ErrorReport> {
    if rec.omega.is_empty() {
        return Err(invalid("empty reconstruction"));
    }
    let lo_rec = rec.omega[0];
    let hi_rec = *rec.omega.last().unwrap();
    let (lo, hi) = band.unwrap_or((lo_rec, hi_rec));
    let (lo, hi) = (lo.max(lo_rec), hi.min(hi_rec));
    if !(hi > lo) {
        return Err(invalid(format!("comparison band [{lo}, {hi}] is empty")));
    }
    let mut omega = Vec::new();
    let mut delta_abs = Vec::new();
    for (w, s) in rec.omega.iter().zip(&rec.s) {
        if *w < lo || *w > hi {
            continue;
        }
        let t = model.value_unchecked(*w);
        if t.is_finite() && s.is_finite() {
            omega.push(*w);
            delta_abs.push((t - s).abs());
        }
    }
    let max_delta = delta_abs.iter().copied().fold(0.0, f64::max);
    let d_omega = rec.d_omega;
    let step = (d_omega / 10.0).max((hi - lo) / 2e5);
    let peak_errors = true_peaks(model, lo, hi, step)
        .into_iter()
        .map(|(w, h)| {
            let found = rec
                .omega
                .iter()
                .zip(&rec.s)
                .filter(|(x, s)| (**x - w).abs() <= 3.0 * d_omega && s.is_finite())
                .max_by(|a, b| a.1.total_cmp(b.1));
            PeakError {
                omega: w,
                height: h,
                found_omega: found.map(|f| *f.0),
                found_height: found.map(|f| *f.1),
                position_error: found.map(|f| (f.0 - w).abs()),
                height_rel_error: found.map(|f| (f.1 - h).abs() / h),
            }
        })
        .collect();
    Ok(ErrorReport {
        band: (lo, hi),
        d_omega,
        omega,
        delta_abs,
        max_delta,
        peak_errors,
    })
}
