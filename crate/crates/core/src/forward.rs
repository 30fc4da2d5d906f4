//! Forward model: attenuation χ(t) = (1/4π)∫ S(ω) F(ω, t) dω and synthetic coherence data.
//!
//! Two independent evaluations are provided. [`attenuation`] integrates the
//! overlap in frequency. [`attenuation_lagged`] works in time: each component's
//! free-evolution attenuation g(τ) = ∫₀^τ (τ−u) c(u) du is known in closed form
//! (or as a smooth finite integral), and any sequence with switching jumps a_j
//! at t_j gives χ = −Σ_{j<l} a_j a_l g(t_l − t_j).

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{FtnsError, Result};
use crate::quad::{integrate_panels, integrate_panels_floor, panel_edges};
use crate::sequence::{filter_value, PulseSequence};
use crate::special::one_over_f_lag;
use crate::spectrum::{closed_form_chi, gaussian_fid_chi, SpectrumComponent, SpectrumModel};
use crate::trace::{CoherenceTrace, MeasurementPlan, PointMask};

/// Relative accuracy targeted by the frequency-domain quadrature.
pub const QUAD_RTOL: f64 = 1e-12;

/// How [`simulate_trace_with`] evaluates χ.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Route {
    /// Closed form when one exists, otherwise the time-domain lag sum.
    #[default]
    Auto,
    Quadrature,
    Lagged,
}

fn check_integrable(model: &SpectrumModel, sequence: &PulseSequence) -> Result<()> {
    if *sequence == PulseSequence::Fid && model.has_one_over_f() {
        return Err(FtnsError::Divergent(
            "1/f noise under free evolution: the FID filter is constant near omega = 0".into(),
        ));
    }
    Ok(())
}

/// χ(t) by adaptive Gauss-Legendre quadrature of the overlap integral.
pub fn attenuation(model: &SpectrumModel, sequence: &PulseSequence, t: f64) -> Result<f64> {
    check_integrable(model, sequence)?;
    if !(t >= 0.0) {
        return Err(FtnsError::Domain(format!("time must be >= 0, got {t}")));
    }
    if t == 0.0 {
        return Ok(0.0);
    }
    let mut flat = 0.0;
    let mut shaped = Vec::new();
    for c in model.components() {
        match *c {
            SpectrumComponent::Constant { c } => flat += c,
            _ => shaped.push(*c),
        }
    }
    // ∫F dω = 2πt for every ±1 sequence, so a flat floor contributes c·t/2.
    let flat_part = flat * t / 2.0;
    if shaped.is_empty() {
        return Ok(flat_part);
    }
    let varying = SpectrumModel::new(shaped, model.symmetrize())?;
    Ok(flat_part + overlap_quadrature(&varying, sequence, t))
}

fn overlap_quadrature(model: &SpectrumModel, sequence: &PulseSequence, t: f64) -> f64 {
    let sw = sequence.switching(t);
    let p0 = sw.mean_weight();
    let lags = sw.merged_lags();
    let integrand = |w: f64| model.even_part(w) * filter_value(sequence, w, t) / (2.0 * PI);

    let mut power_laws = Vec::new();
    let mut smooth = Vec::new();
    let mut breaks = vec![];
    let mut w_hi: f64 = 0.0;
    for c in model.components() {
        match *c {
            SpectrumComponent::OneOverF { a_coef, n } => {
                power_laws.push((a_coef, n));
                w_hi = w_hi.max(40.0 / t);
            }
            _ => {
                smooth.push(*c);
                let (center, width) = (c.center().abs(), c.width());
                breaks.push(center);
                for k in -6..=14 {
                    let off = width * 2f64.powi(k);
                    breaks.push(center + off);
                    breaks.push(center - off);
                }
                w_hi = w_hi.max(center + 40.0 * width);
            }
        }
    }
    w_hi = w_hi.max(4.0 * PI / t);

    // Geometric grading toward ω = 0 resolves the |ω|^(2−n) behaviour of 1/f terms.
    let mut w_lo = 0.0;
    let mut low_remainder = 0.0;
    if !power_laws.is_empty() {
        let top = 1.0 / t;
        let levels = 60;
        for k in 0..=levels {
            breaks.push(top * 0.5f64.powi(k));
        }
        w_lo = top * 0.5f64.powi(levels);
        // Below w_lo the filter is F₂ω² with F₂ = (Σ a_j t_j²)²/4 and the smooth parts are negligible.
        let f2 = sw.moment(2).powi(2) / 4.0;
        for &(a, n) in &power_laws {
            low_remainder += a * f2 * w_lo.powf(3.0 - n) / (3.0 - n) / (2.0 * PI);
        }
    }

    let max_panel = PI / t;
    let edges = panel_edges(w_lo, w_hi, &breaks, max_panel);
    let mut core = integrate_panels(&integrand, &edges, QUAD_RTOL);

    let smooth_model = SpectrumModel::new(smooth, model.symmetrize()).unwrap();
    let decay = |w: f64| {
        let s: f64 = smooth_model.even_part(w)
            + power_laws
                .iter()
                .map(|&(a, n)| a / w.powf(n))
                .sum::<f64>();
        s / (w * w)
    };
    let mut upper = w_hi;
    for _ in 0..40 {
        let tail = p0 / (2.0 * PI) * non_oscillatory_tail(&smooth_model, &power_laws, upper);
        let total = core + tail + low_remainder;
        let g = decay(upper);
        let osc: f64 = lags
            .iter()
            .map(|&(lag, coef)| 2.0 * coef.abs() * 2.0 * g / lag)
            .sum::<f64>()
            / (2.0 * PI);
        if osc <= QUAD_RTOL * total.abs() || osc == 0.0 {
            return total;
        }
        let next = upper * 2.0;
        let edges = panel_edges(upper, next, &breaks, max_panel);
        core += integrate_panels_floor(&integrand, &edges, QUAD_RTOL, 1e-2 * QUAD_RTOL * total.abs());
        upper = next;
    }
    core + p0 / (2.0 * PI) * non_oscillatory_tail(&smooth_model, &power_laws, upper) + low_remainder
}

/// ∫_W^∞ S_even(ω)/ω² dω; smooth parts via ω = W/x, power laws analytically.
fn non_oscillatory_tail(smooth: &SpectrumModel, power_laws: &[(f64, f64)], w: f64) -> f64 {
    let mut total: f64 = power_laws
        .iter()
        .map(|&(a, n)| a / ((n + 1.0) * w.powf(n + 1.0)))
        .sum();
    if !smooth.components().is_empty() {
        let f = |x: f64| smooth.even_part(w / x);
        let edges = panel_edges(0.0, 1.0, &[1e-3, 1e-2, 0.1, 0.5], 0.1);
        total += integrate_panels(&f, &edges, QUAD_RTOL) / w;
    }
    total
}

/// χ(t) from the lag identity and per-component free-evolution attenuations.
pub fn attenuation_lagged(model: &SpectrumModel, sequence: &PulseSequence, t: f64) -> Result<f64> {
    check_integrable(model, sequence)?;
    if !(t >= 0.0) {
        return Err(FtnsError::Domain(format!("time must be >= 0, got {t}")));
    }
    if t == 0.0 {
        return Ok(0.0);
    }
    let lags = match sequence {
        PulseSequence::Fid => vec![(t, -1.0)],
        _ => sequence.switching(t).merged_lags(),
    };
    let mut chi = 0.0;
    for c in model.components() {
        if let SpectrumComponent::Constant { c } = *c {
            chi += c * t / 2.0;
            continue;
        }
        let copies = model.copies(c);
        chi -= lags
            .iter()
            .map(|&(lag, coef)| coef * free_attenuation(c, copies, lag))
            .sum::<f64>();
    }
    Ok(chi)
}

/// (e^{−x} − 1 + x)/x², entire in x.
fn phi2(x: Complex64) -> Complex64 {
    if x.norm() < 0.1 {
        let mut term = Complex64::new(0.5, 0.0);
        let mut sum = term;
        for k in 1..16 {
            term *= -x / (k as f64 + 2.0);
            sum += term;
        }
        sum
    } else {
        ((-x).exp() - 1.0 + x) / (x * x)
    }
}

/// g(τ) = ∫₀^τ (τ−u) c(u) du for one component (regularized for 1/f).
fn free_attenuation(c: &SpectrumComponent, copies: f64, tau: f64) -> f64 {
    match *c {
        SpectrumComponent::Lorentzian { s0, d, .. } => {
            let h = c.hwhm().unwrap();
            let k = copies * 0.5 * s0 * h;
            let z = Complex64::new(h, d);
            k * tau * tau * phi2(z * tau).re
        }
        SpectrumComponent::Gaussian { a, sigma, mu } => {
            if mu == 0.0 {
                gaussian_fid_chi(a, sigma, tau)
            } else {
                copies * offset_gaussian_fid(a, sigma, mu, tau)
            }
        }
        SpectrumComponent::OneOverF { a_coef, n } => one_over_f_lag(a_coef, n, tau),
        SpectrumComponent::Constant { c } => c * tau / 2.0,
    }
}

fn offset_gaussian_fid(a: f64, sigma: f64, mu: f64, tau: f64) -> f64 {
    let amp = a * sigma / (2.0 * PI.sqrt());
    let corr = move |u: f64| amp * (-(sigma * u).powi(2) / 4.0).exp() * (mu * u).cos();
    // e^{−σ²u²/4} < e^{−40} beyond u_cut
    let u_cut = 160f64.sqrt() / sigma;
    let width = 0.5 * (PI / mu.abs()).min(2.0 / sigma);
    if tau <= u_cut {
        let f = |u: f64| (tau - u) * corr(u);
        integrate_panels(&f, &panel_edges(0.0, tau, &[], width), 1e-14)
    } else {
        let edges = panel_edges(0.0, u_cut, &[], width);
        let m0 = integrate_panels(&corr, &edges, 1e-14);
        let m1 = integrate_panels(&|u: f64| u * corr(u), &edges, 1e-14);
        tau * m0 - m1
    }
}

/// χ(t) by the chosen route.
pub fn attenuation_with(
    model: &SpectrumModel,
    sequence: &PulseSequence,
    t: f64,
    route: Route,
) -> Result<f64> {
    match route {
        Route::Quadrature => attenuation(model, sequence, t),
        Route::Lagged => attenuation_lagged(model, sequence, t),
        Route::Auto => match closed_form_chi(model, sequence, t) {
            Some(v) => Ok(v),
            None => attenuation_lagged(model, sequence, t),
        },
    }
}

pub fn simulate_trace(
    model: &SpectrumModel,
    sequence: &PulseSequence,
    plan: &MeasurementPlan,
) -> Result<CoherenceTrace> {
    simulate_trace_with(model, sequence, plan, Route::Auto)
}

/// Samples C = e^{−χ} on the plan grid, applies the floor cut, range-scaled
/// Gaussian noise and the τ_min mask.
pub fn simulate_trace_with(
    model: &SpectrumModel,
    sequence: &PulseSequence,
    plan: &MeasurementPlan,
    route: Route,
) -> Result<CoherenceTrace> {
    plan.validate()?;
    let t = plan.grid();
    let chi: Vec<f64> = t
        .par_iter()
        .map(|&tk| attenuation_with(model, sequence, tk, route))
        .collect::<Result<_>>()?;
    let ideal: Vec<f64> = chi.iter().map(|x| (-x).exp()).collect();

    let retained = if plan.coherence_floor > 0.0 {
        ideal
            .iter()
            .rposition(|&c| c > plan.coherence_floor)
            .map_or(1, |k| k + 1)
    } else {
        ideal.len()
    };

    let mut c = ideal.clone();
    if plan.noise_sigma > 0.0 {
        let kept = &ideal[..retained];
        let hi = kept.iter().cloned().fold(f64::MIN, f64::max);
        let lo = kept.iter().cloned().fold(f64::MAX, f64::min);
        let scale = plan.noise_sigma * (hi - lo);
        if scale > 0.0 {
            let normal = Normal::new(0.0, scale).map_err(|e| FtnsError::Numeric(e.to_string()))?;
            let mut rng = ChaCha8Rng::seed_from_u64(plan.seed);
            for v in c.iter_mut().take(retained).skip(1) {
                *v += normal.sample(&mut rng);
            }
        }
    }
    for v in c.iter_mut() {
        *v = v.clamp(1e-12, 1.0);
    }

    let mask = t
        .iter()
        .enumerate()
        .map(|(k, &tk)| {
            if k >= retained {
                PointMask::TruncatedByFloor
            } else if tk > 0.0 && tk < plan.tau_min {
                PointMask::WithheldBelowTauMin
            } else {
                PointMask::Measured
            }
        })
        .collect();
    CoherenceTrace::new(t, c, mask, *plan, *sequence)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum T2Definition {
    /// Inverse of the long-time slope of χ.
    Slope,
    /// First time C falls to 1/e.
    EFolding,
}

pub fn t2_from_trace(trace: &CoherenceTrace, definition: T2Definition) -> Result<f64> {
    let n = trace.retained_len();
    match definition {
        T2Definition::EFolding => {
            let target = (-1.0f64).exp();
            for k in 1..n {
                if trace.c[k] <= target {
                    let (c0, c1) = (trace.c[k - 1], trace.c[k]);
                    let frac = (c0 - target) / (c0 - c1);
                    return Ok(trace.t[k - 1] + frac * (trace.t[k] - trace.t[k - 1]));
                }
            }
            Err(FtnsError::Numeric(
                "coherence never falls below 1/e within the trace".into(),
            ))
        }
        T2Definition::Slope => {
            let start = n - (n / 10).max(3).min(n);
            let xs = &trace.t[start..n];
            let ys: Vec<f64> = trace.c[start..n].iter().map(|c| -c.ln()).collect();
            let (slope, _) = crate::fit::line_fit(xs, &ys);
            if slope > 0.0 {
                Ok(1.0 / slope)
            } else {
                Err(FtnsError::Numeric(format!(
                    "attenuation tail slope {slope} is not positive"
                )))
            }
        }
    }
}
