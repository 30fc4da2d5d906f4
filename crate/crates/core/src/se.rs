//! Spin-echo inversion.
//!
//! The echo transform yields M(ω) = S(ω) − S(ω/2)/2, which is unfolded into S
//! by a recursion over the frequency grid. A 1/f background, whose echo
//! attenuation grows as t^(n+1), is fitted and removed first when present.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, FtnsError, Result};
use crate::fid::{finish, fourier_to_spectrum_with, log_and_fill, second_derivative, PrepOptions};
use crate::fit::{line_fit, lstsq, rss};
use crate::prep::AttenuationTrace;
use crate::reconstruction::{Method, ReconstructedSpectrum};
use crate::sequence::PulseSequence;
use crate::special::amplitude_from_alpha;
use crate::trace::CoherenceTrace;

/// M(ω_k) at ω_k = k·d_omega.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MArray {
    pub d_omega: f64,
    pub m: Vec<f64>,
}

fn require_echo(trace: &CoherenceTrace) -> Result<()> {
    if trace.sequence != PulseSequence::SpinEcho {
        return Err(invalid(format!(
            "spin-echo reconstruction needs a spin_echo trace, got {}",
            trace.sequence.label()
        )));
    }
    Ok(())
}

/// M from a prepared (mirrored) echo attenuation trace.
pub fn m_from_attenuation(att: &AttenuationTrace, prep: &PrepOptions) -> Result<MArray> {
    let dd = second_derivative(att)?;
    let tr = fourier_to_spectrum_with(&dd, prep.pad_factor, prep.transform)?;
    // The echo transform at ω equals 2M(2ω).
    let mut m: Vec<f64> = tr.s.iter().map(|v| v / 2.0).collect();
    if m.len() >= 4 {
        m[0] = 3.0 * m[1] - 3.0 * m[2] + m[3];
    }
    Ok(MArray {
        d_omega: 2.0 * tr.d_omega,
        m,
    })
}

pub fn extract_m(trace: &CoherenceTrace, prep: &PrepOptions) -> Result<MArray> {
    require_echo(trace)?;
    let att = log_and_fill(trace, prep)?;
    let att = finish(&att, prep, trace.plan.noise_sigma > 0.0)?;
    m_from_attenuation(&att, prep)
}

/// Unfolds S from M: S₀ = 2M₀, S₁ = (4/3)(M₁ + S₀/4), S_{2n} = M_{2n} + S_n/2,
/// S_{2n+1} = M_{2n+1} + (S_n + S_{n+1})/4, the half-grid value taken as the
/// mean of its neighbours.
pub fn recursion_s_from_m(m: &MArray) -> ReconstructedSpectrum {
    let n = m.m.len();
    let mut s = vec![0.0; n];
    if n > 0 {
        s[0] = 2.0 * m.m[0];
    }
    if n > 1 {
        s[1] = 4.0 / 3.0 * (m.m[1] + s[0] / 4.0);
    }
    for j in 2..n {
        let h = j / 2;
        s[j] = if j % 2 == 0 {
            m.m[j] + s[h] / 2.0
        } else {
            m.m[j] + (s[h] + s[h + 1]) / 4.0
        };
    }
    let omega: Vec<f64> = (0..n).map(|k| k as f64 * m.d_omega).collect();
    let omega_max = omega.last().copied().unwrap_or(0.0);
    let mut out = ReconstructedSpectrum {
        omega,
        s,
        method: Method::SeFtns,
        d_omega: m.d_omega,
        omega_max,
        t_padded: None,
        extra: Default::default(),
    };
    out.note(
        "self_consistency_residual",
        serde_json::json!(self_consistency_residual(m, &out.s)),
    );
    out
}

/// M recomputed from S with the same neighbour averaging.
pub fn m_from_s(s: &[f64]) -> Vec<f64> {
    (0..s.len())
        .map(|j| {
            let h = j / 2;
            if j % 2 == 0 {
                s[j] - s[h] / 2.0
            } else {
                s[j] - (s[h] + s[h + 1]) / 4.0
            }
        })
        .collect()
}

/// max |M(S) − M| / max |M|.
pub fn self_consistency_residual(m: &MArray, s: &[f64]) -> f64 {
    let back = m_from_s(s);
    let scale = m.m.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(f64::MIN_POSITIVE);
    back.iter()
        .zip(&m.m)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
        / scale
}

pub fn reconstruct_se(trace: &CoherenceTrace, prep: &PrepOptions) -> Result<ReconstructedSpectrum> {
    let m = extract_m(trace, prep)?;
    let mut s = recursion_s_from_m(&m);
    s.t_padded = Some(2.0 * std::f64::consts::PI / (m.d_omega / 2.0));
    Ok(s)
}

/// Fit χ ≈ α t^γ + β t + δ and the 1/f spectrum A/|ω|^n it implies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OneOverFFit {
    pub alpha: f64,
    pub beta: f64,
    pub delta: f64,
    pub gamma: f64,
    #[serde(rename = "A")]
    pub a_coef: f64,
    pub n: f64,
    pub rss: f64,
}

const GAMMA_LO: f64 = 1.0;
const GAMMA_HI: f64 = 4.0;

fn power_columns(t: &[f64], gamma: f64) -> Vec<Vec<f64>> {
    vec![
        t.iter().map(|x| x.powf(gamma)).collect(),
        t.to_vec(),
        vec![1.0; t.len()],
    ]
}

fn profile(t: &[f64], chi: &[f64], gamma: f64) -> Option<(Vec<f64>, f64)> {
    let cols = power_columns(t, gamma);
    let c = lstsq(&cols, chi)?;
    let r = rss(&cols, &c, chi);
    Some((c, r))
}

/// Nonlinear least squares by variable projection: for each γ the model is
/// linear in (α, β, δ), so only the residual profile in γ is searched, first
/// on a grid over (1, 4) and then by golden section. `Ok(None)` means the
/// trace shows no 1/f content (γ pinned at a bound or α ≤ 0).
pub fn fit_one_over_f(att: &AttenuationTrace) -> Result<Option<OneOverFFit>> {
    let (t, chi) = att.positive_half();
    if t.len() < 5 {
        return Err(invalid("1/f fit needs at least 5 samples"));
    }
    let steps = 300;
    let mut best: Option<(f64, f64)> = None;
    for i in 1..steps {
        let g = GAMMA_LO + (GAMMA_HI - GAMMA_LO) * i as f64 / steps as f64;
        if let Some((_, r)) = profile(t, chi, g) {
            if best.is_none_or(|b| r < b.1) {
                best = Some((g, r));
            }
        }
    }
    let (g0, _) = best.ok_or_else(|| FtnsError::Numeric("1/f fit: every trial exponent was rank deficient".into()))?;
    let h = (GAMMA_HI - GAMMA_LO) / steps as f64;
    let (mut a, mut b) = ((g0 - h).max(GAMMA_LO), (g0 + h).min(GAMMA_HI));
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    let obj = |g: f64| profile(t, chi, g).map_or(f64::INFINITY, |p| p.1);
    let mut x1 = b - phi * (b - a);
    let mut x2 = a + phi * (b - a);
    let (mut f1, mut f2) = (obj(x1), obj(x2));
    while b - a > 1e-11 {
        if f1 < f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - phi * (b - a);
            f1 = obj(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + phi * (b - a);
            f2 = obj(x2);
        }
    }
    let gamma = 0.5 * (a + b);
    let (c, r) = profile(t, chi, gamma).ok_or_else(|| {
        FtnsError::Numeric(format!("1/f fit failed to converge near gamma = {gamma}"))
    })?;
    if !r.is_finite() {
        return Err(FtnsError::Numeric(format!("1/f fit residual is {r}")));
    }
    let (alpha, beta, delta) = (c[0], c[1], c[2]);
    let t_end = *t.last().unwrap();
    let chi_end = chi.last().unwrap().abs().max(f64::MIN_POSITIVE);
    let at_bound = gamma - GAMMA_LO < 2.0 * h || GAMMA_HI - gamma < 2.0 * h;
    if at_bound || alpha <= 0.0 || alpha * t_end.powf(gamma) < 1e-6 * chi_end {
        return Ok(None);
    }
    let n = gamma - 1.0;
    Ok(Some(OneOverFFit {
        alpha,
        beta,
        delta,
        gamma,
        a_coef: amplitude_from_alpha(alpha, n),
        n,
        rss: r,
    }))
}

/// Removes the fitted 1/f part, reconstructs the remainder by the echo
/// recursion, and adds A/ω^n back on the output grid. The ω = 0 entry is
/// +∞ and flagged in the metadata.
pub fn reconstruct_with_one_over_f(
    trace: &CoherenceTrace,
    prep: &PrepOptions,
) -> Result<ReconstructedSpectrum> {
    require_echo(trace)?;
    let att = log_and_fill(trace, prep)?;
    let Some(fit) = fit_one_over_f(&att)? else {
        let mut s = reconstruct_se(trace, prep)?;
        s.note("one_over_f", serde_json::Value::Null);
        return Ok(s);
    };
    let mut residual = att.clone();
    for (x, t) in residual.chi.iter_mut().zip(&att.t) {
        *x -= fit.alpha * t.abs().powf(fit.gamma);
    }
    let residual = finish(&residual, prep, trace.plan.noise_sigma > 0.0)?;
    let m = m_from_attenuation(&residual, prep)?;
    let mut s = recursion_s_from_m(&m);
    for (v, w) in s.s.iter_mut().zip(&s.omega) {
        *v = if *w == 0.0 {
            f64::INFINITY
        } else {
            *v + fit.a_coef / w.powf(fit.n)
        };
    }
    s.note("one_over_f", serde_json::to_value(fit).unwrap());
    s.note("divergent_at_zero", serde_json::Value::Bool(true));
    Ok(s)
}

/// Long-time behaviour of an attenuation record.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "regime", rename_all = "snake_case")]
pub enum TailRegime {
    /// χ grows linearly; `residual` is the worst tail-fit residual over χ(T).
    Linear { residual: f64 },
    /// χ ∝ t^exponent with coefficient of determination `r2` on log-log axes.
    PowerLaw { exponent: f64, r2: f64 },
    Undetermined { residual: f64, r2: f64 },
}

pub fn tail_linearity_residual(t: &[f64], chi: &[f64]) -> f64 {
    let n = t.len();
    let start = n / 2;
    let (slope, b) = line_fit(&t[start..], &chi[start..]);
    let worst = (start..n)
        .map(|k| (chi[k] - slope * t[k] - b).abs())
        .fold(0.0, f64::max);
    worst / chi[n - 1].abs().max(f64::MIN_POSITIVE)
}

pub fn tail_regime(att: &AttenuationTrace) -> TailRegime {
    let (t, chi) = att.positive_half();
    let residual = tail_linearity_residual(t, chi);
    if residual < 1e-3 {
        return TailRegime::Linear { residual };
    }
    let t_end = *t.last().unwrap();
    let pts: Vec<(f64, f64)> = t
        .iter()
        .zip(chi)
        .filter(|(ti, ci)| **ti >= 0.1 * t_end && **ci > 0.0)
        .map(|(ti, ci)| (ti.ln(), ci.ln()))
        .collect();
    let xs: Vec<f64> = pts.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = pts.iter().map(|p| p.1).collect();
    let (slope, b) = line_fit(&xs, &ys);
    let mean = ys.iter().sum::<f64>() / ys.len() as f64;
    let ss_tot: f64 = ys.iter().map(|y| (y - mean).powi(2)).sum();
    let ss_res: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - slope * x - b).powi(2)).sum();
    let r2 = 1.0 - ss_res / ss_tot;
    if r2 > 0.999 {
        TailRegime::PowerLaw { exponent: slope, r2 }
    } else {
        TailRegime::Undetermined { residual, r2 }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prep::ChiSource;

    #[test]
    fn flat_spectrum_recursion_is_exact() {
        let c = 0.7;
        let m = MArray {
            d_omega: 0.1,
            m: vec![c / 2.0; 64],
        };
        let s = recursion_s_from_m(&m);
        for v in &s.s {
            assert!((v - c).abs() < 1e-14);
        }
    }

    #[test]
    fn zero_m_gives_zero_s() {
        let s = recursion_s_from_m(&MArray {
            d_omega: 1.0,
            m: vec![0.0; 10],
        });
        assert!(s.s.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn pure_power_law_fit() {
        let t: Vec<f64> = (0..400).map(|k| k as f64 * 0.01).collect();
        let chi: Vec<f64> = t.iter().map(|x| x.powi(3) / 24.0).collect();
        let att = AttenuationTrace::new(t.clone(), chi, vec![ChiSource::Measured; 400], 0.01);
        let fit = fit_one_over_f(&att).unwrap().unwrap();
        assert!((fit.gamma - 3.0).abs() < 1e-6, "{fit:?}");
        assert!((fit.alpha - 1.0 / 24.0).abs() < 1e-7);
        assert!((fit.a_coef - 1.0).abs() < 1e-5 && (fit.n - 2.0).abs() < 1e-6);
        assert!(fit.beta.abs() < 1e-7 && fit.delta.abs() < 1e-7);

        let line: Vec<f64> = t.clone();
        let att = AttenuationTrace::new(t, line, vec![ChiSource::Measured; 400], 0.01);
        assert!(fit_one_over_f(&att).unwrap().is_none());
    }
}
