//! Parametric noise spectra S(ω) built from Lorentzian, Gaussian, 1/f and flat components.
//!
//! Frequencies are angular. A model is a plain sum of components; with
//! `symmetrize` set, every off-center component also contributes its mirror
//! image about ω = 0 at full amplitude.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, FtnsError, Result};
use crate::sequence::PulseSequence;
use crate::special::{erf, se_power_law_coefficient};

/// Denominator convention of a Lorentzian: which multiple of (ω−d)/ω_c is squared.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum WidthForm {
    /// s0 / (1 + (8(ω−d)/ω_c)²); half width ω_c/8.
    #[serde(rename = "fig1")]
    Eighth,
    /// s0 / (1 + 8·(8(ω−d)/ω_c)²); half width ω_c/(8√8).
    #[serde(rename = "fig2b", alias = "fig5")]
    EighthNarrow,
    /// s0 / (1 + ((ω−d)/ω_c)²); half width ω_c.
    #[serde(rename = "plain_hwhm")]
    PlainHwhm,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SpectrumComponent {
    Lorentzian {
        s0: f64,
        omega_c: f64,
        #[serde(default)]
        d: f64,
        width_form: WidthForm,
    },
    Gaussian {
        #[serde(rename = "A")]
        a: f64,
        sigma: f64,
        #[serde(default)]
        mu: f64,
    },
    OneOverF {
        #[serde(rename = "A_coef")]
        a_coef: f64,
        n: f64,
    },
    Constant {
        c: f64,
    },
}

impl SpectrumComponent {
    pub fn validate(&self) -> Result<()> {
        let finite = |name: &str, v: f64| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(invalid(format!("{name} must be finite, got {v}")))
            }
        };
        match *self {
            SpectrumComponent::Lorentzian { s0, omega_c, d, .. } => {
                finite("s0", s0)?;
                finite("omega_c", omega_c)?;
                finite("d", d)?;
                if s0 < 0.0 {
                    return Err(invalid(format!("lorentzian s0 must be >= 0, got {s0}")));
                }
                if omega_c <= 0.0 {
                    return Err(invalid(format!("lorentzian omega_c must be > 0, got {omega_c}")));
                }
            }
            SpectrumComponent::Gaussian { a, sigma, mu } => {
                finite("A", a)?;
                finite("sigma", sigma)?;
                finite("mu", mu)?;
                if a < 0.0 {
                    return Err(invalid(format!("gaussian A must be >= 0, got {a}")));
                }
                if sigma <= 0.0 {
                    return Err(invalid(format!("gaussian sigma must be > 0, got {sigma}")));
                }
            }
            SpectrumComponent::OneOverF { a_coef, n } => {
                finite("A_coef", a_coef)?;
                finite("n", n)?;
                if a_coef < 0.0 {
                    return Err(invalid(format!("one_over_f A_coef must be >= 0, got {a_coef}")));
                }
                if !(n > 0.0 && n < 3.0) {
                    return Err(invalid(format!("one_over_f exponent must satisfy 0 < n < 3, got {n}")));
                }
            }
            SpectrumComponent::Constant { c } => {
                finite("c", c)?;
                if c < 0.0 {
                    return Err(invalid(format!("constant c must be >= 0, got {c}")));
                }
            }
        }
        Ok(())
    }

    /// Half width at half maximum for Lorentzians.
    pub fn hwhm(&self) -> Option<f64> {
        match *self {
            SpectrumComponent::Lorentzian {
                omega_c, width_form, ..
            } => Some(match width_form {
                WidthForm::Eighth => omega_c / 8.0,
                WidthForm::EighthNarrow => omega_c / (8.0 * 8f64.sqrt()),
                WidthForm::PlainHwhm => omega_c,
            }),
            _ => None,
        }
    }

    /// Peak position, zero for components without one.
    pub fn center(&self) -> f64 {
        match *self {
            SpectrumComponent::Lorentzian { d, .. } => d,
            SpectrumComponent::Gaussian { mu, .. } => mu,
            _ => 0.0,
        }
    }

    /// Characteristic width used for quadrature breakpoints.
    pub fn width(&self) -> f64 {
        match *self {
            SpectrumComponent::Lorentzian { .. } => self.hwhm().unwrap(),
            SpectrumComponent::Gaussian { sigma, .. } => sigma,
            _ => 1.0,
        }
    }

    /// Value of the component alone, without any mirror copy.
    pub fn value(&self, omega: f64) -> f64 {
        match *self {
            SpectrumComponent::Lorentzian { s0, d, .. } => {
                let x = (omega - d) / self.hwhm().unwrap();
                s0 / (1.0 + x * x)
            }
            SpectrumComponent::Gaussian { a, sigma, mu } => {
                let x = (omega - mu) / sigma;
                a * (-x * x).exp()
            }
            SpectrumComponent::OneOverF { a_coef, n } => a_coef / omega.abs().powf(n),
            SpectrumComponent::Constant { c } => c,
        }
    }

    pub fn is_off_center(&self) -> bool {
        self.center() != 0.0
    }

    /// Inverse transform c(u) = (1/2π)∫ S cos(ωu) dω of the component alone.
    /// Defined for Lorentzians and Gaussians.
    pub fn correlation(&self, u: f64) -> Option<f64> {
        match *self {
            SpectrumComponent::Lorentzian { s0, d, .. } => {
                let h = self.hwhm().unwrap();
                Some(0.5 * s0 * h * (-h * u.abs()).exp() * (d * u).cos())
            }
            SpectrumComponent::Gaussian { a, sigma, mu } => Some(
                a * sigma / (2.0 * PI.sqrt()) * (-(sigma * u).powi(2) / 4.0).exp() * (mu * u).cos(),
            ),
            _ => None,
        }
    }

    /// ∫ ω^k S dω over the real line for k ∈ {0, 2, 4}; infinite when it diverges.
    pub fn moment(&self, k: u32) -> f64 {
        match *self {
            SpectrumComponent::Lorentzian { s0, .. } => {
                if k == 0 {
                    PI * s0 * self.hwhm().unwrap()
                } else if s0 == 0.0 {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
            SpectrumComponent::Gaussian { a, sigma, mu } => {
                let base = a * sigma * PI.sqrt();
                let s2 = sigma * sigma;
                match k {
                    0 => base,
                    2 => base * (mu * mu + s2 / 2.0),
                    4 => base * (mu.powi(4) + 3.0 * mu * mu * s2 + 0.75 * s2 * s2),
                    _ => f64::NAN,
                }
            }
            SpectrumComponent::OneOverF { a_coef, .. } | SpectrumComponent::Constant { c: a_coef } => {
                if a_coef == 0.0 {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
        }
    }
}

/// Sum of spectral components, optionally mirrored to enforce S(−ω) = S(ω).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawModel")]
pub struct SpectrumModel {
    components: Vec<SpectrumComponent>,
    #[serde(default)]
    symmetrize: bool,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModel {
    components: Vec<SpectrumComponent>,
    #[serde(default)]
    symmetrize: bool,
}

impl TryFrom<RawModel> for SpectrumModel {
    type Error = FtnsError;
    fn try_from(raw: RawModel) -> Result<Self> {
        SpectrumModel::new(raw.components, raw.symmetrize)
    }
}

impl SpectrumModel {
    pub fn new(components: Vec<SpectrumComponent>, symmetrize: bool) -> Result<Self> {
        for c in &components {
            c.validate()?;
        }
        Ok(Self {
            components,
            symmetrize,
        })
    }

    pub fn components(&self) -> &[SpectrumComponent] {
        &self.components
    }

    pub fn symmetrize(&self) -> bool {
        self.symmetrize
    }

    pub fn has_one_over_f(&self) -> bool {
        self.components
            .iter()
            .any(|c| matches!(c, SpectrumComponent::OneOverF { .. }))
    }

    /// Multiplicity of each component's contribution: 2 when it is mirrored.
    pub(crate) fn copies(&self, c: &SpectrumComponent) -> f64 {
        if self.symmetrize && c.is_off_center() {
            2.0
        } else {
            1.0
        }
    }

    pub fn evaluate(&self, omega: f64) -> Result<f64> {
        if !omega.is_finite() {
            return Err(FtnsError::Domain(format!("frequency must be finite, got {omega}")));
        }
        if omega == 0.0 && self.has_one_over_f() {
            return Err(FtnsError::Domain("1/f component diverges at omega = 0".into()));
        }
        Ok(self.value_unchecked(omega))
    }

    pub(crate) fn value_unchecked(&self, omega: f64) -> f64 {
        let mut s = 0.0;
        for c in &self.components {
            if self.symmetrize && c.is_off_center() {
                // Fixed summation order keeps S(ω) and S(−ω) bitwise equal.
                let w = omega.abs();
                s += c.value(w) + c.value(-w);
            } else {
                s += c.value(omega);
            }
        }
        s
    }

    /// (S(ω) + S(−ω))/2, the part of S that enters any attenuation.
    pub fn even_part(&self, omega: f64) -> f64 {
        0.5 * (self.value_unchecked(omega) + self.value_unchecked(-omega))
    }

    /// c(u) = (1/2π)∫ S(ω) cos(ωu) dω, for models without 1/f or flat parts.
    pub fn correlation(&self, u: f64) -> Option<f64> {
        let mut s = 0.0;
        for c in &self.components {
            s += self.copies(c) * c.correlation(u)?;
        }
        Some(s)
    }

    /// ∫ ω^k S dω for k ∈ {0, 2, 4}.
    pub fn moment(&self, k: u32) -> f64 {
        self.components
            .iter()
            .map(|c| self.copies(c) * c.moment(k))
            .sum()
    }

    /// Long-time slope of the FID attenuation, S(0)/2. Errors for 1/f content.
    pub fn fid_asymptotic_slope(&self) -> Result<f64> {
        if self.has_one_over_f() {
            return Err(FtnsError::Divergent(
                "1/f spectra have no linear FID asymptote".into(),
            ));
        }
        Ok(self.even_part(0.0) / 2.0)
    }

    /// Largest value over ω ≥ 0 estimated on component centers.
    pub fn peak_estimate(&self) -> f64 {
        self.components
            .iter()
            .filter(|c| !matches!(c, SpectrumComponent::OneOverF { .. }))
            .map(|c| self.even_part(c.center().abs()))
            .fold(0.0, f64::max)
    }
}

/// Exact attenuation for the (model, sequence) pairs with a known closed form:
/// one centered Gaussian under FID, a symmetric Lorentzian pair under FID, and
/// pure 1/f noise under a spin echo. `None` for everything else.
pub fn closed_form_chi(model: &SpectrumModel, sequence: &PulseSequence, t: f64) -> Option<f64> {
    let comps = model.components();
    match sequence {
        PulseSequence::Fid => {
            if let [SpectrumComponent::Gaussian { a, sigma, mu }] = comps {
                if *mu == 0.0 {
                    return Some(gaussian_fid_chi(*a, *sigma, t));
                }
            }
            lorentzian_pair(model).map(|(a, wc, d)| lorentzian_pair_fid_chi(a, wc, d, t))
        }
        PulseSequence::SpinEcho => {
            if let [SpectrumComponent::OneOverF { a_coef, n }] = comps {
                return Some(a_coef * se_power_law_coefficient(*n) * t.powf(n + 1.0));
            }
            None
        }
        PulseSequence::Cpmg { .. } => None,
    }
}

/// (A/σ)[(tσ/2)·erf(tσ/2) + (e^{−t²σ²/4} − 1)/√π] for S = A e^{−(ω/σ)²}.
pub fn gaussian_fid_chi(a: f64, sigma: f64, t: f64) -> f64 {
    let x = t * sigma / 2.0;
    a / sigma * (x * erf(x) + ((-x * x).exp() - 1.0) / PI.sqrt())
}

/// FID attenuation of A/(1+((ω−d)/ω_c)²) + A/(1+((ω+d)/ω_c)²).
pub fn lorentzian_pair_fid_chi(a: f64, wc: f64, d: f64, t: f64) -> f64 {
    let q = d * d + wc * wc;
    a * wc * (-t * wc).exp() * ((wc * wc - d * d) * (d * t).cos() - 2.0 * d * wc * (d * t).sin())
        / (q * q)
        + a * wc * wc * t / q
        - a * wc * (wc * wc - d * d) / (q * q)
}

/// Recognizes a model that is a symmetric Lorentzian pair; returns (A, ω_c, d) of the pair form.
fn lorentzian_pair(model: &SpectrumModel) -> Option<(f64, f64, f64)> {
    let comps = model.components();
    match comps {
        [c @ SpectrumComponent::Lorentzian { s0, d, .. }] => {
            let h = c.hwhm()?;
            if *d == 0.0 {
                Some((s0 / 2.0, h, 0.0))
            } else if model.symmetrize() {
                Some((*s0, h, d.abs()))
            } else {
                None
            }
        }
        [a @ SpectrumComponent::Lorentzian { s0: s1, d: d1, .. }, b @ SpectrumComponent::Lorentzian { s0: s2, d: d2, .. }] =>
        {
            let (h1, h2) = (a.hwhm()?, b.hwhm()?);
            let same = s1 == s2 && h1 == h2 && *d1 == -*d2 && *d1 != 0.0;
            if same && !model.symmetrize() {
                Some((*s1, h1, d1.abs()))
            } else {
                None
            }
        }
        _ => None,
    }
}

/// Spectra used throughout the examples and tests.
pub mod presets {
    use super::*;

    /// Single centered Lorentzian, s0 = 2, ω_c = 10.186 in the 8ω/ω_c form (T2 = 1).
    pub fn lorentzian_single() -> SpectrumModel {
        SpectrumModel::new(
            vec![SpectrumComponent::Lorentzian {
                s0: 2.0,
                omega_c: 10.186,
                d: 0.0,
                width_form: WidthForm::Eighth,
            }],
            false,
        )
        .unwrap()
    }

    /// Four-Gaussian mixture with narrow satellite at 1.272.
    pub fn gaussian_mixture() -> SpectrumModel {
        let g = |a, sigma, mu| SpectrumComponent::Gaussian { a, sigma, mu };
        SpectrumModel::new(
            vec![
                g(1.998, 0.9537, 0.0),
                g(0.3995, 0.1272, 1.272),
                g(0.7990, 0.9537, 4.769),
                g(0.9988, 0.9537, 2.543),
            ],
            true,
        )
        .unwrap()
    }

    /// Central Lorentzian with a side pair at ±12.12.
    pub fn double_lorentzian() -> SpectrumModel {
        SpectrumModel::new(
            vec![
                SpectrumComponent::Lorentzian {
                    s0: 1.939,
                    omega_c: 19.39,
                    d: 0.0,
                    width_form: WidthForm::Eighth,
                },
                SpectrumComponent::Lorentzian {
                    s0: 6.093,
                    omega_c: 19.39,
                    d: 12.12,
                    width_form: WidthForm::EighthNarrow,
                },
            ],
            true,
        )
        .unwrap()
    }

    /// Very narrow zero-frequency line plus three satellite pairs, for spin-echo reconstruction.
    pub fn echo_multiplet() -> SpectrumModel {
        let side = |s0, omega_c, d| SpectrumComponent::Lorentzian {
            s0,
            omega_c,
            d,
            width_form: WidthForm::EighthNarrow,
        };
        SpectrumModel::new(
            vec![
                SpectrumComponent::Lorentzian {
                    s0: 150.0 * PI,
                    omega_c: 0.02,
                    d: 0.0,
                    width_form: WidthForm::Eighth,
                },
                side(2.0 * PI, 6.0, 15.0 / 8.0),
                side(PI, 2.0, 20.0 / 8.0),
                side(2.0, 1.0, 10.0 / 8.0),
            ],
            true,
        )
        .unwrap()
    }

    /// 1/ω^2.5 background with a Lorentzian pair at ±12.5.
    pub fn one_over_f_with_peaks() -> SpectrumModel {
        SpectrumModel::new(
            vec![
                SpectrumComponent::OneOverF { a_coef: 1.0, n: 2.5 },
                SpectrumComponent::Lorentzian {
                    s0: 1.0,
                    omega_c: 1.5,
                    d: 12.5,
                    width_form: WidthForm::PlainHwhm,
                },
            ],
            true,
        )
        .unwrap()
    }
}
