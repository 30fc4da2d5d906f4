//! Álvarez-Suter dynamical-decoupling spectroscopy, used as the baseline.
//!
//! Under an even-n CPMG sequence of duration t the switching function is a
//! square wave of fundamental ω₀ = π/τ (τ = t/n), and in the many-pulse limit
//! χ(t) ≈ (t/2) Σ_k P_k S(kω₀) with P_k = 2|c_k|² the one-sided harmonic powers
//! of the switching function. The P_k sum to one.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, FtnsError, Result};
use crate::forward::{attenuation_with, Route};
use crate::reconstruction::{Method, ReconstructedSpectrum};
use crate::sequence::PulseSequence;
use crate::spectrum::SpectrumModel;

/// One-sided comb powers P_k = 2|c_k|² for k = 1..=k_c.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CombCoefficients {
    pub n_pulses: u32,
    pub k_c: u32,
    /// `a_sq[k - 1]` is the power at harmonic k.
    pub a_sq: Vec<f64>,
}

impl CombCoefficients {
    pub fn power(&self, k: u32) -> f64 {
        self.a_sq[k as usize - 1]
    }

    pub fn total(&self) -> f64 {
        self.a_sq.iter().sum()
    }
}

fn require_even(n_pulses: u32) -> Result<()> {
    if n_pulses < 2 || n_pulses % 2 == 1 {
        return Err(FtnsError::Unsupported(format!(
            "the comb baseline needs an even CPMG pulse count >= 2, got {n_pulses}"
        )));
    }
    Ok(())
}

/// Fourier-series powers of the CPMG switching function, integrated exactly
/// over its constant-sign segments. Harmonics whose power falls below 1e-14
/// (every even k) are set to zero.
pub fn comb_coefficients(n_pulses: u32, k_c: u32) -> Result<CombCoefficients> {
    require_even(n_pulses)?;
    if k_c == 0 {
        return Err(invalid("k_c must be >= 1"));
    }
    let seq = PulseSequence::Cpmg { n_pulses };
    let t = n_pulses as f64;
    let segments = seq.segments(t);
    let a_sq = (1..=k_c)
        .map(|k| {
            let w = k as f64 * PI;
            let c: Complex64 = segments
                .iter()
                .map(|&(a, b, sign)| {
                    let ea = Complex64::from_polar(1.0, -w * a);
                    let eb = Complex64::from_polar(1.0, -w * b);
                    sign * (ea - eb) / Complex64::new(0.0, w)
                })
                .sum::<Complex64>()
                / t;
            let p = 2.0 * c.norm_sqr();
            if p < 1e-14 {
                0.0
            } else {
                p
            }
        })
        .collect();
    Ok(CombCoefficients {
        n_pulses,
        k_c,
        a_sq,
    })
}

/// How the pulse delays τ are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Ladder {
    /// τ_m = τ_max/m for m = 1..=⌊τ_max/τ_min⌋. Every harmonic of every rung
    /// lands on the probe grid, so the system is upper triangular.
    #[default]
    Harmonic,
    /// `rungs` delays spaced geometrically in [τ_min, τ_max]; off-grid harmonics
    /// are interpolated linearly and the system is solved by truncated SVD.
    Geometric { rungs: usize },
}

fn default_k_c() -> u32 {
    41
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DdnsPlan {
    pub n_pulses: u32,
    #[serde(default = "default_k_c")]
    pub k_c: u32,
    pub tau_min: f64,
    pub tau_max: f64,
    #[serde(default)]
    pub ladder: Ladder,
    /// Add single-δ readings halfway between the ladder frequencies.
    #[serde(default)]
    pub densify: bool,
    /// Reject plans whose delays push C below this value; 0 disables the check.
    #[serde(default)]
    pub coherence_floor: f64,
}

impl DdnsPlan {
    pub fn new(n_pulses: u32, k_c: u32, tau_min: f64, tau_max: f64) -> Self {
        Self {
            n_pulses,
            k_c,
            tau_min,
            tau_max,
            ladder: Ladder::Harmonic,
            densify: false,
            coherence_floor: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        require_even(self.n_pulses)?;
        if self.k_c == 0 {
            return Err(invalid("k_c must be >= 1"));
        }
        if !(self.tau_min > 0.0 && self.tau_max > self.tau_min && self.tau_max.is_finite()) {
            return Err(invalid(format!(
                "need 0 < tau_min < tau_max, got {} and {}",
                self.tau_min, self.tau_max
            )));
        }
        if !(0.0..1.0).contains(&self.coherence_floor) {
            return Err(invalid("coherence_floor must lie in [0, 1)"));
        }
        if let Ladder::Geometric { rungs } = self.ladder {
            if rungs < 2 {
                return Err(invalid("a geometric ladder needs at least 2 rungs"));
            }
        }
        Ok(())
    }

    /// [π/τ_max, π/τ_min].
    pub fn band(&self) -> (f64, f64) {
        (PI / self.tau_max, PI / self.tau_min)
    }

    pub fn delays(&self) -> Vec<f64> {
        match self.ladder {
            Ladder::Harmonic => {
                let m = (self.tau_max / self.tau_min * (1.0 + 1e-12)).floor() as usize;
                (1..=m).map(|k| self.tau_max / k as f64).collect()
            }
            Ladder::Geometric { rungs } => {
                let r = self.tau_max / self.tau_min;
                (0..rungs)
                    .map(|i| self.tau_max * r.powf(-(i as f64) / (rungs - 1) as f64))
                    .collect()
            }
        }
    }

    /// Fundamental frequencies π/τ of the ladder, ascending.
    pub fn probe_frequencies(&self) -> Vec<f64> {
        match self.ladder {
            Ladder::Harmonic => {
                let w = PI / self.tau_max;
                (1..=self.delays().len()).map(|m| m as f64 * w).collect()
            }
            Ladder::Geometric { .. } => self.delays().iter().map(|t| PI / t).collect(),
        }
    }

    fn sequence(&self) -> PulseSequence {
        PulseSequence::Cpmg {
            n_pulses: self.n_pulses,
        }
    }

    fn in_band(&self, omega: f64) -> bool {
        let (lo, hi) = self.band();
        omega >= lo * (1.0 - 1e-12) && omega <= hi * (1.0 + 1e-12)
    }
}

/// Anything that can report χ for a sequence and total time.
pub trait CoherenceOracle: Sync {
    fn chi(&self, sequence: &PulseSequence, t: f64) -> Result<f64>;
}

impl CoherenceOracle for SpectrumModel {
    fn chi(&self, sequence: &PulseSequence, t: f64) -> Result<f64> {
        attenuation_with(self, sequence, t, Route::Auto)
    }
}

/// The comb approximation itself, used to synthesize exactly invertible data.
pub struct CombModel<F> {
    pub coefficients: CombCoefficients,
    pub spectrum: F,
}

impl<F: Fn(f64) -> f64 + Sync> CoherenceOracle for CombModel<F> {
    fn chi(&self, sequence: &PulseSequence, t: f64) -> Result<f64> {
        let n = sequence.n_pulses();
        if !matches!(sequence, PulseSequence::Cpmg { .. }) || n != self.coefficients.n_pulses {
            return Err(invalid(format!(
                "comb model built for cpmg{} cannot answer {}",
                self.coefficients.n_pulses,
                sequence.label()
            )));
        }
        let w0 = n as f64 * PI / t;
        let sum: f64 = self
            .coefficients
            .a_sq
            .iter()
            .enumerate()
            .map(|(i, p)| p * (self.spectrum)((i + 1) as f64 * w0))
            .sum();
        Ok(0.5 * t * sum)
    }
}

fn measure(oracle: &dyn CoherenceOracle, plan: &DdnsPlan, tau: f64) -> Result<f64> {
    let t = plan.n_pulses as f64 * tau;
    let chi = oracle.chi(&plan.sequence(), t)?;
    if plan.coherence_floor > 0.0 && (-chi).exp() < plan.coherence_floor {
        return Err(invalid(format!(
            "delay tau = {tau} gives C = {:.3e}, below the coherence floor {}",
            (-chi).exp(),
            plan.coherence_floor
        )));
    }
    Ok(chi)
}

/// Upper-triangular matrix stored by rows as (column, value) pairs.
struct Triangular {
    rows: Vec<Vec<(usize, f64)>>,
}

impl Triangular {
    fn diag(&self, i: usize) -> f64 {
        self.rows[i].iter().find(|e| e.0 == i).map_or(0.0, |e| e.1)
    }

    fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = b.len();
        let mut x = vec![0.0; n];
        for i in (0..n).rev() {
            let off: f64 = self.rows[i].iter().filter(|e| e.0 > i).map(|e| e.1 * x[e.0]).sum();
            x[i] = (b[i] - off) / self.diag(i);
        }
        x
    }

    fn solve_transpose(&self, b: &[f64]) -> Vec<f64> {
        let n = b.len();
        let mut r = b.to_vec();
        let mut y = vec![0.0; n];
        for i in 0..n {
            y[i] = r[i] / self.diag(i);
            for &(j, v) in &self.rows[i] {
                if j > i {
                    r[j] -= v * y[i];
                }
            }
        }
        y
    }

    fn norm1(&self) -> f64 {
        let mut cols = vec![0.0; self.rows.len()];
        for row in &self.rows {
            for &(j, v) in row {
                cols[j] += v.abs();
            }
        }
        cols.into_iter().fold(0.0, f64::max)
    }

    /// κ₁ with ‖R⁻¹‖₁ from Hager's estimator.
    fn condition_estimate(&self) -> f64 {
        let n = self.rows.len();
        let mut x = vec![1.0 / n as f64; n];
        let mut est = 0.0;
        for _ in 0..5 {
            let y = self.solve(&x);
            est = y.iter().map(|v| v.abs()).sum::<f64>();
            let xi: Vec<f64> = y.iter().map(|v| if *v >= 0.0 { 1.0 } else { -1.0 }).collect();
            let z = self.solve_transpose(&xi);
            let (j, zmax) = z
                .iter()
                .enumerate()
                .fold((0, 0.0f64), |acc, (i, v)| if v.abs() > acc.1 { (i, v.abs()) } else { acc });
            let ztx: f64 = z.iter().zip(&x).map(|(a, b)| a * b).sum();
            if zmax <= ztx {
                break;
            }
            x = vec![0.0; n];
            x[j] = 1.0;
        }
        est * self.norm1()
    }
}

fn harmonic_system(comb: &CombCoefficients, m_max: usize) -> Triangular {
    let rows = (1..=m_max)
        .map(|m| {
            let mut row: Vec<(usize, f64)> = Vec::new();
            for (i, p) in comb.a_sq.iter().enumerate() {
                if *p == 0.0 {
                    continue;
                }
                let col = ((i + 1) * m).min(m_max) - 1;
                match row.iter_mut().find(|e| e.0 == col) {
                    Some(e) => e.1 += p,
                    None => row.push((col, *p)),
                }
            }
            row
        })
        .collect();
    Triangular { rows }
}

fn geometric_system(comb: &CombCoefficients, omega: &[f64]) -> DMatrix<f64> {
    let n = omega.len();
    let last = omega[n - 1];
    let mut a = DMatrix::zeros(n, n);
    for (i, w) in omega.iter().enumerate() {
        for (k, p) in comb.a_sq.iter().enumerate() {
            let wk = (k + 1) as f64 * w;
            if wk >= last {
                a[(i, n - 1)] += p;
                continue;
            }
            let j = omega.partition_point(|x| *x <= wk) - 1;
            let f = (wk - omega[j]) / (omega[j + 1] - omega[j]);
            a[(i, j)] += p * (1.0 - f);
            a[(i, j + 1)] += p * f;
        }
    }
    a
}

fn midpoints(omega: &[f64]) -> Vec<f64> {
    omega.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
}

fn assemble(
    plan: &DdnsPlan,
    method: Method,
    mut pairs: Vec<(f64, f64)>,
) -> ReconstructedSpectrum {
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let omega: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let s: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let d_omega = omega
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::INFINITY, f64::min);
    let d_omega = if d_omega.is_finite() { d_omega } else { 0.0 };
    let omega_max = omega.last().copied().unwrap_or(0.0);
    let mut out = ReconstructedSpectrum {
        omega,
        s,
        method,
        d_omega,
        omega_max,
        t_padded: None,
        extra: Default::default(),
    };
    out.note("ddns_plan", serde_json::to_value(plan).unwrap());
    out
}

fn densified(
    oracle: &dyn CoherenceOracle,
    plan: &DdnsPlan,
    probes: &[f64],
) -> Result<Vec<(f64, f64)>> {
    if !plan.densify {
        return Ok(Vec::new());
    }
    midpoints(probes)
        .par_iter()
        .map(|w| single_delta_probe(oracle, plan, *w).map(|s| (*w, s)))
        .collect()
}

/// Multi-harmonic inversion over the plan's delay ladder.
pub fn run_alvarez_suter(
    oracle: &dyn CoherenceOracle,
    plan: &DdnsPlan,
) -> Result<ReconstructedSpectrum> {
    plan.validate()?;
    let comb = comb_coefficients(plan.n_pulses, plan.k_c)?;
    let probes = plan.probe_frequencies();
    let b: Vec<f64> = probes
        .par_iter()
        .map(|w| {
            let tau = PI / w;
            measure(oracle, plan, tau).map(|chi| chi / (0.5 * plan.n_pulses as f64 * tau))
        })
        .collect::<Result<_>>()?;

    let (s, cond) = match plan.ladder {
        Ladder::Harmonic => {
            let sys = harmonic_system(&comb, probes.len());
            (sys.solve(&b), sys.condition_estimate())
        }
        Ladder::Geometric { .. } => {
            let a = geometric_system(&comb, &probes);
            let svd = a.svd(true, true);
            let smax = svd.singular_values.max();
            let smin = svd.singular_values.min();
            let x = svd
                .solve(&DVector::from_vec(b), 1e-10 * smax)
                .map_err(|e| FtnsError::Numeric(format!("comb system solve failed: {e}")))?;
            (x.as_slice().to_vec(), smax / smin)
        }
    };
    if s.iter().any(|v| !v.is_finite()) {
        return Err(FtnsError::Numeric("comb inversion produced non-finite values".into()));
    }
    let mut pairs: Vec<(f64, f64)> = probes.iter().copied().zip(s).collect();
    pairs.extend(densified(oracle, plan, &probes)?);
    let mut out = assemble(plan, Method::DdnsAs, pairs);
    out.note("condition_number", serde_json::json!(cond));
    if cond > 1e8 {
        out.note(
            "warning",
            serde_json::json!(format!("comb system is ill-conditioned (cond ~ {cond:.3e})")),
        );
    }
    Ok(out)
}

/// First-harmonic reading S(ω₀) ≈ χ(t)/((t/2)P_1) with t = nπ/ω₀.
pub fn single_delta_probe(
    oracle: &dyn CoherenceOracle,
    plan: &DdnsPlan,
    omega_probe: f64,
) -> Result<f64> {
    plan.validate()?;
    if !plan.in_band(omega_probe) {
        let (lo, hi) = plan.band();
        return Err(invalid(format!(
            "probe frequency {omega_probe} lies outside the band [{lo}, {hi}]"
        )));
    }
    let p1 = comb_coefficients(plan.n_pulses, 1)?.power(1);
    let tau = PI / omega_probe;
    let chi = measure(oracle, plan, tau)?;
    Ok(chi / (0.5 * plan.n_pulses as f64 * tau * p1))
}

/// Single-δ readings at every ladder frequency.
pub fn run_single_delta(
    oracle: &dyn CoherenceOracle,
    plan: &DdnsPlan,
) -> Result<ReconstructedSpectrum> {
    plan.validate()?;
    let probes = plan.probe_frequencies();
    let mut pairs: Vec<(f64, f64)> = probes
        .par_iter()
        .map(|w| single_delta_probe(oracle, plan, *w).map(|s| (*w, s)))
        .collect::<Result<_>>()?;
    pairs.extend(densified(oracle, plan, &probes)?);
    Ok(assemble(plan, Method::DdnsDelta, pairs))
}

/// Relative single-δ bias Σ_{k≥3} P_k / P_1 for a flat spectrum.
pub fn single_delta_bias(comb: &CombCoefficients) -> f64 {
    (comb.total() - comb.power(1)) / comb.power(1)
}
