//! Pulse sequences as ±1 switching functions and their filter functions.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, FtnsError};

/// Control sequence applied between the two π/2 pulses. π pulses are ideal and instantaneous.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", try_from = "RawSequence")]
pub enum PulseSequence {
    Fid,
    SpinEcho,
    Cpmg { n_pulses: u32 },
}

#[derive(Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum RawSequence {
    Fid,
    SpinEcho,
    Cpmg { n_pulses: u32 },
}

impl TryFrom<RawSequence> for PulseSequence {
    type Error = FtnsError;
    fn try_from(raw: RawSequence) -> Result<Self, FtnsError> {
        match raw {
            RawSequence::Fid => Ok(PulseSequence::Fid),
            RawSequence::SpinEcho => Ok(PulseSequence::SpinEcho),
            RawSequence::Cpmg { n_pulses } => PulseSequence::cpmg(n_pulses),
        }
    }
}

/// Jump representation of a switching function: y(s) changes by `weights[j]` at `times[j]`.
///
/// The weights sum to zero, so the sign pattern starts and ends at zero outside [0, t].
#[derive(Debug, Clone, PartialEq)]
pub struct Switching {
    pub times: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Switching {
    /// Σ a_j², the constant term of ω²F(ω).
    pub fn mean_weight(&self) -> f64 {
        self.weights.iter().map(|a| a * a).sum()
    }

    /// Pairs (t_l − t_j, a_j·a_l) for j < l.
    pub fn lag_pairs(&self) -> Vec<(f64, f64)> {
        let mut out = Vec::with_capacity(self.times.len() * self.times.len() / 2);
        for j in 0..self.times.len() {
            for l in j + 1..self.times.len() {
                out.push((
                    self.times[l] - self.times[j],
                    self.weights[j] * self.weights[l],
                ));
            }
        }
        out
    }

    /// Lag pairs with equal lags merged, sorted by lag.
    pub fn merged_lags(&self) -> Vec<(f64, f64)> {
        let mut pairs = self.lag_pairs();
        pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        let span = self.times.last().copied().unwrap_or(0.0);
        let tol = 1e-12 * span.max(f64::MIN_POSITIVE);
        let mut out: Vec<(f64, f64)> = Vec::new();
        for (lag, w) in pairs {
            match out.last_mut() {
                Some(last) if (lag - last.0).abs() <= tol => last.1 += w,
                _ => out.push((lag, w)),
            }
        }
        out.retain(|p| p.1 != 0.0);
        out
    }

    /// Σ a_j t_j^k.
    pub fn moment(&self, k: i32) -> f64 {
        self.times
            .iter()
            .zip(&self.weights)
            .map(|(t, a)| a * t.powi(k))
            .sum()
    }
}

impl PulseSequence {
    pub fn cpmg(n_pulses: u32) -> Result<Self, FtnsError> {
        if n_pulses == 0 {
            return Err(invalid("CPMG requires n_pulses >= 1"));
        }
        Ok(PulseSequence::Cpmg { n_pulses })
    }

    pub fn n_pulses(&self) -> u32 {
        match self {
            PulseSequence::Fid => 0,
            PulseSequence::SpinEcho => 1,
            PulseSequence::Cpmg { n_pulses } => *n_pulses,
        }
    }

    pub fn label(&self) -> String {
        match self {
            PulseSequence::Fid => "fid".into(),
            PulseSequence::SpinEcho => "spin_echo".into(),
            PulseSequence::Cpmg { n_pulses } => format!("cpmg{n_pulses}"),
        }
    }

    /// π-pulse positions for total evolution time `t`, at (j − 1/2)·t/n.
    pub fn pulse_times(&self, t: f64) -> Vec<f64> {
        let n = self.n_pulses();
        (1..=n)
            .map(|j| (j as f64 - 0.5) * t / n as f64)
            .collect()
    }

    pub fn switching(&self, t: f64) -> Switching {
        let pulses = self.pulse_times(t);
        let n = pulses.len();
        let mut times = Vec::with_capacity(n + 2);
        let mut weights = Vec::with_capacity(n + 2);
        times.push(0.0);
        weights.push(-1.0);
        let mut sign = 1.0;
        for p in pulses {
            times.push(p);
            weights.push(2.0 * sign);
            sign = -sign;
        }
        times.push(t);
        weights.push(sign);
        Switching { times, weights }
    }

    /// Constant-sign segments (start, end, sign) covering [0, t].
    pub fn segments(&self, t: f64) -> Vec<(f64, f64, f64)> {
        let mut edges = vec![0.0];
        edges.extend(self.pulse_times(t));
        edges.push(t);
        let mut sign = 1.0;
        edges
            .windows(2)
            .map(|w| {
                let s = (w[0], w[1], sign);
                sign = -sign;
                s
            })
            .collect()
    }
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

/// Filter function F(ω, t) = |∫₀ᵗ y(s) e^{iωs} ds|².
pub fn filter_value(sequence: &PulseSequence, omega: f64, t: f64) -> f64 {
    let x = omega * t;
    match sequence {
        PulseSequence::Fid => {
            if x.abs() < 1e-4 {
                t * t * (1.0 - x * x / 12.0)
            } else {
                let s = (x / 2.0).sin();
                4.0 * s * s / (omega * omega)
            }
        }
        PulseSequence::SpinEcho => {
            if x.abs() < 1e-4 {
                omega * omega * t.powi(4) / 16.0 * (1.0 - x * x / 24.0)
            } else {
                let s = (x / 4.0).sin();
                16.0 * s.powi(4) / (omega * omega)
            }
        }
        PulseSequence::Cpmg { .. } => segment_filter(sequence, omega, t),
    }
}

/// Filter from the segment sum Σ ε (b−a) sinc(ω(b−a)/2) e^{iω(a+b)/2}; valid for every sequence.
pub fn segment_filter(sequence: &PulseSequence, omega: f64, t: f64) -> f64 {
    let (mut re, mut im) = (0.0, 0.0);
    for (a, b, eps) in sequence.segments(t) {
        let len = b - a;
        let amp = eps * len * sinc(omega * len / 2.0);
        let phase = omega * (a + b) / 2.0;
        re += amp * phase.cos();
        im += amp * phase.sin();
    }
    re * re + im * im
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn filter_limits_and_values() {
        assert!((filter_value(&PulseSequence::Fid, 1e-9, 2.0) - 4.0).abs() < 1e-12);
        assert!((filter_value(&PulseSequence::Fid, PI, 1.0) - 4.0 / (PI * PI)).abs() < 1e-15);
        let w = 1e-6;
        let t = 3.0;
        let se = filter_value(&PulseSequence::SpinEcho, w, t);
        assert!((se - w * w * t.powi(4) / 16.0).abs() < 1e-12 * se);
    }

    #[test]
    fn segment_form_matches_closed_forms() {
        for &w in &[0.0, 1e-5, 0.3, 2.0, 17.0] {
            for &t in &[0.5, 2.0, 7.5] {
                let f = filter_value(&PulseSequence::Fid, w, t);
                let s = segment_filter(&PulseSequence::Fid, w, t);
                assert!((f - s).abs() < 1e-12 * (1.0 + f));
                let f = filter_value(&PulseSequence::SpinEcho, w, t);
                let s = filter_value(&PulseSequence::Cpmg { n_pulses: 1 }, w, t);
                assert!((f - s).abs() < 1e-12 * (1.0 + f), "w={w} t={t}");
            }
        }
    }

    #[test]
    fn switching_weights_balance() {
        for seq in [
            PulseSequence::Fid,
            PulseSequence::SpinEcho,
            PulseSequence::Cpmg { n_pulses: 7 },
        ] {
            let sw = seq.switching(3.0);
            assert!(sw.weights.iter().sum::<f64>().abs() < 1e-15);
            if seq != PulseSequence::Fid {
                assert!(sw.moment(1).abs() < 1e-12);
            }
        }
        assert_eq!(PulseSequence::SpinEcho.switching(2.0).mean_weight(), 6.0);
    }

    #[test]
    fn zero_pulse_cpmg_rejected() {
        assert!(PulseSequence::cpmg(0).is_err());
        let parsed: Result<PulseSequence, _> =
            serde_json::from_str(r#"{"kind":"cpmg","n_pulses":0}"#);
        assert!(parsed.is_err());
    }
}
