//! Reconstructed spectra and their serialized form.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "FID_FTNS")]
    FidFtns,
    #[serde(rename = "SE_FTNS")]
    SeFtns,
    #[serde(rename = "DDNS_AS")]
    DdnsAs,
    #[serde(rename = "DDNS_DELTA")]
    DdnsDelta,
}

/// Axis conventions of a reconstruction. Internally ω is angular; the
/// ordinary-frequency equivalents are f = ω/2π.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AxisInfo {
    pub d_omega: f64,
    pub omega_max: f64,
    pub d_f: f64,
    pub f_max: f64,
}

impl AxisInfo {
    pub fn new(d_omega: f64, omega_max: f64) -> Self {
        Self {
            d_omega,
            omega_max,
            d_f: d_omega / (2.0 * PI),
            f_max: omega_max / (2.0 * PI),
        }
    }
}

/// S(ω) on a frequency grid with method and resolution metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReconstructedSpectrum {
    pub omega: Vec<f64>,
    pub s: Vec<f64>,
    pub method: Method,
    pub d_omega: f64,
    pub omega_max: f64,
    /// Zero-padded one-sided duration T̃_max used by the transform.
    pub t_padded: Option<f64>,
    #[serde(default)]
    pub extra: serde_json::Map<String, serde_json::Value>,
}

impl ReconstructedSpectrum {
    pub fn axes(&self) -> AxisInfo {
        AxisInfo::new(self.d_omega, self.omega_max)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("omega,S\n");
        for (w, s) in self.omega.iter().zip(&self.s) {
            out.push_str(&format!("{w:.16e},{s:.16e}\n"));
        }
        out
    }

    /// Linear interpolation of S at ω (clamped to the grid ends, NaN outside).
    pub fn interpolate(&self, omega: f64) -> f64 {
        let n = self.omega.len();
        if n == 0 || omega < self.omega[0] || omega > self.omega[n - 1] {
            return f64::NAN;
        }
        let k = self.omega.partition_point(|w| *w <= omega);
        if k == 0 {
            return self.s[0];
        }
        if k >= n {
            return self.s[n - 1];
        }
        let (w0, w1) = (self.omega[k - 1], self.omega[k]);
        let f = (omega - w0) / (w1 - w0);
        self.s[k - 1] * (1.0 - f) + self.s[k] * f
    }

    pub fn note(&mut self, key: &str, value: serde_json::Value) {
        self.extra.insert(key.to_string(), value);
    }
}
