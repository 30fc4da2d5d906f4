//! Sampled coherence traces and the measurement plans that produce them.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::sequence::PulseSequence;

fn default_floor() -> f64 {
    0.005
}

/// Sampling grid and experimental constraints of a coherence measurement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasurementPlan {
    pub dt: f64,
    pub t_max: f64,
    #[serde(default)]
    pub tau_min: f64,
    #[serde(default = "default_floor")]
    pub coherence_floor: f64,
    #[serde(default)]
    pub noise_sigma: f64,
    #[serde(default)]
    pub seed: u64,
}

impl MeasurementPlan {
    /// Plan with no τ_min, the default floor and no noise.
    pub fn ideal(dt: f64, t_max: f64) -> Self {
        Self {
            dt,
            t_max,
            tau_min: 0.0,
            coherence_floor: default_floor(),
            noise_sigma: 0.0,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(invalid(format!("plan.dt must be positive, got {}", self.dt)));
        }
        if !(self.t_max >= self.dt && self.t_max.is_finite()) {
            return Err(invalid(format!(
                "plan.t_max must be finite and >= dt, got {}",
                self.t_max
            )));
        }
        if !(self.tau_min >= 0.0) {
            return Err(invalid(format!("plan.tau_min must be >= 0, got {}", self.tau_min)));
        }
        if !(0.0..1.0).contains(&self.coherence_floor) {
            return Err(invalid(format!(
                "plan.coherence_floor must lie in [0, 1), got {}",
                self.coherence_floor
            )));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(invalid(format!(
                "plan.noise_sigma must be >= 0, got {}",
                self.noise_sigma
            )));
        }
        Ok(())
    }

    /// Number of samples k·dt with k·dt ≤ t_max.
    pub fn grid_len(&self) -> usize {
        (self.t_max / self.dt + 1e-9).floor() as usize + 1
    }

    pub fn grid(&self) -> Vec<f64> {
        (0..self.grid_len()).map(|k| k as f64 * self.dt).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PointMask {
    Measured,
    WithheldBelowTauMin,
    TruncatedByFloor,
}

impl PointMask {
    pub fn as_str(&self) -> &'static str {
        match self {
            PointMask::Measured => "measured",
            PointMask::WithheldBelowTauMin => "withheld_below_tau_min",
            PointMask::TruncatedByFloor => "truncated_by_floor",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "measured" => Some(PointMask::Measured),
            "withheld_below_tau_min" => Some(PointMask::WithheldBelowTauMin),
            "truncated_by_floor" => Some(PointMask::TruncatedByFloor),
            _ => None,
        }
    }
}

/// C(t) on the uniform grid t_k = k·dt.
///
/// Points past the coherence floor stay in the record with a
/// `TruncatedByFloor` mask; everything downstream works on the retained prefix.
#[derive(Debug, Clone, PartialEq)]
pub struct CoherenceTrace {
    pub t: Vec<f64>,
    pub c: Vec<f64>,
    pub mask: Vec<PointMask>,
    pub plan: MeasurementPlan,
    pub sequence: PulseSequence,
}

impl CoherenceTrace {
    pub fn new(
        t: Vec<f64>,
        c: Vec<f64>,
        mask: Vec<PointMask>,
        plan: MeasurementPlan,
        sequence: PulseSequence,
    ) -> Result<Self> {
        if t.len() != c.len() || t.len() != mask.len() {
            return Err(invalid("trace columns differ in length"));
        }
        if t.len() < 2 {
            return Err(invalid("trace needs at least two samples"));
        }
        let dt = t[1] - t[0];
        for (k, &tk) in t.iter().enumerate() {
            if (tk - k as f64 * dt).abs() > 1e-9 * dt.max(tk.abs()) {
                return Err(invalid(format!("time grid is not uniform at row {}", k + 1)));
            }
        }
        if t[0] != 0.0 {
            return Err(invalid("time grid must start at t = 0"));
        }
        Ok(Self {
            t,
            c,
            mask,
            plan,
            sequence,
        })
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn dt(&self) -> f64 {
        self.t[1] - self.t[0]
    }

    /// Count of leading points not cut by the coherence floor.
    pub fn retained_len(&self) -> usize {
        self.mask
            .iter()
            .position(|m| *m == PointMask::TruncatedByFloor)
            .unwrap_or(self.mask.len())
    }

    /// Serialized as "t,C,mask" rows with 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(self.len() * 56);
        out.push_str("t,C,mask\n");
        for k in 0..self.len() {
            out.push_str(&format!(
                "{:.16e},{:.16e},{}\n",
                self.t[k],
                self.c[k],
                self.mask[k].as_str()
            ));
        }
        out
    }

    pub fn from_csv(text: &str, plan: MeasurementPlan, sequence: PulseSequence) -> Result<Self> {
        let mut lines = text.lines();
        match lines.next().map(str::trim) {
            Some("t,C,mask") => {}
            other => {
                return Err(invalid(format!(
                    "trace csv row 1: expected header \"t,C,mask\", found {:?}",
                    other.unwrap_or("")
                )))
            }
        }
        let (mut t, mut c, mut mask) = (Vec::new(), Vec::new(), Vec::new());
        for (i, line) in lines.enumerate() {
            let row = i + 2;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != 3 {
                return Err(invalid(format!(
                    "trace csv row {row}: expected 3 fields, found {}",
                    fields.len()
                )));
            }
            let num = |s: &str, name: &str| {
                s.parse::<f64>()
                    .map_err(|_| invalid(format!("trace csv row {row}: bad {name} value {s:?}")))
            };
            t.push(num(fields[0], "t")?);
            let cv = num(fields[1], "C")?;
            if !(cv > 0.0 && cv <= 1.0) {
                return Err(invalid(format!(
                    "trace csv row {row}: coherence {cv} outside (0, 1]"
                )));
            }
            c.push(cv);
            mask.push(PointMask::parse(fields[2]).ok_or_else(|| {
                invalid(format!("trace csv row {row}: unknown mask {:?}", fields[2]))
            })?);
        }
        Self::new(t, c, mask, plan, sequence)
    }
}

/// JSON companion of a trace CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceSidecar {
    pub plan: MeasurementPlan,
    pub sequence: PulseSequence,
    pub seed: u64,
    pub points: usize,
    pub retained: usize,
    #[serde(default)]
    pub config_hash: Option<String>,
}

impl TraceSidecar {
    pub fn for_trace(trace: &CoherenceTrace, config_hash: Option<String>) -> Self {
        Self {
            plan: trace.plan,
            sequence: trace.sequence,
            seed: trace.plan.seed,
            points: trace.len(),
            retained: trace.retained_len(),
            config_hash,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_sizes_follow_captions() {
        assert_eq!(MeasurementPlan::ideal(0.00314, 6.06).grid_len(), 1930);
        assert_eq!(MeasurementPlan::ideal(0.005156, 598.0 * 0.005156).grid_len(), 599);
    }

    #[test]
    fn csv_round_trip_and_row_errors() {
        let plan = MeasurementPlan::ideal(0.1, 0.3);
        let tr = CoherenceTrace::new(
            plan.grid(),
            vec![1.0, 0.9, 0.8, 0.7],
            vec![PointMask::Measured; 4],
            plan,
            PulseSequence::Fid,
        )
        .unwrap();
        let text = tr.to_csv();
        let back = CoherenceTrace::from_csv(&text, plan, PulseSequence::Fid).unwrap();
        assert_eq!(back, tr);
        let mut rows: Vec<String> = text.lines().map(String::from).collect();
        rows[2] = "2.0e-1,zz,measured".into();
        let broken = rows.join("\n");
        let err = CoherenceTrace::from_csv(&broken, plan, PulseSequence::Fid).unwrap_err();
        assert!(err.to_string().contains("row 3"), "{err}");
    }
}
