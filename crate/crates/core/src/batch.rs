//! Run configurations and the file-producing commands behind the CLI.
//!
//! Every run is described by one JSON document. Outputs carry the SHA-256 of
//! that document (minus `output_dir`) so results can be traced back to it.

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::ddns::{run_alvarez_suter, run_single_delta, DdnsPlan};
use crate::error::{FtnsError, Result};
use crate::fid::{reconstruct_fid, PrepOptions};
use crate::forward::{simulate_trace, Route};
use crate::prep::MitigationConfig;
use crate::reconstruction::{AxisInfo, Method, ReconstructedSpectrum};
use crate::report::{error_report, ErrorReport, PeakError};
use crate::se::{reconstruct_se, reconstruct_with_one_over_f};
use crate::sequence::PulseSequence;
use crate::spectrum::{closed_form_chi, SpectrumModel};
use crate::trace::{CoherenceTrace, MeasurementPlan, TraceSidecar};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RunMethod {
    #[serde(rename = "fid_ftns")]
    FidFtns,
    #[serde(rename = "se_ftns")]
    SeFtns,
    #[serde(rename = "se_ftns_1f")]
    SeFtns1f,
    #[serde(rename = "ddns_as")]
    DdnsAs,
    #[serde(rename = "ddns_delta")]
    DdnsDelta,
}

impl RunMethod {
    pub fn is_ddns(self) -> bool {
        matches!(self, RunMethod::DdnsAs | RunMethod::DdnsDelta)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub label: Option<String>,
    /// True spectrum: drives simulation, the DDNS oracle and error reports.
    #[serde(default)]
    pub spectrum: Option<SpectrumModel>,
    pub sequence: PulseSequence,
    #[serde(default)]
    pub plan: Option<MeasurementPlan>,
    pub method: RunMethod,
    #[serde(default)]
    pub prep: Option<PrepOptions>,
    #[serde(default)]
    pub mitigation: Option<MitigationConfig>,
    #[serde(default)]
    pub ddns: Option<DdnsPlan>,
    /// Frequency range for error reports; the whole reconstruction when absent.
    #[serde(default)]
    pub band: Option<(f64, f64)>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

fn config_err(msg: impl Into<String>) -> FtnsError {
    FtnsError::Config(msg.into())
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| config_err(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|source| FtnsError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text).map_err(|e| match e {
            FtnsError::Config(m) => config_err(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(config_err(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        let compatible = match self.method {
            RunMethod::FidFtns => self.sequence == PulseSequence::Fid,
            RunMethod::SeFtns | RunMethod::SeFtns1f => self.sequence == PulseSequence::SpinEcho,
            RunMethod::DdnsAs | RunMethod::DdnsDelta => {
                matches!(self.sequence, PulseSequence::Cpmg { .. })
            }
        };
        if !compatible {
            return Err(config_err(format!(
                "method {:?} cannot run on a {} sequence",
                self.method,
                self.sequence.label()
            )));
        }
        if let Some(plan) = &self.plan {
            plan.validate().map_err(|e| config_err(format!("plan: {e}")))?;
        }
        if let Some(m) = &self.mitigation {
            m.validate().map_err(|e| config_err(format!("mitigation: {e}")))?;
            if self.prep.is_some_and(|p| p.mitigation.is_some()) {
                return Err(config_err("mitigation is given both at top level and inside prep"));
            }
        }
        if self.prep.is_some_and(|p| p.pad_factor == 0) {
            return Err(config_err("prep.pad_factor must be >= 1"));
        }
        if self.method.is_ddns() {
            let ddns = self
                .ddns
                .as_ref()
                .ok_or_else(|| config_err("DDNS methods need a \"ddns\" plan"))?;
            ddns.validate().map_err(|e| config_err(format!("ddns: {e}")))?;
            if ddns.n_pulses != self.sequence.n_pulses() {
                return Err(config_err(format!(
                    "ddns.n_pulses = {} disagrees with the {} sequence",
                    ddns.n_pulses,
                    self.sequence.label()
                )));
            }
            if self.spectrum.is_none() {
                return Err(config_err("DDNS methods need a spectrum to act as the coherence source"));
            }
        }
        if let Some((lo, hi)) = self.band {
            if !(lo >= 0.0 && hi > lo) {
                return Err(config_err(format!("band [{lo}, {hi}] is invalid")));
            }
        }
        Ok(())
    }

    pub fn prep_options(&self) -> PrepOptions {
        let mut p = self.prep.unwrap_or_default();
        if self.mitigation.is_some() {
            p.mitigation = self.mitigation;
        }
        p
    }

    fn require_plan(&self) -> Result<MeasurementPlan> {
        self.plan.ok_or_else(|| config_err("this command needs a measurement \"plan\""))
    }

    fn require_spectrum(&self) -> Result<&SpectrumModel> {
        self.spectrum
            .as_ref()
            .ok_or_else(|| config_err("this command needs a \"spectrum\""))
    }

    pub fn with_seed(mut self, seed: Option<u64>) -> Self {
        if let (Some(s), Some(plan)) = (seed, self.plan.as_mut()) {
            plan.seed = s;
        }
        self
    }

    /// Hex SHA-256 of the canonical JSON form, ignoring `output_dir`.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output_dir = None;
        sha256_hex(serde_json::to_string(&c).unwrap().as_bytes())
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let d = Sha256::digest(bytes);
    d.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn spectrum_hash(model: &SpectrumModel) -> String {
    sha256_hex(serde_json::to_string(model).unwrap().as_bytes())
}

fn io_err(path: &Path, source: std::io::Error) -> FtnsError {
    FtnsError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| io_err(&path, e))?;
    Ok(path)
}

fn pretty<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).unwrap();
    s.push('\n');
    s
}

/// Output directory: the command-line value, then the config's, then `out`.
pub fn resolve_out(cfg: &RunConfig, out: Option<&Path>) -> PathBuf {
    out.map(Path::to_path_buf)
        .or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("out"))
}

pub fn simulate(cfg: &RunConfig) -> Result<CoherenceTrace> {
    simulate_trace(cfg.require_spectrum()?, &cfg.sequence, &cfg.require_plan()?)
}

/// Runs the configured inversion. FTNS methods need a trace; DDNS methods query the spectrum.
pub fn reconstruct(cfg: &RunConfig, trace: Option<&CoherenceTrace>) -> Result<ReconstructedSpectrum> {
    let prep = cfg.prep_options();
    let need = || config_err("FTNS methods need a coherence trace");
    match cfg.method {
        RunMethod::FidFtns => reconstruct_fid(trace.ok_or_else(need)?, &prep),
        RunMethod::SeFtns => reconstruct_se(trace.ok_or_else(need)?, &prep),
        RunMethod::SeFtns1f => reconstruct_with_one_over_f(trace.ok_or_else(need)?, &prep),
        RunMethod::DdnsAs => run_alvarez_suter(cfg.require_spectrum()?, cfg.ddns.as_ref().unwrap()),
        RunMethod::DdnsDelta => run_single_delta(cfg.require_spectrum()?, cfg.ddns.as_ref().unwrap()),
    }
}

/// Simulation (for FTNS methods) followed by reconstruction, all in memory.
pub fn run_pipeline(cfg: &RunConfig) -> Result<(Option<CoherenceTrace>, ReconstructedSpectrum)> {
    if cfg.method.is_ddns() {
        return Ok((None, reconstruct(cfg, None)?));
    }
    let trace = simulate(cfg)?;
    let rec = reconstruct(cfg, Some(&trace))?;
    Ok((Some(trace), rec))
}

/// JSON companion of a spectrum CSV.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectrumFile {
    pub method: Method,
    pub d_omega: f64,
    pub omega_max: f64,
    pub axes: AxisInfo,
    pub t_padded: Option<f64>,
    pub points: usize,
    pub config_hash: String,
    pub trace_hash: Option<String>,
    pub metadata: serde_json::Map<String, serde_json::Value>,
}

fn write_trace(dir: &Path, trace: &CoherenceTrace, cfg_hash: &str) -> Result<Vec<PathBuf>> {
    Ok(vec![
        write(dir, "trace.csv", &trace.to_csv())?,
        write(
            dir,
            "trace.json",
            &pretty(&TraceSidecar::for_trace(trace, Some(cfg_hash.to_string()))),
        )?,
    ])
}

fn write_spectrum(
    dir: &Path,
    rec: &ReconstructedSpectrum,
    cfg_hash: &str,
    trace_hash: Option<String>,
) -> Result<Vec<PathBuf>> {
    let meta = SpectrumFile {
        method: rec.method,
        d_omega: rec.d_omega,
        omega_max: rec.omega_max,
        axes: rec.axes(),
        t_padded: rec.t_padded,
        points: rec.omega.len(),
        config_hash: cfg_hash.to_string(),
        trace_hash,
        metadata: rec.extra.clone(),
    };
    Ok(vec![
        write(dir, "spectrum.csv", &rec.to_csv())?,
        write(dir, "spectrum.json", &pretty(&meta))?,
    ])
}

#[derive(Serialize)]
struct ReportFile<'a> {
    config_hash: &'a str,
    band: (f64, f64),
    d_omega: f64,
    max_delta: f64,
    peak_errors: &'a [PeakError],
}

fn write_report(dir: &Path, rep: &ErrorReport, cfg_hash: &str) -> Result<Vec<PathBuf>> {
    let file = ReportFile {
        config_hash: cfg_hash,
        band: rep.band,
        d_omega: rep.d_omega,
        max_delta: rep.max_delta,
        peak_errors: &rep.peak_errors,
    };
    Ok(vec![
        write(dir, "delta.csv", &rep.to_csv())?,
        write(dir, "report.json", &pretty(&file))?,
    ])
}

/// Writes `trace.csv` and `trace.json`.
pub fn cmd_simulate(cfg: &RunConfig, out: &Path) -> Result<Vec<PathBuf>> {
    let trace = simulate(cfg)?;
    write_trace(out, &trace, &cfg.hash())
}

/// Reads a trace (with its sidecar when present, else the config's plan and
/// sequence), reconstructs, and writes the spectrum and, when the true
/// spectrum is known, the error report. DDNS methods ignore `trace_path`.
pub fn cmd_reconstruct(cfg: &RunConfig, trace_path: Option<&Path>, out: &Path) -> Result<Vec<PathBuf>> {
    let hash = cfg.hash();
    let (trace, trace_hash) = if cfg.method.is_ddns() {
        (None, None)
    } else {
        let path = trace_path.ok_or_else(|| config_err("reconstruct needs --trace for FTNS methods"))?;
        let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
        let sidecar_path = path.with_extension("json");
        let (plan, sequence) = if sidecar_path.exists() {
            let s = fs::read_to_string(&sidecar_path).map_err(|e| io_err(&sidecar_path, e))?;
            let side: TraceSidecar = serde_json::from_str(&s)
                .map_err(|e| config_err(format!("{}: {e}", sidecar_path.display())))?;
            (side.plan, side.sequence)
        } else {
            (cfg.require_plan()?, cfg.sequence)
        };
        if sequence != cfg.sequence {
            return Err(FtnsError::InvalidInput(format!(
                "trace was recorded under {} but the config declares {}",
                sequence.label(),
                cfg.sequence.label()
            )));
        }
        let trace = CoherenceTrace::from_csv(&text, plan, sequence)
            .map_err(|e| FtnsError::InvalidInput(format!("{}: {e}", path.display())))?;
        (Some(trace), Some(sha256_hex(text.as_bytes())))
    };
    let rec = reconstruct(cfg, trace.as_ref())?;
    let mut files = write_spectrum(out, &rec, &hash, trace_hash)?;
    if let Some(model) = &cfg.spectrum {
        let rep = error_report(model, &rec, cfg.band)?;
        files.extend(write_report(out, &rep, &hash)?);
    }
    Ok(files)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CompareRun {
    pub label: String,
    pub config_hash: String,
    pub method: Method,
    pub band: (f64, f64),
    pub max_delta: f64,
    pub mean_delta: f64,
    pub peak_errors: Vec<PeakError>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PairDiff {
    pub a: String,
    pub b: String,
    pub max_abs_diff: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CompareReport {
    pub band: Option<(f64, f64)>,
    pub warnings: Vec<String>,
    pub runs: Vec<CompareRun>,
    pub pairwise: Vec<PairDiff>,
}

fn run_label(cfg: &RunConfig, fallback: &str, i: usize) -> String {
    let base = cfg.label.clone().unwrap_or_else(|| fallback.to_string());
    format!("{i}_{base}")
}

/// Runs each configuration and tabulates Δ(ω) on a shared grid over the
/// intersection of their bands. All runs must describe the same spectrum
/// unless `force` is set.
pub fn cmd_compare(cfgs: &[(String, RunConfig)], out: &Path, force: bool) -> Result<CompareReport> {
    if cfgs.len() < 2 {
        return Err(config_err("compare needs at least two configs"));
    }
    let hashes: Vec<String> = cfgs
        .iter()
        .map(|(_, c)| c.require_spectrum().map(spectrum_hash))
        .collect::<Result<_>>()?;
    if hashes.iter().any(|h| *h != hashes[0]) && !force {
        return Err(config_err(
            "configs describe different spectra; pass --force to compare anyway",
        ));
    }
    let results: Vec<ReconstructedSpectrum> = cfgs
        .par_iter()
        .map(|(_, c)| run_pipeline(c).map(|r| r.1))
        .collect::<Result<_>>()?;
    let truth = cfgs[0].1.spectrum.as_ref().unwrap();
    let labels: Vec<String> = cfgs
        .iter()
        .enumerate()
        .map(|(i, (name, c))| run_label(c, name, i))
        .collect();

    let mut warnings = Vec::new();
    if hashes.iter().any(|h| *h != hashes[0]) {
        warnings.push("runs describe different spectra; Δ is measured against the first".into());
    }
    let ranges: Vec<(f64, f64)> = results
        .iter()
        .map(|r| (r.omega[0], *r.omega.last().unwrap()))
        .collect();
    let mut lo = ranges.iter().map(|r| r.0).fold(f64::NEG_INFINITY, f64::max);
    let mut hi = ranges.iter().map(|r| r.1).fold(f64::INFINITY, f64::min);
    if let Some((a, b)) = cfgs[0].1.band {
        lo = lo.max(a);
        hi = hi.min(b);
    }
    if ranges.iter().any(|r| *r != ranges[0]) {
        warnings.push(format!("frequency ranges differ; comparing on the intersection [{lo}, {hi}]"));
    }
    let band = (hi > lo).then_some((lo, hi));
    if band.is_none() {
        warnings.push("frequency ranges are disjoint; nothing to tabulate".into());
    }

    let mut runs = Vec::new();
    for ((rec, c), label) in results.iter().zip(cfgs.iter().map(|p| &p.1)).zip(&labels) {
        let (max_delta, mean_delta, peak_errors) = match band {
            Some(b) => {
                let rep = error_report(truth, rec, Some(b))?;
                let mean = rep.delta_abs.iter().sum::<f64>() / rep.delta_abs.len().max(1) as f64;
                (rep.max_delta, mean, rep.peak_errors)
            }
            None => (f64::NAN, f64::NAN, Vec::new()),
        };
        runs.push(CompareRun {
            label: label.clone(),
            config_hash: c.hash(),
            method: rec.method,
            band: band.unwrap_or((f64::NAN, f64::NAN)),
            max_delta,
            mean_delta,
            peak_errors,
        });
    }

    let mut table = String::from("omega,S_true");
    for l in &labels {
        table.push_str(&format!(",S_{l},delta_{l}"));
    }
    table.push('\n');
    let mut pairwise = Vec::new();
    if let Some((lo, hi)) = band {
        let step = results
            .iter()
            .map(|r| r.d_omega)
            .filter(|d| *d > 0.0)
            .fold(f64::INFINITY, f64::min);
        let n = (((hi - lo) / step).floor() as usize + 1).clamp(2, 20001);
        let grid: Vec<f64> = (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect();
        let cols: Vec<Vec<f64>> = results
            .iter()
            .map(|r| grid.iter().map(|w| r.interpolate(*w)).collect())
            .collect();
        for (k, w) in grid.iter().enumerate() {
            let t = truth.value_unchecked(*w);
            table.push_str(&format!("{w:.16e},{t:.16e}"));
            for col in &cols {
                table.push_str(&format!(",{:.16e},{:.16e}", col[k], (col[k] - t).abs()));
            }
            table.push('\n');
        }
        for i in 0..cols.len() {
            for j in i + 1..cols.len() {
                let d = cols[i]
                    .iter()
                    .zip(&cols[j])
                    .filter(|(a, b)| a.is_finite() && b.is_finite())
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max);
                pairwise.push(PairDiff {
                    a: labels[i].clone(),
                    b: labels[j].clone(),
                    max_abs_diff: d,
                });
            }
        }
    }
    let report = CompareReport {
        band,
        warnings,
        runs,
        pairwise,
    };
    write(out, "compare.csv", &table)?;
    write(out, "compare.json", &pretty(&report))?;
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    Dt,
    NoiseSigma,
    NPulses,
}

pub fn apply_axis(cfg: &RunConfig, axis: SweepAxis, value: f64) -> Result<RunConfig> {
    let mut c = cfg.clone();
    match axis {
        SweepAxis::Dt | SweepAxis::NoiseSigma => {
            let plan = c.plan.as_mut().ok_or_else(|| config_err("sweeping a plan field needs a plan"))?;
            if axis == SweepAxis::Dt {
                plan.dt = value;
            } else {
                plan.noise_sigma = value;
            }
        }
        SweepAxis::NPulses => {
            if value.fract() != 0.0 || value < 1.0 || value > u32::MAX as f64 {
                return Err(config_err(format!("n_pulses must be a positive integer, got {value}")));
            }
            if !matches!(c.sequence, PulseSequence::Cpmg { .. }) {
                return Err(config_err("n_pulses sweeps need a cpmg sequence"));
            }
            let n = value as u32;
            c.sequence = PulseSequence::Cpmg { n_pulses: n };
            if let Some(d) = c.ddns.as_mut() {
                d.n_pulses = n;
            }
        }
    }
    c.validate()?;
    Ok(c)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepRow {
    pub index: usize,
    pub value: f64,
    pub dir: String,
    pub config_hash: String,
    pub max_delta: Option<f64>,
    pub peak_errors: Vec<PeakError>,
}

/// One run per value, executed in parallel, each written to its own
/// `run_NNN` directory, followed by `sweep.csv` and `sweep.json`.
pub fn cmd_sweep(cfg: &RunConfig, axis: SweepAxis, values: &[f64], out: &Path) -> Result<Vec<SweepRow>> {
    if values.is_empty() {
        return Err(config_err("sweep needs at least one value"));
    }
    let cfgs: Vec<RunConfig> = values
        .iter()
        .map(|v| apply_axis(cfg, axis, *v))
        .collect::<Result<_>>()?;
    let rows: Vec<SweepRow> = cfgs
        .par_iter()
        .enumerate()
        .map(|(i, c)| {
            let dir = out.join(format!("run_{i:03}"));
            let hash = c.hash();
            let (trace, rec) = run_pipeline(c)?;
            if let Some(tr) = &trace {
                write_trace(&dir, tr, &hash)?;
            }
            let trace_hash = trace.as_ref().map(|t| sha256_hex(t.to_csv().as_bytes()));
            write_spectrum(&dir, &rec, &hash, trace_hash)?;
            write(&dir, "config.json", &pretty(c))?;
            let (max_delta, peak_errors) = match &c.spectrum {
                Some(m) => {
                    let rep = error_report(m, &rec, c.band)?;
                    write_report(&dir, &rep, &hash)?;
                    (Some(rep.max_delta), rep.peak_errors)
                }
                None => (None, Vec::new()),
            };
            Ok(SweepRow {
                index: i,
                value: values[i],
                dir: format!("run_{i:03}"),
                config_hash: hash,
                max_delta,
                peak_errors,
            })
        })
        .collect::<Result<_>>()?;
    let axis_name = serde_json::to_value(axis).unwrap();
    let mut csv = format!("index,{},max_delta,dir\n", axis_name.as_str().unwrap());
    for r in &rows {
        let d = r.max_delta.map_or(String::new(), |d| format!("{d:.16e}"));
        csv.push_str(&format!("{},{},{d},{}\n", r.index, r.value, r.dir));
    }
    write(out, "sweep.csv", &csv)?;
    write(
        out,
        "sweep.json",
        &pretty(&serde_json::json!({ "axis": axis_name, "runs": rows })),
    )?;
    Ok(rows)
}

/// Exact χ on the plan grid and S on [0, π/dt], for fixtures.
pub fn cmd_oracle(cfg: &RunConfig, out: &Path) -> Result<Vec<PathBuf>> {
    let model = cfg.require_spectrum()?;
    let plan = cfg.require_plan()?;
    let grid = plan.grid();
    let chi: Vec<f64> = grid
        .par_iter()
        .map(|t| crate::forward::attenuation_with(model, &cfg.sequence, *t, Route::Auto))
        .collect::<Result<_>>()?;
    let closed = grid.len() > 1 && closed_form_chi(model, &cfg.sequence, grid[1]).is_some();
    let mut chi_csv = String::from("t,chi\n");
    for (t, x) in grid.iter().zip(&chi) {
        chi_csv.push_str(&format!("{t:.16e},{x:.16e}\n"));
    }
    let n = 2001;
    let w_max = PI / plan.dt;
    let mut s_csv = String::from("omega,S\n");
    for k in 0..n {
        let w = w_max * k as f64 / (n - 1) as f64;
        s_csv.push_str(&format!("{w:.16e},{:.16e}\n", model.value_unchecked(w)));
    }
    let meta = serde_json::json!({
        "config_hash": cfg.hash(),
        "sequence": cfg.sequence,
        "chi_route": if closed { "closed_form" } else { "lagged" },
        "omega_max": w_max,
    });
    Ok(vec![
        write(out, "oracle_chi.csv", &chi_csv)?,
        write(out, "oracle_spectrum.csv", &s_csv)?,
        write(out, "oracle.json", &pretty(&meta))?,
    ])
}
