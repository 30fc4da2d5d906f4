//! Sweep the sampling interval through the batch layer, the way the `sweep`
//! verb does, and watch the high-frequency error fall.

use ftns::batch::{cmd_sweep, RunConfig, SweepAxis};

fn main() -> ftns::Result<()> {
    let text = include_str!("../fixtures/fig3_sweep_base.json");
    let mut cfg = RunConfig::from_json(text)?;
    cfg.band = Some((3.0, 6.0));
    let out = std::env::temp_dir().join("ftns_sampling_sweep");
    let rows = cmd_sweep(&cfg, SweepAxis::Dt, &[0.06291, 0.03145, 0.01258, 0.006291], &out)?;
    for r in rows {
        println!("dt = {:<8} max |d| on [3, 6] = {:.4e}", r.value, r.max_delta.unwrap());
    }
    println!("runs written under {}", out.display());
    Ok(())
}
