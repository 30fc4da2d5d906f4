//! Comb coefficients of CPMG, the flat-spectrum check, and the single-δ bias.

use ftns::ddns::{comb_coefficients, run_alvarez_suter, single_delta_bias, single_delta_probe, DdnsPlan};
use ftns::spectrum::{SpectrumComponent, SpectrumModel};

fn main() -> ftns::Result<()> {
    let comb = comb_coefficients(32, 9)?;
    for k in 1..=9 {
        println!("P_{k} = {:.10}", comb.power(k));
    }
    let wide = comb_coefficients(32, 20001)?;
    println!("sum over k <= 20001: {:.8}", wide.total());

    let flat = SpectrumModel::new(vec![SpectrumComponent::Constant { c: 1.0 }], false)?;
    let plan = DdnsPlan::new(32, 41, 0.05, 5.0);
    let rec = run_alvarez_suter(&flat, &plan)?;
    let worst = rec.s.iter().map(|s| (s - 1.0).abs()).fold(0.0, f64::max);
    println!("flat spectrum, k_c = 41: worst deviation {worst:.4e} over {} probes", rec.s.len());

    let reading = single_delta_probe(&flat, &plan, 2.0)?;
    println!(
        "single-delta reading {reading:.6}; predicted bias {:.6}",
        single_delta_bias(&wide)
    );
    Ok(())
}
