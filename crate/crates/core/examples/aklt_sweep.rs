//! Canonical versus optimized gap along the AKLT interpolation, in the
//! symmetric sector with the two-parameter diagonal template.
//!
//! `cargo run --release --example aklt_sweep -- [n_sites] [steps]`

use parentgap::model::{Family, Model};
use parentgap::path::{linspace, sweep, SweepOptions};

fn main() -> parentgap::Result<()> {
    let args: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let n = args.first().copied().unwrap_or(8);
    let steps = args.get(1).copied().unwrap_or(11);
    let opts = SweepOptions { sector: Some(Model::Aklt.ground_sector()), template: true, ..Default::default() };
    let res = sweep(&Family::aklt(), n, &linspace(0.0, 1.0, steps), &opts)?;
    println!("{:>6} {:>12} {:>12} {:>10} {:>10}  conv", "lambda", "canonical", "optimized", "S11", "S22");
    for (i, lam) in res.lambdas.iter().enumerate() {
        let p = &res.s_params[i];
        println!(
            "{lam:>6.3} {:>12.8} {:>12.8} {:>10.6} {:>10.6}  {}",
            res.gaps_canonical[i], res.gaps_optimized[i], p[0], p[1], res.diagnostics[i].converged
        );
    }
    println!("min gap: canonical {:.8}, optimized {:.8}", res.min_gap_canonical, res.min_gap_optimized);
    Ok(())
}
