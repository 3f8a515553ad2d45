//! Follows the optimal S along the AKLT path with the optimal-path ODE and
//! compares it with independent pointwise optimization.
//!
//! `cargo run --release --example ode_path -- [steps]`

use parentgap::model::{Family, Model};
use parentgap::path::{linspace, ode_follow, sweep, OdeOptions, SweepOptions};

fn main() -> parentgap::Result<()> {
    let steps: usize = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(11);
    let fam = Family::aklt();
    let grid = linspace(0.0, 1.0, steps);
    let opts = SweepOptions { sector: Some(Model::Aklt.ground_sector()), template: true, ..Default::default() };
    let pointwise = sweep(&fam, 8, &grid, &opts)?;
    let ode = ode_follow(&fam, 8, &grid, &pointwise.s_params[0], &opts, &OdeOptions::default())?;
    println!("{:>6} {:>12} {:>12} {:>10}", "lambda", "sweep", "ode", "|ΔS|max");
    for i in 0..grid.len() {
        let ds = pointwise.s_params[i]
            .iter()
            .zip(&ode.s_params[i])
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        println!("{:>6.3} {:>12.8} {:>12.8} {ds:>10.2e}", grid[i], pointwise.gaps_optimized[i], ode.gaps_optimized[i]);
    }
    println!("restarted at λ = {:?}", ode.ode_restarts);
    Ok(())
}
