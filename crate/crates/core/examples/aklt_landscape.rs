//! Gap landscape Δ(S11, S22) of the AKLT template on a coarse grid, with the
//! BFGS optimum for comparison. Output is plot-ready (`x y z` with blank lines
//! between rows).
//!
//! `cargo run --release --example aklt_landscape -- [lambda] [grid]`

use parentgap::model::{Family, Model};
use parentgap::opt::{maximize, MaximizeOptions, Objective, ObjectiveOptions};
use parentgap::symmetry::{build_sector, symmetric_s_template};
use std::sync::Arc;

fn main() -> parentgap::Result<()> {
    let mut args = std::env::args().skip(1);
    let lambda: f64 = args.next().and_then(|a| a.parse().ok()).unwrap_or(0.7);
    let grid: usize = args.next().and_then(|a| a.parse().ok()).unwrap_or(40);
    let n = 8;
    let sector = Arc::new(build_sector(Model::Aklt, n, &Model::Aklt.ground_sector())?);
    let obj = Objective::new(
        &Family::aklt(),
        lambda,
        n,
        Some(sector),
        Some(symmetric_s_template(Model::Aklt)?),
        ObjectiveOptions::default(),
    )?;
    // S = diag(a, b, 1 − 2a − 2b, b, a) is positive for a, b > 0 and a + b < ½
    let mut best = (f64::NEG_INFINITY, 0.0, 0.0);
    for i in 1..grid {
        let a = 0.5 * i as f64 / grid as f64;
        for j in 1..grid {
            let b = 0.5 * j as f64 / grid as f64;
            if a + b >= 0.5 {
                continue;
            }
            let g = obj.gap_value(&[a, b])?;
            if g > best.0 {
                best = (g, a, b);
            }
            println!("{a:.6} {b:.6} {g:.10}");
        }
        println!();
    }
    let st = maximize(&obj, &obj.canonical_params()?, &MaximizeOptions::default())?;
    eprintln!("grid max   Δ = {:.8} at ({:.4}, {:.4})", best.0, best.1, best.2);
    eprintln!(
        "BFGS       Δ = {:.8} at ({:.6}, {:.6}), {} iterations, converged {}",
        st.value, st.params[0], st.params[1], st.iteration, st.converged
    );
    Ok(())
}
