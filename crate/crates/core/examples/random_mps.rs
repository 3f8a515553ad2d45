//! Random bond-dimension-2 MPS: optimized versus canonical parent-Hamiltonian
//! gap at λ = 1 for a few seeds, optimizing over all positive `S`.
//!
//! `cargo run --release --example random_mps -- [n_spins] [n_seeds]`

use parentgap::model::Family;
use parentgap::opt::{maximize, MaximizeOptions, Objective, ObjectiveOptions};

fn main() -> parentgap::Result<()> {
    let args: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let n = args.first().copied().unwrap_or(6);
    let seeds = args.get(1).copied().unwrap_or(3) as u64;
    for seed in 0..seeds {
        let fam = Family::random(seed, 0.0);
        let obj = Objective::new(&fam, 1.0, n, None, None, ObjectiveOptions::default())?;
        let p0 = obj.canonical_params()?;
        let can = obj.gap_value(&p0)?;
        let st = maximize(&obj, &p0, &MaximizeOptions { max_iter: 200, ..Default::default() })?;
        println!(
            "seed {seed}: canonical {can:.6e}  optimized {:.6e}  ratio {:.2}  ({} iterations, non-smooth {})",
            st.value,
            st.value / can,
            st.iteration,
            st.non_smooth
        );
    }
    Ok(())
}
