//! Checks the optimality conditions at a BFGS optimum: χ is diagonal in the
//! eigenbasis of S_opt and constant (= Δ_opt) on its support.
//!
//! `cargo run --release --example optimality_certificate -- [lambda_aklt] [lambda_ghz]`

use parentgap::model::{Family, Model};
use parentgap::opt::{maximize, MaximizeOptions, Objective, ObjectiveOptions};
use parentgap::symmetry::{build_sector, symmetric_s_template};
use std::sync::Arc;

fn main() -> parentgap::Result<()> {
    let arg = |i: usize, default: f64| std::env::args().nth(i).and_then(|a| a.parse().ok()).unwrap_or(default);
    let n = 8;
    for (model, lambda) in [(Model::Aklt, arg(1, 0.7)), (Model::Ghz, arg(2, -0.5))] {
        let sector = Arc::new(build_sector(model, n, &model.ground_sector())?);
        let fam = Family::new(model, 0, 0.0);
        let obj = Objective::new(&fam, lambda, n, Some(sector), Some(symmetric_s_template(model)?), ObjectiveOptions::default())?;
        let st = maximize(&obj, &obj.canonical_params()?, &MaximizeOptions::default())?;
        let c = &st.certificate;
        println!("{} λ={lambda}: Δ_opt = {:.10}, converged {}", model.name(), st.value, st.converged);
        println!("  off-diagonal |χ|    {:.2e}", c.off_diag_norm);
        println!("  spread on supp(S)   {:.2e}", c.eigen_spread);
        println!("  common eigenvalue   {:.10}", c.common_eigenvalue);
        println!("  rank S / rank χ     {} / {}", c.s_rank, c.chi_rank);
        println!("  passes              {:?}", c.passes);
    }
    Ok(())
}
