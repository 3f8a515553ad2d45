//! Dimensions of the ground-state symmetry sectors for the AKLT and GHZ chains.
//!
//! `cargo run --release --example sector_dims`

use parentgap::model::Model;
use parentgap::symmetry::build_sector;

fn main() -> parentgap::Result<()> {
    for (model, sizes) in [(Model::Aklt, 2..=10), (Model::Ghz, 3..=12)] {
        println!("{} sector {:?}", model.name(), model.ground_sector());
        println!("{:>4} {:>10} {:>8}", "N", "full", "sector");
        for n in sizes {
            let w = build_sector(model, n, &model.ground_sector())?;
            println!("{n:>4} {:>10} {:>8}", w.full_dim, w.d_g);
        }
        println!();
    }
    Ok(())
}
