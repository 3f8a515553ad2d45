//! The GHZ point of the GHZ–cluster family: the full-space ground level is
//! two-fold degenerate (gap 0) while the symmetric sector has a unique ground
//! state and a positive gap.
//!
//! `cargo run --release --example ghz_degeneracy`

use parentgap::model::{Family, Model};
use parentgap::parent::assemble;
use parentgap::spectra::{default_deg_tol, spectral_gap};
use parentgap::symmetry::build_sector;

fn main() -> parentgap::Result<()> {
    let fam = Family::ghz();
    for n in [6, 8, 10] {
        for lambda in [-1.0, -0.5, 0.0, 0.5, 1.0] {
            let basis = fam.basis(lambda)?;
            let s = fam.canonical_s(lambda, &basis);
            let full = assemble(&basis, &s, n, None)?;
            let g_full = spectral_gap(&full, default_deg_tol(&full))?;
            let w = build_sector(Model::Ghz, n, &Model::Ghz.ground_sector())?;
            let sec = assemble(&basis, &s, n, Some(&w))?;
            let g_sec = spectral_gap(&sec, default_deg_tol(&sec))?;
            println!(
                "N={n:<2} λ={lambda:>5.2}  full: gap {:.3e} (ground degeneracy {})  sector[{}]: gap {:.6e}",
                g_full.gap, g_full.ground_degeneracy, w.d_g, g_sec.gap
            );
        }
    }
    Ok(())
}
