use parentgap::linalg::{self, c, CMat, C64};
use parentgap::model::{Family, Model};
use parentgap::opt::{generator_gradient, transport_s};
use parentgap::parent::assemble;
use parentgap::run::{csv_body, read_csv, Row};
use parentgap::spectra::{chi_matrix, spectral_gap_dense};
use parentgap::symmetry::{build_sector, symmetric_s_template};
use proptest::prelude::*;

fn herm_from(x: &[f64], m: usize) -> CMat {
    linalg::herm_from_coords(x, m)
}

/// Positive trace-one matrix `e^{-B}/tr e^{-B}`.
fn gibbs(b: &CMat) -> CMat {
    let e = linalg::expm_herm(&linalg::scale(b, c(-1.0)));
    let tr = linalg::trace(&e).re;
    linalg::scale(&e, c(1.0 / tr))
}

fn model_strategy() -> impl Strategy<Value = Model> {
    prop_oneof![Just(Model::Aklt), Just(Model::Ghz), Just(Model::Random)]
}

fn lambda_for(model: Model, u: f64) -> f64 {
    match model {
        Model::Aklt => u,
        Model::Ghz => 2.0 * u - 1.0,
        Model::Random => 2.0 * u,
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, ..ProptestConfig::default() })]

    #[test]
    fn herm_coords_round_trip(x in prop::collection::vec(-2.0f64..2.0, 16)) {
        let a = herm_from(&x, 4);
        prop_assert!(linalg::hermiticity_defect(&a) < 1e-15);
        let y = linalg::herm_coords(&a);
        for (p, q) in x.iter().zip(&y) {
            prop_assert!((p - q).abs() < 1e-14);
        }
    }

    #[test]
    fn mps_is_zero_energy_ground_state(
        model in model_strategy(),
        u in 0.0f64..1.0,
        b in prop::collection::vec(-1.5f64..1.5, 144),
    ) {
        let fam = Family::new(model, 7, 0.0);
        let lambda = lambda_for(model, u);
        let basis = fam.basis(lambda).unwrap();
        let m = basis.m();
        let s = gibbs(&herm_from(&b[..m * m], m));
        let n = 6;
        let chain = model.chain_sites(n).unwrap();
        let h = assemble(&basis, &s, chain, None).unwrap();
        let psi = fam.ground_state(lambda, n).unwrap();
        prop_assert!(h.expectation(&psi).re.abs() < 1e-10);
        let g = spectral_gap_dense(&h.to_dense(), 1e-8).unwrap();
        prop_assert!(g.e0.abs() < 1e-10, "E0 = {}", g.e0);
    }

    #[test]
    fn gap_is_concave_in_s(
        s0 in (0.01f64..0.245, 0.01f64..0.245),
        s1 in (0.01f64..0.245, 0.01f64..0.245),
        t in 0.0f64..1.0,
        lambda in 0.0f64..1.0,
    ) {
        let tpl = symmetric_s_template(Model::Aklt).unwrap();
        let basis = Family::aklt().basis(lambda).unwrap();
        let w = build_sector(Model::Aklt, 6, &Model::Aklt.ground_sector()).unwrap();
        let gap = |p: [f64; 2]| {
            let s = tpl.embed(&p).unwrap();
            let h = assemble(&basis, &s, 6, Some(&w)).unwrap().to_dense();
            spectral_gap_dense(&h, 1e-9).unwrap().gap
        };
        let mid = [(1.0 - t) * s0.0 + t * s1.0, (1.0 - t) * s0.1 + t * s1.1];
        let lhs = gap(mid);
        let rhs = (1.0 - t) * gap([s0.0, s0.1]) + t * gap([s1.0, s1.1]);
        prop_assert!(lhs >= rhs - 1e-9, "{lhs} < {rhs}");
    }

    #[test]
    fn chi_pairs_to_the_gap(u in 0.0f64..1.0, b in prop::collection::vec(-1.0f64..1.0, 16)) {
        let lambda = 2.0 * u - 1.0;
        let fam = Family::ghz();
        let basis = fam.basis(lambda).unwrap();
        let s = gibbs(&herm_from(&b, 4));
        let w = build_sector(Model::Ghz, 7, &Model::Ghz.ground_sector()).unwrap();
        let h = assemble(&basis, &s, 7, Some(&w)).unwrap().to_dense();
        let g = spectral_gap_dense(&h, 1e-9).unwrap();
        let chi = chi_matrix(&g.excited, &basis, 7, Some(&w)).unwrap();
        prop_assert!((chi.pair_with(&s) - g.e1).abs() < 1e-10);
        prop_assert!(linalg::hermiticity_defect(&chi.entries) < 1e-12);
    }

    #[test]
    fn generator_gradient_matches_fd(b in prop::collection::vec(-1.0f64..1.0, 9), x in prop::collection::vec(-1.0f64..1.0, 9)) {
        let m = 3;
        let chi = herm_from(&x, m);
        let delta = |p: &[f64]| linalg::pair(&gibbs(&herm_from(p, m)), &chi).re;
        let g = generator_gradient(&herm_from(&b, m), &chi);
        for j in 0..b.len() {
            let h = 1e-6;
            let mut p = b.clone();
            let mut q = b.clone();
            p[j] += h;
            q[j] -= h;
            let fd = (delta(&p) - delta(&q)) / (2.0 * h);
            prop_assert!((fd - g[j]).abs() < 1e-8, "j={j}: {fd} vs {}", g[j]);
        }
    }

    #[test]
    fn sector_lift_is_an_isometry(n in 3usize..8, seed in 0u64..1000) {
        let w = build_sector(Model::Ghz, n, &Model::Ghz.ground_sector()).unwrap();
        let x: Vec<C64> = (0..w.d_g).map(|i| C64::new(((i as u64 * 31 + seed) % 17) as f64 - 8.0, (seed % 5) as f64)).collect();
        let y = w.lift(&x);
        prop_assert!((linalg::norm(&y) - linalg::norm(&x)).abs() < 1e-10 * linalg::norm(&x).max(1.0));
        let z = w.restrict(&y);
        for (a, b) in x.iter().zip(&z) {
            prop_assert!((a - b).norm() < 1e-10);
        }
    }

    #[test]
    fn transport_keeps_s_positive_and_normalized(a in 0.05f64..0.95, b in 0.05f64..0.95, d in prop::collection::vec(0.01f64..1.0, 5)) {
        let fam = Family::aklt();
        let tr: f64 = d.iter().sum();
        let s = linalg::diag(&d.iter().map(|x| x / tr).collect::<Vec<_>>());
        let t = transport_s(&s, &fam.basis(a).unwrap(), &fam.basis(b).unwrap());
        prop_assert!((linalg::trace(&t).re - 1.0).abs() < 1e-12);
        prop_assert!(linalg::herm_eigenvalues(&t)[0] > 0.0);
    }

    #[test]
    fn csv_round_trips_bitwise(
        vals in prop::collection::vec((any::<f64>(), -1e3f64..1e3, 0usize..1000, any::<bool>()), 1..6),
    ) {
        let rows: Vec<Row> = vals
            .iter()
            .map(|&(x, y, k, conv)| Row {
                lambda: y,
                gap_canonical: x,
                gap_optimized: y * 1e-7,
                n_iter: k,
                converged: conv,
                grad_norm: x.abs(),
                s_params: vec![x, y],
                ground_degeneracy: 1,
                canonical_ground_degeneracy: 1,
            })
            .collect();
        let parsed = read_csv(&csv_body(&rows).unwrap()).unwrap();
        for (r, p) in rows.iter().zip(&parsed) {
            let same = |a: f64, b: f64| a.to_bits() == b.to_bits() || (a.is_nan() && b.is_nan());
            prop_assert!(same(r.lambda, p.0) && same(r.gap_canonical, p.1) && same(r.gap_optimized, p.2));
            prop_assert!(r.n_iter == p.3 && r.converged == p.4 && same(r.grad_norm, p.5));
            prop_assert!(same(r.s_params[0], p.6[0]) && same(r.s_params[1], p.6[1]));
        }
    }
}
