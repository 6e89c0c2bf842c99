use proptest::prelude::*;

use uscqed::config::{BathKind, Gauge, ModelConfig, ModelKind, RateUnit};
use uscqed::sweep::{read_csv, Cell, SweepRange, Table};
use uscqed::{dressed, gme, hamiltonian, linalg, spectra};

fn model_kind() -> impl Strategy<Value = ModelKind> {
    prop_oneof![
        Just(ModelKind::Qrm),
        Just(ModelKind::Jcm),
        Just(ModelKind::Saa),
        Just(ModelKind::SaaRwa),
        Just(ModelKind::Gdm),
        Just(ModelKind::GdmRwa),
    ]
}

fn bath() -> impl Strategy<Value = BathKind> {
    prop_oneof![Just(BathKind::Flat), Just(BathKind::Ohmic)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn hamiltonians_are_hermitian(
        kind in model_kind(),
        coulomb in any::<bool>(),
        corrected in any::<bool>(),
        g_a in 0.0..1.0f64,
        g_b in 0.0..1.0f64,
        phi in 0.0..1.0f64,
        omega_a in 0.2..2.0f64,
        omega_b in 0.2..2.0f64,
    ) {
        let gauge = if coulomb && !kind.is_rwa() { Gauge::Coulomb } else { Gauge::Dipole };
        let cfg = ModelConfig {
            model: kind,
            gauge,
            corrected,
            g_a,
            g_b,
            g_s: 0.001 * g_a,
            phi_b: phi,
            omega_a,
            omega_b,
            n_fock: 12,
            m_dressed: 6,
            ..Default::default()
        };
        let model = hamiltonian::build(&cfg).unwrap();
        let scale = linalg::max_abs(model.h.matrix()).max(1.0);
        prop_assert!(model.h.hermiticity_defect() < 1e-12 * scale);
        prop_assert!(model.pi.hermiticity_defect() < 1e-12 * scale);
    }

    #[test]
    fn rabi_levels_are_gauge_invariant(eta in 0.0..0.6f64, omega_a in 0.5..1.5f64) {
        let d = ModelConfig { g_a: eta, omega_a, n_fock: 80, m_dressed: 4, ..Default::default() };
        let c = ModelConfig { gauge: Gauge::Coulomb, ..d.clone() };
        let ed = dressed::lowest_energies(&hamiltonian::build(&d).unwrap(), 4).unwrap();
        let ec = dressed::lowest_energies(&hamiltonian::build(&c).unwrap(), 4).unwrap();
        for (a, b) in ed.iter().zip(&ec) {
            prop_assert!((a - b).abs() < 1e-6, "{a} vs {b}");
        }
    }

    #[test]
    fn two_atom_levels_are_symmetric_in_phase(phi in 0.0..0.5f64, omega_b in 0.3..1.8f64) {
        let cfg = |p: f64| ModelConfig {
            model: ModelKind::Gdm,
            g_a: 0.5,
            g_b: 0.5,
            phi_b: p,
            omega_b,
            n_fock: 40,
            m_dressed: 7,
            ..Default::default()
        };
        let a = dressed::lowest_energies(&hamiltonian::build(&cfg(phi)).unwrap(), 7).unwrap();
        let b = dressed::lowest_energies(&hamiltonian::build(&cfg(1.0 - phi)).unwrap(), 7).unwrap();
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn generator_preserves_trace_and_steady_state_is_physical(
        eta in 0.05..0.8f64,
        kappa in 0.01..0.5f64,
        gamma in 0.0..0.05f64,
        p_inc in 0.0..0.05f64,
        cav in bath(),
        atom in bath(),
        secular in any::<bool>(),
    ) {
        let cfg = ModelConfig {
            g_a: eta,
            kappa,
            gamma_a: gamma,
            p_inc,
            rate_unit: RateUnit::OmegaC,
            bath_cav: cav,
            bath_atom: atom,
            n_fock: 24,
            m_dressed: 6,
            ..Default::default()
        };
        let model = hamiltonian::build(&cfg).unwrap();
        let basis = dressed::diagonalize(&model, 6).unwrap();
        let cross = if secular { gme::CrossTerms::Secular } else { gme::CrossTerms::All };
        let l = gme::assemble_liouvillian_with(&model, &basis, cross).unwrap();
        prop_assert!(l.trace_defect() < 1e-10);
        let ss = gme::steady_state(&l).unwrap();
        prop_assert!(ss.residual < 1e-10);
        prop_assert!((linalg::trace(&ss.rho).re - 1.0).abs() < 1e-10);
        prop_assert!(linalg::hermiticity_defect(&ss.rho) < 1e-10);
        prop_assert!(ss.min_eigenvalue > -1e-8);
    }

    #[test]
    fn csv_round_trip_is_bit_exact(xs in proptest::collection::vec(-1e300..1e300f64, 1..20)) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.csv");
        let mut t = Table::new(&["i", "x"]);
        for (i, x) in xs.iter().enumerate() {
            t.push(vec![Cell::Int(i as i64), Cell::Float(*x)]);
        }
        t.write_csv(&path).unwrap();
        let (_, rows) = read_csv(&path).unwrap();
        for (row, x) in rows.iter().zip(&xs) {
            prop_assert_eq!(row[1].parse::<f64>().unwrap().to_bits(), x.to_bits());
        }
    }

    #[test]
    fn sweep_ranges_hit_both_ends(start in 0.0..2.0f64, span in 0.0..2.0f64, points in 2usize..200) {
        let r = SweepRange { start, stop: start + span, points };
        let v = r.values();
        prop_assert_eq!(v.len(), points);
        prop_assert_eq!(v[0], start);
        prop_assert_eq!(*v.last().unwrap(), start + span);
        prop_assert!(v.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn normalized_spectra_peak_at_one(eta in 0.1..0.7f64) {
        let cfg = ModelConfig { g_a: eta, n_fock: 30, m_dressed: 6, ..Default::default() };
        let grid = spectra::omega_grid(0.05, 2.2, 60);
        let s = spectra::compute_qrt(&cfg, &grid).unwrap().spectrum.normalized();
        let max = s.intensity.iter().cloned().fold(0.0, f64::max);
        prop_assert!((max - 1.0).abs() < 1e-12);
        prop_assert!(s.intensity.iter().all(|&v| v >= 0.0));
    }
}

#[test]
fn config_hash_tracks_content() {
    let a = ModelConfig::default();
    let b = a.clone();
    let c = ModelConfig {
        kappa: a.kappa * 1.1,
        ..a.clone()
    };
    assert_eq!(a.hash(), b.hash());
    assert_ne!(a.hash(), c.hash());
}
