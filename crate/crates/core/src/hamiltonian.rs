//! System Hamiltonians for the single-atom, sensor-atom and two-atom models
//! in the dipole and Coulomb gauges, together with the gauge-appropriate
//! cavity field operator.
//!
//! Dipole gauge, with `g_k = ω_c η_k` and `η_k` possibly complex:
//!
//! ```text
//! H = ω_c a†a + Σ_k (ω_k/2) σ_z,k + Σ_k (i g_k a† − i g_k* a) σ_x,k
//!     + Σ_{k<l} 2 ω_c Re(η_k* η_l) σ_x,k σ_x,l
//! a′ = a + i Σ_k η_k σ_x,k,     Π = i(a′† − a′)
//! ```
//!
//! The gauge-fixed Coulomb Hamiltonian is `ω_c a†a + Σ_k (ω_k/2) W† σ_z,k W`
//! with `W = exp(−i Σ_k X_k σ_x,k)`, `X_k = η_k a† + η_k* a`. For real
//! couplings this is `σ_z,k cos(2η_k x) + σ_y,k sin(2η_k x)` with
//! `x = a + a†`, and the field operator is the bare `Π = i(a† − a)`.

use crate::config::{Gauge, ModelConfig, ModelKind};
use crate::dressed;
use crate::error::{Error, Result};
use crate::hilbert::{self, embed_product, pauli_matrix, FactorLabel, Operator, Pauli, SpaceLayout};
use crate::linalg::{self, c, CMat, C64, I};

pub use crate::config::ModelConfig as Config;

/// A built Hamiltonian together with the operators that couple to baths.
#[derive(Debug, Clone)]
pub struct GaugeModel {
    pub h: Operator,
    /// Field-like operator coupling to the cavity bath and used for spectra.
    pub pi: Operator,
    /// Cavity annihilation operator used to build `pi` (`a′` in the
    /// corrected dipole gauge, `a` otherwise).
    pub a_corrected: Operator,
    pub layout: SpaceLayout,
    pub config: ModelConfig,
    /// `σ_x` of every two-level factor, in layout order.
    pub dipoles: Vec<(FactorLabel, Operator)>,
}

impl GaugeModel {
    pub fn gauge(&self) -> Gauge {
        self.config.gauge
    }

    /// Operator coupling a given factor to its bath.
    pub fn channel_operator(&self, label: FactorLabel) -> Option<&Operator> {
        match label {
            FactorLabel::Cavity => Some(&self.pi),
            l => self.dipoles.iter().find(|(d, _)| *d == l).map(|(_, op)| op),
        }
    }
}

/// Builds the Hamiltonian selected by `config.model` and `config.gauge`.
pub fn build(config: &ModelConfig) -> Result<GaugeModel> {
    config.validate()?;
    let rwa = config.model.is_rwa();
    let corrected = config.corrected && config.model != ModelKind::QrmNaiveCoulomb;
    build_emitters(config, config.model.emitters(), config.gauge, rwa, corrected)
}

/// Quantum Rabi model in the dipole gauge.
pub fn build_qrm_dipole(config: &ModelConfig) -> Result<GaugeModel> {
    let cfg = ModelConfig {
        model: ModelKind::Qrm,
        gauge: Gauge::Dipole,
        ..config.clone()
    };
    build(&cfg)
}

/// Jaynes-Cummings model (dipole gauge, rotating-wave approximation).
pub fn build_jcm(config: &ModelConfig) -> Result<GaugeModel> {
    let cfg = ModelConfig {
        model: ModelKind::Jcm,
        gauge: Gauge::Dipole,
        ..config.clone()
    };
    build(&cfg)
}

/// Coulomb-gauge Rabi model: gauge-fixed when `fixed`, otherwise the
/// minimal-coupling form `ω_c a†a + (ω_a/2)σ_z + g^C (a+a†)σ_y + D (a+a†)²`.
pub fn build_qrm_coulomb(config: &ModelConfig, fixed: bool) -> Result<GaugeModel> {
    let cfg = ModelConfig {
        model: if fixed { ModelKind::Qrm } else { ModelKind::QrmNaiveCoulomb },
        gauge: Gauge::Coulomb,
        corrected: fixed,
        ..config.clone()
    };
    build(&cfg)
}

/// Rabi model plus a weakly coupled sensor atom.
pub fn build_saa(config: &ModelConfig, gauge: Gauge, rwa: bool) -> Result<GaugeModel> {
    let cfg = ModelConfig {
        model: if rwa { ModelKind::SaaRwa } else { ModelKind::Saa },
        gauge,
        ..config.clone()
    };
    build(&cfg)
}

/// Two dissimilar atoms, both ultrastrongly coupled.
pub fn build_gdm(config: &ModelConfig, gauge: Gauge, rwa: bool) -> Result<GaugeModel> {
    let cfg = ModelConfig {
        model: if rwa { ModelKind::GdmRwa } else { ModelKind::Gdm },
        gauge,
        ..config.clone()
    };
    build(&cfg)
}

struct Emitter {
    label: FactorLabel,
    omega: f64,
    eta: C64,
}

fn build_emitters(
    config: &ModelConfig,
    labels: &[FactorLabel],
    gauge: Gauge,
    rwa: bool,
    corrected: bool,
) -> Result<GaugeModel> {
    let layout = SpaceLayout::cavity_with(config.n_fock, labels)?;
    let emitters: Vec<Emitter> = labels
        .iter()
        .map(|&label| Emitter {
            label,
            omega: config.emitter_frequency(label),
            eta: config.emitter_eta(label),
        })
        .collect();
    let omega_c = config.omega_c;

    let a = hilbert::annihilation(&layout)?;
    let a_cav = hilbert::annihilation_matrix(config.n_fock);
    let mut h = omega_c * &hilbert::embed(a_cav.adjoint() * &a_cav, FactorLabel::Cavity, &layout)?;

    let mut dipoles = Vec::with_capacity(emitters.len());
    for e in &emitters {
        dipoles.push((e.label, hilbert::pauli(&layout, Pauli::X, e.label)?));
    }

    let a_corrected = match gauge {
        Gauge::Dipole => {
            dipole_terms(&mut h, &layout, &emitters, omega_c, config.n_fock, rwa)?;
            if corrected {
                let mut shift = Operator::zeros(&layout);
                for (e, (_, sx)) in emitters.iter().zip(&dipoles) {
                    shift = &shift + &sx.scale(I * e.eta);
                }
                &a + &shift
            } else {
                a.clone()
            }
        }
        Gauge::Coulomb => {
            if rwa {
                return Err(Error::config("model.gauge", "rotating-wave models are only defined in the dipole gauge"));
            }
            if corrected {
                coulomb_fixed_terms(&mut h, &layout, &emitters, config.n_fock)?;
            } else {
                coulomb_naive_terms(&mut h, &layout, &emitters, config.n_fock)?;
            }
            a.clone()
        }
    };

    let pi = (&a_corrected.adjoint() - &a_corrected).scale(I);

    let scale = linalg::max_abs(h.matrix()).max(1.0);
    let defect = h.hermiticity_defect();
    if defect > 1e-12 * scale {
        return Err(Error::numerical("hamiltonian", format!("H is not Hermitian (defect {defect:.3e})")));
    }

    let mut stored = config.clone();
    stored.gauge = gauge;
    Ok(GaugeModel {
        h,
        pi,
        a_corrected,
        layout,
        config: stored,
        dipoles,
    })
}

fn dipole_terms(
    h: &mut Operator,
    layout: &SpaceLayout,
    emitters: &[Emitter],
    omega_c: f64,
    n_fock: usize,
    rwa: bool,
) -> Result<()> {
    let a = hilbert::annihilation_matrix(n_fock);
    let ad = a.adjoint();
    for e in emitters {
        let sz = hilbert::pauli(layout, Pauli::Z, e.label)?;
        *h = &*h + &(0.5 * e.omega * &sz);
        let g = e.eta.scale(omega_c);
        let coupling = if rwa {
            // i(g a†σ⁻ − g* a σ⁺)
            &embed_product(&[(&ad * (I * g), FactorLabel::Cavity), (pauli_matrix(Pauli::Minus), e.label)], layout)?
                + &embed_product(&[(&a * (-I * g.conj()), FactorLabel::Cavity), (pauli_matrix(Pauli::Plus), e.label)], layout)?
        } else {
            let field = &ad * (I * g) - &a * (I * g.conj());
            embed_product(&[(field, FactorLabel::Cavity), (pauli_matrix(Pauli::X), e.label)], layout)?
        };
        *h = &*h + &coupling;
    }
    for (k, ek) in emitters.iter().enumerate() {
        for el in &emitters[k + 1..] {
            let strength = 2.0 * omega_c * (ek.eta.conj() * el.eta).re;
            if strength == 0.0 {
                continue;
            }
            let term = if rwa {
                let pm = embed_product(
                    &[(pauli_matrix(Pauli::Plus), ek.label), (pauli_matrix(Pauli::Minus), el.label)],
                    layout,
                )?;
                &pm + &pm.adjoint()
            } else {
                embed_product(&[(pauli_matrix(Pauli::X), ek.label), (pauli_matrix(Pauli::X), el.label)], layout)?
            };
            *h = &*h + &(strength * &term);
        }
    }
    Ok(())
}

/// Cavity-factor quadrature `X = η a† + η* a` on the truncated Fock space.
fn quadrature(n_fock: usize, eta: C64) -> CMat {
    let a = hilbert::annihilation_matrix(n_fock);
    a.adjoint() * eta + a * eta.conj()
}

fn coulomb_fixed_terms(h: &mut Operator, layout: &SpaceLayout, emitters: &[Emitter], n_fock: usize) -> Result<()> {
    let all_real = emitters.iter().all(|e| e.eta.im == 0.0);
    if all_real {
        // Each rotation only involves x = a + a†, so the factors commute and
        // every atom picks up its own cos/sin of 2η x.
        for e in emitters {
            let x2 = quadrature(n_fock, c(2.0 * e.eta.re));
            let cos = linalg::hermitian_function(&x2, |v| c(v.cos()), "cos(2ηx)")?;
            let sin = linalg::hermitian_function(&x2, |v| c(v.sin()), "sin(2ηx)")?;
            let zc = embed_product(&[(cos, FactorLabel::Cavity), (pauli_matrix(Pauli::Z), e.label)], layout)?;
            let ys = embed_product(&[(sin, FactorLabel::Cavity), (pauli_matrix(Pauli::Y), e.label)], layout)?;
            *h = &*h + &(0.5 * e.omega * &(&zc + &ys));
        }
        return Ok(());
    }
    let rotated = rotated_sigma_z(layout, emitters, n_fock)?;
    for (e, rz) in emitters.iter().zip(&rotated) {
        *h = &*h + &(0.5 * e.omega * rz);
    }
    Ok(())
}

/// `W† σ_z,k W` for every emitter, with `W = exp(−i Σ_k X_k σ_x,k)`.
///
/// `W` is block-diagonal in the joint `σ_x` eigenbasis: for sign pattern `s`
/// it acts on the cavity as `exp(−i Σ_k s_k X_k)`. The conjugation is then a
/// sum over pattern pairs of cavity products times atomic projector products.
pub fn rotated_sigma_z(layout: &SpaceLayout, emitters: &[impl EmitterLike], n_fock: usize) -> Result<Vec<Operator>> {
    let k = emitters.len();
    let patterns: Vec<Vec<f64>> = (0..(1usize << k))
        .map(|bits| (0..k).map(|i| if bits >> i & 1 == 1 { -1.0 } else { 1.0 }).collect())
        .collect();
    let mut cavity_blocks = Vec::with_capacity(patterns.len());
    for s in &patterns {
        let mut y = CMat::zeros(n_fock, n_fock);
        for (sign, e) in s.iter().zip(emitters) {
            y += quadrature(n_fock, e.eta()) * c(*sign);
        }
        cavity_blocks.push(linalg::hermitian_function(&y, |v| C64::from_polar(1.0, -v), "exp(-iX)")?);
    }
    let projector = |sign: f64| (CMat::identity(2, 2) + pauli_matrix(Pauli::X) * c(sign)) * c(0.5);
    let sz = pauli_matrix(Pauli::Z);

    let mut out = Vec::with_capacity(k);
    for target in 0..k {
        let mut acc = Operator::zeros(layout);
        for (p, sp) in patterns.iter().enumerate() {
            for (q, sq) in patterns.iter().enumerate() {
                let mut factors = Vec::with_capacity(k + 1);
                let mut vanishes = false;
                for (i, e) in emitters.iter().enumerate() {
                    let m = if i == target {
                        projector(sp[i]) * &sz * projector(sq[i])
                    } else {
                        projector(sp[i]) * projector(sq[i])
                    };
                    if linalg::max_abs(&m) == 0.0 {
                        vanishes = true;
                        break;
                    }
                    factors.push((m, e.label()));
                }
                if vanishes {
                    continue;
                }
                let cav = cavity_blocks[p].adjoint() * &cavity_blocks[q];
                factors.push((cav, FactorLabel::Cavity));
                acc = &acc + &embed_product(&factors, layout)?;
            }
        }
        out.push(acc);
    }
    Ok(out)
}

/// Minimal interface needed by [`rotated_sigma_z`].
pub trait EmitterLike {
    fn label(&self) -> FactorLabel;
    fn eta(&self) -> C64;
}

impl EmitterLike for Emitter {
    fn label(&self) -> FactorLabel {
        self.label
    }
    fn eta(&self) -> C64 {
        self.eta
    }
}

impl EmitterLike for (FactorLabel, C64) {
    fn label(&self) -> FactorLabel {
        self.0
    }
    fn eta(&self) -> C64 {
        self.1
    }
}

/// `Σ_k (ω_k/2)σ_z,k + ω_k X_k σ_y,k + ω_k X_k²`; for a single real coupling
/// this is `g^C (a+a†) σ_y + D (a+a†)²` with `g^C = η ω_a`, `D = (g^C)²/ω_a`.
fn coulomb_naive_terms(h: &mut Operator, layout: &SpaceLayout, emitters: &[Emitter], n_fock: usize) -> Result<()> {
    for e in emitters {
        let sz = hilbert::pauli(layout, Pauli::Z, e.label)?;
        *h = &*h + &(0.5 * e.omega * &sz);
        let x = quadrature(n_fock, e.eta);
        let coupling = embed_product(&[(x.clone(), FactorLabel::Cavity), (pauli_matrix(Pauli::Y), e.label)], layout)?;
        let diamagnetic = hilbert::embed(&x * &x, FactorLabel::Cavity, layout)?;
        *h = &*h + &(e.omega * &(&coupling + &diamagnetic));
    }
    Ok(())
}

/// Largest discrepancy between the lowest `config.m_dressed` ground-aligned
/// energies of two builds of the same system in different gauges.
pub fn gauge_transform_check(model_d: &GaugeModel, model_c: &GaugeModel) -> Result<f64> {
    let m = model_d.config.m_dressed.min(model_c.config.m_dressed);
    let ed = dressed::lowest_energies(model_d, m)?;
    let ec = dressed::lowest_energies(model_c, m)?;
    Ok(ed
        .iter()
        .zip(&ec)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::max_abs;

    fn qrm(eta: f64, n_fock: usize) -> ModelConfig {
        ModelConfig {
            g_a: eta,
            n_fock,
            ..Default::default()
        }
    }

    fn energies(model: &GaugeModel, m: usize) -> Vec<f64> {
        dressed::lowest_energies(model, m).unwrap()
    }

    fn raw_eigenvalues(model: &GaugeModel) -> Vec<f64> {
        linalg::hermitian_eigh(model.h.matrix(), "test").unwrap().0
    }

    #[test]
    fn decoupled_qrm_spectrum() {
        let model = build_qrm_dipole(&qrm(0.0, 6)).unwrap();
        let e = raw_eigenvalues(&model);
        let expected = [-0.5, 0.5, 0.5, 1.5, 1.5, 2.5];
        for (x, y) in e.iter().zip(expected) {
            assert!((x - y).abs() < 1e-12, "{e:?}");
        }
    }

    #[test]
    fn jcm_single_excitation_manifold() {
        for g in [0.05, 0.2, 0.5] {
            let model = build_jcm(&qrm(g, 8)).unwrap();
            let e = raw_eigenvalues(&model);
            // ground |0,g⟩ at −1/2; one-excitation pair at ω_c/2 ± g
            assert!((e[0] + 0.5).abs() < 1e-12);
            for target in [0.5 - g, 0.5 + g] {
                assert!(e.iter().any(|x| (x - target).abs() < 1e-12), "{e:?}");
            }
        }
    }

    #[test]
    fn every_build_is_hermitian() {
        for model in [ModelKind::Qrm, ModelKind::Jcm, ModelKind::Saa, ModelKind::SaaRwa, ModelKind::Gdm, ModelKind::GdmRwa] {
            let cfg = ModelConfig {
                model,
                g_b: 0.3,
                g_s: 0.0005,
                phi_b: 0.3,
                n_fock: 12,
                ..Default::default()
            };
            let built = build(&cfg).unwrap();
            assert!(built.h.is_hermitian(), "{model}");
            assert!(built.pi.is_hermitian(), "{model}");
        }
        for model in [ModelKind::Qrm, ModelKind::Saa, ModelKind::Gdm] {
            for corrected in [true, false] {
                let cfg = ModelConfig {
                    model,
                    gauge: Gauge::Coulomb,
                    corrected,
                    g_b: 0.3,
                    g_s: 0.0005,
                    phi_b: 0.3,
                    n_fock: 12,
                    ..Default::default()
                };
                let built = build(&cfg).unwrap();
                assert!(built.h.is_hermitian());
            }
        }
    }

    #[test]
    fn dipole_field_operator_form() {
        let cfg = ModelConfig {
            model: ModelKind::Gdm,
            g_a: 0.5,
            g_b: 0.3,
            phi_b: 0.25,
            n_fock: 6,
            ..Default::default()
        };
        let m = build(&cfg).unwrap();
        let a = hilbert::annihilation(&m.layout).unwrap();
        let sxa = hilbert::pauli(&m.layout, Pauli::X, FactorLabel::AtomA).unwrap();
        let sxb = hilbert::pauli(&m.layout, Pauli::X, FactorLabel::AtomB).unwrap();
        // Π = i(a† − a) + 2 Σ Re(η_k) σ_x,k
        let expected = (&a.adjoint() - &a).scale(I) + (2.0 * 0.5) * &sxa + (2.0 * cfg.eta_b().re) * &sxb;
        assert!(max_abs((&m.pi - &expected).matrix()) < 1e-14);
    }

    #[test]
    fn coulomb_generic_rotation_matches_trig_form() {
        let n = 10;
        let layout = SpaceLayout::cavity_with(n, &[FactorLabel::AtomA, FactorLabel::AtomB]).unwrap();
        let emitters = [(FactorLabel::AtomA, c(0.4)), (FactorLabel::AtomB, c(0.7))];
        let rotated = rotated_sigma_z(&layout, &emitters, n).unwrap();
        for ((label, eta), rz) in emitters.iter().zip(&rotated) {
            let x2 = quadrature(n, c(2.0 * eta.re));
            let cos = linalg::hermitian_function(&x2, |v| c(v.cos()), "cos").unwrap();
            let sin = linalg::hermitian_function(&x2, |v| c(v.sin()), "sin").unwrap();
            let expected = &embed_product(&[(cos, FactorLabel::Cavity), (pauli_matrix(Pauli::Z), *label)], &layout).unwrap()
                + &embed_product(&[(sin, FactorLabel::Cavity), (pauli_matrix(Pauli::Y), *label)], &layout).unwrap();
            assert!(max_abs((rz - &expected).matrix()) < 1e-12);
        }
    }

    #[test]
    fn jcm_and_qrm_agree_at_weak_coupling() {
        let q = energies(&build_qrm_dipole(&qrm(0.02, 20)).unwrap(), 5);
        let j = energies(&build_jcm(&qrm(0.02, 20)).unwrap(), 5);
        for (x, y) in q.iter().zip(&j) {
            assert!((x - y).abs() < 0.01);
        }
    }

    #[test]
    fn jcm_deviates_in_ultrastrong_regime() {
        let q = energies(&build_qrm_dipole(&qrm(0.5, 40)).unwrap(), 5);
        let j = energies(&build_jcm(&qrm(0.5, 40)).unwrap(), 5);
        let worst = q.iter().zip(&j).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        assert!(worst > 0.05, "{q:?} vs {j:?}");
    }

    #[test]
    fn decoupled_coulomb_variants() {
        for fixed in [true, false] {
            let m = build_qrm_coulomb(&qrm(0.0, 6), fixed).unwrap();
            let e = raw_eigenvalues(&m);
            assert!((e[0] + 0.5).abs() < 1e-12 && (e[1] - 0.5).abs() < 1e-12 && (e[3] - 1.5).abs() < 1e-12);
        }
    }

    #[test]
    fn gauge_fixed_coulomb_matches_dipole() {
        let cfg = qrm(0.5, 60);
        let d = build_qrm_dipole(&cfg).unwrap();
        let c = build_qrm_coulomb(&cfg, true).unwrap();
        let err = gauge_transform_check(&d, &c).unwrap();
        assert!(err < 1e-8, "{err}");
    }

    #[test]
    fn naive_coulomb_breaks_gauge_invariance() {
        let cfg = qrm(0.5, 60);
        let d = build_qrm_dipole(&cfg).unwrap();
        let c = build_qrm_coulomb(&cfg, false).unwrap();
        let ed = energies(&d, 5);
        let ec = energies(&c, 5);
        let worst = ed.iter().zip(&ec).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        assert!(worst > 0.01, "{worst}");
    }

    #[test]
    fn sensor_decoupled_doubles_spectrum() {
        let base = qrm(0.5, 30);
        let q = raw_eigenvalues(&build_qrm_dipole(&base).unwrap());
        let cfg = ModelConfig {
            g_s: 0.0,
            omega_s: 0.37,
            ..base
        };
        let s = raw_eigenvalues(&build_saa(&cfg, Gauge::Dipole, false).unwrap());
        let mut expected: Vec<f64> = q.iter().flat_map(|e| [e - 0.185, e + 0.185]).collect();
        expected.sort_by(f64::total_cmp);
        for (x, y) in s.iter().zip(&expected).take(20) {
            assert!((x - y).abs() < 1e-10);
        }
    }

    #[test]
    fn gdm_without_second_coupling_is_qrm_plus_free_atom() {
        let base = qrm(0.5, 30);
        let q = raw_eigenvalues(&build_qrm_dipole(&base).unwrap());
        let cfg = ModelConfig {
            g_b: 0.0,
            omega_b: 0.61,
            ..base
        };
        for gauge in [Gauge::Dipole, Gauge::Coulomb] {
            let s = raw_eigenvalues(&build_gdm(&cfg, gauge, false).unwrap());
            let mut expected: Vec<f64> = q.iter().flat_map(|e| [e - 0.305, e + 0.305]).collect();
            expected.sort_by(f64::total_cmp);
            // the gauges differ by a dropped constant
            let shift = s[0] - expected[0];
            for (x, y) in s.iter().zip(&expected).take(12) {
                assert!((x - y - shift).abs() < 1e-8, "{gauge}: {x} vs {y}");
            }
        }
    }

    #[test]
    fn rwa_conserves_excitations() {
        for model in [ModelKind::Jcm, ModelKind::SaaRwa, ModelKind::GdmRwa] {
            let cfg = ModelConfig {
                model,
                g_b: 0.4,
                g_s: 0.0005,
                phi_b: 0.2,
                n_fock: 10,
                ..Default::default()
            };
            let m = build(&cfg).unwrap();
            let n = hilbert::number_operator(&m.layout);
            let comm = m.h.commutator(&n);
            assert!(comm.norm() < 1e-10 * m.h.norm(), "{model}");
        }
    }

    #[test]
    fn complex_phase_coulomb_matches_dipole() {
        let cfg = ModelConfig {
            model: ModelKind::Gdm,
            g_a: 0.5,
            g_b: 0.5,
            phi_b: 0.3,
            omega_b: 0.5,
            n_fock: 50,
            ..Default::default()
        };
        let d = build_gdm(&cfg, Gauge::Dipole, false).unwrap();
        let c = build_gdm(&cfg, Gauge::Coulomb, false).unwrap();
        let err = gauge_transform_check(&d, &c).unwrap();
        assert!(err < 1e-6, "{err}");
    }
}
