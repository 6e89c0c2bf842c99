//! Physical model parameters.
//!
//! All frequencies are in units of the cavity frequency (`omega_c = 1` in
//! every bundled recipe). Couplings are dipole-gauge values `g^D`; `phi_b`
//! is the phase of atom b's coupling in units of π.

use std::fmt;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::hilbert::FactorLabel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Gauge {
    Dipole,
    Coulomb,
}

impl fmt::Display for Gauge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Gauge::Dipole => "dipole",
            Gauge::Coulomb => "coulomb",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Qrm,
    Jcm,
    QrmNaiveCoulomb,
    Saa,
    SaaRwa,
    Gdm,
    GdmRwa,
}

impl ModelKind {
    pub fn is_rwa(self) -> bool {
        matches!(self, ModelKind::Jcm | ModelKind::SaaRwa | ModelKind::GdmRwa)
    }

    /// Two-level factors present, in canonical order.
    pub fn emitters(self) -> &'static [FactorLabel] {
        match self {
            ModelKind::Qrm | ModelKind::Jcm | ModelKind::QrmNaiveCoulomb => &[FactorLabel::AtomA],
            ModelKind::Saa | ModelKind::SaaRwa => &[FactorLabel::AtomA, FactorLabel::Sensor],
            ModelKind::Gdm | ModelKind::GdmRwa => &[FactorLabel::AtomA, FactorLabel::AtomB],
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ModelKind::Qrm => "qrm",
            ModelKind::Jcm => "jcm",
            ModelKind::QrmNaiveCoulomb => "qrm_naive_coulomb",
            ModelKind::Saa => "saa",
            ModelKind::SaaRwa => "saa_rwa",
            ModelKind::Gdm => "gdm",
            ModelKind::GdmRwa => "gdm_rwa",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BathKind {
    Flat,
    Ohmic,
}

/// Unit in which `kappa`, `gamma_*` and `p_inc` are given.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateUnit {
    /// Absolute, in units of `omega_c`.
    OmegaC,
    /// Multiples of the atom-a coupling `g_a`.
    GA,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub model: ModelKind,
    pub gauge: Gauge,
    /// Use the gauge-fixed Hamiltonian and corrected field operator. When
    /// false the dipole gauge keeps the bare `i(a†−a)` field and the Coulomb
    /// gauge uses the minimal-coupling Hamiltonian with an `A²` term.
    pub corrected: bool,
    pub omega_c: f64,
    pub omega_a: f64,
    pub omega_b: f64,
    pub omega_s: f64,
    pub g_a: f64,
    pub g_b: f64,
    pub g_s: f64,
    pub phi_b: f64,
    pub kappa: f64,
    pub gamma_a: f64,
    pub gamma_b: f64,
    pub gamma_s: f64,
    pub p_inc: f64,
    pub rate_unit: RateUnit,
    pub bath_cav: BathKind,
    pub bath_atom: BathKind,
    pub bath_sensor: BathKind,
    pub n_fock: usize,
    pub m_dressed: usize,
    /// Cross terms `(ω, ω′)` of the dissipators are kept only when
    /// `|ω − ω′| ≤ nonsecular_window · max(κ, γ…)`.
    pub nonsecular_window: f64,
    pub truncate_cross_terms: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            model: ModelKind::Qrm,
            gauge: Gauge::Dipole,
            corrected: true,
            omega_c: 1.0,
            omega_a: 1.0,
            omega_b: 1.0,
            omega_s: 1.0,
            g_a: 0.5,
            g_b: 0.0,
            g_s: 0.0,
            phi_b: 0.0,
            kappa: 0.25,
            gamma_a: 0.005,
            gamma_b: 0.005,
            gamma_s: 0.005,
            p_inc: 0.01,
            rate_unit: RateUnit::GA,
            bath_cav: BathKind::Flat,
            bath_atom: BathKind::Flat,
            bath_sensor: BathKind::Flat,
            n_fock: 200,
            m_dressed: 12,
            nonsecular_window: 10.0,
            truncate_cross_terms: true,
        }
    }
}

impl ModelConfig {
    pub fn eta_a(&self) -> f64 {
        self.g_a / self.omega_c
    }

    /// Complex normalized coupling of atom b, `|g_b|/ω_c · exp(iπφ)`.
    pub fn eta_b(&self) -> C64 {
        C64::from_polar(self.g_b / self.omega_c, std::f64::consts::PI * self.phi_b)
    }

    pub fn eta_s(&self) -> f64 {
        self.g_s / self.omega_c
    }

    fn rate_scale(&self) -> f64 {
        match self.rate_unit {
            RateUnit::OmegaC => 1.0,
            RateUnit::GA => self.g_a,
        }
    }

    pub fn kappa_abs(&self) -> f64 {
        self.kappa * self.rate_scale()
    }

    pub fn gamma_a_abs(&self) -> f64 {
        self.gamma_a * self.rate_scale()
    }

    pub fn gamma_b_abs(&self) -> f64 {
        self.gamma_b * self.rate_scale()
    }

    pub fn gamma_s_abs(&self) -> f64 {
        self.gamma_s * self.rate_scale()
    }

    pub fn p_inc_abs(&self) -> f64 {
        self.p_inc * self.rate_scale()
    }

    /// Bare transition frequency of a two-level factor.
    pub fn emitter_frequency(&self, label: FactorLabel) -> f64 {
        match label {
            FactorLabel::AtomA => self.omega_a,
            FactorLabel::AtomB => self.omega_b,
            FactorLabel::Sensor => self.omega_s,
            FactorLabel::Cavity => self.omega_c,
        }
    }

    /// Normalized (possibly complex) coupling of a two-level factor.
    pub fn emitter_eta(&self, label: FactorLabel) -> C64 {
        match label {
            FactorLabel::AtomA => C64::new(self.eta_a(), 0.0),
            FactorLabel::AtomB => self.eta_b(),
            FactorLabel::Sensor => C64::new(self.eta_s(), 0.0),
            FactorLabel::Cavity => C64::new(0.0, 0.0),
        }
    }

    pub fn total_dim(&self) -> usize {
        self.n_fock * (1 << self.model.emitters().len())
    }

    /// Largest configured dissipation rate, used for the non-secular window.
    pub fn max_rate(&self) -> f64 {
        let mut r = self.kappa_abs().max(self.gamma_a_abs());
        for label in self.model.emitters() {
            r = r.max(match label {
                FactorLabel::AtomB => self.gamma_b_abs(),
                FactorLabel::Sensor => self.gamma_s_abs(),
                _ => 0.0,
            });
        }
        r
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("omega_c", self.omega_c),
            ("omega_a", self.omega_a),
            ("omega_b", self.omega_b),
            ("omega_s", self.omega_s),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::config(format!("model.{name}"), format!("must be finite and > 0, got {v}")));
            }
        }
        let nonneg = [
            ("g_a", self.g_a),
            ("g_b", self.g_b),
            ("g_s", self.g_s),
            ("kappa", self.kappa),
            ("gamma_a", self.gamma_a),
            ("gamma_b", self.gamma_b),
            ("gamma_s", self.gamma_s),
            ("p_inc", self.p_inc),
            ("nonsecular_window", self.nonsecular_window),
        ];
        for (name, v) in nonneg {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::config(format!("model.{name}"), format!("must be finite and >= 0, got {v}")));
            }
        }
        if !self.phi_b.is_finite() {
            return Err(Error::config("model.phi_b", "must be finite"));
        }
        if self.n_fock < 2 {
            return Err(Error::config("model.n_fock", format!("must be >= 2, got {}", self.n_fock)));
        }
        if self.m_dressed == 0 || self.m_dressed > self.total_dim() {
            return Err(Error::config(
                "model.m_dressed",
                format!("must be in 1..={}, got {}", self.total_dim(), self.m_dressed),
            ));
        }
        if self.model.is_rwa() && self.gauge == Gauge::Coulomb {
            return Err(Error::config("model.gauge", format!("`{}` is only defined in the dipole gauge", self.model)));
        }
        if self.model == ModelKind::QrmNaiveCoulomb && self.gauge != Gauge::Coulomb {
            return Err(Error::config("model.gauge", "qrm_naive_coulomb requires gauge = \"coulomb\""));
        }
        if matches!(self.model, ModelKind::Saa | ModelKind::SaaRwa) && self.g_s > 0.01 * self.g_a {
            log::warn!(
                "sensor coupling g_s = {:.3e} exceeds 1% of g_a = {:.3e}; the sensor may perturb the system",
                self.g_s,
                self.g_a
            );
        }
        Ok(())
    }

    /// Stable digest of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        short_digest(json.as_bytes())
    }
}

pub(crate) fn short_digest(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    hex::encode(&digest[..8])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        ModelConfig::default().validate().unwrap();
    }

    #[test]
    fn rate_units() {
        let cfg = ModelConfig {
            g_a: 0.5,
            kappa: 0.25,
            ..Default::default()
        };
        assert!((cfg.kappa_abs() - 0.125).abs() < 1e-15);
        let abs = ModelConfig {
            rate_unit: RateUnit::OmegaC,
            ..cfg
        };
        assert_eq!(abs.kappa_abs(), 0.25);
    }

    #[test]
    fn complex_coupling() {
        let cfg = ModelConfig {
            model: ModelKind::Gdm,
            g_b: 0.5,
            phi_b: 0.5,
            ..Default::default()
        };
        let eta = cfg.eta_b();
        assert!(eta.re.abs() < 1e-15 && (eta.im - 0.5).abs() < 1e-15);
    }

    #[test]
    fn invalid_fields_report_paths() {
        let bad = ModelConfig {
            n_fock: 1,
            ..Default::default()
        };
        match bad.validate() {
            Err(Error::Config { field, .. }) => assert_eq!(field, "model.n_fock"),
            other => panic!("unexpected {other:?}"),
        }
        let bad = ModelConfig {
            model: ModelKind::Jcm,
            gauge: Gauge::Coulomb,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = ModelConfig {
            m_dressed: 1000,
            n_fock: 10,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = ModelConfig {
            kappa: -1.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn hash_is_stable_and_sensitive() {
        let a = ModelConfig::default();
        let b = ModelConfig::default();
        assert_eq!(a.hash(), b.hash());
        let c = ModelConfig {
            kappa: 0.3,
            ..Default::default()
        };
        assert_ne!(a.hash(), c.hash());
    }
}
