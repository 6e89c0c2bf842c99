//! Non-secular generalized master equation in the dressed basis.
//!
//! Density matrices are vectorized row-major (`vec[i·M + j] = ρ_ij`), so a
//! superoperator `ρ ↦ AρB` is `A ⊗ Bᵀ`.

use nalgebra::SVD;
use serde::Serialize;

use crate::config::{BathKind, ModelConfig};
use crate::dressed::{self, DressedBasis, TransitionSet};
use crate::error::{Error, Result};
use crate::hamiltonian::GaugeModel;
use crate::hilbert::FactorLabel;
use crate::linalg::{self, c, CMat, CVec, C64, I};

/// Zero-temperature bath with rate `Γ(ω)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BathSpec {
    pub kind: BathKind,
    pub base_rate: f64,
    pub reference_frequency: f64,
}

impl BathSpec {
    pub fn flat(rate: f64) -> Self {
        BathSpec {
            kind: BathKind::Flat,
            base_rate: rate,
            reference_frequency: 1.0,
        }
    }

    pub fn rate(&self, omega: f64) -> f64 {
        match self.kind {
            BathKind::Flat => self.base_rate,
            BathKind::Ohmic => self.base_rate * omega / self.reference_frequency,
        }
    }
}

/// Which `(ω, ω′)` cross terms of a dissipator are kept.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CrossTerms {
    All,
    /// Keep pairs with `|ω − ω′| ≤ width`.
    Window(f64),
    /// Diagonal terms only (plain Lindblad form).
    Secular,
}

impl CrossTerms {
    fn keeps(self, p: usize, q: usize, wp: f64, wq: f64) -> bool {
        match self {
            CrossTerms::All => true,
            CrossTerms::Window(width) => (wp - wq).abs() <= width,
            CrossTerms::Secular => p == q,
        }
    }

    pub fn from_config(cfg: &ModelConfig) -> Self {
        if cfg.truncate_cross_terms {
            CrossTerms::Window(cfg.nonsecular_window * cfg.max_rate())
        } else {
            CrossTerms::All
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ChannelInfo {
    pub channel: FactorLabel,
    pub bath: BathSpec,
    pub transitions: usize,
}

#[derive(Debug, Clone)]
pub struct Liouvillian {
    pub matrix: CMat,
    pub m: usize,
    pub channels: Vec<ChannelInfo>,
    pub p_inc: f64,
}

impl Liouvillian {
    pub fn apply(&self, rho: &CMat) -> CMat {
        linalg::unvectorize(&(&self.matrix * linalg::vectorize(rho)), self.m)
    }

    /// `max_k |Σ_i L[(i,i), k]|`, zero for a trace-preserving generator.
    pub fn trace_defect(&self) -> f64 {
        let m = self.m;
        (0..m * m)
            .map(|k| (0..m).map(|i| self.matrix[(i * m + i, k)]).sum::<C64>().norm())
            .fold(0.0, f64::max)
    }
}

/// `ρ ↦ −i[H, ρ]`.
pub fn coherent_part(h: &CMat) -> CMat {
    let id = CMat::identity(h.nrows(), h.ncols());
    (linalg::sandwich(h, &id) - linalg::sandwich(&id, h)) * (-I)
}

/// `½ Σ_{p,q} Γ(ω_p)[X_p ρ X_q† − X_q† X_p ρ] + Γ(ω_q)[X_p ρ X_q† − ρ X_q† X_p]`
/// over the transitions of `set`, with `X_p = c_p |j_p⟩⟨k_p|`.
pub fn build_dissipator(set: &TransitionSet, bath: &BathSpec, cross: CrossTerms) -> CMat {
    let m = set.m;
    let mut sup = CMat::zeros(m * m, m * m);
    if set.is_empty() || bath.base_rate == 0.0 {
        return sup;
    }
    let rates: Vec<f64> = set.transitions.iter().map(|t| bath.rate(t.omega)).collect();
    let mut left = CMat::zeros(m, m);
    let mut right = CMat::zeros(m, m);
    for (p, tp) in set.transitions.iter().enumerate() {
        for (q, tq) in set.transitions.iter().enumerate() {
            if !cross.keeps(p, q, tp.omega, tq.omega) {
                continue;
            }
            let cc = tp.element * tq.element.conj();
            // X_p ρ X_q† = c_p c_q* ρ[k_p, k_q] |j_p⟩⟨j_q|
            sup[(tp.lower * m + tq.lower, tp.upper * m + tq.upper)] += cc.scale(0.5 * (rates[p] + rates[q]));
            // X_q† X_p = c_q* c_p |k_q⟩⟨k_p| when j_p = j_q
            if tp.lower == tq.lower {
                left[(tq.upper, tp.upper)] += cc.scale(rates[p]);
                right[(tq.upper, tp.upper)] += cc.scale(rates[q]);
            }
        }
    }
    let id = CMat::identity(m, m);
    sup -= (linalg::sandwich(&left, &id) + linalg::sandwich(&id, &right)) * c(0.5);
    sup
}

/// `D[O]ρ = ½(2OρO† − ρO†O − O†Oρ)`.
pub fn lindblad(op: &CMat) -> CMat {
    let id = CMat::identity(op.nrows(), op.ncols());
    let od = op.adjoint();
    let odo = &od * op;
    linalg::sandwich(op, &od) - (linalg::sandwich(&odo, &id) + linalg::sandwich(&id, &odo)) * c(0.5)
}

/// `½ P_inc D[X⁻_cav]`, an energy-raising incoherent pump.
pub fn build_pump(cavity: &TransitionSet, p_inc: f64) -> CMat {
    let m = cavity.m;
    if p_inc == 0.0 {
        return CMat::zeros(m * m, m * m);
    }
    lindblad(&cavity.raising()) * c(0.5 * p_inc)
}

/// Bath attached to `channel` by the configuration.
pub fn bath_for(cfg: &ModelConfig, channel: FactorLabel) -> BathSpec {
    let (kind, base_rate, reference_frequency) = match channel {
        FactorLabel::Cavity => (cfg.bath_cav, cfg.kappa_abs(), cfg.omega_c),
        FactorLabel::AtomA => (cfg.bath_atom, cfg.gamma_a_abs(), cfg.omega_a),
        FactorLabel::AtomB => (cfg.bath_atom, cfg.gamma_b_abs(), cfg.omega_b),
        FactorLabel::Sensor => (cfg.bath_sensor, cfg.gamma_s_abs(), cfg.omega_c),
    };
    BathSpec {
        kind,
        base_rate,
        reference_frequency,
    }
}

/// Full generator with the configured cross-term window.
pub fn assemble_liouvillian(model: &GaugeModel, basis: &DressedBasis) -> Result<Liouvillian> {
    assemble_liouvillian_with(model, basis, CrossTerms::from_config(&model.config))
}

pub fn assemble_liouvillian_with(model: &GaugeModel, basis: &DressedBasis, cross: CrossTerms) -> Result<Liouvillian> {
    if basis.gauge != model.config.gauge {
        return Err(Error::config("model.gauge", "dressed basis and model were built in different gauges"));
    }
    let cfg = &model.config;
    let m = basis.m();
    let h = CMat::from_diagonal(&CVec::from_iterator(m, basis.energies.iter().map(|&e| c(e))));
    let mut matrix = coherent_part(&h);
    let mut channels = Vec::new();
    let mut cavity = None;
    for label in std::iter::once(FactorLabel::Cavity).chain(model.layout.atomic_labels()) {
        let set = dressed::jump_operators(basis, model, label)?;
        let bath = bath_for(cfg, label);
        matrix += build_dissipator(&set, &bath, cross);
        channels.push(ChannelInfo {
            channel: label,
            bath,
            transitions: set.transitions.len(),
        });
        if label == FactorLabel::Cavity {
            cavity = Some(set);
        }
    }
    let cavity = cavity.expect("cavity channel always present");
    matrix += build_pump(&cavity, cfg.p_inc_abs());
    Ok(Liouvillian {
        matrix,
        m,
        channels,
        p_inc: cfg.p_inc_abs(),
    })
}

#[derive(Debug, Clone)]
pub struct SteadyState {
    pub rho: CMat,
    /// `max |L ρ|`.
    pub residual: f64,
    /// Smallest eigenvalue of `ρ`; slightly negative values are reported,
    /// not clipped.
    pub min_eigenvalue: f64,
}

/// Number of singular values of `L` below `tol · σ_max`.
pub fn null_space_dimension(l: &Liouvillian, tol: f64) -> usize {
    let svd = SVD::new(l.matrix.clone(), false, false);
    let smax = svd.singular_values.iter().fold(0.0_f64, |a, &s| a.max(s));
    svd.singular_values.iter().filter(|&&s| s <= tol * smax).count()
}

/// Solves `Lρ = 0` with `Tr ρ = 1` substituted for the first equation.
pub fn steady_state(l: &Liouvillian) -> Result<SteadyState> {
    let m = l.m;
    let n = m * m;
    let mut a = l.matrix.clone();
    for k in 0..n {
        a[(0, k)] = C64::new(0.0, 0.0);
    }
    for i in 0..m {
        a[(0, i * m + i)] = c(1.0);
    }
    let mut rhs = CVec::zeros(n);
    rhs[0] = c(1.0);
    let solved = a.lu().solve(&rhs).filter(|x| x.iter().all(|z| z.re.is_finite() && z.im.is_finite()));
    let scale = linalg::max_abs(&l.matrix).max(1.0);
    let candidate = solved.map(|x| {
        let r = linalg::unvectorize(&x, m);
        let mut rho = (&r + r.adjoint()) * c(0.5);
        let tr = linalg::trace(&rho);
        rho /= tr;
        rho
    });
    let accept = |rho: &CMat| {
        let residual = linalg::max_abs(&l.apply(rho));
        (residual <= 1e-9 * scale, residual)
    };
    match candidate {
        Some(rho) if accept(&rho).0 => {
            let residual = accept(&rho).1;
            let (eigs, _) = linalg::hermitian_eigh(&rho, "steady_state positivity")?;
            let min_eigenvalue = eigs.first().copied().unwrap_or(0.0);
            if min_eigenvalue < -1e-8 {
                log::warn!("steady state has negative eigenvalue {min_eigenvalue:.3e}");
            }
            Ok(SteadyState {
                rho,
                residual,
                min_eigenvalue,
            })
        }
        _ => {
            let dimension = null_space_dimension(l, 1e-11);
            if dimension > 1 {
                Err(Error::DegenerateSteadyState { dimension })
            } else {
                Err(Error::numerical("steady_state", "linear solve failed to produce a stationary state"))
            }
        }
    }
}

/// `ρ(t) = exp(L t) ρ0` by a dense superoperator exponential.
pub fn evolve(l: &Liouvillian, rho0: &CMat, t: f64) -> Result<CMat> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::numerical("evolve", format!("time must be finite and >= 0, got {t}")));
    }
    if t == 0.0 {
        return Ok(rho0.clone());
    }
    let prop = propagator(l, t);
    Ok(linalg::unvectorize(&(prop * linalg::vectorize(rho0)), l.m))
}

/// `exp(L t)` as a dense matrix.
pub fn propagator(l: &Liouvillian, t: f64) -> CMat {
    (&l.matrix * c(t)).exp()
}

/// `ρ(t)` by adaptive Dormand-Prince integration of `dρ/dt = Lρ`.
pub fn evolve_rk45(l: &Liouvillian, rho0: &CMat, t: f64, rtol: f64, atol: f64) -> Result<CMat> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::numerical("evolve_rk45", format!("time must be finite and >= 0, got {t}")));
    }
    const A: [[f64; 6]; 6] = [
        [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
        [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
        [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
        [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
        [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
    ];
    const B: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
    const E: [f64; 7] = [
        71.0 / 57600.0,
        0.0,
        -71.0 / 16695.0,
        71.0 / 1920.0,
        -17253.0 / 339200.0,
        22.0 / 525.0,
        -1.0 / 40.0,
    ];
    let lm = &l.matrix;
    let mut y = linalg::vectorize(rho0);
    let mut time = 0.0;
    let mut h = (t / 100.0).max(1e-6).min(t);
    let mut k1 = lm * &y;
    let mut steps = 0usize;
    while time < t {
        if steps > 10_000_000 {
            return Err(Error::numerical("evolve_rk45", "step budget exhausted"));
        }
        steps += 1;
        h = h.min(t - time);
        let mut k: Vec<CVec> = vec![k1.clone()];
        for row in A.iter() {
            let mut stage = y.clone();
            for (j, &aij) in row.iter().enumerate().take(k.len()) {
                if aij != 0.0 {
                    stage.axpy(c(h * aij), &k[j], c(1.0));
                }
            }
            k.push(lm * &stage);
        }
        // k[6] is the derivative at the 5th-order solution (FSAL)
        let mut y_new = y.clone();
        for (j, &bj) in B.iter().enumerate().take(6) {
            if bj != 0.0 {
                y_new.axpy(c(h * bj), &k[j], c(1.0));
            }
        }
        let mut err = CVec::zeros(y.len());
        for (j, &ej) in E.iter().enumerate() {
            if ej != 0.0 {
                err.axpy(c(h * ej), &k[j], c(1.0));
            }
        }
        let norm = err
            .iter()
            .zip(y.iter().zip(y_new.iter()))
            .map(|(e, (a, b))| {
                let sc = atol + rtol * a.norm().max(b.norm());
                (e.norm() / sc).powi(2)
            })
            .sum::<f64>()
            / y.len() as f64;
        let norm = norm.sqrt();
        if !norm.is_finite() {
            return Err(Error::numerical("evolve_rk45", "non-finite error estimate"));
        }
        if norm <= 1.0 {
            time += h;
            y = y_new;
            k1 = k.pop().expect("seven stages");
        }
        let factor = if norm == 0.0 { 5.0 } else { (0.9 * norm.powf(-0.2)).clamp(0.2, 5.0) };
        h *= factor;
        if h < 1e-14 * t.max(1.0) {
            return Err(Error::numerical("evolve_rk45", "step size underflow"));
        }
    }
    Ok(linalg::unvectorize(&y, l.m))
}
