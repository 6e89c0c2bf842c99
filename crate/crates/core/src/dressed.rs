//! Dressed (eigen) basis of a system Hamiltonian, truncated to the `M`
//! lowest states, and the operators built in it.

use std::cmp::Ordering;

use serde::Serialize;

use crate::config::{BathKind, Gauge};
use crate::error::{Error, Result};
use crate::hamiltonian::GaugeModel;
use crate::hilbert::{self, FactorLabel, Operator};
use crate::linalg::{self, c, CMat, C64};

/// Transitions with `ω ≤ OMEGA_MIN · ω_c` are treated as degenerate and dropped.
pub const OMEGA_MIN: f64 = 1e-9;
/// Matrix elements below this fraction of the largest element are dropped.
pub const ELEMENT_CUTOFF: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct DressedBasis {
    /// Ascending, with `energies[0] == 0`.
    pub energies: Vec<f64>,
    pub ground_energy: f64,
    /// Column `j` is `|j⟩` in the bare basis.
    pub states: CMat,
    /// `⟨j|P|j⟩` with `P` the bare-excitation parity.
    pub parity: Vec<f64>,
    pub gauge: Gauge,
    pub config_hash: String,
}

impl DressedBasis {
    pub fn m(&self) -> usize {
        self.energies.len()
    }

    /// `V† O V`, the operator restricted to the dressed subspace.
    pub fn project(&self, op: &Operator) -> CMat {
        self.states.adjoint() * (op.matrix() * &self.states)
    }

    /// `E_upper − E_lower`.
    pub fn omega(&self, lower: usize, upper: usize) -> f64 {
        self.energies[upper] - self.energies[lower]
    }
}

/// Lowest `m` eigenpairs of `model.h`, ground energy aligned to zero.
pub fn diagonalize(model: &GaugeModel, m: usize) -> Result<DressedBasis> {
    let dim = model.h.dim();
    if m == 0 || m > dim {
        return Err(Error::config("model.m_dressed", format!("must be in 1..={dim}, got {m}")));
    }
    let h = model.h.matrix();
    let parity = hilbert::bare_parity(&model.layout);
    let (values, vectors) = if commutes_with_parity(h, &parity) {
        block_eigh(h, &parity, m)?
    } else {
        let (v, s) = linalg::hermitian_eigh(h, "dressed::diagonalize")?;
        (v[..m].to_vec(), s.columns(0, m).into_owned())
    };

    let mut states = vectors;
    for j in 0..m {
        fix_phase(&mut states, j);
    }
    let parities: Vec<f64> = (0..m)
        .map(|j| states.column(j).iter().zip(&parity).map(|(z, p)| z.norm_sqr() * p).sum())
        .collect();

    let order = tie_broken_order(&values, &parities, &states);
    let ground = values[order[0]];
    Ok(DressedBasis {
        energies: order.iter().map(|&k| values[k] - ground).collect(),
        ground_energy: ground,
        states: CMat::from_fn(dim, m, |i, j| states[(i, order[j])]),
        parity: order.iter().map(|&k| parities[k]).collect(),
        gauge: model.config.gauge,
        config_hash: model.config.hash(),
    })
}

/// Ground-aligned energies of the `m` lowest states.
pub fn lowest_energies(model: &GaugeModel, m: usize) -> Result<Vec<f64>> {
    Ok(diagonalize(model, m)?.energies)
}

fn commutes_with_parity(h: &CMat, parity: &[f64]) -> bool {
    let scale = linalg::max_abs(h).max(f64::MIN_POSITIVE);
    let n = h.nrows();
    for j in 0..n {
        for i in 0..n {
            if parity[i] != parity[j] && h[(i, j)].norm() > 1e-10 * scale {
                return false;
            }
        }
    }
    true
}

/// Diagonalizes the even and odd parity blocks separately and merges the
/// `m` lowest eigenpairs.
fn block_eigh(h: &CMat, parity: &[f64], m: usize) -> Result<(Vec<f64>, CMat)> {
    let n = h.nrows();
    let mut pairs: Vec<(f64, Vec<(usize, C64)>)> = Vec::new();
    for sign in [1.0, -1.0] {
        let idx: Vec<usize> = (0..n).filter(|&i| parity[i] == sign).collect();
        if idx.is_empty() {
            continue;
        }
        let block = CMat::from_fn(idx.len(), idx.len(), |a, b| h[(idx[a], idx[b])]);
        let (vals, vecs) = linalg::hermitian_eigh(&block, "dressed::diagonalize (parity block)")?;
        for (k, &v) in vals.iter().enumerate().take(m) {
            let col = idx.iter().enumerate().map(|(a, &i)| (i, vecs[(a, k)])).collect();
            pairs.push((v, col));
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs.truncate(m);
    let mut states = CMat::zeros(n, m);
    for (j, (_, col)) in pairs.iter().enumerate() {
        for &(i, z) in col {
            states[(i, j)] = z;
        }
    }
    Ok((pairs.iter().map(|p| p.0).collect(), states))
}

/// Makes the first entry of (near) maximal modulus real and positive.
fn fix_phase(states: &mut CMat, j: usize) {
    let col = states.column(j);
    let max = col.iter().fold(0.0_f64, |acc, z| acc.max(z.norm()));
    if max == 0.0 {
        return;
    }
    let pivot = col
        .iter()
        .find(|z| z.norm() > (1.0 - 1e-8) * max)
        .copied()
        .unwrap_or(c(1.0));
    let phase = pivot.conj() / pivot.norm();
    for z in states.column_mut(j).iter_mut() {
        *z *= phase;
    }
}

fn tie_broken_order(values: &[f64], parities: &[f64], states: &CMat) -> Vec<usize> {
    let scale = values.iter().fold(1.0_f64, |acc, v| acc.max(v.abs()));
    let first_component = |j: usize| {
        let col = states.column(j);
        let max = col.iter().fold(0.0_f64, |acc, z| acc.max(z.norm()));
        col.iter().position(|z| z.norm() > 1e-3 * max).unwrap_or(0)
    };
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| {
        if (values[a] - values[b]).abs() > 1e-10 * scale {
            return values[a].total_cmp(&values[b]);
        }
        parities[b]
            .partial_cmp(&parities[a])
            .unwrap_or(Ordering::Equal)
            .then(first_component(a).cmp(&first_component(b)))
            .then(a.cmp(&b))
    });
    order
}

/// One downward transition `|upper⟩ → |lower⟩` of a channel operator `O`,
/// with `element = ⟨lower|O|upper⟩`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub lower: usize,
    pub upper: usize,
    pub omega: f64,
    pub element: C64,
}

#[derive(Debug, Clone)]
pub struct TransitionSet {
    pub channel: FactorLabel,
    pub m: usize,
    pub transitions: Vec<Transition>,
}

impl TransitionSet {
    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }

    /// `X⁺ = Σ ⟨j|O|k⟩ |j⟩⟨k|` (energy lowering).
    pub fn lowering(&self) -> CMat {
        let mut x = CMat::zeros(self.m, self.m);
        for t in &self.transitions {
            x[(t.lower, t.upper)] += t.element;
        }
        x
    }

    /// `X⁻ = (X⁺)†` (energy raising).
    pub fn raising(&self) -> CMat {
        self.lowering().adjoint()
    }

    pub fn find(&self, upper: usize, lower: usize) -> Option<&Transition> {
        self.transitions.iter().find(|t| t.upper == upper && t.lower == lower)
    }
}

/// Dressed transitions of the operator coupling `channel` to its bath.
pub fn jump_operators(basis: &DressedBasis, model: &GaugeModel, channel: FactorLabel) -> Result<TransitionSet> {
    if basis.gauge != model.config.gauge {
        return Err(Error::config("model.gauge", "dressed basis and model were built in different gauges"));
    }
    let op = model
        .channel_operator(channel)
        .ok_or_else(|| Error::config("channel", format!("model has no `{channel}` factor")))?;
    Ok(transitions_of(basis, &basis.project(op), channel))
}

/// Transition list of an operator already projected onto the dressed basis.
pub fn transitions_of(basis: &DressedBasis, projected: &CMat, channel: FactorLabel) -> TransitionSet {
    let m = basis.m();
    let cutoff = ELEMENT_CUTOFF * linalg::max_abs(projected);
    let mut transitions = Vec::new();
    for lower in 0..m {
        for upper in lower + 1..m {
            let omega = basis.omega(lower, upper);
            let element = projected[(lower, upper)];
            if omega > OMEGA_MIN && element.norm() > cutoff {
                transitions.push(Transition {
                    lower,
                    upper,
                    omega,
                    element,
                });
            }
        }
    }
    TransitionSet { channel, m, transitions }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ParityLabel {
    Even,
    Odd,
}

#[derive(Debug, Clone, Serialize)]
pub struct ParityRow {
    pub state: usize,
    pub energy: f64,
    /// `Re ⟨j|exp(iπN)|j⟩` with `N = Σ σ⁺σ⁻ + a_c† a_c`.
    pub parity: f64,
    pub parity_imag: f64,
    /// Sign of `parity`.
    pub label: ParityLabel,
    /// `⟨j|P_bare|j⟩`, the conserved bare-excitation parity.
    pub conserved: f64,
    /// The state is not an eigenstate of the conserved parity.
    pub mixed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ParityTable {
    pub rows: Vec<ParityRow>,
}

impl ParityTable {
    pub fn labels(&self) -> Vec<ParityLabel> {
        self.rows.iter().map(|r| r.label).collect()
    }

    /// Even/odd labels of the conserved bare parity.
    pub fn conserved_labels(&self) -> Vec<ParityLabel> {
        self.rows
            .iter()
            .map(|r| if r.conserved >= 0.0 { ParityLabel::Even } else { ParityLabel::Odd })
            .collect()
    }
}

/// Parity table of the dressed states.
///
/// `N = Σ_k σ⁺_k σ⁻_k + a_c† a_c` uses the model's cavity operator: `a′` in
/// the corrected dipole gauge, the bare `a` otherwise. With `a′` the
/// operator `exp(iπN)` is not conserved and its expectation values are
/// generally complex and of modulus below one; the label follows the sign
/// of the real part. The conserved bare-excitation parity is reported
/// alongside.
pub fn parity_table(basis: &DressedBasis, model: &GaugeModel) -> Result<ParityTable> {
    let values = excitation_parity(basis, model)?;
    let rows = values
        .iter()
        .enumerate()
        .map(|(state, z)| ParityRow {
            state,
            energy: basis.energies[state],
            parity: z.re,
            parity_imag: z.im,
            label: if z.re >= 0.0 { ParityLabel::Even } else { ParityLabel::Odd },
            conserved: basis.parity[state],
            mixed: basis.parity[state].abs() <= 0.99,
        })
        .collect();
    Ok(ParityTable { rows })
}

/// `⟨j|exp(iπN)|j⟩` for every dressed state, `N = Σ σ⁺σ⁻ + a_c† a_c`.
pub fn excitation_parity(basis: &DressedBasis, model: &GaugeModel) -> Result<Vec<C64>> {
    let layout = &model.layout;
    let ac = &model.a_corrected;
    let mut n = &ac.adjoint() * ac;
    for label in layout.atomic_labels() {
        let sp = hilbert::pauli(layout, hilbert::Pauli::Plus, label)?;
        let sm = hilbert::pauli(layout, hilbert::Pauli::Minus, label)?;
        n = &n + &(&sp * &sm);
    }
    let bare = hilbert::bare_parity(layout);
    let f = |v: f64| C64::from_polar(1.0, std::f64::consts::PI * v);
    let p = if commutes_with_parity(n.matrix(), &bare) {
        block_function(n.matrix(), &bare, f)?
    } else {
        linalg::hermitian_function(n.matrix(), f, "excitation parity")?
    };
    let pv = &p * &basis.states;
    Ok((0..basis.m())
        .map(|j| basis.states.column(j).dotc(&pv.column(j)))
        .collect())
}

/// `f(m)` for Hermitian `m` that is block diagonal in the bare parity.
fn block_function<F: Fn(f64) -> C64>(m: &CMat, parity: &[f64], f: F) -> Result<CMat> {
    let n = m.nrows();
    let mut out = CMat::zeros(n, n);
    for sign in [1.0, -1.0] {
        let idx: Vec<usize> = (0..n).filter(|&i| parity[i] == sign).collect();
        if idx.is_empty() {
            continue;
        }
        let block = CMat::from_fn(idx.len(), idx.len(), |a, b| m[(idx[a], idx[b])]);
        let fb = linalg::hermitian_function(&block, &f, "parity block function")?;
        for (a, &i) in idx.iter().enumerate() {
            for (b, &j) in idx.iter().enumerate() {
                out[(i, j)] = fb[(a, b)];
            }
        }
    }
    Ok(out)
}

/// Labels that follow each dressed state continuously from zero coupling.
///
/// Levels of equal conserved parity never cross, so the `r`-th dressed
/// state of a parity sector is connected to the `r`-th bare state of that
/// sector; its label is the rank of that bare state in the bare spectrum.
/// Returns `None` when some state is not a parity eigenstate.
pub fn adiabatic_labels(basis: &DressedBasis, model: &GaugeModel) -> Option<Vec<usize>> {
    if basis.parity.iter().any(|p| p.abs() <= 0.99) {
        return None;
    }
    let layout = &model.layout;
    let cfg = &model.config;
    let factors = layout.factors();
    let bare_energy = |idx: usize| -> f64 {
        layout
            .unflatten(idx)
            .iter()
            .zip(factors)
            .map(|(&k, f)| match f.label {
                FactorLabel::Cavity => k as f64 * cfg.omega_c,
                label => (k as f64 - 0.5) * cfg.emitter_frequency(label),
            })
            .sum()
    };
    let parity = hilbert::bare_parity(layout);
    let mut bare: Vec<usize> = (0..layout.total_dim()).collect();
    bare.sort_by(|&a, &b| {
        bare_energy(a)
            .total_cmp(&bare_energy(b))
            .then(parity[b].total_cmp(&parity[a]))
            .then(a.cmp(&b))
    });
    let sector = |sign: f64| -> Vec<usize> {
        bare.iter()
            .enumerate()
            .filter(|(_, &i)| parity[i] == sign)
            .map(|(rank, _)| rank)
            .collect()
    };
    let (even, odd) = (sector(1.0), sector(-1.0));
    let (mut ne, mut no) = (0, 0);
    let mut labels = Vec::with_capacity(basis.m());
    for &p in &basis.parity {
        if p > 0.0 {
            labels.push(*even.get(ne)?);
            ne += 1;
        } else {
            labels.push(*odd.get(no)?);
            no += 1;
        }
    }
    Some(labels)
}

/// Cavity bath density `Γ_cav(ω)` in absolute units.
pub fn cavity_rate(kind: BathKind, kappa: f64, omega: f64, omega_c: f64) -> f64 {
    match kind {
        BathKind::Flat => kappa,
        BathKind::Ohmic => kappa * omega / omega_c,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuadratureRate {
    pub upper: usize,
    pub lower: usize,
    pub omega: f64,
    /// `|𝒫_jk|² = ½ |⟨j|Π|k⟩|²`.
    pub p2: f64,
    /// Photodetection rate `Γ_cav(ω_jk) |𝒫_jk|²`, in the units of `κ`.
    pub rate: f64,
}

/// `|𝒫_jk|²` and bath-weighted rates for every pair `j < k` of dressed states.
pub fn quadrature_rates(basis: &DressedBasis, model: &GaugeModel, bath: BathKind) -> Vec<QuadratureRate> {
    let pi = basis.project(&model.pi);
    let cfg = &model.config;
    let m = basis.m();
    let mut out = Vec::with_capacity(m * (m - 1) / 2);
    for upper in 1..m {
        for lower in 0..upper {
            let omega = basis.omega(lower, upper);
            let p2 = 0.5 * pi[(lower, upper)].norm_sqr();
            out.push(QuadratureRate {
                upper,
                lower,
                omega,
                p2,
                rate: cavity_rate(bath, cfg.kappa_abs(), omega.max(0.0), cfg.omega_c) * p2,
            });
        }
    }
    out
}
