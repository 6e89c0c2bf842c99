//! Composite Hilbert spaces (cavity ⊗ atom a ⊗ atom b ⊗ sensor) and the
//! bosonic / two-level operators acting on them.
//!
//! Factors are always stored in the canonical order cavity, atom a, atom b,
//! sensor. Atomic factors use the basis `{|g⟩, |e⟩}` (index 0 is the ground
//! state), so `σ⁺ = |e⟩⟨g|` has its single nonzero entry at `(1, 0)`.

use std::fmt;
use std::ops::{Add, Mul, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, c, CMat, C64, I, ONE, ZERO};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FactorLabel {
    Cavity,
    AtomA,
    AtomB,
    Sensor,
}

impl FactorLabel {
    pub fn is_atomic(self) -> bool {
        !matches!(self, FactorLabel::Cavity)
    }
}

impl fmt::Display for FactorLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            FactorLabel::Cavity => "cavity",
            FactorLabel::AtomA => "atom_a",
            FactorLabel::AtomB => "atom_b",
            FactorLabel::Sensor => "sensor",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Factor {
    pub label: FactorLabel,
    pub dim: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpaceLayout {
    factors: Vec<Factor>,
}

impl SpaceLayout {
    /// Validates and canonicalizes a factor list.
    pub fn new(factors: &[(FactorLabel, usize)]) -> Result<Self> {
        let mut sorted: Vec<Factor> = factors.iter().map(|&(label, dim)| Factor { label, dim }).collect();
        sorted.sort_by_key(|f| f.label);
        if sorted.is_empty() {
            return Err(Error::config("layout", "layout has no factors"));
        }
        for pair in sorted.windows(2) {
            if pair[0].label == pair[1].label {
                return Err(Error::config("layout", format!("duplicate factor `{}`", pair[0].label)));
            }
        }
        for f in &sorted {
            match f.label {
                FactorLabel::Cavity if f.dim < 2 => {
                    return Err(Error::config("layout.cavity", format!("Fock truncation must be >= 2, got {}", f.dim)));
                }
                l if l.is_atomic() && f.dim != 2 => {
                    return Err(Error::config(format!("layout.{l}"), format!("two-level factor must have dim 2, got {}", f.dim)));
                }
                _ => {}
            }
        }
        Ok(SpaceLayout { factors: sorted })
    }

    /// Cavity with `n_fock` levels plus the listed two-level factors.
    pub fn cavity_with(n_fock: usize, atoms: &[FactorLabel]) -> Result<Self> {
        let mut f = vec![(FactorLabel::Cavity, n_fock)];
        f.extend(atoms.iter().map(|&l| (l, 2)));
        Self::new(&f)
    }

    pub fn factors(&self) -> &[Factor] {
        &self.factors
    }

    pub fn total_dim(&self) -> usize {
        self.factors.iter().map(|f| f.dim).product()
    }

    pub fn contains(&self, label: FactorLabel) -> bool {
        self.position(label).is_some()
    }

    pub fn position(&self, label: FactorLabel) -> Option<usize> {
        self.factors.iter().position(|f| f.label == label)
    }

    pub fn dim_of(&self, label: FactorLabel) -> Option<usize> {
        self.position(label).map(|p| self.factors[p].dim)
    }

    pub fn n_fock(&self) -> Option<usize> {
        self.dim_of(FactorLabel::Cavity)
    }

    pub fn atomic_labels(&self) -> impl Iterator<Item = FactorLabel> + '_ {
        self.factors.iter().map(|f| f.label).filter(|l| l.is_atomic())
    }

    /// Per-factor indices of a flat basis index (last factor fastest).
    pub fn unflatten(&self, mut index: usize) -> Vec<usize> {
        let mut out = vec![0; self.factors.len()];
        for (k, f) in self.factors.iter().enumerate().rev() {
            out[k] = index % f.dim;
            index /= f.dim;
        }
        out
    }
}

/// A square complex matrix acting on a [`SpaceLayout`].
#[derive(Debug, Clone, PartialEq)]
pub struct Operator {
    layout: SpaceLayout,
    data: CMat,
}

impl Operator {
    pub fn new(layout: SpaceLayout, data: CMat) -> Result<Self> {
        let n = layout.total_dim();
        if data.nrows() != n || data.ncols() != n {
            return Err(Error::config(
                "operator",
                format!("matrix is {}x{} but layout dimension is {n}", data.nrows(), data.ncols()),
            ));
        }
        Ok(Operator { layout, data })
    }

    pub fn identity(layout: &SpaceLayout) -> Self {
        let n = layout.total_dim();
        Operator {
            layout: layout.clone(),
            data: CMat::identity(n, n),
        }
    }

    pub fn zeros(layout: &SpaceLayout) -> Self {
        let n = layout.total_dim();
        Operator {
            layout: layout.clone(),
            data: CMat::zeros(n, n),
        }
    }

    pub fn layout(&self) -> &SpaceLayout {
        &self.layout
    }

    pub fn matrix(&self) -> &CMat {
        &self.data
    }

    pub fn into_matrix(self) -> CMat {
        self.data
    }

    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    pub fn adjoint(&self) -> Self {
        Operator {
            layout: self.layout.clone(),
            data: self.data.adjoint(),
        }
    }

    pub fn scale(&self, z: C64) -> Self {
        Operator {
            layout: self.layout.clone(),
            data: &self.data * z,
        }
    }

    pub fn commutator(&self, other: &Operator) -> Self {
        self * other - other * self
    }

    /// `max |A - A†|`.
    pub fn hermiticity_defect(&self) -> f64 {
        linalg::hermiticity_defect(&self.data)
    }

    /// Hermitian to `1e-12 · ‖A‖` (max-abs norm).
    pub fn is_hermitian(&self) -> bool {
        let scale = linalg::max_abs(&self.data).max(f64::MIN_POSITIVE);
        self.hermiticity_defect() <= 1e-12 * scale
    }

    pub fn norm(&self) -> f64 {
        linalg::fro_norm(&self.data)
    }

    /// Applies a scalar function to a Hermitian operator.
    pub fn hermitian_function<F: Fn(f64) -> C64>(&self, f: F) -> Result<Self> {
        Ok(Operator {
            layout: self.layout.clone(),
            data: linalg::hermitian_function(&self.data, f, "operator function")?,
        })
    }
}

fn same_layout(a: &Operator, b: &Operator) {
    assert_eq!(a.layout, b.layout, "operator layouts differ");
}

impl<'a> Add<&'a Operator> for &'a Operator {
    type Output = Operator;
    fn add(self, rhs: &'a Operator) -> Operator {
        same_layout(self, rhs);
        Operator {
            layout: self.layout.clone(),
            data: &self.data + &rhs.data,
        }
    }
}

impl<'a> Sub<&'a Operator> for &'a Operator {
    type Output = Operator;
    fn sub(self, rhs: &'a Operator) -> Operator {
        same_layout(self, rhs);
        Operator {
            layout: self.layout.clone(),
            data: &self.data - &rhs.data,
        }
    }
}

impl<'a> Mul<&'a Operator> for &'a Operator {
    type Output = Operator;
    fn mul(self, rhs: &'a Operator) -> Operator {
        same_layout(self, rhs);
        Operator {
            layout: self.layout.clone(),
            data: &self.data * &rhs.data,
        }
    }
}

impl Add for Operator {
    type Output = Operator;
    fn add(self, rhs: Operator) -> Operator {
        &self + &rhs
    }
}

impl Sub for Operator {
    type Output = Operator;
    fn sub(self, rhs: Operator) -> Operator {
        &self - &rhs
    }
}

impl Mul for Operator {
    type Output = Operator;
    fn mul(self, rhs: Operator) -> Operator {
        &self * &rhs
    }
}

impl Mul<&Operator> for C64 {
    type Output = Operator;
    fn mul(self, rhs: &Operator) -> Operator {
        rhs.scale(self)
    }
}

impl Mul<&Operator> for f64 {
    type Output = Operator;
    fn mul(self, rhs: &Operator) -> Operator {
        rhs.scale(c(self))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pauli {
    X,
    Y,
    Z,
    Plus,
    Minus,
}

/// 2×2 matrix in the `{|g⟩, |e⟩}` basis.
pub fn pauli_matrix(which: Pauli) -> CMat {
    match which {
        Pauli::X => CMat::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO]),
        // σ_y = i(σ⁻ − σ⁺)
        Pauli::Y => CMat::from_row_slice(2, 2, &[ZERO, I, -I, ZERO]),
        // σ_z = σ⁺σ⁻ − σ⁻σ⁺ : −1 on |g⟩, +1 on |e⟩
        Pauli::Z => CMat::from_row_slice(2, 2, &[c(-1.0), ZERO, ZERO, ONE]),
        Pauli::Plus => CMat::from_row_slice(2, 2, &[ZERO, ZERO, ONE, ZERO]),
        Pauli::Minus => CMat::from_row_slice(2, 2, &[ZERO, ONE, ZERO, ZERO]),
    }
}

/// Truncated annihilation matrix, `⟨n−1|a|n⟩ = √n`.
pub fn annihilation_matrix(n_fock: usize) -> CMat {
    CMat::from_fn(n_fock, n_fock, |i, j| if j == i + 1 { c((j as f64).sqrt()) } else { ZERO })
}

/// Kronecker product in layout order with identities on unlisted factors.
pub fn embed_product(ops: &[(CMat, FactorLabel)], layout: &SpaceLayout) -> Result<Operator> {
    let mut slots: Vec<Option<&CMat>> = vec![None; layout.factors().len()];
    for (m, label) in ops {
        let pos = layout
            .position(*label)
            .ok_or_else(|| Error::config("embed", format!("layout has no `{label}` factor")))?;
        if slots[pos].is_some() {
            return Err(Error::config("embed", format!("factor `{label}` listed twice")));
        }
        let dim = layout.factors()[pos].dim;
        if m.nrows() != dim || m.ncols() != dim {
            return Err(Error::config(
                "embed",
                format!("operator on `{label}` is {}x{}, factor dim is {dim}", m.nrows(), m.ncols()),
            ));
        }
        slots[pos] = Some(m);
    }
    let mut acc = CMat::identity(1, 1);
    for (slot, f) in slots.iter().zip(layout.factors()) {
        acc = match slot {
            Some(m) => acc.kronecker(*m),
            None => acc.kronecker(&CMat::identity(f.dim, f.dim)),
        };
    }
    Operator::new(layout.clone(), acc)
}

pub fn embed(op: CMat, label: FactorLabel, layout: &SpaceLayout) -> Result<Operator> {
    embed_product(&[(op, label)], layout)
}

pub fn annihilation(layout: &SpaceLayout) -> Result<Operator> {
    let n = layout
        .n_fock()
        .ok_or_else(|| Error::config("layout", "no cavity factor"))?;
    embed(annihilation_matrix(n), FactorLabel::Cavity, layout)
}

pub fn creation(layout: &SpaceLayout) -> Result<Operator> {
    Ok(annihilation(layout)?.adjoint())
}

pub fn pauli(layout: &SpaceLayout, which: Pauli, target: FactorLabel) -> Result<Operator> {
    if !target.is_atomic() {
        return Err(Error::config("pauli.target", format!("`{target}` is not a two-level factor")));
    }
    embed(pauli_matrix(which), target, layout)
}

/// Excitation count of every bare basis state: photons plus excited atoms.
pub fn bare_excitations(layout: &SpaceLayout) -> Vec<usize> {
    (0..layout.total_dim())
        .map(|idx| layout.unflatten(idx).iter().sum())
        .collect()
}

/// `N = a†a + Σ σ⁺σ⁻` over every factor present.
pub fn number_operator(layout: &SpaceLayout) -> Operator {
    let diag = bare_excitations(layout).into_iter().map(|n| c(n as f64));
    Operator {
        layout: layout.clone(),
        data: CMat::from_diagonal(&linalg::CVec::from_iterator(layout.total_dim(), diag)),
    }
}

/// `exp(iπN)` for the bare excitation number: diagonal ±1.
pub fn bare_parity(layout: &SpaceLayout) -> Vec<f64> {
    bare_excitations(layout)
        .into_iter()
        .map(|n| if n % 2 == 0 { 1.0 } else { -1.0 })
        .collect()
}

pub fn bare_parity_operator(layout: &SpaceLayout) -> Operator {
    let diag = bare_parity(layout).into_iter().map(c);
    Operator {
        layout: layout.clone(),
        data: CMat::from_diagonal(&linalg::CVec::from_iterator(layout.total_dim(), diag)),
    }
}
