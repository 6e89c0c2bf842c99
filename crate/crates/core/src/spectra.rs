//! Cavity emission spectra from the quantum regression theorem (resolvent
//! form) and from the steady excitation of a weakly coupled sensor atom.

use nalgebra::Hessenberg;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{BathKind, Gauge, ModelConfig, ModelKind};
use crate::dressed::{self, DressedBasis, TransitionSet};
use crate::error::{Error, Result};
use crate::gme::{self, Liouvillian, SteadyState};
use crate::hamiltonian::{self, GaugeModel};
use crate::hilbert::FactorLabel;
use crate::linalg::{self, c, CMat, CVec, C64, I};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Qrt,
    Saa,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::Qrt => "qrt",
            Method::Saa => "saa",
        })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectrumResult {
    pub omega_grid: Vec<f64>,
    pub intensity: Vec<f64>,
    pub method: Method,
    pub gauge: Gauge,
    pub config_hash: String,
    /// Grid points dropped because the solve failed there.
    pub gaps: Vec<f64>,
    /// Tiny negative samples set to zero.
    pub clipped: usize,
    pub warnings: Vec<String>,
}

impl SpectrumResult {
    fn new(method: Method, gauge: Gauge, config_hash: String, omega_grid: Vec<f64>, raw: Vec<f64>) -> Self {
        let (intensity, clipped) = clip_negatives(raw);
        SpectrumResult {
            omega_grid,
            intensity,
            method,
            gauge,
            config_hash,
            gaps: Vec::new(),
            clipped,
            warnings: Vec::new(),
        }
    }

    pub fn max_intensity(&self) -> f64 {
        self.intensity.iter().fold(0.0, |a, &b| a.max(b))
    }

    /// Copy scaled to unit maximum.
    pub fn normalized(&self) -> SpectrumResult {
        let mut out = self.clone();
        let max = self.max_intensity();
        if max > 0.0 {
            out.intensity.iter_mut().for_each(|v| *v /= max);
        }
        out
    }

    pub fn peaks(&self, min_relative_height: f64) -> Vec<Peak> {
        find_peaks(&self.omega_grid, &self.intensity, min_relative_height)
    }
}

fn clip_negatives(mut values: Vec<f64>) -> (Vec<f64>, usize) {
    let max = values.iter().fold(0.0_f64, |a, &b| a.max(b.abs()));
    let mut clipped = 0;
    for v in &mut values {
        if *v < 0.0 {
            if *v >= -1e-10 * max.max(1e-300) {
                *v = 0.0;
                clipped += 1;
            } else {
                log::warn!("spectrum sample {v:.3e} is negative beyond round-off");
            }
        }
    }
    if clipped > 0 {
        log::debug!("clipped {clipped} tiny negative spectrum samples");
    }
    (values, clipped)
}

/// `points` equally spaced frequencies from `min` to `max` inclusive.
pub fn omega_grid(min: f64, max: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![min],
        _ => (0..points).map(|k| min + (max - min) * k as f64 / (points - 1) as f64).collect(),
    }
}

/// Precomputed Hessenberg form `L = Q H Q†` for fast evaluation of
/// `−Tr{A (L + iω)⁻¹ B}` on many frequencies.
pub struct Resolvent {
    h: CMat,
    /// `Qᵀ vec(Aᵀ)`.
    u: CVec,
    /// `Q† vec(B)`.
    v: CVec,
}

impl Resolvent {
    pub fn new(l: &Liouvillian, left: &CMat, right: &CMat) -> Self {
        let (q, h) = Hessenberg::new(l.matrix.clone()).unpack();
        let u = q.transpose() * linalg::vectorize(&left.transpose());
        let v = q.adjoint() * linalg::vectorize(right);
        Resolvent { h, u, v }
    }

    /// `−Tr{A (L + iω)⁻¹ B}`.
    pub fn evaluate(&self, omega: f64) -> Result<C64> {
        let y = solve_shifted_hessenberg(&self.h, I * omega, &self.v).ok_or(Error::SingularResolvent { omega })?;
        Ok(-self.u.dot(&y))
    }
}

/// Solves `(H + s) y = b` for upper-Hessenberg `H` by Gaussian elimination
/// with adjacent-row pivoting.
fn solve_shifted_hessenberg(h: &CMat, shift: C64, b: &CVec) -> Option<CVec> {
    let n = h.nrows();
    let mut a = h.clone();
    for i in 0..n {
        a[(i, i)] += shift;
    }
    let mut y = b.clone();
    let scale = linalg::max_abs(&a).max(1.0);
    for k in 0..n.saturating_sub(1) {
        if a[(k + 1, k)].norm() > a[(k, k)].norm() {
            a.swap_rows(k, k + 1);
            y.swap_rows(k, k + 1);
        }
        let pivot = a[(k, k)];
        if pivot.norm() <= 1e-14 * scale {
            return None;
        }
        let factor = a[(k + 1, k)] / pivot;
        if factor != C64::new(0.0, 0.0) {
            for j in k..n {
                let v = a[(k, j)];
                a[(k + 1, j)] -= factor * v;
            }
            let v = y[k];
            y[k + 1] -= factor * v;
        }
    }
    for k in (0..n).rev() {
        let pivot = a[(k, k)];
        if pivot.norm() <= 1e-14 * scale {
            return None;
        }
        let mut acc = y[k];
        for j in k + 1..n {
            acc -= a[(k, j)] * y[j];
        }
        y[k] = acc / pivot;
    }
    Some(y)
}

/// `S(ω) = Re ∫₀^∞ dτ e^{iωτ} Tr[X⁺ e^{Lτ}(ρ X⁻)]`, evaluated as
/// `−Re Tr{X⁺ (L + iω)⁻¹ (ρ X⁻)}`.
pub fn spectrum_qrt(
    l: &Liouvillian,
    rho_ss: &CMat,
    cavity: &TransitionSet,
    basis: &DressedBasis,
    grid: &[f64],
) -> Result<SpectrumResult> {
    let resolvent = Resolvent::new(l, &cavity.lowering(), &(rho_ss * cavity.raising()));
    let raw = grid
        .iter()
        .map(|&w| resolvent.evaluate(w).map(|z| z.re))
        .collect::<Result<Vec<f64>>>()?;
    Ok(SpectrumResult::new(Method::Qrt, basis.gauge, basis.config_hash.clone(), grid.to_vec(), raw))
}

/// Same spectrum by direct time integration: `C(τ)` on a uniform grid of
/// step `dt` up to `tau_max`, then composite Simpson quadrature.
pub fn spectrum_qrt_time_domain(
    l: &Liouvillian,
    rho_ss: &CMat,
    cavity: &TransitionSet,
    grid: &[f64],
    dt: f64,
    tau_max: f64,
) -> Vec<f64> {
    let mut steps = (tau_max / dt).ceil() as usize;
    steps += steps % 2;
    let step = gme::propagator(l, dt);
    let x_plus = cavity.lowering();
    let left = linalg::vectorize(&x_plus.transpose());
    let mut state = linalg::vectorize(&(rho_ss * cavity.raising()));
    let mut corr = Vec::with_capacity(steps + 1);
    for _ in 0..=steps {
        corr.push(left.dot(&state));
        state = &step * state;
    }
    grid.iter()
        .map(|&w| {
            let rot = C64::from_polar(1.0, w * dt);
            let mut phase = c(1.0);
            let mut acc = C64::new(0.0, 0.0);
            for (k, &cv) in corr.iter().enumerate() {
                let weight = if k == 0 || k == steps {
                    1.0
                } else if k % 2 == 1 {
                    4.0
                } else {
                    2.0
                };
                acc += cv * phase * weight;
                phase *= rot;
            }
            (acc * (dt / 3.0)).re
        })
        .collect()
}

/// Everything produced on the way to a regression-theorem spectrum.
pub struct QrtRun {
    pub model: GaugeModel,
    pub basis: DressedBasis,
    pub liouvillian: Liouvillian,
    pub steady: SteadyState,
    pub cavity: TransitionSet,
    pub spectrum: SpectrumResult,
}

/// Builds, diagonalizes, solves and evaluates the regression-theorem spectrum.
pub fn compute_qrt(cfg: &ModelConfig, grid: &[f64]) -> Result<QrtRun> {
    compute_qrt_with(cfg, grid, gme::CrossTerms::from_config(cfg))
}

pub fn compute_qrt_with(cfg: &ModelConfig, grid: &[f64], cross: gme::CrossTerms) -> Result<QrtRun> {
    let model = hamiltonian::build(cfg)?;
    let basis = dressed::diagonalize(&model, cfg.m_dressed)?;
    let liouvillian = gme::assemble_liouvillian_with(&model, &basis, cross)?;
    let steady = gme::steady_state(&liouvillian)?;
    let cavity = dressed::jump_operators(&basis, &model, FactorLabel::Cavity)?;
    let spectrum = spectrum_qrt(&liouvillian, &steady.rho, &cavity, &basis, grid)?;
    Ok(QrtRun {
        model,
        basis,
        liouvillian,
        steady,
        cavity,
        spectrum,
    })
}

/// Steady sensor excitation `⟨X⁻_sen X⁺_sen⟩` for one sensor frequency.
pub fn saa_point(cfg: &ModelConfig) -> Result<f64> {
    let model = hamiltonian::build(cfg)?;
    let basis = dressed::diagonalize(&model, cfg.m_dressed)?;
    let l = gme::assemble_liouvillian(&model, &basis)?;
    let ss = gme::steady_state(&l)?;
    let sensor = dressed::jump_operators(&basis, &model, FactorLabel::Sensor)?;
    let x_plus = sensor.lowering();
    let excitation = x_plus.adjoint() * x_plus;
    Ok(linalg::trace(&(&ss.rho * excitation)).re)
}

/// Sensing-atom spectrum: one steady-state solve per sensor frequency.
pub fn spectrum_saa(base: &ModelConfig, omega_s_grid: &[f64]) -> Result<SpectrumResult> {
    if !matches!(base.model, ModelKind::Saa | ModelKind::SaaRwa) {
        return Err(Error::config("model.model", "sensing-atom spectra need model = \"saa\" or \"saa_rwa\""));
    }
    base.validate()?;
    let mut warnings = Vec::new();
    if let Some(bound) = noninvasive_bound(base)? {
        if base.g_s >= bound {
            let msg = format!(
                "sensor coupling g_s = {:.3e} is not small against sqrt(gamma_s R / 2) = {:.3e}",
                base.g_s, bound
            );
            log::warn!("{msg}");
            warnings.push(msg);
        }
    }
    let results: Vec<(f64, Result<f64>)> = omega_s_grid
        .par_iter()
        .map(|&ws| {
            let cfg = ModelConfig {
                omega_s: ws,
                ..base.clone()
            };
            (ws, saa_point(&cfg))
        })
        .collect();
    let mut grid = Vec::with_capacity(results.len());
    let mut raw = Vec::with_capacity(results.len());
    let mut gaps = Vec::new();
    for (ws, r) in results {
        match r {
            Ok(v) => {
                grid.push(ws);
                raw.push(v);
            }
            Err(e) => {
                log::warn!("sensing-atom solve failed at omega_s = {ws}: {e}");
                gaps.push(ws);
            }
        }
    }
    if grid.is_empty() {
        return Err(Error::numerical("spectrum_saa", "every grid point failed"));
    }
    let mut out = SpectrumResult::new(Method::Saa, base.gauge, base.hash(), grid, raw);
    out.gaps = gaps;
    out.warnings = warnings;
    Ok(out)
}

/// `sqrt(γ_s R / 2)` with `R` the smallest significant cavity emission rate
/// of the system without the sensor.
pub fn noninvasive_bound(cfg: &ModelConfig) -> Result<Option<f64>> {
    let bare = ModelConfig {
        model: if cfg.model.is_rwa() { ModelKind::Jcm } else { ModelKind::Qrm },
        g_s: 0.0,
        m_dressed: cfg.m_dressed.min(cfg.n_fock * 2),
        ..cfg.clone()
    };
    let model = hamiltonian::build(&bare)?;
    let basis = dressed::diagonalize(&model, bare.m_dressed)?;
    let rates = dressed::quadrature_rates(&basis, &model, cfg.bath_cav);
    let max = rates.iter().fold(0.0_f64, |a, r| a.max(r.rate));
    let r_min = rates
        .iter()
        .filter(|r| r.rate > 1e-3 * max)
        .fold(f64::INFINITY, |a, r| a.min(r.rate));
    if !r_min.is_finite() {
        return Ok(None);
    }
    Ok(Some((cfg.gamma_s_abs() * r_min / 2.0).sqrt()))
}

/// Label of the key transitions of the lowest seven states.
pub fn transition_label(upper: usize, lower: usize) -> Option<&'static str> {
    match (upper, lower) {
        (1, 0) => Some("A"),
        (3, 1) => Some("B"),
        (2, 0) => Some("C"),
        (4, 3) => Some("D"),
        (5, 2) => Some("E"),
        (4, 0) => Some("F"),
        (6, 0) => Some("G"),
        _ => None,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FluxEntry {
    pub upper: usize,
    pub lower: usize,
    pub omega: f64,
    pub p2: f64,
    pub rate: f64,
    pub label: Option<&'static str>,
}

/// Photodetection rates `T_jk` of every dressed transition.
pub fn photon_flux_table(basis: &DressedBasis, model: &GaugeModel, bath: BathKind) -> Vec<FluxEntry> {
    dressed::quadrature_rates(basis, model, bath)
        .into_iter()
        .map(|r| FluxEntry {
            upper: r.upper,
            lower: r.lower,
            omega: r.omega,
            p2: r.p2,
            rate: r.rate,
            label: transition_label(r.upper, r.lower),
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Peak {
    pub omega: f64,
    pub height: f64,
    pub index: usize,
}

/// Interior local maxima above `min_relative_height · max`, refined by a
/// parabola through the three samples around each maximum.
pub fn find_peaks(grid: &[f64], values: &[f64], min_relative_height: f64) -> Vec<Peak> {
    let max = values.iter().fold(0.0_f64, |a, &b| a.max(b));
    let mut out = Vec::new();
    for i in 1..values.len().saturating_sub(1) {
        let (l, m, r) = (values[i - 1], values[i], values[i + 1]);
        if m > l && m >= r && m >= min_relative_height * max {
            let denom = l - 2.0 * m + r;
            let offset = if denom < 0.0 { 0.5 * (l - r) / denom } else { 0.0 };
            let h = 0.5 * (grid[i + 1] - grid[i - 1]);
            out.push(Peak {
                omega: grid[i] + offset * h,
                height: m - 0.25 * (l - r) * offset,
                index: i,
            });
        }
    }
    out
}

#[derive(Debug, Clone, Serialize)]
pub struct PeakAnnotation {
    pub omega: f64,
    pub height: f64,
    pub label: Option<&'static str>,
    pub upper: Option<usize>,
    pub lower: Option<usize>,
    pub rate: Option<f64>,
}

/// Assigns each peak the nearest emitting transition within `tolerance`.
pub fn annotate_peaks(peaks: &[Peak], flux: &[FluxEntry], tolerance: f64) -> Vec<PeakAnnotation> {
    let max_rate = flux.iter().fold(0.0_f64, |a, f| a.max(f.rate));
    peaks
        .iter()
        .map(|p| {
            let nearest = flux
                .iter()
                .filter(|f| f.rate > 1e-6 * max_rate && (f.omega - p.omega).abs() <= tolerance)
                .min_by(|a, b| (a.omega - p.omega).abs().total_cmp(&(b.omega - p.omega).abs()));
            PeakAnnotation {
                omega: p.omega,
                height: p.height,
                label: nearest.and_then(|f| f.label),
                upper: nearest.map(|f| f.upper),
                lower: nearest.map(|f| f.lower),
                rate: nearest.map(|f| f.rate),
            }
        })
        .collect()
}

/// `max |a − b| / max |a|` over a common grid.
pub fn relative_difference(a: &[f64], b: &[f64]) -> f64 {
    let scale = a.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let diff = a.iter().zip(b).fold(0.0_f64, |m, (x, y)| m.max((x - y).abs()));
    if scale == 0.0 {
        diff
    } else {
        diff / scale
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dressed::Transition;

    fn qrm(n: usize) -> ModelConfig {
        ModelConfig {
            g_a: 0.5,
            n_fock: n,
            ..Default::default()
        }
    }

    #[test]
    fn hessenberg_solve_matches_lu() {
        let a = CMat::from_fn(6, 6, |i, j| C64::new(((i * 7 + j * 3) % 5) as f64 - 2.0, (i as f64 - j as f64) * 0.3));
        let (_, h) = Hessenberg::new(a).unpack();
        let b = CVec::from_fn(6, |i, _| C64::new(i as f64, 1.0));
        let shift = C64::new(0.1, 0.7);
        let y = solve_shifted_hessenberg(&h, shift, &b).unwrap();
        let mut full = h.clone();
        for i in 0..6 {
            full[(i, i)] += shift;
        }
        let r = full * y - b;
        assert!(r.iter().all(|z| z.norm() < 1e-12));
    }

    #[test]
    fn three_level_toy_matches_time_domain() {
        // Cascade |2⟩ → |1⟩ → |0⟩ with pump; checks the regression ordering.
        let set = TransitionSet {
            channel: FactorLabel::Cavity,
            m: 3,
            transitions: vec![
                Transition {
                    lower: 0,
                    upper: 1,
                    omega: 0.6,
                    element: c(1.0),
                },
                Transition {
                    lower: 1,
                    upper: 2,
                    omega: 0.9,
                    element: C64::new(0.0, 0.7),
                },
            ],
        };
        let h = CMat::from_diagonal(&CVec::from_vec(vec![c(0.0), c(0.6), c(1.5)]));
        let mut matrix = gme::coherent_part(&h);
        matrix += gme::build_dissipator(&set, &gme::BathSpec::flat(0.04), gme::CrossTerms::All);
        matrix += gme::build_pump(&set, 0.03);
        let l = Liouvillian {
            matrix,
            m: 3,
            channels: Vec::new(),
            p_inc: 0.03,
        };
        let ss = gme::steady_state(&l).unwrap();
        let grid = omega_grid(0.2, 1.4, 61);
        let resolvent = Resolvent::new(&l, &set.lowering(), &(&ss.rho * set.raising()));
        let fast: Vec<f64> = grid.iter().map(|&w| resolvent.evaluate(w).unwrap().re).collect();
        let slow = spectrum_qrt_time_domain(&l, &ss.rho, &set, &grid, 0.01, 1500.0);
        assert!(relative_difference(&slow, &fast) < 1e-6);
        let peaks = find_peaks(&grid, &fast, 0.05);
        assert!(peaks.iter().any(|p| (p.omega - 0.6).abs() < 0.02), "{peaks:?} {fast:?}");
        assert!(peaks.iter().any(|p| (p.omega - 0.9).abs() < 0.02));
    }

    #[test]
    fn qrm_peaks_at_dressed_transitions() {
        let run = compute_qrt(&qrm(60), &omega_grid(0.05, 2.2, 431)).unwrap();
        let peaks = run.spectrum.peaks(0.02);
        assert!(peaks.iter().any(|p| (p.omega - 0.5).abs() < 0.03), "{peaks:?}");
        assert!(peaks.iter().any(|p| (p.omega - 1.45).abs() < 0.03), "{peaks:?}");
        assert!(run.spectrum.intensity.iter().all(|v| v.is_finite() && *v >= 0.0));
    }

    #[test]
    fn peak_refinement_recovers_parabola_vertex() {
        let grid = omega_grid(0.0, 1.0, 11);
        let values: Vec<f64> = grid.iter().map(|x| 1.0 - (x - 0.43) * (x - 0.43)).collect();
        let p = find_peaks(&grid, &values, 0.0);
        assert_eq!(p.len(), 1);
        assert!((p[0].omega - 0.43).abs() < 1e-12);
        assert!((p[0].height - 1.0).abs() < 1e-12);
    }

    #[test]
    fn labels_cover_key_transitions() {
        assert_eq!(transition_label(1, 0), Some("A"));
        assert_eq!(transition_label(3, 1), Some("B"));
        assert_eq!(transition_label(6, 0), Some("G"));
        assert_eq!(transition_label(2, 1), None);
    }

    #[test]
    fn saa_requires_sensor_model() {
        assert!(matches!(spectrum_saa(&qrm(10), &[0.5]), Err(Error::Config { .. })));
    }
}
