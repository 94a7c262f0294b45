//! Discretized dissipation kernels M_γ(t,t'), their pulse-convolved forms,
//! and the three detector kernels N_γ(t,t').
//!
//! Columns are synthesized in the frequency domain on a zero-padded grid
//! (pad factor 4) so slowly decaying tails cannot wrap into the window,
//! then cut back to the time window and support-masked. A column whose
//! spectrum has not decayed at the band edge cannot be represented as grid
//! point values (the kernel degenerates to a distribution near t' = 0);
//! such columns are zeroed and counted in the diagnostics. For the
//! lossless law the kernel is the exact discrete delta (or its spectral
//! derivative) and every column is kept verbatim.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::attenuation::{alpha_star, omega_over_k, wavenumber, AttenuationLaw};
use crate::bessel::hankel1_0;
use crate::error::{Error, Result};
use crate::grid::{Synthesizer, TimeGrid, SQRT_2PI};
use crate::pulse::Pulse;

/// Zero-padding factor for column synthesis.
const PAD: usize = 4;

/// Band-edge spectral ratio below which a column counts as grid-resolved.
const RESOLVE_EDGE_RATIO: f64 = 1e-2;

/// Pre-mask energy at t < t' above which a resolved column is rejected.
pub const LEAK_TOL: f64 = 1e-3;

/// M̂_γ(ω, t') = (2π)^{-1/2} (ω/k) e^{i k(ω) |t'|}, with ω/k at 0 by its
/// continuity limit.
pub fn m_hat(law: &AttenuationLaw, omega: f64, tprime: f64) -> Complex64 {
    omega_over_k(law, omega) / SQRT_2PI
        * (Complex64::i() * wavenumber(law, omega) * tprime.abs()).exp()
}

/// Which kernel a [`KernelMatrix`] discretizes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelKind {
    /// M_γ(t, t').
    Dissipation,
    /// (I *_t M_γ)(t, t').
    PulsedDissipation,
    /// Point-detector kernel -(4πt')^{-1} I *_t ∂M_γ/∂t'.
    PointDetector,
    /// Planar-detector kernel 2 (I *_t M_γ)(t, R₀ - t').
    PlanarDetector { r0: f64 },
    /// Line-detector kernel -(2π)^{-1} ∫ (s²-t'²)^{-1/2} I *_t ∂M_γ/∂s ds.
    LineDetector,
}

/// Build diagnostics: support leakage and zeroed sub-resolution columns.
#[derive(Debug, Clone, Default)]
pub struct KernelDiagnostics {
    /// Pre-mask energy fraction at t < t' per column (0 for zeroed ones).
    pub column_leakage: Vec<f64>,
    /// Columns zeroed because their spectrum is unresolved on the grid.
    pub zeroed_columns: usize,
    /// Smallest resolvable source time on this grid (0 for the lossless law).
    pub resolve_time: f64,
}

impl KernelDiagnostics {
    pub fn max_leakage(&self) -> f64 {
        self.column_leakage.iter().copied().fold(0.0, f64::max)
    }
}

/// Dense kernel matrix on (t_i, t'_j); column-major storage.
#[derive(Debug, Clone)]
pub struct KernelMatrix {
    pub kind: KernelKind,
    pub law: AttenuationLaw,
    pub pulse: Pulse,
    grid: TimeGrid,
    cols: Vec<f64>,
    /// column-major, len = grid.n() * cols.len()
    values: Vec<f64>,
    pub causal_mask: bool,
    pub diagnostics: KernelDiagnostics,
}

impl KernelMatrix {
    pub fn nrows(&self) -> usize {
        self.grid.n()
    }

    pub fn ncols(&self) -> usize {
        self.cols.len()
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    /// Source times t'_j.
    pub fn source_times(&self) -> &[f64] {
        &self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[j * self.nrows() + i]
    }

    pub fn column(&self, j: usize) -> &[f64] {
        let n = self.nrows();
        &self.values[j * n..(j + 1) * n]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Trapezoid quadrature weights in t' (dt spacing, halved ends).
    pub fn quadrature_weights(&self) -> Vec<f64> {
        let m = self.ncols();
        let dt = self.grid.dt();
        let mut w = vec![dt; m];
        if m > 1 {
            w[0] *= 0.5;
            w[m - 1] *= 0.5;
        }
        w
    }

    /// data_i = Σ_j K[i][j] q_j w_j.
    pub fn apply(&self, q: &[f64]) -> Result<Vec<f64>> {
        if q.len() != self.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "kernel has {} columns, got {} samples",
                self.ncols(),
                q.len()
            )));
        }
        let w = self.quadrature_weights();
        let n = self.nrows();
        let mut out = vec![0.0; n];
        for j in 0..self.ncols() {
            let f = q[j] * w[j];
            if f == 0.0 {
                continue;
            }
            let col = self.column(j);
            for i in 0..n {
                out[i] += col[i] * f;
            }
        }
        Ok(out)
    }

    /// Quadrature-scaled system matrix A = K diag(w), row-major rows.
    pub fn scaled_row(&self, i: usize, w: &[f64]) -> Vec<f64> {
        (0..self.ncols()).map(|j| self.get(i, j) * w[j]).collect()
    }

    fn from_columns(
        kind: KernelKind,
        law: AttenuationLaw,
        pulse: Pulse,
        grid: TimeGrid,
        cols: Vec<f64>,
        columns: Vec<Vec<f64>>,
        causal_mask: bool,
        diagnostics: KernelDiagnostics,
    ) -> Self {
        let n = grid.n();
        let mut values = Vec::with_capacity(n * columns.len());
        for c in &columns {
            debug_assert_eq!(c.len(), n);
            values.extend_from_slice(c);
        }
        KernelMatrix { kind, law, pulse, grid, cols, values, causal_mask, diagnostics }
    }

    /// Reassemble from row-major data (deserialization); source times are
    /// implied by the kind (grid times, or [0, R₀] for a planar kernel).
    pub fn from_rows(
        kind: KernelKind,
        law: AttenuationLaw,
        pulse: Pulse,
        grid: TimeGrid,
        rows: Vec<Vec<f64>>,
        causal_mask: bool,
        diagnostics: KernelDiagnostics,
    ) -> crate::error::Result<Self> {
        let n = grid.n();
        if rows.len() != n {
            return Err(crate::error::Error::DimensionMismatch(format!(
                "expected {n} rows, got {}",
                rows.len()
            )));
        }
        let ncols = rows.first().map(|r| r.len()).unwrap_or(0);
        let cols: Vec<f64> = match kind {
            KernelKind::PlanarDetector { .. } => {
                (0..ncols).map(|j| j as f64 * grid.dt()).collect()
            }
            _ => grid.times(),
        };
        if cols.len() != ncols {
            return Err(crate::error::Error::DimensionMismatch(format!(
                "expected {} columns, got {ncols}",
                cols.len()
            )));
        }
        let mut values = vec![0.0; n * ncols];
        for (i, r) in rows.iter().enumerate() {
            for (j, v) in r.iter().enumerate() {
                values[j * n + i] = *v;
            }
        }
        Ok(KernelMatrix { kind, law, pulse, grid, cols, values, causal_mask, diagnostics })
    }
}

/// Smallest t' whose column spectrum decays to [`RESOLVE_EDGE_RATIO`] at
/// the band edge; 0 for the lossless law (exact discrete representation).
pub fn resolve_time(law: &AttenuationLaw, grid: &TimeGrid) -> f64 {
    if !law.is_dissipative() {
        return 0.0;
    }
    let nyq = grid.frequency_grid().nyquist();
    let dc = omega_over_k(law, 0.0).norm() / SQRT_2PI;
    let edge = |tp: f64| m_hat(law, nyq, tp).norm() / dc;
    if edge(grid.t_max()) > RESOLVE_EDGE_RATIO {
        return f64::INFINITY;
    }
    let (mut lo, mut hi) = (0.0, grid.t_max());
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if edge(mid) <= RESOLVE_EDGE_RATIO {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

struct BuiltColumn {
    col: Vec<f64>,
    leak: f64,
    zeroed: bool,
}

fn zero_column(n: usize) -> BuiltColumn {
    BuiltColumn { col: vec![0.0; n], leak: 0.0, zeroed: true }
}

/// Synthesize one column from its positive-frequency spectrum, mask the
/// samples below `mask_idx`, and report the pre-mask leakage there.
fn build_column<F>(syn: &Synthesizer, spec: F, mask_idx: usize, mask: bool) -> BuiltColumn
where
    F: Fn(f64) -> Complex64,
{
    let mut col = syn.synthesize_hermitian(spec);
    let total: f64 = col.iter().map(|v| v * v).sum();
    let below: f64 = col[..mask_idx.min(col.len())].iter().map(|v| v * v).sum();
    let leak = if total > 0.0 { below / total } else { 0.0 };
    if mask {
        for v in col.iter_mut().take(mask_idx.min(col.len())) {
            *v = 0.0;
        }
    }
    BuiltColumn { col, leak, zeroed: false }
}

fn guard_leakage(kind: &str, diag: &KernelDiagnostics, dissipative: bool) -> Result<()> {
    if !dissipative {
        return Ok(());
    }
    for (j, &l) in diag.column_leakage.iter().enumerate() {
        if l > LEAK_TOL {
            return Err(Error::Resolution(format!(
                "{kind} column {j}: pre-mask energy at t < t' is {l:.3e} (> {LEAK_TOL:.0e}); \
                 the attenuation law is acausal on this grid"
            )));
        }
    }
    Ok(())
}

/// Discretized M_γ(t, t') over the full (t, t') grid.
///
/// Column j is the inverse DFT of M̂(·, t'_j) with entries at t_i < t'_j
/// forced to zero; the delta of the lossless kernel sits on the diagonal
/// and is kept.
pub fn m_matrix(law: &AttenuationLaw, grid: &TimeGrid) -> Result<KernelMatrix> {
    let syn = Synthesizer::new(*grid, PAD);
    let tres = resolve_time(law, grid);
    let n = grid.n();
    let built: Vec<BuiltColumn> = (0..n)
        .into_par_iter()
        .map(|j| {
            let tp = grid.time(j);
            if law.is_dissipative() && tp < tres {
                return zero_column(n);
            }
            build_column(&syn, |w| m_hat(law, w, tp), j, true)
        })
        .collect();
    finish(KernelKind::Dissipation, law, Pulse::Delta, *grid, grid.times(), built, true, tres)
}

fn finish(
    kind: KernelKind,
    law: &AttenuationLaw,
    pulse: Pulse,
    grid: TimeGrid,
    cols: Vec<f64>,
    built: Vec<BuiltColumn>,
    causal_mask: bool,
    tres: f64,
) -> Result<KernelMatrix> {
    let diagnostics = KernelDiagnostics {
        column_leakage: built.iter().map(|b| b.leak).collect(),
        zeroed_columns: built.iter().filter(|b| b.zeroed).count(),
        resolve_time: tres,
    };
    let kname = match kind {
        KernelKind::Dissipation => "M",
        KernelKind::PulsedDissipation => "I*M",
        KernelKind::PointDetector => "N_point",
        KernelKind::PlanarDetector { .. } => "N_planar",
        KernelKind::LineDetector => "N_line",
    };
    guard_leakage(kname, &diagnostics, law.is_dissipative())?;
    let columns: Vec<Vec<f64>> = built.into_iter().map(|b| b.col).collect();
    Ok(KernelMatrix::from_columns(kind, *law, pulse, grid, cols, columns, causal_mask, diagnostics))
}

/// (I *_t M)(t, t') by causal discrete convolution along t of every
/// column. The delta pulse returns the input unchanged.
pub fn convolve_pulse(m: &KernelMatrix, pulse: &Pulse) -> KernelMatrix {
    if pulse.is_delta() {
        let mut out = m.clone();
        out.pulse = Pulse::Delta;
        return out;
    }
    let n = m.nrows();
    let grid = *m.grid();
    let columns: Vec<Vec<f64>> = (0..m.ncols())
        .into_par_iter()
        .map(|j| pulse.convolve_signal(m.column(j), &grid))
        .collect();
    let kind = match m.kind {
        KernelKind::Dissipation => KernelKind::PulsedDissipation,
        k => k,
    };
    let mut values = Vec::with_capacity(n * columns.len());
    for c in &columns {
        values.extend_from_slice(c);
    }
    KernelMatrix {
        kind,
        law: m.law,
        pulse: *pulse,
        grid,
        cols: m.cols.clone(),
        values,
        causal_mask: m.causal_mask,
        diagnostics: m.diagnostics.clone(),
    }
}

/// Point-detector kernel N_γ(t,t') = -(4πt')^{-1} (I *_t ∂M_γ/∂t')(t,t').
///
/// ∂M/∂t' is analytic in the frequency domain: multiply M̂ by i k(ω). The
/// t' = 0 column is zero (the boundary term of the defining integration by
/// parts vanishes). For the lossless law the columns are two-sided
/// band-limited derivative stencils and no support mask is applied.
pub fn n_point(law: &AttenuationLaw, pulse: &Pulse, grid: &TimeGrid) -> Result<KernelMatrix> {
    let syn = Synthesizer::new(*grid, PAD);
    let tres = resolve_time(law, grid);
    let dissipative = law.is_dissipative();
    let n = grid.n();
    let built: Vec<BuiltColumn> = (0..n)
        .into_par_iter()
        .map(|j| {
            let tp = grid.time(j);
            if j == 0 || (dissipative && tp < tres) {
                return zero_column(n);
            }
            let scale = -1.0 / (4.0 * std::f64::consts::PI * tp);
            let mut b = build_column(
                &syn,
                |w| Complex64::i() * wavenumber(law, w) * m_hat(law, w, tp),
                j,
                dissipative,
            );
            for v in b.col.iter_mut() {
                *v *= scale;
            }
            if !dissipative {
                b.leak = 0.0; // two-sided stencil by construction
            }
            b
        })
        .collect();
    let m = finish(
        KernelKind::PointDetector,
        law,
        Pulse::Delta,
        *grid,
        grid.times(),
        built,
        dissipative,
        tres,
    )?;
    Ok(convolve_pulse(&m, pulse))
}

/// Planar-detector kernel N_γ(t,t') = 2 (I *_t M_γ)(t, R₀ - t') for
/// t' in [0, R₀].
///
/// R₀ must lie on the grid (within 1e-9·dt) so the shifted source times
/// are exact sample points. Rows span the whole grid; rows with t > R₀
/// carry the late tails of near-side sources only, so inversions feeding
/// all rows assume no source mass beyond the central plane E(n, 0).
pub fn n_planar(
    law: &AttenuationLaw,
    pulse: &Pulse,
    grid: &TimeGrid,
    r0: f64,
) -> Result<KernelMatrix> {
    if !(r0 > 0.0) {
        return Err(Error::Range(format!("need R0 > 0, got {r0}")));
    }
    let dt = grid.dt();
    let jr0 = (r0 / dt).round() as usize;
    if (jr0 as f64 * dt - r0).abs() > 1e-9 * dt.max(r0) {
        return Err(Error::Range(format!(
            "R0 = {r0} is not a grid point (dt = {dt}); pick t_max = n·dt with R0/dt integral"
        )));
    }
    if jr0 == 0 || jr0 >= grid.n() {
        return Err(Error::Range(format!(
            "grid window {} does not cover [0, R0 + T]; R0 = {r0}",
            grid.t_max()
        )));
    }
    let syn = Synthesizer::new(*grid, PAD);
    let tres = resolve_time(law, grid);
    let dissipative = law.is_dissipative();
    let n = grid.n();
    let built: Vec<BuiltColumn> = (0..=jr0)
        .into_par_iter()
        .map(|j| {
            let sidx = jr0 - j; // source distance s = R0 - t'
            let s = sidx as f64 * dt;
            if dissipative && s < tres {
                return zero_column(n);
            }
            let mut b = build_column(&syn, |w| m_hat(law, w, s), sidx, true);
            for v in b.col.iter_mut() {
                *v *= 2.0;
            }
            b
        })
        .collect();
    let cols: Vec<f64> = (0..=jr0).map(|j| j as f64 * dt).collect();
    let m = finish(
        KernelKind::PlanarDetector { r0 },
        law,
        Pulse::Delta,
        *grid,
        cols,
        built,
        false,
        tres,
    )?;
    Ok(convolve_pulse(&m, pulse))
}

/// Line-detector kernel
/// N_γ(t,t') = -(2π)^{-1} ∫_{t'}^{t} (s²-t'²)^{-1/2} (I *_t ∂M_γ/∂s)(t,s) ds.
///
/// Because I*∂M/∂s vanishes for s > t, the upper limit extends to ∞ and
/// the s-integral collapses to a closed form per frequency:
/// ∫_{t'}^∞ e^{iks}(s²-t'²)^{-1/2} ds = (iπ/2) H₀⁽¹⁾(k t'), giving the
/// column spectrum ω H₀⁽¹⁾(k(ω) t') / (4·sqrt(2π)) — the two-dimensional
/// free-space response the line integration reduces to.
pub fn n_line(law: &AttenuationLaw, pulse: &Pulse, grid: &TimeGrid) -> Result<KernelMatrix> {
    let syn = Synthesizer::new(*grid, PAD);
    let tres = resolve_time(law, grid);
    let dissipative = law.is_dissipative();
    let n = grid.n();
    let built: Vec<BuiltColumn> = (0..n)
        .into_par_iter()
        .map(|j| {
            let tp = grid.time(j);
            if j == 0 || (dissipative && tp < tres) {
                return zero_column(n);
            }
            let mut b = build_column(
                &syn,
                |w| {
                    if w == 0.0 {
                        return Complex64::new(0.0, 0.0);
                    }
                    let z = wavenumber(law, w) * tp;
                    w / (4.0 * SQRT_2PI) * hankel1_0(z)
                },
                j,
                dissipative,
            );
            if !dissipative {
                b.leak = 0.0; // band-limited Abel kernel is two-sided
            }
            b
        })
        .collect();
    let m = finish(
        KernelKind::LineDetector,
        law,
        Pulse::Delta,
        *grid,
        grid.times(),
        built,
        dissipative,
        tres,
    )?;
    Ok(convolve_pulse(&m, pulse))
}
