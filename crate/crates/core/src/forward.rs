//! Forward data generation: ideal (unattenuated) point-detector pressure,
//! attenuated data for the three detector types through the kernel
//! matrices, and an independent Green-function oracle path.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::attenuation::{wavenumber, AttenuationLaw, C0};
use crate::error::{Error, Result};
use crate::grid::{Synthesizer, TimeGrid, SQRT_2PI};
use crate::kernels::{n_line, n_planar, n_point, KernelKind, KernelMatrix};
use crate::projections::{
    circular_projection, dot, norm, planar_projection, spherical_projection, sub, Phantom, Vec3,
};
use crate::pulse::Pulse;

/// Detector geometry attached to a signal.
#[derive(Debug, Clone, PartialEq)]
pub enum Geometry {
    Point { position: Vec3 },
    Planar { normal: Vec3, r0: f64 },
    Line { plane_normal: Vec3, position: Vec3 },
}

/// One per-detector time series; `values[0]` corresponds to t = 0.
#[derive(Debug, Clone)]
pub struct PressureSignal {
    pub detector: String,
    pub geometry: Geometry,
    pub grid: TimeGrid,
    pub values: Vec<f64>,
}

impl PressureSignal {
    pub fn l2_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Default window 2(R₀ + max radius)/c₀ plus five dissipation time-scales
/// and the pulse support.
pub fn default_time_window(
    r0: f64,
    phantom: &Phantom,
    law: &AttenuationLaw,
    pulse: &Pulse,
) -> f64 {
    let tau0 = match law {
        AttenuationLaw::CausalLaw { tau0, .. } => *tau0,
        _ => 0.0,
    };
    2.0 * (r0 + phantom.max_radius()) / C0
        + 5.0 * (tau0 + law.alpha0() / C0)
        + pulse.support_len()
}

/// p₀(x, t) = ∂/∂t [R_sp(φ)(x,t)/(4πt)] evaluated in closed form per ball.
///
/// For d = |x-c| > 0 the band |d-t| < R contributes amplitude·(d-t)/(2d);
/// when the detector sits inside the ball (d < R) the region t < R-d adds
/// the constant amplitude. The jump at the band edges is the wavefront.
pub fn ideal_point_pressure(phantom: &Phantom, x: &Vec3, grid: &TimeGrid) -> PressureSignal {
    let values = grid
        .times()
        .iter()
        .map(|&t| {
            let mut v = 0.0;
            for b in &phantom.balls {
                let d = norm(&sub(x, &b.center));
                if d < 1e-14 {
                    if t < b.radius {
                        v += b.amplitude;
                    }
                    continue;
                }
                if (d - t).abs() < b.radius {
                    v += b.amplitude * (d - t) / (2.0 * d);
                }
                if d < b.radius && t < b.radius - d {
                    v += b.amplitude;
                }
            }
            v
        })
        .collect();
    PressureSignal {
        detector: "ideal-point".into(),
        geometry: Geometry::Point { position: *x },
        grid: *grid,
        values,
    }
}

/// p_γ(x, t_i) = Σ_j N_point[i][j] R_sp(φ)(x, t'_j) w_j for a prebuilt
/// point kernel.
pub fn attenuated_point_data_with(
    kernel: &KernelMatrix,
    phantom: &Phantom,
    x: &Vec3,
) -> Result<PressureSignal> {
    if !matches!(kernel.kind, KernelKind::PointDetector) {
        return Err(Error::DimensionMismatch("expected a point-detector kernel".into()));
    }
    let rsp: Vec<f64> = kernel
        .source_times()
        .iter()
        .map(|&tp| spherical_projection(phantom, x, tp))
        .collect();
    let values = kernel.apply(&rsp)?;
    Ok(PressureSignal {
        detector: "point".into(),
        geometry: Geometry::Point { position: *x },
        grid: *kernel.grid(),
        values,
    })
}

pub fn attenuated_point_data(
    phantom: &Phantom,
    law: &AttenuationLaw,
    pulse: &Pulse,
    x: &Vec3,
    grid: &TimeGrid,
) -> Result<PressureSignal> {
    let kernel = n_point(law, pulse, grid)?;
    attenuated_point_data_with(&kernel, phantom, x)
}

/// R_pl(p_γ(·,t))(n, R₀) through a prebuilt planar kernel. Rows beyond
/// t = R₀ are valid only when the phantom lies on the near side of the
/// central plane (all balls with c·n - R ≥ 0); earlier rows always are.
pub fn attenuated_planar_data_with(
    kernel: &KernelMatrix,
    phantom: &Phantom,
    n: &Vec3,
) -> Result<PressureSignal> {
    let KernelKind::PlanarDetector { r0 } = kernel.kind else {
        return Err(Error::DimensionMismatch("expected a planar-detector kernel".into()));
    };
    let rpl: Vec<f64> = kernel
        .source_times()
        .iter()
        .map(|&tp| planar_projection(phantom, n, tp))
        .collect();
    let values = kernel.apply(&rpl)?;
    Ok(PressureSignal {
        detector: "planar".into(),
        geometry: Geometry::Planar { normal: *n, r0 },
        grid: *kernel.grid(),
        values,
    })
}

pub fn attenuated_planar_data(
    phantom: &Phantom,
    law: &AttenuationLaw,
    pulse: &Pulse,
    n: &Vec3,
    r0: f64,
    grid: &TimeGrid,
) -> Result<PressureSignal> {
    let kernel = n_planar(law, pulse, grid, r0)?;
    attenuated_planar_data_with(&kernel, phantom, n)
}

/// L_n(p_γ(·,t))(x) through a prebuilt line kernel.
pub fn attenuated_line_data_with(
    kernel: &KernelMatrix,
    phantom: &Phantom,
    n: &Vec3,
    x: &Vec3,
) -> Result<PressureSignal> {
    if !matches!(kernel.kind, KernelKind::LineDetector) {
        return Err(Error::DimensionMismatch("expected a line-detector kernel".into()));
    }
    let rc = circular_projections_on(kernel.source_times(), phantom, n, x)?;
    let values = kernel.apply(&rc)?;
    Ok(PressureSignal {
        detector: "line".into(),
        geometry: Geometry::Line { plane_normal: *n, position: *x },
        grid: *kernel.grid(),
        values,
    })
}

pub fn circular_projections_on(
    times: &[f64],
    phantom: &Phantom,
    n: &Vec3,
    x: &Vec3,
) -> Result<Vec<f64>> {
    times
        .par_iter()
        .map(|&tp| circular_projection(phantom, n, x, tp))
        .collect()
}

pub fn attenuated_line_data(
    phantom: &Phantom,
    law: &AttenuationLaw,
    pulse: &Pulse,
    n: &Vec3,
    x: &Vec3,
    grid: &TimeGrid,
) -> Result<PressureSignal> {
    let kernel = n_line(law, pulse, grid)?;
    attenuated_line_data_with(&kernel, phantom, n, x)
}

/// Options for the Green-function oracle lattice.
#[derive(Debug, Clone, Copy)]
pub struct GreenOptions {
    /// Lattice cells per ball radius; the default keeps each ball at or
    /// below 10⁴ nodes.
    pub cells_per_radius: usize,
    /// Subsamples per axis used to weight boundary cells by their inside
    /// volume fraction.
    pub boundary_subsamples: usize,
}

impl Default for GreenOptions {
    fn default() -> Self {
        GreenOptions { cells_per_radius: 12, boundary_subsamples: 4 }
    }
}

/// p_γ(x,·) as a superposition of time-differentiated attenuated Green
/// functions over a point-mass lattice inside each ball
/// (`F⁻¹{(-iω)·e^{ik(ω)r}/(4πr·sqrt(2π))}` per node). Ideal pulse only.
pub fn green_forward(
    phantom: &Phantom,
    law: &AttenuationLaw,
    x: &Vec3,
    grid: &TimeGrid,
    opts: &GreenOptions,
) -> Result<PressureSignal> {
    let syn = Synthesizer::new(*grid, 4);
    let nf = syn.padded_grid().n();
    let freq = syn.freq().clone();

    // gather (distance, mass) for every lattice node of every ball
    let mut nodes: Vec<(f64, f64)> = Vec::new();
    for b in &phantom.balls {
        let npr = opts.cells_per_radius as i64;
        let h = 2.0 * b.radius / (2 * npr + 1) as f64;
        let half_diag = 3.0_f64.sqrt() * h / 2.0;
        let sub_n = opts.boundary_subsamples.max(1);
        for ix in -npr..=npr {
            for iy in -npr..=npr {
                for iz in -npr..=npr {
                    let c = [ix as f64 * h, iy as f64 * h, iz as f64 * h];
                    let r = norm(&c);
                    let frac = if r <= b.radius - half_diag {
                        1.0
                    } else if r <= b.radius + half_diag {
                        inside_fraction(&c, h, b.radius, sub_n)
                    } else {
                        0.0
                    };
                    if frac == 0.0 {
                        continue;
                    }
                    let p = [b.center[0] + c[0], b.center[1] + c[1], b.center[2] + c[2]];
                    nodes.push((norm(&sub(x, &p)), b.amplitude * frac * h * h * h));
                }
            }
        }
    }
    if nodes.iter().any(|(r, _)| *r < 1e-12) {
        return Err(Error::Range("detector coincides with a source node".into()));
    }

    // accumulate the spectrum in parallel chunks
    let spec = nodes
        .par_chunks(256)
        .map(|chunk| {
            let mut acc = vec![Complex64::new(0.0, 0.0); nf / 2 + 1];
            for &(r, m) in chunk {
                let a = m / (4.0 * std::f64::consts::PI * r * SQRT_2PI);
                for (j, slot) in acc.iter_mut().enumerate() {
                    let w = freq.omega(j);
                    let kr = wavenumber(law, w) * r;
                    *slot += Complex64::new(0.0, -w) * (Complex64::i() * kr).exp() * a;
                }
            }
            acc
        })
        .reduce(
            || vec![Complex64::new(0.0, 0.0); nf / 2 + 1],
            |mut a, b| {
                for (x, y) in a.iter_mut().zip(&b) {
                    *x += y;
                }
                a
            },
        );

    let values = syn.synthesize_hermitian(|w| {
        let j = (w / freq.domega()).round() as usize;
        spec[j.min(nf / 2)]
    });
    Ok(PressureSignal {
        detector: "green".into(),
        geometry: Geometry::Point { position: *x },
        grid: *grid,
        values,
    })
}

/// Runs the lattice at the given and at twice the resolution and reports
/// the relative L² change; above 2% the lattice is too coarse for the
/// requested phantom.
pub fn green_refinement_check(
    phantom: &Phantom,
    law: &AttenuationLaw,
    x: &Vec3,
    grid: &TimeGrid,
    opts: &GreenOptions,
) -> Result<(PressureSignal, f64)> {
    let coarse = green_forward(phantom, law, x, grid, opts)?;
    let fine = green_forward(
        phantom,
        law,
        x,
        grid,
        &GreenOptions { cells_per_radius: opts.cells_per_radius * 2, ..*opts },
    )?;
    let num: f64 = coarse
        .values
        .iter()
        .zip(&fine.values)
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    let den: f64 = fine.values.iter().map(|v| v * v).sum();
    Ok((fine, (num / den).sqrt()))
}

fn inside_fraction(cell_center: &Vec3, h: f64, radius: f64, sub_n: usize) -> f64 {
    let mut hits = 0usize;
    let total = sub_n * sub_n * sub_n;
    for a in 0..sub_n {
        for b in 0..sub_n {
            for c in 0..sub_n {
                let off = |i: usize| ((i as f64 + 0.5) / sub_n as f64 - 0.5) * h;
                let p = [
                    cell_center[0] + off(a),
                    cell_center[1] + off(b),
                    cell_center[2] + off(c),
                ];
                if dot(&p, &p) <= radius * radius {
                    hits += 1;
                }
            }
        }
    }
    hits as f64 / total as f64
}

/// Relative L² distance between two equally long series.
pub fn rel_l2(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    let den: f64 = b.iter().map(|y| y * y).sum();
    (num / den).sqrt()
}
