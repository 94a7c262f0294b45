//! Uniform time grids and their paired DFT frequency grids.
//!
//! All spectra in this crate use the symmetric Fourier convention
//! `f̂(ω) = (2π)^{-1/2} ∫ f(t) e^{iωt} dt`, so a causal signal extends
//! holomorphically to the upper half plane. On a grid of `n` samples with
//! spacing `dt`, the frequencies sit in DFT layout (0, dω, …, ±Nyquist,
//! …, −dω) with `n·dω·dt = 2π`.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

pub const SQRT_2PI: f64 = 2.506_628_274_631_000_5;

/// Uniform sampling t_i = i·dt, i = 0..n-1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    n: usize,
    dt: f64,
}

impl TimeGrid {
    pub fn new(n: usize, dt: f64) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidGrid(format!("need n >= 2, got {n}")));
        }
        if !n.is_power_of_two() {
            return Err(Error::InvalidGrid(format!("n must be a power of two, got {n}")));
        }
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::InvalidGrid(format!("need dt > 0, got {dt}")));
        }
        Ok(TimeGrid { n, dt })
    }

    /// Grid covering `[0, t_max)` with `n` samples.
    pub fn with_window(n: usize, t_max: f64) -> Result<Self> {
        if !(t_max > 0.0) {
            return Err(Error::InvalidGrid(format!("need t_max > 0, got {t_max}")));
        }
        Self::new(n, t_max / n as f64)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Window length n·dt.
    pub fn t_max(&self) -> f64 {
        self.n as f64 * self.dt
    }

    pub fn time(&self, i: usize) -> f64 {
        i as f64 * self.dt
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.time(i)).collect()
    }

    pub fn frequency_grid(&self) -> FrequencyGrid {
        FrequencyGrid::paired_with(self)
    }

    /// Same spacing, `factor` times as many samples.
    pub fn padded(&self, factor: usize) -> TimeGrid {
        TimeGrid { n: self.n * factor, dt: self.dt }
    }
}

/// DFT frequency layout paired with a [`TimeGrid`]: n·dω·dt = 2π.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyGrid {
    n: usize,
    domega: f64,
}

impl FrequencyGrid {
    pub fn paired_with(grid: &TimeGrid) -> Self {
        FrequencyGrid {
            n: grid.n,
            domega: 2.0 * std::f64::consts::PI / (grid.n as f64 * grid.dt),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn domega(&self) -> f64 {
        self.domega
    }

    /// ω at DFT bin `j` (0, dω, …, −dω ordering; bin n/2 is the Nyquist bin).
    pub fn omega(&self, j: usize) -> f64 {
        let j = j % self.n;
        if j <= self.n / 2 {
            j as f64 * self.domega
        } else {
            (j as f64 - self.n as f64) * self.domega
        }
    }

    pub fn omegas(&self) -> Vec<f64> {
        (0..self.n).map(|j| self.omega(j)).collect()
    }

    pub fn nyquist(&self) -> f64 {
        self.n as f64 / 2.0 * self.domega
    }
}

/// Shared FFT plan for spectrum→time synthesis at one padded length.
pub struct Synthesizer {
    grid: TimeGrid,
    padded: TimeGrid,
    freq: FrequencyGrid,
    fft: Arc<dyn Fft<f64>>,
}

impl Synthesizer {
    /// `pad` multiplies the synthesis length; columns are cut back to
    /// `grid.n` samples so wrap-around from slowly decaying tails stays out
    /// of the window.
    pub fn new(grid: TimeGrid, pad: usize) -> Self {
        let padded = grid.padded(pad.max(1));
        let freq = padded.frequency_grid();
        let fft = FftPlanner::new().plan_fft_forward(padded.n());
        Synthesizer { grid, padded, freq, fft }
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn padded_grid(&self) -> &TimeGrid {
        &self.padded
    }

    pub fn freq(&self) -> &FrequencyGrid {
        &self.freq
    }

    /// Samples `spec` on the padded DFT bins and returns the first
    /// `grid.n` samples of F^{-1}{spec}. The Nyquist bin is realified so a
    /// Hermitian spectrum synthesizes to a real signal at round-off.
    pub fn synthesize<F>(&self, spec: F) -> Vec<f64>
    where
        F: Fn(f64) -> Complex64,
    {
        let n = self.padded.n();
        let mut buf: Vec<Complex64> = (0..n).map(|j| spec(self.freq.omega(j))).collect();
        buf[n / 2] = Complex64::new(buf[n / 2].re, 0.0);
        self.run(buf)
    }

    /// As `synthesize`, but evaluates the spectrum on ω > 0 only and fills
    /// ω < 0 by Hermitian mirroring. Used when the analytic continuation to
    /// negative frequencies is awkward (Hankel-function spectra).
    pub fn synthesize_hermitian<F>(&self, spec_pos: F) -> Vec<f64>
    where
        F: Fn(f64) -> Complex64,
    {
        let n = self.padded.n();
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        for j in 1..=n / 2 {
            buf[j] = spec_pos(self.freq.omega(j));
        }
        buf[0] = spec_pos(0.0);
        buf[0] = Complex64::new(buf[0].re, 0.0);
        buf[n / 2] = Complex64::new(buf[n / 2].re, 0.0);
        for j in n / 2 + 1..n {
            buf[j] = buf[n - j].conj();
        }
        self.run(buf)
    }

    fn run(&self, mut buf: Vec<Complex64>) -> Vec<f64> {
        let n = self.padded.n();
        self.fft.process(&mut buf);
        let scale = SQRT_2PI / (n as f64 * self.padded.dt());
        buf.truncate(self.grid.n());
        buf.into_iter().map(|c| c.re * scale).collect()
    }

    /// Max |Im|/max|Re| of the full padded synthesis; diagnostic for the
    /// realness invariant.
    pub fn imaginary_residue<F>(&self, spec: F) -> f64
    where
        F: Fn(f64) -> Complex64,
    {
        let n = self.padded.n();
        let mut buf: Vec<Complex64> = (0..n).map(|j| spec(self.freq.omega(j))).collect();
        buf[n / 2] = Complex64::new(buf[n / 2].re, 0.0);
        self.fft.process(&mut buf);
        let max_re = buf.iter().map(|c| c.re.abs()).fold(0.0, f64::max);
        let max_im = buf.iter().map(|c| c.im.abs()).fold(0.0, f64::max);
        if max_re == 0.0 {
            0.0
        } else {
            max_im / max_re
        }
    }
}
