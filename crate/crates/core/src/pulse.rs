//! Temporal excitation pulses: the idealized delta and a continuous
//! raised-cosine pulse with unit integral supported in [0, t1].

use crate::error::{Error, Result};
use crate::grid::TimeGrid;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Pulse {
    Delta,
    RaisedCosine { t1: f64 },
}

impl Pulse {
    pub fn delta() -> Self {
        Pulse::Delta
    }

    pub fn raised_cosine(t1: f64) -> Result<Self> {
        if !(t1 > 0.0) || !t1.is_finite() {
            return Err(Error::Range(format!("need t1 > 0, got {t1}")));
        }
        Ok(Pulse::RaisedCosine { t1 })
    }

    pub fn is_delta(&self) -> bool {
        matches!(self, Pulse::Delta)
    }

    pub fn support_len(&self) -> f64 {
        match *self {
            Pulse::Delta => 0.0,
            Pulse::RaisedCosine { t1 } => t1,
        }
    }

    /// Pointwise value; the delta has no pointwise representation and is
    /// handled separately by [`convolve_signal`].
    pub fn value(&self, t: f64) -> f64 {
        match *self {
            Pulse::Delta => panic!("delta pulse has no pointwise values"),
            Pulse::RaisedCosine { t1 } => {
                if t < 0.0 || t > t1 {
                    0.0
                } else {
                    (1.0 - (2.0 * std::f64::consts::PI * t / t1).cos()) / t1
                }
            }
        }
    }

    /// Grid samples over the pulse support (empty for the delta).
    pub fn samples(&self, grid: &TimeGrid) -> Vec<f64> {
        match *self {
            Pulse::Delta => Vec::new(),
            Pulse::RaisedCosine { t1 } => {
                let m = ((t1 / grid.dt()).ceil() as usize + 1).min(grid.n());
                (0..m).map(|i| self.value(grid.time(i))).collect()
            }
        }
    }

    /// Causal discrete convolution `(I * f)(t_i) = Σ_m I(t_m) f(t_{i-m}) dt`.
    /// The delta pulse returns `f` unchanged.
    pub fn convolve_signal(&self, f: &[f64], grid: &TimeGrid) -> Vec<f64> {
        match self {
            Pulse::Delta => f.to_vec(),
            Pulse::RaisedCosine { .. } => {
                let samples = self.samples(grid);
                let dt = grid.dt();
                let n = f.len();
                let mut out = vec![0.0; n];
                for (m, &im) in samples.iter().enumerate() {
                    if im == 0.0 {
                        continue;
                    }
                    let w = im * dt;
                    for i in m..n {
                        out[i] += w * f[i - m];
                    }
                }
                out
            }
        }
    }
}
