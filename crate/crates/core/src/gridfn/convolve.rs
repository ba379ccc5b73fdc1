use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use super::{Extension, Grid, GridFunction};
use crate::error::{Error, Result};
use crate::kernel::Kernel;

/// Which summation path a [`Convolver`] uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ConvolutionMethod {
    /// Pick by estimated cost.
    #[default]
    Auto,
    /// Direct stencil summation.
    Direct,
    /// Circular convolution by FFT (zero-padded for non-periodic rules).
    Fft,
}

struct FftPlan {
    size: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    spectrum: Vec<Complex<f64>>,
}

impl std::fmt::Debug for FftPlan {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FftPlan").field("size", &self.size).finish()
    }
}

/// Stencil length above which [`ConvolutionMethod::Auto`] considers FFT.
pub const AUTO_FFT_MIN_STENCIL: usize = 1024;

/// Discrete convolution `(J * u)(x_i) = sum_j w_j u(x_i - j h)` on a fixed
/// grid and extension rule, with the kernel resampled onto the grid spacing.
#[derive(Debug, Clone)]
pub struct Convolver {
    grid: Grid,
    extension: Extension,
    kernel: Kernel,
    method: ConvolutionMethod,
    plan: Option<Arc<FftPlan>>,
}

impl Convolver {
    pub fn new(kernel: &Kernel, grid: Grid, extension: Extension) -> Result<Self> {
        Self::with_method(kernel, grid, extension, ConvolutionMethod::Auto)
    }

    pub fn with_method(
        kernel: &Kernel,
        grid: Grid,
        extension: Extension,
        method: ConvolutionMethod,
    ) -> Result<Self> {
        let kernel = kernel.with_quadrature_step(grid.h())?;
        let stencil_len = kernel.stencil().len();
        if stencil_len >= grid.len() {
            return Err(Error::DomainTooNarrow {
                points: grid.len(),
                stencil: stencil_len,
            });
        }
        let n = grid.len();
        let m = kernel.stencil().radius;
        let fft_size = match extension {
            Extension::Periodic => n,
            _ => (n + 2 * m).next_power_of_two(),
        };
        let method = match method {
            ConvolutionMethod::Auto => {
                // FFT output carries signed roundoff of order 1e-16 * sup|u|
                // that growth terms amplify ahead of a front
                let direct = (n * stencil_len) as f64;
                let fft = 4.0 * fft_size as f64 * (fft_size as f64).log2();
                if stencil_len > AUTO_FFT_MIN_STENCIL && direct > fft {
                    ConvolutionMethod::Fft
                } else {
                    ConvolutionMethod::Direct
                }
            }
            other => other,
        };
        let mut conv = Convolver {
            grid,
            extension,
            kernel,
            method,
            plan: None,
        };
        if method == ConvolutionMethod::Fft {
            conv.plan = Some(Arc::new(conv.build_plan(fft_size)));
        }
        Ok(conv)
    }

    fn build_plan(&self, size: usize) -> FftPlan {
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(size);
        let inverse = planner.plan_fft_inverse(size);
        let mut spectrum = vec![Complex::new(0.0, 0.0); size];
        let stencil = self.kernel.stencil();
        match self.extension {
            Extension::Periodic => {
                for (j, w) in stencil.iter() {
                    spectrum[j.rem_euclid(size as i64) as usize].re += w;
                }
            }
            _ => {
                for (q, &w) in stencil.weights.iter().enumerate() {
                    spectrum[q].re = w;
                }
            }
        }
        forward.process(&mut spectrum);
        FftPlan {
            size,
            forward,
            inverse,
            spectrum,
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn extension(&self) -> Extension {
        self.extension
    }

    /// The kernel as resampled on the grid spacing.
    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    pub fn method(&self) -> ConvolutionMethod {
        self.method
    }

    /// Convolve raw grid values.
    pub fn apply(&self, values: &[f64]) -> Vec<f64> {
        assert_eq!(values.len(), self.grid.len(), "grid length mismatch");
        match self.method {
            ConvolutionMethod::Fft => self.apply_fft(values),
            _ => self.apply_direct(values),
        }
    }

    pub fn convolve(&self, u: &GridFunction) -> Result<GridFunction> {
        self.check(u)?;
        Ok(GridFunction::from_parts_unchecked(
            self.grid,
            self.apply(u.values()),
            self.extension,
        ))
    }

    pub(crate) fn check(&self, u: &GridFunction) -> Result<()> {
        if !u.grid().same_as(&self.grid) {
            return Err(Error::GridMismatch(format!(
                "{:?} vs {:?}",
                u.grid(),
                self.grid
            )));
        }
        if u.extension() != self.extension {
            return Err(Error::GridMismatch(format!(
                "extension {} vs {}",
                u.extension().name(),
                self.extension.name()
            )));
        }
        Ok(())
    }

    /// Direct stencil summation.
    pub fn apply_direct(&self, values: &[f64]) -> Vec<f64> {
        let n = values.len();
        let w = &self.kernel.stencil().weights;
        let m = self.kernel.stencil().radius;
        let ext = self.extension;
        let mut out = vec![0.0; n];
        for (i, o) in out.iter_mut().enumerate() {
            if i >= m && i + m < n {
                let s = &values[i - m..=i + m];
                *o = w.iter().zip(s.iter().rev()).map(|(a, b)| a * b).sum();
            } else {
                let c = (i + m) as i64;
                *o = w
                    .iter()
                    .enumerate()
                    .map(|(q, wq)| wq * ext.value(values, c - q as i64))
                    .sum();
            }
        }
        out
    }

    /// FFT path; agrees with [`Convolver::apply_direct`] to roundoff.
    pub fn apply_fft(&self, values: &[f64]) -> Vec<f64> {
        let plan = match &self.plan {
            Some(p) => Arc::clone(p),
            None => {
                let n = self.grid.len();
                let size = match self.extension {
                    Extension::Periodic => n,
                    _ => (n + 2 * self.kernel.stencil().radius).next_power_of_two(),
                };
                Arc::new(self.build_plan(size))
            }
        };
        let n = values.len();
        let m = self.kernel.stencil().radius;
        let mut buf = vec![Complex::new(0.0, 0.0); plan.size];
        let offset = match self.extension {
            Extension::Periodic => {
                for (b, &v) in buf.iter_mut().zip(values) {
                    b.re = v;
                }
                0
            }
            ext => {
                for (k, b) in buf.iter_mut().take(n + 2 * m).enumerate() {
                    b.re = ext.value(values, k as i64 - m as i64);
                }
                2 * m
            }
        };
        plan.forward.process(&mut buf);
        for (b, s) in buf.iter_mut().zip(&plan.spectrum) {
            *b *= s;
        }
        plan.inverse.process(&mut buf);
        let scale = 1.0 / plan.size as f64;
        buf[offset..offset + n]
            .iter()
            .map(|c| c.re * scale)
            .collect()
    }
}

/// Convolve a grid function with a kernel, honoring the function's
/// extension rule.
pub fn convolve(kernel: &Kernel, u: &GridFunction) -> Result<GridFunction> {
    Convolver::new(kernel, *u.grid(), u.extension())?.convolve(u)
}
