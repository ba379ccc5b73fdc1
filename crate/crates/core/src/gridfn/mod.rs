//! Grid functions: the discrete stand-in for bounded continuous functions on
//! the line, together with the convolution `J * u` and the distances used by
//! the compactness diagnostics.

mod convolve;

pub use convolve::{convolve, ConvolutionMethod, Convolver, AUTO_FFT_MIN_STENCIL};

use std::ops::Range;

use crate::error::{ensure_finite, Error, Result};

/// Uniform 1-D grid `x_i = x_min + i h`, `i = 0..n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    x_min: f64,
    x_max: f64,
    h: f64,
    n: usize,
}

impl Grid {
    pub const MIN_POINTS: usize = 8;

    pub fn new(x_min: f64, x_max: f64, n: usize) -> Result<Self> {
        ensure_finite("x_min", x_min)?;
        ensure_finite("x_max", x_max)?;
        if x_max <= x_min {
            return Err(Error::InvalidParameter {
                name: "x_max",
                reason: format!("must exceed x_min = {x_min}, got {x_max}"),
            });
        }
        if n < Self::MIN_POINTS {
            return Err(Error::InvalidParameter {
                name: "n",
                reason: format!("need at least {} points, got {n}", Self::MIN_POINTS),
            });
        }
        Ok(Grid {
            x_min,
            x_max,
            h: (x_max - x_min) / (n - 1) as f64,
            n,
        })
    }

    /// Grid with spacing `h`; the span must be an integer multiple of `h`.
    pub fn with_step(x_min: f64, x_max: f64, h: f64) -> Result<Self> {
        crate::error::ensure_positive("h", h)?;
        let span = x_max - x_min;
        let cells = (span / h).round();
        if !(cells.is_finite()) || (cells * h - span).abs() > 1e-9 * span.abs().max(h) {
            return Err(Error::InvalidParameter {
                name: "h",
                reason: format!("span {span} is not an integer multiple of {h}"),
            });
        }
        Grid::new(x_min, x_max, cells as usize + 1)
    }

    /// `n` points covering one period `[x_min, x_min + period)`; the point
    /// `x_min + period` is identified with `x_min`.
    pub fn periodic(x_min: f64, period: f64, n: usize) -> Result<Self> {
        crate::error::ensure_positive("period", period)?;
        let h = period / n as f64;
        let mut g = Grid::new(x_min, x_min + (n as f64 - 1.0) * h, n)?;
        g.h = h;
        Ok(g)
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Period of the grid under periodic extension.
    pub fn period(&self) -> f64 {
        self.n as f64 * self.h
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x_min + i as f64 * self.h
    }

    pub fn points(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n).map(move |i| self.x(i))
    }

    /// Two grids are compatible when they have the same points up to roundoff.
    pub fn same_as(&self, other: &Grid) -> bool {
        let scale = self.x_min.abs().max(self.x_max.abs()).max(1.0);
        self.n == other.n
            && (self.x_min - other.x_min).abs() <= 1e-12 * scale
            && (self.h - other.h).abs() <= 1e-12 * self.h
    }

    pub fn covers(&self, a: f64, b: f64) -> bool {
        let eps = 1e-9 * self.h;
        a >= self.x_min - eps && b <= self.x_max + eps
    }

    /// Indices of the grid points lying in the window.
    pub fn window_indices(&self, window: &Window) -> Result<Range<usize>> {
        if !self.covers(window.a, window.b) {
            return Err(Error::WindowOutOfRange {
                a: window.a,
                b: window.b,
                x_min: self.x_min,
                x_max: self.x_max,
            });
        }
        let eps = 1e-9;
        let lo = ((window.a - self.x_min) / self.h - eps).ceil().max(0.0) as usize;
        let hi = (((window.b - self.x_min) / self.h + eps).floor() as usize).min(self.n - 1);
        if lo > hi {
            return Err(Error::Precondition(format!(
                "window [{}, {}] contains no grid point",
                window.a, window.b
            )));
        }
        Ok(lo..hi + 1)
    }

    /// Nearest grid index to `x`, clamped to the grid.
    pub fn nearest_index(&self, x: f64) -> usize {
        ((x - self.x_min) / self.h)
            .round()
            .clamp(0.0, (self.n - 1) as f64) as usize
    }
}

/// Closed bounded interval `[a, b]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Window {
    pub a: f64,
    pub b: f64,
}

impl Window {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        ensure_finite("window.a", a)?;
        ensure_finite("window.b", b)?;
        if a >= b {
            return Err(Error::InvalidParameter {
                name: "window",
                reason: format!("need a < b, got [{a}, {b}]"),
            });
        }
        Ok(Window { a, b })
    }

    pub fn contains(&self, other: &Window) -> bool {
        self.a <= other.a && other.b <= self.b
    }
}

/// How a grid function is continued beyond its grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Extension {
    /// Zero outside the grid.
    ZeroPad,
    /// Periodic with period `n h`.
    Periodic,
    /// Constant continuation of the boundary values.
    #[default]
    Constant,
}

impl Extension {
    pub fn name(&self) -> &'static str {
        match self {
            Extension::ZeroPad => "zero",
            Extension::Periodic => "periodic",
            Extension::Constant => "constant",
        }
    }

    /// Value at (possibly out-of-range) index `i`.
    #[inline]
    pub fn value(&self, values: &[f64], i: i64) -> f64 {
        let n = values.len() as i64;
        if (0..n).contains(&i) {
            return values[i as usize];
        }
        match self {
            Extension::ZeroPad => 0.0,
            Extension::Periodic => values[i.rem_euclid(n) as usize],
            Extension::Constant => values[if i < 0 { 0 } else { (n - 1) as usize }],
        }
    }
}

/// A real function sampled on a [`Grid`] together with its continuation rule.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    grid: Grid,
    values: Vec<f64>,
    extension: Extension,
}

impl GridFunction {
    pub fn new(grid: Grid, values: Vec<f64>, extension: Extension) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} values for a grid of {} points",
                values.len(),
                grid.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                x: grid.x(i),
                value: values[i],
            });
        }
        Ok(GridFunction {
            grid,
            values,
            extension,
        })
    }

    /// Evaluate `profile` at every grid point.
    pub fn sample(profile: impl Fn(f64) -> f64, grid: Grid, extension: Extension) -> Result<Self> {
        let values = grid.points().map(profile).collect();
        GridFunction::new(grid, values, extension)
    }

    pub fn constant(value: f64, grid: Grid, extension: Extension) -> Result<Self> {
        GridFunction::new(grid, vec![value; grid.len()], extension)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn extension(&self) -> Extension {
        self.extension
    }

    /// Same grid and extension, new values.
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        GridFunction::new(self.grid, values, self.extension)
    }

    pub(crate) fn from_parts_unchecked(grid: Grid, values: Vec<f64>, extension: Extension) -> Self {
        debug_assert_eq!(grid.len(), values.len());
        GridFunction {
            grid,
            values,
            extension,
        }
    }

    pub fn map(&self, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        let values = self
            .grid
            .points()
            .zip(&self.values)
            .map(|(x, &v)| f(x, v))
            .collect();
        self.with_values(values)
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Piecewise-linear interpolant continued by the extension rule.
    pub fn value_at(&self, x: f64) -> f64 {
        let s = (x - self.grid.x_min) / self.grid.h;
        let i = s.floor();
        let frac = s - i;
        let i = i as i64;
        let v0 = self.extension.value(&self.values, i);
        if frac == 0.0 {
            return v0;
        }
        let v1 = self.extension.value(&self.values, i + 1);
        v0 + frac * (v1 - v0)
    }

    pub(crate) fn check_same_grid(&self, other: &GridFunction) -> Result<()> {
        if self.grid.same_as(&other.grid) {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!(
                "{:?} vs {:?}",
                self.grid, other.grid
            )))
        }
    }
}

/// `max |phi - psi|` over the grid points inside `window`.
pub fn sup_distance_on(phi: &GridFunction, psi: &GridFunction, window: &Window) -> Result<f64> {
    phi.check_same_grid(psi)?;
    let range = phi.grid.window_indices(window)?;
    Ok(sup_distance_slices(
        &phi.values[range.clone()],
        &psi.values[range],
    ))
}

#[inline]
pub(crate) fn sup_distance_slices(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

/// Value of the truncated compact-open metric with a bound on the discarded
/// tail of the series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncatedDistance {
    pub value: f64,
    pub truncation_bound: f64,
}

/// `sum_{k=1}^{k_max} 2^-k max_{[-k,k]} |phi - psi|`.
///
/// The omitted terms add at most `2^-k_max sup |phi - psi|`, which is
/// reported as `truncation_bound`.
pub fn compact_open_distance(
    phi: &GridFunction,
    psi: &GridFunction,
    k_max: usize,
) -> Result<TruncatedDistance> {
    phi.check_same_grid(psi)?;
    if k_max == 0 {
        return Err(Error::InvalidParameter {
            name: "k_max",
            reason: "must be >= 1".into(),
        });
    }
    let grid = phi.grid;
    let reach = k_max as f64;
    if !grid.covers(-reach, reach) {
        return Err(Error::WindowOutOfRange {
            a: -reach,
            b: reach,
            x_min: grid.x_min,
            x_max: grid.x_max,
        });
    }
    let mut value = 0.0;
    let mut weight = 1.0;
    for k in 1..=k_max {
        weight *= 0.5;
        let window = Window {
            a: -(k as f64),
            b: k as f64,
        };
        value += weight * sup_distance_on(phi, psi, &window)?;
    }
    let sup = sup_distance_slices(&phi.values, &psi.values);
    Ok(TruncatedDistance {
        value,
        truncation_bound: weight * sup,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn grid() -> Grid {
        Grid::with_step(-25.0, 25.0, 0.25).unwrap()
    }

    #[test]
    fn grid_invariants() {
        assert!(Grid::new(0.0, 1.0, 7).is_err());
        assert!(Grid::new(1.0, 0.0, 10).is_err());
        let g = Grid::with_step(-2.0, 2.0, 1.0);
        assert!(g.is_err(), "fewer than 8 points");
        let g = Grid::with_step(-2.0, 2.0, 0.5).unwrap();
        assert_eq!(g.len(), 9);
        assert_eq!(g.h(), 0.5);
        assert!(Grid::with_step(0.0, 1.0, 0.3).is_err());
        let p = Grid::periodic(0.0, 4.0, 40).unwrap();
        assert_abs_diff_eq!(p.period(), 4.0, epsilon = 1e-14);
        assert_abs_diff_eq!(p.x_max(), 3.9, epsilon = 1e-14);
    }

    #[test]
    fn sample_examples() {
        let g = Grid::new(-2.0, 2.0, 9).unwrap();
        let z = GridFunction::sample(|_| 0.0, g, Extension::Constant).unwrap();
        assert!(z.values().iter().all(|&v| v == 0.0));
        let o = GridFunction::sample(|_| 1.0, g, Extension::Constant).unwrap();
        assert!(o.values().iter().all(|&v| v == 1.0));
        let hat =
            GridFunction::sample(|x| (1.0 - x.abs()).max(0.0), g, Extension::Constant).unwrap();
        assert_eq!(hat.values(), &[0.0, 0.0, 0.0, 0.5, 1.0, 0.5, 0.0, 0.0, 0.0]);
        let err = GridFunction::sample(|x| 1.0 / x, g, Extension::Constant);
        assert!(matches!(err, Err(Error::NonFinite { .. })));
    }

    #[test]
    fn sup_distance_examples() {
        let g = grid();
        let phi = GridFunction::sample(|x| x, g, Extension::Constant).unwrap();
        let zero = GridFunction::constant(0.0, g, Extension::Constant).unwrap();
        let one = GridFunction::constant(1.0, g, Extension::Constant).unwrap();
        let w = Window::new(-1.0, 2.0).unwrap();
        assert_eq!(sup_distance_on(&phi, &phi, &w).unwrap(), 0.0);
        assert_eq!(sup_distance_on(&one, &zero, &w).unwrap(), 1.0);
        assert_eq!(sup_distance_on(&phi, &zero, &w).unwrap(), 2.0);
        let outside = Window::new(-30.0, 0.0).unwrap();
        assert!(matches!(
            sup_distance_on(&phi, &zero, &outside),
            Err(Error::WindowOutOfRange { .. })
        ));
    }

    #[test]
    fn compact_open_examples() {
        let g = grid();
        let zero = GridFunction::constant(0.0, g, Extension::Constant).unwrap();
        let c = GridFunction::constant(0.7, g, Extension::Constant).unwrap();
        assert_eq!(compact_open_distance(&c, &c, 20).unwrap().value, 0.0);
        let d = compact_open_distance(&c, &zero, 20).unwrap();
        assert_abs_diff_eq!(d.value, 0.7 * (1.0 - 2f64.powi(-20)), epsilon = 1e-15);
        assert_abs_diff_eq!(d.truncation_bound, 0.7 * 2f64.powi(-20), epsilon = 1e-18);
        let bump = GridFunction::sample(
            |x| if (1.5..=2.0).contains(&x) { 1.0 } else { 0.0 },
            g,
            Extension::Constant,
        )
        .unwrap();
        let d = compact_open_distance(&bump, &zero, 20).unwrap();
        assert_abs_diff_eq!(d.value, 0.5 - 2f64.powi(-20), epsilon = 1e-15);
        assert!(compact_open_distance(&bump, &zero, 30).is_err());
    }

    #[test]
    fn extension_rules() {
        let v = [1.0, 2.0, 3.0];
        assert_eq!(Extension::ZeroPad.value(&v, -1), 0.0);
        assert_eq!(Extension::Periodic.value(&v, -1), 3.0);
        assert_eq!(Extension::Periodic.value(&v, 4), 2.0);
        assert_eq!(Extension::Constant.value(&v, -5), 1.0);
        assert_eq!(Extension::Constant.value(&v, 9), 3.0);
    }

    #[test]
    fn interpolation_honours_extension() {
        let g = Grid::periodic(0.0, 8.0, 8).unwrap();
        let f = GridFunction::sample(|x| x, g, Extension::Periodic).unwrap();
        assert_abs_diff_eq!(f.value_at(2.5), 2.5, epsilon = 1e-14);
        assert_abs_diff_eq!(f.value_at(10.0), 2.0, epsilon = 1e-14);
        assert_abs_diff_eq!(f.value_at(7.5), 3.5, epsilon = 1e-14);
    }
}
