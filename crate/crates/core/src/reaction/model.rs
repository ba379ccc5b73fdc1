use super::{lipschitz_estimate, Reaction};
use crate::error::{Error, Result};
use crate::gridfn::{Convolver, Extension, Grid, GridFunction};
use crate::kernel::Kernel;

/// Upper end `b` or `beta(x)` of the invariant interval.
#[derive(Debug, Clone, PartialEq)]
pub enum Cap {
    Constant(f64),
    Profile(GridFunction),
}

impl Cap {
    pub fn value_at(&self, x: f64) -> f64 {
        match self {
            Cap::Constant(b) => *b,
            Cap::Profile(f) => f.value_at(x),
        }
    }

    pub fn sup(&self) -> f64 {
        match self {
            Cap::Constant(b) => *b,
            Cap::Profile(f) => f.max(),
        }
    }

    pub fn inf(&self) -> f64 {
        match self {
            Cap::Constant(b) => *b,
            Cap::Profile(f) => f.min(),
        }
    }

    /// Cap values at the points of `grid`.
    pub fn on_grid(&self, grid: &Grid) -> Vec<f64> {
        match self {
            Cap::Profile(f) if f.grid().same_as(grid) => f.values().to_vec(),
            _ => grid.points().map(|x| self.value_at(x)).collect(),
        }
    }
}

/// `u_t = D (J * u - u) + f(x, u)` on a grid with an extension rule.
#[derive(Debug, Clone)]
pub struct Model {
    kernel: Kernel,
    dispersal: f64,
    reaction: Reaction,
    cap: Cap,
    grid: Grid,
    extension: Extension,
    convolver: Convolver,
    lipschitz: f64,
    cap_values: Vec<f64>,
}

/// Samples per axis used for the model's Lipschitz constant.
const LIPSCHITZ_SAMPLES: usize = 256;

impl Model {
    pub fn new(
        kernel: Kernel,
        dispersal: f64,
        reaction: Reaction,
        cap: Cap,
        grid: Grid,
        extension: Extension,
    ) -> Result<Self> {
        if !(dispersal.is_finite() && dispersal >= 0.0) {
            return Err(Error::InvalidParameter {
                name: "D",
                reason: format!("must be finite and >= 0, got {dispersal}"),
            });
        }
        if !(cap.inf() > 0.0) || !cap.sup().is_finite() {
            return Err(Error::InvalidParameter {
                name: "cap",
                reason: format!(
                    "must be positive and finite, got range [{}, {}]",
                    cap.inf(),
                    cap.sup()
                ),
            });
        }
        let convolver = Convolver::new(&kernel, grid, extension)?;
        let lipschitz = lipschitz_estimate(&reaction, &cap, LIPSCHITZ_SAMPLES, LIPSCHITZ_SAMPLES)?;
        let cap_values = cap.on_grid(&grid);
        Ok(Model {
            kernel,
            dispersal,
            reaction,
            cap,
            grid,
            extension,
            convolver,
            lipschitz,
            cap_values,
        })
    }

    /// Same model with another cap (and the Lipschitz constant recomputed).
    pub fn with_cap(&self, cap: Cap) -> Result<Self> {
        Model::new(
            self.kernel.clone(),
            self.dispersal,
            self.reaction.clone(),
            cap,
            self.grid,
            self.extension,
        )
    }

    /// Same model with another dispersal rate.
    pub fn with_dispersal(&self, dispersal: f64) -> Result<Self> {
        Model::new(
            self.kernel.clone(),
            dispersal,
            self.reaction.clone(),
            self.cap.clone(),
            self.grid,
            self.extension,
        )
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    pub fn dispersal(&self) -> f64 {
        self.dispersal
    }

    pub fn reaction(&self) -> &Reaction {
        &self.reaction
    }

    pub fn cap(&self) -> &Cap {
        &self.cap
    }

    pub fn cap_values(&self) -> &[f64] {
        &self.cap_values
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn extension(&self) -> Extension {
        self.extension
    }

    pub fn convolver(&self) -> &Convolver {
        &self.convolver
    }

    /// Lipschitz constant `k_f` of `f` on `[0, cap]`.
    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    /// Default step `min(0.01, 0.1 / k_f)`.
    pub fn default_dt(&self) -> f64 {
        if self.lipschitz > 0.0 {
            (0.1 / self.lipschitz).min(0.01)
        } else {
            0.01
        }
    }

    pub fn function(&self, values: Vec<f64>) -> Result<GridFunction> {
        GridFunction::new(self.grid, values, self.extension)
    }

    pub fn sample(&self, profile: impl Fn(f64) -> f64) -> Result<GridFunction> {
        GridFunction::sample(profile, self.grid, self.extension)
    }

    /// `f(x_i, u_i)` at every grid point.
    pub fn reaction_values(&self, u: &[f64]) -> Vec<f64> {
        self.grid
            .points()
            .zip(u)
            .map(|(x, &v)| self.reaction.value(x, v))
            .collect()
    }

    /// Right-hand side `D (J * u - u) + f(x, u)`.
    pub fn rhs(&self, u: &[f64]) -> Vec<f64> {
        let conv = self.convolver.apply(u);
        let d = self.dispersal;
        self.grid
            .points()
            .zip(u.iter().zip(&conv))
            .map(|(x, (&v, &c))| d * (c - v) + self.reaction.value(x, v))
            .collect()
    }

    /// `sup |D (J * u - u) + f(x, u)|`.
    pub fn residual(&self, u: &GridFunction) -> Result<f64> {
        self.check(u)?;
        Ok(self.rhs(u.values()).iter().fold(0.0, |m, r| m.max(r.abs())))
    }

    pub(crate) fn check(&self, u: &GridFunction) -> Result<()> {
        self.convolver.check(u)
    }

    /// Checks `-tol * cap <= u <= cap (1 + tol)` pointwise.
    pub(crate) fn check_range(&self, u: &[f64], t: f64, dt: f64, tol: f64) -> Result<()> {
        for (i, (&v, &c)) in u.iter().zip(&self.cap_values).enumerate() {
            if !(v >= -tol * c && v <= c * (1.0 + tol)) {
                return Err(Error::RangeViolation {
                    t,
                    x: self.grid.x(i),
                    value: v,
                    cap: c,
                    dt,
                });
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{make_kernel, Profile};
    use approx::assert_abs_diff_eq;

    fn model(r: f64) -> Model {
        let grid = Grid::with_step(-20.0, 20.0, 0.1).unwrap();
        let kernel = make_kernel(Profile::Gaussian { sigma: 1.0 }, 1e-12, 0.1).unwrap();
        Model::new(
            kernel,
            1.0,
            Reaction::logistic(r).unwrap(),
            Cap::Constant(r),
            grid,
            Extension::Constant,
        )
        .unwrap()
    }

    #[test]
    fn lipschitz_and_default_step() {
        let m = model(2.0);
        assert_abs_diff_eq!(m.lipschitz(), 2.0, epsilon = 1e-14);
        assert_abs_diff_eq!(m.default_dt(), 0.01, epsilon = 1e-15);
        let m = model(20.0);
        assert_abs_diff_eq!(m.default_dt(), 0.005, epsilon = 1e-15);
    }

    #[test]
    fn constant_steady_state_has_zero_residual() {
        let m = model(1.0);
        let one = m.sample(|_| 1.0).unwrap();
        assert!(m.residual(&one).unwrap() < 1e-14);
    }

    #[test]
    fn rejects_bad_parameters() {
        let m = model(1.0);
        assert!(m.with_dispersal(-1.0).is_err());
        assert!(m.with_cap(Cap::Constant(0.0)).is_err());
    }
}
