//! Dispersal kernels.
//!
//! A [`Kernel`] is a nonnegative, compactly truncated probability density on
//! the line. All integrals against it use the composite trapezoid rule on the
//! lattice `h * Z` with `h` the kernel's quadrature step; the density is
//! rescaled so that this rule gives total mass exactly one. At a jump of the
//! profile (the edges of the uniform kernel, the ends of a tabulated kernel)
//! the density takes the mean of its one-sided limits, which is the value the
//! trapezoid rule expects there.

use statrs::function::erf::erfc;

use crate::error::{ensure_positive, Error, Result};

/// Largest admissible `|mu| * truncation_radius` in [`Kernel::exp_moment`].
pub const MOMENT_EXPONENT_GUARD: f64 = 700.0;

/// Shape of a dispersal kernel before normalization.
#[derive(Debug, Clone, PartialEq)]
pub enum Profile {
    /// Box of half-width `half_width`.
    Uniform { half_width: f64 },
    /// Centered normal density with standard deviation `sigma`.
    Gaussian { sigma: f64 },
    /// Two-sided exponential `(rate / 2) exp(-rate |x|)`.
    Laplace { rate: f64 },
    /// Samples `(xs[i], values[i])`, linearly interpolated and zero outside
    /// `[xs[0], xs[last]]`.
    Tabulated { xs: Vec<f64>, values: Vec<f64> },
}

impl Profile {
    pub fn family_name(&self) -> &'static str {
        match self {
            Profile::Uniform { .. } => "uniform",
            Profile::Gaussian { .. } => "gaussian",
            Profile::Laplace { .. } => "laplace",
            Profile::Tabulated { .. } => "tabulated",
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            Profile::Uniform { half_width } => ensure_positive("half_width", *half_width),
            Profile::Gaussian { sigma } => ensure_positive("sigma", *sigma),
            Profile::Laplace { rate } => ensure_positive("rate", *rate),
            Profile::Tabulated { xs, values } => {
                if xs.len() != values.len() {
                    return Err(Error::InvalidParameter {
                        name: "tabulated",
                        reason: format!("{} abscissae but {} values", xs.len(), values.len()),
                    });
                }
                if xs.len() < 3 {
                    return Err(Error::InvalidParameter {
                        name: "tabulated",
                        reason: "at least 3 samples are required".into(),
                    });
                }
                for (&x, &v) in xs.iter().zip(values) {
                    if !x.is_finite() || !v.is_finite() {
                        return Err(Error::NonFinite { x, value: v });
                    }
                    if v < 0.0 {
                        return Err(Error::InvalidParameter {
                            name: "tabulated",
                            reason: format!("negative sample {v} at x = {x}"),
                        });
                    }
                }
                if xs.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(Error::InvalidParameter {
                        name: "tabulated",
                        reason: "abscissae must be strictly increasing".into(),
                    });
                }
                Ok(())
            }
        }
    }

    /// Unnormalized profile value.
    fn raw(&self, x: f64) -> f64 {
        match self {
            Profile::Uniform { half_width: a } => {
                let ax = x.abs();
                if (ax - a).abs() <= 1e-12 * a {
                    0.5
                } else if ax < *a {
                    1.0
                } else {
                    0.0
                }
            }
            Profile::Gaussian { sigma } => (-0.5 * (x / sigma).powi(2)).exp(),
            Profile::Laplace { rate } => (-rate * x.abs()).exp(),
            Profile::Tabulated { xs, values } => {
                let first = xs[0];
                let last = xs[xs.len() - 1];
                let eps = 1e-12 * (last - first);
                if x < first - eps || x > last + eps {
                    return 0.0;
                }
                if (x - first).abs() <= eps {
                    return 0.5 * values[0];
                }
                if (x - last).abs() <= eps {
                    return 0.5 * values[values.len() - 1];
                }
                let hi = xs.partition_point(|&xi| xi <= x).min(xs.len() - 1);
                let lo = hi - 1;
                let s = (x - xs[lo]) / (xs[hi] - xs[lo]);
                values[lo] + s * (values[hi] - values[lo])
            }
        }
    }

    /// Radius beyond which the profile is treated as zero, and the exact
    /// mass it discards (relative to the untruncated profile).
    fn truncation(&self, mass_tolerance: f64) -> (f64, f64) {
        match self {
            Profile::Uniform { half_width } => (*half_width, 0.0),
            Profile::Gaussian { sigma } => {
                let tail = |r: f64| erfc(r / (sigma * std::f64::consts::SQRT_2));
                let (mut lo, mut hi) = (0.0, 40.0 * sigma);
                while hi - lo > 1e-13 * sigma {
                    let mid = 0.5 * (lo + hi);
                    if tail(mid) < mass_tolerance {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                (hi, tail(hi))
            }
            Profile::Laplace { rate } => {
                let r = (-mass_tolerance.ln()).max(0.0) / rate * (1.0 + 1e-12);
                (r, (-rate * r).exp())
            }
            Profile::Tabulated { xs, .. } => (xs[0].abs().max(xs[xs.len() - 1].abs()), 0.0),
        }
    }
}

/// Kernel weights on the lattice `step * Z`: `weights[j + radius]` is the
/// quadrature weight of the node `j * step`, and the weights sum to one.
#[derive(Debug, Clone, PartialEq)]
pub struct Stencil {
    pub step: f64,
    pub radius: usize,
    pub weights: Vec<f64>,
}

impl Stencil {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Weight at lattice offset `j`, zero outside the stencil.
    pub fn weight(&self, j: i64) -> f64 {
        let idx = j + self.radius as i64;
        if idx < 0 || idx as usize >= self.weights.len() {
            0.0
        } else {
            self.weights[idx as usize]
        }
    }

    /// Iterate over `(offset, weight)` pairs.
    pub fn iter(&self) -> impl Iterator<Item = (i64, f64)> + '_ {
        let r = self.radius as i64;
        self.weights
            .iter()
            .enumerate()
            .map(move |(i, &w)| (i as i64 - r, w))
    }
}

/// Normalized, truncated dispersal kernel.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel {
    profile: Profile,
    truncation_radius: f64,
    mass_tolerance: f64,
    quadrature_step: f64,
    discarded_mass: f64,
    scale: f64,
    stencil: Stencil,
}

/// Build a kernel from a profile.
///
/// Analytic families are truncated where the exact tail mass drops below
/// `mass_tolerance`; the density is then rescaled so its trapezoid integral
/// on the `quadrature_step` lattice is one.
pub fn make_kernel(profile: Profile, mass_tolerance: f64, quadrature_step: f64) -> Result<Kernel> {
    Kernel::new(profile, mass_tolerance, quadrature_step)
}

impl Kernel {
    pub fn new(profile: Profile, mass_tolerance: f64, quadrature_step: f64) -> Result<Self> {
        profile.validate()?;
        ensure_positive("mass_tolerance", mass_tolerance)?;
        ensure_positive("quadrature_step", quadrature_step)?;
        let (truncation_radius, discarded_mass) = profile.truncation(mass_tolerance);
        if !(truncation_radius.is_finite() && truncation_radius > 0.0) {
            return Err(Error::InvalidParameter {
                name: "truncation_radius",
                reason: format!("must be finite and > 0, got {truncation_radius}"),
            });
        }
        let radius = lattice_radius(truncation_radius, quadrature_step);
        let raw: Vec<f64> = (-(radius as i64)..=radius as i64)
            .map(|j| profile.raw(j as f64 * quadrature_step))
            .collect();
        let mass = quadrature_step * raw.iter().sum::<f64>();
        if !(mass > 0.0) || !mass.is_finite() {
            return Err(Error::ZeroMass);
        }
        let scale = 1.0 / mass;
        let weights = raw.iter().map(|v| quadrature_step * scale * v).collect();
        Ok(Kernel {
            profile,
            truncation_radius,
            mass_tolerance,
            quadrature_step,
            discarded_mass,
            scale,
            stencil: Stencil {
                step: quadrature_step,
                radius,
                weights,
            },
        })
    }

    /// Same profile re-normalized on a different lattice.
    pub fn with_quadrature_step(&self, step: f64) -> Result<Kernel> {
        if same_step(step, self.quadrature_step) {
            return Ok(self.clone());
        }
        Kernel::new(self.profile.clone(), self.mass_tolerance, step)
    }

    pub fn profile(&self) -> &Profile {
        &self.profile
    }

    pub fn truncation_radius(&self) -> f64 {
        self.truncation_radius
    }

    pub fn mass_tolerance(&self) -> f64 {
        self.mass_tolerance
    }

    pub fn quadrature_step(&self) -> f64 {
        self.quadrature_step
    }

    /// Mass of the untruncated profile that lies beyond the truncation radius.
    pub fn discarded_mass(&self) -> f64 {
        self.discarded_mass
    }

    pub fn stencil(&self) -> &Stencil {
        &self.stencil
    }

    /// Normalized density `J(x)`.
    pub fn density(&self, x: f64) -> f64 {
        if x.abs() > self.truncation_radius * (1.0 + 1e-12) {
            0.0
        } else {
            self.scale * self.profile.raw(x)
        }
    }

    pub fn is_symmetric(&self) -> bool {
        match &self.profile {
            Profile::Tabulated { .. } => {
                let w = &self.stencil.weights;
                let n = w.len();
                (0..n / 2).all(|i| (w[i] - w[n - 1 - i]).abs() <= 1e-14)
            }
            _ => true,
        }
    }

    /// `g(x) = ∫ |J(x + z) - J(z)| dz` by trapezoid quadrature on the kernel
    /// lattice. For lattice-aligned shifts the value is exactly the L1
    /// distance between the discrete kernel and its translate.
    pub fn equicontinuity_modulus(&self, x: f64) -> f64 {
        if x == 0.0 || !x.is_finite() {
            return if x == 0.0 { 0.0 } else { 2.0 };
        }
        let h = self.quadrature_step;
        let reach = self.stencil.radius as i64 + (x.abs() / h).ceil() as i64 + 1;
        let sum: f64 = (-reach..=reach)
            .map(|j| {
                let z = j as f64 * h;
                (self.density(z + x) - self.density(z)).abs()
            })
            .sum();
        (h * sum).min(2.0)
    }

    /// Exponential moment `M(mu) = ∫ J(y) exp(mu y) dy`.
    pub fn exp_moment(&self, mu: f64) -> Result<f64> {
        let limit = MOMENT_EXPONENT_GUARD / self.truncation_radius;
        if !mu.is_finite() || mu.abs() > limit {
            return Err(Error::MomentRange {
                mu,
                lo: -limit,
                hi: limit,
            });
        }
        let h = self.quadrature_step;
        Ok(self
            .stencil
            .iter()
            .map(|(j, w)| w * (mu * j as f64 * h).exp())
            .sum())
    }

    /// Largest `|mu|` accepted by [`Kernel::exp_moment`].
    pub fn moment_limit(&self) -> f64 {
        MOMENT_EXPONENT_GUARD / self.truncation_radius
    }
}

pub(crate) fn lattice_radius(radius: f64, step: f64) -> usize {
    (radius / step * (1.0 + 1e-12)).floor() as usize
}

pub(crate) fn same_step(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs())
}
