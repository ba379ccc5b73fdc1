//! Reaction terms `f(x, u)` with `f(x, 0) = 0` and spatial period `L`, their
//! Lipschitz constants on `[0, cap(x)]`, and the model that couples them to
//! a dispersal kernel.

mod model;
mod steady;

pub use model::{Cap, Model};
pub use steady::steady_state;

use std::fmt;
use std::sync::Arc;

use crate::error::{ensure_finite, ensure_positive, Error, Result};

/// User-supplied reaction `f(x, u)`.
#[derive(Clone)]
pub struct CustomReaction(Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>);

impl fmt::Debug for CustomReaction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("CustomReaction(..)")
    }
}

#[derive(Debug, Clone)]
pub enum ReactionFamily {
    /// `f = 0`.
    Zero,
    /// `u (r - u)`.
    Logistic {
        r: f64,
    },
    /// `u (r0 + r1 cos(2 pi x / L) - u)`.
    PeriodicKpp {
        r0: f64,
        r1: f64,
    },
    Custom(CustomReaction),
}

#[derive(Debug, Clone)]
pub struct Reaction {
    family: ReactionFamily,
    period: f64,
}

const INVARIANT_SAMPLES: usize = 256;

impl Reaction {
    pub fn zero() -> Self {
        Reaction {
            family: ReactionFamily::Zero,
            period: 1.0,
        }
    }

    pub fn logistic(r: f64) -> Result<Self> {
        ensure_finite("r", r)?;
        Ok(Reaction {
            family: ReactionFamily::Logistic { r },
            period: 1.0,
        })
    }

    pub fn periodic_kpp(r0: f64, r1: f64, period: f64) -> Result<Self> {
        ensure_finite("r0", r0)?;
        ensure_finite("r1", r1)?;
        ensure_positive("L", period)?;
        Ok(Reaction {
            family: ReactionFamily::PeriodicKpp { r0, r1 },
            period,
        })
    }

    /// Wrap a callable with declared period; `f(x, 0) = 0` and periodicity
    /// are checked on a sample of points.
    pub fn custom(
        period: f64,
        f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
    ) -> Result<Self> {
        ensure_positive("L", period)?;
        let reaction = Reaction {
            family: ReactionFamily::Custom(CustomReaction(Arc::new(f))),
            period,
        };
        for i in 0..INVARIANT_SAMPLES {
            let x = period * i as f64 / INVARIANT_SAMPLES as f64;
            let at_zero = reaction.value(x, 0.0);
            if !(at_zero.abs() <= 1e-14) {
                return Err(Error::InvalidParameter {
                    name: "reaction",
                    reason: format!("f(x, 0) = {at_zero} at x = {x}"),
                });
            }
            for u in [0.1, 0.5, 1.0, 2.0] {
                let a = reaction.value(x, u);
                let b = reaction.value(x + period, u);
                if !((a - b).abs() < 1e-12) {
                    return Err(Error::InvalidParameter {
                        name: "reaction",
                        reason: format!("not {period}-periodic at x = {x}, u = {u}"),
                    });
                }
            }
        }
        Ok(reaction)
    }

    pub fn family(&self) -> &ReactionFamily {
        &self.family
    }

    pub fn family_name(&self) -> &'static str {
        match self.family {
            ReactionFamily::Zero => "none",
            ReactionFamily::Logistic { .. } => "logistic",
            ReactionFamily::PeriodicKpp { .. } => "periodic-kpp",
            ReactionFamily::Custom(_) => "custom",
        }
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    /// Whether `f` does not depend on `x`.
    pub fn is_homogeneous(&self) -> bool {
        matches!(
            self.family,
            ReactionFamily::Zero | ReactionFamily::Logistic { .. }
        )
    }

    /// `f(x, u)` without finiteness checks.
    #[inline]
    pub fn value(&self, x: f64, u: f64) -> f64 {
        match &self.family {
            ReactionFamily::Zero => 0.0,
            ReactionFamily::Logistic { r } => u * (r - u),
            ReactionFamily::PeriodicKpp { r0, r1 } => u * (self.growth(*r0, *r1, x) - u),
            ReactionFamily::Custom(f) => (f.0)(x, u),
        }
    }

    fn growth(&self, r0: f64, r1: f64, x: f64) -> f64 {
        r0 + r1 * (std::f64::consts::TAU * x / self.period).cos()
    }

    /// `df/du (x, u)`: closed form for built-in families, central difference
    /// otherwise.
    pub fn derivative_u(&self, x: f64, u: f64) -> f64 {
        match &self.family {
            ReactionFamily::Zero => 0.0,
            ReactionFamily::Logistic { r } => r - 2.0 * u,
            ReactionFamily::PeriodicKpp { r0, r1 } => self.growth(*r0, *r1, x) - 2.0 * u,
            ReactionFamily::Custom(_) => {
                let d = 1e-6 * u.abs().max(1.0);
                (self.value(x, u + d) - self.value(x, u - d)) / (2.0 * d)
            }
        }
    }

    /// Linearization at zero, `df/du (x, 0)`.
    pub fn growth_at_zero(&self, x: f64) -> f64 {
        match &self.family {
            ReactionFamily::Custom(_) => {
                // one-sided second-order difference; f may be undefined below 0
                let d = 1e-6;
                (-3.0 * self.value(x, 0.0) + 4.0 * self.value(x, d) - self.value(x, 2.0 * d))
                    / (2.0 * d)
            }
            _ => self.derivative_u(x, 0.0),
        }
    }
}

/// `f(x, u)`, rejecting non-finite results.
pub fn evaluate_reaction(reaction: &Reaction, x: f64, u: f64) -> Result<f64> {
    ensure_finite("u", u)?;
    let v = reaction.value(x, u);
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFinite { x, value: v })
    }
}

/// Minimum sample count per axis for [`lipschitz_estimate`].
pub const MIN_LIPSCHITZ_SAMPLES: usize = 64;

/// `max |df/du|` over sampled `x in [0, L]` and `u in [0, cap(x)]`.
///
/// The `u` samples always include both ends of `[0, cap(x)]`, so for the
/// built-in families (derivative affine in `u`) the value is exact over the
/// sampled `x`. For custom reactions it is a lower estimate of the true
/// supremum.
pub fn lipschitz_estimate(
    reaction: &Reaction,
    cap: &Cap,
    x_samples: usize,
    u_samples: usize,
) -> Result<f64> {
    if x_samples < MIN_LIPSCHITZ_SAMPLES || u_samples < MIN_LIPSCHITZ_SAMPLES {
        return Err(Error::InvalidParameter {
            name: "samples",
            reason: format!("need at least {MIN_LIPSCHITZ_SAMPLES} samples per axis"),
        });
    }
    let period = reaction.period();
    let mut best = 0.0f64;
    for i in 0..=x_samples {
        let x = period * i as f64 / x_samples as f64;
        let top = cap.value_at(x);
        if !(top > 0.0) {
            return Err(Error::Precondition(format!(
                "cap must be positive, got {top} at x = {x}"
            )));
        }
        for j in 0..u_samples {
            let u = top * j as f64 / (u_samples - 1) as f64;
            let d = reaction.derivative_u(x, u);
            if !d.is_finite() {
                return Err(Error::NonFinite { x, value: d });
            }
            best = best.max(d.abs());
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn evaluate_examples() {
        let f = Reaction::logistic(1.0).unwrap();
        assert_eq!(evaluate_reaction(&f, 0.3, 0.0).unwrap(), 0.0);
        assert_eq!(evaluate_reaction(&f, 0.3, 1.0).unwrap(), 0.0);
        let p = Reaction::periodic_kpp(1.0, 0.5, 2.0).unwrap();
        assert_abs_diff_eq!(
            evaluate_reaction(&p, 0.0, 0.5).unwrap(),
            0.5,
            epsilon = 1e-15
        );
        let bad = Reaction::custom(1.0, |_, u| if u > 5.0 { f64::NAN } else { 0.0 }).unwrap();
        assert!(matches!(
            evaluate_reaction(&bad, 0.0, 6.0),
            Err(Error::NonFinite { .. })
        ));
    }

    #[test]
    fn lipschitz_examples() {
        let k = lipschitz_estimate(
            &Reaction::logistic(1.0).unwrap(),
            &Cap::Constant(1.0),
            64,
            64,
        )
        .unwrap();
        assert_abs_diff_eq!(k, 1.0, epsilon = 1e-14);
        let k = lipschitz_estimate(
            &Reaction::logistic(2.0).unwrap(),
            &Cap::Constant(2.0),
            64,
            64,
        )
        .unwrap();
        assert_abs_diff_eq!(k, 2.0, epsilon = 1e-14);
        let k = lipschitz_estimate(&Reaction::zero(), &Cap::Constant(1.0), 64, 64).unwrap();
        assert_eq!(k, 0.0);
        assert!(lipschitz_estimate(&Reaction::zero(), &Cap::Constant(1.0), 10, 64).is_err());
    }

    #[test]
    fn custom_lipschitz_uses_finite_differences() {
        let f = Reaction::custom(1.0, |_, u| u * (1.0 - u) * (1.0 + u)).unwrap();
        // d/du (u - u^3) = 1 - 3u^2, extremal |.| = 2 at u = 1
        let k = lipschitz_estimate(&f, &Cap::Constant(1.0), 64, 64).unwrap();
        assert_abs_diff_eq!(k, 2.0, epsilon = 1e-6);
    }

    #[test]
    fn custom_invariants_are_checked() {
        assert!(Reaction::custom(1.0, |_, u| 1.0 + u).is_err());
        assert!(Reaction::custom(1.0, |x, u| u * x).is_err());
        assert!(Reaction::custom(1.0, |x, u| u * (std::f64::consts::TAU * x).sin()).is_ok());
    }

    #[test]
    fn growth_at_zero() {
        let p = Reaction::periodic_kpp(1.0, 0.5, 2.0).unwrap();
        assert_abs_diff_eq!(p.growth_at_zero(0.0), 1.5, epsilon = 1e-15);
        assert_abs_diff_eq!(p.growth_at_zero(1.0), 0.5, epsilon = 1e-15);
        let c = Reaction::custom(2.0, |x, u| {
            u * (1.0 + 0.5 * (std::f64::consts::PI * x).cos() - u)
        })
        .unwrap();
        assert_abs_diff_eq!(c.growth_at_zero(0.0), 1.5, epsilon = 1e-8);
    }
}
