//! The linear flow `u_t = J * u - u`.
//!
//! The solution operator is the Poisson-weighted series of iterated
//! convolutions
//!
//! ```text
//! T(t) phi = e^{-t} sum_k t^k / k! a_k(phi),   a_0 = phi,  a_k = J * a_{k-1},
//! ```
//!
//! truncated at the smallest order `K >= ceil(t)` whose Poisson tail, times
//! the uniform bound `sup |a_k| <= sup |phi|`, is below the requested
//! tolerance. [`apply_linear_ode`] integrates the same flow with classical
//! RK4 and serves as an independent check.

use crate::error::{ensure_positive, Error, Result};
use crate::gridfn::{Convolver, GridFunction};
use crate::kernel::Kernel;

/// Hard ceiling on the truncation order.
pub const MAX_SERIES_ORDER: usize = 1_000_000;

/// Longest time handled by a single series; longer times are composed.
const MAX_SINGLE_SERIES_TIME: f64 = 700.0;

/// Certified truncation of the series at time `t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesPlan {
    pub t: f64,
    pub tolerance: f64,
    /// Truncation order `K`: terms `k = 0..=K` are kept.
    pub order: usize,
    pub cap_b: f64,
}

/// Poisson probabilities `e^{-t} t^k / k!` for `k = 0..` until the remaining
/// mass is negligible relative to `floor`.
fn poisson_masses(t: f64, floor: f64) -> Result<Vec<f64>> {
    if t == 0.0 {
        return Ok(vec![1.0]);
    }
    let ln_t = t.ln();
    let mut ln_p = -t;
    let mut masses = vec![ln_p.exp()];
    let mut k = 0usize;
    loop {
        k += 1;
        if k > MAX_SERIES_ORDER + 1 {
            return Err(Error::SeriesCeiling {
                t,
                tolerance: floor,
                ceiling: MAX_SERIES_ORDER,
            });
        }
        ln_p += ln_t - (k as f64).ln();
        let p = ln_p.exp();
        masses.push(p);
        // past the mode the terms decay faster than geometrically
        if (k as f64) > t + 1.0 && (p == 0.0 || p < floor * 1e-20) {
            break;
        }
    }
    Ok(masses)
}

/// `1 - e^{-t} sum_{k=0}^{order} t^k / k!`, summed directly over the tail.
pub fn poisson_tail(t: f64, order: usize) -> f64 {
    if t == 0.0 {
        return 0.0;
    }
    let masses = match poisson_masses(t.max(0.0), 1e-300) {
        Ok(m) => m,
        Err(_) => return 1.0,
    };
    masses.iter().skip(order + 1).rev().sum()
}

/// Smallest `K >= ceil(t)` with `cap_b * poisson_tail(t, K) < tolerance`.
pub fn plan_series(t: f64, tolerance: f64, cap_b: f64) -> Result<SeriesPlan> {
    if !(t.is_finite() && t >= 0.0) {
        return Err(Error::InvalidParameter {
            name: "t",
            reason: format!("must be >= 0, got {t}"),
        });
    }
    ensure_positive("tolerance", tolerance)?;
    ensure_positive("cap_b", cap_b)?;
    let min_order = t.ceil() as usize;
    if min_order > MAX_SERIES_ORDER {
        return Err(Error::SeriesCeiling {
            t,
            tolerance,
            ceiling: MAX_SERIES_ORDER,
        });
    }
    let target = tolerance / cap_b;
    let masses = poisson_masses(t, target)?;
    // tails[k] = sum_{j > k} masses[j], accumulated from the small end
    let mut tails = vec![0.0; masses.len()];
    let mut acc = 0.0;
    for k in (0..masses.len()).rev() {
        tails[k] = acc;
        acc += masses[k];
    }
    let order = (min_order..masses.len())
        .find(|&k| tails[k] < target)
        .ok_or(Error::SeriesCeiling {
            t,
            tolerance,
            ceiling: MAX_SERIES_ORDER,
        })?;
    if order > MAX_SERIES_ORDER {
        return Err(Error::SeriesCeiling {
            t,
            tolerance,
            ceiling: MAX_SERIES_ORDER,
        });
    }
    Ok(SeriesPlan {
        t,
        tolerance,
        order,
        cap_b,
    })
}

/// Iterated convolutions `a_0 = phi, ..., a_order`.
pub fn series_terms(
    kernel: &Kernel,
    phi: &GridFunction,
    order: usize,
) -> Result<Vec<GridFunction>> {
    let conv = Convolver::new(kernel, *phi.grid(), phi.extension())?;
    series_terms_with(&conv, phi, order)
}

pub fn series_terms_with(
    conv: &Convolver,
    phi: &GridFunction,
    order: usize,
) -> Result<Vec<GridFunction>> {
    conv.check(phi)?;
    let mut terms = Vec::with_capacity(order + 1);
    terms.push(phi.clone());
    for _ in 0..order {
        let next = conv.convolve(terms.last().expect("nonempty"))?;
        terms.push(next);
    }
    Ok(terms)
}

/// `T(t) phi` within `tolerance` (sup norm) of the untruncated series.
pub fn apply_linear(
    kernel: &Kernel,
    phi: &GridFunction,
    t: f64,
    tolerance: f64,
) -> Result<GridFunction> {
    let conv = Convolver::new(kernel, *phi.grid(), phi.extension())?;
    apply_linear_with(&conv, phi, t, tolerance)
}

pub fn apply_linear_with(
    conv: &Convolver,
    phi: &GridFunction,
    t: f64,
    tolerance: f64,
) -> Result<GridFunction> {
    conv.check(phi)?;
    let values = linear_flow(conv, phi.values(), t, tolerance)?;
    phi.with_values(values)
}

/// `T(t)` on raw values.
pub(crate) fn linear_flow(
    conv: &Convolver,
    values: &[f64],
    t: f64,
    tolerance: f64,
) -> Result<Vec<f64>> {
    if t > MAX_SINGLE_SERIES_TIME {
        let pieces = (t / MAX_SINGLE_SERIES_TIME).ceil();
        let dt = t / pieces;
        let mut v = values.to_vec();
        for _ in 0..pieces as usize {
            v = linear_flow(conv, &v, dt, tolerance / pieces)?;
        }
        return Ok(v);
    }
    let (head, tail) = split_flow(conv, values, t, tolerance)?;
    Ok(head.iter().zip(&tail).map(|(h, r)| h + r).collect())
}

/// `(e^{-t} phi, sum_{k >= 1} e^{-t} t^k / k! a_k)`.
fn split_flow(
    conv: &Convolver,
    values: &[f64],
    t: f64,
    tolerance: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let sup = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let decay = (-t).exp();
    let head: Vec<f64> = values.iter().map(|v| decay * v).collect();
    let mut tail = vec![0.0; values.len()];
    if t == 0.0 || sup == 0.0 {
        return Ok((head, tail));
    }
    let plan = plan_series(t, tolerance, sup)?;
    let mut term = values.to_vec();
    let mut weight = decay;
    for k in 1..=plan.order {
        term = conv.apply(&term);
        weight *= t / k as f64;
        for (r, a) in tail.iter_mut().zip(&term) {
            *r += weight * a;
        }
    }
    Ok((head, tail))
}

/// Split `T(t) = T_1(t) + T_2(t)` with `T_1(t) phi = e^{-t} phi`.
///
/// `head + tail` reproduces [`apply_linear`] bit for bit when `t` fits in a
/// single series.
pub fn split_compact_part(
    kernel: &Kernel,
    phi: &GridFunction,
    t: f64,
    tolerance: f64,
) -> Result<(GridFunction, GridFunction)> {
    let conv = Convolver::new(kernel, *phi.grid(), phi.extension())?;
    split_compact_part_with(&conv, phi, t, tolerance)
}

pub fn split_compact_part_with(
    conv: &Convolver,
    phi: &GridFunction,
    t: f64,
    tolerance: f64,
) -> Result<(GridFunction, GridFunction)> {
    conv.check(phi)?;
    let (head, tail) = if t > MAX_SINGLE_SERIES_TIME {
        let full = linear_flow(conv, phi.values(), t, tolerance)?;
        let decay = (-t).exp();
        let head: Vec<f64> = phi.values().iter().map(|v| decay * v).collect();
        let tail = full.iter().zip(&head).map(|(f, h)| f - h).collect();
        (head, tail)
    } else {
        split_flow(conv, phi.values(), t, tolerance)?
    };
    Ok((phi.with_values(head)?, phi.with_values(tail)?))
}

/// Method-of-lines RK4 integration of `u' = J * u - u` up to time `t`.
pub fn apply_linear_ode(
    kernel: &Kernel,
    phi: &GridFunction,
    t: f64,
    dt: f64,
) -> Result<GridFunction> {
    let conv = Convolver::new(kernel, *phi.grid(), phi.extension())?;
    apply_linear_ode_with(&conv, phi, t, dt)
}

pub fn apply_linear_ode_with(
    conv: &Convolver,
    phi: &GridFunction,
    t: f64,
    dt: f64,
) -> Result<GridFunction> {
    conv.check(phi)?;
    ensure_positive("dt", dt)?;
    if dt > 0.5 {
        return Err(Error::InvalidParameter {
            name: "dt",
            reason: format!("must be <= 0.5, got {dt}"),
        });
    }
    let steps = step_count(t, dt)?;
    let rhs = |u: &[f64]| -> Vec<f64> { conv.apply(u).iter().zip(u).map(|(c, v)| c - v).collect() };
    let mut u = phi.values().to_vec();
    for _ in 0..steps {
        u = rk4_step(&u, dt, &rhs);
    }
    phi.with_values(u)
}

pub(crate) fn rk4_step(u: &[f64], dt: f64, rhs: &impl Fn(&[f64]) -> Vec<f64>) -> Vec<f64> {
    let axpy = |a: &[f64], s: f64, b: &[f64]| -> Vec<f64> {
        a.iter().zip(b).map(|(x, y)| x + s * y).collect()
    };
    let k1 = rhs(u);
    let k2 = rhs(&axpy(u, 0.5 * dt, &k1));
    let k3 = rhs(&axpy(u, 0.5 * dt, &k2));
    let k4 = rhs(&axpy(u, dt, &k3));
    u.iter()
        .enumerate()
        .map(|(i, v)| v + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect()
}

/// Number of steps of size `dt` covering `horizon` exactly.
pub(crate) fn step_count(horizon: f64, dt: f64) -> Result<usize> {
    if !(horizon.is_finite() && horizon >= 0.0) {
        return Err(Error::StepMismatch { horizon, dt });
    }
    let steps = (horizon / dt).round();
    if (steps * dt - horizon).abs() > 1e-9 * horizon.max(dt) {
        return Err(Error::StepMismatch { horizon, dt });
    }
    Ok(steps as usize)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gridfn::{Extension, Grid};
    use crate::kernel::{make_kernel, Profile};
    use approx::assert_abs_diff_eq;

    fn uniform(h: f64) -> Kernel {
        make_kernel(Profile::Uniform { half_width: 1.0 }, 1e-12, h).unwrap()
    }

    /// Tail by the textbook complement; fine where no cancellation occurs.
    fn naive_tail(t: f64, order: usize) -> f64 {
        let mut term = 1.0;
        let mut sum = 1.0;
        for k in 1..=order {
            term *= t / k as f64;
            sum += term;
        }
        1.0 - (-t).exp() * sum
    }

    #[test]
    fn tail_matches_complement() {
        for &t in &[0.3, 1.0, 2.5] {
            for order in 0..4 {
                assert_abs_diff_eq!(
                    poisson_tail(t, order),
                    naive_tail(t, order),
                    epsilon = 1e-14
                );
            }
        }
    }

    #[test]
    fn plan_examples() {
        assert_eq!(plan_series(0.0, 1e-3, 1.0).unwrap().order, 0);
        let p = plan_series(1.0, 1e-10, 1.0).unwrap();
        assert!(poisson_tail(1.0, p.order) < 1e-10);
        assert!(poisson_tail(1.0, p.order - 1) >= 1e-10);
        assert_eq!(p.order, 12);
        let mut last = 0;
        for cap in [0.5, 1.0, 2.0, 4.0, 8.0] {
            let k = plan_series(3.0, 1e-9, cap).unwrap().order;
            assert!(k >= last);
            last = k;
        }
        assert!(plan_series(0.2, 1e-300, 1.0).unwrap().order >= 1);
        assert!(matches!(
            plan_series(2e6, 1e-3, 1.0),
            Err(Error::SeriesCeiling { .. })
        ));
        assert!(plan_series(1.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn order_at_least_ceil_t() {
        let p = plan_series(5.5, 1.0, 1.0).unwrap();
        assert_eq!(p.order, 6);
    }

    #[test]
    fn constants_are_fixed() {
        let g = Grid::with_step(-10.0, 10.0, 0.05).unwrap();
        let k = uniform(0.05);
        let phi = GridFunction::constant(0.8, g, Extension::Constant).unwrap();
        for &t in &[0.0, 0.5, 3.0] {
            let u = apply_linear(&k, &phi, t, 1e-10).unwrap();
            for &v in u.values() {
                assert_abs_diff_eq!(v, 0.8, epsilon = 1e-10 + 1e-12);
            }
        }
        let ode = apply_linear_ode(&k, &phi, 1.0, 0.01).unwrap();
        for &v in ode.values() {
            assert_abs_diff_eq!(v, 0.8, epsilon = 1e-10);
        }
    }

    #[test]
    fn zero_time_is_identity() {
        let g = Grid::with_step(-10.0, 10.0, 0.05).unwrap();
        let phi = GridFunction::sample(|x| (-x * x).exp(), g, Extension::ZeroPad).unwrap();
        let u = apply_linear(&uniform(0.05), &phi, 0.0, 1e-10).unwrap();
        assert_eq!(u, phi);
    }

    #[test]
    fn series_terms_of_indicator() {
        let h = 0.01;
        let g = Grid::with_step(-5.0, 5.0, h).unwrap();
        let phi = GridFunction::sample(
            |x| if x.abs() <= 1.0 + 1e-12 { 1.0 } else { 0.0 },
            g,
            Extension::ZeroPad,
        )
        .unwrap();
        let terms = series_terms(&uniform(h), &phi, 3).unwrap();
        assert_eq!(terms.len(), 4);
        assert_eq!(terms[0], phi);
        assert_abs_diff_eq!(
            terms[1].values()[g.nearest_index(0.0)],
            1.0,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            terms[1].values()[g.nearest_index(1.0)],
            0.5,
            epsilon = 0.25 * h + 1e-12
        );
    }

    #[test]
    fn split_recombines_exactly() {
        let g = Grid::with_step(-10.0, 10.0, 0.05).unwrap();
        let k = uniform(0.05);
        let phi =
            GridFunction::sample(|x| 0.5 + 0.5 * (0.3 * x).cos(), g, Extension::Constant).unwrap();
        let full = apply_linear(&k, &phi, 1.3, 1e-10).unwrap();
        let (head, tail) = split_compact_part(&k, &phi, 1.3, 1e-10).unwrap();
        for i in 0..g.len() {
            assert_eq!(head.values()[i] + tail.values()[i], full.values()[i]);
        }
        let (h0, t0) = split_compact_part(&k, &phi, 0.0, 1e-10).unwrap();
        assert_eq!(h0, phi);
        assert!(t0.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn ode_rejects_bad_steps() {
        let g = Grid::with_step(-10.0, 10.0, 0.05).unwrap();
        let phi = GridFunction::constant(1.0, g, Extension::Constant).unwrap();
        assert!(matches!(
            apply_linear_ode(&uniform(0.05), &phi, 1.0, 0.3),
            Err(Error::StepMismatch { .. })
        ));
        assert!(apply_linear_ode(&uniform(0.05), &phi, 1.0, 1.0).is_err());
    }
}
