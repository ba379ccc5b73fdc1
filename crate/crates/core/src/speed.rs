//! Spreading speeds: the linearly determined `c* = inf_{mu > 0} lambda(mu) / mu`
//! and front tracking on simulated trajectories.
//!
//! `lambda(mu)` is the principal eigenvalue of the linearization at zero
//! acting on `e^{-mu x} phi(x)` with `phi` periodic:
//!
//! ```text
//! lambda phi = D (int J(z) e^{mu z} phi(x - z) dz - phi) + f_u(x, 0) phi.
//! ```
//!
//! For `x`-independent reactions this is `D (M(mu) - 1) + f_u(0)` with
//! `M(mu) = int J(z) e^{mu z} dz`.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::evolve::Trajectory;
use crate::gridfn::GridFunction;
use crate::kernel::Kernel;
use crate::reaction::Model;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DispersionPoint {
    pub mu: f64,
    pub lambda: f64,
    /// `lambda / mu`.
    pub c: f64,
}

/// Largest period cell used for the periodic eigenvalue problem.
pub const MAX_CELL_POINTS: usize = 512;
const MIN_CELL_POINTS: usize = 64;
const MIN_LATTICE_CELL_POINTS: usize = 8;
const POWER_TOLERANCE: f64 = 1e-10;
const POWER_MAX_ITERATIONS: usize = 200_000;

/// `lambda(mu)` for `mu > 0`.
pub fn dispersion_rate(model: &Model, mu: f64) -> Result<DispersionPoint> {
    if !(mu > 0.0 && mu.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "mu",
            reason: format!("must be > 0, got {mu}"),
        });
    }
    let lambda = if model.reaction().is_homogeneous() {
        homogeneous_rate(model, mu)?
    } else {
        periodic_principal_eigenvalue(model, mu)?.value
    };
    Ok(DispersionPoint {
        mu,
        lambda,
        c: lambda / mu,
    })
}

/// `D (M(mu) - 1) + f_u(0)`; only meaningful for `x`-independent reactions.
pub fn homogeneous_rate(model: &Model, mu: f64) -> Result<f64> {
    let m = model.kernel().exp_moment(mu)?;
    Ok(model.dispersal() * (m - 1.0) + model.reaction().growth_at_zero(0.0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrincipalEigen {
    pub value: f64,
    /// Positive eigenvector on the period cell, normalized to max 1.
    pub vector: Vec<f64>,
    pub iterations: usize,
}

/// Number of points on one period cell of length `L`: the model's grid
/// spacing when it divides `L` into at most 512 cells (and at least 8),
/// otherwise the nearest count in `[64, 512]`.
pub fn cell_points(model: &Model) -> usize {
    let period = model.reaction().period();
    let ratio = period / model.grid().h();
    let n = ratio.round();
    if (ratio - n).abs() < 1e-9 * ratio
        && (MIN_LATTICE_CELL_POINTS as f64..=MAX_CELL_POINTS as f64).contains(&n)
    {
        n as usize
    } else {
        (n as usize).clamp(MIN_CELL_POINTS, MAX_CELL_POINTS)
    }
}

/// Dense `n_L x n_L` matrix of the weighted linearization on one period.
fn cell_matrix(kernel: &Kernel, model: &Model, mu: f64, n: usize) -> Result<Vec<f64>> {
    let period = model.reaction().period();
    let step = period / n as f64;
    let kernel = kernel.with_quadrature_step(step)?;
    let limit = kernel.moment_limit();
    if !(mu.abs() < limit) {
        return Err(Error::MomentRange {
            mu,
            lo: -limit,
            hi: limit,
        });
    }
    let d = model.dispersal();
    let mut a = vec![0.0; n * n];
    for (q, w) in kernel.stencil().iter() {
        let weight = d * w * (mu * q as f64 * step).exp();
        for i in 0..n {
            let j = (i as i64 - q).rem_euclid(n as i64) as usize;
            a[i * n + j] += weight;
        }
    }
    for i in 0..n {
        let x = i as f64 * step;
        a[i * n + i] += -d + model.reaction().growth_at_zero(x);
    }
    Ok(a)
}

/// Principal eigenvalue of the weighted periodic linearization, by shifted
/// power iteration with Collatz-Wielandt bounds as the stopping rule.
///
/// Accepts any real `mu` within the kernel's moment range.
pub fn periodic_principal_eigenvalue(model: &Model, mu: f64) -> Result<PrincipalEigen> {
    let n = cell_points(model);
    let mut a = cell_matrix(model.kernel(), model, mu, n)?;
    let min_diag = (0..n).map(|i| a[i * n + i]).fold(f64::INFINITY, f64::min);
    let shift = (-min_diag).max(0.0) + 1.0;
    for i in 0..n {
        a[i * n + i] += shift;
    }

    let mut v: Vec<f64> = (0..n)
        .map(|i| 1.0 + 0.25 * (std::f64::consts::TAU * i as f64 / n as f64).cos())
        .collect();
    let mut next = vec![0.0; n];
    let mut gap = f64::INFINITY;
    for it in 1..=POWER_MAX_ITERATIONS {
        for (i, out) in next.iter_mut().enumerate() {
            let row = &a[i * n..(i + 1) * n];
            *out = row.iter().zip(&v).map(|(x, y)| x * y).sum();
        }
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for (x, y) in next.iter().zip(&v) {
            let r = x / y;
            lo = lo.min(r);
            hi = hi.max(r);
        }
        let norm = next.iter().fold(0.0f64, |m, x| m.max(*x));
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::PowerIteration {
                iterations: it,
                gap,
            });
        }
        for (dst, src) in v.iter_mut().zip(&next) {
            *dst = src / norm;
        }
        let rho = 0.5 * (lo + hi);
        gap = (hi - lo) / rho.abs().max(f64::MIN_POSITIVE);
        if gap <= POWER_TOLERANCE {
            return Ok(PrincipalEigen {
                value: rho - shift,
                vector: v,
                iterations: it,
            });
        }
    }
    Err(Error::PowerIteration {
        iterations: POWER_MAX_ITERATIONS,
        gap,
    })
}

/// Golden-section minimization of a unimodal function on `[lo, hi]` until
/// the bracket is narrower than `tol`.
pub fn golden_section(
    f: impl Fn(f64) -> Result<f64>,
    lo: f64,
    hi: f64,
    tol: f64,
) -> Result<(f64, f64)> {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    while (b - a).abs() > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d)?;
        }
    }
    let x = 0.5 * (a + b);
    Ok((x, f(x)?))
}

/// Points in the unimodality scan of `c(mu)`.
pub const SCAN_POINTS: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearSpeed {
    pub c_star: f64,
    pub mu_star: f64,
}

/// Minimize `c(mu) = lambda(mu) / mu` over `[mu_min, mu_max]`.
pub fn linear_speed(model: &Model, mu_min: f64, mu_max: f64, tol: f64) -> Result<LinearSpeed> {
    minimize_speed(|mu| Ok(dispersion_rate(model, mu)?.c), mu_min, mu_max, tol)
}

/// Scan-then-refine minimization of an arbitrary speed functional.
pub fn minimize_speed(
    c: impl Fn(f64) -> Result<f64> + Sync,
    mu_min: f64,
    mu_max: f64,
    tol: f64,
) -> Result<LinearSpeed> {
    if !(mu_min > 0.0 && mu_max > mu_min && mu_max.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "mu bracket",
            reason: format!("need 0 < mu_min < mu_max, got [{mu_min}, {mu_max}]"),
        });
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter {
            name: "tol",
            reason: format!("must be > 0, got {tol}"),
        });
    }
    let step = (mu_max - mu_min) / (SCAN_POINTS - 1) as f64;
    let mus: Vec<f64> = (0..SCAN_POINTS).map(|i| mu_min + i as f64 * step).collect();
    let values = mus
        .par_iter()
        .map(|&mu| c(mu))
        .collect::<Result<Vec<f64>>>()?;
    let best = values
        .iter()
        .enumerate()
        .fold(0, |b, (i, v)| if *v < values[b] { i } else { b });
    // tolerate roundoff-level wiggles on flat stretches
    let slack = 1e-12 * values[best].abs().max(1.0);
    let descending = values[..=best].windows(2).all(|w| w[1] <= w[0] + slack);
    let ascending = values[best..].windows(2).all(|w| w[1] >= w[0] - slack);
    if !(descending && ascending) {
        return Err(Error::NotUnimodal {
            lo: mu_min,
            hi: mu_max,
        });
    }
    if best == 0 || best == SCAN_POINTS - 1 {
        return Err(Error::EdgeMinimizer {
            mu: mus[best],
            lo: mu_min,
            hi: mu_max,
        });
    }
    let (mu_star, c_star) = golden_section(&c, mus[best - 1], mus[best + 1], tol)?;
    Ok(LinearSpeed { c_star, mu_star })
}

/// Largest `x` with `u(x) >= level`, linearly interpolated.
pub fn front_position(u: &GridFunction, level: f64) -> Result<f64> {
    let v = u.values();
    let i = v
        .iter()
        .rposition(|&x| x >= level)
        .ok_or(Error::LevelNotAttained { level })?;
    if i + 1 == v.len() {
        return Err(Error::FrontAtBoundary { level });
    }
    let g = u.grid();
    let frac = (v[i] - level) / (v[i] - v[i + 1]);
    Ok(g.x(i) + frac * g.h())
}

/// Fewest snapshots accepted for a front-speed fit.
pub const MIN_FIT_SNAPSHOTS: usize = 5;

#[derive(Debug, Clone, PartialEq)]
pub struct FrontFit {
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square residual of the linear fit.
    pub residual: f64,
    pub times: Vec<f64>,
    pub positions: Vec<f64>,
}

/// Least-squares slope of the front position over snapshots in `window`.
pub fn fit_front_speed(traj: &Trajectory<'_>, level: f64, window: (f64, f64)) -> Result<FrontFit> {
    let (t0, t1) = window;
    let last = *traj.times().last().expect("nonempty");
    if !(t0 >= 0.0 && t1 > t0 && t1 <= last * (1.0 + 1e-12)) {
        return Err(Error::OutOfRange {
            what: "fit window end",
            value: t1,
            range: format!("(t0 = {t0}, {last}]"),
        });
    }
    let eps = 1e-9 * last.max(1.0);
    let mut times = Vec::new();
    let mut positions = Vec::new();
    for (t, s) in traj.times().iter().zip(traj.states()) {
        if *t >= t0 - eps && *t <= t1 + eps {
            times.push(*t);
            positions.push(front_position(s, level)?);
        }
    }
    if times.len() < MIN_FIT_SNAPSHOTS {
        return Err(Error::UnderdeterminedFit {
            needed: MIN_FIT_SNAPSHOTS,
            found: times.len(),
        });
    }
    let n = times.len() as f64;
    let tm = times.iter().sum::<f64>() / n;
    let xm = positions.iter().sum::<f64>() / n;
    let sxx: f64 = times.iter().map(|t| (t - tm).powi(2)).sum();
    let sxy: f64 = times
        .iter()
        .zip(&positions)
        .map(|(t, x)| (t - tm) * (x - xm))
        .sum();
    let slope = sxy / sxx;
    let intercept = xm - slope * tm;
    let sse: f64 = times
        .iter()
        .zip(&positions)
        .map(|(t, x)| (x - intercept - slope * t).powi(2))
        .sum();
    Ok(FrontFit {
        slope,
        intercept,
        residual: (sse / n).sqrt(),
        times,
        positions,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpeedReport {
    pub c_star: f64,
    pub mu_star: f64,
    pub c_observed: f64,
    pub level: f64,
    pub fit_window: (f64, f64),
    pub fit_residual: f64,
    /// `|c_observed - c_star| / c_star`.
    pub relative_gap: f64,
}

/// Front-tracking speed next to the linear prediction on `bracket`.
pub fn observed_speed(
    traj: &Trajectory<'_>,
    level: f64,
    fit_window: (f64, f64),
    bracket: (f64, f64),
) -> Result<SpeedReport> {
    let model = traj.model();
    let floor = model.cap().inf();
    if !(level > 0.0 && level < floor) {
        return Err(Error::OutOfRange {
            what: "level",
            value: level,
            range: format!("(0, {floor})"),
        });
    }
    let fit = fit_front_speed(traj, level, fit_window)?;
    let lin = linear_speed(model, bracket.0, bracket.1, 1e-8)?;
    Ok(SpeedReport {
        c_star: lin.c_star,
        mu_star: lin.mu_star,
        c_observed: fit.slope,
        level,
        fit_window,
        fit_residual: fit.residual,
        relative_gap: (fit.slope - lin.c_star).abs() / lin.c_star,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gridfn::{Extension, Grid};
    use crate::kernel::{make_kernel, Profile};
    use crate::reaction::{Cap, Reaction};
    use approx::assert_abs_diff_eq;

    fn gaussian_model(reaction: Reaction, grid: Grid, ext: Extension) -> Model {
        let kernel = make_kernel(Profile::Gaussian { sigma: 1.0 }, 1e-12, 0.05).unwrap();
        Model::new(kernel, 1.0, reaction, Cap::Constant(2.0), grid, ext).unwrap()
    }

    #[test]
    fn gaussian_dispersion_closed_form() {
        let m = gaussian_model(
            Reaction::logistic(1.0).unwrap(),
            Grid::with_step(-20.0, 20.0, 0.05).unwrap(),
            Extension::Constant,
        );
        let p = dispersion_rate(&m, 1.0).unwrap();
        assert_abs_diff_eq!(p.lambda, 0.5f64.exp(), epsilon = 1e-8);
        assert_eq!(p.c, p.lambda / p.mu);
        assert_abs_diff_eq!(
            dispersion_rate(&m, 1e-6).unwrap().lambda,
            1.0,
            epsilon = 1e-9
        );
        assert!(dispersion_rate(&m, 0.0).is_err());
    }

    #[test]
    fn periodic_solver_reduces_to_homogeneous() {
        let grid = Grid::periodic(0.0, 20.0, 400).unwrap();
        let hom = gaussian_model(Reaction::logistic(1.0).unwrap(), grid, Extension::Periodic);
        let per = gaussian_model(
            Reaction::periodic_kpp(1.0, 0.0, 2.0).unwrap(),
            grid,
            Extension::Periodic,
        );
        for mu in [0.5, 1.0, 1.5] {
            let a = dispersion_rate(&hom, mu).unwrap().lambda;
            let b = dispersion_rate(&per, mu).unwrap().lambda;
            assert_abs_diff_eq!(a, b, epsilon = 1e-8);
        }
    }

    #[test]
    fn golden_section_on_parabola() {
        let (x, fx) = golden_section(|m| Ok((m - 1.0) * (m - 1.0) + 1.0), 0.1, 3.0, 1e-6).unwrap();
        assert_abs_diff_eq!(x, 1.0, epsilon = 1e-6);
        assert_abs_diff_eq!(fx, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn bracket_errors() {
        let edge = minimize_speed(|m| Ok((m - 5.0).powi(2)), 0.1, 3.0, 1e-9);
        assert!(matches!(edge, Err(Error::EdgeMinimizer { .. })));
        let wavy = minimize_speed(|m| Ok((6.0 * m).sin()), 0.1, 3.0, 1e-9);
        assert!(matches!(wavy, Err(Error::NotUnimodal { .. })));
    }

    #[test]
    fn front_position_examples() {
        let g = Grid::with_step(-20.0, 20.0, 0.1).unwrap();
        let tent =
            GridFunction::sample(|x| (1.0 - x.abs() / 10.0).max(0.0), g, Extension::Constant)
                .unwrap();
        assert_abs_diff_eq!(front_position(&tent, 0.5).unwrap(), 5.0, epsilon = 1e-12);
        let shifted = GridFunction::sample(
            |x| (1.0 - (x - 3.0).abs() / 10.0).max(0.0),
            g,
            Extension::Constant,
        )
        .unwrap();
        assert_abs_diff_eq!(front_position(&shifted, 0.5).unwrap(), 8.0, epsilon = 1e-12);
        let one = GridFunction::constant(1.0, g, Extension::Constant).unwrap();
        assert!(matches!(
            front_position(&one, 0.5),
            Err(Error::FrontAtBoundary { .. })
        ));
        assert!(matches!(
            front_position(&tent, 2.0),
            Err(Error::LevelNotAttained { .. })
        ));
    }
}
