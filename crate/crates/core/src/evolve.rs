//! The nonlinear semiflow `Q(t)` of `u_t = D (J * u - u) + f(x, u)`.
//!
//! The main scheme discretizes the variation-of-constants formula with a
//! left-endpoint rule,
//!
//! ```text
//! u_{n+1} = T(D dt) (u_n + dt f(., u_n)),
//! ```
//!
//! with `T` the series semigroup. Method-of-lines RK4 on the same discrete
//! operator is the independent oracle.

use crate::error::{ensure_positive, Error, Result};
use crate::gridfn::GridFunction;
use crate::reaction::Model;
use crate::semigroup::{linear_flow, rk4_step, step_count};

/// Default truncation tolerance of the series inside a step.
pub const DEFAULT_SERIES_TOLERANCE: f64 = 1e-12;

/// Relative slack allowed above the cap (and below zero) before a state is
/// declared out of range.
pub const RANGE_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Scheme {
    #[default]
    VocExponentialEuler,
    MolRk4,
}

impl Scheme {
    pub fn name(&self) -> &'static str {
        match self {
            Scheme::VocExponentialEuler => "voc-exponential-euler",
            Scheme::MolRk4 => "mol-rk4",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "voc-exponential-euler" | "voc" => Some(Scheme::VocExponentialEuler),
            "mol-rk4" | "rk4" => Some(Scheme::MolRk4),
            _ => None,
        }
    }
}

fn check_guard(model: &Model, dt: f64) -> Result<()> {
    ensure_positive("dt", dt)?;
    let product = dt * model.lipschitz();
    if product >= 1.0 {
        return Err(Error::AccuracyGuard { product });
    }
    Ok(())
}

fn voc_values(model: &Model, u: &[f64], dt: f64, tolerance: f64) -> Result<Vec<f64>> {
    let f = model.reaction_values(u);
    let shifted: Vec<f64> = u.iter().zip(&f).map(|(v, r)| v + dt * r).collect();
    linear_flow(
        model.convolver(),
        &shifted,
        model.dispersal() * dt,
        tolerance,
    )
}

/// One exponential-Euler step of the variation-of-constants formula.
pub fn step_voc(
    model: &Model,
    u: &GridFunction,
    dt: f64,
    series_tolerance: f64,
) -> Result<GridFunction> {
    model.check(u)?;
    check_guard(model, dt)?;
    model.check_range(u.values(), 0.0, dt, RANGE_TOLERANCE)?;
    let next = voc_values(model, u.values(), dt, series_tolerance)?;
    model.check_range(&next, dt, dt, RANGE_TOLERANCE)?;
    model.function(next)
}

/// One classical RK4 step of the method-of-lines system.
pub fn step_rk4(model: &Model, u: &GridFunction, dt: f64) -> Result<GridFunction> {
    model.check(u)?;
    check_guard(model, dt)?;
    model.check_range(u.values(), 0.0, dt, RANGE_TOLERANCE)?;
    let next = rk4_step(u.values(), dt, &|v: &[f64]| model.rhs(v));
    model.check_range(&next, dt, dt, RANGE_TOLERANCE)?;
    model.function(next)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvolveOptions {
    pub horizon: f64,
    pub dt: f64,
    pub scheme: Scheme,
    pub series_tolerance: f64,
    /// Times at which states are kept, besides `0` and `horizon`. Each must be
    /// a multiple of `dt`.
    pub snapshot_times: Vec<f64>,
}

impl EvolveOptions {
    pub fn new(horizon: f64, dt: f64, scheme: Scheme) -> Self {
        EvolveOptions {
            horizon,
            dt,
            scheme,
            series_tolerance: DEFAULT_SERIES_TOLERANCE,
            snapshot_times: Vec::new(),
        }
    }

    /// Keep a snapshot every `interval` time units.
    pub fn every(mut self, interval: f64) -> Self {
        let count = (self.horizon / interval).round() as usize;
        self.snapshot_times = (1..count).map(|i| i as f64 * interval).collect();
        self
    }

    pub fn snapshots(mut self, times: Vec<f64>) -> Self {
        self.snapshot_times = times;
        self
    }
}

/// States of one solution at increasing times.
#[derive(Debug, Clone)]
pub struct Trajectory<'m> {
    model: &'m Model,
    times: Vec<f64>,
    states: Vec<GridFunction>,
    scheme: Scheme,
    dt: f64,
}

impl<'m> Trajectory<'m> {
    /// Assemble a trajectory from precomputed states, e.g. synthetic data.
    pub fn from_states(
        model: &'m Model,
        times: Vec<f64>,
        states: Vec<GridFunction>,
        scheme: Scheme,
        dt: f64,
    ) -> Result<Self> {
        if times.is_empty() || times.len() != states.len() {
            return Err(Error::Precondition(format!(
                "{} times for {} states",
                times.len(),
                states.len()
            )));
        }
        if times[0] != 0.0 || times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Precondition(
                "times must start at 0 and increase".into(),
            ));
        }
        for s in &states {
            model.check(s)?;
        }
        Ok(Trajectory {
            model,
            times,
            states,
            scheme,
            dt,
        })
    }

    pub fn model(&self) -> &'m Model {
        self.model
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn states(&self) -> &[GridFunction] {
        &self.states
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn final_state(&self) -> &GridFunction {
        self.states.last().expect("trajectory is never empty")
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// Integrate from `phi` to `options.horizon`.
pub fn evolve<'m>(
    model: &'m Model,
    phi: &GridFunction,
    options: &EvolveOptions,
) -> Result<Trajectory<'m>> {
    model.check(phi)?;
    check_guard(model, options.dt)?;
    ensure_positive("series_tolerance", options.series_tolerance)?;
    let dt = options.dt;
    let steps = step_count(options.horizon, dt)?;
    let mut keep = vec![false; steps + 1];
    keep[0] = true;
    keep[steps] = true;
    for &s in &options.snapshot_times {
        if !(s >= 0.0 && s <= options.horizon) {
            return Err(Error::OutOfRange {
                what: "snapshot time",
                value: s,
                range: format!("[0, {}]", options.horizon),
            });
        }
        keep[step_count(s, dt)?] = true;
    }

    model.check_range(phi.values(), 0.0, dt, RANGE_TOLERANCE)?;
    let mut times = vec![0.0];
    let mut states = vec![phi.clone()];
    let mut u = phi.values().to_vec();
    let rhs = |v: &[f64]| model.rhs(v);
    for (n, &kept) in keep.iter().enumerate().skip(1) {
        u = match options.scheme {
            Scheme::VocExponentialEuler => voc_values(model, &u, dt, options.series_tolerance)?,
            Scheme::MolRk4 => rk4_step(&u, dt, &rhs),
        };
        let t = n as f64 * dt;
        model.check_range(&u, t, dt, RANGE_TOLERANCE)?;
        if kept {
            times.push(t);
            states.push(model.function(u.clone())?);
        }
    }
    log::debug!(
        "evolved {} steps of {} with dt = {dt}",
        steps,
        options.scheme.name()
    );
    Ok(Trajectory {
        model,
        times,
        states,
        scheme: options.scheme,
        dt,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrderReport {
    pub t: f64,
    /// `max (Q_t phi - Q_t psi)^+`.
    pub max_violation: f64,
    pub passed: bool,
}

/// Violations below this count as order preserved.
pub const ORDER_TOLERANCE: f64 = 1e-8;

/// Evolve `phi <= psi` to time `t` and measure `max (Q_t phi - Q_t psi)^+`.
pub fn check_order_preserving(
    model: &Model,
    phi: &GridFunction,
    psi: &GridFunction,
    t: f64,
    dt: f64,
    scheme: Scheme,
) -> Result<OrderReport> {
    model.check(phi)?;
    model.check(psi)?;
    if let Some(i) = phi
        .values()
        .iter()
        .zip(psi.values())
        .position(|(a, b)| a > b)
    {
        return Err(Error::Precondition(format!(
            "phi <= psi fails at x = {}",
            model.grid().x(i)
        )));
    }
    let options = EvolveOptions::new(t, dt, scheme);
    let a = evolve(model, phi, &options)?;
    let b = evolve(model, psi, &options)?;
    let max_violation = a
        .final_state()
        .values()
        .iter()
        .zip(b.final_state().values())
        .fold(0.0f64, |m, (x, y)| m.max(x - y));
    Ok(OrderReport {
        t,
        max_violation,
        passed: max_violation < ORDER_TOLERANCE,
    })
}
