//! The built-in check matrix behind `nldisp selfcheck`.
//!
//! Each scenario writes `selfcheck_<name>.csv` with one row per case:
//! the measured quantity, its tolerance and the verdict. Everything is
//! seeded, so repeated runs produce identical files.

use nldisp_core::compactness::{
    make_ensemble_on, proxy_from_distances, verify_linear_ingredients, Ensemble, EnsembleSpec,
    IngredientOptions,
};
use nldisp_core::evolve::{check_order_preserving, evolve, EvolveOptions, Scheme};
use nldisp_core::gridfn::sup_distance_on;
use nldisp_core::semigroup::{apply_linear, apply_linear_ode, split_compact_part};
use nldisp_core::{
    linear_speed, make_kernel, steady_state, Cap, Extension, Grid, GridFunction, Kernel, Model,
    Profile, Reaction, Window,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::output::{Cell, Csv};
use crate::run::{RunError, Session};

struct Table {
    name: &'static str,
    csv: Csv,
    failures: Vec<String>,
}

impl Table {
    fn new(name: &'static str) -> Self {
        Table {
            name,
            csv: Csv::new(&["case", "value", "tolerance", "passed"]),
            failures: Vec::new(),
        }
    }

    /// Record `value <= tolerance`.
    fn at_most(&mut self, case: &str, value: f64, tolerance: f64) {
        self.record(case, value, tolerance, value <= tolerance);
    }

    fn record(&mut self, case: &str, value: f64, tolerance: f64, passed: bool) {
        self.csv.row(&[
            Cell::S(case),
            Cell::F(value),
            Cell::F(tolerance),
            Cell::B(passed),
        ]);
        if !passed {
            self.failures.push(format!("{}: {case}", self.name));
        }
    }
}

type Step = fn(&mut Table, u64) -> nldisp_core::Result<()>;

const SCENARIOS: &[(&str, Step)] = &[
    ("linear_oracle", linear_oracle),
    ("eigenfunction", eigenfunction),
    ("ingredients", ingredients),
    ("head_factor", head_factor),
    ("linear_speed", speeds),
    ("schemes", schemes),
    ("order", order),
    ("steady", steady),
    ("proxy", proxy),
];

pub fn run_matrix(session: &mut Session, seed: u64) -> Result<(), RunError> {
    let mut failures = Vec::new();
    let mut summary = Csv::new(&["scenario", "cases_failed", "passed"]);
    for (name, step) in SCENARIOS {
        let mut table = Table::new(name);
        session.phase(name, || step(&mut table, seed))?;
        session.write_csv(&format!("selfcheck_{name}.csv"), &table.csv)?;
        summary.row(&[
            Cell::S(name),
            Cell::I(table.failures.len() as i64),
            Cell::B(table.failures.is_empty()),
        ]);
        failures.extend(table.failures);
    }
    session.write_csv("selfcheck.csv", &summary)?;
    if failures.is_empty() {
        Ok(())
    } else {
        Err(RunError::Check {
            phase: "selfcheck".into(),
            message: failures.join("; "),
        })
    }
}

fn gaussian(h: f64) -> nldisp_core::Result<Kernel> {
    make_kernel(Profile::Gaussian { sigma: 1.0 }, 1e-12, h)
}

fn uniform(h: f64) -> nldisp_core::Result<Kernel> {
    make_kernel(Profile::Uniform { half_width: 1.0 }, 1e-12, h)
}

fn triangle(h: f64) -> nldisp_core::Result<Kernel> {
    make_kernel(
        Profile::Tabulated {
            xs: vec![-1.0, 0.0, 1.0],
            values: vec![0.0, 1.0, 0.0],
        },
        1e-12,
        h,
    )
}

/// Sum of three random gaussian bumps with values in `[0, 1]`.
fn smooth_datum(
    rng: &mut ChaCha8Rng,
    grid: Grid,
    ext: Extension,
) -> nldisp_core::Result<GridFunction> {
    let bumps: Vec<(f64, f64, f64)> = (0..3)
        .map(|_| {
            (
                rng.random_range(-8.0..8.0),
                rng.random_range(1.0..4.0),
                rng.random_range(0.0..1.0 / 3.0),
            )
        })
        .collect();
    GridFunction::sample(
        |x| {
            bumps
                .iter()
                .map(|(c, w, a)| a * (-((x - c) / w).powi(2)).exp())
                .sum()
        },
        grid,
        ext,
    )
}

fn linear_oracle(t: &mut Table, seed: u64) -> nldisp_core::Result<()> {
    let grid = Grid::with_step(-20.0, 20.0, 0.05)?;
    let k = gaussian(0.05)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for i in 0..10 {
        let phi = smooth_datum(&mut rng, grid, Extension::Constant)?;
        let a = apply_linear(&k, &phi, 1.0, 1e-12)?;
        let b = apply_linear_ode(&k, &phi, 1.0, 0.01)?;
        let err = sup_distance_on(&a, &b, &Window::new(-20.0, 20.0)?)?;
        t.at_most(&format!("datum {i}: series vs rk4 at t = 1"), err, 1e-6);
    }
    Ok(())
}

fn eigenfunction(t: &mut Table, _seed: u64) -> nldisp_core::Result<()> {
    let h = 0.05;
    let grid = Grid::with_step(-30.0, 30.0, h)?;
    let window = Window::new(-10.0, 10.0)?;
    let range = grid.window_indices(&window)?;
    for (kname, k) in [("uniform", uniform(h)?), ("gaussian", gaussian(h)?)] {
        for mu in [0.1, 0.3] {
            let m = k.exp_moment(mu)?;
            let phi = GridFunction::sample(|x| (mu * x).exp(), grid, Extension::Constant)?;
            for time in [0.5, 1.0] {
                let out = apply_linear(&k, &phi, time, 1e-12)?;
                let factor = ((m - 1.0) * time).exp();
                let rel = range
                    .clone()
                    .map(|i| {
                        (out.values()[i] - factor * phi.values()[i]).abs()
                            / (factor * phi.values()[i])
                    })
                    .fold(0.0f64, f64::max);
                t.at_most(&format!("{kname} mu = {mu} t = {time}"), rel, 1e-6);
            }
        }
    }
    Ok(())
}

fn ensembles(grid: Grid, seed: u64) -> nldisp_core::Result<Vec<(&'static str, Ensemble)>> {
    let cap = vec![1.0; grid.len()];
    let translates = EnsembleSpec::Translates {
        amplitude: 1.0,
        width: 3.0,
        start: -3.0,
        spacing: 2.0,
    };
    let fourier = EnsembleSpec::RandomFourier { modes: 6, seed };
    Ok(vec![
        (
            "translates",
            make_ensemble_on(&translates, 4, grid, Extension::Constant, cap.clone())?,
        ),
        (
            "random-fourier",
            make_ensemble_on(&fourier, 4, grid, Extension::Constant, cap)?,
        ),
    ])
}

fn ingredients(t: &mut Table, seed: u64) -> nldisp_core::Result<()> {
    let h = 0.05;
    let grid = Grid::with_step(-20.0, 20.0, h)?;
    let window = Window::new(-8.0, 8.0)?;
    let kernels = [
        ("uniform", uniform(h)?),
        ("gaussian", gaussian(h)?),
        ("triangle", triangle(h)?),
    ];
    for (kname, k) in &kernels {
        for (ename, e) in ensembles(grid, seed)? {
            for time in [0.5, 1.0, 2.0] {
                let opts = IngredientOptions {
                    seed,
                    ..IngredientOptions::default()
                };
                let rep = verify_linear_ingredients(k, &e, &window, time, &opts)?;
                for c in &rep.checks {
                    let case = format!("{kname} / {ename} / t = {time}: {}", c.name);
                    t.record(&case, c.worst_slack, c.tolerance, c.passed);
                }
            }
        }
    }
    // harness self-test: the modulus bound survives halving g but not
    // quartering it on a tall translate ensemble
    let (_, e) = ensembles(grid, seed)?
        .into_iter()
        .next()
        .expect("two ensembles");
    for (kname, k) in &kernels {
        for (scale, expect_pass) in [(0.5, true), (0.25, false)] {
            let opts = IngredientOptions {
                seed,
                modulus_scale: scale,
                ..IngredientOptions::default()
            };
            let rep = verify_linear_ingredients(k, &e, &window, 1.0, &opts)?;
            let c = &rep.checks[1];
            let case = format!(
                "{kname}: g scaled by {scale} {}",
                if expect_pass { "holds" } else { "fails" }
            );
            t.record(&case, c.worst_slack, c.tolerance, c.passed == expect_pass);
        }
    }
    Ok(())
}

fn head_factor(t: &mut Table, seed: u64) -> nldisp_core::Result<()> {
    let h = 0.05;
    let grid = Grid::with_step(-20.0, 20.0, h)?;
    let k = gaussian(h)?;
    let window = Window::new(-8.0, 8.0)?;
    for (ename, e) in ensembles(grid, seed)? {
        for time in [0.5, 1.0, 2.0] {
            let heads: Vec<GridFunction> = e
                .members()
                .iter()
                .map(|m| split_compact_part(&k, m, time, 1e-12).map(|(head, _)| head))
                .collect::<nldisp_core::Result<_>>()?;
            let mut worst = 0.0f64;
            for i in 0..heads.len() {
                for j in (i + 1)..heads.len() {
                    let d0 = sup_distance_on(&e.members()[i], &e.members()[j], &window)?;
                    let d1 = sup_distance_on(&heads[i], &heads[j], &window)?;
                    worst = worst.max((d1 - (-time).exp() * d0).abs());
                }
            }
            t.at_most(&format!("{ename} t = {time}"), worst, 1e-12);
        }
    }
    Ok(())
}

/// Root of `tanh mu = mu / 2` on `(1, 3)` by bisection.
fn uniform_stationary_mu() -> f64 {
    let (mut lo, mut hi) = (1.0f64, 3.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid.tanh() - mid / 2.0 > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn speeds(t: &mut Table, _seed: u64) -> nldisp_core::Result<()> {
    let grid = Grid::with_step(-20.0, 20.0, 0.05)?;
    let logistic = Reaction::logistic(1.0)?;
    let m = Model::new(
        gaussian(0.05)?,
        1.0,
        logistic.clone(),
        Cap::Constant(1.0),
        grid,
        Extension::Constant,
    )?;
    let s = linear_speed(&m, 0.2, 3.0, 1e-9)?;
    t.at_most("gaussian |mu* - 1|", (s.mu_star - 1.0).abs(), 1e-6);
    t.at_most(
        "gaussian |c* - e^(1/2)|",
        (s.c_star - 0.5f64.exp()).abs(),
        1e-6,
    );

    let m = Model::new(
        uniform(0.001)?,
        1.0,
        logistic,
        Cap::Constant(1.0),
        grid,
        Extension::Constant,
    )?;
    let s = linear_speed(&m, 0.5, 4.0, 1e-9)?;
    let mu = uniform_stationary_mu();
    let c = mu.sinh() / (mu * mu);
    t.at_most(
        "uniform |mu* - root of tanh mu = mu/2|",
        (s.mu_star - mu).abs(),
        1e-3,
    );
    t.at_most("uniform |c* - sinh(mu)/mu^2|", (s.c_star - c).abs(), 1e-3);
    Ok(())
}

fn schemes(t: &mut Table, seed: u64) -> nldisp_core::Result<()> {
    let grid = Grid::with_step(-20.0, 20.0, 0.05)?;
    let m = Model::new(
        gaussian(0.05)?,
        1.0,
        Reaction::logistic(1.0)?,
        Cap::Constant(1.0),
        grid,
        Extension::Constant,
    )?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5c4e);
    let phi = smooth_datum(&mut rng, grid, Extension::Constant)?;
    let window = Window::new(-10.0, 10.0)?;
    let a = evolve(
        &m,
        &phi,
        &EvolveOptions::new(1.0, 1e-3, Scheme::VocExponentialEuler),
    )?;
    let b = evolve(&m, &phi, &EvolveOptions::new(1.0, 1e-3, Scheme::MolRk4))?;
    let d = sup_distance_on(a.final_state(), b.final_state(), &window)?;
    t.at_most("voc vs rk4 at T = 1, dt = 1e-3", d, 1e-4);
    Ok(())
}

fn order(t: &mut Table, seed: u64) -> nldisp_core::Result<()> {
    let grid = Grid::with_step(-20.0, 20.0, 0.05)?;
    let m = Model::new(
        gaussian(0.05)?,
        1.0,
        Reaction::logistic(1.0)?,
        Cap::Constant(1.0),
        grid,
        Extension::Constant,
    )?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x0bde);
    for i in 0..5 {
        let psi = smooth_datum(&mut rng, grid, Extension::Constant)?;
        let s = [0.0, 0.5, 0.9, 0.99, 1.0][i];
        let phi = psi.map(|_, v| s * v)?;
        let r = check_order_preserving(&m, &phi, &psi, 1.0, 0.01, Scheme::VocExponentialEuler)?;
        t.record(
            &format!("pair {i}: phi = {s} psi"),
            r.max_violation,
            1e-8,
            r.passed,
        );
    }
    Ok(())
}

fn steady(t: &mut Table, _seed: u64) -> nldisp_core::Result<()> {
    let grid = Grid::periodic(0.0, 16.0, 320)?;
    let k = gaussian(0.05)?;
    for r in [1.0, 2.0] {
        let m = Model::new(
            k.clone(),
            1.0,
            Reaction::logistic(r)?,
            Cap::Constant(r),
            grid,
            Extension::Periodic,
        )?;
        let beta = steady_state(&m, &m.sample(|_| 0.5)?, 1e-8, 500.0)?;
        t.at_most(
            &format!("logistic r = {r}: residual"),
            m.residual(&beta)?,
            1e-8,
        );
        let dev = beta
            .values()
            .iter()
            .fold(0.0f64, |a, v| a.max((v - r).abs()));
        t.at_most(&format!("logistic r = {r}: |beta - r|"), dev, 1e-7);
    }
    let m = Model::new(
        k,
        1.0,
        Reaction::periodic_kpp(1.0, 0.5, 2.0)?,
        Cap::Constant(1.5),
        grid,
        Extension::Periodic,
    )?;
    let beta = steady_state(&m, &m.sample(|_| 0.5)?, 1e-8, 500.0)?;
    t.at_most("periodic-kpp: residual", m.residual(&beta)?, 1e-6);
    let shift = (2.0 / grid.h()).round() as usize;
    let v = beta.values();
    let n = v.len();
    let dev = (0..n)
        .map(|i| (v[i] - v[(i + shift) % n]).abs())
        .fold(0.0f64, f64::max);
    t.at_most("periodic-kpp: L-shift invariance", dev, 1e-8);
    t.record("periodic-kpp: min beta", beta.min(), 0.0, beta.min() > 0.0);
    Ok(())
}

/// Smallest achievable max cluster diameter with at most `k` clusters,
/// by exhaustive search over set partitions.
fn optimal_diameter(dist: &[f64], n: usize, k: usize) -> f64 {
    fn go(
        n: usize,
        k: usize,
        dist: &[f64],
        labels: &mut Vec<usize>,
        used: usize,
        cur: f64,
        best: &mut f64,
    ) {
        if cur >= *best {
            return;
        }
        let i = labels.len();
        if i == n {
            *best = cur;
            return;
        }
        for c in 0..(used + 1).min(k) {
            let mut d = cur;
            for j in 0..i {
                if labels[j] == c {
                    d = d.max(dist[i * n + j]);
                }
            }
            labels.push(c);
            go(n, k, dist, labels, used.max(c + 1), d, best);
            labels.pop();
        }
    }
    let mut best = f64::INFINITY;
    go(n, k, dist, &mut Vec::with_capacity(n), 0, 0.0, &mut best);
    best
}

fn proxy(t: &mut Table, seed: u64) -> nldisp_core::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37);
    let mut worst_ratio = 0.0f64;
    let mut monotone_breaks = 0usize;
    let ensembles = 100;
    for _ in 0..ensembles {
        let n = rng.random_range(2..=8usize);
        // points in the sup metric on R^3
        let pts: Vec<[f64; 3]> = (0..n)
            .map(|_| [rng.random(), rng.random(), rng.random()])
            .collect();
        let mut dist = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                dist[i * n + j] = (0..3)
                    .map(|c| (pts[i][c] - pts[j][c]).abs())
                    .fold(0.0, f64::max);
            }
        }
        let mut prev = f64::INFINITY;
        for k in 1..=n {
            let p = proxy_from_distances(&dist, n, k)?;
            let opt = optimal_diameter(&dist, n, k);
            if opt > 0.0 {
                worst_ratio = worst_ratio.max(p / opt);
            } else if p > 0.0 {
                worst_ratio = f64::INFINITY;
            }
            if p > prev {
                monotone_breaks += 1;
            }
            prev = p;
        }
    }
    t.at_most(
        &format!("{ensembles} ensembles: max proxy / optimum"),
        worst_ratio,
        2.0,
    );
    t.at_most(
        &format!("{ensembles} ensembles: monotonicity breaks in k"),
        monotone_breaks as f64,
        0.0,
    );
    Ok(())
}
