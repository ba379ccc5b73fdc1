//! Acceptance suite: one line per criterion, `PASS` or `FAIL` with the
//! measured quantity. Oracles are closed forms or brute force written here,
//! independent of the library's own checks.

use std::collections::BTreeMap;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use nldisp_core::compactness::{diameter_proxy, make_ensemble_on, Ensemble, EnsembleSpec};
use nldisp_core::{
    apply_linear, apply_linear_ode, check_order_preserving, contraction_diagnostic, evolve,
    linear_speed, make_kernel, observed_speed, split_compact_part, steady_state,
    verify_linear_ingredients, Cap, DiagnosticOptions, EvolveOptions, Extension, Grid,
    GridFunction, IngredientOptions, Kernel, Model, Profile, Reaction, Scheme, Window,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        passed,
        detail: detail.into(),
    }
}

fn gaussian(h: f64) -> Kernel {
    make_kernel(Profile::Gaussian { sigma: 1.0 }, 1e-12, h).unwrap()
}

fn uniform(h: f64) -> Kernel {
    make_kernel(Profile::Uniform { half_width: 1.0 }, 1e-12, h).unwrap()
}

fn triangle(h: f64) -> Kernel {
    make_kernel(
        Profile::Tabulated {
            xs: vec![-1.0, 0.0, 1.0],
            values: vec![0.0, 1.0, 0.0],
        },
        1e-12,
        h,
    )
    .unwrap()
}

fn sup_on(a: &GridFunction, b: &GridFunction, idx: std::ops::Range<usize>) -> f64 {
    idx.map(|i| (a.values()[i] - b.values()[i]).abs())
        .fold(0.0, f64::max)
}

/// Sum of three gaussian bumps, values in `[0, 1]`.
fn smooth(rng: &mut ChaCha8Rng, grid: Grid) -> GridFunction {
    let b: Vec<(f64, f64, f64)> = (0..3)
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
            b.iter()
                .map(|(c, w, a)| a * (-((x - c) / w).powi(2)).exp())
                .sum()
        },
        grid,
        Extension::Constant,
    )
    .unwrap()
}

fn logistic_model(kernel: Kernel, d: f64, r: f64, grid: Grid, ext: Extension) -> Model {
    Model::new(
        kernel,
        d,
        Reaction::logistic(r).unwrap(),
        Cap::Constant(r.max(1e-300)),
        grid,
        ext,
    )
    .unwrap()
}

fn series_vs_ode() -> Outcome {
    let start = Instant::now();
    let grid = Grid::with_step(-20.0, 20.0, 0.05).unwrap();
    let k = gaussian(0.05);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    for _ in 0..10 {
        let phi = smooth(&mut rng, grid);
        let a = apply_linear(&k, &phi, 1.0, 1e-12).unwrap();
        let b = apply_linear_ode(&k, &phi, 1.0, 0.01).unwrap();
        worst = worst.max(sup_on(&a, &b, 0..grid.len()));
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        worst <= 1e-6 && secs < 10.0,
        format!("max sup error {worst:.3e} over 10 data, {secs:.2} s"),
    )
}

/// Trapezoid moment of the normalized box on the lattice `h Z`, half weight
/// at the two jumps.
fn box_lattice_moment(mu: f64, h: f64) -> f64 {
    let m = (1.0 / h).round() as i64;
    let (mut num, mut den) = (0.0, 0.0);
    for q in -m..=m {
        let w = if q.abs() == m { 0.5 } else { 1.0 };
        num += w * (mu * q as f64 * h).exp();
        den += w;
    }
    num / den
}

fn eigenfunction_law() -> Outcome {
    let h = 0.05;
    let grid = Grid::with_step(-30.0, 30.0, h).unwrap();
    let idx = grid
        .window_indices(&Window::new(-10.0, 10.0).unwrap())
        .unwrap();
    let mut worst = 0.0f64;
    for (k, moment) in [
        (
            uniform(h),
            Box::new(move |mu: f64| box_lattice_moment(mu, h)) as Box<dyn Fn(f64) -> f64>,
        ),
        (gaussian(h), Box::new(|mu: f64| (mu * mu / 2.0).exp())),
    ] {
        for mu in [0.1, 0.3] {
            let phi = GridFunction::sample(|x| (mu * x).exp(), grid, Extension::Constant).unwrap();
            for t in [0.5, 1.0] {
                let out = apply_linear(&k, &phi, t, 1e-12).unwrap();
                let f = ((moment(mu) - 1.0) * t).exp();
                for i in idx.clone() {
                    let exact = f * (mu * grid.x(i)).exp();
                    worst = worst.max((out.values()[i] - exact).abs() / exact);
                }
            }
        }
    }
    outcome(
        worst <= 1e-6,
        format!("max relative error {worst:.3e} on [-10, 10]"),
    )
}

fn translates(grid: Grid) -> Ensemble {
    translates_below(grid, 1.0)
}

fn translates_below(grid: Grid, cap: f64) -> Ensemble {
    let spec = EnsembleSpec::Translates {
        amplitude: cap.min(1.0),
        width: 3.0,
        start: -3.0,
        spacing: 2.0,
    };
    make_ensemble_on(&spec, 4, grid, Extension::Constant, vec![cap; grid.len()]).unwrap()
}

fn ingredient_suite() -> Outcome {
    let start = Instant::now();
    let h = 0.05;
    let grid = Grid::with_step(-20.0, 20.0, h).unwrap();
    let window = Window::new(-8.0, 8.0).unwrap();
    let ens = translates(grid);
    let mut worst = f64::INFINITY;
    let mut ok = true;
    for (name, k) in [
        ("uniform", uniform(h)),
        ("gaussian", gaussian(h)),
        ("triangle", triangle(h)),
    ] {
        let opts = IngredientOptions {
            trials: 1000,
            seed: 7,
            ..IngredientOptions::default()
        };
        let rep = verify_linear_ingredients(&k, &ens, &window, 1.0, &opts).unwrap();
        for c in &rep.checks[..3] {
            ok &= c.trials >= 1000 && c.worst_slack >= -1e-8;
            worst = worst.min(c.worst_slack);
            if c.worst_slack < -1e-8 {
                eprintln!("  {name}: {} slack {:.3e}", c.name, c.worst_slack);
            }
        }
    }
    // the modulus itself against its closed form for the box: g(x) = |x|
    // for |x| < 2 (at |x| = 2 the lattice supports still share an endpoint)
    let u = uniform(h);
    let g_err = (1..40)
        .map(|q| (u.equicontinuity_modulus(q as f64 * h) - q as f64 * h).abs())
        .fold(0.0, f64::max);
    ok &= g_err <= 1e-12;
    let secs = start.elapsed().as_secs_f64();
    ok &= secs < 30.0;
    outcome(
        ok,
        format!("worst slack {worst:.3e}, box modulus error {g_err:.1e}, {secs:.2} s"),
    )
}

fn head_contraction() -> Outcome {
    let h = 0.05;
    let grid = Grid::with_step(-20.0, 20.0, h).unwrap();
    let idx = grid
        .window_indices(&Window::new(-8.0, 8.0).unwrap())
        .unwrap();
    let k = gaussian(h);
    let ens = translates(grid);
    let m = ens.members();
    let mut worst = 0.0f64;
    for t in [0.5, 1.0, 2.0] {
        let heads: Vec<GridFunction> = m
            .iter()
            .map(|p| split_compact_part(&k, p, t, 1e-12).unwrap().0)
            .collect();
        for i in 0..m.len() {
            for j in (i + 1)..m.len() {
                let d0 = sup_on(&m[i], &m[j], idx.clone());
                let d1 = sup_on(&heads[i], &heads[j], idx.clone());
                worst = worst.max((d1 - (-t).exp() * d0).abs());
            }
        }
    }
    outcome(worst <= 1e-12, format!("max deviation {worst:.3e}"))
}

/// Root of `tanh mu = mu / 2` on `(1, 3)`.
fn box_stationary_mu() -> f64 {
    let (mut lo, mut hi) = (1.0f64, 3.0f64);
    while hi - lo > 1e-15 {
        let mid = 0.5 * (lo + hi);
        if mid.tanh() > mid / 2.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

fn kpp_speeds() -> Outcome {
    let grid = Grid::with_step(-20.0, 20.0, 0.05).unwrap();
    let g = linear_speed(
        &logistic_model(gaussian(0.05), 1.0, 1.0, grid, Extension::Constant),
        0.2,
        3.0,
        1e-9,
    )
    .unwrap();
    let u = linear_speed(
        &logistic_model(uniform(0.001), 1.0, 1.0, grid, Extension::Constant),
        0.5,
        4.0,
        1e-9,
    )
    .unwrap();
    let mu = box_stationary_mu();
    let c = mu.sinh() / (mu * mu);
    let e = [
        (g.mu_star - 1.0).abs(),
        (g.c_star - 0.5f64.exp()).abs(),
        (u.mu_star - mu).abs(),
        (u.c_star - c).abs(),
    ];
    let ok = e[0] <= 1e-6 && e[1] <= 1e-6 && e[2] <= 1e-3 && e[3] <= 1e-3;
    outcome(
        ok,
        format!(
            "gaussian mu* {:.9} c* {:.9}; box mu* {:.6} (root {mu:.6}) c* {:.6} (oracle {c:.6})",
            g.mu_star, g.c_star, u.mu_star, u.c_star
        ),
    )
}

fn linear_determinacy() -> Outcome {
    let start = Instant::now();
    let grid = Grid::with_step(-150.0, 150.0, 0.1).unwrap();
    let m = logistic_model(gaussian(0.1), 1.0, 1.0, grid, Extension::Constant);
    let phi = m
        .sample(|x| if x.abs() <= 5.0 { 0.5 } else { 0.0 })
        .unwrap();
    let opts = EvolveOptions::new(60.0, 0.01, Scheme::VocExponentialEuler).every(1.0);
    let traj = evolve(&m, &phi, &opts).unwrap();
    let rep = observed_speed(&traj, 0.5, (30.0, 60.0), (0.2, 3.0)).unwrap();
    let gap = (rep.c_observed - 0.5f64.exp()).abs() / 0.5f64.exp();
    let secs = start.elapsed().as_secs_f64();
    outcome(
        gap <= 0.05 && secs < 60.0,
        format!(
            "c_observed {:.4} vs e^(1/2), gap {:.2}%, {secs:.1} s",
            rep.c_observed,
            100.0 * gap
        ),
    )
}

fn factor_plumbing() -> Outcome {
    let grid = Grid::with_step(-20.0, 20.0, 0.05).unwrap();
    let window = Window::new(-8.0, 8.0).unwrap();
    let ens = translates(grid);
    let times = [0.0, 1.0, 2.0];
    let opts = DiagnosticOptions::default();
    let mut worst = 0.0f64;
    let mut ok = true;
    // u (r - u) has k_f = r on [0, r]
    for kf in [0.0, 0.5, 1.0, 2.0] {
        let (reaction, cap) = if kf == 0.0 {
            (Reaction::zero(), 1.0)
        } else {
            (Reaction::logistic(kf).unwrap(), kf)
        };
        let m = Model::new(
            gaussian(0.05),
            1.0,
            reaction,
            Cap::Constant(cap),
            grid,
            Extension::Constant,
        )
        .unwrap();
        let ens = translates_below(grid, cap);
        let rep = contraction_diagnostic(&m, &ens, &window, &times, &opts).unwrap();
        ok &= rep.k_f == kf;
        for (t, f) in times.iter().zip(&rep.theoretical_factor) {
            worst = worst.max((f - ((kf - 1.0) * t).exp()).abs());
        }
    }
    let mut flags = Vec::new();
    for (d, expect) in [(2.0, true), (0.5, false)] {
        let m = logistic_model(gaussian(0.05), d, 1.0, grid, Extension::Constant);
        let rep = contraction_diagnostic(&m, &ens, &window, &times, &opts).unwrap();
        ok &= rep.dispersal_dominates == expect;
        flags.push(format!("D = {d}: {}", rep.dispersal_dominates));
    }
    outcome(
        ok && worst <= 1e-12,
        format!("max factor error {worst:.1e}; flag {}", flags.join(", ")),
    )
}

fn comparison_principle() -> Outcome {
    let grid = Grid::with_step(-20.0, 20.0, 0.05).unwrap();
    let m = logistic_model(gaussian(0.05), 1.0, 1.0, grid, Extension::Constant);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst = 0.0f64;
    for _ in 0..5 {
        let psi = smooth(&mut rng, grid);
        let dip = smooth(&mut rng, grid);
        let phi = GridFunction::new(
            grid,
            psi.values()
                .iter()
                .zip(dip.values())
                .map(|(p, d)| (p - d).max(0.0))
                .collect(),
            Extension::Constant,
        )
        .unwrap();
        let r =
            check_order_preserving(&m, &phi, &psi, 1.0, 0.01, Scheme::VocExponentialEuler).unwrap();
        worst = worst.max(r.max_violation);
    }
    outcome(
        worst < 1e-8,
        format!("max violation {worst:.3e} over 5 pairs"),
    )
}

fn steady_states() -> Outcome {
    let grid = Grid::periodic(0.0, 16.0, 320).unwrap();
    let mut parts = Vec::new();
    let mut ok = true;
    for r in [1.0, 2.0] {
        let m = logistic_model(gaussian(0.05), 1.0, r, grid, Extension::Periodic);
        let beta = steady_state(&m, &m.sample(|_| 0.5).unwrap(), 1e-8, 500.0).unwrap();
        let res = m.residual(&beta).unwrap();
        let dev = beta
            .values()
            .iter()
            .map(|v| (v - r).abs())
            .fold(0.0, f64::max);
        ok &= res <= 1e-8 && dev <= 1e-7;
        parts.push(format!("r = {r}: residual {res:.1e}, |beta - r| {dev:.1e}"));
    }
    let reaction = Reaction::periodic_kpp(1.0, 0.5, 2.0).unwrap();
    let m = Model::new(
        gaussian(0.05),
        1.0,
        reaction,
        Cap::Constant(1.5),
        grid,
        Extension::Periodic,
    )
    .unwrap();
    let beta = steady_state(&m, &m.sample(|_| 0.5).unwrap(), 1e-8, 500.0).unwrap();
    let res = m.residual(&beta).unwrap();
    let v = beta.values();
    let s = 40; // L / h
    let shift = (0..v.len())
        .map(|i| (v[i] - v[(i + s) % v.len()]).abs())
        .fold(0.0, f64::max);
    ok &= res < 1e-6 && shift < 1e-8 && beta.min() > 0.0;
    parts.push(format!("periodic: residual {res:.1e}, shift {shift:.1e}"));
    outcome(ok, parts.join("; "))
}

/// Optimal max cluster diameter with at most `k` clusters, over all set
/// partitions.
fn brute_force(d: &[Vec<f64>], k: usize) -> f64 {
    fn rec(i: usize, d: &[Vec<f64>], k: usize, labels: &mut Vec<usize>, cur: f64, best: &mut f64) {
        if cur >= *best {
            return;
        }
        if i == d.len() {
            *best = cur;
            return;
        }
        let used = labels.iter().max().map_or(0, |m| m + 1);
        for c in 0..(used + 1).min(k) {
            let mut next = cur;
            for (j, &l) in labels.iter().enumerate() {
                if l == c {
                    next = next.max(d[i][j]);
                }
            }
            labels.push(c);
            rec(i + 1, d, k, labels, next, best);
            labels.pop();
        }
    }
    let mut best = f64::INFINITY;
    rec(0, d, k, &mut Vec::new(), 0.0, &mut best);
    best
}

fn proxy_correctness() -> Outcome {
    let grid = Grid::with_step(-10.0, 10.0, 0.1).unwrap();
    let window = Window::new(-5.0, 5.0).unwrap();
    let idx = grid.window_indices(&window).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut worst_ratio, mut breaks) = (0.0f64, 0usize);
    for e in 0..100u64 {
        let n = rng.random_range(2..=8usize);
        let spec = EnsembleSpec::RandomFourier {
            modes: 4,
            seed: 1000 + e,
        };
        let ens =
            make_ensemble_on(&spec, n, grid, Extension::Constant, vec![1.0; grid.len()]).unwrap();
        let m = ens.members();
        let d: Vec<Vec<f64>> = (0..n)
            .map(|i| (0..n).map(|j| sup_on(&m[i], &m[j], idx.clone())).collect())
            .collect();
        let mut prev = f64::INFINITY;
        for k in 1..=n {
            let p = diameter_proxy(&ens, &window, k).unwrap();
            let opt = brute_force(&d, k);
            let ratio = if opt > 0.0 {
                p / opt
            } else if p > 0.0 {
                f64::INFINITY
            } else {
                1.0
            };
            worst_ratio = worst_ratio.max(ratio);
            breaks += usize::from(p > prev);
            prev = p;
        }
    }
    outcome(
        worst_ratio <= 2.0 && breaks == 0,
        format!("max proxy/optimum {worst_ratio:.3}, monotonicity breaks {breaks}"),
    )
}

fn csv_files(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .map(|p| {
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                std::fs::read(&p).unwrap(),
            )
        })
        .collect()
}

fn reproducibility() -> Outcome {
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for d in &dirs {
        let status = Command::new(env!("CARGO_BIN_EXE_nldisp"))
            .args(["selfcheck", "--seed", "42", "--out"])
            .arg(d.path())
            .status()
            .unwrap();
        if !status.success() {
            return outcome(false, format!("selfcheck exited with {status}"));
        }
    }
    let (a, b) = (csv_files(dirs[0].path()), csv_files(dirs[1].path()));
    let scenarios = a.keys().filter(|k| k.starts_with("selfcheck_")).count();
    outcome(
        a == b && scenarios >= 9,
        format!(
            "{} CSV files ({scenarios} scenarios) byte-identical: {}",
            a.len(),
            a == b
        ),
    )
}

type Criterion = (&'static str, fn() -> Outcome);

#[test]
fn acceptance() {
    let criteria: [Criterion; 11] = [
        ("series vs ODE oracle", series_vs_ode),
        ("semigroup eigenfunction law", eigenfunction_law),
        ("linear ingredient suite", ingredient_suite),
        ("linear head contraction", head_contraction),
        ("KPP linear speeds", kpp_speeds),
        ("linear determinacy", linear_determinacy),
        ("theoretical factor and flag", factor_plumbing),
        ("comparison principle", comparison_principle),
        ("steady states", steady_states),
        ("k-center proxy", proxy_correctness),
        ("selfcheck reproducibility", reproducibility),
    ];
    let mut failed = Vec::new();
    let total = Instant::now();
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let o = f();
        let verdict = if o.passed { "PASS" } else { "FAIL" };
        println!(
            "[{verdict}] {:>2}. {name}: {} ({:.1} s)",
            i + 1,
            o.detail,
            start.elapsed().as_secs_f64()
        );
        if !o.passed {
            failed.push(i + 1);
        }
    }
    println!(
        "{} of {} criteria passed in {:.1?}",
        criteria.len() - failed.len(),
        criteria.len(),
        total.elapsed()
    );
    assert!(total.elapsed() < Duration::from_secs(600));
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
