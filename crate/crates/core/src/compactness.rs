//! Quantitative ingredients of the alpha-contraction argument, checked
//! pointwise, and a finite-sample proxy for the Kuratowski measure.
//!
//! The measure of noncompactness of a finite set is zero, so nothing here
//! computes it. [`verify_linear_ingredients`] evaluates the inequalities the
//! argument rests on at random points. [`diameter_proxy`] is a k-center
//! clustering value that only illustrates how spread an ensemble is.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::evolve::{evolve, EvolveOptions, Scheme, DEFAULT_SERIES_TOLERANCE, RANGE_TOLERANCE};
use crate::gridfn::{sup_distance_slices, Convolver, Extension, Grid, GridFunction, Window};
use crate::reaction::Model;
use crate::semigroup::{plan_series, series_terms_with, split_compact_part_with};

/// How an ensemble was generated.
#[derive(Debug, Clone, PartialEq)]
pub enum EnsembleSpec {
    /// `amplitude * cos^2(pi (x - s_i) / (2 width))` on `|x - s_i| < width`,
    /// with shifts `s_i = start + i * spacing`.
    Translates {
        amplitude: f64,
        width: f64,
        start: f64,
        spacing: f64,
    },
    /// `cap(x) (1/2 + 0.45 s(x))` with `s` a random trigonometric sum,
    /// `|s| <= 1`, of `modes` modes over the domain length.
    RandomFourier { modes: usize, seed: u64 },
    /// Caller-supplied members.
    User(Vec<GridFunction>),
}

impl EnsembleSpec {
    pub fn tag(&self) -> &'static str {
        match self {
            EnsembleSpec::Translates { .. } => "translates",
            EnsembleSpec::RandomFourier { .. } => "random-fourier",
            EnsembleSpec::User(_) => "user",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    members: Vec<GridFunction>,
    generator: &'static str,
    cap: Vec<f64>,
}

/// `cos^2` bump of half-width `width` centered at 0.
pub fn bump(x: f64, amplitude: f64, width: f64) -> f64 {
    if x.abs() < width {
        amplitude * (std::f64::consts::FRAC_PI_2 * x / width).cos().powi(2)
    } else {
        0.0
    }
}

/// Build `n` members on the model's grid, each checked against `[0, cap]`.
pub fn make_ensemble(spec: &EnsembleSpec, n: usize, model: &Model) -> Result<Ensemble> {
    make_ensemble_on(
        spec,
        n,
        *model.grid(),
        model.extension(),
        model.cap_values().to_vec(),
    )
}

/// Same as [`make_ensemble`] with an explicit grid and cap.
pub fn make_ensemble_on(
    spec: &EnsembleSpec,
    n: usize,
    grid: Grid,
    extension: Extension,
    cap: Vec<f64>,
) -> Result<Ensemble> {
    if n < 2 {
        return Err(Error::InvalidParameter {
            name: "N",
            reason: format!("need at least 2 members, got {n}"),
        });
    }
    if cap.len() != grid.len() {
        return Err(Error::GridMismatch(format!(
            "cap has {} values for {} points",
            cap.len(),
            grid.len()
        )));
    }
    let members = match spec {
        EnsembleSpec::Translates {
            amplitude,
            width,
            start,
            spacing,
        } => {
            if !(*width > 0.0) {
                return Err(Error::InvalidParameter {
                    name: "width",
                    reason: format!("must be > 0, got {width}"),
                });
            }
            (0..n)
                .map(|i| {
                    let s = start + i as f64 * spacing;
                    GridFunction::sample(|x| bump(x - s, *amplitude, *width), grid, extension)
                })
                .collect::<Result<Vec<_>>>()?
        }
        EnsembleSpec::RandomFourier { modes, seed } => {
            if *modes == 0 {
                return Err(Error::InvalidParameter {
                    name: "modes",
                    reason: "must be >= 1".into(),
                });
            }
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            let omega = std::f64::consts::TAU / (grid.x_max() - grid.x_min() + grid.h());
            (0..n)
                .map(|_| {
                    let coeffs: Vec<(f64, f64)> = (1..=*modes)
                        .map(|k| {
                            let decay = 1.0 / (k * k) as f64;
                            (
                                decay * rng.random_range(-1.0..1.0),
                                decay * rng.random_range(-1.0..1.0),
                            )
                        })
                        .collect();
                    let norm: f64 = coeffs
                        .iter()
                        .map(|(a, b)| a.abs() + b.abs())
                        .sum::<f64>()
                        .max(1e-300);
                    let values = grid
                        .points()
                        .zip(&cap)
                        .map(|(x, c)| {
                            let s: f64 = coeffs
                                .iter()
                                .enumerate()
                                .map(|(k, (a, b))| {
                                    let arg = (k + 1) as f64 * omega * (x - grid.x_min());
                                    a * arg.cos() + b * arg.sin()
                                })
                                .sum();
                            c * (0.5 + 0.45 * s / norm)
                        })
                        .collect();
                    GridFunction::new(grid, values, extension)
                })
                .collect::<Result<Vec<_>>>()?
        }
        EnsembleSpec::User(list) => {
            if list.len() != n {
                return Err(Error::InvalidParameter {
                    name: "N",
                    reason: format!("{} user members supplied, expected {n}", list.len()),
                });
            }
            for m in list {
                if !m.grid().same_as(&grid) || m.extension() != extension {
                    return Err(Error::GridMismatch(
                        "user member on a different grid".into(),
                    ));
                }
            }
            list.clone()
        }
    };
    for (index, m) in members.iter().enumerate() {
        let inside = m
            .values()
            .iter()
            .zip(&cap)
            .all(|(v, c)| *v >= 0.0 && *v <= c * (1.0 + 1e-12));
        if !inside {
            return Err(Error::MemberOutOfRange { index });
        }
    }
    Ok(Ensemble {
        members,
        generator: spec.tag(),
        cap,
    })
}

impl Ensemble {
    pub fn members(&self) -> &[GridFunction] {
        &self.members
    }

    pub fn generator(&self) -> &'static str {
        self.generator
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn grid(&self) -> &Grid {
        self.members[0].grid()
    }

    /// `b = sup cap`.
    pub fn cap_sup(&self) -> f64 {
        self.cap.iter().fold(0.0f64, |m, c| m.max(*c))
    }

    fn with_members(&self, members: Vec<GridFunction>) -> Ensemble {
        Ensemble {
            members,
            generator: self.generator,
            cap: self.cap.clone(),
        }
    }
}

/// Pairwise sup-distances on `window`, row-major `N x N`.
pub fn distance_matrix(members: &[GridFunction], window: &Window) -> Result<Vec<f64>> {
    let n = members.len();
    let grid = members
        .first()
        .map(|m| *m.grid())
        .ok_or(Error::Precondition("empty ensemble".into()))?;
    for m in members {
        if !m.grid().same_as(&grid) {
            return Err(Error::GridMismatch(
                "ensemble members on different grids".into(),
            ));
        }
    }
    let range = grid.window_indices(window)?;
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let a = &members[i].values()[range.clone()];
            (0..n)
                .map(|j| sup_distance_slices(a, &members[j].values()[range.clone()]))
                .collect()
        })
        .collect();
    Ok(rows.concat())
}

/// Farthest-point clustering with `k` centers seeded at member 0; returns
/// the largest cluster diameter.
fn farthest_point_diameter(dist: &[f64], n: usize, k: usize) -> f64 {
    let mut centers = vec![0usize];
    let mut nearest: Vec<f64> = (0..n).map(|i| dist[i * n]).collect();
    let mut owner = vec![0usize; n];
    while centers.len() < k {
        let next = (0..n).fold(0, |b, i| if nearest[i] > nearest[b] { i } else { b });
        let c = centers.len();
        centers.push(next);
        for i in 0..n {
            if dist[i * n + next] < nearest[i] {
                nearest[i] = dist[i * n + next];
                owner[i] = c;
            }
        }
    }
    let mut diameter = 0.0f64;
    for i in 0..n {
        for j in (i + 1)..n {
            if owner[i] == owner[j] {
                diameter = diameter.max(dist[i * n + j]);
            }
        }
    }
    diameter
}

/// k-center diameter proxy on `window`: the smallest farthest-point
/// clustering diameter over `1..=k` centers.
///
/// Each farthest-point value is at most twice the optimal min-max diameter
/// for its `j`, and the optimum is nonincreasing in `j`, so the running
/// minimum keeps the factor-two guarantee and is monotone in `k`.
pub fn diameter_proxy(ensemble: &Ensemble, window: &Window, k: usize) -> Result<f64> {
    let dist = distance_matrix(ensemble.members(), window)?;
    proxy_from_distances(&dist, ensemble.len(), k)
}

/// [`diameter_proxy`] on a precomputed `n x n` distance matrix.
pub fn proxy_from_distances(dist: &[f64], n: usize, k: usize) -> Result<f64> {
    if k == 0 || k > n {
        return Err(Error::OutOfRange {
            what: "k",
            value: k as f64,
            range: format!("[1, {n}]"),
        });
    }
    if dist.len() != n * n {
        return Err(Error::Precondition(format!(
            "distance matrix has {} entries, expected {}",
            dist.len(),
            n * n
        )));
    }
    Ok((1..=k)
        .map(|j| farthest_point_diameter(dist, n, j))
        .fold(f64::INFINITY, f64::min))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheckKind {
    /// Holds when the worst slack is at least `-tolerance`.
    Inequality,
    /// Holds when the worst deviation is at most `tolerance`.
    Equality,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckRecord {
    pub name: String,
    pub kind: CheckKind,
    pub trials: usize,
    /// For inequalities, `(rhs - lhs) / b` minimized over trials; for
    /// equalities, minus the largest deviation.
    pub worst_slack: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl CheckRecord {
    fn inequality(name: impl Into<String>, trials: usize, worst_slack: f64) -> Self {
        let tolerance = INEQUALITY_TOLERANCE;
        CheckRecord {
            name: name.into(),
            kind: CheckKind::Inequality,
            trials,
            worst_slack,
            tolerance,
            passed: worst_slack >= -tolerance,
        }
    }

    fn equality(name: impl Into<String>, trials: usize, deviation: f64, tolerance: f64) -> Self {
        CheckRecord {
            name: name.into(),
            kind: CheckKind::Equality,
            trials,
            worst_slack: -deviation,
            tolerance,
            passed: deviation <= tolerance,
        }
    }
}

pub const INEQUALITY_TOLERANCE: f64 = 1e-8;
pub const HEAD_FACTOR_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct IngredientOptions {
    pub trials: usize,
    pub seed: u64,
    /// Multiplier on `g` in the modulus bounds; `1` is the proven bound,
    /// smaller values probe tightness.
    pub modulus_scale: f64,
    pub series_tolerance: f64,
}

impl Default for IngredientOptions {
    fn default() -> Self {
        IngredientOptions {
            trials: 1000,
            seed: 0,
            modulus_scale: 1.0,
            series_tolerance: 1e-12,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IngredientReport {
    pub t: f64,
    pub b: f64,
    pub order: usize,
    pub checks: Vec<CheckRecord>,
}

impl IngredientReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

/// Random evaluation of the linear-flow inequalities for `J` on `ensemble`:
/// `a_k <= b`, `|a_k(x1) - a_k(x2)| <= b g(x1 - x2)` for `k >= 1`, the same
/// modulus for `T_2(t)`, and `dist(T_1 phi, T_1 psi) = e^{-t} dist(phi, psi)`.
pub fn verify_linear_ingredients(
    kernel: &crate::kernel::Kernel,
    ensemble: &Ensemble,
    window: &Window,
    t: f64,
    options: &IngredientOptions,
) -> Result<IngredientReport> {
    let members = ensemble.members();
    let grid = *ensemble.grid();
    let conv = Convolver::new(kernel, grid, members[0].extension())?;
    let range = grid.window_indices(window)?;
    let b = ensemble.cap_sup();
    let order = plan_series(t, options.series_tolerance, b)?.order.max(1);
    let lattice = conv.kernel();
    let g = |d: i64| lattice.equicontinuity_modulus(d as f64 * grid.h());

    let per_member: Vec<(Vec<GridFunction>, GridFunction)> = members
        .par_iter()
        .map(|m| {
            let terms = series_terms_with(&conv, m, order)?;
            let (_, tail) = split_compact_part_with(&conv, m, t, options.series_tolerance)?;
            Ok((terms, tail))
        })
        .collect::<Result<_>>()?;

    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let trials = options.trials;
    let (lo, hi) = (range.start, range.end);
    let scale = options.modulus_scale;
    let (mut bound_slack, mut terms_slack, mut tail_slack) =
        (f64::INFINITY, f64::INFINITY, f64::INFINITY);
    for _ in 0..trials {
        let m = rng.random_range(0..members.len());
        let i1 = rng.random_range(lo..hi);
        let i2 = rng.random_range(lo..hi);
        let k = rng.random_range(1..=order);
        let (terms, tail) = &per_member[m];
        let a = terms[k].values();
        let gd = g(i1 as i64 - i2 as i64);
        bound_slack = bound_slack.min((b - a[i1]) / b);
        terms_slack = terms_slack.min((b * scale * gd - (a[i1] - a[i2]).abs()) / b);
        let r = tail.values();
        tail_slack = tail_slack.min((b * scale * gd - (r[i1] - r[i2]).abs()) / b);
    }

    let decay = (-t).exp();
    let mut head_dev = 0.0f64;
    let mut pairs = 0;
    for i in 0..members.len() {
        for j in (i + 1)..members.len() {
            let p = &members[i].values()[range.clone()];
            let q = &members[j].values()[range.clone()];
            let hp: Vec<f64> = p.iter().map(|v| decay * v).collect();
            let hq: Vec<f64> = q.iter().map(|v| decay * v).collect();
            let d = sup_distance_slices(p, q);
            let dh = sup_distance_slices(&hp, &hq);
            head_dev = head_dev.max((dh - decay * d).abs() / d.max(1.0));
            pairs += 1;
        }
    }

    let checks = vec![
        CheckRecord::inequality("a_k <= b", trials, bound_slack),
        CheckRecord::inequality("|a_k(x1) - a_k(x2)| <= b g(x1 - x2)", trials, terms_slack),
        CheckRecord::inequality(
            "|T2 phi(x1) - T2 phi(x2)| <= b g(x1 - x2)",
            trials,
            tail_slack,
        ),
        CheckRecord::equality(
            "dist(T1 phi, T1 psi) = e^{-t} dist(phi, psi)",
            pairs,
            head_dev,
            HEAD_FACTOR_TOLERANCE,
        ),
    ];
    Ok(IngredientReport {
        t,
        b,
        order,
        checks,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticOptions {
    pub k_clusters: usize,
    /// Defaults to the model's `min(0.01, 0.1 / k_f)`.
    pub dt: Option<f64>,
    pub scheme: Scheme,
    pub series_tolerance: f64,
    /// Random `(member pair, x)` samples for the Lipschitz certificate per time.
    pub lipschitz_samples: usize,
    pub seed: u64,
}

impl Default for DiagnosticOptions {
    fn default() -> Self {
        DiagnosticOptions {
            k_clusters: 2,
            dt: None,
            scheme: Scheme::VocExponentialEuler,
            series_tolerance: DEFAULT_SERIES_TOLERANCE,
            lipschitz_samples: 1000,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticsReport {
    pub window: Window,
    pub times: Vec<f64>,
    pub proxy_diameters: Vec<f64>,
    /// `e^{(k_f - D) t}`.
    pub theoretical_factor: Vec<f64>,
    /// `proxy(t) / proxy(0)` when the initial proxy is positive.
    pub observed_ratio: Vec<Option<f64>>,
    /// Whether every exact check at that time passed.
    pub ingredients_pass: Vec<bool>,
    pub ingredient_checks: Vec<CheckRecord>,
    pub k_clusters: usize,
    pub k_f: f64,
    pub dispersal: f64,
    /// `D > k_f`: the factor decays.
    pub dispersal_dominates: bool,
}

impl DiagnosticsReport {
    pub fn passed(&self) -> bool {
        self.ingredient_checks.iter().all(|c| c.passed)
    }
}

/// `e^{(k_f - D) t}`.
pub fn theoretical_factor(k_f: f64, dispersal: f64, t: f64) -> f64 {
    ((k_f - dispersal) * t).exp()
}

/// Evolve every member, track the proxy over `times`, and run the exact
/// checks along the way: the Lipschitz certificate on the states reached,
/// the invariant range, and the `e^{-D t}` head factor.
pub fn contraction_diagnostic(
    model: &Model,
    ensemble: &Ensemble,
    window: &Window,
    times: &[f64],
    options: &DiagnosticOptions,
) -> Result<DiagnosticsReport> {
    if times.first() != Some(&0.0) || times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Precondition(
            "times must start at 0 and increase".into(),
        ));
    }
    let n = ensemble.len();
    if options.k_clusters == 0 || options.k_clusters > n {
        return Err(Error::OutOfRange {
            what: "k",
            value: options.k_clusters as f64,
            range: format!("[1, {n}]"),
        });
    }
    for m in ensemble.members() {
        model.check(m)?;
    }
    let grid = *model.grid();
    let range = grid.window_indices(window)?;
    let dt = options.dt.unwrap_or_else(|| model.default_dt());
    let horizon = *times.last().expect("nonempty");
    let evolve_opts = EvolveOptions {
        horizon,
        dt,
        scheme: options.scheme,
        series_tolerance: options.series_tolerance,
        snapshot_times: times.to_vec(),
    };

    // states[member][time]
    let states: Vec<Vec<GridFunction>> = ensemble
        .members()
        .par_iter()
        .map(|m| {
            if horizon == 0.0 {
                return Ok(vec![m.clone()]);
            }
            let tr = evolve(model, m, &evolve_opts)?;
            let mut picked = Vec::with_capacity(times.len());
            let mut it = tr.times().iter().zip(tr.states()).peekable();
            for &t in times {
                while let Some((s, _)) = it.peek() {
                    if (**s - t).abs() <= 1e-9 * horizon.max(1.0) {
                        break;
                    }
                    it.next();
                }
                let (_, state) = it
                    .next()
                    .ok_or(Error::Precondition(format!("no snapshot at t = {t}")))?;
                picked.push(state.clone());
            }
            Ok(picked)
        })
        .collect::<Result<_>>()?;

    let k_f = model.lipschitz();
    let d = model.dispersal();
    let caps = model.cap_values();
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let mut proxies = Vec::with_capacity(times.len());
    let mut passes = Vec::with_capacity(times.len());
    let (mut lip_slack, mut range_slack, mut head_dev) = (f64::INFINITY, f64::INFINITY, 0.0f64);
    for (ti, &t) in times.iter().enumerate() {
        let at_t: Vec<GridFunction> = states.iter().map(|s| s[ti].clone()).collect();
        let snapshot = ensemble.with_members(at_t);
        proxies.push(diameter_proxy(&snapshot, window, options.k_clusters)?);

        let mut ok = true;
        let mut worst_range = f64::INFINITY;
        for m in snapshot.members() {
            for (v, c) in m.values().iter().zip(caps) {
                worst_range = worst_range
                    .min((v + RANGE_TOLERANCE * c) / c)
                    .min((c * (1.0 + RANGE_TOLERANCE) - v) / c);
            }
        }
        range_slack = range_slack.min(worst_range);
        ok &= worst_range >= 0.0;

        let mut worst_lip = f64::INFINITY;
        for _ in 0..options.lipschitz_samples {
            let a = rng.random_range(0..n);
            let b = rng.random_range(0..n);
            let i = rng.random_range(range.clone());
            let x = grid.x(i);
            let u1 = snapshot.members()[a].values()[i].clamp(0.0, caps[i]);
            let u2 = snapshot.members()[b].values()[i].clamp(0.0, caps[i]);
            let lhs = (model.reaction().value(x, u1) - model.reaction().value(x, u2)).abs();
            let rhs = (k_f + INEQUALITY_TOLERANCE) * (u1 - u2).abs();
            worst_lip = worst_lip.min((rhs - lhs) / caps[i]);
        }
        lip_slack = lip_slack.min(worst_lip);
        ok &= worst_lip >= -INEQUALITY_TOLERANCE;

        let decay = (-d * t).exp();
        let mut dev = 0.0f64;
        let members = ensemble.members();
        for i in 0..n {
            for j in (i + 1)..n {
                let p = &members[i].values()[range.clone()];
                let q = &members[j].values()[range.clone()];
                let hp: Vec<f64> = p.iter().map(|v| decay * v).collect();
                let hq: Vec<f64> = q.iter().map(|v| decay * v).collect();
                let dist = sup_distance_slices(p, q);
                dev = dev.max((sup_distance_slices(&hp, &hq) - decay * dist).abs() / dist.max(1.0));
            }
        }
        head_dev = head_dev.max(dev);
        ok &= dev <= HEAD_FACTOR_TOLERANCE;
        passes.push(ok);
    }

    let observed_ratio = proxies
        .iter()
        .map(|p| {
            if proxies[0] > 0.0 {
                Some(p / proxies[0])
            } else {
                None
            }
        })
        .collect();
    let per_time = options.lipschitz_samples * times.len();
    let ingredient_checks = vec![
        CheckRecord::inequality(
            "|f(x,u1) - f(x,u2)| <= k_f |u1 - u2| along trajectories",
            per_time,
            lip_slack,
        ),
        CheckRecord::inequality("states within [0, cap]", times.len() * n, range_slack),
        CheckRecord::equality(
            "dist(T1 phi, T1 psi) = e^{-Dt} dist(phi, psi)",
            times.len() * n * (n - 1) / 2,
            head_dev,
            HEAD_FACTOR_TOLERANCE,
        ),
    ];
    Ok(DiagnosticsReport {
        window: *window,
        times: times.to_vec(),
        proxy_diameters: proxies,
        theoretical_factor: times
            .iter()
            .map(|&t| theoretical_factor(k_f, d, t))
            .collect(),
        observed_ratio,
        ingredients_pass: passes,
        ingredient_checks,
        k_clusters: options.k_clusters,
        k_f,
        dispersal: d,
        dispersal_dominates: d > k_f,
    })
}
