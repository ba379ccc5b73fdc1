use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use nldisp_core::compactness::{bump, make_ensemble, EnsembleSpec};
use nldisp_core::speed::{dispersion_rate, fit_front_speed};
use nldisp_core::{
    contraction_diagnostic, evolve, linear_speed, steady_state, verify_linear_ingredients, Cap,
    DiagnosticOptions, EvolveOptions, GridFunction, IngredientOptions, Model, SpeedReport,
};

use crate::config::{EnsembleChoice, InitialShape, ScenarioConfig, ValidationErrors};
use crate::manifest::{file_entry, ManifestError, PhaseTiming, RunManifest};
use crate::output::{self, fmt_f64, Csv};
use crate::{selfcheck, svg};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subcommand {
    Simulate,
    Speed,
    Steady,
    Diagnose,
    Selfcheck,
}

impl Subcommand {
    pub fn name(&self) -> &'static str {
        match self {
            Subcommand::Simulate => "simulate",
            Subcommand::Speed => "speed",
            Subcommand::Steady => "steady",
            Subcommand::Diagnose => "diagnose",
            Subcommand::Selfcheck => "selfcheck",
        }
    }
}

impl FromStr for Subcommand {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Ok(match s {
            "simulate" => Subcommand::Simulate,
            "speed" => Subcommand::Speed,
            "steady" => Subcommand::Steady,
            "diagnose" => Subcommand::Diagnose,
            "selfcheck" => Subcommand::Selfcheck,
            _ => return Err(format!("unknown subcommand `{s}`")),
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunOptions {
    pub seed: u64,
    pub threads: Option<usize>,
    /// Emit SVG plots next to the CSVs (also enabled by `[output] svg`).
    pub svg: bool,
}

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("invalid configuration:\n{0}")]
    Validation(#[from] ValidationErrors),
    #[error("numerical failure in phase `{phase}`: {source}")]
    Numerical {
        phase: String,
        source: nldisp_core::Error,
    },
    #[error("check failure in phase `{phase}`: {message}")]
    Check { phase: String, message: String },
    #[error("output failure: {0}")]
    Output(String),
}

impl From<ManifestError> for RunError {
    fn from(e: ManifestError) -> Self {
        RunError::Output(e.to_string())
    }
}

impl RunError {
    /// 2 for configuration problems, 3 for numerical or check failures,
    /// 1 for I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Validation(_) => 2,
            RunError::Numerical { .. } | RunError::Check { .. } => 3,
            RunError::Output(_) => 1,
        }
    }

    fn phase(&self) -> Option<String> {
        match self {
            RunError::Numerical { phase, .. } | RunError::Check { phase, .. } => {
                Some(phase.clone())
            }
            RunError::Validation(_) => Some("validate".into()),
            RunError::Output(_) => Some("output".into()),
        }
    }
}

/// Tracks phases and written files of one run.
pub struct Session {
    dir: PathBuf,
    timings: Vec<PhaseTiming>,
    files: Vec<String>,
    svg: bool,
}

impl Session {
    pub fn phase<T>(
        &mut self,
        name: &str,
        f: impl FnOnce() -> nldisp_core::Result<T>,
    ) -> Result<T, RunError> {
        let start = Instant::now();
        log::info!("phase {name}");
        let out = f().map_err(|source| RunError::Numerical {
            phase: name.into(),
            source,
        });
        self.timings.push(PhaseTiming {
            phase: name.into(),
            seconds: start.elapsed().as_secs_f64(),
        });
        out
    }

    pub fn write_text(&mut self, name: &str, text: &str) -> Result<(), RunError> {
        let path = self.dir.join(name);
        fs::write(&path, text).map_err(|e| RunError::Output(format!("{}: {e}", path.display())))?;
        if !self.files.iter().any(|f| f == name) {
            self.files.push(name.to_string());
        }
        Ok(())
    }

    pub fn write_csv(&mut self, name: &str, csv: &Csv) -> Result<(), RunError> {
        self.write_text(name, csv.as_str())
    }

    fn write_svg(&mut self, name: &str, doc: Option<String>) -> Result<(), RunError> {
        match doc {
            Some(d) if self.svg => self.write_text(name, &d),
            _ => Ok(()),
        }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }
}

/// Run `sub` on a validated scenario, writing artifacts and the manifest to
/// `out_dir`. The manifest is written last, also on failure (then marked
/// incomplete).
pub fn run(
    sub: Subcommand,
    config: &ScenarioConfig,
    out_dir: &Path,
    options: &RunOptions,
) -> Result<RunManifest, RunError> {
    fs::create_dir_all(out_dir)
        .map_err(|e| RunError::Output(format!("{}: {e}", out_dir.display())))?;
    let mut session = Session {
        dir: out_dir.to_path_buf(),
        timings: Vec::new(),
        files: Vec::new(),
        svg: options.svg || config.output.svg,
    };
    let resolved = config.to_string();
    let body = config
        .check_for(sub.name())
        .map_err(RunError::from)
        .and_then(|()| session.write_text("config.resolved.ini", &resolved))
        .and_then(|()| match sub {
            Subcommand::Simulate => simulate(&mut session, config),
            Subcommand::Speed => speed(&mut session, config),
            Subcommand::Steady => steady(&mut session, config),
            Subcommand::Diagnose => diagnose(&mut session, config, options.seed),
            Subcommand::Selfcheck => selfcheck::run_matrix(&mut session, options.seed),
        });

    let mut files = Vec::with_capacity(session.files.len());
    for name in &session.files {
        files.push(file_entry(out_dir, name)?);
    }
    let manifest = RunManifest {
        tool: "nldisp".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        subcommand: sub.name().into(),
        status: if body.is_ok() {
            "complete"
        } else {
            "incomplete"
        }
        .into(),
        failed_phase: body.as_ref().err().and_then(|e| e.phase()),
        error: body.as_ref().err().map(|e| e.to_string()),
        seed: options.seed,
        threads: options.threads,
        config: resolved,
        timings: session.timings,
        files,
    };
    manifest.write_atomic(out_dir)?;
    body.map(|()| manifest)
}

pub fn build_model(config: &ScenarioConfig) -> nldisp_core::Result<Model> {
    Model::new(
        config.kernel(),
        config.model.dispersal,
        config.reaction(),
        Cap::Constant(config.model.cap),
        config.grid(),
        config.domain.extension,
    )
}

pub fn initial_datum(config: &ScenarioConfig, model: &Model) -> nldisp_core::Result<GridFunction> {
    let e = &config.evolve;
    let (amp, width, center) = (e.initial_amplitude, e.initial_width, e.initial_center);
    match e.initial {
        InitialShape::Bump => model.sample(|x| bump(x - center, amp, width)),
        InitialShape::Step => model.sample(|x| {
            if (x - center).abs() <= width {
                amp
            } else {
                0.0
            }
        }),
        InitialShape::Constant => model.sample(|_| amp),
    }
}

fn evolve_options(config: &ScenarioConfig) -> EvolveOptions {
    let e = &config.evolve;
    let mut o = EvolveOptions::new(e.horizon, e.dt, e.scheme).snapshots(e.snapshot_times.clone());
    o.series_tolerance = e.series_tolerance;
    o
}

fn simulate(s: &mut Session, config: &ScenarioConfig) -> Result<(), RunError> {
    let model = s.phase("model", || build_model(config))?;
    let phi = s.phase("initial", || initial_datum(config, &model))?;
    let traj = s.phase("evolve", || evolve(&model, &phi, &evolve_options(config)))?;
    let csv = output::trajectory_csv(&traj, config.output.trajectory_stride);
    s.write_csv("trajectory.csv", &csv)?;
    let fin = traj.final_state();
    let summary = format!(
        "scheme = {}\ndt = {}\nhorizon = {}\nk_f = {}\nsnapshots = {}\nfinal_min = {}\nfinal_max = {}\n",
        traj.scheme().name(),
        fmt_f64(traj.dt()),
        fmt_f64(config.evolve.horizon),
        fmt_f64(model.lipschitz()),
        traj.len(),
        fmt_f64(fin.min()),
        fmt_f64(fin.max()),
    );
    s.write_text("summary.txt", &summary)?;
    s.write_svg("trajectory.svg", svg::profiles(csv.as_str()))
}

fn speed(s: &mut Session, config: &ScenarioConfig) -> Result<(), RunError> {
    let sp = &config.speed;
    let model = s.phase("model", || build_model(config))?;
    let lin = s.phase("linear_speed", || {
        linear_speed(&model, sp.mu_min, sp.mu_max, sp.tol)
    })?;
    let curve = s.phase("dispersion", || {
        (0..64)
            .map(|i| {
                dispersion_rate(
                    &model,
                    sp.mu_min + (sp.mu_max - sp.mu_min) * i as f64 / 63.0,
                )
            })
            .collect::<nldisp_core::Result<Vec<_>>>()
    })?;
    let disp_csv = output::dispersion_csv(&curve);
    s.write_csv("dispersion.csv", &disp_csv)?;
    let phi = s.phase("initial", || initial_datum(config, &model))?;
    let traj = s.phase("evolve", || evolve(&model, &phi, &evolve_options(config)))?;
    let fit = s.phase("front_tracking", || {
        fit_front_speed(&traj, sp.level, sp.fit_window)
    })?;
    let report = SpeedReport {
        c_star: lin.c_star,
        mu_star: lin.mu_star,
        c_observed: fit.slope,
        level: sp.level,
        fit_window: sp.fit_window,
        fit_residual: fit.residual,
        relative_gap: (fit.slope - lin.c_star).abs() / lin.c_star,
    };
    s.write_csv("speed.csv", &output::speed_csv(&report))?;
    let fronts = output::fronts_csv(&fit);
    s.write_csv("fronts.csv", &fronts)?;
    let summary = format!(
        "mu_star = {}\nc_star = {}\nc_observed = {}\nrelative_gap = {}\nlevel = {}\nfit_window = {}, {}\nfit_residual = {}\n",
        fmt_f64(report.mu_star),
        fmt_f64(report.c_star),
        fmt_f64(report.c_observed),
        fmt_f64(report.relative_gap),
        fmt_f64(report.level),
        fmt_f64(report.fit_window.0),
        fmt_f64(report.fit_window.1),
        fmt_f64(report.fit_residual),
    );
    s.write_text("summary.txt", &summary)?;
    s.write_svg("fronts.svg", svg::fronts(fronts.as_str()))?;
    s.write_svg("dispersion.svg", svg::dispersion(disp_csv.as_str()))
}

fn steady(s: &mut Session, config: &ScenarioConfig) -> Result<(), RunError> {
    let model = s.phase("model", || build_model(config))?;
    let init = s.phase("initial", || model.sample(|_| 0.5 * config.model.cap))?;
    let beta = s.phase("steady_state", || {
        steady_state(
            &model,
            &init,
            config.model.steady_tol,
            config.model.steady_max_time,
        )
    })?;
    let residual = s.phase("residual", || model.residual(&beta))?;
    let csv = output::grid_function_csv(&beta, "beta");
    s.write_csv("steady.csv", &csv)?;
    let summary = format!(
        "residual = {}\nmin_beta = {}\nmax_beta = {}\n",
        fmt_f64(residual),
        fmt_f64(beta.min()),
        fmt_f64(beta.max())
    );
    s.write_text("summary.txt", &summary)?;
    s.write_svg(
        "steady.svg",
        svg::single_profile(csv.as_str(), "steady state"),
    )
}

fn diagnose(s: &mut Session, config: &ScenarioConfig, seed: u64) -> Result<(), RunError> {
    let d = &config.diagnostics;
    let model = s.phase("model", || build_model(config))?;
    let spec = match d.ensemble {
        EnsembleChoice::Translates => EnsembleSpec::Translates {
            amplitude: d.amplitude,
            width: d.width,
            start: config.evolve.initial_center - 0.5 * d.spacing * (d.members - 1) as f64,
            spacing: d.spacing,
        },
        EnsembleChoice::RandomFourier => EnsembleSpec::RandomFourier {
            modes: d.modes,
            seed,
        },
    };
    let ensemble = s.phase("ensemble", || make_ensemble(&spec, d.members, &model))?;
    let ing_opts = IngredientOptions {
        trials: d.trials,
        seed,
        modulus_scale: 1.0,
        series_tolerance: config.evolve.series_tolerance,
    };
    let ingredients = s.phase("ingredients", || {
        verify_linear_ingredients(model.kernel(), &ensemble, &config.window, d.t, &ing_opts)
    })?;
    let diag_opts = DiagnosticOptions {
        k_clusters: d.k,
        dt: Some(config.evolve.dt),
        scheme: config.evolve.scheme,
        series_tolerance: config.evolve.series_tolerance,
        lipschitz_samples: d.trials,
        seed,
    };
    let report = s.phase("contraction", || {
        contraction_diagnostic(&model, &ensemble, &config.window, &d.times, &diag_opts)
    })?;
    let diag_csv = output::diagnostics_csv(&report);
    s.write_csv("diagnostics.csv", &diag_csv)?;
    let mut checks = ingredients.checks.clone();
    checks.extend(report.ingredient_checks.iter().cloned());
    s.write_csv("ingredients.csv", &output::checks_csv(&checks))?;

    let mut summary = String::new();
    summary.push_str(&format!(
        "k_f = {}\nD = {}\n",
        fmt_f64(report.k_f),
        fmt_f64(report.dispersal)
    ));
    summary.push_str(&format!(
        "dispersal_dominates (D > k_f) = {}\n",
        report.dispersal_dominates
    ));
    summary.push_str(&format!(
        "k_clusters = {}\nwindow = {}, {}\n",
        report.k_clusters, report.window.a, report.window.b
    ));
    summary.push_str(
        "proxy diameters are a finite-sample heuristic; only the checks below are pass/fail\n",
    );
    for (i, t) in report.times.iter().enumerate() {
        let ratio = report.observed_ratio[i]
            .map(fmt_f64)
            .unwrap_or_else(|| "n/a".into());
        summary.push_str(&format!(
            "t = {}  proxy = {}  ratio = {}  factor = {}\n",
            fmt_f64(*t),
            fmt_f64(report.proxy_diameters[i]),
            ratio,
            fmt_f64(report.theoretical_factor[i])
        ));
    }
    for c in &checks {
        summary.push_str(&format!(
            "{} {}: worst slack {} over {} trials\n",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            fmt_f64(c.worst_slack),
            c.trials
        ));
    }
    s.write_text("summary.txt", &summary)?;
    s.write_svg("diagnostics.svg", svg::diagnostics(diag_csv.as_str()))?;
    let failed: Vec<&str> = checks
        .iter()
        .filter(|c| !c.passed)
        .map(|c| c.name.as_str())
        .collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(RunError::Check {
            phase: "ingredients".into(),
            message: failed.join("; "),
        })
    }
}
