//! `zermelo run`: dispatch the requested solvers and write their artifacts.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use log::{error, info, warn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;
use zermelo_core::currents::{permanence_check, weak_current_check, RegionBox};
use zermelo_core::dynamics::{write_pmp_csv, CsvError, Diagnostics};
use zermelo_core::solvers::{
    brute_force_min_time, constant_current_route, default_bounds, shoot, solve_affine_elliptic, BruteForceEstimate,
    Candidate, ExampleResult, Scenario, SolveResult, SolverError, SolverId,
};
use zermelo_core::Vec2;

use crate::config::RunConfig;
use crate::plot;

#[derive(Debug, Error)]
pub enum RunError {
    #[error("cannot write {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("cannot write {path}: {source}")]
    Csv { path: PathBuf, source: CsvError },
}

/// What a solver produced.
#[derive(Debug, Clone)]
pub enum Output {
    Trajectory(SolveResult),
    Example(SolveResult, ExampleResult),
    Bracket(BruteForceEstimate),
}

impl Output {
    pub fn solve_result(&self) -> Option<&SolveResult> {
        match self {
            Self::Trajectory(r) | Self::Example(r, _) => Some(r),
            Self::Bracket(_) => None,
        }
    }

    pub fn t_f(&self) -> f64 {
        match self {
            Self::Trajectory(r) | Self::Example(r, _) => r.t_f,
            Self::Bracket(b) => b.estimate,
        }
    }
}

pub fn solve(id: SolverId, scenario: &Scenario, cfg: &RunConfig) -> Result<Output, SolverError> {
    match id {
        SolverId::Shoot => shoot(scenario).map(Output::Trajectory),
        SolverId::Constant => constant_current_route(scenario).map(Output::Trajectory),
        SolverId::AnalyticExample => solve_affine_elliptic(scenario).map(|(r, ex)| Output::Example(r, ex)),
        SolverId::BruteForce => brute_force_min_time(scenario, &cfg.grid).map(Output::Bracket),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct WeakCurrent {
    pub epsilon: f64,
    pub delta: f64,
    pub ok: bool,
}

/// Standing-assumption checks. They are reported, never enforced.
#[derive(Debug, Clone, Serialize)]
pub struct Advisories {
    pub weak_current: Option<WeakCurrent>,
    pub permanence_at_target: bool,
    pub strict_convexity_min_delta: f64,
    /// Largest `(σ(p) − ⟨p, v(p)⟩)/(1 + |p|)` over seeded random costates.
    pub kernel_probe_residual: f64,
}

impl Advisories {
    pub fn evaluate(scenario: &Scenario, seed: u64) -> Self {
        let (lo, hi) = default_bounds(scenario);
        let weak_current = RegionBox::new(lo, hi)
            .ok()
            .and_then(|region| weak_current_check(&scenario.field, &scenario.set, &region, 256).ok())
            .map(|r| WeakCurrent { epsilon: r.epsilon, delta: r.delta, ok: r.ok });
        let permanence_at_target = permanence_check(&scenario.field, &scenario.set, &[scenario.target.point]);
        let strict_convexity_min_delta =
            scenario.set.verify_strict_convexity(1024).map(|r| r.min_delta).unwrap_or(f64::NAN);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut kernel_probe_residual: f64 = 0.0;
        for _ in 0..256 {
            let p = Vec2::from_angle(rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI))
                * 10f64.powf(rng.gen_range(-2.0..2.0));
            if let Ok(v) = scenario.set.maximizer(p) {
                kernel_probe_residual = kernel_probe_residual.max(scenario.set.fenchel_residual(v, p) / (1.0 + p.norm()));
            }
        }
        Self { weak_current, permanence_at_target, strict_convexity_min_delta, kernel_probe_residual }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ExampleSummary {
    pub eps: f64,
    pub a: f64,
    pub t_const: Option<f64>,
    pub u_const: Option<[f64; 2]>,
    pub roots_c: Vec<f64>,
    pub e_values: Vec<f64>,
    pub t_opt: f64,
    pub c_opt: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Bracket {
    pub lower: f64,
    pub upper: f64,
    pub sweeps: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub scenario: String,
    pub scenario_hash: String,
    pub solver_id: SolverId,
    pub seed: u64,
    pub t_f: f64,
    pub x0: Option<[f64; 2]>,
    pub bracket: Option<Bracket>,
    pub diagnostics: Option<Diagnostics>,
    pub transversality: Option<f64>,
    pub candidates: Vec<Candidate>,
    pub example: Option<ExampleSummary>,
    pub advisories: Advisories,
    pub trajectory_csv: Option<String>,
}

fn arr(v: Vec2) -> [f64; 2] {
    [v.x1, v.x2]
}

impl Report {
    pub fn new(cfg: &RunConfig, id: SolverId, out: &Output, advisories: Advisories) -> Self {
        let base = Self {
            scenario: cfg.name.clone(),
            scenario_hash: cfg.scenario.hash(),
            solver_id: id,
            seed: cfg.seed,
            t_f: out.t_f(),
            x0: None,
            bracket: None,
            diagnostics: None,
            transversality: None,
            candidates: Vec::new(),
            example: None,
            advisories,
            trajectory_csv: None,
        };
        let with_result = |r: &SolveResult| Self {
            x0: Some(arr(r.x0)),
            diagnostics: Some(r.diagnostics),
            transversality: Some(r.transversality),
            candidates: r.candidates.clone(),
            trajectory_csv: Some(format!("{}.csv", id.as_str())),
            ..base.clone()
        };
        match out {
            Output::Trajectory(r) => with_result(r),
            Output::Example(r, ex) => Self {
                example: Some(ExampleSummary {
                    eps: ex.eps,
                    a: ex.a,
                    t_const: ex.t_const,
                    u_const: ex.u_const.map(arr),
                    roots_c: ex.roots_c(),
                    e_values: ex.e_values(),
                    t_opt: ex.t_opt,
                    c_opt: ex.c_opt,
                }),
                ..with_result(r)
            },
            Output::Bracket(b) => {
                Self { bracket: Some(Bracket { lower: b.lower, upper: b.upper, sweeps: b.sweeps }), ..base }
            }
        }
    }
}

/// Per-solver outcome of a run, in the order the solvers were requested.
pub struct RunSummary {
    pub outcomes: Vec<(SolverId, Result<Output, SolverError>)>,
    pub written: Vec<PathBuf>,
}

impl RunSummary {
    pub fn all_ok(&self) -> bool {
        self.outcomes.iter().all(|(_, r)| r.is_ok())
    }
}

/// Runs every requested solver concurrently, then writes reports, CSVs and the
/// plot one after another so the artifacts do not depend on thread timing.
pub fn run(cfg: &RunConfig, out_dir: &Path, plot_enabled: bool) -> Result<RunSummary, RunError> {
    let scenario = cfg.to_scenario();
    info!("scenario {} ({}), solvers {:?}", cfg.name, cfg.scenario.hash(), cfg.solvers);
    let (outcomes, advisories) = std::thread::scope(|scope| {
        let handles: Vec<_> = cfg
            .solvers
            .iter()
            .map(|&id| {
                let scenario = &scenario;
                (id, scope.spawn(move || solve(id, scenario, cfg)))
            })
            .collect();
        let advisories = Advisories::evaluate(&scenario, cfg.seed);
        let outcomes: Vec<_> =
            handles.into_iter().map(|(id, h)| (id, h.join().expect("solver thread panicked"))).collect();
        (outcomes, advisories)
    });
    if advisories.weak_current.as_ref().is_some_and(|w| !w.ok) {
        warn!("weak-current assumption fails on the default region; results are still reported");
    }

    fs::create_dir_all(out_dir).map_err(|source| RunError::Io { path: out_dir.to_owned(), source })?;
    let mut written = Vec::new();
    for (id, outcome) in &outcomes {
        let out = match outcome {
            Ok(out) => out,
            Err(e) => {
                error!("{} failed: {e}", id.as_str());
                continue;
            }
        };
        info!("{}: t_f = {}", id.as_str(), out.t_f());
        if let Some(r) = out.solve_result() {
            let path = out_dir.join(format!("{}.csv", id.as_str()));
            let file = File::create(&path).map_err(|source| RunError::Io { path: path.clone(), source })?;
            write_pmp_csv(&r.trajectory.samples, BufWriter::new(file))
                .map_err(|source| RunError::Csv { path: path.clone(), source })?;
            written.push(path);
        }
        let report = Report::new(cfg, *id, out, advisories.clone());
        let path = out_dir.join(format!("{}.json", id.as_str()));
        write_text(&path, &(serde_json::to_string_pretty(&report).expect("report serializes") + "\n"))?;
        written.push(path);
    }
    if plot_enabled {
        let svg = plot::render(&scenario, &outcomes);
        let path = out_dir.join("plot.svg");
        write_text(&path, &svg)?;
        written.push(path);
    }
    Ok(RunSummary { outcomes, written })
}

fn write_text(path: &Path, text: &str) -> Result<(), RunError> {
    let io = |source| RunError::Io { path: path.to_owned(), source };
    let mut file = BufWriter::new(File::create(path).map_err(io)?);
    file.write_all(text.as_bytes()).map_err(io)?;
    file.flush().map_err(io)
}
