//! Config parsing, run orchestration and artifact output for the
//! `weingarten` binary.

mod config;
mod output;

use std::io::Write;
use std::time::Instant;

use serde::Serialize;

use crate::estimates::EstimateReport;
use crate::hchart::{FieldRole, Grid, ScalarField};
use crate::solver::{
    assemble_residual, barrier_sandwich_check, continuation_solve, solve_lower_barrier, solve_upper_barrier,
    uniqueness_probe, BoundaryData, ProblemSpec, SandwichReport, SolveResult, UniquenessReport,
};

pub use config::{parse_config, parse_config_str, parse_grid, ConfigError, Mode, PsiConfig, RunConfig};
pub use output::{fields_table, grid_hash, write_fields_csv, FieldRow, FIELD_COLUMNS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ExitStatus {
    Ok,
    BadConfig,
    SolverFailure,
    VerificationFailure,
    Io,
}

impl ExitStatus {
    pub fn code(self) -> u8 {
        match self {
            ExitStatus::Ok => 0,
            ExitStatus::BadConfig => 1,
            ExitStatus::SolverFailure => 2,
            ExitStatus::VerificationFailure => 3,
            ExitStatus::Io => 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &'static str, pass: bool, detail: impl Into<String>) -> Self {
        Self { name, pass, detail: detail.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StudyRow {
    pub n: usize,
    pub h: f64,
    pub newton_iterations: usize,
    pub residual: f64,
    /// `max |u - u*|` against the manufactured profile.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<f64>,
    /// Area mean of `u`, used when no exact solution is known.
    pub mean_u: f64,
    /// Observed order from this grid and the previous one (or two).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub order: Option<f64>,
    pub spacelike_gap: f64,
    pub curvature_ratio: f64,
    pub sup_eta_lambda1: f64,
    pub support_residual: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub support_order: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
struct ProblemInfo {
    n: usize,
    k: usize,
    rho_max: f64,
    grid: [usize; 2],
    psi: String,
    boundary_reading: &'static str,
    /// `p >= k` for the power and exponential families.
    #[serde(skip_serializing_if = "Option::is_none")]
    growth_condition: Option<bool>,
    exact_case: bool,
}

#[derive(Debug, Clone, Serialize)]
struct Notes {
    support_sign: &'static str,
    zeta: &'static str,
}

const NOTES: Notes = Notes {
    support_sign: "the support Laplacian identity is checked for q = <X,nu>; \
the printed statement with theta = -<X,nu> leaves 2n/R on hyperboloids (printed_sign_residual)",
    zeta: "the constant zeta = 1/5 (with delta = 1/4) of the interior estimate is fixed inside \
its proof and plays no computational role here",
};

#[derive(Debug, Clone, Serialize)]
struct Report {
    version: &'static str,
    mode: Mode,
    status: ExitStatus,
    message: String,
    flagged: bool,
    warnings: Vec<String>,
    config: RunConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    problem: Option<ProblemInfo>,
    notes: Notes,
    #[serde(skip_serializing_if = "Option::is_none")]
    solve: Option<SolveResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    estimates: Option<EstimateReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    reference_error: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    barriers: Option<SandwichReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    uniqueness: Option<UniquenessReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    study: Option<Vec<StudyRow>>,
    checks: Vec<Check>,
}

#[derive(Debug, Clone, Serialize)]
struct Manifest<'a> {
    version: &'static str,
    mode: Mode,
    status: ExitStatus,
    exit_code: u8,
    config: &'a RunConfig,
    out: String,
    grid_hash: String,
    wall_time_s: f64,
    threads: usize,
    artifacts: Vec<&'static str>,
}

pub struct RunOutcome {
    pub status: ExitStatus,
    pub message: String,
}

struct Artifacts {
    report: Report,
    fields: Option<Vec<FieldRow>>,
    grids: Vec<Grid>,
    log: Vec<String>,
}

impl Artifacts {
    fn new(cfg: &RunConfig) -> Self {
        let mut log = vec![format!("weingarten {} mode={:?}", env!("CARGO_PKG_VERSION"), cfg.mode)];
        log.extend(cfg.warnings.iter().map(|w| format!("warning: {w}")));
        Self {
            report: Report {
                version: env!("CARGO_PKG_VERSION"),
                mode: cfg.mode,
                status: ExitStatus::Ok,
                message: String::new(),
                flagged: !cfg.warnings.is_empty(),
                warnings: cfg.warnings.clone(),
                config: cfg.clone(),
                problem: None,
                notes: NOTES,
                solve: None,
                estimates: None,
                reference_error: None,
                barriers: None,
                uniqueness: None,
                study: None,
                checks: Vec::new(),
            },
            fields: None,
            grids: Vec::new(),
            log,
        }
    }

    fn finish(&mut self, status: ExitStatus, message: impl Into<String>) {
        self.report.status = status;
        self.report.message = message.into();
        self.log.push(format!("status: {:?} ({})", status, self.report.message));
    }

    fn check(&mut self, c: Check) {
        self.log.push(format!("check {:<26} {} {}", c.name, if c.pass { "PASS" } else { "FAIL" }, c.detail));
        self.report.checks.push(c);
    }
}

/// Runs one configured job, writes `fields.csv`, `report.json`, `log.txt`
/// and `manifest.json` into the output directory, and returns the exit status.
pub fn run(cfg: &RunConfig) -> RunOutcome {
    let start = Instant::now();
    let mut art = Artifacts::new(cfg);
    match cfg.mode {
        Mode::Solve | Mode::Verify => single(cfg, &mut art),
        Mode::Study => study(cfg, &mut art),
    }
    if art.report.status != ExitStatus::SolverFailure {
        if let Some(msg) = output::non_finite(&art.report, art.fields.as_deref()) {
            art.fields = None;
            art.finish(ExitStatus::SolverFailure, msg);
        }
    }
    match write_all(cfg, &art, start) {
        Ok(()) => RunOutcome {
            status: art.report.status,
            message: art.report.message.clone(),
        },
        Err(e) => RunOutcome {
            status: ExitStatus::Io,
            message: format!("writing artifacts to {}: {e}", cfg.out.display()),
        },
    }
}

fn write_all(cfg: &RunConfig, art: &Artifacts, start: Instant) -> std::io::Result<()> {
    let dir = &cfg.out;
    std::fs::create_dir_all(dir)?;
    let mut artifacts = Vec::new();
    if let Some(rows) = &art.fields {
        output::write_atomic(&dir.join("fields.csv"), |w| write_fields_csv(w, rows))?;
        artifacts.push("fields.csv");
    }
    let report = serde_json::to_string_pretty(&art.report).map_err(std::io::Error::other)? + "\n";
    output::write_atomic(&dir.join("report.json"), |w| w.write_all(report.as_bytes()))?;
    artifacts.push("report.json");
    let log = art.log.join("\n") + "\n";
    output::write_atomic(&dir.join("log.txt"), |w| w.write_all(log.as_bytes()))?;
    artifacts.push("log.txt");
    artifacts.push("manifest.json");
    let manifest = Manifest {
        version: env!("CARGO_PKG_VERSION"),
        mode: cfg.mode,
        status: art.report.status,
        exit_code: art.report.status.code(),
        config: cfg,
        out: dir.display().to_string(),
        grid_hash: grid_hash(&art.grids),
        wall_time_s: start.elapsed().as_secs_f64(),
        threads: 1,
        artifacts,
    };
    let text = serde_json::to_string_pretty(&manifest).map_err(std::io::Error::other)? + "\n";
    output::write_atomic(&dir.join("manifest.json"), |w| w.write_all(text.as_bytes()))
}

fn boundary_reading(b: &BoundaryData) -> &'static str {
    match b {
        BoundaryData::Constant { .. } => "constant",
        BoundaryData::Hyperplane { .. } => "hyperplane slice c/cosh(rho)",
        BoundaryData::Radial { .. } => "radial profile",
    }
}

fn build_spec(cfg: &RunConfig, art: &mut Artifacts) -> Option<ProblemSpec> {
    let built = cfg.grid().and_then(|grid| {
        let psi = cfg.psi_spec(&grid)?;
        ProblemSpec::new(grid, cfg.k, psi, cfg.boundary.clone())
    });
    match built {
        Ok(spec) => {
            art.grids.push(spec.grid.clone());
            art.report.problem = Some(ProblemInfo {
                n: spec.n(),
                k: spec.k,
                rho_max: cfg.rho_max,
                grid: [spec.grid.n_rho(), spec.grid.n_theta()],
                psi: spec.psi.label.clone(),
                boundary_reading: boundary_reading(&spec.boundary),
                growth_condition: spec.psi.growth_condition(spec.k, false),
                exact_case: spec.is_exact_case(),
            });
            Some(spec)
        }
        Err(e) => {
            art.finish(ExitStatus::BadConfig, format!("problem setup: {e}"));
            None
        }
    }
}

fn solve(spec: &ProblemSpec, cfg: &RunConfig, art: &mut Artifacts) -> Option<SolveResult> {
    art.log.push(format!(
        "solve grid {}x{} k={} psi={}",
        spec.grid.n_rho(),
        spec.grid.n_theta(),
        spec.k,
        spec.psi.label
    ));
    match continuation_solve(spec, &cfg.continuation) {
        Ok(res) => {
            for e in &res.trace {
                art.log.push(format!(
                    "  t={:.6} iterations={} residual={} {}{}",
                    e.t,
                    e.iterations,
                    e.residual.map(|r| format!("{r:.3e}")).unwrap_or_else(|| "-".into()),
                    if e.accepted { "accepted" } else { "rejected" },
                    e.note.as_deref().map(|n| format!(" ({n})")).unwrap_or_default()
                ));
            }
            if res.converged() {
                Some(res)
            } else {
                let msg = format!("continuation stopped at t = {} ({:?})", res.t_reached, res.status);
                art.report.solve = Some(res);
                art.finish(ExitStatus::SolverFailure, msg);
                None
            }
        }
        Err(e) => {
            art.finish(ExitStatus::SolverFailure, format!("solver: {e}"));
            None
        }
    }
}

/// `a (1 - (rho/rho_b)^2)`, vanishing on the boundary ring's radius.
fn bump(grid: &Grid, a: f64) -> ScalarField {
    let rb = grid.boundary_rho();
    ScalarField::from_fn(grid, FieldRole::Diagnostic, |rho, _| a * (1.0 - (rho / rb).powi(2)).max(0.0))
}

fn estimate_checks(est: &EstimateReport) -> Vec<Check> {
    let m = &est.maclaurin;
    vec![
        Check::new(
            "admissible",
            m.admissible,
            format!("{} interior nodes outside the cone", m.inadmissible_nodes),
        ),
        Check::new("newton_maclaurin", m.newton_holds, format!("min slack {:e}", m.newton_slack_min)),
        Check::new(
            "maclaurin_ordering",
            m.ordering_holds,
            format!("min slacks {:e}, {:e}", m.upper_slack_min, m.lower_slack_min),
        ),
        Check::new(
            "gradient_estimate",
            est.gradient.pass,
            format!("sup W = {:e} <= {:e}", est.gradient.sup_w, est.gradient.bound),
        ),
        Check::new(
            "eta_sign",
            !est.profile.eta_violation,
            format!("min (phi - u) = {:e}", est.profile.min_eta),
        ),
    ]
}

fn single(cfg: &RunConfig, art: &mut Artifacts) {
    let Some(spec) = build_spec(cfg, art) else { return };
    let Some(res) = solve(&spec, cfg, art) else { return };
    let grid = &spec.grid;
    let tol = res.tolerance;
    let mut u = res.u.clone();
    art.log.push(format!(
        "converged: {} Newton iterations, residual {:.3e}",
        res.total_newton_iterations, res.residual
    ));
    art.report.solve = Some(res);
    if cfg.corrupt_bump != 0.0 {
        if cfg.mode == Mode::Verify {
            art.log.push(format!("adding bump of amplitude {} before verification", cfg.corrupt_bump));
            for (x, b) in u.values_mut().iter_mut().zip(bump(grid, cfg.corrupt_bump).values()) {
                *x += b;
            }
        } else {
            art.log.push("corrupt_bump only applies in verify mode; ignored".into());
        }
    }
    if let Some(profile) = cfg.reference() {
        let exact = ScalarField::from_fn(grid, FieldRole::Graph, |rho, _| profile.value(rho));
        art.report.reference_error = Some(u.max_abs_diff(&exact));
    }
    let fail = if cfg.mode == Mode::Verify { ExitStatus::VerificationFailure } else { ExitStatus::SolverFailure };
    match fields_table(&u, &spec) {
        Ok(rows) => art.fields = Some(rows),
        Err(e) => return art.finish(fail, format!("solution fields: {e}")),
    }
    let est = match EstimateReport::compute(&u, &spec) {
        Ok(est) => est,
        Err(e) => return art.finish(fail, format!("estimates: {e}")),
    };
    for c in estimate_checks(&est) {
        art.check(c);
    }
    if spec.is_exact_case() {
        let s = &est.support_identity;
        let scale = 1.0 + spec.psi_scale();
        art.check(Check::new(
            "support_identity",
            s.residual <= 1e-9 * scale,
            format!("residual {:e}", s.residual),
        ));
    }
    art.report.estimates = Some(est);

    if cfg.mode == Mode::Verify {
        let h2 = grid.d_rho() * grid.d_rho();
        match assemble_residual(&u, 1.0, &spec) {
            Ok(r) => {
                let norm = r.values().iter().fold(0.0f64, |m, x| m.max(x.abs()));
                art.check(Check::new("residual", norm <= 10.0 * tol, format!("|R|inf = {norm:e}, tolerance {tol:e}")));
            }
            Err(e) => art.check(Check::new("residual", false, e.to_string())),
        }
        if let Some(err) = art.report.reference_error {
            art.check(Check::new("reference", err <= 10.0 * h2, format!("max |u - u*| = {err:e}")));
        }
        let barriers = solve_upper_barrier(&spec, &u, &cfg.continuation)
            .and_then(|up| Ok((up, solve_lower_barrier(&spec, &u, &cfg.continuation)?)));
        match barriers {
            Ok((up, lo)) => {
                let rep = barrier_sandwich_check(&spec, &u, &lo, &up);
                art.check(Check::new(
                    "barrier_sandwich",
                    rep.pass,
                    format!("margins {:e}, {:e} against -{:e}", rep.upper_margin, rep.lower_margin, rep.eps_h),
                ));
                art.report.barriers = Some(rep);
            }
            Err(e) => art.check(Check::new("barrier_sandwich", false, format!("barrier solve: {e}"))),
        }
        if cfg.starts > 0 {
            match uniqueness_probe(&spec, &cfg.continuation, cfg.starts, cfg.seed) {
                Ok(rep) => {
                    let limit = 1e-8f64.max(10.0 * h2);
                    art.check(Check::new(
                        "uniqueness",
                        rep.all_converged && rep.max_pairwise_distance <= limit,
                        format!("{} starts, max distance {:e}", cfg.starts, rep.max_pairwise_distance),
                    ));
                    art.report.uniqueness = Some(rep);
                }
                Err(e) => art.check(Check::new("uniqueness", false, e.to_string())),
            }
        }
    }
    conclude(art);
}

fn conclude(art: &mut Artifacts) {
    let failed: Vec<&str> = art.report.checks.iter().filter(|c| !c.pass).map(|c| c.name).collect();
    if failed.is_empty() {
        art.finish(ExitStatus::Ok, "converged and verified");
    } else {
        let msg = format!("verification failed: {}", failed.join(", "));
        art.finish(ExitStatus::VerificationFailure, msg);
    }
}

fn order(coarse: f64, fine: f64, ratio: f64) -> Option<f64> {
    (coarse > 0.0 && fine > 0.0).then(|| (coarse / fine).ln() / ratio.ln())
}

fn relative_spread(v: &[f64]) -> f64 {
    let hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
    if hi.abs() == 0.0 {
        0.0
    } else {
        (hi - lo) / hi.abs()
    }
}

fn area_mean(u: &ScalarField, grid: &Grid) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for node in 0..grid.len() {
        let w = grid.position(node).0.sinh();
        num += w * u.values()[node];
        den += w;
    }
    num / den
}

fn study(cfg: &RunConfig, art: &mut Artifacts) {
    let mut rows: Vec<StudyRow> = Vec::new();
    let mut last: Option<(ScalarField, ProblemSpec)> = None;
    let mut cont = cfg.continuation.clone();
    cont.tolerance = Some(cont.tolerance.unwrap_or(1e-10));
    let run_cfg = RunConfig { continuation: cont, ..cfg.clone() };
    let reference = cfg.reference();
    for &n in &cfg.study_grids {
        let mut c = run_cfg.clone();
        if let Err(e) = c.set_grid(n, n) {
            return art.finish(ExitStatus::BadConfig, e.to_string());
        }
        let Some(spec) = build_spec(&c, art) else { return };
        let Some(res) = solve(&spec, &c, art) else { return };
        let est = match EstimateReport::compute(&res.u, &spec) {
            Ok(est) => est,
            Err(e) => return art.finish(ExitStatus::SolverFailure, format!("estimates on {n}x{n}: {e}")),
        };
        for mut ch in estimate_checks(&est) {
            ch.detail = format!("{n}x{n}: {}", ch.detail);
            art.check(ch);
        }
        let grid = &spec.grid;
        let error = reference.as_ref().map(|p| {
            let exact = ScalarField::from_fn(grid, FieldRole::Graph, |rho, _| p.value(rho));
            res.u.max_abs_diff(&exact)
        });
        let mean_u = area_mean(&res.u, grid);
        let h = grid.d_rho();
        let prev = rows.last();
        let ratio = prev.map(|r| r.h / h).unwrap_or(2.0);
        let order_est = match (error, prev) {
            (Some(e), Some(p)) => order(p.error.unwrap_or(0.0), e, ratio),
            (None, Some(p)) if rows.len() >= 2 => {
                let pp = &rows[rows.len() - 2];
                order((pp.mean_u - p.mean_u).abs(), (p.mean_u - mean_u).abs(), ratio)
            }
            _ => None,
        };
        let support = est.support_identity.residual;
        rows.push(StudyRow {
            n,
            h,
            newton_iterations: res.total_newton_iterations,
            residual: res.residual,
            error,
            mean_u,
            order: order_est,
            spacelike_gap: est.spacelike_gap,
            curvature_ratio: est.curvature.ratio,
            sup_eta_lambda1: est.profile.sup_eta_lambda1,
            support_residual: support,
            support_order: prev.and_then(|p| order(p.support_residual, support, ratio)),
        });
        last = Some((res.u, spec));
    }
    art.log.push(output::study_table(&rows));
    let (u, spec) = last.expect("at least two grids");
    match fields_table(&u, &spec) {
        Ok(f) => art.fields = Some(f),
        Err(e) => return art.finish(ExitStatus::SolverFailure, format!("solution fields: {e}")),
    }
    if let Some(o) = rows.last().and_then(|r| r.order) {
        if reference.is_some() {
            art.check(Check::new("convergence_order", o >= 1.8, format!("observed order {o:.3}")));
        }
    }
    let ratios: Vec<f64> = rows.iter().map(|r| r.curvature_ratio).collect();
    let etas: Vec<f64> = rows.iter().map(|r| r.sup_eta_lambda1).collect();
    let (a, b) = (relative_spread(&ratios), relative_spread(&etas));
    art.check(Check::new("curvature_ratio_stability", a < 0.2, format!("relative spread {a:.4}")));
    art.check(Check::new("eta_lambda1_stability", b < 0.2, format!("relative spread {b:.4}")));
    art.report.study = Some(rows);
    conclude(art);
}
