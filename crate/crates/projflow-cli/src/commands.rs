//! The three subcommands: integrate-and-check, predict-only, and the
//! ordered-pair comparison harness.

use std::fmt::Write as _;
use std::time::Instant;

use serde::Serialize;

use projflow::diagnostics::{comparison_check, monotonicity, MONOTONICITY_SLACK};
use projflow::dynamics::{integrate, Method, System, Trajectory};
use projflow::equilibrium::{self, AlphaOutcome};
use projflow::measure::Field;

use crate::config::{self, Job};
use crate::output::{self, PhiRow};
use crate::{CommonArgs, CompareArgs, Failure};

/// Per-step allowance for drift in the conserved log-mass.
const GAMMA_DRIFT_PER_STEP: f64 = 1e-14;
/// Absolute slack for the cellwise upper envelope, scaled by `1 + |K|`.
const ENVELOPE_TOL: f64 = 1e-9;
/// Cellwise slack when checking that ordered states stay ordered.
const ORDERING_TOL: f64 = 1e-10;

/// Collects named check verdicts for the text block and the exit code.
struct Checklist {
    lines: Vec<String>,
    failed: Vec<String>,
}

impl Checklist {
    fn new() -> Self {
        Checklist { lines: Vec::new(), failed: Vec::new() }
    }

    fn record(&mut self, name: &str, passed: bool, detail: String) {
        let verdict = if passed { "PASS" } else { "FAIL" };
        self.lines.push(format!("  {name:<24} {verdict} ({detail})"));
        if !passed {
            self.failed.push(format!("{name}: {detail}"));
        }
    }

    /// A line in the report that deliberately does not gate the exit code.
    fn skip(&mut self, name: &str, detail: String) {
        self.lines.push(format!("  {name:<24} SKIP ({detail})"));
    }

    fn passed(&self) -> bool {
        self.failed.is_empty()
    }

    fn into_outcome(self) -> Result<(), Failure> {
        if self.failed.is_empty() {
            Ok(())
        } else {
            Err(Failure::Check(self.failed.join("; ")))
        }
    }
}

#[derive(Serialize)]
struct NoRootJson {
    target: f64,
    phi_infimum: f64,
}

/// Equilibrium prediction shared by every summary. `alpha_predicted` and
/// `no_root` are mutually exclusive; both absent means the solver failed.
#[derive(Serialize)]
struct PredictionJson {
    xi_min: f64,
    gamma_y0: f64,
    k_bound: f64,
    alpha_predicted: Option<f64>,
    alpha_gap: Option<f64>,
    alpha_residual: Option<f64>,
    alpha_iterations: Option<u32>,
    no_root: Option<NoRootJson>,
}

fn predict(sys: &System, y0: &Field, checks: &mut Checklist) -> Result<PredictionJson, Failure> {
    let partition = sys.partition();
    let direction = sys.projector().direction();
    let gamma_y0 = equilibrium::gamma(partition, direction, y0).map_err(Failure::usage)?;
    let cone = equilibrium::cone(partition, sys.forcing(), direction).map_err(Failure::usage)?;
    let k = equilibrium::k_bound(sys, y0).map_err(Failure::usage)?;

    let mut prediction = PredictionJson {
        xi_min: cone.xi_min(),
        gamma_y0,
        k_bound: k,
        alpha_predicted: None,
        alpha_gap: None,
        alpha_residual: None,
        alpha_iterations: None,
        no_root: None,
    };

    match equilibrium::solve_alpha(sys, y0) {
        Ok(AlphaOutcome::Root(sol)) => {
            prediction.alpha_predicted = Some(sol.alpha);
            prediction.alpha_gap = Some(sol.gap);
            prediction.alpha_residual = Some(sol.residual);
            prediction.alpha_iterations = Some(sol.iterations);
            checks.record(
                "equilibrium solver",
                true,
                format!(
                    "alpha {} after {} iterations, residual {:.3e}",
                    sol.alpha, sol.iterations, sol.residual
                ),
            );
        }
        Ok(AlphaOutcome::NoRoot(info)) => {
            prediction.no_root = Some(NoRootJson {
                target: info.target,
                phi_infimum: info.phi_infimum,
            });
            checks.record(
                "equilibrium solver",
                true,
                format!(
                    "no admissible root: target {:.6e} below infimum {:.6e}",
                    info.target, info.phi_infimum
                ),
            );
        }
        Err(err) => {
            checks.record("equilibrium solver", false, err.to_string());
        }
    }
    Ok(prediction)
}

fn prediction_text(text: &mut String, prediction: &PredictionJson) {
    let _ = writeln!(text, "prediction:");
    let _ = writeln!(text, "  xi_min     = {}", prediction.xi_min);
    match (&prediction.alpha_predicted, &prediction.no_root) {
        (Some(alpha), _) => {
            let _ = writeln!(
                text,
                "  alpha      = {} (gap {:.6e}, residual {:.3e}, {} iterations)",
                alpha,
                prediction.alpha_gap.unwrap_or(f64::NAN),
                prediction.alpha_residual.unwrap_or(f64::NAN),
                prediction.alpha_iterations.unwrap_or(0),
            );
        }
        (None, Some(no_root)) => {
            let _ = writeln!(
                text,
                "  alpha      = none (target {:.6e} below attainable infimum {:.6e})",
                no_root.target, no_root.phi_infimum
            );
        }
        (None, None) => {
            let _ = writeln!(text, "  alpha      = unresolved (solver failed)");
        }
    }
    let _ = writeln!(text, "  K          = {}", prediction.k_bound);
    let _ = writeln!(text, "  Gamma(y0)  = {}", prediction.gamma_y0);
}

fn header_text(verb: &str, job: &Job) -> String {
    let s = &job.scenario;
    let mut text = String::new();
    let _ = writeln!(
        text,
        "{verb}: {} [{}; m={}, T={}, h={}, stride={}]",
        s.name,
        s.method.name(),
        s.m,
        s.t_final,
        s.step,
        s.stride
    );
    let _ = writeln!(text, "config hash: {}", job.hash);
    text
}

fn checks_text(text: &mut String, checks: &Checklist) {
    let _ = writeln!(text, "checks:");
    for line in &checks.lines {
        let _ = writeln!(text, "{line}");
    }
    if checks.passed() {
        let _ = writeln!(text, "result: all checks passed");
    } else {
        let _ = writeln!(text, "result: {} check(s) failed", checks.failed.len());
    }
}

#[derive(Serialize)]
struct RunSummary<'a> {
    command: &'static str,
    scenario: &'a str,
    scenario_hash: &'a str,
    m: usize,
    method: &'static str,
    t_final: f64,
    step: f64,
    stride: usize,
    tol_scale: f64,
    #[serde(flatten)]
    prediction: PredictionJson,
    records: usize,
    positivity_lost_at: Option<f64>,
    gamma_drift_max: f64,
    gamma_drift_budget: Option<f64>,
    v_a_violations: usize,
    v_a_worst_rise: f64,
    v_b_violations: usize,
    v_b_worst_rise: f64,
    beta_final: f64,
    v_a_final: f64,
    v_b_final: f64,
    dist_m_final: f64,
    min_y_final: f64,
    max_y_final: f64,
    envelope_excess: f64,
    checks_passed: bool,
    failed_checks: &'a [String],
    wall_time_seconds: f64,
}

pub fn run(args: &CommonArgs) -> Result<(), Failure> {
    let job = config::load(args)?;
    let started = Instant::now();
    let materialized = job.scenario.materialize().map_err(Failure::usage)?;
    let sys = &materialized.system;
    let y0 = &materialized.y0;

    let mut checks = Checklist::new();
    let prediction = predict(sys, y0, &mut checks)?;

    output::ensure_dir(&job.output.dir)?;
    let spec = config::integrate_spec(&job.scenario);
    let trajectory = match integrate(sys, y0, &spec) {
        Ok(trajectory) => trajectory,
        Err(err) => {
            checks.record("integration", false, err.to_string());
            return abort_run(&job, prediction, checks, started);
        }
    };

    output::write_trajectory(&job.output.dir.join("trajectory.csv"), &trajectory)?;
    if job.output.states {
        output::write_states(
            &job.output.dir.join("states.csv"),
            sys.partition(),
            y0,
            Some(trajectory.final_state()),
        )?;
    }

    match trajectory.positivity_lost_at() {
        None => checks.record("positivity", true, "held for the whole run".into()),
        Some(t) => checks.record("positivity", false, format!("lost at t={t}")),
    }

    // Only the log scheme conserves the log-mass to rounding; the direct
    // scheme drifts at its truncation order, so its drift is reported but
    // does not gate the exit code.
    let drift = trajectory.gamma_drift_max();
    let budget = if spec.method == Method::LogRk4 {
        let steps = (spec.t_final / spec.step).round().max(1.0);
        Some(steps * GAMMA_DRIFT_PER_STEP * (1.0 + prediction.gamma_y0.abs()) * job.tol_scale)
    } else {
        None
    };
    match budget {
        Some(budget) => checks.record(
            "log-mass conservation",
            drift <= budget,
            format!("drift {drift:.3e} against budget {budget:.3e}"),
        ),
        None => checks.skip(
            "log-mass conservation",
            format!("drift {drift:.3e} reported; only the log scheme pledges conservation"),
        ),
    }

    let slack = MONOTONICITY_SLACK * job.tol_scale;
    let v_a_series: Vec<f64> = trajectory.records().iter().map(|r| r.v_a).collect();
    let v_b_series: Vec<f64> = trajectory.records().iter().map(|r| r.v_b).collect();
    let v_a_report = monotonicity(trajectory.times(), &v_a_series, slack)
        .map_err(|err| Failure::Check(err.to_string()))?;
    let v_b_report = monotonicity(trajectory.times(), &v_b_series, slack)
        .map_err(|err| Failure::Check(err.to_string()))?;
    checks.record(
        "entropy monotonicity",
        v_a_report.violations == 0,
        format!(
            "{} violations, worst rise {:.3e}",
            v_a_report.violations, v_a_report.worst_excess
        ),
    );
    checks.record(
        "energy monotonicity",
        v_b_report.violations == 0,
        format!(
            "{} violations, worst rise {:.3e}",
            v_b_report.violations, v_b_report.worst_excess
        ),
    );

    let envelope_excess = envelope_excess(sys, &trajectory, prediction.k_bound);
    let envelope_budget = ENVELOPE_TOL * (1.0 + prediction.k_bound.abs()) * job.tol_scale;
    checks.record(
        "upper envelope",
        envelope_excess <= envelope_budget,
        format!("worst excess {envelope_excess:.3e} against budget {envelope_budget:.3e}"),
    );

    let last = trajectory.final_record();
    let summary = RunSummary {
        command: "run",
        scenario: &job.scenario.name,
        scenario_hash: &job.hash,
        m: job.scenario.m,
        method: job.scenario.method.name(),
        t_final: job.scenario.t_final,
        step: job.scenario.step,
        stride: job.scenario.stride,
        tol_scale: job.tol_scale,
        prediction,
        records: trajectory.len(),
        positivity_lost_at: trajectory.positivity_lost_at(),
        gamma_drift_max: drift,
        gamma_drift_budget: budget,
        v_a_violations: v_a_report.violations,
        v_a_worst_rise: v_a_report.worst_excess,
        v_b_violations: v_b_report.violations,
        v_b_worst_rise: v_b_report.worst_excess,
        beta_final: last.beta,
        v_a_final: last.v_a,
        v_b_final: last.v_b,
        dist_m_final: last.dist_m,
        min_y_final: last.min_y,
        max_y_final: last.max_y,
        envelope_excess,
        checks_passed: checks.passed(),
        failed_checks: &checks.failed,
        wall_time_seconds: started.elapsed().as_secs_f64(),
    };

    let mut text = header_text("run", &job);
    prediction_text(&mut text, &summary.prediction);
    let _ = writeln!(text, "observed:");
    let _ = writeln!(text, "  records          = {}", summary.records);
    let _ = writeln!(text, "  beta(final)      = {}", summary.beta_final);
    let _ = writeln!(text, "  V_a(final)       = {:.6e}", summary.v_a_final);
    let _ = writeln!(text, "  V_b(final)       = {:.6e}", summary.v_b_final);
    let _ = writeln!(text, "  dist_M(final)    = {:.6e}", summary.dist_m_final);
    let _ = writeln!(text, "  min_y(final)     = {}", summary.min_y_final);
    let _ = writeln!(text, "  max_y(final)     = {}", summary.max_y_final);
    let _ = writeln!(text, "  Gamma drift max  = {:.3e}", summary.gamma_drift_max);
    checks_text(&mut text, &checks);
    let _ = writeln!(text, "wall time: {:.3} s", summary.wall_time_seconds);

    output::write_summary(&job.output.dir, &summary, &text)?;
    checks.into_outcome()
}

/// Summary written when the integrator aborted: prediction fields only.
#[derive(Serialize)]
struct AbortSummary<'a> {
    command: &'static str,
    scenario: &'a str,
    scenario_hash: &'a str,
    m: usize,
    method: &'static str,
    #[serde(flatten)]
    prediction: PredictionJson,
    checks_passed: bool,
    failed_checks: &'a [String],
    wall_time_seconds: f64,
}

fn abort_run(
    job: &Job,
    prediction: PredictionJson,
    checks: Checklist,
    started: Instant,
) -> Result<(), Failure> {
    let summary = AbortSummary {
        command: "run",
        scenario: &job.scenario.name,
        scenario_hash: &job.hash,
        m: job.scenario.m,
        method: job.scenario.method.name(),
        prediction,
        checks_passed: false,
        failed_checks: &checks.failed,
        wall_time_seconds: started.elapsed().as_secs_f64(),
    };
    let mut text = header_text("run", job);
    prediction_text(&mut text, &summary.prediction);
    checks_text(&mut text, &checks);
    output::write_summary(&job.output.dir, &summary, &text)?;
    checks.into_outcome()
}

fn envelope_excess(sys: &System, trajectory: &Trajectory, k: f64) -> f64 {
    let a = sys.forcing().values();
    let n = sys.projector().direction().values();
    let mut worst = f64::NEG_INFINITY;
    for state in trajectory.states() {
        for (i, &y) in state.values().iter().enumerate() {
            let excess = y - (a[i] + k * n[i]);
            if excess > worst {
                worst = excess;
            }
        }
    }
    worst
}

#[derive(Serialize)]
struct AnalyzeSummary<'a> {
    command: &'static str,
    scenario: &'a str,
    scenario_hash: &'a str,
    m: usize,
    #[serde(flatten)]
    prediction: PredictionJson,
    phi_points: usize,
    phi_xi_lo: f64,
    phi_xi_hi: f64,
    checks_passed: bool,
    failed_checks: &'a [String],
    wall_time_seconds: f64,
}

pub fn analyze(args: &CommonArgs) -> Result<(), Failure> {
    let job = config::load(args)?;
    let started = Instant::now();
    let materialized = job.scenario.materialize().map_err(Failure::usage)?;
    let sys = &materialized.system;

    let mut checks = Checklist::new();
    let prediction = predict(sys, &materialized.y0, &mut checks)?;

    output::ensure_dir(&job.output.dir)?;
    let rows = phi_rows(sys, &prediction, job.output.phi_points)?;
    output::write_phi_table(&job.output.dir.join("phi_table.csv"), &rows)?;
    if job.output.states {
        output::write_states(
            &job.output.dir.join("states.csv"),
            sys.partition(),
            &materialized.y0,
            None,
        )?;
    }

    let (xi_lo, xi_hi) = match (rows.first(), rows.last()) {
        (Some(first), Some(last)) => (first.xi, last.xi),
        _ => (f64::NAN, f64::NAN),
    };
    let summary = AnalyzeSummary {
        command: "analyze",
        scenario: &job.scenario.name,
        scenario_hash: &job.hash,
        m: job.scenario.m,
        prediction,
        phi_points: rows.len(),
        phi_xi_lo: xi_lo,
        phi_xi_hi: xi_hi,
        checks_passed: checks.passed(),
        failed_checks: &checks.failed,
        wall_time_seconds: started.elapsed().as_secs_f64(),
    };

    let mut text = header_text("analyze", &job);
    prediction_text(&mut text, &summary.prediction);
    let _ = writeln!(
        text,
        "phi table: {} rows over xi in [{}, {}] -> phi_table.csv",
        summary.phi_points, xi_lo, xi_hi
    );
    checks_text(&mut text, &checks);
    let _ = writeln!(text, "wall time: {:.3} s", summary.wall_time_seconds);

    output::write_summary(&job.output.dir, &summary, &text)?;
    checks.into_outcome()
}

/// Geometric sweep of gaps above the cone edge. Starts six decades below
/// the ray scale and ends well past the root (or at four ray scales when
/// there is none), so the table brackets everything worth plotting.
fn phi_rows(
    sys: &System,
    prediction: &PredictionJson,
    points: usize,
) -> Result<Vec<PhiRow>, Failure> {
    let partition = sys.partition();
    let a = sys.forcing();
    let n = sys.projector().direction();
    let xi_min = prediction.xi_min;
    let scale = 1.0 + xi_min.abs();
    let lo_gap = 1e-6 * scale;
    let root_gap = prediction.alpha_gap.unwrap_or(0.0);
    let hi_gap = (8.0 * root_gap).max(4.0 * scale);
    let points = points.max(2);

    let mut rows = Vec::with_capacity(points);
    for k in 0..points {
        let t = k as f64 / (points - 1) as f64;
        let gap = lo_gap * (hi_gap / lo_gap).powf(t);
        let xi = xi_min + gap;
        let phi = equilibrium::phi(partition, a, n, xi).map_err(Failure::usage)?;
        let phi_prime = equilibrium::phi_prime(partition, a, n, xi).map_err(Failure::usage)?;
        rows.push(PhiRow { xi, phi, phi_prime });
    }
    Ok(rows)
}

#[derive(Serialize)]
struct CompareSummary<'a> {
    command: &'static str,
    scenario: &'a str,
    scenario_hash: &'a str,
    m: usize,
    method: &'static str,
    t_final: f64,
    step: f64,
    stride: usize,
    tol_scale: f64,
    records: usize,
    tolerance: f64,
    violations: usize,
    worst_shortfall: f64,
    at_time: f64,
    at_cell: usize,
    upper_gamma_drift_max: f64,
    lower_gamma_drift_max: f64,
    upper_positivity_lost_at: Option<f64>,
    lower_positivity_lost_at: Option<f64>,
    checks_passed: bool,
    failed_checks: &'a [String],
    wall_time_seconds: f64,
}

pub fn compare(args: &CompareArgs) -> Result<(), Failure> {
    let job = config::load(&args.common)?;
    let started = Instant::now();
    let materialized = job.scenario.materialize().map_err(Failure::usage)?;
    let sys = &materialized.system;
    let y0 = &materialized.y0;

    let z0 = match (args.scale, materialized.z0) {
        (Some(scale), _) => {
            if !(scale.is_finite() && scale > 0.0) {
                return Err(Failure::Usage(format!(
                    "--scale must be a positive finite number, got {scale}"
                )));
            }
            y0.scale(scale).map_err(Failure::usage)?
        }
        (None, Some(z0)) => z0,
        (None, None) => {
            return Err(Failure::Usage(
                "compare needs a lower state: add scenario.z0 to the config or pass --scale"
                    .into(),
            ))
        }
    };

    for (i, (&upper, &lower)) in y0.values().iter().zip(z0.values()).enumerate() {
        if !(lower > 0.0) {
            return Err(Failure::Usage(format!(
                "lower state must be strictly positive, got {lower} at cell {i}"
            )));
        }
        if lower > upper {
            return Err(Failure::Usage(format!(
                "initial states are not ordered: lower exceeds upper at cell {i} ({lower} > {upper})"
            )));
        }
    }

    output::ensure_dir(&job.output.dir)?;
    let spec = config::integrate_spec(&job.scenario);
    let upper = integrate(sys, y0, &spec)
        .map_err(|err| Failure::Check(format!("upper integration: {err}")))?;
    let lower = integrate(sys, &z0, &spec)
        .map_err(|err| Failure::Check(format!("lower integration: {err}")))?;

    output::write_trajectory(&job.output.dir.join("trajectory_upper.csv"), &upper)?;
    output::write_trajectory(&job.output.dir.join("trajectory_lower.csv"), &lower)?;

    let mut checks = Checklist::new();
    match upper.positivity_lost_at() {
        None => checks.record("upper positivity", true, "held for the whole run".into()),
        Some(t) => checks.record("upper positivity", false, format!("lost at t={t}")),
    }
    match lower.positivity_lost_at() {
        None => checks.record("lower positivity", true, "held for the whole run".into()),
        Some(t) => checks.record("lower positivity", false, format!("lost at t={t}")),
    }

    let tolerance = ORDERING_TOL * job.tol_scale;
    let report = comparison_check(&upper, &lower, tolerance)
        .map_err(|err| Failure::Check(err.to_string()))?;
    checks.record(
        "cellwise ordering",
        report.violations == 0,
        format!(
            "{} violations, worst shortfall {:.3e} at t={}, cell {}",
            report.violations, report.worst_shortfall, report.at_time, report.at_cell
        ),
    );

    let summary = CompareSummary {
        command: "compare",
        scenario: &job.scenario.name,
        scenario_hash: &job.hash,
        m: job.scenario.m,
        method: job.scenario.method.name(),
        t_final: job.scenario.t_final,
        step: job.scenario.step,
        stride: job.scenario.stride,
        tol_scale: job.tol_scale,
        records: report.records,
        tolerance,
        violations: report.violations,
        worst_shortfall: report.worst_shortfall,
        at_time: report.at_time,
        at_cell: report.at_cell,
        upper_gamma_drift_max: upper.gamma_drift_max(),
        lower_gamma_drift_max: lower.gamma_drift_max(),
        upper_positivity_lost_at: upper.positivity_lost_at(),
        lower_positivity_lost_at: lower.positivity_lost_at(),
        checks_passed: checks.passed(),
        failed_checks: &checks.failed,
        wall_time_seconds: started.elapsed().as_secs_f64(),
    };

    let mut text = header_text("compare", &job);
    let _ = writeln!(text, "  records               = {}", summary.records);
    let _ = writeln!(text, "  tolerance             = {:.3e}", summary.tolerance);
    let _ = writeln!(text, "  violations            = {}", summary.violations);
    let _ = writeln!(
        text,
        "  worst shortfall       = {:.3e} (t={}, cell {})",
        summary.worst_shortfall, summary.at_time, summary.at_cell
    );
    let _ = writeln!(text, "  upper Gamma drift max = {:.3e}", summary.upper_gamma_drift_max);
    let _ = writeln!(text, "  lower Gamma drift max = {:.3e}", summary.lower_gamma_drift_max);
    checks_text(&mut text, &checks);
    let _ = writeln!(text, "wall time: {:.3} s", summary.wall_time_seconds);

    output::write_summary(&job.output.dir, &summary, &text)?;
    checks.into_outcome()
}
