//! Release gate for the simulator: eleven numbered checks, each printing a
//! single PASS/FAIL line (visible with `--nocapture`) and failing the test
//! on any miss. Expensive reference runs are shared across checks.

use std::sync::OnceLock;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use projflow::diagnostics::{
    comparison_check, entropy_identity_check, monotonicity, MONOTONICITY_SLACK,
};
use projflow::dynamics::{integrate, picard_reference, step_log, IntegrateSpec, Trajectory};
use projflow::equilibrium::{k_bound, solve_alpha, AlphaOutcome};
use projflow::measure::Field;
use projflow::scenarios::{builtin, Materialized, Scenario};

fn spec_of(s: &Scenario) -> IntegrateSpec {
    IntegrateSpec {
        t_final: s.t_final,
        step: s.step,
        stride: s.stride,
        method: s.method,
    }
}

struct SharedRun {
    mat: Materialized,
    traj: Trajectory,
    seconds: f64,
}

fn run_builtin(name: &str) -> SharedRun {
    let scenario = builtin(name).unwrap();
    let mat = scenario.materialize().unwrap();
    let start = Instant::now();
    let traj = integrate(&mat.system, &mat.y0, &spec_of(&scenario)).unwrap();
    let seconds = start.elapsed().as_secs_f64();
    SharedRun { mat, traj, seconds }
}

fn sine_mean() -> &'static SharedRun {
    static RUN: OnceLock<SharedRun> = OnceLock::new();
    RUN.get_or_init(|| run_builtin("sine-mean"))
}

fn sine_subcritical() -> &'static SharedRun {
    static RUN: OnceLock<SharedRun> = OnceLock::new();
    RUN.get_or_init(|| run_builtin("sine-subcritical"))
}

fn verdict(number: u32, label: &str, pass: bool, detail: String) {
    let status = if pass { "PASS" } else { "FAIL" };
    println!("ACCEPTANCE {number} ({label}): {status} [{detail}]");
    assert!(pass, "acceptance check {number} ({label}) failed: {detail}");
}

#[test]
fn check_01_log_mass_conservation() {
    let run = sine_mean();
    let drift = run.traj.gamma_drift_max();
    let pass = drift <= 1e-10 && run.seconds < 5.0;
    verdict(
        1,
        "conserved log-mass on the reference run",
        pass,
        format!("max drift {drift:.3e} (budget 1e-10), runtime {:.2}s (budget 5s)", run.seconds),
    );
}

#[test]
fn check_02_lyapunov_monotonicity() {
    let run = sine_mean();
    let times = run.traj.times();
    let va: Vec<f64> = run.traj.records().iter().map(|r| r.v_a).collect();
    let vb: Vec<f64> = run.traj.records().iter().map(|r| r.v_b).collect();
    let ra = monotonicity(times, &va, MONOTONICITY_SLACK).unwrap();
    let rb = monotonicity(times, &vb, MONOTONICITY_SLACK).unwrap();
    let pass = ra.violations == 0 && rb.violations == 0;
    verdict(
        2,
        "Lyapunov monotonicity",
        pass,
        format!(
            "V_a violations {}, worst rise {:.2e}; V_b violations {}, worst rise {:.2e}",
            ra.violations, ra.worst_excess, rb.violations, rb.worst_excess
        ),
    );
}

#[test]
fn check_03_approach_to_the_ray() {
    let run = sine_mean();
    let last = run.traj.final_record();
    let mut dist_defect = 0.0_f64;
    for r in run.traj.records() {
        let defect = (r.dist_m - r.v_b.sqrt()).abs() / (1.0 + r.dist_m);
        dist_defect = dist_defect.max(defect);
    }
    let pass = last.v_b < 1e-8 && dist_defect <= 1e-15;
    verdict(
        3,
        "approach to the equilibrium ray",
        pass,
        format!(
            "final V_b {:.3e} (budget 1e-8), distance consistency defect {:.1e}",
            last.v_b, dist_defect
        ),
    );
}

#[test]
fn check_04_equilibrium_prediction() {
    let run = sine_mean();
    let sol = match solve_alpha(&run.mat.system, &run.mat.y0).unwrap() {
        AlphaOutcome::Root(s) => s,
        other => panic!("prediction must have a root, got {other:?}"),
    };
    let beta_gap = (run.traj.final_record().beta - sol.alpha).abs();
    let pass =
        sol.residual.abs() < 1e-12 && (sol.alpha - 1.25).abs() < 1e-3 && beta_gap < 1e-6;
    verdict(
        4,
        "equilibrium prediction",
        pass,
        format!(
            "alpha {:.9} (continuum 1.25), solver residual {:.1e}, |beta(T) - alpha| {:.2e}",
            sol.alpha,
            sol.residual.abs(),
            beta_gap
        ),
    );
}

#[test]
fn check_05_entropy_energy_identity() {
    let run = sine_mean();
    let defect_at = |h: f64| {
        let spec = IntegrateSpec {
            t_final: 5.0,
            step: h,
            stride: 1,
            method: run.traj.method(),
        };
        let traj = integrate(&run.mat.system, &run.mat.y0, &spec).unwrap();
        let peak_vb = traj
            .records()
            .iter()
            .map(|r| r.v_b)
            .fold(0.0, f64::max);
        entropy_identity_check(&traj).unwrap().max_defect / (1.0 + peak_vb)
    };
    let fine = defect_at(1e-3);
    let coarse = defect_at(2e-3);
    let ratio = coarse / fine;
    let pass = fine < 1e-5 && (3.0..5.0).contains(&ratio);
    verdict(
        5,
        "entropy-energy identity",
        pass,
        format!(
            "relative defect {fine:.3e} at spacing 1e-3 (budget 1e-5), halving ratio {ratio:.2} (expected near 4)"
        ),
    );
}

#[test]
fn check_06_comparison_principle() {
    let run = sine_mean();
    let scenario = builtin("sine-mean").unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(20260816);
    let mut total_violations = 0usize;
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..20 {
        let z0: Field = run
            .mat
            .system
            .partition()
            .field(
                run.mat
                    .y0
                    .values()
                    .iter()
                    .map(|&y| y * rng.gen_range(0.3..1.0))
                    .collect(),
            )
            .unwrap();
        let lower = integrate(&run.mat.system, &z0, &spec_of(&scenario)).unwrap();
        let report = comparison_check(&run.traj, &lower, 1e-10).unwrap();
        total_violations += report.violations;
        worst = worst.max(report.worst_shortfall);
    }
    let pass = total_violations == 0;
    verdict(
        6,
        "comparison principle",
        pass,
        format!("20 ordered pairs, violations {total_violations}, worst shortfall {worst:.2e}"),
    );
}

#[test]
fn check_07_a_priori_envelope() {
    let mut worst_excess = f64::NEG_INFINITY;
    let mut checked_runs = 0;
    let mut check_traj = |mat: &Materialized, y0: &Field, traj: &Trajectory| {
        let k = k_bound(&mat.system, y0).unwrap();
        let env: Vec<f64> = mat
            .system
            .forcing()
            .values()
            .iter()
            .zip(mat.system.projector().direction().values())
            .map(|(&ai, &ni)| ai + k * ni)
            .collect();
        for s in traj.states() {
            for (&yi, &ei) in s.values().iter().zip(&env) {
                worst_excess = worst_excess.max(yi - ei);
            }
        }
        checked_runs += 1;
    };

    let mean = sine_mean();
    check_traj(&mean.mat, &mean.mat.y0, &mean.traj);
    let sub = sine_subcritical();
    check_traj(&sub.mat, &sub.mat.y0, &sub.traj);
    let flat = run_builtin("flat");
    check_traj(&flat.mat, &flat.mat.y0, &flat.traj);

    // the ordered-pair builtin carries a second state; bound both runs
    let scenario = builtin("ordered-pair").unwrap();
    let mat = scenario.materialize().unwrap();
    let upper = integrate(&mat.system, &mat.y0, &spec_of(&scenario)).unwrap();
    check_traj(&mat, &mat.y0, &upper);
    let z0 = mat.z0.clone().unwrap();
    let lower = integrate(&mat.system, &z0, &spec_of(&scenario)).unwrap();
    check_traj(&mat, &z0, &lower);

    let pass = worst_excess <= 1e-9;
    verdict(
        7,
        "a-priori envelope",
        pass,
        format!("{checked_runs} runs, worst excess over a + K n: {worst_excess:.2e} (budget 1e-9)"),
    );
}

#[test]
fn check_08_independent_oracle_agreement() {
    let run = sine_mean();
    let sys = &run.mat.system;
    let picard = picard_reference(sys, &run.mat.y0, 0.5, 4096, 1e-12).unwrap();
    let spec = IntegrateSpec {
        t_final: 0.5,
        step: 1e-3,
        stride: 500,
        method: run.traj.method(),
    };
    let rk = integrate(sys, &run.mat.y0, &spec).unwrap();
    let gap = sys
        .partition()
        .norm_linf(&picard.sub(rk.final_state()).unwrap())
        .unwrap();
    let pass = gap < 1e-8;
    verdict(
        8,
        "independent oracle agreement",
        pass,
        format!("fixed-point vs log-step L-inf gap {gap:.3e} (budget 1e-8)"),
    );
}

#[test]
fn check_09_projector_algebra() {
    let run = sine_mean();
    let p = run.mat.system.partition();
    let pr = run.mat.system.projector();
    let m = p.len();
    let mut rng = ChaCha8Rng::seed_from_u64(0xA19EB);
    let mut worst_rel = 0.0_f64;
    let mut bound_ok = true;
    for _ in 0..100 {
        let u = p
            .field((0..m).map(|_| rng.gen_range(-5.0..5.0)).collect())
            .unwrap();
        let v = p
            .field((0..m).map(|_| rng.gen_range(-5.0..5.0)).collect())
            .unwrap();
        let pu = pr.project(&u).unwrap();
        let ppu = pr.project(&pu).unwrap();
        let nu = p.norm_l2(&u).unwrap();
        let nv = p.norm_l2(&v).unwrap();

        let idem = p.norm_l2(&ppu.sub(&pu).unwrap()).unwrap() / (1.0 + nu);
        let sym = (p.inner(&pu, &v).unwrap() - p.inner(&u, &pr.project(&v).unwrap()).unwrap())
            .abs()
            / (1.0 + nu * nv);
        let orth = p.inner(&pu, pr.direction()).unwrap().abs() / (1.0 + nu);
        worst_rel = worst_rel.max(idem).max(sym).max(orth);

        let linf = p.norm_linf(&pu).unwrap();
        if linf > pr.linf_bound(p).unwrap() * p.norm_linf(&u).unwrap() {
            bound_ok = false;
        }
    }
    let pass = worst_rel <= 1e-13 && bound_ok;
    verdict(
        9,
        "projector algebra",
        pass,
        format!(
            "100 fields, worst relative defect {worst_rel:.2e} (budget 1e-13), sup-norm bound {}",
            if bound_ok { "never exceeded" } else { "EXCEEDED" }
        ),
    );
}

#[test]
fn check_10_near_edge_resolution_trend() {
    let mut gaps = Vec::new();
    let mut minima = Vec::new();
    for m in [128usize, 512, 2048] {
        let (gap, min_y) = if m == 512 {
            let shared = sine_subcritical();
            let sol = match solve_alpha(&shared.mat.system, &shared.mat.y0).unwrap() {
                AlphaOutcome::Root(s) => s,
                other => panic!("m = {m}: expected a root, got {other:?}"),
            };
            (sol.gap, shared.traj.final_record().min_y)
        } else {
            let scenario = Scenario {
                m,
                ..builtin("sine-subcritical").unwrap()
            };
            let mat = scenario.materialize().unwrap();
            let sol = match solve_alpha(&mat.system, &mat.y0).unwrap() {
                AlphaOutcome::Root(s) => s,
                other => panic!("m = {m}: expected a root, got {other:?}"),
            };
            let traj = integrate(&mat.system, &mat.y0, &spec_of(&scenario)).unwrap();
            (sol.gap, traj.final_record().min_y)
        };
        gaps.push(gap);
        minima.push(min_y);
    }
    let gaps_decrease = gaps.windows(2).all(|w| w[1] < w[0]);
    let minima_decrease = minima.windows(2).all(|w| w[1] < w[0]);
    let pass = gaps.iter().all(|&g| g > 0.0) && gaps_decrease && minima_decrease;
    verdict(
        10,
        "near-edge resolution trend",
        pass,
        format!(
            "gaps {:.2e}/{:.2e}/{:.2e} decreasing: {gaps_decrease}; final minima {:.4e}/{:.4e}/{:.4e} decreasing: {minima_decrease}",
            gaps[0], gaps[1], gaps[2], minima[0], minima[1], minima[2]
        ),
    );
}

#[test]
fn check_11_one_step_order() {
    let run = sine_mean();
    let sys = &run.mat.system;
    let y0 = &run.mat.y0;
    let defect = |h: f64| {
        let coarse = step_log(sys, y0, h).unwrap();
        let mut fine = y0.clone();
        for _ in 0..16 {
            fine = step_log(sys, &fine, h / 16.0).unwrap();
        }
        sys.partition()
            .norm_linf(&coarse.sub(&fine).unwrap())
            .unwrap()
    };
    let hs = [0.2, 0.1, 0.05, 0.025];
    let defects: Vec<f64> = hs.iter().map(|&h| defect(h)).collect();
    let orders: Vec<f64> = defects
        .windows(2)
        .map(|w| (w[0] / w[1]).log2())
        .collect();
    let pass = orders.iter().all(|&o| o >= 3.7);
    verdict(
        11,
        "fourth-order one-step accuracy",
        pass,
        format!(
            "observed orders {:.2}/{:.2}/{:.2} over three halvings (budget 3.7)",
            orders[0], orders[1], orders[2]
        ),
    );
}
