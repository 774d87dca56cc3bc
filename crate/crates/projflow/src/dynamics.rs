//! Right-hand side and time integration of `dy/dt = y * P(a - y)`.
//!
//! The primary integrator steps `u = log y` with `du/dt = P(a - exp(u))`,
//! which buys two structural guarantees:
//!
//! - positivity is unconditional: states are reconstructed as `exp(u)`;
//! - the weighted log-mass `Gamma(y) = sum mu_i n_i u_i` is conserved per
//!   stage, because every stage derivative lies in the range of `P` and is
//!   therefore orthogonal to `n` up to roundoff.
//!
//! A direct RK4 on `y` itself is kept as an independent cross-check (no
//! positivity guarantee; loss is flagged in the trajectory metadata), and a
//! Picard fixed-point iteration of the exponential integral form serves as a
//! scheme-independent reference oracle on short horizons.

use alloc::vec;
use alloc::vec::Vec;

use crate::diagnostics::{self, DiagnosticRecord, ReferenceEquilibrium};
use crate::math;
use crate::measure::{Field, Partition};
use crate::projection::Projector;
use crate::{Error, Result};

/// Default step size: resolves the O(1) relaxation times of the builtin
/// scenarios with two orders of headroom.
pub const DEFAULT_STEP: f64 = 0.01;

/// Default record stride (steps between stored records).
pub const DEFAULT_STRIDE: usize = 10;

/// Fixed-point sweep budget for [`picard_reference`].
pub const MAX_PICARD_SWEEPS: usize = 200;

/// `exp` stays a positive normal number for arguments in this open interval;
/// log-states outside it abort the run instead of silently producing 0/inf.
const EXP_ARG_MIN: f64 = -745.0;
const EXP_ARG_MAX: f64 = 709.0;

/// The state bundle `(partition, P, a)` defining one flow.
///
/// The forcing is projected once at construction, so `P(a) = a` holds to
/// roundoff for the stored field.
#[derive(Clone, Debug)]
pub struct System {
    partition: Partition,
    projector: Projector,
    forcing: Field,
}

impl System {
    pub fn new(partition: Partition, projector: Projector, forcing: &Field) -> Result<Self> {
        if projector.partition_id() != partition.id() {
            return Err(Error::PartitionMismatch);
        }
        let forcing = projector.project(forcing)?;
        Ok(System {
            partition,
            projector,
            forcing,
        })
    }

    pub fn partition(&self) -> &Partition {
        &self.partition
    }

    pub fn projector(&self) -> &Projector {
        &self.projector
    }

    /// The projected forcing field `a`.
    pub fn forcing(&self) -> &Field {
        &self.forcing
    }

    pub fn len(&self) -> usize {
        self.partition.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    fn check(&self, y: &Field) -> Result<()> {
        if y.partition_id() != self.partition.id() {
            return Err(Error::PartitionMismatch);
        }
        Ok(())
    }
}

/// Time-stepping scheme.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    /// RK4 on the log-state; positivity exact, log-mass conserved per stage.
    LogRk4,
    /// RK4 on the state itself; cross-check only, may leave the cone.
    DirectRk4,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::LogRk4 => "log_rk4",
            Method::DirectRk4 => "direct_rk4",
        }
    }
}

impl core::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "log_rk4" => Ok(Method::LogRk4),
            "direct_rk4" => Ok(Method::DirectRk4),
            _ => Err(Error::InvalidArgument {
                what: "method must be log_rk4 or direct_rk4",
            }),
        }
    }
}

/// Fixed-step integration plan.
#[derive(Clone, Copy, Debug)]
pub struct IntegrateSpec {
    /// Final time `T > 0`.
    pub t_final: f64,
    /// Step size `h`, `0 < h <= T`. The last step is shortened to land on `T`.
    pub step: f64,
    /// Record every this-many steps (the final step is always recorded).
    pub stride: usize,
    pub method: Method,
}

impl IntegrateSpec {
    pub fn new(t_final: f64) -> Self {
        IntegrateSpec {
            t_final,
            step: DEFAULT_STEP,
            stride: DEFAULT_STRIDE,
            method: Method::LogRk4,
        }
    }
}

/// A recorded run: times, states, and per-record diagnostics, all in step.
#[derive(Clone, Debug)]
pub struct Trajectory {
    times: Vec<f64>,
    states: Vec<Field>,
    records: Vec<DiagnosticRecord>,
    method: Method,
    step: f64,
    stride: usize,
    positivity_lost_at: Option<f64>,
}

impl Trajectory {
    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn states(&self) -> &[Field] {
        &self.states
    }

    pub fn records(&self) -> &[DiagnosticRecord] {
        &self.records
    }

    pub fn method(&self) -> Method {
        self.method
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn stride(&self) -> usize {
        self.stride
    }

    /// First time at which some cell was non-positive (direct scheme only;
    /// the log scheme cannot lose positivity).
    pub fn positivity_lost_at(&self) -> Option<f64> {
        self.positivity_lost_at
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        false // integrate always records the initial state
    }

    pub fn final_time(&self) -> f64 {
        *self.times.last().expect("trajectory is never empty")
    }

    pub fn final_state(&self) -> &Field {
        self.states.last().expect("trajectory is never empty")
    }

    pub fn final_record(&self) -> &DiagnosticRecord {
        self.records.last().expect("trajectory is never empty")
    }

    /// `max_k |Gamma_k - Gamma_0|` over the records (NaN if any record's
    /// Gamma is undefined, e.g. after positivity loss).
    pub fn gamma_drift_max(&self) -> f64 {
        let g0 = self.records[0].gamma;
        if self.records.iter().any(|r| r.gamma.is_nan()) {
            return f64::NAN;
        }
        self.records
            .iter()
            .map(|r| (r.gamma - g0).abs())
            .fold(0.0, f64::max)
    }
}

/// `rhs(y)_i = y_i * [P(a - y)]_i`.
pub fn rhs(sys: &System, y: &Field) -> Result<Field> {
    sys.check(y)?;
    let mut z: Vec<f64> = sys
        .forcing
        .values()
        .iter()
        .zip(y.values())
        .map(|(&ai, &yi)| ai - yi)
        .collect();
    sys.projector.project_slice(&mut z);
    for (zi, &yi) in z.iter_mut().zip(y.values()) {
        *zi *= yi;
    }
    y.same_partition(z)
}

fn require_positive(y: &Field, what: &'static str) -> Result<()> {
    let vals = y.values();
    let bad = vals.iter().filter(|v| !(**v > 0.0)).count();
    if bad > 0 {
        let index = vals.iter().position(|v| !(*v > 0.0)).unwrap();
        return Err(Error::ConeViolation {
            what,
            index,
            value: vals[index],
            count: bad,
        });
    }
    Ok(())
}

/// Scratch buffers for the log-space stepper.
struct LogWork {
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    u_stage: Vec<f64>,
}

impl LogWork {
    fn new(m: usize) -> Self {
        LogWork {
            k1: vec![0.0; m],
            k2: vec![0.0; m],
            k3: vec![0.0; m],
            k4: vec![0.0; m],
            u_stage: vec![0.0; m],
        }
    }
}

/// `k = P(a - exp(u))`, failing if any `exp` argument leaves the normal range.
fn log_stage(sys: &System, u: &[f64], k: &mut [f64]) -> Result<()> {
    let a = sys.forcing.values();
    for ((ki, &ui), &ai) in k.iter_mut().zip(u).zip(a) {
        if !(EXP_ARG_MIN < ui && ui < EXP_ARG_MAX) {
            return Err(Error::ExpOverflow { peak_log: ui });
        }
        *ki = ai - math::exp(ui);
    }
    sys.projector.project_slice(k);
    Ok(())
}

/// One RK4 step of `du/dt = P(a - exp(u))`, in place.
fn log_step_in_place(sys: &System, u: &mut [f64], h: f64, w: &mut LogWork) -> Result<()> {
    log_stage(sys, u, &mut w.k1)?;
    for i in 0..u.len() {
        w.u_stage[i] = u[i] + 0.5 * h * w.k1[i];
    }
    log_stage(sys, &w.u_stage, &mut w.k2)?;
    for i in 0..u.len() {
        w.u_stage[i] = u[i] + 0.5 * h * w.k2[i];
    }
    log_stage(sys, &w.u_stage, &mut w.k3)?;
    for i in 0..u.len() {
        w.u_stage[i] = u[i] + h * w.k3[i];
    }
    log_stage(sys, &w.u_stage, &mut w.k4)?;
    let c = h / 6.0;
    for i in 0..u.len() {
        u[i] += c * (w.k1[i] + 2.0 * w.k2[i] + 2.0 * w.k3[i] + w.k4[i]);
    }
    Ok(())
}

fn exp_field(like: &Field, u: &[f64]) -> Result<Field> {
    let mut y = vec![0.0; u.len()];
    for (yi, &ui) in y.iter_mut().zip(u) {
        if !(EXP_ARG_MIN < ui && ui < EXP_ARG_MAX) {
            return Err(Error::ExpOverflow { peak_log: ui });
        }
        *yi = math::exp(ui);
    }
    like.same_partition(y)
}

/// One positivity-exact RK4 step on the log-state; returns `exp(u_new)`.
pub fn step_log(sys: &System, y: &Field, h: f64) -> Result<Field> {
    sys.check(y)?;
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::InvalidArgument {
            what: "step size must be positive and finite",
        });
    }
    require_positive(y, "state passed to step_log")?;
    let mut u: Vec<f64> = y.values().iter().map(|&v| math::ln(v)).collect();
    let mut w = LogWork::new(u.len());
    log_step_in_place(sys, &mut u, h, &mut w)?;
    exp_field(y, &u)
}

/// `f = y * P(a - y)` for the direct scheme.
fn direct_stage(sys: &System, y: &[f64], k: &mut [f64]) {
    let a = sys.forcing.values();
    for ((ki, &yi), &ai) in k.iter_mut().zip(y).zip(a) {
        *ki = ai - yi;
    }
    sys.projector.project_slice(k);
    for (ki, &yi) in k.iter_mut().zip(y) {
        *ki *= yi;
    }
}

fn direct_step_in_place(sys: &System, y: &mut [f64], h: f64, w: &mut LogWork) {
    direct_stage(sys, y, &mut w.k1);
    for i in 0..y.len() {
        w.u_stage[i] = y[i] + 0.5 * h * w.k1[i];
    }
    direct_stage(sys, &w.u_stage, &mut w.k2);
    for i in 0..y.len() {
        w.u_stage[i] = y[i] + 0.5 * h * w.k2[i];
    }
    direct_stage(sys, &w.u_stage, &mut w.k3);
    for i in 0..y.len() {
        w.u_stage[i] = y[i] + h * w.k3[i];
    }
    direct_stage(sys, &w.u_stage, &mut w.k4);
    let c = h / 6.0;
    for i in 0..y.len() {
        y[i] += c * (w.k1[i] + 2.0 * w.k2[i] + 2.0 * w.k3[i] + w.k4[i]);
    }
}

/// Number of fixed steps to reach `t_final`, last step shortened to land
/// exactly on it.
fn plan_steps(t_final: f64, step: f64) -> Result<usize> {
    let ratio = t_final / step;
    let rounded = math::round(ratio);
    let n = if (ratio - rounded).abs() < 1e-6 {
        rounded
    } else {
        math::ceil(ratio)
    };
    if !(n >= 1.0) || n > 1e8 {
        return Err(Error::InvalidArgument {
            what: "step count out of range (check T and h)",
        });
    }
    Ok(n as usize)
}

/// Integrates from `y0` to `spec.t_final`, recording at step 0, every
/// `stride`-th step, and the final step.
pub fn integrate(sys: &System, y0: &Field, spec: &IntegrateSpec) -> Result<Trajectory> {
    sys.check(y0)?;
    require_positive(y0, "initial state")?;
    if !(spec.t_final > 0.0 && spec.t_final.is_finite()) {
        return Err(Error::InvalidArgument {
            what: "final time must be positive and finite",
        });
    }
    if !(spec.step > 0.0 && spec.step <= spec.t_final) {
        return Err(Error::InvalidArgument {
            what: "step size must satisfy 0 < h <= T",
        });
    }
    if spec.stride == 0 {
        return Err(Error::InvalidArgument {
            what: "stride must be at least 1",
        });
    }
    let n_steps = plan_steps(spec.t_final, spec.step)?;
    let reference = ReferenceEquilibrium::standard(sys)?;
    let m = sys.len();

    let mut times = Vec::new();
    let mut states = Vec::new();
    let mut records = Vec::new();
    let mut positivity_lost_at = None;

    let record =
        |t: f64, y: Field, times: &mut Vec<f64>, states: &mut Vec<Field>, records: &mut Vec<DiagnosticRecord>| -> Result<()> {
            records.push(diagnostics::record(sys, &reference, t, &y)?);
            times.push(t);
            states.push(y);
            Ok(())
        };

    record(0.0, y0.clone(), &mut times, &mut states, &mut records)?;

    let mut w = LogWork::new(m);
    match spec.method {
        Method::LogRk4 => {
            let mut u: Vec<f64> = y0.values().iter().map(|&v| math::ln(v)).collect();
            for k in 1..=n_steps {
                let (t, h) = step_time(k, n_steps, spec);
                log_step_in_place(sys, &mut u, h, &mut w)
                    .map_err(|e| at_time(e, t))?;
                if k % spec.stride == 0 || k == n_steps {
                    let y = exp_field(y0, &u).map_err(|e| at_time(e, t))?;
                    record(t, y, &mut times, &mut states, &mut records)?;
                }
            }
        }
        Method::DirectRk4 => {
            let mut y: Vec<f64> = y0.values().to_vec();
            for k in 1..=n_steps {
                let (t, h) = step_time(k, n_steps, spec);
                direct_step_in_place(sys, &mut y, h, &mut w);
                if y.iter().any(|v| !v.is_finite()) {
                    return Err(Error::NonFiniteState { time: t });
                }
                if positivity_lost_at.is_none() && y.iter().any(|v| !(*v > 0.0)) {
                    positivity_lost_at = Some(t);
                }
                if k % spec.stride == 0 || k == n_steps {
                    let yf = y0.same_partition(y.clone())?;
                    record(t, yf, &mut times, &mut states, &mut records)?;
                }
            }
        }
    }

    Ok(Trajectory {
        times,
        states,
        records,
        method: spec.method,
        step: spec.step,
        stride: spec.stride,
        positivity_lost_at,
    })
}

/// Time reached after step `k` and the size of that step.
fn step_time(k: usize, n_steps: usize, spec: &IntegrateSpec) -> (f64, f64) {
    if k == n_steps {
        let before = (n_steps - 1) as f64 * spec.step;
        (spec.t_final, spec.t_final - before)
    } else {
        (k as f64 * spec.step, spec.step)
    }
}

fn at_time(e: Error, t: f64) -> Error {
    match e {
        Error::ExpOverflow { peak_log } => Error::StepOverflow { time: t, peak_log },
        other => other,
    }
}

/// Solves the exponential integral form `y(t) = y0 * exp(int_0^t P(a - y))`
/// by fixed-point sweeps with trapezoid quadrature on `quad_steps` intervals;
/// returns the state at `t_final`.
///
/// Independent of the RK steppers, hence usable as a reference oracle on
/// horizons where the iteration contracts.
pub fn picard_reference(
    sys: &System,
    y0: &Field,
    t_final: f64,
    quad_steps: usize,
    tol: f64,
) -> Result<Field> {
    sys.check(y0)?;
    require_positive(y0, "initial state")?;
    if !(t_final >= 0.0 && t_final.is_finite()) {
        return Err(Error::InvalidArgument {
            what: "final time must be nonnegative and finite",
        });
    }
    if quad_steps == 0 {
        return Err(Error::InvalidArgument {
            what: "quadrature needs at least one interval",
        });
    }
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(Error::InvalidArgument {
            what: "tolerance must be positive and finite",
        });
    }
    if t_final == 0.0 {
        return Ok(y0.clone());
    }

    let m = sys.len();
    let q = quad_steps;
    let dt = t_final / q as f64;
    let y0v = y0.values();
    let a = sys.forcing.values();

    // node-major state table, rows 0..=q
    let mut cur: Vec<f64> = Vec::with_capacity((q + 1) * m);
    for _ in 0..=q {
        cur.extend_from_slice(y0v);
    }
    let mut next = vec![0.0; (q + 1) * m];
    let mut g_prev = vec![0.0; m];
    let mut g_cur = vec![0.0; m];
    let mut integral = vec![0.0; m];

    let mut residual = f64::INFINITY;
    for _sweep in 0..MAX_PICARD_SWEEPS {
        for (gi, (&ai, &yi)) in g_prev.iter_mut().zip(a.iter().zip(&cur[..m])) {
            *gi = ai - yi;
        }
        sys.projector.project_slice(&mut g_prev);
        next[..m].copy_from_slice(y0v);
        integral.iter_mut().for_each(|v| *v = 0.0);
        residual = 0.0;

        for j in 1..=q {
            let row = &cur[j * m..(j + 1) * m];
            for (gi, (&ai, &yi)) in g_cur.iter_mut().zip(a.iter().zip(row)) {
                *gi = ai - yi;
            }
            sys.projector.project_slice(&mut g_cur);
            let out = &mut next[j * m..(j + 1) * m];
            for i in 0..m {
                integral[i] += 0.5 * dt * (g_prev[i] + g_cur[i]);
                if !(EXP_ARG_MIN < integral[i] && integral[i] < EXP_ARG_MAX) {
                    return Err(Error::ExpOverflow {
                        peak_log: integral[i],
                    });
                }
                out[i] = y0v[i] * math::exp(integral[i]);
                residual = residual.max((out[i] - row[i]).abs());
            }
            core::mem::swap(&mut g_prev, &mut g_cur);
        }

        core::mem::swap(&mut cur, &mut next);
        if residual <= tol {
            return y0.same_partition(cur[q * m..].to_vec());
        }
    }
    Err(Error::PicardDiverged {
        sweeps: MAX_PICARD_SWEEPS,
        residual,
    })
}
