//! Observables along trajectories: the conserved log-mass, two Lyapunov
//! functionals, and structural checks on recorded runs.
//!
//! `v_a` is a relative-entropy distance to a fixed reference equilibrium
//! `ytilde = a + xi_ref n`; it is bounded below by its value at the
//! reference and decreases along solutions at rate `v_b`, the squared
//! projected residual `||P(y - a)||^2`. Both hit their floor exactly on the
//! equilibrium ray, so `sqrt(v_b)` doubles as a distance to the ray.

use alloc::vec::Vec;

use crate::dynamics::{System, Trajectory};
use crate::equilibrium;
use crate::math;
use crate::measure::{Field, Partition};
use crate::projection::Projector;
use crate::{Error, Result};

/// Default relative slack for [`monotonicity`]: a step may increase by
/// `slack * (1 + |value|)` before it counts as a violation.
pub const MONOTONICITY_SLACK: f64 = 1e-12;

/// One row of trajectory diagnostics. `gamma` and `v_a` are NaN when the
/// state has left the positive cone (possible under the direct scheme only).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DiagnosticRecord {
    pub t: f64,
    pub gamma: f64,
    pub v_a: f64,
    pub v_b: f64,
    pub beta: f64,
    pub min_y: f64,
    pub max_y: f64,
    pub dist_m: f64,
}

/// A fixed point `ytilde = a + xi_ref n` used as the anchor of `v_a`.
#[derive(Clone, Debug)]
pub struct ReferenceEquilibrium {
    xi_ref: f64,
    ytilde: Field,
    floor: f64,
}

impl ReferenceEquilibrium {
    pub fn new(sys: &System, xi_ref: f64) -> Result<Self> {
        let ytilde = equilibrium::equilibrium_field(sys, xi_ref)?;
        let floor = sys
            .partition()
            .weights()
            .iter()
            .zip(ytilde.values())
            .map(|(&w, &v)| w * v)
            .sum();
        Ok(ReferenceEquilibrium {
            xi_ref,
            ytilde,
            floor,
        })
    }

    /// Anchor placed a unit past the cone edge, pushed right for edges far
    /// from zero so the reference state has all cells comfortably positive.
    pub fn standard(sys: &System) -> Result<Self> {
        let xi_min = equilibrium::cone(
            sys.partition(),
            sys.forcing(),
            sys.projector().direction(),
        )?
        .xi_min();
        let xi_ref = (xi_min + 1.0).max(2.0 * xi_min.abs() + 1.0);
        ReferenceEquilibrium::new(sys, xi_ref)
    }

    pub fn xi_ref(&self) -> f64 {
        self.xi_ref
    }

    pub fn ytilde(&self) -> &Field {
        &self.ytilde
    }

    /// Minimum of `v_a`, attained exactly at the reference state.
    pub fn floor(&self) -> f64 {
        self.floor
    }
}

/// Relative entropy `sum_i mu_i ytilde_i (s_i - log s_i)` with
/// `s_i = y_i / ytilde_i`. Requires `y` strictly positive.
pub fn v_a(partition: &Partition, reference: &ReferenceEquilibrium, y: &Field) -> Result<f64> {
    partition.check(reference.ytilde.partition_id())?;
    partition.check(y.partition_id())?;
    let vals = y.values();
    let bad = vals.iter().filter(|v| !(**v > 0.0)).count();
    if bad > 0 {
        let index = vals.iter().position(|v| !(*v > 0.0)).unwrap();
        return Err(Error::ConeViolation {
            what: "entropy argument",
            index,
            value: vals[index],
            count: bad,
        });
    }
    let mut sum = 0.0;
    for ((&w, &yt), &yi) in partition
        .weights()
        .iter()
        .zip(reference.ytilde.values())
        .zip(vals)
    {
        let s = yi / yt;
        sum += w * yt * (s - math::ln(s));
    }
    Ok(sum)
}

/// Squared distance to the equilibrium ray: `||P(y - a)||^2`.
pub fn v_b(sys: &System, y: &Field) -> Result<f64> {
    let q = projected_residual(sys, y)?;
    let mut sum = 0.0;
    for (&w, &qi) in sys.partition().weights().iter().zip(&q) {
        sum += w * qi * qi;
    }
    Ok(sum)
}

/// `d(v_b)/dt = -2 sum_i mu_i y_i [P(y - a)]_i^2` along solutions;
/// nonpositive whenever `y` is, like any trajectory state, positive.
pub fn dissipation_rate(sys: &System, y: &Field) -> Result<f64> {
    let q = projected_residual(sys, y)?;
    let mut sum = 0.0;
    for ((&w, &qi), &yi) in sys.partition().weights().iter().zip(&q).zip(y.values()) {
        sum += w * yi * qi * qi;
    }
    Ok(-2.0 * sum)
}

fn projected_residual(sys: &System, y: &Field) -> Result<Vec<f64>> {
    if y.partition_id() != sys.partition().id() {
        return Err(Error::PartitionMismatch);
    }
    let mut q: Vec<f64> = y
        .values()
        .iter()
        .zip(sys.forcing().values())
        .map(|(&yi, &ai)| yi - ai)
        .collect();
    sys.projector().project_slice(&mut q);
    Ok(q)
}

/// Component of `y` along the direction: `beta(y) = (y, n)`. Converges to
/// the predicted ray parameter on long runs.
pub fn beta(partition: &Partition, projector: &Projector, y: &Field) -> Result<f64> {
    partition.check(projector.partition_id())?;
    projector.coefficient(y)
}

/// Evaluates every observable at one instant.
pub fn record(
    sys: &System,
    reference: &ReferenceEquilibrium,
    t: f64,
    y: &Field,
) -> Result<DiagnosticRecord> {
    if y.partition_id() != sys.partition().id() {
        return Err(Error::PartitionMismatch);
    }
    let min_y = y.ess_inf();
    let max_y = y.max_value();
    let (gamma, va) = if min_y > 0.0 {
        (
            equilibrium::gamma(sys.partition(), sys.projector().direction(), y)?,
            v_a(sys.partition(), reference, y)?,
        )
    } else {
        (f64::NAN, f64::NAN)
    };
    let vb = v_b(sys, y)?;
    Ok(DiagnosticRecord {
        t,
        gamma,
        v_a: va,
        v_b: vb,
        beta: beta(sys.partition(), sys.projector(), y)?,
        min_y,
        max_y,
        dist_m: math::sqrt(vb),
    })
}

/// Outcome of checking `d(v_a)/dt = -v_b` against a recorded run.
#[derive(Clone, Copy, Debug)]
pub struct IdentityReport {
    /// Largest `|centered difference of v_a + v_b|` over interior records;
    /// NaN if any interior window contains an undefined `v_a`.
    pub max_defect: f64,
    pub at_time: f64,
    pub interior_points: usize,
}

/// Verifies the dissipation identity by centered differences on the record
/// grid. Needs at least three records.
pub fn entropy_identity_check(traj: &Trajectory) -> Result<IdentityReport> {
    let times = traj.times();
    let records = traj.records();
    if records.len() < 3 {
        return Err(Error::TooFewRecords {
            got: records.len(),
            need: 3,
        });
    }
    let mut max_defect = 0.0_f64;
    let mut at_time = times[1];
    let mut saw_nan = false;
    for k in 1..records.len() - 1 {
        let dt = times[k + 1] - times[k - 1];
        let slope = (records[k + 1].v_a - records[k - 1].v_a) / dt;
        let defect = (slope + records[k].v_b).abs();
        if defect.is_nan() {
            saw_nan = true;
        } else if defect > max_defect {
            max_defect = defect;
            at_time = times[k];
        }
    }
    Ok(IdentityReport {
        max_defect: if saw_nan { f64::NAN } else { max_defect },
        at_time,
        interior_points: records.len() - 2,
    })
}

/// Outcome of a cellwise ordering comparison between two runs.
#[derive(Clone, Copy, Debug)]
pub struct ComparisonReport {
    /// Records compared (shared time grid length).
    pub records: usize,
    /// Cells at any time where `lower` exceeded `upper` by more than `tol`.
    pub violations: usize,
    /// Largest `lower - upper` seen anywhere (negative when fully ordered).
    pub worst_shortfall: f64,
    pub at_time: f64,
    pub at_cell: usize,
}

/// Checks that `upper` dominates `lower` cellwise at every shared record.
/// The two runs must share the partition and the exact record time grid.
pub fn comparison_check(
    upper: &Trajectory,
    lower: &Trajectory,
    tol: f64,
) -> Result<ComparisonReport> {
    if upper.len() != lower.len() {
        return Err(Error::TrajectoryMismatch {
            reason: "different record counts",
        });
    }
    if upper.times() != lower.times() {
        return Err(Error::TrajectoryMismatch {
            reason: "record times differ",
        });
    }
    if upper.states()[0].partition_id() != lower.states()[0].partition_id() {
        return Err(Error::TrajectoryMismatch {
            reason: "different partitions",
        });
    }
    if !(tol >= 0.0) {
        return Err(Error::InvalidArgument {
            what: "comparison tolerance must be nonnegative",
        });
    }
    let mut violations = 0;
    let mut worst = f64::NEG_INFINITY;
    let mut at_time = upper.times()[0];
    let mut at_cell = 0;
    for ((&t, up), lo) in upper
        .times()
        .iter()
        .zip(upper.states())
        .zip(lower.states())
    {
        for (i, (&ui, &li)) in up.values().iter().zip(lo.values()).enumerate() {
            let shortfall = li - ui;
            if shortfall > worst {
                worst = shortfall;
                at_time = t;
                at_cell = i;
            }
            if shortfall > tol {
                violations += 1;
            }
        }
    }
    Ok(ComparisonReport {
        records: upper.len(),
        violations,
        worst_shortfall: worst,
        at_time,
        at_cell,
    })
}

/// Outcome of a monotone-decrease scan.
#[derive(Clone, Copy, Debug)]
pub struct MonotonicityReport {
    /// Steps where the series rose by more than `slack * (1 + |value|)`.
    pub violations: usize,
    /// Largest raw increase between consecutive entries (0 if none rose).
    pub worst_excess: f64,
    pub at_time: f64,
}

/// Scans a sampled series for increases beyond a relative slack.
pub fn monotonicity(times: &[f64], values: &[f64], slack: f64) -> Result<MonotonicityReport> {
    if times.len() != values.len() {
        return Err(Error::LengthMismatch {
            expected: times.len(),
            got: values.len(),
        });
    }
    if !(slack >= 0.0) {
        return Err(Error::InvalidArgument {
            what: "monotonicity slack must be nonnegative",
        });
    }
    let mut violations = 0;
    let mut worst = 0.0_f64;
    let mut at_time = if times.is_empty() { 0.0 } else { times[0] };
    for k in 0..values.len().saturating_sub(1) {
        let rise = values[k + 1] - values[k];
        if rise > worst {
            worst = rise;
            at_time = times[k + 1];
        }
        if rise > slack * (1.0 + values[k].abs()) {
            violations += 1;
        }
    }
    Ok(MonotonicityReport {
        violations,
        worst_excess: worst,
        at_time,
    })
}
