//! The equilibrium ray `a + xi * n`, the conserved log-mass, and the scalar
//! equation that predicts where a trajectory lands.
//!
//! Along any positive solution the weighted log-mass
//! `Gamma(y) = sum_i mu_i n_i log y_i` is constant, and every admissible
//! equilibrium has the form `a + xi n` with `xi` in the open cone interval
//! `(xi_min, inf)`. Matching the two gives one scalar equation
//! `phi(xi) = Gamma(y0)` with `phi` strictly increasing and concave, so the
//! asymptotic state is determined by a one-dimensional root find.
//!
//! Near the lower edge the root can sit closer to `xi_min` than one ulp of
//! `xi_min` itself, so [`solve_alpha`] works in the gap `delta = xi - xi_min`
//! against clamped cell residuals `r_i = max(0, a_i + xi_min n_i)`. The sum
//! `sum mu_i n_i log(r_i + delta n_i)` evaluates without cancellation down to
//! subnormal gaps, and the returned [`AlphaSolution`] carries `delta`
//! explicitly because `xi_min + delta` may round back to `xi_min`.

use alloc::vec::Vec;

use crate::dynamics::System;
use crate::math;
use crate::measure::{Field, Partition};
use crate::{Error, Result};

/// Relative residual accepted by [`solve_alpha`]:
/// `|phi - target| <= ALPHA_RESIDUAL_TOL * (1 + |target|)`.
pub const ALPHA_RESIDUAL_TOL: f64 = 1e-12;

/// Iteration budget for the damped Newton loop in [`solve_alpha`].
pub const ALPHA_MAX_ITERATIONS: u32 = 100;

/// Smallest gap the solver will probe; roots below it are not representable
/// and are reported as [`Error::SolverFailure`].
const LEFT_EDGE: f64 = 1e-320;

/// Weighted log-mass `sum_i mu_i n_i log y_i`, the conserved quantity of the
/// flow. Requires `y` strictly positive.
pub fn gamma(partition: &Partition, n: &Field, y: &Field) -> Result<f64> {
    partition.check(n.partition_id())?;
    partition.check(y.partition_id())?;
    let vals = y.values();
    let bad = vals.iter().filter(|v| !(**v > 0.0)).count();
    if bad > 0 {
        let index = vals.iter().position(|v| !(*v > 0.0)).unwrap();
        return Err(Error::ConeViolation {
            what: "log-mass argument",
            index,
            value: vals[index],
            count: bad,
        });
    }
    let mut sum = 0.0;
    for ((&w, &ni), &yi) in partition.weights().iter().zip(n.values()).zip(vals) {
        sum += w * ni * math::ln(yi);
    }
    Ok(sum)
}

/// The admissible parameter interval `(xi_min, inf)` of the equilibrium ray.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConeInterval {
    xi_min: f64,
}

impl ConeInterval {
    /// Left edge `max_i (-a_i / n_i)`; excluded from the interval.
    pub fn xi_min(self) -> f64 {
        self.xi_min
    }

    pub fn contains(self, xi: f64) -> bool {
        xi.is_finite() && xi > self.xi_min
    }
}

/// Computes the interval of `xi` for which `a + xi n` is strictly positive.
/// The direction must be strictly positive.
pub fn cone(partition: &Partition, a: &Field, n: &Field) -> Result<ConeInterval> {
    partition.check(a.partition_id())?;
    partition.check(n.partition_id())?;
    let nv = n.values();
    let bad = nv.iter().filter(|v| !(**v > 0.0)).count();
    if bad > 0 {
        let index = nv.iter().position(|v| !(*v > 0.0)).unwrap();
        return Err(Error::ConeViolation {
            what: "cone direction",
            index,
            value: nv[index],
            count: bad,
        });
    }
    let xi_min = a
        .values()
        .iter()
        .zip(nv)
        .map(|(&ai, &ni)| -(ai / ni))
        .fold(f64::NEG_INFINITY, f64::max)
        + 0.0; // normalizes -0.0 from nonnegative forcings
    Ok(ConeInterval { xi_min })
}

fn residuals_at(a: &[f64], n: &[f64], xi: f64) -> Option<Vec<f64>> {
    let mut out = Vec::with_capacity(a.len());
    for (&ai, &ni) in a.iter().zip(n) {
        let v = ai + xi * ni;
        if !(v > 0.0) {
            return None;
        }
        out.push(v);
    }
    Some(out)
}

/// The prediction function `phi(xi) = sum_i mu_i n_i log(a_i + xi n_i)`,
/// strictly increasing and concave on the cone interval.
pub fn phi(partition: &Partition, a: &Field, n: &Field, xi: f64) -> Result<f64> {
    let interval = cone(partition, a, n)?;
    let vals = residuals_at(a.values(), n.values(), xi).ok_or(Error::OutsideCone {
        xi,
        xi_min: interval.xi_min,
    })?;
    let mut sum = 0.0;
    for ((&w, &ni), &vi) in partition.weights().iter().zip(n.values()).zip(&vals) {
        sum += w * ni * math::ln(vi);
    }
    Ok(sum)
}

/// `phi'(xi) = sum_i mu_i n_i^2 / (a_i + xi n_i)`, positive and decreasing.
pub fn phi_prime(partition: &Partition, a: &Field, n: &Field, xi: f64) -> Result<f64> {
    let interval = cone(partition, a, n)?;
    let vals = residuals_at(a.values(), n.values(), xi).ok_or(Error::OutsideCone {
        xi,
        xi_min: interval.xi_min,
    })?;
    let mut sum = 0.0;
    for ((&w, &ni), &vi) in partition.weights().iter().zip(n.values()).zip(&vals) {
        sum += w * ni * ni / vi;
    }
    Ok(sum)
}

/// A solved equilibrium prediction.
///
/// `alpha = xi_min + gap` in exact arithmetic; when the gap is below one ulp
/// of `xi_min` the sum rounds back to `xi_min`, so `gap` is the
/// authoritative coordinate near the edge.
#[derive(Clone, Copy, Debug)]
pub struct AlphaSolution {
    /// Predicted ray parameter.
    pub alpha: f64,
    /// Distance `alpha - xi_min`, resolved in the gap coordinate.
    pub gap: f64,
    /// Signed defect `phi(alpha) - target` at acceptance.
    pub residual: f64,
    /// Newton/bisection evaluations used.
    pub iterations: u32,
    /// Final gap-space bracket around the root.
    pub bracket: (f64, f64),
}

/// Why no admissible equilibrium matches the initial log-mass.
#[derive(Clone, Copy, Debug)]
pub struct NoRootInfo {
    /// The conserved log-mass of the initial state.
    pub target: f64,
    /// Greatest lower bound of the prediction function; targets below it
    /// are unreachable. Finite only when rounding leaves every cell residual
    /// positive at the cone edge.
    pub phi_infimum: f64,
}

#[derive(Clone, Copy, Debug)]
pub enum AlphaOutcome {
    Root(AlphaSolution),
    NoRoot(NoRootInfo),
}

impl AlphaOutcome {
    pub fn root(&self) -> Option<&AlphaSolution> {
        match self {
            AlphaOutcome::Root(s) => Some(s),
            AlphaOutcome::NoRoot(_) => None,
        }
    }
}

/// Predicts the asymptotic ray parameter from the initial state by solving
/// `phi(xi) = Gamma(y0)` for `xi` in the cone interval.
pub fn solve_alpha(sys: &System, y0: &Field) -> Result<AlphaOutcome> {
    let partition = sys.partition();
    let n = sys.projector().direction();
    let target = gamma(partition, n, y0)?;
    let a = sys.forcing().values();
    let nv = n.values();
    let w = partition.weights();
    let xi_min = cone(partition, sys.forcing(), n)?.xi_min();

    // gap-space data: clamped residuals at the edge, and the combined weight
    // of the cells that vanish there (they set the log-slope as gap -> 0)
    let r: Vec<f64> = a
        .iter()
        .zip(nv)
        .map(|(&ai, &ni)| (ai + xi_min * ni).max(0.0))
        .collect();
    let zero_weight: f64 = w
        .iter()
        .zip(nv)
        .zip(&r)
        .filter(|(_, &ri)| ri == 0.0)
        .map(|((&wi, &ni), _)| wi * ni)
        .sum();

    let g = |delta: f64| -> f64 {
        let mut sum = 0.0;
        for ((&wi, &ni), &ri) in w.iter().zip(nv).zip(&r) {
            sum += wi * ni * math::ln(ri + delta * ni);
        }
        sum
    };
    let g_prime = |delta: f64| -> f64 {
        let mut sum = 0.0;
        for ((&wi, &ni), &ri) in w.iter().zip(nv).zip(&r) {
            sum += wi * ni * ni / (ri + delta * ni);
        }
        sum
    };
    let tol = ALPHA_RESIDUAL_TOL * (1.0 + target.abs());
    let accept = |gap: f64, residual: f64, iterations: u32, bracket: (f64, f64)| {
        AlphaOutcome::Root(AlphaSolution {
            alpha: xi_min + gap,
            gap,
            residual,
            iterations,
            bracket,
        })
    };

    // left bracket: walk down until g(lo) <= target
    let scale = 1.0 + xi_min.abs();
    let mut lo = 1e-12 * scale;
    let mut g_lo = g(lo);
    let mut hi = f64::INFINITY;
    let mut g_hi = f64::INFINITY;
    let mut probes: u32 = 0;
    while g_lo > target && probes < 64 {
        probes += 1;
        let next = if zero_weight > 0.0 {
            // the vanishing cells contribute zero_weight * log(delta);
            // jump to where that slope predicts the root, with margin
            (lo * math::exp((target - g_lo) / zero_weight) * 0.1).max(LEFT_EDGE)
        } else {
            (lo * 1e-6).max(LEFT_EDGE)
        };
        if next >= lo {
            break;
        }
        hi = lo;
        g_hi = g_lo;
        lo = next;
        g_lo = g(lo);
    }
    if g_lo > target {
        if g_lo - target <= tol {
            return Ok(accept(lo, g_lo - target, probes, (lo, lo)));
        }
        if zero_weight == 0.0 {
            let infimum = {
                let mut sum = 0.0;
                for ((&wi, &ni), &ri) in w.iter().zip(nv).zip(&r) {
                    sum += wi * ni * math::ln(ri);
                }
                sum
            };
            if target < infimum {
                return Ok(AlphaOutcome::NoRoot(NoRootInfo {
                    target,
                    phi_infimum: infimum,
                }));
            }
        }
        // a root exists in exact arithmetic but sits below the smallest probeable gap
        return Err(Error::SolverFailure {
            iterations: probes,
            residual: g_lo - target,
            bracket: (0.0, lo),
        });
    }

    // right bracket: double until g(hi) >= target
    if !hi.is_finite() {
        hi = (2.0 * lo).max(scale);
        g_hi = g(hi);
        while g_hi < target {
            lo = hi;
            g_lo = g_hi;
            hi *= 2.0;
            if hi > 1e300 {
                return Err(Error::SolverFailure {
                    iterations: probes,
                    residual: target - g_hi,
                    bracket: (lo, hi),
                });
            }
            g_hi = g(hi);
        }
    }

    // Newton from the left, clipped to the bracket; concavity makes the
    // iterates climb monotonically toward the root
    let mut x = lo;
    let mut g_x = g_lo;
    let mut residual = g_x - target;
    for it in 1..=ALPHA_MAX_ITERATIONS {
        residual = g_x - target;
        if residual.abs() <= tol {
            return Ok(accept(x, residual, probes + it, (lo, hi)));
        }
        if g_x < target {
            lo = x;
            g_lo = g_x;
        } else {
            hi = x;
            g_hi = g_x;
        }
        let mut next = x - residual / g_prime(x);
        if !next.is_finite() || next <= lo || next >= hi || next == x {
            // geometric bisection; lo > 0 so the logs are finite
            next = math::exp(0.5 * (math::ln(lo) + math::ln(hi)));
        }
        x = next;
        g_x = g(x);
    }
    let _ = (g_lo, g_hi);
    Err(Error::SolverFailure {
        iterations: probes + ALPHA_MAX_ITERATIONS,
        residual,
        bracket: (lo, hi),
    })
}

/// Smallest `K` with `y0 <= a + K n` cellwise: `max_i (y0_i - a_i) / n_i`.
/// Trajectories started at `y0` stay below this envelope.
pub fn k_bound(sys: &System, y0: &Field) -> Result<f64> {
    sys.partition().check(y0.partition_id())?;
    let vals = y0.values();
    let bad = vals.iter().filter(|v| !(**v > 0.0)).count();
    if bad > 0 {
        let index = vals.iter().position(|v| !(*v > 0.0)).unwrap();
        return Err(Error::ConeViolation {
            what: "envelope argument",
            index,
            value: vals[index],
            count: bad,
        });
    }
    let k = vals
        .iter()
        .zip(sys.forcing().values())
        .zip(sys.projector().direction().values())
        .map(|((&yi, &ai), &ni)| (yi - ai) / ni)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(k)
}

/// The equilibrium state `a + xi n`; errors unless `xi` lies strictly inside
/// the cone interval (including rounding-level grazes of the edge).
pub fn equilibrium_field(sys: &System, xi: f64) -> Result<Field> {
    let interval = cone(sys.partition(), sys.forcing(), sys.projector().direction())?;
    if !interval.contains(xi) {
        return Err(Error::OutsideCone {
            xi,
            xi_min: interval.xi_min(),
        });
    }
    let vals = residuals_at(
        sys.forcing().values(),
        sys.projector().direction().values(),
        xi,
    )
    .ok_or(Error::OutsideCone {
        xi,
        xi_min: interval.xi_min(),
    })?;
    sys.forcing().same_partition(vals)
}
