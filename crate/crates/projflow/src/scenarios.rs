//! Packaged simulation setups: a named catalog of builtin runs and a small
//! declarative description that materializes into a ready-to-run system.
//!
//! A scenario always lives on the uniform unit-interval partition; fields
//! are described symbolically so the same setup reproduces bit-for-bit at
//! any resolution.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::dynamics::{Method, System, DEFAULT_STEP, DEFAULT_STRIDE};
use crate::equilibrium;
use crate::measure::{sin_two_pi, Field, Partition};
use crate::projection::Projector;
use crate::{Error, Result};

/// Default cell count for builtin scenarios and configs that omit one.
pub const DEFAULT_M: usize = 512;

/// Default horizon for the builtin runs.
pub const DEFAULT_T_FINAL: f64 = 100.0;

/// Names accepted by [`builtin`].
pub const BUILTIN_NAMES: [&str; 4] = ["sine-mean", "sine-subcritical", "flat", "ordered-pair"];

/// Symbolic description of one field on the uniform partition.
#[derive(Clone, Debug, PartialEq)]
pub enum FieldSpec {
    /// The same value in every cell.
    Constant(f64),
    /// `sin(2 pi x)` sampled at cell centers; mean-zero for even cell counts.
    SinTwoPiX,
    /// Explicit per-cell values, length must match the cell count.
    Explicit(Vec<f64>),
    /// `a + K n` built from the materialized system; initial states only.
    APlusKN(f64),
}

impl FieldSpec {
    fn realize(&self, partition: &Partition) -> Result<Field> {
        match self {
            FieldSpec::Constant(c) => partition.constant(*c),
            FieldSpec::SinTwoPiX => {
                let centers = partition.centers().ok_or(Error::InvalidArgument {
                    what: "sampled fields need cell centers",
                })?;
                partition.field(centers.iter().map(|&x| sin_two_pi(x)).collect())
            }
            FieldSpec::Explicit(vals) => {
                if vals.len() != partition.len() {
                    return Err(Error::LengthMismatch {
                        expected: partition.len(),
                        got: vals.len(),
                    });
                }
                partition.field(vals.clone())
            }
            FieldSpec::APlusKN(_) => Err(Error::InvalidArgument {
                what: "a ray offset is only meaningful for initial states",
            }),
        }
    }
}

/// A complete, reproducible run description.
#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub name: String,
    /// Cells in the uniform unit-interval partition.
    pub m: usize,
    pub a: FieldSpec,
    pub n: FieldSpec,
    pub y0: FieldSpec,
    /// Optional second initial state for ordering comparisons.
    pub z0: Option<FieldSpec>,
    pub t_final: f64,
    pub step: f64,
    pub stride: usize,
    pub method: Method,
}

/// A scenario turned into concrete simulation inputs.
pub struct Materialized {
    pub system: System,
    pub y0: Field,
    pub z0: Option<Field>,
}

impl Scenario {
    /// Builds the partition, projector, projected forcing, and initial
    /// state(s). Initial states must be strictly positive.
    pub fn materialize(&self) -> Result<Materialized> {
        let partition = Partition::uniform_unit_interval(self.m)?;
        let n_raw = self.n.realize(&partition)?;
        let projector = Projector::new(&partition, &n_raw)?;
        let a_raw = self.a.realize(&partition)?;
        let system = System::new(partition, projector, &a_raw)?;

        let y0 = materialize_state(&system, &self.y0, "initial state")?;
        let z0 = match &self.z0 {
            Some(spec) => Some(materialize_state(&system, spec, "comparison state")?),
            None => None,
        };
        Ok(Materialized { system, y0, z0 })
    }
}

fn materialize_state(system: &System, spec: &FieldSpec, what: &'static str) -> Result<Field> {
    let state = match spec {
        FieldSpec::APlusKN(k) => equilibrium::equilibrium_field(system, *k)?,
        other => other.realize(system.partition())?,
    };
    let vals = state.values();
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
    Ok(state)
}

/// Looks up a builtin scenario by name; see [`BUILTIN_NAMES`].
///
/// - `sine-mean`: mean-zero sine forcing, unit initial state. The conserved
///   log-mass is exactly zero and the run settles on the ray.
/// - `sine-subcritical`: same forcing, initial level 0.4. The predicted ray
///   parameter hugs the cone edge and the state develops a deep minimum.
/// - `flat`: zero forcing, constant initial state; exactly stationary.
/// - `ordered-pair`: the sine-mean run plus a second state at half the
///   level, for cellwise ordering checks.
pub fn builtin(name: &str) -> Result<Scenario> {
    let base = Scenario {
        name: name.to_string(),
        m: DEFAULT_M,
        a: FieldSpec::SinTwoPiX,
        n: FieldSpec::Constant(1.0),
        y0: FieldSpec::Constant(1.0),
        z0: None,
        t_final: DEFAULT_T_FINAL,
        step: DEFAULT_STEP,
        stride: DEFAULT_STRIDE,
        method: Method::LogRk4,
    };
    match name {
        "sine-mean" => Ok(base),
        "sine-subcritical" => Ok(Scenario {
            y0: FieldSpec::Constant(0.4),
            ..base
        }),
        "flat" => Ok(Scenario {
            a: FieldSpec::Constant(0.0),
            y0: FieldSpec::Constant(2.0),
            ..base
        }),
        "ordered-pair" => Ok(Scenario {
            z0: Some(FieldSpec::Constant(0.5)),
            ..base
        }),
        other => Err(Error::UnknownScenario {
            name: other.to_string(),
        }),
    }
}
