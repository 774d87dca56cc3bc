//! The rank-deficient orthogonal projection `P` with one-dimensional null
//! space spanned by a strictly positive normalized direction `n`, and its
//! complement `Q = I - P`.
//!
//! `P z = z - (z, n) n` and `Q z = (z, n) n`, applied matrix-free in O(m).
//! Normalization happens once at construction: an exactly unit `n` is what
//! makes `(n, P z)` vanish to roundoff, which downstream turns conservation
//! of the weighted log-mass into a per-stage structural identity.

use alloc::vec::Vec;

use crate::measure::{Field, Partition, PartitionId};
use crate::{Error, Result};

/// Orthogonal projection along a positive unit direction.
#[derive(Clone, Debug)]
pub struct Projector {
    /// Normalized direction spanning the null space, `(n, n) = 1`.
    n: Field,
    /// Cached `mu_i * n_i`, so `(z, n)` is a single fused pass.
    weighted_n: Vec<f64>,
}

impl Projector {
    /// Normalizes `direction` and builds the projector.
    ///
    /// The direction must be strictly positive on every cell; offenders are
    /// reported with the first index and the total count.
    pub fn new(partition: &Partition, direction: &Field) -> Result<Self> {
        if direction.partition_id() != partition.id() {
            return Err(Error::PartitionMismatch);
        }
        let vals = direction.values();
        let bad_count = vals.iter().filter(|v| !(**v > 0.0)).count();
        if bad_count > 0 {
            let index = vals.iter().position(|v| !(*v > 0.0)).unwrap();
            return Err(Error::ConeViolation {
                what: "projector direction",
                index,
                value: vals[index],
                count: bad_count,
            });
        }
        let norm = partition.norm_l2(direction)?;
        if !(norm.is_finite() && norm > 0.0) {
            return Err(Error::DegenerateDirection);
        }
        let n = direction.scale(1.0 / norm)?;
        let weighted_n = partition
            .weights()
            .iter()
            .zip(n.values())
            .map(|(&w, &ni)| w * ni)
            .collect();
        Ok(Projector { n, weighted_n })
    }

    /// The normalized direction `n`.
    pub fn direction(&self) -> &Field {
        &self.n
    }

    pub fn partition_id(&self) -> PartitionId {
        self.n.partition_id()
    }

    fn check(&self, z: &Field) -> Result<()> {
        if z.partition_id() != self.partition_id() {
            return Err(Error::PartitionMismatch);
        }
        Ok(())
    }

    /// The coefficient `(z, n)` of `z` along the direction.
    pub fn coefficient(&self, z: &Field) -> Result<f64> {
        self.check(z)?;
        Ok(self.coefficient_slice(z.values()))
    }

    /// `P z = z - (z, n) n`.
    pub fn project(&self, z: &Field) -> Result<Field> {
        self.check(z)?;
        let mut out = z.values().to_vec();
        self.project_slice(&mut out);
        z.same_partition(out)
    }

    /// `Q z = (z, n) n`.
    pub fn complement(&self, z: &Field) -> Result<Field> {
        self.check(z)?;
        let c = self.coefficient_slice(z.values());
        self.n.scale(c)
    }

    pub(crate) fn coefficient_slice(&self, z: &[f64]) -> f64 {
        let mut acc = 0.0;
        for (&wn, &zi) in self.weighted_n.iter().zip(z) {
            acc += wn * zi;
        }
        acc
    }

    /// In-place `z <- z - (z, n) n`.
    pub(crate) fn project_slice(&self, z: &mut [f64]) {
        let c = self.coefficient_slice(z);
        for (zi, &ni) in z.iter_mut().zip(self.n.values()) {
            *zi -= c * ni;
        }
    }

    /// Sup-norm operator bound of `P`: `1 + mass * ||n||_inf^2`.
    pub fn linf_bound(&self, partition: &Partition) -> Result<f64> {
        let ninf = partition.norm_linf(&self.n)?;
        Ok(1.0 + partition.total_mass() * ninf * ninf)
    }
}
