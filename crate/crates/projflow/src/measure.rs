//! The discretized measure space: weighted cell partitions and the
//! piecewise-constant fields that live on them.
//!
//! A [`Partition`] is a finite list of cells with strictly positive weights
//! (plus optional cell centers for sampling closed-form functions on [0,1]).
//! A [`Field`] holds one value per cell and carries the identity tag of the
//! partition it was built on; every binary operation checks that tag, so
//! fields from different partitions never silently mix.
//!
//! All arithmetic is f64: the conservation checks downstream target drifts
//! near 1e-12, out of reach for single precision.

use alloc::vec::Vec;
use core::sync::atomic::{AtomicU64, Ordering};

use crate::math;
use crate::{Error, Result};

static NEXT_PARTITION_ID: AtomicU64 = AtomicU64::new(1);

/// Identity tag of a partition. Clones of a partition share the tag; two
/// separately constructed partitions never do, even with equal weights.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct PartitionId(u64);

/// A finite measure space: `m` cells with weights `mu_i > 0` and finite total
/// mass, optionally annotated with cell centers in [0,1].
#[derive(Clone, Debug)]
pub struct Partition {
    id: PartitionId,
    weights: Vec<f64>,
    centers: Option<Vec<f64>>,
    mass: f64,
}

/// A simple function on a partition: one finite value per cell.
#[derive(Clone, Debug, PartialEq)]
pub struct Field {
    values: Vec<f64>,
    pid: PartitionId,
}

fn first_non_finite(what: &'static str, values: &[f64]) -> Result<()> {
    for (index, &value) in values.iter().enumerate() {
        if !value.is_finite() {
            return Err(Error::BadValue { what, index, value });
        }
    }
    Ok(())
}

impl Partition {
    /// Builds a partition from positive weights.
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        Self::build(weights, None)
    }

    /// Builds a partition with cell centers (for sampling closed forms).
    pub fn with_centers(weights: Vec<f64>, centers: Vec<f64>) -> Result<Self> {
        Self::build(weights, Some(centers))
    }

    /// Uniform partition of [0,1]: `m` cells of weight `1/m` centered at
    /// midpoints `(i + 0.5)/m`.
    pub fn uniform_unit_interval(m: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::EmptyPartition);
        }
        let w = 1.0 / m as f64;
        let weights = alloc::vec![w; m];
        let centers = (0..m).map(|i| (i as f64 + 0.5) * w).collect();
        Self::build(weights, Some(centers))
    }

    fn build(weights: Vec<f64>, centers: Option<Vec<f64>>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::EmptyPartition);
        }
        for (index, &value) in weights.iter().enumerate() {
            if !value.is_finite() || value <= 0.0 {
                return Err(Error::BadValue {
                    what: "weight",
                    index,
                    value,
                });
            }
        }
        if let Some(c) = &centers {
            if c.len() != weights.len() {
                return Err(Error::LengthMismatch {
                    expected: weights.len(),
                    got: c.len(),
                });
            }
            first_non_finite("center", c)?;
        }
        let mass: f64 = weights.iter().sum();
        if !mass.is_finite() {
            return Err(Error::BadValue {
                what: "total mass",
                index: 0,
                value: mass,
            });
        }
        let id = PartitionId(NEXT_PARTITION_ID.fetch_add(1, Ordering::Relaxed));
        Ok(Partition {
            id,
            weights,
            centers,
            mass,
        })
    }

    pub fn id(&self) -> PartitionId {
        self.id
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        false // construction rejects empty partitions
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn centers(&self) -> Option<&[f64]> {
        self.centers.as_deref()
    }

    /// Total mass `sum_i mu_i`.
    pub fn total_mass(&self) -> f64 {
        self.mass
    }

    /// Wraps values as a field on this partition, validating length and
    /// finiteness.
    pub fn field(&self, values: Vec<f64>) -> Result<Field> {
        if values.len() != self.len() {
            return Err(Error::LengthMismatch {
                expected: self.len(),
                got: values.len(),
            });
        }
        first_non_finite("field value", &values)?;
        Ok(Field {
            values,
            pid: self.id,
        })
    }

    /// The constant field `c` on this partition.
    pub fn constant(&self, c: f64) -> Result<Field> {
        self.field(alloc::vec![c; self.len()])
    }

    pub(crate) fn check(&self, pid: PartitionId) -> Result<()> {
        if pid != self.id {
            return Err(Error::PartitionMismatch);
        }
        Ok(())
    }

    /// Weighted inner product `sum_i mu_i u_i v_i`.
    pub fn inner(&self, u: &Field, v: &Field) -> Result<f64> {
        self.check(u.pid)?;
        self.check(v.pid)?;
        let mut acc = 0.0;
        for ((&w, &a), &b) in self.weights.iter().zip(&u.values).zip(&v.values) {
            acc += w * a * b;
        }
        Ok(acc)
    }

    /// Weighted L2 norm `sqrt(sum_i mu_i u_i^2)`.
    pub fn norm_l2(&self, u: &Field) -> Result<f64> {
        self.check(u.pid)?;
        let mut acc = 0.0;
        for (&w, &a) in self.weights.iter().zip(&u.values) {
            acc += w * a * a;
        }
        Ok(math::sqrt(acc))
    }

    /// Sup norm `max_i |u_i|` (weights do not enter, the tag is still checked).
    pub fn norm_linf(&self, u: &Field) -> Result<f64> {
        self.check(u.pid)?;
        Ok(u.values.iter().fold(0.0, |m, &a| m.max(a.abs())))
    }
}

impl Field {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        false // fields only come from non-empty partitions
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn partition_id(&self) -> PartitionId {
        self.pid
    }

    /// On a partition the essential infimum is the minimum over cells.
    pub fn ess_inf(&self) -> f64 {
        self.values.iter().fold(f64::INFINITY, |m, &a| m.min(a))
    }

    /// Maximum over cells.
    pub fn max_value(&self) -> f64 {
        self.values.iter().fold(f64::NEG_INFINITY, |m, &a| m.max(a))
    }

    fn check(&self, other: &Field) -> Result<()> {
        if self.pid != other.pid {
            return Err(Error::PartitionMismatch);
        }
        Ok(())
    }

    fn rewrap(&self, values: Vec<f64>) -> Result<Field> {
        first_non_finite("field value", &values)?;
        Ok(Field {
            values,
            pid: self.pid,
        })
    }

    /// Componentwise sum.
    pub fn add(&self, other: &Field) -> Result<Field> {
        self.check(other)?;
        self.rewrap(
            self.values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a + b)
                .collect(),
        )
    }

    /// Componentwise difference.
    pub fn sub(&self, other: &Field) -> Result<Field> {
        self.check(other)?;
        self.rewrap(
            self.values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a - b)
                .collect(),
        )
    }

    /// Componentwise product.
    pub fn mul(&self, other: &Field) -> Result<Field> {
        self.check(other)?;
        self.rewrap(
            self.values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a * b)
                .collect(),
        )
    }

    /// Scalar multiple.
    pub fn scale(&self, c: f64) -> Result<Field> {
        self.rewrap(self.values.iter().map(|a| a * c).collect())
    }

    /// Componentwise map; the result stays on the same partition.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Field> {
        self.rewrap(self.values.iter().map(|&a| f(a)).collect())
    }

    /// Wraps raw values with this field's partition tag (crate-internal: the
    /// hot paths work on slices and re-enter the checked world through here).
    pub(crate) fn same_partition(&self, values: Vec<f64>) -> Result<Field> {
        if values.len() != self.values.len() {
            return Err(Error::LengthMismatch {
                expected: self.values.len(),
                got: values.len(),
            });
        }
        self.rewrap(values)
    }
}

/// Samples a closed-form function on [0,1] by the midpoint rule: uniform
/// partition with `mu_i = 1/m`, values `f((i + 0.5)/m)`.
///
/// Midpoints are symmetric about 0.5, so integrands that are odd about 0.5
/// (like `sin 2 pi x`) sample to an exactly mean-zero field for even `m`.
pub fn sample(f: impl Fn(f64) -> f64, m: usize) -> Result<(Partition, Field)> {
    let partition = Partition::uniform_unit_interval(m)?;
    let values: Vec<f64> = partition
        .centers()
        .expect("uniform partition has centers")
        .iter()
        .map(|&x| f(x))
        .collect();
    let field = partition.field(values)?;
    Ok((partition, field))
}

/// `sin(2 pi x)`, the canonical forcing profile of the sine scenarios.
pub fn sin_two_pi(x: f64) -> f64 {
    math::sin(core::f64::consts::TAU * x)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_cell() -> Partition {
        Partition::new(alloc::vec![0.5, 0.5]).unwrap()
    }

    #[test]
    fn inner_direct_arithmetic() {
        let p = two_cell();
        let u = p.field(alloc::vec![1.0, 2.0]).unwrap();
        let v = p.field(alloc::vec![3.0, 4.0]).unwrap();
        assert_eq!(p.inner(&u, &v).unwrap(), 5.5);
    }

    #[test]
    fn inner_symmetric_and_positive() {
        let p = two_cell();
        let u = p.field(alloc::vec![1.5, -2.0]).unwrap();
        let v = p.field(alloc::vec![0.25, 4.0]).unwrap();
        assert_eq!(p.inner(&u, &v).unwrap(), p.inner(&v, &u).unwrap());
        assert!(p.inner(&u, &u).unwrap() > 0.0);
        let zero = p.constant(0.0).unwrap();
        assert_eq!(p.inner(&zero, &zero).unwrap(), 0.0);
    }

    #[test]
    fn norms_direct_arithmetic() {
        let p = Partition::new(alloc::vec![1.0, 1.0]).unwrap();
        let u = p.field(alloc::vec![3.0, -4.0]).unwrap();
        assert_eq!(p.norm_l2(&u).unwrap(), 5.0);
        assert_eq!(p.norm_linf(&u).unwrap(), 4.0);
        let zero = p.constant(0.0).unwrap();
        assert_eq!(p.norm_l2(&zero).unwrap(), 0.0);
        assert_eq!(p.norm_linf(&zero).unwrap(), 0.0);
    }

    #[test]
    fn norm_squared_is_self_inner() {
        let p = Partition::new(alloc::vec![0.3, 1.2, 0.05]).unwrap();
        let u = p.field(alloc::vec![1.7, -0.3, 9.1]).unwrap();
        let n2 = p.norm_l2(&u).unwrap();
        let ip = p.inner(&u, &u).unwrap();
        assert!(
            (n2 * n2 - ip).abs() <= 1e-15 * ip,
            "norm^2 = {} but inner = {}",
            n2 * n2,
            ip
        );
    }

    #[test]
    fn hoelder_consistency() {
        // deterministic pseudo-random values; tolerance is a few ulps
        let mut state = 0x243F_6A88_85A3_08D3_u64;
        let mut next = move || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64 * 4.0 - 2.0
        };
        let p = Partition::new(alloc::vec![0.1, 0.4, 0.2, 0.3]).unwrap();
        for _ in 0..200 {
            let u = p.field((0..4).map(|_| next()).collect()).unwrap();
            let v = p.field((0..4).map(|_| next()).collect()).unwrap();
            let lhs = p.inner(&u, &v).unwrap().abs();
            let rhs = p.norm_l2(&u).unwrap() * p.norm_l2(&v).unwrap();
            assert!(
                lhs <= rhs * (1.0 + 1e-14),
                "Hoelder violated: |inner| = {lhs} > {rhs}"
            );
        }
    }

    #[test]
    fn ess_inf_is_min() {
        let p = Partition::new(alloc::vec![1.0, 1.0, 1.0]).unwrap();
        let u = p.field(alloc::vec![0.2, 1.0, 5.0]).unwrap();
        assert_eq!(u.ess_inf(), 0.2);
        let p2 = Partition::new(alloc::vec![1.0, 1.0]).unwrap();
        let v = p2.field(alloc::vec![1e-9, 1.0]).unwrap();
        assert!(v.ess_inf() > 0.0, "tiny positive cell is still in the cone");
    }

    #[test]
    fn sample_constant_one() {
        let (p, f) = sample(|_| 1.0, 4).unwrap();
        assert_eq!(p.weights(), &[0.25, 0.25, 0.25, 0.25]);
        assert_eq!(f.values(), &[1.0, 1.0, 1.0, 1.0]);
        assert_eq!(p.centers().unwrap(), &[0.125, 0.375, 0.625, 0.875]);
    }

    #[test]
    fn sample_sine_is_mean_zero_for_even_m() {
        for m in [128usize, 512, 2048] {
            let (p, f) = sample(sin_two_pi, m).unwrap();
            let one = p.constant(1.0).unwrap();
            let mean = p.inner(&f, &one).unwrap();
            assert!(
                mean.abs() < 1e-14,
                "midpoint sum of sin 2 pi x at m={m} is {mean:e}"
            );
        }
    }

    #[test]
    fn sample_sine_min_stays_above_minus_one() {
        // no midpoint of the 512-cell grid lands on x = 0.75
        let (_, f) = sample(sin_two_pi, 512).unwrap();
        let min = f.ess_inf();
        assert!(min > -1.0, "min sample = {min}");
        assert!(min < -0.999, "grid should get close to the trough: {min}");
    }

    #[test]
    fn sample_positive_function_stays_in_cone() {
        let (_, f) = sample(|x| 0.5 + x * x, 64).unwrap();
        assert!(f.ess_inf() >= 0.5);
    }

    #[test]
    fn construction_rejects_bad_input() {
        assert!(matches!(
            Partition::new(alloc::vec![]),
            Err(Error::EmptyPartition)
        ));
        assert!(matches!(
            Partition::new(alloc::vec![1.0, 0.0]),
            Err(Error::BadValue { index: 1, .. })
        ));
        assert!(matches!(
            Partition::new(alloc::vec![1.0, f64::NAN]),
            Err(Error::BadValue { index: 1, .. })
        ));
        assert!(matches!(
            Partition::uniform_unit_interval(0),
            Err(Error::EmptyPartition)
        ));
        let p = two_cell();
        assert!(matches!(
            p.field(alloc::vec![1.0]),
            Err(Error::LengthMismatch {
                expected: 2,
                got: 1
            })
        ));
        assert!(matches!(
            p.field(alloc::vec![1.0, f64::INFINITY]),
            Err(Error::BadValue { index: 1, .. })
        ));
    }

    #[test]
    fn cross_partition_operations_fail() {
        let p = two_cell();
        let q = two_cell(); // same shape, different identity
        let u = p.constant(1.0).unwrap();
        let v = q.constant(1.0).unwrap();
        assert_eq!(p.inner(&u, &v), Err(Error::PartitionMismatch));
        assert_eq!(u.add(&v), Err(Error::PartitionMismatch));
        assert_eq!(q.norm_l2(&u), Err(Error::PartitionMismatch));
    }

    #[test]
    fn clones_share_identity() {
        let p = two_cell();
        let q = p.clone();
        let u = p.constant(2.0).unwrap();
        let v = q.constant(3.0).unwrap();
        assert_eq!(p.inner(&u, &v).unwrap(), 6.0);
    }

    #[test]
    fn field_arithmetic() {
        let p = two_cell();
        let u = p.field(alloc::vec![1.0, 2.0]).unwrap();
        let v = p.field(alloc::vec![3.0, 5.0]).unwrap();
        assert_eq!(u.add(&v).unwrap().values(), &[4.0, 7.0]);
        assert_eq!(v.sub(&u).unwrap().values(), &[2.0, 3.0]);
        assert_eq!(u.mul(&v).unwrap().values(), &[3.0, 10.0]);
        assert_eq!(u.scale(-2.0).unwrap().values(), &[-2.0, -4.0]);
        assert_eq!(u.map(|x| x * x).unwrap().values(), &[1.0, 4.0]);
    }

    #[test]
    fn map_rejects_non_finite_results() {
        let p = two_cell();
        let u = p.field(alloc::vec![1.0, 800.0]).unwrap();
        assert!(matches!(
            u.map(crate::math::exp),
            Err(Error::BadValue { index: 1, .. })
        ));
    }
}
