//! Prox operators, projections, Moreau-envelope smoothing and set distances.
//!
//! Every smoothing quantity goes through the prox identity
//! `grad g_beta(z) = (z - prox_{beta g}(z)) / beta`; convex conjugates are
//! never formed.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ScalarProxDescriptor {
    /// Indicator of `{b}`.
    IndicatorPoint(f64),
    /// Indicator of `[lo, hi]`; either bound may be infinite.
    IndicatorInterval { lo: f64, hi: f64 },
    /// Indicator of `(-inf, b]`.
    IndicatorHalfline(f64),
    /// `lambda * |z|`.
    AbsValue(f64),
}

#[inline]
fn soft_threshold(z: f64, t: f64) -> f64 {
    if z > t {
        z - t
    } else if z < -t {
        z + t
    } else {
        0.0
    }
}

fn check_beta(beta: f64) -> Result<()> {
    if beta > 0.0 && beta.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("beta must be positive, got {beta}")))
    }
}

impl ScalarProxDescriptor {
    pub fn validate(&self) -> Result<()> {
        match *self {
            ScalarProxDescriptor::IndicatorPoint(b) | ScalarProxDescriptor::IndicatorHalfline(b) if !b.is_finite() => {
                Err(Error::InvalidParameter("indicator parameter must be finite".into()))
            }
            ScalarProxDescriptor::IndicatorInterval { lo, hi } if !(lo <= hi) => {
                Err(Error::InvalidParameter(format!("interval needs lo <= hi, got [{lo}, {hi}]")))
            }
            ScalarProxDescriptor::AbsValue(l) if !(l >= 0.0 && l.is_finite()) => {
                Err(Error::InvalidParameter(format!("lambda must be >= 0, got {l}")))
            }
            _ => Ok(()),
        }
    }

    pub fn is_indicator(&self) -> bool {
        !matches!(self, ScalarProxDescriptor::AbsValue(_))
    }

    /// Projection onto the set (indicators) or soft-threshold (absolute value).
    #[inline]
    pub fn prox_unchecked(&self, z: f64, beta: f64) -> f64 {
        match *self {
            ScalarProxDescriptor::IndicatorPoint(b) => b,
            ScalarProxDescriptor::IndicatorInterval { lo, hi } => z.clamp(lo, hi),
            ScalarProxDescriptor::IndicatorHalfline(b) => z.min(b),
            ScalarProxDescriptor::AbsValue(l) => soft_threshold(z, beta * l),
        }
    }

    /// `g(z)`; `+inf` outside the set for indicators.
    pub fn value(&self, z: f64) -> f64 {
        match *self {
            ScalarProxDescriptor::AbsValue(l) => l * z.abs(),
            _ => {
                if self.distance(z) == 0.0 {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
        }
    }

    /// Distance to the set; zero for the absolute value.
    pub fn distance(&self, z: f64) -> f64 {
        match *self {
            ScalarProxDescriptor::AbsValue(_) => 0.0,
            _ => (z - self.prox_unchecked(z, 1.0)).abs(),
        }
    }

    /// Moreau envelope `g(p) + (z - p)^2 / (2 beta)` with `p = prox(z)`.
    pub fn smoothed_value(&self, z: f64, beta: f64) -> Result<f64> {
        check_beta(beta)?;
        let p = self.prox_unchecked(z, beta);
        let base = match *self {
            ScalarProxDescriptor::AbsValue(l) => l * p.abs(),
            _ => 0.0,
        };
        Ok(base + (z - p) * (z - p) / (2.0 * beta))
    }
}

pub fn scalar_prox(desc: &ScalarProxDescriptor, z: f64, beta: f64) -> Result<f64> {
    check_beta(beta)?;
    Ok(desc.prox_unchecked(z, beta))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum VectorProxDescriptor {
    /// Elementwise `lo <= z_i <= hi`.
    Box { lo: f64, hi: f64 },
    /// `lambda * ||z||_1`.
    L1(f64),
    /// `sum_j g_j(z_j)`.
    ProductOfScalars(Vec<ScalarProxDescriptor>),
    /// Indicator of `{b}`.
    IndicatorAffinePoint(Vec<f64>),
}

impl VectorProxDescriptor {
    pub fn validate(&self) -> Result<()> {
        match self {
            VectorProxDescriptor::Box { lo, hi } => {
                ScalarProxDescriptor::IndicatorInterval { lo: *lo, hi: *hi }.validate()
            }
            VectorProxDescriptor::L1(l) => ScalarProxDescriptor::AbsValue(*l).validate(),
            VectorProxDescriptor::ProductOfScalars(c) => c.iter().try_for_each(|c| c.validate()),
            VectorProxDescriptor::IndicatorAffinePoint(b) => {
                if b.iter().all(|v| v.is_finite()) {
                    Ok(())
                } else {
                    Err(Error::NonFinite("affine point"))
                }
            }
        }
    }

    /// Length constraint implied by the descriptor, if any.
    pub fn fixed_len(&self) -> Option<usize> {
        match self {
            VectorProxDescriptor::ProductOfScalars(c) => Some(c.len()),
            VectorProxDescriptor::IndicatorAffinePoint(b) => Some(b.len()),
            _ => None,
        }
    }

    pub fn check_len(&self, len: usize) -> Result<()> {
        match self.fixed_len() {
            Some(expected) if expected != len => Err(Error::DimensionMismatch { expected, got: len }),
            _ => Ok(()),
        }
    }

    pub fn is_indicator(&self) -> bool {
        match self {
            VectorProxDescriptor::Box { .. } | VectorProxDescriptor::IndicatorAffinePoint(_) => true,
            VectorProxDescriptor::L1(_) => false,
            VectorProxDescriptor::ProductOfScalars(c) => c.iter().all(|c| c.is_indicator()),
        }
    }

    fn prox_into(&self, z: &[f64], beta: f64, out: &mut [f64]) {
        match self {
            VectorProxDescriptor::Box { lo, hi } => {
                for (o, &v) in out.iter_mut().zip(z) {
                    *o = v.clamp(*lo, *hi);
                }
            }
            VectorProxDescriptor::L1(l) => {
                let t = beta * l;
                for (o, &v) in out.iter_mut().zip(z) {
                    *o = soft_threshold(v, t);
                }
            }
            VectorProxDescriptor::ProductOfScalars(c) => {
                for ((o, g), &v) in out.iter_mut().zip(c).zip(z) {
                    *o = g.prox_unchecked(v, beta);
                }
            }
            VectorProxDescriptor::IndicatorAffinePoint(b) => out.copy_from_slice(b),
        }
    }

    /// Continuous part of the value (indicator parts omitted).
    pub fn continuous_value(&self, z: &[f64]) -> f64 {
        match self {
            VectorProxDescriptor::L1(l) => l * z.iter().map(|v| v.abs()).sum::<f64>(),
            VectorProxDescriptor::ProductOfScalars(c) => c
                .iter()
                .zip(z)
                .filter(|(g, _)| !g.is_indicator())
                .map(|(g, &v)| g.value(v))
                .sum(),
            _ => 0.0,
        }
    }

    /// Distance to the indicator part of the set.
    pub fn indicator_distance(&self, z: &[f64]) -> f64 {
        let sq: f64 = match self {
            VectorProxDescriptor::Box { lo, hi } => z.iter().map(|v| (v - v.clamp(*lo, *hi)).powi(2)).sum(),
            VectorProxDescriptor::L1(_) => 0.0,
            VectorProxDescriptor::ProductOfScalars(c) => c.iter().zip(z).map(|(g, &v)| g.distance(v).powi(2)).sum(),
            VectorProxDescriptor::IndicatorAffinePoint(b) => z.iter().zip(b).map(|(v, b)| (v - b).powi(2)).sum(),
        };
        sq.sqrt()
    }

    /// Exact value; `+inf` when an indicator part is violated.
    pub fn value(&self, z: &[f64]) -> f64 {
        if self.indicator_distance(z) > 0.0 {
            f64::INFINITY
        } else {
            self.continuous_value(z)
        }
    }
}

pub fn vector_prox(desc: &VectorProxDescriptor, z: &[f64], beta: f64) -> Result<Vec<f64>> {
    check_beta(beta)?;
    desc.check_len(z.len())?;
    let mut out = vec![0.0; z.len()];
    desc.prox_into(z, beta, &mut out);
    Ok(out)
}

/// `(z - prox_{beta g}(z)) / beta`.
pub fn smoothed_grad(desc: &VectorProxDescriptor, z: &[f64], beta: f64) -> Result<Vec<f64>> {
    let p = vector_prox(desc, z, beta)?;
    Ok(z.iter().zip(&p).map(|(zi, pi)| (zi - pi) / beta).collect())
}

/// Moreau envelope `g(p) + ||z - p||^2 / (2 beta)`; for indicators this is
/// `dist(z, K)^2 / (2 beta)`.
pub fn smoothed_value(desc: &VectorProxDescriptor, z: &[f64], beta: f64) -> Result<f64> {
    let p = vector_prox(desc, z, beta)?;
    let sq: f64 = z.iter().zip(&p).map(|(zi, pi)| (zi - pi).powi(2)).sum();
    Ok(desc.continuous_value(&p) + sq / (2.0 * beta))
}

/// Euclidean distance to the set of an indicator descriptor.
pub fn dist_to_set(desc: &VectorProxDescriptor, z: &[f64]) -> Result<f64> {
    if !desc.is_indicator() {
        return Err(Error::NotIndicator(match desc {
            VectorProxDescriptor::L1(_) => "L1",
            _ => "product with a non-indicator component",
        }));
    }
    desc.check_len(z.len())?;
    Ok(desc.indicator_distance(z))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use ScalarProxDescriptor as S;
    use VectorProxDescriptor as V;

    #[test]
    fn scalar_prox_examples() {
        let interval = S::IndicatorInterval { lo: 1.0, hi: 5.0 };
        assert_eq!(scalar_prox(&interval, 7.0, 0.3).unwrap(), 5.0);
        assert_eq!(scalar_prox(&S::AbsValue(1.0), 0.5, 1.0).unwrap(), 0.0);
        assert!((scalar_prox(&S::AbsValue(0.1), -2.0, 1.0).unwrap() + 1.9).abs() < 1e-15);
        assert_eq!(scalar_prox(&S::IndicatorPoint(2.5), -9.0, 1.0).unwrap(), 2.5);
        assert_eq!(scalar_prox(&S::IndicatorHalfline(0.0), 3.0, 1.0).unwrap(), 0.0);
        assert_eq!(scalar_prox(&S::IndicatorHalfline(0.0), -3.0, 1.0).unwrap(), -3.0);
    }

    #[test]
    fn soft_threshold_tie_goes_to_zero() {
        assert_eq!(scalar_prox(&S::AbsValue(2.0), 1.0, 0.5).unwrap(), 0.0);
        assert_eq!(scalar_prox(&S::AbsValue(2.0), -1.0, 0.5).unwrap(), 0.0);
    }

    #[test]
    fn non_positive_beta_is_rejected() {
        assert!(scalar_prox(&S::AbsValue(1.0), 1.0, 0.0).is_err());
        assert!(vector_prox(&V::L1(1.0), &[1.0], -1.0).is_err());
        assert!(smoothed_value(&V::L1(1.0), &[1.0], 0.0).is_err());
    }

    #[test]
    fn vector_prox_examples() {
        assert_eq!(
            vector_prox(&V::Box { lo: 1.0, hi: 5.0 }, &[0.0, 3.0, 9.0], 1.0).unwrap(),
            vec![1.0, 3.0, 5.0]
        );
        assert_eq!(
            vector_prox(&V::IndicatorAffinePoint(vec![1.0, -2.0]), &[4.0, 4.0], 3.0).unwrap(),
            vec![1.0, -2.0]
        );
        assert_eq!(vector_prox(&V::L1(2.0), &[3.0, -1.0], 0.5).unwrap(), vec![2.0, 0.0]);
        assert!(vector_prox(&V::IndicatorAffinePoint(vec![1.0]), &[1.0, 2.0], 1.0).is_err());
    }

    #[test]
    fn smoothed_grad_examples() {
        let boxed = V::Box { lo: 1.0, hi: 5.0 };
        assert_eq!(smoothed_grad(&boxed, &[2.0, 4.5], 0.7).unwrap(), vec![0.0, 0.0]);
        assert_eq!(smoothed_grad(&boxed, &[7.0], 2.0).unwrap(), vec![1.0]);
        let g = smoothed_grad(&V::L1(0.1), &[-2.0], 1.0).unwrap();
        // central difference of the Huber envelope, step 1e-6
        let h = 1e-6;
        let fd = (smoothed_value(&V::L1(0.1), &[-2.0 + h], 1.0).unwrap()
            - smoothed_value(&V::L1(0.1), &[-2.0 - h], 1.0).unwrap())
            / (2.0 * h);
        assert!((fd + 0.1).abs() < 1e-8);
        assert!((g[0] + 0.1).abs() < 1e-15);
    }

    #[test]
    fn smoothed_value_examples() {
        assert_eq!(smoothed_value(&V::Box { lo: 1.0, hi: 5.0 }, &[3.0], 1.0).unwrap(), 0.0);
        assert_eq!(smoothed_value(&V::Box { lo: 1.0, hi: 5.0 }, &[7.0], 2.0).unwrap(), 1.0);
        // brute force: min_y |y| + (y - 0.5)^2 / 2 over a fine grid
        let brute = (0..=200_000)
            .map(|i| -1.0 + i as f64 * 1e-5)
            .map(|y: f64| y.abs() + (y - 0.5).powi(2) / 2.0)
            .fold(f64::INFINITY, f64::min);
        let v = smoothed_value(&V::L1(1.0), &[0.5], 1.0).unwrap();
        assert!((brute - 0.125).abs() < 1e-9);
        assert!((v - 0.125).abs() < 1e-15);
    }

    #[test]
    fn dist_examples() {
        assert_eq!(dist_to_set(&V::Box { lo: 1.0, hi: 5.0 }, &[2.0, 3.0]).unwrap(), 0.0);
        assert!((dist_to_set(&V::Box { lo: 1.0, hi: 5.0 }, &[0.0, 6.0]).unwrap() - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(dist_to_set(&V::IndicatorAffinePoint(vec![1.0, 1.0]), &[1.0, 4.0]).unwrap(), 3.0);
        assert!(matches!(dist_to_set(&V::L1(1.0), &[1.0]), Err(Error::NotIndicator(_))));
        let mixed = V::ProductOfScalars(vec![S::IndicatorPoint(0.0), S::AbsValue(1.0)]);
        assert!(dist_to_set(&mixed, &[0.0, 1.0]).is_err());
    }

    #[test]
    fn invalid_descriptors() {
        assert!(S::IndicatorInterval { lo: 2.0, hi: 1.0 }.validate().is_err());
        assert!(S::AbsValue(-1.0).validate().is_err());
        assert!(V::L1(-0.5).validate().is_err());
    }

    fn catalog(len: usize) -> Vec<V> {
        vec![
            V::Box { lo: -0.5, hi: 0.8 },
            V::L1(0.7),
            V::IndicatorAffinePoint((0..len).map(|i| 0.1 * i as f64).collect()),
            V::ProductOfScalars(
                (0..len)
                    .map(|i| match i % 4 {
                        0 => S::IndicatorPoint(0.3),
                        1 => S::IndicatorInterval { lo: 0.0, hi: f64::INFINITY },
                        2 => S::IndicatorHalfline(-0.2),
                        _ => S::AbsValue(0.4),
                    })
                    .collect(),
            ),
        ]
    }

    #[test]
    fn prox_is_non_expansive() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for desc in catalog(5) {
            for _ in 0..1000 {
                let a: Vec<f64> = (0..5).map(|_| rng.random_range(-3.0..3.0)).collect();
                let b: Vec<f64> = (0..5).map(|_| rng.random_range(-3.0..3.0)).collect();
                let beta = rng.random_range(0.05..4.0);
                let pa = vector_prox(&desc, &a, beta).unwrap();
                let pb = vector_prox(&desc, &b, beta).unwrap();
                assert!(l2_diff(&pa, &pb) <= l2_diff(&a, &b) + 1e-12);
            }
        }
    }

    #[test]
    fn smoothed_grad_is_one_over_beta_lipschitz() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for desc in catalog(6) {
            for _ in 0..500 {
                let a: Vec<f64> = (0..6).map(|_| rng.random_range(-3.0..3.0)).collect();
                let b: Vec<f64> = (0..6).map(|_| rng.random_range(-3.0..3.0)).collect();
                let beta = rng.random_range(0.05..4.0);
                let ga = smoothed_grad(&desc, &a, beta).unwrap();
                let gb = smoothed_grad(&desc, &b, beta).unwrap();
                assert!(l2_diff(&ga, &gb) <= l2_diff(&a, &b) / beta * (1.0 + 1e-12) + 1e-12);
            }
        }
    }

    #[test]
    fn smoothing_sandwich_for_l1() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let lambda = 0.3;
        let len = 7;
        let lg = lambda * (len as f64).sqrt();
        let desc = V::L1(lambda);
        for _ in 0..1000 {
            let z: Vec<f64> = (0..len).map(|_| rng.random_range(-2.0..2.0)).collect();
            let beta = rng.random_range(0.01..5.0);
            let gb = smoothed_value(&desc, &z, beta).unwrap();
            let g = desc.value(&z);
            assert!(gb <= g + 1e-12);
            assert!(g <= gb + beta / 2.0 * lg * lg + 1e-12);
        }
    }

    #[test]
    fn abs_value_prox_scaling_identity() {
        // prox_{g}(z) = lambda * prox_{g / lambda}(z / lambda) for g = mu|.|
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        for _ in 0..1000 {
            let mu = rng.random_range(0.0..3.0);
            let lambda = rng.random_range(0.1..5.0);
            let z = rng.random_range(-10.0..10.0);
            let direct = S::AbsValue(mu).prox_unchecked(z, 1.0);
            let scaled = lambda * S::AbsValue(mu / lambda).prox_unchecked(z / lambda, 1.0);
            assert!((direct - scaled).abs() <= 1e-12 * (1.0 + z.abs()));
        }
    }

    fn l2_diff(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
    }
}
