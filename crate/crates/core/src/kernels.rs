//! Tensor-product kernels over `(x, y)` examples and the empirical maximum
//! mean discrepancy between two windows.
//!
//! The instance kernel is Gaussian, the label kernel is the delta kernel, so
//! two examples only interact when they carry the same binary label.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Anything that can be fed to the example kernel.
pub trait KernelPoint {
    fn features(&self) -> &[f64];
    fn label(&self) -> bool;
}

/// Per-concept restriction `(x, y^i)` of a stream example.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExamplePoint {
    pub x: Arc<[f64]>,
    pub y: bool,
}

impl ExamplePoint {
    pub fn new(x: impl Into<Arc<[f64]>>, y: bool) -> Self {
        ExamplePoint { x: x.into(), y }
    }
}

impl KernelPoint for ExamplePoint {
    fn features(&self) -> &[f64] {
        &self.x
    }

    fn label(&self) -> bool {
        self.y
    }
}

impl<P: KernelPoint> KernelPoint for &P {
    fn features(&self) -> &[f64] {
        (*self).features()
    }

    fn label(&self) -> bool {
        (*self).label()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelConfig {
    bandwidth: f64,
}

impl KernelConfig {
    pub fn new(bandwidth: f64) -> Result<Self> {
        if !(bandwidth > 0.0 && bandwidth.is_finite()) {
            return Err(Error::KernelConfig(format!(
                "bandwidth must be positive and finite, got {bandwidth}"
            )));
        }
        Ok(KernelConfig { bandwidth })
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    #[inline]
    fn eval<P: KernelPoint>(&self, a: &P, b: &P) -> f64 {
        if a.label() != b.label() {
            return 0.0;
        }
        let d2 = squared_distance(a.features(), b.features());
        (-d2 / (2.0 * self.bandwidth * self.bandwidth)).exp()
    }
}

#[inline]
pub fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// `exp(-|x - x'|^2 / (2 sigma^2)) * [y == y']`.
pub fn product_kernel<P: KernelPoint>(a: &P, b: &P, cfg: &KernelConfig) -> Result<f64> {
    check_dims(a.features().len(), b.features().len())?;
    Ok(cfg.eval(a, b))
}

fn check_dims(left: usize, right: usize) -> Result<()> {
    if left != right {
        return Err(Error::DimensionMismatch { left, right });
    }
    Ok(())
}

fn common_dim<P: KernelPoint>(a: &[P], b: &[P]) -> Result<usize> {
    let dim = a.first().or(b.first()).map(|p| p.features().len()).unwrap_or(0);
    for p in a.iter().chain(b) {
        check_dims(dim, p.features().len())?;
    }
    Ok(dim)
}

fn mean_block<P: KernelPoint>(a: &[P], b: &[P], cfg: &KernelConfig) -> f64 {
    let mut sum = 0.0;
    for p in a {
        for q in b {
            sum += cfg.eval(p, q);
        }
    }
    sum / (a.len() * b.len()) as f64
}

/// Biased (V-statistic) estimate of MMD^2 between the two samples. Self
/// pairs are included, which keeps the estimate nonnegative.
pub fn mmd_squared<P: KernelPoint>(a: &[P], b: &[P], cfg: &KernelConfig) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyWindow);
    }
    common_dim(a, b)?;
    let value = mean_block(a, a, cfg) + mean_block(b, b, cfg) - 2.0 * mean_block(a, b, cfg);
    Ok(value.max(0.0))
}

/// Empirical witness function `mean_cur k(z, .) - mean_old k(z, .)`.
pub fn witness_value<P: KernelPoint>(z: &P, old: &[P], cur: &[P], cfg: &KernelConfig) -> f64 {
    let towards = |w: &[P]| w.iter().map(|p| cfg.eval(z, p)).sum::<f64>() / w.len() as f64;
    towards(cur) - towards(old)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Witness<'a, P> {
    pub point: &'a P,
    pub value: f64,
}

/// The `m` current examples with the largest witness value and the `m` old
/// examples with the smallest. `m` larger than a window returns the whole
/// window.
#[allow(clippy::type_complexity)]
pub fn witness_examples<'a, P: KernelPoint>(
    old: &'a [P],
    cur: &'a [P],
    cfg: &KernelConfig,
    m: usize,
) -> Result<(Vec<Witness<'a, P>>, Vec<Witness<'a, P>>)> {
    if m == 0 {
        return Err(Error::InvalidArgument("witness count must be at least 1".into()));
    }
    if old.is_empty() || cur.is_empty() {
        return Err(Error::EmptyWindow);
    }
    common_dim(old, cur)?;
    let score = |w: &'a [P]| -> Vec<Witness<'a, P>> {
        w.iter()
            .map(|p| Witness {
                point: p,
                value: witness_value(p, old, cur, cfg),
            })
            .collect()
    };
    let mut top_old = score(old);
    let mut top_cur = score(cur);
    top_old.sort_by(|a, b| a.value.total_cmp(&b.value));
    top_cur.sort_by(|a, b| b.value.total_cmp(&a.value));
    top_old.truncate(m);
    top_cur.truncate(m);
    Ok((top_old, top_cur))
}

/// Median of pairwise Euclidean distances; falls back to the smallest
/// nonzero distance when the median is zero.
pub fn median_heuristic_bandwidth<V: AsRef<[f64]>>(points: &[V]) -> Result<f64> {
    if points.len() < 2 {
        return Err(Error::InvalidArgument(
            "median heuristic needs at least two points".into(),
        ));
    }
    let dim = points[0].as_ref().len();
    let mut dists = Vec::with_capacity(points.len() * (points.len() - 1) / 2);
    for (i, a) in points.iter().enumerate() {
        check_dims(dim, a.as_ref().len())?;
        for b in &points[i + 1..] {
            dists.push(squared_distance(a.as_ref(), b.as_ref()).sqrt());
        }
    }
    dists.sort_by(f64::total_cmp);
    let n = dists.len();
    let median = if n % 2 == 1 {
        dists[n / 2]
    } else {
        0.5 * (dists[n / 2 - 1] + dists[n / 2])
    };
    if median > 0.0 {
        return Ok(median);
    }
    dists
        .into_iter()
        .find(|&d| d > 0.0)
        .ok_or_else(|| Error::InvalidArgument("all points are identical".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn pt(x: &[f64], y: bool) -> ExamplePoint {
        ExamplePoint::new(x.to_vec(), y)
    }

    #[test]
    fn kernel_identity_and_delta() {
        let cfg = KernelConfig::new(1.3).unwrap();
        let a = pt(&[0.2, 0.7], true);
        assert_relative_eq!(product_kernel(&a, &a, &cfg).unwrap(), 1.0);
        let b = pt(&[0.2, 0.7], false);
        assert_eq!(product_kernel(&a, &b, &cfg).unwrap(), 0.0);
    }

    #[test]
    fn kernel_at_sqrt2_sigma_is_e_inverse() {
        let sigma = 0.8;
        let cfg = KernelConfig::new(sigma).unwrap();
        let a = pt(&[0.0], true);
        let b = pt(&[sigma * 2f64.sqrt()], true);
        assert_relative_eq!(
            product_kernel(&a, &b, &cfg).unwrap(),
            0.36787944117144233,
            epsilon = 1e-12
        );
    }

    #[test]
    fn kernel_errors() {
        assert!(KernelConfig::new(0.0).is_err());
        assert!(KernelConfig::new(-1.0).is_err());
        let cfg = KernelConfig::new(1.0).unwrap();
        assert!(matches!(
            product_kernel(&pt(&[0.0], true), &pt(&[0.0, 1.0], true), &cfg),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn mmd_hand_values() {
        let cfg = KernelConfig::new(1.0).unwrap();
        let a = pt(&[0.0], false);
        let b = pt(&[0.0], true);
        assert_relative_eq!(
            mmd_squared(std::slice::from_ref(&a), std::slice::from_ref(&b), &cfg).unwrap(),
            2.0
        );
        assert_relative_eq!(
            mmd_squared(&[a.clone(), a.clone()], &[a.clone(), b.clone()], &cfg).unwrap(),
            0.5
        );
        assert_eq!(mmd_squared(&[a.clone(), b.clone()], &[b, a], &cfg).unwrap(), 0.0);
    }

    #[test]
    fn mmd_rejects_empty() {
        let cfg = KernelConfig::new(1.0).unwrap();
        let a = [pt(&[0.0], true)];
        assert!(matches!(mmd_squared(&a, &[], &cfg), Err(Error::EmptyWindow)));
    }

    #[test]
    fn witness_on_label_flip() {
        let cfg = KernelConfig::new(1.0).unwrap();
        let old = vec![pt(&[0.0], false); 3];
        let cur = vec![pt(&[0.0], true); 4];
        let (top_old, top_cur) = witness_examples(&old, &cur, &cfg, 10).unwrap();
        assert_eq!(top_old.len(), 3);
        assert_eq!(top_cur.len(), 4);
        assert!(top_old.iter().all(|w| (w.value + 1.0).abs() < 1e-12));
        assert!(top_cur.iter().all(|w| (w.value - 1.0).abs() < 1e-12));
    }

    #[test]
    fn witness_identical_windows_is_zero() {
        let cfg = KernelConfig::new(1.0).unwrap();
        let w = vec![pt(&[0.0], false), pt(&[1.0], true), pt(&[2.0], true)];
        let (o, c) = witness_examples(&w, &w, &cfg, 2).unwrap();
        assert_eq!((o.len(), c.len()), (2, 2));
        assert!(o.iter().chain(&c).all(|x| x.value.abs() < 1e-12));
        assert!(witness_examples(&w, &w, &cfg, 0).is_err());
    }

    #[test]
    fn median_heuristic_values() {
        assert_eq!(median_heuristic_bandwidth(&[vec![0.0], vec![1.0]]).unwrap(), 1.0);
        assert_eq!(
            median_heuristic_bandwidth(&[vec![0.0], vec![0.0], vec![2.0]]).unwrap(),
            2.0
        );
        // median zero, fallback to smallest nonzero distance
        let pts = vec![vec![0.0], vec![0.0], vec![0.0], vec![0.0], vec![3.0]];
        assert_eq!(median_heuristic_bandwidth(&pts).unwrap(), 3.0);
        assert!(median_heuristic_bandwidth(&[vec![1.0], vec![1.0]]).is_err());
        assert!(median_heuristic_bandwidth(&[vec![1.0]]).is_err());
    }
}
