//! Point clouds and the synthetic cloud generator.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::rng;

/// Points in 3D with `c` attribute channels stored channel-major
/// (`attributes[ch][i]`).
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    pub positions: Vec<[f64; 3]>,
    pub attributes: Vec<Vec<f64>>,
}

impl PointCloud {
    pub fn new(positions: Vec<[f64; 3]>, attributes: Vec<Vec<f64>>) -> Result<Self> {
        if positions.len() < 2 {
            return Err(Error::InvalidArgument(format!(
                "point cloud needs at least 2 points, got {}",
                positions.len()
            )));
        }
        if let Some(i) = positions.iter().position(|p| p.iter().any(|v| !v.is_finite())) {
            return Err(Error::InvalidArgument(format!("point {i} has a non-finite coordinate")));
        }
        for ch in &attributes {
            if ch.len() != positions.len() {
                return Err(Error::DimensionMismatch {
                    expected: positions.len(),
                    got: ch.len(),
                });
            }
        }
        Ok(Self {
            positions,
            attributes,
        })
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn channels(&self) -> usize {
        self.attributes.len()
    }

    pub fn bounding_box_diagonal(&self) -> f64 {
        bounding_box_diagonal(&self.positions)
    }

    /// Sub-cloud with the given point indices, in the given order.
    pub fn select(&self, indices: &[usize]) -> PointCloud {
        PointCloud {
            positions: indices.iter().map(|&i| self.positions[i]).collect(),
            attributes: self
                .attributes
                .iter()
                .map(|ch| indices.iter().map(|&i| ch[i]).collect())
                .collect(),
        }
    }
}

pub(crate) fn bounding_box_diagonal(points: &[[f64; 3]]) -> f64 {
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for p in points {
        for d in 0..3 {
            lo[d] = lo[d].min(p[d]);
            hi[d] = hi[d].max(p[d]);
        }
    }
    (0..3).map(|d| (hi[d] - lo[d]).powi(2)).sum::<f64>().sqrt()
}

/// Gaussian blobs carrying a smooth RGB field in `[0, 255]`.
///
/// Blob centres are uniform in a 100-unit cube with standard deviation 12,
/// so neighbouring blobs overlap and KNN graphs are usually connected.
pub fn synthetic_cloud(n: usize, seed: u64) -> Result<PointCloud> {
    const BLOBS: usize = 8;
    let mut rng = rng::stream(seed, "synthetic-cloud", 0);
    let centres: Vec<[f64; 3]> = (0..BLOBS)
        .map(|_| [rng.random_range(20.0..80.0), rng.random_range(20.0..80.0), rng.random_range(20.0..80.0)])
        .collect();
    let spread = Normal::new(0.0, 12.0).expect("valid normal");
    let positions: Vec<[f64; 3]> = (0..n)
        .map(|i| {
            let c = centres[i % BLOBS];
            [
                c[0] + spread.sample(&mut rng),
                c[1] + spread.sample(&mut rng),
                c[2] + spread.sample(&mut rng),
            ]
        })
        .collect();
    let attributes = vec![
        positions.iter().map(|p| smooth_channel(p, [0.031, 0.017, 0.0], 0.0)).collect(),
        positions.iter().map(|p| smooth_channel(p, [0.0, 0.027, 0.021], 1.3)).collect(),
        positions.iter().map(|p| smooth_channel(p, [0.019, 0.0, 0.033], 2.1)).collect(),
    ];
    PointCloud::new(positions, attributes)
}

fn smooth_channel(p: &[f64; 3], freq: [f64; 3], phase: f64) -> f64 {
    let arg = freq[0] * p[0] + freq[1] * p[1] + freq[2] * p[2] + phase;
    (127.5 + 100.0 * arg.sin()).clamp(0.0, 255.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_degenerate_clouds() {
        assert!(PointCloud::new(vec![[0.0; 3]], vec![]).is_err());
        assert!(PointCloud::new(vec![[0.0; 3], [f64::NAN, 0.0, 0.0]], vec![]).is_err());
        assert!(PointCloud::new(vec![[0.0; 3], [1.0, 0.0, 0.0]], vec![vec![1.0]]).is_err());
    }

    #[test]
    fn synthetic_cloud_is_seeded_and_in_range() {
        let a = synthetic_cloud(500, 3).unwrap();
        assert_eq!(a, synthetic_cloud(500, 3).unwrap());
        assert_ne!(a, synthetic_cloud(500, 4).unwrap());
        assert_eq!(a.channels(), 3);
        assert!(a.attributes.iter().flatten().all(|&v| (0.0..=255.0).contains(&v)));
    }
}
