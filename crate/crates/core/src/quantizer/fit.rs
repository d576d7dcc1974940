use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::types::{
    squared_distance, Codebook, FeatureGrid, MultiHeadCodebook, MultiLevelCodebook,
};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EmptyClusterPolicy {
    /// Move an empty centroid onto the point farthest from its own centroid.
    #[default]
    ReassignFarthest,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitConfig {
    pub max_iterations: usize,
    /// Stop once the mean squared distortion drops by less than this
    /// fraction between iterations.
    pub convergence_tol: f64,
    pub seed: u64,
    pub empty_cluster_policy: EmptyClusterPolicy,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            max_iterations: 100,
            convergence_tol: 1e-6,
            seed: 0,
            empty_cluster_policy: EmptyClusterPolicy::ReassignFarthest,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(Error::invalid("max_iterations must be >= 1"));
        }
        if !self.convergence_tol.is_finite() || self.convergence_tol < 0.0 {
            return Err(Error::invalid("convergence_tol must be finite and >= 0"));
        }
        Ok(())
    }

    /// RNG for the `(level, head)` codebook: ChaCha8 seeded with `seed`, on
    /// stream `level * heads + head`.
    pub fn rng_for(&self, level: usize, head: usize, heads: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream((level * heads + head) as u64);
        rng
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    /// Mean `||r_d||^2` over the training vectors for `d = 0..=D`; entry 0 is
    /// the energy of the input itself.
    pub residual_energy: Vec<f64>,
}

/// Lloyd's k-means with k-means++ seeding on `dim`-dimensional row-major
/// points. Returns `k` centroids, row-major.
///
/// Seeding draws the first centre with `rng.random_range(0..n)`; each later
/// centre is the first point whose running sum of squared distances to the
/// chosen centres exceeds `rng.random::<f64>() * total`. If `total` is zero
/// the draw falls back to `random_range(0..n)`.
///
/// Each iteration assigns points (lowest centroid index on ties), then moves
/// every centroid to the mean of its points, so the returned centroids are
/// always means of the last assignment except where an empty cluster was
/// reseeded.
pub fn kmeans(
    points: &[f64],
    dim: usize,
    k: usize,
    cfg: &FitConfig,
    rng: &mut impl Rng,
) -> Result<Vec<f64>> {
    cfg.validate()?;
    if dim == 0 || !points.len().is_multiple_of(dim) {
        return Err(Error::invalid("point buffer does not match dimension"));
    }
    let n = points.len() / dim;
    if k == 0 {
        return Err(Error::invalid("k must be >= 1"));
    }
    if n < k {
        return Err(Error::InsufficientData(format!(
            "{n} points cannot seed {k} clusters"
        )));
    }
    if points.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("k-means input"));
    }
    let point = |i: usize| &points[i * dim..(i + 1) * dim];

    let mut centroids = init_plus_plus(points, dim, k, rng);
    let mut assignment = vec![0usize; n];
    let mut distance = vec![0.0f64; n];
    let mut previous = f64::INFINITY;
    for _ in 0..cfg.max_iterations {
        let mut total = 0.0;
        for i in 0..n {
            let (j, dist) = nearest(&centroids, dim, point(i));
            assignment[i] = j;
            distance[i] = dist;
            total += dist;
        }
        let distortion = total / n as f64;

        let mut sums = vec![0.0; k * dim];
        let mut counts = vec![0usize; k];
        for (i, &j) in assignment.iter().enumerate() {
            counts[j] += 1;
            for (s, x) in sums[j * dim..(j + 1) * dim].iter_mut().zip(point(i)) {
                *s += x;
            }
        }
        for j in 0..k {
            if counts[j] > 0 {
                let inv = 1.0 / counts[j] as f64;
                for (c, s) in centroids[j * dim..(j + 1) * dim]
                    .iter_mut()
                    .zip(&sums[j * dim..(j + 1) * dim])
                {
                    *c = s * inv;
                }
            } else {
                match cfg.empty_cluster_policy {
                    EmptyClusterPolicy::ReassignFarthest => {
                        let far = farthest(&distance);
                        distance[far] = f64::NEG_INFINITY;
                        centroids[j * dim..(j + 1) * dim].copy_from_slice(point(far));
                    }
                }
            }
        }

        if previous.is_finite() && previous - distortion <= cfg.convergence_tol * previous {
            break;
        }
        previous = distortion;
    }
    Ok(centroids)
}

fn init_plus_plus(points: &[f64], dim: usize, k: usize, rng: &mut impl Rng) -> Vec<f64> {
    let n = points.len() / dim;
    let point = |i: usize| &points[i * dim..(i + 1) * dim];
    let mut centroids = Vec::with_capacity(k * dim);
    centroids.extend_from_slice(point(rng.random_range(0..n)));
    let mut best: Vec<f64> = (0..n)
        .map(|i| squared_distance(point(i), &centroids[..dim]))
        .collect();
    for _ in 1..k {
        let total: f64 = best.iter().sum();
        let chosen = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            best.iter()
                .position(|&d| {
                    acc += d;
                    acc > target
                })
                .unwrap_or_else(|| best.iter().rposition(|&d| d > 0.0).unwrap_or(n - 1))
        } else {
            rng.random_range(0..n)
        };
        let start = centroids.len();
        centroids.extend_from_slice(point(chosen));
        for (i, b) in best.iter_mut().enumerate() {
            let d = squared_distance(point(i), &centroids[start..start + dim]);
            if d < *b {
                *b = d;
            }
        }
    }
    centroids
}

fn nearest(centroids: &[f64], dim: usize, x: &[f64]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (j, c) in centroids.chunks_exact(dim).enumerate() {
        let d = squared_distance(x, c);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

fn farthest(distance: &[f64]) -> usize {
    let mut best = 0;
    for (i, &d) in distance.iter().enumerate() {
        if d > distance[best] {
            best = i;
        }
    }
    best
}

/// Shape of a multi-level codebook: `depth` levels of `heads` codebooks with
/// `entries` entries each, over `feature_dim`-channel features.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CodebookShape {
    pub depth: usize,
    pub heads: usize,
    pub entries: usize,
    pub feature_dim: usize,
}

/// Greedy residual k-means; see [`fit_with_report`].
pub fn fit(
    training: &[FeatureGrid],
    shape: CodebookShape,
    cfg: &FitConfig,
) -> Result<MultiLevelCodebook> {
    fit_with_report(training, shape, cfg).map(|(mlc, _)| mlc)
}

/// Fits level `d` head by head with [`kmeans`] on the residuals left by
/// levels `< d`, then quantizes those residuals with the new level to get
/// the next ones. Deterministic for a given config and training order.
pub fn fit_with_report(
    training: &[FeatureGrid],
    shape: CodebookShape,
    cfg: &FitConfig,
) -> Result<(MultiLevelCodebook, FitReport)> {
    cfg.validate()?;
    let CodebookShape {
        depth,
        heads,
        entries,
        feature_dim,
    } = shape;
    if depth == 0 || heads == 0 || entries == 0 {
        return Err(Error::invalid(format!(
            "degenerate codebook shape {shape:?}"
        )));
    }
    if entries > u8::MAX as usize + 1 {
        return Err(Error::invalid("at most 256 entries per head are supported"));
    }
    if feature_dim == 0 || feature_dim % heads != 0 {
        return Err(Error::invalid(format!(
            "feature dimension {feature_dim} is not divisible by {heads} heads"
        )));
    }
    let mut residual = Vec::new();
    for grid in training {
        if grid.channels() != feature_dim {
            return Err(Error::dims(
                "training feature channels",
                feature_dim,
                grid.channels(),
            ));
        }
        residual.extend_from_slice(grid.data());
    }
    if residual.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("training features"));
    }
    let n = residual.len() / feature_dim;
    if n < entries {
        return Err(Error::InsufficientData(format!(
            "{n} training vectors for {entries}-entry codebooks"
        )));
    }

    let m = feature_dim / heads;
    let mut energies = vec![mean_energy(&residual, feature_dim)];
    let mut levels = Vec::with_capacity(depth);
    let mut head_points = vec![0.0; n * m];
    for d in 0..depth {
        let mut codebooks = Vec::with_capacity(heads);
        for h in 0..heads {
            for (dst, src) in head_points
                .chunks_exact_mut(m)
                .zip(residual.chunks_exact(feature_dim))
            {
                dst.copy_from_slice(&src[h * m..(h + 1) * m]);
            }
            let mut rng = cfg.rng_for(d, h, heads);
            let centroids = kmeans(&head_points, m, entries, cfg, &mut rng)?;
            let cb = Codebook::from_flat(m, centroids)?;
            for r in residual.chunks_exact_mut(feature_dim) {
                let head = &mut r[h * m..(h + 1) * m];
                let e = cb.entry(cb.nearest(head));
                for (x, v) in head.iter_mut().zip(e) {
                    *x -= v;
                }
            }
            codebooks.push(cb);
        }
        levels.push(MultiHeadCodebook::new(codebooks)?);
        energies.push(mean_energy(&residual, feature_dim));
    }
    let mlc = MultiLevelCodebook::new(levels)?;
    Ok((
        mlc,
        FitReport {
            residual_energy: energies,
        },
    ))
}

fn mean_energy(data: &[f64], dim: usize) -> f64 {
    let n = data.len() / dim;
    data.chunks_exact(dim)
        .map(|v| v.iter().map(|x| x * x).sum::<f64>())
        .sum::<f64>()
        / n as f64
}
