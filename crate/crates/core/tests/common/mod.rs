#![allow(dead_code)]

use moc_rvq::quantizer::{
    fit, Codebook, CodebookShape, FeatureGrid, FitConfig, MultiHeadCodebook, MultiLevelCodebook,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

pub fn gaussian_grid(seed: u64, height: usize, width: usize, channels: usize) -> FeatureGrid {
    let mut r = rng(seed);
    FeatureGrid::new(
        height,
        width,
        channels,
        gaussian(&mut r, height * width * channels),
    )
    .unwrap()
}

pub fn random_codebook(rng: &mut impl Rng, entries: usize, dim: usize, scale: f64) -> Codebook {
    let data = gaussian(rng, entries * dim)
        .into_iter()
        .map(|v| v * scale)
        .collect();
    Codebook::from_flat(dim, data).unwrap()
}

/// Random codebook with every level scaled by `decay^d`.
pub fn random_multilevel(
    seed: u64,
    depth: usize,
    heads: usize,
    head_dim: usize,
    decay: f64,
) -> MultiLevelCodebook {
    let mut r = rng(seed);
    let levels = (0..depth)
        .map(|d| {
            let heads = (0..heads)
                .map(|_| random_codebook(&mut r, 8, head_dim, decay.powi(d as i32)))
                .collect();
            MultiHeadCodebook::new(heads).unwrap()
        })
        .collect();
    MultiLevelCodebook::new(levels).unwrap()
}

/// Level `d` places the 8 corners of a cube of side `10^-d` in each 3-d head,
/// centred on the origin. The deeper levels together never move a coordinate
/// across zero, so every encoder output re-encodes to the same indices.
pub fn nested_multilevel(depth: usize, heads: usize) -> MultiLevelCodebook {
    let levels = (0..depth)
        .map(|d| {
            let side = 10f64.powi(-(d as i32));
            let heads = (0..heads)
                .map(|h| {
                    let data = (0..8)
                        .flat_map(|k| {
                            (0..3).map(move |b| {
                                let bit = ((k + h) >> b) & 1;
                                (bit as f64 - 0.5) * side
                            })
                        })
                        .collect();
                    Codebook::from_flat(3, data).unwrap()
                })
                .collect();
            MultiHeadCodebook::new(heads).unwrap()
        })
        .collect();
    MultiLevelCodebook::new(levels).unwrap()
}

pub fn fitted_gaussian(
    seed: u64,
    samples: usize,
    depth: usize,
    heads: usize,
    n_q: usize,
) -> MultiLevelCodebook {
    let grid = gaussian_grid(seed, samples, 1, n_q);
    fit(
        &[grid],
        CodebookShape {
            depth,
            heads,
            entries: 8,
            feature_dim: n_q,
        },
        &FitConfig {
            seed,
            ..FitConfig::default()
        },
    )
    .unwrap()
}

pub fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

use moc_rvq::codec::ImageBuffer;

/// Smooth test picture: two gradients, a sinusoid and a few flat rectangles,
/// all depending on `seed`.
pub fn synthetic_image(height: usize, width: usize, seed: u64) -> ImageBuffer {
    let mut r = rng(seed);
    let fx: f64 = r.random_range(0.02..0.2);
    let fy: f64 = r.random_range(0.02..0.2);
    let phase: [f64; 3] = [r.random(), r.random(), r.random()];
    let rects: Vec<(usize, usize, usize, usize, [f64; 3])> = (0..4)
        .map(|_| {
            let y0 = r.random_range(0..height);
            let x0 = r.random_range(0..width);
            let h = r.random_range(1..=height / 3 + 1);
            let w = r.random_range(1..=width / 3 + 1);
            (y0, x0, h, w, [r.random(), r.random(), r.random()])
        })
        .collect();
    let mut data = Vec::with_capacity(height * width * 3);
    for y in 0..height {
        for x in 0..width {
            let mut px = [0.0; 3];
            for c in 0..3 {
                let wave = (fx * x as f64 + fy * y as f64 + std::f64::consts::TAU * phase[c]).sin();
                px[c] =
                    0.5 + 0.25 * wave + 0.2 * (x as f64 / width as f64 - y as f64 / height as f64);
            }
            for &(y0, x0, h, w, colour) in &rects {
                if (y0..y0 + h).contains(&y) && (x0..x0 + w).contains(&x) {
                    px = colour;
                }
            }
            data.extend(px.iter().map(|v| v.clamp(0.0, 1.0)));
        }
    }
    ImageBuffer::new(height, width, data).unwrap()
}
