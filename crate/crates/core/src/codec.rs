//! Patch-transform feature codec with downsampling factor 8.
//!
//! Every 8x8 RGB block (192 values, row-major with channels fastest) becomes
//! one grid cell of `n_q` coefficients against an orthonormal principal
//! component basis, so a `H x W` image maps to `H/8 x W/8 x n_q` features.
//! Images whose sides are not multiples of 8 are replicate-padded on encode
//! and cropped back on decode.

use std::path::Path;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::quantizer::FeatureGrid;
use crate::{Error, Result};

/// Downsampling factor.
pub const PATCH_SIDE: usize = 8;
/// Values per RGB patch.
pub const PATCH_LEN: usize = PATCH_SIDE * PATCH_SIDE * 3;
/// Patches used for fitting at most; larger corpora are subsampled.
pub const MAX_FIT_PATCHES: usize = 1 << 16;

const ORTHONORMAL_TOL: f64 = 1e-6;

/// `H x W` RGB image with values in `[0, 1]`, channels fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageBuffer {
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl ImageBuffer {
    pub fn new(height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::invalid(format!("image {height}x{width} is empty")));
        }
        if data.len() != height * width * 3 {
            return Err(Error::dims("image data", height * width * 3, data.len()));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("image"));
        }
        if data.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::invalid("image values must lie in [0, 1]"));
        }
        Ok(Self {
            height,
            width,
            data,
        })
    }

    pub fn filled(height: usize, width: usize, rgb: [f64; 3]) -> Result<Self> {
        let data = rgb
            .iter()
            .copied()
            .cycle()
            .take(height * width * 3)
            .collect();
        Self::new(height, width, data)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn pixel(&self, row: usize, col: usize) -> &[f64] {
        let i = (row * self.width + col) * 3;
        &self.data[i..i + 3]
    }

    pub fn load_png(path: impl AsRef<Path>) -> Result<Self> {
        let img = image::open(path.as_ref())?.to_rgb8();
        let (w, h) = img.dimensions();
        let data = img
            .into_raw()
            .into_iter()
            .map(|v| v as f64 / 255.0)
            .collect();
        Self::new(h as usize, w as usize, data)
    }

    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<()> {
        let raw: Vec<u8> = self
            .data
            .iter()
            .map(|v| (v * 255.0).round().clamp(0.0, 255.0) as u8)
            .collect();
        let img = image::RgbImage::from_raw(self.width as u32, self.height as u32, raw)
            .ok_or_else(|| Error::invalid("image buffer does not match its dimensions"))?;
        img.save(path.as_ref())?;
        Ok(())
    }

    /// Grid size after padding to multiples of 8.
    pub fn grid_size(&self) -> (usize, usize) {
        (
            self.height.div_ceil(PATCH_SIDE),
            self.width.div_ceil(PATCH_SIDE),
        )
    }

    /// Patch `(gy, gx)` of the replicate-padded image.
    fn patch(&self, gy: usize, gx: usize, out: &mut [f64]) {
        for dy in 0..PATCH_SIDE {
            let row = (gy * PATCH_SIDE + dy).min(self.height - 1);
            for dx in 0..PATCH_SIDE {
                let col = (gx * PATCH_SIDE + dx).min(self.width - 1);
                let o = (dy * PATCH_SIDE + dx) * 3;
                out[o..o + 3].copy_from_slice(self.pixel(row, col));
            }
        }
    }

    fn patches(&self) -> impl Iterator<Item = [f64; PATCH_LEN]> + '_ {
        let (gh, gw) = self.grid_size();
        (0..gh).flat_map(move |gy| {
            (0..gw).map(move |gx| {
                let mut p = [0.0; PATCH_LEN];
                self.patch(gy, gx, &mut p);
                p
            })
        })
    }
}

/// Orthonormal `n_q x 192` projection plus the patch mean it is centred on.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchBasis {
    n_q: usize,
    rows: Vec<f64>,
    mean: Vec<f64>,
}

impl PatchBasis {
    pub fn new(rows: Vec<Vec<f64>>, mean: Vec<f64>) -> Result<Self> {
        let n_q = rows.len();
        if n_q == 0 || n_q > PATCH_LEN {
            return Err(Error::invalid(format!(
                "basis rank {n_q} outside 1..={PATCH_LEN}"
            )));
        }
        if mean.len() != PATCH_LEN {
            return Err(Error::dims("basis mean", PATCH_LEN, mean.len()));
        }
        let mut flat = Vec::with_capacity(n_q * PATCH_LEN);
        for row in &rows {
            if row.len() != PATCH_LEN {
                return Err(Error::dims("basis row", PATCH_LEN, row.len()));
            }
            flat.extend_from_slice(row);
        }
        if flat.iter().chain(&mean).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("patch basis"));
        }
        let basis = Self {
            n_q,
            rows: flat,
            mean,
        };
        let err = basis.orthonormality_error();
        if err > ORTHONORMAL_TOL {
            return Err(Error::invalid(format!(
                "basis rows are not orthonormal (max deviation {err:e})"
            )));
        }
        Ok(basis)
    }

    pub fn n_q(&self) -> usize {
        self.n_q
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.rows[i * PATCH_LEN..(i + 1) * PATCH_LEN]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.rows.chunks_exact(PATCH_LEN)
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    /// Largest `|row_i . row_j - delta_ij|`.
    pub fn orthonormality_error(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.n_q {
            for j in i..self.n_q {
                let dot: f64 = self
                    .row(i)
                    .iter()
                    .zip(self.row(j))
                    .map(|(a, b)| a * b)
                    .sum();
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((dot - target).abs());
            }
        }
        worst
    }

    fn project(&self, patch: &[f64], out: &mut [f64]) {
        for (o, row) in out.iter_mut().zip(self.rows()) {
            *o = row
                .iter()
                .zip(patch.iter().zip(&self.mean))
                .map(|(b, (p, m))| b * (p - m))
                .sum();
        }
    }

    fn reconstruct(&self, coeffs: &[f64], out: &mut [f64]) {
        out.copy_from_slice(&self.mean);
        for (c, row) in coeffs.iter().zip(self.rows()) {
            for (o, b) in out.iter_mut().zip(row) {
                *o += c * b;
            }
        }
    }
}

/// Principal components of the mean-centred 8x8 patches of `images`.
///
/// Corpora with more than [`MAX_FIT_PATCHES`] patches are subsampled
/// uniformly without replacement using `seed`; the kept patches stay in
/// corpus order. Each component's sign is fixed so that its largest-magnitude
/// coordinate is positive.
pub fn fit_basis(images: &[ImageBuffer], n_q: usize, seed: u64) -> Result<PatchBasis> {
    if n_q == 0 || n_q > PATCH_LEN {
        return Err(Error::invalid(format!("n_q {n_q} outside 1..={PATCH_LEN}")));
    }
    let mut patches: Vec<[f64; PATCH_LEN]> = images.iter().flat_map(ImageBuffer::patches).collect();
    let informative = patches
        .iter()
        .filter(|p| p.iter().any(|v| *v != p[0]))
        .count();
    if informative < n_q {
        return Err(Error::InsufficientData(format!(
            "{informative} non-constant patches, need at least {n_q}"
        )));
    }
    if patches.len() > MAX_FIT_PATCHES {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut keep =
            rand::seq::index::sample(&mut rng, patches.len(), MAX_FIT_PATCHES).into_vec();
        keep.sort_unstable();
        patches = keep.into_iter().map(|i| patches[i]).collect();
    }

    let n = patches.len() as f64;
    let mut mean = vec![0.0; PATCH_LEN];
    for p in &patches {
        for (m, v) in mean.iter_mut().zip(p) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);

    let mut cov = DMatrix::<f64>::zeros(PATCH_LEN, PATCH_LEN);
    for chunk in patches.chunks(4096) {
        let centred = DMatrix::from_fn(chunk.len(), PATCH_LEN, |r, c| chunk[r][c] - mean[c]);
        cov += centred.tr_mul(&centred);
    }
    cov /= n;
    if cov.trace() <= 0.0 {
        return Err(Error::InsufficientData("patches have zero variance".into()));
    }

    let eigen = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..PATCH_LEN).collect();
    order.sort_by(|&a, &b| {
        eigen.eigenvalues[b]
            .total_cmp(&eigen.eigenvalues[a])
            .then(a.cmp(&b))
    });
    let rows = order[..n_q]
        .iter()
        .map(|&k| {
            let mut v: Vec<f64> = eigen.eigenvectors.column(k).iter().copied().collect();
            let lead = v.iter().enumerate().fold(
                0,
                |best, (i, x)| if x.abs() > v[best].abs() { i } else { best },
            );
            if v[lead] < 0.0 {
                v.iter_mut().for_each(|x| *x = -*x);
            }
            v
        })
        .collect();
    PatchBasis::new(rows, mean)
}

/// One cell of `n_q` coefficients per 8x8 patch.
pub fn encode(img: &ImageBuffer, basis: &PatchBasis) -> Result<FeatureGrid> {
    let (gh, gw) = img.grid_size();
    let mut data = vec![0.0; gh * gw * basis.n_q()];
    for (patch, cell) in img.patches().zip(data.chunks_exact_mut(basis.n_q())) {
        basis.project(&patch, cell);
    }
    FeatureGrid::new(gh, gw, basis.n_q(), data)
}

/// Inverse of [`encode`] for an image of `height x width` pixels; values are
/// clamped to `[0, 1]` and the padding is cropped.
pub fn decode(
    z: &FeatureGrid,
    basis: &PatchBasis,
    height: usize,
    width: usize,
) -> Result<ImageBuffer> {
    if z.channels() != basis.n_q() {
        return Err(Error::dims("feature channels", basis.n_q(), z.channels()));
    }
    if height.div_ceil(PATCH_SIDE) != z.height() || width.div_ceil(PATCH_SIDE) != z.width() {
        return Err(Error::invalid(format!(
            "{}x{} grid cannot decode to {height}x{width} pixels",
            z.height(),
            z.width()
        )));
    }
    let mut data = vec![0.0; height * width * 3];
    let mut patch = [0.0; PATCH_LEN];
    for gy in 0..z.height() {
        for gx in 0..z.width() {
            basis.reconstruct(z.cell(gy, gx), &mut patch);
            for dy in 0..PATCH_SIDE {
                let row = gy * PATCH_SIDE + dy;
                if row >= height {
                    break;
                }
                for dx in 0..PATCH_SIDE {
                    let col = gx * PATCH_SIDE + dx;
                    if col >= width {
                        break;
                    }
                    let o = (row * width + col) * 3;
                    let p = (dy * PATCH_SIDE + dx) * 3;
                    for c in 0..3 {
                        data[o + c] = patch[p + c].clamp(0.0, 1.0);
                    }
                }
            }
        }
    }
    ImageBuffer::new(height, width, data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn noise_image(height: usize, width: usize, seed: u64) -> ImageBuffer {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = (0..height * width * 3)
            .map(|_| rng.random::<f64>())
            .collect();
        ImageBuffer::new(height, width, data).unwrap()
    }

    #[test]
    fn grid_is_one_eighth() {
        let img = noise_image(256, 256, 0);
        let basis = fit_basis(std::slice::from_ref(&img), 16, 0).unwrap();
        let z = encode(&img, &basis).unwrap();
        assert_eq!(z.shape(), (32, 32, 16));
    }

    #[test]
    fn padding_and_crop() {
        let img = noise_image(20, 13, 1);
        assert_eq!(img.grid_size(), (3, 2));
        let basis = fit_basis(&[noise_image(128, 128, 2)], PATCH_LEN, 0).unwrap();
        let z = encode(&img, &basis).unwrap();
        let back = decode(&z, &basis, 20, 13).unwrap();
        assert_eq!((back.height(), back.width()), (20, 13));
        let worst = img
            .data()
            .iter()
            .zip(back.data())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(worst < 1e-6, "{worst}");
        assert!(decode(&z, &basis, 32, 13).is_err());
    }

    #[test]
    fn constant_image_gives_equal_cells() {
        let basis = fit_basis(&[noise_image(64, 64, 3)], 16, 0).unwrap();
        let img = ImageBuffer::filled(32, 24, [0.2, 0.5, 0.9]).unwrap();
        let z = encode(&img, &basis).unwrap();
        let first = z.cell(0, 0).to_vec();
        assert!(z.cells().all(|c| c == first.as_slice()));
    }

    #[test]
    fn constant_corpus_is_rejected() {
        let img = ImageBuffer::filled(64, 64, [0.5; 3]).unwrap();
        assert!(matches!(
            fit_basis(&[img], 4, 0),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn too_few_patches() {
        let img = noise_image(16, 16, 4);
        assert!(matches!(
            fit_basis(&[img], 5, 0),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn rejects_out_of_range_pixels() {
        assert!(ImageBuffer::new(1, 1, vec![0.0, 1.5, 0.0]).is_err());
        assert!(ImageBuffer::new(1, 1, vec![0.0, f64::NAN, 0.0]).is_err());
    }

    #[test]
    fn non_orthonormal_rows_rejected() {
        let mut a = vec![0.0; PATCH_LEN];
        a[0] = 1.0;
        let mut b = vec![0.0; PATCH_LEN];
        b[0] = 0.5;
        b[1] = 0.5;
        assert!(PatchBasis::new(vec![a, b], vec![0.0; PATCH_LEN]).is_err());
    }

    #[test]
    fn png_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.png");
        let img = noise_image(9, 11, 5);
        img.save_png(&path).unwrap();
        let back = ImageBuffer::load_png(&path).unwrap();
        assert_eq!((back.height(), back.width()), (9, 11));
        for (a, b) in img.data().iter().zip(back.data()) {
            assert!((a - b).abs() <= 0.5 / 255.0 + 1e-12);
        }
    }
}
