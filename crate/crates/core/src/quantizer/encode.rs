use super::types::{Codebook, FeatureGrid, IndexTensor, MultiHeadCodebook, MultiLevelCodebook};
use crate::{Error, Result};

/// Nearest codeword to `r`, lowest index on ties.
pub fn quantize_head<'a>(r: &[f64], cb: &'a Codebook) -> Result<(usize, &'a [f64])> {
    if r.len() != cb.dim() {
        return Err(Error::dims("head vector", cb.dim(), r.len()));
    }
    let k = cb.nearest(r);
    Ok((k, cb.entry(k)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct MocOutput {
    /// Head-major, then row-major over the grid (`P x h x w`).
    pub indices: Vec<u8>,
    pub quantized: FeatureGrid,
}

/// Quantizes every cell head by head and concatenates the selected entries.
///
/// Squared distance is additive over the disjoint head slices, so this is
/// the nearest neighbour in the `N^P` product codebook.
pub fn moc_quantize(r: &FeatureGrid, moc: &MultiHeadCodebook) -> Result<MocOutput> {
    check_channels(r, moc.feature_dim())?;
    let m = moc.head_dim();
    let cells = r.cell_count();
    let mut indices = vec![0u8; moc.head_count() * cells];
    let mut quantized = FeatureGrid::zeros(r.height(), r.width(), r.channels());
    for (c, (cell, out)) in r.cells().zip(quantized.cells_mut()).enumerate() {
        for (h, cb) in moc.heads().iter().enumerate() {
            let slice = h * m..(h + 1) * m;
            let k = cb.nearest(&cell[slice.clone()]);
            indices[h * cells + c] = k as u8;
            out[slice].copy_from_slice(cb.entry(k));
        }
    }
    Ok(MocOutput { indices, quantized })
}

/// Greedy residual quantization through the first `levels` levels.
pub fn rvq_encode(z: &FeatureGrid, mlc: &MultiLevelCodebook, levels: usize) -> Result<IndexTensor> {
    rvq_encode_with_residual(z, mlc, levels).map(|(s, _)| s)
}

/// [`rvq_encode`] that also returns the final residual `r_L`, so that
/// `z = rvq_decode(s) + r_L` up to round-off.
pub fn rvq_encode_with_residual(
    z: &FeatureGrid,
    mlc: &MultiLevelCodebook,
    levels: usize,
) -> Result<(IndexTensor, FeatureGrid)> {
    check_channels(z, mlc.feature_dim())?;
    if levels == 0 || levels > mlc.depth() {
        return Err(Error::invalid(format!(
            "level count {levels} outside 1..={}",
            mlc.depth()
        )));
    }
    let p = mlc.head_count();
    let m = mlc.head_dim();
    let cells = z.cell_count();
    let mut indices = vec![0u8; levels * p * cells];
    let mut residual = z.clone();
    for (c, r) in residual.cells_mut().enumerate() {
        for (d, level) in mlc.levels()[..levels].iter().enumerate() {
            for (h, cb) in level.heads().iter().enumerate() {
                let head = &mut r[h * m..(h + 1) * m];
                let k = cb.nearest(head);
                indices[(d * p + h) * cells + c] = k as u8;
                for (x, e) in head.iter_mut().zip(cb.entry(k)) {
                    *x -= e;
                }
            }
        }
    }
    let s = IndexTensor::new(levels, p, z.height(), z.width(), indices)?;
    Ok((s, residual))
}

/// Sums the selected codewords over the levels present in `s`.
pub fn rvq_decode(s: &IndexTensor, mlc: &MultiLevelCodebook) -> Result<FeatureGrid> {
    let (levels, heads, height, width) = s.shape();
    if levels > mlc.depth() {
        return Err(Error::invalid(format!(
            "index tensor has {levels} levels, codebook only {}",
            mlc.depth()
        )));
    }
    if heads != mlc.head_count() {
        return Err(Error::dims("index tensor heads", mlc.head_count(), heads));
    }
    let n = mlc.entries_per_head();
    if let Some(bad) = s.as_slice().iter().find(|&&v| v as usize >= n) {
        return Err(Error::invalid(format!("index {bad} out of range 0..{n}")));
    }
    let m = mlc.head_dim();
    let cells = height * width;
    let mut z = FeatureGrid::zeros(height, width, mlc.feature_dim());
    let data = s.as_slice();
    for (c, out) in z.cells_mut().enumerate() {
        for (d, level) in mlc.levels()[..levels].iter().enumerate() {
            for (h, cb) in level.heads().iter().enumerate() {
                let e = cb.entry(data[(d * heads + h) * cells + c] as usize);
                for (x, v) in out[h * m..(h + 1) * m].iter_mut().zip(e) {
                    *x += v;
                }
            }
        }
    }
    Ok(z)
}

/// Projects a feature onto the codebook's representable set by re-running
/// the encoder and decoder.
pub fn requantize(
    z_noisy: &FeatureGrid,
    mlc: &MultiLevelCodebook,
    levels: usize,
) -> Result<FeatureGrid> {
    rvq_decode(&rvq_encode(z_noisy, mlc, levels)?, mlc)
}

fn check_channels(z: &FeatureGrid, expected: usize) -> Result<()> {
    if z.channels() != expected {
        return Err(Error::dims("feature channels", expected, z.channels()));
    }
    Ok(())
}
