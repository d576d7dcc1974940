use crate::{Error, Result};

/// An ordered set of equal-length codewords.
#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    dim: usize,
    entries: Vec<f64>,
}

impl Codebook {
    pub fn new(entries: Vec<Vec<f64>>) -> Result<Self> {
        let dim = entries
            .first()
            .map(Vec::len)
            .ok_or_else(|| Error::invalid("codebook has no entries"))?;
        let mut flat = Vec::with_capacity(entries.len() * dim);
        for entry in &entries {
            if entry.len() != dim {
                return Err(Error::dims("codebook entry", dim, entry.len()));
            }
            flat.extend_from_slice(entry);
        }
        Self::from_flat(dim, flat)
    }

    /// Builds a codebook from row-major storage, `dim` values per entry.
    pub fn from_flat(dim: usize, entries: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("codebook entries must have dimension >= 1"));
        }
        if entries.is_empty() {
            return Err(Error::invalid("codebook has no entries"));
        }
        if !entries.len().is_multiple_of(dim) {
            return Err(Error::invalid(format!(
                "{} values do not split into entries of dimension {dim}",
                entries.len()
            )));
        }
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("codebook entries"));
        }
        Ok(Self { dim, entries })
    }

    pub fn len(&self) -> usize {
        self.entries.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entry(&self, k: usize) -> &[f64] {
        &self.entries[k * self.dim..(k + 1) * self.dim]
    }

    pub fn entries(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.entries.chunks_exact(self.dim)
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.entries
    }

    /// Index of the nearest entry by squared Euclidean distance; the lowest
    /// index wins ties. `r` must have length `dim`.
    pub(crate) fn nearest(&self, r: &[f64]) -> usize {
        let mut best = 0;
        let mut best_dist = f64::INFINITY;
        for (k, e) in self.entries().enumerate() {
            let dist = squared_distance(r, e);
            if dist < best_dist {
                best_dist = dist;
                best = k;
            }
        }
        best
    }

    /// Moves entry `k` to slot `perm[k]`. `perm` must be a permutation of
    /// `0..len()`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        validate_permutation(perm, self.len())?;
        let mut entries = vec![0.0; self.entries.len()];
        for (old, &new) in perm.iter().enumerate() {
            entries[new * self.dim..(new + 1) * self.dim].copy_from_slice(self.entry(old));
        }
        Ok(Self {
            dim: self.dim,
            entries,
        })
    }
}

pub(crate) fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub(crate) fn validate_permutation(perm: &[usize], n: usize) -> Result<()> {
    if perm.len() != n {
        return Err(Error::dims("permutation length", n, perm.len()));
    }
    let mut seen = vec![false; n];
    for &p in perm {
        if p >= n || std::mem::replace(&mut seen[p], true) {
            return Err(Error::invalid(format!(
                "{perm:?} is not a permutation of 0..{n}"
            )));
        }
    }
    Ok(())
}

/// `P` head codebooks sharing entry count and dimension. The joint
/// quantizer has `N^P` representable concatenations.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiHeadCodebook {
    heads: Vec<Codebook>,
}

impl MultiHeadCodebook {
    pub fn new(heads: Vec<Codebook>) -> Result<Self> {
        let first = heads
            .first()
            .ok_or_else(|| Error::invalid("multi-head codebook has no heads"))?;
        for head in &heads[1..] {
            if head.len() != first.len() {
                return Err(Error::dims("head entry count", first.len(), head.len()));
            }
            if head.dim() != first.dim() {
                return Err(Error::dims("head dimension", first.dim(), head.dim()));
            }
        }
        Ok(Self { heads })
    }

    pub fn heads(&self) -> &[Codebook] {
        &self.heads
    }

    pub fn head_count(&self) -> usize {
        self.heads.len()
    }

    pub fn entries_per_head(&self) -> usize {
        self.heads[0].len()
    }

    pub fn head_dim(&self) -> usize {
        self.heads[0].dim()
    }

    pub fn feature_dim(&self) -> usize {
        self.head_dim() * self.head_count()
    }

    /// `N^P`, saturating at `u128::MAX`.
    pub fn state_count(&self) -> u128 {
        (self.entries_per_head() as u128).saturating_pow(self.head_count() as u32)
    }
}

/// `D` residual levels of multi-head codebooks with identical shape.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiLevelCodebook {
    levels: Vec<MultiHeadCodebook>,
}

impl MultiLevelCodebook {
    pub fn new(levels: Vec<MultiHeadCodebook>) -> Result<Self> {
        let first = levels
            .first()
            .ok_or_else(|| Error::invalid("multi-level codebook has no levels"))?;
        if first.entries_per_head() > u8::MAX as usize + 1 {
            return Err(Error::invalid("at most 256 entries per head are supported"));
        }
        for level in &levels[1..] {
            if level.head_count() != first.head_count() {
                return Err(Error::dims(
                    "level head count",
                    first.head_count(),
                    level.head_count(),
                ));
            }
            if level.entries_per_head() != first.entries_per_head() {
                return Err(Error::dims(
                    "level entry count",
                    first.entries_per_head(),
                    level.entries_per_head(),
                ));
            }
            if level.head_dim() != first.head_dim() {
                return Err(Error::dims(
                    "level head dimension",
                    first.head_dim(),
                    level.head_dim(),
                ));
            }
        }
        Ok(Self { levels })
    }

    pub fn levels(&self) -> &[MultiHeadCodebook] {
        &self.levels
    }

    pub fn level(&self, d: usize) -> &MultiHeadCodebook {
        &self.levels[d]
    }

    /// Quantization depth `D`.
    pub fn depth(&self) -> usize {
        self.levels.len()
    }

    /// Head count `P`.
    pub fn head_count(&self) -> usize {
        self.levels[0].head_count()
    }

    /// Entries per head `N`.
    pub fn entries_per_head(&self) -> usize {
        self.levels[0].entries_per_head()
    }

    pub fn head_dim(&self) -> usize {
        self.levels[0].head_dim()
    }

    /// Feature dimension `n_q`.
    pub fn feature_dim(&self) -> usize {
        self.levels[0].feature_dim()
    }

    pub fn codebook(&self, level: usize, head: usize) -> &Codebook {
        &self.levels[level].heads()[head]
    }

    /// Applies one permutation per `(level, head)`, level-major; see
    /// [`Codebook::permuted`].
    pub fn permuted(&self, perms: &[Vec<usize>]) -> Result<Self> {
        let p = self.head_count();
        if perms.len() != self.depth() * p {
            return Err(Error::dims(
                "permutation count",
                self.depth() * p,
                perms.len(),
            ));
        }
        let levels = self
            .levels
            .iter()
            .enumerate()
            .map(|(d, level)| {
                let heads = level
                    .heads()
                    .iter()
                    .enumerate()
                    .map(|(h, cb)| cb.permuted(&perms[d * p + h]))
                    .collect::<Result<Vec<_>>>()?;
                MultiHeadCodebook::new(heads)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(levels)
    }
}

/// Real-valued `h x w x n_q` tensor, channels fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureGrid {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<f64>,
}

impl FeatureGrid {
    pub fn new(height: usize, width: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 || channels == 0 {
            return Err(Error::invalid(format!(
                "feature grid {height}x{width}x{channels} has an empty dimension"
            )));
        }
        if data.len() != height * width * channels {
            return Err(Error::dims(
                "feature grid data",
                height * width * channels,
                data.len(),
            ));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("feature grid"));
        }
        Ok(Self {
            height,
            width,
            channels,
            data,
        })
    }

    pub fn zeros(height: usize, width: usize, channels: usize) -> Self {
        Self {
            height,
            width,
            channels,
            data: vec![0.0; height * width * channels],
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn cell_count(&self) -> usize {
        self.height * self.width
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn cell(&self, row: usize, col: usize) -> &[f64] {
        let start = (row * self.width + col) * self.channels;
        &self.data[start..start + self.channels]
    }

    pub fn cell_mut(&mut self, row: usize, col: usize) -> &mut [f64] {
        let start = (row * self.width + col) * self.channels;
        &mut self.data[start..start + self.channels]
    }

    /// Cells in row-major order.
    pub fn cells(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.channels)
    }

    pub(crate) fn cells_mut(&mut self) -> impl ExactSizeIterator<Item = &mut [f64]> + '_ {
        self.data.chunks_exact_mut(self.channels)
    }

    /// Mean squared difference over all values.
    pub fn mse(&self, other: &FeatureGrid) -> Result<f64> {
        if self.shape() != other.shape() {
            return Err(Error::invalid(format!(
                "feature grid shapes differ: {:?} vs {:?}",
                self.shape(),
                other.shape()
            )));
        }
        let sum: f64 = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        Ok(sum / self.data.len() as f64)
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.height, self.width, self.channels)
    }
}

/// Octonary code indices of shape `(levels, heads, h, w)`.
///
/// Storage is level-major, then head, then row-major over the grid, which is
/// also the transmission order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexTensor {
    levels: usize,
    heads: usize,
    height: usize,
    width: usize,
    data: Vec<u8>,
}

impl IndexTensor {
    pub fn new(
        levels: usize,
        heads: usize,
        height: usize,
        width: usize,
        data: Vec<u8>,
    ) -> Result<Self> {
        if levels == 0 || heads == 0 || height == 0 || width == 0 {
            return Err(Error::invalid(format!(
                "index tensor shape ({levels}, {heads}, {height}, {width}) has an empty dimension"
            )));
        }
        let expected = levels * heads * height * width;
        if data.len() != expected {
            return Err(Error::dims("index tensor data", expected, data.len()));
        }
        Ok(Self {
            levels,
            heads,
            height,
            width,
            data,
        })
    }

    /// `(levels, heads, height, width)`.
    pub fn shape(&self) -> (usize, usize, usize, usize) {
        (self.levels, self.heads, self.height, self.width)
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn heads(&self) -> usize {
        self.heads
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[u8] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<u8> {
        self.data
    }

    fn offset(&self, level: usize, head: usize, row: usize, col: usize) -> usize {
        ((level * self.heads + head) * self.height + row) * self.width + col
    }

    pub fn get(&self, level: usize, head: usize, row: usize, col: usize) -> u8 {
        self.data[self.offset(level, head, row, col)]
    }

    pub fn set(&mut self, level: usize, head: usize, row: usize, col: usize, value: u8) {
        let i = self.offset(level, head, row, col);
        self.data[i] = value;
    }

    /// Relabels every index through the `(level, head)` permutation that
    /// moved entry `k` to slot `perm[k]`.
    pub fn remapped(&self, perms: &[Vec<usize>]) -> Result<Self> {
        if perms.len() < self.levels * self.heads {
            return Err(Error::dims(
                "permutation count",
                self.levels * self.heads,
                perms.len(),
            ));
        }
        let plane = self.height * self.width;
        let mut data = self.data.clone();
        for (i, v) in data.iter_mut().enumerate() {
            let perm = &perms[i / plane];
            *v = *perm
                .get(*v as usize)
                .ok_or_else(|| Error::invalid(format!("index {v} outside permutation")))?
                as u8;
        }
        Ok(Self { data, ..*self })
    }
}
