//! 64-QAM mapping with one octonary index per quadrature axis.
//!
//! Amplitude position `p` (0 = most negative) carries the 3-bit Gray label
//! `p ^ (p >> 1)`, and an index is transmitted as the level whose label
//! equals it. Consecutive indices of the serialized sequence are paired into
//! one symbol, first index on I, second on Q.

use std::io::Write;

use num_complex::Complex64;

use crate::quantizer::IndexTensor;
use crate::{Error, Result};

/// Amplitude positions per axis.
pub const AXIS_LEVELS: usize = 8;

/// Per-axis constellation for square 64-QAM with unit average symbol energy.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstellationMap {
    axis_levels: [f64; AXIS_LEVELS],
    label_of_level: [u8; AXIS_LEVELS],
    level_of_label: [u8; AXIS_LEVELS],
    energy_scale: f64,
}

impl Default for ConstellationMap {
    fn default() -> Self {
        Self::qam64()
    }
}

impl ConstellationMap {
    /// Levels `{-7, -5, ..., 7} / sqrt(42)`; the mean of `I^2 + Q^2` over the
    /// 64 points is `2 * 21 / 42 = 1`.
    pub fn qam64() -> Self {
        let energy_scale = 1.0 / 42f64.sqrt();
        let mut axis_levels = [0.0; AXIS_LEVELS];
        let mut label_of_level = [0u8; AXIS_LEVELS];
        let mut level_of_label = [0u8; AXIS_LEVELS];
        for p in 0..AXIS_LEVELS {
            axis_levels[p] = (2.0 * p as f64 - 7.0) * energy_scale;
            let label = (p ^ (p >> 1)) as u8;
            label_of_level[p] = label;
            level_of_label[label as usize] = p as u8;
        }
        Self {
            axis_levels,
            label_of_level,
            level_of_label,
            energy_scale,
        }
    }

    pub fn axis_levels(&self) -> &[f64; AXIS_LEVELS] {
        &self.axis_levels
    }

    pub fn label_of_level(&self) -> &[u8; AXIS_LEVELS] {
        &self.label_of_level
    }

    pub fn energy_scale(&self) -> f64 {
        self.energy_scale
    }

    /// Distance between neighbouring amplitude levels.
    pub fn level_gap(&self) -> f64 {
        2.0 * self.energy_scale
    }

    /// Amplitude carrying `label`. Panics if `label >= 8`.
    pub fn amplitude(&self, label: u8) -> f64 {
        self.axis_levels[self.level_of_label[label as usize] as usize]
    }

    /// Label of the level nearest to `x`; an exact tie goes to the level of
    /// smaller magnitude (at 0, to the negative level).
    pub fn decide(&self, x: f64) -> u8 {
        let mut best = 0;
        let mut best_dist = f64::INFINITY;
        for (p, &level) in self.axis_levels.iter().enumerate() {
            let dist = (x - level).abs();
            if dist < best_dist || (dist == best_dist && level.abs() < self.axis_levels[best].abs())
            {
                best = p;
                best_dist = dist;
            }
        }
        self.label_of_level[best]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SymbolStream {
    pub symbols: Vec<Complex64>,
    /// Whether the Q axis of the last symbol carries a padding index 0.
    pub padded: bool,
}

impl SymbolStream {
    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    /// Number of indices carried, excluding padding.
    pub fn index_count(&self) -> usize {
        2 * self.symbols.len() - usize::from(self.padded)
    }

    pub fn mean_energy(&self) -> f64 {
        self.symbols.iter().map(|s| s.norm_sqr()).sum::<f64>() / self.symbols.len() as f64
    }
}

/// Flattens level-major, then head, then row-major over the grid.
pub fn serialize_indices(s: &IndexTensor) -> Vec<u8> {
    s.as_slice().to_vec()
}

/// Inverse of [`serialize_indices`] for a `(levels, heads, height, width)`
/// shape.
pub fn deserialize_indices(
    sequence: &[u8],
    shape: (usize, usize, usize, usize),
) -> Result<IndexTensor> {
    let (levels, heads, height, width) = shape;
    IndexTensor::new(levels, heads, height, width, sequence.to_vec())
}

/// Maps index pairs `(a, b)` to `amplitude(a) + j * amplitude(b)`. An odd
/// trailing index is paired with a padding index 0.
pub fn modulate(indices: &[u8]) -> Result<SymbolStream> {
    if let Some(bad) = indices.iter().find(|&&v| v as usize >= AXIS_LEVELS) {
        return Err(Error::invalid(format!(
            "index {bad} cannot be mapped onto 8 levels"
        )));
    }
    let map = ConstellationMap::qam64();
    let symbols = indices
        .chunks(2)
        .map(|pair| {
            let q = pair.get(1).copied().unwrap_or(0);
            Complex64::new(map.amplitude(pair[0]), map.amplitude(q))
        })
        .collect();
    Ok(SymbolStream {
        symbols,
        padded: indices.len() % 2 == 1,
    })
}

/// Hard decisions on both axes of every symbol, padding included.
pub fn hard_decisions(y: &SymbolStream) -> Vec<u8> {
    let map = ConstellationMap::qam64();
    y.symbols
        .iter()
        .flat_map(|s| [map.decide(s.re), map.decide(s.im)])
        .collect()
}

/// Recovers `count` indices from `y`, dropping padding.
pub fn demodulate(y: &SymbolStream, count: usize) -> Result<Vec<u8>> {
    if y.is_empty() {
        return Err(Error::invalid("empty symbol stream"));
    }
    if count.div_ceil(2) != y.len() {
        return Err(Error::invalid(format!(
            "{count} indices do not fit {} symbols",
            y.len()
        )));
    }
    let mut decisions = hard_decisions(y);
    decisions.truncate(count);
    Ok(decisions)
}

/// Writes one `i,q` row per symbol under an `i,q` header.
pub fn write_symbols_csv<W: Write>(writer: W, stream: &SymbolStream) -> Result<()> {
    let mut csv = csv::Writer::from_writer(writer);
    csv.write_record(["i", "q"])?;
    for s in &stream.symbols {
        csv.write_record([s.re.to_string(), s.im.to_string()])?;
    }
    csv.flush().map_err(|e| Error::io("symbol csv", e))?;
    Ok(())
}
