//! Command parameters. Each struct is both a clap argument group and a
//! table of the `--config` TOML file, with every field optional so the two
//! sources can be layered.

use std::path::{Path, PathBuf};

use clap::Args;
use serde::Deserialize;

use crate::CliError;

/// Implements `overlay`, which keeps each field set on `self` and fills the
/// rest from `base`.
macro_rules! overlay {
    ($ty:ident { $($field:ident),* $(,)? }) => {
        impl $ty {
            pub fn overlay(self, base: Self) -> Self {
                Self { $($field: self.$field.or(base.$field)),* }
            }
        }
    };
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub fit: Option<FitArgs>,
    pub reorder: Option<ReorderArgs>,
    pub run: Option<RunArgs>,
    pub sweep: Option<SweepArgs>,
    pub inspect: Option<InspectArgs>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.to_owned(),
            source,
        })?;
        toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }
}

#[derive(Debug, Default, Args, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitArgs {
    /// Directory of PNG images; fits a patch basis, then the codebook on its
    /// features.
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// Fit on standard normal features instead of an image corpus.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub synthetic: Option<bool>,
    /// Feature vectors drawn in synthetic mode [default: 10000].
    #[arg(long)]
    pub samples: Option<usize>,
    /// Quantization levels D [default: 4].
    #[arg(long)]
    pub depth: Option<usize>,
    /// Heads P per level [default: 4].
    #[arg(long)]
    pub heads: Option<usize>,
    /// Feature channels [default: 16].
    #[arg(long)]
    pub n_q: Option<usize>,
    /// [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,
    /// k-means iteration cap [default: 100].
    #[arg(long)]
    pub max_iterations: Option<usize>,
    /// Relative distortion change that stops k-means [default: 1e-6].
    #[arg(long)]
    pub tolerance: Option<f64>,
    /// Codebook file to write.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

overlay!(FitArgs {
    corpus,
    synthetic,
    samples,
    depth,
    heads,
    n_q,
    seed,
    max_iterations,
    tolerance,
    output,
});

#[derive(Debug, Default, Args, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReorderArgs {
    /// Codebook file to reorder.
    #[arg(long)]
    pub codebook: Option<PathBuf>,
    /// Where to write the result [default: overwrite the input].
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

overlay!(ReorderArgs { codebook, output });

#[derive(Debug, Default, Args, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InspectArgs {
    /// Codebook file to describe.
    #[arg(long)]
    pub codebook: Option<PathBuf>,
}

overlay!(InspectArgs { codebook });

#[derive(Debug, Default, Args, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunArgs {
    /// Codebook file from `fit`.
    #[arg(long)]
    pub codebook: Option<PathBuf>,
    /// PNG image to transmit; needs a codebook file with a patch basis.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Transmit a standard normal feature grid of this size, e.g. `32x32`.
    #[arg(long)]
    pub synthetic: Option<String>,
    /// Seed of the synthetic feature grid [default: 0].
    #[arg(long)]
    pub input_seed: Option<u64>,
    /// Transmitted levels L [default: all].
    #[arg(long)]
    pub levels: Option<usize>,
    /// Channel SNR in dB; required unless noiseless.
    #[arg(long, allow_hyphen_values = true)]
    pub snr_db: Option<f64>,
    /// Channel noise seed [default: 0].
    #[arg(long)]
    pub seed: Option<u64>,
    /// Transmit with the Gray-reordered codebook.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub use_cr: Option<bool>,
    /// Requantize the received feature.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub use_requantization: Option<bool>,
    /// Bypass the channel.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub noiseless: Option<bool>,
    /// Report CSV [default: stdout].
    #[arg(short, long)]
    pub output: Option<PathBuf>,
    /// Write the reconstructed image here (image inputs only).
    #[arg(long)]
    pub image_out: Option<PathBuf>,
    /// Write the received symbols here as `i,q` CSV.
    #[arg(long)]
    pub symbols: Option<PathBuf>,
}

overlay!(RunArgs {
    codebook,
    input,
    synthetic,
    input_seed,
    levels,
    snr_db,
    seed,
    use_cr,
    use_requantization,
    noiseless,
    output,
    image_out,
    symbols,
});

#[derive(Debug, Default, Args, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepArgs {
    /// Codebook file from `fit`.
    #[arg(long)]
    pub codebook: Option<PathBuf>,
    /// PNG images or directories of them.
    #[arg(long, num_args = 1..)]
    pub input: Option<Vec<PathBuf>>,
    /// Use standard normal feature grids of this size, e.g. `32x32`.
    #[arg(long)]
    pub synthetic: Option<String>,
    /// Number of synthetic grids [default: 1].
    #[arg(long)]
    pub synthetic_count: Option<usize>,
    /// Seed of the first synthetic grid; grid `k` uses `input_seed + k`
    /// [default: 0].
    #[arg(long)]
    pub input_seed: Option<u64>,
    /// Transmitted levels, comma separated [default: 1..=D].
    #[arg(long, value_delimiter = ',')]
    pub levels: Option<Vec<usize>>,
    /// [default: -5]
    #[arg(long, allow_hyphen_values = true)]
    pub snr_min: Option<f64>,
    /// [default: 30]
    #[arg(long, allow_hyphen_values = true)]
    pub snr_max: Option<f64>,
    /// [default: 5]
    #[arg(long)]
    pub snr_step: Option<f64>,
    /// Number of channel seeds per point [default: 20].
    #[arg(long)]
    pub seeds: Option<u64>,
    /// First channel seed [default: 0].
    #[arg(long)]
    pub seed_base: Option<u64>,
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub use_cr: Option<bool>,
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub use_requantization: Option<bool>,
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub noiseless: Option<bool>,
    /// Worker threads; output order does not depend on it [default: 1].
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Per-run CSV [default: stdout].
    #[arg(short, long)]
    pub output: Option<PathBuf>,
    /// Mean and standard deviation over seeds, as CSV.
    #[arg(long)]
    pub summary: Option<PathBuf>,
    /// Directory for reconstructed images of the first seed (image inputs
    /// only).
    #[arg(long)]
    pub images_dir: Option<PathBuf>,
}

overlay!(SweepArgs {
    codebook,
    input,
    synthetic,
    synthetic_count,
    input_seed,
    levels,
    snr_min,
    snr_max,
    snr_step,
    seeds,
    seed_base,
    use_cr,
    use_requantization,
    noiseless,
    jobs,
    output,
    summary,
    images_dir,
});
