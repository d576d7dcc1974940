//! End-to-end link: codec, quantizer, modem, channel and back, with the
//! metrics of every run.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::channel::{transmit, ChannelConfig};
use crate::codec::{self, ImageBuffer, PatchBasis, PATCH_SIDE};
use crate::modem::{
    deserialize_indices, hard_decisions, modulate, serialize_indices, SymbolStream,
};
use crate::quantizer::{
    requantize, rvq_decode, rvq_encode, FeatureGrid, IndexTensor, MultiLevelCodebook, OCTONARY,
};
use crate::reorder::reorder_multilevel;
use crate::{Error, Result};

/// Bits carried by one octonary index.
pub const BITS_PER_INDEX: u64 = 3;

/// Version tag written in the comment line of every report CSV.
pub const CSV_SCHEMA: &str = "# moc-rvq link report v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CodecKind {
    /// Inputs are feature grids, transmitted as is.
    Identity,
    /// Inputs are images, encoded with the patch basis.
    PatchBasis,
}

impl CodecKind {
    pub fn as_str(self) -> &'static str {
        match self {
            CodecKind::Identity => "identity",
            CodecKind::PatchBasis => "patch_basis",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinkConfig {
    /// Transmitted quantization levels `L`, `1..=D`.
    pub levels: usize,
    pub snr_db: f64,
    pub seed: u64,
    /// Transmit with the Gray-reordered codebook.
    pub use_cr: bool,
    /// Requantize the retrieved feature before decoding.
    pub use_requantization: bool,
    pub noiseless: bool,
    pub codec: CodecKind,
}

impl LinkConfig {
    pub fn new(levels: usize, snr_db: f64, seed: u64) -> Self {
        Self {
            levels,
            snr_db,
            seed,
            use_cr: false,
            use_requantization: false,
            noiseless: false,
            codec: CodecKind::Identity,
        }
    }

    pub fn validate(&self, depth: usize) -> Result<()> {
        if self.levels == 0 || self.levels > depth {
            return Err(Error::invalid(format!(
                "levels {} outside 1..={depth}",
                self.levels
            )));
        }
        if !self.noiseless && !self.snr_db.is_finite() {
            return Err(Error::invalid(format!(
                "snr_db {} is not finite",
                self.snr_db
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinkReport {
    /// Complex symbols with at least one wrong axis decision.
    pub ser: f64,
    /// Flipped bits of the 3-bit index labels.
    pub ber: f64,
    /// Octonary indices received wrong.
    pub index_error_rate: f64,
    /// Mean squared error of the feature handed to the decoder against the
    /// encoder output.
    pub feature_mse: f64,
    /// Image runs only; `f64::INFINITY` for a perfect reconstruction.
    pub psnr_db: Option<f64>,
    pub cbr: f64,
    pub bits_transmitted: u64,
    pub symbols_transmitted: u64,
}

#[derive(Debug, Clone, Copy)]
pub enum LinkInput<'a> {
    Image(&'a ImageBuffer),
    Features(&'a FeatureGrid),
}

#[derive(Debug, Clone)]
pub struct LinkOutput {
    /// Encoder output.
    pub source: FeatureGrid,
    /// Quantized feature at the transmitter.
    pub transmitted: FeatureGrid,
    /// Feature handed to the decoder.
    pub features: FeatureGrid,
    pub sent_indices: IndexTensor,
    pub received_indices: IndexTensor,
    /// Channel output, before hard decisions.
    pub symbols: SymbolStream,
    pub image: Option<ImageBuffer>,
    pub report: LinkReport,
}

/// Shared codebooks (plain and Gray-reordered) and optional patch basis.
#[derive(Debug, Clone)]
pub struct Transceiver {
    plain: MultiLevelCodebook,
    reordered: MultiLevelCodebook,
    basis: Option<PatchBasis>,
}

impl Transceiver {
    pub fn new(codebook: MultiLevelCodebook, basis: Option<PatchBasis>) -> Result<Self> {
        if codebook.entries_per_head() != OCTONARY {
            return Err(Error::invalid(format!(
                "64-QAM needs {OCTONARY}-entry codebooks, got {}",
                codebook.entries_per_head()
            )));
        }
        if let Some(b) = &basis {
            if b.n_q() != codebook.feature_dim() {
                return Err(Error::dims("basis n_q", codebook.feature_dim(), b.n_q()));
            }
        }
        let (reordered, _) = reorder_multilevel(&codebook, true)?;
        Ok(Self {
            plain: codebook,
            reordered,
            basis,
        })
    }

    pub fn codebook(&self, use_cr: bool) -> &MultiLevelCodebook {
        if use_cr {
            &self.reordered
        } else {
            &self.plain
        }
    }

    pub fn basis(&self) -> Option<&PatchBasis> {
        self.basis.as_ref()
    }

    pub fn run_link(&self, input: LinkInput<'_>, cfg: &LinkConfig) -> Result<LinkOutput> {
        self.run_link_on_stream(input, cfg, 0)
    }

    /// [`Transceiver::run_link`] with channel noise drawn from `stream` of
    /// `cfg.seed`.
    pub fn run_link_on_stream(
        &self,
        input: LinkInput<'_>,
        cfg: &LinkConfig,
        stream: u64,
    ) -> Result<LinkOutput> {
        let mlc = self.codebook(cfg.use_cr);
        cfg.validate(mlc.depth())?;

        let (z, pixels) = match (input, cfg.codec) {
            (LinkInput::Features(z), CodecKind::Identity) => {
                (z.clone(), (z.height() * PATCH_SIDE, z.width() * PATCH_SIDE))
            }
            (LinkInput::Image(img), CodecKind::PatchBasis) => {
                let basis = self
                    .basis
                    .as_ref()
                    .ok_or_else(|| Error::invalid("image input needs a patch basis"))?;
                (codec::encode(img, basis)?, (img.height(), img.width()))
            }
            (LinkInput::Features(_), CodecKind::PatchBasis) => {
                return Err(Error::invalid("patch-basis codec expects an image input"))
            }
            (LinkInput::Image(_), CodecKind::Identity) => {
                return Err(Error::invalid("identity codec expects a feature input"))
            }
        };

        let sent = rvq_encode(&z, mlc, cfg.levels)?;
        let transmitted = rvq_decode(&sent, mlc)?;

        let sequence = serialize_indices(&sent);
        let x = modulate(&sequence)?;
        let channel = ChannelConfig {
            snr_db: cfg.snr_db,
            seed: cfg.seed,
            stream,
            noiseless: cfg.noiseless,
        };
        let y = transmit(&x, &channel)?;

        let decisions = hard_decisions(&y);
        let mut padded_sent = sequence.clone();
        padded_sent.resize(decisions.len(), 0);
        let symbol_errors = padded_sent
            .chunks_exact(2)
            .zip(decisions.chunks_exact(2))
            .filter(|(a, b)| a != b)
            .count();
        let received_sequence = &decisions[..sequence.len()];
        let (index_errors, bit_errors) = sequence
            .iter()
            .zip(received_sequence)
            .fold((0u64, 0u64), |(ie, be), (a, b)| {
                (ie + u64::from(a != b), be + u64::from((a ^ b).count_ones()))
            });

        let received = deserialize_indices(received_sequence, sent.shape())?;
        let retrieved = rvq_decode(&received, mlc)?;
        let features = if cfg.use_requantization {
            requantize(&retrieved, mlc, cfg.levels)?
        } else {
            retrieved
        };
        let feature_mse = features.mse(&z)?;

        let (image, psnr_db) = match input {
            LinkInput::Image(img) => {
                let basis = self.basis.as_ref().expect("checked above");
                let out = codec::decode(&features, basis, img.height(), img.width())?;
                let psnr = compute_psnr(img, &out)?;
                (Some(out), Some(psnr))
            }
            LinkInput::Features(_) => (None, None),
        };

        let n = sequence.len() as u64;
        let symbols = y.len() as u64;
        let report = LinkReport {
            ser: symbol_errors as f64 / symbols as f64,
            ber: bit_errors as f64 / (BITS_PER_INDEX * n) as f64,
            index_error_rate: index_errors as f64 / n as f64,
            feature_mse,
            psnr_db,
            cbr: compute_cbr(pixels.0, pixels.1, y.len())?,
            bits_transmitted: BITS_PER_INDEX * n,
            symbols_transmitted: symbols,
        };
        Ok(LinkOutput {
            source: z,
            transmitted,
            features,
            sent_indices: sent,
            received_indices: received,
            symbols: y,
            image,
            report,
        })
    }
}

/// One-shot [`Transceiver::run_link`].
pub fn run_link(
    input: LinkInput<'_>,
    cfg: &LinkConfig,
    mlc: &MultiLevelCodebook,
    basis: Option<&PatchBasis>,
) -> Result<LinkOutput> {
    Transceiver::new(mlc.clone(), basis.cloned())?.run_link(input, cfg)
}

/// Channel bandwidth ratio: complex symbols per source value, `B / (3HW)`.
pub fn compute_cbr(height: usize, width: usize, symbols: usize) -> Result<f64> {
    if height == 0 || width == 0 {
        return Err(Error::invalid("image dimensions must be positive"));
    }
    Ok(symbols as f64 / (3 * height * width) as f64)
}

/// `10 log10(1 / MSE)` for `[0, 1]` images; `f64::INFINITY` when identical.
pub fn compute_psnr(a: &ImageBuffer, b: &ImageBuffer) -> Result<f64> {
    if (a.height(), a.width()) != (b.height(), b.width()) {
        return Err(Error::invalid(format!(
            "image sizes differ: {}x{} vs {}x{}",
            a.height(),
            a.width(),
            b.height(),
            b.width()
        )));
    }
    let mse = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        / a.data().len() as f64;
    Ok(if mse == 0.0 {
        f64::INFINITY
    } else {
        -10.0 * mse.log10()
    })
}

#[derive(Debug, Clone)]
pub enum OwnedInput {
    Image(ImageBuffer),
    Features(FeatureGrid),
}

impl OwnedInput {
    pub fn as_input(&self) -> LinkInput<'_> {
        match self {
            OwnedInput::Image(img) => LinkInput::Image(img),
            OwnedInput::Features(z) => LinkInput::Features(z),
        }
    }

    pub fn codec(&self) -> CodecKind {
        match self {
            OwnedInput::Image(_) => CodecKind::PatchBasis,
            OwnedInput::Features(_) => CodecKind::Identity,
        }
    }
}

/// Standard normal feature grid, a stand-in encoder output when no image
/// corpus is available.
pub fn gaussian_features(
    height: usize,
    width: usize,
    channels: usize,
    seed: u64,
) -> Result<FeatureGrid> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = (0..height * width * channels)
        .map(|_| rng.sample::<f64, _>(StandardNormal))
        .collect();
    FeatureGrid::new(height, width, channels, data)
}

#[derive(Debug, Clone)]
pub struct SweepInput {
    pub name: String,
    pub input: OwnedInput,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub config: LinkConfig,
    pub input: String,
    pub report: LinkReport,
}

/// `min, min + step, ...` up to and including `max` (within half a step).
pub fn snr_range(min: f64, max: f64, step: f64) -> Result<Vec<f64>> {
    if !(min.is_finite() && max.is_finite() && step.is_finite()) || step <= 0.0 || max < min {
        return Err(Error::invalid(format!(
            "bad SNR range {min}..{max} step {step}"
        )));
    }
    let count = ((max - min) / step + 0.5).floor() as usize + 1;
    Ok((0..count).map(|k| min + k as f64 * step).collect())
}

/// Cartesian grid of `base` over levels, then SNR, then seed.
pub fn sweep_grid(
    base: &LinkConfig,
    levels: &[usize],
    snrs: &[f64],
    seeds: &[u64],
) -> Vec<LinkConfig> {
    let mut grid = Vec::with_capacity(levels.len() * snrs.len() * seeds.len());
    for &l in levels {
        for &snr in snrs {
            for &seed in seeds {
                grid.push(LinkConfig {
                    levels: l,
                    snr_db: snr,
                    seed,
                    ..base.clone()
                });
            }
        }
    }
    grid
}

/// Runs every `(config, input)` pair, config-major. Input `j` draws its noise
/// from stream `j` of the config's seed, so rows are independent of `jobs`
/// and of each other.
pub fn sweep(
    tx: &Transceiver,
    configs: &[LinkConfig],
    inputs: &[SweepInput],
    jobs: usize,
) -> Result<Vec<SweepRow>> {
    if configs.is_empty() || inputs.is_empty() {
        return Err(Error::invalid(
            "sweep needs at least one config and one input",
        ));
    }
    let depth = tx.codebook(false).depth();
    for cfg in configs {
        cfg.validate(depth)?;
    }
    let pairs: Vec<(usize, usize)> = (0..configs.len())
        .flat_map(|i| (0..inputs.len()).map(move |j| (i, j)))
        .collect();
    let run = |&(i, j): &(usize, usize)| -> Result<SweepRow> {
        let cfg = &configs[i];
        let input = &inputs[j];
        let out = tx.run_link_on_stream(input.input.as_input(), cfg, j as u64)?;
        Ok(SweepRow {
            config: cfg.clone(),
            input: input.name.clone(),
            report: out.report,
        })
    };
    if jobs <= 1 {
        pairs.iter().map(run).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| Error::invalid(format!("thread pool: {e}")))?;
        pool.install(|| pairs.par_iter().map(run).collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanStd {
    pub mean: f64,
    /// Sample standard deviation; 0 for a single run.
    pub std: f64,
}

impl MeanStd {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() > 1 {
            (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Self { mean, std }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    pub input: String,
    /// The first config of the group; its `seed` is not meaningful.
    pub config: LinkConfig,
    pub runs: usize,
    pub ser: MeanStd,
    pub ber: MeanStd,
    pub index_error_rate: MeanStd,
    pub feature_mse: MeanStd,
    pub psnr_db: Option<MeanStd>,
    pub cbr: f64,
}

/// Groups rows that differ only in seed, in order of first appearance.
pub fn aggregate(rows: &[SweepRow]) -> Vec<AggregateRow> {
    let same_group = |a: &SweepRow, b: &SweepRow| {
        a.input == b.input
            && LinkConfig {
                seed: 0,
                ..a.config.clone()
            } == LinkConfig {
                seed: 0,
                ..b.config.clone()
            }
    };
    let mut groups: Vec<Vec<&SweepRow>> = Vec::new();
    for row in rows {
        match groups.iter_mut().find(|g| same_group(g[0], row)) {
            Some(g) => g.push(row),
            None => groups.push(vec![row]),
        }
    }
    groups
        .into_iter()
        .map(|g| {
            let metric = |f: fn(&LinkReport) -> f64| {
                MeanStd::of(&g.iter().map(|r| f(&r.report)).collect::<Vec<_>>())
            };
            let psnr: Option<Vec<f64>> = g.iter().map(|r| r.report.psnr_db).collect();
            AggregateRow {
                input: g[0].input.clone(),
                config: g[0].config.clone(),
                runs: g.len(),
                ser: metric(|r| r.ser),
                ber: metric(|r| r.ber),
                index_error_rate: metric(|r| r.index_error_rate),
                feature_mse: metric(|r| r.feature_mse),
                psnr_db: psnr.map(|v| MeanStd::of(&v)),
                cbr: g[0].report.cbr,
            }
        })
        .collect()
}

fn fmt_f64(v: f64) -> String {
    if v == f64::INFINITY {
        "inf".into()
    } else if v == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        v.to_string()
    }
}

/// Column order of [`write_rows_csv`].
pub const ROW_COLUMNS: [&str; 16] = [
    "input",
    "levels",
    "snr_db",
    "seed",
    "use_cr",
    "use_requantization",
    "noiseless",
    "codec",
    "ser",
    "ber",
    "index_error_rate",
    "feature_mse",
    "psnr_db",
    "cbr",
    "bits_transmitted",
    "symbols_transmitted",
];

/// One line per run after a [`CSV_SCHEMA`] comment line and a header.
/// `psnr_db` is empty for feature runs.
pub fn write_rows_csv<W: Write>(mut writer: W, rows: &[SweepRow]) -> Result<()> {
    writeln!(writer, "{CSV_SCHEMA}").map_err(|e| Error::io("report csv", e))?;
    let mut csv = csv::Writer::from_writer(writer);
    csv.write_record(ROW_COLUMNS)?;
    for row in rows {
        let c = &row.config;
        let r = &row.report;
        csv.write_record([
            row.input.clone(),
            c.levels.to_string(),
            fmt_f64(c.snr_db),
            c.seed.to_string(),
            c.use_cr.to_string(),
            c.use_requantization.to_string(),
            c.noiseless.to_string(),
            c.codec.as_str().to_string(),
            fmt_f64(r.ser),
            fmt_f64(r.ber),
            fmt_f64(r.index_error_rate),
            fmt_f64(r.feature_mse),
            r.psnr_db.map(fmt_f64).unwrap_or_default(),
            fmt_f64(r.cbr),
            r.bits_transmitted.to_string(),
            r.symbols_transmitted.to_string(),
        ])?;
    }
    csv.flush().map_err(|e| Error::io("report csv", e))?;
    Ok(())
}

/// Column order of [`write_summary_csv`].
pub const SUMMARY_COLUMNS: [&str; 19] = [
    "input",
    "levels",
    "snr_db",
    "use_cr",
    "use_requantization",
    "noiseless",
    "codec",
    "runs",
    "ser_mean",
    "ser_std",
    "ber_mean",
    "ber_std",
    "index_error_rate_mean",
    "index_error_rate_std",
    "feature_mse_mean",
    "feature_mse_std",
    "psnr_db_mean",
    "psnr_db_std",
    "cbr",
];

pub fn write_summary_csv<W: Write>(mut writer: W, rows: &[AggregateRow]) -> Result<()> {
    writeln!(writer, "{CSV_SCHEMA} summary").map_err(|e| Error::io("summary csv", e))?;
    let mut csv = csv::Writer::from_writer(writer);
    csv.write_record(SUMMARY_COLUMNS)?;
    for row in rows {
        let c = &row.config;
        csv.write_record([
            row.input.clone(),
            c.levels.to_string(),
            fmt_f64(c.snr_db),
            c.use_cr.to_string(),
            c.use_requantization.to_string(),
            c.noiseless.to_string(),
            c.codec.as_str().to_string(),
            row.runs.to_string(),
            fmt_f64(row.ser.mean),
            fmt_f64(row.ser.std),
            fmt_f64(row.ber.mean),
            fmt_f64(row.ber.std),
            fmt_f64(row.index_error_rate.mean),
            fmt_f64(row.index_error_rate.std),
            fmt_f64(row.feature_mse.mean),
            fmt_f64(row.feature_mse.std),
            row.psnr_db.map(|p| fmt_f64(p.mean)).unwrap_or_default(),
            row.psnr_db.map(|p| fmt_f64(p.std)).unwrap_or_default(),
            fmt_f64(row.cbr),
        ])?;
    }
    csv.flush().map_err(|e| Error::io("summary csv", e))?;
    Ok(())
}
