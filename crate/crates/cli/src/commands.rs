use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use moc_rvq::codec::{self, fit_basis, ImageBuffer, PATCH_LEN};
use moc_rvq::modem::write_symbols_csv;
use moc_rvq::pipeline::{
    aggregate, gaussian_features, snr_range, sweep_grid, write_rows_csv, write_summary_csv,
    LinkConfig, OwnedInput, SweepInput, SweepRow, Transceiver,
};
use moc_rvq::quantizer::{
    fit_with_report, CodebookShape, FitConfig, DEFAULT_DEPTH, DEFAULT_HEADS, OCTONARY,
};
use moc_rvq::reorder::{gray_adjacent_distance, mean_gray_adjacent_distance, reorder_multilevel};
use moc_rvq::store::CodebookContainer;

use crate::config::{FitArgs, InspectArgs, ReorderArgs, RunArgs, SweepArgs};
use crate::CliError;

const DEFAULT_N_Q: usize = 16;
const DEFAULT_SAMPLES: usize = 10_000;

fn required<T>(value: Option<T>, name: &str) -> Result<T, CliError> {
    value.ok_or_else(|| {
        CliError::Config(format!(
            "missing --{} (or `{name}` in the config file)",
            name.replace('_', "-")
        ))
    })
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|source| CliError::Io {
            path: path.to_owned(),
            source,
        })
}

/// Runs `write` against `path`, or stdout when no path is given.
fn with_output(
    path: Option<&Path>,
    write: impl FnOnce(&mut dyn Write) -> moc_rvq::Result<()>,
) -> Result<(), CliError> {
    match path {
        Some(p) => {
            let mut out = create(p)?;
            write(&mut out)?;
            out.flush().map_err(|source| CliError::Io {
                path: p.to_owned(),
                source,
            })
        }
        None => Ok(write(&mut std::io::stdout().lock())?),
    }
}

/// Loads PNG files, expanding directories to their `.png` entries in name
/// order.
fn load_images(paths: &[PathBuf]) -> Result<Vec<(String, ImageBuffer)>, CliError> {
    let mut files = Vec::new();
    for path in paths {
        if path.is_dir() {
            let entries = std::fs::read_dir(path).map_err(|source| CliError::Io {
                path: path.clone(),
                source,
            })?;
            let mut found: Vec<PathBuf> = entries
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| {
                    p.is_file() && p.extension().is_some_and(|x| x.eq_ignore_ascii_case("png"))
                })
                .collect();
            found.sort();
            files.extend(found);
        } else {
            files.push(path.clone());
        }
    }
    if files.is_empty() {
        return Err(CliError::Config("no PNG images found".into()));
    }
    files
        .into_iter()
        .map(|f| {
            let name = f.file_stem().map_or_else(
                || f.display().to_string(),
                |s| s.to_string_lossy().into_owned(),
            );
            Ok((name, ImageBuffer::load_png(&f)?))
        })
        .collect()
}

/// Parses `HxW`.
fn parse_size(text: &str) -> Result<(usize, usize), CliError> {
    let bad = || CliError::Config(format!("synthetic size `{text}` is not HxW"));
    let (h, w) = text.split_once(['x', 'X']).ok_or_else(bad)?;
    let h: usize = h.trim().parse().map_err(|_| bad())?;
    let w: usize = w.trim().parse().map_err(|_| bad())?;
    if h == 0 || w == 0 {
        return Err(bad());
    }
    Ok((h, w))
}

fn link_inputs(
    images: Option<Vec<PathBuf>>,
    synthetic: Option<String>,
    count: usize,
    seed: u64,
    channels: usize,
) -> Result<Vec<SweepInput>, CliError> {
    match (images, synthetic) {
        (Some(_), Some(_)) => Err(CliError::Config(
            "--input and --synthetic are exclusive".into(),
        )),
        (None, None) => Err(CliError::Config("give --input or --synthetic".into())),
        (Some(paths), None) => Ok(load_images(&paths)?
            .into_iter()
            .map(|(name, img)| SweepInput {
                name,
                input: OwnedInput::Image(img),
            })
            .collect()),
        (None, Some(size)) => {
            let (h, w) = parse_size(&size)?;
            if count == 0 {
                return Err(CliError::Config("synthetic_count must be >= 1".into()));
            }
            (0..count as u64)
                .map(|k| {
                    Ok(SweepInput {
                        name: format!("gaussian{}", seed + k),
                        input: OwnedInput::Features(gaussian_features(h, w, channels, seed + k)?),
                    })
                })
                .collect()
        }
    }
}

pub fn fit(a: FitArgs) -> Result<(), CliError> {
    let output = required(a.output, "output")?;
    let depth = a.depth.unwrap_or(DEFAULT_DEPTH);
    let heads = a.heads.unwrap_or(DEFAULT_HEADS);
    let n_q = a.n_q.unwrap_or(DEFAULT_N_Q);
    let seed = a.seed.unwrap_or(0);
    let cfg = FitConfig {
        max_iterations: a.max_iterations.unwrap_or(100),
        convergence_tol: a.tolerance.unwrap_or(1e-6),
        seed,
        ..FitConfig::default()
    };
    cfg.validate()?;
    if depth == 0 || heads == 0 || n_q == 0 || !n_q.is_multiple_of(heads) {
        return Err(CliError::Config(format!(
            "need depth, heads >= 1 and n_q a positive multiple of heads; got D={depth}, P={heads}, n_q={n_q}"
        )));
    }
    let shape = CodebookShape {
        depth,
        heads,
        entries: OCTONARY,
        feature_dim: n_q,
    };

    let (features, basis) = match (a.corpus, a.synthetic.unwrap_or(false)) {
        (Some(_), true) => {
            return Err(CliError::Config(
                "--corpus and --synthetic are exclusive".into(),
            ))
        }
        (None, false) => return Err(CliError::Config("give --corpus DIR or --synthetic".into())),
        (None, true) => {
            let samples = a.samples.unwrap_or(DEFAULT_SAMPLES);
            (vec![gaussian_features(samples, 1, n_q, seed)?], None)
        }
        (Some(dir), false) => {
            if n_q > PATCH_LEN {
                return Err(CliError::Config(format!(
                    "n_q {n_q} exceeds the patch length {PATCH_LEN}"
                )));
            }
            let images: Vec<ImageBuffer> = load_images(&[dir])?
                .into_iter()
                .map(|(_, img)| img)
                .collect();
            let basis = fit_basis(&images, n_q, seed)?;
            let features = images
                .iter()
                .map(|img| codec::encode(img, &basis))
                .collect::<moc_rvq::Result<Vec<_>>>()?;
            (features, Some(basis))
        }
    };

    let (mlc, report) = fit_with_report(&features, shape, &cfg)?;
    println!("D={depth} P={heads} N={OCTONARY} n_q={n_q}");
    for (d, e) in report.residual_energy.iter().enumerate() {
        println!("residual energy after level {d}: {e:.6}");
    }
    let mut container = CodebookContainer::new(mlc);
    container.basis = basis;
    container.save(&output)?;
    println!("wrote {}", output.display());
    Ok(())
}

pub fn reorder(a: ReorderArgs) -> Result<(), CliError> {
    let path = required(a.codebook, "codebook")?;
    let output = a.output.unwrap_or_else(|| path.clone());
    let mut container = CodebookContainer::load(&path)?;
    let before = mean_gray_adjacent_distance(&container.codebook)?;
    let (reordered, perms) = reorder_multilevel(&container.codebook, true)?;
    let after = mean_gray_adjacent_distance(&reordered)?;
    container.apply_reordering(reordered, perms)?;
    container.save(&output)?;
    println!("mean Gray-adjacent distance: {before:.6} -> {after:.6}");
    println!("wrote {}", output.display());
    Ok(())
}

pub fn run(a: RunArgs) -> Result<(), CliError> {
    let container = CodebookContainer::load(required(a.codebook, "codebook")?)?;
    let depth = container.codebook.depth();
    let channels = container.codebook.feature_dim();
    let noiseless = a.noiseless.unwrap_or(false);
    let snr_db = match a.snr_db {
        Some(s) => s,
        None if noiseless => f64::INFINITY,
        None => {
            return Err(CliError::Config(
                "missing --snr-db (or `snr_db` in the config file)".into(),
            ))
        }
    };
    let input = link_inputs(
        a.input.map(|p| vec![p]),
        a.synthetic,
        1,
        a.input_seed.unwrap_or(0),
        channels,
    )?
    .remove(0);
    let cfg = LinkConfig {
        use_cr: a.use_cr.unwrap_or(false),
        use_requantization: a.use_requantization.unwrap_or(false),
        noiseless,
        codec: input.input.codec(),
        ..LinkConfig::new(a.levels.unwrap_or(depth), snr_db, a.seed.unwrap_or(0))
    };
    cfg.validate(depth)?;
    let is_image = matches!(input.input, OwnedInput::Image(_));
    if a.image_out.is_some() && !is_image {
        return Err(CliError::Config("--image-out needs an image input".into()));
    }
    if is_image && container.basis.is_none() {
        return Err(CliError::Config(
            "image input needs a codebook file with a patch basis".into(),
        ));
    }

    let tx = Transceiver::new(container.codebook, container.basis)?;
    let out = tx.run_link(input.input.as_input(), &cfg)?;
    let r = &out.report;
    eprintln!(
        "index_error_rate={} ser={} ber={} feature_mse={} psnr_db={} cbr={}",
        r.index_error_rate,
        r.ser,
        r.ber,
        r.feature_mse,
        r.psnr_db.map_or("-".into(), |p| p.to_string()),
        r.cbr
    );
    if let (Some(path), Some(img)) = (&a.image_out, &out.image) {
        img.save_png(path)?;
    }
    if let Some(path) = &a.symbols {
        with_output(Some(path), |w| write_symbols_csv(w, &out.symbols))?;
    }
    let row = SweepRow {
        config: cfg,
        input: input.name,
        report: out.report,
    };
    with_output(a.output.as_deref(), |w| {
        write_rows_csv(w, std::slice::from_ref(&row))
    })
}

pub fn sweep(a: SweepArgs) -> Result<(), CliError> {
    let container = CodebookContainer::load(required(a.codebook, "codebook")?)?;
    let depth = container.codebook.depth();
    let channels = container.codebook.feature_dim();
    let inputs = link_inputs(
        a.input,
        a.synthetic,
        a.synthetic_count.unwrap_or(1),
        a.input_seed.unwrap_or(0),
        channels,
    )?;
    let is_image = matches!(inputs[0].input, OwnedInput::Image(_));
    if a.images_dir.is_some() && !is_image {
        return Err(CliError::Config("--images-dir needs image inputs".into()));
    }
    if is_image && container.basis.is_none() {
        return Err(CliError::Config(
            "image inputs need a codebook file with a patch basis".into(),
        ));
    }
    let jobs = a.jobs.unwrap_or(1);
    if jobs == 0 {
        return Err(CliError::Config("jobs must be >= 1".into()));
    }
    let seed_count = a.seeds.unwrap_or(20);
    if seed_count == 0 {
        return Err(CliError::Config("seeds must be >= 1".into()));
    }
    let seed_base = a.seed_base.unwrap_or(0);
    let seeds: Vec<u64> = (seed_base..seed_base + seed_count).collect();
    let levels = a.levels.unwrap_or_else(|| (1..=depth).collect());
    let snrs = snr_range(
        a.snr_min.unwrap_or(-5.0),
        a.snr_max.unwrap_or(30.0),
        a.snr_step.unwrap_or(5.0),
    )?;
    let base = LinkConfig {
        use_cr: a.use_cr.unwrap_or(false),
        use_requantization: a.use_requantization.unwrap_or(false),
        noiseless: a.noiseless.unwrap_or(false),
        codec: inputs[0].input.codec(),
        ..LinkConfig::new(1, 0.0, 0)
    };
    let grid = sweep_grid(&base, &levels, &snrs, &seeds);
    for cfg in &grid {
        cfg.validate(depth)?;
    }

    let tx = Transceiver::new(container.codebook, container.basis)?;
    let rows = moc_rvq::pipeline::sweep(&tx, &grid, &inputs, jobs)?;
    with_output(a.output.as_deref(), |w| write_rows_csv(w, &rows))?;
    if let Some(path) = &a.summary {
        with_output(Some(path), |w| write_summary_csv(w, &aggregate(&rows)))?;
    }
    if let Some(dir) = &a.images_dir {
        std::fs::create_dir_all(dir).map_err(|source| CliError::Io {
            path: dir.clone(),
            source,
        })?;
        for cfg in grid.iter().filter(|c| c.seed == seed_base) {
            for (j, input) in inputs.iter().enumerate() {
                let out = tx.run_link_on_stream(input.input.as_input(), cfg, j as u64)?;
                if let Some(img) = out.image {
                    let name = format!("{}_L{}_snr{}.png", input.name, cfg.levels, cfg.snr_db);
                    img.save_png(dir.join(name))?;
                }
            }
        }
    }
    eprintln!("{} runs over {} inputs", rows.len(), inputs.len());
    Ok(())
}

pub fn inspect(a: InspectArgs) -> Result<(), CliError> {
    let path = required(a.codebook, "codebook")?;
    let container = CodebookContainer::load(&path)?;
    let m = &container.codebook;
    println!("{}", path.display());
    println!(
        "D={} P={} N={} head_dim={} feature_dim={}",
        m.depth(),
        m.head_count(),
        m.entries_per_head(),
        m.head_dim(),
        m.feature_dim()
    );
    println!("joint states per level: {}", m.level(0).state_count());
    println!("level  mean_norm  min_distance  gray_adjacent");
    for (d, level) in m.levels().iter().enumerate() {
        let mut norms = Vec::new();
        let mut min_distance = f64::INFINITY;
        let mut gray = 0.0;
        for cb in level.heads() {
            let entries: Vec<&[f64]> = cb.entries().collect();
            norms.extend(
                entries
                    .iter()
                    .map(|e| e.iter().map(|v| v * v).sum::<f64>().sqrt()),
            );
            for i in 0..entries.len() {
                for j in i + 1..entries.len() {
                    let dist = entries[i]
                        .iter()
                        .zip(entries[j])
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum::<f64>()
                        .sqrt();
                    min_distance = min_distance.min(dist);
                }
            }
            gray += gray_adjacent_distance(cb)?;
        }
        let mean_norm = norms.iter().sum::<f64>() / norms.len() as f64;
        println!(
            "{:>5}  {mean_norm:>9.5}  {min_distance:>12.5}  {:>13.5}",
            d + 1,
            gray / level.head_count() as f64
        );
    }
    println!(
        "mean Gray-adjacent distance: {:.6}",
        mean_gray_adjacent_distance(m)?
    );
    println!(
        "reordered: {}",
        if container.cr_permutations.is_some() {
            "yes"
        } else {
            "no"
        }
    );
    match &container.basis {
        Some(b) => println!(
            "patch basis: n_q={} orthonormality error {:.2e}",
            b.n_q(),
            b.orthonormality_error()
        ),
        None => println!("patch basis: none"),
    }
    Ok(())
}
