mod common;

use common::*;
use moc_rvq::codec::{fit_basis, ImageBuffer};
use moc_rvq::pipeline::*;
use moc_rvq::quantizer::{rvq_decode, rvq_encode};
use rand::Rng;

fn noiseless(levels: usize) -> LinkConfig {
    LinkConfig {
        noiseless: true,
        ..LinkConfig::new(levels, 0.0, 0)
    }
}

#[test]
fn noiseless_link_is_exact_at_every_level() {
    let mlc = fitted_gaussian(1, 4000, 4, 4, 16);
    let tx = Transceiver::new(mlc.clone(), None).unwrap();
    let z = gaussian_grid(2, 12, 10, 16);
    for levels in 1..=4 {
        for use_cr in [false, true] {
            let cfg = LinkConfig {
                use_cr,
                ..noiseless(levels)
            };
            let out = tx.run_link(LinkInput::Features(&z), &cfg).unwrap();
            let book = tx.codebook(use_cr);
            let zq = rvq_decode(&rvq_encode(&z, book, levels).unwrap(), book).unwrap();
            assert_eq!(out.received_indices, out.sent_indices);
            assert_eq!(out.features, zq);
            assert_eq!(out.report.index_error_rate, 0.0);
            assert_eq!(out.report.ser, 0.0);
            assert_eq!(out.report.ber, 0.0);
            assert_eq!(out.report.feature_mse, zq.mse(&z).unwrap());
            assert_eq!(out.report.psnr_db, None);
            assert_eq!(out.report.bits_transmitted, 3 * 120 * 4 * levels as u64);
            assert_eq!(out.report.symbols_transmitted, 120 * 2 * levels as u64);
        }
    }
}

#[test]
fn high_snr_index_errors_are_rare() {
    let mlc = fitted_gaussian(3, 4000, 4, 4, 16);
    let tx = Transceiver::new(mlc, None).unwrap();
    // 250 * 250 cells * 16 indices = 10^6 indices
    let z = gaussian_grid(4, 250, 250, 16);
    let out = tx
        .run_link(LinkInput::Features(&z), &LinkConfig::new(4, 30.0, 5))
        .unwrap();
    assert_eq!(out.sent_indices.len(), 1_000_000);
    assert!(
        out.report.index_error_rate < 1e-4,
        "{}",
        out.report.index_error_rate
    );
}

#[test]
fn error_rates_are_consistent() {
    let mlc = fitted_gaussian(6, 4000, 4, 4, 16);
    let tx = Transceiver::new(mlc, None).unwrap();
    let z = gaussian_grid(7, 20, 20, 16);
    let out = tx
        .run_link(LinkInput::Features(&z), &LinkConfig::new(2, 5.0, 1))
        .unwrap();
    let r = &out.report;
    for rate in [r.ser, r.ber, r.index_error_rate] {
        assert!((0.0..=1.0).contains(&rate));
    }
    // one wrong index flips between 1 and 3 label bits
    assert!(r.ber * 3.0 >= r.index_error_rate - 1e-12);
    assert!(r.ber <= r.index_error_rate + 1e-12);
    assert!(r.index_error_rate > 0.0);
    let wrong = out
        .sent_indices
        .as_slice()
        .iter()
        .zip(out.received_indices.as_slice())
        .filter(|(a, b)| a != b)
        .count();
    assert_eq!(
        wrong as f64 / out.sent_indices.len() as f64,
        r.index_error_rate
    );
}

#[test]
fn requantized_output_is_reencoded_retrieval() {
    let mlc = fitted_gaussian(8, 4000, 4, 4, 16);
    let tx = Transceiver::new(mlc.clone(), None).unwrap();
    let z = gaussian_grid(9, 16, 16, 16);
    let cfg = LinkConfig {
        use_requantization: true,
        ..LinkConfig::new(4, 0.0, 3)
    };
    let out = tx.run_link(LinkInput::Features(&z), &cfg).unwrap();
    let retrieved = rvq_decode(&out.received_indices, &mlc).unwrap();
    let expected = rvq_decode(&rvq_encode(&retrieved, &mlc, 4).unwrap(), &mlc).unwrap();
    assert_eq!(out.features, expected);
}

#[test]
fn identity_codec_cbr_uses_equivalent_image_area() {
    let mlc = fitted_gaussian(10, 2000, 4, 4, 16);
    let z = gaussian_grid(11, 32, 32, 16);
    let out = run_link(LinkInput::Features(&z), &noiseless(4), &mlc, None).unwrap();
    assert_eq!(out.report.cbr, 1.0 / 24.0);
    let out = run_link(LinkInput::Features(&z), &noiseless(1), &mlc, None).unwrap();
    assert_eq!(out.report.cbr, 1.0 / 96.0);
}

#[test]
fn image_link_reports_psnr() {
    let corpus: Vec<ImageBuffer> = (0..4).map(|s| synthetic_image(64, 48, s)).collect();
    let basis = fit_basis(&corpus, 16, 0).unwrap();
    let features: Vec<_> = corpus
        .iter()
        .map(|i| moc_rvq::codec::encode(i, &basis).unwrap())
        .collect();
    let mlc = moc_rvq::quantizer::fit(
        &features,
        moc_rvq::quantizer::CodebookShape {
            depth: 4,
            heads: 4,
            entries: 8,
            feature_dim: 16,
        },
        &Default::default(),
    )
    .unwrap();
    let tx = Transceiver::new(mlc, Some(basis)).unwrap();
    let cfg = LinkConfig {
        codec: CodecKind::PatchBasis,
        ..LinkConfig::new(4, 20.0, 0)
    };
    let out = tx.run_link(LinkInput::Image(&corpus[0]), &cfg).unwrap();
    let img = out.image.unwrap();
    assert_eq!((img.height(), img.width()), (64, 48));
    assert!(out.report.psnr_db.unwrap() > 10.0);
    // 8 * 6 cells * 16 indices / 2
    assert_eq!(out.report.cbr, 384.0 / (3.0 * 64.0 * 48.0));
}

#[test]
fn config_validation() {
    let mlc = fitted_gaussian(12, 2000, 2, 4, 16);
    let tx = Transceiver::new(mlc, None).unwrap();
    let z = gaussian_grid(13, 2, 2, 16);
    let img = ImageBuffer::filled(16, 16, [0.5; 3]).unwrap();
    let bad = [
        LinkConfig::new(0, 10.0, 0),
        LinkConfig::new(3, 10.0, 0),
        LinkConfig::new(1, f64::NAN, 0),
        LinkConfig {
            codec: CodecKind::PatchBasis,
            ..LinkConfig::new(1, 10.0, 0)
        },
    ];
    for cfg in &bad {
        let err = tx.run_link(LinkInput::Features(&z), cfg).unwrap_err();
        assert!(err.is_validation(), "{err}");
    }
    let cfg = LinkConfig::new(1, 10.0, 0);
    assert!(tx.run_link(LinkInput::Image(&img), &cfg).is_err());
    let cfg = LinkConfig {
        codec: CodecKind::PatchBasis,
        ..cfg
    };
    assert!(tx.run_link(LinkInput::Image(&img), &cfg).is_err());
}

#[test]
fn psnr_of_uniform_noise() {
    let mut r = rng(14);
    let a = 0.2;
    let clean = ImageBuffer::filled(200, 200, [0.5; 3]).unwrap();
    let noisy: Vec<f64> = (0..200 * 200 * 3)
        .map(|_| 0.5 + r.random_range(-a..a))
        .collect();
    let noisy = ImageBuffer::new(200, 200, noisy).unwrap();
    let v = a * a / 3.0;
    let psnr = compute_psnr(&clean, &noisy).unwrap();
    assert!((psnr - 10.0 * (1.0 / v).log10()).abs() < 0.05, "{psnr}");
}

fn small_sweep_inputs() -> Vec<SweepInput> {
    (0..2)
        .map(|i| SweepInput {
            name: format!("z{i}"),
            input: OwnedInput::Features(gaussian_grid(20 + i, 6, 6, 16)),
        })
        .collect()
}

#[test]
fn sweep_rows_and_determinism() {
    let mlc = fitted_gaussian(15, 2000, 4, 4, 16);
    let tx = Transceiver::new(mlc, None).unwrap();
    let inputs = small_sweep_inputs();

    let single = sweep(&tx, &[LinkConfig::new(2, 5.0, 0)], &inputs[..1], 1).unwrap();
    assert_eq!(single.len(), 1);

    let snrs = snr_range(-5.0, 30.0, 5.0).unwrap();
    let seeds: Vec<u64> = (0..20).collect();
    let grid = sweep_grid(&LinkConfig::new(1, 0.0, 0), &[1, 2, 3, 4], &snrs, &seeds);
    let rows = sweep(&tx, &grid, &inputs, 1).unwrap();
    assert_eq!(rows.len(), 8 * 4 * 20 * 2);
    assert_eq!(sweep(&tx, &grid, &inputs, 4).unwrap(), rows);

    let repeated = sweep(&tx, &[grid[0].clone(), grid[0].clone()], &inputs[..1], 1).unwrap();
    assert_eq!(repeated[0], repeated[1]);

    let mut a = Vec::new();
    let mut b = Vec::new();
    write_rows_csv(&mut a, &rows).unwrap();
    write_rows_csv(&mut b, &sweep(&tx, &grid, &inputs, 2).unwrap()).unwrap();
    assert_eq!(a, b);
    let text = String::from_utf8(a).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some(CSV_SCHEMA));
    assert_eq!(lines.next().unwrap(), ROW_COLUMNS.join(","));
    assert_eq!(lines.count(), rows.len());

    let summary = aggregate(&rows);
    assert_eq!(summary.len(), 8 * 4 * 2);
    assert!(summary.iter().all(|s| s.runs == 20));
    let mut out = Vec::new();
    write_summary_csv(&mut out, &summary).unwrap();
    assert_eq!(
        String::from_utf8(out).unwrap().lines().count(),
        2 + summary.len()
    );
}

#[test]
fn sweep_rejects_empty_inputs() {
    let mlc = fitted_gaussian(16, 2000, 1, 4, 16);
    let tx = Transceiver::new(mlc, None).unwrap();
    assert!(sweep(&tx, &[], &small_sweep_inputs(), 1).is_err());
    assert!(sweep(&tx, &[LinkConfig::new(1, 0.0, 0)], &[], 1).is_err());
}

#[test]
fn gaussian_features_are_seeded() {
    let a = gaussian_features(5, 4, 16, 3).unwrap();
    assert_eq!(a.shape(), (5, 4, 16));
    assert_eq!(a, gaussian_features(5, 4, 16, 3).unwrap());
    assert_ne!(a, gaussian_features(5, 4, 16, 4).unwrap());
    assert!(gaussian_features(0, 4, 16, 3).unwrap_err().is_validation());
}
