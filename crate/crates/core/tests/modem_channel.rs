mod common;

use common::rng;
use moc_rvq::channel::{awgn, transmit, ChannelConfig};
use moc_rvq::modem::*;
use moc_rvq::quantizer::IndexTensor;
use proptest::prelude::*;
use rand::Rng;
use statrs::function::erf::erfc;

fn gaussian_tail(x: f64) -> f64 {
    0.5 * erfc(x / std::f64::consts::SQRT_2)
}

/// Per-axis 8-PAM symbol error probability: inner levels err on both sides,
/// the two outer ones on one, `2 (1 - 1/8) Q(d / s)` with half-gap
/// `d = 1/sqrt(42)` and per-axis noise deviation `s = sqrt(sigma^2 / 2)`.
fn pam8_ser(snr_db: f64) -> f64 {
    let sigma2 = 10f64.powf(-snr_db / 10.0);
    let half_gap = 1.0 / 42f64.sqrt();
    1.75 * gaussian_tail(half_gap / (sigma2 / 2.0).sqrt())
}

#[test]
fn monte_carlo_energy_is_unit() {
    let mut r = rng(1);
    let indices: Vec<u8> = (0..200_000).map(|_| r.random_range(0..8u8)).collect();
    let e = modulate(&indices).unwrap().mean_energy();
    assert!((e - 1.0).abs() < 0.01, "{e}");
}

#[test]
fn closed_form_energy() {
    // (1 + 9 + 25 + 49) / 4 = 21 per axis over 42
    let map = ConstellationMap::qam64();
    let per_axis: f64 = map.axis_levels().iter().map(|v| v * v).sum::<f64>() / 8.0;
    assert!((2.0 * per_axis - 1.0).abs() <= 1e-12);
}

#[test]
fn axis_ser_matches_pam_oracle_at_10_db() {
    let n = 200_000;
    let mut r = rng(2);
    let indices: Vec<u8> = (0..2 * n).map(|_| r.random_range(0..8u8)).collect();
    let x = modulate(&indices).unwrap();
    let y = transmit(&x, &ChannelConfig::new(10.0, 8)).unwrap();
    let got = demodulate(&y, indices.len()).unwrap();
    let errors = got.iter().zip(&indices).filter(|(a, b)| a != b).count();
    let p = pam8_ser(10.0);
    let measured = errors as f64 / indices.len() as f64;
    let se = (p * (1.0 - p) / indices.len() as f64).sqrt();
    assert!(
        (measured - p).abs() <= 3.0 * se,
        "measured {measured}, oracle {p}"
    );
}

#[test]
fn noise_statistics() {
    let n = 1_000_000;
    let cfg = ChannelConfig::new(10.0, 4);
    let w = awgn(n, &cfg).unwrap();
    let half = cfg.noise_variance() / 2.0;
    let var_re = w.iter().map(|v| v.re * v.re).sum::<f64>() / n as f64;
    let var_im = w.iter().map(|v| v.im * v.im).sum::<f64>() / n as f64;
    assert!((var_re / half - 1.0).abs() < 0.01, "{var_re}");
    assert!((var_im / half - 1.0).abs() < 0.01, "{var_im}");
    let corr = w.iter().map(|v| v.re * v.im).sum::<f64>() / n as f64 / (var_re * var_im).sqrt();
    assert!(corr.abs() < 0.01, "{corr}");
}

#[test]
fn empirical_snr_is_calibrated() {
    let n = 1_000_000;
    let mut r = rng(5);
    let indices: Vec<u8> = (0..2 * n).map(|_| r.random_range(0..8u8)).collect();
    let x = modulate(&indices).unwrap();
    let cfg = ChannelConfig::new(10.0, 6);
    let y = transmit(&x, &cfg).unwrap();
    let signal = x.mean_energy();
    let noise = x
        .symbols
        .iter()
        .zip(&y.symbols)
        .map(|(a, b)| (b - a).norm_sqr())
        .sum::<f64>()
        / n as f64;
    let snr = 10.0 * (signal / noise).log10();
    assert!((snr - 10.0).abs() < 0.1, "{snr}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn serialization_round_trip(
        shape in (1usize..5, 1usize..5, 1usize..6, 1usize..6),
        seed in any::<u64>(),
    ) {
        let (l, p, h, w) = shape;
        let mut r = rng(seed);
        let data: Vec<u8> = (0..l * p * h * w).map(|_| r.random_range(0..8u8)).collect();
        let s = IndexTensor::new(l, p, h, w, data).unwrap();
        let seq = serialize_indices(&s);
        prop_assert_eq!(deserialize_indices(&seq, s.shape()).unwrap(), s.clone());
        let y = modulate(&seq).unwrap();
        prop_assert_eq!(y.len(), seq.len().div_ceil(2));
        prop_assert_eq!(demodulate(&y, seq.len()).unwrap(), seq);
    }
}
