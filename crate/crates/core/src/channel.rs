//! Additive white Gaussian noise.
//!
//! SNR is the ratio of average symbol energy (1 for the 64-QAM map) to the
//! total complex noise variance, so `sigma^2 = 10^(-snr_db / 10)` and each
//! real component has variance `sigma^2 / 2`. Noise comes from ChaCha8
//! seeded with `seed` on stream `stream`, sampled with `rand_distr`'s
//! ziggurat `StandardNormal`, real part before imaginary part per symbol.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::modem::SymbolStream;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelConfig {
    pub snr_db: f64,
    pub seed: u64,
    /// Independent noise stream under the same seed.
    pub stream: u64,
    pub noiseless: bool,
}

impl ChannelConfig {
    pub fn new(snr_db: f64, seed: u64) -> Self {
        Self {
            snr_db,
            seed,
            stream: 0,
            noiseless: false,
        }
    }

    pub fn noiseless() -> Self {
        Self {
            snr_db: f64::INFINITY,
            seed: 0,
            stream: 0,
            noiseless: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.noiseless && !self.snr_db.is_finite() {
            return Err(Error::invalid(format!(
                "snr_db {} is not finite",
                self.snr_db
            )));
        }
        Ok(())
    }

    /// Total complex noise variance `sigma^2`; zero when noiseless.
    pub fn noise_variance(&self) -> f64 {
        if self.noiseless {
            0.0
        } else {
            10f64.powf(-self.snr_db / 10.0)
        }
    }

    fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        rng
    }
}

/// The `n` noise samples [`transmit`] adds under `cfg`.
pub fn awgn(n: usize, cfg: &ChannelConfig) -> Result<Vec<Complex64>> {
    cfg.validate()?;
    if cfg.noiseless {
        return Ok(vec![Complex64::new(0.0, 0.0); n]);
    }
    let std = (cfg.noise_variance() / 2.0).sqrt();
    let mut rng = cfg.rng();
    Ok((0..n)
        .map(|_| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            Complex64::new(std * re, std * im)
        })
        .collect())
}

/// `y = x + w`.
pub fn transmit(x: &SymbolStream, cfg: &ChannelConfig) -> Result<SymbolStream> {
    if cfg.noiseless {
        cfg.validate()?;
        return Ok(x.clone());
    }
    let noise = awgn(x.len(), cfg)?;
    Ok(SymbolStream {
        symbols: x.symbols.iter().zip(noise).map(|(s, w)| s + w).collect(),
        padded: x.padded,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modem::modulate;

    #[test]
    fn noiseless_is_bitwise_identity() {
        let x = modulate(&[1, 2, 3, 4, 5]).unwrap();
        let y = transmit(&x, &ChannelConfig::noiseless()).unwrap();
        assert_eq!(x, y);
    }

    #[test]
    fn zero_db_is_unit_variance() {
        assert_eq!(ChannelConfig::new(0.0, 0).noise_variance(), 1.0);
        assert!((ChannelConfig::new(10.0, 0).noise_variance() - 0.1).abs() < 1e-15);
    }

    #[test]
    fn seeded_noise_repeats() {
        let cfg = ChannelConfig::new(3.0, 11);
        assert_eq!(awgn(100, &cfg).unwrap(), awgn(100, &cfg).unwrap());
        let other = ChannelConfig {
            stream: 1,
            ..cfg.clone()
        };
        assert_ne!(awgn(100, &cfg).unwrap(), awgn(100, &other).unwrap());
    }

    #[test]
    fn infinite_snr_needs_noiseless_flag() {
        let x = modulate(&[0, 0]).unwrap();
        assert!(transmit(&x, &ChannelConfig::new(f64::NAN, 0)).is_err());
        assert!(transmit(&x, &ChannelConfig::new(f64::INFINITY, 0)).is_err());
    }
}
