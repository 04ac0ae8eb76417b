//! Measurement model: exact populations or binomial shot noise.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Readout {
    /// `None` reads exact expectation values.
    pub shots: Option<u64>,
    pub seed: u64,
}

impl Default for Readout {
    fn default() -> Self {
        Readout::exact()
    }
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl Readout {
    pub fn exact() -> Self {
        Readout { shots: None, seed: 0 }
    }

    pub fn shots(n: u64, seed: u64) -> Self {
        Readout { shots: Some(n), seed }
    }

    /// Generator for one measurement stream, independent of evaluation
    /// order.
    pub fn rng(&self, stream: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(splitmix(self.seed ^ splitmix(stream)))
    }

    /// Estimated probability of an outcome with true probability `p`.
    pub fn sample(&self, p: f64, stream: u64) -> f64 {
        let p = p.clamp(0.0, 1.0);
        match self.shots {
            None => p,
            Some(0) => p,
            Some(n) => {
                let k = Binomial::new(n, p).expect("probability in [0, 1]").sample(&mut self.rng(stream));
                k as f64 / n as f64
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_passes_through() {
        assert_eq!(Readout::exact().sample(0.3, 7), 0.3);
    }

    #[test]
    fn shots_are_reproducible_and_unbiased() {
        let r = Readout::shots(10_000, 42);
        assert_eq!(r.sample(0.3, 1), r.sample(0.3, 1));
        let mean: f64 = (0..200).map(|s| r.sample(0.3, s)).sum::<f64>() / 200.0;
        assert!((mean - 0.3).abs() < 0.003);
    }
}
