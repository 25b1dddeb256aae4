use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

use super::population::unit;

/// Independent Bernoulli draws; returns the selected indices in increasing order.
pub fn poisson_sample_with<R: Rng>(probabilities: &[f64], rng: &mut R) -> Result<Vec<usize>> {
    if let Some(row) = probabilities.iter().position(|&p| !(p > 0.0 && p <= 1.0)) {
        return Err(Error::Domain {
            row,
            value: probabilities[row],
        });
    }
    Ok(probabilities
        .iter()
        .enumerate()
        .filter_map(|(i, &p)| (unit(rng) < p).then_some(i))
        .collect())
}

pub fn poisson_sample(probabilities: &[f64], seed: u64) -> Result<Vec<usize>> {
    poisson_sample_with(probabilities, &mut ChaCha8Rng::seed_from_u64(seed))
}

/// Generator for replicate `replicate` of grid cell `cell`: the seed picks the key and the
/// (cell, replicate) pair picks the stream, so any replicate can be regenerated alone.
pub fn replicate_rng(seed: u64, cell: usize, replicate: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((cell as u64) << 32) | replicate as u64);
    rng
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn certainty_selects_all() {
        assert_eq!(poisson_sample(&[1.0; 7], 1).unwrap(), (0..7).collect::<Vec<_>>());
    }

    #[test]
    fn half_probability_count() {
        let s = poisson_sample(&vec![0.5; 100_000], 42).unwrap();
        let sd = (100_000.0_f64 * 0.25).sqrt();
        assert!((s.len() as f64 - 50_000.0).abs() < 5.0 * sd);
    }

    #[test]
    fn deterministic() {
        let p = vec![0.3; 1000];
        assert_eq!(poisson_sample(&p, 5).unwrap(), poisson_sample(&p, 5).unwrap());
    }

    #[test]
    fn rejects_bad_probabilities() {
        assert!(matches!(
            poisson_sample(&[0.5, 0.0], 1),
            Err(Error::Domain { row: 1, .. })
        ));
        assert!(poisson_sample(&[1.5], 1).is_err());
    }

    #[test]
    fn replicate_streams_differ() {
        let a: u64 = replicate_rng(1, 0, 0).random();
        let b: u64 = replicate_rng(1, 0, 1).random();
        let c: u64 = replicate_rng(1, 1, 0).random();
        assert!(a != b && a != c && b != c);
        assert_eq!(a, replicate_rng(1, 0, 0).random::<u64>());
    }
}
