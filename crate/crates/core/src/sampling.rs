//! Seeded random streams.
//!
//! Every sample draws from its own ChaCha stream selected by `(seed, index)`,
//! so results do not depend on how the work is split across threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::field::Domain;

pub fn stream(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Uniformly distributed unit vector in `R^n`.
pub fn unit_direction<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let r = v.iter().map(|c| c * c).sum::<f64>().sqrt();
        if r > 1e-12 {
            return v.into_iter().map(|c| c / r).collect();
        }
    }
}

pub fn point_in<R: Rng>(rng: &mut R, domain: &Domain) -> Vec<f64> {
    domain
        .lower
        .iter()
        .zip(&domain.upper)
        .map(|(&lo, &hi)| lo + (hi - lo) * rng.random::<f64>())
        .collect()
}

/// `count` points of the box, one stream per point.
pub fn points_in(domain: &Domain, count: usize, seed: u64) -> Vec<Vec<f64>> {
    (0..count)
        .map(|i| point_in(&mut stream(seed, i as u64), domain))
        .collect()
}
