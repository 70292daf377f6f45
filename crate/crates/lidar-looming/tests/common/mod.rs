//! Shared helpers for the integration test suites.
#![allow(dead_code)]

use lidar_looming::Vec3;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform direction via rejection sampling in the unit ball.
pub fn unit_vec(rng: &mut ChaCha8Rng) -> Vec3 {
    loop {
        let v = Vec3::new(
            rng.gen_range(-1.0..=1.0),
            rng.gen_range(-1.0..=1.0),
            rng.gen_range(-1.0..=1.0),
        );
        let n = v.norm();
        if n > 1e-2 && n <= 1.0 {
            return v.scaled(1.0 / n);
        }
    }
}

/// Random vector with norm uniform in [lo, hi].
pub fn vec_with_norm(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> Vec3 {
    unit_vec(rng).scaled(rng.gen_range(lo..=hi))
}
