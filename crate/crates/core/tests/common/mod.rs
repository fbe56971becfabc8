#![allow(dead_code)]

use anitherm::MediumSpec;
use rand::Rng;

/// Log-uniform sample in [lo, hi].
pub fn log_uniform<R: Rng>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    (rng.random_range(lo.ln()..hi.ln())).exp()
}

/// Positive cubic parameters (λ, μ, τ) kept 0.1·scale away from the walls
/// λ+μ = 0, τ = μ and τ = λ+2μ, where extra degeneracies appear.
pub fn restricted_cubic<R: Rng>(rng: &mut R) -> (f64, f64, f64) {
    loop {
        let tau: f64 = rng.random_range(1.0..10.0);
        let mu: f64 = rng.random_range(0.3..6.0);
        let lambda: f64 = rng.random_range(-2.0 * mu - tau / 2.0..tau);
        let s = 0.1 * tau.max(mu).max(lambda.abs());
        if (lambda + mu).abs() < s || (tau - mu).abs() < s || (tau - lambda - 2.0 * mu).abs() < s {
            continue;
        }
        if let Ok(m) = MediumSpec::cubic(3, lambda, mu, tau) {
            if m.positivity_check(400).positive {
                return (lambda, mu, tau);
            }
        }
    }
}

/// Positive hexagonal parameters (τ₁, τ₂, λ₁, λ₂, μ).
pub fn positive_hexagonal<R: Rng>(rng: &mut R) -> [f64; 5] {
    loop {
        let p = [
            rng.random_range(1.0..10.0),
            rng.random_range(1.0..10.0),
            rng.random_range(-2.0..8.0),
            rng.random_range(-2.0..8.0),
            rng.random_range(0.3..5.0),
        ];
        if let Ok(m) = MediumSpec::hexagonal(p[0], p[1], p[2], p[3], p[4]) {
            if m.positivity_check(400).positive {
                return p;
            }
        }
    }
}

/// A positive isotropic, cubic or hexagonal medium in three dimensions.
pub fn random_medium<R: Rng>(rng: &mut R) -> MediumSpec {
    match rng.random_range(0..3) {
        0 => {
            let mu: f64 = rng.random_range(0.3..6.0);
            let lambda = rng.random_range(-2.0 * mu / 3.0 + 0.1..8.0);
            MediumSpec::isotropic(3, lambda, mu).unwrap()
        }
        1 => loop {
            let tau: f64 = rng.random_range(1.0..10.0);
            let mu: f64 = rng.random_range(0.3..6.0);
            let lambda: f64 = rng.random_range(-2.0 * mu - tau / 2.0..tau);
            if let Ok(m) = MediumSpec::cubic(3, lambda, mu, tau) {
                if m.positivity_check(200).positive {
                    break m;
                }
            }
        },
        _ => {
            let p = positive_hexagonal(rng);
            MediumSpec::hexagonal(p[0], p[1], p[2], p[3], p[4]).unwrap()
        }
    }
}
