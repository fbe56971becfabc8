//! Deterministic direction sets on the unit sphere.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN_ANGLE: f64 = 2.399_963_229_728_653;

/// Fibonacci lattice with `count` points on S^2.
pub fn fibonacci_sphere(count: usize) -> Vec<[f64; 3]> {
    let count = count.max(1);
    (0..count)
        .map(|i| {
            let z = 1.0 - 2.0 * (i as f64 + 0.5) / count as f64;
            let r = (1.0 - z * z).max(0.0).sqrt();
            let th = GOLDEN_ANGLE * i as f64;
            [r * th.cos(), r * th.sin(), z]
        })
        .collect()
}

/// Sample `count` directions on S^{n-1}.
///
/// n = 1 gives {+1, -1}, n = 2 an equispaced circle, n = 3 the Fibonacci
/// lattice, larger n seeded Gaussian directions.
pub fn sphere_directions(dim: usize, count: usize) -> Vec<Vec<f64>> {
    match dim {
        0 => Vec::new(),
        1 => vec![vec![1.0], vec![-1.0]],
        2 => (0..count.max(1))
            .map(|i| {
                let th = 2.0 * std::f64::consts::PI * (i as f64 + 0.5) / count.max(1) as f64;
                vec![th.cos(), th.sin()]
            })
            .collect(),
        3 => fibonacci_sphere(count).into_iter().map(|p| p.to_vec()).collect(),
        _ => {
            let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0001 + dim as u64);
            (0..count.max(1))
                .map(|_| loop {
                    let v: Vec<f64> = (0..dim).map(|_| gaussian(&mut rng)).collect();
                    let n = norm(&v);
                    if n > 1e-8 {
                        break v.iter().map(|x| x / n).collect();
                    }
                })
                .collect()
        }
    }
}

pub(crate) fn gaussian<R: Rng>(rng: &mut R) -> f64 {
    // Box-Muller; one value per call keeps the stream simple.
    let u1: f64 = rng.random::<f64>().max(f64::MIN_POSITIVE);
    let u2: f64 = rng.random::<f64>();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Uniformly distributed random direction on S^{n-1}.
pub fn random_direction<R: Rng>(rng: &mut R, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| gaussian(rng)).collect();
        let n = norm(&v);
        if n > 1e-8 {
            return v.iter().map(|x| x / n).collect();
        }
    }
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn normalize(v: &[f64]) -> Vec<f64> {
    let n = norm(v);
    v.iter().map(|x| x / n).collect()
}

/// Unit vectors (u, w) completing `n` to a right-handed orthonormal frame.
pub fn tangent_basis(n: &[f64; 3]) -> ([f64; 3], [f64; 3]) {
    let a = if n[0].abs() < 0.9 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
    let u = cross(&a, n);
    let un = (u[0] * u[0] + u[1] * u[1] + u[2] * u[2]).sqrt();
    let u = [u[0] / un, u[1] / un, u[2] / un];
    let w = cross(n, &u);
    (u, w)
}

pub fn cross(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fibonacci_points_are_unit_and_balanced() {
        let pts = fibonacci_sphere(500);
        let mut mean = [0.0; 3];
        for p in &pts {
            let n = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
            assert!((n - 1.0).abs() < 1e-14);
            for k in 0..3 {
                mean[k] += p[k] / 500.0;
            }
        }
        assert!(mean.iter().all(|m| m.abs() < 1e-2));
    }

    #[test]
    fn high_dimensional_directions_are_deterministic() {
        assert_eq!(sphere_directions(5, 10), sphere_directions(5, 10));
    }

    #[test]
    fn tangent_basis_is_orthonormal() {
        let n = [0.0, 0.6, 0.8];
        let (u, w) = tangent_basis(&n);
        assert!(dot(&u, &n).abs() < 1e-15 && dot(&w, &n).abs() < 1e-15 && dot(&u, &w).abs() < 1e-15);
        assert!((norm(&w) - 1.0).abs() < 1e-15);
    }
}
