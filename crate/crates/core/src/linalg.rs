//! Small dense complex eigenproblems: balancing, Schur-based eigenvectors,
//! spectral projectors and a contour-integral fallback near defective points.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;

/// Above this eigenvector condition number projectors come from contour integrals.
pub const COND_LIMIT: f64 = 1e8;

#[derive(Debug, Clone)]
pub struct Eigen {
    pub values: Vec<C64>,
    /// Right eigenvectors as unit columns.
    pub vectors: CMat,
    pub inverse: CMat,
    /// Frobenius condition number of `vectors`.
    pub cond: f64,
}

#[derive(Debug, Clone)]
pub struct SpectralGroup {
    /// Indices into `Spectrum::values`.
    pub members: Vec<usize>,
    pub projection: CMat,
}

#[derive(Debug, Clone)]
pub struct Spectrum {
    pub values: Vec<C64>,
    pub groups: Vec<SpectralGroup>,
    pub cond: f64,
    pub used_contour: bool,
}

impl Spectrum {
    /// ‖Σ P - I‖_max, a cheap completeness check.
    pub fn completeness_residual(&self) -> f64 {
        let n = self.values.len();
        let mut s = CMat::zeros(n, n);
        for g in &self.groups {
            s += &g.projection;
        }
        s -= CMat::identity(n, n);
        s.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

pub fn fro_norm(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Parlett-Reinsch balancing with radix 2. Returns D^{-1} M D and diag(D).
pub fn balance(m: &CMat) -> (CMat, Vec<f64>) {
    let n = m.nrows();
    let mut b = m.clone();
    let mut d = vec![1.0; n];
    let mut done = false;
    let mut sweeps = 0;
    while !done && sweeps < 100 {
        done = true;
        sweeps += 1;
        for i in 0..n {
            let mut c = 0.0;
            let mut r = 0.0;
            for j in 0..n {
                if j != i {
                    c += b[(j, i)].l1_norm();
                    r += b[(i, j)].l1_norm();
                }
            }
            if c == 0.0 || r == 0.0 {
                continue;
            }
            let s = c + r;
            let mut f = 1.0;
            let mut g = r / 2.0;
            while c < g {
                f *= 2.0;
                c *= 4.0;
            }
            g = r * 2.0;
            while c > g {
                f /= 2.0;
                c /= 4.0;
            }
            if (c + r) / f < 0.95 * s {
                done = false;
                d[i] *= f;
                for j in 0..n {
                    b[(i, j)] /= f;
                    b[(j, i)] *= f;
                }
            }
        }
    }
    (b, d)
}

/// Eigen-decomposition of a general complex matrix.
pub fn eig(m: &CMat) -> Option<Eigen> {
    let n = m.nrows();
    if n == 1 {
        return Some(Eigen {
            values: vec![m[(0, 0)]],
            vectors: CMat::identity(1, 1),
            inverse: CMat::identity(1, 1),
            cond: 1.0,
        });
    }
    let (bal, d) = balance(m);
    let schur = nalgebra::Schur::try_new(bal, f64::EPSILON, 100_000)?;
    let (q, t) = schur.unpack();
    let values: Vec<C64> = (0..n).map(|k| t[(k, k)]).collect();
    let tnorm = fro_norm(&t).max(f64::MIN_POSITIVE);
    let small = f64::EPSILON * tnorm;

    // Back-substitution on the triangular factor.
    let mut y = CMat::zeros(n, n);
    for k in 0..n {
        y[(k, k)] = C64::new(1.0, 0.0);
        for i in (0..k).rev() {
            let mut s = C64::new(0.0, 0.0);
            for j in (i + 1)..=k {
                s += t[(i, j)] * y[(j, k)];
            }
            let mut den = t[(i, i)] - t[(k, k)];
            if den.norm() < small {
                den = C64::new(small, 0.0);
            }
            y[(i, k)] = -s / den;
        }
    }
    let mut v = q * y;
    for i in 0..n {
        for k in 0..n {
            v[(i, k)] *= d[i];
        }
    }
    for k in 0..n {
        let nk = v.column(k).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if nk > 0.0 {
            for i in 0..n {
                v[(i, k)] /= nk;
            }
        }
    }
    let inverse = v.clone().try_inverse()?;
    let cond = fro_norm(&v) * fro_norm(&inverse);
    Some(Eigen { values, vectors: v, inverse, cond })
}

fn solve(m: CMat, rhs: &CMat) -> Option<CMat> {
    m.lu().solve(rhs)
}

/// Riesz projector onto the eigenvalues inside the circle |z - c| = r.
pub fn contour_projection(m: &CMat, center: C64, radius: f64, nodes: usize) -> Option<CMat> {
    let n = m.nrows();
    let id = CMat::identity(n, n);
    let mut p = CMat::zeros(n, n);
    for k in 0..nodes {
        let th = 2.0 * std::f64::consts::PI * (k as f64 + 0.5) / nodes as f64;
        let w = C64::from_polar(radius, th);
        let z = center + w;
        let res = solve(CMat::from_diagonal_element(n, n, z) - m, &id)?;
        p += res * (w / nodes as f64);
    }
    Some(p)
}

/// Eigenvalues with spectral projectors. Near-defective matrices fall back to
/// contour integrals over clusters of nearby eigenvalues.
pub fn spectrum(m: &CMat) -> Option<Spectrum> {
    let e = eig(m)?;
    let n = e.values.len();
    if e.cond < COND_LIMIT {
        let groups = (0..n)
            .map(|k| SpectralGroup { members: vec![k], projection: e.vectors.column(k) * e.inverse.row(k) })
            .collect();
        return Some(Spectrum { values: e.values, groups, cond: e.cond, used_contour: false });
    }
    let scale = e.values.iter().map(|z| z.norm()).fold(1e-300, f64::max);
    let clusters = cluster(&e.values, 1e-3 * scale);
    let mut groups = Vec::with_capacity(clusters.len());
    for members in clusters {
        let center = members.iter().map(|&i| e.values[i]).sum::<C64>() / members.len() as f64;
        let spread = members.iter().map(|&i| (e.values[i] - center).norm()).fold(0.0, f64::max);
        let gap = (0..n)
            .filter(|i| !members.contains(i))
            .map(|i| (e.values[i] - center).norm())
            .fold(f64::INFINITY, f64::min);
        let radius = if gap.is_finite() { 0.5 * gap } else { 2.0 * spread + scale };
        let radius = radius.max(2.0 * spread).max(1e-14 * scale);
        let projection = contour_projection(m, center, radius, 128)?;
        groups.push(SpectralGroup { members, projection });
    }
    Some(Spectrum { values: e.values, groups, cond: e.cond, used_contour: true })
}

fn cluster(values: &[C64], tol: f64) -> Vec<Vec<usize>> {
    let n = values.len();
    let mut label: Vec<usize> = (0..n).collect();
    for i in 0..n {
        for j in (i + 1)..n {
            if (values[i] - values[j]).norm() < tol {
                let (a, b) = (label[i], label[j]);
                for l in label.iter_mut() {
                    if *l == b {
                        *l = a;
                    }
                }
            }
        }
    }
    let mut out: Vec<Vec<usize>> = Vec::new();
    let mut seen: Vec<usize> = Vec::new();
    for i in 0..n {
        if let Some(p) = seen.iter().position(|&l| l == label[i]) {
            out[p].push(i);
        } else {
            seen.push(label[i]);
            out.push(vec![i]);
        }
    }
    out
}

/// exp(M) by Padé scaling and squaring.
pub fn expm(m: &CMat) -> CMat {
    m.exp()
}

/// Determinant via LU.
pub fn det(m: &CMat) -> C64 {
    m.clone().lu().determinant()
}

pub fn matvec(m: &CMat, v: &[C64]) -> Vec<C64> {
    let x = DVector::from_column_slice(v);
    (m * x).iter().copied().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(rng: &mut ChaCha8Rng, n: usize) -> CMat {
        CMat::from_fn(n, n, |_, _| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
    }

    #[test]
    fn eigenpairs_satisfy_definition() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in 1..8 {
            let m = random_matrix(&mut rng, n);
            let e = eig(&m).unwrap();
            for k in 0..n {
                let v = e.vectors.column(k).into_owned();
                let r = &m * &v - v.map(|z| z * e.values[k]);
                assert!(r.iter().map(|z| z.norm()).fold(0.0, f64::max) < 1e-12);
            }
        }
    }

    #[test]
    fn balancing_handles_badly_scaled_matrices() {
        let mut m = CMat::zeros(3, 3);
        m[(0, 0)] = C64::new(1.0, 0.0);
        m[(0, 2)] = C64::new(1e6, 0.0);
        m[(2, 0)] = C64::new(1e-6, 0.0);
        m[(1, 1)] = C64::new(0.0, 2.0);
        m[(2, 2)] = C64::new(0.0, 1e6);
        let (b, d) = balance(&m);
        let back = CMat::from_fn(3, 3, |i, j| b[(i, j)] * d[i] / d[j]);
        assert!(fro_norm(&(back - &m)) < 1e-9 * fro_norm(&m));
        let e = eig(&m).unwrap();
        let tr: C64 = e.values.iter().sum();
        assert!((tr - m.trace()).norm() < 1e-9 * 1e6);
    }

    #[test]
    fn projectors_resolve_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let m = random_matrix(&mut rng, 7);
        let s = spectrum(&m).unwrap();
        assert!(!s.used_contour);
        assert!(s.completeness_residual() < 1e-12);
    }

    #[test]
    fn contour_projection_matches_eigen_projection() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let m = random_matrix(&mut rng, 5);
        let e = eig(&m).unwrap();
        let k = 2;
        let gap = (0..5).filter(|&i| i != k).map(|i| (e.values[i] - e.values[k]).norm()).fold(f64::INFINITY, f64::min);
        let p = contour_projection(&m, e.values[k], 0.5 * gap, 128).unwrap();
        let q = e.vectors.column(k) * e.inverse.row(k);
        assert!(fro_norm(&(p - q)) < 1e-9);
    }

    #[test]
    fn jordan_block_uses_contour() {
        let mut m = CMat::zeros(3, 3);
        m[(0, 0)] = C64::new(1.0, 0.0);
        m[(1, 1)] = C64::new(1.0, 0.0);
        m[(0, 1)] = C64::new(1.0, 0.0);
        m[(2, 2)] = C64::new(3.0, 0.0);
        let s = spectrum(&m).unwrap();
        assert!(s.used_contour);
        assert_eq!(s.groups.len(), 2);
        assert!(s.completeness_residual() < 1e-10);
    }

    #[test]
    fn expm_of_diagonal() {
        let m = CMat::from_diagonal(&DVector::from_vec(vec![C64::new(0.0, 1.0), C64::new(-1.0, 0.0)]));
        let e = expm(&m);
        assert!((e[(0, 0)] - C64::new(0.0, 1.0).exp()).norm() < 1e-14);
        assert!((e[(1, 1)] - (-1.0f64).exp()).norm() < 1e-14);
    }
}
