//! Blow-up charts at the conic and uniplanar degeneracies of cubic media and
//! the rotational reduction of hexagonal media.
//!
//! Each chart is a polar coordinate system (ε, φ) around a degenerate
//! direction η̄. The chart matrices, correctors and secondary diagonalizers
//! are written out explicitly; the generic eigensolver on A(η(ε, φ)) serves
//! as the oracle for every coefficient.

use nalgebra::{DMatrix, Matrix2};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::C64;
use crate::media::{CouplingConstants, MediumSpec};
use crate::spectral::eigenframe;
use crate::sphere::dot;
use crate::symbol::{build_b_with_frame, eigenvalues_b, match_values};

const SQRT2: f64 = std::f64::consts::SQRT_2;

/// Centered first derivative at 0 from the 5-point stencil.
pub fn fd_first(f: impl Fn(f64) -> f64, h: f64) -> f64 {
    (8.0 * (f(h) - f(-h)) - (f(2.0 * h) - f(-2.0 * h))) / (12.0 * h)
}

/// Centered second derivative at 0 from the 5-point stencil.
pub fn fd_second(f: impl Fn(f64) -> f64, h: f64) -> f64 {
    (-f(2.0 * h) + 16.0 * f(h) - 30.0 * f(0.0) + 16.0 * f(-h) - f(-2.0 * h)) / (12.0 * h * h)
}

fn complex_fd_second(f: impl Fn(f64) -> C64, h: f64) -> C64 {
    (-f(2.0 * h) + f(h) * 16.0 - f(0.0) * 30.0 + f(-h) * 16.0 - f(-2.0 * h)) / (12.0 * h * h)
}

fn sorted_eigenvalues(a: &DMatrix<f64>) -> Vec<f64> {
    let mut v: Vec<f64> = a.clone().symmetric_eigen().eigenvalues.iter().copied().collect();
    v.sort_by(f64::total_cmp);
    v
}

/// Indices of the two entries of `values` closest to `target`, in ascending value order.
fn pair_near(values: &[f64], target: f64) -> [usize; 2] {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&i, &j| (values[i] - target).abs().total_cmp(&(values[j] - target).abs()));
    let (i, j) = (idx[0], idx[1]);
    if values[i] <= values[j] {
        [i, j]
    } else {
        [j, i]
    }
}

/// A(η) for the cubic medium as a quadratic form evaluated on any vector.
fn cubic_form(lambda: f64, mu: f64, tau: f64, x: &[f64; 3]) -> DMatrix<f64> {
    let r2 = dot(x, x);
    DMatrix::from_fn(3, 3, |i, j| if i == j { (tau - mu) * x[i] * x[i] + mu * r2 } else { (lambda + mu) * x[i] * x[j] })
}

fn check_cubic(lambda: f64, mu: f64, tau: f64) -> Result<f64> {
    if ![lambda, mu, tau].iter().all(|v| v.is_finite()) {
        return Err(Error::invalid("medium parameters must be finite"));
    }
    if !(mu > 0.0 && tau > 0.0 && lambda < tau && lambda > -2.0 * mu - tau / 2.0) {
        return Err(Error::invalid("cubic medium is not positive"));
    }
    Ok(tau.max(mu).max(lambda.abs()))
}

/// Chart around the body diagonal η̄ = (1,1,1)/√3 of a cubic medium.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConicChart {
    pub lambda: f64,
    pub mu: f64,
    pub tau: f64,
    pub omega1: f64,
    pub omega2: f64,
    /// Linear splitting of the hyperbolic B eigenvalues, in units of |ξ|.
    pub delta1: f64,
    /// Leading coefficient of the transverse couplings.
    pub delta2: f64,
}

impl ConicChart {
    /// Requires λ+μ ≠ 0 (otherwise η̄ carries a triple eigenvalue) and
    /// τ ≠ λ+2μ (the isotropic case).
    pub fn new(lambda: f64, mu: f64, tau: f64) -> Result<Self> {
        let scale = check_cubic(lambda, mu, tau)?;
        if (lambda + mu).abs() <= 1e-12 * scale {
            return Err(Error::invalid("conic chart needs λ+μ ≠ 0"));
        }
        if (tau - lambda - 2.0 * mu).abs() <= 1e-12 * scale {
            return Err(Error::invalid("conic chart needs τ ≠ λ+2μ (isotropic medium)"));
        }
        let s = tau + mu - lambda;
        Ok(Self {
            lambda,
            mu,
            tau,
            omega1: ((tau + 2.0 * lambda + 4.0 * mu) / 3.0).sqrt(),
            omega2: (s / 3.0).sqrt(),
            delta1: (-tau + 2.0 * mu + lambda) / (6f64.sqrt() * s.sqrt()),
            delta2: 2.0 * (lambda + 2.0 * mu - tau) / (3.0 * (lambda + mu)),
        })
    }

    pub fn medium(&self) -> MediumSpec {
        MediumSpec::cubic(3, self.lambda, self.mu, self.tau).expect("parameters were validated")
    }

    /// The transverse coupling coefficient with λ and μ exchanged, as it is
    /// sometimes printed. Equal to `delta2` only when λ = μ.
    pub fn delta2_swapped(&self) -> f64 {
        2.0 * (self.mu + 2.0 * self.lambda - self.tau) / (3.0 * (self.lambda + self.mu))
    }

    /// Linear eigenvalue splitting coefficient √2(−τ+2μ+λ)/3.
    pub fn split(&self) -> f64 {
        SQRT2 * (-self.tau + 2.0 * self.mu + self.lambda) / 3.0
    }

    pub fn base() -> [f64; 3] {
        let s = 1.0 / 3f64.sqrt();
        [s, s, s]
    }

    /// The fixed orthogonal frame M̃ with columns η̄, (−1,−1,2)/√6, (1,−1,0)/√2.
    pub fn frame() -> DMatrix<f64> {
        let (a, b, c) = (3f64.sqrt().recip(), 6f64.sqrt().recip(), SQRT2.recip());
        DMatrix::from_row_slice(3, 3, &[a, -b, c, a, -b, -c, a, 2.0 * b, 0.0])
    }

    /// Unit tangent direction w(φ) at η̄. Negative ε walks through η̄ to φ+π.
    fn tangent(phi: f64) -> [f64; 3] {
        let m = Self::frame();
        let (c, s) = (phi.cos(), phi.sin());
        [0, 1, 2].map(|i| c * m[(i, 1)] + s * m[(i, 2)])
    }

    pub fn eta(eps: f64, phi: f64) -> [f64; 3] {
        let w = Self::tangent(phi);
        let r = (1.0 - eps * eps).sqrt();
        let b = Self::base();
        [0, 1, 2].map(|i| r * b[i] + eps * w[i])
    }

    fn h0(&self) -> f64 {
        (self.tau + 2.0 * self.lambda + 4.0 * self.mu) / 3.0
    }

    fn h1(&self) -> f64 {
        (self.tau + self.mu - self.lambda) / 3.0
    }

    pub fn a0(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![self.h0(), self.h1(), self.h1()]))
    }

    pub fn a1(&self, phi: f64) -> DMatrix<f64> {
        let (c, s) = (phi.cos(), phi.sin());
        let p = (2.0 * self.tau - self.mu + self.lambda) / 3.0;
        let q = self.split();
        DMatrix::from_row_slice(3, 3, &[0.0, p * c, p * s, p * c, -q * c, q * s, p * s, q * s, q * c])
    }

    /// Quadratic part M̃ᵀA(w)M̃; it enters only beyond the printed order.
    pub fn a2(&self, phi: f64) -> DMatrix<f64> {
        let m = Self::frame();
        m.transpose() * cubic_form(self.lambda, self.mu, self.tau, &Self::tangent(phi)) * m
    }

    /// A(η(ε,φ)) assembled from the chart matrices and rotated back:
    /// M̃[(1−ε²)A₀ + ε√(1−ε²)A₁ + ε²A₂]M̃ᵀ.
    pub fn chart_matrix(&self, eps: f64, phi: f64) -> DMatrix<f64> {
        let m = Self::frame();
        let inner = self.a0() * (1.0 - eps * eps)
            + self.a1(phi) * (eps * (1.0 - eps * eps).sqrt())
            + self.a2(phi) * (eps * eps);
        &m * inner * m.transpose()
    }

    pub fn corrector_factor(&self) -> f64 {
        (2.0 * self.tau - self.mu + self.lambda) / (3.0 * (self.lambda + self.mu))
    }

    /// First corrector N with N_ij = (A₁)_ij/(h_j − h_i) off the blocks.
    pub fn corrector(&self, phi: f64) -> DMatrix<f64> {
        let k = self.corrector_factor();
        let (c, s) = (phi.cos(), phi.sin());
        DMatrix::from_row_slice(3, 3, &[0.0, -k * c, -k * s, k * c, 0.0, 0.0, k * s, 0.0, 0.0])
    }

    /// Rotation diagonalizing the lower block of A₁: diag(1, [[sin φ/2, cos φ/2], [cos φ/2, −sin φ/2]]).
    /// Column 1 carries the +split branch, column 2 the −split branch.
    pub fn secondary(phi: f64) -> DMatrix<f64> {
        let (c, s) = ((phi / 2.0).cos(), (phi / 2.0).sin());
        DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 0.0, 0.0, s, c, 0.0, c, -s])
    }

    /// The frame M̃(I+εN)M̃₂ with its columns normalized.
    pub fn first_order_frame(&self, eps: f64, phi: f64) -> DMatrix<f64> {
        let mut f = Self::frame() * (DMatrix::identity(3, 3) + self.corrector(phi) * eps) * Self::secondary(phi);
        for mut col in f.column_iter_mut() {
            let n = col.norm();
            col /= n;
        }
        f
    }

    /// Leading eigenvalues: the isolated one and the linearly split pair.
    pub fn predicted_eigenvalues(&self, eps: f64) -> Vec<f64> {
        let mut v = vec![self.h0(), self.h1() + self.split() * eps, self.h1() - self.split() * eps];
        v.sort_by(f64::total_cmp);
        v
    }

    /// Leading couplings in chart gauge: (1, εδ₂ sin 3φ/2, εδ₂ cos 3φ/2).
    pub fn predicted_couplings(&self, eps: f64, phi: f64) -> [f64; 3] {
        [1.0, eps * self.delta2 * (1.5 * phi).sin(), eps * self.delta2 * (1.5 * phi).cos()]
    }

    /// ε-derivatives at ε = 0 of √κ_j and a_j along exact eigenvectors
    /// continued from the chart frame M̃M̃₂. Index 0 is the isolated mode.
    pub fn frame_derivatives(&self, phi: f64, h: f64) -> Result<([f64; 3], [f64; 3])> {
        let q0 = Self::frame() * Self::secondary(phi);
        let at = |eps: f64| -> Result<([f64; 3], [f64; 3])> {
            let eta = Self::eta(eps, phi);
            let f = eigenframe(&cubic_form(self.lambda, self.mu, self.tau, &eta))?;
            let mut om = [0.0; 3];
            let mut a = [0.0; 3];
            for j in 0..3 {
                let col = q0.column(j);
                let (mut best, mut ov) = (0, 0.0f64);
                for k in 0..3 {
                    let o = f.vectors.column(k).dot(&col);
                    if o.abs() > ov.abs() {
                        best = k;
                        ov = o;
                    }
                }
                let r: Vec<f64> = f.vectors.column(best).iter().map(|x| x * ov.signum()).collect();
                om[j] = f.values[best].sqrt();
                a[j] = dot(&r, &eta);
            }
            Ok((om, a))
        };
        let mut samples = Vec::new();
        for e in [-2.0 * h, -h, h, 2.0 * h] {
            samples.push(at(e)?);
        }
        let d = |g: &dyn Fn(&([f64; 3], [f64; 3])) -> f64| {
            (8.0 * (g(&samples[2]) - g(&samples[1])) - (g(&samples[3]) - g(&samples[0]))) / (12.0 * h)
        };
        let dom = [0, 1, 2].map(|j| d(&|s| s.0[j]));
        let da = [0, 1, 2].map(|j| d(&|s| s.1[j]));
        Ok((dom, da))
    }

    /// The ε-linear part of |ξ|⁻¹B in chart gauge, built from the chart.
    /// Order: ω̄₁, split+, split−, −ω̄₁, −split+, −split−, θ.
    pub fn b_first_order(&self, gamma: f64) -> impl Fn(f64) -> DMatrix<C64> + '_ {
        move |phi: f64| {
            let i = C64::new(0.0, 1.0);
            let a = [0.0, self.delta2 * (1.5 * phi).sin(), self.delta2 * (1.5 * phi).cos()];
            let d = [0.0, self.delta1, -self.delta1];
            let mut b = DMatrix::<C64>::zeros(7, 7);
            for j in 0..3 {
                b[(j, j)] = C64::new(d[j], 0.0);
                b[(3 + j, 3 + j)] = C64::new(-d[j], 0.0);
                b[(j, 6)] = i * (gamma * a[j]);
                b[(3 + j, 6)] = i * (gamma * a[j]);
                b[(6, j)] = -i * (0.5 * gamma * a[j]);
                b[(6, 3 + j)] = -i * (0.5 * gamma * a[j]);
            }
            b
        }
    }

    /// The ε-linear part as usually printed: the same couplings, but +δ₁ and
    /// −δ₁ on the negative-frequency diagonal in the same order as the
    /// positive one, and no factor 1/2 on the third entry of the last row.
    pub fn b_first_order_printed(&self, gamma: f64, phi: f64) -> DMatrix<C64> {
        let mut b = self.b_first_order(gamma)(phi);
        b[(4, 4)] = C64::new(self.delta1, 0.0);
        b[(5, 5)] = C64::new(-self.delta1, 0.0);
        b[(6, 2)] *= 2.0;
        b
    }
}

/// Chart around the axis η̄ = (1,0,0) of a cubic medium.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UniplanarChart {
    pub lambda: f64,
    pub mu: f64,
    pub tau: f64,
    /// ((τ−μ)² − (λ+μ)²)/(τ−μ).
    pub c: f64,
    /// (λ+μ)(τ−λ−2μ)/(τ−μ).
    pub d: f64,
}

impl UniplanarChart {
    pub fn new(lambda: f64, mu: f64, tau: f64) -> Result<Self> {
        let scale = check_cubic(lambda, mu, tau)?;
        if (lambda + mu).abs() <= 1e-12 * scale {
            return Err(Error::invalid("uniplanar chart needs λ+μ ≠ 0"));
        }
        if (tau - mu).abs() <= 1e-12 * scale {
            return Err(Error::invalid("uniplanar chart needs τ ≠ μ"));
        }
        if (tau - lambda - 2.0 * mu).abs() <= 1e-12 * scale {
            return Err(Error::invalid("uniplanar chart needs τ ≠ λ+2μ (isotropic medium)"));
        }
        let (lm, tm) = (lambda + mu, tau - mu);
        Ok(Self { lambda, mu, tau, c: (tm * tm - lm * lm) / tm, d: lm * (tau - lambda - 2.0 * mu) / tm })
    }

    pub fn medium(&self) -> MediumSpec {
        MediumSpec::cubic(3, self.lambda, self.mu, self.tau).expect("parameters were validated")
    }

    /// The off-diagonal coefficient as sometimes printed, D = λ+μ.
    pub fn d_printed(&self) -> f64 {
        self.lambda + self.mu
    }

    pub fn eta(eps: f64, phi: f64) -> [f64; 3] {
        [(1.0 - eps * eps).sqrt(), eps * phi.cos(), eps * phi.sin()]
    }

    pub fn a0(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![self.tau, self.mu, self.mu]))
    }

    pub fn a1(&self, phi: f64) -> DMatrix<f64> {
        let k = self.lambda + self.mu;
        let (c, s) = (phi.cos(), phi.sin());
        DMatrix::from_row_slice(3, 3, &[0.0, k * c, k * s, k * c, 0.0, 0.0, k * s, 0.0, 0.0])
    }

    pub fn a2(&self, phi: f64) -> DMatrix<f64> {
        let t = self.tau - self.mu;
        let (c, s) = (phi.cos(), phi.sin());
        let o = (self.lambda + self.mu) * c * s;
        DMatrix::from_row_slice(3, 3, &[-t, 0.0, 0.0, 0.0, t * c * c, o, 0.0, o, t * s * s])
    }

    /// A₀ + ε√(1−ε²)A₁ + ε²A₂, exactly A(η(ε,φ)).
    pub fn chart_matrix(&self, eps: f64, phi: f64) -> DMatrix<f64> {
        self.a0() + self.a1(phi) * (eps * (1.0 - eps * eps).sqrt()) + self.a2(phi) * (eps * eps)
    }

    pub fn corrector_factor(&self) -> f64 {
        (self.lambda + self.mu) / (self.tau - self.mu)
    }

    pub fn corrector(&self, phi: f64) -> DMatrix<f64> {
        let k = self.corrector_factor();
        let (c, s) = (phi.cos(), phi.sin());
        DMatrix::from_row_slice(3, 3, &[0.0, -k * c, -k * s, k * c, 0.0, 0.0, k * s, 0.0, 0.0])
    }

    /// The ε² block of the two modes near μ after one corrector step:
    /// [[C cos²φ, D cosφ sinφ], [D cosφ sinφ, C sin²φ]].
    pub fn block(&self, phi: f64) -> Matrix2<f64> {
        let (c, s) = (phi.cos(), phi.sin());
        Matrix2::new(self.c * c * c, self.d * c * s, self.d * c * s, self.c * s * s)
    }

    /// √(C² − (C² − D²) sin² 2φ).
    pub fn root(&self, phi: f64) -> f64 {
        let s2 = (2.0 * phi).sin().powi(2);
        (self.c * self.c - (self.c * self.c - self.d * self.d) * s2).max(0.0).sqrt()
    }

    /// (upper, lower) ε² coefficients (C ± R)/2 of the pair near μ.
    pub fn block_eigenvalues(&self, phi: f64) -> (f64, f64) {
        let r = self.root(phi);
        ((self.c + r) / 2.0, (self.c - r) / 2.0)
    }

    /// Angle θ(φ) of the eigenvector of the upper block eigenvalue, chosen
    /// continuous and 2π-periodic in φ.
    fn block_angle(&self, phi: f64) -> f64 {
        let (x, y) = (self.c * (2.0 * phi).cos(), self.d * (2.0 * phi).sin());
        let (sc, sd) = (self.c.signum(), self.d.signum());
        let reference = sc * sd * 2.0 * phi + if sc < 0.0 { std::f64::consts::PI } else { 0.0 };
        let raw = y.atan2(x);
        let tau = std::f64::consts::TAU;
        let wrapped = (raw - reference + std::f64::consts::PI).rem_euclid(tau) - std::f64::consts::PI;
        (reference + wrapped) / 2.0
    }

    /// Block diagonalizer [[m₁, m₂], [−m₂, m₁]] with m₁ = cos θ, m₂ = −sin θ.
    /// Its first column belongs to (C+R)/2. Continuous through φ = π/2, 3π/2.
    pub fn diagonalizer(&self, phi: f64) -> Matrix2<f64> {
        let t = self.block_angle(phi);
        let (m1, m2) = (t.cos(), -t.sin());
        Matrix2::new(m1, m2, -m2, m1)
    }

    /// The normalized closed form [[C cos2φ + R, −D sin2φ], [D sin2φ, C cos2φ + R]].
    /// `None` where numerator and normalization vanish together.
    pub fn diagonalizer_closed_form(&self, phi: f64) -> Option<Matrix2<f64>> {
        let (c2, s2) = ((2.0 * phi).cos(), (2.0 * phi).sin());
        let r = self.root(phi);
        let n2 = 2.0 * self.d * self.d * s2 * s2 + 2.0 * self.c * self.c * c2 * c2 + 2.0 * self.c * c2 * r;
        if n2 <= 1e-24 * (self.c * self.c + self.d * self.d) {
            return None;
        }
        let n = n2.sqrt();
        let (m1, m2) = ((self.c * c2 + r) / n, -self.d * s2 / n);
        Some(Matrix2::new(m1, m2, -m2, m1))
    }

    /// (τ−λ−2μ)/(τ−μ), the transverse coupling factor.
    pub fn coupling_factor(&self) -> f64 {
        (self.tau - self.lambda - 2.0 * self.mu) / (self.tau - self.mu)
    }

    /// Leading transverse couplings of the (upper, lower) pair modes.
    pub fn predicted_couplings(&self, eps: f64, phi: f64) -> (f64, f64) {
        let t = self.block_angle(phi);
        let k = eps * self.coupling_factor();
        (k * (phi - t).cos(), k * (phi - t).sin())
    }

    pub fn predicted_eigenvalues(&self, eps: f64, phi: f64) -> Vec<f64> {
        let (hi, lo) = self.block_eigenvalues(phi);
        let e2 = eps * eps;
        let mut v = vec![self.tau - self.c * e2, self.mu + hi * e2, self.mu + lo * e2];
        v.sort_by(f64::total_cmp);
        v
    }
}

/// Predicted vs measured eigenvalues of A(η) in a chart.
#[derive(Debug, Clone, Serialize)]
pub struct EigenExpansion {
    pub eps: f64,
    pub phi: f64,
    pub predicted: Vec<f64>,
    pub measured: Vec<f64>,
    pub residual: f64,
}

pub fn conic_eigen_expansion(lambda: f64, mu: f64, tau: f64, eps: f64, phi: f64) -> Result<EigenExpansion> {
    let chart = ConicChart::new(lambda, mu, tau)?;
    let measured = sorted_eigenvalues(&cubic_form(lambda, mu, tau, &ConicChart::eta(eps, phi)));
    let predicted = chart.predicted_eigenvalues(eps);
    let residual = predicted.iter().zip(&measured).map(|(p, m)| (p - m).abs()).fold(0.0, f64::max);
    Ok(EigenExpansion { eps, phi, predicted, measured, residual })
}

/// |√2(−τ+2μ+λ)/3| from a centered difference of the pair gap through η̄.
/// The analytic branches cross at ε = 0, so the sorted gap is |branch difference|
/// and the odd part is recovered as (gap(h) + gap(−h))/2.
pub fn conic_split_fd(chart: &ConicChart, phi: f64, h: f64) -> f64 {
    let h1 = (chart.tau + chart.mu - chart.lambda) / 3.0;
    let gap = |e: f64| {
        let v = sorted_eigenvalues(&cubic_form(chart.lambda, chart.mu, chart.tau, &ConicChart::eta(e, phi)));
        let [i, j] = pair_near(&v, h1);
        v[j] - v[i]
    };
    let odd = |e: f64| if e >= 0.0 { gap(e) } else { -gap(e) };
    fd_first(odd, h) / 2.0
}

#[derive(Debug, Clone, Serialize)]
pub struct CouplingLeading {
    pub eps: f64,
    pub phi: f64,
    /// (a₁, a₂, a₃) in chart gauge.
    pub predicted: [f64; 3],
    /// Couplings of the normalized first-order chart frame.
    pub chart: [f64; 3],
    /// a₂² + a₃² from the exact eigenvectors of the split pair.
    pub transverse: f64,
    /// a₁² from the exact eigenvector of the isolated eigenvalue.
    pub a1_squared: f64,
    /// |a₂² + a₃² − ε²δ₂²|.
    pub residual: f64,
}

pub fn conic_coupling_leading(lambda: f64, mu: f64, tau: f64, eps: f64, phi: f64) -> Result<CouplingLeading> {
    let chart = ConicChart::new(lambda, mu, tau)?;
    let eta = ConicChart::eta(eps, phi);
    let f = eigenframe(&cubic_form(lambda, mu, tau, &eta))?;
    let a = f.couplings(&eta);
    let [i, j] = pair_near(&f.values, chart.h1());
    let k = 3 - i - j;
    let transverse = a[i] * a[i] + a[j] * a[j];
    let cf = chart.first_order_frame(eps, phi);
    let chart_a = [0, 1, 2].map(|c| cf.column(c).iter().zip(&eta).map(|(x, y)| x * y).sum::<f64>());
    Ok(CouplingLeading {
        eps,
        phi,
        predicted: chart.predicted_couplings(eps, phi),
        chart: chart_a,
        transverse,
        a1_squared: a[k] * a[k],
        residual: (transverse - eps * eps * chart.delta2 * chart.delta2).abs(),
    })
}

/// Least-squares slope of log(a₂²+a₃²) against log ε.
pub fn conic_coupling_slope(lambda: f64, mu: f64, tau: f64, phi: f64, eps: &[f64]) -> Result<f64> {
    let mut y = Vec::with_capacity(eps.len());
    for &e in eps {
        y.push(conic_coupling_leading(lambda, mu, tau, e, phi)?.transverse);
    }
    Ok(crate::symbol::loglog_slope(eps, &y))
}

/// Thermo-elastic eigenvalues of the bar with the given speed at frequency r.
pub fn one_dimensional_eigenvalues(speed: f64, c: &CouplingConstants, r: f64) -> Result<Vec<C64>> {
    let bar = MediumSpec::bar(speed)?;
    let f = eigenframe(&bar.symbol_at(&[1.0])?)?;
    Ok(eigenvalues_b(&build_b_with_frame(&f, &[1.0], r, c))?.values)
}

fn measured_b(lambda: f64, mu: f64, tau: f64, c: &CouplingConstants, r: f64, eta: &[f64; 3]) -> Result<Vec<C64>> {
    let f = eigenframe(&cubic_form(lambda, mu, tau, eta))?;
    Ok(eigenvalues_b(&build_b_with_frame(&f, eta, r, c))?.values)
}

#[derive(Debug, Clone, Serialize)]
pub struct BExpansion {
    pub xi_norm: f64,
    pub eps: f64,
    pub phi: f64,
    pub predicted: Vec<C64>,
    pub measured: Vec<C64>,
    /// Largest distance in a nearest-first pairing of the two multisets.
    pub residual: f64,
    /// residual / (|ξ| ε²).
    pub scaled: f64,
}

pub fn conic_b_expansion(
    lambda: f64,
    mu: f64,
    tau: f64,
    c: &CouplingConstants,
    xi_norm: f64,
    eps: f64,
    phi: f64,
) -> Result<BExpansion> {
    let chart = ConicChart::new(lambda, mu, tau)?;
    if (c.gamma * c.gamma + lambda + mu).abs() <= 1e-12 * tau.max(mu) {
        return Err(Error::invalid("conic B expansion needs γ²+λ+μ ≠ 0"));
    }
    let r = xi_norm;
    let mut predicted = one_dimensional_eigenvalues(chart.omega1, c, r)?;
    for s1 in [1.0, -1.0] {
        for s2 in [1.0, -1.0] {
            predicted.push(C64::new(s1 * chart.omega2 * r + s2 * chart.delta1 * r * eps, 0.0));
        }
    }
    let measured = measured_b(lambda, mu, tau, c, r, &ConicChart::eta(eps, phi))?;
    let residual = match_values(&predicted, &measured);
    Ok(BExpansion { xi_norm, eps, phi, predicted, measured, residual, scaled: residual / (r * eps * eps) })
}

/// |δ₁| from a centered difference of the real gap of the two B eigenvalues
/// near +ω̄₂|ξ|, divided by |ξ|.
pub fn conic_b_split_fd(chart: &ConicChart, c: &CouplingConstants, xi_norm: f64, phi: f64, h: f64) -> Result<f64> {
    let target = chart.omega2 * xi_norm;
    let gap = |e: f64| -> f64 {
        let v = measured_b(chart.lambda, chart.mu, chart.tau, c, xi_norm, &ConicChart::eta(e, phi)).unwrap_or_default();
        let re: Vec<f64> = v.iter().map(|z| z.re).collect();
        if re.len() < 2 {
            return f64::NAN;
        }
        let [i, j] = pair_near(&re, target);
        re[j] - re[i]
    };
    let odd = |e: f64| if e >= 0.0 { gap(e) } else { -gap(e) };
    let v = fd_first(odd, h) / (2.0 * xi_norm);
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Numerical("B eigenvalues failed along the chart".into()))
    }
}

/// Smallest distance between the five eigenvalue groups of the ε = 0 part of
/// |ξ|⁻¹B over the given radii: the three bar eigenvalues and ±ω̄₂.
pub fn conic_separation(chart: &ConicChart, c: &CouplingConstants, radii: &[f64]) -> Result<f64> {
    let mut best = f64::INFINITY;
    for &r in radii {
        let mut groups: Vec<C64> = one_dimensional_eigenvalues(chart.omega1, c, r)?.iter().map(|z| z / r).collect();
        groups.push(C64::new(chart.omega2, 0.0));
        groups.push(C64::new(-chart.omega2, 0.0));
        for i in 0..groups.len() {
            for j in i + 1..groups.len() {
                best = best.min((groups[i] - groups[j]).norm());
            }
        }
    }
    Ok(best)
}

pub fn uniplanar_eigen_expansion(lambda: f64, mu: f64, tau: f64, eps: f64, phi: f64) -> Result<EigenExpansion> {
    let chart = UniplanarChart::new(lambda, mu, tau)?;
    let measured = sorted_eigenvalues(&cubic_form(lambda, mu, tau, &UniplanarChart::eta(eps, phi)));
    let predicted = chart.predicted_eigenvalues(eps, phi);
    let residual = predicted.iter().zip(&measured).map(|(p, m)| (p - m).abs()).fold(0.0, f64::max);
    Ok(EigenExpansion { eps, phi, predicted, measured, residual })
}

/// Second ε-derivatives at η̄ of the (upper, lower) eigenvalues near μ.
/// The leading terms predict (C+R, C−R).
pub fn uniplanar_second_difference(chart: &UniplanarChart, phi: f64, h: f64) -> (f64, f64) {
    let branch = |e: f64, upper: bool| {
        let v = sorted_eigenvalues(&cubic_form(chart.lambda, chart.mu, chart.tau, &UniplanarChart::eta(e, phi)));
        let [i, j] = pair_near(&v, chart.mu);
        if upper {
            v[j]
        } else {
            v[i]
        }
    };
    (fd_second(|e| branch(e, true), h), fd_second(|e| branch(e, false), h))
}

/// One hyperbolic pair mode near +√μ|ξ|.
#[derive(Debug, Clone, Serialize)]
pub struct UniplanarMode {
    /// (C ± R)/(4√μ).
    pub printed: f64,
    /// ε² coefficient including the second-order exchange with the heat mode.
    pub corrected: C64,
    /// Half the second ε-derivative of ν/|ξ|.
    pub measured: C64,
}

#[derive(Debug, Clone, Serialize)]
pub struct UniplanarBExpansion {
    pub expansion: BExpansion,
    /// residual / (|ξ| ε³).
    pub scaled_cubic: f64,
    /// Upper then lower block branch.
    pub modes: Vec<UniplanarMode>,
}

/// Second-order exchange factor g with δν/|ξ| = g·α² for a pair mode whose
/// coupling is εα: g = γ²(μ−τ)/(2[(√μ − iκ|ξ|)(μ−τ) − √μγ²]).
fn heat_exchange(chart: &UniplanarChart, c: &CouplingConstants, r: f64) -> C64 {
    let sm = chart.mu.sqrt();
    let mt = chart.mu - chart.tau;
    let den = (C64::new(sm, -c.kappa * r) * mt - sm * c.gamma * c.gamma) * 2.0;
    C64::new(c.gamma * c.gamma * mt, 0.0) / den
}

pub fn uniplanar_b_expansion(
    lambda: f64,
    mu: f64,
    tau: f64,
    c: &CouplingConstants,
    xi_norm: f64,
    eps: f64,
    phi: f64,
) -> Result<UniplanarBExpansion> {
    let chart = UniplanarChart::new(lambda, mu, tau)?;
    if (mu - tau - c.gamma * c.gamma).abs() <= 1e-12 * tau.max(mu) {
        return Err(Error::invalid("uniplanar B expansion needs μ ≠ τ+γ²"));
    }
    let r = xi_norm;
    let sm = mu.sqrt();
    let (hi, lo) = chart.block_eigenvalues(phi);
    let coef = [hi / (2.0 * sm), lo / (2.0 * sm)];
    let mut predicted = one_dimensional_eigenvalues(tau.sqrt(), c, r)?;
    for s1 in [1.0, -1.0] {
        for k in coef {
            predicted.push(C64::new(s1 * (sm + k * eps * eps) * r, 0.0));
        }
    }
    let measured = measured_b(lambda, mu, tau, c, r, &UniplanarChart::eta(eps, phi))?;
    let residual = match_values(&predicted, &measured);
    let expansion = BExpansion { xi_norm, eps, phi, predicted, measured, residual, scaled: residual / (r * eps * eps) };

    // Effective ε² block of the positive pair: diag(coef) + g ααᵀ.
    let g = heat_exchange(&chart, c, r);
    let (au, al) = chart.predicted_couplings(1.0, phi);
    let (p, q, s) = (C64::from(coef[0]) + g * au * au, g * au * al, C64::from(coef[1]) + g * al * al);
    let mean = (p + s) / 2.0;
    let disc = ((p - s) * (p - s) / 4.0 + q * q).sqrt();
    let mut corrected = [mean + disc, mean - disc];
    if corrected[0].re < corrected[1].re {
        corrected.swap(0, 1);
    }

    let h = 1e-3;
    let branch = |e: f64, upper: bool| -> C64 {
        let v = measured_b(lambda, mu, tau, c, r, &UniplanarChart::eta(e, phi)).unwrap_or_default();
        if v.len() < 2 {
            return C64::new(f64::NAN, f64::NAN);
        }
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&i, &j| (v[i] / r - sm).norm().total_cmp(&(v[j] / r - sm).norm()));
        let (a, b) = (v[idx[0]], v[idx[1]]);
        let (lo, hi) = if a.re <= b.re { (a, b) } else { (b, a) };
        if upper {
            hi / r
        } else {
            lo / r
        }
    };
    let measured_coef =
        [complex_fd_second(|e| branch(e, true), h) / 2.0, complex_fd_second(|e| branch(e, false), h) / 2.0];
    if measured_coef.iter().any(|z| !z.re.is_finite()) {
        return Err(Error::Numerical("pair eigenvalues near √μ|ξ| were not isolated".into()));
    }
    let modes = (0..2)
        .map(|k| UniplanarMode { printed: coef[k], corrected: corrected[k], measured: measured_coef[k] })
        .collect();
    Ok(UniplanarBExpansion { scaled_cubic: residual / (r * eps.powi(3)), expansion, modes })
}

/// Rotational reduction of a hexagonal medium at latitude ψ.
#[derive(Debug, Clone, Serialize)]
pub struct HexagonalReduction {
    pub psi: f64,
    /// (τ₁−λ₁)/2 cos²ψ + μ sin²ψ.
    pub hyperbolic: f64,
    /// μ + τ₁cos²ψ + τ₂sin²ψ.
    pub block_trace: f64,
    /// μτ₁cos⁴ψ + μτ₂sin⁴ψ + (τ₁τ₂ − 2λ₂μ − λ₂²)/4 sin²2ψ.
    pub block_det: f64,
    /// The same with 2λ₂ in place of 2λ₂μ, as sometimes printed.
    pub block_det_printed: f64,
    pub block_eigenvalues: [f64; 2],
    /// η₃² = (λ₂+2μ−τ₁)/(2λ₂+4μ+τ₁−τ₂) where non-negative.
    pub closed_form_latitude: Option<f64>,
    /// η₃² in [0, 1] where the hyperbolic value is a block eigenvalue.
    pub degenerate_latitude: Option<f64>,
    /// η₃² in (0, 1) where η is an eigenvector of A(η).
    pub longitudinal_latitude: Option<f64>,
}

pub fn hexagonal_reduce(
    tau1: f64,
    tau2: f64,
    lambda1: f64,
    lambda2: f64,
    mu: f64,
    psi: f64,
) -> Result<HexagonalReduction> {
    MediumSpec::hexagonal(tau1, tau2, lambda1, lambda2, mu)?;
    let (c, s) = (psi.cos(), psi.sin());
    let (c2, s2) = (c * c, s * s);
    let a = (tau1 - lambda1) / 2.0;
    let sin2 = (2.0 * psi).sin().powi(2);
    let trace = mu + tau1 * c2 + tau2 * s2;
    let det =
        mu * tau1 * c2 * c2 + mu * tau2 * s2 * s2 + (tau1 * tau2 - 2.0 * lambda2 * mu - lambda2 * lambda2) / 4.0 * sin2;
    let det_printed =
        mu * tau1 * c2 * c2 + mu * tau2 * s2 * s2 + (tau1 * tau2 - 2.0 * lambda2 - lambda2 * lambda2) / 4.0 * sin2;
    let disc = (trace * trace / 4.0 - det).max(0.0).sqrt();
    let scale = tau1.abs().max(tau2.abs()).max(mu.abs());
    let ratio = |num: f64, den: f64| if den.abs() > 1e-14 * scale * scale { Some(num / den) } else { None };
    let closed = ratio(lambda2 + 2.0 * mu - tau1, 2.0 * lambda2 + 4.0 * mu + tau1 - tau2).filter(|v| *v >= 0.0);
    let degenerate = ratio((tau1 - a) * (a - mu), (tau1 - a) * (tau2 - 2.0 * mu + a) - (lambda2 + mu).powi(2))
        .filter(|v| (0.0..=1.0).contains(v));
    let b = lambda2 + 2.0 * mu;
    let longitudinal = ratio(tau1 - b, tau1 + tau2 - 2.0 * b).filter(|v| *v > 0.0 && *v < 1.0);
    Ok(HexagonalReduction {
        psi,
        hyperbolic: a * c2 + mu * s2,
        block_trace: trace,
        block_det: det,
        block_det_printed: det_printed,
        block_eigenvalues: [trace / 2.0 - disc, trace / 2.0 + disc],
        closed_form_latitude: closed,
        degenerate_latitude: degenerate,
        longitudinal_latitude: longitudinal,
    })
}

/// Moving frame (e_φ, η, e_ψ) at η = (cos φ cos ψ, sin φ cos ψ, sin ψ), with
/// e_φ = (sin φ, −cos φ, 0) and e_ψ = (cos φ sin ψ, sin φ sin ψ, −cos ψ).
pub fn hexagonal_frame(phi: f64, psi: f64) -> DMatrix<f64> {
    let (cf, sf, cp, sp) = (phi.cos(), phi.sin(), psi.cos(), psi.sin());
    DMatrix::from_row_slice(3, 3, &[sf, cf * cp, cf * sp, -cf, sf * cp, sf * sp, 0.0, sp, -cp])
}

/// One step of block diagonalization: N_ij = (H₁)_ij/(h_j − h_i) for i, j in
/// different blocks, zero inside blocks. `blocks` lists consecutive block sizes.
pub fn block_diagonalize_step(h0: &[f64], h1: &DMatrix<f64>, blocks: &[usize], tol: f64) -> Result<DMatrix<f64>> {
    let n = h0.len();
    if h1.nrows() != n || h1.ncols() != n {
        return Err(Error::Dimension { expected: n, got: h1.nrows() });
    }
    if blocks.iter().sum::<usize>() != n || blocks.contains(&0) {
        return Err(Error::invalid("block sizes must be positive and sum to the dimension"));
    }
    let mut label = Vec::with_capacity(n);
    for (b, &size) in blocks.iter().enumerate() {
        label.extend(std::iter::repeat_n(b, size));
    }
    let scale = h0.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    let mut out = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            if label[i] == label[j] {
                continue;
            }
            let gap = h0[j] - h0[i];
            if gap.abs() <= tol * scale {
                return Err(Error::Degenerate { gap: gap.abs() });
            }
            out[(i, j)] = h1[(i, j)] / gap;
        }
    }
    Ok(out)
}

/// One comparison in a validation report.
#[derive(Debug, Clone, Serialize)]
pub struct ValidationRow {
    pub check: String,
    pub params: Vec<f64>,
    pub predicted: f64,
    pub measured: f64,
    pub residual: f64,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub name: String,
    pub rows: Vec<ValidationRow>,
}

impl ValidationReport {
    pub fn new(name: &str) -> Self {
        Self { name: name.to_string(), rows: Vec::new() }
    }

    /// Adds a row; `relative` scales the tolerance by max(|predicted|, 1e-300).
    pub fn push(&mut self, check: &str, params: &[f64], predicted: f64, measured: f64, tolerance: f64, relative: bool) {
        let residual = if relative {
            (measured - predicted).abs() / predicted.abs().max(1e-300)
        } else {
            (measured - predicted).abs()
        };
        self.rows.push(ValidationRow {
            check: check.to_string(),
            params: params.to_vec(),
            predicted,
            measured,
            residual,
            tolerance,
            pass: residual <= tolerance,
        });
    }

    pub fn passed(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Every conic coefficient check for one cubic medium.
pub fn validate_conic(lambda: f64, mu: f64, tau: f64, c: &CouplingConstants) -> Result<ValidationReport> {
    let chart = ConicChart::new(lambda, mu, tau)?;
    let mut rep = ValidationReport::new("conic");
    let phis = [0.3, 1.1, 2.5, 4.0];
    for &phi in &phis {
        let pp = [lambda, mu, tau, phi];
        rep.push("split_coefficient", &pp, chart.split().abs(), conic_split_fd(&chart, phi, 1e-3), 1e-4, true);
        let eps = [1e-3, 1e-2, 1e-1];
        let worst = eps
            .iter()
            .map(|&e| (chart.chart_matrix(e, phi) - cubic_form(lambda, mu, tau, &ConicChart::eta(e, phi))).amax())
            .fold(0.0, f64::max);
        rep.push("chart_matrix", &pp, 0.0, worst, 1e-12 * tau.max(mu), false);
        let cl = conic_coupling_leading(lambda, mu, tau, 1e-4, phi)?;
        rep.push("transverse_coupling", &pp, 1e-8 * chart.delta2.powi(2), cl.transverse, 1e-3, true);
        let slope = conic_coupling_slope(lambda, mu, tau, phi, &crate::symbol::log_space(1e-4, 1e-2, 9))?;
        rep.push("transverse_coupling_slope", &pp, 2.0, slope, 0.05, false);
        let (dom, da) = chart.frame_derivatives(phi, 1e-3)?;
        rep.push("b1_split_plus", &pp, chart.delta1, dom[1], 1e-3, true);
        rep.push("b1_split_minus", &pp, -chart.delta1, dom[2], 1e-3, true);
        rep.push("b1_coupling_2", &pp, chart.delta2 * (1.5 * phi).sin(), da[1], 1e-4 * chart.delta2.abs(), false);
        rep.push("b1_coupling_3", &pp, chart.delta2 * (1.5 * phi).cos(), da[2], 1e-4 * chart.delta2.abs(), false);
        rep.push(
            "b_split_coefficient",
            &pp,
            chart.delta1.abs(),
            conic_b_split_fd(&chart, c, 1.0, phi, 1e-3)?,
            1e-3,
            true,
        );
    }
    let e0 = conic_b_expansion(lambda, mu, tau, c, 1.0, 0.0, 0.0)?;
    rep.push("b_at_vertex", &[lambda, mu, tau], 0.0, e0.residual, 1e-10, false);
    Ok(rep)
}

/// Every uniplanar coefficient check for one cubic medium.
pub fn validate_uniplanar(lambda: f64, mu: f64, tau: f64, c: &CouplingConstants) -> Result<ValidationReport> {
    let chart = UniplanarChart::new(lambda, mu, tau)?;
    let mut rep = ValidationReport::new("uniplanar");
    for phi in [std::f64::consts::FRAC_PI_8, 0.3, 1.1, 2.5] {
        let pp = [lambda, mu, tau, phi];
        let r = chart.root(phi);
        let (hi, lo) = uniplanar_second_difference(&chart, phi, 1e-3);
        rep.push("pair_upper_second_derivative", &pp, chart.c + r, hi, 1e-3, true);
        rep.push("pair_lower_second_derivative", &pp, chart.c - r, lo, 1e-3, true);
        let top = fd_second(
            |e| {
                sorted_eigenvalues(&cubic_form(lambda, mu, tau, &UniplanarChart::eta(e, phi)))
                    [pair_far(lambda, mu, tau, e, phi)]
            },
            1e-3,
        );
        rep.push("isolated_second_derivative", &pp, -2.0 * chart.c, top, 1e-3, true);
        let b = uniplanar_b_expansion(lambda, mu, tau, c, 1.0, 1e-2, phi)?;
        for (k, m) in b.modes.iter().enumerate() {
            let name = if k == 0 { "b_pair_upper" } else { "b_pair_lower" };
            rep.push(&format!("{name}_corrected_re"), &pp, m.corrected.re, m.measured.re, 1e-3, true);
            rep.push(
                &format!("{name}_corrected_im"),
                &pp,
                m.corrected.im,
                m.measured.im,
                1e-3 * m.corrected.norm(),
                false,
            );
        }
    }
    Ok(rep)
}

fn pair_far(lambda: f64, mu: f64, tau: f64, e: f64, phi: f64) -> usize {
    let v = sorted_eigenvalues(&cubic_form(lambda, mu, tau, &UniplanarChart::eta(e, phi)));
    let [i, j] = pair_near(&v, mu);
    3 - i - j
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_4, FRAC_PI_8, PI};

    fn fig4() -> ConicChart {
        ConicChart::new(2.0, 2.0, 8.0).unwrap()
    }

    #[test]
    fn conic_frame_diagonalizes_base() {
        let ch = fig4();
        let m = ConicChart::frame();
        assert!((m.transpose() * &m - DMatrix::identity(3, 3)).amax() < 1e-15);
        let a = cubic_form(2.0, 2.0, 8.0, &ConicChart::base());
        assert!((m.transpose() * a * &m - ch.a0()).amax() < 1e-12);
        assert_eq!(
            ch.predicted_eigenvalues(0.0).iter().map(|v| (v * 3.0).round() as i64).collect::<Vec<_>>(),
            vec![8, 8, 20]
        );
    }

    #[test]
    fn conic_chart_is_unit_and_consistent() {
        let ch = ConicChart::new(1.0, 3.0, 5.0).unwrap();
        for &phi in &[0.0, 0.7, 2.0, 5.5] {
            for &e in &[0.0, 1e-3, 0.1, 0.6, 1.0] {
                let eta = ConicChart::eta(e, phi);
                assert!((dot(&eta, &eta) - 1.0).abs() < 1e-15);
                let d = (ch.chart_matrix(e, phi) - cubic_form(1.0, 3.0, 5.0, &eta)).amax();
                assert!(d < 1e-12, "{d}");
            }
        }
    }

    #[test]
    fn conic_linear_split() {
        let ch = fig4();
        assert!((ch.split().abs() - 2.0 * SQRT2 / 3.0).abs() < 1e-15);
        for &phi in &[0.2, 1.3, 3.9] {
            let fd = conic_split_fd(&ch, phi, 1e-3);
            assert!((fd - 2.0 * SQRT2 / 3.0).abs() < 1e-4 * fd, "{fd}");
            let e = conic_eigen_expansion(2.0, 2.0, 8.0, 1e-3, phi).unwrap();
            assert!(e.residual < 1e-5, "{}", e.residual);
        }
    }

    #[test]
    fn conic_corrector_removes_first_order_coupling() {
        let ch = ConicChart::new(1.0, 2.0, 6.0).unwrap();
        let phi = 0.9;
        let h0 = [ch.h0(), ch.h1(), ch.h1()];
        let n = block_diagonalize_step(&h0, &ch.a1(phi), &[1, 2], 1e-12).unwrap();
        assert!((&n - ch.corrector(phi)).amax() < 1e-14);
        let k = ch.corrector_factor();
        assert!((n[(1, 0)] - k * phi.cos()).abs() < 1e-14);
        for &e in &[1e-2, 5e-3] {
            let t = DMatrix::identity(3, 3) + &n * e;
            let h = t.clone().try_inverse().unwrap() * (ch.a0() + ch.a1(phi) * e) * t;
            let off = h[(0, 1)].abs().max(h[(0, 2)].abs()).max(h[(1, 0)].abs()).max(h[(2, 0)].abs());
            assert!(off < 10.0 * e * e, "{off}");
        }
    }

    #[test]
    fn conic_secondary_diagonalizes_split_block() {
        let ch = ConicChart::new(1.0, 2.0, 6.0).unwrap();
        for &phi in &[0.0, 0.4, 2.2, 5.0] {
            let m2 = ConicChart::secondary(phi);
            let b = m2.transpose() * ch.a1(phi) * &m2;
            assert!((b[(1, 1)] - ch.split()).abs() < 1e-14);
            assert!((b[(2, 2)] + ch.split()).abs() < 1e-14);
            assert!(b[(1, 2)].abs() < 1e-14);
        }
    }

    #[test]
    fn conic_transverse_coupling() {
        let ch = fig4();
        assert!((ch.delta2 + 1.0 / 3.0).abs() < 1e-15);
        assert!((ch.delta2_swapped() - ch.delta2).abs() < 1e-15);
        let c = conic_coupling_leading(2.0, 2.0, 8.0, 1e-4, 0.8).unwrap();
        assert!((c.transverse / 1e-8 - 1.0 / 9.0).abs() < 1e-4);
        assert!((c.a1_squared - 1.0).abs() < 1e-5);
        for k in 1..3 {
            assert!((c.chart[k] - c.predicted[k]).abs() < 1e-5, "{:?} {:?}", c.chart, c.predicted);
        }
        let slope = conic_coupling_slope(2.0, 2.0, 8.0, 0.8, &crate::symbol::log_space(1e-4, 1e-2, 9)).unwrap();
        assert!((slope - 2.0).abs() < 0.05, "{slope}");
    }

    #[test]
    fn conic_transverse_coupling_distinguishes_lambda_mu() {
        // λ ≠ μ separates δ₂ from its λ/μ-swapped variant.
        let ch = ConicChart::new(1.0, 3.0, 8.0).unwrap();
        assert!((ch.delta2.abs() - 1.0 / 6.0).abs() < 1e-15);
        assert!((ch.delta2_swapped().abs() - 0.5).abs() < 1e-15);
        let c = conic_coupling_leading(1.0, 3.0, 8.0, 1e-4, 2.0).unwrap();
        assert!(((c.transverse / 1e-8).sqrt() - ch.delta2.abs()).abs() < 1e-3);
    }

    #[test]
    fn conic_b_first_order_matches_frame_derivatives() {
        let ch = ConicChart::new(1.5, 2.0, 7.0).unwrap();
        let gamma = 0.7;
        for &phi in &[0.3, 1.7, 4.4] {
            let (dom, da) = ch.frame_derivatives(phi, 1e-3).unwrap();
            let b1 = ch.b_first_order(gamma)(phi);
            for j in 0..3 {
                assert!((b1[(j, j)].re - dom[j]).abs() < 1e-6, "ω' {j}: {} vs {}", b1[(j, j)].re, dom[j]);
                assert!((b1[(3 + j, 3 + j)].re + dom[j]).abs() < 1e-6);
                assert!((b1[(j, 6)].im - gamma * da[j]).abs() < 1e-6, "a' {j}: {} vs {}", b1[(j, 6)].im, gamma * da[j]);
                assert!((b1[(6, j)].im + 0.5 * gamma * da[j]).abs() < 1e-6);
            }
            let printed = ch.b_first_order_printed(gamma, phi);
            assert!((printed[(6, 2)] - b1[(6, 2)]).norm() > 0.1 * gamma * ch.delta2.abs() * (1.5 * phi).cos().abs());
        }
    }

    #[test]
    fn conic_b_at_vertex_is_bar_plus_doubled_shear() {
        let c = CouplingConstants::new(1.0, 1.0).unwrap();
        for &r in &[0.1, 1.0, 10.0] {
            let e = conic_b_expansion(2.0, 2.0, 8.0, &c, r, 0.0, 0.0).unwrap();
            assert!(e.residual < 1e-10 * r.max(r * r), "{}", e.residual);
        }
    }

    #[test]
    fn conic_b_expansion_uniform_in_xi() {
        let c = CouplingConstants::new(1.0, 1.0).unwrap();
        let mut worst: f64 = 0.0;
        for &r in &[0.1, 1.0, 10.0, 100.0] {
            for &phi in &[0.2, 1.0, 2.7] {
                let e = conic_b_expansion(2.0, 2.0, 8.0, &c, r, 1e-2, phi).unwrap();
                worst = worst.max(e.scaled);
            }
        }
        assert!(worst < 5.0, "{worst}");
        let ch = fig4();
        assert!((ch.delta1 + 1.0 / (2.0 * 3f64.sqrt())).abs() < 1e-15);
        for &r in &[0.1, 1.0, 10.0] {
            let d = conic_b_split_fd(&ch, &c, r, 0.6, 1e-3).unwrap();
            assert!((d - ch.delta1.abs()).abs() < 1e-4, "{r}: {d}");
        }
    }

    #[test]
    fn conic_separation_bounded_below() {
        let ch = fig4();
        let c = CouplingConstants::new(1.0, 1.0).unwrap();
        let radii = crate::symbol::log_space(1e-3, 1e3, 61);
        assert!(conic_separation(&ch, &c, &radii).unwrap() > 0.1);
    }

    #[test]
    fn conic_rejects_excluded_parameters() {
        assert!(ConicChart::new(2.0, 2.0, 6.0).is_err());
        assert!(ConicChart::new(-2.0, 2.0, 6.0).is_err());
        let c = CouplingConstants::new(1.0, 1.0).unwrap();
        assert!(conic_b_expansion(-3.0, 2.0, 8.0, &c, 1.0, 1e-2, 0.0).is_err());
    }

    #[test]
    fn uniplanar_constants() {
        let u = UniplanarChart::new(2.0, 2.0, 8.0).unwrap();
        assert!((u.c - 10.0 / 3.0).abs() < 1e-14);
        assert!((u.d - 4.0 / 3.0).abs() < 1e-14);
        assert_eq!(u.d_printed(), 4.0);
        let (hi, lo) = u.block_eigenvalues(0.0);
        assert!((hi - u.c).abs() < 1e-15 && lo.abs() < 1e-15);
    }

    #[test]
    fn uniplanar_chart_is_exact() {
        let u = UniplanarChart::new(1.0, 2.0, 7.0).unwrap();
        for &phi in &[0.0, 0.9, 3.3] {
            for &e in &[1e-3, 0.1, 0.5] {
                let d = (u.chart_matrix(e, phi) - cubic_form(1.0, 2.0, 7.0, &UniplanarChart::eta(e, phi))).amax();
                assert!(d < 1e-14);
            }
        }
    }

    #[test]
    fn uniplanar_block_comes_from_one_corrector_step() {
        let u = UniplanarChart::new(1.0, 2.0, 7.0).unwrap();
        let phi = 0.7;
        let n = block_diagonalize_step(&[u.tau, u.mu, u.mu], &u.a1(phi), &[1, 2], 1e-12).unwrap();
        assert!((&n - u.corrector(phi)).amax() < 1e-14);
        // ε² block = A₂ + A₁N restricted to the pair.
        let second = u.a2(phi) + u.a1(phi) * &n;
        let b = u.block(phi);
        for i in 0..2 {
            for j in 0..2 {
                let s = 0.5 * (second[(1 + i, 1 + j)] + second[(1 + j, 1 + i)]);
                assert!((s - b[(i, j)]).abs() < 1e-13, "{i}{j}: {s} vs {}", b[(i, j)]);
            }
        }
    }

    #[test]
    fn uniplanar_second_difference_recovers_coefficients() {
        let u = UniplanarChart::new(2.0, 2.0, 8.0).unwrap();
        let (hi, lo) = uniplanar_second_difference(&u, FRAC_PI_8, 1e-3);
        let r = (u.c * u.c - (u.c * u.c - u.d * u.d) / 2.0).sqrt();
        assert!((hi - (u.c + r)).abs() < 1e-3 * (u.c + r), "{hi}");
        assert!((lo - (u.c - r)).abs() < 1e-3 * (u.c - r), "{lo}");
        let e = uniplanar_eigen_expansion(2.0, 2.0, 8.0, 1e-2, 0.4).unwrap();
        assert!(e.residual / 1e-6 < 10.0, "{}", e.residual);
    }

    #[test]
    fn uniplanar_diagonalizer_continuous_and_exact() {
        for &(l, m, t) in &[(2.0, 2.0, 8.0), (-1.0, 3.0, 4.0), (1.0, 1.0, 2.5)] {
            let u = UniplanarChart::new(l, m, t).unwrap();
            let mut prev = u.diagonalizer(0.0);
            for k in 1..=720 {
                let phi = k as f64 * 2.0 * PI / 720.0;
                let m2 = u.diagonalizer(phi);
                assert!((&m2 - prev).amax() < 0.05, "jump at {phi}");
                prev = m2;
                let d = m2.transpose() * u.block(phi) * m2;
                let (hi, lo) = u.block_eigenvalues(phi);
                assert!(d[(0, 1)].abs() < 1e-12 && (d[(0, 0)] - hi).abs() < 1e-12 && (d[(1, 1)] - lo).abs() < 1e-12);
                if let Some(cf) = u.diagonalizer_closed_form(phi) {
                    assert!((cf - m2).amax() < 1e-9 || (cf + m2).amax() < 1e-9);
                }
            }
            assert!((u.diagonalizer(2.0 * PI) - u.diagonalizer(0.0)).amax() < 1e-12);
        }
    }

    #[test]
    fn uniplanar_couplings_follow_diagonalizer() {
        let u = UniplanarChart::new(2.0, 2.0, 8.0).unwrap();
        let eps = 1e-4;
        for &phi in &[0.3, FRAC_PI_4, 1.2] {
            let eta = UniplanarChart::eta(eps, phi);
            let f = eigenframe(&cubic_form(2.0, 2.0, 8.0, &eta)).unwrap();
            let a = f.couplings(&eta);
            let [i, j] = pair_near(&f.values, 2.0);
            let (au, al) = u.predicted_couplings(eps, phi);
            assert!((a[j].abs() - au.abs()).abs() < 1e-7, "{} {}", a[j], au);
            assert!((a[i].abs() - al.abs()).abs() < 1e-7, "{} {}", a[i], al);
        }
    }

    #[test]
    fn uniplanar_b_coefficients() {
        let c = CouplingConstants::new(1.0, 1.0).unwrap();
        let u = UniplanarChart::new(2.0, 2.0, 8.0).unwrap();
        let expect = [(u.c + u.d) / (4.0 * 2f64.sqrt()), (u.c - u.d) / (4.0 * 2f64.sqrt())];
        for &r in &[0.1, 1.0, 10.0, 100.0] {
            let b = uniplanar_b_expansion(2.0, 2.0, 8.0, &c, r, 1e-2, FRAC_PI_4).unwrap();
            for k in 0..2 {
                assert!((b.modes[k].printed - expect[k]).abs() < 1e-14);
                let m = b.modes[k].measured;
                assert!(
                    (m - b.modes[k].corrected).norm() < 1e-3 * b.modes[k].corrected.norm(),
                    "r={r} k={k} {m} vs {}",
                    b.modes[k].corrected
                );
            }
            // The lower mode has no transverse coupling at φ = π/4.
            assert!((b.modes[1].measured.re - expect[1]).abs() < 1e-3 * expect[1]);
        }
        let far = uniplanar_b_expansion(2.0, 2.0, 8.0, &c, 1e4, 1e-2, FRAC_PI_4).unwrap();
        assert!((far.modes[0].measured.re - expect[0]).abs() < 1e-3 * expect[0]);
    }

    #[test]
    fn uniplanar_b_generic_angle_uses_coupled_block() {
        let c = CouplingConstants::new(0.8, 1.3).unwrap();
        let b = uniplanar_b_expansion(1.0, 2.0, 7.0, &c, 0.7, 1e-2, 0.5).unwrap();
        for m in &b.modes {
            assert!((m.measured - m.corrected).norm() < 1e-3 * m.corrected.norm(), "{} vs {}", m.measured, m.corrected);
        }
    }

    #[test]
    fn hexagonal_fig5_latitudes() {
        let h = hexagonal_reduce(4.0, 10.0, 2.0, 4.0, 2.0, 0.0).unwrap();
        assert!((h.closed_form_latitude.unwrap() - 0.4).abs() < 1e-12);
        assert!((h.degenerate_latitude.unwrap() - 0.2).abs() < 1e-12);
        assert!(h.longitudinal_latitude.is_none());
        assert!((h.block_trace - 6.0).abs() < 1e-14 && (h.block_det - 8.0).abs() < 1e-14);
        // At the degenerate latitude the hyperbolic value is a block eigenvalue.
        let psi = 0.2f64.sqrt().asin();
        let h = hexagonal_reduce(4.0, 10.0, 2.0, 4.0, 2.0, psi).unwrap();
        assert!(h.block_eigenvalues.iter().any(|v| (v - h.hyperbolic).abs() < 1e-12));
    }

    #[test]
    fn hexagonal_frame_block_diagonalizes() {
        let (t1, t2, l1, l2, m) = (5.0, 7.0, 1.5, 2.5, 1.7);
        let med = MediumSpec::hexagonal(t1, t2, l1, l2, m).unwrap();
        for &(phi, psi) in &[(0.0, 0.3), (1.2, -0.8), (2.9, 1.1), (4.0, 0.0)] {
            let q = hexagonal_frame(phi, psi);
            assert!((q.transpose() * &q - DMatrix::identity(3, 3)).amax() < 1e-15);
            let eta: Vec<f64> = q.column(1).iter().copied().collect();
            let a = q.transpose() * med.symbol_at(&eta).unwrap() * &q;
            let h = hexagonal_reduce(t1, t2, l1, l2, m, psi).unwrap();
            assert!(a[(0, 1)].abs() < 1e-13 && a[(0, 2)].abs() < 1e-13);
            assert!((a[(0, 0)] - h.hyperbolic).abs() < 1e-13);
            let blk = a.view((1, 1), (2, 2));
            assert!((blk.trace() - h.block_trace).abs() < 1e-13);
            assert!((blk[(0, 0)] * blk[(1, 1)] - blk[(0, 1)] * blk[(1, 0)] - h.block_det).abs() < 1e-12);
        }
        let h = hexagonal_reduce(t1, t2, l1, l2, m, 0.0).unwrap();
        assert!((h.block_trace - (m + t1)).abs() < 1e-15 && (h.block_det - m * t1).abs() < 1e-15);
    }

    #[test]
    fn block_step_trivial_and_failure() {
        let h1 = DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 0.0, 0.0, 2.0, 3.0, 0.0, 3.0, 4.0]);
        let n = block_diagonalize_step(&[1.0, 2.0, 2.0], &h1, &[1, 2], 1e-12).unwrap();
        assert_eq!(n.amax(), 0.0);
        assert!(block_diagonalize_step(&[1.0, 1.0, 2.0], &h1, &[1, 2], 1e-12).is_err());
    }

    #[test]
    fn validation_reports_pass() {
        let c = CouplingConstants::new(1.0, 1.0).unwrap();
        for &(l, m, t) in &[(2.0, 2.0, 8.0), (1.0, 3.0, 5.0), (-0.5, 1.0, 2.0)] {
            for rep in [validate_conic(l, m, t, &c).unwrap(), validate_uniplanar(l, m, t, &c).unwrap()] {
                let bad: Vec<_> = rep.rows.iter().filter(|r| !r.pass).collect();
                assert!(bad.is_empty(), "{} {:?}", rep.name, bad);
            }
        }
    }

    #[test]
    fn fd_stencils() {
        assert!((fd_first(|x| x.sin(), 1e-3) - 1.0).abs() < 1e-12);
        assert!((fd_second(|x| x.cos(), 1e-3) + 1.0).abs() < 1e-8);
    }
}
