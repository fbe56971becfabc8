//! The first-order system symbol B(ξ) and its eigenvalue asymptotics.
//!
//! With V = ((D_t + 𝒟^{1/2})M*Û, (D_t - 𝒟^{1/2})M*Û, θ̂) the system reads
//! D_t V = B(ξ)V where B carries ±ω_j on the diagonal, iγa_j in the last
//! column, -(iγ/2)a_j in the last row and iκ|ξ|² in the corner. With this
//! sign det(ν - B) is exactly the characteristic polynomial
//! (ν - iκ|ξ|²)∏(ν² - κ_j) - νγ²Σ a_j² ∏_{k≠j}(ν² - κ_k).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, CMat, C64};
use crate::media::{CouplingConstants, MediumSpec};
use crate::spectral::{eigenframe, DirectionReport, Eigenframe, Tolerances};
use crate::sphere::norm;

const I: C64 = C64 { re: 0.0, im: 1.0 };

#[derive(Debug, Clone)]
pub struct SystemSymbol {
    pub xi: Vec<f64>,
    pub xi_norm: f64,
    pub eta: Vec<f64>,
    /// κ_j(η), ascending.
    pub kappa_eta: Vec<f64>,
    /// a_j(η).
    pub coupling_eta: Vec<f64>,
    /// ω_j(ξ) = |ξ| √κ_j(η).
    pub omega: Vec<f64>,
    /// a_j(ξ) = |ξ| a_j(η).
    pub coupling: Vec<f64>,
    pub gamma: f64,
    pub kappa: f64,
    pub matrix: CMat,
}

impl SystemSymbol {
    pub fn dim(&self) -> usize {
        self.omega.len()
    }
}

/// B(ξ) from a frame at η = ξ/|ξ|. Any orthonormal eigenframe works, also at
/// degenerate directions; the spectrum does not depend on the choice.
pub fn build_b_with_frame(frame: &Eigenframe, eta: &[f64], xi_norm: f64, c: &CouplingConstants) -> SystemSymbol {
    let n = frame.dim();
    let a_eta = frame.couplings(eta);
    let omega: Vec<f64> = frame.values.iter().map(|k| xi_norm * k.max(0.0).sqrt()).collect();
    let a: Vec<f64> = a_eta.iter().map(|x| xi_norm * x).collect();
    let mut b = CMat::zeros(2 * n + 1, 2 * n + 1);
    for j in 0..n {
        b[(j, j)] = C64::new(omega[j], 0.0);
        b[(n + j, n + j)] = C64::new(-omega[j], 0.0);
        b[(j, 2 * n)] = I * (c.gamma * a[j]);
        b[(n + j, 2 * n)] = I * (c.gamma * a[j]);
        b[(2 * n, j)] = -I * (0.5 * c.gamma * a[j]);
        b[(2 * n, n + j)] = -I * (0.5 * c.gamma * a[j]);
    }
    b[(2 * n, 2 * n)] = I * (c.kappa * xi_norm * xi_norm);
    SystemSymbol {
        xi: eta.iter().map(|e| e * xi_norm).collect(),
        xi_norm,
        eta: eta.to_vec(),
        kappa_eta: frame.values.clone(),
        coupling_eta: a_eta,
        omega,
        coupling: a,
        gamma: c.gamma,
        kappa: c.kappa,
        matrix: b,
    }
}

/// B(ξ) for ξ ≠ 0 at a non-degenerate direction.
pub fn build_b(medium: &MediumSpec, c: &CouplingConstants, xi: &[f64], tol: &Tolerances) -> Result<SystemSymbol> {
    let r = norm(xi);
    if r == 0.0 || !r.is_finite() {
        return Err(Error::invalid("B(ξ) needs a finite nonzero frequency"));
    }
    let eta: Vec<f64> = xi.iter().map(|x| x / r).collect();
    let frame = eigenframe(&medium.symbol(&eta)?)?;
    let scale = frame.values.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    if frame.dim() > 1 && frame.gap <= tol.degenerate * scale {
        return Err(Error::Degenerate { gap: frame.gap });
    }
    Ok(build_b_with_frame(&frame, &eta, r, c))
}

/// The characteristic polynomial det(ν - B(ξ)) from its factorized form.
pub fn char_poly(sys: &SystemSymbol, nu: C64) -> C64 {
    let n = sys.dim();
    let r2 = sys.xi_norm * sys.xi_norm;
    let q: Vec<C64> = (0..n).map(|j| nu * nu - sys.kappa_eta[j] * r2).collect();
    let prod_all: C64 = q.iter().product();
    let mut s = C64::new(0.0, 0.0);
    for j in 0..n {
        let p: C64 = (0..n).filter(|&k| k != j).map(|k| q[k]).product();
        s += p * (sys.coupling[j] * sys.coupling[j]);
    }
    (nu - I * (sys.kappa * r2)) * prod_all - nu * (sys.gamma * sys.gamma) * s
}

/// det(νI - B) by LU, the independent route.
pub fn char_poly_direct(sys: &SystemSymbol, nu: C64) -> C64 {
    let m = sys.matrix.nrows();
    linalg::det(&(CMat::from_diagonal_element(m, m, nu) - &sys.matrix))
}

/// Relative residuals of trace B = iκ|ξ|² and det B = (−1)ⁿ iκ|ξ|² det A(ξ),
/// with det B by LU and det A(ξ) from the medium.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IdentityResiduals {
    pub trace: f64,
    pub det: f64,
}

pub fn identity_residuals(medium: &MediumSpec, sys: &SystemSymbol) -> Result<IdentityResiduals> {
    let r2 = sys.xi_norm * sys.xi_norm;
    let heat = I * (sys.kappa * r2);
    let trace = (sys.matrix.trace() - heat).norm() / (sys.kappa.abs() * r2);
    let det_a = medium.symbol(&sys.xi)?.determinant();
    let sign = if sys.dim().is_multiple_of(2) { 1.0 } else { -1.0 };
    let expected = heat * (sign * det_a);
    let det = (linalg::det(&sys.matrix) - expected).norm() / expected.norm().max(f64::MIN_POSITIVE);
    Ok(IdentityResiduals { trace, det })
}

#[derive(Debug, Clone)]
pub struct BSpectrum {
    /// Eigenvalues sorted by real part, then imaginary part.
    pub values: Vec<C64>,
    pub groups: Vec<linalg::SpectralGroup>,
    pub cond: f64,
    pub used_contour: bool,
    pub min_imag: f64,
}

impl BSpectrum {
    /// Index of the heat mode: the eigenvalue closest to the imaginary axis,
    /// ties broken by the larger imaginary part.
    pub fn heat_index(&self) -> usize {
        let mut best = 0;
        for k in 1..self.values.len() {
            let (a, b) = (self.values[k], self.values[best]);
            let scale = 1e-9 * (a.norm() + b.norm()).max(f64::MIN_POSITIVE);
            if a.re.abs() < b.re.abs() - scale || ((a.re.abs() - b.re.abs()).abs() <= scale && a.im > b.im) {
                best = k;
            }
        }
        best
    }

    /// Projection of the group containing eigenvalue `k`.
    pub fn projection_of(&self, k: usize) -> &CMat {
        &self.groups.iter().find(|g| g.members.contains(&k)).expect("every eigenvalue belongs to a group").projection
    }
}

pub fn eigenvalues_b(sys: &SystemSymbol) -> Result<BSpectrum> {
    let s = linalg::spectrum(&sys.matrix).ok_or_else(|| Error::Numerical("eigensolver did not converge".into()))?;
    let mut order: Vec<usize> = (0..s.values.len()).collect();
    order.sort_by(|&i, &j| s.values[i].re.total_cmp(&s.values[j].re).then(s.values[i].im.total_cmp(&s.values[j].im)));
    let mut rank = vec![0; order.len()];
    for (new, &old) in order.iter().enumerate() {
        rank[old] = new;
    }
    let values: Vec<C64> = order.iter().map(|&i| s.values[i]).collect();
    let groups = s
        .groups
        .into_iter()
        .map(|g| linalg::SpectralGroup {
            members: g.members.iter().map(|&m| rank[m]).collect(),
            projection: g.projection,
        })
        .collect();
    let min_imag = values.iter().map(|z| z.im).fold(f64::INFINITY, f64::min);
    Ok(BSpectrum { values, groups, cond: s.cond, used_contour: s.used_contour, min_imag })
}

/// Secular function f(s) = Σ a_j²/(s - κ_j) over the listed modes.
fn secular(s: f64, kappa: &[f64], a: &[f64], modes: &[usize]) -> f64 {
    modes.iter().map(|&j| a[j] * a[j] / (s - kappa[j])).sum()
}

fn bisect(lo: f64, hi: f64, g: impl Fn(f64) -> f64) -> f64 {
    // g decreasing on (lo, hi), positive at lo, negative at hi.
    let (mut lo, mut hi) = (lo, hi);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if g(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi.abs().max(lo.abs()) {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// First-order speeds ν̃_j at ξ → 0, roots of 1/γ² = Σ a_j²/(ν̃² - κ_j) in
/// ascending order. Hyperbolic modes contribute ν̃² = κ_j.
pub fn solve_nu_tilde(report: &DirectionReport, gamma: f64, tol: &Tolerances) -> Result<Vec<f64>> {
    let a = report.coupling.as_ref().ok_or(Error::Degenerate { gap: report.eig_gap.unwrap_or(0.0) })?;
    if gamma == 0.0 {
        return Ok(report.kappa.iter().map(|k| k.sqrt()).collect());
    }
    if let Some(&j) = report.gamma_degenerate.first() {
        return Err(Error::GammaDegenerate { mode: j });
    }
    let kappa = &report.kappa;
    let n = kappa.len();
    let hyp = report.hyperbolic_modes();
    let active: Vec<usize> = (0..n).filter(|j| !hyp.contains(j)).collect();
    let g2 = gamma * gamma;
    let target = 1.0 / g2;
    let scale = kappa.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
    let inset = 1e-14 * scale;
    let h = |s: f64| secular(s, kappa, a, &active) - target;
    let mut roots: Vec<f64> = Vec::with_capacity(n);
    for w in active.windows(2) {
        roots.push(bisect(kappa[w[0]] + inset, kappa[w[1]] - inset, h));
    }
    if let Some(&last) = active.last() {
        let mass: f64 = active.iter().map(|&j| a[j] * a[j]).sum();
        roots.push(bisect(kappa[last] + inset, kappa[last] + g2 * mass + inset, h));
    }
    for &j in hyp {
        // A hyperbolic κ_j sitting on a root of the reduced equation is a double root.
        if roots.iter().any(|r| (r - kappa[j]).abs() <= tol.gamma_degenerate * scale) {
            return Err(Error::GammaDegenerate { mode: j });
        }
        roots.push(kappa[j]);
    }
    roots.sort_by(f64::total_cmp);
    Ok(roots.iter().map(|s| s.sqrt()).collect())
}

/// Leading terms as ξ → 0: ν₀ ~ iκb₀|ξ|², ν_j^± ~ ±ν̃_j|ξ| + iκb_j|ξ|².
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmallXiExpansion {
    pub nu_tilde: Vec<f64>,
    pub b0: f64,
    pub b: Vec<f64>,
    pub kappa: f64,
}

/// Leading terms as ξ → ∞: ν₀ ~ iκ|ξ|² + i·heat_offset,
/// ν_j^± ~ ±ω_j|ξ| + i·mode_offset_j.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LargeXiExpansion {
    pub omega: Vec<f64>,
    pub heat_offset: f64,
    pub mode_offset: Vec<f64>,
    pub kappa: f64,
}

/// A predicted eigenvalue with its label ("heat", "1+", "1-", ...).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModeValue {
    pub mode: String,
    pub nu: C64,
}

fn mode_label(j: usize, plus: bool) -> String {
    format!("{}{}", j + 1, if plus { '+' } else { '-' })
}

impl SmallXiExpansion {
    pub fn predict(&self, r: f64) -> Vec<ModeValue> {
        let mut out = vec![ModeValue { mode: "heat".into(), nu: I * (self.kappa * self.b0 * r * r) }];
        for (j, (nt, b)) in self.nu_tilde.iter().zip(&self.b).enumerate() {
            for plus in [true, false] {
                let s = if plus { 1.0 } else { -1.0 };
                out.push(ModeValue { mode: mode_label(j, plus), nu: C64::new(s * nt * r, self.kappa * b * r * r) });
            }
        }
        out
    }

    /// b₀ + 2Σ b_j - 1.
    pub fn trace_residual(&self) -> f64 {
        self.b0 + 2.0 * self.b.iter().sum::<f64>() - 1.0
    }
}

impl LargeXiExpansion {
    pub fn predict(&self, r: f64) -> Vec<ModeValue> {
        let mut out = vec![ModeValue { mode: "heat".into(), nu: I * (self.kappa * r * r + self.heat_offset) }];
        for (j, (w, o)) in self.omega.iter().zip(&self.mode_offset).enumerate() {
            for plus in [true, false] {
                let s = if plus { 1.0 } else { -1.0 };
                out.push(ModeValue { mode: mode_label(j, plus), nu: C64::new(s * w * r, *o) });
            }
        }
        out
    }
}

pub fn small_xi_expansion(
    report: &DirectionReport,
    c: &CouplingConstants,
    tol: &Tolerances,
) -> Result<SmallXiExpansion> {
    let a = report.coupling.as_ref().ok_or(Error::Degenerate { gap: report.eig_gap.unwrap_or(0.0) })?;
    let nu_tilde = solve_nu_tilde(report, c.gamma, tol)?;
    let kappa = &report.kappa;
    let g2 = c.gamma * c.gamma;
    let n = kappa.len();
    let b0 = 1.0 / (1.0 + g2 * (0..n).map(|k| a[k] * a[k] / kappa[k]).sum::<f64>());
    let hyp = report.hyperbolic_modes();
    let scale = kappa.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
    let b = nu_tilde
        .iter()
        .map(|nt| {
            let s = nt * nt;
            if hyp.iter().any(|&j| (kappa[j] - s).abs() <= 1e-12 * scale) {
                return 0.0;
            }
            1.0 / (1.0
                + g2 * (0..n).map(|k| a[k] * a[k] * (s + kappa[k]) / ((s - kappa[k]) * (s - kappa[k]))).sum::<f64>())
        })
        .collect();
    Ok(SmallXiExpansion { nu_tilde, b0, b, kappa: c.kappa })
}

pub fn large_xi_expansion(report: &DirectionReport, c: &CouplingConstants) -> Result<LargeXiExpansion> {
    let a = report.coupling.as_ref().ok_or(Error::Degenerate { gap: report.eig_gap.unwrap_or(0.0) })?;
    let g2 = c.gamma * c.gamma;
    Ok(LargeXiExpansion {
        omega: report.kappa.iter().map(|k| k.sqrt()).collect(),
        heat_offset: -g2 / c.kappa,
        mode_offset: a.iter().map(|x| g2 * x * x / (2.0 * c.kappa)).collect(),
        kappa: c.kappa,
    })
}

/// Largest distance between predicted values and their nearest computed
/// eigenvalue, matched greedily by increasing distance.
pub fn match_residual(predicted: &[ModeValue], computed: &[C64]) -> f64 {
    let p: Vec<C64> = predicted.iter().map(|m| m.nu).collect();
    match_values(&p, computed)
}

/// Largest distance in a greedy nearest-first pairing of two multisets.
pub fn match_values(predicted: &[C64], computed: &[C64]) -> f64 {
    let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
    for (i, p) in predicted.iter().enumerate() {
        for (k, c) in computed.iter().enumerate() {
            pairs.push(((p - c).norm(), i, k));
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut used_p = vec![false; predicted.len()];
    let mut used_c = vec![false; computed.len()];
    let mut worst: f64 = 0.0;
    for (d, i, k) in pairs {
        if !used_p[i] && !used_c[k] {
            used_p[i] = true;
            used_c[k] = true;
            worst = worst.max(d);
        }
    }
    worst
}

/// Least-squares slope of log y against log x.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let m = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / m, ly.iter().sum::<f64>() / m);
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

pub fn log_space(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..count).map(|k| (a + (b - a) * k as f64 / (count - 1).max(1) as f64).exp()).collect()
}

/// Residual slope of an expansion against computed eigenvalues over a |ξ| range.
#[derive(Debug, Clone, Serialize)]
pub struct ExpansionCheck {
    pub xi: Vec<f64>,
    pub residual: Vec<f64>,
    pub slope: f64,
}

pub fn check_small_xi(
    medium: &MediumSpec,
    c: &CouplingConstants,
    eta: &[f64],
    xi_range: (f64, f64),
    points: usize,
    tol: &Tolerances,
) -> Result<ExpansionCheck> {
    let report = crate::spectral::classify(medium, c, eta, tol)?;
    let exp = small_xi_expansion(&report, c, tol)?;
    check(medium, c, eta, xi_range, points, tol, |r| exp.predict(r))
}

pub fn check_large_xi(
    medium: &MediumSpec,
    c: &CouplingConstants,
    eta: &[f64],
    xi_range: (f64, f64),
    points: usize,
    tol: &Tolerances,
) -> Result<ExpansionCheck> {
    let report = crate::spectral::classify(medium, c, eta, tol)?;
    let exp = large_xi_expansion(&report, c)?;
    check(medium, c, eta, xi_range, points, tol, |r| exp.predict(r))
}

fn check(
    medium: &MediumSpec,
    c: &CouplingConstants,
    eta: &[f64],
    (lo, hi): (f64, f64),
    points: usize,
    tol: &Tolerances,
    predict: impl Fn(f64) -> Vec<ModeValue>,
) -> Result<ExpansionCheck> {
    if points < 2 {
        return Err(Error::Insufficient("need at least two |ξ| points".into()));
    }
    let xi = log_space(lo, hi, points);
    let mut residual = Vec::with_capacity(points);
    for &r in &xi {
        let x: Vec<f64> = eta.iter().map(|e| e * r).collect();
        let sys = build_b(medium, c, &x, tol)?;
        let spec = eigenvalues_b(&sys)?;
        residual.push(match_residual(&predict(r), &spec.values));
    }
    let slope = loglog_slope(&xi, &residual);
    Ok(ExpansionCheck { xi, residual, slope })
}

/// Constants of the non-tangential limit at a point η̄ of the hyperbolic set
/// of mode j: Im ν_j^± / a_j² → D|ξ|² / (2ω_j (C² + |ξ|²D²)).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HyperbolicLimit {
    pub mode: usize,
    pub c: f64,
    pub d: f64,
    pub omega: f64,
}

impl HyperbolicLimit {
    pub fn ratio(&self, xi_norm: f64) -> f64 {
        let r2 = xi_norm * xi_norm;
        self.d * r2 / (2.0 * self.omega * (self.c * self.c + r2 * self.d * self.d))
    }
}

pub fn hyperbolic_limit(report: &DirectionReport, mode: usize, c: &CouplingConstants) -> Result<HyperbolicLimit> {
    let a = report.coupling.as_ref().ok_or(Error::Degenerate { gap: report.eig_gap.unwrap_or(0.0) })?;
    if !report.hyperbolic_modes().contains(&mode) {
        return Err(Error::invalid(format!("mode {mode} is not hyperbolic at this direction")));
    }
    let g2 = c.gamma * c.gamma;
    let s = crate::spectral::gamma_sum(&report.kappa, a, mode);
    let omega = report.kappa[mode].sqrt();
    Ok(HyperbolicLimit { mode, c: (1.0 - g2 * s) / g2, d: c.kappa / (g2 * omega), omega })
}

/// One row of an imaginary-part scan.
#[derive(Debug, Clone, Serialize)]
pub struct ScanRow {
    pub eta: Vec<f64>,
    pub xi_norm: f64,
    pub mode: usize,
    pub nu: C64,
}

pub fn scan_header(n: usize) -> String {
    let mut cols: Vec<String> = (1..=n).map(|i| format!("eta_{i}")).collect();
    cols.extend(["xi_norm", "mode", "re_nu", "im_nu"].map(String::from));
    cols.join(",")
}

impl ScanRow {
    pub fn to_csv(&self) -> String {
        let mut cols: Vec<String> = self.eta.iter().map(|e| format!("{e:e}")).collect();
        cols.push(format!("{:e}", self.xi_norm));
        cols.push(self.mode.to_string());
        cols.push(format!("{:e}", self.nu.re));
        cols.push(format!("{:e}", self.nu.im));
        cols.join(",")
    }
}

/// Eigenvalues of B over a grid of directions and |ξ|; degenerate directions are skipped.
pub fn im_part_scan(
    medium: &MediumSpec,
    c: &CouplingConstants,
    dirs: &[Vec<f64>],
    xi_grid: &[f64],
    tol: &Tolerances,
) -> Result<Vec<ScanRow>> {
    let mut rows = Vec::new();
    for eta in dirs {
        for &r in xi_grid {
            let x: Vec<f64> = eta.iter().map(|e| e * r).collect();
            let sys = match build_b(medium, c, &x, tol) {
                Ok(s) => s,
                Err(Error::Degenerate { .. }) => continue,
                Err(e) => return Err(e),
            };
            let spec = eigenvalues_b(&sys)?;
            for (mode, nu) in spec.values.iter().enumerate() {
                rows.push(ScanRow { eta: eta.clone(), xi_norm: r, mode, nu: *nu });
            }
        }
    }
    Ok(rows)
}

/// Smallest pairwise eigenvalue distance relative to the spectral radius.
pub fn relative_separation(values: &[C64]) -> f64 {
    let scale = values.iter().map(|z| z.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let mut best = f64::INFINITY;
    for i in 0..values.len() {
        for j in (i + 1)..values.len() {
            best = best.min((values[i] - values[j]).norm());
        }
    }
    best / scale
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::classify;
    use crate::sphere::normalize;

    fn unit() -> CouplingConstants {
        CouplingConstants::new(1.0, 1.0).unwrap()
    }

    fn cubic822() -> MediumSpec {
        MediumSpec::cubic(3, 2.0, 2.0, 8.0).unwrap()
    }

    #[test]
    fn one_dimensional_matrix() {
        let bar = MediumSpec::bar(2.0).unwrap();
        let c = CouplingConstants::new(3.0, 0.5).unwrap();
        let s = build_b(&bar, &c, &[1.5], &Tolerances::default()).unwrap();
        let b = &s.matrix;
        assert_eq!(b[(0, 0)], C64::new(3.0, 0.0));
        assert_eq!(b[(1, 1)], C64::new(-3.0, 0.0));
        assert_eq!(b[(0, 2)], C64::new(0.0, 4.5));
        assert_eq!(b[(2, 0)], C64::new(0.0, -2.25));
        assert_eq!(b[(2, 2)], C64::new(0.0, 0.5 * 2.25));
    }

    #[test]
    fn trace_is_exact() {
        let s = build_b(&cubic822(), &unit(), &[0.3, -1.2, 2.0], &Tolerances::default()).unwrap();
        assert!((s.matrix.trace() - I * (s.xi_norm * s.xi_norm)).norm() < 1e-14 * s.xi_norm * s.xi_norm);
    }

    #[test]
    fn uncoupled_is_block_diagonal() {
        let c = CouplingConstants::uncoupled(2.0).unwrap();
        let s = build_b(&cubic822(), &c, &normalize(&[1.0, 2.0, 3.0]), &Tolerances::default()).unwrap();
        for j in 0..6 {
            assert_eq!(s.matrix[(j, 6)], C64::new(0.0, 0.0));
            assert_eq!(s.matrix[(6, j)], C64::new(0.0, 0.0));
        }
        let spec = eigenvalues_b(&s).unwrap();
        for w in &s.omega {
            assert!(spec.values.iter().any(|z| (z - w).norm() < 1e-12));
        }
    }

    #[test]
    fn char_poly_routes_agree() {
        let s = build_b(&cubic822(), &unit(), &[0.3, -1.2, 2.0], &Tolerances::default()).unwrap();
        for nu in [C64::new(0.0, 0.0), C64::new(1.0, 0.5), C64::new(-3.0, 2.0), C64::new(0.2, -7.0)] {
            let (a, b) = (char_poly(&s, nu), char_poly_direct(&s, nu));
            assert!((a - b).norm() <= 1e-9 * b.norm().max(1.0), "{a} {b}");
        }
    }

    #[test]
    fn char_poly_vanishes_on_uncoupled_speed() {
        let c = CouplingConstants::uncoupled(1.0).unwrap();
        let s = build_b(&cubic822(), &c, &[0.3, -1.2, 2.0], &Tolerances::default()).unwrap();
        assert!(char_poly(&s, C64::new(s.omega[0], 0.0)).norm() < 1e-9);
    }

    #[test]
    fn one_dimensional_char_poly_at_i() {
        let s = build_b(&MediumSpec::bar(1.0).unwrap(), &unit(), &[1.0], &Tolerances::default()).unwrap();
        // 3×3 determinant of iI - B written out by hand.
        let m = |i: usize, j: usize| (if i == j { I } else { C64::new(0.0, 0.0) }) - s.matrix[(i, j)];
        let det = m(0, 0) * (m(1, 1) * m(2, 2) - m(1, 2) * m(2, 1)) - m(0, 1) * (m(1, 0) * m(2, 2) - m(1, 2) * m(2, 0))
            + m(0, 2) * (m(1, 0) * m(2, 1) - m(1, 1) * m(2, 0));
        assert!((char_poly(&s, I) - det).norm() < 1e-14);
    }

    #[test]
    fn hyperbolic_direction_has_real_eigenvalue() {
        let th: f64 = 0.37;
        let s = build_b(&cubic822(), &unit(), &[2.0 * th.cos(), 2.0 * th.sin(), 0.0], &Tolerances::default()).unwrap();
        let spec = eigenvalues_b(&s).unwrap();
        assert!(spec.values.iter().any(|z| (z - s.omega[0]).norm() < 1e-9));
        assert!(spec.values.iter().any(|z| (z + s.omega[0]).norm() < 1e-9));
    }

    #[test]
    fn one_dimensional_small_xi_heat_eigenvalue() {
        let s = build_b(&MediumSpec::bar(1.0).unwrap(), &unit(), &[0.01], &Tolerances::default()).unwrap();
        let spec = eigenvalues_b(&s).unwrap();
        let heat = spec.values[spec.heat_index()];
        assert!((heat - I * 0.5e-4).norm() < 1e-6);
    }

    #[test]
    fn nu_tilde_one_dimensional() {
        let c = CouplingConstants::new(4.0, 1.0).unwrap();
        let r = classify(&MediumSpec::bar(3.0).unwrap(), &c, &[1.0], &Tolerances::default()).unwrap();
        let nt = solve_nu_tilde(&r, 4.0, &Tolerances::default()).unwrap();
        assert!((nt[0] - 5.0).abs() < 1e-13);
    }

    #[test]
    fn nu_tilde_tends_to_omega_as_gamma_vanishes() {
        let r = classify(&cubic822(), &unit(), &normalize(&[1.0, 2.0, 3.0]), &Tolerances::default()).unwrap();
        let nt = solve_nu_tilde(&r, 1e-4, &Tolerances::default()).unwrap();
        for (v, k) in nt.iter().zip(&r.kappa) {
            assert!((v - k.sqrt()).abs() < 1e-6);
        }
    }

    #[test]
    fn nu_tilde_matches_companion_roots() {
        let t = Tolerances::default();
        let r = classify(&cubic822(), &unit(), &normalize(&[1.0, 2.0, 3.0]), &t).unwrap();
        let nt = solve_nu_tilde(&r, 1.0, &t).unwrap();
        let (k, a) = (&r.kappa, r.coupling.clone().unwrap());
        // (s-k1)(s-k2)(s-k3) - Σ a_j² ∏_{k≠j}(s-k_k) expanded to a monic cubic.
        let e1 = k[0] + k[1] + k[2];
        let e2 = k[0] * k[1] + k[0] * k[2] + k[1] * k[2];
        let e3 = k[0] * k[1] * k[2];
        let sa: f64 = a.iter().map(|x| x * x).sum();
        let q1: f64 = (0..3).map(|j| a[j] * a[j] * (e1 - k[j])).sum();
        let q0: f64 = (0..3).map(|j| a[j] * a[j] * e3 / k[j]).sum();
        let c2 = -e1 - sa;
        let c1 = e2 + q1;
        let c0 = -e3 - q0;
        let comp = nalgebra::Matrix3::new(0.0, 0.0, -c0, 1.0, 0.0, -c1, 0.0, 1.0, -c2);
        let mut roots: Vec<f64> = comp.complex_eigenvalues().iter().map(|z| z.re.sqrt()).collect();
        roots.sort_by(f64::total_cmp);
        for (x, y) in nt.iter().zip(&roots) {
            assert!((x - y).abs() < 1e-10, "{nt:?} {roots:?}");
        }
        let w: Vec<f64> = k.iter().map(|v| v.sqrt()).collect();
        assert!(w[0] < nt[0] && nt[0] < w[1] && w[1] < nt[1] && nt[1] < w[2] && w[2] < nt[2]);
    }

    #[test]
    fn one_dimensional_coefficients() {
        let r = classify(&MediumSpec::bar(1.0).unwrap(), &unit(), &[1.0], &Tolerances::default()).unwrap();
        let e = small_xi_expansion(&r, &unit(), &Tolerances::default()).unwrap();
        assert!((e.b0 - 0.5).abs() < 1e-15 && (e.b[0] - 0.25).abs() < 1e-15);
        let l = large_xi_expansion(&r, &unit()).unwrap();
        assert!((l.mode_offset[0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn hyperbolic_mode_has_zero_b() {
        let t = Tolerances::default();
        let th: f64 = 0.37;
        let r = classify(&cubic822(), &unit(), &[th.cos(), th.sin(), 0.0], &t).unwrap();
        let e = small_xi_expansion(&r, &unit(), &t).unwrap();
        let zero = e.b.iter().filter(|b| b.abs() < 1e-10).count();
        assert_eq!(zero, 1);
        assert!(e.trace_residual().abs() < 1e-12);
        let l = large_xi_expansion(&r, &unit()).unwrap();
        assert!(l.mode_offset[0].abs() < 1e-15);
    }

    #[test]
    fn large_xi_offset_compares_with_eigenvalues() {
        let t = Tolerances::default();
        let eta = normalize(&[1.0, 2.0, 3.0]);
        let r = classify(&cubic822(), &unit(), &eta, &t).unwrap();
        let l = large_xi_expansion(&r, &unit()).unwrap();
        let a1 = r.coupling.as_ref().unwrap()[0];
        assert!((l.mode_offset[0] - a1 * a1 / 2.0).abs() < 1e-15);
        let x: Vec<f64> = eta.iter().map(|e| e * 1e3).collect();
        let spec = eigenvalues_b(&build_b(&cubic822(), &unit(), &x, &t).unwrap()).unwrap();
        let w1 = 1e3 * r.kappa[0].sqrt();
        let near = spec.values.iter().min_by(|a, b| (*a - w1).norm().total_cmp(&(*b - w1).norm())).unwrap();
        assert!((near.im - a1 * a1 / 2.0).abs() < 1e-2);
    }

    #[test]
    fn expansion_slopes() {
        let t = Tolerances::default();
        let eta = normalize(&[1.0, 2.0, 3.0]);
        let s = check_small_xi(&cubic822(), &unit(), &eta, (1e-3, 1e-1), 9, &t).unwrap();
        assert!(s.slope >= 2.9, "{s:?}");
        let l = check_large_xi(&cubic822(), &unit(), &eta, (10.0, 1e3), 9, &t).unwrap();
        assert!(l.slope <= -0.9, "{l:?}");
    }

    #[test]
    fn projections_resolve_identity_and_spectrum_is_dissipative() {
        let s = build_b(&cubic822(), &unit(), &[0.3, -1.2, 2.0], &Tolerances::default()).unwrap();
        let spec = eigenvalues_b(&s).unwrap();
        let mut sum = CMat::zeros(7, 7);
        for g in &spec.groups {
            sum += &g.projection;
        }
        assert!(linalg::fro_norm(&(sum - CMat::identity(7, 7))) < 1e-8);
        assert!(spec.min_imag >= -1e-10);
    }

    #[test]
    fn scan_rows_have_fixed_columns() {
        let rows =
            im_part_scan(&cubic822(), &unit(), &[normalize(&[1.0, 2.0, 3.0])], &[0.5, 1.0], &Tolerances::default())
                .unwrap();
        assert_eq!(rows.len(), 14);
        assert_eq!(rows[0].to_csv().split(',').count(), scan_header(3).split(',').count());
    }

    #[test]
    fn trace_and_determinant_identities() {
        let m = MediumSpec::cubic(3, 2.0, 2.0, 8.0).unwrap();
        let c = CouplingConstants::new(1.3, 0.7).unwrap();
        for r in [0.01, 1.0, 100.0] {
            let x: Vec<f64> = [1.0, 2.0, 3.0].iter().map(|v| v * r / 14f64.sqrt()).collect();
            let s = build_b(&m, &c, &x, &Tolerances::default()).unwrap();
            let res = identity_residuals(&m, &s).unwrap();
            assert!(res.trace < 1e-12 && res.det < 1e-9, "{res:?}");
        }
        let bar = MediumSpec::bar(1.5).unwrap();
        let s = build_b(&bar, &c, &[0.3], &Tolerances::default()).unwrap();
        assert!(identity_residuals(&bar, &s).unwrap().det < 1e-12);
    }
}
