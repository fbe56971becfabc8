//! Eigenframes of A(η), Krylov ranks and the classification of directions.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::media::{CouplingConstants, MediumSpec};
use crate::sphere::dot;

/// Classification thresholds. Each one is an independent knob.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Eigenvalue gap, relative to ‖A(η)‖, at or below which η is degenerate.
    pub degenerate: f64,
    /// |a_j| at or below which mode j is hyperbolic.
    pub coupling: f64,
    /// Singular value threshold, relative to σ_max, for Krylov ranks.
    pub krylov: f64,
    /// |1 - γ² S_j| at or below which a hyperbolic mode is γ-degenerate.
    pub gamma_degenerate: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { degenerate: 1e-8, coupling: 1e-8, krylov: 1e-8, gamma_degenerate: 1e-8 }
    }
}

/// Ascending eigenvalues of a symmetric matrix with gauge-fixed eigenvectors.
#[derive(Debug, Clone, PartialEq)]
pub struct Eigenframe {
    pub values: Vec<f64>,
    /// Column j is r_j.
    pub vectors: DMatrix<f64>,
    /// Smallest gap between consecutive eigenvalues; infinite for n = 1.
    pub gap: f64,
}

impl Eigenframe {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn vector(&self, j: usize) -> Vec<f64> {
        self.vectors.column(j).iter().copied().collect()
    }

    /// a_j = r_j · η.
    pub fn couplings(&self, eta: &[f64]) -> Vec<f64> {
        (0..self.dim()).map(|j| dot(self.vectors.column(j).as_slice(), eta)).collect()
    }
}

fn gauge(v: &mut DVector<f64>) {
    let mut best = 0;
    for i in 1..v.len() {
        if v[i].abs() > v[best].abs() + 1e-12 {
            best = i;
        }
    }
    if v[best] < 0.0 {
        *v = -v.clone();
    }
}

/// Eigen-decomposition of a symmetric matrix: ascending values, each vector
/// with its largest component positive (ties go to the lowest index).
pub fn eigenframe(a: &DMatrix<f64>) -> Result<Eigenframe> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::invalid("eigenframe needs a square matrix"));
    }
    let asym = (a - a.transpose()).norm();
    if asym > 1e-12 * a.norm().max(f64::MIN_POSITIVE) {
        return Err(Error::invalid(format!("matrix is not symmetric (‖A-Aᵀ‖ = {asym:e})")));
    }
    if a.iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid("matrix has non-finite entries"));
    }
    let se = SymmetricEigen::new(a.clone());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| se.eigenvalues[i].total_cmp(&se.eigenvalues[j]));
    let values: Vec<f64> = order.iter().map(|&i| se.eigenvalues[i]).collect();
    let mut vectors = DMatrix::zeros(n, n);
    for (k, &i) in order.iter().enumerate() {
        let mut v = se.eigenvectors.column(i).into_owned();
        v /= v.norm();
        gauge(&mut v);
        vectors.set_column(k, &v);
    }
    let gap = values.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
    Ok(Eigenframe { values, vectors, gap })
}

/// Rank of the Krylov matrix (η | Aη | … | A^{n-1}η) with normalized columns.
pub fn cyclic_dim(a: &DMatrix<f64>, eta: &[f64], rel_tol: f64) -> usize {
    let n = a.nrows();
    let mut k = DMatrix::zeros(n, n);
    let mut v = DVector::from_column_slice(eta);
    for c in 0..n {
        let nv = v.norm();
        if nv == 0.0 {
            break;
        }
        k.set_column(c, &(&v / nv));
        v = a * &v;
    }
    let sv = k.singular_values();
    let smax = sv.iter().copied().fold(0.0, f64::max);
    if smax == 0.0 {
        return 0;
    }
    sv.iter().filter(|s| **s > rel_tol * smax).count()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DirectionKind {
    Degenerate,
    /// Zero-based indices j of the vanishing coupling functions.
    Hyperbolic(Vec<usize>),
    Parabolic,
}

impl DirectionKind {
    pub fn label(&self) -> &'static str {
        match self {
            Self::Degenerate => "degenerate",
            Self::Hyperbolic(_) => "hyperbolic",
            Self::Parabolic => "parabolic",
        }
    }
}

/// Everything known about one direction. Field order is the serialization order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectionReport {
    pub eta: Vec<f64>,
    pub kind: DirectionKind,
    /// κ_j, ascending.
    pub kappa: Vec<f64>,
    /// r_j, one inner vector per mode.
    pub vectors: Vec<Vec<f64>>,
    /// a_j = r_j·η; absent for degenerate directions.
    pub coupling: Option<Vec<f64>>,
    /// Zero-based hyperbolic modes satisfying the γ-degeneracy relation.
    pub gamma_degenerate: Vec<usize>,
    /// Smallest eigenvalue gap; absent when n = 1.
    pub eig_gap: Option<f64>,
    pub cyclic_dim: usize,
}

impl DirectionReport {
    pub fn dim(&self) -> usize {
        self.eta.len()
    }

    pub fn hyperbolic_modes(&self) -> &[usize] {
        match &self.kind {
            DirectionKind::Hyperbolic(j) => j,
            _ => &[],
        }
    }

    pub fn is_degenerate(&self) -> bool {
        self.kind == DirectionKind::Degenerate
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("reports always serialize")
    }

    /// Column names for `to_csv_row` in dimension n.
    pub fn csv_header(n: usize) -> String {
        let mut cols: Vec<String> = (1..=n).map(|i| format!("eta{i}")).collect();
        cols.push("kind".into());
        cols.push("hyperbolic".into());
        cols.extend((1..=n).map(|j| format!("kappa{j}")));
        for j in 1..=n {
            cols.extend((1..=n).map(|i| format!("r{j}_{i}")));
        }
        cols.extend((1..=n).map(|j| format!("a{j}")));
        cols.push("gamma_degenerate".into());
        cols.push("eig_gap".into());
        cols.push("cyclic_dim".into());
        cols.join(",")
    }

    pub fn to_csv_row(&self) -> String {
        let f = |x: &f64| format!("{x:e}");
        let join = |v: &[usize]| v.iter().map(|j| j.to_string()).collect::<Vec<_>>().join(";");
        let mut cols: Vec<String> = self.eta.iter().map(f).collect();
        cols.push(self.kind.label().into());
        cols.push(join(self.hyperbolic_modes()));
        cols.extend(self.kappa.iter().map(f));
        for r in &self.vectors {
            cols.extend(r.iter().map(f));
        }
        match &self.coupling {
            Some(a) => cols.extend(a.iter().map(f)),
            None => cols.extend(std::iter::repeat_n(String::new(), self.dim())),
        }
        cols.push(join(&self.gamma_degenerate));
        cols.push(self.eig_gap.map(|g| f(&g)).unwrap_or_default());
        cols.push(self.cyclic_dim.to_string());
        cols.join(",")
    }
}

/// S_j = Σ_{k≠j} a_k² / (κ_j - κ_k); mode j is γ-degenerate when γ² S_j = 1.
pub fn gamma_sum(kappa: &[f64], a: &[f64], j: usize) -> f64 {
    (0..kappa.len()).filter(|&k| k != j).map(|k| a[k] * a[k] / (kappa[j] - kappa[k])).sum()
}

pub fn classify(
    medium: &MediumSpec,
    coupling: &CouplingConstants,
    eta: &[f64],
    tol: &Tolerances,
) -> Result<DirectionReport> {
    let a = medium.symbol_at(eta)?;
    let frame = eigenframe(&a)?;
    if frame.values[0] <= 0.0 {
        return Err(Error::invalid(format!(
            "A(η) is not positive definite (smallest eigenvalue {:e})",
            frame.values[0]
        )));
    }
    Ok(classify_frame(&a, &frame, coupling.gamma, eta, tol))
}

/// Classification from a precomputed symbol and frame.
pub fn classify_frame(
    a: &DMatrix<f64>,
    frame: &Eigenframe,
    gamma: f64,
    eta: &[f64],
    tol: &Tolerances,
) -> DirectionReport {
    let n = frame.dim();
    let scale = frame.values.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    let degenerate = n > 1 && frame.gap <= tol.degenerate * scale;
    let couplings = frame.couplings(eta);
    let (kind, coupling, gamma_degenerate) = if degenerate {
        (DirectionKind::Degenerate, None, Vec::new())
    } else {
        let hyp: Vec<usize> = (0..n).filter(|&j| couplings[j].abs() <= tol.coupling).collect();
        let gd = if gamma != 0.0 {
            hyp.iter()
                .copied()
                .filter(|&j| {
                    (1.0 - gamma * gamma * gamma_sum(&frame.values, &couplings, j)).abs() <= tol.gamma_degenerate
                })
                .collect()
        } else {
            Vec::new()
        };
        let kind = if hyp.is_empty() { DirectionKind::Parabolic } else { DirectionKind::Hyperbolic(hyp) };
        (kind, Some(couplings), gd)
    };
    DirectionReport {
        eta: eta.to_vec(),
        kind,
        kappa: frame.values.clone(),
        vectors: (0..n).map(|j| frame.vector(j)).collect(),
        coupling,
        gamma_degenerate,
        eig_gap: if n > 1 { Some(frame.gap) } else { None },
        cyclic_dim: cyclic_dim(a, eta, tol.krylov),
    }
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, n - 1);
            out.push(q);
        }
    }
    out
}

/// Reorder and re-sign `next` so that its columns overlap `prev` as much as possible.
pub fn align_frame(prev: &Eigenframe, next: &Eigenframe) -> Eigenframe {
    let n = next.dim();
    let overlap = prev.vectors.transpose() * &next.vectors;
    let perm: Vec<usize> = if n <= 6 {
        permutations(n)
            .into_iter()
            .max_by(|p, q| {
                let s = |p: &Vec<usize>| (0..n).map(|i| overlap[(i, p[i])].abs()).sum::<f64>();
                s(p).total_cmp(&s(q))
            })
            .unwrap()
    } else {
        let mut used = vec![false; n];
        (0..n)
            .map(|i| {
                let k = (0..n)
                    .filter(|&k| !used[k])
                    .max_by(|&a, &b| overlap[(i, a)].abs().total_cmp(&overlap[(i, b)].abs()))
                    .unwrap();
                used[k] = true;
                k
            })
            .collect()
    };
    let mut vectors = DMatrix::zeros(n, n);
    let mut values = vec![0.0; n];
    for i in 0..n {
        let mut c = next.vectors.column(perm[i]).into_owned();
        if overlap[(i, perm[i])] < 0.0 {
            c = -c;
        }
        vectors.set_column(i, &c);
        values[i] = next.values[perm[i]];
    }
    Eigenframe { values, vectors, gap: next.gap }
}

/// Smoothly continued eigenframes along a path of unit directions.
pub fn track_frame(
    medium: &MediumSpec,
    path: &[Vec<f64>],
    seed: Option<&Eigenframe>,
    tol: &Tolerances,
) -> Result<Vec<Eigenframe>> {
    let mut out: Vec<Eigenframe> = Vec::with_capacity(path.len());
    for (index, eta) in path.iter().enumerate() {
        let a = medium.symbol_at(eta)?;
        let frame = eigenframe(&a)?;
        let scale = frame.values.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
        if frame.dim() > 1 && frame.gap <= tol.degenerate * scale {
            return Err(Error::DegenerateCrossing { index, gap: frame.gap });
        }
        let frame = match out.last().or(if index == 0 { seed } else { None }) {
            Some(prev) => align_frame(prev, &frame),
            None => frame,
        };
        out.push(frame);
    }
    Ok(out)
}

/// Krylov determinant det(η | Aη | A²η) for the cubic medium, computed directly
/// and from the factorization (λ+2μ-τ)³ η1η2η3 (η1²-η2²)(η1²-η3²)(η2²-η3²).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HyperbolicDet {
    pub direct: f64,
    pub closed_form: f64,
}

pub fn cubic_hyperbolic_det(lambda: f64, mu: f64, tau: f64, eta: &[f64; 3]) -> Result<HyperbolicDet> {
    let m = MediumSpec::cubic(3, lambda, mu, tau)?;
    let a = m.symbol(eta)?;
    let v = DVector::from_column_slice(eta);
    let av = &a * &v;
    let aav = &a * &av;
    let k = DMatrix::from_columns(&[v, av, aav]);
    let [e1, e2, e3] = *eta;
    let p = e1 * e2 * e3 * (e1 * e1 - e2 * e2) * (e1 * e1 - e3 * e3) * (e2 * e2 - e3 * e3);
    Ok(HyperbolicDet { direct: k.determinant(), closed_form: (lambda + 2.0 * mu - tau).powi(3) * p })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sphere::{normalize, sphere_directions};

    fn cubic822() -> MediumSpec {
        MediumSpec::cubic(3, 2.0, 2.0, 8.0).unwrap()
    }

    #[test]
    fn isotropic_frame_at_pole() {
        let m = MediumSpec::isotropic(3, 1.0, 1.0).unwrap();
        let f = eigenframe(&m.symbol_at(&[0.0, 0.0, 1.0]).unwrap()).unwrap();
        assert!((f.values[0] - 1.0).abs() < 1e-14 && (f.values[1] - 1.0).abs() < 1e-14);
        assert!((f.values[2] - 3.0).abs() < 1e-14);
        assert!((f.vector(2)[2] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn diagonal_frame_is_standard_basis() {
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![5.0, 2.0, 7.0]));
        let f = eigenframe(&a).unwrap();
        assert_eq!(f.values, vec![2.0, 5.0, 7.0]);
        assert_eq!(f.vector(0), vec![0.0, 1.0, 0.0]);
        assert_eq!(f.vector(1), vec![1.0, 0.0, 0.0]);
        assert_eq!(f.gap, 2.0);
    }

    #[test]
    fn conic_point_values_and_flag() {
        let eta = normalize(&[1.0, 1.0, 1.0]);
        let f = eigenframe(&cubic822().symbol_at(&eta).unwrap()).unwrap();
        assert!((f.values[0] - 8.0 / 3.0).abs() < 1e-13);
        assert!((f.values[1] - 8.0 / 3.0).abs() < 1e-13);
        assert!((f.values[2] - 20.0 / 3.0).abs() < 1e-13);
        let r =
            classify(&cubic822(), &CouplingConstants::new(1.0, 1.0).unwrap(), &eta, &Tolerances::default()).unwrap();
        assert!(r.is_degenerate() && r.coupling.is_none());
    }

    #[test]
    fn eigenframe_rejects_asymmetric() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 1.0]);
        assert!(eigenframe(&a).is_err());
    }

    #[test]
    fn frames_are_orthonormal_eigenpairs() {
        let m = MediumSpec::hexagonal(4.0, 10.0, 2.0, 4.0, 2.0).unwrap();
        for d in sphere_directions(3, 100) {
            let a = m.symbol_at(&d).unwrap();
            let f = eigenframe(&a).unwrap();
            let r = &a * &f.vectors - &f.vectors * DMatrix::from_diagonal(&DVector::from_vec(f.values.clone()));
            assert!(r.norm() < 1e-12);
            assert!((f.vectors.transpose() * &f.vectors - DMatrix::identity(3, 3)).norm() < 1e-12);
        }
    }

    #[test]
    fn cyclic_dims() {
        let m = cubic822();
        let th: f64 = 0.37;
        let eta = [th.cos(), th.sin(), 0.0];
        assert_eq!(cyclic_dim(&m.symbol_at(&eta).unwrap(), &eta, 1e-8), 2);
        let g = normalize(&[1.0, 2.0, 3.0]);
        assert_eq!(cyclic_dim(&m.symbol_at(&g).unwrap(), &g, 1e-8), 3);
        // η is an eigenvector of every isotropic symbol.
        let iso = MediumSpec::isotropic(3, 1.0, 1.0).unwrap();
        assert_eq!(cyclic_dim(&iso.symbol_at(&g).unwrap(), &g, 1e-8), 1);
    }

    #[test]
    fn classify_examples() {
        let c = CouplingConstants::new(1.0, 1.0).unwrap();
        let t = Tolerances::default();
        assert!(classify(&cubic822(), &c, &[1.0, 0.0, 0.0], &t).unwrap().is_degenerate());
        let r = classify(&cubic822(), &c, &normalize(&[1.0, 2.0, 3.0]), &t).unwrap();
        assert_eq!(r.kind, DirectionKind::Parabolic);
        assert_eq!(r.cyclic_dim, 3);
        let bar = MediumSpec::bar(1.3).unwrap();
        let r = classify(&bar, &c, &[1.0], &t).unwrap();
        assert_eq!(r.kind, DirectionKind::Parabolic);
        assert_eq!(r.coupling, Some(vec![1.0]));
        assert_eq!(r.eig_gap, None);
        let th: f64 = 0.37;
        let r = classify(&cubic822(), &c, &[th.cos(), th.sin(), 0.0], &t).unwrap();
        assert_eq!(r.kind, DirectionKind::Hyperbolic(vec![0]));
    }

    #[test]
    fn report_serializations() {
        let c = CouplingConstants::new(1.0, 1.0).unwrap();
        let r = classify(&cubic822(), &c, &normalize(&[1.0, 2.0, 3.0]), &Tolerances::default()).unwrap();
        let back: DirectionReport = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(back, r);
        let cols = DirectionReport::csv_header(3).split(',').count();
        assert_eq!(r.to_csv_row().split(',').count(), cols);
    }

    #[test]
    fn closed_loop_has_trivial_holonomy() {
        let c = normalize(&[1.0, 2.0, 3.0]);
        let (u, w) = crate::sphere::tangent_basis(&[c[0], c[1], c[2]]);
        let path: Vec<Vec<f64>> = (0..=200)
            .map(|k| {
                let t = 2.0 * std::f64::consts::PI * k as f64 / 200.0;
                normalize(&(0..3).map(|i| c[i] + 0.05 * (t.cos() * u[i] + t.sin() * w[i])).collect::<Vec<_>>())
            })
            .collect();
        let frames = track_frame(&cubic822(), &path, None, &Tolerances::default()).unwrap();
        let d = (&frames[0].vectors - &frames[200].vectors).norm();
        assert!(d < 1e-6, "{d}");
    }

    #[test]
    fn tracking_into_a_hyperbolic_circle() {
        let path: Vec<Vec<f64>> = (0..=100).map(|k| normalize(&[1.0, 2.0, 0.5 * (1.0 - k as f64 / 100.0)])).collect();
        let frames = track_frame(&cubic822(), &path, None, &Tolerances::default()).unwrap();
        let a: Vec<Vec<f64>> = frames.iter().zip(&path).map(|(f, e)| f.couplings(e)).collect();
        for w in a.windows(2) {
            for j in 0..3 {
                assert!((w[0][j] - w[1][j]).abs() < 0.05);
            }
        }
        let last = a.last().unwrap();
        assert_eq!(last.iter().filter(|x| x.abs() < 1e-12).count(), 1);
    }

    #[test]
    fn tracking_refuses_degenerate_points() {
        let path = vec![normalize(&[1.0, 2.0, 3.0]), normalize(&[1.0, 1.0, 1.0])];
        match track_frame(&cubic822(), &path, None, &Tolerances::default()) {
            Err(Error::DegenerateCrossing { index, .. }) => assert_eq!(index, 1),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn planar_isotropic_path_has_constant_couplings() {
        let m = MediumSpec::isotropic(2, 1.0, 1.0).unwrap();
        let path: Vec<Vec<f64>> = (0..50)
            .map(|k| {
                let t = 0.02 * k as f64;
                vec![t.cos(), t.sin()]
            })
            .collect();
        let frames = track_frame(&m, &path, None, &Tolerances::default()).unwrap();
        for (f, e) in frames.iter().zip(&path) {
            let a = f.couplings(e);
            assert!(a[0].abs() < 1e-12 && (a[1].abs() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn krylov_determinant_examples() {
        assert_eq!(cubic_hyperbolic_det(2.0, 2.0, 8.0, &[1.0, 0.0, 0.0]).unwrap().closed_form, 0.0);
        let d = cubic_hyperbolic_det(2.0, 2.0, 8.0, &[0.6, 0.8, 0.0]).unwrap();
        assert!(d.direct.abs() < 1e-12 && d.closed_form == 0.0);
        let e = normalize(&[1.0, 2.0, 3.0]);
        let d = cubic_hyperbolic_det(2.0, 2.0, 8.0, &[e[0], e[1], e[2]]).unwrap();
        assert!((d.direct - d.closed_form).abs() < 1e-10 * d.direct.abs());
        // The prefactor is (λ+2μ-τ)³ = -8 here, not +8.
        let p = e[0]
            * e[1]
            * e[2]
            * (e[0] * e[0] - e[1] * e[1])
            * (e[0] * e[0] - e[2] * e[2])
            * (e[1] * e[1] - e[2] * e[2]);
        assert!((d.direct + 8.0 * p).abs() < 1e-12);
    }
}
