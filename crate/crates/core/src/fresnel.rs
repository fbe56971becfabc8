//! Fresnel surface 𝒮 = {ξ : 1 ∈ spec A(ξ)}: sheet sampling, planar cuts,
//! singular points, contact orders of plane curves and convexity.

use nalgebra::{DMatrix, DVector, Matrix2, SymmetricEigen};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::media::MediumSpec;
use crate::spectral::eigenframe;
use crate::sphere::{cross, dot, fibonacci_sphere, normalize, sphere_directions, tangent_basis};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FresnelSample {
    /// Sheet index, 0-based; sheets are ordered by ascending ω_j, so radii decrease.
    pub sheet: usize,
    pub eta: Vec<f64>,
    pub radius: f64,
    pub point: Vec<f64>,
    /// Smallest radius difference to an adjacent sheet, None for n = 1.
    pub gap: Option<f64>,
}

impl FresnelSample {
    pub fn csv_header() -> &'static str {
        "eta1,eta2,eta3,radius,sheet"
    }

    pub fn to_csv(&self) -> String {
        let mut cols: Vec<String> = self.eta.iter().map(|e| format!("{e:e}")).collect();
        cols.push(format!("{:e}", self.radius));
        cols.push(self.sheet.to_string());
        cols.join(",")
    }
}

/// Ascending eigenvalues of A(x) for any nonzero x.
pub fn sorted_eigenvalues(medium: &MediumSpec, x: &[f64]) -> Result<Vec<f64>> {
    let mut v: Vec<f64> = SymmetricEigen::new(medium.symbol(x)?).eigenvalues.iter().copied().collect();
    v.sort_by(f64::total_cmp);
    Ok(v)
}

/// min_j |λ_j(A(p)) - 1|, zero exactly on 𝒮.
pub fn membership_residual(medium: &MediumSpec, p: &[f64]) -> Result<f64> {
    Ok(sorted_eigenvalues(medium, p)?.iter().map(|l| (l - 1.0).abs()).fold(f64::INFINITY, f64::min))
}

/// ω_j(η)⁻¹ followed by one Newton step on λ_j(A(rη)) = 1.
pub fn sheet_radius(medium: &MediumSpec, eta: &[f64], sheet: usize) -> Result<f64> {
    let k = sorted_eigenvalues(medium, eta)?;
    let kj = *k.get(sheet).ok_or_else(|| Error::invalid(format!("no sheet {sheet}")))?;
    if kj <= 0.0 {
        return Err(Error::invalid("medium is not positive at this direction"));
    }
    let r = 1.0 / kj.sqrt();
    let p: Vec<f64> = eta.iter().map(|e| e * r).collect();
    let l = sorted_eigenvalues(medium, &p)?[sheet];
    Ok(r - (l - 1.0) * r / (2.0 * l))
}

fn samples_at(medium: &MediumSpec, eta: &[f64]) -> Result<Vec<FresnelSample>> {
    let n = eta.len();
    let radii: Vec<f64> = (0..n).map(|j| sheet_radius(medium, eta, j)).collect::<Result<_>>()?;
    Ok((0..n)
        .map(|j| {
            let below = (j > 0).then(|| (radii[j - 1] - radii[j]).abs());
            let above = (j + 1 < n).then(|| (radii[j] - radii[j + 1]).abs());
            let gap = match (below, above) {
                (Some(a), Some(b)) => Some(a.min(b)),
                (a, b) => a.or(b),
            };
            FresnelSample {
                sheet: j,
                eta: eta.to_vec(),
                radius: radii[j],
                point: eta.iter().map(|e| e * radii[j]).collect(),
                gap,
            }
        })
        .collect())
}

fn require_positive(medium: &MediumSpec) -> Result<()> {
    let rep = medium.positivity_check(2000);
    if !rep.positive {
        return Err(Error::invalid(format!("medium is not positive (min eigenvalue {:e})", rep.min_eig)));
    }
    Ok(())
}

/// Samples of every sheet over a quasi-uniform direction grid, one list per sheet.
pub fn sample_surface(medium: &MediumSpec, resolution: usize) -> Result<Vec<Vec<FresnelSample>>> {
    require_positive(medium)?;
    let n = medium.dim();
    let dirs = sphere_directions(n, resolution);
    let per_dir: Vec<Vec<FresnelSample>> = dirs.par_iter().map(|d| samples_at(medium, d)).collect::<Result<_>>()?;
    let mut sheets = vec![Vec::with_capacity(dirs.len()); n];
    for row in per_dir {
        for s in row {
            sheets[s.sheet].push(s);
        }
    }
    Ok(sheets)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CutPoint {
    pub angle: f64,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Polyline {
    pub sheet: usize,
    pub points: Vec<CutPoint>,
}

/// Orthonormal basis (e1, e2) of the plane with the given normal.
pub fn plane_basis(normal: &[f64; 3]) -> Result<([f64; 3], [f64; 3])> {
    let l = dot(normal, normal).sqrt();
    if l == 0.0 || !l.is_finite() {
        return Err(Error::invalid("plane normal must be a finite nonzero vector"));
    }
    let nn = [normal[0] / l, normal[1] / l, normal[2] / l];
    // Prefer coordinate axes so that η₃ = 0 gives the (η₁, η₂) plane.
    let axes = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
    let mut e1 = [0.0; 3];
    for a in axes {
        let p = dot(&a, &nn);
        let v = [a[0] - p * nn[0], a[1] - p * nn[1], a[2] - p * nn[2]];
        if dot(&v, &v) > 0.5 {
            let v = normalize(&v);
            e1 = [v[0], v[1], v[2]];
            break;
        }
    }
    let e2 = cross(&nn, &e1);
    Ok((e1, e2))
}

/// 𝒮 ∩ plane as one polyline per sheet, points ordered by angle in [0, 2π).
/// For n = 2 the plane is ℝ² itself and `normal` must be None.
pub fn planar_cut(medium: &MediumSpec, normal: Option<&[f64; 3]>, resolution: usize) -> Result<Vec<Polyline>> {
    let n = medium.dim();
    let basis = match (n, normal) {
        (2, None) => None,
        (3, Some(nv)) => Some(plane_basis(nv)?),
        _ => return Err(Error::invalid("planar cuts need n = 2 without a normal or n = 3 with one")),
    };
    let angles: Vec<f64> = (0..resolution).map(|k| 2.0 * std::f64::consts::PI * k as f64 / resolution as f64).collect();
    let rows: Vec<Vec<f64>> = angles
        .par_iter()
        .map(|&t| {
            let (c, s) = (t.cos(), t.sin());
            let eta = match basis {
                None => vec![c, s],
                Some((e1, e2)) => (0..3).map(|i| c * e1[i] + s * e2[i]).collect(),
            };
            (0..n).map(|j| sheet_radius(medium, &eta, j)).collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    Ok((0..n)
        .map(|j| Polyline {
            sheet: j,
            points: angles
                .iter()
                .zip(&rows)
                .map(|(&t, r)| CutPoint { angle: t, x: r[j] * t.cos(), y: r[j] * t.sin() })
                .collect(),
        })
        .collect())
}

pub fn cut_csv(lines: &[Polyline]) -> String {
    let mut out = String::from("angle,x,y,sheet\n");
    for l in lines {
        for p in &l.points {
            out.push_str(&format!("{:e},{:e},{:e},{}\n", p.angle, p.x, p.y, l.sheet));
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SingularityKind {
    Conic,
    Uniplanar,
    Other,
}

impl SingularityKind {
    pub fn from_exponent(e: f64) -> Self {
        if (0.8..=1.2).contains(&e) {
            SingularityKind::Conic
        } else if (1.8..=2.2).contains(&e) {
            SingularityKind::Uniplanar
        } else {
            SingularityKind::Other
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Singularity {
    pub direction: [f64; 3],
    #[serde(rename = "type")]
    pub kind: SingularityKind,
    pub sheets: [usize; 2],
    pub split_exponent: f64,
}

/// Refined points on a one-parameter family of degenerate directions.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DegenerateCurve {
    pub sheets: [usize; 2],
    pub points: Vec<[f64; 3]>,
}

impl DegenerateCurve {
    /// Mean and spread of η₃² over the points.
    pub fn eta3_squared(&self) -> (f64, f64) {
        let v: Vec<f64> = self.points.iter().map(|p| p[2] * p[2]).collect();
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        let spread = v.iter().map(|x| (x - mean).abs()).fold(0.0, f64::max);
        (mean, spread)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SingularityReport {
    /// Every direction is degenerate (isotropic media); no point list is given then.
    pub global_degenerate: bool,
    pub points: Vec<Singularity>,
    pub curves: Vec<DegenerateCurve>,
}

impl SingularityReport {
    pub fn count(&self, kind: SingularityKind) -> usize {
        self.points.iter().filter(|s| s.kind == kind).count()
    }
}

fn frame3(medium: &MediumSpec, eta: &[f64; 3]) -> Result<crate::spectral::Eigenframe> {
    eigenframe(&medium.symbol(eta)?)
}

fn add(a: &[f64; 3], b: &[f64; 3], s: f64) -> [f64; 3] {
    [a[0] + s * b[0], a[1] + s * b[1], a[2] + s * b[2]]
}

fn unit3(v: [f64; 3]) -> [f64; 3] {
    let l = dot(&v, &v).sqrt();
    [v[0] / l, v[1] / l, v[2] / l]
}

fn quad(m: &DMatrix<f64>, u: &[f64], v: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..u.len() {
        for k in 0..v.len() {
            s += u[i] * m[(i, k)] * v[k];
        }
    }
    s
}

/// Residual F = (u₁ᵀAu₁ - u₂ᵀAu₂, 2u₁ᵀAu₂) and its tangent Jacobian at η.
/// A is quadratic in η, so (A(η+v) - A(η-v))/2 is its exact directional derivative.
fn pair_system(medium: &MediumSpec, eta: &[f64; 3], j: usize) -> Result<([f64; 2], Matrix2<f64>, f64)> {
    let f = frame3(medium, eta)?;
    let (u1, u2) = (f.vector(j), f.vector(j + 1));
    let (t1, t2) = tangent_basis(eta);
    let mut jac = Matrix2::zeros();
    for (col, t) in [t1, t2].iter().enumerate() {
        let da = (medium.symbol(&add(eta, t, 1.0))? - medium.symbol(&add(eta, t, -1.0))?) * 0.5;
        jac[(0, col)] = quad(&da, &u1, &u1) - quad(&da, &u2, &u2);
        jac[(1, col)] = 2.0 * quad(&da, &u1, &u2);
    }
    Ok(([f.values[j] - f.values[j + 1], 0.0], jac, f.values[j + 1] - f.values[j]))
}

/// Gauss-Newton on F in tangent coordinates with backtracking on the pair gap,
/// so iterates stay in the basin of the nearest degeneracy. Returns the refined
/// direction and final gap.
pub fn refine(medium: &MediumSpec, start: [f64; 3], j: usize) -> Result<([f64; 3], f64)> {
    let mut eta = start;
    let (mut fv, mut jac, mut gap) = pair_system(medium, &eta, j)?;
    for _ in 0..200 {
        let svd = jac.svd(true, true);
        let smax = svd.singular_values.max();
        if smax == 0.0 || gap == 0.0 {
            break;
        }
        let step =
            svd.solve(&nalgebra::Vector2::new(-fv[0], -fv[1]), 1e-12 * smax).map_err(|e| Error::Numerical(e.into()))?;
        let len = step.norm();
        let mut s = if len > 0.05 { 0.05 / len } else { 1.0 };
        let (t1, t2) = tangent_basis(&eta);
        let mut accepted = false;
        for _ in 0..30 {
            let next = unit3(add(&add(&eta, &t1, s * step[0]), &t2, s * step[1]));
            let (f2, j2, g2) = pair_system(medium, &next, j)?;
            if g2 < gap {
                (eta, fv, jac, gap) = (next, f2, j2, g2);
                accepted = true;
                break;
            }
            s *= 0.5;
        }
        if !accepted || s * len < 1e-16 {
            break;
        }
    }
    Ok((eta, gap))
}

fn pair_gap(medium: &MediumSpec, eta: &[f64; 3], j: usize) -> Result<f64> {
    let k = sorted_eigenvalues(medium, eta)?;
    Ok(k[j + 1] - k[j])
}

/// Median exponent p in gap ~ ε^p along eight rays leaving η.
pub fn split_exponent(medium: &MediumSpec, eta: &[f64; 3], j: usize) -> Result<f64> {
    let (t1, t2) = tangent_basis(eta);
    let (e1, e2) = (1e-3, 1e-4);
    let mut ex = Vec::with_capacity(8);
    for k in 0..8 {
        let phi = 2.0 * std::f64::consts::PI * k as f64 / 8.0 + 0.1;
        let dir = add(&[phi.cos() * t1[0], phi.cos() * t1[1], phi.cos() * t1[2]], &t2, phi.sin());
        let g1 = pair_gap(medium, &unit3(add(eta, &dir, e1)), j)?;
        let g2 = pair_gap(medium, &unit3(add(eta, &dir, e2)), j)?;
        ex.push((g1 / g2).ln() / (e1 / e2).ln());
    }
    ex.sort_by(f64::total_cmp);
    Ok(0.5 * (ex[3] + ex[4]))
}

fn nearest_neighbours(dirs: &[[f64; 3]], k: usize) -> Vec<Vec<usize>> {
    dirs.par_iter()
        .enumerate()
        .map(|(i, d)| {
            let mut best: Vec<(f64, usize)> = Vec::with_capacity(k + 1);
            for (m, e) in dirs.iter().enumerate() {
                if m == i {
                    continue;
                }
                let c = -dot(d, e);
                if best.len() < k || c < best[k - 1].0 {
                    let pos = best.partition_point(|b| b.0 <= c);
                    best.insert(pos, (c, m));
                    best.truncate(k);
                }
            }
            best.into_iter().map(|b| b.1).collect()
        })
        .collect()
}

/// Degenerate directions of a 3D medium. Candidates are sample directions
/// whose relative adjacent gap is below `tol`; each is refined by Gauss-Newton
/// and classified by the split exponent along rays.
pub fn detect_singularities(medium: &MediumSpec, resolution: usize, tol: f64) -> Result<SingularityReport> {
    if medium.dim() != 3 {
        return Err(Error::Dimension { expected: 3, got: medium.dim() });
    }
    require_positive(medium)?;
    let dirs = fibonacci_sphere(resolution);
    let eigs: Vec<Vec<f64>> = dirs.par_iter().map(|d| sorted_eigenvalues(medium, d)).collect::<Result<_>>()?;
    let scale = eigs.iter().flat_map(|k| k.iter()).fold(0.0f64, |m, v| m.max(v.abs()));
    let flat = eigs.iter().filter(|k| (k[1] - k[0]).min(k[2] - k[1]) <= 1e-8 * scale).count();
    if 2 * flat >= dirs.len() {
        return Ok(SingularityReport { global_degenerate: true, points: vec![], curves: vec![] });
    }
    // Candidates: every adjacent pair below the threshold, plus local minima of
    // each pair gap over the nearest sample neighbours. Steep cones can hide
    // between samples of a fixed threshold.
    let neighbours = nearest_neighbours(&dirs, 6);
    let mut candidates: Vec<([f64; 3], usize)> = Vec::new();
    for i in 0..dirs.len() {
        for j in 0..2 {
            let g = eigs[i][j + 1] - eigs[i][j];
            if g < tol * scale || neighbours[i].iter().all(|&m| g <= eigs[m][j + 1] - eigs[m][j]) {
                candidates.push((dirs[i], j));
            }
        }
    }
    let refined: Vec<([f64; 3], usize, f64)> =
        candidates.par_iter().map(|&(d, j)| refine(medium, d, j).map(|(e, g)| (e, j, g))).collect::<Result<_>>()?;

    let mut isolated: Vec<Singularity> = Vec::new();
    let mut curve_pts: Vec<([f64; 3], usize)> = Vec::new();
    let close = |a: &[f64; 3], b: &[f64; 3], r: f64| {
        let d = [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
        dot(&d, &d).sqrt() < r
    };
    for (eta, j, gap) in refined {
        if gap > 1e-8 * scale {
            continue;
        }
        if isolated.iter().any(|s| close(&s.direction, &eta, 1e-4))
            || curve_pts.iter().any(|(p, _)| close(p, &eta, 1e-4))
        {
            continue;
        }
        let (_, jac, _) = pair_system(medium, &eta, j)?;
        let sv = jac.svd(false, false).singular_values;
        let (s1, s2) = (sv.max(), sv.min());
        if s1 > 1e-6 * scale && s2 <= 1e-6 * s1 {
            curve_pts.push((eta, j));
            continue;
        }
        let e = split_exponent(medium, &eta, j)?;
        isolated.push(Singularity {
            direction: eta,
            kind: SingularityKind::from_exponent(e),
            sheets: [j, j + 1],
            split_exponent: e,
        });
    }
    isolated.sort_by(|a, b| {
        a.direction
            .iter()
            .zip(&b.direction)
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });

    // Link curve points closer than a few sample spacings into components.
    let link = 4.0 * (4.0 * std::f64::consts::PI / resolution as f64).sqrt();
    let mut comp: Vec<usize> = (0..curve_pts.len()).collect();
    for a in 0..curve_pts.len() {
        for b in (a + 1)..curve_pts.len() {
            if curve_pts[a].1 == curve_pts[b].1 && close(&curve_pts[a].0, &curve_pts[b].0, link) {
                let (ca, cb) = (comp[a], comp[b]);
                for c in comp.iter_mut() {
                    if *c == cb {
                        *c = ca;
                    }
                }
            }
        }
    }
    let mut curves: Vec<DegenerateCurve> = Vec::new();
    let mut labels: Vec<usize> = Vec::new();
    for (k, (p, j)) in curve_pts.iter().enumerate() {
        match labels.iter().position(|&l| l == comp[k]) {
            Some(i) => curves[i].points.push(*p),
            None => {
                labels.push(comp[k]);
                curves.push(DegenerateCurve { sheets: [*j, j + 1], points: vec![*p] });
            }
        }
    }
    Ok(SingularityReport { global_degenerate: false, points: isolated, curves })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ContactOrder {
    Exact {
        order: u32,
    },
    /// The fits did not settle; the order lies in [min, max].
    Interval {
        min: u32,
        max: u32,
    },
}

impl ContactOrder {
    pub fn value(&self) -> Option<u32> {
        match self {
            ContactOrder::Exact { order } => Some(*order),
            ContactOrder::Interval { .. } => None,
        }
    }

    pub fn upper(&self) -> u32 {
        match self {
            ContactOrder::Exact { order } => *order,
            ContactOrder::Interval { max, .. } => *max,
        }
    }
}

/// Contact orders are at most 2n for an algebraic surface of degree 2n; for the
/// curves treated here (n = 3) that is 6.
pub const MAX_CONTACT_ORDER: u32 = 6;
const FIT_DEGREE: usize = 8;
const FIT_NODES: usize = 41;
const ARCS: [f64; 3] = [1e-2, 1e-3, 1e-4];

/// Normal-direction Taylor coefficients (in units of the arc x = t/h) of a curve near t0.
fn normal_coefficients(curve: &dyn Fn(f64) -> [f64; 2], t0: f64, h: f64) -> (Vec<f64>, f64) {
    let xs: Vec<f64> = (0..FIT_NODES).map(|k| -1.0 + 2.0 * k as f64 / (FIT_NODES - 1) as f64).collect();
    let p0 = curve(t0);
    let v = DMatrix::from_fn(FIT_NODES, FIT_DEGREE + 1, |r, c| xs[r].powi(c as i32));
    let svd = v.svd(true, true);
    let fit = |comp: usize| -> DVector<f64> {
        let rhs = DVector::from_iterator(FIT_NODES, xs.iter().map(|&x| curve(t0 + h * x)[comp] - p0[comp]));
        svd.solve(&rhs, 1e-14).expect("svd was computed with both factors")
    };
    let (cx, cy) = (fit(0), fit(1));
    let tl = (cx[1] * cx[1] + cy[1] * cy[1]).sqrt();
    let (nx, ny) = (-cy[1] / tl, cx[1] / tl);
    let coeffs = (0..=FIT_DEGREE).map(|k| cx[k] * nx + cy[k] * ny).collect();
    let size = [p0, curve(t0 - h), curve(t0 + h)].iter().fold(0.0f64, |m, q| m.max(q[0].abs()).max(q[1].abs()));
    (coeffs, size)
}

fn order_at_scale(coeffs: &[f64], size: f64) -> Option<u32> {
    let noise = 50.0 * f64::EPSILON * size.max(f64::MIN_POSITIVE);
    let top = coeffs[2..].iter().fold(0.0f64, |m, c| m.max(c.abs()));
    if top <= 10.0 * noise {
        return None;
    }
    (2..coeffs.len()).find(|&k| coeffs[k].abs() > (1e-3 * top).max(10.0 * noise)).map(|k| k as u32)
}

/// Order of tangency between a smooth plane curve and its tangent line at t0:
/// the smallest k ≥ 2 with a nonvanishing k-th normal coefficient.
pub fn contact_order(curve: &dyn Fn(f64) -> [f64; 2], t0: f64) -> ContactOrder {
    let orders: Vec<Option<u32>> = ARCS
        .iter()
        .map(|&h| {
            let (c, size) = normal_coefficients(curve, t0, h);
            order_at_scale(&c, size).map(|k| k.min(MAX_CONTACT_ORDER))
        })
        .collect();
    for w in orders.windows(2) {
        if let (Some(a), Some(b)) = (w[0], w[1]) {
            if a == b {
                return ContactOrder::Exact { order: a };
            }
        }
    }
    let min = orders.iter().flatten().copied().min().unwrap_or(2);
    if min == MAX_CONTACT_ORDER {
        return ContactOrder::Exact { order: min };
    }
    ContactOrder::Interval { min, max: MAX_CONTACT_ORDER }
}

/// Richardson-extrapolated curvature numerator, fourth order in h. Used to
/// place flat points: with the plain stencil the location error (order h²)
/// leaves a second-order normal coefficient that hides a third-order contact.
fn curvature_refined(curve: &dyn Fn(f64) -> [f64; 2], t: f64, h: f64) -> f64 {
    (4.0 * curvature_numerator(curve, t, 0.5 * h) - curvature_numerator(curve, t, h)) / 3.0
}

/// Signed curvature numerator x'y'' - y'x'' by central differences.
pub fn curvature_numerator(curve: &dyn Fn(f64) -> [f64; 2], t: f64, h: f64) -> f64 {
    let (a, b, c) = (curve(t - h), curve(t), curve(t + h));
    let d1 = [(c[0] - a[0]) / (2.0 * h), (c[1] - a[1]) / (2.0 * h)];
    let d2 = [(c[0] - 2.0 * b[0] + a[0]) / (h * h), (c[1] - 2.0 * b[1] + a[1]) / (h * h)];
    d1[0] * d2[1] - d1[1] * d2[0]
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContactPoint {
    pub t: f64,
    pub order: ContactOrder,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SugimotoReport {
    /// Maximal contact order over the curve (upper end for intervals).
    pub index: u32,
    /// True when some order came back as an interval.
    pub uncertain: bool,
    /// Flat points (inflections and curvature minima near zero) with their orders.
    pub flat_points: Vec<ContactPoint>,
    pub min_abs_curvature: f64,
}

/// Sugimoto index of a closed or open parametrized curve on [t0, t1]: the
/// maximal contact order with tangent lines. Orders above 2 can only occur where
/// the curvature vanishes, so the search is restricted to sign changes and
/// near-zero local minima of the curvature.
pub fn sugimoto_index(curve: &dyn Fn(f64) -> [f64; 2], range: (f64, f64), samples: usize) -> SugimotoReport {
    let (t0, t1) = range;
    let h = 1e-4 * (t1 - t0).abs().max(1e-300);
    let ts: Vec<f64> = (0..=samples).map(|k| t0 + (t1 - t0) * k as f64 / samples as f64).collect();
    let kv: Vec<f64> = ts.iter().map(|&t| curvature_numerator(curve, t, h)).collect();
    let kmax = kv.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut flats: Vec<f64> = Vec::new();
    for i in 0..samples {
        if kv[i] == 0.0 || kv[i].signum() != kv[i + 1].signum() {
            let (mut a, mut b) = (ts[i], ts[i + 1]);
            let sa = kv[i].signum();
            for _ in 0..100 {
                let m = 0.5 * (a + b);
                if curvature_refined(curve, m, h).signum() == sa {
                    a = m;
                } else {
                    b = m;
                }
            }
            flats.push(0.5 * (a + b));
        }
    }
    for i in 1..samples {
        let (l, c, r) = (kv[i - 1].abs(), kv[i].abs(), kv[i + 1].abs());
        if c < l && c <= r && c < 1e-2 * kmax && kv[i - 1].signum() == kv[i + 1].signum() {
            // Golden-section search for the minimum of |curvature|.
            let g = 0.5 * (5f64.sqrt() - 1.0);
            let (mut a, mut b) = (ts[i - 1], ts[i + 1]);
            for _ in 0..100 {
                let x1 = b - g * (b - a);
                let x2 = a + g * (b - a);
                if curvature_refined(curve, x1, h).abs() < curvature_refined(curve, x2, h).abs() {
                    b = x2;
                } else {
                    a = x1;
                }
            }
            flats.push(0.5 * (a + b));
        }
    }
    let min_abs = kv.iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
    let mut index = 2;
    let mut uncertain = false;
    let mut flat_points = Vec::new();
    for t in flats {
        let order = contact_order(curve, t);
        uncertain |= matches!(order, ContactOrder::Interval { .. });
        index = index.max(order.upper());
        flat_points.push(ContactPoint { t, order });
    }
    flat_points.sort_by(|a, b| a.t.total_cmp(&b.t));
    SugimotoReport { index, uncertain, flat_points, min_abs_curvature: min_abs }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Convexity {
    pub convex: bool,
    pub min_curvature: f64,
    pub max_curvature: f64,
}

/// Principal curvatures of the star-shaped surface {r(η)η} at η, from a local
/// quadric fit z = d·x + e·y + (a x² + 2b xy + c y²)/2 in a frame adapted to
/// the fitted normal. Positive values bend towards the origin.
pub fn principal_curvatures(radius: &(dyn Fn(&[f64; 3]) -> f64 + Sync), eta: &[f64; 3], h: f64) -> [f64; 2] {
    let eta = &unit3(*eta);
    let (u, w) = tangent_basis(eta);
    let p = {
        let r = radius(eta);
        [r * eta[0], r * eta[1], r * eta[2]]
    };
    let mut pts = Vec::new();
    for (a, b) in
        [(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1), (-2, 0), (2, 0), (0, -2), (0, 2)]
    {
        let d = unit3(add(&add(eta, &u, h * a as f64), &w, h * b as f64));
        let r = radius(&d);
        pts.push([r * d[0] - p[0], r * d[1] - p[1], r * d[2] - p[2]]);
    }
    let mut normal = *eta;
    let mut coef = DVector::zeros(5);
    for _ in 0..3 {
        let (t1, t2) = tangent_basis(&normal);
        let m = DMatrix::from_fn(pts.len(), 5, |i, c| {
            let (x, y) = (dot(&pts[i], &t1), dot(&pts[i], &t2));
            [x, y, 0.5 * x * x, x * y, 0.5 * y * y][c]
        });
        let rhs = DVector::from_iterator(pts.len(), pts.iter().map(|q| dot(q, &normal)));
        coef = m.svd(true, true).solve(&rhs, 1e-14).expect("svd was computed with both factors");
        normal = unit3(add(&add(&normal, &t1, -coef[0]), &t2, -coef[1]));
    }
    if dot(&normal, &p) < 0.0 {
        coef *= -1.0;
    }
    let e = SymmetricEigen::new(Matrix2::new(coef[2], coef[3], coef[3], coef[4])).eigenvalues;
    let (k1, k2) = (-e[0], -e[1]);
    [k1.min(k2), k1.max(k2)]
}

/// Convexity over a set of directions; strict convexity means every principal curvature is positive.
pub fn convexity_of(radius: &(dyn Fn(&[f64; 3]) -> f64 + Sync), dirs: &[[f64; 3]], h: f64) -> Convexity {
    let ks: Vec<[f64; 2]> = dirs.par_iter().map(|d| principal_curvatures(radius, d, h)).collect();
    let min = ks.iter().map(|k| k[0]).fold(f64::INFINITY, f64::min);
    let max = ks.iter().map(|k| k[1]).fold(f64::NEG_INFINITY, f64::max);
    Convexity { convex: min > 0.0, min_curvature: min, max_curvature: max }
}

/// Convexity of one sorted sheet at the given samples. Fails when a sample
/// sits on or near a singular point, where the sheet is not smooth.
pub fn convexity_check(medium: &MediumSpec, samples: &[FresnelSample], tol: f64) -> Result<Convexity> {
    if medium.dim() != 3 {
        return Err(Error::Dimension { expected: 3, got: medium.dim() });
    }
    let Some(first) = samples.first() else {
        return Err(Error::Insufficient("no samples".into()));
    };
    let sheet = first.sheet;
    let rmax = samples.iter().map(|s| s.radius).fold(0.0, f64::max);
    if let Some(s) = samples.iter().find(|s| s.sheet != sheet || s.gap.is_some_and(|g| g <= tol * rmax)) {
        return Err(Error::invalid(format!("sample at {:?} is singular or belongs to another sheet", s.eta)));
    }
    let radius = |d: &[f64; 3]| sheet_radius(medium, d, sheet).unwrap_or(f64::NAN);
    let dirs: Vec<[f64; 3]> = samples.iter().map(|s| [s.eta[0], s.eta[1], s.eta[2]]).collect();
    Ok(convexity_of(&radius, &dirs, 1e-3))
}

/// Rayleigh quotient κ(η) = nᵀA(η)n for a plane through the origin whose unit
/// normal n is an eigenvector of A(η) at every η of the plane.
fn normal_eigenvalue(medium: &MediumSpec, n: &[f64; 3], eta: &[f64; 3]) -> Result<(f64, f64)> {
    let a = medium.symbol(eta)?;
    let v = DVector::from_column_slice(n);
    let av = &a * &v;
    let k = v.dot(&av);
    Ok((k, (&av - &v * k).norm()))
}

/// The section of the sheet belonging to the plane normal: the curve
/// φ ↦ κ(φ)^{-1/2}(cos φ, sin φ) in the basis of `plane_basis`. Fails when the
/// normal is not an eigenvector along the plane.
pub fn hyperbolic_section(medium: &MediumSpec, normal: &[f64; 3]) -> Result<impl Fn(f64) -> [f64; 2] + Clone> {
    if medium.dim() != 3 {
        return Err(Error::Dimension { expected: 3, got: medium.dim() });
    }
    let n = unit3(*normal);
    let (e1, e2) = plane_basis(&n)?;
    let scale = medium.symbol(&n)?.norm().max(f64::MIN_POSITIVE);
    for k in 0..64 {
        let t = 2.0 * std::f64::consts::PI * k as f64 / 64.0;
        let eta = [0, 1, 2].map(|i| t.cos() * e1[i] + t.sin() * e2[i]);
        let (kap, res) = normal_eigenvalue(medium, &n, &eta)?;
        if res > 1e-10 * scale {
            return Err(Error::invalid(format!(
                "plane normal is not an eigenvector of A at angle {t:.3} (residual {res:e})"
            )));
        }
        if kap <= 0.0 {
            return Err(Error::invalid("section eigenvalue is not positive"));
        }
    }
    let m = medium.clone();
    Ok(move |t: f64| {
        let eta = [0, 1, 2].map(|i| t.cos() * e1[i] + t.sin() * e2[i]);
        let (kap, _) = normal_eigenvalue(&m, &n, &eta).expect("validated medium");
        let r = kap.sqrt().recip();
        [r * t.cos(), r * t.sin()]
    })
}

/// Normals of the nine planes of hyperbolic directions of a cubic medium.
pub fn cubic_hyperbolic_planes() -> [[f64; 3]; 9] {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    [
        [1.0, 0.0, 0.0],
        [0.0, 1.0, 0.0],
        [0.0, 0.0, 1.0],
        [h, -h, 0.0],
        [h, h, 0.0],
        [h, 0.0, -h],
        [h, 0.0, h],
        [0.0, h, -h],
        [0.0, h, h],
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SectionOrder {
    pub normal: [f64; 3],
    pub report: SugimotoReport,
}

/// Sugimoto indices of the hyperbolic sections of a cubic medium.
pub fn cubic_section_orders(medium: &MediumSpec, samples: usize) -> Result<Vec<SectionOrder>> {
    cubic_hyperbolic_planes()
        .iter()
        .map(|n| {
            let c = hyperbolic_section(medium, n)?;
            Ok(SectionOrder { normal: *n, report: sugimoto_index(&c, (0.0, 2.0 * std::f64::consts::PI), samples) })
        })
        .collect()
}

/// Quadratic form of the pair sheets at a cubic uniplanar point, in the
/// tangent plane: Q±(φ) = 2μ + C ± √(C² cos²2φ + D² sin²2φ), where the block
/// eigenvalues are μ + (C ± R)/2·ε². The indicatrix is Q±(φ)|x|² = 1.
pub fn uniplanar_form(mu: f64, c: f64, d: f64, upper: bool, phi: f64) -> f64 {
    let r = (c * c * (2.0 * phi).cos().powi(2) + d * d * (2.0 * phi).sin().powi(2)).sqrt();
    2.0 * mu + c + if upper { r } else { -r }
}

/// The same form with μ in place of 2μ, as sometimes printed.
pub fn uniplanar_form_printed(mu: f64, c: f64, d: f64, upper: bool, phi: f64) -> f64 {
    uniplanar_form(mu, c, d, upper, phi) - mu
}

/// Polar curve φ ↦ Q(φ)^{-1/2}(cos φ, sin φ); fails when Q is not positive,
/// where the indicatrix is not a closed curve.
pub fn indicatrix(form: impl Fn(f64) -> f64 + Clone) -> Result<impl Fn(f64) -> [f64; 2] + Clone> {
    for k in 0..720 {
        let t = 2.0 * std::f64::consts::PI * k as f64 / 720.0;
        if !(form(t) > 0.0) {
            return Err(Error::invalid(format!("indicatrix form is not positive at angle {t:.3}")));
        }
    }
    Ok(move |t: f64| {
        let r = form(t).sqrt().recip();
        [r * t.cos(), r * t.sin()]
    })
}

/// Sheet radius of the genuine hyperbolic mode of a hexagonal medium, with
/// eigenvector (η₂, -η₁, 0)/|η'| (any horizontal vector at the poles).
pub fn hexagonal_hyperbolic_radius(medium: &MediumSpec, eta: &[f64; 3]) -> Result<f64> {
    if !matches!(medium, MediumSpec::Hexagonal { .. }) {
        return Err(Error::invalid("genuine hyperbolic sheet needs a hexagonal medium"));
    }
    let h = (eta[0] * eta[0] + eta[1] * eta[1]).sqrt();
    let n = if h > 1e-300 { [eta[1] / h, -eta[0] / h, 0.0] } else { [1.0, 0.0, 0.0] };
    let (k, res) = normal_eigenvalue(medium, &n, &unit3(*eta))?;
    if res > 1e-10 * k.abs().max(1.0) {
        return Err(Error::Numerical(format!("rotational vector is not an eigenvector (residual {res:e})")));
    }
    Ok(k.sqrt().recip())
}

/// Convexity of the genuine hyperbolic sheet over `count` quasi-uniform directions.
pub fn hexagonal_hyperbolic_convexity(medium: &MediumSpec, count: usize) -> Result<Convexity> {
    let dirs = fibonacci_sphere(count);
    for d in &dirs {
        hexagonal_hyperbolic_radius(medium, d)?;
    }
    let radius = |d: &[f64; 3]| hexagonal_hyperbolic_radius(medium, d).unwrap_or(f64::NAN);
    Ok(convexity_of(&radius, &dirs, 1e-3))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cubic(tau: f64, lambda: f64, mu: f64) -> MediumSpec {
        MediumSpec::cubic(3, lambda, mu, tau).unwrap()
    }

    #[test]
    fn isotropic_sheets_are_spheres() {
        let m = MediumSpec::isotropic(3, 1.0, 1.0).unwrap();
        let sheets = sample_surface(&m, 200).unwrap();
        for s in &sheets[0] {
            assert!((s.radius - 1.0).abs() < 1e-12);
        }
        for s in &sheets[2] {
            assert!((s.radius - 1.0 / 3f64.sqrt()).abs() < 1e-12);
        }
    }

    #[test]
    fn samples_lie_on_the_surface_and_radii_decrease() {
        let m = cubic(4.0, 1.0, 1.0);
        let sheets = sample_surface(&m, 300).unwrap();
        for k in 0..sheets[0].len() {
            for j in 0..3 {
                let s = &sheets[j][k];
                assert!(membership_residual(&m, &s.point).unwrap() <= 1e-10);
                if j > 0 {
                    assert!(sheets[j - 1][k].radius >= s.radius);
                }
            }
        }
    }

    #[test]
    fn non_positive_medium_is_rejected() {
        let m = cubic(4.0, 5.0, 1.0);
        assert!(sample_surface(&m, 50).is_err());
    }

    #[test]
    fn hexagonal_sheets_are_rotation_invariant() {
        let m = MediumSpec::hexagonal(4.0, 10.0, 2.0, 4.0, 2.0).unwrap();
        for psi in [0.3f64, 0.9, 1.4] {
            let r0: Vec<f64> = (0..3).map(|j| sheet_radius(&m, &[psi.sin(), 0.0, psi.cos()], j).unwrap()).collect();
            for phi in [0.4f64, 2.0, 5.1] {
                let eta = [psi.sin() * phi.cos(), psi.sin() * phi.sin(), psi.cos()];
                for j in 0..3 {
                    assert!((sheet_radius(&m, &eta, j).unwrap() - r0[j]).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn cubic_cut_contains_shear_circle() {
        let m = cubic(8.0, 2.0, 2.0);
        let lines = planar_cut(&m, Some(&[0.0, 0.0, 1.0]), 90).unwrap();
        // In the plane η₃ = 0 the vector e₃ is an eigenvector with eigenvalue μ.
        let on_circle = lines
            .iter()
            .any(|l| l.points.iter().all(|p| ((p.x * p.x + p.y * p.y).sqrt() - 0.5f64.sqrt()).abs() < 1e-12));
        // The sorted sheets exchange the circle with another branch, so check pointwise instead.
        let pointwise = (0..90).all(|k| {
            lines.iter().any(|l| {
                let p = l.points[k];
                ((p.x * p.x + p.y * p.y).sqrt() - 0.5f64.sqrt()).abs() < 1e-12
            })
        });
        assert!(on_circle || pointwise);
        assert!(cut_csv(&lines).starts_with("angle,x,y,sheet\n"));
    }

    #[test]
    fn cubic_census() {
        let m = cubic(8.0, 2.0, 2.0);
        let rep = detect_singularities(&m, 3000, 0.05).unwrap();
        assert!(!rep.global_degenerate);
        assert_eq!(rep.count(SingularityKind::Conic), 8, "{rep:?}");
        assert_eq!(rep.count(SingularityKind::Uniplanar), 6, "{rep:?}");
        assert_eq!(rep.points.len(), 14);
        assert!(rep.curves.is_empty());
        for s in &rep.points {
            let d = s.direction;
            match s.kind {
                SingularityKind::Conic => assert!(d.iter().all(|x| (x.abs() - 1.0 / 3f64.sqrt()).abs() < 1e-9)),
                _ => assert!((d.iter().fold(0.0f64, |m, x| m.max(x.abs())) - 1.0).abs() < 1e-8),
            }
        }
    }

    #[test]
    fn isotropic_is_globally_degenerate() {
        let rep = detect_singularities(&MediumSpec::isotropic(3, 1.0, 1.0).unwrap(), 500, 0.05).unwrap();
        assert!(rep.global_degenerate && rep.points.is_empty());
    }

    #[test]
    fn hexagonal_poles_and_circles() {
        let m = MediumSpec::hexagonal(4.0, 10.0, 2.0, 4.0, 2.0).unwrap();
        let rep = detect_singularities(&m, 3000, 0.05).unwrap();
        assert_eq!(rep.points.len(), 2, "{rep:?}");
        for s in &rep.points {
            assert_eq!(s.kind, SingularityKind::Uniplanar);
            assert!((s.direction[2].abs() - 1.0).abs() < 1e-8);
        }
        assert_eq!(rep.curves.len(), 2);
        for c in &rep.curves {
            let (mean, spread) = c.eta3_squared();
            assert!((mean - 0.2).abs() < 1e-8 && spread < 1e-8, "{mean} {spread}");
        }
    }

    #[test]
    fn circle_contact_order_is_two() {
        for r in [0.1, 1.0, 7.0] {
            let c = move |t: f64| [r * t.cos(), r * t.sin()];
            for t0 in [0.0, 1.0, 4.0] {
                assert_eq!(contact_order(&c, t0), ContactOrder::Exact { order: 2 });
            }
        }
    }

    #[test]
    fn polynomial_graphs_have_their_orders() {
        for k in 2..=6 {
            let c = move |t: f64| [t, 0.3 * t.powi(k) + 0.1 * t.powi(k + 1)];
            assert_eq!(contact_order(&c, 0.0).value(), Some(k as u32), "k = {k}");
        }
        let flat = |t: f64| [t, t.powi(9)];
        assert!(matches!(contact_order(&flat, 0.0), ContactOrder::Interval { .. }));
    }

    #[test]
    fn cubic_hyperbolic_section_is_curved() {
        let (tau, lambda, mu) = (8.0, 2.0, 2.0);
        let c = move |p: f64| {
            let k: f64 = mu + (tau - lambda - 2.0 * mu) / 2.0 * p.sin().powi(2);
            [p.cos() / k.sqrt(), p.sin() / k.sqrt()]
        };
        let rep = sugimoto_index(&c, (0.0, 2.0 * std::f64::consts::PI), 400);
        assert_eq!(rep.index, 2);
        assert!(rep.flat_points.is_empty());
        for p in [0.0, 0.7, 1.5] {
            assert_eq!(contact_order(&c, p).value(), Some(2));
        }
    }

    #[test]
    fn inflection_points_have_order_three() {
        // A limaçon-like curve with inflections.
        let c = |t: f64| {
            let r = 1.0 + 0.6 * (2.0 * t).cos();
            [r * t.cos(), r * t.sin()]
        };
        let rep = sugimoto_index(&c, (0.0, 2.0 * std::f64::consts::PI), 400);
        assert!(!rep.flat_points.is_empty());
        assert_eq!(rep.index, 3, "{rep:?}");
    }

    #[test]
    fn sphere_curvature() {
        let r = 2.5;
        let ks = principal_curvatures(&|_: &[f64; 3]| r, &[0.3, -0.4, 0.866], 1e-3);
        for k in ks {
            assert!((k - 1.0 / r).abs() < 1e-6, "{ks:?}");
        }
    }

    #[test]
    fn singular_samples_are_rejected() {
        let m = cubic(8.0, 2.0, 2.0);
        let sheets = sample_surface(&m, 500).unwrap();
        assert!(convexity_check(&m, &sheets[0], 1e-3).is_err());
    }

    #[test]
    fn cubic_sections_have_order_two() {
        let m = cubic(8.0, 2.0, 2.0);
        let orders = cubic_section_orders(&m, 400).unwrap();
        assert_eq!(orders.len(), 9);
        for o in &orders {
            assert_eq!(o.report.index, 2, "{o:?}");
            assert!(!o.report.uncertain);
        }
        // Matches the explicit section on η₁ = η₂.
        let c =
            hyperbolic_section(&m, &[std::f64::consts::FRAC_1_SQRT_2, -std::f64::consts::FRAC_1_SQRT_2, 0.0]).unwrap();
        for t in [0.2f64, 1.0, 2.5] {
            let p = c(t);
            let r = (p[0] * p[0] + p[1] * p[1]).sqrt();
            let (e1, e2) =
                plane_basis(&[std::f64::consts::FRAC_1_SQRT_2, -std::f64::consts::FRAC_1_SQRT_2, 0.0]).unwrap();
            let eta = [0, 1, 2].map(|i| t.cos() * e1[i] + t.sin() * e2[i]);
            let k = 2.0 + (8.0 - 2.0 - 4.0) * eta[0] * eta[0];
            assert!((r - k.sqrt().recip()).abs() < 1e-12);
        }
        assert!(hyperbolic_section(&m, &[1.0, 2.0, 3.0]).is_err());
    }

    #[test]
    fn uniplanar_form_matches_sheet_heights() {
        // Height of the pair sheets above the tangent plane at the axis (1,0,0).
        let (tau, lambda, mu) = (8.0, 2.0, 2.0);
        let m = cubic(tau, lambda, mu);
        let (lm, tm) = (lambda + mu, tau - mu);
        let (c, d) = ((tm * tm - lm * lm) / tm, lm * (tau - lambda - 2.0 * mu) / tm);
        let z0 = mu.sqrt().recip();
        let x = 1e-3;
        for phi in [0.1f64, 0.5, 0.9, 1.3] {
            let mut ratios = Vec::new();
            for (sheet, upper) in [(0usize, false), (1, true)] {
                // Solve κ_sheet(p) = 1 for the height z of p = (z, x cos φ, x sin φ).
                let f = |z: f64| sorted_eigenvalues(&m, &[z, x * phi.cos(), x * phi.sin()]).unwrap()[sheet] - 1.0;
                let (mut a, mut b) = (0.5 * z0, 1.5 * z0);
                for _ in 0..200 {
                    let mid = 0.5 * (a + b);
                    if f(a).signum() == f(mid).signum() {
                        a = mid;
                    } else {
                        b = mid;
                    }
                }
                let k = -2.0 * (0.5 * (a + b) - z0) / (x * x);
                ratios.push(k / uniplanar_form(mu, c, d, upper, phi));
            }
            for r in &ratios {
                assert!((r - 0.5 * z0).abs() < 1e-4, "{ratios:?}");
            }
        }
    }

    #[test]
    fn indicatrix_orders_in_range() {
        let (tau, lambda, mu) = (8.0, 2.0, 2.0);
        let (lm, tm) = (lambda + mu, tau - mu);
        let (c, d) = ((tm * tm - lm * lm) / tm, lm * (tau - lambda - 2.0 * mu) / tm);
        for upper in [false, true] {
            let curve = indicatrix(move |p| uniplanar_form(mu, c, d, upper, p)).unwrap();
            let rep = sugimoto_index(&curve, (0.0, 2.0 * std::f64::consts::PI), 720);
            assert!((2..=4).contains(&rep.index), "{rep:?}");
        }
        assert!(indicatrix(|_| -1.0).is_err());
    }

    #[test]
    fn hexagonal_hyperbolic_sheet_is_convex() {
        let m = MediumSpec::hexagonal(4.0, 10.0, 2.0, 4.0, 2.0).unwrap();
        for eta in [[0.6, 0.0, 0.8], [0.0, 0.0, 1.0], [0.3, -0.4, 0.866]] {
            let e = unit3(eta);
            let k = (4.0 - 2.0) / 2.0 * (e[0] * e[0] + e[1] * e[1]) + 2.0 * e[2] * e[2];
            assert!((hexagonal_hyperbolic_radius(&m, &e).unwrap() - k.sqrt().recip()).abs() < 1e-12);
        }
        let cv = hexagonal_hyperbolic_convexity(&m, 400).unwrap();
        assert!(cv.convex && cv.min_curvature > 0.0, "{cv:?}");
        assert!(hexagonal_hyperbolic_radius(&cubic(8.0, 2.0, 2.0), &[0.0, 0.0, 1.0]).is_err());
    }
}
