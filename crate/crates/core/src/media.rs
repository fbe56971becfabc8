//! Elastic media, their symbols A(ξ) and the thermal coupling constants.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sphere::{self, norm};

/// An elastic medium. Parameters are elastic moduli in dimensionless units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "MediumDocument", try_from = "MediumDocument")]
pub enum MediumSpec {
    /// A(η) = μI + (λ+μ) η⊗η.
    Isotropic { dim: usize, lambda: f64, mu: f64 },
    /// Diagonal (τ-μ)η_i² + μ, off-diagonal (λ+μ)η_iη_j.
    Cubic { dim: usize, lambda: f64, mu: f64, tau: f64 },
    /// Cubic with one τ_i per axis; dimension is `tau.len()`.
    Rhombic { lambda: f64, mu: f64, tau: Vec<f64> },
    /// Three-dimensional, rotationally symmetric about the x3 axis.
    Hexagonal { tau1: f64, tau2: f64, lambda1: f64, lambda2: f64, mu: f64 },
    /// Fully symmetric stiffness tensor C_ijkl, stored row-major with n^4 entries.
    Generic { dim: usize, tensor: Vec<f64> },
}

/// Thermal coupling γ and conductivity κ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CouplingConstants {
    pub gamma: f64,
    pub kappa: f64,
}

impl CouplingConstants {
    pub fn new(gamma: f64, kappa: f64) -> Result<Self> {
        if !gamma.is_finite() || !kappa.is_finite() {
            return Err(Error::invalid("coupling constants must be finite"));
        }
        if kappa <= 0.0 {
            return Err(Error::invalid(format!("kappa must be positive, got {kappa}")));
        }
        if gamma == 0.0 {
            return Err(Error::invalid("gamma must be nonzero; use CouplingConstants::uncoupled"));
        }
        Ok(Self { gamma, kappa })
    }

    /// γ = 0: elastic waves and heat evolve independently.
    pub fn uncoupled(kappa: f64) -> Result<Self> {
        if !(kappa.is_finite() && kappa > 0.0) {
            return Err(Error::invalid(format!("kappa must be positive, got {kappa}")));
        }
        Ok(Self { gamma: 0.0, kappa })
    }

    pub fn is_coupled(&self) -> bool {
        self.gamma != 0.0
    }
}

/// Result of sampling the minimum eigenvalue of A(η) over the sphere.
#[derive(Debug, Clone, Serialize)]
pub struct PositivityReport {
    pub positive: bool,
    pub min_eig: f64,
    pub witness: Vec<f64>,
    pub samples: usize,
}

/// Flat document used for serialization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MediumDocument {
    pub variant: String,
    pub dim: usize,
    pub params: BTreeMap<String, f64>,
}

fn check_finite(vals: &[f64]) -> Result<()> {
    if vals.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::invalid("medium parameters must be finite"))
    }
}

fn voigt(i: usize, j: usize) -> usize {
    match (i.min(j), i.max(j)) {
        (0, 0) => 0,
        (1, 1) => 1,
        (2, 2) => 2,
        (1, 2) => 3,
        (0, 2) => 4,
        (0, 1) => 5,
        _ => unreachable!(),
    }
}

impl MediumSpec {
    pub fn isotropic(dim: usize, lambda: f64, mu: f64) -> Result<Self> {
        check_finite(&[lambda, mu])?;
        check_dim(dim)?;
        Ok(Self::Isotropic { dim, lambda, mu })
    }

    pub fn cubic(dim: usize, lambda: f64, mu: f64, tau: f64) -> Result<Self> {
        check_finite(&[lambda, mu, tau])?;
        check_dim(dim)?;
        Ok(Self::Cubic { dim, lambda, mu, tau })
    }

    pub fn rhombic(lambda: f64, mu: f64, tau: Vec<f64>) -> Result<Self> {
        check_finite(&[lambda, mu])?;
        check_finite(&tau)?;
        check_dim(tau.len())?;
        Ok(Self::Rhombic { lambda, mu, tau })
    }

    pub fn hexagonal(tau1: f64, tau2: f64, lambda1: f64, lambda2: f64, mu: f64) -> Result<Self> {
        check_finite(&[tau1, tau2, lambda1, lambda2, mu])?;
        Ok(Self::Hexagonal { tau1, tau2, lambda1, lambda2, mu })
    }

    /// The one-dimensional medium with wave speed `speed`, so A(ξ) = speed² ξ².
    pub fn bar(speed: f64) -> Result<Self> {
        let t = speed * speed;
        Self::cubic(1, 0.0, t, t)
    }

    /// Generic stiffness tensor. Entries must already be symmetric under
    /// i<->j, k<->l and (ij)<->(kl) up to rounding; the stored tensor is the
    /// exact symmetrization.
    pub fn generic(dim: usize, tensor: Vec<f64>) -> Result<Self> {
        check_dim(dim)?;
        check_finite(&tensor)?;
        let n4 = dim.pow(4);
        if tensor.len() != n4 {
            return Err(Error::Dimension { expected: n4, got: tensor.len() });
        }
        let idx = |i: usize, j: usize, k: usize, l: usize| ((i * dim + j) * dim + k) * dim + l;
        let scale = tensor.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
        let mut sym = vec![0.0; n4];
        for i in 0..dim {
            for j in 0..dim {
                for k in 0..dim {
                    for l in 0..dim {
                        let perms = [
                            idx(i, j, k, l),
                            idx(j, i, k, l),
                            idx(i, j, l, k),
                            idx(j, i, l, k),
                            idx(k, l, i, j),
                            idx(l, k, i, j),
                            idx(k, l, j, i),
                            idx(l, k, j, i),
                        ];
                        let v0 = tensor[perms[0]];
                        if perms.iter().any(|&p| (tensor[p] - v0).abs() > 1e-12 * scale) {
                            return Err(Error::invalid(format!(
                                "stiffness tensor is not symmetric at ({i},{j},{k},{l})"
                            )));
                        }
                        sym[perms[0]] = perms.iter().map(|&p| tensor[p]).sum::<f64>() / 8.0;
                    }
                }
            }
        }
        Ok(Self::Generic { dim, tensor: sym })
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::Isotropic { dim, .. } | Self::Cubic { dim, .. } | Self::Generic { dim, .. } => *dim,
            Self::Rhombic { tau, .. } => tau.len(),
            Self::Hexagonal { .. } => 3,
        }
    }

    pub fn variant_name(&self) -> &'static str {
        match self {
            Self::Isotropic { .. } => "isotropic",
            Self::Cubic { .. } => "cubic",
            Self::Rhombic { .. } => "rhombic",
            Self::Hexagonal { .. } => "hexagonal",
            Self::Generic { .. } => "generic",
        }
    }

    /// A(ξ) for an arbitrary vector; homogeneous of degree two.
    pub fn symbol(&self, xi: &[f64]) -> Result<DMatrix<f64>> {
        let n = self.dim();
        if xi.len() != n {
            return Err(Error::Dimension { expected: n, got: xi.len() });
        }
        if xi.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("frequency must be finite"));
        }
        let r2: f64 = xi.iter().map(|x| x * x).sum();
        let cubic_like = |lambda: f64, mu: f64, tau: &dyn Fn(usize) -> f64| {
            DMatrix::from_fn(n, n, |i, j| {
                if i == j {
                    (tau(i) - mu) * xi[i] * xi[i] + mu * r2
                } else {
                    (lambda + mu) * xi[i] * xi[j]
                }
            })
        };
        Ok(match self {
            Self::Isotropic { lambda, mu, .. } => cubic_like(*lambda, *mu, &|_| lambda + 2.0 * mu),
            Self::Cubic { lambda, mu, tau, .. } => cubic_like(*lambda, *mu, &|_| *tau),
            Self::Rhombic { lambda, mu, tau } => cubic_like(*lambda, *mu, &|i| tau[i]),
            Self::Hexagonal { .. } => {
                let (c, d) = (self.voigt_stiffness(), hex_d(xi));
                d.transpose() * c * d
            }
            Self::Generic { tensor, .. } => tensor_symbol(n, tensor, xi),
        })
    }

    /// A(η) for a unit vector η.
    pub fn symbol_at(&self, eta: &[f64]) -> Result<DMatrix<f64>> {
        let r = norm(eta);
        if (r - 1.0).abs() > 1e-12 {
            return Err(Error::invalid(format!("direction is not a unit vector (|η| = {r})")));
        }
        self.symbol(eta)
    }

    /// 6×6 Voigt stiffness of the hexagonal medium.
    fn voigt_stiffness(&self) -> DMatrix<f64> {
        let Self::Hexagonal { tau1, tau2, lambda1, lambda2, mu } = *self else {
            unreachable!("voigt_stiffness is only defined for hexagonal media")
        };
        let mut c = DMatrix::zeros(6, 6);
        let top = [[tau1, lambda1, lambda2], [lambda1, tau1, lambda2], [lambda2, lambda2, tau2]];
        for i in 0..3 {
            for j in 0..3 {
                c[(i, j)] = top[i][j];
            }
        }
        c[(3, 3)] = mu;
        c[(4, 4)] = mu;
        c[(5, 5)] = (tau1 - lambda1) / 2.0;
        c
    }

    /// The full stiffness tensor C_ijkl with A_ik(ξ) = Σ C_ijkl ξ_j ξ_l.
    pub fn to_tensor(&self) -> Vec<f64> {
        let n = self.dim();
        let idx = |i: usize, j: usize, k: usize, l: usize| ((i * n + j) * n + k) * n + l;
        let mut t = vec![0.0; n.pow(4)];
        let mut fill_cubic = |lambda: f64, mu: f64, tau: &dyn Fn(usize) -> f64| {
            for i in 0..n {
                t[idx(i, i, i, i)] = tau(i);
                for j in 0..n {
                    if i != j {
                        t[idx(i, i, j, j)] = lambda;
                        t[idx(i, j, i, j)] = mu;
                        t[idx(i, j, j, i)] = mu;
                    }
                }
            }
        };
        match self {
            Self::Isotropic { lambda, mu, .. } => fill_cubic(*lambda, *mu, &|_| lambda + 2.0 * mu),
            Self::Cubic { lambda, mu, tau, .. } => fill_cubic(*lambda, *mu, &|_| *tau),
            Self::Rhombic { lambda, mu, tau } => fill_cubic(*lambda, *mu, &|i| tau[i]),
            Self::Hexagonal { .. } => {
                let c = self.voigt_stiffness();
                for i in 0..3 {
                    for j in 0..3 {
                        for k in 0..3 {
                            for l in 0..3 {
                                t[idx(i, j, k, l)] = c[(voigt(i, j), voigt(k, l))];
                            }
                        }
                    }
                }
            }
            Self::Generic { tensor, .. } => t.copy_from_slice(tensor),
        }
        t
    }

    /// Extra directions where the minimum eigenvalue of symmetric media tends to sit.
    fn special_directions(&self) -> Vec<Vec<f64>> {
        let n = self.dim();
        let mut out = Vec::new();
        for i in 0..n {
            let mut e = vec![0.0; n];
            e[i] = 1.0;
            out.push(e);
        }
        if n <= 4 {
            // All sign patterns over subsets of axes: face and body diagonals.
            for mask in 1u32..(3u32.pow(n as u32)) {
                let mut v = vec![0.0; n];
                let mut m = mask;
                for c in v.iter_mut() {
                    *c = match m % 3 {
                        0 => 0.0,
                        1 => 1.0,
                        _ => -1.0,
                    };
                    m /= 3;
                }
                if v.iter().filter(|c| **c != 0.0).count() >= 2 {
                    out.push(sphere::normalize(&v));
                }
            }
        }
        out
    }

    pub fn min_eigenvalue(&self, eta: &[f64]) -> f64 {
        let a = self.symbol(eta).expect("dimension checked by caller");
        a.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Minimum eigenvalue of A(η) over a deterministic sample of directions,
    /// refined locally around the best samples.
    pub fn positivity_check(&self, sample_count: usize) -> PositivityReport {
        let n = self.dim();
        let mut dirs = sphere::sphere_directions(n, sample_count.max(1));
        dirs.extend(self.special_directions());
        let mut scale: f64 = 0.0;
        let mut scored: Vec<(f64, Vec<f64>)> = dirs
            .into_iter()
            .map(|d| {
                let a = self.symbol(&d).expect("sampled directions match the dimension");
                scale = scale.max(a.norm());
                (a.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min), d)
            })
            .collect();
        let samples = scored.len();
        scored.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut best = scored[0].clone();
        if n >= 2 {
            for (v, d) in scored.iter().take(4) {
                let (rv, rd) = self.refine_min(*v, d.clone());
                if rv < best.0 {
                    best = (rv, rd);
                }
            }
        }
        let positive = best.0 > 1e-12 * scale.max(f64::MIN_POSITIVE);
        PositivityReport { positive, min_eig: best.0, witness: best.1, samples }
    }

    /// Pattern search on the sphere for the minimum eigenvalue.
    fn refine_min(&self, mut val: f64, mut dir: Vec<f64>) -> (f64, Vec<f64>) {
        let n = dir.len();
        let mut step = 0.1;
        while step > 1e-9 {
            let mut improved = false;
            for k in 0..n {
                for s in [-1.0, 1.0] {
                    let mut cand = dir.clone();
                    cand[k] += s * step;
                    let cand = sphere::normalize(&cand);
                    let v = self.min_eigenvalue(&cand);
                    if v < val {
                        val = v;
                        dir = cand;
                        improved = true;
                    }
                }
            }
            if !improved {
                step *= 0.5;
            }
        }
        (val, dir)
    }

    pub fn to_document(&self) -> MediumDocument {
        let mut p = BTreeMap::new();
        match self {
            Self::Isotropic { lambda, mu, .. } => {
                p.insert("lambda".into(), *lambda);
                p.insert("mu".into(), *mu);
            }
            Self::Cubic { lambda, mu, tau, .. } => {
                p.insert("lambda".into(), *lambda);
                p.insert("mu".into(), *mu);
                p.insert("tau".into(), *tau);
            }
            Self::Rhombic { lambda, mu, tau } => {
                p.insert("lambda".into(), *lambda);
                p.insert("mu".into(), *mu);
                for (i, t) in tau.iter().enumerate() {
                    p.insert(format!("tau{}", i + 1), *t);
                }
            }
            Self::Hexagonal { tau1, tau2, lambda1, lambda2, mu } => {
                p.insert("tau1".into(), *tau1);
                p.insert("tau2".into(), *tau2);
                p.insert("lambda1".into(), *lambda1);
                p.insert("lambda2".into(), *lambda2);
                p.insert("mu".into(), *mu);
            }
            Self::Generic { dim, tensor } => {
                let n = *dim;
                for (k, v) in tensor.iter().enumerate() {
                    let (i, j, l, m) = (k / n.pow(3), (k / n.pow(2)) % n, (k / n) % n, k % n);
                    p.insert(format!("c_{}_{}_{}_{}", i + 1, j + 1, l + 1, m + 1), *v);
                }
            }
        }
        MediumDocument { variant: self.variant_name().into(), dim: self.dim(), params: p }
    }

    pub fn from_document(doc: &MediumDocument) -> Result<Self> {
        let get = |k: &str| {
            doc.params.get(k).copied().ok_or_else(|| Error::invalid(format!("medium document is missing `{k}`")))
        };
        match doc.variant.as_str() {
            "isotropic" => Self::isotropic(doc.dim, get("lambda")?, get("mu")?),
            "cubic" => Self::cubic(doc.dim, get("lambda")?, get("mu")?, get("tau")?),
            "rhombic" => {
                let tau = (1..=doc.dim).map(|i| get(&format!("tau{i}"))).collect::<Result<Vec<_>>>()?;
                Self::rhombic(get("lambda")?, get("mu")?, tau)
            }
            "hexagonal" => {
                if doc.dim != 3 {
                    return Err(Error::invalid("hexagonal media are three-dimensional"));
                }
                Self::hexagonal(get("tau1")?, get("tau2")?, get("lambda1")?, get("lambda2")?, get("mu")?)
            }
            "generic" => {
                let n = doc.dim;
                let mut t = Vec::with_capacity(n.pow(4));
                for k in 0..n.pow(4) {
                    let (i, j, l, m) = (k / n.pow(3), (k / n.pow(2)) % n, (k / n) % n, k % n);
                    t.push(get(&format!("c_{}_{}_{}_{}", i + 1, j + 1, l + 1, m + 1))?);
                }
                Self::generic(n, t)
            }
            other => Err(Error::invalid(format!("unknown medium variant `{other}`"))),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_document()).expect("medium documents always serialize")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let doc: MediumDocument =
            serde_json::from_str(s).map_err(|e| Error::invalid(format!("malformed medium document: {e}")))?;
        Self::from_document(&doc)
    }
}

fn check_dim(dim: usize) -> Result<()> {
    if dim == 0 {
        Err(Error::invalid("dimension must be at least 1"))
    } else {
        Ok(())
    }
}

fn hex_d(e: &[f64]) -> DMatrix<f64> {
    DMatrix::from_row_slice(
        6,
        3,
        &[
            e[0], 0.0, 0.0, //
            0.0, e[1], 0.0, //
            0.0, 0.0, e[2], //
            0.0, e[2], e[1], //
            e[2], 0.0, e[0], //
            e[1], e[0], 0.0,
        ],
    )
}

fn tensor_symbol(n: usize, t: &[f64], xi: &[f64]) -> DMatrix<f64> {
    let idx = |i: usize, j: usize, k: usize, l: usize| ((i * n + j) * n + k) * n + l;
    let mut a = DMatrix::zeros(n, n);
    for i in 0..n {
        for k in 0..n {
            let mut s = 0.0;
            for j in 0..n {
                for l in 0..n {
                    s += t[idx(i, j, k, l)] * xi[j] * xi[l];
                }
            }
            a[(i, k)] = s;
        }
    }
    // Symmetrize away rounding so downstream eigensolvers see an exact symmetric matrix.
    (&a + a.transpose()) * 0.5
}

/// Shorthand grammar `name[/n]:p1,p2,...`.
///
/// * `isotropic[/n]:λ,μ` (default n = 3)
/// * `cubic[/n]:τ,λ,μ` (default n = 3), so `cubic:8,2,2` is τ = 8, λ = μ = 2
/// * `rhombic:λ,μ,τ1,...,τn`
/// * `hexagonal:τ1,τ2,λ1,λ2,μ`
/// * `bar:c`, the one-dimensional medium with speed c
impl FromStr for MediumSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (head, body) = s
            .split_once(':')
            .ok_or_else(|| Error::invalid(format!("medium shorthand `{s}` needs the form name:p1,p2,...")))?;
        let (name, dim) = match head.split_once('/') {
            Some((n, d)) => {
                let d: usize = d.trim().parse().map_err(|_| Error::invalid(format!("bad dimension in `{head}`")))?;
                (n.trim(), Some(d))
            }
            None => (head.trim(), None),
        };
        let p: Vec<f64> = body
            .split(',')
            .map(|x| x.trim().parse::<f64>().map_err(|_| Error::invalid(format!("bad number `{x}` in `{s}`"))))
            .collect::<Result<_>>()?;
        let want = |k: usize| {
            if p.len() == k {
                Ok(())
            } else {
                Err(Error::invalid(format!("`{name}` takes {k} parameters, got {}", p.len())))
            }
        };
        match name {
            "isotropic" => {
                want(2)?;
                Self::isotropic(dim.unwrap_or(3), p[0], p[1])
            }
            "cubic" => {
                want(3)?;
                Self::cubic(dim.unwrap_or(3), p[1], p[2], p[0])
            }
            "rhombic" => {
                if p.len() < 3 {
                    return Err(Error::invalid("rhombic takes λ,μ,τ1,...,τn"));
                }
                Self::rhombic(p[0], p[1], p[2..].to_vec())
            }
            "hexagonal" => {
                want(5)?;
                Self::hexagonal(p[0], p[1], p[2], p[3], p[4])
            }
            "bar" => {
                want(1)?;
                Self::bar(p[0])
            }
            other => Err(Error::invalid(format!("unknown medium `{other}`"))),
        }
    }
}

impl fmt::Display for MediumSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Isotropic { dim, lambda, mu } => write!(f, "isotropic/{dim}:{lambda},{mu}"),
            Self::Cubic { dim, lambda, mu, tau } => write!(f, "cubic/{dim}:{tau},{lambda},{mu}"),
            Self::Rhombic { lambda, mu, tau } => {
                write!(f, "rhombic:{lambda},{mu}")?;
                for t in tau {
                    write!(f, ",{t}")?;
                }
                Ok(())
            }
            Self::Hexagonal { tau1, tau2, lambda1, lambda2, mu } => {
                write!(f, "hexagonal:{tau1},{tau2},{lambda1},{lambda2},{mu}")
            }
            Self::Generic { dim, .. } => write!(f, "generic/{dim}"),
        }
    }
}

impl From<MediumSpec> for MediumDocument {
    fn from(m: MediumSpec) -> Self {
        m.to_document()
    }
}

impl TryFrom<MediumDocument> for MediumSpec {
    type Error = Error;
    fn try_from(doc: MediumDocument) -> Result<Self> {
        Self::from_document(&doc)
    }
}
