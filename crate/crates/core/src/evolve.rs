//! Exact per-frequency propagation of the thermo-elastic Cauchy problem on a
//! periodic frequency lattice, physical-space norms and decay-rate fits.
//!
//! With V = ((D_t+ω)MᵀÛ, (D_t−ω)MᵀÛ, θ̂) the system is D_tV = B(ξ)V, so
//! V̂(t,ξ) = exp(itB(ξ))V̂(0,ξ). Each lattice point keeps only the modes its
//! data excites, already mapped to the physical fields √A(D)U, U_t and θ.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, CMat, C64, COND_LIMIT};
use crate::media::{CouplingConstants, MediumSpec};
use crate::spectral::{eigenframe, Eigenframe};
use crate::sphere::{dot, norm};
use crate::symbol::build_b_with_frame;

const I: C64 = C64 { re: 0.0, im: 1.0 };

/// Modes with |c_k| at or below this fraction of ‖V₀‖ are dropped.
const MODE_DROP: f64 = 1e-15;

/// Regular frequency lattice ξ = shift + 2πm/L, m in FFT order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub counts: Vec<usize>,
    pub lengths: Vec<f64>,
    /// Carrier frequency added to every lattice point.
    pub shift: Vec<f64>,
    /// Zero-padding factor of the physical grid used for L^∞.
    pub pad: usize,
}

impl Grid {
    pub fn new(counts: Vec<usize>, lengths: Vec<f64>, shift: Vec<f64>, pad: usize) -> Result<Self> {
        let n = counts.len();
        if !(n == 1 || n == 3) || lengths.len() != n || shift.len() != n {
            return Err(Error::invalid("grid needs dimension 1 or 3 with matching lengths and shift"));
        }
        if counts.iter().any(|&c| c < 2) || lengths.iter().any(|l| !(l.is_finite() && *l > 0.0)) || pad == 0 {
            return Err(Error::invalid("grid counts must be ≥ 2, lengths positive and pad ≥ 1"));
        }
        if shift.iter().any(|s| !s.is_finite()) {
            return Err(Error::invalid("grid shift must be finite"));
        }
        Ok(Self { counts, lengths, shift, pad })
    }

    pub fn dim(&self) -> usize {
        self.counts.len()
    }

    pub fn padded(&self) -> Vec<usize> {
        self.counts.iter().map(|c| c * self.pad).collect()
    }

    pub fn volume(&self) -> f64 {
        self.lengths.iter().product()
    }

    fn signed(m: usize, n: usize) -> i64 {
        if m < n.div_ceil(2) {
            m as i64
        } else {
            m as i64 - n as i64
        }
    }

    /// All lattice indices with their offsets k = 2πm/L.
    fn lattice(&self) -> Vec<(Vec<i64>, Vec<f64>)> {
        let n = self.dim();
        let total: usize = self.counts.iter().product();
        (0..total)
            .map(|flat| {
                let mut rem = flat;
                let mut m = vec![0i64; n];
                for d in (0..n).rev() {
                    m[d] = Self::signed(rem % self.counts[d], self.counts[d]);
                    rem /= self.counts[d];
                }
                let k = (0..n).map(|d| 2.0 * std::f64::consts::PI * m[d] as f64 / self.lengths[d]).collect();
                (m, k)
            })
            .collect()
    }

    /// Flat index on the padded physical grid.
    fn padded_index(&self, m: &[i64]) -> usize {
        let p = self.padded();
        let mut idx = 0;
        for d in 0..self.dim() {
            idx = idx * p[d] + m[d].rem_euclid(p[d] as i64) as usize;
        }
        idx
    }

    /// Lattice points within two cells of the Nyquist shell.
    fn near_nyquist(&self, m: &[i64]) -> bool {
        m.iter().zip(&self.counts).any(|(&mi, &c)| mi.unsigned_abs() as usize + 2 >= c / 2)
    }
}

/// Amplitude profile in k = ξ − shift.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Profile {
    /// exp(−Σ σ_d² k_d²/2).
    Gaussian { sigma: Vec<f64> },
    /// 1 everywhere; use with cutoffs.
    Flat,
    /// Only the lattice point k = 0.
    Single,
}

impl Profile {
    fn value(&self, m: &[i64], k: &[f64]) -> f64 {
        match self {
            Self::Gaussian { sigma } => (-0.5 * k.iter().zip(sigma).map(|(k, s)| s * s * k * k).sum::<f64>()).exp(),
            Self::Flat => 1.0,
            Self::Single => {
                if m.iter().all(|&v| v == 0) {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

/// Which components carry the profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Fields {
    /// Û₀ = u0·f, Û₁ = u1·f, θ̂₀ = theta·f. Entries are (re, im) pairs.
    Physical { u0: Vec<[f64; 2]>, u1: Vec<[f64; 2]>, theta: [f64; 2] },
    /// Û₀ = i(ξ₂, −ξ₁, 0)f, the rotational field of a hexagonal medium.
    Rotational,
    /// V̂₀ = f·P_heat(1, …, 1): the projection onto the heat mode of B(ξ).
    HeatMode,
    /// V̂₀ = f·v directly.
    Modal { v: Vec<[f64; 2]> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitialData {
    pub profile: Profile,
    pub fields: Fields,
}

/// Smooth step: 1 for s ≤ 0, 0 for s ≥ 1, C^∞ in between.
pub fn smooth_step(s: f64) -> f64 {
    let f = |x: f64| if x > 0.0 { (-1.0 / x).exp() } else { 0.0 };
    let s = s.clamp(0.0, 1.0);
    let (a, b) = (f(1.0 - s), f(s));
    a / (a + b)
}

/// Cone of directions around `axis`: ψ(η) = step(angle(η, axis)/half_angle).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectionCutoff {
    pub axis: Vec<f64>,
    pub half_angle: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RadialCutoff {
    None,
    /// χ(s) = 0 for s ≤ ε, 1 for s ≥ 2ε.
    HighPass {
        eps: f64,
    },
    /// 1 for s ≤ R/2, 0 for s ≥ R.
    LowPass {
        radius: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Microlocal {
    pub direction: Option<DirectionCutoff>,
    pub radial: RadialCutoff,
}

impl Microlocal {
    pub fn identity() -> Self {
        Self { direction: None, radial: RadialCutoff::None }
    }

    /// Cutoff value at frequency ξ.
    pub fn weight(&self, xi: &[f64]) -> f64 {
        let r = norm(xi);
        let mut w = 1.0;
        if let Some(d) = &self.direction {
            if r == 0.0 {
                return 0.0;
            }
            let c = (dot(xi, &d.axis) / (r * norm(&d.axis))).clamp(-1.0, 1.0);
            w *= smooth_step(c.acos() / d.half_angle);
        }
        match self.radial {
            RadialCutoff::None => {}
            RadialCutoff::HighPass { eps } => w *= 1.0 - smooth_step((r - eps) / eps),
            RadialCutoff::LowPass { radius } => w *= smooth_step((r - radius / 2.0) / (radius / 2.0)),
        }
        w
    }

    fn validate(&self, dim: usize) -> Result<()> {
        if let Some(d) = &self.direction {
            if d.axis.len() != dim || norm(&d.axis) == 0.0 || !(d.half_angle > 0.0) {
                return Err(Error::invalid(
                    "direction cutoff needs a nonzero axis of the grid dimension and a positive half angle",
                ));
            }
        }
        match self.radial {
            RadialCutoff::HighPass { eps } if !(eps > 0.0) => Err(Error::invalid("high-pass cutoff needs ε > 0")),
            RadialCutoff::LowPass { radius } if !(radius > 0.0) => Err(Error::invalid("low-pass cutoff needs R > 0")),
            _ => Ok(()),
        }
    }
}

/// One lattice point with its transformed initial data.
#[derive(Debug, Clone)]
pub struct FreqPoint {
    pub lattice: Vec<i64>,
    pub xi: Vec<f64>,
    pub v0: Vec<C64>,
}

#[derive(Debug, Clone)]
pub struct FrequencyData {
    pub grid: Grid,
    pub points: Vec<FreqPoint>,
}

fn cplx(v: &[[f64; 2]]) -> Vec<C64> {
    v.iter().map(|p| C64::new(p[0], p[1])).collect()
}

fn frame_at(medium: &MediumSpec, xi: &[f64]) -> Result<(Vec<f64>, f64, Eigenframe)> {
    let r = norm(xi);
    let eta: Vec<f64> = xi.iter().map(|x| x / r).collect();
    let f = eigenframe(&medium.symbol(&eta)?)?;
    Ok((eta, r, f))
}

/// V₀ = (W − iZ, −W − iZ, θ̂₀) with W = ω⊙MᵀÛ₀ and Z = MᵀÛ₁.
fn physical_to_v(frame: &Eigenframe, r: f64, u0: &[C64], u1: &[C64], theta: C64) -> Vec<C64> {
    let n = frame.dim();
    let mut v = vec![C64::new(0.0, 0.0); 2 * n + 1];
    for j in 0..n {
        let col = frame.vectors.column(j);
        let p0: C64 = (0..n).map(|i| u0[i] * col[i]).sum();
        let p1: C64 = (0..n).map(|i| u1[i] * col[i]).sum();
        let w = p0 * (r * frame.values[j].max(0.0).sqrt());
        v[j] = w - I * p1;
        v[n + j] = -w - I * p1;
    }
    v[2 * n] = theta;
    v
}

/// Samples the initial data on the lattice; ξ = 0 and points with zero
/// amplitude are left out.
pub fn build_data(
    medium: &MediumSpec,
    c: &CouplingConstants,
    grid: &Grid,
    data: &InitialData,
) -> Result<FrequencyData> {
    let n = grid.dim();
    if medium.dim() != n {
        return Err(Error::Dimension { expected: medium.dim(), got: n });
    }
    let check_len =
        |v: &[[f64; 2]]| if v.len() == n { Ok(()) } else { Err(Error::Dimension { expected: n, got: v.len() }) };
    match &data.fields {
        Fields::Physical { u0, u1, .. } => {
            check_len(u0)?;
            check_len(u1)?;
        }
        Fields::Rotational if n != 3 => return Err(Error::invalid("rotational data needs three dimensions")),
        Fields::Modal { v } if v.len() != 2 * n + 1 => {
            return Err(Error::Dimension { expected: 2 * n + 1, got: v.len() })
        }
        _ => {}
    }
    if let Profile::Gaussian { sigma } = &data.profile {
        if sigma.len() != n {
            return Err(Error::Dimension { expected: n, got: sigma.len() });
        }
    }
    let lattice = grid.lattice();
    let points: Vec<Option<FreqPoint>> = lattice
        .par_iter()
        .map(|(m, k)| -> Result<Option<FreqPoint>> {
            let amp = data.profile.value(m, k);
            if amp == 0.0 {
                return Ok(None);
            }
            let xi: Vec<f64> = k.iter().zip(&grid.shift).map(|(a, b)| a + b).collect();
            if norm(&xi) == 0.0 {
                return Ok(None);
            }
            let v0 = match &data.fields {
                Fields::Physical { u0, u1, theta } => {
                    let (_, r, f) = frame_at(medium, &xi)?;
                    let s = |v: &[[f64; 2]]| cplx(v).into_iter().map(|z| z * amp).collect::<Vec<_>>();
                    physical_to_v(&f, r, &s(u0), &s(u1), C64::new(theta[0], theta[1]) * amp)
                }
                Fields::Rotational => {
                    let (_, r, f) = frame_at(medium, &xi)?;
                    let u0 = [I * xi[1] * amp, -I * xi[0] * amp, C64::new(0.0, 0.0)];
                    physical_to_v(&f, r, &u0, &[C64::new(0.0, 0.0); 3], C64::new(0.0, 0.0))
                }
                Fields::HeatMode => {
                    let (eta, r, f) = frame_at(medium, &xi)?;
                    let sys = build_b_with_frame(&f, &eta, r, c);
                    let s =
                        linalg::spectrum(&sys.matrix).ok_or_else(|| Error::Numerical("eigensolver failed".into()))?;
                    let mut best = 0;
                    for k in 1..s.values.len() {
                        if s.values[k].im > s.values[best].im {
                            best = k;
                        }
                    }
                    let p = &s.groups.iter().find(|g| g.members.contains(&best)).expect("grouped").projection;
                    (0..p.nrows()).map(|i| p.row(i).iter().sum::<C64>() * amp).collect()
                }
                Fields::Modal { v } => cplx(v).into_iter().map(|z| z * amp).collect(),
            };
            Ok(Some(FreqPoint { lattice: m.clone(), xi, v0 }))
        })
        .collect::<Result<Vec<_>>>()?;
    let points: Vec<FreqPoint> = points.into_iter().flatten().collect();
    if points.is_empty() {
        return Err(Error::invalid("initial data vanish on the grid"));
    }
    Ok(FrequencyData { grid: grid.clone(), points })
}

fn vnorm(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Multiplies V̂₀ by the cutoffs and prunes points below `prune`·max|V̂₀|.
pub fn microlocalize(data: &mut FrequencyData, cut: &Microlocal, prune: f64) -> Result<()> {
    cut.validate(data.grid.dim())?;
    for p in data.points.iter_mut() {
        let w = cut.weight(&p.xi);
        for z in p.v0.iter_mut() {
            *z *= w;
        }
    }
    let top = data.points.iter().map(|p| vnorm(&p.v0)).fold(0.0, f64::max);
    data.points.retain(|p| {
        let v = vnorm(&p.v0);
        v > 0.0 && v > prune * top
    });
    if data.points.is_empty() {
        return Err(Error::invalid("no data left after microlocalization"));
    }
    Ok(())
}

/// Fraction of ‖V̂₀‖² within two cells of the Nyquist shell.
pub fn aliasing_fraction(data: &FrequencyData) -> f64 {
    let (mut edge, mut total) = (0.0, 0.0);
    for p in &data.points {
        let e = p.v0.iter().map(|z| z.norm_sqr()).sum::<f64>();
        total += e;
        if data.grid.near_nyquist(&p.lattice) {
            edge += e;
        }
    }
    if total > 0.0 {
        edge / total
    } else {
        0.0
    }
}

#[derive(Debug, Clone)]
enum Rep {
    /// (ν_k, c_k times the physical image of the k-th eigenvector).
    Modal(Vec<(C64, Vec<C64>)>),
    /// Near-defective point: keep B, V₀ and the field map.
    Expm { b: CMat, v0: Vec<C64>, frame: Vec<f64> },
}

#[derive(Debug, Clone)]
struct PointState {
    padded: usize,
    rep: Rep,
}

/// Precomputed per-frequency propagator.
#[derive(Debug, Clone)]
pub struct Propagator {
    pub grid: Grid,
    pub coupling: CouplingConstants,
    points: Vec<PointState>,
    dim: usize,
    /// Points that use exp(itB) instead of eigenvectors.
    pub defective_points: usize,
    /// max over points of −min Im ν.
    pub spectral_abscissa: f64,
    /// Same, divided by max(1, max|ν|) at each point; rounding in the
    /// eigensolver is relative to the largest eigenvalue.
    pub spectral_abscissa_scaled: f64,
    pub aliasing: f64,
}

/// Physical image (√A U, U_t, θ) of a V-vector in the frame `r` (column-major n×n).
fn to_fields(r: &[f64], n: usize, v: &[C64]) -> Vec<C64> {
    let mut out = vec![C64::new(0.0, 0.0); 2 * n + 1];
    for i in 0..n {
        let (mut a, mut b) = (C64::new(0.0, 0.0), C64::new(0.0, 0.0));
        for j in 0..n {
            let rij = r[j * n + i];
            a += (v[j] - v[n + j]) * (0.5 * rij);
            b += I * (v[j] + v[n + j]) * (0.5 * rij);
        }
        out[i] = a;
        out[n + i] = b;
    }
    out[2 * n] = v[2 * n];
    out
}

impl Propagator {
    pub fn new(medium: &MediumSpec, c: &CouplingConstants, data: &FrequencyData) -> Result<Self> {
        let n = data.grid.dim();
        let built: Vec<(PointState, [f64; 2], bool)> = data
            .points
            .par_iter()
            .map(|p| -> Result<(PointState, [f64; 2], bool)> {
                let (eta, r, f) = frame_at(medium, &p.xi)?;
                let sys = build_b_with_frame(&f, &eta, r, c);
                let frame: Vec<f64> = f.vectors.iter().copied().collect();
                let e = linalg::eig(&sys.matrix).ok_or_else(|| Error::Numerical("eigensolver failed".into()))?;
                let a = e.values.iter().map(|z| -z.im).fold(f64::NEG_INFINITY, f64::max);
                let scale = e.values.iter().map(|z| z.norm()).fold(1.0, f64::max);
                let abscissa = [a, a / scale];
                let padded = data.grid.padded_index(&p.lattice);
                if e.cond >= COND_LIMIT {
                    let rep = Rep::Expm { b: sys.matrix, v0: p.v0.clone(), frame };
                    return Ok((PointState { padded, rep }, abscissa, true));
                }
                let coef = linalg::matvec(&e.inverse, &p.v0);
                let scale = vnorm(&p.v0);
                let mut modes = Vec::new();
                for k in 0..coef.len() {
                    if coef[k].norm() <= MODE_DROP * scale {
                        continue;
                    }
                    let col: Vec<C64> = e.vectors.column(k).iter().map(|z| z * coef[k]).collect();
                    modes.push((e.values[k], to_fields(&frame, n, &col)));
                }
                Ok((PointState { padded, rep: Rep::Modal(modes) }, abscissa, false))
            })
            .collect::<Result<Vec<_>>>()?;
        let spectral_abscissa = built.iter().map(|b| b.1[0]).fold(f64::NEG_INFINITY, f64::max);
        let spectral_abscissa_scaled = built.iter().map(|b| b.1[1]).fold(f64::NEG_INFINITY, f64::max);
        let defective_points = built.iter().filter(|b| b.2).count();
        Ok(Self {
            grid: data.grid.clone(),
            coupling: *c,
            points: built.into_iter().map(|b| b.0).collect(),
            dim: n,
            defective_points,
            spectral_abscissa,
            spectral_abscissa_scaled,
            aliasing: aliasing_fraction(data),
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Physical fields (√A U, U_t, θ) at every stored point at time t.
    pub fn fields(&self, t: f64) -> Vec<Vec<C64>> {
        let m = 2 * self.dim + 1;
        self.points
            .par_iter()
            .map(|p| match &p.rep {
                Rep::Modal(modes) => {
                    let mut out = vec![C64::new(0.0, 0.0); m];
                    for (nu, g) in modes {
                        let ph = (I * nu * t).exp();
                        for q in 0..m {
                            out[q] += g[q] * ph;
                        }
                    }
                    out
                }
                Rep::Expm { b, v0, frame } => {
                    let v = linalg::matvec(&linalg::expm(&(b * (I * t))), v0);
                    to_fields(frame, self.dim, &v)
                }
            })
            .collect()
    }
}

/// V̂(t,ξ) for every data point, and the time.
#[derive(Debug, Clone)]
pub struct EvolutionState {
    pub t: f64,
    pub v: Vec<Vec<C64>>,
}

/// V̂(t, ξ) = exp(itB(ξ))V̂₀(ξ) at every data point, through eigenvectors when
/// they are well conditioned and expm otherwise.
pub fn propagate(medium: &MediumSpec, c: &CouplingConstants, data: &FrequencyData, t: f64) -> Result<EvolutionState> {
    let v = data
        .points
        .par_iter()
        .map(|p| -> Result<Vec<C64>> {
            let (eta, r, f) = frame_at(medium, &p.xi)?;
            let sys = build_b_with_frame(&f, &eta, r, c);
            let e = linalg::eig(&sys.matrix).ok_or_else(|| Error::Numerical("eigensolver failed".into()))?;
            if e.cond >= COND_LIMIT {
                return Ok(linalg::matvec(&linalg::expm(&(&sys.matrix * (I * t))), &p.v0));
            }
            let coef = linalg::matvec(&e.inverse, &p.v0);
            let ph: Vec<C64> = coef.iter().zip(&e.values).map(|(c, nu)| c * (I * nu * t).exp()).collect();
            Ok(linalg::matvec(&e.vectors, &ph))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EvolutionState { t, v })
}

/// ½(|V₁|² + |V₂|²) + |θ̂|² summed over the lattice; equals ‖√A U‖² + ‖U_t‖² + ‖θ‖²
/// up to the lattice normalization.
pub fn energy(state: &EvolutionState) -> f64 {
    state
        .v
        .iter()
        .map(|v| {
            let n = (v.len() - 1) / 2;
            0.5 * v[..2 * n].iter().map(|z| z.norm_sqr()).sum::<f64>() + v[2 * n].norm_sqr()
        })
        .sum()
}

struct NdFft {
    dims: Vec<usize>,
    plans: Vec<Arc<dyn Fft<f64>>>,
}

impl NdFft {
    fn new(dims: &[usize]) -> Self {
        let mut planner = FftPlanner::new();
        Self { dims: dims.to_vec(), plans: dims.iter().map(|&d| planner.plan_fft_inverse(d)).collect() }
    }

    /// Unnormalized inverse transform in place, axis by axis.
    fn inverse(&self, buf: &mut [C64]) {
        let total = buf.len();
        let nd = self.dims.len();
        for axis in 0..nd {
            let len = self.dims[axis];
            let stride: usize = self.dims[axis + 1..].iter().product();
            let plan = &self.plans[axis];
            if stride == 1 {
                plan.process(buf);
                continue;
            }
            let mut line = vec![C64::new(0.0, 0.0); len];
            let outer = total / (len * stride);
            for o in 0..outer {
                for s in 0..stride {
                    let base = o * len * stride + s;
                    for (i, z) in line.iter_mut().enumerate() {
                        *z = buf[base + i * stride];
                    }
                    plan.process(&mut line);
                    for (i, z) in line.iter().enumerate() {
                        buf[base + i * stride] = *z;
                    }
                }
            }
        }
    }
}

/// Norms of (√A(D)U, U_t, θ) at one time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhysicalNorms {
    pub t: f64,
    /// max_x |(√A U, U_t, θ)(x)| on the padded grid.
    pub linf: f64,
    /// L² from the physical grid by the rectangle rule.
    pub l2: f64,
    /// L² from the frequency side (Parseval).
    pub l2_frequency: f64,
}

/// Evaluates physical norms at several times, reusing one FFT plan.
pub struct NormEvaluator<'a> {
    prop: &'a Propagator,
    fft: NdFft,
    padded: Vec<usize>,
}

impl<'a> NormEvaluator<'a> {
    pub fn new(prop: &'a Propagator) -> Self {
        let padded = prop.grid.padded();
        Self { prop, fft: NdFft::new(&padded), padded }
    }

    pub fn at(&self, t: f64) -> PhysicalNorms {
        let fields = self.prop.fields(t);
        let total: usize = self.padded.iter().product();
        let m = 2 * self.prop.dim + 1;
        let mut acc = vec![0.0f64; total];
        let mut buf = vec![C64::new(0.0, 0.0); total];
        let mut freq_sq = 0.0;
        for q in 0..m {
            buf.iter_mut().for_each(|z| *z = C64::new(0.0, 0.0));
            for (p, f) in self.prop.points.iter().zip(&fields) {
                buf[p.padded] += f[q];
                freq_sq += f[q].norm_sqr();
            }
            self.fft.inverse(&mut buf);
            for (a, z) in acc.iter_mut().zip(&buf) {
                *a += z.norm_sqr();
            }
        }
        // f(x) = Σ f̂ e^{iξx}/V, sampled on the padded grid.
        let vol = self.prop.grid.volume();
        let cell = vol / total as f64;
        let linf = acc.iter().fold(0.0f64, |m, v| m.max(*v)).sqrt() / vol;
        let l2 = (acc.iter().sum::<f64>() * cell).sqrt() / vol;
        let l2_frequency = (freq_sq / vol).sqrt();
        PhysicalNorms { t, linf, l2, l2_frequency }
    }
}

/// Norm samples with a label, for CSV output `t,norm_q,q,label`.
#[derive(Debug, Clone, Serialize)]
pub struct NormTrace {
    pub label: String,
    pub samples: Vec<PhysicalNorms>,
}

impl NormTrace {
    /// Values of the chosen norm ("inf" or "2") relative to the sample at t = 1
    /// (or the first sample when t = 1 is absent).
    pub fn relative(&self, q: &str) -> Vec<(f64, f64)> {
        let pick = |s: &PhysicalNorms| if q == "2" { s.l2 } else { s.linf };
        let base = self.samples.iter().find(|s| s.t == 1.0).or(self.samples.first()).map(pick).unwrap_or(1.0);
        self.samples.iter().map(|s| (s.t, pick(s) / base)).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,norm_q,q,label\n");
        for q in ["inf", "2"] {
            for (t, v) in self.relative(q) {
                out.push_str(&format!("{t},{v:e},{q},{}\n", self.label));
            }
        }
        out
    }
}

/// t_k = t₀·r^k up to and including the first value ≥ t_max.
pub fn geometric_times(t0: f64, ratio: f64, t_max: f64) -> Vec<f64> {
    let mut out = vec![t0];
    while *out.last().expect("nonempty") < t_max * (1.0 - 1e-12) {
        let next = out.last().expect("nonempty") * ratio;
        out.push(next);
    }
    out
}

/// Sample times with the fit window's endpoints added, so that the fitted
/// span is the full window and not the nearest geometric samples inside it.
pub fn with_endpoints(times: &[f64], window: (f64, f64)) -> Vec<f64> {
    let mut out = times.to_vec();
    out.extend([window.0, window.1]);
    out.sort_by(f64::total_cmp);
    out.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * b.abs());
    out
}

pub fn physical_trace(prop: &Propagator, times: &[f64], label: &str) -> NormTrace {
    let ev = NormEvaluator::new(prop);
    NormTrace { label: label.to_string(), samples: times.iter().map(|&t| ev.at(t)).collect() }
}

/// Power-law fit of a norm trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecayFit {
    pub exponent: f64,
    /// 95% bootstrap interval.
    pub ci: (f64, f64),
    pub samples: usize,
    pub decades: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub min_samples: usize,
    pub min_decades: f64,
    pub bootstrap: usize,
    pub seed: u64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self { min_samples: 8, min_decades: 1.5, bootstrap: 1000, seed: 7 }
    }
}

fn slope(x: &[f64], y: &[f64]) -> f64 {
    let m = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / m, y.iter().sum::<f64>() / m);
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

/// Least-squares slope of log‖·‖ against log(1+t) over the samples with
/// t in `window`, with a bootstrap interval over resampled pairs.
pub fn decay_fit(trace: &[(f64, f64)], window: (f64, f64), opts: &FitOptions) -> Result<DecayFit> {
    let pts: Vec<(f64, f64)> =
        trace.iter().copied().filter(|(t, v)| *t >= window.0 && *t <= window.1 && *v > 0.0).collect();
    if pts.len() < opts.min_samples {
        return Err(Error::Insufficient(format!("{} samples in the window, need {}", pts.len(), opts.min_samples)));
    }
    let (tmin, tmax) = pts.iter().fold((f64::INFINITY, 0.0f64), |(a, b), p| (a.min(p.0), b.max(p.0)));
    let decades = (tmax / tmin).log10();
    if decades < opts.min_decades {
        return Err(Error::Insufficient(format!("window spans {decades:.2} decades, need {}", opts.min_decades)));
    }
    let x: Vec<f64> = pts.iter().map(|p| (1.0 + p.0).ln()).collect();
    let y: Vec<f64> = pts.iter().map(|p| p.1.ln()).collect();
    let exponent = slope(&x, &y);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut boot = Vec::with_capacity(opts.bootstrap);
    let n = x.len();
    while boot.len() < opts.bootstrap {
        let idx: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
        let bx: Vec<f64> = idx.iter().map(|&i| x[i]).collect();
        let by: Vec<f64> = idx.iter().map(|&i| y[i]).collect();
        let s = slope(&bx, &by);
        if s.is_finite() {
            boot.push(s);
        }
    }
    boot.sort_by(f64::total_cmp);
    let ci = if boot.is_empty() {
        (exponent, exponent)
    } else {
        let at = |q: f64| boot[((q * (boot.len() - 1) as f64).round() as usize).min(boot.len() - 1)];
        (at(0.025), at(0.975))
    };
    Ok(DecayFit { exponent, ci, samples: n, decades })
}

/// A complete decay measurement: medium, data, cutoffs, grid and fit window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayExperiment {
    pub label: String,
    pub medium: MediumSpec,
    pub coupling: CouplingConstants,
    pub grid: Grid,
    pub data: InitialData,
    pub cutoff: Microlocal,
    /// Points with |V̂₀| at or below this fraction of the maximum are not stored.
    pub prune: f64,
    pub times: Vec<f64>,
    pub window: (f64, f64),
    /// "inf" or "2".
    pub norm: String,
    pub fit: FitOptions,
    /// Expected exponent and tolerance, when the experiment has a target.
    pub target: Option<(f64, f64)>,
}

#[derive(Debug, Clone, Serialize)]
pub struct DecayRun {
    pub label: String,
    pub points: usize,
    pub defective_points: usize,
    pub spectral_abscissa: f64,
    pub spectral_abscissa_scaled: f64,
    pub aliasing: f64,
    pub warnings: Vec<String>,
    pub trace: NormTrace,
    pub fit: DecayFit,
}

impl DecayRun {
    pub fn within_target(&self, target: Option<(f64, f64)>) -> bool {
        target.is_none_or(|(e, tol)| (self.fit.exponent - e).abs() <= tol)
    }
}

impl DecayExperiment {
    pub fn run(&self) -> Result<DecayRun> {
        if self.norm != "inf" && self.norm != "2" {
            return Err(Error::invalid("norm must be `inf` or `2`"));
        }
        let mut data = build_data(&self.medium, &self.coupling, &self.grid, &self.data)?;
        microlocalize(&mut data, &self.cutoff, self.prune)?;
        let prop = Propagator::new(&self.medium, &self.coupling, &data)?;
        drop(data);
        let mut warnings = Vec::new();
        if prop.aliasing > 0.01 {
            warnings.push(format!(
                "aliasing: {:.3}% of the energy lies within two cells of the Nyquist shell",
                100.0 * prop.aliasing
            ));
        }
        if prop.spectral_abscissa_scaled > 1e-10 {
            warnings.push(format!("spectral abscissa {:e} is positive", prop.spectral_abscissa));
        }
        let trace = physical_trace(&prop, &self.times, &self.label);
        let fit = decay_fit(&trace.relative(&self.norm), self.window, &self.fit)?;
        Ok(DecayRun {
            label: self.label.clone(),
            points: prop.len(),
            defective_points: prop.defective_points,
            spectral_abscissa: prop.spectral_abscissa,
            spectral_abscissa_scaled: prop.spectral_abscissa_scaled,
            aliasing: prop.aliasing,
            warnings,
            trace,
            fit,
        })
    }
}

/// The calibrated desk-scale decay experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DecayPreset {
    /// 1D bar, smooth data, L^∞: parabolic rate −1/2.
    OneD,
    /// Cubic, data concentrated at a conic direction, L^∞: −1/2.
    Conic,
    /// Cubic, heat-mode data at low frequency in a parabolic cone, L^∞: −3/2.
    Parabolic,
    /// Hexagonal, rotational data on the genuine hyperbolic sheet, L^∞: −1.
    Hexagonal,
    /// Cubic, generic Gaussian data, L^∞: no microlocalization.
    CubicGeneric,
}

impl DecayPreset {
    pub const ALL: [DecayPreset; 5] = [Self::OneD, Self::Conic, Self::Parabolic, Self::Hexagonal, Self::CubicGeneric];

    pub fn name(self) -> &'static str {
        match self {
            Self::OneD => "one-d",
            Self::Conic => "conic",
            Self::Parabolic => "parabolic",
            Self::Hexagonal => "hexagonal",
            Self::CubicGeneric => "cubic-generic",
        }
    }

    /// The experiment at base resolution, or with twice as many lattice
    /// points per axis when `refined`. Band-limited data (1D, parabolic,
    /// generic) refine by doubling the box, which halves the lattice step;
    /// conic and hexagonal data refine by doubling the count at a fixed box.
    pub fn experiment(self, refined: bool) -> DecayExperiment {
        let c = CouplingConstants { gamma: 1.0, kappa: 1.0 };
        let times = geometric_times(1.0, 1.25, 1000.0);
        let f = if refined { 2 } else { 1 };
        let cubic = MediumSpec::Cubic { dim: 3, lambda: 2.0, mu: 2.0, tau: 8.0 };
        // Fixed physical fields; V-space data would depend on the eigenframe gauge.
        let generic = Fields::Physical {
            u0: vec![[1.0, 0.0], [-0.6, 0.0], [0.3, 0.0]],
            u1: vec![[0.2, 0.0], [0.5, 0.0], [-0.4, 0.0]],
            theta: [1.0, 0.0],
        };
        let label = format!("{}{}", self.name(), if refined { "-refined" } else { "" });
        let base = |medium, grid, data, cutoff, window, target| DecayExperiment {
            label: label.clone(),
            medium,
            coupling: c,
            grid,
            data,
            cutoff,
            prune: 1e-13,
            times: with_endpoints(&times, window),
            window,
            norm: "inf".into(),
            fit: FitOptions::default(),
            target,
        };
        match self {
            Self::OneD => base(
                MediumSpec::bar(1.0).expect("valid medium"),
                Grid::new(vec![1 << (15 + f - 1)], vec![4096.0 * f as f64], vec![0.0], 4).expect("valid grid"),
                InitialData {
                    profile: Profile::Gaussian { sigma: vec![1.0] },
                    fields: Fields::Physical { u0: vec![[1.0, 0.0]], u1: vec![[1.0, 0.0]], theta: [1.0, 0.0] },
                },
                Microlocal::identity(),
                (1.0, 1000.0),
                Some((-0.5, 0.1)),
            ),
            Self::Conic => {
                let k0 = 1e4 / 3f64.sqrt();
                base(
                    cubic,
                    Grid::new(vec![48 * f; 3], vec![420.0; 3], vec![k0; 3], 1).expect("valid grid"),
                    InitialData { profile: Profile::Gaussian { sigma: vec![1.0 / 0.12; 3] }, fields: generic.clone() },
                    Microlocal::identity(),
                    (30.0, 1000.0),
                    Some((-0.5, 0.15)),
                )
            }
            // At t = 1e3 the heat mode lives at |ξ| ~ 0.03; the box keeps that
            // several lattice spacings wide.
            Self::Parabolic => base(
                cubic,
                Grid::new(vec![64 * f; 3], vec![800.0 * f as f64; 3], vec![0.0; 3], 1).expect("valid grid"),
                InitialData { profile: Profile::Flat, fields: Fields::HeatMode },
                Microlocal {
                    direction: Some(DirectionCutoff { axis: vec![1.0, 2.0, 3.0], half_angle: 0.15 }),
                    radial: RadialCutoff::LowPass { radius: 0.45 },
                },
                (30.0, 1000.0),
                Some((-1.5, 0.2)),
            ),
            Self::Hexagonal => {
                let l = 400.0;
                let mut e = base(
                    MediumSpec::Hexagonal { tau1: 4.0, tau2: 10.0, lambda1: 2.0, lambda2: 4.0, mu: 2.0 },
                    Grid::new(vec![48 * f; 3], vec![l, l, l * 2f64.sqrt()], vec![0.0; 3], 1).expect("valid grid"),
                    InitialData {
                        profile: Profile::Gaussian { sigma: vec![7.5, 7.5, 7.5 * 2f64.sqrt()] },
                        fields: Fields::Rotational,
                    },
                    Microlocal::identity(),
                    (30.0, 170.0),
                    Some((-1.0, 0.15)),
                );
                // Waves reach the periodic boundary soon after t = 200.
                e.fit.min_decades = 0.7;
                e
            }
            // Generic data mix every mechanism; the rate is recorded, not gated.
            Self::CubicGeneric => base(
                cubic,
                Grid::new(vec![32 * f; 3], vec![400.0 * f as f64; 3], vec![0.0; 3], 1).expect("valid grid"),
                InitialData { profile: Profile::Gaussian { sigma: vec![20.0; 3] }, fields: generic.clone() },
                Microlocal::identity(),
                (30.0, 1000.0),
                None,
            ),
        }
    }
}

impl std::str::FromStr for DecayPreset {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown decay preset `{s}`")))
    }
}
