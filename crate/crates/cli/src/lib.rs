//! Command-line front end. Every subcommand is a pure function of its
//! arguments: it returns the files to write and a pass/fail verdict, and the
//! runner writes them together with a manifest of the exact configuration.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

use anitherm::blowup::{self, hexagonal_reduce};
use anitherm::evolve::{DecayExperiment, DecayPreset, DecayRun};
use anitherm::fresnel::{self, SingularityKind};
use anitherm::spectral::{classify, cubic_hyperbolic_det, DirectionKind, DirectionReport, Tolerances};
use anitherm::sphere::{normalize, random_direction, sphere_directions};
use anitherm::symbol::{
    build_b, check_large_xi, check_small_xi, identity_residuals, im_part_scan, large_xi_expansion, log_space,
    scan_header, small_xi_expansion,
};
use anitherm::{CouplingConstants, MediumSpec};

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "ANITHERM_OUT_DIR";

#[derive(Debug, Parser, Serialize)]
#[command(name = "anitherm", version, about = "Spectral analysis of anisotropic thermo-elastic symbols")]
pub struct Cli {
    /// Directory for output files and manifests.
    #[arg(long, env = OUT_DIR_ENV, default_value = ".", global = true)]
    pub out_dir: PathBuf,
    /// Worker threads for data-parallel sections (0 = all cores).
    #[arg(long, default_value_t = 0, global = true)]
    pub workers: usize,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct MediumArgs {
    /// Medium shorthand: isotropic[/n]:λ,μ  cubic[/n]:τ,λ,μ  rhombic:λ,μ,τ1,..,τn
    /// hexagonal:τ1,τ2,λ1,λ2,μ  bar:c.
    #[arg(long)]
    pub medium: Option<String>,
    /// Medium document (JSON); overrides --medium.
    #[arg(long)]
    pub medium_file: Option<PathBuf>,
    #[arg(long, default_value_t = 1.0)]
    pub gamma: f64,
    #[arg(long, default_value_t = 1.0)]
    pub kappa: f64,
}

impl MediumArgs {
    fn medium(&self) -> anyhow::Result<MediumSpec> {
        if let Some(p) = &self.medium_file {
            let s = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            return Ok(MediumSpec::from_json(&s)?);
        }
        match &self.medium {
            Some(s) => Ok(s.parse()?),
            None => bail!("a medium is required (--medium or --medium-file)"),
        }
    }

    fn coupling(&self) -> anyhow::Result<CouplingConstants> {
        Ok(CouplingConstants::new(self.gamma, self.kappa)?)
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct TolArgs {
    /// Relative eigenvalue gap below which a direction is degenerate.
    #[arg(long, default_value_t = 1e-8)]
    pub tol_degenerate: f64,
    /// Relative size below which a coupling a_j counts as zero.
    #[arg(long, default_value_t = 1e-8)]
    pub tol_coupling: f64,
    #[arg(long, default_value_t = 1e-8)]
    pub tol_krylov: f64,
    #[arg(long, default_value_t = 1e-8)]
    pub tol_gamma_degenerate: f64,
}

impl TolArgs {
    fn tolerances(&self) -> Tolerances {
        Tolerances {
            degenerate: self.tol_degenerate,
            coupling: self.tol_coupling,
            krylov: self.tol_krylov,
            gamma_degenerate: self.tol_gamma_degenerate,
        }
    }
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Positivity of A(η) over sampled directions.
    MediaCheck {
        #[command(flatten)]
        medium: MediumArgs,
        #[arg(long, default_value_t = 2000)]
        samples: usize,
    },
    /// Classify one direction: eigenframe, couplings, kind.
    Classify {
        #[command(flatten)]
        medium: MediumArgs,
        #[command(flatten)]
        tol: TolArgs,
        /// Direction, comma separated; normalized before use.
        #[arg(long)]
        dir: String,
    },
    /// Couplings at random directions; checks Σa² = 1 and b₀ + 2Σb = 1.
    Couplings {
        #[command(flatten)]
        medium: MediumArgs,
        #[command(flatten)]
        tol: TolArgs,
        #[arg(long, default_value_t = 1000)]
        samples: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Small-|ξ| expansion against numerical eigenvalues.
    ExpandSmall {
        #[command(flatten)]
        medium: MediumArgs,
        #[command(flatten)]
        tol: TolArgs,
        #[arg(long)]
        dir: String,
        #[arg(long, default_value_t = 1e-3)]
        xi_min: f64,
        #[arg(long, default_value_t = 1e-1)]
        xi_max: f64,
        #[arg(long, default_value_t = 8)]
        points: usize,
        /// Smallest accepted log-log slope of the residual.
        #[arg(long, default_value_t = 2.9)]
        min_slope: f64,
    },
    /// Large-|ξ| expansion against numerical eigenvalues.
    ExpandLarge {
        #[command(flatten)]
        medium: MediumArgs,
        #[command(flatten)]
        tol: TolArgs,
        #[arg(long)]
        dir: String,
        #[arg(long, default_value_t = 10.0)]
        xi_min: f64,
        #[arg(long, default_value_t = 1e3)]
        xi_max: f64,
        #[arg(long, default_value_t = 8)]
        points: usize,
        /// Largest accepted log-log slope of the residual.
        #[arg(long, default_value_t = -0.9)]
        max_slope: f64,
    },
    /// Eigenvalues of B over directions and |ξ|; checks Im ν ≥ 0.
    ImScan {
        #[command(flatten)]
        medium: MediumArgs,
        #[command(flatten)]
        tol: TolArgs,
        #[arg(long, default_value_t = 50)]
        directions: usize,
        #[arg(long, default_value_t = 1e-2)]
        xi_min: f64,
        #[arg(long, default_value_t = 1e2)]
        xi_max: f64,
        #[arg(long, default_value_t = 9)]
        points: usize,
    },
    /// Planar cut of the Fresnel surface (n = 3) or the whole curve (n = 2).
    FresnelCut {
        #[command(flatten)]
        medium: MediumArgs,
        /// Coordinate plane: x=0, y=0 or z=0.
        #[arg(long)]
        plane: Option<String>,
        /// Plane normal, comma separated; overrides --plane.
        #[arg(long)]
        normal: Option<String>,
        #[arg(long, default_value_t = 720)]
        resolution: usize,
    },
    /// Sample every sheet of the Fresnel surface.
    FresnelSurface {
        #[command(flatten)]
        medium: MediumArgs,
        #[arg(long, default_value_t = 2000)]
        resolution: usize,
    },
    /// Singular points and degenerate curves of the Fresnel surface.
    Singularities {
        #[command(flatten)]
        medium: MediumArgs,
        #[arg(long, default_value_t = 3000)]
        resolution: usize,
        /// Relative gap below which a sample seeds a refinement.
        #[arg(long, default_value_t = 0.05)]
        tol: f64,
    },
    /// Contact orders: cubic hyperbolic sections and uniplanar indicatrices,
    /// or convexity of the hexagonal genuine hyperbolic sheet.
    Sugimoto {
        #[command(flatten)]
        medium: MediumArgs,
        #[arg(long, default_value_t = 400)]
        samples: usize,
    },
    /// Conic blow-up coefficients of a cubic medium.
    BlowupConic {
        #[command(flatten)]
        medium: MediumArgs,
    },
    /// Uniplanar blow-up coefficients of a cubic medium.
    BlowupUniplanar {
        #[command(flatten)]
        medium: MediumArgs,
    },
    /// Rotational reduction of a hexagonal medium.
    Hexagonal {
        #[command(flatten)]
        medium: MediumArgs,
        /// Latitudes ψ, comma separated; default 13 values in [0, π/2].
        #[arg(long)]
        psi: Option<String>,
    },
    /// Run one decay experiment: a preset or a JSON experiment file.
    Evolve {
        /// one-d, conic, parabolic, hexagonal or cubic-generic.
        #[arg(long)]
        preset: Option<String>,
        /// Experiment document (JSON); overrides --preset.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Twice as many lattice points per axis.
        #[arg(long)]
        refined: bool,
    },
    /// Run decay presets at base and doubled resolution.
    DecayScan {
        /// Comma separated presets; default all.
        #[arg(long)]
        presets: Option<String>,
        /// Largest accepted change of the exponent under grid doubling.
        #[arg(long, default_value_t = 0.05)]
        max_change: f64,
    },
    /// Every invariant suite for one medium with pinned tolerances.
    ValidateAll {
        #[command(flatten)]
        medium: MediumArgs,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::MediaCheck { .. } => "media-check",
            Command::Classify { .. } => "classify",
            Command::Couplings { .. } => "couplings",
            Command::ExpandSmall { .. } => "expand-small",
            Command::ExpandLarge { .. } => "expand-large",
            Command::ImScan { .. } => "im-scan",
            Command::FresnelCut { .. } => "fresnel-cut",
            Command::FresnelSurface { .. } => "fresnel-surface",
            Command::Singularities { .. } => "singularities",
            Command::Sugimoto { .. } => "sugimoto",
            Command::BlowupConic { .. } => "blowup-conic",
            Command::BlowupUniplanar { .. } => "blowup-uniplanar",
            Command::Hexagonal { .. } => "hexagonal",
            Command::Evolve { .. } => "evolve",
            Command::DecayScan { .. } => "decay-scan",
            Command::ValidateAll { .. } => "validate-all",
        }
    }
}

/// Result of one subcommand before anything touches the disk.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub summary: String,
    pub passed: bool,
    /// (file name, contents).
    pub files: Vec<(String, String)>,
    /// Medium and coupling actually used, for the manifest.
    pub context: Value,
}

fn parse_vec(s: &str) -> anyhow::Result<Vec<f64>> {
    s.split(',').map(|x| x.trim().parse::<f64>().map_err(|_| anyhow!("bad number `{x}` in `{s}`"))).collect()
}

fn parse_dir(s: &str, dim: usize) -> anyhow::Result<Vec<f64>> {
    let v = parse_vec(s)?;
    if v.len() != dim {
        bail!("direction `{s}` has {} components, the medium has dimension {dim}", v.len());
    }
    if v.iter().all(|x| *x == 0.0) {
        bail!("direction must be nonzero");
    }
    Ok(normalize(&v))
}

fn pretty<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("outputs serialize");
    s.push('\n');
    s
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "none".into(), |x| format!("{x}"))
}

fn context(m: &MediumSpec, c: Option<&CouplingConstants>) -> Value {
    json!({ "medium": m.to_document(), "medium_shorthand": m.to_string(), "coupling": c })
}

fn cubic_params(m: &MediumSpec) -> anyhow::Result<(f64, f64, f64)> {
    match m {
        MediumSpec::Cubic { dim: 3, lambda, mu, tau } => Ok((*lambda, *mu, *tau)),
        _ => bail!("this analysis needs a three-dimensional cubic medium"),
    }
}

fn hex_params(m: &MediumSpec) -> anyhow::Result<[f64; 5]> {
    match m {
        MediumSpec::Hexagonal { tau1, tau2, lambda1, lambda2, mu } => Ok([*tau1, *tau2, *lambda1, *lambda2, *mu]),
        _ => bail!("this analysis needs a hexagonal medium"),
    }
}

/// Σa² and trace-rule residuals over random non-degenerate directions.
#[derive(Debug, Clone, Serialize)]
pub struct CouplingSummary {
    pub samples: usize,
    pub used: usize,
    pub skipped_degenerate: usize,
    pub skipped_gamma_degenerate: usize,
    pub max_normalization_residual: f64,
    pub max_trace_rule_residual: f64,
}

pub fn coupling_sweep(
    m: &MediumSpec,
    c: &CouplingConstants,
    tol: &Tolerances,
    samples: usize,
    seed: u64,
) -> anyhow::Result<(CouplingSummary, Vec<DirectionReport>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut s = CouplingSummary {
        samples,
        used: 0,
        skipped_degenerate: 0,
        skipped_gamma_degenerate: 0,
        max_normalization_residual: 0.0,
        max_trace_rule_residual: 0.0,
    };
    let mut rows = Vec::with_capacity(samples);
    for _ in 0..samples {
        let eta = random_direction(&mut rng, m.dim());
        let rep = classify(m, c, &eta, tol)?;
        if rep.is_degenerate() {
            s.skipped_degenerate += 1;
            rows.push(rep);
            continue;
        }
        if !rep.gamma_degenerate.is_empty() {
            s.skipped_gamma_degenerate += 1;
            rows.push(rep);
            continue;
        }
        let a = rep.coupling.as_ref().expect("non-degenerate directions carry couplings");
        s.max_normalization_residual =
            s.max_normalization_residual.max((a.iter().map(|x| x * x).sum::<f64>() - 1.0).abs());
        let e = small_xi_expansion(&rep, c, tol)?;
        s.max_trace_rule_residual = s.max_trace_rule_residual.max(e.trace_residual().abs());
        s.used += 1;
        rows.push(rep);
    }
    Ok((s, rows))
}

/// Trace and determinant identities of B over random media-free samples.
#[derive(Debug, Clone, Serialize)]
pub struct IdentitySummary {
    pub samples: usize,
    pub max_trace_residual: f64,
    pub max_det_residual: f64,
}

pub fn identity_sweep(
    m: &MediumSpec,
    c: &CouplingConstants,
    samples: usize,
    seed: u64,
) -> anyhow::Result<IdentitySummary> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut tr, mut de) = (0.0f64, 0.0f64);
    let radii = log_space(1e-2, 1e2, 5);
    let mut count = 0;
    for k in 0..samples {
        let eta = random_direction(&mut rng, m.dim());
        let r = radii[k % radii.len()];
        let xi: Vec<f64> = eta.iter().map(|e| e * r).collect();
        let sys = match build_b(m, c, &xi, &Tolerances::default()) {
            Ok(s) => s,
            Err(anitherm::Error::Degenerate { .. }) => continue,
            Err(e) => return Err(e.into()),
        };
        let res = identity_residuals(m, &sys)?;
        tr = tr.max(res.trace);
        de = de.max(res.det);
        count += 1;
    }
    Ok(IdentitySummary { samples: count, max_trace_residual: tr, max_det_residual: de })
}

/// First parabolic direction among deterministic samples, else the first
/// non-degenerate one (media where a decoupled mode exists everywhere).
fn expansion_direction(m: &MediumSpec, c: &CouplingConstants, tol: &Tolerances) -> anyhow::Result<Option<Vec<f64>>> {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut fallback = None;
    for _ in 0..200 {
        let eta = random_direction(&mut rng, m.dim());
        let rep = classify(m, c, &eta, tol)?;
        if rep.is_degenerate() || !rep.gamma_degenerate.is_empty() {
            continue;
        }
        if rep.kind == DirectionKind::Parabolic {
            return Ok(Some(eta));
        }
        fallback.get_or_insert(eta);
    }
    Ok(fallback)
}

#[derive(Debug, Clone, Serialize)]
pub struct SugimotoSummary {
    pub sections: Option<Vec<fresnel::SectionOrder>>,
    pub indicatrix: Option<Value>,
    pub hexagonal_convexity: Option<fresnel::Convexity>,
    pub passed: bool,
}

pub fn sugimoto_summary(m: &MediumSpec, samples: usize) -> anyhow::Result<SugimotoSummary> {
    let two_pi = 2.0 * std::f64::consts::PI;
    match m {
        MediumSpec::Cubic { dim: 3, lambda, mu, tau } => {
            let sections = fresnel::cubic_section_orders(m, samples)?;
            let mut passed = sections.iter().all(|s| s.report.index == 2 && !s.report.uncertain);
            let chart = blowup::UniplanarChart::new(*lambda, *mu, *tau)?;
            let (mu, c, d) = (*mu, chart.c, chart.d);
            let mut ind = Vec::new();
            for upper in [false, true] {
                let corrected = fresnel::indicatrix(move |p| fresnel::uniplanar_form(mu, c, d, upper, p))
                    .map(|cv| fresnel::sugimoto_index(&cv, (0.0, two_pi), 4 * samples));
                let printed = fresnel::indicatrix(move |p| fresnel::uniplanar_form_printed(mu, c, d, upper, p))
                    .map(|cv| fresnel::sugimoto_index(&cv, (0.0, two_pi), 4 * samples));
                if let Ok(r) = &corrected {
                    passed &= (2..=4).contains(&r.index);
                }
                ind.push(json!({
                    "sheet": if upper { "upper" } else { "lower" },
                    "corrected": corrected.as_ref().map(|r| json!(r)).unwrap_or_else(|e| json!({ "open": e.to_string() })),
                    "printed": printed.as_ref().map(|r| json!(r)).unwrap_or_else(|e| json!({ "open": e.to_string() })),
                }));
            }
            Ok(SugimotoSummary {
                sections: Some(sections),
                indicatrix: Some(json!(ind)),
                hexagonal_convexity: None,
                passed,
            })
        }
        MediumSpec::Hexagonal { .. } => {
            let cv = fresnel::hexagonal_hyperbolic_convexity(m, samples.max(50))?;
            Ok(SugimotoSummary { sections: None, indicatrix: None, hexagonal_convexity: Some(cv), passed: cv.convex })
        }
        _ => bail!("contact orders are implemented for cubic and hexagonal media"),
    }
}

/// Spectrum check of the hexagonal reduction at each ψ: spec A(η) equals
/// the hyperbolic value together with the block eigenvalues.
pub fn hexagonal_rows(m: &MediumSpec, psis: &[f64]) -> anyhow::Result<(Vec<blowup::HexagonalReduction>, f64)> {
    let [t1, t2, l1, l2, mu] = hex_params(m)?;
    let mut worst = 0.0f64;
    let mut rows = Vec::new();
    for &psi in psis {
        let r = hexagonal_reduce(t1, t2, l1, l2, mu, psi)?;
        for phi in [0.0f64, 0.7, 2.9] {
            let eta = [phi.cos() * psi.cos(), phi.sin() * psi.cos(), psi.sin()];
            let numeric = fresnel::sorted_eigenvalues(m, &eta)?;
            let mut predicted = vec![r.hyperbolic, r.block_eigenvalues[0], r.block_eigenvalues[1]];
            predicted.sort_by(f64::total_cmp);
            for (a, b) in numeric.iter().zip(&predicted) {
                worst = worst.max((a - b).abs());
            }
        }
        rows.push(r);
    }
    Ok((rows, worst))
}

fn decay_summary(run: &DecayRun, exp: &DecayExperiment) -> Value {
    json!({
        "label": run.label,
        "exponent": run.fit.exponent,
        "ci": [run.fit.ci.0, run.fit.ci.1],
        "window": [exp.window.0, exp.window.1],
        "decades": run.fit.decades,
        "samples": run.fit.samples,
        "target": exp.target,
        "within_target": run.within_target(exp.target),
        "points": run.points,
        "defective_points": run.defective_points,
        "spectral_abscissa": run.spectral_abscissa,
        "spectral_abscissa_scaled": run.spectral_abscissa_scaled,
        "aliasing_fraction": run.aliasing,
        "warnings": run.warnings,
    })
}

fn run_validate_all(m: &MediumSpec, c: &CouplingConstants) -> anyhow::Result<(Vec<Value>, bool)> {
    let tol = Tolerances::default();
    let mut suites = Vec::new();
    let mut all = true;
    let mut push = |name: &str, pass: bool, detail: Value| {
        all &= pass;
        suites.push(json!({ "suite": name, "pass": pass, "detail": detail }));
    };
    let pos = m.positivity_check(2000);
    push("positivity", pos.positive, json!(pos));
    if !pos.positive {
        return Ok((suites, false));
    }
    let id = identity_sweep(m, c, 500, 3)?;
    push("trace_det_identities", id.max_trace_residual <= 1e-9 && id.max_det_residual <= 1e-9, json!(id));
    let (cs, _) = coupling_sweep(m, c, &tol, 500, 5)?;
    push(
        "coupling_normalization",
        cs.max_normalization_residual <= 1e-10 && cs.max_trace_rule_residual <= 1e-10,
        json!(cs),
    );
    let isotropic = matches!(m, MediumSpec::Isotropic { .. });
    // Skipped when every direction is degenerate (isotropic-like media).
    if let Some(eta) = expansion_direction(m, c, &tol)? {
        let small = check_small_xi(m, c, &eta, (1e-3, 1e-1), 8, &tol)?;
        push("small_xi_expansion", small.slope >= 2.9, json!({ "eta": eta, "check": small }));
        let large = check_large_xi(m, c, &eta, (10.0, 1e3), 8, &tol)?;
        push("large_xi_expansion", large.slope <= -0.9, json!({ "eta": eta, "check": large }));
    }
    let dirs = sphere_directions(m.dim(), 60);
    let rows = im_part_scan(m, c, &dirs, &log_space(1e-2, 1e2, 5), &tol)?;
    let worst = rows.iter().map(|r| -r.nu.im / r.nu.norm().max(1.0)).fold(f64::NEG_INFINITY, f64::max);
    push("im_nonnegative", worst <= 1e-10, json!({ "rows": rows.len(), "max_scaled_negative_im": worst }));
    if m.dim() == 3 && !isotropic {
        let rep = fresnel::detect_singularities(m, 3000, 0.05)?;
        let detail = json!({
            "conic": rep.count(SingularityKind::Conic),
            "uniplanar": rep.count(SingularityKind::Uniplanar),
            "other": rep.count(SingularityKind::Other),
            "curves": rep.curves.len(),
        });
        let pass = match m {
            MediumSpec::Cubic { lambda, mu, tau, .. }
                if (tau - lambda - 2.0 * mu).abs() > 1e-9 * tau.abs().max(1.0) =>
            {
                rep.count(SingularityKind::Conic) == 8
                    && rep.count(SingularityKind::Uniplanar) == 6
                    && rep.points.len() == 14
            }
            _ => true,
        };
        push("singularity_census", pass, detail);
    }
    if let MediumSpec::Cubic { dim: 3, lambda, mu, tau } = m {
        let (l, u, t) = (*lambda, *mu, *tau);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut worst = 0.0f64;
        for _ in 0..1000 {
            let e = random_direction(&mut rng, 3);
            let d = cubic_hyperbolic_det(l, u, t, &[e[0], e[1], e[2]])?;
            // Relative to the size of the Krylov columns, not to the value: p has
            // zeros on the symmetry planes and the ratio there is pure rounding.
            worst = worst.max((d.direct - d.closed_form).abs() / (t.abs() + l.abs() + 2.0 * u.abs()).powi(3));
        }
        push("cubic_hyperbolic_determinant", worst <= 1e-12, json!({ "max_scaled_residual": worst }));
        if (t - l - 2.0 * u).abs() > 1e-9 * t.abs().max(1.0) {
            let conic = blowup::validate_conic(l, u, t, c)?;
            push("blowup_conic", conic.passed(), json!(conic));
            let uni = blowup::validate_uniplanar(l, u, t, c)?;
            push("blowup_uniplanar", uni.passed(), json!(uni));
            let sg = sugimoto_summary(m, 400)?;
            push("sugimoto", sg.passed, json!(sg));
        }
    }
    if matches!(m, MediumSpec::Hexagonal { .. }) {
        let psis: Vec<f64> = (0..13).map(|k| std::f64::consts::FRAC_PI_2 * k as f64 / 12.0).collect();
        let (rows, worst) = hexagonal_rows(m, &psis)?;
        push("hexagonal_reduction", worst <= 1e-10, json!({ "max_spectrum_residual": worst, "rows": rows }));
        let sg = sugimoto_summary(m, 400)?;
        push("sugimoto", sg.passed, json!(sg));
    }
    Ok((suites, all))
}

/// Runs one subcommand without touching the disk.
pub fn execute(cmd: &Command) -> anyhow::Result<Outcome> {
    match cmd {
        Command::MediaCheck { medium, samples } => {
            let m = medium.medium()?;
            let rep = m.positivity_check(*samples);
            Ok(Outcome {
                summary: format!("{}: positive={} min_eig={:e}", m, rep.positive, rep.min_eig),
                passed: rep.positive,
                files: vec![("media_check.json".into(), pretty(&rep))],
                context: context(&m, None),
            })
        }
        Command::Classify { medium, tol, dir } => {
            let (m, c) = (medium.medium()?, medium.coupling()?);
            let eta = parse_dir(dir, m.dim())?;
            let rep = classify(&m, &c, &eta, &tol.tolerances())?;
            Ok(Outcome {
                summary: format!(
                    "kind={} hyperbolic={:?} cyclic_dim={}",
                    rep.kind.label(),
                    rep.hyperbolic_modes(),
                    rep.cyclic_dim
                ),
                passed: true,
                files: vec![("classify.json".into(), pretty(&rep))],
                context: context(&m, Some(&c)),
            })
        }
        Command::Couplings { medium, tol, samples, seed } => {
            let (m, c) = (medium.medium()?, medium.coupling()?);
            let (s, rows) = coupling_sweep(&m, &c, &tol.tolerances(), *samples, *seed)?;
            let mut csv = DirectionReport::csv_header(m.dim());
            csv.push('\n');
            for r in &rows {
                csv.push_str(&r.to_csv_row());
                csv.push('\n');
            }
            let passed = s.max_normalization_residual <= 1e-10 && s.max_trace_rule_residual <= 1e-10;
            Ok(Outcome {
                summary: format!(
                    "used {} of {}: |Σa²-1| ≤ {:e}, |b0+2Σb-1| ≤ {:e}",
                    s.used, s.samples, s.max_normalization_residual, s.max_trace_rule_residual
                ),
                passed,
                files: vec![("couplings.csv".into(), csv), ("couplings.json".into(), pretty(&s))],
                context: context(&m, Some(&c)),
            })
        }
        Command::ExpandSmall { medium, tol, dir, xi_min, xi_max, points, min_slope } => {
            let (m, c, t) = (medium.medium()?, medium.coupling()?, tol.tolerances());
            let eta = parse_dir(dir, m.dim())?;
            let rep = classify(&m, &c, &eta, &t)?;
            let exp = small_xi_expansion(&rep, &c, &t)?;
            let chk = check_small_xi(&m, &c, &eta, (*xi_min, *xi_max), *points, &t)?;
            let passed = chk.slope >= *min_slope;
            Ok(Outcome {
                summary: format!("residual slope {:.3} (need ≥ {min_slope})", chk.slope),
                passed,
                files: vec![(
                    "expand_small.json".into(),
                    pretty(&json!({ "expansion": exp, "check": chk, "pass": passed })),
                )],
                context: context(&m, Some(&c)),
            })
        }
        Command::ExpandLarge { medium, tol, dir, xi_min, xi_max, points, max_slope } => {
            let (m, c, t) = (medium.medium()?, medium.coupling()?, tol.tolerances());
            let eta = parse_dir(dir, m.dim())?;
            let rep = classify(&m, &c, &eta, &t)?;
            let exp = large_xi_expansion(&rep, &c)?;
            let chk = check_large_xi(&m, &c, &eta, (*xi_min, *xi_max), *points, &t)?;
            let passed = chk.slope <= *max_slope;
            Ok(Outcome {
                summary: format!("residual slope {:.3} (need ≤ {max_slope})", chk.slope),
                passed,
                files: vec![(
                    "expand_large.json".into(),
                    pretty(&json!({ "expansion": exp, "check": chk, "pass": passed })),
                )],
                context: context(&m, Some(&c)),
            })
        }
        Command::ImScan { medium, tol, directions, xi_min, xi_max, points } => {
            let (m, c) = (medium.medium()?, medium.coupling()?);
            let dirs = sphere_directions(m.dim(), *directions);
            let rows = im_part_scan(&m, &c, &dirs, &log_space(*xi_min, *xi_max, *points), &tol.tolerances())?;
            let mut csv = scan_header(m.dim());
            csv.push('\n');
            for r in &rows {
                csv.push_str(&r.to_csv());
                csv.push('\n');
            }
            let worst = rows.iter().map(|r| -r.nu.im / r.nu.norm().max(1.0)).fold(f64::NEG_INFINITY, f64::max);
            Ok(Outcome {
                summary: format!("{} eigenvalues, max scaled -Im ν = {worst:e}", rows.len()),
                passed: worst <= 1e-10,
                files: vec![("im_scan.csv".into(), csv)],
                context: context(&m, Some(&c)),
            })
        }
        Command::FresnelCut { medium, plane, normal, resolution } => {
            let m = medium.medium()?;
            let nv: Option<[f64; 3]> = match (normal, plane) {
                (Some(s), _) => {
                    let v = parse_vec(s)?;
                    if v.len() != 3 {
                        bail!("--normal needs three components");
                    }
                    Some([v[0], v[1], v[2]])
                }
                (None, Some(p)) => Some(match p.replace(' ', "").as_str() {
                    "x=0" => [1.0, 0.0, 0.0],
                    "y=0" => [0.0, 1.0, 0.0],
                    "z=0" => [0.0, 0.0, 1.0],
                    other => bail!("unknown plane `{other}`; use x=0, y=0, z=0 or --normal"),
                }),
                (None, None) => None,
            };
            let lines = fresnel::planar_cut(&m, nv.as_ref(), *resolution)?;
            Ok(Outcome {
                summary: format!("{} sheets, {} points each", lines.len(), *resolution),
                passed: true,
                files: vec![("fresnel_cut.csv".into(), fresnel::cut_csv(&lines))],
                context: context(&m, None),
            })
        }
        Command::FresnelSurface { medium, resolution } => {
            let m = medium.medium()?;
            let sheets = fresnel::sample_surface(&m, *resolution)?;
            let mut csv = String::from(fresnel::FresnelSample::csv_header());
            csv.push('\n');
            let mut worst = 0.0f64;
            for s in sheets.iter().flatten() {
                worst = worst.max(fresnel::membership_residual(&m, &s.point)?);
                csv.push_str(&s.to_csv());
                csv.push('\n');
            }
            Ok(Outcome {
                summary: format!("{} sheets, max membership residual {worst:e}", sheets.len()),
                passed: worst <= 1e-10,
                files: vec![("fresnel_surface.csv".into(), csv)],
                context: context(&m, None),
            })
        }
        Command::Singularities { medium, resolution, tol } => {
            let m = medium.medium()?;
            let rep = fresnel::detect_singularities(&m, *resolution, *tol)?;
            Ok(Outcome {
                summary: format!(
                    "conic {} uniplanar {} other {} curves {}{}",
                    rep.count(SingularityKind::Conic),
                    rep.count(SingularityKind::Uniplanar),
                    rep.count(SingularityKind::Other),
                    rep.curves.len(),
                    if rep.global_degenerate { " (every direction degenerate)" } else { "" }
                ),
                passed: true,
                files: vec![("singularities.json".into(), pretty(&rep))],
                context: context(&m, None),
            })
        }
        Command::Sugimoto { medium, samples } => {
            let m = medium.medium()?;
            let s = sugimoto_summary(&m, *samples)?;
            let summary = match (&s.sections, &s.hexagonal_convexity) {
                (Some(sec), _) => {
                    format!("section indices {:?}", sec.iter().map(|x| x.report.index).collect::<Vec<_>>())
                }
                (_, Some(cv)) => {
                    format!("genuine hyperbolic sheet convex={} min curvature {:e}", cv.convex, cv.min_curvature)
                }
                _ => String::new(),
            };
            Ok(Outcome {
                summary,
                passed: s.passed,
                files: vec![("sugimoto.json".into(), pretty(&s))],
                context: context(&m, None),
            })
        }
        Command::BlowupConic { medium } => {
            let (m, c) = (medium.medium()?, medium.coupling()?);
            let (l, u, t) = cubic_params(&m)?;
            let rep = blowup::validate_conic(l, u, t, &c)?;
            let failed = rep.rows.iter().filter(|r| !r.pass).count();
            Ok(Outcome {
                summary: format!(
                    "{} checks, {failed} failed; split coefficient {:.6}",
                    rep.rows.len(),
                    blowup::ConicChart::new(l, u, t)?.split()
                ),
                passed: rep.passed(),
                files: vec![("blowup_conic.json".into(), pretty(&rep))],
                context: context(&m, Some(&c)),
            })
        }
        Command::BlowupUniplanar { medium } => {
            let (m, c) = (medium.medium()?, medium.coupling()?);
            let (l, u, t) = cubic_params(&m)?;
            let rep = blowup::validate_uniplanar(l, u, t, &c)?;
            let chart = blowup::UniplanarChart::new(l, u, t)?;
            let failed = rep.rows.iter().filter(|r| !r.pass).count();
            Ok(Outcome {
                summary: format!("{} checks, {failed} failed; C = {:.6}, D = {:.6}", rep.rows.len(), chart.c, chart.d),
                passed: rep.passed(),
                files: vec![("blowup_uniplanar.json".into(), pretty(&rep))],
                context: context(&m, Some(&c)),
            })
        }
        Command::Hexagonal { medium, psi } => {
            let m = medium.medium()?;
            let psis = match psi {
                Some(s) => parse_vec(s)?,
                None => (0..13).map(|k| std::f64::consts::FRAC_PI_2 * k as f64 / 12.0).collect(),
            };
            let (rows, worst) = hexagonal_rows(&m, &psis)?;
            let first = rows.first();
            Ok(Outcome {
                summary: format!(
                    "max spectrum residual {worst:e}; degenerate η3² = {}, closed form gives {}",
                    opt(first.and_then(|r| r.degenerate_latitude)),
                    opt(first.and_then(|r| r.closed_form_latitude))
                ),
                passed: worst <= 1e-10,
                files: vec![(
                    "hexagonal.json".into(),
                    pretty(&json!({ "max_spectrum_residual": worst, "rows": rows })),
                )],
                context: context(&m, None),
            })
        }
        Command::Evolve { preset, config, refined } => {
            let exp: DecayExperiment = match (config, preset) {
                (Some(p), _) => {
                    let s = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
                    serde_json::from_str(&s)
                        .with_context(|| format!("malformed experiment document {}", p.display()))?
                }
                (None, Some(name)) => name.parse::<DecayPreset>()?.experiment(*refined),
                (None, None) => bail!("evolve needs --preset or --config"),
            };
            let run = exp.run()?;
            let passed = run.within_target(exp.target);
            Ok(Outcome {
                summary: format!(
                    "{}: exponent {:.4} [{:.4}, {:.4}] over t ∈ [{}, {}]{}",
                    run.label,
                    run.fit.exponent,
                    run.fit.ci.0,
                    run.fit.ci.1,
                    exp.window.0,
                    exp.window.1,
                    exp.target.map(|(e, t)| format!(", target {e} ± {t}")).unwrap_or_default()
                ),
                passed,
                files: vec![
                    ("evolve.csv".into(), run.trace.to_csv()),
                    ("evolve.json".into(), pretty(&json!({ "experiment": exp, "result": decay_summary(&run, &exp) }))),
                ],
                context: json!({ "experiment": exp }),
            })
        }
        Command::DecayScan { presets, max_change } => {
            let list: Vec<DecayPreset> = match presets {
                Some(s) => s.split(',').map(|p| p.trim().parse::<DecayPreset>()).collect::<Result<_, _>>()?,
                None => DecayPreset::ALL.to_vec(),
            };
            let mut files = Vec::new();
            let mut rows = Vec::new();
            let mut passed = true;
            let mut lines = Vec::new();
            for p in list {
                let (e0, e1) = (p.experiment(false), p.experiment(true));
                let (r0, r1) = (e0.run()?, e1.run()?);
                let change = (r1.fit.exponent - r0.fit.exponent).abs();
                let gated = e0.target.is_some();
                let ok = !gated || (r0.within_target(e0.target) && r1.within_target(e1.target) && change < *max_change);
                passed &= ok;
                lines.push(format!("{} {:.3}/{:.3}", p.name(), r0.fit.exponent, r1.fit.exponent));
                let mut csv = r0.trace.to_csv();
                csv.push_str(r1.trace.to_csv().split_once('\n').map(|x| x.1).unwrap_or(""));
                files.push((format!("decay_{}.csv", p.name().replace('-', "_")), csv));
                rows.push(json!({
                    "preset": p.name(),
                    "base": decay_summary(&r0, &e0),
                    "refined": decay_summary(&r1, &e1),
                    "doubling_change": change,
                    "gated": gated,
                    "pass": ok,
                }));
            }
            files.push(("decay_scan.json".into(), pretty(&json!({ "max_change": max_change, "runs": rows }))));
            Ok(Outcome { summary: lines.join("; "), passed, files, context: json!({}) })
        }
        Command::ValidateAll { medium } => {
            let (m, c) = (medium.medium()?, medium.coupling()?);
            let (suites, all) = run_validate_all(&m, &c)?;
            let failed: Vec<&str> =
                suites.iter().filter(|s| s["pass"] == false).filter_map(|s| s["suite"].as_str()).collect();
            Ok(Outcome {
                summary: if failed.is_empty() {
                    format!("{} suites passed", suites.len())
                } else {
                    format!("{} suites, failed: {}", suites.len(), failed.join(", "))
                },
                passed: all,
                files: vec![("validate_all.json".into(), pretty(&json!({ "suites": suites, "pass": all })))],
                context: context(&m, Some(&c)),
            })
        }
    }
}

/// Writes the outcome files and `<command>.manifest.json` into `dir`.
pub fn write_outcome(dir: &Path, cli: &Cli, out: &Outcome) -> anyhow::Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut written = Vec::new();
    for (name, contents) in &out.files {
        let p = dir.join(name);
        fs::write(&p, contents).with_context(|| format!("writing {}", p.display()))?;
        written.push(p);
    }
    let manifest = json!({
        "tool": "anitherm",
        "version": env!("CARGO_PKG_VERSION"),
        "command": cli.command.name(),
        "config": &cli.command,
        "context": out.context,
        "outputs": out.files.iter().map(|f| f.0.clone()).collect::<Vec<_>>(),
        "pass": out.passed,
    });
    let p = dir.join(format!("{}.manifest.json", cli.command.name()));
    fs::write(&p, pretty(&manifest)).with_context(|| format!("writing {}", p.display()))?;
    written.push(p);
    Ok(written)
}

/// Exit codes: 0 success, 2 validation failure, 1 usage or runtime error.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    if cli.workers > 0 {
        // Fails only when a pool already exists, as in repeated in-process calls.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(cli.workers).build_global();
    }
    let out = match execute(&cli.command) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e:#}");
            return 1;
        }
    };
    if let Err(e) = write_outcome(&cli.out_dir, &cli, &out) {
        eprintln!("error: {e:#}");
        return 1;
    }
    println!("{} {}: {}", cli.command.name(), if out.passed { "ok" } else { "FAILED" }, out.summary);
    if out.passed {
        0
    } else {
        2
    }
}
