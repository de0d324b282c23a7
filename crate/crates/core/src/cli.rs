//! Command-line front end: configuration, subcommands, sidecars and exit codes.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::basis::{disk_indices, norms, psi_kappa, psi_over_mu, zernike, zernike_kappa, BasisIndex, CoeffTable, ZernikeTable};
use crate::boundary::{moment_residuals, spectral_p_minus, BoundaryOperators, Family, PqSeries};
use crate::error::{Error, Result};
use crate::geometry::{exit_time, geodesic_point, scattering, sig, sig_inverse, CurvatureParam, FanBeamPoint};
use crate::io;
use crate::xray::{
    add_noise, adjoint_sharp, analyze, invert, sigma, sinogram, BoundaryGrid, DiskGrid, ForwardQuad, Measure, Regularization,
    ZernikeExpansion,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_IO: i32 = 4;

/// Curvatures beyond this magnitude get a conditioning warning.
const NEAR_DEGENERATE: f64 = 0.99;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseSpec {
    pub seed: u64,
    /// Standard deviation relative to the RMS of the clean sinogram.
    pub level: f64,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        Self { seed: 0, level: 0.0 }
    }
}

/// One JSON document describing a run. Missing keys take their defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub kappa: f64,
    /// Band limit; `-1` is the empty range.
    pub nmax: i64,
    pub n_beta: usize,
    pub n_alpha: usize,
    pub n_rho: usize,
    pub n_omega: usize,
    pub fiber_fft: usize,
    pub fiber_nodes: usize,
    pub forward_nodes: usize,
    pub forward_panels: usize,
    pub kpad: usize,
    /// Moment residuals below `moment_threshold * ||u||` count as in range.
    pub moment_threshold: f64,
    pub noise: NoiseSpec,
    pub regularization: Regularization,
    /// `"unit"` or a coefficient file.
    pub phantom: String,
    pub input: Option<PathBuf>,
    pub output: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            kappa: 0.0,
            nmax: 6,
            n_beta: 256,
            n_alpha: 128,
            n_rho: 128,
            n_omega: 256,
            fiber_fft: 1024,
            fiber_nodes: 512,
            forward_nodes: 16,
            forward_panels: 4,
            kpad: 3,
            moment_threshold: 1e-6,
            noise: NoiseSpec::default(),
            regularization: Regularization::Truncation,
            phantom: "unit".into(),
            input: None,
            output: PathBuf::from("out"),
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("line {}: {e}", e.line())))
    }

    /// Compact serialization; the config hash is taken over these bytes.
    pub fn canonical(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    pub fn hash(&self) -> String {
        hex(&Sha256::digest(self.canonical().as_bytes()))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !self.kappa.is_finite() || self.kappa.abs() >= 1.0 {
            return bad(format!("kappa = {} must lie in (-1, 1)", self.kappa));
        }
        if self.nmax < -1 {
            return bad(format!("nmax = {} must be >= -1", self.nmax));
        }
        let sizes = [
            ("n_beta", self.n_beta),
            ("n_alpha", self.n_alpha),
            ("n_rho", self.n_rho),
            ("n_omega", self.n_omega),
            ("fiber_fft", self.fiber_fft),
            ("fiber_nodes", self.fiber_nodes),
            ("forward_nodes", self.forward_nodes),
            ("forward_panels", self.forward_panels),
            ("kpad", self.kpad),
        ];
        if let Some((name, _)) = sizes.iter().find(|(_, v)| *v == 0) {
            return bad(format!("{name} must be positive"));
        }
        if self.n_alpha % 2 != 0 {
            return bad(format!("n_alpha = {} must be even", self.n_alpha));
        }
        if !self.fiber_fft.is_power_of_two() || self.fiber_fft < 4 {
            return bad(format!("fiber_fft = {} must be a power of two >= 4", self.fiber_fft));
        }
        if !(self.noise.level.is_finite() && self.noise.level >= 0.0) {
            return bad(format!("noise level {} must be finite and >= 0", self.noise.level));
        }
        if !(self.moment_threshold.is_finite() && self.moment_threshold > 0.0) {
            return bad(format!("moment_threshold {} must be positive", self.moment_threshold));
        }
        if let Regularization::SpectralCutoff { threshold } = self.regularization {
            if !(threshold.is_finite() && threshold > 0.0) {
                return bad(format!("spectral cutoff threshold {threshold} must be positive"));
            }
        }
        Ok(())
    }

    pub fn curvature(&self) -> Result<CurvatureParam> {
        CurvatureParam::new(self.kappa).map_err(|e| Error::Config(e.to_string()))
    }

    /// Band limit of commands that need at least one mode.
    fn band_limit(&self) -> Result<usize> {
        usize::try_from(self.nmax).map_err(|_| Error::Config(format!("this command needs nmax >= 0, got {}", self.nmax)))
    }

    fn boundary_template(&self, cp: &CurvatureParam) -> Result<BoundaryGrid> {
        BoundaryGrid::new(self.n_beta, self.n_alpha, cp).map_err(|e| Error::Config(e.to_string()))
    }

    fn forward_quad(&self) -> Result<ForwardQuad> {
        ForwardQuad::new(self.forward_nodes, self.forward_panels)
    }

    fn input_path(&self) -> Result<&Path> {
        self.input
            .as_deref()
            .ok_or_else(|| Error::Config("this command needs an input sinogram (--input or \"input\")".into()))
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Parser)]
#[command(name = "geoxray", version, about = "Geodesic X-ray transform on constant-curvature disks")]
pub struct Cli {
    #[command(flatten)]
    pub overrides: Overrides,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Overrides {
    /// JSON run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub kappa: Option<f64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub nmax: Option<i64>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Relative noise level added to simulated sinograms.
    #[arg(long, global = true)]
    pub noise: Option<f64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Radial profiles of the deformed Zernike functions and fiber profiles of psi.
    Basis,
    /// Simulate a sinogram of a phantom.
    Forward {
        /// "unit" or a coefficient file.
        #[arg(long)]
        phantom: Option<String>,
    },
    /// Truncated-SVD reconstruction from a sinogram.
    Invert {
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Orthogonal projection of a sinogram onto the range.
    Project {
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Moment conditions of a sinogram.
    Moments {
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Singular values up to nmax.
    Spectrum,
    /// Reduced-size invariant checks.
    Selftest,
}

/// Loads the config file (or defaults) and applies flag overrides.
pub fn resolve_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.overrides.config {
        Some(p) => RunConfig::from_json(&io::read_text(p)?).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", p.display())),
            other => other,
        })?,
        None => RunConfig::default(),
    };
    let o = &cli.overrides;
    if let Some(k) = o.kappa {
        cfg.kappa = k;
    }
    if let Some(n) = o.nmax {
        cfg.nmax = n;
    }
    if let Some(p) = &o.out {
        cfg.output = p.clone();
    }
    if let Some(s) = o.seed {
        cfg.noise.seed = s;
    }
    if let Some(l) = o.noise {
        cfg.noise.level = l;
    }
    match &cli.command {
        Command::Forward { phantom: Some(p) } => cfg.phantom = p.clone(),
        Command::Invert { input: Some(p) } | Command::Project { input: Some(p) } | Command::Moments { input: Some(p) } => {
            cfg.input = Some(p.clone())
        }
        _ => {}
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_)
        | Error::InvalidCurvature(_)
        | Error::InvalidGrid(_)
        | Error::InvalidIndex { .. }
        | Error::GridMismatch(_)
        | Error::Aliasing { .. } => EXIT_CONFIG,
        Error::Io { .. } | Error::Parse { .. } => EXIT_IO,
        _ => EXIT_NUMERICAL,
    }
}

/// Runs the parsed command line and returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    let cfg = match resolve_config(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return exit_code(&e);
        }
    };
    let result = match cli.command {
        Command::Basis => cmd_basis(&cfg),
        Command::Forward { .. } => cmd_forward(&cfg),
        Command::Invert { .. } => cmd_invert(&cfg),
        Command::Project { .. } => cmd_project(&cfg),
        Command::Moments { .. } => cmd_moments(&cfg),
        Command::Spectrum => cmd_spectrum(&cfg),
        Command::Selftest => cmd_selftest(&cfg),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn write_config(cfg: &RunConfig) -> Result<()> {
    io::write_text(&cfg.output.join("config.json"), &cfg.canonical())
}

fn write_sidecar(cfg: &RunConfig, name: &str, mut body: serde_json::Value) -> Result<()> {
    body["command"] = json!(name);
    body["config_hash"] = json!(cfg.hash());
    let text = serde_json::to_string_pretty(&body).expect("sidecar serializes") + "\n";
    io::write_text(&cfg.output.join(format!("{name}.json")), &text)
}

fn quadrature_levels(cfg: &RunConfig) -> serde_json::Value {
    json!({
        "forward_nodes_per_panel": cfg.forward_nodes,
        "forward_max_panels": cfg.forward_panels,
        "fiber_nodes": cfg.fiber_nodes,
        "fiber_fft": cfg.fiber_fft,
        "alpha_nodes": cfg.n_alpha,
        "beta_nodes": cfg.n_beta,
        "disk_nodes": [cfg.n_rho, cfg.n_omega],
    })
}

fn warn_conditioning(cp: &CurvatureParam) {
    if cp.kappa().abs() > NEAR_DEGENERATE {
        eprintln!(
            "warning: near-degenerate geometry at kappa = {} (lambda = {:.1e}); quadrature tolerances may not be met",
            cp.kappa(),
            cp.lambda()
        );
    }
}

pub fn cmd_basis(cfg: &RunConfig) -> Result<i32> {
    let cp = cfg.curvature()?;
    warn_conditioning(&cp);
    write_config(cfg)?;
    let nmax = usize::try_from(cfg.nmax).ok();
    let table = nmax.map(ZernikeTable::new);
    let mut radial = String::from("n,k,rho,re,im\n");
    let mut fiber = String::from("n,k,alpha,re,im\n");
    if let (Some(nmax), Some(table)) = (nmax, &table) {
        for idx in disk_indices(nmax) {
            for i in 0..=cfg.n_rho {
                let rho = i as f64 / cfg.n_rho as f64;
                let v = table.zernike_kappa(idx, Complex64::new(rho, 0.0), &cp)?;
                radial.push_str(&format!("{},{},{:.16e},{:.16e},{:.16e}\n", idx.n, idx.k, rho, v.re, v.im));
            }
            for j in 0..=cfg.n_alpha {
                let alpha = -PI / 2.0 + PI * j as f64 / cfg.n_alpha as f64;
                let v = psi_kappa(idx, 0.0, alpha, &cp);
                fiber.push_str(&format!("{},{},{:.16e},{:.16e},{:.16e}\n", idx.n, idx.k, alpha, v.re, v.im));
            }
        }
    }
    io::write_text(&cfg.output.join("basis_radial.csv"), &radial)?;
    io::write_text(&cfg.output.join("basis_fiber.csv"), &fiber)?;
    write_sidecar(
        cfg,
        "basis",
        json!({"modes": nmax.map_or(0, crate::basis::disk_count), "radial_samples": cfg.n_rho + 1, "fiber_samples": cfg.n_alpha + 1}),
    )?;
    Ok(EXIT_OK)
}

/// The phantom named by the config, as a disk function.
fn phantom(cfg: &RunConfig, cp: &CurvatureParam) -> Result<Box<dyn crate::xray::DiskFunction>> {
    if cfg.phantom == "unit" {
        return Ok(Box::new(|_z: Complex64| Complex64::new(1.0, 0.0)));
    }
    let c = io::read_coeffs(Path::new(&cfg.phantom))?;
    if c.kappa != cfg.kappa {
        return Err(Error::Config(format!(
            "coefficient file {} is for kappa = {}, the run uses kappa = {}",
            cfg.phantom, c.kappa, cfg.kappa
        )));
    }
    Ok(Box::new(ZernikeExpansion::new(&c, cp, true)))
}

pub fn cmd_forward(cfg: &RunConfig) -> Result<i32> {
    let cp = cfg.curvature()?;
    warn_conditioning(&cp);
    let f = phantom(cfg, &cp)?;
    let template = cfg.boundary_template(&cp)?;
    write_config(cfg)?;
    let mut g = sinogram(f.as_ref(), &template, &cp, &cfg.forward_quad()?)?;
    if cfg.noise.level > 0.0 {
        add_noise(&mut g, cfg.noise.level, cfg.noise.seed);
    }
    io::write_text(&cfg.output.join("sinogram.csv"), &io::sinogram_csv(&g))?;
    write_sidecar(
        cfg,
        "forward",
        json!({
            "phantom": cfg.phantom,
            "quadrature": quadrature_levels(cfg),
            "noise": {"seed": cfg.noise.seed, "level": cfg.noise.level},
            "sinogram_norm": g.norm(),
        }),
    )?;
    Ok(EXIT_OK)
}

pub fn cmd_invert(cfg: &RunConfig) -> Result<i32> {
    let cp = cfg.curvature()?;
    warn_conditioning(&cp);
    let nmax = cfg.band_limit()?;
    let g = io::read_sinogram(cfg.input_path()?, &cfg.boundary_template(&cp)?)?;
    let disk = DiskGrid::new(cfg.n_rho, cfg.n_omega, &cp, Measure::Vol)?;
    write_config(cfg)?;
    let inv = invert(&g, nmax, &cp, cfg.regularization, &disk)?;
    let moments = moment_residuals(&g, nmax, cfg.kpad, &cp);
    io::write_text(&cfg.output.join("reconstruction.csv"), &io::disk_csv(&inv.disk))?;
    io::write_text(&cfg.output.join("coefficients.json"), &io::coeff_json(&inv.solution))?;
    let modes: Vec<_> = inv
        .data
        .iter()
        .map(|(idx, d)| {
            let c = inv.solution.get(idx);
            json!({
                "n": idx.n, "k": idx.k, "sigma": sigma(idx.n, &cp),
                "data_re": d.re, "data_im": d.im, "coeff_re": c.re, "coeff_im": c.im,
            })
        })
        .collect();
    let data_norm = g.norm();
    write_sidecar(
        cfg,
        "invert",
        json!({
            "nmax": nmax,
            "regularization": cfg.regularization,
            "accepted_modes": inv.accepted,
            "residual": inv.residual,
            "relative_residual": if data_norm > 0.0 { inv.residual / data_norm } else { 0.0 },
            "discarded_energy": inv.discarded_energy,
            "noise_amplification": inv.noise_amplification,
            "moments": {
                "threshold": cfg.moment_threshold,
                "max_relative": moments.max_relative(),
                "in_range": moments.in_range(cfg.moment_threshold),
            },
            "quadrature": quadrature_levels(cfg),
            "modes": modes,
        }),
    )?;
    Ok(EXIT_OK)
}

pub fn cmd_project(cfg: &RunConfig) -> Result<i32> {
    let cp = cfg.curvature()?;
    warn_conditioning(&cp);
    let g = io::read_sinogram(cfg.input_path()?, &cfg.boundary_template(&cp)?)?;
    let ops = BoundaryOperators::new(&cp, cfg.fiber_fft)?;
    write_config(cfg)?;
    let proj = ops.project_to_range(&g)?;
    io::write_text(&cfg.output.join("projected.csv"), &io::sinogram_csv(&proj.projected))?;
    println!("relative residual {:.6e}", proj.relative_change);
    write_sidecar(
        cfg,
        "project",
        json!({
            "relative_residual": proj.relative_change,
            "removed_odd_norm": proj.removed_odd_norm,
            "quadrature": quadrature_levels(cfg),
        }),
    )?;
    Ok(EXIT_OK)
}

pub fn cmd_moments(cfg: &RunConfig) -> Result<i32> {
    let cp = cfg.curvature()?;
    warn_conditioning(&cp);
    let nmax = cfg.band_limit()?;
    let g = io::read_sinogram(cfg.input_path()?, &cfg.boundary_template(&cp)?)?;
    write_config(cfg)?;
    let report = moment_residuals(&g, nmax, cfg.kpad, &cp);
    io::write_text(&cfg.output.join("moments.csv"), &io::moments_csv(&report))?;
    let in_range = report.in_range(cfg.moment_threshold);
    println!("in range: {in_range} (max relative residual {:.6e})", report.max_relative());
    write_sidecar(
        cfg,
        "moments",
        json!({
            "nmax": nmax,
            "kpad": cfg.kpad,
            "threshold": cfg.moment_threshold,
            "data_norm": report.data_norm,
            "max_relative": report.max_relative(),
            "in_range": in_range,
        }),
    )?;
    Ok(EXIT_OK)
}

pub fn cmd_spectrum(cfg: &RunConfig) -> Result<i32> {
    let cp = cfg.curvature()?;
    write_config(cfg)?;
    let mut s = String::from("n,k,sigma\n");
    if let Ok(nmax) = usize::try_from(cfg.nmax) {
        for idx in disk_indices(nmax) {
            s.push_str(&format!("{},{},{:.16e}\n", idx.n, idx.k, sigma(idx.n, &cp)));
        }
    }
    io::write_text(&cfg.output.join("spectrum.csv"), &s)?;
    write_sidecar(cfg, "spectrum", json!({"nmax": cfg.nmax}))?;
    Ok(EXIT_OK)
}

/// One row of the self-test table.
#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub name: &'static str,
    pub measured: f64,
    pub tolerance: f64,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

type Check = (&'static str, f64, fn(&CurvatureParam, &RunConfig) -> Result<f64>);

const CHECKS: &[Check] = &[
    ("scattering endpoint", 1e-9, check_scattering),
    ("signature inverse", 1e-12, check_sig_inverse),
    ("psi norms, n <= 4", 1e-9, check_psi_norms),
    ("Z^kappa norms, n <= 4", 1e-9, check_zernike_norms),
    ("SVD diagonal, n <= 3", 1e-6, check_svd),
    ("adjoint kernel", 1e-7, check_adjoint_kernel),
    ("P_- spectral rule", 1e-6, check_p_minus),
    ("C_- P_- = 0", 1e-7, check_c_minus_p_minus),
    ("projector idempotent", 1e-8, check_idempotent),
    ("range moments", 1e-7, check_range_moments),
    ("round-trip inversion", 1e-6, check_round_trip),
    ("Euclidean degeneration", 1e-8, check_euclidean_limit),
];

pub fn run_checks(cp: &CurvatureParam, cfg: &RunConfig) -> Vec<CheckResult> {
    CHECKS
        .iter()
        .map(|&(name, tolerance, f)| match f(cp, cfg) {
            Ok(m) => CheckResult {
                name,
                measured: m,
                tolerance,
                pass: m < tolerance,
                error: None,
            },
            Err(e) => CheckResult {
                name,
                measured: f64::NAN,
                tolerance,
                pass: false,
                error: Some(e.to_string()),
            },
        })
        .collect()
}

pub fn cmd_selftest(cfg: &RunConfig) -> Result<i32> {
    let cp = cfg.curvature()?;
    warn_conditioning(&cp);
    let results = run_checks(&cp, cfg);
    println!("{:<26} {:>12} {:>10}  result", "check", "measured", "tolerance");
    for r in &results {
        println!(
            "{:<26} {:>12.3e} {:>10.1e}  {}",
            r.name,
            r.measured,
            r.tolerance,
            if r.pass { "PASS" } else { "FAIL" }
        );
        if let Some(e) = &r.error {
            println!("    {e}");
        }
    }
    let all = results.iter().all(|r| r.pass);
    write_config(cfg)?;
    write_sidecar(cfg, "selftest", json!({"kappa": cp.kappa(), "all_pass": all, "checks": results}))?;
    Ok(if all { EXIT_OK } else { EXIT_NUMERICAL })
}

fn sample_rng() -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(0x5e1f)
}

fn check_scattering(cp: &CurvatureParam, _: &RunConfig) -> Result<f64> {
    let mut rng = sample_rng();
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let bp = FanBeamPoint::new(rng.random_range(-PI..PI), rng.random_range(-1.5..1.5));
        let end = geodesic_point(bp, exit_time(bp.alpha, cp)?, cp)?;
        let out = scattering(bp, cp);
        worst = worst.max((end - Complex64::cis(out.beta)).norm());
    }
    Ok(worst)
}

fn check_sig_inverse(cp: &CurvatureParam, _: &RunConfig) -> Result<f64> {
    Ok((0..=200)
        .map(|j| -PI / 2.0 + PI * j as f64 / 200.0)
        .map(|a| (sig_inverse(sig(a, cp), cp) - a).abs())
        .fold(0.0, f64::max))
}

fn check_psi_norms(cp: &CurvatureParam, _: &RunConfig) -> Result<f64> {
    let g = BoundaryGrid::new(16, 32, cp)?;
    let family: Vec<BasisIndex> = (0..=4).flat_map(|n| (-2..=n + 2).map(move |k| BasisIndex::new(n, k))).collect();
    let grids: Vec<BoundaryGrid> = family
        .iter()
        .map(|&i| {
            let cp = *cp;
            g.zeros_like().sampled(&move |b: f64, a: f64| psi_kappa(i, b, a, &cp))
        })
        .collect();
    let mut worst: f64 = 0.0;
    for (a, ga) in family.iter().zip(&grids) {
        for (b, gb) in family.iter().zip(&grids) {
            let expected = if a == b { norms(*a, cp).0 } else { 0.0 };
            worst = worst.max((ga.inner(gb)? - expected).norm());
        }
    }
    Ok(worst)
}

fn check_zernike_norms(cp: &CurvatureParam, _: &RunConfig) -> Result<f64> {
    let template = DiskGrid::new(96, 32, cp, Measure::WeightedVol)?;
    let idx: Vec<BasisIndex> = disk_indices(4).collect();
    let mut grids = Vec::new();
    for &i in &idx {
        let cp = *cp;
        grids.push(template.zeros_like().sampled(&move |z: Complex64| zernike_kappa(i, z, &cp).unwrap_or_default()));
    }
    let mut worst: f64 = 0.0;
    for (a, ga) in idx.iter().zip(&grids) {
        for (b, gb) in idx.iter().zip(&grids) {
            let expected = if a == b { norms(*a, cp).1 } else { 0.0 };
            worst = worst.max((ga.inner(gb)? - expected).norm() / expected.max(1.0));
        }
    }
    Ok(worst)
}

fn check_svd(cp: &CurvatureParam, cfg: &RunConfig) -> Result<f64> {
    let template = BoundaryGrid::new(8, 32, cp)?;
    let quad = cfg.forward_quad()?;
    let mut worst: f64 = 0.0;
    for idx in disk_indices(3) {
        let g = sinogram(&ZernikeExpansion::single(idx, cp, true)?, &template, cp, &quad)?;
        let c = analyze(&g, 3, cp)?;
        for (j, v) in c.iter() {
            let expected = if j == idx { sigma(idx.n, cp) } else { 0.0 };
            worst = worst.max((v - expected).norm());
        }
    }
    Ok(worst)
}

fn check_adjoint_kernel(cp: &CurvatureParam, cfg: &RunConfig) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for n in 0..=2i64 {
        for k in [-1, n + 1] {
            let idx = BasisIndex::new(n, k);
            for z in [Complex64::new(0.3, 0.1), Complex64::new(-0.5, 0.4), Complex64::new(0.0, -0.7)] {
                let cp2 = *cp;
                let v = adjoint_sharp(&move |b: f64, a: f64| psi_over_mu(idx, b, a, &cp2), z, cp, cfg.fiber_nodes)?;
                worst = worst.max(v.norm());
            }
        }
    }
    Ok(worst)
}

fn random_series(rng: &mut ChaCha8Rng, family: Family, bound: i64) -> PqSeries {
    let mut s = PqSeries::new(family);
    for p in -bound..=bound {
        for q in -bound..=bound {
            s.insert(p, q, Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        }
    }
    s
}

fn small_operator_setup(cp: &CurvatureParam, cfg: &RunConfig) -> Result<(BoundaryOperators, BoundaryGrid)> {
    // strongly curved disks need a finer fiber FFT than the default
    let nf = cfg.fiber_fft.max(2048);
    Ok((BoundaryOperators::new(cp, nf)?, BoundaryGrid::new(8, 64, cp)?))
}

fn check_p_minus(cp: &CurvatureParam, cfg: &RunConfig) -> Result<f64> {
    let (ops, g) = small_operator_setup(cp, cfg)?;
    let v = random_series(&mut sample_rng(), Family::V, 3);
    let vg = v.synthesize(&g, cp);
    let expected = spectral_p_minus(&v)?.synthesize(&g, cp);
    Ok(ops.p_minus(&vg)?.difference(&expected)?.norm() / expected.norm().max(vg.norm()))
}

fn check_c_minus_p_minus(cp: &CurvatureParam, cfg: &RunConfig) -> Result<f64> {
    let (ops, g) = small_operator_setup(cp, cfg)?;
    let vg = random_series(&mut sample_rng(), Family::V, 3).synthesize(&g, cp);
    Ok(ops.c_minus(&ops.p_minus(&vg)?)?.norm() / vg.norm())
}

fn check_idempotent(cp: &CurvatureParam, cfg: &RunConfig) -> Result<f64> {
    let (ops, g) = small_operator_setup(cp, cfg)?;
    let u = random_series(&mut sample_rng(), Family::U, 3).synthesize(&g, cp);
    let once = ops.project_to_range(&u)?.projected;
    let twice = ops.project_to_range(&once)?.projected;
    Ok(twice.difference(&once)?.norm() / u.norm())
}

fn check_range_moments(cp: &CurvatureParam, cfg: &RunConfig) -> Result<f64> {
    let template = BoundaryGrid::new(16, 32, cp)?;
    let f = ZernikeExpansion::single(BasisIndex::new(2, 1), cp, true)?;
    let u = sinogram(&f, &template, cp, &cfg.forward_quad()?)?;
    Ok(moment_residuals(&u, 4, 2, cp).max_relative())
}

fn check_round_trip(cp: &CurvatureParam, cfg: &RunConfig) -> Result<f64> {
    let mut rng = sample_rng();
    let mut c = CoeffTable::new(cp.kappa(), 3);
    for idx in disk_indices(3) {
        c.insert(idx, Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))?;
    }
    let f = ZernikeExpansion::new(&c, cp, true);
    let g = sinogram(&f, &BoundaryGrid::new(8, 32, cp)?, cp, &cfg.forward_quad()?)?;
    let disk = DiskGrid::new(24, 32, cp, Measure::Vol)?;
    let inv = invert(&g, 3, cp, Regularization::Truncation, &disk)?;
    let truth = disk.zeros_like().sampled(&f);
    Ok(inv.disk.difference(&truth)?.norm() / truth.norm())
}

/// Independent of the configured curvature: `kappa = 1e-12` against the
/// closed Euclidean formulas.
fn check_euclidean_limit(_: &CurvatureParam, _: &RunConfig) -> Result<f64> {
    let tiny = CurvatureParam::new(1e-12)?;
    let mut worst: f64 = 0.0;
    for j in 0..=20 {
        let a = -1.5 + 3.0 * j as f64 / 20.0;
        worst = worst.max((sig(a, &tiny) - a).abs());
        worst = worst.max((exit_time(a, &tiny)? - 2.0 * a.cos()).abs());
        for idx in disk_indices(3) {
            let e = Complex64::cis((idx.n + 1) as f64 * a);
            let g_n = e + (-1f64).powi(idx.n as i32) * e.conj();
            let euclid = (-1f64).powi(idx.n as i32) / (4.0 * PI) * Complex64::cis(idx.azimuthal() as f64 * (0.4 + a)) * g_n;
            worst = worst.max((psi_kappa(idx, 0.4, a, &tiny) - euclid).norm());
            let z = Complex64::from_polar(0.8 * (j as f64 / 20.0), a);
            worst = worst.max((zernike_kappa(idx, z, &tiny)? - zernike(idx, z)?).norm());
        }
    }
    Ok(worst)
}
