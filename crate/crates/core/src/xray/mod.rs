//! The X-ray transform `I_0`, its fiber adjoint, and the singular value
//! decomposition of `I_0 w`.
//!
//! The singular system is explicit: `I_0(w Zhat_{n,k}) = sigma_n psihat_{n,k}`
//! with `sigma_n = 2 sqrt(pi) / (sqrt(1 - kappa) sqrt(n + 1))`.

pub mod grid;

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::basis::{disk_indices, norms, psi_hat, BasisIndex, CoeffTable, ZernikeTable};
use crate::error::{Error, Result};
use crate::geometry::{exit_time, footpoint_unwrapped, orthogonality_weight, CurvatureParam, FanBeamPoint, Geodesic};
use crate::quadrature::{gauss_legendre, Rule};

pub use grid::{BoundaryFunction, BoundaryGrid, BoundaryInterpolant, DiskFunction, DiskGrid, Measure};

/// Composite Gauss-Legendre rule in arclength. The number of panels is
/// proportional to the chord length, `max_panels` on the diameter.
#[derive(Debug, Clone)]
pub struct ForwardQuad {
    max_panels: usize,
    rule: Rule,
}

impl ForwardQuad {
    pub fn new(nodes_per_panel: usize, max_panels: usize) -> Result<Self> {
        if nodes_per_panel == 0 || max_panels == 0 {
            return Err(Error::InvalidGrid("forward quadrature needs positive sizes".into()));
        }
        Ok(Self {
            max_panels,
            rule: gauss_legendre(nodes_per_panel),
        })
    }

    pub fn nodes_per_panel(&self) -> usize {
        self.rule.len()
    }

    pub fn max_panels(&self) -> usize {
        self.max_panels
    }

    fn panels_for(&self, tau: f64, tau_max: f64) -> usize {
        ((self.max_panels as f64 * tau / tau_max).ceil() as usize).clamp(1, self.max_panels)
    }
}

impl Default for ForwardQuad {
    /// 64 nodes on a diameter.
    fn default() -> Self {
        Self::new(16, 4).expect("valid sizes")
    }
}

/// `I_0 f(beta, alpha)`: the integral of `f` over the geodesic entering at `bp`.
///
/// For `kappa > 0` the geodesic, continued past its exit point, runs off to
/// infinity shortly after `tau`; the nodes are then clustered at both ends
/// through `t = tau (v - sin(2 pi v) / (2 pi))`.
pub fn forward<F: DiskFunction + ?Sized>(f: &F, bp: FanBeamPoint, cp: &CurvatureParam, quad: &ForwardQuad) -> Result<Complex64> {
    let geo = Geodesic::new(bp, cp)?;
    let tau = geo.tau();
    if tau == 0.0 {
        return Ok(Complex64::default());
    }
    let panels = quad.panels_for(tau, exit_time(0.0, cp)?);
    let clustered = cp.kappa() > 0.0;
    let h = 1.0 / panels as f64;
    let mut acc = Complex64::default();
    for p in 0..panels {
        for (x, w) in quad.rule.nodes.iter().zip(&quad.rule.weights) {
            let v = h * (p as f64 + 0.5 * (x + 1.0));
            let (t, dt) = if clustered {
                let a = 2.0 * PI * v;
                (tau * (v - a.sin() / (2.0 * PI)), tau * (1.0 - a.cos()))
            } else {
                (tau * v, tau)
            };
            let val = f.eval(geo.point_unchecked(t));
            if !(val.re.is_finite() && val.im.is_finite()) {
                return Err(Error::NonFinite { t });
            }
            acc += 0.5 * h * w * dt * val;
        }
    }
    Ok(acc)
}

/// Applies [`forward`] at every node of `template`.
pub fn sinogram<F: DiskFunction + ?Sized>(f: &F, template: &BoundaryGrid, cp: &CurvatureParam, quad: &ForwardQuad) -> Result<BoundaryGrid> {
    let na = template.n_alpha();
    let values: Vec<Complex64> = (0..template.values().len())
        .into_par_iter()
        .map(|idx| {
            let (i, j) = (idx / na, idx % na);
            let (beta, alpha) = (template.beta(i), template.alpha(j));
            forward(f, FanBeamPoint::new(beta, alpha), cp, quad).map_err(|e| Error::AtNode {
                beta,
                alpha,
                source: Box::new(e),
            })
        })
        .collect::<Result<_>>()?;
    template.with_values(values)
}

/// `I_0^# g(z)`: the integral of `g` over the footpoints of all geodesics
/// through `z`, by the trapezoid rule in the direction angle.
pub fn adjoint_sharp<G: BoundaryFunction + ?Sized>(g: &G, z: Complex64, cp: &CurvatureParam, fiber_nodes: usize) -> Result<Complex64> {
    let rho = z.norm();
    if !(rho < 1.0) {
        return Err(Error::NotInterior(rho));
    }
    if fiber_nodes == 0 {
        return Err(Error::InvalidGrid("fiber quadrature needs nodes".into()));
    }
    let omega = z.arg();
    let h = 2.0 * PI / fiber_nodes as f64;
    let acc: Complex64 = (0..fiber_nodes)
        .map(|j| {
            let (b, a) = footpoint_unwrapped(rho, omega, h * j as f64, cp);
            g.eval(b, a)
        })
        .sum();
    Ok(acc * h)
}

/// `sigma_n = 2 sqrt(pi) / (sqrt(1 - kappa) sqrt(n + 1))`.
pub fn sigma(n: i64, cp: &CurvatureParam) -> f64 {
    2.0 * PI.sqrt() / ((1.0 - cp.kappa()).sqrt() * ((n + 1) as f64).sqrt())
}

/// One singular triple of `I_0 w`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SvdTriple {
    pub index: BasisIndex,
    pub sigma: f64,
    cp: CurvatureParam,
}

impl SvdTriple {
    /// Left singular function `psihat_{n,k}`.
    pub fn left(&self, beta: f64, alpha: f64) -> Complex64 {
        psi_hat(self.index, beta, alpha, &self.cp)
    }

    /// Right singular function `Zhat_{n,k}` (without the weight).
    pub fn right(&self, z: Complex64) -> Result<Complex64> {
        crate::basis::zernike_kappa_hat(self.index, z, &self.cp)
    }
}

pub fn singular_values(nmax: usize, cp: &CurvatureParam) -> Vec<SvdTriple> {
    disk_indices(nmax)
        .map(|index| SvdTriple {
            index,
            sigma: sigma(index.n, cp),
            cp: *cp,
        })
        .collect()
}

/// `sum c_{n,k} Zhat_{n,k}`, optionally multiplied by the weight `w`.
#[derive(Debug, Clone)]
pub struct ZernikeExpansion {
    cp: CurvatureParam,
    table: ZernikeTable,
    terms: Vec<(BasisIndex, Complex64)>,
    weighted: bool,
}

impl ZernikeExpansion {
    pub fn new(coeffs: &CoeffTable, cp: &CurvatureParam, weighted: bool) -> Self {
        let terms = coeffs
            .iter()
            .filter(|(i, c)| i.is_disk() && *c != Complex64::default())
            .map(|(i, c)| (i, c / norms(i, cp).1.sqrt()))
            .collect();
        Self {
            cp: *cp,
            table: ZernikeTable::new(coeffs.nmax),
            terms,
            weighted,
        }
    }

    /// `w Zhat_{n,k}` (or `Zhat_{n,k}`).
    pub fn single(idx: BasisIndex, cp: &CurvatureParam, weighted: bool) -> Result<Self> {
        let mut c = CoeffTable::new(cp.kappa(), idx.n.max(0) as usize);
        c.insert(idx, Complex64::new(1.0, 0.0))?;
        if !idx.is_disk() {
            return Err(Error::InvalidIndex { n: idx.n, k: idx.k });
        }
        Ok(Self::new(&c, cp, weighted))
    }
}

impl DiskFunction for ZernikeExpansion {
    fn eval(&self, z: Complex64) -> Complex64 {
        let s: Complex64 = self
            .terms
            .iter()
            .map(|(i, c)| c * self.table.zernike_kappa(*i, z, &self.cp).expect("table covers terms"))
            .sum();
        if self.weighted {
            s * orthogonality_weight(z, &self.cp)
        } else {
            s
        }
    }
}

/// `sum c_{n,k} psihat_{n,k}`.
pub fn psi_expansion<'a>(coeffs: &'a CoeffTable, cp: &CurvatureParam) -> impl BoundaryFunction + 'a {
    let cp = *cp;
    move |b: f64, a: f64| coeffs.iter().map(|(i, c)| c * psi_hat(i, b, a, &cp)).sum::<Complex64>()
}

fn check_resolvable(g: &BoundaryGrid, nmax: usize) -> Result<()> {
    if 2 * (nmax + 1) > g.n_alpha() {
        return Err(Error::Aliasing {
            nmax,
            nodes: g.n_alpha(),
        });
    }
    if g.n_beta() < 2 * nmax + 1 {
        return Err(Error::Aliasing { nmax, nodes: g.n_beta() });
    }
    Ok(())
}

/// Inner products `<g, psihat_{n,k}>` for `(n, k)` in `indices`.
pub fn inner_with_psi_hat(g: &BoundaryGrid, indices: &[BasisIndex], cp: &CurvatureParam) -> Vec<Complex64> {
    let na = g.n_alpha();
    let nb = g.n_beta();
    // azimuthal frequencies needed
    let mut freqs: Vec<i64> = indices.iter().map(|i| i.azimuthal()).collect();
    freqs.sort_unstable();
    freqs.dedup();
    // G[f][j] = sum_i g_ij e^{-i f beta_i}
    let moments: Vec<Vec<Complex64>> = freqs
        .par_iter()
        .map(|&f| {
            (0..na)
                .map(|j| (0..nb).map(|i| g.value(i, j) * Complex64::cis(-(f as f64) * g.beta(i))).sum())
                .collect()
        })
        .collect();
    indices
        .par_iter()
        .map(|idx| {
            let fpos = freqs.binary_search(&idx.azimuthal()).expect("frequency present");
            (0..na)
                .map(|j| g.weight(j) * moments[fpos][j] * psi_hat(*idx, 0.0, g.alpha(j), cp).conj())
                .sum()
        })
        .collect()
}

/// `c_{n,k} = <g, psihat_{n,k}>` for `0 <= k <= n <= nmax`.
pub fn analyze(g: &BoundaryGrid, nmax: usize, cp: &CurvatureParam) -> Result<CoeffTable> {
    check_resolvable(g, nmax)?;
    let idx: Vec<BasisIndex> = disk_indices(nmax).collect();
    let values = inner_with_psi_hat(g, &idx, cp);
    let mut table = CoeffTable::new(cp.kappa(), nmax);
    for (i, v) in idx.into_iter().zip(values) {
        table.insert(i, v)?;
    }
    Ok(table)
}

/// `sum c_{n,k} psihat_{n,k}` on the nodes of `template`.
pub fn synthesize_boundary(c: &CoeffTable, template: &BoundaryGrid, cp: &CurvatureParam) -> BoundaryGrid {
    template.zeros_like().sampled(&psi_expansion(c, cp))
}

/// `sum c_{n,k} Zhat_{n,k}` on the nodes of `template`.
pub fn synthesize_disk(c: &CoeffTable, template: &DiskGrid, cp: &CurvatureParam) -> DiskGrid {
    template.zeros_like().sampled(&ZernikeExpansion::new(c, cp, false))
}

/// Which singular values the inversion keeps.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Regularization {
    /// Every mode with `n <= nmax`.
    Truncation,
    /// Modes with `n <= nmax` and `sigma >= threshold`.
    SpectralCutoff { threshold: f64 },
}

impl Default for Regularization {
    fn default() -> Self {
        Regularization::Truncation
    }
}

/// Output of [`invert`].
#[derive(Debug, Clone)]
pub struct Inversion {
    /// Reconstruction `f = w sum (c / sigma) Zhat` sampled on the disk grid.
    pub disk: DiskGrid,
    /// Data coefficients `<g, psihat>`.
    pub data: CoeffTable,
    /// Coefficients `c / sigma` of the reconstruction in the `w Zhat` basis.
    pub solution: CoeffTable,
    /// Norm of the part of `g` not explained by the accepted modes.
    pub residual: f64,
    /// Energy of the data coefficients rejected by the regularization.
    pub discarded_energy: f64,
    pub accepted: usize,
    /// `1 / sigma_min` over the accepted modes.
    pub noise_amplification: f64,
}

/// Truncated-SVD inversion of `g = I_0 f`.
pub fn invert(g: &BoundaryGrid, nmax: usize, cp: &CurvatureParam, reg: Regularization, disk: &DiskGrid) -> Result<Inversion> {
    let data = analyze(g, nmax, cp)?;
    let mut solution = CoeffTable::new(cp.kappa(), nmax);
    let mut discarded = 0.0;
    let mut kept_energy = 0.0;
    let mut accepted = 0;
    let mut sigma_min = f64::INFINITY;
    for (idx, c) in data.iter() {
        let s = sigma(idx.n, cp);
        let keep = match reg {
            Regularization::Truncation => true,
            Regularization::SpectralCutoff { threshold } => s >= threshold,
        };
        if keep {
            solution.insert(idx, c / s)?;
            kept_energy += c.norm_sqr();
            accepted += 1;
            sigma_min = sigma_min.min(s);
        } else {
            discarded += c.norm_sqr();
        }
    }
    if accepted == 0 {
        return Err(Error::EmptySpectrum);
    }
    let total = g.norm().powi(2);
    let f = ZernikeExpansion::new(&solution, cp, true);
    Ok(Inversion {
        disk: disk.zeros_like().sampled(&f),
        data,
        solution,
        residual: (total - kept_energy).max(0.0).sqrt(),
        discarded_energy: discarded,
        accepted,
        noise_amplification: 1.0 / sigma_min,
    })
}

/// Adds complex Gaussian noise with standard deviation `level` times the
/// RMS of the samples (split evenly between real and imaginary parts).
pub fn add_noise(g: &mut BoundaryGrid, level: f64, seed: u64) {
    let n = g.values().len().max(1);
    let rms = (g.values().iter().map(|v| v.norm_sqr()).sum::<f64>() / n as f64).sqrt();
    let sd = level * rms / 2f64.sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for v in g.values_mut() {
        let re: f64 = StandardNormal.sample(&mut rng);
        let im: f64 = StandardNormal.sample(&mut rng);
        *v += Complex64::new(sd * re, sd * im);
    }
}
