//! Sample grids on the disk and on the inward boundary, their quadrature
//! weights, and interpolants that turn samples back into functions.

use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::geometry::{reduce_angle, sig, sig_inverse, sig_prime, CurvatureParam};
use crate::quadrature::{barycentric_weights, gauss_legendre, gauss_legendre_on};

/// A function on the closed disk.
pub trait DiskFunction: Sync {
    fn eval(&self, z: Complex64) -> Complex64;
}

impl<F: Fn(Complex64) -> Complex64 + Sync> DiskFunction for F {
    fn eval(&self, z: Complex64) -> Complex64 {
        self(z)
    }
}

/// A function of fan-beam coordinates. Angles may be passed unreduced.
pub trait BoundaryFunction: Sync {
    fn eval(&self, beta: f64, alpha: f64) -> Complex64;
}

impl<F: Fn(f64, f64) -> Complex64 + Sync> BoundaryFunction for F {
    fn eval(&self, beta: f64, alpha: f64) -> Complex64 {
        self(beta, alpha)
    }
}

/// Quadrature measure attached to a [`DiskGrid`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Measure {
    Euclidean,
    /// Riemannian area `(1 + kappa rho^2)^{-2} dx dy`.
    Vol,
    /// `w dVol`, the measure in which the deformed Zernike functions are orthogonal.
    WeightedVol,
}

/// Samples on Gauss-Legendre radii times uniform angles.
#[derive(Debug, Clone)]
pub struct DiskGrid {
    kappa: f64,
    measure: Measure,
    rho: Vec<f64>,
    rho_weights: Vec<f64>,
    n_omega: usize,
    values: Vec<Complex64>,
}

impl DiskGrid {
    pub fn new(n_rho: usize, n_omega: usize, cp: &CurvatureParam, measure: Measure) -> Result<Self> {
        if n_rho == 0 || n_omega == 0 {
            return Err(Error::InvalidGrid(format!("disk grid needs positive sizes, got {n_rho} x {n_omega}")));
        }
        let rule = gauss_legendre_on(n_rho, 0.0, 1.0);
        Ok(Self {
            kappa: cp.kappa(),
            measure,
            rho: rule.nodes,
            rho_weights: rule.weights,
            n_omega,
            values: vec![Complex64::default(); n_rho * n_omega],
        })
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn measure(&self) -> Measure {
        self.measure
    }

    pub fn n_rho(&self) -> usize {
        self.rho.len()
    }

    pub fn n_omega(&self) -> usize {
        self.n_omega
    }

    pub fn rho(&self) -> &[f64] {
        &self.rho
    }

    pub fn omega(&self, j: usize) -> f64 {
        TAU * j as f64 / self.n_omega as f64
    }

    pub fn point(&self, i: usize, j: usize) -> Complex64 {
        Complex64::from_polar(self.rho[i], self.omega(j))
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn value(&self, i: usize, j: usize) -> Complex64 {
        self.values[i * self.n_omega + j]
    }

    /// Same layout with a different measure tag.
    pub fn with_measure(mut self, measure: Measure) -> Self {
        self.measure = measure;
        self
    }

    /// Quadrature weight of node `(i, j)` for the attached measure.
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        let _ = j;
        let r = self.rho[i];
        let base = r * self.rho_weights[i] * TAU / self.n_omega as f64;
        let kr = self.kappa * r * r;
        match self.measure {
            Measure::Euclidean => base,
            Measure::Vol => base / ((1.0 + kr) * (1.0 + kr)),
            Measure::WeightedVol => base / ((1.0 + kr) * (1.0 - kr)),
        }
    }

    /// Fills the grid with samples of `f`.
    pub fn fill<F: DiskFunction + ?Sized>(&mut self, f: &F) {
        let n_omega = self.n_omega;
        let rho = &self.rho;
        self.values
            .par_chunks_mut(n_omega)
            .enumerate()
            .for_each(|(i, row)| {
                for (j, v) in row.iter_mut().enumerate() {
                    *v = f.eval(Complex64::from_polar(rho[i], TAU * j as f64 / n_omega as f64));
                }
            });
    }

    pub fn sampled<F: DiskFunction + ?Sized>(mut self, f: &F) -> Self {
        self.fill(f);
        self
    }

    pub fn zeros_like(&self) -> Self {
        let mut g = self.clone();
        g.values.iter_mut().for_each(|v| *v = Complex64::default());
        g
    }

    fn check_layout(&self, other: &DiskGrid) -> Result<()> {
        if self.rho.len() != other.rho.len() || self.n_omega != other.n_omega || self.kappa != other.kappa {
            return Err(Error::GridMismatch(format!(
                "disk grids {}x{} (kappa {}) and {}x{} (kappa {})",
                self.rho.len(),
                self.n_omega,
                self.kappa,
                other.rho.len(),
                other.n_omega,
                other.kappa
            )));
        }
        if self.measure != other.measure {
            return Err(Error::GridMismatch(format!(
                "measures {:?} and {:?}",
                self.measure, other.measure
            )));
        }
        Ok(())
    }

    /// `sum w f1 conj(f2)` with the attached measure.
    pub fn inner(&self, other: &DiskGrid) -> Result<Complex64> {
        self.check_layout(other)?;
        let mut acc = Complex64::default();
        for i in 0..self.rho.len() {
            let w = self.weight(i, 0);
            let row = i * self.n_omega;
            let s: Complex64 = (0..self.n_omega)
                .map(|j| self.values[row + j] * other.values[row + j].conj())
                .sum();
            acc += w * s;
        }
        Ok(acc)
    }

    pub fn norm(&self) -> f64 {
        self.inner(self).map(|v| v.re.max(0.0).sqrt()).unwrap_or(0.0)
    }

    /// `self - other`, for error measurements.
    pub fn difference(&self, other: &DiskGrid) -> Result<DiskGrid> {
        self.check_layout(other)?;
        let mut d = self.clone();
        d.values.iter_mut().zip(&other.values).for_each(|(a, b)| *a -= b);
        Ok(d)
    }

    /// Integral of the constant 1 against the attached measure.
    pub fn total_mass(&self) -> f64 {
        (0..self.rho.len()).map(|i| self.weight(i, 0)).sum::<f64>() * self.n_omega as f64
    }

    /// Bicubic interpolation: cubic Lagrange in `rho` on the four nearest
    /// radial nodes, periodic cubic Lagrange in `omega`.
    pub fn interpolate(&self, z: Complex64) -> Complex64 {
        let nr = self.rho.len();
        let r = z.norm();
        let om = reduce_angle(z.arg());
        // radial stencil
        let pos = self.rho.partition_point(|&x| x < r);
        let lo = pos.saturating_sub(2).min(nr.saturating_sub(4));
        let ridx: Vec<usize> = (lo..(lo + 4).min(nr)).collect();
        let rw = lagrange_weights(&ridx.iter().map(|&i| self.rho[i]).collect::<Vec<_>>(), r);
        // angular stencil
        let h = TAU / self.n_omega as f64;
        let j0 = (om / h).floor() as i64;
        let frac = om / h - j0 as f64;
        let oidx: Vec<i64> = (-1..=2).map(|d| j0 + d).collect();
        let ow = lagrange_weights(&[-1.0, 0.0, 1.0, 2.0], frac);
        let mut acc = Complex64::default();
        for (a, &i) in ridx.iter().enumerate() {
            let row = i * self.n_omega;
            for (b, &j) in oidx.iter().enumerate() {
                let jj = j.rem_euclid(self.n_omega as i64) as usize;
                acc += rw[a] * ow[b] * self.values[row + jj];
            }
        }
        acc
    }
}

impl DiskFunction for DiskGrid {
    fn eval(&self, z: Complex64) -> Complex64 {
        self.interpolate(z)
    }
}

fn lagrange_weights(nodes: &[f64], x: f64) -> Vec<f64> {
    (0..nodes.len())
        .map(|j| {
            nodes
                .iter()
                .enumerate()
                .filter(|(k, _)| *k != j)
                .map(|(_, &xk)| (x - xk) / (nodes[j] - xk))
                .product()
        })
        .collect()
}

/// Layout of a boundary grid: uniform `beta`, and `alpha` nodes that are
/// Gauss-Legendre in the signature variable `s = s(alpha)` on two panels
/// `[-pi/2, 0]` and `[0, pi/2]`.
///
/// Boundary singular functions are `sqrt(s')` times trigonometric
/// polynomials in `s`, so their products are integrated to rounding error;
/// the near-real poles of `s'` sit at the panel ends.
#[derive(Debug)]
pub struct BoundaryLayout {
    kappa: f64,
    n_beta: usize,
    /// `s` nodes, increasing.
    s: Vec<f64>,
    alpha: Vec<f64>,
    /// `d alpha` weights.
    alpha_weights: Vec<f64>,
    /// `sqrt(s'(alpha_j))`
    root_sp: Vec<f64>,
    /// reference nodes on [-1, 1] and their barycentric weights
    ref_nodes: Vec<f64>,
    bary: Vec<f64>,
}

impl BoundaryLayout {
    fn new(n_beta: usize, n_alpha: usize, cp: &CurvatureParam) -> Result<Self> {
        if n_beta == 0 || n_alpha < 2 || n_alpha % 2 != 0 {
            return Err(Error::InvalidGrid(format!(
                "boundary grid needs n_beta > 0 and an even n_alpha >= 2, got {n_beta} x {n_alpha}"
            )));
        }
        let per = n_alpha / 2;
        let base = gauss_legendre(per);
        let mut s = Vec::with_capacity(n_alpha);
        let mut ws = Vec::with_capacity(n_alpha);
        for (lo, hi) in [(-FRAC_PI_2, 0.0), (0.0, FRAC_PI_2)] {
            let half = 0.5 * (hi - lo);
            for (x, w) in base.nodes.iter().zip(&base.weights) {
                s.push(lo + half * (x + 1.0));
                ws.push(half * w);
            }
        }
        let alpha: Vec<f64> = s.iter().map(|&v| sig_inverse(v, cp)).collect();
        let alpha_weights = alpha.iter().zip(&ws).map(|(&a, &w)| w / sig_prime(a, cp)).collect();
        let root_sp = alpha.iter().map(|&a| sig_prime(a, cp).sqrt()).collect();
        Ok(Self {
            kappa: cp.kappa(),
            n_beta,
            s,
            alpha,
            alpha_weights,
            root_sp,
            bary: barycentric_weights(&base.nodes),
            ref_nodes: base.nodes,
        })
    }

    fn same_as(&self, other: &BoundaryLayout) -> bool {
        self.kappa == other.kappa && self.n_beta == other.n_beta && self.s.len() == other.s.len()
    }

    /// Weights `l_j(s)` of the per-panel interpolation in `s`, as
    /// `(first node index, weights)`.
    fn s_weights(&self, s: f64) -> (usize, Vec<f64>) {
        let per = self.ref_nodes.len();
        let (first, lo) = if s < 0.0 { (0, -FRAC_PI_2) } else { (per, 0.0) };
        let x = (s - lo) / FRAC_PI_2 * 2.0 - 1.0;
        if let Some(j) = self.ref_nodes.iter().position(|&n| n == x) {
            let mut w = vec![0.0; per];
            w[j] = 1.0;
            return (first, w);
        }
        let terms: Vec<f64> = self.ref_nodes.iter().zip(&self.bary).map(|(&n, &b)| b / (x - n)).collect();
        let total: f64 = terms.iter().sum();
        (first, terms.into_iter().map(|t| t / total).collect())
    }
}

/// Complex samples on the inward boundary with quadrature for
/// `d Sigma^2 = (1 + kappa)^{-1} d beta d alpha`.
///
/// Values are stored row-major, one row per `beta`.
#[derive(Debug, Clone)]
pub struct BoundaryGrid {
    layout: Arc<BoundaryLayout>,
    values: Vec<Complex64>,
}

impl BoundaryGrid {
    pub fn new(n_beta: usize, n_alpha: usize, cp: &CurvatureParam) -> Result<Self> {
        let layout = BoundaryLayout::new(n_beta, n_alpha, cp)?;
        let values = vec![Complex64::default(); n_beta * n_alpha];
        Ok(Self {
            layout: Arc::new(layout),
            values,
        })
    }

    pub fn kappa(&self) -> f64 {
        self.layout.kappa
    }

    pub fn n_beta(&self) -> usize {
        self.layout.n_beta
    }

    pub fn n_alpha(&self) -> usize {
        self.layout.alpha.len()
    }

    pub fn beta(&self, i: usize) -> f64 {
        TAU * i as f64 / self.layout.n_beta as f64
    }

    pub fn alphas(&self) -> &[f64] {
        &self.layout.alpha
    }

    pub fn alpha(&self, j: usize) -> f64 {
        self.layout.alpha[j]
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn value(&self, i: usize, j: usize) -> Complex64 {
        self.values[i * self.n_alpha() + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: Complex64) {
        let n = self.n_alpha();
        self.values[i * n + j] = v;
    }

    /// Quadrature weight of node `(i, j)`, including `(1 + kappa)^{-1}`.
    pub fn weight(&self, j: usize) -> f64 {
        TAU / self.layout.n_beta as f64 * self.layout.alpha_weights[j] / (1.0 + self.layout.kappa)
    }

    /// Sum of all weights; equals `2 pi^2 / (1 + kappa)`.
    pub fn total_mass(&self) -> f64 {
        (0..self.n_alpha()).map(|j| self.weight(j)).sum::<f64>() * self.n_beta() as f64
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            layout: Arc::clone(&self.layout),
            values: vec![Complex64::default(); self.values.len()],
        }
    }

    /// Same layout with the given values.
    pub fn with_values(&self, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != self.values.len() {
            return Err(Error::GridMismatch(format!(
                "{} values for a grid of {} nodes",
                values.len(),
                self.values.len()
            )));
        }
        Ok(Self {
            layout: Arc::clone(&self.layout),
            values,
        })
    }

    pub fn fill<G: BoundaryFunction + ?Sized>(&mut self, g: &G) {
        let na = self.n_alpha();
        let nb = self.n_beta();
        let alpha = &self.layout.alpha;
        self.values.par_chunks_mut(na).enumerate().for_each(|(i, row)| {
            let b = TAU * i as f64 / nb as f64;
            for (j, v) in row.iter_mut().enumerate() {
                *v = g.eval(b, alpha[j]);
            }
        });
    }

    pub fn sampled<G: BoundaryFunction + ?Sized>(mut self, g: &G) -> Self {
        self.fill(g);
        self
    }

    pub fn check_layout(&self, other: &BoundaryGrid) -> Result<()> {
        if Arc::ptr_eq(&self.layout, &other.layout) || self.layout.same_as(&other.layout) {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!(
                "boundary grids {}x{} (kappa {}) and {}x{} (kappa {})",
                self.n_beta(),
                self.n_alpha(),
                self.kappa(),
                other.n_beta(),
                other.n_alpha(),
                other.kappa()
            )))
        }
    }

    /// `sum w g1 conj(g2)`.
    pub fn inner(&self, other: &BoundaryGrid) -> Result<Complex64> {
        self.check_layout(other)?;
        let na = self.n_alpha();
        let mut acc = Complex64::default();
        for j in 0..na {
            let s: Complex64 = (0..self.n_beta())
                .map(|i| self.values[i * na + j] * other.values[i * na + j].conj())
                .sum();
            acc += self.weight(j) * s;
        }
        Ok(acc)
    }

    /// Inner product against a function, `sum w g conj(h)`.
    pub fn inner_fn<H: BoundaryFunction + ?Sized>(&self, h: &H) -> Complex64 {
        let na = self.n_alpha();
        (0..na)
            .into_par_iter()
            .map(|j| {
                let a = self.alpha(j);
                let s: Complex64 = (0..self.n_beta())
                    .map(|i| self.values[i * na + j] * h.eval(self.beta(i), a).conj())
                    .sum();
                self.weight(j) * s
            })
            .collect::<Vec<_>>()
            .into_iter()
            .sum()
    }

    pub fn norm(&self) -> f64 {
        self.inner(self).map(|v| v.re.max(0.0).sqrt()).unwrap_or(0.0)
    }

    pub fn scale(&mut self, c: Complex64) {
        self.values.iter_mut().for_each(|v| *v *= c);
    }

    /// `self + c * other`.
    pub fn axpy(&mut self, c: Complex64, other: &BoundaryGrid) -> Result<()> {
        self.check_layout(other)?;
        self.values.iter_mut().zip(&other.values).for_each(|(a, b)| *a += c * b);
        Ok(())
    }

    pub fn difference(&self, other: &BoundaryGrid) -> Result<BoundaryGrid> {
        let mut d = self.clone();
        d.axpy(Complex64::new(-1.0, 0.0), other)?;
        Ok(d)
    }

    /// Index of the node at `-alpha_j` (the rule is symmetric).
    pub fn mirror_alpha(&self, j: usize) -> usize {
        self.n_alpha() - 1 - j
    }

    /// Builds an interpolant through the samples.
    pub fn interpolant(&self) -> BoundaryInterpolant {
        BoundaryInterpolant::new(self)
    }
}

/// Spectral interpolant of a [`BoundaryGrid`]: trigonometric in `beta`,
/// per-panel polynomial in `s` applied to `u / sqrt(s')`.
#[derive(Debug, Clone)]
pub struct BoundaryInterpolant {
    layout: Arc<BoundaryLayout>,
    /// `u / sqrt(s')`, column-major: one `beta` column per alpha node.
    columns: Vec<Vec<Complex64>>,
}

impl BoundaryInterpolant {
    pub fn new(grid: &BoundaryGrid) -> Self {
        let na = grid.n_alpha();
        let nb = grid.n_beta();
        let columns = (0..na)
            .map(|j| {
                let r = grid.layout.root_sp[j];
                (0..nb).map(|i| grid.values[i * na + j] / r).collect()
            })
            .collect();
        Self {
            layout: Arc::clone(&grid.layout),
            columns,
        }
    }

    pub fn n_beta(&self) -> usize {
        self.layout.n_beta
    }

    fn check_alpha(&self, alpha: f64) -> Result<f64> {
        let a = crate::geometry::reduce_symmetric(alpha);
        if a.abs() > FRAC_PI_2 + crate::geometry::DOMAIN_TOL {
            return Err(Error::Interpolation { beta: f64::NAN, alpha });
        }
        Ok(a.clamp(-FRAC_PI_2, FRAC_PI_2))
    }

    /// Values on the uniform `beta` nodes at an arbitrary inward `alpha`.
    pub fn column(&self, alpha: f64) -> Result<Vec<Complex64>> {
        let cp = CurvatureParam::new(self.layout.kappa)?;
        let a = self.check_alpha(alpha)?;
        let (first, w) = self.layout.s_weights(sig(a, &cp));
        let nb = self.layout.n_beta;
        let root = sig_prime(a, &cp).sqrt();
        let mut out = vec![Complex64::default(); nb];
        for (k, wk) in w.iter().enumerate() {
            if *wk == 0.0 {
                continue;
            }
            for (o, v) in out.iter_mut().zip(&self.columns[first + k]) {
                *o += *wk * v;
            }
        }
        out.iter_mut().for_each(|v| *v *= root);
        Ok(out)
    }

    /// Column at `alpha`, shifted so entry `i` holds the value at `beta_i + shift`.
    pub fn shifted_column(&self, alpha: f64, shift: f64, planner: &mut FftPlanner<f64>) -> Result<Vec<Complex64>> {
        let col = self.column(alpha)?;
        Ok(shift_periodic(col, shift, planner))
    }

    /// Value at an arbitrary point of the inward boundary.
    pub fn value(&self, beta: f64, alpha: f64) -> Result<Complex64> {
        let col = self.column(alpha).map_err(|_| Error::Interpolation { beta, alpha })?;
        Ok(trig_eval(&col, beta))
    }
}

impl BoundaryFunction for BoundaryInterpolant {
    fn eval(&self, beta: f64, alpha: f64) -> Complex64 {
        self.value(beta, alpha).unwrap_or(Complex64::new(f64::NAN, f64::NAN))
    }
}

/// Signed frequency of DFT bin `m` for length `n`.
pub(crate) fn signed_freq(m: usize, n: usize) -> i64 {
    if m <= n / 2 {
        m as i64
    } else {
        m as i64 - n as i64
    }
}

/// Trigonometric interpolation of uniform periodic samples shifted by `shift`.
/// An even-length Nyquist mode is treated as a cosine.
pub(crate) fn shift_periodic(mut v: Vec<Complex64>, shift: f64, planner: &mut FftPlanner<f64>) -> Vec<Complex64> {
    let n = v.len();
    if n <= 1 || shift == 0.0 {
        return v;
    }
    planner.plan_fft_forward(n).process(&mut v);
    for (m, c) in v.iter_mut().enumerate() {
        let f = signed_freq(m, n);
        if n % 2 == 0 && m == n / 2 {
            *c *= (f as f64 * shift).cos();
        } else {
            *c *= Complex64::cis(f as f64 * shift);
        }
    }
    planner.plan_fft_inverse(n).process(&mut v);
    let inv = 1.0 / n as f64;
    v.iter_mut().for_each(|x| *x *= inv);
    v
}

/// Evaluates the trigonometric interpolant of uniform samples on [0, 2 pi) at `x`.
pub(crate) fn trig_eval(v: &[Complex64], x: f64) -> Complex64 {
    let n = v.len();
    if n == 1 {
        return v[0];
    }
    let h = TAU / n as f64;
    let t = x / h;
    if (t - t.round()).abs() < 1e-14 {
        return v[(t.round() as i64).rem_euclid(n as i64) as usize];
    }
    let mut spec = v.to_vec();
    FftPlanner::new().plan_fft_forward(n).process(&mut spec);
    let mut acc = Complex64::default();
    for (m, c) in spec.iter().enumerate() {
        let f = signed_freq(m, n);
        if n % 2 == 0 && m == n / 2 {
            acc += c * (f as f64 * x).cos();
        } else {
            acc += c * Complex64::cis(f as f64 * x);
        }
    }
    acc / n as f64
}

/// `2 pi^2 / (1 + kappa)`.
pub fn boundary_mass(cp: &CurvatureParam) -> f64 {
    2.0 * PI * PI / cp.c1()
}

/// `pi / (1 + kappa)`.
pub fn disk_volume(cp: &CurvatureParam) -> f64 {
    PI / cp.c1()
}
