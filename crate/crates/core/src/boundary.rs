//! Operators on functions over the boundary of the unit circle bundle.
//!
//! A function on the inward boundary is extended to the whole torus
//! `(beta, alpha)` by symmetry under the scattering relation (`A_+`, `A_-`),
//! transformed by the fiberwise Hilbert transform, and brought back with
//! `A_-^* U = U - U o S`. The compositions `P_- = A_-^* H_- A_+` and
//! `C_- = A_-^* H_- A_- / 2` characterize the range of `I_0`: a symmetric
//! datum `u` is in the range iff `C_- u = 0`, and `id + C_-^2` projects onto it.
//!
//! On the families `u'_{p,q}`, `v'_{p,q}` both operators are diagonal:
//! `P_- v' = -i (sgn(2q+1) - sgn(2p-2q-1)) u'` and
//! `C_- u' = -i/2 (sgn(2q+1) + sgn(2p-2q-1)) u'`.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_2, PI, TAU};

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;

use crate::basis::{psi_kappa, u_prime, v_prime, BasisIndex};
use crate::error::{Error, Result};
use crate::geometry::{reduce_symmetric, sig, CurvatureParam};
use crate::xray::grid::{shift_periodic, signed_freq};
use crate::xray::BoundaryGrid;

/// Sign of an extension or of a symmetry.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parity {
    Even,
    Odd,
}

impl Parity {
    pub fn sign(self) -> f64 {
        match self {
            Parity::Even => 1.0,
            Parity::Odd => -1.0,
        }
    }
}

/// Which fiber modes the Hilbert transform acts on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Part {
    Full,
    Even,
    Odd,
}

/// Samples on uniform `beta` times the full fiber circle,
/// `alpha_j = -pi + 2 pi j / n_fiber`. Row-major, one row per `beta`.
#[derive(Debug, Clone, PartialEq)]
pub struct TorusGrid {
    n_beta: usize,
    n_fiber: usize,
    values: Vec<Complex64>,
}

impl TorusGrid {
    pub fn new(n_beta: usize, n_fiber: usize) -> Result<Self> {
        if n_beta == 0 || n_fiber < 4 || !n_fiber.is_power_of_two() {
            return Err(Error::InvalidGrid(format!(
                "torus needs n_beta > 0 and a power-of-two fiber size >= 4, got {n_beta} x {n_fiber}"
            )));
        }
        Ok(Self {
            n_beta,
            n_fiber,
            values: vec![Complex64::default(); n_beta * n_fiber],
        })
    }

    pub fn n_beta(&self) -> usize {
        self.n_beta
    }

    pub fn n_fiber(&self) -> usize {
        self.n_fiber
    }

    pub fn beta(&self, i: usize) -> f64 {
        TAU * i as f64 / self.n_beta as f64
    }

    pub fn alpha(&self, j: usize) -> f64 {
        -PI + TAU * j as f64 / self.n_fiber as f64
    }

    pub fn value(&self, i: usize, j: usize) -> Complex64 {
        self.values[i * self.n_fiber + j]
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn fill<F: Fn(f64, f64) -> Complex64 + Sync>(&mut self, f: F) {
        let (nb, nf) = (self.n_beta, self.n_fiber);
        self.values.par_chunks_mut(nf).enumerate().for_each(|(i, row)| {
            let b = TAU * i as f64 / nb as f64;
            for (j, v) in row.iter_mut().enumerate() {
                *v = f(b, -PI + TAU * j as f64 / nf as f64);
            }
        });
    }

    /// Largest pointwise modulus.
    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.norm()))
    }

    pub fn max_abs_diff(&self, other: &TorusGrid) -> f64 {
        self.values.iter().zip(&other.values).fold(0.0, |m, (a, b)| m.max((a - b).norm()))
    }

    /// Fiber spectra of every row: `spec[i][m]`, unnormalized DFT in `alpha + pi`.
    fn row_spectra(&self, planner: &mut FftPlanner<f64>) -> Vec<Vec<Complex64>> {
        let fft = planner.plan_fft_forward(self.n_fiber);
        self.values
            .chunks(self.n_fiber)
            .map(|row| {
                let mut r = row.to_vec();
                fft.process(&mut r);
                r
            })
            .collect()
    }
}

/// Configuration of the grid operators: curvature and fiber FFT size.
#[derive(Debug, Clone, Copy)]
pub struct BoundaryOperators {
    cp: CurvatureParam,
    n_fiber: usize,
}

impl BoundaryOperators {
    pub fn new(cp: &CurvatureParam, n_fiber: usize) -> Result<Self> {
        if n_fiber < 4 || !n_fiber.is_power_of_two() {
            return Err(Error::InvalidGrid(format!("fiber size {n_fiber} must be a power of two >= 4")));
        }
        Ok(Self { cp: *cp, n_fiber })
    }

    pub fn curvature(&self) -> &CurvatureParam {
        &self.cp
    }

    pub fn n_fiber(&self) -> usize {
        self.n_fiber
    }

    fn check_grid(&self, u: &BoundaryGrid) -> Result<()> {
        if u.kappa() != self.cp.kappa() {
            return Err(Error::GridMismatch(format!(
                "grid built for kappa {} used with kappa {}",
                u.kappa(),
                self.cp.kappa()
            )));
        }
        if self.n_fiber < 2 * u.n_alpha() {
            return Err(Error::Aliasing {
                nmax: u.n_alpha(),
                nodes: self.n_fiber,
            });
        }
        Ok(())
    }

    /// `A_+ u` or `A_- u`: `u` on inward nodes, `+-u(S(beta, alpha))` on outward ones.
    pub fn extend(&self, u: &BoundaryGrid, parity: Parity) -> Result<TorusGrid> {
        self.check_grid(u)?;
        let it = u.interpolant();
        let nb = u.n_beta();
        let mut torus = TorusGrid::new(nb, self.n_fiber)?;
        let columns: Vec<Vec<Complex64>> = (0..self.n_fiber)
            .into_par_iter()
            .map_init(FftPlanner::new, |planner, j| {
                let a = torus.alpha(j);
                if a.abs() <= FRAC_PI_2 {
                    it.column(a)
                } else {
                    let target = reduce_symmetric(PI - a);
                    let shift = PI + 2.0 * sig(a, &self.cp);
                    let col = it.shifted_column(target, shift, planner)?;
                    Ok(col.into_iter().map(|v| parity.sign() * v).collect())
                }
                .map_err(|e| match e {
                    Error::Interpolation { .. } => Error::Interpolation { beta: f64::NAN, alpha: a },
                    other => other,
                })
            })
            .collect::<Result<_>>()?;
        let nf = self.n_fiber;
        for (j, col) in columns.into_iter().enumerate() {
            for (i, v) in col.into_iter().enumerate() {
                torus.values[i * nf + j] = v;
            }
        }
        Ok(torus)
    }

    /// Fiberwise Hilbert transform: mode `m` in `alpha` is multiplied by
    /// `-i sign(m)`, `sign(0) = 0`; the Nyquist mode is dropped. `Even` and
    /// `Odd` first discard the modes of the other parity.
    pub fn hilbert(&self, u: &TorusGrid, part: Part) -> TorusGrid {
        let nf = u.n_fiber;
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(nf);
        let inv = planner.plan_fft_inverse(nf);
        let mut out = u.clone();
        out.values.par_chunks_mut(nf).for_each(|row| {
            fwd.process(row);
            for (m, c) in row.iter_mut().enumerate() {
                let f = signed_freq(m, nf);
                let keep = match part {
                    Part::Full => true,
                    Part::Even => f % 2 == 0,
                    Part::Odd => f % 2 != 0,
                };
                *c = if !keep || f == 0 || m == nf / 2 {
                    Complex64::default()
                } else {
                    *c * Complex64::new(0.0, -(f.signum() as f64)) / nf as f64
                };
            }
            inv.process(row);
        });
        out
    }

    /// `A_+^* U` or `A_-^* U` on the nodes of `template`: `U(x) +- U(S(x))`.
    pub fn restrict_star(&self, torus: &TorusGrid, parity: Parity, template: &BoundaryGrid) -> Result<BoundaryGrid> {
        self.check_grid(template)?;
        if torus.n_beta != template.n_beta() {
            return Err(Error::GridMismatch(format!(
                "torus has {} beta nodes, boundary grid {}",
                torus.n_beta,
                template.n_beta()
            )));
        }
        let mut planner = FftPlanner::new();
        let spectra = torus.row_spectra(&mut planner);
        let nf = torus.n_fiber;
        let column_at = |a: f64| -> Vec<Complex64> {
            let phase: Vec<Complex64> = (0..nf)
                .map(|m| {
                    let f = signed_freq(m, nf);
                    if m == nf / 2 {
                        Complex64::new((f as f64 * (a + PI)).cos() / nf as f64, 0.0)
                    } else {
                        Complex64::cis(f as f64 * (a + PI)) / nf as f64
                    }
                })
                .collect();
            spectra.iter().map(|s| s.iter().zip(&phase).map(|(c, p)| c * p).sum()).collect()
        };
        let na = template.n_alpha();
        let columns: Vec<Vec<Complex64>> = (0..na)
            .into_par_iter()
            .map_init(FftPlanner::new, |planner, j| {
                let a = template.alpha(j);
                let direct = column_at(a);
                let image = shift_periodic(column_at(PI - a), PI + 2.0 * sig(a, &self.cp), planner);
                direct.into_iter().zip(image).map(|(x, y)| x + parity.sign() * y).collect()
            })
            .collect();
        let mut values = vec![Complex64::default(); template.n_beta() * na];
        for (j, col) in columns.into_iter().enumerate() {
            for (i, v) in col.into_iter().enumerate() {
                values[i * na + j] = v;
            }
        }
        template.with_values(values)
    }

    fn compose(&self, u: &BoundaryGrid, ext: Parity, part: Part, scale: f64) -> Result<BoundaryGrid> {
        let t = self.extend(u, ext)?;
        let h = self.hilbert(&t, part);
        let mut out = self.restrict_star(&h, Parity::Odd, u)?;
        if scale != 1.0 {
            out.scale(Complex64::new(scale, 0.0));
        }
        Ok(out)
    }

    /// `P_- = A_-^* H_- A_+`.
    pub fn p_minus(&self, w: &BoundaryGrid) -> Result<BoundaryGrid> {
        self.compose(w, Parity::Even, Part::Odd, 1.0)
    }

    /// `C_- = A_-^* H_- A_- / 2`.
    pub fn c_minus(&self, u: &BoundaryGrid) -> Result<BoundaryGrid> {
        self.compose(u, Parity::Odd, Part::Odd, 0.5)
    }

    /// `P_+ = A_-^* H_+ A_+`.
    pub fn p_plus(&self, w: &BoundaryGrid) -> Result<BoundaryGrid> {
        self.compose(w, Parity::Even, Part::Even, 1.0)
    }

    /// `C_+ = A_-^* H_+ A_- / 2`.
    pub fn c_plus(&self, u: &BoundaryGrid) -> Result<BoundaryGrid> {
        self.compose(u, Parity::Odd, Part::Even, 0.5)
    }

    /// `S_A^* u (beta, alpha) = u(beta + pi + 2 s(alpha), -alpha)` on the grid nodes.
    pub fn antipodal_pullback(&self, u: &BoundaryGrid) -> Result<BoundaryGrid> {
        self.check_grid(u)?;
        let na = u.n_alpha();
        let nb = u.n_beta();
        let mut planner = FftPlanner::new();
        let mut out = u.zeros_like();
        for j in 0..na {
            let src = u.mirror_alpha(j);
            let col: Vec<Complex64> = (0..nb).map(|i| u.value(i, src)).collect();
            let shifted = shift_periodic(col, PI + 2.0 * sig(u.alpha(j), &self.cp), &mut planner);
            for (i, v) in shifted.into_iter().enumerate() {
                out.set(i, j, v);
            }
        }
        Ok(out)
    }

    /// Splits `u` into its `S_A^*`-even and odd parts.
    pub fn antipodal_split(&self, u: &BoundaryGrid) -> Result<(BoundaryGrid, BoundaryGrid)> {
        let pulled = self.antipodal_pullback(u)?;
        let mut even = u.clone();
        even.axpy(Complex64::new(1.0, 0.0), &pulled)?;
        even.scale(Complex64::new(0.5, 0.0));
        let odd = u.difference(&even)?;
        Ok((even, odd))
    }

    /// Orthogonal projection onto the range of `I_0`: the `S_A^*`-odd part is
    /// removed first, then `id + C_-^2` is applied.
    pub fn project_to_range(&self, u: &BoundaryGrid) -> Result<Projection> {
        let (even, odd) = self.antipodal_split(u)?;
        let c1 = self.c_minus(&even)?;
        let c2 = self.c_minus(&c1)?;
        let mut projected = even;
        projected.axpy(Complex64::new(1.0, 0.0), &c2)?;
        let removed = u.difference(&projected)?.norm();
        let norm = u.norm();
        Ok(Projection {
            projected,
            removed_odd_norm: odd.norm(),
            relative_change: if norm > 0.0 { removed / norm } else { 0.0 },
        })
    }
}

/// Output of [`BoundaryOperators::project_to_range`].
#[derive(Debug, Clone)]
pub struct Projection {
    pub projected: BoundaryGrid,
    /// Norm of the `S_A^*`-odd part discarded before projecting.
    pub removed_odd_norm: f64,
    /// `||u - proj u|| / ||u||`.
    pub relative_change: f64,
}

/// Extension parity under `S^*` together with the measured parity under `S_A^*`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SymmetryClass {
    pub extension: Parity,
    pub antipodal: Parity,
}

impl SymmetryClass {
    /// Classifies `u` by measuring `||u -+ S_A^* u|| / ||u||` against `tol`;
    /// `None` if `u` has no definite antipodal parity.
    pub fn measure(ops: &BoundaryOperators, u: &BoundaryGrid, extension: Parity, tol: f64) -> Result<Option<Self>> {
        let (even, odd) = ops.antipodal_split(u)?;
        let n = u.norm();
        if n == 0.0 {
            return Ok(Some(Self {
                extension,
                antipodal: Parity::Even,
            }));
        }
        let antipodal = if odd.norm() <= tol * n {
            Some(Parity::Even)
        } else if even.norm() <= tol * n {
            Some(Parity::Odd)
        } else {
            None
        };
        Ok(antipodal.map(|antipodal| Self { extension, antipodal }))
    }
}

fn sgn_odd(x: i64) -> f64 {
    // arguments are odd, never zero
    if x > 0 {
        1.0
    } else {
        -1.0
    }
}

/// `P_- v'_{p,q} = mult * u'_{p,q}`.
pub fn p_minus_multiplier(p: i64, q: i64) -> Complex64 {
    Complex64::new(0.0, -(sgn_odd(2 * q + 1) - sgn_odd(2 * p - 2 * q - 1)))
}

/// `C_- u'_{p,q} = mult * u'_{p,q}`.
pub fn c_minus_multiplier(p: i64, q: i64) -> Complex64 {
    Complex64::new(0.0, -0.5 * (sgn_odd(2 * q + 1) + sgn_odd(2 * p - 2 * q - 1)))
}

/// The two boundary families.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    U,
    V,
}

/// Coefficients over `u'_{p,q}` or `v'_{p,q}`.
#[derive(Debug, Clone, PartialEq)]
pub struct PqSeries {
    pub family: Family,
    pub coeffs: BTreeMap<(i64, i64), Complex64>,
}

impl PqSeries {
    pub fn new(family: Family) -> Self {
        Self {
            family,
            coeffs: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, p: i64, q: i64, c: Complex64) {
        *self.coeffs.entry((p, q)).or_default() += c;
    }

    /// Evaluates the series at a point.
    pub fn eval(&self, beta: f64, alpha: f64, cp: &CurvatureParam) -> Complex64 {
        let f = match self.family {
            Family::U => u_prime,
            Family::V => v_prime,
        };
        self.coeffs.iter().map(|(&(p, q), c)| c * f(p, q, beta, alpha, cp)).sum()
    }

    /// Samples the series on the nodes of `template`.
    pub fn synthesize(&self, template: &BoundaryGrid, cp: &CurvatureParam) -> BoundaryGrid {
        let cp = *cp;
        template.zeros_like().sampled(&move |b: f64, a: f64| self.eval(b, a, &cp))
    }
}

/// `P_-` acting on a `v'` series; the result is a `u'` series.
pub fn spectral_p_minus(v: &PqSeries) -> Result<PqSeries> {
    if v.family != Family::V {
        return Err(Error::GridMismatch("P_- acts on v' series".into()));
    }
    let mut out = PqSeries::new(Family::U);
    for (&(p, q), c) in &v.coeffs {
        out.insert(p, q, c * p_minus_multiplier(p, q));
    }
    Ok(out)
}

/// `C_-` acting on a `u'` series.
pub fn spectral_c_minus(u: &PqSeries) -> Result<PqSeries> {
    if u.family != Family::U {
        return Err(Error::GridMismatch("C_- acts on u' series".into()));
    }
    let mut out = PqSeries::new(Family::U);
    for (&(p, q), c) in &u.coeffs {
        out.insert(p, q, c * c_minus_multiplier(p, q));
    }
    Ok(out)
}

/// One moment condition `|<u, psi_{n,k}>|` with `k` outside `[0, n]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentResidual {
    pub n: i64,
    pub k: i64,
    pub abs_inner: f64,
}

/// Moment residuals of a datum with a range verdict.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentReport {
    pub entries: Vec<MomentResidual>,
    pub data_norm: f64,
}

impl MomentReport {
    /// Largest residual relative to `||u||` (0 for `u = 0`).
    pub fn max_relative(&self) -> f64 {
        let m = self.entries.iter().fold(0.0, |m: f64, e| m.max(e.abs_inner));
        if self.data_norm > 0.0 {
            m / self.data_norm
        } else {
            0.0
        }
    }

    /// Whether every residual is below `threshold * ||u||`.
    pub fn in_range(&self, threshold: f64) -> bool {
        self.entries.iter().all(|e| e.abs_inner <= threshold * self.data_norm)
    }
}

/// `|<u, psi_{n,k}>|` for `n <= nmax` and `k` in `[-kpad, -1]` and `[n+1, n+kpad]`.
pub fn moment_residuals(u: &BoundaryGrid, nmax: usize, kpad: usize, cp: &CurvatureParam) -> MomentReport {
    let idx: Vec<BasisIndex> = (0..=nmax as i64)
        .flat_map(|n| {
            let pad = kpad as i64;
            (-pad..0).chain(n + 1..=n + pad).map(move |k| BasisIndex::new(n, k))
        })
        .collect();
    let entries = idx
        .par_iter()
        .map(|&i| {
            let cp = *cp;
            let v = u.inner_fn(&move |b: f64, a: f64| psi_kappa(i, b, a, &cp));
            MomentResidual {
                n: i.n,
                k: i.k,
                abs_inner: v.norm(),
            }
        })
        .collect();
    MomentReport {
        entries,
        data_norm: u.norm(),
    }
}
