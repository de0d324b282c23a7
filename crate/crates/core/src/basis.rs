//! Special-function families on the disk and on the boundary.
//!
//! Disk side: the Zernike polynomials `Z_{n,k}` (complex convention with
//! `Z_{n,0} = z^n` and `Z_{n,k}(e^{i w}) = (-1)^k e^{i(n-2k)w}`) and their
//! deformed versions `Z^kappa_{n,k}`. Boundary side: `e_{p,l}`, the
//! `sqrt(s')`-weighted `phi'_{p,q}`, their symmetrizations `u'`, `v'`, and
//! `psi^kappa_{n,k} = (-1)^n / (4 pi) u'_{n-2k, n-k}`.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::geometry::{sig, sig_prime, CurvatureParam, DiskPoint};

/// Index `(n, k)` of the disk and boundary families.
///
/// Ordered lexicographically in `(n, k)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BasisIndex {
    pub n: i64,
    pub k: i64,
}

impl BasisIndex {
    pub fn new(n: i64, k: i64) -> Self {
        assert!(n >= 0, "basis index needs n >= 0, got {n}");
        Self { n, k }
    }

    /// The `(p, q) = (n - 2k, n - k)` labels of the `u'` family.
    pub fn to_pq(self) -> (i64, i64) {
        (self.n - 2 * self.k, self.n - self.k)
    }

    /// Inverse of [`BasisIndex::to_pq`]; `None` when `n = 2q - p` is negative.
    pub fn from_pq(p: i64, q: i64) -> Option<Self> {
        let n = 2 * q - p;
        (n >= 0).then_some(Self { n, k: q - p })
    }

    /// Whether `0 <= k <= n` (the disk family).
    pub fn is_disk(self) -> bool {
        (0..=self.n).contains(&self.k)
    }

    /// Angular frequency `n - 2k`.
    pub fn azimuthal(self) -> i64 {
        self.n - 2 * self.k
    }

    fn check_disk(self) -> Result<()> {
        if self.is_disk() {
            Ok(())
        } else {
            Err(Error::InvalidIndex { n: self.n, k: self.k })
        }
    }
}

/// All disk indices `0 <= k <= n <= nmax`, in lexicographic order.
pub fn disk_indices(nmax: usize) -> impl Iterator<Item = BasisIndex> {
    (0..=nmax as i64).flat_map(|n| (0..=n).map(move |k| BasisIndex { n, k }))
}

/// Number of disk indices with `n <= nmax`.
pub fn disk_count(nmax: usize) -> usize {
    (nmax + 1) * (nmax + 2) / 2
}

/// Complex coefficients indexed by [`BasisIndex`], band-limited to `nmax`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoeffTable {
    pub kappa: f64,
    pub nmax: usize,
    entries: BTreeMap<BasisIndex, Complex64>,
}

impl CoeffTable {
    pub fn new(kappa: f64, nmax: usize) -> Self {
        Self {
            kappa,
            nmax,
            entries: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, idx: BasisIndex, value: Complex64) -> Result<()> {
        if idx.n > self.nmax as i64 {
            return Err(Error::InvalidIndex { n: idx.n, k: idx.k });
        }
        self.entries.insert(idx, value);
        Ok(())
    }

    pub fn get(&self, idx: BasisIndex) -> Complex64 {
        self.entries.get(&idx).copied().unwrap_or_default()
    }

    pub fn iter(&self) -> impl Iterator<Item = (BasisIndex, Complex64)> + '_ {
        self.entries.iter().map(|(i, v)| (*i, *v))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Sum of squared moduli.
    pub fn norm_sqr(&self) -> f64 {
        self.entries.values().map(|v| v.norm_sqr()).sum()
    }

    /// Largest entrywise difference to `other` over the union of indices.
    pub fn max_abs_diff(&self, other: &CoeffTable) -> f64 {
        self.entries
            .keys()
            .chain(other.entries.keys())
            .map(|i| (self.get(*i) - other.get(*i)).norm())
            .fold(0.0, f64::max)
    }
}

/// `W_n(t) = i^n U_n(t)` via `W_{n+1} = 2 i t W_n + W_{n-1}`.
pub fn cheb_w(n: usize, t: f64) -> Complex64 {
    let two_it = Complex64::new(0.0, 2.0 * t);
    let mut prev = Complex64::new(1.0, 0.0);
    if n == 0 {
        return prev;
    }
    let mut cur = two_it;
    for _ in 1..n {
        let next = two_it * cur + prev;
        prev = cur;
        cur = next;
    }
    cur
}

fn binomial(n: i64, k: i64) -> f64 {
    if k < 0 || k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut acc = 1.0;
    for i in 0..k {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    acc.round()
}

/// Radial profile `R_{n,k}` of `Z_{n,k}(rho e^{i w}) = e^{i(n-2k)w} R_{n,k}(rho)`.
///
/// Obtained by expanding `W_n(rho sin theta)` in harmonics and keeping the
/// `e^{-i(n-2k) theta}` coefficient; all coefficients are integers.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialProfile {
    pub n: i64,
    pub k: i64,
    /// `(power, coefficient)` pairs, highest power first.
    terms: Vec<(i32, f64)>,
}

impl RadialProfile {
    pub fn new(idx: BasisIndex) -> Result<Self> {
        idx.check_disk()?;
        let (n, k) = (idx.n, idx.k);
        let jmax = k.min(n - k);
        let terms = (0..=jmax)
            .map(|j| {
                let sign = if (k + j) % 2 == 0 { 1.0 } else { -1.0 };
                let c = sign * binomial(n - j, j) * binomial(n - 2 * j, k - j);
                ((n - 2 * j) as i32, c)
            })
            .collect();
        Ok(Self { n, k, terms })
    }

    pub fn terms(&self) -> &[(i32, f64)] {
        &self.terms
    }

    pub fn eval(&self, rho: f64) -> f64 {
        self.terms.iter().map(|&(p, c)| c * rho.powi(p)).sum()
    }
}

/// Radial profiles for every disk index up to `nmax`, computed once.
///
/// Shared read-only between threads during synthesis.
#[derive(Debug, Clone)]
pub struct ZernikeTable {
    nmax: usize,
    profiles: Vec<RadialProfile>,
}

impl ZernikeTable {
    pub fn new(nmax: usize) -> Self {
        let profiles = disk_indices(nmax)
            .map(|i| RadialProfile::new(i).expect("disk index"))
            .collect();
        Self { nmax, profiles }
    }

    pub fn nmax(&self) -> usize {
        self.nmax
    }

    pub fn profile(&self, idx: BasisIndex) -> Result<&RadialProfile> {
        idx.check_disk()?;
        if idx.n > self.nmax as i64 {
            return Err(Error::InvalidIndex { n: idx.n, k: idx.k });
        }
        let pos = (idx.n * (idx.n + 1) / 2 + idx.k) as usize;
        Ok(&self.profiles[pos])
    }

    pub fn zernike(&self, idx: BasisIndex, z: Complex64) -> Result<Complex64> {
        let r = self.profile(idx)?.eval(z.norm());
        Ok(angular(idx, z) * r)
    }

    pub fn zernike_kappa(&self, idx: BasisIndex, z: Complex64, cp: &CurvatureParam) -> Result<Complex64> {
        let (weight, arg) = kappa_transform(z, cp);
        Ok(weight * self.zernike(idx, arg)?)
    }
}

/// `e^{i(n-2k) arg z}`, with the convention `arg 0 = 0`.
fn angular(idx: BasisIndex, z: Complex64) -> Complex64 {
    let m = idx.azimuthal();
    if m == 0 {
        return Complex64::new(1.0, 0.0);
    }
    let r = z.norm();
    if r == 0.0 {
        return Complex64::new(1.0, 0.0);
    }
    let u = z / r;
    if m > 0 {
        u.powi(m as i32)
    } else {
        u.conj().powi((-m) as i32)
    }
}

/// Weight and mapped argument of `Z^kappa(z) = weight * Z(arg)`.
fn kappa_transform(z: Complex64, cp: &CurvatureParam) -> (f64, Complex64) {
    let k = cp.kappa();
    let kr = k * z.norm_sqr();
    let weight = cp.lambda().sqrt() * (1.0 + kr) / (1.0 - kr);
    (weight, z * ((1.0 - k) / (1.0 - kr)))
}

/// Zernike polynomial `Z_{n,k}(z)`, `0 <= k <= n`, `|z| <= 1`.
pub fn zernike(idx: BasisIndex, z: Complex64) -> Result<Complex64> {
    DiskPoint::new(z)?;
    let r = RadialProfile::new(idx)?.eval(z.norm());
    Ok(angular(idx, z) * r)
}

/// Deformed Zernike function
/// `Z^kappa_{n,k}(z) = sqrt(lambda) (1 + kappa|z|^2)/(1 - kappa|z|^2) Z_{n,k}((1-kappa) z / (1 - kappa|z|^2))`.
pub fn zernike_kappa(idx: BasisIndex, z: Complex64, cp: &CurvatureParam) -> Result<Complex64> {
    DiskPoint::new(z)?;
    let (weight, arg) = kappa_transform(z, cp);
    Ok(weight * zernike(idx, arg)?)
}

/// `Z^kappa_{n,k}` normalized in `L^2(M, w dVol)`.
pub fn zernike_kappa_hat(idx: BasisIndex, z: Complex64, cp: &CurvatureParam) -> Result<Complex64> {
    Ok(zernike_kappa(idx, z, cp)? / norms(idx, cp).1.sqrt())
}

/// `g_n(s) = e^{i(n+1)s} + (-1)^n e^{-i(n+1)s}`.
fn g_n(n: i64, s: f64) -> Complex64 {
    let e = Complex64::cis((n + 1) as f64 * s);
    if n % 2 == 0 {
        e + e.conj()
    } else {
        e - e.conj()
    }
}

fn parity_sign(n: i64) -> f64 {
    if n % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Boundary function
/// `psi^kappa_{n,k}(beta, alpha) = (-1)^n/(4 pi) sqrt(s'(alpha)) e^{i(n-2k)(beta + s(alpha))} g_n(s(alpha))`,
/// defined for every `k` in Z.
pub fn psi_kappa(idx: BasisIndex, beta: f64, alpha: f64, cp: &CurvatureParam) -> Complex64 {
    let s = sig(alpha, cp);
    let phase = Complex64::cis(idx.azimuthal() as f64 * (beta + s));
    parity_sign(idx.n) / (4.0 * PI) * sig_prime(alpha, cp).sqrt() * phase * g_n(idx.n, s)
}

/// `psi^kappa_{n,k}` normalized in `L^2(d Sigma^2)`: `2 sqrt(1 + kappa) psi`.
pub fn psi_hat(idx: BasisIndex, beta: f64, alpha: f64, cp: &CurvatureParam) -> Complex64 {
    2.0 * cp.c1().sqrt() * psi_kappa(idx, beta, alpha, cp)
}

/// `psi^kappa_{n,k} / cos(alpha)` without the division: uses
/// `sqrt(s') / cos(alpha) = sqrt((1+kappa)/(1-kappa)) s' / cos(s)` and
/// `g_n(s) / (2 cos s) = W_n(sin s)`, so it stays finite at tangency.
pub fn psi_over_mu(idx: BasisIndex, beta: f64, alpha: f64, cp: &CurvatureParam) -> Complex64 {
    let s = sig(alpha, cp);
    let phase = Complex64::cis(idx.azimuthal() as f64 * (beta + s));
    let scale = parity_sign(idx.n) / (2.0 * PI) / cp.lambda().sqrt() * sig_prime(alpha, cp);
    scale * phase * cheb_w(idx.n as usize, s.sin())
}

/// `e_{p,l}(beta, alpha) = e^{i(p beta + l s(alpha))}`.
pub fn e_pl(p: i64, l: i64, beta: f64, alpha: f64, cp: &CurvatureParam) -> Complex64 {
    Complex64::cis(p as f64 * beta + l as f64 * sig(alpha, cp))
}

/// `phi'_{p,q} = sqrt(s') e_{p, 2q+1}`.
pub fn phi_prime(p: i64, q: i64, beta: f64, alpha: f64, cp: &CurvatureParam) -> Complex64 {
    sig_prime(alpha, cp).sqrt() * e_pl(p, 2 * q + 1, beta, alpha, cp)
}

/// `u'_{p,q} = phi'_{p,q} + (-1)^p phi'_{p,p-q-1}` (even under the antipodal scattering pullback).
///
/// Vanishes identically when `p = 2q + 1`.
pub fn u_prime(p: i64, q: i64, beta: f64, alpha: f64, cp: &CurvatureParam) -> Complex64 {
    phi_prime(p, q, beta, alpha, cp) + parity_sign(p) * phi_prime(p, p - q - 1, beta, alpha, cp)
}

/// `v'_{p,q} = phi'_{p,q} - (-1)^p phi'_{p,p-q-1}` (odd under the antipodal scattering pullback).
pub fn v_prime(p: i64, q: i64, beta: f64, alpha: f64, cp: &CurvatureParam) -> Complex64 {
    phi_prime(p, q, beta, alpha, cp) - parity_sign(p) * phi_prime(p, p - q - 1, beta, alpha, cp)
}

/// Values of the boundary family at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryFamily {
    /// `e_{p, 2q+1}`
    pub e: Complex64,
    pub phi: Complex64,
    pub u: Complex64,
    pub v: Complex64,
}

pub fn boundary_family(p: i64, q: i64, beta: f64, alpha: f64, cp: &CurvatureParam) -> BoundaryFamily {
    let root = sig_prime(alpha, cp).sqrt();
    let e = e_pl(p, 2 * q + 1, beta, alpha, cp);
    let phi = root * e;
    let mirror = parity_sign(p) * root * e_pl(p, 2 * (p - q - 1) + 1, beta, alpha, cp);
    BoundaryFamily {
        e,
        phi,
        u: phi + mirror,
        v: phi - mirror,
    }
}

/// Squared norms `(||psi^kappa_{n,k}||^2, ||Z^kappa_{n,k}||^2)` in
/// `L^2(d Sigma^2)` and `L^2(M, w dVol)` respectively.
pub fn norms(idx: BasisIndex, cp: &CurvatureParam) -> (f64, f64) {
    let k = cp.kappa();
    let psi = 1.0 / (4.0 * (1.0 + k));
    let zk = PI / ((1.0 - k * k) * (idx.n + 1) as f64);
    (psi, zk)
}
