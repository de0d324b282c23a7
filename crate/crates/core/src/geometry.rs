//! Constant-curvature metrics on the unit disk.
//!
//! The metric is `c(z)^{-2} |dz|^2` with `c(z) = 1 + kappa |z|^2`, which has
//! constant curvature `4 kappa`. Everything here is closed form: isometries,
//! unit-speed geodesics, exit times, the scattering relation, the scattering
//! signature `s(alpha) = atan(lambda tan alpha)` and the footpoint map.
//!
//! Angles are radians. Internally nothing is wrapped; [`FanBeamPoint`] reduces
//! its angles when constructed.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Slack allowed when checking closed-disk and inward-range membership.
pub const DOMAIN_TOL: f64 = 1e-12;

/// Distance from tangency kept by quadratures that sample the fan-beam angle.
pub const TANGENTIAL_GUARD: f64 = 1e-9;

/// Curvature parameter `kappa` in (-1, 1) with its derived constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvatureParam {
    kappa: f64,
    lambda: f64,
    c1: f64,
}

impl CurvatureParam {
    pub fn new(kappa: f64) -> Result<Self> {
        if !kappa.is_finite() || kappa.abs() >= 1.0 {
            return Err(Error::InvalidCurvature(kappa));
        }
        Ok(Self {
            kappa,
            lambda: (1.0 - kappa) / (1.0 + kappa),
            c1: 1.0 + kappa,
        })
    }

    pub fn euclidean() -> Self {
        Self::new(0.0).expect("zero curvature is valid")
    }

    #[inline]
    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    /// `(1 - kappa) / (1 + kappa)`.
    #[inline]
    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Conformal factor on the boundary circle, `1 + kappa`.
    #[inline]
    pub fn c1(&self) -> f64 {
        self.c1
    }

    /// The parameter with opposite curvature.
    pub fn opposite(&self) -> Self {
        Self::new(-self.kappa).expect("negation stays in range")
    }
}

/// A point of the closed unit disk.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiskPoint(pub Complex64);

impl DiskPoint {
    pub fn new(z: Complex64) -> Result<Self> {
        if !(z.norm() <= 1.0 + DOMAIN_TOL) {
            return Err(Error::OutsideDisk(z.norm()));
        }
        Ok(Self(z))
    }

    pub fn from_polar(rho: f64, omega: f64) -> Result<Self> {
        Self::new(Complex64::from_polar(rho, omega))
    }

    pub fn rho(&self) -> f64 {
        self.0.norm()
    }

    pub fn omega(&self) -> f64 {
        self.0.arg()
    }

    pub fn is_boundary(&self) -> bool {
        (self.0.norm() - 1.0).abs() <= DOMAIN_TOL
    }
}

/// Reduces an angle to [0, 2 pi).
pub fn reduce_angle(x: f64) -> f64 {
    let r = x.rem_euclid(TAU);
    if r >= TAU {
        0.0
    } else {
        r
    }
}

/// Reduces an angle to (-pi, pi].
pub fn reduce_symmetric(x: f64) -> f64 {
    let r = reduce_angle(x);
    if r > PI {
        r - TAU
    } else {
        r
    }
}

/// Fan-beam coordinates `(beta, alpha)` of a point of the boundary of the
/// unit circle bundle: base point `e^{i beta}`, direction at angle `alpha`
/// from the inward normal.
///
/// `beta` is stored in [0, 2 pi) and `alpha` in (-pi, pi].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FanBeamPoint {
    pub beta: f64,
    pub alpha: f64,
}

impl FanBeamPoint {
    pub fn new(beta: f64, alpha: f64) -> Self {
        Self {
            beta: reduce_angle(beta),
            alpha: reduce_symmetric(alpha),
        }
    }

    pub fn is_inward(&self) -> bool {
        self.alpha.abs() <= FRAC_PI_2 + DOMAIN_TOL
    }

    /// Base point on the boundary circle.
    pub fn base_point(&self) -> Complex64 {
        Complex64::cis(self.beta)
    }
}

/// `c(z) = 1 + kappa |z|^2`.
#[inline]
pub fn conformal_factor(z: Complex64, cp: &CurvatureParam) -> f64 {
    1.0 + cp.kappa * z.norm_sqr()
}

/// The orthogonality weight `w(z) = (1 + kappa |z|^2) / (1 - kappa |z|^2)`.
#[inline]
pub fn orthogonality_weight(z: Complex64, cp: &CurvatureParam) -> f64 {
    let r2 = cp.kappa * z.norm_sqr();
    (1.0 + r2) / (1.0 - r2)
}

/// Isometry `z -> (a z + b) / (-kappa conj(b) z + conj(a))` with
/// `|a|^2 + kappa |b|^2 = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MoebiusMap {
    pub a: Complex64,
    pub b: Complex64,
    kappa: f64,
}

impl MoebiusMap {
    /// Builds the map from raw coefficients, normalizing the determinant.
    pub fn new(a: Complex64, b: Complex64, cp: &CurvatureParam) -> Option<Self> {
        let det = a.norm_sqr() + cp.kappa * b.norm_sqr();
        if !(det > 0.0) {
            return None;
        }
        let s = det.sqrt();
        Some(Self {
            a: a / s,
            b: b / s,
            kappa: cp.kappa,
        })
    }

    pub fn determinant(&self) -> f64 {
        self.a.norm_sqr() + self.kappa * self.b.norm_sqr()
    }

    fn denominator(&self, z: Complex64) -> Complex64 {
        -self.kappa * self.b.conj() * z + self.a.conj()
    }

    pub fn apply(&self, z: Complex64) -> Complex64 {
        (self.a * z + self.b) / self.denominator(z)
    }

    pub fn derivative(&self, z: Complex64) -> Complex64 {
        let d = self.denominator(z);
        Complex64::new(self.determinant(), 0.0) / (d * d)
    }
}

/// The isometry `T` with `T(0) = z1` and `T'(0) = c(z1) e^{i theta}`, i.e.
/// `T(z) = (e^{i theta} z + z1) / (1 - kappa e^{i theta} conj(z1) z)`.
pub fn isometry_from_tangent(z1: Complex64, theta: f64, cp: &CurvatureParam) -> Result<MoebiusMap> {
    DiskPoint::new(z1)?;
    let r = 1.0 / conformal_factor(z1, cp).sqrt();
    let half = Complex64::cis(0.5 * theta);
    Ok(MoebiusMap {
        a: r * half,
        b: r * half.conj() * z1,
        kappa: cp.kappa,
    })
}

/// Unit-speed profile of the geodesic leaving 0 along the real axis.
#[inline]
fn profile(t: f64, kappa: f64) -> f64 {
    if kappa > 0.0 {
        let s = kappa.sqrt();
        (s * t).tan() / s
    } else if kappa < 0.0 {
        let s = (-kappa).sqrt();
        (s * t).tanh() / s
    } else {
        t
    }
}

/// Inverse of [`profile`]: arclength from 0 to the real point `x`.
#[inline]
fn profile_arclength(x: f64, kappa: f64) -> f64 {
    if kappa > 0.0 {
        let s = kappa.sqrt();
        (s * x).atan() / s
    } else if kappa < 0.0 {
        let s = (-kappa).sqrt();
        (s * x).atanh() / s
    } else {
        x
    }
}

/// `cos(alpha)` on the inward range, exactly zero at and beyond tangency.
#[inline]
fn inward_cos(alpha: f64) -> f64 {
    if alpha.abs() >= FRAC_PI_2 {
        0.0
    } else {
        alpha.cos()
    }
}

fn check_inward(alpha: f64) -> Result<()> {
    if !(alpha.abs() <= FRAC_PI_2 + DOMAIN_TOL) {
        return Err(Error::NotInward(alpha));
    }
    Ok(())
}

/// Length of the geodesic entering with fan-beam angle `alpha`.
pub fn exit_time(alpha: f64, cp: &CurvatureParam) -> Result<f64> {
    check_inward(alpha)?;
    let x = 2.0 * inward_cos(alpha) / (1.0 - cp.kappa);
    Ok(profile_arclength(x, cp.kappa))
}

/// A maximal geodesic of the disk, entering at fan-beam point `(beta, alpha)`.
///
/// It is `e^{i beta} T(x)` with `T(x) = (1 - e^{i alpha} x) / (1 + kappa e^{i alpha} x)`
/// where `x` runs over `[0, 2 cos(alpha) / (1 - kappa)]`; the unit-speed
/// parameter is `t` with `x = profile(t)`.
#[derive(Debug, Clone, Copy)]
pub struct Geodesic {
    entry: Complex64,
    dir: Complex64,
    kappa: f64,
    x_exit: f64,
    tau: f64,
}

impl Geodesic {
    pub fn new(bp: FanBeamPoint, cp: &CurvatureParam) -> Result<Self> {
        Self::from_angles(bp.beta, bp.alpha, cp)
    }

    /// Like [`Geodesic::new`] but takes unreduced angles.
    pub fn from_angles(beta: f64, alpha: f64, cp: &CurvatureParam) -> Result<Self> {
        check_inward(alpha)?;
        let x_exit = 2.0 * inward_cos(alpha) / (1.0 - cp.kappa);
        Ok(Self {
            entry: Complex64::cis(beta),
            dir: Complex64::cis(alpha),
            kappa: cp.kappa,
            x_exit,
            tau: profile_arclength(x_exit, cp.kappa),
        })
    }

    /// Exit time (total length).
    pub fn tau(&self) -> f64 {
        self.tau
    }

    /// Möbius parameter of the exit point.
    pub fn exit_param(&self) -> f64 {
        self.x_exit
    }

    /// Point at Möbius parameter `x`.
    pub fn point_at_param(&self, x: f64) -> Complex64 {
        let ex = self.dir * x;
        self.entry * (1.0 - ex) / (1.0 + self.kappa * ex)
    }

    /// Arclength corresponding to Möbius parameter `x`.
    pub fn arclength_of_param(&self, x: f64) -> f64 {
        profile_arclength(x, self.kappa)
    }

    /// Möbius parameter corresponding to arclength `t`.
    pub fn param_of_arclength(&self, t: f64) -> f64 {
        profile(t, self.kappa)
    }

    /// Point at arclength `t`, without range checks.
    pub fn point_unchecked(&self, t: f64) -> Complex64 {
        self.point_at_param(profile(t, self.kappa))
    }

    /// Point at arclength `t` in `[0, tau]`.
    pub fn point(&self, t: f64) -> Result<Complex64> {
        let slack = DOMAIN_TOL * self.tau.max(1.0);
        if !(t >= -slack && t <= self.tau + slack) {
            return Err(Error::ArclengthOutOfRange { t, tau: self.tau });
        }
        Ok(self.point_unchecked(t.clamp(0.0, self.tau)))
    }
}

/// Point at arclength `t` of the unit-speed geodesic entering at `bp`.
pub fn geodesic_point(bp: FanBeamPoint, t: f64, cp: &CurvatureParam) -> Result<Complex64> {
    Geodesic::new(bp, cp)?.point(t)
}

/// Scattering signature for the ratio `lambda`, on the continuous branch
/// with `s(0) = 0` and `s(alpha + pi) = s(alpha) + pi`.
#[inline]
fn signature_with_ratio(alpha: f64, lambda: f64) -> f64 {
    let m = (alpha / PI).round();
    let r = alpha - m * PI;
    (lambda * r.sin()).atan2(r.cos()) + m * PI
}

/// The scattering signature `s(alpha) = atan(lambda tan alpha)`, continuous
/// and strictly increasing on the real line.
#[inline]
pub fn sig(alpha: f64, cp: &CurvatureParam) -> f64 {
    signature_with_ratio(alpha, cp.lambda)
}

/// Derivative of [`sig`]: `(1 - kappa^2) / (1 + kappa^2 + 2 kappa cos 2 alpha)`.
#[inline]
pub fn sig_prime(alpha: f64, cp: &CurvatureParam) -> f64 {
    let k = cp.kappa;
    (1.0 - k * k) / (1.0 + k * k + 2.0 * k * (2.0 * alpha).cos())
}

/// Inverse of [`sig`]; equal to the signature of the opposite curvature.
#[inline]
pub fn sig_inverse(s: f64, cp: &CurvatureParam) -> f64 {
    signature_with_ratio(s, 1.0 / cp.lambda)
}

/// Scattering relation `(beta, alpha) -> (beta + pi + 2 s(alpha), pi - alpha)`.
pub fn scattering(bp: FanBeamPoint, cp: &CurvatureParam) -> FanBeamPoint {
    FanBeamPoint::new(bp.beta + PI + 2.0 * sig(bp.alpha, cp), PI - bp.alpha)
}

/// Antipodal scattering relation `(beta, alpha) -> (beta + pi + 2 s(alpha), -alpha)`.
pub fn antipodal_scattering(bp: FanBeamPoint, cp: &CurvatureParam) -> FanBeamPoint {
    FanBeamPoint::new(bp.beta + PI + 2.0 * sig(bp.alpha, cp), -bp.alpha)
}

/// Change of fiber variable `theta -> theta'` at radius `rho`, with its
/// derivative `d theta' / d theta`.
pub fn fiber_change(rho: f64, theta: f64, cp: &CurvatureParam) -> (f64, f64) {
    let kr = cp.kappa * rho * rho;
    let (s2, c2) = (2.0 * theta).sin_cos();
    let theta_prime = theta - (kr * s2).atan2(1.0 + kr * c2);
    let s = theta.sin();
    let jac = (1.0 - kr * kr) / ((1.0 + kr) * (1.0 + kr) - 4.0 * kr * s * s);
    (theta_prime, jac)
}

/// Footpoint map without angle reduction: the fan-beam coordinates
/// `(beta_-, alpha_-)` of the geodesic through `rho e^{i omega}` with
/// direction angle `theta`. `alpha_-` lies in [-pi/2, pi/2].
pub fn footpoint_unwrapped(rho: f64, omega: f64, theta: f64, cp: &CurvatureParam) -> (f64, f64) {
    let th = theta - omega;
    let k = cp.kappa;
    let sin_alpha = (-(1.0 + k) * rho * th.sin() / (1.0 + k * rho * rho)).clamp(-1.0, 1.0);
    let alpha = sin_alpha.asin();
    let (theta_prime, _) = fiber_change(rho, th, cp);
    let beta = theta_prime - PI - sig(alpha, cp) + omega;
    (beta, alpha)
}

/// Footpoint map of an interior point `rho e^{i omega}`, `0 <= rho < 1`.
pub fn footpoint(rho: f64, omega: f64, theta: f64, cp: &CurvatureParam) -> Result<FanBeamPoint> {
    if !(0.0..1.0).contains(&rho) {
        return Err(Error::NotInterior(rho));
    }
    let (beta, alpha) = footpoint_unwrapped(rho, omega, theta, cp);
    Ok(FanBeamPoint::new(beta, alpha))
}
