//! The model twistor family: BPS-ray integrals, corrected characters,
//! Gibbons-Hawking potential and connection, Darboux coordinates, the
//! hyper-Kahler metric and the Taub-NUT chart near a singular fiber.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;

use crate::linalg::{c, det_real, wedge, CMat, CVec, RMat};
use crate::modeldata::{Chart, Charge, FieldPoint, ModelData};
use crate::semiflat::{
    basis_covector, da, dabar, darboux_sf, darboux_sf_differential, dlog_x_electric,
    dlog_x_magnetic_sf, ix_im, ix_re, ix_theta_e, ix_theta_m, numeric_jacobian,
    varpi_from_potential, GeomError, PotentialConnection, TwoFormSample,
};
use crate::specfun::{
    a_auto, reduce_angle, reduce_angle_positive, sign_regularized_sum, sin_k0_over_n_series,
    t_auto, xsf_value, SeriesControl,
};

/// Minimum angular distance between a BPS ray and a sector ray.
pub const GOOD_MARGIN: f64 = 1e-9;

/// Below this angular distance from its contour, `zeta` is treated as lying
/// on it.
pub const ON_RAY_TOL: f64 = 1e-12;

/// Angular distance below which the Cauchy pole is subtracted exactly.
const SUBTRACT_BELOW: f64 = 0.2;

/// Trapezoid strip-to-step ratio; the discretization error is `e^{-STEPS}`.
const STEPS: f64 = 36.0;

/// A decomposition of the `zeta`-plane into `2K` sectors bounded by the
/// rays at angles `phi0 + A pi / K`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SectorDecomposition {
    /// Half the number of sectors.
    pub k: usize,
    /// Angle of ray `r_0`.
    pub phi0: f64,
}

impl SectorDecomposition {
    /// Decomposition with `K >= 5`.
    pub fn new(k: usize, phi0: f64) -> Result<Self, GeomError> {
        if k < 5 {
            return Err(GeomError::Undefined(format!("need K >= 5, got {k}")));
        }
        Ok(SectorDecomposition { k, phi0 })
    }

    /// Opening angle `pi / K` of a sector.
    pub fn width(&self) -> f64 {
        PI / self.k as f64
    }

    /// Angle of ray `r_A`.
    pub fn ray_angle(&self, a: i64) -> f64 {
        self.phi0 + a as f64 * self.width()
    }

    /// Index `A` in `1..=2K` of the sector `[r_{A-1}, r_A)` containing an angle.
    pub fn sector_of(&self, angle: f64) -> i64 {
        let t = reduce_angle_positive(angle - self.phi0) / self.width();
        let a = libm::floor(t) as i64;
        a.rem_euclid(2 * self.k as i64) + 1
    }

    /// Angular distance from `angle` to the nearest sector ray.
    pub fn margin(&self, angle: f64) -> f64 {
        let w = self.width();
        let t = reduce_angle_positive(angle - self.phi0) % w;
        t.min(w - t)
    }
}

/// Angle `arg(-Z_{s gamma})` of the BPS ray of a signed light.
pub fn bps_ray_angle(md: &ModelData, light: usize, sign: i8, u: &[Complex64]) -> f64 {
    (-(sign as f64) * md.z_light(light, u)).arg()
}

/// Smallest angular distance between a BPS ray and a sector ray over all
/// lights with nonzero index and both signs.
pub fn decomposition_margin(md: &ModelData, u: &[Complex64], dec: &SectorDecomposition) -> f64 {
    let mut m = f64::INFINITY;
    for l in active_lights(md) {
        for s in [1i8, -1] {
            m = m.min(dec.margin(bps_ray_angle(md, l, s, u)));
        }
    }
    m
}

/// Checks that no BPS ray at `u` lies on a sector ray.
pub fn check_good(md: &ModelData, u: &[Complex64], dec: &SectorDecomposition) -> Result<(), GeomError> {
    for l in active_lights(md) {
        if md.z_light(l, u).norm() == 0.0 {
            return Err(GeomError::Model(crate::modeldata::ModelError::Singular { light: l }));
        }
        for s in [1i8, -1] {
            if dec.margin(bps_ray_angle(md, l, s, u)) <= GOOD_MARGIN {
                return Err(GeomError::NotGood { light: l });
            }
        }
    }
    Ok(())
}

/// A good decomposition with `K` sectors per half-plane: `phi0` is the
/// midpoint of the largest gap between BPS-ray angles reduced modulo
/// `pi/K` (ties go to the smallest `phi0`); with no lights `phi0 = 0`.
pub fn good_decomposition(md: &ModelData, u: &[Complex64], k: usize) -> Result<SectorDecomposition, GeomError> {
    let dec = SectorDecomposition::new(k, 0.0)?;
    let w = dec.width();
    let mut angles: Vec<f64> = Vec::new();
    for l in active_lights(md) {
        if md.z_light(l, u).norm() == 0.0 {
            return Err(GeomError::Model(crate::modeldata::ModelError::Singular { light: l }));
        }
        angles.push(reduce_angle_positive(bps_ray_angle(md, l, 1, u)) % w);
    }
    if angles.is_empty() {
        return Ok(dec);
    }
    angles.sort_by(|a, b| a.total_cmp(b));
    let mut best_gap = -1.0;
    let mut best_phi = 0.0;
    for (i, &a) in angles.iter().enumerate() {
        let next = if i + 1 < angles.len() { angles[i + 1] } else { angles[0] + w };
        let gap = next - a;
        let mid = (a + gap / 2.0) % w;
        if gap > best_gap + 1e-12 || ((gap - best_gap).abs() <= 1e-12 && mid < best_phi) {
            best_gap = gap;
            best_phi = mid;
        }
    }
    let dec = SectorDecomposition::new(k, best_phi)?;
    check_good(md, u, &dec)?;
    Ok(dec)
}

fn active_lights(md: &ModelData) -> impl Iterator<Item = usize> + '_ {
    (0..md.n_lights()).filter(move |&l| md.lights[l].omega > 0)
}

/// Which side of a contour `zeta` is taken on when it lies on it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RaySide {
    /// Limit from the clockwise side.
    Clockwise,
    /// Limit from the counterclockwise side (the contour is pushed
    /// slightly clockwise).
    Counterclockwise,
}

/// Which contour to integrate over, relative to the sector of the BPS ray.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Continuation {
    /// The ray `r_{A(gamma)}` bounding the sector of the BPS ray.
    None,
    /// The next ray counterclockwise.
    Plus,
    /// The previous ray clockwise.
    Minus,
}

impl Continuation {
    fn shift(self) -> i64 {
        match self {
            Continuation::None => 0,
            Continuation::Plus => 1,
            Continuation::Minus => -1,
        }
    }
}

/// Decay data of an integrand bounded by `exp(-2 zc cosh s)` and analytic
/// for `|Im s| < strip`.
#[derive(Debug, Clone, Copy)]
struct Decay {
    zc: f64,
    strip: f64,
}

impl Decay {
    fn for_ray(z: Complex64, phi: f64) -> Result<Self, GeomError> {
        let rel = reduce_angle(phi - (-z).arg());
        let strip = PI / 2.0 - rel.abs();
        if !(strip > 0.0) || z.norm() == 0.0 {
            return Err(GeomError::Undefined(String::from("contour not in the decay half-plane")));
        }
        Ok(Decay { zc: z.norm() * libm::cos(rel), strip })
    }

    fn half_width(&self) -> f64 {
        libm::acosh((20.0 / self.zc).max(1.0)).max(1.0)
    }
}

/// `int ds (zeta' + w)/(zeta' - w) psi(zeta')` along `zeta' = e^{i phi + s}`.
/// Near the contour the pole is subtracted exactly; on it, `side` picks the
/// limit.
fn cauchy_ray<F: Fn(Complex64) -> Complex64>(
    psi: &F,
    phi: f64,
    w: Complex64,
    side: Option<RaySide>,
    decay: Decay,
) -> Result<Complex64, GeomError> {
    let dir = Complex64::from_polar(1.0, phi);
    let mut l = (w / dir).ln();
    let beta = l.im;
    let big = decay.half_width();
    if beta.abs() >= SUBTRACT_BELOW {
        let strip = decay.strip.min(beta.abs());
        let h = (2.0 * PI * strip / STEPS).min(0.25);
        let n = libm::ceil(big / h) as i64;
        let mut acc = c(0.0, 0.0);
        for k in -n..n {
            let s = (k as f64 + 0.5) * h;
            let t = c(s, 0.0) - l;
            acc += psi(dir * libm::exp(s)) / (t / 2.0).tanh();
        }
        return Ok(acc * h);
    }
    let sign = if beta.abs() < ON_RAY_TOL {
        l.im = 0.0;
        match side {
            Some(RaySide::Counterclockwise) => 1.0,
            Some(RaySide::Clockwise) => -1.0,
            None => return Err(GeomError::OnRay),
        }
    } else {
        beta.signum()
    };
    let pw = psi(w);
    let s0 = l.re;
    let h = (2.0 * PI * decay.strip / STEPS).min(0.25);
    let lo = (-big).min(s0 - 3.0);
    let hi = big.max(s0 + 3.0);
    let nl = libm::ceil((s0 - lo) / h) as i64;
    let nr = libm::ceil((hi - s0) / h) as i64;
    let mut acc = c(0.0, 0.0);
    for k in -nl..nr {
        let s = s0 + (k as f64 + 0.5) * h;
        let t = c(s, 0.0) - l;
        acc += psi(dir * libm::exp(s)) / (t / 2.0).tanh() - pw * 2.0 / t.sinh();
    }
    // the subtracted 2/sinh term decays only like e^{-|s|}: continue its
    // node sum over the whole grid
    let mut outside = c(0.0, 0.0);
    for (start, step) in [(nr, 1i64), (-nl - 1, -1)] {
        let mut k = start;
        loop {
            let t = c(s0 + (k as f64 + 0.5) * h, 0.0) - l;
            let term = 2.0 / t.sinh();
            outside += term;
            if term.norm() < 1e-18 {
                break;
            }
            k += step;
        }
    }
    Ok((acc - pw * outside) * h + pw * c(0.0, 2.0 * PI * sign))
}

/// `(Z, theta)` of the signed light `s gamma_l` at a point.
fn signed_light(md: &ModelData, light: usize, sign: i8, pt: &FieldPoint) -> (Complex64, f64) {
    let s = sign as f64;
    (s * md.z_light(light, &pt.u), s * md.theta_light(light, &pt.theta_e))
}

/// Contour angle used for the signed light `s gamma_l`.
pub fn contour_angle(
    md: &ModelData,
    light: usize,
    sign: i8,
    u: &[Complex64],
    dec: &SectorDecomposition,
    cont: Continuation,
) -> f64 {
    let a = dec.sector_of(bps_ray_angle(md, light, sign, u));
    dec.ray_angle(a + cont.shift())
}

/// `I = int_{r} dzeta'/zeta' (zeta' + zeta)/(zeta' - zeta) log(1 - X^sf_{s gamma}(zeta'))`
/// over the ray `r` at angle `phi`.
pub fn ray_integral(
    md: &ModelData,
    light: usize,
    sign: i8,
    pt: &FieldPoint,
    phi: f64,
    side: Option<RaySide>,
) -> Result<Complex64, GeomError> {
    if pt.zeta.norm() == 0.0 {
        return Err(GeomError::ZetaZero);
    }
    let (z, th) = signed_light(md, light, sign, pt);
    let decay = Decay::for_ray(z, phi)?;
    let psi = |zp: Complex64| (1.0 - xsf_value(z, th, zp)).ln();
    cauchy_ray(&psi, phi, pt.zeta, side, decay)
}

/// Corrected character `X^model_gamma = X^sf_gamma exp(-(1/4 pi i) sum
/// Omega <gamma, gamma'> I_gamma')` over both signs of every light, with the
/// on-contour convention that `zeta` is taken counterclockwise of the contour.
pub fn xmodel(
    md: &ModelData,
    g: &Charge,
    pt: &FieldPoint,
    dec: &SectorDecomposition,
    cont: Continuation,
) -> Result<Complex64, GeomError> {
    Ok(crate::semiflat::xsf(md, g, pt)? * xmodel_correction(md, g, pt, dec, cont)?.exp())
}

/// The exponent `-(1/4 pi i) sum Omega <gamma, gamma'> I_gamma'`.
pub fn xmodel_correction(
    md: &ModelData,
    g: &Charge,
    pt: &FieldPoint,
    dec: &SectorDecomposition,
    cont: Continuation,
) -> Result<Complex64, GeomError> {
    check_good(md, &pt.u, dec)?;
    let mut acc = c(0.0, 0.0);
    for l in active_lights(md) {
        let pr = md.pair(g, &md.light_charge(l));
        if pr == 0 {
            continue;
        }
        for s in [1i8, -1] {
            let phi = contour_angle(md, l, s, &pt.u, dec, cont);
            let i = ray_integral(md, l, s, pt, phi, Some(RaySide::Counterclockwise))?;
            acc += md.lights[l].omega as f64 * (s as i64 * pr) as f64 * i;
        }
    }
    Ok(acc * c(0.0, 1.0 / (4.0 * PI)))
}

/// The matrices `M(zeta)` and `N(zeta)` built from the kernel
/// `(zeta'+zeta)/(zeta'-zeta) + (-1/zeta' + conj zeta)/(-1/zeta' - conj zeta)`.
pub fn mn_matrices(
    md: &ModelData,
    pt: &FieldPoint,
    dec: &SectorDecomposition,
) -> Result<(CMat, CMat), GeomError> {
    let zeta = pt.zeta;
    if zeta.norm() == 0.0 {
        return Err(GeomError::ZetaZero);
    }
    check_good(md, &pt.u, dec)?;
    let r = md.r;
    let w2 = -1.0 / zeta.conj();
    let mut m = CMat::zeros(r, r);
    let mut n = CMat::zeros(r, r);
    for l in active_lights(md) {
        let k = md.k(l);
        let om = md.lights[l].omega as f64;
        for s in [1i8, -1] {
            let (z, th) = signed_light(md, l, s, pt);
            let phi = contour_angle(md, l, s, &pt.u, dec, Continuation::None);
            let decay = Decay::for_ray(z, phi)?;
            let side = Some(RaySide::Counterclockwise);
            let pm = |zp: Complex64| {
                let x = xsf_value(z, th, zp);
                -x / (zp * (1.0 - x))
            };
            let pn = |zp: Complex64| {
                let x = xsf_value(z, th, zp);
                c(0.0, -1.0) * x / (1.0 - x)
            };
            let im = cauchy_ray(&pm, phi, zeta, side, decay)? - cauchy_ray(&pm, phi, w2, side, decay)?;
            let inn = cauchy_ray(&pn, phi, zeta, side, decay)? - cauchy_ray(&pn, phi, w2, side, decay)?;
            for i in 0..r {
                for j in 0..r {
                    m[(i, j)] += om * k[i] * k[j] * im;
                    n[(i, j)] += om * k[i] * k[j] * inn;
                }
            }
        }
    }
    let mpref = -1.0 / (c(0.0, 4.0 * PI) * (1.0 / zeta + zeta.conj()));
    let npref = -1.0 / c(0.0, 8.0 * PI);
    Ok((m * mpref, n * npref))
}

/// Residual `max |V - Im(tau + M) - ((1 - |zeta|^2)/(1 + |zeta|^2)) N|`.
pub fn mn_identity_residual(
    md: &ModelData,
    pt: &FieldPoint,
    dec: &SectorDecomposition,
) -> Result<f64, GeomError> {
    let (m, n) = mn_matrices(md, pt, dec)?;
    let tau = md.tau(&pt.u)?;
    let v = potential_v(md, &pt.u, &pt.theta_e)?;
    let a2 = pt.zeta.norm_sqr();
    let q = (1.0 - a2) / (1.0 + a2);
    let rhs = (tau + m).map(|z| z.im) + n.map(|z| z.re) * q;
    let imag_n = n.iter().fold(0.0f64, |a, z| a.max(z.im.abs()));
    Ok(crate::linalg::max_abs_real(&(v - rhs)).max(imag_n))
}

/// Window for lifting a light angle `theta_gamma` to a real number.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AngleWindow {
    /// `(0, 2 pi)`.
    Positive,
    /// `(-pi, pi)`, used for lights in the Taub-NUT set.
    Centered,
}

/// Lift of an angle into a window; the excluded boundary point is an error.
pub fn lift_angle(theta: f64, window: AngleWindow) -> Result<f64, GeomError> {
    match window {
        AngleWindow::Positive => {
            let t = reduce_angle_positive(theta);
            if t == 0.0 {
                return Err(GeomError::Chart(String::from("theta_gamma = 0 in a (0, 2 pi) window")));
            }
            Ok(t)
        }
        AngleWindow::Centered => {
            let t = reduce_angle(theta);
            if t == PI {
                return Err(GeomError::Chart(String::from("theta_gamma = pi in a (-pi, pi) window")));
            }
            Ok(t)
        }
    }
}

fn default_windows(md: &ModelData) -> Vec<AngleWindow> {
    vec![AngleWindow::Positive; md.n_lights()]
}

fn excised(l: usize, z: Complex64, theta: f64) -> Result<(), GeomError> {
    if z.norm() == 0.0 && reduce_angle(theta) == 0.0 {
        return Err(GeomError::Model(crate::modeldata::ModelError::Singular { light: l }));
    }
    Ok(())
}

/// Potential `V = Im tau~ + (1/2 pi) sum_pairs Omega k k^T T(|Z|, theta)`.
pub fn potential_v(md: &ModelData, u: &[Complex64], theta_e: &[f64]) -> Result<RMat, GeomError> {
    let r = md.r;
    let mut v = md.tau_tilde.eval(u).map(|z| z.im);
    for l in active_lights(md) {
        let z = md.z_light(l, u);
        let th = md.theta_light(l, theta_e);
        excised(l, z, th)?;
        let t = t_auto(z.norm(), th)?;
        let k = md.k(l);
        let f = md.lights[l].omega as f64 * t / (2.0 * PI);
        for i in 0..r {
            for j in 0..r {
                v[(i, j)] += f * k[i] * k[j];
            }
        }
    }
    Ok(v)
}

/// `d arg Z_gamma` of a light as a real covector.
fn darg_z(md: &ModelData, l: usize, z: Complex64) -> Vec<f64> {
    let r = md.r;
    let k = md.k(l);
    let mut v = vec![0.0; 4 * r];
    for i in 0..r {
        let q = k[i] / z;
        v[ix_re(r, i)] = q.im;
        v[ix_im(r, i)] = q.re;
    }
    v
}

/// Unprimed connection `A_i = -sum_j Re tau_ij d theta_e_j + (1/2) sum_pairs
/// Omega k_i A(|Z|, theta) d arg Z` with the full, cut-adapted `tau`.
pub fn connection_unprimed(md: &ModelData, u: &[Complex64], theta_e: &[f64]) -> Result<Vec<Vec<f64>>, GeomError> {
    let r = md.r;
    let tau = md.tau(u)?;
    let mut a: Vec<Vec<f64>> = (0..r)
        .map(|i| {
            let mut v = vec![0.0; 4 * r];
            for j in 0..r {
                v[ix_theta_e(r, j)] = -tau[(i, j)].re;
            }
            v
        })
        .collect();
    for l in active_lights(md) {
        let z = md.z_light(l, u);
        let th = md.theta_light(l, theta_e);
        excised(l, z, th)?;
        let s = a_auto(z.norm(), th)?;
        add_light_term(md, l, z, s, &mut a);
    }
    Ok(a)
}

fn add_light_term(md: &ModelData, l: usize, z: Complex64, s: f64, a: &mut [Vec<f64>]) {
    let k = md.k(l);
    let om = md.lights[l].omega as f64;
    let dg = darg_z(md, l, z);
    for (i, ai) in a.iter_mut().enumerate() {
        for (x, d) in ai.iter_mut().zip(&dg) {
            *x += 0.5 * om * k[i] * s * d;
        }
    }
}

/// Primed connection `A'_i = -sum_j Re tau~_ij d theta_e_j + (1/2) sum_pairs
/// Omega k_i S(|Z|, theta^) d arg Z`, with `theta^` lifted into each light's
/// window.
pub fn connection_primed(
    md: &ModelData,
    u: &[Complex64],
    theta_e: &[f64],
    windows: &[AngleWindow],
) -> Result<Vec<Vec<f64>>, GeomError> {
    let r = md.r;
    let tt = md.tau_tilde.eval(u);
    let mut a: Vec<Vec<f64>> = (0..r)
        .map(|i| {
            let mut v = vec![0.0; 4 * r];
            for j in 0..r {
                v[ix_theta_e(r, j)] = -tt[(i, j)].re;
            }
            v
        })
        .collect();
    let ctl = SeriesControl::default();
    for l in active_lights(md) {
        let z = md.z_light(l, u);
        let th = lift_angle(md.theta_light(l, theta_e), windows[l])?;
        if z.norm() == 0.0 {
            return Err(GeomError::Model(crate::modeldata::ModelError::Singular { light: l }));
        }
        let s = sign_regularized_sum(z.norm(), th, &ctl);
        add_light_term(md, l, z, s, &mut a);
    }
    Ok(a)
}

/// Gibbons-Hawking data at a point, in the point's chart. Primed points use
/// `windows` (default `(0, 2 pi)` for every light).
pub fn potential_connection(
    md: &ModelData,
    pt: &FieldPoint,
    windows: Option<&[AngleWindow]>,
) -> Result<PotentialConnection, GeomError> {
    let v = potential_v(md, &pt.u, &pt.theta_e)?;
    let a = match pt.chart {
        Chart::Unprimed => connection_unprimed(md, &pt.u, &pt.theta_e)?,
        Chart::Primed => {
            let def = default_windows(md);
            connection_primed(md, &pt.u, &pt.theta_e, windows.unwrap_or(&def))?
        }
        Chart::TaubNut => return Err(GeomError::Chart(String::from("use the Taub-NUT functions"))),
    };
    Ok(PotentialConnection { v, a })
}

/// Primed magnetic angles `theta'_m_i = theta_m_i - (1/4 pi) sum_pairs
/// Omega c_i (2 arg Z - pi)(theta^ - pi)`.
pub fn theta_prime(md: &ModelData, pt: &FieldPoint, windows: Option<&[AngleWindow]>) -> Result<Vec<f64>, GeomError> {
    let shift = theta_prime_shift(md, &pt.u, &pt.theta_e, windows)?;
    Ok((0..md.r).map(|i| pt.theta_m[i] - shift[i]).collect())
}

fn theta_prime_shift(
    md: &ModelData,
    u: &[Complex64],
    theta_e: &[f64],
    windows: Option<&[AngleWindow]>,
) -> Result<Vec<f64>, GeomError> {
    let def = default_windows(md);
    let windows = windows.unwrap_or(&def);
    let mut shift = vec![0.0; md.r];
    for l in active_lights(md) {
        let arg = md.arg_z(l, u, None)?;
        let th = lift_angle(md.theta_light(l, theta_e), windows[l])?;
        let f = md.lights[l].omega as f64 * (2.0 * arg - PI) * (th - PI) / (4.0 * PI);
        for (i, si) in shift.iter_mut().enumerate() {
            *si += f * md.lights[l].c[i] as f64;
        }
    }
    Ok(shift)
}

/// The same point in the primed chart.
pub fn to_primed(md: &ModelData, pt: &FieldPoint, windows: Option<&[AngleWindow]>) -> Result<FieldPoint, GeomError> {
    if pt.chart != Chart::Unprimed {
        return Err(GeomError::Chart(String::from("expected an unprimed point")));
    }
    let tm = theta_prime(md, pt, windows)?;
    Ok(FieldPoint { theta_m: tm, chart: Chart::Primed, ..pt.clone() })
}

/// The same point in the unprimed chart.
pub fn to_unprimed(md: &ModelData, pt: &FieldPoint, windows: Option<&[AngleWindow]>) -> Result<FieldPoint, GeomError> {
    if pt.chart != Chart::Primed {
        return Err(GeomError::Chart(String::from("expected a primed point")));
    }
    let shift = theta_prime_shift(md, &pt.u, &pt.theta_e, windows)?;
    let tm = (0..md.r).map(|i| pt.theta_m[i] + shift[i]).collect();
    Ok(FieldPoint { theta_m: tm, chart: Chart::Unprimed, ..pt.clone() })
}

/// Jacobian matrix of `(theta_e, theta_m, a) -> (theta_e, theta'_m, a)` by
/// finite differences.
pub fn primed_chart_jacobian(md: &ModelData, pt: &FieldPoint, h: f64) -> Result<RMat, GeomError> {
    let map = |x: &[f64]| -> Result<Vec<f64>, GeomError> {
        let q = FieldPoint::from_coords(x, pt.zeta, Chart::Unprimed);
        Ok(to_primed(md, &q, None)?.coords())
    };
    numeric_jacobian(map, &pt.coords(), h)
}

/// Model twistor 2-form from the Gibbons-Hawking data, in the point's chart.
pub fn varpi_model(md: &ModelData, pt: &FieldPoint) -> Result<TwoFormSample, GeomError> {
    if pt.zeta.norm() == 0.0 {
        return Err(GeomError::ZetaZero);
    }
    let pc = potential_connection(md, pt, None)?;
    Ok(TwoFormSample { chart: pt.chart, r: md.r, coeffs: varpi_from_potential(md, &pc, pt.zeta) })
}

/// `p_i^-1 d log X^model_{gamma_m_i}` by differentiating the ray integrals
/// under the integral sign.
pub fn dlog_x_magnetic_model(
    md: &ModelData,
    pt: &FieldPoint,
    dec: &SectorDecomposition,
    cont: Continuation,
) -> Result<Vec<CVec>, GeomError> {
    let r = md.r;
    let zeta = pt.zeta;
    if zeta.norm() == 0.0 {
        return Err(GeomError::ZetaZero);
    }
    check_good(md, &pt.u, dec)?;
    let tau = md.tau(&pt.u)?;
    let mut out: Vec<CVec> = (0..r).map(|i| dlog_x_magnetic_sf(md, &tau, zeta, i)).collect();
    for l in active_lights(md) {
        let k = md.k(l);
        let om = md.lights[l].omega as f64;
        for s in [1i8, -1] {
            let (z, th) = signed_light(md, l, s, pt);
            let phi = contour_angle(md, l, s, &pt.u, dec, cont);
            let decay = Decay::for_ray(z, phi)?;
            let side = Some(RaySide::Counterclockwise);
            let mut jn = [c(0.0, 0.0); 3];
            for (slot, nu) in jn.iter_mut().zip([-1i32, 0, 1]) {
                let psi = |zp: Complex64| {
                    let x = xsf_value(z, th, zp);
                    -x / (1.0 - x) * zp.powi(nu)
                };
                *slot = cauchy_ray(&psi, phi, zeta, side, decay)?;
            }
            let sf = s as f64;
            let mut di = CVec::zeros(4 * r);
            for j in 0..r {
                di += da(r, j) * (jn[0] * sf * k[j]);
                di += basis_covector(r, ix_theta_e(r, j)) * (c(0.0, 1.0) * jn[1] * sf * k[j]);
                di += dabar(r, j) * (jn[2] * sf * k[j]);
            }
            for (i, oi) in out.iter_mut().enumerate() {
                *oi += &di * (c(0.0, 1.0 / (4.0 * PI)) * om * sf * k[i]);
            }
        }
    }
    Ok(out)
}

/// Model twistor 2-form `-(1/4 pi) sum_i dlog X_e_i ^ p_i^-1 dlog X^model_m_i`
/// from the corrected characters (unprimed frame).
pub fn varpi_model_from_characters(
    md: &ModelData,
    pt: &FieldPoint,
    dec: &SectorDecomposition,
    cont: Continuation,
) -> Result<TwoFormSample, GeomError> {
    let r = md.r;
    let dm = dlog_x_magnetic_model(md, pt, dec, cont)?;
    let mut w = CMat::zeros(4 * r, 4 * r);
    for (i, dmi) in dm.iter().enumerate() {
        w += wedge(&dlog_x_electric(r, pt.zeta, i), dmi);
    }
    Ok(TwoFormSample { chart: Chart::Unprimed, r, coeffs: w * c(-1.0 / (4.0 * PI), 0.0) })
}

/// Curvature `F_i = dA_i` from derivatives of `V`:
/// `sum_jk [i d theta_e_j ^ (dV_ij/da_k da_k - dV_ij/d conj a_k d conj a_k)
/// + 2i dV_jk/d theta_e_i da_j ^ d conj a_k]`, with central differences of `V`.
pub fn curvature_from_potential(md: &ModelData, pt: &FieldPoint, h: f64) -> Result<Vec<CMat>, GeomError> {
    let r = md.r;
    let x0 = pt.coords();
    let v_at = |k: usize, d: f64| -> Result<RMat, GeomError> {
        let mut x = x0.clone();
        x[k] += d;
        let q = FieldPoint::from_coords(&x, pt.zeta, pt.chart);
        potential_v(md, &q.u, &q.theta_e)
    };
    let deriv = |k: usize| -> Result<RMat, GeomError> {
        let m2 = v_at(k, -2.0 * h)?;
        let m1 = v_at(k, -h)?;
        let p1 = v_at(k, h)?;
        let p2 = v_at(k, 2.0 * h)?;
        Ok((m2 - m1 * 8.0 + p1 * 8.0 - p2) / (12.0 * h))
    };
    let mut dva = Vec::with_capacity(r);
    let mut dvt = Vec::with_capacity(r);
    for k in 0..r {
        let dx = deriv(ix_re(r, k))?;
        let dy = deriv(ix_im(r, k))?;
        dva.push(CMat::from_fn(r, r, |i, j| c(dx[(i, j)], -dy[(i, j)]) / 2.0));
        dvt.push(deriv(ix_theta_e(r, k))?);
    }
    let ii = c(0.0, 1.0);
    Ok((0..r)
        .map(|i| {
            let mut f = CMat::zeros(4 * r, 4 * r);
            for j in 0..r {
                let te = basis_covector(r, ix_theta_e(r, j));
                let mut rhs = CVec::zeros(4 * r);
                for k in 0..r {
                    rhs += da(r, k) * dva[k][(i, j)] - dabar(r, k) * dva[k][(i, j)].conj();
                }
                f += wedge(&te, &rhs) * ii;
                for k in 0..r {
                    f += wedge(&da(r, j), &dabar(r, k)) * (2.0 * ii * dvt[i][(j, k)]);
                }
            }
            f
        })
        .collect())
}

/// Exterior derivative of a field of real covectors by five-point differences.
pub fn exterior_derivative<F>(mut a: F, x: &[f64], h: f64) -> Result<RMat, GeomError>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>, GeomError>,
{
    let j = numeric_jacobian(&mut a, x, h)?;
    // j[(b, a)] = d A_b / d x^a
    Ok(RMat::from_fn(x.len(), x.len(), |p, q| j[(q, p)] - j[(p, q)]))
}

/// Model Darboux coordinates `z^model_i = z_i - (i/2 pi^2) sum_pairs
/// Omega k_i sum_{n>0} sin(n theta) K0(2n|Z|)/n`.
pub fn darboux_model(md: &ModelData, pt: &FieldPoint) -> Result<Vec<Complex64>, GeomError> {
    let mut z = darboux_sf(md, pt)?;
    let ctl = SeriesControl::default();
    for l in active_lights(md) {
        let zl = md.z_light(l, &pt.u);
        let th = md.theta_light(l, &pt.theta_e);
        let s = sin_k0_over_n_series(zl.norm(), th, &ctl)?;
        let k = md.k(l);
        let om = md.lights[l].omega as f64;
        for (i, zi) in z.iter_mut().enumerate() {
            *zi -= c(0.0, om * k[i] * s / (2.0 * PI * PI));
        }
    }
    Ok(z)
}

/// Closed-form differentials of [`darboux_model`].
pub fn darboux_model_differential(md: &ModelData, pt: &FieldPoint) -> Result<Vec<CVec>, GeomError> {
    let r = md.r;
    let mut dz = darboux_sf_differential(md, pt)?;
    for l in active_lights(md) {
        let zl = md.z_light(l, &pt.u);
        let rad = zl.norm();
        let th = md.theta_light(l, &pt.theta_e);
        excised(l, zl, th)?;
        // sum cos(n theta) K0(2n|Z|) and sum sin(n theta) K1(2n|Z|)
        let cos_sum = (t_auto(rad, th)? + libm::log(rad / PI)) / 2.0;
        let sin_sum = a_auto(rad, th)? * PI / (4.0 * rad);
        let k = md.k(l);
        let om = md.lights[l].omega as f64;
        let mut ds = CVec::zeros(4 * r);
        for j in 0..r {
            ds += basis_covector(r, ix_theta_e(r, j)) * c(cos_sum * k[j], 0.0);
            let dmod = (da(r, j) * zl.conj() + dabar(r, j) * zl) * c(k[j] / (2.0 * rad), 0.0);
            ds -= dmod * c(2.0 * sin_sum, 0.0);
        }
        for (i, dzi) in dz.iter_mut().enumerate() {
            *dzi -= &ds * c(0.0, om * k[i] / (2.0 * PI * PI));
        }
    }
    Ok(dz)
}

/// `omega_+ = sum_i da_i ^ dz^model_i`.
pub fn darboux_model_form(md: &ModelData, pt: &FieldPoint) -> Result<CMat, GeomError> {
    let dz = darboux_model_differential(md, pt)?;
    let r = md.r;
    let mut w = CMat::zeros(4 * r, 4 * r);
    for (i, dzi) in dz.iter().enumerate() {
        w += wedge(&da(r, i), dzi);
    }
    Ok(w)
}

/// `|det|` of the Jacobian of `(a, conj a, z^model, conj z^model)` with
/// respect to `(a, conj a, p^-1 theta_m, theta_e)`, by finite differences.
pub fn darboux_model_jacobian_numeric(md: &ModelData, pt: &FieldPoint, h: f64) -> Result<f64, GeomError> {
    let r = md.r;
    let mut x = pt.coords();
    for i in 0..r {
        x[r + i] /= md.p[i] as f64;
    }
    let map = |y: &[f64]| -> Result<Vec<f64>, GeomError> {
        let mut yy = y.to_vec();
        for i in 0..r {
            yy[r + i] *= md.p[i] as f64;
        }
        let q = FieldPoint::from_coords(&yy, pt.zeta, Chart::Unprimed);
        let z = darboux_model(md, &q)?;
        let mut out = vec![0.0; 4 * r];
        for i in 0..r {
            out[i] = q.u[i].re;
            out[r + i] = q.u[i].im;
            out[2 * r + i] = z[i].re;
            out[3 * r + i] = z[i].im;
        }
        Ok(out)
    };
    let j = numeric_jacobian(map, &x, h)?;
    Ok(det_real(&j).abs() * 2f64.powi(r as i32))
}

/// Closed form `(2 pi)^{-2r} 2^r det V`.
pub fn darboux_model_jacobian_closed_form(v: &RMat) -> f64 {
    let r = v.nrows() as i32;
    (2.0 * PI).powi(-2 * r) * 2f64.powi(r) * det_real(v)
}

/// Gibbons-Hawking metric `g = (1/pi)[V_ij (dx_i dx_j + dy_i dy_j +
/// (1/4) d theta_e_i d theta_e_j) + (1/4) (V^-1)_ij Theta_i Theta_j]` with
/// `Theta_i = p_i^-1 d theta_m_i + A_i`.
pub fn metric_gh(md: &ModelData, pc: &PotentialConnection) -> Result<RMat, GeomError> {
    let r = md.r;
    let vinv = pc
        .v
        .clone()
        .try_inverse()
        .ok_or_else(|| GeomError::Undefined(String::from("V singular")))?;
    let mut g = RMat::zeros(4 * r, 4 * r);
    let theta: Vec<RMat> = (0..r)
        .map(|i| {
            let mut t = RMat::from_column_slice(4 * r, 1, &pc.a[i]);
            t[(ix_theta_m(r, i), 0)] += 1.0 / md.p[i] as f64;
            t
        })
        .collect();
    for i in 0..r {
        for j in 0..r {
            let v = pc.v[(i, j)];
            g[(ix_re(r, i), ix_re(r, j))] += v;
            g[(ix_im(r, i), ix_im(r, j))] += v;
            g[(ix_theta_e(r, i), ix_theta_e(r, j))] += v / 4.0;
            g += &theta[i] * theta[j].transpose() * (vinv[(i, j)] / 4.0);
        }
    }
    Ok(g / PI)
}

/// Real complex structure whose `(1,0)`-forms are spanned by the rows of
/// `holo` (`2r` complex covectors on a `4r` frame).
pub fn complex_structure(holo: &[CVec]) -> Result<RMat, GeomError> {
    let n = holo.len() * 2;
    let mut p = CMat::zeros(n, n);
    for (row, h) in holo.iter().enumerate() {
        for k in 0..n {
            p[(row, k)] = h[k];
            p[(row + n / 2, k)] = h[k].conj();
        }
    }
    let pinv = p
        .clone()
        .try_inverse()
        .ok_or_else(|| GeomError::Undefined(String::from("holomorphic covectors degenerate")))?;
    let d = CMat::from_fn(n, n, |i, j| {
        if i != j {
            c(0.0, 0.0)
        } else if i < n / 2 {
            c(0.0, 1.0)
        } else {
            c(0.0, -1.0)
        }
    });
    // (1,0)-forms satisfy alpha J = i alpha.
    Ok((pinv * d * p).map(|z| z.re))
}

/// Complex structure `J_3` with holomorphic coordinates `(a, z^model)`.
pub fn complex_structure_j3(md: &ModelData, pt: &FieldPoint) -> Result<RMat, GeomError> {
    let r = md.r;
    let mut holo: Vec<CVec> = (0..r).map(|i| da(r, i)).collect();
    holo.extend(darboux_model_differential(md, pt)?);
    complex_structure(&holo)
}

/// A Taub-NUT chart around the zero of a single light with `Omega = 1` and
/// `k = +-1` in a rank-one model with `p = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TnChart {
    /// The light whose central charge vanishes.
    pub light: usize,
    /// Its `k = +-1`.
    pub k: i64,
}

impl TnChart {
    /// Chart around the zero of `light`.
    pub fn new(md: &ModelData, light: usize) -> Result<Self, GeomError> {
        if md.r != 1 || md.p[0] != 1 {
            return Err(GeomError::Chart(String::from("Taub-NUT chart needs r = 1 and p = 1")));
        }
        if light >= md.n_lights() || md.lights[light].omega != 1 {
            return Err(GeomError::Chart(String::from("Taub-NUT light needs Omega = 1")));
        }
        let k = md.k_int(light)[0];
        if k.abs() != 1 {
            return Err(GeomError::Chart(String::from("Taub-NUT light needs k = +-1")));
        }
        Ok(TnChart { light, k })
    }

    /// Angle windows: centered for the chart light, `(0, 2 pi)` otherwise.
    pub fn windows(&self, md: &ModelData) -> Vec<AngleWindow> {
        (0..md.n_lights())
            .map(|l| if l == self.light { AngleWindow::Centered } else { AngleWindow::Positive })
            .collect()
    }

    /// `(theta_gamma, Z_gamma) = (-(|w1|^2 - |w2|^2)/2, (i/2) w1 w2)`.
    pub fn moment(w1: Complex64, w2: Complex64) -> (f64, Complex64) {
        (-0.5 * (w1.norm_sqr() - w2.norm_sqr()), c(0.0, 0.5) * w1 * w2)
    }

    /// The primed point with coordinates `(w1, w2)`.
    pub fn to_primed(&self, md: &ModelData, w1: Complex64, w2: Complex64, zeta: Complex64) -> FieldPoint {
        let l = &md.lights[self.light];
        let kf = self.k as f64;
        let (th, z) = Self::moment(w1, w2);
        let a = (z - l.z0) / kf;
        let te = (th - l.theta0) / kf;
        let tm = kf * w2.arg();
        FieldPoint { u: vec![a], theta_e: vec![te], theta_m: vec![tm], zeta, chart: Chart::Primed }
    }

    /// Inverse of [`TnChart::to_primed`], with `theta_gamma` reduced to `(-pi, pi]`.
    pub fn from_primed(&self, md: &ModelData, pt: &FieldPoint) -> (Complex64, Complex64) {
        let z = md.z_light(self.light, &pt.u);
        let th = reduce_angle(md.theta_light(self.light, &pt.theta_e));
        let rr = libm::sqrt(4.0 * z.norm_sqr() + th * th);
        let m1 = libm::sqrt((rr - th).max(0.0));
        let m2 = libm::sqrt((rr + th).max(0.0));
        let arg2 = pt.theta_m[0] / self.k as f64;
        let w2 = Complex64::from_polar(m2, arg2);
        let arg1 = (c(0.0, -2.0) * z).arg() - arg2;
        (Complex64::from_polar(m1, arg1), w2)
    }

    /// Jacobian matrix `d(theta_e, theta'_m, Re a, Im a) / d(Re w1, Im w1,
    /// Re w2, Im w2)`.
    pub fn jacobian(&self, w1: Complex64, w2: Complex64) -> RMat {
        let kf = self.k as f64;
        let mut j = RMat::zeros(4, 4);
        let row_te = [-w1.re / kf, -w1.im / kf, w2.re / kf, w2.im / kf];
        let n2 = w2.norm_sqr();
        let row_tm = [0.0, 0.0, -kf * w2.im / n2, kf * w2.re / n2];
        let i2 = c(0.0, 0.5 / kf);
        let dav = [i2 * w2, i2 * c(0.0, 1.0) * w2, i2 * w1, i2 * c(0.0, 1.0) * w1];
        for col in 0..4 {
            j[(0, col)] = row_te[col];
            j[(1, col)] = row_tm[col];
            j[(2, col)] = dav[col].re;
            j[(3, col)] = dav[col].im;
        }
        j
    }

    /// Complex-convention Jacobian `|q|^2 / 8`.
    pub fn jacobian_closed_form(w1: Complex64, w2: Complex64) -> f64 {
        (w1.norm_sqr() + w2.norm_sqr()) / 8.0
    }

    /// Complex-convention Jacobian from the analytic matrix (real `|det|` / 2).
    pub fn jacobian_det(&self, w1: Complex64, w2: Complex64) -> f64 {
        det_real(&self.jacobian(w1, w2)).abs() / 2.0
    }

    /// Complex-convention Jacobian by finite differences of the chart map.
    pub fn jacobian_numeric(&self, md: &ModelData, w1: Complex64, w2: Complex64, h: f64) -> Result<f64, GeomError> {
        let map = |x: &[f64]| -> Result<Vec<f64>, GeomError> {
            let p = self.to_primed(md, c(x[0], x[1]), c(x[2], x[3]), c(1.0, 0.0));
            Ok(p.coords())
        };
        let x = [w1.re, w1.im, w2.re, w2.im];
        Ok(det_real(&numeric_jacobian(map, &x, h)?).abs() / 2.0)
    }

    fn pull_back(&self, w: &CMat, w1: Complex64, w2: Complex64) -> CMat {
        let j = crate::linalg::to_complex(&self.jacobian(w1, w2));
        j.transpose() * w * j
    }

    /// Model twistor 2-form in the `(w1, w2)` frame.
    pub fn varpi_model(&self, md: &ModelData, w1: Complex64, w2: Complex64, zeta: Complex64) -> Result<TwoFormSample, GeomError> {
        if zeta.norm() == 0.0 {
            return Err(GeomError::ZetaZero);
        }
        let pt = self.to_primed(md, w1, w2, zeta);
        let pc = potential_connection(md, &pt, Some(&self.windows(md)))?;
        let w = varpi_from_potential(md, &pc, zeta);
        Ok(TwoFormSample { chart: Chart::TaubNut, r: 1, coeffs: self.pull_back(&w, w1, w2) })
    }

    /// Taub-NUT data `V = 1 + 1/|q|^2`, `A' = (1/2) k d arg Z (theta/R - 1)`
    /// with `R = sqrt(4|Z|^2 + theta^2)`, in the primed frame.
    pub fn potential_connection_tn(&self, md: &ModelData, w1: Complex64, w2: Complex64) -> PotentialConnection {
        let (th, z) = Self::moment(w1, w2);
        let q2 = w1.norm_sqr() + w2.norm_sqr();
        let rr = libm::sqrt(4.0 * z.norm_sqr() + th * th);
        let mut a = vec![0.0; 4];
        let dg = darg_z(md, self.light, z);
        for (x, d) in a.iter_mut().zip(&dg) {
            *x = 0.5 * self.k as f64 * (th / rr - 1.0) * d;
        }
        PotentialConnection { v: RMat::from_element(1, 1, 1.0 + 1.0 / q2), a: vec![a] }
    }

    /// Taub-NUT twistor 2-form in the `(w1, w2)` frame.
    pub fn varpi_tn(&self, md: &ModelData, w1: Complex64, w2: Complex64, zeta: Complex64) -> Result<TwoFormSample, GeomError> {
        if zeta.norm() == 0.0 {
            return Err(GeomError::ZetaZero);
        }
        let pc = self.potential_connection_tn(md, w1, w2);
        let w = varpi_from_potential(md, &pc, zeta);
        Ok(TwoFormSample { chart: Chart::TaubNut, r: 1, coeffs: self.pull_back(&w, w1, w2) })
    }

    /// `max |varpi^model - varpi^TN|` in the `(w1, w2)` frame at
    /// `w1 = w2 = (|q|/sqrt 2) e^{i psi}` for each `|q|` in `radii`.
    pub fn difference_profile(
        &self,
        md: &ModelData,
        psi: f64,
        radii: &[f64],
        zeta: Complex64,
    ) -> Result<Vec<(f64, f64)>, GeomError> {
        radii
            .iter()
            .map(|&q| {
                let w = Complex64::from_polar(q / core::f64::consts::SQRT_2, psi);
                let d = self.varpi_model(md, w, w, zeta)?.coeffs - self.varpi_tn(md, w, w, zeta)?.coeffs;
                Ok((q, crate::linalg::max_abs(&d)))
            })
            .collect()
    }

    /// Gibbons-Hawking metric pulled back to the `(w1, w2)` frame.
    pub fn metric(&self, md: &ModelData, w1: Complex64, w2: Complex64) -> Result<RMat, GeomError> {
        let pt = self.to_primed(md, w1, w2, c(1.0, 0.0));
        let pc = potential_connection(md, &pt, Some(&self.windows(md)))?;
        let g = metric_gh(md, &pc)?;
        let j = self.jacobian(w1, w2);
        Ok(j.transpose() * g * j)
    }
}
