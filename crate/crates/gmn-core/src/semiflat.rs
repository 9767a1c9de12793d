//! The semi-flat twistor family: twisted characters `X^sf`, the 2-forms
//! `varpi^sf(zeta)`, Darboux coordinates, Gibbons-Hawking data, Laurent
//! splitting and Jacobian certificates.
//!
//! Real frames are ordered `(theta_e_1..r, theta_m_1..r, Re a_1..r,
//! Im a_1..r)`. A 2-form `(1/2) W_ab dx^a ^ dx^b` is stored as the
//! antisymmetric matrix `W`, and `alpha ^ beta` as `alpha beta^T - beta alpha^T`.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
use core::fmt;

use num_complex::Complex64;

use crate::linalg::{c, det_real, max_abs, top_wedge, wedge, CMat, CVec, RMat};
use crate::modeldata::{Charge, Chart, FieldPoint, ModelData, ModelError};
use crate::specfun::SpecError;

/// Errors from geometric evaluations.
#[derive(Debug, Clone, PartialEq)]
pub enum GeomError {
    /// Invalid model data or evaluation point.
    Model(ModelError),
    /// Special-function failure.
    Spec(SpecError),
    /// `zeta = 0` (or infinity) where a finite nonzero value is needed.
    ZetaZero,
    /// The point sits where the requested quantity is undefined.
    Undefined(String),
    /// A BPS ray lies on (or too close to) a ray of the sector decomposition.
    NotGood {
        /// Offending light.
        light: usize,
    },
    /// The twistor parameter lies on an integration contour and no side
    /// was chosen.
    OnRay,
    /// The point is outside the requested chart.
    Chart(String),
}

impl fmt::Display for GeomError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GeomError::Model(e) => write!(f, "{e}"),
            GeomError::Spec(e) => write!(f, "{e}"),
            GeomError::ZetaZero => f.write_str("twistor parameter must be nonzero"),
            GeomError::Undefined(s) => write!(f, "undefined: {s}"),
            GeomError::NotGood { light } => {
                write!(f, "sector decomposition is not good for light {light}")
            }
            GeomError::OnRay => f.write_str("twistor parameter lies on a contour; choose a side"),
            GeomError::Chart(s) => write!(f, "outside chart: {s}"),
        }
    }
}

impl core::error::Error for GeomError {}

impl From<ModelError> for GeomError {
    fn from(e: ModelError) -> Self {
        GeomError::Model(e)
    }
}

impl From<SpecError> for GeomError {
    fn from(e: SpecError) -> Self {
        GeomError::Spec(e)
    }
}

/// A sampled complex 2-form in a declared real frame.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoFormSample {
    /// Frame chart.
    pub chart: Chart,
    /// Half rank `r` (the frame has `4r` coordinates).
    pub r: usize,
    /// Antisymmetric coefficient matrix.
    pub coeffs: CMat,
}

impl TwoFormSample {
    /// Labels of the frame coordinates.
    pub fn frame(&self) -> Vec<String> {
        frame_labels(self.chart, self.r)
    }

    /// `max |W + W^T|`.
    pub fn antisymmetry_defect(&self) -> f64 {
        max_abs(&(&self.coeffs + self.coeffs.transpose()))
    }

    /// Coefficient of `omega^r ^ conj(omega)^r` on the frame volume.
    pub fn top_wedge(&self) -> Complex64 {
        top_wedge(&self.coeffs)
    }
}

/// Labels of the `4r` real frame coordinates in a chart.
pub fn frame_labels(chart: Chart, r: usize) -> Vec<String> {
    let mut out = Vec::with_capacity(4 * r);
    match chart {
        Chart::TaubNut => {
            for i in 0..r {
                for s in ["re_w1_", "im_w1_", "re_w2_", "im_w2_"] {
                    out.push(format!("{s}{}", i + 1));
                }
            }
        }
        _ => {
            let m = if chart == Chart::Primed { "theta_m'" } else { "theta_m" };
            out.extend((1..=r).map(|i| format!("theta_e{i}")));
            out.extend((1..=r).map(|i| format!("{m}{i}")));
            out.extend((1..=r).map(|i| format!("re_a{i}")));
            out.extend((1..=r).map(|i| format!("im_a{i}")));
        }
    }
    out
}

/// Index of `theta_e_i` in the frame.
pub fn ix_theta_e(_r: usize, i: usize) -> usize {
    i
}

/// Index of `theta_m_i` in the frame.
pub fn ix_theta_m(r: usize, i: usize) -> usize {
    r + i
}

/// Index of `Re a_i` in the frame.
pub fn ix_re(r: usize, i: usize) -> usize {
    2 * r + i
}

/// Index of `Im a_i` in the frame.
pub fn ix_im(r: usize, i: usize) -> usize {
    3 * r + i
}

/// Coordinate covector `dx^k` in a `4r` frame.
pub fn basis_covector(r: usize, k: usize) -> CVec {
    let mut v = CVec::zeros(4 * r);
    v[k] = c(1.0, 0.0);
    v
}

/// `da_i = dx_i + i dy_i`.
pub fn da(r: usize, i: usize) -> CVec {
    let mut v = CVec::zeros(4 * r);
    v[ix_re(r, i)] = c(1.0, 0.0);
    v[ix_im(r, i)] = c(0.0, 1.0);
    v
}

/// `d conj(a_i) = dx_i - i dy_i`.
pub fn dabar(r: usize, i: usize) -> CVec {
    let mut v = CVec::zeros(4 * r);
    v[ix_re(r, i)] = c(1.0, 0.0);
    v[ix_im(r, i)] = c(0.0, -1.0);
    v
}

fn check_zeta(zeta: Complex64) -> Result<(), GeomError> {
    if zeta.norm() == 0.0 || !zeta.re.is_finite() || !zeta.im.is_finite() {
        return Err(GeomError::ZetaZero);
    }
    Ok(())
}

/// Twisted character `X^sf_gamma = sigma(gamma) exp(Z/zeta + i theta + zeta conj Z)`
/// with the lifted angle of `gamma` and the all-`+1` refinement.
pub fn xsf(md: &ModelData, g: &Charge, pt: &FieldPoint) -> Result<Complex64, GeomError> {
    Ok(md.sigma(g) as f64 * ysf(md, g, pt)?.exp())
}

/// Untwisted logarithm `Y = Z/zeta + i theta + zeta conj Z`.
pub fn ysf(md: &ModelData, g: &Charge, pt: &FieldPoint) -> Result<Complex64, GeomError> {
    check_zeta(pt.zeta)?;
    let z = md.central_charge(g, &pt.u, None)?;
    let th = md.theta_lift(g, &pt.theta_e, &pt.theta_m);
    Ok(z / pt.zeta + c(0.0, th) + pt.zeta * z.conj())
}

/// `d log X_{gamma_e_i} = i d theta_e_i + zeta^-1 da_i + zeta d conj(a_i)`.
pub fn dlog_x_electric(r: usize, zeta: Complex64, i: usize) -> CVec {
    basis_covector(r, ix_theta_e(r, i)) * c(0.0, 1.0) + da(r, i) / zeta + dabar(r, i) * zeta
}

/// `p_i^-1 d log X^sf_{gamma_m_i}` given `tau(u)`.
pub fn dlog_x_magnetic_sf(md: &ModelData, tau: &CMat, zeta: Complex64, i: usize) -> CVec {
    let r = md.r;
    let mut v = basis_covector(r, ix_theta_m(r, i)) * c(0.0, 1.0 / md.p[i] as f64);
    for j in 0..r {
        v += da(r, j) * (tau[(i, j)] / zeta) + dabar(r, j) * (tau[(i, j)].conj() * zeta);
    }
    v
}

/// `varpi^sf(zeta) = -(1/4 pi) sum_i dlog X_e_i ^ p_i^-1 dlog X_m_i`.
pub fn varpi_sf(md: &ModelData, pt: &FieldPoint) -> Result<TwoFormSample, GeomError> {
    check_zeta(pt.zeta)?;
    let tau = md.tau(&pt.u)?;
    Ok(TwoFormSample { chart: Chart::Unprimed, r: md.r, coeffs: varpi_sf_matrix(md, &tau, pt.zeta) })
}

/// [`varpi_sf`] from a precomputed `tau`.
pub fn varpi_sf_matrix(md: &ModelData, tau: &CMat, zeta: Complex64) -> CMat {
    let r = md.r;
    let mut w = CMat::zeros(4 * r, 4 * r);
    for i in 0..r {
        w += wedge(&dlog_x_electric(r, zeta, i), &dlog_x_magnetic_sf(md, tau, zeta, i));
    }
    w * c(-1.0 / (4.0 * PI), 0.0)
}

/// Gibbons-Hawking data: a positive matrix `V` and real connection
/// 1-forms `A_i` in the frame.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialConnection {
    /// Potential matrix `V_ij`.
    pub v: RMat,
    /// Connection 1-forms, one `4r` real covector per `i`.
    pub a: Vec<Vec<f64>>,
}

/// Semi-flat data `V = Im tau`, `A_i = -sum_j Re tau_ij d theta_e_j`.
pub fn gh_decompose_sf(md: &ModelData, u: &[Complex64]) -> Result<PotentialConnection, GeomError> {
    let r = md.r;
    let tau = md.tau(u)?;
    let a = (0..r)
        .map(|i| {
            let mut v = vec![0.0; 4 * r];
            for j in 0..r {
                v[ix_theta_e(r, j)] = -tau[(i, j)].re;
            }
            v
        })
        .collect();
    Ok(PotentialConnection { v: tau.map(|z| z.im), a })
}

/// `(1/4 pi i) sum_i dlog X_e_i ^ [p_i^-1 d theta_m_i + A_i +
/// sum_j V_ij (zeta^-1 da_j - zeta d conj a_j)]`.
pub fn varpi_from_potential(md: &ModelData, pc: &PotentialConnection, zeta: Complex64) -> CMat {
    let r = md.r;
    let mut w = CMat::zeros(4 * r, 4 * r);
    for i in 0..r {
        let mut rhs = basis_covector(r, ix_theta_m(r, i)) * c(1.0 / md.p[i] as f64, 0.0);
        for (k, &x) in pc.a[i].iter().enumerate() {
            rhs[k] += x;
        }
        for j in 0..r {
            rhs += (da(r, j) / zeta - dabar(r, j) * zeta) * c(pc.v[(i, j)], 0.0);
        }
        w += wedge(&dlog_x_electric(r, zeta, i), &rhs);
    }
    w * c(0.0, -1.0 / (4.0 * PI))
}

/// Laurent coefficients of a family `W(zeta) = W_-1/zeta + W_0 + W_1 zeta`.
#[derive(Debug, Clone, PartialEq)]
pub struct LaurentParts {
    /// Coefficient of `zeta^-1`.
    pub minus: CMat,
    /// Coefficient of `zeta^0`.
    pub zero: CMat,
    /// Coefficient of `zeta^1`.
    pub plus: CMat,
}

impl LaurentParts {
    /// `omega_+` from `W_-1 = -(i/2) omega_+`.
    pub fn omega_plus(&self) -> CMat {
        &self.minus * c(0.0, 2.0)
    }

    /// `omega_3 = W_0`.
    pub fn omega3(&self) -> CMat {
        self.zero.clone()
    }

    /// `omega_-` from `W_1 = -(i/2) omega_-`.
    pub fn omega_minus(&self) -> CMat {
        &self.plus * c(0.0, 2.0)
    }

    /// Reassembled value at `zeta`.
    pub fn eval(&self, zeta: Complex64) -> CMat {
        &self.minus / zeta + &self.zero + &self.plus * zeta
    }
}

/// Splits a Laurent family from its values at `zeta = 1, i, -1`.
pub fn laurent_split<F>(mut f: F) -> Result<LaurentParts, GeomError>
where
    F: FnMut(Complex64) -> Result<CMat, GeomError>,
{
    let one = f(c(1.0, 0.0))?;
    let ii = f(c(0.0, 1.0))?;
    let neg = f(c(-1.0, 0.0))?;
    // W(1) = A + B + C, W(-1) = -A + B - C, W(i) = -iA + B + iC
    let sum = (&one + &neg) * c(0.5, 0.0); // B
    let a_plus_c = (&one - &neg) * c(0.5, 0.0); // A + C
    let c_minus_a = (&ii - &sum) * c(0.0, -1.0); // C - A
    let cc = (&a_plus_c + &c_minus_a) * c(0.5, 0.0);
    let aa = (&a_plus_c - &c_minus_a) * c(0.5, 0.0);
    Ok(LaurentParts { minus: aa, zero: sum, plus: cc })
}

/// Largest deviation between a family and its Laurent reassembly over
/// the given test parameters.
pub fn laurent_residual<F>(parts: &LaurentParts, zetas: &[Complex64], mut f: F) -> Result<f64, GeomError>
where
    F: FnMut(Complex64) -> Result<CMat, GeomError>,
{
    let mut worst = 0.0f64;
    for &z in zetas {
        worst = worst.max(max_abs(&(f(z)? - parts.eval(z))));
    }
    Ok(worst)
}

/// Semi-flat Darboux coordinates `z_i = (p_i^-1 theta_m_i - sum_j tau_ij theta_e_j) / 2 pi`.
pub fn darboux_sf(md: &ModelData, pt: &FieldPoint) -> Result<Vec<Complex64>, GeomError> {
    let tau = md.tau(&pt.u)?;
    Ok((0..md.r)
        .map(|i| {
            let mut z = c(pt.theta_m[i] / md.p[i] as f64, 0.0);
            for j in 0..md.r {
                z -= tau[(i, j)] * pt.theta_e[j];
            }
            z / (2.0 * PI)
        })
        .collect())
}

/// Differentials `dz_i` of [`darboux_sf`] as complex covectors.
pub fn darboux_sf_differential(md: &ModelData, pt: &FieldPoint) -> Result<Vec<CVec>, GeomError> {
    let r = md.r;
    let tau = md.tau(&pt.u)?;
    let dt = md.dtau(&pt.u)?;
    Ok((0..r)
        .map(|i| {
            let mut v = basis_covector(r, ix_theta_m(r, i)) * c(1.0 / md.p[i] as f64, 0.0);
            for j in 0..r {
                v -= basis_covector(r, ix_theta_e(r, j)) * tau[(i, j)];
                for k in 0..r {
                    v -= da(r, k) * (dt[(i * r + j) * r + k] * pt.theta_e[j]);
                }
            }
            v / c(2.0 * PI, 0.0)
        })
        .collect())
}

/// `sum_i da_i ^ dz_i` for the semi-flat Darboux coordinates.
pub fn darboux_sf_form(md: &ModelData, pt: &FieldPoint) -> Result<CMat, GeomError> {
    let dz = darboux_sf_differential(md, pt)?;
    let r = md.r;
    let mut w = CMat::zeros(4 * r, 4 * r);
    for (i, dzi) in dz.iter().enumerate() {
        w += wedge(&da(r, i), dzi);
    }
    Ok(w)
}

/// Restriction of `omega_3^sf` to the fiber, as a `2r x 2r` block over
/// `(theta_e, theta_m)`.
pub fn fiber_omega3_sf(md: &ModelData, pt: &FieldPoint) -> Result<CMat, GeomError> {
    let parts = laurent_split(|z| Ok(varpi_sf(md, &pt.with_zeta(z))?.coeffs))?;
    let r = md.r;
    Ok(parts.zero.view((0, 0), (2 * r, 2 * r)).into_owned())
}

/// `(i/2)(1/4 pi) sum (Im tau)^-1_ij dz_i ^ d conj(z_j)` restricted to the
/// fiber, scaled by `scale`.
pub fn fiber_kahler_from_z(md: &ModelData, pt: &FieldPoint, scale: f64) -> Result<CMat, GeomError> {
    let r = md.r;
    let tau = md.tau(&pt.u)?;
    let imt = tau.map(|z| z.im);
    let inv = imt.try_inverse().ok_or_else(|| GeomError::Undefined(String::from("Im tau singular")))?;
    let dz = darboux_sf_differential(md, pt)?;
    let mut w = CMat::zeros(4 * r, 4 * r);
    for i in 0..r {
        for j in 0..r {
            let dzb = dz[j].map(|x| x.conj());
            w += wedge(&dz[i], &dzb) * c(inv[(i, j)], 0.0);
        }
    }
    let w = w * c(0.0, scale / (8.0 * PI));
    Ok(w.view((0, 0), (2 * r, 2 * r)).into_owned())
}

/// Normalized period matrix `(diag(p_r/p_i) | p_r tau)`.
pub fn period_matrix(md: &ModelData, u: &[Complex64]) -> Result<CMat, GeomError> {
    let r = md.r;
    let tau = md.tau(u)?;
    let pr = md.p[r - 1] as f64;
    Ok(CMat::from_fn(r, 2 * r, |i, j| {
        if j < r {
            c(if i == j { pr / md.p[i] as f64 } else { 0.0 }, 0.0)
        } else {
            tau[(i, j - r)] * pr
        }
    }))
}

/// Five-point central difference of a vector-valued map along coordinate `k`.
pub fn five_point<F>(f: &mut F, x: &[f64], k: usize, h: f64) -> Result<Vec<f64>, GeomError>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>, GeomError>,
{
    let mut eval = |d: f64| {
        let mut y = x.to_vec();
        y[k] += d;
        f(&y)
    };
    let m2 = eval(-2.0 * h)?;
    let m1 = eval(-h)?;
    let p1 = eval(h)?;
    let p2 = eval(2.0 * h)?;
    Ok((0..m1.len()).map(|i| (m2[i] - 8.0 * m1[i] + 8.0 * p1[i] - p2[i]) / (12.0 * h)).collect())
}

/// Numerical Jacobian matrix of a map `R^n -> R^n` by five-point stencils.
pub fn numeric_jacobian<F>(mut f: F, x: &[f64], h: f64) -> Result<RMat, GeomError>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>, GeomError>,
{
    let n = x.len();
    let mut j = RMat::zeros(n, n);
    for k in 0..n {
        let col = five_point(&mut f, x, k, h)?;
        for (i, v) in col.iter().enumerate() {
            j[(i, k)] = *v;
        }
    }
    Ok(j)
}

/// `|det|` of the Jacobian of `(Im Y_e, p^-1 Im Y_m, Re Y_e, p^-1 Re Y_m)`
/// with respect to `(theta_e, p^-1 theta_m, a, conj a)`, by finite differences.
pub fn sf_jacobian_numeric(md: &ModelData, pt: &FieldPoint, h: f64) -> Result<f64, GeomError> {
    let r = md.r;
    let n = md.n_lights();
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
        let mut out = vec![0.0; 4 * r];
        for i in 0..r {
            let ye = ysf(md, &Charge::electric(r, n, i), &q)?;
            let ym = ysf(md, &Charge::magnetic(r, n, i), &q)? / md.p[i] as f64;
            out[i] = ye.im;
            out[r + i] = ym.im;
            out[2 * r + i] = ye.re;
            out[3 * r + i] = ym.re;
        }
        Ok(out)
    };
    let j = numeric_jacobian(map, &x, h)?;
    // (x, y) -> (a, conj a) has |det| = 2^r
    Ok(det_real(&j).abs() / 2f64.powi(r as i32))
}

/// Closed form `|(zeta^-1 + conj zeta)/2|^{2r} 2^r det Im tau`.
pub fn sf_jacobian_closed_form(tau: &CMat, zeta: Complex64) -> f64 {
    let r = tau.nrows() as i32;
    let alpha = (1.0 / zeta + zeta.conj()).norm() / 2.0;
    alpha.powi(2 * r) * 2f64.powi(r) * det_real(&tau.map(|z| z.im))
}

/// `|det|` of the Jacobian of `(a, conj a, z, conj z)` with respect to
/// `(a, conj a, p^-1 theta_m, theta_e)`, by finite differences.
pub fn darboux_jacobian_numeric(md: &ModelData, pt: &FieldPoint, h: f64) -> Result<f64, GeomError> {
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
        let z = darboux_sf(md, &q)?;
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
    // outputs (a, conj a, z, conj z) carry 2^{2r}, inputs (a, conj a) 2^-r
    Ok(det_real(&j).abs() * 2f64.powi(r as i32))
}

/// Closed form `(2 pi)^{-2r} 2^r det Im tau`.
pub fn darboux_jacobian_closed_form(tau: &CMat) -> f64 {
    let r = tau.nrows() as i32;
    (2.0 * PI).powi(-2 * r) * 2f64.powi(r) * det_real(&tau.map(|z| z.im))
}
