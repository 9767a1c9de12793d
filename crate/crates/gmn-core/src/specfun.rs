//! Special functions: modified Bessel `K0`/`K1`, the Ooguri-Vafa potential
//! function `T` in three independent forms, and the connection sums.
//!
//! `T(w, theta)` is computed either as the regularized lattice sum
//! `sum_m (pi / sqrt(4|w|^2 + (2 pi m + theta)^2) - kappa_m)`, as the
//! Poisson-resummed Bessel series `-log(|w|/pi) + 2 sum cos(n theta) K0(2n|w|)`,
//! or as a quadrature along the BPS ray.

use core::f64::consts::PI;
use core::fmt;

use libm::{cosh, exp, log, sqrt};
use num_complex::Complex64;

/// Euler-Mascheroni constant.
const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Errors raised by special-function evaluations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SpecError {
    /// Argument must be strictly positive.
    NonPositive,
    /// Evaluation at the excised point `(w, theta) = (0, 0 mod 2 pi)`.
    Singular,
    /// Angle outside the documented range.
    AngleOutOfRange,
    /// Series or quadrature failed to reach the tolerance.
    NoConvergence {
        /// Last tail estimate.
        tail: f64,
    },
}

impl fmt::Display for SpecError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SpecError::NonPositive => f.write_str("argument must be positive"),
            SpecError::Singular => f.write_str("evaluation at the excised singular point"),
            SpecError::AngleOutOfRange => f.write_str("angle outside the allowed range"),
            SpecError::NoConvergence { tail } => {
                write!(f, "series did not converge (tail estimate {tail:e})")
            }
        }
    }
}

impl core::error::Error for SpecError {}

/// Truncation controls for series and lattice sums.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesControl {
    /// Absolute tolerance on the neglected tail.
    pub abs_tol: f64,
    /// Maximum number of series terms.
    pub max_terms: usize,
    /// Lattice cutoff `M`; `None` chooses it from the arguments.
    pub lattice_cutoff: Option<usize>,
}

impl Default for SeriesControl {
    fn default() -> Self {
        SeriesControl { abs_tol: 1e-17, max_terms: 200_000, lattice_cutoff: None }
    }
}

/// `(K0(y), K1(y))` for `y > 0`.
pub fn bessel_k01(y: f64) -> Result<(f64, f64), SpecError> {
    if !(y > 0.0) {
        return Err(SpecError::NonPositive);
    }
    Ok(if y < 2.0 { k01_series(y) } else { k01_cf2(y) })
}

/// Modified Bessel function `K0(y)`, relative error about 1e-15.
pub fn bessel_k0(y: f64) -> Result<f64, SpecError> {
    bessel_k01(y).map(|v| v.0)
}

/// Modified Bessel function `K1(y)`, relative error about 1e-15.
pub fn bessel_k1(y: f64) -> Result<f64, SpecError> {
    bessel_k01(y).map(|v| v.1)
}

/// Small-argument ascending series.
fn k01_series(y: f64) -> (f64, f64) {
    let q = 0.25 * y * y;
    let l = log(0.5 * y);
    // K0 = -(l + gamma) I0 + sum q^k/(k!)^2 H_k
    // K1 = 1/y + l I1 - (y/4) sum q^k/(k!(k+1)!) (psi(k+1) + psi(k+2))
    let mut t0 = 1.0; // q^k/(k!)^2
    let mut t1 = 1.0; // q^k/(k!(k+1)!)
    let mut i0 = 0.0;
    let mut i1 = 0.0;
    let mut s0 = 0.0;
    let mut s1 = 0.0;
    let mut h = 0.0; // H_k
    for k in 0..60 {
        let kf = k as f64;
        if k > 0 {
            t0 *= q / (kf * kf);
            t1 *= q / (kf * (kf + 1.0));
            h += 1.0 / kf;
        }
        i0 += t0;
        i1 += t1;
        s0 += t0 * h;
        let psi1 = -EULER_GAMMA + h;
        let psi2 = psi1 + 1.0 / (kf + 1.0);
        s1 += t1 * (psi1 + psi2);
        if t0 < 1e-18 * i0 && k > 2 {
            break;
        }
    }
    let i1 = 0.5 * y * i1;
    let k0 = -(l + EULER_GAMMA) * i0 + s0;
    let k1 = 1.0 / y + l * i1 - 0.25 * y * s1;
    (k0, k1)
}

/// Steed's continued fraction for `K_nu`, `K_{nu+1}` at `nu = 0`.
fn k01_cf2(x: f64) -> (f64, f64) {
    let a1 = 0.25;
    let mut b = 2.0 * (1.0 + x);
    let mut d = 1.0 / b;
    let mut delh = d;
    let mut h = d;
    let mut q1 = 0.0;
    let mut q2 = 1.0;
    let mut q = a1;
    let mut c = a1;
    let mut a = -a1;
    let mut s = 1.0 + q * delh;
    for i in 1..10_000 {
        let fi = i as f64;
        a -= 2.0 * fi;
        c = -a * c / (fi + 1.0);
        let qnew = (q1 - b * q2) / a;
        q1 = q2;
        q2 = qnew;
        q += c * qnew;
        b += 2.0;
        d = 1.0 / (b + a * d);
        delh = (b * d - 1.0) * delh;
        h += delh;
        let dels = q * delh;
        s += dels;
        if (dels / s).abs() < 1e-17 {
            break;
        }
    }
    h *= a1;
    let k0 = sqrt(PI / (2.0 * x)) * exp(-x) / s;
    let k1 = k0 * (x + 0.5 - h) / x;
    (k0, k1)
}

/// Reduces an angle to `(-pi, pi]`.
pub fn reduce_angle(theta: f64) -> f64 {
    let mut t = theta % (2.0 * PI);
    if t > PI {
        t -= 2.0 * PI;
    } else if t <= -PI {
        t += 2.0 * PI;
    }
    t
}

/// Reduces an angle to `[0, 2 pi)`.
pub fn reduce_angle_positive(theta: f64) -> f64 {
    let t = theta % (2.0 * PI);
    if t < 0.0 { t + 2.0 * PI } else { t }
}

/// `kappa_m = (1/2) log((2|m|+1)/(2|m|-1))` for `m != 0`, and `kappa_0 = 0`.
pub fn kappa(m: i64) -> f64 {
    if m == 0 {
        return 0.0;
    }
    let a = 2.0 * (m.unsigned_abs() as f64);
    0.5 * log((a + 1.0) / (a - 1.0))
}

/// Hurwitz zeta `zeta(s, a)` for integer `s >= 2` and `a >= 16`, by
/// Euler-Maclaurin summation.
pub fn hurwitz_zeta(s: u32, a: f64) -> f64 {
    const B2J: [f64; 8] = [
        1.0 / 6.0,
        -1.0 / 30.0,
        1.0 / 42.0,
        -1.0 / 30.0,
        5.0 / 66.0,
        -691.0 / 2730.0,
        7.0 / 6.0,
        -3617.0 / 510.0,
    ];
    // shift the start so the asymptotic terms are tiny
    let shift = if a < 16.0 { (16.0 - a) as usize + 1 } else { 0 };
    let sf = s as f64;
    let mut acc = 0.0;
    for k in 0..shift {
        acc += libm::pow(a + k as f64, -sf);
    }
    let a = a + shift as f64;
    let apow = libm::pow(a, -sf);
    acc += a * apow / (sf - 1.0) + 0.5 * apow;
    let mut rising = sf; // (s)_{2j-1}
    let mut fact = 2.0; // (2j)!
    let mut pw = apow / a; // a^{-s-2j+1}
    for (j, b) in B2J.iter().enumerate() {
        let term = b / fact * rising * pw;
        acc += term;
        if term.abs() < 1e-18 * acc.abs() {
            break;
        }
        let j2 = 2.0 * (j as f64 + 1.0);
        rising *= (sf + j2 - 1.0) * (sf + j2);
        fact *= (j2 + 1.0) * (j2 + 2.0);
        pw /= a * a;
    }
    acc
}

/// Coefficients `h_n` of `(1 - 2 b t + rho2 t^2)^(-1/2) = sum h_n t^n`.
fn legendre_tail_coeffs(b: Complex64, rho2: Complex64, n_max: usize) -> [Complex64; 48] {
    let mut h = [Complex64::new(0.0, 0.0); 48];
    h[0] = Complex64::new(1.0, 0.0);
    h[1] = b;
    for n in 1..n_max.min(47) {
        let nf = n as f64;
        h[n + 1] = ((2.0 * nf + 1.0) * b * h[n] - nf * rho2 * h[n - 1]) / (nf + 1.0);
    }
    h
}

const TAIL_ORDER: usize = 40;

/// Tail `sum_{m > M} (pair_m - 2 kappa_m)` of the `T` lattice sum, as a
/// function of `beta = theta / 2 pi` and `s = |w| / pi`.
fn t_tail(beta: Complex64, s: Complex64, cutoff: usize) -> Complex64 {
    let rho2 = beta * beta + s * s;
    let h = legendre_tail_coeffs(beta, rho2, TAIL_ORDER);
    let a = cutoff as f64 + 1.0;
    let mut acc = Complex64::new(0.0, 0.0);
    let mut n = 2;
    while n <= TAIL_ORDER {
        let k = 2.0 / ((n as f64 + 1.0) * libm::pow(2.0, n as f64 + 1.0));
        acc += (h[n] - k) * hurwitz_zeta(n as u32 + 1, a);
        n += 2;
    }
    acc
}

/// Tail `sum_{m > M} (f(2 pi m + theta) - f(2 pi m - theta))` of the
/// regularized sign sum, with `f(x) = x / sqrt(4c^2 + x^2)`.
fn q_tail(beta: f64, s: f64, cutoff: usize) -> f64 {
    let b = Complex64::new(beta, 0.0);
    let rho2 = Complex64::new(beta * beta + s * s, 0.0);
    let h = legendre_tail_coeffs(b, rho2, TAIL_ORDER);
    let a = cutoff as f64 + 1.0;
    let mut acc = 0.0;
    let mut n = 3;
    while n <= TAIL_ORDER {
        let d = -2.0 * h[n].re + 2.0 * beta * h[n - 1].re;
        acc += d * hurwitz_zeta(n as u32, a);
        n += 2;
    }
    acc
}

fn lattice_cutoff(ctl: &SeriesControl, rho: f64) -> usize {
    ctl.lattice_cutoff
        .unwrap_or_else(|| (8.0 * (rho + 1.0)).ceil().max(64.0) as usize)
        .max(16)
}

/// `T` as the regularized lattice sum with an analytic tail.
pub fn t_lattice(w: Complex64, theta: f64, ctl: &SeriesControl) -> Result<f64, SpecError> {
    t_lattice_abs(w.norm(), theta, ctl)
}

/// [`t_lattice`] taking `|w|` directly.
pub fn t_lattice_abs(r: f64, theta: f64, ctl: &SeriesControl) -> Result<f64, SpecError> {
    let th = reduce_angle(theta);
    if r == 0.0 && th == 0.0 {
        return Err(SpecError::Singular);
    }
    let beta = th / (2.0 * PI);
    let s = r / PI;
    let cutoff = lattice_cutoff(ctl, sqrt(beta * beta + s * s));
    let four_r2 = 4.0 * r * r;
    let term = |m: f64| PI / sqrt(four_r2 + (2.0 * PI * m + th) * (2.0 * PI * m + th));
    let mut acc = term(0.0);
    for m in (1..=cutoff).rev() {
        let mf = m as f64;
        acc += term(mf) + term(-mf) - 2.0 * kappa(m as i64);
    }
    let tail = t_tail(Complex64::new(beta, 0.0), Complex64::new(s, 0.0), cutoff).re;
    Ok(acc + tail)
}

/// Gradient `(dT/d|w|, dT/dtheta)` of the lattice form.
pub fn t_lattice_grad(r: f64, theta: f64, ctl: &SeriesControl) -> Result<(f64, f64), SpecError> {
    let th = reduce_angle(theta);
    if r == 0.0 && th == 0.0 {
        return Err(SpecError::Singular);
    }
    let beta = th / (2.0 * PI);
    let s = r / PI;
    let cutoff = lattice_cutoff(ctl, sqrt(beta * beta + s * s));
    let mut dr = 0.0;
    let mut dth = 0.0;
    for m in -(cutoff as i64)..=(cutoff as i64) {
        let x = 2.0 * PI * m as f64 + th;
        let d = 4.0 * r * r + x * x;
        let d32 = d * sqrt(d);
        dr -= 4.0 * PI * r / d32;
        dth -= PI * x / d32;
    }
    let hstep = 1e-30;
    let tb = t_tail(Complex64::new(beta, hstep), Complex64::new(s, 0.0), cutoff).im / hstep;
    let ts = t_tail(Complex64::new(beta, 0.0), Complex64::new(s, hstep), cutoff).im / hstep;
    Ok((dr + ts / PI, dth + tb / (2.0 * PI)))
}

/// Number of Bessel terms needed so that the neglected tail of
/// `sum e^{-2 n r}`-type series is below `tol`.
fn bessel_terms(r: f64, ctl: &SeriesControl) -> Result<usize, SpecError> {
    // K_nu(2 n r) <= C e^{-2 n r} / sqrt(n r) for the orders used here
    let need = (log(1.0 / ctl.abs_tol) + 10.0) / (2.0 * r);
    let n = need.ceil() as usize + 1;
    if n > ctl.max_terms {
        return Err(SpecError::NoConvergence { tail: exp(-2.0 * r * ctl.max_terms as f64) });
    }
    Ok(n)
}

/// `T` as the Poisson-resummed Bessel series.
pub fn t_bessel(w: Complex64, theta: f64, ctl: &SeriesControl) -> Result<f64, SpecError> {
    t_bessel_abs(w.norm(), theta, ctl)
}

/// [`t_bessel`] taking `|w|` directly.
pub fn t_bessel_abs(r: f64, theta: f64, ctl: &SeriesControl) -> Result<f64, SpecError> {
    if !(r > 0.0) {
        return Err(SpecError::NonPositive);
    }
    Ok(-log(r / PI) + 2.0 * cos_k0_series(r, theta, ctl)?)
}

/// `sum_{n>=1} cos(n theta) K0(2 n r)`.
pub fn cos_k0_series(r: f64, theta: f64, ctl: &SeriesControl) -> Result<f64, SpecError> {
    let n = bessel_terms(r, ctl)?;
    let mut acc = 0.0;
    for k in (1..=n).rev() {
        let kf = k as f64;
        acc += libm::cos(kf * theta) * k01_unchecked(2.0 * kf * r).0;
    }
    Ok(acc)
}

/// `sum_{n>=1} sin(n theta) K0(2 n r) / n`.
pub fn sin_k0_over_n_series(r: f64, theta: f64, ctl: &SeriesControl) -> Result<f64, SpecError> {
    let n = bessel_terms(r, ctl)?;
    let mut acc = 0.0;
    for k in (1..=n).rev() {
        let kf = k as f64;
        acc += libm::sin(kf * theta) * k01_unchecked(2.0 * kf * r).0 / kf;
    }
    Ok(acc)
}

fn k01_unchecked(y: f64) -> (f64, f64) {
    if y > 1400.0 {
        return (0.0, 0.0);
    }
    if y < 2.0 { k01_series(y) } else { k01_cf2(y) }
}

/// Gradient `(dT/d|w|, dT/dtheta)` of the Bessel form.
pub fn t_bessel_grad(r: f64, theta: f64, ctl: &SeriesControl) -> Result<(f64, f64), SpecError> {
    if !(r > 0.0) {
        return Err(SpecError::NonPositive);
    }
    let n = bessel_terms(r, ctl)?;
    let mut dr = 0.0;
    let mut dth = 0.0;
    for k in (1..=n).rev() {
        let kf = k as f64;
        let (k0, k1) = k01_unchecked(2.0 * kf * r);
        dr += kf * libm::cos(kf * theta) * k1;
        dth += kf * libm::sin(kf * theta) * k0;
    }
    Ok((-1.0 / r - 4.0 * dr, -2.0 * dth))
}

/// `T` by whichever form converges fastest at `(r, theta)`.
pub fn t_auto(r: f64, theta: f64) -> Result<f64, SpecError> {
    let ctl = SeriesControl::default();
    if 2.0 * r >= 1.0 { t_bessel_abs(r, theta, &ctl) } else { t_lattice_abs(r, theta, &ctl) }
}

/// Gradient of `T` by whichever form converges fastest.
pub fn t_auto_grad(r: f64, theta: f64) -> Result<(f64, f64), SpecError> {
    let ctl = SeriesControl::default();
    if 2.0 * r >= 1.0 { t_bessel_grad(r, theta, &ctl) } else { t_lattice_grad(r, theta, &ctl) }
}

/// Semi-flat twisted character `exp(Z/zeta + i theta + zeta conj(Z))`.
pub fn xsf_value(z: Complex64, theta: f64, zeta: Complex64) -> Complex64 {
    (z / zeta + Complex64::new(0.0, theta) + zeta * z.conj()).exp()
}

/// `T` from the BPS-ray integral `-log(|Z|/pi) + Re int ds X/(1-X)` with
/// `zeta = -(Z/|Z|) e^s` on the ray.
pub fn t_contour(z: Complex64, theta: f64, ctl: &SeriesControl) -> Result<f64, SpecError> {
    let r = z.norm();
    if !(r > 0.0) {
        return Err(SpecError::NonPositive);
    }
    let big_s = libm::acosh((log(1.0 / ctl.abs_tol.max(1e-300)) + 5.0) / (2.0 * r)).max(1.0);
    let h = 0.1f64.min(big_s / 8.0);
    let n = (big_s / h).ceil() as i64;
    if n as usize > ctl.max_terms {
        return Err(SpecError::NoConvergence { tail: exp(-2.0 * r * cosh(big_s)) });
    }
    let dir = -z / r;
    let mut acc = Complex64::new(0.0, 0.0);
    for k in -n..=n {
        let s = k as f64 * h;
        let zeta = dir * exp(s);
        let x = xsf_value(z, theta, zeta);
        acc += x / (1.0 - x);
    }
    let tail = exp(-2.0 * r * cosh(n as f64 * h));
    if tail > 1e-8 {
        return Err(SpecError::NoConvergence { tail });
    }
    Ok(-log(r / PI) + (acc * h).re)
}

/// `f(x) = x / sqrt(4c^2 + x^2)`.
fn fsign(c: f64, x: f64) -> f64 {
    x / sqrt(4.0 * c * c + x * x)
}

/// Regularized sign sum `Q(c, theta) = sum_{m != 0} (f(2 pi m + theta) - sgn m)`
/// for `theta` in `(0, 2 pi)`.
pub fn q_sum(c: f64, theta: f64, ctl: &SeriesControl) -> Result<f64, SpecError> {
    if !(theta > 0.0 && theta < 2.0 * PI) {
        return Err(SpecError::AngleOutOfRange);
    }
    if !(c > 0.0) {
        return Err(SpecError::NonPositive);
    }
    Ok(q_sum_any(c, theta, ctl))
}

/// [`q_sum`] for any `|theta| < 2 pi`.
pub fn q_sum_any(c: f64, theta: f64, ctl: &SeriesControl) -> f64 {
    let beta = theta / (2.0 * PI);
    let s = c / PI;
    let cutoff = lattice_cutoff(ctl, sqrt(beta * beta + s * s));
    let mut acc = 0.0;
    for m in (1..=cutoff).rev() {
        let x = 2.0 * PI * m as f64;
        acc += fsign(c, x + theta) - fsign(c, x - theta);
    }
    acc + q_tail(beta, s, cutoff)
}

/// The sign-regularized sum `sum_m (f(2 pi m + theta) - s_m)` with
/// `s_m = +1` for `m >= 0` and `-1` for `m < 0`.
pub fn sign_regularized_sum(c: f64, theta: f64, ctl: &SeriesControl) -> f64 {
    q_sum_any(c, theta, ctl) + fsign(c, theta) - 1.0
}

/// The smooth, odd, `2 pi`-periodic connection sum
/// `sum_m (f(2 pi m + theta) - lambda_m)` in lattice form.
pub fn a_lattice_sum(c: f64, theta: f64, ctl: &SeriesControl) -> Result<f64, SpecError> {
    if !(c > 0.0) {
        return Err(SpecError::NonPositive);
    }
    let th = reduce_angle(theta);
    Ok(q_sum_any(c, th, ctl) + fsign(c, th) - th / PI)
}

/// The same connection sum as the `K1` series `(4c/pi) sum sin(n theta) K1(2nc)`.
pub fn a_bessel_sum(c: f64, theta: f64, ctl: &SeriesControl) -> Result<f64, SpecError> {
    if !(c > 0.0) {
        return Err(SpecError::NonPositive);
    }
    let n = bessel_terms(c, ctl)?;
    let mut acc = 0.0;
    for k in (1..=n).rev() {
        let kf = k as f64;
        acc += libm::sin(kf * theta) * k01_unchecked(2.0 * kf * c).1;
    }
    Ok(4.0 * c / PI * acc)
}

/// Connection sum by whichever form converges fastest.
pub fn a_auto(c: f64, theta: f64) -> Result<f64, SpecError> {
    let ctl = SeriesControl::default();
    if 2.0 * c >= 1.0 { a_bessel_sum(c, theta, &ctl) } else { a_lattice_sum(c, theta, &ctl) }
}

/// Upper bound `sqrt(pi/|w|) / (e^{2|w|} - 1)` on `|T + log(|w|/pi)|`.
pub fn t_remainder_bound(r: f64) -> f64 {
    sqrt(PI / r) / libm::expm1(2.0 * r)
}
