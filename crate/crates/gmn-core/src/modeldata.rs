//! The local data package: divisors, light charges with BPS indices,
//! flavor offsets and angles, the holomorphic background `tau~`, central
//! charges with branch cuts, monodromy, and the positivity region.
//!
//! Charges live in the lattice spanned by `gamma_e_i`, `gamma_m_i` and one
//! flavor generator per light, with `<gamma_m_i, gamma_e_j> = p_i delta_ij`
//! and flavors in the kernel of the pairing. The light stored as
//! `(c, z0, theta0)` is `sum_i (c_i/p_i) gamma_e_i + f_k`, so that
//! `<gamma_m_i, gamma> = c_i`, `Z_gamma = sum_i (c_i/p_i) a_i + z0` and
//! `theta_gamma = sum_i (c_i/p_i) theta_e_i + theta0`.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
use core::fmt;

use num_bigint::BigInt;
use num_complex::Complex64;
use num_traits::Zero;

use crate::lattice::{
    coordinates_in_echelon, is_primitive_in, refine, row_echelon_basis, smith_form, FrobeniusBasis,
    IVec, QuadraticRefinement, SymplecticLattice,
};
use crate::linalg::{c, min_eigenvalue, CMat, RMat};
use crate::specfun::{reduce_angle, reduce_angle_positive};

/// Default cut direction: the branch cut of `log Z` runs along `arg Z = -pi/2`.
pub const DEFAULT_CUT: f64 = -PI / 2.0;

/// Angular distance below which a point counts as lying on a branch cut.
pub const CUT_TOLERANCE: f64 = 1e-12;

/// Errors raised while building or evaluating model data.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelError {
    /// `r = 0` or vectors of inconsistent length.
    Shape(String),
    /// Divisors must be positive with `p_1 | p_2 | ... | p_r`.
    DivisorChain,
    /// `p_i` must divide `c_i` for every light.
    Divisibility {
        /// Offending light.
        light: usize,
    },
    /// Flavor angle outside `[0, 2 pi)`.
    FlavorAngle {
        /// Offending light.
        light: usize,
    },
    /// `tau~` fails to be symmetric.
    TauNotSymmetric,
    /// A light has no electric part, so `Z` is constant.
    ConstantCharge {
        /// Offending light.
        light: usize,
    },
    /// Multi-Ooguri-Vafa input with `sum m != 0`.
    MassSum,
    /// Multi-Ooguri-Vafa input with `sum y` not an integer.
    AngleSum,
    /// Multi-Ooguri-Vafa input with some `|m_i| >= pi`.
    MassTooLarge,
    /// Evaluation on a branch cut without a side choice.
    OnCut {
        /// Light whose cut was hit.
        light: usize,
    },
    /// Evaluation where some light central charge vanishes.
    Singular {
        /// Light with `Z = 0`.
        light: usize,
    },
    /// Point outside the model domain.
    OutsideDomain,
}

impl ModelError {
    /// Name of the assumption or precondition that failed.
    pub fn assumption(&self) -> &'static str {
        match self {
            ModelError::Shape(_) => "shape",
            ModelError::DivisorChain => "A1 (divisor chain)",
            ModelError::Divisibility { .. } => "A2 (p_i divides c_i)",
            ModelError::FlavorAngle { .. } => "flavor angle range",
            ModelError::TauNotSymmetric => "A4 (tau symmetric)",
            ModelError::ConstantCharge { .. } => "A3 (nonconstant light charge)",
            ModelError::MassSum => "multi-OV sum of m vanishes",
            ModelError::AngleSum => "multi-OV sum of y is an integer",
            ModelError::MassTooLarge => "multi-OV |m_i| < pi",
            ModelError::OnCut { .. } => "branch cut side",
            ModelError::Singular { .. } => "off the singular locus",
            ModelError::OutsideDomain => "inside the domain",
        }
    }
}

impl fmt::Display for ModelError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelError::Shape(s) => write!(f, "inconsistent shapes: {s}"),
            ModelError::Divisibility { light } => {
                write!(f, "light {light}: divisors do not divide its charge")
            }
            ModelError::FlavorAngle { light } => {
                write!(f, "light {light}: flavor angle outside [0, 2pi)")
            }
            ModelError::ConstantCharge { light } => {
                write!(f, "light {light}: central charge does not depend on u")
            }
            ModelError::OnCut { light } => {
                write!(f, "point lies on the branch cut of light {light}; choose a side")
            }
            ModelError::Singular { light } => write!(f, "central charge of light {light} vanishes"),
            other => write!(f, "violated: {}", other.assumption()),
        }
    }
}

impl core::error::Error for ModelError {}

/// A light charge, stored once per `+-` pair.
#[derive(Debug, Clone, PartialEq)]
pub struct LightCharge {
    /// `c_i = <gamma_m_i, gamma>`, divisible by `p_i`.
    pub c: Vec<i64>,
    /// Constant part of `Z_gamma`.
    pub z0: Complex64,
    /// Flavor angle in `[0, 2 pi)`.
    pub theta0: f64,
    /// BPS index.
    pub omega: u32,
    /// Direction of the branch cut of `log Z_gamma`: `arg Z` is taken in
    /// `[cut, cut + 2 pi)`.
    pub cut: f64,
}

impl LightCharge {
    /// Light with the default cut direction.
    pub fn new(c: Vec<i64>, z0: Complex64, theta0: f64, omega: u32) -> Self {
        LightCharge { c, z0, theta0, omega, cut: DEFAULT_CUT }
    }
}

/// Which side of a branch cut to continue from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CutSide {
    /// From the counterclockwise side (`arg Z -> cut`).
    Plus,
    /// From the clockwise side (`arg Z -> cut + 2 pi`).
    Minus,
}

/// Holomorphic background `tau~(a) = C + L a + (1/2) Q a a` with fully
/// symmetric coefficient tensors, so that it integrates to the polynomial
/// prepotential `F~ = C a^2/2 + L a^3/6 + Q a^4/24`.
#[derive(Debug, Clone, PartialEq)]
pub struct TauTilde {
    r: usize,
    constant: Vec<Complex64>,
    linear: Vec<Complex64>,
    quadratic: Vec<Complex64>,
}

impl TauTilde {
    /// Constant background.
    pub fn constant(m: &CMat) -> Self {
        let r = m.nrows();
        TauTilde {
            r,
            constant: (0..r * r).map(|k| m[(k / r, k % r)]).collect(),
            linear: vec![Complex64::zero(); r * r * r],
            quadratic: vec![Complex64::zero(); r * r * r * r],
        }
    }

    /// Background from flattened row-major coefficient tensors of sizes
    /// `r^2`, `r^3`, `r^4`.
    pub fn from_parts(
        r: usize,
        constant: Vec<Complex64>,
        linear: Vec<Complex64>,
        quadratic: Vec<Complex64>,
    ) -> Result<Self, ModelError> {
        if constant.len() != r * r || linear.len() != r * r * r || quadratic.len() != r * r * r * r
        {
            return Err(ModelError::Shape(String::from("tau_tilde tensor sizes")));
        }
        Ok(TauTilde { r, constant, linear, quadratic })
    }

    /// Size `r`.
    pub fn rank(&self) -> usize {
        self.r
    }

    /// Flattened constant, linear and quadratic tensors.
    pub fn parts(&self) -> (&[Complex64], &[Complex64], &[Complex64]) {
        (&self.constant, &self.linear, &self.quadratic)
    }

    /// Whether every coefficient tensor is symmetric under all index swaps.
    pub fn is_symmetric(&self, tol: f64) -> bool {
        let r = self.r;
        let idx2 = |i: usize, j: usize| i * r + j;
        let idx3 = |i: usize, j: usize, k: usize| (i * r + j) * r + k;
        let idx4 = |i: usize, j: usize, k: usize, l: usize| ((i * r + j) * r + k) * r + l;
        for i in 0..r {
            for j in 0..r {
                if (self.constant[idx2(i, j)] - self.constant[idx2(j, i)]).norm() > tol {
                    return false;
                }
                for k in 0..r {
                    let v = self.linear[idx3(i, j, k)];
                    for w in [idx3(j, i, k), idx3(i, k, j), idx3(k, j, i)] {
                        if (v - self.linear[w]).norm() > tol {
                            return false;
                        }
                    }
                    for l in 0..r {
                        let v = self.quadratic[idx4(i, j, k, l)];
                        for w in [idx4(j, i, k, l), idx4(i, k, j, l), idx4(i, j, l, k)] {
                            if (v - self.quadratic[w]).norm() > tol {
                                return false;
                            }
                        }
                    }
                }
            }
        }
        true
    }

    /// `tau~_ij(a)`.
    pub fn eval(&self, a: &[Complex64]) -> CMat {
        let r = self.r;
        CMat::from_fn(r, r, |i, j| {
            let mut v = self.constant[i * r + j];
            for k in 0..r {
                v += self.linear[(i * r + j) * r + k] * a[k];
                for l in 0..r {
                    v += 0.5 * self.quadratic[((i * r + j) * r + k) * r + l] * a[k] * a[l];
                }
            }
            v
        })
    }

    /// `d tau~_ij / d a_k` as a flattened `r^3` tensor.
    pub fn derivative(&self, a: &[Complex64]) -> Vec<Complex64> {
        let r = self.r;
        let mut out = vec![Complex64::zero(); r * r * r];
        for i in 0..r {
            for j in 0..r {
                for k in 0..r {
                    let mut v = self.linear[(i * r + j) * r + k];
                    for l in 0..r {
                        v += self.quadratic[((i * r + j) * r + k) * r + l] * a[l];
                    }
                    out[(i * r + j) * r + k] = v;
                }
            }
        }
        out
    }

    /// `d F~ / d a_i`.
    pub fn prepotential_gradient(&self, a: &[Complex64]) -> Vec<Complex64> {
        let r = self.r;
        (0..r)
            .map(|i| {
                let mut v = Complex64::zero();
                for j in 0..r {
                    v += self.constant[i * r + j] * a[j];
                    for k in 0..r {
                        v += 0.5 * self.linear[(i * r + j) * r + k] * a[j] * a[k];
                        for l in 0..r {
                            v += self.quadratic[((i * r + j) * r + k) * r + l] * a[j] * a[k] * a[l]
                                / 6.0;
                        }
                    }
                }
                v
            })
            .collect()
    }

    /// `F~(a)`.
    pub fn prepotential(&self, a: &[Complex64]) -> Complex64 {
        let r = self.r;
        let mut v = Complex64::zero();
        for i in 0..r {
            for j in 0..r {
                v += 0.5 * self.constant[i * r + j] * a[i] * a[j];
                for k in 0..r {
                    v += self.linear[(i * r + j) * r + k] * a[i] * a[j] * a[k] / 6.0;
                    for l in 0..r {
                        v += self.quadratic[((i * r + j) * r + k) * r + l]
                            * a[i]
                            * a[j]
                            * a[k]
                            * a[l]
                            / 24.0;
                    }
                }
            }
        }
        v
    }
}

/// Polydisk `|a_i - center_i| < radii_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct Domain {
    /// Center in `a`-coordinates.
    pub center: Vec<Complex64>,
    /// Radii.
    pub radii: Vec<f64>,
}

impl Domain {
    /// Whether `u` lies inside.
    pub fn contains(&self, u: &[Complex64]) -> bool {
        u.iter().zip(&self.center).zip(&self.radii).all(|((x, c), r)| (x - c).norm() < *r)
    }
}

/// Parameters of a multi-Ooguri-Vafa model.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiOv {
    /// Singular points `m_j`.
    pub m: Vec<Complex64>,
    /// Flavor angle steps (angles `2 pi y_j`).
    pub y: Vec<f64>,
    /// Pairing `<gamma_m, gamma_e>`.
    pub p: i64,
}

/// Which fiber angles a point or 2-form frame uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Chart {
    /// Angles `(theta_e, theta_m)`.
    Unprimed,
    /// Angles `(theta_e, theta'_m)`.
    Primed,
    /// Taub-NUT coordinates `(w_1, w_2)` near a singular fiber.
    TaubNut,
}

/// A point of the total space together with a twistor parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldPoint {
    /// Base point in `a`-coordinates.
    pub u: Vec<Complex64>,
    /// Electric angles.
    pub theta_e: Vec<f64>,
    /// Magnetic angles, unprimed or primed according to `chart`.
    pub theta_m: Vec<f64>,
    /// Twistor parameter.
    pub zeta: Complex64,
    /// Angle chart.
    pub chart: Chart,
}

impl FieldPoint {
    /// Unprimed point.
    pub fn new(u: Vec<Complex64>, theta_e: Vec<f64>, theta_m: Vec<f64>, zeta: Complex64) -> Self {
        FieldPoint { u, theta_e, theta_m, zeta, chart: Chart::Unprimed }
    }

    /// Same point with another twistor parameter.
    pub fn with_zeta(&self, zeta: Complex64) -> Self {
        FieldPoint { zeta, ..self.clone() }
    }

    /// Real coordinates in frame order `(theta_e, theta_m, Re a, Im a)`.
    pub fn coords(&self) -> Vec<f64> {
        let mut x = Vec::with_capacity(4 * self.u.len());
        x.extend_from_slice(&self.theta_e);
        x.extend_from_slice(&self.theta_m);
        x.extend(self.u.iter().map(|z| z.re));
        x.extend(self.u.iter().map(|z| z.im));
        x
    }

    /// Inverse of [`FieldPoint::coords`].
    pub fn from_coords(x: &[f64], zeta: Complex64, chart: Chart) -> Self {
        let r = x.len() / 4;
        FieldPoint {
            u: (0..r).map(|i| c(x[2 * r + i], x[3 * r + i])).collect(),
            theta_e: x[..r].to_vec(),
            theta_m: x[r..2 * r].to_vec(),
            zeta,
            chart,
        }
    }
}

/// A general charge `sum e_i gamma_e_i + m_i gamma_m_i + f_k f_k`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Charge {
    /// Electric components.
    pub e: Vec<i64>,
    /// Magnetic components.
    pub m: Vec<i64>,
    /// Flavor components, one per light.
    pub f: Vec<i64>,
}

impl Charge {
    /// The zero charge.
    pub fn zero(r: usize, lights: usize) -> Self {
        Charge { e: vec![0; r], m: vec![0; r], f: vec![0; lights] }
    }

    /// `gamma_e_i`.
    pub fn electric(r: usize, lights: usize, i: usize) -> Self {
        let mut g = Self::zero(r, lights);
        g.e[i] = 1;
        g
    }

    /// `gamma_m_i`.
    pub fn magnetic(r: usize, lights: usize, i: usize) -> Self {
        let mut g = Self::zero(r, lights);
        g.m[i] = 1;
        g
    }

    /// Flattened coordinates `(e, m, f)`.
    pub fn to_vec(&self) -> Vec<i64> {
        self.e.iter().chain(&self.m).chain(&self.f).copied().collect()
    }

    /// Inverse of [`Charge::to_vec`].
    pub fn from_vec(v: &[i64], r: usize) -> Self {
        Charge { e: v[..r].to_vec(), m: v[r..2 * r].to_vec(), f: v[2 * r..].to_vec() }
    }

    /// Negation.
    pub fn neg(&self) -> Self {
        Charge {
            e: self.e.iter().map(|x| -x).collect(),
            m: self.m.iter().map(|x| -x).collect(),
            f: self.f.iter().map(|x| -x).collect(),
        }
    }

    /// Whether the charge pairs trivially with every light and magnetic
    /// charge (no magnetic part).
    pub fn is_local(&self) -> bool {
        self.m.iter().all(|&x| x == 0)
    }
}

/// The full local data package.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelData {
    /// Half rank.
    pub r: usize,
    /// Elementary divisors.
    pub p: Vec<i64>,
    /// Lights, one per `+-` pair.
    pub lights: Vec<LightCharge>,
    /// Holomorphic background.
    pub tau_tilde: TauTilde,
    /// Constant offsets added to `Z~_{gamma_m_i}`.
    pub z_tilde_m: Vec<Complex64>,
    /// Base domain.
    pub domain: Domain,
    /// Set when built by [`build_multi_ov`].
    pub multi_ov: Option<MultiOv>,
}

impl ModelData {
    /// Validates and assembles model data.
    pub fn new(
        r: usize,
        p: Vec<i64>,
        lights: Vec<LightCharge>,
        tau_tilde: TauTilde,
        domain: Domain,
    ) -> Result<Self, ModelError> {
        let md = ModelData {
            r,
            p,
            lights,
            tau_tilde,
            z_tilde_m: vec![Complex64::zero(); r],
            domain,
            multi_ov: None,
        };
        md.validate()?;
        Ok(md)
    }

    /// Checks the structural invariants.
    pub fn validate(&self) -> Result<(), ModelError> {
        let r = self.r;
        if r == 0 {
            return Err(ModelError::Shape(String::from("r must be positive")));
        }
        if self.p.len() != r
            || self.tau_tilde.rank() != r
            || self.z_tilde_m.len() != r
            || self.domain.center.len() != r
            || self.domain.radii.len() != r
        {
            return Err(ModelError::Shape(format!("expected length {r}")));
        }
        for (i, &pi) in self.p.iter().enumerate() {
            if pi <= 0 || (i > 0 && pi % self.p[i - 1] != 0) {
                return Err(ModelError::DivisorChain);
            }
        }
        for (k, l) in self.lights.iter().enumerate() {
            if l.c.len() != r {
                return Err(ModelError::Shape(format!("light {k} charge length")));
            }
            if l.c.iter().zip(&self.p).any(|(ci, pi)| ci % pi != 0) {
                return Err(ModelError::Divisibility { light: k });
            }
            if l.c.iter().all(|&ci| ci == 0) {
                return Err(ModelError::ConstantCharge { light: k });
            }
            if !(l.theta0 >= 0.0 && l.theta0 < 2.0 * PI) {
                return Err(ModelError::FlavorAngle { light: k });
            }
        }
        if !self.tau_tilde.is_symmetric(1e-12) {
            return Err(ModelError::TauNotSymmetric);
        }
        Ok(())
    }

    /// Number of lights (pairs).
    pub fn n_lights(&self) -> usize {
        self.lights.len()
    }

    /// `k_i = c_i / p_i` as reals.
    pub fn k(&self, light: usize) -> Vec<f64> {
        self.k_int(light).iter().map(|&x| x as f64).collect()
    }

    /// `k_i = c_i / p_i` as integers.
    pub fn k_int(&self, light: usize) -> Vec<i64> {
        self.lights[light].c.iter().zip(&self.p).map(|(c, p)| c / p).collect()
    }

    /// The light as a charge.
    pub fn light_charge(&self, light: usize) -> Charge {
        let mut g = Charge::zero(self.r, self.n_lights());
        g.e = self.k_int(light);
        g.f[light] = 1;
        g
    }

    /// `Z_gamma(u)` of a light.
    pub fn z_light(&self, light: usize, u: &[Complex64]) -> Complex64 {
        let l = &self.lights[light];
        let mut z = l.z0;
        for (ki, ui) in self.k(light).iter().zip(u) {
            z += *ki * ui;
        }
        z
    }

    /// `dZ_gamma / da_i` of a light.
    pub fn dz_light(&self, light: usize) -> Vec<f64> {
        self.k(light)
    }

    /// `theta_gamma` of a light from electric angles (not reduced).
    pub fn theta_light(&self, light: usize, theta_e: &[f64]) -> f64 {
        let mut t = self.lights[light].theta0;
        for (ki, ti) in self.k(light).iter().zip(theta_e) {
            t += ki * ti;
        }
        t
    }

    /// Distance in the `Z` plane from `Z_gamma(u)` to the branch cut ray of
    /// `log Z_gamma`.
    pub fn cut_distance(&self, light: usize, u: &[Complex64]) -> f64 {
        let z = self.z_light(light, u);
        let rel = reduce_angle(z.arg() - self.lights[light].cut);
        if rel.abs() < PI / 2.0 {
            z.norm() * libm::sin(rel).abs()
        } else {
            z.norm()
        }
    }

    /// Cut-adapted `arg Z_gamma` in `[cut, cut + 2 pi)`; on the cut a side
    /// must be given.
    pub fn arg_z(
        &self,
        light: usize,
        u: &[Complex64],
        side: Option<CutSide>,
    ) -> Result<f64, ModelError> {
        let z = self.z_light(light, u);
        if z.norm() == 0.0 {
            return Err(ModelError::Singular { light });
        }
        let cut = self.lights[light].cut;
        let rel = reduce_angle(z.arg() - cut);
        if rel.abs() < CUT_TOLERANCE {
            return match side {
                Some(CutSide::Plus) => Ok(cut),
                Some(CutSide::Minus) => Ok(cut + 2.0 * PI),
                None => Err(ModelError::OnCut { light }),
            };
        }
        Ok(cut + reduce_angle_positive(z.arg() - cut))
    }

    /// `log(Z/pi) + log(-Z/pi)` on the cut-adapted branch, with
    /// `arg(-Z) = arg Z - pi`.
    pub fn pair_log(
        &self,
        light: usize,
        u: &[Complex64],
        side: Option<CutSide>,
    ) -> Result<Complex64, ModelError> {
        let z = self.z_light(light, u);
        let arg = self.arg_z(light, u, side)?;
        Ok(c(2.0 * libm::log(z.norm() / PI), 2.0 * arg - PI))
    }

    /// Holomorphic `Z~_{gamma_m_i}(u) = p_i dF~/da_i + offset_i`.
    pub fn z_tilde_magnetic(&self, u: &[Complex64]) -> Vec<Complex64> {
        let g = self.tau_tilde.prepotential_gradient(u);
        (0..self.r).map(|i| self.p[i] as f64 * g[i] + self.z_tilde_m[i]).collect()
    }

    /// `tau_ij = tau~_ij + (1/4 pi i) sum Omega k_i k_j log(Z/pi)` over both
    /// signs of every light.
    pub fn tau(&self, u: &[Complex64]) -> Result<CMat, ModelError> {
        self.tau_side(u, None)
    }

    /// [`ModelData::tau`] with a cut side for points on a cut.
    pub fn tau_side(&self, u: &[Complex64], side: Option<CutSide>) -> Result<CMat, ModelError> {
        let mut t = self.tau_tilde.eval(u);
        let pref = c(0.0, -1.0 / (4.0 * PI)); // 1/(4 pi i)
        for (l, light) in self.lights.iter().enumerate() {
            if light.omega == 0 {
                continue;
            }
            let lg = self.pair_log(l, u, side)?;
            let k = self.k(l);
            for i in 0..self.r {
                for j in 0..self.r {
                    t[(i, j)] += pref * light.omega as f64 * k[i] * k[j] * lg;
                }
            }
        }
        Ok(t)
    }

    /// `d tau_ij / d a_k` as a flattened row-major `r^3` tensor.
    pub fn dtau(&self, u: &[Complex64]) -> Result<Vec<Complex64>, ModelError> {
        let r = self.r;
        let mut d = self.tau_tilde.derivative(u);
        let pref = c(0.0, -1.0 / (4.0 * PI));
        for (l, light) in self.lights.iter().enumerate() {
            if light.omega == 0 {
                continue;
            }
            let z = self.z_light(l, u);
            if z.norm() == 0.0 {
                return Err(ModelError::Singular { light: l });
            }
            let k = self.k(l);
            let w = pref * light.omega as f64 * 2.0 / z;
            for i in 0..r {
                for j in 0..r {
                    for m in 0..r {
                        d[(i * r + j) * r + m] += w * k[i] * k[j] * k[m];
                    }
                }
            }
        }
        Ok(d)
    }

    /// `Z_{gamma_m_i}(u)` for every `i`.
    pub fn z_magnetic(
        &self,
        u: &[Complex64],
        side: Option<CutSide>,
    ) -> Result<Vec<Complex64>, ModelError> {
        let mut z = self.z_tilde_magnetic(u);
        let pref = c(0.0, -1.0 / (4.0 * PI));
        for (l, light) in self.lights.iter().enumerate() {
            if light.omega == 0 {
                continue;
            }
            let zl = self.z_light(l, u);
            if zl.norm() == 0.0 {
                continue;
            }
            let lg = self.pair_log(l, u, side)?;
            for i in 0..self.r {
                z[i] += pref * (light.omega as f64 * light.c[i] as f64) * zl * (lg - 2.0);
            }
        }
        Ok(z)
    }

    /// Central charge of a general charge.
    pub fn central_charge(
        &self,
        g: &Charge,
        u: &[Complex64],
        side: Option<CutSide>,
    ) -> Result<Complex64, ModelError> {
        let mut z = Complex64::zero();
        for i in 0..self.r {
            z += g.e[i] as f64 * u[i];
        }
        if g.m.iter().any(|&x| x != 0) {
            let zm = self.z_magnetic(u, side)?;
            for i in 0..self.r {
                z += g.m[i] as f64 * zm[i];
            }
        }
        for (k, &fk) in g.f.iter().enumerate() {
            z += fk as f64 * self.lights[k].z0;
        }
        Ok(z)
    }

    /// `<g, h> = sum_i p_i (m_i e'_i - e_i m'_i)`.
    pub fn pair(&self, g: &Charge, h: &Charge) -> i64 {
        (0..self.r).map(|i| self.p[i] * (g.m[i] * h.e[i] - g.e[i] * h.m[i])).sum()
    }

    /// Monodromy `gamma -> gamma - sum n_k Omega_k <gamma, gamma_k> gamma_k`
    /// (pairs combined) as an integer matrix on `(e, m, f)` coordinates,
    /// columns being images of basis vectors.
    pub fn monodromy_map(&self, winding: &[i64]) -> Vec<Vec<i64>> {
        let n = 2 * self.r + self.n_lights();
        let mut mat = vec![vec![0i64; n]; n];
        for col in 0..n {
            let mut basis = vec![0i64; n];
            basis[col] = 1;
            let g = Charge::from_vec(&basis, self.r);
            let mut img = basis.clone();
            for (k, light) in self.lights.iter().enumerate() {
                let nk = winding.get(k).copied().unwrap_or(0);
                if nk == 0 || light.omega == 0 {
                    continue;
                }
                let gk = self.light_charge(k);
                let coef = nk * light.omega as i64 * self.pair(&g, &gk);
                for (x, y) in img.iter_mut().zip(gk.to_vec()) {
                    *x -= coef * y;
                }
            }
            for row in 0..n {
                mat[row][col] = img[row];
            }
        }
        mat
    }

    /// Applies an integer matrix to a charge.
    pub fn apply(&self, mat: &[Vec<i64>], g: &Charge) -> Charge {
        let v = g.to_vec();
        let out: Vec<i64> = mat.iter().map(|row| row.iter().zip(&v).map(|(a, b)| a * b).sum()).collect();
        Charge::from_vec(&out, self.r)
    }

    /// The gauge lattice in `(e, m)` coordinates with its standard
    /// Frobenius basis.
    pub fn gauge_lattice(&self) -> (SymplecticLattice, FrobeniusBasis) {
        let r = self.r;
        let mut b = vec![vec![0i64; 2 * r]; 2 * r];
        for i in 0..r {
            b[r + i][i] = self.p[i];
            b[i][r + i] = -self.p[i];
        }
        let lat = SymplecticLattice::from_i64(&b).expect("standard pairing is nondegenerate");
        let unit = |k: usize| -> IVec { (0..2 * r).map(|j| BigInt::from(i64::from(j == k))).collect() };
        let basis = FrobeniusBasis {
            e: (0..r).map(unit).collect(),
            m: (0..r).map(|i| unit(r + i)).collect(),
            p: self.p.iter().map(|&x| BigInt::from(x)).collect(),
        };
        (lat, basis)
    }

    /// Quadratic refinement with the given values on `gamma_e_i`, `gamma_m_i`.
    pub fn refinement(&self, seed_e: &[i8], seed_m: &[i8]) -> Option<QuadraticRefinement> {
        let (lat, basis) = self.gauge_lattice();
        refine(&lat, &basis, seed_e, seed_m).ok()
    }

    /// `sigma(gamma)` of the refinement with all seeds `+1`, evaluated on the
    /// image of `gamma` in the gauge lattice.
    pub fn sigma(&self, g: &Charge) -> i8 {
        let odd = (0..self.r).filter(|&i| (g.e[i] * g.m[i] * self.p[i]) % 2 != 0).count() % 2 == 1;
        if odd { -1 } else { 1 }
    }

    /// Lifted angle `sum e_i theta_e_i + m_i theta_m_i + f_k theta0_k`.
    pub fn theta_lift(&self, g: &Charge, theta_e: &[f64], theta_m: &[f64]) -> f64 {
        let mut t = 0.0;
        for i in 0..self.r {
            t += g.e[i] as f64 * theta_e[i] + g.m[i] as f64 * theta_m[i];
        }
        for (k, &fk) in g.f.iter().enumerate() {
            t += fk as f64 * self.lights[k].theta0;
        }
        t
    }

    /// Prepotential `F` with `dF/da_i = Z_{gamma_m_i} / p_i`.
    pub fn prepotential(&self, u: &[Complex64]) -> Result<Complex64, ModelError> {
        let mut f = self.tau_tilde.prepotential(u);
        for i in 0..self.r {
            f += self.z_tilde_m[i] / self.p[i] as f64 * u[i];
        }
        let pref = c(0.0, -1.0 / (4.0 * PI));
        for (l, light) in self.lights.iter().enumerate() {
            let z = self.z_light(l, u);
            if light.omega == 0 || z.norm() == 0.0 {
                continue;
            }
            let arg = self.arg_z(l, u, None)?;
            let lg = c(libm::log(z.norm() / PI), arg);
            f += pref * light.omega as f64 * (z * z * lg - c(3.0, PI) * z * z * 0.5);
        }
        Ok(f)
    }

    /// Kahler potential `K = 4 Im sum conj(a_i) dF/da_i`.
    pub fn kahler_potential(&self, u: &[Complex64]) -> Result<f64, ModelError> {
        let zm = self.z_magnetic(u, None)?;
        let mut s = Complex64::zero();
        for i in 0..self.r {
            s += u[i].conj() * zm[i] / self.p[i] as f64;
        }
        Ok(4.0 * s.im)
    }

    /// The positivity matrix
    /// `Im tau - (1/4 sqrt pi) sum Omega k k / (sqrt|Z| (e^{2|Z|} - 1))`
    /// over both signs of every light.
    pub fn a6_matrix(&self, u: &[Complex64]) -> Result<RMat, ModelError> {
        let t = self.tau(u)?;
        let mut m = t.map(|z| z.im);
        for (l, light) in self.lights.iter().enumerate() {
            let a = self.z_light(l, u).norm();
            let w = 2.0 * light.omega as f64 / (4.0 * libm::sqrt(PI))
                / (libm::sqrt(a) * libm::expm1(2.0 * a));
            let k = self.k(l);
            for i in 0..self.r {
                for j in 0..self.r {
                    m[(i, j)] -= w * k[i] * k[j];
                }
            }
        }
        Ok(m)
    }

    /// Lights whose central charge vanishes at `u` within `tol`.
    pub fn vanishing_lights(&self, u: &[Complex64], tol: f64) -> Vec<usize> {
        (0..self.n_lights())
            .filter(|&l| self.lights[l].omega > 0 && self.z_light(l, u).norm() < tol)
            .collect()
    }
}

/// Builds the rank-one multi-Ooguri-Vafa model with singular points `m`,
/// flavor steps `y` and pairing `p`.
pub fn build_multi_ov(m: &[Complex64], y: &[f64], p: i64) -> Result<ModelData, ModelError> {
    let n = m.len();
    if n == 0 || y.len() != n {
        return Err(ModelError::Shape(String::from("m and y must have equal nonzero length")));
    }
    if p <= 0 {
        return Err(ModelError::DivisorChain);
    }
    let sm: Complex64 = m.iter().sum();
    if sm.norm() > 1e-12 {
        return Err(ModelError::MassSum);
    }
    let sy: f64 = y.iter().sum();
    if (sy - libm::round(sy)).abs() > 1e-12 {
        return Err(ModelError::AngleSum);
    }
    if m.iter().any(|mi| mi.norm() >= PI) {
        return Err(ModelError::MassTooLarge);
    }
    let mut partial = 0.0;
    let mut lights = Vec::with_capacity(n);
    for j in 0..n {
        let theta0 = reduce_angle_positive(2.0 * PI * partial);
        let theta0 = if theta0 >= 2.0 * PI - 1e-15 { 0.0 } else { theta0 };
        lights.push(LightCharge::new(vec![p], -m[j], theta0, 1));
        partial += y[j];
    }
    let tau_tilde = TauTilde::constant(&CMat::from_element(1, 1, c(n as f64 / 4.0, 0.0)));
    let domain = Domain { center: vec![Complex64::zero()], radii: vec![PI] };
    let mut md = ModelData::new(1, vec![p], lights, tau_tilde, domain)?;
    md.multi_ov = Some(MultiOv { m: m.to_vec(), y: y.to_vec(), p });
    Ok(md)
}

/// The positivity profile `f(r) = -(1/2 pi) log(r/pi) - (1/(2 sqrt pi)) /
/// (sqrt r (e^{2r} - 1))` of a single Ooguri-Vafa light.
pub fn region_f(r: f64) -> f64 {
    -libm::log(r / PI) / (2.0 * PI) - 0.5 / libm::sqrt(PI) / (libm::sqrt(r) * libm::expm1(2.0 * r))
}

/// `f'(r)`.
pub fn region_f_prime(r: f64) -> f64 {
    let e = libm::expm1(2.0 * r);
    let den = libm::sqrt(r) * e;
    let dden = 0.5 / libm::sqrt(r) * e + libm::sqrt(r) * 2.0 * (e + 1.0);
    -1.0 / (2.0 * PI * r) + 0.5 / libm::sqrt(PI) * dden / (den * den)
}

/// Root of [`region_f`] in `(0.1, 1)` by bisection.
pub fn f_root_bisection(tol: f64) -> f64 {
    let (mut lo, mut hi) = (0.1, 1.0);
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if region_f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Root of [`region_f`] by Newton iteration from `x0`.
pub fn f_root_newton(x0: f64, tol: f64) -> f64 {
    let mut x = x0;
    for _ in 0..100 {
        let dx = region_f(x) / region_f_prime(x);
        x -= dx;
        if dx.abs() < tol {
            break;
        }
    }
    x
}

/// The root `r0` of [`region_f`], to about 1e-15.
pub fn f_root() -> f64 {
    f_root_newton(f_root_bisection(1e-6), 1e-16)
}

/// One named check inside an [`AssumptionReport`].
#[derive(Debug, Clone, PartialEq)]
pub struct AssumptionCheck {
    /// Assumption label.
    pub name: &'static str,
    /// Verdict.
    pub passed: bool,
    /// Human-readable detail.
    pub detail: String,
}

/// A subset of vanishing lights whose angles can vanish simultaneously.
#[derive(Debug, Clone, PartialEq)]
pub struct SolvableSubset {
    /// Light indices.
    pub lights: Vec<usize>,
    /// Whether their images form a basis of a primitive sublattice.
    pub primitive: bool,
}

/// Options for [`check_assumptions`].
#[derive(Debug, Clone, PartialEq)]
pub struct AssumptionOptions {
    /// Shell `(inner, outer)` for the positivity sample; `None` picks the
    /// default.
    pub shell: Option<(f64, f64)>,
    /// Angles per light circle in the rank-one grid.
    pub grid: usize,
    /// Tolerance for `Z = 0` and `theta = 0`.
    pub zero_tol: f64,
    /// Radial and angular sample counts on the shell.
    pub shell_samples: (usize, usize),
}

impl Default for AssumptionOptions {
    fn default() -> Self {
        AssumptionOptions { shell: None, grid: 720, zero_tol: 1e-9, shell_samples: (40, 360) }
    }
}

/// Report of [`check_assumptions`].
#[derive(Debug, Clone, PartialEq)]
pub struct AssumptionReport {
    /// Individual checks.
    pub checks: Vec<AssumptionCheck>,
    /// Lights with `Z(u'') = 0`.
    pub vanishing: Vec<usize>,
    /// Subsets of vanishing lights with a common zero of their angles.
    pub solvable_subsets: Vec<SolvableSubset>,
    /// Grid angles (rank one) where the vanishing set was not primitive.
    pub grid_failures: Vec<f64>,
    /// Number of grid angles examined.
    pub grid_points: usize,
    /// Shell used for positivity.
    pub shell: (f64, f64),
    /// Smallest eigenvalue of the positivity matrix over the shell sample.
    pub a6_margin: f64,
    /// Point attaining the margin.
    pub a6_worst: Vec<Complex64>,
}

impl AssumptionReport {
    /// Whether every check passed.
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    /// First failed check.
    pub fn first_failure(&self) -> Option<&AssumptionCheck> {
        self.checks.iter().find(|c| !c.passed)
    }
}

/// Default positivity shell. For multi-Ooguri-Vafa models it is
/// `(max|m| + r0 + 0.05, pi - max|m| - 0.05)`, on which every `|u - m_j|`
/// lies in `(r0, pi)` so each light term is positive; when that is empty the
/// outer radius falls back to `pi - 0.05`. Otherwise `(radius/2, 0.95 radius)`.
pub fn default_shell(md: &ModelData) -> (f64, f64) {
    match &md.multi_ov {
        Some(ov) => {
            let mmax = ov.m.iter().fold(0.0f64, |a, x| a.max(x.norm()));
            let inner = mmax + f_root() + 0.05;
            let outer = PI - mmax - 0.05;
            if outer > inner { (inner, outer) } else { (inner, PI - 0.05) }
        }
        None => {
            let r = md.domain.radii.iter().fold(f64::INFINITY, |a, &b| a.min(b));
            (0.5 * r, 0.95 * r)
        }
    }
}

fn images_primitive(md: &ModelData, subset: &[usize], light_basis: &[IVec]) -> bool {
    let mut coords = Vec::with_capacity(subset.len());
    for &l in subset {
        let v: IVec = md.k_int(l).iter().map(|&x| BigInt::from(x)).collect();
        match coordinates_in_echelon(light_basis, &v) {
            Some(x) => coords.push(x),
            None => return false,
        }
    }
    matches!(is_primitive_in(&coords, light_basis.len()), Ok(true))
}

fn angles_solvable(md: &ModelData, subset: &[usize], tol: f64) -> bool {
    let rows: Vec<IVec> = subset
        .iter()
        .map(|&l| md.k_int(l).iter().map(|&x| BigInt::from(x)).collect())
        .collect();
    let f = smith_form(rows);
    let b: Vec<f64> = subset.iter().map(|&l| -md.lights[l].theta0).collect();
    f.left_kernel().iter().all(|row| {
        let mut s = 0.0;
        for (x, bj) in row.iter().zip(&b) {
            s += num_traits::ToPrimitive::to_f64(x).unwrap_or(f64::NAN) * bj;
        }
        reduce_angle(s).abs() < tol
    })
}

/// Checks the standing assumptions at `u''` and reports every verdict.
pub fn check_assumptions(
    md: &ModelData,
    u2: &[Complex64],
    opts: &AssumptionOptions,
) -> AssumptionReport {
    let mut checks = Vec::new();
    let structural = md.validate();
    let chain_ok = !matches!(structural, Err(ModelError::DivisorChain));
    checks.push(AssumptionCheck {
        name: "A1",
        passed: chain_ok,
        detail: format!("divisors {:?}", md.p),
    });
    let a2_ok = !matches!(structural, Err(ModelError::Divisibility { .. }));
    checks.push(AssumptionCheck {
        name: "A2",
        passed: a2_ok,
        detail: format!("{} light pairs with integral nonnegative indices", md.n_lights()),
    });
    let a3_ok = !matches!(structural, Err(ModelError::ConstantCharge { .. }));
    let vanishing = md.vanishing_lights(u2, opts.zero_tol);
    checks.push(AssumptionCheck {
        name: "A3",
        passed: a3_ok,
        detail: format!("lights vanishing at u'': {vanishing:?}"),
    });
    let a4_ok = md.tau_tilde.is_symmetric(1e-12);
    checks.push(AssumptionCheck {
        name: "A4",
        passed: a4_ok,
        detail: String::from("tau~ symmetric with polynomial prepotential"),
    });

    // A5: every subset of vanishing lights whose angles can vanish together
    // must map to a basis of a primitive sublattice of the light lattice.
    let all_images: Vec<IVec> = (0..md.n_lights())
        .filter(|&l| md.lights[l].omega > 0)
        .map(|l| md.k_int(l).iter().map(|&x| BigInt::from(x)).collect())
        .collect();
    let light_basis = row_echelon_basis(&all_images);
    let mut solvable_subsets = Vec::new();
    let nv = vanishing.len().min(16);
    for mask in 1u32..(1u32 << nv) {
        let subset: Vec<usize> = (0..nv).filter(|b| mask & (1 << b) != 0).map(|b| vanishing[b]).collect();
        if angles_solvable(md, &subset, opts.zero_tol) {
            let primitive = images_primitive(md, &subset, &light_basis);
            solvable_subsets.push(SolvableSubset { lights: subset, primitive });
        }
    }
    let mut grid_failures = Vec::new();
    let mut grid_points = 0;
    if md.r == 1 && !vanishing.is_empty() {
        let mut angles: Vec<f64> =
            (0..opts.grid).map(|j| 2.0 * PI * j as f64 / opts.grid as f64).collect();
        for &l in &vanishing {
            let k = md.k(l)[0];
            angles.push(reduce_angle_positive(-md.lights[l].theta0 / k));
        }
        for &th in &angles {
            grid_points += 1;
            let s: Vec<usize> = vanishing
                .iter()
                .copied()
                .filter(|&l| reduce_angle(md.theta_light(l, &[th])).abs() < opts.zero_tol)
                .collect();
            if !s.is_empty() && !images_primitive(md, &s, &light_basis) {
                grid_failures.push(th);
            }
        }
    }
    let a5_ok = solvable_subsets.iter().all(|s| s.primitive) && grid_failures.is_empty();
    checks.push(AssumptionCheck {
        name: "A5",
        passed: a5_ok,
        detail: format!(
            "{} solvable subsets, {} grid failures",
            solvable_subsets.len(),
            grid_failures.len()
        ),
    });

    if let Some(ov) = &md.multi_ov {
        let mut ok = true;
        for (i, mi) in ov.m.iter().enumerate() {
            let group: Vec<usize> = (0..ov.m.len()).filter(|&j| (ov.m[j] - mi).norm() < opts.zero_tol).collect();
            if group[0] != i {
                continue;
            }
            for (a, &j1) in group.iter().enumerate() {
                for &j2 in &group[a + 1..] {
                    let d = md.lights[j1].theta0 - md.lights[j2].theta0;
                    if reduce_angle(d).abs() < opts.zero_tol {
                        ok = false;
                    }
                }
            }
        }
        checks.push(AssumptionCheck {
            name: "OVsums",
            passed: ok,
            detail: String::from("partial sums distinct modulo 2 pi at each singular point"),
        });
    }

    // A6 on the shell
    let shell = opts.shell.unwrap_or_else(|| default_shell(md));
    let mut margin = f64::INFINITY;
    let mut worst = u2.to_vec();
    if md.lights.iter().any(|l| l.omega > 0) {
        let (nr, na) = opts.shell_samples;
        let n_pts = if md.r == 1 { nr * na } else { nr * na / 4 };
        for idx in 0..n_pts {
            let u: Vec<Complex64> = if md.r == 1 {
                let (ir, ia) = (idx / na, idx % na);
                let rad = shell.0 + (shell.1 - shell.0) * (ir as f64 + 0.5) / nr as f64;
                let ang = 2.0 * PI * (ia as f64 + 0.5) / na as f64;
                vec![md.domain.center[0] + Complex64::from_polar(rad, ang)]
            } else {
                (0..md.r)
                    .map(|i| {
                        let h1 = crate::verify::halton(idx + 1, crate::verify::PRIMES[2 * i]);
                        let h2 = crate::verify::halton(idx + 1, crate::verify::PRIMES[2 * i + 1]);
                        let rad = shell.0 + (shell.1 - shell.0) * h1;
                        md.domain.center[i] + Complex64::from_polar(rad, 2.0 * PI * h2)
                    })
                    .collect()
            };
            match md.a6_matrix(&u) {
                Ok(m) => {
                    let e = min_eigenvalue(&m);
                    if e < margin {
                        margin = e;
                        worst = u;
                    }
                }
                Err(_) => continue,
            }
        }
    }
    checks.push(AssumptionCheck {
        name: "A6",
        passed: margin > 0.0,
        detail: format!("min eigenvalue {margin:e} on shell ({}, {})", shell.0, shell.1),
    });

    AssumptionReport {
        checks,
        vanishing,
        solvable_subsets,
        grid_failures,
        grid_points,
        shell,
        a6_margin: margin,
        a6_worst: worst,
    }
}
