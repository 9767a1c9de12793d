//! Sampling and numerical certificates.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;

use crate::linalg::{max_abs, min_eigenvalue, top_wedge, CMat, RMat};
use crate::modeldata::{build_multi_ov, default_shell, Chart, Charge, FieldPoint, ModelData};
use crate::modelgeom::{
    bps_ray_angle, contour_angle, decomposition_margin, good_decomposition, metric_gh,
    potential_connection, potential_v, varpi_model, varpi_model_from_characters, xmodel,
    xmodel_correction, Continuation, SectorDecomposition, TnChart, GOOD_MARGIN,
};
use crate::semiflat::{gh_decompose_sf, laurent_split, varpi_from_potential, varpi_sf, xsf, GeomError};
use crate::specfun::reduce_angle;

/// The first primes, used as Halton bases.
pub const PRIMES: [u64; 16] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53];

/// `index`-th element of the van der Corput sequence in `base`.
pub fn halton(index: usize, base: u64) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    let mut i = index as u64;
    while i > 0 {
        f /= base as f64;
        r += f * (i % base) as f64;
        i /= base;
    }
    r
}

/// Central-difference partial derivatives `d_k W` of a matrix field.
fn matrix_partials<F, E>(f: &mut F, x: &[f64], h: f64) -> Result<Vec<CMat>, E>
where
    F: FnMut(&[f64]) -> Result<CMat, E>,
{
    let mut out = Vec::with_capacity(x.len());
    for k in 0..x.len() {
        let mut xp = x.to_vec();
        let mut xm = x.to_vec();
        xp[k] += h;
        xm[k] -= h;
        out.push((f(&xp)? - f(&xm)?) / num_complex::Complex64::new(2.0 * h, 0.0));
    }
    Ok(out)
}

fn cyclic_max(d: &[CMat]) -> f64 {
    let n = d.len();
    let mut worst = 0.0f64;
    for a in 0..n {
        for b in a + 1..n {
            for c in b + 1..n {
                let v = d[a][(b, c)] + d[b][(c, a)] + d[c][(a, b)];
                worst = worst.max(v.norm());
            }
        }
    }
    worst
}

/// Largest component of `dW` for the 2-form field `x -> W(x)`, from central
/// differences at steps `h` and `h/2` combined by Richardson extrapolation.
/// Returns `(extrapolated, at h, at h/2)`.
pub fn closedness_residual<F, E>(mut f: F, x: &[f64], h: f64) -> Result<(f64, f64, f64), E>
where
    F: FnMut(&[f64]) -> Result<CMat, E>,
{
    let d1 = matrix_partials(&mut f, x, h)?;
    let d2 = matrix_partials(&mut f, x, h / 2.0)?;
    let rich: Vec<CMat> = d1
        .iter()
        .zip(&d2)
        .map(|(a, b)| (b * num_complex::Complex64::new(4.0, 0.0) - a) / num_complex::Complex64::new(3.0, 0.0))
        .collect();
    Ok((cyclic_max(&rich), cyclic_max(&d1), cyclic_max(&d2)))
}

/// A pass/fail check with quantitative residuals. Margin checks store
/// `-margin` as the residual against a negative tolerance.
#[derive(Debug, Clone, PartialEq)]
pub struct Certificate {
    /// Check name.
    pub name: String,
    /// Number of sample points.
    pub points: usize,
    /// Largest residual.
    pub max_residual: f64,
    /// Mean residual.
    pub mean_residual: f64,
    /// Tolerance.
    pub tol: f64,
    /// Finite-difference step, when one was used.
    pub step: Option<f64>,
    /// `max_residual <= tol` (false for NaN or empty samples).
    pub passed: bool,
}

impl Certificate {
    /// Certificate from per-point residuals.
    pub fn from_residuals(name: &str, residuals: &[f64], tol: f64, step: Option<f64>) -> Self {
        let n = residuals.len();
        let mut max = f64::NEG_INFINITY;
        let mut sum = 0.0;
        let mut nan = false;
        for &r in residuals {
            nan |= r.is_nan();
            max = max.max(r);
            sum += r;
        }
        let max = if nan { f64::NAN } else { max };
        let mean = if n > 0 { sum / n as f64 } else { f64::NAN };
        Certificate {
            name: String::from(name),
            points: n,
            max_residual: max,
            mean_residual: mean,
            tol,
            step,
            passed: n > 0 && !nan && max <= tol,
        }
    }
}

/// Certificates ordered by name.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CertificateBundle {
    /// The certificates.
    pub certificates: Vec<Certificate>,
}

impl CertificateBundle {
    /// Bundle sorted by name.
    pub fn new(mut certificates: Vec<Certificate>) -> Self {
        certificates.sort_by(|a, b| a.name.cmp(&b.name));
        CertificateBundle { certificates }
    }

    /// Whether every certificate passed.
    pub fn passed(&self) -> bool {
        !self.certificates.is_empty() && self.certificates.iter().all(|c| c.passed)
    }

    /// Certificate by name.
    pub fn get(&self, name: &str) -> Option<&Certificate> {
        self.certificates.iter().find(|c| c.name == name)
    }

    /// Merges another bundle, keeping name order.
    pub fn merge(self, other: CertificateBundle) -> Self {
        let mut all = self.certificates;
        all.extend(other.certificates);
        CertificateBundle::new(all)
    }
}

/// Which twistor family to certify.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    /// The semi-flat family.
    SemiFlat,
    /// The model family.
    Model,
}

/// Tolerances of the certificates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Richardson-extrapolated closedness residual.
    pub closedness: f64,
    /// Relative size of the `(2r+1)`-th singular value.
    pub rank: f64,
    /// Lower bound on `|det [ker W, conj ker W]|`.
    pub kernel: f64,
    /// Reality residual of the 2-form family.
    pub reality: f64,
    /// Agreement of the two constructions of the model form.
    pub routes: f64,
    /// Cauchy-Riemann residual of the corrected characters.
    pub holomorphy: f64,
    /// Relative jump residual.
    pub jump: f64,
    /// Reality residual of the corrected characters.
    pub character_reality: f64,
    /// Cauchy differences of the `zeta -> 0` ratio.
    pub limit: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            closedness: 1e-5,
            rank: 1e-9,
            kernel: 1e-8,
            reality: 1e-10,
            routes: 1e-7,
            holomorphy: 1e-6,
            jump: 1e-6,
            character_reality: 1e-9,
            limit: 1e-6,
        }
    }
}

/// Seeded low-discrepancy sample plan.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplePlan {
    /// Offset into the Halton sequence.
    pub seed: u64,
    /// Points in the ordinary chart.
    pub base_points: usize,
    /// Points in a Taub-NUT chart (model family only).
    pub tn_points: usize,
    /// Smallest and largest `|q|` of the Taub-NUT points.
    pub tn_q_range: (f64, f64),
    /// Twistor parameters.
    pub zetas: Vec<Complex64>,
    /// Finite-difference step (confirmed at `h/2`).
    pub h: f64,
    /// Sectors per half-plane for the ray integrals.
    pub sectors: usize,
    /// Radius of the excluded tubes around vanishing central charges and
    /// branch cuts.
    pub tube: f64,
    /// Tolerances.
    pub tol: Tolerances,
}

impl Default for SamplePlan {
    fn default() -> Self {
        SamplePlan {
            seed: 0,
            base_points: 25,
            tn_points: 5,
            tn_q_range: (1e-2, 0.5),
            zetas: vec![
                Complex64::from_polar(0.5, 0.3),
                Complex64::from_polar(1.0, 2.1),
                Complex64::from_polar(1.8, -1.2),
            ],
            h: 1e-3,
            sectors: 5,
            tube: 1e-2,
            tol: Tolerances::default(),
        }
    }
}

/// A sample point of a certificate run.
#[derive(Debug, Clone, PartialEq)]
pub enum SamplePoint {
    /// A point in the unprimed chart (its `zeta` is unused).
    Base(FieldPoint),
    /// A point `(w1, w2)` in a Taub-NUT chart.
    TaubNut {
        /// The chart.
        chart: TnChart,
        /// First coordinate.
        w1: Complex64,
        /// Second coordinate.
        w2: Complex64,
    },
}

fn halton_vec(index: usize, dims: usize) -> Vec<f64> {
    (0..dims).map(|d| halton(index, PRIMES[d])).collect()
}

fn sample_u(md: &ModelData, x: &[f64]) -> Vec<Complex64> {
    match &md.multi_ov {
        Some(_) => {
            let rad = default_shell(md).1 * libm::sqrt(x[0]);
            vec![Complex64::from_polar(rad, 2.0 * PI * x[1])]
        }
        None => (0..md.r)
            .map(|i| {
                let rad = md.domain.radii[i] * 0.95 * libm::sqrt(x[2 * i]);
                md.domain.center[i] + Complex64::from_polar(rad, 2.0 * PI * x[2 * i + 1])
            })
            .collect(),
    }
}

/// Quasi-random sample points over the validated region, avoiding tubes
/// around vanishing central charges and branch cuts; Taub-NUT points are
/// added for the model family when some light admits a chart.
pub fn sample_points(md: &ModelData, family: Family, plan: &SamplePlan) -> Vec<SamplePoint> {
    let r = md.r;
    let mut out = Vec::new();
    let mut index = (plan.seed as usize).wrapping_mul(7919).wrapping_add(1);
    while out.len() < plan.base_points {
        let x = halton_vec(index, 4 * r);
        index += 1;
        let u = sample_u(md, &x);
        let near = (0..md.n_lights()).any(|l| {
            md.lights[l].omega > 0
                && (md.z_light(l, &u).norm() < plan.tube || md.cut_distance(l, &u) < plan.tube)
        });
        if near || md.tau(&u).is_err() {
            continue;
        }
        let te = (0..r).map(|i| 2.0 * PI * x[2 * r + i]).collect();
        let tm = (0..r).map(|i| 2.0 * PI * x[3 * r + i]).collect();
        out.push(SamplePoint::Base(FieldPoint::new(u, te, tm, Complex64::new(1.0, 0.0))));
    }
    if family == Family::Model && plan.tn_points > 0 {
        if let Some(chart) = (0..md.n_lights()).find_map(|l| TnChart::new(md, l).ok()) {
            let (qmin, qmax) = plan.tn_q_range;
            let n = plan.tn_points;
            for j in 0..n {
                let t = if n == 1 { 1.0 } else { j as f64 / (n - 1) as f64 };
                let q = qmax * libm::pow(qmin / qmax, t);
                let x = halton_vec(index + j, 3);
                let chi = 0.2 + (PI / 2.0 - 0.4) * x[0];
                let w1 = Complex64::from_polar(q * libm::cos(chi), 2.0 * PI * x[1]);
                let w2 = Complex64::from_polar(q * libm::sin(chi), 2.0 * PI * x[2]);
                out.push(SamplePoint::TaubNut { chart, w1, w2 });
            }
        }
    }
    out
}

/// Residuals of the twistor checks at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct TwistorResiduals {
    /// Extrapolated closedness residual, worst over the twistor parameters.
    pub closedness: f64,
    /// Closedness residual at `h` and `h/2` (unextrapolated).
    pub closedness_raw: (f64, f64),
    /// Relative `(2r+1)`-th singular value of `varpi`.
    pub rank_varpi: f64,
    /// `|det [ker varpi, conj ker varpi]|`.
    pub kernel_varpi: f64,
    /// Relative `(2r+1)`-th singular value of `omega_+`.
    pub rank_omega_plus: f64,
    /// `|det [ker omega_+, conj ker omega_+]|`.
    pub kernel_omega_plus: f64,
    /// Normalized `varpi^r ^ conj(varpi)^r` coefficient.
    pub top_wedge: f64,
    /// Reality residual.
    pub reality: f64,
    /// Smallest eigenvalue of `V`.
    pub v_margin: f64,
    /// Smallest eigenvalue of the metric.
    pub metric_margin: f64,
    /// Agreement of the two constructions (model family, ordinary chart).
    pub routes: Option<f64>,
}

impl TwistorResiduals {
    fn failed() -> Self {
        TwistorResiduals {
            closedness: f64::INFINITY,
            closedness_raw: (f64::INFINITY, f64::INFINITY),
            rank_varpi: f64::INFINITY,
            kernel_varpi: 0.0,
            rank_omega_plus: f64::INFINITY,
            kernel_omega_plus: 0.0,
            top_wedge: f64::NEG_INFINITY,
            reality: f64::INFINITY,
            v_margin: f64::NEG_INFINITY,
            metric_margin: f64::NEG_INFINITY,
            routes: Some(f64::INFINITY),
        }
    }
}

/// Relative size of the `(2r+1)`-th singular value and `|det [K, conj K]|`
/// for an orthonormal kernel basis `K` of a `4r x 4r` complex matrix.
pub fn holomorphic_symplectic_residuals(w: &CMat) -> (f64, f64) {
    let n = w.nrows();
    let half = n / 2;
    let svd = w.clone().svd(false, true);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let top = svd.singular_values[order[0]];
    if !(top > 0.0) {
        return (f64::INFINITY, 0.0);
    }
    let rank = svd.singular_values[order[half]] / top;
    let vt = match svd.v_t {
        Some(v) => v,
        None => return (f64::INFINITY, 0.0),
    };
    let mut m = CMat::zeros(n, n);
    for (col, &k) in order[half..].iter().enumerate() {
        for row in 0..n {
            let x = vt[(k, row)].conj();
            m[(row, col)] = x;
            m[(row, col + half)] = x.conj();
        }
    }
    (rank, m.determinant().norm())
}

fn top_margin(w: &CMat) -> f64 {
    let r = w.nrows() / 4;
    let scale = libm::pow(max_abs(w), (2 * r) as f64);
    if !(scale > 0.0) {
        return f64::NEG_INFINITY;
    }
    top_wedge(w).re / scale
}

fn varpi_at(
    md: &ModelData,
    family: Family,
    point: &SamplePoint,
    x: &[f64],
    zeta: Complex64,
) -> Result<CMat, GeomError> {
    match (point, family) {
        (SamplePoint::Base(_), Family::SemiFlat) => {
            Ok(varpi_sf(md, &FieldPoint::from_coords(x, zeta, Chart::Unprimed))?.coeffs)
        }
        (SamplePoint::Base(_), Family::Model) => {
            Ok(varpi_model(md, &FieldPoint::from_coords(x, zeta, Chart::Unprimed))?.coeffs)
        }
        (SamplePoint::TaubNut { chart, .. }, _) => {
            Ok(chart.varpi_model(md, Complex64::new(x[0], x[1]), Complex64::new(x[2], x[3]), zeta)?.coeffs)
        }
    }
}

fn point_coords(point: &SamplePoint) -> Vec<f64> {
    match point {
        SamplePoint::Base(p) => p.coords(),
        SamplePoint::TaubNut { w1, w2, .. } => vec![w1.re, w1.im, w2.re, w2.im],
    }
}

/// Twistor residuals at one point; evaluation failures give failing values.
pub fn twistor_point(md: &ModelData, family: Family, point: &SamplePoint, plan: &SamplePlan) -> TwistorResiduals {
    twistor_point_inner(md, family, point, plan).unwrap_or_else(|_| TwistorResiduals::failed())
}

fn twistor_point_inner(
    md: &ModelData,
    family: Family,
    point: &SamplePoint,
    plan: &SamplePlan,
) -> Result<TwistorResiduals, GeomError> {
    let x = point_coords(point);
    let mut res = TwistorResiduals {
        closedness: 0.0,
        closedness_raw: (0.0, 0.0),
        rank_varpi: 0.0,
        kernel_varpi: f64::INFINITY,
        rank_omega_plus: 0.0,
        kernel_omega_plus: f64::INFINITY,
        top_wedge: f64::INFINITY,
        reality: 0.0,
        v_margin: 0.0,
        metric_margin: 0.0,
        routes: None,
    };
    for &zeta in &plan.zetas {
        let (rich, a, b) = closedness_residual(|y: &[f64]| varpi_at(md, family, point, y, zeta), &x, plan.h)?;
        res.closedness = res.closedness.max(rich);
        res.closedness_raw = (res.closedness_raw.0.max(a), res.closedness_raw.1.max(b));
        let w = varpi_at(md, family, point, &x, zeta)?;
        let (rank, ker) = holomorphic_symplectic_residuals(&w);
        res.rank_varpi = res.rank_varpi.max(rank);
        res.kernel_varpi = res.kernel_varpi.min(ker);
        res.top_wedge = res.top_wedge.min(top_margin(&w));
        let wr = varpi_at(md, family, point, &x, -1.0 / zeta.conj())?;
        res.reality = res.reality.max(max_abs(&(wr - w.map(|z| z.conj()))));
    }
    let parts = laurent_split(|z| varpi_at(md, family, point, &x, z))?;
    let (rank, ker) = holomorphic_symplectic_residuals(&parts.omega_plus());
    res.rank_omega_plus = rank;
    res.kernel_omega_plus = ker;
    let (v, g) = match (point, family) {
        (SamplePoint::Base(p), Family::SemiFlat) => {
            let pc = gh_decompose_sf(md, &p.u)?;
            let g = metric_gh(md, &pc)?;
            (pc.v, g)
        }
        (SamplePoint::Base(p), Family::Model) => {
            let pc = potential_connection(md, p, None)?;
            let g = metric_gh(md, &pc)?;
            let dec = good_decomposition(md, &p.u, plan.sectors)?;
            let zeta = plan.zetas.first().copied().unwrap_or(Complex64::new(1.0, 0.0));
            let q = p.with_zeta(zeta);
            let a = varpi_from_potential(md, &pc, zeta);
            let b = varpi_model_from_characters(md, &q, &dec, Continuation::None)?.coeffs;
            res.routes = Some(max_abs(&(a - b)));
            (pc.v, g)
        }
        (SamplePoint::TaubNut { chart, w1, w2 }, _) => {
            let p = chart.to_primed(md, *w1, *w2, Complex64::new(1.0, 0.0));
            (potential_v(md, &p.u, &p.theta_e)?, chart.metric(md, *w1, *w2)?)
        }
    };
    res.v_margin = min_eigenvalue(&v);
    res.metric_margin = min_eigenvalue(&g);
    Ok(res)
}

/// Assembles twistor certificates from per-point residuals.
pub fn assemble_twistor(results: &[TwistorResiduals], plan: &SamplePlan) -> CertificateBundle {
    let t = &plan.tol;
    let col = |f: &dyn Fn(&TwistorResiduals) -> f64| -> Vec<f64> { results.iter().map(f).collect() };
    let mut certs = vec![
        Certificate::from_residuals("twistor.closedness", &col(&|r| r.closedness), t.closedness, Some(plan.h)),
        Certificate::from_residuals("twistor.closedness_h", &col(&|r| r.closedness_raw.0), f64::INFINITY, Some(plan.h)),
        Certificate::from_residuals("twistor.closedness_h2", &col(&|r| r.closedness_raw.1), f64::INFINITY, Some(plan.h / 2.0)),
        Certificate::from_residuals("twistor.varpi_rank", &col(&|r| r.rank_varpi), t.rank, None),
        Certificate::from_residuals("twistor.varpi_kernel", &col(&|r| -r.kernel_varpi), -t.kernel, None),
        Certificate::from_residuals("twistor.omega_plus_rank", &col(&|r| r.rank_omega_plus), t.rank, None),
        Certificate::from_residuals("twistor.omega_plus_kernel", &col(&|r| -r.kernel_omega_plus), -t.kernel, None),
        Certificate::from_residuals("twistor.top_wedge", &col(&|r| -r.top_wedge), -f64::MIN_POSITIVE, None),
        Certificate::from_residuals("twistor.reality", &col(&|r| r.reality), t.reality, None),
        Certificate::from_residuals("twistor.potential_positive", &col(&|r| -r.v_margin), -f64::MIN_POSITIVE, None),
        Certificate::from_residuals("twistor.metric_positive", &col(&|r| -r.metric_margin), -f64::MIN_POSITIVE, None),
    ];
    let routes: Vec<f64> = results.iter().filter_map(|r| r.routes).collect();
    if !routes.is_empty() {
        certs.push(Certificate::from_residuals("twistor.routes", &routes, t.routes, None));
    }
    CertificateBundle::new(certs)
}

/// Twistor certificates over a sample plan: closedness, holomorphic
/// symplectic rank and kernel transversality for `varpi` and `omega_+`,
/// top-wedge sign, reality, positivity of `V` and of the metric.
pub fn certify_twistor(md: &ModelData, family: Family, plan: &SamplePlan) -> CertificateBundle {
    let pts = sample_points(md, family, plan);
    let results: Vec<TwistorResiduals> = pts.iter().map(|p| twistor_point(md, family, p, plan)).collect();
    assemble_twistor(&results, plan)
}

/// Residuals of the corrected-character checks at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct RhResiduals {
    /// `|d/d conj(zeta) log X^model|` off the contours.
    pub holomorphy: f64,
    /// Relative jump residual across the contours.
    pub jump: f64,
    /// `|X(zeta) conj X(-1/conj zeta) - 1|`.
    pub reality: f64,
    /// Cauchy differences of `X^model / X^sf` as `zeta -> 0`.
    pub limit: f64,
}

/// Corrected-character residuals at one base point.
pub fn rh_point(md: &ModelData, pt: &FieldPoint, plan: &SamplePlan, index: usize) -> RhResiduals {
    rh_point_inner(md, pt, plan, index).unwrap_or(RhResiduals {
        holomorphy: f64::INFINITY,
        jump: f64::INFINITY,
        reality: f64::INFINITY,
        limit: f64::INFINITY,
    })
}

fn rh_point_inner(md: &ModelData, pt: &FieldPoint, plan: &SamplePlan, index: usize) -> Result<RhResiduals, GeomError> {
    let r = md.r;
    let n = md.n_lights();
    let dec = good_decomposition(md, &pt.u, plan.sectors)?;
    let cont = Continuation::None;
    let mut charges = Vec::new();
    for i in 0..r {
        charges.push(Charge::electric(r, n, i));
        charges.push(Charge::magnetic(r, n, i));
    }
    let active: Vec<usize> = (0..n).filter(|&l| md.lights[l].omega > 0).collect();
    let mut contours = Vec::new();
    for &l in &active {
        for s in [1i8, -1] {
            contours.push((l, s, contour_angle(md, l, s, &pt.u, &dec, cont)));
        }
    }
    let mut out = RhResiduals { holomorphy: 0.0, jump: 0.0, reality: 0.0, limit: 0.0 };
    for &zeta0 in &plan.zetas {
        // rotate away from the contours
        let mut zeta = zeta0;
        for _ in 0..8 {
            let close = contours.iter().any(|&(_, _, phi)| libm::fabs(reduce_angle(zeta.arg() - phi)) < 1e-2);
            if !close {
                break;
            }
            zeta *= Complex64::from_polar(1.0, 0.037);
        }
        let hz = 1e-4 * zeta.norm();
        for g in &charges {
            let f = |z: Complex64| xmodel_correction(md, g, &pt.with_zeta(z), &dec, cont);
            let dx = (f(zeta + hz)? - f(zeta - hz)?) / (2.0 * hz);
            let dy = (f(zeta + Complex64::new(0.0, hz))? - f(zeta - Complex64::new(0.0, hz))?) / (2.0 * hz);
            out.holomorphy = out.holomorphy.max(((dx + Complex64::new(0.0, 1.0) * dy) / 2.0).norm());
            let x = xmodel(md, g, &pt.with_zeta(zeta), &dec, cont)?;
            let y = xmodel(md, g, &pt.with_zeta(-1.0 / zeta.conj()), &dec, cont)?;
            out.reality = out.reality.max((x * y.conj() - 1.0).norm());
        }
    }
    let eps = 1e-10;
    for (j, &(_, _, phi)) in contours.iter().enumerate() {
        let rho = 0.3 + 2.7 * halton(index * contours.len() + j + 1, 2);
        let on = pt.with_zeta(Complex64::from_polar(rho, phi));
        let ccw = pt.with_zeta(Complex64::from_polar(rho, phi + eps));
        let cw = pt.with_zeta(Complex64::from_polar(rho, phi - eps));
        for g in &charges {
            let mut factor = Complex64::new(1.0, 0.0);
            for &(l2, s2, phi2) in &contours {
                if libm::fabs(reduce_angle(phi2 - phi)) < 1e-12 {
                    let gp = if s2 == 1 { md.light_charge(l2) } else { md.light_charge(l2).neg() };
                    let e = md.lights[l2].omega as i64 * md.pair(&gp, g);
                    factor *= (1.0 - xsf(md, &gp, &on)?).powi(e as i32);
                }
            }
            let a = xmodel(md, g, &ccw, &dec, cont)?;
            let b = xmodel(md, g, &cw, &dec, cont)?;
            out.jump = out.jump.max((a - factor * b).norm() / a.norm().max(1.0));
        }
    }
    if let Some(&l) = active.first() {
        let dir = bps_ray_angle(md, l, 1, &pt.u) + PI / 3.0;
        let mut prev: Option<Vec<Complex64>> = None;
        let mut diffs = Vec::new();
        for k in 1..=9 {
            let zeta = Complex64::from_polar(libm::pow(10.0, -(k as f64)), dir);
            let vals: Vec<Complex64> = charges
                .iter()
                .map(|g| xmodel_correction(md, g, &pt.with_zeta(zeta), &dec, cont).map(|c| c.exp()))
                .collect::<Result<_, _>>()?;
            if let Some(p) = &prev {
                diffs.push(vals.iter().zip(p).fold(0.0f64, |a, (x, y)| a.max((x - y).norm())));
            }
            prev = Some(vals);
        }
        out.limit = diffs[diffs.len() - 2..].iter().fold(0.0f64, |a, &b| a.max(b));
    }
    Ok(out)
}

/// Assembles corrected-character certificates.
pub fn assemble_rh(results: &[RhResiduals], plan: &SamplePlan) -> CertificateBundle {
    let t = &plan.tol;
    let col = |f: &dyn Fn(&RhResiduals) -> f64| -> Vec<f64> { results.iter().map(f).collect() };
    CertificateBundle::new(vec![
        Certificate::from_residuals("rh.holomorphy", &col(&|r| r.holomorphy), t.holomorphy, Some(1e-4)),
        Certificate::from_residuals("rh.jump", &col(&|r| r.jump), t.jump, None),
        Certificate::from_residuals("rh.reality", &col(&|r| r.reality), t.character_reality, None),
        Certificate::from_residuals("rh.zeta_to_zero", &col(&|r| r.limit), t.limit, None),
    ])
}

/// Corrected-character certificates: holomorphy off the contours, the jump
/// relation across each contour, reality, and the `zeta -> 0` limit.
pub fn certify_rh_properties(md: &ModelData, plan: &SamplePlan) -> CertificateBundle {
    let pts = sample_points(md, Family::SemiFlat, plan);
    let results: Vec<RhResiduals> = pts
        .iter()
        .enumerate()
        .filter_map(|(i, p)| match p {
            SamplePoint::Base(q) => Some(rh_point(md, q, plan, i)),
            SamplePoint::TaubNut { .. } => None,
        })
        .collect();
    assemble_rh(&results, plan)
}

/// Positivity certificate of a potential matrix.
pub fn certify_potential(v: &RMat) -> Certificate {
    Certificate::from_residuals("potential_positive", &[-min_eigenvalue(v)], -f64::MIN_POSITIVE, None)
}

/// Positivity certificate of a metric.
pub fn certify_metric(g: &RMat) -> Certificate {
    Certificate::from_residuals("metric_positive", &[-min_eigenvalue(g)], -f64::MIN_POSITIVE, None)
}

/// Goodness certificate of a sector decomposition at `u`.
pub fn certify_decomposition(md: &ModelData, u: &[Complex64], dec: &SectorDecomposition) -> Certificate {
    Certificate::from_residuals("decomposition_good", &[-decomposition_margin(md, u, dec)], -GOOD_MARGIN, None)
}

/// Outcome of a negative control: perturbed data must be caught.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlOutcome {
    /// Control name.
    pub name: &'static str,
    /// Whether the perturbation was caught.
    pub detected: bool,
    /// What caught it.
    pub detail: String,
}

/// Flips the sign of the smallest eigenvalue of a symmetric matrix.
pub fn flip_smallest_eigenvalue(v: &RMat) -> RMat {
    let eig = v.clone().symmetric_eigen();
    let mut k = 0;
    for i in 1..eig.eigenvalues.len() {
        if eig.eigenvalues[i] < eig.eigenvalues[k] {
            k = i;
        }
    }
    let col = eig.eigenvectors.column(k).into_owned();
    v - col.clone() * col.transpose() * (2.0 * eig.eigenvalues[k])
}

/// Negative controls: a flipped eigenvalue of `V`, masses with nonzero sum,
/// and a sector ray placed on a BPS ray.
pub fn negative_controls(md: &ModelData, plan: &SamplePlan) -> Vec<ControlOutcome> {
    let mut out = Vec::new();
    let pts = sample_points(md, Family::SemiFlat, &SamplePlan { base_points: 1, ..plan.clone() });
    let pt = match pts.first() {
        Some(SamplePoint::Base(p)) => p.clone(),
        _ => FieldPoint::new(md.domain.center.clone(), vec![0.5; md.r], vec![0.5; md.r], Complex64::new(1.0, 0.0)),
    };
    // flipped V eigenvalue
    match potential_connection(md, &pt, None) {
        Ok(mut pc) => {
            pc.v = flip_smallest_eigenvalue(&pc.v);
            let cv = certify_potential(&pc.v);
            let cg = metric_gh(md, &pc).map(|g| certify_metric(&g));
            let detected = !cv.passed && cg.as_ref().map(|c| !c.passed).unwrap_or(true);
            out.push(ControlOutcome {
                name: "flipped_v_eigenvalue",
                detected,
                detail: format!("min eig V {:.3e}", -cv.max_residual),
            });
        }
        Err(e) => out.push(ControlOutcome { name: "flipped_v_eigenvalue", detected: false, detail: format!("{e}") }),
    }
    // masses that do not sum to zero
    let masses: Vec<Complex64> = match &md.multi_ov {
        Some(ov) => {
            let mut m = ov.m.clone();
            m[0] += Complex64::new(0.1, 0.05);
            m
        }
        None => vec![Complex64::new(0.3, 0.0), Complex64::new(-0.2, 0.0)],
    };
    let ys = vec![0.0; masses.len()];
    let p = md.multi_ov.as_ref().map(|o| o.p).unwrap_or(1);
    let rejected = build_multi_ov(&masses, &ys, p);
    out.push(ControlOutcome {
        name: "mass_sum_nonzero",
        detected: rejected.is_err(),
        detail: match rejected {
            Err(e) => format!("{e}"),
            Ok(_) => String::from("accepted"),
        },
    });
    // a sector ray on a BPS ray
    let light = (0..md.n_lights()).find(|&l| md.lights[l].omega > 0);
    match light {
        Some(l) => {
            let dec = SectorDecomposition { k: plan.sectors.max(5), phi0: bps_ray_angle(md, l, 1, &pt.u) };
            let cert = certify_decomposition(md, &pt.u, &dec);
            let caught = matches!(
                xmodel(md, &Charge::magnetic(md.r, md.n_lights(), 0), &pt, &dec, Continuation::None),
                Err(GeomError::NotGood { .. })
            );
            out.push(ControlOutcome {
                name: "ray_collision",
                detected: !cert.passed && caught,
                detail: format!("margin {:.3e}", -cert.max_residual),
            });
        }
        None => out.push(ControlOutcome { name: "ray_collision", detected: false, detail: String::from("no lights") }),
    }
    out
}
