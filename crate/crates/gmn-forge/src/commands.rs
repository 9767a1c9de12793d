//! Subcommand implementations. Each returns a JSON report and an exit code;
//! files go to the output directory when one is given.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use gmn_core::lattice::{dual_divisors, frobenius_basis, SymplecticLattice};
use gmn_core::modeldata::{
    check_assumptions, default_shell, f_root_bisection, f_root_newton, region_f, AssumptionOptions, Chart,
    FieldPoint, ModelData,
};
use gmn_core::modelgeom::{potential_connection, TnChart};
use gmn_core::linalg::CMat;
use gmn_core::semiflat::{
    frame_labels, gh_decompose_sf, laurent_split, varpi_from_potential, varpi_sf, GeomError, PotentialConnection,
};
use gmn_core::verify::{
    assemble_rh, assemble_twistor, negative_controls, rh_point, sample_points, twistor_point, Certificate,
    CertificateBundle, Family, SamplePlan, SamplePoint, Tolerances,
};
use log::{debug, info};
use num_bigint::BigInt;
use num_complex::Complex64;
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::config::{load, parse_zeta_list, GridSpec, LatticeFile, Loaded, RunConfig};
use crate::error::{CliError, EXIT_FAIL, EXIT_INVALID, EXIT_PASS};
use crate::output::{big_json, complex_json, fmt_f64, write_csv, write_json};

/// Options shared by the model subcommands.
#[derive(Debug, Clone, Default)]
pub struct Common {
    /// Model or run-configuration file.
    pub model: PathBuf,
    /// Output directory.
    pub out: Option<PathBuf>,
    /// Twistor parameters, e.g. `0.5,1+2i`.
    pub zeta: Option<String>,
    /// Grid specification.
    pub grid: Option<String>,
    /// Tolerance override (closedness for `verify`).
    pub tol: Option<f64>,
    /// Sample seed.
    pub seed: Option<u64>,
    /// Worker threads.
    pub jobs: Option<usize>,
}

/// Which family `eval` and `verify` use.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FamilyChoice {
    /// Semi-flat only.
    SemiFlat,
    /// Model only.
    Model,
    /// Both.
    All,
}

/// Which 2-form `eval` reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FormChoice {
    /// `varpi(zeta)`; `zeta = 0` is rejected.
    Varpi,
    /// `omega_+`, independent of `zeta`.
    OmegaPlus,
}

/// Result of a subcommand.
#[derive(Debug, Clone)]
pub struct Outcome {
    /// Report printed on standard output.
    pub report: Value,
    /// CSV printed on standard output when no output directory is given.
    pub csv: Option<String>,
    /// Exit code.
    pub code: i32,
}

fn pool(jobs: Option<usize>) -> Result<rayon::ThreadPool, CliError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.unwrap_or(0))
        .build()
        .map_err(|e| CliError::Usage(format!("thread pool: {e}")))
}

fn zetas(common: &Common, cfg: &RunConfig) -> Result<Option<Vec<Complex64>>, CliError> {
    if let Some(s) = &common.zeta {
        return Ok(Some(parse_zeta_list(s)?));
    }
    Ok(cfg.zeta.as_ref().map(|v| v.iter().map(|p| Complex64::new(p[0], p[1])).collect()))
}

fn default_u2(md: &ModelData, cfg: &RunConfig) -> Vec<Complex64> {
    match (&cfg.u2, &md.multi_ov) {
        (Some(v), _) => v.iter().map(|p| Complex64::new(p[0], p[1])).collect(),
        (None, Some(ov)) => vec![ov.m[0]],
        (None, None) => md.domain.center.clone(),
    }
}

/// `frobenius FILE`: Frobenius basis, divisors and dual divisors.
pub fn cmd_frobenius(input: &Path, out: Option<&Path>) -> Result<Outcome, CliError> {
    let m = LatticeFile::load(input)?;
    let lat = SymplecticLattice::from_i64(&m)?;
    let b = frobenius_basis(&lat)?;
    let vecs = |v: &[Vec<BigInt>]| -> Value { Value::Array(v.iter().map(|x| Value::Array(x.iter().map(big_json).collect())).collect()) };
    let report = json!({
        "rank": lat.rank(),
        "divisors": b.p.iter().map(big_json).collect::<Vec<_>>(),
        "dual_divisors": dual_divisors(&b).iter().map(|q| Value::String(q.to_string())).collect::<Vec<_>>(),
        "e": vecs(&b.e),
        "m": vecs(&b.m),
        "valid": b.check(&lat),
    });
    if let Some(dir) = out {
        write_json(dir, "frobenius.json", &report)?;
    }
    Ok(Outcome { report, csv: None, code: EXIT_PASS })
}

/// `check-data`: standing assumptions and the positivity margin.
pub fn cmd_check_data(common: &Common) -> Result<Outcome, CliError> {
    let Loaded { model: md, config } = load(&common.model)?;
    let u2 = default_u2(&md, &config);
    let rep = check_assumptions(&md, &u2, &AssumptionOptions::default());
    let report = json!({
        "passed": rep.passed(),
        "checks": rep.checks.iter().map(|c| json!({"name": c.name, "passed": c.passed, "detail": c.detail})).collect::<Vec<_>>(),
        "u2": u2.iter().map(|z| complex_json(*z)).collect::<Vec<_>>(),
        "vanishing_lights": rep.vanishing,
        "grid_points": rep.grid_points,
        "shell": [rep.shell.0, rep.shell.1],
        "a6_margin": rep.a6_margin,
    });
    if let Some(dir) = &common.out {
        write_json(dir, "check_data.json", &report)?;
    }
    let code = match rep.first_failure() {
        None => EXIT_PASS,
        Some(f) => {
            log::error!("assumption {} failed: {}", f.name, f.detail);
            EXIT_INVALID
        }
    };
    Ok(Outcome { report, csv: None, code })
}

fn eval_header(md: &ModelData) -> Vec<String> {
    let r = md.r;
    let frame = frame_labels(Chart::Unprimed, r);
    let mut h = vec![String::from("index")];
    for i in 1..=r {
        h.push(format!("re_u{i}"));
        h.push(format!("im_u{i}"));
    }
    h.extend((1..=r).map(|i| format!("theta_e{i}")));
    h.extend((1..=r).map(|i| format!("theta_m{i}")));
    h.extend([String::from("re_zeta"), String::from("im_zeta"), String::from("status")]);
    for i in 1..=r {
        for j in 1..=r {
            h.push(format!("V{i}{j}"));
        }
    }
    for i in 1..=r {
        for f in &frame {
            h.push(format!("A{i}_{f}"));
        }
    }
    for a in 0..4 * r {
        for b in a + 1..4 * r {
            h.push(format!("re_W_{}_{}", frame[a], frame[b]));
            h.push(format!("im_W_{}_{}", frame[a], frame[b]));
        }
    }
    h
}

fn eval_values(
    md: &ModelData,
    family: Family,
    form: FormChoice,
    pt: &FieldPoint,
) -> Result<Vec<String>, CliError> {
    let r = md.r;
    let pc: PotentialConnection = match family {
        Family::SemiFlat => gh_decompose_sf(md, &pt.u)?,
        Family::Model => potential_connection(md, pt, None)?,
    };
    let w = match form {
        FormChoice::Varpi => varpi_from_potential(md, &pc, pt.zeta),
        FormChoice::OmegaPlus => {
            let f = |z: Complex64| -> Result<CMat, GeomError> {
                match family {
                    Family::SemiFlat => Ok(varpi_sf(md, &pt.with_zeta(z))?.coeffs),
                    Family::Model => Ok(varpi_from_potential(md, &pc, z)),
                }
            };
            laurent_split(f)?.omega_plus()
        }
    };
    let mut out = Vec::new();
    for i in 0..r {
        for j in 0..r {
            out.push(fmt_f64(pc.v[(i, j)]));
        }
    }
    for ai in &pc.a {
        out.extend(ai.iter().map(|&x| fmt_f64(x)));
    }
    for a in 0..4 * r {
        for b in a + 1..4 * r {
            out.push(fmt_f64(w[(a, b)].re));
            out.push(fmt_f64(w[(a, b)].im));
        }
    }
    Ok(out)
}

fn default_grid(md: &ModelData) -> GridSpec {
    match &md.multi_ov {
        Some(_) => {
            let (a, b) = default_shell(md);
            GridSpec::Polar { r: (a, b, 4), a: (0.1, 0.1 + 2.0 * PI, 8) }
        }
        None => {
            let (c, rad) = (md.domain.center[0], 0.8 * md.domain.radii[0]);
            GridSpec::Rect { x: (c.re - rad, c.re + rad, 5), y: (c.im - rad, c.im + rad, 5) }
        }
    }
}

/// `eval`: `V`, `A` and 2-form components on a grid, as CSV.
pub fn cmd_eval(common: &Common, family: Family, form: FormChoice) -> Result<Outcome, CliError> {
    let Loaded { model: md, config } = load(&common.model)?;
    let r = md.r;
    let zs = zetas(common, &config)?.unwrap_or_else(|| vec![Complex64::new(1.0, 0.0)]);
    if zs.is_empty() {
        return Err(CliError::Usage(String::from("empty zeta list")));
    }
    if form == FormChoice::Varpi && zs.iter().any(|z| z.norm() == 0.0) {
        return Err(CliError::Usage(String::from("zeta = 0 is outside the domain of varpi(zeta); use --form omega-plus")));
    }
    let grid = match common.grid.as_ref().or(config.grid.as_ref()) {
        Some(s) => GridSpec::parse(s)?,
        None => default_grid(&md),
    };
    let te = config.theta_e.clone().unwrap_or_else(|| vec![1.0; r]);
    let tm = config.theta_m.clone().unwrap_or_else(|| vec![0.5; r]);
    if te.len() != r || tm.len() != r {
        return Err(CliError::Schema(format!("theta_e and theta_m need {r} entries")));
    }
    let mut jobs_list = Vec::new();
    for u1 in grid.points() {
        let mut u = md.domain.center.clone();
        u[0] = u1;
        for &z in &zs {
            jobs_list.push(FieldPoint::new(u.clone(), te.clone(), tm.clone(), z));
        }
    }
    info!("eval: {} rows", jobs_list.len());
    let header = eval_header(&md);
    let width = header.len();
    let rows: Vec<Vec<String>> = pool(common.jobs)?.install(|| {
        jobs_list
            .par_iter()
            .enumerate()
            .map(|(k, pt)| {
                let mut row = vec![k.to_string()];
                for x in &pt.u {
                    row.push(fmt_f64(x.re));
                    row.push(fmt_f64(x.im));
                }
                row.extend(pt.theta_e.iter().map(|&x| fmt_f64(x)));
                row.extend(pt.theta_m.iter().map(|&x| fmt_f64(x)));
                row.push(fmt_f64(pt.zeta.re));
                row.push(fmt_f64(pt.zeta.im));
                match eval_values(&md, family, form, pt) {
                    Ok(v) => {
                        row.push(String::from("ok"));
                        row.extend(v);
                    }
                    Err(e) => {
                        row.push(e.to_string());
                        row.resize(width, String::new());
                    }
                }
                row
            })
            .collect()
    });
    let failed = rows.iter().filter(|r| r[header.iter().position(|h| h == "status").unwrap_or(0)] != "ok").count();
    let csv = crate::output::csv_string(&header, &rows)?;
    let report = json!({"rows": rows.len(), "failed_rows": failed, "columns": header.len()});
    let csv = match &common.out {
        Some(dir) => {
            write_csv(dir, "eval.csv", &csv)?;
            None
        }
        None => Some(csv),
    };
    Ok(Outcome { report, csv, code: EXIT_PASS })
}

fn tolerances(common: &Common, cfg: &RunConfig) -> Tolerances {
    let mut t = Tolerances::default();
    let s = &cfg.tolerances;
    let set = |dst: &mut f64, v: Option<f64>| {
        if let Some(x) = v {
            *dst = x;
        }
    };
    set(&mut t.closedness, s.closedness);
    set(&mut t.rank, s.rank);
    set(&mut t.kernel, s.kernel);
    set(&mut t.reality, s.reality);
    set(&mut t.routes, s.routes);
    set(&mut t.holomorphy, s.holomorphy);
    set(&mut t.jump, s.jump);
    set(&mut t.character_reality, s.character_reality);
    set(&mut t.limit, s.limit);
    set(&mut t.closedness, common.tol);
    t
}

/// Builds the sample plan of a run.
pub fn plan_for(common: &Common, cfg: &RunConfig) -> Result<SamplePlan, CliError> {
    let mut plan = SamplePlan { tol: tolerances(common, cfg), ..SamplePlan::default() };
    plan.seed = common.seed.or(cfg.seed).unwrap_or(0);
    if let Some(n) = cfg.points {
        plan.base_points = n;
    }
    if let Some(n) = cfg.tn_points {
        plan.tn_points = n;
    }
    if let Some(z) = zetas(common, cfg)? {
        if z.is_empty() || z.iter().any(|x| x.norm() == 0.0) {
            return Err(CliError::Usage(String::from("verify needs nonzero zeta values")));
        }
        plan.zetas = z;
    }
    Ok(plan)
}

fn prefixed(bundle: CertificateBundle, prefix: &str) -> Vec<Certificate> {
    bundle
        .certificates
        .into_iter()
        .map(|mut c| {
            c.name = format!("{prefix}.{}", c.name);
            c
        })
        .collect()
}

/// Runs the certificate suite for one family in parallel.
pub fn run_family(md: &ModelData, family: Family, plan: &SamplePlan, pool: &rayon::ThreadPool) -> CertificateBundle {
    let pts = sample_points(md, family, plan);
    debug!("{family:?}: {} sample points", pts.len());
    let tw: Vec<_> = pool.install(|| pts.par_iter().map(|p| twistor_point(md, family, p, plan)).collect());
    let mut bundle = assemble_twistor(&tw, plan);
    if family == Family::Model {
        let rh: Vec<_> = pool.install(|| {
            pts.par_iter()
                .enumerate()
                .filter_map(|(i, p)| match p {
                    SamplePoint::Base(q) => Some(rh_point(md, q, plan, i)),
                    SamplePoint::TaubNut { .. } => None,
                })
                .collect()
        });
        bundle = bundle.merge(assemble_rh(&rh, plan));
    }
    bundle
}

fn certificate_json(c: &Certificate) -> Value {
    json!({
        "name": c.name,
        "passed": c.passed,
        "points": c.points,
        "max_residual": c.max_residual,
        "mean_residual": c.mean_residual,
        "tol": c.tol,
        "step": c.step,
    })
}

/// `verify`: certificate bundle and negative controls; exit 0 iff all pass.
pub fn cmd_verify(common: &Common, choice: FamilyChoice) -> Result<Outcome, CliError> {
    let Loaded { model: md, config } = load(&common.model)?;
    let plan = plan_for(common, &config)?;
    let pool = pool(common.jobs)?;
    let families: &[(Family, &str)] = match choice {
        FamilyChoice::SemiFlat => &[(Family::SemiFlat, "semi_flat")],
        FamilyChoice::Model => &[(Family::Model, "model")],
        FamilyChoice::All => &[(Family::SemiFlat, "semi_flat"), (Family::Model, "model")],
    };
    let mut certs = Vec::new();
    for &(f, name) in families {
        info!("certifying the {name} family");
        certs.extend(prefixed(run_family(&md, f, &plan, &pool), name));
    }
    for c in negative_controls(&md, &plan) {
        let residual = if c.detected { 0.0 } else { 1.0 };
        let mut cert = Certificate::from_residuals(&format!("control.{}", c.name), &[residual], 0.5, None);
        cert.mean_residual = residual;
        info!("control {}: {}", c.name, c.detail);
        certs.push(cert);
    }
    let bundle = CertificateBundle::new(certs);
    let passed = bundle.passed();
    let report = json!({
        "passed": passed,
        "seed": plan.seed,
        "base_points": plan.base_points,
        "tn_points": plan.tn_points,
        "h": plan.h,
        "zeta": plan.zetas.iter().map(|z| complex_json(*z)).collect::<Vec<_>>(),
        "certificates": bundle.certificates.iter().map(certificate_json).collect::<Vec<_>>(),
    });
    if let Some(dir) = &common.out {
        write_json(dir, "certificates.json", &report)?;
    }
    Ok(Outcome { report, csv: None, code: if passed { EXIT_PASS } else { EXIT_FAIL } })
}

fn margin_on(md: &ModelData, u2: &[Complex64], shell: (f64, f64)) -> f64 {
    let opts = AssumptionOptions { shell: Some(shell), grid: 8, ..AssumptionOptions::default() };
    check_assumptions(md, u2, &opts).a6_margin
}

/// `region`: the root `r0`, the positivity annulus and its margins.
pub fn cmd_region(common: &Common) -> Result<Outcome, CliError> {
    let Loaded { model: md, config } = load(&common.model)?;
    let bis = f_root_bisection(1e-14);
    let newton = f_root_newton(0.42, 1e-16);
    let u2 = default_u2(&md, &config);
    let shell = default_shell(&md);
    let shell_margin = margin_on(&md, &u2, shell);
    let mut report = json!({
        "r0": newton,
        "r0_bisection": bis,
        "r0_newton": newton,
        "root_gap": (bis - newton).abs(),
        "shell": [shell.0, shell.1],
        "shell_margin": shell_margin,
        "positive": shell_margin > 0.0,
    });
    if let Some(ov) = &md.multi_ov {
        let mmax = ov.m.iter().fold(0.0f64, |a, x| a.max(x.norm()));
        let inner = mmax + newton;
        report["max_abs_m"] = json!(mmax);
        report["annulus"] = json!([inner, PI]);
        if mmax < PI / 2.0 {
            report["half_pi_annulus"] = json!([PI - 1.0, PI]);
        }
    }
    if let Some(dir) = &common.out {
        write_json(dir, "region.json", &report)?;
    }
    let code = if shell_margin > 0.0 { EXIT_PASS } else { EXIT_FAIL };
    Ok(Outcome { report, csv: None, code })
}

/// `export`: plot-ready data files in the output directory.
pub fn cmd_export(common: &Common) -> Result<Outcome, CliError> {
    let dir = common.out.clone().ok_or_else(|| CliError::Usage(String::from("export needs --out DIR")))?;
    let Loaded { model: md, config } = load(&common.model)?;
    let plan = plan_for(common, &config)?;
    let mut files = Vec::new();

    let n = 400;
    let rows: Vec<Vec<String>> = (1..=n)
        .map(|k| {
            let x = PI * k as f64 / (n + 1) as f64;
            vec![fmt_f64(x), fmt_f64(region_f(x))]
        })
        .collect();
    write_csv(&dir, "f_curve.csv", &crate::output::csv_string(&[String::from("r"), String::from("f")], &rows)?)?;
    files.push("f_curve.csv");

    let pts = sample_points(&md, Family::SemiFlat, &SamplePlan { base_points: 1, ..plan.clone() });
    if let Some(SamplePoint::Base(p)) = pts.first() {
        let p = p.with_zeta(plan.zetas[0]);
        let sf = varpi_sf(&md, &p)?;
        let pc = potential_connection(&md, &p, None)?;
        let model = varpi_from_potential(&md, &pc, p.zeta);
        let mat = |w: &CMat| -> Value {
            Value::Array((0..w.nrows()).map(|i| Value::Array((0..w.ncols()).map(|j| complex_json(w[(i, j)])).collect())).collect())
        };
        let doc = json!({
            "u": p.u.iter().map(|z| complex_json(*z)).collect::<Vec<_>>(),
            "theta_e": p.theta_e,
            "theta_m": p.theta_m,
            "zeta": complex_json(p.zeta),
            "frame": sf.frame(),
            "semi_flat": mat(&sf.coeffs),
            "model": mat(&model),
        });
        write_json(&dir, "twoform.json", &doc)?;
        files.push("twoform.json");
    }

    if let Some(chart) = (0..md.n_lights()).find_map(|l| TnChart::new(&md, l).ok()) {
        let radii: Vec<f64> = (0..=20).map(|k| 10f64.powf(-0.5 - 0.125 * k as f64)).collect();
        let prof = chart.difference_profile(&md, 0.7, &radii, plan.zetas[0])?;
        let rows: Vec<Vec<String>> = prof.iter().map(|&(q, d)| vec![fmt_f64(q), fmt_f64(d)]).collect();
        write_csv(&dir, "tn_profile.csv", &crate::output::csv_string(&[String::from("q"), String::from("max_diff")], &rows)?)?;
        files.push("tn_profile.csv");
    }
    Ok(Outcome { report: json!({"files": files}), csv: None, code: EXIT_PASS })
}
