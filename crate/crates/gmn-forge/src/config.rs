//! Input schemas: model files, run configurations and lattice files.

use std::path::{Path, PathBuf};

use gmn_core::linalg::CMat;
use gmn_core::modeldata::{build_multi_ov, Domain, LightCharge, ModelData, TauTilde};
use num_complex::Complex64;
use serde::de::DeserializeOwned;
use serde::Deserialize;

use crate::error::CliError;

/// A complex number written as `[re, im]`.
pub type CPair = [f64; 2];

fn cx(p: &CPair) -> Complex64 {
    Complex64::new(p[0], p[1])
}

fn one() -> i64 {
    1
}

fn default_omega() -> u32 {
    1
}

/// Model description.
#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    /// Multi-Ooguri-Vafa model from its singular points.
    MultiOv {
        /// Singular points `m_j`, summing to zero.
        m: Vec<CPair>,
        /// Flavor steps, summing to an integer.
        y: Vec<f64>,
        /// Pairing `<gamma_m, gamma_e>`.
        #[serde(default = "one")]
        p: i64,
    },
    /// General local data.
    General {
        /// Half rank.
        r: usize,
        /// Elementary divisors.
        p: Vec<i64>,
        /// Lights, one per `+-` pair.
        lights: Vec<LightSpec>,
        /// Holomorphic background.
        tau_tilde: TauSpec,
        /// Base polydisk.
        domain: DomainSpec,
        /// Offsets of the magnetic central charges.
        #[serde(default)]
        z_tilde_m: Option<Vec<CPair>>,
    },
}

/// One light pair.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LightSpec {
    /// Pairings `c_i` with the magnetic basis.
    pub c: Vec<i64>,
    /// Constant part of the central charge.
    pub z0: CPair,
    /// Flavor angle in `[0, 2 pi)`.
    pub theta0: f64,
    /// BPS index.
    #[serde(default = "default_omega")]
    pub omega: u32,
}

/// Background `tau~ = C + L a + (1/2) Q a a` as row-major tensors.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TauSpec {
    /// `r x r` rows.
    pub constant: Vec<Vec<CPair>>,
    /// Flattened `r^3` tensor (zero when absent).
    #[serde(default)]
    pub linear: Option<Vec<CPair>>,
    /// Flattened `r^4` tensor (zero when absent).
    #[serde(default)]
    pub quadratic: Option<Vec<CPair>>,
}

/// Polydisk.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSpec {
    /// Center.
    pub center: Vec<CPair>,
    /// Radii.
    pub radii: Vec<f64>,
}

/// Tolerance overrides.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToleranceSpec {
    /// Closedness.
    pub closedness: Option<f64>,
    /// Rank.
    pub rank: Option<f64>,
    /// Kernel transversality.
    pub kernel: Option<f64>,
    /// Reality of the 2-forms.
    pub reality: Option<f64>,
    /// Route agreement.
    pub routes: Option<f64>,
    /// Holomorphy of the characters.
    pub holomorphy: Option<f64>,
    /// Jump relation.
    pub jump: Option<f64>,
    /// Reality of the characters.
    pub character_reality: Option<f64>,
    /// `zeta -> 0` limit.
    pub limit: Option<f64>,
}

/// Model source inside a run configuration.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum ModelSource {
    /// Path to a model file, relative to the configuration.
    File(PathBuf),
    /// Inline model.
    Inline(ModelSpec),
}

/// Run configuration; command-line flags take precedence.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// The model.
    pub model: ModelSource,
    /// Sample seed.
    #[serde(default)]
    pub seed: Option<u64>,
    /// Twistor parameters.
    #[serde(default)]
    pub zeta: Option<Vec<CPair>>,
    /// Grid specification.
    #[serde(default)]
    pub grid: Option<String>,
    /// Fiber angles `theta_e` for grid evaluation.
    #[serde(default)]
    pub theta_e: Option<Vec<f64>>,
    /// Fiber angles `theta_m` for grid evaluation.
    #[serde(default)]
    pub theta_m: Option<Vec<f64>>,
    /// Base point `u''` for the assumption checks.
    #[serde(default)]
    pub u2: Option<Vec<CPair>>,
    /// Ordinary-chart sample points for certificates.
    #[serde(default)]
    pub points: Option<usize>,
    /// Taub-NUT sample points for certificates.
    #[serde(default)]
    pub tn_points: Option<usize>,
    /// Tolerance overrides.
    #[serde(default)]
    pub tolerances: ToleranceSpec,
}

/// A loaded model together with its run options.
#[derive(Debug, Clone)]
pub struct Loaded {
    /// Validated model data.
    pub model: ModelData,
    /// Options.
    pub config: RunConfig,
}

fn line_context(text: &str, line: usize, column: usize) -> String {
    if line == 0 {
        return String::from("      | (no position available)");
    }
    let src = text.lines().nth(line.saturating_sub(1)).unwrap_or("");
    let caret = " ".repeat(column.saturating_sub(1));
    format!("{line:>5} | {src}\n      | {caret}^")
}

/// Parses JSON into `T`, reporting the offending line on failure.
pub fn parse_json<T: DeserializeOwned>(text: &str, path: &Path) -> Result<T, CliError> {
    serde_json::from_str(text).map_err(|e| CliError::Parse {
        path: path.display().to_string(),
        message: e.to_string(),
        context: line_context(text, e.line(), e.column()),
    })
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Io { path: path.display().to_string(), message: e.to_string() })
}

impl ModelSpec {
    /// Builds validated model data.
    pub fn build(&self) -> Result<ModelData, CliError> {
        match self {
            ModelSpec::MultiOv { m, y, p } => {
                let m: Vec<Complex64> = m.iter().map(cx).collect();
                Ok(build_multi_ov(&m, y, *p)?)
            }
            ModelSpec::General { r, p, lights, tau_tilde, domain, z_tilde_m } => {
                let r = *r;
                if tau_tilde.constant.len() != r || tau_tilde.constant.iter().any(|row| row.len() != r) {
                    return Err(CliError::Schema(format!("tau_tilde.constant must be {r} x {r}")));
                }
                let c0: Vec<Complex64> = tau_tilde.constant.iter().flatten().map(cx).collect();
                let lin = match &tau_tilde.linear {
                    Some(v) => v.iter().map(cx).collect(),
                    None => vec![Complex64::new(0.0, 0.0); r * r * r],
                };
                let quad = match &tau_tilde.quadratic {
                    Some(v) => v.iter().map(cx).collect(),
                    None => vec![Complex64::new(0.0, 0.0); r * r * r * r],
                };
                let tt = if tau_tilde.linear.is_none() && tau_tilde.quadratic.is_none() {
                    TauTilde::constant(&CMat::from_row_slice(r, r, &c0))
                } else {
                    TauTilde::from_parts(r, c0, lin, quad)?
                };
                let lights = lights.iter().map(|l| LightCharge::new(l.c.clone(), cx(&l.z0), l.theta0, l.omega)).collect();
                let domain = Domain { center: domain.center.iter().map(cx).collect(), radii: domain.radii.clone() };
                let mut md = ModelData::new(r, p.clone(), lights, tt, domain)?;
                if let Some(z) = z_tilde_m {
                    md.z_tilde_m = z.iter().map(cx).collect();
                    md.validate()?;
                }
                Ok(md)
            }
        }
    }
}

/// Loads a model file or a run configuration. A top-level `kind` key marks
/// a bare model; otherwise the file is a run configuration whose `model` is
/// inline or a path relative to the file.
pub fn load(path: &Path) -> Result<Loaded, CliError> {
    let text = read(path)?;
    let value: serde_json::Value = parse_json(&text, path)?;
    let config: RunConfig = if value.get("kind").is_some() {
        let spec: ModelSpec = parse_json(&text, path)?;
        RunConfig {
            model: ModelSource::Inline(spec),
            seed: None,
            zeta: None,
            grid: None,
            theta_e: None,
            theta_m: None,
            u2: None,
            points: None,
            tn_points: None,
            tolerances: ToleranceSpec::default(),
        }
    } else {
        parse_json(&text, path)?
    };
    let spec = match &config.model {
        ModelSource::Inline(s) => s.clone(),
        ModelSource::File(p) => {
            let full = path.parent().map(|d| d.join(p)).unwrap_or_else(|| p.clone());
            let t = read(&full)?;
            parse_json(&t, &full)?
        }
    };
    let model = spec.build()?;
    Ok(Loaded { model, config })
}

/// Lattice file: a bare antisymmetric matrix or `{"pairing": ...}`.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum LatticeFile {
    /// Bare matrix.
    Matrix(Vec<Vec<i64>>),
    /// Object form.
    Object {
        /// The pairing matrix.
        pairing: Vec<Vec<i64>>,
    },
}

impl LatticeFile {
    /// Loads a lattice file.
    pub fn load(path: &Path) -> Result<Vec<Vec<i64>>, CliError> {
        let text = read(path)?;
        let _: serde_json::Value = parse_json(&text, path)?;
        let f: LatticeFile = parse_json(&text, path).map_err(|e| match e {
            CliError::Parse { path, context, .. } => CliError::Parse {
                path,
                message: String::from("expected an integer matrix or {\"pairing\": [[...]]}"),
                context,
            },
            other => other,
        })?;
        Ok(match f {
            LatticeFile::Matrix(m) | LatticeFile::Object { pairing: m } => m,
        })
    }
}

/// Parses `re+imi`-style or `re,im`-free lists: `"0.5,1+2i,-0.3i"`.
pub fn parse_zeta_list(s: &str) -> Result<Vec<Complex64>, CliError> {
    s.split(',').filter(|t| !t.trim().is_empty()).map(|t| parse_complex(t.trim())).collect()
}

/// Parses `a`, `bi`, `a+bi` or `a-bi`.
pub fn parse_complex(t: &str) -> Result<Complex64, CliError> {
    let bad = || CliError::Usage(format!("cannot parse complex number '{t}'"));
    let s: String = t.chars().filter(|c| !c.is_whitespace()).collect();
    if let Some(body) = s.strip_suffix('i') {
        let split = body
            .char_indices()
            .skip(1)
            .filter(|&(k, c)| (c == '+' || c == '-') && !matches!(body.as_bytes()[k - 1], b'e' | b'E'))
            .map(|(k, _)| k)
            .last();
        let (re, im) = match split {
            Some(k) => (&body[..k], &body[k..]),
            None => ("0", body),
        };
        let im = match im {
            "" | "+" => "1",
            "-" => "-1",
            x => x,
        };
        let re: f64 = re.parse().map_err(|_| bad())?;
        let im: f64 = im.trim_start_matches('+').parse().map_err(|_| bad())?;
        Ok(Complex64::new(re, im))
    } else {
        Ok(Complex64::new(s.parse().map_err(|_| bad())?, 0.0))
    }
}

/// A grid over the first base coordinate; the others sit at the domain
/// center.
#[derive(Debug, Clone, PartialEq)]
pub enum GridSpec {
    /// `rect:X0:X1:NX,Y0:Y1:NY`.
    Rect {
        /// Real-part range and count.
        x: (f64, f64, usize),
        /// Imaginary-part range and count.
        y: (f64, f64, usize),
    },
    /// `polar:R0:R1:NR,A0:A1:NA` (angles in radians; the angular end point is
    /// excluded).
    Polar {
        /// Radial range and count.
        r: (f64, f64, usize),
        /// Angular range and count.
        a: (f64, f64, usize),
    },
}

fn linspace(lo: f64, hi: f64, n: usize, closed: bool) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![lo],
        _ => {
            let d = if closed { (n - 1) as f64 } else { n as f64 };
            (0..n).map(|k| lo + (hi - lo) * k as f64 / d).collect()
        }
    }
}

impl GridSpec {
    /// Parses a grid specification.
    pub fn parse(s: &str) -> Result<Self, CliError> {
        let bad = || CliError::Usage(format!("bad grid '{s}': expected rect:X0:X1:NX,Y0:Y1:NY or polar:R0:R1:NR,A0:A1:NA"));
        let (kind, rest) = s.split_once(':').ok_or_else(bad)?;
        let axes: Vec<(f64, f64, usize)> = rest
            .split(',')
            .map(|ax| {
                let p: Vec<&str> = ax.split(':').collect();
                if p.len() != 3 {
                    return Err(bad());
                }
                let lo: f64 = p[0].parse().map_err(|_| bad())?;
                let hi: f64 = p[1].parse().map_err(|_| bad())?;
                let n: usize = p[2].parse().map_err(|_| bad())?;
                if n == 0 || !lo.is_finite() || !hi.is_finite() {
                    return Err(bad());
                }
                Ok((lo, hi, n))
            })
            .collect::<Result<_, _>>()?;
        if axes.len() != 2 {
            return Err(bad());
        }
        match kind {
            "rect" => Ok(GridSpec::Rect { x: axes[0], y: axes[1] }),
            "polar" => Ok(GridSpec::Polar { r: axes[0], a: axes[1] }),
            _ => Err(bad()),
        }
    }

    /// Grid values of the first base coordinate, row-major.
    pub fn points(&self) -> Vec<Complex64> {
        match self {
            GridSpec::Rect { x, y } => {
                let xs = linspace(x.0, x.1, x.2, true);
                let ys = linspace(y.0, y.1, y.2, true);
                xs.iter().flat_map(|&a| ys.iter().map(move |&b| Complex64::new(a, b))).collect()
            }
            GridSpec::Polar { r, a } => {
                let rs = linspace(r.0, r.1, r.2, true);
                let as_ = linspace(a.0, a.1, a.2, false);
                rs.iter().flat_map(|&x| as_.iter().map(move |&t| Complex64::from_polar(x, t))).collect()
            }
        }
    }
}
