//! Run configuration in a flat `section.key = value` format.
//!
//! Lines are UTF-8; `#` starts a comment; blank lines are ignored. Lists are
//! comma-separated. Every key is optional and unknown keys are rejected. See
//! `FORMATS.md` in the repository root for the key reference.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::auxiliary::{SpatialProfile, TestFunction, TimeEnvelope};
use crate::density::InitialProfile;
use crate::error::{Error, Result};
use crate::kinetic_fv::{DetConfig, Scheme, VmaxPolicy};
use crate::model::{Model, ModelParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VmaxKind {
    Critical,
    Domain,
    Fixed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Discretization {
    pub nx: usize,
    pub nv: usize,
    pub vmax_policy: VmaxKind,
    /// Tail loss allowed by the `critical` and `domain` policies.
    pub tail_tol: f64,
    /// Cut-off used by the `fixed` policy.
    pub vmax: f64,
    pub scheme: Scheme,
    /// Courant number of the kinetic transport step.
    pub cfl: f64,
    /// Periodic images summed on each side by the nonlocal assembly.
    pub images: usize,
    pub macro_dt: f64,
    /// Bins of the Monte Carlo cross-check histogram.
    pub mc_bins: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhiKind {
    Gaussian,
    PlaneWave,
    Constant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Experiment {
    pub eps_list: Vec<f64>,
    pub t_final: f64,
    pub snapshot_times: Vec<f64>,
    pub particles: usize,
    pub seed: u64,
    pub initial: InitialProfile,
    pub phi: PhiKind,
    pub phi_center: f64,
    pub phi_width: f64,
    pub phi_xi: f64,
    pub phi_t_end: f64,
    /// Points `x` at which the operator limit is sampled.
    pub sample_points: Vec<f64>,
    /// ε of the Monte Carlo cross-check.
    pub mc_eps: f64,
    pub coercivity_samples: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Json,
    Csv,
    Gnuplot,
    Binary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Output {
    pub dir: String,
    pub formats: Vec<Format>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub model: ModelParams,
    pub discretization: Discretization,
    pub experiment: Experiment,
    pub output: Output,
}

impl Default for RunConfig {
    fn default() -> Self {
        let det = DetConfig::default();
        RunConfig {
            model: ModelParams::default(),
            discretization: Discretization {
                nx: det.nx,
                nv: det.nv,
                vmax_policy: VmaxKind::Domain,
                tail_tol: 1e-3,
                vmax: 40.0,
                scheme: det.scheme,
                cfl: det.cfl,
                images: 8,
                macro_dt: 1e-3,
                mc_bins: 32,
            },
            experiment: Experiment {
                eps_list: vec![0.4, 0.2, 0.1, 0.05],
                t_final: 0.5,
                snapshot_times: vec![0.1, 0.25],
                particles: 0,
                seed: 1,
                initial: InitialProfile::Gaussian {
                    center: 10.0,
                    width: 1.0,
                },
                phi: PhiKind::Gaussian,
                phi_center: 10.0,
                phi_width: 1.0,
                phi_xi: 2.0,
                phi_t_end: 0.5,
                sample_points: vec![10.0, 10.5, 9.4, 12.5, 7.0],
                mc_eps: 0.2,
                coercivity_samples: 1000,
            },
            output: Output {
                dir: "out".into(),
                formats: vec![Format::Json, Format::Csv],
            },
        }
    }
}

fn parse_f64(key: &str, v: &str, line: usize) -> Result<f64> {
    let x: f64 = v.parse().map_err(|_| Error::Parse {
        line,
        msg: format!("{key}: expected a number, found {v:?}"),
    })?;
    if !x.is_finite() {
        return Err(Error::Parse {
            line,
            msg: format!("{key}: non-finite value {v:?}"),
        });
    }
    Ok(x)
}

fn parse_int<T: std::str::FromStr>(key: &str, v: &str, line: usize) -> Result<T> {
    v.parse().map_err(|_| Error::Parse {
        line,
        msg: format!("{key}: expected a non-negative integer, found {v:?}"),
    })
}

fn parse_list(key: &str, v: &str, line: usize) -> Result<Vec<f64>> {
    if v.trim().is_empty() {
        return Ok(Vec::new());
    }
    v.split(',').map(|s| parse_f64(key, s.trim(), line)).collect()
}

fn parse_word<'a>(key: &str, v: &'a str, line: usize, allowed: &[&str]) -> Result<&'a str> {
    if allowed.contains(&v) {
        Ok(v)
    } else {
        Err(Error::Parse {
            line,
            msg: format!("{key}: expected one of {allowed:?}, found {v:?}"),
        })
    }
}

fn join(xs: &[f64]) -> String {
    xs.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(", ")
}

impl RunConfig {
    /// Parses and validates a configuration text.
    pub fn parse(text: &str) -> Result<RunConfig> {
        let mut cfg = RunConfig::default();
        let mut seen: BTreeMap<String, usize> = BTreeMap::new();
        // initial-profile keys are collected and combined at the end
        let mut initial_kind: Option<String> = None;
        let (mut init_center, mut init_width) = match cfg.experiment.initial {
            InitialProfile::Gaussian { center, width } => (center, width),
            InitialProfile::Uniform => (10.0, 1.0),
        };
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content.split_once('=').ok_or_else(|| Error::Parse {
                line,
                msg: format!("expected `section.key = value`, found {content:?}"),
            })?;
            let (key, value) = (key.trim(), value.trim());
            if let Some(prev) = seen.insert(key.to_string(), line) {
                return Err(Error::Parse {
                    line,
                    msg: format!("duplicate key {key} (first set on line {prev})"),
                });
            }
            let m = &mut cfg.model;
            let d = &mut cfg.discretization;
            let e = &mut cfg.experiment;
            let f = |v: &str| parse_f64(key, v, line);
            match key {
                "model.alpha" => m.alpha = f(value)?,
                "model.beta" => m.beta = f(value)?,
                "model.kappa" => m.kappa = f(value)?,
                "model.core_asym" => m.core_asym = f(value)?,
                "model.nu0_mean" => m.nu0_mean = f(value)?,
                "model.nu0_delta" => m.nu0_delta = f(value)?,
                "model.domain_length" => m.domain_length = f(value)?,
                "discretization.nx" => d.nx = parse_int(key, value, line)?,
                "discretization.nv" => d.nv = parse_int(key, value, line)?,
                "discretization.vmax_policy" => {
                    d.vmax_policy =
                        match parse_word(key, value, line, &["critical", "domain", "fixed"])? {
                            "critical" => VmaxKind::Critical,
                            "domain" => VmaxKind::Domain,
                            _ => VmaxKind::Fixed,
                        }
                }
                "discretization.tail_tol" => d.tail_tol = f(value)?,
                "discretization.vmax" => d.vmax = f(value)?,
                "discretization.scheme" => {
                    d.scheme = match parse_word(key, value, line, &["upwind", "muscl"])? {
                        "upwind" => Scheme::Upwind,
                        _ => Scheme::Muscl,
                    }
                }
                "discretization.cfl" => d.cfl = f(value)?,
                "discretization.images" => d.images = parse_int(key, value, line)?,
                "discretization.macro_dt" => d.macro_dt = f(value)?,
                "discretization.mc_bins" => d.mc_bins = parse_int(key, value, line)?,
                "experiment.eps_list" => e.eps_list = parse_list(key, value, line)?,
                "experiment.t_final" => e.t_final = f(value)?,
                "experiment.snapshot_times" => e.snapshot_times = parse_list(key, value, line)?,
                "experiment.particles" => e.particles = parse_int(key, value, line)?,
                "experiment.seed" => e.seed = parse_int(key, value, line)?,
                "experiment.initial" => {
                    initial_kind =
                        Some(parse_word(key, value, line, &["gaussian", "uniform"])?.to_string())
                }
                "experiment.initial_center" => init_center = f(value)?,
                "experiment.initial_width" => init_width = f(value)?,
                "experiment.phi" => {
                    e.phi =
                        match parse_word(key, value, line, &["gaussian", "plane_wave", "constant"])? {
                            "gaussian" => PhiKind::Gaussian,
                            "plane_wave" => PhiKind::PlaneWave,
                            _ => PhiKind::Constant,
                        }
                }
                "experiment.phi_center" => e.phi_center = f(value)?,
                "experiment.phi_width" => e.phi_width = f(value)?,
                "experiment.phi_xi" => e.phi_xi = f(value)?,
                "experiment.phi_t_end" => e.phi_t_end = f(value)?,
                "experiment.sample_points" => e.sample_points = parse_list(key, value, line)?,
                "experiment.mc_eps" => e.mc_eps = f(value)?,
                "experiment.coercivity_samples" => {
                    e.coercivity_samples = parse_int(key, value, line)?
                }
                "output.dir" => {
                    if value.is_empty() {
                        return Err(Error::Parse {
                            line,
                            msg: "output.dir must not be empty".into(),
                        });
                    }
                    cfg.output.dir = value.to_string()
                }
                "output.formats" => {
                    cfg.output.formats = value
                        .split(',')
                        .map(|w| {
                            let w = w.trim();
                            Ok(
                                match parse_word(key, w, line, &["json", "csv", "gnuplot", "binary"])? {
                                    "json" => Format::Json,
                                    "csv" => Format::Csv,
                                    "gnuplot" => Format::Gnuplot,
                                    _ => Format::Binary,
                                },
                            )
                        })
                        .collect::<Result<_>>()?
                }
                _ => {
                    return Err(Error::Parse {
                        line,
                        msg: format!("unknown key {key:?}"),
                    })
                }
            }
        }
        let uniform = matches!(cfg.experiment.initial, InitialProfile::Uniform);
        cfg.experiment.initial = match initial_kind.as_deref() {
            Some("uniform") => InitialProfile::Uniform,
            Some(_) => InitialProfile::Gaussian {
                center: init_center,
                width: init_width,
            },
            None if uniform => InitialProfile::Uniform,
            None => InitialProfile::Gaussian {
                center: init_center,
                width: init_width,
            },
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        RunConfig::parse(&text)
    }

    /// Checks every constraint, including the model invariants.
    pub fn validate(&self) -> Result<()> {
        let model = Model::new(self.model)?;
        let d = &self.discretization;
        let e = &self.experiment;
        let bad = |msg: String| Err(Error::Config(msg));
        if d.nx < 16 {
            return bad(format!("discretization.nx >= 16 violated ({})", d.nx));
        }
        if d.nv < 5 || d.nv % 2 == 0 {
            return bad(format!("discretization.nv must be odd and >= 5 ({})", d.nv));
        }
        if !(d.tail_tol > 0.0 && d.tail_tol < 1.0) {
            return bad(format!("discretization.tail_tol must lie in (0, 1) ({})", d.tail_tol));
        }
        if !(d.vmax > 1.0) {
            return bad(format!("discretization.vmax > 1 violated ({})", d.vmax));
        }
        if !(d.cfl > 0.0 && d.cfl <= 1.0) {
            return bad(format!("discretization.cfl must lie in (0, 1] ({})", d.cfl));
        }
        if d.images < 1 {
            return bad("discretization.images >= 1 violated".into());
        }
        if !(d.macro_dt > 0.0) {
            return bad(format!("discretization.macro_dt > 0 violated ({})", d.macro_dt));
        }
        if d.mc_bins < 2 || d.nx % d.mc_bins != 0 {
            return bad(format!(
                "discretization.mc_bins must be >= 2 and divide nx ({} vs {})",
                d.mc_bins, d.nx
            ));
        }
        if e.eps_list.is_empty() {
            return bad("experiment.eps_list must not be empty".into());
        }
        if let Some(&x) = e.eps_list.iter().find(|&&x| !(x > 0.0 && x <= 1.0)) {
            return bad(format!("experiment.eps_list entries must lie in (0, 1] ({x})"));
        }
        if e.eps_list.windows(2).any(|w| w[1] >= w[0]) {
            return bad("experiment.eps_list must be strictly decreasing".into());
        }
        if !(e.t_final > 0.0) {
            return bad(format!("experiment.t_final > 0 violated ({})", e.t_final));
        }
        if let Some(&t) = e.snapshot_times.iter().find(|&&t| !(0.0..=e.t_final).contains(&t)) {
            return bad(format!("experiment.snapshot_times must lie in [0, t_final] ({t})"));
        }
        e.initial.validate(self.model.domain_length)?;
        if !(e.mc_eps > 0.0 && e.mc_eps <= 1.0) {
            return bad(format!("experiment.mc_eps must lie in (0, 1] ({})", e.mc_eps));
        }
        if !(e.phi_width > 0.0) || !(e.phi_t_end > 0.0) {
            return bad("experiment.phi_width and phi_t_end must be positive".into());
        }
        let _ = model;
        Ok(())
    }

    /// Flat text listing every key; parsing it gives back an identical config.
    pub fn to_flat(&self) -> String {
        let m = &self.model;
        let d = &self.discretization;
        let e = &self.experiment;
        let mut s = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        put("model.alpha", format!("{:?}", m.alpha));
        put("model.beta", format!("{:?}", m.beta));
        put("model.kappa", format!("{:?}", m.kappa));
        put("model.core_asym", format!("{:?}", m.core_asym));
        put("model.nu0_mean", format!("{:?}", m.nu0_mean));
        put("model.nu0_delta", format!("{:?}", m.nu0_delta));
        put("model.domain_length", format!("{:?}", m.domain_length));
        put("discretization.nx", d.nx.to_string());
        put("discretization.nv", d.nv.to_string());
        put(
            "discretization.vmax_policy",
            match d.vmax_policy {
                VmaxKind::Critical => "critical",
                VmaxKind::Domain => "domain",
                VmaxKind::Fixed => "fixed",
            }
            .into(),
        );
        put("discretization.tail_tol", format!("{:?}", d.tail_tol));
        put("discretization.vmax", format!("{:?}", d.vmax));
        put(
            "discretization.scheme",
            match d.scheme {
                Scheme::Upwind => "upwind",
                Scheme::Muscl => "muscl",
            }
            .into(),
        );
        put("discretization.cfl", format!("{:?}", d.cfl));
        put("discretization.images", d.images.to_string());
        put("discretization.macro_dt", format!("{:?}", d.macro_dt));
        put("discretization.mc_bins", d.mc_bins.to_string());
        put("experiment.eps_list", join(&e.eps_list));
        put("experiment.t_final", format!("{:?}", e.t_final));
        put("experiment.snapshot_times", join(&e.snapshot_times));
        put("experiment.particles", e.particles.to_string());
        put("experiment.seed", e.seed.to_string());
        match e.initial {
            InitialProfile::Gaussian { center, width } => {
                put("experiment.initial", "gaussian".into());
                put("experiment.initial_center", format!("{center:?}"));
                put("experiment.initial_width", format!("{width:?}"));
            }
            InitialProfile::Uniform => put("experiment.initial", "uniform".into()),
        }
        put(
            "experiment.phi",
            match e.phi {
                PhiKind::Gaussian => "gaussian",
                PhiKind::PlaneWave => "plane_wave",
                PhiKind::Constant => "constant",
            }
            .into(),
        );
        put("experiment.phi_center", format!("{:?}", e.phi_center));
        put("experiment.phi_width", format!("{:?}", e.phi_width));
        put("experiment.phi_xi", format!("{:?}", e.phi_xi));
        put("experiment.phi_t_end", format!("{:?}", e.phi_t_end));
        put("experiment.sample_points", join(&e.sample_points));
        put("experiment.mc_eps", format!("{:?}", e.mc_eps));
        put("experiment.coercivity_samples", e.coercivity_samples.to_string());
        put("output.dir", self.output.dir.clone());
        put(
            "output.formats",
            self.output
                .formats
                .iter()
                .map(|f| match f {
                    Format::Json => "json",
                    Format::Csv => "csv",
                    Format::Gnuplot => "gnuplot",
                    Format::Binary => "binary",
                })
                .collect::<Vec<_>>()
                .join(", "),
        );
        s
    }

    pub fn model(&self) -> Result<Model> {
        Model::new(self.model)
    }

    pub fn vmax_policy(&self) -> VmaxPolicy {
        let d = &self.discretization;
        match d.vmax_policy {
            VmaxKind::Critical => VmaxPolicy::Critical {
                tail_tol: d.tail_tol,
            },
            VmaxKind::Domain => VmaxPolicy::Domain {
                tail_tol: d.tail_tol,
            },
            VmaxKind::Fixed => VmaxPolicy::Fixed { vmax: d.vmax },
        }
    }

    pub fn det_config(&self) -> DetConfig {
        let d = &self.discretization;
        DetConfig {
            nx: d.nx,
            nv: d.nv,
            vmax: self.vmax_policy(),
            scheme: d.scheme,
            cfl: d.cfl,
            t_final: self.experiment.t_final,
            snapshot_times: self.experiment.snapshot_times.clone(),
            keep_fields: false,
            moment_stride: 0,
        }
    }

    /// The configured test function, with time support `[0, phi_t_end]`, on the
    /// torus when `periodic` is set and on the line otherwise.
    pub fn test_function(&self, periodic: bool) -> Result<TestFunction> {
        let e = &self.experiment;
        let spatial = match e.phi {
            PhiKind::Gaussian => SpatialProfile::Gaussian {
                center: e.phi_center,
                width: e.phi_width,
            },
            PhiKind::PlaneWave => SpatialProfile::PlaneWave {
                center: e.phi_center,
                width: e.phi_width,
                xi: e.phi_xi,
            },
            PhiKind::Constant => SpatialProfile::Constant { value: 1.0 },
        };
        TestFunction::new(
            spatial,
            TimeEnvelope::Bump {
                t_end: e.phi_t_end,
            },
            periodic.then_some(self.model.domain_length),
        )
    }

    pub fn wants(&self, format: Format) -> bool {
        self.output.formats.contains(&format)
    }
}
