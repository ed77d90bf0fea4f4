//! Run configuration: a line-oriented `[section]` / `key = value` format with
//! `#` comments.
//!
//! ```text
//! [material]
//! lambda = 1
//! ...
//! model_type = TypeIII
//!
//! [grid]
//! Lx = 1
//! Ly = 1
//! nx = 16
//! ny = 16
//! ```

use std::collections::BTreeMap;
use std::path::PathBuf;

use thiserror::Error;

use crate::grid::{Grid, GridError};
use crate::material::{MaterialError, MaterialParams, ModelType};
use crate::state::{InitialCondition, StateField};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: unknown section [{section}]")]
    UnknownSection { line: usize, section: String },
    #[error("line {line}: unknown key `{key}` in [{section}]")]
    UnknownKey {
        line: usize,
        section: String,
        key: String,
    },
    #[error("line {line}: duplicate key `{key}` in [{section}]")]
    DuplicateKey {
        line: usize,
        section: String,
        key: String,
    },
    #[error("line {line}: bad value for `{key}`: {message}")]
    InvalidValue {
        line: usize,
        key: String,
        message: String,
    },
    #[error("missing required {0}")]
    MissingRequired(String),
    #[error("material fails: {}", .0.join(", "))]
    InvalidMaterial(Vec<&'static str>),
    #[error(transparent)]
    Material(#[from] MaterialError),
    #[error(transparent)]
    Grid(#[from] GridError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    Type2Conservation,
    Type3Decay,
    SpatialDecay,
    BackwardUniqueness,
    ForwardBackwardRoundtrip,
    MmsConvergence,
    ResolventCheck,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 7] = [
        ExperimentKind::Type2Conservation,
        ExperimentKind::Type3Decay,
        ExperimentKind::SpatialDecay,
        ExperimentKind::BackwardUniqueness,
        ExperimentKind::ForwardBackwardRoundtrip,
        ExperimentKind::MmsConvergence,
        ExperimentKind::ResolventCheck,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Type2Conservation => "type2_conservation",
            ExperimentKind::Type3Decay => "type3_decay",
            ExperimentKind::SpatialDecay => "spatial_decay",
            ExperimentKind::BackwardUniqueness => "backward_uniqueness",
            ExperimentKind::ForwardBackwardRoundtrip => "forward_backward_roundtrip",
            ExperimentKind::MmsConvergence => "mms_convergence",
            ExperimentKind::ResolventCheck => "resolvent_check",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub lx: f64,
    pub ly: f64,
    pub nx: usize,
    pub ny: usize,
}

impl GridSpec {
    pub fn build(&self) -> Result<Grid, GridError> {
        Grid::new(self.lx, self.ly, self.nx, self.ny)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeSpec {
    pub dt: f64,
    pub t_end: f64,
    /// Field snapshots and decay samples every this many steps; 0 disables them.
    pub snapshot_every: usize,
}

impl Default for TimeSpec {
    fn default() -> Self {
        TimeSpec {
            dt: 1e-3,
            t_end: 1.0,
            snapshot_every: 1,
        }
    }
}

/// Experiment selection plus the knobs individual experiments read.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub kind: Option<ExperimentKind>,
    pub seed: u64,
    /// type3_decay: add the long-time rows (thermal decay factor, mode check, log-affine tail).
    pub asymptotic: bool,
    pub mode_nx: usize,
    pub mode_ny: usize,
    pub mode_count: usize,
    /// spatial_decay: row taken as z = 0; automatic when absent.
    pub origin_row: Option<usize>,
    /// spatial_decay: multiplier on ξ, for negative controls.
    pub xi_scale: f64,
    /// spatial_decay: (x2, t) points for the flux/volume comparison.
    pub flux_points: Vec<(f64, f64)>,
    /// spatial_decay: require J at the far edge to be negligible (a strip long
    /// enough to stand in for a half-strip).
    pub check_far_field: bool,
    /// mms_convergence: square grids of the spatial ladder.
    pub mms_grids: Vec<usize>,
    /// mms_convergence: step sizes of the temporal ladder.
    pub mms_dts: Vec<f64>,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        ExperimentSpec {
            kind: None,
            seed: 0x5eed,
            asymptotic: false,
            mode_nx: 16,
            mode_ny: 16,
            mode_count: 20,
            origin_row: None,
            xi_scale: 1.0,
            flux_points: Vec::new(),
            check_far_field: true,
            mms_grids: vec![16, 32, 64],
            mms_dts: vec![0.05, 0.025, 0.0125],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputSpec {
    pub dir: PathBuf,
    /// Write per-field snapshot CSVs.
    pub snapshots: bool,
}

impl Default for OutputSpec {
    fn default() -> Self {
        OutputSpec {
            dir: PathBuf::from("out"),
            snapshots: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub material: MaterialParams,
    pub grid: GridSpec,
    pub time: TimeSpec,
    pub experiment: ExperimentSpec,
    pub ic: InitialCondition,
    pub output: OutputSpec,
}

const MATERIAL_KEYS: &[&str] = &[
    "lambda",
    "mu",
    "d1",
    "d2",
    "c",
    "kappa",
    "r",
    "k1",
    "h1",
    "hbar1",
    "k2",
    "h2",
    "hbar2",
    "rho",
    "T0",
    "h",
    "half_thickness",
    "model_type",
];
const GRID_KEYS: &[&str] = &["Lx", "Ly", "nx", "ny"];
const TIME_KEYS: &[&str] = &["dt", "t_end", "snapshot_every"];
const EXPERIMENT_KEYS: &[&str] = &[
    "name",
    "seed",
    "asymptotic",
    "mode_nx",
    "mode_ny",
    "mode_count",
    "origin_row",
    "xi_scale",
    "flux_points",
    "check_far_field",
    "mms_grids",
    "mms_dts",
];
const IC_KEYS: &[&str] = &[
    "preset",
    "target_field",
    "amplitude",
    "center",
    "width",
    "cutoff",
    "mode_numbers",
];
const OUTPUT_KEYS: &[&str] = &["dir", "snapshots"];

fn section_keys(name: &str) -> Option<&'static [&'static str]> {
    Some(match name {
        "material" => MATERIAL_KEYS,
        "grid" => GRID_KEYS,
        "time" => TIME_KEYS,
        "experiment" => EXPERIMENT_KEYS,
        "ic" => IC_KEYS,
        "output" => OUTPUT_KEYS,
        _ => return None,
    })
}

/// Key/value pairs of one section, with their line numbers.
#[derive(Debug, Default)]
struct Section {
    name: String,
    entries: BTreeMap<String, (String, usize)>,
}

impl Section {
    fn raw(&self, key: &str) -> Option<(&str, usize)> {
        self.entries.get(key).map(|(v, l)| (v.as_str(), *l))
    }

    fn invalid(key: &str, line: usize, message: impl Into<String>) -> ConfigError {
        ConfigError::InvalidValue {
            line,
            key: key.to_string(),
            message: message.into(),
        }
    }

    fn f64(&self, key: &str) -> Result<Option<f64>, ConfigError> {
        let Some((v, line)) = self.raw(key) else {
            return Ok(None);
        };
        let x: f64 = v
            .parse()
            .map_err(|_| Self::invalid(key, line, format!("`{v}` is not a number")))?;
        if !x.is_finite() {
            return Err(Self::invalid(key, line, "not finite"));
        }
        Ok(Some(x))
    }

    fn positive(&self, key: &str) -> Result<Option<f64>, ConfigError> {
        match self.f64(key)? {
            Some(x) if x <= 0.0 => Err(Self::invalid(key, self.raw(key).unwrap().1, "must be positive")),
            other => Ok(other),
        }
    }

    fn usize(&self, key: &str) -> Result<Option<usize>, ConfigError> {
        let Some((v, line)) = self.raw(key) else {
            return Ok(None);
        };
        v.parse()
            .map(Some)
            .map_err(|_| Self::invalid(key, line, format!("`{v}` is not a non-negative integer")))
    }

    fn bool(&self, key: &str) -> Result<Option<bool>, ConfigError> {
        let Some((v, line)) = self.raw(key) else {
            return Ok(None);
        };
        match v {
            "true" => Ok(Some(true)),
            "false" => Ok(Some(false)),
            _ => Err(Self::invalid(key, line, "expected true or false")),
        }
    }

    fn list<T: std::str::FromStr>(&self, key: &str) -> Result<Option<Vec<T>>, ConfigError> {
        let Some((v, line)) = self.raw(key) else {
            return Ok(None);
        };
        v.split(',')
            .map(|s| s.trim().parse::<T>())
            .collect::<Result<Vec<_>, _>>()
            .map(Some)
            .map_err(|_| Self::invalid(key, line, format!("`{v}` is not a comma-separated list")))
    }

    fn pair<T: std::str::FromStr + Copy>(&self, key: &str) -> Result<Option<(T, T)>, ConfigError> {
        match self.list::<T>(key)? {
            None => Ok(None),
            Some(v) if v.len() == 2 => Ok(Some((v[0], v[1]))),
            Some(_) => Err(Self::invalid(key, self.raw(key).unwrap().1, "expected two values")),
        }
    }

    fn require<T>(&self, key: &str, v: Option<T>) -> Result<T, ConfigError> {
        v.ok_or_else(|| ConfigError::MissingRequired(format!("key `{key}` in [{}]", self.name)))
    }
}

fn unquote(v: &str) -> &str {
    let v = v.trim();
    if v.len() >= 2 && v.starts_with('"') && v.ends_with('"') {
        &v[1..v.len() - 1]
    } else {
        v
    }
}

fn tokenize(text: &str) -> Result<BTreeMap<String, Section>, ConfigError> {
    let mut sections: BTreeMap<String, Section> = BTreeMap::new();
    let mut current: Option<String> = None;
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = match raw.find('#') {
            Some(p) => &raw[..p],
            None => raw,
        }
        .trim();
        if content.is_empty() {
            continue;
        }
        if let Some(rest) = content.strip_prefix('[') {
            let name = rest.strip_suffix(']').ok_or_else(|| ConfigError::Parse {
                line,
                message: format!("unterminated section header `{content}`"),
            })?;
            let name = name.trim().to_string();
            if section_keys(&name).is_none() {
                return Err(ConfigError::UnknownSection { line, section: name });
            }
            if sections.contains_key(&name) {
                return Err(ConfigError::Parse {
                    line,
                    message: format!("section [{name}] appears twice"),
                });
            }
            sections.insert(
                name.clone(),
                Section {
                    name: name.clone(),
                    entries: BTreeMap::new(),
                },
            );
            current = Some(name);
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            return Err(ConfigError::Parse {
                line,
                message: format!("expected `key = value`, got `{content}`"),
            });
        };
        let key = key.trim();
        let Some(section) = current.as_ref() else {
            return Err(ConfigError::Parse {
                line,
                message: format!("key `{key}` before any section header"),
            });
        };
        if !section_keys(section).unwrap().contains(&key) {
            return Err(ConfigError::UnknownKey {
                line,
                section: section.clone(),
                key: key.to_string(),
            });
        }
        let entries = &mut sections.get_mut(section).unwrap().entries;
        if entries.contains_key(key) {
            return Err(ConfigError::DuplicateKey {
                line,
                section: section.clone(),
                key: key.to_string(),
            });
        }
        entries.insert(key.to_string(), (unquote(value).to_string(), line));
    }
    Ok(sections)
}

fn parse_material(s: &Section) -> Result<MaterialParams, ConfigError> {
    let model_type = match s.raw("model_type") {
        None => return Err(ConfigError::MissingRequired("key `model_type` in [material]".into())),
        Some((v, line)) => ModelType::parse(v)
            .ok_or_else(|| Section::invalid("model_type", line, format!("`{v}` is not TypeII or TypeIII")))?,
    };
    let req = |k: &str| -> Result<f64, ConfigError> { s.require(k, s.f64(k)?) };
    // TypeII drops the rate coefficients, so they may be omitted.
    let rate = |k: &str| -> Result<f64, ConfigError> {
        match model_type {
            ModelType::TypeII => Ok(s.f64(k)?.unwrap_or(0.0)),
            ModelType::TypeIII => req(k),
        }
    };
    let half_thickness = match (s.f64("h")?, s.f64("half_thickness")?) {
        (Some(_), Some(_)) => {
            return Err(ConfigError::DuplicateKey {
                line: s.raw("half_thickness").unwrap().1.max(s.raw("h").unwrap().1),
                section: "material".into(),
                key: "h".into(),
            })
        }
        (Some(h), None) | (None, Some(h)) => h,
        (None, None) => return Err(ConfigError::MissingRequired("key `h` in [material]".into())),
    };
    Ok(MaterialParams {
        lambda: req("lambda")?,
        mu: req("mu")?,
        d1: req("d1")?,
        d2: req("d2")?,
        c: req("c")?,
        kappa: req("kappa")?,
        r: req("r")?,
        k1: req("k1")?,
        h1: req("h1")?,
        hbar1: req("hbar1")?,
        k2: rate("k2")?,
        h2: rate("h2")?,
        hbar2: rate("hbar2")?,
        rho: req("rho")?,
        t0: s.f64("T0")?.unwrap_or(1.0),
        half_thickness,
        model_type,
    })
}

fn parse_ic(s: Option<&Section>) -> Result<InitialCondition, ConfigError> {
    let Some(s) = s else {
        return Ok(InitialCondition::Zero);
    };
    let preset = s.raw("preset").map(|(v, _)| v).unwrap_or("zero");
    let field = || -> Result<StateField, ConfigError> {
        let (v, line) = s
            .raw("target_field")
            .ok_or_else(|| ConfigError::MissingRequired("key `target_field` in [ic]".into()))?;
        StateField::from_name(v).ok_or_else(|| Section::invalid("target_field", line, format!("`{v}` is not a state field")))
    };
    let amplitude = s.f64("amplitude")?.unwrap_or(1.0);
    match preset {
        "zero" => Ok(InitialCondition::Zero),
        "sine_mode" => Ok(InitialCondition::SineMode {
            field: field()?,
            amplitude,
            modes: s.pair::<u32>("mode_numbers")?.unwrap_or((1, 1)),
        }),
        "gaussian_bump" => Ok(InitialCondition::GaussianBump {
            field: field()?,
            amplitude,
            center: s.require("center", s.pair::<f64>("center")?)?,
            width: s.require("width", s.positive("width")?)?,
            cutoff: s.positive("cutoff")?,
        }),
        other => Err(Section::invalid(
            "preset",
            s.raw("preset").unwrap().1,
            format!("`{other}` is not zero, sine_mode or gaussian_bump"),
        )),
    }
}

fn parse_flux_points(s: &Section) -> Result<Vec<(f64, f64)>, ConfigError> {
    let Some((v, line)) = s.raw("flux_points") else {
        return Ok(Vec::new());
    };
    v.split(',')
        .map(|item| {
            let (z, t) = item.split_once('@')?;
            Some((z.trim().parse().ok()?, t.trim().parse().ok()?))
        })
        .collect::<Option<Vec<_>>>()
        .ok_or_else(|| Section::invalid("flux_points", line, "expected `x2@t, x2@t, ...`"))
}

/// Parses without checking the material admissibility conditions.
pub fn parse_config_unchecked(text: &str) -> Result<Config, ConfigError> {
    let sections = tokenize(text)?;
    let get = |name: &str| sections.get(name);
    let material = parse_material(get("material").ok_or_else(|| ConfigError::MissingRequired("section [material]".into()))?)?;

    let g = get("grid").ok_or_else(|| ConfigError::MissingRequired("section [grid]".into()))?;
    let grid = GridSpec {
        lx: g.require("Lx", g.positive("Lx")?)?,
        ly: g.require("Ly", g.positive("Ly")?)?,
        nx: g.require("nx", g.usize("nx")?)?,
        ny: g.require("ny", g.usize("ny")?)?,
    };
    grid.build()?;

    let mut time = TimeSpec::default();
    if let Some(t) = get("time") {
        time.dt = t.positive("dt")?.unwrap_or(time.dt);
        time.t_end = t.positive("t_end")?.unwrap_or(time.t_end);
        time.snapshot_every = t.usize("snapshot_every")?.unwrap_or(time.snapshot_every);
    }

    let mut experiment = ExperimentSpec::default();
    if let Some(e) = get("experiment") {
        if let Some((v, line)) = e.raw("name") {
            experiment.kind = Some(ExperimentKind::parse(v).ok_or_else(|| Section::invalid("name", line, format!("unknown experiment `{v}`")))?);
        }
        if let Some((v, line)) = e.raw("seed") {
            experiment.seed = v.parse().map_err(|_| Section::invalid("seed", line, format!("`{v}` is not an unsigned integer")))?;
        }
        experiment.asymptotic = e.bool("asymptotic")?.unwrap_or(false);
        experiment.mode_nx = e.usize("mode_nx")?.unwrap_or(experiment.mode_nx);
        experiment.mode_ny = e.usize("mode_ny")?.unwrap_or(experiment.mode_ny);
        experiment.mode_count = e.usize("mode_count")?.unwrap_or(experiment.mode_count);
        experiment.origin_row = e.usize("origin_row")?;
        experiment.xi_scale = e.positive("xi_scale")?.unwrap_or(1.0);
        experiment.flux_points = parse_flux_points(e)?;
        experiment.check_far_field = e.bool("check_far_field")?.unwrap_or(true);
        experiment.mms_grids = e.list("mms_grids")?.unwrap_or(experiment.mms_grids);
        experiment.mms_dts = e.list("mms_dts")?.unwrap_or(experiment.mms_dts);
    }

    let ic = parse_ic(get("ic"))?;

    let mut output = OutputSpec::default();
    if let Some(o) = get("output") {
        if let Some((v, _)) = o.raw("dir") {
            output.dir = PathBuf::from(v);
        }
        output.snapshots = o.bool("snapshots")?.unwrap_or(true);
    }

    Ok(Config {
        material,
        grid,
        time,
        experiment,
        ic,
        output,
    })
}

/// Parses and requires every material admissibility condition to hold.
pub fn parse_config(text: &str) -> Result<Config, ConfigError> {
    let cfg = parse_config_unchecked(text)?;
    let report = cfg.material.validate()?;
    if !report.passed() {
        return Err(ConfigError::InvalidMaterial(report.failed_names()));
    }
    Ok(cfg)
}
