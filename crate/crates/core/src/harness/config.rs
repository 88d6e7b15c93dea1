//! Experiment configuration: flat dotted keys in a TOML file, layered over
//! an optional preset and under `key=value` overrides.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use toml::{Table, Value};

use crate::accel::{AccelSpec, AuxForm, AuxSeriesParams};
use crate::error::{PitaError, Result};
use crate::omega::SubdivisionSet;
use crate::optimize::AnnealConfig;
use crate::parareal::{DeltaSchedule, ParerealConfig, ParerealMode};
use crate::propagators::PropagatorKind;
use crate::{LtiSystem, TimeGrid};

/// Every accepted key with its default (empty when required) and meaning.
pub const KEYS: &[(&str, &str, &str)] = &[
    ("system.A", "", "state matrix, array of rows"),
    ("system.B", "", "input matrix, array of rows or a column"),
    ("system.u", "", "constant input, scalar or array"),
    ("system.y0", "", "initial state at grid.t0"),
    ("grid.t0", "0", "start time"),
    ("grid.Tf", "", "end time"),
    ("grid.N", "", "number of time slices"),
    (
        "mode",
        "parareal-semi",
        "parareal-semi | parareal-classic | euler-study",
    ),
    (
        "h0",
        "slice length",
        "reference step of the subdivision study",
    ),
    ("study.deltas", "[1, 2, 4, ..., 512]", "subdivision ladder"),
    ("study.accelerate", "false", "also write omega_accel.csv"),
    (
        "schedule.delta_base",
        "100",
        "fine subdivision of the first pass",
    ),
    (
        "schedule.delta_step",
        "1",
        "growth of the subdivision per pass",
    ),
    (
        "schedule.delta1",
        "0.5",
        "lower bound on the delta distance",
    ),
    ("schedule.delta2", "2", "upper bound on the delta distance"),
    ("parareal.K", "8", "number of correction passes"),
    ("parareal.coarse_steps", "1", "coarse steps per slice"),
    (
        "parareal.fine_step",
        "slice length / 100",
        "classic mode fine step",
    ),
    ("parareal.coarse", "implicit", "classic mode coarse scheme"),
    ("parareal.fine", "implicit", "classic mode fine scheme"),
    ("accel.k", "4", "even extrapolation order"),
    ("accel.n", "2", "starting index in the Omega-series"),
    ("accel.rho", "1", "coupling scale"),
    ("accel.S_b0", "0", "offset of the auxiliary series"),
    (
        "accel.form",
        "literal",
        "auxiliary series form: literal | alternate",
    ),
    ("accel.guard", "1e-12", "epsilon table denominator guard"),
    ("anneal.q_min", "1e-10", "lower bound on q"),
    ("anneal.q_max", "10", "upper bound on q"),
    ("anneal.q_init", "log midpoint of the bounds", "starting q"),
    (
        "anneal.initial_temp",
        "objective at q_init",
        "starting temperature",
    ),
    ("anneal.cooling", "0.95", "geometric cooling factor"),
    ("anneal.steps", "2000", "proposals per chain"),
    (
        "anneal.proposal_scale",
        "0.5",
        "proposal deviation in decades",
    ),
    ("anneal.chains", "1", "independent chains, best one wins"),
    (
        "calibration.refresh_interval",
        "N",
        "re-calibrate every this many slices",
    ),
    ("calibration.h_tiny", "1e-5", "bootstrap Euler step"),
    (
        "calibration.reference",
        "bootstrap",
        "calibration target: bootstrap | exact",
    ),
    (
        "report.scale_exponent",
        "4",
        "report errors in units of 10^-s",
    ),
    ("seed", "0", "annealing seed"),
    ("out", "out", "output directory"),
];

pub const PRESETS: &[&str] = &["paper-sigma"];

fn preset_text(name: &str) -> Option<&'static str> {
    match name {
        "paper-sigma" => Some(
            r#"
mode = "parareal-semi"
h0 = 0.1

[system]
A = [[-1.0, 5.0], [-5.0, -1.0]]
B = [[0.0], [1.0]]
u = [10.0]
y0 = [0.0, 1.0]

[grid]
t0 = 0.0
Tf = 0.9
N = 9

[schedule]
delta_base = 100.0
delta_step = 1.0
delta1 = 0.5
delta2 = 2.0

[parareal]
K = 8

[accel]
k = 4
n = 2
rho = 1.0
S_b0 = 0.0

[report]
scale_exponent = 4
"#,
        ),
        _ => None,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    EulerStudy,
    PararealClassic,
    PararealSemi,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReferenceKind {
    Bootstrap,
    Exact,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyConfig {
    pub ladder: SubdivisionSet,
    pub accelerate: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationConfig {
    pub refresh_interval: usize,
    pub h_tiny: f64,
    pub reference: ReferenceKind,
    pub chains: usize,
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub system: LtiSystem,
    pub grid: TimeGrid,
    pub mode: Mode,
    pub study: StudyConfig,
    pub parareal: ParerealConfig,
    pub accel: AccelSpec,
    pub anneal: AnnealConfig,
    pub calibration: CalibrationConfig,
    pub scale_exponent: i32,
    pub seed: u64,
    pub out_dir: PathBuf,
}

/// Key/value layers; later layers win.
#[derive(Debug, Clone, Default)]
pub struct ConfigBuilder {
    values: BTreeMap<String, Value>,
}

impl ConfigBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn preset(&mut self, name: &str) -> Result<&mut Self> {
        let text = preset_text(name).ok_or_else(|| {
            PitaError::config(
                "preset",
                format!("unknown preset `{name}`; known: {}", PRESETS.join(", ")),
            )
        })?;
        self.merge_str(text, name)
    }

    pub fn merge_file(&mut self, path: &Path) -> Result<&mut Self> {
        let text = std::fs::read_to_string(path).map_err(|e| PitaError::io(path, e))?;
        self.merge_str(&text, &path.display().to_string())
    }

    /// Merges TOML text; `origin` names the source in parse errors.
    pub fn merge_str(&mut self, text: &str, origin: &str) -> Result<&mut Self> {
        let table: Table = text
            .parse()
            .map_err(|e: toml::de::Error| PitaError::config(origin, e.to_string().trim_end()))?;
        flatten("", table, &mut self.values);
        Ok(self)
    }

    /// `key=value`, where the value is read as TOML and otherwise taken
    /// as a bare string.
    pub fn assign(&mut self, assignment: &str) -> Result<&mut Self> {
        let (key, raw) = assignment
            .split_once('=')
            .ok_or_else(|| PitaError::config(assignment, "expected key=value"))?;
        let (key, raw) = (key.trim(), raw.trim());
        let value = format!("v = {raw}")
            .parse::<Table>()
            .ok()
            .and_then(|mut t| t.remove("v"))
            .unwrap_or_else(|| Value::String(raw.to_string()));
        Ok(self.set(key, value))
    }

    pub fn set(&mut self, key: &str, value: impl Into<Value>) -> &mut Self {
        self.values.insert(key.to_string(), value.into());
        self
    }

    pub fn build(&self) -> Result<ExperimentConfig> {
        for key in self.values.keys() {
            if !KEYS.iter().any(|(k, _, _)| k == key) {
                return Err(PitaError::config(key.as_str(), "unknown key"));
            }
        }
        Reader(&self.values).experiment()
    }
}

fn flatten(prefix: &str, table: Table, out: &mut BTreeMap<String, Value>) {
    for (k, v) in table {
        let key = if prefix.is_empty() {
            k
        } else {
            format!("{prefix}.{k}")
        };
        match v {
            Value::Table(inner) => flatten(&key, inner, out),
            other => {
                out.insert(key, other);
            }
        }
    }
}

/// Reads a config file with no preset.
pub fn parse_config(path: &Path) -> Result<ExperimentConfig> {
    ConfigBuilder::new().merge_file(path)?.build()
}

struct Reader<'a>(&'a BTreeMap<String, Value>);

fn type_error(key: &str, expected: &str, found: &Value) -> PitaError {
    PitaError::config(
        key,
        format!("expected {expected}, found {}", found.type_str()),
    )
}

fn at_key(key: &str) -> impl Fn(PitaError) -> PitaError + '_ {
    move |e| match e {
        PitaError::InvalidArgument(m) => PitaError::config(key, m),
        other => other,
    }
}

impl Reader<'_> {
    fn get(&self, key: &str) -> Option<&Value> {
        self.0.get(key)
    }

    fn required(&self, key: &str) -> Result<&Value> {
        self.get(key)
            .ok_or_else(|| PitaError::config(key, "missing required key"))
    }

    fn number(key: &str, v: &Value) -> Result<f64> {
        match v {
            Value::Float(x) => Ok(*x),
            Value::Integer(i) => Ok(*i as f64),
            other => Err(type_error(key, "a number", other)),
        }
    }

    fn f64_or(&self, key: &str, default: f64) -> Result<f64> {
        self.get(key).map_or(Ok(default), |v| Self::number(key, v))
    }

    fn f64_opt(&self, key: &str) -> Result<Option<f64>> {
        self.get(key).map(|v| Self::number(key, v)).transpose()
    }

    fn f64_req(&self, key: &str) -> Result<f64> {
        Self::number(key, self.required(key)?)
    }

    fn integer(key: &str, v: &Value) -> Result<i64> {
        match v {
            Value::Integer(i) => Ok(*i),
            other => Err(type_error(key, "an integer", other)),
        }
    }

    fn usize_of(key: &str, v: &Value) -> Result<usize> {
        let i = Self::integer(key, v)?;
        usize::try_from(i).map_err(|_| PitaError::config(key, format!("{i} must be non-negative")))
    }

    fn usize_or(&self, key: &str, default: usize) -> Result<usize> {
        self.get(key)
            .map_or(Ok(default), |v| Self::usize_of(key, v))
    }

    fn usize_req(&self, key: &str) -> Result<usize> {
        Self::usize_of(key, self.required(key)?)
    }

    fn str_or<'v>(&'v self, key: &str, default: &'v str) -> Result<&'v str> {
        match self.get(key) {
            None => Ok(default),
            Some(Value::String(s)) => Ok(s),
            Some(other) => Err(type_error(key, "a string", other)),
        }
    }

    fn bool_or(&self, key: &str, default: bool) -> Result<bool> {
        match self.get(key) {
            None => Ok(default),
            Some(Value::Boolean(b)) => Ok(*b),
            Some(other) => Err(type_error(key, "a boolean", other)),
        }
    }

    fn vector(key: &str, v: &Value) -> Result<Vec<f64>> {
        match v {
            Value::Array(items) => items.iter().map(|x| Self::number(key, x)).collect(),
            Value::Float(_) | Value::Integer(_) => Ok(vec![Self::number(key, v)?]),
            other => Err(type_error(key, "an array of numbers", other)),
        }
    }

    /// Array of rows; a flat array is read as a single column.
    fn matrix(key: &str, v: &Value) -> Result<Vec<Vec<f64>>> {
        let Value::Array(items) = v else {
            return Err(type_error(key, "an array of rows", v));
        };
        if items.iter().all(|x| matches!(x, Value::Array(_))) {
            items.iter().map(|row| Self::vector(key, row)).collect()
        } else {
            items
                .iter()
                .map(|x| Ok(vec![Self::number(key, x)?]))
                .collect()
        }
    }

    fn kind(&self, key: &str) -> Result<PropagatorKind> {
        match self.str_or(key, "implicit")? {
            "implicit" => Ok(PropagatorKind::ImplicitEuler),
            "explicit" => Ok(PropagatorKind::ExplicitEuler),
            other => Err(PitaError::config(
                key,
                format!("expected implicit | explicit, found `{other}`"),
            )),
        }
    }

    fn system(&self) -> Result<LtiSystem> {
        let a = Self::matrix("system.A", self.required("system.A")?)?;
        let b = Self::matrix("system.B", self.required("system.B")?)?;
        let u = Self::vector("system.u", self.required("system.u")?)?;
        let y0 = Self::vector("system.y0", self.required("system.y0")?)?;
        LtiSystem::from_rows(&a, &b, &u, &y0).map_err(|e| match e {
            PitaError::DimensionMismatch { field, .. } | PitaError::NonFiniteEntry { field } => {
                PitaError::config(format!("system.{field}"), e.to_string())
            }
            other => other,
        })
    }

    fn experiment(&self) -> Result<ExperimentConfig> {
        let system = self.system()?;
        let t0 = self.f64_or("grid.t0", 0.0)?;
        let tf = self.f64_req("grid.Tf")?;
        let slices = self.usize_req("grid.N")?;
        let grid = TimeGrid::new(t0, tf, slices).map_err(at_key("grid"))?;

        let mode = match self.str_or("mode", "parareal-semi")? {
            "parareal-semi" => Mode::PararealSemi,
            "parareal-classic" => Mode::PararealClassic,
            "euler-study" => Mode::EulerStudy,
            other => {
                let expected = "parareal-semi | parareal-classic | euler-study";
                return Err(PitaError::config(
                    "mode",
                    format!("expected {expected}, found `{other}`"),
                ));
            }
        };

        let h0 = self.f64_or("h0", grid.slice_len())?;
        let deltas = match self.get("study.deltas") {
            None => (0..10).map(|i| 1usize << i).collect(),
            Some(Value::Array(items)) => items
                .iter()
                .map(|v| Self::usize_of("study.deltas", v))
                .collect::<Result<Vec<_>>>()?,
            Some(other) => return Err(type_error("study.deltas", "an array of integers", other)),
        };
        let study = StudyConfig {
            ladder: SubdivisionSet::new(h0, deltas).map_err(at_key("study.deltas"))?,
            accelerate: self.bool_or("study.accelerate", false)?,
        };

        let iterations = self.usize_or("parareal.K", 8)?;
        let coarse_steps = self.usize_or("parareal.coarse_steps", 1)?;
        let pmode = match mode {
            Mode::PararealClassic => ParerealMode::Classic {
                fine_step: self.f64_or("parareal.fine_step", grid.slice_len() / 100.0)?,
                coarse: self.kind("parareal.coarse")?,
                fine: self.kind("parareal.fine")?,
            },
            _ => ParerealMode::SemiExplicit {
                schedule: DeltaSchedule::new(
                    self.f64_or("schedule.delta_base", 100.0)?,
                    self.f64_or("schedule.delta_step", 1.0)?,
                    self.f64_or("schedule.delta1", 0.5)?,
                    self.f64_or("schedule.delta2", 2.0)?,
                )
                .map_err(at_key("schedule"))?,
            },
        };
        let parareal = ParerealConfig::with_coarse_steps(grid, iterations, pmode, coarse_steps)
            .map_err(at_key("parareal"))?;

        let form = match self.str_or("accel.form", "literal")? {
            "literal" => AuxForm::Literal,
            "alternate" => AuxForm::Alternate,
            other => {
                return Err(PitaError::config(
                    "accel.form",
                    format!("expected literal | alternate, found `{other}`"),
                ))
            }
        };
        let seed = match self.get("seed") {
            None => 0,
            Some(v) => u64::try_from(Self::integer("seed", v)?)
                .map_err(|_| PitaError::config("seed", "must be non-negative"))?,
        };
        let anneal = AnnealConfig {
            q_min: self.f64_or("anneal.q_min", 1e-10)?,
            q_max: self.f64_or("anneal.q_max", 10.0)?,
            q_init: self.f64_opt("anneal.q_init")?,
            initial_temp: self.f64_opt("anneal.initial_temp")?,
            cooling: self.f64_or("anneal.cooling", 0.95)?,
            steps: self.usize_or("anneal.steps", 2000)?,
            proposal_scale: self.f64_or("anneal.proposal_scale", 0.5)?,
            seed,
        };
        anneal.validate().map_err(at_key("anneal"))?;

        let q_start = anneal.q_init.unwrap_or(1.0);
        let aux = AuxSeriesParams::with_form(self.f64_or("accel.S_b0", 0.0)?, q_start, form)
            .map_err(at_key("accel.S_b0"))?;
        let accel = AccelSpec::new(self.usize_or("accel.k", 4)?, self.usize_or("accel.n", 2)?)
            .map_err(at_key("accel.k"))?
            .with_rho(self.f64_or("accel.rho", 1.0)?)
            .map_err(at_key("accel.rho"))?
            .with_guard(self.f64_or("accel.guard", crate::accel::DEFAULT_GUARD)?)
            .map_err(at_key("accel.guard"))?
            .with_aux(Some(aux));
        if mode != Mode::EulerStudy && iterations - 1 < accel.terms_needed() {
            return Err(PitaError::config(
                "parareal.K",
                format!(
                    "K = {iterations} gives {} Omega terms per slice, accel.k/accel.n need {}",
                    iterations - 1,
                    accel.terms_needed()
                ),
            ));
        }

        let reference = match self.str_or("calibration.reference", "bootstrap")? {
            "bootstrap" => ReferenceKind::Bootstrap,
            "exact" => ReferenceKind::Exact,
            other => {
                return Err(PitaError::config(
                    "calibration.reference",
                    format!("expected bootstrap | exact, found `{other}`"),
                ))
            }
        };
        let refresh_interval = self.usize_or("calibration.refresh_interval", slices)?;
        if refresh_interval == 0 {
            return Err(PitaError::config(
                "calibration.refresh_interval",
                "must be >= 1",
            ));
        }
        let h_tiny = self.f64_or("calibration.h_tiny", 1e-5)?;
        if !(h_tiny > 0.0) {
            return Err(PitaError::config("calibration.h_tiny", "must be positive"));
        }
        let chains = self.usize_or("anneal.chains", 1)?;
        if chains == 0 {
            return Err(PitaError::config("anneal.chains", "must be >= 1"));
        }

        let scale = Self::integer(
            "report.scale_exponent",
            self.get("report.scale_exponent")
                .unwrap_or(&Value::Integer(4)),
        )?;
        let scale_exponent = i32::try_from(scale)
            .ok()
            .filter(|s| s.abs() <= 300)
            .ok_or_else(|| PitaError::config("report.scale_exponent", "out of range"))?;

        Ok(ExperimentConfig {
            system,
            grid,
            mode,
            study,
            parareal,
            accel,
            anneal,
            calibration: CalibrationConfig {
                refresh_interval,
                h_tiny,
                reference,
                chains,
            },
            scale_exponent,
            seed,
            out_dir: PathBuf::from(self.str_or("out", "out")?),
        })
    }
}
