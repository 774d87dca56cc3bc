//! Configuration loading: built-in scenarios, TOML files, flag overrides,
//! and the canonical hash that makes summaries traceable to their inputs.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use sha2::{Digest, Sha256};

use projflow::dynamics::{IntegrateSpec, Method};
use projflow::scenarios::{builtin, FieldSpec, Scenario, BUILTIN_NAMES};

use crate::{CommonArgs, Failure};

/// Where artifacts go and how detailed they are.
pub struct OutputOptions {
    pub dir: PathBuf,
    /// Rows in the potential table written by `analyze`.
    pub phi_points: usize,
    /// Also dump per-cell initial and final states.
    pub states: bool,
}

impl Default for OutputOptions {
    fn default() -> Self {
        OutputOptions { dir: PathBuf::from("out"), phi_points: 64, states: false }
    }
}

/// A fully resolved job: scenario, output options, and check tolerances.
pub struct Job {
    pub scenario: Scenario,
    pub output: OutputOptions,
    pub tol_scale: f64,
    /// Hex digest of the canonical scenario text.
    pub hash: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    scenario: ScenarioSection,
    #[serde(default)]
    integration: IntegrationSection,
    #[serde(default)]
    output: OutputSection,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioSection {
    name: Option<String>,
    m: Option<usize>,
    a: FieldSpecToml,
    n: FieldSpecToml,
    y0: FieldSpecToml,
    z0: Option<FieldSpecToml>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct IntegrationSection {
    #[serde(rename = "T")]
    t_final: Option<f64>,
    h: Option<f64>,
    stride: Option<usize>,
    method: Option<String>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct OutputSection {
    dir: Option<PathBuf>,
    phi_points: Option<usize>,
    states: Option<bool>,
}

/// Field descriptions a TOML file may use. A bare string names a profile,
/// a number is a constant, an array lists per-cell values, and the table
/// form `{ a_plus_k_n = K }` asks for a point on the equilibrium ray.
#[derive(Deserialize)]
#[serde(untagged)]
enum FieldSpecToml {
    Name(String),
    Level(f64),
    IntLevel(i64),
    Values(Vec<f64>),
    Ray { a_plus_k_n: f64 },
}

impl FieldSpecToml {
    fn resolve(self, slot: &str) -> Result<FieldSpec, Failure> {
        match self {
            FieldSpecToml::Name(name) => match name.as_str() {
                "sin_two_pi_x" => Ok(FieldSpec::SinTwoPiX),
                other => Err(Failure::Usage(format!(
                    "unknown field profile {other:?} for {slot}; the only named profile is \"sin_two_pi_x\""
                ))),
            },
            FieldSpecToml::Level(c) => Ok(FieldSpec::Constant(c)),
            FieldSpecToml::IntLevel(c) => Ok(FieldSpec::Constant(c as f64)),
            FieldSpecToml::Values(v) => Ok(FieldSpec::Explicit(v)),
            FieldSpecToml::Ray { a_plus_k_n } => Ok(FieldSpec::APlusKN(a_plus_k_n)),
        }
    }
}

/// Resolve flags (and an optional config file) into a runnable job.
pub fn load(args: &CommonArgs) -> Result<Job, Failure> {
    if !(args.tol_scale.is_finite() && args.tol_scale > 0.0) {
        return Err(Failure::Usage(format!(
            "--tol-scale must be a positive finite number, got {}",
            args.tol_scale
        )));
    }

    let (mut scenario, mut output) = match (&args.builtin, &args.config) {
        (Some(_), Some(_)) => {
            return Err(Failure::Usage(
                "--builtin and --config are mutually exclusive; pass exactly one".into(),
            ))
        }
        (None, None) => {
            return Err(Failure::Usage(
                "a scenario source is required: pass --builtin NAME or --config PATH".into(),
            ))
        }
        (Some(name), None) => {
            let scenario = builtin(name).map_err(|_| {
                Failure::Usage(format!(
                    "unknown built-in scenario {name:?}; available: {}",
                    BUILTIN_NAMES.join(", ")
                ))
            })?;
            (scenario, OutputOptions::default())
        }
        (None, Some(path)) => from_file(path)?,
    };

    if let Some(m) = args.m {
        scenario.m = m;
    }
    if let Some(t) = args.t_final {
        scenario.t_final = t;
    }
    if let Some(h) = args.step {
        scenario.step = h;
    }
    if let Some(stride) = args.stride {
        scenario.stride = stride;
    }
    if let Some(method) = &args.method {
        scenario.method = parse_method(method)?;
    }
    if let Some(dir) = &args.out {
        output.dir = dir.clone();
    }

    let hash = scenario_hash(&scenario);
    Ok(Job { scenario, output, tol_scale: args.tol_scale, hash })
}

fn from_file(path: &Path) -> Result<(Scenario, OutputOptions), Failure> {
    let text = fs::read_to_string(path)
        .map_err(|err| Failure::Usage(format!("cannot read {}: {err}", path.display())))?;
    let file: ConfigFile = toml::from_str(&text)
        .map_err(|err| Failure::Usage(format!("invalid config {}: {err}", path.display())))?;

    let scenario = Scenario {
        name: file.scenario.name.unwrap_or_else(|| "custom".into()),
        m: file.scenario.m.unwrap_or(projflow::scenarios::DEFAULT_M),
        a: file.scenario.a.resolve("scenario.a")?,
        n: file.scenario.n.resolve("scenario.n")?,
        y0: file.scenario.y0.resolve("scenario.y0")?,
        z0: match file.scenario.z0 {
            Some(spec) => Some(spec.resolve("scenario.z0")?),
            None => None,
        },
        t_final: file.integration.t_final.unwrap_or(projflow::scenarios::DEFAULT_T_FINAL),
        step: file.integration.h.unwrap_or(projflow::dynamics::DEFAULT_STEP),
        stride: file.integration.stride.unwrap_or(projflow::dynamics::DEFAULT_STRIDE),
        method: match file.integration.method.as_deref() {
            Some(name) => parse_method(name)?,
            None => Method::LogRk4,
        },
    };

    let defaults = OutputOptions::default();
    let output = OutputOptions {
        dir: file.output.dir.unwrap_or(defaults.dir),
        phi_points: file.output.phi_points.unwrap_or(defaults.phi_points),
        states: file.output.states.unwrap_or(defaults.states),
    };
    Ok((scenario, output))
}

fn parse_method(name: &str) -> Result<Method, Failure> {
    name.parse().map_err(|_| {
        Failure::Usage(format!("unknown method {name:?}; expected log_rk4 or direct_rk4"))
    })
}

/// The integration parameters a scenario asks for.
pub fn integrate_spec(scenario: &Scenario) -> IntegrateSpec {
    IntegrateSpec {
        t_final: scenario.t_final,
        step: scenario.step,
        stride: scenario.stride,
        method: scenario.method,
    }
}

/// SHA-256 over a canonical rendering of the scenario. Two invocations
/// that resolve to the same fields get the same digest no matter how the
/// inputs were spelled.
pub fn scenario_hash(scenario: &Scenario) -> String {
    let mut text = String::new();
    text.push_str(&format!("name={}\n", scenario.name));
    text.push_str(&format!("m={}\n", scenario.m));
    text.push_str(&format!("a={}\n", canonical_field(&scenario.a)));
    text.push_str(&format!("n={}\n", canonical_field(&scenario.n)));
    text.push_str(&format!("y0={}\n", canonical_field(&scenario.y0)));
    match &scenario.z0 {
        Some(spec) => text.push_str(&format!("z0={}\n", canonical_field(spec))),
        None => text.push_str("z0=none\n"),
    }
    text.push_str(&format!("T={}\n", scenario.t_final));
    text.push_str(&format!("h={}\n", scenario.step));
    text.push_str(&format!("stride={}\n", scenario.stride));
    text.push_str(&format!("method={}\n", scenario.method.name()));

    let digest = Sha256::digest(text.as_bytes());
    let mut hex = String::with_capacity(64);
    for byte in digest {
        hex.push_str(&format!("{byte:02x}"));
    }
    hex
}

fn canonical_field(spec: &FieldSpec) -> String {
    match spec {
        FieldSpec::Constant(c) => format!("const:{c}"),
        FieldSpec::SinTwoPiX => "sin_two_pi_x".into(),
        FieldSpec::Explicit(values) => {
            let mut out = String::from("values:[");
            for (i, v) in values.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push_str(&format!("{v}"));
            }
            out.push(']');
            out
        }
        FieldSpec::APlusKN(k) => format!("ray:{k}"),
    }
}
