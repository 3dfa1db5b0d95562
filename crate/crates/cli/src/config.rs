//! Scenario configuration: JSON file, validated field by field before any
//! computation so a bad config dies with a path diagnostic, not a panic in
//! the middle of a scan. The shipped `scenario.schema.json` documents the
//! same shape for editors and external tooling; this module is the
//! enforcement.

use std::fmt;
use std::fs;
use std::path::Path;

use serde::Deserialize;
use serde_json::Value;

#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl std::error::Error for ConfigError {}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConventionsBlock {
    pub mass: f64,
    pub spatial_dims: u32,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PacketBlock {
    pub k_center: Vec<f64>,
    pub sigma_k: f64,
    pub x_center: Vec<f64>,
    pub t0: f64,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EprBlock {
    pub sigma: f64,
    pub q_total: Vec<f64>,
    pub pair_time: f64,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimesBlock {
    pub t_pair: f64,
    pub t_packet: f64,
    pub t_meas: f64,
    pub t_out: f64,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeBlock {
    pub n_points: usize,
    pub dk: f64,
}

/// (t, r) window for propagator-type scans.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpacetimeBlock {
    pub t_min: f64,
    pub t_max: f64,
    pub t_steps: usize,
    pub r_min: f64,
    pub r_max: f64,
    pub r_steps: usize,
}

/// Measurement-outcome window for amplitude scans: symmetric ranges in the
/// position shift X and momentum shift P.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutcomeBlock {
    pub x_half: f64,
    pub x_steps: usize,
    pub p_half: f64,
    pub p_steps: usize,
}

/// Observation-point grid for the output particle.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObservationBlock {
    pub half_width: f64,
    pub points: usize,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridBlock {
    pub lattice: LatticeBlock,
    pub spacetime: SpacetimeBlock,
    pub outcome: OutcomeBlock,
    pub observation: ObservationBlock,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputBlock {
    pub dir: String,
    pub formats: Vec<String>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub conventions: ConventionsBlock,
    pub packet: PacketBlock,
    pub epr: EprBlock,
    pub times: TimesBlock,
    pub grid: GridBlock,
    pub output: OutputBlock,
}

impl OutputBlock {
    pub fn wants(&self, fmt: &str) -> bool {
        self.formats.iter().any(|f| f == fmt)
    }
}

/// Read, validate, and deserialize a config file. Also returns the raw
/// bytes so summaries can embed the exact hash of what was read.
pub fn load(path: &Path) -> Result<(ScenarioConfig, Vec<u8>), ConfigError> {
    let bytes = fs::read(path)
        .map_err(|e| ConfigError(format!("cannot read config {}: {e}", path.display())))?;
    let value: Value = serde_json::from_slice(&bytes).map_err(|e| {
        ConfigError(format!(
            "config {} is not valid JSON (line {}, column {})",
            path.display(),
            e.line(),
            e.column()
        ))
    })?;
    validate(&value)?;
    let cfg: ScenarioConfig = serde_json::from_value(value)
        .map_err(|e| ConfigError(format!("config {}: {e}", path.display())))?;
    Ok((cfg, bytes))
}

// -- manual walk with field paths ------------------------------------------

fn obj<'a>(v: &'a Value, path: &str) -> Result<&'a serde_json::Map<String, Value>, ConfigError> {
    v.as_object()
        .ok_or_else(|| ConfigError(format!("config field `{path}`: expected an object")))
}

fn field<'a>(
    m: &'a serde_json::Map<String, Value>,
    path: &str,
    key: &str,
) -> Result<&'a Value, ConfigError> {
    m.get(key).ok_or_else(|| {
        ConfigError(format!(
            "config field `{}`: missing required key `{key}`",
            if path.is_empty() { "(root)" } else { path }
        ))
    })
}

fn num(v: &Value, path: &str) -> Result<f64, ConfigError> {
    let x = v
        .as_f64()
        .ok_or_else(|| ConfigError(format!("config field `{path}`: expected a number")))?;
    if !x.is_finite() {
        return Err(ConfigError(format!(
            "config field `{path}`: must be finite, got {x}"
        )));
    }
    Ok(x)
}

fn positive(v: &Value, path: &str) -> Result<f64, ConfigError> {
    let x = num(v, path)?;
    if x <= 0.0 {
        return Err(ConfigError(format!(
            "config field `{path}`: must be > 0, got {x}"
        )));
    }
    Ok(x)
}

fn uint(v: &Value, path: &str, min: u64) -> Result<u64, ConfigError> {
    let n = v.as_u64().ok_or_else(|| {
        ConfigError(format!(
            "config field `{path}`: expected a non-negative integer"
        ))
    })?;
    if n < min {
        return Err(ConfigError(format!(
            "config field `{path}`: must be >= {min}, got {n}"
        )));
    }
    Ok(n)
}

fn vec_f64(v: &Value, path: &str, len: usize) -> Result<Vec<f64>, ConfigError> {
    let arr = v
        .as_array()
        .ok_or_else(|| ConfigError(format!("config field `{path}`: expected an array")))?;
    if arr.len() != len {
        return Err(ConfigError(format!(
            "config field `{path}`: expected {len} entries to match conventions.spatial_dims, got {}",
            arr.len()
        )));
    }
    arr.iter()
        .enumerate()
        .map(|(i, x)| num(x, &format!("{path}[{i}]")))
        .collect()
}

fn validate(root: &Value) -> Result<(), ConfigError> {
    let m = obj(root, "(root)")?;
    for key in m.keys() {
        if !matches!(
            key.as_str(),
            "conventions" | "packet" | "epr" | "times" | "grid" | "output"
        ) {
            return Err(ConfigError(format!("config: unknown top-level key `{key}`")));
        }
    }

    let conv = obj(field(m, "", "conventions")?, "conventions")?;
    positive(field(conv, "conventions", "mass")?, "conventions.mass")?;
    let dims = uint(
        field(conv, "conventions", "spatial_dims")?,
        "conventions.spatial_dims",
        1,
    )?;
    if dims != 1 && dims != 3 {
        return Err(ConfigError(format!(
            "config field `conventions.spatial_dims`: only 1 and 3 are supported, got {dims}"
        )));
    }
    let dims = dims as usize;

    let packet = obj(field(m, "", "packet")?, "packet")?;
    vec_f64(field(packet, "packet", "k_center")?, "packet.k_center", dims)?;
    positive(field(packet, "packet", "sigma_k")?, "packet.sigma_k")?;
    vec_f64(field(packet, "packet", "x_center")?, "packet.x_center", dims)?;
    let t0 = num(field(packet, "packet", "t0")?, "packet.t0")?;

    let epr = obj(field(m, "", "epr")?, "epr")?;
    positive(field(epr, "epr", "sigma")?, "epr.sigma")?;
    vec_f64(field(epr, "epr", "q_total")?, "epr.q_total", dims)?;
    let pair_time = num(field(epr, "epr", "pair_time")?, "epr.pair_time")?;

    let times = obj(field(m, "", "times")?, "times")?;
    let t_pair = num(field(times, "times", "t_pair")?, "times.t_pair")?;
    let t_packet = num(field(times, "times", "t_packet")?, "times.t_packet")?;
    let t_meas = num(field(times, "times", "t_meas")?, "times.t_meas")?;
    num(field(times, "times", "t_out")?, "times.t_out")?;
    // the times block is the protocol clock; the per-state stamps must agree
    if t_pair != pair_time {
        return Err(ConfigError(format!(
            "config field `times.t_pair`: must equal epr.pair_time ({pair_time}), got {t_pair}"
        )));
    }
    if t_packet != t0 {
        return Err(ConfigError(format!(
            "config field `times.t_packet`: must equal packet.t0 ({t0}), got {t_packet}"
        )));
    }
    if t_meas <= t_pair {
        return Err(ConfigError(format!(
            "config field `times.t_meas`: measurement must come after pair creation ({t_pair}), got {t_meas}"
        )));
    }

    let grid = obj(field(m, "", "grid")?, "grid")?;
    let lattice = obj(field(grid, "grid", "lattice")?, "grid.lattice")?;
    let n_points = uint(
        field(lattice, "grid.lattice", "n_points")?,
        "grid.lattice.n_points",
        3,
    )?;
    if n_points % 2 == 0 {
        return Err(ConfigError(format!(
            "config field `grid.lattice.n_points`: must be odd so the lattice is centered, got {n_points}"
        )));
    }
    positive(field(lattice, "grid.lattice", "dk")?, "grid.lattice.dk")?;

    let st = obj(field(grid, "grid", "spacetime")?, "grid.spacetime")?;
    let t_min = num(field(st, "grid.spacetime", "t_min")?, "grid.spacetime.t_min")?;
    let t_max = num(field(st, "grid.spacetime", "t_max")?, "grid.spacetime.t_max")?;
    if t_max < t_min {
        return Err(ConfigError(format!(
            "config field `grid.spacetime.t_max`: must be >= t_min ({t_min}), got {t_max}"
        )));
    }
    uint(
        field(st, "grid.spacetime", "t_steps")?,
        "grid.spacetime.t_steps",
        1,
    )?;
    let r_min = positive(field(st, "grid.spacetime", "r_min")?, "grid.spacetime.r_min")?;
    let r_max = num(field(st, "grid.spacetime", "r_max")?, "grid.spacetime.r_max")?;
    if r_max < r_min {
        return Err(ConfigError(format!(
            "config field `grid.spacetime.r_max`: must be >= r_min ({r_min}), got {r_max}"
        )));
    }
    uint(
        field(st, "grid.spacetime", "r_steps")?,
        "grid.spacetime.r_steps",
        1,
    )?;

    let oc = obj(field(grid, "grid", "outcome")?, "grid.outcome")?;
    num(field(oc, "grid.outcome", "x_half")?, "grid.outcome.x_half")?;
    uint(field(oc, "grid.outcome", "x_steps")?, "grid.outcome.x_steps", 1)?;
    num(field(oc, "grid.outcome", "p_half")?, "grid.outcome.p_half")?;
    uint(field(oc, "grid.outcome", "p_steps")?, "grid.outcome.p_steps", 1)?;

    let ob = obj(field(grid, "grid", "observation")?, "grid.observation")?;
    positive(
        field(ob, "grid.observation", "half_width")?,
        "grid.observation.half_width",
    )?;
    uint(
        field(ob, "grid.observation", "points")?,
        "grid.observation.points",
        3,
    )?;

    let output = obj(field(m, "", "output")?, "output")?;
    let dir = field(output, "output", "dir")?
        .as_str()
        .ok_or_else(|| ConfigError("config field `output.dir`: expected a string".into()))?;
    if dir.is_empty() {
        return Err(ConfigError(
            "config field `output.dir`: must not be empty".into(),
        ));
    }
    let formats = field(output, "output", "formats")?
        .as_array()
        .ok_or_else(|| ConfigError("config field `output.formats`: expected an array".into()))?;
    for (i, f) in formats.iter().enumerate() {
        let s = f.as_str().ok_or_else(|| {
            ConfigError(format!("config field `output.formats[{i}]`: expected a string"))
        })?;
        if !matches!(s, "csv" | "json" | "svg") {
            return Err(ConfigError(format!(
                "config field `output.formats[{i}]`: must be one of csv, json, svg; got `{s}`"
            )));
        }
    }
    Ok(())
}

/// Evenly spaced samples including both endpoints; a single step collapses
/// to the midpoint.
pub fn linspace(lo: f64, hi: f64, steps: usize) -> Vec<f64> {
    if steps <= 1 {
        return vec![0.5 * (lo + hi)];
    }
    (0..steps)
        .map(|i| lo + (hi - lo) * i as f64 / (steps - 1) as f64)
        .collect()
}

/// Symmetric scan values -half..half.
pub fn symmetric(half: f64, steps: usize) -> Vec<f64> {
    linspace(-half, half, steps)
}
