//! Run configuration, field files and CSV output.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::model::{attach_sigma_report, AssumptionReport, NonlinearitySpec, PotentialSpec};
use crate::problem::{ProblemSpec, SolverParams};
use crate::solver::{fiber_minimax_refine, normalized_gradient_flow, solve_coarse_to_fine, SolveResult};
use crate::spectral::{make_grid, Field, Grid};

pub const FIELD_FORMAT_VERSION: u32 = 1;
const SIGMA_SAMPLES: usize = 64;

/// A coarse grid used to warm-start a solve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoarseGrid {
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "L")]
    pub l: f64,
}

/// Which constrained solver a run uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    #[default]
    Flow,
    Refine,
}

/// Flat JSON run configuration.
///
/// Optional keys stay `None` when absent so a parsed document serializes back
/// to the same key set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub d: usize,
    pub s1: f64,
    pub s2: f64,
    pub a: f64,
    pub nonlinearity: NonlinearitySpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub potential: Option<PotentialSpec>,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "L")]
    pub l: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol_residual: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol_energy: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_iter: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub perturbation: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_sq_floor: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radial: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub method: Option<Method>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coarse: Option<Vec<CoarseGrid>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub masses: Option<Vec<f64>>,
    /// Reject unknown keys instead of warning.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strict: Option<bool>,
}

const KNOWN_KEYS: &[&str] = &[
    "d",
    "s1",
    "s2",
    "a",
    "nonlinearity",
    "potential",
    "N",
    "L",
    "tau",
    "tol_residual",
    "tol_energy",
    "max_iter",
    "seed",
    "perturbation",
    "delta_sq_floor",
    "radial",
    "method",
    "coarse",
    "out",
    "masses",
    "strict",
];

/// Parsed configuration plus everything worth telling the user about it.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: RunConfig,
    pub report: AssumptionReport,
    pub warnings: Vec<String>,
}

impl RunConfig {
    pub fn params(&self) -> SolverParams {
        let mut p = SolverParams::default();
        if let Some(v) = self.tau {
            p.tau = v;
        }
        if let Some(v) = self.tol_residual {
            p.tol_residual = v;
        }
        if let Some(v) = self.tol_energy {
            p.tol_energy = v;
        }
        if let Some(v) = self.max_iter {
            p.max_iter = v;
        }
        if let Some(v) = self.seed {
            p.seed = v;
        }
        if let Some(v) = self.perturbation {
            p.perturbation = v;
        }
        if let Some(v) = self.delta_sq_floor {
            p.delta_sq_floor = v;
        }
        p
    }

    pub fn potential(&self) -> PotentialSpec {
        self.potential.clone().unwrap_or_default()
    }

    pub fn method(&self) -> Method {
        self.method.unwrap_or_default()
    }

    pub fn grid(&self) -> Result<std::sync::Arc<Grid>> {
        make_grid(self.d, self.n, self.l)
    }

    pub fn coarse_grids(&self) -> Result<Vec<std::sync::Arc<Grid>>> {
        self.coarse
            .iter()
            .flatten()
            .map(|c| make_grid(self.d, c.n, c.l))
            .collect()
    }

    /// Builds the problem, attaching the sampled σ report for a negative well.
    pub fn to_problem(&self) -> Result<ProblemSpec> {
        let params = self.params();
        params.validate()?;
        let mut spec = ProblemSpec::new(
            self.grid()?,
            self.s1,
            self.s2,
            self.a,
            self.nonlinearity.clone(),
            self.potential(),
        )?
        .with_params(params)
        .with_radial(self.radial.unwrap_or(false));
        let grid = spec.grid().clone();
        let pot = spec.potential().clone();
        let nl = spec.nonlinearity().clone();
        let (s1, s2) = (spec.s1(), spec.s2());
        attach_sigma_report(spec.assumptions_mut(), &pot, &grid, s1, s2, &nl, SIGMA_SAMPLES, params.seed)?;
        Ok(spec)
    }
}

/// Runs the solver a configuration asks for: the flow (coarse-to-fine when
/// `coarse` grids are listed), then the fiber-minimax refinement if requested.
pub fn solve_config(config: &RunConfig, spec: &ProblemSpec) -> Result<SolveResult> {
    let coarse = config.coarse_grids()?;
    let flow = if coarse.is_empty() {
        normalized_gradient_flow(spec, None)?
    } else {
        solve_coarse_to_fine(spec, &coarse)?
    };
    match config.method() {
        Method::Flow => Ok(flow),
        Method::Refine => fiber_minimax_refine(spec, &flow.u),
    }
}

/// Parses a flat JSON config. Unknown keys are errors when `strict_keys` or the
/// document's own `strict` flag is set, warnings otherwise. With
/// `strict_assumptions` an inadmissible problem is an error.
pub fn parse_config(text: &str, strict_keys: bool, strict_assumptions: bool) -> Result<(LoadedConfig, ProblemSpec)> {
    let value: Value = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    let Value::Object(map) = &value else {
        return Err(Error::Config("top level must be a JSON object".into()));
    };
    let strict = strict_keys || map.get("strict").and_then(Value::as_bool).unwrap_or(false);
    let unknown: Vec<&String> = map.keys().filter(|k| !KNOWN_KEYS.contains(&k.as_str())).collect();
    let mut warnings = Vec::new();
    if !unknown.is_empty() {
        let msg = format!("unknown keys: {}", join(&unknown));
        if strict {
            return Err(Error::Config(msg));
        }
        warnings.push(msg);
    }
    let known: Map<String, Value> = map
        .iter()
        .filter(|(k, _)| KNOWN_KEYS.contains(&k.as_str()))
        .map(|(k, v)| (k.clone(), v.clone()))
        .collect();
    let config: RunConfig =
        serde_json::from_value(Value::Object(known)).map_err(|e| Error::Config(e.to_string()))?;
    let spec = config.to_problem()?;
    let report = spec.assumptions().clone();
    if !report.admissible() {
        let msg = format!("problem outside the admissible window: {}", report.notes.join("; "));
        if strict_assumptions {
            return Err(Error::Admissibility(msg));
        }
        warnings.push(msg);
    }
    Ok((
        LoadedConfig {
            config,
            report,
            warnings,
        },
        spec,
    ))
}

fn join(keys: &[&String]) -> String {
    keys.iter().map(|k| format!("`{k}`")).collect::<Vec<_>>().join(", ")
}

/// Reads and validates a config file, printing the admissibility report and
/// any warnings to stderr.
pub fn load_config(path: &Path, strict_keys: bool, strict_assumptions: bool) -> Result<(LoadedConfig, ProblemSpec)> {
    let text = fs::read_to_string(path)?;
    let (loaded, spec) = parse_config(&text, strict_keys, strict_assumptions)?;
    eprintln!("{}", format_report(&loaded.report));
    for w in &loaded.warnings {
        eprintln!("warning: {w}");
    }
    Ok((loaded, spec))
}

pub fn format_report(r: &AssumptionReport) -> String {
    let mut s = format!(
        "admissibility: exponent window ({:.6}, {:.6}) {}, dimension window {}",
        r.admissible_window.0,
        r.admissible_window.1,
        ok(r.g_window_ok),
        ok(r.dimension_window_ok)
    );
    if let (Some(hat), Some(bounds), Some(pass)) = (r.sigma_hat, r.sigma_bounds, r.sigma_ok) {
        for i in 0..3 {
            s.push_str(&format!(
                "\n  sigma{}: estimate {:.6e}, bound {:.6e} {}",
                i + 1,
                hat[i],
                bounds[i],
                ok(pass[i])
            ));
        }
    }
    for n in &r.notes {
        s.push_str(&format!("\n  note: {n}"));
    }
    s
}

fn ok(b: bool) -> &'static str {
    if b {
        "ok"
    } else {
        "VIOLATED"
    }
}

/// Metadata stored alongside a field payload.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldManifest {
    pub format_version: u32,
    pub d: usize,
    pub dims: Vec<usize>,
    pub box_length: f64,
    pub s1: f64,
    pub s2: f64,
    pub a: f64,
    /// Payload file name, relative to the manifest.
    pub payload: String,
    pub dtype: String,
    pub layout: String,
}

/// Physical parameters recorded with a field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldMeta {
    pub s1: f64,
    pub s2: f64,
    pub a: f64,
}

impl FieldMeta {
    pub fn of(spec: &ProblemSpec) -> Self {
        FieldMeta {
            s1: spec.s1(),
            s2: spec.s2(),
            a: spec.mass,
        }
    }
}

fn payload_path(manifest: &Path) -> PathBuf {
    let stem = manifest
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "field".into());
    manifest.with_file_name(format!("{stem}.bin"))
}

/// Writes `path` (JSON manifest) and a sibling `.bin` payload of little-endian `f64`.
pub fn save_field(u: &Field, meta: FieldMeta, path: &Path) -> Result<FieldManifest> {
    let g = u.grid();
    let payload = payload_path(path);
    let manifest = FieldManifest {
        format_version: FIELD_FORMAT_VERSION,
        d: g.dim(),
        dims: vec![g.n_per_dim(); g.dim()],
        box_length: g.box_length(),
        s1: meta.s1,
        s2: meta.s2,
        a: meta.a,
        payload: payload
            .file_name()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default(),
        dtype: "f64-le".into(),
        layout: "row-major".into(),
    };
    let bytes: Vec<u8> = u.values().iter().flat_map(|v| v.to_le_bytes()).collect();
    write_atomic(&payload, &bytes)?;
    write_atomic(path, serde_json::to_string_pretty(&manifest)?.as_bytes())?;
    Ok(manifest)
}

/// Reads a field written by [`save_field`].
pub fn load_field(path: &Path) -> Result<(Field, FieldManifest)> {
    let manifest: FieldManifest = serde_json::from_str(&fs::read_to_string(path)?)?;
    if manifest.format_version != FIELD_FORMAT_VERSION {
        return Err(Error::FieldFile(format!(
            "format version {} (expected {FIELD_FORMAT_VERSION})",
            manifest.format_version
        )));
    }
    if manifest.dtype != "f64-le" || manifest.layout != "row-major" {
        return Err(Error::FieldFile(format!(
            "unsupported dtype/layout {}/{}",
            manifest.dtype, manifest.layout
        )));
    }
    if manifest.dims.len() != manifest.d || manifest.dims.iter().any(|&n| n != manifest.dims[0]) {
        return Err(Error::FieldFile(format!(
            "dims {:?} do not describe a square grid of dimension {}",
            manifest.dims, manifest.d
        )));
    }
    let grid = make_grid(manifest.d, manifest.dims[0], manifest.box_length)?;
    let bytes = fs::read(path.with_file_name(&manifest.payload))?;
    let expected = 8 * grid.len();
    if bytes.len() != expected {
        return Err(Error::FieldFile(format!(
            "payload has {} bytes, manifest requires {expected}",
            bytes.len()
        )));
    }
    let values = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    Ok((Field::new(grid, values)?, manifest))
}

/// Writes to a temporary sibling, then renames over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

/// 17 significant digits, enough to reproduce any `f64`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// CSV text with a header row; every value printed by [`fmt_f64`].
pub fn csv_table(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{"d":1,"s1":0.4,"s2":0.8,"a":1,"nonlinearity":[{"mu":1,"p":6}],"potential":"none","N":512,"L":40}"#;

    #[test]
    fn minimal_config_is_valid() {
        let (loaded, spec) = parse_config(MINIMAL, true, true).unwrap();
        assert!(loaded.report.admissible());
        assert!(loaded.warnings.is_empty());
        assert_eq!(spec.grid().n_per_dim(), 512);
        assert_eq!(spec.params, SolverParams::default());
    }

    #[test]
    fn subcritical_exponent_is_reported() {
        let text = MINIMAL.replace("\"p\":6", "\"p\":4");
        let (loaded, _) = parse_config(&text, false, false).unwrap();
        assert!(!loaded.report.g_window_ok);
        assert!(loaded.warnings.iter().any(|w| w.contains("admissible")));
        assert!(matches!(parse_config(&text, false, true), Err(Error::Admissibility(_))));
    }

    #[test]
    fn missing_mass_names_the_field() {
        let text = MINIMAL.replace("\"a\":1,", "");
        let err = parse_config(&text, false, false).unwrap_err().to_string();
        assert!(err.contains("`a`"), "{err}");
    }

    #[test]
    fn unknown_keys_warn_or_fail() {
        let text = MINIMAL.replace("\"d\":1", "\"d\":1,\"colour\":\"red\"");
        let (loaded, _) = parse_config(&text, false, false).unwrap();
        assert!(loaded.warnings[0].contains("colour"));
        assert!(matches!(parse_config(&text, true, false), Err(Error::Config(_))));
        let inline = text.replace("\"d\":1", "\"d\":1,\"strict\":true");
        assert!(parse_config(&inline, false, false).is_err());
    }

    #[test]
    fn fmt_f64_round_trips() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, f64::MIN_POSITIVE] {
            assert_eq!(fmt_f64(x).parse::<f64>().unwrap(), x);
        }
    }
}
