//! Run configuration: a strict JSON file whose blocks are read by the
//! commands that need them. Flags override file values, which override defaults.

use std::path::Path;

use degennes_core::boundary_geometry::CurveDescriptor;
use degennes_core::magnetic_eigensolver_2d::{BoundaryCondition, GammaProfile, SolverSettings, TargetSet};
use degennes_core::semiclassical_harness::{LocalizationRequest, ProblemTemplate, TheoremId};
use degennes_core::theta_profile::ThetaSettings;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Version that wrote the config; a mismatch is reported, not rejected.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub version: Option<String>,
    /// Seed for randomized checks (random gauges).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<ThetaBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub profile: Option<ProfileBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub problem: Option<ProblemBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solver: Option<SolverSettings>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub localize: Option<LocalizeBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verify: Option<VerifyBlock>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThetaBlock {
    pub gamma: Vec<f64>,
    #[serde(default)]
    pub settings: ThetaSettings,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileBlock {
    pub gamma: f64,
    #[serde(default = "half")]
    pub alpha: f64,
    #[serde(default = "one")]
    pub beta: f64,
    #[serde(default = "small_h")]
    pub h: f64,
}

fn half() -> f64 {
    0.5
}

fn one() -> f64 {
    1.0
}

fn small_h() -> f64 {
    0.01
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemBlock {
    pub curve: CurveDescriptor,
    /// Ignored by `sweep`, which takes its own list.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h: Option<f64>,
    pub alpha: f64,
    pub gamma: GammaProfile,
    #[serde(default)]
    pub boundary: BoundaryCondition,
}

impl ProblemBlock {
    pub fn template(&self) -> ProblemTemplate {
        ProblemTemplate {
            curve: self.curve.clone(),
            alpha: self.alpha,
            gamma: self.gamma,
            boundary: self.boundary,
            localization: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepBlock {
    pub h: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub theorems: Vec<TheoremId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub localization: Option<LocalizationRequest>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LocalizeBlock {
    pub target: TargetSet,
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyBlock {
    pub plan: String,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| CliError::input(format!("{}: {}", path.display(), e.message)))
    }

    /// Strict parse; the error names the offending key as a JSON pointer.
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let pointer = json_pointer(e.path(), &e.inner().to_string());
            CliError::input(format!("{pointer}: {}", e.inner()))
        })
    }

    /// SHA-256 of the canonical JSON of the config.
    pub fn hash(&self) -> String {
        let text = degennes_core::io::canonical_json(self).expect("config serializes");
        hex::encode(Sha256::digest(text.as_bytes()))
    }

    pub fn check_version(&self) {
        if let Some(v) = &self.version {
            if v != VERSION {
                eprintln!("warning: config written for version {v}, running {VERSION}");
            }
        }
    }
}

fn json_pointer(path: &serde_path_to_error::Path, message: &str) -> String {
    use serde_path_to_error::Segment;
    let mut parts: Vec<String> = Vec::new();
    for seg in path.iter() {
        match seg {
            Segment::Seq { index } => parts.push(index.to_string()),
            Segment::Map { key } => parts.push(key.clone()),
            Segment::Enum { variant } => parts.push(variant.clone()),
            Segment::Unknown => {}
        }
    }
    // Unknown keys inside tagged enums are reported by message only.
    if let Some(key) = message
        .strip_prefix("unknown field `")
        .and_then(|r| r.split('`').next())
    {
        if parts.last().map(String::as_str) != Some(key) {
            parts.push(key.to_string());
        }
    }
    parts
        .iter()
        .map(|p| format!("/{}", p.replace('~', "~0").replace('/', "~1")))
        .collect()
}

/// `a:b:step` or a single value.
pub fn parse_range(spec: &str) -> Result<Vec<f64>, String> {
    let num = |s: &str| s.trim().parse::<f64>().map_err(|_| format!("not a number: {s:?}"));
    let parts: Vec<&str> = spec.split(':').collect();
    match parts.as_slice() {
        [v] => Ok(vec![num(v)?]),
        [a, b, step] => {
            let (a, b, step) = (num(a)?, num(b)?, num(step)?);
            if !(step > 0.0) || !(b >= a) || !a.is_finite() || !b.is_finite() {
                return Err(format!("range {spec:?} needs start ≤ stop and a positive step"));
            }
            let n = ((b - a) / step + 1e-9).floor() as usize + 1;
            if n > 100_000 {
                return Err(format!("range {spec:?} has too many points"));
            }
            Ok((0..n).map(|k| a + k as f64 * step).collect())
        }
        _ => Err(format!("expected a value or start:stop:step, got {spec:?}")),
    }
}

/// Comma-separated list of numbers.
pub fn parse_list(spec: &str) -> Result<Vec<f64>, String> {
    spec.split(',')
        .map(|s| s.trim().parse::<f64>().map_err(|_| format!("not a number: {s:?}")))
        .collect()
}

/// `circle:R` or `ellipse:A,B`.
pub fn parse_curve(spec: &str) -> Result<CurveDescriptor, String> {
    let (kind, args) = spec
        .split_once(':')
        .ok_or_else(|| format!("expected circle:R or ellipse:A,B, got {spec:?}"))?;
    let v = parse_list(args)?;
    match (kind, v.as_slice()) {
        ("circle", [r]) => Ok(CurveDescriptor::Circle { radius: *r }),
        ("ellipse", [a, b]) => Ok(CurveDescriptor::Ellipse { a: *a, b: *b }),
        _ => Err(format!("expected circle:R or ellipse:A,B, got {spec:?}")),
    }
}

/// A constant, or `cos:MEAN,AMPLITUDE`.
pub fn parse_gamma(spec: &str) -> Result<GammaProfile, String> {
    if let Some(args) = spec.strip_prefix("cos:") {
        match parse_list(args)?.as_slice() {
            [mean, amplitude] => Ok(GammaProfile::Cosine {
                mean: *mean,
                amplitude: *amplitude,
            }),
            _ => Err(format!("expected cos:MEAN,AMPLITUDE, got {spec:?}")),
        }
    } else {
        spec.trim()
            .parse::<f64>()
            .map(GammaProfile::constant)
            .map_err(|_| format!("expected a number or cos:MEAN,AMPLITUDE, got {spec:?}"))
    }
}

/// `boundary`, `points:X,Y;X,Y` or `arcs:S,S`.
pub fn parse_target(spec: &str) -> Result<TargetSet, String> {
    if spec == "boundary" {
        return Ok(TargetSet::Boundary);
    }
    if let Some(args) = spec.strip_prefix("points:") {
        let points = args
            .split(';')
            .map(|p| match parse_list(p)?.as_slice() {
                [x, y] => Ok([*x, *y]),
                _ => Err(format!("point {p:?} needs two coordinates")),
            })
            .collect::<Result<Vec<_>, String>>()?;
        return Ok(TargetSet::Points { points });
    }
    if let Some(args) = spec.strip_prefix("arcs:") {
        return Ok(TargetSet::Arcs {
            centers: parse_list(args)?,
        });
    }
    Err(format!("expected boundary, points:X,Y;.. or arcs:S,.., got {spec:?}"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn range_counts_endpoints() {
        assert_eq!(parse_range("-2:2:0.5").unwrap().len(), 9);
        assert_eq!(parse_range("0").unwrap(), vec![0.0]);
        assert!(parse_range("2:-2:0.5").is_err());
        assert!(parse_range("0:1:0").is_err());
    }

    #[test]
    fn config_round_trips() {
        let text = r#"{
            "seed": 3,
            "problem": {"curve": {"type": "ellipse", "a": 2, "b": 1}, "h": 0.05, "alpha": 1,
                        "gamma": {"type": "cosine", "mean": 0, "amplitude": 1}},
            "solver": {"tol": 1e-8},
            "sweep": {"h": [0.08, 0.04], "theorems": ["kach1"]},
            "theta": {"gamma": [0, 1]}
        }"#;
        let c = RunConfig::parse(text).unwrap();
        let again = RunConfig::parse(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(c, again);
        assert_eq!(c.hash(), again.hash());
        assert_eq!(c.solver.unwrap().basis, SolverSettings::default().basis);
    }

    #[test]
    fn unknown_keys_point_at_themselves() {
        let e = RunConfig::parse(r#"{"problem": {"curve": {"type": "ellipse", "a": 2, "bb": 1}, "alpha": 1, "gamma": {"type": "constant", "value": 0}}}"#)
            .unwrap_err();
        assert!(e.message.starts_with("/problem/curve/bb:"), "{}", e.message);
        let e = RunConfig::parse(r#"{"solver": {"tol": 1e-8, "tolerance": 1}}"#).unwrap_err();
        assert!(e.message.starts_with("/solver/tolerance:"), "{}", e.message);
        let e = RunConfig::parse(r#"{"sede": 1}"#).unwrap_err();
        assert!(e.message.starts_with("/sede:"), "{}", e.message);
    }

    #[test]
    fn flag_syntax() {
        assert_eq!(
            parse_curve("ellipse:2,1").unwrap(),
            CurveDescriptor::Ellipse { a: 2.0, b: 1.0 }
        );
        assert!(parse_curve("square:1").is_err());
        assert_eq!(
            parse_gamma("cos:1,0.5").unwrap(),
            GammaProfile::Cosine {
                mean: 1.0,
                amplitude: 0.5
            }
        );
        assert_eq!(parse_gamma("-1").unwrap(), GammaProfile::constant(-1.0));
        assert_eq!(
            parse_target("points:2,0;-2,0").unwrap(),
            TargetSet::Points {
                points: vec![[2.0, 0.0], [-2.0, 0.0]]
            }
        );
        assert!(parse_target("points:2").is_err());
    }
}
