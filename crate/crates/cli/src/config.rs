//! JSON scenario configuration.

use std::path::{Path, PathBuf};

use rand::Rng;
use riccati_geo::linalg::Mat;
use riccati_geo::random;
use riccati_geo::spd::SpdMatrix;
use serde::Deserialize;

use crate::error::{CliError, CliResult};

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub system: SystemSpec,
    #[serde(default)]
    pub r: Option<usize>,
    #[serde(default = "one")]
    pub mu: f64,
    pub dt: f64,
    pub t_end: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub initial: InitialSpec,
    #[serde(default)]
    pub metric: MetricChoice,
    #[serde(default)]
    pub are: AreSpec,
    #[serde(default)]
    pub checks: Vec<CheckSpec>,
    #[serde(default)]
    pub compare: Option<CompareSpec>,
    #[serde(default)]
    pub outputs: OutputSpec,
}

fn one() -> f64 {
    1.0
}

/// Built-in generator or explicit matrices, selected by `"generator"`.
#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "generator", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SystemSpec {
    Heat1d(Heat1dParams),
    RandomObservable(RandomObservableParams),
    Skew(SkewParams),
    Explicit(ExplicitMatrices),
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Heat1dParams {
    pub n: usize,
    #[serde(default = "one")]
    pub kappa: f64,
    /// Number of evenly spaced point sensors.
    #[serde(default = "one_usize")]
    pub sensors: usize,
    #[serde(default = "default_sigma")]
    pub sigma: f64,
    /// Constant shift of the diagonal (linear source or sink term).
    #[serde(default)]
    pub source: f64,
}

fn one_usize() -> usize {
    1
}

fn default_sigma() -> f64 {
    0.1
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomObservableParams {
    pub n: usize,
    #[serde(default = "one_usize")]
    pub outputs: usize,
    /// Spectrum of the symmetric part; evenly spaced in `[-2, 1]` when absent.
    #[serde(default)]
    pub spectrum: Option<Vec<f64>>,
    #[serde(default = "default_skew")]
    pub skew: f64,
    #[serde(default = "one")]
    pub sigma: f64,
}

fn default_skew() -> f64 {
    0.5
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SkewParams {
    pub n: usize,
    /// Rotation axis for `n = 3`; `A` is the cross-product matrix.
    #[serde(default)]
    pub omega: Option<[f64; 3]>,
    /// Angular rates of the 2x2 rotation blocks; all 1 when absent.
    #[serde(default)]
    pub rates: Option<Vec<f64>>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExplicitMatrices {
    pub a: Vec<Vec<f64>>,
    pub c: Vec<Vec<f64>>,
    pub g: Vec<Vec<f64>>,
    pub h: Vec<Vec<f64>>,
}

/// Specification of an SPD starting matrix.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatrixInit {
    #[default]
    Identity,
    ScaledIdentity(f64),
    Diagonal(Vec<f64>),
    /// Seeded random SPD matrix with log-eigenvalues in `[-spread, spread]`.
    RandomSpd(f64),
    Matrix(Vec<Vec<f64>>),
}

impl MatrixInit {
    pub fn build<R: Rng + ?Sized>(&self, n: usize, rng: &mut R, field: &str) -> CliResult<SpdMatrix> {
        let invalid = |e: riccati_geo::Error| CliError::config(field, e);
        match self {
            MatrixInit::Identity => Ok(SpdMatrix::identity(n)),
            MatrixInit::ScaledIdentity(c) => SpdMatrix::scaled_identity(n, *c).map_err(invalid),
            MatrixInit::Diagonal(d) => {
                if d.len() != n {
                    return Err(CliError::config(field, format!("expected {n} diagonal entries, got {}", d.len())));
                }
                SpdMatrix::from_diagonal(d).map_err(invalid)
            }
            MatrixInit::RandomSpd(spread) => {
                if !(*spread >= 0.0) || !spread.is_finite() {
                    return Err(CliError::config(field, "random_spd spread must be finite and non-negative"));
                }
                Ok(random::spd(rng, n, *spread))
            }
            MatrixInit::Matrix(rows) => {
                let m = matrix_from_rows(rows, field)?;
                if m.shape() != (n, n) {
                    return Err(CliError::config(field, format!("expected {n}x{n}, got {}x{}", m.nrows(), m.ncols())));
                }
                SpdMatrix::new(m).map_err(invalid)
            }
        }
    }
}

/// Starting frame of the low-rank filter.
#[derive(Clone, Copy, Debug, Default, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum FrameInit {
    #[default]
    Random,
    Leading,
    Dominant,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSpec {
    #[serde(default)]
    pub p0: MatrixInit,
    #[serde(default)]
    pub s0: MatrixInit,
    #[serde(default)]
    pub u0: FrameInit,
    /// True initial state; zero when absent.
    #[serde(default)]
    pub x0: Option<Vec<f64>>,
    /// Initial estimate; zero when absent.
    #[serde(default)]
    pub x_hat0: Option<Vec<f64>>,
}

#[derive(Clone, Copy, Debug, Default, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum MetricChoice {
    #[default]
    Spd,
    Approx,
    Grassmann,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AreSpec {
    #[serde(default = "default_are_tol")]
    pub tol: f64,
    #[serde(default)]
    pub max_steps: Option<usize>,
}

fn default_are_tol() -> f64 {
    1e-10
}

impl Default for AreSpec {
    fn default() -> Self {
        AreSpec { tol: default_are_tol(), max_steps: None }
    }
}

/// One entry of the `contraction` subcommand, selected by `"kind"`.
#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum CheckSpec {
    RiccatiContraction(RiccatiContractionCheck),
    SubspaceRate(SubspaceRateCheck),
    ConstantDistance(ConstantDistanceCheck),
    EventualContraction(EventualContractionCheck),
    PairwiseDistance(PairwiseDistanceCheck),
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RiccatiContractionCheck {
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub p1: MatrixInit,
    #[serde(default = "default_second_start")]
    pub p2: MatrixInit,
    #[serde(default)]
    pub slack: Option<f64>,
    #[serde(default)]
    pub t_end: Option<f64>,
    #[serde(default)]
    pub dt: Option<f64>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubspaceRateCheck {
    #[serde(default)]
    pub name: Option<String>,
    /// Overrides the system's `A`.
    #[serde(default)]
    pub a: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub r: Option<usize>,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default)]
    pub ratio_threshold: Option<f64>,
    #[serde(default)]
    pub tail_fraction: Option<f64>,
    #[serde(default)]
    pub t_end: Option<f64>,
    #[serde(default)]
    pub dt: Option<f64>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstantDistanceCheck {
    #[serde(default)]
    pub name: Option<String>,
    /// Initial principal angle between the two rank-one starts.
    #[serde(default = "default_angle")]
    pub angle: f64,
    #[serde(default = "default_constant_tol")]
    pub tolerance: f64,
    #[serde(default)]
    pub t_end: Option<f64>,
    #[serde(default)]
    pub dt: Option<f64>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EventualContractionCheck {
    #[serde(default)]
    pub name: Option<String>,
    /// Log-eigenvalue spread of the random starting factors.
    #[serde(default = "default_spread")]
    pub spread: f64,
    #[serde(default)]
    pub angle_tol: Option<f64>,
    #[serde(default)]
    pub residual_tol: Option<f64>,
    #[serde(default)]
    pub min_r_squared: Option<f64>,
    #[serde(default)]
    pub tail_fraction: Option<f64>,
    #[serde(default)]
    pub t_end: Option<f64>,
    #[serde(default)]
    pub dt: Option<f64>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairwiseDistanceCheck {
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub start1: MatrixInit,
    #[serde(default = "default_second_start")]
    pub start2: MatrixInit,
    #[serde(default)]
    pub t_end: Option<f64>,
    #[serde(default)]
    pub dt: Option<f64>,
}

fn default_second_start() -> MatrixInit {
    MatrixInit::RandomSpd(1.0)
}

fn default_delta() -> f64 {
    1e-3
}

fn default_angle() -> f64 {
    0.3
}

fn default_constant_tol() -> f64 {
    1e-9
}

fn default_spread() -> f64 {
    0.5
}

macro_rules! each_check {
    ($check:expr, $c:ident => $body:expr) => {
        match $check {
            CheckSpec::RiccatiContraction($c) => $body,
            CheckSpec::SubspaceRate($c) => $body,
            CheckSpec::ConstantDistance($c) => $body,
            CheckSpec::EventualContraction($c) => $body,
            CheckSpec::PairwiseDistance($c) => $body,
        }
    };
}

impl CheckSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            CheckSpec::RiccatiContraction(_) => "riccati-contraction",
            CheckSpec::SubspaceRate(_) => "subspace-rate",
            CheckSpec::ConstantDistance(_) => "constant-distance",
            CheckSpec::EventualContraction(_) => "eventual-contraction",
            CheckSpec::PairwiseDistance(_) => "pairwise-distance",
        }
    }

    pub fn name(&self) -> String {
        each_check!(self, c => c.name.clone()).unwrap_or_else(|| self.kind().to_string())
    }

    /// Per-check `(t_end, dt)` overrides.
    pub fn horizon(&self) -> (Option<f64>, Option<f64>) {
        each_check!(self, c => (c.t_end, c.dt))
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareSpec {
    #[serde(default = "default_sizes")]
    pub sizes: Vec<usize>,
    /// Rank of the low-rank filter; falls back to the scenario `r`.
    #[serde(default)]
    pub r: Option<usize>,
    /// Number of timed filter steps per size.
    #[serde(default = "default_steps")]
    pub steps: usize,
}

fn default_sizes() -> Vec<usize> {
    vec![100, 200, 400]
}

fn default_steps() -> usize {
    20
}

impl Default for CompareSpec {
    fn default() -> Self {
        CompareSpec { sizes: default_sizes(), r: None, steps: default_steps() }
    }
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default)]
    pub dir: Option<PathBuf>,
    #[serde(default)]
    pub svg: bool,
}

impl ScenarioConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io { path: path.to_path_buf(), source })?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn parse(text: &str) -> CliResult<Self> {
        let mut de = serde_json::Deserializer::from_str(text);
        let config: ScenarioConfig = serde_path_to_error::deserialize(&mut de).map_err(|e| {
            let path = e.path().clone();
            let (field, message) = refine(text, &path).unwrap_or_else(|| (path.to_string(), e.into_inner().to_string()));
            CliError::config(if field == "." { "<root>" } else { &field }, message)
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> CliResult<()> {
        positive("dt", self.dt)?;
        positive("t_end", self.t_end)?;
        if !(self.mu >= 0.0) || !self.mu.is_finite() {
            return Err(CliError::config("mu", "must be finite and non-negative"));
        }
        if self.r == Some(0) {
            return Err(CliError::config("r", "rank must be positive"));
        }
        if !(self.are.tol > 0.0) {
            return Err(CliError::config("are.tol", "must be positive"));
        }
        for (i, check) in self.checks.iter().enumerate() {
            let (t_end, dt) = check.horizon();
            if let Some(v) = t_end {
                positive(&format!("checks[{i}].t_end"), v)?;
            }
            if let Some(v) = dt {
                positive(&format!("checks[{i}].dt"), v)?;
            }
        }
        Ok(())
    }

    pub fn output_dir(&self, override_dir: Option<&Path>) -> PathBuf {
        override_dir
            .map(Path::to_path_buf)
            .or_else(|| self.outputs.dir.clone())
            .unwrap_or_else(|| PathBuf::from("."))
    }

    pub fn require_rank(&self) -> CliResult<usize> {
        self.r.ok_or_else(|| CliError::config("r", "this subcommand needs a rank"))
    }
}

/// Field path and message of an error raised inside a `generator` or `kind`
/// tagged object, found by deserializing that object as its variant type.
fn refine(text: &str, path: &serde_path_to_error::Path) -> Option<(String, String)> {
    use serde_path_to_error::Segment;
    let root: serde_json::Value = serde_json::from_str(text).ok()?;
    let mut node = &root;
    for segment in path.iter() {
        node = match segment {
            Segment::Map { key } => node.get(key)?,
            Segment::Seq { index } => node.get(index)?,
            _ => return None,
        };
    }
    let mut object = node.as_object()?.clone();
    let (tag, is_system) = match (object.remove("generator"), object.remove("kind")) {
        (Some(tag), None) => (tag, true),
        (None, Some(tag)) => (tag, false),
        _ => return None,
    };
    let value = serde_json::Value::Object(object);
    fn inner<T: serde::de::DeserializeOwned>(value: serde_json::Value) -> Option<(String, String)> {
        let err = serde_path_to_error::deserialize::<_, T>(value).err()?;
        Some((err.path().to_string(), err.into_inner().to_string()))
    }
    let (field, message) = match (is_system, tag.as_str()?) {
        (true, "heat1d") => inner::<Heat1dParams>(value),
        (true, "random-observable") => inner::<RandomObservableParams>(value),
        (true, "skew") => inner::<SkewParams>(value),
        (true, "explicit") => inner::<ExplicitMatrices>(value),
        (false, "riccati-contraction") => inner::<RiccatiContractionCheck>(value),
        (false, "subspace-rate") => inner::<SubspaceRateCheck>(value),
        (false, "constant-distance") => inner::<ConstantDistanceCheck>(value),
        (false, "eventual-contraction") => inner::<EventualContractionCheck>(value),
        (false, "pairwise-distance") => inner::<PairwiseDistanceCheck>(value),
        _ => None,
    }?;
    let outer = path.to_string();
    let field = if field == "." { outer } else { format!("{outer}.{field}") };
    Some((field, message))
}

fn positive(field: &str, v: f64) -> CliResult<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(CliError::config(field, format!("must be positive and finite, got {v}")))
    }
}

pub fn matrix_from_rows(rows: &[Vec<f64>], field: &str) -> CliResult<Mat> {
    let cols = rows.first().map_or(0, Vec::len);
    if rows.is_empty() || cols == 0 {
        return Err(CliError::config(field, "matrix must be non-empty"));
    }
    if let Some(i) = rows.iter().position(|row| row.len() != cols) {
        return Err(CliError::config(field, format!("row {i} has {} entries, expected {cols}", rows[i].len())));
    }
    Ok(Mat::from_fn(rows.len(), cols, |i, j| rows[i][j]))
}

pub fn vector_or_zero(v: &Option<Vec<f64>>, n: usize, field: &str) -> CliResult<riccati_geo::linalg::Vector> {
    match v {
        None => Ok(riccati_geo::linalg::Vector::zeros(n)),
        Some(values) if values.len() == n => Ok(riccati_geo::linalg::Vector::from_column_slice(values)),
        Some(values) => Err(CliError::config(field, format!("expected {n} entries, got {}", values.len()))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_generator_config() {
        let cfg = ScenarioConfig::parse(
            r#"{"system": {"generator": "heat1d", "n": 5, "kappa": 0.5}, "dt": 0.01, "t_end": 1.0, "r": 2}"#,
        )
        .unwrap();
        match cfg.system {
            SystemSpec::Heat1d(p) => {
                assert_eq!(p.n, 5);
                assert_eq!(p.kappa, 0.5);
                assert_eq!(p.sensors, 1);
            }
            other => panic!("unexpected {other:?}"),
        }
        assert_eq!(cfg.mu, 1.0);
        assert_eq!(cfg.metric, MetricChoice::Spd);
    }

    #[test]
    fn reports_field_path() {
        let err = ScenarioConfig::parse(
            r#"{"system": {"generator": "heat1d", "n": 5, "kappa": "hot"}, "dt": 0.01, "t_end": 1.0}"#,
        )
        .unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("system.kappa"), "{msg}");
        assert_eq!(err.exit_code(), 2);

        let err = ScenarioConfig::parse(r#"{"system": {"generator": "heat1d", "n": 5}, "dt": -1.0, "t_end": 1.0}"#)
            .unwrap_err();
        assert!(err.to_string().contains("dt"));

        let err = ScenarioConfig::parse(
            r#"{"system": {"generator": "skew", "n": 3}, "dt": 0.1, "t_end": 1.0,
                "checks": [{"kind": "constant-distance"}, {"kind": "constant-distance", "angel": 0.2}]}"#,
        )
        .unwrap_err();
        assert!(err.to_string().contains("checks[1].angel"), "{err}");
    }

    #[test]
    fn rejects_unknown_generator_and_fields() {
        assert!(ScenarioConfig::parse(r#"{"system": {"generator": "wave"}, "dt": 0.1, "t_end": 1.0}"#).is_err());
        assert!(ScenarioConfig::parse(
            r#"{"system": {"generator": "skew", "n": 3}, "dt": 0.1, "t_end": 1.0, "bogus": 1}"#
        )
        .is_err());
    }

    #[test]
    fn matrix_init_variants() {
        let mut rng = random::rng(0);
        let parse = |s: &str| serde_json::from_str::<MatrixInit>(s).unwrap();
        assert_eq!(parse(r#""identity""#).build(2, &mut rng, "p").unwrap(), SpdMatrix::identity(2));
        let p = parse(r#"{"scaled_identity": 3.0}"#).build(2, &mut rng, "p").unwrap();
        assert_eq!(p.as_matrix()[(1, 1)], 3.0);
        assert!(parse(r#"{"diagonal": [1.0]}"#).build(2, &mut rng, "p").is_err());
        assert!(parse(r#"{"matrix": [[1.0, 2.0], [2.0, 1.0]]}"#).build(2, &mut rng, "p").is_err());
        assert!(parse(r#"{"random_spd": 1.0}"#).build(3, &mut rng, "p").is_ok());
    }
}
