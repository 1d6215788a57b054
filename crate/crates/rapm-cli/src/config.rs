//! Run configuration: a single JSON file describing the problem, the solver
//! list, and output options. Unknown keys are rejected everywhere — a typo in
//! a parameter name must never silently fall back to a default. A previously
//! emitted run manifest is also accepted wherever a config is expected (its
//! embedded `config` object is extracted), so every run can be reproduced
//! from its own manifest.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use rapm::solvers::{EtaMode, GammaRule, Variant};

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemConfig,
    pub solvers: Vec<SolverEntry>,
    /// Shared starting point; zero vector when absent.
    #[serde(default)]
    pub x0: Option<Vec<f64>>,
    #[serde(default)]
    pub output_dir: Option<String>,
    /// Budget for long-run reference optima on problems without closed-form
    /// ground truth.
    #[serde(default = "default_reference_budget")]
    pub reference_budget: usize,
    #[serde(default)]
    pub certify: CertifyToggles,
    /// Record wall-clock per iterate. Off by default: timing columns break
    /// byte-identical reruns.
    #[serde(default)]
    pub emit_timings: bool,
}

fn default_reference_budget() -> usize {
    30_000
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertifyToggles {
    #[serde(default = "default_true")]
    pub lemma_chain: bool,
    #[serde(default = "default_true")]
    pub theorem1: bool,
}

fn default_true() -> bool {
    true
}

impl Default for CertifyToggles {
    fn default() -> Self {
        CertifyToggles { lemma_chain: true, theorem1: true }
    }
}

/// Problem section, discriminated by `"kind"`. Deserialized by hand so that
/// unknown keys are rejected even across the discriminator (serde's internal
/// tagging cannot enforce `deny_unknown_fields`).
#[derive(Debug, Clone)]
pub enum ProblemConfig {
    WeakSharpBox(WeakSharpBoxConfig),
    SparseRegression(SparseRegressionConfig),
    Csv(CsvProblemConfig),
}

/// Either the explicit form (`c`, `p`) or the seeded form (`n`,
/// `n_positive`, `seed`) — exactly one of the two.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeakSharpBoxConfig {
    #[serde(default)]
    pub c: Option<Vec<f64>>,
    #[serde(default)]
    pub p: Option<Vec<f64>>,
    #[serde(default)]
    pub n: Option<usize>,
    #[serde(default)]
    pub n_positive: Option<usize>,
    #[serde(default)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SparseRegressionConfig {
    pub m_tr: usize,
    pub m_val: usize,
    pub n: usize,
    pub k_sparse: usize,
    pub noise_sigma: f64,
    pub radius: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CsvProblemConfig {
    pub a_tr: String,
    pub b_tr: String,
    pub a_val: String,
    pub b_val: String,
    pub radius: f64,
}

impl<'de> Deserialize<'de> for ProblemConfig {
    fn deserialize<D>(deserializer: D) -> Result<Self, D::Error>
    where
        D: serde::Deserializer<'de>,
    {
        use serde::de::Error as _;
        let v = Value::deserialize(deserializer)?;
        let obj = v
            .as_object()
            .ok_or_else(|| D::Error::custom("problem section must be an object with a \"kind\" key"))?;
        let kind = obj
            .get("kind")
            .and_then(Value::as_str)
            .ok_or_else(|| D::Error::custom("problem section needs a string \"kind\" key"))?
            .to_string();
        let mut rest = obj.clone();
        rest.remove("kind");
        let rest = Value::Object(rest);
        match kind.as_str() {
            "weak_sharp_box" => serde_json::from_value(rest)
                .map(ProblemConfig::WeakSharpBox)
                .map_err(|e| D::Error::custom(format!("weak_sharp_box problem: {e}"))),
            "sparse_regression" => serde_json::from_value(rest)
                .map(ProblemConfig::SparseRegression)
                .map_err(|e| D::Error::custom(format!("sparse_regression problem: {e}"))),
            "csv" => serde_json::from_value(rest)
                .map(ProblemConfig::Csv)
                .map_err(|e| D::Error::custom(format!("csv problem: {e}"))),
            other => Err(D::Error::custom(format!(
                "unknown problem kind {other:?}; expected weak_sharp_box, sparse_regression, or csv"
            ))),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverEntry {
    /// One of: rapm, rpm, bigsam, airg, fista_lower.
    pub variant: String,
    /// Iteration budget K.
    pub k: usize,
    /// `"budget_scaled"` (default), `"weak_sharp"`, or `{"fixed": value}`.
    #[serde(default)]
    pub eta_mode: EtaModeConfig,
    /// `"max_step"` (default) or `{"scaled": factor}`.
    #[serde(default)]
    pub gamma_rule: GammaRuleConfig,
    #[serde(default = "default_record_every")]
    pub record_every: usize,
}

fn default_record_every() -> usize {
    1
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EtaModeConfig {
    Fixed(f64),
    BudgetScaled,
    WeakSharp,
}

impl Default for EtaModeConfig {
    fn default() -> Self {
        EtaModeConfig::BudgetScaled
    }
}

impl From<EtaModeConfig> for EtaMode {
    fn from(c: EtaModeConfig) -> EtaMode {
        match c {
            EtaModeConfig::Fixed(v) => EtaMode::Fixed(v),
            EtaModeConfig::BudgetScaled => EtaMode::BudgetScaled,
            EtaModeConfig::WeakSharp => EtaMode::WeakSharp,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GammaRuleConfig {
    MaxStep,
    Scaled(f64),
}

impl Default for GammaRuleConfig {
    fn default() -> Self {
        GammaRuleConfig::MaxStep
    }
}

impl From<GammaRuleConfig> for GammaRule {
    fn from(c: GammaRuleConfig) -> GammaRule {
        match c {
            GammaRuleConfig::MaxStep => GammaRule::MaxStep,
            GammaRuleConfig::Scaled(f) => GammaRule::Scaled(f),
        }
    }
}

impl SolverEntry {
    pub fn parse_variant(&self) -> Result<Variant, String> {
        Variant::parse(&self.variant).ok_or_else(|| {
            format!(
                "unknown solver variant {:?}; expected rapm, rpm, bigsam, airg, or fista_lower",
                self.variant
            )
        })
    }
}

impl RunConfig {
    /// Structural checks beyond what serde enforces. Problem construction
    /// (which validates kind-specific parameters like a negative radius)
    /// happens separately in the command layer.
    pub fn validate(&self) -> Result<(), String> {
        if self.solvers.is_empty() {
            return Err("config lists no solvers".into());
        }
        for (i, s) in self.solvers.iter().enumerate() {
            s.parse_variant().map_err(|e| format!("solvers[{i}]: {e}"))?;
            if s.k == 0 {
                return Err(format!("solvers[{i}]: k must be ≥ 1"));
            }
            if s.record_every == 0 {
                return Err(format!("solvers[{i}]: record_every must be ≥ 1"));
            }
        }
        if let ProblemConfig::WeakSharpBox(w) = &self.problem {
            let explicit = w.c.is_some() || w.p.is_some();
            let seeded = w.n.is_some() || w.n_positive.is_some() || w.seed.is_some();
            if explicit && seeded {
                return Err(
                    "weak_sharp_box: give either {c, p} or {n, n_positive, seed}, not both".into(),
                );
            }
            if explicit && (w.c.is_none() || w.p.is_none()) {
                return Err("weak_sharp_box: explicit form needs both c and p".into());
            }
            if seeded && (w.n.is_none() || w.n_positive.is_none() || w.seed.is_none()) {
                return Err(
                    "weak_sharp_box: seeded form needs all of n, n_positive, and seed".into(),
                );
            }
            if !explicit && !seeded {
                return Err(
                    "weak_sharp_box: give either {c, p} or {n, n_positive, seed}".into(),
                );
            }
        }
        if let ProblemConfig::Csv(c) = &self.problem {
            for path in [&c.a_tr, &c.b_tr, &c.a_val, &c.b_val] {
                if !Path::new(path).is_file() {
                    return Err(format!("csv problem references a missing file: {path}"));
                }
            }
        }
        if self.reference_budget == 0 {
            return Err("reference_budget must be ≥ 1".into());
        }
        Ok(())
    }

    /// The seed the problem was generated from, when the kind has one.
    pub fn problem_seed(&self) -> Option<u64> {
        match &self.problem {
            ProblemConfig::WeakSharpBox(w) => w.seed,
            ProblemConfig::SparseRegression(s) => Some(s.seed),
            ProblemConfig::Csv(_) => None,
        }
    }
}

/// Parses a config file, accepting either a bare [`RunConfig`] object or a
/// previously emitted manifest (whose `config` member is then used). Returns
/// the typed config together with the effective config as a JSON value — the
/// exact object that will be embedded in any manifest this run emits.
pub fn load_config(path: &Path) -> Result<(RunConfig, Value), String> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
    let mut value: Value = serde_json::from_str(&text)
        .map_err(|e| format!("{}: invalid JSON: {e}", path.display()))?;
    if value.get("manifest_version").is_some() {
        value = value
            .get("config")
            .cloned()
            .ok_or_else(|| format!("{}: manifest has no config member", path.display()))?;
    }
    let config: RunConfig = serde_json::from_value(value.clone())
        .map_err(|e| format!("{}: {e}", path.display()))?;
    config.validate().map_err(|e| format!("{}: {e}", path.display()))?;
    Ok((config, value))
}

/// Applies a `--seed` override to both the typed config and the effective
/// JSON (so emitted manifests reproduce the overridden run). Only seeded
/// problem kinds accept one.
pub fn apply_seed_override(
    config: &mut RunConfig,
    effective: &mut Value,
    seed: u64,
) -> Result<(), String> {
    match &mut config.problem {
        ProblemConfig::WeakSharpBox(w) => {
            if w.seed.is_none() {
                return Err(
                    "--seed applies only to seeded problems; this weak_sharp_box is explicit"
                        .into(),
                );
            }
            w.seed = Some(seed);
        }
        ProblemConfig::SparseRegression(s) => s.seed = seed,
        ProblemConfig::Csv(_) => {
            return Err("--seed does not apply to csv problems".into());
        }
    }
    effective["problem"]["seed"] = Value::from(seed);
    Ok(())
}

/// Applies an `--output-dir` override to both representations.
pub fn apply_output_dir_override(config: &mut RunConfig, effective: &mut Value, dir: &str) {
    config.output_dir = Some(dir.to_string());
    effective["output_dir"] = Value::from(dir);
}
