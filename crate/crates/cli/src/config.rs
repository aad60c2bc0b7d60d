//! Run configuration: TOML with a fixed schema, validated in full before any
//! computation starts.

use std::path::{Path, PathBuf};

use quasilab_core::potential::parse_sample_table;
use quasilab_core::{
    builtin_model, liouville_builder, BuiltinModel, Frequency, FrequencyKind, LyapunovParams,
    ModelParams, PotentialSpec,
};
use serde::Deserialize;

use crate::CliError;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub frequency: FrequencyBlock,
    pub potential: PotentialBlock,
    pub scan: Option<ScanBlock>,
    #[serde(default)]
    pub lyapunov: LyapunovBlock,
    #[serde(default)]
    pub gordon: GordonBlock,
    pub output: OutputBlock,
}

/// `kind` selects which of the remaining keys are required.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrequencyBlock {
    pub kind: String,
    pub quotients: Option<Vec<u64>>,
    pub depth: Option<usize>,
    pub p: Option<u64>,
    pub q: Option<u64>,
    pub beta: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialBlock {
    pub name: String,
    pub lambda: Option<f64>,
    pub gamma: Option<f64>,
    pub table_path: Option<PathBuf>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanBlock {
    pub e_min: Option<f64>,
    pub e_max: Option<f64>,
    pub n_points: Option<usize>,
    /// Explicit grid; replaces `e_min`/`e_max`/`n_points`.
    pub energies: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LyapunovBlock {
    #[serde(default = "default_length")]
    pub length: f64,
    #[serde(default = "default_phases")]
    pub n_phases: usize,
    #[serde(default = "default_h")]
    pub h: f64,
}

impl Default for LyapunovBlock {
    fn default() -> Self {
        LyapunovBlock {
            length: default_length(),
            n_phases: default_phases(),
            h: default_h(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GordonBlock {
    pub epsilon: Option<f64>,
    #[serde(default = "default_margin")]
    pub margin: f64,
    #[serde(default = "default_max_q")]
    pub max_q: u64,
    #[serde(default = "default_n_phi")]
    pub n_phi: usize,
}

impl Default for GordonBlock {
    fn default() -> Self {
        GordonBlock {
            epsilon: None,
            margin: default_margin(),
            max_q: default_max_q(),
            n_phi: default_n_phi(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputBlock {
    pub csv_path: PathBuf,
    pub svg_path: Option<PathBuf>,
    pub summary_path: Option<PathBuf>,
}

fn default_length() -> f64 {
    quasilab_core::lyapunov::DEFAULT_LENGTH
}
fn default_phases() -> usize {
    quasilab_core::lyapunov::DEFAULT_PHASES
}
fn default_h() -> f64 {
    quasilab_core::lyapunov::DEFAULT_H
}
fn default_margin() -> f64 {
    quasilab_core::gordon::DEFAULT_MARGIN
}
fn default_max_q() -> u64 {
    200
}
fn default_n_phi() -> usize {
    quasilab_core::gordon::DEFAULT_N_PHI
}

/// Fraction of `β̂` used for `ε` when the config leaves it unset.
pub const DEFAULT_EPSILON_FRACTION: f64 = 0.05;
/// `ε` used for rational frequencies, whose `β̂` is infinite.
pub const RATIONAL_EPSILON: f64 = 0.05;

/// A fully validated configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub frequency: Frequency,
    pub frequency_label: String,
    pub potential: PotentialSpec,
    pub energies: Option<Vec<f64>>,
    pub lyapunov: LyapunovParams,
    pub epsilon: f64,
    pub margin: f64,
    pub max_q: u64,
    pub n_phi: usize,
    pub csv_path: PathBuf,
    pub svg_path: Option<PathBuf>,
    pub summary_path: Option<PathBuf>,
}

fn bad(field: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{field}: {msg}"))
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_toml(&text, base)
    }

    /// Parses and validates; relative paths resolve against `base`.
    pub fn from_toml(text: &str, base: &Path) -> Result<Self, CliError> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| CliError::Config(describe_toml_error(text, &e)))?;
        raw.validate(base)
    }
}

/// One-line message naming the offending line, e.g.
/// `config line 9 (length = "long"): invalid type: string "long", expected f64`.
fn describe_toml_error(text: &str, e: &toml::de::Error) -> String {
    match e.span() {
        Some(span) => {
            let line_no = text[..span.start.min(text.len())].matches('\n').count() + 1;
            let line = text.lines().nth(line_no - 1).unwrap_or("").trim();
            format!("config line {line_no} ({line}): {}", e.message())
        }
        None => format!("config: {}", e.message()),
    }
}

impl RawConfig {
    pub fn validate(self, base: &Path) -> Result<RunConfig, CliError> {
        let (frequency, frequency_label) = self.frequency.build()?;
        let potential = self.potential.build(base)?;
        let energies = self.scan.map(|s| s.grid()).transpose()?;

        let l = &self.lyapunov;
        if !(l.length >= 10.0 && l.length <= quasilab_core::cocycle::MAX_INTERVAL) {
            return Err(bad("lyapunov.length", format!("must lie in [10, 1e4], got {}", l.length)));
        }
        if l.n_phases == 0 {
            return Err(bad("lyapunov.n_phases", "must be >= 1"));
        }
        check_step("lyapunov.h", l.h)?;

        let g = &self.gordon;
        if !(g.margin >= 0.0 && g.margin.is_finite()) {
            return Err(bad("gordon.margin", format!("must be finite and >= 0, got {}", g.margin)));
        }
        if g.max_q == 0 {
            return Err(bad("gordon.max_q", "must be >= 1"));
        }
        if g.n_phi == 0 {
            return Err(bad("gordon.n_phi", "must be >= 1"));
        }
        let beta = frequency.beta_hat();
        let epsilon = match g.epsilon {
            Some(e) => {
                if !(e > 0.0) || (beta.is_finite() && e >= beta) {
                    return Err(bad(
                        "gordon.epsilon",
                        format!("must satisfy 0 < epsilon < beta_hat = {beta}, got {e}"),
                    ));
                }
                e
            }
            None if beta.is_finite() => DEFAULT_EPSILON_FRACTION * beta,
            None => RATIONAL_EPSILON,
        };
        if !(epsilon > 0.0) {
            return Err(bad("gordon.epsilon", format!("default epsilon is {epsilon}; beta_hat = {beta} is not positive")));
        }

        let o = self.output;
        let nonempty = |field: &str, p: &Path| {
            if p.as_os_str().is_empty() {
                Err(bad(field, "path is empty"))
            } else {
                Ok(base.join(p))
            }
        };
        Ok(RunConfig {
            frequency,
            frequency_label,
            potential,
            energies,
            lyapunov: LyapunovParams {
                length: l.length,
                n_phases: l.n_phases,
                h: l.h,
            },
            epsilon,
            margin: g.margin,
            max_q: g.max_q,
            n_phi: g.n_phi,
            csv_path: nonempty("output.csv_path", &o.csv_path)?,
            svg_path: o.svg_path.as_deref().map(|p| nonempty("output.svg_path", p)).transpose()?,
            summary_path: o
                .summary_path
                .as_deref()
                .map(|p| nonempty("output.summary_path", p))
                .transpose()?,
        })
    }
}

fn check_step(field: &str, h: f64) -> Result<(), CliError> {
    if !(h > 0.0 && h <= quasilab_core::cocycle::MAX_STEP) {
        return Err(bad(field, format!("must lie in (0, 1e-2], got {h}")));
    }
    Ok(())
}

impl FrequencyBlock {
    fn build(&self) -> Result<(Frequency, String), CliError> {
        let forbid = |name: &str, present: bool| {
            if present {
                Err(bad(&format!("frequency.{name}"), format!("not used by kind `{}`", self.kind)))
            } else {
                Ok(())
            }
        };
        let need = |name: &str, v: Option<u64>| {
            v.ok_or_else(|| bad(&format!("frequency.{name}"), format!("required for kind `{}`", self.kind)))
        };
        let core = |e: quasilab_core::Error| bad("frequency", e);
        match self.kind.as_str() {
            "cfrac" => {
                forbid("depth", self.depth.is_some())?;
                forbid("p", self.p.is_some())?;
                forbid("q", self.q.is_some())?;
                forbid("beta", self.beta.is_some())?;
                let qs = self
                    .quotients
                    .as_ref()
                    .ok_or_else(|| bad("frequency.quotients", "required for kind `cfrac`"))?;
                let f = Frequency::from_quotients(qs, FrequencyKind::IrrationalTruncation).map_err(core)?;
                let label = f.to_string();
                Ok((f, label))
            }
            "golden" => {
                forbid("quotients", self.quotients.is_some())?;
                forbid("p", self.p.is_some())?;
                forbid("q", self.q.is_some())?;
                forbid("beta", self.beta.is_some())?;
                let depth = need("depth", self.depth.map(|d| d as u64))? as usize;
                if depth < 2 {
                    return Err(bad("frequency.depth", "must be >= 2"));
                }
                let f = Frequency::golden_mean(depth).map_err(core)?;
                Ok((f, format!("golden mean, depth {depth}")))
            }
            "rational" => {
                forbid("quotients", self.quotients.is_some())?;
                forbid("depth", self.depth.is_some())?;
                forbid("beta", self.beta.is_some())?;
                let p = need("p", self.p)?;
                let q = need("q", self.q)?;
                let f = Frequency::rational(p, q).map_err(core)?;
                let label = f.to_string();
                Ok((f, label))
            }
            "liouville" => {
                forbid("quotients", self.quotients.is_some())?;
                forbid("p", self.p.is_some())?;
                forbid("q", self.q.is_some())?;
                let beta = self
                    .beta
                    .ok_or_else(|| bad("frequency.beta", "required for kind `liouville`"))?;
                let depth = need("depth", self.depth.map(|d| d as u64))? as usize;
                if !(beta > 0.0 && beta.is_finite()) {
                    return Err(bad("frequency.beta", format!("must be positive, got {beta}")));
                }
                let f = liouville_builder(beta, depth).map_err(core)?;
                Ok((f, format!("liouville beta={beta} depth={depth}")))
            }
            other => Err(bad(
                "frequency.kind",
                format!("unknown kind `{other}` (expected cfrac, golden, rational or liouville)"),
            )),
        }
    }
}

impl PotentialBlock {
    fn build(&self, base: &Path) -> Result<PotentialSpec, CliError> {
        let model: BuiltinModel = self.name.parse().map_err(|e| bad("potential.name", e))?;
        let table = match (&self.table_path, model) {
            (Some(p), BuiltinModel::Separable) => {
                let path = base.join(p);
                let text = std::fs::read_to_string(&path)
                    .map_err(|e| bad("potential.table_path", format!("{}: {e}", path.display())))?;
                Some(parse_sample_table(&text).map_err(|e| bad("potential.table_path", e))?)
            }
            (Some(_), _) => return Err(bad("potential.table_path", "only the separable model takes a table")),
            (None, _) => None,
        };
        if self.gamma.is_some() && model != BuiltinModel::HoelderCusp {
            return Err(bad("potential.gamma", "only hoelder_cusp takes gamma"));
        }
        let params = ModelParams {
            lambda: self.lambda,
            gamma: self.gamma,
            table,
        };
        builtin_model(model, &params).map_err(|e| bad("potential", e))
    }
}

impl ScanBlock {
    fn grid(&self) -> Result<Vec<f64>, CliError> {
        if let Some(list) = &self.energies {
            if self.e_min.is_some() || self.e_max.is_some() || self.n_points.is_some() {
                return Err(bad("scan.energies", "cannot be combined with e_min/e_max/n_points"));
            }
            if list.is_empty() {
                return Err(bad("scan.energies", "is empty"));
            }
            if list.iter().any(|e| !e.is_finite()) {
                return Err(bad("scan.energies", "entries must be finite"));
            }
            if list.windows(2).any(|w| w[0] >= w[1]) {
                return Err(bad("scan.energies", "must be strictly increasing"));
            }
            return Ok(list.clone());
        }
        let e_min = self.e_min.ok_or_else(|| bad("scan.e_min", "required"))?;
        let e_max = self.e_max.ok_or_else(|| bad("scan.e_max", "required"))?;
        let n = self.n_points.ok_or_else(|| bad("scan.n_points", "required"))?;
        if !(e_min.is_finite() && e_max.is_finite()) {
            return Err(bad("scan.e_min", "bounds must be finite"));
        }
        if n == 0 {
            return Err(bad("scan.n_points", "must be >= 1"));
        }
        if n == 1 {
            if e_min != e_max {
                return Err(bad("scan.n_points", "a single point needs e_min = e_max"));
            }
            return Ok(vec![e_min]);
        }
        if !(e_min < e_max) {
            return Err(bad("scan.e_max", format!("must exceed e_min = {e_min}")));
        }
        Ok((0..n)
            .map(|i| e_min + (e_max - e_min) * i as f64 / (n - 1) as f64)
            .collect())
    }
}

impl RunConfig {
    /// The energy grid, required by `lyap` and `gordon`.
    pub fn grid(&self) -> Result<&[f64], CliError> {
        self.energies
            .as_deref()
            .ok_or_else(|| bad("scan", "block is required for this command"))
    }
}
