//! Experiment configuration files.
//!
//! Configs are TOML documents with a top-level `kind` and the sections
//! `[model]`, `[init]`, `[grid]`, `[times]`, `[output]` and `[tolerances]`:
//!
//! ```toml
//! kind = "compare"
//!
//! [model]
//! lambda = 1.0
//!
//! [init]
//! b0 = [1.0, 0.0]
//! a0 = [[1.0, 0.0]]
//! x0 = [0.0]
//!
//! [grid]
//! dim = 1
//! n = 1024
//! half_width = 40.0
//!
//! [times]
//! t_end = 1.0
//! dt = 1e-3
//! snapshots = 10
//!
//! [output]
//! dir = "out/compare"
//! formats = ["csv", "json", "svg"]
//! ```
//!
//! Complex numbers are `[re, im]` pairs. [`parse_config`] reports every
//! problem it finds, not only the first.

use std::fmt;
use std::ops::Range;
use std::path::PathBuf;

use lognls_core::pde::{GrowthPolicy, LogStepSchedule};
use lognls_core::{GaussianInit, Grid, ModelParams};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use toml::Spanned;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    GaussianOde,
    Pde,
    Compare,
    Fp,
    Asymptotics,
}

impl Kind {
    pub const ALL: [Kind; 5] = [
        Kind::GaussianOde,
        Kind::Pde,
        Kind::Compare,
        Kind::Fp,
        Kind::Asymptotics,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Kind::GaussianOde => "gaussian_ode",
            Kind::Pde => "pde",
            Kind::Compare => "compare",
            Kind::Fp => "fp",
            Kind::Asymptotics => "asymptotics",
        }
    }

    fn evolves_field(self) -> bool {
        matches!(self, Kind::Pde | Kind::Compare | Kind::Fp)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub lambda: f64,
    #[serde(default)]
    pub mu: f64,
    /// Ignored when `mu = 0`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
}

impl ModelSection {
    pub fn params(&self) -> ModelParams {
        ModelParams {
            lambda: self.lambda,
            mu: self.mu,
            sigma: self.sigma.unwrap_or(1.0),
            epsilon: self.epsilon,
        }
    }
}

/// Initial datum: a Gaussian or a stored field snapshot (path to its JSON
/// sidecar; the samples live next to it with the extension `.bin`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InitSection {
    Gaussian(GaussianInit),
    Field { field: PathBuf },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Spacing {
    Linear,
    Logarithmic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Frame {
    /// Fixed box, fixed step.
    Fixed,
    /// Co-moving frame with a logarithmic step schedule.
    Comoving,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimesSection {
    pub t_end: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(default)]
    pub snapshots: usize,
    #[serde(default = "default_spacing")]
    pub spacing: Spacing,
    /// First snapshot of a logarithmic schedule.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_first: Option<f64>,
    #[serde(default = "default_frame")]
    pub frame: Frame,
    /// Co-moving frame: `dt(t) = clamp(step_fraction·t, dt, dt_max)`.
    #[serde(default = "default_step_fraction")]
    pub step_fraction: f64,
    #[serde(default = "default_dt_max")]
    pub dt_max: f64,
    /// Smallest span of logarithmic time `s` that kind = fp accepts.
    #[serde(default = "default_min_s_range")]
    pub min_s_range: f64,
}

impl TimesSection {
    /// Snapshot times, increasing, all in `(0, t_end]`.
    pub fn snapshot_times(&self) -> Vec<f64> {
        let n = self.snapshots;
        match self.spacing {
            Spacing::Linear => (1..=n)
                .map(|k| if k == n { self.t_end } else { self.t_end * k as f64 / n as f64 })
                .collect(),
            Spacing::Logarithmic => {
                let t0 = self.first_log_time();
                if n == 1 {
                    return vec![self.t_end];
                }
                let ratio = (self.t_end / t0).ln();
                (0..n)
                    .map(|k| {
                        if k + 1 == n {
                            self.t_end
                        } else {
                            t0 * (ratio * k as f64 / (n - 1) as f64).exp()
                        }
                    })
                    .collect()
            }
        }
    }

    fn first_log_time(&self) -> f64 {
        self.t_first.unwrap_or(1e-3 * self.t_end)
    }

    pub fn schedule(&self) -> LogStepSchedule {
        let dt = self.dt.unwrap_or(1e-3);
        LogStepSchedule {
            dt_min: dt,
            fraction: self.step_fraction,
            dt_max: self.dt_max.max(dt),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
    Svg,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
    #[serde(default = "default_formats")]
    pub formats: Vec<Format>,
    /// Write binary field snapshots with JSON sidecars.
    #[serde(default)]
    pub field_snapshots: bool,
}

impl OutputSection {
    pub fn wants(&self, f: Format) -> bool {
        self.formats.contains(&f)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    #[serde(default = "default_rel_tol")]
    pub rel_tol: f64,
    #[serde(default = "default_first_integral")]
    pub first_integral: f64,
    #[serde(default = "default_mass_drift")]
    pub mass_drift: f64,
    #[serde(default = "default_energy_drift")]
    pub energy_drift: f64,
    #[serde(default = "default_momentum_drift")]
    pub momentum_drift: f64,
    #[serde(default = "default_l2_error")]
    pub l2_error: f64,
    #[serde(default = "default_shell_mass")]
    pub shell_mass: f64,
    /// Allowed relative deviation of the fitted `‖∇u‖²` slope in `ln t`.
    #[serde(default = "default_slope_ratio")]
    pub slope_ratio: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            rel_tol: default_rel_tol(),
            first_integral: default_first_integral(),
            mass_drift: default_mass_drift(),
            energy_drift: default_energy_drift(),
            momentum_drift: default_momentum_drift(),
            l2_error: default_l2_error(),
            shell_mass: default_shell_mass(),
            slope_ratio: default_slope_ratio(),
        }
    }
}

impl Tolerances {
    pub fn growth_policy(&self) -> GrowthPolicy {
        GrowthPolicy {
            abort_threshold: self.shell_mass,
            ..GrowthPolicy::default()
        }
    }
}

fn default_epsilon() -> f64 {
    lognls_core::pde::DEFAULT_EPSILON
}
fn default_spacing() -> Spacing {
    Spacing::Linear
}
fn default_frame() -> Frame {
    Frame::Fixed
}
fn default_step_fraction() -> f64 {
    1e-2
}
fn default_dt_max() -> f64 {
    1.0
}
fn default_min_s_range() -> f64 {
    1.0
}
fn default_formats() -> Vec<Format> {
    vec![Format::Csv, Format::Json]
}
fn default_rel_tol() -> f64 {
    1e-10
}
fn default_first_integral() -> f64 {
    1e-8
}
fn default_mass_drift() -> f64 {
    1e-10
}
fn default_energy_drift() -> f64 {
    1e-5
}
fn default_momentum_drift() -> f64 {
    1e-8
}
fn default_l2_error() -> f64 {
    1e-4
}
fn default_shell_mass() -> f64 {
    1e-6
}
fn default_slope_ratio() -> f64 {
    0.1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub kind: Kind,
    pub model: ModelSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub init: Option<InitSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<Grid>,
    pub times: TimesSection,
    pub output: OutputSection,
    #[serde(default)]
    pub tolerances: Tolerances,
}

impl ExperimentConfig {
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config values are representable in TOML")
    }
}

/// One problem found in a config, with its position when known.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub column: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.line, self.column) {
            (Some(l), Some(c)) => write!(f, "{l}:{c}: {}", self.message),
            _ => f.write_str(&self.message),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParsedConfig {
    pub config: ExperimentConfig,
    pub warnings: Vec<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDocument {
    kind: Option<Spanned<String>>,
    model: Option<Spanned<toml::Value>>,
    init: Option<Spanned<toml::Value>>,
    grid: Option<Spanned<toml::Value>>,
    times: Option<Spanned<toml::Value>>,
    output: Option<Spanned<toml::Value>>,
    tolerances: Option<Spanned<toml::Value>>,
}

struct Collector<'a> {
    text: &'a str,
    errors: Vec<ConfigError>,
}

impl<'a> Collector<'a> {
    fn at(&mut self, span: Option<Range<usize>>, message: String) {
        let (line, column) = match span {
            Some(s) => {
                let (l, c) = line_col(self.text, s.start);
                (Some(l), Some(c))
            }
            None => (None, None),
        };
        self.errors.push(ConfigError {
            line,
            column,
            message,
        });
    }

    fn plain(&mut self, message: impl Into<String>) {
        self.errors.push(ConfigError {
            line: None,
            column: None,
            message: message.into(),
        });
    }

    fn section<T: DeserializeOwned>(
        &mut self,
        name: &str,
        value: Option<Spanned<toml::Value>>,
        required: bool,
    ) -> Option<T> {
        match value {
            None => {
                if required {
                    self.plain(format!("missing section [{name}]"));
                }
                None
            }
            Some(v) => {
                let span = v.span();
                match v.into_inner().try_into::<T>() {
                    Ok(t) => Some(t),
                    Err(e) => {
                        self.at(Some(span), format!("[{name}]: {}", e.message().trim()));
                        None
                    }
                }
            }
        }
    }
}

/// 1-based line and column of a byte offset.
fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, column)
}

/// Parses and validates a config, collecting every error.
pub fn parse_config(text: &str) -> Result<ParsedConfig, Vec<ConfigError>> {
    let mut c = Collector {
        text,
        errors: Vec::new(),
    };
    let raw: RawDocument = match toml::from_str(text) {
        Ok(r) => r,
        Err(e) => {
            c.at(e.span(), e.message().trim().to_string());
            return Err(c.errors);
        }
    };

    let kind = match raw.kind {
        None => {
            c.plain("missing key kind");
            None
        }
        Some(k) => {
            let span = k.span();
            let name = k.into_inner();
            match Kind::ALL.iter().find(|k| k.name() == name) {
                Some(k) => Some(*k),
                None => {
                    let known: Vec<_> = Kind::ALL.iter().map(|k| k.name()).collect();
                    c.at(
                        Some(span),
                        format!("unknown kind \"{name}\" (expected one of {})", known.join(", ")),
                    );
                    None
                }
            }
        }
    };
    let model: Option<ModelSection> = c.section("model", raw.model, true);
    let init: Option<InitSection> = c.section("init", raw.init, false);
    let grid: Option<Grid> = c.section("grid", raw.grid, false);
    let times: Option<TimesSection> = c.section("times", raw.times, true);
    let output: Option<OutputSection> = c.section("output", raw.output, true);
    let tolerances: Tolerances = c.section("tolerances", raw.tolerances, false).unwrap_or_default();

    let mut warnings = Vec::new();
    if let Some(m) = &model {
        if !(m.lambda.is_finite() && m.lambda != 0.0) {
            c.plain("model.lambda must be finite and nonzero");
        }
        if !(m.mu >= 0.0 && m.mu.is_finite()) {
            c.plain("model.mu must be nonnegative");
        }
        if let Some(s) = m.sigma {
            if m.mu == 0.0 {
                warnings.push("model.sigma is ignored because model.mu = 0".to_string());
            } else if !(s > 0.0 && s.is_finite()) {
                c.plain("model.sigma must be positive");
            }
        }
        if !(m.epsilon >= 0.0 && m.epsilon.is_finite()) {
            c.plain("model.epsilon must be nonnegative");
        }
    }
    if let Some(t) = &times {
        validate_times(&mut c, t, kind);
    }
    if let Some(o) = &output {
        if o.dir.as_os_str().is_empty() {
            c.plain("output.dir must not be empty");
        }
        if o.formats.is_empty() {
            c.plain("output.formats must list at least one of csv, json, svg");
        }
    }
    validate_tolerances(&mut c, &tolerances);
    if let Some(g) = &grid {
        if let Err(e) = Grid::new(g.dim, g.n, g.half_width) {
            c.plain(format!("grid: {e}"));
        }
    }
    if let Some(InitSection::Gaussian(g)) = &init {
        if let Err(e) = g.validate() {
            c.plain(format!("init: {e}"));
        }
        if let Some(grid) = &grid {
            if g.dim() != grid.dim {
                c.plain(format!(
                    "init has {} axes but grid.dim = {}",
                    g.dim(),
                    grid.dim
                ));
            }
        }
    }

    if let Some(k) = kind {
        validate_kind(&mut c, k, &init, &grid, &model, &times);
    }

    if !c.errors.is_empty() {
        return Err(c.errors);
    }
    Ok(ParsedConfig {
        config: ExperimentConfig {
            kind: kind.expect("checked"),
            model: model.expect("checked"),
            init,
            grid,
            times: times.expect("checked"),
            output: output.expect("checked"),
            tolerances,
        },
        warnings,
    })
}

fn validate_times(c: &mut Collector, t: &TimesSection, kind: Option<Kind>) {
    if !(t.t_end > 0.0 && t.t_end.is_finite()) {
        c.plain("times.t_end must be positive");
        return;
    }
    if let Some(dt) = t.dt {
        if !(dt > 0.0 && dt.is_finite()) {
            c.plain("times.dt must be positive");
        } else if dt > t.t_end {
            c.plain("times.dt must not exceed times.t_end");
        }
    }
    if t.spacing == Spacing::Logarithmic {
        let t0 = t.first_log_time();
        if !(t0 > 0.0 && t0 < t.t_end) {
            c.plain("times.t_first must lie in (0, t_end)");
        }
        if kind == Some(Kind::Asymptotics) && t0 <= std::f64::consts::E {
            c.plain("times.t_first must exceed e for kind = asymptotics");
        }
    } else if t.t_first.is_some() {
        c.plain("times.t_first only applies to spacing = \"logarithmic\"");
    }
    if !(t.step_fraction > 0.0 && t.step_fraction.is_finite()) {
        c.plain("times.step_fraction must be positive");
    }
    if !(t.dt_max > 0.0 && t.dt_max.is_finite()) {
        c.plain("times.dt_max must be positive");
    }
    if !(t.min_s_range >= 0.0 && t.min_s_range.is_finite()) {
        c.plain("times.min_s_range must be nonnegative");
    }
}

fn validate_tolerances(c: &mut Collector, t: &Tolerances) {
    let entries = [
        ("rel_tol", t.rel_tol),
        ("first_integral", t.first_integral),
        ("mass_drift", t.mass_drift),
        ("energy_drift", t.energy_drift),
        ("momentum_drift", t.momentum_drift),
        ("l2_error", t.l2_error),
        ("shell_mass", t.shell_mass),
        ("slope_ratio", t.slope_ratio),
    ];
    for (name, v) in entries {
        if !(v > 0.0 && v.is_finite()) {
            c.plain(format!("tolerances.{name} must be positive"));
        }
    }
    if !(t.rel_tol <= 1e-3) {
        c.plain("tolerances.rel_tol must not exceed 1e-3");
    }
}

fn validate_kind(
    c: &mut Collector,
    kind: Kind,
    init: &Option<InitSection>,
    grid: &Option<Grid>,
    model: &Option<ModelSection>,
    times: &Option<TimesSection>,
) {
    let lambda = model.as_ref().map(|m| m.lambda);
    let name = kind.name();
    match kind {
        Kind::GaussianOde | Kind::Compare => {
            if !matches!(init, Some(InitSection::Gaussian(_))) {
                c.plain(format!("kind = {name} needs a Gaussian [init] (b0, a0, x0)"));
            }
        }
        Kind::Pde | Kind::Fp => {
            if init.is_none() {
                c.plain(format!("kind = {name} needs an [init] section"));
            }
        }
        Kind::Asymptotics => {}
    }
    if kind.evolves_field() {
        if grid.is_none() {
            c.plain(format!("kind = {name} needs a [grid] section"));
        }
        if times.as_ref().is_some_and(|t| t.dt.is_none()) {
            c.plain(format!("kind = {name} needs times.dt"));
        }
    }
    let comoving = times.as_ref().is_some_and(|t| t.frame == Frame::Comoving);
    if comoving && kind == Kind::Compare {
        c.plain("kind = compare runs in the fixed frame only");
    }
    let needs_positive_lambda =
        matches!(kind, Kind::Asymptotics | Kind::Fp) || comoving || kind == Kind::GaussianOde;
    if needs_positive_lambda && lambda.is_some_and(|l| !(l > 0.0)) {
        c.plain(format!("kind = {name} needs model.lambda > 0"));
    }
    if kind == Kind::Fp && times.as_ref().is_some_and(|t| t.snapshots < 2) {
        c.plain("kind = fp needs at least two snapshots");
    }
    if kind == Kind::Asymptotics && times.as_ref().is_some_and(|t| t.spacing != Spacing::Logarithmic)
    {
        c.plain("kind = asymptotics needs times.spacing = \"logarithmic\"");
    }
}
