//! Run configuration: parsing, defaults, validation.
//!
//! Two input syntaxes share one schema: whitespace-separated key=value text
//! and a flat JSON object. Unknown keys are rejected by name in both.

use std::collections::BTreeSet;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::engine::Tolerances;
use crate::error::{Result, SpinbootError};
use crate::su2::sectors;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Bootstrap,
    OracleAm,
    OracleEd,
    Compare,
    Toy,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Mode::Bootstrap => "bootstrap",
            Mode::OracleAm => "oracle-am",
            Mode::OracleEd => "oracle-ed",
            Mode::Compare => "compare",
            Mode::Toy => "toy",
        };
        f.write_str(name)
    }
}

impl FromStr for Mode {
    type Err = SpinbootError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bootstrap" => Ok(Mode::Bootstrap),
            "oracle-am" => Ok(Mode::OracleAm),
            "oracle-ed" => Ok(Mode::OracleEd),
            "compare" => Ok(Mode::Compare),
            "toy" => Ok(Mode::Toy),
            other => Err(SpinbootError::InvalidConfig(format!(
                "unknown mode `{other}` (expected bootstrap, oracle-am, oracle-ed, compare, or toy)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Measure {
    Concurrence,
    Tangle,
    Residual,
    Qfi,
    Entropy,
}

impl Measure {
    pub fn all() -> BTreeSet<Measure> {
        [
            Measure::Concurrence,
            Measure::Tangle,
            Measure::Residual,
            Measure::Qfi,
            Measure::Entropy,
        ]
        .into()
    }
}

impl FromStr for Measure {
    type Err = SpinbootError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "concurrence" => Ok(Measure::Concurrence),
            "tangle" => Ok(Measure::Tangle),
            "residual" => Ok(Measure::Residual),
            "qfi" => Ok(Measure::Qfi),
            "entropy" => Ok(Measure::Entropy),
            other => Err(SpinbootError::InvalidConfig(format!(
                "unknown measure `{other}` (expected concurrence, tangle, residual, qfi, or entropy)"
            ))),
        }
    }
}

impl fmt::Display for Measure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Measure::Concurrence => "concurrence",
            Measure::Tangle => "tangle",
            Measure::Residual => "residual",
            Measure::Qfi => "qfi",
            Measure::Entropy => "entropy",
        };
        f.write_str(name)
    }
}

/// Which angular momentum sectors to solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SectorSelection {
    /// The literal string "all".
    All(AllTag),
    /// Explicit l values as given; validated against L later.
    Explicit(Vec<f64>),
}

/// Serde helper so "all" deserializes as a tagged literal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AllTag {
    All,
}

impl SectorSelection {
    pub fn all() -> Self {
        SectorSelection::All(AllTag::All)
    }

    /// Resolves to ascending twice-l labels, validating parity and range.
    pub fn resolve(&self, sites: u32) -> Result<Vec<u32>> {
        match self {
            SectorSelection::All(_) => {
                Ok(sectors(sites)?.into_iter().map(|s| s.twice_l).collect())
            }
            SectorSelection::Explicit(ls) => {
                if ls.is_empty() {
                    return Err(SpinbootError::InvalidConfig(
                        "sectors list is empty".into(),
                    ));
                }
                let mut out = BTreeSet::new();
                for &l in ls {
                    let doubled = 2.0 * l;
                    if doubled < 0.0 || (doubled - doubled.round()).abs() > 1e-9 {
                        return Err(SpinbootError::InvalidConfig(format!(
                            "sector l={l} is not a non-negative half-integer"
                        )));
                    }
                    let twice_l = doubled.round() as u32;
                    if twice_l % 2 != sites % 2 {
                        return Err(SpinbootError::InvalidConfig(format!(
                            "sector l={l} has the wrong parity for L={sites}"
                        )));
                    }
                    if twice_l > sites {
                        return Err(SpinbootError::InvalidConfig(format!(
                            "sector l={l} exceeds the maximum L/2 for L={sites}"
                        )));
                    }
                    out.insert(twice_l);
                }
                Ok(out.into_iter().collect())
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
}

impl OutputFormat {
    pub fn extension(self) -> &'static str {
        match self {
            OutputFormat::Csv => "csv",
            OutputFormat::Json => "json",
        }
    }
}

impl FromStr for OutputFormat {
    type Err = SpinbootError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(SpinbootError::InvalidConfig(format!(
                "unknown format `{other}` (expected csv or json)"
            ))),
        }
    }
}

/// A complete run request.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub sites: u32,
    pub gamma: f64,
    pub hx: f64,
    pub hz: f64,
    pub mode: Mode,
    pub sectors: SectorSelection,
    pub measures: BTreeSet<Measure>,
    pub tolerances: Tolerances,
    pub out: PathBuf,
    pub format: OutputFormat,
}

impl RunConfig {
    pub fn new(sites: u32) -> Self {
        RunConfig {
            sites,
            gamma: 0.0,
            hx: 0.0,
            hz: 0.0,
            mode: Mode::Bootstrap,
            sectors: SectorSelection::all(),
            measures: Measure::all(),
            tolerances: Tolerances::default(),
            out: PathBuf::from("results.csv"),
            format: OutputFormat::Csv,
        }
    }

    /// Checks every cross-field invariant; returns self for chaining.
    pub fn validate(&self) -> Result<&Self> {
        if self.sites == 0 {
            return Err(SpinbootError::InvalidConfig(
                "L must be at least 1".into(),
            ));
        }
        let needs_basis = matches!(self.mode, Mode::Bootstrap | Mode::Compare);
        if needs_basis && self.sites < 2 {
            return Err(SpinbootError::InvalidConfig(format!(
                "mode {} needs L >= 2 (the Hamiltonian has two-body terms)",
                self.mode
            )));
        }
        if !self.gamma.is_finite() || !self.hx.is_finite() || !self.hz.is_finite() {
            return Err(SpinbootError::InvalidConfig(
                "gamma, hx, hz must be finite".into(),
            ));
        }
        self.tolerances.validate()?;
        self.sectors.resolve(self.sites)?;
        if self.measures.is_empty() {
            return Err(SpinbootError::InvalidConfig(
                "measures must not be empty; use `all` or a subset".into(),
            ));
        }
        Ok(self)
    }
}

/// Flat serde schema shared by the JSON syntax; every field optional except L.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(rename = "L")]
    sites: u32,
    gamma: Option<f64>,
    hx: Option<f64>,
    hz: Option<f64>,
    mode: Option<Mode>,
    sectors: Option<SectorSelection>,
    measures: Option<MeasuresField>,
    tau_null: Option<f64>,
    tau_res: Option<f64>,
    tau_deg: Option<f64>,
    out: Option<PathBuf>,
    format: Option<OutputFormat>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum MeasuresField {
    All(AllTag),
    List(Vec<Measure>),
}

/// Assembled field set before defaults kick in: the common landing point
/// for the text syntax, the JSON syntax, and command-line flags.
#[derive(Debug, Default)]
pub struct ConfigInput {
    pub sites: Option<u32>,
    pub gamma: Option<f64>,
    pub hx: Option<f64>,
    pub hz: Option<f64>,
    pub mode: Option<Mode>,
    pub sectors: Option<SectorSelection>,
    pub measures: Option<BTreeSet<Measure>>,
    pub tau_null: Option<f64>,
    pub tau_res: Option<f64>,
    pub tau_deg: Option<f64>,
    pub out: Option<PathBuf>,
    pub format: Option<OutputFormat>,
}

impl ConfigInput {
    /// Applies defaults and validates into a runnable config.
    pub fn build(self) -> Result<RunConfig> {
        let sites = self
            .sites
            .ok_or_else(|| SpinbootError::InvalidConfig("missing key L".into()))?;
        let mut cfg = RunConfig::new(sites);
        if let Some(v) = self.gamma {
            cfg.gamma = v;
        }
        if let Some(v) = self.hx {
            cfg.hx = v;
        }
        if let Some(v) = self.hz {
            cfg.hz = v;
        }
        if let Some(v) = self.mode {
            cfg.mode = v;
        }
        if let Some(v) = self.sectors {
            cfg.sectors = v;
        }
        if let Some(set) = self.measures {
            if set.is_empty() {
                return Err(SpinbootError::InvalidConfig(
                    "measures list is empty".into(),
                ));
            }
            cfg.measures = set;
        }
        if let Some(v) = self.tau_null {
            cfg.tolerances.tau_null = v;
        }
        if let Some(v) = self.tau_res {
            cfg.tolerances.tau_res = v;
        }
        if let Some(v) = self.tau_deg {
            cfg.tolerances.tau_deg = v;
        }
        match self.format {
            Some(v) => cfg.format = v,
            // convenience: an explicit .json output path implies the format
            None => {
                if let Some(out) = &self.out {
                    if out.extension().is_some_and(|e| e == "json") {
                        cfg.format = OutputFormat::Json;
                    }
                }
            }
        }
        if let Some(v) = self.out {
            cfg.out = v;
        } else if cfg.format == OutputFormat::Json {
            cfg.out = PathBuf::from("results.json");
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

impl From<RawConfig> for ConfigInput {
    fn from(raw: RawConfig) -> Self {
        ConfigInput {
            sites: Some(raw.sites),
            gamma: raw.gamma,
            hx: raw.hx,
            hz: raw.hz,
            mode: raw.mode,
            sectors: raw.sectors,
            measures: raw.measures.map(|m| match m {
                MeasuresField::All(_) => Measure::all(),
                MeasuresField::List(list) => list.into_iter().collect(),
            }),
            tau_null: raw.tau_null,
            tau_res: raw.tau_res,
            tau_deg: raw.tau_deg,
            out: raw.out,
            format: raw.format,
        }
    }
}

/// Parses "all" or a (possibly bracketed) comma list of l values.
pub fn parse_sectors(text: &str) -> Result<SectorSelection> {
    if text == "all" {
        return Ok(SectorSelection::all());
    }
    let ls = split_list(text)
        .into_iter()
        .map(|piece| {
            piece.parse().map_err(|_| {
                SpinbootError::InvalidConfig(format!("sectors={piece} is not a number"))
            })
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(SectorSelection::Explicit(ls))
}

/// Parses "all" or a (possibly bracketed) comma list of measure names.
pub fn parse_measures(text: &str) -> Result<BTreeSet<Measure>> {
    if text == "all" {
        return Ok(Measure::all());
    }
    split_list(text).into_iter().map(Measure::from_str).collect()
}

/// The JSON text may name a mode; callers combining a config file with a
/// mode chosen elsewhere need to know whether the file had an opinion.
pub fn declared_mode(raw: &str) -> Option<Mode> {
    let trimmed = raw.trim_start();
    if trimmed.starts_with('{') {
        let value: serde_json::Value = serde_json::from_str(trimmed).ok()?;
        value.get("mode")?.as_str()?.parse().ok()
    } else {
        trimmed
            .split_whitespace()
            .find_map(|tok| tok.strip_prefix("mode="))
            .and_then(|m| m.parse().ok())
    }
}

/// Parses either syntax, applies defaults, and validates.
pub fn validate_config(raw: &str) -> Result<RunConfig> {
    let trimmed = raw.trim_start();
    if trimmed.starts_with('{') {
        let parsed: RawConfig = serde_json::from_str(trimmed)
            .map_err(|e| SpinbootError::InvalidConfig(e.to_string()))?;
        ConfigInput::from(parsed).build()
    } else {
        parse_kv(raw)
    }
}

/// Splits "l=0.5,1.5" or "l=[0.5, 1.5]" into trimmed pieces.
fn split_list(value: &str) -> Vec<&str> {
    value
        .trim_start_matches('[')
        .trim_end_matches(']')
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .collect()
}

fn parse_kv(raw: &str) -> Result<RunConfig> {
    let mut input = ConfigInput::default();

    let float = |key: &str, value: &str| -> Result<f64> {
        value.parse().map_err(|_| {
            SpinbootError::InvalidConfig(format!("{key}={value} is not a number"))
        })
    };

    for token in raw.split_whitespace() {
        let (key, value) = token.split_once('=').ok_or_else(|| {
            SpinbootError::InvalidConfig(format!("expected key=value, got `{token}`"))
        })?;
        match key {
            "L" => {
                input.sites = Some(value.parse().map_err(|_| {
                    SpinbootError::InvalidConfig(format!(
                        "L={value} is not a non-negative integer"
                    ))
                })?);
            }
            "gamma" => input.gamma = Some(float(key, value)?),
            "hx" => input.hx = Some(float(key, value)?),
            "hz" => input.hz = Some(float(key, value)?),
            "mode" => input.mode = Some(value.parse()?),
            "sectors" => input.sectors = Some(parse_sectors(value)?),
            "measures" => input.measures = Some(parse_measures(value)?),
            "tau_null" => input.tau_null = Some(float(key, value)?),
            "tau_res" => input.tau_res = Some(float(key, value)?),
            "tau_deg" => input.tau_deg = Some(float(key, value)?),
            "out" => input.out = Some(PathBuf::from(value)),
            "format" => input.format = Some(value.parse()?),
            other => {
                return Err(SpinbootError::InvalidConfig(format!(
                    "unknown key `{other}`"
                )));
            }
        }
    }
    input.build()
}
