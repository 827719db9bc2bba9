use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::channel::{ArrayGeometry, GroupScenario};
use crate::error::{Error, Result};
use crate::mi::check_guard;

/// Precoding method evaluated per cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Method {
    Optimized,
    /// Per-group precoding with subgroups of `n_p` streams.
    Pgp(usize),
    Plain,
    Svapb,
    None,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::Optimized => f.write_str("optimized"),
            Method::Pgp(n) => write!(f, "pgp({n})"),
            Method::Plain => f.write_str("plain"),
            Method::Svapb => f.write_str("svapb"),
            Method::None => f.write_str("none"),
        }
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let s = s.trim();
        match s {
            "optimized" => return Ok(Method::Optimized),
            "plain" => return Ok(Method::Plain),
            "svapb" => return Ok(Method::Svapb),
            "none" => return Ok(Method::None),
            _ => {}
        }
        let inner = s
            .strip_prefix("pgp(")
            .and_then(|r| r.strip_suffix(')'))
            .or_else(|| s.strip_prefix("pgp:"));
        match inner.map(|n| n.trim().parse::<usize>()) {
            Some(Ok(n)) if n > 0 => Ok(Method::Pgp(n)),
            Some(_) => Err(format!(
                "`{s}`: PGP subgroup size must be a positive integer"
            )),
            None => Err(format!(
                "unknown method `{s}` (expected optimized, pgp(n), plain, svapb or none)"
            )),
        }
    }
}

impl Serialize for Method {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Method {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeometryKind {
    Ula,
    UpaZx,
    UpaXy,
}

/// `elements` for a ULA, `axes = [outer, inner]` for a planar array.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryConfig {
    pub kind: GeometryKind,
    #[serde(default)]
    pub elements: Option<usize>,
    #[serde(default)]
    pub axes: Option<[usize; 2]>,
    pub spacing: f64,
}

impl GeometryConfig {
    pub fn build(&self) -> std::result::Result<ArrayGeometry, String> {
        let g = match (self.kind, self.elements, self.axes) {
            (GeometryKind::Ula, Some(n), None) => ArrayGeometry::ula(n, self.spacing),
            (GeometryKind::Ula, _, _) => {
                return Err("geometry: a ULA takes `elements` and no `axes`".into())
            }
            (GeometryKind::UpaZx, None, Some([o, i])) => ArrayGeometry::upa_zx(o, i, self.spacing),
            (GeometryKind::UpaXy, None, Some([o, i])) => ArrayGeometry::upa_xy(o, i, self.spacing),
            _ => {
                return Err(
                    "geometry: a planar array takes `axes = [outer, inner]` and no `elements`"
                        .into(),
                )
            }
        };
        g.validate().map_err(|e| format!("geometry: {e}"))?;
        Ok(g)
    }
}

/// What to do with bins claimed by several groups when there is no CFSDM.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OverlapPolicy {
    /// Leave shared bins unused.
    #[default]
    Release,
    /// Keep them; inter-group interference is ignored by the per-group model.
    Keep,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OfdmConfig {
    pub subcarriers: usize,
    pub taps: usize,
    #[serde(default = "yes")]
    pub cfsdm: bool,
}

fn yes() -> bool {
    true
}
fn default_threshold() -> f64 {
    crate::vcm::DEFAULT_THRESHOLD
}
fn default_nodes() -> usize {
    3
}
fn default_mc() -> usize {
    20_000
}
fn default_cost() -> f64 {
    1e9
}
fn default_iters() -> usize {
    50
}

/// One declarative experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioRun {
    #[serde(default)]
    pub name: String,
    pub seed: u64,
    /// QAM order.
    pub constellation: usize,
    /// `SNR_s` grid in dB.
    pub snr_db: Vec<f64>,
    pub methods: Vec<Method>,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    #[serde(default)]
    pub guard_override: bool,
    /// Gauss-Hermite nodes per axis used by the optimizer.
    #[serde(default = "default_nodes")]
    pub quadrature_nodes: usize,
    /// Nodes per axis used for the reported MI.
    #[serde(default = "default_nodes")]
    pub evaluation_nodes: usize,
    #[serde(default = "default_mc")]
    pub mc_samples: usize,
    /// Largest `K^2 L^(2r)` the optimizer may take on per evaluation.
    #[serde(default = "default_cost")]
    pub max_quadrature_cost: f64,
    #[serde(default = "default_iters")]
    pub max_iters: usize,
    #[serde(default)]
    pub overlap: OverlapPolicy,
    /// How `pgp(n)` deals streams into subgroups.
    #[serde(default)]
    pub pgp_pairing: crate::precoder::PgpPairing,
    #[serde(default)]
    pub output: Option<String>,
    pub geometry: GeometryConfig,
    pub groups: Vec<GroupScenario>,
    #[serde(default)]
    pub ofdm: Option<OfdmConfig>,
}

const SUPPORTED_ORDERS: [usize; 3] = [4, 16, 64];

impl ScenarioRun {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| {
            let loc = e
                .span()
                .filter(|s| !(s.start == 0 && e.message().starts_with("missing field")))
                .map(|s| {
                    format!(
                        "line {}: ",
                        text[..s.start.min(text.len())].matches('\n').count() + 1
                    )
                })
                .unwrap_or_default();
            Error::Config(vec![format!("{loc}{}", e.message().trim())])
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text)
    }

    pub fn cfsdm(&self) -> bool {
        self.ofdm.as_ref().is_some_and(|o| o.cfsdm)
    }

    /// Field-level checks, then the alphabet guard. Config problems are
    /// reported together; guard violations only once the config is sound.
    pub fn validate(&self) -> Result<()> {
        let mut diag = Vec::new();
        if !SUPPORTED_ORDERS.contains(&self.constellation) {
            diag.push(format!(
                "constellation: M={} is not a supported square QAM order (expected 4, 16 or 64)",
                self.constellation
            ));
        }
        if self.snr_db.is_empty() {
            diag.push("snr_db: needs at least one SNR point".into());
        }
        if let Some(x) = self.snr_db.iter().find(|x| !x.is_finite()) {
            diag.push(format!("snr_db: non-finite entry {x}"));
        }
        if self.methods.is_empty() {
            diag.push("methods: needs at least one method".into());
        }
        let distinct: BTreeSet<_> = self.methods.iter().collect();
        if distinct.len() != self.methods.len() {
            diag.push("methods: duplicate entries".into());
        }
        if !(self.threshold > 0.0 && self.threshold.is_finite()) {
            diag.push(format!(
                "threshold: must be positive, got {}",
                self.threshold
            ));
        }
        if self.quadrature_nodes == 0 || self.evaluation_nodes == 0 {
            diag.push("quadrature_nodes/evaluation_nodes: need at least one node per axis".into());
        }
        if self.mc_samples < 10_000 {
            diag.push(format!(
                "mc_samples: at least 10000 draws required, got {}",
                self.mc_samples
            ));
        }
        if !(self.max_quadrature_cost > 0.0) {
            diag.push("max_quadrature_cost: must be positive".into());
        }
        if self.max_iters == 0 {
            diag.push("max_iters: must be at least 1".into());
        }
        if let Err(e) = self.geometry.build() {
            diag.push(e);
        }
        if self.groups.is_empty() {
            diag.push("groups: needs at least one group".into());
        }
        let mut ids = BTreeSet::new();
        for (i, g) in self.groups.iter().enumerate() {
            if !ids.insert(g.id) {
                diag.push(format!("groups[{i}].id: duplicate group id {}", g.id));
            }
            if let Err(e) = g.validate() {
                diag.push(format!("groups[{i}]: {e}"));
            }
        }
        if let Some(o) = &self.ofdm {
            if o.taps == 0 || o.subcarriers < o.taps {
                diag.push(format!(
                    "ofdm: need subcarriers >= taps >= 1, got subcarriers={} taps={}",
                    o.subcarriers, o.taps
                ));
            }
        }
        if !diag.is_empty() {
            return Err(Error::Config(diag));
        }
        self.check_guards()
    }

    /// Receive dimension seen by each evaluation unit, an upper bound on the
    /// number of jointly detected streams.
    fn stream_bounds(&self) -> Vec<(usize, usize)> {
        self.groups
            .iter()
            .map(|g| {
                let n = if self.cfsdm() {
                    g.users.iter().copied().max().unwrap_or(0)
                } else {
                    g.antennas()
                };
                (g.id, n)
            })
            .collect()
    }

    fn check_guards(&self) -> Result<()> {
        for (id, n) in self.stream_bounds() {
            for m in &self.methods {
                let streams = match m {
                    Method::Optimized | Method::None => n,
                    Method::Pgp(p) => *p,
                    Method::Plain | Method::Svapb => 1,
                };
                check_guard(self.constellation, streams, self.guard_override).map_err(|e| {
                    Error::Guard(format!("group {id}, method {m}: {}", strip_guard(e)))
                })?;
            }
        }
        Ok(())
    }
}

fn strip_guard(e: Error) -> String {
    match e {
        Error::Guard(s) => s,
        other => other.to_string(),
    }
}

/// Parse and validate a config file.
pub fn validate_config(path: &Path) -> Result<ScenarioRun> {
    let cfg = ScenarioRun::load(path)?;
    cfg.validate()?;
    Ok(cfg)
}
