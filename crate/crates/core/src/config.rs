//! Scenario configuration: a flat `key = value` text format with dotted keys.
//!
//! ```text
//! # comment
//! qubits = 3
//! omega = 0.3
//! channel.1.pattern = "z,i,z"     # z-type: factors z / i (or 1)
//! channel.1.coefficient = 1
//! channel.1.M = 1.1
//! channel.1.eta = 0.5
//! channel.3.pattern = "x"         # the x-type channel σ_x⊗…⊗σ_x
//! control.1 = "+1*IIX, +1*IXX"    # weighted Pauli strings
//! target = "1,+"
//! feedback = fidelity_power       # zero | fidelity_power | mixed_power | two_hamiltonian
//! feedback.alpha = 10
//! rho0 = "ghz(4,-)"               # maximally_mixed | ghz(k,±) | file:PATH
//! ```
//!
//! Values may be wrapped in double quotes. Channels and controls are ordered by
//! their numeric index. `H₀ = ω Σ_i L_z^{(i)}` over the z-type channels.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::analysis::LyapunovKind;
use crate::control::{FeedbackKind, FeedbackLaw, DEFAULT_EPS1, DEFAULT_EPS2};
use crate::dynamics::{DensityMatrix, IntegratorConfig};
use crate::error::{Error, Result};
use crate::model::{ChannelKind, GhzIndex, MeasurementChannel, PatternFactor, SystemModel};
use crate::qmat::{ComplexMatrix, HermitianMatrix, C64};
use crate::scenario::parse_pauli_sum;

pub const SCENARIO_A: &str = include_str!("../scenarios/scenario_a.cfg");
pub const SCENARIO_B: &str = include_str!("../scenarios/scenario_b.cfg");

/// Names accepted by [`ScenarioConfig::builtin`].
pub const BUILTINS: [&str; 2] = ["scenario_a", "scenario_b"];

/// Parsed but uninterpreted `key = value` pairs with their line numbers.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RawConfig {
    entries: BTreeMap<String, (String, usize)>,
}

impl RawConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = strip_comment(raw).trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content.split_once('=').ok_or_else(|| Error::Config {
                line,
                message: format!("expected `key = value`, got {content:?}"),
            })?;
            let key = key.trim();
            if key.is_empty() || key.chars().any(char::is_whitespace) {
                return Err(Error::Config {
                    line,
                    message: format!("bad key {key:?}"),
                });
            }
            let value = unquote(value.trim()).map_err(|message| Error::Config { line, message })?;
            if entries.insert(key.to_string(), (value, line)).is_some() {
                return Err(Error::Config {
                    line,
                    message: format!("duplicate key {key:?}"),
                });
            }
        }
        Ok(Self { entries })
    }

    /// Overrides or adds a key; line 0 marks command-line values.
    pub fn set(&mut self, key: &str, value: &str) {
        self.entries.insert(key.trim().to_string(), (unquote(value.trim()).unwrap_or_else(|_| value.to_string()), 0));
    }

    /// Applies a `key=value` override string.
    pub fn set_pair(&mut self, pair: &str) -> Result<()> {
        let (k, v) = pair.split_once('=').ok_or_else(|| Error::Config {
            line: 0,
            message: format!("override {pair:?} is not `key=value`"),
        })?;
        if k.trim().is_empty() {
            return Err(Error::Config {
                line: 0,
                message: format!("override {pair:?} has an empty key"),
            });
        }
        self.set(k, v);
        Ok(())
    }

    /// Removes `key` and every `key.*`.
    pub fn remove_tree(&mut self, key: &str) {
        let dotted = format!("{key}.");
        self.entries.retain(|k, _| k != key && !k.starts_with(&dotted));
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|(v, _)| v.as_str())
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    fn line(&self, key: &str) -> usize {
        self.entries.get(key).map_or(0, |(_, l)| *l)
    }

    fn err(&self, key: &str, message: impl Into<String>) -> Error {
        Error::Config {
            line: self.line(key),
            message: format!("{key}: {}", message.into()),
        }
    }

    fn required(&self, key: &str) -> Result<&str> {
        self.get(key).ok_or_else(|| Error::Config {
            line: 0,
            message: format!("missing key {key:?}"),
        })
    }

    fn parsed<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.get(key) {
            None => Ok(None),
            Some(v) => v
                .parse::<T>()
                .map(Some)
                .map_err(|_| self.err(key, format!("cannot parse {v:?}"))),
        }
    }

    fn number(&self, key: &str, default: Option<f64>) -> Result<f64> {
        match (self.parsed::<f64>(key)?, default) {
            (Some(v), _) if v.is_finite() => Ok(v),
            (Some(v), _) => Err(self.err(key, format!("non-finite value {v}"))),
            (None, Some(d)) => Ok(d),
            (None, None) => Err(Error::Config {
                line: 0,
                message: format!("missing key {key:?}"),
            }),
        }
    }

    fn positive(&self, key: &str, default: Option<f64>) -> Result<f64> {
        let v = self.number(key, default)?;
        if v > 0.0 {
            Ok(v)
        } else {
            Err(self.err(key, format!("must be positive, got {v}")))
        }
    }

    fn count(&self, key: &str, default: Option<usize>) -> Result<usize> {
        match (self.parsed::<usize>(key)?, default) {
            (Some(0), _) => Err(self.err(key, "must be at least 1")),
            (Some(v), _) => Ok(v),
            (None, Some(d)) => Ok(d),
            (None, None) => Err(Error::Config {
                line: 0,
                message: format!("missing key {key:?}"),
            }),
        }
    }

    /// Indices `i` of keys `prefix.i[.rest]`, sorted.
    fn indices(&self, prefix: &str) -> Result<Vec<usize>> {
        let mut out = Vec::new();
        for key in self.entries.keys() {
            let Some(rest) = key.strip_prefix(prefix).and_then(|r| r.strip_prefix('.')) else {
                continue;
            };
            let head = rest.split('.').next().unwrap_or("");
            let i = head
                .parse::<usize>()
                .map_err(|_| self.err(key, format!("expected a numeric index after {prefix:?}")))?;
            if !out.contains(&i) {
                out.push(i);
            }
        }
        out.sort_unstable();
        Ok(out)
    }
}

fn strip_comment(line: &str) -> &str {
    let mut quoted = false;
    for (i, c) in line.char_indices() {
        match c {
            '"' => quoted = !quoted,
            '#' if !quoted => return &line[..i],
            _ => {}
        }
    }
    line
}

fn unquote(v: &str) -> std::result::Result<String, String> {
    match (v.strip_prefix('"'), v.ends_with('"') && v.len() >= 2) {
        (Some(inner), true) => Ok(inner[..inner.len() - 1].to_string()),
        (Some(_), false) => Err(format!("unterminated string {v:?}")),
        (None, _) if v.contains('"') => Err(format!("stray quote in {v:?}")),
        (None, _) => Ok(v.to_string()),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ChannelSpec {
    Z {
        pattern: Vec<PatternFactor>,
        coefficient: f64,
        strength: f64,
        efficiency: f64,
    },
    X {
        strength: f64,
        efficiency: f64,
    },
}

impl ChannelSpec {
    pub fn build(&self, n: usize) -> Result<MeasurementChannel> {
        match self {
            ChannelSpec::Z {
                pattern,
                coefficient,
                strength,
                efficiency,
            } => MeasurementChannel::z(n, pattern, *coefficient, *strength, *efficiency),
            ChannelSpec::X { strength, efficiency } => MeasurementChannel::x(n, *strength, *efficiency),
        }
    }
}

/// Initial state of every trajectory.
#[derive(Clone, Debug, PartialEq)]
pub enum InitialState {
    MaximallyMixed,
    Ghz(GhzIndex),
    /// Matrix file in the computational basis: one row per line, entries
    /// `re` or `re,im` separated by whitespace, `#` starts a comment.
    File(PathBuf),
}

impl FromStr for InitialState {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        if t == "maximally_mixed" {
            return Ok(InitialState::MaximallyMixed);
        }
        if let Some(inner) = t.strip_prefix("ghz(").and_then(|r| r.strip_suffix(')')) {
            return Ok(InitialState::Ghz(inner.parse()?));
        }
        if let Some(path) = t.strip_prefix("file:") {
            return Ok(InitialState::File(PathBuf::from(path.trim())));
        }
        Err(Error::InvalidParameter(format!(
            "initial state {s:?} is not maximally_mixed, ghz(k,±) or file:PATH"
        )))
    }
}

impl fmt::Display for InitialState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InitialState::MaximallyMixed => write!(f, "maximally_mixed"),
            InitialState::Ghz(idx) => write!(f, "ghz({},{})", idx.k, idx.sign),
            InitialState::File(p) => write!(f, "file:{}", p.display()),
        }
    }
}

/// Parses a density-matrix file (see [`InitialState::File`]).
pub fn parse_matrix(text: &str) -> Result<ComplexMatrix> {
    let mut rows: Vec<Vec<C64>> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let content = strip_comment(raw).trim();
        if content.is_empty() {
            continue;
        }
        let row = content
            .split_whitespace()
            .map(|entry| {
                let bad = || Error::Config {
                    line: i + 1,
                    message: format!("bad matrix entry {entry:?}"),
                };
                let (re, im) = match entry.split_once(',') {
                    Some((a, b)) => (a.parse::<f64>().map_err(|_| bad())?, b.parse::<f64>().map_err(|_| bad())?),
                    None => (entry.parse::<f64>().map_err(|_| bad())?, 0.0),
                };
                Ok(C64::new(re, im))
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    let n = rows.len();
    if n == 0 || rows.iter().any(|r| r.len() != n) {
        return Err(Error::Config {
            line: 0,
            message: "matrix file is not square".into(),
        });
    }
    ComplexMatrix::from_row_major(n, n, rows.into_iter().flatten().collect())
}

/// Which Lyapunov function is recorded as `V`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LyapunovChoice {
    Reduction,
    Fidelity,
    Mixed,
}

impl FromStr for LyapunovChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "reduction" => Ok(Self::Reduction),
            "fidelity" => Ok(Self::Fidelity),
            "mixed" => Ok(Self::Mixed),
            other => Err(Error::InvalidParameter(format!("unknown Lyapunov function {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioConfig {
    pub name: String,
    pub qubits: usize,
    pub omega: f64,
    pub channels: Vec<ChannelSpec>,
    /// Control Hamiltonians as Pauli sums.
    pub controls: Vec<String>,
    pub target: GhzIndex,
    pub feedback: FeedbackKind,
    pub lyapunov: LyapunovChoice,
    pub rho0: InitialState,
    pub dt: f64,
    pub horizon: f64,
    pub trajectories: usize,
    pub seed: u64,
    pub stride: usize,
    pub output: Option<PathBuf>,
}

fn parse_pattern(raw: &RawConfig, key: &str, n: usize) -> Result<Option<Vec<PatternFactor>>> {
    let text = raw.required(key)?;
    let factors: Vec<&str> = text.split(',').map(str::trim).filter(|s| !s.is_empty()).collect();
    if factors.iter().all(|f| f.eq_ignore_ascii_case("x")) && (factors.len() == 1 || factors.len() == n) {
        return Ok(None);
    }
    if factors.len() != n {
        return Err(raw.err(key, format!("pattern has {} factors for {n} qubits", factors.len())));
    }
    factors
        .iter()
        .map(|f| match f.to_ascii_lowercase().as_str() {
            "z" => Ok(PatternFactor::SigmaZ),
            "i" | "1" => Ok(PatternFactor::Identity),
            other => Err(raw.err(key, format!("unknown pattern factor {other:?}"))),
        })
        .collect::<Result<Vec<_>>>()
        .map(Some)
}

fn parse_feedback(raw: &RawConfig) -> Result<FeedbackKind> {
    let name = raw.get("feedback").unwrap_or("zero");
    let kind = match name {
        "zero" => FeedbackKind::Zero,
        "fidelity_power" => FeedbackKind::FidelityPower {
            alpha: raw.number("feedback.alpha", None)?,
            beta: raw.number("feedback.beta", None)?,
        },
        "mixed_power" => FeedbackKind::MixedPower {
            alpha: raw.number("feedback.alpha", None)?,
            beta: raw.number("feedback.beta", None)?,
            gamma: raw.number("feedback.gamma", None)?,
            delta: raw.number("feedback.delta", None)?,
        },
        "two_hamiltonian" => FeedbackKind::TwoHamiltonian {
            gamma: raw.number("feedback.gamma", None)?,
            eps1: raw.number("feedback.eps1", Some(DEFAULT_EPS1))?,
            eps2: raw.number("feedback.eps2", Some(DEFAULT_EPS2))?,
        },
        other => return Err(raw.err("feedback", format!("unknown feedback law {other:?}"))),
    };
    let allowed: &[&str] = match kind {
        FeedbackKind::Zero => &[],
        FeedbackKind::FidelityPower { .. } => &["alpha", "beta"],
        FeedbackKind::MixedPower { .. } => &["alpha", "beta", "gamma", "delta"],
        FeedbackKind::TwoHamiltonian { .. } => &["gamma", "eps1", "eps2"],
    };
    for key in raw.keys().filter_map(|k| k.strip_prefix("feedback.")) {
        if !allowed.contains(&key) {
            return Err(raw.err(&format!("feedback.{key}"), format!("not a parameter of {name}")));
        }
    }
    Ok(kind)
}

const TOP_LEVEL: [&str; 14] = [
    "name",
    "qubits",
    "omega",
    "target",
    "feedback",
    "lyapunov",
    "rho0",
    "dt",
    "horizon",
    "trajectories",
    "seed",
    "stride",
    "output",
    "frame",
];

const CHANNEL_FIELDS: [&str; 4] = ["pattern", "coefficient", "M", "eta"];

impl ScenarioConfig {
    pub fn parse(text: &str) -> Result<Self> {
        Self::from_raw(&RawConfig::parse(text)?)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Raw text of a built-in scenario.
    pub fn builtin_text(name: &str) -> Result<&'static str> {
        match name {
            "scenario_a" => Ok(SCENARIO_A),
            "scenario_b" => Ok(SCENARIO_B),
            other => Err(Error::Config {
                line: 0,
                message: format!("unknown built-in scenario {other:?} (expected one of {BUILTINS:?})"),
            }),
        }
    }

    pub fn builtin(name: &str) -> Result<Self> {
        Self::parse(Self::builtin_text(name)?)
    }

    pub fn from_raw(raw: &RawConfig) -> Result<Self> {
        for key in raw.keys() {
            let known = TOP_LEVEL.contains(&key)
                || key.starts_with("feedback.")
                || key.starts_with("control.")
                || key
                    .strip_prefix("channel.")
                    .and_then(|r| r.split_once('.'))
                    .is_some_and(|(_, field)| CHANNEL_FIELDS.contains(&field));
            if !known {
                return Err(raw.err(key, "unknown key"));
            }
        }
        if let Some(frame) = raw.get("frame") {
            if frame != "ghz" {
                return Err(raw.err("frame", format!("only the ghz integration frame is supported, got {frame:?}")));
            }
        }
        let qubits = raw.count("qubits", None)?;
        let omega = raw.number("omega", Some(0.0))?;
        let mut channels = Vec::new();
        for i in raw.indices("channel")? {
            let key = |f: &str| format!("channel.{i}.{f}");
            let strength = raw.positive(&key("M"), None)?;
            let efficiency = raw.number(&key("eta"), None)?;
            if !(efficiency > 0.0 && efficiency <= 1.0) {
                return Err(raw.err(&key("eta"), format!("efficiency {efficiency} outside (0,1]")));
            }
            channels.push(match parse_pattern(raw, &key("pattern"), qubits)? {
                Some(pattern) => ChannelSpec::Z {
                    pattern,
                    coefficient: raw.number(&key("coefficient"), Some(1.0))?,
                    strength,
                    efficiency,
                },
                None => {
                    if raw.get(&key("coefficient")).is_some() {
                        return Err(raw.err(&key("coefficient"), "x-type channels take no coefficient"));
                    }
                    ChannelSpec::X { strength, efficiency }
                }
            });
        }
        let mut controls = Vec::new();
        for i in raw.indices("control")? {
            let key = format!("control.{i}");
            controls.push(raw.required(&key).map_err(|_| raw.err(&key, "control keys take no sub-fields"))?.to_string());
        }
        let target: GhzIndex = raw
            .required("target")?
            .parse()
            .map_err(|e: Error| raw.err("target", e.to_string()))?;
        let feedback = parse_feedback(raw)?;
        let lyapunov = match raw.get("lyapunov") {
            Some(v) => v.parse().map_err(|e: Error| raw.err("lyapunov", e.to_string()))?,
            None => match feedback {
                FeedbackKind::Zero => LyapunovChoice::Reduction,
                FeedbackKind::MixedPower { .. } => LyapunovChoice::Mixed,
                _ => LyapunovChoice::Fidelity,
            },
        };
        let rho0 = match raw.get("rho0") {
            Some(v) => v.parse().map_err(|e: Error| raw.err("rho0", e.to_string()))?,
            None => InitialState::MaximallyMixed,
        };
        let cfg = Self {
            name: raw.get("name").unwrap_or("scenario").to_string(),
            qubits,
            omega,
            channels,
            controls,
            target,
            feedback,
            lyapunov,
            rho0,
            dt: raw.positive("dt", Some(1e-3))?,
            horizon: raw.positive("horizon", None)?,
            trajectories: raw.count("trajectories", Some(1))?,
            seed: raw.parsed("seed")?.unwrap_or(0),
            stride: raw.count("stride", Some(100))?,
            output: raw.get("output").map(PathBuf::from),
        };
        cfg.model().map_err(|e| Error::Config {
            line: 0,
            message: format!("model: {e}"),
        })?;
        cfg.law().map_err(|e| Error::Config {
            line: raw.line("feedback"),
            message: format!("feedback: {e}"),
        })?;
        Ok(cfg)
    }

    /// The model in the computational frame.
    pub fn model(&self) -> Result<SystemModel> {
        let channels = self
            .channels
            .iter()
            .map(|c| c.build(self.qubits))
            .collect::<Result<Vec<_>>>()?;
        let dim = 1usize << self.qubits;
        let mut h0 = ComplexMatrix::zeros(dim, dim);
        for c in channels.iter().filter(|c| c.kind() == ChannelKind::Z) {
            h0.axpy_real(self.omega, c.operator().matrix());
        }
        let controls = self
            .controls
            .iter()
            .map(|c| parse_pauli_sum(self.qubits, c))
            .collect::<Result<Vec<_>>>()?;
        SystemModel::new(self.qubits, HermitianMatrix::new(h0)?, channels, controls)
    }

    pub fn law(&self) -> Result<FeedbackLaw> {
        FeedbackLaw::new(self.feedback, self.target)
    }

    pub fn lyapunov_kind(&self) -> LyapunovKind {
        match self.lyapunov {
            LyapunovChoice::Reduction => LyapunovKind::Reduction,
            LyapunovChoice::Fidelity => LyapunovKind::Fidelity(self.target),
            LyapunovChoice::Mixed => LyapunovKind::Mixed(self.target),
        }
    }

    pub fn integrator(&self) -> Result<IntegratorConfig> {
        IntegratorConfig::new(self.dt, self.stride)
    }

    /// The initial state in the computational frame.
    pub fn initial_state(&self, model: &SystemModel) -> Result<DensityMatrix> {
        let rho = match &self.rho0 {
            InitialState::MaximallyMixed => DensityMatrix::maximally_mixed(model.dim()),
            InitialState::Ghz(idx) => DensityMatrix::pure(model.basis().vector(*idx)?)?,
            InitialState::File(path) => {
                let text =
                    std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
                let m = parse_matrix(&text)?;
                if m.rows() != model.dim() {
                    return Err(Error::DimensionMismatch {
                        op: "initial state",
                        left: m.shape(),
                        right: format!("{0}x{0}", model.dim()),
                    });
                }
                DensityMatrix::from_initial(m)?.0
            }
        };
        Ok(rho)
    }
}
