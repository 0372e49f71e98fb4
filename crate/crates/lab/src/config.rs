//! Experiment configuration as a flat `key = value` document.

use std::collections::BTreeSet;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use tdlab::regvar::gcd;
use tdlab::Observable;

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ExperimentKind {
    Dist,
    Lemma22,
    Equidist,
    RenewalSrt,
    RenewalTied,
    RenewalLlt,
    RenewalNagaev,
    RenewalContinuous,
    MapTail,
    MapDensity,
    MapDk,
    MapTied,
    WalkBridge,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 13] = [
        ExperimentKind::Dist,
        ExperimentKind::Lemma22,
        ExperimentKind::Equidist,
        ExperimentKind::RenewalSrt,
        ExperimentKind::RenewalTied,
        ExperimentKind::RenewalLlt,
        ExperimentKind::RenewalNagaev,
        ExperimentKind::RenewalContinuous,
        ExperimentKind::MapTail,
        ExperimentKind::MapDensity,
        ExperimentKind::MapDk,
        ExperimentKind::MapTied,
        ExperimentKind::WalkBridge,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ExperimentKind::Dist => "dist",
            ExperimentKind::Lemma22 => "lemma22",
            ExperimentKind::Equidist => "equidist",
            ExperimentKind::RenewalSrt => "renewal-srt",
            ExperimentKind::RenewalTied => "renewal-tied",
            ExperimentKind::RenewalLlt => "renewal-llt",
            ExperimentKind::RenewalNagaev => "renewal-nagaev",
            ExperimentKind::RenewalContinuous => "renewal-continuous",
            ExperimentKind::MapTail => "map-tail",
            ExperimentKind::MapDensity => "map-density",
            ExperimentKind::MapDk => "map-dk",
            ExperimentKind::MapTied => "map-tied",
            ExperimentKind::WalkBridge => "walk-bridge",
        }
    }

    fn is_map(&self) -> bool {
        matches!(
            self,
            ExperimentKind::MapTail | ExperimentKind::MapDensity | ExperimentKind::MapDk | ExperimentKind::MapTied
        )
    }

    fn is_lattice(&self) -> bool {
        matches!(
            self,
            ExperimentKind::Lemma22
                | ExperimentKind::RenewalSrt
                | ExperimentKind::RenewalTied
                | ExperimentKind::RenewalLlt
                | ExperimentKind::RenewalNagaev
        )
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentKind {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ExperimentKind::ALL.into_iter().find(|k| k.name() == s).ok_or_else(|| {
            let names: Vec<&str> = ExperimentKind::ALL.iter().map(|k| k.name()).collect();
            CliError::Usage(format!("unknown experiment kind `{s}`; expected one of {}", names.join(", ")))
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MapFamilyName {
    T,
    R,
}

impl fmt::Display for MapFamilyName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MapFamilyName::T => "T",
            MapFamilyName::R => "R",
        })
    }
}

impl FromStr for MapFamilyName {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "T" | "t" => Ok(MapFamilyName::T),
            "R" | "r" => Ok(MapFamilyName::R),
            _ => Err(CliError::Usage(format!("unknown map family `{s}` (expected T or R)"))),
        }
    }
}

/// Everything a run needs. Unset parameters take the kind's defaults.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub gamma: Option<f64>,
    pub p: Option<u64>,
    pub xi: Option<u64>,
    pub n: Option<u64>,
    pub trials: Option<u64>,
    pub seed: Option<u64>,
    pub g: Option<Observable>,
    pub bins: Option<u64>,
    pub iters: Option<u64>,
    pub kappa: Option<u32>,
    pub family: Option<MapFamilyName>,
    pub mc_n: Option<u64>,
    pub out: Option<PathBuf>,
}

/// Parameters after defaults are applied.
#[derive(Debug, Clone, PartialEq)]
pub struct Resolved {
    pub kind: ExperimentKind,
    pub gamma: f64,
    pub p: u64,
    pub xi: u64,
    pub n: u64,
    pub trials: u64,
    pub seed: u64,
    pub g: Observable,
    pub bins: u64,
    pub iters: u64,
    pub kappa: u32,
    pub family: MapFamilyName,
    pub mc_n: u64,
}

const KEYS: [&str; 14] = [
    "kind", "gamma", "p", "xi", "n", "trials", "seed", "g", "bins", "iters", "kappa", "family", "mc_n", "out",
];

impl ExperimentConfig {
    pub fn new(kind: ExperimentKind) -> Self {
        ExperimentConfig {
            kind,
            gamma: None,
            p: None,
            xi: None,
            n: None,
            trials: None,
            seed: None,
            g: None,
            bins: None,
            iters: None,
            kappa: None,
            family: None,
            mc_n: None,
            out: None,
        }
    }

    /// One `key = value` line per set parameter, in a fixed key order.
    pub fn to_document(&self) -> String {
        let mut out = format!("kind = {}\n", self.kind);
        let mut put = |k: &str, v: Option<String>| {
            if let Some(v) = v {
                out.push_str(&format!("{k} = {v}\n"));
            }
        };
        put("gamma", self.gamma.map(|v| v.to_string()));
        put("p", self.p.map(|v| v.to_string()));
        put("xi", self.xi.map(|v| v.to_string()));
        put("n", self.n.map(|v| v.to_string()));
        put("trials", self.trials.map(|v| v.to_string()));
        put("seed", self.seed.map(|v| v.to_string()));
        put("g", self.g.map(|v| v.to_string()));
        put("bins", self.bins.map(|v| v.to_string()));
        put("iters", self.iters.map(|v| v.to_string()));
        put("kappa", self.kappa.map(|v| v.to_string()));
        put("family", self.family.map(|v| v.to_string()));
        put("mc_n", self.mc_n.map(|v| v.to_string()));
        put("out", self.out.as_ref().map(|v| v.display().to_string()));
        out
    }

    /// Parses a document written by [`ExperimentConfig::to_document`] or by
    /// hand. Blank lines and `#` comments are ignored; unknown or repeated
    /// keys are errors.
    pub fn parse(doc: &str) -> Result<Self, CliError> {
        let mut seen = BTreeSet::new();
        let mut kind = None;
        let mut pairs = Vec::new();
        for (i, raw) in doc.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| CliError::Usage(format!("config line {}: expected `key = value`", i + 1)))?;
            let (k, v) = (k.trim(), v.trim());
            if !KEYS.contains(&k) {
                return Err(CliError::Usage(format!("config line {}: unknown key `{k}`", i + 1)));
            }
            if !seen.insert(k.to_string()) {
                return Err(CliError::Usage(format!("config line {}: key `{k}` repeated", i + 1)));
            }
            if k == "kind" {
                kind = Some(v.parse::<ExperimentKind>()?);
            } else {
                pairs.push((k.to_string(), v.to_string()));
            }
        }
        let mut cfg = ExperimentConfig::new(kind.ok_or_else(|| CliError::Usage("config has no `kind`".into()))?);
        for (k, v) in pairs {
            cfg.set(&k, &v)?;
        }
        Ok(cfg)
    }

    /// Sets one parameter from its text form.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        fn num<T: FromStr>(key: &str, value: &str) -> Result<T, CliError> {
            value
                .parse::<T>()
                .map_err(|_| CliError::Usage(format!("`{key}` expects a number, got `{value}`")))
        }
        match key {
            "kind" => self.kind = value.parse()?,
            "gamma" => self.gamma = Some(num(key, value)?),
            "p" => self.p = Some(num(key, value)?),
            "xi" => self.xi = Some(num(key, value)?),
            "n" => self.n = Some(parse_count(key, value)?),
            "trials" => self.trials = Some(parse_count(key, value)?),
            "seed" => self.seed = Some(num(key, value)?),
            "g" => self.g = Some(value.parse().map_err(|e: tdlab::LabError| CliError::Usage(e.to_string()))?),
            "bins" => self.bins = Some(num(key, value)?),
            "iters" => self.iters = Some(num(key, value)?),
            "kappa" => self.kappa = Some(num(key, value)?),
            "family" => self.family = Some(value.parse()?),
            "mc_n" => self.mc_n = Some(parse_count(key, value)?),
            "out" => self.out = Some(PathBuf::from(value)),
            _ => return Err(CliError::Usage(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    /// Applies the kind's defaults and checks every parameter against the
    /// preconditions of the operation it feeds.
    pub fn resolve(&self) -> Result<Resolved, CliError> {
        use ExperimentKind::*;
        let kind = self.kind;
        let (gamma, p, n, trials) = match kind {
            Dist => (0.5, 1, 1, 1_000_000),
            Lemma22 => (0.5, 1, 1_000_000, 1),
            Equidist => (0.5, 1, 100_000, 1),
            RenewalSrt | RenewalTied => (0.7, 1, 10_000, 1),
            RenewalLlt => (0.5, 3, 2000, 1),
            RenewalNagaev => (0.5, 1, 100_000, 1),
            RenewalContinuous => (0.6, 1, 10_000, 1_000_000),
            MapTail => (0.5, 1, 1_000_000, 1_000_000),
            MapDensity => (0.5, 1, 1, 1),
            MapDk => (0.5, 1, 100_000, 10_000),
            MapTied => (0.5, 1, 10_000, 100_000),
            WalkBridge => (0.5, 1, 2000, 1_000_000),
        };
        let g_default = match kind {
            RenewalTied => Observable::Identity,
            _ => Observable::Const(1.0),
        };
        let r = Resolved {
            kind,
            gamma: self.gamma.unwrap_or(gamma),
            p: self.p.unwrap_or(p),
            xi: self.xi.unwrap_or(1),
            n: self.n.unwrap_or(n),
            trials: self.trials.unwrap_or(trials),
            seed: self.seed.unwrap_or(1),
            g: self.g.unwrap_or(g_default),
            bins: self.bins.unwrap_or(if kind == MapDensity { 32 } else { 512 }),
            iters: self.iters.unwrap_or(50),
            kappa: self.kappa.unwrap_or(2),
            family: self.family.unwrap_or(MapFamilyName::T),
            mc_n: self.mc_n.unwrap_or(200),
        };
        r.validate()?;
        Ok(r)
    }
}

/// Accepts plain integers and the shorthand `1e6`.
fn parse_count(key: &str, value: &str) -> Result<u64, CliError> {
    if let Ok(v) = value.parse::<u64>() {
        return Ok(v);
    }
    match value.parse::<f64>() {
        Ok(v) if v >= 0.0 && v.fract() == 0.0 && v < 1.8e19 => Ok(v as u64),
        _ => Err(CliError::Usage(format!("`{key}` expects a nonnegative integer, got `{value}`"))),
    }
}

impl Resolved {
    fn validate(&self) -> Result<(), CliError> {
        use ExperimentKind::*;
        let bad = |msg: String| Err(CliError::Usage(format!("{}: {msg}", self.kind)));
        let gamma_ok = if self.kind == MapTail {
            self.gamma > 0.0 && self.gamma <= 1.0
        } else {
            self.gamma > 0.0 && self.gamma < 1.0
        };
        if !gamma_ok {
            return bad(format!("gamma must lie in (0, 1), got {}", self.gamma));
        }
        if self.n == 0 {
            return bad("n must be positive".into());
        }
        if self.kind.is_lattice() {
            if self.p == 0 {
                return bad("p must be positive".into());
            }
            if self.xi == 0 || self.xi > self.p {
                return bad(format!("xi must lie in [1, p] = [1, {}], got {}", self.p, self.xi));
            }
            if gcd(self.xi, self.p) != 1 {
                return bad(format!("xi = {} and p = {} must be coprime", self.xi, self.p));
            }
        }
        if matches!(self.g, Observable::Power(_) | Observable::Indicator(..)) {
            return bad(format!("g must be one of const, identity, exp-decay, clamp; got {}", self.g));
        }
        if self.kind.is_map() && self.family == MapFamilyName::R && self.kappa < 2 {
            return bad(format!("kappa must be an integer ≥ 2, got {}", self.kappa));
        }
        match self.kind {
            Dist if self.trials < 1000 => bad(format!("trials must be at least 1000, got {}", self.trials)),
            RenewalContinuous if self.trials == 0 => bad("trials must be positive".into()),
            RenewalLlt if self.n < 2 => bad("n must be at least 2".into()),
            MapTail if self.n < 100_000 => bad(format!("n is the return cap and must be at least 1e5, got {}", self.n)),
            MapTail if self.trials == 0 => bad("trials must be positive".into()),
            MapDensity if self.bins < 2 => bad(format!("bins per octave must be at least 2, got {}", self.bins)),
            MapDk if self.trials < 1000 => bad(format!("trials must be at least 1000, got {}", self.trials)),
            MapTied if self.trials < 10_000 => bad(format!("trials must be at least 1e4, got {}", self.trials)),
            MapTied if self.n < 10 => bad("n must be at least 10".into()),
            WalkBridge if self.n > tdlab::walk::MAX_EXACT_HORIZON || self.mc_n > tdlab::walk::MAX_EXACT_HORIZON => bad(
                format!("n and mc_n must be at most {}", tdlab::walk::MAX_EXACT_HORIZON),
            ),
            WalkBridge if self.mc_n == 0 => bad("mc_n must be positive".into()),
            WalkBridge if self.trials < 10_000 => bad(format!("trials must be at least 1e4, got {}", self.trials)),
            _ => Ok(()),
        }
    }
}
