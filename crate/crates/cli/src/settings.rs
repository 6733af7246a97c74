//! Flat `key = value` configuration merged with command-line flags.
//!
//! Flags win over the file; every value actually read by a command is recorded
//! (defaults included) so the manifest can echo the resolved run.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use crate::Failure;

/// Keys accepted in a config file, spelled as the long flags.
pub const KEYS: &[&str] = &[
    "model", "L", "N", "J", "gamma", "U", "k", "delta-n", "tmax", "dt", "sample-dt", "seed", "ensemble", "init",
    "method", "out", "format", "jobs", "sweep", "m", "scan-p", "residual-L", "eta", "delta", "a0", "a1", "tmin",
    "points",
];

#[derive(Debug, Default, Clone)]
pub struct Settings {
    values: BTreeMap<String, String>,
    resolved: BTreeMap<String, String>,
}

fn normalize(key: &str) -> String {
    key.trim().replace('_', "-")
}

pub fn parse_config(text: &str) -> Result<BTreeMap<String, String>, Failure> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(Failure::Config(format!("config line {}: expected `key = value`, got {raw:?}", i + 1)));
        };
        let key = normalize(k);
        if !KEYS.contains(&key.as_str()) {
            return Err(Failure::Config(format!("config line {}: unknown key {key:?}", i + 1)));
        }
        out.insert(key, v.trim().to_string());
    }
    Ok(out)
}

impl Settings {
    /// File values (if any) overridden by the flags that were given.
    pub fn load(file: Option<&Path>, flags: BTreeMap<String, String>) -> Result<Self, Failure> {
        let mut values = match file {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| Failure::Config(format!("cannot read config {}: {e}", p.display())))?;
                parse_config(&text)?
            }
            None => BTreeMap::new(),
        };
        values.extend(flags);
        Ok(Self { values, resolved: BTreeMap::new() })
    }

    fn parse<T: FromStr>(key: &str, raw: &str) -> Result<T, Failure>
    where
        T::Err: Display,
    {
        raw.parse().map_err(|e| Failure::Config(format!("{key} = {raw:?}: {e}")))
    }

    pub fn get<T: FromStr + Display>(&mut self, key: &str, default: T) -> Result<T, Failure>
    where
        T::Err: Display,
    {
        let v = match self.values.get(key) {
            Some(raw) => Self::parse(key, raw)?,
            None => default,
        };
        self.resolved.insert(key.into(), v.to_string());
        Ok(v)
    }

    pub fn get_opt<T: FromStr + Display>(&mut self, key: &str) -> Result<Option<T>, Failure>
    where
        T::Err: Display,
    {
        let Some(raw) = self.values.get(key) else { return Ok(None) };
        let v: T = Self::parse(key, raw)?;
        self.resolved.insert(key.into(), v.to_string());
        Ok(Some(v))
    }

    /// Record a derived value that was not read from the sources.
    pub fn note(&mut self, key: &str, value: impl Display) {
        self.resolved.insert(key.into(), value.to_string());
    }

    pub fn resolved(&self) -> &BTreeMap<String, String> {
        &self.resolved
    }
}

/// `parameter=start:stop:step`, inclusive of `stop` up to rounding.
#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    pub parameter: String,
    pub values: Vec<f64>,
}

pub const SWEEPABLE: &[&str] = &["J", "gamma", "U", "k", "delta-n", "delta", "eta"];

impl FromStr for Sweep {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        let (name, range) = s.split_once('=').ok_or("expected parameter=start:stop:step")?;
        let parameter = normalize(name);
        if !SWEEPABLE.contains(&parameter.as_str()) {
            return Err(format!("cannot sweep {parameter:?}; choose one of {SWEEPABLE:?}"));
        }
        let parts: Vec<f64> = range.split(':').map(|x| x.trim().parse::<f64>()).collect::<Result<_, _>>().map_err(|e| e.to_string())?;
        let [start, stop, step] = parts[..] else { return Err("expected start:stop:step".into()) };
        if !(step > 0.0) || !start.is_finite() || !stop.is_finite() || stop < start {
            return Err("need finite start ≤ stop and step > 0".into());
        }
        let n = ((stop - start) / step + 1e-9).floor() as usize;
        if n > 100_000 {
            return Err(format!("{} sweep points is too many", n + 1));
        }
        // multiply rather than accumulate so 0.15 + 9·0.01 prints as 0.24
        let values = (0..=n).map(|i| round12(start + i as f64 * step)).collect();
        Ok(Sweep { parameter, values })
    }
}

impl Display for Sweep {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let (a, b) = (self.values[0], self.values[self.values.len() - 1]);
        let step = if self.values.len() > 1 { round12(self.values[1] - a) } else { 0.0 };
        write!(f, "{}={a}:{b}:{step}", self.parameter)
    }
}

fn round12(x: f64) -> f64 {
    (x * 1e12).round() / 1e12
}
