//! Flat `key = value` and JSON encodings of [`ModelParams`].
//!
//! Both formats use exactly the keys in [`PARAM_KEYS`]; unknown keys are
//! rejected.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{CostFunction, ModelParams};

pub const PARAM_KEYS: [&str; 8] = ["n", "d_max", "v", "u", "w", "z", "cost_a", "cost_beta"];

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ParamsRecord {
    n: f64,
    d_max: f64,
    v: f64,
    u: f64,
    w: f64,
    z: f64,
    cost_a: f64,
    cost_beta: f64,
}

impl From<ModelParams> for ParamsRecord {
    fn from(p: ModelParams) -> Self {
        ParamsRecord {
            n: p.n,
            d_max: p.d_max,
            v: p.v,
            u: p.u,
            w: p.w,
            z: p.z,
            cost_a: p.cost.a,
            cost_beta: p.cost.beta,
        }
    }
}

impl From<ParamsRecord> for ModelParams {
    fn from(r: ParamsRecord) -> Self {
        ModelParams {
            n: r.n,
            d_max: r.d_max,
            v: r.v,
            u: r.u,
            w: r.w,
            z: r.z,
            cost: CostFunction::new(r.cost_a, r.cost_beta),
        }
    }
}

impl Serialize for ModelParams {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        ParamsRecord::from(*self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for ModelParams {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        ParamsRecord::deserialize(d).map(Into::into)
    }
}

impl ModelParams {
    /// Value of one flat key.
    pub fn get(&self, key: &str) -> Result<f64> {
        Ok(match key {
            "n" => self.n,
            "d_max" => self.d_max,
            "v" => self.v,
            "u" => self.u,
            "w" => self.w,
            "z" => self.z,
            "cost_a" => self.cost.a,
            "cost_beta" => self.cost.beta,
            other => return Err(Error::UnknownKey(other.to_string())),
        })
    }

    /// Overwrites one flat key.
    pub fn set(&mut self, key: &str, value: f64) -> Result<()> {
        let slot = match key {
            "n" => &mut self.n,
            "d_max" => &mut self.d_max,
            "v" => &mut self.v,
            "u" => &mut self.u,
            "w" => &mut self.w,
            "z" => &mut self.z,
            "cost_a" => &mut self.cost.a,
            "cost_beta" => &mut self.cost.beta,
            other => return Err(Error::UnknownKey(other.to_string())),
        };
        *slot = value;
        Ok(())
    }

    /// Parses a complete key=value file. Every key must appear exactly once;
    /// blank lines and `#` comments are ignored.
    pub fn from_kv_str(text: &str) -> Result<Self> {
        let pairs = parse_kv(text)?;
        let mut params = ModelParams::default();
        for key in PARAM_KEYS {
            match pairs.get(key) {
                Some(&value) => params.set(key, value)?,
                None => return Err(Error::MissingKey(key)),
            }
        }
        Ok(params)
    }

    pub fn to_kv_string(&self) -> String {
        let mut out = String::new();
        for key in PARAM_KEYS {
            // `{}` on f64 prints the shortest string that round-trips.
            let _ = writeln!(out, "{key} = {}", self.get(key).expect("known key"));
        }
        out
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("params serialize")
    }
}

/// Parses `key = value` lines into a map, rejecting unknown and repeated keys.
pub fn parse_kv(text: &str) -> Result<BTreeMap<String, f64>> {
    let mut map = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = parse_assignment(line).map_err(|message| Error::Config {
            line: idx + 1,
            message,
        })?;
        if !PARAM_KEYS.contains(&key.as_str()) {
            return Err(Error::UnknownKey(key));
        }
        if map.insert(key.clone(), value).is_some() {
            return Err(Error::DuplicateKey(key));
        }
    }
    Ok(map)
}

/// Splits one `key=value` assignment. Used for file lines and `--set` overrides.
pub fn parse_assignment(text: &str) -> std::result::Result<(String, f64), String> {
    let (key, value) = text
        .split_once('=')
        .ok_or_else(|| format!("expected `key = value`, got `{text}`"))?;
    let key = key.trim();
    let value: f64 = value
        .trim()
        .parse()
        .map_err(|e| format!("bad number for `{key}`: {e}"))?;
    Ok((key.to_string(), value))
}
