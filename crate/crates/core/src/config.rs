//! Flat key/value configuration (TOML syntax).
//!
//! ```toml
//! bandwidth_mhz = 10
//! p_max_dbm = 30
//! latency_budget_ms = 1
//! noise_w = 1e-10
//! path_gain = 1e-9
//! bits_per_field = 24
//! f_hz = 1e9
//! tau1 = 10
//! tau2 = 1e-28
//! q = [0.3, 0.2, 0.1]
//! m_total = 100
//! ```
//!
//! Every key is optional; missing keys take the [`LinkModel`] defaults.
//! Sweeps additionally read `algorithms`, `seed`, `corpus` and `max_round`.

use std::fs;
use std::path::{Path, PathBuf};

use toml::{Table, Value};

use crate::compressor::DEFAULT_MAX_ROUND;
use crate::error::{Error, Result};
use crate::resource::{dbm_to_watts, LinkModel, OmissionProfile};

pub const DEFAULT_Q: [f64; 3] = [0.3, 0.2, 0.1];
pub const DEFAULT_M_TOTAL: u32 = 100;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Config {
    pub bandwidth_mhz: Option<f64>,
    pub p_max_dbm: Option<f64>,
    pub latency_budget_ms: Option<f64>,
    pub noise_w: Option<f64>,
    pub path_gain: Option<f64>,
    pub bits_per_field: Option<u32>,
    pub f_hz: Option<f64>,
    pub tau1: Option<f64>,
    pub tau2: Option<f64>,
    pub q: Option<Vec<f64>>,
    pub m_total: Option<u32>,
    pub algorithms: Option<Vec<String>>,
    pub seed: Option<u64>,
    pub corpus: Option<PathBuf>,
    pub max_round: Option<u8>,
}

fn number(key: &str, v: &Value) -> Result<f64> {
    match v {
        Value::Float(f) => Ok(*f),
        Value::Integer(i) => Ok(*i as f64),
        other => Err(Error::config(key, format!("expected a number, found {}", other.type_str()))),
    }
}

fn integer<T: TryFrom<i64>>(key: &str, v: &Value) -> Result<T> {
    match v {
        Value::Integer(i) => {
            T::try_from(*i).map_err(|_| Error::config(key, format!("{i} is out of range")))
        }
        other => Err(Error::config(
            key,
            format!("expected an integer, found {}", other.type_str()),
        )),
    }
}

fn string(key: &str, v: &Value) -> Result<String> {
    v.as_str()
        .map(str::to_owned)
        .ok_or_else(|| Error::config(key, format!("expected a string, found {}", v.type_str())))
}

fn array<T>(key: &str, v: &Value, item: impl Fn(&str, &Value) -> Result<T>) -> Result<Vec<T>> {
    v.as_array()
        .ok_or_else(|| Error::config(key, format!("expected an array, found {}", v.type_str())))?
        .iter()
        .map(|x| item(key, x))
        .collect()
}

impl Config {
    pub fn parse(text: &str) -> Result<Self> {
        let table: Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::config("<document>", e.message().to_owned()))?;
        let mut cfg = Config::default();
        for (key, v) in &table {
            let k = key.as_str();
            match k {
                "bandwidth_mhz" => cfg.bandwidth_mhz = Some(number(k, v)?),
                "p_max_dbm" => cfg.p_max_dbm = Some(number(k, v)?),
                "latency_budget_ms" => cfg.latency_budget_ms = Some(number(k, v)?),
                "noise_w" => cfg.noise_w = Some(number(k, v)?),
                "path_gain" => cfg.path_gain = Some(number(k, v)?),
                "bits_per_field" => cfg.bits_per_field = Some(integer(k, v)?),
                "f_hz" => cfg.f_hz = Some(number(k, v)?),
                "tau1" => cfg.tau1 = Some(number(k, v)?),
                "tau2" => cfg.tau2 = Some(number(k, v)?),
                "q" => cfg.q = Some(array(k, v, number)?),
                "m_total" => cfg.m_total = Some(integer(k, v)?),
                "algorithms" => cfg.algorithms = Some(array(k, v, string)?),
                "seed" => cfg.seed = Some(integer(k, v)?),
                "corpus" => cfg.corpus = Some(PathBuf::from(string(k, v)?)),
                "max_round" => cfg.max_round = Some(integer(k, v)?),
                _ => return Err(Error::config(k, "unknown key")),
            }
        }
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&fs::read_to_string(path)?)
    }

    /// Converts the configured values to SI and validates them.
    pub fn link(&self) -> Result<LinkModel> {
        let d = LinkModel::default();
        let link = LinkModel {
            bandwidth_hz: self.bandwidth_mhz.map_or(d.bandwidth_hz, |v| v * 1e6),
            path_gain: self.path_gain.unwrap_or(d.path_gain),
            noise_power_w: self.noise_w.unwrap_or(d.noise_power_w),
            bits_per_field: self.bits_per_field.unwrap_or(d.bits_per_field),
            p_max_w: self.p_max_dbm.map_or(d.p_max_w, dbm_to_watts),
            latency_budget_s: self.latency_budget_ms.map_or(d.latency_budget_s, |v| v * 1e-3),
            compute_capacity: self.f_hz.unwrap_or(d.compute_capacity),
            tau1: self.tau1.unwrap_or(d.tau1),
            tau2: self.tau2.unwrap_or(d.tau2),
        };
        let checks = [
            ("bandwidth_mhz", link.bandwidth_hz),
            ("path_gain", link.path_gain),
            ("noise_w", link.noise_power_w),
            ("bits_per_field", f64::from(link.bits_per_field)),
            ("p_max_dbm", link.p_max_w),
            ("latency_budget_ms", link.latency_budget_s),
            ("f_hz", link.compute_capacity),
            ("tau1", link.tau1),
            ("tau2", link.tau2),
        ];
        for (key, v) in checks {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::config(key, format!("must be finite and positive, got {v}")));
            }
        }
        Ok(link)
    }

    pub fn m_total(&self) -> Result<u32> {
        match self.m_total.unwrap_or(DEFAULT_M_TOTAL) {
            0 => Err(Error::config("m_total", "must be at least 1")),
            m => Ok(m),
        }
    }

    pub fn q(&self) -> Vec<f64> {
        self.q.clone().unwrap_or_else(|| DEFAULT_Q.to_vec())
    }

    /// Fixed-ratio profile from `q` and `m_total`.
    pub fn profile(&self) -> Result<OmissionProfile> {
        OmissionProfile::new(self.m_total()?, self.q())
            .map_err(|e| Error::config("q", e.to_string()))
    }

    pub fn max_round(&self) -> Result<u8> {
        match self.max_round.unwrap_or(DEFAULT_MAX_ROUND) {
            0 => Err(Error::config("max_round", "must be at least 1")),
            r => Ok(r),
        }
    }
}
