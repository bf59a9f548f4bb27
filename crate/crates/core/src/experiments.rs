//! Parameter sweeps over message size, bandwidth or latency budget.

use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;

use crate::config::Config;
use crate::error::{Error, Result};
use crate::kg::{load_corpus, Corpus};
use crate::optimizer::{solve, solve_simplified, solve_traditional, AllocationResult};
use crate::probgraph::ProbabilityGraph;
use crate::resource::{estimate_q, LinkModel, OmissionProfile};

pub const CSV_HEADER: [&str; 8] = [
    "var", "algo", "e_total_j", "e1_j", "e2_j", "p_w", "e_omit", "feasible",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepVariable {
    /// Triples per message.
    MTotal,
    /// Bandwidth in MHz.
    Bandwidth,
    /// Latency budget in ms.
    LatencyBudget,
}

impl SweepVariable {
    pub fn name(self) -> &'static str {
        match self {
            SweepVariable::MTotal => "m_total",
            SweepVariable::Bandwidth => "bandwidth_mhz",
            SweepVariable::LatencyBudget => "latency_budget_ms",
        }
    }
}

impl FromStr for SweepVariable {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "m_total" => Ok(SweepVariable::MTotal),
            "bandwidth" | "bandwidth_mhz" => Ok(SweepVariable::Bandwidth),
            "latency_budget" | "latency_budget_ms" => Ok(SweepVariable::LatencyBudget),
            other => Err(Error::config("var", format!("unknown sweep variable {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Jccpg,
    Simplified,
    Traditional,
}

impl Algorithm {
    pub const ALL: [Algorithm; 3] = [Algorithm::Jccpg, Algorithm::Simplified, Algorithm::Traditional];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Jccpg => "jccpg",
            Algorithm::Simplified => "simplified",
            Algorithm::Traditional => "traditional",
        }
    }

    pub fn run(self, link: &LinkModel, profile: &OmissionProfile, m: u32) -> Result<AllocationResult> {
        match self {
            Algorithm::Jccpg => solve(link, profile, m),
            Algorithm::Simplified => solve_simplified(link, profile, m),
            Algorithm::Traditional => solve_traditional(link, m),
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::config("algorithms", format!("unknown algorithm {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ProfileSource {
    Fixed(Vec<f64>),
    /// Ratios estimated by compressing every sample of the corpus against its own graph.
    Corpus { corpus: Corpus, max_round: u8 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub variable: SweepVariable,
    pub grid: Vec<f64>,
    pub link: LinkModel,
    /// Message size used when the sweep variable is not `m_total`.
    pub m_total: u32,
    pub profile: ProfileSource,
    pub algorithms: Vec<Algorithm>,
    /// Recorded with the output. Every stage of the sweep is deterministic.
    pub seed: u64,
}

impl SweepSpec {
    /// The default evaluation setup over the given variable and grid.
    pub fn new(variable: SweepVariable, grid: Vec<f64>) -> Self {
        SweepSpec {
            variable,
            grid,
            link: LinkModel::default(),
            m_total: crate::config::DEFAULT_M_TOTAL,
            profile: ProfileSource::Fixed(crate::config::DEFAULT_Q.to_vec()),
            algorithms: Algorithm::ALL.to_vec(),
            seed: 0,
        }
    }

    pub fn from_config(cfg: &Config, variable: SweepVariable, grid: Vec<f64>) -> Result<Self> {
        let profile = match &cfg.corpus {
            Some(path) => ProfileSource::Corpus {
                corpus: load_corpus(path)?,
                max_round: cfg.max_round()?,
            },
            None => ProfileSource::Fixed(cfg.q()),
        };
        let algorithms = match &cfg.algorithms {
            Some(names) => names.iter().map(|n| n.parse()).collect::<Result<Vec<_>>>()?,
            None => Algorithm::ALL.to_vec(),
        };
        Ok(SweepSpec {
            variable,
            grid,
            link: cfg.link()?,
            m_total: cfg.m_total()?,
            profile,
            algorithms,
            seed: cfg.seed.unwrap_or(0),
        })
    }

    fn validate(&self) -> Result<()> {
        if self.grid.is_empty() {
            return Err(Error::config("grid", "must not be empty"));
        }
        if self.grid.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::config("grid", "must be strictly increasing"));
        }
        if self.algorithms.is_empty() {
            return Err(Error::config("algorithms", "must not be empty"));
        }
        for &v in &self.grid {
            let ok = match self.variable {
                SweepVariable::MTotal => v >= 1.0 && v.fract() == 0.0 && v <= f64::from(u32::MAX),
                _ => v.is_finite() && v > 0.0,
            };
            if !ok {
                return Err(Error::config(
                    "grid",
                    format!("{v} is not a valid {}", self.variable.name()),
                ));
            }
        }
        self.link.validate()
    }

    fn resolve_q(&self) -> Result<Vec<f64>> {
        match &self.profile {
            ProfileSource::Fixed(q) => Ok(q.clone()),
            ProfileSource::Corpus { corpus, max_round } => {
                let g = ProbabilityGraph::build(corpus)?;
                Ok(estimate_q(&g, corpus, *max_round)?.q)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub value: f64,
    pub algorithm: Algorithm,
    pub result: AllocationResult,
}

/// One row per grid point per algorithm, in grid order then algorithm order.
/// Infeasible cells are kept with `feasible == false`.
pub fn run_sweep(spec: &SweepSpec) -> Result<Vec<SweepRow>> {
    spec.validate()?;
    let q = spec.resolve_q()?;
    let per_point = spec
        .grid
        .par_iter()
        .map(|&value| {
            let mut link = spec.link.clone();
            let mut m = spec.m_total;
            match spec.variable {
                SweepVariable::MTotal => m = value as u32,
                SweepVariable::Bandwidth => link.bandwidth_hz = value * 1e6,
                SweepVariable::LatencyBudget => link.latency_budget_s = value * 1e-3,
            }
            let profile = OmissionProfile::new(m, q.clone())?;
            spec.algorithms
                .iter()
                .map(|&algorithm| {
                    Ok(SweepRow {
                        value,
                        algorithm,
                        result: algorithm.run(&link, &profile, m)?,
                    })
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(per_point.into_iter().flatten().collect())
}

pub fn write_csv<W: Write>(rows: &[SweepRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let csv_err = |e: csv::Error| Error::Io(e.into());
    w.write_record(CSV_HEADER).map_err(csv_err)?;
    for row in rows {
        let r = &row.result;
        let cells: [String; 8] = if r.feasible {
            [
                row.value.to_string(),
                row.algorithm.to_string(),
                r.e_total.to_string(),
                r.e1.to_string(),
                r.e2.to_string(),
                r.p_opt.to_string(),
                r.e_opt.to_string(),
                "true".into(),
            ]
        } else {
            [
                row.value.to_string(),
                row.algorithm.to_string(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                "false".into(),
            ]
        };
        w.write_record(&cells).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn emit_csv(rows: &[SweepRow], path: impl AsRef<Path>) -> Result<()> {
    write_csv(rows, BufWriter::new(File::create(path)?))
}

#[derive(Debug, Serialize)]
struct Series {
    algo: Algorithm,
    x: Vec<f64>,
    y: Vec<Option<f64>>,
}

#[derive(Debug, Serialize)]
struct PlotData {
    x_label: &'static str,
    y_label: &'static str,
    seed: u64,
    series: Vec<Series>,
}

/// x/y series per algorithm; infeasible points are `null`.
pub fn plot_data(rows: &[SweepRow], variable: SweepVariable, seed: u64) -> serde_json::Value {
    let mut series: Vec<Series> = Vec::new();
    for row in rows {
        let idx = match series.iter().position(|s| s.algo == row.algorithm) {
            Some(i) => i,
            None => {
                series.push(Series {
                    algo: row.algorithm,
                    x: Vec::new(),
                    y: Vec::new(),
                });
                series.len() - 1
            }
        };
        series[idx].x.push(row.value);
        series[idx]
            .y
            .push(row.result.feasible.then_some(row.result.e_total));
    }
    serde_json::to_value(PlotData {
        x_label: variable.name(),
        y_label: "e_total_j",
        seed,
        series,
    })
    .expect("plot data is plain JSON")
}

pub fn emit_plotdata(
    rows: &[SweepRow],
    variable: SweepVariable,
    seed: u64,
    path: impl AsRef<Path>,
) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut out, &plot_data(rows, variable, seed))
        .map_err(|e| Error::Io(e.into()))?;
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(())
}
