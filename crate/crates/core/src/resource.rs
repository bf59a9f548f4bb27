//! Latency and energy model for one compressed message.
//!
//! All quantities are SI: watts, hertz, seconds, joules, bits.
//!
//! * capacity `c = B log2(1 + p h / σ²)`
//! * payload `R (3M - E)` bits
//! * communication latency `t1 = R (3M - E) / c`, energy `e1 = t1 p`
//! * computation latency `t2 = τ1 l(E) / f`, energy `e2 = τ1 τ2 l(E) f²`
//!
//! `l(E)` is the expected number of comparisons needed to omit `E` relations,
//! a piecewise-linear function built from the per-stage omission ratios `q`.

use std::collections::BTreeMap;

use num_traits::Num;
use rayon::prelude::*;
use serde::Serialize;

use crate::compressor::{compress, StageStats};
use crate::error::{Error, Result};
use crate::kg::Corpus;
use crate::probgraph::ProbabilityGraph;

/// Channel and compute parameters.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinkModel {
    pub bandwidth_hz: f64,
    /// Dimensionless channel power gain.
    pub path_gain: f64,
    pub noise_power_w: f64,
    pub bits_per_field: u32,
    pub p_max_w: f64,
    pub latency_budget_s: f64,
    /// CPU cycles per second.
    pub compute_capacity: f64,
    /// CPU cycles per comparison.
    pub tau1: f64,
    /// Effective switched capacitance.
    pub tau2: f64,
}

impl Default for LinkModel {
    fn default() -> Self {
        LinkModel {
            bandwidth_hz: 10e6,
            path_gain: 1e-9,
            noise_power_w: 1e-10,
            bits_per_field: 24,
            p_max_w: 1.0,
            latency_budget_s: 1e-3,
            compute_capacity: 1e9,
            tau1: 10.0,
            tau2: 1e-28,
        }
    }
}

impl LinkModel {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("bandwidth_hz", self.bandwidth_hz),
            ("path_gain", self.path_gain),
            ("noise_power_w", self.noise_power_w),
            ("bits_per_field", f64::from(self.bits_per_field)),
            ("p_max_w", self.p_max_w),
            ("latency_budget_s", self.latency_budget_s),
            ("compute_capacity", self.compute_capacity),
            ("tau1", self.tau1),
            ("tau2", self.tau2),
        ];
        for (name, v) in fields {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::validation(format!("{name} must be finite and > 0, got {v}")));
            }
        }
        Ok(())
    }

    /// Received SNR per watt of transmit power.
    pub fn snr_per_watt(&self) -> f64 {
        self.path_gain / self.noise_power_w
    }
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn capacity(link: &LinkModel, p: f64) -> Result<f64> {
    if p.is_nan() || p < 0.0 {
        return Err(Error::validation(format!("transmit power must be >= 0, got {p}")));
    }
    Ok(link.bandwidth_hz * (p * link.snr_per_watt()).ln_1p() / std::f64::consts::LN_2)
}

pub fn payload_bits(link: &LinkModel, m: u32, e: u32) -> Result<u64> {
    if e > m {
        return Err(Error::validation(format!("omissions {e} exceed triple count {m}")));
    }
    Ok(u64::from(link.bits_per_field) * (3 * u64::from(m) - u64::from(e)))
}

/// Seconds to send the payload at power `p`; `f64::INFINITY` when `p == 0`.
pub fn comm_latency(link: &LinkModel, m: u32, e: u32, p: f64) -> Result<f64> {
    let bits = payload_bits(link, m, e)? as f64;
    let c = capacity(link, p)?;
    if c == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(bits / c)
}

/// Smallest transmit power that delivers `bits` within `seconds`.
pub fn power_for_latency(link: &LinkModel, bits: f64, seconds: f64) -> f64 {
    let spectral = bits / (link.bandwidth_hz * seconds);
    (spectral * std::f64::consts::LN_2).exp_m1() / link.snr_per_watt()
}

/// One linear piece of `l(E)` on `(start, end]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LoadSegment<T> {
    pub start: T,
    pub end: T,
    /// `l(start)`
    pub base: T,
    pub slope: T,
}

impl<T: Clone + Num> LoadSegment<T> {
    pub fn eval(&self, e: T) -> T {
        self.base.clone() + (e - self.start.clone()) * self.slope.clone()
    }
}

/// Per-stage omission caps: `E_1 = M q_1`, `E_n = (M - E_1 - ... - E_{n-1}) q_n`.
pub fn omission_caps<T: Clone + Num>(m: T, q: &[T]) -> Vec<T> {
    let mut remaining = m;
    q.iter()
        .map(|qn| {
            let cap = remaining.clone() * qn.clone();
            remaining = remaining.clone() - cap.clone();
            cap
        })
        .collect()
}

/// Pieces of `l(E)` for `M` triples and stage ratios `q`.
///
/// Stage 1 costs one comparison per triple, so its piece has slope `1/q_1`
/// and ends at `l(E_1) = M`. Stage `n >= 2` compares each remaining triple
/// against the `E_{n-1}` triples omitted by the stage before, so its piece
/// has slope `E_{n-1}/q_n`. Each base is accumulated from the comparison
/// count `(M - E_1 - ... - E_{n-1}) E_{n-1}` rather than from slope times
/// width; the two agree exactly, which is what makes `l` continuous.
pub fn load_segments<T: Clone + Num>(m: T, q: &[T]) -> Vec<LoadSegment<T>> {
    let caps = omission_caps(m.clone(), q);
    let mut segments = Vec::with_capacity(q.len());
    let mut start = T::zero();
    let mut remaining = m.clone();
    let mut level = T::zero();
    for (n, (qn, cap)) in q.iter().zip(&caps).enumerate() {
        let end = start.clone() + cap.clone();
        let slope = if n == 0 {
            T::one() / qn.clone()
        } else {
            caps[n - 1].clone() / qn.clone()
        };
        segments.push(LoadSegment {
            start: start.clone(),
            end: end.clone(),
            base: level.clone(),
            slope,
        });
        level = if n == 0 {
            m.clone()
        } else {
            level + remaining.clone() * caps[n - 1].clone()
        };
        remaining = remaining - cap.clone();
        start = end;
    }
    segments
}

/// Evaluates `l(e)`; `None` when `e` is negative or beyond the last breakpoint.
pub fn eval_load<T: Clone + Num + PartialOrd>(segments: &[LoadSegment<T>], e: T) -> Option<T> {
    if e < T::zero() {
        return None;
    }
    if e == T::zero() {
        return Some(T::zero());
    }
    segments
        .iter()
        .find(|s| e <= s.end)
        .map(|s| s.eval(e))
}

const REACH_TOLERANCE: f64 = 1e-9;

/// Omission statistics for messages of `m_total` triples.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OmissionProfile {
    pub m_total: u32,
    pub q: Vec<f64>,
    pub e_caps: Vec<f64>,
    pub breakpoints: Vec<f64>,
    #[serde(skip)]
    segments: Vec<LoadSegment<f64>>,
}

impl OmissionProfile {
    pub fn new(m_total: u32, q: Vec<f64>) -> Result<Self> {
        if let Some(bad) = q.iter().find(|&&v| !(v > 0.0 && v <= 1.0)) {
            return Err(Error::validation(format!("omission ratio {bad} outside (0, 1]")));
        }
        let m = f64::from(m_total);
        let e_caps = omission_caps(m, &q);
        let breakpoints = e_caps
            .iter()
            .scan(0.0, |acc, e| {
                *acc += e;
                Some(*acc)
            })
            .collect();
        let segments = load_segments(m, &q);
        Ok(OmissionProfile {
            m_total,
            q,
            e_caps,
            breakpoints,
            segments,
        })
    }

    /// Same ratios, rescaled to a different message size.
    pub fn with_m_total(&self, m_total: u32) -> Result<Self> {
        Self::new(m_total, self.q.clone())
    }

    pub fn segments(&self) -> &[LoadSegment<f64>] {
        &self.segments
    }

    /// `Σ E_n`, the most relations the profile can omit.
    pub fn total_omissible(&self) -> f64 {
        self.breakpoints.last().copied().unwrap_or(0.0)
    }

    /// Largest integer `E` in the profile's reachable range, capped at `m_total`.
    pub fn max_integer_omissions(&self) -> u32 {
        let reach = (self.total_omissible() * (1.0 + REACH_TOLERANCE) + REACH_TOLERANCE).floor();
        (reach as u32).min(self.m_total)
    }

    /// Largest integer `E` reachable in the first stage alone.
    pub fn max_first_stage_omissions(&self) -> u32 {
        let e1 = self.e_caps.first().copied().unwrap_or(0.0);
        ((e1 * (1.0 + REACH_TOLERANCE) + REACH_TOLERANCE).floor() as u32).min(self.m_total)
    }

    /// `l(e)`: expected comparisons needed to omit `e` relations.
    pub fn load(&self, e: f64) -> Result<f64> {
        let total = self.total_omissible();
        let unreachable = || Error::UnreachableOmission {
            requested: e,
            reachable: total,
        };
        if e.is_nan() || e < 0.0 {
            return Err(unreachable());
        }
        let slack = REACH_TOLERANCE * total.max(1.0);
        if e > total + slack {
            return Err(unreachable());
        }
        eval_load(&self.segments, e.min(total)).ok_or_else(unreachable)
    }
}

pub fn comp_latency(link: &LinkModel, profile: &OmissionProfile, e: f64) -> Result<f64> {
    Ok(link.tau1 * profile.load(e)? / link.compute_capacity)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Energies {
    pub e1: f64,
    pub e2: f64,
}

impl Energies {
    pub fn total(&self) -> f64 {
        self.e1 + self.e2
    }
}

/// Communication and computation energy. `e1` is infinite at `p == 0`.
pub fn energies(
    link: &LinkModel,
    profile: &OmissionProfile,
    m: u32,
    e: u32,
    p: f64,
) -> Result<Energies> {
    let t1 = comm_latency(link, m, e, p)?;
    let e1 = if t1.is_infinite() { f64::INFINITY } else { t1 * p };
    let l = profile.load(f64::from(e))?;
    let f = link.compute_capacity;
    Ok(Energies {
        e1,
        e2: link.tau1 * link.tau2 * l * f * f,
    })
}

/// Stage statistics summed over many compression reports.
///
/// Stages are keyed by `(round, cycle)`. A message whose round ended before
/// cycle `c` still counts its remaining triples as entering `(round, c)`,
/// with nothing omitted.
pub fn aggregate_stages<'a>(reports: impl IntoIterator<Item = &'a [StageStats]>) -> Vec<StageStats> {
    let reports: Vec<&[StageStats]> = reports.into_iter().collect();
    let mut cycles: BTreeMap<u8, u32> = BTreeMap::new();
    for stages in &reports {
        for s in stages.iter() {
            let c = cycles.entry(s.round).or_default();
            *c = (*c).max(s.cycle);
        }
    }
    let mut out: Vec<StageStats> = cycles
        .iter()
        .flat_map(|(&round, &n)| {
            (1..=n).map(move |cycle| StageStats {
                round,
                cycle,
                entering: 0,
                omitted: 0,
                comparisons: 0,
            })
        })
        .collect();
    for stages in &reports {
        for slot in out.iter_mut() {
            let in_round: Vec<&StageStats> =
                stages.iter().filter(|s| s.round == slot.round).collect();
            if let Some(s) = in_round.iter().find(|s| s.cycle == slot.cycle) {
                slot.entering += s.entering;
                slot.omitted += s.omitted;
                slot.comparisons += s.comparisons;
            } else if let Some(last) = in_round.last() {
                slot.entering += last.entering - last.omitted;
            }
        }
    }
    out
}

/// Ratios `q_n` from aggregated stages; stages that omitted nothing are dropped.
pub fn q_from_stages(stages: &[StageStats]) -> Vec<f64> {
    stages
        .iter()
        .filter(|s| s.entering > 0 && s.omitted > 0)
        .map(|s| s.omitted as f64 / s.entering as f64)
        .collect()
}

/// Compresses every sample of the corpus against `g` and turns the pooled
/// per-stage omission counts into a profile. `m_total` is the mean sample size.
pub fn estimate_q(g: &ProbabilityGraph, corpus: &Corpus, max_round: u8) -> Result<OmissionProfile> {
    let stages = estimate_stages(g, corpus, max_round)?;
    let total = corpus.triple_count() as f64;
    let m_total = ((total / f64::from(corpus.n_samples())).round() as u32).max(1);
    OmissionProfile::new(m_total, q_from_stages(&stages))
}

/// Pooled stage statistics behind [`estimate_q`].
pub fn estimate_stages(
    g: &ProbabilityGraph,
    corpus: &Corpus,
    max_round: u8,
) -> Result<Vec<StageStats>> {
    if corpus.triple_count() == 0 {
        return Err(Error::validation("corpus contains no triples"));
    }
    let reports = corpus
        .samples()
        .par_iter()
        .map(|kg| compress(g, kg, max_round).map(|(_, report)| report.stages))
        .collect::<Result<Vec<_>>>()?;
    Ok(aggregate_stages(reports.iter().map(Vec::as_slice)))
}
