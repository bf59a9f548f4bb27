//! Joint transmit-power / omission-count allocation.
//!
//! Minimizes `e1 + e2` over `(p, E)` subject to `t1 + t2 <= T`,
//! `0 <= p <= p_max` and integer `0 <= E <= M`. The integer variable is
//! searched exhaustively. For a fixed `E`, `e1(p) = p · bits / c(p)` is
//! strictly increasing in `p`, so the inner optimum is the smallest power
//! meeting the remaining latency budget `T - t2(E)`, which has a closed form.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::resource::{capacity, payload_bits, power_for_latency, LinkModel, OmissionProfile};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TracePoint {
    pub e: u32,
    pub p: f64,
    pub energy: f64,
    pub feasible: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AllocationResult {
    pub p_opt: f64,
    pub e_opt: u32,
    pub t1: f64,
    pub t2: f64,
    pub e1: f64,
    pub e2: f64,
    pub e_total: f64,
    pub feasible: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub per_e_trace: Option<Vec<TracePoint>>,
}

impl AllocationResult {
    fn infeasible(trace: Option<Vec<TracePoint>>) -> Self {
        AllocationResult {
            p_opt: f64::NAN,
            e_opt: 0,
            t1: f64::NAN,
            t2: f64::NAN,
            e1: f64::NAN,
            e2: f64::NAN,
            e_total: f64::NAN,
            feasible: false,
            per_e_trace: trace,
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SolveOptions {
    pub trace: bool,
}

struct Candidate {
    e: u32,
    p: f64,
    t1: f64,
    t2: f64,
    e1: f64,
    e2: f64,
}

/// Best power for one omission count, or `None` when no power within
/// `p_max` meets the latency budget.
fn inner(link: &LinkModel, profile: &OmissionProfile, m: u32, e: u32) -> Result<Option<Candidate>> {
    let load = profile.load(f64::from(e))?;
    let t2 = link.tau1 * load / link.compute_capacity;
    let budget = link.latency_budget_s - t2;
    if budget <= 0.0 {
        return Ok(None);
    }
    let bits = payload_bits(link, m, e)? as f64;
    let p = power_for_latency(link, bits, budget);
    if !(p > 0.0 && p <= link.p_max_w) {
        return Ok(None);
    }
    let t1 = bits / capacity(link, p)?;
    let f = link.compute_capacity;
    Ok(Some(Candidate {
        e,
        p,
        t1,
        t2,
        e1: t1 * p,
        e2: link.tau1 * link.tau2 * load * f * f,
    }))
}

fn search(
    link: &LinkModel,
    profile: &OmissionProfile,
    m: u32,
    e_max: u32,
    opts: SolveOptions,
) -> Result<AllocationResult> {
    link.validate()?;
    if m == 0 {
        return Err(Error::validation("message must hold at least one triple"));
    }
    if profile.m_total != m {
        return Err(Error::validation(format!(
            "profile is for {} triples, message has {m}",
            profile.m_total
        )));
    }
    let mut trace = opts.trace.then(Vec::new);
    let mut best: Option<Candidate> = None;
    for e in 0..=e_max {
        let cand = inner(link, profile, m, e)?;
        if let Some(trace) = trace.as_mut() {
            trace.push(match &cand {
                Some(c) => TracePoint {
                    e,
                    p: c.p,
                    energy: c.e1 + c.e2,
                    feasible: true,
                },
                None => TracePoint {
                    e,
                    p: f64::NAN,
                    energy: f64::NAN,
                    feasible: false,
                },
            });
        }
        if let Some(c) = cand {
            // Strict comparison keeps the smallest E on ties.
            if best.as_ref().is_none_or(|b| c.e1 + c.e2 < b.e1 + b.e2) {
                best = Some(c);
            }
        }
    }
    Ok(match best {
        Some(c) => AllocationResult {
            p_opt: c.p,
            e_opt: c.e,
            t1: c.t1,
            t2: c.t2,
            e1: c.e1,
            e2: c.e2,
            e_total: c.e1 + c.e2,
            feasible: true,
            per_e_trace: trace,
        },
        None => AllocationResult::infeasible(trace),
    })
}

/// JCCPG: every reachable omission count.
pub fn solve(link: &LinkModel, profile: &OmissionProfile, m: u32) -> Result<AllocationResult> {
    solve_with(link, profile, m, SolveOptions::default())
}

pub fn solve_with(
    link: &LinkModel,
    profile: &OmissionProfile,
    m: u32,
    opts: SolveOptions,
) -> Result<AllocationResult> {
    search(link, profile, m, profile.max_integer_omissions(), opts)
}

/// Omission counts restricted to what the first round alone can reach.
pub fn solve_simplified(
    link: &LinkModel,
    profile: &OmissionProfile,
    m: u32,
) -> Result<AllocationResult> {
    solve_simplified_with(link, profile, m, SolveOptions::default())
}

pub fn solve_simplified_with(
    link: &LinkModel,
    profile: &OmissionProfile,
    m: u32,
    opts: SolveOptions,
) -> Result<AllocationResult> {
    search(link, profile, m, profile.max_first_stage_omissions(), opts)
}

/// Sends every triple in full, spending the whole latency budget on
/// transmission. The power cap is not applied.
pub fn solve_traditional(link: &LinkModel, m: u32) -> Result<AllocationResult> {
    if !(link.latency_budget_s > 0.0) {
        return Err(Error::validation("latency budget must be > 0"));
    }
    link.validate()?;
    if m == 0 {
        return Err(Error::validation("message must hold at least one triple"));
    }
    let bits = payload_bits(link, m, 0)? as f64;
    let p = power_for_latency(link, bits, link.latency_budget_s);
    let t1 = bits / capacity(link, p)?;
    let e1 = t1 * p;
    Ok(AllocationResult {
        p_opt: p,
        e_opt: 0,
        t1,
        t2: 0.0,
        e1,
        e2: 0.0,
        e_total: e1,
        feasible: true,
        per_e_trace: None,
    })
}
