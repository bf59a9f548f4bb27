//! Generators and independent oracles shared by the integration suites.
//!
//! Nothing here calls into the code under test for the quantity it checks:
//! probabilities are recounted from per-sample triple sets, the load function
//! is transcribed from its segment formulas, and the allocation oracle is a
//! refining grid search over `(p, E)`.

#![allow(dead_code)]

use std::collections::{BTreeSet, HashSet};

use num_bigint::BigInt;
use num_rational::{BigRational, Ratio};
use rand::seq::SliceRandom;
use rand::Rng;
use semcom::kg::{parse_corpus, Corpus, KnowledgeGraph, Triple, Vocabulary};
use semcom::resource::LinkModel;

// --- random corpora ----------------------------------------------------------

pub struct CorpusShape {
    pub max_samples: usize,
    pub max_triples: usize,
    pub entities: usize,
    pub relations: usize,
}

/// Random corpus as JSON-lines text plus per-sample label triples.
pub fn random_corpus_text<R: Rng>(rng: &mut R, shape: &CorpusShape) -> (String, Vec<Vec<[String; 3]>>) {
    let n = rng.gen_range(1..=shape.max_samples);
    let mut budget = shape.max_triples;
    let mut samples = Vec::with_capacity(n);
    for _ in 0..n {
        let cap = budget.min(2 * shape.max_triples / n.max(1) + 1);
        let k = rng.gen_range(0..=cap);
        let mut seen = BTreeSet::new();
        for _ in 0..k {
            let h = rng.gen_range(0..shape.entities);
            let t = rng.gen_range(0..shape.entities);
            let r = rng.gen_range(0..shape.relations);
            seen.insert((h, r, t));
        }
        budget -= seen.len();
        let mut triples: Vec<[String; 3]> = seen
            .into_iter()
            .map(|(h, r, t)| [format!("e{h}"), format!("r{r}"), format!("e{t}")])
            .collect();
        triples.shuffle(rng);
        samples.push(triples);
    }
    if samples.iter().all(Vec::is_empty) {
        samples[0].push(["e0".into(), "r0".into(), "e1".into()]);
    }
    let text = samples
        .iter()
        .enumerate()
        .map(|(i, ts)| serde_json::json!({"sample": i + 1, "triples": ts}).to_string())
        .collect::<Vec<_>>()
        .join("\n");
    (text, samples)
}

pub fn random_corpus<R: Rng>(rng: &mut R, shape: &CorpusShape) -> Corpus {
    parse_corpus(&random_corpus_text(rng, shape).0).expect("generated corpus parses")
}

/// A message to compress: either a corpus sample or a mix of known triples
/// and triples the graph has never seen (new relations and new entities).
pub fn random_message<R: Rng>(rng: &mut R, corpus: &Corpus, vocab: &mut Vocabulary) -> KnowledgeGraph {
    if rng.gen_bool(0.6) {
        let id = rng.gen_range(1..=corpus.n_samples());
        let mut kg = corpus.sample(id).unwrap().clone();
        kg.sample_id = None;
        return kg;
    }
    let known: Vec<Triple> = corpus
        .samples()
        .iter()
        .flat_map(|kg| kg.triples().iter().copied())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let mut set = BTreeSet::new();
    let k = rng.gen_range(0..=known.len().min(40));
    for _ in 0..k {
        set.insert(*known.choose(rng).unwrap());
    }
    for _ in 0..rng.gen_range(0..4) {
        let t = vocab
            .intern_triple(
                &format!("e{}", rng.gen_range(0..12)),
                &format!("novel{}", rng.gen_range(0..2)),
                &format!("x{}", rng.gen_range(0..3)),
            )
            .unwrap();
        set.insert(t);
    }
    let mut triples: Vec<Triple> = set.into_iter().collect();
    triples.shuffle(rng);
    KnowledgeGraph::new(triples, None).unwrap()
}

// --- brute-force probability oracle -----------------------------------------

/// Per-sample triple sets; the oracle never looks at the probability graph.
pub struct CountingOracle {
    samples: Vec<HashSet<Triple>>,
}

impl CountingOracle {
    pub fn new(corpus: &Corpus) -> Self {
        CountingOracle {
            samples: corpus.samples().iter().map(KnowledgeGraph::triple_set).collect(),
        }
    }

    fn holds(&self, n: usize, t: &Triple) -> bool {
        self.samples[n].contains(t)
    }

    /// Every relation seen between `head` and `tail` in any sample.
    pub fn relations_on(&self, t: &Triple) -> BTreeSet<semcom::RelationId> {
        self.samples
            .iter()
            .flat_map(|s| s.iter())
            .filter(|x| x.head == t.head && x.tail == t.tail)
            .map(|x| x.relation)
            .collect()
    }

    pub fn prob(&self, t: &Triple) -> Option<Ratio<u64>> {
        let rels = self.relations_on(t);
        if !rels.contains(&t.relation) {
            return None;
        }
        let count = |r| {
            let x = Triple::new(t.head, r, t.tail);
            (0..self.samples.len()).filter(|&n| self.holds(n, &x)).count() as u64
        };
        let den: u64 = rels.iter().map(|&r| count(r)).sum();
        Some(Ratio::new(count(t.relation), den))
    }

    /// `None` when the conditional probability is undefined.
    pub fn cond_prob(&self, t: &Triple, given: &[Triple]) -> Option<Ratio<u64>> {
        if given.is_empty() {
            return self.prob(t);
        }
        let cond: Vec<usize> = (0..self.samples.len())
            .filter(|&n| given.iter().all(|g| self.holds(n, g)))
            .collect();
        let num = cond.iter().filter(|&&n| self.holds(n, t)).count() as u64;
        let den = cond
            .iter()
            .filter(|&&n| {
                self.samples[n]
                    .iter()
                    .any(|x| x.head == t.head && x.tail == t.tail)
            })
            .count() as u64;
        (den > 0).then(|| Ratio::new(num, den))
    }

    pub fn support(&self, t: &Triple) -> Vec<u32> {
        (0..self.samples.len())
            .filter(|&n| self.holds(n, t))
            .map(|n| n as u32 + 1)
            .collect()
    }
}

// --- load-function oracle ---------------------------------------------------

pub fn big(v: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(v))
}

pub fn frac(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

/// Omission caps by direct recursion on the remaining count.
pub fn caps_oracle(m: f64, q: &[f64]) -> Vec<f64> {
    let mut out = Vec::new();
    for (n, &qn) in q.iter().enumerate() {
        let used: f64 = out.iter().take(n).sum();
        out.push((m - used) * qn);
    }
    out
}

/// `l(E)` written branch by branch: `E/q1` on the first piece, then
/// `l(b_{n-1}) + (E - b_{n-1}) E_{n-1} / q_n`.
pub fn load_oracle(m: f64, q: &[f64], e: f64) -> Option<f64> {
    let caps = caps_oracle(m, q);
    if e < 0.0 {
        return None;
    }
    if q.is_empty() {
        return (e == 0.0).then_some(0.0);
    }
    let mut start = 0.0;
    let mut value = 0.0;
    for n in 0..q.len() {
        let end = start + caps[n];
        let slope = if n == 0 { 1.0 / q[0] } else { caps[n - 1] / q[n] };
        if e <= end * (1.0 + 1e-9) + 1e-9 {
            return Some(value + (e - start) * slope);
        }
        value += (end - start) * slope;
        start = end;
    }
    None
}

// --- allocation oracle ------------------------------------------------------

pub struct OracleOptimum {
    pub e: u32,
    pub p: f64,
    pub energy: f64,
}

fn oracle_capacity(link: &LinkModel, p: f64) -> f64 {
    link.bandwidth_hz * (1.0 + p * link.path_gain / link.noise_power_w).log2()
}

/// Energy and feasibility of `(p, E)` straight from the model equations.
pub fn oracle_point(link: &LinkModel, m: u32, q: &[f64], e: u32, p: f64) -> Option<f64> {
    let load = load_oracle(f64::from(m), q, f64::from(e))?;
    let bits = f64::from(link.bits_per_field) * (3.0 * f64::from(m) - f64::from(e));
    let t1 = bits / oracle_capacity(link, p);
    let t2 = link.tau1 * load / link.compute_capacity;
    let f = link.compute_capacity;
    (t1 + t2 <= link.latency_budget_s && p <= link.p_max_w && p > 0.0)
        .then_some(t1 * p + link.tau1 * link.tau2 * load * f * f)
}

/// Refining grid search: `points` log-spaced powers on `[p_max·1e-12, p_max]`
/// for every integer `E`, then `levels` rounds of `points` linear samples
/// around the best cell.
pub fn grid_oracle(
    link: &LinkModel,
    m: u32,
    q: &[f64],
    e_max: u32,
    points: usize,
    levels: usize,
) -> Option<OracleOptimum> {
    let mut best: Option<OracleOptimum> = None;
    for e in 0..=e_max {
        let lo = link.p_max_w * 1e-12;
        let ratio = (link.p_max_w / lo).powf(1.0 / (points - 1) as f64);
        let mut grid: Vec<f64> = (0..points).map(|i| lo * ratio.powi(i as i32)).collect();
        *grid.last_mut().unwrap() = link.p_max_w;
        let mut local: Option<(usize, f64)> = None;
        for level in 0..=levels {
            local = None;
            for (i, &p) in grid.iter().enumerate() {
                if let Some(en) = oracle_point(link, m, q, e, p) {
                    if local.is_none_or(|(_, b)| en < b) {
                        local = Some((i, en));
                    }
                }
            }
            let Some((i, _)) = local else { break };
            if level == levels {
                break;
            }
            let a = grid[i.saturating_sub(1)];
            let b = grid[(i + 1).min(grid.len() - 1)];
            grid = (0..points)
                .map(|k| a + (b - a) * k as f64 / (points - 1) as f64)
                .collect();
        }
        if let Some((i, en)) = local {
            if best.as_ref().is_none_or(|b| en < b.energy) {
                best = Some(OracleOptimum {
                    e,
                    p: grid[i],
                    energy: en,
                });
            }
        }
    }
    best
}

/// Largest reachable integer omission count, from the oracle caps.
pub fn e_max_oracle(m: u32, q: &[f64]) -> u32 {
    let total: f64 = caps_oracle(f64::from(m), q).iter().sum();
    ((total * (1.0 + 1e-9) + 1e-9).floor() as u32).min(m)
}

/// Power meeting the full budget with `3RM` bits, by bisection on the latency equation.
pub fn traditional_power_bisection(link: &LinkModel, m: u32) -> f64 {
    let bits = f64::from(link.bits_per_field) * 3.0 * f64::from(m);
    let latency = |p: f64| bits / oracle_capacity(link, p);
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    while latency(hi) > link.latency_budget_s {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if latency(mid) > link.latency_budget_s {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

/// Link parameters spread log-uniformly around the defaults.
pub fn random_link<R: Rng>(rng: &mut R) -> LinkModel {
    let mut jitter = |v: f64, decades: f64| v * 10f64.powf(rng.gen_range(-decades..=decades));
    let d = LinkModel::default();
    LinkModel {
        bandwidth_hz: jitter(d.bandwidth_hz, 0.5),
        path_gain: jitter(d.path_gain, 1.0),
        noise_power_w: d.noise_power_w,
        bits_per_field: d.bits_per_field,
        p_max_w: jitter(d.p_max_w, 0.5),
        latency_budget_s: jitter(d.latency_budget_s, 0.5),
        compute_capacity: jitter(d.compute_capacity, 0.3),
        tau1: jitter(d.tau1, 1.0),
        tau2: d.tau2,
    }
}

pub fn random_q<R: Rng>(rng: &mut R, max_stages: usize) -> Vec<f64> {
    let n = rng.gen_range(1..=max_stages);
    (0..n).map(|_| f64::from(rng.gen_range(1..=1000u32)) / 1000.0).collect()
}
