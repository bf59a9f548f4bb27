//! The shared probability graph: one quadruple per `(head, tail)` pair, each
//! relation carrying the set of samples in which it holds.
//!
//! Probabilities are exact count ratios. The unconditional probability of a
//! relation is its support size over the summed support sizes of every
//! relation on the pair. Conditioning on a set of known triples restricts
//! attention to the samples `C` in which all of them hold:
//!
//! ```text
//! p(r | given) = |N_r ∩ C| / |C ∩ (N_1 ∪ ... ∪ N_I)|
//! ```

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path;

use num_rational::Ratio;
use num_traits::ToPrimitive;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::bytes::{Reader, Writer};
use crate::error::{Error, Result};
use crate::kg::{Corpus, EntityId, Interner, RelationId, Triple, Vocabulary};

/// Exact probability as a reduced fraction.
pub type Probability = Ratio<u64>;

pub fn to_f64(p: &Probability) -> f64 {
    p.to_f64().unwrap_or(f64::NAN)
}

pub const GRAPH_MAGIC: &[u8; 4] = b"SPGR";
pub const GRAPH_VERSION: u16 = 1;

/// Sorted, duplicate-free sample ids.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize)]
#[serde(transparent)]
pub struct SampleSet(Vec<u32>);

impl SampleSet {
    pub fn new(mut members: Vec<u32>) -> Self {
        members.sort_unstable();
        members.dedup();
        SampleSet(members)
    }

    pub fn members(&self) -> &[u32] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, sample: u32) -> bool {
        self.0.binary_search(&sample).is_ok()
    }

    pub fn intersect(&self, other: &SampleSet) -> SampleSet {
        let (a, b) = (&self.0, &other.0);
        let mut out = Vec::with_capacity(a.len().min(b.len()));
        let (mut i, mut j) = (0, 0);
        while i < a.len() && j < b.len() {
            match a[i].cmp(&b[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    out.push(a[i]);
                    i += 1;
                    j += 1;
                }
            }
        }
        SampleSet(out)
    }

    pub fn intersection_len(&self, other: &SampleSet) -> usize {
        let (a, b) = (&self.0, &other.0);
        let (mut i, mut j, mut n) = (0, 0, 0);
        while i < a.len() && j < b.len() {
            match a[i].cmp(&b[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    n += 1;
                    i += 1;
                    j += 1;
                }
            }
        }
        n
    }

    pub fn union(&self, other: &SampleSet) -> SampleSet {
        let (a, b) = (&self.0, &other.0);
        let mut out = Vec::with_capacity(a.len() + b.len());
        let (mut i, mut j) = (0, 0);
        while i < a.len() && j < b.len() {
            match a[i].cmp(&b[j]) {
                std::cmp::Ordering::Less => {
                    out.push(a[i]);
                    i += 1;
                }
                std::cmp::Ordering::Greater => {
                    out.push(b[j]);
                    j += 1;
                }
                std::cmp::Ordering::Equal => {
                    out.push(a[i]);
                    i += 1;
                    j += 1;
                }
            }
        }
        out.extend_from_slice(&a[i..]);
        out.extend_from_slice(&b[j..]);
        SampleSet(out)
    }
}

/// Head, tail and every relation observed between them with its support set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Quadruple {
    pub head: EntityId,
    pub tail: EntityId,
    relations: Vec<(RelationId, SampleSet)>,
    union: SampleSet,
}

impl Quadruple {
    fn new(head: EntityId, tail: EntityId, mut relations: Vec<(RelationId, SampleSet)>) -> Self {
        relations.sort_by_key(|(r, _)| *r);
        let union = relations
            .iter()
            .fold(SampleSet::default(), |acc, (_, s)| acc.union(s));
        Quadruple {
            head,
            tail,
            relations,
            union,
        }
    }

    /// Relations sorted by id.
    pub fn relations(&self) -> &[(RelationId, SampleSet)] {
        &self.relations
    }

    pub fn relation_count(&self) -> usize {
        self.relations.len()
    }

    pub fn position(&self, relation: RelationId) -> Option<usize> {
        self.relations.binary_search_by_key(&relation, |(r, _)| *r).ok()
    }

    pub fn support(&self, relation: RelationId) -> Option<&SampleSet> {
        self.position(relation).map(|i| &self.relations[i].1)
    }

    /// Samples containing any relation on this pair.
    pub fn union(&self) -> &SampleSet {
        &self.union
    }

    pub fn total_support(&self) -> u64 {
        self.relations.iter().map(|(_, s)| s.len() as u64).sum()
    }

    /// Per-relation counts `|N_i ∩ domain|`, in relation order.
    pub fn counts_within(&self, domain: &SampleSet) -> Vec<u64> {
        self.relations
            .iter()
            .map(|(_, s)| s.intersection_len(domain) as u64)
            .collect()
    }

    pub fn unconditional_counts(&self) -> Vec<u64> {
        self.relations.iter().map(|(_, s)| s.len() as u64).collect()
    }
}

/// Index of the strictly largest count, or `None` on a tie for the maximum.
pub fn unique_argmax(counts: &[u64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    let mut tied = false;
    for (i, &c) in counts.iter().enumerate() {
        match best {
            None => best = Some(i),
            Some(b) if c > counts[b] => {
                best = Some(i);
                tied = false;
            }
            Some(b) if c == counts[b] => tied = true,
            _ => {}
        }
    }
    if tied {
        None
    } else {
        best
    }
}

/// SHA-256 digest identifying the shared background knowledge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct GraphHash(pub [u8; 32]);

impl fmt::Display for GraphHash {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&hex::encode(self.0))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProbabilityGraph {
    n_samples: u32,
    vocab: Vocabulary,
    quadruples: BTreeMap<(EntityId, EntityId), Quadruple>,
    hash: GraphHash,
}

impl ProbabilityGraph {
    pub fn build(corpus: &Corpus) -> Result<Self> {
        if corpus.n_samples() == 0 {
            return Err(Error::EmptyCorpus);
        }
        let mut acc: BTreeMap<(EntityId, EntityId), BTreeMap<RelationId, Vec<u32>>> =
            BTreeMap::new();
        // Samples are visited in id order, so every support vector is built sorted.
        for kg in corpus.samples() {
            let sample = kg.sample_id.expect("corpus samples carry ids");
            for t in kg.triples() {
                acc.entry(t.pair())
                    .or_default()
                    .entry(t.relation)
                    .or_default()
                    .push(sample);
            }
        }
        let quadruples = acc
            .into_iter()
            .map(|((h, t), rels)| {
                let relations = rels
                    .into_iter()
                    .map(|(r, members)| (r, SampleSet(members)))
                    .collect();
                ((h, t), Quadruple::new(h, t, relations))
            })
            .collect();
        Self::assemble(corpus.n_samples(), corpus.vocab.clone(), quadruples)
    }

    fn assemble(
        n_samples: u32,
        vocab: Vocabulary,
        quadruples: BTreeMap<(EntityId, EntityId), Quadruple>,
    ) -> Result<Self> {
        let mut graph = ProbabilityGraph {
            n_samples,
            vocab,
            quadruples,
            hash: GraphHash([0; 32]),
        };
        graph.hash = graph.compute_hash();
        Ok(graph)
    }

    pub fn n_samples(&self) -> u32 {
        self.n_samples
    }

    /// Number of quadruples.
    pub fn len(&self) -> usize {
        self.quadruples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.quadruples.is_empty()
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn hash(&self) -> GraphHash {
        self.hash
    }

    pub fn quadruples(&self) -> impl Iterator<Item = &Quadruple> {
        self.quadruples.values()
    }

    pub fn quadruple(&self, head: EntityId, tail: EntityId) -> Option<&Quadruple> {
        self.quadruples.get(&(head, tail))
    }

    fn require_pair(&self, head: EntityId, tail: EntityId) -> Result<&Quadruple> {
        self.quadruple(head, tail).ok_or(Error::UnknownPair {
            head: head.0,
            tail: tail.0,
        })
    }

    /// Support set of a triple present in the graph.
    pub fn support(&self, triple: &Triple) -> Result<&SampleSet> {
        let quad = self.require_pair(triple.head, triple.tail)?;
        quad.support(triple.relation).ok_or(Error::UnknownRelation {
            head: triple.head.0,
            relation: triple.relation.0,
            tail: triple.tail.0,
        })
    }

    /// Whether `(h, r, t)` is a relation the graph knows about.
    pub fn contains(&self, triple: &Triple) -> bool {
        self.support(triple).is_ok()
    }

    /// Unconditional relation probability.
    pub fn prob(&self, head: EntityId, relation: RelationId, tail: EntityId) -> Result<Probability> {
        let quad = self.require_pair(head, tail)?;
        let support = quad.support(relation).ok_or(Error::UnknownRelation {
            head: head.0,
            relation: relation.0,
            tail: tail.0,
        })?;
        Ok(Ratio::new(support.len() as u64, quad.total_support()))
    }

    /// Probability of `target` given that every triple in `given` holds.
    ///
    /// An empty `given` falls back to [`ProbabilityGraph::prob`].
    pub fn cond_prob(&self, target: &Triple, given: &[Triple]) -> Result<Probability> {
        let target_support = self.support(target)?;
        if given.is_empty() {
            return self.prob(target.head, target.relation, target.tail);
        }
        let quad = self.require_pair(target.head, target.tail)?;
        let mut domain = quad.union().clone();
        for cond in given {
            domain = domain.intersect(self.support(cond)?);
        }
        if domain.is_empty() {
            return Err(Error::UndefinedProbability {
                head: target.head.0,
                tail: target.tail.0,
            });
        }
        Ok(Ratio::new(
            target_support.intersection_len(&domain) as u64,
            domain.len() as u64,
        ))
    }

    /// Full unconditional distribution over the pair's relations, sorted by relation id.
    pub fn relation_distribution(
        &self,
        head: EntityId,
        tail: EntityId,
    ) -> Result<Vec<(RelationId, Probability)>> {
        let quad = self.require_pair(head, tail)?;
        let total = quad.total_support();
        Ok(quad
            .relations()
            .iter()
            .map(|(r, s)| (*r, Ratio::new(s.len() as u64, total)))
            .collect())
    }

    // --- serialization -------------------------------------------------------

    /// Canonical body: intern tables, then quadruples in pair order with
    /// delta-encoded supports.
    fn body_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new();
        for table in [&self.vocab.entities, &self.vocab.relations] {
            w.u32(table.len() as u32);
            for label in table.labels() {
                w.str(label);
            }
        }
        for quad in self.quadruples.values() {
            w.u32(quad.head.0);
            w.u32(quad.tail.0);
            w.u32(quad.relations.len() as u32);
            for (r, support) in &quad.relations {
                w.u32(r.0);
                w.u32(support.len() as u32);
                let mut prev = 0;
                for &s in support.members() {
                    w.varint(s - prev);
                    prev = s;
                }
            }
        }
        w.into_inner()
    }

    // The digest covers N and S as well as the body so that every header field
    // other than magic/version is authenticated.
    fn digest(n_samples: u32, n_quads: u32, body: &[u8]) -> GraphHash {
        let mut h = Sha256::new();
        h.update(n_samples.to_le_bytes());
        h.update(n_quads.to_le_bytes());
        h.update(body);
        GraphHash(h.finalize().into())
    }

    fn compute_hash(&self) -> GraphHash {
        Self::digest(self.n_samples, self.quadruples.len() as u32, &self.body_bytes())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let body = self.body_bytes();
        let mut w = Writer::new();
        w.bytes(GRAPH_MAGIC);
        w.u16(GRAPH_VERSION);
        w.u32(self.n_samples);
        w.u32(self.quadruples.len() as u32);
        w.bytes(&self.hash.0);
        w.bytes(&body);
        w.into_inner()
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Self> {
        let mut r = Reader::new(buf);
        if r.take(4, "magic")? != GRAPH_MAGIC {
            return Err(Error::decode("not a probability-graph file (bad magic)"));
        }
        let version = r.u16("version")?;
        if version != GRAPH_VERSION {
            return Err(Error::decode(format!("unsupported graph format version {version}")));
        }
        let n_samples = r.u32("sample count")?;
        let n_quads = r.u32("quadruple count")?;
        let stored = GraphHash(r.array32("content hash")?);
        let body = &buf[buf.len() - r.remaining()..];
        let actual = Self::digest(n_samples, n_quads, body);
        if actual != stored {
            return Err(Error::decode(format!(
                "content hash mismatch: header says {stored}, body hashes to {actual}"
            )));
        }

        let mut tables = Vec::with_capacity(2);
        for what in ["entity table", "relation table"] {
            let n = r.count(what, 4)?;
            let mut labels = Vec::with_capacity(n);
            for _ in 0..n {
                labels.push(r.str(what)?);
            }
            tables.push(Interner::from_labels(labels).map_err(|e| Error::decode(e.to_string()))?);
        }
        let relations_table = tables.pop().expect("two tables");
        let entities = tables.pop().expect("two tables");
        let vocab = Vocabulary {
            entities,
            relations: relations_table,
        };

        let mut quadruples = BTreeMap::new();
        let mut last_pair: Option<(EntityId, EntityId)> = None;
        for _ in 0..n_quads {
            let head = EntityId(r.u32("head")?);
            let tail = EntityId(r.u32("tail")?);
            if vocab.entity(head).is_none() || vocab.entity(tail).is_none() {
                return Err(Error::decode("quadruple references an unknown entity"));
            }
            if last_pair.is_some_and(|p| p >= (head, tail)) {
                return Err(Error::decode("quadruples are not in strictly ascending pair order"));
            }
            last_pair = Some((head, tail));
            let n_rel = r.count("relation list", 8)?;
            if n_rel == 0 {
                return Err(Error::decode("quadruple without relations"));
            }
            let mut relations = Vec::with_capacity(n_rel);
            for _ in 0..n_rel {
                let rel = RelationId(r.u32("relation")?);
                if vocab.relation(rel).is_none() {
                    return Err(Error::decode("quadruple references an unknown relation"));
                }
                if relations.last().is_some_and(|(prev, _): &(RelationId, SampleSet)| *prev >= rel) {
                    return Err(Error::decode("relations are not in strictly ascending order"));
                }
                let len = r.count("support set", 1)?;
                if len == 0 {
                    return Err(Error::decode("empty support set"));
                }
                let mut members = Vec::with_capacity(len);
                let mut prev = 0u32;
                for _ in 0..len {
                    let delta = r.varint("support delta")?;
                    if delta == 0 {
                        return Err(Error::decode("support set is not strictly increasing"));
                    }
                    prev = prev
                        .checked_add(delta)
                        .filter(|&s| s <= n_samples)
                        .ok_or_else(|| Error::decode("support member outside 1..=N"))?;
                    members.push(prev);
                }
                relations.push((rel, SampleSet(members)));
            }
            quadruples.insert((head, tail), Quadruple::new(head, tail, relations));
        }
        r.finish()?;
        let graph = Self::assemble(n_samples, vocab, quadruples)?;
        debug_assert_eq!(graph.hash, stored);
        Ok(graph)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }

    /// Human-readable mirror of the binary file.
    pub fn to_json(&self) -> serde_json::Value {
        #[derive(Serialize)]
        struct Rel<'a> {
            relation: &'a str,
            support: &'a SampleSet,
        }
        #[derive(Serialize)]
        struct Quad<'a> {
            head: &'a str,
            tail: &'a str,
            relations: Vec<Rel<'a>>,
        }
        let quads: Vec<Quad<'_>> = self
            .quadruples
            .values()
            .map(|q| Quad {
                head: self.vocab.entity(q.head).unwrap_or("?"),
                tail: self.vocab.entity(q.tail).unwrap_or("?"),
                relations: q
                    .relations
                    .iter()
                    .map(|(r, s)| Rel {
                        relation: self.vocab.relation(*r).unwrap_or("?"),
                        support: s,
                    })
                    .collect(),
            })
            .collect();
        serde_json::json!({
            "format_version": GRAPH_VERSION,
            "n_samples": self.n_samples,
            "n_quadruples": self.quadruples.len(),
            "content_hash": self.hash.to_string(),
            "entities": self.vocab.entities.labels(),
            "relations": self.vocab.relations.labels(),
            "quadruples": quads,
        })
    }
}
