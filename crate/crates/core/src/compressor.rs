//! Relation omission at the sender and argmax reconstruction at the receiver.
//!
//! Round 1 omits the relation of every triple whose relation is the strict
//! mode of its pair's unconditional distribution. Round `r >= 2` conditions on
//! `(r - 1)`-tuples of already-omitted triples: a remaining triple is omitted
//! when some tuple makes its relation the strict maximum of the conditional
//! row. Rounds `r >= 2` repeat in cycles until a cycle omits nothing; each
//! cycle only sees omissions made by earlier cycles.
//!
//! The receiver replays the same argmax using the omission records, which
//! carry the pair and the reconstruction-order indices of the condition
//! triples.

use serde::Serialize;

use crate::bytes::{Reader, Writer};
use crate::error::{Error, Result};
use crate::kg::{EntityId, Interner, KnowledgeGraph, RelationId, Triple, Vocabulary};
use crate::probgraph::{unique_argmax, GraphHash, ProbabilityGraph, Quadruple, SampleSet};

pub const MESSAGE_MAGIC: &[u8; 4] = b"SCMP";
pub const MESSAGE_VERSION: u16 = 1;
pub const DEFAULT_MAX_ROUND: u8 = 2;

/// A triple sent without its relation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct OmissionRecord {
    pub head: EntityId,
    pub tail: EntityId,
    pub round: u8,
    /// Indices into the reconstruction order (full triples first, then omissions).
    pub conditions: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompressedMessage {
    pub graph_hash: GraphHash,
    pub full_triples: Vec<Triple>,
    pub omissions: Vec<OmissionRecord>,
    /// Entity labels that are not in the graph's vocabulary; ids continue after it.
    pub extra_entities: Vec<String>,
    /// Relation labels that are not in the graph's vocabulary; ids continue after it.
    pub extra_relations: Vec<String>,
}

impl CompressedMessage {
    /// Original triple count `J`.
    pub fn triple_count(&self) -> usize {
        self.full_triples.len() + self.omissions.len()
    }

    /// Omitted relation count `E`.
    pub fn omitted(&self) -> usize {
        self.omissions.len()
    }

    /// Head, relation and tail fields actually carried: `3J - E`.
    pub fn field_slots(&self) -> usize {
        3 * self.triple_count() - self.omitted()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StageStats {
    pub round: u8,
    pub cycle: u32,
    /// Triples whose relation was still present when the stage began.
    pub entering: usize,
    pub omitted: usize,
    pub comparisons: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct CompressionReport {
    pub stages: Vec<StageStats>,
    pub comparison_count: u64,
}

impl CompressionReport {
    pub fn omitted_total(&self) -> usize {
        self.stages.iter().map(|s| s.omitted).sum()
    }

    pub fn omitted_in_round(&self, round: u8) -> usize {
        self.stages
            .iter()
            .filter(|s| s.round == round)
            .map(|s| s.omitted)
            .sum()
    }

    /// Observed per-stage ratio of newly omitted to entering triples.
    pub fn q_hat(&self) -> Vec<f64> {
        self.stages
            .iter()
            .filter(|s| s.entering > 0)
            .map(|s| s.omitted as f64 / s.entering as f64)
            .collect()
    }

    pub fn cumulative_comparisons(&self) -> Vec<u64> {
        self.stages
            .iter()
            .scan(0u64, |acc, s| {
                *acc += s.comparisons;
                Some(*acc)
            })
            .collect()
    }
}

struct Candidate<'g> {
    index: usize,
    quad: &'g Quadruple,
    position: usize,
}

struct Omitted {
    index: usize,
    round: u8,
    /// Positions in the omission list.
    conditions: Vec<usize>,
}

/// Compresses `kg` against the shared graph. Triples whose pair or relation
/// is unknown to the graph are always sent in full.
pub fn compress(
    g: &ProbabilityGraph,
    kg: &KnowledgeGraph,
    max_round: u8,
) -> Result<(CompressedMessage, CompressionReport)> {
    if max_round == 0 {
        return Err(Error::validation("max_round must be at least 1"));
    }
    let triples = kg.triples();
    let candidates: Vec<Candidate<'_>> = triples
        .iter()
        .enumerate()
        .filter_map(|(index, t)| {
            let quad = g.quadruple(t.head, t.tail)?;
            let position = quad.position(t.relation)?;
            Some(Candidate {
                index,
                quad,
                position,
            })
        })
        .collect();

    let mut report = CompressionReport::default();
    let mut omitted: Vec<Omitted> = Vec::new();
    let mut is_omitted = vec![false; triples.len()];

    let mut comparisons = 0u64;
    for c in &candidates {
        comparisons += c.quad.relation_count() as u64;
        if unique_argmax(&c.quad.unconditional_counts()) == Some(c.position) {
            omitted.push(Omitted {
                index: c.index,
                round: 1,
                conditions: Vec::new(),
            });
            is_omitted[c.index] = true;
        }
    }
    report.stages.push(StageStats {
        round: 1,
        cycle: 1,
        entering: triples.len(),
        omitted: omitted.len(),
        comparisons,
    });

    for round in 2..=max_round {
        let arity = usize::from(round - 1);
        // Tuples drawn entirely from `omitted[..seen]` were already tried by an
        // earlier cycle of this round and failed.
        let mut seen = 0;
        let mut cycle = 1u32;
        loop {
            let frozen = omitted.len();
            let entering = triples.len() - frozen;
            let supports: Vec<&SampleSet> = omitted
                .iter()
                .map(|o| {
                    g.support(&triples[o.index])
                        .expect("omitted triples are present in the graph")
                })
                .collect();
            let mut comparisons = 0u64;
            let mut fresh = Vec::new();
            for c in candidates.iter().filter(|c| !is_omitted[c.index]) {
                let mut search = TupleSearch {
                    quad: c.quad,
                    target: c.position,
                    supports: &supports,
                    arity,
                    seen,
                    comparisons: &mut comparisons,
                    chosen: Vec::with_capacity(arity),
                };
                if search.run(c.quad.union().clone(), 0) {
                    fresh.push(Omitted {
                        index: c.index,
                        round,
                        conditions: search.chosen,
                    });
                }
            }
            report.stages.push(StageStats {
                round,
                cycle,
                entering,
                omitted: fresh.len(),
                comparisons,
            });
            if fresh.is_empty() {
                break;
            }
            for o in fresh {
                is_omitted[o.index] = true;
                omitted.push(o);
            }
            seen = frozen;
            cycle += 1;
        }
    }
    report.comparison_count = report.stages.iter().map(|s| s.comparisons).sum();

    let full_triples: Vec<Triple> = triples
        .iter()
        .zip(&is_omitted)
        .filter(|(_, &o)| !o)
        .map(|(t, _)| *t)
        .collect();
    let base = full_triples.len() as u32;
    let omissions = omitted
        .iter()
        .map(|o| OmissionRecord {
            head: triples[o.index].head,
            tail: triples[o.index].tail,
            round: o.round,
            conditions: o.conditions.iter().map(|&p| base + p as u32).collect(),
        })
        .collect();
    let msg = CompressedMessage {
        graph_hash: g.hash(),
        full_triples,
        omissions,
        extra_entities: Vec::new(),
        extra_relations: Vec::new(),
    };
    Ok((msg, report))
}

/// Like [`compress`], for a message interned into `vocab`, an extension of
/// the graph's vocabulary. Labels the graph does not know travel with the
/// message so the receiver can resolve every id.
pub fn compress_with_vocab(
    g: &ProbabilityGraph,
    vocab: &Vocabulary,
    kg: &KnowledgeGraph,
    max_round: u8,
) -> Result<(CompressedMessage, CompressionReport)> {
    let extension = |ours: &Interner, theirs: &Interner, what: &str| -> Result<Vec<String>> {
        let known = theirs.len();
        if ours.len() < known || ours.labels()[..known] != theirs.labels()[..] {
            return Err(Error::validation(format!(
                "{what} table does not extend the graph's"
            )));
        }
        Ok(ours.labels()[known..].to_vec())
    };
    let extra_entities = extension(&vocab.entities, &g.vocab().entities, "entity")?;
    let extra_relations = extension(&vocab.relations, &g.vocab().relations, "relation")?;
    let (mut msg, report) = compress(g, kg, max_round)?;
    msg.extra_entities = extra_entities;
    msg.extra_relations = extra_relations;
    Ok((msg, report))
}

/// The graph's vocabulary extended with the labels carried by `msg`.
pub fn message_vocabulary(g: &ProbabilityGraph, msg: &CompressedMessage) -> Result<Vocabulary> {
    let extend = |base: &Interner, extra: &[String]| {
        Interner::from_labels(base.labels().iter().chain(extra).cloned())
            .map_err(|e| Error::CorruptMessage(format!("vocabulary extension: {e}")))
    };
    Ok(Vocabulary {
        entities: extend(&g.vocab().entities, &msg.extra_entities)?,
        relations: extend(&g.vocab().relations, &msg.extra_relations)?,
    })
}

/// Depth-first enumeration of condition tuples in ascending lexicographic order.
struct TupleSearch<'a> {
    quad: &'a Quadruple,
    target: usize,
    supports: &'a [&'a SampleSet],
    arity: usize,
    seen: usize,
    comparisons: &'a mut u64,
    chosen: Vec<usize>,
}

impl TupleSearch<'_> {
    /// `domain` is the pair's union intersected with the supports chosen so far.
    fn run(&mut self, domain: SampleSet, start: usize) -> bool {
        let depth = self.chosen.len();
        if depth == self.arity {
            *self.comparisons += self.quad.relation_count() as u64;
            return unique_argmax(&self.quad.counts_within(&domain)) == Some(self.target);
        }
        let last_slot = depth + 1 == self.arity;
        let slots_after = self.arity - depth - 1;
        let end = self.supports.len().saturating_sub(slots_after);
        let from = if last_slot { start.max(self.seen) } else { start };
        for i in from..end {
            let narrowed = domain.intersect(self.supports[i]);
            // Undefined row; every extension of this prefix is undefined too.
            if narrowed.is_empty() {
                continue;
            }
            self.chosen.push(i);
            if self.run(narrowed, i + 1) {
                return true;
            }
            self.chosen.pop();
        }
        false
    }
}

/// Rebuilds the original knowledge graph. Triples come back in reconstruction
/// order: full triples first, then omissions.
pub fn decompress(g: &ProbabilityGraph, msg: &CompressedMessage) -> Result<KnowledgeGraph> {
    if msg.graph_hash != g.hash() {
        return Err(Error::IncompatibleKnowledge {
            expected: msg.graph_hash.to_string(),
            actual: g.hash().to_string(),
        });
    }
    let n_entities = g.vocab().entities.len() + msg.extra_entities.len();
    let n_relations = g.vocab().relations.len() + msg.extra_relations.len();
    let corrupt = |m: String| Error::CorruptMessage(m);

    let mut out: Vec<Triple> = Vec::with_capacity(msg.triple_count());
    for t in &msg.full_triples {
        if t.head.0 as usize >= n_entities
            || t.tail.0 as usize >= n_entities
            || t.relation.0 as usize >= n_relations
        {
            return Err(corrupt(format!(
                "full triple ({}, {}, {}) references an unknown id",
                t.head, t.relation, t.tail
            )));
        }
        out.push(*t);
    }
    for (k, rec) in msg.omissions.iter().enumerate() {
        let own = out.len();
        let quad = g
            .quadruple(rec.head, rec.tail)
            .ok_or_else(|| corrupt(format!("omission {k}: pair not in graph")))?;
        check_conditions(rec, own).map_err(|m| corrupt(format!("omission {k}: {m}")))?;
        let counts = if rec.conditions.is_empty() {
            quad.unconditional_counts()
        } else {
            let mut domain = quad.union().clone();
            for &c in &rec.conditions {
                let support = g.support(&out[c as usize]).map_err(|_| {
                    corrupt(format!("omission {k}: condition {c} is not in the graph"))
                })?;
                domain = domain.intersect(support);
            }
            if domain.is_empty() {
                return Err(corrupt(format!("omission {k}: conditional row is undefined")));
            }
            quad.counts_within(&domain)
        };
        let winner = unique_argmax(&counts)
            .ok_or_else(|| corrupt(format!("omission {k}: no unique most probable relation")))?;
        let relation: RelationId = quad.relations()[winner].0;
        out.push(Triple::new(rec.head, relation, rec.tail));
    }
    KnowledgeGraph::new(out, None).map_err(|e| corrupt(e.to_string()))
}

fn check_conditions(rec: &OmissionRecord, own_index: usize) -> std::result::Result<(), String> {
    if rec.round == 0 {
        return Err("round 0".into());
    }
    if rec.conditions.len() != usize::from(rec.round - 1) {
        return Err(format!(
            "round {} needs {} conditions, found {}",
            rec.round,
            rec.round - 1,
            rec.conditions.len()
        ));
    }
    if rec.conditions.windows(2).any(|w| w[0] >= w[1]) {
        return Err("conditions are not strictly ascending".into());
    }
    if rec.conditions.last().is_some_and(|&c| c as usize >= own_index) {
        return Err("condition refers to a triple not yet reconstructed".into());
    }
    Ok(())
}

// --- wire format -------------------------------------------------------------

const HEADER_LEN: usize = 4 + 2 + 32 + 4 + 4;
const CRC_LEN: usize = 4;

/// Serializes a message. All integers are little-endian; a CRC-32 of every
/// preceding byte closes the buffer.
pub fn encode_message(msg: &CompressedMessage) -> Vec<u8> {
    let mut w = Writer::new();
    w.bytes(MESSAGE_MAGIC);
    w.u16(MESSAGE_VERSION);
    w.bytes(&msg.graph_hash.0);
    w.u32(msg.triple_count() as u32);
    w.u32(msg.omitted() as u32);
    for t in &msg.full_triples {
        w.u32(t.head.0);
        w.u32(t.relation.0);
        w.u32(t.tail.0);
    }
    for rec in &msg.omissions {
        w.u32(rec.head.0);
        w.u32(rec.tail.0);
        w.u8(rec.round);
        for &c in &rec.conditions {
            w.u32(c);
        }
    }
    for labels in [&msg.extra_entities, &msg.extra_relations] {
        w.u32(labels.len() as u32);
        for l in labels {
            w.str(l);
        }
    }
    let mut buf = w.into_inner();
    let crc = crc32fast::hash(&buf);
    buf.extend_from_slice(&crc.to_le_bytes());
    buf
}

pub fn decode_message(buf: &[u8]) -> Result<CompressedMessage> {
    if buf.len() < HEADER_LEN + CRC_LEN {
        return Err(Error::decode("truncated message"));
    }
    if &buf[..4] != MESSAGE_MAGIC {
        return Err(Error::decode("not a compressed message (bad magic)"));
    }
    let (payload, trailer) = buf.split_at(buf.len() - CRC_LEN);
    let stored = u32::from_le_bytes(trailer.try_into().expect("4-byte trailer"));
    if crc32fast::hash(payload) != stored {
        return Err(Error::decode("checksum mismatch"));
    }

    let mut r = Reader::new(payload);
    r.take(4, "magic")?;
    let version = r.u16("version")?;
    if version != MESSAGE_VERSION {
        return Err(Error::decode(format!("unsupported message version {version}")));
    }
    let graph_hash = GraphHash(r.array32("graph hash")?);
    let j = r.u32("triple count")? as usize;
    let e = r.u32("omission count")? as usize;
    if e > j {
        return Err(Error::decode(format!("omission count {e} exceeds triple count {j}")));
    }
    let n_full = j - e;
    if n_full.saturating_mul(12).saturating_add(e.saturating_mul(9)) > r.remaining() {
        return Err(Error::decode("triple counts exceed the buffer"));
    }
    let mut full_triples = Vec::with_capacity(n_full);
    for _ in 0..n_full {
        let head = EntityId(r.u32("head")?);
        let relation = RelationId(r.u32("relation")?);
        let tail = EntityId(r.u32("tail")?);
        full_triples.push(Triple::new(head, relation, tail));
    }
    let mut omissions = Vec::with_capacity(e);
    for k in 0..e {
        let head = EntityId(r.u32("omission head")?);
        let tail = EntityId(r.u32("omission tail")?);
        let round = r.u8("round")?;
        if round == 0 {
            return Err(Error::decode(format!("omission {k} has round 0")));
        }
        let mut conditions = Vec::with_capacity(usize::from(round - 1));
        for _ in 1..round {
            conditions.push(r.u32("condition")?);
        }
        let rec = OmissionRecord {
            head,
            tail,
            round,
            conditions,
        };
        check_conditions(&rec, n_full + k)
            .map_err(|m| Error::decode(format!("omission {k}: {m}")))?;
        omissions.push(rec);
    }
    let extra_entities = read_labels(&mut r, "extra entity labels")?;
    let extra_relations = read_labels(&mut r, "extra relation labels")?;
    r.finish()?;
    Ok(CompressedMessage {
        graph_hash,
        full_triples,
        omissions,
        extra_entities,
        extra_relations,
    })
}

fn read_labels(r: &mut Reader<'_>, what: &str) -> Result<Vec<String>> {
    let n = r.count(what, 4)?;
    (0..n).map(|_| r.str(what)).collect()
}
