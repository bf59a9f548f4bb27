//! Triples, per-sample knowledge graphs and corpora.
//!
//! Labels are interned into dense `u32` identifiers. Identifiers are assigned
//! in first-seen order after samples have been sorted by sample id, so that a
//! corpus written back out with [`write_corpus`] reloads with identical ids.
//!
//! Two on-disk layouts are accepted, detected from the first non-blank line:
//!
//! * JSON lines: `{"sample": 1, "triples": [["banana", "a kind of", "fruit"], ...]}`
//! * TSV: `sample<TAB>head<TAB>relation<TAB>tail`, one triple per line.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EntityId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RelationId(pub u32);

impl fmt::Display for EntityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "e{}", self.0)
    }
}

impl fmt::Display for RelationId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "r{}", self.0)
    }
}

/// One `(head, relation, tail)` fact.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Triple {
    pub head: EntityId,
    pub relation: RelationId,
    pub tail: EntityId,
}

impl Triple {
    pub fn new(head: EntityId, relation: RelationId, tail: EntityId) -> Self {
        Triple {
            head,
            relation,
            tail,
        }
    }

    pub fn pair(&self) -> (EntityId, EntityId) {
        (self.head, self.tail)
    }
}

/// String intern table. Labels are trimmed and case-sensitive.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Interner {
    labels: Vec<String>,
    index: HashMap<String, u32>,
}

impl Interner {
    pub fn new() -> Self {
        Self::default()
    }

    /// Rebuilds a table from labels listed in id order.
    pub fn from_labels<I, S>(labels: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut table = Interner::new();
        for label in labels {
            let label = label.into();
            let expected = table.len() as u32;
            if table.intern(&label)? != expected {
                return Err(Error::validation(format!("duplicate label {label:?} in intern table")));
            }
        }
        Ok(table)
    }

    pub fn intern(&mut self, label: &str) -> Result<u32> {
        let label = label.trim();
        if label.is_empty() {
            return Err(Error::validation("empty label"));
        }
        if let Some(&id) = self.index.get(label) {
            return Ok(id);
        }
        let id = u32::try_from(self.labels.len())
            .map_err(|_| Error::validation("intern table overflow"))?;
        self.labels.push(label.to_owned());
        self.index.insert(label.to_owned(), id);
        Ok(id)
    }

    pub fn get(&self, label: &str) -> Option<u32> {
        self.index.get(label.trim()).copied()
    }

    pub fn resolve(&self, id: u32) -> Option<&str> {
        self.labels.get(id as usize).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }
}

/// Entity and relation intern tables shared by a corpus and the graph built from it.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Vocabulary {
    pub entities: Interner,
    pub relations: Interner,
}

impl Vocabulary {
    pub fn intern_entity(&mut self, label: &str) -> Result<EntityId> {
        self.entities.intern(label).map(EntityId)
    }

    pub fn intern_relation(&mut self, label: &str) -> Result<RelationId> {
        self.relations.intern(label).map(RelationId)
    }

    pub fn intern_triple(&mut self, head: &str, relation: &str, tail: &str) -> Result<Triple> {
        Ok(Triple {
            head: self.intern_entity(head)?,
            relation: self.intern_relation(relation)?,
            tail: self.intern_entity(tail)?,
        })
    }

    pub fn entity(&self, id: EntityId) -> Option<&str> {
        self.entities.resolve(id.0)
    }

    pub fn relation(&self, id: RelationId) -> Option<&str> {
        self.relations.resolve(id.0)
    }

    pub fn labels_of(&self, triple: &Triple) -> Option<[&str; 3]> {
        Some([
            self.entity(triple.head)?,
            self.relation(triple.relation)?,
            self.entity(triple.tail)?,
        ])
    }
}

/// The triples extracted from one sample. Duplicate triples are rejected.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct KnowledgeGraph {
    triples: Vec<Triple>,
    pub sample_id: Option<u32>,
}

impl KnowledgeGraph {
    pub fn new(triples: Vec<Triple>, sample_id: Option<u32>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(triples.len());
        for t in &triples {
            if !seen.insert(*t) {
                return Err(Error::validation(format!(
                    "duplicate triple ({}, {}, {}) in knowledge graph",
                    t.head, t.relation, t.tail
                )));
            }
        }
        Ok(KnowledgeGraph { triples, sample_id })
    }

    pub fn triples(&self) -> &[Triple] {
        &self.triples
    }

    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }

    pub fn contains(&self, triple: &Triple) -> bool {
        self.triples.contains(triple)
    }

    /// Set view, for order-insensitive comparison.
    pub fn triple_set(&self) -> HashSet<Triple> {
        self.triples.iter().copied().collect()
    }
}

/// A set of per-sample knowledge graphs with sample ids `1..=N`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    samples: Vec<KnowledgeGraph>,
    pub vocab: Vocabulary,
}

impl Corpus {
    /// Builds a corpus from graphs listed in sample order; sample ids are reassigned as `1..=N`.
    pub fn new(samples: Vec<KnowledgeGraph>, vocab: Vocabulary) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        let n = u32::try_from(samples.len()).map_err(|_| Error::validation("too many samples"))?;
        let samples = samples
            .into_iter()
            .zip(1..=n)
            .map(|(mut kg, id)| {
                kg.sample_id = Some(id);
                kg
            })
            .collect::<Vec<_>>();
        for kg in &samples {
            for t in kg.triples() {
                if vocab.labels_of(t).is_none() {
                    return Err(Error::validation(format!(
                        "triple ({}, {}, {}) references an id outside the vocabulary",
                        t.head, t.relation, t.tail
                    )));
                }
            }
        }
        Ok(Corpus { samples, vocab })
    }

    pub fn n_samples(&self) -> u32 {
        self.samples.len() as u32
    }

    pub fn samples(&self) -> &[KnowledgeGraph] {
        &self.samples
    }

    /// 1-based lookup.
    pub fn sample(&self, id: u32) -> Option<&KnowledgeGraph> {
        id.checked_sub(1).and_then(|i| self.samples.get(i as usize))
    }

    pub fn triple_count(&self) -> usize {
        self.samples.iter().map(KnowledgeGraph::len).sum()
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SampleLine {
    sample: Option<i64>,
    triples: Vec<[String; 3]>,
}

#[derive(Serialize)]
struct SampleLineOut<'a> {
    #[serde(skip_serializing_if = "Option::is_none")]
    sample: Option<u32>,
    triples: Vec<[&'a str; 3]>,
}

struct RawTriple {
    line: usize,
    labels: [String; 3],
}

fn is_json_layout(text: &str) -> bool {
    text.lines()
        .map(str::trim)
        .find(|l| !l.is_empty())
        .is_some_and(|l| l.starts_with('{'))
}

fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l))
        .filter(|(_, l)| {
            let t = l.trim();
            !t.is_empty() && !t.starts_with('#')
        })
}

fn parse_sample_id(raw: &str, line: usize) -> Result<u32> {
    let id: i64 = raw.trim().parse().map_err(|_| Error::Parse {
        line,
        message: format!("sample id {raw:?} is not an integer"),
    })?;
    if id < 1 || id > u32::MAX as i64 {
        return Err(Error::Parse {
            line,
            message: format!("sample id {id} out of range (ids start at 1)"),
        });
    }
    Ok(id as u32)
}

fn parse_json_line(line_no: usize, line: &str) -> Result<SampleLine> {
    serde_json::from_str(line).map_err(|e| Error::Parse {
        line: line_no,
        message: e.to_string(),
    })
}

/// Parses corpus text in either layout.
pub fn parse_corpus(text: &str) -> Result<Corpus> {
    let mut raw: BTreeMap<u32, Vec<RawTriple>> = BTreeMap::new();
    if is_json_layout(text) {
        for (line_no, line) in content_lines(text) {
            let parsed = parse_json_line(line_no, line)?;
            let id = match parsed.sample {
                Some(id) => parse_sample_id(&id.to_string(), line_no)?,
                None => {
                    return Err(Error::Parse {
                        line: line_no,
                        message: "missing \"sample\" field".into(),
                    })
                }
            };
            if raw.contains_key(&id) {
                return Err(Error::validation(format!(
                    "line {line_no}: duplicate sample id {id}"
                )));
            }
            let triples = parsed
                .triples
                .into_iter()
                .map(|labels| RawTriple { line: line_no, labels })
                .collect();
            raw.insert(id, triples);
        }
    } else {
        for (line_no, line) in content_lines(text) {
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 4 {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!("expected 4 tab-separated fields, found {}", fields.len()),
                });
            }
            let id = parse_sample_id(fields[0], line_no)?;
            raw.entry(id).or_default().push(RawTriple {
                line: line_no,
                labels: [fields[1].into(), fields[2].into(), fields[3].into()],
            });
        }
    }
    if raw.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    for (expected, &id) in (1u32..).zip(raw.keys()) {
        if id != expected {
            return Err(Error::validation(format!(
                "sample ids must be contiguous from 1: sample {expected} is missing"
            )));
        }
    }

    let mut vocab = Vocabulary::default();
    let mut samples = Vec::with_capacity(raw.len());
    for (id, triples) in raw {
        samples.push(intern_sample(&mut vocab, triples, Some(id))?);
    }
    Corpus::new(samples, vocab)
}

fn intern_sample(
    vocab: &mut Vocabulary,
    triples: Vec<RawTriple>,
    sample_id: Option<u32>,
) -> Result<KnowledgeGraph> {
    let mut seen = HashSet::with_capacity(triples.len());
    let mut out = Vec::with_capacity(triples.len());
    for RawTriple { line, labels: [h, r, t] } in triples {
        let triple = vocab
            .intern_triple(&h, &r, &t)
            .map_err(|e| Error::Parse {
                line,
                message: e.to_string(),
            })?;
        if !seen.insert(triple) {
            return Err(Error::validation(format!(
                "line {line}: duplicate triple ({}, {}, {}) in sample {}",
                h.trim(),
                r.trim(),
                t.trim(),
                sample_id.map_or_else(|| "-".to_string(), |s| s.to_string())
            )));
        }
        out.push(triple);
    }
    KnowledgeGraph::new(out, sample_id)
}

pub fn load_corpus(path: impl AsRef<Path>) -> Result<Corpus> {
    parse_corpus(&fs::read_to_string(path)?)
}

/// Writes the corpus as JSON lines, one sample per line, in sample order.
pub fn write_corpus<W: Write>(corpus: &Corpus, mut out: W) -> Result<()> {
    for kg in corpus.samples() {
        write_graph_line(&corpus.vocab, kg, kg.sample_id, &mut out)?;
    }
    Ok(())
}

pub fn save_corpus(corpus: &Corpus, path: impl AsRef<Path>) -> Result<()> {
    let mut buf = Vec::new();
    write_corpus(corpus, &mut buf)?;
    fs::write(path, buf)?;
    Ok(())
}

fn write_graph_line<W: Write>(
    vocab: &Vocabulary,
    kg: &KnowledgeGraph,
    sample: Option<u32>,
    out: &mut W,
) -> Result<()> {
    let triples = kg
        .triples()
        .iter()
        .map(|t| {
            vocab.labels_of(t).ok_or_else(|| {
                Error::validation(format!(
                    "triple ({}, {}, {}) has an id outside the vocabulary",
                    t.head, t.relation, t.tail
                ))
            })
        })
        .collect::<Result<Vec<_>>>()?;
    serde_json::to_writer(&mut *out, &SampleLineOut { sample, triples })
        .map_err(|e| Error::Io(e.into()))?;
    out.write_all(b"\n")?;
    Ok(())
}

/// Parses a single knowledge graph, interning labels into `vocab`.
///
/// Accepts one JSON object (`sample` optional) or TSV lines of
/// `head<TAB>relation<TAB>tail`.
pub fn parse_graph(text: &str, vocab: &mut Vocabulary) -> Result<KnowledgeGraph> {
    let mut triples = Vec::new();
    let mut sample_id = None;
    if is_json_layout(text) {
        let mut lines = content_lines(text);
        let (line_no, line) = lines.next().expect("layout detection saw a line");
        if let Some((extra, _)) = lines.next() {
            return Err(Error::Parse {
                line: extra,
                message: "a knowledge-graph file holds exactly one JSON object".into(),
            });
        }
        let parsed = parse_json_line(line_no, line)?;
        if let Some(id) = parsed.sample {
            sample_id = Some(parse_sample_id(&id.to_string(), line_no)?);
        }
        triples.extend(
            parsed
                .triples
                .into_iter()
                .map(|labels| RawTriple { line: line_no, labels }),
        );
    } else {
        for (line_no, line) in content_lines(text) {
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 3 {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!("expected 3 tab-separated fields, found {}", fields.len()),
                });
            }
            triples.push(RawTriple {
                line: line_no,
                labels: [fields[0].into(), fields[1].into(), fields[2].into()],
            });
        }
    }
    intern_sample(vocab, triples, sample_id)
}

pub fn load_graph(path: impl AsRef<Path>, vocab: &mut Vocabulary) -> Result<KnowledgeGraph> {
    parse_graph(&fs::read_to_string(path)?, vocab)
}

/// Writes one knowledge graph as a single JSON line.
pub fn write_graph<W: Write>(vocab: &Vocabulary, kg: &KnowledgeGraph, mut out: W) -> Result<()> {
    write_graph_line(vocab, kg, kg.sample_id, &mut out)
}
