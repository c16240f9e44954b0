//! Synthetic lexical-gap collections with known relevance and constructed embeddings.
//!
//! The content vocabulary is split into synonym pairs (classes). Each input question draws
//! `question_length` distinct classes; its relevant questions keep the same classes and swap each
//! word for its synonym with probability `synonym_rate`; its distractors reuse the slot structure
//! with classes disjoint from the input's. Static vectors put a class's two words at a small
//! rotation of the class axis, and contextual vectors come from [`PseudoContextual`].

use std::collections::BTreeSet;
use std::io::Write;
use std::path::Path;

use rand::seq::{IteratorRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::corpus::{write_questions, Corpus, Question};
use crate::embeddings::{ContextualStore, EmbeddingTable, PseudoContextual};
use crate::error::{Error, Result};
use crate::eval::Judgments;
use crate::num::Real;

/// Cosine between the two words of a synonym class.
pub const SYNONYM_COSINE: f64 = 0.97;
pub const MIN_SYNONYM_COSINE: f64 = 0.95;
pub const MAX_OTHER_COSINE: f64 = 0.3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SynthSpec {
    pub n_queries: usize,
    pub n_relevant_per_query: usize,
    pub n_distractors: usize,
    pub synonym_rate: f64,
    pub vocab_size: usize,
    pub question_length: usize,
    pub seed: u64,
    /// Weight of the synonym-class component in contextual token vectors; the rest is keyed by
    /// the surface word.
    pub contextual_class_weight: f64,
    pub contextual_dim: usize,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            n_queries: 50,
            n_relevant_per_query: 3,
            n_distractors: 20,
            synonym_rate: 0.6,
            vocab_size: 600,
            question_length: 6,
            seed: 13,
            contextual_class_weight: 0.3,
            contextual_dim: 64,
        }
    }
}

impl SynthSpec {
    /// Smallest vocabulary that leaves room for an input's classes plus disjoint distractors.
    pub fn minimum_vocab(&self) -> usize {
        4 * self.question_length
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("n_queries", self.n_queries),
            ("n_relevant_per_query", self.n_relevant_per_query),
            ("n_distractors", self.n_distractors),
            ("vocab_size", self.vocab_size),
            ("question_length", self.question_length),
            ("contextual_dim", self.contextual_dim),
        ] {
            if v == 0 {
                return Err(Error::Config(format!("synth {name} must be >= 1")));
            }
        }
        if !(0.0..=1.0).contains(&self.synonym_rate) {
            return Err(Error::Config(format!("synonym_rate must be in [0, 1], got {}", self.synonym_rate)));
        }
        if !(0.0..=1.0).contains(&self.contextual_class_weight) {
            return Err(Error::Config(format!(
                "contextual_class_weight must be in [0, 1], got {}",
                self.contextual_class_weight
            )));
        }
        if self.vocab_size < self.minimum_vocab() {
            return Err(Error::VocabTooSmall {
                minimum: self.minimum_vocab(),
                got: self.vocab_size,
            });
        }
        Ok(())
    }

    /// Sets one field from its textual value.
    pub fn set(&mut self, name: &str, value: &str) -> Result<()> {
        let bad = || Error::Config(format!("synth {name}: invalid value `{value}`"));
        let count = || value.trim().parse::<usize>().map_err(|_| bad());
        let real = || value.trim().parse::<f64>().map_err(|_| bad());
        match name {
            "n_queries" => self.n_queries = count()?,
            "n_relevant_per_query" => self.n_relevant_per_query = count()?,
            "n_distractors" => self.n_distractors = count()?,
            "synonym_rate" => self.synonym_rate = real()?,
            "vocab_size" => self.vocab_size = count()?,
            "question_length" => self.question_length = count()?,
            "seed" => self.seed = value.trim().parse().map_err(|_| bad())?,
            "contextual_class_weight" => self.contextual_class_weight = real()?,
            "contextual_dim" => self.contextual_dim = count()?,
            _ => return Err(Error::Config(format!("unknown synth parameter `{name}`"))),
        }
        Ok(())
    }
}

/// Word `variant` (0 or 1) of synonym class `class`.
pub fn synth_word(class: usize, variant: usize) -> String {
    format!("w{class}{}", if variant == 0 { 'a' } else { 'b' })
}

/// Parses a synthetic word back to (class, variant).
pub fn parse_synth_word(word: &str) -> Option<(usize, usize)> {
    let rest = word.strip_prefix('w')?;
    let (num, v) = rest.split_at(rest.len().checked_sub(1)?);
    let variant = match v {
        "a" => 0,
        "b" => 1,
        _ => return None,
    };
    Some((num.parse().ok()?, variant))
}

#[derive(Debug, Clone)]
pub struct SynthCollection<F> {
    pub spec: SynthSpec,
    pub corpus: Corpus,
    pub queries: Vec<Question>,
    pub judgments: Judgments,
    pub embeddings: EmbeddingTable<F>,
    pub contextual: ContextualStore<F>,
}

/// Sparse static vector of a synthetic word: `(axis, value)` pairs over `n_classes + 1` axes.
fn word_axes(class: usize, variant: usize, n_classes: usize) -> Vec<(usize, f64)> {
    if variant == 0 {
        vec![(class, 1.0)]
    } else {
        let s = (1.0 - SYNONYM_COSINE * SYNONYM_COSINE).sqrt();
        vec![(class, SYNONYM_COSINE), (n_classes, s)]
    }
}

fn sparse_dot(a: &[(usize, f64)], b: &[(usize, f64)]) -> f64 {
    a.iter()
        .flat_map(|(i, x)| b.iter().filter(move |(j, _)| j == i).map(move |(_, y)| x * y))
        .sum()
}

/// Checks every word pair against the cosine bounds.
fn assert_geometry(n_classes: usize) -> Result<()> {
    let words: Vec<(usize, usize, Vec<(usize, f64)>)> = (0..n_classes)
        .flat_map(|c| (0..2).map(move |v| (c, v, word_axes(c, v, n_classes))))
        .collect();
    for (i, (ci, _, a)) in words.iter().enumerate() {
        let na = sparse_dot(a, a).sqrt();
        for (cj, _, b) in &words[i + 1..] {
            let cos = sparse_dot(a, b) / (na * sparse_dot(b, b).sqrt());
            let ok = if ci == cj {
                cos >= MIN_SYNONYM_COSINE
            } else {
                cos <= MAX_OTHER_COSINE
            };
            if !ok {
                return Err(Error::Insufficient(format!(
                    "embedding geometry violated between classes {ci} and {cj}: cosine {cos}"
                )));
            }
        }
    }
    Ok(())
}

/// Contextual token vectors: each token's base vector blends the class key and the surface key,
/// and the stub adds neighbor context.
pub fn synth_contextual<F: Real>(tokens: &[String], spec: &SynthSpec) -> Vec<Vec<F>> {
    let enc = PseudoContextual {
        seed: spec.seed,
        ..PseudoContextual::new(spec.contextual_dim)
    };
    let w = spec.contextual_class_weight;
    let (wc, ws) = (w, (1.0 - w * w).max(0.0).sqrt());
    let class_part: Vec<Vec<f64>> = enc.encode_keyed(tokens, |t| match parse_synth_word(t) {
        Some((c, _)) => format!("class:{c}"),
        None => t.to_owned(),
    });
    let surface_part: Vec<Vec<f64>> = enc.encode(tokens);
    class_part
        .iter()
        .zip(&surface_part)
        .map(|(c, s)| c.iter().zip(s).map(|(x, y)| F::of(wc * x + ws * y)).collect())
        .collect()
}

/// Generates a collection; identical specs give identical output.
pub fn generate<F: Real>(spec: &SynthSpec) -> Result<SynthCollection<F>> {
    spec.validate()?;
    let n_classes = spec.vocab_size / 2;
    let len = spec.question_length;
    if n_classes < 2 * len {
        return Err(Error::VocabTooSmall {
            minimum: spec.minimum_vocab(),
            got: spec.vocab_size,
        });
    }
    assert_geometry(n_classes)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    struct Draft {
        tokens: Vec<String>,
        answer: Vec<String>,
        owner: usize,
        relevant: bool,
    }
    let answer_for = |classes: &[usize], rng: &mut ChaCha8Rng| -> Vec<String> {
        classes.iter().map(|&c| synth_word(c, rng.gen_range(0..2))).collect()
    };

    let mut queries = Vec::with_capacity(spec.n_queries);
    let mut drafts: Vec<Draft> = Vec::new();
    for qi in 0..spec.n_queries {
        let classes: Vec<usize> = (0..n_classes).choose_multiple(&mut rng, len);
        let mut classes = classes;
        classes.shuffle(&mut rng);
        let variants: Vec<usize> = (0..len).map(|_| rng.gen_range(0..2)).collect();
        let tokens: Vec<String> = classes.iter().zip(&variants).map(|(&c, &v)| synth_word(c, v)).collect();
        queries.push(Question::from_tokens(format!("in{qi:03}"), &tokens));

        for _ in 0..spec.n_relevant_per_query {
            let tokens: Vec<String> = classes
                .iter()
                .zip(&variants)
                .map(|(&c, &v)| {
                    let swap = rng.gen_bool(spec.synonym_rate);
                    synth_word(c, if swap { 1 - v } else { v })
                })
                .collect();
            let answer = answer_for(&classes, &mut rng);
            drafts.push(Draft {
                tokens,
                answer,
                owner: qi,
                relevant: true,
            });
        }
        let own: BTreeSet<usize> = classes.iter().copied().collect();
        for _ in 0..spec.n_distractors {
            let mut other: Vec<usize> = (0..n_classes)
                .filter(|c| !own.contains(c))
                .choose_multiple(&mut rng, len);
            other.shuffle(&mut rng);
            let tokens: Vec<String> = other.iter().map(|&c| synth_word(c, rng.gen_range(0..2))).collect();
            let answer = answer_for(&other, &mut rng);
            drafts.push(Draft {
                tokens,
                answer,
                owner: qi,
                relevant: false,
            });
        }
    }

    // Corpus ids carry no hint of their role.
    let mut order: Vec<usize> = (0..drafts.len()).collect();
    order.shuffle(&mut rng);
    let width = drafts.len().to_string().len();
    let mut questions = Vec::with_capacity(drafts.len());
    let mut judgments = Judgments::new();
    for (pos, &di) in order.iter().enumerate() {
        let d = &drafts[di];
        let id = format!("c{pos:0width$}");
        let mut q = Question::from_tokens(id.clone(), &d.tokens);
        q.answers = vec![d.answer.join(" ")];
        judgments.insert(&queries[d.owner].id, &id, u8::from(d.relevant))?;
        questions.push(q);
    }
    let corpus = Corpus::from_questions(questions)?;

    let mut embeddings = EmbeddingTable::new(n_classes + 1);
    for c in 0..n_classes {
        for v in 0..2 {
            let mut dense = vec![F::zero(); n_classes + 1];
            for (axis, x) in word_axes(c, v, n_classes) {
                dense[axis] = F::of(x);
            }
            embeddings.insert(&synth_word(c, v), &dense)?;
        }
    }

    let mut contextual = ContextualStore::new(spec.contextual_dim);
    for q in corpus.questions().iter().chain(&queries) {
        contextual.insert(&q.id, &synth_contextual::<F>(&q.tokens, spec))?;
    }

    Ok(SynthCollection {
        spec: *spec,
        corpus,
        queries,
        judgments,
        embeddings,
        contextual,
    })
}

pub const CORPUS_FILE: &str = "corpus.jsonl";
pub const QUERIES_FILE: &str = "queries.jsonl";
pub const QRELS_FILE: &str = "qrels.txt";
pub const EMBEDDINGS_FILE: &str = "embeddings.txt";
pub const CONTEXTUAL_FILE: &str = "contextual.jsonl";

fn create(path: &Path) -> Result<std::io::BufWriter<std::fs::File>> {
    Ok(std::io::BufWriter::new(
        std::fs::File::create(path).map_err(|e| Error::io(path, e))?,
    ))
}

fn io_at(path: &Path) -> impl Fn(std::io::Error) -> Error + '_ {
    move |e| Error::io(path, e)
}

impl<F: Real> SynthCollection<F> {
    /// Writes the corpus, input questions, qrels, static embeddings and contextual store in the
    /// formats the rest of the pipeline reads.
    pub fn write_dir(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let p = dir.join(CORPUS_FILE);
        write_questions(create(&p)?, self.corpus.questions()).map_err(io_at(&p))?;
        let p = dir.join(QUERIES_FILE);
        write_questions(create(&p)?, &self.queries).map_err(io_at(&p))?;
        let p = dir.join(QRELS_FILE);
        let mut w = create(&p)?;
        self.judgments.write(&mut w).and_then(|_| w.flush()).map_err(io_at(&p))?;
        let p = dir.join(EMBEDDINGS_FILE);
        self.embeddings.write_text(create(&p)?).map_err(io_at(&p))?;
        let p = dir.join(CONTEXTUAL_FILE);
        let ids: Vec<&str> = self
            .corpus
            .questions()
            .iter()
            .chain(&self.queries)
            .map(|q| q.id.as_str())
            .collect();
        self.contextual.write(create(&p)?, &ids).map_err(io_at(&p))?;
        Ok(())
    }
}

/// Small hand-built instance of two questions that differ only in their location word: the
/// input asks about hotels in one city, the distractor about the same thing in another city whose
/// vector is close to the first. Several other questions mention hotels in unrelated contexts, so
/// the location word is the input's most central term.
#[derive(Debug, Clone)]
pub struct LocationScenario<F> {
    pub corpus: Corpus,
    pub query: Question,
    pub location: String,
    pub distractor_id: String,
    pub relevant_id: String,
    pub embeddings: EmbeddingTable<F>,
}

pub fn location_scenario<F: Real>() -> Result<LocationScenario<F>> {
    let docs: &[(&str, &str)] = &[
        ("rel", "affordable hotel manchester stay"),
        ("munich", "cheap hotel munich"),
        ("m1", "manchester weather rain"),
        ("m2", "manchester football tickets"),
        ("m3", "manchester train station"),
        ("m4", "manchester airport parking"),
        ("h1", "hotel booking refund"),
        ("h2", "hotel pool opening"),
        ("h3", "hotel breakfast included"),
        ("h4", "hotel pet policy"),
        ("h5", "hotel checkin time"),
        ("h6", "cheap flight deals"),
        ("h7", "cheap laptop recommendation"),
        ("h8", "cheap hotel rooms"),
        ("h9", "cheap hotel deals"),
        ("b1", "munich beer festival dates"),
        ("b2", "london museum tickets"),
    ];
    let corpus = Corpus::from_questions(docs.iter().map(|(id, t)| Question::from_title(*id, *t)).collect())?;
    let query = Question::from_title("input", "cheap hotel manchester");

    // axes: 0 city, 1 manchester, 2 munich, 3 london, 4 lodging, 5 price, 6 other
    let rows: &[(&str, [f64; 7])] = &[
        ("manchester", [0.9, 0.44, 0.0, 0.0, 0.0, 0.0, 0.0]),
        ("munich", [0.9, 0.0, 0.44, 0.0, 0.0, 0.0, 0.0]),
        ("london", [0.9, 0.0, 0.0, 0.44, 0.0, 0.0, 0.0]),
        ("hotel", [0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0]),
        ("stay", [0.0, 0.0, 0.0, 0.0, 0.8, 0.0, 0.6]),
        ("cheap", [0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0]),
        ("affordable", [0.0, 0.0, 0.0, 0.0, 0.0, 0.95, 0.31]),
    ];
    let mut embeddings = EmbeddingTable::new(7);
    for (t, v) in rows {
        embeddings.insert(t, &v.iter().map(|&x| F::of(x)).collect::<Vec<_>>())?;
    }
    Ok(LocationScenario {
        corpus,
        query,
        location: "manchester".into(),
        distractor_id: "munich".into(),
        relevant_id: "rel".into(),
        embeddings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embeddings::cosine;

    fn small() -> SynthSpec {
        SynthSpec {
            n_queries: 6,
            n_relevant_per_query: 2,
            n_distractors: 4,
            vocab_size: 80,
            question_length: 4,
            ..Default::default()
        }
    }

    #[test]
    fn word_names_round_trip() {
        assert_eq!(parse_synth_word(&synth_word(17, 1)), Some((17, 1)));
        assert_eq!(parse_synth_word("hotel"), None);
    }

    #[test]
    fn structure_and_judgments() {
        let s = generate::<f64>(&small()).unwrap();
        assert_eq!(s.queries.len(), 6);
        assert_eq!(s.corpus.len(), 6 * (2 + 4));
        for q in &s.queries {
            assert_eq!(s.judgments.relevant_count(&q.id), 2);
            let classes: BTreeSet<usize> = q.tokens.iter().map(|t| parse_synth_word(t).unwrap().0).collect();
            for c in s.corpus.questions() {
                let Some(label) = s.judgments.label(&q.id, &c.id) else { continue };
                let cc: BTreeSet<usize> = c.tokens.iter().map(|t| parse_synth_word(t).unwrap().0).collect();
                if label == 1 {
                    // reachable by synonym swaps only
                    assert_eq!(c.tokens.len(), q.tokens.len());
                    for (a, b) in q.tokens.iter().zip(&c.tokens) {
                        assert_eq!(parse_synth_word(a).unwrap().0, parse_synth_word(b).unwrap().0);
                    }
                } else {
                    assert!(classes.is_disjoint(&cc));
                }
            }
        }
    }

    #[test]
    fn synonym_rate_extremes() {
        let zero = generate::<f64>(&SynthSpec { synonym_rate: 0.0, ..small() }).unwrap();
        let one = generate::<f64>(&SynthSpec { synonym_rate: 1.0, ..small() }).unwrap();
        for q in &zero.queries {
            for c in zero.corpus.questions().iter().filter(|c| zero.judgments.is_relevant(&q.id, &c.id)) {
                assert_eq!(c.tokens, q.tokens);
            }
        }
        for q in &one.queries {
            for c in one.corpus.questions().iter().filter(|c| one.judgments.is_relevant(&q.id, &c.id)) {
                assert!(c.tokens.iter().all(|t| !q.tokens.contains(t)));
            }
        }
    }

    #[test]
    fn embedding_geometry_bounds() {
        let s = generate::<f64>(&small()).unwrap();
        let terms = s.embeddings.terms().to_vec();
        for (i, a) in terms.iter().enumerate() {
            for b in &terms[i + 1..] {
                let cos = cosine(s.embeddings.vector(a).unwrap(), s.embeddings.vector(b).unwrap()).unwrap();
                if parse_synth_word(a).unwrap().0 == parse_synth_word(b).unwrap().0 {
                    assert!(cos >= MIN_SYNONYM_COSINE);
                } else {
                    assert!(cos <= MAX_OTHER_COSINE);
                }
            }
        }
    }

    #[test]
    fn deterministic_and_written_identically() {
        let a = generate::<f64>(&small()).unwrap();
        let b = generate::<f64>(&small()).unwrap();
        let da = tempfile::tempdir().unwrap();
        let db = tempfile::tempdir().unwrap();
        a.write_dir(da.path()).unwrap();
        b.write_dir(db.path()).unwrap();
        for f in [CORPUS_FILE, QUERIES_FILE, QRELS_FILE, EMBEDDINGS_FILE, CONTEXTUAL_FILE] {
            assert_eq!(std::fs::read(da.path().join(f)).unwrap(), std::fs::read(db.path().join(f)).unwrap(), "{f}");
        }
        let other = generate::<f64>(&SynthSpec { seed: 99, ..small() }).unwrap();
        assert_ne!(other.queries[0].tokens, a.queries[0].tokens);
    }

    #[test]
    fn vocabulary_too_small() {
        let spec = SynthSpec {
            vocab_size: 10,
            question_length: 4,
            ..small()
        };
        assert!(matches!(
            generate::<f64>(&spec),
            Err(Error::VocabTooSmall { minimum: 16, got: 10 })
        ));
    }
}
