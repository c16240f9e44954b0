//! Static word vectors, per-token contextual vectors and the similarity searches built on them.

use std::collections::{BTreeSet, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Question};
use crate::error::{Error, Result};
use crate::num::{desc_then, dot, l2_norm, Real};

/// Word vectors keyed by term, with a unit-length copy of every row.
#[derive(Debug, Clone)]
pub struct EmbeddingTable<F> {
    dim: usize,
    terms: Vec<String>,
    index: HashMap<String, usize>,
    raw: Vec<F>,
    unit: Vec<F>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EmbeddingLoadReport {
    pub rows: usize,
    pub duplicates: usize,
}

impl<F: Real> EmbeddingTable<F> {
    pub fn new(dim: usize) -> Self {
        EmbeddingTable {
            dim,
            terms: Vec::new(),
            index: HashMap::new(),
            raw: Vec::new(),
            unit: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Inserts or replaces a vector. Returns `true` when an existing row was replaced.
    pub fn insert(&mut self, term: &str, vector: &[F]) -> Result<bool> {
        if vector.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: vector.len(),
            });
        }
        let norm = l2_norm(vector);
        let unit = vector.iter().map(|&x| if norm > F::zero() { x / norm } else { F::zero() });
        match self.index.get(term) {
            Some(&i) => {
                let span = i * self.dim..(i + 1) * self.dim;
                self.raw[span.clone()].copy_from_slice(vector);
                for (dst, u) in self.unit[span].iter_mut().zip(unit) {
                    *dst = u;
                }
                Ok(true)
            }
            None => {
                self.index.insert(term.to_owned(), self.terms.len());
                self.terms.push(term.to_owned());
                self.raw.extend_from_slice(vector);
                self.unit.extend(unit);
                Ok(false)
            }
        }
    }

    pub fn contains(&self, term: &str) -> bool {
        self.index.contains_key(term)
    }

    pub fn vector(&self, term: &str) -> Option<&[F]> {
        self.index
            .get(term)
            .map(|&i| &self.raw[i * self.dim..(i + 1) * self.dim])
    }

    /// L2-normalized view of a term's vector (all-zero rows stay zero).
    pub fn unit_vector(&self, term: &str) -> Option<&[F]> {
        self.index
            .get(term)
            .map(|&i| &self.unit[i * self.dim..(i + 1) * self.dim])
    }

    /// Terms in insertion order.
    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    fn unit_row(&self, i: usize) -> &[F] {
        &self.unit[i * self.dim..(i + 1) * self.dim]
    }

    /// Parses the word2vec text format: a `<count> <dim>` header then `<term> <c1> .. <c_dim>` rows.
    /// A repeated term keeps its last row.
    pub fn read_text<R: BufRead>(reader: R, source_name: &str) -> Result<(Self, EmbeddingLoadReport)> {
        let mut lines = reader.lines().enumerate();
        let header = loop {
            match lines.next() {
                Some((i, line)) => {
                    let line = line.map_err(|e| Error::malformed(source_name, i + 1, e.to_string()))?;
                    if !line.trim().is_empty() {
                        break (i + 1, line);
                    }
                }
                None => return Err(Error::malformed(source_name, 1, "missing header")),
            }
        };
        let mut fields = header.1.split_whitespace();
        let parse_usize = |s: Option<&str>| s.and_then(|s| s.parse::<usize>().ok());
        let (_count, dim) = match (parse_usize(fields.next()), parse_usize(fields.next())) {
            (Some(c), Some(d)) if fields.next().is_none() && d > 0 => (c, d),
            _ => {
                return Err(Error::malformed(
                    source_name,
                    header.0,
                    "header must be `<vocab_size> <dim>`",
                ))
            }
        };

        let mut table = EmbeddingTable::new(dim);
        let mut report = EmbeddingLoadReport::default();
        let mut row = Vec::with_capacity(dim);
        for (i, line) in lines {
            let lineno = i + 1;
            let line = line.map_err(|e| Error::malformed(source_name, lineno, e.to_string()))?;
            let mut parts = line.split_whitespace();
            let Some(term) = parts.next() else { continue };
            row.clear();
            for p in parts {
                let x: f64 = p.parse().map_err(|_| {
                    Error::malformed(source_name, lineno, format!("non-numeric component `{p}`"))
                })?;
                row.push(F::of(x));
            }
            if row.len() != dim {
                return Err(Error::malformed(
                    source_name,
                    lineno,
                    format!("row `{term}` has {} components, header says {dim}", row.len()),
                ));
            }
            if table.insert(term, &row)? {
                report.duplicates += 1;
                log::warn!("{source_name}:{lineno}: duplicate term `{term}`, keeping the last row");
            }
            report.rows += 1;
        }
        Ok((table, report))
    }

    pub fn load(path: &Path) -> Result<(Self, EmbeddingLoadReport)> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_text(BufReader::new(file), &path.display().to_string())
    }

    pub fn write_text<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{} {}", self.len(), self.dim)?;
        for (i, term) in self.terms.iter().enumerate() {
            write!(w, "{term}")?;
            for x in &self.raw[i * self.dim..(i + 1) * self.dim] {
                write!(w, " {}", x.to_f64_lossy())?;
            }
            writeln!(w)?;
        }
        w.flush()
    }

    /// The `k` terms most cosine-similar to `base`, drawn from the table rows accepted by
    /// `filter`, excluding `base`. Descending similarity; ties in lexicographic term order.
    /// A base term without a vector yields an empty list.
    pub fn top_k_similar_words(
        &self,
        base: &str,
        k: usize,
        filter: impl Fn(&str) -> bool,
    ) -> Vec<(String, F)> {
        let Some(b) = self.unit_vector(base) else {
            return Vec::new();
        };
        let mut scored: Vec<(usize, F)> = self
            .terms
            .iter()
            .enumerate()
            .filter(|(_, t)| t.as_str() != base && filter(t))
            .map(|(i, _)| (i, clamp_unit(dot(b, self.unit_row(i)))))
            .collect();
        let cmp = |a: &(usize, F), b: &(usize, F)| {
            desc_then(a.1, self.terms[a.0].as_str(), b.1, self.terms[b.0].as_str())
        };
        top_k_by(&mut scored, k, cmp);
        scored
            .into_iter()
            .map(|(i, s)| (self.terms[i].clone(), s))
            .collect()
    }
}

fn clamp_unit<F: Real>(x: F) -> F {
    x.max(-F::one()).min(F::one())
}

/// Keeps the `k` smallest elements under `cmp`, sorted.
pub(crate) fn top_k_by<T>(v: &mut Vec<T>, k: usize, mut cmp: impl FnMut(&T, &T) -> std::cmp::Ordering) {
    if k == 0 {
        v.clear();
        return;
    }
    if v.len() > k {
        v.select_nth_unstable_by(k - 1, &mut cmp);
        v.truncate(k);
    }
    v.sort_by(cmp);
}

/// Cosine similarity in `[-1, 1]`. A zero vector on either side gives 0.
pub fn cosine<F: Real>(u: &[F], v: &[F]) -> Result<F> {
    if u.len() != v.len() {
        return Err(Error::DimensionMismatch {
            expected: u.len(),
            found: v.len(),
        });
    }
    Ok(cosine_unchecked(u, v))
}

pub(crate) fn cosine_unchecked<F: Real>(u: &[F], v: &[F]) -> F {
    let nu = l2_norm(u);
    let nv = l2_norm(v);
    if nu == F::zero() || nv == F::zero() {
        return F::zero();
    }
    clamp_unit(dot(u, v) / (nu * nv))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VectorSource {
    StaticCentroid,
    Contextual,
}

/// Unnormalized sum of token vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct QuestionVector<F> {
    pub values: Vec<F>,
    pub source: VectorSource,
    pub excluded_terms: BTreeSet<String>,
    /// No token contributed (all excluded or missing); callers skip vector-based expansion.
    pub is_zero: bool,
}

fn add_into<F: Real>(acc: &mut [F], v: &[F]) {
    for (a, &x) in acc.iter_mut().zip(v) {
        *a = *a + x;
    }
}

/// Sum of the static vectors of the question's tokens (with multiplicity), skipping excluded
/// tokens and tokens without a vector.
pub fn question_centroid<F: Real>(
    question: &Question,
    table: &EmbeddingTable<F>,
    exclude: &BTreeSet<String>,
) -> QuestionVector<F> {
    let mut values = vec![F::zero(); table.dim()];
    let mut used = 0usize;
    for t in &question.tokens {
        if exclude.contains(t) {
            continue;
        }
        if let Some(v) = table.vector(t) {
            add_into(&mut values, v);
            used += 1;
        }
    }
    let is_zero = used == 0 || values.iter().all(|x| *x == F::zero());
    QuestionVector {
        values,
        source: VectorSource::StaticCentroid,
        excluded_terms: exclude.clone(),
        is_zero,
    }
}

/// Precomputed per-token vectors for each question, aligned with `Question::tokens`.
#[derive(Debug, Clone)]
pub struct ContextualStore<F> {
    dim: usize,
    per_question: HashMap<String, Vec<F>>,
}

#[derive(Deserialize)]
struct ContextualRecord {
    id: String,
    vectors: Vec<Vec<f64>>,
}

impl<F: Real> ContextualStore<F> {
    pub fn new(dim: usize) -> Self {
        ContextualStore {
            dim,
            per_question: HashMap::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.per_question.len()
    }

    pub fn is_empty(&self) -> bool {
        self.per_question.is_empty()
    }

    pub fn contains(&self, id: &str) -> bool {
        self.per_question.contains_key(id)
    }

    pub fn insert(&mut self, id: &str, vectors: &[Vec<F>]) -> Result<()> {
        let mut flat = Vec::with_capacity(vectors.len() * self.dim);
        for v in vectors {
            if v.len() != self.dim {
                return Err(Error::DimensionMismatch {
                    expected: self.dim,
                    found: v.len(),
                });
            }
            flat.extend_from_slice(v);
        }
        self.per_question.insert(id.to_owned(), flat);
        Ok(())
    }

    /// Number of token vectors stored for `id`.
    pub fn token_count(&self, id: &str) -> Option<usize> {
        self.per_question
            .get(id)
            .map(|v| if self.dim == 0 { 0 } else { v.len() / self.dim })
    }

    pub fn token_vectors(&self, id: &str) -> Option<impl Iterator<Item = &[F]>> {
        self.per_question.get(id).map(|v| v.chunks_exact(self.dim.max(1)))
    }

    /// Parses newline-delimited `{"id": .., "vectors": [[..], ..]}` records. `token_count`
    /// resolves a question id to its token count; unknown ids and misaligned records are errors.
    pub fn read<R: BufRead>(
        reader: R,
        source_name: &str,
        token_count: impl Fn(&str) -> Option<usize>,
    ) -> Result<Self> {
        let mut store: Option<ContextualStore<F>> = None;
        for (i, line) in reader.lines().enumerate() {
            let lineno = i + 1;
            let line = line.map_err(|e| Error::malformed(source_name, lineno, e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: ContextualRecord = serde_json::from_str(&line)
                .map_err(|e| Error::malformed(source_name, lineno, e.to_string()))?;
            let expected = token_count(&rec.id).ok_or_else(|| Error::UnknownQuestion(rec.id.clone()))?;
            if expected != rec.vectors.len() {
                return Err(Error::Misaligned {
                    id: rec.id,
                    expected,
                    found: rec.vectors.len(),
                });
            }
            let dim = rec.vectors.first().map_or(0, Vec::len);
            let store = store.get_or_insert_with(|| ContextualStore::new(dim));
            let vectors: Vec<Vec<F>> = rec
                .vectors
                .iter()
                .map(|v| v.iter().map(|&x| F::of(x)).collect())
                .collect();
            store.insert(&rec.id, &vectors).map_err(|e| {
                Error::malformed(source_name, lineno, format!("question `{}`: {e}", rec.id))
            })?;
        }
        Ok(store.unwrap_or_else(|| ContextualStore::new(0)))
    }

    pub fn load(path: &Path, token_count: impl Fn(&str) -> Option<usize>) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read(BufReader::new(file), &path.display().to_string(), token_count)
    }

    /// Writes records for the given ids, in the order given.
    pub fn write<W: Write>(&self, mut w: W, ids: &[&str]) -> std::io::Result<()> {
        for id in ids {
            let Some(vs) = self.token_vectors(id) else { continue };
            let vectors: Vec<Vec<f64>> = vs.map(|v| v.iter().map(|x| x.to_f64_lossy()).collect()).collect();
            let rec = serde_json::json!({ "id": id, "vectors": vectors });
            writeln!(w, "{rec}")?;
        }
        w.flush()
    }
}

/// Sum of the question's contextual token vectors, omitting every position whose surface
/// term equals `exclude_term`.
pub fn contextual_question_vector<F: Real>(
    question: &Question,
    store: &ContextualStore<F>,
    exclude_term: Option<&str>,
) -> Result<QuestionVector<F>> {
    let vectors = store
        .token_vectors(&question.id)
        .ok_or_else(|| Error::UnknownQuestion(question.id.clone()))?;
    let mut values = vec![F::zero(); store.dim()];
    let mut used = 0usize;
    for (term, v) in question.tokens.iter().zip(vectors) {
        if Some(term.as_str()) == exclude_term {
            continue;
        }
        add_into(&mut values, v);
        used += 1;
    }
    let is_zero = used == 0 || values.iter().all(|x| *x == F::zero());
    Ok(QuestionVector {
        values,
        source: VectorSource::Contextual,
        excluded_terms: exclude_term.map(|t| BTreeSet::from([t.to_owned()])).unwrap_or_default(),
        is_zero,
    })
}

/// Corpus-wide cache of unexcluded contextual question vectors.
#[derive(Debug)]
pub struct ContextualIndex<'a, F> {
    corpus: &'a Corpus,
    store: &'a ContextualStore<F>,
    full: Vec<QuestionVector<F>>,
}

impl<'a, F: Real> ContextualIndex<'a, F> {
    /// Fails if the store lacks any corpus question or is misaligned with one.
    pub fn build(corpus: &'a Corpus, store: &'a ContextualStore<F>) -> Result<Self> {
        let full = corpus
            .questions()
            .iter()
            .map(|q| {
                match store.token_count(&q.id) {
                    Some(n) if n == q.len() => {}
                    Some(n) => {
                        return Err(Error::Misaligned {
                            id: q.id.clone(),
                            expected: q.len(),
                            found: n,
                        })
                    }
                    None => return Err(Error::UnknownQuestion(q.id.clone())),
                }
                contextual_question_vector(q, store, None)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(ContextualIndex { corpus, store, full })
    }

    pub fn store(&self) -> &ContextualStore<F> {
        self.store
    }

    /// Candidate ids ranked by cosine to `input`, descending, ties by id. Candidate vectors
    /// omit `exclude_term` just like the input. Zero-vector candidates and `skip_id` are left out.
    pub fn top_k_similar_questions(
        &self,
        input: &QuestionVector<F>,
        k: usize,
        exclude_term: Option<&str>,
        skip_id: Option<&str>,
    ) -> Result<Vec<(String, F)>> {
        let mut recomputed: HashMap<usize, QuestionVector<F>> = HashMap::new();
        if let Some(term) = exclude_term {
            for p in self.corpus.postings(term) {
                let q = &self.corpus.questions()[p.doc];
                recomputed.insert(p.doc, contextual_question_vector(q, self.store, Some(term))?);
            }
        }
        let questions = self.corpus.questions();
        let mut scored: Vec<(usize, F)> = (0..questions.len())
            .filter(|&i| Some(questions[i].id.as_str()) != skip_id)
            .filter_map(|i| {
                let v = recomputed.get(&i).unwrap_or(&self.full[i]);
                (!v.is_zero).then(|| (i, cosine_unchecked(&input.values, &v.values)))
            })
            .collect();
        top_k_by(&mut scored, k, |a, b| {
            desc_then(a.1, questions[a.0].id.as_str(), b.1, questions[b.0].id.as_str())
        });
        Ok(scored
            .into_iter()
            .map(|(i, s)| (questions[i].id.clone(), s))
            .collect())
    }
}

/// Convenience wrapper building a one-off [`ContextualIndex`].
pub fn top_k_similar_questions<F: Real>(
    input: &QuestionVector<F>,
    corpus: &Corpus,
    store: &ContextualStore<F>,
    k: usize,
    exclude_term: Option<&str>,
) -> Result<Vec<String>> {
    let index = ContextualIndex::build(corpus, store)?;
    Ok(index
        .top_k_similar_questions(input, k, exclude_term, None)?
        .into_iter()
        .map(|(id, _)| id)
        .collect())
}

/// 64-bit FNV-1a; stable across platforms and runs.
pub fn stable_hash(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Deterministic stand-in for a contextual encoder: each token gets the hash-seeded unit vector
/// of its key, plus `neighbor_weight` times the unit vectors of its left and right neighbors.
#[derive(Debug, Clone, Copy)]
pub struct PseudoContextual {
    pub dim: usize,
    pub neighbor_weight: f64,
    pub seed: u64,
}

impl PseudoContextual {
    pub fn new(dim: usize) -> Self {
        PseudoContextual {
            dim,
            neighbor_weight: 0.25,
            seed: 0,
        }
    }

    pub fn unit_vector<F: Real>(&self, key: &str) -> Vec<F> {
        let mut rng = ChaCha8Rng::seed_from_u64(stable_hash(key.as_bytes()) ^ self.seed);
        let v: Vec<f64> = (0..self.dim).map(|_| StandardNormal.sample(&mut rng)).collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.iter().map(|x| F::of(x / n)).collect()
    }

    /// Token vectors keyed by the surface terms.
    pub fn encode<F: Real>(&self, tokens: &[String]) -> Vec<Vec<F>> {
        self.encode_keyed(tokens, |t| t.to_owned())
    }

    /// Token vectors where `key` maps each surface term to the string its vector is seeded from.
    pub fn encode_keyed<F: Real>(&self, tokens: &[String], key: impl Fn(&str) -> String) -> Vec<Vec<F>> {
        let units: Vec<Vec<F>> = tokens.iter().map(|t| self.unit_vector(&key(t))).collect();
        let w = F::of(self.neighbor_weight);
        (0..tokens.len())
            .map(|i| {
                let mut v = units[i].clone();
                for j in [i.checked_sub(1), (i + 1 < tokens.len()).then_some(i + 1)]
                    .into_iter()
                    .flatten()
                {
                    for (a, &x) in v.iter_mut().zip(&units[j]) {
                        *a = *a + w * x;
                    }
                }
                v
            })
            .collect()
    }
}
