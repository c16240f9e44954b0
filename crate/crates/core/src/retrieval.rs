//! Candidate scoring: KL divergence with Dirichlet smoothing, BM25, and a translation
//! language model; plus exhaustive ranking over a corpus.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::Serialize;

use crate::corpus::{idf, tokenize_with, CollectionStats, Corpus, Question, TokenizerConfig};
use crate::error::{Error, Result};
use crate::num::{desc_then, Real};

/// Sparse term distribution. Stored probabilities are strictly positive.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LanguageModel<F> {
    probs: BTreeMap<String, F>,
}

impl<F: Real> LanguageModel<F> {
    /// Maximum-likelihood model of the question's tokens.
    pub fn mle(question: &Question) -> Result<Self> {
        if question.is_empty() {
            return Err(Error::EmptyQuestion(question.id.clone()));
        }
        let total = F::of_count(question.len());
        let probs = question
            .term_counts()
            .into_iter()
            .map(|(t, c)| (t.to_owned(), F::of_count(c) / total))
            .collect();
        Ok(LanguageModel { probs })
    }

    /// MLE over the concatenation of several token streams.
    pub fn mle_concat<'q>(questions: impl IntoIterator<Item = &'q Question>) -> Result<Self> {
        let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
        let mut total = 0usize;
        for q in questions {
            for t in &q.tokens {
                *counts.entry(t).or_default() += 1;
                total += 1;
            }
        }
        if total == 0 {
            return Err(Error::EmptyFeedback);
        }
        let total = F::of_count(total);
        Ok(LanguageModel {
            probs: counts
                .into_iter()
                .map(|(t, c)| (t.to_owned(), F::of_count(c) / total))
                .collect(),
        })
    }

    /// Sum-normalizes nonnegative weights; zero weights are dropped.
    pub fn from_weights<S: Into<String>>(weights: impl IntoIterator<Item = (S, F)>) -> Self {
        let mut acc: BTreeMap<String, F> = BTreeMap::new();
        for (t, w) in weights {
            if w > F::zero() {
                let e = acc.entry(t.into()).or_insert(F::zero());
                *e = *e + w;
            }
        }
        let total: F = acc.values().copied().sum();
        for v in acc.values_mut() {
            *v = *v / total;
        }
        LanguageModel { probs: acc }
    }

    /// Wraps already-normalized probabilities; entries that are not positive are dropped.
    pub(crate) fn from_probs(probs: BTreeMap<String, F>) -> Self {
        LanguageModel {
            probs: probs.into_iter().filter(|(_, p)| *p > F::zero()).collect(),
        }
    }

    pub fn prob(&self, term: &str) -> F {
        self.probs.get(term).copied().unwrap_or(F::zero())
    }

    /// Terms in lexicographic order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, F)> {
        self.probs.iter().map(|(t, &p)| (t.as_str(), p))
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn total(&self) -> F {
        self.probs.values().copied().sum()
    }

    pub fn terms(&self) -> impl Iterator<Item = &str> {
        self.probs.keys().map(String::as_str)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScoringParams<F> {
    /// Dirichlet pseudo-count.
    pub mu: F,
    pub bm25_k1: F,
    pub bm25_b: F,
    /// Weight of the translated component in the translation LM.
    pub translation_beta: F,
    /// Floor on each term's self-translation probability.
    pub translation_self_prob: F,
}

impl<F: Real> Default for ScoringParams<F> {
    fn default() -> Self {
        ScoringParams {
            mu: F::of(1000.0),
            bm25_k1: F::of(1.2),
            bm25_b: F::of(0.75),
            translation_beta: F::of(0.3),
            translation_self_prob: F::of(0.5),
        }
    }
}

impl<F: Real> ScoringParams<F> {
    pub fn validate(&self) -> Result<()> {
        let unit = |x: F| x >= F::zero() && x <= F::one();
        if !(self.mu > F::zero()) {
            return Err(Error::Config(format!("mu must be > 0, got {}", self.mu)));
        }
        if !(self.bm25_k1 >= F::zero()) {
            return Err(Error::Config(format!("bm25_k1 must be >= 0, got {}", self.bm25_k1)));
        }
        if !unit(self.bm25_b) {
            return Err(Error::Config(format!("bm25_b must be in [0, 1], got {}", self.bm25_b)));
        }
        if !unit(self.translation_beta) {
            return Err(Error::Config(format!(
                "translation_beta must be in [0, 1], got {}",
                self.translation_beta
            )));
        }
        if !(self.translation_self_prob > F::zero() && self.translation_self_prob <= F::one()) {
            return Err(Error::Config(format!(
                "translation_self_prob must be in (0, 1], got {}",
                self.translation_self_prob
            )));
        }
        Ok(())
    }
}

fn term_count_map(q: &Question) -> HashMap<&str, usize> {
    let mut m = HashMap::new();
    for t in &q.tokens {
        *m.entry(t.as_str()).or_default() += 1;
    }
    m
}

/// `ln α_d` where α_d = μ / (|d| + μ).
fn log_alpha<F: Real>(len: usize, mu: F) -> F {
    (mu / (F::of_count(len) + mu)).ln()
}

/// Per-term KL weight: ln(p_seen(w|d) / (α_d p(w|C))) = ln(1 + c(w,d) / (μ p(w|C))).
fn kl_term<F: Real>(count: usize, p_c: F, mu: F) -> F {
    (F::of_count(count) / (mu * p_c)).ln_1p()
}

/// Negative KL divergence between the query model and the Dirichlet-smoothed candidate model,
/// with query-only constants dropped. Query terms absent from the collection are skipped.
pub fn kl_score<F: Real>(
    query: &LanguageModel<F>,
    candidate: &Question,
    stats: &CollectionStats,
    params: &ScoringParams<F>,
) -> Result<F> {
    if candidate.is_empty() {
        return Err(Error::EmptyQuestion(candidate.id.clone()));
    }
    let counts = term_count_map(candidate);
    let mut acc = F::zero();
    let mut dropped = F::zero();
    for (w, pq) in query.iter() {
        let p_c: F = stats.p_collection(w);
        if p_c == F::zero() {
            dropped = dropped + pq;
            continue;
        }
        if let Some(&c) = counts.get(w) {
            acc = acc + pq * kl_term(c, p_c, params.mu);
        }
    }
    Ok(acc + (F::one() - dropped) * log_alpha(candidate.len(), params.mu))
}

/// Dirichlet-smoothed query log-likelihood summed over query tokens (with multiplicity).
pub fn query_likelihood_score<F: Real>(
    query: &Question,
    candidate: &Question,
    stats: &CollectionStats,
    params: &ScoringParams<F>,
) -> F {
    let counts = term_count_map(candidate);
    let denom = F::of_count(candidate.len()) + params.mu;
    query
        .tokens
        .iter()
        .filter_map(|w| {
            let p_c: F = stats.p_collection(w);
            (p_c > F::zero()).then(|| {
                let c = F::of_count(counts.get(w.as_str()).copied().unwrap_or(0));
                ((c + params.mu * p_c) / denom).ln()
            })
        })
        .sum()
}

fn bm25_term<F: Real>(tf: usize, len: usize, idf: F, avg_len: F, params: &ScoringParams<F>) -> F {
    let tf = F::of_count(tf);
    let norm = F::one() - params.bm25_b + params.bm25_b * F::of_count(len) / avg_len;
    idf * tf * (params.bm25_k1 + F::one()) / (tf + params.bm25_k1 * norm)
}

/// BM25 summed over query tokens (with multiplicity).
pub fn bm25_score<F: Real>(
    query: &Question,
    candidate: &Question,
    stats: &CollectionStats,
    params: &ScoringParams<F>,
) -> F {
    let counts = term_count_map(candidate);
    let avg = stats.avg_len::<F>();
    query
        .tokens
        .iter()
        .map(|w| match counts.get(w.as_str()) {
            Some(&tf) => bm25_term(tf, candidate.len(), idf(w, stats), avg, params),
            None => F::zero(),
        })
        .sum()
}

/// Row-stochastic word-to-word translation probabilities p(w|u).
#[derive(Debug, Clone, Default)]
pub struct TranslationTable<F> {
    rows: HashMap<String, Vec<(String, F)>>,
    /// target w -> [(source u, p(w|u))]
    into: HashMap<String, Vec<(String, F)>>,
}

impl<F: Real> TranslationTable<F> {
    /// Builds a table from explicit rows. Each row is normalized to sum to one.
    pub fn from_rows(rows: impl IntoIterator<Item = (String, Vec<(String, F)>)>) -> Self {
        let mut table = TranslationTable {
            rows: HashMap::new(),
            into: HashMap::new(),
        };
        for (u, row) in rows {
            let total: F = row.iter().map(|p| p.1).sum();
            let mut row: Vec<(String, F)> = row
                .into_iter()
                .filter(|p| p.1 > F::zero())
                .map(|(w, p)| (w, p / total))
                .collect();
            row.sort_by(|a, b| a.0.cmp(&b.0));
            for (w, p) in &row {
                table.into.entry(w.clone()).or_default().push((u.clone(), *p));
            }
            table.rows.insert(u, row);
        }
        for v in table.into.values_mut() {
            v.sort_by(|a, b| a.0.cmp(&b.0));
        }
        table
    }

    /// Identity translation: every term translates to itself with probability one.
    pub fn identity<'t>(terms: impl IntoIterator<Item = &'t str>) -> Self {
        Self::from_rows(
            terms
                .into_iter()
                .map(|t| (t.to_owned(), vec![(t.to_owned(), F::one())])),
        )
    }

    pub fn prob(&self, source: &str, target: &str) -> F {
        self.rows
            .get(source)
            .and_then(|r| r.binary_search_by(|p| p.0.as_str().cmp(target)).ok().map(|i| r[i].1))
            .unwrap_or(F::zero())
    }

    pub fn row(&self, source: &str) -> Option<&[(String, F)]> {
        self.rows.get(source).map(Vec::as_slice)
    }

    pub fn sources_of(&self, target: &str) -> &[(String, F)] {
        self.into.get(target).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

/// Estimates p(w|u) from pointwise mutual information of term co-occurrence over
/// question–answer units (question tokens together with one answer's tokens). Negative PMI is
/// clipped to zero and pairs seen in fewer than `min_count` units are ignored. Each row's
/// self-translation is raised to at least `self_prob`, the remaining mass spread
/// proportionally over the other targets.
pub fn build_translation_table<F: Real>(
    corpus: &Corpus,
    min_count: usize,
    self_prob: F,
    tokenizer: &TokenizerConfig,
) -> Result<TranslationTable<F>> {
    if !corpus.has_answers() {
        return Err(Error::MissingAnswers);
    }
    let mut term_units: HashMap<&str, usize> = HashMap::new();
    let mut pair_units: HashMap<(&str, &str), usize> = HashMap::new();
    let mut n_units = 0usize;
    let answer_tokens: Vec<Vec<Vec<String>>> = corpus
        .questions()
        .iter()
        .map(|q| q.answers.iter().map(|a| tokenize_with(a, tokenizer)).collect())
        .collect();
    for (q, answers) in corpus.questions().iter().zip(&answer_tokens) {
        for a in answers {
            let unit: BTreeSet<&str> = q
                .tokens
                .iter()
                .chain(a)
                .map(String::as_str)
                .filter(|t| corpus.contains_term(t))
                .collect();
            n_units += 1;
            let unit: Vec<&str> = unit.into_iter().collect();
            for (i, &u) in unit.iter().enumerate() {
                *term_units.entry(u).or_default() += 1;
                for &w in &unit[i + 1..] {
                    *pair_units.entry((u, w)).or_default() += 1;
                }
            }
        }
    }

    let n = n_units as f64;
    let mut rows: BTreeMap<&str, Vec<(&str, f64)>> = BTreeMap::new();
    for (&(u, w), &nuw) in &pair_units {
        if nuw < min_count.max(1) {
            continue;
        }
        let pmi = (n * nuw as f64 / (term_units[u] as f64 * term_units[w] as f64)).ln();
        if pmi > 0.0 {
            rows.entry(u).or_default().push((w, pmi));
            rows.entry(w).or_default().push((u, pmi));
        }
    }

    let self_floor = self_prob.to_f64_lossy();
    let mut vocab: Vec<&str> = term_units.keys().copied().collect();
    vocab.sort_unstable();
    let mut out = Vec::with_capacity(vocab.len());
    for u in vocab {
        let self_pmi = (n / term_units[u] as f64).ln().max(0.0);
        let mut others = rows.remove(u).unwrap_or_default();
        others.sort_by(|a, b| a.0.cmp(b.0));
        let other_mass: f64 = others.iter().map(|p| p.1).sum();
        let total = self_pmi + other_mass;
        let row: Vec<(String, F)> = if other_mass == 0.0 {
            vec![(u.to_owned(), F::one())]
        } else {
            let computed_self = self_pmi / total;
            let p_self = computed_self.max(self_floor);
            let scale = (1.0 - p_self) / other_mass;
            std::iter::once((u.to_owned(), F::of(p_self)))
                .chain(others.into_iter().map(|(w, m)| (w.to_owned(), F::of(m * scale))))
                .collect()
        };
        out.push((u.to_owned(), row));
    }
    Ok(TranslationTable::from_rows(out))
}

/// Per-candidate translated term model, p_tr(w|d) = (1-β) p_ml(w|d) + β Σ_u p(w|u) p_ml(u|d).
fn translated_prob<F: Real>(
    w: &str,
    counts: &HashMap<&str, usize>,
    len: usize,
    table: &TranslationTable<F>,
    beta: F,
) -> F {
    let len_f = F::of_count(len);
    let p_ml = |t: &str| F::of_count(counts.get(t).copied().unwrap_or(0)) / len_f;
    let direct = p_ml(w);
    if beta == F::zero() {
        return direct;
    }
    let translated: F = table
        .sources_of(w)
        .iter()
        .filter(|(u, _)| counts.contains_key(u.as_str()))
        .map(|(u, p)| *p * p_ml(u))
        .sum();
    (F::one() - beta) * direct + beta * translated
}

fn trlm_term<F: Real>(
    w: &str,
    counts: &HashMap<&str, usize>,
    len: usize,
    table: &TranslationTable<F>,
    stats: &CollectionStats,
    params: &ScoringParams<F>,
) -> Option<F> {
    let p_c: F = stats.p_collection(w);
    if p_c == F::zero() {
        return None;
    }
    let p_tr = translated_prob(w, counts, len, table, params.translation_beta);
    let len_f = F::of_count(len);
    Some(((len_f * p_tr + params.mu * p_c) / (len_f + params.mu)).ln())
}

/// Translation language model log-likelihood summed over query tokens (with multiplicity).
pub fn translation_lm_score<F: Real>(
    query: &Question,
    candidate: &Question,
    table: &TranslationTable<F>,
    stats: &CollectionStats,
    params: &ScoringParams<F>,
) -> F {
    let counts = term_count_map(candidate);
    query
        .tokens
        .iter()
        .filter_map(|w| trlm_term(w, &counts, candidate.len(), table, stats, params))
        .sum()
}

#[derive(Debug, Clone, Copy)]
pub enum Scorer<'a, F> {
    /// KL divergence with Dirichlet smoothing.
    Lmir,
    Bm25,
    TranslationLm(&'a TranslationTable<F>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankedList<F> {
    pub query_id: String,
    /// Descending score; ties by ascending question id.
    pub entries: Vec<(String, F)>,
}

impl<F: Real> RankedList<F> {
    pub fn truncate(&mut self, depth: usize) {
        self.entries.truncate(depth);
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.0.as_str())
    }

    pub fn top(&self, n: usize) -> impl Iterator<Item = &str> {
        self.ids().take(n)
    }
}

/// Scores every corpus question against the query model and sorts the result. BM25 and the
/// translation LM weight each query term by its model probability, which orders candidates the
/// same way as the token-level scores of [`bm25_score`] and [`translation_lm_score`].
pub fn rank<F: Real>(
    query_id: &str,
    query: &LanguageModel<F>,
    corpus: &Corpus,
    scorer: Scorer<'_, F>,
    params: &ScoringParams<F>,
) -> RankedList<F> {
    let stats = corpus.stats();
    let questions = corpus.questions();
    let mut scores = vec![F::zero(); questions.len()];
    match scorer {
        Scorer::Lmir => {
            let mut dropped = F::zero();
            for (w, pq) in query.iter() {
                let p_c: F = stats.p_collection(w);
                if p_c == F::zero() {
                    log::debug!("query `{query_id}`: term `{w}` unseen in collection, dropped");
                    dropped = dropped + pq;
                    continue;
                }
                for p in corpus.postings(w) {
                    scores[p.doc] = scores[p.doc] + pq * kl_term(p.count as usize, p_c, params.mu);
                }
            }
            // log α_d is weighted by the query mass that survives the dropped terms
            let mass = F::one() - dropped;
            for (s, q) in scores.iter_mut().zip(questions) {
                *s = *s + mass * log_alpha(q.len(), params.mu);
            }
        }
        Scorer::Bm25 => {
            let avg = stats.avg_len::<F>();
            for (w, pq) in query.iter() {
                let idf_w: F = idf(w, stats);
                for p in corpus.postings(w) {
                    let len = questions[p.doc].len();
                    scores[p.doc] = scores[p.doc] + pq * bm25_term(p.count as usize, len, idf_w, avg, params);
                }
            }
        }
        Scorer::TranslationLm(table) => {
            for (s, q) in scores.iter_mut().zip(questions) {
                let counts = term_count_map(q);
                *s = query
                    .iter()
                    .filter_map(|(w, pq)| trlm_term(w, &counts, q.len(), table, stats, params).map(|x| pq * x))
                    .sum();
            }
        }
    }
    let mut order: Vec<usize> = (0..questions.len()).collect();
    order.sort_by(|&a, &b| desc_then(scores[a], questions[a].id.as_str(), scores[b], questions[b].id.as_str()));
    RankedList {
        query_id: query_id.to_owned(),
        entries: order
            .into_iter()
            .map(|i| (questions[i].id.clone(), scores[i]))
            .collect(),
    }
}

/// TREC run lines: `<query_id> Q0 <question_id> <rank> <score> <tag>`, scores to six decimals.
pub fn format_run_lines<F: Real>(list: &RankedList<F>, tag: &str) -> String {
    let mut out = String::new();
    for (i, (id, s)) in list.entries.iter().enumerate() {
        out.push_str(&format!(
            "{} Q0 {} {} {:.6} {}\n",
            list.query_id,
            id,
            i + 1,
            s.to_f64_lossy(),
            tag
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn corpus(titles: &[(&str, &str)]) -> Corpus {
        Corpus::from_questions(titles.iter().map(|(id, t)| Question::from_title(*id, *t)).collect()).unwrap()
    }

    #[test]
    fn mle_examples() {
        let lm = LanguageModel::<f64>::mle(&Question::from_tokens("q", &["a", "b", "a"])).unwrap();
        assert_eq!(lm.prob("a"), 2.0 / 3.0);
        assert_eq!(lm.prob("b"), 1.0 / 3.0);
        let lm = LanguageModel::<f64>::mle(&Question::from_tokens("q", &["a"])).unwrap();
        assert_eq!(lm.prob("a"), 1.0);
        assert!(LanguageModel::<f64>::mle(&Question::from_tokens::<&str>("q", &[])).is_err());
    }

    #[test]
    fn kl_self_retrieval() {
        let c = corpus(&[("target", "fix camcord"), ("d1", "cheap flights"), ("d2", "best pizza dough")]);
        let q = LanguageModel::mle(c.get("target").unwrap()).unwrap();
        let r = rank("q", &q, &c, Scorer::Lmir, &ScoringParams::<f64>::default());
        assert_eq!(r.entries[0].0, "target");
    }

    #[test]
    fn kl_large_mu_collapses_to_log_alpha() {
        let c = corpus(&[("a", "x y"), ("b", "y z"), ("c", "z w")]);
        let params = ScoringParams {
            mu: 1e9,
            ..Default::default()
        };
        let q = LanguageModel::mle(&Question::from_tokens("q", &["x", "y"])).unwrap();
        for cand in c.questions() {
            let s = kl_score(&q, cand, c.stats(), &params).unwrap();
            let la = (1e9f64 / (cand.len() as f64 + 1e9)).ln();
            assert!((s - la).abs() < 1e-8, "{s} vs {la}");
        }
    }

    #[test]
    fn kl_matches_independent_query_likelihood_on_toy() {
        let c = corpus(&[("1", "a b"), ("2", "a c"), ("3", "b c")]);
        let params = ScoringParams {
            mu: 10.0,
            ..Default::default()
        };
        let query = Question::from_tokens("q", &["a", "b"]);
        // oracle: Π_w (c(w,d) + μ p(w|C)) / (|d| + μ), p(a|C) = p(b|C) = p(c|C) = 1/3
        let oracle = |d: &[&str]| -> f64 {
            ["a", "b"]
                .iter()
                .map(|w| {
                    let cnt = d.iter().filter(|t| *t == w).count() as f64;
                    ((cnt + 10.0 / 3.0) / (2.0 + 10.0)).ln()
                })
                .sum()
        };
        let mut want = vec![("1", oracle(&["a", "b"])), ("2", oracle(&["a", "c"])), ("3", oracle(&["b", "c"]))];
        want.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(b.0)));
        let lm = LanguageModel::mle(&query).unwrap();
        let got = rank("q", &lm, &c, Scorer::Lmir, &params);
        assert_eq!(got.entries[0].0, "1");
        // 2 and 3 tie exactly in both models
        assert_eq!(got.ids().collect::<Vec<_>>(), want.iter().map(|w| w.0).collect::<Vec<_>>());
        assert_eq!(got.entries[1].1, got.entries[2].1);
    }

    #[test]
    fn kl_score_rejects_empty_candidate() {
        let c = corpus(&[("1", "a")]);
        let lm = LanguageModel::mle(&Question::from_tokens("q", &["a"])).unwrap();
        let empty = Question::from_tokens::<&str>("e", &[]);
        assert!(kl_score(&lm, &empty, c.stats(), &ScoringParams::<f64>::default()).is_err());
    }

    #[test]
    fn bm25_examples() {
        let c = corpus(&[("d1", "a b a"), ("d2", "b c"), ("d3", "c d e f")]);
        let p = ScoringParams::<f64>::default();
        let s = c.stats();
        let q = Question::from_tokens("q", &["a", "b"]);
        assert_eq!(bm25_score(&Question::from_tokens("q", &["z"]), c.get("d1").unwrap(), s, &p), 0.0);

        // hand evaluation: N=3, avg_len = 9/3 = 3, df(a)=1, df(b)=2
        let idf_a = (4.0f64 / 1.5).ln();
        let idf_b = (4.0f64 / 2.5).ln();
        let term = |idf: f64, tf: f64, len: f64| idf * tf * 2.2 / (tf + 1.2 * (0.25 + 0.75 * len / 3.0));
        assert_relative_eq!(
            bm25_score(&q, c.get("d1").unwrap(), s, &p),
            term(idf_a, 2.0, 3.0) + term(idf_b, 1.0, 3.0),
            epsilon = 1e-12
        );
        assert_relative_eq!(bm25_score(&q, c.get("d2").unwrap(), s, &p), term(idf_b, 1.0, 2.0), epsilon = 1e-12);
        assert_eq!(bm25_score(&q, c.get("d3").unwrap(), s, &p), 0.0);

        let no_len = ScoringParams { bm25_b: 0.0, ..p };
        let short = Question::from_tokens("s", &["b"]);
        let long = Question::from_tokens("l", &["b", "x", "y", "z"]);
        assert_eq!(bm25_score(&q, &short, s, &no_len), bm25_score(&q, &long, s, &no_len));
    }

    #[test]
    fn bm25_rank_matches_token_score_order() {
        let c = corpus(&[("d1", "a b a"), ("d2", "b c"), ("d3", "c d e f"), ("d4", "a")]);
        let p = ScoringParams::<f64>::default();
        let q = Question::from_tokens("q", &["a", "b", "b"]);
        let r = rank("q", &LanguageModel::mle(&q).unwrap(), &c, Scorer::Bm25, &p);
        for (id, s) in &r.entries {
            let direct = bm25_score(&q, c.get(id).unwrap(), c.stats(), &p);
            assert_relative_eq!(*s * 3.0, direct, epsilon = 1e-12);
        }
    }

    fn qa(id: &str, title: &str, answers: &[&str]) -> Question {
        let mut q = Question::from_title(id, title);
        q.answers = answers.iter().map(|s| s.to_string()).collect();
        q
    }

    #[test]
    fn translation_table_requires_answers() {
        let c = corpus(&[("1", "a b")]);
        assert!(matches!(
            build_translation_table::<f64>(&c, 1, 0.5, &TokenizerConfig::default()),
            Err(Error::MissingAnswers)
        ));
    }

    #[test]
    fn translation_table_degenerate_and_synonym_rows() {
        let c = Corpus::from_questions(vec![
            qa("1", "x", &["y"]),
            qa("2", "y", &["x"]),
            qa("3", "z", &["w"]),
            qa("4", "w", &["z"]),
            qa("5", "solo", &["solo"]),
        ])
        .unwrap();
        let t = build_translation_table::<f64>(&c, 1, 0.5, &TokenizerConfig::default()).unwrap();
        assert_eq!(t.row("solo").unwrap(), &[("solo".to_string(), 1.0)]);
        // brute force PMI: N=5 units, n_x = n_y = 2, n_xy = 2 -> ln(5*2/4) > 0; n_xz = 0
        assert!(t.prob("x", "y") > t.prob("x", "z"));
        assert_eq!(t.prob("x", "z"), 0.0);
        assert!(t.prob("x", "x") >= 0.5);
        for u in ["x", "y", "z", "w", "solo"] {
            let sum: f64 = t.row(u).unwrap().iter().map(|p| p.1).sum();
            assert!((sum - 1.0).abs() < 1e-6, "{u}: {sum}");
        }
    }

    #[test]
    fn translation_lm_degenerate_cases() {
        let c = corpus(&[("1", "car engine"), ("2", "auto engine"), ("3", "pizza dough")]);
        let q = Question::from_tokens("q", &["car", "engine", "car"]);
        let s = c.stats();
        let plain = ScoringParams::<f64> {
            mu: 50.0,
            translation_beta: 0.0,
            ..Default::default()
        };
        let with_beta = ScoringParams {
            translation_beta: 0.4,
            ..plain
        };
        let ident = TranslationTable::identity(c.vocabulary());
        for cand in c.questions() {
            let ql = query_likelihood_score(&q, cand, s, &plain);
            let tr0 = translation_lm_score(&q, cand, &ident, s, &plain);
            let tri = translation_lm_score(&q, cand, &ident, s, &with_beta);
            assert_relative_eq!(ql, tr0, epsilon = 1e-12);
            assert_relative_eq!(tri, tr0, epsilon = 1e-12);
        }
    }

    #[test]
    fn translation_lm_rewards_synonyms() {
        let c = corpus(&[("a", "auto repair"), ("b", "pizza repair"), ("c", "car wash")]);
        let s = c.stats();
        let table = TranslationTable::from_rows([
            ("auto".to_string(), vec![("auto".to_string(), 0.5), ("car".to_string(), 0.5)]),
            ("car".to_string(), vec![("car".to_string(), 0.5), ("auto".to_string(), 0.5)]),
            ("pizza".to_string(), vec![("pizza".to_string(), 1.0)]),
            ("repair".to_string(), vec![("repair".to_string(), 1.0)]),
            ("wash".to_string(), vec![("wash".to_string(), 1.0)]),
        ]);
        let p = ScoringParams::<f64> {
            mu: 10.0,
            translation_beta: 0.5,
            ..Default::default()
        };
        let q = Question::from_tokens("q", &["car"]);
        let qlm = LanguageModel::mle(&q).unwrap();
        // plain LM: neither a nor b contain "car", equal lengths -> tie
        let ka = kl_score(&qlm, c.get("a").unwrap(), s, &p).unwrap();
        let kb = kl_score(&qlm, c.get("b").unwrap(), s, &p).unwrap();
        assert_eq!(ka, kb);
        // brute force: p_tr(car|a) = 0.5 * 0 + 0.5 * p(car|auto) * 1/2 = 0.125
        let pc = 1.0 / 6.0;
        let want_a = ((2.0 * 0.125 + 10.0 * pc) / 12.0f64).ln();
        let want_b = ((10.0 * pc) / 12.0f64).ln();
        assert_relative_eq!(translation_lm_score(&q, c.get("a").unwrap(), &table, s, &p), want_a, epsilon = 1e-12);
        assert_relative_eq!(translation_lm_score(&q, c.get("b").unwrap(), &table, s, &p), want_b, epsilon = 1e-12);
        assert!(want_a > want_b);
        let r = rank("q", &qlm, &c, Scorer::TranslationLm(&table), &p);
        assert_eq!(r.ids().collect::<Vec<_>>(), ["c", "a", "b"]);
    }

    #[test]
    fn rank_single_and_ties() {
        let c = corpus(&[("only", "a b")]);
        let lm = LanguageModel::mle(&Question::from_tokens("q", &["a"])).unwrap();
        assert_eq!(rank("q", &lm, &c, Scorer::Lmir, &ScoringParams::<f64>::default()).entries.len(), 1);
        let c = corpus(&[("z", "a b"), ("m", "a b"), ("b", "x y")]);
        let r = rank("q", &lm, &c, Scorer::Lmir, &ScoringParams::<f64>::default());
        assert_eq!(r.ids().collect::<Vec<_>>(), ["m", "z", "b"]);
    }

    #[test]
    fn run_line_format() {
        let list = RankedList {
            query_id: "q1".into(),
            entries: vec![("d1".into(), -1.5f64), ("d2".into(), -2.0)],
        };
        assert_eq!(
            format_run_lines(&list, "lmir"),
            "q1 Q0 d1 1 -1.500000 lmir\nq1 Q0 d2 2 -2.000000 lmir\n"
        );
    }

    #[test]
    fn works_in_single_precision() {
        let c = corpus(&[("1", "a b"), ("2", "a c"), ("3", "b c")]);
        let lm = LanguageModel::<f32>::mle(&Question::from_tokens("q", &["a", "b"])).unwrap();
        let r = rank("q", &lm, &c, Scorer::Lmir, &ScoringParams::<f32>::default());
        assert_eq!(r.entries[0].0, "1");
    }

    fn random_corpus() -> impl Strategy<Value = Vec<Vec<u8>>> {
        prop::collection::vec(prop::collection::vec(0u8..12, 1..8), 2..30)
    }

    fn build(docs: &[Vec<u8>]) -> Corpus {
        Corpus::from_questions(
            docs.iter()
                .enumerate()
                .map(|(i, d)| {
                    let toks: Vec<String> = d.iter().map(|t| format!("t{t}")).collect();
                    Question::from_tokens(format!("d{i:03}"), &toks)
                })
                .collect(),
        )
        .unwrap()
    }

    proptest! {
        #[test]
        fn rank_matches_naive_kl(docs in random_corpus(), qi in 0usize..30) {
            let c = build(&docs);
            let q = &c.questions()[qi % c.len()];
            let lm = LanguageModel::mle(q).unwrap();
            let p = ScoringParams::<f64> { mu: 25.0, ..Default::default() };
            let r = rank("q", &lm, &c, Scorer::Lmir, &p);
            let mut naive: Vec<(String, f64)> = c.questions().iter()
                .map(|d| (d.id.clone(), kl_score(&lm, d, c.stats(), &p).unwrap()))
                .collect();
            naive.sort_by(|a, b| desc_then(a.1, a.0.as_str(), b.1, b.0.as_str()));
            prop_assert_eq!(r.entries, naive);
        }

        #[test]
        fn unseen_query_terms_keep_query_likelihood_order(
            docs in random_corpus(),
            query in prop::collection::vec(0u8..16, 1..6),
            mu in prop::sample::select(vec![10.0, 100.0, 1000.0]),
        ) {
            // t12..t15 never occur in the corpus
            let c = build(&docs);
            let toks: Vec<String> = query.iter().map(|t| format!("t{t}")).collect();
            let lm = LanguageModel::mle(&Question::from_tokens("q", &toks)).unwrap();
            let p = ScoringParams::<f64> { mu, ..Default::default() };
            let total = c.stats().total_tokens as f64;
            let ql = |d: &Question| -> f64 {
                toks.iter()
                    .filter(|w| c.stats().collection_count(w) > 0)
                    .map(|w| {
                        let pc = c.stats().collection_count(w) as f64 / total;
                        let cnt = d.tokens.iter().filter(|t| *t == w).count() as f64;
                        ((cnt + mu * pc) / (d.len() as f64 + mu)).ln()
                    })
                    .sum()
            };
            let r = rank("q", &lm, &c, Scorer::Lmir, &p);
            for w in r.entries.windows(2) {
                let (a, b) = (ql(c.get(&w[0].0).unwrap()), ql(c.get(&w[1].0).unwrap()));
                prop_assert!(a >= b - 1e-9 * a.abs().max(1.0), "{} above {}: {a} < {b}", w[0].0, w[1].0);
            }
        }

        #[test]
        fn bm25_additive_over_query_terms(docs in random_corpus(), t1 in 0u8..12, t2 in 0u8..12) {
            let c = build(&docs);
            let p = ScoringParams::<f64>::default();
            let (a, b) = (format!("t{t1}"), format!("t{t2}"));
            for d in c.questions() {
                let sa = bm25_score(&Question::from_tokens("q", &[&a]), d, c.stats(), &p);
                let sb = bm25_score(&Question::from_tokens("q", &[&b]), d, c.stats(), &p);
                let sab = bm25_score(&Question::from_tokens("q", &[&a, &b]), d, c.stats(), &p);
                let saa = bm25_score(&Question::from_tokens("q", &[&a, &a]), d, c.stats(), &p);
                prop_assert!((sab - sa - sb).abs() < 1e-12);
                prop_assert!((saa - 2.0 * sa).abs() < 1e-12);
            }
        }

        #[test]
        fn extra_query_term_occurrence_never_hurts(base in prop::collection::vec(1u8..8, 2..6), pos in 0usize..6) {
            // two equal-length candidates; the second swaps one token for the query term t0
            let toks: Vec<String> = base.iter().map(|t| format!("t{t}")).collect();
            let mut boosted = toks.clone();
            boosted[pos % toks.len()] = "t0".to_string();
            let c = Corpus::from_questions(vec![
                Question::from_tokens("plain", &toks),
                Question::from_tokens("boosted", &boosted),
                Question::from_tokens("filler", &["t0", "t9"]),
            ]).unwrap();
            let lm = LanguageModel::mle(&Question::from_tokens("q", &["t0", "t1"])).unwrap();
            let p = ScoringParams::<f64> { mu: 10.0, ..Default::default() };
            let s_plain = kl_score(&lm, c.get("plain").unwrap(), c.stats(), &p).unwrap();
            let s_boost = kl_score(&lm, c.get("boosted").unwrap(), c.stats(), &p).unwrap();
            // replacing t1 by t0 trades one matched query term for another; only assert when
            // the swapped-out token was not itself a query term
            if toks[pos % toks.len()] != "t1" {
                prop_assert!(s_boost >= s_plain);
            }
        }

        #[test]
        fn translation_rows_are_distributions(
            pairs in prop::collection::vec((prop::collection::vec(0u8..6, 1..4), prop::collection::vec(0u8..6, 1..4)), 1..12)
        ) {
            let qs: Vec<Question> = pairs.iter().enumerate().map(|(i, (q, a))| {
                let qt: Vec<String> = q.iter().map(|t| format!("t{t}")).collect();
                let mut question = Question::from_tokens(format!("q{i}"), &qt);
                question.answers = vec![a.iter().map(|t| format!("t{t}")).collect::<Vec<_>>().join(" ")];
                question
            }).collect();
            let c = Corpus::from_questions(qs).unwrap();
            let t = build_translation_table::<f64>(&c, 1, 0.5, &TokenizerConfig::default()).unwrap();
            for u in c.vocabulary() {
                let row = t.row(u).unwrap();
                let sum: f64 = row.iter().map(|p| p.1).sum();
                prop_assert!((sum - 1.0).abs() < 1e-6);
                prop_assert!(t.prob(u, u) >= 0.5 - 1e-12);
            }
        }
    }
}
