//! Term centrality and the central-word set used by selective expansion.
//!
//! Centrality is a damped fixed point over term associations observed in pseudo-relevant
//! feedback questions, then weighted by a damped IDF `idf / (c + idf)`.

use std::collections::BTreeSet;

use serde::Serialize;

use crate::corpus::{idf, CollectionStats, Corpus, Question};
use crate::error::{Error, Result};
use crate::expansion::feedback_questions;
use crate::num::Real;
use crate::retrieval::{Scorer, ScoringParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CentralitySpec<F> {
    pub feedback_depth: usize,
    pub iters: usize,
    pub c_idf: F,
    pub damping: F,
}

impl<F: Real> Default for CentralitySpec<F> {
    fn default() -> Self {
        CentralitySpec {
            feedback_depth: 10,
            iters: 12,
            c_idf: F::one(),
            damping: F::of(0.85),
        }
    }
}

impl<F: Real> CentralitySpec<F> {
    pub fn validate(&self) -> Result<()> {
        if self.feedback_depth == 0 {
            return Err(Error::Config("centrality feedback_depth must be >= 1".into()));
        }
        if self.iters == 0 {
            return Err(Error::Config("centrality iters must be >= 1".into()));
        }
        if !(self.c_idf > F::zero()) {
            return Err(Error::Config(format!("c_idf must be > 0, got {}", self.c_idf)));
        }
        if !(self.damping > F::zero() && self.damping < F::one()) {
            return Err(Error::Config(format!("damping must be in (0, 1), got {}", self.damping)));
        }
        Ok(())
    }
}

/// Distinct question terms in first-occurrence order with their centrality; sums to 1.
#[derive(Debug, Clone, PartialEq)]
pub struct TermCentrality<F> {
    pub terms: Vec<String>,
    pub weights: Vec<F>,
}

impl<F: Real> TermCentrality<F> {
    pub fn get(&self, term: &str) -> Option<F> {
        self.terms.iter().position(|t| t == term).map(|i| self.weights[i])
    }
}

fn distinct_terms(question: &Question) -> Vec<String> {
    let mut seen = BTreeSet::new();
    question
        .tokens
        .iter()
        .filter(|t| seen.insert(t.as_str()))
        .cloned()
        .collect()
}

fn normalize<F: Real>(v: &mut [F]) {
    let s: F = v.iter().copied().sum();
    if s > F::zero() {
        for x in v.iter_mut() {
            *x = *x / s;
        }
    } else {
        let u = F::one() / F::of_count(v.len());
        v.fill(u);
    }
}

/// Raw association counts: off-diagonal entries count feedback questions containing both
/// terms, diagonal entries count those containing the term.
pub fn association_counts(terms: &[String], feedback: &[&Question]) -> Vec<Vec<usize>> {
    let n = terms.len();
    let mut counts = vec![vec![0usize; n]; n];
    for q in feedback {
        let present: Vec<bool> = terms.iter().map(|t| q.tokens.iter().any(|x| x == t)).collect();
        for i in 0..n {
            if !present[i] {
                continue;
            }
            for j in 0..n {
                if present[j] {
                    counts[i][j] += 1;
                }
            }
        }
    }
    counts
}

/// Fixed point `A <- normalize(d · W·A + (1 - d) · f)` for a given association matrix
/// (row-normalized here) and preference vector `f` (normalized here).
pub fn centrality_fixed_point<F: Real>(weights: &[Vec<F>], preference: &[F], damping: F, iters: usize) -> Vec<F> {
    let n = preference.len();
    let rows: Vec<Vec<F>> = weights
        .iter()
        .map(|r| {
            let mut r = r.clone();
            normalize(&mut r);
            r
        })
        .collect();
    let mut f = preference.to_vec();
    normalize(&mut f);
    let mut a = f.clone();
    for _ in 0..iters {
        let mut next: Vec<F> = (0..n)
            .map(|i| {
                let wa: F = rows[i].iter().zip(&a).map(|(w, x)| *w * *x).sum();
                damping * wa + (F::one() - damping) * f[i]
            })
            .collect();
        normalize(&mut next);
        a = next;
    }
    a
}

fn centrality_unchecked<F: Real>(question: &Question, feedback: &[&Question], spec: &CentralitySpec<F>) -> TermCentrality<F> {
    let terms = distinct_terms(question);
    if terms.len() == 1 {
        return TermCentrality {
            terms,
            weights: vec![F::one()],
        };
    }
    let counts = association_counts(&terms, feedback);
    let w: Vec<Vec<F>> = counts
        .iter()
        .map(|r| r.iter().map(|&c| F::of_count(c + 1)).collect())
        .collect();
    let f: Vec<F> = (0..terms.len()).map(|i| F::of_count(counts[i][i])).collect();
    let weights = centrality_fixed_point(&w, &f, spec.damping, spec.iters);
    TermCentrality { terms, weights }
}

/// Centrality of each distinct question term given feedback questions.
pub fn term_centrality<F: Real>(
    question: &Question,
    feedback: &[&Question],
    spec: &CentralitySpec<F>,
) -> Result<TermCentrality<F>> {
    if question.is_empty() {
        return Err(Error::EmptyQuestion(question.id.clone()));
    }
    if feedback.is_empty() {
        return Err(Error::EmptyFeedback);
    }
    Ok(centrality_unchecked(question, feedback, spec))
}

/// Damped IDF `idf / (c + idf)`.
pub fn didf<F: Real>(idf: F, c_idf: F) -> F {
    idf / (c_idf + idf)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CentralWordSet {
    pub pre_idf: String,
    pub post_idf: String,
    pub set: Vec<String>,
}

impl CentralWordSet {
    pub fn from_argmaxes(pre_idf: String, post_idf: String) -> Self {
        let set = if pre_idf == post_idf {
            vec![pre_idf.clone()]
        } else {
            vec![pre_idf.clone(), post_idf.clone()]
        };
        CentralWordSet { pre_idf, post_idf, set }
    }

    pub fn excluded(&self) -> BTreeSet<String> {
        self.set.iter().cloned().collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CentralityRow<F> {
    pub term: String,
    pub centrality: F,
    pub idf: F,
    pub didf: F,
    pub importance: F,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CentralityReport<F> {
    pub query_id: String,
    pub feedback: Vec<String>,
    pub rows: Vec<CentralityRow<F>>,
    pub central: CentralWordSet,
}

fn argmax_first<F: Real>(values: impl Iterator<Item = F>) -> usize {
    let mut best = 0;
    let mut best_v = F::neg_infinity();
    for (i, v) in values.enumerate() {
        if v > best_v {
            best = i;
            best_v = v;
        }
    }
    best
}

/// Combines centrality with damped IDF and selects the central words; ties go to the earliest
/// question position.
pub fn central_words_from<F: Real>(
    centrality: &TermCentrality<F>,
    stats: &CollectionStats,
    c_idf: F,
) -> (Vec<CentralityRow<F>>, CentralWordSet) {
    let rows: Vec<CentralityRow<F>> = centrality
        .terms
        .iter()
        .zip(&centrality.weights)
        .map(|(t, &a)| {
            let idf_t: F = idf(t, stats);
            let d = didf(idf_t, c_idf);
            CentralityRow {
                term: t.clone(),
                centrality: a,
                idf: idf_t,
                didf: d,
                importance: a * d,
            }
        })
        .collect();
    let pre = argmax_first(rows.iter().map(|r| r.centrality));
    let post = argmax_first(rows.iter().map(|r| r.importance));
    let set = CentralWordSet::from_argmaxes(rows[pre].term.clone(), rows[post].term.clone());
    (rows, set)
}

/// Retrieves `feedback_depth` evidence questions with `scorer` and selects the central words.
pub fn central_words<F: Real>(
    question: &Question,
    corpus: &Corpus,
    spec: &CentralitySpec<F>,
    scorer: Scorer<'_, F>,
    scoring: &ScoringParams<F>,
) -> Result<CentralityReport<F>> {
    if question.is_empty() {
        return Err(Error::EmptyQuestion(question.id.clone()));
    }
    let feedback = feedback_questions(question, corpus, scorer, scoring, spec.feedback_depth)?;
    let centrality = centrality_unchecked(question, &feedback, spec);
    let (rows, central) = central_words_from(&centrality, corpus.stats(), spec.c_idf);
    Ok(CentralityReport {
        query_id: question.id.clone(),
        feedback: feedback.iter().map(|q| q.id.clone()).collect(),
        rows,
        central,
    })
}

/// Tab-separated rendering: one row per term, then the selected set.
pub fn format_centrality_table<F: Real>(report: &CentralityReport<F>) -> String {
    let mut out = String::new();
    for r in &report.rows {
        out.push_str(&format!(
            "{}\t{}\t{:.6}\t{:.6}\t{:.6}\t{:.6}\n",
            report.query_id, r.term, r.centrality, r.idf, r.didf, r.importance
        ));
    }
    out.push_str(&format!(
        "{}\t#central\t{}\tpre={}\tpost={}\n",
        report.query_id,
        report.central.set.join(","),
        report.central.pre_idf,
        report.central.post_idf
    ));
    out
}
