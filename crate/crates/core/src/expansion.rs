//! Expanded input-question language models.
//!
//! Every method produces an [`ExpandedQuery`] whose model is a sum of tagged contributions:
//!
//! * word-by-word embedding neighbors with per-base-word count conservation ([`expand_almasri`]),
//! * whole-question centroid neighbors interpolated with the MLE ([`expand_kuzi`]),
//! * pseudo-relevance feedback through a simple mixture model ([`expand_prf`], [`smm_feedback_lm`]),
//! * contextual-vector similar-question feedback ([`expand_elmo`]) and its fusion with PRF
//!   ([`expand_elmo_prf`]).
//!
//! Each method takes a set of excluded (central) terms for selective expansion; an empty set
//! gives the non-selective method.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::Serialize;

use crate::corpus::{CollectionStats, Corpus, Question};
use crate::embeddings::{
    contextual_question_vector, question_centroid, top_k_by, ContextualIndex, EmbeddingTable,
};
use crate::error::{Error, Result};
use crate::num::{desc_then, dot, l2_norm, Real};
use crate::retrieval::{rank, LanguageModel, Scorer, ScoringParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Origin {
    Base,
    WordExpansion,
    Centroid,
    ElmoFeedback,
    Prf,
}

impl Origin {
    pub fn as_str(self) -> &'static str {
        match self {
            Origin::Base => "base",
            Origin::WordExpansion => "word-expansion",
            Origin::Centroid => "centroid",
            Origin::ElmoFeedback => "elmo-feedback",
            Origin::Prf => "prf",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExpansionKind {
    Mle,
    Almasri,
    Kuzi,
    Prf,
    Elmo,
    ElmoPrf,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Contribution<F> {
    pub term: String,
    pub origin: Origin,
    pub mass: F,
}

/// Expansion terms produced for one base word, before global normalization.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BaseExpansion<F> {
    pub base: String,
    pub base_count: F,
    pub terms: Vec<(String, F)>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ExpansionDiagnostics<F> {
    /// The method fell back to the unexpanded model (no usable vectors or feedback).
    pub degraded: bool,
    /// Central-word intersection was empty and unexcluded similar questions were used.
    pub intersection_fallback: bool,
    pub elmo_feedback: Vec<String>,
    pub prf_feedback: Vec<String>,
    pub base_expansions: Vec<BaseExpansion<F>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExpandedQuery<F> {
    pub query_id: String,
    pub lm: LanguageModel<F>,
    pub method: ExpansionKind,
    pub excluded: BTreeSet<String>,
    pub contributions: Vec<Contribution<F>>,
    pub diagnostics: ExpansionDiagnostics<F>,
}

impl<F: Real> ExpandedQuery<F> {
    /// Dump record: terms sorted by probability descending (ties by term), each with its
    /// dominant origin and the full per-origin breakdown.
    pub fn dump(&self, params: &serde_json::Value) -> serde_json::Value {
        let mut by_term: BTreeMap<&str, Vec<(Origin, f64)>> = BTreeMap::new();
        for c in &self.contributions {
            by_term.entry(&c.term).or_default().push((c.origin, c.mass.to_f64_lossy()));
        }
        let mut rows: Vec<(&str, f64)> = self.lm.iter().map(|(t, p)| (t, p.to_f64_lossy())).collect();
        rows.sort_by(|a, b| desc_then(a.1, a.0, b.1, b.0));
        let terms: Vec<serde_json::Value> = rows
            .into_iter()
            .map(|(t, p)| {
                let parts = by_term.get(t).cloned().unwrap_or_default();
                let dominant = parts
                    .iter()
                    .max_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal).then(b.0.cmp(&a.0)))
                    .map(|p| p.0.as_str())
                    .unwrap_or("base");
                serde_json::json!({
                    "term": t,
                    "probability": p,
                    "origin": dominant,
                    "origins": parts.iter().map(|(o, m)| serde_json::json!({"origin": o.as_str(), "mass": m})).collect::<Vec<_>>(),
                })
            })
            .collect();
        serde_json::json!({
            "query_id": self.query_id,
            "method": self.method,
            "excluded": self.excluded,
            "params": params,
            "degraded": self.diagnostics.degraded,
            "elmo_feedback": self.diagnostics.elmo_feedback,
            "prf_feedback": self.diagnostics.prf_feedback,
            "terms": terms,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExpansionParams<F> {
    /// Weight of expansion-term counts relative to the base word.
    pub alpha_al: F,
    /// Expansion words per base word.
    pub k_words: usize,
    /// Expansion terms chosen against the question centroid.
    pub v_words: usize,
    /// MLE weight when interpolating with the centroid model.
    pub lambda_kuzi: F,
    /// Similar questions used as contextual feedback.
    pub k_questions: usize,
    pub alpha_elmo: F,
    pub alpha_prf: F,
    pub beta_prf: F,
    pub prf_depth: usize,
    /// Feedback-model weight for the standalone PRF expansion.
    pub prf_weight: F,
    /// Background weight of the feedback mixture.
    pub smm_lambda: F,
    pub smm_iters: usize,
}

impl<F: Real> Default for ExpansionParams<F> {
    fn default() -> Self {
        ExpansionParams {
            alpha_al: F::of(0.4),
            k_words: 2,
            v_words: 9,
            lambda_kuzi: F::of(0.65),
            k_questions: 5,
            alpha_elmo: F::of(0.3),
            alpha_prf: F::of(0.3),
            beta_prf: F::of(0.2),
            prf_depth: 2,
            prf_weight: F::of(0.5),
            smm_lambda: F::of(0.5),
            smm_iters: 20,
        }
    }
}

impl<F: Real> ExpansionParams<F> {
    pub fn validate(&self) -> Result<()> {
        let unit = |name: &str, x: F| {
            if x >= F::zero() && x <= F::one() {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} must be in [0, 1], got {x}")))
            }
        };
        unit("alpha_al", self.alpha_al)?;
        unit("lambda_kuzi", self.lambda_kuzi)?;
        unit("alpha_elmo", self.alpha_elmo)?;
        unit("alpha_prf", self.alpha_prf)?;
        unit("beta_prf", self.beta_prf)?;
        unit("prf_weight", self.prf_weight)?;
        if !(self.smm_lambda > F::zero() && self.smm_lambda < F::one()) {
            return Err(Error::Config(format!("smm_lambda must be in (0, 1), got {}", self.smm_lambda)));
        }
        if self.alpha_prf + self.beta_prf >= F::one() {
            return Err(Error::Config(format!(
                "alpha_prf + beta_prf must be < 1, got {} + {}",
                self.alpha_prf, self.beta_prf
            )));
        }
        for (name, v) in [
            ("k_words", self.k_words),
            ("v_words", self.v_words),
            ("k_questions", self.k_questions),
            ("prf_depth", self.prf_depth),
        ] {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be >= 1")));
            }
        }
        Ok(())
    }
}

/// Accumulates tagged probability mass; the final model sums each term's contributions in
/// insertion order.
struct Mixture<F> {
    parts: Vec<Contribution<F>>,
}

impl<F: Real> Mixture<F> {
    fn new() -> Self {
        Mixture { parts: Vec::new() }
    }

    fn push(&mut self, term: &str, origin: Origin, mass: F) {
        if mass > F::zero() {
            self.parts.push(Contribution {
                term: term.to_owned(),
                origin,
                mass,
            });
        }
    }

    /// Adds `weight · lm`; a zero weight adds nothing.
    fn add_scaled(&mut self, lm: &LanguageModel<F>, weight: F, origin: Origin) {
        if weight == F::zero() {
            return;
        }
        for (t, p) in lm.iter() {
            self.push(t, origin, weight * p);
        }
    }

    fn finish(
        self,
        question: &Question,
        method: ExpansionKind,
        excluded: &BTreeSet<String>,
        diagnostics: ExpansionDiagnostics<F>,
    ) -> ExpandedQuery<F> {
        let mut probs: BTreeMap<String, F> = BTreeMap::new();
        for c in &self.parts {
            let e = probs.entry(c.term.clone()).or_insert(F::zero());
            *e = *e + c.mass;
        }
        let mut contributions = self.parts;
        contributions.sort_by(|a, b| a.term.cmp(&b.term).then(a.origin.cmp(&b.origin)));
        ExpandedQuery {
            query_id: question.id.clone(),
            lm: LanguageModel::from_probs(probs),
            method,
            excluded: excluded.clone(),
            contributions,
            diagnostics,
        }
    }
}

fn unexpanded<F: Real>(
    question: &Question,
    method: ExpansionKind,
    excluded: &BTreeSet<String>,
    degraded: bool,
) -> Result<ExpandedQuery<F>> {
    let mut m = Mixture::new();
    m.add_scaled(&LanguageModel::mle(question)?, F::one(), Origin::Base);
    Ok(m.finish(
        question,
        method,
        excluded,
        ExpansionDiagnostics {
            degraded,
            ..Default::default()
        },
    ))
}

/// The unexpanded question model wrapped as an [`ExpandedQuery`].
pub fn expand_none<F: Real>(question: &Question) -> Result<ExpandedQuery<F>> {
    unexpanded(question, ExpansionKind::Mle, &BTreeSet::new(), false)
}

/// Word-by-word expansion. Each non-excluded base word `t` with a vector receives its
/// `k_words` nearest neighbors (restricted to `vocab_filter`); neighbor counts are
/// `alpha · count(t) · sim`, rescaled so that they sum to `count(t)`. Base words keep their own
/// counts, counts of repeated terms add up, and the total is sum-normalized.
pub fn expand_almasri<F: Real>(
    question: &Question,
    table: &EmbeddingTable<F>,
    vocab_filter: impl Fn(&str) -> bool,
    params: &ExpansionParams<F>,
    exclude: &BTreeSet<String>,
) -> Result<ExpandedQuery<F>> {
    if question.is_empty() {
        return Err(Error::EmptyQuestion(question.id.clone()));
    }
    let term_counts = question.term_counts();
    let mut counts: Vec<(String, Origin, F)> = term_counts
        .iter()
        .map(|&(t, c)| (t.to_owned(), Origin::Base, F::of_count(c)))
        .collect();
    let mut base_expansions = Vec::new();
    for &(base, c) in &term_counts {
        if exclude.contains(base) {
            continue;
        }
        let base_count = F::of_count(c);
        let raw: Vec<(String, F)> = table
            .top_k_similar_words(base, params.k_words, &vocab_filter)
            .into_iter()
            .map(|(t, sim)| (t, params.alpha_al * base_count * sim.max(F::zero())))
            .collect();
        let total: F = raw.iter().map(|p| p.1).sum();
        if !(total > F::zero()) {
            continue;
        }
        let scaled: Vec<(String, F)> = raw
            .into_iter()
            .filter(|p| p.1 > F::zero())
            .map(|(t, r)| (t, r / total * base_count))
            .collect();
        for (t, n) in &scaled {
            counts.push((t.clone(), Origin::WordExpansion, *n));
        }
        base_expansions.push(BaseExpansion {
            base: base.to_owned(),
            base_count,
            terms: scaled,
        });
    }

    let total: F = counts.iter().map(|c| c.2).sum();
    let mut m = Mixture::new();
    for (t, origin, n) in &counts {
        m.push(t, *origin, *n / total);
    }
    Ok(m.finish(
        question,
        ExpansionKind::Almasri,
        exclude,
        ExpansionDiagnostics {
            base_expansions,
            ..Default::default()
        },
    ))
}

/// Centroid expansion. Scores every vocabulary term with a vector by
/// `exp(cos(unit(t), centroid))`, keeps the top `v_words`, sum-normalizes them and interpolates
/// `lambda_kuzi · MLE + (1 - lambda_kuzi) · P_cent`. A zero centroid degrades to the MLE.
pub fn expand_kuzi<F: Real>(
    question: &Question,
    table: &EmbeddingTable<F>,
    vocab: &[&str],
    params: &ExpansionParams<F>,
    exclude: &BTreeSet<String>,
) -> Result<ExpandedQuery<F>> {
    let mle = LanguageModel::mle(question)?;
    let centroid = question_centroid(question, table, exclude);
    if centroid.is_zero {
        return unexpanded(question, ExpansionKind::Kuzi, exclude, true);
    }
    let norm = l2_norm(&centroid.values);
    let mut scored: Vec<(&str, F)> = vocab
        .iter()
        .filter_map(|&t| {
            table.unit_vector(t).map(|u| {
                let cos = (dot(u, &centroid.values) / norm).max(-F::one()).min(F::one());
                (t, cos.exp())
            })
        })
        .collect();
    top_k_by(&mut scored, params.v_words, |a, b| desc_then(a.1, a.0, b.1, b.0));
    let p_cent = LanguageModel::from_weights(scored.iter().map(|&(t, s)| (t, s)));

    let mut m = Mixture::new();
    m.add_scaled(&mle, params.lambda_kuzi, Origin::Base);
    m.add_scaled(&p_cent, F::one() - params.lambda_kuzi, Origin::Centroid);
    Ok(m.finish(
        question,
        ExpansionKind::Kuzi,
        exclude,
        ExpansionDiagnostics {
            degraded: p_cent.is_empty(),
            ..Default::default()
        },
    ))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SmmFit<F> {
    pub lm: LanguageModel<F>,
    /// Log-likelihood of the feedback counts at the initial estimate and after every iteration.
    pub log_likelihood: Vec<F>,
}

fn smm_log_likelihood<F: Real>(counts: &[(String, F, F)], p: &[F], lambda: F) -> F {
    counts
        .iter()
        .zip(p)
        .map(|((_, c, bg), &pt)| *c * ((F::one() - lambda) * pt + lambda * *bg).ln())
        .sum()
}

/// Topic model of the feedback questions under a two-component mixture with the collection
/// background, fitted by EM from the MLE of the concatenated feedback.
pub fn smm_feedback_lm<F: Real>(
    feedback: &[&Question],
    stats: &CollectionStats,
    lambda: F,
    iters: usize,
) -> Result<SmmFit<F>> {
    if !(lambda > F::zero() && lambda < F::one()) {
        return Err(Error::Config(format!("smm_lambda must be in (0, 1), got {lambda}")));
    }
    let mut tally: BTreeMap<&str, usize> = BTreeMap::new();
    for q in feedback {
        for t in &q.tokens {
            *tally.entry(t).or_default() += 1;
        }
    }
    if tally.is_empty() {
        return Err(Error::EmptyFeedback);
    }
    // (term, c(t, F), p(t|C))
    let counts: Vec<(String, F, F)> = tally
        .into_iter()
        .map(|(t, c)| (t.to_owned(), F::of_count(c), stats.p_collection(t)))
        .collect();
    let total: F = counts.iter().map(|c| c.1).sum();
    let mut p: Vec<F> = counts.iter().map(|c| c.1 / total).collect();
    let one_minus = F::one() - lambda;
    let mut trace = vec![smm_log_likelihood(&counts, &p, lambda)];
    for _ in 0..iters {
        let weighted: Vec<F> = counts
            .iter()
            .zip(&p)
            .map(|((_, c, bg), &pt)| {
                let topic = one_minus * pt;
                let denom = topic + lambda * *bg;
                if denom > F::zero() {
                    *c * topic / denom
                } else {
                    F::zero()
                }
            })
            .collect();
        let norm: F = weighted.iter().copied().sum();
        if !(norm > F::zero()) {
            break;
        }
        p = weighted.into_iter().map(|w| w / norm).collect();
        trace.push(smm_log_likelihood(&counts, &p, lambda));
    }
    let lm = LanguageModel::from_probs(counts.into_iter().map(|c| c.0).zip(p).collect());
    Ok(SmmFit {
        lm,
        log_likelihood: trace,
    })
}

/// Top-`depth` questions for the unexpanded query under `scorer`, skipping the query itself.
pub fn feedback_questions<'c, F: Real>(
    question: &Question,
    corpus: &'c Corpus,
    scorer: Scorer<'_, F>,
    scoring: &ScoringParams<F>,
    depth: usize,
) -> Result<Vec<&'c Question>> {
    let lm = LanguageModel::mle(question)?;
    let ranked = rank(&question.id, &lm, corpus, scorer, scoring);
    Ok(ranked
        .ids()
        .filter(|id| *id != question.id)
        .take(depth)
        .filter_map(|id| corpus.get(id))
        .collect())
}

/// Standalone pseudo-relevance feedback: `(1 - prf_weight) · MLE + prf_weight · θ_F`.
pub fn expand_prf<F: Real>(
    question: &Question,
    corpus: &Corpus,
    params: &ExpansionParams<F>,
    scorer: Scorer<'_, F>,
    scoring: &ScoringParams<F>,
) -> Result<ExpandedQuery<F>> {
    let mle = LanguageModel::mle(question)?;
    let feedback = feedback_questions(question, corpus, scorer, scoring, params.prf_depth)?;
    if feedback.is_empty() {
        return unexpanded(question, ExpansionKind::Prf, &BTreeSet::new(), true);
    }
    let theta = smm_feedback_lm(&feedback, corpus.stats(), params.smm_lambda, params.smm_iters)?.lm;
    let mut m = Mixture::new();
    m.add_scaled(&mle, F::one() - params.prf_weight, Origin::Base);
    m.add_scaled(&theta, params.prf_weight, Origin::Prf);
    Ok(m.finish(
        question,
        ExpansionKind::Prf,
        &BTreeSet::new(),
        ExpansionDiagnostics {
            prf_feedback: feedback.iter().map(|q| q.id.clone()).collect(),
            ..Default::default()
        },
    ))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimilarQuestions {
    pub ids: Vec<String>,
    pub intersection_fallback: bool,
}

/// Contextual similar-question feedback set. With no central terms this is the plain top-k;
/// with one, the input and candidate vectors omit it; with several, the top-k sets computed per
/// central term are intersected (keeping the first set's order). An empty intersection, or an
/// input left with no vectors after exclusion, falls back to the unexcluded top-k.
pub fn similar_questions<F: Real>(
    question: &Question,
    index: &ContextualIndex<'_, F>,
    k: usize,
    exclude_central: &BTreeSet<String>,
) -> Result<SimilarQuestions> {
    let top = |exclude: Option<&str>| -> Result<Option<Vec<String>>> {
        let input = contextual_question_vector(question, index.store(), exclude)?;
        if input.is_zero {
            return Ok(None);
        }
        Ok(Some(
            index
                .top_k_similar_questions(&input, k, exclude, Some(&question.id))?
                .into_iter()
                .map(|p| p.0)
                .collect(),
        ))
    };
    let plain = || -> Result<Vec<String>> { Ok(top(None)?.unwrap_or_default()) };

    if exclude_central.is_empty() {
        return Ok(SimilarQuestions {
            ids: plain()?,
            intersection_fallback: false,
        });
    }
    let mut result: Option<Vec<String>> = None;
    for term in exclude_central {
        let Some(set) = top(Some(term))? else {
            return Ok(SimilarQuestions {
                ids: plain()?,
                intersection_fallback: true,
            });
        };
        result = Some(match result {
            None => set,
            Some(prev) => {
                let keep: BTreeSet<&String> = set.iter().collect();
                prev.into_iter().filter(|id| keep.contains(id)).collect()
            }
        });
    }
    let ids = result.unwrap_or_default();
    if ids.is_empty() {
        return Ok(SimilarQuestions {
            ids: plain()?,
            intersection_fallback: true,
        });
    }
    Ok(SimilarQuestions {
        ids,
        intersection_fallback: false,
    })
}

fn elmo_feedback_lm<F: Real>(
    question: &Question,
    index: &ContextualIndex<'_, F>,
    corpus: &Corpus,
    k: usize,
    exclude_central: &BTreeSet<String>,
) -> Result<(Option<LanguageModel<F>>, SimilarQuestions)> {
    if !index.store().contains(&question.id) {
        return Err(Error::UnknownQuestion(question.id.clone()));
    }
    let similar = similar_questions(question, index, k, exclude_central)?;
    let feedback: Vec<&Question> = similar.ids.iter().filter_map(|id| corpus.get(id)).collect();
    let lm = if feedback.is_empty() {
        None
    } else {
        Some(LanguageModel::mle_concat(feedback)?)
    };
    Ok((lm, similar))
}

/// Similar-question expansion: `(1 - alpha_elmo) · MLE + alpha_elmo · θ_F_ELMo`, with θ_F_ELMo
/// the MLE of the concatenated feedback questions.
pub fn expand_elmo<F: Real>(
    question: &Question,
    corpus: &Corpus,
    index: &ContextualIndex<'_, F>,
    params: &ExpansionParams<F>,
    exclude_central: &BTreeSet<String>,
) -> Result<ExpandedQuery<F>> {
    let mle = LanguageModel::mle(question)?;
    let (theta, similar) = elmo_feedback_lm(question, index, corpus, params.k_questions, exclude_central)?;
    let Some(theta) = theta else {
        return unexpanded(question, ExpansionKind::Elmo, exclude_central, true);
    };
    let mut m = Mixture::new();
    m.add_scaled(&mle, F::one() - params.alpha_elmo, Origin::Base);
    m.add_scaled(&theta, params.alpha_elmo, Origin::ElmoFeedback);
    Ok(m.finish(
        question,
        ExpansionKind::Elmo,
        exclude_central,
        ExpansionDiagnostics {
            intersection_fallback: similar.intersection_fallback,
            elmo_feedback: similar.ids,
            ..Default::default()
        },
    ))
}

/// `(1 - alpha_prf - beta_prf) · MLE + alpha_prf · θ_F_ELMo + beta_prf · θ_F`.
pub fn expand_elmo_prf<F: Real>(
    question: &Question,
    corpus: &Corpus,
    index: &ContextualIndex<'_, F>,
    params: &ExpansionParams<F>,
    scorer: Scorer<'_, F>,
    scoring: &ScoringParams<F>,
    exclude_central: &BTreeSet<String>,
) -> Result<ExpandedQuery<F>> {
    if params.alpha_prf + params.beta_prf >= F::one() {
        return Err(Error::Config(format!(
            "alpha_prf + beta_prf must be < 1, got {} + {}",
            params.alpha_prf, params.beta_prf
        )));
    }
    let mle = LanguageModel::mle(question)?;
    let (elmo, similar) = if params.alpha_prf > F::zero() {
        elmo_feedback_lm(question, index, corpus, params.k_questions, exclude_central)?
    } else {
        (None, SimilarQuestions { ids: Vec::new(), intersection_fallback: false })
    };
    let (prf, prf_ids) = if params.beta_prf > F::zero() {
        let feedback = feedback_questions(question, corpus, scorer, scoring, params.prf_depth)?;
        let ids = feedback.iter().map(|q| q.id.clone()).collect::<Vec<_>>();
        if feedback.is_empty() {
            (None, ids)
        } else {
            (
                Some(smm_feedback_lm(&feedback, corpus.stats(), params.smm_lambda, params.smm_iters)?.lm),
                ids,
            )
        }
    } else {
        (None, Vec::new())
    };

    // A missing feedback model hands its weight back to the question model.
    let alpha = if elmo.is_some() { params.alpha_prf } else { F::zero() };
    let beta = if prf.is_some() { params.beta_prf } else { F::zero() };
    let mut m = Mixture::new();
    m.add_scaled(&mle, F::one() - alpha - beta, Origin::Base);
    if let Some(lm) = &elmo {
        m.add_scaled(lm, alpha, Origin::ElmoFeedback);
    }
    if let Some(lm) = &prf {
        m.add_scaled(lm, beta, Origin::Prf);
    }
    let wanted = params.alpha_prf > F::zero() || params.beta_prf > F::zero();
    Ok(m.finish(
        question,
        ExpansionKind::ElmoPrf,
        exclude_central,
        ExpansionDiagnostics {
            degraded: wanted && elmo.is_none() && prf.is_none(),
            intersection_fallback: similar.intersection_fallback,
            elmo_feedback: similar.ids,
            prf_feedback: prf_ids,
            ..Default::default()
        },
    ))
}

/// Per-base-word sums of expansion counts, for checking conservation.
pub fn expansion_count_sums<F: Real>(q: &ExpandedQuery<F>) -> HashMap<String, (F, F)> {
    q.diagnostics
        .base_expansions
        .iter()
        .map(|b| (b.base.clone(), (b.base_count, b.terms.iter().map(|t| t.1).sum())))
        .collect()
}
