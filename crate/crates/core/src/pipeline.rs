//! Method roster, parameter handling and per-query orchestration shared by the CLI and tests.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;

use crate::centrality::{central_words, CentralityReport, CentralitySpec};
use crate::corpus::{Corpus, Question};
use crate::embeddings::{stable_hash, ContextualIndex, EmbeddingTable};
use crate::error::{Error, Result};
use crate::eval::{mean_average_precision, run_from_lists, Judgments};
use crate::expansion::{
    expand_almasri, expand_elmo, expand_elmo_prf, expand_kuzi, expand_none, expand_prf, ExpandedQuery,
    ExpansionParams,
};
use crate::num::Real;
use crate::retrieval::{rank, RankedList, Scorer, ScoringParams, TranslationTable};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum BaseMethod {
    Bm25,
    Lmir,
    TrLm,
    LmPrf,
    ExpAl,
    ExpKuzi,
    ExpElmo,
    ExpElmoPrf,
}

impl BaseMethod {
    pub const ALL: [BaseMethod; 8] = [
        BaseMethod::Bm25,
        BaseMethod::Lmir,
        BaseMethod::TrLm,
        BaseMethod::LmPrf,
        BaseMethod::ExpAl,
        BaseMethod::ExpKuzi,
        BaseMethod::ExpElmo,
        BaseMethod::ExpElmoPrf,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BaseMethod::Bm25 => "bm25",
            BaseMethod::Lmir => "lmir",
            BaseMethod::TrLm => "trlm",
            BaseMethod::LmPrf => "lm-prf",
            BaseMethod::ExpAl => "expAL",
            BaseMethod::ExpKuzi => "expKuzi",
            BaseMethod::ExpElmo => "expELMo",
            BaseMethod::ExpElmoPrf => "expELMoPRF",
        }
    }

    /// Methods that expand with embeddings and therefore have a selective variant.
    pub fn supports_centrality(self) -> bool {
        matches!(
            self,
            BaseMethod::ExpAl | BaseMethod::ExpKuzi | BaseMethod::ExpElmo | BaseMethod::ExpElmoPrf
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Method {
    pub base: BaseMethod,
    pub selective: bool,
}

impl Method {
    pub fn plain(base: BaseMethod) -> Self {
        Method { base, selective: false }
    }

    pub fn selective(base: BaseMethod) -> Self {
        Method { base, selective: true }
    }

    pub fn needs_embeddings(self) -> bool {
        matches!(self.base, BaseMethod::ExpAl | BaseMethod::ExpKuzi)
    }

    pub fn needs_contextual(self) -> bool {
        matches!(self.base, BaseMethod::ExpElmo | BaseMethod::ExpElmoPrf)
    }

    pub fn needs_translation(self) -> bool {
        self.base == BaseMethod::TrLm
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.base.name())?;
        if self.selective {
            f.write_str("-centrality")?;
        }
        Ok(())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        let (name, selective) = match lower.strip_suffix("-centrality") {
            Some(rest) => (rest.to_owned(), true),
            None => (lower, false),
        };
        let name = name.strip_prefix("exp-").map(|n| format!("exp{n}")).unwrap_or(name);
        let base = BaseMethod::ALL
            .into_iter()
            .find(|m| m.name().to_ascii_lowercase() == name)
            .ok_or_else(|| {
                let known: Vec<&str> = BaseMethod::ALL.iter().map(|m| m.name()).collect();
                Error::Config(format!("unknown method `{s}` (expected one of {}, optionally with -centrality)", known.join(", ")))
            })?;
        if selective && !base.supports_centrality() {
            return Err(Error::Config(format!("method `{}` has no centrality variant", base.name())));
        }
        Ok(Method { base, selective })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PipelineParams<F> {
    pub scoring: ScoringParams<F>,
    pub expansion: ExpansionParams<F>,
    pub centrality: CentralitySpec<F>,
    /// Run-file depth per query.
    pub depth: usize,
}

impl<F: Real> Default for PipelineParams<F> {
    fn default() -> Self {
        PipelineParams {
            scoring: ScoringParams::default(),
            expansion: ExpansionParams::default(),
            centrality: CentralitySpec::default(),
            depth: 1000,
        }
    }
}

/// Names accepted by [`PipelineParams::set`].
pub const PARAM_NAMES: &[&str] = &[
    "mu",
    "bm25_k1",
    "bm25_b",
    "translation_beta",
    "translation_self_prob",
    "alpha_al",
    "k_words",
    "v_words",
    "lambda_kuzi",
    "k_questions",
    "alpha_elmo",
    "alpha_prf",
    "beta_prf",
    "prf_depth",
    "prf_weight",
    "smm_lambda",
    "smm_iters",
    "centrality_feedback_depth",
    "centrality_iters",
    "c_idf",
    "damping",
    "depth",
];

impl<F: Real> PipelineParams<F> {
    pub fn validate(&self) -> Result<()> {
        self.scoring.validate()?;
        self.expansion.validate()?;
        self.centrality.validate()?;
        if self.depth == 0 {
            return Err(Error::Config("depth must be >= 1".into()));
        }
        Ok(())
    }

    /// Sets one parameter from its textual value.
    pub fn set(&mut self, name: &str, value: &str) -> Result<()> {
        let real = || -> Result<F> {
            value
                .trim()
                .parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .map(F::of)
                .ok_or_else(|| Error::Config(format!("parameter {name}: expected a number, got `{value}`")))
        };
        let count = || -> Result<usize> {
            value
                .trim()
                .parse::<usize>()
                .map_err(|_| Error::Config(format!("parameter {name}: expected a count, got `{value}`")))
        };
        let (s, e, c) = (&mut self.scoring, &mut self.expansion, &mut self.centrality);
        match name {
            "mu" => s.mu = real()?,
            "bm25_k1" => s.bm25_k1 = real()?,
            "bm25_b" => s.bm25_b = real()?,
            "translation_beta" => s.translation_beta = real()?,
            "translation_self_prob" => s.translation_self_prob = real()?,
            "alpha_al" => e.alpha_al = real()?,
            "k_words" => e.k_words = count()?,
            "v_words" => e.v_words = count()?,
            "lambda_kuzi" => e.lambda_kuzi = real()?,
            "k_questions" => e.k_questions = count()?,
            "alpha_elmo" => e.alpha_elmo = real()?,
            "alpha_prf" => e.alpha_prf = real()?,
            "beta_prf" => e.beta_prf = real()?,
            "prf_depth" => e.prf_depth = count()?,
            "prf_weight" => e.prf_weight = real()?,
            "smm_lambda" => e.smm_lambda = real()?,
            "smm_iters" => e.smm_iters = count()?,
            "centrality_feedback_depth" => c.feedback_depth = count()?,
            "centrality_iters" => c.iters = count()?,
            "c_idf" => c.c_idf = real()?,
            "damping" => c.damping = real()?,
            "depth" => self.depth = count()?,
            _ => {
                return Err(Error::Config(format!(
                    "unknown parameter `{name}` (known: {})",
                    PARAM_NAMES.join(", ")
                )))
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("parameters serialize")
    }

    /// Method name plus a short hash of the full parameter set.
    pub fn run_tag(&self, method: Method) -> String {
        let canonical = serde_json::to_string(self).expect("parameters serialize");
        format!("{method}-{:08x}", stable_hash(canonical.as_bytes()) as u32)
    }
}

/// Corpus plus whatever auxiliary inputs the chosen methods need.
pub struct Resources<'a, F> {
    pub corpus: &'a Corpus,
    pub embeddings: Option<&'a EmbeddingTable<F>>,
    pub contextual: Option<ContextualIndex<'a, F>>,
    pub translation: Option<&'a TranslationTable<F>>,
    vocab: Vec<&'a str>,
}

impl<'a, F: Real> Resources<'a, F> {
    pub fn new(corpus: &'a Corpus) -> Self {
        Resources {
            corpus,
            embeddings: None,
            contextual: None,
            translation: None,
            vocab: corpus.vocabulary(),
        }
    }

    pub fn with_embeddings(mut self, table: &'a EmbeddingTable<F>) -> Self {
        self.embeddings = Some(table);
        self
    }

    pub fn with_contextual(mut self, index: ContextualIndex<'a, F>) -> Self {
        self.contextual = Some(index);
        self
    }

    pub fn with_translation(mut self, table: &'a TranslationTable<F>) -> Self {
        self.translation = Some(table);
        self
    }

    /// Checks that every input `method` needs is present.
    pub fn check(&self, method: Method) -> Result<()> {
        if method.needs_embeddings() && self.embeddings.is_none() {
            return Err(Error::Config(format!("method {method} needs word embeddings (--embeddings)")));
        }
        if method.needs_contextual() && self.contextual.is_none() {
            return Err(Error::Config(format!("method {method} needs a contextual store (--ctx-store)")));
        }
        if method.needs_translation() && self.translation.is_none() {
            return Err(Error::Config(format!("method {method} needs a translation table built from answers")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QueryOutcome<F> {
    pub ranked: RankedList<F>,
    pub expanded: ExpandedQuery<F>,
    pub central: Option<CentralityReport<F>>,
}

/// Builds the query model for `method`, computing central words first for selective variants.
pub fn expand_query<F: Real>(
    method: Method,
    question: &Question,
    res: &Resources<'_, F>,
    params: &PipelineParams<F>,
) -> Result<(ExpandedQuery<F>, Option<CentralityReport<F>>)> {
    res.check(method)?;
    let central = if method.selective {
        Some(central_words(question, res.corpus, &params.centrality, Scorer::Lmir, &params.scoring)?)
    } else {
        None
    };
    let exclude: BTreeSet<String> = central.as_ref().map(|c| c.central.excluded()).unwrap_or_default();
    let e = &params.expansion;
    let expanded = match method.base {
        BaseMethod::Bm25 | BaseMethod::Lmir | BaseMethod::TrLm => expand_none(question)?,
        BaseMethod::LmPrf => expand_prf(question, res.corpus, e, Scorer::Lmir, &params.scoring)?,
        BaseMethod::ExpAl => {
            let table = res.embeddings.expect("checked");
            expand_almasri(question, table, |t| res.corpus.contains_term(t), e, &exclude)?
        }
        BaseMethod::ExpKuzi => expand_kuzi(question, res.embeddings.expect("checked"), &res.vocab, e, &exclude)?,
        BaseMethod::ExpElmo => {
            expand_elmo(question, res.corpus, res.contextual.as_ref().expect("checked"), e, &exclude)?
        }
        BaseMethod::ExpElmoPrf => expand_elmo_prf(
            question,
            res.corpus,
            res.contextual.as_ref().expect("checked"),
            e,
            Scorer::Lmir,
            &params.scoring,
            &exclude,
        )?,
    };
    Ok((expanded, central))
}

/// Expands and ranks one input question. The input question itself is never returned as a
/// candidate.
pub fn run_query<F: Real>(
    method: Method,
    question: &Question,
    res: &Resources<'_, F>,
    params: &PipelineParams<F>,
) -> Result<QueryOutcome<F>> {
    let (expanded, central) = expand_query(method, question, res, params)?;
    let scorer = match method.base {
        BaseMethod::Bm25 => Scorer::Bm25,
        BaseMethod::TrLm => Scorer::TranslationLm(res.translation.expect("checked")),
        _ => Scorer::Lmir,
    };
    let mut ranked = rank(&question.id, &expanded.lm, res.corpus, scorer, &params.scoring);
    ranked.entries.retain(|e| e.0 != question.id);
    ranked.truncate(params.depth);
    Ok(QueryOutcome {
        ranked,
        expanded,
        central,
    })
}

/// Runs every query in parallel on the current rayon pool; results are ordered by query id.
pub fn run_method<F: Real>(
    method: Method,
    queries: &[Question],
    res: &Resources<'_, F>,
    params: &PipelineParams<F>,
) -> Result<Vec<QueryOutcome<F>>> {
    params.validate()?;
    res.check(method)?;
    let mut order: Vec<&Question> = queries.iter().collect();
    order.sort_by(|a, b| a.id.cmp(&b.id));
    order.par_iter().map(|q| run_query(method, q, res, params)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TuneRow {
    pub assignment: Vec<(String, String)>,
    pub dev_map: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TuneReport {
    pub method: String,
    pub dev_queries: Vec<String>,
    pub rows: Vec<TuneRow>,
    pub best: usize,
}

/// Every combination of the grid's values, first parameter varying slowest.
pub fn grid_points(grid: &[(String, Vec<String>)]) -> Vec<Vec<(String, String)>> {
    let mut points: Vec<Vec<(String, String)>> = vec![Vec::new()];
    for (name, values) in grid {
        points = points
            .into_iter()
            .flat_map(|p| {
                values.iter().map(move |v| {
                    let mut p = p.clone();
                    p.push((name.clone(), v.clone()));
                    p
                })
            })
            .collect();
    }
    points
}

/// Grid search over `dev_queries` scored against `dev_judgments`. The caller passes judgments
/// restricted to the dev half; nothing else is consulted. The first setting with the highest dev
/// MAP wins.
pub fn tune<F: Real>(
    method: Method,
    dev_queries: &[Question],
    dev_judgments: &Judgments,
    res: &Resources<'_, F>,
    base: &PipelineParams<F>,
    grid: &[(String, Vec<String>)],
) -> Result<TuneReport> {
    if grid.is_empty() || grid.iter().any(|g| g.1.is_empty()) {
        return Err(Error::Config("tuning grid is empty".into()));
    }
    for (name, _) in grid {
        if !PARAM_NAMES.contains(&name.as_str()) {
            return Err(Error::Config(format!("unknown parameter `{name}` in grid")));
        }
    }
    let mut rows = Vec::new();
    for point in grid_points(grid) {
        let mut params = *base;
        for (name, value) in &point {
            params.set(name, value)?;
        }
        let outcomes = run_method(method, dev_queries, res, &params)?;
        let lists: Vec<RankedList<F>> = outcomes.into_iter().map(|o| o.ranked).collect();
        let report = mean_average_precision(&run_from_lists(&lists), dev_judgments)?;
        rows.push(TuneRow {
            assignment: point,
            dev_map: report.map,
        });
    }
    let best = rows
        .iter()
        .enumerate()
        .fold(0, |best, (i, r)| if r.dev_map > rows[best].dev_map { i } else { best });
    Ok(TuneReport {
        method: method.to_string(),
        dev_queries: dev_queries.iter().map(|q| q.id.clone()).collect(),
        rows,
        best,
    })
}

pub fn format_tune_report(report: &TuneReport) -> String {
    let mut out = String::from("setting\tdev_map\n");
    for (i, r) in report.rows.iter().enumerate() {
        let setting: Vec<String> = r.assignment.iter().map(|(k, v)| format!("{k}={v}")).collect();
        out.push_str(&format!(
            "{}\t{:.6}{}\n",
            setting.join(","),
            r.dev_map,
            if i == report.best { "\t*" } else { "" }
        ));
    }
    let best: Vec<String> = report.rows[report.best]
        .assignment
        .iter()
        .map(|(k, v)| format!("{k}={v}"))
        .collect();
    out.push_str(&format!("# best for {} on {} dev queries: {}\n", report.method, report.dev_queries.len(), best.join(",")));
    out
}
