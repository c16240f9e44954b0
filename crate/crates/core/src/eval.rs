//! Relevance judgments, run files, average precision, dev/test splits and paired t-tests.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::num::Real;
use crate::retrieval::RankedList;

/// Ranked question ids per query id.
pub type Run = BTreeMap<String, Vec<String>>;

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Judgments {
    rels: BTreeMap<String, BTreeMap<String, u8>>,
}

impl Judgments {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, query: &str, question: &str, label: u8) -> Result<()> {
        if label > 1 {
            return Err(Error::Config(format!("relevance label must be 0 or 1, got {label}")));
        }
        let prev = self
            .rels
            .entry(query.to_owned())
            .or_default()
            .insert(question.to_owned(), label);
        if prev.is_some() {
            return Err(Error::DuplicateId(format!("{query} {question}")));
        }
        Ok(())
    }

    pub fn label(&self, query: &str, question: &str) -> Option<u8> {
        self.rels.get(query).and_then(|m| m.get(question)).copied()
    }

    pub fn is_relevant(&self, query: &str, question: &str) -> bool {
        self.label(query, question) == Some(1)
    }

    pub fn relevant_count(&self, query: &str) -> usize {
        self.rels
            .get(query)
            .map_or(0, |m| m.values().filter(|&&l| l == 1).count())
    }

    pub fn query_ids(&self) -> impl Iterator<Item = &str> {
        self.rels.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.rels.values().map(BTreeMap::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.rels.is_empty()
    }

    /// Judgments for the given queries only.
    pub fn restrict<'a>(&self, queries: impl IntoIterator<Item = &'a str>) -> Judgments {
        let keep: BTreeSet<&str> = queries.into_iter().collect();
        Judgments {
            rels: self
                .rels
                .iter()
                .filter(|(q, _)| keep.contains(q.as_str()))
                .map(|(q, m)| (q.clone(), m.clone()))
                .collect(),
        }
    }

    pub fn write(&self, mut w: impl Write) -> std::io::Result<()> {
        for (q, m) in &self.rels {
            for (d, l) in m {
                writeln!(w, "{q} 0 {d} {l}")?;
            }
        }
        Ok(())
    }
}

/// Reads TREC qrels lines `<query_id> 0 <question_id> <0|1>`.
pub fn read_qrels(reader: impl BufRead, source_name: &str) -> Result<Judgments> {
    let mut j = Judgments::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(source_name, e))?;
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.is_empty() {
            continue;
        }
        let bad = |msg: String| Error::malformed(source_name, i + 1, msg);
        if fields.len() != 4 {
            return Err(bad(format!("expected 4 fields, found {}", fields.len())));
        }
        let label: u8 = match fields[3] {
            "0" => 0,
            "1" => 1,
            other => return Err(bad(format!("relevance label must be 0 or 1, got {other:?}"))),
        };
        j.insert(fields[0], fields[2], label).map_err(|e| match e {
            Error::DuplicateId(pair) => bad(format!("duplicate judgment for {pair}")),
            other => other,
        })?;
    }
    Ok(j)
}

pub fn read_qrels_file(path: &Path) -> Result<Judgments> {
    let f = std::fs::File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    read_qrels(std::io::BufReader::new(f), &path.display().to_string())
}

/// Reads TREC run lines `<qid> Q0 <id> <rank> <score> <tag>`, ordering each query by rank.
pub fn read_run(reader: impl BufRead, source_name: &str) -> Result<Run> {
    let mut rows: BTreeMap<String, Vec<(usize, String)>> = BTreeMap::new();
    let mut seen: BTreeSet<(String, String)> = BTreeSet::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(source_name, e))?;
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.is_empty() {
            continue;
        }
        let bad = |msg: String| Error::malformed(source_name, i + 1, msg);
        if fields.len() != 6 {
            return Err(bad(format!("expected 6 fields, found {}", fields.len())));
        }
        let rank: usize = fields[3].parse().map_err(|_| bad(format!("bad rank {:?}", fields[3])))?;
        fields[4]
            .parse::<f64>()
            .map_err(|_| bad(format!("bad score {:?}", fields[4])))?;
        if !seen.insert((fields[0].to_owned(), fields[2].to_owned())) {
            return Err(bad(format!("question {} listed twice for query {}", fields[2], fields[0])));
        }
        rows.entry(fields[0].to_owned())
            .or_default()
            .push((rank, fields[2].to_owned()));
    }
    Ok(rows
        .into_iter()
        .map(|(q, mut v)| {
            v.sort();
            (q, v.into_iter().map(|p| p.1).collect())
        })
        .collect())
}

pub fn read_run_file(path: &Path) -> Result<Run> {
    let f = std::fs::File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    read_run(std::io::BufReader::new(f), &path.display().to_string())
}

pub fn run_from_lists<F: Real>(lists: &[RankedList<F>]) -> Run {
    lists
        .iter()
        .map(|l| (l.query_id.clone(), l.ids().map(str::to_owned).collect()))
        .collect()
}

/// Average precision of a ranking; `None` when the query has no relevant judgments.
/// Unjudged questions count as non-relevant.
pub fn average_precision<S: AsRef<str>>(query: &str, ranked: &[S], judgments: &Judgments) -> Option<f64> {
    let r = judgments.relevant_count(query);
    if r == 0 {
        return None;
    }
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (i, id) in ranked.iter().enumerate() {
        if judgments.is_relevant(query, id.as_ref()) {
            hits += 1;
            sum += hits as f64 / (i + 1) as f64;
        }
    }
    Some(sum / r as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub per_query_ap: BTreeMap<String, f64>,
    pub map: f64,
    pub n_queries: usize,
    /// Run queries without any relevant judgment.
    pub unevaluable: Vec<String>,
    /// Judged queries absent from the run (scored 0).
    pub missing_from_run: Vec<String>,
}

/// MAP over every query with at least one relevant judgment, whether or not the run has it.
pub fn mean_average_precision(run: &Run, judgments: &Judgments) -> Result<EvalReport> {
    let mut per_query_ap = BTreeMap::new();
    let mut missing_from_run = Vec::new();
    for q in judgments.query_ids() {
        let empty: Vec<String> = Vec::new();
        let ranked = match run.get(q) {
            Some(r) => r,
            None => {
                if judgments.relevant_count(q) > 0 {
                    missing_from_run.push(q.to_owned());
                }
                &empty
            }
        };
        if let Some(ap) = average_precision(q, ranked, judgments) {
            per_query_ap.insert(q.to_owned(), ap);
        }
    }
    let unevaluable: Vec<String> = run
        .keys()
        .filter(|q| !per_query_ap.contains_key(*q))
        .cloned()
        .collect();
    if per_query_ap.is_empty() {
        return Err(Error::Insufficient("no query has a relevant judgment".into()));
    }
    let n = per_query_ap.len();
    let map = per_query_ap.values().sum::<f64>() / n as f64;
    Ok(EvalReport {
        per_query_ap,
        map,
        n_queries: n,
        unevaluable,
        missing_from_run,
    })
}

/// Seeded shuffle split: the first `ceil(n/2)` ids form the dev half. Both halves come back
/// sorted.
pub fn split_dev_test(query_ids: &[String], seed: u64) -> Result<(Vec<String>, Vec<String>)> {
    if query_ids.len() < 2 {
        return Err(Error::Insufficient(format!(
            "need at least 2 queries to split, got {}",
            query_ids.len()
        )));
    }
    let mut ids = query_ids.to_vec();
    ids.sort();
    ids.dedup();
    if ids.len() != query_ids.len() {
        return Err(Error::DuplicateId("query id listed twice".into()));
    }
    ids.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let test = ids.split_off(ids.len().div_ceil(2));
    let mut dev = ids;
    dev.sort();
    let mut test = test;
    test.sort();
    Ok((dev, test))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TTest {
    pub t: f64,
    pub p: f64,
    pub significant_at_95: bool,
    pub n: usize,
    pub mean_difference: f64,
}

/// Two-sided paired t-test of `a - b`.
pub fn paired_t_test(a: &[f64], b: &[f64]) -> Result<TTest> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            found: b.len(),
        });
    }
    let n = a.len();
    if n < 2 {
        return Err(Error::Insufficient(format!("paired t-test needs at least 2 pairs, got {n}")));
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let mean = d.iter().sum::<f64>() / n as f64;
    let var = d.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let df = (n - 1) as f64;
    let (t, p) = if var == 0.0 {
        if mean == 0.0 {
            (0.0, 1.0)
        } else {
            (mean.signum() * f64::INFINITY, 0.0)
        }
    } else {
        let t = mean / (var.sqrt() / (n as f64).sqrt());
        let p = statrs::function::beta::beta_reg(df / 2.0, 0.5, df / (df + t * t));
        (t, p.clamp(0.0, 1.0))
    };
    Ok(TTest {
        t,
        p,
        significant_at_95: p < 0.05,
        n,
        mean_difference: mean,
    })
}

/// Per-query table, MAP summary and (with two or more runs) the pairwise significance matrix.
/// Pairs are compared on the queries each report evaluated.
pub fn format_eval_report(named: &[(String, EvalReport)]) -> Result<String> {
    let mut out = String::new();
    let queries: BTreeSet<&String> = named.iter().flat_map(|(_, r)| r.per_query_ap.keys()).collect();
    out.push_str("query");
    for (name, _) in named {
        out.push('\t');
        out.push_str(name);
    }
    out.push('\n');
    for q in &queries {
        out.push_str(q);
        for (_, r) in named {
            match r.per_query_ap.get(*q) {
                Some(ap) => out.push_str(&format!("\t{ap:.6}")),
                None => out.push_str("\t-"),
            }
        }
        out.push('\n');
    }
    out.push_str("\n# summary\nrun\tMAP\tn\n");
    for (name, r) in named {
        out.push_str(&format!("{name}\t{:.6}\t{}\n", r.map, r.n_queries));
    }
    if named.len() >= 2 {
        out.push_str("\n# paired t-test p-values (row vs column, * = significant at 95%)\nrun");
        for (name, _) in named {
            out.push('\t');
            out.push_str(name);
        }
        out.push('\n');
        for (na, ra) in named {
            out.push_str(na);
            for (_, rb) in named {
                let common: Vec<&String> = ra.per_query_ap.keys().filter(|q| rb.per_query_ap.contains_key(*q)).collect();
                let a: Vec<f64> = common.iter().map(|q| ra.per_query_ap[*q]).collect();
                let b: Vec<f64> = common.iter().map(|q| rb.per_query_ap[*q]).collect();
                match paired_t_test(&a, &b) {
                    Ok(t) => out.push_str(&format!("\t{:.4}{}", t.p, if t.significant_at_95 { "*" } else { "" })),
                    Err(_) => out.push_str("\t-"),
                }
            }
            out.push('\n');
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use statrs::distribution::{ContinuousCDF, StudentsT};

    fn judgments(pairs: &[(&str, &str, u8)]) -> Judgments {
        let mut j = Judgments::new();
        for (q, d, l) in pairs {
            j.insert(q, d, *l).unwrap();
        }
        j
    }

    fn ids(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn ap_examples() {
        let j = judgments(&[("q", "a", 1), ("q", "b", 1), ("q", "x", 0)]);
        assert_eq!(average_precision("q", &["a", "b", "x"], &j), Some(1.0));
        assert_relative_eq!(average_precision("q", &["a", "x", "b"], &j).unwrap(), (1.0 + 2.0 / 3.0) / 2.0);
        let j1 = judgments(&[("q", "a", 1)]);
        assert_eq!(average_precision("q", &["x", "y"], &j1), Some(0.0));
        assert_eq!(average_precision("other", &["x"], &j1), None);
    }

    #[test]
    fn map_examples() {
        let j = judgments(&[("q1", "a", 1), ("q2", "a", 1), ("q2", "b", 1), ("q3", "z", 0)]);
        let run: Run = [
            ("q1".to_string(), ids(&["a"])),
            ("q2".to_string(), ids(&["a", "x", "b"])),
            ("q3".to_string(), ids(&["z"])),
        ]
        .into_iter()
        .collect();
        let r = mean_average_precision(&run, &j).unwrap();
        assert_eq!(r.n_queries, 2);
        assert_relative_eq!(r.map, (1.0 + (1.0 + 2.0 / 3.0) / 2.0) / 2.0);
        assert_eq!(r.unevaluable, ["q3"]);

        let j = judgments(&[("q1", "a", 1), ("q1", "b", 1), ("q1", "c", 1), ("q1", "d", 1), ("q1", "e", 1)]);
        let run: Run = [("q1".to_string(), ids(&["a", "x", "b", "c", "d"]))].into_iter().collect();
        let r = mean_average_precision(&run, &j).unwrap();
        assert_relative_eq!(r.map, (1.0 + 2.0 / 3.0 + 3.0 / 4.0 + 4.0 / 5.0) / 5.0);
        assert!(mean_average_precision(&run, &judgments(&[("q1", "a", 0)])).is_err());
    }

    #[test]
    fn missing_queries_score_zero() {
        let j = judgments(&[("q1", "a", 1), ("q2", "b", 1)]);
        let run: Run = [("q1".to_string(), ids(&["a"]))].into_iter().collect();
        let r = mean_average_precision(&run, &j).unwrap();
        assert_eq!(r.missing_from_run, ["q2"]);
        assert_eq!(r.map, 0.5);
    }

    #[test]
    fn qrels_parsing() {
        let j = read_qrels("q1 0 a 1\n\nq1 0 b 0\n".as_bytes(), "m").unwrap();
        assert_eq!(j.len(), 2);
        assert!(matches!(read_qrels("q1 0 a 2\n".as_bytes(), "m"), Err(Error::Malformed { line: 1, .. })));
        assert!(matches!(read_qrels("q1 0 a 1\nq1 0 a 0\n".as_bytes(), "m"), Err(Error::Malformed { line: 2, .. })));
        let mut buf = Vec::new();
        j.write(&mut buf).unwrap();
        assert_eq!(read_qrels(buf.as_slice(), "m").unwrap(), j);
    }

    #[test]
    fn run_parsing_orders_by_rank() {
        let run = read_run("q Q0 b 2 0.5 t\nq Q0 a 1 0.9 t\n".as_bytes(), "r").unwrap();
        assert_eq!(run["q"], ["a", "b"]);
        assert!(read_run("q Q0 a 1 0.9 t\nq Q0 a 2 0.5 t\n".as_bytes(), "r").is_err());
        assert!(read_run("q Q0 a one 0.9 t\n".as_bytes(), "r").is_err());
    }

    #[test]
    fn split_rules() {
        let q: Vec<String> = (0..11).map(|i| format!("q{i}")).collect();
        let (dev, test) = split_dev_test(&q, 7).unwrap();
        assert_eq!((dev.len(), test.len()), (6, 5));
        assert_eq!(split_dev_test(&q, 7).unwrap(), (dev.clone(), test.clone()));
        let all: BTreeSet<&String> = dev.iter().chain(&test).collect();
        assert_eq!(all.len(), 11);
        let (d, t) = split_dev_test(&q[..10], 1).unwrap();
        assert_eq!((d.len(), t.len()), (5, 5));
        assert!(split_dev_test(&q[..1], 1).is_err());
    }

    #[test]
    fn t_test_examples() {
        let a = [1.0, 2.0, 3.0, 4.0, 5.0];
        let b = [0.0; 5];
        let t = paired_t_test(&a, &b).unwrap();
        assert_relative_eq!(t.t, 3.0 / (1.5811388300841898 / 5f64.sqrt()), epsilon = 1e-12);
        assert!((t.t - 4.2426).abs() < 1e-4);
        assert!((t.p - 0.0132).abs() < 1e-3, "{}", t.p);
        assert!(t.significant_at_95);

        let same = paired_t_test(&a, &a).unwrap();
        assert_eq!((same.t, same.p, same.significant_at_95), (0.0, 1.0, false));
        let shifted = paired_t_test(&[1.0, 2.0], &[0.5, 1.5]).unwrap();
        assert_eq!((shifted.t, shifted.p), (f64::INFINITY, 0.0));
        assert!(paired_t_test(&a, &b[..4]).is_err());
    }

    #[test]
    fn report_layout() {
        let j = judgments(&[("q1", "a", 1), ("q2", "a", 1)]);
        let run: Run = [("q1".to_string(), ids(&["a"])), ("q2".to_string(), ids(&["x", "a"]))].into_iter().collect();
        let r = mean_average_precision(&run, &j).unwrap();
        let single = format_eval_report(&[("lmir".into(), r.clone())]).unwrap();
        assert!(!single.contains("t-test"));
        let both = format_eval_report(&[("a".into(), r.clone()), ("b".into(), r)]).unwrap();
        assert!(both.contains("a\t1.0000\t1.0000"));
    }

    proptest! {
        #[test]
        fn t_statistic_is_antisymmetric(a in prop::collection::vec(0.0f64..1.0, 2..20), seed in 0u64..1000) {
            let b: Vec<f64> = a.iter().enumerate().map(|(i, x)| (x * 7.0 + i as f64 * 0.37 + seed as f64 * 0.01).fract()).collect();
            let ab = paired_t_test(&a, &b).unwrap();
            let ba = paired_t_test(&b, &a).unwrap();
            prop_assert_eq!(ab.t, -ba.t);
            prop_assert_eq!(ab.p, ba.p);
            if ab.t.is_finite() && ab.t != 0.0 {
                let dist = StudentsT::new(0.0, 1.0, (a.len() - 1) as f64).unwrap();
                let p = 2.0 * (1.0 - dist.cdf(ab.t.abs()));
                prop_assert!((p - ab.p).abs() < 1e-8, "{} vs {}", p, ab.p);
            }
        }

        #[test]
        fn ap_order_properties(rel in prop::collection::vec(any::<bool>(), 1..15), swap in 0usize..14) {
            let ranked: Vec<String> = (0..rel.len()).map(|i| format!("d{i}")).collect();
            let mut j = Judgments::new();
            for (i, &r) in rel.iter().enumerate() {
                j.insert("q", &ranked[i], r as u8).unwrap();
            }
            j.insert("q", "never", 1).unwrap();
            let base = average_precision("q", &ranked, &j).unwrap();
            prop_assert!((0.0..=1.0).contains(&base));
            // moving a relevant item up one rank never lowers AP
            if swap + 1 < rel.len() && rel[swap + 1] && !rel[swap] {
                let mut up = ranked.clone();
                up.swap(swap, swap + 1);
                prop_assert!(average_precision("q", &up, &j).unwrap() >= base);
            }
            // reordering non-relevant items after the last relevant one changes nothing
            if let Some(last) = rel.iter().rposition(|&r| r) {
                let mut tail = ranked.clone();
                tail[last + 1..].reverse();
                prop_assert_eq!(average_precision("q", &tail, &j).unwrap(), base);
            }
        }

        #[test]
        fn all_retrieved_relevant_gives_map_one(n in 1usize..10, m in 1usize..5) {
            let mut run = Run::new();
            let mut j = Judgments::new();
            for q in 0..m {
                let list: Vec<String> = (0..n).map(|i| format!("d{i}")).collect();
                for d in &list {
                    j.insert(&format!("q{q}"), d, 1).unwrap();
                }
                run.insert(format!("q{q}"), list);
            }
            prop_assert_eq!(mean_average_precision(&run, &j).unwrap().map, 1.0);
        }
    }
}
