//! Question collection: ingestion, tokenization, postings and collection statistics.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::num::Real;

const STOPWORDS: &[&str] = &[
    "a", "about", "an", "and", "are", "as", "at", "be", "but", "by", "can", "do", "does", "for",
    "from", "had", "has", "have", "how", "i", "if", "in", "into", "is", "it", "its", "me", "my",
    "of", "on", "or", "so", "that", "the", "their", "them", "there", "these", "they", "this", "to",
    "was", "we", "what", "when", "where", "which", "who", "why", "will", "with", "you", "your",
];

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenizerConfig {
    pub remove_stopwords: bool,
    pub stem: bool,
}

/// Lowercases, replaces every non-alphanumeric character with a space and splits on whitespace.
pub fn tokenize(text: &str) -> Vec<String> {
    tokenize_with(text, &TokenizerConfig::default())
}

pub fn tokenize_with(text: &str, config: &TokenizerConfig) -> Vec<String> {
    let cleaned: String = text
        .chars()
        .flat_map(char::to_lowercase)
        .map(|c| if c.is_alphanumeric() { c } else { ' ' })
        .collect();
    let stemmer = config
        .stem
        .then(|| rust_stemmers::Stemmer::create(rust_stemmers::Algorithm::English));
    cleaned
        .split_whitespace()
        .filter(|t| !(config.remove_stopwords && STOPWORDS.binary_search(t).is_ok()))
        .map(|t| match &stemmer {
            Some(s) => s.stem(t).into_owned(),
            None => t.to_owned(),
        })
        .collect()
}

/// Which raw fields of a record make up the indexed token stream. The title is always included.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldConfig {
    pub body: bool,
    pub answers: bool,
    pub tokenizer: TokenizerConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Question {
    pub id: String,
    pub title: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub body: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub answers: Vec<String>,
    #[serde(default)]
    pub tokens: Vec<String>,
}

impl Question {
    /// Builds a question whose tokens come from the title alone.
    pub fn from_title(id: impl Into<String>, title: impl Into<String>) -> Self {
        let title = title.into();
        let tokens = tokenize(&title);
        Question {
            id: id.into(),
            title,
            body: None,
            answers: Vec::new(),
            tokens,
        }
    }

    /// Builds a question directly from pre-tokenized terms.
    pub fn from_tokens<S: AsRef<str>>(id: impl Into<String>, tokens: &[S]) -> Self {
        let tokens: Vec<String> = tokens.iter().map(|t| t.as_ref().to_owned()).collect();
        Question {
            id: id.into(),
            title: tokens.join(" "),
            body: None,
            answers: Vec::new(),
            tokens,
        }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Term counts in first-occurrence order.
    pub fn term_counts(&self) -> Vec<(&str, usize)> {
        let mut out: Vec<(&str, usize)> = Vec::new();
        let mut pos: HashMap<&str, usize> = HashMap::new();
        for t in &self.tokens {
            match pos.get(t.as_str()) {
                Some(&i) => out[i].1 += 1,
                None => {
                    pos.insert(t, out.len());
                    out.push((t, 1));
                }
            }
        }
        out
    }

    pub fn count(&self, term: &str) -> usize {
        self.tokens.iter().filter(|t| *t == term).count()
    }

    fn tokenize_fields(&mut self, fields: &FieldConfig) {
        let mut tokens = tokenize_with(&self.title, &fields.tokenizer);
        if fields.body {
            if let Some(body) = &self.body {
                tokens.extend(tokenize_with(body, &fields.tokenizer));
            }
        }
        if fields.answers {
            for a in &self.answers {
                tokens.extend(tokenize_with(a, &fields.tokenizer));
            }
        }
        self.tokens = tokens;
    }
}

#[derive(Debug, Deserialize)]
struct Record {
    id: String,
    title: String,
    #[serde(default)]
    body: Option<String>,
    #[serde(default)]
    answers: Option<Vec<String>>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct IngestReport {
    pub accepted: usize,
    pub skipped_empty: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Posting {
    pub doc: usize,
    pub count: u32,
}

#[derive(Debug, Clone, Default)]
pub struct CollectionStats {
    pub total_tokens: u64,
    pub doc_count: usize,
    pub collection_count: HashMap<String, u64>,
    pub doc_freq: HashMap<String, u64>,
}

impl CollectionStats {
    pub fn collection_count(&self, term: &str) -> u64 {
        self.collection_count.get(term).copied().unwrap_or(0)
    }

    pub fn doc_freq(&self, term: &str) -> u64 {
        self.doc_freq.get(term).copied().unwrap_or(0)
    }

    /// Background probability p(w|C); zero for terms never seen in the collection.
    pub fn p_collection<F: Real>(&self, term: &str) -> F {
        if self.total_tokens == 0 {
            return F::zero();
        }
        F::of(self.collection_count(term) as f64) / F::of(self.total_tokens as f64)
    }

    pub fn avg_len<F: Real>(&self) -> F {
        if self.doc_count == 0 {
            return F::zero();
        }
        F::of(self.total_tokens as f64) / F::of_count(self.doc_count)
    }

    pub fn vocab_size(&self) -> usize {
        self.collection_count.len()
    }
}

/// `ln((N + 1) / (df + 0.5))`; unseen terms use `df = 0`.
pub fn idf<F: Real>(term: &str, stats: &CollectionStats) -> F {
    let n = F::of_count(stats.doc_count);
    let df = F::of(stats.doc_freq(term) as f64);
    ((n + F::one()) / (df + F::of(0.5))).ln()
}

/// Immutable, id-sorted question collection with an inverted index.
#[derive(Debug, Clone)]
pub struct Corpus {
    questions: Vec<Question>,
    by_id: HashMap<String, usize>,
    postings: HashMap<String, Vec<Posting>>,
    stats: CollectionStats,
}

impl Corpus {
    /// Indexes already tokenized questions. Order of `questions` does not matter.
    pub fn from_questions(mut questions: Vec<Question>) -> Result<Self> {
        questions.sort_by(|a, b| a.id.cmp(&b.id));
        if let Some(w) = questions.windows(2).find(|w| w[0].id == w[1].id) {
            return Err(Error::DuplicateId(w[0].id.clone()));
        }
        if let Some(q) = questions.iter().find(|q| q.tokens.is_empty()) {
            return Err(Error::EmptyQuestion(q.id.clone()));
        }

        let mut by_id = HashMap::with_capacity(questions.len());
        let mut postings: HashMap<String, Vec<Posting>> = HashMap::new();
        let mut stats = CollectionStats {
            doc_count: questions.len(),
            ..Default::default()
        };
        for (doc, q) in questions.iter().enumerate() {
            by_id.insert(q.id.clone(), doc);
            stats.total_tokens += q.tokens.len() as u64;
            for (term, count) in q.term_counts() {
                postings.entry(term.to_owned()).or_default().push(Posting {
                    doc,
                    count: count as u32,
                });
                *stats.collection_count.entry(term.to_owned()).or_default() += count as u64;
                *stats.doc_freq.entry(term.to_owned()).or_default() += 1;
            }
        }
        Ok(Corpus {
            questions,
            by_id,
            postings,
            stats,
        })
    }

    pub fn questions(&self) -> &[Question] {
        &self.questions
    }

    pub fn len(&self) -> usize {
        self.questions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.questions.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&Question> {
        self.by_id.get(id).map(|&i| &self.questions[i])
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.by_id.get(id).copied()
    }

    pub fn stats(&self) -> &CollectionStats {
        &self.stats
    }

    pub fn postings(&self, term: &str) -> &[Posting] {
        self.postings.get(term).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Indexed vocabulary in lexicographic order.
    pub fn vocabulary(&self) -> Vec<&str> {
        let mut v: Vec<&str> = self.postings.keys().map(String::as_str).collect();
        v.sort_unstable();
        v
    }

    pub fn contains_term(&self, term: &str) -> bool {
        self.postings.contains_key(term)
    }

    pub fn has_answers(&self) -> bool {
        self.questions.iter().any(|q| !q.answers.is_empty())
    }

    /// Writes the tokenized questions, collection statistics and postings into `dir`.
    pub fn write_index(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;

        let path = dir.join("questions.jsonl");
        let mut w = create(&path)?;
        for q in &self.questions {
            let line = serde_json::to_string(q).expect("question serializes");
            writeln!(w, "{line}").map_err(|e| Error::io(&path, e))?;
        }
        w.flush().map_err(|e| Error::io(&path, e))?;

        let vocab = self.vocabulary();
        let path = dir.join("stats.tsv");
        let mut w = create(&path)?;
        let write_stats = |w: &mut BufWriter<File>| -> std::io::Result<()> {
            writeln!(w, "#doc_count\t{}", self.stats.doc_count)?;
            writeln!(w, "#total_tokens\t{}", self.stats.total_tokens)?;
            writeln!(w, "#term\tcollection_count\tdoc_freq")?;
            for t in &vocab {
                writeln!(
                    w,
                    "{t}\t{}\t{}",
                    self.stats.collection_count(t),
                    self.stats.doc_freq(t)
                )?;
            }
            w.flush()
        };
        write_stats(&mut w).map_err(|e| Error::io(&path, e))?;

        let path = dir.join("postings.tsv");
        let mut w = create(&path)?;
        let write_postings = |w: &mut BufWriter<File>| -> std::io::Result<()> {
            for t in &vocab {
                write!(w, "{t}")?;
                for p in self.postings(t) {
                    write!(w, "\t{}:{}", self.questions[p.doc].id, p.count)?;
                }
                writeln!(w)?;
            }
            w.flush()
        };
        write_postings(&mut w).map_err(|e| Error::io(&path, e))?;
        Ok(())
    }

    /// Rebuilds a corpus from the `questions.jsonl` written by [`Corpus::write_index`].
    pub fn read_index(dir: &Path) -> Result<Self> {
        let path = dir.join("questions.jsonl");
        let reader = BufReader::new(File::open(&path).map_err(|e| Error::io(&path, e))?);
        let name = path.display().to_string();
        let mut questions = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| Error::io(&path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let q: Question = serde_json::from_str(&line)
                .map_err(|e| Error::malformed(&name, i + 1, e.to_string()))?;
            questions.push(q);
        }
        Corpus::from_questions(questions)
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).map_err(|e| Error::io(path, e))?,
    ))
}

/// Parses newline-delimited question records. Records that tokenize to nothing are skipped
/// and counted in the report.
pub fn read_questions<R: BufRead>(
    reader: R,
    source_name: &str,
    fields: &FieldConfig,
) -> Result<(Vec<Question>, IngestReport)> {
    let mut report = IngestReport::default();
    let mut seen: BTreeMap<String, usize> = BTreeMap::new();
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|e| Error::malformed(source_name, lineno, e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: Record = serde_json::from_str(&line)
            .map_err(|e| Error::malformed(source_name, lineno, e.to_string()))?;
        if seen.insert(rec.id.clone(), lineno).is_some() {
            return Err(Error::DuplicateId(rec.id));
        }
        let mut q = Question {
            id: rec.id,
            title: rec.title,
            body: rec.body,
            answers: rec.answers.unwrap_or_default(),
            tokens: Vec::new(),
        };
        q.tokenize_fields(fields);
        if q.tokens.is_empty() {
            report.skipped_empty += 1;
            log::warn!("{source_name}:{lineno}: question `{}` has no tokens, skipped", q.id);
            continue;
        }
        report.accepted += 1;
        out.push(q);
    }
    Ok((out, report))
}

pub fn read_questions_file(path: &Path, fields: &FieldConfig) -> Result<(Vec<Question>, IngestReport)> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_questions(BufReader::new(file), &path.display().to_string(), fields)
}

/// Reads and indexes a corpus file.
pub fn ingest_corpus(path: &Path, fields: &FieldConfig) -> Result<(Corpus, IngestReport)> {
    let (questions, report) = read_questions_file(path, fields)?;
    Ok((Corpus::from_questions(questions)?, report))
}

/// Serializes questions as corpus records (id, title, optional body and answers).
pub fn write_questions<W: Write>(mut w: W, questions: &[Question]) -> std::io::Result<()> {
    #[derive(Serialize)]
    struct Out<'a> {
        id: &'a str,
        title: &'a str,
        #[serde(skip_serializing_if = "Option::is_none")]
        body: Option<&'a str>,
        #[serde(skip_serializing_if = "<[String]>::is_empty")]
        answers: &'a [String],
    }
    for q in questions {
        let rec = Out {
            id: &q.id,
            title: &q.title,
            body: q.body.as_deref(),
            answers: &q.answers,
        };
        writeln!(w, "{}", serde_json::to_string(&rec).expect("record serializes"))?;
    }
    w.flush()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn parse(text: &str) -> Result<(Vec<Question>, IngestReport)> {
        read_questions(text.as_bytes(), "mem", &FieldConfig::default())
    }

    #[test]
    fn stopword_list_is_sorted() {
        assert!(STOPWORDS.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn tokenize_examples() {
        assert_eq!(
            tokenize("How do i fix my camcord ?"),
            ["how", "do", "i", "fix", "my", "camcord"]
        );
        assert!(tokenize("").is_empty());
        assert_eq!(tokenize("A a A."), ["a", "a", "a"]);
    }

    #[test]
    fn tokenize_options() {
        let cfg = TokenizerConfig {
            remove_stopwords: true,
            stem: false,
        };
        assert_eq!(tokenize_with("How do I fix my camcord?", &cfg), ["fix", "camcord"]);
        let cfg = TokenizerConfig {
            remove_stopwords: false,
            stem: true,
        };
        assert_eq!(tokenize_with("playing plays", &cfg), ["play", "play"]);
    }

    #[test]
    fn ingest_counts_and_skips() {
        let text = r#"{"id":"1","title":"a b"}
{"id":"2","title":"b c","body":"ignored by default"}
{"id":"3","title":"  ?? "}
{"id":"4","title":"d"}
"#;
        let (qs, report) = parse(text).unwrap();
        assert_eq!(report, IngestReport { accepted: 3, skipped_empty: 1 });
        let corpus = Corpus::from_questions(qs).unwrap();
        assert_eq!(corpus.stats().doc_count, 3);
    }

    #[test]
    fn collection_counts_by_hand() {
        let corpus = Corpus::from_questions(vec![
            Question::from_title("x", "a b"),
            Question::from_title("y", "b c"),
        ])
        .unwrap();
        let s = corpus.stats();
        assert_eq!(s.collection_count("a"), 1);
        assert_eq!(s.collection_count("b"), 2);
        assert_eq!(s.collection_count("c"), 1);
        assert_eq!(s.total_tokens, 4);
        assert_eq!(s.p_collection::<f64>("b"), 0.5);
    }

    #[test]
    fn malformed_line_is_named() {
        let text = "{\"id\":\"1\",\"title\":\"a\"}\n{not json}\n";
        match parse(text) {
            Err(Error::Malformed { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
        // missing required title
        assert!(matches!(parse("{\"id\":\"1\"}"), Err(Error::Malformed { line: 1, .. })));
    }

    #[test]
    fn duplicate_id_is_named() {
        let text = "{\"id\":\"q7\",\"title\":\"a\"}\n{\"id\":\"q7\",\"title\":\"b\"}\n";
        match parse(text) {
            Err(Error::DuplicateId(id)) => assert_eq!(id, "q7"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn body_and_answers_behind_flags() {
        let text = r#"{"id":"1","title":"a","body":"b","answers":["c d"]}"#;
        let fields = FieldConfig {
            body: true,
            answers: true,
            ..Default::default()
        };
        let (qs, _) = read_questions(text.as_bytes(), "mem", &fields).unwrap();
        assert_eq!(qs[0].tokens, ["a", "b", "c", "d"]);
        let (qs, _) = parse(text).unwrap();
        assert_eq!(qs[0].tokens, ["a"]);
        assert_eq!(qs[0].answers, ["c d"]);
    }

    #[test]
    fn idf_examples() {
        let mut stats = CollectionStats {
            doc_count: 9,
            ..Default::default()
        };
        stats.doc_freq.insert("t".into(), 9);
        stats.doc_freq.insert("u".into(), 9);
        assert_relative_eq!(idf::<f64>("t", &stats), (10.0f64 / 9.5).ln(), epsilon = 1e-15);
        assert_relative_eq!(idf::<f64>("t", &stats), 0.0513, epsilon = 1e-4);
        assert_relative_eq!(idf::<f64>("unseen", &stats), 20f64.ln(), epsilon = 1e-15);
        assert_eq!(idf::<f64>("t", &stats), idf::<f64>("u", &stats));
    }

    #[test]
    fn index_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let corpus = Corpus::from_questions(vec![
            Question::from_title("b", "x y y"),
            Question::from_title("a", "y z"),
        ])
        .unwrap();
        corpus.write_index(dir.path()).unwrap();
        let back = Corpus::read_index(dir.path()).unwrap();
        assert_eq!(back.questions(), corpus.questions());
        let postings = std::fs::read_to_string(dir.path().join("postings.tsv")).unwrap();
        assert_eq!(postings, "x\tb:1\ny\ta:1\tb:2\nz\ta:1\n");
    }
}
