use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use cqa_core::pipeline::{Method, PipelineParams, PARAM_NAMES};
use cqa_core::{Error, FieldConfig, SynthSpec};

const PATH_KEYS: &[&str] = &["corpus", "index", "queries", "embeddings", "ctx_store", "qrels", "out", "diag"];
const OTHER_KEYS: &[&str] = &["method", "seed", "workers", "body", "answers", "stem", "stopwords"];
const SYNTH_PREFIX: &str = "synth.";

/// Parses `key = value` lines; `#` starts a comment. Keys may appear once.
pub fn read_config_file(path: &Path) -> Result<BTreeMap<String, String>, Error> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    parse_config(&text, &path.display().to_string())
}

pub fn parse_config(text: &str, name: &str) -> Result<BTreeMap<String, String>, Error> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(Error::Config(format!("{name}:{}: expected key = value", i + 1)));
        };
        let key = k.trim().replace('-', "_");
        if !known_key(&key) {
            return Err(Error::Config(format!("{name}:{}: unknown key `{key}`", i + 1)));
        }
        if out.insert(key.clone(), v.trim().to_owned()).is_some() {
            return Err(Error::Config(format!("{name}:{}: key `{key}` given twice", i + 1)));
        }
    }
    Ok(out)
}

fn known_key(key: &str) -> bool {
    PATH_KEYS.contains(&key)
        || OTHER_KEYS.contains(&key)
        || PARAM_NAMES.contains(&key)
        || key.strip_prefix(SYNTH_PREFIX).is_some_and(|k| SynthSpec::default().set(k, "1").is_ok())
}

fn parse_bool(key: &str, v: &str) -> Result<bool, Error> {
    match v.trim() {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(Error::Config(format!("{key}: expected true or false, got `{v}`"))),
    }
}

/// Fully resolved settings: config-file values overridden by flags.
#[derive(Debug, Clone)]
pub struct Settings {
    pub paths: BTreeMap<&'static str, PathBuf>,
    pub method: Option<Method>,
    pub seed: u64,
    pub workers: usize,
    pub fields: FieldConfig,
    pub params: PipelineParams<f64>,
    pub synth: SynthSpec,
}

impl Settings {
    /// `entries` are applied in order, so later ones (flags) win over earlier ones (file).
    pub fn resolve(entries: &[(String, String)]) -> Result<Self, Error> {
        let mut s = Settings {
            paths: BTreeMap::new(),
            method: None,
            seed: 0,
            workers: std::thread::available_parallelism().map_or(1, |n| n.get()),
            fields: FieldConfig::default(),
            params: PipelineParams::default(),
            synth: SynthSpec::default(),
        };
        let mut synth_seed_set = false;
        for (key, value) in entries {
            let key = key.replace('-', "_");
            if let Some(k) = PATH_KEYS.iter().find(|k| **k == key) {
                s.paths.insert(k, PathBuf::from(value));
                continue;
            }
            if let Some(k) = key.strip_prefix(SYNTH_PREFIX) {
                s.synth.set(k, value)?;
                synth_seed_set |= k == "seed";
                continue;
            }
            match key.as_str() {
                "method" => s.method = Some(value.parse()?),
                "seed" => {
                    s.seed = value
                        .trim()
                        .parse()
                        .map_err(|_| Error::Config(format!("seed: expected an integer, got `{value}`")))?
                }
                "workers" => {
                    s.workers = value
                        .trim()
                        .parse()
                        .ok()
                        .filter(|&n| n > 0)
                        .ok_or_else(|| Error::Config(format!("workers: expected a positive count, got `{value}`")))?
                }
                "body" => s.fields.body = parse_bool(&key, value)?,
                "answers" => s.fields.answers = parse_bool(&key, value)?,
                "stem" => s.fields.tokenizer.stem = parse_bool(&key, value)?,
                "stopwords" => s.fields.tokenizer.remove_stopwords = parse_bool(&key, value)?,
                _ => s.params.set(&key, value)?,
            }
        }
        if !synth_seed_set && entries.iter().any(|(k, _)| k == "seed") {
            s.synth.seed = s.seed;
        }
        s.params.validate()?;
        Ok(s)
    }

    pub fn path(&self, key: &str) -> Option<&Path> {
        self.paths.get(key).map(PathBuf::as_path)
    }

    pub fn require_path(&self, key: &str) -> Result<&Path, Error> {
        self.path(key)
            .ok_or_else(|| Error::Config(format!("missing --{}", key.replace('_', "-"))))
    }

    pub fn require_method(&self) -> Result<Method, Error> {
        self.method.ok_or_else(|| Error::Config("missing --method".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file() {
        let file = parse_config("# experiment\nmu = 500\nmethod = lmir\nworkers=2\nsynth.vocab_size = 100\n", "cfg").unwrap();
        let mut entries: Vec<(String, String)> = file.into_iter().collect();
        entries.push(("mu".into(), "50".into()));
        let s = Settings::resolve(&entries).unwrap();
        assert_eq!(s.params.scoring.mu, 50.0);
        assert_eq!(s.workers, 2);
        assert_eq!(s.method.unwrap().to_string(), "lmir");
        assert_eq!(s.synth.vocab_size, 100);
    }

    #[test]
    fn bad_config_lines() {
        assert!(parse_config("mu 5\n", "c").is_err());
        assert!(parse_config("bogus = 5\n", "c").is_err());
        assert!(parse_config("mu = 5\nmu = 6\n", "c").is_err());
        assert!(Settings::resolve(&[("alpha_prf".into(), "0.9".into())]).is_err());
    }

    #[test]
    fn seed_reaches_synth() {
        let s = Settings::resolve(&[("seed".into(), "42".into())]).unwrap();
        assert_eq!(s.synth.seed, 42);
    }
}
