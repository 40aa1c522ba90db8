//! Application configuration: a TOML file, defaults for everything, and
//! `--section.key value` overrides from the command line.

use std::fs;
use std::path::{Path, PathBuf};

use bd_core::corpus::{Schema, DEFAULT_N_MAX};
use bd_core::curation::CurationConfig;
use bd_core::rag::{DEFAULT_MODEL_ID, DEFAULT_SAMPLE_CAP};
use bd_core::scatter::DEFAULT_DIM;
use bd_core::PerCommunity;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use toml::{Table, Value};

/// Config file consulted when neither `--config` nor `BD_CONFIG` is given.
pub const DEFAULT_CONFIG_FILE: &str = "bd.toml";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config file {path}: {source}")]
    Read { path: String, source: std::io::Error },
    #[error("config file {path}: {message}")]
    Parse { path: String, message: String },
    #[error("override --{key}: {message}")]
    Override { key: String, message: String },
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AppConfig {
    pub corpus_path: PathBuf,
    pub schema: Schema,
    /// Raw community labels for slots 1 and 2. Unset means order of first appearance.
    pub labels: Option<[String; 2]>,
    pub display_names: [String; 2],
    /// Tab-separated lexicon; unset uses the bundled one.
    pub lexicon_path: Option<PathBuf>,
    pub n_max: usize,
    pub curation: CurationConfig,
    pub rag: RagConfig,
    pub scatter: ScatterConfig,
    pub server: ServerConfig,
    pub paths: PathsConfig,
    pub paper: PaperConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RagConfig {
    pub cap: usize,
    pub model_id: String,
    pub seed: u64,
    pub parallelism: usize,
    /// Per-request timeout of the live backend, in seconds.
    pub timeout_secs: u64,
    pub prompt_budget: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScatterConfig {
    pub d: usize,
    pub eps: f64,
    pub min_pts: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServerConfig {
    pub bind: String,
    /// 0 picks a free port.
    pub port: u16,
    pub cors_origins: Vec<String>,
    /// Built UI assets served at `/`.
    pub static_dir: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsConfig {
    pub snapshot: PathBuf,
    pub cache: PathBuf,
    /// Prompt template file; unset uses the built-in templates.
    pub templates: Option<PathBuf>,
    pub curated: PathBuf,
    pub output_dir: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PaperConfig {
    pub title: String,
    /// Dataset name in the front matter; defaults to the corpus file name.
    pub dataset: Option<String>,
}

impl Default for AppConfig {
    fn default() -> Self {
        AppConfig {
            corpus_path: PathBuf::from("corpus.jsonl"),
            schema: Schema::default(),
            labels: None,
            display_names: ["Community 1".to_string(), "Community 2".to_string()],
            lexicon_path: None,
            n_max: DEFAULT_N_MAX,
            curation: CurationConfig::default(),
            rag: RagConfig::default(),
            scatter: ScatterConfig::default(),
            server: ServerConfig::default(),
            paths: PathsConfig::default(),
            paper: PaperConfig::default(),
        }
    }
}

impl Default for RagConfig {
    fn default() -> Self {
        RagConfig {
            cap: DEFAULT_SAMPLE_CAP,
            model_id: DEFAULT_MODEL_ID.to_string(),
            seed: 0,
            parallelism: 4,
            timeout_secs: 60,
            prompt_budget: bd_core::rag::DEFAULT_PROMPT_BUDGET,
        }
    }
}

impl Default for ScatterConfig {
    fn default() -> Self {
        let cluster = bd_core::scatter::ClusterParams::default();
        ScatterConfig { d: DEFAULT_DIM, eps: cluster.eps, min_pts: cluster.min_pts }
    }
}

impl Default for ServerConfig {
    fn default() -> Self {
        ServerConfig {
            bind: "127.0.0.1".to_string(),
            port: 8080,
            cors_origins: vec!["http://localhost:5173".to_string()],
            static_dir: None,
        }
    }
}

impl Default for PathsConfig {
    fn default() -> Self {
        PathsConfig {
            snapshot: PathBuf::from("data/index.bdx"),
            cache: PathBuf::from("data/cache"),
            templates: None,
            curated: PathBuf::from("data/curated.jsonl"),
            output_dir: PathBuf::from("out"),
        }
    }
}

impl Default for PaperConfig {
    fn default() -> Self {
        PaperConfig { title: "Bridging Dictionary".to_string(), dataset: None }
    }
}

impl AppConfig {
    /// Reads `path` (if given), applies overrides, resolves relative paths
    /// against the config file's directory (or `base` without a file) and
    /// validates the result.
    pub fn load(path: Option<&Path>, overrides: &[(String, String)], base: &Path) -> Result<AppConfig, ConfigError> {
        let mut table = match path {
            Some(p) => {
                let text = fs::read_to_string(p)
                    .map_err(|source| ConfigError::Read { path: p.display().to_string(), source })?;
                text.parse::<Table>().map_err(|e| ConfigError::Parse {
                    path: p.display().to_string(),
                    message: e.message().to_string(),
                })?
            }
            None => Table::new(),
        };
        let defaults = Value::try_from(AppConfig::default()).expect("defaults serialize");
        for (key, raw) in overrides {
            apply_override(&mut table, &defaults, key, raw)?;
        }
        let mut config: AppConfig =
            Value::Table(table).try_into().map_err(|e: toml::de::Error| ConfigError::Parse {
                path: path.map_or_else(|| "<overrides>".to_string(), |p| p.display().to_string()),
                message: e.message().to_string(),
            })?;
        let dir = path.and_then(Path::parent).map_or_else(|| base.to_path_buf(), |p| base.join(p));
        config.resolve_paths(&dir);
        config.validate()?;
        Ok(config)
    }

    fn resolve_paths(&mut self, dir: &Path) {
        let join = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = dir.join(&*p);
            }
        };
        join(&mut self.corpus_path);
        join(&mut self.paths.snapshot);
        join(&mut self.paths.cache);
        join(&mut self.paths.curated);
        join(&mut self.paths.output_dir);
        for p in [&mut self.lexicon_path, &mut self.paths.templates, &mut self.server.static_dir].into_iter().flatten()
        {
            join(p);
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |m: String| Err(ConfigError::Invalid(m));
        let [a, b] = &self.display_names;
        if a.trim().is_empty() || b.trim().is_empty() {
            return invalid("display names must be non-empty".into());
        }
        if a.trim().eq_ignore_ascii_case(b.trim()) {
            return invalid(format!("display names must differ (both {a:?})"));
        }
        if let Some([x, y]) = &self.labels {
            if x.is_empty() || y.is_empty() || x == y {
                return invalid(format!("labels must be two distinct non-empty values, got {x:?} and {y:?}"));
            }
        }
        if self.n_max < 1 {
            return invalid("n_max must be at least 1".into());
        }
        if self.curation.n_max > self.n_max {
            return invalid(format!("curation.n_max {} exceeds the index n_max {}", self.curation.n_max, self.n_max));
        }
        self.curation.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if self.rag.cap < 1 || self.rag.parallelism < 1 || self.rag.timeout_secs < 1 {
            return invalid("rag.cap, rag.parallelism and rag.timeout_secs must be at least 1".into());
        }
        if self.scatter.d < 1 {
            return invalid("scatter.d must be at least 1".into());
        }
        self.cluster_params().validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Ok(())
    }

    pub fn display_names(&self) -> PerCommunity<String> {
        PerCommunity(self.display_names.clone())
    }

    pub fn cluster_params(&self) -> bd_core::scatter::ClusterParams {
        bd_core::scatter::ClusterParams { eps: self.scatter.eps, min_pts: self.scatter.min_pts }
    }

    /// The settings that shape generated output, without any file locations,
    /// so the digest is the same wherever the repository is checked out.
    pub fn output_settings(&self) -> serde_json::Value {
        serde_json::json!({
            "schema": self.schema,
            "labels": self.labels,
            "display_names": self.display_names,
            "n_max": self.n_max,
            "curation": self.curation,
            "rag": { "cap": self.rag.cap, "model_id": self.rag.model_id, "seed": self.rag.seed,
                     "prompt_budget": self.rag.prompt_budget },
            "scatter": self.scatter,
        })
    }
}

/// Sets `key` (dotted) in `table`. The raw text is read as a TOML value
/// unless the default at that key is a string, which keeps `--rag.model_id 7`
/// a string.
fn apply_override(table: &mut Table, defaults: &Value, key: &str, raw: &str) -> Result<(), ConfigError> {
    let err = |message: String| ConfigError::Override { key: key.to_string(), message };
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(err("empty key segment".into()));
    }
    let default = parts.iter().try_fold(defaults, |v, p| v.get(p));
    let value = match default {
        Some(Value::String(_)) => Value::String(raw.to_string()),
        _ => format!("v = {raw}")
            .parse::<Table>()
            .ok()
            .and_then(|mut t| t.remove("v"))
            .unwrap_or_else(|| Value::String(raw.to_string())),
    };
    let (last, sections) = parts.split_last().expect("non-empty");
    let mut cursor = table;
    for section in sections {
        let entry = cursor.entry(section.to_string()).or_insert_with(|| Value::Table(Table::new()));
        cursor = entry.as_table_mut().ok_or_else(|| err(format!("{section} is not a section")))?;
    }
    cursor.insert(last.to_string(), value);
    Ok(())
}

/// Top-level keys that may be overridden without a dot.
const TOP_LEVEL_KEYS: [&str; 5] = ["corpus_path", "labels", "display_names", "lexicon_path", "n_max"];

/// Plain arguments and `(key, value)` overrides.
pub type SplitArgs = (Vec<String>, Vec<(String, String)>);

/// Splits config overrides (`--a.b value`, `--a.b=value`, `--n_max 2`) out of
/// the argument list, returning the remaining arguments and the overrides.
pub fn split_overrides<I: IntoIterator<Item = String>>(args: I) -> Result<SplitArgs, ConfigError> {
    let mut rest = Vec::new();
    let mut overrides = Vec::new();
    let mut args = args.into_iter();
    while let Some(arg) = args.next() {
        let Some(flag) = arg.strip_prefix("--") else {
            rest.push(arg);
            continue;
        };
        let (name, inline) = match flag.split_once('=') {
            Some((n, v)) => (n, Some(v.to_string())),
            None => (flag, None),
        };
        if !name.contains('.') && !TOP_LEVEL_KEYS.contains(&name) {
            rest.push(arg);
            continue;
        }
        let value = match inline {
            Some(v) => v,
            None => args
                .next()
                .ok_or_else(|| ConfigError::Override { key: name.to_string(), message: "missing value".to_string() })?,
        };
        overrides.push((name.to_string(), value));
    }
    Ok((rest, overrides))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn load_str(text: &str, overrides: &[(&str, &str)]) -> Result<AppConfig, ConfigError> {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bd.toml");
        fs::write(&path, text).unwrap();
        let overrides: Vec<(String, String)> = overrides.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect();
        AppConfig::load(Some(&path), &overrides, Path::new("/elsewhere"))
    }

    #[test]
    fn empty_file_gives_defaults_with_resolved_paths() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bd.toml");
        fs::write(&path, "").unwrap();
        let config = AppConfig::load(Some(&path), &[], Path::new("/elsewhere")).unwrap();
        assert_eq!(config.curation, CurationConfig::default());
        assert_eq!(config.corpus_path, dir.path().join("corpus.jsonl"));
        assert_eq!(config.paths.snapshot, dir.path().join("data/index.bdx"));
        assert_eq!(config.lexicon_path, None);
    }

    #[test]
    fn without_file_paths_resolve_against_base() {
        let config = AppConfig::load(None, &[], Path::new("/srv/bd")).unwrap();
        assert_eq!(config.corpus_path, Path::new("/srv/bd/corpus.jsonl"));
    }

    #[test]
    fn file_values_and_overrides() {
        let text =
            "display_names = [\"Left\", \"Right\"]\n[curation]\nfreq_z_threshold = 2.0\n[rag]\nmodel_id = \"m\"\n";
        let config = load_str(
            text,
            &[("curation.freq_z_threshold", "4.5"), ("rag.model_id", "7"), ("n_max", "2"), ("curation.n_max", "2")],
        )
        .unwrap();
        assert_eq!(config.display_names, ["Left".to_string(), "Right".to_string()]);
        assert_eq!(config.curation.freq_z_threshold, 4.5);
        assert_eq!(config.rag.model_id, "7");
        assert_eq!(config.n_max, 2);

        let config = load_str("", &[("labels", "[\"rep\", \"dem\"]"), ("paths.templates", "t.txt")]).unwrap();
        assert_eq!(config.labels, Some(["rep".to_string(), "dem".to_string()]));
        assert!(config.paths.templates.unwrap().ends_with("t.txt"));
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        assert!(matches!(load_str("colour = 1\n", &[]), Err(ConfigError::Parse { .. })));
        assert!(matches!(load_str("", &[("curation.nope", "1")]), Err(ConfigError::Parse { .. })));
        assert!(matches!(load_str("", &[("rag.cap", "many")]), Err(ConfigError::Parse { .. })));
        assert!(matches!(load_str("", &[("rag.cap.x", "1")]), Err(ConfigError::Parse { .. })));
        assert!(matches!(load_str("[rag]\ncap = 5\n", &[("rag.cap.x", "1")]), Err(ConfigError::Override { .. })));
        assert!(matches!(load_str("display_names = [\"A\", \"a\"]\n", &[]), Err(ConfigError::Invalid(_))));
        assert!(matches!(load_str("display_names = [\"A\"]\n", &[]), Err(ConfigError::Parse { .. })));
        assert!(matches!(load_str("", &[("curation.n_max", "4")]), Err(ConfigError::Invalid(_))));
        assert!(matches!(load_str("", &[("scatter.eps", "0")]), Err(ConfigError::Invalid(_))));
        assert!(matches!(load_str("[rag]\ncap = 0\n", &[]), Err(ConfigError::Invalid(_))));
    }

    #[test]
    fn split_overrides_examples() {
        let args = [
            "bd",
            "--config",
            "x.toml",
            "--rag.seed",
            "3",
            "query",
            "--curation.min_docs=5",
            "gun control",
            "--n_max",
            "2",
        ];
        let (rest, overrides) = split_overrides(args.iter().map(|s| s.to_string())).unwrap();
        assert_eq!(rest, ["bd", "--config", "x.toml", "query", "gun control"]);
        assert_eq!(
            overrides,
            [
                ("rag.seed".to_string(), "3".to_string()),
                ("curation.min_docs".to_string(), "5".to_string()),
                ("n_max".to_string(), "2".to_string())
            ]
        );
        assert!(split_overrides(["--rag.seed".to_string()]).is_err());
    }

    #[test]
    fn output_settings_ignore_locations() {
        let a = AppConfig::load(None, &[], Path::new("/a")).unwrap();
        let b = AppConfig::load(None, &[], Path::new("/b")).unwrap();
        assert_ne!(a, b);
        assert_eq!(a.output_settings(), b.output_settings());
    }
}
