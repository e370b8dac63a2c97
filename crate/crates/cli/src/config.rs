//! Pipeline configuration file.
//!
//! The config is a single TOML document. Relative paths are resolved against
//! the directory holding the config file. Any key can be overridden from the
//! command line with `--set dotted.key=value`.

use std::path::{Path, PathBuf};

use novelword::ctxsearch::SearchConfig;
use novelword::embed::HashedContextProvider;
use novelword::metrics::AccuracyMode;
use novelword::sets::{ApproachSpec, OccurrenceSchedule};
use novelword::wordselect::SelectionCriteria;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusPaths {
    pub train_source: PathBuf,
    pub train_target: PathBuf,
    /// Backtranslated training data, appended after the genuine pairs.
    #[serde(default)]
    pub backtranslation_source: Option<PathBuf>,
    #[serde(default)]
    pub backtranslation_target: Option<PathBuf>,
    pub test_source: PathBuf,
    pub test_target: PathBuf,
    /// Lowercase every line on load.
    #[serde(default)]
    pub lowercase: bool,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProviderKind {
    #[default]
    Builtin,
    External,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProviderConfig {
    pub kind: ProviderKind,
    /// Built-in provider only.
    pub dim: usize,
    pub window: usize,
    /// `tcp://host:port`, `host:port` or `stdio:command args`.
    pub address: Option<String>,
}

impl Default for ProviderConfig {
    fn default() -> Self {
        ProviderConfig {
            kind: ProviderKind::Builtin,
            dim: HashedContextProvider::DEFAULT_DIM,
            window: HashedContextProvider::DEFAULT_WINDOW,
            address: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AlignerConfig {
    pub iterations: usize,
    pub tension: Option<f64>,
}

impl Default for AlignerConfig {
    fn default() -> Self {
        AlignerConfig {
            iterations: 5,
            tension: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AugmentSettings {
    pub per_reference_target: usize,
    pub k: Option<usize>,
    pub min_similarity: f64,
    pub candidate_origin: novelword::ctxsearch::CandidateOrigin,
}

impl Default for AugmentSettings {
    fn default() -> Self {
        let search = SearchConfig::default();
        AugmentSettings {
            per_reference_target: 19,
            k: None,
            min_similarity: search.min_similarity,
            candidate_origin: search.candidate_origin,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Seeds {
    pub references: u64,
    pub provider: u64,
    pub search: u64,
    pub build: u64,
}

impl Default for Seeds {
    fn default() -> Self {
        Seeds {
            references: 1,
            provider: 2,
            search: 3,
            build: 4,
        }
    }
}

impl Seeds {
    pub fn as_map(&self) -> std::collections::BTreeMap<String, u64> {
        [
            ("references", self.references),
            ("provider", self.provider),
            ("search", self.search),
            ("build", self.build),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_owned(), v))
        .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub accuracy_mode: AccuracyMode,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            accuracy_mode: AccuracyMode::Micro,
        }
    }
}

fn default_approaches() -> Vec<ApproachSpec> {
    vec![
        ApproachSpec::finetune(),
        ApproachSpec::randompad(2).unwrap(),
        ApproachSpec::augmented(20).unwrap(),
        ApproachSpec::half(20).unwrap(),
    ]
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// Worker threads. 0 uses one per core.
    #[serde(default)]
    pub threads: usize,
    pub corpus: CorpusPaths,
    #[serde(default)]
    pub criteria: SelectionCriteria,
    #[serde(default = "default_approaches")]
    pub approaches: Vec<ApproachSpec>,
    #[serde(default)]
    pub schedule: OccurrenceSchedule,
    #[serde(default)]
    pub provider: ProviderConfig,
    #[serde(default)]
    pub aligner: AlignerConfig,
    #[serde(default)]
    pub augment: AugmentSettings,
    #[serde(default)]
    pub seeds: Seeds,
    #[serde(default)]
    pub eval: EvalConfig,
}

impl PipelineConfig {
    /// Parses a config document, applies overrides and resolves relative
    /// paths against `base_dir`.
    pub fn parse(text: &str, base_dir: &Path, overrides: &[(String, String)]) -> Result<Self> {
        let mut table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| CliError::Config(e.to_string()))?;
        for (key, value) in overrides {
            set_key(&mut table, key, parse_value(value))?;
        }
        let mut config: PipelineConfig = table
            .try_into()
            .map_err(|e: toml::de::Error| CliError::Config(e.to_string()))?;
        config.resolve_paths(base_dir);
        Ok(config)
    }

    pub fn load(path: &Path, overrides: &[(String, String)]) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base, overrides)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.output_dir);
        let c = &mut self.corpus;
        for p in [&mut c.train_source, &mut c.train_target, &mut c.test_source, &mut c.test_target] {
            fix(p);
        }
        for p in [&mut c.backtranslation_source, &mut c.backtranslation_target]
            .into_iter()
            .flatten()
        {
            fix(p);
        }
    }

    pub fn validate(&self) -> Result<()> {
        let c = &self.corpus;
        if c.backtranslation_source.is_some() != c.backtranslation_target.is_some() {
            return Err(CliError::Config(
                "backtranslation_source and backtranslation_target must be set together".into(),
            ));
        }
        let mut paths = vec![&c.train_source, &c.train_target, &c.test_source, &c.test_target];
        paths.extend(c.backtranslation_source.iter());
        paths.extend(c.backtranslation_target.iter());
        for p in paths {
            if !p.is_file() {
                return Err(CliError::Config(format!("{}: no such file", p.display())));
            }
        }
        self.criteria.validate()?;
        if self.approaches.is_empty() {
            return Err(CliError::Config("no approaches configured".into()));
        }
        if self.aligner.iterations == 0 {
            return Err(CliError::Config("aligner.iterations must be positive".into()));
        }
        if self.augment.per_reference_target == 0 {
            return Err(CliError::Config("augment.per_reference_target must be positive".into()));
        }
        match self.provider.kind {
            ProviderKind::Builtin if self.provider.dim == 0 => {
                return Err(CliError::Config("provider.dim must be positive".into()));
            }
            ProviderKind::External if self.provider.address.is_none() => {
                return Err(CliError::Config(
                    "external provider needs provider.address or NOVELWORD_EMBED_ADDR".into(),
                ));
            }
            _ => {}
        }
        Ok(())
    }

    /// References drawn per word: enough for the largest schedule step.
    pub fn references_per_word(&self) -> usize {
        self.schedule.max()
    }

    pub fn needs_synthetics(&self) -> bool {
        self.approaches.iter().any(|a| a.synth_share() > 0)
    }

    pub fn max_synth_share(&self) -> usize {
        self.approaches.iter().map(|a| a.synth_share()).max().unwrap_or(0)
    }

    pub fn augment_config(&self) -> novelword::augment::AugmentConfig {
        novelword::augment::AugmentConfig {
            per_reference_target: self.augment.per_reference_target,
            k: self.augment.k,
            search: SearchConfig {
                k: SearchConfig::default().k,
                seed: self.seeds.search,
                min_similarity: self.augment.min_similarity,
                candidate_origin: self.augment.candidate_origin,
            },
        }
    }
}

fn parse_value(raw: &str) -> toml::Value {
    let doc = format!("v = {raw}");
    match doc.parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").expect("key just written"),
        Err(_) => toml::Value::String(raw.to_owned()),
    }
}

fn set_key(table: &mut toml::Table, key: &str, value: toml::Value) -> Result<()> {
    let mut parts = key.split('.').peekable();
    let mut current = table;
    while let Some(part) = parts.next() {
        if part.is_empty() {
            return Err(CliError::Config(format!("bad override key {key:?}")));
        }
        if parts.peek().is_none() {
            current.insert(part.to_owned(), value);
            return Ok(());
        }
        let next = current
            .entry(part.to_owned())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        current = next
            .as_table_mut()
            .ok_or_else(|| CliError::Config(format!("{key}: {part} is not a table")))?;
    }
    unreachable!("split yields at least one part")
}

/// Splits `key=value`.
pub fn parse_override(s: &str) -> std::result::Result<(String, String), String> {
    s.split_once('=')
        .map(|(k, v)| (k.trim().to_owned(), v.trim().to_owned()))
        .ok_or_else(|| format!("expected key=value, got {s:?}"))
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
        [corpus]
        train_source = "train.src"
        train_target = "train.tgt"
        test_source = "test.src"
        test_target = "test.tgt"
    "#;

    #[test]
    fn defaults_fill_in() {
        let c = PipelineConfig::parse(MINIMAL, Path::new("/data"), &[]).unwrap();
        assert_eq!(c.corpus.train_source, PathBuf::from("/data/train.src"));
        assert_eq!(c.output_dir, PathBuf::from("/data/out"));
        assert_eq!(c.aligner.iterations, 5);
        assert_eq!(c.schedule.steps(), &[1, 2, 3, 5, 10, 15, 20]);
        let labels: Vec<String> = c.approaches.iter().map(|a| a.to_string()).collect();
        assert_eq!(labels, ["finetune", "randompad(2)", "augmented(20)", "half(20)"]);
        assert_eq!(c.references_per_word(), 20);
    }

    #[test]
    fn overrides_apply() {
        let overrides = [
            parse_override("aligner.tension=4.0").unwrap(),
            parse_override("criteria.max_words = 10").unwrap(),
            parse_override("approaches=[\"half(20)\"]").unwrap(),
            parse_override("provider.address=localhost:9000").unwrap(),
        ];
        let c = PipelineConfig::parse(MINIMAL, Path::new("."), &overrides).unwrap();
        assert_eq!(c.aligner.tension, Some(4.0));
        assert_eq!(c.criteria.max_words, 10);
        assert_eq!(c.approaches, vec![ApproachSpec::half(20).unwrap()]);
        assert_eq!(c.provider.address.as_deref(), Some("localhost:9000"));
    }

    #[test]
    fn unknown_keys_rejected() {
        let err = PipelineConfig::parse(MINIMAL, Path::new("."), &[("aligner.iters".into(), "3".into())])
            .unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn missing_files_fail_validation() {
        let c = PipelineConfig::parse(MINIMAL, Path::new("/nonexistent"), &[]).unwrap();
        assert_eq!(c.validate().unwrap_err().exit_code(), 2);
    }
}
