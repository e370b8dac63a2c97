//! The bundled synthetic corpus, written out as files plus a config.

use std::path::{Path, PathBuf};

use novelword::corpus::ParallelCorpus;
use novelword::fixtures::{pipeline_fixture, PipelineFixtureSpec};

use crate::error::{CliError, Result};
use crate::output::write_atomic;

pub const CONFIG_FILE: &str = "novelword.toml";

fn write_corpus(dir: &Path, stem: &str, corpus: &ParallelCorpus) -> Result<()> {
    let side = |f: fn(&novelword::corpus::SentencePair) -> String| {
        let mut s = String::new();
        for p in corpus.pairs() {
            s.push_str(&f(p));
            s.push('\n');
        }
        s
    };
    write_atomic(&dir.join(format!("{stem}.src")), side(|p| p.source.to_string()).as_bytes())?;
    write_atomic(&dir.join(format!("{stem}.tgt")), side(|p| p.target.to_string()).as_bytes())
}

pub fn fixture_config(spec: &PipelineFixtureSpec) -> String {
    format!(
        r#"output_dir = "out"

[corpus]
train_source = "train.src"
train_target = "train.tgt"
backtranslation_source = "bt.src"
backtranslation_target = "bt.tgt"
test_source = "test.src"
test_target = "test.tgt"

[criteria]
min_test_count = 5
min_train_count = 20
max_words = {n_rare}

[aligner]
iterations = 5
"#,
        n_rare = spec.n_rare
    )
}

/// Writes train, backtranslation and test corpora and a config pointing at
/// them. Returns the config path.
pub fn write_fixture(dir: &Path, spec: &PipelineFixtureSpec) -> Result<PathBuf> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::data(format!("{}: {e}", dir.display())))?;
    let fx = pipeline_fixture(spec);
    write_corpus(dir, "train", &fx.genuine)?;
    write_corpus(dir, "bt", &fx.backtranslation)?;
    write_corpus(dir, "test", &fx.test)?;
    let path = dir.join(CONFIG_FILE);
    write_atomic(&path, fixture_config(spec).as_bytes())?;
    Ok(path)
}
