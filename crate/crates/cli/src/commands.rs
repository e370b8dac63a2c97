//! One function per subcommand. Each reads what it needs from earlier stages
//! under the output directory and writes its own stage directory.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use novelword::aligner::{self, Lexicon, TranslationTable};
use novelword::augment::{self, WordAugmentation};
use novelword::corpus::{self, LoadOptions, Origin, ParallelCorpus, SentencePair, Token};
use novelword::embed::{EmbeddingProvider, ExternalProvider, HashedContextProvider};
use novelword::metrics::{self, AdaptationRow, EvalCorpus, ScoreReport};
use novelword::sets::{self, SyntheticPools};
use novelword::wordselect::{self, EvaluationWord, FilteredSplit};
use serde::de::DeserializeOwned;

use crate::config::{PipelineConfig, ProviderKind};
use crate::error::{CliError, Result};
use crate::output::{Manifest, StageWriter};

pub const SELECT: &str = "select";
pub const FILTER: &str = "filter";
pub const ALIGN: &str = "align";
pub const AUGMENT: &str = "augment";
pub const BUILD: &str = "build";
pub const EVAL: &str = "eval";
pub const REPORT: &str = "report";

fn stage_file(config: &PipelineConfig, stage: &str, file: &str) -> PathBuf {
    config.output_dir.join(stage).join(file)
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        CliError::data(format!("{}: {e} (has the previous stage been run?)", path.display()))
    })?;
    serde_json::from_str(&text).map_err(|e| CliError::data(format!("{}: {e}", path.display())))
}

fn load_options(config: &PipelineConfig) -> LoadOptions {
    LoadOptions {
        lowercase: config.corpus.lowercase,
    }
}

/// Genuine training pairs followed by backtranslated ones.
pub fn load_train(config: &PipelineConfig) -> Result<ParallelCorpus> {
    let c = &config.corpus;
    let opts = load_options(config);
    let genuine = corpus::load_corpus(&c.train_source, &c.train_target, Origin::Genuine, &opts)?;
    match (&c.backtranslation_source, &c.backtranslation_target) {
        (Some(s), Some(t)) => {
            let bt = corpus::load_corpus(s, t, Origin::SyntheticBacktranslation, &opts)?;
            Ok(genuine.concat(bt)?)
        }
        _ => Ok(genuine),
    }
}

pub fn load_test(config: &PipelineConfig) -> Result<ParallelCorpus> {
    let c = &config.corpus;
    Ok(corpus::load_corpus(&c.test_source, &c.test_target, Origin::Genuine, &load_options(config))?)
}

fn record_train_inputs(w: &mut StageWriter, config: &PipelineConfig) -> Result<()> {
    let c = &config.corpus;
    w.input("train_source", &c.train_source)?;
    w.input("train_target", &c.train_target)?;
    if let (Some(s), Some(t)) = (&c.backtranslation_source, &c.backtranslation_target) {
        w.input("backtranslation_source", s)?;
        w.input("backtranslation_target", t)?;
    }
    Ok(())
}

fn record_test_inputs(w: &mut StageWriter, config: &PipelineConfig) -> Result<()> {
    w.input("test_source", &config.corpus.test_source)?;
    w.input("test_target", &config.corpus.test_target)
}

fn selected_words(config: &PipelineConfig) -> Result<(PathBuf, Vec<EvaluationWord>)> {
    let path = stage_file(config, SELECT, "evaluation_words.json");
    let words = read_json(&path)?;
    Ok((path, words))
}

/// Recomputes the filtered split from the training data and selected words.
fn filtered_split(config: &PipelineConfig, w: &mut StageWriter) -> Result<(ParallelCorpus, FilteredSplit)> {
    let train = load_train(config)?;
    record_train_inputs(w, config)?;
    let (path, words) = selected_words(config)?;
    w.input("evaluation_words", &path)?;
    let split = wordselect::split_corpus(&train, &words);
    Ok((train, split))
}

fn references(config: &PipelineConfig, w: &mut StageWriter) -> Result<BTreeMap<Token, Vec<SentencePair>>> {
    let path = stage_file(config, FILTER, "references.json");
    w.input("references", &path)?;
    read_json(&path)
}

pub fn provider(config: &PipelineConfig) -> Result<Box<dyn EmbeddingProvider>> {
    let p = &config.provider;
    Ok(match p.kind {
        ProviderKind::Builtin => Box::new(HashedContextProvider::new(p.dim, p.window, config.seeds.provider)),
        ProviderKind::External => {
            let address = p
                .address
                .as_deref()
                .ok_or_else(|| CliError::Config("external provider has no address".into()))?;
            Box::new(ExternalProvider::connect(address)?)
        }
    })
}

pub fn cmd_select(config: &PipelineConfig) -> Result<Manifest> {
    let mut w = StageWriter::new(&config.output_dir, SELECT)?;
    let train = load_train(config)?;
    let test = load_test(config)?;
    record_train_inputs(&mut w, config)?;
    record_test_inputs(&mut w, config)?;
    let words = wordselect::select_words(&train, &test, &config.criteria)?;
    log::info!("selected {} evaluation words", words.len());
    w.summary("evaluation_words", words.len())?;
    w.write_json("evaluation_words.json", &words)?;
    w.finish(config.seeds.as_map())
}

pub fn cmd_filter(config: &PipelineConfig) -> Result<Manifest> {
    let mut w = StageWriter::new(&config.output_dir, FILTER)?;
    let (train, split) = filtered_split(config, &mut w)?;
    let n = config.references_per_word();
    let mut references = BTreeMap::new();
    for (word, pool) in &split.held_out_pool {
        references.insert(
            word.clone(),
            wordselect::sample_references(word, pool, n, config.seeds.references)?,
        );
    }
    let held_out: BTreeMap<&Token, Vec<u64>> = split
        .held_out_pool
        .iter()
        .map(|(word, pool)| (word, pool.iter().map(|p| p.id).collect()))
        .collect();

    let filtered = &split.filtered_training;
    w.summary("training_pairs", train.len())?;
    w.summary("filtered_pairs", filtered.len())?;
    w.summary("held_out_pairs", train.len() - filtered.len())?;
    w.write_lines("filtered.src", filtered.pairs().iter().map(|p| &p.source))?;
    w.write_lines("filtered.tgt", filtered.pairs().iter().map(|p| &p.target))?;
    w.write_json("held_out.json", &held_out)?;
    w.write_json("references.json", &references)?;
    w.finish(config.seeds.as_map())
}

pub fn cmd_align(config: &PipelineConfig) -> Result<Manifest> {
    let mut w = StageWriter::new(&config.output_dir, ALIGN)?;
    let (train, split) = filtered_split(config, &mut w)?;
    let a = &config.aligner;
    let (full, filtered) = rayon::join(
        || aligner::train(&train, a.iterations, a.tension),
        || aligner::train(&split.filtered_training, a.iterations, a.tension),
    );
    let (full, filtered) = (full?, filtered?);

    let lexicon = aligner::extract_lexicon(&train, &full, &split.evaluation_words);
    for word in &lexicon.unaligned {
        log::warn!("{word}: no aligned source word; it cannot be augmented");
    }
    let mut words = split.evaluation_words.clone();
    for ew in &mut words {
        ew.source_word = lexicon.get(&ew.target_word).cloned();
    }
    let alignments: Vec<String> = {
        use rayon::prelude::*;
        split
            .filtered_training
            .pairs()
            .par_iter()
            .map(|p| aligner::align(p, &filtered).to_pharaoh())
            .collect()
    };

    w.summary("log_likelihood_full", full.log_likelihood())?;
    w.summary("log_likelihood_filtered", filtered.log_likelihood())?;
    w.summary("unaligned_words", &lexicon.unaligned)?;
    w.write("table_full.tsv", full.to_tsv().as_bytes())?;
    w.write("table_filtered.tsv", filtered.to_tsv().as_bytes())?;
    w.write_json("lexicon.json", &lexicon)?;
    w.write_json("evaluation_words.json", &words)?;
    w.write_lines("filtered.align", &alignments)?;
    w.finish(config.seeds.as_map())
}

pub fn cmd_augment(config: &PipelineConfig) -> Result<Manifest> {
    let mut w = StageWriter::new(&config.output_dir, AUGMENT)?;
    let (_, split) = filtered_split(config, &mut w)?;
    let references = references(config, &mut w)?;
    let table_path = stage_file(config, ALIGN, "table_filtered.tsv");
    let lexicon_path = stage_file(config, ALIGN, "lexicon.json");
    w.input("table_filtered", &table_path)?;
    w.input("lexicon", &lexicon_path)?;
    let table = TranslationTable::load_tsv(&table_path, config.aligner.tension)?;
    let lexicon: Lexicon = read_json(&lexicon_path)?;
    let provider = provider(config)?;
    let augment_config = config.augment_config();

    let mut results: Vec<WordAugmentation> = Vec::new();
    let mut discards: BTreeMap<String, usize> = BTreeMap::new();
    let mut shortfall = 0;
    for (word, refs) in &references {
        if lexicon.get(word).is_none() {
            log::warn!("{word}: skipped, no lexicon entry");
            continue;
        }
        let with_positions: Vec<(SentencePair, usize)> = refs
            .iter()
            .map(|p| {
                let pos = p.target.position(word).ok_or_else(|| {
                    CliError::data(format!("reference {} does not contain {word}", p.id))
                })?;
                Ok((p.clone(), pos))
            })
            .collect::<Result<_>>()?;
        let result = augment::augment_word(
            word,
            &with_positions,
            &split.filtered_training,
            provider.as_ref(),
            &table,
            &lexicon,
            &augment_config,
        )?;
        for d in result.discards() {
            *discards.entry(d.reason.to_string()).or_default() += 1;
        }
        shortfall += result.references.iter().map(|r| r.shortfall).sum::<usize>();
        log::info!("{word}: {} synthetic pairs", result.synthetics().count());
        results.push(result);
    }

    let synthetics: Vec<&augment::SyntheticPair> = results.iter().flat_map(|r| r.synthetics()).collect();
    w.summary("synthetic_pairs", synthetics.len())?;
    w.summary("discards", &discards)?;
    w.summary("shortfall", shortfall)?;
    w.summary("provider", provider.name())?;
    w.write_lines("synthetic.src", synthetics.iter().map(|s| &s.pair.source))?;
    w.write_lines("synthetic.tgt", synthetics.iter().map(|s| &s.pair.target))?;
    w.write_json("synthetic.json", &results)?;
    w.finish(config.seeds.as_map())
}

fn synthetic_pools(config: &PipelineConfig, w: &mut StageWriter) -> Result<SyntheticPools> {
    if !config.needs_synthetics() {
        return Ok(SyntheticPools::new());
    }
    let path = stage_file(config, AUGMENT, "synthetic.json");
    w.input("synthetic", &path)?;
    let results: Vec<WordAugmentation> = read_json(&path)?;
    Ok(results
        .into_iter()
        .map(|r| {
            let pools = r.references.into_iter().map(|a| a.synthetics).collect();
            (r.word, pools)
        })
        .collect())
}

pub fn cmd_build(config: &PipelineConfig) -> Result<Manifest> {
    let mut w = StageWriter::new(&config.output_dir, BUILD)?;
    let (_, split) = filtered_split(config, &mut w)?;
    let references = references(config, &mut w)?;
    let pools = synthetic_pools(config, &mut w)?;
    let built = sets::schedule_runs(
        &config.schedule,
        &config.approaches,
        &references,
        &pools,
        &split.filtered_training,
        config.seeds.build,
    )?;
    let mut manifests = Vec::with_capacity(built.len());
    for set in &built {
        let stem = set.file_stem();
        w.write_lines(&format!("sets/{stem}.src"), set.sources())?;
        w.write_lines(&format!("sets/{stem}.tgt"), set.targets())?;
        let manifest = set.manifest();
        w.write_json(&format!("sets/{stem}.json"), &manifest)?;
        manifests.push(manifest);
    }
    w.write_json("sets.json", &manifests)?;
    w.summary("sets", built.len())?;
    w.finish(config.seeds.as_map())
}

fn check_label(label: &str) -> Result<()> {
    let ok = !label.is_empty()
        && label
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.'))
        && !label.starts_with('.');
    if ok {
        Ok(())
    } else {
        Err(CliError::Config(format!("bad label {label:?}: use letters, digits, '_', '-' or '.'")))
    }
}

/// Scores one hypothesis file against the test references. `label` names
/// the output, normally the file stem of the set the system was tuned on.
pub fn cmd_eval(config: &PipelineConfig, hypotheses: &Path, label: &str) -> Result<ScoreReport> {
    check_label(label)?;
    let mut w = StageWriter::new(&config.output_dir, EVAL)?
        .with_manifest_name(format!("{label}.manifest.json"));
    let test = load_test(config)?;
    w.input("test_target", &config.corpus.test_target)?;
    w.input("hypotheses", hypotheses)?;
    let (path, words) = selected_words(config)?;
    w.input("evaluation_words", &path)?;

    let hyps = corpus::load_sentences(hypotheses, &load_options(config))?;
    let refs = test.pairs().iter().map(|p| p.target.clone()).collect();
    let eval = EvalCorpus::new(hyps, refs)?;
    let words: Vec<Token> = words.into_iter().map(|w| w.target_word).collect();
    let report = ScoreReport::compute(&eval, &words, config.eval.accuracy_mode)?;
    w.write_json(&format!("{label}.json"), &report)?;
    w.write(&format!("{label}.csv"), report.per_word_csv().as_bytes())?;
    w.finish(config.seeds.as_map())?;
    Ok(report)
}

/// Collects every `(approach, c)` cell that has been evaluated.
pub fn cmd_report(config: &PipelineConfig) -> Result<Vec<AdaptationRow>> {
    let mut w = StageWriter::new(&config.output_dir, REPORT)?;
    let mut rows = Vec::new();
    for approach in &config.approaches {
        for &c in config.schedule.steps() {
            let stem = approach.file_stem(c);
            let path = stage_file(config, EVAL, &format!("{stem}.json"));
            if !path.is_file() {
                log::warn!("{stem}: not evaluated, left out of the report");
                continue;
            }
            w.input(&stem, &path)?;
            let report: ScoreReport = read_json(&path)?;
            rows.push(AdaptationRow {
                approach: approach.to_string(),
                ratio: approach.ratio(),
                occurrences: c,
                bleu: report.overall_bleu,
                accuracy: report.overall_accuracy,
                overtranslation: report.overall_overtranslation,
            });
        }
    }
    if rows.is_empty() {
        return Err(CliError::data("no evaluation results to report; run `eval` first"));
    }
    w.summary("rows", rows.len())?;
    w.write("adaptation.csv", metrics::adaptation_csv(&rows).as_bytes())?;
    w.write_json("adaptation.json", &rows)?;
    w.finish(config.seeds.as_map())?;
    Ok(rows)
}

/// Runs select through build.
pub fn cmd_run(config: &PipelineConfig) -> Result<Vec<Manifest>> {
    let mut out = vec![cmd_select(config)?, cmd_filter(config)?, cmd_align(config)?];
    if config.needs_synthetics() {
        out.push(cmd_augment(config)?);
    }
    out.push(cmd_build(config)?);
    Ok(out)
}
