use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use novelword_cli::config::{parse_override, ProviderKind};
use novelword_cli::{commands, fixture, CliError, PipelineConfig};

/// Few-shot adaptation toolkit: evaluation-word holdout, contextual data
/// augmentation, fine-tuning set construction and scoring.
#[derive(Debug, Parser)]
#[command(name = "novelword", version)]
struct Cli {
    /// Pipeline config (TOML).
    #[arg(long, short, global = true, default_value = "novelword.toml")]
    config: PathBuf,
    /// Override a config key, e.g. `--set aligner.iterations=10`.
    #[arg(long = "set", global = true, value_parser = parse_override)]
    overrides: Vec<(String, String)>,
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Address of an external embedding provider; selects it over the
    /// built-in one.
    #[arg(long, global = true, env = "NOVELWORD_EMBED_ADDR")]
    embed_address: Option<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Choose evaluation words.
    Select,
    /// Remove evaluation-word pairs from training and draw references.
    Filter,
    /// Train alignment tables and extract each word's translation.
    Align,
    /// Synthesize pairs by context search and substitution.
    Augment,
    /// Write one fine-tuning set per approach and occurrence count.
    Build,
    /// Run select, filter, align, augment and build in order.
    Run,
    /// Score a hypothesis file against the test references.
    Eval {
        #[arg(long)]
        hyp: PathBuf,
        /// Output name, normally the set's file stem (e.g. `half_20_3`).
        #[arg(long)]
        label: String,
    },
    /// Merge evaluated cells into the adaptation table.
    Report,
    /// Write the synthetic fixture corpus and a config for it.
    Fixture {
        #[arg(long)]
        dir: PathBuf,
    },
}

fn load_config(cli: &Cli) -> Result<PipelineConfig, CliError> {
    let mut config = PipelineConfig::load(&cli.config, &cli.overrides)?;
    if let Some(dir) = &cli.output_dir {
        config.output_dir = dir.clone();
    }
    if let Some(t) = cli.threads {
        config.threads = t;
    }
    if let Some(addr) = &cli.embed_address {
        config.provider.kind = ProviderKind::External;
        config.provider.address = Some(addr.clone());
    }
    config.validate()?;
    Ok(config)
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Command::Fixture { dir } = &cli.command {
        let path = fixture::write_fixture(dir, &Default::default())?;
        println!("{}", path.display());
        return Ok(());
    }
    let config = load_config(&cli)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.threads)
        .build()
        .map_err(|e| CliError::Config(e.to_string()))?;
    pool.install(|| match &cli.command {
        Command::Select => commands::cmd_select(&config).map(drop),
        Command::Filter => commands::cmd_filter(&config).map(drop),
        Command::Align => commands::cmd_align(&config).map(drop),
        Command::Augment => commands::cmd_augment(&config).map(drop),
        Command::Build => commands::cmd_build(&config).map(drop),
        Command::Run => commands::cmd_run(&config).map(drop),
        Command::Eval { hyp, label } => {
            let report = commands::cmd_eval(&config, hyp, label)?;
            println!(
                "BLEU {:.2}  accuracy {:.4}  over-translation {:.4}",
                report.overall_bleu, report.overall_accuracy, report.overall_overtranslation
            );
            Ok(())
        }
        Command::Report => {
            let rows = commands::cmd_report(&config)?;
            print!("{}", novelword::metrics::adaptation_csv(&rows));
            Ok(())
        }
        Command::Fixture { .. } => unreachable!(),
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
