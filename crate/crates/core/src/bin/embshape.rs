use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use embshape_core::aggregate::parse_layers;
use embshape_core::evaluate::{render, EvalReport, ReportFormat};
use embshape_core::experiment::{
    run, CorpusConfig, DataFormat, ExperimentConfig, ModelConfig, ModelKind, TaskConfig,
    TaskKind, CORPUS_KEY,
};
use embshape_core::models::{build_avg_tables_from, save_table};
use embshape_core::store::{open_dump, read_labeled_tsv, read_pair_tsv, save_dump};
use embshape_core::tokenize::{random_embed, tokenize_all, Vocabulary};
use embshape_core::{Error, Result};

#[derive(Parser)]
#[command(name = "embshape", version, about = "Sentence embedding aggregation, post-processing and evaluation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment grid from a JSON config.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "csv")]
        format: String,
    },
    /// Spearman correlation on a sentence-pair set.
    EvalSts {
        #[command(flatten)]
        source: Source,
        #[arg(long)]
        pairs: PathBuf,
        #[command(flatten)]
        pipeline: Pipeline,
    },
    /// k-means clustering accuracy on a labeled set.
    EvalCluster {
        #[command(flatten)]
        source: Source,
        #[arg(long)]
        labels: PathBuf,
        #[command(flatten)]
        pipeline: Pipeline,
        /// k-means seeds, comma separated.
        #[arg(long, default_value = "0,1,2,3,4,5,6,7,8,9")]
        seeds: String,
    },
    /// Isotropy, alignment or uniformity of sentence vectors.
    Diag {
        #[command(flatten)]
        source: Source,
        #[arg(long)]
        metric: String,
        /// Pair TSV; alignment uses its pairs scored 5.
        #[arg(long, conflicts_with = "lines")]
        pairs: Option<PathBuf>,
        /// One text per line.
        #[arg(long)]
        lines: Option<PathBuf>,
        #[command(flatten)]
        pipeline: Pipeline,
        /// Skip L2 normalization before alignment and uniformity.
        #[arg(long)]
        raw: bool,
    },
    /// Average token vectors of a corpus dump into a static table.
    BuildAvg {
        #[arg(long)]
        dump: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        layers: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write a dump of random token vectors for a text file.
    ReDump {
        #[arg(long)]
        vocab: Option<PathBuf>,
        /// Pair TSV, labeled TSV, or one text per line.
        #[arg(long)]
        texts: PathBuf,
        #[arg(long)]
        format: Option<String>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 768)]
        dim: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct Source {
    /// TED1 dump of the task texts.
    #[arg(long, conflicts_with = "random")]
    dump: Option<PathBuf>,
    /// Random embeddings with these seeds (comma separated) instead of a dump.
    #[arg(long)]
    random: Option<String>,
    #[arg(long)]
    vocab: Option<PathBuf>,
}

#[derive(Args)]
struct Pipeline {
    #[arg(long, default_value = "avg@-1", allow_hyphen_values = true)]
    agg: String,
    #[arg(long, default_value = "none")]
    post: String,
    /// One sentence per line; enables idf:W and corpus-fitted steps.
    #[arg(long)]
    corpus: Option<PathBuf>,
    /// Dump of the corpus texts, for corpus-fitted steps on dump models.
    #[arg(long)]
    corpus_dump: Option<PathBuf>,
    #[arg(long, default_value = "markdown")]
    format: String,
}

fn seeds(list: &str) -> Result<Vec<u64>> {
    list.split(',')
        .map(|s| {
            s.trim()
                .parse()
                .map_err(|_| Error::Config(format!("bad seed `{s}`")))
        })
        .collect()
}

fn single_task_config(
    source: &Source,
    pipeline: &Pipeline,
    task: TaskConfig,
    run_seeds: Vec<u64>,
) -> Result<ExperimentConfig> {
    let kind = match (&source.dump, &source.random) {
        (Some(dump), None) => {
            let mut dumps = BTreeMap::from([(task.name.clone(), dump.clone())]);
            if let Some(c) = &pipeline.corpus_dump {
                dumps.insert(CORPUS_KEY.to_string(), c.clone());
            }
            ModelKind::Dump { dumps }
        }
        (None, Some(list)) => ModelKind::Random {
            seeds: seeds(list)?,
            dim: 768,
        },
        _ => return Err(Error::Config("give exactly one of --dump or --random".into())),
    };
    let name = if source.dump.is_some() { "dump" } else { "RE" };
    Ok(ExperimentConfig {
        vocab: source.vocab.clone(),
        corpus: pipeline.corpus.as_ref().map(|texts| CorpusConfig {
            texts: texts.clone(),
            tag: "W".into(),
            min_chars: 10,
        }),
        models: vec![ModelConfig {
            name: name.into(),
            kind,
        }],
        tasks: vec![task],
        aggregations: vec![pipeline.agg.clone()],
        post: vec![pipeline.post.clone()],
        weights: Vec::new(),
        layer_sets: Vec::new(),
        seeds: run_seeds,
        frequent_k: embshape_core::tokenize::DEFAULT_FREQUENT_K,
        stoplist: None,
        l2: None,
        normalize_diagnostics: true,
        output: None,
        threads: None,
    })
}

fn task_name(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().replace([';', '='], "_"))
        .unwrap_or_else(|| "task".into())
}

fn print_reports(reports: &[EvalReport], format: &str) -> Result<ExitCode> {
    print!("{}", render(reports, format.parse::<ReportFormat>()?)?);
    for r in reports.iter().filter(|r| r.is_error()) {
        eprintln!("error: {} {}", r.provenance, r.error.as_deref().unwrap_or(""));
    }
    Ok(if reports.iter().any(EvalReport::is_error) {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    })
}

fn read_texts(path: &Path, format: Option<&str>) -> Result<Vec<String>> {
    let format = match format {
        Some("pairs") => DataFormat::Pairs,
        Some("labeled") => DataFormat::Labeled,
        Some("lines") => DataFormat::Lines,
        Some(other) => return Err(Error::Config(format!("unknown text format `{other}`"))),
        None => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::File {
                path: path.into(),
                source: e,
            })?;
            let cols: Vec<&str> = text.lines().next().unwrap_or("").split('\t').collect();
            match cols.len() {
                1 => DataFormat::Lines,
                2 => DataFormat::Labeled,
                3 if matches!(cols[2].trim(), "train" | "dev" | "test") => DataFormat::Labeled,
                _ => DataFormat::Pairs,
            }
        }
    };
    Ok(match format {
        DataFormat::Pairs => read_pair_tsv(path)?.texts,
        DataFormat::Labeled => read_labeled_tsv(path)?.texts,
        DataFormat::Lines => std::fs::read_to_string(path)
            .map_err(|e| Error::File {
                path: path.into(),
                source: e,
            })?
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .map(String::from)
            .collect(),
    })
}

fn load_vocab(path: Option<&PathBuf>) -> Result<Vocabulary> {
    match path {
        Some(p) => Vocabulary::load(p),
        None => Ok(Vocabulary::bert_base_uncased()),
    }
}

fn execute(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Run { config, format } => {
            let config = ExperimentConfig::load(&config)?;
            let reports = run(config)?;
            print_reports(&reports, &format)
        }
        Command::EvalSts {
            source,
            pairs,
            pipeline,
        } => {
            let task = TaskConfig {
                name: task_name(&pairs),
                kind: TaskKind::Sts,
                path: pairs,
                format: None,
                metric: None,
            };
            let config = single_task_config(&source, &pipeline, task, vec![0])?;
            print_reports(&run(config)?, &pipeline.format)
        }
        Command::EvalCluster {
            source,
            labels,
            pipeline,
            seeds: list,
        } => {
            let task = TaskConfig {
                name: task_name(&labels),
                kind: TaskKind::Cluster,
                path: labels,
                format: None,
                metric: None,
            };
            let config = single_task_config(&source, &pipeline, task, seeds(&list)?)?;
            print_reports(&run(config)?, &pipeline.format)
        }
        Command::Diag {
            source,
            metric,
            pairs,
            lines,
            pipeline,
            raw,
        } => {
            let (path, format) = match (pairs, lines) {
                (Some(p), None) => (p, DataFormat::Pairs),
                (None, Some(l)) => (l, DataFormat::Lines),
                _ => return Err(Error::Config("give one of --pairs or --lines".into())),
            };
            let task = TaskConfig {
                name: task_name(&path),
                kind: TaskKind::Diag,
                path,
                format: Some(format),
                metric: Some(metric),
            };
            let mut config = single_task_config(&source, &pipeline, task, vec![0])?;
            config.normalize_diagnostics = !raw;
            print_reports(&run(config)?, &pipeline.format)
        }
        Command::BuildAvg { dump, layers, out } => {
            let layers = parse_layers(&layers)?;
            let table = build_avg_tables_from(open_dump(&dump)?, &[layers])?
                .pop()
                .expect("one table per group");
            save_table(&table, &out)?;
            eprintln!("wrote {} entries to {}", table.len(), out.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::ReDump {
            vocab,
            texts,
            format,
            seed,
            dim,
            out,
        } => {
            let vocab = load_vocab(vocab.as_ref())?;
            let texts = read_texts(&texts, format.as_deref())?;
            let ids = tokenize_all(&texts, &vocab);
            let tensor = random_embed(&texts, &ids, seed, dim)?;
            save_dump(&tensor, &out)?;
            eprintln!("wrote {} sentences to {}", tensor.sentence_count(), out.display());
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match execute(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
