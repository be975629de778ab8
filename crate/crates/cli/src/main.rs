use std::fmt;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use kbqa_core::harness::{
    apply_entity_links, build_vocabulary, evaluate, identify_literals, oracle_for, question_words, read_entity_links,
    read_examples, synth, training_example, validate, write_examples, Prepared, VocabMode,
};
use kbqa_core::induction::{decode, DecodeConfig, Inducer};
use kbqa_core::kb::{load_kb, write_tsv, KbFormat, KnowledgeBase, Literal};
use kbqa_core::scorer::{serve, train, EmbeddingTable, Model, ModelConfig, Server, TrainConfig};
use kbqa_core::sexpr::{denest, execute, execute_program, parse, NamingConvention, Program, SubprogramSequence};
use serde::{Deserialize, Serialize};
use serde_json::json;

#[derive(Parser)]
#[command(name = "kbqa", version, about = "Question answering over a knowledge base by program induction")]
struct Cli {
    /// TOML file with `[decode]`, `[model]`, `[train]` and `[eval]` tables.
    /// Flags override its values.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Load and validate a knowledge base and print its statistics.
    LoadKb {
        #[command(flatten)]
        kb: KbArgs,
    },
    /// Parse a program and print its canonical form.
    Parse {
        program: String,
        /// Resolve names against this KB instead of the naming convention.
        #[arg(long)]
        kb: Option<PathBuf>,
        #[arg(long, default_value = "tsv")]
        kb_format: KbFormat,
        /// Print the subprogram sequence instead.
        #[arg(long)]
        denest: bool,
    },
    /// Execute a program, or with `--sequence` a subprogram sequence.
    Execute {
        program: String,
        #[command(flatten)]
        kb: KbArgs,
        #[arg(long)]
        sequence: bool,
    },
    /// Train the step scorer and write a checkpoint. Prints the loss curve.
    Train {
        #[command(flatten)]
        kb: KbArgs,
        #[command(flatten)]
        data: DataArgs,
        /// Word vectors in the common text format.
        #[arg(long, env = "KBQA_EMBEDDINGS")]
        embeddings: PathBuf,
        /// Checkpoint to write.
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        train: TrainArgs,
    },
    /// Decode a dataset and print the evaluation report.
    Eval {
        #[command(flatten)]
        kb: KbArgs,
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        scorer: ScorerArgs,
        /// Training data, for the train-only vocabulary.
        #[arg(long)]
        train_data: Option<PathBuf>,
        /// `kb-wide` or `train-only`.
        #[arg(long)]
        vocabulary: Option<VocabMode>,
        #[command(flatten)]
        decode: DecodeArgs,
        /// Omit per-example results.
        #[arg(long)]
        summary: bool,
    },
    /// Answer one question and print the ranked programs.
    Answer {
        question: String,
        #[command(flatten)]
        kb: KbArgs,
        #[arg(long, env = "KBQA_CHECKPOINT")]
        checkpoint: PathBuf,
        /// Linked entity, most confident first. Repeatable.
        #[arg(long = "entity", required = true)]
        entities: Vec<String>,
        /// Tagged literal such as `2015^^datetime`. Repeatable; identified
        /// from the question when absent.
        #[arg(long = "literal")]
        literals: Vec<String>,
        #[command(flatten)]
        decode: DecodeArgs,
    },
    /// Write the synthetic film world: KB, train and held-out splits, word vectors.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Serve a checkpoint over the scorer wire protocol on stdin/stdout.
    ServeScorer {
        #[arg(long, env = "KBQA_CHECKPOINT")]
        checkpoint: PathBuf,
        #[arg(long, default_value_t = 512)]
        max_admissible: usize,
    },
}

#[derive(Args)]
struct KbArgs {
    /// Knowledge base file.
    #[arg(long = "kb", env = "KBQA_KB")]
    path: PathBuf,
    /// `tsv` or `nt`.
    #[arg(long = "kb-format", default_value = "tsv")]
    format: KbFormat,
}

#[derive(Args)]
struct DataArgs {
    /// Examples, one JSON object per line.
    #[arg(long)]
    data: PathBuf,
    /// Entity links replacing the examples' own.
    #[arg(long)]
    links: Option<PathBuf>,
}

#[derive(Args)]
struct ScorerArgs {
    #[arg(long, env = "KBQA_CHECKPOINT", required_unless_present = "oracle")]
    checkpoint: Option<PathBuf>,
    /// Follow each gold program instead of a trained model.
    #[arg(long)]
    oracle: bool,
}

#[derive(Args)]
struct DecodeArgs {
    #[arg(long)]
    beam_width: Option<usize>,
    #[arg(long)]
    max_steps: Option<usize>,
    /// Largest denotation queried in full; 0 disables sampling.
    #[arg(long)]
    max_entities: Option<usize>,
    #[arg(long)]
    cap_seed: Option<u64>,
    #[arg(long)]
    hypothesis_cap: Option<usize>,
}

#[derive(Args)]
struct ModelArgs {
    /// Hidden size.
    #[arg(long)]
    d: Option<usize>,
    /// Update the word vectors during training.
    #[arg(long)]
    train_embeddings: bool,
    #[arg(long)]
    model_seed: Option<u64>,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    accumulation: Option<usize>,
    #[arg(long)]
    train_seed: Option<u64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct Config {
    decode: DecodeConfig,
    model: ModelConfig,
    train: TrainConfig,
    eval: EvalConfig,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct EvalConfig {
    vocabulary: VocabMode,
}

impl DecodeArgs {
    fn apply(&self, c: &mut DecodeConfig) {
        c.beam_width = self.beam_width.unwrap_or(c.beam_width);
        c.max_steps = self.max_steps.unwrap_or(c.max_steps);
        c.cap.max_entities = self.max_entities.unwrap_or(c.cap.max_entities);
        c.cap.seed = self.cap_seed.unwrap_or(c.cap.seed);
        c.hypothesis_cap = self.hypothesis_cap.unwrap_or(c.hypothesis_cap);
    }
}

/// An error with a machine-readable category.
#[derive(Debug)]
struct Failure {
    kind: &'static str,
    message: String,
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for Failure {}

fn failure(kind: &'static str, message: impl fmt::Display) -> anyhow::Error {
    Failure { kind, message: message.to_string() }.into()
}

fn core_error(e: impl Into<kbqa_core::Error>) -> anyhow::Error {
    let e = e.into();
    failure(e.kind(), e)
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|e| failure("io", format!("{}: {e}", path.display())))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| failure("io", format!("{}: {e}", path.display())))
}

fn load_config(path: Option<&Path>) -> Result<Config> {
    let Some(path) = path else { return Ok(Config::default()) };
    let text = std::fs::read_to_string(path).map_err(|e| failure("io", format!("{}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| failure("config", format!("{}: {e}", path.display())))
}

fn load_knowledge_base(args: &KbArgs) -> Result<KnowledgeBase> {
    load_kb(open(&args.path)?, args.format).map_err(core_error).with_context(|| format!("loading {}", args.path.display()))
}

fn load_model(path: &Path) -> Result<Model> {
    Model::load(open(path)?).map_err(core_error).with_context(|| format!("loading {}", path.display()))
}

/// Reads, links and validates a dataset. Invalid examples are logged and
/// returned separately.
fn load_dataset(kb: &KnowledgeBase, args: &DataArgs) -> Result<(Vec<Prepared>, Vec<kbqa_core::harness::Diagnostic>)> {
    let mut examples = read_examples(open(&args.data)?).map_err(core_error).with_context(|| format!("reading {}", args.data.display()))?;
    if let Some(links) = &args.links {
        let links = read_entity_links(open(links)?).map_err(core_error).with_context(|| format!("reading {}", links.display()))?;
        apply_entity_links(&mut examples, &links);
    }
    let (prepared, bad) = validate(kb, &examples);
    for d in &bad {
        log::warn!("skipping {}: {}", d.id, d.message);
    }
    Ok((prepared, bad))
}

fn print_json(value: &impl Serialize) -> Result<()> {
    let mut out = std::io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}

fn parse_literal(text: &str) -> Result<Literal> {
    match parse(text, &NamingConvention) {
        Ok(Program::Literal(l)) => Ok(l),
        _ => Err(failure("usage", format!("`{text}` is not a tagged literal such as `7.5^^numeric`"))),
    }
}

fn run(cli: Cli) -> Result<()> {
    let mut config = load_config(cli.config.as_deref())?;
    match cli.command {
        Command::LoadKb { kb } => {
            let kb = load_knowledge_base(&kb)?;
            print_json(&json!({
                "entities": kb.entity_count(),
                "relations": kb.relation_count(),
                "classes": kb.class_count(),
                "triples": kb.triple_count(),
                "class_assertions": kb.class_assertion_count(),
                "literals": kb.literal_ids().count(),
            }))
        }
        Command::Parse { program, kb, kb_format, denest: as_sequence } => {
            let p = match &kb {
                Some(path) => {
                    let kb = load_knowledge_base(&KbArgs { path: path.clone(), format: kb_format })?;
                    parse(&program, &kb).map_err(core_error)?
                }
                None => parse(&program, &NamingConvention).map_err(core_error)?,
            };
            if as_sequence {
                println!("{}", denest(&p));
            } else {
                println!("{p}");
            }
            Ok(())
        }
        Command::Execute { program, kb, sequence } => {
            let kb = load_knowledge_base(&kb)?;
            let d = if sequence {
                let seq = SubprogramSequence::parse(&program, &kb).map_err(core_error)?;
                execute(&kb, &seq).map_err(core_error)?
            } else {
                let p = parse(&program, &kb).map_err(core_error)?;
                execute_program(&kb, &p).map_err(core_error)?
            };
            print_json(&json!({ "kind": d.kind(), "size": d.len(), "answers": d.answer_strings(&kb) }))
        }
        Command::Train { kb, data, embeddings, out, model, train: targs } => {
            let kb = load_knowledge_base(&kb)?;
            let (prepared, _) = load_dataset(&kb, &data)?;
            let inducer = Inducer::new(&kb);
            let mut examples = Vec::with_capacity(prepared.len());
            for ex in &prepared {
                match training_example(&inducer, ex) {
                    Ok(t) => examples.push(t),
                    Err(e) => log::warn!("skipping {}: {e}", ex.example.id),
                }
            }
            if examples.is_empty() {
                return Err(failure("dataset", "no usable training examples"));
            }
            let table = EmbeddingTable::read(open(&embeddings)?, None)
                .map_err(core_error)
                .with_context(|| format!("reading {}", embeddings.display()))?;
            config.model.d = model.d.unwrap_or(config.model.d);
            config.model.seed = model.model_seed.unwrap_or(config.model.seed);
            if model.train_embeddings {
                config.model.freeze_embeddings = false;
            }
            config.train.epochs = targs.epochs.unwrap_or(config.train.epochs);
            config.train.lr = targs.lr.unwrap_or(config.train.lr);
            config.train.accumulation = targs.accumulation.unwrap_or(config.train.accumulation);
            config.train.seed = targs.train_seed.unwrap_or(config.train.seed);
            let mut m = Model::new(&table, config.model);
            log::info!("training on {} examples", examples.len());
            let mut stdout = std::io::stdout().lock();
            train(&mut m, &examples, &config.train, |epoch, loss| {
                let _ = writeln!(stdout, "{}", json!({ "epoch": epoch, "loss": loss }));
            });
            let mut w = create(&out)?;
            m.save(&mut w).map_err(core_error)?;
            w.flush()?;
            Ok(())
        }
        Command::Eval { kb, data, scorer, train_data, vocabulary, decode: dargs, summary } => {
            let kb = load_knowledge_base(&kb)?;
            let (prepared, skipped) = load_dataset(&kb, &data)?;
            dargs.apply(&mut config.decode);
            let mode = vocabulary.unwrap_or(config.eval.vocabulary);
            let train_set = match (&train_data, mode) {
                (Some(path), _) => load_dataset(&kb, &DataArgs { data: path.clone(), links: None })?.0,
                (None, VocabMode::TrainOnly) => {
                    return Err(failure("usage", "the train-only vocabulary needs --train-data"));
                }
                (None, VocabMode::KbWide) => Vec::new(),
            };
            let vocab = build_vocabulary(&kb, mode, &train_set);
            let mut report = if scorer.oracle {
                let inducer = Inducer::new(&kb).with_cap(config.decode.cap).with_max_steps(config.decode.max_steps);
                evaluate(&kb, &prepared, &vocab, &config.decode, |ex| oracle_for(&inducer, ex))
            } else {
                let model = load_model(scorer.checkpoint.as_deref().expect("required unless --oracle"))?;
                evaluate(&kb, &prepared, &vocab, &config.decode, |_| Ok(&model))
            };
            report.skipped = skipped;
            if summary {
                report.examples.clear();
            }
            print_json(&report)
        }
        Command::Answer { question, kb, checkpoint, entities, literals, decode: dargs } => {
            let kb = load_knowledge_base(&kb)?;
            let model = load_model(&checkpoint)?;
            dargs.apply(&mut config.decode);
            let literals = if literals.is_empty() {
                identify_literals(&question).into_iter().map(|s| s.literal).collect()
            } else {
                literals.iter().map(|l| parse_literal(l)).collect::<Result<Vec<_>>>()?
            };
            let out = decode(&kb, &model, &question_words(&question), &entities, &literals, &config.decode, None)
                .map_err(core_error)?;
            for d in &out.diagnostics {
                log::warn!("{d}");
            }
            let ranked: Vec<_> = out
                .hypotheses
                .iter()
                .map(|h| {
                    json!({
                        "program": h.program.to_string(),
                        "score": h.score,
                        "log_prob": h.log_prob,
                        "entities": h.entities,
                        "answers": h.denotation.answer_strings(&kb),
                    })
                })
                .collect();
            print_json(&json!({ "question": question, "literals": literals.iter().map(ToString::to_string).collect::<Vec<_>>(), "programs": ranked }))
        }
        Command::Synth { out, seed } => {
            std::fs::create_dir_all(&out).map_err(|e| failure("io", format!("{}: {e}", out.display())))?;
            let s = synth::generate(seed);
            let mut w = create(&out.join("kb.tsv"))?;
            write_tsv(&s.kb, &mut w)?;
            w.flush()?;
            let mut w = create(&out.join("train.jsonl"))?;
            write_examples(&s.train, &mut w)?;
            w.flush()?;
            let mut w = create(&out.join("heldout.jsonl"))?;
            write_examples(&s.heldout, &mut w)?;
            w.flush()?;
            let mut w = create(&out.join("embeddings.txt"))?;
            s.embeddings.write(&mut w)?;
            w.flush()?;
            print_json(&json!({
                "kb": out.join("kb.tsv"),
                "train": s.train.len(),
                "heldout": s.heldout.len(),
                "triples": s.kb.triple_count(),
            }))
        }
        Command::ServeScorer { checkpoint, max_admissible } => {
            let model = load_model(&checkpoint)?;
            let mut server = Server::new(model, max_admissible);
            serve(&mut server, std::io::stdin().lock(), std::io::stdout().lock())?;
            Ok(())
        }
    }
}

fn error_record(kind: &str, message: &str) -> String {
    json!({ "error": { "kind": kind, "message": message } }).to_string()
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprintln!("{}", error_record("usage", e.to_string().trim_end()));
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let kind = e.chain().find_map(|c| c.downcast_ref::<Failure>()).map_or("error", |f| f.kind);
            eprintln!("{}", error_record(kind, &format!("{e:#}")));
            ExitCode::FAILURE
        }
    }
}
