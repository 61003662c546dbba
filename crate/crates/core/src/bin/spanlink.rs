//! Command-line entry points: ingest, build-dict, train, predict, evaluate,
//! match, ablate and synth.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use spanlink::config::RunConfig;
use spanlink::corpus::{write_pubtator, PubtatorRecord, Split, SplitManifest};
use spanlink::eval::{evaluate, training_concepts, EvaluationReport, PredictedMention};
use spanlink::lexicon::parse_medic;
use spanlink::matcher::SynonymIndex;
use spanlink::pipeline::{
    all_gold, build_inventory, canonical_gold, init_model, load_corpus, load_embeddings,
    load_external_abbreviations, load_test_records, load_training_records, predict_documents,
    predictions_pubtator, prepare_documents, scores_tsv, train_and_evaluate, training_sentences,
};
use spanlink::spanmodel::{read_checkpoint, train, write_checkpoint, Checkpoint};
use spanlink::synthetic::SyntheticSuite;
use spanlink::{Error, Result};

#[derive(Parser, Debug)]
#[command(
    name = "spanlink",
    version,
    about = "Disease mention recognition and normalization"
)]
struct Cli {
    /// Run configuration file (`key = value` lines).
    #[arg(short, long, global = true)]
    config: Option<PathBuf>,
    /// Override one configuration key; repeatable.
    #[arg(short = 's', long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Parse and validate a PubTator corpus and write a canonical copy.
    Ingest(IngestArgs),
    /// Build the synonym index from MEDIC (plus training surfaces).
    BuildDict(OutArgs),
    /// Train a model on the configured training corpus.
    Train(TrainArgs),
    /// Decode a corpus with a trained model.
    Predict(PredictArgs),
    /// Score predictions against gold, with the zero-shot breakdown.
    Evaluate(EvaluateArgs),
    /// Rank dictionary concepts for query strings.
    Match(MatchArgs),
    /// Train and evaluate with and without the dictionary term.
    Ablate(DirArgs),
    /// Write the synthetic zero-shot suite and a matching configuration.
    Synth(SynthArgs),
}

#[derive(Args, Debug)]
struct IngestArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
    /// `split<TAB>doc_id` manifest; with `--split`, keep only that split.
    #[arg(long, requires = "split")]
    manifest: Option<PathBuf>,
    #[arg(long, requires = "manifest")]
    split: Option<Split>,
}

#[derive(Args, Debug)]
struct OutArgs {
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args, Debug)]
struct TrainArgs {
    /// Synonym index written by build-dict.
    #[arg(long)]
    dict: PathBuf,
    /// Checkpoint path.
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args, Debug)]
struct PredictArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    dict: PathBuf,
    /// Corpus to decode; defaults to the configured test corpus.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Output prefix: writes PREFIX.pubtator and PREFIX.scores.tsv.
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    /// Predicted mentions in PubTator format.
    #[arg(long)]
    predictions: PathBuf,
    /// Gold corpus; defaults to the configured test corpus.
    #[arg(long)]
    gold: Option<PathBuf>,
    #[arg(long)]
    dict: PathBuf,
    /// Metrics JSON path; the table always goes to stdout.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct MatchArgs {
    #[arg(long)]
    dict: PathBuf,
    #[arg(short, long, default_value_t = 5)]
    k: usize,
    /// File with one query per line, instead of positional queries.
    #[arg(long)]
    queries: Option<PathBuf>,
    #[arg(long)]
    output: Option<PathBuf>,
    query: Vec<String>,
}

#[derive(Args, Debug)]
struct DirArgs {
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args, Debug)]
struct SynthArgs {
    #[arg(long)]
    output: PathBuf,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

fn load_config(cli: &Cli) -> Result<RunConfig> {
    let mut config = match &cli.config {
        Some(p) => RunConfig::from_text(
            &std::fs::read_to_string(p)
                .map_err(|e| Error::Config(format!("{}: {e}", p.display())))?,
        )?,
        None => RunConfig::default(),
    };
    for kv in &cli.overrides {
        config.apply_override(kv)?;
    }
    config.validate()?;
    Ok(config)
}

/// `# config-hash` line followed by the canonical configuration, each line
/// commented out.
fn provenance(config: &RunConfig) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# config-hash {}", config.hash());
    for line in config.to_text().lines() {
        let _ = writeln!(out, "# {line}");
    }
    out
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, text).map_err(|e| {
        Error::Io(std::io::Error::new(
            e.kind(),
            format!("{}: {e}", path.display()),
        ))
    })
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    Ok(BufWriter::new(File::create(path)?))
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|e| {
        Error::Io(std::io::Error::new(
            e.kind(),
            format!("{}: {e}", path.display()),
        ))
    })
}

fn read_index(path: &Path) -> Result<SynonymIndex> {
    SynonymIndex::read_from(open(path)?)
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn cmd_ingest(config: &RunConfig, a: &IngestArgs) -> Result<()> {
    let mut records = load_corpus(&a.input)?;
    if let (Some(m), Some(split)) = (&a.manifest, a.split) {
        let manifest =
            SplitManifest::parse(&std::fs::read_to_string(m)?, &m.display().to_string())?;
        let keep: std::collections::BTreeSet<&str> = manifest.ids(split).collect();
        records.retain(|r| keep.contains(r.document.doc_id.as_str()));
    }
    let docs = prepare_documents(records.clone(), None)?;
    let crossing: usize = docs.iter().map(|d| d.alignment.cross_sentence.len()).sum();
    let snapped: usize = docs.iter().map(|d| d.alignment.snapped_count()).sum();
    let mentions: usize = records.iter().map(|r| r.mentions.len()).sum();
    write_text(&a.output, &(provenance(config) + &write_pubtator(&records)))?;
    println!(
        "{} documents, {mentions} mentions ({snapped} snapped to token boundaries, {crossing} crossing sentences)",
        records.len()
    );
    Ok(())
}

fn cmd_build_dict(config: &RunConfig, a: &OutArgs) -> Result<()> {
    let training = match &config.train_corpus {
        Some(_) => load_training_records(config)?,
        None => Vec::new(),
    };
    let (inventory, unmapped) = build_inventory(config, &training)?;
    let index = SynonymIndex::from_inventory(&inventory, config.ngram_config())?;
    index.write_to(create(&a.output)?)?.flush()?;
    if !unmapped.is_empty() {
        let path = with_suffix(&a.output, ".unmapped.tsv");
        write_text(&path, &(provenance(config) + &unmapped.to_text()))?;
        log::warn!(
            "{} training mentions have no vocabulary entry; see {}",
            unmapped.entries.len(),
            path.display()
        );
    }
    println!(
        "{} concepts, {} synonyms, {} n-gram features",
        index.concept_count(),
        index.synonyms().len(),
        index.vocabulary().len()
    );
    Ok(())
}

fn cmd_train(config: &RunConfig, a: &TrainArgs) -> Result<()> {
    let index = read_index(&a.dict)?;
    let records = load_training_records(config)?;
    let docs = prepare_documents(records, load_external_abbreviations(config)?.as_ref())?;
    let sentences = training_sentences(&docs, &index);
    let mut model = init_model(config, index.concept_count() + 1)?;
    let report = train(&mut model, &index, &sentences, &config.train_config())?;
    let ck = Checkpoint {
        model,
        inventory_hash: index.inventory_hash().to_string(),
        run_config: config.to_text(),
    };
    write_checkpoint(&ck, create(&a.output)?)?.flush()?;
    let losses = report
        .epoch_losses
        .iter()
        .map(|l| format!("{l:.6}"))
        .collect::<Vec<_>>()
        .join(" ");
    println!(
        "trained {} steps; epoch losses: {losses}",
        report.step_losses.len()
    );
    Ok(())
}

fn load_checkpoint(config: &RunConfig, path: &Path, index: &SynonymIndex) -> Result<Checkpoint> {
    let mut ck = read_checkpoint(open(path)?)?;
    if ck.inventory_hash != index.inventory_hash() {
        return Err(Error::Config(
            "checkpoint was trained with a different dictionary".into(),
        ));
    }
    if !ck.model.encoder.is_trainable() {
        ck.attach_store(load_embeddings(config)?)?;
    }
    Ok(ck)
}

fn cmd_predict(config: &RunConfig, a: &PredictArgs) -> Result<()> {
    let index = read_index(&a.dict)?;
    let ck = load_checkpoint(config, &a.checkpoint, &index)?;
    let records = match &a.input {
        Some(p) => load_corpus(p)?,
        None => load_test_records(config)?,
    };
    let docs = prepare_documents(records, load_external_abbreviations(config)?.as_ref())?;
    let preds = predict_documents(&ck.model, &index, &docs)?;
    let header = provenance(config);
    write_text(
        &with_suffix(&a.output, ".pubtator"),
        &(header.clone() + &predictions_pubtator(&docs, &preds)),
    )?;
    write_text(
        &with_suffix(&a.output, ".scores.tsv"),
        &scores_tsv(&preds, &config.hash()),
    )?;
    println!(
        "{} mentions predicted in {} documents",
        preds.len(),
        docs.len()
    );
    Ok(())
}

fn report_json(config: &RunConfig, report: &EvaluationReport) -> Result<String> {
    let mut v = serde_json::to_value(report)?;
    v["config"] = json!(config.to_text());
    Ok(serde_json::to_string_pretty(&v)? + "\n")
}

fn cmd_evaluate(config: &RunConfig, a: &EvaluateArgs) -> Result<()> {
    let index = read_index(&a.dict)?;
    let gold_records = match &a.gold {
        Some(p) => load_corpus(p)?,
        None => load_test_records(config)?,
    };
    let predicted: Vec<PredictedMention> = load_corpus(&a.predictions)?
        .iter()
        .flat_map(|r| r.mentions.iter())
        .map(|m| PredictedMention {
            doc_id: m.doc_id.clone(),
            char_start: m.char_start,
            char_end: m.char_end,
            concept_id: m.primary_concept().unwrap_or("-1").to_string(),
        })
        .collect();
    let train_gold = canonical_gold(&all_gold(&load_training_records(config)?), &index);
    let gold = canonical_gold(&all_gold(&gold_records), &index);
    let report = evaluate(
        &predicted,
        &gold,
        &training_concepts(&train_gold),
        gold_records.len(),
        &config.hash(),
    );
    print!("{}", report.to_table());
    if let Some(out) = &a.output {
        write_text(out, &report_json(config, &report)?)?;
    }
    Ok(())
}

fn cmd_match(config: &RunConfig, a: &MatchArgs) -> Result<()> {
    let index = read_index(&a.dict)?;
    let mut queries = a.query.clone();
    if let Some(p) = &a.queries {
        queries.extend(
            std::fs::read_to_string(p)?
                .lines()
                .filter(|l| !l.trim().is_empty())
                .map(String::from),
        );
    }
    if queries.is_empty() {
        return Err(Error::Config("no queries given".into()));
    }
    let mut out = format!("# config-hash {}\nquery\trank\tcui\tscore\n", config.hash());
    for q in &queries {
        for (rank, (c, s)) in index.top_k(q, a.k).into_iter().enumerate() {
            let _ = writeln!(
                out,
                "{q}\t{}\t{}\t{s:.6}",
                rank + 1,
                index.concept_cui(c).unwrap_or_default()
            );
        }
    }
    match &a.output {
        Some(p) => write_text(p, &out),
        None => {
            print!("{out}");
            Ok(())
        }
    }
}

fn ablate(
    config: &RunConfig,
    inventory_text: &str,
    train: &[PubtatorRecord],
    test: &[PubtatorRecord],
    dir: &Path,
) -> Result<()> {
    let mut reports = Vec::new();
    for lambda in [0.0, config.lambda] {
        let mut c = config.clone();
        c.lambda = lambda;
        let inventory = parse_medic(inventory_text, "medic")?;
        let out = train_and_evaluate(&c, inventory, train.to_vec(), test.to_vec())?;
        let name = format!("lambda_{lambda}");
        write_text(
            &dir.join(format!("{name}.metrics.json")),
            &report_json(&c, &out.report)?,
        )?;
        write_text(
            &dir.join(format!("{name}.scores.tsv")),
            &scores_tsv(&out.predictions, &c.hash()),
        )?;
        reports.push((lambda, out.report));
    }
    let mut diff = provenance(config);
    diff.push_str("metric\tsubset");
    for (l, _) in &reports {
        let _ = write!(diff, "\tf1@lambda={l}");
    }
    diff.push_str("\tdelta\n");
    let rows: Vec<(&str, &str, Box<dyn Fn(&EvaluationReport) -> f64>)> = vec![
        ("ner", "all", Box::new(|r| r.ner.f1)),
        ("nen", "all", Box::new(|r| r.nen.f1)),
        ("nen", "standard", Box::new(|r| r.standard.nen.f1)),
        ("nen", "zero-shot", Box::new(|r| r.zero_shot.nen.f1)),
    ];
    for (metric, subset, f) in &rows {
        let (a, b) = (f(&reports[0].1), f(&reports[1].1));
        let _ = writeln!(diff, "{metric}\t{subset}\t{a:.4}\t{b:.4}\t{:+.4}", b - a);
    }
    write_text(&dir.join("ablation.tsv"), &diff)?;
    print!(
        "{}",
        diff.lines()
            .filter(|l| !l.starts_with('#'))
            .map(|l| format!("{l}\n"))
            .collect::<String>()
    );
    Ok(())
}

fn cmd_ablate(config: &RunConfig, a: &DirArgs) -> Result<()> {
    let medic = config
        .medic
        .as_deref()
        .ok_or_else(|| Error::Config("medic is not set".into()))?;
    let inventory_text = std::fs::read_to_string(medic)?;
    let train = load_training_records(config)?;
    let test = load_test_records(config)?;
    ablate(config, &inventory_text, &train, &test, &a.output)
}

fn cmd_synth(a: &SynthArgs) -> Result<()> {
    let suite = SyntheticSuite::generate(a.seed);
    let dir = &a.output;
    write_text(&dir.join("train.pubtator"), &write_pubtator(&suite.train))?;
    write_text(&dir.join("test.pubtator"), &write_pubtator(&suite.test))?;
    write_text(&dir.join("medic.tsv"), suite.medic_tsv())?;
    let mut config = SyntheticSuite::run_config(0.9);
    config.train_corpus = Some(dir.join("train.pubtator"));
    config.test_corpus = Some(dir.join("test.pubtator"));
    config.medic = Some(dir.join("medic.tsv"));
    write_text(&dir.join("run.conf"), &config.to_text())?;
    println!(
        "{} training and {} test documents, {} sentences; config in {}",
        suite.train.len(),
        suite.test.len(),
        suite.sentence_count(),
        dir.join("run.conf").display()
    );
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    if let Command::Synth(a) = &cli.command {
        return cmd_synth(a);
    }
    let config = load_config(cli)?;
    match &cli.command {
        Command::Ingest(a) => cmd_ingest(&config, a),
        Command::BuildDict(a) => cmd_build_dict(&config, a),
        Command::Train(a) => cmd_train(&config, a),
        Command::Predict(a) => cmd_predict(&config, a),
        Command::Evaluate(a) => cmd_evaluate(&config, a),
        Command::Match(a) => cmd_match(&config, a),
        Command::Ablate(a) => cmd_ablate(&config, a),
        Command::Synth(_) => unreachable!(),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("spanlink: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
