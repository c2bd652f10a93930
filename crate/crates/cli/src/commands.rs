use std::fs::{self, File};
use std::io::{self, BufRead, BufWriter, Write};
use std::path::{Path, PathBuf};

use dgms::code::{build_program_graph, decode_ast_json, parse_minilang};
use dgms::diagnostics::triple_gradcheck;
use dgms::eval::{
    build_pools, ingest_file, prepare_query, read_corpus, write_corpus, Corpus, EmbeddingIndex, PreparedCorpus,
    RankedList, Retriever,
};
use dgms::features::{feature_table, load_embeddings, EmbeddingTable};
use dgms::graph::encode_graph_json;
use dgms::model::{init_params, load_checkpoint, save_checkpoint, unified_relations, Checkpoint, ModelConfig};
use dgms::synth::synthetic_entries;
use dgms::text_graph::text_graph_for;
use dgms::train::{train, PairSet};
use dgms::{Error, Result};

use crate::args::{GradcheckArgs, GraphCodeArgs, GraphTextArgs, Lang, SearchArgs, SynthArgs};
use crate::config::RunConfig;

/// Gradient checks pass below this relative error.
const GRADCHECK_TOLERANCE: f64 = 1e-4;

pub fn echo(cfg: &RunConfig) {
    eprintln!("{}", serde_json::to_string(cfg).expect("config serializes"));
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Writes to `path`, or stdout when `None`.
fn emit(path: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match path {
        Some(p) => fs::write(p, bytes).map_err(|e| Error::io(p, e)),
        None => {
            let mut out = io::stdout().lock();
            out.write_all(bytes)
                .and_then(|_| out.write_all(b"\n"))
                .map_err(|e| Error::io("<stdout>", e))
        }
    }
}

fn corpus_graphs(corpora: &[&Corpus]) -> Vec<dgms::graph::LabeledMultigraph> {
    corpora
        .iter()
        .flat_map(|c| c.entries.iter().flat_map(|e| [e.text_graph.clone(), e.code_graph.clone()]))
        .collect()
}

fn features_for(cfg: &RunConfig, model: &ModelConfig, corpora: &[&Corpus]) -> Result<EmbeddingTable> {
    let graphs = corpus_graphs(corpora);
    feature_table(cfg.embeddings.as_deref(), &graphs, model.input_dim, model.seed)
}

pub fn graph_text(args: &GraphTextArgs, cfg: &RunConfig) -> Result<()> {
    let input = cfg.existing("--in", &cfg.input)?;
    let parse = args.parse.as_deref().map(read_text).transpose()?;
    echo(cfg);
    let g = text_graph_for(&read_text(&input)?, parse.as_deref())?;
    emit(cfg.output.as_deref(), &encode_graph_json(&g))
}

pub fn graph_code(args: &GraphCodeArgs, cfg: &RunConfig) -> Result<()> {
    let input = cfg.existing("--in", &cfg.input)?;
    echo(cfg);
    let ast = match args.lang {
        Lang::Minilang => parse_minilang(&read_text(&input)?)?,
        Lang::AstJson => decode_ast_json(&fs::read(&input).map_err(|e| Error::io(&input, e))?)?,
    };
    let g = build_program_graph(&ast)?;
    emit(cfg.output.as_deref(), &encode_graph_json(&g))
}

pub fn corpus_build(cfg: &RunConfig) -> Result<()> {
    let input = cfg.existing("--in", &cfg.input)?;
    let output = cfg.require("--out", &cfg.output)?;
    echo(cfg);
    let corpus = ingest_file(&input, &cfg.filter)?;
    write_corpus(&output, &corpus)?;
    emit(None, &serde_json::to_vec(&corpus.report)?)
}

pub fn corpus_synth(args: &SynthArgs, cfg: &RunConfig) -> Result<()> {
    let output = cfg.require("--out", &cfg.output)?;
    echo(cfg);
    let file = File::create(&output).map_err(|e| Error::io(&output, e))?;
    let mut w = BufWriter::new(file);
    for entry in synthetic_entries(args.count, cfg.seed) {
        serde_json::to_writer(&mut w, &entry)?;
        w.write_all(b"\n").map_err(|e| Error::io(&output, e))?;
    }
    w.flush().map_err(|e| Error::io(&output, e))
}

/// Training corpus plus validation corpus: `--val` if given, otherwise the
/// last 10% (at least 2 entries) of the training corpus.
fn split_corpus(corpus: Corpus, val: Option<Corpus>) -> Result<(Corpus, Corpus)> {
    if let Some(v) = val {
        return Ok((corpus, v));
    }
    let n = corpus.len();
    let k = n.div_ceil(10).max(2);
    if n < k + 2 {
        return Err(Error::Format(format!(
            "corpus has {n} entries; need at least {} to hold out validation pairs",
            k + 2
        )));
    }
    Ok((corpus.slice(0..n - k), corpus.slice(n - k..n)))
}

pub fn train_cmd(cfg: &RunConfig) -> Result<()> {
    let input = cfg.existing("--in", &cfg.input)?;
    let val_path = match &cfg.val_input {
        Some(_) => Some(cfg.existing("--val", &cfg.val_input)?),
        None => None,
    };
    if cfg.embeddings.is_some() {
        cfg.existing("--embeddings", &cfg.embeddings)?;
    }
    let ck_path = cfg.require("--checkpoint", &cfg.checkpoint)?;
    cfg.model.validate()?;
    cfg.train.validate()?;
    echo(cfg);

    let corpus = read_corpus(&input)?;
    let val = val_path.as_deref().map(read_corpus).transpose()?;
    let (train_corpus, val_corpus) = split_corpus(corpus, val)?;
    let table = features_for(cfg, &cfg.model, &[&train_corpus, &val_corpus])?;
    let relations = unified_relations();
    let train_set = PreparedCorpus::new(&train_corpus, &table, &relations)?;
    let val_set = PreparedCorpus::new(&val_corpus, &table, &relations)?;
    log::info!("training on {} pairs, validating on {}", train_set.len(), val_set.len());

    let mut log_out: Box<dyn Write> = match &cfg.log {
        Some(p) => Box::new(BufWriter::new(File::create(p).map_err(|e| Error::io(p, e))?)),
        None => Box::new(io::stdout()),
    };
    let mut log_err = None;
    let params = init_params(&cfg.model, &relations)?;
    let outcome = train(
        params,
        &PairSet::new(&train_set.texts, &train_set.codes)?,
        &PairSet::new(&val_set.texts, &val_set.codes)?,
        &cfg.train,
        |rec| {
            let line = serde_json::to_string(rec).expect("record serializes");
            if let Err(e) = writeln!(log_out, "{line}").and_then(|_| log_out.flush()) {
                log_err.get_or_insert(e);
            }
        },
    )?;
    if let Some(e) = log_err {
        return Err(Error::io(cfg.log.clone().unwrap_or_else(|| "<stdout>".into()), e));
    }
    save_checkpoint(
        &ck_path,
        &Checkpoint {
            params: outcome.best,
            adam: Some(outcome.best_adam),
        },
    )?;
    eprintln!(
        "best epoch {} (validation loss {}), checkpoint {}",
        outcome.best_epoch,
        outcome
            .best_val_loss
            .map_or_else(|| "n/a".to_string(), |v| format!("{v:.6}")),
        ck_path.display()
    );
    Ok(())
}

/// Returns whether the check passed.
pub fn gradcheck(args: &GradcheckArgs, cfg: &RunConfig) -> Result<bool> {
    echo(cfg);
    let summary = triple_gradcheck(cfg.seed, args.cases, args.step)?;
    emit(None, &serde_json::to_vec(&summary)?)?;
    println!("max relative error {:e}", summary.max_rel_error);
    Ok(summary.max_rel_error < GRADCHECK_TOLERANCE)
}

/// Corpus and checkpoint shared by index, evaluate and search. The echoed
/// model section is the checkpoint's.
struct Loaded {
    corpus: Corpus,
    checkpoint: Checkpoint,
}

fn load_inputs(cfg: &mut RunConfig, need_index: bool) -> Result<Loaded> {
    let input = cfg.existing("--in", &cfg.input)?;
    let ck = cfg.existing("--checkpoint", &cfg.checkpoint)?;
    if cfg.embeddings.is_some() {
        cfg.existing("--embeddings", &cfg.embeddings)?;
    }
    if need_index {
        cfg.existing("--index", &cfg.index)?;
    }
    let checkpoint = load_checkpoint(&ck)?;
    cfg.model = checkpoint.params.config.clone();
    echo(cfg);
    Ok(Loaded {
        corpus: read_corpus(&input)?,
        checkpoint,
    })
}

fn load_index(cfg: &RunConfig, ck: &Checkpoint) -> Result<Option<EmbeddingIndex>> {
    match &cfg.index {
        Some(dir) => Ok(Some(EmbeddingIndex::load(dir, Some(&ck.fingerprint()))?)),
        None => Ok(None),
    }
}

pub fn index_build(cfg: &mut RunConfig) -> Result<()> {
    let dir: PathBuf = cfg
        .index
        .clone()
        .or_else(|| cfg.output.clone())
        .ok_or_else(|| Error::Argument("missing required path: --index".into()))?;
    let loaded = load_inputs(cfg, false)?;
    let params = &loaded.checkpoint.params;
    let table = features_for(cfg, &params.config, &[&loaded.corpus])?;
    let prepared = PreparedCorpus::new(&loaded.corpus, &table, &params.relations)?;
    let index = EmbeddingIndex::build(&prepared, params)?;
    index.save(&dir)?;
    eprintln!("indexed {} code graphs into {}", index.len(), dir.display());
    Ok(())
}

pub fn evaluate(pools_out: Option<&Path>, cfg: &mut RunConfig) -> Result<()> {
    let loaded = load_inputs(cfg, cfg.index.is_some())?;
    let params = &loaded.checkpoint.params;
    let table = features_for(cfg, &params.config, &[&loaded.corpus])?;
    let prepared = PreparedCorpus::new(&loaded.corpus, &table, &params.relations)?;
    let index = load_index(cfg, &loaded.checkpoint)?;
    let pools = build_pools(&prepared.ids, cfg.pool_size, cfg.seed)?;
    if let Some(p) = pools_out {
        emit(Some(p), &serde_json::to_vec(&pools)?)?;
    }
    let retriever = Retriever::new(params, &prepared, index.as_ref())?;
    let (report, _) = retriever.evaluate(&pools)?;
    emit(cfg.output.as_deref(), &serde_json::to_vec(&report)?)
}

fn print_ranked(out: &mut impl Write, ranked: &RankedList, corpus: &Corpus, json: bool) -> io::Result<()> {
    if json {
        return writeln!(out, "{}", serde_json::to_string(&ranked.entries).expect("ranking serializes"));
    }
    writeln!(out, "{:>4}  {:>9}  {:<16}  doc", "rank", "score", "id")?;
    for (i, (id, score)) in ranked.entries.iter().enumerate() {
        let doc = corpus
            .entries
            .iter()
            .find(|e| &e.id == id)
            .map_or("", |e| e.doc.as_str());
        writeln!(out, "{:>4}  {:>9.6}  {:<16}  {doc}", i + 1, score, id)?;
    }
    out.flush()
}

pub fn search(args: &SearchArgs, cfg: &mut RunConfig) -> Result<()> {
    let loaded = load_inputs(cfg, cfg.index.is_some())?;
    let params = &loaded.checkpoint.params;
    let c = &params.config;
    // With GloVe the full file is kept so any query word can be looked up.
    let glove = cfg.embeddings.as_deref().map(|p| load_embeddings(p, None)).transpose()?;
    let corpus_table = match &glove {
        Some(t) => t.clone(),
        None => features_for(cfg, c, &[&loaded.corpus])?,
    };
    let prepared = PreparedCorpus::new(&loaded.corpus, &corpus_table, &params.relations)?;
    let index = load_index(cfg, &loaded.checkpoint)?;
    let retriever = Retriever::new(params, &prepared, index.as_ref())?;

    let run_query = |query: &str, parse: Option<&str>| -> Result<RankedList> {
        let q_graph = text_graph_for(query, parse)?;
        let table = match &glove {
            Some(t) => t.clone(),
            None => feature_table(None, [&q_graph], c.input_dim, c.seed)?,
        };
        let q = prepare_query(query, parse, &table, &params.relations)?;
        retriever.search(&q, cfg.top_k)
    };
    let stdout = io::stdout();
    match (&args.query, args.repl) {
        (Some(q), false) => {
            let ranked = run_query(q, args.parse.as_deref())?;
            print_ranked(&mut stdout.lock(), &ranked, &loaded.corpus, args.json).map_err(|e| Error::io("<stdout>", e))
        }
        _ => {
            if let Some(q) = &args.query {
                let ranked = run_query(q, args.parse.as_deref())?;
                print_ranked(&mut stdout.lock(), &ranked, &loaded.corpus, args.json)
                    .map_err(|e| Error::io("<stdout>", e))?;
            }
            for line in io::stdin().lock().lines() {
                let line = line.map_err(|e| Error::io("<stdin>", e))?;
                let q = line.trim();
                if q.is_empty() {
                    continue;
                }
                match run_query(q, None) {
                    Ok(ranked) => print_ranked(&mut stdout.lock(), &ranked, &loaded.corpus, args.json)
                        .map_err(|e| Error::io("<stdout>", e))?,
                    // A bad query should not end the session.
                    Err(e) => eprintln!("error: {e}"),
                }
            }
            Ok(())
        }
    }
}
