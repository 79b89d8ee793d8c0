use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use agenda_core::corpus::{
    ingest_manifest, read_documents, read_manifest, write_documents, CleaningRules, Corpus, Lexicon,
    SegmentConfig,
};
use agenda_core::evaluation::{score, GoldLabels, MetricsReport};
use agenda_core::phraser::{learn_phrases, PhraseConfig};
use agenda_core::pipeline::{
    apply_phrases, build_index, prepare, run_query, sentence_streams, train_embeddings, BenchmarkConfig,
    PrepareConfig, QueryOutcome,
};
use agenda_core::report::{timestamp_now, QueryReport};
use agenda_core::retrieval::{ascending, nearest_words, read_queries, write_hits_csv, write_queries, AgendaQuery, DocLabel};
use agenda_core::skipgram::{EmbeddingFormat, Embeddings, TrainConfig};
use agenda_core::synth::{generate, SynthConfig};
use agenda_core::vectorizer::{embed_query, save_paragraph_vectors, TfidfStats};
use agenda_core::workspace::{Study, Workspace};
use sha2::{Digest, Sha256};

use crate::config::{CorpusSection, EmbeddingSection, EvaluationSection, FormatName, PipelineConfig, QuerySection};
use crate::error::{require, CliError, CliResult};
use crate::{Command, Order, QueryArgs, TrainArgs};

pub fn run(command: Command) -> CliResult<()> {
    match command {
        Command::Synth { out, seed, study_docs } => synth(&out, seed, study_docs),
        Command::Ingest {
            ws,
            manifest,
            background,
            rules,
            lexicon,
            min_paragraph_tokens,
            page_delimiter,
        } => {
            let section = CorpusSection {
                rules,
                lexicon,
                min_paragraph_tokens,
                page_delimiter,
                ..CorpusSection::default()
            };
            ingest(&Workspace::new(ws.workspace), &manifest, background, &section)
        }
        Command::Phrases {
            ws,
            min_pair_count,
            score_threshold,
            passes,
        } => {
            let mut config = PhraseConfig::default();
            if let Some(v) = min_pair_count {
                config.min_pair_count = v;
            }
            if let Some(v) = score_threshold {
                config.score_threshold = v;
            }
            if let Some(v) = passes {
                config.passes = v;
            }
            phrases(&Workspace::new(ws.workspace), &config)
        }
        Command::Train { ws, args } => {
            let ws = Workspace::new(ws.workspace);
            let (section, out) = train_settings(&args)?;
            train(&ws, &section, out).map(|_| ())
        }
        Command::Vectorize { ws } => vectorize(&Workspace::new(ws.workspace)),
        Command::Neighbors { ws, term, k } => neighbors(&Workspace::new(ws.workspace), &term, k),
        Command::Query { ws, q, order, out } => {
            let ws = Workspace::new(ws.workspace);
            query(&ws, &resolve_queries(&ws, &q)?, order, out.as_deref())
        }
        Command::Classify { ws, q, out } => {
            let ws = Workspace::new(ws.workspace);
            let queries = resolve_queries(&ws, &q)?;
            let out = out.unwrap_or_else(|| ws.labels());
            classify(&ws, &queries, &out).map(|_| ())
        }
        Command::Evaluate { ws, gold, labels, out } => {
            let ws = Workspace::new(ws.workspace);
            let labels = labels.unwrap_or_else(|| ws.labels());
            evaluate(&ws, &gold, &labels, out.as_deref()).map(|_| ())
        }
        Command::Report { ws, q, out } => {
            let ws = Workspace::new(ws.workspace);
            let queries = resolve_queries(&ws, &q)?;
            let out = out.unwrap_or_else(|| ws.reports());
            report(&ws, &queries, &out)
        }
        Command::Pipeline {
            config,
            seed,
            workers,
            threshold,
            out,
        } => {
            let mut config = PipelineConfig::load(&config)?;
            if let Some(seed) = seed {
                config.embedding.train.seed = seed;
            }
            if let Some(workers) = workers {
                config.embedding.train.workers = workers;
            }
            if threshold.is_some() {
                config.queries.threshold = threshold;
            }
            if out.is_some() {
                config.out = out;
            }
            pipeline(&config)
        }
    }
}

fn create_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::internal(format!("{}: {e}", dir.display())))
}

fn synth(out: &Path, seed: u64, study_docs: usize) -> CliResult<()> {
    if study_docs == 0 {
        return Err(CliError::validation("--study-docs must be at least 1"));
    }
    create_dir(out)?;
    let bench = generate(&SynthConfig {
        seed,
        study_docs,
        ..SynthConfig::default()
    });
    let paths = bench.write(out)?;
    let mut train = BenchmarkConfig::default().train;
    train.seed = seed;
    let config = PipelineConfig {
        out: Some("workspace".into()),
        seed: Some(seed),
        workers: Some(1),
        corpus: CorpusSection {
            study_manifest: Some("study_manifest.csv".into()),
            background_manifest: Some("background_manifest.csv".into()),
            ..CorpusSection::default()
        },
        phrases: Some(PhraseConfig::default()),
        embedding: EmbeddingSection {
            train,
            format: FormatName::Text,
        },
        queries: QuerySection {
            file: Some("queries.jsonl".into()),
            threshold: None,
        },
        evaluation: EvaluationSection {
            gold: Some("gold.csv".into()),
        },
    };
    let config_path = out.join("pipeline.toml");
    fs::write(&config_path, config.to_toml())?;
    println!(
        "wrote {} study and {} background documents, {} queries",
        bench.study.len(),
        bench.background.len(),
        bench.queries.len()
    );
    for p in [&paths.study_manifest, &paths.background_manifest, &paths.gold, &paths.queries, &config_path] {
        println!("  {}", p.display());
    }
    Ok(())
}

fn prepare_config(section: &CorpusSection) -> CliResult<PrepareConfig> {
    let mut config = PrepareConfig::default();
    if let Some(rules) = &section.rules {
        require(rules)?;
        config.cleaning = CleaningRules::from_json_file(rules)?;
    }
    if let Some(lexicon) = &section.lexicon {
        require(lexicon)?;
        config.lexicon = Some(Lexicon::load(lexicon)?);
    }
    if let Some(n) = section.min_paragraph_tokens {
        config.segment = SegmentConfig::with_min_tokens(n);
    }
    if let Some(d) = &section.page_delimiter {
        config.page_delimiter = d.replace("\\f", "\u{0C}");
    }
    Ok(config)
}

fn ingest(ws: &Workspace, manifest: &Path, background: bool, section: &CorpusSection) -> CliResult<()> {
    require(manifest)?;
    let config = prepare_config(section)?;
    let entries = read_manifest(manifest)?;
    if entries.is_empty() {
        return Err(CliError::validation(format!("{} lists no documents", manifest.display())));
    }
    for e in &entries {
        require(&e.path)?;
    }
    let corpus = prepare(&ingest_manifest(&entries, &config.page_delimiter)?, &config)?;
    create_dir(ws.root())?;
    let out = if background { ws.background() } else { ws.documents() };
    write_documents(&out, &corpus)?;
    let corrections: usize = corpus.documents().iter().map(|d| d.corrections.len()).sum();
    println!(
        "{}: {} documents, {} paragraphs, {} spelling corrections",
        out.display(),
        corpus.len(),
        corpus.paragraphs().count(),
        corrections
    );
    Ok(())
}

fn load_corpus(path: &Path) -> CliResult<Corpus> {
    require(path)?;
    Ok(read_documents(path)?)
}

fn phrases(ws: &Workspace, config: &PhraseConfig) -> CliResult<()> {
    let background = load_corpus(&ws.background())?;
    let table = learn_phrases(&sentence_streams(&background), config)?;
    table.save(&ws.phrases())?;
    println!("{}: {} phrases over {} passes", ws.phrases().display(), table.len(), table.pass_count());
    Ok(())
}

fn train_settings(args: &TrainArgs) -> CliResult<(EmbeddingSection, Option<PathBuf>)> {
    let mut section = match &args.config {
        Some(path) => PipelineConfig::load(path)?.embedding,
        None => EmbeddingSection::default(),
    };
    let t = &mut section.train;
    let overrides = [
        (&mut t.dim, args.dim),
        (&mut t.window, args.window),
        (&mut t.negatives, args.negatives),
        (&mut t.min_count, args.min_count),
        (&mut t.epochs, args.epochs),
        (&mut t.workers, args.workers),
    ];
    for (field, value) in overrides {
        if let Some(v) = value {
            *field = v;
        }
    }
    if let Some(v) = args.seed {
        t.seed = v;
    }
    if let Some(v) = args.learning_rate {
        t.learning_rate = v;
    }
    if let Some(f) = args.format {
        section.format = f.into();
    }
    Ok((section, args.out.clone()))
}

fn sha256_hex(path: &Path) -> CliResult<String> {
    let bytes = fs::read(path)?;
    Ok(Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect())
}

fn train(ws: &Workspace, section: &EmbeddingSection, out: Option<PathBuf>) -> CliResult<Embeddings> {
    let config: &TrainConfig = &section.train;
    config.validate()?;
    let background = load_corpus(&ws.background())?;
    let mut streams = sentence_streams(&background);
    if let Some(table) = ws.load_phrases()? {
        streams = streams.iter().map(|s| table.apply(s)).collect();
    }
    let emb = train_embeddings(&streams, config)?;
    let format: EmbeddingFormat = section.format.into();
    let out = out.unwrap_or_else(|| ws.embeddings_as(format));
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        create_dir(dir)?;
    }
    emb.save_as(&out, format)?;
    println!(
        "{}: {} words, dimension {}, sha256 {}",
        out.display(),
        emb.len(),
        emb.dim(),
        sha256_hex(&out)?
    );
    Ok(emb)
}

fn load_embeddings(ws: &Workspace) -> CliResult<Embeddings> {
    let path = ws.embeddings();
    require(&path)?;
    Ok(Embeddings::load(&path)?)
}

fn vectorize(ws: &Workspace) -> CliResult<()> {
    let mut study = load_corpus(&ws.documents())?;
    if let Some(table) = ws.load_phrases()? {
        apply_phrases(&mut study, &table);
    }
    let emb = load_embeddings(ws)?;
    let index = build_index(&study, &emb)?;
    index.stats.save(&ws.stats())?;
    save_paragraph_vectors(&ws.vectors(), &index.vectors)?;
    let retrievable = index.vectors.iter().filter(|v| v.retrievable).count();
    let coverage = index.vectors.iter().map(|v| v.coverage).sum::<f64>() / index.vectors.len() as f64;
    println!(
        "{} paragraphs embedded, {} retrievable, mean vocabulary coverage {:.3}",
        index.vectors.len(),
        retrievable,
        coverage
    );
    Ok(())
}

fn neighbors(ws: &Workspace, term: &str, k: usize) -> CliResult<()> {
    let emb = load_embeddings(ws)?;
    let v = embed_query(&[term.to_owned()], &TfidfStats::default(), &emb)?;
    for n in nearest_words(&v, &emb, k, &[term.to_owned()])? {
        println!("{:.4}\t{}", n.similarity, n.token);
    }
    Ok(())
}

/// Parses `label:term1,term2`.
fn parse_inline(text: &str) -> CliResult<AgendaQuery> {
    let (label, terms) = text
        .split_once(':')
        .ok_or_else(|| CliError::validation(format!("query `{text}` is not of the form label:term1,term2")))?;
    let terms: Vec<String> = terms.split(',').map(|t| t.trim().to_lowercase()).filter(|t| !t.is_empty()).collect();
    let q = AgendaQuery {
        label: label.trim().to_owned(),
        terms,
        threshold: agenda_core::retrieval::DEFAULT_THRESHOLD,
        notes: String::new(),
    };
    q.validate()?;
    Ok(q)
}

fn resolve_queries(ws: &Workspace, args: &QueryArgs) -> CliResult<Vec<AgendaQuery>> {
    let mut queries = if args.query.is_empty() {
        let path = args.queries.clone().unwrap_or_else(|| ws.queries());
        require(&path)?;
        read_queries(&path)?
    } else {
        args.query.iter().map(|s| parse_inline(s)).collect::<CliResult<_>>()?
    };
    if queries.is_empty() {
        return Err(CliError::validation("no queries given"));
    }
    if let Some(t) = args.threshold {
        for q in &mut queries {
            q.threshold = t;
            q.validate()?;
        }
    }
    Ok(queries)
}

fn load_study(ws: &Workspace) -> CliResult<Study> {
    for p in [ws.documents(), ws.embeddings(), ws.stats(), ws.vectors().with_extension("bin")] {
        require(&p)?;
    }
    Ok(ws.load_study()?)
}

fn run_all(study: &Study, queries: &[AgendaQuery]) -> CliResult<Vec<QueryOutcome>> {
    queries
        .iter()
        .map(|q| run_query(q, &study.embeddings, &study.index).map_err(CliError::from))
        .collect()
}

fn excerpt(text: &str, max: usize) -> String {
    if text.chars().count() <= max {
        text.to_owned()
    } else {
        let cut: String = text.chars().take(max).collect();
        format!("{cut}...")
    }
}

fn query(ws: &Workspace, queries: &[AgendaQuery], order: Order, out: Option<&Path>) -> CliResult<()> {
    let study = load_study(ws)?;
    let mut outcomes = run_all(&study, queries)?;
    for o in &mut outcomes {
        if order == Order::Asc {
            o.hits.sort_by(ascending);
        }
        println!("# {} (threshold {:.2}): {} hits", o.query.label, o.query.threshold, o.hits.len());
        for h in &o.hits {
            println!("{:.4}\t{}\tp.{}\t{}", h.similarity, h.para_id, h.page_number, excerpt(&h.excerpt, 100));
        }
    }
    if let Some(out) = out {
        let rows: Vec<(&str, &_)> = outcomes
            .iter()
            .flat_map(|o| o.hits.iter().map(move |h| (o.query.label.as_str(), h)))
            .collect();
        write_hits_csv(out, &rows)?;
    }
    Ok(())
}

fn write_labels(path: &Path, labels: &[DocLabel]) -> CliResult<()> {
    let err = |e: csv::Error| CliError::internal(format!("{}: {e}", path.display()));
    let mut w = csv::Writer::from_path(path).map_err(err)?;
    for l in labels {
        w.serialize(l).map_err(err)?;
    }
    w.flush().map_err(CliError::from)
}

fn read_labels(path: &Path) -> CliResult<Vec<DocLabel>> {
    require(path)?;
    let mut reader = csv::Reader::from_path(path).map_err(|e| CliError::internal(format!("{}: {e}", path.display())))?;
    reader
        .deserialize()
        .collect::<Result<Vec<DocLabel>, _>>()
        .map_err(|e| CliError::validation(format!("{}: {e}", path.display())))
}

fn classify(ws: &Workspace, queries: &[AgendaQuery], out: &Path) -> CliResult<Vec<DocLabel>> {
    let study = load_study(ws)?;
    let outcomes = run_all(&study, queries)?;
    let mut labels = Vec::new();
    for o in outcomes {
        let positive = o.labels.iter().filter(|l| l.predicted).count();
        println!(
            "{}: {positive} of {} documents at threshold {:.2}",
            o.query.label,
            o.labels.len(),
            o.query.threshold
        );
        labels.extend(o.labels);
    }
    write_labels(out, &labels)?;
    println!("labels written to {}", out.display());
    Ok(labels)
}

fn evaluate(ws: &Workspace, gold: &Path, labels: &Path, out: Option<&Path>) -> CliResult<MetricsReport> {
    require(gold)?;
    let gold = GoldLabels::from_csv(gold)?;
    let predictions = read_labels(labels)?;
    let mut countries = HashMap::new();
    if ws.documents().exists() {
        let corpus = read_documents(&ws.documents())?;
        gold.check_documents(corpus.documents().iter().map(|d| d.doc_id()))?;
        countries = corpus
            .documents()
            .iter()
            .map(|d| (d.meta.doc_id.clone(), d.meta.country.clone()))
            .collect();
    }
    let report = score(&predictions, &gold, &countries)?;
    print!("{}", report.to_table());
    if let Some(out) = out {
        report.to_csv(out)?;
    }
    Ok(report)
}

fn report(ws: &Workspace, queries: &[AgendaQuery], out: &Path) -> CliResult<()> {
    let study = load_study(ws)?;
    let corpus_name = ws
        .root()
        .canonicalize()
        .ok()
        .and_then(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()))
        .unwrap_or_else(|| "corpus".into());
    for o in run_all(&study, queries)? {
        let r = QueryReport::new(&o.query, &o.hits, &o.labels, &corpus_name, timestamp_now());
        let (txt, json) = r.write(out)?;
        println!("{}\n{}", txt.display(), json.display());
    }
    Ok(())
}

fn pipeline(config: &PipelineConfig) -> CliResult<()> {
    let missing = |what: &str| CliError::validation(format!("configuration lacks {what}"));
    let study_manifest = config.corpus.study_manifest.as_ref().ok_or_else(|| missing("corpus.study_manifest"))?;
    let background_manifest = config
        .corpus
        .background_manifest
        .as_ref()
        .ok_or_else(|| missing("corpus.background_manifest"))?;
    let out = config.out.clone().unwrap_or_else(|| PathBuf::from("workspace"));
    let ws = Workspace::new(out);

    ingest(&ws, study_manifest, false, &config.corpus)?;
    ingest(&ws, background_manifest, true, &config.corpus)?;
    match &config.phrases {
        Some(pc) => phrases(&ws, pc)?,
        None => {
            if ws.phrases().exists() {
                fs::remove_file(ws.phrases())?;
            }
        }
    }
    train(&ws, &config.embedding, None)?;
    vectorize(&ws)?;

    let args = QueryArgs {
        query: Vec::new(),
        queries: config.queries.file.clone(),
        threshold: config.queries.threshold,
    };
    let queries = resolve_queries(&ws, &args)?;
    write_queries(&ws.queries(), &queries)?;
    classify(&ws, &queries, &ws.labels())?;
    report(&ws, &queries, &ws.reports())?;
    if let Some(gold) = &config.evaluation.gold {
        let metrics = evaluate(&ws, gold, &ws.labels(), Some(&ws.root().join("metrics.csv")))?;
        println!(
            "macro F1 {:.3} over {} agendas",
            metrics.overall.macro_avg.f1,
            metrics.overall.rows.len()
        );
    }
    Ok(())
}
