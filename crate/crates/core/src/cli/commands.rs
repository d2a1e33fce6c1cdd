use std::collections::{BTreeSet, HashMap};
use std::fs::{self, File};
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Deserialize;
use serde_json::{json, Map, Value};

use super::*;
use crate::corpus::{
    compute_stats_with_overrides, count_chars, count_words, parse_corpus, parse_groups, read_examples,
    validate_group, write_corpus, write_corpus_per_language, write_examples, Alignment, Corpus,
    InstructionExample, Language, ParseFailure, ParseOptions, Source,
};
use crate::evaluator::{
    delta_report, read_gold, read_scores, render_table, score_dataset, AccuracyTable, EvalConfig,
    EvalError, Normalization, RenderOptions, ScoredDataset, TableFormat,
};
use crate::ingest::{
    convert_belebele, read_belebele, read_jobs, run_checkpointed, translate_examples, CheckpointError,
    EndpointConfig, HttpChatClient, RunOptions, Secret, TranslateError, EXAMPLES_FILE,
};
use crate::segmenter::segment;
use crate::synthesizer::{
    synthesize_concat_dataset, synthesize_csd_dataset, LanguageSet, SynthesisConfig, SynthesisError,
};

pub(super) fn dispatch(command: &Command) -> Result<i32, CliError> {
    match command {
        Command::Validate(a) => validate(a),
        Command::Stats(a) => stats(a),
        Command::Segment(a) => segment_text(a),
        Command::MakeCsd(a) => make_csd(a),
        Command::MakeConcat(a) => make_concat(a),
        Command::Score(a) => score(a),
        Command::Report(a) => report(a),
        Command::Generate(a) => generate(a),
        Command::Translate(a) => translate(a),
        Command::ConvertBelebele(a) => belebele(a),
    }
}

fn parse_language(s: &str) -> Result<Language, CliError> {
    s.parse().map_err(|_| usage(format!("unknown language `{s}` (EN, JA, KO or ZH)")))
}

fn languages_arg(args: &CorpusArgs) -> Result<Option<BTreeSet<Language>>, CliError> {
    args.languages
        .as_ref()
        .map(|ls| ls.iter().map(|l| parse_language(l)).collect())
        .transpose()
}

type Sources = Vec<Source<Box<dyn Read>>>;

/// Opens the corpus. A directory holds one `{en,ja,ko,zh}.jsonl` file per
/// language (only `wanted` ones when given); anything else is one
/// interleaved stream.
fn open_corpus(args: &CorpusArgs, wanted: Option<&BTreeSet<Language>>) -> Result<(Sources, ParseOptions), CliError> {
    let path = Path::new(&args.corpus);
    if args.corpus != "-" && path.is_dir() {
        let entries = fs::read_dir(path).map_err(|e| usage(format!("cannot read {}: {e}", path.display())))?;
        let mut files: Vec<(Language, PathBuf)> = Vec::new();
        for entry in entries {
            let p = entry.map_err(|e| usage(format!("cannot read {}: {e}", path.display())))?.path();
            let ext = p.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase);
            if !matches!(ext.as_deref(), Some("jsonl") | Some("json")) {
                continue;
            }
            let Some(lang) = p.file_stem().and_then(|s| s.to_str()).and_then(|s| s.parse::<Language>().ok()) else {
                continue;
            };
            if wanted.is_some_and(|w| !w.contains(&lang)) {
                continue;
            }
            if let Some((_, other)) = files.iter().find(|(l, _)| *l == lang) {
                return Err(usage(format!("two {lang} files: {} and {}", other.display(), p.display())));
            }
            files.push((lang, p));
        }
        if files.is_empty() {
            return Err(usage(format!("{} has no en/ja/ko/zh .jsonl files", path.display())));
        }
        if let Some(missing) = wanted.and_then(|w| w.iter().find(|l| !files.iter().any(|(f, _)| f == *l))) {
            return Err(usage(format!("{} has no {} file", path.display(), missing.code().to_lowercase())));
        }
        files.sort();
        let mut sources: Sources = Vec::new();
        for (lang, p) in files {
            let f = File::open(&p).map_err(|e| usage(format!("cannot open {}: {e}", p.display())))?;
            sources.push(Source::new(p.display().to_string(), Some(lang), Box::new(std::io::BufReader::new(f))));
        }
        let alignment = if args.positional { Alignment::Positional } else { Alignment::ById };
        let mut opts = ParseOptions::per_language(alignment);
        opts.languages = wanted.cloned();
        Ok((sources, opts))
    } else {
        if args.positional {
            return Err(usage("--positional needs a directory of per-language files"));
        }
        let reader: Box<dyn Read> = open_input(&args.corpus)?;
        let mut opts = ParseOptions::interleaved();
        opts.languages = wanted.cloned();
        Ok((vec![Source::new(args.corpus.clone(), None, reader)], opts))
    }
}

fn report_parse_failure(f: &ParseFailure) -> CliError {
    for d in &f.diagnostics {
        log::error!("{d}");
    }
    data(format!("{} parse error(s)", f.diagnostics.len()))
}

fn load_corpus(args: &CorpusArgs, wanted: Option<&BTreeSet<Language>>) -> Result<Corpus, CliError> {
    let (sources, opts) = open_corpus(args, wanted)?;
    let corpus = parse_corpus(sources, &opts).map_err(|f| report_parse_failure(&f))?;
    log::info!("read {} groups in {} language(s) from {}", corpus.len(), corpus.languages().len(), args.corpus);
    Ok(corpus)
}

fn validate(args: &CorpusArgs) -> Result<i32, CliError> {
    banner("validate", args, None);
    let wanted = languages_arg(args)?;
    let (sources, opts) = open_corpus(args, wanted.as_ref())?;
    let (groups, languages) = parse_groups(sources, &opts).map_err(|f| report_parse_failure(&f))?;
    let mut out = create_output("-")?;
    let mut bad = 0usize;
    for g in &groups {
        let report = validate_group(g, &languages);
        if !report.is_clean() {
            bad += 1;
            out.write_all(report.to_jsonl().as_bytes()).map_err(write_err("stdout"))?;
        }
    }
    out.flush().map_err(write_err("stdout"))?;
    if bad > 0 {
        log::warn!("{bad} of {} groups have violations", groups.len());
        Ok(EXIT_DATA)
    } else {
        log::info!("{} groups OK", groups.len());
        Ok(EXIT_OK)
    }
}

fn stats(args: &StatsArgs) -> Result<i32, CliError> {
    banner("stats", args, None);
    let wanted = languages_arg(&args.corpus)?;
    let corpus = load_corpus(&args.corpus, wanted.as_ref())?;

    #[derive(Deserialize)]
    struct CountLine {
        id: String,
        language: Language,
        count: u64,
    }
    let mut overrides = HashMap::new();
    if let Some(path) = &args.counts {
        for (i, line) in read_input(path)?.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let c: CountLine =
                serde_json::from_str(line).map_err(|e| data(format!("{path} line {}: {e}", i + 1)))?;
            overrides.insert((c.id, c.language), c.count);
        }
    }
    let counter: fn(&str) -> u64 = if args.unit == "words" { count_words } else { count_chars };
    let stats = compute_stats_with_overrides(&corpus, counter, &overrides);
    let mut out = create_output("-")?;
    serde_json::to_writer_pretty(&mut out, &json!({ "unit": args.unit, "stats": stats }))
        .map_err(|e| usage(e.to_string()))?;
    writeln!(out).and_then(|_| out.flush()).map_err(write_err("stdout"))?;
    Ok(EXIT_OK)
}

fn segment_text(args: &SegmentArgs) -> Result<i32, CliError> {
    let language = parse_language(&args.lang)?;
    let text = read_input(&args.input)?;
    let mut out = create_output("-")?;
    for (i, line) in text.lines().enumerate() {
        for span in segment(line, language) {
            let r = if args.json {
                serde_json::to_writer(&mut out, &json!({"line": i + 1, "start": span.start, "end": span.end, "text": span.text}))
                    .map_err(std::io::Error::from)
                    .and_then(|_| out.write_all(b"\n"))
            } else {
                writeln!(out, "{}", span.text)
            };
            r.map_err(write_err("stdout"))?;
        }
    }
    out.flush().map_err(write_err("stdout"))?;
    Ok(EXIT_OK)
}

/// The effective synthesis config: the `--config` file with flags laid over
/// it. `dataset_size` defaults to the corpus size.
fn synthesis_config(args: &SynthArgs, seed_required: bool) -> Result<(Map<String, Value>, Option<u64>), CliError> {
    let mut cfg = match &args.config {
        Some(path) => match serde_json::from_str::<Value>(&read_input(path)?) {
            Ok(Value::Object(m)) => m,
            Ok(_) => return Err(usage(format!("{path}: config must be a JSON object"))),
            Err(e) => return Err(usage(format!("{path}: {e}"))),
        },
        None => Map::new(),
    };
    if let Some(s) = &args.setting {
        let set = LanguageSet::from_setting(s).map_err(usage)?;
        cfg.insert("languages".into(), serde_json::to_value(set).expect("serializable"));
    }
    if let Some(seed) = args.seed {
        cfg.insert("master_seed".into(), seed.into());
    }
    if let Some(n) = args.size {
        cfg.insert("dataset_size".into(), n.into());
    }
    if let Some(p) = &args.policy {
        let p = if p == "strict" { "STRICT" } else { "FIELD_FALLBACK" };
        cfg.insert("alignment_policy".into(), p.into());
    }
    if args.no_min_mix {
        cfg.insert("min_mix".into(), false.into());
    }
    if !cfg.contains_key("languages") {
        return Err(usage("no language set: pass --setting or give `languages` in --config"));
    }
    let seed = cfg.get("master_seed").and_then(Value::as_u64);
    if seed.is_none() {
        if seed_required {
            return Err(usage("no seed: pass --seed or give `master_seed` in --config"));
        }
        cfg.insert("master_seed".into(), 0.into());
    }
    Ok((cfg, seed))
}

fn finish_config(mut cfg: Map<String, Value>, corpus: &Corpus) -> Result<SynthesisConfig, CliError> {
    cfg.entry("dataset_size").or_insert_with(|| corpus.len().into());
    serde_json::from_value(Value::Object(cfg)).map_err(|e| usage(format!("invalid synthesis config: {e}")))
}

fn synthesis_error(e: SynthesisError) -> CliError {
    match e {
        SynthesisError::InvalidConfig(_) => usage(e),
        _ => data(e),
    }
}

fn config_languages(cfg: &Map<String, Value>) -> Result<LanguageSet, CliError> {
    serde_json::from_value(cfg["languages"].clone()).map_err(|e| usage(format!("invalid languages: {e}")))
}

fn write_jsonl_file(path: &Path, examples: &[InstructionExample]) -> Result<(), CliError> {
    let mut w = create_output(&path.display().to_string())?;
    write_examples(examples, &mut w).and_then(|_| w.flush()).map_err(write_err(path))
}

fn make_csd(args: &SynthArgs) -> Result<i32, CliError> {
    let (cfg, _) = synthesis_config(args, true)?;
    let set = config_languages(&cfg)?;
    let wanted = languages_arg(&args.corpus)?.unwrap_or_else(|| set.to_set());
    let corpus = load_corpus(&args.corpus, Some(&wanted))?;
    let config = finish_config(cfg, &corpus)?;
    banner("make-csd", &config, Some(config.master_seed));

    let out = synthesize_csd_dataset(&corpus, &config).map_err(synthesis_error)?;
    let s = &out.stats;
    log::info!(
        "emitted {} examples ({} fallback, {} forced mix, {} skipped misaligned)",
        s.emitted, s.fallback_count, s.forced_mix_count, s.skipped_misaligned
    );
    if args.out == "-" {
        let mut w = create_output("-")?;
        write_examples(&out.dataset, &mut w).and_then(|_| w.flush()).map_err(write_err("stdout"))?;
        return Ok(EXIT_OK);
    }
    let dir = Path::new(&args.out);
    fs::create_dir_all(dir).map_err(|e| usage(format!("cannot create {}: {e}", dir.display())))?;
    write_jsonl_file(&dir.join("dataset.jsonl"), &out.dataset)?;

    let audit_path = dir.join("audit.jsonl");
    let mut w = create_output(&audit_path.display().to_string())?;
    for a in &out.audits {
        serde_json::to_writer(&mut w, a).map_err(std::io::Error::from).map_err(write_err(&audit_path))?;
        w.write_all(b"\n").map_err(write_err(&audit_path))?;
    }
    w.flush().map_err(write_err(&audit_path))?;

    let stats_path = dir.join("stats.json");
    let body = serde_json::to_string_pretty(&json!({ "config": config, "stats": out.stats })).expect("serializable");
    fs::write(&stats_path, body + "\n").map_err(write_err(&stats_path))?;
    log::info!("wrote {}", dir.display());
    Ok(EXIT_OK)
}

fn make_concat(args: &SynthArgs) -> Result<i32, CliError> {
    let (cfg, seed) = synthesis_config(args, false)?;
    let set = config_languages(&cfg)?;
    let wanted = languages_arg(&args.corpus)?.unwrap_or_else(|| set.to_set());
    let corpus = load_corpus(&args.corpus, Some(&wanted))?;
    let config = finish_config(cfg, &corpus)?;
    banner("make-concat", &config, seed);

    let dataset = synthesize_concat_dataset(&corpus, &config).map_err(synthesis_error)?;
    log::info!("emitted {} examples", dataset.len());
    if args.out == "-" {
        let mut w = create_output("-")?;
        write_examples(&dataset, &mut w).and_then(|_| w.flush()).map_err(write_err("stdout"))?;
    } else {
        let dir = Path::new(&args.out);
        fs::create_dir_all(dir).map_err(|e| usage(format!("cannot create {}: {e}", dir.display())))?;
        write_jsonl_file(&dir.join("dataset.jsonl"), &dataset)?;
    }
    Ok(EXIT_OK)
}

fn eval_error(e: EvalError) -> CliError {
    data(e)
}

fn score(args: &ScoreArgs) -> Result<i32, CliError> {
    let normalization: Normalization = args.normalization.parse().map_err(usage)?;
    let cfg = EvalConfig::new(normalization);
    banner("score", args, None);
    let gold = read_gold(open_input(&args.gold)?).map_err(|e| data(format!("{}: {e}", args.gold)))?;
    let scores = read_scores(open_input(&args.scores)?).map_err(|e| data(format!("{}: {e}", args.scores)))?;
    let mut scored = score_dataset(&gold, &scores, &cfg).map_err(eval_error)?;
    scored.table.setting_label = args.label.clone();
    let mut out = create_output(&args.out)?;
    serde_json::to_writer_pretty(&mut out, &scored).map_err(|e| usage(e.to_string()))?;
    writeln!(out).and_then(|_| out.flush()).map_err(write_err(&args.out))?;
    Ok(EXIT_OK)
}

/// A manifest table: a path to `score` output or an [`AccuracyTable`], or an
/// inline map of language codes to percentages (`Avg` keys are ignored; the
/// average is recomputed).
fn manifest_table(value: &Value, base: &Path, setting: &str) -> Result<AccuracyTable, CliError> {
    match value {
        Value::String(p) => {
            let path = base.join(p);
            let text = fs::read_to_string(&path).map_err(|e| usage(format!("cannot read {}: {e}", path.display())))?;
            let v: Value = serde_json::from_str(&text).map_err(|e| data(format!("{}: {e}", path.display())))?;
            manifest_table(&v, base, setting)
        }
        Value::Object(m) if m.contains_key("table") => serde_json::from_value::<ScoredDataset>(value.clone())
            .map(|s| s.table.with_label(setting))
            .map_err(|e| data(format!("{setting}: {e}"))),
        Value::Object(m) if m.contains_key("per_language") => serde_json::from_value::<AccuracyTable>(value.clone())
            .map(|t| t.with_label(setting))
            .map_err(|e| data(format!("{setting}: {e}"))),
        Value::Object(m) => {
            let mut cells = Vec::new();
            for (k, v) in m {
                if k.trim_end_matches('.').eq_ignore_ascii_case("avg") {
                    continue;
                }
                let l = parse_language(k)?;
                let x = v.as_f64().ok_or_else(|| data(format!("{setting}: {k} is not a number")))?;
                cells.push((l, x));
            }
            AccuracyTable::new(setting, cells).map_err(eval_error)
        }
        _ => Err(data(format!("{setting}: expected a path or an object"))),
    }
}

fn report(args: &ReportArgs) -> Result<i32, CliError> {
    let format: TableFormat = args.format.parse().map_err(usage)?;
    #[derive(Deserialize, serde::Serialize)]
    struct Entry {
        setting: String,
        csd: Value,
        concat: Value,
    }
    let text = read_input(&args.manifest)?;
    let entries: Vec<Entry> = serde_json::from_str(&text).map_err(|e| data(format!("{}: {e}", args.manifest)))?;
    banner("report", &json!({ "args": args, "manifest": entries }), None);
    let base = Path::new(&args.manifest).parent().unwrap_or(Path::new("."));
    let mut reports = Vec::new();
    for e in &entries {
        let csd = manifest_table(&e.csd, base, &e.setting)?;
        let concat = manifest_table(&e.concat, base, &e.setting)?;
        reports.push(delta_report(&csd, &concat).map_err(eval_error)?);
    }
    let options = RenderOptions { format, marker: args.marker.clone() };
    let mut out = create_output(&args.out)?;
    out.write_all(render_table(&reports, &options).as_bytes())
        .and_then(|_| out.flush())
        .map_err(write_err(&args.out))?;
    Ok(EXIT_OK)
}

fn endpoint(args: &EndpointArgs) -> Result<EndpointConfig, CliError> {
    let key = std::env::var(&args.api_key_env).unwrap_or_default();
    if key.is_empty() {
        log::warn!("{} is not set; sending requests without an API key", args.api_key_env);
    }
    let secs = |name: &str, s: f64| {
        std::time::Duration::try_from_secs_f64(s).map_err(|_| usage(format!("--{name} must be a non-negative number of seconds")))
    };
    if args.concurrency == 0 {
        return Err(usage("--concurrency must be at least 1"));
    }
    let mut cfg = EndpointConfig::new(&args.base_url, &args.model, Secret::new(key));
    cfg.max_retries = args.max_retries;
    cfg.request_timeout = secs("timeout", args.timeout)?;
    cfg.backoff_base = secs("backoff", args.backoff)?;
    cfg.concurrency_limit = args.concurrency;
    cfg.temperature = args.temperature;
    Ok(cfg)
}

fn client(cfg: &EndpointConfig) -> Result<HttpChatClient, CliError> {
    HttpChatClient::new(cfg).map_err(|e| CliError::Service(e.to_string()))
}

fn generate(args: &GenerateArgs) -> Result<i32, CliError> {
    let cfg = endpoint(&args.endpoint)?;
    banner("generate", &json!({ "endpoint": cfg, "input": args.input, "exclude_source": args.exclude_source }), None);
    let (jobs, excluded) = read_jobs(&args.input, open_input(&args.input)?, &args.exclude_source)
        .map_err(|e| usage(format!("cannot read {}: {e}", args.input)))?;
    if excluded > 0 {
        log::info!("excluded {excluded} input(s) by source");
    }
    let client = client(&cfg)?;
    let dir = Path::new(&args.out);
    let summary = run_checkpointed(&jobs, &client, &cfg, dir, RunOptions::default()).map_err(|e| match e {
        CheckpointError::Io { .. } => usage(e),
        _ => data(e),
    })?;
    log::info!("examples in {}", dir.join(EXAMPLES_FILE).display());
    let mut out = create_output("-")?;
    serde_json::to_writer(&mut out, &summary).map_err(|e| usage(e.to_string()))?;
    writeln!(out).and_then(|_| out.flush()).map_err(write_err("stdout"))?;
    if summary.failed + summary.pending > 0 {
        return Err(CliError::Service(format!("{} job(s) failed; rerun to retry them", summary.failed + summary.pending)));
    }
    Ok(EXIT_OK)
}

/// Source-text id of a generated example (`src#3` belongs to `src`).
fn batch_key(id: &str) -> &str {
    id.rsplit_once('#').map_or(id, |(k, _)| k)
}

fn translate(args: &TranslateArgs) -> Result<i32, CliError> {
    let target = parse_language(&args.target)?;
    if target == Language::En {
        return Err(usage("--target must be JA, KO or ZH"));
    }
    let cfg = endpoint(&args.endpoint)?;
    banner("translate", &json!({ "endpoint": cfg, "input": args.input, "target": target }), None);
    let examples = read_examples(Source::new(args.input.clone(), None, open_input(&args.input)?))
        .map_err(|f| report_parse_failure(&f))?;

    let mut batches: Vec<Vec<InstructionExample>> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    for ex in examples {
        let k = batch_key(&ex.id).to_string();
        let i = *index.entry(k).or_insert_with(|| {
            batches.push(Vec::new());
            batches.len() - 1
        });
        batches[i].push(ex);
    }
    let client = client(&cfg)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.concurrency_limit)
        .build()
        .map_err(|e| usage(format!("cannot start workers: {e}")))?;
    let results: Vec<Result<(Vec<InstructionExample>, u32), TranslateError>> =
        pool.install(|| batches.par_iter().map(|b| translate_examples(b, target, &client, &cfg)).collect());

    let mut translated = Vec::new();
    let mut failed = 0usize;
    for (batch, r) in batches.iter().zip(results) {
        match r {
            Ok((exs, _)) => translated.extend(exs),
            Err(TranslateError::InvalidRequest(m)) => return Err(data(m)),
            Err(e) => {
                failed += 1;
                log::error!("{}: {e}", batch_key(&batch[0].id));
            }
        }
    }
    let mut out = create_output(&args.out)?;
    write_examples(&translated, &mut out).and_then(|_| out.flush()).map_err(write_err(&args.out))?;
    log::info!("translated {} example(s) in {} batch(es)", translated.len(), batches.len() - failed);
    if failed > 0 {
        return Err(CliError::Service(format!("{failed} batch(es) failed")));
    }
    Ok(EXIT_OK)
}

fn belebele(args: &BelebeleArgs) -> Result<i32, CliError> {
    if args.out.is_none() && args.out_dir.is_none() {
        return Err(usage("pass --out or --out-dir"));
    }
    banner("convert-belebele", args, None);
    let mut records = Vec::new();
    for input in &args.input {
        let (rows, skipped) = read_belebele(input, open_input(input)?).map_err(data)?;
        for (dialect, n) in skipped {
            log::info!("{input}: skipped {n} {dialect} row(s)");
        }
        records.extend(rows.iter().filter_map(|r| r.to_record()));
    }
    let conversion = convert_belebele(&records, !args.non_strict).map_err(data)?;
    for d in &conversion.incomplete {
        let missing: Vec<&str> = d.missing.iter().map(|l| l.code()).collect();
        log::warn!("link {} lacks {}", d.link_id, missing.join(", "));
    }
    let corpus = &conversion.corpus;
    log::info!("{} groups in {} language(s)", corpus.len(), corpus.languages().len());
    if let Some(out) = &args.out {
        let mut w = create_output(out)?;
        write_corpus(corpus, &mut w).and_then(|_| w.flush()).map_err(write_err(out))?;
    }
    if let Some(dir) = &args.out_dir {
        let dir = Path::new(dir);
        fs::create_dir_all(dir).map_err(|e| usage(format!("cannot create {}: {e}", dir.display())))?;
        for (l, bytes) in write_corpus_per_language(corpus) {
            let p = dir.join(format!("{}.jsonl", l.code().to_lowercase()));
            fs::write(&p, bytes).map_err(write_err(&p))?;
        }
    }
    Ok(EXIT_OK)
}
