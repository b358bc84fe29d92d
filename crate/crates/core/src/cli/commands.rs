use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use log::warn;

use super::{AxisArg, Cli, CliError, Command, Format, KindArg};
use crate::config::FrameworkConfig;
use crate::corpus::io::{corpus_path, read_records, read_stats, stats_json, stats_path, to_jsonl, write_atomic};
use crate::corpus::stats::{reference_drift, REFERENCE_GRAND_TOTAL, REFERENCE_TOTALS};
use crate::corpus::stopwords::Stopwords;
use crate::corpus::{build_language_corpus, compute_stats, BuildOptions, CorpusStats};
use crate::embeddings::EmbeddingCache;
use crate::evaluation::{render_report, Axis, EvalError};
use crate::lang::Language;
use crate::models::ModelFamily;
use crate::scenarios::{list_manifests, run_scenario, RunContext, RunStatus, ScenarioKind, ScenarioRequest};

pub(super) fn dispatch(cli: &Cli) -> Result<(), CliError> {
    let config = FrameworkConfig::load(&cli.config)?;
    match &cli.command {
        Command::Ingest { languages } => ingest(&config, languages),
        Command::Run { scenario } => run(&config, cli, scenario),
        Command::Report { run_ids, kind, model, family, axis, format, output } => {
            report(&config, run_ids, *kind, model.as_deref(), family.as_deref(), *axis, *format, output.as_deref())
        }
        Command::Stats { languages, reference } => stats(&config, languages, *reference),
    }
}

/// Requested languages, or every language with declared sources.
fn select_languages(config: &FrameworkConfig, codes: &[String]) -> Result<Vec<Language>, CliError> {
    let available = config.corpus_languages();
    if codes.is_empty() {
        if available.is_empty() {
            return Err(CliError::validation("the configuration declares no sources"));
        }
        return Ok(available.into_iter().collect());
    }
    let registry = config.language_registry()?;
    codes
        .iter()
        .map(|c| {
            let lang = registry.resolve(c).map_err(|e| CliError::validation(e.to_string()))?;
            if !available.contains(&lang) {
                return Err(CliError::validation(format!("no sources are declared for language {lang}")));
            }
            Ok(lang)
        })
        .collect()
}

fn write(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    write_atomic(path, bytes).map_err(|e| CliError::runtime(format!("{}: {e}", path.display())))
}

/// Builds every requested corpus in memory before writing any file, so a
/// failure leaves the corpus directory untouched.
fn ingest(config: &FrameworkConfig, codes: &[String]) -> Result<(), CliError> {
    let languages = select_languages(config, codes)?;
    let base = config.base_dir();
    for lang in &languages {
        for s in config.sources_for(lang) {
            let path = s.resolved_path(base);
            if !path.is_file() {
                return Err(CliError::validation(format!(
                    "source {} ({lang}): raw file {} not found",
                    s.source_id,
                    path.display()
                )));
            }
            if let Some(h) = &s.hydration {
                let h = base.join(h);
                if !h.is_file() {
                    return Err(CliError::validation(format!(
                        "source {} ({lang}): hydration file {} not found",
                        s.source_id,
                        h.display()
                    )));
                }
            }
        }
    }
    let registry = config.language_registry()?;
    let stopwords = Stopwords::load(&config.stopword_dir(), &languages)?;
    let options = BuildOptions { keep_raw: config.keep_raw_text, dedup: config.dedup };
    let mut built = Vec::new();
    for lang in &languages {
        let mut batches = Vec::new();
        for s in config.sources_for(lang) {
            let (batch, missing) = s.load(base, &registry)?;
            if missing > 0 {
                warn!("source {}: {missing} ids could not be hydrated and are dropped", s.source_id);
            }
            batches.push(batch);
        }
        let corpus = build_language_corpus(&batches, lang, stopwords.for_language(lang), options)?;
        built.push((lang, corpus));
    }
    let dir = config.corpus_dir();
    for (lang, corpus) in built {
        let path = corpus_path(&dir, lang);
        write(&path, to_jsonl(&corpus.records).as_bytes())?;
        write(&stats_path(&dir, lang), stats_json(&corpus.stats).as_bytes())?;
        println!(
            "{lang}: {} records, hate fraction {:.3}, {} dropped -> {}",
            corpus.stats.n_examples,
            corpus.stats.hate_fraction,
            corpus.stats.n_dropped,
            path.display()
        );
    }
    Ok(())
}

fn run(config: &FrameworkConfig, cli: &Cli, scenario: &Path) -> Result<(), CliError> {
    let mut request = ScenarioRequest::load(scenario)?;
    if let Some(seed) = cli.seed {
        request.seed = Some(seed);
    }
    let family = request.model_family()?;
    let backend_config = match cli.backend.as_deref().or(request.backend.as_deref()) {
        Some(id) => config.backend(id)?,
        None => config.default_backend(family.granularity())?,
    };
    let backend = backend_config.load(config.base_dir())?;
    let cache = match config.embedding_cache_dir() {
        Some(dir) => Some(Arc::new(EmbeddingCache::open(&dir)?)),
        None => None,
    };
    let ctx = RunContext {
        corpus_dir: config.corpus_dir(),
        runs_dir: config.runs_dir(),
        languages: config.corpus_languages(),
        families: config.family_registry()?,
        backend,
        cache,
        seed: cli.seed.unwrap_or(config.seed),
        test_ratio: config.test_ratio,
        force: cli.force,
        jobs: cli.jobs.max(1),
    };
    let manifests = run_scenario(&request, &ctx)?;
    let runs_dir = config.runs_dir();
    for m in &manifests {
        let langs: Vec<String> = m.results.iter().map(|r| r.language.to_string()).collect();
        println!("run {} completed: {} -> {}", m.run_id, langs.join(", "), runs_dir.join(&m.run_id).display());
    }
    println!();
    print!("{}", render_report(&manifests, Axis::Scenario)?.to_text());
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn report(
    config: &FrameworkConfig,
    run_ids: &[String],
    kind: Option<KindArg>,
    model: Option<&str>,
    family: Option<&str>,
    axis: AxisArg,
    format: Format,
    output: Option<&Path>,
) -> Result<(), CliError> {
    let model = model.map(|m| m.parse::<ModelFamily>()).transpose().map_err(|e| CliError::validation(e.to_string()))?;
    let kind: Option<ScenarioKind> = kind.map(Into::into);
    let manifests: Vec<_> = list_manifests(&config.runs_dir())?
        .into_iter()
        .filter(|m| m.status == RunStatus::Completed)
        .filter(|m| run_ids.is_empty() || run_ids.iter().any(|id| m.run_id == *id || m.run_id.ends_with(&format!("-{id}"))))
        .filter(|m| kind.map_or(true, |k| m.scenario.kind == k))
        .filter(|m| model.map_or(true, |f| m.scenario.model_family == f))
        .filter(|m| family.map_or(true, |f| m.scenario.family.as_deref() == Some(f)))
        .collect();
    if manifests.is_empty() {
        return Err(CliError::validation(format!("no matching runs in {}", config.runs_dir().display())));
    }
    let axis = match axis {
        AxisArg::Scenario => Axis::Scenario,
        AxisArg::Model => Axis::Model,
    };
    let report = render_report(&manifests, axis).map_err(|e| match e {
        EvalError::NoRuns => CliError::validation("no matching runs"),
        other => other.into(),
    })?;
    let rendered = match format {
        Format::Text => report.to_text(),
        Format::Markdown => report.to_markdown(),
    };
    print!("{rendered}");
    if let Some(path) = output {
        write(path, rendered.as_bytes())?;
    }
    Ok(())
}

fn stats(config: &FrameworkConfig, codes: &[String], reference: bool) -> Result<(), CliError> {
    let languages = select_languages(config, codes)?;
    let dir = config.corpus_dir();
    let mut rows: Vec<CorpusStats> = Vec::new();
    for lang in &languages {
        let path = corpus_path(&dir, lang);
        if !path.is_file() {
            return Err(CliError::validation(format!("no corpus for {lang} at {}; run `ingest` first", path.display())));
        }
        let records = read_records(&path)?;
        let computed = compute_stats(&records)?;
        let sidecar = stats_path(&dir, lang);
        let stats = if sidecar.is_file() {
            let s = read_stats(&sidecar)?;
            if (s.n_examples, s.n_hate) != (computed.n_examples, computed.n_hate) {
                return Err(CliError::runtime(format!(
                    "{}: sidecar disagrees with {} ({} / {} examples); re-run `ingest`",
                    sidecar.display(),
                    path.display(),
                    s.n_examples,
                    computed.n_examples
                )));
            }
            s
        } else {
            computed
        };
        rows.push(stats);
    }
    let mut out = String::new();
    let _ = writeln!(out, "{:<8} {:>9} {:>7} {:>8} {:>8}", "language", "examples", "hate", "fraction", "dropped");
    for s in &rows {
        let _ = writeln!(
            out,
            "{:<8} {:>9} {:>7} {:>8.3} {:>8}",
            s.language.code(),
            s.n_examples,
            s.n_hate,
            s.hate_fraction,
            s.n_dropped
        );
    }
    let total: usize = rows.iter().map(|s| s.n_examples).sum();
    let hate: usize = rows.iter().map(|s| s.n_hate).sum();
    let _ = writeln!(out, "{:<8} {:>9} {:>7}", "total", total, hate);
    if reference {
        out.push_str("\nComparison with the published full-size collections (tweet decay makes drift expected):\n");
        let mut by_lang = BTreeMap::new();
        for s in &rows {
            if let Some(d) = reference_drift(s) {
                by_lang.insert(s.language.report_rank(), d);
            }
        }
        if by_lang.is_empty() {
            out.push_str("  no built-in languages in this selection\n");
        }
        for d in by_lang.values() {
            let _ = writeln!(
                out,
                "  {:<3} examples {:>6} vs {:>6} ({:+}), hate fraction {:.2} vs {:.2} [{}]",
                d.language.code(),
                d.actual_examples,
                d.expected_examples,
                d.actual_examples as i64 - d.expected_examples as i64,
                d.actual_hate_fraction,
                d.expected_hate_fraction,
                if d.matches() { "match" } else { "drift" }
            );
        }
        let row_sum: usize = REFERENCE_TOTALS.iter().map(|r| r.1).sum();
        let _ = writeln!(
            out,
            "  published total {REFERENCE_GRAND_TOTAL} (per-language rows sum to {row_sum}); built total {total}"
        );
    }
    print!("{out}");
    Ok(())
}
