//! End-to-end execution of a scenario request.
//!
//! Every language is loaded and split once per invocation, so all runs of
//! one request evaluate on identical test sets. The training seed depends
//! only on the request seed, never on the scenario kind or language; a
//! single-member family therefore reproduces the monolingual run exactly.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use chrono::{DateTime, Utc};
use log::info;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::manifest::{BackendInfo, LanguageResult, LeakageCheck, RunFailure, SplitSizes, Timing};
use super::split::{optional_language_cap, record_identities, split_indices};
use super::{FamilyRegistry, RunManifest, RunStatus, ScenarioError, ScenarioKind, ScenarioSpec};
use crate::corpus::io::{corpus_path, read_records, read_stats, sha256_hex, stats_path, write_atomic};
use crate::corpus::{compute_stats, CorpusStats, Record, Split};
use crate::embeddings::{Backend, EmbeddingCache};
use crate::evaluation::{evaluate_run, render_report, write_dump, Axis};
use crate::lang::Language;
use crate::models::{train, Model, ModelError, ModelFamily, TrainConfig, TrainOverrides};

pub const MODEL_DIR: &str = "model";
pub const FAILED_DIR: &str = "failed";

/// A scenario configuration file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioRequest {
    pub kind: ScenarioKind,
    /// Monolingual: one run per language. Multilingual: the training set.
    /// Defaults to every configured language.
    #[serde(default)]
    pub languages: Option<Vec<String>>,
    /// Subset of the training languages to evaluate on.
    #[serde(default)]
    pub test_languages: Option<Vec<String>>,
    #[serde(default)]
    pub family: Option<String>,
    pub model: String,
    #[serde(default)]
    pub backend: Option<String>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub test_ratio: Option<f64>,
    #[serde(default)]
    pub cap_per_language: Option<usize>,
    #[serde(default)]
    pub train: TrainOverrides,
}

impl ScenarioRequest {
    pub fn from_toml(text: &str) -> Result<Self, ScenarioError> {
        toml::from_str(text).map_err(|e| ScenarioError::Invalid(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, ScenarioError> {
        let text = fs::read_to_string(path).map_err(|e| ScenarioError::io(path, e))?;
        toml::from_str(&text).map_err(|e| ScenarioError::Invalid(format!("{}: {e}", path.display())))
    }

    pub fn model_family(&self) -> Result<ModelFamily, ScenarioError> {
        Ok(self.model.parse::<ModelFamily>()?)
    }
}

/// Everything a run needs besides the request itself.
#[derive(Clone)]
pub struct RunContext {
    pub corpus_dir: PathBuf,
    pub runs_dir: PathBuf,
    /// Languages with a configured corpus, in the order used by default.
    pub languages: BTreeSet<Language>,
    pub families: FamilyRegistry,
    pub backend: Backend,
    pub cache: Option<Arc<EmbeddingCache>>,
    /// Used when the request does not set a seed.
    pub seed: u64,
    /// Used when the request does not set a ratio.
    pub test_ratio: f64,
    pub force: bool,
    /// Worker threads for independent monolingual runs.
    pub jobs: usize,
}

/// One loaded and split language.
struct LanguageData {
    hash: String,
    stats: CorpusStats,
    train: Vec<Record>,
    test: Vec<Record>,
    train_ids: Vec<String>,
    test_ids: Vec<String>,
}

struct Planned {
    spec: ScenarioSpec,
    run_id: String,
}

/// Reference time for run ids and manifests; honours `SOURCE_DATE_EPOCH`.
pub fn now_utc() -> DateTime<Utc> {
    std::env::var("SOURCE_DATE_EPOCH")
        .ok()
        .and_then(|s| s.trim().parse::<i64>().ok())
        .and_then(|s| DateTime::from_timestamp(s, 0))
        .unwrap_or_else(Utc::now)
}

fn resolve(codes: &[String], known: &BTreeSet<Language>) -> Result<BTreeSet<Language>, ScenarioError> {
    codes
        .iter()
        .map(|c| {
            let lang = Language::new(c).map_err(|e| ScenarioError::Invalid(e.to_string()))?;
            if !known.contains(&lang) {
                return Err(ScenarioError::Invalid(format!("language {c} has no configured corpus")));
            }
            Ok(lang)
        })
        .collect()
}

/// Expands a request into validated per-run specs.
pub fn plan_specs(req: &ScenarioRequest, ctx: &RunContext) -> Result<Vec<ScenarioSpec>, ScenarioError> {
    let model_family = req.model_family()?;
    let seed = req.seed.unwrap_or(ctx.seed);
    let train_config = req.train.apply(TrainConfig::for_family(model_family)).with_seed(seed);
    let selected = match &req.languages {
        Some(codes) => resolve(codes, &ctx.languages)?,
        None => ctx.languages.clone(),
    };
    let spec = |kind, family: Option<String>, train: BTreeSet<Language>, test: BTreeSet<Language>| ScenarioSpec {
        kind,
        family,
        train_languages: train,
        test_languages: test,
        model_family,
        train_config: train_config.clone(),
        seed,
    };
    let test_subset = |train: &BTreeSet<Language>| -> Result<BTreeSet<Language>, ScenarioError> {
        match &req.test_languages {
            Some(codes) => resolve(codes, &ctx.languages),
            None => Ok(train.clone()),
        }
    };
    let specs = match req.kind {
        ScenarioKind::Monolingual => {
            if req.family.is_some() || req.test_languages.is_some() {
                return Err(ScenarioError::Invalid("monolingual scenarios take only `languages`".into()));
            }
            selected.iter().map(|l| spec(req.kind, None, [l.clone()].into(), [l.clone()].into())).collect()
        }
        ScenarioKind::Multilingual => {
            if req.family.is_some() {
                return Err(ScenarioError::Invalid("multilingual scenarios take no `family`".into()));
            }
            vec![spec(req.kind, None, selected.clone(), test_subset(&selected)?)]
        }
        ScenarioKind::LanguageFamily => {
            let Some(name) = &req.family else {
                return Err(ScenarioError::Invalid("language_family scenarios need `family`".into()));
            };
            if req.languages.is_some() {
                return Err(ScenarioError::Invalid(
                    "language_family scenarios take their languages from the family; use `test_languages`".into(),
                ));
            }
            let members = ctx.families.get(name)?.clone();
            if let Some(l) = members.iter().find(|l| !ctx.languages.contains(l)) {
                return Err(ScenarioError::Invalid(format!("family {name} member {l} has no configured corpus")));
            }
            vec![spec(req.kind, Some(name.clone()), members.clone(), test_subset(&members)?)]
        }
    };
    for s in &specs {
        let available = if s.kind == ScenarioKind::Multilingual { &selected } else { &ctx.languages };
        s.validate(available, &ctx.families)?;
    }
    Ok(specs)
}

fn load_language(
    lang: &Language,
    ctx: &RunContext,
    test_ratio: f64,
    seed: u64,
) -> Result<LanguageData, ScenarioError> {
    let path = corpus_path(&ctx.corpus_dir, lang);
    let bytes = fs::read(&path).map_err(|e| ScenarioError::io(&path, e))?;
    let records = read_records(&path)?;
    let sidecar = stats_path(&ctx.corpus_dir, lang);
    let stats = if sidecar.is_file() { read_stats(&sidecar)? } else { compute_stats(&records)? };
    let ids = record_identities(&records);
    let (train_idx, test_idx) = split_indices(&records, test_ratio, seed)?;
    let pick = |idx: &[usize], split: Split| -> (Vec<Record>, Vec<String>) {
        idx.iter().map(|&i| (records[i].clone().with_split(split), ids[i].clone())).unzip()
    };
    let (train, train_ids) = pick(&train_idx, Split::Train);
    let (test, test_ids) = pick(&test_idx, Split::Test);
    Ok(LanguageData { hash: sha256_hex(&bytes), stats, train, test, train_ids, test_ids })
}

fn short_hash(value: &serde_json::Value) -> String {
    sha256_hex(value.to_string().as_bytes())[..12].to_owned()
}

fn existing_runs(runs_dir: &Path, hash: &str) -> Result<Vec<PathBuf>, ScenarioError> {
    let suffix = format!("-{hash}");
    let entries = match fs::read_dir(runs_dir) {
        Ok(e) => e,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(ScenarioError::io(runs_dir, e)),
    };
    let mut out = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|e| ScenarioError::io(runs_dir, e))?;
        if entry.file_name().to_string_lossy().ends_with(&suffix) {
            out.push(entry.path());
        }
    }
    Ok(out)
}

/// Runs every model the request implies and returns their manifests in
/// language order. All validation, corpus loading and splitting happen
/// before the first model is trained.
pub fn run_scenario(req: &ScenarioRequest, ctx: &RunContext) -> Result<Vec<RunManifest>, ScenarioError> {
    let specs = plan_specs(req, ctx)?;
    let model_family = req.model_family()?;
    if ctx.backend.granularity() != model_family.granularity() {
        return Err(ModelError::BackendMismatch {
            family: model_family,
            expected: model_family.granularity(),
            found: ctx.backend.granularity(),
        }
        .into());
    }
    let test_ratio = req.test_ratio.unwrap_or(ctx.test_ratio);
    let seed = req.seed.unwrap_or(ctx.seed);
    if let Some(0) = req.cap_per_language {
        return Err(ScenarioError::Invalid("cap_per_language must be at least 1".into()));
    }

    let needed: BTreeSet<Language> =
        specs.iter().flat_map(|s| s.train_languages.iter().chain(&s.test_languages)).cloned().collect();
    for lang in &needed {
        let path = corpus_path(&ctx.corpus_dir, lang);
        if !path.is_file() {
            return Err(ScenarioError::MissingCorpus { language: lang.to_string(), path });
        }
    }
    let data: BTreeMap<Language, LanguageData> = needed
        .iter()
        .map(|l| load_language(l, ctx, test_ratio, seed).map(|d| (l.clone(), d)))
        .collect::<Result<_, _>>()?;

    let embedding_input = if model_family == ModelFamily::ContextualFinetune
        && data.values().all(|d| d.train.iter().all(|r| r.raw.is_some()))
    {
        "raw"
    } else {
        "cleaned"
    };
    let scenario_hash = short_hash(&serde_json::json!({
        "request": req,
        "specs": specs,
        "corpus_hashes": data.iter().map(|(l, d)| (l.code(), &d.hash)).collect::<BTreeMap<_, _>>(),
        "test_ratio": test_ratio,
        "backend": ctx.backend.id(),
    }));

    let stamp = now_utc().format("%Y%m%dT%H%M%SZ").to_string();
    let mut planned = Vec::new();
    for spec in specs {
        let hashes: BTreeMap<&str, &str> = spec
            .train_languages
            .iter()
            .chain(&spec.test_languages)
            .map(|l| (l.code(), data[l].hash.as_str()))
            .collect();
        let hash = short_hash(&serde_json::json!({
            "scenario": spec,
            "corpus_hashes": hashes,
            "test_ratio": test_ratio,
            "cap_per_language": req.cap_per_language,
            "backend": ctx.backend.id(),
            "embedding_input": embedding_input,
        }));
        let existing = existing_runs(&ctx.runs_dir, &hash)?;
        if !existing.is_empty() {
            if !ctx.force {
                let run_id = existing[0].file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or(hash);
                return Err(ScenarioError::RunExists { run_id });
            }
            for dir in existing {
                fs::remove_dir_all(&dir).map_err(|e| ScenarioError::io(&dir, e))?;
            }
        }
        planned.push(Planned { spec, run_id: format!("{stamp}-{hash}") });
    }

    let shared = Shared { ctx, data: &data, scenario_hash, test_ratio, cap: req.cap_per_language, embedding_input };
    let results: Vec<Result<RunManifest, ScenarioError>> = if planned.len() > 1 && ctx.jobs > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(ctx.jobs)
            .build()
            .map_err(|e| ScenarioError::Stage { stage: "schedule".into(), message: e.to_string() })?;
        pool.install(|| planned.par_iter().map(|p| shared.execute(p)).collect())
    } else {
        planned.iter().map(|p| shared.execute(p)).collect()
    };
    results.into_iter().collect()
}

struct Shared<'a> {
    ctx: &'a RunContext,
    data: &'a BTreeMap<Language, LanguageData>,
    scenario_hash: String,
    test_ratio: f64,
    cap: Option<usize>,
    embedding_input: &'static str,
}

type StageResult<T> = Result<T, (&'static str, String)>;

fn at<E: std::fmt::Display>(stage: &'static str) -> impl FnOnce(E) -> (&'static str, String) {
    move |e| (stage, e.to_string())
}

impl Shared<'_> {
    fn execute(&self, p: &Planned) -> Result<RunManifest, ScenarioError> {
        let clock = Instant::now();
        let run_dir = self.ctx.runs_dir.join(&p.run_id);
        fs::create_dir_all(&run_dir).map_err(|e| ScenarioError::io(&run_dir, e))?;
        let spec = &p.spec;
        let langs: BTreeSet<&Language> = spec.train_languages.iter().chain(&spec.test_languages).collect();
        let mut manifest = RunManifest {
            run_id: p.run_id.clone(),
            status: RunStatus::Running,
            scenario: spec.clone(),
            scenario_hash: self.scenario_hash.clone(),
            corpus_hashes: langs.iter().map(|l| (l.to_string(), self.data[*l].hash.clone())).collect(),
            backend: BackendInfo {
                backend_id: self.ctx.backend.id().to_owned(),
                granularity: self.ctx.backend.granularity(),
                dim: self.ctx.backend.dim(),
            },
            model: None,
            test_ratio: self.test_ratio,
            embedding_input: self.embedding_input.to_owned(),
            cap_per_language: self.cap,
            corpus_stats: langs.iter().map(|l| (l.to_string(), self.data[*l].stats.clone())).collect(),
            split_sizes: langs
                .iter()
                .map(|l| {
                    let d = &self.data[*l];
                    (l.to_string(), SplitSizes { train: d.train.len(), test: d.test.len() })
                })
                .collect(),
            train_size: 0,
            leakage_check: None,
            history: Vec::new(),
            results: Vec::new(),
            code_version: env!("CARGO_PKG_VERSION").to_owned(),
            timing: Timing { started_at: now_utc().to_rfc3339(), finished_at: None, wall_clock_seconds: None },
            error: None,
        };
        manifest.write(&run_dir)?;
        info!("run {}: {} {} on {:?}", p.run_id, spec.kind, spec.model_family, spec.train_languages);

        match self.stages(&mut manifest, &run_dir) {
            Ok(()) => {
                manifest.status = RunStatus::Completed;
                manifest.timing.finished_at = Some(now_utc().to_rfc3339());
                manifest.timing.wall_clock_seconds = Some(clock.elapsed().as_secs_f64());
                let report = render_report(std::slice::from_ref(&manifest), Axis::Scenario)?;
                write_file(&run_dir.join("report.md"), report.to_markdown().as_bytes())?;
                write_file(&run_dir.join("report.txt"), report.to_text().as_bytes())?;
                manifest.write(&run_dir)?;
                Ok(manifest)
            }
            Err((stage, message)) => {
                move_to_failed(&run_dir)?;
                manifest.status = RunStatus::Failed;
                manifest.timing.finished_at = Some(now_utc().to_rfc3339());
                manifest.timing.wall_clock_seconds = Some(clock.elapsed().as_secs_f64());
                manifest.error = Some(RunFailure { stage: stage.to_owned(), message: message.clone() });
                manifest.write(&run_dir)?;
                Err(ScenarioError::Stage { stage: stage.to_owned(), message })
            }
        }
    }

    fn stages(&self, manifest: &mut RunManifest, run_dir: &Path) -> StageResult<()> {
        let spec = manifest.scenario.clone();
        let backend = &self.ctx.backend;
        let cache = self.ctx.cache.as_deref();

        // Concatenation in language order; `fit` reshuffles every epoch.
        let mut train_records = Vec::new();
        let mut train_ids = HashSet::new();
        for l in &spec.train_languages {
            train_records.extend(self.data[l].train.iter().cloned());
            train_ids.extend(self.data[l].train_ids.iter().cloned());
        }
        if let Some(cap) = self.cap {
            train_records = optional_language_cap(&train_records, cap, spec.seed).map_err(at("cap"))?;
        }
        manifest.train_size = train_records.len();

        let mut test_ids = HashSet::new();
        for l in &spec.test_languages {
            test_ids.extend(self.data[l].test_ids.iter().cloned());
        }
        let check = LeakageCheck {
            train_records: train_ids.len(),
            test_records: test_ids.len(),
            intersection: train_ids.intersection(&test_ids).count(),
        };
        manifest.leakage_check = Some(check);
        if check.intersection > 0 {
            return Err(("leakage_check", format!("{} records occur in both train and test", check.intersection)));
        }

        let mut model = Model::for_backend(spec.model_family, backend, &spec.train_config).map_err(at("build_model"))?;
        manifest.model = Some(model.spec().clone());
        manifest.write(run_dir).map_err(at("write_manifest"))?;
        manifest.history =
            train(&mut model, &train_records, backend, cache, &spec.train_config).map_err(at("train"))?;
        model.save(&run_dir.join(MODEL_DIR), &spec.train_config).map_err(at("save_model"))?;

        for l in &spec.test_languages {
            let d = &self.data[l];
            let eval = evaluate_run(&model, &d.test, backend, cache, spec.train_config.batch_size).map_err(at("evaluate"))?;
            let rel = PathBuf::from("predictions").join(format!("{}.jsonl", l.code()));
            let hashes: Vec<String> = d.test.iter().map(Record::content_hash).collect();
            let labels: Vec<_> = d.test.iter().map(|r| r.label).collect();
            write_dump(&run_dir.join(&rel), &hashes, &labels, &eval.predictions).map_err(at("write_predictions"))?;
            manifest.results.push(LanguageResult {
                language: l.clone(),
                n_test: d.test.len(),
                metrics: eval.metrics,
                confusion: eval.confusion,
                predictions: rel,
            });
        }
        Ok(())
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), ScenarioError> {
    write_atomic(path, bytes).map_err(|e| ScenarioError::io(path, e))
}

/// Moves everything in `run_dir` under `run_dir/failed/`.
fn move_to_failed(run_dir: &Path) -> Result<(), ScenarioError> {
    let failed = run_dir.join(FAILED_DIR);
    fs::create_dir_all(&failed).map_err(|e| ScenarioError::io(&failed, e))?;
    for entry in fs::read_dir(run_dir).map_err(|e| ScenarioError::io(run_dir, e))? {
        let entry = entry.map_err(|e| ScenarioError::io(run_dir, e))?;
        if entry.file_name() == FAILED_DIR {
            continue;
        }
        let to = failed.join(entry.file_name());
        fs::rename(entry.path(), &to).map_err(|e| ScenarioError::io(&to, e))?;
    }
    Ok(())
}
