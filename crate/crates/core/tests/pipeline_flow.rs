//! Pipeline behavior across failures and reruns: resumable partial probes,
//! byte-for-byte reproducible reports, and a full multi-model analyze with
//! the regression stage engaged.

use stancegrid_core::corpus::synth;
use stancegrid_core::error::Error;
use stancegrid_core::gateway::mock::{MockProfile, MockResponder, SimulatorConfig};
use stancegrid_core::gateway::{ChatRequest, RequestKind, Responder};
use stancegrid_core::lang::Language;
use stancegrid_core::parsing::LexiconSet;
use stancegrid_core::pipeline::{cmd_analyze, cmd_probe, AnalyzeOptions, ProbeModel, ProbeSpec};
use stancegrid_core::prompting::TemplateSet;
use stancegrid_core::run::RunStore;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

/// Fails every condition of one statement; sound for the rest.
struct FlakyResponder {
    inner: MockResponder,
    poisoned_statement: String,
    calls: AtomicUsize,
}

impl Responder for FlakyResponder {
    fn complete(
        &self,
        kind: RequestKind<'_>,
        request: &ChatRequest,
    ) -> stancegrid_core::error::Result<Vec<String>> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        if let RequestKind::Opinion(key) = &kind {
            if key.statement_id == self.poisoned_statement {
                return Err(Error::Gateway("injected transport failure".to_string()));
            }
        }
        self.inner.complete(kind, request)
    }

    fn request_count(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

fn spec<'a>(
    run_id: &str,
    corpus: &'a stancegrid_core::corpus::StatementSet,
    corpus_path: &'a str,
    templates: &'a TemplateSet,
    lexicons: &'a LexiconSet,
    languages: Vec<Language>,
    samples: usize,
) -> ProbeSpec<'a> {
    ProbeSpec {
        run_id: run_id.to_string(),
        corpus,
        corpus_path: corpus_path.to_string(),
        templates,
        lexicons,
        languages,
        samples_per_condition: samples,
        temperature: 1.0,
        seed: 9,
        mock_profile: Some("test".to_string()),
    }
}

#[test]
fn partial_run_persists_and_resumes() {
    let dir = tempfile::tempdir().unwrap();
    let store = RunStore::new(dir.path().join("store"));
    let corpus = synth::toy_corpus(4, 3);
    let corpus_path = dir.path().join("corpus.jsonl");
    corpus.save(&corpus_path).unwrap();
    let corpus_path = corpus_path.to_string_lossy().to_string();
    let templates = TemplateSet::embedded_default();
    let lexicons = LexiconSet::embedded_default();

    // First attempt: one statement's conditions all fail.
    let flaky: Arc<dyn Responder> = Arc::new(FlakyResponder {
        inner: MockResponder::with_corpus(MockProfile::AlwaysAgree, &corpus),
        poisoned_statement: "s002".to_string(),
        calls: AtomicUsize::new(0),
    });
    let models = vec![ProbeModel {
        name: "mock".to_string(),
        responder: Arc::clone(&flaky),
        max_in_flight: 4,
        requests_per_minute: None,
    }];
    let probe_spec = spec("resume", &corpus, &corpus_path, &templates, &lexicons, vec![Language::En], 3);
    let err = match cmd_probe(&store, &probe_spec, &models) {
        Err(e) => e,
        Ok(_) => panic!("expected a partial run"),
    };
    assert_eq!(err.exit_code(), 3, "partial runs exit with code 3: {err}");
    match &err {
        Error::PartialRun { completed, expected, .. } => {
            assert_eq!(*expected, 4 * 72);
            assert_eq!(*completed, 3 * 72);
        }
        other => panic!("expected PartialRun, got {other}"),
    }
    let manifest = store.load_manifest("resume").unwrap();
    assert!(!manifest.is_sealed());
    assert_eq!(manifest.conditions_completed, 3 * 72);

    // Second attempt with a healthy responder: only the missing conditions
    // are requested, and the run seals.
    let healthy: Arc<dyn Responder> =
        Arc::new(MockResponder::with_corpus(MockProfile::AlwaysAgree, &corpus));
    let models = vec![ProbeModel {
        name: "mock".to_string(),
        responder: Arc::clone(&healthy),
        max_in_flight: 4,
        requests_per_minute: None,
    }];
    let manifest = cmd_probe(&store, &probe_spec, &models).unwrap();
    assert!(manifest.is_sealed());
    assert_eq!(manifest.conditions_completed, 4 * 72);
    assert_eq!(healthy.request_count(), 72, "only the poisoned statement's conditions re-run");
    assert_eq!(store.load_records("resume").unwrap().len(), 4 * 72 * 3);
}

#[test]
fn reports_are_byte_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let store = RunStore::new(dir.path().join("store"));
    let corpus = synth::toy_corpus(8, 5);
    let corpus_path = dir.path().join("corpus.jsonl");
    corpus.save(&corpus_path).unwrap();
    let corpus_path = corpus_path.to_string_lossy().to_string();
    let templates = TemplateSet::embedded_default();
    let lexicons = LexiconSet::embedded_default();
    let responder: Arc<dyn Responder> = Arc::new(MockResponder::with_corpus(
        MockProfile::UniformRandom { seed: 12 },
        &corpus,
    ));
    let models = vec![ProbeModel {
        name: "mock".to_string(),
        responder,
        max_in_flight: 4,
        requests_per_minute: None,
    }];
    let probe_spec = spec(
        "repro",
        &corpus,
        &corpus_path,
        &templates,
        &lexicons,
        vec![Language::En, Language::De],
        6,
    );
    cmd_probe(&store, &probe_spec, &models).unwrap();

    let opts = AnalyzeOptions {
        bootstrap_resamples: 300,
        with_regression: false,
        ..Default::default()
    };
    cmd_analyze(&store, "repro", &opts).unwrap();
    let first: Vec<String> = ["stance_coords", "kw", "validity"]
        .iter()
        .map(|name| store.read_report("repro", name).unwrap())
        .collect();
    cmd_analyze(&store, "repro", &opts).unwrap();
    let second: Vec<String> = ["stance_coords", "kw", "validity"]
        .iter()
        .map(|name| store.read_report("repro", name).unwrap())
        .collect();
    assert_eq!(first, second, "reports must reproduce byte-for-byte");
}

#[test]
fn multi_model_analyze_fits_regression() {
    let dir = tempfile::tempdir().unwrap();
    let store = RunStore::new(dir.path().join("store"));
    let corpus = synth::toy_corpus(24, 4);
    let corpus_path = dir.path().join("corpus.jsonl");
    corpus.save(&corpus_path).unwrap();
    let corpus_path = corpus_path.to_string_lossy().to_string();
    let templates = TemplateSet::embedded_default();
    let lexicons = LexiconSet::embedded_default();

    let left: Arc<dyn Responder> = Arc::new(MockResponder::with_corpus(
        MockProfile::LeaningSimulator(SimulatorConfig::left_leaning(1.0, 3)),
        &corpus,
    ));
    let mild: Arc<dyn Responder> = Arc::new(MockResponder::with_corpus(
        MockProfile::LeaningSimulator(SimulatorConfig::left_leaning(0.3, 4)),
        &corpus,
    ));
    let models = vec![
        ProbeModel {
            name: "sim-strong".to_string(),
            responder: left,
            max_in_flight: 4,
            requests_per_minute: None,
        },
        ProbeModel {
            name: "sim-mild".to_string(),
            responder: mild,
            max_in_flight: 4,
            requests_per_minute: None,
        },
    ];
    let probe_spec = spec(
        "reg",
        &corpus,
        &corpus_path,
        &templates,
        &lexicons,
        vec![Language::En, Language::Fr],
        8,
    );
    cmd_probe(&store, &probe_spec, &models).unwrap();

    let opts = AnalyzeOptions { bootstrap_resamples: 200, ..Default::default() };
    let outcome = cmd_analyze(&store, "reg", &opts).unwrap();
    assert_eq!(outcome.validity_rows.len(), 4);
    let csv = store.read_report("reg", "regression").unwrap();
    // The overall fit must have produced coefficient rows.
    assert!(csv.contains("overall,(intercept)"), "{csv}");
    assert!(csv.contains("lang[fr]"), "{csv}");
    assert!(csv.contains("model[sim-strong]"), "{csv}");
    let ok_rows = csv.lines().filter(|l| l.ends_with(",ok")).count();
    assert!(ok_rows > 8, "expected fitted coefficients, got {ok_rows} ok rows");
    // The strong simulator is further left than the mild one.
    let strong = outcome
        .stance_rows
        .iter()
        .find(|r| r.model == "sim-strong" && r.scope == "overall" && r.language == Language::En)
        .unwrap();
    let mild_row = outcome
        .stance_rows
        .iter()
        .find(|r| r.model == "sim-mild" && r.scope == "overall" && r.language == Language::En)
        .unwrap();
    assert!(strong.value() < mild_row.value(), "{} vs {}", strong.value(), mild_row.value());
}
