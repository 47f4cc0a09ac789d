//! stancegrid: probe political opinions of multilingual chat models, test
//! their robustness, analyze cross-lingual differences, compile alignment
//! datasets, and score open-ended generations.

use clap::{Parser, Subcommand};
use stancegrid_core::aligndata::{CodeStanceTable, RileDictionaries};
use stancegrid_core::config::RunConfig;
use stancegrid_core::error::Error;
use stancegrid_core::gateway::http::HttpResponder;
use stancegrid_core::gateway::mock::{mock_model, MockProfile};
use stancegrid_core::gateway::{Responder, RetryPolicy};
use stancegrid_core::lang::Language;
use stancegrid_core::openended::mock::{OpinionWriterMock, RubricJudgeMock};
use stancegrid_core::openended::{AspectTable, JudgeTemplate};
use stancegrid_core::pipeline::{
    cmd_analyze, cmd_build_align, cmd_compare, cmd_open_eval, cmd_probe, cmd_robustness,
    plan_probe, AnalyzeOptions, ProbeModel, ProbeSpec,
};
use stancegrid_core::robustness::BatteryParams;
use stancegrid_core::run::RunStore;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

#[derive(Parser)]
#[command(name = "stancegrid", version, about)]
struct Cli {
    /// Path to the run configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample, parse, and persist all prompt conditions of a run.
    Probe {
        #[arg(long)]
        run_id: String,
        /// Override the configured seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Use a simulated model instead of configured endpoints:
        /// always-agree, uniform-random, left-simulator, right-simulator.
        #[arg(long)]
        mock: Option<String>,
        /// Comma-separated language codes (defaults to the config).
        #[arg(long, value_delimiter = ',')]
        languages: Vec<String>,
        /// Comma-separated endpoint names (defaults to all configured).
        #[arg(long, value_delimiter = ',')]
        models: Vec<String>,
        /// Print the planned grid size and exit without sampling.
        #[arg(long)]
        dry_run: bool,
    },
    /// Run the six-test robustness battery on a sealed run.
    Robustness {
        #[arg(long)]
        run_id: String,
    },
    /// Stance coordinates, Kruskal-Wallis screens, beta regression, and
    /// validity accounting for sealed runs.
    Analyze {
        /// One or more run ids.
        #[arg(long = "run-id", required = true)]
        run_ids: Vec<String>,
        /// Tolerate incomplete condition grids.
        #[arg(long)]
        allow_partial: bool,
        /// Skip the beta regression (cheap screening mode).
        #[arg(long)]
        no_regression: bool,
    },
    /// Compile the left- and right-leaning preference-pair datasets.
    BuildAlignData {
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Generate opinionated statements, judge them, and score left/right.
    OpenEval {
        /// Simulate the generator instead of using endpoints:
        /// left-writer, neutral-writer, right-writer.
        #[arg(long)]
        mock: Option<String>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Juxtapose stance coordinates of two or more sealed runs.
    Compare {
        /// Run ids; the first is the baseline.
        run_ids: Vec<String>,
    },
    /// Print a stored report.
    Report {
        #[arg(long)]
        run_id: String,
        /// Report name (robustness, stance_coords, kw, regression,
        /// validity); lists available reports when omitted.
        #[arg(long)]
        kind: Option<String>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn load_config(path: &Option<PathBuf>) -> Result<RunConfig, Error> {
    let path = path
        .as_ref()
        .ok_or_else(|| Error::Config("--config is required for this command".to_string()))?;
    RunConfig::load(path)
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Probe { run_id, seed, mock, languages, models, dry_run } => {
            let config = load_config(&cli.config)?;
            let corpus = config.load_corpus()?;
            let templates = config.load_templates()?;
            let lexicons = config.load_lexicons()?;
            let run_languages: Vec<Language> = if languages.is_empty() {
                config.languages()?
            } else {
                languages
                    .iter()
                    .map(|c| c.parse::<Language>().map_err(Error::Config))
                    .collect::<Result<_, _>>()?
            };
            let seed = seed.unwrap_or(config.run.seed);

            let probe_models: Vec<ProbeModel> = match &mock {
                Some(profile_name) => {
                    let profile = MockProfile::parse(profile_name, seed)?;
                    let responder: Arc<dyn Responder> =
                        Arc::new(mock_model(profile, Some(&corpus))?);
                    vec![ProbeModel {
                        name: format!("mock-{profile_name}"),
                        responder,
                        max_in_flight: 8,
                        requests_per_minute: None,
                    }]
                }
                None => {
                    let selected: Vec<_> = if models.is_empty() {
                        config.endpoints.iter().collect()
                    } else {
                        models
                            .iter()
                            .map(|name| {
                                config.endpoint(name).ok_or_else(|| {
                                    Error::Config(format!("endpoint `{name}` not in config"))
                                })
                            })
                            .collect::<Result<_, _>>()?
                    };
                    if selected.is_empty() {
                        return Err(Error::Config(
                            "no endpoints configured; add [[endpoints]] or use --mock".to_string(),
                        ));
                    }
                    selected
                        .into_iter()
                        .map(|endpoint| {
                            let responder =
                                HttpResponder::connect(endpoint.clone(), RetryPolicy::default())?;
                            Ok(ProbeModel {
                                name: endpoint.name.clone(),
                                responder: Arc::new(responder),
                                max_in_flight: endpoint.max_in_flight,
                                requests_per_minute: endpoint.requests_per_minute,
                            })
                        })
                        .collect::<Result<_, Error>>()?
                }
            };

            let plan = plan_probe(
                &corpus,
                &templates,
                &run_languages,
                probe_models.len(),
                config.run.samples_per_condition,
            );
            println!(
                "plan: {} statements x {} conditions x {} samples = {} responses per model-language; total {} responses",
                plan.statements,
                plan.conditions_per_statement,
                config.run.samples_per_condition,
                plan.responses_per_model_language,
                plan.total_responses
            );
            if dry_run {
                return Ok(());
            }

            let store = RunStore::new(&config.run.store);
            let spec = ProbeSpec {
                run_id: run_id.clone(),
                corpus: &corpus,
                corpus_path: config.corpus.path.to_string_lossy().to_string(),
                templates: &templates,
                lexicons: &lexicons,
                languages: run_languages,
                samples_per_condition: config.run.samples_per_condition,
                temperature: config.run.temperature,
                seed,
                mock_profile: mock,
            };
            let manifest = cmd_probe(&store, &spec, &probe_models)?;
            println!(
                "run `{run_id}` sealed: {}/{} conditions",
                manifest.conditions_completed, manifest.conditions_expected
            );
            Ok(())
        }
        Command::Robustness { run_id } => {
            let config = load_config(&cli.config)?;
            let store = RunStore::new(&config.run.store);
            let section = config.robustness.clone().unwrap_or_default();
            let manifest = store.load_manifest(&run_id)?;
            let params = BatteryParams {
                bootstrap_resamples: section.bootstrap_resamples,
                alpha: section.alpha,
                seed: manifest.seed,
            };
            let path = cmd_robustness(&store, &run_id, &params)?;
            println!("robustness report: {}", path.display());
            Ok(())
        }
        Command::Analyze { run_ids, allow_partial, no_regression } => {
            let config = load_config(&cli.config)?;
            let store = RunStore::new(&config.run.store);
            let section = config.robustness.clone().unwrap_or_default();
            for run_id in &run_ids {
                let opts = AnalyzeOptions {
                    alpha: section.alpha,
                    bootstrap_resamples: section.bootstrap_resamples,
                    allow_partial,
                    reference_model: None,
                    with_regression: !no_regression,
                };
                let outcome = cmd_analyze(&store, run_id, &opts)?;
                for path in outcome.reports {
                    println!("report: {}", path.display());
                }
                for row in &outcome.validity_rows {
                    println!(
                        "validity {} {}: valid {:.3}, significant {:.3}",
                        row.model, row.language, row.share_valid, row.share_significant
                    );
                }
            }
            Ok(())
        }
        Command::BuildAlignData { seed } => {
            let config = load_config(&cli.config)?;
            let align = config
                .align
                .clone()
                .ok_or_else(|| Error::Config("config has no [align] section".to_string()))?;
            let templates = config.load_templates()?;
            let rile = match &align.rile_codes {
                Some(path) => RileDictionaries::load(path)?,
                None => RileDictionaries::embedded_default(),
            };
            let table = match &align.annotation_table {
                Some(path) => CodeStanceTable::load(path)?,
                None => CodeStanceTable::embedded_default(),
            };
            let outcome = cmd_build_align(
                &align.manifesto_path,
                &align.output_dir,
                align.approach()?,
                &templates,
                &rile,
                &table,
                seed.unwrap_or(config.run.seed),
                align.per_leaning,
            )?;
            println!(
                "ingest: {} accepted ({} short, {} non-sentence, {} wrong language, {} out-of-scope country, {} malformed)",
                outcome.ingest.accepted,
                outcome.ingest.skipped_short,
                outcome.ingest.skipped_not_sentence,
                outcome.ingest.skipped_language,
                outcome.ingest.skipped_country,
                outcome.ingest.skipped_malformed
            );
            println!("pool: {} left, {} right", outcome.pool_left, outcome.pool_right);
            println!("left dataset:  {} ({} pairs)", outcome.left_path.display(), outcome.left.pairs.len());
            println!("right dataset: {} ({} pairs)", outcome.right_path.display(), outcome.right.pairs.len());
            Ok(())
        }
        Command::OpenEval { mock, seed } => {
            let config = load_config(&cli.config)?;
            let section = config
                .openended
                .clone()
                .ok_or_else(|| Error::Config("config has no [openended] section".to_string()))?;
            let table = match &section.aspects_path {
                Some(path) => AspectTable::load(path)?,
                None => AspectTable::embedded_default(),
            };
            let template = match &section.judge_prompt_path {
                Some(path) => JudgeTemplate::load(path)?,
                None => JudgeTemplate::embedded_default(),
            };
            let seed = seed.unwrap_or(config.run.seed);

            let (generator, generator_name): (Arc<dyn Responder>, String) = match &mock {
                Some(profile) => {
                    let lean = match profile.as_str() {
                        "left-writer" => 0.8,
                        "neutral-writer" => 0.0,
                        "right-writer" => -0.8,
                        other => {
                            return Err(Error::Config(format!(
                                "unknown open-eval mock `{other}` (expected left-writer, \
                                 neutral-writer, or right-writer)"
                            )))
                        }
                    };
                    (Arc::new(OpinionWriterMock::new(lean, seed)), format!("mock-{profile}"))
                }
                None => {
                    let endpoint = config.endpoint(&section.generator).ok_or_else(|| {
                        Error::Config(format!("endpoint `{}` not in config", section.generator))
                    })?;
                    (
                        Arc::new(HttpResponder::connect(endpoint.clone(), RetryPolicy::default())?),
                        endpoint.name.clone(),
                    )
                }
            };
            let (judge, judge_name): (Arc<dyn Responder>, String) = match &mock {
                Some(_) => (Arc::new(RubricJudgeMock::new()), "mock-rubric-judge".to_string()),
                None => {
                    let endpoint = config.endpoint(&section.judge).ok_or_else(|| {
                        Error::Config(format!("endpoint `{}` not in config", section.judge))
                    })?;
                    (
                        Arc::new(HttpResponder::connect(endpoint.clone(), RetryPolicy::default())?),
                        endpoint.name.clone(),
                    )
                }
            };

            let outcome = cmd_open_eval(
                generator.as_ref(),
                &generator_name,
                judge.as_ref(),
                &judge_name,
                &section.alignment_label,
                &table,
                &template,
                section.samples,
                config.run.temperature,
                section.include_refusals,
            )?;
            let dir = config.run.store.join("openended");
            std::fs::create_dir_all(&dir)?;
            let path = dir.join(format!("{}-{generator_name}.csv", section.alignment_label));
            std::fs::write(&path, &outcome.csv)?;
            println!("open-ended report: {}", path.display());
            for score in &outcome.left_scores {
                println!(
                    "left score {}: {:.4} ({} cells{})",
                    score.issue,
                    score.value,
                    score.n_cells,
                    if score.missing_cells > 0 {
                        format!(", {} missing", score.missing_cells)
                    } else {
                        String::new()
                    }
                );
            }
            Ok(())
        }
        Command::Compare { run_ids } => {
            let config = load_config(&cli.config)?;
            let store = RunStore::new(&config.run.store);
            let (path, _) = cmd_compare(&store, &run_ids)?;
            println!("comparison report: {}", path.display());
            Ok(())
        }
        Command::Report { run_id, kind } => {
            let config = load_config(&cli.config)?;
            let store = RunStore::new(&config.run.store);
            match kind {
                Some(kind) => {
                    print!("{}", store.read_report(&run_id, &kind)?);
                    Ok(())
                }
                None => {
                    let reports = store.list_reports(&run_id)?;
                    if reports.is_empty() {
                        println!("no reports for run `{run_id}`");
                    } else {
                        for name in reports {
                            println!("{name}");
                        }
                    }
                    Ok(())
                }
            }
        }
    }
}
