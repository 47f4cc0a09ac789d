//! Run persistence: append-only line-delimited response and record files
//! plus a JSON manifest per run. A sealed run is immutable; analysis
//! commands only read sealed runs.

use crate::error::{Error, Result};
use crate::gateway::{ConditionKey, RawResponse};
use crate::lang::Language;
use crate::parsing::ParsedStance;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashMap};
use std::io::Write;
use std::path::{Path, PathBuf};

/// The atomic analysis cell: one parsed sample of one condition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpinionRecord {
    #[serde(flatten)]
    pub key: ConditionKey,
    pub sample_index: usize,
    pub stance: ParsedStance,
}

/// Everything needed to reproduce and resume a probe run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub run_id: String,
    pub corpus_hash: String,
    pub template_hash: String,
    pub lexicon_hash: String,
    pub corpus_path: String,
    pub models: Vec<String>,
    pub languages: Vec<Language>,
    pub samples_per_condition: usize,
    pub temperature: f64,
    pub seed: u64,
    pub conditions_expected: usize,
    pub conditions_completed: usize,
    pub created_unix_ms: u64,
    pub sealed_unix_ms: Option<u64>,
    /// Mock profile name when the run used a simulated model.
    #[serde(default)]
    pub mock_profile: Option<String>,
}

impl RunManifest {
    pub fn is_sealed(&self) -> bool {
        self.sealed_unix_ms.is_some()
    }

    /// Combined configuration hash carried by every report row.
    pub fn config_hash(&self) -> String {
        crate::util::sha256_hex(
            format!(
                "{}|{}|{}|{}|{}|{}",
                self.corpus_hash,
                self.template_hash,
                self.lexicon_hash,
                self.seed,
                self.samples_per_condition,
                self.temperature
            )
            .as_bytes(),
        )
    }
}

pub fn now_unix_ms() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

/// Directory-backed store for runs and their reports.
#[derive(Debug, Clone)]
pub struct RunStore {
    root: PathBuf,
}

impl RunStore {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        RunStore { root: root.into() }
    }

    pub fn run_dir(&self, run_id: &str) -> PathBuf {
        self.root.join("runs").join(run_id)
    }

    fn manifest_path(&self, run_id: &str) -> PathBuf {
        self.run_dir(run_id).join("manifest.json")
    }

    fn responses_path(&self, run_id: &str) -> PathBuf {
        self.run_dir(run_id).join("responses.jsonl")
    }

    fn records_path(&self, run_id: &str) -> PathBuf {
        self.run_dir(run_id).join("records.jsonl")
    }

    pub fn reports_dir(&self, run_id: &str) -> PathBuf {
        self.run_dir(run_id).join("reports")
    }

    pub fn run_exists(&self, run_id: &str) -> bool {
        self.manifest_path(run_id).exists()
    }

    pub fn save_manifest(&self, manifest: &RunManifest) -> Result<()> {
        let dir = self.run_dir(&manifest.run_id);
        std::fs::create_dir_all(&dir)?;
        let path = self.manifest_path(&manifest.run_id);
        std::fs::write(&path, serde_json::to_string_pretty(manifest)?)?;
        Ok(())
    }

    pub fn load_manifest(&self, run_id: &str) -> Result<RunManifest> {
        let path = self.manifest_path(run_id);
        let content = std::fs::read_to_string(&path).map_err(|e| {
            Error::Analysis(format!("run `{run_id}` not found at {}: {e}", path.display()))
        })?;
        Ok(serde_json::from_str(&content)?)
    }

    /// Mark a run immutable after verifying counts.
    pub fn seal(&self, run_id: &str) -> Result<RunManifest> {
        let mut manifest = self.load_manifest(run_id)?;
        if manifest.is_sealed() {
            return Ok(manifest);
        }
        manifest.sealed_unix_ms = Some(now_unix_ms());
        self.save_manifest(&manifest)?;
        Ok(manifest)
    }

    pub fn require_sealed(&self, run_id: &str) -> Result<RunManifest> {
        let manifest = self.load_manifest(run_id)?;
        if !manifest.is_sealed() {
            return Err(Error::Analysis(format!(
                "run `{run_id}` is not sealed; finish or resume the probe first"
            )));
        }
        Ok(manifest)
    }

    pub fn append_responses(&self, run_id: &str, responses: &[RawResponse]) -> Result<()> {
        let mut file = std::fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(self.responses_path(run_id))?;
        let mut buf = String::new();
        for response in responses {
            buf.push_str(&serde_json::to_string(response)?);
            buf.push('\n');
        }
        file.write_all(buf.as_bytes())?;
        Ok(())
    }

    pub fn load_responses(&self, run_id: &str) -> Result<Vec<RawResponse>> {
        let path = self.responses_path(run_id);
        if !path.exists() {
            return Ok(Vec::new());
        }
        let content = std::fs::read_to_string(path)?;
        let mut responses = Vec::new();
        for line in content.lines().filter(|l| !l.trim().is_empty()) {
            responses.push(serde_json::from_str(line)?);
        }
        Ok(responses)
    }

    /// Conditions with at least `n` stored samples, as tags. Duplicate
    /// (condition, sample) writes from resumed runs count once.
    pub fn completed_conditions(&self, run_id: &str, n: usize) -> Result<HashMap<String, usize>> {
        let mut per_condition: HashMap<String, std::collections::HashSet<usize>> = HashMap::new();
        for response in self.load_responses(run_id)? {
            per_condition.entry(response.key.tag()).or_default().insert(response.sample_index);
        }
        Ok(per_condition
            .into_iter()
            .filter(|(_, samples)| samples.len() >= n)
            .map(|(tag, samples)| (tag, samples.len()))
            .collect())
    }

    /// Replace the parsed-record file. Last write per (condition, sample)
    /// wins when responses were re-collected.
    pub fn write_records(&self, run_id: &str, records: &[OpinionRecord]) -> Result<()> {
        let mut deduped: BTreeMap<(String, usize), &OpinionRecord> = BTreeMap::new();
        for record in records {
            deduped.insert((record.key.tag(), record.sample_index), record);
        }
        let mut buf = String::new();
        for record in deduped.values() {
            buf.push_str(&serde_json::to_string(record)?);
            buf.push('\n');
        }
        std::fs::write(self.records_path(run_id), buf)?;
        Ok(())
    }

    pub fn load_records(&self, run_id: &str) -> Result<Vec<OpinionRecord>> {
        let path = self.records_path(run_id);
        let content = std::fs::read_to_string(&path).map_err(|e| {
            Error::Analysis(format!("no parsed records for run `{run_id}`: {e}"))
        })?;
        let mut records = Vec::new();
        for line in content.lines().filter(|l| !l.trim().is_empty()) {
            records.push(serde_json::from_str(line)?);
        }
        Ok(records)
    }

    pub fn write_report(&self, run_id: &str, name: &str, csv: &str) -> Result<PathBuf> {
        let dir = self.reports_dir(run_id);
        std::fs::create_dir_all(&dir)?;
        let path = dir.join(format!("{name}.csv"));
        std::fs::write(&path, csv)?;
        Ok(path)
    }

    pub fn read_report(&self, run_id: &str, name: &str) -> Result<String> {
        let path = self.reports_dir(run_id).join(format!("{name}.csv"));
        std::fs::read_to_string(&path)
            .map_err(|e| Error::Analysis(format!("no report `{name}` for run `{run_id}`: {e}")))
    }

    pub fn list_reports(&self, run_id: &str) -> Result<Vec<String>> {
        let dir = self.reports_dir(run_id);
        if !dir.exists() {
            return Ok(Vec::new());
        }
        let mut names = Vec::new();
        for entry in std::fs::read_dir(dir)? {
            let entry = entry?;
            if let Some(name) = entry.path().file_stem().and_then(|s| s.to_str()) {
                names.push(name.to_string());
            }
        }
        names.sort();
        Ok(names)
    }

    pub fn root(&self) -> &Path {
        &self.root
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::VariantKind;
    use crate::prompting::AnswerOrder;

    fn manifest(run_id: &str) -> RunManifest {
        RunManifest {
            run_id: run_id.to_string(),
            corpus_hash: "c".repeat(64),
            template_hash: "t".repeat(64),
            lexicon_hash: "l".repeat(64),
            corpus_path: "corpus.jsonl".to_string(),
            models: vec!["mock".to_string()],
            languages: vec![Language::En],
            samples_per_condition: 3,
            temperature: 1.0,
            seed: 1,
            conditions_expected: 10,
            conditions_completed: 0,
            created_unix_ms: 123,
            sealed_unix_ms: None,
            mock_profile: Some("always-agree".to_string()),
        }
    }

    fn response(statement: &str, sample_index: usize) -> RawResponse {
        RawResponse {
            key: ConditionKey {
                model: "mock".to_string(),
                language: Language::En,
                statement_id: statement.to_string(),
                variant_kind: VariantKind::Original,
                template_id: "t1".to_string(),
                answer_order: AnswerOrder::Normal,
            },
            sample_index,
            text: "I agree.".to_string(),
            latency_ms: 1,
            status: "ok".to_string(),
        }
    }

    #[test]
    fn manifest_roundtrip_and_sealing() {
        let dir = tempfile::tempdir().unwrap();
        let store = RunStore::new(dir.path());
        store.save_manifest(&manifest("r1")).unwrap();
        let loaded = store.load_manifest("r1").unwrap();
        assert!(!loaded.is_sealed());
        assert!(store.require_sealed("r1").is_err());
        store.seal("r1").unwrap();
        assert!(store.require_sealed("r1").is_ok());
        // Sealing twice is a no-op.
        let sealed_at = store.load_manifest("r1").unwrap().sealed_unix_ms;
        store.seal("r1").unwrap();
        assert_eq!(store.load_manifest("r1").unwrap().sealed_unix_ms, sealed_at);
    }

    #[test]
    fn responses_append_and_completion_tracking() {
        let dir = tempfile::tempdir().unwrap();
        let store = RunStore::new(dir.path());
        store.save_manifest(&manifest("r1")).unwrap();
        store
            .append_responses("r1", &[response("s1", 0), response("s1", 1), response("s2", 0)])
            .unwrap();
        // s1 has 2 of 3 samples, s2 has 1: nothing complete at n = 3.
        assert!(store.completed_conditions("r1", 3).unwrap().is_empty());
        store.append_responses("r1", &[response("s1", 2)]).unwrap();
        let complete = store.completed_conditions("r1", 3).unwrap();
        assert_eq!(complete.len(), 1);
        assert!(complete.keys().next().unwrap().contains("s1"));
        // Duplicate sample writes count once.
        store.append_responses("r1", &[response("s2", 0), response("s2", 0)]).unwrap();
        assert_eq!(store.completed_conditions("r1", 3).unwrap().len(), 1);
    }

    #[test]
    fn records_dedupe_last_write_wins() {
        let dir = tempfile::tempdir().unwrap();
        let store = RunStore::new(dir.path());
        store.save_manifest(&manifest("r1")).unwrap();
        let mk = |stance: ParsedStance| OpinionRecord {
            key: response("s1", 0).key,
            sample_index: 0,
            stance,
        };
        store.write_records("r1", &[mk(ParsedStance::Agree), mk(ParsedStance::Disagree)]).unwrap();
        let records = store.load_records("r1").unwrap();
        assert_eq!(records.len(), 1);
        assert_eq!(records[0].stance, ParsedStance::Disagree);
    }

    #[test]
    fn reports_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let store = RunStore::new(dir.path());
        store.save_manifest(&manifest("r1")).unwrap();
        store.write_report("r1", "robustness", "a,b\n1,2\n").unwrap();
        assert_eq!(store.read_report("r1", "robustness").unwrap(), "a,b\n1,2\n");
        assert_eq!(store.list_reports("r1").unwrap(), vec!["robustness".to_string()]);
    }
}
