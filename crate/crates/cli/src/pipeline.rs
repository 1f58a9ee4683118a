//! The `run` subcommand: executes the curation pipeline end-to-end with
//! persisted, resumable stage outputs.
//!
//! Stages run in order: script-split, clean, LM training, divergence matrix,
//! advisory flags, inclusion gate, splits, sampling weights. Every stage
//! records a fingerprint of its inputs and the checksums of its outputs under
//! `<out>/state/`; a rerun skips stages whose fingerprint still matches and
//! whose outputs are intact. Artifacts contain no timestamps, so identical
//! config + inputs + seed produce byte-identical output trees.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use glotforge_core::charlm::train_char_lm;
use glotforge_core::curation::{include_gate, make_splits, sampling_weights, SplitManifest};
use glotforge_core::divergence::{cf1_script_mismatch, cf2_flags, divergence_matrix};
use glotforge_core::family::FamilyLevel;
use glotforge_core::filters::{clean_corpus, FilterConfig};
use glotforge_core::model::{load_corpus, Chunk, CorpusHandle, LanguageScript};
use glotforge_core::script::split_by_script;
use glotforge_core::{arpa, CharNgramModel};

use crate::commands::{manifest_json, read_families};
use crate::corpusio::{
    corpus_tree, data_tag, load_tag_dir, load_tree_language, tag_dir, tsv_lines, write_atomic,
};
use crate::error::{data_err, io_err, usage, Result};

/// All pipeline knobs, read from a JSON config file. Only `corpus_root` and
/// `seed` are required; everything else has the documented default.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub corpus_root: PathBuf,
    pub seed: u64,
    #[serde(default)]
    pub thresholds: FilterConfig,
    #[serde(default = "default_ngram_order")]
    pub ngram_order: usize,
    #[serde(default = "default_divergence_cap")]
    pub divergence_cap: usize,
    #[serde(default = "default_inclusion_threshold")]
    pub inclusion_threshold: usize,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_mixed_threshold")]
    pub mixed_threshold: f64,
    /// Family tree file for the advisory flags stage; without it the stage
    /// emits an empty flag list.
    #[serde(default)]
    pub families: Option<PathBuf>,
    /// `lang<TAB>script1,script2` table of expected scripts for CF1.
    #[serde(default)]
    pub expected_scripts: Option<PathBuf>,
    /// Level for the same-family check in the flags stage.
    #[serde(default = "default_family_level")]
    pub family_level: String,
    /// Head language-scripts clamped in the sampling-weight computation.
    #[serde(default)]
    pub head: Vec<String>,
}

fn default_ngram_order() -> usize {
    3
}
fn default_divergence_cap() -> usize {
    100_000
}
fn default_inclusion_threshold() -> usize {
    30_000
}
fn default_alpha() -> f64 {
    0.3
}
fn default_mixed_threshold() -> f64 {
    0.8
}
fn default_family_level() -> String {
    "1".to_string()
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text =
            fs::read_to_string(path).map_err(|e| io_err(format!("{}: {e}", path.display())))?;
        let cfg: PipelineConfig =
            serde_json::from_str(&text).map_err(|e| usage(format!("bad config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        if self.ngram_order == 0 || self.divergence_cap == 0 || self.inclusion_threshold == 0 {
            return Err(usage("counts in the config must be positive"));
        }
        if self.alpha <= 0.0 {
            return Err(usage("alpha must be positive"));
        }
        if !(self.mixed_threshold > 0.5 && self.mixed_threshold <= 1.0) {
            return Err(usage("mixed_threshold must be in (0.5, 1.0]"));
        }
        self.family_level
            .parse::<FamilyLevel>()
            .map_err(usage)?;
        for tag in &self.head {
            data_tag(tag)?;
        }
        Ok(())
    }
}

/// Persisted record of one completed stage.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct StageState {
    fingerprint: String,
    /// Output paths relative to the out directory, with their checksums.
    outputs: Vec<(String, String)>,
}

#[derive(Debug, Clone, Serialize)]
pub struct StageSummary {
    pub stage: String,
    pub status: String,
    pub outputs: Vec<(String, String)>,
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn hash_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| io_err(format!("{}: {e}", path.display())))?;
    Ok(sha256_hex(&bytes))
}

struct Runner {
    out: PathBuf,
    corpus_root: PathBuf,
    summaries: Vec<StageSummary>,
}

impl Runner {
    /// Fingerprint of a stage: its name, the relevant config slice, and the
    /// checksum of every input file. Input paths are labeled relative to the
    /// out directory or corpus root, so moving either tree as a whole does
    /// not invalidate the state.
    fn fingerprint(&self, stage: &str, config_slice: &str, inputs: &[PathBuf]) -> Result<String> {
        let mut h = Sha256::new();
        h.update(stage.as_bytes());
        h.update([0]);
        h.update(config_slice.as_bytes());
        for path in inputs {
            let label = path
                .strip_prefix(&self.out)
                .or_else(|_| path.strip_prefix(&self.corpus_root))
                .unwrap_or(path);
            h.update([0]);
            h.update(label.to_string_lossy().as_bytes());
            h.update([0]);
            h.update(hash_file(path)?.as_bytes());
        }
        Ok(hex::encode(h.finalize()))
    }

    fn state_path(&self, stage: &str) -> PathBuf {
        self.out.join("state").join(format!("{stage}.json"))
    }

    fn intact(&self, state: &StageState) -> bool {
        state.outputs.iter().all(|(rel, hash)| {
            let path = self.out.join(rel);
            path.is_file() && hash_file(&path).map(|h| h == *hash).unwrap_or(false)
        })
    }

    /// Runs or skips one stage. `body` writes the stage artifacts and
    /// returns their paths relative to the out directory.
    fn stage(
        &mut self,
        name: &str,
        fp: String,
        body: impl FnOnce(&Path) -> Result<Vec<String>>,
    ) -> Result<()> {
        let state_path = self.state_path(name);
        if let Ok(text) = fs::read_to_string(&state_path) {
            if let Ok(state) = serde_json::from_str::<StageState>(&text) {
                if state.fingerprint == fp && self.intact(&state) {
                    eprintln!("stage {name}: unchanged, skipped");
                    self.summaries.push(StageSummary {
                        stage: name.to_string(),
                        status: "skipped".to_string(),
                        outputs: state.outputs,
                    });
                    return Ok(());
                }
            }
        }
        eprintln!("stage {name}: running");
        let rels = body(&self.out)?;
        let mut outputs = Vec::with_capacity(rels.len());
        for rel in rels {
            let hash = hash_file(&self.out.join(&rel))?;
            outputs.push((rel, hash));
        }
        let state = StageState {
            fingerprint: fp,
            outputs: outputs.clone(),
        };
        write_atomic(
            &state_path,
            serde_json::to_string_pretty(&state)
                .map_err(|e| data_err(format!("stage state: {e}")))?
                .as_bytes(),
        )?;
        self.summaries.push(StageSummary {
            stage: name.to_string(),
            status: "ran".to_string(),
            outputs,
        });
        Ok(())
    }
}

pub fn run(config_path: &Path, out: &Path) -> Result<()> {
    let cfg = PipelineConfig::load(config_path)?;
    fs::create_dir_all(out)?;
    let mut runner = Runner {
        out: out.to_path_buf(),
        corpus_root: cfg.corpus_root.clone(),
        summaries: Vec::new(),
    };

    let tree = corpus_tree(&cfg.corpus_root)?;
    if tree.is_empty() {
        return Err(data_err(format!(
            "no language directories under {}",
            cfg.corpus_root.display()
        )));
    }
    let tree_inputs: Vec<PathBuf> = tree.iter().flat_map(|l| l.sources.clone()).collect();

    // Stage 1: script split.
    let fp = runner.fingerprint(
        "split-scripts",
        &format!("mixed_threshold={}", cfg.mixed_threshold),
        &tree_inputs,
    )?;
    runner.stage("split-scripts", fp, |out| {
        let mut merged: BTreeMap<LanguageScript, Vec<Chunk>> = BTreeMap::new();
        let mut discard_lines = String::new();
        for lang in &tree {
            let corpus = load_tree_language(lang)?;
            let (parts, report) = split_by_script(&corpus, cfg.mixed_threshold);
            for (ls, part) in parts {
                merged.entry(ls).or_default().extend(part.chunks);
            }
            for (reason, count) in &report.counts {
                discard_lines.push_str(&format!("{}\t{reason}\t{count}\n", lang.ls));
            }
        }
        let mut rels = Vec::new();
        for (ls, chunks) in merged {
            let rel = format!("scripts/{ls}.txt");
            let corpus = CorpusHandle::new(ls, chunks);
            let mut text = String::new();
            for chunk in &corpus.chunks {
                text.push_str(&chunk.text);
                text.push('\n');
            }
            write_atomic(&out.join(&rel), text.as_bytes())?;
            rels.push(rel);
        }
        write_atomic(&out.join("scripts/discards.tsv"), discard_lines.as_bytes())?;
        rels.push("scripts/discards.tsv".to_string());
        Ok(rels)
    })?;

    // Stage 2: cleaning filters.
    let script_files: Vec<PathBuf> = tag_dir(&out.join("scripts"), "txt")?
        .into_iter()
        .map(|(_, p)| p)
        .collect();
    let fp = runner.fingerprint(
        "clean",
        &serde_json::to_string(&cfg.thresholds).map_err(|e| data_err(e.to_string()))?,
        &script_files,
    )?;
    runner.stage("clean", fp, |out| {
        let mut rels = Vec::new();
        let mut report_lines = String::new();
        for corpus in load_tag_dir(&out.join("scripts"))? {
            let (kept, report) = clean_corpus(&corpus, &cfg.thresholds);
            let rel = format!("clean/{}.txt", corpus.ls);
            let mut text = String::new();
            for chunk in &kept.chunks {
                text.push_str(&chunk.text);
                text.push('\n');
            }
            write_atomic(&out.join(&rel), text.as_bytes())?;
            rels.push(rel);
            for (filter, count) in &report.counts {
                report_lines.push_str(&format!("{}\t{filter}\t{count}\n", corpus.ls));
            }
        }
        write_atomic(&out.join("clean/report.tsv"), report_lines.as_bytes())?;
        rels.push("clean/report.tsv".to_string());
        Ok(rels)
    })?;

    // Stage 3: character LM per language-script.
    let clean_files: Vec<PathBuf> = tag_dir(&out.join("clean"), "txt")?
        .into_iter()
        .map(|(_, p)| p)
        .collect();
    let fp = runner.fingerprint(
        "train-lm",
        &format!("order={} cap={}", cfg.ngram_order, cfg.divergence_cap),
        &clean_files,
    )?;
    runner.stage("train-lm", fp, |out| {
        fs::create_dir_all(out.join("models"))?;
        let mut rels = Vec::new();
        for corpus in load_tag_dir(&out.join("clean"))? {
            if corpus.is_empty() {
                eprintln!("stage train-lm: {} is empty after cleaning, skipped", corpus.ls);
                continue;
            }
            let model = train_char_lm(&corpus, cfg.ngram_order, cfg.divergence_cap)?;
            let rel = format!("models/{}.arpa", corpus.ls);
            let path = out.join(&rel);
            if let Some(parent) = path.parent() {
                fs::create_dir_all(parent)?;
            }
            arpa::write_model(&model, &path)?;
            rels.push(rel);
        }
        Ok(rels)
    })?;

    // Stage 4: divergence matrix.
    let model_files: Vec<PathBuf> = tag_dir(&out.join("models"), "arpa")?
        .into_iter()
        .map(|(_, p)| p)
        .collect();
    let fp = runner.fingerprint(
        "divergence",
        &format!("cap={}", cfg.divergence_cap),
        &model_files
            .iter()
            .cloned()
            .chain(clean_files.iter().cloned())
            .collect::<Vec<_>>(),
    )?;
    runner.stage("divergence", fp, |out| {
        let models: Vec<CharNgramModel> = tag_dir(&out.join("models"), "arpa")?
            .into_iter()
            .map(|(_, p)| arpa::read_model(&p).map_err(Into::into))
            .collect::<Result<_>>()?;
        let covered: BTreeSet<LanguageScript> = models.iter().map(|m| m.ls.clone()).collect();
        let tests: Vec<CorpusHandle> = load_tag_dir(&out.join("clean"))?
            .into_iter()
            .filter(|c| covered.contains(&c.ls))
            .map(|mut c| {
                c.chunks.truncate(cfg.divergence_cap);
                c
            })
            .collect();
        let matrix = divergence_matrix(&models, &tests)?;
        write_atomic(&out.join("divergence.tsv"), matrix.to_tsv().as_bytes())?;
        Ok(vec!["divergence.tsv".to_string()])
    })?;

    // Stage 5: advisory flags (CF1 script mismatches, CF2 nearest-neighbor
    // family check).
    let mut flag_inputs = vec![out.join("divergence.tsv")];
    flag_inputs.extend(cfg.families.iter().cloned());
    flag_inputs.extend(cfg.expected_scripts.iter().cloned());
    let fp = runner.fingerprint("flags", &format!("level={}", cfg.family_level), &flag_inputs)?;
    runner.stage("flags", fp, |out| {
        let text = fs::read_to_string(out.join("divergence.tsv"))?;
        let matrix =
            glotforge_core::DivergenceMatrix::from_tsv(&text).map_err(data_err)?;
        let mut rels = Vec::new();

        let mut flag_text = String::new();
        if let Some(families_path) = &cfg.families {
            let families = read_families(families_path)?;
            let level: FamilyLevel = cfg.family_level.parse().map_err(usage)?;
            for flag in cf2_flags(&matrix, &families, level) {
                flag_text.push_str(&flag.to_line());
                flag_text.push('\n');
            }
        }
        write_atomic(&out.join("flags.tsv"), flag_text.as_bytes())?;
        rels.push("flags.tsv".to_string());

        if let Some(expected_path) = &cfg.expected_scripts {
            let expected = read_expected_scripts(expected_path)?;
            let mut cf1_text = String::new();
            for ls in &matrix.labels {
                if cf1_script_mismatch(ls, &expected) {
                    cf1_text.push_str(&format!("{ls}\tscript_mismatch\n"));
                }
            }
            write_atomic(&out.join("cf1.tsv"), cf1_text.as_bytes())?;
            rels.push("cf1.tsv".to_string());
        }
        Ok(rels)
    })?;

    // Stage 6: inclusion gate.
    let fp = runner.fingerprint(
        "gate",
        &format!("threshold={}", cfg.inclusion_threshold),
        &clean_files,
    )?;
    runner.stage("gate", fp, |out| {
        let mut text = String::new();
        for corpus in load_tag_dir(&out.join("clean"))? {
            let verdict = if include_gate(&corpus, cfg.inclusion_threshold) {
                "include"
            } else {
                "exclude"
            };
            text.push_str(&format!("{}\t{}\t{verdict}\n", corpus.ls, corpus.n_chunks()));
        }
        write_atomic(&out.join("gate.tsv"), text.as_bytes())?;
        Ok(vec!["gate.tsv".to_string()])
    })?;

    // Stage 7: train/dev/test splits for included language-scripts.
    let bible_inputs: Vec<PathBuf> = tree.iter().filter_map(|l| l.bible.clone()).collect();
    let mut split_inputs = vec![out.join("gate.tsv")];
    split_inputs.extend(clean_files.iter().cloned());
    split_inputs.extend(bible_inputs);
    let fp = runner.fingerprint("split", &format!("seed={}", cfg.seed), &split_inputs)?;
    runner.stage("split", fp, |out| {
        fs::create_dir_all(out.join("splits"))?;
        let included = read_gate(&out.join("gate.tsv"))?;
        let bibles: BTreeMap<&LanguageScript, &PathBuf> = tree
            .iter()
            .filter_map(|l| l.bible.as_ref().map(|b| (&l.ls, b)))
            .collect();
        let mut rels = Vec::new();
        for corpus in load_tag_dir(&out.join("clean"))? {
            if !included.contains(&corpus.ls) {
                continue;
            }
            let bible = bibles
                .get(&corpus.ls)
                .map(|p| load_corpus(p, corpus.ls.clone()))
                .transpose()?;
            let manifest = match make_splits(&corpus, bible.as_ref(), cfg.seed) {
                Ok(m) => m,
                Err(e) => {
                    eprintln!("stage split: {}: {e}, skipped", corpus.ls);
                    continue;
                }
            };
            let rel = format!("splits/{}.json", corpus.ls);
            write_atomic(&out.join(&rel), manifest_json(&manifest)?.as_bytes())?;
            rels.push(rel);
        }
        Ok(rels)
    })?;

    // Stage 8: sampling weights over the training splits.
    let split_files: Vec<PathBuf> = tag_dir(&out.join("splits"), "json")
        .unwrap_or_default()
        .into_iter()
        .map(|(_, p)| p)
        .collect();
    let fp = runner.fingerprint(
        "weights",
        &format!("alpha={} head={}", cfg.alpha, cfg.head.join(",")),
        &split_files,
    )?;
    runner.stage("weights", fp, |out| {
        let mut sizes: BTreeMap<LanguageScript, usize> = BTreeMap::new();
        for (ls, path) in tag_dir(&out.join("splits"), "json").unwrap_or_default() {
            let text = fs::read_to_string(&path)?;
            let manifest: SplitManifest = serde_json::from_str(&text)
                .map_err(|e| data_err(format!("{}: {e}", path.display())))?;
            sizes.insert(ls, manifest.train.len());
        }
        let text = if sizes.is_empty() {
            String::new()
        } else {
            let head: BTreeSet<LanguageScript> = cfg
                .head
                .iter()
                .map(|t| data_tag(t))
                .collect::<Result<_>>()?;
            tsv_lines(&sampling_weights(&sizes, cfg.alpha, &head)?)
        };
        write_atomic(&out.join("weights.tsv"), text.as_bytes())?;
        Ok(vec!["weights.tsv".to_string()])
    })?;

    // Machine-readable stage summary, emitted last.
    let summary = serde_json::to_string_pretty(&runner.summaries)
        .map_err(|e| data_err(format!("summary: {e}")))?;
    write_atomic(&out.join("summary.json"), format!("{summary}\n").as_bytes())?;
    println!("{summary}");
    Ok(())
}

fn read_gate(path: &Path) -> Result<BTreeSet<LanguageScript>> {
    let text = fs::read_to_string(path)?;
    let mut included = BTreeSet::new();
    for line in text.lines() {
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() == 3 && fields[2] == "include" {
            included.insert(data_tag(fields[0])?);
        }
    }
    Ok(included)
}

/// `lang<TAB>script1,script2` per line.
fn read_expected_scripts(path: &Path) -> Result<BTreeMap<String, BTreeSet<String>>> {
    let text =
        fs::read_to_string(path).map_err(|e| io_err(format!("{}: {e}", path.display())))?;
    let mut out = BTreeMap::new();
    for (no, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let (lang, scripts) = line
            .split_once('\t')
            .ok_or_else(|| data_err(format!("line {}: expected lang<TAB>scripts", no + 1)))?;
        out.insert(
            lang.to_string(),
            scripts.split(',').map(|s| s.trim().to_string()).collect(),
        );
    }
    Ok(out)
}
