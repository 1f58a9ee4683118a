//! Evaluation harnesses over externally produced embeddings and MLM scores:
//! sentence retrieval, argmax-intersection word alignment, roundtrip
//! alignment, and pseudoperplexity.
//!
//! Nothing here computes embeddings; they are loaded from dump files. The
//! binary container is `GFEB` magic, u32 token count, u32 dimension, then
//! row-major little-endian f32 values; a TSV alternative (one row per token)
//! is also accepted. A manifest file lists one embedding file per line in
//! sentence order.

use std::collections::BTreeMap;
use std::fs;
use std::io::{self, Read, Write};
use std::path::Path;

use rand::prelude::*;
use rand_chacha::ChaCha20Rng;

use crate::model::LanguageScript;

pub const EMBEDDING_MAGIC: &[u8; 4] = b"GFEB";

#[derive(Debug, thiserror::Error)]
pub enum EmbedError {
    #[error("io error: {0}")]
    Io(#[from] io::Error),
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("non-finite value in embedding or score stream")]
    NonFinite,
    #[error("embedding must have at least one row")]
    Empty,
    #[error("bad embedding file {path}: {msg}")]
    BadFile { path: String, msg: String },
    #[error("need at least {needed} language-scripts for the chain, have {have}")]
    InsufficientLanguages { needed: usize, have: usize },
    #[error("source language {0} missing from the parallel set")]
    MissingSource(LanguageScript),
}

/// Token embeddings of one sentence: an m x d matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SentenceEmbeddings {
    m: usize,
    d: usize,
    values: Vec<f32>,
}

impl SentenceEmbeddings {
    pub fn new(m: usize, d: usize, values: Vec<f32>) -> Result<Self, EmbedError> {
        if m == 0 {
            return Err(EmbedError::Empty);
        }
        if values.len() != m * d {
            return Err(EmbedError::DimensionMismatch(values.len(), m * d));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(EmbedError::NonFinite);
        }
        Ok(Self { m, d, values })
    }

    pub fn tokens(&self) -> usize {
        self.m
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.values[i * self.d..(i + 1) * self.d]
    }

    pub fn write_binary(&self, w: &mut impl Write) -> Result<(), EmbedError> {
        w.write_all(EMBEDDING_MAGIC)?;
        w.write_all(&(self.m as u32).to_le_bytes())?;
        w.write_all(&(self.d as u32).to_le_bytes())?;
        for v in &self.values {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary(r: &mut impl Read, path: &str) -> Result<Self, EmbedError> {
        let bad = |msg: &str| EmbedError::BadFile {
            path: path.to_string(),
            msg: msg.to_string(),
        };
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic).map_err(|_| bad("truncated header"))?;
        if &magic != EMBEDDING_MAGIC {
            return Err(bad("bad magic"));
        }
        let mut buf = [0u8; 4];
        r.read_exact(&mut buf).map_err(|_| bad("truncated header"))?;
        let m = u32::from_le_bytes(buf) as usize;
        r.read_exact(&mut buf).map_err(|_| bad("truncated header"))?;
        let d = u32::from_le_bytes(buf) as usize;
        let mut values = vec![0f32; m * d];
        for v in values.iter_mut() {
            r.read_exact(&mut buf).map_err(|_| bad("truncated matrix"))?;
            *v = f32::from_le_bytes(buf);
        }
        Self::new(m, d, values)
    }

    /// TSV alternative: one row per token, tab-separated values.
    pub fn from_tsv(text: &str, path: &str) -> Result<Self, EmbedError> {
        let mut values = Vec::new();
        let mut d = None;
        let mut m = 0;
        for line in text.lines() {
            if line.trim().is_empty() {
                continue;
            }
            let row: Vec<f32> = line
                .split('\t')
                .map(|f| f.parse::<f32>())
                .collect::<Result<_, _>>()
                .map_err(|e| EmbedError::BadFile {
                    path: path.to_string(),
                    msg: e.to_string(),
                })?;
            match d {
                None => d = Some(row.len()),
                Some(d) if d != row.len() => {
                    return Err(EmbedError::DimensionMismatch(d, row.len()))
                }
                _ => {}
            }
            values.extend(row);
            m += 1;
        }
        Self::new(m, d.unwrap_or(0), values)
    }
}

/// Loads a directory of per-sentence embedding files in the order given by
/// its `manifest.txt` (one file name per line). Files ending in `.tsv` use
/// the text format; everything else the binary one.
pub fn load_embedding_dir(dir: &Path) -> Result<Vec<SentenceEmbeddings>, EmbedError> {
    let manifest = fs::read_to_string(dir.join("manifest.txt"))?;
    let mut out = Vec::new();
    for name in manifest.lines().map(str::trim).filter(|l| !l.is_empty()) {
        let path = dir.join(name);
        let display = path.display().to_string();
        if name.ends_with(".tsv") {
            out.push(SentenceEmbeddings::from_tsv(
                &fs::read_to_string(&path)?,
                &display,
            )?);
        } else {
            out.push(SentenceEmbeddings::read_binary(
                &mut fs::File::open(&path)?,
                &display,
            )?);
        }
    }
    Ok(out)
}

/// Arithmetic mean over token rows.
pub fn mean_embedding(e: &SentenceEmbeddings) -> Vec<f64> {
    let mut mean = vec![0.0f64; e.dim()];
    for i in 0..e.tokens() {
        for (acc, v) in mean.iter_mut().zip(e.row(i)) {
            *acc += *v as f64;
        }
    }
    for v in &mut mean {
        *v /= e.tokens() as f64;
    }
    mean
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

/// Top-k sentence retrieval accuracy by cosine similarity of mean
/// embeddings; index i of `tgt` is the gold match of `src[i]`.
pub fn retrieval_topk_accuracy(
    src: &[SentenceEmbeddings],
    tgt: &[SentenceEmbeddings],
    k: usize,
) -> Result<f64, EmbedError> {
    if src.len() != tgt.len() {
        return Err(EmbedError::DimensionMismatch(src.len(), tgt.len()));
    }
    if src.is_empty() {
        return Err(EmbedError::Empty);
    }
    let d = src[0].dim();
    for e in src.iter().chain(tgt) {
        if e.dim() != d {
            return Err(EmbedError::DimensionMismatch(d, e.dim()));
        }
    }
    let src_means: Vec<Vec<f64>> = src.iter().map(mean_embedding).collect();
    let tgt_means: Vec<Vec<f64>> = tgt.iter().map(mean_embedding).collect();
    let mut hits = 0usize;
    for (i, sm) in src_means.iter().enumerate() {
        let mut sims: Vec<(usize, f64)> = tgt_means
            .iter()
            .enumerate()
            .map(|(j, tm)| (j, cosine(sm, tm)))
            .collect();
        // Descending similarity; index ascending on ties for determinism.
        sims.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
        if sims[..k.min(sims.len())].iter().any(|(j, _)| *j == i) {
            hits += 1;
        }
    }
    Ok(hits as f64 / src.len() as f64)
}

/// Word-alignment links: each token index appears on at most one link.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct AlignmentLinks {
    pub links: Vec<(usize, usize)>,
}

impl AlignmentLinks {
    pub fn forward(&self, i: usize) -> Option<usize> {
        self.links.iter().find(|(a, _)| *a == i).map(|(_, b)| *b)
    }
}

/// Intersection symmetrization over the cosine similarity matrix: (i, j) is
/// linked iff j is the argmax of row i and i is the argmax of column j.
/// Argmax ties break toward the smaller index.
pub fn intersect_align(
    e1: &SentenceEmbeddings,
    e2: &SentenceEmbeddings,
) -> Result<AlignmentLinks, EmbedError> {
    if e1.dim() != e2.dim() {
        return Err(EmbedError::DimensionMismatch(e1.dim(), e2.dim()));
    }
    let rows: Vec<Vec<f64>> = (0..e1.tokens())
        .map(|i| e1.row(i).iter().map(|v| *v as f64).collect())
        .collect();
    let cols: Vec<Vec<f64>> = (0..e2.tokens())
        .map(|j| e2.row(j).iter().map(|v| *v as f64).collect())
        .collect();
    let sim: Vec<Vec<f64>> = rows
        .iter()
        .map(|r| cols.iter().map(|c| cosine(r, c)).collect())
        .collect();
    intersect_align_sim(&sim)
}

/// Same intersection rule over a precomputed similarity matrix.
pub fn intersect_align_sim(sim: &[Vec<f64>]) -> Result<AlignmentLinks, EmbedError> {
    let m = sim.len();
    if m == 0 {
        return Ok(AlignmentLinks::default());
    }
    let n = sim[0].len();
    if n == 0 {
        return Ok(AlignmentLinks::default());
    }
    let argmax = |values: &mut dyn Iterator<Item = f64>| -> usize {
        let mut best = f64::NEG_INFINITY;
        let mut at = 0;
        for (i, v) in values.enumerate() {
            if v > best {
                best = v;
                at = i;
            }
        }
        at
    };
    let row_best: Vec<usize> = (0..m)
        .map(|i| argmax(&mut sim[i].iter().copied()))
        .collect();
    let col_best: Vec<usize> = (0..n)
        .map(|j| argmax(&mut (0..m).map(|i| sim[i][j])))
        .collect();
    let links = (0..m)
        .filter(|&i| col_best[row_best[i]] == i)
        .map(|i| (i, row_best[i]))
        .collect();
    Ok(AlignmentLinks { links })
}

/// Roundtrip word-alignment accuracy through a seeded chain of intermediate
/// language-scripts and back to the source. A token succeeds when the walk
/// returns to its starting index; a missing link anywhere fails it.
pub fn roundtrip_accuracy(
    parallel: &BTreeMap<LanguageScript, Vec<SentenceEmbeddings>>,
    source: &LanguageScript,
    chains: usize,
    chain_len: usize,
    seed: u64,
) -> Result<f64, EmbedError> {
    let src_sentences = parallel
        .get(source)
        .ok_or_else(|| EmbedError::MissingSource(source.clone()))?;
    let intermediates: Vec<&LanguageScript> =
        parallel.keys().filter(|ls| *ls != source).collect();
    if intermediates.len() < chain_len {
        return Err(EmbedError::InsufficientLanguages {
            needed: chain_len + 1,
            have: intermediates.len() + 1,
        });
    }

    let mut run_rates = Vec::with_capacity(chains);
    for run in 0..chains {
        // Per-run seed derived from the master seed.
        let mut rng = ChaCha20Rng::seed_from_u64(seed.wrapping_add(run as u64));
        let mut picked: Vec<&LanguageScript> = intermediates.clone();
        picked.shuffle(&mut rng);
        picked.truncate(chain_len);

        let mut hops: Vec<&LanguageScript> = vec![source];
        hops.extend(picked);
        hops.push(source);

        let mut total = 0usize;
        let mut ok = 0usize;
        for s in 0..src_sentences.len() {
            // Directed alignment for every edge of this sentence's chain.
            let mut edge_links = Vec::with_capacity(hops.len() - 1);
            for w in hops.windows(2) {
                edge_links.push(intersect_align(&parallel[w[0]][s], &parallel[w[1]][s])?);
            }
            for start in 0..src_sentences[s].tokens() {
                total += 1;
                let mut pos = Some(start);
                for links in &edge_links {
                    pos = pos.and_then(|p| links.forward(p));
                }
                if pos == Some(start) {
                    ok += 1;
                }
            }
        }
        run_rates.push(if total == 0 { 0.0 } else { ok as f64 / total as f64 });
    }
    Ok(run_rates.iter().sum::<f64>() / run_rates.len() as f64)
}

/// Pseudoperplexity normalization mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PpplNorm {
    Token,
    Word,
}

impl std::str::FromStr for PpplNorm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "token" => Ok(PpplNorm::Token),
            "word" => Ok(PpplNorm::Word),
            other => Err(format!("bad normalization `{other}` (token|word)")),
        }
    }
}

/// Per-token masked-LM pseudo-log-likelihoods for one text.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreStream {
    pub scores: Vec<f64>,
    pub word_count: usize,
}

/// Pseudoperplexity: exp(-(sum scores) / N) with N the token count (token
/// mode) or word count (word mode).
pub fn pppl(s: &ScoreStream, normalization: PpplNorm) -> Result<f64, EmbedError> {
    if s.scores.is_empty() || s.word_count == 0 {
        return Err(EmbedError::Empty);
    }
    if s.scores.iter().any(|v| !v.is_finite()) {
        return Err(EmbedError::NonFinite);
    }
    let total: f64 = s.scores.iter().sum();
    let n = match normalization {
        PpplNorm::Token => s.scores.len(),
        PpplNorm::Word => s.word_count,
    };
    Ok((-total / n as f64).exp())
}
