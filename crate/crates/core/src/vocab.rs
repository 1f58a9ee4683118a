//! Unigram-LM vocabulary training, merging into a base vocabulary, and the
//! changed-token metric.
//!
//! Training harvests frequent substrings as candidates, then alternates
//! Viterbi-based expected counts with probability re-estimation, pruning the
//! least-used tokens each round until the target size is reached. Every
//! character seen in training is kept as a single-character fallback so any
//! input string stays segmentable.
//!
//! Vocabulary file format: UTF-8 TSV `token<TAB>logprob<TAB>provenance`,
//! with tab, newline, carriage return, and backslash escaped as `\t`, `\n`,
//! `\r`, `\\`.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use crate::model::CorpusHandle;

#[derive(Debug, thiserror::Error)]
pub enum VocabError {
    #[error("target size {target} smaller than alphabet size {alphabet}")]
    TargetTooSmall { target: usize, alphabet: usize },
    #[error("vocabulary does not cover character `{0}`")]
    Coverage(char),
    #[error("malformed vocabulary file at line {line}: {msg}")]
    Malformed { line: usize, msg: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Base,
    New,
}

impl std::fmt::Display for Provenance {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Provenance::Base => write!(f, "base"),
            Provenance::New => write!(f, "new"),
        }
    }
}

/// Unigram-LM vocabulary: token -> natural-log probability, with provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct VocabModel {
    entries: BTreeMap<String, (f64, Provenance)>,
    max_token_chars: usize,
}

impl VocabModel {
    pub fn from_entries<I>(entries: I) -> Self
    where
        I: IntoIterator<Item = (String, f64, Provenance)>,
    {
        let entries: BTreeMap<String, (f64, Provenance)> = entries
            .into_iter()
            .map(|(t, lp, prov)| (t, (lp, prov)))
            .collect();
        let max_token_chars = entries.keys().map(|t| t.chars().count()).max().unwrap_or(0);
        Self {
            entries,
            max_token_chars,
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains(&self, token: &str) -> bool {
        self.entries.contains_key(token)
    }

    pub fn log_prob(&self, token: &str) -> Option<f64> {
        self.entries.get(token).map(|(lp, _)| *lp)
    }

    pub fn provenance(&self, token: &str) -> Option<Provenance> {
        self.entries.get(token).map(|(_, p)| *p)
    }

    pub fn tokens(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(|s| s.as_str())
    }

    /// Best (Viterbi) segmentation as (start, end) char spans.
    ///
    /// Tie-break: prefer the longer token at each position, then the
    /// lexicographically smaller one.
    pub fn segment(&self, text: &str) -> Result<Vec<(usize, usize)>, VocabError> {
        let chars: Vec<char> = text.chars().collect();
        let n = chars.len();
        // best[i]: (score, token_len) for the suffix starting at i.
        let mut best: Vec<Option<(f64, usize)>> = vec![None; n + 1];
        best[n] = Some((0.0, 0));
        let mut buf = String::new();
        for i in (0..n).rev() {
            let mut choice: Option<(f64, usize, String)> = None;
            let max_len = self.max_token_chars.min(n - i);
            buf.clear();
            for len in 1..=max_len {
                buf.push(chars[i + len - 1]);
                let Some((tail_score, _)) = best[i + len] else {
                    continue;
                };
                let Some(lp) = self.log_prob(&buf) else {
                    continue;
                };
                let score = lp + tail_score;
                let better = match &choice {
                    None => true,
                    Some((s, l, t)) => {
                        score > *s
                            || (score == *s && (len > *l || (len == *l && buf.as_str() < t.as_str())))
                    }
                };
                if better {
                    choice = Some((score, len, buf.clone()));
                }
            }
            if let Some((score, len, _)) = choice {
                best[i] = Some((score, len));
            }
        }
        if n > 0 && best[0].is_none() {
            // Find the first uncoverable character for the error message.
            for c in &chars {
                if !self.contains(&c.to_string()) {
                    return Err(VocabError::Coverage(*c));
                }
            }
            return Err(VocabError::Coverage(chars[0]));
        }
        let mut spans = Vec::new();
        let mut i = 0;
        while i < n {
            let (_, len) = best[i].expect("reachable position");
            spans.push((i, i + len));
            i += len;
        }
        Ok(spans)
    }

    /// TSV serialization.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for (token, (lp, prov)) in &self.entries {
            out.push_str(&format!("{}\t{}\t{}\n", escape(token), lp, prov));
        }
        out
    }

    pub fn from_tsv(text: &str) -> Result<Self, VocabError> {
        let mut entries = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 3 {
                return Err(VocabError::Malformed {
                    line: i + 1,
                    msg: format!("expected 3 fields, found {}", fields.len()),
                });
            }
            let token = unescape(fields[0]).map_err(|msg| VocabError::Malformed {
                line: i + 1,
                msg,
            })?;
            let lp: f64 = fields[1].parse().map_err(|_| VocabError::Malformed {
                line: i + 1,
                msg: "bad log-probability".into(),
            })?;
            let prov = match fields[2] {
                "base" => Provenance::Base,
                "new" => Provenance::New,
                other => {
                    return Err(VocabError::Malformed {
                        line: i + 1,
                        msg: format!("bad provenance `{other}`"),
                    })
                }
            };
            entries.push((token, lp, prov));
        }
        Ok(Self::from_entries(entries))
    }
}

fn escape(token: &str) -> String {
    let mut out = String::with_capacity(token.len());
    for c in token.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '\t' => out.push_str("\\t"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            _ => out.push(c),
        }
    }
    out
}

fn unescape(s: &str) -> Result<String, String> {
    let mut out = String::with_capacity(s.len());
    let mut chars = s.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        match chars.next() {
            Some('\\') => out.push('\\'),
            Some('t') => out.push('\t'),
            Some('n') => out.push('\n'),
            Some('r') => out.push('\r'),
            other => return Err(format!("bad escape `\\{other:?}`")),
        }
    }
    Ok(out)
}

/// Knobs for unigram-LM training; defaults follow the standard recipe.
#[derive(Debug, Clone, Copy)]
pub struct UnigramTrainConfig {
    pub max_token_chars: usize,
    /// Initial candidate pool size as a multiple of the target size.
    pub seed_factor: usize,
    /// Fraction of multi-character tokens kept per pruning round.
    pub prune_ratio: f64,
    pub em_iters_per_round: usize,
}

impl Default for UnigramTrainConfig {
    fn default() -> Self {
        Self {
            max_token_chars: 8,
            seed_factor: 10,
            prune_ratio: 0.75,
            em_iters_per_round: 2,
        }
    }
}

/// Trains a unigram-LM vocabulary of `target_size` tokens on weighted
/// corpora. Deterministic for fixed inputs; `_seed` is accepted for
/// interface stability but the procedure has no random choices.
pub fn train_unigram_vocab(
    corpora: &[(&CorpusHandle, f64)],
    target_size: usize,
    _seed: u64,
    cfg: &UnigramTrainConfig,
) -> Result<VocabModel, VocabError> {
    let alphabet: BTreeSet<char> = corpora
        .iter()
        .flat_map(|(c, _)| c.chunks.iter())
        .flat_map(|ch| ch.text.chars())
        .collect();
    if target_size < alphabet.len() {
        return Err(VocabError::TargetTooSmall {
            target: target_size,
            alphabet: alphabet.len(),
        });
    }

    // Candidate harvesting: weighted frequency of every substring up to
    // max_token_chars.
    let mut freq: HashMap<String, f64> = HashMap::new();
    for (corpus, weight) in corpora {
        for chunk in &corpus.chunks {
            let chars: Vec<char> = chunk.text.chars().collect();
            for i in 0..chars.len() {
                let end = (i + cfg.max_token_chars).min(chars.len());
                let mut s = String::new();
                for j in i..end {
                    s.push(chars[j]);
                    *freq.entry(s.clone()).or_insert(0.0) += weight;
                }
            }
        }
    }

    let budget = target_size.saturating_mul(cfg.seed_factor).max(target_size);
    let mut multi: Vec<(String, f64)> = freq
        .iter()
        .filter(|(t, _)| t.chars().count() > 1)
        .map(|(t, f)| (t.clone(), *f))
        .collect();
    // Favor substrings that cover more text; deterministic tie-break.
    multi.sort_by(|a, b| {
        let ka = a.1 * a.0.chars().count() as f64;
        let kb = b.1 * b.0.chars().count() as f64;
        kb.partial_cmp(&ka).unwrap().then_with(|| a.0.cmp(&b.0))
    });
    multi.truncate(budget.saturating_sub(alphabet.len()));

    let mut counts: BTreeMap<String, f64> = alphabet
        .iter()
        .map(|c| (c.to_string(), *freq.get(&c.to_string()).unwrap_or(&1.0)))
        .collect();
    counts.extend(multi);

    let renormalize = |counts: &BTreeMap<String, f64>| -> VocabModel {
        let total: f64 = counts.values().sum();
        VocabModel::from_entries(
            counts
                .iter()
                .map(|(t, &c)| (t.clone(), (c.max(1e-10) / total).ln(), Provenance::New)),
        )
    };
    let mut model = renormalize(&counts);

    loop {
        for _ in 0..cfg.em_iters_per_round {
            // E-step: Viterbi usage counts under the current model.
            let mut used: BTreeMap<String, f64> = BTreeMap::new();
            for (corpus, weight) in corpora {
                for chunk in &corpus.chunks {
                    let chars: Vec<char> = chunk.text.chars().collect();
                    let spans = model.segment(&chunk.text).expect("alphabet covered");
                    for (s, e) in spans {
                        let token: String = chars[s..e].iter().collect();
                        *used.entry(token).or_insert(0.0) += weight;
                    }
                }
            }
            // M-step: keep unused single characters at a floor so coverage
            // survives.
            for (token, count) in counts.iter_mut() {
                *count = used.get(token).copied().unwrap_or(if token.chars().count() == 1 {
                    1e-6
                } else {
                    0.0
                });
            }
            model = renormalize(&counts);
        }

        let n_multi = counts.keys().filter(|t| t.chars().count() > 1).count();
        let target_multi = target_size - alphabet.len();
        if n_multi <= target_multi {
            break;
        }
        // Prune the least-used multi-character tokens.
        let keep = ((n_multi as f64 * cfg.prune_ratio) as usize).max(target_multi);
        let mut by_use: Vec<(String, f64)> = counts
            .iter()
            .filter(|(t, _)| t.chars().count() > 1)
            .map(|(t, &c)| (t.clone(), c))
            .collect();
        by_use.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then_with(|| a.0.cmp(&b.0)));
        for (token, _) in &by_use[keep.min(by_use.len())..] {
            counts.remove(token);
        }
        model = renormalize(&counts);
    }
    Ok(model)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MergeStats {
    pub overlap: usize,
    pub genuinely_new: usize,
}

/// Merges a newly trained vocabulary into a base vocabulary. Base entries
/// are kept verbatim, probabilities and provenance included; tokens only in
/// `new` are added with their own probabilities and marked as new.
pub fn merge_vocab(base: &VocabModel, new: &VocabModel) -> (VocabModel, MergeStats) {
    let mut entries: Vec<(String, f64, Provenance)> = base
        .entries
        .iter()
        .map(|(t, (lp, prov))| (t.clone(), *lp, *prov))
        .collect();
    let mut overlap = 0;
    let mut genuinely_new = 0;
    for (t, (lp, _)) in &new.entries {
        if base.contains(t) {
            overlap += 1;
        } else {
            genuinely_new += 1;
            entries.push((t.clone(), *lp, Provenance::New));
        }
    }
    (
        VocabModel::from_entries(entries),
        MergeStats {
            overlap,
            genuinely_new,
        },
    )
}

/// Percentage of token spans produced by `tok_a` that `tok_b` does not
/// reproduce, aggregated over the corpus.
pub fn changed_token_rate(
    tok_a: &VocabModel,
    tok_b: &VocabModel,
    corpus: &CorpusHandle,
) -> Result<f64, VocabError> {
    let mut total = 0usize;
    let mut changed = 0usize;
    for chunk in &corpus.chunks {
        let spans_a = tok_a.segment(&chunk.text)?;
        let spans_b: BTreeSet<(usize, usize)> = tok_b.segment(&chunk.text)?.into_iter().collect();
        total += spans_a.len();
        changed += spans_a.iter().filter(|s| !spans_b.contains(s)).count();
    }
    if total == 0 {
        return Ok(0.0);
    }
    Ok(100.0 * changed as f64 / total as f64)
}
