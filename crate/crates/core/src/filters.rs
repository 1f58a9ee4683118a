//! Chunk-level cleaning filters SF1-SF5.
//!
//! SF1 rejects chunks with too little character diversity, SF2 repetitive
//! word content, SF3 a high share of special characters, SF4 too few words,
//! and SF5 exact duplicates after stripping punctuation and whitespace.

use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};
use unicode_general_category::{get_general_category, GeneralCategory};
use unicode_normalization::UnicodeNormalization;
use unicode_script::{Script, UnicodeScript};

use crate::model::{Chunk, CorpusHandle};

/// Per-chunk statistics consumed by the SF1-SF4 thresholds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChunkMetrics {
    /// 1 - (#distinct char 3-grams / #char 3-grams); 0 when fewer than 3 chars.
    pub char_rep_ratio: f64,
    /// 1 - (#distinct words / #words); 0 when no words.
    pub word_rep_ratio: f64,
    /// Share of characters that are neither letter, digit, nor whitespace.
    pub special_ratio: f64,
    pub n_words: usize,
}

/// Thresholds for SF1-SF4.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterConfig {
    pub max_char_rep: f64,
    pub max_word_rep: f64,
    pub max_special: f64,
    pub min_words: usize,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            max_char_rep: 0.2,
            max_word_rep: 0.3,
            max_special: 0.4,
            min_words: 3,
        }
    }
}

/// Scripts written without whitespace word boundaries. Each script-bearing
/// character of these scripts counts as one word.
fn is_charword_script(s: Script) -> bool {
    matches!(
        s,
        Script::Han
            | Script::Hiragana
            | Script::Katakana
            | Script::Thai
            | Script::Khmer
            | Script::Lao
            | Script::Myanmar
    )
}

/// Splits text into words: whitespace-delimited runs, except that characters
/// of scripts without word boundaries each form their own word.
fn words(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut current = String::new();
    for c in text.chars() {
        if c.is_whitespace() {
            if !current.is_empty() {
                out.push(std::mem::take(&mut current));
            }
        } else if is_charword_script(c.script()) {
            if !current.is_empty() {
                out.push(std::mem::take(&mut current));
            }
            out.push(c.to_string());
        } else {
            current.push(c);
        }
    }
    if !current.is_empty() {
        out.push(current);
    }
    out
}

pub fn chunk_metrics(chunk: &Chunk) -> ChunkMetrics {
    let chars: Vec<char> = chunk.text.chars().collect();

    let char_rep_ratio = if chars.len() < 3 {
        0.0
    } else {
        let total = chars.len() - 2;
        let distinct: HashSet<&[char]> = chars.windows(3).collect();
        1.0 - distinct.len() as f64 / total as f64
    };

    let ws = words(&chunk.text);
    let word_rep_ratio = if ws.is_empty() {
        0.0
    } else {
        let distinct: HashSet<&str> = ws.iter().map(|w| w.as_str()).collect();
        1.0 - distinct.len() as f64 / ws.len() as f64
    };

    let special_ratio = if chars.is_empty() {
        0.0
    } else {
        let special = chars
            .iter()
            .filter(|c| !c.is_alphanumeric() && !c.is_whitespace())
            .count();
        special as f64 / chars.len() as f64
    };

    ChunkMetrics {
        char_rep_ratio,
        word_rep_ratio,
        special_ratio,
        n_words: ws.len(),
    }
}

/// SF5 key: NFC text with all punctuation (general categories P*) and
/// whitespace removed; case preserved.
pub fn dedup_key(chunk: &Chunk) -> String {
    chunk
        .text
        .nfc()
        .filter(|c| {
            !c.is_whitespace()
                && !matches!(
                    get_general_category(*c),
                    GeneralCategory::ConnectorPunctuation
                        | GeneralCategory::DashPunctuation
                        | GeneralCategory::OpenPunctuation
                        | GeneralCategory::ClosePunctuation
                        | GeneralCategory::InitialPunctuation
                        | GeneralCategory::FinalPunctuation
                        | GeneralCategory::OtherPunctuation
                )
        })
        .collect()
}

/// The first filter a rejected chunk failed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Filter {
    Sf1CharRepetition,
    Sf2WordRepetition,
    Sf3SpecialChars,
    Sf4TooFewWords,
    Sf5Duplicate,
}

impl std::fmt::Display for Filter {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            Filter::Sf1CharRepetition => "SF1",
            Filter::Sf2WordRepetition => "SF2",
            Filter::Sf3SpecialChars => "SF3",
            Filter::Sf4TooFewWords => "SF4",
            Filter::Sf5Duplicate => "SF5",
        };
        write!(f, "{name}")
    }
}

/// Per-filter rejection counts. Kept count + sum of rejections equals the
/// input chunk count.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FilterReport {
    pub counts: BTreeMap<Filter, usize>,
}

impl FilterReport {
    pub fn total_rejected(&self) -> usize {
        self.counts.values().sum()
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (filter, count) in &self.counts {
            out.push_str(&format!("{filter}\t{count}\n"));
        }
        out
    }
}

/// Returns the first failing filter of SF1-SF4, if any.
pub fn first_failing(metrics: &ChunkMetrics, cfg: &FilterConfig) -> Option<Filter> {
    if metrics.char_rep_ratio > cfg.max_char_rep {
        Some(Filter::Sf1CharRepetition)
    } else if metrics.word_rep_ratio > cfg.max_word_rep {
        Some(Filter::Sf2WordRepetition)
    } else if metrics.special_ratio > cfg.max_special {
        Some(Filter::Sf3SpecialChars)
    } else if metrics.n_words < cfg.min_words {
        Some(Filter::Sf4TooFewWords)
    } else {
        None
    }
}

/// Applies SF1-SF5 in line order. SF5 keeps the first occurrence of each
/// dedup key.
pub fn clean_corpus(corpus: &CorpusHandle, cfg: &FilterConfig) -> (CorpusHandle, FilterReport) {
    let mut kept = CorpusHandle::empty(corpus.ls.clone());
    let mut report = FilterReport::default();
    let mut seen: HashMap<String, ()> = HashMap::new();
    for chunk in &corpus.chunks {
        let metrics = chunk_metrics(chunk);
        if let Some(filter) = first_failing(&metrics, cfg) {
            *report.counts.entry(filter).or_insert(0) += 1;
            continue;
        }
        let key = dedup_key(chunk);
        if seen.insert(key, ()).is_some() {
            *report.counts.entry(Filter::Sf5Duplicate).or_insert(0) += 1;
            continue;
        }
        kept.chunks.push(chunk.clone());
    }
    (kept, report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{corpus_from_str, parse_language_script, Chunk};
    use proptest::prelude::*;

    fn chunk(text: &str) -> Chunk {
        Chunk::new(text, "t", 0)
    }

    #[test]
    fn repeated_chars_ratio() {
        // "aaaaaa": 4 char-3-grams, all "aaa" -> 1 - 1/4.
        let m = chunk_metrics(&chunk("aaaaaa"));
        assert!((m.char_rep_ratio - 0.75).abs() < 1e-12);
    }

    #[test]
    fn distinct_words() {
        let m = chunk_metrics(&chunk("the cat sat"));
        assert_eq!(m.word_rep_ratio, 0.0);
        assert_eq!(m.n_words, 3);
    }

    #[test]
    fn all_special() {
        let m = chunk_metrics(&chunk("%%%%%"));
        assert_eq!(m.special_ratio, 1.0);
    }

    #[test]
    fn short_text_has_zero_char_rep() {
        assert_eq!(chunk_metrics(&chunk("ab")).char_rep_ratio, 0.0);
    }

    #[test]
    fn charword_scripts_count_per_char() {
        let m = chunk_metrics(&chunk("你好吗"));
        assert_eq!(m.n_words, 3);
        let m = chunk_metrics(&chunk("สวัสดี"));
        // Combining marks belong to Thai script too; every char counts.
        assert_eq!(m.n_words, 6);
    }

    #[test]
    fn dedup_ignores_punct_and_space() {
        assert_eq!(
            dedup_key(&chunk("Hello, world!")),
            dedup_key(&chunk("Hello world"))
        );
        assert_eq!(dedup_key(&chunk("abc")), "abc");
        assert_eq!(dedup_key(&chunk("a.b c")), dedup_key(&chunk("ab c.")));
        assert_eq!(dedup_key(&chunk("a.b c")), "abc");
    }

    #[test]
    fn dedup_preserves_case() {
        assert_ne!(dedup_key(&chunk("Hello")), dedup_key(&chunk("hello")));
    }

    #[test]
    fn duplicate_removed_first_wins() {
        let ls = parse_language_script("eng_Latn").unwrap();
        let corpus = corpus_from_str(
            "the quick brown fox\nthe quick, brown fox!\nanother clean line\n",
            ls,
            "src",
        );
        let (kept, report) = clean_corpus(&corpus, &FilterConfig::default());
        assert_eq!(kept.n_chunks(), 2);
        assert_eq!(kept.chunks[0].line_no, 0);
        assert_eq!(report.counts[&Filter::Sf5Duplicate], 1);
    }

    #[test]
    fn empty_corpus() {
        let ls = parse_language_script("eng_Latn").unwrap();
        let (kept, report) = clean_corpus(&CorpusHandle::empty(ls), &FilterConfig::default());
        assert!(kept.is_empty());
        assert_eq!(report.total_rejected(), 0);
    }

    #[test]
    fn kept_set_matches_threshold_oracle() {
        let ls = parse_language_script("eng_Latn").unwrap();
        let cfg = FilterConfig::default();
        let mut text = String::new();
        for i in 0..100 {
            match i % 5 {
                0 => text.push_str(&format!("clean sentence number {i} with words\n")),
                1 => text.push_str("aaaaaaaaaaaaaaaaaaaaaa\n"),
                2 => text.push_str("word word word word word\n"),
                3 => text.push_str("@@@ ### $$$ %%% ^^^\n"),
                _ => text.push_str("tiny\n"),
            }
        }
        let corpus = corpus_from_str(&text, ls, "src");
        let (kept, report) = clean_corpus(&corpus, &cfg);

        // Independent re-application of the thresholds plus first-wins dedup.
        let mut oracle_kept = Vec::new();
        let mut oracle_rejected = 0usize;
        let mut seen = std::collections::HashSet::new();
        for c in &corpus.chunks {
            let m = chunk_metrics(c);
            let pass = m.char_rep_ratio <= cfg.max_char_rep
                && m.word_rep_ratio <= cfg.max_word_rep
                && m.special_ratio <= cfg.max_special
                && m.n_words >= cfg.min_words;
            if pass && seen.insert(dedup_key(c)) {
                oracle_kept.push(c.clone());
            } else {
                oracle_rejected += 1;
            }
        }
        assert_eq!(kept.chunks, oracle_kept);
        assert_eq!(report.total_rejected(), oracle_rejected);
    }

    #[test]
    fn idempotent_and_partition_exact() {
        let ls = parse_language_script("eng_Latn").unwrap();
        let corpus = corpus_from_str(
            "good sentence one here\naaaaaaaaaa\ngood sentence one, here!\nshort\nanother good sentence follows\n",
            ls,
            "src",
        );
        let cfg = FilterConfig::default();
        let (once, report) = clean_corpus(&corpus, &cfg);
        assert_eq!(once.n_chunks() + report.total_rejected(), corpus.n_chunks());
        let (twice, report2) = clean_corpus(&once, &cfg);
        assert_eq!(once, twice);
        assert_eq!(report2.total_rejected(), 0);
    }

    proptest! {
        #[test]
        fn metrics_are_fractions(text in "\\PC{0,60}") {
            let m = chunk_metrics(&chunk(&text));
            prop_assert!((0.0..=1.0).contains(&m.char_rep_ratio));
            prop_assert!((0.0..=1.0).contains(&m.word_rep_ratio));
            prop_assert!((0.0..=1.0).contains(&m.special_ratio));
        }

        #[test]
        fn loosening_thresholds_is_monotone(
            lines in proptest::collection::vec("[a-z @#]{0,30}", 1..40),
            tighter in 0.0f64..0.5,
        ) {
            let ls = parse_language_script("eng_Latn").unwrap();
            let corpus = corpus_from_str(&lines.join("\n"), ls, "src");
            let tight = FilterConfig {
                max_char_rep: tighter,
                max_word_rep: tighter,
                max_special: tighter,
                min_words: 3,
            };
            let loose = FilterConfig {
                max_char_rep: tighter + 0.3,
                max_word_rep: tighter + 0.3,
                max_special: tighter + 0.3,
                min_words: 2,
            };
            let (kept_tight, _) = clean_corpus(&corpus, &tight);
            let (kept_loose, _) = clean_corpus(&corpus, &loose);
            prop_assert!(kept_loose.n_chunks() >= kept_tight.n_chunks());
        }
    }
}
