//! Inclusion gating, train/dev/test split construction, multinomial sampling
//! weights, and training-chunk packing.
//!
//! Splits reserve 1000 chunks each for dev and test. When a positionally
//! aligned Bible translation is available, the same seeded selection of 1000
//! verse positions contributes 500 verses to dev and 500 to test, and the
//! two sets are topped up to 1000 with seeded random general chunks. The
//! dev/test totals stay at 1000 whether or not a Bible is present.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::model::{CorpusHandle, LanguageScript};

pub const DEFAULT_INCLUSION_THRESHOLD: usize = 30_000;
pub const SPLIT_RESERVE: usize = 1000;
pub const BIBLE_PER_SPLIT: usize = 500;
pub const DEFAULT_CHUNK_LEN: usize = 512;

#[derive(Debug, thiserror::Error)]
pub enum CurationError {
    #[error("corpus too small to fill the splits: need {needed} chunks, have {have}")]
    TooSmall { needed: usize, have: usize },
    #[error("bible must have at least {SPLIT_RESERVE} verses, has {0}")]
    BibleTooSmall(usize),
    #[error("empty input")]
    EmptyInput,
    #[error("corpus size for {0} must be positive")]
    ZeroSize(LanguageScript),
}

/// True iff the cleaned corpus clears the inclusion threshold.
pub fn include_gate(corpus: &CorpusHandle, threshold: usize) -> bool {
    corpus.n_chunks() >= threshold
}

/// Identity of a chunk within a split: either an index into the general
/// corpus or a verse position in the parallel Bible.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "origin", content = "index")]
pub enum ChunkId {
    #[serde(rename = "general")]
    General(usize),
    #[serde(rename = "bible")]
    Bible(usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitManifest {
    pub ls: LanguageScript,
    pub seed: u64,
    pub train: Vec<ChunkId>,
    pub dev: Vec<ChunkId>,
    pub test: Vec<ChunkId>,
    /// Bible members of dev/test (subsets of the lists above).
    pub bible_dev: Vec<ChunkId>,
    pub bible_test: Vec<ChunkId>,
}

/// The 1000 verse positions shared by every language for a given seed:
/// first 500 go to dev, next 500 to test.
pub fn bible_verse_positions(n_verses: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut positions: Vec<usize> = (0..n_verses).collect();
    positions.shuffle(&mut rng);
    positions.truncate(2 * BIBLE_PER_SPLIT);
    positions
}

/// Builds the split manifest for one language-script.
pub fn make_splits(
    corpus: &CorpusHandle,
    bible: Option<&CorpusHandle>,
    seed: u64,
) -> Result<SplitManifest, CurationError> {
    let n = corpus.n_chunks();
    let bible_per_split = match bible {
        Some(b) if b.n_chunks() < 2 * BIBLE_PER_SPLIT => {
            return Err(CurationError::BibleTooSmall(b.n_chunks()))
        }
        Some(_) => BIBLE_PER_SPLIT,
        None => 0,
    };
    let general_per_split = SPLIT_RESERVE - bible_per_split;
    if n < 2 * general_per_split {
        return Err(CurationError::TooSmall {
            needed: 2 * general_per_split,
            have: n,
        });
    }

    let (bible_dev, bible_test) = match bible {
        Some(b) => {
            let positions = bible_verse_positions(b.n_chunks(), seed);
            (
                positions[..BIBLE_PER_SPLIT]
                    .iter()
                    .map(|&p| ChunkId::Bible(p))
                    .collect::<Vec<_>>(),
                positions[BIBLE_PER_SPLIT..]
                    .iter()
                    .map(|&p| ChunkId::Bible(p))
                    .collect::<Vec<_>>(),
            )
        }
        None => (Vec::new(), Vec::new()),
    };

    // Held-out general chunks, seeded independently of the verse selection.
    let mut rng = ChaCha20Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut indices: Vec<usize> = (0..n).collect();
    indices.shuffle(&mut rng);
    let dev_general = &indices[..general_per_split];
    let test_general = &indices[general_per_split..2 * general_per_split];
    let held: BTreeSet<usize> = indices[..2 * general_per_split].iter().copied().collect();

    let mut dev: Vec<ChunkId> = bible_dev.clone();
    dev.extend(dev_general.iter().map(|&i| ChunkId::General(i)));
    let mut test: Vec<ChunkId> = bible_test.clone();
    test.extend(test_general.iter().map(|&i| ChunkId::General(i)));
    // Train keeps source line order.
    let train: Vec<ChunkId> = (0..n)
        .filter(|i| !held.contains(i))
        .map(ChunkId::General)
        .collect();

    Ok(SplitManifest {
        ls: corpus.ls.clone(),
        seed,
        train,
        dev,
        test,
        bible_dev,
        bible_test,
    })
}

/// alpha-multinomial sampling weights over language-scripts.
///
/// Head languages are clamped to the smallest tail corpus size before the
/// power transform; weights sum to 1.
pub fn sampling_weights(
    sizes: &BTreeMap<LanguageScript, usize>,
    alpha: f64,
    head_set: &BTreeSet<LanguageScript>,
) -> Result<BTreeMap<LanguageScript, f64>, CurationError> {
    if sizes.is_empty() {
        return Err(CurationError::EmptyInput);
    }
    assert!(alpha > 0.0, "alpha must be positive");
    for (ls, &s) in sizes {
        if s == 0 {
            return Err(CurationError::ZeroSize(ls.clone()));
        }
    }
    let min_tail = sizes
        .iter()
        .filter(|(ls, _)| !head_set.contains(*ls))
        .map(|(_, &s)| s)
        .min();
    let effective = |ls: &LanguageScript, s: usize| -> f64 {
        match (head_set.contains(ls), min_tail) {
            (true, Some(t)) => s.min(t) as f64,
            _ => s as f64,
        }
    };
    let total: f64 = sizes
        .iter()
        .map(|(ls, &s)| effective(ls, s).powf(alpha))
        .sum();
    Ok(sizes
        .iter()
        .map(|(ls, &s)| (ls.clone(), effective(ls, s).powf(alpha) / total))
        .collect())
}

/// Partitions a token stream into consecutive fixed-length blocks; the
/// trailing remainder is dropped and its length reported.
pub fn pack_training_chunks(token_ids: &[u32], chunk_len: usize) -> (Vec<Vec<u32>>, usize) {
    assert!(chunk_len >= 1, "chunk_len must be >= 1");
    let blocks: Vec<Vec<u32>> = token_ids
        .chunks_exact(chunk_len)
        .map(|b| b.to_vec())
        .collect();
    (blocks, token_ids.len() % chunk_len)
}
