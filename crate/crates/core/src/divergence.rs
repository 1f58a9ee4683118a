//! Pairwise language divergence and corpus-level filters CF1-CF2.
//!
//! The divergence between two language-scripts is the maximum of the two
//! cross-perplexities between their character LMs and held-out texts. The
//! matrix diagonal holds self-perplexities.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use rayon::prelude::*;

use crate::charlm::{perplexity, CharLmError, CharNgramModel, Perplexity};
use crate::family::{same_group, FamilyLevel, FamilyTreeSet};
use crate::model::{CorpusHandle, LanguageScript};

#[derive(Debug, thiserror::Error)]
pub enum DivergenceError {
    #[error("no test text for {0}")]
    MissingTest(LanguageScript),
    #[error("no model for {0}")]
    MissingModel(LanguageScript),
    #[error("unknown label {0}")]
    UnknownLabel(LanguageScript),
    #[error(transparent)]
    CharLm(#[from] CharLmError),
}

/// Symmetric pairwise divergence values over an ordered label set.
#[derive(Debug, Clone, PartialEq)]
pub struct DivergenceMatrix {
    pub labels: Vec<LanguageScript>,
    /// Row-major square matrix.
    pub values: Vec<f64>,
}

impl DivergenceMatrix {
    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n() + j]
    }

    pub fn index_of(&self, ls: &LanguageScript) -> Option<usize> {
        self.labels.iter().position(|l| l == ls)
    }

    /// TSV form: header row of tags, then one row per tag.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        out.push_str("tag");
        for l in &self.labels {
            let _ = write!(out, "\t{l}");
        }
        out.push('\n');
        for (i, l) in self.labels.iter().enumerate() {
            let _ = write!(out, "{l}");
            for j in 0..self.n() {
                let _ = write!(out, "\t{}", self.get(i, j));
            }
            out.push('\n');
        }
        out
    }

    pub fn from_tsv(text: &str) -> Result<Self, String> {
        let mut lines = text.lines();
        let header = lines.next().ok_or("empty matrix file")?;
        let mut cells = header.split('\t');
        if cells.next() != Some("tag") {
            return Err("header must start with a `tag` cell".to_string());
        }
        let labels: Vec<LanguageScript> = cells
            .map(|t| t.parse().map_err(|e| format!("{e}")))
            .collect::<Result<_, _>>()?;
        let n = labels.len();
        if n == 0 {
            return Err("matrix has no labels".to_string());
        }
        let mut values = vec![0.0; n * n];
        let mut rows = 0usize;
        for (i, line) in lines.filter(|l| !l.trim().is_empty()).enumerate() {
            if i >= n {
                return Err(format!("more than {n} data rows"));
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != n + 1 {
                return Err(format!("row {i} has {} fields, expected {}", fields.len(), n + 1));
            }
            if fields[0] != labels[i].to_string() {
                return Err(format!("row {i} is labeled {}, expected {}", fields[0], labels[i]));
            }
            for (j, f) in fields[1..].iter().enumerate() {
                values[i * n + j] = f.parse().map_err(|e| format!("row {i}: {e}"))?;
            }
            rows = i + 1;
        }
        if rows != n {
            return Err(format!("{rows} data rows, expected {n}"));
        }
        Ok(Self { labels, values })
    }
}

/// Divergence of one language pair: the max of the two cross-perplexities.
pub fn divergence(pp_ij: Perplexity, pp_ji: Perplexity) -> f64 {
    pp_ij.value.max(pp_ji.value)
}

/// Computes the full pairwise matrix. Models and test texts must cover the
/// same language-script set; labels are sorted by canonical tag.
pub fn divergence_matrix(
    models: &[CharNgramModel],
    tests: &[CorpusHandle],
) -> Result<DivergenceMatrix, DivergenceError> {
    let model_map: BTreeMap<&LanguageScript, &CharNgramModel> =
        models.iter().map(|m| (&m.ls, m)).collect();
    let test_map: BTreeMap<&LanguageScript, &CorpusHandle> =
        tests.iter().map(|t| (&t.ls, t)).collect();
    for ls in model_map.keys() {
        if !test_map.contains_key(*ls) {
            return Err(DivergenceError::MissingTest((*ls).clone()));
        }
    }
    for ls in test_map.keys() {
        if !model_map.contains_key(*ls) {
            return Err(DivergenceError::MissingModel((*ls).clone()));
        }
    }
    let labels: Vec<LanguageScript> = model_map.keys().map(|l| (*l).clone()).collect();
    let n = labels.len();

    // All directed perplexities in parallel, then the symmetric max.
    let directed: Vec<f64> = (0..n * n)
        .into_par_iter()
        .map(|idx| {
            let (i, j) = (idx / n, idx % n);
            let model = model_map[&labels[j]];
            let test = test_map[&labels[i]];
            perplexity(model, test).map(|p| p.value)
        })
        .collect::<Result<_, _>>()?;
    let mut values = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            values[i * n + j] = directed[i * n + j].max(directed[j * n + i]);
        }
    }
    Ok(DivergenceMatrix { labels, values })
}

/// The `k` labels nearest to `ls`, ascending by divergence; ties broken
/// lexicographically by canonical tag.
pub fn nearest_neighbors(
    m: &DivergenceMatrix,
    ls: &LanguageScript,
    k: usize,
) -> Result<Vec<LanguageScript>, DivergenceError> {
    let i = m
        .index_of(ls)
        .ok_or_else(|| DivergenceError::UnknownLabel(ls.clone()))?;
    let mut others: Vec<usize> = (0..m.n()).filter(|&j| j != i).collect();
    others.sort_by(|&a, &b| {
        m.get(i, a)
            .partial_cmp(&m.get(i, b))
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| m.labels[a].cmp(&m.labels[b]))
    });
    Ok(others
        .into_iter()
        .take(k)
        .map(|j| m.labels[j].clone())
        .collect())
}

/// CF1: true iff the script is not among the expected scripts for the
/// language. Languages absent from the table are never rejected.
pub fn cf1_script_mismatch(
    ls: &LanguageScript,
    expected: &BTreeMap<String, BTreeSet<String>>,
) -> bool {
    match expected.get(ls.lang()) {
        Some(scripts) => !scripts.contains(ls.script()),
        None => false,
    }
}

/// CF2 advisory flag: a language-script whose nearest neighbor is (or is
/// not) in the same typological family.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cf2Flag {
    pub ls: LanguageScript,
    pub nearest: LanguageScript,
    pub same_family: bool,
}

impl Cf2Flag {
    pub fn to_line(&self) -> String {
        format!("{}\t{}\t{}", self.ls, self.nearest, self.same_family)
    }
}

/// Computes the nearest neighbor of every matrix label and reports whether
/// the pair shares a family group at the given level. Labels without family
/// data are skipped. Flags are advisory; nothing is removed.
pub fn cf2_flags(
    m: &DivergenceMatrix,
    families: &FamilyTreeSet,
    level: FamilyLevel,
) -> Vec<Cf2Flag> {
    let mut flags = Vec::new();
    for ls in &m.labels {
        let Some(tree) = families.get(ls) else {
            continue;
        };
        let Ok(neighbors) = nearest_neighbors(m, ls, 1) else {
            continue;
        };
        let Some(nearest) = neighbors.into_iter().next() else {
            continue; // single-language matrix
        };
        let same_family = families
            .get(&nearest)
            .map(|nt| same_group(tree, nt, level))
            .unwrap_or(false);
        flags.push(Cf2Flag {
            ls: ls.clone(),
            nearest,
            same_family,
        });
    }
    flags
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::charlm::train_char_lm;
    use crate::family::FamilyTree;
    use crate::model::{corpus_from_str, parse_language_script};

    fn ls(tag: &str) -> LanguageScript {
        parse_language_script(tag).unwrap()
    }

    fn pp(value: f64) -> Perplexity {
        Perplexity { value, n_events: 1 }
    }

    #[test]
    fn divergence_is_max() {
        assert_eq!(divergence(pp(10.0), pp(40.0)), 40.0);
        assert_eq!(divergence(pp(40.0), pp(10.0)), 40.0);
        assert_eq!(divergence(pp(7.0), pp(7.0)), 7.0);
    }

    fn two_language_setup() -> (Vec<CharNgramModel>, Vec<CorpusHandle>) {
        let eng_train = corpus_from_str(
            &"the sun rises in the east every day\n".repeat(20),
            ls("eng_Latn"),
            "t",
        );
        let rus_train = corpus_from_str(
            &"солнце встает на востоке каждый день\n".repeat(20),
            ls("rus_Cyrl"),
            "t",
        );
        let eng_test = corpus_from_str("the east sun sets\n", ls("eng_Latn"), "t");
        let rus_test = corpus_from_str("солнце на западе\n", ls("rus_Cyrl"), "t");
        let models = vec![
            train_char_lm(&eng_train, 3, 1000).unwrap(),
            train_char_lm(&rus_train, 3, 1000).unwrap(),
        ];
        (models, vec![eng_test, rus_test])
    }

    #[test]
    fn two_by_two_shape_and_symmetry() {
        let (models, tests) = two_language_setup();
        let m = divergence_matrix(&models, &tests).unwrap();
        assert_eq!(m.n(), 2);
        assert_eq!(m.get(0, 1), m.get(1, 0));
        // Cross divergence dwarfs both self-perplexities.
        assert!(m.get(0, 1) > m.get(0, 0));
        assert!(m.get(0, 1) > m.get(1, 1));
        // Diagonal is the self-perplexity.
        let self_pp = perplexity(&models[0], &tests[0]).unwrap().value;
        assert!((m.get(0, 0) - self_pp).abs() < 1e-12);
    }

    #[test]
    fn missing_test_is_reported() {
        let (models, tests) = two_language_setup();
        let err = divergence_matrix(&models, &tests[..1]).unwrap_err();
        assert!(matches!(err, DivergenceError::MissingTest(l) if l == ls("rus_Cyrl")));
        let err = divergence_matrix(&models[..1], &tests).unwrap_err();
        assert!(matches!(err, DivergenceError::MissingModel(l) if l == ls("rus_Cyrl")));
    }

    fn fixture_matrix() -> DivergenceMatrix {
        let labels = vec![
            ls("aaa_Latn"),
            ls("bbb_Latn"),
            ls("ccc_Latn"),
            ls("ddd_Latn"),
            ls("eee_Latn"),
            ls("fff_Latn"),
        ];
        let n = labels.len();
        let mut values = vec![0.0; n * n];
        let mut seed = 17u64;
        for i in 0..n {
            for j in (i + 1)..n {
                seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1);
                let v = 10.0 + (seed >> 33) as f64 / 1e8;
                values[i * n + j] = v;
                values[j * n + i] = v;
            }
            values[i * n + i] = 2.0;
        }
        DivergenceMatrix { labels, values }
    }

    #[test]
    fn k1_is_argmin_off_diagonal() {
        let m = fixture_matrix();
        let target = ls("aaa_Latn");
        let nn = nearest_neighbors(&m, &target, 1).unwrap();
        let i = 0;
        let best = (1..m.n())
            .min_by(|&a, &b| m.get(i, a).partial_cmp(&m.get(i, b)).unwrap())
            .unwrap();
        assert_eq!(nn, vec![m.labels[best].clone()]);
    }

    #[test]
    fn ties_break_lexicographically() {
        let labels = vec![ls("aaa_Latn"), ls("bbb_Latn"), ls("ccc_Latn")];
        // bbb and ccc equidistant from aaa.
        let values = vec![1.0, 5.0, 5.0, 5.0, 1.0, 9.0, 5.0, 9.0, 1.0];
        let m = DivergenceMatrix { labels, values };
        let nn = nearest_neighbors(&m, &ls("aaa_Latn"), 2).unwrap();
        assert_eq!(nn, vec![ls("bbb_Latn"), ls("ccc_Latn")]);
    }

    #[test]
    fn knn_matches_full_sort_oracle() {
        let m = fixture_matrix();
        for target in &m.labels {
            let i = m.index_of(target).unwrap();
            let mut oracle: Vec<(f64, LanguageScript)> = (0..m.n())
                .filter(|&j| j != i)
                .map(|j| (m.get(i, j), m.labels[j].clone()))
                .collect();
            oracle.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
            let expected: Vec<LanguageScript> = oracle.into_iter().take(3).map(|(_, l)| l).collect();
            assert_eq!(nearest_neighbors(&m, target, 3).unwrap(), expected);
        }
    }

    #[test]
    fn scaling_leaves_neighbors_unchanged() {
        let m = fixture_matrix();
        let scaled = DivergenceMatrix {
            labels: m.labels.clone(),
            values: m.values.iter().map(|v| v * 37.5).collect(),
        };
        for target in &m.labels {
            assert_eq!(
                nearest_neighbors(&m, target, 4).unwrap(),
                nearest_neighbors(&scaled, target, 4).unwrap()
            );
        }
    }

    #[test]
    fn unknown_label_errors() {
        let m = fixture_matrix();
        assert!(matches!(
            nearest_neighbors(&m, &ls("zzz_Latn"), 1),
            Err(DivergenceError::UnknownLabel(_))
        ));
    }

    #[test]
    fn cf1_examples() {
        let mut expected: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
        expected.insert("zho".into(), ["Hani".to_string()].into());
        expected.insert("tgk".into(), ["Cyrl".to_string(), "Arab".to_string()].into());
        assert!(cf1_script_mismatch(&ls("zho_Arab"), &expected));
        assert!(!cf1_script_mismatch(&ls("tgk_Cyrl"), &expected));
        assert!(!cf1_script_mismatch(&ls("xxx_Latn"), &expected));
    }

    #[test]
    fn cf2_flags_mislabeled_corpus() {
        // "may" claims to be Mayan but its text is nearest to English.
        let labels = vec![ls("eng_Latn"), ls("mam_Latn"), ls("deu_Latn")];
        let values = vec![
            2.0, 3.0, 8.0, //
            3.0, 2.0, 9.0, //
            8.0, 9.0, 2.0,
        ];
        let m = DivergenceMatrix { labels, values };
        let mut families = FamilyTreeSet::default();
        families.insert(FamilyTree::new(ls("eng_Latn"), vec!["IndoEuropean".into(), "Germanic".into()]).unwrap());
        families.insert(FamilyTree::new(ls("deu_Latn"), vec!["IndoEuropean".into(), "Germanic".into()]).unwrap());
        families.insert(FamilyTree::new(ls("mam_Latn"), vec!["Mayan".into()]).unwrap());
        let flags = cf2_flags(&m, &families, FamilyLevel::Depth(1));
        let mam = flags.iter().find(|f| f.ls == ls("mam_Latn")).unwrap();
        assert_eq!(mam.nearest, ls("eng_Latn"));
        assert!(!mam.same_family);
        let eng = flags.iter().find(|f| f.ls == ls("eng_Latn")).unwrap();
        assert!(!eng.same_family); // nearest is the mislabeled corpus
    }

    #[test]
    fn cf2_single_language_matrix_is_empty() {
        let m = DivergenceMatrix {
            labels: vec![ls("eng_Latn")],
            values: vec![2.0],
        };
        let mut families = FamilyTreeSet::default();
        families.insert(FamilyTree::new(ls("eng_Latn"), vec!["IndoEuropean".into()]).unwrap());
        assert!(cf2_flags(&m, &families, FamilyLevel::Depth(1)).is_empty());
    }

    #[test]
    fn tsv_round_trip() {
        let m = fixture_matrix();
        let parsed = DivergenceMatrix::from_tsv(&m.to_tsv()).unwrap();
        assert_eq!(parsed.labels, m.labels);
        for (a, b) in parsed.values.iter().zip(&m.values) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
