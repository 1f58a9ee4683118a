//! Typological family trees, the kNN family-classification evaluation, and
//! correlation utilities.
//!
//! A family tree is an ordered path of group identifiers, largest group
//! first. Two languages share a group at level `l` when the first
//! `min(l, depth_a, depth_b)` path elements agree: trees shorter than `l`
//! are compared at their maximum level.
//!
//! Tree file format: one line per language-script,
//! `tag<TAB>group1/group2/.../groupN`.

use std::collections::BTreeMap;

use crate::divergence::{nearest_neighbors, DivergenceMatrix};
use crate::model::{parse_language_script, LanguageScript};

#[derive(Debug, thiserror::Error)]
pub enum FamilyError {
    #[error("family path must be non-empty")]
    EmptyPath,
    #[error("repeated group identifier `{0}` in family path")]
    RepeatedGroup(String),
    #[error("malformed family file at line {line}: {msg}")]
    Malformed { line: usize, msg: String },
    #[error("no eligible languages for evaluation")]
    NoEligibleLanguages,
    #[error("unknown label {0}")]
    UnknownLabel(LanguageScript),
    #[error("inputs must have equal length >= 2 and nonzero variance")]
    DegenerateVariance,
}

/// Family tree of one language-script.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FamilyTree {
    pub ls: LanguageScript,
    pub path: Vec<String>,
}

impl FamilyTree {
    pub fn new(ls: LanguageScript, path: Vec<String>) -> Result<Self, FamilyError> {
        if path.is_empty() {
            return Err(FamilyError::EmptyPath);
        }
        for (i, g) in path.iter().enumerate() {
            if path[..i].contains(g) {
                return Err(FamilyError::RepeatedGroup(g.clone()));
            }
        }
        Ok(Self { ls, path })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FamilyTreeSet {
    trees: BTreeMap<LanguageScript, FamilyTree>,
}

impl FamilyTreeSet {
    pub fn insert(&mut self, tree: FamilyTree) {
        self.trees.insert(tree.ls.clone(), tree);
    }

    pub fn get(&self, ls: &LanguageScript) -> Option<&FamilyTree> {
        self.trees.get(ls)
    }

    pub fn len(&self) -> usize {
        self.trees.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trees.is_empty()
    }

    /// Parses the `tag<TAB>g1/g2/...` format.
    pub fn parse(text: &str) -> Result<Self, FamilyError> {
        let mut set = Self::default();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (tag, path) = line.split_once('\t').ok_or_else(|| FamilyError::Malformed {
                line: i + 1,
                msg: "expected tag<TAB>path".into(),
            })?;
            let ls = parse_language_script(tag.trim()).map_err(|e| FamilyError::Malformed {
                line: i + 1,
                msg: e.to_string(),
            })?;
            let path: Vec<String> = path
                .split('/')
                .map(|g| g.trim().to_string())
                .filter(|g| !g.is_empty())
                .collect();
            let tree = FamilyTree::new(ls, path).map_err(|e| FamilyError::Malformed {
                line: i + 1,
                msg: e.to_string(),
            })?;
            set.insert(tree);
        }
        Ok(set)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for tree in self.trees.values() {
            out.push_str(&format!("{}\t{}\n", tree.ls, tree.path.join("/")));
        }
        out
    }
}

/// Family tree comparison depth.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FamilyLevel {
    Depth(usize),
    /// Compare at each pair's maximum common depth.
    Max,
}

impl std::str::FromStr for FamilyLevel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.eq_ignore_ascii_case("max") {
            return Ok(FamilyLevel::Max);
        }
        let d: usize = s.parse().map_err(|_| format!("bad family level `{s}`"))?;
        if d == 0 {
            return Err("family level must be >= 1".into());
        }
        Ok(FamilyLevel::Depth(d))
    }
}

impl std::fmt::Display for FamilyLevel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            FamilyLevel::Depth(d) => write!(f, "{d}"),
            FamilyLevel::Max => write!(f, "max"),
        }
    }
}

/// True iff `a` and `b` share the family group prefix at the given level.
pub fn same_group(a: &FamilyTree, b: &FamilyTree, level: FamilyLevel) -> bool {
    let depth = match level {
        FamilyLevel::Depth(l) => l.min(a.path.len()).min(b.path.len()),
        FamilyLevel::Max => a.path.len().min(b.path.len()),
    };
    a.path[..depth] == b.path[..depth]
}

/// kNN family-classification accuracy over a divergence matrix.
///
/// Only labels with a family tree participate; a label is eligible when at
/// least one other covered label shares its group at the given level.
/// Majority ties count as incorrect.
pub fn knn_family_accuracy(
    m: &DivergenceMatrix,
    trees: &FamilyTreeSet,
    k: usize,
    level: FamilyLevel,
) -> Result<f64, FamilyError> {
    let covered: Vec<&LanguageScript> = m
        .labels
        .iter()
        .filter(|ls| trees.get(ls).is_some())
        .collect();
    let sub = restrict(m, &covered);

    let mut eligible = 0usize;
    let mut correct = 0usize;
    for ls in &sub.labels {
        let tree = trees.get(ls).expect("covered");
        let has_member = sub
            .labels
            .iter()
            .any(|other| other != ls && same_group(tree, trees.get(other).expect("covered"), level));
        if !has_member {
            continue;
        }
        eligible += 1;
        let neighbors =
            nearest_neighbors(&sub, ls, k.min(sub.labels.len() - 1)).expect("label in matrix");
        let votes = neighbors
            .iter()
            .filter(|n| same_group(tree, trees.get(n).expect("covered"), level))
            .count();
        if 2 * votes > neighbors.len() {
            correct += 1;
        }
    }
    if eligible == 0 {
        return Err(FamilyError::NoEligibleLanguages);
    }
    Ok(correct as f64 / eligible as f64)
}

fn restrict(m: &DivergenceMatrix, keep: &[&LanguageScript]) -> DivergenceMatrix {
    let idx: Vec<usize> = keep.iter().map(|ls| m.index_of(ls).expect("label")).collect();
    let n = idx.len();
    let mut values = vec![0.0; n * n];
    for (a, &i) in idx.iter().enumerate() {
        for (b, &j) in idx.iter().enumerate() {
            values[a * n + b] = m.get(i, j);
        }
    }
    DivergenceMatrix {
        labels: keep.iter().map(|ls| (*ls).clone()).collect(),
        values,
    }
}

/// Sample Pearson correlation coefficient.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<f64, FamilyError> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(FamilyError::DegenerateVariance);
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(FamilyError::DegenerateVariance);
    }
    Ok(sxy / (sxx * syy).sqrt())
}

/// Corpus size of `ls` plus the sizes of its `k` nearest neighbors.
pub fn joint_neighbor_size(
    m: &DivergenceMatrix,
    sizes: &BTreeMap<LanguageScript, usize>,
    ls: &LanguageScript,
    k: usize,
) -> Result<usize, FamilyError> {
    let own = *sizes.get(ls).ok_or_else(|| FamilyError::UnknownLabel(ls.clone()))?;
    if m.index_of(ls).is_none() {
        return Err(FamilyError::UnknownLabel(ls.clone()));
    }
    let neighbors = nearest_neighbors(m, ls, k).map_err(|_| FamilyError::UnknownLabel(ls.clone()))?;
    let mut total = own;
    for n in neighbors {
        total += *sizes.get(&n).ok_or(FamilyError::UnknownLabel(n))?;
    }
    Ok(total)
}
