//! Document labelers and label-file handling.
//!
//! Two built-in labelers produce per-document [`LabelVector`]s: a lexicon
//! matcher (a category fires when any token is in its word set) and a
//! distributed-dictionary scorer (cosine similarity between the document's
//! mean word vector and a category dictionary's mean vector). Labels can
//! also be read from a CSV file, which is how externally computed labels
//! enter the pipeline.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::{BufRead, BufReader, Read, Write};

use serde::{Deserialize, Serialize};

use crate::affect::{AffectCategory, LabelVector, CATEGORY_COUNT};
use crate::error::{Error, Result};

/// Word sets per category. Categories absent from the map simply never fire.
#[derive(Debug, Clone, Default)]
pub struct Lexicon {
    words: HashMap<AffectCategory, HashSet<String>>,
}

impl Lexicon {
    pub fn new() -> Self {
        Self::default()
    }

    /// Insert `word` into the set for `category`.
    pub fn insert(&mut self, category: AffectCategory, word: impl Into<String>) {
        self.words
            .entry(category)
            .or_default()
            .insert(word.into().to_lowercase());
    }

    /// Word set for `category`, empty if the category is absent.
    pub fn words(&self, category: AffectCategory) -> Option<&HashSet<String>> {
        self.words.get(&category)
    }

    pub fn contains(&self, category: AffectCategory, word: &str) -> bool {
        self.words
            .get(&category)
            .map(|set| set.contains(word))
            .unwrap_or(false)
    }

    /// Total number of (category, word) entries.
    pub fn len(&self) -> usize {
        self.words.values().map(HashSet::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Load `word<TAB>category` rows, optionally with a third 0/1
    /// association column (rows with 0 are ignored). Rows naming categories
    /// outside the 21-category scheme are skipped, so files carrying extra
    /// dimensions load cleanly.
    pub fn from_tsv<R: Read>(input: R) -> Result<Lexicon> {
        let reader = BufReader::new(input);
        let mut lexicon = Lexicon::new();
        for (idx, line) in reader.lines().enumerate() {
            let line = line?;
            let trimmed = line.trim();
            if trimmed.is_empty() {
                continue;
            }
            let fields: Vec<&str> = trimmed.split('\t').map(str::trim).collect();
            let (word, category, flag) = match fields.as_slice() {
                [w, c] => (*w, *c, "1"),
                [w, c, f] => (*w, *c, *f),
                _ => {
                    return Err(Error::malformed(
                        idx + 1,
                        "expected `word<TAB>category[<TAB>0|1]`",
                    ))
                }
            };
            if word.is_empty() || category.is_empty() {
                return Err(Error::malformed(idx + 1, "empty word or category"));
            }
            match flag {
                "1" => {}
                "0" => continue,
                other => {
                    return Err(Error::malformed(
                        idx + 1,
                        format!("association flag must be 0 or 1, got `{other}`"),
                    ))
                }
            }
            if let Ok(cat) = AffectCategory::parse(&category.to_lowercase()) {
                lexicon.insert(cat, word);
            }
        }
        Ok(lexicon)
    }
}

/// Label a document with the lexicon matcher: a category is on iff at least
/// one token is in its word set.
///
/// Adding tokens can only turn labels on, never off.
pub fn label_with_lexicon(tokens: &[String], lexicon: &Lexicon) -> LabelVector {
    let mut vector = LabelVector::all_off();
    for category in AffectCategory::ALL {
        if let Some(words) = lexicon.words(category) {
            if tokens.iter().any(|t| words.contains(t.as_str())) {
                vector.set(category, true);
            }
        }
    }
    vector
}

/// Token → embedding lookup with a fixed dimension.
#[derive(Debug, Clone)]
pub struct WordVectorTable {
    dim: usize,
    vectors: HashMap<String, Vec<f64>>,
}

impl WordVectorTable {
    /// Build from explicit entries; all vectors must share one dimension.
    pub fn new(entries: impl IntoIterator<Item = (String, Vec<f64>)>) -> Result<Self> {
        let mut dim = None;
        let mut vectors = HashMap::new();
        for (token, vector) in entries {
            match dim {
                None => dim = Some(vector.len()),
                Some(d) if d != vector.len() => {
                    return Err(Error::invalid(format!(
                        "vector for `{token}` has dimension {}, expected {d}",
                        vector.len()
                    )))
                }
                _ => {}
            }
            if vector.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid(format!(
                    "vector for `{token}` has a non-finite component"
                )));
            }
            vectors.insert(token, vector);
        }
        let dim = dim.ok_or_else(|| Error::invalid("word vector table is empty"))?;
        if dim == 0 {
            return Err(Error::invalid("word vectors must have dimension > 0"));
        }
        Ok(WordVectorTable { dim, vectors })
    }

    /// Load whitespace-separated `token v1 … vd` lines.
    pub fn from_text<R: Read>(input: R) -> Result<Self> {
        let reader = BufReader::new(input);
        let mut entries = Vec::new();
        for (idx, line) in reader.lines().enumerate() {
            let line = line?;
            let trimmed = line.trim();
            if trimmed.is_empty() {
                continue;
            }
            let mut parts = trimmed.split_whitespace();
            let token = parts.next().unwrap().to_string();
            let values: std::result::Result<Vec<f64>, _> =
                parts.map(str::parse::<f64>).collect();
            let values =
                values.map_err(|e| Error::malformed(idx + 1, format!("bad component: {e}")))?;
            if values.is_empty() {
                return Err(Error::malformed(idx + 1, "token has no components"));
            }
            entries.push((token, values));
        }
        WordVectorTable::new(entries)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, token: &str) -> Option<&[f64]> {
        self.vectors.get(token).map(Vec::as_slice)
    }

    pub fn contains(&self, token: &str) -> bool {
        self.vectors.contains_key(token)
    }
}

/// Options for the distributed-dictionary labeler.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DdrConfig {
    /// Cosine similarity at or above which a category fires.
    pub threshold: f64,
    /// Minimum number of document tokens covered by the vector table for the
    /// document to be scoreable at all.
    pub min_covered_tokens: usize,
}

impl Default for DdrConfig {
    fn default() -> Self {
        DdrConfig {
            threshold: 0.3,
            min_covered_tokens: 1,
        }
    }
}

impl DdrConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.threshold.is_finite() && (-1.0..=1.0).contains(&self.threshold)) {
            return Err(Error::config(format!(
                "ddr threshold must be in [-1, 1], got {}",
                self.threshold
            )));
        }
        if self.min_covered_tokens == 0 {
            return Err(Error::config(
                "ddr min_covered_tokens must be at least 1",
            ));
        }
        Ok(())
    }
}

fn mean_vector<'a>(
    words: impl Iterator<Item = &'a str>,
    table: &WordVectorTable,
) -> (Vec<f64>, usize) {
    let mut sum = vec![0.0f64; table.dim()];
    let mut covered = 0usize;
    for word in words {
        if let Some(vector) = table.get(word) {
            for (s, v) in sum.iter_mut().zip(vector) {
                *s += v;
            }
            covered += 1;
        }
    }
    if covered > 0 {
        for s in sum.iter_mut() {
            *s /= covered as f64;
        }
    }
    (sum, covered)
}

fn cosine(a: &[f64], b: &[f64]) -> Option<f64> {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return None;
    }
    Some(dot / (na * nb))
}

/// Cosine similarity between the document's mean token vector and the
/// dictionary's mean word vector.
///
/// Token repetitions count: the document vector averages over occurrences.
/// Returns `None` (uncovered) when no token or no dictionary word is in the
/// table, or when either mean vector has zero norm.
pub fn ddr_score(
    tokens: &[String],
    dictionary: &HashSet<String>,
    table: &WordVectorTable,
) -> Option<f64> {
    let (doc_mean, doc_covered) = mean_vector(tokens.iter().map(String::as_str), table);
    if doc_covered == 0 {
        return None;
    }
    let (dict_mean, dict_covered) = mean_vector(dictionary.iter().map(String::as_str), table);
    if dict_covered == 0 {
        return None;
    }
    cosine(&doc_mean, &dict_mean)
}

/// Label a document with the distributed-dictionary scorer. Each category's
/// dictionary is its lexicon word set; a category fires when the document is
/// covered (≥ `min_covered_tokens` tokens in the table) and its score
/// reaches the threshold. Uncovered documents get every label off.
pub fn label_with_ddr(
    tokens: &[String],
    lexicon: &Lexicon,
    table: &WordVectorTable,
    config: &DdrConfig,
) -> LabelVector {
    let mut vector = LabelVector::all_off();
    let covered = tokens.iter().filter(|t| table.contains(t)).count();
    if covered < config.min_covered_tokens {
        return vector;
    }
    for category in AffectCategory::ALL {
        let Some(dictionary) = lexicon.words(category) else {
            continue;
        };
        if let Some(score) = ddr_score(tokens, dictionary, table) {
            if score >= config.threshold {
                vector.set(category, true);
            }
        }
    }
    vector
}

/// Outcome of aligning a label file against a corpus.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct LabelCoverage {
    /// Ids present in the label file but not in the corpus.
    pub unknown_ids: usize,
    /// Corpus posts with no label row (assigned all-off).
    pub unlabeled_posts: usize,
}

/// Read a label CSV: header `id` plus category columns, values 0/1.
///
/// Category columns may be any subset of the 21 names (missing categories
/// stay off); an unrecognised column name is an error. Duplicate ids are
/// allowed only when their label vectors agree.
pub fn load_labels<R: Read>(input: R) -> Result<HashMap<String, LabelVector>> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let headers = reader.headers()?.clone();
    let mut header_iter = headers.iter().map(str::trim);
    match header_iter.next() {
        Some("id") => {}
        other => {
            return Err(Error::invalid(format!(
                "label csv must start with an `id` column, found {other:?}"
            )))
        }
    }
    let mut columns = Vec::new();
    for name in header_iter {
        let category = AffectCategory::parse(name).map_err(|_| {
            Error::invalid(format!("unknown label column `{name}`"))
        })?;
        columns.push(category);
    }

    let mut labels: HashMap<String, LabelVector> = HashMap::new();
    for result in reader.records() {
        let record = result?;
        let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
        let id = record
            .get(0)
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .ok_or_else(|| Error::malformed(line, "empty id"))?
            .to_string();
        let mut vector = LabelVector::all_off();
        for (i, category) in columns.iter().enumerate() {
            let raw = record.get(i + 1).map(str::trim).unwrap_or("");
            let on = match raw {
                "0" => false,
                "1" => true,
                other => {
                    return Err(Error::malformed(
                        line,
                        format!("label values must be 0 or 1, got `{other}`"),
                    ))
                }
            };
            vector.set(*category, on);
        }
        if let Some(existing) = labels.get(&id) {
            if *existing != vector {
                return Err(Error::Conflict {
                    id,
                    message: "duplicate label rows disagree".to_string(),
                });
            }
        } else {
            labels.insert(id, vector);
        }
    }
    Ok(labels)
}

/// Write labels as CSV with the full 21-column header, rows in `ids` order.
pub fn write_labels<W: Write>(
    output: W,
    ids: &[String],
    labels: &HashMap<String, LabelVector>,
) -> Result<()> {
    let mut writer = csv::Writer::from_writer(output);
    let mut header = vec!["id".to_string()];
    header.extend(AffectCategory::ALL.iter().map(|c| c.name().to_string()));
    writer.write_record(&header)?;
    for id in ids {
        let vector = labels.get(id).copied().unwrap_or_else(LabelVector::all_off);
        let mut row = vec![id.clone()];
        row.extend(
            vector
                .flags()
                .iter()
                .map(|f| if *f { "1".to_string() } else { "0".to_string() }),
        );
        writer.write_record(&row)?;
    }
    writer.flush()?;
    Ok(())
}

/// Pair a corpus's post ids with vectors from a label map. Posts without a
/// row get all categories off; rows without a post are counted.
pub fn align_labels(
    labels: &HashMap<String, LabelVector>,
    corpus_ids: &[String],
) -> (Vec<LabelVector>, LabelCoverage) {
    let id_set: HashSet<&str> = corpus_ids.iter().map(String::as_str).collect();
    let unknown_ids = labels
        .keys()
        .filter(|id| !id_set.contains(id.as_str()))
        .count();
    let mut unlabeled_posts = 0usize;
    let vectors = corpus_ids
        .iter()
        .map(|id| match labels.get(id) {
            Some(v) => *v,
            None => {
                unlabeled_posts += 1;
                LabelVector::all_off()
            }
        })
        .collect();
    (
        vectors,
        LabelCoverage {
            unknown_ids,
            unlabeled_posts,
        },
    )
}

/// Precision/recall/F1 for one category.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CategoryScore {
    pub category: AffectCategory,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Gold positives among the shared ids.
    pub support: usize,
}

/// Per-category agreement between predicted and gold labels, computed over
/// the ids present in both maps (sorted for determinism).
///
/// Conventions: precision is 1 when there are no predicted positives, recall
/// is 1 when there are no gold positives, and F1 is 0 when precision and
/// recall are both 0.
pub fn f1_scores(
    predicted: &HashMap<String, LabelVector>,
    gold: &HashMap<String, LabelVector>,
) -> Result<[CategoryScore; CATEGORY_COUNT]> {
    let mut shared: Vec<&String> = predicted.keys().filter(|id| gold.contains_key(*id)).collect();
    if shared.is_empty() {
        return Err(Error::invalid(
            "no shared ids between predicted and gold labels",
        ));
    }
    shared.sort();

    let mut scores = [CategoryScore {
        category: AffectCategory::Anticipation,
        precision: 0.0,
        recall: 0.0,
        f1: 0.0,
        support: 0,
    }; CATEGORY_COUNT];

    for category in AffectCategory::ALL {
        let (mut tp, mut fp, mut fn_) = (0usize, 0usize, 0usize);
        for id in &shared {
            let p = predicted[*id].get(category);
            let g = gold[*id].get(category);
            match (p, g) {
                (true, true) => tp += 1,
                (true, false) => fp += 1,
                (false, true) => fn_ += 1,
                (false, false) => {}
            }
        }
        let precision = if tp + fp == 0 {
            1.0
        } else {
            tp as f64 / (tp + fp) as f64
        };
        let recall = if tp + fn_ == 0 {
            1.0
        } else {
            tp as f64 / (tp + fn_) as f64
        };
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        scores[category.index()] = CategoryScore {
            category,
            precision,
            recall,
            f1,
            support: tp + fn_,
        };
    }
    Ok(scores)
}

/// Render per-category scores as a BTreeMap keyed by category name, which
/// serializes in canonical-friendly sorted order.
pub fn scores_by_name(
    scores: &[CategoryScore; CATEGORY_COUNT],
) -> BTreeMap<String, CategoryScore> {
    scores
        .iter()
        .map(|s| (s.category.name().to_string(), *s))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn tokens(words: &[&str]) -> Vec<String> {
        words.iter().map(|w| w.to_string()).collect()
    }

    fn anger_fear_lexicon() -> Lexicon {
        let mut lex = Lexicon::new();
        lex.insert(AffectCategory::Anger, "furious");
        lex.insert(AffectCategory::Anger, "outraged");
        lex.insert(AffectCategory::Fear, "terrified");
        lex
    }

    // ---- lexicon labeling ------------------------------------------------

    #[test]
    fn lexicon_flags_on_single_hit() {
        let v = label_with_lexicon(&tokens(&["so", "furious", "today"]), &anger_fear_lexicon());
        assert!(v.get(AffectCategory::Anger));
        assert!(!v.get(AffectCategory::Fear));
        assert!(!v.get(AffectCategory::Joy));
    }

    #[test]
    fn empty_tokens_label_all_off() {
        let v = label_with_lexicon(&[], &anger_fear_lexicon());
        assert_eq!(v.count_on(), 0);
    }

    #[test]
    fn categories_missing_from_lexicon_never_fire() {
        let v = label_with_lexicon(&tokens(&["joyful"]), &anger_fear_lexicon());
        assert!(!v.get(AffectCategory::Joy));
    }

    #[test]
    fn lexicon_tsv_loader_handles_flags_and_unknown_categories() {
        let input = "furious\tanger\t1\ncalm\tanger\t0\nlove\tpositive\t1\nterrified\tfear\n";
        let lex = Lexicon::from_tsv(input.as_bytes()).unwrap();
        assert!(lex.contains(AffectCategory::Anger, "furious"));
        assert!(!lex.contains(AffectCategory::Anger, "calm"));
        assert!(lex.contains(AffectCategory::Fear, "terrified"));
        assert_eq!(lex.len(), 2);
    }

    proptest! {
        /// Adding tokens never turns a lexicon label off.
        #[test]
        fn lexicon_labeling_is_monotone(
            base in proptest::collection::vec("[a-z]{1,8}", 0..10),
            extra in proptest::collection::vec("[a-z]{1,8}", 0..10),
        ) {
            let lex = anger_fear_lexicon();
            let before = label_with_lexicon(&base, &lex);
            let mut all = base.clone();
            all.extend(extra);
            let after = label_with_lexicon(&all, &lex);
            for c in AffectCategory::ALL {
                prop_assert!(!before.get(c) || after.get(c));
            }
        }
    }

    // ---- word vectors and DDR --------------------------------------------

    fn table(entries: &[(&str, &[f64])]) -> WordVectorTable {
        WordVectorTable::new(
            entries
                .iter()
                .map(|(t, v)| (t.to_string(), v.to_vec())),
        )
        .unwrap()
    }

    /// Independent cosine oracle with its own accumulation order.
    fn cosine_oracle(a: &[f64], b: &[f64]) -> f64 {
        let mut dot = 0.0;
        let mut na = 0.0;
        let mut nb = 0.0;
        for i in 0..a.len() {
            dot += a[i] * b[i];
            na += a[i] * a[i];
            nb += b[i] * b[i];
        }
        dot / (na.sqrt() * nb.sqrt())
    }

    #[test]
    fn ddr_matches_hand_computed_mean_vector_case() {
        // Document {a, b} with a=(1,0), b=(0,1): mean (0.5, 0.5).
        // Dictionary {c} with c=(1,0). cos((0.5,0.5),(1,0)) = 1/√2.
        let tbl = table(&[("a", &[1.0, 0.0]), ("b", &[0.0, 1.0]), ("c", &[1.0, 0.0])]);
        let dict: HashSet<String> = ["c".to_string()].into_iter().collect();
        let score = ddr_score(&tokens(&["a", "b"]), &dict, &tbl).unwrap();
        assert_abs_diff_eq!(score, std::f64::consts::FRAC_1_SQRT_2, epsilon = 1e-12);
        assert_abs_diff_eq!(
            score,
            cosine_oracle(&[0.5, 0.5], &[1.0, 0.0]),
            epsilon = 1e-15
        );
    }

    #[test]
    fn ddr_identical_and_orthogonal_directions() {
        let tbl = table(&[("x", &[2.0, 0.0]), ("y", &[0.0, 3.0])]);
        let dict_x: HashSet<String> = ["x".to_string()].into_iter().collect();
        let dict_y: HashSet<String> = ["y".to_string()].into_iter().collect();
        assert_abs_diff_eq!(
            ddr_score(&tokens(&["x"]), &dict_x, &tbl).unwrap(),
            1.0,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            ddr_score(&tokens(&["x"]), &dict_y, &tbl).unwrap(),
            0.0,
            epsilon = 1e-15
        );
    }

    #[test]
    fn ddr_token_repetitions_shift_the_mean() {
        let tbl = table(&[("a", &[1.0, 0.0]), ("b", &[0.0, 1.0])]);
        let dict: HashSet<String> = ["a".to_string()].into_iter().collect();
        let once = ddr_score(&tokens(&["a", "b"]), &dict, &tbl).unwrap();
        let twice = ddr_score(&tokens(&["a", "a", "b"]), &dict, &tbl).unwrap();
        assert!(twice > once, "repeating a dictionary word raises the score");
    }

    #[test]
    fn ddr_uncovered_document_is_none() {
        let tbl = table(&[("a", &[1.0, 0.0])]);
        let dict: HashSet<String> = ["a".to_string()].into_iter().collect();
        assert_eq!(ddr_score(&tokens(&["zzz"]), &dict, &tbl), None);
        // Dictionary with no covered words is also unscoreable.
        let empty_dict: HashSet<String> = ["missing".to_string()].into_iter().collect();
        assert_eq!(ddr_score(&tokens(&["a"]), &empty_dict, &tbl), None);
    }

    #[test]
    fn ddr_zero_norm_mean_vector_is_none() {
        // Tokens average to the zero vector.
        let tbl = table(&[("p", &[1.0, 0.0]), ("q", &[-1.0, 0.0]), ("d", &[1.0, 1.0])]);
        let dict: HashSet<String> = ["d".to_string()].into_iter().collect();
        assert_eq!(ddr_score(&tokens(&["p", "q"]), &dict, &tbl), None);
    }

    #[test]
    fn label_with_ddr_applies_threshold_and_coverage_gate() {
        let tbl = table(&[("a", &[1.0, 0.0]), ("b", &[0.0, 1.0]), ("furious", &[1.0, 0.0])]);
        let mut lex = Lexicon::new();
        lex.insert(AffectCategory::Anger, "furious");
        let config = DdrConfig {
            threshold: 0.3,
            min_covered_tokens: 1,
        };
        // Score 1/√2 ≈ 0.707 ≥ 0.3 → on.
        let v = label_with_ddr(&tokens(&["a", "b"]), &lex, &tbl, &config);
        assert!(v.get(AffectCategory::Anger));
        // Raised threshold → off.
        let strict = DdrConfig {
            threshold: 0.8,
            ..config
        };
        let v = label_with_ddr(&tokens(&["a", "b"]), &lex, &tbl, &strict);
        assert!(!v.get(AffectCategory::Anger));
        // Uncovered document → all off.
        let v = label_with_ddr(&tokens(&["zzz"]), &lex, &tbl, &config);
        assert_eq!(v.count_on(), 0);
        // Coverage gate: require 2 covered tokens, only 1 present.
        let gated = DdrConfig {
            min_covered_tokens: 2,
            ..config
        };
        let v = label_with_ddr(&tokens(&["a", "zzz"]), &lex, &tbl, &gated);
        assert_eq!(v.count_on(), 0);
    }

    proptest! {
        /// Scaling every table vector by a power of two leaves DDR scores
        /// bit-identical (cosine is scale-free, and power-of-two scaling is
        /// exact in floating point).
        #[test]
        fn ddr_score_is_invariant_under_pow2_table_scaling(
            exp in -3i32..4,
            ax in -4.0f64..4.0, ay in -4.0f64..4.0,
            bx in -4.0f64..4.0, by in -4.0f64..4.0,
        ) {
            prop_assume!(ax.abs() + ay.abs() > 1e-3);
            prop_assume!(bx.abs() + by.abs() > 1e-3);
            let scale = (2.0f64).powi(exp);
            let base = table(&[("a", &[ax, ay]), ("d", &[bx, by])]);
            let scaled = table(&[
                ("a", &[ax * scale, ay * scale]),
                ("d", &[bx * scale, by * scale]),
            ]);
            let dict: HashSet<String> = ["d".to_string()].into_iter().collect();
            let doc = tokens(&["a"]);
            let s1 = ddr_score(&doc, &dict, &base);
            let s2 = ddr_score(&doc, &dict, &scaled);
            prop_assert_eq!(s1, s2);
        }
    }

    #[test]
    fn vector_table_rejects_mixed_dimensions_and_bad_rows() {
        let err = WordVectorTable::new(vec![
            ("a".to_string(), vec![1.0]),
            ("b".to_string(), vec![1.0, 2.0]),
        ])
        .unwrap_err();
        assert!(matches!(err, Error::InvalidInput(_)));
        let err = WordVectorTable::from_text("a 1.0 oops\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Malformed { line: 1, .. }));
        let ok = WordVectorTable::from_text("a 1.0 2.0\nb -0.5 0.5\n".as_bytes()).unwrap();
        assert_eq!(ok.dim(), 2);
        assert_eq!(ok.get("b"), Some(&[-0.5, 0.5][..]));
    }

    // ---- label files -----------------------------------------------------

    #[test]
    fn load_labels_reads_subset_columns() {
        let input = "id,fear,anger\na,1,0\nb,0,1\n";
        let labels = load_labels(input.as_bytes()).unwrap();
        assert!(labels["a"].get(AffectCategory::Fear));
        assert!(!labels["a"].get(AffectCategory::Anger));
        assert!(labels["b"].get(AffectCategory::Anger));
        assert_eq!(labels["a"].count_on(), 1);
    }

    #[test]
    fn load_labels_rejects_conflicting_duplicates_but_allows_identical() {
        let conflicting = "id,fear\na,1\na,0\n";
        let err = load_labels(conflicting.as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Conflict { .. }));
        let identical = "id,fear\na,1\na,1\n";
        let labels = load_labels(identical.as_bytes()).unwrap();
        assert_eq!(labels.len(), 1);
    }

    #[test]
    fn load_labels_rejects_unknown_columns_and_values() {
        let err = load_labels("id,sarcasm\na,1\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::InvalidInput(_)));
        let err = load_labels("id,fear\na,yes\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Malformed { .. }));
    }

    #[test]
    fn align_labels_counts_unknown_and_unlabeled() {
        let labels = load_labels("id,fear\na,1\nghost,1\n".as_bytes()).unwrap();
        let corpus_ids = vec!["a".to_string(), "b".to_string()];
        let (vectors, coverage) = align_labels(&labels, &corpus_ids);
        assert_eq!(vectors.len(), 2);
        assert!(vectors[0].get(AffectCategory::Fear));
        assert_eq!(vectors[1].count_on(), 0);
        assert_eq!(coverage.unknown_ids, 1);
        assert_eq!(coverage.unlabeled_posts, 1);
    }

    #[test]
    fn label_csv_round_trips_through_writer_and_loader() {
        let mut labels = HashMap::new();
        let mut v = LabelVector::all_off();
        v.set(AffectCategory::Subversion, true);
        v.set(AffectCategory::Anger, true);
        labels.insert("p1".to_string(), v);
        labels.insert("p2".to_string(), LabelVector::all_off());
        let ids = vec!["p1".to_string(), "p2".to_string()];
        let mut buffer = Vec::new();
        write_labels(&mut buffer, &ids, &labels).unwrap();
        let reread = load_labels(buffer.as_slice()).unwrap();
        assert_eq!(reread, labels);
    }

    // ---- F1 --------------------------------------------------------------

    fn single_label_map(entries: &[(&str, AffectCategory, bool)]) -> HashMap<String, LabelVector> {
        let mut map: HashMap<String, LabelVector> = HashMap::new();
        for (id, cat, on) in entries {
            let entry = map.entry(id.to_string()).or_insert_with(LabelVector::all_off);
            entry.set(*cat, *on);
        }
        map
    }

    #[test]
    fn f1_perfect_agreement_is_one() {
        let cat = AffectCategory::Anger;
        let labels = single_label_map(&[("a", cat, true), ("b", cat, false), ("c", cat, true)]);
        let scores = f1_scores(&labels, &labels).unwrap();
        let s = scores[cat.index()];
        assert_eq!((s.precision, s.recall, s.f1), (1.0, 1.0, 1.0));
        assert_eq!(s.support, 2);
    }

    #[test]
    fn f1_tp_fp_fn_one_each_gives_half() {
        // Gold positives {a, b}; predicted positives {a, c}.
        let cat = AffectCategory::Fear;
        let gold = single_label_map(&[("a", cat, true), ("b", cat, true), ("c", cat, false)]);
        let predicted =
            single_label_map(&[("a", cat, true), ("b", cat, false), ("c", cat, true)]);
        let s = f1_scores(&predicted, &gold).unwrap()[cat.index()];
        assert_eq!((s.precision, s.recall, s.f1), (0.5, 0.5, 0.5));
        assert_eq!(s.support, 2);
    }

    #[test]
    fn f1_zero_when_no_overlap_in_positives() {
        let cat = AffectCategory::Joy;
        let gold = single_label_map(&[("a", cat, true), ("b", cat, false)]);
        let predicted = single_label_map(&[("a", cat, false), ("b", cat, true)]);
        let s = f1_scores(&predicted, &gold).unwrap()[cat.index()];
        assert_eq!((s.precision, s.recall, s.f1), (0.0, 0.0, 0.0));
    }

    #[test]
    fn f1_empty_intersection_is_an_error() {
        let gold = single_label_map(&[("a", AffectCategory::Joy, true)]);
        let predicted = single_label_map(&[("z", AffectCategory::Joy, true)]);
        assert!(matches!(
            f1_scores(&predicted, &gold).unwrap_err(),
            Error::InvalidInput(_)
        ));
    }

    proptest! {
        /// Swapping predicted and gold swaps precision and recall and leaves
        /// F1 unchanged; all three stay in [0, 1].
        #[test]
        fn f1_swap_symmetry_and_bounds(
            rows in proptest::collection::vec((0usize..6, any::<bool>(), any::<bool>()), 1..24)
        ) {
            let mut predicted = HashMap::new();
            let mut gold = HashMap::new();
            for (id, p, g) in &rows {
                let id = format!("d{id}");
                let pe = predicted.entry(id.clone()).or_insert_with(LabelVector::all_off);
                if *p { pe.set(AffectCategory::Anger, true); }
                let ge = gold.entry(id).or_insert_with(LabelVector::all_off);
                if *g { ge.set(AffectCategory::Anger, true); }
            }
            let forward = f1_scores(&predicted, &gold).unwrap();
            let backward = f1_scores(&gold, &predicted).unwrap();
            for c in AffectCategory::ALL {
                let f = forward[c.index()];
                let b = backward[c.index()];
                prop_assert_eq!(f.precision, b.recall);
                prop_assert_eq!(f.recall, b.precision);
                prop_assert!((f.f1 - b.f1).abs() < 1e-12);
                for v in [f.precision, f.recall, f.f1] {
                    prop_assert!((0.0..=1.0).contains(&v));
                }
            }
        }
    }
}
