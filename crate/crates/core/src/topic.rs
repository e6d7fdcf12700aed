//! Topic extraction around change points.
//!
//! Documents are embedded as L2-normalised TF-IDF vectors (or caller-supplied
//! dense vectors), clustered with spherical k-means, and each cluster is
//! summarised by class-based TF-IDF keywords. A change point is explained by
//! comparing topics from the three days before it against the three days
//! starting at it: an after-topic whose keyword set overlaps every
//! before-topic by less than a Jaccard threshold is *emerging*. Coherence
//! (NPMI) and keyword diversity score topic quality.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::derive_seed;

/// Days before the change date included in the "before" window.
pub const BEFORE_WINDOW_DAYS: usize = 3;
/// Days from the change date included in the "after" window.
pub const AFTER_WINDOW_DAYS: usize = 3;

/// Ranked keywords kept per topic never fall below this, so diversity over
/// the top 25 terms is always computable.
const KEYWORD_CAPACITY_FLOOR: usize = 25;

/// Smoothing added to the joint probability in NPMI so never-co-occurring
/// pairs score a finite minimum instead of −∞.
const NPMI_EPSILON: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TopicConfig {
    /// Requested clusters; the effective number is capped at ⌊docs/5⌋.
    pub n_topics: usize,
    /// Keywords reported per topic.
    pub top_keywords: usize,
    /// Minimum documents per window; below this the change point is left
    /// unexplained instead of clustering noise.
    pub min_docs: usize,
    /// An after-topic is emerging when its keyword Jaccard overlap with
    /// every before-topic is strictly below this.
    pub emerging_threshold: f64,
    /// Lloyd iteration cap.
    pub max_iters: usize,
    /// Seed for cluster initialisation.
    pub rng_seed: u64,
}

impl Default for TopicConfig {
    fn default() -> Self {
        TopicConfig {
            n_topics: 10,
            top_keywords: 10,
            min_docs: 20,
            emerging_threshold: 0.2,
            max_iters: 300,
            rng_seed: 0,
        }
    }
}

impl TopicConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_topics == 0 {
            return Err(Error::config("n_topics must be positive"));
        }
        if self.top_keywords == 0 {
            return Err(Error::config("top_keywords must be positive"));
        }
        if !(0.0..=1.0).contains(&self.emerging_threshold) {
            return Err(Error::config("emerging_threshold must lie in [0, 1]"));
        }
        if self.max_iters == 0 {
            return Err(Error::config("max_iters must be positive"));
        }
        Ok(())
    }
}

/// One extracted topic: ranked `(term, weight)` keywords and the number of
/// documents assigned to its cluster.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Topic {
    pub keywords: Vec<(String, f64)>,
    pub size: usize,
}

impl Topic {
    /// The topic's top `n` keyword terms as a set.
    pub fn top_terms(&self, n: usize) -> BTreeSet<&str> {
        self.keywords
            .iter()
            .take(n)
            .map(|(term, _)| term.as_str())
            .collect()
    }
}

/// Topics on both sides of a change point plus the emerging verdicts.
#[derive(Debug, Clone, PartialEq)]
pub struct EmergingTopics {
    pub before: Vec<Topic>,
    pub after: Vec<Topic>,
    /// Indices into `after` of topics that are new relative to every
    /// before-topic.
    pub emerging: Vec<usize>,
    /// True when either window had fewer than `min_docs` documents; no
    /// topics are extracted in that case.
    pub unexplained: bool,
}

/// Sparse vector sorted by term id.
type SparseVec = Vec<(u32, f64)>;

fn sparse_dot(a: &SparseVec, b: &SparseVec) -> f64 {
    let (mut i, mut j) = (0, 0);
    let mut acc = 0.0;
    while i < a.len() && j < b.len() {
        match a[i].0.cmp(&b[j].0) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                acc += a[i].1 * b[j].1;
                i += 1;
                j += 1;
            }
        }
    }
    acc
}

/// L2-normalise in place; false when the norm is zero.
fn sparse_normalize(v: &mut SparseVec) -> bool {
    let norm: f64 = v.iter().map(|(_, w)| w * w).sum::<f64>().sqrt();
    if norm == 0.0 || !norm.is_finite() {
        return false;
    }
    for (_, w) in v.iter_mut() {
        *w /= norm;
    }
    true
}

/// TF-IDF vectors over the non-empty documents. The IDF is `ln(n/df) + 1`:
/// the +1 keeps weights positive even for terms present in every document,
/// so a corpus of identical documents still embeds to usable vectors.
fn tfidf_vectors(docs: &[&Vec<String>]) -> Vec<SparseVec> {
    let mut vocab: BTreeMap<&str, u32> = BTreeMap::new();
    for doc in docs {
        for token in doc.iter() {
            let next = vocab.len() as u32;
            vocab.entry(token.as_str()).or_insert(next);
        }
    }
    let mut df = vec![0u32; vocab.len()];
    let mut counts: Vec<BTreeMap<u32, u32>> = Vec::with_capacity(docs.len());
    for doc in docs {
        let mut c: BTreeMap<u32, u32> = BTreeMap::new();
        for token in doc.iter() {
            *c.entry(vocab[token.as_str()]).or_insert(0) += 1;
        }
        for id in c.keys() {
            df[*id as usize] += 1;
        }
        counts.push(c);
    }
    let n = docs.len() as f64;
    let idf: Vec<f64> = df
        .iter()
        .map(|d| (n / *d as f64).ln() + 1.0)
        .collect();
    counts
        .into_iter()
        .map(|c| {
            let mut v: SparseVec = c
                .into_iter()
                .map(|(id, count)| (id, count as f64 * idf[id as usize]))
                .collect();
            sparse_normalize(&mut v);
            v
        })
        .collect()
}

/// Spherical k-means on unit vectors: farthest-point seeding from a seeded
/// starting document, then Lloyd iterations under cosine similarity.
///
/// Deterministic for a fixed seed: all ties resolve to the lowest index and
/// empty clusters keep their previous centroid.
fn kmeans_sparse(
    vectors: &[SparseVec],
    k: usize,
    max_iters: usize,
    rng_seed: u64,
) -> Vec<usize> {
    let n = vectors.len();
    debug_assert!(k >= 1 && k <= n);
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut centers: Vec<SparseVec> = Vec::with_capacity(k);
    centers.push(vectors[rng.gen_range(0..n)].clone());
    while centers.len() < k {
        let mut best_idx = 0;
        let mut best_dist = f64::NEG_INFINITY;
        for (i, v) in vectors.iter().enumerate() {
            let min_dist = centers
                .iter()
                .map(|c| 1.0 - sparse_dot(v, c))
                .fold(f64::INFINITY, f64::min);
            if min_dist > best_dist {
                best_dist = min_dist;
                best_idx = i;
            }
        }
        centers.push(vectors[best_idx].clone());
    }

    let mut assignments = vec![0usize; n];
    for _ in 0..max_iters {
        let mut changed = false;
        for (i, v) in vectors.iter().enumerate() {
            let mut best_c = 0;
            let mut best_sim = f64::NEG_INFINITY;
            for (c, center) in centers.iter().enumerate() {
                let sim = sparse_dot(v, center);
                if sim > best_sim {
                    best_sim = sim;
                    best_c = c;
                }
            }
            if assignments[i] != best_c {
                assignments[i] = best_c;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        for (c, center) in centers.iter_mut().enumerate() {
            let mut sum: BTreeMap<u32, f64> = BTreeMap::new();
            let mut any = false;
            for (i, v) in vectors.iter().enumerate() {
                if assignments[i] == c {
                    any = true;
                    for (id, w) in v {
                        *sum.entry(*id).or_insert(0.0) += w;
                    }
                }
            }
            if any {
                let mut next: SparseVec = sum.into_iter().collect();
                if sparse_normalize(&mut next) {
                    *center = next;
                }
            }
        }
    }
    assignments
}

/// Public dense-vector clustering entry point, used when documents come with
/// external embeddings instead of TF-IDF.
pub fn spherical_kmeans(
    vectors: &[Vec<f64>],
    k: usize,
    max_iters: usize,
    rng_seed: u64,
) -> Result<Vec<usize>> {
    if vectors.is_empty() {
        return Err(Error::invalid("cannot cluster zero vectors"));
    }
    if k == 0 || k > vectors.len() {
        return Err(Error::invalid(format!(
            "cluster count {k} must lie in 1..={}",
            vectors.len()
        )));
    }
    let dim = vectors[0].len();
    let mut sparse: Vec<SparseVec> = Vec::with_capacity(vectors.len());
    for (i, v) in vectors.iter().enumerate() {
        if v.len() != dim {
            return Err(Error::invalid("vectors must share one dimension"));
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid(format!("vector {i} is not finite")));
        }
        let mut s: SparseVec = v
            .iter()
            .enumerate()
            .filter(|(_, x)| **x != 0.0)
            .map(|(j, x)| (j as u32, *x))
            .collect();
        if !sparse_normalize(&mut s) {
            return Err(Error::invalid(format!("vector {i} has zero norm")));
        }
        sparse.push(s);
    }
    Ok(kmeans_sparse(&sparse, k, max_iters, rng_seed))
}

/// Class-based TF-IDF keywords per cluster: a term's weight in a cluster is
/// its in-cluster count times `ln(k / clusters containing it)`. Stopwords
/// are removed from the candidate list before truncation so they never eat
/// keyword slots. Ranking breaks weight ties by in-cluster count, then term,
/// which keeps the single-cluster case (all weights zero) meaningful.
fn cluster_keywords(
    docs: &[&Vec<String>],
    assignments: &[usize],
    k: usize,
    stopwords: &HashSet<String>,
    capacity: usize,
) -> Vec<Topic> {
    let mut counts: Vec<BTreeMap<&str, u64>> = vec![BTreeMap::new(); k];
    for (doc, c) in docs.iter().zip(assignments) {
        for token in doc.iter() {
            *counts[*c].entry(token.as_str()).or_insert(0) += 1;
        }
    }
    let mut cluster_df: BTreeMap<&str, u32> = BTreeMap::new();
    for c in &counts {
        for term in c.keys() {
            *cluster_df.entry(term).or_insert(0) += 1;
        }
    }

    let mut topics = Vec::new();
    for (c, count_map) in counts.iter().enumerate() {
        let size = assignments.iter().filter(|a| **a == c).count();
        if size == 0 {
            continue; // Empty clusters carry no topic.
        }
        let mut ranked: Vec<(&str, u64, f64)> = count_map
            .iter()
            .filter(|(term, _)| !stopwords.contains(**term))
            .map(|(term, count)| {
                let df = cluster_df[term] as f64;
                let weight = *count as f64 * (k as f64 / df).ln();
                (*term, *count, weight)
            })
            .collect();
        ranked.sort_by(|a, b| {
            b.2.partial_cmp(&a.2)
                .unwrap()
                .then(b.1.cmp(&a.1))
                .then(a.0.cmp(b.0))
        });
        topics.push(Topic {
            keywords: ranked
                .into_iter()
                .take(capacity)
                .map(|(term, _, weight)| (term.to_string(), weight))
                .collect(),
            size,
        });
    }
    topics
}

fn extract_with(
    docs: &[Vec<String>],
    vectors: Option<&[Vec<f64>]>,
    stopwords: &HashSet<String>,
    config: &TopicConfig,
) -> Result<Vec<Topic>> {
    config.validate()?;
    if let Some(vs) = vectors {
        if vs.len() != docs.len() {
            return Err(Error::invalid(
                "external vectors must match documents one-to-one",
            ));
        }
    }

    // Empty documents embed to the zero vector and carry no terms; skip them.
    let kept: Vec<usize> = (0..docs.len()).filter(|i| !docs[*i].is_empty()).collect();
    let kept_docs: Vec<&Vec<String>> = kept.iter().map(|i| &docs[*i]).collect();
    let k = config.n_topics.min(kept_docs.len() / 5);
    if k == 0 {
        return Ok(Vec::new());
    }

    let assignments = match vectors {
        Some(vs) => {
            let kept_vecs: Vec<Vec<f64>> = kept.iter().map(|i| vs[*i].clone()).collect();
            spherical_kmeans(&kept_vecs, k, config.max_iters, config.rng_seed)?
        }
        None => {
            let embedded = tfidf_vectors(&kept_docs);
            kmeans_sparse(&embedded, k, config.max_iters, config.rng_seed)
        }
    };
    let capacity = config.top_keywords.max(KEYWORD_CAPACITY_FLOOR);
    Ok(cluster_keywords(
        &kept_docs,
        &assignments,
        k,
        stopwords,
        capacity,
    ))
}

/// Cluster tokenised documents into topics using TF-IDF embeddings.
///
/// The effective cluster count is `min(n_topics, ⌊docs/5⌋)`; fewer than five
/// documents yield no topics.
pub fn extract_topics(
    docs: &[Vec<String>],
    stopwords: &HashSet<String>,
    config: &TopicConfig,
) -> Result<Vec<Topic>> {
    extract_with(docs, None, stopwords, config)
}

/// Like [`extract_topics`] but clustering caller-supplied dense vectors
/// (for example sentence embeddings); keywords still come from the tokens.
pub fn extract_topics_with_vectors(
    docs: &[Vec<String>],
    vectors: &[Vec<f64>],
    stopwords: &HashSet<String>,
    config: &TopicConfig,
) -> Result<Vec<Topic>> {
    extract_with(docs, Some(vectors), stopwords, config)
}

fn jaccard(a: &BTreeSet<&str>, b: &BTreeSet<&str>) -> f64 {
    let union = a.union(b).count();
    if union == 0 {
        return 0.0;
    }
    a.intersection(b).count() as f64 / union as f64
}

/// For each after-topic, whether its top-keyword overlap with *every*
/// before-topic stays strictly below the threshold.
pub fn emerging_flags(
    after: &[Topic],
    before: &[Topic],
    top_n: usize,
    threshold: f64,
) -> Vec<bool> {
    after
        .iter()
        .map(|a| {
            let a_terms = a.top_terms(top_n);
            before
                .iter()
                .all(|b| jaccard(&a_terms, &b.top_terms(top_n)) < threshold)
        })
        .collect()
}

/// Extract topics before and at a change point and flag the emerging ones.
///
/// Windows with fewer than `min_docs` documents on either side mark the
/// change point unexplained rather than clustering noise.
pub fn emerging_topics(
    before_docs: &[Vec<String>],
    after_docs: &[Vec<String>],
    stopwords: &HashSet<String>,
    config: &TopicConfig,
) -> Result<EmergingTopics> {
    config.validate()?;
    if before_docs.len() < config.min_docs || after_docs.len() < config.min_docs {
        return Ok(EmergingTopics {
            before: Vec::new(),
            after: Vec::new(),
            emerging: Vec::new(),
            unexplained: true,
        });
    }
    let mut before_config = *config;
    before_config.rng_seed = derive_seed(config.rng_seed, 0, 0);
    let mut after_config = *config;
    after_config.rng_seed = derive_seed(config.rng_seed, 0, 1);

    let before = extract_with(before_docs, None, stopwords, &before_config)?;
    let after = extract_with(after_docs, None, stopwords, &after_config)?;
    let flags = emerging_flags(&after, &before, config.top_keywords, config.emerging_threshold);
    let emerging = flags
        .iter()
        .enumerate()
        .filter(|(_, f)| **f)
        .map(|(i, _)| i)
        .collect();
    Ok(EmergingTopics {
        before,
        after,
        emerging,
        unexplained: false,
    })
}

/// Mean normalised pointwise mutual information over all keyword pairs,
/// with document-level probabilities.
///
/// Pairs whose members never appear in the corpus are skipped, as are pairs
/// present in *every* document — there the normaliser `−ln p₁₂` degenerates
/// to zero and the pair carries no discriminative information anyway.
/// `None` when no pair can be scored. Smoothing applies only to the joint
/// probability, so never-co-occurring pairs bottom out near
/// `(ln ε − ln p₁ − ln p₂) / (−ln ε)` instead of −1 exactly.
pub fn npmi_coherence(terms: &[String], docs: &[Vec<String>]) -> Option<f64> {
    if docs.is_empty() || terms.len() < 2 {
        return None;
    }
    let doc_sets: Vec<BTreeSet<&str>> = docs
        .iter()
        .map(|d| d.iter().map(String::as_str).collect())
        .collect();
    let n = docs.len() as f64;
    let present: Vec<(&str, f64)> = terms
        .iter()
        .map(|t| {
            let df = doc_sets.iter().filter(|s| s.contains(t.as_str())).count();
            (t.as_str(), df as f64 / n)
        })
        .filter(|(_, p)| *p > 0.0)
        .collect();

    let mut total = 0.0;
    let mut pairs = 0usize;
    for i in 0..present.len() {
        for j in i + 1..present.len() {
            let (a, pa) = present[i];
            let (b, pb) = present[j];
            let joint_count = doc_sets
                .iter()
                .filter(|s| s.contains(a) && s.contains(b))
                .count();
            if joint_count == docs.len() {
                continue;
            }
            let joint = joint_count as f64 / n;
            let ln_joint = (joint + NPMI_EPSILON).ln();
            total += (ln_joint - pa.ln() - pb.ln()) / -ln_joint;
            pairs += 1;
        }
    }
    if pairs == 0 {
        None
    } else {
        Some(total / pairs as f64)
    }
}

/// Fraction of unique terms among the concatenated top-`top_n` keywords of
/// all topics; `None` when no topic contributes keywords.
pub fn topic_diversity(topics: &[Topic], top_n: usize) -> Option<f64> {
    let mut unique: BTreeSet<&str> = BTreeSet::new();
    let mut total = 0usize;
    for topic in topics {
        for (term, _) in topic.keywords.iter().take(top_n) {
            unique.insert(term.as_str());
            total += 1;
        }
    }
    if total == 0 {
        None
    } else {
        Some(unique.len() as f64 / total as f64)
    }
}
