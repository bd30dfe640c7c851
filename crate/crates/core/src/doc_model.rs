//! Document clustering mixture with a three-level smoothed word model.
//!
//! Each token is scored by nesting Dirichlet-smoothed predictives:
//!
//! ```text
//! p_corpus  = (N_w     + beta0 / W)        / (N     + beta0)
//! p_cluster = (N_{w|c} + beta1 * p_corpus) / (N_{c} + beta1)
//! p_token   = (N_{w|d} + beta  * p_cluster) / (N_{d} + beta)
//! ```
//!
//! where every count covers the tokens that precede the scored one: earlier
//! documents in the corpus order plus earlier positions of the same
//! document, at all three levels. The product over the corpus in its fixed
//! order is the likelihood `P(W | c, beta)`. The document order matters
//! (the product is not symmetric in documents), so the Gibbs sampler draws
//! each `c_d` from the exact full conditional of `P(c) P(W | c)` in that
//! order: moving a document only changes the factors of its own cluster's
//! tokens, which keeps each candidate's cost proportional to the cluster's
//! token count.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus_io::Corpus;
use crate::error::{Error, Result};
use crate::math::{log_sum_exp, sample_log_weights};
use crate::prior_process::{log_joint, sample_partition, Partition, PriorKind, PriorSpec};
use crate::rng::{RandomStream, StreamDescriptor};
use crate::slice::{slice_sample, SliceConfig};

/// Concentrations of the document, cluster and corpus levels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HyperParams {
    pub beta: f64,
    pub beta1: f64,
    pub beta0: f64,
}

impl Default for HyperParams {
    fn default() -> Self {
        Self {
            beta: 1.0,
            beta1: 1.0,
            beta0: 1.0,
        }
    }
}

impl HyperParams {
    pub fn new(beta: f64, beta1: f64, beta0: f64) -> Result<Self> {
        let h = Self { beta, beta1, beta0 };
        h.validate()?;
        Ok(h)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("beta", self.beta), ("beta1", self.beta1), ("beta0", self.beta0)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidArgument(format!("{name} must be > 0, got {v}")));
            }
        }
        Ok(())
    }
}

/// Probability of one token given the counts that precede it.
#[inline]
#[allow(clippy::too_many_arguments)]
fn token_prob(
    in_doc: f64,
    doc_len: f64,
    cluster_w: f64,
    cluster_total: f64,
    corpus_w: f64,
    corpus_total: f64,
    vocab: f64,
    h: &HyperParams,
) -> f64 {
    let p_corpus = (corpus_w + h.beta0 / vocab) / (corpus_total + h.beta0);
    let p_cluster = (cluster_w + h.beta1 * p_corpus) / (cluster_total + h.beta1);
    (in_doc + h.beta * p_cluster) / (doc_len + h.beta)
}

/// Number of earlier occurrences of each token's word inside its document.
pub(crate) fn in_doc_prefix(doc: &[u32]) -> Vec<u32> {
    let mut seen: std::collections::HashMap<u32, u32> = std::collections::HashMap::new();
    doc.iter()
        .map(|&w| {
            let c = seen.entry(w).or_insert(0);
            *c += 1;
            *c - 1
        })
        .collect()
}

/// Sufficient statistics: corpus word counts, per-cluster word counts and
/// per-cluster document counts. Document-level counts are prefix counts of
/// the scored document itself and are not stored.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountState {
    vocab_size: usize,
    corpus_word: Vec<u64>,
    corpus_total: u64,
    cluster_word: Vec<Vec<u32>>,
    cluster_total: Vec<u64>,
    cluster_docs: Vec<usize>,
}

impl CountState {
    pub fn new(vocab_size: usize) -> Self {
        Self {
            vocab_size,
            corpus_word: vec![0; vocab_size],
            corpus_total: 0,
            cluster_word: Vec::new(),
            cluster_total: Vec::new(),
            cluster_docs: Vec::new(),
        }
    }

    /// Counts for `corpus` with documents assigned by `partition`.
    pub fn from_assignments(corpus: &Corpus, partition: &Partition) -> Result<Self> {
        if partition.len() != corpus.num_documents() {
            return Err(Error::InvalidArgument(format!(
                "{} assignments for {} documents",
                partition.len(),
                corpus.num_documents()
            )));
        }
        let mut counts = Self::new(corpus.vocab_size());
        for _ in 0..partition.num_clusters() {
            counts.open_cluster();
        }
        for (doc, &c) in corpus.documents().iter().zip(partition.assignments()) {
            counts.add_document(doc, c);
        }
        Ok(counts)
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    pub fn num_clusters(&self) -> usize {
        self.cluster_docs.len()
    }

    pub fn corpus_count(&self, w: u32) -> u64 {
        self.corpus_word[w as usize]
    }

    pub fn corpus_total(&self) -> u64 {
        self.corpus_total
    }

    pub fn cluster_count(&self, c: usize, w: u32) -> u32 {
        self.cluster_word[c][w as usize]
    }

    pub fn cluster_total(&self, c: usize) -> u64 {
        self.cluster_total[c]
    }

    pub fn cluster_docs(&self, c: usize) -> usize {
        self.cluster_docs[c]
    }

    pub fn num_documents(&self) -> usize {
        self.cluster_docs.iter().sum()
    }

    /// Adds an empty cluster and returns its index.
    pub fn open_cluster(&mut self) -> usize {
        self.cluster_word.push(vec![0; self.vocab_size]);
        self.cluster_total.push(0);
        self.cluster_docs.push(0);
        self.cluster_docs.len() - 1
    }

    pub fn add_document(&mut self, doc: &[u32], c: usize) {
        let words = &mut self.cluster_word[c];
        for &w in doc {
            self.corpus_word[w as usize] += 1;
            words[w as usize] += 1;
        }
        self.corpus_total += doc.len() as u64;
        self.cluster_total[c] += doc.len() as u64;
        self.cluster_docs[c] += 1;
    }

    pub fn remove_document(&mut self, doc: &[u32], c: usize) {
        let words = &mut self.cluster_word[c];
        for &w in doc {
            self.corpus_word[w as usize] -= 1;
            words[w as usize] -= 1;
        }
        self.corpus_total -= doc.len() as u64;
        self.cluster_total[c] -= doc.len() as u64;
        self.cluster_docs[c] -= 1;
    }

    /// Removes an empty cluster; the last cluster takes its index.
    fn swap_remove_cluster(&mut self, c: usize) {
        debug_assert_eq!(self.cluster_docs[c], 0);
        self.cluster_word.swap_remove(c);
        self.cluster_total.swap_remove(c);
        self.cluster_docs.swap_remove(c);
    }

    fn reorder_clusters(&mut self, order: &[usize]) {
        self.cluster_word = order.iter().map(|&k| std::mem::take(&mut self.cluster_word[k])).collect();
        self.cluster_total = order.iter().map(|&k| self.cluster_total[k]).collect();
        self.cluster_docs = order.iter().map(|&k| self.cluster_docs[k]).collect();
    }
}

/// `log P(w_d | ...)` for a document scored after everything in `counts`,
/// with `counts` excluding the document. `cluster` is an existing cluster of
/// `counts`, or `None` for a new, empty cluster. The document's own earlier
/// tokens are added at all three levels as scoring proceeds.
pub fn doc_log_likelihood(
    doc: &[u32],
    cluster: Option<usize>,
    counts: &CountState,
    hypers: &HyperParams,
) -> Result<f64> {
    let vocab_size = counts.vocab_size();
    if let Some(&w) = doc.iter().find(|&&w| w as usize >= vocab_size) {
        return Err(Error::UnknownWord { word: w, vocab_size });
    }
    if let Some(c) = cluster {
        if c >= counts.num_clusters() {
            return Err(Error::InvalidArgument(format!("cluster {c} does not exist")));
        }
    }
    let vocab = vocab_size as f64;
    let (cluster_total, corpus_total) = (
        cluster.map_or(0, |c| counts.cluster_total(c)) as f64,
        counts.corpus_total() as f64,
    );
    let prefix = in_doc_prefix(doc);
    Ok(doc
        .iter()
        .zip(&prefix)
        .enumerate()
        .map(|(n, (&w, &a))| {
            let a = a as f64;
            let n = n as f64;
            let cw = cluster.map_or(0, |c| counts.cluster_count(c, w)) as f64;
            token_prob(
                a,
                n,
                cw + a,
                cluster_total + n,
                counts.corpus_count(w) as f64 + a,
                corpus_total + n,
                vocab,
                hypers,
            )
            .ln()
        })
        .sum())
}

/// A cluster choice for one document.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Candidate {
    Existing(usize),
    New,
}

/// Normalised log-probabilities over candidates.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalPrior {
    pub candidates: Vec<Candidate>,
    pub log_probs: Vec<f64>,
}

impl ConditionalPrior {
    fn normalised(candidates: Vec<Candidate>, mut log_probs: Vec<f64>) -> Self {
        let z = log_sum_exp(&log_probs);
        log_probs.iter_mut().for_each(|x| *x -= z);
        Self { candidates, log_probs }
    }

    pub fn log_prob(&self, candidate: Candidate) -> Option<f64> {
        self.candidates
            .iter()
            .position(|&c| c == candidate)
            .map(|i| self.log_probs[i])
    }
}

fn other_labels(d: usize, assignments: &[usize]) -> Vec<usize> {
    let mut labels: Vec<usize> = assignments
        .iter()
        .enumerate()
        .filter(|&(e, _)| e != d)
        .map(|(_, &c)| c)
        .collect();
    labels.sort_unstable();
    labels.dedup();
    labels
}

/// Dirichlet-process prior of `c_d` given the other documents' labels
/// (`assignments[d]` is ignored): proportional to the number of other
/// documents in each cluster, and to `theta` for a new cluster.
pub fn conditional_prior_dp(d: usize, assignments: &[usize], theta: f64) -> ConditionalPrior {
    let labels = other_labels(d, assignments);
    let denom = ((assignments.len() - 1) as f64 + theta).ln();
    let mut candidates = Vec::with_capacity(labels.len() + 1);
    let mut log_probs = Vec::with_capacity(labels.len() + 1);
    for &l in &labels {
        let size = assignments
            .iter()
            .enumerate()
            .filter(|&(e, &c)| e != d && c == l)
            .count();
        candidates.push(Candidate::Existing(l));
        log_probs.push((size as f64).ln() - denom);
    }
    candidates.push(Candidate::New);
    log_probs.push(theta.ln() - denom);
    ConditionalPrior::normalised(candidates, log_probs)
}

/// Uniform-process prior of `c_d` given the other labels, for the fixed
/// order `0..D`: for every candidate value the sequence is completed and
/// the predictive factors at positions `d..D` are multiplied, so the
/// choice for `d` is propagated to every later document.
pub fn conditional_prior_up(d: usize, assignments: &[usize], theta: f64) -> ConditionalPrior {
    let labels = other_labels(d, assignments);
    let fresh = labels.last().map_or(0, |l| l + 1);
    let mut candidates: Vec<Candidate> = labels.iter().map(|&l| Candidate::Existing(l)).collect();
    candidates.push(Candidate::New);
    let mut seq = assignments.to_vec();
    let log_probs = candidates
        .iter()
        .map(|cand| {
            seq[d] = match *cand {
                Candidate::Existing(l) => l,
                Candidate::New => fresh,
            };
            let mut seen = std::collections::HashSet::new();
            for &c in &seq[..d] {
                seen.insert(c);
            }
            let mut total = 0.0;
            for &c in &seq[d..] {
                let k = seen.len() as f64;
                total += if seen.insert(c) {
                    if k == 0.0 { 0.0 } else { theta.ln() - (k + theta).ln() }
                } else {
                    -(k + theta).ln()
                };
            }
            total
        })
        .collect();
    ConditionalPrior::normalised(candidates, log_probs)
}

/// Token arrays of a corpus laid out for repeated scoring.
#[derive(Debug, Clone)]
pub struct PreparedCorpus {
    vocab_size: usize,
    offsets: Vec<usize>,
    words: Vec<u32>,
    /// Earlier occurrences of the same word in the same document.
    in_doc: Vec<u32>,
    /// Earlier occurrences of the same word anywhere in the corpus order.
    in_corpus: Vec<u32>,
    hash: String,
}

impl PreparedCorpus {
    pub fn new(corpus: &Corpus) -> Self {
        let mut offsets = Vec::with_capacity(corpus.num_documents() + 1);
        let mut words = Vec::with_capacity(corpus.num_tokens());
        let mut in_doc = Vec::with_capacity(corpus.num_tokens());
        let mut in_corpus = Vec::with_capacity(corpus.num_tokens());
        let mut seen = vec![0u32; corpus.vocab_size()];
        offsets.push(0);
        for doc in corpus.documents() {
            in_doc.extend(in_doc_prefix(doc));
            for &w in doc {
                in_corpus.push(seen[w as usize]);
                seen[w as usize] += 1;
            }
            words.extend_from_slice(doc);
            offsets.push(words.len());
        }
        Self {
            vocab_size: corpus.vocab_size(),
            offsets,
            words,
            in_doc,
            in_corpus,
            hash: corpus.content_hash(),
        }
    }

    pub fn num_documents(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn num_tokens(&self) -> usize {
        self.words.len()
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    pub fn corpus_hash(&self) -> &str {
        &self.hash
    }

    fn range(&self, d: usize) -> std::ops::Range<usize> {
        self.offsets[d]..self.offsets[d + 1]
    }

    /// `p_corpus` for every token position under `beta0`.
    fn corpus_probs(&self, beta0: f64) -> Vec<f64> {
        let base = beta0 / self.vocab_size as f64;
        self.in_corpus
            .iter()
            .enumerate()
            .map(|(t, &c)| (c as f64 + base) / (t as f64 + beta0))
            .collect()
    }
}

/// Dense per-word counts of one cluster's token stream, reset after use.
struct Scratch {
    counts: Vec<u32>,
    doc_counts: Vec<u32>,
}

impl Scratch {
    fn new(vocab_size: usize) -> Self {
        Self {
            counts: vec![0; vocab_size],
            doc_counts: vec![0; vocab_size],
        }
    }
}

/// Cluster-level scorer for a fixed set of hyperparameters.
struct Scorer<'a> {
    data: &'a PreparedCorpus,
    p_corpus: Vec<f64>,
    hypers: HyperParams,
}

impl<'a> Scorer<'a> {
    fn new(data: &'a PreparedCorpus, hypers: HyperParams) -> Self {
        Self {
            data,
            p_corpus: data.corpus_probs(hypers.beta0),
            hypers,
        }
    }

    #[inline]
    fn ln_token(&self, t: usize, pos: usize, cluster_w: u32, cluster_total: u64) -> f64 {
        let h = &self.hypers;
        let p_cluster = (cluster_w as f64 + h.beta1 * self.p_corpus[t]) / (cluster_total as f64 + h.beta1);
        ((self.data.in_doc[t] as f64 + h.beta * p_cluster) / (pos as f64 + h.beta)).ln()
    }

    /// Log-likelihood of the tokens of `members` (sorted) as one cluster.
    fn cluster_log_lik(&self, members: &[usize], scratch: &mut Scratch) -> f64 {
        let mut total_count = 0u64;
        let mut ll = 0.0;
        for &e in members {
            let range = self.data.range(e);
            let start = range.start;
            for t in range {
                let w = self.data.words[t] as usize;
                ll += self.ln_token(t, t - start, scratch.counts[w], total_count);
                scratch.counts[w] += 1;
                total_count += 1;
            }
        }
        self.clear(members, &mut scratch.counts);
        ll
    }

    /// `L(members + d) - L(members)` for sorted `members` not containing `d`.
    fn join_delta(&self, members: &[usize], d: usize, scratch: &mut Scratch) -> f64 {
        let split = members.partition_point(|&e| e < d);
        let mut total_count = 0u64;
        for &e in &members[..split] {
            for t in self.data.range(e) {
                scratch.counts[self.data.words[t] as usize] += 1;
            }
            total_count += self.data.range(e).len() as u64;
        }
        let d_range = self.data.range(d);
        let d_len = d_range.len() as u64;
        let mut delta = 0.0;
        for t in d_range.clone() {
            let w = self.data.words[t] as usize;
            delta += self.ln_token(t, t - d_range.start, scratch.counts[w], total_count);
            scratch.counts[w] += 1;
            scratch.doc_counts[w] += 1;
            total_count += 1;
        }
        for &e in &members[split..] {
            let range = self.data.range(e);
            let start = range.start;
            for t in range {
                let w = self.data.words[t] as usize;
                let with = self.ln_token(t, t - start, scratch.counts[w], total_count);
                let without = self.ln_token(
                    t,
                    t - start,
                    scratch.counts[w] - scratch.doc_counts[w],
                    total_count - d_len,
                );
                delta += with - without;
                scratch.counts[w] += 1;
                total_count += 1;
            }
        }
        self.clear(members, &mut scratch.counts);
        for t in d_range {
            let w = self.data.words[t] as usize;
            scratch.counts[w] = 0;
            scratch.doc_counts[w] = 0;
        }
        delta
    }

    fn clear(&self, members: &[usize], counts: &mut [u32]) {
        for &e in members {
            for t in self.data.range(e) {
                counts[self.data.words[t] as usize] = 0;
            }
        }
    }
}

/// Log-likelihood of the whole corpus, `log P(W | c, beta)`, for clusters
/// given as sorted member lists.
fn corpus_log_lik(data: &PreparedCorpus, members: &[Vec<usize>], hypers: HyperParams) -> f64 {
    let scorer = Scorer::new(data, hypers);
    let mut scratch = Scratch::new(data.vocab_size);
    members.iter().map(|m| scorer.cluster_log_lik(m, &mut scratch)).sum()
}

/// `log P(W | c, beta)` for a corpus and partition of its documents.
pub fn corpus_log_likelihood(corpus: &Corpus, partition: &Partition, hypers: &HyperParams) -> Result<f64> {
    if partition.len() != corpus.num_documents() {
        return Err(Error::InvalidArgument("partition and corpus sizes differ".into()));
    }
    Ok(corpus_log_lik(&PreparedCorpus::new(corpus), &partition.blocks(), *hypers))
}

fn check_prior(prior: &PriorSpec) -> Result<()> {
    match prior.kind() {
        PriorKind::Dirichlet | PriorKind::Uniform => Ok(()),
        PriorKind::PitmanYor => Err(Error::UnsupportedPrior { prior: "Pitman-Yor" }),
    }
}

/// Gibbs sampler state for one chain.
#[derive(Debug, Clone)]
pub struct ChainState {
    assignments: Vec<usize>,
    members: Vec<Vec<usize>>,
    counts: CountState,
    hypers: HyperParams,
    iteration: u64,
    rng: RandomStream,
}

const REMOVED: usize = usize::MAX;

impl ChainState {
    pub fn new(
        corpus: &Corpus,
        initial: &Partition,
        hypers: HyperParams,
        rng: RandomStream,
    ) -> Result<Self> {
        hypers.validate()?;
        let counts = CountState::from_assignments(corpus, initial)?;
        Ok(Self {
            assignments: initial.assignments().to_vec(),
            members: initial.blocks(),
            counts,
            hypers,
            iteration: 0,
            rng,
        })
    }

    pub fn partition(&self) -> Partition {
        Partition::from_canonical(self.assignments.clone()).expect("canonical between sweeps")
    }

    pub fn assignments(&self) -> &[usize] {
        &self.assignments
    }

    pub fn num_clusters(&self) -> usize {
        self.members.len()
    }

    pub fn counts(&self) -> &CountState {
        &self.counts
    }

    pub fn hypers(&self) -> HyperParams {
        self.hypers
    }

    pub fn set_hypers(&mut self, hypers: HyperParams) -> Result<()> {
        hypers.validate()?;
        self.hypers = hypers;
        Ok(())
    }

    pub fn iteration(&self) -> u64 {
        self.iteration
    }

    pub fn rng(&self) -> &RandomStream {
        &self.rng
    }

    pub fn log_likelihood(&self, data: &PreparedCorpus) -> f64 {
        corpus_log_lik(data, &self.members, self.hypers)
    }

    fn remove(&mut self, corpus: &Corpus, d: usize) {
        let c = self.assignments[d];
        self.counts.remove_document(corpus.document(d), c);
        let pos = self.members[c].binary_search(&d).expect("member list in sync");
        self.members[c].remove(pos);
        self.assignments[d] = REMOVED;
        if self.members[c].is_empty() {
            self.members.swap_remove(c);
            self.counts.swap_remove_cluster(c);
            if c < self.members.len() {
                for &e in &self.members[c] {
                    self.assignments[e] = c;
                }
            }
        }
    }

    fn insert(&mut self, corpus: &Corpus, d: usize, cluster: Candidate) {
        let c = match cluster {
            Candidate::Existing(c) => c,
            Candidate::New => {
                self.members.push(Vec::new());
                self.counts.open_cluster()
            }
        };
        let pos = self.members[c].partition_point(|&e| e < d);
        self.members[c].insert(pos, d);
        self.counts.add_document(corpus.document(d), c);
        self.assignments[d] = c;
    }

    /// Relabels clusters in order of first member.
    fn canonicalize(&mut self) {
        let mut order: Vec<usize> = (0..self.members.len()).collect();
        order.sort_unstable_by_key(|&k| self.members[k][0]);
        self.members = order.iter().map(|&k| std::mem::take(&mut self.members[k])).collect();
        self.counts.reorder_clusters(&order);
        for (k, m) in self.members.iter().enumerate() {
            for &e in m {
                self.assignments[e] = k;
            }
        }
    }

    /// Log prior of each existing cluster (in slot order) and of a new
    /// cluster for document `d`, which has been removed. Unnormalised.
    fn prior_weights(&self, d: usize, prior: &PriorSpec) -> Vec<f64> {
        let theta = prior.theta();
        match prior.kind() {
            PriorKind::Dirichlet | PriorKind::PitmanYor => {
                let denom = ((self.assignments.len() - 1) as f64 + theta).ln();
                self.members
                    .iter()
                    .map(|m| (m.len() as f64).ln() - denom)
                    .chain(std::iter::once(theta.ln() - denom))
                    .collect()
            }
            PriorKind::Uniform => up_prior_weights(&self.members, d, self.assignments.len(), theta),
        }
    }
}

/// Fast form of [`conditional_prior_up`] for a removed document `d`.
///
/// Relative to the sequence without `d`, a cluster first seen before `d`
/// only contributes the factor at `d`. A cluster first seen at `f > d` turns
/// `d` into its first member, which raises the cluster count seen by every
/// position in `(d, f]` by one and removes the new-cluster factor at `f`.
/// A new cluster raises the count for every later position.
fn up_prior_weights(members: &[Vec<usize>], d: usize, n_docs: usize, theta: f64) -> Vec<f64> {
    let firsts: Vec<usize> = members.iter().map(|m| m[0]).collect();
    let k_before = firsts.iter().filter(|&&f| f < d).count();
    let mut later: Vec<usize> = firsts.iter().copied().filter(|&f| f > d).collect();
    later.sort_unstable();
    // gain(k) = ln(k + theta) - ln(k + 1 + theta): one position seeing one more cluster
    let gain = |k: usize| (k as f64 + theta).ln() - (k as f64 + 1.0 + theta).ln();
    let mut cumulative = Vec::with_capacity(later.len());
    let (mut acc, mut prev, mut k) = (0.0, d, k_before);
    for &f in &later {
        acc += (f - prev) as f64 * gain(k);
        cumulative.push(acc);
        prev = f;
        k += 1;
    }
    let all_later = acc + (n_docs - 1 - prev) as f64 * gain(k);
    let base = -(k_before as f64 + theta).ln();
    firsts
        .iter()
        .map(|&f| {
            if f < d {
                base
            } else {
                let i = later.binary_search(&f).expect("first position listed");
                base + cumulative[i]
            }
        })
        .chain(std::iter::once(base + theta.ln() + all_later))
        .collect()
}

/// One systematic scan over documents in corpus order. Each `c_d` is drawn
/// from `P(c_d | c_{-d}, W) ∝ P(c) P(W | c)` and clusters are relabelled
/// canonically at the end.
pub fn gibbs_sweep(state: &mut ChainState, corpus: &Corpus, data: &PreparedCorpus, prior: &PriorSpec) -> Result<()> {
    check_prior(prior)?;
    if data.num_documents() != state.assignments.len() {
        return Err(Error::InvalidArgument("state and corpus sizes differ".into()));
    }
    let scorer = Scorer::new(data, state.hypers);
    let mut scratch = Scratch::new(data.vocab_size);
    let mut log_w = Vec::new();
    for d in 0..state.assignments.len() {
        state.remove(corpus, d);
        log_w.clear();
        log_w.extend(state.prior_weights(d, prior));
        let empty: [usize; 0] = [];
        for (k, lw) in log_w.iter_mut().enumerate() {
            let members = state.members.get(k).map_or(&empty[..], Vec::as_slice);
            *lw += scorer.join_delta(members, d, &mut scratch);
        }
        let pick = sample_log_weights(&log_w, &mut state.rng);
        let choice = if pick == state.members.len() {
            Candidate::New
        } else {
            Candidate::Existing(pick)
        };
        state.insert(corpus, d, choice);
    }
    state.canonicalize();
    state.iteration += 1;
    debug_assert_eq!(
        state.counts,
        CountState::from_assignments(corpus, &state.partition()).unwrap(),
        "incremental counts drifted"
    );
    Ok(())
}

/// Result of one hyperparameter update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HyperUpdate {
    pub hypers: HyperParams,
    /// Number of coordinates whose slice shrinkage gave up.
    pub failures: usize,
}

/// Slice-samples `beta`, `beta1`, `beta0` in turn, each on the log scale
/// under a uniform prior on `[config.lower, config.upper]`, targeting
/// `P(W | c, beta)`.
pub fn slice_sample_hypers(state: &mut ChainState, data: &PreparedCorpus, config: &SliceConfig) -> HyperUpdate {
    slice_sample_selected(state, data, config, [true; 3])
}

/// As [`slice_sample_hypers`], updating only the coordinates flagged in
/// `which` (`beta`, `beta1`, `beta0`).
pub fn slice_sample_selected(
    state: &mut ChainState,
    data: &PreparedCorpus,
    config: &SliceConfig,
    which: [bool; 3],
) -> HyperUpdate {
    let mut failures = 0;
    let members = state.members.clone();
    for (i, _) in which.iter().enumerate().filter(|(_, &on)| on) {
        let current = state.hypers;
        let with = |x: f64| {
            let mut h = current;
            match i {
                0 => h.beta = x.exp(),
                1 => h.beta1 = x.exp(),
                _ => h.beta0 = x.exp(),
            }
            h
        };
        let x0 = match i {
            0 => current.beta,
            1 => current.beta1,
            _ => current.beta0,
        }
        .ln();
        let draw = slice_sample(x0, |x| corpus_log_lik(data, &members, with(x)), config, &mut state.rng);
        if !draw.accepted {
            failures += 1;
            log::warn!("slice sampler for hyperparameter {i} did not find a point; keeping current value");
        }
        state.hypers = with(draw.value);
    }
    HyperUpdate {
        hypers: state.hypers,
        failures,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitStrategy {
    /// Draw the starting partition from the prior process.
    Prior,
    SingleCluster,
    Singletons,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainConfig {
    pub sweeps: usize,
    pub burn_in: usize,
    /// Update hyperparameters every this many sweeps; 0 disables.
    pub hyper_interval: usize,
    pub initial_hypers: HyperParams,
    pub init: InitStrategy,
    pub slice: SliceConfig,
    pub seed: u64,
}

impl Default for ChainConfig {
    fn default() -> Self {
        Self {
            sweeps: 200,
            burn_in: 100,
            hyper_interval: 1,
            initial_hypers: HyperParams::default(),
            init: InitStrategy::Singletons,
            slice: SliceConfig::default(),
            seed: 0,
        }
    }
}

/// One recorded post-burn-in state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSample {
    pub iteration: u64,
    pub assignments: Partition,
    pub hypers: HyperParams,
    pub num_clusters: usize,
    pub log_prior: f64,
    pub log_likelihood: f64,
}

impl PosteriorSample {
    pub fn log_posterior(&self) -> f64 {
        self.log_prior + self.log_likelihood
    }
}

#[derive(Debug, Clone)]
pub struct ChainRun {
    pub samples: Vec<PosteriorSample>,
    pub final_state: ChainState,
}

impl ChainRun {
    /// Recorded sample with the highest unnormalised log posterior.
    pub fn map_sample(&self) -> Option<&PosteriorSample> {
        self.samples
            .iter()
            .max_by(|a, b| a.log_posterior().total_cmp(&b.log_posterior()))
    }

    pub fn mean_num_clusters(&self) -> f64 {
        self.samples.iter().map(|s| s.num_clusters as f64).sum::<f64>() / self.samples.len() as f64
    }
}

fn initial_partition(corpus: &Corpus, prior: &PriorSpec, init: InitStrategy, rng: &mut RandomStream) -> Partition {
    let d = corpus.num_documents();
    match init {
        InitStrategy::Prior => sample_partition(prior, d, rng),
        InitStrategy::SingleCluster => Partition::single_cluster(d),
        InitStrategy::Singletons => Partition::singletons(d),
    }
}

/// Runs `config.sweeps` Gibbs sweeps, updating hyperparameters every
/// `hyper_interval` sweeps, and records every sweep after `burn_in`.
pub fn run_chain(corpus: &Corpus, prior: &PriorSpec, config: &ChainConfig) -> Result<ChainRun> {
    run_chain_with_stream(corpus, prior, config, RandomStream::from_seed(config.seed))
}

pub fn run_chain_with_stream(
    corpus: &Corpus,
    prior: &PriorSpec,
    config: &ChainConfig,
    mut rng: RandomStream,
) -> Result<ChainRun> {
    check_prior(prior)?;
    if config.sweeps <= config.burn_in {
        return Err(Error::InvalidArgument(format!(
            "sweeps ({}) must exceed burn-in ({})",
            config.sweeps, config.burn_in
        )));
    }
    if corpus.is_empty() {
        return Err(Error::InvalidArgument("corpus has no documents".into()));
    }
    let data = PreparedCorpus::new(corpus);
    let init = initial_partition(corpus, prior, config.init, &mut rng);
    let mut state = ChainState::new(corpus, &init, config.initial_hypers, rng)?;
    let mut samples = Vec::with_capacity(config.sweeps - config.burn_in);
    for sweep in 1..=config.sweeps {
        gibbs_sweep(&mut state, corpus, &data, prior)?;
        if config.hyper_interval > 0 && sweep % config.hyper_interval == 0 {
            slice_sample_hypers(&mut state, &data, &config.slice);
        }
        if sweep > config.burn_in {
            let partition = state.partition();
            samples.push(PosteriorSample {
                iteration: state.iteration,
                num_clusters: partition.num_clusters(),
                log_prior: log_joint(prior, &partition),
                log_likelihood: state.log_likelihood(&data),
                assignments: partition,
                hypers: state.hypers,
            });
        }
    }
    Ok(ChainRun {
        samples,
        final_state: state,
    })
}

/// Runs `num_chains` chains in parallel; chain `i` uses child stream `i` of
/// `master_seed` (`config.seed` is ignored).
pub fn run_chains(
    corpus: &Corpus,
    prior: &PriorSpec,
    config: &ChainConfig,
    num_chains: usize,
    master_seed: u64,
) -> Result<Vec<ChainRun>> {
    (0..num_chains)
        .into_par_iter()
        .map(|i| run_chain_with_stream(corpus, prior, config, RandomStream::child(master_seed, i as u64)))
        .collect()
}

pub const CHECKPOINT_VERSION: u32 = 1;

/// JSON checkpoint of a chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainCheckpoint {
    pub version: u32,
    pub prior: PriorSpec,
    pub assignments: Partition,
    pub hypers: HyperParams,
    pub iteration: u64,
    pub rng: StreamDescriptor,
    /// Content hash of the corpus the chain was run on.
    pub corpus_hash: String,
}

impl ChainState {
    pub fn checkpoint(&self, prior: &PriorSpec, data: &PreparedCorpus) -> ChainCheckpoint {
        ChainCheckpoint {
            version: CHECKPOINT_VERSION,
            prior: *prior,
            assignments: self.partition(),
            hypers: self.hypers,
            iteration: self.iteration,
            rng: self.rng.descriptor(),
            corpus_hash: data.corpus_hash().to_string(),
        }
    }

    pub fn from_checkpoint(checkpoint: &ChainCheckpoint, corpus: &Corpus) -> Result<Self> {
        if checkpoint.version != CHECKPOINT_VERSION {
            return Err(Error::InvalidCheckpoint(format!("unsupported version {}", checkpoint.version)));
        }
        let actual = corpus.content_hash();
        if actual != checkpoint.corpus_hash {
            return Err(Error::CorpusMismatch {
                expected: checkpoint.corpus_hash.clone(),
                actual,
            });
        }
        let mut state = Self::new(
            corpus,
            &checkpoint.assignments,
            checkpoint.hypers,
            RandomStream::from_descriptor(&checkpoint.rng)?,
        )?;
        state.iteration = checkpoint.iteration;
        Ok(state)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus_io::{synth_corpus, SynthConfig, TokenizerConfig, Vocabulary};
    use proptest::prelude::*;

    fn corpus(docs: &[&[u32]], w: usize) -> Corpus {
        let vocab = Vocabulary::from_words((0..w).map(|i| format!("w{i}")).collect()).unwrap();
        Corpus::new(docs.iter().map(|d| d.to_vec()).collect(), vocab).unwrap()
    }

    fn ones() -> HyperParams {
        HyperParams::new(1.0, 1.0, 1.0).unwrap()
    }

    #[test]
    fn first_token_is_uniform() {
        let counts = CountState::new(4);
        for w in 0..4 {
            let ll = doc_log_likelihood(&[w], None, &counts, &ones()).unwrap();
            assert!((ll - 0.25f64.ln()).abs() < 1e-15);
        }
    }

    #[test]
    fn repeated_word_hand_value() {
        let counts = CountState::new(4);
        let ll = doc_log_likelihood(&[2, 2], None, &counts, &ones()).unwrap();
        assert!((ll - (0.25f64 * 29.0 / 32.0).ln()).abs() < 1e-15);
    }

    #[test]
    fn unknown_word_rejected() {
        let counts = CountState::new(4);
        assert!(matches!(
            doc_log_likelihood(&[4], None, &counts, &ones()),
            Err(Error::UnknownWord { word: 4, vocab_size: 4 })
        ));
        assert!(doc_log_likelihood(&[0], Some(0), &counts, &ones()).is_err());
    }

    #[test]
    fn matching_cluster_beats_new() {
        let c = corpus(&[&[0, 1, 1, 0], &[0, 1, 1, 0]], 6);
        let mut counts = CountState::new(6);
        counts.open_cluster();
        counts.add_document(c.document(0), 0);
        let h = ones();
        let join = doc_log_likelihood(c.document(1), Some(0), &counts, &h).unwrap();
        let new = doc_log_likelihood(c.document(1), None, &counts, &h).unwrap();
        assert!(join > new);
    }

    #[test]
    fn token_predictive_is_normalised() {
        let c = corpus(&[&[0, 1, 2, 2], &[3, 3, 0], &[4]], 5);
        let counts = CountState::from_assignments(&c, &Partition::from_labels(&[0, 1, 0])).unwrap();
        let h = HyperParams::new(0.7, 2.0, 0.3).unwrap();
        let prefix = [1u32, 1, 4];
        for cluster in [None, Some(0), Some(1)] {
            // P(next token = w | prefix) = exp(ll(prefix + w) - ll(prefix))
            let base = doc_log_likelihood(&prefix, cluster, &counts, &h).unwrap();
            let total: f64 = (0..5)
                .map(|w| {
                    let mut doc = prefix.to_vec();
                    doc.push(w);
                    (doc_log_likelihood(&doc, cluster, &counts, &h).unwrap() - base).exp()
                })
                .sum();
            assert!((total - 1.0).abs() < 1e-10, "{total}");
        }
    }

    #[test]
    fn appended_document_factor_matches_corpus_likelihood() {
        // the ordered joint factorises into doc_log_likelihood of each
        // document against everything before it
        let c = corpus(&[&[0, 1, 1], &[2, 0], &[1, 1, 3, 0], &[3]], 4);
        let p = Partition::from_labels(&[0, 1, 0, 1]);
        let h = HyperParams::new(0.5, 1.5, 2.5).unwrap();
        let mut counts = CountState::new(4);
        counts.open_cluster();
        counts.open_cluster();
        let mut total = 0.0;
        for (d, &k) in p.assignments().iter().enumerate() {
            let cand = (counts.cluster_docs(k) > 0).then_some(k);
            total += match cand {
                Some(k) => doc_log_likelihood(c.document(d), Some(k), &counts, &h).unwrap(),
                None => doc_log_likelihood(c.document(d), None, &counts, &h).unwrap(),
            };
            counts.add_document(c.document(d), k);
        }
        let joint = corpus_log_likelihood(&c, &p, &h).unwrap();
        assert!((total - joint).abs() < 1e-12);
    }

    #[test]
    fn dp_conditional_examples() {
        let cp = conditional_prior_dp(1, &[0, 99], 1.0);
        assert_eq!(cp.candidates, vec![Candidate::Existing(0), Candidate::New]);
        assert!((cp.log_probs[0] - 0.5f64.ln()).abs() < 1e-15);
        assert!((cp.log_probs[1] - 0.5f64.ln()).abs() < 1e-15);
        let big = conditional_prior_dp(0, &[0, 0, 1, 1], 1e6);
        assert!(big.log_prob(Candidate::New).unwrap().exp() > 0.999);
        // only counts matter, not d's position
        let a = conditional_prior_dp(0, &[5, 0, 0, 1], 2.0);
        let b = conditional_prior_dp(3, &[0, 0, 1, 5], 2.0);
        assert_eq!(a.log_probs, b.log_probs);
    }

    #[test]
    fn up_conditional_last_document_is_predictive() {
        let cp = conditional_prior_up(2, &[0, 1, 7], 1.0);
        for lp in &cp.log_probs {
            assert!((lp - (1.0f64 / 3.0).ln()).abs() < 1e-15);
        }
        let cp = conditional_prior_up(4, &[0, 0, 1, 0, 3], 2.5);
        let k = 2.0;
        assert!((cp.log_prob(Candidate::Existing(0)).unwrap() - (1.0 / (k + 2.5f64)).ln()).abs() < 1e-12);
        assert!((cp.log_prob(Candidate::New).unwrap() - (2.5 / (k + 2.5f64)).ln()).abs() < 1e-12);
    }

    #[test]
    fn up_conditional_first_document_by_enumeration() {
        // d = 0, documents 1 and 2 share a cluster. Complete sequences:
        // join -> (0,0,0): 1 * 1/2 * 1/2 = 1/4 ; own -> (0,1,1): 1 * 1/2 * 1/3 = 1/6
        let cp = conditional_prior_up(0, &[9, 4, 4], 1.0);
        let join = 0.25;
        let own = 1.0 / 6.0;
        let z = join + own;
        assert!((cp.log_prob(Candidate::Existing(4)).unwrap() - (join / z as f64).ln()).abs() < 1e-12);
        assert!((cp.log_prob(Candidate::New).unwrap() - (own / z as f64).ln()).abs() < 1e-12);
    }

    fn slots_for(assignments: &[usize], d: usize) -> (Vec<Vec<usize>>, Vec<usize>) {
        // cluster member lists without d, in the label order of `other_labels`
        let labels = other_labels(d, assignments);
        let members = labels
            .iter()
            .map(|&l| {
                (0..assignments.len())
                    .filter(|&e| e != d && assignments[e] == l)
                    .collect()
            })
            .collect();
        (members, labels)
    }

    proptest! {
        #[test]
        fn fast_up_prior_matches_direct(
            labels in prop::collection::vec(0usize..6, 1..25),
            d_frac in 0.0f64..1.0,
            theta in 0.05f64..20.0,
        ) {
            let d = ((labels.len() as f64 * d_frac) as usize).min(labels.len() - 1);
            let direct = conditional_prior_up(d, &labels, theta);
            let (members, _) = slots_for(&labels, d);
            let fast = up_prior_weights(&members, d, labels.len(), theta);
            let z = log_sum_exp(&fast);
            prop_assert_eq!(fast.len(), direct.log_probs.len());
            for (a, b) in fast.iter().zip(&direct.log_probs) {
                prop_assert!((a - z - b).abs() < 1e-9);
            }
            let total: f64 = direct.log_probs.iter().map(|x| x.exp()).sum();
            prop_assert!((total - 1.0).abs() < 1e-12);
        }

        #[test]
        fn join_delta_matches_full_recomputation(
            docs in prop::collection::vec(prop::collection::vec(0u32..5, 0..6), 2..8),
            labels in prop::collection::vec(0usize..3, 8),
            d_frac in 0.0f64..1.0,
        ) {
            let n = docs.len();
            let c = Corpus::new(docs.clone(), Vocabulary::from_words((0..5).map(|i| format!("w{i}")).collect()).unwrap()).unwrap();
            let data = PreparedCorpus::new(&c);
            let h = HyperParams::new(0.8, 1.3, 0.6).unwrap();
            let scorer = Scorer::new(&data, h);
            let mut scratch = Scratch::new(5);
            let d = ((n as f64 * d_frac) as usize).min(n - 1);
            let members: Vec<usize> = (0..n).filter(|&e| e != d && labels[e] == labels[d]).collect();
            let mut with = members.clone();
            with.push(d);
            with.sort_unstable();
            let expected = scorer.cluster_log_lik(&with, &mut scratch) - scorer.cluster_log_lik(&members, &mut scratch);
            let got = scorer.join_delta(&members, d, &mut scratch);
            prop_assert!((expected - got).abs() < 1e-9);
            prop_assert!(scratch.counts.iter().all(|&x| x == 0));
            prop_assert!(scratch.doc_counts.iter().all(|&x| x == 0));
        }

        #[test]
        fn remove_add_round_trip(
            docs in prop::collection::vec(prop::collection::vec(0u32..6, 0..8), 1..10),
            labels in prop::collection::vec(0usize..4, 10),
            pick in 0usize..10,
        ) {
            let c = Corpus::new(docs.clone(), Vocabulary::from_words((0..6).map(|i| format!("w{i}")).collect()).unwrap()).unwrap();
            let p = Partition::from_labels(&labels[..docs.len()]);
            let mut counts = CountState::from_assignments(&c, &p).unwrap();
            let before = counts.clone();
            let d = pick % docs.len();
            let k = p.assignments()[d];
            counts.remove_document(c.document(d), k);
            counts.add_document(c.document(d), k);
            prop_assert_eq!(counts, before);
        }
    }

    #[test]
    fn pitman_yor_prior_rejected() {
        let c = corpus(&[&[0]], 2);
        let py = PriorSpec::pitman_yor(1.0, 0.2).unwrap();
        assert!(matches!(
            run_chain(&c, &py, &ChainConfig::default()),
            Err(Error::UnsupportedPrior { .. })
        ));
    }

    #[test]
    fn single_document_stays_in_cluster_zero() {
        let c = corpus(&[&[0, 1, 1]], 2);
        for prior in [PriorSpec::dirichlet(1.0).unwrap(), PriorSpec::uniform(3.0).unwrap()] {
            let cfg = ChainConfig { sweeps: 5, burn_in: 0, ..Default::default() };
            let run = run_chain(&c, &prior, &cfg).unwrap();
            assert!(run.samples.iter().all(|s| s.assignments.assignments() == [0]));
        }
    }

    #[test]
    fn disjoint_documents_prefer_two_clusters() {
        let c = corpus(&[&[0, 0, 1, 0, 1, 1], &[2, 3, 3, 2, 2, 3]], 4);
        let h = HyperParams::new(1.0, 0.05, 1.0).unwrap();
        let dp = PriorSpec::dirichlet(1.0).unwrap();
        let post = |labels: &[usize]| {
            let p = Partition::from_labels(labels);
            log_joint(&dp, &p) + corpus_log_likelihood(&c, &p, &h).unwrap()
        };
        assert!(post(&[0, 1]) > post(&[0, 0]));
        let cfg = ChainConfig {
            sweeps: 2000,
            burn_in: 100,
            hyper_interval: 0,
            initial_hypers: h,
            ..Default::default()
        };
        let run = run_chain(&c, &dp, &cfg).unwrap();
        let split = run.samples.iter().filter(|s| s.num_clusters == 2).count() as f64 / run.samples.len() as f64;
        let exact = 1.0 / (1.0 + (post(&[0, 0]) - post(&[0, 1])).exp());
        assert!((split - exact).abs() < 0.05, "{split} vs {exact}");
    }

    #[test]
    fn counts_stay_consistent_and_canonical() {
        let (c, _) = synth_corpus(&SynthConfig {
            num_clusters: 3,
            docs_per_cluster: 6,
            vocab_per_cluster: 4,
            doc_length: 8,
            overlap: 0.3,
            seed: 2,
        })
        .unwrap();
        let data = PreparedCorpus::new(&c);
        for prior in [PriorSpec::dirichlet(1.0).unwrap(), PriorSpec::uniform(1.0).unwrap()] {
            let mut state = ChainState::new(&c, &Partition::singletons(18), ones(), RandomStream::from_seed(1)).unwrap();
            for _ in 0..20 {
                gibbs_sweep(&mut state, &c, &data, &prior).unwrap();
                let p = state.partition();
                assert_eq!(state.counts(), &CountState::from_assignments(&c, &p).unwrap());
                assert_eq!(Partition::from_labels(p.assignments()), p);
            }
            assert_eq!(state.iteration(), 20);
        }
    }

    #[test]
    fn run_chain_contract() {
        let c = Corpus::from_text("a b a\nc d\na a b\nd c c", &TokenizerConfig::default());
        let up = PriorSpec::uniform(1.0).unwrap();
        let one = ChainConfig { sweeps: 1, burn_in: 0, ..Default::default() };
        assert_eq!(run_chain(&c, &up, &one).unwrap().samples.len(), 1);
        let bad = ChainConfig { sweeps: 3, burn_in: 3, ..Default::default() };
        assert!(run_chain(&c, &up, &bad).is_err());

        let cfg = ChainConfig { sweeps: 30, burn_in: 10, seed: 77, ..Default::default() };
        let a = run_chain(&c, &up, &cfg).unwrap().samples;
        let b = run_chain(&c, &up, &cfg).unwrap().samples;
        assert_eq!(a, b);
        assert_eq!(a.len(), 20);
    }

    #[test]
    fn flat_likelihood_gives_uniform_log_hypers() {
        // documents without tokens: P(W | c, beta) = 1 for every beta
        let c = corpus(&[&[], &[]], 3);
        let data = PreparedCorpus::new(&c);
        let mut state = ChainState::new(&c, &Partition::singletons(2), ones(), RandomStream::from_seed(9)).unwrap();
        let cfg = SliceConfig::default();
        let mut xs: Vec<f64> = (0..10_000)
            .map(|_| slice_sample_hypers(&mut state, &data, &cfg).hypers.beta1.ln())
            .collect();
        xs.sort_by(f64::total_cmp);
        let n = xs.len() as f64;
        let ks = xs
            .iter()
            .enumerate()
            .map(|(i, x)| {
                let cdf = (x + 10.0) / 20.0;
                (cdf - i as f64 / n).abs().max(((i + 1) as f64 / n - cdf).abs())
            })
            .fold(0.0, f64::max);
        assert!(ks < 1.63 / n.sqrt(), "KS {ks}");
    }

    #[test]
    fn checkpoint_round_trip_and_mismatch() {
        let c = Corpus::from_text("a b\nb c\nc a a\nd", &TokenizerConfig::default());
        let other = Corpus::from_text("a b\nb c\nc a a\ne", &TokenizerConfig::default());
        let up = PriorSpec::uniform(2.0).unwrap();
        let data = PreparedCorpus::new(&c);
        let mut state = ChainState::new(&c, &Partition::single_cluster(4), ones(), RandomStream::child(3, 1)).unwrap();
        for _ in 0..3 {
            gibbs_sweep(&mut state, &c, &data, &up).unwrap();
        }
        let cp = state.checkpoint(&up, &data);
        let json = serde_json::to_string_pretty(&cp).unwrap();
        let back: ChainCheckpoint = serde_json::from_str(&json).unwrap();
        assert_eq!(back, cp);
        let mut resumed = ChainState::from_checkpoint(&back, &c).unwrap();
        for _ in 0..3 {
            gibbs_sweep(&mut state, &c, &data, &up).unwrap();
            gibbs_sweep(&mut resumed, &c, &data, &up).unwrap();
        }
        assert_eq!(state.partition(), resumed.partition());
        assert_eq!(state.iteration(), resumed.iteration());
        assert!(matches!(
            ChainState::from_checkpoint(&back, &other),
            Err(Error::CorpusMismatch { .. })
        ));
    }
}
