//! Sequential predictive rules of the Dirichlet, Pitman-Yor and uniform
//! processes, and the partitions they generate.
//!
//! A [`Partition`] stores cluster labels in canonical form: labels are
//! `0..K` and label `k` first appears before label `k + 1`. All probability
//! arithmetic is done in log space.

use std::collections::HashMap;
use std::fmt;
use std::hash::Hash;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PriorKind {
    #[serde(alias = "dp")]
    Dirichlet,
    #[serde(alias = "py")]
    PitmanYor,
    #[serde(alias = "up")]
    Uniform,
}

impl PriorKind {
    /// Short name used in CSV output and on the command line.
    pub fn short_name(self) -> &'static str {
        match self {
            PriorKind::Dirichlet => "dp",
            PriorKind::PitmanYor => "py",
            PriorKind::Uniform => "up",
        }
    }
}

impl fmt::Display for PriorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short_name())
    }
}

impl FromStr for PriorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "dp" | "dirichlet" => Ok(PriorKind::Dirichlet),
            "py" | "pitman_yor" | "pitman-yor" | "pitmanyor" => Ok(PriorKind::PitmanYor),
            "up" | "uniform" => Ok(PriorKind::Uniform),
            other => Err(Error::InvalidPrior(format!("unknown process `{other}`"))),
        }
    }
}

/// A clustering prior: process kind, concentration `theta` and, for
/// Pitman-Yor, the discount `alpha`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPriorSpec")]
pub struct PriorSpec {
    kind: PriorKind,
    theta: f64,
    alpha: f64,
}

#[derive(Deserialize)]
struct RawPriorSpec {
    kind: PriorKind,
    theta: f64,
    #[serde(default)]
    alpha: f64,
}

impl TryFrom<RawPriorSpec> for PriorSpec {
    type Error = Error;

    fn try_from(raw: RawPriorSpec) -> Result<Self> {
        PriorSpec::new(raw.kind, raw.theta, raw.alpha)
    }
}

impl PriorSpec {
    /// `alpha` is ignored (stored as 0) unless `kind` is Pitman-Yor.
    pub fn new(kind: PriorKind, theta: f64, alpha: f64) -> Result<Self> {
        if !(theta.is_finite() && theta > 0.0) {
            return Err(Error::InvalidPrior(format!("theta must be > 0, got {theta}")));
        }
        let alpha = match kind {
            PriorKind::PitmanYor => {
                if !(0.0..1.0).contains(&alpha) {
                    return Err(Error::InvalidPrior(format!(
                        "alpha must lie in [0, 1), got {alpha}"
                    )));
                }
                alpha
            }
            _ => 0.0,
        };
        Ok(Self { kind, theta, alpha })
    }

    pub fn dirichlet(theta: f64) -> Result<Self> {
        Self::new(PriorKind::Dirichlet, theta, 0.0)
    }

    pub fn pitman_yor(theta: f64, alpha: f64) -> Result<Self> {
        Self::new(PriorKind::PitmanYor, theta, alpha)
    }

    pub fn uniform(theta: f64) -> Result<Self> {
        Self::new(PriorKind::Uniform, theta, 0.0)
    }

    pub fn kind(&self) -> PriorKind {
        self.kind
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Log-probability that observation `n + 1` joins an existing cluster of
    /// size `size` (or a new cluster when `size` is `None`), given `n`
    /// previous observations in `k` clusters.
    pub fn log_predictive(&self, n: usize, k: usize, size: Option<usize>) -> f64 {
        if n == 0 {
            // Only possible outcome: the first cluster.
            return if size.is_none() { 0.0 } else { f64::NEG_INFINITY };
        }
        let (n, k, theta) = (n as f64, k as f64, self.theta);
        match (self.kind, size) {
            (PriorKind::Dirichlet, Some(s)) => (s as f64).ln() - (n + theta).ln(),
            (PriorKind::Dirichlet, None) => theta.ln() - (n + theta).ln(),
            (PriorKind::PitmanYor, Some(s)) => (s as f64 - self.alpha).ln() - (n + theta).ln(),
            (PriorKind::PitmanYor, None) => (theta + k * self.alpha).ln() - (n + theta).ln(),
            (PriorKind::Uniform, Some(_)) => -(k + theta).ln(),
            (PriorKind::Uniform, None) => theta.ln() - (k + theta).ln(),
        }
    }

    /// Probability of opening a new cluster after `n` observations in `k`
    /// clusters.
    fn new_cluster_prob(&self, n: usize, k: usize) -> f64 {
        let (nf, kf, theta) = (n as f64, k as f64, self.theta);
        match self.kind {
            PriorKind::Dirichlet => theta / (nf + theta),
            PriorKind::PitmanYor => (theta + kf * self.alpha) / (nf + theta),
            PriorKind::Uniform => theta / (kf + theta),
        }
    }
}

impl fmt::Display for PriorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            PriorKind::PitmanYor => write!(f, "py(theta={}, alpha={})", self.theta, self.alpha),
            kind => write!(f, "{kind}(theta={})", self.theta),
        }
    }
}

/// Canonically labelled cluster assignments with cached cluster sizes.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct Partition {
    assignments: Vec<usize>,
    sizes: Vec<usize>,
}

impl TryFrom<Vec<usize>> for Partition {
    type Error = Error;

    fn try_from(labels: Vec<usize>) -> Result<Self> {
        Partition::from_canonical(labels)
    }
}

impl From<Partition> for Vec<usize> {
    fn from(p: Partition) -> Self {
        p.assignments
    }
}

impl Partition {
    pub fn new() -> Self {
        Self::default()
    }

    /// Relabels arbitrary labels in order of first appearance.
    pub fn from_labels<T: Eq + Hash + Copy>(labels: &[T]) -> Self {
        let mut map = HashMap::new();
        let mut p = Self::with_capacity(labels.len());
        for label in labels {
            let next = map.len();
            let canonical = *map.entry(*label).or_insert(next);
            p.push(canonical);
        }
        p
    }

    /// Accepts labels that are already canonical; anything else is an error.
    pub fn from_canonical(labels: Vec<usize>) -> Result<Self> {
        let mut sizes: Vec<usize> = Vec::new();
        for (i, &label) in labels.iter().enumerate() {
            match label.cmp(&sizes.len()) {
                std::cmp::Ordering::Less => sizes[label] += 1,
                std::cmp::Ordering::Equal => sizes.push(1),
                std::cmp::Ordering::Greater => {
                    return Err(Error::InvalidPartition(format!(
                        "label {label} at position {i} skips label {}",
                        sizes.len()
                    )))
                }
            }
        }
        Ok(Self {
            assignments: labels,
            sizes,
        })
    }

    /// All observations in one cluster.
    pub fn single_cluster(n: usize) -> Self {
        Self {
            assignments: vec![0; n],
            sizes: if n == 0 { vec![] } else { vec![n] },
        }
    }

    pub fn singletons(n: usize) -> Self {
        Self {
            assignments: (0..n).collect(),
            sizes: vec![1; n],
        }
    }

    fn with_capacity(n: usize) -> Self {
        Self {
            assignments: Vec::with_capacity(n),
            sizes: Vec::new(),
        }
    }

    /// Appends an observation. `label` must be an existing label or exactly
    /// `num_clusters()`.
    fn push(&mut self, label: usize) {
        debug_assert!(label <= self.sizes.len());
        if label == self.sizes.len() {
            self.sizes.push(1);
        } else {
            self.sizes[label] += 1;
        }
        self.assignments.push(label);
    }

    pub fn len(&self) -> usize {
        self.assignments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignments.is_empty()
    }

    pub fn num_clusters(&self) -> usize {
        self.sizes.len()
    }

    pub fn assignments(&self) -> &[usize] {
        &self.assignments
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    /// Block sizes in decreasing order; equal for partitions with the same
    /// multiset of block sizes.
    pub fn sorted_sizes(&self) -> Vec<usize> {
        let mut s = self.sizes.clone();
        s.sort_unstable_by(|a, b| b.cmp(a));
        s
    }

    /// Members of each cluster, in position order.
    pub fn blocks(&self) -> Vec<Vec<usize>> {
        let mut blocks: Vec<Vec<usize>> = self.sizes.iter().map(|&s| Vec::with_capacity(s)).collect();
        for (i, &c) in self.assignments.iter().enumerate() {
            blocks[c].push(i);
        }
        blocks
    }

    /// Fraction of item pairs on which the two partitions agree about
    /// co-clustering (Rand index). Requires equal lengths.
    pub fn rand_index(&self, other: &Partition) -> Result<f64> {
        if self.len() != other.len() {
            return Err(Error::InvalidPartition(format!(
                "lengths differ: {} vs {}",
                self.len(),
                other.len()
            )));
        }
        let n = self.len();
        if n < 2 {
            return Ok(1.0);
        }
        let (a, b) = (&self.assignments, &other.assignments);
        let mut agree = 0u64;
        for i in 0..n {
            for j in i + 1..n {
                if (a[i] == a[j]) == (b[i] == b[j]) {
                    agree += 1;
                }
            }
        }
        Ok(agree as f64 / (n * (n - 1) / 2) as f64)
    }
}

/// Log-probabilities of the next observation joining each of the `K`
/// existing clusters (entries `0..K`) or a new one (entry `K`).
pub fn predictive_log_probs(spec: &PriorSpec, partition: &Partition) -> Vec<f64> {
    let (n, k) = (partition.len(), partition.num_clusters());
    if n == 0 {
        return vec![0.0];
    }
    partition
        .sizes()
        .iter()
        .map(|&s| spec.log_predictive(n, k, Some(s)))
        .chain(std::iter::once(spec.log_predictive(n, k, None)))
        .collect()
}

/// Extends `partition` by one assignment drawn from the predictive rule.
///
/// Existing clusters are chosen in O(1): for the Dirichlet process by
/// copying the label of a uniformly chosen previous observation, for
/// Pitman-Yor by the same proposal accepted with probability
/// `(N_k - alpha) / N_k`, for the uniform process by a uniform label.
pub fn sample_next<R: Rng + ?Sized>(spec: &PriorSpec, mut partition: Partition, rng: &mut R) -> Partition {
    let (n, k) = (partition.len(), partition.num_clusters());
    if n == 0 {
        partition.push(0);
        return partition;
    }
    if rng.random::<f64>() < spec.new_cluster_prob(n, k) {
        partition.push(k);
        return partition;
    }
    let label = match spec.kind {
        PriorKind::Dirichlet => partition.assignments[rng.random_range(0..n)],
        PriorKind::PitmanYor => loop {
            let c = partition.assignments[rng.random_range(0..n)];
            let size = partition.sizes[c] as f64;
            if rng.random::<f64>() * size < size - spec.alpha {
                break c;
            }
        },
        PriorKind::Uniform => rng.random_range(0..k),
    };
    partition.push(label);
    partition
}

/// Draws a partition of `n` observations by `n` sequential draws.
pub fn sample_partition<R: Rng + ?Sized>(spec: &PriorSpec, n: usize, rng: &mut R) -> Partition {
    (0..n).fold(Partition::with_capacity(n), |p, _| sample_next(spec, p, rng))
}

/// `log P(c)` for the stored ordering: the sum of sequential predictive
/// log-probabilities.
pub fn log_joint(spec: &PriorSpec, partition: &Partition) -> f64 {
    let mut sizes: Vec<usize> = Vec::with_capacity(partition.num_clusters());
    let mut total = 0.0;
    for (n, &c) in partition.assignments().iter().enumerate() {
        if c == sizes.len() {
            total += spec.log_predictive(n, sizes.len(), None);
            sizes.push(1);
        } else {
            total += spec.log_predictive(n, sizes.len(), Some(sizes[c]));
            sizes[c] += 1;
        }
    }
    total
}

/// Reorders observations so that new position `i` holds old position
/// `perm[i]`, then relabels canonically.
pub fn permute(partition: &Partition, perm: &[usize]) -> Result<Partition> {
    let n = partition.len();
    if perm.len() != n {
        return Err(Error::InvalidPermutation(format!(
            "length {} for a partition of {n}",
            perm.len()
        )));
    }
    let mut seen = vec![false; n];
    for &i in perm {
        if i >= n || std::mem::replace(&mut seen[i], true) {
            return Err(Error::InvalidPermutation(format!(
                "{i} is out of range or repeated"
            )));
        }
    }
    let labels: Vec<usize> = perm.iter().map(|&i| partition.assignments[i]).collect();
    Ok(Partition::from_labels(&labels))
}
