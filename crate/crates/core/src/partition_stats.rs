//! Expected number of clusters and cluster-size counts: closed forms,
//! asymptotes, an exact recursion for the uniform process, and the
//! replicated simulation study.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::prior_process::{sample_partition, Partition, PriorKind, PriorSpec};
use crate::rng::RandomStream;

/// `H_{M,N}`: number of clusters of each size `M`, stored sparsely.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterSizeHistogram {
    pub n: usize,
    pub counts: BTreeMap<usize, usize>,
}

impl ClusterSizeHistogram {
    pub fn num_clusters(&self) -> usize {
        self.counts.values().sum()
    }

    /// `sum_M M * H_M`, which equals `n`.
    pub fn total_size(&self) -> usize {
        self.counts.iter().map(|(m, h)| m * h).sum()
    }

    pub fn get(&self, m: usize) -> usize {
        self.counts.get(&m).copied().unwrap_or(0)
    }
}

pub fn histogram(partition: &Partition) -> ClusterSizeHistogram {
    let mut counts = BTreeMap::new();
    for &s in partition.sizes() {
        *counts.entry(s).or_insert(0) += 1;
    }
    ClusterSizeHistogram {
        n: partition.len(),
        counts,
    }
}

/// Exact `E[K_n]` under the Dirichlet process: `sum_{m=1}^n theta / (m - 1 + theta)`.
pub fn expected_k_dp(theta: f64, n: usize) -> f64 {
    (1..=n).map(|m| theta / (m as f64 - 1.0 + theta)).sum()
}

/// Large-`n` asymptote `theta * ln n` of [`expected_k_dp`].
pub fn asymptotic_k_dp(theta: f64, n: usize) -> f64 {
    theta * (n as f64).ln()
}

fn check_discount(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "the Pitman-Yor asymptote needs 0 < alpha < 1, got {alpha}"
        )))
    }
}

/// `Gamma(1 + theta) / (alpha * Gamma(alpha + theta)) * n^alpha`.
pub fn expected_k_py(theta: f64, alpha: f64, n: usize) -> Result<f64> {
    check_discount(alpha)?;
    let log = ln_gamma(1.0 + theta) - alpha.ln() - ln_gamma(alpha + theta) + alpha * (n as f64).ln();
    Ok(log.exp())
}

/// `sqrt(2 theta n)`.
pub fn expected_k_up(theta: f64, n: usize) -> f64 {
    (2.0 * theta).sqrt() * (n as f64).sqrt()
}

/// `theta / M`.
pub fn expected_h_dp(theta: f64, m: usize) -> f64 {
    theta / m as f64
}

/// `Gamma(1 + theta) prod_{j=1}^{M-1} (j - alpha) / (Gamma(alpha + theta) M!) * n^alpha`.
pub fn expected_h_py(theta: f64, alpha: f64, m: usize, n: usize) -> Result<f64> {
    check_discount(alpha)?;
    if m == 0 {
        return Err(Error::InvalidArgument("cluster size M must be >= 1".into()));
    }
    let log_prod: f64 = (1..m).map(|j| (j as f64 - alpha).ln()).sum();
    let log = ln_gamma(1.0 + theta) + log_prod
        - ln_gamma(alpha + theta)
        - ln_gamma(m as f64 + 1.0)
        + alpha * (n as f64).ln();
    Ok(log.exp())
}

/// Constant `theta`, independent of `M`.
pub fn expected_h_up(theta: f64) -> f64 {
    theta
}

/// Mean and variance of `K_n` under the uniform process, computed exactly
/// by propagating the distribution of `K` one observation at a time. Valid
/// because the uniform predictive depends on the sizes only through `K`.
///
/// Probabilities below `1e-40` are dropped from the edges of the support.
pub fn exact_k_moments_up(theta: f64, n: usize) -> (f64, f64) {
    const FLOOR: f64 = 1e-40;
    if n == 0 {
        return (0.0, 0.0);
    }
    // After the first observation K = 1 with certainty.
    let mut lo = 1usize;
    let mut dist = vec![1.0f64];
    let mut next = Vec::new();
    for _ in 1..n {
        next.clear();
        next.resize(dist.len() + 1, 0.0);
        for (i, &p) in dist.iter().enumerate() {
            let k = (lo + i) as f64;
            let p_new = theta / (k + theta);
            next[i] += p * (1.0 - p_new);
            next[i + 1] += p * p_new;
        }
        let first = next.iter().position(|&p| p > FLOOR).unwrap_or(0);
        let last = next.iter().rposition(|&p| p > FLOOR).unwrap_or(next.len() - 1);
        lo += first;
        dist.clear();
        dist.extend_from_slice(&next[first..=last]);
    }
    let (mut m1, mut m2) = (0.0, 0.0);
    for (i, &p) in dist.iter().enumerate() {
        let k = (lo + i) as f64;
        m1 += p * k;
        m2 += p * k * k;
    }
    (m1, (m2 - m1 * m1).max(0.0))
}

/// Exact `E[K_n]` under the uniform process.
pub fn exact_expected_k_up(theta: f64, n: usize) -> f64 {
    exact_k_moments_up(theta, n).0
}

/// Replicate means for one `(spec, n)` cell of the simulation study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationSummary {
    pub spec: PriorSpec,
    pub n: usize,
    pub replicates: usize,
    pub mean_k: f64,
    pub se_k: f64,
    /// `M -> mean H_{M,n}` over replicates.
    pub mean_h: BTreeMap<usize, f64>,
    pub master_seed: u64,
}

impl SimulationSummary {
    pub fn mean_h_at(&self, m: usize) -> f64 {
        self.mean_h.get(&m).copied().unwrap_or(0.0)
    }
}

/// Samples `replicates` independent partitions for every `(spec, n)` pair.
///
/// Replicate `r` of cell `(i, j)` uses stream `derive(master_seed, [i, j, r])`
/// and the reduction runs in replicate order, so the output does not depend
/// on the size of the rayon pool.
pub fn run_simulation(
    specs: &[PriorSpec],
    n_grid: &[usize],
    replicates: usize,
    master_seed: u64,
) -> Result<Vec<SimulationSummary>> {
    if replicates == 0 {
        return Err(Error::InvalidArgument("replicates must be >= 1".into()));
    }
    if n_grid.is_empty() || n_grid.contains(&0) {
        return Err(Error::InvalidArgument(
            "n grid must be non-empty with every n >= 1".into(),
        ));
    }
    let mut out = Vec::with_capacity(specs.len() * n_grid.len());
    for (i, spec) in specs.iter().enumerate() {
        for (j, &n) in n_grid.iter().enumerate() {
            let hists: Vec<ClusterSizeHistogram> = (0..replicates)
                .into_par_iter()
                .map(|r| {
                    let mut rng = RandomStream::derive(master_seed, &[i as u64, j as u64, r as u64]);
                    histogram(&sample_partition(spec, n, &mut rng))
                })
                .collect();
            out.push(summarize(*spec, n, &hists, master_seed));
        }
    }
    Ok(out)
}

fn summarize(spec: PriorSpec, n: usize, hists: &[ClusterSizeHistogram], master_seed: u64) -> SimulationSummary {
    let reps = hists.len() as f64;
    let ks: Vec<f64> = hists.iter().map(|h| h.num_clusters() as f64).collect();
    let mean_k = ks.iter().sum::<f64>() / reps;
    let se_k = if hists.len() > 1 {
        let var = ks.iter().map(|k| (k - mean_k).powi(2)).sum::<f64>() / (reps - 1.0);
        (var / reps).sqrt()
    } else {
        0.0
    };
    let mut totals: BTreeMap<usize, usize> = BTreeMap::new();
    for h in hists {
        for (&m, &c) in &h.counts {
            *totals.entry(m).or_insert(0) += c;
        }
    }
    let mean_h = totals.into_iter().map(|(m, c)| (m, c as f64 / reps)).collect();
    SimulationSummary {
        spec,
        n,
        replicates: hists.len(),
        mean_k,
        se_k,
        mean_h,
        master_seed,
    }
}

/// Least-squares slope of `y` on `x`.
pub fn ols_slope(points: &[(f64, f64)]) -> Result<f64> {
    if points.len() < 2 {
        return Err(Error::InvalidArgument("need at least two points".into()));
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidArgument("x values must not all be equal".into()));
    }
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    Ok(sxy / sxx)
}

/// Slope of `ln mean_k` against `ln n` across summaries of one spec.
pub fn fit_growth_exponent(summaries: &[SimulationSummary]) -> Result<f64> {
    let mut ns: Vec<usize> = summaries.iter().map(|s| s.n).collect();
    ns.sort_unstable();
    ns.dedup();
    if ns.len() < 2 {
        return Err(Error::InvalidArgument("need at least two distinct n values".into()));
    }
    if let Some(s) = summaries.iter().find(|s| s.mean_k <= 0.0) {
        return Err(Error::InvalidArgument(format!("mean_k must be positive (n = {})", s.n)));
    }
    let points: Vec<(f64, f64)> = summaries
        .iter()
        .map(|s| ((s.n as f64).ln(), s.mean_k.ln()))
        .collect();
    ols_slope(&points)
}

/// Closed-form expected `K_n` for any spec: the exact sum for the Dirichlet
/// process (and Pitman-Yor with `alpha = 0`), the asymptote otherwise.
pub fn expected_k(spec: &PriorSpec, n: usize) -> f64 {
    match spec.kind() {
        PriorKind::Dirichlet => expected_k_dp(spec.theta(), n),
        PriorKind::PitmanYor if spec.alpha() == 0.0 => expected_k_dp(spec.theta(), n),
        PriorKind::PitmanYor => expected_k_py(spec.theta(), spec.alpha(), n).expect("alpha checked"),
        PriorKind::Uniform => expected_k_up(spec.theta(), n),
    }
}

/// Asymptotic expected `H_{M,n}` for any spec. Pitman-Yor with `alpha = 0`
/// uses the Dirichlet form.
pub fn expected_h(spec: &PriorSpec, m: usize, n: usize) -> f64 {
    match spec.kind() {
        PriorKind::Dirichlet => expected_h_dp(spec.theta(), m),
        PriorKind::PitmanYor if spec.alpha() == 0.0 => expected_h_dp(spec.theta(), m),
        PriorKind::PitmanYor => expected_h_py(spec.theta(), spec.alpha(), m, n).expect("alpha checked"),
        PriorKind::Uniform => expected_h_up(spec.theta()),
    }
}
