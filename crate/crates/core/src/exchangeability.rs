//! Sensitivity of `log P(c)` to the order of observations, compared with its
//! spread across different inferred partitions.

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus_io::Corpus;
use crate::doc_model::{run_chains, ChainConfig};
use crate::error::{Error, Result};
use crate::math::mean_sd;
use crate::prior_process::{log_joint, permute, Partition, PriorSpec};
use crate::rng::{derive_seed, RandomStream};

/// `log_joint` of `partition` under `num_orderings` uniformly random
/// reorderings of its observations.
pub fn ordering_log_probs(
    spec: &PriorSpec,
    partition: &Partition,
    num_orderings: usize,
    rng: &mut RandomStream,
) -> Vec<f64> {
    let mut perm: Vec<usize> = (0..partition.len()).collect();
    (0..num_orderings)
        .map(|_| {
            perm.shuffle(rng);
            let permuted = permute(partition, &perm).expect("shuffle is a permutation");
            log_joint(spec, &permuted)
        })
        .collect()
}

/// Sample standard deviation of `log P(c)` over random orderings.
pub fn between_ordering_sd(
    spec: &PriorSpec,
    partition: &Partition,
    num_orderings: usize,
    rng: &mut RandomStream,
) -> Result<f64> {
    if num_orderings < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 orderings, got {num_orderings}")));
    }
    Ok(mean_sd(&ordering_log_probs(spec, partition, num_orderings, rng)).1)
}

/// Sample standard deviation of `log P(c)` across partitions, each scored in
/// its stored order.
pub fn between_partition_sd(spec: &PriorSpec, partitions: &[Partition]) -> Result<f64> {
    if partitions.len() < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 partitions, got {}", partitions.len())));
    }
    let n = partitions[0].len();
    if let Some(p) = partitions.iter().find(|p| p.len() != n) {
        return Err(Error::InvalidPartition(format!(
            "partitions cover {} and {} observations",
            n,
            p.len()
        )));
    }
    let logs: Vec<f64> = partitions.iter().map(|p| log_joint(spec, p)).collect();
    Ok(mean_sd(&logs).1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderingStudy {
    pub spec: PriorSpec,
    pub partitions: Vec<Partition>,
    pub num_orderings: usize,
    pub per_partition_ordering_sd: Vec<f64>,
    pub between_partition_sd: f64,
    pub master_seed: u64,
}

impl OrderingStudy {
    pub fn mean_ordering_sd(&self) -> f64 {
        mean_sd(&self.per_partition_ordering_sd).0
    }
}

/// Both standard deviations for a given set of partitions. Partition `i`
/// is reordered with the stream derived from `(master_seed, i)`.
pub fn ordering_study(
    spec: &PriorSpec,
    partitions: Vec<Partition>,
    num_orderings: usize,
    master_seed: u64,
) -> Result<OrderingStudy> {
    let between_partition_sd = between_partition_sd(spec, &partitions)?;
    let per_partition_ordering_sd = partitions
        .par_iter()
        .enumerate()
        .map(|(i, p)| {
            let mut rng = RandomStream::derive(master_seed, &[i as u64]);
            between_ordering_sd(spec, p, num_orderings, &mut rng)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(OrderingStudy {
        spec: *spec,
        partitions,
        num_orderings,
        per_partition_ordering_sd,
        between_partition_sd,
        master_seed,
    })
}

/// Infers one partition per chain (the final state of each) and compares
/// the ordering and partition spreads of `log P(c)`.
pub fn run_ordering_study(
    spec: &PriorSpec,
    corpus: &Corpus,
    num_chains: usize,
    num_orderings: usize,
    chain_config: &ChainConfig,
    master_seed: u64,
) -> Result<OrderingStudy> {
    if corpus.is_empty() {
        return Err(Error::InvalidArgument("corpus has no documents".into()));
    }
    let runs = run_chains(corpus, spec, chain_config, num_chains, derive_seed(master_seed, &[0]))?;
    let partitions = runs.iter().map(|r| r.final_state.partition()).collect();
    ordering_study(spec, partitions, num_orderings, derive_seed(master_seed, &[1]))
}

/// [`run_ordering_study`] for each theta in `thetas`; study `j` uses the
/// seed derived from `(master_seed, j)`.
pub fn run_theta_grid(
    base: &PriorSpec,
    thetas: &[f64],
    corpus: &Corpus,
    num_chains: usize,
    num_orderings: usize,
    chain_config: &ChainConfig,
    master_seed: u64,
) -> Result<Vec<OrderingStudy>> {
    thetas
        .iter()
        .enumerate()
        .map(|(j, &theta)| {
            let spec = PriorSpec::new(base.kind(), theta, base.alpha())?;
            run_ordering_study(
                &spec,
                corpus,
                num_chains,
                num_orderings,
                chain_config,
                derive_seed(master_seed, &[j as u64]),
            )
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prior_process::sample_partition;

    #[test]
    fn exchangeable_priors_have_zero_ordering_sd() {
        let mut rng = RandomStream::from_seed(4);
        for spec in [PriorSpec::dirichlet(2.0).unwrap(), PriorSpec::pitman_yor(1.0, 0.4).unwrap()] {
            for _ in 0..20 {
                let p = sample_partition(&spec, 40, &mut rng);
                assert!(between_ordering_sd(&spec, &p, 30, &mut rng).unwrap() < 1e-9);
            }
        }
    }

    #[test]
    fn uniform_singletons_have_zero_ordering_sd() {
        let up = PriorSpec::uniform(1.3).unwrap();
        let mut rng = RandomStream::from_seed(0);
        assert!(between_ordering_sd(&up, &Partition::singletons(12), 50, &mut rng).unwrap() < 1e-12);
    }

    #[test]
    fn two_point_partition_sd() {
        let up = PriorSpec::uniform(1.0).unwrap();
        let ps = [Partition::from_labels(&[0, 0, 1]), Partition::from_labels(&[0, 1, 1])];
        let sd = between_partition_sd(&up, &ps).unwrap();
        let expected = ((0.25f64).ln() - (1.0f64 / 6.0).ln()).abs() / 2f64.sqrt();
        assert!((sd - expected).abs() < 1e-12);
        assert!((sd - 0.2867).abs() < 1e-4);
        assert_eq!(between_partition_sd(&up, &[ps[0].clone(), ps[0].clone()]).unwrap(), 0.0);
    }

    #[test]
    fn dp_partition_sd_hand_products() {
        let dp = PriorSpec::dirichlet(1.0).unwrap();
        // (0,0,0): 1 * 1/2 * 2/3 = 1/3 ; (0,1,2): 1 * 1/2 * 1/3 = 1/6
        let ps = [Partition::from_labels(&[0, 0, 0]), Partition::from_labels(&[0, 1, 2])];
        let expected = ((1.0f64 / 3.0).ln() - (1.0f64 / 6.0).ln()).abs() / 2f64.sqrt();
        assert!((between_partition_sd(&dp, &ps).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn errors() {
        let up = PriorSpec::uniform(1.0).unwrap();
        let mut rng = RandomStream::from_seed(0);
        assert!(between_ordering_sd(&up, &Partition::singletons(3), 1, &mut rng).is_err());
        assert!(between_partition_sd(&up, &[Partition::singletons(3)]).is_err());
        assert!(between_partition_sd(&up, &[Partition::singletons(3), Partition::singletons(4)]).is_err());
    }

    #[test]
    fn degenerate_study() {
        let up = PriorSpec::uniform(2.0).unwrap();
        let ps = vec![Partition::from_labels(&[0, 1, 0, 2]), Partition::from_labels(&[0, 0, 1, 1])];
        let study = ordering_study(&up, ps, 2, 9).unwrap();
        assert_eq!(study.per_partition_ordering_sd.len(), 2);
        assert!(study.per_partition_ordering_sd.iter().all(|&s| s >= 0.0));
        assert!(study.between_partition_sd > 0.0);
        assert_eq!(study, ordering_study(&up, study.partitions.clone(), 2, 9).unwrap());
    }
}
