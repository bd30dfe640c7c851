use npclust::corpus_io::{synth_corpus, SynthConfig};
use npclust::doc_model::{run_chain, ChainConfig};
use npclust::slice::{slice_sample, SliceConfig};
use npclust::{PriorSpec, RandomStream};

// Gamma(3, 1) on a log scale, truncated to [-10, 10]; its mean and second
// moment come from a fine Riemann sum rather than closed forms.
fn log_target(x: f64) -> f64 {
    3.0 * x - x.exp()
}

fn grid_moments() -> (f64, f64) {
    let step = 1e-4;
    let (mut z, mut m1, mut m2) = (0.0, 0.0, 0.0);
    let mut x = -10.0;
    while x <= 10.0 {
        let w = log_target(x).exp();
        z += w;
        m1 += w * x;
        m2 += w * x * x;
        x += step;
    }
    (m1 / z, m2 / z)
}

#[test]
fn slice_sampler_matches_grid_moments() {
    let (mean, second) = grid_moments();
    let mut rng = RandomStream::from_seed(31);
    let cfg = SliceConfig::default();
    let mut x = 0.0;
    let draws: Vec<f64> = (0..40_000)
        .map(|_| {
            x = slice_sample(x, log_target, &cfg, &mut rng).value;
            x
        })
        .collect();
    let n = draws.len() as f64;
    let m1 = draws.iter().sum::<f64>() / n;
    let m2 = draws.iter().map(|x| x * x).sum::<f64>() / n;
    assert!((m1 - mean).abs() < 0.02, "mean {m1} vs {mean}");
    assert!((m2 - second).abs() < 0.04, "second moment {m2} vs {second}");
}

#[test]
fn recovers_well_separated_clusters() {
    let (corpus, truth) = synth_corpus(&SynthConfig {
        num_clusters: 4,
        docs_per_cluster: 15,
        vocab_per_cluster: 15,
        doc_length: 30,
        overlap: 0.1,
        seed: 3,
    })
    .unwrap();
    for spec in [PriorSpec::dirichlet(1.0).unwrap(), PriorSpec::uniform(1.0).unwrap()] {
        let cfg = ChainConfig {
            sweeps: 60,
            burn_in: 30,
            seed: 4,
            ..Default::default()
        };
        let run = run_chain(&corpus, &spec, &cfg).unwrap();
        let found = &run.map_sample().unwrap().assignments;
        let ri = found.rand_index(&truth).unwrap();
        assert!(ri >= 0.9, "{:?}: rand index {ri}", spec.kind());
    }
}
