//! Class-stratified mini-batch construction.
//!
//! A mini-batch is n sub-batches of b sample indices each, every sub-batch
//! drawn from a single class. Class slots are drawn uniformly over the
//! classes present in the dataset; the whole index stream is a pure function
//! of (dataset order, config, seed).

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

use crate::error::{Error, Result};

/// Feature vectors with 1-based class labels in `[1, num_classes]`.
#[derive(Debug, Clone)]
pub struct LabeledDataset {
    features: Vec<Vec<f64>>,
    labels: Vec<usize>,
    num_classes: usize,
}

impl LabeledDataset {
    pub fn new(features: Vec<Vec<f64>>, labels: Vec<usize>, num_classes: usize) -> Result<Self> {
        if features.is_empty() {
            return Err(Error::invalid_input("dataset must contain at least one sample"));
        }
        if features.len() != labels.len() {
            return Err(Error::invalid_input(format!(
                "{} feature rows but {} labels",
                features.len(),
                labels.len()
            )));
        }
        if num_classes == 0 {
            return Err(Error::invalid_input("num_classes must be at least 1"));
        }
        let dim = features[0].len();
        for (idx, f) in features.iter().enumerate() {
            if f.len() != dim || dim == 0 {
                return Err(Error::invalid_input(format!(
                    "feature row {idx} has dimension {}, expected {dim}",
                    f.len()
                )));
            }
            if f.iter().any(|c| !c.is_finite()) {
                return Err(Error::invalid_input(format!("feature row {idx} has a non-finite value")));
            }
        }
        for (idx, &label) in labels.iter().enumerate() {
            if label == 0 || label > num_classes {
                return Err(Error::invalid_input(format!(
                    "label {label} of sample {idx} outside [1, {num_classes}]"
                )));
            }
        }
        Ok(Self {
            features,
            labels,
            num_classes,
        })
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn feature_dim(&self) -> usize {
        self.features[0].len()
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn feature(&self, i: usize) -> &[f64] {
        &self.features[i]
    }

    pub fn features(&self) -> &[Vec<f64>] {
        &self.features
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i]
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    /// Sample indices of class `k`, in dataset order.
    pub fn indices_of_class(&self, k: usize) -> Vec<usize> {
        self.labels
            .iter()
            .enumerate()
            .filter_map(|(i, &l)| (l == k).then_some(i))
            .collect()
    }

    /// Per-class sample counts, index 0 unused.
    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_classes + 1];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    /// Classes with at least one sample, ascending.
    pub fn present_classes(&self) -> Vec<usize> {
        self.class_counts()
            .iter()
            .enumerate()
            .skip(1)
            .filter_map(|(k, &c)| (c > 0).then_some(k))
            .collect()
    }

    /// New dataset from the given sample indices (kept in the given order).
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        let features = indices.iter().map(|&i| self.features[i].clone()).collect();
        let labels = indices.iter().map(|&i| self.labels[i]).collect();
        Self::new(features, labels, self.num_classes)
    }
}

/// How indices are drawn within one sub-batch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClassPolicy {
    /// b independent uniform draws from the class (works for any class size).
    WithReplacement,
    /// b distinct indices per sub-batch; every present class must hold at
    /// least b samples.
    WithoutReplacement,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerConfig {
    /// Sub-batch size.
    pub b: usize,
    /// Sub-batches per mini-batch.
    pub n: usize,
    pub seed: u64,
    #[serde(default = "default_class_policy")]
    pub class_policy: ClassPolicy,
    /// When true the n class slots of one mini-batch are distinct classes;
    /// when false (default) they are drawn independently.
    #[serde(default)]
    pub distinct_classes: bool,
}

fn default_class_policy() -> ClassPolicy {
    ClassPolicy::WithReplacement
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.b < 2 {
            return Err(Error::config(format!("sampler.b must be at least 2, got {}", self.b)));
        }
        if self.n < 1 {
            return Err(Error::config("sampler.n must be at least 1"));
        }
        Ok(())
    }
}

/// One sub-batch worth of sample indices, all sharing `class_id`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubBatchIndices {
    pub class_id: usize,
    pub indices: Vec<usize>,
}

fn check_policy(dataset: &LabeledDataset, config: &SamplerConfig) -> Result<Vec<usize>> {
    config.validate()?;
    let classes = dataset.present_classes();
    if config.class_policy == ClassPolicy::WithoutReplacement {
        let counts = dataset.class_counts();
        for &k in &classes {
            if counts[k] < config.b {
                return Err(Error::config(format!(
                    "class {k} has {} samples but without-replacement sub-batches need {}",
                    counts[k], config.b
                )));
            }
        }
    }
    if config.distinct_classes && config.n > classes.len() {
        return Err(Error::config(format!(
            "{} distinct classes requested per mini-batch but only {} are present",
            config.n,
            classes.len()
        )));
    }
    Ok(classes)
}

fn draw_sub_batch<R: Rng>(
    dataset: &LabeledDataset,
    config: &SamplerConfig,
    class_id: usize,
    rng: &mut R,
) -> SubBatchIndices {
    let pool = dataset.indices_of_class(class_id);
    let indices = match config.class_policy {
        ClassPolicy::WithReplacement => (0..config.b)
            .map(|_| pool[rng.random_range(0..pool.len())])
            .collect(),
        ClassPolicy::WithoutReplacement => {
            let mut pool = pool;
            let (chosen, _) = pool.partial_shuffle(rng, config.b);
            chosen.to_vec()
        }
    };
    SubBatchIndices {
        class_id,
        indices,
    }
}

/// Draws one mini-batch: n class slots, then b indices per slot.
pub fn sample_minibatch<R: Rng>(
    dataset: &LabeledDataset,
    config: &SamplerConfig,
    rng: &mut R,
) -> Result<Vec<SubBatchIndices>> {
    let classes = check_policy(dataset, config)?;
    let slots: Vec<usize> = if config.distinct_classes {
        let mut pool = classes;
        let (chosen, _) = pool.partial_shuffle(rng, config.n);
        chosen.to_vec()
    } else {
        (0..config.n)
            .map(|_| classes[rng.random_range(0..classes.len())])
            .collect()
    };
    Ok(slots
        .into_iter()
        .map(|k| draw_sub_batch(dataset, config, k, rng))
        .collect())
}

/// Default mini-batches per epoch: `ceil(m / (n * b))`.
pub fn default_batches_per_epoch(dataset_len: usize, config: &SamplerConfig) -> usize {
    dataset_len.div_ceil(config.n * config.b).max(1)
}

/// A deterministic stream of `batches_per_epoch` mini-batches.
pub struct EpochIterator<'a> {
    dataset: &'a LabeledDataset,
    config: SamplerConfig,
    rng: ChaCha8Rng,
    remaining: usize,
}

pub fn epoch_iterator<'a>(
    dataset: &'a LabeledDataset,
    config: &SamplerConfig,
    batches_per_epoch: usize,
) -> Result<EpochIterator<'a>> {
    if batches_per_epoch == 0 {
        return Err(Error::config("batches_per_epoch must be at least 1"));
    }
    check_policy(dataset, config)?;
    Ok(EpochIterator {
        dataset,
        config: *config,
        rng: ChaCha8Rng::seed_from_u64(config.seed),
        remaining: batches_per_epoch,
    })
}

impl Iterator for EpochIterator<'_> {
    type Item = Vec<SubBatchIndices>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.remaining == 0 {
            return None;
        }
        self.remaining -= 1;
        Some(
            sample_minibatch(self.dataset, &self.config, &mut self.rng)
                .expect("policy checked at construction"),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dataset(labels: &[usize], num_classes: usize) -> LabeledDataset {
        let features = labels.iter().map(|&l| vec![l as f64, 0.0]).collect();
        LabeledDataset::new(features, labels.to_vec(), num_classes).unwrap()
    }

    fn config(b: usize, n: usize, seed: u64) -> SamplerConfig {
        SamplerConfig {
            b,
            n,
            seed,
            class_policy: ClassPolicy::WithReplacement,
            distinct_classes: false,
        }
    }

    #[test]
    fn dataset_rejects_bad_labels() {
        assert!(LabeledDataset::new(vec![vec![0.0]], vec![0], 2).is_err());
        assert!(LabeledDataset::new(vec![vec![0.0]], vec![3], 2).is_err());
        assert!(LabeledDataset::new(vec![], vec![], 2).is_err());
    }

    #[test]
    fn minibatch_has_n_label_pure_sub_batches() {
        let ds = dataset(&[1, 1, 1, 2, 2, 2, 3, 3, 3], 3);
        let cfg = config(4, 5, 11);
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mb = sample_minibatch(&ds, &cfg, &mut rng).unwrap();
        assert_eq!(mb.len(), 5);
        for sb in &mb {
            assert_eq!(sb.indices.len(), 4);
            assert!(sb.indices.iter().all(|&i| ds.label(i) == sb.class_id));
        }
    }

    #[test]
    fn paper_scale_batch_has_128_indices() {
        let labels: Vec<usize> = (0..250).map(|i| i % 10 + 1).collect();
        let ds = dataset(&labels, 10);
        let cfg = config(16, 8, 0);
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mb = sample_minibatch(&ds, &cfg, &mut rng).unwrap();
        let total: usize = mb.iter().map(|sb| sb.indices.len()).sum();
        assert_eq!(total, 128);
        assert_eq!(default_batches_per_epoch(250, &cfg), 2);
    }

    #[test]
    fn forced_without_replacement_pair() {
        let ds = dataset(&[1, 1], 1);
        let cfg = SamplerConfig {
            class_policy: ClassPolicy::WithoutReplacement,
            ..config(2, 1, 5)
        };
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mb = sample_minibatch(&ds, &cfg, &mut rng).unwrap();
        let mut got = mb[0].indices.clone();
        got.sort_unstable();
        assert_eq!(got, vec![0, 1]);
    }

    #[test]
    fn without_replacement_names_offending_class() {
        let ds = dataset(&[1, 1, 1, 2], 2);
        let cfg = SamplerConfig {
            class_policy: ClassPolicy::WithoutReplacement,
            ..config(2, 1, 5)
        };
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let err = sample_minibatch(&ds, &cfg, &mut rng).unwrap_err();
        assert!(err.to_string().contains("class 2"));
    }

    #[test]
    fn fixed_seed_reproduces_index_stream() {
        let ds = dataset(&[1, 1, 2, 2, 3, 3], 3);
        let cfg = config(3, 2, 42);
        let run = || -> Vec<Vec<SubBatchIndices>> {
            epoch_iterator(&ds, &cfg, 4).unwrap().collect()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn epoch_iterator_yields_exact_count_and_rejects_zero() {
        let ds = dataset(&[1, 2], 2);
        let cfg = config(2, 1, 7);
        assert_eq!(epoch_iterator(&ds, &cfg, 3).unwrap().count(), 3);
        assert!(matches!(epoch_iterator(&ds, &cfg, 0), Err(Error::Config(_))));
    }

    #[test]
    fn distinct_classes_flag() {
        let ds = dataset(&[1, 1, 2, 2, 3, 3], 3);
        let cfg = SamplerConfig {
            distinct_classes: true,
            ..config(2, 3, 13)
        };
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mb = sample_minibatch(&ds, &cfg, &mut rng).unwrap();
        let mut classes: Vec<usize> = mb.iter().map(|sb| sb.class_id).collect();
        classes.sort_unstable();
        classes.dedup();
        assert_eq!(classes.len(), 3);

        let too_many = SamplerConfig { n: 4, ..cfg };
        assert!(sample_minibatch(&ds, &too_many, &mut rng).is_err());
    }

    #[test]
    fn class_frequencies_are_uniform() {
        // Chi-squared goodness of fit on the class-slot draws; 9 degrees of
        // freedom, 0.999 quantile is 27.88.
        let labels: Vec<usize> = (0..100).map(|i| i % 10 + 1).collect();
        let ds = dataset(&labels, 10);
        let cfg = config(2, 4, 99);
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut counts = vec![0.0_f64; 11];
        let trials = 2500;
        for _ in 0..trials {
            for sb in sample_minibatch(&ds, &cfg, &mut rng).unwrap() {
                counts[sb.class_id] += 1.0;
            }
        }
        let expected = (trials * cfg.n) as f64 / 10.0;
        let chi2: f64 = counts[1..].iter().map(|c| (c - expected).powi(2) / expected).sum();
        assert!(chi2 < 27.88, "chi2 = {chi2}");
    }
}
