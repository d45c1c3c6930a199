//! Desk-scale supervised training of a feature extractor plus linear
//! classifier with cross-entropy, an optional connectivity penalty on the
//! latents, SGD with momentum, per-group weight decay and cosine learning
//! rate annealing. Deterministic given the config seeds.

mod checkpoint;
mod config;
mod mlp;

pub use checkpoint::{load_model, save_model, CHECKPOINT_VERSION};
pub use config::{DataConfig, DataSource, ExperimentConfig};
pub use mlp::{argmax_class, ModelConfig, ModelState};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::regularizer::{self, LossVariant, MiniBatchLatents, SubBatchLatents};
use crate::sampler::{
    default_batches_per_epoch, sample_minibatch, LabeledDataset, SamplerConfig, SubBatchIndices,
};

/// Optimization settings for one training run.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub lr0: f64,
    #[serde(default = "default_momentum")]
    pub momentum: f64,
    pub epochs: usize,
    #[serde(default = "default_weight_decay")]
    pub weight_decay_phi: f64,
    #[serde(default = "default_weight_decay")]
    pub weight_decay_gamma: f64,
    /// Weight of the connectivity penalty; 0 disables it entirely.
    pub lambda_topo: f64,
    pub beta: f64,
    pub seed: u64,
    #[serde(default = "default_loss_variant")]
    pub loss_variant: LossVariant,
    /// Mini-batches per epoch; defaults to `ceil(m / (n * b))`.
    #[serde(default)]
    pub batches_per_epoch: Option<usize>,
}

fn default_momentum() -> f64 {
    0.9
}

fn default_weight_decay() -> f64 {
    1e-3
}

fn default_loss_variant() -> LossVariant {
    LossVariant::TwoSided
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.lr0.is_finite() || self.lr0 <= 0.0 {
            return Err(Error::config("train.lr0: must be positive"));
        }
        if !self.momentum.is_finite() || !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::config("train.momentum: must be in [0, 1)"));
        }
        if self.epochs == 0 {
            return Err(Error::config("train.epochs: must be at least 1"));
        }
        if !self.weight_decay_phi.is_finite() || self.weight_decay_phi < 0.0 {
            return Err(Error::config("train.weight_decay_phi: must be nonnegative"));
        }
        if !self.weight_decay_gamma.is_finite() || self.weight_decay_gamma < 0.0 {
            return Err(Error::config("train.weight_decay_gamma: must be nonnegative"));
        }
        if !self.lambda_topo.is_finite() || self.lambda_topo < 0.0 {
            return Err(Error::config("train.lambda_topo: must be nonnegative"));
        }
        if !self.beta.is_finite() || self.beta <= 0.0 {
            return Err(Error::config("train.beta: must be positive"));
        }
        if self.batches_per_epoch == Some(0) {
            return Err(Error::config("train.batches_per_epoch: must be at least 1"));
        }
        Ok(())
    }
}

/// Cosine learning rate annealing without restarts:
/// `lr0 * (1 + cos(pi t / T)) / 2`.
pub fn cosine_lr(lr0: f64, t: usize, total_steps: usize) -> Result<f64> {
    if total_steps == 0 {
        return Err(Error::invalid_input("total step count must be at least 1"));
    }
    if t > total_steps {
        return Err(Error::invalid_input(format!(
            "step {t} exceeds total step count {total_steps}"
        )));
    }
    Ok(lr0 * 0.5 * (1.0 + (std::f64::consts::PI * t as f64 / total_steps as f64).cos()))
}

/// Loss values of a single optimization step.
#[derive(Debug, Clone, Copy)]
pub struct StepMetrics {
    /// Mean cross-entropy over the mini-batch.
    pub ce_loss: f64,
    /// Raw (unweighted) connectivity penalty.
    pub topo_loss: f64,
    /// `ce_loss + lambda_topo * topo_loss`.
    pub total: f64,
    /// Mean death-time over the mini-batch's sub-batches.
    pub mean_death: f64,
    pub degenerate_edges: usize,
}

fn log_sum_exp(scores: &[f64]) -> f64 {
    let max = scores.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    max + scores.iter().map(|s| (s - max).exp()).sum::<f64>().ln()
}

/// Runs forward, loss, backward and one SGD update on a sampled mini-batch.
///
/// The total loss is the mean cross-entropy plus `lambda_topo` times the raw
/// connectivity penalty over the latents grouped by sub-batch. Latent
/// gradients from both terms are summed before backpropagating through the
/// extractor. With `lambda_topo == 0` the penalty path is skipped entirely
/// and the update equals a plain cross-entropy step.
pub fn training_step(
    model: &mut ModelState,
    dataset: &LabeledDataset,
    minibatch: &[SubBatchIndices],
    cfg: &TrainConfig,
    lr: f64,
) -> Result<StepMetrics> {
    cfg.validate()?;
    if minibatch.is_empty() {
        return Err(Error::invalid_input("mini-batch must contain at least one sub-batch"));
    }
    let b = minibatch[0].indices.len();
    if b < 2 || minibatch.iter().any(|sb| sb.indices.len() != b) {
        return Err(Error::invalid_input(
            "sub-batches must share a common size of at least 2",
        ));
    }
    let k_classes = model.config().num_classes;
    if dataset.feature_dim() != model.config().input_dim {
        return Err(Error::invalid_input(format!(
            "dataset dimension {} does not match model input {}",
            dataset.feature_dim(),
            model.config().input_dim
        )));
    }

    // Forward in sub-batch order.
    let total_samples = minibatch.len() * b;
    let mut traces = Vec::with_capacity(total_samples);
    let mut labels = Vec::with_capacity(total_samples);
    for sb in minibatch {
        if sb.class_id > k_classes {
            return Err(Error::invalid_input(format!(
                "class {} exceeds the model's {k_classes} classes",
                sb.class_id
            )));
        }
        for &i in &sb.indices {
            traces.push(model.forward_trace(dataset.feature(i))?);
            labels.push(dataset.label(i));
        }
    }

    // Mean cross-entropy and its gradient at the scores.
    let n = total_samples as f64;
    let mut ce_loss = 0.0;
    let mut dlogits = Vec::with_capacity(total_samples);
    for (trace, &label) in traces.iter().zip(&labels) {
        let lse = log_sum_exp(&trace.logits);
        ce_loss += (lse - trace.logits[label - 1]) / n;
        let mut grad: Vec<f64> = trace.logits.iter().map(|s| (s - lse).exp() / n).collect();
        grad[label - 1] -= 1.0 / n;
        dlogits.push(grad);
    }

    // Connectivity penalty on the latents, grouped by sub-batch.
    let latent_dim = model.config().latent_dim;
    let sub_batches: Vec<SubBatchLatents> = minibatch
        .iter()
        .enumerate()
        .map(|(s, sb)| {
            let pts: Vec<Vec<f64>> = (0..b).map(|j| traces[s * b + j].latent.clone()).collect();
            SubBatchLatents::new(crate::persistence::PointCloud::new(pts)?, sb.class_id)
        })
        .collect::<Result<_>>()?;
    let batch_latents = MiniBatchLatents::new(sub_batches)?;
    let (topo_loss, mut dlatent_extra, degenerate_edges) = if cfg.lambda_topo > 0.0 {
        let value = regularizer::loss(&batch_latents, cfg.beta, cfg.loss_variant)?;
        let grad = regularizer::loss_backward(&batch_latents, cfg.beta, cfg.loss_variant)?;
        let mut flat = Vec::with_capacity(total_samples);
        for sb_grad in &grad.gradients {
            for point_grad in sb_grad {
                flat.push(point_grad.iter().map(|g| cfg.lambda_topo * g).collect::<Vec<f64>>());
            }
        }
        (value, flat, grad.degenerate_edges)
    } else {
        (
            regularizer::loss(&batch_latents, cfg.beta, cfg.loss_variant)?,
            vec![vec![0.0; latent_dim]; total_samples],
            0,
        )
    };

    let deaths = regularizer::death_times(&batch_latents)?;
    let mean_death = deaths.iter().sum::<f64>() / deaths.len() as f64;

    let total = ce_loss + cfg.lambda_topo * topo_loss;
    if !total.is_finite() {
        return Err(Error::numerical(format!(
            "non-finite loss: ce = {ce_loss}, topo = {topo_loss}"
        )));
    }

    // Backward and update.
    let (mut phi_grads, mut gamma_grads) = model.zero_grads();
    for (idx, trace) in traces.iter().enumerate() {
        model.backward_trace(
            trace,
            &dlogits[idx],
            &std::mem::take(&mut dlatent_extra[idx]),
            &mut phi_grads,
            &mut gamma_grads,
        );
    }
    model.apply_sgd(
        &phi_grads,
        &gamma_grads,
        lr,
        cfg.momentum,
        cfg.weight_decay_phi,
        cfg.weight_decay_gamma,
    );

    Ok(StepMetrics {
        ce_loss,
        topo_loss,
        total,
        mean_death,
        degenerate_edges,
    })
}

/// Fraction of samples whose predicted class differs from the label.
pub fn evaluate(model: &ModelState, dataset: &LabeledDataset) -> Result<f64> {
    if dataset.feature_dim() != model.config().input_dim {
        return Err(Error::invalid_input(format!(
            "dataset dimension {} does not match model input {}",
            dataset.feature_dim(),
            model.config().input_dim
        )));
    }
    let mut wrong = 0usize;
    for i in 0..dataset.len() {
        if model.predict(dataset.feature(i))? != dataset.label(i) {
            wrong += 1;
        }
    }
    Ok(wrong as f64 / dataset.len() as f64)
}

/// Where the class centers of a synthetic blob dataset come from.
#[derive(Debug, Clone)]
pub enum CentersSpec {
    /// One explicit center per class.
    Explicit(Vec<Vec<f64>>),
    /// K centers equally spaced on a circle of the given radius in the first
    /// two coordinates (requires dim >= 2).
    Circle { radius: f64 },
}

/// Gaussian class clusters with deterministic seeding; samples are emitted in
/// class order, `per_class` each.
pub fn make_blobs(
    num_classes: usize,
    per_class: usize,
    dim: usize,
    centers: &CentersSpec,
    noise_sigma: f64,
    seed: u64,
) -> Result<LabeledDataset> {
    if num_classes == 0 || per_class == 0 || dim == 0 {
        return Err(Error::invalid_input(
            "num_classes, per_class and dim must all be at least 1",
        ));
    }
    if !noise_sigma.is_finite() || noise_sigma < 0.0 {
        return Err(Error::invalid_input("noise sigma must be nonnegative"));
    }
    let centers: Vec<Vec<f64>> = match centers {
        CentersSpec::Explicit(cs) => {
            if cs.len() != num_classes {
                return Err(Error::invalid_input(format!(
                    "{} centers for {num_classes} classes",
                    cs.len()
                )));
            }
            if cs.iter().any(|c| c.len() != dim) {
                return Err(Error::invalid_input("center dimensions must match dim"));
            }
            if cs.iter().flatten().any(|v| !v.is_finite()) {
                return Err(Error::invalid_input("centers must be finite"));
            }
            cs.clone()
        }
        CentersSpec::Circle { radius } => {
            if dim < 2 {
                return Err(Error::invalid_input("circle centers require dim >= 2"));
            }
            if !radius.is_finite() || *radius <= 0.0 {
                return Err(Error::invalid_input("circle radius must be positive"));
            }
            (0..num_classes)
                .map(|k| {
                    let angle = std::f64::consts::TAU * k as f64 / num_classes as f64;
                    let mut c = vec![0.0; dim];
                    c[0] = radius * angle.cos();
                    c[1] = radius * angle.sin();
                    c
                })
                .collect()
        }
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut features = Vec::with_capacity(num_classes * per_class);
    let mut labels = Vec::with_capacity(num_classes * per_class);
    for (k, center) in centers.iter().enumerate() {
        for _ in 0..per_class {
            let point = center
                .iter()
                .map(|c| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    c + noise_sigma * z
                })
                .collect();
            features.push(point);
            labels.push(k + 1);
        }
    }
    LabeledDataset::new(features, labels, num_classes)
}

/// Stratified split into `train_count` training samples and the rest.
///
/// Per-class training quotas are proportional to class sizes (largest
/// remainder rounding); indices within each class are shuffled with a seed
/// derived from `seed`.
pub fn split_train_test(
    dataset: &LabeledDataset,
    train_count: usize,
    seed: u64,
) -> Result<(LabeledDataset, LabeledDataset)> {
    let m = dataset.len();
    if train_count == 0 || train_count >= m {
        return Err(Error::invalid_input(format!(
            "train_count must be in [1, {}], got {train_count}",
            m - 1
        )));
    }
    let counts = dataset.class_counts();
    let classes: Vec<usize> = dataset.present_classes();
    let mut quota: Vec<usize> = Vec::with_capacity(classes.len());
    let mut fractional: Vec<(f64, usize)> = Vec::with_capacity(classes.len());
    for (slot, &k) in classes.iter().enumerate() {
        let exact = train_count as f64 * counts[k] as f64 / m as f64;
        quota.push(exact.floor() as usize);
        fractional.push((exact - exact.floor(), slot));
    }
    let assigned: usize = quota.iter().sum();
    // Distribute the remainder to the largest fractional parts.
    fractional.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
    for i in 0..(train_count - assigned) {
        quota[fractional[i % fractional.len()].1] += 1;
    }

    let mut train_idx = Vec::with_capacity(train_count);
    let mut test_idx = Vec::with_capacity(m - train_count);
    for (slot, &k) in classes.iter().enumerate() {
        let mut idx = dataset.indices_of_class(k);
        let mut rng = ChaCha8Rng::seed_from_u64(crate::seeds::derive(seed, 7, k as u64));
        use rand::seq::SliceRandom;
        idx.shuffle(&mut rng);
        let take = quota[slot].min(idx.len());
        train_idx.extend_from_slice(&idx[..take]);
        test_idx.extend_from_slice(&idx[take..]);
    }
    Ok((dataset.subset(&train_idx)?, dataset.subset(&test_idx)?))
}

/// Per-epoch averages and held-out error.
#[derive(Debug, Clone, Copy)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub ce_loss: f64,
    pub topo_loss: f64,
    pub train_err: f64,
    /// NaN when no test set was provided.
    pub test_err: f64,
    pub mean_death: f64,
    /// Learning rate of the epoch's first step.
    pub lr: f64,
}

#[derive(Debug)]
pub struct TrainOutput {
    pub model: ModelState,
    pub metrics: Vec<EpochMetrics>,
}

/// Full training loop: seeded init, one continuous sampling stream, cosine
/// annealing over all steps, per-epoch metrics.
pub fn train(
    model_cfg: &ModelConfig,
    train_cfg: &TrainConfig,
    sampler_cfg: &SamplerConfig,
    train_data: &LabeledDataset,
    test_data: Option<&LabeledDataset>,
) -> Result<TrainOutput> {
    model_cfg.validate()?;
    train_cfg.validate()?;
    sampler_cfg.validate()?;
    let mut model = ModelState::init(model_cfg, train_cfg.seed)?;
    let batches_per_epoch = train_cfg
        .batches_per_epoch
        .unwrap_or_else(|| default_batches_per_epoch(train_data.len(), sampler_cfg));
    let total_steps = train_cfg.epochs * batches_per_epoch;
    let mut sampling_rng = ChaCha8Rng::seed_from_u64(sampler_cfg.seed);
    let mut metrics = Vec::with_capacity(train_cfg.epochs);
    let mut step = 0usize;
    for epoch in 0..train_cfg.epochs {
        let mut ce_sum = 0.0;
        let mut topo_sum = 0.0;
        let mut death_sum = 0.0;
        let mut epoch_lr = 0.0;
        for i in 0..batches_per_epoch {
            let lr = cosine_lr(train_cfg.lr0, step, total_steps)?;
            if i == 0 {
                epoch_lr = lr;
            }
            let minibatch = sample_minibatch(train_data, sampler_cfg, &mut sampling_rng)?;
            let sm = training_step(&mut model, train_data, &minibatch, train_cfg, lr)?;
            ce_sum += sm.ce_loss;
            topo_sum += sm.topo_loss;
            death_sum += sm.mean_death;
            step += 1;
        }
        let train_err = evaluate(&model, train_data)?;
        let test_err = match test_data {
            Some(ds) => evaluate(&model, ds)?,
            None => f64::NAN,
        };
        metrics.push(EpochMetrics {
            epoch,
            ce_loss: ce_sum / batches_per_epoch as f64,
            topo_loss: topo_sum / batches_per_epoch as f64,
            train_err,
            test_err,
            mean_death: death_sum / batches_per_epoch as f64,
            lr: epoch_lr,
        });
    }
    Ok(TrainOutput { model, metrics })
}

/// Suggests a penalty weight so that `lambda * topo` starts within about an
/// order of magnitude of the initial cross-entropy: `lambda = ce / topo`
/// measured on one sampled mini-batch of the untrained model.
pub fn suggest_lambda(
    model_cfg: &ModelConfig,
    train_cfg: &TrainConfig,
    sampler_cfg: &SamplerConfig,
    dataset: &LabeledDataset,
) -> Result<f64> {
    let model = ModelState::init(model_cfg, train_cfg.seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(sampler_cfg.seed);
    let minibatch = sample_minibatch(dataset, sampler_cfg, &mut rng)?;
    let mut inputs = Vec::new();
    let mut sub_batches = Vec::new();
    for sb in &minibatch {
        for &i in &sb.indices {
            inputs.push(dataset.feature(i).to_vec());
        }
    }
    let (latents, logits) = model.forward(&inputs)?;
    let b = minibatch[0].indices.len();
    for (s, sb) in minibatch.iter().enumerate() {
        let pts: Vec<Vec<f64>> = (0..b).map(|j| latents.point(s * b + j).to_vec()).collect();
        sub_batches.push(SubBatchLatents::new(
            crate::persistence::PointCloud::new(pts)?,
            sb.class_id,
        )?);
    }
    let topo = regularizer::loss(
        &MiniBatchLatents::new(sub_batches)?,
        train_cfg.beta,
        train_cfg.loss_variant,
    )?;
    let mut ce = 0.0;
    let mut label_iter = minibatch.iter().flat_map(|sb| sb.indices.iter());
    for row in &logits {
        let label = dataset.label(*label_iter.next().expect("same length"));
        ce += (log_sum_exp(row) - row[label - 1]) / logits.len() as f64;
    }
    if topo <= 0.0 {
        return Ok(1.0);
    }
    Ok(ce / topo)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampler::ClassPolicy;

    fn blob_dataset(seed: u64) -> LabeledDataset {
        make_blobs(2, 20, 2, &CentersSpec::Circle { radius: 3.0 }, 0.4, seed).unwrap()
    }

    fn sampler(b: usize, n: usize, seed: u64) -> SamplerConfig {
        SamplerConfig {
            b,
            n,
            seed,
            class_policy: ClassPolicy::WithReplacement,
            distinct_classes: false,
        }
    }

    fn train_cfg(lambda: f64, seed: u64) -> TrainConfig {
        TrainConfig {
            lr0: 0.05,
            momentum: 0.9,
            epochs: 3,
            weight_decay_phi: 1e-3,
            weight_decay_gamma: 1e-3,
            lambda_topo: lambda,
            beta: 1.0,
            seed,
            loss_variant: LossVariant::TwoSided,
            batches_per_epoch: None,
        }
    }

    fn model_cfg() -> ModelConfig {
        ModelConfig {
            input_dim: 2,
            hidden_layers: vec![8],
            latent_dim: 4,
            num_classes: 2,
            leaky_relu_slope: 0.1,
        }
    }

    #[test]
    fn cosine_lr_endpoints() {
        assert_eq!(cosine_lr(0.4, 0, 10).unwrap(), 0.4);
        assert!(cosine_lr(0.4, 10, 10).unwrap().abs() < 1e-16);
        assert!((cosine_lr(0.4, 5, 10).unwrap() - 0.2).abs() < 1e-15);
        assert!(cosine_lr(0.4, 11, 10).is_err());
    }

    #[test]
    fn make_blobs_shapes_and_determinism() {
        let ds = blob_dataset(5);
        assert_eq!(ds.len(), 40);
        assert_eq!(ds.class_counts()[1..], [20, 20]);
        let again = blob_dataset(5);
        assert_eq!(ds.features(), again.features());
        let zero =
            make_blobs(3, 4, 2, &CentersSpec::Circle { radius: 2.0 }, 0.0, 1).unwrap();
        // Sigma 0: every sample sits exactly on its class center.
        for k in 1..=3 {
            let idx = zero.indices_of_class(k);
            assert!(idx.windows(2).all(|w| zero.feature(w[0]) == zero.feature(w[1])));
        }
    }

    #[test]
    fn make_blobs_rejects_negative_sigma() {
        assert!(make_blobs(2, 3, 2, &CentersSpec::Circle { radius: 1.0 }, -0.1, 0).is_err());
    }

    #[test]
    fn split_is_stratified_and_seeded() {
        let ds = blob_dataset(9);
        let (train, test) = split_train_test(&ds, 10, 3).unwrap();
        assert_eq!(train.len(), 10);
        assert_eq!(test.len(), 30);
        assert_eq!(train.class_counts()[1..], [5, 5]);
        let (train2, _) = split_train_test(&ds, 10, 3).unwrap();
        assert_eq!(train.features(), train2.features());
    }

    #[test]
    fn training_is_deterministic() {
        let ds = blob_dataset(1);
        let run = || {
            train(&model_cfg(), &train_cfg(0.1, 11), &sampler(3, 2, 17), &ds, None).unwrap()
        };
        let a = run();
        let b = run();
        assert_eq!(a.model.gamma.weight, b.model.gamma.weight);
        assert_eq!(a.metrics.len(), b.metrics.len());
        for (x, y) in a.metrics.iter().zip(&b.metrics) {
            assert_eq!(x.ce_loss, y.ce_loss);
            assert_eq!(x.topo_loss, y.topo_loss);
        }
    }

    #[test]
    fn zero_lambda_matches_reference_cross_entropy_step() {
        // With the penalty disabled the parameters after one step must be
        // bitwise equal to a run that never touches the regularizer.
        let ds = blob_dataset(2);
        let scfg = sampler(3, 2, 7);
        let cfg = train_cfg(0.0, 3);

        let mut model = ModelState::init(&model_cfg(), cfg.seed).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(scfg.seed);
        let minibatch = sample_minibatch(&ds, &scfg, &mut rng).unwrap();
        training_step(&mut model, &ds, &minibatch, &cfg, 0.05).unwrap();

        // Reference: plain cross-entropy step, no regularizer code path.
        let mut reference = ModelState::init(&model_cfg(), cfg.seed).unwrap();
        let (mut phi_grads, mut gamma_grads) = reference.zero_grads();
        let n = (minibatch.len() * 3) as f64;
        let latent_dim = reference.config().latent_dim;
        for sb in &minibatch {
            for &i in &sb.indices {
                let trace = reference.forward_trace(ds.feature(i)).unwrap();
                let lse = log_sum_exp(&trace.logits);
                let mut grad: Vec<f64> =
                    trace.logits.iter().map(|s| (s - lse).exp() / n).collect();
                grad[ds.label(i) - 1] -= 1.0 / n;
                reference.backward_trace(
                    &trace,
                    &grad,
                    &vec![0.0; latent_dim],
                    &mut phi_grads,
                    &mut gamma_grads,
                );
            }
        }
        reference.apply_sgd(&phi_grads, &gamma_grads, 0.05, cfg.momentum, 1e-3, 1e-3);

        assert_eq!(model.gamma.weight, reference.gamma.weight);
        assert_eq!(model.phi[0].weight, reference.phi[0].weight);
    }

    #[test]
    fn descent_on_separable_blobs() {
        let ds = make_blobs(2, 10, 2, &CentersSpec::Circle { radius: 5.0 }, 0.2, 4).unwrap();
        let scfg = sampler(3, 2, 5);
        let cfg = TrainConfig { lr0: 0.01, ..train_cfg(0.0, 6) };
        let mut model = ModelState::init(&model_cfg(), cfg.seed).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(scfg.seed);
        let minibatch = sample_minibatch(&ds, &scfg, &mut rng).unwrap();
        let before = training_step(&mut model, &ds, &minibatch, &cfg, 0.01).unwrap();
        // Re-measure the cross-entropy of the same mini-batch after the step.
        let mut inputs = Vec::new();
        let mut labels = Vec::new();
        for sb in &minibatch {
            for &i in &sb.indices {
                inputs.push(ds.feature(i).to_vec());
                labels.push(ds.label(i));
            }
        }
        let (_, logits) = model.forward(&inputs).unwrap();
        let after: f64 = logits
            .iter()
            .zip(&labels)
            .map(|(row, &y)| (log_sum_exp(row) - row[y - 1]) / logits.len() as f64)
            .sum();
        assert!(after < before.ce_loss, "{after} vs {before:?}");
    }

    #[test]
    fn training_step_rejects_tiny_sub_batches() {
        let ds = blob_dataset(3);
        let cfg = train_cfg(0.1, 1);
        let mut model = ModelState::init(&model_cfg(), 1).unwrap();
        let minibatch = vec![SubBatchIndices { class_id: 1, indices: vec![0] }];
        assert!(training_step(&mut model, &ds, &minibatch, &cfg, 0.1).is_err());
    }

    #[test]
    fn evaluate_constant_predictor_on_random_labels() {
        // A zeroed model predicts class 1 everywhere; error ~ (K-1)/K.
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let m = 1000;
        let k = 4;
        let features: Vec<Vec<f64>> = (0..m).map(|_| vec![rng.random::<f64>(), 0.0]).collect();
        let labels: Vec<usize> = (0..m).map(|_| rng.random_range(1..=k)).collect();
        let ds = LabeledDataset::new(features, labels, k).unwrap();
        let mut model = ModelState::init(
            &ModelConfig {
                input_dim: 2,
                hidden_layers: vec![],
                latent_dim: 2,
                num_classes: k,
                leaky_relu_slope: 0.1,
            },
            0,
        )
        .unwrap();
        model.phi[0].weight.iter_mut().for_each(|w| *w = 0.0);
        model.phi[0].bias.iter_mut().for_each(|b| *b = 0.0);
        model.gamma.weight.iter_mut().for_each(|w| *w = 0.0);
        model.gamma.bias.iter_mut().for_each(|b| *b = 0.0);
        let err = evaluate(&model, &ds).unwrap();
        assert!((err - 0.75).abs() < 0.05, "{err}");
    }

    #[test]
    fn perfect_predictor_has_zero_error() {
        // gamma picks the class whose center the identity latents are near.
        let ds = make_blobs(
            2,
            10,
            2,
            &CentersSpec::Explicit(vec![vec![-3.0, 0.0], vec![3.0, 0.0]]),
            0.1,
            8,
        )
        .unwrap();
        let mut model = ModelState::init(
            &ModelConfig {
                input_dim: 2,
                hidden_layers: vec![],
                latent_dim: 2,
                num_classes: 2,
                leaky_relu_slope: 0.1,
            },
            0,
        )
        .unwrap();
        model.phi[0].weight = vec![1.0, 0.0, 0.0, 1.0];
        model.phi[0].bias = vec![0.0, 0.0];
        model.gamma.weight = vec![-1.0, 0.0, 1.0, 0.0];
        model.gamma.bias = vec![0.0, 0.0];
        assert_eq!(evaluate(&model, &ds).unwrap(), 0.0);
    }
}
