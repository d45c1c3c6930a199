//! Empirical estimators over latent representations and exhaustive
//! validation of the generalization bound on finite toy problems.
//!
//! The estimators mirror the measurement procedures used at training time:
//! lifetime distributions over random label-pure sub-batches, the fraction of
//! b-samples that are beta-connected, and reference-set mass curves obtained
//! by growing balls around anchor latents and counting held-out latents in
//! the ball union and its extension.

use std::collections::BTreeMap;

use rayon::prelude::*;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::persistence::{barcode, euclidean, is_beta_connected, PointCloud};
use crate::seeds;

/// A union of closed balls of common radius around anchor latents, together
/// with an extension amount (typically `beta` or `l * beta`).
#[derive(Debug, Clone)]
pub struct ReferenceSet {
    anchors: PointCloud,
    radius: f64,
    extension: f64,
}

impl ReferenceSet {
    pub fn new(anchors: PointCloud, radius: f64, extension: f64) -> Result<Self> {
        if !radius.is_finite() || radius < 0.0 {
            return Err(Error::invalid_input("reference radius must be nonnegative"));
        }
        if !extension.is_finite() || extension < 0.0 {
            return Err(Error::invalid_input("reference extension must be nonnegative"));
        }
        Ok(Self {
            anchors,
            radius,
            extension,
        })
    }

    pub fn anchors(&self) -> &PointCloud {
        &self.anchors
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn extension(&self) -> f64 {
        self.extension
    }

    pub fn min_anchor_distance(&self, z: &[f64]) -> f64 {
        self.anchors
            .points()
            .iter()
            .map(|a| euclidean(z, a))
            .fold(f64::INFINITY, f64::min)
    }

    /// Membership in the ball union (closed balls).
    pub fn contains(&self, z: &[f64]) -> bool {
        self.min_anchor_distance(z) <= self.radius
    }

    /// Membership in the extended ball union.
    pub fn contains_extended(&self, z: &[f64]) -> bool {
        self.min_anchor_distance(z) <= self.radius + self.extension
    }
}

/// Groups latent points by their 1-based class label. Only classes that
/// actually occur appear in the map.
pub fn group_latents_by_class(
    latents: &PointCloud,
    labels: &[usize],
) -> Result<BTreeMap<usize, PointCloud>> {
    if labels.len() != latents.len() {
        return Err(Error::invalid_input(format!(
            "{} labels for {} latents",
            labels.len(),
            latents.len()
        )));
    }
    let mut grouped: BTreeMap<usize, Vec<Vec<f64>>> = BTreeMap::new();
    for (z, &label) in latents.points().iter().zip(labels) {
        if label == 0 {
            return Err(Error::invalid_input("class ids are 1-based"));
        }
        grouped.entry(label).or_default().push(z.clone());
    }
    grouped
        .into_iter()
        .map(|(k, pts)| Ok((k, PointCloud::new(pts)?)))
        .collect()
}

// Draws b indices from a class of the given size: without replacement when the
// class is large enough, with replacement otherwise.
fn draw_indices<R: Rng>(class_size: usize, b: usize, rng: &mut R) -> Vec<usize> {
    if class_size >= b {
        let mut pool: Vec<usize> = (0..class_size).collect();
        use rand::seq::SliceRandom;
        let (chosen, _) = pool.partial_shuffle(rng, b);
        chosen.to_vec()
    } else {
        (0..b).map(|_| rng.random_range(0..class_size)).collect()
    }
}

fn sub_batch_cloud<R: Rng>(cloud: &PointCloud, b: usize, rng: &mut R) -> PointCloud {
    let pts = draw_indices(cloud.len(), b, rng)
        .into_iter()
        .map(|i| cloud.point(i).to_vec())
        .collect();
    PointCloud::new(pts).expect("drawn from a valid cloud")
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HistogramBin {
    pub lo: f64,
    pub hi: f64,
    pub count: u64,
}

/// Death-time statistics over random label-pure sub-batches.
#[derive(Debug, Clone)]
pub struct LifetimeStats {
    pub trials: usize,
    /// Sub-batch size; every trial contributes `b - 1` death-times.
    pub sub_batch_size: usize,
    /// Death-times per trial, each ascending.
    pub per_trial: Vec<Vec<f64>>,
    pub mean: f64,
    /// Population variance over all recorded death-times.
    pub variance: f64,
    /// Equal-width bins over `[0, max_death]`; counts sum to the total number
    /// of death-times.
    pub histogram: Vec<HistogramBin>,
}

fn validate_trial_params(b: usize, trials: usize) -> Result<()> {
    if b < 2 {
        return Err(Error::invalid_input("sub-batch size b must be at least 2"));
    }
    if trials == 0 {
        return Err(Error::invalid_input("at least one trial is required"));
    }
    Ok(())
}

/// Draws `trials` random label-pure b-subsets (class chosen uniformly among
/// the provided ones, indices without replacement when the class holds at
/// least b latents, with replacement otherwise) and aggregates their barcode
/// death-times.
pub fn lifetime_distribution(
    latents_by_class: &BTreeMap<usize, PointCloud>,
    b: usize,
    trials: usize,
    bins: usize,
    seed: u64,
) -> Result<LifetimeStats> {
    validate_trial_params(b, trials)?;
    if bins == 0 {
        return Err(Error::invalid_input("at least one histogram bin is required"));
    }
    if latents_by_class.is_empty() {
        return Err(Error::invalid_input("no classes with latents"));
    }
    let clouds: Vec<&PointCloud> = latents_by_class.values().collect();
    let per_trial: Vec<Vec<f64>> = (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(seeds::derive(seed, 3, t));
            let cloud = clouds[rng.random_range(0..clouds.len())];
            barcode(&sub_batch_cloud(cloud, b, &mut rng)).lengths()
        })
        .collect();

    let total = (trials * (b - 1)) as f64;
    let mean = per_trial.iter().flatten().sum::<f64>() / total;
    let variance = per_trial
        .iter()
        .flatten()
        .map(|d| (d - mean) * (d - mean))
        .sum::<f64>()
        / total;

    let max_death = per_trial
        .iter()
        .flatten()
        .fold(0.0_f64, |acc, &d| acc.max(d));
    let range = if max_death > 0.0 { max_death } else { 1.0 };
    let width = range / bins as f64;
    let mut counts = vec![0_u64; bins];
    for &d in per_trial.iter().flatten() {
        let idx = ((d / width) as usize).min(bins - 1);
        counts[idx] += 1;
    }
    let histogram = counts
        .into_iter()
        .enumerate()
        .map(|(i, count)| HistogramBin {
            lo: i as f64 * width,
            hi: (i + 1) as f64 * width,
            count,
        })
        .collect();

    Ok(LifetimeStats {
        trials,
        sub_batch_size: b,
        per_trial,
        mean,
        variance,
        histogram,
    })
}

/// A beta-connectivity estimate with its binomial standard error.
#[derive(Debug, Clone, Copy)]
pub struct CBetaPoint {
    /// 1-based class id; 0 denotes the pooled estimate.
    pub class_id: usize,
    pub c_beta_hat: f64,
    pub std_error: f64,
    pub trials: usize,
}

#[derive(Debug, Clone)]
pub struct CBetaEstimate {
    pub per_class: Vec<CBetaPoint>,
    pub pooled: CBetaPoint,
}

/// Estimates, per class and pooled, the probability that a random label-pure
/// b-subset of the latents is beta-connected.
pub fn estimate_c_beta(
    latents_by_class: &BTreeMap<usize, PointCloud>,
    b: usize,
    beta: f64,
    trials: usize,
    seed: u64,
) -> Result<CBetaEstimate> {
    validate_trial_params(b, trials)?;
    if !beta.is_finite() || beta <= 0.0 {
        return Err(Error::invalid_input(format!("beta must be positive, got {beta}")));
    }
    if latents_by_class.is_empty() {
        return Err(Error::invalid_input("no classes with latents"));
    }
    let mut per_class = Vec::with_capacity(latents_by_class.len());
    let mut pooled_successes = 0_u64;
    for (&class_id, cloud) in latents_by_class {
        let successes: u64 = (0..trials as u64)
            .into_par_iter()
            .map(|t| {
                let mut rng =
                    ChaCha8Rng::seed_from_u64(seeds::derive(seed, 1000 + class_id as u64, t));
                let sb = sub_batch_cloud(cloud, b, &mut rng);
                u64::from(is_beta_connected(&sb, beta).expect("beta validated"))
            })
            .sum();
        pooled_successes += successes;
        let c_hat = successes as f64 / trials as f64;
        per_class.push(CBetaPoint {
            class_id,
            c_beta_hat: c_hat,
            std_error: (c_hat * (1.0 - c_hat) / trials as f64).sqrt(),
            trials,
        });
    }
    let pooled_trials = trials * latents_by_class.len();
    let pooled_hat = pooled_successes as f64 / pooled_trials as f64;
    Ok(CBetaEstimate {
        per_class,
        pooled: CBetaPoint {
            class_id: 0,
            c_beta_hat: pooled_hat,
            std_error: (pooled_hat * (1.0 - pooled_hat) / pooled_trials as f64).sqrt(),
            trials: pooled_trials,
        },
    })
}

/// One reference-set mass measurement: fraction of test latents within `r` of
/// an anchor, and within `r + beta`.
#[derive(Debug, Clone, Copy)]
pub struct MassPoint {
    pub r: f64,
    pub p_hat: f64,
    pub q_hat: f64,
}

/// Grows balls of radius `r` (from the grid) around the anchors and counts
/// test latents inside the union and inside its beta-extension. Membership
/// uses closed balls, so `p_hat <= q_hat` at every grid point.
pub fn estimate_mass_concentration(
    anchors: &PointCloud,
    test: &PointCloud,
    r_grid: &[f64],
    beta: f64,
) -> Result<Vec<MassPoint>> {
    if anchors.dim() != test.dim() {
        return Err(Error::invalid_input(format!(
            "anchor dimension {} does not match test dimension {}",
            anchors.dim(),
            test.dim()
        )));
    }
    if r_grid.is_empty() {
        return Err(Error::invalid_input("radius grid must be nonempty"));
    }
    if r_grid.iter().any(|r| !r.is_finite() || *r < 0.0) {
        return Err(Error::invalid_input("radii must be finite and nonnegative"));
    }
    if !beta.is_finite() || beta <= 0.0 {
        return Err(Error::invalid_input(format!("beta must be positive, got {beta}")));
    }
    let nearest: Vec<f64> = test
        .points()
        .iter()
        .map(|z| {
            anchors
                .points()
                .iter()
                .map(|a| euclidean(z, a))
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    let m = test.len() as f64;
    Ok(r_grid
        .iter()
        .map(|&r| MassPoint {
            r,
            p_hat: nearest.iter().filter(|&&d| d <= r).count() as f64 / m,
            q_hat: nearest.iter().filter(|&&d| d <= r + beta).count() as f64 / m,
        })
        .collect())
}

/// Minimum Euclidean distance between two point sets.
pub fn set_margin(a: &PointCloud, b: &PointCloud) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::invalid_input(format!(
            "set dimensions differ: {} vs {}",
            a.dim(),
            b.dim()
        )));
    }
    let mut best = f64::INFINITY;
    for pa in a.points() {
        for pb in b.points() {
            best = best.min(euclidean(pa, pb));
        }
    }
    Ok(best)
}

/// A finite labeled sample space with an explicit feature table and linear
/// classifier, on which all measures are exact sums.
#[derive(Debug, Clone)]
pub struct DiscreteToyProblem {
    masses: Vec<f64>,
    labels: Vec<usize>,
    latents: Vec<Vec<f64>>,
    gamma_weight: Vec<Vec<f64>>,
    gamma_bias: Vec<f64>,
    num_classes: usize,
}

impl DiscreteToyProblem {
    pub fn new(
        masses: Vec<f64>,
        labels: Vec<usize>,
        latents: Vec<Vec<f64>>,
        gamma_weight: Vec<Vec<f64>>,
        gamma_bias: Vec<f64>,
        num_classes: usize,
    ) -> Result<Self> {
        let m = masses.len();
        if m == 0 {
            return Err(Error::invalid_input("toy problem needs at least one support point"));
        }
        if labels.len() != m || latents.len() != m {
            return Err(Error::invalid_input(
                "masses, labels and latents must have equal length",
            ));
        }
        if num_classes == 0 {
            return Err(Error::invalid_input("num_classes must be at least 1"));
        }
        if masses.iter().any(|&p| !p.is_finite() || p < 0.0) {
            return Err(Error::invalid_input("masses must be finite and nonnegative"));
        }
        let total: f64 = masses.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::invalid_input(format!("masses sum to {total}, expected 1")));
        }
        for &l in &labels {
            if l == 0 || l > num_classes {
                return Err(Error::invalid_input(format!(
                    "label {l} outside [1, {num_classes}]"
                )));
            }
        }
        let dim = latents[0].len();
        if dim == 0 || latents.iter().any(|z| z.len() != dim) {
            return Err(Error::invalid_input("latents must share a dimension >= 1"));
        }
        if latents.iter().flatten().any(|c| !c.is_finite()) {
            return Err(Error::invalid_input("latents must be finite"));
        }
        if gamma_weight.len() != num_classes
            || gamma_weight.iter().any(|row| row.len() != dim)
            || gamma_bias.len() != num_classes
        {
            return Err(Error::invalid_input(format!(
                "classifier must be {num_classes} x {dim} with {num_classes} biases"
            )));
        }
        Ok(Self {
            masses,
            labels,
            latents,
            gamma_weight,
            gamma_bias,
            num_classes,
        })
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn support_size(&self) -> usize {
        self.masses.len()
    }

    /// Argmax of the linear classifier, ties broken toward the lowest class.
    pub fn classify(&self, z: &[f64]) -> usize {
        let mut best_class = 1;
        let mut best_score = f64::NEG_INFINITY;
        for k in 0..self.num_classes {
            let score: f64 = self.gamma_weight[k]
                .iter()
                .zip(z)
                .map(|(w, x)| w * x)
                .sum::<f64>()
                + self.gamma_bias[k];
            if score > best_score {
                best_score = score;
                best_class = k + 1;
            }
        }
        best_class
    }
}

/// Exact quantities and bound checks for one toy problem.
#[derive(Debug, Clone)]
pub struct Lemma1Report {
    /// `eps_per_class[k - 1] = 1 - Q_k(D_k)`.
    pub eps_per_class: Vec<f64>,
    /// Exact probability of misclassification under the toy measure.
    pub generalization_error: f64,
    /// Error under the pessimistic indicator that also counts every latent
    /// shared by differently labeled points as wrong.
    pub pessimistic_error: f64,
    /// The uniform epsilon the caller asked to check.
    pub epsilon: f64,
    /// Whether `1 - Q_k(D_k) <= epsilon` holds for every class.
    pub uniform_hypothesis_holds: bool,
    /// `K (K - 1) epsilon`.
    pub uniform_bound: f64,
    /// Vacuously true when the hypothesis fails.
    pub uniform_holds: bool,
    /// `sum_k sum_{i != k} eps_i = (K - 1) sum_i eps_i`.
    pub general_bound: f64,
    pub general_holds: bool,
    /// Both checks together.
    pub holds: bool,
}

// Float-rounding headroom for the otherwise exact enumeration sums.
const LEMMA_TOL: f64 = 1e-12;

/// Computes the push-forward measure, its class restrictions, the decision
/// regions and the exact generalization error of a finite toy problem, and
/// checks both the uniform-epsilon bound and the per-class-epsilon bound.
pub fn validate_lemma1(toy: &DiscreteToyProblem, epsilon: f64) -> Result<Lemma1Report> {
    if !epsilon.is_finite() || epsilon < 0.0 {
        return Err(Error::invalid_input("epsilon must be finite and nonnegative"));
    }
    let m = toy.support_size();
    let k_classes = toy.num_classes;

    // Latents compared by exact bit pattern: the feature map is an explicit
    // table, so collapsed points are exactly equal.
    let keys: Vec<Vec<u64>> = toy
        .latents
        .iter()
        .map(|z| z.iter().map(|c| c.to_bits()).collect())
        .collect();
    let preds: Vec<usize> = toy.latents.iter().map(|z| toy.classify(z)).collect();

    // Labels observed at each distinct latent.
    let mut labels_at: BTreeMap<&[u64], Vec<usize>> = BTreeMap::new();
    for i in 0..m {
        let entry = labels_at.entry(&keys[i]).or_default();
        if !entry.contains(&toy.labels[i]) {
            entry.push(toy.labels[i]);
        }
    }

    // C_k as a set of latent keys.
    let mut class_latents: Vec<std::collections::BTreeSet<&[u64]>> =
        vec![Default::default(); k_classes];
    for i in 0..m {
        class_latents[toy.labels[i] - 1].insert(&keys[i]);
    }

    let mut eps_per_class = Vec::with_capacity(k_classes);
    for k in 1..=k_classes {
        let in_ck = |i: usize| class_latents[k - 1].contains(keys[i].as_slice());
        let q_ck: f64 = (0..m).filter(|&i| in_ck(i)).map(|i| toy.masses[i]).sum();
        if q_ck <= 0.0 {
            return Err(Error::invalid_input(format!(
                "class {k} carries no probability mass; its restricted measure is undefined"
            )));
        }
        let q_dk_ck: f64 = (0..m)
            .filter(|&i| in_ck(i) && preds[i] == k)
            .map(|i| toy.masses[i])
            .sum();
        eps_per_class.push(1.0 - q_dk_ck / q_ck);
    }

    let generalization_error: f64 = (0..m)
        .filter(|&i| preds[i] != toy.labels[i])
        .map(|i| toy.masses[i])
        .sum();

    let pessimistic_error: f64 = (0..m)
        .filter(|&i| {
            let labels = &labels_at[keys[i].as_slice()];
            labels.len() != 1 || preds[i] != labels[0]
        })
        .map(|i| toy.masses[i])
        .sum();

    let uniform_hypothesis_holds = eps_per_class.iter().all(|&e| e <= epsilon + LEMMA_TOL);
    let uniform_bound = (k_classes * (k_classes - 1)) as f64 * epsilon;
    let uniform_holds =
        !uniform_hypothesis_holds || generalization_error <= uniform_bound + LEMMA_TOL;

    let general_bound = (k_classes as f64 - 1.0) * eps_per_class.iter().sum::<f64>();
    let general_holds = generalization_error <= general_bound + LEMMA_TOL;

    Ok(Lemma1Report {
        eps_per_class,
        generalization_error,
        pessimistic_error,
        epsilon,
        uniform_hypothesis_holds,
        uniform_bound,
        uniform_holds,
        general_bound,
        general_holds,
        holds: uniform_holds && general_holds,
    })
}

/// Checks the decision-region containment of a reference set on a finite
/// candidate set: every candidate inside the extended ball union must be
/// classified as class `k`.
pub fn subset_condition_holds<F>(
    reference: &ReferenceSet,
    candidates: &PointCloud,
    classify: F,
    k: usize,
) -> bool
where
    F: Fn(&[f64]) -> usize,
{
    candidates
        .points()
        .iter()
        .all(|z| !reference.contains_extended(z) || classify(z) == k)
}
