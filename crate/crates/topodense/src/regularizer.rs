//! Differentiable connectivity penalty over class-pure sub-batches.
//!
//! For a mini-batch of n sub-batches the penalty is the sum of `|d - beta|`
//! over every death-time `d` of every sub-batch barcode. Gradients flow
//! through the death-times into the latent coordinates; the combinatorial
//! edge selection is treated as locally constant, which is valid away from
//! the measure-zero set of distance ties.

use crate::error::{Error, Result};
use crate::persistence::{barcode, barcode_backward, PointCloud};

/// Latent representations of b same-class samples.
#[derive(Debug, Clone)]
pub struct SubBatchLatents {
    latents: PointCloud,
    class_id: usize,
}

impl SubBatchLatents {
    pub fn new(latents: PointCloud, class_id: usize) -> Result<Self> {
        if class_id == 0 {
            return Err(Error::invalid_input("class ids are 1-based"));
        }
        Ok(Self { latents, class_id })
    }

    pub fn latents(&self) -> &PointCloud {
        &self.latents
    }

    pub fn class_id(&self) -> usize {
        self.class_id
    }
}

/// An ordered collection of equally sized sub-batches (n * b latents total).
#[derive(Debug, Clone)]
pub struct MiniBatchLatents {
    sub_batches: Vec<SubBatchLatents>,
}

impl MiniBatchLatents {
    pub fn new(sub_batches: Vec<SubBatchLatents>) -> Result<Self> {
        if sub_batches.is_empty() {
            return Err(Error::invalid_input("mini-batch must contain at least one sub-batch"));
        }
        let b = sub_batches[0].latents.len();
        let dim = sub_batches[0].latents.dim();
        for (idx, sb) in sub_batches.iter().enumerate() {
            if sb.latents.len() != b {
                return Err(Error::invalid_input(format!(
                    "sub-batch {idx} has {} points, expected {b}",
                    sb.latents.len()
                )));
            }
            if sb.latents.dim() != dim {
                return Err(Error::invalid_input(format!(
                    "sub-batch {idx} has dimension {}, expected {dim}",
                    sb.latents.dim()
                )));
            }
        }
        Ok(Self { sub_batches })
    }

    pub fn sub_batches(&self) -> &[SubBatchLatents] {
        &self.sub_batches
    }

    pub fn len(&self) -> usize {
        self.sub_batches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sub_batches.is_empty()
    }

    /// Points per sub-batch.
    pub fn sub_batch_size(&self) -> usize {
        self.sub_batches[0].latents.len()
    }
}

/// Which penalty to apply to each death-time.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossVariant {
    /// `|d - beta|`: penalizes both collapsed and stretched lifetimes.
    TwoSided,
    /// `max(d - beta, 0)`: penalizes only lifetimes exceeding beta.
    OneSided,
}

fn validate(batch: &MiniBatchLatents, beta: f64) -> Result<()> {
    if !beta.is_finite() || beta <= 0.0 {
        return Err(Error::invalid_input(format!("beta must be positive, got {beta}")));
    }
    if batch.sub_batch_size() < 2 {
        return Err(Error::invalid_input(
            "sub-batches need at least 2 points to have death-times",
        ));
    }
    Ok(())
}

fn penalty(variant: LossVariant, d: f64, beta: f64) -> f64 {
    match variant {
        LossVariant::TwoSided => (d - beta).abs(),
        LossVariant::OneSided => (d - beta).max(0.0),
    }
}

// Subgradient of the penalty in d; 0 at the kink d = beta so the target is
// stationary.
fn upstream(variant: LossVariant, d: f64, beta: f64) -> f64 {
    match variant {
        LossVariant::TwoSided => {
            if d > beta {
                1.0
            } else if d < beta {
                -1.0
            } else {
                0.0
            }
        }
        LossVariant::OneSided => {
            if d > beta {
                1.0
            } else {
                0.0
            }
        }
    }
}

pub fn loss(batch: &MiniBatchLatents, beta: f64, variant: LossVariant) -> Result<f64> {
    validate(batch, beta)?;
    let mut total = 0.0;
    for sb in batch.sub_batches() {
        for edge in barcode(sb.latents()).deaths() {
            total += penalty(variant, edge.length, beta);
        }
    }
    Ok(total)
}

/// The connectivity penalty `sum_i sum_{d in barcode(B_i)} |d - beta|`.
pub fn connectivity_loss(batch: &MiniBatchLatents, beta: f64) -> Result<f64> {
    loss(batch, beta, LossVariant::TwoSided)
}

/// The one-sided variant `sum_i sum_d max(d - beta, 0)`; empirically less
/// effective but kept for ablation.
pub fn one_sided_connectivity_loss(batch: &MiniBatchLatents, beta: f64) -> Result<f64> {
    loss(batch, beta, LossVariant::OneSided)
}

/// Per-latent gradients of the connectivity penalty.
#[derive(Debug, Clone)]
pub struct ConnectivityGradient {
    /// `gradients[s][p][k]`: coordinate k of the gradient at point p of
    /// sub-batch s.
    pub gradients: Vec<Vec<Vec<f64>>>,
    /// Zero-length edges that carried a nonzero upstream value; their
    /// contribution is the zero subgradient.
    pub degenerate_edges: usize,
}

pub fn loss_backward(
    batch: &MiniBatchLatents,
    beta: f64,
    variant: LossVariant,
) -> Result<ConnectivityGradient> {
    validate(batch, beta)?;
    let mut gradients = Vec::with_capacity(batch.len());
    let mut degenerate_edges = 0;
    for sb in batch.sub_batches() {
        let bc = barcode(sb.latents());
        let ups: Vec<f64> = bc
            .deaths()
            .iter()
            .map(|e| upstream(variant, e.length, beta))
            .collect();
        let g = barcode_backward(sb.latents(), &bc, &ups)?;
        degenerate_edges += g.degenerate_edges;
        gradients.push(g.gradients);
    }
    Ok(ConnectivityGradient {
        gradients,
        degenerate_edges,
    })
}

pub fn connectivity_loss_backward(batch: &MiniBatchLatents, beta: f64) -> Result<ConnectivityGradient> {
    loss_backward(batch, beta, LossVariant::TwoSided)
}

pub fn one_sided_connectivity_loss_backward(
    batch: &MiniBatchLatents,
    beta: f64,
) -> Result<ConnectivityGradient> {
    loss_backward(batch, beta, LossVariant::OneSided)
}

/// All death-times of the mini-batch, sub-batch by sub-batch (each ascending).
pub fn death_times(batch: &MiniBatchLatents) -> Result<Vec<f64>> {
    if batch.sub_batch_size() < 2 {
        return Err(Error::invalid_input(
            "sub-batches need at least 2 points to have death-times",
        ));
    }
    let mut out = Vec::with_capacity(batch.len() * (batch.sub_batch_size() - 1));
    for sb in batch.sub_batches() {
        out.extend(barcode(sb.latents()).lengths());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sub_batch(points: &[&[f64]], class_id: usize) -> SubBatchLatents {
        let cloud = PointCloud::new(points.iter().map(|p| p.to_vec()).collect()).unwrap();
        SubBatchLatents::new(cloud, class_id).unwrap()
    }

    fn single(points: &[&[f64]]) -> MiniBatchLatents {
        MiniBatchLatents::new(vec![sub_batch(points, 1)]).unwrap()
    }

    #[test]
    fn loss_is_zero_when_deaths_equal_beta() {
        let batch = single(&[&[0.0], &[1.0], &[2.0]]);
        assert_eq!(connectivity_loss(&batch, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn loss_line_example() {
        // Deaths {0.5, 1.5}, beta = 1 -> 0.5 + 0.5.
        let batch = single(&[&[0.0], &[0.5], &[2.0]]);
        assert_eq!(connectivity_loss(&batch, 1.0).unwrap(), 1.0);
    }

    #[test]
    fn loss_doubles_for_duplicated_sub_batch() {
        let sb = sub_batch(&[&[0.0], &[0.5], &[2.0]], 2);
        let one = MiniBatchLatents::new(vec![sb.clone()]).unwrap();
        let two = MiniBatchLatents::new(vec![sb.clone(), sb]).unwrap();
        assert_eq!(
            connectivity_loss(&two, 1.0).unwrap(),
            2.0 * connectivity_loss(&one, 1.0).unwrap()
        );
    }

    #[test]
    fn one_sided_loss_examples() {
        let below = single(&[&[0.0], &[0.2], &[0.5]]);
        assert_eq!(one_sided_connectivity_loss(&below, 1.0).unwrap(), 0.0);

        let batch = single(&[&[0.0], &[0.5], &[2.0]]);
        assert_eq!(one_sided_connectivity_loss(&batch, 1.0).unwrap(), 0.5);

        // All deaths >= beta: both variants agree.
        let above = single(&[&[0.0], &[1.5], &[4.0]]);
        assert_eq!(
            one_sided_connectivity_loss(&above, 1.0).unwrap(),
            connectivity_loss(&above, 1.0).unwrap()
        );
    }

    #[test]
    fn rejects_tiny_sub_batches_and_bad_beta() {
        let batch = single(&[&[0.0], &[1.0]]);
        assert!(connectivity_loss(&batch, 0.0).is_err());
        let singleton = single(&[&[0.0]]);
        assert!(connectivity_loss(&singleton, 1.0).is_err());
    }

    #[test]
    fn backward_zero_at_kink() {
        let batch = single(&[&[0.0], &[1.0], &[2.0]]);
        let g = connectivity_loss_backward(&batch, 1.0).unwrap();
        assert!(g.gradients.iter().flatten().flatten().all(|&v| v == 0.0));
    }

    #[test]
    fn backward_pulls_distant_pair_together() {
        let batch = single(&[&[0.0, 0.0], &[3.0, 4.0]]);
        let g = connectivity_loss_backward(&batch, 1.0).unwrap();
        // d = 5 > beta: gradient at the first point is -unit, at the second +unit.
        let got = &g.gradients[0];
        assert!((got[0][0] + 0.6).abs() < 1e-15 && (got[0][1] + 0.8).abs() < 1e-15);
        assert!((got[1][0] - 0.6).abs() < 1e-15 && (got[1][1] - 0.8).abs() < 1e-15);
    }

    #[test]
    fn backward_pushes_close_pair_apart() {
        let batch = single(&[&[0.0], &[0.5]]);
        let g = connectivity_loss_backward(&batch, 1.0).unwrap();
        // d = 0.5 < beta: descent direction increases the distance.
        assert_eq!(g.gradients[0][0], vec![1.0]);
        assert_eq!(g.gradients[0][1], vec![-1.0]);
    }

    #[test]
    fn one_sided_backward_ignores_short_edges() {
        let batch = single(&[&[0.0], &[0.5]]);
        let g = one_sided_connectivity_loss_backward(&batch, 1.0).unwrap();
        assert!(g.gradients.iter().flatten().flatten().all(|&v| v == 0.0));
    }

    #[test]
    fn death_times_cover_all_sub_batches() {
        let batch = MiniBatchLatents::new(vec![
            sub_batch(&[&[0.0], &[1.0]], 1),
            sub_batch(&[&[0.0], &[3.0]], 2),
        ])
        .unwrap();
        assert_eq!(death_times(&batch).unwrap(), vec![1.0, 3.0]);
    }

    #[test]
    fn mini_batch_rejects_ragged_sub_batches() {
        let a = sub_batch(&[&[0.0], &[1.0]], 1);
        let b = sub_batch(&[&[0.0], &[1.0], &[2.0]], 1);
        assert!(MiniBatchLatents::new(vec![a, b]).is_err());
    }
}
