//! Softmax classifiers with hand-written gradients.
//!
//! Two shapes are supported: multinomial logistic regression (`hidden == 0`)
//! and a one-hidden-layer tanh MLP. Parameters are one flat vector laid out
//! as `W1 (h x d), b1 (h), W2 (c x h), b2 (c)` for the MLP and
//! `W (c x d), b (c)` for logistic regression, all row-major.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{FlError, LocalDataset, ModelParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelShape {
    pub n_features: usize,
    pub n_classes: usize,
    /// Hidden width; 0 selects logistic regression.
    pub hidden: usize,
}

impl ModelShape {
    pub fn logistic(n_features: usize, n_classes: usize) -> Self {
        ModelShape { n_features, n_classes, hidden: 0 }
    }

    pub fn mlp(n_features: usize, n_classes: usize, hidden: usize) -> Self {
        ModelShape { n_features, n_classes, hidden }
    }

    pub fn dim(&self) -> usize {
        let (d, c, h) = (self.n_features, self.n_classes, self.hidden);
        if h == 0 {
            c * (d + 1)
        } else {
            h * (d + 1) + c * (h + 1)
        }
    }

    fn check(&self, params: &ModelParams, data: &LocalDataset) -> Result<(), FlError> {
        if params.dim() != self.dim() {
            return Err(FlError::DimensionMismatch { expected: self.dim(), actual: params.dim() });
        }
        if data.n_features != self.n_features {
            return Err(FlError::DimensionMismatch { expected: self.n_features, actual: data.n_features });
        }
        if data.n_classes != self.n_classes {
            return Err(FlError::DimensionMismatch { expected: self.n_classes, actual: data.n_classes });
        }
        Ok(())
    }
}

/// Hyperparameters of one client's local optimisation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainSettings {
    pub epochs: u32,
    pub lr: f64,
    pub batch_size: usize,
}

/// Small Gaussian initialisation.
pub fn init_params<R: Rng + ?Sized>(shape: &ModelShape, scale: f64, rng: &mut R) -> ModelParams {
    ModelParams::new(
        (0..shape.dim())
            .map(|_| {
                let z: f64 = StandardNormal.sample(rng);
                z * scale
            })
            .collect(),
    )
}

/// Per-sample forward pass. Fills `hidden` (MLP only) and `logits`.
fn forward(shape: &ModelShape, w: &[f64], x: &[f64], hidden: &mut [f64], logits: &mut [f64]) {
    let (d, c, h) = (shape.n_features, shape.n_classes, shape.hidden);
    if h == 0 {
        let (weights, bias) = w.split_at(c * d);
        for k in 0..c {
            let row = &weights[k * d..(k + 1) * d];
            logits[k] = bias[k] + row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
        }
    } else {
        let (w1, rest) = w.split_at(h * d);
        let (b1, rest) = rest.split_at(h);
        let (w2, b2) = rest.split_at(c * h);
        for j in 0..h {
            let row = &w1[j * d..(j + 1) * d];
            hidden[j] = (b1[j] + row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>()).tanh();
        }
        for k in 0..c {
            let row = &w2[k * h..(k + 1) * h];
            logits[k] = b2[k] + row.iter().zip(hidden.iter()).map(|(a, b)| a * b).sum::<f64>();
        }
    }
}

/// Turns logits into probabilities in place and returns `-log p[label]`.
fn softmax_xent(logits: &mut [f64], label: usize) -> f64 {
    let target_logit = logits[label];
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for z in logits.iter_mut() {
        *z = (*z - max).exp();
        sum += *z;
    }
    let lse = max + sum.ln();
    for z in logits.iter_mut() {
        *z /= sum;
    }
    lse - target_logit
}

/// Mean cross-entropy and its gradient over the samples in `indices`.
pub fn loss_and_gradient(
    shape: &ModelShape,
    params: &ModelParams,
    data: &LocalDataset,
    indices: &[usize],
) -> Result<(f64, Vec<f64>), FlError> {
    shape.check(params, data)?;
    if indices.is_empty() {
        return Err(FlError::InvalidArgument("empty batch".into()));
    }
    let (d, c, h) = (shape.n_features, shape.n_classes, shape.hidden);
    let w = &params.weights;
    let mut grad = vec![0.0; shape.dim()];
    let mut hidden = vec![0.0; h];
    let mut probs = vec![0.0; c];
    let mut g_hidden = vec![0.0; h];
    let mut loss = 0.0;

    for &i in indices {
        let x = data.sample(i);
        let y = data.labels[i] as usize;
        forward(shape, w, x, &mut hidden, &mut probs);
        loss += softmax_xent(&mut probs, y);
        probs[y] -= 1.0;
        let g_logits = &probs;

        if h == 0 {
            let (gw, gb) = grad.split_at_mut(c * d);
            for k in 0..c {
                let g = g_logits[k];
                for (gwk, xj) in gw[k * d..(k + 1) * d].iter_mut().zip(x) {
                    *gwk += g * xj;
                }
                gb[k] += g;
            }
        } else {
            let w2 = &w[h * d + h..h * d + h + c * h];
            let (gw1, rest) = grad.split_at_mut(h * d);
            let (gb1, rest) = rest.split_at_mut(h);
            let (gw2, gb2) = rest.split_at_mut(c * h);
            g_hidden.iter_mut().for_each(|v| *v = 0.0);
            for k in 0..c {
                let g = g_logits[k];
                for j in 0..h {
                    gw2[k * h + j] += g * hidden[j];
                    g_hidden[j] += g * w2[k * h + j];
                }
                gb2[k] += g;
            }
            for j in 0..h {
                let ga = g_hidden[j] * (1.0 - hidden[j] * hidden[j]);
                for (gwj, xi) in gw1[j * d..(j + 1) * d].iter_mut().zip(x) {
                    *gwj += ga * xi;
                }
                gb1[j] += ga;
            }
        }
    }
    let n = indices.len() as f64;
    grad.iter_mut().for_each(|g| *g /= n);
    Ok((loss / n, grad))
}

/// Gradient of the mean cross-entropy over `indices`.
pub fn gradient(
    shape: &ModelShape,
    params: &ModelParams,
    data: &LocalDataset,
    indices: &[usize],
) -> Result<Vec<f64>, FlError> {
    loss_and_gradient(shape, params, data, indices).map(|(_, g)| g)
}

/// Accuracy (argmax, ties to the lowest class) and mean cross-entropy.
pub fn evaluate(shape: &ModelShape, params: &ModelParams, test: &LocalDataset) -> Result<(f64, f64), FlError> {
    shape.check(params, test)?;
    if test.is_empty() {
        return Err(FlError::InvalidArgument("empty test set".into()));
    }
    let mut hidden = vec![0.0; shape.hidden];
    let mut logits = vec![0.0; shape.n_classes];
    let mut correct = 0usize;
    let mut loss = 0.0;
    for i in 0..test.len() {
        forward(shape, &params.weights, test.sample(i), &mut hidden, &mut logits);
        let mut best = 0;
        for k in 1..logits.len() {
            if logits[k] > logits[best] {
                best = k;
            }
        }
        let y = test.labels[i] as usize;
        if best == y {
            correct += 1;
        }
        loss += softmax_xent(&mut logits, y);
    }
    let n = test.len() as f64;
    Ok((correct as f64 / n, loss / n))
}

/// Mini-batch gradient descent with per-epoch shuffling.
///
/// Returns the new parameters and the sample-weighted mean of the batch
/// losses seen during the last epoch (or the evaluation loss when
/// `epochs == 0`).
pub fn local_train<R: Rng + ?Sized>(
    shape: &ModelShape,
    params: &ModelParams,
    data: &LocalDataset,
    settings: &TrainSettings,
    rng: &mut R,
) -> Result<(ModelParams, f64), FlError> {
    if !(settings.lr >= 0.0 && settings.lr.is_finite()) {
        return Err(FlError::InvalidArgument(format!("learning rate must be >= 0, got {}", settings.lr)));
    }
    if settings.batch_size == 0 {
        return Err(FlError::InvalidArgument("batch_size must be positive".into()));
    }
    if data.is_empty() {
        return Err(FlError::InvalidArgument("empty training set".into()));
    }
    if settings.epochs == 0 {
        let (_, loss) = evaluate(shape, params, data)?;
        return Ok((params.clone(), loss));
    }
    shape.check(params, data)?;

    let mut current = params.clone();
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut epoch_loss = 0.0;
    for _ in 0..settings.epochs {
        order.shuffle(rng);
        epoch_loss = 0.0;
        for batch in order.chunks(settings.batch_size) {
            let (loss, grad) = loss_and_gradient(shape, &current, data, batch)?;
            epoch_loss += loss * batch.len() as f64;
            if settings.lr > 0.0 {
                for (w, g) in current.weights.iter_mut().zip(&grad) {
                    *w -= settings.lr * g;
                }
            }
        }
        epoch_loss /= data.len() as f64;
    }
    Ok((current, epoch_loss))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fl::data::{gaussian_blobs, BlobSpec};
    use crate::rng;

    fn one_per_class(c: usize, d: usize) -> LocalDataset {
        let mut features = Vec::new();
        for k in 0..c {
            for j in 0..d {
                features.push((k * d + j) as f64 * 0.1 - 0.3);
            }
        }
        LocalDataset::new(features, (0..c as u32).collect(), d, c).unwrap()
    }

    #[test]
    fn dims() {
        assert_eq!(ModelShape::logistic(4, 3).dim(), 15);
        assert_eq!(ModelShape::mlp(4, 3, 5).dim(), 5 * 5 + 3 * 6);
    }

    #[test]
    fn balanced_batch_has_zero_bias_gradient() {
        let shape = ModelShape::logistic(3, 4);
        let data = one_per_class(4, 3);
        // All-zero weights give uniform logits on every sample.
        let params = ModelParams::zeros(shape.dim());
        let g = gradient(&shape, &params, &data, &[0, 1, 2, 3]).unwrap();
        for gb in &g[12..16] {
            assert!(gb.abs() < 1e-15);
        }
    }

    #[test]
    fn gradient_is_mean_invariant_under_duplication() {
        let shape = ModelShape::mlp(3, 4, 5);
        let data = one_per_class(4, 3);
        let params = init_params(&shape, 0.5, &mut rng::seeded(3));
        let g1 = gradient(&shape, &params, &data, &[0, 1, 2, 3]).unwrap();
        let g2 = gradient(&shape, &params, &data, &[0, 0, 1, 1, 2, 2, 3, 3]).unwrap();
        for (a, b) in g1.iter().zip(&g2) {
            assert!((a - b).abs() <= 1e-15 * a.abs().max(1.0));
        }
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let shape = ModelShape::logistic(3, 4);
        let data = one_per_class(4, 3);
        let err = gradient(&shape, &ModelParams::zeros(7), &data, &[0]).unwrap_err();
        assert_eq!(err, FlError::DimensionMismatch { expected: 16, actual: 7 });
        assert!(gradient(&ModelShape::logistic(2, 4), &ModelParams::zeros(12), &data, &[0]).is_err());
    }

    #[test]
    fn zero_lr_and_zero_epochs_are_identity() {
        let shape = ModelShape::logistic(3, 4);
        let data = one_per_class(4, 3);
        let params = init_params(&shape, 0.3, &mut rng::seeded(9));
        let s = TrainSettings { epochs: 3, lr: 0.0, batch_size: 2 };
        let (p, _) = local_train(&shape, &params, &data, &s, &mut rng::seeded(1)).unwrap();
        assert_eq!(p, params);

        let s = TrainSettings { epochs: 0, lr: 0.5, batch_size: 2 };
        let (p, loss) = local_train(&shape, &params, &data, &s, &mut rng::seeded(1)).unwrap();
        assert_eq!(p, params);
        assert_eq!(loss, evaluate(&shape, &params, &data).unwrap().1);
        let s = TrainSettings { epochs: 1, lr: -0.1, batch_size: 2 };
        assert!(local_train(&shape, &params, &data, &s, &mut rng::seeded(1)).is_err());
    }

    #[test]
    fn separable_blobs_are_learned() {
        let spec = BlobSpec { n_features: 2, n_classes: 2, center_scale: 4.0, noise_std: 0.5 };
        let mut r = rng::seeded(21);
        let centers = spec.centers(&mut r);
        let data = gaussian_blobs(&spec, &centers, &[0.5, 0.5], 200, &mut r).unwrap();
        let shape = ModelShape::logistic(2, 2);
        let s = TrainSettings { epochs: 20, lr: 0.5, batch_size: 16 };
        let (p, _) = local_train(&shape, &ModelParams::zeros(shape.dim()), &data, &s, &mut r).unwrap();
        let (acc, _) = evaluate(&shape, &p, &data).unwrap();
        assert!(acc >= 0.99, "accuracy {acc}");
    }

    #[test]
    fn zero_params_give_uniform_predictions() {
        let c = 10;
        let shape = ModelShape::logistic(2, c);
        let features: Vec<f64> = (0..2 * c * 3).map(|i| i as f64 * 0.01).collect();
        let labels: Vec<u32> = (0..c as u32 * 3).map(|i| i % c as u32).collect();
        let test = LocalDataset::new(features, labels, 2, c).unwrap();
        let (acc, loss) = evaluate(&shape, &ModelParams::zeros(shape.dim()), &test).unwrap();
        assert!((acc - 0.1).abs() < 1e-12);
        assert!((loss - (10f64).ln()).abs() < 1e-12);
    }

    #[test]
    fn margin_params_are_perfect() {
        // Class k fires on feature k.
        let c = 3;
        let shape = ModelShape::logistic(c, c);
        let mut w = vec![0.0; shape.dim()];
        for k in 0..c {
            w[k * c + k] = 10.0;
        }
        let data = LocalDataset::new(
            vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0],
            vec![0, 1, 2],
            c,
            c,
        )
        .unwrap();
        assert_eq!(evaluate(&shape, &ModelParams::new(w), &data).unwrap().0, 1.0);
    }
}
