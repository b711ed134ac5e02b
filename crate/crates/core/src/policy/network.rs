use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{CfxError, Result};
use crate::sample::SeriesSample;
use crate::scalar::Scalar;
use crate::schema::{ActionLayout, HeadSlot};

use super::distribution::{
    ActionTriple, Categorical, DistributionParams, Intervention, ValueDistribution,
};

/// Hidden layer widths of the default policy.
pub const DEFAULT_HIDDEN: [usize; 2] = [1000, 100];
/// Lower bound added to the softplus scale head.
pub const MIN_STD: f64 = 1e-4;

/// One dense layer inside the flat parameter vector: an `outputs x inputs`
/// row-major weight block followed by `outputs` biases.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DenseLayer {
    pub inputs: usize,
    pub outputs: usize,
    pub offset: usize,
}

impl DenseLayer {
    fn weights(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.inputs * self.outputs
    }

    fn biases(&self) -> std::ops::Range<usize> {
        let start = self.offset + self.inputs * self.outputs;
        start..start + self.outputs
    }

    fn len(&self) -> usize {
        (self.inputs + 1) * self.outputs
    }
}

/// Positions of all layers; parameters are stored in this order:
/// `hidden1, hidden2, time, feature, mean, scale, category`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkShape {
    pub hidden1: DenseLayer,
    pub hidden2: DenseLayer,
    pub time: DenseLayer,
    pub feature: DenseLayer,
    pub mean: DenseLayer,
    pub scale: DenseLayer,
    pub category: DenseLayer,
}

impl NetworkShape {
    pub fn new(layout: &ActionLayout, hidden: [usize; 2]) -> Self {
        let mut offset = 0;
        let mut layer = |inputs, outputs| {
            let l = DenseLayer {
                inputs,
                outputs,
                offset,
            };
            offset += l.len();
            l
        };
        let [h1, h2] = hidden;
        Self {
            hidden1: layer(layout.input_width(), h1),
            hidden2: layer(h1, h2),
            time: layer(h2, layout.steps),
            feature: layer(h2, layout.actionable()),
            mean: layer(h2, layout.continuous),
            scale: layer(h2, layout.continuous),
            category: layer(h2, layout.discrete_total),
        }
    }

    pub fn layers(&self) -> [&DenseLayer; 7] {
        [
            &self.hidden1,
            &self.hidden2,
            &self.time,
            &self.feature,
            &self.mean,
            &self.scale,
            &self.category,
        ]
    }

    pub fn parameter_count(&self) -> usize {
        self.layers().iter().map(|l| l.len()).sum()
    }
}

#[inline]
fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    let mut acc = [T::zero(); 8];
    let chunks_a = a.chunks_exact(8);
    let chunks_b = b.chunks_exact(8);
    let tail: T = chunks_a
        .remainder()
        .iter()
        .zip(chunks_b.remainder())
        .map(|(&x, &y)| x * y)
        .sum();
    for (ca, cb) in chunks_a.zip(chunks_b) {
        for i in 0..8 {
            acc[i] += ca[i] * cb[i];
        }
    }
    acc.iter().copied().sum::<T>() + tail
}

#[inline]
fn axpy<T: Scalar>(alpha: T, x: &[T], y: &mut [T]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

fn affine<T: Scalar>(params: &[T], layer: &DenseLayer, input: &[T], out: &mut Vec<T>) {
    let w = &params[layer.weights()];
    let b = &params[layer.biases()];
    out.clear();
    out.extend(
        w.chunks_exact(layer.inputs)
            .zip(b)
            .map(|(row, &bias)| dot(row, input) + bias),
    );
}

/// Accumulates `d loss / d params` for `out = W input + b` given `d out`,
/// and adds `W^T d_out` into `d_input` when requested.
fn affine_backward<T: Scalar>(
    params: &[T],
    grad: &mut [T],
    layer: &DenseLayer,
    input: &[T],
    d_out: &[T],
    mut d_input: Option<&mut [T]>,
) {
    let w = &params[layer.weights()];
    for (o, &g) in d_out.iter().enumerate() {
        if g == T::zero() {
            continue;
        }
        let row = o * layer.inputs..(o + 1) * layer.inputs;
        axpy(g, input, &mut grad[layer.weights()][row.clone()]);
        grad[layer.biases()][o] += g;
        if let Some(d_in) = d_input.as_deref_mut() {
            axpy(g, &w[row], d_in);
        }
    }
}

fn softplus<T: Scalar>(x: T) -> T {
    if x > T::lit(30.0) {
        x
    } else {
        x.exp().ln_1p()
    }
}

fn sigmoid<T: Scalar>(x: T) -> T {
    T::one() / (T::one() + (-x).exp())
}

/// Intermediate activations kept for backpropagation.
#[derive(Clone, Debug, Default)]
pub struct ForwardCache<T> {
    input: Vec<T>,
    pre1: Vec<T>,
    hidden1: Vec<T>,
    pre2: Vec<T>,
    hidden2: Vec<T>,
    time_logits: Vec<T>,
    feature_logits: Vec<T>,
    means: Vec<T>,
    scale_pre: Vec<T>,
    category_logits: Vec<T>,
}

/// Two-hidden-layer ReLU perceptron producing the factored action
/// distribution over (time step, actionable feature, intervention value).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar", try_from = "NetworkRepr<T>")]
pub struct PolicyNetwork<T> {
    layout: ActionLayout,
    shape: NetworkShape,
    params: Vec<T>,
}

#[derive(Deserialize)]
#[serde(bound = "T: Scalar")]
struct NetworkRepr<T> {
    layout: ActionLayout,
    shape: NetworkShape,
    params: Vec<T>,
}

impl<T: Scalar> TryFrom<NetworkRepr<T>> for PolicyNetwork<T> {
    type Error = CfxError;

    fn try_from(repr: NetworkRepr<T>) -> Result<Self> {
        let hidden = [repr.shape.hidden1.outputs, repr.shape.hidden2.outputs];
        let net = Self::from_parts(repr.layout, hidden, repr.params)?;
        if net.shape != repr.shape {
            return Err(CfxError::dim(
                "checkpoint layer table does not match its action layout",
            ));
        }
        Ok(net)
    }
}

impl<T: Scalar> PolicyNetwork<T> {
    /// Uniform fan-in initialisation: every weight and bias of a layer with
    /// `n` inputs is drawn from `U(-1/sqrt(n), 1/sqrt(n))`.
    pub fn new<R: Rng + ?Sized>(layout: ActionLayout, hidden: [usize; 2], rng: &mut R) -> Self {
        let mut net = Self::zeros(layout, hidden);
        for layer in net.shape.layers() {
            let bound = 1.0 / (layer.inputs.max(1) as f64).sqrt();
            for p in &mut net.params[layer.offset..layer.offset + layer.len()] {
                *p = T::lit(rng.random_range(-bound..bound));
            }
        }
        net
    }

    /// # Panics
    ///
    /// If a hidden width is zero.
    pub fn zeros(layout: ActionLayout, hidden: [usize; 2]) -> Self {
        assert!(
            hidden.iter().all(|&h| h > 0),
            "hidden layers must be non-empty"
        );
        let shape = NetworkShape::new(&layout, hidden);
        let params = vec![T::zero(); shape.parameter_count()];
        Self {
            layout,
            shape,
            params,
        }
    }

    pub fn from_parts(layout: ActionLayout, hidden: [usize; 2], params: Vec<T>) -> Result<Self> {
        if hidden.contains(&0) {
            return Err(CfxError::Config("hidden layers must be non-empty".into()));
        }
        let shape = NetworkShape::new(&layout, hidden);
        if params.len() != shape.parameter_count() {
            return Err(CfxError::dim(format!(
                "expected {} parameters, got {}",
                shape.parameter_count(),
                params.len()
            )));
        }
        Ok(Self {
            layout,
            shape,
            params,
        })
    }

    pub fn layout(&self) -> &ActionLayout {
        &self.layout
    }

    pub fn shape(&self) -> &NetworkShape {
        &self.shape
    }

    pub fn hidden(&self) -> [usize; 2] {
        [self.shape.hidden1.outputs, self.shape.hidden2.outputs]
    }

    pub fn params(&self) -> &[T] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [T] {
        &mut self.params
    }

    pub fn is_finite(&self) -> bool {
        self.params.iter().all(|p| p.is_finite())
    }

    fn check_input(&self, state: &SeriesSample<T>) -> Result<()> {
        if state.shape() != (self.layout.steps, self.layout.features) {
            return Err(CfxError::dim(format!(
                "policy expects a {}x{} state, got {}x{}",
                self.layout.steps,
                self.layout.features,
                state.steps(),
                state.features()
            )));
        }
        Ok(())
    }

    fn forward_cached(&self, state: &SeriesSample<T>, cache: &mut ForwardCache<T>) -> Result<()> {
        self.check_input(state)?;
        if !state.is_finite() {
            return Err(CfxError::Numeric(
                "policy input contains non-finite values".into(),
            ));
        }
        let p = &self.params;
        let s = &self.shape;
        cache.input.clear();
        cache.input.extend_from_slice(state.as_slice());
        affine(p, &s.hidden1, &cache.input, &mut cache.pre1);
        cache.hidden1.clear();
        cache
            .hidden1
            .extend(cache.pre1.iter().map(|&v| v.max(T::zero())));
        affine(p, &s.hidden2, &cache.hidden1, &mut cache.pre2);
        cache.hidden2.clear();
        cache
            .hidden2
            .extend(cache.pre2.iter().map(|&v| v.max(T::zero())));
        affine(p, &s.time, &cache.hidden2, &mut cache.time_logits);
        affine(p, &s.feature, &cache.hidden2, &mut cache.feature_logits);
        affine(p, &s.mean, &cache.hidden2, &mut cache.means);
        affine(p, &s.scale, &cache.hidden2, &mut cache.scale_pre);
        affine(p, &s.category, &cache.hidden2, &mut cache.category_logits);
        Ok(())
    }

    fn distribution_from(&self, cache: &ForwardCache<T>) -> DistributionParams<T> {
        let values = self
            .layout
            .slots
            .iter()
            .map(|slot| match slot.head {
                HeadSlot::Continuous { index } => ValueDistribution::Normal {
                    mean: cache.means[index],
                    std: softplus(cache.scale_pre[index]) + T::lit(MIN_STD),
                },
                HeadSlot::Discrete {
                    offset,
                    cardinality,
                } => ValueDistribution::Categorical(Categorical::from_logits(
                    &cache.category_logits[offset..offset + cardinality],
                )),
            })
            .collect();
        DistributionParams {
            time: Categorical::from_logits(&cache.time_logits),
            feature: Categorical::from_logits(&cache.feature_logits),
            values,
        }
    }

    pub fn forward(&self, state: &SeriesSample<T>) -> Result<DistributionParams<T>> {
        let mut cache = ForwardCache::default();
        self.forward_cached(state, &mut cache)?;
        Ok(self.distribution_from(&cache))
    }

    pub fn log_prob(&self, state: &SeriesSample<T>, action: &ActionTriple<T>) -> Result<T> {
        Ok(self.forward(state)?.log_prob(action))
    }

    /// Adds `scale * d ln π(action | state) / d params` into `grad` and
    /// returns the log-probability.
    pub fn accumulate_log_prob_grad(
        &self,
        state: &SeriesSample<T>,
        action: &ActionTriple<T>,
        scale: T,
        grad: &mut [T],
        cache: &mut ForwardCache<T>,
    ) -> Result<T> {
        if grad.len() != self.params.len() {
            return Err(CfxError::dim(
                "gradient buffer does not match parameter count",
            ));
        }
        if action.step >= self.layout.steps || action.slot >= self.layout.actionable() {
            return Err(CfxError::dim(format!(
                "action {action:?} outside the action space"
            )));
        }
        self.forward_cached(state, cache)?;
        let dist = self.distribution_from(cache);
        let log_prob = dist.log_prob(action);
        if !log_prob.is_finite() {
            return Err(CfxError::Numeric(format!(
                "action {action:?} has log-probability {log_prob}"
            )));
        }

        let s = &self.shape;
        let p = &self.params;
        let h2 = &cache.hidden2;
        let mut d_hidden2 = vec![T::zero(); h2.len()];

        // d ln softmax_i / d logits = onehot(i) - probs
        let categorical_grad = |probs: &[T], index: usize| -> Vec<T> {
            probs
                .iter()
                .enumerate()
                .map(|(j, &pj)| scale * (if j == index { T::one() } else { T::zero() } - pj))
                .collect()
        };
        let d_time = categorical_grad(dist.time.probs(), action.step);
        affine_backward(p, grad, &s.time, h2, &d_time, Some(&mut d_hidden2));
        let d_feature = categorical_grad(dist.feature.probs(), action.slot);
        affine_backward(p, grad, &s.feature, h2, &d_feature, Some(&mut d_hidden2));

        match (self.layout.slots[action.slot].head, action.intervention) {
            (HeadSlot::Continuous { index }, Intervention::Shift(a)) => {
                let ValueDistribution::Normal { mean, std } = dist.values[action.slot] else {
                    unreachable!("continuous slot carries a normal distribution")
                };
                let diff = a - mean;
                let var = std * std;
                let mut d_mean = vec![T::zero(); s.mean.outputs];
                d_mean[index] = scale * diff / var;
                let mut d_scale = vec![T::zero(); s.scale.outputs];
                let d_std = -T::one() / std + diff * diff / (var * std);
                d_scale[index] = scale * d_std * sigmoid(cache.scale_pre[index]);
                affine_backward(p, grad, &s.mean, h2, &d_mean, Some(&mut d_hidden2));
                affine_backward(p, grad, &s.scale, h2, &d_scale, Some(&mut d_hidden2));
            }
            (
                HeadSlot::Discrete {
                    offset,
                    cardinality,
                },
                Intervention::Assign(v),
            ) => {
                let ValueDistribution::Categorical(c) = &dist.values[action.slot] else {
                    unreachable!("discrete slot carries a categorical distribution")
                };
                let mut d_category = vec![T::zero(); s.category.outputs];
                d_category[offset..offset + cardinality]
                    .copy_from_slice(&categorical_grad(c.probs(), v));
                affine_backward(p, grad, &s.category, h2, &d_category, Some(&mut d_hidden2));
            }
            _ => unreachable!("log-probability was finite"),
        }

        let d_pre2: Vec<T> = d_hidden2
            .iter()
            .zip(&cache.pre2)
            .map(|(&g, &z)| if z > T::zero() { g } else { T::zero() })
            .collect();
        let mut d_hidden1 = vec![T::zero(); cache.hidden1.len()];
        affine_backward(
            p,
            grad,
            &s.hidden2,
            &cache.hidden1,
            &d_pre2,
            Some(&mut d_hidden1),
        );
        let d_pre1: Vec<T> = d_hidden1
            .iter()
            .zip(&cache.pre1)
            .map(|(&g, &z)| if z > T::zero() { g } else { T::zero() })
            .collect();
        affine_backward(p, grad, &s.hidden1, &cache.input, &d_pre1, None);
        Ok(log_prob)
    }

    /// Exact gradient of `ln π(action | state)` with respect to every
    /// parameter, in the flat parameter order.
    pub fn grad_log_prob(
        &self,
        state: &SeriesSample<T>,
        action: &ActionTriple<T>,
    ) -> Result<Vec<T>> {
        let mut grad = vec![T::zero(); self.params.len()];
        let mut cache = ForwardCache::default();
        self.accumulate_log_prob_grad(state, action, T::one(), &mut grad, &mut cache)?;
        Ok(grad)
    }
}
