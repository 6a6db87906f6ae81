use rand_distr::{Distribution, Normal};

use super::{relu, softmax, Matrix};
use crate::error::{Error, Result};
use crate::seed;

/// Fully connected layer. `weights` is `fan_out × fan_in`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    pub weights: Matrix,
    pub bias: Vec<f64>,
    maskable: bool,
}

impl DenseLayer {
    pub fn new(weights: Matrix, bias: Vec<f64>, maskable: bool) -> Result<Self> {
        if weights.rows() == 0 || weights.cols() == 0 {
            return Err(Error::usage(
                "dense layer needs positive fan-in and fan-out",
            ));
        }
        if bias.len() != weights.rows() {
            return Err(Error::shape("DenseLayer::new", weights.rows(), bias.len()));
        }
        Ok(Self {
            weights,
            bias,
            maskable,
        })
    }

    pub fn fan_in(&self) -> usize {
        self.weights.cols()
    }

    pub fn fan_out(&self) -> usize {
        self.weights.rows()
    }

    pub fn maskable(&self) -> bool {
        self.maskable
    }
}

/// `a_prev · Wᵀ + b`, one output row per input row.
pub fn dense_forward(layer: &DenseLayer, a_prev: &Matrix) -> Result<Matrix> {
    if a_prev.cols() != layer.fan_in() {
        return Err(Error::shape("dense_forward", layer.fan_in(), a_prev.cols()));
    }
    let mut z = a_prev.matmul_nt(&layer.weights)?;
    for r in 0..z.rows() {
        for (x, b) in z.row_mut(r).iter_mut().zip(&layer.bias) {
            *x += b;
        }
    }
    Ok(z)
}

/// Ordered dense stack; every layer but the last is a maskable ReLU layer,
/// the last produces softmax probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    layers: Vec<DenseLayer>,
    input_dim: usize,
    class_count: usize,
}

impl Network {
    pub fn new(layers: Vec<DenseLayer>) -> Result<Self> {
        let Some(last) = layers.last() else {
            return Err(Error::usage("network needs at least one layer"));
        };
        for (l, pair) in layers.windows(2).enumerate() {
            if pair[1].fan_in() != pair[0].fan_out() {
                return Err(Error::shape(
                    "Network::new",
                    format!("fan_in {} for layer {}", pair[0].fan_out(), l + 1),
                    pair[1].fan_in(),
                ));
            }
        }
        let n = layers.len();
        if let Some(l) = layers
            .iter()
            .enumerate()
            .position(|(l, layer)| layer.maskable != (l + 1 < n))
        {
            return Err(Error::usage(format!(
                "layer {l} has the wrong maskable flag; exactly the hidden layers are maskable"
            )));
        }
        Ok(Self {
            input_dim: layers[0].fan_in(),
            class_count: last.fan_out(),
            layers,
        })
    }

    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }

    pub fn layer_mut(&mut self, l: usize) -> &mut DenseLayer {
        &mut self.layers[l]
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    /// Widths of the hidden (maskable) layers.
    pub fn hidden_widths(&self) -> Vec<usize> {
        self.layers[..self.layers.len() - 1]
            .iter()
            .map(DenseLayer::fan_out)
            .collect()
    }

    pub fn maskable_count(&self) -> usize {
        self.layers.len() - 1
    }

    pub fn parameter_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.as_slice().len() + l.bias.len())
            .sum()
    }

    /// Evaluation-mode forward pass: no masks, no noise, probabilities only.
    pub fn predict(&self, batch: &Matrix) -> Result<Matrix> {
        let mut a = dense_forward(&self.layers[0], batch)?;
        for layer in &self.layers[1..] {
            a = dense_forward(layer, &relu(&a))?;
        }
        softmax(&a)
    }

    /// In-place `θ ← θ − lr·∇θ`.
    pub fn apply_gradients(&mut self, grads: &Gradients, learning_rate: f64) -> Result<()> {
        if !(learning_rate > 0.0 && learning_rate.is_finite()) {
            return Err(Error::usage(format!(
                "learning rate must be positive, got {learning_rate}"
            )));
        }
        check_gradient_shapes(self, grads)?;
        for (layer, g) in self.layers.iter_mut().zip(&grads.layers) {
            for (w, dw) in layer
                .weights
                .as_mut_slice()
                .iter_mut()
                .zip(g.weights.as_slice())
            {
                *w -= learning_rate * dw;
            }
            for (b, db) in layer.bias.iter_mut().zip(&g.bias) {
                *b -= learning_rate * db;
            }
        }
        Ok(())
    }
}

/// He-normal weights (variance `2 / fan_in`), zero biases.
pub fn init_network(
    hidden: &[usize],
    input_dim: usize,
    class_count: usize,
    seed: u64,
) -> Result<Network> {
    if input_dim == 0 || class_count == 0 || hidden.contains(&0) {
        return Err(Error::usage(format!(
            "layer widths must be positive (input {input_dim}, hidden {hidden:?}, classes {class_count})"
        )));
    }
    let mut rng = seed::rng_for(seed, &[seed::stream::INIT]);
    let widths: Vec<usize> = hidden.iter().copied().chain([class_count]).collect();
    let mut fan_in = input_dim;
    let mut layers = Vec::with_capacity(widths.len());
    for (l, &fan_out) in widths.iter().enumerate() {
        let normal = Normal::new(0.0, (2.0 / fan_in as f64).sqrt())
            .map_err(|e| Error::usage(e.to_string()))?;
        let data = (0..fan_out * fan_in)
            .map(|_| normal.sample(&mut rng))
            .collect();
        let weights = Matrix::from_vec(fan_out, fan_in, data)?;
        layers.push(DenseLayer::new(
            weights,
            vec![0.0; fan_out],
            l + 1 < widths.len(),
        )?);
        fan_in = fan_out;
    }
    Network::new(layers)
}

/// Elementwise transform applied to a hidden layer's pre-activations before ReLU.
#[derive(Debug, Clone, PartialEq)]
pub enum SiteTransform {
    Identity,
    /// `z ⊙ (1 − mask)`: units whose mask bit is 1 are zeroed.
    Mask(Vec<u8>),
    /// `z ⊙ scale + shift`, with per-element `scale` and optional `shift`.
    Affine {
        scale: Matrix,
        shift: Option<Matrix>,
    },
}

impl SiteTransform {
    pub fn apply(&self, z: &Matrix) -> Result<Matrix> {
        match self {
            SiteTransform::Identity => Ok(z.clone()),
            SiteTransform::Mask(mask) => {
                if mask.len() != z.cols() {
                    return Err(Error::shape("mask", z.cols(), mask.len()));
                }
                let keep: Vec<f64> = mask.iter().map(|&m| 1.0 - f64::from(m)).collect();
                let mut out = z.clone();
                for r in 0..out.rows() {
                    for (x, k) in out.row_mut(r).iter_mut().zip(&keep) {
                        *x *= k;
                    }
                }
                Ok(out)
            }
            SiteTransform::Affine { scale, shift } => {
                if scale.shape() != z.shape()
                    || shift.as_ref().is_some_and(|s| s.shape() != z.shape())
                {
                    return Err(Error::shape(
                        "affine site transform",
                        format!("{:?}", z.shape()),
                        format!("{:?}", scale.shape()),
                    ));
                }
                let mut out = z.clone();
                for (x, s) in out.as_mut_slice().iter_mut().zip(scale.as_slice()) {
                    *x *= s;
                }
                if let Some(shift) = shift {
                    for (x, s) in out.as_mut_slice().iter_mut().zip(shift.as_slice()) {
                        *x += s;
                    }
                }
                Ok(out)
            }
        }
    }

    /// Pulls `∂loss/∂z̃` back to `∂loss/∂z`.
    fn backprop(&self, upstream: Matrix) -> Matrix {
        match self {
            SiteTransform::Identity => upstream,
            SiteTransform::Mask(mask) => {
                let mut g = upstream;
                for r in 0..g.rows() {
                    for (x, &m) in g.row_mut(r).iter_mut().zip(mask) {
                        if m == 1 {
                            *x = 0.0;
                        }
                    }
                }
                g
            }
            SiteTransform::Affine { scale, .. } => {
                let mut g = upstream;
                for (x, s) in g.as_mut_slice().iter_mut().zip(scale.as_slice()) {
                    *x *= s;
                }
                g
            }
        }
    }
}

/// Every intermediate of one forward pass, kept for backpropagation.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    pub input: Matrix,
    /// `z` per layer.
    pub pre: Vec<Matrix>,
    /// `z̃` per layer; equals `z` for the output layer.
    pub masked: Vec<Matrix>,
    /// ReLU outputs for hidden layers, softmax probabilities for the last.
    pub activations: Vec<Matrix>,
    /// Dynamic mask applied to each hidden layer (all zeros if none).
    pub masks: Vec<Vec<u8>>,
    pub transforms: Vec<SiteTransform>,
}

impl ForwardTrace {
    pub fn probs(&self) -> &Matrix {
        self.activations
            .last()
            .expect("trace has at least one layer")
    }

    pub fn batch_size(&self) -> usize {
        self.input.rows()
    }
}

/// Forward pass with optional per-hidden-layer binary masks (`1` = drop).
///
/// Supplying a mask for the output layer is rejected.
pub fn forward(
    network: &Network,
    batch: &Matrix,
    masks: Option<&[Vec<u8>]>,
) -> Result<(Matrix, ForwardTrace)> {
    let hidden = network.maskable_count();
    let transforms = match masks {
        None => vec![SiteTransform::Identity; hidden],
        Some(masks) => {
            if masks.len() == network.layers().len() {
                return Err(Error::usage(
                    "a mask was supplied for the output layer, which is never masked",
                ));
            }
            if masks.len() != hidden {
                return Err(Error::usage(format!(
                    "expected {hidden} hidden-layer masks, got {}",
                    masks.len()
                )));
            }
            for (l, (mask, width)) in masks.iter().zip(network.hidden_widths()).enumerate() {
                if mask.len() != width {
                    return Err(Error::usage(format!(
                        "mask for layer {l} has length {}, layer width is {width}",
                        mask.len()
                    )));
                }
                if mask.iter().any(|&m| m > 1) {
                    return Err(Error::usage(format!("mask for layer {l} is not binary")));
                }
            }
            masks.iter().cloned().map(SiteTransform::Mask).collect()
        }
    };
    forward_with(network, batch, transforms)
}

/// Forward pass applying one [`SiteTransform`] per hidden layer.
pub fn forward_with(
    network: &Network,
    batch: &Matrix,
    transforms: Vec<SiteTransform>,
) -> Result<(Matrix, ForwardTrace)> {
    let hidden = network.maskable_count();
    if transforms.len() > hidden {
        return Err(Error::usage(
            "a transform was supplied for the output layer, which is never masked",
        ));
    }
    if transforms.len() != hidden {
        return Err(Error::usage(format!(
            "expected {hidden} hidden-layer transforms, got {}",
            transforms.len()
        )));
    }
    let n_layers = network.layers().len();
    let mut pre = Vec::with_capacity(n_layers);
    let mut masked = Vec::with_capacity(n_layers);
    let mut activations: Vec<Matrix> = Vec::with_capacity(n_layers);
    let mut masks = Vec::with_capacity(hidden);

    for (l, layer) in network.layers().iter().enumerate() {
        let a_prev = if l == 0 { batch } else { &activations[l - 1] };
        let z = dense_forward(layer, a_prev)?;
        if l < hidden {
            let zt = transforms[l].apply(&z)?;
            masks.push(match &transforms[l] {
                SiteTransform::Mask(m) => m.clone(),
                _ => vec![0; layer.fan_out()],
            });
            activations.push(relu(&zt));
            pre.push(z);
            masked.push(zt);
        } else {
            activations.push(softmax(&z)?);
            masked.push(z.clone());
            pre.push(z);
        }
    }
    let probs = activations.last().cloned().expect("non-empty network");
    Ok((
        probs,
        ForwardTrace {
            input: batch.clone(),
            pre,
            masked,
            activations,
            masks,
            transforms,
        },
    ))
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerGradient {
    pub weights: Matrix,
    pub bias: Vec<f64>,
}

/// Per-layer `∂loss/∂W` and `∂loss/∂b`, aligned with [`Network::layers`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<LayerGradient>,
}

impl Gradients {
    pub fn zeros_like(network: &Network) -> Self {
        Self {
            layers: network
                .layers()
                .iter()
                .map(|l| LayerGradient {
                    weights: Matrix::zeros(l.fan_out(), l.fan_in()),
                    bias: vec![0.0; l.fan_out()],
                })
                .collect(),
        }
    }
}

/// Reverse-mode gradients of mean cross-entropy over the traced batch.
pub fn backward(network: &Network, trace: &ForwardTrace, y_true: &Matrix) -> Result<Gradients> {
    let layers = network.layers();
    if trace.pre.len() != layers.len() || trace.transforms.len() != network.maskable_count() {
        return Err(Error::usage("trace does not belong to this network"));
    }
    let batch = trace.batch_size();
    if y_true.shape() != (batch, network.class_count()) {
        return Err(Error::shape(
            "backward labels",
            format!("({batch}, {})", network.class_count()),
            format!("{:?}", y_true.shape()),
        ));
    }
    for (l, layer) in layers.iter().enumerate() {
        if trace.pre[l].shape() != (batch, layer.fan_out()) {
            return Err(Error::usage(format!(
                "stale trace: layer {l} has the wrong shape"
            )));
        }
    }
    if batch == 0 {
        return Err(Error::usage("backward over an empty batch"));
    }

    // softmax + cross-entropy: ∂loss/∂z_out = (ŷ − y) / batch
    let inv = 1.0 / batch as f64;
    let mut delta = trace.probs().clone();
    for (d, y) in delta.as_mut_slice().iter_mut().zip(y_true.as_slice()) {
        *d = (*d - y) * inv;
    }

    let mut out = Vec::with_capacity(layers.len());
    for l in (0..layers.len()).rev() {
        let a_prev = if l == 0 {
            &trace.input
        } else {
            &trace.activations[l - 1]
        };
        let weights = delta.matmul_tn(a_prev)?;
        let bias = delta.column_sums();
        if l > 0 {
            let mut upstream = delta.matmul(&layers[l].weights)?;
            let zt = &trace.masked[l - 1];
            for (g, &z) in upstream.as_mut_slice().iter_mut().zip(zt.as_slice()) {
                if z <= 0.0 {
                    *g = 0.0;
                }
            }
            delta = trace.transforms[l - 1].backprop(upstream);
        }
        out.push(LayerGradient { weights, bias });
    }
    out.reverse();
    Ok(Gradients { layers: out })
}

fn check_gradient_shapes(network: &Network, grads: &Gradients) -> Result<()> {
    if grads.layers.len() != network.layers().len() {
        return Err(Error::shape(
            "gradients",
            network.layers().len(),
            grads.layers.len(),
        ));
    }
    for (layer, g) in network.layers().iter().zip(&grads.layers) {
        if g.weights.shape() != layer.weights.shape() || g.bias.len() != layer.bias.len() {
            return Err(Error::shape(
                "gradients",
                format!("{:?}", layer.weights.shape()),
                format!("{:?}", g.weights.shape()),
            ));
        }
    }
    Ok(())
}

/// One SGD update, returning the updated network.
pub fn sgd_step(mut network: Network, grads: &Gradients, learning_rate: f64) -> Result<Network> {
    network.apply_gradients(grads, learning_rate)?;
    Ok(network)
}
