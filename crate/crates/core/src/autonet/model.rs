use rand::distr::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::layers::{relu, relu_backward, softmax_cross_entropy, ConvGrads, ConvLayer, DenseGrads, DenseLayer};
use super::tensor::{Shape3, Tensor3};
use super::NetError;
use crate::dsp::{BandSpec, DEFAULT_BANDS};
use crate::featmap::FeatureTensor;
use crate::Label;

pub const N_CLASSES: usize = 2;
pub const WIDTH: usize = 32;

/// Kernel sizes of the four convolutions.
pub const CONV_KERNELS: [(usize, usize); 4] = [(2, 2), (2, 2), (2, 2), (3, 4)];

/// Activation shapes from the input through the last convolution.
pub const SHAPE_CHAIN: [Shape3; 5] = [
    Shape3(6, 7, 12),
    Shape3(5, 6, 32),
    Shape3(4, 5, 32),
    Shape3(3, 4, 32),
    Shape3(1, 1, 32),
];

pub const INPUT_SHAPE: Shape3 = SHAPE_CHAIN[0];

/// Provenance carried alongside the parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelMeta {
    pub seed: u64,
    pub bands: Vec<BandSpec>,
    pub grid_hash: u64,
    pub config_digest: u64,
}

impl Default for ModelMeta {
    fn default() -> Self {
        ModelMeta {
            seed: 0,
            bands: DEFAULT_BANDS.to_vec(),
            grid_hash: crate::featmap::default_grid().hash(),
            config_digest: 0,
        }
    }
}

/// Four VALID 2-D convolutions with ReLU, then a 32→2 dense layer.
#[derive(Debug, Clone, PartialEq)]
pub struct CnnModel {
    pub convs: [ConvLayer; 4],
    pub dense: DenseLayer,
    pub meta: ModelMeta,
}

/// Values recorded during a forward pass.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    /// Input of each convolution; `layer_inputs[0]` is the network input and
    /// `layer_inputs[l]` for `l > 0` is the ReLU output of convolution `l - 1`.
    pub layer_inputs: Vec<Tensor3>,
    /// Pre-activation output of each convolution.
    pub pre: Vec<Tensor3>,
    /// ReLU output of the last convolution, flattened.
    pub dense_input: Vec<f64>,
    pub logits: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelGrads {
    pub convs: Vec<ConvGrads>,
    pub dense: DenseGrads,
}

impl ModelGrads {
    pub fn zeros_like(model: &CnnModel) -> Self {
        ModelGrads {
            convs: model
                .convs
                .iter()
                .map(|c| ConvGrads {
                    weights: vec![0.0; c.weights.len()],
                    bias: vec![0.0; c.bias.len()],
                })
                .collect(),
            dense: DenseGrads {
                weights: vec![0.0; model.dense.weights.len()],
                bias: vec![0.0; model.dense.bias.len()],
            },
        }
    }

    /// Same order as [`CnnModel::params`].
    pub fn slices(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = Vec::with_capacity(10);
        for c in &self.convs {
            out.push(&c.weights);
            out.push(&c.bias);
        }
        out.push(&self.dense.weights);
        out.push(&self.dense.bias);
        out
    }

    pub fn scale(&mut self, s: f64) {
        for c in &mut self.convs {
            c.weights.iter_mut().chain(c.bias.iter_mut()).for_each(|v| *v *= s);
        }
        self.dense
            .weights
            .iter_mut()
            .chain(self.dense.bias.iter_mut())
            .for_each(|v| *v *= s);
    }

    pub fn clear(&mut self) {
        self.scale(0.0);
    }
}

impl CnnModel {
    /// All parameters zero.
    pub fn zeros(meta: ModelMeta) -> Self {
        let convs = std::array::from_fn(|l| {
            let (kh, kw) = CONV_KERNELS[l];
            ConvLayer::zeros(kh, kw, SHAPE_CHAIN[l].2, WIDTH)
        });
        CnnModel {
            convs,
            dense: DenseLayer::zeros(WIDTH, N_CLASSES),
            meta,
        }
    }

    /// Glorot-uniform weights, zero biases, drawn from `meta.seed`.
    pub fn init(meta: ModelMeta) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(meta.seed);
        let mut model = Self::zeros(meta);
        for c in &mut model.convs {
            let fan_in = (c.kh * c.kw * c.in_planes) as f64;
            let fan_out = (c.kh * c.kw * c.out_planes) as f64;
            let limit = (6.0 / (fan_in + fan_out)).sqrt();
            let dist = Uniform::new_inclusive(-limit, limit).unwrap();
            c.weights.iter_mut().for_each(|w| *w = dist.sample(&mut rng));
        }
        let limit = (6.0 / (WIDTH + N_CLASSES) as f64).sqrt();
        let dist = Uniform::new_inclusive(-limit, limit).unwrap();
        model
            .dense
            .weights
            .iter_mut()
            .for_each(|w| *w = dist.sample(&mut rng));
        model
    }

    /// Checks layer geometry against the fixed architecture.
    pub fn validate(&self) -> Result<(), NetError> {
        for (l, c) in self.convs.iter().enumerate() {
            let (kh, kw) = CONV_KERNELS[l];
            let ok = c.kh == kh
                && c.kw == kw
                && c.in_planes == SHAPE_CHAIN[l].2
                && c.out_planes == WIDTH
                && c.weights.len() == kh * kw * c.in_planes * WIDTH
                && c.bias.len() == WIDTH;
            if !ok {
                return Err(NetError::Shape {
                    context: "conv layer geometry",
                    expected: format!("{kh}×{kw}×{}→{WIDTH}", SHAPE_CHAIN[l].2),
                    got: format!("{}×{}×{}→{}", c.kh, c.kw, c.in_planes, c.out_planes),
                });
            }
        }
        let d = &self.dense;
        if d.in_dim != WIDTH || d.out_dim != N_CLASSES || d.weights.len() != WIDTH * N_CLASSES || d.bias.len() != N_CLASSES {
            return Err(NetError::Shape {
                context: "dense layer geometry",
                expected: format!("{WIDTH}→{N_CLASSES}"),
                got: format!("{}→{}", d.in_dim, d.out_dim),
            });
        }
        Ok(())
    }

    /// Parameter slices: conv1 weights, conv1 bias, …, dense weights, dense bias.
    pub fn params(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = Vec::with_capacity(10);
        for c in &self.convs {
            out.push(&c.weights);
            out.push(&c.bias);
        }
        out.push(&self.dense.weights);
        out.push(&self.dense.bias);
        out
    }

    pub fn params_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = Vec::with_capacity(10);
        for c in &mut self.convs {
            out.push(&mut c.weights);
            out.push(&mut c.bias);
        }
        out.push(&mut self.dense.weights);
        out.push(&mut self.dense.bias);
        out
    }

    pub fn n_params(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }

    pub fn forward(&self, input: &Tensor3) -> Result<ForwardTrace, NetError> {
        if input.shape() != INPUT_SHAPE {
            return Err(NetError::Shape {
                context: "network input",
                expected: INPUT_SHAPE.to_string(),
                got: input.shape().to_string(),
            });
        }
        let mut layer_inputs = Vec::with_capacity(4);
        let mut pre = Vec::with_capacity(4);
        let mut x = input.clone();
        for (l, conv) in self.convs.iter().enumerate() {
            let z = conv.forward(&x)?;
            if z.shape() != SHAPE_CHAIN[l + 1] {
                return Err(NetError::ShapeChain {
                    stage: l + 1,
                    expected: SHAPE_CHAIN[l + 1],
                    got: z.shape(),
                });
            }
            let a = relu(&z);
            layer_inputs.push(x);
            pre.push(z);
            x = a;
        }
        let dense_input = x.into_vec();
        let logits = self.dense.forward(&dense_input)?;
        Ok(ForwardTrace {
            layer_inputs,
            pre,
            dense_input,
            logits,
        })
    }

    pub fn logits(&self, input: &Tensor3) -> Result<[f64; 2], NetError> {
        let t = self.forward(input)?;
        Ok([t.logits[0], t.logits[1]])
    }

    /// Adds `∂L/∂θ` into `grads` and returns `∂L/∂input`, given `∂L/∂logits`.
    pub fn backward(
        &self,
        trace: &ForwardTrace,
        grad_logits: &[f64],
        grads: &mut ModelGrads,
    ) -> Result<Tensor3, NetError> {
        let g = self
            .dense
            .backward_accumulate(&trace.dense_input, grad_logits, &mut grads.dense)?;
        let Shape3(h, w, c) = SHAPE_CHAIN[4];
        let mut upstream = Tensor3::from_vec(h, w, c, g);
        for l in (0..4).rev() {
            let gz = relu_backward(&trace.pre[l], &upstream)?;
            upstream = self.convs[l].backward_accumulate(&trace.layer_inputs[l], &gz, &mut grads.convs[l])?;
        }
        Ok(upstream)
    }

    /// Cross-entropy loss, parameter gradients and input gradient for one example.
    pub fn loss_and_grads(
        &self,
        input: &Tensor3,
        label: Label,
    ) -> Result<(f64, ModelGrads, Tensor3), NetError> {
        let trace = self.forward(input)?;
        let (loss, gl) = softmax_cross_entropy(&trace.logits, label.index())?;
        let mut grads = ModelGrads::zeros_like(self);
        let gi = self.backward(&trace, &gl, &mut grads)?;
        Ok((loss, grads, gi))
    }
}

/// Class with the larger logit; ties go to class index 0 (left).
pub fn predict(model: &CnnModel, tensor: &FeatureTensor) -> Result<(Label, [f64; 2]), NetError> {
    let logits = model.logits(&tensor.planes)?;
    Ok((argmax_label(logits), logits))
}

pub fn argmax_label(logits: [f64; 2]) -> Label {
    if logits[1] > logits[0] {
        Label::Right
    } else {
        Label::Left
    }
}
