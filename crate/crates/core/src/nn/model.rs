use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{bail, Result};
use crate::math;
use crate::rng::{self, stream};
use crate::tensor::Tensor;

/// Fully connected layer `y = x·Wᵀ + b`, `W` stored as `out×in`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub(crate) weight: Tensor,
    pub(crate) bias: Tensor,
}

impl Dense {
    pub fn new(weight: Tensor, bias: Tensor) -> Result<Self> {
        let (out, _) = weight.matrix_dims()?;
        if bias.shape() != [out] {
            bail!(
                Shape,
                "bias shape {:?} does not match weight rows {}",
                bias.shape(),
                out
            );
        }
        Ok(Self { weight, bias })
    }

    /// Glorot-uniform weights, zero bias.
    pub fn glorot<R: Rng + ?Sized>(input: usize, output: usize, rng: &mut R) -> Self {
        let a = math::sqrt(6.0 / (input + output) as f64);
        let data = (0..input * output).map(|_| rng.random_range(-a..=a)).collect();
        Self {
            weight: Tensor::new(vec![output, input], data).expect("sized"),
            bias: Tensor::zeros(&[output]),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.weight.shape()[1]
    }

    pub fn output_dim(&self) -> usize {
        self.weight.shape()[0]
    }

    pub fn weight(&self) -> &Tensor {
        &self.weight
    }

    pub fn bias(&self) -> &Tensor {
        &self.bias
    }

    pub(crate) fn affine(&self, x: &Tensor) -> Result<Tensor> {
        let mut z = x.matmul_t(&self.weight)?;
        let b = self.bias.data();
        for r in 0..z.rows() {
            for (v, bv) in z.row_mut(r).iter_mut().zip(b) {
                *v += bv;
            }
        }
        Ok(z)
    }
}

/// Layer widths of a feedforward classifier.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Architecture {
    pub input_dim: usize,
    /// Widths of the hidden backbone layers before the embedding layer.
    pub hidden: Vec<usize>,
    pub embedding_dim: usize,
    pub num_classes: usize,
}

impl Architecture {
    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.embedding_dim == 0 || self.num_classes == 0 {
            bail!(Parameter, "layer widths must be positive: {:?}", self);
        }
        if self.hidden.contains(&0) {
            bail!(Parameter, "hidden widths must be positive: {:?}", self.hidden);
        }
        Ok(())
    }
}

/// Backbone (rectified affine layers producing the embedding) followed by a
/// linear classification head.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    backbone: Vec<Dense>,
    head: Dense,
}

impl Model {
    /// Seeded Glorot-uniform initialisation.
    pub fn init(arch: &Architecture, seed: u64) -> Result<Self> {
        arch.validate()?;
        let mut rng = rng::seeded(seed, stream::INIT);
        let mut widths = vec![arch.input_dim];
        widths.extend_from_slice(&arch.hidden);
        widths.push(arch.embedding_dim);
        let backbone = widths
            .windows(2)
            .map(|w| Dense::glorot(w[0], w[1], &mut rng))
            .collect();
        let head = Dense::glorot(arch.embedding_dim, arch.num_classes, &mut rng);
        Self::from_layers(backbone, head)
    }

    pub fn from_layers(backbone: Vec<Dense>, head: Dense) -> Result<Self> {
        if backbone.is_empty() {
            bail!(Shape, "backbone needs at least one layer");
        }
        for (i, pair) in backbone.windows(2).enumerate() {
            if pair[0].output_dim() != pair[1].input_dim() {
                bail!(
                    Shape,
                    "backbone layer {} outputs {} but layer {} expects {}",
                    i,
                    pair[0].output_dim(),
                    i + 1,
                    pair[1].input_dim()
                );
            }
        }
        let emb = backbone.last().expect("non-empty").output_dim();
        if head.input_dim() != emb {
            bail!(
                Shape,
                "head expects {} inputs but backbone embeds into {}",
                head.input_dim(),
                emb
            );
        }
        Ok(Self { backbone, head })
    }

    /// Rebuilds a model from the flat parameter list produced by
    /// [`Model::parameters`].
    pub fn from_parameters(params: Vec<Tensor>) -> Result<Self> {
        if params.len() < 4 || !params.len().is_multiple_of(2) {
            bail!(Shape, "expected an even number (>= 4) of parameter tensors, got {}", params.len());
        }
        let mut layers = Vec::with_capacity(params.len() / 2);
        let mut it = params.into_iter();
        while let (Some(w), Some(b)) = (it.next(), it.next()) {
            layers.push(Dense::new(w, b)?);
        }
        let head = layers.pop().expect("at least two layers");
        Self::from_layers(layers, head)
    }

    pub fn input_dim(&self) -> usize {
        self.backbone[0].input_dim()
    }

    pub fn embedding_dim(&self) -> usize {
        self.head.input_dim()
    }

    pub fn num_classes(&self) -> usize {
        self.head.output_dim()
    }

    pub fn backbone(&self) -> &[Dense] {
        &self.backbone
    }

    pub fn head(&self) -> &Dense {
        &self.head
    }

    /// Parameters in storage order: each backbone layer's weight and bias,
    /// then the head's weight and bias.
    pub fn parameters(&self) -> impl Iterator<Item = &Tensor> {
        self.backbone
            .iter()
            .chain(core::iter::once(&self.head))
            .flat_map(|l| [&l.weight, &l.bias])
    }

    pub(crate) fn parameters_mut(&mut self) -> impl Iterator<Item = &mut Tensor> {
        self.backbone
            .iter_mut()
            .chain(core::iter::once(&mut self.head))
            .flat_map(|l| [&mut l.weight, &mut l.bias])
    }

    /// Mutable access to a single flat parameter value, in
    /// [`Model::parameters`] order. Intended for perturbation-based checks.
    pub fn parameter_value_mut(&mut self, tensor: usize, index: usize) -> &mut f64 {
        let t = self.parameters_mut().nth(tensor).expect("tensor index in range");
        &mut t.data_mut()[index]
    }

    pub fn parameter_count(&self) -> usize {
        self.parameters().map(Tensor::len).sum()
    }

    fn check_input(&self, batch: &Tensor) -> Result<()> {
        let (_, cols) = batch.matrix_dims()?;
        if cols != self.input_dim() {
            bail!(
                Shape,
                "batch has {} columns but the model expects {}",
                cols,
                self.input_dim()
            );
        }
        Ok(())
    }

    /// Backbone output for every row of `batch`.
    pub fn embed(&self, batch: &Tensor) -> Result<Tensor> {
        self.check_input(batch)?;
        let mut act = batch.clone();
        for layer in &self.backbone {
            act = layer.affine(&act)?;
            relu_in_place(&mut act);
        }
        Ok(act)
    }

    pub fn head_logits(&self, embeddings: &Tensor) -> Result<Tensor> {
        self.head.affine(embeddings)
    }

    /// Embeddings and logits for every row of `batch`.
    pub fn forward(&self, batch: &Tensor) -> Result<(Tensor, Tensor)> {
        let emb = self.embed(batch)?;
        let logits = self.head.affine(&emb)?;
        Ok((emb, logits))
    }

    pub fn logits(&self, batch: &Tensor) -> Result<Tensor> {
        Ok(self.forward(batch)?.1)
    }

    /// Forward pass that keeps every layer input for backpropagation.
    pub(crate) fn forward_cached(&self, batch: &Tensor) -> Result<ForwardCache> {
        self.check_input(batch)?;
        let mut acts = Vec::with_capacity(self.backbone.len() + 1);
        acts.push(batch.clone());
        for layer in &self.backbone {
            let mut z = layer.affine(acts.last().expect("non-empty"))?;
            relu_in_place(&mut z);
            acts.push(z);
        }
        let logits = self.head.affine(acts.last().expect("non-empty"))?;
        Ok(ForwardCache { acts, logits })
    }
}

pub(crate) struct ForwardCache {
    /// `acts[0]` is the input; `acts[l + 1]` the rectified output of backbone
    /// layer `l`. The last entry is the embedding.
    pub acts: Vec<Tensor>,
    pub logits: Tensor,
}

impl ForwardCache {
    pub fn embeddings(&self) -> &Tensor {
        self.acts.last().expect("non-empty")
    }
}

fn relu_in_place(t: &mut Tensor) {
    for v in t.data_mut() {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
}
