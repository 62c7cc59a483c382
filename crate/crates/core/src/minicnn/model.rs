use rand::Rng;
use rayon::prelude::*;

use crate::ensembles::RngSeed;
use crate::error::{Error, Result};

use super::adam::{adam_step, AdamState};
use super::loss::bce_loss;
use super::tensor::{
    concat_channels, conv1x1_sigmoid, conv1x1_sigmoid_backward, conv3x3_backward, conv3x3_same, maxpool2x2,
    maxpool2x2_backward, relu_backward_in_place, relu_in_place, split_channels, upsample2x, upsample2x_backward,
    Tensor3,
};
use super::Scalar;

/// Input side length of the shipped pipeline models.
pub const PIPELINE_SIDE: usize = 28;
pub const DEFAULT_BASE_CHANNELS: usize = 16;

const LAYER_COUNT: usize = 11;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum LayerKind {
    Conv3x3Relu,
    Conv1x1Sigmoid,
}

impl LayerKind {
    pub fn tag(self) -> u32 {
        match self {
            LayerKind::Conv3x3Relu => 0,
            LayerKind::Conv1x1Sigmoid => 1,
        }
    }

    pub fn from_tag(tag: u32) -> Option<Self> {
        match tag {
            0 => Some(LayerKind::Conv3x3Relu),
            1 => Some(LayerKind::Conv1x1Sigmoid),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct LayerDesc {
    pub kind: LayerKind,
    pub kh: usize,
    pub kw: usize,
    pub c_in: usize,
    pub c_out: usize,
}

impl LayerDesc {
    fn conv3(c_in: usize, c_out: usize) -> Self {
        LayerDesc {
            kind: LayerKind::Conv3x3Relu,
            kh: 3,
            kw: 3,
            c_in,
            c_out,
        }
    }

    pub fn weight_count(&self) -> usize {
        self.kh * self.kw * self.c_in * self.c_out
    }

    pub fn param_count(&self) -> usize {
        self.weight_count() + self.c_out
    }
}

/// Layer descriptors of the U-Net with base width `base`.
pub fn unet_layers(base: usize) -> Vec<LayerDesc> {
    let b = base;
    vec![
        LayerDesc::conv3(1, b),
        LayerDesc::conv3(b, b),
        LayerDesc::conv3(b, 2 * b),
        LayerDesc::conv3(2 * b, 2 * b),
        LayerDesc::conv3(2 * b, 4 * b),
        LayerDesc::conv3(4 * b, 4 * b),
        LayerDesc::conv3(6 * b, 2 * b),
        LayerDesc::conv3(2 * b, 2 * b),
        LayerDesc::conv3(3 * b, b),
        LayerDesc::conv3(b, b),
        LayerDesc {
            kind: LayerKind::Conv1x1Sigmoid,
            kh: 1,
            kw: 1,
            c_in: b,
            c_out: 1,
        },
    ]
}

/// All weights and biases of one U-Net, stored flat: for each layer its
/// kernel (`[kh][kw][c_in][c_out]`) followed by its biases.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams<T> {
    side: usize,
    layers: Vec<LayerDesc>,
    offsets: Vec<usize>,
    values: Vec<T>,
}

impl<T: Scalar> ModelParams<T> {
    /// Uniform `±sqrt(6 / (fan_in + fan_out))` weights and zero biases.
    pub fn init(side: usize, base: usize, seed: RngSeed) -> Result<Self> {
        let layers = unet_layers(base);
        let mut rng = seed.rng();
        let mut values = Vec::new();
        for layer in &layers {
            let fan_in = (layer.kh * layer.kw * layer.c_in) as f64;
            let fan_out = (layer.kh * layer.kw * layer.c_out) as f64;
            let limit = (6.0 / (fan_in + fan_out)).sqrt();
            values.extend((0..layer.weight_count()).map(|_| T::of(rng.gen_range(-limit..limit))));
            values.extend((0..layer.c_out).map(|_| T::zero()));
        }
        ModelParams::from_parts(side, layers, values)
    }

    /// Validates the shape chain and parameter count.
    pub fn from_parts(side: usize, layers: Vec<LayerDesc>, values: Vec<T>) -> Result<Self> {
        if side == 0 || !side.is_multiple_of(4) {
            return Err(Error::Shape(format!("input side {side} must be a positive multiple of 4")));
        }
        let base = layers.first().map(|l| l.c_out).unwrap_or(0);
        if base == 0 || layers != unet_layers(base) {
            return Err(Error::Shape(format!(
                "layer descriptors do not form the U-Net channel chain (got {} layers)",
                layers.len()
            )));
        }
        let mut offsets = Vec::with_capacity(layers.len());
        let mut total = 0;
        for layer in &layers {
            offsets.push(total);
            total += layer.param_count();
        }
        if values.len() != total {
            return Err(Error::Shape(format!(
                "{} parameter values for an architecture with {total}",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Shape("non-finite parameter".into()));
        }
        Ok(ModelParams {
            side,
            layers,
            offsets,
            values,
        })
    }

    /// Same weights, validated for a different input side.
    pub fn with_side(mut self, side: usize) -> Result<Self> {
        if side == 0 || !side.is_multiple_of(4) {
            return Err(Error::Shape(format!("input side {side} must be a positive multiple of 4")));
        }
        self.side = side;
        Ok(self)
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn base_channels(&self) -> usize {
        self.layers[0].c_out
    }

    pub fn layers(&self) -> &[LayerDesc] {
        &self.layers
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn weights(&self, layer: usize) -> &[T] {
        let start = self.offsets[layer];
        &self.values[start..start + self.layers[layer].weight_count()]
    }

    pub fn bias(&self, layer: usize) -> &[T] {
        let start = self.offsets[layer] + self.layers[layer].weight_count();
        &self.values[start..start + self.layers[layer].c_out]
    }

    /// Flat index range of layer `layer` (weights then biases).
    pub fn layer_range(&self, layer: usize) -> std::ops::Range<usize> {
        let start = self.offsets[layer];
        start..start + self.layers[layer].param_count()
    }

    pub fn cast<U: Scalar>(&self) -> ModelParams<U> {
        ModelParams {
            side: self.side,
            layers: self.layers.clone(),
            offsets: self.offsets.clone(),
            values: self.values.iter().map(|v| U::of(v.as_f64())).collect(),
        }
    }

    fn conv_relu(&self, layer: usize, x: &Tensor3<T>) -> Result<Tensor3<T>> {
        let mut out = conv3x3_same(x, self.weights(layer), self.bias(layer))?;
        relu_in_place(&mut out);
        Ok(out)
    }

    /// Runs the network and keeps every intermediate activation.
    pub fn forward(&self, x: &Tensor3<T>) -> Result<(Tensor3<T>, ForwardCache<T>)> {
        if x.shape() != (self.side, self.side, 1) {
            return Err(Error::Shape(format!(
                "network expects a {s}x{s}x1 input, got {:?}",
                x.shape(),
                s = self.side
            )));
        }
        let mut acts = Vec::with_capacity(LAYER_COUNT - 1);
        acts.push(self.conv_relu(0, x)?);
        acts.push(self.conv_relu(1, &acts[0])?);
        let (pool1, argmax1) = maxpool2x2(&acts[1])?;
        acts.push(self.conv_relu(2, &pool1)?);
        acts.push(self.conv_relu(3, &acts[2])?);
        let (pool2, argmax2) = maxpool2x2(&acts[3])?;
        acts.push(self.conv_relu(4, &pool2)?);
        acts.push(self.conv_relu(5, &acts[4])?);
        let cat2 = concat_channels(&upsample2x(&acts[5]), &acts[3])?;
        acts.push(self.conv_relu(6, &cat2)?);
        acts.push(self.conv_relu(7, &acts[6])?);
        let cat1 = concat_channels(&upsample2x(&acts[7]), &acts[1])?;
        acts.push(self.conv_relu(8, &cat1)?);
        acts.push(self.conv_relu(9, &acts[8])?);
        let out = conv1x1_sigmoid(&acts[9], self.weights(10), self.bias(10)[0])?;
        let cache = ForwardCache {
            side: self.side,
            base: self.base_channels(),
            input: x.clone(),
            acts,
            pool1,
            argmax1,
            pool2,
            argmax2,
            cat2,
            cat1,
            output: out.clone(),
        };
        Ok((out, cache))
    }

    /// Forward pass without keeping the cache.
    pub fn predict(&self, x: &Tensor3<T>) -> Result<Tensor3<T>> {
        self.forward(x).map(|(out, _)| out)
    }

    /// Gradient of the loss with respect to every parameter, given the
    /// gradient `dy` with respect to the network output.
    pub fn backward(&self, cache: &ForwardCache<T>, dy: &Tensor3<T>) -> Result<Vec<T>> {
        if cache.side != self.side || cache.base != self.base_channels() {
            return Err(Error::Shape("forward cache belongs to a different architecture".into()));
        }
        if dy.shape() != cache.output.shape() {
            return Err(Error::Shape(format!(
                "output gradient shape {:?} does not match output {:?}",
                dy.shape(),
                cache.output.shape()
            )));
        }
        let b = self.base_channels();
        let mut grads = vec![T::zero(); self.values.len()];
        let acts = &cache.acts;

        let mut d = {
            let range = self.layer_range(10);
            let (dw, db) = grads[range].split_at_mut(self.layers[10].weight_count());
            conv1x1_sigmoid_backward(&acts[9], self.weights(10), &cache.output, dy, dw, &mut db[0])
        };
        // Up stage at full resolution.
        d = self.conv_relu_backward(9, &acts[8], &acts[9], d, &mut grads, true).expect("input grad");
        let dcat1 = self.conv_relu_backward(8, &cache.cat1, &acts[8], d, &mut grads, true).expect("input grad");
        let (dup1, dskip1) = split_channels(&dcat1, 2 * b);
        d = upsample2x_backward(&dup1);
        // Up stage at half resolution.
        d = self.conv_relu_backward(7, &acts[6], &acts[7], d, &mut grads, true).expect("input grad");
        let dcat2 = self.conv_relu_backward(6, &cache.cat2, &acts[6], d, &mut grads, true).expect("input grad");
        let (dup2, dskip2) = split_channels(&dcat2, 4 * b);
        d = upsample2x_backward(&dup2);
        // Bottleneck.
        d = self.conv_relu_backward(5, &acts[4], &acts[5], d, &mut grads, true).expect("input grad");
        let dpool2 = self.conv_relu_backward(4, &cache.pool2, &acts[4], d, &mut grads, true).expect("input grad");
        let mut d3 = dskip2;
        maxpool2x2_backward(&dpool2, &cache.argmax2, &mut d3);
        // Down stage at half resolution.
        d = self.conv_relu_backward(3, &acts[2], &acts[3], d3, &mut grads, true).expect("input grad");
        let dpool1 = self.conv_relu_backward(2, &cache.pool1, &acts[2], d, &mut grads, true).expect("input grad");
        let mut d1 = dskip1;
        maxpool2x2_backward(&dpool1, &cache.argmax1, &mut d1);
        // Down stage at full resolution.
        d = self.conv_relu_backward(1, &acts[0], &acts[1], d1, &mut grads, true).expect("input grad");
        self.conv_relu_backward(0, &cache.input, &acts[0], d, &mut grads, false);
        Ok(grads)
    }

    fn conv_relu_backward(
        &self,
        layer: usize,
        input: &Tensor3<T>,
        activated: &Tensor3<T>,
        mut dout: Tensor3<T>,
        grads: &mut [T],
        want_input: bool,
    ) -> Option<Tensor3<T>> {
        relu_backward_in_place(activated, &mut dout);
        let range = self.layer_range(layer);
        let (dw, db) = grads[range].split_at_mut(self.layers[layer].weight_count());
        conv3x3_backward(input, self.weights(layer), &dout, dw, db, want_input)
    }
}

/// Intermediate activations of one forward pass.
#[derive(Clone, Debug)]
pub struct ForwardCache<T> {
    side: usize,
    base: usize,
    input: Tensor3<T>,
    acts: Vec<Tensor3<T>>,
    pool1: Tensor3<T>,
    argmax1: Vec<u32>,
    pool2: Tensor3<T>,
    argmax2: Vec<u32>,
    cat2: Tensor3<T>,
    cat1: Tensor3<T>,
    output: Tensor3<T>,
}

impl<T: Scalar> ForwardCache<T> {
    pub fn output(&self) -> &Tensor3<T> {
        &self.output
    }

    /// Post-ReLU output of 3x3 layer `layer` (0..10).
    pub fn activation(&self, layer: usize) -> &Tensor3<T> {
        &self.acts[layer]
    }
}

/// One Adam step on the mean BCE over `batch`. Per-sample passes run in
/// parallel; their gradients are summed in batch order. Returns the mean
/// batch loss.
pub fn train_step<T: Scalar>(
    params: &mut ModelParams<T>,
    state: &mut AdamState<T>,
    batch: &[(&Tensor3<T>, &Tensor3<T>)],
) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::EmptySample);
    }
    let model = &*params;
    let per_sample: Vec<(f64, Vec<T>)> = batch
        .par_iter()
        .map(|(input, target)| {
            let (out, cache) = model.forward(input)?;
            let (loss, dy) = bce_loss(&out, target)?;
            Ok((loss, model.backward(&cache, &dy)?))
        })
        .collect::<Result<_>>()?;

    let scale = T::of(1.0 / batch.len() as f64);
    let mut grads = vec![T::zero(); params.len()];
    let mut loss = 0.0;
    for (l, g) in &per_sample {
        loss += l;
        for (acc, &v) in grads.iter_mut().zip(g) {
            *acc = *acc + v;
        }
    }
    for g in &mut grads {
        *g = *g * scale;
    }
    adam_step(params.values_mut(), &grads, state)?;
    Ok(loss / batch.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model(side: usize, base: usize) -> ModelParams<f64> {
        ModelParams::init(side, base, RngSeed::new(3, 0)).unwrap()
    }

    #[test]
    fn channel_chain_doubles() {
        let layers = unet_layers(16);
        let widths: Vec<usize> = layers.iter().map(|l| l.c_out).collect();
        assert_eq!(widths, vec![16, 16, 32, 32, 64, 64, 32, 32, 16, 16, 1]);
        assert_eq!(layers[6].c_in, 64 + 32);
        assert_eq!(layers[8].c_in, 32 + 16);
    }

    #[test]
    fn forward_shape_and_range() {
        let params = ModelParams::<f32>::init(PIPELINE_SIDE, DEFAULT_BASE_CHANNELS, RngSeed::new(1, 0)).unwrap();
        let x = Tensor3::from_fn(28, 28, 1, |y, xx, _| ((y * 28 + xx) % 11) as f32 / 10.0);
        let y = params.predict(&x).unwrap();
        assert_eq!(y.shape(), (28, 28, 1));
        assert!(y.data().iter().all(|&v| v > 0.0 && v < 1.0));
        assert_eq!(params.predict(&x).unwrap(), y);
        assert!(params.predict(&Tensor3::zeros(28, 28, 2)).is_err());
        assert!(params.predict(&Tensor3::zeros(24, 24, 1)).is_err());
    }

    #[test]
    fn from_parts_rejects_bad_chains() {
        let p = model(8, 4);
        let mut layers = p.layers().to_vec();
        layers[6].c_in = 20;
        assert!(ModelParams::from_parts(8, layers, p.values().to_vec()).is_err());
        assert!(ModelParams::from_parts(8, p.layers().to_vec(), vec![0.0; 3]).is_err());
        assert!(ModelParams::from_parts(6, p.layers().to_vec(), p.values().to_vec()).is_err());
    }

    #[test]
    fn zero_output_gradient_gives_zero_parameter_gradient() {
        let p = model(8, 4);
        let x = Tensor3::from_fn(8, 8, 1, |y, xx, _| ((y + 2 * xx) % 5) as f64 / 4.0);
        let (out, cache) = p.forward(&x).unwrap();
        let g = p.backward(&cache, &Tensor3::zeros(8, 8, 1)).unwrap();
        assert!(g.iter().all(|&v| v == 0.0));
        assert_eq!(out.shape(), (8, 8, 1));
    }

    #[test]
    fn dead_relu_blocks_upstream_gradient() {
        let mut p = model(8, 4);
        // Push every pre-activation of layer 0 below zero: its weights and
        // bias then receive no gradient, and neither does anything feeding it.
        let range = p.layer_range(0);
        let nw = p.layers()[0].weight_count();
        for (k, v) in p.values_mut()[range].iter_mut().enumerate() {
            *v = if k < nw { 0.0 } else { -1.0 };
        }
        let x = Tensor3::from_fn(8, 8, 1, |y, xx, _| ((y * xx) % 3) as f64 / 2.0);
        let (out, cache) = p.forward(&x).unwrap();
        let target = Tensor3::filled(8, 8, 1, 1.0);
        let (_, dy) = bce_loss(&out, &target).unwrap();
        let g = p.backward(&cache, &dy).unwrap();
        assert!(g[p.layer_range(0)].iter().all(|&v| v == 0.0));
        assert!(g[p.layer_range(1)].iter().take(p.layers()[1].weight_count()).all(|&v| v == 0.0));
        assert!(g[p.layer_range(10)].iter().any(|&v| v != 0.0));
    }

    #[test]
    fn backward_rejects_foreign_cache() {
        let small = model(8, 4);
        let other = model(8, 2);
        let x = Tensor3::zeros(8, 8, 1);
        let (_, cache) = small.forward(&x).unwrap();
        assert!(other.backward(&cache, &Tensor3::zeros(8, 8, 1)).is_err());
        assert!(small.backward(&cache, &Tensor3::zeros(4, 4, 1)).is_err());
    }
}
