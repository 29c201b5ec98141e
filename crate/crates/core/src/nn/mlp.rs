use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};
use rand::Rng;

use crate::error::{Error, Result};

/// Nonlinearity applied after every hidden layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Tanh,
}

/// Nonlinearity applied after the final layer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OutputActivation {
    Identity,
    Tanh,
    /// `bound * tanh(z)`, used by actors to respect an action bound.
    ScaledTanh(f64),
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Tanh => z.tanh(),
        }
    }

    fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => {
                let t = z.tanh();
                1.0 - t * t
            }
        }
    }
}

impl OutputActivation {
    fn apply(self, z: f64) -> f64 {
        match self {
            OutputActivation::Identity => z,
            OutputActivation::Tanh => z.tanh(),
            OutputActivation::ScaledTanh(bound) => bound * z.tanh(),
        }
    }

    fn derivative(self, z: f64) -> f64 {
        match self {
            OutputActivation::Identity => 1.0,
            OutputActivation::Tanh => {
                let t = z.tanh();
                1.0 - t * t
            }
            OutputActivation::ScaledTanh(bound) => {
                let t = z.tanh();
                bound * (1.0 - t * t)
            }
        }
    }
}

/// One affine layer. `weights` is `(out, in)`, so a batch `x` of shape
/// `(n, in)` maps to `x · weightsᵀ + bias`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Dense {
    pub fn zeros(fan_in: usize, fan_out: usize) -> Self {
        Dense { weights: Array2::zeros((fan_out, fan_in)), bias: Array1::zeros(fan_out) }
    }

    pub fn fan_in(&self) -> usize {
        self.weights.ncols()
    }

    pub fn fan_out(&self) -> usize {
        self.weights.nrows()
    }

    fn param_count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }
}

/// A dense feed-forward network over `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    layers: Vec<Dense>,
    hidden: Activation,
    output: OutputActivation,
}

#[derive(Debug, Clone, Copy)]
enum Slot {
    Weight(usize, usize),
    Bias(usize),
}

/// Activations recorded during a batched forward pass, consumed by
/// [`Mlp::backward_cached`].
#[derive(Debug, Clone)]
pub struct ForwardCache {
    inputs: Vec<Array2<f64>>,
    pre_activations: Vec<Array2<f64>>,
    output: Array2<f64>,
}

impl ForwardCache {
    pub fn output(&self) -> &Array2<f64> {
        &self.output
    }

    pub fn batch_size(&self) -> usize {
        self.output.nrows()
    }

    /// Pre-activation values of every layer, input side first.
    pub fn pre_activations(&self) -> &[Array2<f64>] {
        &self.pre_activations
    }
}

/// Result of reverse-mode differentiation of `Σ_rows output · output_grad`.
#[derive(Debug, Clone)]
pub struct Backprop {
    pub grads: GradientBundle,
    /// Gradient with respect to the network input, one row per sample.
    pub input_grad: Array2<f64>,
}

/// Per-parameter gradients laid out exactly like the network that produced
/// them.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientBundle {
    pub layers: Vec<Dense>,
}

impl GradientBundle {
    pub fn zeros_like(net: &Mlp) -> Self {
        GradientBundle { layers: net.layers.iter().map(|l| Dense::zeros(l.fan_in(), l.fan_out())).collect() }
    }

    pub fn scale(&mut self, factor: f64) {
        for layer in &mut self.layers {
            layer.weights.mapv_inplace(|v| v * factor);
            layer.bias.mapv_inplace(|v| v * factor);
        }
    }

    pub fn add_assign(&mut self, other: &GradientBundle) -> Result<()> {
        check_same_shape(&self.layers, &other.layers, "gradient accumulation")?;
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            a.weights += &b.weights;
            a.bias += &b.bias;
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.iter().all(f64::is_finite)
    }

    pub fn max_abs(&self) -> f64 {
        self.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Gradients in parameter order: per layer, weights row-major then bias.
    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        self.layers.iter().flat_map(|l| l.weights.iter().chain(l.bias.iter()).copied())
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.iter().collect()
    }
}

pub(crate) fn check_same_shape(a: &[Dense], b: &[Dense], context: &'static str) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::shape(context, a.len(), b.len()));
    }
    for (x, y) in a.iter().zip(b) {
        if x.weights.dim() != y.weights.dim() {
            return Err(Error::shape(context, x.weights.len(), y.weights.len()));
        }
        if x.bias.len() != y.bias.len() {
            return Err(Error::shape(context, x.bias.len(), y.bias.len()));
        }
    }
    Ok(())
}

impl Mlp {
    /// Build a network with layer widths `widths` (input first), drawing every
    /// weight and bias uniformly from `±1/√fan_in`.
    pub fn new<R: Rng + ?Sized>(
        widths: &[usize],
        hidden: Activation,
        output: OutputActivation,
        rng: &mut R,
    ) -> Result<Self> {
        let mut net = Mlp::zeros(widths, hidden, output)?;
        for layer in &mut net.layers {
            let limit = 1.0 / (layer.fan_in() as f64).sqrt();
            layer.weights.mapv_inplace(|_| rng.random_range(-limit..=limit));
            layer.bias.mapv_inplace(|_| rng.random_range(-limit..=limit));
        }
        Ok(net)
    }

    pub fn zeros(widths: &[usize], hidden: Activation, output: OutputActivation) -> Result<Self> {
        if widths.len() < 2 {
            return Err(Error::invalid("layer widths", "need at least an input and an output width"));
        }
        if let Some(&w) = widths.iter().find(|&&w| w == 0) {
            return Err(Error::invalid("layer widths", format!("width {w} is not positive")));
        }
        let layers = widths.windows(2).map(|w| Dense::zeros(w[0], w[1])).collect();
        Mlp::from_layers(layers, hidden, output)
    }

    pub fn from_layers(layers: Vec<Dense>, hidden: Activation, output: OutputActivation) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::invalid("layers", "network needs at least one layer"));
        }
        for layer in &layers {
            if layer.bias.len() != layer.fan_out() {
                return Err(Error::shape("layer bias", layer.fan_out(), layer.bias.len()));
            }
        }
        for pair in layers.windows(2) {
            if pair[0].fan_out() != pair[1].fan_in() {
                return Err(Error::shape("consecutive layers", pair[0].fan_out(), pair[1].fan_in()));
            }
        }
        if let OutputActivation::ScaledTanh(b) = output {
            if !(b.is_finite() && b > 0.0) {
                return Err(Error::invalid("output bound", format!("{b} is not positive")));
            }
        }
        Ok(Mlp { layers, hidden, output })
    }

    pub fn widths(&self) -> Vec<usize> {
        std::iter::once(self.input_width()).chain(self.layers.iter().map(Dense::fan_out)).collect()
    }

    pub fn input_width(&self) -> usize {
        self.layers[0].fan_in()
    }

    pub fn output_width(&self) -> usize {
        self.layers[self.layers.len() - 1].fan_out()
    }

    pub fn hidden_activation(&self) -> Activation {
        self.hidden
    }

    pub fn output_activation(&self) -> OutputActivation {
        self.output
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub(crate) fn layers_mut(&mut self) -> &mut [Dense] {
        &mut self.layers
    }

    /// Multiply the final layer's weights and bias by `factor`.
    pub fn scale_output_layer(&mut self, factor: f64) {
        let last = self.layers.last_mut().expect("non-empty by construction");
        last.weights.mapv_inplace(|v| v * factor);
        last.bias.mapv_inplace(|v| v * factor);
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(Dense::param_count).sum()
    }

    pub fn params(&self) -> impl Iterator<Item = f64> + '_ {
        self.layers.iter().flat_map(|l| l.weights.iter().chain(l.bias.iter()).copied())
    }

    fn locate(&self, mut index: usize) -> (usize, Slot) {
        for (k, layer) in self.layers.iter().enumerate() {
            let nw = layer.weights.len();
            if index < nw {
                let cols = layer.fan_in();
                return (k, Slot::Weight(index / cols, index % cols));
            }
            index -= nw;
            if index < layer.bias.len() {
                return (k, Slot::Bias(index));
            }
            index -= layer.bias.len();
        }
        panic!("parameter index out of range");
    }

    /// Read parameter `index` in flattened order (per layer: weights
    /// row-major, then bias).
    pub fn param(&self, index: usize) -> f64 {
        match self.locate(index) {
            (k, Slot::Weight(r, c)) => self.layers[k].weights[[r, c]],
            (k, Slot::Bias(j)) => self.layers[k].bias[j],
        }
    }

    pub fn set_param(&mut self, index: usize, value: f64) {
        match self.locate(index) {
            (k, Slot::Weight(r, c)) => self.layers[k].weights[[r, c]] = value,
            (k, Slot::Bias(j)) => self.layers[k].bias[j] = value,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.params().all(f64::is_finite)
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        let x = ArrayView2::from_shape((1, input.len()), input).expect("a slice is always a valid single row");
        Ok(self.forward_batch(x)?.into_raw_vec_and_offset().0)
    }

    /// Forward pass over a batch with one sample per row.
    pub fn forward_batch(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check_input(x.ncols())?;
        let last = self.layers.len() - 1;
        let mut h = x.to_owned();
        for (i, layer) in self.layers.iter().enumerate() {
            let mut z = h.dot(&layer.weights.t());
            z += &layer.bias;
            if i == last {
                let act = self.output;
                z.mapv_inplace(|v| act.apply(v));
            } else {
                let act = self.hidden;
                z.mapv_inplace(|v| act.apply(v));
            }
            h = z;
        }
        Ok(h)
    }

    pub fn forward_cached(&self, x: ArrayView2<f64>) -> Result<ForwardCache> {
        self.check_input(x.ncols())?;
        let last = self.layers.len() - 1;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre_activations = Vec::with_capacity(self.layers.len());
        let mut h = x.to_owned();
        for (i, layer) in self.layers.iter().enumerate() {
            let mut z = h.dot(&layer.weights.t());
            z += &layer.bias;
            let a = if i == last {
                let act = self.output;
                z.mapv(|v| act.apply(v))
            } else {
                let act = self.hidden;
                z.mapv(|v| act.apply(v))
            };
            inputs.push(h);
            pre_activations.push(z);
            h = a;
        }
        Ok(ForwardCache { inputs, pre_activations, output: h })
    }

    /// Gradient of `output · output_grad` for a single sample.
    pub fn backward(&self, input: &[f64], output_grad: &[f64]) -> Result<Backprop> {
        let x = ArrayView2::from_shape((1, input.len()), input).expect("a slice is always a valid single row");
        let g =
            ArrayView2::from_shape((1, output_grad.len()), output_grad).expect("a slice is always a valid single row");
        let cache = self.forward_cached(x)?;
        self.backward_cached(&cache, g)
    }

    /// Gradient of `Σ_rows output_row · output_grad_row` with respect to every
    /// parameter and to the input.
    pub fn backward_cached(&self, cache: &ForwardCache, output_grad: ArrayView2<f64>) -> Result<Backprop> {
        if output_grad.ncols() != self.output_width() {
            return Err(Error::shape("output gradient width", self.output_width(), output_grad.ncols()));
        }
        if output_grad.nrows() != cache.batch_size() {
            return Err(Error::shape("output gradient rows", cache.batch_size(), output_grad.nrows()));
        }
        let last = self.layers.len() - 1;
        let mut grads = Vec::with_capacity(self.layers.len());
        let mut upstream = output_grad.to_owned();
        for i in (0..self.layers.len()).rev() {
            let layer = &self.layers[i];
            let pre = &cache.pre_activations[i];
            let mut delta = upstream;
            if i == last {
                let act = self.output;
                Zip::from(&mut delta).and(pre).for_each(|d, &z| *d *= act.derivative(z));
            } else {
                let act = self.hidden;
                Zip::from(&mut delta).and(pre).for_each(|d, &z| *d *= act.derivative(z));
            }
            let weights = delta.t().dot(&cache.inputs[i]);
            let bias = delta.sum_axis(Axis(0));
            upstream = delta.dot(&layer.weights);
            grads.push(Dense { weights, bias });
        }
        grads.reverse();
        Ok(Backprop { grads: GradientBundle { layers: grads }, input_grad: upstream })
    }

    fn check_input(&self, width: usize) -> Result<()> {
        if width != self.input_width() {
            return Err(Error::shape("network input", self.input_width(), width));
        }
        Ok(())
    }
}
