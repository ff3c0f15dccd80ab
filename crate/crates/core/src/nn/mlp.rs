use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, Matrix};
use crate::rng::rng_for;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitScheme {
    /// Uniform with variance `gain² / fan_in`.
    FanInUniform,
    /// Gaussian with variance `gain² / fan_in`.
    FanInGaussian,
}

fn default_true() -> bool {
    true
}

/// Topology and initialization of a fully connected network.
///
/// The activation applies to hidden layers only; the output layer is affine.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MlpConfig {
    pub layer_widths: Vec<usize>,
    pub activation: Activation,
    pub init_scheme: InitScheme,
    pub init_gain: f64,
    pub seed: u64,
    #[serde(default = "default_true")]
    pub bias: bool,
}

impl MlpConfig {
    /// ReLU network with gaussian fan-in initialization and gain √2.
    pub fn relu(layer_widths: Vec<usize>, seed: u64) -> Self {
        MlpConfig {
            layer_widths,
            activation: Activation::Relu,
            init_scheme: InitScheme::FanInGaussian,
            init_gain: std::f64::consts::SQRT_2,
            seed,
            bias: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.layer_widths.len() < 2 {
            return Err(Error::Config(format!(
                "layer_widths needs at least 2 entries, got {}",
                self.layer_widths.len()
            )));
        }
        if let Some(i) = self.layer_widths.iter().position(|&w| w == 0) {
            return Err(Error::Config(format!("layer_widths[{i}] is 0")));
        }
        if !(self.init_gain.is_finite() && self.init_gain >= 0.0) {
            return Err(Error::Config(format!(
                "init_gain must be finite and >= 0, got {}",
                self.init_gain
            )));
        }
        Ok(())
    }

    pub fn input_dim(&self) -> usize {
        self.layer_widths[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_widths.last().expect("validated topology")
    }

    pub fn num_hidden_layers(&self) -> usize {
        self.layer_widths.len().saturating_sub(2)
    }

    pub fn param_count(&self) -> usize {
        self.layer_widths
            .windows(2)
            .map(|w| w[0] * w[1] + if self.bias { w[1] } else { 0 })
            .sum()
    }

    pub(crate) fn layers(&self) -> Vec<LayerShape> {
        let mut offset = 0;
        self.layer_widths
            .windows(2)
            .map(|w| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let weights = offset;
                offset += fan_in * fan_out;
                let bias = if self.bias {
                    let b = offset;
                    offset += fan_out;
                    Some(b)
                } else {
                    None
                };
                LayerShape {
                    fan_in,
                    fan_out,
                    weights,
                    bias,
                }
            })
            .collect()
    }
}

/// Location of one affine layer inside the flat parameter vector.
/// Weights are stored row-major as `fan_out x fan_in`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct LayerShape {
    pub fan_in: usize,
    pub fan_out: usize,
    pub weights: usize,
    pub bias: Option<usize>,
}

impl LayerShape {
    #[inline]
    pub fn weight_row<'a>(&self, params: &'a [f64], o: usize) -> &'a [f64] {
        let start = self.weights + o * self.fan_in;
        &params[start..start + self.fan_in]
    }

    #[inline]
    pub fn bias_at(&self, params: &[f64], o: usize) -> f64 {
        self.bias.map_or(0.0, |b| params[b + o])
    }
}

/// Flat parameter vector together with the topology that gives it meaning.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelState {
    params: Vec<f64>,
    topology: MlpConfig,
}

impl ModelState {
    pub fn from_params(topology: MlpConfig, params: Vec<f64>) -> Result<Self> {
        topology.validate()?;
        let expected = topology.param_count();
        if params.len() != expected {
            return Err(Error::Shape(format!(
                "topology {:?} needs {expected} parameters, got {}",
                topology.layer_widths,
                params.len()
            )));
        }
        Ok(ModelState { params, topology })
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn topology(&self) -> &MlpConfig {
        &self.topology
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    pub(crate) fn same_topology(&self, other: &ModelState) -> bool {
        self.topology.layer_widths == other.topology.layer_widths
            && self.topology.activation == other.topology.activation
            && self.topology.bias == other.topology.bias
    }
}

pub fn init_mlp(config: &MlpConfig) -> Result<ModelState> {
    config.validate()?;
    let mut rng = rng_for(config.seed, 0x1417);
    let mut params = vec![0.0; config.param_count()];
    for layer in config.layers() {
        let scale = config.init_gain / (layer.fan_in as f64).sqrt();
        let w = &mut params[layer.weights..layer.weights + layer.fan_in * layer.fan_out];
        match config.init_scheme {
            InitScheme::FanInGaussian => {
                for v in w.iter_mut() {
                    let z: f64 = rng.sample(StandardNormal);
                    *v = scale * z;
                }
            }
            InitScheme::FanInUniform => {
                let bound = 3f64.sqrt();
                for v in w.iter_mut() {
                    *v = scale * rng.random_range(-bound..bound);
                }
            }
        }
    }
    ModelState::from_params(config.clone(), params)
}

/// Pre- and post-activation values of every layer for one batch.
/// `post[0]` is the input batch; `pre[l]`/`post[l + 1]` belong to layer `l`.
pub(crate) struct ForwardCache {
    pub pre: Vec<Matrix>,
    pub post: Vec<Matrix>,
}

impl ForwardCache {
    pub fn output(&self) -> &Matrix {
        self.post.last().expect("non-empty cache")
    }

    /// Post-activation of the last hidden layer.
    pub fn last_hidden(&self) -> Option<&Matrix> {
        let n = self.post.len();
        (n >= 3).then(|| &self.post[n - 2])
    }
}

fn check_inputs(model: &ModelState, inputs: &Matrix) -> Result<()> {
    let d = model.topology.input_dim();
    if inputs.cols() != d {
        return Err(Error::Shape(format!(
            "inputs have {} columns, network expects {d}",
            inputs.cols()
        )));
    }
    Ok(())
}

#[inline]
fn activate(act: Activation, z: f64) -> f64 {
    match act {
        Activation::Relu => z.max(0.0),
        Activation::Linear => z,
    }
}

pub(crate) fn forward_cached(model: &ModelState, inputs: &Matrix) -> Result<ForwardCache> {
    check_inputs(model, inputs)?;
    let layers = model.topology.layers();
    let last = layers.len() - 1;
    let act = model.topology.activation;
    let n = inputs.rows();
    let mut pre = Vec::with_capacity(layers.len());
    let mut post = Vec::with_capacity(layers.len() + 1);
    post.push(inputs.clone());
    for (l, layer) in layers.iter().enumerate() {
        let a = &post[l];
        let mut z = Matrix::zeros(n, layer.fan_out);
        for b in 0..n {
            let x = a.row(b);
            let zr = z.row_mut(b);
            for (o, zo) in zr.iter_mut().enumerate() {
                *zo = dot(layer.weight_row(&model.params, o), x) + layer.bias_at(&model.params, o);
            }
        }
        let h = if l == last {
            z.clone()
        } else {
            let mut h = z.clone();
            h.as_mut_slice().iter_mut().for_each(|v| *v = activate(act, *v));
            h
        };
        pre.push(z);
        post.push(h);
    }
    Ok(ForwardCache { pre, post })
}

pub fn forward(model: &ModelState, inputs: &Matrix) -> Result<Matrix> {
    let mut cache = forward_cached(model, inputs)?;
    Ok(cache.post.pop().expect("output layer"))
}

/// Accumulates `Σ_b seedᵀ ∂f(x_b)/∂θ` into `grad`, where `seed` holds one row
/// of output-space cotangents per batch example.
pub(crate) fn backward(model: &ModelState, cache: &ForwardCache, seed: &Matrix, grad: &mut [f64]) {
    let layers = model.topology.layers();
    let act = model.topology.activation;
    let n = seed.rows();
    let mut delta = seed.clone();
    for l in (0..layers.len()).rev() {
        let layer = layers[l];
        let a_prev = &cache.post[l];
        for b in 0..n {
            let d = delta.row(b);
            let x = a_prev.row(b);
            for (o, &dv) in d.iter().enumerate() {
                if dv == 0.0 {
                    continue;
                }
                let start = layer.weights + o * layer.fan_in;
                for (g, &xi) in grad[start..start + layer.fan_in].iter_mut().zip(x) {
                    *g += dv * xi;
                }
                if let Some(bo) = layer.bias {
                    grad[bo + o] += dv;
                }
            }
        }
        if l == 0 {
            break;
        }
        let z_prev = &cache.pre[l - 1];
        let mut next = Matrix::zeros(n, layer.fan_in);
        for b in 0..n {
            let d = delta.row(b);
            let out = next.row_mut(b);
            for (o, &dv) in d.iter().enumerate() {
                if dv == 0.0 {
                    continue;
                }
                for (t, &w) in out.iter_mut().zip(layer.weight_row(&model.params, o)) {
                    *t += dv * w;
                }
            }
            if act == Activation::Relu {
                for (t, &z) in out.iter_mut().zip(z_prev.row(b)) {
                    if z <= 0.0 {
                        *t = 0.0;
                    }
                }
            }
        }
        delta = next;
    }
}

/// Parameter Jacobian of every output at a single input, as a `k x p` matrix.
pub fn jacobian_features(model: &ModelState, input: &[f64]) -> Result<Matrix> {
    let x = Matrix::from_vec(1, input.len(), input.to_vec())?;
    let cache = forward_cached(model, &x)?;
    let k = model.topology.output_dim();
    let p = model.param_count();
    let mut jac = Matrix::zeros(k, p);
    for j in 0..k {
        let mut seed = Matrix::zeros(1, k);
        seed.set(0, j, 1.0);
        backward(model, &cache, &seed, jac.row_mut(j));
    }
    Ok(jac)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn param_count_matches_topology_formula() {
        let cfg = MlpConfig::relu(vec![2, 8, 8, 8, 1], 0);
        // 2·8+8 + 8·8+8 + 8·8+8 + 8·1+1
        assert_eq!(cfg.param_count(), 177);
        assert_eq!(init_mlp(&cfg).unwrap().param_count(), 177);
    }

    #[test]
    fn init_is_deterministic() {
        let cfg = MlpConfig::relu(vec![3, 5, 2], 42);
        let a = init_mlp(&cfg).unwrap();
        let b = init_mlp(&cfg).unwrap();
        assert_eq!(a.params(), b.params());
        let other = init_mlp(&MlpConfig { seed: 43, ..cfg }).unwrap();
        assert_ne!(a.params(), other.params());
    }

    #[test]
    fn zero_gain_gives_zero_weights_and_biases_start_at_zero() {
        for scheme in [InitScheme::FanInGaussian, InitScheme::FanInUniform] {
            let cfg = MlpConfig {
                init_gain: 0.0,
                init_scheme: scheme,
                ..MlpConfig::relu(vec![2, 4, 1], 1)
            };
            let m = init_mlp(&cfg).unwrap();
            assert!(m.params().iter().all(|&v| v == 0.0));
        }
        let cfg = MlpConfig::relu(vec![2, 4, 1], 1);
        let m = init_mlp(&cfg).unwrap();
        for layer in cfg.layers() {
            let b = layer.bias.unwrap();
            assert!(m.params()[b..b + layer.fan_out].iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn init_scale_follows_fan_in() {
        let cfg = MlpConfig {
            init_gain: 2.0,
            init_scheme: InitScheme::FanInUniform,
            ..MlpConfig::relu(vec![400, 300, 1], 5)
        };
        let m = init_mlp(&cfg).unwrap();
        let w = &m.params()[..400 * 300];
        let var = w.iter().map(|v| v * v).sum::<f64>() / w.len() as f64;
        assert!((var - 4.0 / 400.0).abs() < 0.05 * 4.0 / 400.0, "var {var}");
        let bound = 2.0 * 3f64.sqrt() / 20.0;
        assert!(w.iter().all(|v| v.abs() <= bound));
    }

    #[test]
    fn invalid_topologies_rejected() {
        assert!(matches!(init_mlp(&MlpConfig::relu(vec![3], 0)), Err(Error::Config(_))));
        assert!(matches!(
            init_mlp(&MlpConfig::relu(vec![3, 0, 1], 0)),
            Err(Error::Config(_))
        ));
        let neg = MlpConfig {
            init_gain: -1.0,
            ..MlpConfig::relu(vec![1, 1], 0)
        };
        assert!(init_mlp(&neg).is_err());
    }

    #[test]
    fn zero_weights_linear_net_outputs_zero() {
        let cfg = MlpConfig {
            activation: Activation::Linear,
            init_gain: 0.0,
            ..MlpConfig::relu(vec![3, 4, 2], 0)
        };
        let m = init_mlp(&cfg).unwrap();
        let x = Matrix::from_rows(&[[1.0, -2.0, 3.0], [0.5, 0.5, 0.5]]).unwrap();
        let out = forward(&m, &x).unwrap();
        assert_eq!(out.rows(), 2);
        assert_eq!(out.cols(), 2);
        assert!(out.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn single_layer_is_x_w_transpose() {
        let cfg = MlpConfig {
            bias: true,
            ..MlpConfig::relu(vec![3, 2], 0)
        };
        // W = [[1,2,3],[-1,0,4]], b = 0
        let m = ModelState::from_params(cfg, vec![1.0, 2.0, 3.0, -1.0, 0.0, 4.0, 0.0, 0.0]).unwrap();
        let x = Matrix::from_rows(&[[1.0, 1.0, 1.0], [2.0, -1.0, 0.5]]).unwrap();
        let out = forward(&m, &x).unwrap();
        assert_eq!(out.row(0), &[6.0, 3.0]);
        assert_eq!(out.row(1), &[1.5, 0.0]);
    }

    #[test]
    fn hand_built_relu_net_forward() {
        // hidden: W1 = [[1, 2], [-1, 1]], b1 = [0.5, 0]; out: W2 = [3, -2], b2 = 0.25
        // x = (1, -1): z1 = (1 - 2 + 0.5, -1 - 1) = (-0.5, -2) -> relu (0, 0) -> out 0.25
        // x = (2, 1):  z1 = (4.5, -1) -> (4.5, 0) -> 13.5 + 0.25 = 13.75
        let cfg = MlpConfig::relu(vec![2, 2, 1], 0);
        let params = vec![1.0, 2.0, -1.0, 1.0, 0.5, 0.0, 3.0, -2.0, 0.25];
        let m = ModelState::from_params(cfg, params).unwrap();
        let x = Matrix::from_rows(&[[1.0, -1.0], [2.0, 1.0]]).unwrap();
        let out = forward(&m, &x).unwrap();
        assert_eq!(out.as_slice(), &[0.25, 13.75]);
    }

    #[test]
    fn forward_rejects_wrong_width() {
        let m = init_mlp(&MlpConfig::relu(vec![2, 3, 1], 0)).unwrap();
        let x = Matrix::zeros(4, 3);
        assert!(matches!(forward(&m, &x), Err(Error::Shape(_))));
    }

    #[test]
    fn single_layer_jacobian_is_input_and_ones() {
        let cfg = MlpConfig::relu(vec![3, 2], 9);
        let m = init_mlp(&cfg).unwrap();
        let x = [0.5, -2.0, 3.0];
        let jac = jacobian_features(&m, &x).unwrap();
        // row j: d f_j / d W[j, :] = x, d f_j / d b_j = 1, zeros elsewhere
        assert_eq!(jac.row(0), &[0.5, -2.0, 3.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
        assert_eq!(jac.row(1), &[0.0, 0.0, 0.0, 0.5, -2.0, 3.0, 0.0, 1.0]);
    }

    #[test]
    fn dead_relu_units_leave_only_output_bias_path() {
        // all first-layer preactivations negative at x = (1, 1)
        let cfg = MlpConfig::relu(vec![2, 2, 1], 0);
        let params = vec![-1.0, -1.0, -2.0, 0.5, 0.0, 0.0, 3.0, -2.0, 0.1];
        let m = ModelState::from_params(cfg, params).unwrap();
        let jac = jacobian_features(&m, &[1.0, 1.0]).unwrap();
        let mut expected = vec![0.0; 9];
        expected[8] = 1.0;
        assert_eq!(jac.row(0), expected.as_slice());
    }
}
