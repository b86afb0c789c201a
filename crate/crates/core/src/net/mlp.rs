use crate::error::{check_len, HdaError, Result};
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
    Identity,
}

impl Activation {
    #[inline]
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Tanh => x.tanh(),
            Activation::Identity => x,
        }
    }

    /// Derivative expressed through the activation output.
    #[inline]
    fn slope(self, y: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - y * y,
            Activation::Identity => 1.0,
        }
    }

    pub(crate) fn tag(self) -> u8 {
        match self {
            Activation::Tanh => 1,
            Activation::Identity => 0,
        }
    }

    pub(crate) fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            0 => Some(Activation::Identity),
            1 => Some(Activation::Tanh),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelStats {
    pub mean: f64,
    pub std: f64,
}

impl ChannelStats {
    pub const IDENTITY: ChannelStats = ChannelStats {
        mean: 0.0,
        std: 1.0,
    };
}

/// Per-channel standardization. Input statistics cover the leading state
/// channels only; trailing input channels (extra predictors) pass through.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct NormStats {
    pub input: Vec<ChannelStats>,
    pub output: Vec<ChannelStats>,
}

impl NormStats {
    pub fn identity(n_state_inputs: usize, n_outputs: usize) -> Self {
        NormStats {
            input: vec![ChannelStats::IDENTITY; n_state_inputs],
            output: vec![ChannelStats::IDENTITY; n_outputs],
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (channel, s) in self.input.iter().chain(&self.output).enumerate() {
            if !(s.std > 0.0) || !s.std.is_finite() || !s.mean.is_finite() {
                return Err(HdaError::ZeroStd { channel });
            }
        }
        Ok(())
    }

    pub fn normalize(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .enumerate()
            .map(|(i, &v)| match self.input.get(i) {
                Some(s) => (v - s.mean) / s.std,
                None => v,
            })
            .collect()
    }

    pub fn denormalize_input(&self, z: &[f64]) -> Vec<f64> {
        z.iter()
            .enumerate()
            .map(|(i, &v)| match self.input.get(i) {
                Some(s) => v * s.std + s.mean,
                None => v,
            })
            .collect()
    }

    pub fn normalize_output(&self, y: &[f64]) -> Vec<f64> {
        y.iter()
            .enumerate()
            .map(|(i, &v)| {
                let s = self.output_stats(i);
                (v - s.mean) / s.std
            })
            .collect()
    }

    pub fn denormalize(&self, z: &[f64]) -> Vec<f64> {
        z.iter()
            .enumerate()
            .map(|(i, &v)| {
                let s = self.output_stats(i);
                v * s.std + s.mean
            })
            .collect()
    }

    /// Output channels without stats pass through unchanged.
    pub fn output_stats(&self, i: usize) -> ChannelStats {
        self.output.get(i).copied().unwrap_or(ChannelStats::IDENTITY)
    }
}

/// Exact scalar parameter count of a fully connected net.
pub fn param_count(dims: &[usize]) -> usize {
    dims.windows(2).map(|d| d[0] * d[1] + d[1]).sum()
}

/// Inverted-dropout scale factors for every hidden unit: `0` for dropped
/// units, `1 / (1 - rate)` for survivors.
#[derive(Debug, Clone, PartialEq)]
pub struct DropoutMask {
    pub scales: Vec<Vec<f64>>,
}

impl DropoutMask {
    pub fn sample<R: Rng + ?Sized>(dims: &[usize], rate: f64, rng: &mut R) -> Self {
        let keep = 1.0 / (1.0 - rate);
        let hidden = &dims[1..dims.len() - 1];
        DropoutMask {
            scales: hidden
                .iter()
                .map(|&n| {
                    (0..n)
                        .map(|_| if rng.random::<f64>() < rate { 0.0 } else { keep })
                        .collect()
                })
                .collect(),
        }
    }
}

/// Weights, biases and normalization statistics of the column network.
///
/// Parameters live in one flat vector, layer by layer: the `out x in`
/// row-major weight matrix followed by the `out` biases.
#[derive(Debug, Clone, PartialEq)]
pub struct NetParams {
    dims: Vec<usize>,
    activations: Vec<Activation>,
    pub params: Vec<f64>,
    pub norm: NormStats,
}

struct Trace {
    /// Inputs fed to each layer (after dropout), plus the final output.
    inputs: Vec<Vec<f64>>,
    /// Activation outputs before dropout, per layer.
    outputs: Vec<Vec<f64>>,
}

impl NetParams {
    /// Zero parameters, tanh hidden layers, linear output, identity normalization.
    pub fn zeros(dims: &[usize]) -> Self {
        assert!(dims.len() >= 2 && dims.iter().all(|&d| d > 0));
        let n_layers = dims.len() - 1;
        let mut activations = vec![Activation::Tanh; n_layers];
        activations[n_layers - 1] = Activation::Identity;
        NetParams {
            dims: dims.to_vec(),
            activations,
            params: vec![0.0; param_count(dims)],
            norm: NormStats::default(),
        }
    }

    /// Glorot-uniform weights, zero biases.
    pub fn glorot<R: Rng + ?Sized>(dims: &[usize], rng: &mut R) -> Self {
        let mut net = NetParams::zeros(dims);
        let mut off = 0;
        for d in dims.windows(2) {
            let limit = (6.0 / (d[0] + d[1]) as f64).sqrt();
            for w in &mut net.params[off..off + d[0] * d[1]] {
                *w = rng.random_range(-limit..limit);
            }
            off += d[0] * d[1] + d[1];
        }
        net
    }

    pub fn from_parts(
        dims: Vec<usize>,
        activations: Vec<Activation>,
        params: Vec<f64>,
        norm: NormStats,
    ) -> Result<Self> {
        if dims.len() < 2 {
            return Err(HdaError::Config("a network needs at least two layer sizes".into()));
        }
        check_len("activation tags", dims.len() - 1, activations.len())?;
        check_len("network parameters", param_count(&dims), params.len())?;
        norm.validate()?;
        Ok(NetParams {
            dims,
            activations,
            params,
            norm,
        })
    }

    pub fn with_norm(mut self, norm: NormStats) -> Result<Self> {
        norm.validate()?;
        if norm.input.len() > self.n_inputs() {
            return Err(HdaError::DimensionMismatch {
                what: "input normalization channels",
                expected: self.n_inputs(),
                got: norm.input.len(),
            });
        }
        check_len("output normalization channels", self.n_outputs(), norm.output.len())?;
        self.norm = norm;
        Ok(self)
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn activations(&self) -> &[Activation] {
        &self.activations
    }

    pub fn n_inputs(&self) -> usize {
        self.dims[0]
    }

    pub fn n_outputs(&self) -> usize {
        *self.dims.last().unwrap()
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    fn layer_offsets(&self) -> Vec<usize> {
        let mut offs = Vec::with_capacity(self.dims.len());
        let mut off = 0;
        offs.push(0);
        for d in self.dims.windows(2) {
            off += d[0] * d[1] + d[1];
            offs.push(off);
        }
        offs
    }

    fn run(&self, params: &[f64], input: &[f64], mask: Option<&DropoutMask>) -> Trace {
        let n_layers = self.dims.len() - 1;
        let mut inputs = Vec::with_capacity(n_layers + 1);
        let mut outputs = Vec::with_capacity(n_layers);
        inputs.push(input.to_vec());
        let mut off = 0;
        for l in 0..n_layers {
            let (n_in, n_out) = (self.dims[l], self.dims[l + 1]);
            let w = &params[off..off + n_in * n_out];
            let b = &params[off + n_in * n_out..off + n_in * n_out + n_out];
            off += n_in * n_out + n_out;
            let a = &inputs[l];
            let act = self.activations[l];
            let h: Vec<f64> = (0..n_out)
                .map(|o| {
                    let row = &w[o * n_in..(o + 1) * n_in];
                    let z = b[o] + row.iter().zip(a).map(|(w, x)| w * x).sum::<f64>();
                    act.apply(z)
                })
                .collect();
            let next = match mask.and_then(|m| m.scales.get(l)) {
                Some(scales) if l + 1 < n_layers => {
                    h.iter().zip(scales).map(|(h, s)| h * s).collect()
                }
                _ => h.clone(),
            };
            outputs.push(h);
            inputs.push(next);
        }
        Trace { inputs, outputs }
    }

    fn check_input(&self, input: &[f64]) -> Result<()> {
        check_len("network input", self.n_inputs(), input.len())
    }

    /// Network output in normalized space. Hidden layers use tanh, the
    /// output layer is linear. With a mask, dropped hidden units are zeroed
    /// and survivors rescaled.
    pub fn forward(&self, input: &[f64], mask: Option<&DropoutMask>) -> Result<Vec<f64>> {
        self.check_input(input)?;
        Ok(self.run(&self.params, input, mask).inputs.pop().unwrap())
    }

    /// Reverse-mode products of `cotangent . output` with respect to the
    /// parameters and the input.
    pub fn vjp(&self, input: &[f64], cotangent: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        self.check_input(input)?;
        check_len("network cotangent", self.n_outputs(), cotangent.len())?;
        let mut grad = vec![0.0; self.n_params()];
        let gx = self.vjp_accumulate(input, cotangent, None, &mut grad);
        Ok((grad, gx))
    }

    /// Adds the parameter gradient into `grad` and returns the input gradient.
    /// Shapes are the caller's responsibility.
    pub(crate) fn vjp_accumulate(
        &self,
        input: &[f64],
        cotangent: &[f64],
        mask: Option<&DropoutMask>,
        grad: &mut [f64],
    ) -> Vec<f64> {
        let trace = self.run(&self.params, input, mask);
        self.backward(&trace, cotangent, mask, grad)
    }

    fn backward(
        &self,
        trace: &Trace,
        cotangent: &[f64],
        mask: Option<&DropoutMask>,
        grad: &mut [f64],
    ) -> Vec<f64> {
        let n_layers = self.dims.len() - 1;
        let offs = self.layer_offsets();
        let mut g = cotangent.to_vec();
        for l in (0..n_layers).rev() {
            let (n_in, n_out) = (self.dims[l], self.dims[l + 1]);
            let off = offs[l];
            if l + 1 < n_layers {
                if let Some(scales) = mask.and_then(|m| m.scales.get(l)) {
                    for (gi, s) in g.iter_mut().zip(scales) {
                        *gi *= s;
                    }
                }
            }
            let act = self.activations[l];
            for (gi, &h) in g.iter_mut().zip(&trace.outputs[l]) {
                *gi *= act.slope(h);
            }
            let a = &trace.inputs[l];
            let w = &self.params[off..off + n_in * n_out];
            let mut g_prev = vec![0.0; n_in];
            for o in 0..n_out {
                let go = g[o];
                if go == 0.0 {
                    continue;
                }
                let gw = &mut grad[off + o * n_in..off + (o + 1) * n_in];
                for (gw, x) in gw.iter_mut().zip(a) {
                    *gw += go * x;
                }
                grad[off + n_in * n_out + o] += go;
                for (gp, wv) in g_prev.iter_mut().zip(&w[o * n_in..(o + 1) * n_in]) {
                    *gp += go * wv;
                }
            }
            g = g_prev;
        }
        g
    }

    /// Forward-mode derivative along `(tangent_input, tangent_params)`.
    pub fn jvp(
        &self,
        input: &[f64],
        tangent_input: &[f64],
        tangent_params: Option<&[f64]>,
    ) -> Result<Vec<f64>> {
        self.check_input(input)?;
        check_len("network input tangent", self.n_inputs(), tangent_input.len())?;
        if let Some(tp) = tangent_params {
            check_len("network parameter tangent", self.n_params(), tp.len())?;
        }
        let n_layers = self.dims.len() - 1;
        let trace = self.run(&self.params, input, None);
        let mut off = 0;
        let mut da = tangent_input.to_vec();
        for l in 0..n_layers {
            let (n_in, n_out) = (self.dims[l], self.dims[l + 1]);
            let w = &self.params[off..off + n_in * n_out];
            let a = &trace.inputs[l];
            let act = self.activations[l];
            da = (0..n_out)
                .map(|o| {
                    let row = &w[o * n_in..(o + 1) * n_in];
                    let mut dz = row.iter().zip(&da).map(|(w, d)| w * d).sum::<f64>();
                    if let Some(tp) = tangent_params {
                        let dw = &tp[off + o * n_in..off + (o + 1) * n_in];
                        dz += dw.iter().zip(a).map(|(d, x)| d * x).sum::<f64>();
                        dz += tp[off + n_in * n_out + o];
                    }
                    dz * act.slope(trace.outputs[l][o])
                })
                .collect();
            off += n_in * n_out + n_out;
        }
        Ok(da)
    }

    /// Physical-space prediction: normalize, forward, denormalize.
    pub fn predict(&self, x: &[f64]) -> Result<Vec<f64>> {
        let z = self.forward(&self.norm.normalize(x), None)?;
        Ok(self.norm.denormalize(&z))
    }

    /// Reverse-mode products of the physical-space map.
    pub fn predict_vjp(&self, x: &[f64], cotangent: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        check_len("network cotangent", self.n_outputs(), cotangent.len())?;
        let cz: Vec<f64> = cotangent
            .iter()
            .enumerate()
            .map(|(i, c)| c * self.norm.output_stats(i).std)
            .collect();
        let (gp, gz) = self.vjp(&self.norm.normalize(x), &cz)?;
        Ok((gp, self.unscale_input_gradient(gz)))
    }

    pub(crate) fn predict_vjp_accumulate(
        &self,
        x: &[f64],
        cotangent: &[f64],
        grad: &mut [f64],
    ) -> Vec<f64> {
        let cz: Vec<f64> = cotangent
            .iter()
            .enumerate()
            .map(|(i, c)| c * self.norm.output_stats(i).std)
            .collect();
        let gz = self.vjp_accumulate(&self.norm.normalize(x), &cz, None, grad);
        self.unscale_input_gradient(gz)
    }

    fn unscale_input_gradient(&self, mut gz: Vec<f64>) -> Vec<f64> {
        for (g, s) in gz.iter_mut().zip(&self.norm.input) {
            *g /= s.std;
        }
        gz
    }

    /// Forward-mode derivative of the physical-space map.
    pub fn predict_jvp(
        &self,
        x: &[f64],
        dx: &[f64],
        dp: Option<&[f64]>,
    ) -> Result<Vec<f64>> {
        check_len("network input tangent", self.n_inputs(), dx.len())?;
        let dz: Vec<f64> = dx
            .iter()
            .enumerate()
            .map(|(i, d)| match self.norm.input.get(i) {
                Some(s) => d / s.std,
                None => *d,
            })
            .collect();
        let dy = self.jvp(&self.norm.normalize(x), &dz, dp)?;
        Ok(dy
            .iter()
            .enumerate()
            .map(|(i, d)| d * self.norm.output_stats(i).std)
            .collect())
    }
}
