use nalgebra::DVector;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::model::{ConfigPoint, ConfigSpace};

use super::{default_laplacian_step, laplacian_fallback, Ansatz, Parameters};

/// Dense feedforward core shared by the scalar and matrix-valued network
/// ansätze: tanh hidden layers, linear output, one trainable output scale.
/// Parameters are a single flat vector laid out layer by layer
/// (weights row-major, then biases), followed by the output layer and the
/// scale.
pub(crate) struct DenseNet {
    pub input_dim: usize,
    pub hidden: Vec<usize>,
    pub out_dim: usize,
}

pub(crate) struct ForwardPass {
    /// Activations per layer; `acts[0]` is the input.
    acts: Vec<Vec<f64>>,
    /// Output before the trainable scale is applied.
    pub raw_out: Vec<f64>,
    /// Scaled output.
    pub out: Vec<f64>,
}

impl DenseNet {
    pub fn new(input_dim: usize, hidden: Vec<usize>, out_dim: usize) -> Result<Self> {
        if input_dim == 0 || out_dim == 0 || hidden.contains(&0) {
            return Err(Error::invalid("network layer sizes must be positive"));
        }
        Ok(DenseNet {
            input_dim,
            hidden,
            out_dim,
        })
    }

    pub fn param_dim(&self) -> usize {
        let mut prev = self.input_dim;
        let mut total = 0;
        for &h in &self.hidden {
            total += h * prev + h;
            prev = h;
        }
        total + self.out_dim * prev + self.out_dim + 1
    }

    /// Gaussian weights with variance 1/fan-in, zero biases, unit scale.
    pub fn init_parameters(&self, seed: u64) -> Parameters {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut values = Vec::with_capacity(self.param_dim());
        let mut prev = self.input_dim;
        for &h in &self.hidden {
            let std = (1.0 / prev as f64).sqrt();
            for _ in 0..h * prev {
                let z: f64 = rng.sample(StandardNormal);
                values.push(z * std);
            }
            values.extend(std::iter::repeat_n(0.0, h));
            prev = h;
        }
        let std = (1.0 / prev as f64).sqrt();
        for _ in 0..self.out_dim * prev {
            let z: f64 = rng.sample(StandardNormal);
            values.push(z * std);
        }
        values.extend(std::iter::repeat_n(0.0, self.out_dim));
        values.push(1.0); // output scale
        Parameters::from_slice(&values).expect("finite init")
    }

    fn check(&self, theta: &Parameters, x: &[f64]) -> Result<()> {
        if theta.dim() != self.param_dim() {
            return Err(Error::DimensionMismatch(format!(
                "network expects {} parameters, got {}",
                self.param_dim(),
                theta.dim()
            )));
        }
        if x.len() != self.input_dim {
            return Err(Error::DimensionMismatch(format!(
                "network expects input dim {}, got {}",
                self.input_dim,
                x.len()
            )));
        }
        Ok(())
    }

    pub fn forward(&self, theta: &Parameters, x: &[f64]) -> Result<ForwardPass> {
        self.check(theta, x)?;
        let p = theta.as_vector().as_slice();
        let mut acts: Vec<Vec<f64>> = Vec::with_capacity(self.hidden.len() + 1);
        acts.push(x.to_vec());
        let mut offset = 0;
        let mut prev = self.input_dim;
        for &h in &self.hidden {
            let w = &p[offset..offset + h * prev];
            let b = &p[offset + h * prev..offset + h * prev + h];
            offset += h * prev + h;
            let a_in = acts.last().unwrap();
            let mut a = vec![0.0; h];
            for i in 0..h {
                let mut z = b[i];
                let row = &w[i * prev..(i + 1) * prev];
                for j in 0..prev {
                    z += row[j] * a_in[j];
                }
                a[i] = z.tanh();
            }
            acts.push(a);
            prev = h;
        }
        let w = &p[offset..offset + self.out_dim * prev];
        let b = &p[offset + self.out_dim * prev..offset + self.out_dim * prev + self.out_dim];
        let scale = p[theta.dim() - 1];
        let a_in = acts.last().unwrap();
        let mut raw_out = vec![0.0; self.out_dim];
        for i in 0..self.out_dim {
            let mut z = b[i];
            let row = &w[i * prev..(i + 1) * prev];
            for j in 0..prev {
                z += row[j] * a_in[j];
            }
            raw_out[i] = z;
        }
        let out = raw_out.iter().map(|v| v * scale).collect();
        Ok(ForwardPass { acts, raw_out, out })
    }

    /// Reverse pass: given d(loss)/d(out), accumulate d(loss)/d(θ).
    pub fn backprop(
        &self,
        theta: &Parameters,
        fwd: &ForwardPass,
        cotangent: &[f64],
    ) -> Result<DVector<f64>> {
        if cotangent.len() != self.out_dim {
            return Err(Error::DimensionMismatch("cotangent dimension".into()));
        }
        let p = theta.as_vector().as_slice();
        let d = theta.dim();
        let mut grad = DVector::zeros(d);
        let scale = p[d - 1];

        // Output scale: d(out_i)/d(scale) = raw_out_i.
        grad[d - 1] = cotangent
            .iter()
            .zip(&fwd.raw_out)
            .map(|(c, r)| c * r)
            .sum();

        // Offset of the output layer block.
        let mut offset = 0;
        let mut prev = self.input_dim;
        for &h in &self.hidden {
            offset += h * prev + h;
            prev = h;
        }
        let w_out = &p[offset..offset + self.out_dim * prev];
        let a_last = fwd.acts.last().unwrap();

        // Delta w.r.t. the raw (pre-scale) outputs.
        let delta_out: Vec<f64> = cotangent.iter().map(|c| c * scale).collect();
        for i in 0..self.out_dim {
            let row_base = offset + i * prev;
            for j in 0..prev {
                grad[row_base + j] = delta_out[i] * a_last[j];
            }
            grad[offset + self.out_dim * prev + i] = delta_out[i];
        }

        // Delta pushed into the last hidden activation.
        let mut delta = vec![0.0; prev];
        for j in 0..prev {
            let mut s = 0.0;
            for i in 0..self.out_dim {
                s += w_out[i * prev + j] * delta_out[i];
            }
            delta[j] = s * (1.0 - a_last[j] * a_last[j]);
        }

        // Hidden layers, last to first.
        for l in (0..self.hidden.len()).rev() {
            let h = self.hidden[l];
            let prev_dim = if l == 0 {
                self.input_dim
            } else {
                self.hidden[l - 1]
            };
            // Recompute this layer's offset in the flat vector.
            let mut block = 0;
            let mut pd = self.input_dim;
            for &hh in &self.hidden[..l] {
                block += hh * pd + hh;
                pd = hh;
            }
            let w = &p[block..block + h * prev_dim];
            let a_in = &fwd.acts[l];
            for i in 0..h {
                let row_base = block + i * prev_dim;
                for j in 0..prev_dim {
                    grad[row_base + j] = delta[i] * a_in[j];
                }
                grad[block + h * prev_dim + i] = delta[i];
            }
            if l > 0 {
                let mut next = vec![0.0; prev_dim];
                for j in 0..prev_dim {
                    let mut s = 0.0;
                    for i in 0..h {
                        s += w[i * prev_dim + j] * delta[i];
                    }
                    next[j] = s * (1.0 - a_in[j] * a_in[j]);
                }
                delta = next;
            }
        }
        Ok(grad)
    }
}

/// Small dense network emitting ψ_θ(x) directly (not log|ψ|), so signed
/// targets are representable. Default shape: two tanh layers of width 16
/// and a trainable output scale. The spatial Laplacian comes from the
/// second-difference fallback.
pub struct MlpAnsatz {
    space: ConfigSpace,
    net: DenseNet,
}

impl MlpAnsatz {
    pub fn new(space: ConfigSpace, hidden: Vec<usize>) -> Result<Self> {
        let dim = space
            .bounds()
            .ok_or_else(|| Error::invalid("mlp ansatz needs a continuous space"))?
            .len();
        Ok(MlpAnsatz {
            net: DenseNet::new(dim, hidden, 1)?,
            space,
        })
    }

    pub fn with_default_shape(space: ConfigSpace) -> Result<Self> {
        Self::new(space, vec![16, 16])
    }

    pub fn init_parameters(&self, seed: u64) -> Parameters {
        self.net.init_parameters(seed)
    }
}

impl Ansatz for MlpAnsatz {
    fn kind(&self) -> &str {
        "mlp"
    }

    fn space(&self) -> &ConfigSpace {
        &self.space
    }

    fn param_dim(&self) -> usize {
        self.net.param_dim()
    }

    fn value(&self, theta: &Parameters, x: &ConfigPoint) -> Result<f64> {
        let fwd = self.net.forward(theta, x.coords()?.as_slice())?;
        Ok(fwd.out[0])
    }

    fn grad_theta(&self, theta: &Parameters, x: &ConfigPoint) -> Result<DVector<f64>> {
        let fwd = self.net.forward(theta, x.coords()?.as_slice())?;
        self.net.backprop(theta, &fwd, &[1.0])
    }

    fn laplacian_x(&self, theta: &Parameters, x: &ConfigPoint) -> Result<f64> {
        let scale = x.coords()?.amax();
        laplacian_fallback(self, theta, x, default_laplacian_step(scale))
    }
}
