use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::model::ConfigSpace;

use super::mlp::DenseNet;
use super::Parameters;

/// Network output at one configuration: `dets` square matrices whose rows
/// follow the input coordinates and whose columns are orbital slots.
#[derive(Clone, Debug)]
pub struct OrbitalOutput {
    values: Vec<f64>,
    n: usize,
    dets: usize,
}

impl OrbitalOutput {
    /// Wraps raw values in det-major, then row-major layout; mainly for tests and
    /// synthetic loss inputs.
    pub fn from_raw(values: Vec<f64>, n: usize, dets: usize) -> Self {
        assert_eq!(values.len(), n * n * dets, "orbital output shape");
        OrbitalOutput { values, n, dets }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dets(&self) -> usize {
        self.dets
    }

    pub fn entry(&self, row: usize, col: usize, det: usize) -> f64 {
        self.values[det * self.n * self.n + row * self.n + col]
    }

    pub fn matrix(&self, det: usize) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.n, |i, j| self.entry(i, j, det))
    }

    /// Σ_k det(y^(k)) — the scalar wave-function value this output encodes.
    pub fn det_sum(&self) -> f64 {
        (0..self.dets).map(|k| self.matrix(k).determinant()).sum()
    }
}

/// Network mapping a configuration of `n` one-dimensional coordinates to
/// `dets` matrices of shape n×n (row = coordinate, column = orbital slot).
/// Used by the supervised orbital-fitting losses; it deliberately exposes a
/// vector-Jacobian product instead of a per-entry gradient so batch losses
/// backpropagate in one pass.
pub struct MatrixMlp {
    space: ConfigSpace,
    net: DenseNet,
    n: usize,
    dets: usize,
}

impl MatrixMlp {
    pub fn new(space: ConfigSpace, hidden: Vec<usize>, dets: usize) -> Result<Self> {
        let n = space
            .bounds()
            .ok_or_else(|| Error::invalid("matrix-mlp needs a continuous space"))?
            .len();
        if dets == 0 {
            return Err(Error::invalid("matrix-mlp needs at least one determinant"));
        }
        Ok(MatrixMlp {
            net: DenseNet::new(n, hidden, n * n * dets)?,
            space,
            n,
            dets,
        })
    }

    pub fn space(&self) -> &ConfigSpace {
        &self.space
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dets(&self) -> usize {
        self.dets
    }

    pub fn param_dim(&self) -> usize {
        self.net.param_dim()
    }

    pub fn init_parameters(&self, seed: u64) -> Parameters {
        self.net.init_parameters(seed)
    }

    pub fn forward(&self, theta: &Parameters, x: &DVector<f64>) -> Result<OrbitalOutput> {
        let fwd = self.net.forward(theta, x.as_slice())?;
        Ok(OrbitalOutput {
            values: fwd.out,
            n: self.n,
            dets: self.dets,
        })
    }

    /// d(loss)/dθ for one sample, given d(loss)/dy laid out like
    /// [`OrbitalOutput`].
    pub fn vjp(
        &self,
        theta: &Parameters,
        x: &DVector<f64>,
        cotangent: &[f64],
    ) -> Result<DVector<f64>> {
        let fwd = self.net.forward(theta, x.as_slice())?;
        self.net.backprop(theta, &fwd, cotangent)
    }

    /// Scalar wave function Σ_k det(y^(k)(x)).
    pub fn psi(&self, theta: &Parameters, x: &DVector<f64>) -> Result<f64> {
        Ok(self.forward(theta, x)?.det_sum())
    }
}
