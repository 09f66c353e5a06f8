//! Parametric wave functions ψ_θ and the derivative surface the gradient
//! estimators and diagnostics require.

use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::model::{ConfigPoint, ConfigSpace};

mod exp_family;
mod matrix_mlp;
mod mlp;
mod table;

pub use exp_family::{ExpFamilyAnsatz, Feature};
pub use matrix_mlp::{MatrixMlp, OrbitalOutput};
pub use mlp::MlpAnsatz;
pub use table::TableAnsatz;

/// Step scale for first-derivative central differences:
/// (machine epsilon)^(1/3), balancing truncation against rounding.
pub fn default_fd_step(scale: f64) -> f64 {
    f64::EPSILON.powf(1.0 / 3.0) * (1.0 + scale.abs())
}

/// Step scale for second differences: (machine epsilon)^(1/4).
pub fn default_laplacian_step(scale: f64) -> f64 {
    f64::EPSILON.powf(0.25) * (1.0 + scale.abs())
}

/// A validated parameter vector θ ∈ ℝ^d.
#[derive(Clone, Debug, PartialEq)]
pub struct Parameters {
    values: DVector<f64>,
}

impl Parameters {
    pub fn new(values: DVector<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::invalid("parameter vector must have d >= 1"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("parameter vector".into()));
        }
        Ok(Parameters { values })
    }

    pub fn from_slice(values: &[f64]) -> Result<Self> {
        Self::new(DVector::from_row_slice(values))
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn as_vector(&self) -> &DVector<f64> {
        &self.values
    }

    pub fn to_vec(&self) -> Vec<f64> {
        self.values.iter().copied().collect()
    }

    /// θ - η·g, revalidated so a diverging update is caught immediately.
    pub fn step(&self, eta: f64, g: &DVector<f64>) -> Result<Self> {
        if g.len() != self.dim() {
            return Err(Error::DimensionMismatch("gradient/parameter dims".into()));
        }
        Parameters::new(&self.values - eta * g)
    }

    /// Componentwise rescaling, used by the scale-invariance tests.
    pub fn scaled(&self, lambda: f64) -> Result<Self> {
        Parameters::new(lambda * &self.values)
    }
}

/// Query surface of a parametric wave function.
///
/// `grad_log_abs` defaults to ∇_θψ/ψ and fails where ψ vanishes; such
/// points carry zero sampling probability, so hitting one is an error in
/// the caller, not a value to clamp.
pub trait Ansatz: Send + Sync {
    fn kind(&self) -> &str;

    fn space(&self) -> &ConfigSpace;

    fn param_dim(&self) -> usize;

    fn value(&self, theta: &Parameters, x: &ConfigPoint) -> Result<f64>;

    fn grad_theta(&self, theta: &Parameters, x: &ConfigPoint) -> Result<DVector<f64>>;

    fn grad_log_abs(&self, theta: &Parameters, x: &ConfigPoint) -> Result<DVector<f64>> {
        let v = self.value(theta, x)?;
        if v == 0.0 {
            return Err(Error::ZeroWaveFunction(format!(
                "log-derivative query on the {} ansatz",
                self.kind()
            )));
        }
        Ok(self.grad_theta(theta, x)? / v)
    }

    /// Spatial Laplacian Δ_xψ_θ(x); continuous spaces only.
    fn laplacian_x(&self, _theta: &Parameters, _x: &ConfigPoint) -> Result<f64> {
        Err(Error::Unsupported {
            capability: "spatial Laplacian",
            ansatz: self.kind().to_string(),
        })
    }

    fn has_hessian(&self) -> bool {
        false
    }

    /// Parameter Hessian 𝖧_θψ_θ(x); optional, diagnostics only.
    fn hessian_theta(&self, _theta: &Parameters, _x: &ConfigPoint) -> Result<DMatrix<f64>> {
        Err(Error::Unsupported {
            capability: "parameter Hessian",
            ansatz: self.kind().to_string(),
        })
    }
}

/// Central-difference gradient of ψ in θ — the verification oracle for the
/// analytic `grad_theta` implementations.
pub fn finite_diff_gradient(
    ansatz: &dyn Ansatz,
    theta: &Parameters,
    x: &ConfigPoint,
    h: f64,
) -> Result<DVector<f64>> {
    if h <= 0.0 {
        return Err(Error::invalid("finite-difference step must be positive"));
    }
    let d = theta.dim();
    let mut grad = DVector::zeros(d);
    let mut probe = theta.as_vector().clone();
    for i in 0..d {
        let base = probe[i];
        probe[i] = base + h;
        let plus = ansatz.value(&Parameters::new(probe.clone())?, x)?;
        probe[i] = base - h;
        let minus = ansatz.value(&Parameters::new(probe.clone())?, x)?;
        probe[i] = base;
        let slope = (plus - minus) / (2.0 * h);
        if !slope.is_finite() {
            return Err(Error::NonFinite("finite-difference gradient".into()));
        }
        grad[i] = slope;
    }
    Ok(grad)
}

/// Second-difference estimate of the spatial Laplacian,
/// Σ_i (ψ(x+he_i) - 2ψ(x) + ψ(x-he_i))/h². Used directly as the Laplacian
/// for ansätze without an analytic one. Logs a warning when the result is
/// small enough for the subtraction to be dominated by rounding.
pub fn laplacian_fallback(
    ansatz: &dyn Ansatz,
    theta: &Parameters,
    x: &ConfigPoint,
    h: f64,
) -> Result<f64> {
    if h <= 0.0 {
        return Err(Error::invalid("Laplacian step must be positive"));
    }
    let coords = x.coords()?;
    let center = ansatz.value(theta, x)?;
    let mut total = 0.0;
    let mut probe = coords.clone();
    for i in 0..coords.len() {
        let base = probe[i];
        probe[i] = base + h;
        let plus = ansatz.value(theta, &ConfigPoint::Continuous(probe.clone()))?;
        probe[i] = base - h;
        let minus = ansatz.value(theta, &ConfigPoint::Continuous(probe.clone()))?;
        probe[i] = base;
        total += plus - 2.0 * center + minus;
    }
    let result = total / (h * h);
    if !result.is_finite() {
        return Err(Error::NonFinite("Laplacian fallback".into()));
    }
    if result.abs() * h * h < 1e3 * f64::EPSILON * center.abs() {
        log::warn!(
            "laplacian_fallback: second difference {:.3e} is below the rounding floor for psi = {:.3e}, h = {:.1e}",
            result,
            center,
            h
        );
    }
    Ok(result)
}

/// The same parametrization with every value multiplied by a constant:
/// the family map ψ_θ ↦ λψ_θ. Losses built from the wave function alone
/// must not see the difference.
pub struct Rescaled<'a> {
    inner: &'a dyn Ansatz,
    factor: f64,
    kind: String,
}

impl<'a> Rescaled<'a> {
    pub fn new(inner: &'a dyn Ansatz, factor: f64) -> Result<Self> {
        if factor == 0.0 || !factor.is_finite() {
            return Err(Error::invalid("rescaling factor must be finite and nonzero"));
        }
        Ok(Rescaled {
            kind: format!("{}*{factor}", inner.kind()),
            inner,
            factor,
        })
    }
}

impl Ansatz for Rescaled<'_> {
    fn kind(&self) -> &str {
        &self.kind
    }

    fn space(&self) -> &ConfigSpace {
        self.inner.space()
    }

    fn param_dim(&self) -> usize {
        self.inner.param_dim()
    }

    fn value(&self, theta: &Parameters, x: &ConfigPoint) -> Result<f64> {
        Ok(self.factor * self.inner.value(theta, x)?)
    }

    fn grad_theta(&self, theta: &Parameters, x: &ConfigPoint) -> Result<DVector<f64>> {
        Ok(self.factor * self.inner.grad_theta(theta, x)?)
    }

    fn laplacian_x(&self, theta: &Parameters, x: &ConfigPoint) -> Result<f64> {
        Ok(self.factor * self.inner.laplacian_x(theta, x)?)
    }

    fn has_hessian(&self) -> bool {
        self.inner.has_hessian()
    }

    fn hessian_theta(&self, theta: &Parameters, x: &ConfigPoint) -> Result<DMatrix<f64>> {
        Ok(self.factor * self.inner.hessian_theta(theta, x)?)
    }
}

const CHECKPOINT_HEADER: &str = "# vmckit-params v1";

/// Writes a parameter checkpoint: one header line (ansatz kind, dimension,
/// seed), then one value per line at full round-trip precision.
pub fn save_parameters(
    path: &Path,
    ansatz_kind: &str,
    seed: u64,
    theta: &Parameters,
) -> Result<()> {
    let mut out = format!(
        "{CHECKPOINT_HEADER} kind={ansatz_kind} d={} seed={seed}\n",
        theta.dim()
    );
    for v in theta.as_vector().iter() {
        out.push_str(&format!("{v}\n"));
    }
    fs::write(path, out)?;
    Ok(())
}

/// Reads a checkpoint written by [`save_parameters`]; returns
/// (ansatz kind, seed, parameters).
pub fn load_parameters(path: &Path) -> Result<(String, u64, Parameters)> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::invalid("empty checkpoint file"))?;
    if !header.starts_with(CHECKPOINT_HEADER) {
        return Err(Error::invalid(format!("unrecognized checkpoint header: {header}")));
    }
    let mut kind = None;
    let mut d = None;
    let mut seed = None;
    for field in header.split_whitespace() {
        if let Some((key, value)) = field.split_once('=') {
            match key {
                "kind" => kind = Some(value.to_string()),
                "d" => d = value.parse::<usize>().ok(),
                "seed" => seed = value.parse::<u64>().ok(),
                _ => {}
            }
        }
    }
    let kind = kind.ok_or_else(|| Error::invalid("checkpoint header missing kind"))?;
    let d = d.ok_or_else(|| Error::invalid("checkpoint header missing d"))?;
    let seed = seed.ok_or_else(|| Error::invalid("checkpoint header missing seed"))?;
    let values: Vec<f64> = lines
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            l.trim()
                .parse::<f64>()
                .map_err(|e| Error::invalid(format!("bad checkpoint value {l:?}: {e}")))
        })
        .collect::<Result<_>>()?;
    if values.len() != d {
        return Err(Error::invalid(format!(
            "checkpoint declares d={d} but contains {} values",
            values.len()
        )));
    }
    Ok((kind, seed, Parameters::from_slice(&values)?))
}
