use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::model::{ConfigPoint, ConfigSpace};

use super::{Ansatz, Parameters};

/// Fixed log-space features for [`ExpFamilyAnsatz`]. Each carries its own
/// analytic spatial gradient and Laplacian.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Feature {
    /// -|x|²/2 — a Gaussian envelope; exp(θ·feature) with θ = a gives
    /// exp(-a|x|²/2).
    Gaussian,
    /// -|x| — an exponential envelope; exp(θ·feature) with θ = a gives
    /// exp(-a·r).
    Exponential,
}

impl Feature {
    pub fn name(&self) -> &'static str {
        match self {
            Feature::Gaussian => "gaussian",
            Feature::Exponential => "exponential",
        }
    }

    fn eval(&self, x: &DVector<f64>) -> f64 {
        match self {
            Feature::Gaussian => -0.5 * x.norm_squared(),
            Feature::Exponential => -x.norm(),
        }
    }

    fn grad_x(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        match self {
            Feature::Gaussian => Ok(-x),
            Feature::Exponential => {
                let r = x.norm();
                if r == 0.0 {
                    return Err(Error::NonFinite("exponential feature gradient at r = 0".into()));
                }
                Ok(-x / r)
            }
        }
    }

    fn laplacian_x(&self, x: &DVector<f64>) -> Result<f64> {
        let d = x.len() as f64;
        match self {
            Feature::Gaussian => Ok(-d),
            Feature::Exponential => {
                let r = x.norm();
                if r == 0.0 && d > 1.0 {
                    return Err(Error::NonFinite("exponential feature Laplacian at r = 0".into()));
                }
                if d == 1.0 {
                    Ok(0.0)
                } else {
                    Ok(-(d - 1.0) / r)
                }
            }
        }
    }
}

/// ψ_θ(x) = exp(Σ_k θ_k φ_k(x)) over a fixed feature list — strictly
/// positive, with analytic parameter gradient, log-gradient, spatial
/// Laplacian, and parameter Hessian.
pub struct ExpFamilyAnsatz {
    space: ConfigSpace,
    features: Vec<Feature>,
}

impl ExpFamilyAnsatz {
    pub fn new(space: ConfigSpace, features: Vec<Feature>) -> Result<Self> {
        if space.bounds().is_none() {
            return Err(Error::invalid("exp-family ansatz needs a continuous space"));
        }
        if features.is_empty() {
            return Err(Error::invalid("exp-family ansatz needs at least one feature"));
        }
        Ok(ExpFamilyAnsatz { space, features })
    }

    fn feature_values(&self, x: &DVector<f64>) -> Vec<f64> {
        self.features.iter().map(|f| f.eval(x)).collect()
    }

    fn log_value(&self, theta: &Parameters, x: &DVector<f64>) -> f64 {
        self.feature_values(x)
            .iter()
            .zip(theta.as_vector().iter())
            .map(|(f, t)| f * t)
            .sum()
    }

    fn check(&self, theta: &Parameters, x: &ConfigPoint) -> Result<()> {
        if theta.dim() != self.features.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} features but {} parameters",
                self.features.len(),
                theta.dim()
            )));
        }
        x.validate(&self.space)
    }
}

impl Ansatz for ExpFamilyAnsatz {
    fn kind(&self) -> &str {
        "exp-family"
    }

    fn space(&self) -> &ConfigSpace {
        &self.space
    }

    fn param_dim(&self) -> usize {
        self.features.len()
    }

    fn value(&self, theta: &Parameters, x: &ConfigPoint) -> Result<f64> {
        self.check(theta, x)?;
        Ok(self.log_value(theta, x.coords()?).exp())
    }

    fn grad_theta(&self, theta: &Parameters, x: &ConfigPoint) -> Result<DVector<f64>> {
        self.check(theta, x)?;
        let coords = x.coords()?;
        let psi = self.log_value(theta, coords).exp();
        Ok(DVector::from_iterator(
            self.features.len(),
            self.feature_values(coords).iter().map(|f| f * psi),
        ))
    }

    fn grad_log_abs(&self, theta: &Parameters, x: &ConfigPoint) -> Result<DVector<f64>> {
        self.check(theta, x)?;
        let coords = x.coords()?;
        Ok(DVector::from_vec(self.feature_values(coords)))
    }

    fn laplacian_x(&self, theta: &Parameters, x: &ConfigPoint) -> Result<f64> {
        self.check(theta, x)?;
        let coords = x.coords()?;
        let t = theta.as_vector();
        let mut grad_s = DVector::zeros(coords.len());
        let mut lap_s = 0.0;
        for (k, feature) in self.features.iter().enumerate() {
            grad_s += t[k] * feature.grad_x(coords)?;
            lap_s += t[k] * feature.laplacian_x(coords)?;
        }
        let psi = self.log_value(theta, coords).exp();
        Ok(psi * (grad_s.norm_squared() + lap_s))
    }

    fn has_hessian(&self) -> bool {
        true
    }

    fn hessian_theta(&self, theta: &Parameters, x: &ConfigPoint) -> Result<DMatrix<f64>> {
        self.check(theta, x)?;
        let coords = x.coords()?;
        let psi = self.log_value(theta, coords).exp();
        let f = self.feature_values(coords);
        let d = f.len();
        Ok(DMatrix::from_fn(d, d, |i, j| f[i] * f[j] * psi))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn gaussian_1d() -> ExpFamilyAnsatz {
        ExpFamilyAnsatz::new(
            ConfigSpace::symmetric_box(1, 8.0).unwrap(),
            vec![Feature::Gaussian],
        )
        .unwrap()
    }

    #[test]
    fn gaussian_laplacian_analytic() {
        // For exp(-x²/2): Δψ = (x² - 1)ψ.
        let ansatz = gaussian_1d();
        let theta = Parameters::from_slice(&[1.0]).unwrap();
        for &x in &[0.0, 0.7, -1.3, 2.5] {
            let p = ConfigPoint::Continuous(DVector::from_vec(vec![x]));
            let psi = ansatz.value(&theta, &p).unwrap();
            let lap = ansatz.laplacian_x(&theta, &p).unwrap();
            assert_abs_diff_eq!(lap, (x * x - 1.0) * psi, epsilon = 1e-12);
        }
    }

    #[test]
    fn exponential_3d_laplacian() {
        // For exp(-a r): Δψ = (a² - 2a/r)ψ.
        let ansatz = ExpFamilyAnsatz::new(
            ConfigSpace::symmetric_box(3, 10.0).unwrap(),
            vec![Feature::Exponential],
        )
        .unwrap();
        let a = 0.8;
        let theta = Parameters::from_slice(&[a]).unwrap();
        let p = ConfigPoint::Continuous(DVector::from_vec(vec![1.0, -0.5, 2.0]));
        let r = (1.0f64 + 0.25 + 4.0).sqrt();
        let psi = ansatz.value(&theta, &p).unwrap();
        let lap = ansatz.laplacian_x(&theta, &p).unwrap();
        assert_abs_diff_eq!(lap, (a * a - 2.0 * a / r) * psi, epsilon = 1e-12);
    }

    #[test]
    fn hessian_is_symmetric() {
        let ansatz = ExpFamilyAnsatz::new(
            ConfigSpace::symmetric_box(1, 8.0).unwrap(),
            vec![Feature::Gaussian, Feature::Exponential],
        )
        .unwrap();
        let theta = Parameters::from_slice(&[0.7, 0.2]).unwrap();
        let p = ConfigPoint::Continuous(DVector::from_vec(vec![1.1]));
        let h = ansatz.hessian_theta(&theta, &p).unwrap();
        assert!((h.clone() - h.transpose()).amax() <= 1e-10);
    }

    #[test]
    fn grad_log_abs_is_feature_vector() {
        let ansatz = gaussian_1d();
        let theta = Parameters::from_slice(&[2.5]).unwrap();
        let p = ConfigPoint::Continuous(DVector::from_vec(vec![1.5]));
        let gl = ansatz.grad_log_abs(&theta, &p).unwrap();
        assert_abs_diff_eq!(gl[0], -0.5 * 1.5 * 1.5, epsilon = 1e-14);
    }
}
