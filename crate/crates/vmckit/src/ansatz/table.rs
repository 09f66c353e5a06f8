use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::model::{ConfigPoint, ConfigSpace};

use super::{Ansatz, Parameters};

/// One free amplitude per configuration: ψ_θ(x) = θ_x on a finite space,
/// so d equals the space size and every derivative is analytic.
pub struct TableAnsatz {
    space: ConfigSpace,
    size: usize,
}

impl TableAnsatz {
    pub fn new(size: usize) -> Result<Self> {
        Ok(TableAnsatz {
            space: ConfigSpace::finite(size)?,
            size,
        })
    }

    fn check(&self, theta: &Parameters, x: &ConfigPoint) -> Result<usize> {
        if theta.dim() != self.size {
            return Err(Error::DimensionMismatch(format!(
                "table ansatz over {} points got {} parameters",
                self.size,
                theta.dim()
            )));
        }
        let i = x.index()?;
        if i >= self.size {
            return Err(Error::invalid(format!(
                "index {i} out of range for table of size {}",
                self.size
            )));
        }
        Ok(i)
    }
}

impl Ansatz for TableAnsatz {
    fn kind(&self) -> &str {
        "table"
    }

    fn space(&self) -> &ConfigSpace {
        &self.space
    }

    fn param_dim(&self) -> usize {
        self.size
    }

    fn value(&self, theta: &Parameters, x: &ConfigPoint) -> Result<f64> {
        let i = self.check(theta, x)?;
        Ok(theta.as_vector()[i])
    }

    fn grad_theta(&self, theta: &Parameters, x: &ConfigPoint) -> Result<DVector<f64>> {
        let i = self.check(theta, x)?;
        let mut g = DVector::zeros(self.size);
        g[i] = 1.0;
        Ok(g)
    }

    fn has_hessian(&self) -> bool {
        true
    }

    fn hessian_theta(&self, theta: &Parameters, x: &ConfigPoint) -> Result<DMatrix<f64>> {
        self.check(theta, x)?;
        Ok(DMatrix::zeros(self.size, self.size))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn value_and_gradient() {
        let ansatz = TableAnsatz::new(3).unwrap();
        let theta = Parameters::from_slice(&[2.0, 1.0, -0.5]).unwrap();
        assert_abs_diff_eq!(ansatz.value(&theta, &ConfigPoint::Finite(0)).unwrap(), 2.0);
        let g = ansatz.grad_theta(&theta, &ConfigPoint::Finite(2)).unwrap();
        assert_eq!(g.as_slice(), &[0.0, 0.0, 1.0]);
        let gl = ansatz.grad_log_abs(&theta, &ConfigPoint::Finite(2)).unwrap();
        assert_abs_diff_eq!(gl[2], -2.0);
    }

    #[test]
    fn scaling_scales_values() {
        let ansatz = TableAnsatz::new(2).unwrap();
        let theta = Parameters::from_slice(&[2.0, 1.0]).unwrap();
        let scaled = theta.scaled(3.0).unwrap();
        let x = ConfigPoint::Finite(0);
        assert_abs_diff_eq!(
            ansatz.value(&scaled, &x).unwrap(),
            3.0 * ansatz.value(&theta, &x).unwrap()
        );
    }

    #[test]
    fn zero_amplitude_log_derivative_errors() {
        let ansatz = TableAnsatz::new(2).unwrap();
        let theta = Parameters::from_slice(&[0.0, 1.0]).unwrap();
        assert!(ansatz.grad_log_abs(&theta, &ConfigPoint::Finite(0)).is_err());
    }

    #[test]
    fn no_spatial_laplacian() {
        let ansatz = TableAnsatz::new(2).unwrap();
        let theta = Parameters::from_slice(&[1.0, 1.0]).unwrap();
        assert!(ansatz.laplacian_x(&theta, &ConfigPoint::Finite(0)).is_err());
    }
}
