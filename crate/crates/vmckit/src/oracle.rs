//! Brute-force ground truth on finite spaces: exact expectations of batch
//! estimators by enumeration over all ordered sample tuples, and central
//! finite differences of scalar losses. Every unbiasedness and
//! gradient-correctness test reduces to these two primitives, which is why
//! they live in the library rather than in test code — the `verify`
//! subcommand runs them in the field.

use nalgebra::DVector;

use crate::ansatz::{Ansatz, Parameters};
use crate::error::{Error, Result};
use crate::model::{inner_product, Measure};

/// Guard on S^n: enumeration is exact, not cheap.
pub const MAX_TUPLES: u128 = 1_000_000;

/// Enumeration over ordered tuples (x_1, ..., x_n) from a finite space,
/// weighted by the product of per-sample probabilities.
#[derive(Clone, Debug)]
pub struct EnumerationPlan {
    pub size: usize,
    pub n: usize,
    pub total_tuples: u128,
}

impl EnumerationPlan {
    pub fn new(size: usize, n: usize) -> Result<Self> {
        if size == 0 || n == 0 {
            return Err(Error::invalid("enumeration needs size >= 1 and n >= 1"));
        }
        let total = (size as u128)
            .checked_pow(n as u32)
            .ok_or(Error::EnumerationTooLarge {
                tuples: u128::MAX,
                limit: MAX_TUPLES,
            })?;
        if total > MAX_TUPLES {
            return Err(Error::EnumerationTooLarge {
                tuples: total,
                limit: MAX_TUPLES,
            });
        }
        Ok(EnumerationPlan {
            size,
            n,
            total_tuples: total,
        })
    }
}

/// Exact E[estimator(X_1..X_n)] under i.i.d. sampling from `probs`:
/// Σ over all ordered tuples of (Π_i p(x_i)) · estimator(tuple).
/// The tuple weights are checked to sum to 1 within 1e-10.
pub fn enumerate_expectation(
    mut estimator: impl FnMut(&[usize]) -> Result<DVector<f64>>,
    probs: &DVector<f64>,
    n: usize,
) -> Result<DVector<f64>> {
    let plan = EnumerationPlan::new(probs.len(), n)?;
    let mut tuple = vec![0usize; plan.n];
    let mut expectation: Option<DVector<f64>> = None;
    let mut weight_sum = 0.0;
    loop {
        let weight: f64 = tuple.iter().map(|&i| probs[i]).product();
        weight_sum += weight;
        if weight > 0.0 {
            let value = estimator(&tuple)?;
            match &mut expectation {
                None => expectation = Some(weight * value),
                Some(acc) => {
                    if acc.len() != value.len() {
                        return Err(Error::DimensionMismatch(
                            "estimator output dimension changed between tuples".into(),
                        ));
                    }
                    *acc += weight * value;
                }
            }
        }
        // Odometer increment over base-`size` digits.
        let mut pos = 0;
        loop {
            if pos == plan.n {
                let expectation =
                    expectation.ok_or_else(|| Error::invalid("all tuple weights are zero"))?;
                if (weight_sum - 1.0).abs() > 1e-10 {
                    return Err(Error::invalid(format!(
                        "tuple weights sum to {weight_sum}, not 1"
                    )));
                }
                return Ok(expectation);
            }
            tuple[pos] += 1;
            if tuple[pos] < plan.size {
                break;
            }
            tuple[pos] = 0;
            pos += 1;
        }
    }
}

/// Central-difference gradient of a scalar function of θ.
pub fn fd_gradient(
    f: impl Fn(&Parameters) -> Result<f64>,
    theta: &Parameters,
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
        let plus = f(&Parameters::new(probe.clone())?)?;
        probe[i] = base - h;
        let minus = f(&Parameters::new(probe.clone())?)?;
        probe[i] = base;
        let slope = (plus - minus) / (2.0 * h);
        if !slope.is_finite() {
            return Err(Error::NonFinite("finite-difference gradient".into()));
        }
        grad[i] = slope;
    }
    Ok(grad)
}

/// Exact ‖ψ_θ‖_ρ on a finite space by full summation.
pub fn exact_norm(ansatz: &dyn Ansatz, theta: &Parameters, rho: &Measure) -> Result<f64> {
    let size = ansatz
        .space()
        .finite_size()
        .ok_or_else(|| Error::invalid("exact_norm needs a finite space"))?;
    let psi = crate::model::full_values(ansatz, theta, size)?;
    Ok(inner_product(&psi, &psi, rho)?.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ansatz::TableAnsatz;
    use approx::assert_abs_diff_eq;

    #[test]
    fn constant_estimator_is_normalized() {
        let probs = DVector::from_vec(vec![0.3, 0.2, 0.5]);
        let c = DVector::from_vec(vec![1.5, -2.0]);
        let out = enumerate_expectation(|_| Ok(c.clone()), &probs, 3).unwrap();
        assert_abs_diff_eq!((out - c).norm(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn guard_rejects_large_plans() {
        assert!(EnumerationPlan::new(10, 7).is_err());
        assert!(EnumerationPlan::new(10, 6).is_ok());
    }

    #[test]
    fn sample_mean_estimator_recovers_population_mean() {
        // E[(1/n)Σ f(X_i)] = E[f(X)] for any f.
        let probs = DVector::from_vec(vec![0.25, 0.75]);
        let f = [2.0, -1.0];
        let out = enumerate_expectation(
            |tuple| {
                let mean = tuple.iter().map(|&i| f[i]).sum::<f64>() / tuple.len() as f64;
                Ok(DVector::from_vec(vec![mean]))
            },
            &probs,
            3,
        )
        .unwrap();
        assert_abs_diff_eq!(out[0], 0.25 * 2.0 - 0.75, epsilon = 1e-14);
    }

    #[test]
    fn exact_norm_values() {
        let ansatz = TableAnsatz::new(2).unwrap();
        let rho = Measure::uniform(2).unwrap();
        let ones = Parameters::from_slice(&[1.0, 1.0]).unwrap();
        assert_abs_diff_eq!(exact_norm(&ansatz, &ones, &rho).unwrap(), 1.0);
        let skew = Parameters::from_slice(&[2.0, 1.0]).unwrap();
        assert_abs_diff_eq!(
            exact_norm(&ansatz, &skew, &rho).unwrap(),
            (2.5f64).sqrt(),
            epsilon = 1e-14
        );
        let point_mass = Measure::finite_weights(&[1.0, 0.0]).unwrap();
        assert_abs_diff_eq!(exact_norm(&ansatz, &ones, &point_mass).unwrap(), 1.0);
    }

    #[test]
    fn fd_gradient_of_quadratic() {
        let theta = Parameters::from_slice(&[1.0, -2.0]).unwrap();
        let g = fd_gradient(
            |t| Ok(t.as_vector().norm_squared()),
            &theta,
            1e-5,
        )
        .unwrap();
        assert_abs_diff_eq!(g[0], 2.0, epsilon = 1e-9);
        assert_abs_diff_eq!(g[1], -4.0, epsilon = 1e-9);
    }
}
