//! Convergence-rate measurement and assumption monitoring: running minima,
//! log-log slope fits, per-step Lipschitz estimates, the moment bounds the
//! convergence statements assume, estimator variance scans, and the
//! inequality ledgers that check a finished run against the stated bounds.

use nalgebra::DVector;
use rayon::prelude::*;

use crate::ansatz::{Ansatz, Parameters};
use crate::error::{Error, Result};
use crate::model::{ConfigPoint, Hamiltonian, Measure};
use crate::reduce::{pairwise_mean, pairwise_sum};
use crate::sampler::{BornDensity, SampleBatch};

/// Prefix minima of a series.
pub fn running_min(series: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(series.len());
    let mut best = f64::INFINITY;
    for &v in series {
        best = best.min(v);
        out.push(best);
    }
    out
}

/// Least-squares fit of log(value) against log(step index); steps below
/// `burn_in` (and step 0) are excluded to skip the pre-asymptotic period.
#[derive(Clone, Copy, Debug)]
pub struct ConvergenceFit {
    pub slope: f64,
    pub intercept: f64,
    pub burn_in_step: usize,
}

pub fn loglog_slope(series: &[f64], burn_in: usize) -> Result<ConvergenceFit> {
    let start = burn_in.max(1);
    let points: Vec<(f64, f64)> = series
        .iter()
        .enumerate()
        .skip(start)
        .map(|(m, &v)| {
            if v <= 0.0 {
                Err(Error::invalid(format!(
                    "log-log fit needs positive values, got {v} at step {m}"
                )))
            } else {
                Ok(((m as f64).ln(), v.ln()))
            }
        })
        .collect::<Result<_>>()?;
    if points.len() < 10 {
        return Err(Error::invalid(format!(
            "log-log fit needs at least 10 points after burn-in, got {}",
            points.len()
        )));
    }
    let (slope, intercept) = least_squares(&points);
    Ok(ConvergenceFit {
        slope,
        intercept,
        burn_in_step: start,
    })
}

fn least_squares(points: &[(f64, f64)]) -> (f64, f64) {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (x, y) in points {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
    }
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// |G(θ')-G(θ)|/|θ'-θ| — the per-step numerical estimate of the gradient's
/// Lipschitz constant.
pub fn lipschitz_estimate(
    g_prev: &DVector<f64>,
    g_curr: &DVector<f64>,
    theta_prev: &DVector<f64>,
    theta_curr: &DVector<f64>,
) -> Result<f64> {
    let displacement = (theta_curr - theta_prev).norm();
    if displacement == 0.0 {
        return Err(Error::invalid("zero parameter displacement"));
    }
    Ok((g_curr - g_prev).norm() / displacement)
}

/// Moment bounds monitored for the energy phase: L^q(p_θ)-norms of the
/// local energy, of ∇_θ(Hψ)/ψ, of ∇_θψ/ψ, and of the parameter Hessian
/// ratio. `hess2` is `None` when the ansatz has no Hessian capability.
#[derive(Clone, Copy, Debug)]
pub struct VmcMoments {
    pub e4: f64,
    pub de2: f64,
    pub dpsi4: f64,
    pub hess2: Option<f64>,
}

impl VmcMoments {
    pub fn max_component(&self) -> f64 {
        self.e4
            .max(self.de2)
            .max(self.dpsi4)
            .max(self.hess2.unwrap_or(0.0))
    }
}

/// Moment bounds monitored for the supervised phase, all relative to
/// ‖ψ‖_ρ.
#[derive(Clone, Copy, Debug)]
pub struct PretrainMoments {
    pub v: f64,
    pub g: f64,
    pub h: Option<f64>,
}

impl PretrainMoments {
    pub fn max_component(&self) -> f64 {
        self.v.max(self.g).max(self.h.unwrap_or(0.0))
    }
}

fn spectral_norm_symmetric(m: &nalgebra::DMatrix<f64>) -> f64 {
    m.clone()
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .fold(0.0f64, |acc, &e| acc.max(e.abs()))
}

/// Exact moments on a finite space under the Born density p_θ.
pub fn vmc_moments_exact(
    hamiltonian: &Hamiltonian,
    ansatz: &dyn Ansatz,
    theta: &Parameters,
) -> Result<VmcMoments> {
    let size = ansatz
        .space()
        .finite_size()
        .ok_or_else(|| Error::invalid("exact moments need a finite space"))?;
    let density = BornDensity::from_ansatz(ansatz, theta)?;
    let mut e4 = 0.0;
    let mut de2 = 0.0;
    let mut dpsi4 = 0.0;
    let mut hess2 = if ansatz.has_hessian() { Some(0.0) } else { None };
    for i in 0..size {
        let p = density.weights()[i];
        if p == 0.0 {
            continue;
        }
        let x = ConfigPoint::Finite(i);
        let value = ansatz.value(theta, &x)?;
        let e = crate::vmc::local_energy(hamiltonian, ansatz, theta, &x)?;
        e4 += p * e.powi(4);
        let de = crate::vmc::grad_local_energy(hamiltonian, ansatz, theta, &x)?;
        // ∇(Hψ)/ψ = ∇E + E·∇ψ/ψ.
        let grad_ratio = ansatz.grad_theta(theta, &x)? / value;
        let dhpsi_ratio = de + e * &grad_ratio;
        de2 += p * dhpsi_ratio.norm_squared();
        dpsi4 += p * grad_ratio.norm().powi(4);
        if let Some(acc) = &mut hess2 {
            let h = ansatz.hessian_theta(theta, &x)?;
            *acc += p * (spectral_norm_symmetric(&h) / value.abs()).powi(2);
        }
    }
    Ok(VmcMoments {
        e4: e4.powf(0.25),
        de2: de2.sqrt(),
        dpsi4: dpsi4.powf(0.25),
        hess2: hess2.map(|v| v.sqrt()),
    })
}

/// Exact supervised-phase moments on a finite space under ρ.
pub fn pretrain_moments_exact(
    ansatz: &dyn Ansatz,
    theta: &Parameters,
    rho: &Measure,
) -> Result<PretrainMoments> {
    let size = ansatz
        .space()
        .finite_size()
        .ok_or_else(|| Error::invalid("exact moments need a finite space"))?;
    let w = rho
        .weights()
        .ok_or_else(|| Error::invalid("exact moments need finite weights"))?;
    let mut psi_sq = 0.0;
    let mut psi_4 = 0.0;
    let mut grad_4 = 0.0;
    let mut hess_4 = if ansatz.has_hessian() { Some(0.0) } else { None };
    for i in 0..size {
        let p = w[i];
        if p == 0.0 {
            continue;
        }
        let x = ConfigPoint::Finite(i);
        let value = ansatz.value(theta, &x)?;
        psi_sq += p * value * value;
        psi_4 += p * value.powi(4);
        grad_4 += p * ansatz.grad_theta(theta, &x)?.norm().powi(4);
        if let Some(acc) = &mut hess_4 {
            let h = ansatz.hessian_theta(theta, &x)?;
            *acc += p * spectral_norm_symmetric(&h).powi(4);
        }
    }
    if psi_sq <= 0.0 {
        return Err(Error::ZeroWaveFunction("moment normalization".into()));
    }
    let norm = psi_sq.sqrt();
    Ok(PretrainMoments {
        v: psi_4.powf(0.25) / norm,
        g: grad_4.powf(0.25) / norm,
        h: hess_4.map(|v| v.powf(0.25) / norm),
    })
}

/// A moment value with its Monte Carlo standard error (delta method on the
/// underlying mean).
#[derive(Clone, Copy, Debug)]
pub struct MomentEstimate {
    pub value: f64,
    pub stderr: f64,
}

fn power_mean_estimate(samples: &[f64], power: f64) -> MomentEstimate {
    // samples are z_i >= 0; estimates (mean z)^power with the delta method.
    let n = samples.len() as f64;
    let mean = pairwise_mean(samples);
    let var_terms: Vec<f64> = samples.iter().map(|z| (z - mean).powi(2)).collect();
    let var = pairwise_sum(&var_terms) / (n - 1.0).max(1.0);
    let se_mean = (var / n).sqrt();
    let value = mean.powf(power);
    let stderr = if mean > 0.0 {
        power * mean.powf(power - 1.0) * se_mean
    } else {
        f64::INFINITY
    };
    MomentEstimate { value, stderr }
}

/// Monte Carlo versions of the energy-phase moments from a Born-density
/// batch, with standard errors. The ∇_θ(Hψ)/ψ term is produced by central
/// differences of the local energy in θ (∇(Hψ)/ψ = ∇E + E·∇ψ/ψ), which
/// costs 2d Hamiltonian applications per sample; Hessian moments need the
/// Hessian capability and are `None` otherwise.
pub fn vmc_moments_mc(
    hamiltonian: &crate::model::Hamiltonian,
    ansatz: &dyn Ansatz,
    theta: &Parameters,
    batch: &SampleBatch,
) -> Result<(VmcMoments, VmcMoments)> {
    let energies = batch
        .local_energy
        .as_ref()
        .ok_or_else(|| Error::invalid("moment batch has no local energies"))?;
    let e4_samples: Vec<f64> = energies.iter().map(|e| e.powi(4)).collect();
    let dpsi4_samples: Vec<f64> = batch
        .psi
        .iter()
        .zip(&batch.grad_psi)
        .map(|(psi, grad)| (grad.norm() / psi.abs()).powi(4))
        .collect();
    let h = crate::ansatz::default_fd_step(1.0);
    let de2_samples: Result<Vec<f64>> = batch
        .points
        .par_iter()
        .zip(batch.psi.par_iter().zip(batch.grad_psi.par_iter()))
        .zip(energies.par_iter())
        .map(|((x, (psi, grad)), energy)| {
            let de = crate::oracle::fd_gradient(
                |t| crate::vmc::local_energy(hamiltonian, ansatz, t, x),
                theta,
                h,
            )?;
            let dhpsi_ratio = de + *energy * (grad / *psi);
            Ok(dhpsi_ratio.norm_squared())
        })
        .collect();
    let de2_samples = de2_samples?;
    let e4 = power_mean_estimate(&e4_samples, 0.25);
    let dpsi4 = power_mean_estimate(&dpsi4_samples, 0.25);
    let de2 = power_mean_estimate(&de2_samples, 0.5);
    Ok((
        VmcMoments {
            e4: e4.value,
            de2: de2.value,
            dpsi4: dpsi4.value,
            hess2: None,
        },
        VmcMoments {
            e4: e4.stderr,
            de2: de2.stderr,
            dpsi4: dpsi4.stderr,
            hess2: None,
        },
    ))
}

/// Monte Carlo versions of the supervised moments from a ρ-batch, with
/// standard errors. The normalizing ‖ψ‖_ρ uses the same batch.
pub fn pretrain_moments_mc(
    batch: &SampleBatch,
) -> Result<(PretrainMoments, PretrainMoments)> {
    let psi_sq: Vec<f64> = batch.psi.iter().map(|v| v * v).collect();
    let norm = pairwise_mean(&psi_sq).sqrt();
    if norm <= 0.0 {
        return Err(Error::ZeroWaveFunction("moment normalization".into()));
    }
    let psi_4: Vec<f64> = batch.psi.iter().map(|v| v.powi(4)).collect();
    let grad_4: Vec<f64> = batch.grad_psi.iter().map(|g| g.norm().powi(4)).collect();
    let v = power_mean_estimate(&psi_4, 0.25);
    let g = power_mean_estimate(&grad_4, 0.25);
    Ok((
        PretrainMoments {
            v: v.value / norm,
            g: g.value / norm,
            h: None,
        },
        PretrainMoments {
            v: v.stderr / norm,
            g: g.stderr / norm,
            h: None,
        },
    ))
}

/// Running maximum of the monitored moments over a training run — the
/// empirical stand-in for the uniform constant the bounds assume.
#[derive(Clone, Copy, Debug, Default)]
pub struct MomentTracker {
    max_seen: f64,
    steps: usize,
}

impl MomentTracker {
    pub fn observe(&mut self, max_component: f64) {
        self.max_seen = self.max_seen.max(max_component);
        self.steps += 1;
    }

    pub fn c_psi(&self) -> f64 {
        self.max_seen
    }

    pub fn steps(&self) -> usize {
        self.steps
    }
}

/// Empirical variance of a vector estimator as a function of batch size:
/// for each n, `reps` independent draws of the estimate, reduced to the
/// total variance Σ_i Var(g_i). `make` must be deterministic in
/// (n, rep index).
pub fn variance_vs_n(
    make: impl Fn(usize, u64) -> Result<DVector<f64>> + Sync,
    n_list: &[usize],
    reps: usize,
) -> Result<Vec<(usize, f64)>> {
    if reps < 100 {
        return Err(Error::invalid("variance scan needs at least 100 repetitions"));
    }
    let mut out = Vec::with_capacity(n_list.len());
    for &n in n_list {
        let draws: Result<Vec<DVector<f64>>> = (0..reps as u64)
            .into_par_iter()
            .map(|rep| make(n, rep))
            .collect();
        let draws = draws?;
        let dim = draws[0].len();
        let mean = crate::reduce::pairwise_sum_vectors(&draws, dim) / reps as f64;
        let sq_dev: Vec<f64> = draws.iter().map(|g| (g - &mean).norm_squared()).collect();
        out.push((n, pairwise_sum(&sq_dev) / (reps as f64 - 1.0)));
    }
    Ok(out)
}

/// Log-log slope of a (n, variance) table.
pub fn variance_slope(table: &[(usize, f64)]) -> Result<f64> {
    let points: Vec<(f64, f64)> = table
        .iter()
        .map(|&(n, v)| {
            if v <= 0.0 {
                Err(Error::invalid("variance must be positive for the slope fit"))
            } else {
                Ok(((n as f64).ln(), v.ln()))
            }
        })
        .collect::<Result<_>>()?;
    if points.len() < 2 {
        return Err(Error::invalid("need at least two batch sizes"));
    }
    Ok(least_squares(&points).0)
}

/// Per-step inputs for the inequality ledger: the learning rate, the exact
/// gradient norm, and the (shifted, nonnegative) loss.
#[derive(Clone, Copy, Debug)]
pub struct LedgerEntry {
    pub eta: f64,
    pub grad_norm_exact: f64,
    pub loss: f64,
}

/// Accumulated inequality check
/// Σ_m η_m|∇L(θ_m)|² ≤ 2·C_r²·L(θ_0) + Ĉ·Σ_m η_m²/n, with the constant Ĉ
/// fitted on the first half of the run and the inequality evaluated on the
/// whole of it. Losses must be supplied in a convention where they are
/// nonnegative (shift by the known lower bound), since only loss
/// differences enter the underlying telescoping argument.
#[derive(Clone, Copy, Debug)]
pub struct LedgerReport {
    pub lhs: f64,
    pub initial_loss: f64,
    pub sum_eta_sq_over_n: f64,
    pub fitted_c: f64,
    pub rhs: f64,
    pub ratio: f64,
    pub holds: bool,
    /// Second-half LHS increment no larger than the first-half increment —
    /// the sublinear-growth marker.
    pub sublinear: bool,
    pub cr: f64,
}

pub fn inequality_ledger(entries: &[LedgerEntry], n: usize, cr: f64) -> Result<LedgerReport> {
    if entries.len() < 4 {
        return Err(Error::invalid("ledger needs at least 4 steps"));
    }
    if n == 0 || cr < 1.0 {
        return Err(Error::invalid("ledger needs n >= 1 and cr >= 1"));
    }
    if entries.iter().any(|e| e.loss < 0.0) {
        return Err(Error::invalid(
            "ledger losses must be shifted to be nonnegative",
        ));
    }
    let initial_loss = entries[0].loss;
    let half = entries.len() / 2;
    let lhs_terms: Vec<f64> = entries
        .iter()
        .map(|e| e.eta * e.grad_norm_exact * e.grad_norm_exact)
        .collect();
    let eta_sq_terms: Vec<f64> = entries.iter().map(|e| e.eta * e.eta / n as f64).collect();
    let lhs_half = pairwise_sum(&lhs_terms[..half]);
    let eta_sq_half = pairwise_sum(&eta_sq_terms[..half]);
    let lhs = pairwise_sum(&lhs_terms);
    let sum_eta_sq_over_n = pairwise_sum(&eta_sq_terms);

    let base = 2.0 * cr * cr * initial_loss;
    let fitted_c = if eta_sq_half > 0.0 {
        ((lhs_half - base) / eta_sq_half).max(0.0)
    } else {
        0.0
    };
    let rhs = base + fitted_c * sum_eta_sq_over_n;
    let ratio = if rhs > 0.0 { lhs / rhs } else { f64::INFINITY };
    let sublinear = (lhs - lhs_half) <= lhs_half + 1e-12;
    Ok(LedgerReport {
        lhs,
        initial_loss,
        sum_eta_sq_over_n,
        fitted_c,
        rhs,
        ratio,
        holds: ratio <= 1.0,
        sublinear,
        cr,
    })
}

/// Checks the per-step Lipschitz estimates against the envelope
/// C'(C_ψ⁴+1), with C' fitted once on the first half (after burn-in) and
/// the rest compared against it.
#[derive(Clone, Copy, Debug)]
pub struct LipschitzEnvelope {
    pub c_prime: f64,
    pub bound: f64,
    pub max_second_half: f64,
    pub within: bool,
}

pub fn lipschitz_envelope(
    lipschitz: &[f64],
    c_psi: f64,
    burn_in: usize,
) -> Result<LipschitzEnvelope> {
    let tail: Vec<f64> = lipschitz.iter().copied().skip(burn_in).collect();
    if tail.len() < 10 {
        return Err(Error::invalid("need at least 10 Lipschitz samples after burn-in"));
    }
    let scale = c_psi.powi(4) + 1.0;
    let half = tail.len() / 2;
    let c_prime = tail[..half].iter().fold(0.0f64, |a, &b| a.max(b)) / scale;
    let bound = c_prime * scale;
    let max_second_half = tail[half..].iter().fold(0.0f64, |a, &b| a.max(b));
    Ok(LipschitzEnvelope {
        c_prime,
        bound,
        max_second_half,
        within: max_second_half <= bound,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ansatz::TableAnsatz;
    use approx::assert_abs_diff_eq;
    use nalgebra::DMatrix;

    #[test]
    fn running_min_examples() {
        assert_eq!(running_min(&[3.0, 1.0, 2.0, 0.5]), vec![3.0, 1.0, 1.0, 0.5]);
        let monotone = vec![5.0, 4.0, 3.0, 2.0];
        assert_eq!(running_min(&monotone), monotone);
        let constant = vec![2.0; 6];
        assert_eq!(running_min(&constant), constant);
        // Idempotent and nonincreasing.
        let series = vec![2.0, 3.0, 1.0, 4.0, 0.5];
        let once = running_min(&series);
        assert_eq!(running_min(&once), once);
        assert!(once.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn loglog_slope_recovers_power_laws() {
        let series: Vec<f64> = (0..500).map(|m| ((m.max(1)) as f64).powf(-0.25)).collect();
        let fit = loglog_slope(&series, 1).unwrap();
        assert_abs_diff_eq!(fit.slope, -0.25, epsilon = 1e-6);
        let constant = vec![3.0; 100];
        let fit = loglog_slope(&constant, 1).unwrap();
        assert_abs_diff_eq!(fit.slope, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn loglog_slope_rejects_bad_input() {
        assert!(loglog_slope(&[1.0; 5], 0).is_err());
        let with_zero = vec![1.0, 0.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0];
        assert!(loglog_slope(&with_zero, 0).is_err());
    }

    #[test]
    fn lipschitz_of_linear_map() {
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 0.5]);
        let t0 = DVector::from_vec(vec![1.0, 1.0]);
        let t1 = DVector::from_vec(vec![1.3, 0.7]);
        let est = lipschitz_estimate(&(&a * &t0), &(&a * &t1), &t0, &t1).unwrap();
        // Never exceeds the operator norm; reaches it along the top
        // singular direction.
        assert!(est <= 2.0 + 1e-12);
        let along_top = DVector::from_vec(vec![2.0, 1.0]);
        let est = lipschitz_estimate(&(&a * &t0), &(&a * &along_top), &t0, &along_top).unwrap();
        assert_abs_diff_eq!(est, 2.0, epsilon = 1e-12);
        // Constant map has estimate zero.
        let c = DVector::from_vec(vec![1.0, 2.0]);
        assert_abs_diff_eq!(lipschitz_estimate(&c, &c, &t0, &t1).unwrap(), 0.0);
        assert!(lipschitz_estimate(&c, &c, &t0, &t0).is_err());
    }

    #[test]
    fn moments_hand_values() {
        let h = Hamiltonian::matrix(DMatrix::from_row_slice(2, 2, &[2.0, -1.0, -1.0, 2.0]))
            .unwrap();
        let ansatz = TableAnsatz::new(2).unwrap();
        let eigen = Parameters::from_slice(&[1.0, 1.0]).unwrap();
        let m = vmc_moments_exact(&h, &ansatz, &eigen).unwrap();
        // At an eigenstate the local energy is constant 1.
        assert_abs_diff_eq!(m.e4, 1.0, epsilon = 1e-12);
        let skew = Parameters::from_slice(&[2.0, 1.0]).unwrap();
        let m = vmc_moments_exact(&h, &ansatz, &skew).unwrap();
        assert_abs_diff_eq!(m.dpsi4, 0.25f64.powf(0.25), epsilon = 1e-12);
        // Table ansatz has a zero Hessian.
        assert_abs_diff_eq!(m.hess2.unwrap(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn ledger_zero_gradient_run() {
        let entries = vec![
            LedgerEntry {
                eta: 0.1,
                grad_norm_exact: 0.0,
                loss: 1.0
            };
            8
        ];
        let report = inequality_ledger(&entries, 4, 1.0).unwrap();
        assert!(report.holds);
        assert_abs_diff_eq!(report.lhs, 0.0);
    }

    #[test]
    fn ledger_rejects_negative_loss() {
        let entries = vec![
            LedgerEntry {
                eta: 0.1,
                grad_norm_exact: 0.1,
                loss: -1.0
            };
            8
        ];
        assert!(inequality_ledger(&entries, 4, 1.0).is_err());
    }

    #[test]
    fn variance_slope_of_synthetic_table() {
        // Var ∝ 1/n exactly.
        let table: Vec<(usize, f64)> = [2usize, 4, 8, 16].iter().map(|&n| (n, 3.0 / n as f64)).collect();
        assert_abs_diff_eq!(variance_slope(&table).unwrap(), -1.0, epsilon = 1e-12);
    }
}
