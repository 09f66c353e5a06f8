//! Energy minimization: the Rayleigh-quotient functional, its exact
//! gradient on finite spaces, the centered unbiased batch estimator, and
//! the plain-SGD training loop.

use nalgebra::DVector;

use crate::ansatz::{Ansatz, Parameters};
use crate::error::{Error, Result};
use crate::model::{apply_hamiltonian, full_values, ConfigPoint, Hamiltonian};
use crate::reduce::{pairwise_mean, pairwise_sum_vectors};
use crate::sampler::{
    sample_exact_finite, AnsatzAmplitude, BornDensity, McmcOptions, SampleBatch, WalkerChain,
};
use crate::trace::{vmc_columns, Trace, TraceRow};

/// Parameter updates stop and the run is marked diverged once |θ|_∞ passes
/// this bound; the convergence statements assume uniformly bounded moment
/// constants, which a runaway toy run no longer satisfies.
pub const DIVERGENCE_THETA_BOUND: f64 = 1e8;

/// Batch energy summary. The mean is tied to the cached per-sample local
/// energies it came from.
#[derive(Clone, Debug)]
pub struct EnergyReport {
    pub mean: f64,
    pub exact: Option<f64>,
    pub per_sample: Vec<f64>,
}

impl EnergyReport {
    pub fn from_batch(batch: &SampleBatch) -> Result<Self> {
        let energies = batch
            .local_energy
            .as_ref()
            .ok_or_else(|| Error::invalid("batch has no local energies attached"))?;
        Ok(EnergyReport {
            mean: pairwise_mean(energies),
            exact: None,
            per_sample: energies.clone(),
        })
    }
}

/// Which estimator produced a gradient estimate.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GradientKind {
    /// Centered local-energy estimator for the Rayleigh quotient.
    Energy,
    /// Balanced-coefficient estimator for the supervised objective.
    Supervised,
    /// Term-by-term plug-in for the supervised objective; biased, kept as a
    /// negative control.
    SupervisedPlugin,
}

#[derive(Clone, Debug)]
pub struct GradientEstimate {
    pub g: DVector<f64>,
    pub n: usize,
    pub kind: GradientKind,
}

impl GradientEstimate {
    pub fn new(g: DVector<f64>, n: usize, kind: GradientKind) -> Result<Self> {
        if g.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("gradient estimate".into()));
        }
        Ok(GradientEstimate { g, n, kind })
    }

    pub fn norm(&self) -> f64 {
        self.g.norm()
    }
}

/// Learning-rate schedules. All are positive and nonincreasing.
#[derive(Clone, Debug, PartialEq)]
pub enum Schedule {
    Constant { eta0: f64 },
    /// η_m = η₀·√(n/(m+1)); the batch size enters so the step/batch
    /// trade-off matches the stated convergence rate.
    InverseSqrt { eta0: f64, n: usize },
    /// η_m = η₀/√(1 + m/m₀).
    OffsetInverseSqrt { eta0: f64, m0: f64 },
}

impl Schedule {
    pub fn validate(&self) -> Result<()> {
        let ok = match self {
            Schedule::Constant { eta0 } => *eta0 > 0.0,
            Schedule::InverseSqrt { eta0, n } => *eta0 > 0.0 && *n >= 1,
            Schedule::OffsetInverseSqrt { eta0, m0 } => *eta0 > 0.0 && *m0 > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!("bad schedule {self:?}")))
        }
    }

    pub fn eta(&self, m: usize) -> f64 {
        match self {
            Schedule::Constant { eta0 } => *eta0,
            Schedule::InverseSqrt { eta0, n } => eta0 * (*n as f64 / (m as f64 + 1.0)).sqrt(),
            Schedule::OffsetInverseSqrt { eta0, m0 } => eta0 / (1.0 + m as f64 / m0).sqrt(),
        }
    }
}

/// Local energy E_θ(x) = (Hψ_θ)(x)/ψ_θ(x). Undefined where ψ vanishes —
/// such configurations carry zero sampling probability, so reaching one is
/// reported, not patched.
pub fn local_energy(
    hamiltonian: &Hamiltonian,
    ansatz: &dyn Ansatz,
    theta: &Parameters,
    x: &ConfigPoint,
) -> Result<f64> {
    let value = ansatz.value(theta, x)?;
    if value == 0.0 {
        return Err(Error::ZeroWaveFunction("local energy".into()));
    }
    Ok(apply_hamiltonian(hamiltonian, ansatz, theta, x)? / value)
}

/// Rayleigh quotient ⟨ψ|H|ψ⟩/⟨ψ|ψ⟩ by full summation on a finite space.
pub fn exact_energy(
    hamiltonian: &Hamiltonian,
    ansatz: &dyn Ansatz,
    theta: &Parameters,
) -> Result<f64> {
    let h = hamiltonian
        .as_matrix()
        .ok_or_else(|| Error::invalid("exact_energy needs a matrix Hamiltonian"))?;
    let psi = full_values(ansatz, theta, h.nrows())?;
    let norm_sq = psi.norm_squared();
    if norm_sq == 0.0 {
        return Err(Error::ZeroWaveFunction("exact energy".into()));
    }
    Ok(psi.dot(&(h * &psi)) / norm_sq)
}

/// Exact gradient of the energy on a finite space:
/// 2·Σ_x p_θ(x)(E_θ(x) - L(θ))·∇_θlog|ψ_θ(x)|.
pub fn exact_grad_energy(
    hamiltonian: &Hamiltonian,
    ansatz: &dyn Ansatz,
    theta: &Parameters,
) -> Result<DVector<f64>> {
    let h = hamiltonian
        .as_matrix()
        .ok_or_else(|| Error::invalid("exact_grad_energy needs a matrix Hamiltonian"))?;
    let size = h.nrows();
    let density = BornDensity::from_ansatz(ansatz, theta)?;
    let energy = exact_energy(hamiltonian, ansatz, theta)?;
    let mut terms = Vec::with_capacity(size);
    for i in 0..size {
        let p = density.weights()[i];
        if p == 0.0 {
            continue;
        }
        let x = ConfigPoint::Finite(i);
        let e = local_energy(hamiltonian, ansatz, theta, &x)?;
        terms.push(p * (e - energy) * ansatz.grad_log_abs(theta, &x)?);
    }
    Ok(2.0 * pairwise_sum_vectors(&terms, theta.dim()))
}

/// ∇_θE_θ(x) on a finite space: (∇(Hψ)(x) - E_θ(x)∇ψ(x))/ψ(x). For a
/// symmetric Hamiltonian this averages to zero under the Born density, the
/// identity that makes the centered estimator unbiased.
pub fn grad_local_energy(
    hamiltonian: &Hamiltonian,
    ansatz: &dyn Ansatz,
    theta: &Parameters,
    x: &ConfigPoint,
) -> Result<DVector<f64>> {
    let h = hamiltonian
        .as_matrix()
        .ok_or_else(|| Error::invalid("grad_local_energy needs a matrix Hamiltonian"))?;
    let i = x.index()?;
    let value = ansatz.value(theta, x)?;
    if value == 0.0 {
        return Err(Error::ZeroWaveFunction("local-energy gradient".into()));
    }
    let mut grad_h_psi = DVector::zeros(theta.dim());
    for j in 0..h.ncols() {
        grad_h_psi += h[(i, j)] * ansatz.grad_theta(theta, &ConfigPoint::Finite(j))?;
    }
    let energy = local_energy(hamiltonian, ansatz, theta, x)?;
    Ok((grad_h_psi - energy * ansatz.grad_theta(theta, x)?) / value)
}

/// The centered batch estimator
/// Ĝ = (2/(n-1))·Σ_i (E_θ(X_i) - L̂)·∇_θlog|ψ_θ(X_i)| with L̂ the batch
/// mean of the local energies. Unbiased for the exact energy gradient
/// under i.i.d. Born sampling.
pub fn grad_estimator(batch: &SampleBatch, dim: usize) -> Result<GradientEstimate> {
    let n = batch.n();
    if n < 2 {
        return Err(Error::invalid("gradient estimator needs n >= 2"));
    }
    let energies = batch
        .local_energy
        .as_ref()
        .ok_or_else(|| Error::invalid("batch has no local energies attached"))?;
    let mean = pairwise_mean(energies);
    let mut terms = Vec::with_capacity(n);
    for ((&psi, grad), &energy) in batch.psi.iter().zip(&batch.grad_psi).zip(energies) {
        if psi == 0.0 {
            return Err(Error::ZeroWaveFunction("gradient estimator sample".into()));
        }
        if !psi.is_finite() {
            return Err(Error::NonFinite("wave-function value in batch".into()));
        }
        terms.push((energy - mean) * (grad / psi));
    }
    let g = pairwise_sum_vectors(&terms, dim) * (2.0 / (n as f64 - 1.0));
    GradientEstimate::new(g, n, GradientKind::Energy)
}

/// How batches are drawn during training.
#[derive(Clone, Debug)]
pub enum SamplerKind {
    /// Exact inverse-CDF sampling on a finite space.
    Exact,
    /// Persistent Metropolis walker ensemble on a continuous box.
    Metropolis(McmcOptions),
}

#[derive(Clone, Debug)]
pub struct VmcConfig {
    pub hamiltonian: Hamiltonian,
    pub n: usize,
    pub steps: usize,
    pub schedule: Schedule,
    pub seed: u64,
    pub sampler: SamplerKind,
    /// On finite spaces, also record the exact energy and exact gradient
    /// norm per step (used by the inequality ledgers).
    pub record_exact: bool,
}

impl VmcConfig {
    fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::invalid("batch size must be >= 2"));
        }
        if self.steps < 1 {
            return Err(Error::invalid("step count must be >= 1"));
        }
        self.schedule.validate()
    }
}

#[derive(Clone, Debug)]
pub struct TrainState {
    pub theta: Parameters,
    pub steps_done: usize,
    pub seed: u64,
}

#[derive(Debug)]
pub struct RunOutput {
    pub state: TrainState,
    pub trace: Trace,
    /// Set when the divergence guard tripped; the last trace row is the
    /// diagnostic record for the aborted step.
    pub divergence: Option<String>,
}

// Dedicated stream for batch draws, clear of the per-walker streams.
const BATCH_STREAM: u64 = 1 << 40;

enum BatchSource {
    Exact,
    Chain(WalkerChain),
}

/// Plain SGD on the energy: per step, draw a batch from the current Born
/// density, form the centered estimate, and move against it. Emits one
/// trace row per step.
pub fn vmc_train(ansatz: &dyn Ansatz, theta0: Parameters, cfg: &VmcConfig) -> Result<RunOutput> {
    cfg.validate()?;
    if theta0.dim() != ansatz.param_dim() {
        return Err(Error::DimensionMismatch("initial parameter dimension".into()));
    }
    let finite = ansatz.space().finite_size().is_some();
    let record_exact = cfg.record_exact && finite;
    let mcmc = matches!(cfg.sampler, SamplerKind::Metropolis(_));

    let mut rng = crate::sampler::stream_rng(cfg.seed, BATCH_STREAM);
    let mut theta = theta0;
    let mut source = match (&cfg.sampler, finite) {
        (SamplerKind::Exact, true) => BatchSource::Exact,
        (SamplerKind::Exact, false) => {
            return Err(Error::invalid("exact sampling needs a finite space"))
        }
        (SamplerKind::Metropolis(opts), false) => {
            opts.validate()?;
            let amplitude = AnsatzAmplitude {
                ansatz,
                theta: &theta,
            };
            let step = match opts.step_size {
                Some(s) => s,
                None => crate::sampler::tune_step_size(ansatz.space(), &amplitude, cfg.seed ^ 0x5eed)?,
            };
            let mut chain = WalkerChain::new(ansatz.space(), &amplitude, cfg.n, step, cfg.seed)?;
            for _ in 0..opts.burn_in {
                chain.step(&amplitude)?;
            }
            BatchSource::Chain(chain)
        }
        (SamplerKind::Metropolis(_), true) => {
            return Err(Error::invalid("Metropolis sampling needs a continuous space"))
        }
    };

    let mut trace = Trace::new(
        vmc_columns(record_exact, mcmc),
        sampler_description(&cfg.sampler, cfg.n),
        format!(
            "vmc ansatz={} d={} steps={} seed={} schedule={:?}",
            ansatz.kind(),
            ansatz.param_dim(),
            cfg.steps,
            cfg.seed,
            cfg.schedule
        ),
    );

    let mut runmin = f64::INFINITY;
    let mut prev: Option<(DVector<f64>, Parameters)> = None;
    // On finite spaces the Lipschitz diagnostic uses the exact gradients;
    // the estimator-based ratio inflates like 1/η once the batch noise
    // dominates the parameter motion.
    let mut prev_exact: Option<(DVector<f64>, Parameters)> = None;
    let mut divergence = None;

    for m in 0..cfg.steps {
        let eta = cfg.schedule.eta(m);
        let (batch, acceptance) = match &mut source {
            BatchSource::Exact => {
                let density = BornDensity::from_ansatz(ansatz, &theta)?;
                let idx = sample_exact_finite(&density, cfg.n, &mut rng);
                let points = idx.into_iter().map(ConfigPoint::Finite).collect();
                (
                    SampleBatch::from_points(ansatz, &theta, points, BATCH_STREAM)?,
                    None,
                )
            }
            BatchSource::Chain(chain) => {
                let amplitude = AnsatzAmplitude {
                    ansatz,
                    theta: &theta,
                };
                let thinning = match &cfg.sampler {
                    SamplerKind::Metropolis(opts) => opts.thinning,
                    SamplerKind::Exact => unreachable!(),
                };
                chain.reset_counters();
                for _ in 0..thinning {
                    chain.step(&amplitude)?;
                }
                let batch = SampleBatch::from_points(ansatz, &theta, chain.ensemble(), 0)?;
                (batch, Some(chain.acceptance_rate()))
            }
        };
        // Numerical failures mid-run (overflowing ψ, a node hit) abort the
        // run with a diagnostic row instead of discarding the trace.
        let step_result = (|| -> Result<(EnergyReport, GradientEstimate)> {
            let batch = batch.with_local_energies(&cfg.hamiltonian, ansatz, &theta)?;
            let report = EnergyReport::from_batch(&batch)?;
            let estimate = grad_estimator(&batch, theta.dim())?;
            Ok((report, estimate))
        })();
        let (report, estimate) = match step_result {
            Ok(v) => v,
            Err(e) => {
                trace.push(diagnostic_row(m, eta));
                divergence = Some(format!("step computation failed at step {m}: {e}"));
                break;
            }
        };
        let grad_norm = estimate.norm();
        runmin = runmin.min(grad_norm);

        let mut report = report;
        let mut row = TraceRow {
            step: m,
            eta,
            energy_est: Some(report.mean),
            grad_norm,
            runmin_grad_norm: runmin,
            lipschitz_est: None,
            acceptance_rate: acceptance,
            ..Default::default()
        };
        if record_exact {
            let exact_grad = exact_grad_energy(&cfg.hamiltonian, ansatz, &theta)?;
            report.exact = Some(exact_energy(&cfg.hamiltonian, ansatz, &theta)?);
            row.energy_exact = report.exact;
            row.grad_norm_exact = Some(exact_grad.norm());
            row.lipschitz_est = prev_exact.as_ref().and_then(|(g, t)| {
                crate::diagnostics::lipschitz_estimate(g, &exact_grad, t.as_vector(), theta.as_vector())
                    .ok()
            });
            prev_exact = Some((exact_grad, theta.clone()));
        } else {
            row.lipschitz_est = prev.as_ref().and_then(|(g, t)| {
                crate::diagnostics::lipschitz_estimate(g, &estimate.g, t.as_vector(), theta.as_vector())
                    .ok()
            });
        }
        if !report.mean.is_finite() {
            row.lipschitz_est = None;
            trace.push(row);
            divergence = Some(format!("non-finite energy estimate at step {m}"));
            break;
        }
        trace.push(row);

        prev = Some((estimate.g.clone(), theta.clone()));
        match theta.step(eta, &estimate.g) {
            Ok(next) => theta = next,
            Err(e) => {
                trace.push(diagnostic_row(m, eta));
                divergence = Some(format!("parameter update failed at step {m}: {e}"));
                break;
            }
        }
        if theta.as_vector().amax() > DIVERGENCE_THETA_BOUND {
            trace.push(diagnostic_row(m, eta));
            divergence = Some(format!(
                "|theta| exceeded {DIVERGENCE_THETA_BOUND:.0e} at step {m}"
            ));
            break;
        }
        if let BatchSource::Chain(chain) = &mut source {
            let amplitude = AnsatzAmplitude {
                ansatz,
                theta: &theta,
            };
            if let Err(e) = chain.refresh(&amplitude) {
                divergence = Some(format!(
                    "walker refresh failed after the step-{m} update: {e}"
                ));
                break;
            }
        }
    }

    let steps_done = trace.rows.len();
    Ok(RunOutput {
        state: TrainState {
            theta,
            steps_done,
            seed: cfg.seed,
        },
        trace,
        divergence,
    })
}

fn diagnostic_row(step: usize, eta: f64) -> TraceRow {
    TraceRow {
        step,
        eta,
        grad_norm: f64::NAN,
        runmin_grad_norm: f64::NAN,
        ..Default::default()
    }
}

pub(crate) fn sampler_description(kind: &SamplerKind, n: usize) -> String {
    match kind {
        SamplerKind::Exact => format!("kind=exact n={n}"),
        SamplerKind::Metropolis(opts) => format!(
            "kind=metropolis n={n} burn_in={} thinning={} step_size={}",
            opts.burn_in,
            opts.thinning,
            opts.step_size
                .map(|s| s.to_string())
                .unwrap_or_else(|| "auto".into())
        ),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ansatz::TableAnsatz;
    use approx::assert_abs_diff_eq;
    use nalgebra::DMatrix;

    fn toy() -> (Hamiltonian, TableAnsatz) {
        let h = Hamiltonian::matrix(DMatrix::from_row_slice(2, 2, &[2.0, -1.0, -1.0, 2.0]))
            .unwrap();
        (h, TableAnsatz::new(2).unwrap())
    }

    #[test]
    fn local_energy_eigenstate_is_constant() {
        let (h, ansatz) = toy();
        let theta = Parameters::from_slice(&[1.0, 1.0]).unwrap();
        for i in 0..2 {
            let e = local_energy(&h, &ansatz, &theta, &ConfigPoint::Finite(i)).unwrap();
            assert_abs_diff_eq!(e, 1.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn local_energy_hand_values() {
        let (h, ansatz) = toy();
        let theta = Parameters::from_slice(&[2.0, 1.0]).unwrap();
        let e0 = local_energy(&h, &ansatz, &theta, &ConfigPoint::Finite(0)).unwrap();
        let e1 = local_energy(&h, &ansatz, &theta, &ConfigPoint::Finite(1)).unwrap();
        assert_abs_diff_eq!(e0, 1.5, epsilon = 1e-14);
        assert_abs_diff_eq!(e1, 0.0, epsilon = 1e-14);
    }

    #[test]
    fn local_energy_zero_psi_errors() {
        let (h, ansatz) = toy();
        let theta = Parameters::from_slice(&[0.0, 1.0]).unwrap();
        assert!(local_energy(&h, &ansatz, &theta, &ConfigPoint::Finite(0)).is_err());
    }

    #[test]
    fn exact_energy_values() {
        let (h, ansatz) = toy();
        let eigen = Parameters::from_slice(&[1.0, 1.0]).unwrap();
        assert_abs_diff_eq!(exact_energy(&h, &ansatz, &eigen).unwrap(), 1.0);
        let skew = Parameters::from_slice(&[2.0, 1.0]).unwrap();
        assert_abs_diff_eq!(exact_energy(&h, &ansatz, &skew).unwrap(), 1.2);
        let excited = Parameters::from_slice(&[1.0, -1.0]).unwrap();
        assert_abs_diff_eq!(exact_energy(&h, &ansatz, &excited).unwrap(), 3.0);
    }

    #[test]
    fn exact_energy_scale_invariant() {
        let (h, ansatz) = toy();
        let theta = Parameters::from_slice(&[2.0, 1.0]).unwrap();
        let base = exact_energy(&h, &ansatz, &theta).unwrap();
        for lambda in [-3.0, 0.01, 7.0] {
            let scaled = exact_energy(&h, &ansatz, &theta.scaled(lambda).unwrap()).unwrap();
            assert_abs_diff_eq!(scaled, base, epsilon = 1e-12);
        }
    }

    #[test]
    fn exact_grad_energy_hand_value() {
        let (h, ansatz) = toy();
        let theta = Parameters::from_slice(&[2.0, 1.0]).unwrap();
        let g = exact_grad_energy(&h, &ansatz, &theta).unwrap();
        assert_abs_diff_eq!(g[0], 0.24, epsilon = 1e-12);
        assert_abs_diff_eq!(g[1], -0.48, epsilon = 1e-12);
    }

    #[test]
    fn exact_grad_energy_zero_at_ground_state() {
        let (h, ansatz) = toy();
        let (_, v) = crate::model::ground_truth_spectrum(h.as_matrix().unwrap()).unwrap();
        let theta = Parameters::new(v).unwrap();
        let g = exact_grad_energy(&h, &ansatz, &theta).unwrap();
        assert!(g.norm() <= 1e-12);
    }

    #[test]
    fn gradient_orthogonal_to_scaling_direction() {
        let (h, ansatz) = toy();
        let theta = Parameters::from_slice(&[1.7, -0.6]).unwrap();
        let g = exact_grad_energy(&h, &ansatz, &theta).unwrap();
        assert_abs_diff_eq!(g.dot(theta.as_vector()), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn estimator_hand_value() {
        let (h, ansatz) = toy();
        let theta = Parameters::from_slice(&[2.0, 1.0]).unwrap();
        let points = vec![ConfigPoint::Finite(0), ConfigPoint::Finite(1)];
        let batch = SampleBatch::from_points(&ansatz, &theta, points, 0)
            .unwrap()
            .with_local_energies(&h, &ansatz, &theta)
            .unwrap();
        let est = grad_estimator(&batch, 2).unwrap();
        assert_abs_diff_eq!(est.g[0], 0.75, epsilon = 1e-12);
        assert_abs_diff_eq!(est.g[1], -1.5, epsilon = 1e-12);
    }

    #[test]
    fn estimator_zero_for_identical_samples() {
        let (h, ansatz) = toy();
        let theta = Parameters::from_slice(&[2.0, 1.0]).unwrap();
        let points = vec![ConfigPoint::Finite(0); 4];
        let batch = SampleBatch::from_points(&ansatz, &theta, points, 0)
            .unwrap()
            .with_local_energies(&h, &ansatz, &theta)
            .unwrap();
        let est = grad_estimator(&batch, 2).unwrap();
        assert!(est.norm() <= 1e-15);
    }

    #[test]
    fn schedules_decrease() {
        let schedules = [
            Schedule::InverseSqrt { eta0: 0.1, n: 16 },
            Schedule::OffsetInverseSqrt {
                eta0: 0.05,
                m0: 100.0,
            },
        ];
        for s in &schedules {
            s.validate().unwrap();
            let mut last = f64::INFINITY;
            for m in 0..50 {
                let eta = s.eta(m);
                assert!(eta > 0.0 && eta <= last);
                last = eta;
            }
        }
        assert_abs_diff_eq!(
            Schedule::OffsetInverseSqrt {
                eta0: 0.05,
                m0: 10_000.0
            }
            .eta(10_000),
            0.05 / 2.0f64.sqrt(),
            epsilon = 1e-15
        );
    }

    #[test]
    fn trainer_single_step_runs() {
        let (h, ansatz) = toy();
        let cfg = VmcConfig {
            hamiltonian: h,
            n: 8,
            steps: 1,
            schedule: Schedule::Constant { eta0: 0.05 },
            seed: 1,
            sampler: SamplerKind::Exact,
            record_exact: true,
        };
        let theta0 = Parameters::from_slice(&[2.0, 1.0]).unwrap();
        let out = vmc_train(&ansatz, theta0, &cfg).unwrap();
        assert_eq!(out.trace.rows.len(), 1);
        assert!(out.divergence.is_none());
    }

    #[test]
    fn divergence_guard_trips() {
        let (h, ansatz) = toy();
        let cfg = VmcConfig {
            hamiltonian: h,
            n: 4,
            steps: 200,
            // An absurd constant step forces overshoot.
            schedule: Schedule::Constant { eta0: 1e9 },
            seed: 3,
            sampler: SamplerKind::Exact,
            record_exact: false,
        };
        let theta0 = Parameters::from_slice(&[2.0, 1.0]).unwrap();
        let out = vmc_train(&ansatz, theta0, &cfg).unwrap();
        assert!(out.divergence.is_some());
    }
}
