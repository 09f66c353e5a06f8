//! Supervised pre-training against a target function: the scale-invariant
//! loss, its exact gradient on finite spaces, the balanced directionally
//! unbiased batch estimator with pluggable norm-estimate strategies, the
//! term-by-term plug-in estimator kept as a negative control, and the SGD
//! loop.

use std::fmt;
use std::sync::Arc;

use nalgebra::DVector;

use crate::ansatz::{Ansatz, Parameters};
use crate::error::{Error, Result};
use crate::model::{full_values, inner_product, inner_product_mc, ConfigPoint, ConfigSpace, Measure};
use crate::reduce::pairwise_sum_vectors;
use crate::sampler::{
    sample_finite_measure, stream_rng, McmcOptions, SampleBatch, WalkerChain,
};
use crate::trace::{pretrain_columns, Trace, TraceRow};
use crate::vmc::{GradientEstimate, GradientKind, RunOutput, Schedule, TrainState};

pub mod orbital;

/// Target function φ: explicit amplitudes on a finite space, or a
/// closed-form callable on a continuous box.
#[derive(Clone)]
pub enum TargetFn {
    Finite(DVector<f64>),
    Callable {
        name: String,
        f: crate::model::ScalarField,
    },
}

impl fmt::Debug for TargetFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TargetFn::Finite(v) => write!(f, "TargetFn::Finite(len={})", v.len()),
            TargetFn::Callable { name, .. } => write!(f, "TargetFn::Callable({name})"),
        }
    }
}

/// A fitting target: the function φ, the measure ρ the distance is taken
/// in, and an optional uniform bound on |φ|.
#[derive(Clone, Debug)]
pub struct Target {
    pub phi: TargetFn,
    pub rho: Measure,
    pub bound: Option<f64>,
    space: ConfigSpace,
}

impl Target {
    pub fn finite(phi: DVector<f64>, rho: Measure, bound: Option<f64>) -> Result<Self> {
        let space = ConfigSpace::finite(phi.len())?;
        let target = Target {
            phi: TargetFn::Finite(phi),
            rho,
            bound,
            space,
        };
        if target.norm()? <= 0.0 {
            return Err(Error::invalid("target has zero norm under rho"));
        }
        Ok(target)
    }

    pub fn continuous(
        name: impl Into<String>,
        f: impl Fn(&DVector<f64>) -> f64 + Send + Sync + 'static,
        rho: Measure,
        space: ConfigSpace,
        bound: Option<f64>,
    ) -> Result<Self> {
        if space.bounds().is_none() {
            return Err(Error::invalid("continuous target needs a box space"));
        }
        let target = Target {
            phi: TargetFn::Callable {
                name: name.into(),
                f: Arc::new(f),
            },
            rho,
            bound,
            space,
        };
        target.probe_grid()?;
        Ok(target)
    }

    /// Coarse grid scan: the target must be finite everywhere probed and
    /// not identically zero, otherwise the induced measure is undefined.
    fn probe_grid(&self) -> Result<()> {
        let bounds = self.space.bounds().expect("continuous target");
        let per_dim = match bounds.len() {
            1 => 257,
            2 => 33,
            _ => 9,
        };
        let mut max_abs = 0.0f64;
        let mut index = vec![0usize; bounds.len()];
        loop {
            let x = DVector::from_iterator(
                bounds.len(),
                index
                    .iter()
                    .zip(bounds)
                    .map(|(&i, (lo, hi))| lo + (hi - lo) * i as f64 / (per_dim - 1) as f64),
            );
            let v = self.phi_at_coords(&x)?;
            max_abs = max_abs.max(v.abs());
            let mut pos = 0;
            loop {
                if pos == index.len() {
                    if max_abs == 0.0 {
                        return Err(Error::invalid(
                            "target is zero on the whole probe grid",
                        ));
                    }
                    return Ok(());
                }
                index[pos] += 1;
                if index[pos] < per_dim {
                    break;
                }
                index[pos] = 0;
                pos += 1;
            }
        }
    }

    pub fn space(&self) -> &ConfigSpace {
        &self.space
    }

    fn phi_at_coords(&self, x: &DVector<f64>) -> Result<f64> {
        let v = match &self.phi {
            TargetFn::Finite(_) => {
                return Err(Error::invalid("finite target queried with coordinates"))
            }
            TargetFn::Callable { f, .. } => f(x),
        };
        if !v.is_finite() {
            return Err(Error::NonFinite("target value".into()));
        }
        if let Some(c) = self.bound {
            if v.abs() > c + 1e-12 {
                return Err(Error::invalid(format!(
                    "target exceeds its declared bound: |{v}| > {c}"
                )));
            }
        }
        Ok(v)
    }

    pub fn phi_at(&self, x: &ConfigPoint) -> Result<f64> {
        match (&self.phi, x) {
            (TargetFn::Finite(v), ConfigPoint::Finite(i)) => {
                let value = *v.get(*i).ok_or_else(|| {
                    Error::invalid(format!("target index {i} out of range"))
                })?;
                if let Some(c) = self.bound {
                    if value.abs() > c + 1e-12 {
                        return Err(Error::invalid("target exceeds its declared bound"));
                    }
                }
                Ok(value)
            }
            (TargetFn::Callable { .. }, ConfigPoint::Continuous(coords)) => {
                self.phi_at_coords(coords)
            }
            _ => Err(Error::invalid("target/point space mismatch")),
        }
    }

    pub fn phi_full(&self) -> Result<&DVector<f64>> {
        match &self.phi {
            TargetFn::Finite(v) => Ok(v),
            TargetFn::Callable { .. } => {
                Err(Error::invalid("full target vector only exists on finite spaces"))
            }
        }
    }

    /// Explicit ρ-weights on a finite space, resolving the target-induced
    /// measure to |φ|²/Σ|φ|².
    pub fn rho_weights(&self) -> Result<Measure> {
        match &self.rho {
            Measure::FiniteWeights(_) => Ok(self.rho.clone()),
            Measure::TargetInduced => {
                let phi = self.phi_full()?;
                let sq: Vec<f64> = phi.iter().map(|v| v * v).collect();
                Measure::finite_weights(&sq)
            }
            Measure::Lebesgue => Err(Error::invalid(
                "Lebesgue measure has no finite weight vector",
            )),
        }
    }

    /// Exact ‖φ‖_ρ on finite spaces.
    pub fn norm(&self) -> Result<f64> {
        let phi = self.phi_full()?;
        let rho = self.rho_weights()?;
        Ok(inner_product(phi, phi, &rho)?.sqrt())
    }

    pub fn describe(&self) -> String {
        let phi = match &self.phi {
            TargetFn::Finite(v) => format!("finite(len={})", v.len()),
            TargetFn::Callable { name, .. } => name.clone(),
        };
        let rho = match &self.rho {
            Measure::FiniteWeights(_) => "finite-weights",
            Measure::Lebesgue => "lebesgue",
            Measure::TargetInduced => "target",
        };
        format!("phi={phi} rho={rho}")
    }
}

/// Scale-invariant squared distance from the line {λψ} to φ:
/// ‖φ‖²_ρ - (|⟨φ,ψ⟩_ρ|/‖ψ‖_ρ)², exact on finite spaces.
pub fn si_loss(psi: &DVector<f64>, phi: &DVector<f64>, rho: &Measure) -> Result<f64> {
    let norm_sq = inner_product(psi, psi, rho)?;
    if norm_sq <= 0.0 {
        return Err(Error::ZeroWaveFunction("si_loss".into()));
    }
    let phi_sq = inner_product(phi, phi, rho)?;
    let cross = inner_product(phi, psi, rho)?;
    Ok(phi_sq - cross * cross / norm_sq)
}

/// Plug-in batch estimate of the scale-invariant loss, using batch means in
/// place of the ρ-inner products. Biased; estimation use only.
pub fn si_loss_mc(psi_vals: &[f64], phi_vals: &[f64]) -> Result<f64> {
    let norm_sq = inner_product_mc(psi_vals, psi_vals)?;
    if norm_sq <= 0.0 {
        return Err(Error::ZeroWaveFunction("si_loss_mc".into()));
    }
    let phi_sq = inner_product_mc(phi_vals, phi_vals)?;
    let cross = inner_product_mc(phi_vals, psi_vals)?;
    Ok(phi_sq - cross * cross / norm_sq)
}

/// The signed training objective L(θ) = -⟨φ,ψ_θ⟩_ρ/‖ψ_θ‖_ρ, exact on
/// finite spaces. Unlike the squared-distance form it keeps the sign of the
/// overlap, so it is invariant only under positive rescalings of ψ.
pub fn objective(ansatz: &dyn Ansatz, theta: &Parameters, target: &Target) -> Result<f64> {
    let size = target
        .space()
        .finite_size()
        .ok_or_else(|| Error::invalid("objective is exact on finite spaces only"))?;
    let psi = full_values(ansatz, theta, size)?;
    let rho = target.rho_weights()?;
    let norm = inner_product(&psi, &psi, &rho)?.sqrt();
    if norm <= 0.0 {
        return Err(Error::ZeroWaveFunction("objective".into()));
    }
    Ok(-inner_product(target.phi_full()?, &psi, &rho)? / norm)
}

/// Batch estimate of the objective from cached values.
pub fn objective_mc(psi_vals: &[f64], phi_vals: &[f64]) -> Result<f64> {
    let norm_sq = inner_product_mc(psi_vals, psi_vals)?;
    if norm_sq <= 0.0 {
        return Err(Error::ZeroWaveFunction("objective_mc".into()));
    }
    Ok(-inner_product_mc(phi_vals, psi_vals)? / norm_sq.sqrt())
}

/// Exact gradient of the objective on a finite space:
/// -⟨φ,∇ψ⟩_ρ/‖ψ‖_ρ + ⟨φ,ψ⟩_ρ⟨ψ,∇ψ⟩_ρ/‖ψ‖³_ρ.
pub fn exact_grad_supervised(
    ansatz: &dyn Ansatz,
    theta: &Parameters,
    target: &Target,
) -> Result<DVector<f64>> {
    let size = target
        .space()
        .finite_size()
        .ok_or_else(|| Error::invalid("exact gradient needs a finite space"))?;
    let rho = target.rho_weights()?;
    let w = rho.weights().expect("finite weights");
    let psi = full_values(ansatz, theta, size)?;
    let phi = target.phi_full()?;
    let norm = inner_product(&psi, &psi, &rho)?.sqrt();
    if norm <= 0.0 {
        return Err(Error::ZeroWaveFunction("supervised gradient".into()));
    }
    let cross = inner_product(phi, &psi, &rho)?;
    let d = theta.dim();
    let mut phi_dpsi = Vec::with_capacity(size);
    let mut psi_dpsi = Vec::with_capacity(size);
    for i in 0..size {
        let grad = ansatz.grad_theta(theta, &ConfigPoint::Finite(i))?;
        phi_dpsi.push(w[i] * phi[i] * &grad);
        psi_dpsi.push(w[i] * psi[i] * grad);
    }
    let phi_dpsi = pairwise_sum_vectors(&phi_dpsi, d);
    let psi_dpsi = pairwise_sum_vectors(&psi_dpsi, d);
    Ok(-phi_dpsi / norm + cross * psi_dpsi / norm.powi(3))
}

/// Balanced per-sample coefficients
/// a_j = -‖ψ‖²_n·φ(X_j) + ⟨φ,ψ⟩_n·ψ(X_j), built from batch means. If ψ is
/// proportional to φ on the batch, every coefficient vanishes.
pub fn pretrain_coefficients(psi_vals: &[f64], phi_vals: &[f64]) -> Result<Vec<f64>> {
    if psi_vals.len() != phi_vals.len() {
        return Err(Error::DimensionMismatch("coefficient value lengths".into()));
    }
    let norm_sq = inner_product_mc(psi_vals, psi_vals)?;
    let cross = inner_product_mc(phi_vals, psi_vals)?;
    Ok(psi_vals
        .iter()
        .zip(phi_vals)
        .map(|(psi, phi)| -norm_sq * phi + cross * psi)
        .collect())
}

/// The balanced batch estimator
/// G = (1/Z̃³)·(1/(n-1))·Σ_j a_j·∇_θψ_θ(X_j). With Z̃ independent of the
/// batch its expectation is (‖ψ‖³_ρ/Z̃³)·∇L — always in the positive span
/// of the true gradient.
pub fn grad_estimate(
    batch: &SampleBatch,
    phi_vals: &[f64],
    z_tilde: f64,
    dim: usize,
) -> Result<GradientEstimate> {
    let n = batch.n();
    if n < 2 {
        return Err(Error::invalid("supervised estimator needs n >= 2"));
    }
    if z_tilde <= 0.0 || !z_tilde.is_finite() {
        return Err(Error::invalid("norm estimate must be positive"));
    }
    let coeffs = pretrain_coefficients(&batch.psi, phi_vals)?;
    let terms: Vec<DVector<f64>> = coeffs
        .iter()
        .zip(&batch.grad_psi)
        .map(|(a, grad)| *a * grad)
        .collect();
    let g = pairwise_sum_vectors(&terms, dim) / (z_tilde.powi(3) * (n as f64 - 1.0));
    GradientEstimate::new(g, n, GradientKind::Supervised)
}

/// Term-by-term plug-in estimate of the supervised gradient from two
/// samples:
/// -φ(X₁)∇ψ(X₁)/Z̃ + φ(X₂)ψ(X₂)ψ(X₁)∇ψ(X₁)/Z̃³.
/// The two terms carry different powers of Z̃, so its expectation leaves
/// the span of ∇L whenever Z̃ ≠ ‖ψ‖_ρ. Exists solely as the negative
/// control the balanced estimator is compared against.
pub fn plugin_estimate(
    ansatz: &dyn Ansatz,
    theta: &Parameters,
    target: &Target,
    x1: &ConfigPoint,
    x2: &ConfigPoint,
    z_tilde: f64,
) -> Result<GradientEstimate> {
    if z_tilde <= 0.0 || !z_tilde.is_finite() {
        return Err(Error::invalid("norm estimate must be positive"));
    }
    let phi1 = target.phi_at(x1)?;
    let phi2 = target.phi_at(x2)?;
    let psi1 = ansatz.value(theta, x1)?;
    let psi2 = ansatz.value(theta, x2)?;
    let grad1 = ansatz.grad_theta(theta, x1)?;
    let g = -phi1 / z_tilde * &grad1 + phi2 * psi2 * psi1 / z_tilde.powi(3) * grad1;
    GradientEstimate::new(g, 2, GradientKind::SupervisedPlugin)
}

/// How Z̃ (the stand-in for ‖ψ_θ‖_ρ) is produced each step.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NormStrategy {
    /// ‖ψ‖_n on the training batch itself; cheap and sufficient in
    /// practice, though not independent of the batch.
    SameBatch,
    /// A fresh batch of n samples drawn only for the norm.
    IndependentBatch { n: usize },
    /// Refresh from a large batch of k samples every k-th step, carry the
    /// value in between.
    PeriodicLargeBatch { k: usize },
}

impl NormStrategy {
    pub fn describe(&self) -> String {
        match self {
            NormStrategy::SameBatch => "same-batch".into(),
            NormStrategy::IndependentBatch { n } => format!("independent-batch(n={n})"),
            NormStrategy::PeriodicLargeBatch { k } => format!("periodic-large-batch(k={k})"),
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct NormEstimate {
    pub z_tilde: f64,
    pub strategy: NormStrategy,
}

/// √((1/n)Σψ(X_i)²) from cached batch values.
pub fn norm_from_values(psi_vals: &[f64]) -> Result<f64> {
    let mean_sq = inner_product_mc(psi_vals, psi_vals)?;
    if mean_sq <= 0.0 {
        return Err(Error::ZeroWaveFunction("norm estimate".into()));
    }
    Ok(mean_sq.sqrt())
}

#[derive(Clone, Debug)]
pub struct PretrainConfig {
    pub target: Target,
    pub n: usize,
    pub steps: usize,
    pub schedule: Schedule,
    pub seed: u64,
    pub strategy: NormStrategy,
    pub mcmc: McmcOptions,
    /// On finite spaces, also record the exact gradient norm and the norm
    /// ratio ‖ψ‖_ρ/Z̃ per step.
    pub record_exact: bool,
}

impl PretrainConfig {
    fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::invalid("batch size must be >= 2"));
        }
        if self.steps < 1 {
            return Err(Error::invalid("step count must be >= 1"));
        }
        match self.strategy {
            NormStrategy::IndependentBatch { n } if n < 1 => {
                return Err(Error::invalid("independent norm batch must be >= 1"))
            }
            NormStrategy::PeriodicLargeBatch { k } if k < 1 => {
                return Err(Error::invalid("norm refresh period must be >= 1"))
            }
            _ => {}
        }
        self.schedule.validate()
    }
}

pub(crate) const BATCH_STREAM: u64 = 1 << 40;
const NORM_STREAM: u64 = (1 << 40) + 1;

enum RhoSource {
    FiniteCat(Measure),
    Uniform,
    Chain(WalkerChain),
}

struct RhoContext<'a> {
    source: RhoSource,
    target: &'a Target,
    thinning: usize,
}

impl RhoContext<'_> {
    fn draw(
        &mut self,
        n: usize,
        rng: &mut rand_chacha::ChaCha8Rng,
    ) -> Result<Vec<ConfigPoint>> {
        match &mut self.source {
            RhoSource::FiniteCat(rho) => Ok(sample_finite_measure(rho, n, rng)?
                .into_iter()
                .map(ConfigPoint::Finite)
                .collect()),
            RhoSource::Uniform => {
                let bounds = self
                    .target
                    .space()
                    .bounds()
                    .ok_or_else(|| Error::invalid("uniform sampling needs a box"))?;
                use rand::Rng as _;
                Ok((0..n)
                    .map(|_| {
                        ConfigPoint::Continuous(DVector::from_iterator(
                            bounds.len(),
                            bounds.iter().map(|(lo, hi)| rng.random_range(*lo..*hi)),
                        ))
                    })
                    .collect())
            }
            RhoSource::Chain(chain) => {
                let target = self.target;
                let amp = |x: &DVector<f64>| -> Result<f64> {
                    target.phi_at(&ConfigPoint::Continuous(x.clone()))
                };
                struct A<'b, F: Fn(&DVector<f64>) -> Result<f64> + Sync>(&'b F);
                impl<F: Fn(&DVector<f64>) -> Result<f64> + Sync> crate::sampler::Amplitude for A<'_, F> {
                    fn amplitude(&self, x: &DVector<f64>) -> Result<f64> {
                        (self.0)(x)
                    }
                }
                let amplitude = A(&amp);
                for _ in 0..self.thinning {
                    chain.step(&amplitude)?;
                }
                if chain.n_walkers() != n {
                    return Err(Error::invalid("walker count does not match batch size"));
                }
                Ok(chain.ensemble())
            }
        }
    }
}

fn build_rho_context<'a>(
    target: &'a Target,
    n: usize,
    mcmc: &McmcOptions,
    seed: u64,
) -> Result<RhoContext<'a>> {
    let source = match (&target.rho, target.space()) {
        (Measure::FiniteWeights(_) | Measure::TargetInduced, ConfigSpace::Finite { .. }) => {
            RhoSource::FiniteCat(target.rho_weights()?)
        }
        (Measure::Lebesgue, ConfigSpace::Finite { size }) => {
            RhoSource::FiniteCat(Measure::uniform(*size)?)
        }
        (Measure::Lebesgue, ConfigSpace::Continuous { .. }) => RhoSource::Uniform,
        (Measure::TargetInduced, ConfigSpace::Continuous { .. }) => {
            mcmc.validate()?;
            let amp = |x: &DVector<f64>| {
                target
                    .phi_at(&ConfigPoint::Continuous(x.clone()))
                    .unwrap_or(f64::NAN)
            };
            let step = match mcmc.step_size {
                Some(s) => s,
                None => crate::sampler::tune_step_size(target.space(), &amp, seed ^ 0x5eed)?,
            };
            let mut chain = WalkerChain::new(target.space(), &amp, n, step, seed)?;
            for _ in 0..mcmc.burn_in {
                chain.step(&amp)?;
            }
            RhoSource::Chain(chain)
        }
        (Measure::FiniteWeights(_), ConfigSpace::Continuous { .. }) => {
            return Err(Error::invalid("finite weights on a continuous space"))
        }
    };
    Ok(RhoContext {
        source,
        target,
        thinning: mcmc.thinning,
    })
}

/// sin∠(φ, ψ) = √(1 - (⟨φ,ψ⟩_ρ/(‖φ‖_ρ‖ψ‖_ρ))²), exact on finite spaces.
pub fn wavefunction_angle(
    psi: &DVector<f64>,
    phi: &DVector<f64>,
    rho: &Measure,
) -> Result<f64> {
    let psi_norm = inner_product(psi, psi, rho)?.sqrt();
    let phi_norm = inner_product(phi, phi, rho)?.sqrt();
    if psi_norm <= 0.0 || phi_norm <= 0.0 {
        return Err(Error::ZeroWaveFunction("wavefunction angle".into()));
    }
    let cos = inner_product(phi, psi, rho)? / (psi_norm * phi_norm);
    Ok((1.0 - cos * cos).max(0.0).sqrt())
}

/// Batch estimate of the angle from cached values.
pub fn wavefunction_angle_mc(psi_vals: &[f64], phi_vals: &[f64]) -> Result<f64> {
    let psi_norm = inner_product_mc(psi_vals, psi_vals)?.sqrt();
    let phi_norm = inner_product_mc(phi_vals, phi_vals)?.sqrt();
    if psi_norm <= 0.0 || phi_norm <= 0.0 {
        return Err(Error::ZeroWaveFunction("wavefunction angle".into()));
    }
    let cos = inner_product_mc(phi_vals, psi_vals)? / (psi_norm * phi_norm);
    Ok((1.0 - cos * cos).max(0.0).sqrt())
}

/// SGD with the balanced estimator: per step, draw a ρ-batch, produce Z̃
/// by the configured strategy, form the coefficients and the estimate, and
/// update. The trace records the objective, the scale-invariant loss, the
/// angle, |G|, Z̃, and on finite spaces the ratio ‖ψ_θ‖_ρ/Z̃ so excursions
/// of the norm estimate are visible.
pub fn pretrain_train(
    ansatz: &dyn Ansatz,
    theta0: Parameters,
    cfg: &PretrainConfig,
) -> Result<RunOutput> {
    cfg.validate()?;
    if theta0.dim() != ansatz.param_dim() {
        return Err(Error::DimensionMismatch("initial parameter dimension".into()));
    }
    let finite = cfg.target.space().finite_size().is_some();
    let record_exact = cfg.record_exact && finite;
    let mcmc_used = matches!(
        (&cfg.target.rho, cfg.target.space()),
        (Measure::TargetInduced, ConfigSpace::Continuous { .. })
    );

    let mut rng = stream_rng(cfg.seed, BATCH_STREAM);
    let mut norm_rng = stream_rng(cfg.seed, NORM_STREAM);
    let mut rho = build_rho_context(&cfg.target, cfg.n, &cfg.mcmc, cfg.seed)?;
    // Independent norm batches come from their own context so chain state
    // never couples the two streams.
    let mut norm_rho = match cfg.strategy {
        NormStrategy::SameBatch => None,
        _ => Some(build_rho_context(
            &cfg.target,
            cfg.n,
            &cfg.mcmc,
            cfg.seed ^ 0x9e37,
        )?),
    };

    let mut trace = Trace::new(
        pretrain_columns(record_exact, mcmc_used),
        format!("{} strategy={}", cfg.target.describe(), cfg.strategy.describe()),
        format!(
            "pretrain ansatz={} d={} n={} steps={} seed={} schedule={:?}",
            ansatz.kind(),
            ansatz.param_dim(),
            cfg.n,
            cfg.steps,
            cfg.seed,
            cfg.schedule
        ),
    );

    let mut theta = theta0;
    let mut runmin = f64::INFINITY;
    let mut prev: Option<(DVector<f64>, Parameters)> = None;
    // Exact-gradient Lipschitz diagnostic on finite spaces, as in the
    // energy trainer.
    let mut prev_exact: Option<(DVector<f64>, Parameters)> = None;
    let mut carried_norm: Option<f64> = None;
    let mut divergence = None;

    for m in 0..cfg.steps {
        let eta = cfg.schedule.eta(m);
        let points = rho.draw(cfg.n, &mut rng)?;
        let batch = SampleBatch::from_points(ansatz, &theta, points, BATCH_STREAM)?;
        let phi_vals: Vec<f64> = batch
            .points
            .iter()
            .map(|x| cfg.target.phi_at(x))
            .collect::<Result<_>>()?;

        let z_tilde = match cfg.strategy {
            NormStrategy::SameBatch => norm_from_values(&batch.psi)?,
            NormStrategy::IndependentBatch { n } => {
                let ctx = norm_rho.as_mut().expect("norm context");
                let pts = ctx.draw(n.max(1), &mut norm_rng)?;
                let vals: Vec<f64> = pts
                    .iter()
                    .map(|x| ansatz.value(&theta, x))
                    .collect::<Result<_>>()?;
                norm_from_values(&vals)?
            }
            NormStrategy::PeriodicLargeBatch { k } => {
                if m % k == 0 || carried_norm.is_none() {
                    let ctx = norm_rho.as_mut().expect("norm context");
                    let pts = ctx.draw(k.max(2), &mut norm_rng)?;
                    let vals: Vec<f64> = pts
                        .iter()
                        .map(|x| ansatz.value(&theta, x))
                        .collect::<Result<_>>()?;
                    carried_norm = Some(norm_from_values(&vals)?);
                }
                carried_norm.expect("carried norm")
            }
        };

        let estimate = grad_estimate(&batch, &phi_vals, z_tilde, theta.dim())?;
        let grad_norm = estimate.norm();
        runmin = runmin.min(grad_norm);

        let mut row = TraceRow {
            step: m,
            eta,
            grad_norm,
            runmin_grad_norm: runmin,
            lipschitz_est: None,
            z_tilde: Some(z_tilde),
            ..Default::default()
        };
        if !record_exact {
            row.lipschitz_est = prev.as_ref().and_then(|(g, t)| {
                crate::diagnostics::lipschitz_estimate(g, &estimate.g, t.as_vector(), theta.as_vector())
                    .ok()
            });
        }
        if finite {
            let size = cfg.target.space().finite_size().expect("finite");
            let psi = full_values(ansatz, &theta, size)?;
            let rho_w = cfg.target.rho_weights()?;
            row.objective = Some(objective(ansatz, &theta, &cfg.target)?);
            row.si_loss = Some(si_loss(&psi, cfg.target.phi_full()?, &rho_w)?);
            row.angle = Some(wavefunction_angle(&psi, cfg.target.phi_full()?, &rho_w)?);
            if record_exact {
                let exact_grad = exact_grad_supervised(ansatz, &theta, &cfg.target)?;
                row.grad_norm_exact = Some(exact_grad.norm());
                row.lipschitz_est = prev_exact.as_ref().and_then(|(g, t)| {
                    crate::diagnostics::lipschitz_estimate(
                        g,
                        &exact_grad,
                        t.as_vector(),
                        theta.as_vector(),
                    )
                    .ok()
                });
                prev_exact = Some((exact_grad, theta.clone()));
                let exact = crate::oracle::exact_norm(ansatz, &theta, &rho_w)?;
                row.norm_ratio = Some(exact / z_tilde);
            }
        } else {
            row.objective = Some(objective_mc(&batch.psi, &phi_vals)?);
            row.si_loss = Some(si_loss_mc(&batch.psi, &phi_vals)?);
            row.angle = Some(wavefunction_angle_mc(&batch.psi, &phi_vals)?);
        }
        trace.push(row);

        prev = Some((estimate.g.clone(), theta.clone()));
        match theta.step(eta, &estimate.g) {
            Ok(next) => theta = next,
            Err(e) => {
                divergence = Some(format!("parameter update failed at step {m}: {e}"));
                trace.push(TraceRow {
                    step: m,
                    eta,
                    grad_norm: f64::NAN,
                    runmin_grad_norm: f64::NAN,
                    ..Default::default()
                });
                break;
            }
        }
        if theta.as_vector().amax() > crate::vmc::DIVERGENCE_THETA_BOUND {
            divergence = Some(format!("|theta| exceeded divergence bound at step {m}"));
            break;
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
