//! Sampling from Born densities and pre-training measures.
//!
//! Finite spaces are sampled exactly (inverse CDF on the explicit weight
//! vector) so the convergence statements can be tested under their own
//! i.i.d. hypothesis. Continuous boxes use a Metropolis walker ensemble:
//! every walker owns an independent counter-based RNG stream and walkers
//! never interact, so a sweep can run on any number of threads and still
//! produce byte-identical output.

use nalgebra::DVector;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::ansatz::{Ansatz, Parameters};
use crate::error::{Error, Result};
use crate::model::{ConfigPoint, ConfigSpace, Hamiltonian, Measure};

/// RNG for a given (seed, stream) pair. Streams are cheap and independent;
/// walker `i` of a run always draws from stream `i`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Borrowed scalar amplitude for one-off sampling calls.
pub type AmplitudeRef<'a> = &'a (dyn Fn(&DVector<f64>) -> f64 + Sync);

/// Anything that can play the role of |ψ| for Metropolis sampling.
pub trait Amplitude: Sync {
    fn amplitude(&self, x: &DVector<f64>) -> Result<f64>;
}

impl<F: Fn(&DVector<f64>) -> f64 + Sync> Amplitude for F {
    fn amplitude(&self, x: &DVector<f64>) -> Result<f64> {
        Ok(self(x))
    }
}

/// |ψ_θ| of an ansatz at fixed parameters.
pub struct AnsatzAmplitude<'a> {
    pub ansatz: &'a dyn Ansatz,
    pub theta: &'a Parameters,
}

impl Amplitude for AnsatzAmplitude<'_> {
    fn amplitude(&self, x: &DVector<f64>) -> Result<f64> {
        self.ansatz
            .value(self.theta, &ConfigPoint::Continuous(x.clone()))
    }
}

/// Explicit Born weights |ψ_θ(x)|²/Σ_y|ψ_θ(y)|² on a finite space.
#[derive(Clone, Debug)]
pub struct BornDensity {
    weights: DVector<f64>,
}

impl BornDensity {
    pub fn from_ansatz(ansatz: &dyn Ansatz, theta: &Parameters) -> Result<Self> {
        let size = ansatz
            .space()
            .finite_size()
            .ok_or_else(|| Error::invalid("Born weights need a finite space"))?;
        let psi = crate::model::full_values(ansatz, theta, size)?;
        Self::from_values(&psi)
    }

    pub fn from_values(psi: &DVector<f64>) -> Result<Self> {
        let sq: Vec<f64> = psi.iter().map(|v| v * v).collect();
        let total = crate::reduce::pairwise_sum(&sq);
        if total <= 0.0 || !total.is_finite() {
            return Err(Error::ZeroWaveFunction(
                "Born density of an identically zero wave function".into(),
            ));
        }
        Ok(BornDensity {
            weights: DVector::from_iterator(sq.len(), sq.iter().map(|v| v / total)),
        })
    }

    pub fn weights(&self) -> &DVector<f64> {
        &self.weights
    }

    pub fn validate(&self) -> Result<()> {
        let sum: f64 = self.weights.iter().sum();
        if self.weights.iter().any(|w| *w < 0.0) || (sum - 1.0).abs() > 1e-12 {
            return Err(Error::invalid(format!("Born weights sum to {sum}")));
        }
        Ok(())
    }
}

/// n configurations with cached ψ and ∇_θψ values, plus local energies once
/// attached. Both gradient estimators divide by n-1, so n >= 2.
#[derive(Clone, Debug)]
pub struct SampleBatch {
    pub points: Vec<ConfigPoint>,
    pub psi: Vec<f64>,
    pub grad_psi: Vec<DVector<f64>>,
    pub local_energy: Option<Vec<f64>>,
    pub stream_id: u64,
}

impl SampleBatch {
    /// Caches ψ and ∇_θψ at the given points. The per-point evaluations run
    /// as a parallel map collected in index order.
    pub fn from_points(
        ansatz: &dyn Ansatz,
        theta: &Parameters,
        points: Vec<ConfigPoint>,
        stream_id: u64,
    ) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::invalid(format!(
                "sample batch needs n >= 2, got {}",
                points.len()
            )));
        }
        let cached: Result<Vec<(f64, DVector<f64>)>> = points
            .par_iter()
            .map(|x| Ok((ansatz.value(theta, x)?, ansatz.grad_theta(theta, x)?)))
            .collect();
        let cached = cached?;
        let (psi, grad_psi) = cached.into_iter().unzip();
        Ok(SampleBatch {
            points,
            psi,
            grad_psi,
            local_energy: None,
            stream_id,
        })
    }

    pub fn n(&self) -> usize {
        self.points.len()
    }

    /// Computes and caches local energies E_θ(x) = (Hψ_θ)(x)/ψ_θ(x).
    pub fn with_local_energies(
        mut self,
        hamiltonian: &Hamiltonian,
        ansatz: &dyn Ansatz,
        theta: &Parameters,
    ) -> Result<Self> {
        let energies: Result<Vec<f64>> = self
            .points
            .par_iter()
            .map(|x| crate::vmc::local_energy(hamiltonian, ansatz, theta, x))
            .collect();
        self.local_energy = Some(energies?);
        Ok(self)
    }
}

/// n i.i.d. categorical draws by inverse CDF on the explicit weights.
pub fn sample_exact_finite(
    density: &BornDensity,
    n: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<usize> {
    let w = density.weights();
    let mut cumulative = Vec::with_capacity(w.len());
    let mut acc = 0.0;
    for v in w.iter() {
        acc += v;
        cumulative.push(acc);
    }
    (0..n)
        .map(|_| {
            let u: f64 = rng.random();
            match cumulative.binary_search_by(|c| c.partial_cmp(&u).unwrap()) {
                Ok(i) | Err(i) => i.min(w.len() - 1),
            }
        })
        .collect()
}

/// Categorical draws from an arbitrary finite measure.
pub fn sample_finite_measure(rho: &Measure, n: usize, rng: &mut ChaCha8Rng) -> Result<Vec<usize>> {
    let w = rho
        .weights()
        .ok_or_else(|| Error::invalid("categorical sampling needs finite weights"))?;
    let density = BornDensity {
        weights: w.clone(),
    };
    Ok(sample_exact_finite(&density, n, rng))
}

fn uniform_in_box(bounds: &[(f64, f64)], rng: &mut ChaCha8Rng) -> DVector<f64> {
    DVector::from_iterator(
        bounds.len(),
        bounds.iter().map(|(lo, hi)| rng.random_range(*lo..*hi)),
    )
}

/// Ensemble of independent Metropolis walkers over a bounded box.
pub struct WalkerChain {
    bounds: Vec<(f64, f64)>,
    positions: Vec<DVector<f64>>,
    psi: Vec<f64>,
    rngs: Vec<ChaCha8Rng>,
    pub step_size: f64,
    accepted: u64,
    attempted: u64,
}

impl WalkerChain {
    /// Walkers start uniformly in the box, each from its own RNG stream.
    pub fn new(
        space: &ConfigSpace,
        target: &impl Amplitude,
        n_walkers: usize,
        step_size: f64,
        seed: u64,
    ) -> Result<Self> {
        let bounds = space
            .bounds()
            .ok_or_else(|| Error::invalid("walker chain needs a continuous space"))?
            .to_vec();
        if n_walkers == 0 {
            return Err(Error::invalid("walker chain needs at least one walker"));
        }
        if step_size <= 0.0 {
            return Err(Error::invalid("step size must be positive"));
        }
        let mut rngs: Vec<ChaCha8Rng> = (0..n_walkers)
            .map(|i| stream_rng(seed, i as u64))
            .collect();
        let positions: Vec<DVector<f64>> = rngs
            .iter_mut()
            .map(|rng| uniform_in_box(&bounds, rng))
            .collect();
        let mut chain = WalkerChain {
            bounds,
            positions,
            psi: vec![0.0; n_walkers],
            rngs,
            step_size,
            accepted: 0,
            attempted: 0,
        };
        chain.refresh(target)?;
        Ok(chain)
    }

    /// Starts every walker at a prescribed position (e.g. a point mass for
    /// mixing diagnostics) instead of uniform draws.
    pub fn with_positions(
        space: &ConfigSpace,
        target: &impl Amplitude,
        positions: Vec<DVector<f64>>,
        step_size: f64,
        seed: u64,
    ) -> Result<Self> {
        let bounds = space
            .bounds()
            .ok_or_else(|| Error::invalid("walker chain needs a continuous space"))?
            .to_vec();
        if positions.is_empty() {
            return Err(Error::invalid("walker chain needs at least one walker"));
        }
        if step_size <= 0.0 {
            return Err(Error::invalid("step size must be positive"));
        }
        for p in &positions {
            ConfigPoint::Continuous(p.clone()).validate(space)?;
        }
        let n = positions.len();
        let mut chain = WalkerChain {
            bounds,
            positions,
            psi: vec![0.0; n],
            rngs: (0..n).map(|i| stream_rng(seed, i as u64)).collect(),
            step_size,
            accepted: 0,
            attempted: 0,
        };
        chain.refresh(target)?;
        Ok(chain)
    }

    pub fn n_walkers(&self) -> usize {
        self.positions.len()
    }

    pub fn positions(&self) -> &[DVector<f64>] {
        &self.positions
    }

    pub fn acceptance_rate(&self) -> f64 {
        if self.attempted == 0 {
            0.0
        } else {
            self.accepted as f64 / self.attempted as f64
        }
    }

    pub fn reset_counters(&mut self) {
        self.accepted = 0;
        self.attempted = 0;
    }

    /// Re-evaluates the cached amplitudes, e.g. after a parameter update.
    /// A vanishing amplitude at a current walker is an invalid chain state.
    pub fn refresh(&mut self, target: &impl Amplitude) -> Result<()> {
        let values: Result<Vec<f64>> = self
            .positions
            .par_iter()
            .map(|x| target.amplitude(x))
            .collect();
        let values = values?;
        if values.contains(&0.0) {
            return Err(Error::ZeroWaveFunction(
                "walker sits on a node of the target density".into(),
            ));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("target amplitude at a walker".into()));
        }
        self.psi = values;
        Ok(())
    }

    /// One Metropolis sweep: per walker, propose a Gaussian move of scale
    /// `step_size`, reject proposals that leave the box, and accept with
    /// probability min(1, |ψ(x')|²/|ψ(x)|²). Walkers are processed as a
    /// parallel map over their own RNG streams.
    pub fn step(&mut self, target: &impl Amplitude) -> Result<()> {
        let bounds = &self.bounds;
        let step_size = self.step_size;
        let accepted: Result<u64> = self
            .positions
            .par_iter_mut()
            .zip(self.psi.par_iter_mut())
            .zip(self.rngs.par_iter_mut())
            .map(|((pos, psi), rng)| {
                let proposal = DVector::from_iterator(
                    pos.len(),
                    pos.iter().map(|xi| {
                        let z: f64 = rng.sample(StandardNormal);
                        xi + step_size * z
                    }),
                );
                let inside = proposal
                    .iter()
                    .zip(bounds)
                    .all(|(xi, (lo, hi))| *xi >= *lo && *xi <= *hi);
                // The acceptance draw happens on every attempt so the RNG
                // stream advances identically whether or not the proposal
                // stayed inside the box.
                let u: f64 = rng.random();
                if !inside {
                    return Ok(0u64);
                }
                let new_psi = target.amplitude(&proposal)?;
                if *psi == 0.0 {
                    return Err(Error::ZeroWaveFunction(
                        "walker sits on a node of the target density".into(),
                    ));
                }
                let ratio = (new_psi / *psi).powi(2);
                if u < ratio {
                    *pos = proposal;
                    *psi = new_psi;
                    Ok(1)
                } else {
                    Ok(0)
                }
            })
            .try_reduce(|| 0, |a, b| Ok(a + b));
        self.accepted += accepted?;
        self.attempted += self.n_walkers() as u64;
        Ok(())
    }

    /// The current ensemble as configuration points.
    pub fn ensemble(&self) -> Vec<ConfigPoint> {
        self.positions
            .iter()
            .map(|p| ConfigPoint::Continuous(p.clone()))
            .collect()
    }
}

/// One Metropolis sweep over the ensemble (free-function form of
/// [`WalkerChain::step`]).
pub fn metropolis_step(
    chain: &mut WalkerChain,
    target: &impl Amplitude,
) -> Result<()> {
    chain.step(target)
}

/// Doubling/halving search for a step size with roughly 50% acceptance.
/// The returned value is frozen before any production sampling.
pub fn tune_step_size(
    space: &ConfigSpace,
    target: &impl Amplitude,
    seed: u64,
) -> Result<f64> {
    let mut step = 1.0;
    let mut chain = WalkerChain::new(space, target, 64, step, seed)?;
    for _ in 0..30 {
        chain.step_size = step;
        chain.reset_counters();
        for _ in 0..50 {
            chain.step(target)?;
        }
        let rate = chain.acceptance_rate();
        if rate > 0.6 {
            step *= 2.0;
        } else if rate < 0.4 {
            step *= 0.5;
        } else {
            break;
        }
        if !(1e-6..=1e6).contains(&step) {
            return Err(Error::invalid(format!(
                "step-size tuning diverged to {step:.3e}"
            )));
        }
    }
    Ok(step)
}

/// Options for Metropolis-based batch sampling. The burn-in and thinning
/// defaults are engineering choices, not prescribed values.
#[derive(Clone, Debug)]
pub struct McmcOptions {
    pub burn_in: usize,
    pub thinning: usize,
    /// `None` means tune to ~50% acceptance before sampling.
    pub step_size: Option<f64>,
}

impl Default for McmcOptions {
    fn default() -> Self {
        McmcOptions {
            burn_in: 500,
            thinning: 10,
            step_size: None,
        }
    }
}

impl McmcOptions {
    pub fn validate(&self) -> Result<()> {
        if self.thinning == 0 {
            return Err(Error::invalid("thinning must be >= 1"));
        }
        if let Some(s) = self.step_size {
            if s <= 0.0 {
                return Err(Error::invalid("step size must be positive"));
            }
        }
        Ok(())
    }
}

/// Advances a fresh chain `burn_in` sweeps plus `thinning` more, then emits
/// the walker ensemble as one batch of `n_walkers` points.
pub fn sample_mcmc(
    space: &ConfigSpace,
    target: &impl Amplitude,
    n_walkers: usize,
    opts: &McmcOptions,
    seed: u64,
) -> Result<(Vec<ConfigPoint>, f64)> {
    opts.validate()?;
    let step = match opts.step_size {
        Some(s) => s,
        None => tune_step_size(space, target, seed ^ 0x5eed)?,
    };
    let mut chain = WalkerChain::new(space, target, n_walkers, step, seed)?;
    for _ in 0..opts.burn_in {
        chain.step(target)?;
    }
    chain.reset_counters();
    for _ in 0..opts.thinning {
        chain.step(target)?;
    }
    Ok((chain.ensemble(), chain.acceptance_rate()))
}

/// Draws n points from a pre-training measure ρ: explicit categorical
/// weights, the uniform distribution on the box, or Metropolis on a target
/// density |φ|².
pub fn sample_rho(
    rho: &Measure,
    space: &ConfigSpace,
    induced_amplitude: Option<AmplitudeRef<'_>>,
    n: usize,
    opts: &McmcOptions,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<ConfigPoint>> {
    match rho {
        Measure::FiniteWeights(_) => Ok(sample_finite_measure(rho, n, rng)?
            .into_iter()
            .map(ConfigPoint::Finite)
            .collect()),
        Measure::Lebesgue => {
            let bounds = space
                .bounds()
                .ok_or_else(|| Error::invalid("Lebesgue sampling needs a continuous box"))?;
            Ok((0..n)
                .map(|_| ConfigPoint::Continuous(uniform_in_box(bounds, rng)))
                .collect())
        }
        Measure::TargetInduced => {
            let amp = induced_amplitude.ok_or_else(|| {
                Error::invalid("target-induced sampling needs the target amplitude")
            })?;
            let seed: u64 = rng.random();
            let wrapped = |x: &DVector<f64>| amp(x);
            let (points, _) = sample_mcmc(space, &wrapped, n, opts, seed)?;
            Ok(points)
        }
    }
}

/// Standard sample autocorrelation of a series at the given lag.
pub fn autocorrelation(series: &[f64], lag: usize) -> Result<f64> {
    if lag >= series.len() {
        return Err(Error::invalid(format!(
            "lag {lag} out of range for a series of length {}",
            series.len()
        )));
    }
    let n = series.len();
    let mean = crate::reduce::pairwise_mean(series);
    let denom_terms: Vec<f64> = series.iter().map(|x| (x - mean).powi(2)).collect();
    let denom = crate::reduce::pairwise_sum(&denom_terms);
    if denom == 0.0 {
        return Err(Error::ZeroVariance);
    }
    let numer_terms: Vec<f64> = (0..n - lag)
        .map(|t| (series[t] - mean) * (series[t + lag] - mean))
        .collect();
    Ok(crate::reduce::pairwise_sum(&numer_terms) / denom)
}

/// Pearson correlation between ensembles `lag` emissions apart, pooled over
/// walkers: the mixing diagnostic for emitted batches. Values near 1 mean
/// the chain has not decorrelated between emissions.
pub fn batch_lag_correlation(batches: &[Vec<f64>], lag: usize) -> Result<f64> {
    if lag == 0 || lag >= batches.len() {
        return Err(Error::invalid("need 1 <= lag < number of batches"));
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for t in 0..batches.len() - lag {
        if batches[t].len() != batches[t + lag].len() {
            return Err(Error::DimensionMismatch("batch sizes differ".into()));
        }
        xs.extend_from_slice(&batches[t]);
        ys.extend_from_slice(&batches[t + lag]);
    }
    let mx = crate::reduce::pairwise_mean(&xs);
    let my = crate::reduce::pairwise_mean(&ys);
    let mut sxx = 0.0;
    let mut syy = 0.0;
    let mut sxy = 0.0;
    for (x, y) in xs.iter().zip(&ys) {
        sxx += (x - mx).powi(2);
        syy += (y - my).powi(2);
        sxy += (x - mx) * (y - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::ZeroVariance);
    }
    Ok(sxy / (sxx * syy).sqrt())
}

/// A lag-1 batch correlation this high means the emitted batches are far
/// from independent and the run should be treated as unmixed.
pub const POOR_MIXING_THRESHOLD: f64 = 0.5;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ansatz::TableAnsatz;

    #[test]
    fn born_density_from_table() {
        let ansatz = TableAnsatz::new(2).unwrap();
        let theta = Parameters::from_slice(&[2.0, 1.0]).unwrap();
        let density = BornDensity::from_ansatz(&ansatz, &theta).unwrap();
        density.validate().unwrap();
        assert!((density.weights()[0] - 0.8).abs() < 1e-15);
        assert!((density.weights()[1] - 0.2).abs() < 1e-15);
    }

    #[test]
    fn born_density_scale_invariant_exactly() {
        let ansatz = TableAnsatz::new(3).unwrap();
        let theta = Parameters::from_slice(&[1.0, -2.0, 0.5]).unwrap();
        let a = BornDensity::from_ansatz(&ansatz, &theta).unwrap();
        let b = BornDensity::from_ansatz(&ansatz, &theta.scaled(-3.0).unwrap()).unwrap();
        assert_eq!(a.weights(), b.weights());
    }

    #[test]
    fn born_density_rejects_zero() {
        let ansatz = TableAnsatz::new(2).unwrap();
        let theta = Parameters::from_slice(&[0.0, 0.0]).unwrap();
        assert!(BornDensity::from_ansatz(&ansatz, &theta).is_err());
    }

    #[test]
    fn degenerate_support_samples_one_point() {
        let ansatz = TableAnsatz::new(2).unwrap();
        let theta = Parameters::from_slice(&[1.0, 0.0]).unwrap();
        let density = BornDensity::from_ansatz(&ansatz, &theta).unwrap();
        let mut rng = stream_rng(7, 0);
        let draws = sample_exact_finite(&density, 100, &mut rng);
        assert!(draws.iter().all(|&i| i == 0));
    }

    #[test]
    fn exact_sampling_is_seed_deterministic() {
        let ansatz = TableAnsatz::new(4).unwrap();
        let theta = Parameters::from_slice(&[1.0, 2.0, 0.5, 1.5]).unwrap();
        let density = BornDensity::from_ansatz(&ansatz, &theta).unwrap();
        let a = sample_exact_finite(&density, 64, &mut stream_rng(9, 3));
        let b = sample_exact_finite(&density, 64, &mut stream_rng(9, 3));
        assert_eq!(a, b);
    }

    #[test]
    fn autocorrelation_basics() {
        assert!(matches!(
            autocorrelation(&[1.0, 1.0, 1.0], 1),
            Err(Error::ZeroVariance)
        ));
        // A perfectly persistent series where each value repeats its
        // predecessor up to a vanishing drift has lag-1 autocorrelation 1 in
        // the long-series limit.
        let persistent: Vec<f64> = (0..2000).map(|t| t as f64).collect();
        let r = autocorrelation(&persistent, 1).unwrap();
        assert!(r > 0.99, "r = {r}");
        let mut rng = stream_rng(1, 0);
        let iid: Vec<f64> = (0..10_000).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let r = autocorrelation(&iid, 1).unwrap();
        assert!(r.abs() < 0.03, "r = {r}");
    }

    #[test]
    fn identical_series_has_unit_lag_correlation() {
        let series: Vec<f64> = (0..50).map(|i| (i as f64).sin()).collect();
        let batches = vec![series.clone(), series];
        let r = batch_lag_correlation(&batches, 1).unwrap();
        assert!((r - 1.0).abs() < 1e-12);
    }

    #[test]
    fn flat_target_acceptance_near_one() {
        let space = ConfigSpace::symmetric_box(1, 5.0).unwrap();
        let flat = |_: &DVector<f64>| 1.0;
        let mut chain = WalkerChain::new(&space, &flat, 256, 0.05, 3).unwrap();
        for _ in 0..100 {
            chain.step(&flat).unwrap();
        }
        // Only boundary rejections; with step 0.05 in a width-10 box these
        // are rare.
        assert!(chain.acceptance_rate() > 0.98, "{}", chain.acceptance_rate());
    }

    #[test]
    fn frozen_chain_accepts_everything() {
        let space = ConfigSpace::symmetric_box(1, 5.0).unwrap();
        let gaussian = |x: &DVector<f64>| (-0.25 * x.norm_squared()).exp();
        let mut chain = WalkerChain::new(&space, &gaussian, 64, 1e-9, 5).unwrap();
        let mut history = Vec::new();
        for _ in 0..20 {
            chain.step(&gaussian).unwrap();
            history.push(chain.positions().iter().map(|p| p[0]).collect::<Vec<_>>());
        }
        assert!(chain.acceptance_rate() > 0.999);
        let r = batch_lag_correlation(&history, 1).unwrap();
        assert!(r > 0.999, "r = {r}");
        assert!(r > POOR_MIXING_THRESHOLD);
    }

    #[test]
    fn walker_count_and_rng_streams_reproduce() {
        let space = ConfigSpace::symmetric_box(2, 4.0).unwrap();
        let gaussian = |x: &DVector<f64>| (-0.5 * x.norm_squared()).exp();
        let run = || {
            let mut chain = WalkerChain::new(&space, &gaussian, 32, 0.8, 11).unwrap();
            for _ in 0..50 {
                chain.step(&gaussian).unwrap();
            }
            chain.positions().to_vec()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn mcmc_options_validate() {
        let bad = McmcOptions {
            thinning: 0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }
}
