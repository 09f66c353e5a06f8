//! Orbital-matrix fitting: the column-wise scale-invariant loss, the plain
//! squared-error baseline it is compared against, and the supervised
//! trainer for both. Targets are one-dimensional Hermite-function orbitals
//! assembled into a small Slater determinant, so the angle between the
//! trained and target wave functions is computable by Monte Carlo.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::ansatz::{MatrixMlp, Parameters};
use crate::error::{Error, Result};
use crate::model::{ConfigSpace, Measure};
use crate::reduce::{pairwise_sum, pairwise_sum_vectors};
use crate::sampler::{stream_rng, McmcOptions, WalkerChain};
use crate::trace::{orbital_columns, Trace, TraceRow};
use crate::vmc::{RunOutput, Schedule, TrainState};

/// Target orbital values over a batch: entry (b, i, j) is orbital j
/// evaluated at coordinate i of sample b.
#[derive(Clone, Debug)]
pub struct OrbitalTargets {
    data: Vec<f64>,
    batch: usize,
    n: usize,
}

impl OrbitalTargets {
    pub fn new(batch: usize, n: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != batch * n * n {
            return Err(Error::DimensionMismatch(format!(
                "orbital targets need batch*n*n = {} values, got {}",
                batch * n * n,
                data.len()
            )));
        }
        Ok(OrbitalTargets { data, batch, n })
    }

    pub fn batch(&self) -> usize {
        self.batch
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn entry(&self, b: usize, row: usize, col: usize) -> f64 {
        self.data[b * self.n * self.n + row * self.n + col]
    }
}

/// Network outputs over a batch, one [`crate::ansatz::OrbitalOutput`] per
/// sample.
pub type OrbitalBatch = Vec<crate::ansatz::OrbitalOutput>;

fn check_shapes(y: &OrbitalBatch, phi: &OrbitalTargets) -> Result<(usize, usize, usize)> {
    if y.is_empty() {
        return Err(Error::invalid("orbital loss needs a nonempty batch"));
    }
    if y.len() != phi.batch() {
        return Err(Error::DimensionMismatch("output/target batch sizes".into()));
    }
    let n = y[0].n();
    let dets = y[0].dets();
    if n != phi.n() {
        return Err(Error::DimensionMismatch("output/target orbital counts".into()));
    }
    Ok((y.len(), n, dets))
}

/// Sum over determinants k and orbital columns j of
/// 1 - (Σ_s y_sj^(k)·φ_j(x_s))²/Σ_s (y_sj^(k))², where s runs jointly over
/// the batch and the row index. Invariant under any nonzero rescaling of a
/// y-column; an all-zero column is an error, not a silent regularization.
#[allow(clippy::needless_range_loop)] // b indexes y and phi jointly
pub fn columnwise_si_loss(y: &OrbitalBatch, phi: &OrbitalTargets) -> Result<f64> {
    let (batch, n, dets) = check_shapes(y, phi)?;
    let mut total = 0.0;
    for k in 0..dets {
        for j in 0..n {
            let mut dot = 0.0;
            let mut y_sq = 0.0;
            for b in 0..batch {
                for i in 0..n {
                    let yv = y[b].entry(i, j, k);
                    dot += yv * phi.entry(b, i, j);
                    y_sq += yv * yv;
                }
            }
            if y_sq == 0.0 {
                return Err(Error::ZeroWaveFunction(format!(
                    "output column j={j} k={k} is identically zero on the batch"
                )));
            }
            total += 1.0 - dot * dot / y_sq;
        }
    }
    Ok(total)
}

/// d(columnwise_si_loss)/dy, laid out like the outputs:
/// for column (j,k) with v = y-column and u = φ-column,
/// ∂/∂v [1 - (v·u)²/(v·v)] = -2(v·u)/(v·v)·u + 2(v·u)²/(v·v)²·v.
#[allow(clippy::needless_range_loop)] // b indexes y, phi, and the cotangents jointly
pub fn columnwise_si_grad(y: &OrbitalBatch, phi: &OrbitalTargets) -> Result<Vec<Vec<f64>>> {
    let (batch, n, dets) = check_shapes(y, phi)?;
    let mut cots = vec![vec![0.0; n * n * dets]; batch];
    for k in 0..dets {
        for j in 0..n {
            let mut dot = 0.0;
            let mut y_sq = 0.0;
            for b in 0..batch {
                for i in 0..n {
                    let yv = y[b].entry(i, j, k);
                    dot += yv * phi.entry(b, i, j);
                    y_sq += yv * yv;
                }
            }
            if y_sq == 0.0 {
                return Err(Error::ZeroWaveFunction(format!(
                    "output column j={j} k={k} is identically zero on the batch"
                )));
            }
            let c1 = -2.0 * dot / y_sq;
            let c2 = 2.0 * dot * dot / (y_sq * y_sq);
            for b in 0..batch {
                for i in 0..n {
                    let yv = y[b].entry(i, j, k);
                    cots[b][k * n * n + i * n + j] = c1 * phi.entry(b, i, j) + c2 * yv;
                }
            }
        }
    }
    Ok(cots)
}

/// Plain squared error Σ_{b,k,i,j} (y_ij^(k) - φ_j(x_i))² — the baseline.
/// Deliberately not scale-invariant: doubling y at a fitted optimum brings
/// the loss back up, which is the defect the column-wise form removes.
#[allow(clippy::needless_range_loop)] // b indexes y and phi jointly
pub fn mse_orbital_loss(y: &OrbitalBatch, phi: &OrbitalTargets) -> Result<f64> {
    let (batch, n, dets) = check_shapes(y, phi)?;
    let mut terms = Vec::with_capacity(batch);
    for b in 0..batch {
        let mut s = 0.0;
        for k in 0..dets {
            for i in 0..n {
                for j in 0..n {
                    let r = y[b].entry(i, j, k) - phi.entry(b, i, j);
                    s += r * r;
                }
            }
        }
        terms.push(s);
    }
    Ok(pairwise_sum(&terms))
}

/// d(mse_orbital_loss)/dy = 2(y - φ), broadcast over determinants.
pub fn mse_orbital_grad(y: &OrbitalBatch, phi: &OrbitalTargets) -> Result<Vec<Vec<f64>>> {
    let (batch, n, dets) = check_shapes(y, phi)?;
    let mut cots = vec![vec![0.0; n * n * dets]; batch];
    for b in 0..batch {
        for k in 0..dets {
            for i in 0..n {
                for j in 0..n {
                    cots[b][k * n * n + i * n + j] =
                        2.0 * (y[b].entry(i, j, k) - phi.entry(b, i, j));
                }
            }
        }
    }
    Ok(cots)
}

/// Normalized Hermite functions h_j(x)·exp(-x²/2)/√(2^j j! √π): an
/// orthonormal family on the line used as desk-scale stand-ins for
/// mean-field orbitals.
pub fn hermite_orbital(j: usize, x: f64) -> f64 {
    // Physicists' Hermite polynomials by recurrence.
    let mut h_prev = 1.0;
    let mut h = 2.0 * x;
    let hj = match j {
        0 => 1.0,
        1 => h,
        _ => {
            for k in 2..=j {
                let next = 2.0 * x * h - 2.0 * (k as f64 - 1.0) * h_prev;
                h_prev = h;
                h = next;
            }
            h
        }
    };
    let mut norm_sq = std::f64::consts::PI.sqrt();
    for k in 1..=j {
        norm_sq *= 2.0 * k as f64;
    }
    hj * (-0.5 * x * x).exp() / norm_sq.sqrt()
}

/// The antisymmetric target det[φ_j(x_i)] built from the first n Hermite
/// orbitals.
pub fn hermite_det_target(x: &DVector<f64>) -> f64 {
    let n = x.len();
    DMatrix::from_fn(n, n, |i, j| hermite_orbital(j, x[i])).determinant()
}

fn orbital_targets_at(points: &[DVector<f64>], n: usize) -> OrbitalTargets {
    let batch = points.len();
    let mut data = Vec::with_capacity(batch * n * n);
    for x in points {
        for i in 0..n {
            for j in 0..n {
                data.push(hermite_orbital(j, x[i]));
            }
        }
    }
    OrbitalTargets::new(batch, n, data).expect("shape by construction")
}

/// Which supervised loss drives the orbital fit.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OrbitalLoss {
    ScaleInvariant,
    Mse,
}

impl OrbitalLoss {
    pub fn describe(&self) -> &'static str {
        match self {
            OrbitalLoss::ScaleInvariant => "si",
            OrbitalLoss::Mse => "mse",
        }
    }
}

#[derive(Clone, Debug)]
pub struct OrbitalPretrainConfig {
    pub orbitals: usize,
    pub dets: usize,
    pub hidden: Vec<usize>,
    pub half_width: f64,
    pub n: usize,
    pub steps: usize,
    pub eta0: f64,
    pub seed: u64,
    pub loss: OrbitalLoss,
    /// Initial value of the trainable output scale. The column-wise loss is
    /// exactly indifferent to it; the squared-error baseline sees it as an
    /// overall gradient rescaling, so this dial isolates scale sensitivity.
    pub init_output_scale: f64,
    /// Lebesgue draws uniformly on the box; the target-induced measure runs
    /// Metropolis on |det target|².
    pub rho: Measure,
    pub mcmc: McmcOptions,
    /// Fresh-batch size for the final angle measurement.
    pub eval_n: usize,
}

impl Default for OrbitalPretrainConfig {
    fn default() -> Self {
        OrbitalPretrainConfig {
            orbitals: 2,
            dets: 1,
            hidden: vec![16, 16],
            half_width: 6.0,
            n: 256,
            steps: 1000,
            eta0: 0.02,
            seed: 0,
            loss: OrbitalLoss::ScaleInvariant,
            init_output_scale: 1.0,
            rho: Measure::TargetInduced,
            mcmc: McmcOptions {
                burn_in: 300,
                thinning: 5,
                step_size: None,
            },
            eval_n: 4096,
        }
    }
}

pub struct OrbitalRun {
    pub output: RunOutput,
    /// sin-angle between Σ_k det(y^(k)) and the determinant target on a
    /// fresh evaluation batch.
    pub final_angle: f64,
}

enum OrbitalRho {
    Uniform,
    Chain(WalkerChain),
}

struct OrbitalSampler {
    rho: OrbitalRho,
    thinning: usize,
    bounds: Vec<(f64, f64)>,
}

impl OrbitalSampler {
    fn build(
        cfg_rho: &Measure,
        space: &ConfigSpace,
        n: usize,
        mcmc: &McmcOptions,
        seed: u64,
    ) -> Result<Self> {
        let bounds = space.bounds().expect("continuous").to_vec();
        let rho = match cfg_rho {
            Measure::Lebesgue => OrbitalRho::Uniform,
            Measure::TargetInduced => {
                let amp = |x: &DVector<f64>| hermite_det_target(x);
                let step = match mcmc.step_size {
                    Some(s) => s,
                    None => crate::sampler::tune_step_size(space, &amp, seed ^ 0x5eed)?,
                };
                let mut chain = WalkerChain::new(space, &amp, n, step, seed)?;
                for _ in 0..mcmc.burn_in {
                    chain.step(&amp)?;
                }
                OrbitalRho::Chain(chain)
            }
            Measure::FiniteWeights(_) => {
                return Err(Error::invalid("orbital fitting runs on continuous boxes"))
            }
        };
        Ok(OrbitalSampler {
            rho,
            thinning: mcmc.thinning,
            bounds,
        })
    }

    fn draw(&mut self, n: usize, rng: &mut rand_chacha::ChaCha8Rng) -> Result<Vec<DVector<f64>>> {
        match &mut self.rho {
            OrbitalRho::Uniform => {
                use rand::Rng as _;
                Ok((0..n)
                    .map(|_| {
                        DVector::from_iterator(
                            self.bounds.len(),
                            self.bounds.iter().map(|(lo, hi)| rng.random_range(*lo..*hi)),
                        )
                    })
                    .collect())
            }
            OrbitalRho::Chain(chain) => {
                let amp = |x: &DVector<f64>| hermite_det_target(x);
                for _ in 0..self.thinning {
                    chain.step(&amp)?;
                }
                if chain.n_walkers() != n {
                    return Err(Error::invalid("walker count does not match batch size"));
                }
                Ok(chain.positions().to_vec())
            }
        }
    }
}

fn angle_on_points(net: &MatrixMlp, theta: &Parameters, points: &[DVector<f64>]) -> Result<f64> {
    let psi: Result<Vec<f64>> = points.par_iter().map(|x| net.psi(theta, x)).collect();
    let phi: Vec<f64> = points.iter().map(hermite_det_target).collect();
    crate::pretrain::wavefunction_angle_mc(&psi?, &phi)
}

/// SGD on one of the orbital losses. Gradients use the mean convention
/// (batch-loss gradient divided by the batch size) so eta0 has a
/// batch-independent meaning; the recorded loss value stays the plain sum.
pub fn orbital_pretrain(cfg: &OrbitalPretrainConfig) -> Result<OrbitalRun> {
    if cfg.n < 2 || cfg.steps < 1 || cfg.eta0 <= 0.0 {
        return Err(Error::invalid("bad orbital pre-training configuration"));
    }
    let space = ConfigSpace::symmetric_box(cfg.orbitals, cfg.half_width)?;
    let net = MatrixMlp::new(space.clone(), cfg.hidden.clone(), cfg.dets)?;
    let mut theta = {
        let mut values = net.init_parameters(cfg.seed).to_vec();
        let last = values.len() - 1;
        values[last] = cfg.init_output_scale;
        Parameters::from_slice(&values)?
    };
    let schedule = Schedule::Constant { eta0: cfg.eta0 };
    let mut sampler = OrbitalSampler::build(&cfg.rho, &space, cfg.n, &cfg.mcmc, cfg.seed)?;
    let mut rng = stream_rng(cfg.seed, super::BATCH_STREAM);

    let mut trace = Trace::new(
        orbital_columns(),
        format!(
            "rho={} n={} mcmc(burn_in={} thinning={})",
            match cfg.rho {
                Measure::Lebesgue => "lebesgue",
                _ => "target",
            },
            cfg.n,
            cfg.mcmc.burn_in,
            cfg.mcmc.thinning
        ),
        format!(
            "orbital-pretrain loss={} orbitals={} dets={} steps={} seed={}",
            cfg.loss.describe(),
            cfg.orbitals,
            cfg.dets,
            cfg.steps,
            cfg.seed
        ),
    );

    let mut runmin = f64::INFINITY;
    let mut prev: Option<(DVector<f64>, Parameters)> = None;
    let mut divergence = None;

    for m in 0..cfg.steps {
        let eta = schedule.eta(m);
        let points = sampler.draw(cfg.n, &mut rng)?;
        let outputs: Result<OrbitalBatch> =
            points.par_iter().map(|x| net.forward(&theta, x)).collect();
        let outputs = outputs?;
        let targets = orbital_targets_at(&points, cfg.orbitals);

        let (loss, cots) = match cfg.loss {
            OrbitalLoss::ScaleInvariant => (
                columnwise_si_loss(&outputs, &targets)?,
                columnwise_si_grad(&outputs, &targets)?,
            ),
            OrbitalLoss::Mse => (
                mse_orbital_loss(&outputs, &targets)?,
                mse_orbital_grad(&outputs, &targets)?,
            ),
        };

        let per_sample: Result<Vec<DVector<f64>>> = points
            .par_iter()
            .zip(cots.par_iter())
            .map(|(x, cot)| net.vjp(&theta, x, cot))
            .collect();
        let grad = pairwise_sum_vectors(&per_sample?, theta.dim()) / cfg.n as f64;
        let grad_norm = grad.norm();
        if !grad_norm.is_finite() {
            divergence = Some(format!("non-finite gradient at step {m}"));
            break;
        }
        runmin = runmin.min(grad_norm);
        let lipschitz = prev.as_ref().and_then(|(g, t)| {
            crate::diagnostics::lipschitz_estimate(g, &grad, t.as_vector(), theta.as_vector()).ok()
        });
        let angle = angle_on_points(&net, &theta, &points)?;
        trace.push(TraceRow {
            step: m,
            eta,
            loss: Some(loss),
            angle: Some(angle),
            grad_norm,
            runmin_grad_norm: runmin,
            lipschitz_est: lipschitz,
            ..Default::default()
        });

        prev = Some((grad.clone(), theta.clone()));
        match theta.step(eta, &grad) {
            Ok(next) => theta = next,
            Err(e) => {
                divergence = Some(format!("parameter update failed at step {m}: {e}"));
                break;
            }
        }
        if theta.as_vector().amax() > crate::vmc::DIVERGENCE_THETA_BOUND {
            divergence = Some(format!("|theta| exceeded divergence bound at step {m}"));
            break;
        }
    }

    // Final angle on a fresh evaluation batch.
    let mut eval_rng = stream_rng(cfg.seed ^ 0xE7A1, super::BATCH_STREAM);
    let mut eval_sampler =
        OrbitalSampler::build(&cfg.rho, &space, cfg.eval_n, &cfg.mcmc, cfg.seed ^ 0xE7A1)?;
    let eval_points = eval_sampler.draw(cfg.eval_n, &mut eval_rng)?;
    let final_angle = angle_on_points(&net, &theta, &eval_points)?;

    let steps_done = trace.rows.len();
    Ok(OrbitalRun {
        output: RunOutput {
            state: TrainState {
                theta,
                steps_done,
                seed: cfg.seed,
            },
            trace,
            divergence,
        },
        final_angle,
    })
}

/// Result of running both losses from identical seeds.
#[derive(Clone, Debug)]
pub struct LossComparison {
    pub seed: u64,
    pub si_angle: f64,
    pub mse_angle: f64,
}

/// Runs the scale-invariant and squared-error fits with identical seeds
/// (identical initialization and sample stream) and reports the final
/// angles per seed.
pub fn compare_orbital_pretrain(
    base: &OrbitalPretrainConfig,
    seeds: &[u64],
) -> Result<Vec<LossComparison>> {
    let mut rows = Vec::with_capacity(seeds.len());
    for &seed in seeds {
        let mut si_cfg = base.clone();
        si_cfg.seed = seed;
        si_cfg.loss = OrbitalLoss::ScaleInvariant;
        let mut mse_cfg = si_cfg.clone();
        mse_cfg.loss = OrbitalLoss::Mse;
        let si = orbital_pretrain(&si_cfg)?;
        let mse = orbital_pretrain(&mse_cfg)?;
        rows.push(LossComparison {
            seed,
            si_angle: si.final_angle,
            mse_angle: mse.final_angle,
        });
    }
    Ok(rows)
}

pub fn median(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.partial_cmp(b).expect("comparable"));
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ansatz::OrbitalOutput;
    use approx::assert_abs_diff_eq;

    // Builds a batch of outputs directly from a closure, bypassing any
    // network, for loss-shape tests.
    fn synth_outputs(
        batch: usize,
        n: usize,
        f: impl Fn(usize, usize, usize) -> f64,
    ) -> OrbitalBatch {
        (0..batch)
            .map(|b| {
                let values: Vec<f64> = (0..n * n).map(|idx| f(b, idx / n, idx % n)).collect();
                OrbitalOutput::from_raw(values, n, 1)
            })
            .collect()
    }

    fn unit_norm_targets(batch: usize, n: usize) -> OrbitalTargets {
        // Column norms over (batch, row) are normalized to 1 so that exact
        // alignment gives a loss of exactly zero.
        let mut data = vec![0.0; batch * n * n];
        for j in 0..n {
            let mut norm_sq = 0.0;
            let raw: Vec<f64> = (0..batch * n)
                .map(|s| ((s + j + 1) as f64 * 0.7).sin() + 0.1)
                .collect();
            for v in &raw {
                norm_sq += v * v;
            }
            let norm = norm_sq.sqrt();
            for b in 0..batch {
                for i in 0..n {
                    data[b * n * n + i * n + j] = raw[b * n + i] / norm;
                }
            }
        }
        OrbitalTargets::new(batch, n, data).unwrap()
    }

    #[test]
    fn aligned_unit_columns_give_zero_si_loss() {
        let phi = unit_norm_targets(5, 2);
        let y = synth_outputs(5, 2, |b, i, j| phi.entry(b, i, j));
        assert_abs_diff_eq!(columnwise_si_loss(&y, &phi).unwrap(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn column_scaling_leaves_si_loss_unchanged() {
        let phi = unit_norm_targets(4, 2);
        let y = synth_outputs(4, 2, |b, i, j| phi.entry(b, i, j) * if j == 0 { -7.0 } else { 0.03 });
        assert_abs_diff_eq!(columnwise_si_loss(&y, &phi).unwrap(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn orthogonal_column_contributes_one() {
        // batch of 2 samples, n = 2; make column 0 of y orthogonal to
        // column 0 of φ over the flattened (sample,row) index, column 1
        // aligned.
        let mut data = vec![0.0; 2 * 2 * 2];
        // φ column 0: (1,0,0,0)/1; column 1: (0,1,0,0).
        data[0] = 1.0; // b=0,i=0,j=0
        data[1] = 0.0;
        data[2] = 0.0;
        data[3] = 1.0; // b=0,i=1,j=1
        let phi = OrbitalTargets::new(2, 2, data).unwrap();
        let y = synth_outputs(2, 2, |b, i, j| match (b, i, j) {
            // y column 0 supported where φ column 0 vanishes.
            (1, 0, 0) => 1.0,
            // y column 1 = φ column 1.
            (0, 1, 1) => 1.0,
            _ => 0.0,
        });
        let loss = columnwise_si_loss(&y, &phi).unwrap();
        assert_abs_diff_eq!(loss, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn zero_column_is_an_error() {
        let phi = unit_norm_targets(3, 2);
        let y = synth_outputs(3, 2, |b, i, j| if j == 0 { 0.0 } else { phi.entry(b, i, j) });
        assert!(columnwise_si_loss(&y, &phi).is_err());
    }

    #[test]
    fn mse_matches_and_breaks_under_scaling() {
        let phi = unit_norm_targets(4, 2);
        let aligned = synth_outputs(4, 2, |b, i, j| phi.entry(b, i, j));
        assert_abs_diff_eq!(mse_orbital_loss(&aligned, &phi).unwrap(), 0.0, epsilon = 1e-14);
        let zero = synth_outputs(4, 2, |_, _, _| 0.0);
        let mut phi_sq = 0.0;
        for b in 0..4 {
            for i in 0..2 {
                for j in 0..2 {
                    phi_sq += phi.entry(b, i, j).powi(2);
                }
            }
        }
        assert_abs_diff_eq!(mse_orbital_loss(&zero, &phi).unwrap(), phi_sq, epsilon = 1e-12);
        // Doubling the output at the optimum brings the loss back up: the
        // squared-error form is not scale-invariant.
        let doubled = synth_outputs(4, 2, |b, i, j| 2.0 * phi.entry(b, i, j));
        assert_abs_diff_eq!(
            mse_orbital_loss(&doubled, &phi).unwrap(),
            phi_sq,
            epsilon = 1e-12
        );
        assert!(mse_orbital_loss(&doubled, &phi).unwrap() > 1e-3);
    }

    #[test]
    fn si_grad_matches_finite_differences() {
        let phi = unit_norm_targets(3, 2);
        let base: Vec<Vec<f64>> = (0..3)
            .map(|b| (0..4).map(|idx| ((b * 4 + idx) as f64 * 0.31).cos()).collect())
            .collect();
        let build = |vals: &[Vec<f64>]| -> OrbitalBatch {
            vals.iter()
                .map(|v| OrbitalOutput::from_raw(v.clone(), 2, 1))
                .collect()
        };
        let y = build(&base);
        let grads = columnwise_si_grad(&y, &phi).unwrap();
        let h = 1e-6;
        for b in 0..3 {
            for idx in 0..4 {
                let mut plus = base.clone();
                plus[b][idx] += h;
                let mut minus = base.clone();
                minus[b][idx] -= h;
                let fd = (columnwise_si_loss(&build(&plus), &phi).unwrap()
                    - columnwise_si_loss(&build(&minus), &phi).unwrap())
                    / (2.0 * h);
                assert!(
                    (grads[b][idx] - fd).abs() <= 1e-6 * fd.abs().max(1.0),
                    "b={b} idx={idx}: {} vs {}",
                    grads[b][idx],
                    fd
                );
            }
        }
    }

    #[test]
    fn hermite_orbitals_are_orthonormal() {
        // Simpson quadrature over [-8, 8].
        let quad = |f: &dyn Fn(f64) -> f64| {
            let n = 2000;
            let (a, b) = (-8.0, 8.0);
            let h = (b - a) / n as f64;
            let mut s = f(a) + f(b);
            for i in 1..n {
                let x = a + i as f64 * h;
                s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(x);
            }
            s * h / 3.0
        };
        for j in 0..3 {
            for l in 0..3 {
                let v = quad(&|x| hermite_orbital(j, x) * hermite_orbital(l, x));
                let expect = if j == l { 1.0 } else { 0.0 };
                assert_abs_diff_eq!(v, expect, epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn det_target_is_antisymmetric() {
        let x = DVector::from_vec(vec![0.3, -1.1]);
        let swapped = DVector::from_vec(vec![-1.1, 0.3]);
        assert_abs_diff_eq!(
            hermite_det_target(&x),
            -hermite_det_target(&swapped),
            epsilon = 1e-14
        );
    }

    #[test]
    fn median_of_slice() {
        assert_abs_diff_eq!(median(&mut [3.0, 1.0, 2.0]), 2.0);
        assert_abs_diff_eq!(median(&mut [4.0, 1.0, 2.0, 3.0]), 2.5);
    }
}
