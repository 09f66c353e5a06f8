//! Experiment configuration: a sectioned key/value file (TOML) mapped onto
//! the library's run configurations. `configs/` in the repository root
//! holds annotated examples.

use anyhow::{bail, Context, Result};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use vmckit::ansatz::{ExpFamilyAnsatz, Feature, MlpAnsatz, TableAnsatz};
use vmckit::model::{ConfigSpace, Hamiltonian, Measure, Potential};
use vmckit::pretrain::orbital::{OrbitalLoss, OrbitalPretrainConfig};
use vmckit::pretrain::{NormStrategy, Target};
use vmckit::sampler::McmcOptions;
use vmckit::vmc::{SamplerKind, Schedule};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentSection,
    pub system: SystemSection,
    #[serde(default)]
    pub ansatz: AnsatzSection,
    #[serde(default)]
    pub sampler: SamplerSection,
    pub schedule: ScheduleSection,
    #[serde(default)]
    pub pretrain: PretrainSection,
    #[serde(default)]
    pub target: TargetSection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    /// vmc | pretrain | compare-pretrain
    pub kind: String,
    pub seed: u64,
    pub steps: usize,
    pub batch_size: usize,
    #[serde(default = "default_output")]
    pub output: String,
    /// 0 keeps the default thread pool.
    #[serde(default)]
    pub threads: usize,
}

fn default_output() -> String {
    "runs/out".into()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSection {
    /// finite | ho1d | hatom | pretrain_toy
    pub kind: String,
    /// Finite spaces: number of states.
    #[serde(default)]
    pub size: usize,
    /// Finite spaces: "path" for the built-in test system, "matrix" with
    /// the explicit entries below.
    #[serde(default = "default_hamiltonian")]
    pub hamiltonian: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrix: Option<Vec<Vec<f64>>>,
    /// Continuous boxes: half-width per coordinate.
    #[serde(default = "default_half_width")]
    pub half_width: f64,
    /// pretrain_toy: number of orbitals.
    #[serde(default = "default_orbitals")]
    pub orbitals: usize,
}

fn default_hamiltonian() -> String {
    "path".into()
}

fn default_half_width() -> f64 {
    6.0
}

fn default_orbitals() -> usize {
    2
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnsatzSection {
    /// default | table | exp_family | mlp | matrix_mlp
    #[serde(default = "default_ansatz_kind")]
    pub kind: String,
    #[serde(default)]
    pub features: Vec<String>,
    #[serde(default = "default_hidden")]
    pub hidden: Vec<usize>,
    #[serde(default = "default_dets")]
    pub dets: usize,
    #[serde(default = "default_scale")]
    pub init_output_scale: f64,
}

fn default_ansatz_kind() -> String {
    "default".into()
}

fn default_hidden() -> Vec<usize> {
    vec![16, 16]
}

fn default_dets() -> usize {
    1
}

fn default_scale() -> f64 {
    1.0
}

impl Default for AnsatzSection {
    fn default() -> Self {
        AnsatzSection {
            kind: "default".into(),
            features: Vec::new(),
            hidden: default_hidden(),
            dets: default_dets(),
            init_output_scale: default_scale(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerSection {
    /// exact | metropolis
    #[serde(default = "default_sampler_kind")]
    pub kind: String,
    /// 0 tunes to roughly 50% acceptance before training.
    #[serde(default)]
    pub step_size: f64,
    #[serde(default = "default_burn_in")]
    pub burn_in: usize,
    #[serde(default = "default_thinning")]
    pub thinning: usize,
}

fn default_sampler_kind() -> String {
    "default".into()
}

fn default_burn_in() -> usize {
    500
}

fn default_thinning() -> usize {
    10
}

impl Default for SamplerSection {
    fn default() -> Self {
        SamplerSection {
            kind: "default".into(),
            step_size: 0.0,
            burn_in: default_burn_in(),
            thinning: default_thinning(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleSection {
    /// constant | inverse_sqrt | offset_inverse_sqrt
    pub kind: String,
    pub eta0: f64,
    #[serde(default = "default_m0")]
    pub m0: f64,
}

fn default_m0() -> f64 {
    10_000.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PretrainSection {
    /// same_batch | independent_batch | periodic_large_batch
    #[serde(default = "default_strategy")]
    pub strategy: String,
    #[serde(default = "default_k")]
    pub k: usize,
    /// Batch size for the independent-norm strategy; 0 means reuse the
    /// training batch size.
    #[serde(default)]
    pub norm_batch: usize,
    /// lebesgue | target
    #[serde(default = "default_rho")]
    pub rho: String,
    /// si | mse — which loss drives an orbital pretraining run.
    #[serde(default = "default_loss")]
    pub loss: String,
    /// Seeds for compare-pretrain.
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
}

fn default_strategy() -> String {
    "same_batch".into()
}

fn default_k() -> usize {
    100
}

fn default_rho() -> String {
    "target".into()
}

fn default_loss() -> String {
    "si".into()
}

fn default_seeds() -> Vec<u64> {
    vec![0, 1, 2, 3, 4]
}

impl Default for PretrainSection {
    fn default() -> Self {
        PretrainSection {
            strategy: "same_batch".into(),
            k: default_k(),
            norm_batch: 0,
            rho: default_rho(),
            loss: default_loss(),
            seeds: default_seeds(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetSection {
    /// random_unit (finite, seeded) | values (finite, explicit) | gaussian
    /// (continuous exp(-x²/2))
    #[serde(default = "default_target_kind")]
    pub kind: String,
    #[serde(default)]
    pub values: Vec<f64>,
}

fn default_target_kind() -> String {
    "random_unit".into()
}

impl Default for TargetSection {
    fn default() -> Self {
        TargetSection {
            kind: "random_unit".into(),
            values: Vec::new(),
        }
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).context("config parse error")?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string_pretty(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.experiment.batch_size < 2 {
            bail!("experiment.batch_size must be >= 2");
        }
        if self.experiment.steps < 1 {
            bail!("experiment.steps must be >= 1");
        }
        match self.experiment.kind.as_str() {
            "vmc" | "pretrain" | "compare-pretrain" => {}
            other => bail!("unknown experiment.kind {other:?}"),
        }
        match self.system.kind.as_str() {
            "finite" => {
                if self.system.size < 2 {
                    bail!("system.size must be >= 2 for finite spaces");
                }
            }
            "ho1d" | "hatom" | "pretrain_toy" => {}
            other => bail!("unknown system.kind {other:?}"),
        }
        self.schedule(0)?;
        Ok(())
    }

    pub fn schedule(&self, n: usize) -> Result<Schedule> {
        let schedule = match self.schedule.kind.as_str() {
            "constant" => Schedule::Constant {
                eta0: self.schedule.eta0,
            },
            "inverse_sqrt" => Schedule::InverseSqrt {
                eta0: self.schedule.eta0,
                n: n.max(1),
            },
            "offset_inverse_sqrt" => Schedule::OffsetInverseSqrt {
                eta0: self.schedule.eta0,
                m0: self.schedule.m0,
            },
            other => bail!("unknown schedule.kind {other:?}"),
        };
        schedule.validate()?;
        Ok(schedule)
    }

    pub fn mcmc_options(&self) -> McmcOptions {
        McmcOptions {
            burn_in: self.sampler.burn_in,
            thinning: self.sampler.thinning,
            step_size: if self.sampler.step_size > 0.0 {
                Some(self.sampler.step_size)
            } else {
                None
            },
        }
    }

    pub fn sampler_kind(&self, finite: bool) -> Result<SamplerKind> {
        let kind = match self.sampler.kind.as_str() {
            "default" => {
                if finite {
                    "exact"
                } else {
                    "metropolis"
                }
            }
            other => other,
        };
        match kind {
            "exact" => Ok(SamplerKind::Exact),
            "metropolis" => Ok(SamplerKind::Metropolis(self.mcmc_options())),
            other => bail!("unknown sampler.kind {other:?}"),
        }
    }

    pub fn finite_hamiltonian(&self) -> Result<Hamiltonian> {
        match self.system.hamiltonian.as_str() {
            "path" => Ok(Hamiltonian::path_with_potential(self.system.size)?),
            "matrix" => {
                let rows = self
                    .system
                    .matrix
                    .as_ref()
                    .context("system.matrix missing for hamiltonian = \"matrix\"")?;
                let n = rows.len();
                if n != self.system.size || rows.iter().any(|r| r.len() != n) {
                    bail!("system.matrix must be size x size");
                }
                let flat: Vec<f64> = rows.iter().flatten().copied().collect();
                Ok(Hamiltonian::matrix(DMatrix::from_row_slice(n, n, &flat))?)
            }
            other => bail!("unknown system.hamiltonian {other:?}"),
        }
    }

    /// The scalar ansatz for vmc/pretrain runs on this system.
    pub fn build_ansatz(&self) -> Result<Box<dyn vmckit::ansatz::Ansatz>> {
        let kind = match (self.ansatz.kind.as_str(), self.system.kind.as_str()) {
            ("default", "finite") => "table",
            ("default", "ho1d") => "exp_family",
            ("default", "hatom") => "exp_family",
            ("default", other) => bail!("no default scalar ansatz for system {other:?}"),
            (k, _) => k,
        };
        match kind {
            "table" => Ok(Box::new(TableAnsatz::new(self.system.size)?)),
            "exp_family" => {
                let space = self.continuous_space()?;
                let features = if self.ansatz.features.is_empty() {
                    match self.system.kind.as_str() {
                        "hatom" => vec![Feature::Exponential],
                        _ => vec![Feature::Gaussian],
                    }
                } else {
                    self.ansatz
                        .features
                        .iter()
                        .map(|f| match f.as_str() {
                            "gaussian" => Ok(Feature::Gaussian),
                            "exponential" => Ok(Feature::Exponential),
                            other => bail!("unknown feature {other:?}"),
                        })
                        .collect::<Result<_>>()?
                };
                Ok(Box::new(ExpFamilyAnsatz::new(space, features)?))
            }
            "mlp" => Ok(Box::new(MlpAnsatz::new(
                self.continuous_space()?,
                self.ansatz.hidden.clone(),
            )?)),
            other => bail!("ansatz {other:?} is not a scalar wave function"),
        }
    }

    pub fn continuous_space(&self) -> Result<ConfigSpace> {
        let dim = match self.system.kind.as_str() {
            "ho1d" => 1,
            "hatom" => 3,
            "pretrain_toy" => self.system.orbitals,
            other => bail!("system {other:?} is not continuous"),
        };
        Ok(ConfigSpace::symmetric_box(dim, self.system.half_width)?)
    }

    pub fn potential(&self) -> Result<Potential> {
        match self.system.kind.as_str() {
            "ho1d" => Ok(Potential::harmonic()),
            "hatom" => Ok(Potential::coulomb()),
            other => bail!("system {other:?} has no continuous potential"),
        }
    }

    pub fn norm_strategy(&self) -> Result<NormStrategy> {
        let n = if self.pretrain.norm_batch > 0 {
            self.pretrain.norm_batch
        } else {
            self.experiment.batch_size
        };
        match self.pretrain.strategy.as_str() {
            "same_batch" => Ok(NormStrategy::SameBatch),
            "independent_batch" => Ok(NormStrategy::IndependentBatch { n }),
            "periodic_large_batch" => Ok(NormStrategy::PeriodicLargeBatch {
                k: self.pretrain.k,
            }),
            other => bail!("unknown pretrain.strategy {other:?}"),
        }
    }

    pub fn rho_measure(&self) -> Result<Measure> {
        match self.pretrain.rho.as_str() {
            "lebesgue" => Ok(Measure::Lebesgue),
            "target" => Ok(Measure::TargetInduced),
            other => bail!("unknown pretrain.rho {other:?}"),
        }
    }

    pub fn build_target(&self) -> Result<Target> {
        match self.system.kind.as_str() {
            "finite" => {
                let rho = match self.pretrain.rho.as_str() {
                    "lebesgue" => Measure::uniform(self.system.size)?,
                    "target" => Measure::TargetInduced,
                    other => bail!("unknown pretrain.rho {other:?}"),
                };
                let phi = match self.target.kind.as_str() {
                    "values" => {
                        if self.target.values.len() != self.system.size {
                            bail!("target.values length must equal system.size");
                        }
                        DVector::from_vec(self.target.values.clone())
                    }
                    "random_unit" => {
                        use rand::Rng as _;
                        let mut rng =
                            vmckit::sampler::stream_rng(self.experiment.seed, 0xF1);
                        let mut phi = DVector::from_fn(self.system.size, |_, _| {
                            rng.random_range(-1.0..1.0f64)
                        });
                        if phi.norm() < 1e-6 {
                            phi[0] += 1.0;
                        }
                        phi /= phi.norm();
                        phi
                    }
                    other => bail!("unknown target.kind {other:?} for a finite system"),
                };
                Ok(Target::finite(phi, rho, None)?)
            }
            "ho1d" => {
                let space = self.continuous_space()?;
                match self.target.kind.as_str() {
                    "gaussian" | "random_unit" => Ok(Target::continuous(
                        "gaussian",
                        |x: &DVector<f64>| (-0.5 * x.norm_squared()).exp(),
                        self.rho_measure()?,
                        space,
                        Some(1.0),
                    )?),
                    other => bail!("unknown target.kind {other:?} for ho1d"),
                }
            }
            other => bail!("scalar pretraining is not defined for system {other:?}"),
        }
    }

    pub fn orbital_config(&self) -> Result<OrbitalPretrainConfig> {
        if self.system.kind != "pretrain_toy" {
            bail!("orbital pretraining needs system.kind = \"pretrain_toy\"");
        }
        let loss = match self.pretrain.loss.as_str() {
            "si" => OrbitalLoss::ScaleInvariant,
            "mse" => OrbitalLoss::Mse,
            other => bail!("unknown pretrain.loss {other:?}"),
        };
        Ok(OrbitalPretrainConfig {
            orbitals: self.system.orbitals,
            dets: self.ansatz.dets,
            hidden: self.ansatz.hidden.clone(),
            half_width: self.system.half_width,
            n: self.experiment.batch_size,
            steps: self.experiment.steps,
            eta0: self.schedule.eta0,
            seed: self.experiment.seed,
            loss,
            init_output_scale: self.ansatz.init_output_scale,
            rho: self.rho_measure()?,
            mcmc: self.mcmc_options(),
            eval_n: 4096,
        })
    }
}
