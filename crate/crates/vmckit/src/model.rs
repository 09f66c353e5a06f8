//! Configuration spaces, probability measures, and Hamiltonians — the
//! substrate the estimators and training loops compute against.
//!
//! Finite spaces carry explicit weight vectors and dense symmetric
//! Hamiltonian matrices, which makes every expectation exactly summable.
//! Continuous spaces are bounded boxes with a kinetic-plus-potential
//! operator; expectations there are Monte Carlo estimates.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::ansatz::{Ansatz, Parameters};
use crate::error::{Error, Result};

/// Maximum asymmetry tolerated in a matrix Hamiltonian. Symmetry is what
/// makes the per-sample local-energy gradient average out to zero.
pub const SYMMETRY_TOL: f64 = 1e-12;

/// Largest dense eigenproblem accepted by [`ground_truth_spectrum`].
pub const MAX_DENSE_EIGEN: usize = 512;

/// Residual bound the reference spectrum must satisfy.
pub const EIGEN_RESIDUAL_TOL: f64 = 1e-8;

/// Where wave functions live: a finite point set or a bounded box in D
/// dimensions.
#[derive(Clone, Debug, PartialEq)]
pub enum ConfigSpace {
    Finite { size: usize },
    Continuous { bounds: Vec<(f64, f64)> },
}

impl ConfigSpace {
    /// Finite space with `size` points. Estimators need at least two
    /// distinct outcomes, so `size >= 2`.
    pub fn finite(size: usize) -> Result<Self> {
        if size < 2 {
            return Err(Error::invalid(format!(
                "finite space needs at least 2 points, got {size}"
            )));
        }
        Ok(ConfigSpace::Finite { size })
    }

    /// Bounded box given by per-dimension `(lower, upper)` pairs.
    pub fn continuous(bounds: Vec<(f64, f64)>) -> Result<Self> {
        if bounds.is_empty() {
            return Err(Error::invalid("continuous space needs dimension >= 1"));
        }
        for (i, (lo, hi)) in bounds.iter().enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::invalid(format!(
                    "bad bounds in dimension {i}: ({lo}, {hi})"
                )));
            }
        }
        Ok(ConfigSpace::Continuous { bounds })
    }

    /// Symmetric box `[-half, half]^dim`.
    pub fn symmetric_box(dim: usize, half: f64) -> Result<Self> {
        Self::continuous(vec![(-half, half); dim])
    }

    pub fn dim(&self) -> usize {
        match self {
            ConfigSpace::Finite { .. } => 1,
            ConfigSpace::Continuous { bounds } => bounds.len(),
        }
    }

    pub fn finite_size(&self) -> Option<usize> {
        match self {
            ConfigSpace::Finite { size } => Some(*size),
            ConfigSpace::Continuous { .. } => None,
        }
    }

    pub fn bounds(&self) -> Option<&[(f64, f64)]> {
        match self {
            ConfigSpace::Finite { .. } => None,
            ConfigSpace::Continuous { bounds } => Some(bounds),
        }
    }

    /// True when `x` is a member of the space.
    pub fn contains(&self, x: &ConfigPoint) -> bool {
        match (self, x) {
            (ConfigSpace::Finite { size }, ConfigPoint::Finite(i)) => i < size,
            (ConfigSpace::Continuous { bounds }, ConfigPoint::Continuous(v)) => {
                v.len() == bounds.len()
                    && v.iter()
                        .zip(bounds)
                        .all(|(xi, (lo, hi))| *xi >= *lo && *xi <= *hi)
            }
            _ => false,
        }
    }
}

/// A single configuration: an index on finite spaces, a coordinate vector on
/// continuous ones.
#[derive(Clone, Debug, PartialEq)]
pub enum ConfigPoint {
    Finite(usize),
    Continuous(DVector<f64>),
}

impl ConfigPoint {
    pub fn index(&self) -> Result<usize> {
        match self {
            ConfigPoint::Finite(i) => Ok(*i),
            ConfigPoint::Continuous(_) => Err(Error::invalid(
                "expected a finite-space index, got continuous coordinates",
            )),
        }
    }

    pub fn coords(&self) -> Result<&DVector<f64>> {
        match self {
            ConfigPoint::Continuous(v) => Ok(v),
            ConfigPoint::Finite(_) => Err(Error::invalid(
                "expected continuous coordinates, got a finite-space index",
            )),
        }
    }

    pub fn validate(&self, space: &ConfigSpace) -> Result<()> {
        match self {
            ConfigPoint::Finite(i) => {
                let size = space.finite_size().ok_or_else(|| {
                    Error::invalid("finite point used with a continuous space")
                })?;
                if *i >= size {
                    return Err(Error::invalid(format!(
                        "index {i} out of range for a {size}-point space"
                    )));
                }
            }
            ConfigPoint::Continuous(v) => {
                if v.iter().any(|c| !c.is_finite()) {
                    return Err(Error::NonFinite("configuration coordinates".into()));
                }
                if space.bounds().map(|b| b.len()) != Some(v.len()) {
                    return Err(Error::DimensionMismatch(
                        "point dimension does not match space".into(),
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Probability measure on a configuration space.
///
/// `TargetInduced` means `dρ ∝ |φ|² dx` for the target function `φ` the
/// measure is attached to (see `pretrain::Target`); it is resolved to
/// explicit weights or a Metropolis chain at the point of use.
#[derive(Clone, Debug)]
pub enum Measure {
    FiniteWeights(DVector<f64>),
    Lebesgue,
    TargetInduced,
}

impl Measure {
    /// Normalizes nonnegative weights into an explicit probability vector.
    pub fn finite_weights(raw: &[f64]) -> Result<Self> {
        if raw.len() < 2 {
            return Err(Error::invalid("weight vector needs at least 2 entries"));
        }
        if raw.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::invalid("weights must be finite and nonnegative"));
        }
        let total: f64 = raw.iter().sum();
        if total <= 0.0 {
            return Err(Error::invalid("weights sum to zero"));
        }
        Ok(Measure::FiniteWeights(DVector::from_iterator(
            raw.len(),
            raw.iter().map(|w| w / total),
        )))
    }

    /// Uniform weights on `size` points.
    pub fn uniform(size: usize) -> Result<Self> {
        Self::finite_weights(&vec![1.0; size])
    }

    pub fn weights(&self) -> Option<&DVector<f64>> {
        match self {
            Measure::FiniteWeights(w) => Some(w),
            _ => None,
        }
    }

    /// Checks the stored weight vector still sums to one.
    pub fn validate(&self) -> Result<()> {
        if let Measure::FiniteWeights(w) = self {
            if w.iter().any(|x| *x < 0.0) {
                return Err(Error::invalid("negative weight"));
            }
            let sum: f64 = w.iter().sum();
            if (sum - 1.0).abs() > 1e-12 {
                return Err(Error::invalid(format!("weights sum to {sum}, not 1")));
            }
        }
        Ok(())
    }
}

/// Shared-ownership scalar function of a coordinate vector.
pub type ScalarField = Arc<dyn Fn(&DVector<f64>) -> f64 + Send + Sync>;

/// Potential energy term of a continuous Hamiltonian.
#[derive(Clone)]
pub struct Potential {
    name: String,
    f: ScalarField,
}

impl Potential {
    pub fn new(
        name: impl Into<String>,
        f: impl Fn(&DVector<f64>) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Potential {
            name: name.into(),
            f: Arc::new(f),
        }
    }

    /// V(x) = |x|²/2 — isotropic harmonic well.
    pub fn harmonic() -> Self {
        Potential::new("harmonic", |x| 0.5 * x.norm_squared())
    }

    /// V(x) = -1/|x| — a single attractive Coulomb center at the origin.
    pub fn coulomb() -> Self {
        Potential::new("coulomb", |x| -1.0 / x.norm())
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn eval(&self, x: &DVector<f64>) -> f64 {
        (self.f)(x)
    }
}

impl fmt::Debug for Potential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Potential").field("name", &self.name).finish()
    }
}

/// A symmetric matrix on a finite space, or -(1/2)Δ + V on a continuous one.
/// The kinetic coefficient is fixed at 1/2 (atomic units).
#[derive(Clone, Debug)]
pub enum Hamiltonian {
    Matrix(DMatrix<f64>),
    Schrodinger { potential: Potential },
}

impl Hamiltonian {
    /// Wraps a dense matrix, rejecting asymmetry above [`SYMMETRY_TOL`].
    pub fn matrix(h: DMatrix<f64>) -> Result<Self> {
        if h.nrows() != h.ncols() {
            return Err(Error::DimensionMismatch("Hamiltonian must be square".into()));
        }
        let asym = max_asymmetry(&h);
        if asym > SYMMETRY_TOL {
            return Err(Error::invalid(format!(
                "Hamiltonian asymmetry {asym:.3e} exceeds {SYMMETRY_TOL:.0e}"
            )));
        }
        Ok(Hamiltonian::Matrix(h))
    }

    pub fn schrodinger(potential: Potential) -> Self {
        Hamiltonian::Schrodinger { potential }
    }

    pub fn as_matrix(&self) -> Option<&DMatrix<f64>> {
        match self {
            Hamiltonian::Matrix(h) => Some(h),
            _ => None,
        }
    }

    /// Path-graph Laplacian plus the linear on-site potential i/size — a
    /// small positive-semidefinite test system with a known dense spectrum.
    pub fn path_with_potential(size: usize) -> Result<Self> {
        if size < 2 {
            return Err(Error::invalid("path Hamiltonian needs size >= 2"));
        }
        let mut h = DMatrix::zeros(size, size);
        for i in 0..size {
            let degree = if i == 0 || i == size - 1 { 1.0 } else { 2.0 };
            h[(i, i)] = degree + i as f64 / size as f64;
            if i + 1 < size {
                h[(i, i + 1)] = -1.0;
                h[(i + 1, i)] = -1.0;
            }
        }
        Hamiltonian::matrix(h)
    }
}

pub(crate) fn max_asymmetry(h: &DMatrix<f64>) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..h.nrows() {
        for j in (i + 1)..h.ncols() {
            worst = worst.max((h[(i, j)] - h[(j, i)]).abs());
        }
    }
    worst
}

/// Weighted inner product Σ_x w(x) f(x) g(x) on a finite space. The full
/// vectors must be supplied; continuous spaces use [`inner_product_mc`].
pub fn inner_product(f: &DVector<f64>, g: &DVector<f64>, rho: &Measure) -> Result<f64> {
    let w = rho.weights().ok_or_else(|| {
        Error::invalid("inner_product needs explicit finite weights; use inner_product_mc for sample batches")
    })?;
    if f.len() != g.len() || f.len() != w.len() {
        return Err(Error::DimensionMismatch(format!(
            "inner_product lengths {} / {} / {}",
            f.len(),
            g.len(),
            w.len()
        )));
    }
    if f.iter().chain(g.iter()).any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("inner_product operand".into()));
    }
    let terms: Vec<f64> = (0..f.len()).map(|i| w[i] * f[i] * g[i]).collect();
    Ok(crate::reduce::pairwise_sum(&terms))
}

/// Monte Carlo estimate of ⟨f, g⟩_ρ from values cached on a batch drawn
/// from ρ: the sample mean of f·g.
pub fn inner_product_mc(f_vals: &[f64], g_vals: &[f64]) -> Result<f64> {
    if f_vals.len() != g_vals.len() {
        return Err(Error::DimensionMismatch(
            "inner_product_mc value lengths differ".into(),
        ));
    }
    if f_vals.is_empty() {
        return Err(Error::invalid("inner_product_mc needs a nonempty batch"));
    }
    if f_vals.iter().chain(g_vals.iter()).any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("inner_product_mc operand".into()));
    }
    let terms: Vec<f64> = f_vals.iter().zip(g_vals).map(|(a, b)| a * b).collect();
    Ok(crate::reduce::pairwise_mean(&terms))
}

/// Evaluates ψ_θ on every point of a finite space.
pub fn full_values(ansatz: &dyn Ansatz, theta: &Parameters, size: usize) -> Result<DVector<f64>> {
    let mut out = DVector::zeros(size);
    for i in 0..size {
        out[i] = ansatz.value(theta, &ConfigPoint::Finite(i))?;
    }
    Ok(out)
}

/// (Hψ_θ)(x): a matrix-vector row on finite spaces, -(1/2)Δψ + Vψ on
/// continuous ones. The continuous branch needs the ansatz to expose a
/// spatial Laplacian.
pub fn apply_hamiltonian(
    h: &Hamiltonian,
    ansatz: &dyn Ansatz,
    theta: &Parameters,
    x: &ConfigPoint,
) -> Result<f64> {
    match h {
        Hamiltonian::Matrix(m) => {
            let i = x.index()?;
            if i >= m.nrows() {
                return Err(Error::invalid(format!(
                    "index {i} out of range for {}x{} Hamiltonian",
                    m.nrows(),
                    m.ncols()
                )));
            }
            let psi = full_values(ansatz, theta, m.nrows())?;
            let terms: Vec<f64> = (0..m.ncols()).map(|j| m[(i, j)] * psi[j]).collect();
            Ok(crate::reduce::pairwise_sum(&terms))
        }
        Hamiltonian::Schrodinger { potential } => {
            let coords = x.coords()?;
            let lap = ansatz.laplacian_x(theta, x)?;
            let value = ansatz.value(theta, x)?;
            Ok(-0.5 * lap + potential.eval(coords) * value)
        }
    }
}

/// Minimal eigenvalue and unit eigenvector of a symmetric matrix, with the
/// sign fixed so the first nonzero component is positive. The residual
/// ‖Hv - λv‖_∞ is checked rather than trusted.
pub fn ground_truth_spectrum(h: &DMatrix<f64>) -> Result<(f64, DVector<f64>)> {
    if h.nrows() != h.ncols() {
        return Err(Error::DimensionMismatch("spectrum of a nonsquare matrix".into()));
    }
    if h.nrows() > MAX_DENSE_EIGEN {
        return Err(Error::invalid(format!(
            "dense eigensolve limited to size {MAX_DENSE_EIGEN}, got {}",
            h.nrows()
        )));
    }
    if max_asymmetry(h) > SYMMETRY_TOL {
        return Err(Error::invalid("spectrum of an asymmetric matrix"));
    }
    let eigen = h.clone().symmetric_eigen();
    let (idx, &e0) = eigen
        .eigenvalues
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.partial_cmp(b.1).expect("non-finite eigenvalue"))
        .ok_or_else(|| Error::Eigensolver("empty spectrum".into()))?;
    let mut v = eigen.eigenvectors.column(idx).clone_owned();
    v /= v.norm();
    if let Some(first) = v.iter().find(|c| c.abs() > 1e-12) {
        if *first < 0.0 {
            v = -v;
        }
    }
    let residual = (h * &v - e0 * &v).amax();
    if residual > EIGEN_RESIDUAL_TOL {
        return Err(Error::Eigensolver(format!(
            "residual {residual:.3e} exceeds {EIGEN_RESIDUAL_TOL:.0e}"
        )));
    }
    Ok((e0, v))
}
