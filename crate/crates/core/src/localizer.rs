//! Spectral matching: find couplings `h` over a string basis whose
//! Hamiltonian has (approximately) a prescribed spectrum.
//!
//! The cost pairs sorted target and trial eigenvalues by rank,
//! `C = sum_i (E_i - e_i)^2 / 2^(N+1)`, and is minimized with BFGS. Bases
//! made only of `Z` strings skip diagonalization entirely: the trial
//! spectrum is the list of classical energies over all `2^N` bit strings.

use std::fmt;
use std::io::Write;
use std::time::Instant;

use faer::Mat;
use num_complex::Complex;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::optimize::{self, BfgsOptions, Objective, Termination};
use crate::pauli::{materialize_into, BasisFlavor, StringBasis, DENSE_QUBIT_CAP};
use crate::scalar::{Entry, Real};
use crate::spectra::{self, Spectrum};

/// Largest qubit count handled by the diagonal (Z-only) path.
pub const DIAGONAL_QUBIT_CAP: u32 = 24;

/// Stream id used for random initial points.
const INIT_STREAM: u64 = 0x696e_6974;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", bound(deserialize = "T: Real"))]
pub enum Variant<T: Real> {
    Plain,
    /// `J = sum_r v_r v_r^T` with the diagonal zeroed, over `Z_i Z_j` pairs.
    LowRank { rank: usize },
    /// Adds `lambda * sum sqrt(h^2 + eps^2)` to the cost.
    Sparse { lambda: T },
}

impl<T: Real> fmt::Display for Variant<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Variant::Plain => write!(f, "plain"),
            Variant::LowRank { rank } => write!(f, "low_rank({rank})"),
            Variant::Sparse { lambda } => write!(f, "sparse({lambda:e})"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Real"))]
pub struct Settings<T: Real> {
    /// Defaults to ten times the number of optimized parameters.
    pub max_iterations: Option<usize>,
    pub gradient_tolerance: T,
    /// Smoothing of the absolute value in the sparse variant.
    pub l1_epsilon: T,
    /// Diagonalize even when the basis is diagonal.
    pub force_dense: bool,
}

impl<T: Real> Default for Settings<T> {
    fn default() -> Self {
        Self { max_iterations: None, gradient_tolerance: T::of(1e-10), l1_epsilon: T::of(1e-8), force_dense: false }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Init<T> {
    /// Gaussian couplings rescaled so that `sum h^2` equals the target's
    /// mean squared eigenvalue.
    RandomScaled,
    /// Explicit optimizer parameters (couplings, or the flattened
    /// `rank x N` factor matrix for the low-rank variant).
    Given(Vec<T>),
}

#[derive(Clone, Debug)]
pub struct LocalizationProblem<T: Real> {
    /// Target with its mean removed: every basis string is traceless, so a
    /// constant offset can never be matched and only shifts the energy.
    pub target: Spectrum<T>,
    /// Mean of the target as supplied.
    pub target_shift: T,
    pub basis: StringBasis,
    pub variant: Variant<T>,
    pub settings: Settings<T>,
}

impl<T: Real> LocalizationProblem<T> {
    pub fn new(target: Spectrum<T>, basis: StringBasis) -> Result<Self> {
        let target_shift = target.mean();
        let p = Self {
            target: target.shifted(-target_shift),
            target_shift,
            basis,
            variant: Variant::Plain,
            settings: Settings::default(),
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_variant(mut self, variant: Variant<T>) -> Result<Self> {
        self.variant = variant;
        self.validate()?;
        Ok(self)
    }

    pub fn with_settings(mut self, settings: Settings<T>) -> Self {
        self.settings = settings;
        self
    }

    pub fn n_qubits(&self) -> u32 {
        self.basis.n_qubits()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.basis.n_qubits();
        if self.target.n_qubits() != n {
            return Err(Error::QubitMismatch { left: self.target.n_qubits(), right: n });
        }
        if self.basis.is_empty() {
            return Err(Error::InvalidBasis("empty basis".into()));
        }
        let diagonal = self.basis.is_diagonal() && !self.settings.force_dense;
        let cap = if diagonal { DIAGONAL_QUBIT_CAP } else { DENSE_QUBIT_CAP };
        if n > cap {
            return Err(Error::QubitsOutOfRange { n, min: 1, max: cap });
        }
        match self.variant {
            Variant::Plain => {}
            Variant::LowRank { rank } => {
                if rank == 0 || rank > n as usize {
                    return Err(Error::InvalidArgument(format!("rank {rank} outside [1, {n}]")));
                }
                if self.basis.flavor() != BasisFlavor::ZOnly2Local {
                    return Err(Error::InvalidArgument("low-rank variant needs the z_only_2local basis".into()));
                }
            }
            Variant::Sparse { lambda } => {
                if !(lambda >= T::zero()) || !lambda.is_finite() {
                    return Err(Error::InvalidArgument(format!("lambda must be >= 0, got {lambda}")));
                }
            }
        }
        if !(self.settings.gradient_tolerance > T::zero()) {
            return Err(Error::InvalidArgument("gradient_tolerance must be positive".into()));
        }
        if !(self.settings.l1_epsilon > T::zero()) {
            return Err(Error::InvalidArgument("l1_epsilon must be positive".into()));
        }
        Ok(())
    }

    /// Number of optimizer parameters.
    pub fn parameter_count(&self) -> usize {
        match self.variant {
            Variant::LowRank { rank } => rank * self.n_qubits() as usize,
            _ => self.basis.len(),
        }
    }

    /// Maps optimizer parameters to couplings over `basis`.
    pub fn couplings_from_parameters(&self, params: &[T]) -> Result<Vec<T>> {
        match self.variant {
            Variant::LowRank { rank } => {
                Ok(CouplingMatrixJ::from_factors(self.n_qubits(), rank, params)?.to_pairs())
            }
            _ => Ok(params.to_vec()),
        }
    }
}

fn check_sorted<T: Real>(v: &[T]) -> bool {
    v.windows(2).all(|w| w[0] <= w[1])
}

fn paired_cost<T: Real>(target: &[T], trial: &[T]) -> T {
    let d = target.len();
    let ss: T = target.iter().zip(trial).map(|(&a, &b)| (a - b) * (a - b)).sum();
    ss / (T::of(2.0) * T::of_usize(d))
}

/// `sum_i (E_i - e_i)^2 / 2^(N+1)` over rank-paired ascending spectra.
pub fn cost<T: Real>(target: &Spectrum<T>, trial: &Spectrum<T>) -> Result<T> {
    if target.dimension() != trial.dimension() {
        return Err(Error::DimensionMismatch { expected: target.dimension(), got: trial.dimension() });
    }
    Ok(paired_cost(target.values(), trial.values()))
}

/// Same as [`cost`] for raw slices; both must be sorted ascending.
pub fn cost_of_values<T: Real>(target: &[T], trial: &[T]) -> Result<T> {
    if target.len() != trial.len() {
        return Err(Error::DimensionMismatch { expected: target.len(), got: trial.len() });
    }
    if !check_sorted(target) || !check_sorted(trial) {
        return Err(Error::InvalidArgument("spectra must be sorted ascending".into()));
    }
    Ok(paired_cost(target, trial))
}

#[inline]
fn z_sign(b: usize, z: u64) -> bool {
    (b as u64 & z).count_ones() & 1 == 1
}

/// Classical energies `sum_tau h_tau <b|tau|b>` of a diagonal basis, indexed
/// by computational basis state `b`.
pub fn diagonal_energies<T: Real>(basis: &StringBasis, h: &[T]) -> Result<Vec<T>> {
    if !basis.is_diagonal() {
        return Err(Error::InvalidBasis("basis has off-diagonal strings".into()));
    }
    if h.len() != basis.len() {
        return Err(Error::DimensionMismatch { expected: basis.len(), got: h.len() });
    }
    if basis.n_qubits() > DIAGONAL_QUBIT_CAP {
        return Err(Error::QubitsOutOfRange { n: basis.n_qubits(), min: 1, max: DIAGONAL_QUBIT_CAP });
    }
    let masks: Vec<u64> = basis.strings().iter().map(|s| s.z_mask()).collect();
    Ok((0..basis.dimension())
        .map(|b| {
            masks.iter().zip(h).fold(T::zero(), |acc, (&z, &hz)| if z_sign(b, z) { acc - hz } else { acc + hz })
        })
        .collect())
}

/// Spectrum of `sum h_tau tau`, without diagonalization for diagonal bases
/// unless `force_dense` is set.
pub fn trial_spectrum<T: Real>(basis: &StringBasis, h: &[T], force_dense: bool) -> Result<Spectrum<T>> {
    if basis.is_diagonal() && !force_dense {
        return Spectrum::new(basis.n_qubits(), diagonal_energies(basis, h)?);
    }
    if basis.is_real() {
        dense_spectrum::<T, T>(basis, h)
    } else {
        dense_spectrum::<T, Complex<T>>(basis, h)
    }
}

fn dense_spectrum<T: Real, E: Entry<T>>(basis: &StringBasis, h: &[T]) -> Result<Spectrum<T>> {
    if basis.n_qubits() > DENSE_QUBIT_CAP {
        return Err(Error::QubitsOutOfRange { n: basis.n_qubits(), min: 1, max: DENSE_QUBIT_CAP });
    }
    let d = basis.dimension();
    let mut m = Mat::<E>::zeros(d, d);
    materialize_into(basis, h, m.as_mut())?;
    Spectrum::new(basis.n_qubits(), linalg::eigvalsh::<T, E>(m.as_ref())?)
}

fn check_finite<T: Real>(x: &[T]) -> Result<()> {
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("couplings"));
    }
    Ok(())
}

/// Cost evaluated through a dense eigendecomposition.
struct DenseCost<T: Real, E: Entry<T>> {
    basis: StringBasis,
    target: Vec<T>,
    work: Mat<E>,
}

impl<T: Real, E: Entry<T>> DenseCost<T, E> {
    fn new(basis: &StringBasis, target: &Spectrum<T>) -> Self {
        let d = basis.dimension();
        Self { basis: basis.clone(), target: target.values().to_vec(), work: Mat::zeros(d, d) }
    }
}

impl<T: Real, E: Entry<T>> Objective<T> for DenseCost<T, E> {
    fn dim(&self) -> usize {
        self.basis.len()
    }

    fn evaluate(&mut self, h: &[T], grad: &mut [T]) -> Result<T> {
        check_finite(h)?;
        materialize_into(&self.basis, h, self.work.as_mut())?;
        let e = linalg::eigh::<T, E>(self.work.as_ref())?;
        // dC/dh_tau = (1/2^N) sum_n (e_n - E_n) <n|tau|n>; working with the
        // residual avoids cancelling h_tau against a nearly equal sum.
        let r: Vec<T> = e.values.iter().zip(&self.target).map(|(&a, &b)| a - b).collect();
        let g = linalg::weighted_diagonal_traces::<T, E>(e.vectors.as_ref(), &r, &self.basis)?;
        grad.copy_from_slice(&g);
        Ok(paired_cost(&self.target, &e.values))
    }
}

/// Cost over a diagonal basis via classical energies.
struct DiagonalCost<T> {
    n_qubits: u32,
    masks: Vec<u64>,
    target: Vec<T>,
    energies: Vec<T>,
    order: Vec<usize>,
}

impl<T: Real> DiagonalCost<T> {
    fn new(basis: &StringBasis, target: &Spectrum<T>) -> Self {
        let d = basis.dimension();
        Self {
            n_qubits: basis.n_qubits(),
            masks: basis.strings().iter().map(|s| s.z_mask()).collect(),
            target: target.values().to_vec(),
            energies: vec![T::zero(); d],
            order: (0..d).collect(),
        }
    }
}

impl<T: Real> Objective<T> for DiagonalCost<T> {
    fn dim(&self) -> usize {
        self.masks.len()
    }

    fn evaluate(&mut self, h: &[T], grad: &mut [T]) -> Result<T> {
        check_finite(h)?;
        let d = 1usize << self.n_qubits;
        for (b, e) in self.energies.iter_mut().enumerate() {
            *e = self.masks.iter().zip(h).fold(T::zero(), |acc, (&z, &hz)| if z_sign(b, z) { acc - hz } else { acc + hz });
        }
        for (i, o) in self.order.iter_mut().enumerate() {
            *o = i;
        }
        let energies = &self.energies;
        // Stable sort: ties keep basis-state order.
        self.order.sort_by(|&a, &b| energies[a].partial_cmp(&energies[b]).unwrap());
        let inv_d = T::one() / T::of_usize(d);
        grad.iter_mut().for_each(|g| *g = T::zero());
        let mut ss = T::zero();
        for (k, &b) in self.order.iter().enumerate() {
            let r = energies[b] - self.target[k];
            ss += r * r;
            for (g, &z) in grad.iter_mut().zip(&self.masks) {
                if z_sign(b, z) {
                    *g -= r;
                } else {
                    *g += r;
                }
            }
        }
        grad.iter_mut().for_each(|g| *g *= inv_d);
        Ok(ss * inv_d / T::of(2.0))
    }
}

/// Low-rank parametrization of the Z-only pair couplings.
struct LowRankCost<T> {
    n: usize,
    rank: usize,
    inner: DiagonalCost<T>,
    pair_grad: Vec<T>,
}

impl<T: Real> Objective<T> for LowRankCost<T> {
    fn dim(&self) -> usize {
        self.rank * self.n
    }

    fn evaluate(&mut self, v: &[T], grad: &mut [T]) -> Result<T> {
        check_finite(v)?;
        let h = CouplingMatrixJ::from_factors(self.n as u32, self.rank, v)?.to_pairs();
        let c = self.inner.evaluate(&h, &mut self.pair_grad)?;
        // dC/dv_{r,c} = sum_{b != c} G_cb v_{r,b}
        let n = self.n;
        let mut gmat = vec![T::zero(); n * n];
        let mut k = 0;
        for i in 0..n {
            for j in i + 1..n {
                gmat[i * n + j] = self.pair_grad[k];
                gmat[j * n + i] = self.pair_grad[k];
                k += 1;
            }
        }
        for r in 0..self.rank {
            let vr = &v[r * n..(r + 1) * n];
            for c in 0..n {
                grad[r * n + c] = (0..n).map(|b| gmat[c * n + b] * vr[b]).sum();
            }
        }
        Ok(c)
    }
}

/// Adds the smoothed L1 penalty to an inner objective over couplings.
struct Penalized<'a, T> {
    inner: Box<dyn Objective<T> + 'a>,
    lambda: T,
    epsilon: T,
}

impl<T: Real> Objective<T> for Penalized<'_, T> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn evaluate(&mut self, h: &[T], grad: &mut [T]) -> Result<T> {
        let c = self.inner.evaluate(h, grad)?;
        let eps2 = self.epsilon * self.epsilon;
        let mut pen = T::zero();
        for (g, &x) in grad.iter_mut().zip(h) {
            let a = (x * x + eps2).sqrt();
            pen += a;
            *g += self.lambda * x / a;
        }
        Ok(c + self.lambda * pen)
    }
}

/// Objective for the bare spectral cost over couplings (no penalty).
fn coupling_objective<'a, T: Real>(problem: &'a LocalizationProblem<T>) -> Box<dyn Objective<T> + 'a> {
    let basis = &problem.basis;
    if basis.is_diagonal() && !problem.settings.force_dense {
        Box::new(DiagonalCost::new(basis, &problem.target))
    } else if basis.is_real() {
        Box::new(DenseCost::<T, T>::new(basis, &problem.target))
    } else {
        Box::new(DenseCost::<T, Complex<T>>::new(basis, &problem.target))
    }
}

fn build_objective<'a, T: Real>(problem: &'a LocalizationProblem<T>) -> Box<dyn Objective<T> + 'a> {
    match problem.variant {
        Variant::Plain => coupling_objective(problem),
        Variant::LowRank { rank } => {
            let n = problem.n_qubits() as usize;
            Box::new(LowRankCost {
                n,
                rank,
                inner: DiagonalCost::new(&problem.basis, &problem.target),
                pair_grad: vec![T::zero(); problem.basis.len()],
            })
        }
        Variant::Sparse { lambda } => Box::new(Penalized {
            inner: coupling_objective(problem),
            lambda,
            epsilon: problem.settings.l1_epsilon,
        }),
    }
}

/// Plain-variant cost and gradient at couplings `h`.
pub fn cost_and_gradient<T: Real>(h: &[T], problem: &LocalizationProblem<T>) -> Result<(T, Vec<T>)> {
    if problem.variant != Variant::Plain {
        return Err(Error::InvalidArgument("cost_and_gradient expects the plain variant".into()));
    }
    objective_and_gradient(h, problem)
}

/// Optimized objective (including any penalty) and its gradient with
/// respect to the optimizer parameters.
pub fn objective_and_gradient<T: Real>(params: &[T], problem: &LocalizationProblem<T>) -> Result<(T, Vec<T>)> {
    problem.validate()?;
    let mut obj = build_objective(problem);
    if params.len() != obj.dim() {
        return Err(Error::DimensionMismatch { expected: obj.dim(), got: params.len() });
    }
    let mut g = vec![T::zero(); params.len()];
    let c = obj.evaluate(params, &mut g)?;
    Ok((c, g))
}

/// Gaussian vector rescaled so that its squared norm is `norm_sqr`.
pub fn random_scaled<T: Real>(len: usize, norm_sqr: T, rng: &mut ChaCha8Rng) -> Vec<T> {
    let raw: Vec<f64> = (0..len).map(|_| rng.sample(StandardNormal)).collect();
    let current: f64 = raw.iter().map(|v| v * v).sum();
    let s = if current > 0.0 { (norm_sqr.as_f64() / current).sqrt() } else { 0.0 };
    raw.into_iter().map(|v| T::of(v * s)).collect()
}

/// Random starting parameters for `problem` drawn from `seed`.
pub fn initial_parameters<T: Real>(problem: &LocalizationProblem<T>, seed: u64) -> Result<Vec<T>> {
    let mut rng = spectra::stream_rng(seed, INIT_STREAM);
    let target_sq = problem.target.mean_square();
    match problem.variant {
        Variant::LowRank { rank } => {
            let n = problem.n_qubits();
            let v: Vec<T> = random_scaled(rank * n as usize, T::one(), &mut rng);
            let h = CouplingMatrixJ::from_factors(n, rank, &v)?.to_pairs();
            let current: T = h.iter().map(|&x| x * x).sum();
            if !(current > T::zero()) {
                return Ok(v);
            }
            // J is quadratic in v, so sum h^2 scales with the fourth power.
            let s = (target_sq / current).sqrt().sqrt();
            Ok(v.into_iter().map(|x| x * s).collect())
        }
        _ => Ok(random_scaled(problem.basis.len(), target_sq, &mut rng)),
    }
}

/// `sum h^4 / (sum h^2)^2`; 1 for a single nonzero entry, `1/m` when flat.
pub fn sparsity<T: Real>(h: &[T]) -> T {
    let s2: T = h.iter().map(|&x| x * x).sum();
    if s2 == T::zero() {
        return T::zero();
    }
    let s4: T = h.iter().map(|&x| x * x * x * x).sum();
    s4 / (s2 * s2)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Real"))]
pub struct LocalizationResult<T: Real> {
    pub version: String,
    pub n_qubits: u32,
    pub basis: StringBasis,
    pub variant: Variant<T>,
    pub settings: Settings<T>,
    pub seed: Option<u64>,
    /// Mean removed from the target before fitting.
    pub target_shift: T,
    /// Optimizer parameters: couplings, or the `rank x N` factor matrix
    /// (row-major) for the low-rank variant.
    pub parameters: Vec<T>,
    /// Couplings over `basis`, in basis order.
    pub couplings: Vec<T>,
    /// Bare spectral cost.
    pub final_cost: T,
    /// Minimized objective; equals `final_cost` except for the sparse variant.
    pub objective: T,
    pub sparsity: T,
    pub cost_history: Vec<T>,
    pub gradient_norm: T,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
    pub termination: Termination,
    pub wall_seconds: f64,
}

impl<T: Real> LocalizationResult<T> {
    pub fn hamiltonian(&self) -> Result<crate::pauli::LocalHamiltonian<T>> {
        crate::pauli::LocalHamiltonian::new(self.basis.clone(), self.couplings.clone())
    }

    pub fn coupling_matrix(&self) -> Result<CouplingMatrixJ<T>> {
        if self.basis.flavor() != BasisFlavor::ZOnly2Local {
            return Err(Error::InvalidArgument("coupling matrix needs a z_only_2local result".into()));
        }
        CouplingMatrixJ::from_pairs(self.n_qubits, &self.couplings)
    }
}

/// Runs BFGS on `problem`. With [`Init::RandomScaled`] the starting point
/// is drawn from `seed`.
pub fn localize<T: Real>(problem: &LocalizationProblem<T>, init: Init<T>, seed: Option<u64>) -> Result<LocalizationResult<T>> {
    problem.validate()?;
    let start = Instant::now();
    let x0 = match init {
        Init::Given(x) => {
            if x.len() != problem.parameter_count() {
                return Err(Error::DimensionMismatch { expected: problem.parameter_count(), got: x.len() });
            }
            x
        }
        Init::RandomScaled => initial_parameters(problem, seed.unwrap_or(0))?,
    };
    let opts = BfgsOptions {
        max_iterations: problem.settings.max_iterations.unwrap_or(10 * problem.parameter_count()),
        gradient_tolerance: problem.settings.gradient_tolerance,
        ..BfgsOptions::default()
    };
    let mut obj = build_objective(problem);
    let out = optimize::minimize(obj.as_mut(), x0, &opts)?;
    drop(obj);
    let couplings = problem.couplings_from_parameters(&out.x)?;
    let final_cost = match problem.variant {
        Variant::Sparse { .. } => {
            let mut bare = coupling_objective(problem);
            let mut g = vec![T::zero(); couplings.len()];
            bare.evaluate(&couplings, &mut g)?
        }
        _ => out.value,
    };
    let result = LocalizationResult {
        version: crate::VERSION.to_string(),
        n_qubits: problem.n_qubits(),
        basis: problem.basis.clone(),
        variant: problem.variant.clone(),
        settings: problem.settings.clone(),
        seed,
        target_shift: problem.target_shift,
        sparsity: sparsity(&couplings),
        parameters: out.x,
        couplings,
        final_cost,
        objective: out.value,
        cost_history: out.history,
        gradient_norm: out.gradient_norm,
        iterations: out.iterations,
        evaluations: out.evaluations,
        converged: out.termination == Termination::GradientTolerance,
        termination: out.termination,
        wall_seconds: start.elapsed().as_secs_f64(),
    };
    log::debug!(
        "localize n={} basis={} variant={} cost={:e} iters={} {:?}",
        result.n_qubits,
        result.basis.flavor(),
        result.variant,
        result.final_cost,
        result.iterations,
        result.termination
    );
    Ok(result)
}

/// Z-only pair localization through the diagonal fast path.
pub fn localize_diagonal<T: Real>(
    target: &Spectrum<T>,
    j0: Option<&CouplingMatrixJ<T>>,
    settings: Settings<T>,
    seed: Option<u64>,
) -> Result<LocalizationResult<T>> {
    let basis = StringBasis::enumerate(target.n_qubits(), BasisFlavor::ZOnly2Local)?;
    let problem = LocalizationProblem::new(target.clone(), basis)?.with_settings(Settings { force_dense: false, ..settings });
    let init = match j0 {
        Some(j) => {
            if j.n_qubits() != target.n_qubits() {
                return Err(Error::QubitMismatch { left: target.n_qubits(), right: j.n_qubits() });
            }
            Init::Given(j.to_pairs())
        }
        None => Init::RandomScaled,
    };
    localize(&problem, init, seed)
}

pub fn localize_low_rank<T: Real>(
    target: &Spectrum<T>,
    rank: usize,
    seed: Option<u64>,
    settings: Settings<T>,
) -> Result<LocalizationResult<T>> {
    let basis = StringBasis::enumerate(target.n_qubits(), BasisFlavor::ZOnly2Local)?;
    let problem = LocalizationProblem::new(target.clone(), basis)?
        .with_variant(Variant::LowRank { rank })?
        .with_settings(settings);
    localize(&problem, Init::RandomScaled, seed)
}

pub fn localize_sparse<T: Real>(
    target: &Spectrum<T>,
    basis: StringBasis,
    lambda: T,
    epsilon: T,
    seed: Option<u64>,
    settings: Settings<T>,
) -> Result<LocalizationResult<T>> {
    let problem = LocalizationProblem::new(target.clone(), basis)?
        .with_settings(Settings { l1_epsilon: epsilon, ..settings })
        .with_variant(Variant::Sparse { lambda })?;
    localize(&problem, Init::RandomScaled, seed)
}

/// Symmetric, zero-diagonal coupling matrix of `H = sum_{i<j} J_ij Z_i Z_j`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Real"))]
pub struct CouplingMatrixJ<T: Real> {
    n_qubits: u32,
    /// Row-major `N x N`.
    values: Vec<T>,
}

impl<T: Real> CouplingMatrixJ<T> {
    pub fn new(n_qubits: u32, values: Vec<T>) -> Result<Self> {
        let n = n_qubits as usize;
        if values.len() != n * n {
            return Err(Error::DimensionMismatch { expected: n * n, got: values.len() });
        }
        for i in 0..n {
            if values[i * n + i] != T::zero() {
                return Err(Error::InvalidArgument("J must have a zero diagonal".into()));
            }
            for j in 0..i {
                if values[i * n + j] != values[j * n + i] {
                    return Err(Error::InvalidArgument("J must be symmetric".into()));
                }
            }
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("J"));
        }
        Ok(Self { n_qubits, values })
    }

    /// From pair couplings in `z_only_2local` order `(0,1), (0,2), ..`.
    pub fn from_pairs(n_qubits: u32, h: &[T]) -> Result<Self> {
        let n = n_qubits as usize;
        if h.len() != n * n.saturating_sub(1) / 2 {
            return Err(Error::DimensionMismatch { expected: n * n.saturating_sub(1) / 2, got: h.len() });
        }
        let mut values = vec![T::zero(); n * n];
        let mut k = 0;
        for i in 0..n {
            for j in i + 1..n {
                values[i * n + j] = h[k];
                values[j * n + i] = h[k];
                k += 1;
            }
        }
        Self::new(n_qubits, values)
    }

    /// `sum_r v_r v_r^T` with the diagonal zeroed; `factors` is row-major
    /// `rank x N`.
    pub fn from_factors(n_qubits: u32, rank: usize, factors: &[T]) -> Result<Self> {
        let n = n_qubits as usize;
        if factors.len() != rank * n {
            return Err(Error::DimensionMismatch { expected: rank * n, got: factors.len() });
        }
        let mut values = vec![T::zero(); n * n];
        for r in 0..rank {
            let v = &factors[r * n..(r + 1) * n];
            for i in 0..n {
                for j in i + 1..n {
                    let x = v[i] * v[j];
                    values[i * n + j] += x;
                    values[j * n + i] += x;
                }
            }
        }
        Self::new(n_qubits, values)
    }

    /// Random symmetric Gaussian couplings (standard normal above the diagonal).
    pub fn random(n_qubits: u32, rng: &mut ChaCha8Rng) -> Result<Self> {
        let n = n_qubits as usize;
        let h: Vec<T> = (0..n * n.saturating_sub(1) / 2).map(|_| T::of(rng.sample(StandardNormal))).collect();
        Self::from_pairs(n_qubits, &h)
    }

    pub fn n_qubits(&self) -> u32 {
        self.n_qubits
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.values[i * self.n_qubits as usize + j]
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn to_pairs(&self) -> Vec<T> {
        let n = self.n_qubits as usize;
        let mut h = Vec::with_capacity(n * n.saturating_sub(1) / 2);
        for i in 0..n {
            for j in i + 1..n {
                h.push(self.values[i * n + j]);
            }
        }
        h
    }

    pub fn scaled(&self, c: T) -> Self {
        Self { n_qubits: self.n_qubits, values: self.values.iter().map(|&v| v * c).collect() }
    }

    pub fn to_mat(&self) -> Mat<T> {
        let n = self.n_qubits as usize;
        Mat::from_fn(n, n, |i, j| self.values[i * n + j])
    }

    /// `N` rows of comma-separated entries.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let n = self.n_qubits as usize;
        for i in 0..n {
            let row: Vec<String> = (0..n).map(|j| format!("{:e}", self.values[i * n + j])).collect();
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}
