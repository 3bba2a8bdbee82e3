//! Curvature of the spectral cost at a minimum.
//!
//! At a zero-cost minimum the Hessian reduces to the metric
//! `g = Q^T Q / 2^N` with `Q[n, tau] = <n|tau|n>` over the eigenbasis of
//! `H'`. Its eigenvectors define operators `O_k = sum_tau v^k_tau tau`.

use std::io::Write;

use faer::linalg::matmul::matmul;
use faer::{Accum, Mat, Par};
use num_complex::Complex;

use crate::error::{Error, Result};
use crate::linalg;
use crate::localizer::{diagonal_energies, CouplingMatrixJ};
use crate::pauli::{BasisFlavor, LocalHamiltonian, StringBasis};
use crate::scalar::{Entry, Real};
use crate::spectra::Spectrum;

/// Gradient norm above which the metric is reported as taken away from a
/// minimum.
pub const MINIMUM_GRADIENT_WARN: f64 = 1e-6;

/// Eigenbasis data of a local Hamiltonian, levels sorted ascending.
#[derive(Clone, Debug)]
pub struct Eigenbasis<T> {
    pub energies: Vec<T>,
    /// `q[(n, tau)] = <n|tau|n>`, rows in energy order.
    pub q: Mat<T>,
}

impl<T: Real> Eigenbasis<T> {
    /// Diagonal bases use computational states directly, so degenerate
    /// levels keep the `+-1` expectation pattern.
    pub fn of(h: &LocalHamiltonian<T>) -> Result<Self> {
        let basis = h.basis();
        let d = basis.dimension();
        if basis.is_diagonal() {
            let e = diagonal_energies(basis, h.couplings())?;
            let mut order: Vec<usize> = (0..d).collect();
            order.sort_by(|&a, &b| e[a].partial_cmp(&e[b]).unwrap());
            let q = Mat::from_fn(d, basis.len(), |n, t| {
                let z = basis.strings()[t].z_mask();
                if (order[n] as u64 & z).count_ones() & 1 == 1 {
                    -T::one()
                } else {
                    T::one()
                }
            });
            return Ok(Self { energies: order.iter().map(|&b| e[b]).collect(), q });
        }
        if basis.is_real() {
            Self::dense::<T>(h)
        } else {
            Self::dense::<Complex<T>>(h)
        }
    }

    fn dense<E: Entry<T>>(h: &LocalHamiltonian<T>) -> Result<Self> {
        let m = h.materialize::<E>()?;
        let eig = linalg::eigh::<T, E>(m.as_ref())?;
        let q = linalg::diagonal_expectations::<T, E>(eig.vectors.as_ref(), h.basis())?;
        Ok(Self { energies: eig.values, q })
    }

    pub fn dimension(&self) -> usize {
        self.energies.len()
    }

    /// `Tr(F tau) / 2^N` for `F = sum_n f_n |n><n|`.
    pub fn string_overlaps(&self, f: &[T]) -> Vec<T> {
        let d = T::of_usize(self.dimension());
        (0..self.q.ncols()).map(|t| (0..self.q.nrows()).map(|n| f[n] * self.q[(n, t)]).sum::<T>() / d).collect()
    }
}

#[derive(Clone, Debug)]
pub struct MetricMatrix<T> {
    pub basis: StringBasis,
    pub g: Mat<T>,
    /// Descending.
    pub eigenvalues: Vec<T>,
    /// Column `k` pairs with `eigenvalues[k]`.
    pub eigenvectors: Mat<T>,
    pub eigenbasis: Eigenbasis<T>,
    /// Gradient norm of the cost at the supplied couplings.
    pub gradient_norm: T,
}

impl<T: Real> MetricMatrix<T> {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    /// `max |g - 1|`
    pub fn identity_deviation(&self) -> T {
        let m = self.g.nrows();
        let mut dev = T::zero();
        for i in 0..m {
            for j in 0..m {
                let id = if i == j { T::one() } else { T::zero() };
                dev = dev.max((self.g[(i, j)] - id).abs());
            }
        }
        dev
    }

    pub fn apply(&self, x: &[T]) -> Vec<T> {
        let m = self.g.nrows();
        (0..m).map(|i| (0..m).map(|j| self.g[(i, j)] * x[j]).sum()).collect()
    }

    pub fn eigenvector(&self, k: usize) -> Vec<T> {
        self.eigenvectors.col_as_slice(k).to_vec()
    }

    pub fn write_spectrum_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "k,lambda")?;
        for (k, l) in self.eigenvalues.iter().enumerate() {
            writeln!(w, "{},{:e}", k + 1, l.as_f64())?;
        }
        Ok(())
    }
}

/// Metric at couplings `h0`, which should minimize the cost for `target`.
pub fn metric_at_minimum<T: Real>(h0: &LocalHamiltonian<T>, target: &Spectrum<T>) -> Result<MetricMatrix<T>> {
    if target.n_qubits() != h0.n_qubits() {
        return Err(Error::QubitMismatch { left: h0.n_qubits(), right: target.n_qubits() });
    }
    let eb = Eigenbasis::of(h0)?;
    let d = eb.dimension();
    let centered = target.traceless();
    let r: Vec<T> = eb.energies.iter().zip(centered.values()).map(|(&a, &b)| a - b).collect();
    let gradient_norm = eb.string_overlaps(&r).iter().fold(T::zero(), |m, g| m.max(g.abs()));
    if gradient_norm.as_f64() > MINIMUM_GRADIENT_WARN {
        log::warn!("metric taken at a non-stationary point (|grad| = {:e})", gradient_norm.as_f64());
    }
    let m = eb.q.ncols();
    let mut g = Mat::<T>::zeros(m, m);
    matmul(g.as_mut(), Accum::Replace, eb.q.transpose(), eb.q.as_ref(), T::one() / T::of_usize(d), Par::Seq);
    for i in 0..m {
        for j in 0..i {
            let s = (g[(i, j)] + g[(j, i)]) * T::of(0.5);
            g[(i, j)] = s;
            g[(j, i)] = s;
        }
    }
    let eig = linalg::eigh::<T, T>(g.as_ref())?;
    let eigenvalues: Vec<T> = eig.values.iter().rev().copied().collect();
    let eigenvectors = Mat::from_fn(m, m, |i, k| eig.vectors[(i, m - 1 - k)]);
    Ok(MetricMatrix { basis: h0.basis().clone(), g, eigenvalues, eigenvectors, eigenbasis: eb, gradient_norm })
}

#[derive(Clone, Debug, PartialEq)]
pub struct EigenOperator<T> {
    /// 1-based rank among the metric eigenvalues.
    pub k: usize,
    pub lambda: T,
    pub coefficients: Vec<T>,
    pub energies: Vec<T>,
    /// `<n|O_k|n>` in energy order.
    pub expectations: Vec<T>,
}

impl<T: Real> EigenOperator<T> {
    /// Standard deviation about a least-squares polynomial in the energy.
    pub fn fit_residual(&self, degree: usize) -> Result<T> {
        poly_fit_residual(&self.energies, &self.expectations, degree)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "n,energy,expectation")?;
        for (n, (e, x)) in self.energies.iter().zip(&self.expectations).enumerate() {
            writeln!(w, "{},{:e},{:e}", n, e.as_f64(), x.as_f64())?;
        }
        Ok(())
    }
}

/// The `how_many` leading eigenoperators. Signs follow `h0` when the
/// overlap is appreciable, otherwise the largest coefficient is positive.
pub fn eigen_operators<T: Real>(
    metric: &MetricMatrix<T>,
    h0: &LocalHamiltonian<T>,
    how_many: usize,
) -> Result<Vec<EigenOperator<T>>> {
    if how_many > metric.len() {
        return Err(Error::InvalidArgument(format!("asked for {} operators out of {}", how_many, metric.len())));
    }
    if h0.basis() != &metric.basis {
        return Err(Error::InvalidBasis("h0 and metric use different bases".into()));
    }
    let hn = h0.norm_sqr().sqrt();
    let eb = &metric.eigenbasis;
    let mut out = Vec::with_capacity(how_many);
    for k in 0..how_many {
        let mut v = metric.eigenvector(k);
        let overlap: T = v.iter().zip(h0.couplings()).map(|(&a, &b)| a * b).sum();
        let flip = if hn > T::zero() && overlap.abs() > T::of(1e-6) * hn {
            overlap < T::zero()
        } else {
            let big = v.iter().copied().fold(T::zero(), |m: T, x| if x.abs() > m.abs() { x } else { m });
            big < T::zero()
        };
        if flip {
            v.iter_mut().for_each(|x| *x = -*x);
        }
        let expectations = (0..eb.dimension()).map(|n| (0..v.len()).map(|t| v[t] * eb.q[(n, t)]).sum()).collect();
        out.push(EigenOperator {
            k: k + 1,
            lambda: metric.eigenvalues[k],
            coefficients: v,
            energies: eb.energies.clone(),
            expectations,
        });
    }
    Ok(out)
}

/// Population standard deviation of `y` about its least-squares polynomial
/// fit in `x` of the given degree.
pub fn poly_fit_residual<T: Real>(x: &[T], y: &[T], degree: usize) -> Result<T> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch { expected: x.len(), got: y.len() });
    }
    if x.len() <= degree + 1 {
        return Err(Error::InvalidArgument("too few points for the fit degree".into()));
    }
    let lo = x.iter().copied().fold(T::infinity(), T::min);
    let hi = x.iter().copied().fold(T::neg_infinity(), T::max);
    let span = if hi > lo { hi - lo } else { T::one() };
    let t: Vec<T> = x.iter().map(|&v| T::of(2.0) * (v - lo) / span - T::one()).collect();
    // Legendre columns keep the design well conditioned on [-1, 1].
    let mut cols: Vec<Vec<T>> = vec![vec![T::one(); t.len()]];
    if degree >= 1 {
        cols.push(t.clone());
    }
    for k in 2..=degree {
        let kf = T::of_usize(k);
        let next = (0..t.len())
            .map(|i| ((T::of_usize(2 * k - 1)) * t[i] * cols[k - 1][i] - (kf - T::one()) * cols[k - 2][i]) / kf)
            .collect();
        cols.push(next);
    }
    let mut basis: Vec<Vec<T>> = Vec::new();
    for mut c in cols {
        for _ in 0..2 {
            for b in &basis {
                let p: T = c.iter().zip(b).map(|(&u, &v)| u * v).sum();
                c.iter_mut().zip(b).for_each(|(u, &v)| *u -= p * v);
            }
        }
        let n = c.iter().map(|&u| u * u).sum::<T>().sqrt();
        if n > T::zero() {
            c.iter_mut().for_each(|u| *u /= n);
            basis.push(c);
        }
    }
    let mut r = y.to_vec();
    for b in &basis {
        let p: T = r.iter().zip(b).map(|(&u, &v)| u * v).sum();
        r.iter_mut().zip(b).for_each(|(u, &v)| *u -= p * v);
    }
    let n = T::of_usize(r.len());
    let mean = r.iter().copied().sum::<T>() / n;
    Ok((r.iter().map(|&u| (u - mean) * (u - mean)).sum::<T>() / n).sqrt())
}

/// Trace-orthonormal polynomials `f_0 .. f_k` of the levels, as values on
/// each level: `sum_n f_i(e_n) f_j(e_n) = delta_ij`.
///
/// `f_0` is constant and `f_j` has degree `j`; each new power is built as
/// `e * f_{j-1}` and orthogonalized twice against the earlier ones.
pub fn orthogonal_polynomials<T: Real>(energies: &[T], k: usize) -> Result<Vec<Vec<T>>> {
    let d = energies.len();
    if d == 0 {
        return Err(Error::InvalidArgument("empty spectrum".into()));
    }
    let scale = energies.iter().fold(T::zero(), |m, e| m.max(e.abs()));
    let scale = if scale > T::zero() { scale } else { T::one() };
    let mut out = vec![vec![T::one() / T::of_usize(d).sqrt(); d]];
    for j in 1..=k {
        let mut f: Vec<T> = out[j - 1].iter().zip(energies).map(|(&a, &e)| a * e / scale).collect();
        let before = f.iter().map(|&u| u * u).sum::<T>().sqrt();
        for _ in 0..2 {
            for b in &out {
                let p: T = f.iter().zip(b).map(|(&u, &v)| u * v).sum();
                f.iter_mut().zip(b).for_each(|(u, &v)| *u -= p * v);
            }
        }
        let after = f.iter().map(|&u| u * u).sum::<T>().sqrt();
        if !(after > T::of(1e-10) * before) {
            return Err(Error::InvalidArgument(format!("degree {j} polynomial is numerically dependent")));
        }
        f.iter_mut().for_each(|u| *u /= after);
        out.push(f);
    }
    Ok(out)
}

/// `sum_tau Tr(F tau)^2 / (2^N Tr F^2)` for `F = f(H')`.
pub fn projected_weight<T: Real>(eb: &Eigenbasis<T>, f: &[T]) -> T {
    let d = T::of_usize(eb.dimension());
    let num: T = eb.string_overlaps(f).iter().map(|&o| o * o).sum::<T>() * d;
    let den: T = f.iter().map(|&u| u * u).sum();
    num / den
}

/// Polynomial estimates of the leading metric eigenvalues `1..=k_max`.
pub fn estimate_lambdas<T: Real>(h0: &LocalHamiltonian<T>, k_max: usize) -> Result<Vec<T>> {
    if k_max == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    let eb = Eigenbasis::of(h0)?;
    let polys = orthogonal_polynomials(&eb.energies, k_max)?;
    Ok(polys[1..].iter().map(|f| projected_weight(&eb, f)).collect())
}

pub fn estimate_lambda_k<T: Real>(h0: &LocalHamiltonian<T>, k: usize) -> Result<T> {
    Ok(*estimate_lambdas(h0, k)?.last().unwrap())
}

/// Diagonal-approximation `lambda_2` and its large-N forms.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Lambda2<T> {
    pub value: T,
    /// `2 Tr J^4 / (3 Tr J^4 + (Tr J^2)^2 / 2)`
    pub asymptote: T,
    /// `4 Tr J^4 / (Tr J^2)^2`
    pub bound: T,
}

pub fn lambda2_closed_form<T: Real>(j: &CouplingMatrixJ<T>) -> Result<Lambda2<T>> {
    let n = j.n_qubits() as usize;
    let a = Mat::<T>::from_fn(n, n, |r, c| j.get(r, c));
    if a.col_iter().all(|c| c.iter().all(|&v| v == T::zero())) {
        return Err(Error::InvalidArgument("lambda_2 needs a nonzero J".into()));
    }
    let j2 = linalg::mul::<T, T>(a.as_ref(), a.as_ref());
    let tr_j2: T = (0..n).map(|i| j2[(i, i)]).sum();
    let tr_j4: T = (0..n).flat_map(|r| (0..n).map(move |c| (r, c))).map(|(r, c)| j2[(r, c)] * j2[(c, r)]).sum();
    let diag_sq: T = (0..n).map(|i| j2[(i, i)] * j2[(i, i)]).sum();
    let quartic: T = (0..n).flat_map(|r| (0..n).map(move |c| (r, c))).map(|(r, c)| a[(r, c)].powi(4)).sum();
    let two = T::of(2.0);
    let half = T::of(0.5);
    let num = two * (tr_j4 - diag_sq);
    let den = T::of(3.0) * tr_j4 + half * tr_j2 * tr_j2 - T::of(6.0) * diag_sq + two * quartic;
    Ok(Lambda2 {
        value: num / den,
        asymptote: two * tr_j4 / (T::of(3.0) * tr_j4 + half * tr_j2 * tr_j2),
        bound: T::of(4.0) * tr_j4 / (tr_j2 * tr_j2),
    })
}

/// Direct evaluation over the `2^N` classical states of the Ising model
/// `sum_{i<j} J_ij Z_i Z_j`, with `F = H^2 - Tr(H^2)/2^N` and the Z-only
/// pair strings.
pub fn lambda2_bruteforce<T: Real>(j: &CouplingMatrixJ<T>) -> Result<T> {
    let basis = StringBasis::enumerate(j.n_qubits(), BasisFlavor::ZOnly2Local)?;
    let h = LocalHamiltonian::new(basis, j.to_pairs())?;
    let eb = Eigenbasis::of(&h)?;
    let d = T::of_usize(eb.dimension());
    let mean_sq = eb.energies.iter().map(|&e| e * e).sum::<T>() / d;
    let f: Vec<T> = eb.energies.iter().map(|&e| e * e - mean_sq).collect();
    if f.iter().all(|&v| v == T::zero()) {
        return Err(Error::InvalidArgument("lambda_2 needs a nonzero J".into()));
    }
    Ok(projected_weight(&eb, &f))
}

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct RankBound {
    /// `2^N / (m + 1)`, counting the identity.
    pub generic: f64,
    /// Sharper constant known for three qubits.
    pub tight: Option<f64>,
}

/// Lower bound on the rank of any projector in the span of `basis` and the
/// identity.
pub fn rank_lower_bound(n_qubits: u32, basis: &StringBasis) -> Result<RankBound> {
    if basis.n_qubits() != n_qubits {
        return Err(Error::QubitMismatch { left: n_qubits, right: basis.n_qubits() });
    }
    let generic = (basis.dimension() as f64) / (basis.len() as f64 + 1.0);
    Ok(RankBound { generic, tight: (n_qubits == 3).then_some(4.0 / 3.0) })
}
