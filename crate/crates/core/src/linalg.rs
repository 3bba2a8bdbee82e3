//! Thin dense linear-algebra layer over `faer`.

use std::collections::BTreeMap;

use faer::linalg::matmul::matmul;
use faer::{Accum, Mat, MatRef, Par, Side};
use num_complex::Complex;

use crate::error::{Error, Result};
use crate::pauli::StringBasis;
use crate::scalar::{Entry, Real};

/// Eigendecomposition of a Hermitian matrix, eigenvalues ascending.
#[derive(Clone, Debug)]
pub struct Eigh<T, E> {
    pub values: Vec<T>,
    pub vectors: Mat<E>,
}

pub fn eigh<T: Real, E: Entry<T>>(m: MatRef<'_, E>) -> Result<Eigh<T, E>> {
    let evd = m.self_adjoint_eigen(Side::Lower).map_err(|_| Error::Eigen)?;
    let s = evd.S().column_vector();
    let values: Vec<T> = (0..m.nrows()).map(|i| Entry::re(s[i])).collect();
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Eigen);
    }
    Ok(Eigh { values, vectors: evd.U().to_owned() })
}

pub fn eigvalsh<T: Real, E: Entry<T>>(m: MatRef<'_, E>) -> Result<Vec<T>> {
    let values = m.self_adjoint_eigenvalues(Side::Lower).map_err(|_| Error::Eigen)?;
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Eigen);
    }
    Ok(values)
}

#[inline]
fn one<T: Real, E: Entry<T>>() -> E {
    E::from_re(T::one())
}

/// `a * b`
pub fn mul<T: Real, E: Entry<T>>(a: MatRef<'_, E>, b: MatRef<'_, E>) -> Mat<E> {
    let mut c = Mat::<E>::zeros(a.nrows(), b.ncols());
    matmul(c.as_mut(), Accum::Replace, a, b, one::<T, E>(), Par::Seq);
    c
}

/// `a^dagger * b`
pub fn mul_adj_lhs<T: Real, E: Entry<T>>(a: MatRef<'_, E>, b: MatRef<'_, E>) -> Mat<E> {
    let mut c = Mat::<E>::zeros(a.ncols(), b.ncols());
    matmul(c.as_mut(), Accum::Replace, a.adjoint(), b, one::<T, E>(), Par::Seq);
    c
}

/// `a * b^dagger`
pub fn mul_adj_rhs<T: Real, E: Entry<T>>(a: MatRef<'_, E>, b: MatRef<'_, E>) -> Mat<E> {
    let mut c = Mat::<E>::zeros(a.nrows(), b.nrows());
    matmul(c.as_mut(), Accum::Replace, a, b.adjoint(), one::<T, E>(), Par::Seq);
    c
}

/// `u^dagger * h * u`
pub fn conjugate_by<T: Real, E: Entry<T>>(h: MatRef<'_, E>, u: MatRef<'_, E>) -> Mat<E> {
    let hu = mul::<T, E>(h, u);
    mul_adj_lhs::<T, E>(u, hu.as_ref())
}

/// `v * diag(w) * v^dagger`
pub fn reconstruct<T: Real, E: Entry<T>>(v: MatRef<'_, E>, w: &[T]) -> Mat<E> {
    let mut vw = v.to_owned();
    for (j, &wj) in w.iter().enumerate() {
        for i in 0..vw.nrows() {
            vw[(i, j)] = vw[(i, j)].scale(wj);
        }
    }
    mul_adj_rhs::<T, E>(vw.as_ref(), v)
}

pub fn sub<T: Real, E: Entry<T>>(a: MatRef<'_, E>, b: MatRef<'_, E>) -> Mat<E> {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)] - b[(i, j)])
}

pub fn frobenius<T: Real, E: Entry<T>>(m: MatRef<'_, E>) -> T {
    let mut acc = T::zero();
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            acc += m[(i, j)].norm_sqr();
        }
    }
    acc.sqrt()
}

pub fn max_abs<T: Real, E: Entry<T>>(m: MatRef<'_, E>) -> T {
    let mut acc = T::zero();
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            acc = acc.max(m[(i, j)].abs());
        }
    }
    acc
}

/// `max |m_ij - conj(m_ji)|`
pub fn hermitian_deviation<T: Real, E: Entry<T>>(m: MatRef<'_, E>) -> T {
    let mut dev = T::zero();
    for j in 0..m.ncols() {
        for i in 0..=j.min(m.nrows().saturating_sub(1)) {
            dev = dev.max((m[(i, j)] - m[(j, i)].conjugate()).abs());
        }
    }
    dev
}

pub fn check_hermitian<T: Real, E: Entry<T>>(m: MatRef<'_, E>, tol: T) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::DimensionMismatch { expected: m.nrows(), got: m.ncols() });
    }
    let dev = hermitian_deviation::<T, E>(m);
    if !dev.is_finite() {
        return Err(Error::NonFinite("matrix"));
    }
    if dev > tol {
        return Err(Error::NotHermitian(dev.as_f64()));
    }
    Ok(())
}

/// `max |u^dagger u - 1|`
pub fn unitarity_defect<T: Real, E: Entry<T>>(u: MatRef<'_, E>) -> T {
    let g = mul_adj_lhs::<T, E>(u, u);
    let mut dev = T::zero();
    for j in 0..g.ncols() {
        for i in 0..g.nrows() {
            let target = if i == j { one::<T, E>() } else { E::zero() };
            dev = dev.max((g[(i, j)] - target).abs());
        }
    }
    dev
}

/// `exp(alpha * s)` for anti-Hermitian `s`, via the eigendecomposition of
/// the Hermitian matrix `i s`.
pub fn expm_anti_hermitian<T: Real, E: Entry<T>>(s: MatRef<'_, E>, alpha: T) -> Result<Mat<E>> {
    let d = s.nrows();
    let k = Mat::<Complex<T>>::from_fn(d, d, |i, j| {
        let v = s[(i, j)].to_complex();
        Complex::new(-v.im, v.re)
    });
    let Eigh { values, vectors: w } = eigh::<T, Complex<T>>(k.as_ref())?;
    // s = -i k, so exp(alpha s) = w diag(exp(-i alpha theta)) w^dagger.
    let mut wp = w.clone();
    for (j, &theta) in values.iter().enumerate() {
        let ph = Complex::from_polar(T::one(), -alpha * theta);
        for i in 0..d {
            wp[(i, j)] = wp[(i, j)] * ph;
        }
    }
    let u = mul_adj_rhs::<T, Complex<T>>(wp.as_ref(), w.as_ref());
    Ok(Mat::from_fn(d, d, |i, j| E::from_complex(u[(i, j)])))
}

/// Nearest unitary `u (u^dagger u)^{-1/2}`.
pub fn lowdin_orthonormalize<T: Real, E: Entry<T>>(u: MatRef<'_, E>) -> Result<Mat<E>> {
    let g = mul_adj_lhs::<T, E>(u, u);
    let Eigh { values, vectors } = eigh::<T, E>(g.as_ref())?;
    if values.iter().any(|&v| v <= T::zero()) {
        return Err(Error::Eigen);
    }
    let inv_sqrt: Vec<T> = values.iter().map(|&v| T::one() / v.sqrt()).collect();
    let p = reconstruct::<T, E>(vectors.as_ref(), &inv_sqrt);
    Ok(mul::<T, E>(u, p.as_ref()))
}

#[inline]
pub(crate) fn times_i_pow<T: Real>(p: u8, v: Complex<T>) -> Complex<T> {
    match p & 3 {
        0 => v,
        1 => Complex::new(-v.im, v.re),
        2 => -v,
        _ => Complex::new(v.im, -v.re),
    }
}

/// Strings of `basis` grouped by X mask (strings sharing an X mask touch the
/// same off-diagonal entries).
fn group_by_x(basis: &StringBasis) -> BTreeMap<u64, Vec<usize>> {
    let mut groups: BTreeMap<u64, Vec<usize>> = BTreeMap::new();
    for (i, s) in basis.strings().iter().enumerate() {
        groups.entry(s.x_mask()).or_default().push(i);
    }
    groups
}

/// `Re Tr(tau M) / 2^N` for every basis string, with
/// `M = V diag(w) V^dagger` given by its eigenvectors (columns of `v`).
///
/// Costs `O(d^2)` per distinct X mask instead of forming `M`.
pub fn weighted_diagonal_traces<T: Real, E: Entry<T>>(
    v: MatRef<'_, E>,
    w: &[T],
    basis: &StringBasis,
) -> Result<Vec<T>> {
    let d = basis.dimension();
    if v.nrows() != d || v.ncols() != w.len() {
        return Err(Error::DimensionMismatch { expected: d, got: v.nrows() });
    }
    let k = w.len();
    // Rows of v stored contiguously, with and without the weights folded in.
    let vt = v.transpose().to_owned();
    let mut vwt = vt.clone();
    for c in 0..d {
        let col = vwt.col_as_slice_mut(c);
        for (x, &wn) in col.iter_mut().zip(w) {
            *x = x.scale(wn);
        }
    }
    let inv_d = T::one() / T::of_usize(d);
    let mut out = vec![T::zero(); basis.len()];
    let mut mx = vec![Complex::new(T::zero(), T::zero()); d];
    for (x, members) in group_by_x(basis) {
        for (c, slot) in mx.iter_mut().enumerate() {
            let a = vwt.col_as_slice(c);
            let b = vt.col_as_slice(c ^ x as usize);
            let mut acc = E::zero();
            for n in 0..k {
                acc += a[n] * b[n].conjugate();
            }
            *slot = acc.to_complex();
        }
        for &i in &members {
            let s = basis.strings()[i];
            let mut acc = T::zero();
            for (c, &m) in mx.iter().enumerate() {
                let (_, p) = s.apply(c);
                acc += times_i_pow(p, m).re;
            }
            out[i] = acc * inv_d;
        }
    }
    Ok(out)
}

/// `Q[n, tau] = <n|tau|n>` for each eigenvector column `n` of `v`.
pub fn diagonal_expectations<T: Real, E: Entry<T>>(v: MatRef<'_, E>, basis: &StringBasis) -> Result<Mat<T>> {
    let d = basis.dimension();
    if v.nrows() != d {
        return Err(Error::DimensionMismatch { expected: d, got: v.nrows() });
    }
    let v = v.to_owned();
    let mut q = Mat::<T>::zeros(v.ncols(), basis.len());
    for n in 0..v.ncols() {
        let col = v.col_as_slice(n);
        for (i, s) in basis.strings().iter().enumerate() {
            let mut acc = T::zero();
            for (c, &vc) in col.iter().enumerate() {
                let (r, p) = s.apply(c);
                let z = (col[r].conjugate() * vc).to_complex();
                acc += times_i_pow(p, z).re;
            }
            q[(n, i)] = acc;
        }
    }
    Ok(q)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pauli::{BasisFlavor, LocalHamiltonian};

    fn sample_hermitian(d: usize) -> Mat<Complex<f64>> {
        let a = Mat::<Complex<f64>>::from_fn(d, d, |i, j| {
            Complex::new(((i * 7 + j * 3) % 5) as f64 - 2.0, ((i * 2 + j * 5) % 7) as f64 - 3.0)
        });
        Mat::from_fn(d, d, |i, j| (a[(i, j)] + a[(j, i)].conj()) * 0.5)
    }

    #[test]
    fn eigh_reconstructs() {
        let h = sample_hermitian(6);
        let e = eigh::<f64, Complex<f64>>(h.as_ref()).unwrap();
        assert!(e.values.windows(2).all(|w| w[0] <= w[1]));
        let back = reconstruct::<f64, Complex<f64>>(e.vectors.as_ref(), &e.values);
        assert!(max_abs::<f64, Complex<f64>>(sub::<f64, Complex<f64>>(back.as_ref(), h.as_ref()).as_ref()) < 1e-12);
    }

    #[test]
    fn expm_is_unitary_and_matches_series() {
        let h = sample_hermitian(4);
        // s = i h is anti-Hermitian
        let s = Mat::<Complex<f64>>::from_fn(4, 4, |i, j| h[(i, j)] * Complex::new(0.0, 1.0));
        let u = expm_anti_hermitian::<f64, Complex<f64>>(s.as_ref(), 0.05).unwrap();
        assert!(unitarity_defect::<f64, Complex<f64>>(u.as_ref()) < 1e-13);
        // Taylor series to high order as an independent check.
        let mut term = Mat::<Complex<f64>>::identity(4, 4);
        let mut sum = term.clone();
        for k in 1..30 {
            let next = mul::<f64, Complex<f64>>(term.as_ref(), s.as_ref());
            term = Mat::from_fn(4, 4, |i, j| next[(i, j)] * (0.05 / k as f64));
            sum = Mat::from_fn(4, 4, |i, j| sum[(i, j)] + term[(i, j)]);
        }
        assert!(max_abs::<f64, Complex<f64>>(sub::<f64, Complex<f64>>(u.as_ref(), sum.as_ref()).as_ref()) < 1e-12);
    }

    #[test]
    fn lowdin_restores_unitarity() {
        let h = sample_hermitian(4);
        let s = Mat::<Complex<f64>>::from_fn(4, 4, |i, j| h[(i, j)] * Complex::new(0.0, 1.0));
        let u = expm_anti_hermitian::<f64, Complex<f64>>(s.as_ref(), 0.3).unwrap();
        let drift = Mat::<Complex<f64>>::from_fn(4, 4, |i, j| u[(i, j)] * (1.0 + 1e-6 * (i + j) as f64));
        assert!(unitarity_defect::<f64, Complex<f64>>(drift.as_ref()) > 1e-7);
        let fixed = lowdin_orthonormalize::<f64, Complex<f64>>(drift.as_ref()).unwrap();
        assert!(unitarity_defect::<f64, Complex<f64>>(fixed.as_ref()) < 1e-13);
    }

    #[test]
    fn weighted_traces_match_dense_products() {
        let basis = StringBasis::enumerate(3, BasisFlavor::Complex2Local).unwrap();
        let h: Vec<f64> = (0..basis.len()).map(|i| ((i * 37 % 11) as f64 - 5.0) / 7.0).collect();
        let ham = LocalHamiltonian::new(basis.clone(), h).unwrap();
        let m = ham.materialize::<Complex<f64>>().unwrap();
        let e = eigh::<f64, Complex<f64>>(m.as_ref()).unwrap();
        let w: Vec<f64> = (0..8).map(|i| (i as f64 - 3.5).powi(3)).collect();
        let fast = weighted_diagonal_traces::<f64, Complex<f64>>(e.vectors.as_ref(), &w, &basis).unwrap();
        let dense = reconstruct::<f64, Complex<f64>>(e.vectors.as_ref(), &w);
        for (i, s) in basis.strings().iter().enumerate() {
            let t = s.to_dense::<f64, Complex<f64>>().unwrap();
            let p = mul::<f64, Complex<f64>>(t.as_ref(), dense.as_ref());
            let tr: f64 = (0..8).map(|k| p[(k, k)].re).sum::<f64>() / 8.0;
            assert!((tr - fast[i]).abs() < 1e-12, "{s}: {tr} vs {}", fast[i]);
        }
        let q = diagonal_expectations::<f64, Complex<f64>>(e.vectors.as_ref(), &basis).unwrap();
        for i in 0..basis.len() {
            let via_q: f64 = (0..8).map(|n| w[n] * q[(n, i)]).sum::<f64>() / 8.0;
            assert!((via_q - fast[i]).abs() < 1e-12);
        }
    }
}
