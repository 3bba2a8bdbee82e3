//! Target spectra: dense GOE matrices, the tridiagonal Hermite ensemble and
//! spectrum utilities.
//!
//! Convention: `H = (A + A^T) / sqrt(2)` with standard-normal `A`, so
//! off-diagonal entries have variance 1 and diagonal entries variance 2.
//! The tridiagonal model is matched to the same level density.
//!
//! Randomness: every realization draws from its own ChaCha8 stream,
//! `ChaCha8Rng::seed_from_u64(seed)` with stream id `seed ^ realization`.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use faer::{Mat, MatRef};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Eigh};
use crate::scalar::{Entry, Real};

/// Largest qubit count for [`sample_goe_dense`].
pub const GOE_DENSE_CAP: u32 = 12;
/// Largest qubit count for [`sample_spectrum_tridiagonal`].
pub const TRIDIAGONAL_CAP: u32 = 20;

pub const CONVENTION: &str = "H = (A + A^T)/sqrt(2), A_ij ~ N(0,1); offdiag var 1, diag var 2";

/// RNG for stream `stream` of base seed `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Stream id of realization `index` under base seed `seed`.
pub fn realization_stream(seed: u64, index: usize) -> u64 {
    seed ^ index as u64
}

/// Ascending eigenvalues of a `2^N`-dimensional operator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Real"))]
pub struct Spectrum<T: Real> {
    n_qubits: u32,
    values: Vec<T>,
}

impl<T: Real> Spectrum<T> {
    /// Sorts `values` ascending; the length must be `2^n_qubits`.
    pub fn new(n_qubits: u32, mut values: Vec<T>) -> Result<Self> {
        if n_qubits == 0 || n_qubits >= usize::BITS {
            return Err(Error::QubitsOutOfRange { n: n_qubits, min: 1, max: usize::BITS - 1 });
        }
        let d = 1usize << n_qubits;
        if values.len() != d {
            return Err(Error::DimensionMismatch { expected: d, got: values.len() });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("spectrum"));
        }
        values.sort_by(|a, b| a.partial_cmp(b).unwrap());
        Ok(Self { n_qubits, values })
    }

    /// Infers `n_qubits` from the length.
    pub fn from_values(values: Vec<T>) -> Result<Self> {
        let d = values.len();
        if d < 2 || !d.is_power_of_two() {
            return Err(Error::InvalidArgument(format!("spectrum length {d} is not a power of two")));
        }
        Self::new(d.trailing_zeros(), values)
    }

    pub fn n_qubits(&self) -> u32 {
        self.n_qubits
    }
    pub fn dimension(&self) -> usize {
        self.values.len()
    }
    pub fn values(&self) -> &[T] {
        &self.values
    }
    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn mean(&self) -> T {
        self.values.iter().copied().sum::<T>() / T::of_usize(self.values.len())
    }

    /// `(1/2^N) sum E_i^2`, i.e. `Tr(H^2)/2^N`.
    pub fn mean_square(&self) -> T {
        self.values.iter().map(|&v| v * v).sum::<T>() / T::of_usize(self.values.len())
    }

    pub fn shifted(&self, c: T) -> Self {
        Self { n_qubits: self.n_qubits, values: self.values.iter().map(|&v| v + c).collect() }
    }

    /// Multiplies by `c`; a negative factor reverses the order.
    pub fn scaled(&self, c: T) -> Self {
        let mut values: Vec<T> = self.values.iter().map(|&v| v * c).collect();
        if c < T::zero() {
            values.reverse();
        }
        Self { n_qubits: self.n_qubits, values }
    }

    /// Shifted to zero mean.
    pub fn traceless(&self) -> Self {
        self.shifted(-self.mean())
    }

    pub fn cast<U: Real>(&self) -> Spectrum<U> {
        Spectrum { n_qubits: self.n_qubits, values: self.values.iter().map(|v| U::of(v.as_f64())).collect() }
    }

    /// One value per row, header `value`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "value")?;
        for v in &self.values {
            writeln!(w, "{v:e}")?;
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Generator {
    GoeDense,
    HermiteTridiagonal,
}

impl Generator {
    pub fn as_str(&self) -> &'static str {
        match self {
            Generator::GoeDense => "goe_dense",
            Generator::HermiteTridiagonal => "hermite_tridiagonal",
        }
    }

    pub fn cap(&self) -> u32 {
        match self {
            Generator::GoeDense => GOE_DENSE_CAP,
            Generator::HermiteTridiagonal => TRIDIAGONAL_CAP,
        }
    }
}

impl fmt::Display for Generator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Generator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "goe_dense" | "goe" | "dense" => Ok(Generator::GoeDense),
            "hermite_tridiagonal" | "tridiagonal" | "tridiag" => Ok(Generator::HermiteTridiagonal),
            other => Err(Error::InvalidArgument(format!("unknown generator {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleConfig {
    pub n_qubits: u32,
    pub n_realizations: usize,
    pub seed: u64,
    pub generator: Generator,
    #[serde(default = "unit_scale")]
    pub scale: f64,
}

fn unit_scale() -> f64 {
    1.0
}

impl EnsembleConfig {
    pub fn new(n_qubits: u32, n_realizations: usize, seed: u64, generator: Generator) -> Self {
        Self { n_qubits, n_realizations, seed, generator, scale: 1.0 }
    }

    pub fn validate(&self) -> Result<()> {
        let cap = self.generator.cap();
        if self.n_qubits == 0 || self.n_qubits > cap {
            return Err(Error::QubitsOutOfRange { n: self.n_qubits, min: 1, max: cap });
        }
        if self.n_realizations == 0 {
            return Err(Error::InvalidArgument("n_realizations must be at least 1".into()));
        }
        if !(self.scale.is_finite() && self.scale > 0.0) {
            return Err(Error::InvalidArgument(format!("scale must be positive, got {}", self.scale)));
        }
        Ok(())
    }

    pub fn stream(&self, index: usize) -> u64 {
        realization_stream(self.seed, index)
    }

    /// Spectrum of realization `index`; independent of evaluation order.
    pub fn realization<T: Real>(&self, index: usize) -> Result<Spectrum<T>> {
        self.validate()?;
        let mut rng = stream_rng(self.seed, self.stream(index));
        let s: Spectrum<f64> = match self.generator {
            Generator::GoeDense => {
                let h = goe_matrix_with(&mut rng, 1usize << self.n_qubits);
                spectrum_of::<f64, f64>(h.as_ref())?
            }
            Generator::HermiteTridiagonal => tridiagonal_spectrum_with(&mut rng, self.n_qubits)?,
        };
        Ok(s.scaled(self.scale).cast())
    }

    /// Dense GOE matrix behind realization `index` (scaled), for methods that
    /// need more than the spectrum.
    pub fn dense_matrix<T: Real>(&self, index: usize) -> Result<Mat<T>> {
        self.validate()?;
        if self.generator != Generator::GoeDense {
            return Err(Error::InvalidArgument("only the dense generator has a matrix".into()));
        }
        let mut rng = stream_rng(self.seed, self.stream(index));
        let h = goe_matrix_with(&mut rng, 1usize << self.n_qubits);
        Ok(Mat::from_fn(h.nrows(), h.ncols(), |i, j| T::of(h[(i, j)] * self.scale)))
    }

    pub fn realizations<T: Real>(&self) -> Result<Vec<Spectrum<T>>> {
        (0..self.n_realizations).map(|i| self.realization(i)).collect()
    }
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn goe_matrix_with(rng: &mut ChaCha8Rng, d: usize) -> Mat<f64> {
    let a = Mat::<f64>::from_fn(d, d, |_, _| normal(rng));
    let s = std::f64::consts::FRAC_1_SQRT_2;
    Mat::from_fn(d, d, |i, j| (a[(i, j)] + a[(j, i)]) * s)
}

/// Dense GOE matrix of dimension `2^n_qubits` (realization 0 of `seed`).
pub fn sample_goe_dense<T: Real>(n_qubits: u32, seed: u64) -> Result<Mat<T>> {
    if n_qubits == 0 || n_qubits > GOE_DENSE_CAP {
        return Err(Error::QubitsOutOfRange { n: n_qubits, min: 1, max: GOE_DENSE_CAP });
    }
    let mut rng = stream_rng(seed, realization_stream(seed, 0));
    let h = goe_matrix_with(&mut rng, 1usize << n_qubits);
    Ok(Mat::from_fn(h.nrows(), h.ncols(), |i, j| T::of(h[(i, j)])))
}

fn tridiagonal_spectrum_with(rng: &mut ChaCha8Rng, n_qubits: u32) -> Result<Spectrum<f64>> {
    let d = 1usize << n_qubits;
    let sqrt2 = std::f64::consts::SQRT_2;
    let mut diag: Vec<f64> = (0..d).map(|_| sqrt2 * normal(rng)).collect();
    let mut off: Vec<f64> = (0..d - 1)
        .map(|i| {
            let k = (d - 1 - i) as f64;
            let chi2: f64 = ChiSquared::new(k).expect("positive dof").sample(rng);
            chi2.sqrt()
        })
        .collect();
    tridiagonal_eigenvalues(&mut diag, &mut off)?;
    Spectrum::new(n_qubits, diag)
}

/// Spectrum of the beta = 1 Hermite tridiagonal model (realization 0 of `seed`).
pub fn sample_spectrum_tridiagonal<T: Real>(n_qubits: u32, seed: u64) -> Result<Spectrum<T>> {
    if n_qubits == 0 || n_qubits > TRIDIAGONAL_CAP {
        return Err(Error::QubitsOutOfRange { n: n_qubits, min: 1, max: TRIDIAGONAL_CAP });
    }
    let mut rng = stream_rng(seed, realization_stream(seed, 0));
    Ok(tridiagonal_spectrum_with(&mut rng, n_qubits)?.cast())
}

/// Eigenvalues of the symmetric tridiagonal matrix with diagonal `diag` and
/// off-diagonal `off` (implicit QL with Wilkinson shifts). Overwrites
/// `diag` with the unsorted eigenvalues; `off` is destroyed.
pub fn tridiagonal_eigenvalues(diag: &mut [f64], off: &mut [f64]) -> Result<()> {
    let n = diag.len();
    if n == 0 {
        return Ok(());
    }
    if off.len() + 1 != n {
        return Err(Error::DimensionMismatch { expected: n - 1, got: off.len() });
    }
    let mut e = off.to_vec();
    e.push(0.0);
    let d = diag;
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 60 {
                return Err(Error::Eigen);
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut i = m;
            let mut deflated = false;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    deflated = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
            }
            if deflated {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    off.copy_from_slice(&e[..n - 1]);
    Ok(())
}

fn hermitian_tolerance<T: Real>(scale: T) -> T {
    let tol = T::of(1e-10).max(T::epsilon() * T::of(100.0));
    tol * scale.max(T::one())
}

/// Ascending eigenvalues of a dense Hermitian matrix of dimension `2^N`.
pub fn spectrum_of<T: Real, E: Entry<T>>(h: MatRef<'_, E>) -> Result<Spectrum<T>> {
    linalg::check_hermitian::<T, E>(h, hermitian_tolerance(linalg::max_abs::<T, E>(h)))?;
    let values = linalg::eigvalsh::<T, E>(h)?;
    Spectrum::from_values(values)
}

/// Eigendecomposition plus the relative residual `||HV - V diag(E)||_F / ||H||_F`.
pub fn spectrum_with_residual<T: Real, E: Entry<T>>(h: MatRef<'_, E>) -> Result<(Eigh<T, E>, T)> {
    linalg::check_hermitian::<T, E>(h, hermitian_tolerance(linalg::max_abs::<T, E>(h)))?;
    let e = linalg::eigh::<T, E>(h)?;
    let hv = linalg::mul::<T, E>(h, e.vectors.as_ref());
    let mut acc = T::zero();
    for j in 0..hv.ncols() {
        for i in 0..hv.nrows() {
            acc += (hv[(i, j)] - e.vectors[(i, j)].scale(e.values[j])).norm_sqr();
        }
    }
    let norm = linalg::frobenius::<T, E>(h);
    let rel = if norm > T::zero() { acc.sqrt() / norm } else { acc.sqrt() };
    Ok((e, rel))
}

/// Serialized spectrum with its provenance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumRecord {
    pub version: String,
    pub n_qubits: u32,
    pub seed: u64,
    pub realization: usize,
    pub stream: u64,
    pub generator: Generator,
    pub scale: f64,
    pub convention: String,
    pub values: Vec<f64>,
}

impl SpectrumRecord {
    pub fn generate(config: &EnsembleConfig, index: usize) -> Result<Self> {
        let spectrum: Spectrum<f64> = config.realization(index)?;
        Ok(Self {
            version: crate::VERSION.to_string(),
            n_qubits: config.n_qubits,
            seed: config.seed,
            realization: index,
            stream: config.stream(index),
            generator: config.generator,
            scale: config.scale,
            convention: CONVENTION.to_string(),
            values: spectrum.into_values(),
        })
    }

    pub fn spectrum<T: Real>(&self) -> Result<Spectrum<T>> {
        let s = Spectrum::new(self.n_qubits, self.values.iter().map(|&v| T::of(v)).collect())?;
        Ok(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dense_matrix_matches_realization() {
        let cfg = EnsembleConfig::new(3, 4, 9, Generator::GoeDense);
        let h = cfg.dense_matrix::<f64>(2).unwrap();
        let s = spectrum_of::<f64, f64>(h.as_ref()).unwrap();
        assert_eq!(s, cfg.realization::<f64>(2).unwrap());
    }

    #[test]
    fn sorting_constructor() {
        let s = Spectrum::new(2, vec![3.0, 1.0, 2.0, 0.0]).unwrap();
        assert_eq!(s.values(), &[0.0, 1.0, 2.0, 3.0]);
        assert!(Spectrum::new(2, vec![1.0, 2.0, 3.0]).is_err());
        assert!(Spectrum::new(1, vec![1.0, f64::NAN]).is_err());
        assert_eq!(Spectrum::from_values(vec![0.0f32; 8]).unwrap().n_qubits(), 3);
    }

    #[test]
    fn diag_matrix_spectrum() {
        let mut m = Mat::<f64>::zeros(4, 4);
        for (i, v) in [3.0, 1.0, 2.0, 0.0].into_iter().enumerate() {
            m[(i, i)] = v;
        }
        let s = spectrum_of::<f64, f64>(m.as_ref()).unwrap();
        assert_eq!(s.values(), &[0.0, 1.0, 2.0, 3.0]);
        let z = spectrum_of::<f64, f64>(Mat::<f64>::zeros(4, 4).as_ref()).unwrap();
        assert_eq!(z.values(), &[0.0; 4]);
    }

    #[test]
    fn non_hermitian_is_rejected() {
        let mut m = Mat::<f64>::zeros(2, 2);
        m[(0, 1)] = 1.0;
        assert!(matches!(spectrum_of::<f64, f64>(m.as_ref()), Err(Error::NotHermitian(_))));
    }

    #[test]
    fn goe_is_symmetric_and_deterministic() {
        let a = sample_goe_dense::<f64>(3, 11).unwrap();
        let b = sample_goe_dense::<f64>(3, 11).unwrap();
        assert_eq!(a, b);
        for i in 0..8 {
            for j in 0..8 {
                assert_eq!(a[(i, j)], a[(j, i)]);
            }
        }
        assert_ne!(a, sample_goe_dense::<f64>(3, 12).unwrap());
        assert!(sample_goe_dense::<f64>(GOE_DENSE_CAP + 1, 0).is_err());
    }

    #[test]
    fn ql_matches_dense_solver() {
        let mut rng = stream_rng(5, 0);
        let n = 40;
        let diag: Vec<f64> = (0..n).map(|_| normal(&mut rng)).collect();
        let off: Vec<f64> = (0..n - 1).map(|_| normal(&mut rng)).collect();
        let m = Mat::<f64>::from_fn(n, n, |i, j| {
            if i == j {
                diag[i]
            } else if i + 1 == j {
                off[i]
            } else if j + 1 == i {
                off[j]
            } else {
                0.0
            }
        });
        let dense = linalg::eigvalsh::<f64, f64>(m.as_ref()).unwrap();
        let (mut d, mut e) = (diag.clone(), off.clone());
        tridiagonal_eigenvalues(&mut d, &mut e).unwrap();
        d.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (a, b) in d.iter().zip(&dense) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn ensemble_streams_are_index_derived() {
        let cfg = EnsembleConfig::new(4, 3, 7, Generator::HermiteTridiagonal);
        let all: Vec<Spectrum<f64>> = cfg.realizations().unwrap();
        assert_eq!(all[2], cfg.realization::<f64>(2).unwrap());
        assert_ne!(all[0], all[1]);
        assert_eq!(all[0].dimension(), 16);
        let mut bad = cfg.clone();
        bad.n_realizations = 0;
        assert!(bad.validate().is_err());
        bad = cfg.clone();
        bad.scale = -1.0;
        assert!(bad.validate().is_err());
    }

    #[test]
    fn scale_multiplies_spectrum() {
        let mut cfg = EnsembleConfig::new(3, 1, 9, Generator::GoeDense);
        let base: Spectrum<f64> = cfg.realization(0).unwrap();
        cfg.scale = 2.5;
        let scaled: Spectrum<f64> = cfg.realization(0).unwrap();
        for (a, b) in base.values().iter().zip(scaled.values()) {
            assert!((2.5 * a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn residual_is_small() {
        let h = sample_goe_dense::<f64>(5, 3).unwrap();
        let (_, rel) = spectrum_with_residual::<f64, f64>(h.as_ref()).unwrap();
        assert!(rel < 1e-12);
    }
}
