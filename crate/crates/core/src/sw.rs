//! Iterative Schrieffer–Wolff rotation toward a local subspace.
//!
//! Each step splits `H = H_k + H_perp` (projection onto the basis and the
//! remainder), builds the anti-Hermitian generator
//! `<n|S|m> = -<n|H_perp|m> / (e_n - e_m)` in the eigenbasis of `H_k`, and
//! rotates `H <- U^dagger H U` with `U = exp(alpha S)`.

use std::io::Write;

use faer::Mat;
use num_complex::Complex;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Eigh};
use crate::pauli::{materialize_into, project_onto_subspace, LocalHamiltonian, StringBasis};
use crate::scalar::{Entry, Real};
use crate::spectra;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Real"))]
pub struct SwSettings<T: Real> {
    pub alpha: T,
    pub max_iters: usize,
    pub residual_tol: T,
    /// Energy gaps below `degeneracy_floor * max|e_n|` get a zero generator
    /// element.
    pub degeneracy_floor: T,
    /// Stop when the residual drops by less than `stagnation_tol` over
    /// `stagnation_window` iterations.
    pub stagnation_window: usize,
    pub stagnation_tol: T,
    /// Re-orthonormalize the accumulated unitary beyond this defect.
    pub unitarity_tol: T,
    /// Size of the random rotation applied when `H` has no component in the
    /// subspace at all (the generator is then undefined).
    pub kick: T,
    pub seed: u64,
}

impl<T: Real> Default for SwSettings<T> {
    fn default() -> Self {
        Self {
            alpha: T::of(0.1),
            max_iters: 5000,
            residual_tol: T::of(1e-8),
            degeneracy_floor: T::of(1e-10),
            stagnation_window: 50,
            stagnation_tol: T::of(1e-14),
            unitarity_tol: T::of(1e-10),
            kick: T::of(0.1),
            seed: 0,
        }
    }
}

impl<T: Real> SwSettings<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > T::zero() && self.alpha <= T::one()) {
            return Err(Error::InvalidArgument(format!("alpha must lie in (0, 1], got {}", self.alpha)));
        }
        if !(self.residual_tol > T::zero()) || !(self.degeneracy_floor >= T::zero()) {
            return Err(Error::InvalidArgument("tolerances must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct SwState<T: Real, E: Entry<T>> {
    pub current_h: Mat<E>,
    pub accumulated_u: Mat<E>,
    pub alpha: T,
    pub iteration: usize,
    /// `||H_perp||_F`
    pub residual_norm: T,
    /// Generator elements zeroed because of near-degenerate gaps in the last step.
    pub degenerate_pairs: usize,
}

/// Split of a Hermitian matrix into its projection and remainder.
pub struct Split<T: Real, E: Entry<T>> {
    pub couplings: Vec<T>,
    pub local: Mat<E>,
    pub perp: Mat<E>,
}

/// `H = H_k + H_perp` with `H_k` the projection onto `basis`.
pub fn split<T: Real, E: Entry<T>>(h: &Mat<E>, basis: &StringBasis) -> Result<Split<T, E>> {
    let couplings = project_onto_subspace::<T, E>(h.as_ref(), basis)?;
    let d = basis.dimension();
    let mut local = Mat::<E>::zeros(d, d);
    if E::IS_COMPLEX || basis.is_real() {
        materialize_into(basis, &couplings, local.as_mut())?;
    } else {
        // Imaginary strings have zero overlap with a real symmetric matrix.
        let kept: Vec<usize> = (0..basis.len()).filter(|&i| basis.strings()[i].is_real()).collect();
        let sub = StringBasis::custom(basis.n_qubits(), kept.iter().map(|&i| basis.strings()[i]).collect())?;
        let c: Vec<T> = kept.iter().map(|&i| couplings[i]).collect();
        materialize_into(&sub, &c, local.as_mut())?;
    }
    // The identity commutes with everything, so the trace stays with the local part.
    let mut tr = T::zero();
    for i in 0..d {
        tr += h[(i, i)].re();
    }
    let shift = E::from_re(tr / T::of_usize(d));
    for i in 0..d {
        local[(i, i)] += shift;
    }
    let perp = linalg::sub::<T, E>(h.as_ref(), local.as_ref());
    Ok(Split { couplings, local, perp })
}

/// `||H - P(H)||_F`
pub fn residual_norm<T: Real, E: Entry<T>>(h: &Mat<E>, basis: &StringBasis) -> Result<T> {
    Ok(linalg::frobenius::<T, E>(split::<T, E>(h, basis)?.perp.as_ref()))
}

/// `||[a, b]||_F`
pub fn commutator_norm<T: Real, E: Entry<T>>(a: &Mat<E>, b: &Mat<E>) -> T {
    let ab = linalg::mul::<T, E>(a.as_ref(), b.as_ref());
    let ba = linalg::mul::<T, E>(b.as_ref(), a.as_ref());
    linalg::frobenius::<T, E>(linalg::sub::<T, E>(ab.as_ref(), ba.as_ref()).as_ref())
}

fn hermitize<T: Real, E: Entry<T>>(m: &Mat<E>) -> Mat<E> {
    let half = T::of(0.5);
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| (m[(i, j)] + m[(j, i)].conjugate()).scale(half))
}

/// Generator `S` for the current split plus the number of zeroed pairs.
pub fn generator<T: Real, E: Entry<T>>(sp: &Split<T, E>, degeneracy_floor: T) -> Result<(Mat<E>, usize)> {
    let Eigh { values, vectors } = linalg::eigh::<T, E>(sp.local.as_ref())?;
    let a = linalg::conjugate_by::<T, E>(sp.perp.as_ref(), vectors.as_ref());
    let scale = values.iter().fold(T::zero(), |m, v| m.max(v.abs()));
    let floor = degeneracy_floor * scale;
    let tiny = T::epsilon() * linalg::max_abs::<T, E>(sp.perp.as_ref());
    let d = values.len();
    let mut zeroed = 0;
    let mut sp_eig = Mat::<E>::zeros(d, d);
    for m in 0..d {
        for n in 0..d {
            if n == m {
                continue;
            }
            let gap = values[n] - values[m];
            if gap.abs() <= floor {
                if a[(n, m)].abs() > tiny {
                    zeroed += 1;
                }
                continue;
            }
            sp_eig[(n, m)] = a[(n, m)].scale(-T::one() / gap);
        }
    }
    let vs = linalg::mul::<T, E>(vectors.as_ref(), sp_eig.as_ref());
    Ok((linalg::mul_adj_rhs::<T, E>(vs.as_ref(), vectors.as_ref()), zeroed))
}

impl<T: Real, E: Entry<T>> SwState<T, E> {
    pub fn new(h: Mat<E>, basis: &StringBasis, alpha: T) -> Result<Self> {
        let d = basis.dimension();
        if h.nrows() != d || h.ncols() != d {
            return Err(Error::DimensionMismatch { expected: d, got: h.nrows() });
        }
        let residual_norm = residual_norm::<T, E>(&h, basis)?;
        Ok(Self {
            current_h: h,
            accumulated_u: Mat::identity(d, d),
            alpha,
            iteration: 0,
            residual_norm,
            degenerate_pairs: 0,
        })
    }

    fn rotate(&mut self, u: &Mat<E>, unitarity_tol: T) -> Result<()> {
        self.current_h = hermitize::<T, E>(&linalg::conjugate_by::<T, E>(self.current_h.as_ref(), u.as_ref()));
        self.accumulated_u = linalg::mul::<T, E>(self.accumulated_u.as_ref(), u.as_ref());
        if linalg::unitarity_defect::<T, E>(self.accumulated_u.as_ref()) > unitarity_tol {
            self.accumulated_u = linalg::lowdin_orthonormalize::<T, E>(self.accumulated_u.as_ref())?;
        }
        Ok(())
    }
}

/// One rotation step; the state is returned unchanged when `H_perp = 0`.
pub fn sw_step<T: Real, E: Entry<T>>(
    state: SwState<T, E>,
    basis: &StringBasis,
    settings: &SwSettings<T>,
) -> Result<SwState<T, E>> {
    let mut state = state;
    let sp = split::<T, E>(&state.current_h, basis)?;
    let (s, zeroed) = generator(&sp, settings.degeneracy_floor)?;
    state.degenerate_pairs = zeroed;
    state.iteration += 1;
    if linalg::max_abs::<T, E>(s.as_ref()) == T::zero() {
        state.residual_norm = linalg::frobenius::<T, E>(sp.perp.as_ref());
        return Ok(state);
    }
    let u = linalg::expm_anti_hermitian::<T, E>(s.as_ref(), state.alpha)?;
    state.rotate(&u, settings.unitarity_tol)?;
    state.residual_norm = residual_norm::<T, E>(&state.current_h, basis)?;
    Ok(state)
}

/// Random anti-Hermitian matrix with unit Frobenius norm.
fn random_anti_hermitian<T: Real, E: Entry<T>>(d: usize, seed: u64) -> Mat<E> {
    let mut rng = spectra::stream_rng(seed, 0x6b69_636b);
    let mut k = Mat::<E>::zeros(d, d);
    for j in 0..d {
        for i in 0..j {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = if E::IS_COMPLEX { rng.sample(StandardNormal) } else { 0.0 };
            let v = E::from_complex(Complex::new(T::of(re), T::of(im)));
            k[(i, j)] = v;
            k[(j, i)] = -v.conjugate();
        }
        if E::IS_COMPLEX {
            let im: f64 = rng.sample(StandardNormal);
            k[(j, j)] = E::from_complex(Complex::new(T::zero(), T::of(im)));
        }
    }
    let norm = linalg::frobenius::<T, E>(k.as_ref());
    Mat::from_fn(d, d, |i, j| k[(i, j)].scale(T::one() / norm))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SwTraceRow {
    pub iteration: usize,
    pub residual_norm: f64,
    /// `max_n |e_n(H) - e_n(H_initial)|`
    pub spectral_drift: f64,
}

#[derive(Clone, Debug)]
pub struct SwOutcome<T: Real, E: Entry<T>> {
    pub state: SwState<T, E>,
    /// Projection of the final `H` onto the basis.
    pub local: LocalHamiltonian<T>,
    pub converged: bool,
    pub stagnated: bool,
    /// Stopped because the generator vanished with a nonzero residual
    /// (`H_k` and `H_perp` commute up to the degeneracy floor).
    pub fixed_point: bool,
    pub kicked: bool,
    pub max_spectral_drift: T,
    pub max_unitarity_defect: T,
    pub total_degenerate_pairs: usize,
    pub trace: Vec<SwTraceRow>,
}

impl<T: Real, E: Entry<T>> SwOutcome<T, E> {
    /// `||[H_k, H_perp]||_F` of the final state.
    pub fn final_commutator(&self, basis: &StringBasis) -> Result<T> {
        let sp = split::<T, E>(&self.state.current_h, basis)?;
        Ok(commutator_norm::<T, E>(&sp.local, &sp.perp))
    }

    pub fn write_trace_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "iteration,residual_norm,spectral_drift")?;
        for r in &self.trace {
            writeln!(w, "{},{:e},{:e}", r.iteration, r.residual_norm, r.spectral_drift)?;
        }
        Ok(())
    }
}

fn drift<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |m, (&x, &y)| m.max((x - y).abs()))
}

/// Iterates [`sw_step`] until the residual falls below `residual_tol`, the
/// iteration budget runs out, or progress stalls.
pub fn sw_localize<T: Real, E: Entry<T>>(
    h: &Mat<E>,
    basis: &StringBasis,
    settings: &SwSettings<T>,
) -> Result<SwOutcome<T, E>> {
    settings.validate()?;
    let scale = linalg::max_abs::<T, E>(h.as_ref()).max(T::one());
    linalg::check_hermitian::<T, E>(h.as_ref(), T::of(1e-10) * scale)?;
    let initial = linalg::eigvalsh::<T, E>(h.as_ref())?;
    let mut state = SwState::new(hermitize::<T, E>(h), basis, settings.alpha)?;
    let mut trace = vec![SwTraceRow { iteration: 0, residual_norm: state.residual_norm.as_f64(), spectral_drift: 0.0 }];
    let mut history = vec![state.residual_norm];
    let mut max_drift = T::zero();
    let mut max_defect = T::zero();
    let mut total_degenerate = 0;
    let (mut stagnated, mut fixed_point, mut kicked) = (false, false, false);

    // No component in the subspace: rotate randomly so H_k has a spectrum.
    let c = split::<T, E>(&state.current_h, basis)?.couplings;
    let local_norm = (c.iter().map(|&x| x * x).sum::<T>() * T::of_usize(basis.dimension())).sqrt();
    if state.residual_norm >= settings.residual_tol && local_norm <= T::of(1e-12) * linalg::frobenius::<T, E>(h.as_ref()) {
        let k = random_anti_hermitian::<T, E>(basis.dimension(), settings.seed);
        let u = linalg::expm_anti_hermitian::<T, E>(k.as_ref(), settings.kick)?;
        state.rotate(&u, settings.unitarity_tol)?;
        state.residual_norm = residual_norm::<T, E>(&state.current_h, basis)?;
        kicked = true;
        log::debug!("sw: empty projection, applied random rotation of size {}", settings.kick);
    }

    while state.residual_norm >= settings.residual_tol && state.iteration < settings.max_iters {
        let before = state.current_h.clone();
        state = sw_step(state, basis, settings)?;
        total_degenerate += state.degenerate_pairs;
        if state.current_h == before {
            fixed_point = true;
            break;
        }
        let now = linalg::eigvalsh::<T, E>(state.current_h.as_ref())?;
        let dr = drift(&now, &initial);
        max_drift = max_drift.max(dr);
        max_defect = max_defect.max(linalg::unitarity_defect::<T, E>(state.accumulated_u.as_ref()));
        trace.push(SwTraceRow {
            iteration: state.iteration,
            residual_norm: state.residual_norm.as_f64(),
            spectral_drift: dr.as_f64(),
        });
        history.push(state.residual_norm);
        let w = settings.stagnation_window;
        if w > 0 && history.len() > w && history[history.len() - 1 - w] - state.residual_norm < settings.stagnation_tol {
            stagnated = true;
            break;
        }
    }
    let converged = state.residual_norm < settings.residual_tol;
    let sp = split::<T, E>(&state.current_h, basis)?;
    let local = LocalHamiltonian::new(basis.clone(), sp.couplings)?;
    Ok(SwOutcome {
        state,
        local,
        converged,
        stagnated: stagnated && !converged,
        fixed_point: fixed_point && !converged,
        kicked,
        max_spectral_drift: max_drift,
        max_unitarity_defect: max_defect,
        total_degenerate_pairs: total_degenerate,
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pauli::{BasisFlavor, PauliString};

    fn xxx() -> Mat<f64> {
        PauliString::parse(3, "X1*X2*X3").unwrap().to_dense::<f64, f64>().unwrap()
    }

    #[test]
    fn local_input_is_already_converged() {
        let basis = StringBasis::enumerate(3, BasisFlavor::Real2Local).unwrap();
        let h: Vec<f64> = (0..basis.len()).map(|i| (i as f64 * 0.37).sin()).collect();
        let m = LocalHamiltonian::new(basis.clone(), h.clone()).unwrap().materialize::<f64>().unwrap();
        let out = sw_localize(&m, &basis, &SwSettings::default()).unwrap();
        assert!(out.converged);
        assert_eq!(out.state.iteration, 0);
        for (a, b) in out.local.couplings().iter().zip(&h) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn commuting_split_gives_zero_generator() {
        // Z1 (local) and Z1*Z2*Z3 (non-local) commute.
        let basis = StringBasis::enumerate(3, BasisFlavor::Complex2Local).unwrap();
        let z1 = PauliString::parse(3, "Z1").unwrap().to_dense::<f64, f64>().unwrap();
        let zzz = PauliString::parse(3, "Z1*Z2*Z3").unwrap().to_dense::<f64, f64>().unwrap();
        let h = Mat::from_fn(8, 8, |i, j| 0.7 * z1[(i, j)] + 0.3 * zzz[(i, j)]);
        let sp = split::<f64, f64>(&h, &basis).unwrap();
        let (s, _) = generator(&sp, 1e-10).unwrap();
        assert_eq!(linalg::max_abs::<f64, f64>(s.as_ref()), 0.0);
        let state = SwState::new(h.clone(), &basis, 0.1).unwrap();
        let next = sw_step(state, &basis, &SwSettings::default()).unwrap();
        assert_eq!(next.current_h, h);
    }

    #[test]
    fn generator_is_anti_hermitian() {
        let basis = StringBasis::enumerate(3, BasisFlavor::Real2Local).unwrap();
        let h = spectra::sample_goe_dense::<f64>(3, 4).unwrap();
        let sp = split::<f64, f64>(&h, &basis).unwrap();
        let (s, _) = generator(&sp, 1e-10).unwrap();
        for i in 0..8 {
            for j in 0..8 {
                assert!((s[(i, j)] + s[(j, i)]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn xxx_first_step_reduces_residual() {
        let basis = StringBasis::enumerate(3, BasisFlavor::Complex2Local).unwrap();
        let settings = SwSettings { max_iters: 1, ..SwSettings::default() };
        let out = sw_localize(&xxx(), &basis, &settings).unwrap();
        assert!(out.kicked);
        assert_eq!(out.trace.len(), 2);
        let before = residual_norm::<f64, f64>(&xxx(), &basis).unwrap();
        assert!(out.state.residual_norm < before);
    }

    #[test]
    fn rejects_bad_alpha() {
        let basis = StringBasis::enumerate(3, BasisFlavor::Complex2Local).unwrap();
        let settings = SwSettings { alpha: 1.5, ..SwSettings::default() };
        assert!(sw_localize(&xxx(), &basis, &settings).is_err());
    }
}
