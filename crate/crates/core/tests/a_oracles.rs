//! Library routines checked against independent textbook implementations.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use twolocal::localizer::{self, cost_of_values, diagonal_energies, trial_spectrum};
use twolocal::spectral_stats::{partition_modulus_sq, sff};
use twolocal::{pair_trace, Axis, BasisFlavor, LocalHamiltonian, LocalizationProblem, PauliString, Spectrum, StringBasis};

type Dense = Vec<Vec<Complex64>>;

fn pauli_2x2(a: Option<Axis>) -> [[Complex64; 2]; 2] {
    let (o, l, i) = (Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0), Complex64::new(0.0, 1.0));
    match a {
        None => [[l, o], [o, l]],
        Some(Axis::X) => [[o, l], [l, o]],
        Some(Axis::Y) => [[o, -i], [i, o]],
        Some(Axis::Z) => [[l, o], [o, -l]],
    }
}

/// Kronecker product with site 0 as the leftmost factor, times `i^phase`.
fn kron_string(s: &PauliString) -> Dense {
    let n = s.n_qubits() as usize;
    let mut m: Dense = vec![vec![Complex64::new(1.0, 0.0)]];
    for site in 0..n {
        let p = pauli_2x2(s.factor(site));
        let d = m.len();
        let mut next = vec![vec![Complex64::new(0.0, 0.0); 2 * d]; 2 * d];
        for r in 0..d {
            for c in 0..d {
                for a in 0..2 {
                    for b in 0..2 {
                        next[2 * r + a][2 * c + b] = m[r][c] * p[a][b];
                    }
                }
            }
        }
        m = next;
    }
    let phase = Complex64::new(0.0, 1.0).powi(s.phase_pow() as i32);
    m.iter().map(|row| row.iter().map(|x| x * phase).collect()).collect()
}

fn matmul(a: &Dense, b: &Dense) -> Dense {
    let d = a.len();
    (0..d).map(|r| (0..d).map(|c| (0..d).map(|k| a[r][k] * b[k][c]).sum()).collect()).collect()
}

fn trace(a: &Dense) -> Complex64 {
    (0..a.len()).map(|i| a[i][i]).sum()
}

/// Cyclic Jacobi eigen-decomposition of a real symmetric matrix.
/// Returns ascending eigenvalues and the eigenvectors as columns.
fn jacobi(mut a: Vec<Vec<f64>>) -> (Vec<f64>, Vec<Vec<f64>>) {
    let d = a.len();
    let mut v: Vec<Vec<f64>> = (0..d).map(|i| (0..d).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
    for _sweep in 0..100 {
        let off: f64 = (0..d).flat_map(|i| (0..d).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| a[i][j] * a[i][j]).sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..d {
            for q in p + 1..d {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..d {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..d {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for k in 0..d {
                    let (vkp, vkq) = (v[k][p], v[k][q]);
                    v[k][p] = c * vkp - s * vkq;
                    v[k][q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&i, &j| a[i][i].total_cmp(&a[j][j]));
    let vals = order.iter().map(|&i| a[i][i]).collect();
    let vecs = (0..d).map(|r| order.iter().map(|&i| v[r][i]).collect()).collect();
    (vals, vecs)
}

fn dense_real(basis: &StringBasis, h: &[f64]) -> Vec<Vec<f64>> {
    let d = basis.dimension();
    let mut m = vec![vec![0.0; d]; d];
    for (s, &c) in basis.strings().iter().zip(h) {
        let k = kron_string(s);
        for r in 0..d {
            for col in 0..d {
                assert!(k[r][col].im.abs() < 1e-15, "real basis produced an imaginary entry");
                m[r][col] += c * k[r][col].re;
            }
        }
    }
    m
}

fn random_vec(len: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..len).map(|_| rng.random_range(-1.0..1.0)).collect()
}

#[test]
fn dense_strings_match_kronecker_products() {
    for n in 1..=4u32 {
        let basis = StringBasis::enumerate(n, BasisFlavor::Complex2Local).unwrap();
        for s in basis.strings() {
            let lib = s.to_dense::<f64, Complex64>().unwrap();
            let oracle = kron_string(s);
            for r in 0..s.dimension() {
                for c in 0..s.dimension() {
                    assert!((lib[(r, c)] - oracle[r][c]).norm() < 1e-15, "{s} at ({r},{c})");
                }
            }
        }
    }
}

#[test]
fn string_products_match_matrix_products() {
    let n = 3;
    let basis = StringBasis::enumerate(n, BasisFlavor::Complex2Local).unwrap();
    for a in basis.strings() {
        for b in basis.strings().iter().step_by(5) {
            let lib = kron_string(&a.product(b).unwrap());
            let oracle = matmul(&kron_string(a), &kron_string(b));
            for r in 0..8 {
                for c in 0..8 {
                    assert!((lib[r][c] - oracle[r][c]).norm() < 1e-14, "{a} * {b}");
                }
            }
        }
    }
}

#[test]
fn pair_traces_match_dense_traces() {
    let basis = StringBasis::enumerate(3, BasisFlavor::Complex2Local).unwrap();
    for a in basis.strings() {
        for b in basis.strings() {
            let lib: f64 = pair_trace(a, b).unwrap();
            let oracle = trace(&matmul(&kron_string(a), &kron_string(b))).re;
            assert!((lib - oracle).abs() < 1e-12, "{a} {b}");
        }
    }
}

#[test]
fn trial_spectrum_matches_jacobi() {
    for n in 2..=5u32 {
        for flavor in [BasisFlavor::Real2Local, BasisFlavor::OneLocalReal, BasisFlavor::ZOnly2Local] {
            let basis = StringBasis::enumerate(n, flavor).unwrap();
            let h = random_vec(basis.len(), n as u64 * 31 + basis.len() as u64);
            let lib = trial_spectrum(&basis, &h, true).unwrap();
            let (oracle, _) = jacobi(dense_real(&basis, &h));
            for (x, y) in lib.values().iter().zip(&oracle) {
                assert!((x - y).abs() < 1e-10, "N={n} {flavor}: {x} vs {y}");
            }
        }
    }
}

#[test]
fn complex_trial_spectrum_matches_hermitian_embedding() {
    // A Hermitian H = A + iB has the spectrum of [[A, -B], [B, A]], each
    // eigenvalue doubled.
    let n = 3;
    let basis = StringBasis::enumerate(n, BasisFlavor::Complex2Local).unwrap();
    let h = random_vec(basis.len(), 99);
    let d = basis.dimension();
    let mut m: Dense = vec![vec![Complex64::new(0.0, 0.0); d]; d];
    for (s, &c) in basis.strings().iter().zip(&h) {
        let k = kron_string(s);
        for r in 0..d {
            for col in 0..d {
                m[r][col] += k[r][col] * c;
            }
        }
    }
    let mut big = vec![vec![0.0; 2 * d]; 2 * d];
    for r in 0..d {
        for c in 0..d {
            big[r][c] = m[r][c].re;
            big[r + d][c + d] = m[r][c].re;
            big[r][c + d] = -m[r][c].im;
            big[r + d][c] = m[r][c].im;
        }
    }
    let (doubled, _) = jacobi(big);
    let lib = trial_spectrum(&basis, &h, true).unwrap();
    for (i, x) in lib.values().iter().enumerate() {
        assert!((x - doubled[2 * i]).abs() < 1e-10);
        assert!((x - doubled[2 * i + 1]).abs() < 1e-10);
    }
}

#[test]
fn diagonal_energies_match_dense_diagonal() {
    for n in 2..=6u32 {
        let basis = StringBasis::enumerate(n, BasisFlavor::ZOnly2Local).unwrap();
        let h = random_vec(basis.len(), 7 + n as u64);
        let e = diagonal_energies(&basis, &h).unwrap();
        let m = dense_real(&basis, &h);
        for (i, x) in e.iter().enumerate() {
            assert!((x - m[i][i]).abs() < 1e-13);
        }
    }
}

#[test]
fn projection_recovers_couplings() {
    let basis = StringBasis::enumerate(3, BasisFlavor::Complex2Local).unwrap();
    let h = random_vec(basis.len(), 5);
    let op = LocalHamiltonian::new(basis.clone(), h.clone()).unwrap();
    let dense = op.materialize::<Complex64>().unwrap();
    let back = LocalHamiltonian::<f64>::from_projection(dense.as_ref(), basis).unwrap();
    for (a, b) in back.couplings().iter().zip(&h) {
        assert!((a - b).abs() < 1e-14);
    }
}

#[test]
fn cost_matches_sorted_pairing() {
    let a: [f64; 4] = [3.0, -1.0, 0.5, 2.0];
    let b = [0.0, 1.0, -2.0, 4.0];
    // sorted: [-1, 0.5, 2, 3] against [-2, 0, 1, 4]
    let expected = (1.0 + 0.25 + 1.0 + 1.0) / 8.0;
    let (sa, sb) = (Spectrum::from_values(a.to_vec()).unwrap(), Spectrum::from_values(b.to_vec()).unwrap());
    assert!((localizer::cost(&sa, &sb).unwrap() - expected).abs() < 1e-15);
    assert!(cost_of_values(&a, &b).is_err());
}

#[test]
fn gradient_matches_hellmann_feynman() {
    for n in 2..=4u32 {
        let basis = StringBasis::enumerate(n, BasisFlavor::Real2Local).unwrap();
        let d = basis.dimension();
        let target = Spectrum::new(n, random_vec(d, 100 + n as u64)).unwrap();
        let mean = target.mean();
        let mut centered: Vec<f64> = target.values().iter().map(|x| x - mean).collect();
        centered.sort_by(f64::total_cmp);
        let problem = LocalizationProblem::new(target, basis.clone()).unwrap();
        let h = random_vec(basis.len(), 200 + n as u64);
        let (c, g) = localizer::objective_and_gradient(&h, &problem).unwrap();

        let (e, v) = jacobi(dense_real(&basis, &h));
        let oracle_cost: f64 = e.iter().zip(&centered).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / (2.0 * d as f64);
        assert!((c - oracle_cost).abs() < 1e-12, "cost {c} vs {oracle_cost}");
        for (k, s) in basis.strings().iter().enumerate() {
            let t = kron_string(s);
            let mut acc = 0.0;
            for m in 0..d {
                let mut expect = 0.0;
                for r in 0..d {
                    for col in 0..d {
                        expect += v[r][m] * t[r][col].re * v[col][m];
                    }
                }
                acc += (e[m] - centered[m]) * expect;
            }
            let oracle = acc / d as f64;
            assert!((g[k] - oracle).abs() < 1e-10, "N={n} {s}: {} vs {oracle}", g[k]);
        }
    }
}

#[test]
fn two_qubit_spectra_are_exact() {
    let basis = StringBasis::custom(2, vec![PauliString::parse(2, "Z1*Z2").unwrap()]).unwrap();
    let s = trial_spectrum(&basis, &[0.7], false).unwrap();
    assert_eq!(s.values(), &[-0.7, -0.7, 0.7, 0.7]);
    let xz = StringBasis::custom(1, vec![PauliString::parse(1, "X1").unwrap(), PauliString::parse(1, "Z1").unwrap()])
        .unwrap();
    let s = trial_spectrum(&xz, &[1.0, 1.0], true).unwrap();
    assert!((s.values()[1] - 2f64.sqrt()).abs() < 1e-14);
    assert!((s.values()[0] + 2f64.sqrt()).abs() < 1e-14);
}

#[test]
fn form_factor_matches_cosine_double_sum() {
    let e = random_vec(16, 3);
    let spectra = [Spectrum::new(4, e.clone()).unwrap()];
    let times = [0.0, 0.3, 2.0, 17.5, 400.0];
    let curve = sff(&spectra, &times).unwrap();
    for (i, &t) in times.iter().enumerate() {
        let mut oracle = 0.0;
        for a in &e {
            for b in &e {
                oracle += (t * (a - b)).cos();
            }
        }
        assert!((curve.values[i] - oracle).abs() < 1e-9 * oracle.abs().max(1.0), "t={t}");
        assert!((partition_modulus_sq(&e, t) - oracle).abs() < 1e-9 * oracle.abs().max(1.0));
    }
}
