//! BFGS with a strong Wolfe line search.
//!
//! Near machine precision the sufficient-decrease test becomes meaningless
//! (function differences are rounding noise), so the line search also
//! accepts points satisfying the approximate Wolfe conditions of Hager and
//! Zhang, provided the objective did not increase.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// A differentiable objective.
pub trait Objective<T: Real> {
    fn dim(&self) -> usize;
    /// Returns the value at `x` and writes the gradient into `grad`.
    fn evaluate(&mut self, x: &[T], grad: &mut [T]) -> Result<T>;
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Real"))]
pub struct BfgsOptions<T: Real> {
    pub max_iterations: usize,
    /// Stop once `||grad||_inf` falls below this.
    pub gradient_tolerance: T,
    pub c1: T,
    pub c2: T,
    pub max_line_search_evals: usize,
}

impl<T: Real> Default for BfgsOptions<T> {
    fn default() -> Self {
        Self {
            max_iterations: 1000,
            gradient_tolerance: T::of(1e-10),
            c1: T::of(1e-4),
            c2: T::of(0.9),
            max_line_search_evals: 40,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    GradientTolerance,
    MaxIterations,
    LineSearchFailed,
}

#[derive(Clone, Debug)]
pub struct BfgsOutcome<T> {
    pub x: Vec<T>,
    pub value: T,
    pub gradient: Vec<T>,
    pub gradient_norm: T,
    pub iterations: usize,
    pub evaluations: usize,
    /// Objective at the start and after every accepted step.
    pub history: Vec<T>,
    pub termination: Termination,
}

impl<T> BfgsOutcome<T> {
    pub fn converged(&self) -> bool {
        self.termination == Termination::GradientTolerance
    }
}

fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

pub(crate) fn inf_norm<T: Real>(a: &[T]) -> T {
    a.iter().fold(T::zero(), |m, v| m.max(v.abs()))
}

#[derive(Clone)]
struct Point<T> {
    alpha: T,
    f: T,
    d: T,
    x: Vec<T>,
    g: Vec<T>,
}

struct Search<'a, T: Real, O: Objective<T> + ?Sized> {
    obj: &'a mut O,
    opts: &'a BfgsOptions<T>,
    x: &'a [T],
    p: &'a [T],
    f0: T,
    d0: T,
    evals: usize,
    best: Option<Point<T>>,
}

impl<T: Real, O: Objective<T> + ?Sized> Search<'_, T, O> {
    fn eval(&mut self, alpha: T) -> Result<Point<T>> {
        let x: Vec<T> = self.x.iter().zip(self.p).map(|(&xi, &pi)| xi + alpha * pi).collect();
        let mut g = vec![T::zero(); x.len()];
        self.evals += 1;
        let f = match self.obj.evaluate(&x, &mut g) {
            Ok(f) => f,
            Err(Error::NonFinite(_)) | Err(Error::Eigen) => T::infinity(),
            Err(e) => return Err(e),
        };
        let d = dot(&g, self.p);
        let pt = Point { alpha, f, d, x, g };
        if pt.f.is_finite() && pt.d.is_finite() && pt.f < self.best.as_ref().map_or(self.f0, |b| b.f) {
            self.best = Some(pt.clone());
        }
        Ok(pt)
    }

    fn finite(pt: &Point<T>) -> bool {
        pt.f.is_finite() && pt.d.is_finite()
    }

    fn armijo(&self, pt: &Point<T>) -> bool {
        pt.f <= self.f0 + self.opts.c1 * pt.alpha * self.d0
    }

    fn acceptable(&self, pt: &Point<T>) -> bool {
        if !Self::finite(pt) {
            return false;
        }
        let (c1, c2) = (self.opts.c1, self.opts.c2);
        let strong = self.armijo(pt) && pt.d.abs() <= -c2 * self.d0;
        let two = T::of(2.0);
        let approximate =
            pt.f <= self.f0 && pt.d >= c2 * self.d0 && pt.d <= (two * c1 - T::one()) * self.d0;
        strong || approximate
    }

    fn run(&mut self, alpha0: T) -> Result<Option<Point<T>>> {
        let mut prev = Point { alpha: T::zero(), f: self.f0, d: self.d0, x: self.x.to_vec(), g: Vec::new() };
        let mut alpha = alpha0;
        let max_alpha = alpha0 * T::of(1e10);
        while self.evals < self.opts.max_line_search_evals {
            let cur = self.eval(alpha)?;
            if !Self::finite(&cur) {
                alpha = prev.alpha + (alpha - prev.alpha) * T::of(0.25);
                continue;
            }
            if self.acceptable(&cur) {
                return Ok(Some(cur));
            }
            if !self.armijo(&cur) || (prev.alpha > T::zero() && cur.f >= prev.f) {
                return self.zoom(prev, cur);
            }
            if cur.d >= T::zero() {
                return self.zoom(cur, prev);
            }
            if alpha >= max_alpha {
                break;
            }
            prev = cur;
            alpha = alpha * T::of(2.0);
        }
        Ok(self.best.take())
    }

    fn interpolate(lo: &Point<T>, hi: &Point<T>) -> T {
        let (a0, a1) = (lo.alpha, hi.alpha);
        let three = T::of(3.0);
        let two = T::of(2.0);
        let d1 = lo.d + hi.d - three * (lo.f - hi.f) / (a0 - a1);
        let disc = d1 * d1 - lo.d * hi.d;
        let mid = (a0 + a1) / two;
        if !(disc >= T::zero()) {
            return mid;
        }
        let d2 = if a1 > a0 { disc.sqrt() } else { -disc.sqrt() };
        let a = a1 - (a1 - a0) * (hi.d + d2 - d1) / (hi.d - lo.d + two * d2);
        let (lo_b, hi_b) = if a0 < a1 { (a0, a1) } else { (a1, a0) };
        let margin = (hi_b - lo_b) * T::of(0.1);
        if a.is_finite() {
            a.max(lo_b + margin).min(hi_b - margin)
        } else {
            mid
        }
    }

    fn zoom(&mut self, mut lo: Point<T>, mut hi: Point<T>) -> Result<Option<Point<T>>> {
        while self.evals < self.opts.max_line_search_evals {
            let width = (hi.alpha - lo.alpha).abs();
            if width <= T::epsilon() * lo.alpha.abs().max(hi.alpha.abs()) {
                break;
            }
            let alpha = if Self::finite(&hi) { Self::interpolate(&lo, &hi) } else { (lo.alpha + hi.alpha) / T::of(2.0) };
            let cur = self.eval(alpha)?;
            if self.acceptable(&cur) {
                return Ok(Some(cur));
            }
            if !Self::finite(&cur) || !self.armijo(&cur) || cur.f >= lo.f {
                hi = cur;
            } else {
                if cur.d * (hi.alpha - lo.alpha) >= T::zero() {
                    hi = lo;
                }
                lo = cur;
            }
        }
        Ok(self.best.take())
    }
}

/// Dense inverse-Hessian approximation, row-major.
struct InverseHessian<T> {
    m: usize,
    h: Vec<T>,
}

impl<T: Real> InverseHessian<T> {
    fn scaled_identity(m: usize, gamma: T) -> Self {
        let mut h = vec![T::zero(); m * m];
        for i in 0..m {
            h[i * m + i] = gamma;
        }
        Self { m, h }
    }

    fn apply(&self, v: &[T]) -> Vec<T> {
        (0..self.m).map(|i| dot(&self.h[i * self.m..(i + 1) * self.m], v)).collect()
    }

    fn update(&mut self, s: &[T], y: &[T], sy: T) {
        let m = self.m;
        let rho = T::one() / sy;
        let hy = self.apply(y);
        let yhy = dot(y, &hy);
        let c = rho * rho * yhy + rho;
        for i in 0..m {
            let row = &mut self.h[i * m..(i + 1) * m];
            for j in 0..m {
                row[j] += c * s[i] * s[j] - rho * (hy[i] * s[j] + s[i] * hy[j]);
            }
        }
    }
}

/// Minimizes `obj` from `x0`. The returned point is the best iterate.
pub fn minimize<T: Real, O: Objective<T> + ?Sized>(
    obj: &mut O,
    x0: Vec<T>,
    opts: &BfgsOptions<T>,
) -> Result<BfgsOutcome<T>> {
    let m = obj.dim();
    if x0.len() != m {
        return Err(Error::DimensionMismatch { expected: m, got: x0.len() });
    }
    if x0.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("initial point"));
    }
    let mut x = x0;
    let mut g = vec![T::zero(); m];
    let mut f = obj.evaluate(&x, &mut g)?;
    if !f.is_finite() {
        return Err(Error::NonFinite("objective at initial point"));
    }
    let mut evaluations = 1;
    let mut history = vec![f];
    let mut hinv: Option<InverseHessian<T>> = None;
    let mut iterations = 0;
    let termination = loop {
        if inf_norm(&g) < opts.gradient_tolerance {
            break Termination::GradientTolerance;
        }
        if iterations >= opts.max_iterations {
            break Termination::MaxIterations;
        }
        let mut p: Vec<T> = match &hinv {
            Some(h) => h.apply(&g).into_iter().map(|v| -v).collect(),
            None => g.iter().map(|&v| -v).collect(),
        };
        let mut d0 = dot(&g, &p);
        if !(d0 < T::zero()) {
            hinv = None;
            p = g.iter().map(|&v| -v).collect();
            d0 = dot(&g, &p);
        }
        let steepest = hinv.is_none();
        let mut search = Search { obj: &mut *obj, opts, x: &x, p: &p, f0: f, d0, evals: 0, best: None };
        let found = search.run(T::one())?;
        evaluations += search.evals;
        let Some(pt) = found else {
            if steepest {
                break Termination::LineSearchFailed;
            }
            hinv = None;
            continue;
        };
        let s: Vec<T> = pt.x.iter().zip(&x).map(|(&a, &b)| a - b).collect();
        let y: Vec<T> = pt.g.iter().zip(&g).map(|(&a, &b)| a - b).collect();
        let sy = dot(&s, &y);
        let yy = dot(&y, &y);
        let ss = dot(&s, &s);
        if sy > T::epsilon() * (ss * yy).sqrt() && sy > T::zero() {
            let h = hinv.get_or_insert_with(|| InverseHessian::scaled_identity(m, sy / yy));
            h.update(&s, &y, sy);
        }
        x = pt.x;
        g = pt.g;
        f = pt.f;
        history.push(f);
        iterations += 1;
    };
    Ok(BfgsOutcome {
        gradient_norm: inf_norm(&g),
        x,
        value: f,
        gradient: g,
        iterations,
        evaluations,
        history,
        termination,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Rosenbrock;

    impl Objective<f64> for Rosenbrock {
        fn dim(&self) -> usize {
            2
        }
        fn evaluate(&mut self, x: &[f64], g: &mut [f64]) -> Result<f64> {
            let (a, b) = (x[0], x[1]);
            g[0] = -2.0 * (1.0 - a) - 400.0 * a * (b - a * a);
            g[1] = 200.0 * (b - a * a);
            Ok((1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2))
        }
    }

    struct Quadratic(Vec<f64>);

    impl Objective<f64> for Quadratic {
        fn dim(&self) -> usize {
            self.0.len()
        }
        fn evaluate(&mut self, x: &[f64], g: &mut [f64]) -> Result<f64> {
            let mut f = 0.0;
            for i in 0..x.len() {
                g[i] = self.0[i] * x[i];
                f += 0.5 * self.0[i] * x[i] * x[i];
            }
            Ok(f)
        }
    }

    #[test]
    fn rosenbrock_converges() {
        let opts = BfgsOptions { max_iterations: 500, ..Default::default() };
        let out = minimize(&mut Rosenbrock, vec![-1.2, 1.0], &opts).unwrap();
        assert!(out.converged(), "{:?}", out.termination);
        assert!((out.x[0] - 1.0).abs() < 1e-8 && (out.x[1] - 1.0).abs() < 1e-8);
        assert!(out.history.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn ill_conditioned_quadratic() {
        let diag: Vec<f64> = (0..20).map(|i| 10f64.powf(i as f64 / 5.0)).collect();
        let mut q = Quadratic(diag);
        let out = minimize(&mut q, vec![1.0; 20], &BfgsOptions { max_iterations: 200, ..Default::default() }).unwrap();
        assert!(out.converged());
        assert!(out.value < 1e-18);
    }

    #[test]
    fn already_at_minimum() {
        let mut q = Quadratic(vec![1.0, 2.0]);
        let out = minimize(&mut q, vec![0.0, 0.0], &BfgsOptions::default()).unwrap();
        assert_eq!(out.iterations, 0);
        assert!(out.converged());
    }

    #[test]
    fn rejects_bad_start() {
        let mut q = Quadratic(vec![1.0]);
        assert!(minimize(&mut q, vec![f64::NAN], &BfgsOptions::default()).is_err());
        assert!(minimize(&mut q, vec![1.0, 2.0], &BfgsOptions::default()).is_err());
    }
}
