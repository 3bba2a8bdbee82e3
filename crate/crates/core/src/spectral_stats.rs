//! Spectral form factor `<|Tr e^{itH}|^2>` over an ensemble of spectra.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::spectra::Spectrum;

pub const DEFAULT_POINTS: usize = 200;
pub const DEFAULT_T_MIN: f64 = 1e-2;
pub const DEFAULT_T_MAX: f64 = 1e4;
/// Rise over the dip value that marks the ramp onset.
pub const ONSET_FACTOR: f64 = 1.5;
/// Half width, in grid points, of the moving average used by the onset
/// heuristic.
pub const ONSET_SMOOTHING: usize = 5;

/// `points` log-spaced times from `t_min` to `t_max` inclusive.
pub fn log_grid(t_min: f64, t_max: f64, points: usize) -> Result<Vec<f64>> {
    if !(t_min > 0.0 && t_max > t_min) || points < 2 {
        return Err(Error::InvalidArgument(format!("bad time grid [{t_min}, {t_max}] x {points}")));
    }
    let (a, b) = (t_min.ln(), t_max.ln());
    let step = (b - a) / (points - 1) as f64;
    Ok((0..points).map(|i| if i + 1 == points { t_max } else { (a + step * i as f64).exp() }).collect())
}

pub fn default_grid() -> Vec<f64> {
    log_grid(DEFAULT_T_MIN, DEFAULT_T_MAX, DEFAULT_POINTS).expect("static grid")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SffCurve {
    pub times: Vec<f64>,
    /// Raw ensemble average; `d^2` at `t = 0`.
    pub values: Vec<f64>,
    pub dimension: usize,
    pub n_realizations: usize,
}

impl SffCurve {
    /// Values divided by `d^2`, so that `t = 0` maps to 1.
    pub fn normalized(&self) -> Vec<f64> {
        let d2 = (self.dimension * self.dimension) as f64;
        self.values.iter().map(|v| v / d2).collect()
    }

    pub fn ramp_onset(&self) -> Option<f64> {
        ramp_onset(&self.times, &self.values)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "t,sff_raw,sff_normalized")?;
        for ((t, v), n) in self.times.iter().zip(&self.values).zip(self.normalized()) {
            writeln!(w, "{t:e},{v:e},{n:e}")?;
        }
        Ok(())
    }
}

/// `|sum_n e^{i t E_n}|^2` for one spectrum.
pub fn partition_modulus_sq<T: Real>(values: &[T], t: f64) -> f64 {
    let (mut re, mut im) = (0.0f64, 0.0f64);
    for e in values {
        let (s, c) = (t * e.as_f64()).sin_cos();
        re += c;
        im += s;
    }
    re * re + im * im
}

pub fn sff<T: Real>(spectra: &[Spectrum<T>], times: &[f64]) -> Result<SffCurve> {
    let first = spectra.first().ok_or_else(|| Error::InvalidArgument("empty ensemble".into()))?;
    let d = first.dimension();
    if let Some(bad) = spectra.iter().find(|s| s.dimension() != d) {
        return Err(Error::DimensionMismatch { expected: d, got: bad.dimension() });
    }
    if times.iter().any(|t| !t.is_finite()) {
        return Err(Error::NonFinite("time grid"));
    }
    let r = spectra.len() as f64;
    let values = times
        .par_iter()
        .map(|&t| spectra.iter().map(|s| partition_modulus_sq(s.values(), t)).sum::<f64>() / r)
        .collect();
    Ok(SffCurve { times: times.to_vec(), values, dimension: d, n_realizations: spectra.len() })
}

/// First time after the dip where the smoothed curve exceeds
/// [`ONSET_FACTOR`] times its value at the dip.
pub fn ramp_onset(times: &[f64], values: &[f64]) -> Option<f64> {
    let n = values.len();
    if n == 0 || times.len() != n {
        return None;
    }
    let smooth: Vec<f64> = (0..n)
        .map(|i| {
            let lo = i.saturating_sub(ONSET_SMOOTHING);
            let hi = (i + ONSET_SMOOTHING + 1).min(n);
            values[lo..hi].iter().sum::<f64>() / (hi - lo) as f64
        })
        .collect();
    let (dip, &min) = smooth.iter().enumerate().min_by(|a, b| a.1.partial_cmp(b.1).unwrap())?;
    (dip..n).find(|&i| smooth[i] > ONSET_FACTOR * min).map(|i| times[i])
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SffComparison {
    /// `max_t |ln(test / reference)|`
    pub max_log_ratio: f64,
    pub reference_onset: Option<f64>,
    pub test_onset: Option<f64>,
}

pub fn sff_compare(reference: &SffCurve, test: &SffCurve) -> Result<SffComparison> {
    Ok(SffComparison {
        max_log_ratio: max_log_ratio(reference, test, f64::NEG_INFINITY, f64::INFINITY)?,
        reference_onset: reference.ramp_onset(),
        test_onset: test.ramp_onset(),
    })
}

/// `max |ln(test / reference)|` over grid times in `[t_lo, t_hi]`.
pub fn max_log_ratio(reference: &SffCurve, test: &SffCurve, t_lo: f64, t_hi: f64) -> Result<f64> {
    if reference.times != test.times {
        return Err(Error::InvalidArgument("SFF curves use different time grids".into()));
    }
    let mut worst = 0.0f64;
    for ((&t, &a), &b) in reference.times.iter().zip(&reference.values).zip(&test.values) {
        if t < t_lo || t > t_hi {
            continue;
        }
        let r = if a == b { 0.0 } else { (b / a).ln().abs() };
        worst = worst.max(if r.is_nan() { f64::INFINITY } else { r });
    }
    Ok(worst)
}
