use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::synth::signed_bin;

/// `(1/N) Σ_t r(t) r(t)ᴴ` for one station.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleCovariance {
    pub matrix: DMatrix<Complex64>,
    pub snapshots: usize,
}

pub fn sample_autocov(r: &DMatrix<Complex64>) -> Result<SampleCovariance> {
    let (m, n) = r.shape();
    if n < m {
        return Err(Error::InsufficientData(format!(
            "{n} snapshots for a {m}-element covariance"
        )));
    }
    let mut c = r * r.adjoint() / Complex64::new(n as f64, 0.0);
    // exact Hermitian symmetry
    for i in 0..m {
        c[(i, i)].im = 0.0;
        for j in i + 1..m {
            let v = (c[(i, j)] + c[(j, i)].conj()) * 0.5;
            c[(i, j)] = v;
            c[(j, i)] = v.conj();
        }
    }
    Ok(SampleCovariance {
        matrix: c,
        snapshots: n,
    })
}

/// Cross-covariance `R_ij(τ) = (1/N) Σ_t r_i(t) r_j(t+τ)ᴴ` on a lag axis
/// `τ = u / (O f_s)`, `u = -U..=U`.
#[derive(Debug, Clone, PartialEq)]
pub struct LaggedCrossCov {
    pub pair: (usize, usize),
    pub oversample: usize,
    pub lag_step_s: f64,
    /// `U`: the axis spans `-U..=U` lag bins.
    pub max_bin: usize,
    pub values: Vec<DMatrix<Complex64>>,
}

impl LaggedCrossCov {
    pub fn num_lags(&self) -> usize {
        self.values.len()
    }

    pub fn lag_s(&self, index: usize) -> f64 {
        (index as f64 - self.max_bin as f64) * self.lag_step_s
    }

    pub fn max_lag_s(&self) -> f64 {
        self.max_bin as f64 * self.lag_step_s
    }

    /// Matrix at lag `bin` (signed).
    pub fn at_bin(&self, bin: i64) -> &DMatrix<Complex64> {
        &self.values[(bin + self.max_bin as i64) as usize]
    }

    /// The `(j, i)` sequence, obtained from `R_ji(-τ) = R_ij(τ)ᴴ`.
    pub fn reversed(&self) -> LaggedCrossCov {
        LaggedCrossCov {
            pair: (self.pair.1, self.pair.0),
            oversample: self.oversample,
            lag_step_s: self.lag_step_s,
            max_bin: self.max_bin,
            values: self.values.iter().rev().map(|v| v.adjoint()).collect(),
        }
    }

    /// Lag index (bin position) of the largest Frobenius norm.
    pub fn peak_index(&self) -> usize {
        let mut best = 0;
        let mut best_norm = f64::NEG_INFINITY;
        for (k, v) in self.values.iter().enumerate() {
            let n = v.norm();
            if n > best_norm {
                best_norm = n;
                best = k;
            }
        }
        best
    }

    /// Element-wise linear interpolation between the two bins around `tau_s`.
    pub fn at(&self, tau_s: f64) -> Result<DMatrix<Complex64>> {
        crosscov_at(self, tau_s)
    }
}

pub fn crosscov_at(lcc: &LaggedCrossCov, tau_s: f64) -> Result<DMatrix<Complex64>> {
    let pos = tau_s / lcc.lag_step_s + lcc.max_bin as f64;
    let last = (lcc.values.len() - 1) as f64;
    let eps = 1e-9;
    if !pos.is_finite() || pos < -eps || pos > last + eps {
        return Err(Error::LagOutOfRange {
            lag_s: tau_s,
            max_s: lcc.max_lag_s(),
        });
    }
    let pos = pos.clamp(0.0, last);
    let lo = pos.floor();
    let frac = pos - lo;
    let lo = lo as usize;
    if frac < eps || lo + 1 >= lcc.values.len() {
        return Ok(lcc.values[lo].clone());
    }
    if 1.0 - frac < eps {
        return Ok(lcc.values[lo + 1].clone());
    }
    let w = Complex64::new(frac, 0.0);
    Ok(&lcc.values[lo] * (Complex64::new(1.0, 0.0) - w) + &lcc.values[lo + 1] * w)
}

/// Smallest `2^a 3^b 5^c` that is at least `n`.
pub(crate) fn smooth_size(n: usize) -> usize {
    let mut k = n.max(1);
    loop {
        let mut r = k;
        for p in [2, 3, 5] {
            while r.is_multiple_of(p) {
                r /= p;
            }
        }
        if r == 1 {
            return k;
        }
        k += 1;
    }
}

/// Oversampled cross-covariance between every element of `r_i` and every
/// element of `r_j`, covering `|τ| ≤ max_lag_s`.
///
/// Rows are zero-padded past the largest lag so the spectral product yields
/// the linear (not circular) correlation; the product is then evaluated at
/// `O`-times finer lags by zero-extending the spectrum. Values at integer
/// sample lags are exact sums, normalized by `N`.
pub fn lagged_crosscov(
    r_i: &DMatrix<Complex64>,
    r_j: &DMatrix<Complex64>,
    f_s_hz: f64,
    oversample: usize,
    max_lag_s: f64,
    pair: (usize, usize),
) -> Result<LaggedCrossCov> {
    if oversample == 0 {
        return Err(Error::validation("oversample", "must be at least 1"));
    }
    if r_i.shape() != r_j.shape() {
        return Err(Error::Dimension(format!(
            "station records differ: {:?} vs {:?}",
            r_i.shape(),
            r_j.shape()
        )));
    }
    let (m, n) = r_i.shape();
    let max_bin = (max_lag_s * f_s_hz * oversample as f64 - 1e-9)
        .ceil()
        .max(0.0) as usize;
    let max_sample_lag = max_bin.div_ceil(oversample);
    if max_sample_lag >= n {
        return Err(Error::InsufficientData(format!(
            "lag window of {max_sample_lag} samples exceeds the {n}-sample record"
        )));
    }
    let nfft = smooth_size(n + max_sample_lag + 1);
    let big = oversample * nfft;

    let mut planner = FftPlanner::<f64>::new();
    let fwd_small = planner.plan_fft_forward(nfft);
    let fwd_big = planner.plan_fft_forward(big);

    let spectra = |r: &DMatrix<Complex64>| -> Vec<Vec<Complex64>> {
        (0..m)
            .map(|e| {
                let mut buf = vec![Complex64::new(0.0, 0.0); nfft];
                for (t, v) in r.row(e).iter().enumerate() {
                    buf[t] = *v;
                }
                fwd_small.process(&mut buf);
                buf
            })
            .collect()
    };
    let xs = spectra(r_i);
    let ys = spectra(r_j);

    let lags = 2 * max_bin + 1;
    let norm = 1.0 / (nfft as f64 * n as f64);
    let entries: Vec<Vec<Complex64>> = (0..m * m)
        .into_par_iter()
        .map_init(
            || Buffers::new(big, &fwd_big),
            |bufs, idx| {
                let (a, b) = (idx % m, idx / m);
                cross_lags(&xs[a], &ys[b], max_bin, norm, &fwd_big, bufs)
            },
        )
        .collect();

    let values = (0..lags)
        .map(|u| DMatrix::from_fn(m, m, |a, b| entries[b * m + a][u]))
        .collect();
    Ok(LaggedCrossCov {
        pair,
        oversample,
        lag_step_s: 1.0 / (oversample as f64 * f_s_hz),
        max_bin,
        values,
    })
}

struct Buffers {
    data: Vec<Complex64>,
    scratch: Vec<Complex64>,
}

impl Buffers {
    fn new(len: usize, fft: &Arc<dyn Fft<f64>>) -> Self {
        Self {
            data: vec![Complex64::new(0.0, 0.0); len],
            scratch: vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()],
        }
    }
}

fn cross_lags(
    x: &[Complex64],
    y: &[Complex64],
    max_bin: usize,
    norm: f64,
    fft: &Arc<dyn Fft<f64>>,
    bufs: &mut Buffers,
) -> Vec<Complex64> {
    let nfft = x.len();
    let big = bufs.data.len();
    bufs.data
        .iter_mut()
        .for_each(|v| *v = Complex64::new(0.0, 0.0));
    for k in 0..nfft {
        let c = x[k] * y[k].conj();
        if nfft.is_multiple_of(2) && k == nfft / 2 {
            // split the Nyquist bin across ±f_s/2
            bufs.data[nfft / 2] += c * 0.5;
            bufs.data[big - nfft / 2] += c * 0.5;
        } else {
            let s = signed_bin(k, nfft);
            bufs.data[s.rem_euclid(big as i64) as usize] = c;
        }
    }
    fft.process_with_scratch(&mut bufs.data, &mut bufs.scratch);
    (-(max_bin as i64)..=max_bin as i64)
        .map(|u| bufs.data[u.rem_euclid(big as i64) as usize] * norm)
        .collect()
}
