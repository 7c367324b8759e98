//! Received-signal synthesis: band-limited Gaussian emitters, per-station
//! fractional delays with carrier rotation, array response and receiver noise.

use std::f64::consts::PI;
use std::io::{Read, Write};

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::scenario::ScenarioConfig;
use crate::seed;

/// Signed DFT bin index: `0, 1, …, ⌈n/2⌉-1, -⌊n/2⌋, …, -1`.
pub(crate) fn signed_bin(k: usize, n: usize) -> i64 {
    if k < n.div_ceil(2) {
        k as i64
    } else {
        k as i64 - n as i64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SourceSignal {
    pub samples: Vec<Complex64>,
    pub bandwidth_hz: f64,
    pub f_s_hz: f64,
}

impl SourceSignal {
    pub fn mean_power(&self) -> f64 {
        mean_power(&self.samples)
    }
}

pub(crate) fn mean_power(x: &[Complex64]) -> f64 {
    x.iter().map(|v| v.norm_sqr()).sum::<f64>() / x.len() as f64
}

/// Complex white Gaussian noise confined to `|f| ≤ B/2`, scaled to unit mean power.
pub fn gen_bandlimited_wgn(
    n: usize,
    bandwidth_hz: f64,
    f_s_hz: f64,
    seed: u64,
) -> Result<SourceSignal> {
    if !(bandwidth_hz > 0.0 && bandwidth_hz <= f_s_hz / 2.0) {
        return Err(Error::validation(
            "bandwidth",
            format!("{bandwidth_hz} Hz outside (0, f_s/2 = {} Hz]", f_s_hz / 2.0),
        ));
    }
    if n == 0 {
        return Err(Error::InsufficientData("zero-length signal".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let half_band = bandwidth_hz / 2.0;
    let mut spec = vec![Complex64::new(0.0, 0.0); n];
    for (k, bin) in spec.iter_mut().enumerate() {
        let f = signed_bin(k, n) as f64 * f_s_hz / n as f64;
        if f.abs() <= half_band {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            *bin = Complex64::new(re, im);
        }
    }
    FftPlanner::new().plan_fft_inverse(n).process(&mut spec);
    let p = mean_power(&spec);
    if p == 0.0 {
        return Err(Error::InsufficientData(
            "no DFT bin falls inside the band".into(),
        ));
    }
    let scale = 1.0 / p.sqrt();
    spec.iter_mut().for_each(|v| *v *= scale);
    Ok(SourceSignal {
        samples: spec,
        bandwidth_hz,
        f_s_hz,
    })
}

/// Circular fractional delay by `tau_s` followed by the carrier rotation `e^{-j2πf_oτ}`.
pub fn apply_delay(
    samples: &[Complex64],
    tau_s: f64,
    f_s_hz: f64,
    f_o_hz: f64,
) -> Result<Vec<Complex64>> {
    let n = samples.len();
    let duration = n as f64 / f_s_hz;
    if tau_s.abs() >= duration / 4.0 {
        return Err(Error::validation(
            "delay",
            format!(
                "|τ| = {:e} s must be below a quarter of the {duration:e} s record",
                tau_s.abs()
            ),
        ));
    }
    let mut planner = FftPlanner::new();
    let mut buf = samples.to_vec();
    planner.plan_fft_forward(n).process(&mut buf);
    for (k, v) in buf.iter_mut().enumerate() {
        let f = signed_bin(k, n) as f64 * f_s_hz / n as f64;
        *v *= Complex64::from_polar(1.0, -2.0 * PI * f * tau_s);
    }
    planner.plan_fft_inverse(n).process(&mut buf);
    let carrier = Complex64::from_polar(1.0 / n as f64, -2.0 * PI * f_o_hz * tau_s);
    buf.iter_mut().for_each(|v| *v *= carrier);
    Ok(buf)
}

/// Multi-station snapshot record: one `M × N` matrix per station.
#[derive(Debug, Clone, PartialEq)]
pub struct ReceivedBatch {
    pub stations: Vec<DMatrix<Complex64>>,
    pub f_s_hz: f64,
    pub f_o_hz: f64,
    pub duration_s: f64,
    pub scenario_hash: u64,
    /// Per-element noise variance; zero for a noiseless batch.
    pub noise_variance: f64,
}

impl ReceivedBatch {
    pub fn num_stations(&self) -> usize {
        self.stations.len()
    }

    pub fn num_elements(&self) -> usize {
        self.stations[0].nrows()
    }

    pub fn num_samples(&self) -> usize {
        self.stations[0].ncols()
    }

    /// Round every sample through `f32`, the on-disk precision.
    pub fn quantized(&self) -> ReceivedBatch {
        let mut out = self.clone();
        for st in &mut out.stations {
            st.iter_mut()
                .for_each(|v| *v = Complex64::new(v.re as f32 as f64, v.im as f32 as f64));
        }
        out
    }

    pub fn scaled(&self, factor: Complex64) -> ReceivedBatch {
        let mut out = self.clone();
        for st in &mut out.stations {
            *st *= factor;
        }
        out
    }

    /// Stacked `LM × N` matrix, station-major.
    pub fn stacked(&self) -> DMatrix<Complex64> {
        let (l, m, n) = (self.num_stations(), self.num_elements(), self.num_samples());
        let mut y = DMatrix::zeros(l * m, n);
        for (i, st) in self.stations.iter().enumerate() {
            y.view_mut((i * m, 0), (m, n)).copy_from(st);
        }
        y
    }
}

/// Noiseless received signals for every station.
///
/// Each emitter contributes `α · √M · a_l(p) · s(t − τ_l)` so that one source
/// delivers unit power to every element; steering vectors themselves stay
/// unit-norm.
pub fn synthesize_received(scenario: &ScenarioConfig, seed: u64) -> Result<ReceivedBatch> {
    let n = scenario.num_samples();
    let geom = scenario.geometry();
    let l_count = scenario.stations.len();
    if l_count == 0 {
        return Err(Error::validation("stations", "no stations"));
    }
    let m = scenario.stations[0].num_elements;

    // Per source: its delayed waveform at every station.
    let delayed: Vec<Vec<Vec<Complex64>>> = scenario
        .sources
        .par_iter()
        .enumerate()
        .map(|(q, src)| {
            let sig = gen_bandlimited_wgn(
                n,
                src.bandwidth_hz,
                scenario.f_s_hz,
                seed::derive(seed, seed::TAG_SOURCE, q as u64),
            )?;
            (0..l_count)
                .map(|l| {
                    apply_delay(
                        &sig.samples,
                        geom.delay(l, &src.position),
                        scenario.f_s_hz,
                        scenario.f_o_hz,
                    )
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;

    let gain = (m as f64).sqrt();
    let mut stations = vec![DMatrix::<Complex64>::zeros(m, n); l_count];
    for (q, src) in scenario.sources.iter().enumerate() {
        for (l, r) in stations.iter_mut().enumerate() {
            let a = geom.steering(l, &src.position)?;
            let w = src.attenuation_at(l) * gain;
            let wave = &delayed[q][l];
            for (t, s) in wave.iter().enumerate() {
                let mut col = r.column_mut(t);
                for e in 0..m {
                    col[e] += w * a.0[e] * s;
                }
            }
        }
    }
    Ok(ReceivedBatch {
        stations,
        f_s_hz: scenario.f_s_hz,
        f_o_hz: scenario.f_o_hz,
        duration_s: scenario.duration_s,
        scenario_hash: scenario.content_hash(),
        noise_variance: 0.0,
    })
}

/// Add circular complex Gaussian noise of variance `10^(-snr_db/10)` per element.
/// `snr_db = +inf` leaves the batch untouched.
pub fn add_noise(mut batch: ReceivedBatch, snr_db: f64, seed: u64) -> ReceivedBatch {
    if snr_db == f64::INFINITY {
        return batch;
    }
    let variance = 10f64.powf(-snr_db / 10.0);
    let sigma = (variance / 2.0).sqrt();
    batch
        .stations
        .par_iter_mut()
        .enumerate()
        .for_each(|(l, st)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed::derive(seed, seed::TAG_NOISE, l as u64));
            for v in st.iter_mut() {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                *v += Complex64::new(sigma * re, sigma * im);
            }
        });
    batch.noise_variance += variance;
    batch
}

/// Synthesis followed by noise at the scenario's SNR.
pub fn simulate(scenario: &ScenarioConfig, seed: u64) -> Result<ReceivedBatch> {
    Ok(add_noise(
        synthesize_received(scenario, seed)?,
        scenario.snr_db,
        seed,
    ))
}

// ---------------------------------------------------------------------------
// CCDP batch file
// ---------------------------------------------------------------------------

pub const BATCH_MAGIC: &[u8; 4] = b"CCDP";
pub const BATCH_VERSION: u32 = 1;

/// Little-endian layout: magic, version, L, M, N (u64), f_s, f_o, σ² (f64),
/// then for each station, for each element, N interleaved `f32` (re, im) pairs.
pub fn write_batch<W: Write>(batch: &ReceivedBatch, mut w: W) -> Result<()> {
    let (l, m, n) = (
        batch.num_stations(),
        batch.num_elements(),
        batch.num_samples(),
    );
    let mut buf = Vec::with_capacity(44 + l * m * n * 8);
    buf.extend_from_slice(BATCH_MAGIC);
    buf.extend_from_slice(&BATCH_VERSION.to_le_bytes());
    buf.extend_from_slice(&(l as u32).to_le_bytes());
    buf.extend_from_slice(&(m as u32).to_le_bytes());
    buf.extend_from_slice(&(n as u64).to_le_bytes());
    buf.extend_from_slice(&batch.f_s_hz.to_le_bytes());
    buf.extend_from_slice(&batch.f_o_hz.to_le_bytes());
    buf.extend_from_slice(&batch.noise_variance.to_le_bytes());
    for st in &batch.stations {
        for e in 0..m {
            for t in 0..n {
                let v = st[(e, t)];
                buf.extend_from_slice(&(v.re as f32).to_le_bytes());
                buf.extend_from_slice(&(v.im as f32).to_le_bytes());
            }
        }
    }
    w.write_all(&buf)?;
    Ok(())
}

pub fn read_batch<R: Read>(mut r: R) -> Result<ReceivedBatch> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    let mut cur = Cursor {
        bytes: &bytes,
        pos: 0,
    };
    if cur.take(4)? != BATCH_MAGIC {
        return Err(Error::Format("bad magic, expected \"CCDP\"".into()));
    }
    let version = cur.u32()?;
    if version != BATCH_VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let l = cur.u32()? as usize;
    let m = cur.u32()? as usize;
    let n = cur.u64()? as usize;
    let f_s_hz = cur.f64()?;
    let f_o_hz = cur.f64()?;
    let noise_variance = cur.f64()?;
    if l == 0 || m == 0 || n == 0 {
        return Err(Error::Format("empty dimensions".into()));
    }
    let expected = l
        .checked_mul(m)
        .and_then(|v| v.checked_mul(n))
        .and_then(|v| v.checked_mul(8))
        .ok_or_else(|| Error::Format("dimension overflow".into()))?;
    if bytes.len() - cur.pos != expected {
        return Err(Error::Format(format!(
            "payload is {} bytes, header implies {expected}",
            bytes.len() - cur.pos
        )));
    }
    let mut stations = Vec::with_capacity(l);
    for _ in 0..l {
        let mut st = DMatrix::zeros(m, n);
        for e in 0..m {
            for t in 0..n {
                let re = cur.f32()? as f64;
                let im = cur.f32()? as f64;
                st[(e, t)] = Complex64::new(re, im);
            }
        }
        stations.push(st);
    }
    Ok(ReceivedBatch {
        stations,
        f_s_hz,
        f_o_hz,
        duration_s: n as f64 / f_s_hz,
        scenario_hash: 0,
        noise_variance,
    })
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, k: usize) -> Result<&'a [u8]> {
        let end = self.pos + k;
        if end > self.bytes.len() {
            return Err(Error::Format("truncated header".into()));
        }
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn f32(&mut self) -> Result<f32> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}
