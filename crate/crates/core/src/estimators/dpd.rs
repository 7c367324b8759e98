use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::scenario::{Geometry, Position};
use crate::synth::{signed_bin, ReceivedBatch};
use crate::xcov::{herm_eig, signal_noise_split, SubspacePair};

/// Minimum number of DFT bins per channel.
const MIN_BINS: usize = 8;

/// Channels whose dominant eigenvalue falls below this fraction of the
/// strongest channel's hold no signal, only round-off, and are dropped.
pub const OCCUPANCY_GATE: f64 = 1e-6;

/// One frequency channel of the subband decomposition.
#[derive(Debug, Clone)]
pub struct DpdChannel {
    /// Power-weighted mean frequency of the channel, relative to the carrier.
    pub freq_offset_hz: f64,
    pub subspace: SubspacePair,
}

#[derive(Debug, Clone)]
pub struct DpdContext {
    pub geometry: Geometry,
    pub channels: Vec<DpdChannel>,
}

impl DpdContext {
    pub fn build(
        batch: &ReceivedBatch,
        geometry: Geometry,
        k: usize,
        num_sources: usize,
    ) -> Result<Self> {
        Ok(Self {
            geometry,
            channels: dpd_channelize(batch, k, num_sources)?,
        })
    }
}

/// DFT of every element stream over the whole record.
fn element_spectra(batch: &ReceivedBatch) -> DMatrix<Complex64> {
    let y = batch.stacked();
    let (lm, n) = y.shape();
    let fft = FftPlanner::new().plan_fft_forward(n);
    let mut spectra = DMatrix::<Complex64>::zeros(lm, n);
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    for row in 0..lm {
        for (t, b) in buf.iter_mut().enumerate() {
            *b = y[(row, t)];
        }
        fft.process(&mut buf);
        for (bin, v) in buf.iter().enumerate() {
            spectra[(row, bin)] = *v;
        }
    }
    spectra
}

/// Split the band into `k` contiguous subchannels centred on multiples of
/// `f_s / k`, treat each DFT bin of a subchannel as one `LM`-snapshot, and
/// eigen-split each subchannel covariance with `num_sources` signal vectors.
///
/// With `k = 1` this is the sample covariance of the raw stacked samples.
pub fn dpd_channelize(
    batch: &ReceivedBatch,
    k: usize,
    num_sources: usize,
) -> Result<Vec<DpdChannel>> {
    let n = batch.num_samples();
    if k == 0 || k * MIN_BINS > n {
        return Err(Error::InsufficientData(format!(
            "{n} samples give fewer than {MIN_BINS} bins in each of {k} channels"
        )));
    }
    let spectra = element_spectra(batch);
    let lm = spectra.nrows();
    let bin_hz = batch.f_s_hz / n as f64;
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); k];
    for bin in 0..n {
        let c = (signed_bin(bin, n) as f64 * k as f64 / n as f64).round() as i64;
        members[c.rem_euclid(k as i64) as usize].push(bin);
    }
    let all = members
        .iter()
        .enumerate()
        .map(|(ch, bins)| {
            let mut snaps = DMatrix::<Complex64>::zeros(lm, bins.len());
            let mut power = 0.0;
            let mut moment = 0.0;
            for (c, &b) in bins.iter().enumerate() {
                let col = spectra.column(b);
                let e = col.norm_squared();
                power += e;
                moment += e * signed_bin(b, n) as f64 * bin_hz;
                snaps.set_column(c, &col);
            }
            // Parseval: keeps the k = 1 covariance equal to (1/N) Σ y yᴴ
            let scale = Complex64::new(1.0 / (bins.len() * n) as f64, 0.0);
            let cov = &snaps * snaps.adjoint() * scale;
            let cov = (&cov + cov.adjoint()) * Complex64::new(0.5, 0.0);
            let centre = if power > 0.0 {
                moment / power
            } else {
                signed_bin(ch, k) as f64 * batch.f_s_hz / k as f64
            };
            Ok(DpdChannel {
                freq_offset_hz: centre,
                subspace: signal_noise_split(&cov, num_sources)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let strongest = all
        .iter()
        .map(|c| c.subspace.eigenvalues[0])
        .fold(0.0f64, f64::max);
    Ok(all
        .into_iter()
        .filter(|c| c.subspace.eigenvalues[0] >= OCCUPANCY_GATE * strongest)
        .collect())
}

/// `λ_max` of `Σ_k B_kᴴ Ψ_k Ψ_kᴴ B_k`, where column `l` of `B_k` is station
/// `l`'s steering vector with the channel's delay phase.
pub fn dpd_cost(p: &Position, ctx: &DpdContext) -> Result<f64> {
    let geom = &ctx.geometry;
    let steer = geom.steering_all(p)?;
    let l = geom.num_stations();
    let m = geom.num_elements();
    let delays: Vec<f64> = (0..l).map(|i| geom.delay(i, p)).collect();
    let mut d = DMatrix::<Complex64>::zeros(l, l);
    for ch in &ctx.channels {
        let psi = &ch.subspace.signal;
        let q = psi.ncols();
        let omega = 2.0 * PI * (geom.f_o_hz + ch.freq_offset_hz);
        let mut c = DMatrix::<Complex64>::zeros(q, l);
        for (st, a) in steer.iter().enumerate() {
            let phase = Complex64::from_polar(1.0, -omega * delays[st]);
            let block = psi.rows(st * m, m);
            let proj = block.adjoint() * &a.0;
            c.set_column(st, &(proj * phase));
        }
        d += c.adjoint() * &c;
    }
    let eig = herm_eig(&d)?;
    Ok(eig.values[0].max(0.0))
}
