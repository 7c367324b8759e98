//! Covariance estimation: per-station auto-covariances, oversampled lagged
//! cross-covariances between stations, the TDOA-compensated composite
//! matrix, and the Hermitian eigen utilities every estimator shares.

mod composite;
mod covariance;
mod eigen;

pub use composite::{build_composite, CompositeCovariance, CompositeVariant};
pub use covariance::{
    crosscov_at, lagged_crosscov, sample_autocov, LaggedCrossCov, SampleCovariance,
};
pub use eigen::{
    dominant_projector, herm_eig, hermitian_asymmetry, projector_from, signal_noise_split,
    DominanceOrder, HermEig, SubspacePair, HERMITIAN_TOL, RANK_TOL,
};

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::Result;
use crate::scenario::{station_pairs, Geometry};
use crate::synth::ReceivedBatch;

pub const DEFAULT_OVERSAMPLE: usize = 4;

/// Extra lag coverage beyond the longest baseline, in samples.
pub const LAG_GUARD_SAMPLES: f64 = 4.0;

/// Lag half-width that covers every TDOA the geometry can produce.
pub fn lag_window(geometry: &Geometry, f_s_hz: f64) -> f64 {
    geometry.max_tdoa() + LAG_GUARD_SAMPLES / f_s_hz
}

/// Auto-covariances of every station and lagged cross-covariances of every
/// station pair, computed once per batch and shared read-only.
#[derive(Debug, Clone)]
pub struct CrossCovSet {
    pub autocovs: Vec<SampleCovariance>,
    pub lccs: Vec<LaggedCrossCov>,
    pair_index: Vec<Vec<Option<usize>>>,
}

impl CrossCovSet {
    pub fn compute(batch: &ReceivedBatch, oversample: usize, max_lag_s: f64) -> Result<Self> {
        let l = batch.num_stations();
        let autocovs = batch
            .stations
            .iter()
            .map(sample_autocov)
            .collect::<Result<Vec<_>>>()?;
        let pairs = station_pairs(l);
        let lccs = pairs
            .iter()
            .map(|&(i, j)| {
                lagged_crosscov(
                    &batch.stations[i],
                    &batch.stations[j],
                    batch.f_s_hz,
                    oversample,
                    max_lag_s,
                    (i, j),
                )
            })
            .collect::<Result<Vec<_>>>()?;
        let mut pair_index = vec![vec![None; l]; l];
        for (k, &(i, j)) in pairs.iter().enumerate() {
            pair_index[i][j] = Some(k);
        }
        Ok(Self {
            autocovs,
            lccs,
            pair_index,
        })
    }

    pub fn num_stations(&self) -> usize {
        self.autocovs.len()
    }

    /// `R_ij(τ)` for any ordered pair, using `R_ij(τ) = R_ji(-τ)ᴴ` when `i > j`.
    pub fn cross(&self, i: usize, j: usize, tau_s: f64) -> Result<DMatrix<Complex64>> {
        if let Some(k) = self.pair_index[i][j] {
            crosscov_at(&self.lccs[k], tau_s)
        } else {
            let k = self.pair_index[j][i].expect("distinct stations");
            Ok(crosscov_at(&self.lccs[k], -tau_s)?.adjoint())
        }
    }

    pub fn composite(
        &self,
        tdoas: &[f64],
        variant: CompositeVariant,
    ) -> Result<CompositeCovariance> {
        build_composite(&self.lccs, &self.autocovs, tdoas, variant)
    }
}
