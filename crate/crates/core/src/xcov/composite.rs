use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use super::covariance::{crosscov_at, LaggedCrossCov, SampleCovariance};
use super::eigen::herm_eig;
use crate::error::{Error, Result};
use crate::scenario::station_pairs;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CompositeVariant {
    /// Auto-covariance blocks on the diagonal.
    Full,
    /// Diagonal blocks removed; only inter-station blocks remain.
    Modified,
}

/// `LM × LM` covariance of all station streams, each advanced by its
/// hypothesized TDOA relative to station 0.
#[derive(Debug, Clone)]
pub struct CompositeCovariance {
    pub matrix: DMatrix<Complex64>,
    pub tdoas: Vec<f64>,
    pub variant: CompositeVariant,
}

#[derive(Serialize)]
struct CompositeDump<'a> {
    dim: usize,
    variant: CompositeVariant,
    tdoa_s: &'a [f64],
    eigenvalues: Vec<f64>,
}

impl CompositeCovariance {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// Dimensions, hypothesis and eigenvalues as a JSON object.
    pub fn debug_json(&self) -> Result<serde_json::Value> {
        let eig = herm_eig(&self.matrix)?;
        Ok(serde_json::to_value(CompositeDump {
            dim: self.dim(),
            variant: self.variant,
            tdoa_s: &self.tdoas,
            eigenvalues: eig.values,
        })?)
    }
}

/// Assemble the composite from per-pair lagged cross-covariances (in
/// [`station_pairs`] order) and per-station auto-covariances.
pub fn build_composite(
    lccs: &[LaggedCrossCov],
    autocovs: &[SampleCovariance],
    tdoas: &[f64],
    variant: CompositeVariant,
) -> Result<CompositeCovariance> {
    let l = autocovs.len();
    let pairs = station_pairs(l);
    if lccs.len() != pairs.len() || tdoas.len() != pairs.len() {
        return Err(Error::Dimension(format!(
            "{l} stations need {} pair sequences and TDOAs, got {} and {}",
            pairs.len(),
            lccs.len(),
            tdoas.len()
        )));
    }
    let m = autocovs[0].matrix.nrows();
    let mut out = DMatrix::zeros(l * m, l * m);
    if variant == CompositeVariant::Full {
        for (i, a) in autocovs.iter().enumerate() {
            out.view_mut((i * m, i * m), (m, m)).copy_from(&a.matrix);
        }
    }
    for (k, &(i, j)) in pairs.iter().enumerate() {
        let block = crosscov_at(&lccs[k], tdoas[k])?;
        out.view_mut((j * m, i * m), (m, m))
            .copy_from(&block.adjoint());
        out.view_mut((i * m, j * m), (m, m)).copy_from(&block);
    }
    Ok(CompositeCovariance {
        matrix: out,
        tdoas: tdoas.to_vec(),
        variant,
    })
}
