use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::scenario::{Geometry, Position};
use crate::synth::ReceivedBatch;
use crate::xcov::{herm_eig, signal_noise_split};

/// Largest stacked dimension `K·L·M` accepted by default.
pub const DEFAULT_LOST_MAX_DIM: usize = 1024;

#[derive(Debug, Clone)]
pub struct LostContext {
    pub geometry: Geometry,
    pub stack: usize,
    /// Orthonormal basis of the space-time noise subspace.
    pub noise: DMatrix<Complex64>,
    /// `noise · noiseᴴ`.
    projector: DMatrix<Complex64>,
}

impl LostContext {
    pub fn build(
        batch: &ReceivedBatch,
        geometry: Geometry,
        stack: usize,
        signal_dim: usize,
        max_dim: usize,
    ) -> Result<Self> {
        let noise = lost_build(batch, stack, signal_dim, max_dim)?;
        Ok(Self::from_noise(geometry, stack, noise))
    }

    pub fn from_noise(geometry: Geometry, stack: usize, noise: DMatrix<Complex64>) -> Self {
        let projector = &noise * noise.adjoint();
        Self {
            geometry,
            stack,
            noise,
            projector,
        }
    }
}

/// Space-time covariance of `z(t) = [y(t); y(t+1); …; y(t+K−1)]` over all
/// `N − K + 1` full snapshots.
pub fn space_time_covariance(batch: &ReceivedBatch, stack: usize) -> Result<DMatrix<Complex64>> {
    let y = batch.stacked();
    let (lm, n) = y.shape();
    let dim = stack * lm;
    if stack == 0 || n < stack + dim {
        return Err(Error::InsufficientData(format!(
            "{n} samples for a {dim}-dimensional stack of depth {stack}"
        )));
    }
    let t = n - stack + 1;
    let mut rz = DMatrix::<Complex64>::zeros(dim, dim);
    for d in 0..stack {
        let full = y.columns(0, n - d) * y.columns(d, n - d).adjoint();
        for a in 0..stack - d {
            let b = a + d;
            let mut block = full.clone();
            // drop lag products outside snapshots a..a+T
            for u in (0..a).chain(a + t..n - d) {
                block -= y.column(u) * y.column(u + d).adjoint();
            }
            block /= Complex64::new(t as f64, 0.0);
            rz.view_mut((a * lm, b * lm), (lm, lm)).copy_from(&block);
            if d > 0 {
                rz.view_mut((b * lm, a * lm), (lm, lm))
                    .copy_from(&block.adjoint());
            }
        }
    }
    let rz = (&rz + rz.adjoint()) * Complex64::new(0.5, 0.0);
    Ok(rz)
}

/// Noise subspace of the space-time covariance: every eigenvector outside
/// the `signal_dim` dominant ones.
pub fn lost_build(
    batch: &ReceivedBatch,
    stack: usize,
    signal_dim: usize,
    max_dim: usize,
) -> Result<DMatrix<Complex64>> {
    let dim = stack * batch.num_stations() * batch.num_elements();
    if dim > max_dim {
        return Err(Error::validation(
            "lost_max_dim",
            format!("stacked dimension {dim} exceeds the ceiling {max_dim}"),
        ));
    }
    if signal_dim > dim {
        return Err(Error::validation(
            "lost_signal_dim",
            format!("{signal_dim} exceeds the stacked dimension {dim}"),
        ));
    }
    let rz = space_time_covariance(batch, stack)?;
    Ok(signal_noise_split(&rz, signal_dim)?.noise)
}

/// Smallest eigenvalue of `(VᴴV)^{-1/2} Vᴴ Φ Φᴴ V (VᴴV)^{-1/2}` with
/// `V = I_K ⊗ A(p)`.
pub fn lost_cost(p: &Position, ctx: &LostContext) -> Result<f64> {
    let geom = &ctx.geometry;
    let steer = geom.steering_all(p)?;
    let l = geom.num_stations();
    let m = geom.num_elements();
    let kl = ctx.stack * l;
    let dim = ctx.projector.nrows();
    if ctx.noise.ncols() == 0 {
        return Ok(0.0);
    }
    // P·V, one column per (tap, station)
    let mut pv = DMatrix::<Complex64>::zeros(dim, kl);
    for c in 0..kl {
        let off = c * m;
        let a = &steer[c % l].0;
        pv.set_column(c, &(ctx.projector.columns(off, m) * a));
    }
    let mut g = DMatrix::<Complex64>::zeros(kl, kl);
    for r in 0..kl {
        let a = &steer[r % l].0;
        let rows = pv.rows(r * m, m);
        let v = rows.adjoint() * a;
        for c in 0..kl {
            g[(r, c)] = v[c].conj();
        }
    }
    let norms: Vec<f64> = (0..kl).map(|c| steer[c % l].0.norm_squared()).collect();
    if norms.iter().any(|&n| n <= f64::MIN_POSITIVE) {
        return Err(Error::validation("steering", "singular VᴴV"));
    }
    for r in 0..kl {
        for c in 0..kl {
            g[(r, c)] /= (norms[r] * norms[c]).sqrt();
        }
    }
    let g = (&g + g.adjoint()) * Complex64::new(0.5, 0.0);
    let eig = herm_eig(&g)?;
    Ok(eig.values[kl - 1])
}
