use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::scenario::{Geometry, Position};
use crate::xcov::{herm_eig, CrossCovSet};

/// Eigenvalues at or below this fraction of the largest are skipped when
/// inverting.
const PINV_RTOL: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct TargetContext {
    pub geometry: Geometry,
    pub covs: CrossCovSet,
    /// Rank-`Q_T` pseudo-inverse of each station's auto-covariance.
    pub pinv: Vec<DMatrix<Complex64>>,
}

impl TargetContext {
    pub fn new(covs: CrossCovSet, geometry: Geometry, order: usize) -> Result<Self> {
        let pinv = covs
            .autocovs
            .iter()
            .map(|c| truncated_pinv(&c.matrix, order))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            geometry,
            covs,
            pinv,
        })
    }
}

/// `Π Σ⁻¹ Πᴴ` over the `order` largest eigenpairs.
pub fn truncated_pinv(r: &DMatrix<Complex64>, order: usize) -> Result<DMatrix<Complex64>> {
    let n = r.nrows();
    if order == 0 || order > n {
        return Err(Error::validation(
            "target_order",
            format!("{order} eigenpairs requested from a {n}×{n} covariance"),
        ));
    }
    let eig = herm_eig(r)?;
    let floor = PINV_RTOL * eig.values[0].abs();
    let mut out = DMatrix::zeros(n, n);
    for k in 0..order {
        let lam = eig.values[k];
        if lam <= floor {
            break;
        }
        let v = eig.vectors.column(k);
        out += v * v.adjoint() * Complex64::new(1.0 / lam, 0.0);
    }
    Ok(out)
}

/// Mean over ordered station pairs of `a_iᴴ G_ij a_i / a_iᴴ a_i` with
/// `G_ij = I − R_ii⁺ R_ij R_jj⁺ R_ijᴴ`, the cross-covariance taken at the
/// hypothesized TDOA.
pub fn target_cost(p: &Position, ctx: &TargetContext) -> Result<f64> {
    let geom = &ctx.geometry;
    let steer = geom.steering_all(p)?;
    let l = geom.num_stations();
    let delays: Vec<f64> = (0..l).map(|i| geom.delay(i, p)).collect();
    let mut total = 0.0;
    for i in 0..l {
        let a = &steer[i].0;
        let norm = a.norm_squared();
        for j in 0..l {
            if i == j {
                continue;
            }
            let x = ctx.covs.cross(i, j, delays[j] - delays[i])?;
            // R_ii⁺ R_ij R_jj⁺ R_ijᴴ a, right to left
            let w = x.adjoint() * a;
            let w = &ctx.pinv[j] * w;
            let w = &x * w;
            let w = &ctx.pinv[i] * w;
            let q = norm - a.dotc(&w).re;
            total += q / norm;
        }
    }
    Ok(total / (l * (l - 1)) as f64)
}
