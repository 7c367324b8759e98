use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::Result;
use crate::scenario::{Geometry, Position};
use crate::xcov::{herm_eig, CompositeVariant, CrossCovSet, DominanceOrder};

#[derive(Debug, Clone)]
pub struct CcdpdContext {
    pub geometry: Geometry,
    pub covs: CrossCovSet,
    pub projector_order: usize,
    pub dominance: DominanceOrder,
}

impl CcdpdContext {
    pub fn new(
        covs: CrossCovSet,
        geometry: Geometry,
        projector_order: usize,
        dominance: DominanceOrder,
    ) -> Self {
        Self {
            geometry,
            covs,
            projector_order,
            dominance,
        }
    }
}

pub fn ccdpd_cost(p: &Position, ctx: &CcdpdContext) -> Result<f64> {
    ccdpd_cost_with_order(p, ctx, ctx.projector_order)
}

/// `det(Aᴴ (I − E) A) / det(Aᴴ A)`, where `E` projects onto the `order`
/// dominant eigenvectors of the diagonal-free composite covariance built at
/// the TDOAs of `p`.
pub fn ccdpd_cost_with_order(p: &Position, ctx: &CcdpdContext, order: usize) -> Result<f64> {
    let a = ctx.geometry.steering_matrix(p)?;
    let gram = a.adjoint() * &a;
    if order == 0 {
        return Ok(1.0);
    }
    let tdoas = ctx.geometry.tdoas(p);
    let comp = ctx.covs.composite(&tdoas, CompositeVariant::Modified)?;
    let eig = herm_eig(&comp.matrix)?;
    let idx = eig.dominant_indices(order, ctx.dominance);
    let mut w = DMatrix::<Complex64>::zeros(a.ncols(), idx.len());
    for (dst, &src) in idx.iter().enumerate() {
        w.set_column(dst, &(a.adjoint() * eig.vectors.column(src)));
    }
    let num = &gram - &w * w.adjoint();
    let ratio = num.determinant() / gram.determinant();
    Ok(ratio.re)
}
