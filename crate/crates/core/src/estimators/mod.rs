//! Position-hypothesis cost functions.
//!
//! Every estimator is split in two: a one-off precomputation over a
//! [`ReceivedBatch`] (a [`PrecompContext`]) and a pure per-position cost that
//! reads it. Surfaces evaluate the cost over a [`GridSpec`] in parallel while
//! preserving grid order.

mod ccdpd;
mod dpd;
mod lost;
mod target;

pub use ccdpd::{ccdpd_cost, ccdpd_cost_with_order, CcdpdContext};
pub use dpd::{dpd_channelize, dpd_cost, DpdChannel, DpdContext};
pub use lost::{lost_build, lost_cost, space_time_covariance, LostContext, DEFAULT_LOST_MAX_DIM};
pub use target::{target_cost, TargetContext};

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scenario::{grid_points, Geometry, GridSpec, Position, ScenarioConfig};
use crate::synth::ReceivedBatch;
use crate::xcov::{lag_window, CrossCovSet, DominanceOrder, DEFAULT_OVERSAMPLE};

/// Full-scale DPD/LOST channel count.
pub const FULL_STACK_CHANNELS: usize = 35;
/// Desk-scale LOST stack depth.
pub const DEFAULT_LOST_STACK: usize = 8;
pub const DEFAULT_PROJECTOR_ORDER: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Dpd,
    Lost,
    Target,
    Ccdpd,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::Dpd, Variant::Lost, Variant::Target, Variant::Ccdpd];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Dpd => "dpd",
            Variant::Lost => "lost",
            Variant::Target => "target",
            Variant::Ccdpd => "ccdpd",
        }
    }

    pub fn orientation(self) -> Orientation {
        match self {
            Variant::Dpd => Orientation::Maximize,
            _ => Orientation::Minimize,
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "dpd" => Ok(Variant::Dpd),
            "lost" => Ok(Variant::Lost),
            "target" => Ok(Variant::Target),
            "ccdpd" => Ok(Variant::Ccdpd),
            other => Err(Error::validation(
                "estimator",
                format!("unknown estimator {other:?}"),
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Orientation {
    Minimize,
    Maximize,
}

impl Orientation {
    /// True when `a` is a better cost than `b`.
    pub fn better(self, a: f64, b: f64) -> bool {
        match self {
            Orientation::Minimize => a < b,
            Orientation::Maximize => a > b,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorParams {
    pub variant: Variant,
    /// DPD frequency channels, or LOST stack depth.
    pub channels: usize,
    /// ccDPD projector order `N_m`.
    pub projector_order: usize,
    /// TARGET pseudo-inverse order `Q_T`.
    pub target_order: usize,
    /// Assumed source count (DPD signal subspace).
    pub num_sources: usize,
    pub lost_signal_dim: usize,
    /// Ceiling on the LOST stacked dimension `K·L·M`.
    pub lost_max_dim: usize,
    pub oversample: usize,
    pub dominance: DominanceOrder,
}

impl EstimatorParams {
    /// Evaluation defaults for `variant` on `scenario`.
    ///
    /// DPD uses `K = round(Δτ_max · f_s)` channels. LOST uses the desk-scale
    /// stack depth with its signal dimension scaled from `L·M·Q` at 35 taps.
    pub fn for_scenario(variant: Variant, scenario: &ScenarioConfig) -> Self {
        let l = scenario.stations.len();
        let m = scenario.stations.first().map_or(1, |s| s.num_elements);
        let q = scenario.sources.len();
        let dpd_k = dpd_channels_for(&scenario.geometry(), scenario.f_s_hz);
        let channels = match variant {
            Variant::Dpd => dpd_k,
            Variant::Lost => DEFAULT_LOST_STACK,
            _ => 1,
        };
        Self {
            variant,
            channels,
            projector_order: DEFAULT_PROJECTOR_ORDER,
            target_order: m.saturating_sub(1).max(1),
            num_sources: q,
            lost_signal_dim: scaled_lost_signal_dim(l, m, q, DEFAULT_LOST_STACK),
            lost_max_dim: DEFAULT_LOST_MAX_DIM,
            oversample: DEFAULT_OVERSAMPLE,
            dominance: DominanceOrder::Algebraic,
        }
    }

    /// Same as [`for_scenario`](Self::for_scenario) but with LOST at the full 35-tap stack.
    pub fn full_scale_lost(scenario: &ScenarioConfig) -> Self {
        let l = scenario.stations.len();
        let m = scenario.stations[0].num_elements;
        let q = scenario.sources.len();
        Self {
            channels: FULL_STACK_CHANNELS,
            lost_signal_dim: scaled_lost_signal_dim(l, m, q, FULL_STACK_CHANNELS),
            ..Self::for_scenario(Variant::Lost, scenario)
        }
    }

    pub fn validate(&self, num_stations: usize, num_elements: usize) -> Result<()> {
        let lm = num_stations * num_elements;
        if self.channels == 0 {
            return Err(Error::validation("channels", "K must be at least 1"));
        }
        if self.oversample == 0 {
            return Err(Error::validation("oversample", "must be at least 1"));
        }
        match self.variant {
            Variant::Dpd if self.num_sources == 0 || self.num_sources >= lm => {
                Err(Error::validation(
                    "num_sources",
                    format!(
                        "DPD signal dimension {} must lie in [1, LM = {lm})",
                        self.num_sources
                    ),
                ))
            }
            Variant::Lost if self.lost_signal_dim > self.channels * lm => Err(Error::validation(
                "lost_signal_dim",
                format!(
                    "{} exceeds K·L·M = {}",
                    self.lost_signal_dim,
                    self.channels * lm
                ),
            )),
            Variant::Target
                if self.target_order == 0 || self.target_order >= num_elements.max(2) =>
            {
                Err(Error::validation(
                    "target_order",
                    format!(
                        "Q_T = {} must lie in [1, M = {num_elements})",
                        self.target_order
                    ),
                ))
            }
            Variant::Ccdpd if self.projector_order >= lm => Err(Error::validation(
                "projector_order",
                format!("N_m = {} must be below LM = {lm}", self.projector_order),
            )),
            _ => Ok(()),
        }
    }
}

/// `round(Δτ_max · f_s)`, at least one channel.
pub fn dpd_channels_for(geometry: &Geometry, f_s_hz: f64) -> usize {
    ((geometry.max_tdoa() * f_s_hz).round() as usize).max(1)
}

/// LOST signal dimension `L·M·Q` at 35 taps, scaled to `stack` taps.
pub fn scaled_lost_signal_dim(l: usize, m: usize, q: usize, stack: usize) -> usize {
    let full = (l * m * q) as f64;
    let dim = (full * stack as f64 / FULL_STACK_CHANNELS as f64).round() as usize;
    dim.min(stack * l * m)
}

/// Immutable per-batch precomputation for one estimator.
#[derive(Debug, Clone)]
pub enum PrecompContext {
    Dpd(DpdContext),
    Lost(LostContext),
    Target(TargetContext),
    Ccdpd(CcdpdContext),
}

impl PrecompContext {
    pub fn build(
        params: &EstimatorParams,
        batch: &ReceivedBatch,
        geometry: &Geometry,
    ) -> Result<Self> {
        if batch.num_stations() != geometry.num_stations()
            || batch.num_elements() != geometry.num_elements()
        {
            return Err(Error::Dimension(format!(
                "batch has {}×{} channels, geometry expects {}×{}",
                batch.num_stations(),
                batch.num_elements(),
                geometry.num_stations(),
                geometry.num_elements()
            )));
        }
        params.validate(geometry.num_stations(), geometry.num_elements())?;
        let lag = || lag_window(geometry, batch.f_s_hz);
        Ok(match params.variant {
            Variant::Dpd => PrecompContext::Dpd(DpdContext::build(
                batch,
                geometry.clone(),
                params.channels,
                params.num_sources,
            )?),
            Variant::Lost => PrecompContext::Lost(LostContext::build(
                batch,
                geometry.clone(),
                params.channels,
                params.lost_signal_dim,
                params.lost_max_dim,
            )?),
            Variant::Target => PrecompContext::Target(TargetContext::new(
                CrossCovSet::compute(batch, params.oversample, lag())?,
                geometry.clone(),
                params.target_order,
            )?),
            Variant::Ccdpd => PrecompContext::Ccdpd(CcdpdContext::new(
                CrossCovSet::compute(batch, params.oversample, lag())?,
                geometry.clone(),
                params.projector_order,
                params.dominance,
            )),
        })
    }

    pub fn variant(&self) -> Variant {
        match self {
            PrecompContext::Dpd(_) => Variant::Dpd,
            PrecompContext::Lost(_) => Variant::Lost,
            PrecompContext::Target(_) => Variant::Target,
            PrecompContext::Ccdpd(_) => Variant::Ccdpd,
        }
    }

    pub fn cost(&self, p: &Position) -> Result<f64> {
        match self {
            PrecompContext::Dpd(c) => dpd_cost(p, c),
            PrecompContext::Lost(c) => lost_cost(p, c),
            PrecompContext::Target(c) => target_cost(p, c),
            PrecompContext::Ccdpd(c) => ccdpd_cost(p, c),
        }
    }
}

/// Cost values over a grid, in [`grid_points`] order.
#[derive(Debug, Clone, PartialEq)]
pub struct CostSurface {
    pub grid: GridSpec,
    pub points: Vec<Position>,
    pub values: Vec<f64>,
    pub orientation: Orientation,
}

impl CostSurface {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Index of the best value; ties go to the earliest grid point.
    pub fn best_index(&self) -> usize {
        let mut best = 0;
        for k in 1..self.values.len() {
            if self.orientation.better(self.values[k], self.values[best]) {
                best = k;
            }
        }
        best
    }

    pub fn median(&self) -> f64 {
        let mut v = self.values.clone();
        v.sort_by(f64::total_cmp);
        let n = v.len();
        if n % 2 == 1 {
            v[n / 2]
        } else {
            0.5 * (v[n / 2 - 1] + v[n / 2])
        }
    }
}

pub fn evaluate_points(ctx: &PrecompContext, points: &[Position]) -> Result<Vec<f64>> {
    let values = points
        .par_iter()
        .map(|p| ctx.cost(p))
        .collect::<Result<Vec<f64>>>()?;
    if let Some(k) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::validation(
            "cost",
            format!("non-finite cost at ({}, {})", points[k].x, points[k].y),
        ));
    }
    Ok(values)
}

pub fn evaluate_surface(ctx: &PrecompContext, grid: &GridSpec) -> Result<CostSurface> {
    let points = grid_points(grid)?;
    let values = evaluate_points(ctx, &points)?;
    Ok(CostSurface {
        grid: grid.clone(),
        points,
        values,
        orientation: ctx.variant().orientation(),
    })
}
