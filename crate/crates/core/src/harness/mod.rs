//! Peak extraction, source/estimate matching, RMSE and Monte Carlo sweeps.

mod assign;

pub use assign::{assignment_cost, brute_force_assignment, hungarian};

use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimators::{
    dpd_channels_for, evaluate_surface, CostSurface, EstimatorParams, PrecompContext, Variant,
};
use crate::scenario::{Position, ScenarioConfig};
use crate::seed::{derive, TAG_TRIAL};
use crate::synth::simulate;

pub const DEFAULT_TRIALS: usize = 20;

/// Greedy extremum picking: take the best remaining grid point, suppress
/// everything within `exclusion_radius` of it, repeat `count` times.
pub fn extract_minima(
    surface: &CostSurface,
    count: usize,
    exclusion_radius: f64,
) -> Result<Vec<Position>> {
    let mut order: Vec<usize> = (0..surface.len()).collect();
    // stable sort keeps grid order among ties
    match surface.orientation {
        crate::estimators::Orientation::Minimize => {
            order.sort_by(|&a, &b| surface.values[a].total_cmp(&surface.values[b]))
        }
        crate::estimators::Orientation::Maximize => {
            order.sort_by(|&a, &b| surface.values[b].total_cmp(&surface.values[a]))
        }
    }
    let mut picked: Vec<Position> = Vec::with_capacity(count);
    for &k in &order {
        if picked.len() == count {
            break;
        }
        let p = surface.points[k];
        if picked.iter().all(|q| q.distance(&p) > exclusion_radius) {
            picked.push(p);
        }
    }
    if picked.len() < count {
        return Err(Error::NotEnoughExtrema {
            found: picked.len(),
            wanted: count,
        });
    }
    Ok(picked)
}

/// `max(3·spacing, 0.25·closest source pair distance)`.
pub fn default_exclusion_radius(scenario: &ScenarioConfig) -> f64 {
    let pos = scenario.source_positions();
    let mut closest = f64::INFINITY;
    for (i, a) in pos.iter().enumerate() {
        for b in &pos[i + 1..] {
            closest = closest.min(a.distance(b));
        }
    }
    let from_sources = if closest.is_finite() {
        0.25 * closest
    } else {
        0.0
    };
    (3.0 * scenario.grid.spacing).max(from_sources)
}

/// Distances between each true source and its matched estimate under the
/// minimum total squared-distance assignment.
pub fn matched_errors(estimates: &[Position], truth: &[Position]) -> Result<Vec<f64>> {
    if estimates.len() != truth.len() {
        return Err(Error::Dimension(format!(
            "{} estimates for {} sources",
            estimates.len(),
            truth.len()
        )));
    }
    let cost: Vec<Vec<f64>> = truth
        .iter()
        .map(|t| estimates.iter().map(|e| t.distance(e).powi(2)).collect())
        .collect();
    let col = hungarian(&cost);
    Ok(col
        .iter()
        .enumerate()
        .map(|(q, &c)| cost[q][c].sqrt())
        .collect())
}

/// Horizontal RMSE over every source of every trial.
pub fn rmse(trials: &[Vec<Position>], truth: &[Position]) -> Result<f64> {
    if trials.is_empty() {
        return Err(Error::InsufficientData("no trials".into()));
    }
    let mut sum = 0.0;
    let mut count = 0usize;
    for est in trials {
        for e in matched_errors(est, truth)? {
            sum += e * e;
            count += 1;
        }
    }
    Ok((sum / count as f64).sqrt())
}

/// Median matched error over every source of every trial.
pub fn median_error(trials: &[Vec<Position>], truth: &[Position]) -> Result<f64> {
    let mut all = Vec::new();
    for est in trials {
        all.extend(matched_errors(est, truth)?);
    }
    if all.is_empty() {
        return Err(Error::InsufficientData("no estimates".into()));
    }
    all.sort_by(f64::total_cmp);
    let n = all.len();
    Ok(if n % 2 == 1 {
        all[n / 2]
    } else {
        0.5 * (all[n / 2 - 1] + all[n / 2])
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialResult {
    pub estimator: Variant,
    pub estimates: Vec<Position>,
    pub seed: u64,
    pub wall_s: f64,
}

/// Seed of trial `index` under `master`.
pub fn trial_seed(master: u64, index: usize) -> u64 {
    derive(master, TAG_TRIAL, index as u64)
}

/// Simulate one batch and run every estimator in `params` on it.
pub fn run_trial(
    scenario: &ScenarioConfig,
    params: &[EstimatorParams],
    seed: u64,
) -> Result<Vec<TrialResult>> {
    scenario.validate()?;
    let batch = simulate(scenario, seed)?;
    let geom = scenario.geometry();
    let q = scenario.sources.len();
    let radius = default_exclusion_radius(scenario);
    params
        .iter()
        .map(|p| {
            let start = Instant::now();
            let ctx = PrecompContext::build(p, &batch, &geom)?;
            let surface = evaluate_surface(&ctx, &scenario.grid)?;
            let estimates = extract_minima(&surface, q, radius)?;
            Ok(TrialResult {
                estimator: p.variant,
                estimates,
                seed,
                wall_s: start.elapsed().as_secs_f64(),
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SweepAxis {
    #[serde(rename = "snr_db")]
    Snr,
    #[serde(rename = "bandwidth_hz")]
    Bandwidth,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::Snr => "snr_db",
            SweepAxis::Bandwidth => "bandwidth_hz",
        }
    }

    /// Copy of `base` with this axis set to `value`, plus the parameters to use.
    ///
    /// Along the bandwidth axis every source takes bandwidth `value`, the
    /// sample rate becomes `2·value` and DPD's channel count follows
    /// `round(Δτ_max · f_s)`.
    pub fn apply(
        self,
        base: &ScenarioConfig,
        params: &[EstimatorParams],
        value: f64,
    ) -> Result<(ScenarioConfig, Vec<EstimatorParams>)> {
        let mut sc = base.clone();
        let mut ps = params.to_vec();
        match self {
            SweepAxis::Snr => sc.snr_db = value,
            SweepAxis::Bandwidth => {
                for s in &mut sc.sources {
                    s.bandwidth_hz = value;
                }
                sc.f_s_hz = 2.0 * value;
                let k = dpd_channels_for(&sc.geometry(), sc.f_s_hz);
                for p in ps.iter_mut().filter(|p| p.variant == Variant::Dpd) {
                    p.channels = k;
                }
            }
        }
        sc.validate()?;
        Ok((sc, ps))
    }
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "snr" | "snr_db" => Ok(SweepAxis::Snr),
            "bandwidth" | "bandwidth_hz" => Ok(SweepAxis::Bandwidth),
            other => Err(Error::validation(
                "axis",
                format!("unknown sweep axis {other:?}"),
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub estimator: Variant,
    pub axis_value: f64,
    pub trials: usize,
    pub rmse_m: f64,
    pub median_m: f64,
    pub mean_wall_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepTable {
    pub axis: SweepAxis,
    pub rows: Vec<SweepRow>,
}

pub const SWEEP_CSV_HEADER: &str = "estimator,axis,axis_value,trials,rmse_m,mean_wall_s";
pub const SURFACE_CSV_HEADER: &str = "x_m,y_m,cost";

impl SweepTable {
    pub fn row(&self, estimator: Variant, axis_value: f64) -> Option<&SweepRow> {
        self.rows
            .iter()
            .find(|r| r.estimator == estimator && r.axis_value == axis_value)
    }

    /// CSV with the wall-time column; `with_timing = false` writes zeros
    /// there so the file is reproducible byte for byte.
    pub fn write_csv<W: Write>(&self, mut w: W, with_timing: bool) -> Result<()> {
        writeln!(w, "{SWEEP_CSV_HEADER}")?;
        for r in &self.rows {
            let wall = if with_timing { r.mean_wall_s } else { 0.0 };
            writeln!(
                w,
                "{},{},{},{},{},{}",
                r.estimator, self.axis, r.axis_value, r.trials, r.rmse_m, wall
            )?;
        }
        Ok(())
    }
}

pub fn write_surface_csv<W: Write>(surface: &CostSurface, mut w: W) -> Result<()> {
    writeln!(w, "{SURFACE_CSV_HEADER}")?;
    for (p, v) in surface.points.iter().zip(&surface.values) {
        writeln!(w, "{},{},{}", p.x, p.y, v)?;
    }
    Ok(())
}

/// `trials` seeded runs per axis value for every estimator in `params`.
///
/// Trial `j` uses the same seed at every axis value, so neighbouring rows are
/// paired comparisons.
pub fn run_sweep(
    scenario: &ScenarioConfig,
    axis: SweepAxis,
    values: &[f64],
    trials: usize,
    params: &[EstimatorParams],
    master_seed: u64,
) -> Result<SweepTable> {
    if trials == 0 {
        return Err(Error::validation("trials", "must be at least 1"));
    }
    if values.is_empty() {
        return Err(Error::validation("values", "empty sweep axis"));
    }
    let truth = scenario.source_positions();
    let mut rows = Vec::with_capacity(values.len() * params.len());
    for &value in values {
        let (sc, ps) = axis.apply(scenario, params, value)?;
        let results = (0..trials)
            .into_par_iter()
            .map(|j| run_trial(&sc, &ps, trial_seed(master_seed, j)))
            .collect::<Result<Vec<_>>>()?;
        for (k, p) in ps.iter().enumerate() {
            let est: Vec<Vec<Position>> = results.iter().map(|r| r[k].estimates.clone()).collect();
            let wall: f64 = results.iter().map(|r| r[k].wall_s).sum::<f64>() / trials as f64;
            rows.push(SweepRow {
                estimator: p.variant,
                axis_value: value,
                trials,
                rmse_m: rmse(&est, &truth)?,
                median_m: median_error(&est, &truth)?,
                mean_wall_s: wall,
            });
        }
    }
    Ok(SweepTable { axis, rows })
}

/// Inclusive `start:stop:step` range, robust to floating-point drift.
pub fn parse_range(spec: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    let bad = || Error::validation("values", format!("expected start:stop:step, got {spec:?}"));
    if parts.len() == 1 {
        return Ok(vec![parts[0].trim().parse().map_err(|_| bad())?]);
    }
    if parts.len() != 3 {
        return Err(bad());
    }
    let nums: Vec<f64> = parts
        .iter()
        .map(|p| p.trim().parse::<f64>().map_err(|_| bad()))
        .collect::<Result<_>>()?;
    let (start, stop, step) = (nums[0], nums[1], nums[2]);
    if !(start.is_finite() && stop.is_finite() && step.is_finite()) || step == 0.0 {
        return Err(bad());
    }
    if (stop - start) * step < 0.0 {
        return Err(Error::validation("values", "step points away from stop"));
    }
    let n = ((stop - start) / step + 1e-9).floor() as usize;
    Ok((0..=n).map(|k| start + k as f64 * step).collect())
}
