//! Acceptance suite: one line per criterion, non-zero exit if any fails.

mod common;

use std::process::Command;
use std::time::Instant;

use ccdpd::estimators::{evaluate_surface, EstimatorParams, PrecompContext, Variant};
use ccdpd::harness::{
    default_exclusion_radius, extract_minima, run_sweep, SweepAxis, DEFAULT_TRIALS,
};
use ccdpd::scenario::{default_scenario, grid_points, Position, ScenarioConfig, SourceConfig};
use ccdpd::synth::{read_batch, simulate, synthesize_received, write_batch};
use ccdpd::xcov::{
    herm_eig, lag_window, CompositeVariant, CrossCovSet, DominanceOrder, DEFAULT_OVERSAMPLE,
};
use proptest::test_runner::{Config, TestCaseError, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Suite = (&'static str, fn(u64) -> common::Check, u64);
type Criterion = (&'static str, fn() -> Outcome);

fn single_source(p: Position, snr_db: f64, duration_s: f64) -> ScenarioConfig {
    let mut sc = default_scenario();
    sc.sources = vec![SourceConfig::new(p, 10e6)];
    sc.snr_db = snr_db;
    sc.duration_s = duration_s;
    sc
}

fn covs(sc: &ScenarioConfig, seed: u64) -> Result<CrossCovSet, String> {
    let b = simulate(sc, seed).map_err(|e| e.to_string())?;
    CrossCovSet::compute(&b, DEFAULT_OVERSAMPLE, lag_window(&sc.geometry(), b.f_s_hz))
        .map_err(|e| e.to_string())
}

fn c1_noiseless_exactness() -> Outcome {
    let grid = common::exactness_grid();
    let points = grid_points(&grid).map_err(|e| e.to_string())?;
    let start = Instant::now();
    let mut runner = TestRunner::new(Config {
        cases: 40,
        failure_persistence: None,
        rng_algorithm: proptest::test_runner::RngAlgorithm::ChaCha,
        ..Config::default()
    });
    let worst = std::cell::Cell::new(0.0f64);
    runner
        .run(&(0..points.len()), |k| {
            let p = points[k];
            for (v, best, ratio) in
                common::noiseless_localize(p, &grid, 5e-4).map_err(TestCaseError::fail)?
            {
                if best != p {
                    return Err(TestCaseError::fail(format!(
                        "{v} chose ({}, {}) for a source at ({}, {})",
                        best.x, best.y, p.x, p.y
                    )));
                }
                if matches!(v, Variant::Ccdpd | Variant::Lost) {
                    worst.set(worst.get().max(ratio));
                    if ratio > 1e-4 {
                        return Err(TestCaseError::fail(format!("{v} truth/median = {ratio:e}")));
                    }
                }
            }
            Ok(())
        })
        .map_err(|e| e.to_string())?;
    let secs = start.elapsed().as_secs_f64();
    if secs > 300.0 {
        return Err(format!("took {secs:.0} s"));
    }
    Ok(format!(
        "40 random grid sources, all 4 estimators exact; worst truth/median {:.1e}; {secs:.0} s",
        worst.get()
    ))
}

fn c2_tdoa_peak() -> Outcome {
    let bin = 1.0 / (DEFAULT_OVERSAMPLE as f64 * 20e6);
    let tol = 12.5e-9;
    let mut worst = 0.0f64;
    let mut beyond_half_bin = 0;
    for seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        let p = Position::new(rng.gen_range(-250.0..250.0), rng.gen_range(-200.0..200.0));
        let sc = single_source(p, 0.0, 1e-3);
        let set = covs(&sc, seed)?;
        let truth = sc.geometry().tdoas(&p);
        for (lcc, tau) in set.lccs.iter().zip(&truth) {
            let err = (lcc.lag_s(lcc.peak_index()) - tau).abs();
            worst = worst.max(err);
            if err > 0.5 * bin + 1e-15 {
                beyond_half_bin += 1;
            }
            if err > tol + 1e-15 {
                return Err(format!(
                    "seed {seed} pair {:?}: peak off by {:.2} ns",
                    lcc.pair,
                    err * 1e9
                ));
            }
        }
    }
    Ok(format!(
        "20 geometries × 3 pairs; worst peak offset {:.2} ns ≤ {:.1} ns; {beyond_half_bin}/60 beyond half a lag bin ({:.2} ns)",
        worst * 1e9,
        tol * 1e9,
        0.5 * bin * 1e9
    ))
}

fn c3_condition_one() -> Outcome {
    let mut worst_rest = 0.0f64;
    for seed in 0..5u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(2000 + seed);
        let p = Position::new(rng.gen_range(-250.0..250.0), rng.gen_range(-200.0..200.0));
        // B·T = 10 MHz × 1 ms
        let sc = single_source(p, f64::INFINITY, 1e-3);
        let set = covs(&sc, seed)?;
        let comp = set
            .composite(&sc.geometry().tdoas(&p), CompositeVariant::Modified)
            .map_err(|e| e.to_string())?;
        let eig = herm_eig(&comp.matrix).map_err(|e| e.to_string())?;
        let top = eig.values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let pos = eig.values.iter().filter(|&&v| v > 0.1 * top).count();
        let neg = eig.values.iter().filter(|&&v| v < -0.1 * top).count();
        let rest = eig
            .values
            .iter()
            .filter(|&&v| v.abs() <= 0.1 * top)
            .fold(0.0f64, |a, v| a.max(v.abs()))
            / top;
        worst_rest = worst_rest.max(rest);
        if pos != 1 || neg != 2 || rest > 0.05 {
            return Err(format!(
                "seed {seed}: {pos} positive, {neg} negative, remainder {rest:.3}·max"
            ));
        }
    }
    Ok(format!(
        "5 sources: 1 positive, 2 negative; largest remaining |λ| {worst_rest:.1e}·max"
    ))
}

fn c4_condition_zero_decay() -> Outcome {
    let b = 10e6;
    let offsets = [6.0 / b, 10.0 / b, 4.0 / b];
    let ratio_at = |duration: f64| -> Result<f64, String> {
        let mut sum = 0.0;
        for seed in 0..10u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(3000 + seed);
            let p = Position::new(rng.gen_range(-50.0..50.0), rng.gen_range(-50.0..50.0));
            let sc = single_source(p, 0.0, duration);
            let set = covs(&sc, seed)?;
            let hyp: Vec<f64> = sc
                .geometry()
                .tdoas(&p)
                .iter()
                .zip(offsets)
                .map(|(t, d)| t + d)
                .collect();
            let full = set
                .composite(&hyp, CompositeVariant::Full)
                .map_err(|e| e.to_string())?;
            let modified = set
                .composite(&hyp, CompositeVariant::Modified)
                .map_err(|e| e.to_string())?;
            sum += modified.matrix.norm() / (&full.matrix - &modified.matrix).norm();
        }
        Ok(sum / 10.0)
    };
    let short = ratio_at(5e-4)?;
    let long = ratio_at(1e-3)?;
    let decay = short / long;
    let target = std::f64::consts::SQRT_2;
    let msg = format!(
        "ratio {short:.4} → {long:.4}, decay ×{decay:.3} (√2 ± 25%: {:.3}..{:.3})",
        0.75 * target,
        1.25 * target
    );
    if (decay - target).abs() <= 0.25 * target {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn c5_default_surface() -> Outcome {
    let sc = default_scenario();
    let batch = simulate(&sc, sc.seed).map_err(|e| e.to_string())?;
    let truth = sc.source_positions();
    let radius = default_exclusion_radius(&sc);
    let worst_for = |dominance: DominanceOrder| -> Result<f64, String> {
        let mut params = EstimatorParams::for_scenario(Variant::Ccdpd, &sc);
        params.dominance = dominance;
        let ctx =
            PrecompContext::build(&params, &batch, &sc.geometry()).map_err(|e| e.to_string())?;
        let surface = evaluate_surface(&ctx, &sc.grid).map_err(|e| e.to_string())?;
        let minima = extract_minima(&surface, truth.len(), radius).map_err(|e| e.to_string())?;
        Ok(truth
            .iter()
            .map(|t| {
                minima
                    .iter()
                    .map(|m| m.distance(t))
                    .fold(f64::INFINITY, f64::min)
            })
            .fold(0.0, f64::max))
    };
    let start = Instant::now();
    let worst = worst_for(DominanceOrder::Algebraic)?;
    let secs = start.elapsed().as_secs_f64();
    let by_magnitude = worst_for(DominanceOrder::Magnitude)?;
    let limit = 2.0 * sc.grid.spacing * (1.0 + 1e-9);
    let msg = format!(
        "12 sources, farthest from a minimum {worst:.1} m (limit {:.0} m), {secs:.1} s; magnitude ordering: {by_magnitude:.1} m",
        2.0 * sc.grid.spacing
    );
    if worst <= limit && secs <= 1800.0 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn c6_snr_ordering() -> Outcome {
    let sc = default_scenario();
    let params: Vec<EstimatorParams> = Variant::ALL
        .iter()
        .map(|&v| EstimatorParams::for_scenario(v, &sc))
        .collect();
    let table = run_sweep(
        &sc,
        SweepAxis::Snr,
        &[-5.0],
        DEFAULT_TRIALS,
        &params,
        sc.seed,
    )
    .map_err(|e| e.to_string())?;
    let rmse = |v| table.row(v, -5.0).map(|r| r.rmse_m).unwrap_or(f64::NAN);
    let cc = rmse(Variant::Ccdpd);
    let others = [Variant::Dpd, Variant::Target, Variant::Lost];
    let best_other = others
        .iter()
        .map(|&v| rmse(v))
        .fold(f64::INFINITY, f64::min);
    let factor = best_other / cc;
    let msg = format!(
        "RMSE at −5 dB, J=20: ccdpd {cc:.1} m, dpd {:.1} m, target {:.1} m, lost {:.1} m; improvement ×{factor:.2} (factor-2 claim {})",
        rmse(Variant::Dpd),
        rmse(Variant::Target),
        rmse(Variant::Lost),
        if factor >= 2.0 { "holds" } else { "not met" }
    );
    if cc <= 0.75 * best_other {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn c7_bandwidth_crossover() -> Outcome {
    let sc = default_scenario();
    let params: Vec<EstimatorParams> = [Variant::Dpd, Variant::Ccdpd]
        .iter()
        .map(|&v| EstimatorParams::for_scenario(v, &sc))
        .collect();
    let table = run_sweep(
        &sc,
        SweepAxis::Bandwidth,
        &[1e6, 10e6],
        DEFAULT_TRIALS,
        &params,
        sc.seed,
    )
    .map_err(|e| e.to_string())?;
    let rmse = |v, b| table.row(v, b).map(|r| r.rmse_m).unwrap_or(f64::NAN);
    let (d1, c1) = (rmse(Variant::Dpd, 1e6), rmse(Variant::Ccdpd, 1e6));
    let (d10, c10) = (rmse(Variant::Dpd, 10e6), rmse(Variant::Ccdpd, 10e6));
    let msg =
        format!("1 MHz: dpd {d1:.1} m, ccdpd {c1:.1} m; 10 MHz: dpd {d10:.1} m, ccdpd {c10:.1} m");
    if c10 < d10 && d1 <= c1 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn c8_invariants() -> Outcome {
    let suites: [Suite; 7] = [
        ("projector", common::projector_is_idempotent_with_rank, 200),
        ("hermitian-composite", common::composites_are_hermitian, 20),
        ("lag-reversal", common::lag_reversal_holds, 20),
        (
            "orthonormal-subspace",
            common::subspaces_are_orthonormal,
            200,
        ),
        ("assignment", common::assignment_is_optimal, 300),
        ("linearity", common::synthesis_is_linear, 20),
        ("delay-inverse", common::delay_is_invertible, 100),
    ];
    let mut total = 0;
    for (name, check, cases) in suites {
        for seed in 0..cases {
            check(seed).map_err(|e| format!("{name} seed {seed}: {e}"))?;
        }
        total += cases;
    }
    Ok(format!("7 suites, {total} cases, all pass"))
}

fn c9_determinism() -> Outcome {
    let bin = env!("CARGO_BIN_EXE_ccdpd");
    let o = Command::new(bin)
        .arg("selftest")
        .output()
        .map_err(|e| e.to_string())?;
    if o.status.code() != Some(0) {
        return Err(format!(
            "selftest exited {:?}: {}",
            o.status.code(),
            String::from_utf8_lossy(&o.stdout)
        ));
    }
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let path = |n: &str| dir.path().join(n).to_str().unwrap().to_string();
    let run = |args: &[&str]| -> Result<(), String> {
        let o = Command::new(bin)
            .args(args)
            .output()
            .map_err(|e| e.to_string())?;
        if o.status.success() {
            Ok(())
        } else {
            Err(String::from_utf8_lossy(&o.stderr).into_owned())
        }
    };
    run(&["synth", "--out", &path("b.ccdp")])?;
    run(&[
        "costmap",
        "--input",
        &path("b.ccdp"),
        "--out",
        &path("file.csv"),
    ])?;
    run(&["costmap", "--out", &path("mem.csv")])?;
    let a = std::fs::read(path("file.csv")).map_err(|e| e.to_string())?;
    let b = std::fs::read(path("mem.csv")).map_err(|e| e.to_string())?;
    if a != b {
        return Err("costmap from file differs from in-memory costmap".into());
    }
    let bytes = std::fs::read(path("b.ccdp")).map_err(|e| e.to_string())?;
    let batch = read_batch(bytes.as_slice()).map_err(|e| e.to_string())?;
    let mut again = Vec::new();
    write_batch(&batch, &mut again).map_err(|e| e.to_string())?;
    if again != bytes {
        return Err("CCDP rewrite is not byte-identical".into());
    }
    let mut sc = default_scenario();
    sc.duration_s = 1e-4;
    let fresh = synthesize_received(&sc, 4)
        .map_err(|e| e.to_string())?
        .quantized();
    let mut buf = Vec::new();
    write_batch(&fresh, &mut buf).map_err(|e| e.to_string())?;
    let back = read_batch(buf.as_slice()).map_err(|e| e.to_string())?;
    let exact = back
        .stations
        .iter()
        .flat_map(|s| s.iter())
        .zip(fresh.stations.iter().flat_map(|s| s.iter()))
        .all(|(x, y)| x.re.to_bits() == y.re.to_bits() && x.im.to_bits() == y.im.to_bits());
    if !exact {
        return Err("CCDP round trip changed sample bits".into());
    }
    Ok(format!(
        "selftest 0; costmap file/in-memory identical ({} bytes); CCDP round trip bit-exact",
        a.len()
    ))
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("C1 noiseless exactness", c1_noiseless_exactness),
        ("C2 TDOA peak", c2_tdoa_peak),
        ("C3 condition-1 eigenstructure", c3_condition_one),
        ("C4 condition-0 decay", c4_condition_zero_decay),
        ("C5 default cost surface", c5_default_surface),
        ("C6 RMSE ordering at -5 dB", c6_snr_ordering),
        ("C7 bandwidth crossover", c7_bandwidth_crossover),
        ("C8 invariant suites", c8_invariants),
        ("C9 determinism and format", c9_determinism),
    ];
    let filter: Vec<String> = std::env::args()
        .skip(1)
        .filter(|a| !a.starts_with('-'))
        .collect();
    let mut failed = 0;
    for (name, run) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(run).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {name}: {detail} [{secs:.1} s]"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {name}: {detail} [{secs:.1} s]");
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
