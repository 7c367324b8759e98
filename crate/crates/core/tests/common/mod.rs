#![allow(dead_code)]

use ccdpd::estimators::{evaluate_surface, EstimatorParams, PrecompContext, Variant};
use ccdpd::harness::{assignment_cost, brute_force_assignment, hungarian, matched_errors};
use ccdpd::scenario::{default_scenario, GridSpec, Position, ScenarioConfig, SourceConfig};
use ccdpd::selftest::{noiseless_probe, single_source_params};
use ccdpd::synth::{apply_delay, gen_bandlimited_wgn, simulate, synthesize_received};
use ccdpd::xcov::{
    dominant_projector, hermitian_asymmetry, lag_window, signal_noise_split, CompositeVariant,
    CrossCovSet, DominanceOrder, DEFAULT_OVERSAMPLE,
};
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Check = Result<(), String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Check {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

/// Default layout, short record, a few sources, moderate noise.
pub fn small_scenario(seed: u64) -> ScenarioConfig {
    let mut sc = default_scenario();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sc.duration_s = 1e-4;
    sc.snr_db = 5.0;
    let q = rng.gen_range(1..=4);
    sc.sources = (0..q)
        .map(|_| {
            SourceConfig::new(
                Position::new(rng.gen_range(-200.0..200.0), rng.gen_range(-150.0..150.0)),
                10e6,
            )
        })
        .collect();
    sc
}

fn random_hypothesis(sc: &ScenarioConfig, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let p = Position::new(rng.gen_range(-250.0..250.0), rng.gen_range(-200.0..200.0));
    sc.geometry().tdoas(&p)
}

fn covs_for(sc: &ScenarioConfig, seed: u64) -> Result<CrossCovSet, String> {
    let b = simulate(sc, seed).map_err(|e| e.to_string())?;
    CrossCovSet::compute(&b, DEFAULT_OVERSAMPLE, lag_window(&sc.geometry(), b.f_s_hz))
        .map_err(|e| e.to_string())
}

pub fn composites_are_hermitian(seed: u64) -> Check {
    let sc = small_scenario(seed);
    let covs = covs_for(&sc, seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x55);
    for _ in 0..4 {
        let tdoas = random_hypothesis(&sc, &mut rng);
        for variant in [CompositeVariant::Full, CompositeVariant::Modified] {
            let c = covs.composite(&tdoas, variant).map_err(|e| e.to_string())?;
            let asym = hermitian_asymmetry(&c.matrix);
            ensure(asym < 1e-12, || {
                format!("{variant:?} composite asymmetry {asym:e}")
            })?;
        }
        let full = covs
            .composite(&tdoas, CompositeVariant::Full)
            .unwrap()
            .matrix;
        let modified = covs
            .composite(&tdoas, CompositeVariant::Modified)
            .unwrap()
            .matrix;
        let m = sc.stations[0].num_elements;
        let diff = full - modified;
        for i in 0..sc.stations.len() {
            for j in 0..sc.stations.len() {
                let block = diff.view((i * m, j * m), (m, m));
                if i == j {
                    let err = (block - &covs.autocovs[i].matrix).norm();
                    ensure(err == 0.0, || {
                        format!("diagonal block {i} differs by {err:e}")
                    })?;
                } else {
                    ensure(block.norm() == 0.0, || {
                        format!("off-diagonal block ({i},{j}) differs")
                    })?;
                }
            }
        }
    }
    Ok(())
}

pub fn lag_reversal_holds(seed: u64) -> Check {
    let sc = small_scenario(seed);
    let covs = covs_for(&sc, seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x77);
    let l = sc.stations.len();
    for _ in 0..8 {
        let i = rng.gen_range(0..l);
        let j = (i + rng.gen_range(1..l)) % l;
        let max = covs.lccs[0].max_lag_s() * 0.9;
        let tau = rng.gen_range(-max..max);
        let fwd = covs.cross(i, j, tau).map_err(|e| e.to_string())?;
        let rev = covs.cross(j, i, -tau).map_err(|e| e.to_string())?;
        let err = (rev - fwd.adjoint()).norm() / fwd.norm().max(f64::MIN_POSITIVE);
        ensure(err < 1e-12, || {
            format!("R_{j}{i}(-τ) vs R_{i}{j}(τ)ᴴ mismatch {err:e}")
        })?;
    }
    for lcc in &covs.lccs {
        let rev = lcc.reversed();
        for bin in [-(lcc.max_bin as i64), -3, 0, 5, lcc.max_bin as i64] {
            let err = (rev.at_bin(bin) - lcc.at_bin(-bin).adjoint()).norm();
            ensure(err == 0.0, || {
                format!("reversed sequence differs at bin {bin}")
            })?;
        }
    }
    Ok(())
}

fn random_hermitian(n: usize, rng: &mut ChaCha8Rng) -> DMatrix<Complex64> {
    let g = DMatrix::from_fn(n, n, |_, _| {
        Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
    });
    (&g + g.adjoint()) * Complex64::new(0.5, 0.0)
}

pub fn projector_is_idempotent_with_rank(seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(2..=24);
    let k = rng.gen_range(0..n);
    let h = random_hermitian(n, &mut rng);
    for order in [DominanceOrder::Algebraic, DominanceOrder::Magnitude] {
        let p = dominant_projector(&h, k, order).map_err(|e| e.to_string())?;
        let idem = (&p * &p - &p).norm();
        let herm = (&p - p.adjoint()).norm();
        let rank = p.trace().re;
        ensure(
            idem < 1e-10 && herm < 1e-12 && (rank - k as f64).abs() < 1e-9,
            || format!("n={n} k={k} {order:?}: ‖P²−P‖={idem:e} ‖P−Pᴴ‖={herm:e} tr={rank}"),
        )?;
    }
    Ok(())
}

pub fn subspaces_are_orthonormal(seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(2..=24);
    let q = rng.gen_range(0..=n);
    let h = random_hermitian(n, &mut rng);
    let s = signal_noise_split(&h, q).map_err(|e| e.to_string())?;
    let mut all = DMatrix::zeros(n, n);
    all.columns_mut(0, q).copy_from(&s.signal);
    all.columns_mut(q, n - q).copy_from(&s.noise);
    let gram = all.adjoint() * &all;
    let err = (gram - DMatrix::identity(n, n)).norm();
    ensure(err < 1e-10, || format!("n={n} q={q}: ‖UᴴU − I‖ = {err:e}"))?;
    let sorted = s.eigenvalues.windows(2).all(|w| w[0] >= w[1]);
    ensure(sorted, || "eigenvalues not descending".into())
}

pub fn assignment_is_optimal(seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(1..=6);
    let truth: Vec<Position> = (0..n)
        .map(|_| Position::new(rng.gen_range(-300.0..300.0), rng.gen_range(-300.0..300.0)))
        .collect();
    let est: Vec<Position> = (0..n)
        .map(|_| Position::new(rng.gen_range(-300.0..300.0), rng.gen_range(-300.0..300.0)))
        .collect();
    let cost: Vec<Vec<f64>> = truth
        .iter()
        .map(|t| est.iter().map(|e| t.distance(e).powi(2)).collect())
        .collect();
    let best = assignment_cost(&cost, &brute_force_assignment(&cost));
    let fast = assignment_cost(&cost, &hungarian(&cost));
    ensure((best - fast).abs() <= 1e-9 * best.max(1.0), || {
        format!("n={n}: hungarian {fast} vs optimum {best}")
    })?;
    let matched: f64 = matched_errors(&est, &truth)
        .map_err(|e| e.to_string())?
        .iter()
        .map(|d| d * d)
        .sum();
    ensure((matched - best).abs() <= 1e-9 * best.max(1.0), || {
        format!("matched errors sum {matched} vs {best}")
    })
}

pub fn synthesis_is_linear(seed: u64) -> Check {
    let mut sc = small_scenario(seed);
    sc.sources.truncate(2);
    if sc.sources.len() < 2 {
        sc.sources
            .push(SourceConfig::new(Position::new(-120.0, 80.0), 10e6));
    }
    let zero = vec![Complex64::new(0.0, 0.0); 3];
    let mut only_a = sc.clone();
    only_a.sources[1].attenuation = zero.clone();
    let mut only_b = sc.clone();
    only_b.sources[0].attenuation = zero;
    let both = synthesize_received(&sc, seed).map_err(|e| e.to_string())?;
    let a = synthesize_received(&only_a, seed).map_err(|e| e.to_string())?;
    let b = synthesize_received(&only_b, seed).map_err(|e| e.to_string())?;
    for l in 0..both.num_stations() {
        let err =
            (&both.stations[l] - &a.stations[l] - &b.stations[l]).norm() / both.stations[l].norm();
        ensure(err < 1e-12, || {
            format!("superposition error {err:e} at station {l}")
        })?;
    }
    let g = Complex64::from_polar(0.37, 1.1);
    let mut scaled = sc.clone();
    for s in &mut scaled.sources {
        s.attenuation = vec![g; 3];
    }
    let sb = synthesize_received(&scaled, seed).map_err(|e| e.to_string())?;
    let expect = both.scaled(g);
    for l in 0..sb.num_stations() {
        let err = (&sb.stations[l] - &expect.stations[l]).norm() / expect.stations[l].norm();
        ensure(err < 1e-12, || {
            format!("homogeneity error {err:e} at station {l}")
        })?;
    }
    Ok(())
}

pub fn delay_is_invertible(seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(256..2048);
    let b = rng.gen_range(1e6..10e6);
    let fs = 20e6;
    let s = gen_bandlimited_wgn(n, b, fs, seed).map_err(|e| e.to_string())?;
    let duration = n as f64 / fs;
    let tau = rng.gen_range(-0.2 * duration..0.2 * duration);
    let fo = 1.575e9;
    let fwd = apply_delay(&s.samples, tau, fs, fo).map_err(|e| e.to_string())?;
    let back = apply_delay(&fwd, -tau, fs, fo).map_err(|e| e.to_string())?;
    let num: f64 = back
        .iter()
        .zip(&s.samples)
        .map(|(a, b)| (a - b).norm_sqr())
        .sum();
    let den: f64 = s.samples.iter().map(|v| v.norm_sqr()).sum();
    let err = (num / den).sqrt();
    ensure(err < 1e-10, || {
        format!("n={n} τ={tau:e}: round-trip error {err:e}")
    })
}

/// The exactness region: a 600 m square sampled every 10 m, offset so no
/// grid point lands on a station.
pub fn exactness_grid() -> GridSpec {
    GridSpec {
        x_min: -300.0,
        x_max: 300.0,
        y_min: -305.0,
        y_max: 295.0,
        spacing: 10.0,
    }
}

/// Best grid point of each estimator for one noiseless emitter, with the
/// ratio of the truth cost to the surface median.
pub fn noiseless_localize(
    source: Position,
    grid: &GridSpec,
    duration_s: f64,
) -> Result<Vec<(Variant, Position, f64)>, String> {
    let mut sc = noiseless_probe(source, duration_s, 60.0);
    sc.grid = grid.clone();
    let batch = synthesize_received(&sc, 11).map_err(|e| e.to_string())?;
    let geom = sc.geometry();
    Variant::ALL
        .iter()
        .map(|&v| {
            let params: EstimatorParams = single_source_params(v, &sc);
            let ctx = PrecompContext::build(&params, &batch, &geom).map_err(|e| e.to_string())?;
            let s = evaluate_surface(&ctx, grid).map_err(|e| e.to_string())?;
            let best = s.points[s.best_index()];
            let at_truth = ctx.cost(&source).map_err(|e| e.to_string())?;
            Ok((v, best, at_truth.abs() / s.median().abs()))
        })
        .collect()
}
