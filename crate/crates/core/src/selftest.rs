//! Fast built-in consistency checks run by `ccdpd selftest`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::estimators::{evaluate_surface, EstimatorParams, PrecompContext, Variant};
use crate::scenario::{
    default_scenario, triangle_stations, GridSpec, Position, ScenarioConfig, SourceConfig,
};
use crate::synth::{read_batch, simulate, synthesize_received, write_batch};
use crate::xcov::{
    dominant_projector, herm_eig, lag_window, CompositeVariant, CrossCovSet, DominanceOrder,
    DEFAULT_OVERSAMPLE,
};

#[derive(Debug, Clone)]
pub struct CheckOutcome {
    pub name: String,
    pub error: Option<String>,
}

impl CheckOutcome {
    pub fn passed(&self) -> bool {
        self.error.is_none()
    }
}

fn check(name: &str, f: impl FnOnce() -> Result<()>) -> CheckOutcome {
    CheckOutcome {
        name: name.to_string(),
        error: f().err().map(|e| e.to_string()),
    }
}

fn ensure(cond: bool, what: impl FnOnce() -> String) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::InsufficientData(what()))
    }
}

fn random_hermitian(n: usize, seed: u64) -> DMatrix<Complex64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = DMatrix::from_fn(n, n, |_, _| {
        Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
    });
    (&g + g.adjoint()) * Complex64::new(0.5, 0.0)
}

/// Noiseless single emitter on a compact triangle, short record, small grid
/// centred on the emitter.
pub fn noiseless_probe(source: Position, duration_s: f64, half_width: f64) -> ScenarioConfig {
    let mut sc = default_scenario();
    sc.stations = triangle_stations(120.0, 8, 1.5 * sc.wavelength());
    sc.duration_s = duration_s;
    sc.snr_db = f64::INFINITY;
    sc.sources = vec![SourceConfig::new(source, 10e6)];
    sc.grid = GridSpec {
        x_min: source.x - half_width,
        x_max: source.x + half_width,
        y_min: source.y - half_width,
        y_max: source.y + half_width,
        spacing: 10.0,
    };
    sc
}

/// Parameters for the noiseless single-source exactness runs.
pub fn single_source_params(variant: Variant, scenario: &ScenarioConfig) -> EstimatorParams {
    let mut p = EstimatorParams::for_scenario(variant, scenario);
    p.num_sources = 1;
    p.projector_order = 1;
    p.target_order = 1;
    match variant {
        Variant::Dpd => p.channels = 16,
        Variant::Lost => {
            p.channels = 4;
            p.lost_signal_dim = 4;
        }
        _ => {}
    }
    p
}

pub fn run_selftest() -> Vec<CheckOutcome> {
    let mut out = vec![
        check("eigen-reconstruction", || {
            let h = random_hermitian(16, 1);
            let e = herm_eig(&h)?;
            let lam = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
                16,
                e.values.iter().map(|&v| Complex64::new(v, 0.0)),
            ));
            let rec = &e.vectors * lam * e.vectors.adjoint();
            let res = (&h - rec).norm() / h.norm();
            ensure(res < 1e-10, || format!("residual {res:e}"))
        }),
        check("projector-idempotent", || {
            let h = random_hermitian(12, 2);
            let p = dominant_projector(&h, 3, DominanceOrder::Algebraic)?;
            let err = (&p * &p - &p).norm();
            ensure(err < 1e-10 && (p.trace().re - 3.0).abs() < 1e-9, || {
                format!("‖P²−P‖ = {err:e}")
            })
        }),
        check("batch-roundtrip", || {
            let mut sc = default_scenario();
            sc.duration_s = 2e-5;
            let b = simulate(&sc, 3)?.quantized();
            let mut buf = Vec::new();
            write_batch(&b, &mut buf)?;
            let back = read_batch(buf.as_slice())?;
            let same =
                back.stations == b.stations && back.f_s_hz == b.f_s_hz && back.f_o_hz == b.f_o_hz;
            ensure(same, || "samples differ after reload".into())
        }),
    ];
    let p0 = Position::new(40.0, -30.0);
    let sc = noiseless_probe(p0, 2e-4, 60.0);
    out.push(check("lag-reversal", || {
        let b = synthesize_received(&sc, 5)?;
        let g = sc.geometry();
        let covs = CrossCovSet::compute(&b, DEFAULT_OVERSAMPLE, lag_window(&g, b.f_s_hz))?;
        let tau = g.tdoas(&p0)[0];
        let fwd = covs.cross(0, 1, tau)?;
        let rev = covs.cross(1, 0, -tau)?;
        let err = (rev - fwd.adjoint()).norm() / fwd.norm();
        ensure(err < 1e-12, || format!("relative mismatch {err:e}"))
    }));
    out.push(check("condition-1-eigenstructure", || {
        let b = synthesize_received(&sc, 5)?;
        let g = sc.geometry();
        let covs = CrossCovSet::compute(&b, DEFAULT_OVERSAMPLE, lag_window(&g, b.f_s_hz))?;
        let comp = covs.composite(&g.tdoas(&p0), CompositeVariant::Modified)?;
        let e = herm_eig(&comp.matrix)?;
        let top = e.values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let pos = e.values.iter().filter(|&&v| v > 0.1 * top).count();
        let neg = e.values.iter().filter(|&&v| v < -0.1 * top).count();
        ensure(pos == 1 && neg == 2, || {
            format!("{pos} positive and {neg} negative dominant eigenvalues")
        })
    }));
    for v in Variant::ALL {
        out.push(check(&format!("noiseless-exact-{v}"), || {
            let b = synthesize_received(&sc, 5)?;
            let ctx = PrecompContext::build(&single_source_params(v, &sc), &b, &sc.geometry())?;
            let s = evaluate_surface(&ctx, &sc.grid)?;
            let best = s.points[s.best_index()];
            ensure(best.distance(&p0) < 1e-6, || {
                format!("best point ({}, {})", best.x, best.y)
            })
        }));
    }
    out
}
