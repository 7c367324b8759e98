//! Station geometry, array response and the position-hypothesis grid.
//!
//! Positions are planar (the `z` coordinate is carried for serialization but
//! ignored by every range computation). Each station is a uniform circular
//! array; its response to an emitter is modelled as a far-field plane wave
//! arriving from the emitter's azimuth, while inter-station propagation
//! delays use the exact Euclidean range.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Seed for the random offsets of the default 3×4 source layout.
pub const DEFAULT_LAYOUT_SEED: u64 = 0x3c4d_5e6f;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Position {
    pub x: f64,
    pub y: f64,
    #[serde(default)]
    pub z: f64,
}

impl Position {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y, z: 0.0 }
    }

    /// Horizontal distance.
    pub fn distance(&self, other: &Position) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

/// A uniform circular array at a fixed location.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StationConfig {
    pub center: Position,
    pub num_elements: usize,
    pub array_radius_m: f64,
    /// Element azimuths in radians. Empty means uniform `2πm/M`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub element_azimuths_rad: Vec<f64>,
}

impl StationConfig {
    pub fn uniform(center: Position, num_elements: usize, array_radius_m: f64) -> Self {
        Self {
            center,
            num_elements,
            array_radius_m,
            element_azimuths_rad: Vec::new(),
        }
    }

    pub fn element_azimuth(&self, m: usize) -> f64 {
        if self.element_azimuths_rad.is_empty() {
            2.0 * PI * m as f64 / self.num_elements as f64
        } else {
            self.element_azimuths_rad[m]
        }
    }

    pub fn validate(&self, index: usize) -> Result<()> {
        let field = |name: &str| format!("stations[{index}].{name}");
        if !self.center.is_finite() {
            return Err(Error::validation(field("center"), "non-finite coordinate"));
        }
        if self.num_elements < 2 {
            return Err(Error::validation(
                field("num_elements"),
                "need at least 2 elements",
            ));
        }
        if !(self.array_radius_m > 0.0 && self.array_radius_m.is_finite()) {
            return Err(Error::validation(
                field("array_radius_m"),
                "must be positive",
            ));
        }
        if !self.element_azimuths_rad.is_empty() {
            let az = &self.element_azimuths_rad;
            if az.len() != self.num_elements {
                return Err(Error::validation(
                    field("element_azimuths_rad"),
                    format!("expected {} azimuths, got {}", self.num_elements, az.len()),
                ));
            }
            let in_range = az.iter().all(|&a| (0.0..2.0 * PI).contains(&a));
            let increasing = az.windows(2).all(|w| w[0] < w[1]);
            if !in_range || !increasing {
                return Err(Error::validation(
                    field("element_azimuths_rad"),
                    "azimuths must be strictly increasing in [0, 2π)",
                ));
            }
        }
        Ok(())
    }
}

/// Unit-norm array response of one station.
#[derive(Debug, Clone, PartialEq)]
pub struct SteeringVector(pub DVector<Complex64>);

impl SteeringVector {
    pub fn entries(&self) -> &DVector<Complex64> {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub spacing: f64,
}

impl GridSpec {
    fn axis_len(min: f64, max: f64, spacing: f64) -> usize {
        if max < min {
            0
        } else {
            ((max - min) / spacing + 1e-9).floor() as usize + 1
        }
    }

    pub fn nx(&self) -> usize {
        Self::axis_len(self.x_min, self.x_max, self.spacing)
    }

    pub fn ny(&self) -> usize {
        Self::axis_len(self.y_min, self.y_max, self.spacing)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.x_min, self.x_max, self.y_min, self.y_max, self.spacing]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::validation("grid", "non-finite bound"));
        }
        if self.spacing <= 0.0 {
            return Err(Error::validation("grid.spacing", "must be positive"));
        }
        if self.nx() == 0 || self.ny() == 0 {
            return Err(Error::validation("grid", "grid contains no points"));
        }
        Ok(())
    }
}

/// Row-major lattice: `y` outer, `x` inner, starting at the `(x_min, y_min)` corner.
pub fn grid_points(grid: &GridSpec) -> Result<Vec<Position>> {
    grid.validate()?;
    let (nx, ny) = (grid.nx(), grid.ny());
    let mut out = Vec::with_capacity(nx * ny);
    for iy in 0..ny {
        let y = grid.y_min + iy as f64 * grid.spacing;
        for ix in 0..nx {
            out.push(Position::new(grid.x_min + ix as f64 * grid.spacing, y));
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceConfig {
    pub position: Position,
    pub bandwidth_hz: f64,
    /// Complex path attenuation per station, as `[re, im]`. Empty means `1+0j` everywhere.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub attenuation: Vec<Complex64>,
}

impl SourceConfig {
    pub fn new(position: Position, bandwidth_hz: f64) -> Self {
        Self {
            position,
            bandwidth_hz,
            attenuation: Vec::new(),
        }
    }

    pub fn attenuation_at(&self, station: usize) -> Complex64 {
        self.attenuation
            .get(station)
            .copied()
            .unwrap_or(Complex64::new(1.0, 0.0))
    }
}

mod snr_serde {
    use serde::{Deserialize, Deserializer, Serializer};

    // `null` encodes a noiseless (infinite SNR) scenario.
    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_infinite() && *v > 0.0 {
            s.serialize_none()
        } else {
            s.serialize_some(v)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

fn default_speed_of_light() -> f64 {
    SPEED_OF_LIGHT
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub stations: Vec<StationConfig>,
    pub f_o_hz: f64,
    pub f_s_hz: f64,
    pub duration_s: f64,
    pub sources: Vec<SourceConfig>,
    /// Per-element, per-source SNR. `+inf` (JSON `null`) disables noise.
    #[serde(with = "snr_serde")]
    pub snr_db: f64,
    pub grid: GridSpec,
    pub seed: u64,
    #[serde(default = "default_speed_of_light")]
    pub speed_of_light: f64,
}

impl ScenarioConfig {
    pub fn num_samples(&self) -> usize {
        (self.duration_s * self.f_s_hz).round() as usize
    }

    pub fn wavelength(&self) -> f64 {
        self.speed_of_light / self.f_o_hz
    }

    pub fn geometry(&self) -> Geometry {
        Geometry {
            stations: self.stations.clone(),
            f_o_hz: self.f_o_hz,
            speed_of_light: self.speed_of_light,
        }
    }

    pub fn source_positions(&self) -> Vec<Position> {
        self.sources.iter().map(|s| s.position).collect()
    }

    /// Truncated SHA-256 of the canonical JSON form.
    pub fn content_hash(&self) -> u64 {
        let json = serde_json::to_vec(self).unwrap_or_default();
        let digest = Sha256::digest(&json);
        u64::from_le_bytes(digest[..8].try_into().expect("digest has 32 bytes"))
    }

    pub fn validate(&self) -> Result<()> {
        if self.stations.len() < 2 {
            return Err(Error::validation("stations", "need at least 2 stations"));
        }
        for (i, s) in self.stations.iter().enumerate() {
            s.validate(i)?;
        }
        let m = self.stations[0].num_elements;
        if self.stations.iter().any(|s| s.num_elements != m) {
            return Err(Error::validation(
                "stations.num_elements",
                "all stations must have the same element count",
            ));
        }
        for (i, a) in self.stations.iter().enumerate() {
            for b in &self.stations[i + 1..] {
                if a.center.distance(&b.center) == 0.0 {
                    return Err(Error::validation(
                        "stations.center",
                        "duplicate station location",
                    ));
                }
            }
        }
        if !(self.f_o_hz > 0.0 && self.f_o_hz.is_finite()) {
            return Err(Error::validation("f_o_hz", "must be positive"));
        }
        if !(self.f_s_hz > 0.0 && self.f_s_hz.is_finite()) {
            return Err(Error::validation("f_s_hz", "must be positive"));
        }
        if !(self.duration_s > 0.0) || self.num_samples() < 1 {
            return Err(Error::validation(
                "duration_s",
                "duration·f_s must be at least 1",
            ));
        }
        if !(self.speed_of_light > 0.0) {
            return Err(Error::validation("speed_of_light", "must be positive"));
        }
        if self.snr_db.is_nan() || self.snr_db == f64::NEG_INFINITY {
            return Err(Error::validation("snr_db", "must be a number or null"));
        }
        for (q, src) in self.sources.iter().enumerate() {
            if !src.position.is_finite() {
                return Err(Error::validation(
                    format!("sources[{q}].position"),
                    "non-finite",
                ));
            }
            if !(src.bandwidth_hz > 0.0 && src.bandwidth_hz <= self.f_s_hz / 2.0) {
                return Err(Error::validation(
                    format!("sources[{q}].bandwidth_hz"),
                    format!(
                        "bandwidth {} Hz must lie in (0, f_s/2 = {} Hz]",
                        src.bandwidth_hz,
                        self.f_s_hz / 2.0
                    ),
                ));
            }
            if !src.attenuation.is_empty() && src.attenuation.len() != self.stations.len() {
                return Err(Error::validation(
                    format!("sources[{q}].attenuation"),
                    "need one coefficient per station",
                ));
            }
        }
        self.grid.validate()
    }
}

/// The receiver-side knowledge shared by every estimator: where the
/// stations are and how their arrays respond. Carries no source truth.
#[derive(Debug, Clone, PartialEq)]
pub struct Geometry {
    pub stations: Vec<StationConfig>,
    pub f_o_hz: f64,
    pub speed_of_light: f64,
}

impl Geometry {
    pub fn num_stations(&self) -> usize {
        self.stations.len()
    }

    pub fn num_elements(&self) -> usize {
        self.stations[0].num_elements
    }

    pub fn delay(&self, station: usize, p: &Position) -> f64 {
        propagation_delay(&self.stations[station], p, self.speed_of_light)
    }

    pub fn tdoas(&self, p: &Position) -> Vec<f64> {
        tdoa_vector(p, &self.stations, self.speed_of_light)
    }

    pub fn steering(&self, station: usize, p: &Position) -> Result<SteeringVector> {
        steering_vector(&self.stations[station], p, self.f_o_hz, self.speed_of_light).map_err(|e| {
            match e {
                Error::DegenerateGeometry { .. } => Error::DegenerateGeometry { station },
                other => other,
            }
        })
    }

    pub fn steering_all(&self, p: &Position) -> Result<Vec<SteeringVector>> {
        (0..self.num_stations())
            .map(|l| self.steering(l, p))
            .collect()
    }

    /// Block-diagonal `LM × L` matrix with station `l`'s steering vector in column `l`.
    pub fn steering_matrix(&self, p: &Position) -> Result<DMatrix<Complex64>> {
        let steer = self.steering_all(p)?;
        Ok(block_steering(&steer))
    }

    /// Largest inter-station propagation difference, i.e. the longest baseline over c.
    pub fn max_tdoa(&self) -> f64 {
        let mut best = 0.0f64;
        for (i, a) in self.stations.iter().enumerate() {
            for b in &self.stations[i + 1..] {
                best = best.max(a.center.distance(&b.center) / self.speed_of_light);
            }
        }
        best
    }
}

pub fn block_steering(steer: &[SteeringVector]) -> DMatrix<Complex64> {
    let m = steer[0].len();
    let l = steer.len();
    let mut a = DMatrix::zeros(l * m, l);
    for (col, s) in steer.iter().enumerate() {
        a.view_mut((col * m, col), (m, 1)).copy_from(&s.0);
    }
    a
}

pub fn propagation_delay(station: &StationConfig, p: &Position, speed_of_light: f64) -> f64 {
    station.center.distance(p) / speed_of_light
}

/// Station pairs `(i, j)`, `i < j`, in the order `(0,1), (0,2), …, (L-2, L-1)`.
pub fn station_pairs(num_stations: usize) -> Vec<(usize, usize)> {
    let mut pairs = Vec::with_capacity(num_stations * num_stations.saturating_sub(1) / 2);
    for i in 0..num_stations {
        for j in i + 1..num_stations {
            pairs.push((i, j));
        }
    }
    pairs
}

/// `τ_j(p) − τ_i(p)` for every pair in [`station_pairs`] order.
pub fn tdoa_vector(p: &Position, stations: &[StationConfig], speed_of_light: f64) -> Vec<f64> {
    let delays: Vec<f64> = stations
        .iter()
        .map(|s| propagation_delay(s, p, speed_of_light))
        .collect();
    station_pairs(stations.len())
        .into_iter()
        .map(|(i, j)| delays[j] - delays[i])
        .collect()
}

pub fn steering_vector(
    station: &StationConfig,
    p: &Position,
    f_o_hz: f64,
    speed_of_light: f64,
) -> Result<SteeringVector> {
    let dx = p.x - station.center.x;
    let dy = p.y - station.center.y;
    if dx == 0.0 && dy == 0.0 {
        return Err(Error::DegenerateGeometry { station: 0 });
    }
    let azimuth = dy.atan2(dx);
    let m = station.num_elements;
    let k_r = 2.0 * PI * station.array_radius_m * f_o_hz / speed_of_light;
    let norm = 1.0 / (m as f64).sqrt();
    let v = DVector::from_fn(m, |i, _| {
        let phase = k_r * (azimuth - station.element_azimuth(i)).cos();
        Complex64::from_polar(norm, phase)
    });
    Ok(SteeringVector(v))
}

/// The evaluation scenario: three stations on an equilateral triangle of
/// circumradius 300 m, 8-element circular arrays of radius 1.5λ at GPS L1,
/// and twelve 10 MHz emitters jittered about a 3×4 lattice.
pub fn default_scenario() -> ScenarioConfig {
    let f_o_hz = 1.575e9;
    let lambda = SPEED_OF_LIGHT / f_o_hz;
    let stations = triangle_stations(300.0, 8, 1.5 * lambda);
    let bandwidth_hz = 10e6;
    let sources = lattice_sources(3, 4, 100.0, DEFAULT_LAYOUT_SEED)
        .into_iter()
        .map(|p| SourceConfig::new(p, bandwidth_hz))
        .collect();
    ScenarioConfig {
        stations,
        f_o_hz,
        f_s_hz: 20e6,
        duration_s: 1e-3,
        sources,
        snr_db: -5.0,
        grid: GridSpec {
            x_min: -250.0,
            x_max: 250.0,
            y_min: -200.0,
            y_max: 200.0,
            spacing: 10.0,
        },
        seed: 1,
        speed_of_light: SPEED_OF_LIGHT,
    }
}

/// Three uniform circular arrays on an equilateral triangle of the given
/// circumradius, the first due north of the origin.
pub fn triangle_stations(
    circumradius: f64,
    num_elements: usize,
    array_radius_m: f64,
) -> Vec<StationConfig> {
    (0..3)
        .map(|l| {
            let ang = PI / 2.0 + 2.0 * PI * l as f64 / 3.0;
            StationConfig::uniform(
                Position::new(circumradius * ang.cos(), circumradius * ang.sin()),
                num_elements,
                array_radius_m,
            )
        })
        .collect()
}

/// `rows × cols` lattice of pitch `pitch` centered on the origin, each point
/// offset uniformly within ±25% of the pitch in both axes.
pub fn lattice_sources(rows: usize, cols: usize, pitch: f64, seed: u64) -> Vec<Position> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x0 = -(cols as f64 - 1.0) / 2.0 * pitch;
    let y0 = -(rows as f64 - 1.0) / 2.0 * pitch;
    let jitter = 0.25 * pitch;
    let mut out = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        for c in 0..cols {
            let dx = rng.gen_range(-jitter..=jitter);
            let dy = rng.gen_range(-jitter..=jitter);
            out.push(Position::new(
                x0 + c as f64 * pitch + dx,
                y0 + r as f64 * pitch + dy,
            ));
        }
    }
    out
}
