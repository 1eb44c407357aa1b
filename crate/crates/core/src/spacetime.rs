//! Interval classification of detection events and fiber propagation delays.
//!
//! Times are integer picoseconds and positions integer millimetres. The speed
//! of light is the exact rational `299_792_458 / 10^9` mm/ps, so the
//! classification below is exact for any pair of `i64` events.

use num_bigint::BigInt;

use crate::error::{Error, Result};

/// Speed of light in metres per second.
pub const SPEED_OF_LIGHT_M_PER_S: i64 = 299_792_458;

/// c = 299 792 458 / PS_SCALE mm/ps.
const PS_SCALE: i64 = 1_000_000_000;

/// Default fiber group index.
pub const DEFAULT_GROUP_INDEX: f64 = 1.5;

/// Default bound on the relative detection timing, in picoseconds.
pub const DEFAULT_TIMING_UNCERTAINTY_PS: i64 = 1_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct SpacetimeEvent {
    pub t: i64,
    pub x: i64,
    pub y: i64,
    pub z: i64,
}

impl SpacetimeEvent {
    pub fn new(t: i64, x: i64, y: i64, z: i64) -> Self {
        SpacetimeEvent { t, x, y, z }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum IntervalClass {
    Spacelike,
    Timelike,
    Lightlike,
}

impl IntervalClass {
    pub fn as_str(self) -> &'static str {
        match self {
            IntervalClass::Spacelike => "spacelike",
            IntervalClass::Timelike => "timelike",
            IntervalClass::Lightlike => "lightlike",
        }
    }
}

/// Classify the separation of two events.
///
/// Compares `c²Δt²` against `|Δx|²` after scaling both sides to integers:
/// `(299792458·Δt)²` vs `10^18·(Δx² + Δy² + Δz²)`.
pub fn interval_classify(e1: &SpacetimeEvent, e2: &SpacetimeEvent) -> IntervalClass {
    let d = |a: i64, b: i64| BigInt::from(b as i128 - a as i128);
    let dt = d(e1.t, e2.t);
    let (dx, dy, dz) = (d(e1.x, e2.x), d(e1.y, e2.y), d(e1.z, e2.z));

    let time_side = {
        let ct = dt * SPEED_OF_LIGHT_M_PER_S;
        &ct * &ct
    };
    let space_side = (&dx * &dx + &dy * &dy + &dz * &dz) * BigInt::from(PS_SCALE) * PS_SCALE;

    match time_side.cmp(&space_side) {
        std::cmp::Ordering::Less => IntervalClass::Spacelike,
        std::cmp::Ordering::Greater => IntervalClass::Timelike,
        std::cmp::Ordering::Equal => IntervalClass::Lightlike,
    }
}

/// Propagation delay through `length_mm` of fiber with the given group index,
/// floored to whole picoseconds.
pub fn fiber_delay(length_mm: i64, group_index: f64) -> Result<i64> {
    if length_mm < 0 {
        return Err(Error::invalid("length", format!("must be >= 0, got {length_mm}")));
    }
    if !group_index.is_finite() || group_index < 1.0 {
        return Err(Error::invalid(
            "group_index",
            format!("must be a finite value >= 1, got {group_index}"),
        ));
    }
    let ps = length_mm as f64 * group_index * PS_SCALE as f64 / SPEED_OF_LIGHT_M_PER_S as f64;
    // nudge keeps exact integer results from flooring one step low
    Ok((ps + 1e-6).floor() as i64)
}

/// Vacuum light travel time for a straight-line distance, rounded to the
/// nearest picosecond.
pub fn light_travel_time(a: [i64; 3], b: [i64; 3]) -> i64 {
    let sq: f64 = a
        .iter()
        .zip(b.iter())
        .map(|(p, q)| {
            let d = (*q as i128 - *p as i128) as f64;
            d * d
        })
        .sum();
    (sq.sqrt() * PS_SCALE as f64 / SPEED_OF_LIGHT_M_PER_S as f64).round() as i64
}

/// Detector layout and fiber lengths used to certify the separation of the
/// two detection events.
#[derive(Debug, Clone, PartialEq)]
pub struct Geometry {
    /// Detector positions in millimetres.
    pub det_a: Option<[i64; 3]>,
    pub det_b: Option<[i64; 3]>,
    /// Total fiber length from the beamsplitter to each detector, in millimetres.
    pub fiber_a: Option<i64>,
    pub fiber_b: Option<i64>,
    pub group_index: f64,
    /// Bound on how well the relative detection time is known, in picoseconds.
    pub timing_uncertainty: i64,
}

impl Default for Geometry {
    fn default() -> Self {
        Geometry {
            det_a: None,
            det_b: None,
            fiber_a: None,
            fiber_b: None,
            group_index: DEFAULT_GROUP_INDEX,
            timing_uncertainty: DEFAULT_TIMING_UNCERTAINTY_PS,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeparationCertificate {
    pub class: IntervalClass,
    pub light_travel_time: i64,
    /// Arrival time at B minus arrival time at A.
    pub detection_time_difference: i64,
    /// `light_travel_time - |detection_time_difference|`.
    pub margin: i64,
    pub uncertainty: i64,
    /// Set when the margin does not clear the uncertainty in either direction.
    pub undetermined: bool,
}

pub fn certify_separation(geometry: &Geometry) -> Result<SeparationCertificate> {
    let det_a = geometry
        .det_a
        .ok_or_else(|| Error::config("geometry.det_A", "detector A position is missing"))?;
    let det_b = geometry
        .det_b
        .ok_or_else(|| Error::config("geometry.det_B", "detector B position is missing"))?;
    let fiber_a = geometry
        .fiber_a
        .ok_or_else(|| Error::config("geometry.fiber_A", "fiber length for arm A is missing"))?;
    let fiber_b = geometry
        .fiber_b
        .ok_or_else(|| Error::config("geometry.fiber_B", "fiber length for arm B is missing"))?;
    if geometry.timing_uncertainty < 0 {
        return Err(Error::config("geometry.timing_uncertainty", "must be >= 0"));
    }
    let delay = |len: i64, key: &str| {
        fiber_delay(len, geometry.group_index).map_err(|e| Error::config(key, e.to_string()))
    };
    let dt = delay(fiber_b, "geometry.fiber_B")? - delay(fiber_a, "geometry.fiber_A")?;
    let light = light_travel_time(det_a, det_b);
    let margin = light - dt.abs();
    let uncertainty = geometry.timing_uncertainty;

    let class = if margin > uncertainty {
        IntervalClass::Spacelike
    } else if -margin > uncertainty {
        IntervalClass::Timelike
    } else {
        IntervalClass::Lightlike
    };

    Ok(SeparationCertificate {
        class,
        light_travel_time: light,
        detection_time_difference: dt,
        margin,
        uncertainty,
        undetermined: class == IntervalClass::Lightlike,
    })
}
