//! Node placement, radio range and distances on the simulation square.

use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// A point in the simulation square, in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Position {
    pub x: f64,
    pub y: f64,
}

impl Position {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }
}

/// Radio pathloss model parameters.
///
/// A link from a transmitter exists when the received power
/// `P / (c * r^alpha)` divided by the noise level reaches the attenuation
/// threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathlossParams {
    pub transmit_power: f64,
    pub pathloss_constant: f64,
    pub pathloss_exponent: f64,
    pub attenuation_threshold: f64,
    pub noise_level: f64,
}

impl PathlossParams {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("transmit_power", self.transmit_power),
            ("pathloss_constant", self.pathloss_constant),
            ("pathloss_exponent", self.pathloss_exponent),
            ("attenuation_threshold", self.attenuation_threshold),
            ("noise_level", self.noise_level),
        ];
        for (name, v) in fields {
            if !(v.is_finite() && v > 0.0) {
                return Err(invalid(name, format!("must be finite and positive, got {v}")));
            }
        }
        if self.pathloss_exponent < 1.0 {
            return Err(invalid("pathloss_exponent", "must be at least 1"));
        }
        Ok(())
    }
}

/// Maximum distance at which a transmission clears the attenuation threshold:
/// `(P / (c * beta_th * nu))^(1 / alpha)`.
pub fn transmission_range(p: &PathlossParams) -> f64 {
    (p.transmit_power / (p.pathloss_constant * p.attenuation_threshold * p.noise_level))
        .powf(1.0 / p.pathloss_exponent)
}

/// Size and geometry of one network instance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NetworkConfig {
    node_count: usize,
    side_length: f64,
    transmission_range: f64,
    periodic: bool,
}

impl NetworkConfig {
    pub fn new(
        node_count: usize,
        side_length: f64,
        transmission_range: f64,
        periodic: bool,
    ) -> Result<Self> {
        if node_count == 0 {
            return Err(invalid("node_count", "must be at least 1"));
        }
        if !(side_length.is_finite() && side_length > 0.0) {
            return Err(invalid("side_length", format!("must be positive, got {side_length}")));
        }
        if !(transmission_range.is_finite() && transmission_range > 0.0) {
            return Err(invalid(
                "transmission_range",
                format!("must be positive, got {transmission_range}"),
            ));
        }
        if periodic && transmission_range >= side_length / 2.0 {
            return Err(invalid(
                "transmission_range",
                "must be below half the side length with periodic boundaries",
            ));
        }
        Ok(Self {
            node_count,
            side_length,
            transmission_range,
            periodic,
        })
    }

    /// The configuration used throughout the reference experiments:
    /// a 1000 m torus with a 50 m radio range.
    pub fn reference(node_count: usize) -> Result<Self> {
        Self::new(node_count, 1000.0, 50.0, true)
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn side_length(&self) -> f64 {
        self.side_length
    }

    pub fn transmission_range(&self) -> f64 {
        self.transmission_range
    }

    pub fn periodic(&self) -> bool {
        self.periodic
    }

    /// Nodes per square meter.
    pub fn density(&self) -> f64 {
        self.node_count as f64 / (self.side_length * self.side_length)
    }
}

/// Expected degree of a random geometric graph, `pi * r_t^2 * rho`.
pub fn mean_degree_prediction(config: &NetworkConfig) -> f64 {
    predicted_mean_degree(
        config.node_count,
        config.side_length,
        config.transmission_range,
    )
}

/// Same as [`mean_degree_prediction`] on raw values; `r_t = 0` gives 0.
pub fn predicted_mean_degree(node_count: usize, side_length: f64, range: f64) -> f64 {
    PI * range * range * node_count as f64 / (side_length * side_length)
}

/// Draws `node_count` points uniformly from `[0, L)^2`.
pub fn place_nodes<R: Rng + ?Sized>(config: &NetworkConfig, rng: &mut R) -> Vec<Position> {
    let l = config.side_length;
    (0..config.node_count)
        .map(|_| {
            let x = rng.random::<f64>() * l;
            let y = rng.random::<f64>() * l;
            // guard against rounding up to L itself
            Position::new(wrap_below(x, l), wrap_below(y, l))
        })
        .collect()
}

fn wrap_below(v: f64, l: f64) -> f64 {
    if v >= l {
        0.0
    } else {
        v
    }
}

/// Axis displacement under the minimum-image convention.
#[inline]
pub(crate) fn min_image(d: f64, l: f64) -> f64 {
    let d = d.abs();
    if d > l / 2.0 {
        l - d
    } else {
        d
    }
}

#[inline]
pub(crate) fn squared_distance(a: Position, b: Position, l: f64, periodic: bool) -> f64 {
    let (dx, dy) = if periodic {
        (min_image(a.x - b.x, l), min_image(a.y - b.y, l))
    } else {
        (a.x - b.x, a.y - b.y)
    };
    dx * dx + dy * dy
}

/// Euclidean distance, optionally on the torus of side `l`.
pub fn toroidal_distance(a: Position, b: Position, l: f64, periodic: bool) -> f64 {
    squared_distance(a, b, l, periodic).sqrt()
}
