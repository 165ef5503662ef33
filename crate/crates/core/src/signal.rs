//! Radio propagation model shared by the simulator and the localizer.

use crate::graph::Gateway;

/// Maps a distance to an RSSI-like strength indicator.
pub trait SignalModel {
    /// Strength observed at `distance` from a transmitter of the given
    /// `radius`, or `None` when out of range.
    fn strength(&self, radius: f64, distance: f64) -> Option<f64>;

    /// Strongest value a gateway can produce: the node is right at it.
    fn max_strength(&self, gateway: &Gateway) -> f64;
}

/// `strength = radius - distance` inside the radius.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LinearFalloff;

impl SignalModel for LinearFalloff {
    fn strength(&self, radius: f64, distance: f64) -> Option<f64> {
        (distance <= radius).then_some(radius - distance)
    }

    fn max_strength(&self, gateway: &Gateway) -> f64 {
        gateway.radius
    }
}
