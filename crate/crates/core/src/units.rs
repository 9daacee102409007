//! Unit conventions.
//!
//! Sizes are bytes, rates are bytes per second, times are seconds and hazards
//! are events per second, all as `f64`. The constants below convert the
//! network-style units used in configuration files.

/// One gigabit per second, in bytes per second.
pub const GBPS: f64 = 1e9 / 8.0;
/// One megabit per second, in bytes per second.
pub const MBPS: f64 = 1e6 / 8.0;
pub const MB: f64 = 1e6;
pub const GB: f64 = 1e9;
pub const KIB: f64 = 1024.0;
pub const MINUTE: f64 = 60.0;
pub const HOUR: f64 = 3600.0;
pub const DAY: f64 = 86_400.0;

/// Converts a per-hour rate to a per-second rate.
pub fn per_hour(rate: f64) -> f64 {
    rate / HOUR
}
