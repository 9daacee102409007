//! Departure hazard: traces, sampling, online estimation and the correlated
//! hazard/bandwidth trace generator.

mod estimate;
mod generator;
mod sample;
mod trace;

pub use estimate::{
    estimate_bandwidth, estimate_bandwidth_series, estimate_hazard, estimate_hazard_pooled,
    poisson_upper, BandwidthEstimate, HazardEstimate, BANDWIDTH_QUANTILE, DEFAULT_WINDOW_S,
};
pub use generator::{
    gen_correlated_trace, latent_correlation, CorrelatedTrace, GeneratorParams, JointSample,
};
pub use sample::{sample_departures, sample_departures_for};
pub use trace::{HazardTrace, NoticeDist};
