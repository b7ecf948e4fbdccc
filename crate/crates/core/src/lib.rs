//! Single-satellite LEO Doppler positioning.
//!
//! The crate is organised bottom-up:
//!
//! * [`orbit`] parses TLE files and propagates satellite states (SGP4 or a
//!   synthetic two-body circular orbit) in the Earth-fixed frame.
//! * [`geometry`] holds WGS-84 conversions, the local ENU frame, the RTN frame
//!   and pass finders (closest approach, maximum elevation).
//! * [`doppler`] is the range-rate forward model, noise generation and
//!   elevation weighting.
//! * [`estimator`] contains the analytic Jacobian and the iterative weighted
//!   least-squares solver.
//! * [`ddop`] turns a Jacobian into a scaled covariance, DDOP metrics and
//!   theoretical confidence ellipses.
//! * [`montecarlo`] and [`experiments`] run repeated solves and geometric
//!   sensitivity sweeps on top of a [`scenario::Scenario`].

pub mod constants;
pub mod ddop;
pub mod doppler;
pub mod estimator;
pub mod experiments;
pub mod geometry;
pub mod montecarlo;
pub mod orbit;
pub mod scenario;
pub mod time;

mod error;

pub use error::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;
