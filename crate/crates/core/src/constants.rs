//! Physical constants.

/// Earth gravitational parameter, m³/s².
pub const MU_EARTH: f64 = 3.986004418e14;

/// Mean spherical Earth radius used by the DDOP scaling factors and the
/// synthetic orbit generator, m.
pub const EARTH_RADIUS_SPHERICAL: f64 = 6371e3;

/// WGS-84 semi-major axis, m.
pub const WGS84_A: f64 = 6378137.0;

/// WGS-84 flattening.
pub const WGS84_F: f64 = 1.0 / 298.257223563;

/// WGS-84 semi-minor axis, m.
pub const WGS84_B: f64 = WGS84_A * (1.0 - WGS84_F);

/// WGS-84 first eccentricity squared.
pub const WGS84_E2: f64 = WGS84_F * (2.0 - WGS84_F);

/// Earth rotation rate, rad/s.
pub const EARTH_ROTATION_RATE: f64 = 7.292115146706979e-5;

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Chi-square quantile with two degrees of freedom at 95 %.
pub const CHI2_2DOF_95: f64 = 5.991;

/// Default carrier wavelength (137.5 MHz VHF downlink), m.
pub const DEFAULT_WAVELENGTH: f64 = SPEED_OF_LIGHT / 137.5e6;

/// Default elevation mask, degrees.
pub const DEFAULT_MASK_DEG: f64 = 5.0;
