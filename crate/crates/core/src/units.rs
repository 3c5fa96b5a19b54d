//! Unit conversions between the data layer (meters, seconds) and the
//! macroscopic layer (kilometers, hours).
//!
//! Coupling models work with densities in vehicles/km, velocities in km/h
//! and fluxes in vehicles/h. The network solver works in SI units.

pub const SECONDS_PER_HOUR: f64 = 3600.0;
pub const METERS_PER_KM: f64 = 1000.0;

#[inline]
pub fn mps_to_kmh(v: f64) -> f64 {
    v * SECONDS_PER_HOUR / METERS_PER_KM
}

#[inline]
pub fn kmh_to_mps(v: f64) -> f64 {
    v * METERS_PER_KM / SECONDS_PER_HOUR
}

#[inline]
pub fn per_m_to_per_km(rho: f64) -> f64 {
    rho * METERS_PER_KM
}

#[inline]
pub fn per_km_to_per_m(rho: f64) -> f64 {
    rho / METERS_PER_KM
}

#[inline]
pub fn per_s_to_per_h(q: f64) -> f64 {
    q * SECONDS_PER_HOUR
}

#[inline]
pub fn per_h_to_per_s(q: f64) -> f64 {
    q / SECONDS_PER_HOUR
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn conversions_invert() {
        assert!((mps_to_kmh(20.0) - 72.0).abs() < 1e-12);
        assert!((kmh_to_mps(mps_to_kmh(13.7)) - 13.7).abs() < 1e-12);
        assert_eq!(per_m_to_per_km(0.03), 30.0);
        assert!((per_km_to_per_m(400.0) - 0.4).abs() < 1e-15);
        assert_eq!(per_s_to_per_h(0.5), 1800.0);
        assert_eq!(per_h_to_per_s(1800.0), 0.5);
    }
}
