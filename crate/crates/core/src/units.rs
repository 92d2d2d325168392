//! Unit conversions between the customary units used in input files and
//! the SI units used internally.

/// Density of water, kg/m³.
pub const RHO: f64 = 1000.0;
/// Standard gravity, m/s².
pub const GRAVITY: f64 = 9.80665;
/// Pascals per psi.
pub const PA_PER_PSI: f64 = 6894.757;

/// Meters of water column per psi.
pub const M_PER_PSI: f64 = PA_PER_PSI / (RHO * GRAVITY);

pub const M_PER_FT: f64 = 0.3048;
pub const M_PER_IN: f64 = 0.0254;
/// m³/s per US gallon per minute.
pub const M3S_PER_GPM: f64 = 3.785411784e-3 / 60.0;

pub fn psi_to_head_m(psi: f64) -> f64 {
    psi * M_PER_PSI
}

pub fn head_m_to_psi(head_m: f64) -> f64 {
    head_m / M_PER_PSI
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn zero_maps_to_zero() {
        assert_eq!(psi_to_head_m(0.0), 0.0);
        assert_eq!(head_m_to_psi(0.0), 0.0);
    }

    #[test]
    fn sixty_psi_in_meters() {
        let expected = 60.0 * 6894.757 / 9806.65;
        assert!((psi_to_head_m(60.0) - expected).abs() < 1e-12);
        assert!((psi_to_head_m(60.0) - 42.184).abs() < 1e-3);
        assert!((M_PER_PSI - 0.70307).abs() < 1e-5);
    }

    proptest! {
        #[test]
        fn round_trip_is_identity(p in -1.0e4f64..1.0e4) {
            let back = head_m_to_psi(psi_to_head_m(p));
            prop_assert!((back - p).abs() <= 1e-12 * p.abs().max(1e-300));
        }
    }
}
