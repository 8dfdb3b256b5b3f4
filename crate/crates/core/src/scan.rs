//! Octree scan sizes and sensor data rates.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScanError {
    #[error("octree depth {0} is below the minimum of 2")]
    DepthTooSmall(u32),
    #[error("octree depth {0} overflows a 64-bit byte count")]
    DepthTooLarge(u32),
    #[error("{field} must be strictly positive, got {value}")]
    NonPositive { field: &'static str, value: f64 },
    #[error("compression factor must lie in (0, 1], got {0}")]
    Compression(f64),
    #[error("downlink ratio must lie in (0, 1], got {0}")]
    Beta(f64),
}

/// Bytes per cubic metre per scan: 8^(d-2) + 12, where the 12 bytes hold the
/// scan's reference coordinate as three 32-bit floats.
pub fn octree_bytes_per_m3(depth: u32) -> Result<u64, ScanError> {
    if depth < 2 {
        return Err(ScanError::DepthTooSmall(depth));
    }
    8u64.checked_pow(depth - 2)
        .and_then(|v| v.checked_add(12))
        .ok_or(ScanError::DepthTooLarge(depth))
}

/// Octree cell edge length in metres at the given depth.
pub fn precision_m(depth: u32) -> f64 {
    2f64.powi(1 - depth as i32)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanProfile {
    pub depth: u32,
    /// Rotations per second.
    pub frequency: f64,
    /// Cubic metres.
    pub volume: f64,
    pub compression: f64,
}

impl ScanProfile {
    pub fn new(
        depth: u32,
        frequency: f64,
        volume: f64,
        compression: f64,
    ) -> Result<Self, ScanError> {
        let profile = ScanProfile {
            depth,
            frequency,
            volume,
            compression,
        };
        profile.validate()?;
        Ok(profile)
    }

    fn validate(&self) -> Result<(), ScanError> {
        octree_bytes_per_m3(self.depth)?;
        for (field, value) in [
            ("scan frequency", self.frequency),
            ("scan volume", self.volume),
        ] {
            if !(value > 0.0 && value.is_finite()) {
                return Err(ScanError::NonPositive { field, value });
            }
        }
        if !(self.compression > 0.0 && self.compression <= 1.0) {
            return Err(ScanError::Compression(self.compression));
        }
        Ok(())
    }

    /// Unrounded rate in bytes/second.
    pub fn rate_f64(&self) -> Result<f64, ScanError> {
        self.validate()?;
        let octree = octree_bytes_per_m3(self.depth)? as f64;
        Ok(octree * self.frequency * self.volume * self.compression)
    }
}

/// Sensor data rate in whole bytes/second, rounded half up.
pub fn data_rate(profile: &ScanProfile) -> Result<u64, ScanError> {
    let rate = profile.rate_f64()?;
    Ok((rate + 0.5).floor() as u64)
}

/// Processed-map size returned to the sensor.
pub fn downlink_size(uplink: f64, beta: f64) -> Result<f64, ScanError> {
    if !(beta > 0.0 && beta <= 1.0) {
        return Err(ScanError::Beta(beta));
    }
    Ok(beta * uplink)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn octree_examples() {
        assert_eq!(octree_bytes_per_m3(2), Ok(13));
        assert_eq!(octree_bytes_per_m3(5), Ok(524));
        // 8^6 = 2^18
        assert_eq!(octree_bytes_per_m3(8), Ok((1u64 << 18) + 12));
        assert_eq!(octree_bytes_per_m3(8), Ok(262_156));
    }

    #[test]
    fn octree_domain() {
        assert_eq!(octree_bytes_per_m3(1), Err(ScanError::DepthTooSmall(1)));
        assert_eq!(octree_bytes_per_m3(0), Err(ScanError::DepthTooSmall(0)));
        // 8^21 = 2^63 still fits
        assert!(octree_bytes_per_m3(23).is_ok());
        assert_eq!(octree_bytes_per_m3(24), Err(ScanError::DepthTooLarge(24)));
    }

    #[test]
    fn rate_examples() {
        let unit = ScanProfile::new(2, 1.0, 1.0, 1.0).unwrap();
        assert_eq!(data_rate(&unit), Ok(13));
        let p = ScanProfile::new(5, 10.0, 1000.0, 0.1).unwrap();
        assert_eq!(data_rate(&p), Ok(524_000));
    }

    #[test]
    fn halving_compression_halves_rate() {
        let p = ScanProfile::new(6, 10.0, 250.0, 0.5).unwrap();
        let half = ScanProfile {
            compression: 0.25,
            ..p
        };
        assert_eq!(half.rate_f64().unwrap() * 2.0, p.rate_f64().unwrap());
        assert_eq!(data_rate(&half).unwrap() * 2, data_rate(&p).unwrap());
    }

    #[test]
    fn rounding_is_half_up() {
        // 13 * 0.5 = 6.5
        let p = ScanProfile::new(2, 1.0, 1.0, 0.5).unwrap();
        assert_eq!(data_rate(&p), Ok(7));
    }

    #[test]
    fn invalid_profiles() {
        assert!(matches!(
            ScanProfile::new(4, 0.0, 1.0, 1.0),
            Err(ScanError::NonPositive { .. })
        ));
        assert_eq!(
            ScanProfile::new(4, 1.0, 1.0, 1.5),
            Err(ScanError::Compression(1.5))
        );
        assert_eq!(
            ScanProfile::new(1, 1.0, 1.0, 1.0),
            Err(ScanError::DepthTooSmall(1))
        );
    }

    #[test]
    fn downlink_examples() {
        let d = downlink_size(100e6, 0.8).unwrap();
        assert!((d - 80e6).abs() < 1e-6);
        assert_eq!(downlink_size(12345.0, 1.0), Ok(12345.0));
        assert_eq!(downlink_size(524_000.0, 0.5), Ok(262_000.0));
        assert_eq!(downlink_size(1.0, 0.0), Err(ScanError::Beta(0.0)));
        assert_eq!(downlink_size(1.0, 1.01), Err(ScanError::Beta(1.01)));
    }

    #[test]
    fn precision_halves_per_level() {
        assert_eq!(precision_m(1), 1.0);
        for d in 2..20 {
            assert_eq!(precision_m(d + 1) * 2.0, precision_m(d));
        }
    }
}
