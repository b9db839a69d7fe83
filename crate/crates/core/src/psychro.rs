//! Relative humidity and dew point from a dry-bulb / wet-bulb pair.
//!
//! Saturation vapour pressure over water follows the Magnus curve
//! `es(T) = a · exp(b·T / (c + T))`. The actual vapour pressure comes from the
//! psychrometer equation `e = es(T_wet) − γ · P · (T_dry − T_wet)`.

use crate::error::{finite, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PsychroConfig {
    /// Psychrometer coefficient γ, per kelvin.
    pub psychrometer_coeff: f64,
    pub pressure_hpa: f64,
    pub magnus_a: f64,
    pub magnus_b: f64,
    pub magnus_c: f64,
}

impl Default for PsychroConfig {
    fn default() -> Self {
        PsychroConfig {
            psychrometer_coeff: 6.6e-4,
            pressure_hpa: 1013.25,
            magnus_a: 6.112,
            magnus_b: 17.62,
            magnus_c: 243.12,
        }
    }
}

impl PsychroConfig {
    pub fn validate(&self) -> Result<()> {
        for (v, name) in [
            (self.psychrometer_coeff, "psychrometer_coeff"),
            (self.pressure_hpa, "pressure_hpa"),
            (self.magnus_a, "magnus_a"),
            (self.magnus_b, "magnus_b"),
            (self.magnus_c, "magnus_c"),
        ] {
            if finite(v, name)? <= 0.0 {
                return Err(Error::invalid(format!("{name} must be > 0, got {v}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PsychroReading {
    pub dry_c: f64,
    pub wet_c: f64,
    pub rh_pct: f64,
    pub dew_point_c: f64,
}

/// Magnus saturation vapour pressure in hPa.
pub fn saturation_vapor_pressure(t_c: f64, cfg: &PsychroConfig) -> Result<f64> {
    let t = finite(t_c, "temperature")?;
    if t <= -cfg.magnus_c {
        return Err(Error::invalid(format!(
            "temperature {t} °C outside Magnus domain (> {} °C)",
            -cfg.magnus_c
        )));
    }
    Ok(cfg.magnus_a * (cfg.magnus_b * t / (cfg.magnus_c + t)).exp())
}

fn check_pair(dry_c: f64, wet_c: f64, cfg: &PsychroConfig) -> Result<()> {
    cfg.validate()?;
    finite(dry_c, "dry-bulb temperature")?;
    finite(wet_c, "wet-bulb temperature")?;
    if wet_c > dry_c {
        return Err(Error::invalid(format!(
            "wet-bulb {wet_c} °C above dry-bulb {dry_c} °C"
        )));
    }
    // Liquid-water constants only; the logger range starts at 0 °C.
    if wet_c < 0.0 {
        return Err(Error::invalid(format!(
            "wet-bulb {wet_c} °C below 0 °C is out of range"
        )));
    }
    Ok(())
}

/// Actual vapour pressure from the psychrometer equation, in hPa.
pub fn vapor_pressure(dry_c: f64, wet_c: f64, cfg: &PsychroConfig) -> Result<f64> {
    check_pair(dry_c, wet_c, cfg)?;
    let e = saturation_vapor_pressure(wet_c, cfg)?
        - cfg.psychrometer_coeff * cfg.pressure_hpa * (dry_c - wet_c);
    if e <= 0.0 {
        return Err(Error::InconsistentReading {
            dry_c,
            wet_c,
            e_hpa: e,
        });
    }
    Ok(e)
}

pub fn relative_humidity(dry_c: f64, wet_c: f64, cfg: &PsychroConfig) -> Result<f64> {
    let e = vapor_pressure(dry_c, wet_c, cfg)?;
    let rh = 100.0 * (e / saturation_vapor_pressure(dry_c, cfg)?);
    Ok(rh.clamp(0.0, 100.0))
}

/// Temperature at which `e_hpa` is the saturation pressure.
pub fn dew_point_from_vapor_pressure(e_hpa: f64, cfg: &PsychroConfig) -> Result<f64> {
    if finite(e_hpa, "vapour pressure")? <= 0.0 {
        return Err(Error::invalid(format!(
            "vapour pressure must be > 0, got {e_hpa}"
        )));
    }
    let ln_ratio = (e_hpa / cfg.magnus_a).ln();
    Ok(cfg.magnus_c * ln_ratio / (cfg.magnus_b - ln_ratio))
}

pub fn dew_point(dry_c: f64, wet_c: f64, cfg: &PsychroConfig) -> Result<f64> {
    let e = vapor_pressure(dry_c, wet_c, cfg)?;
    // At saturation the inverse is exact by definition; skip the round-off.
    if wet_c == dry_c {
        return Ok(dry_c);
    }
    Ok(dew_point_from_vapor_pressure(e, cfg)?.min(dry_c))
}

pub fn reading(dry_c: f64, wet_c: f64, cfg: &PsychroConfig) -> Result<PsychroReading> {
    Ok(PsychroReading {
        dry_c,
        wet_c,
        rh_pct: relative_humidity(dry_c, wet_c, cfg)?,
        dew_point_c: dew_point(dry_c, wet_c, cfg)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cfg() -> PsychroConfig {
        PsychroConfig::default()
    }

    // Reference values evaluated with 40-digit arithmetic.
    const ES_18_02167: f64 = 20.619337942837839;
    const ES_19_92858: f64 = 23.223078876199682;
    const RH_TABLE_PAIR: f64 = 83.296_885_473_324_4;
    const DEW_TABLE_PAIR: f64 = 17.009_288_515_905_59;

    #[test]
    fn saturation_examples() {
        assert_eq!(saturation_vapor_pressure(0.0, &cfg()).unwrap(), 6.112);
        assert!((saturation_vapor_pressure(18.02167, &cfg()).unwrap() - ES_18_02167).abs() < 1e-9);
        assert!((saturation_vapor_pressure(19.92858, &cfg()).unwrap() - ES_19_92858).abs() < 1e-9);
        assert!(saturation_vapor_pressure(-243.12, &cfg()).is_err());
        assert!(saturation_vapor_pressure(f64::NAN, &cfg()).is_err());
    }

    #[test]
    fn relative_humidity_examples() {
        assert_eq!(relative_humidity(20.0, 20.0, &cfg()).unwrap(), 100.0);
        let rh = relative_humidity(19.92858, 18.02167, &cfg()).unwrap();
        assert!((rh - RH_TABLE_PAIR).abs() < 1e-6, "{rh}");
        assert!((rh - 85.183416).abs() <= 3.0);
        assert!(matches!(
            relative_humidity(30.0, 10.0, &cfg()),
            Err(Error::InconsistentReading { .. })
        ));
        assert!(matches!(
            relative_humidity(10.0, 20.0, &cfg()),
            Err(Error::InvalidInput(_))
        ));
        assert!(relative_humidity(5.0, -1.0, &cfg()).is_err());
    }

    #[test]
    fn dew_point_examples() {
        assert!((dew_point(20.0, 20.0, &cfg()).unwrap() - 20.0).abs() < 1e-9);
        let dew = dew_point(19.92858, 18.02167, &cfg()).unwrap();
        assert!((dew - DEW_TABLE_PAIR).abs() < 1e-6, "{dew}");
        assert!((dew - 17.360743).abs() <= 1.0);
        assert_eq!(dew_point_from_vapor_pressure(6.112, &cfg()).unwrap(), 0.0);
        assert!(dew_point_from_vapor_pressure(0.0, &cfg()).is_err());
    }

    #[test]
    fn dew_point_inverts_saturation_curve() {
        for i in 0..=500 {
            let t = i as f64 * 0.1;
            let es = saturation_vapor_pressure(t, &cfg()).unwrap();
            let back = dew_point_from_vapor_pressure(es, &cfg()).unwrap();
            assert!((back - t).abs() < 1e-9, "{t} -> {back}");
        }
    }

    #[test]
    fn reading_bundles_values() {
        let r = reading(25.0, 20.0, &cfg()).unwrap();
        assert_eq!(r.rh_pct, relative_humidity(25.0, 20.0, &cfg()).unwrap());
        assert_eq!(r.dew_point_c, dew_point(25.0, 20.0, &cfg()).unwrap());
        assert!(r.dew_point_c <= r.dry_c && r.rh_pct <= 100.0);
    }

    proptest! {
        #[test]
        fn rh_monotone_in_wet(dry in 5f64..50.0, a in 0f64..1.0, b in 0f64..1.0) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let c = cfg();
            if let (Ok(r_lo), Ok(r_hi)) = (
                relative_humidity(dry, dry * lo, &c),
                relative_humidity(dry, dry * hi, &c),
            ) {
                prop_assert!(r_lo <= r_hi + 1e-12);
            }
        }

        #[test]
        fn rh_monotone_decreasing_in_dry(wet in 0f64..40.0, d1 in 0f64..10.0, d2 in 0f64..10.0) {
            let (lo, hi) = if d1 <= d2 { (d1, d2) } else { (d2, d1) };
            let c = cfg();
            if let (Ok(r_lo), Ok(r_hi)) = (
                relative_humidity(wet + lo, wet, &c),
                relative_humidity(wet + hi, wet, &c),
            ) {
                prop_assert!(r_hi <= r_lo + 1e-12);
            }
        }

        #[test]
        fn bounds_and_dew_below_dry(dry in 0f64..50.0, frac in 0f64..=1.0) {
            let wet = dry * frac;
            let c = cfg();
            if let Ok(r) = reading(dry, wet, &c) {
                prop_assert!((0.0..=100.0).contains(&r.rh_pct));
                prop_assert!(r.dew_point_c <= dry);
                if wet < dry - 1e-3 {
                    prop_assert!(r.dew_point_c < dry);
                    prop_assert!(r.rh_pct < 100.0);
                }
            }
        }

        #[test]
        fn saturated_air(t in 0f64..=50.0) {
            let r = reading(t, t, &cfg()).unwrap();
            prop_assert_eq!(r.rh_pct, 100.0);
            prop_assert!((r.dew_point_c - t).abs() < 1e-9);
        }
    }
}
