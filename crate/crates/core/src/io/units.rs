use std::f64::consts::TAU;
use std::fmt;

/// Physical dimension expected for a configuration value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dimension {
    /// Seconds.
    Time,
    /// Hz (cycles per second).
    Frequency,
    /// Tesla.
    MagneticField,
    /// rad/(s·T). `Hz/T` forms are read as `γ/2π`.
    Gyromagnetic,
    /// dB/km.
    Attenuation,
    /// m/s.
    Speed,
    /// Radians.
    Angle,
}

impl Dimension {
    fn units(self) -> &'static [(&'static str, f64)] {
        match self {
            Dimension::Time => &[
                ("s", 1.0),
                ("ms", 1e-3),
                ("us", 1e-6),
                ("µs", 1e-6),
                ("μs", 1e-6),
                ("ns", 1e-9),
                ("ps", 1e-12),
            ],
            Dimension::Frequency => &[("Hz", 1.0), ("kHz", 1e3), ("MHz", 1e6), ("GHz", 1e9)],
            Dimension::MagneticField => &[
                ("T", 1.0),
                ("mT", 1e-3),
                ("uT", 1e-6),
                ("µT", 1e-6),
                ("μT", 1e-6),
                ("nT", 1e-9),
                ("G", 1e-4),
                ("mG", 1e-7),
            ],
            Dimension::Gyromagnetic => &[
                ("Hz/T", TAU),
                ("kHz/T", TAU * 1e3),
                ("MHz/T", TAU * 1e6),
                ("GHz/T", TAU * 1e9),
                ("MHz/G", TAU * 1e10),
                ("rad/s/T", 1.0),
            ],
            Dimension::Attenuation => &[("dB/km", 1.0), ("dB/m", 1e3)],
            Dimension::Speed => &[("m/s", 1.0), ("km/s", 1e3)],
            Dimension::Angle => &[("rad", 1.0), ("mrad", 1e-3), ("deg", TAU / 360.0)],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Dimension::Time => "time",
            Dimension::Frequency => "frequency",
            Dimension::MagneticField => "magnetic field",
            Dimension::Gyromagnetic => "gyromagnetic ratio",
            Dimension::Attenuation => "attenuation",
            Dimension::Speed => "speed",
            Dimension::Angle => "angle",
        }
    }

    /// Accepted suffixes, for error messages.
    pub fn suffixes(self) -> String {
        self.units()
            .iter()
            .map(|(u, _)| *u)
            .collect::<Vec<_>>()
            .join(", ")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnitError(pub String);

impl fmt::Display for UnitError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UnitError {}

/// Parse `"<number><unit>"` (whitespace between them allowed) into SI,
/// e.g. `"5us"` → `5e-6`, `"18.8GHz/T"` → `2π·18.8e9`.
pub fn parse_quantity(text: &str, dim: Dimension) -> Result<f64, UnitError> {
    let s = text.trim();
    let split = s
        .char_indices()
        .find(|&(_, c)| !(c.is_ascii_digit() || matches!(c, '.' | '+' | '-' | 'e' | 'E')))
        .map(|(i, _)| i)
        .unwrap_or(s.len());
    let (num, unit) = (s[..split].trim(), s[split..].trim());
    if unit.is_empty() {
        return Err(UnitError(format!(
            "`{s}` has no unit; expected a {} in one of: {}",
            dim.name(),
            dim.suffixes()
        )));
    }
    let value: f64 = num
        .parse()
        .map_err(|_| UnitError(format!("`{s}` does not start with a number")))?;
    if !value.is_finite() {
        return Err(UnitError(format!("`{s}` is not finite")));
    }
    let factor = dim
        .units()
        .iter()
        .find(|(u, _)| *u == unit)
        .map(|(_, f)| *f)
        .ok_or_else(|| {
            UnitError(format!(
                "unit `{unit}` is not a {}; expected one of: {}",
                dim.name(),
                dim.suffixes()
            ))
        })?;
    // divide by exact decimal powers so "5us" gives the nearest double to 5e-6
    let inv = (1.0 / factor).round();
    if factor < 1.0 && (inv * factor - 1.0).abs() < 1e-12 {
        Ok(value / inv)
    } else {
        Ok(value * factor)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn parses_common_units() {
        assert_relative_eq!(parse_quantity("5us", Dimension::Time).unwrap(), 5e-6);
        assert_relative_eq!(parse_quantity("2.5 µs", Dimension::Time).unwrap(), 2.5e-6);
        assert_relative_eq!(parse_quantity("5kHz", Dimension::Frequency).unwrap(), 5e3);
        assert_relative_eq!(parse_quantity("100MHz", Dimension::Frequency).unwrap(), 1e8);
        assert_relative_eq!(
            parse_quantity("18.8GHz/T", Dimension::Gyromagnetic).unwrap(),
            TAU * 18.8e9
        );
        assert_relative_eq!(
            parse_quantity("10.64uT", Dimension::MagneticField).unwrap(),
            10.64e-6
        );
        assert_relative_eq!(
            parse_quantity("3dB/km", Dimension::Attenuation).unwrap(),
            3.0
        );
        assert_relative_eq!(parse_quantity("2e8m/s", Dimension::Speed).unwrap(), 2e8);
        assert_relative_eq!(
            parse_quantity("-1.5e-3rad", Dimension::Angle).unwrap(),
            -1.5e-3
        );
        assert_relative_eq!(
            parse_quantity("180deg", Dimension::Angle).unwrap(),
            TAU / 2.0
        );
    }

    #[test]
    fn decimal_prefixes_round_exactly() {
        assert_eq!(parse_quantity("5us", Dimension::Time).unwrap(), 5e-6);
        assert_eq!(parse_quantity("3us", Dimension::Time).unwrap(), 3e-6);
        assert_eq!(
            parse_quantity("10.638uT", Dimension::MagneticField).unwrap(),
            10.638e-6
        );
    }

    #[test]
    fn rejects_bad_units() {
        assert!(parse_quantity("5", Dimension::Time).is_err());
        assert!(parse_quantity("5kHz", Dimension::Time).is_err());
        assert!(parse_quantity("us", Dimension::Time).is_err());
        assert!(parse_quantity("1e400s", Dimension::Time).is_err());
    }
}
