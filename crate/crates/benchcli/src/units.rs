//! Quantities with explicit units.
//!
//! A physical quantity in a manifest is a string `"<number> <unit>"`. Kinds
//! that work in natural units (`ħ = 1`, unit mass, unit box) accept only the
//! unit `nat`; kinds that work in SI accept the SI-compatible units below and
//! convert to base SI. Angles are always `deg` or `rad`.

use std::fmt;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Dimension {
    Length,
    Time,
    Mass,
    Rate,
    MassDensity,
    Angle,
    /// Any quantity expressed in natural units.
    Natural,
}

impl fmt::Display for Dimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Dimension::Length => "length",
            Dimension::Time => "time",
            Dimension::Mass => "mass",
            Dimension::Rate => "rate",
            Dimension::MassDensity => "mass density",
            Dimension::Angle => "angle",
            Dimension::Natural => "natural-unit quantity",
        };
        f.write_str(s)
    }
}

const DAY: f64 = 86_400.0;
const ATOMIC_MASS: f64 = 1.660_539_066_60e-27;

/// Scale factor to base SI (or radians) for `unit` in `dim`.
fn factor(dim: Dimension, unit: &str) -> Option<f64> {
    use Dimension::*;
    let f = match (dim, unit) {
        (Natural, "nat") => 1.0,
        (Length, "m") => 1.0,
        (Length, "cm") => 1e-2,
        (Length, "mm") => 1e-3,
        (Length, "um") => 1e-6,
        (Length, "nm") => 1e-9,
        (Time, "s") => 1.0,
        (Time, "ms") => 1e-3,
        (Time, "min") => 60.0,
        (Time, "h") => 3600.0,
        (Time, "day") => DAY,
        (Rate, "/s") => 1.0,
        (Rate, "/day") => 1.0 / DAY,
        (Mass, "kg") => 1.0,
        (Mass, "g") => 1e-3,
        (Mass, "u") => ATOMIC_MASS,
        (MassDensity, "kg/m3") => 1.0,
        (MassDensity, "g/cm3") => 1e3,
        (Angle, "rad") => 1.0,
        (Angle, "deg") => std::f64::consts::PI / 180.0,
        _ => return None,
    };
    Some(f)
}

/// Units accepted for `dim`, for error messages.
pub fn accepted_units(dim: Dimension) -> &'static str {
    match dim {
        Dimension::Natural => "nat",
        Dimension::Length => "m, cm, mm, um, nm",
        Dimension::Time => "s, ms, min, h, day",
        Dimension::Rate => "/s, /day",
        Dimension::Mass => "kg, g, u",
        Dimension::MassDensity => "kg/m3, g/cm3",
        Dimension::Angle => "deg, rad",
    }
}

/// Parses `"<number> <unit>"` into base units of `dim`.
pub fn parse_quantity(text: &str, dim: Dimension) -> Result<f64, String> {
    let mut parts = text.split_whitespace();
    let (Some(num), Some(unit), None) = (parts.next(), parts.next(), parts.next()) else {
        return Err(format!("expected \"<number> <unit>\" with unit in [{}], got {text:?}", accepted_units(dim)));
    };
    let value: f64 = num.parse().map_err(|_| format!("{num:?} is not a number"))?;
    if !value.is_finite() {
        return Err(format!("{num:?} is not finite"));
    }
    let f = factor(dim, unit).ok_or_else(|| format!("unit {unit:?} is not a {dim}; use one of [{}]", accepted_units(dim)))?;
    Ok(value * f)
}
