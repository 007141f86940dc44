//! Conditioning-branch schedule: strength `λ1` scales the control features
//! added to the base features, and the branch is active for steps
//! `0..=floor(λ2·T)`.

use alloc::format;
use alloc::vec::Vec;
use core::fmt;
use core::ops::RangeInclusive;
use core::str::FromStr;

use crate::error::{Error, Result};

/// Enhancement defaults (strength, active fraction).
pub const ENHANCE_DEFAULTS: (f64, f64) = (0.6, 0.3);
/// Editing defaults (strength, active fraction).
pub const EDIT_DEFAULTS: (f64, f64) = (0.3, 0.5);
/// Ranges reported to work well in practice.
pub const RECOMMENDED_STRENGTH: RangeInclusive<f64> = 0.05..=0.8;
pub const RECOMMENDED_ACTIVE_FRACTION: RangeInclusive<f64> = 0.1..=0.7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum ControlType {
    Tile,
    Normal,
    Canny,
}

impl ControlType {
    /// Strength and active fraction used when a flag omits them.
    pub fn defaults(self) -> (f64, f64) {
        match self {
            ControlType::Tile | ControlType::Normal => ENHANCE_DEFAULTS,
            ControlType::Canny => EDIT_DEFAULTS,
        }
    }
}

impl fmt::Display for ControlType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ControlType::Tile => "tile",
            ControlType::Normal => "normal",
            ControlType::Canny => "canny",
        })
    }
}

impl FromStr for ControlType {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tile" => Ok(ControlType::Tile),
            "normal" => Ok(ControlType::Normal),
            "canny" => Ok(ControlType::Canny),
            other => Err(Error::InvalidSchedule(format!("unknown control type {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlSchedule {
    pub strength: f64,
    pub active_fraction: f64,
    pub total_steps: u32,
    pub control_type: ControlType,
}

impl ControlSchedule {
    pub fn new(control_type: ControlType, strength: f64, active_fraction: f64, total_steps: u32) -> Result<Self> {
        let s = ControlSchedule {
            strength,
            active_fraction,
            total_steps,
            control_type,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn with_defaults(control_type: ControlType, total_steps: u32) -> Result<Self> {
        let (l1, l2) = control_type.defaults();
        Self::new(control_type, l1, l2, total_steps)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.strength) {
            return Err(Error::InvalidSchedule(format!("strength {} outside [0, 1]", self.strength)));
        }
        if !(0.0..=1.0).contains(&self.active_fraction) {
            return Err(Error::InvalidSchedule(format!(
                "active fraction {} outside [0, 1]",
                self.active_fraction
            )));
        }
        if self.total_steps == 0 {
            return Err(Error::InvalidSchedule("total steps must be positive".into()));
        }
        Ok(())
    }

    /// Last active step, or `None` when the branch is switched off.
    pub fn last_active_step(&self) -> Option<u32> {
        if self.active_fraction == 0.0 {
            return None;
        }
        // Absorb representation error so that e.g. 0.3·30 counts as 9.
        let last = libm::floor(self.active_fraction * self.total_steps as f64 + 1e-9);
        Some((last as u32).min(self.total_steps))
    }

    pub fn is_active(&self, step: u32) -> bool {
        self.last_active_step().is_some_and(|last| step <= last)
    }

    /// Step indices at which the conditioning branch contributes.
    pub fn active_steps(&self) -> Vec<u32> {
        match self.last_active_step() {
            Some(last) => (0..=last).collect(),
            None => Vec::new(),
        }
    }
}

/// `base + strength · control`, elementwise.
pub fn combine_features(base: &[f64], control: &[f64], strength: f64) -> Result<Vec<f64>> {
    if base.len() != control.len() {
        return Err(Error::ShapeMismatch {
            left: base.len(),
            right: control.len(),
        });
    }
    Ok(base.iter().zip(control).map(|(b, c)| b + strength * c).collect())
}
