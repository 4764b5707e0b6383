//! Per-sequence quantitative feature families.

pub mod firstorder;
pub mod shape;
pub mod texture;

use serde::{Deserialize, Serialize};

/// Why a feature value could not be computed as intended. Flagged values are
/// imputed (normally with 0) rather than aborting the patient.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quality {
    Ok,
    EmptyRing,
    DegenerateBand,
    DegenerateRange,
    NoPairs,
    NoEligiblePixels,
    CentroidOutside,
    RoiTooSmall,
    DegenerateShape,
    NonFinite,
    FamilyFailed,
    MultipleComponents,
}

/// Ordered named feature values with a quality flag per value.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct FeatureGroup {
    names: Vec<String>,
    values: Vec<f64>,
    flags: Vec<Quality>,
}

impl FeatureGroup {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, name: impl Into<String>, value: f64) {
        self.push_flagged(name, value, Quality::Ok);
    }

    /// Non-finite values are replaced by 0 and flagged.
    pub fn push_flagged(&mut self, name: impl Into<String>, value: f64, flag: Quality) {
        let (value, flag) = if value.is_finite() {
            (value, flag)
        } else {
            (0.0, Quality::NonFinite)
        };
        self.names.push(name.into());
        self.values.push(value);
        self.flags.push(flag);
    }

    /// A group where every listed feature is imputed as 0 with `flag`.
    pub fn imputed<S: AsRef<str>>(names: &[S], flag: Quality) -> Self {
        let mut g = Self::new();
        for n in names {
            g.push_flagged(n.as_ref(), 0.0, flag);
        }
        g
    }

    pub fn extend(&mut self, other: FeatureGroup) {
        self.names.extend(other.names);
        self.values.extend(other.values);
        self.flags.extend(other.flags);
    }

    /// Re-flags every entry that is currently `Ok`.
    pub fn flag_all(&mut self, flag: Quality) {
        for f in &mut self.flags {
            if *f == Quality::Ok {
                *f = flag;
            }
        }
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn flags(&self) -> &[Quality] {
        &self.flags
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.names.iter().position(|n| n == name).map(|i| self.values[i])
    }

    pub fn flag(&self, name: &str) -> Option<Quality> {
        self.names.iter().position(|n| n == name).map(|i| self.flags[i])
    }
}
