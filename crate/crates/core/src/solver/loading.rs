use serde::{Deserialize, Serialize};

use crate::tensor::Sym2;
use crate::{Error, Result};

/// Which macroscale quantity a component prescribes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Control {
    Strain,
    Stress,
}

/// Prescribed macroscale increment: per in-plane Mandel component either a
/// strain or a stress increment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MacroConstraint {
    pub control: [Control; 3],
    pub values: Sym2,
}

impl MacroConstraint {
    pub fn strain(values: Sym2) -> Self {
        Self { control: [Control::Strain; 3], values }
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self { control: self.control, values: self.values * s }
    }
}

/// Ordered list of macroscale increments.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadingPath {
    pub increments: Vec<MacroConstraint>,
}

impl LoadingPath {
    pub fn new(increments: Vec<MacroConstraint>) -> Result<Self> {
        if increments.is_empty() {
            return Err(Error::InvalidConfig("loading path needs at least one increment".into()));
        }
        Ok(Self { increments })
    }

    /// `n` equal increments reaching `total` (Mandel components, each read
    /// as strain or stress according to `control`).
    pub fn proportional(control: [Control; 3], total: Sym2, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidConfig("loading path needs at least one increment".into()));
        }
        Self::new(vec![MacroConstraint { control, values: total / n as f64 }; n])
    }

    pub fn strain(total: Sym2, n: usize) -> Result<Self> {
        Self::proportional([Control::Strain; 3], total, n)
    }

    pub fn len(&self) -> usize {
        self.increments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.increments.is_empty()
    }

    pub fn is_strain_driven(&self) -> bool {
        self.increments.iter().all(|c| c.control == [Control::Strain; 3])
    }
}
