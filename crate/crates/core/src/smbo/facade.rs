use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer};

use crate::acquisition::{AcquisitionKind, MaximizerSettings};
use crate::design::DesignKind;
use crate::surrogate::{ForestPreset, SurrogateKind};

/// Named presets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FacadeKind {
    /// Black-box: Sobol design, GP, EI, one trial per configuration.
    Bb,
    /// Hyperparameter optimization: Sobol design, random forest, LogEI.
    Hpo,
    /// Multi-fidelity: random design, random forest, LogEI, Hyperband.
    Mf,
    /// Algorithm configuration: default configuration first, random forest
    /// with censored-data imputation, LogEI, racing over instances.
    Ac,
}

impl FacadeKind {
    pub const ALL: [FacadeKind; 4] = [FacadeKind::Bb, FacadeKind::Hpo, FacadeKind::Mf, FacadeKind::Ac];

    pub fn name(self) -> &'static str {
        match self {
            FacadeKind::Bb => "SMAC4BB",
            FacadeKind::Hpo => "SMAC4HPO",
            FacadeKind::Mf => "SMAC4MF",
            FacadeKind::Ac => "SMAC4AC",
        }
    }
}

impl fmt::Display for FacadeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FacadeKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let up = s.to_ascii_uppercase();
        match up.strip_prefix("SMAC4").unwrap_or(&up) {
            "BB" => Ok(FacadeKind::Bb),
            "HPO" => Ok(FacadeKind::Hpo),
            "MF" => Ok(FacadeKind::Mf),
            "AC" => Ok(FacadeKind::Ac),
            _ => Err(format!("unknown facade '{s}' (expected SMAC4BB, SMAC4HPO, SMAC4MF or SMAC4AC)")),
        }
    }
}

impl<'de> Deserialize<'de> for FacadeKind {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IntensifierKind {
    OneShot,
    Racing,
    Hyperband,
}

/// Component choices of an optimizer. Start from [`FacadeConfig::preset`]
/// and override fields as needed.
#[derive(Debug, Clone, PartialEq)]
pub struct FacadeConfig {
    pub design: DesignKind,
    /// Initial design size; `None` picks `max(2d, 10)` capped at a quarter
    /// of the trial limit (always 1 for the default design).
    pub n_initial: Option<usize>,
    pub surrogate: SurrogateKind,
    pub acquisition: AcquisitionKind,
    pub lcb_beta: f64,
    pub intensifier: IntensifierKind,
    /// Replace right-censored observations by model-based estimates before
    /// fitting.
    pub impute_censored: bool,
    /// Alternate model-suggested and uniformly random challengers.
    pub interleave_random: bool,
    pub maximizer: MaximizerSettings,
    /// Seeds per instance for stochastic targets under racing.
    pub max_seeds: usize,
}

impl FacadeConfig {
    pub fn preset(kind: FacadeKind) -> Self {
        let base = Self {
            design: DesignKind::Sobol,
            n_initial: None,
            surrogate: SurrogateKind::Forest(ForestPreset::Hpo),
            acquisition: AcquisitionKind::LogEi,
            lcb_beta: 1.0,
            intensifier: IntensifierKind::OneShot,
            impute_censored: false,
            interleave_random: true,
            maximizer: MaximizerSettings::default(),
            max_seeds: 10,
        };
        match kind {
            FacadeKind::Bb => Self {
                surrogate: SurrogateKind::Gp,
                acquisition: AcquisitionKind::Ei,
                ..base
            },
            FacadeKind::Hpo => base,
            FacadeKind::Mf => Self {
                design: DesignKind::Random,
                intensifier: IntensifierKind::Hyperband,
                ..base
            },
            FacadeKind::Ac => Self {
                design: DesignKind::Default,
                surrogate: SurrogateKind::Forest(ForestPreset::Ac),
                intensifier: IntensifierKind::Racing,
                impute_censored: true,
                ..base
            },
        }
    }
}
