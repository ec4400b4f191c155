use std::fmt;
use std::path::PathBuf;

use clap::ValueEnum;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use vm_auctions::general::VirtualValueFn;
use vm_auctions::io::parse_alpha;
use vm_auctions::verification::GridSpec;
use vm_auctions::PreferenceModel;

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MechanismKind {
    Lexi,
    Lp,
    LpAffine,
    Virtual,
    Gsp,
    GgspV1,
    GgspV2,
    HybridGsp,
}

impl fmt::Display for MechanismKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(
            self.to_possible_value()
                .expect("no skipped variants")
                .get_name(),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    Quasilinear,
    SimpleVm,
    RoiVm,
    AlphaHybrid,
    RoiHybrid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PhiKind {
    Identity,
    Square,
    Log1p,
}

impl PhiKind {
    pub fn function(self) -> VirtualValueFn {
        match self {
            PhiKind::Identity => VirtualValueFn::identity(),
            PhiKind::Square => VirtualValueFn::square(),
            PhiKind::Log1p => VirtualValueFn::log1p(),
        }
    }
}

/// An exponent in `[1, inf]`, written as a number or `"inf"`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Alpha(pub f64);

impl std::str::FromStr for Alpha {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        parse_alpha(s).map(Alpha).map_err(|e| e.to_string())
    }
}

impl Serialize for Alpha {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        if self.0.is_infinite() {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(self.0)
        }
    }
}

impl<'de> Deserialize<'de> for Alpha {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        let text = match Raw::deserialize(d)? {
            Raw::Num(x) => x.to_string(),
            Raw::Text(t) => t,
        };
        text.parse().map_err(serde::de::Error::custom)
    }
}

/// Every knob of a run. Values come from `--config`, then command-line
/// flags override them; the resolved config is echoed to stderr.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub command: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mechanism: Option<MechanismKind>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha_param: Option<Alpha>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelKind>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model_alpha: Option<Alpha>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub phi: Option<PhiKind>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub offsets: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub type_grid: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

macro_rules! overlay {
    ($base:expr, $top:expr, $($field:ident),+) => {
        $( if $top.$field.is_some() { $base.$field = $top.$field.clone(); } )+
    };
}

impl RunConfig {
    pub fn load(path: &std::path::Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
    }

    /// Fields set in `top` win.
    pub fn merged(mut self, top: &RunConfig) -> Self {
        overlay!(
            self,
            top,
            command,
            mechanism,
            alpha_param,
            model,
            model_alpha,
            gamma,
            grid,
            eps,
            seed,
            phi,
            weights,
            offsets,
            type_grid,
            output
        );
        self
    }

    pub fn mechanism(&self) -> Result<MechanismKind, CliError> {
        self.mechanism
            .ok_or_else(|| CliError::Usage("--mechanism is required".into()))
    }

    pub fn alpha(&self) -> Result<f64, CliError> {
        self.alpha_param.map(|a| a.0).ok_or_else(|| {
            CliError::Usage(format!(
                "--alpha is required for {}",
                self.mechanism
                    .map_or("this mechanism".into(), |m| m.to_string())
            ))
        })
    }

    pub fn grid(&self) -> Result<Option<GridSpec>, CliError> {
        self.grid
            .as_deref()
            .map(GridSpec::parse)
            .transpose()
            .map_err(|e| CliError::Usage(e.to_string()))
    }

    pub fn preference(&self) -> Result<PreferenceModel, CliError> {
        let model = self
            .model
            .ok_or_else(|| CliError::Usage("--model is required".into()))?;
        let gamma = || {
            self.gamma
                .ok_or_else(|| CliError::Usage("--gamma is required for ROI models".into()))
        };
        let alpha = || {
            self.model_alpha
                .or(self.alpha_param)
                .map(|a| a.0)
                .ok_or_else(|| {
                    CliError::Usage(
                        "--model-alpha (or --alpha) is required for hybrid models".into(),
                    )
                })
        };
        let model = match model {
            ModelKind::Quasilinear => PreferenceModel::Quasilinear,
            ModelKind::SimpleVm => PreferenceModel::SimpleValueMax,
            ModelKind::RoiVm => PreferenceModel::RoiValueMax { gamma: gamma()? },
            ModelKind::AlphaHybrid => PreferenceModel::AlphaHybrid { alpha: alpha()? },
            ModelKind::RoiHybrid => PreferenceModel::RoiHybrid {
                alpha: alpha()?,
                gamma: gamma()?,
            },
        };
        model
            .validated()
            .map_err(|e| CliError::Usage(e.to_string()))
    }
}
