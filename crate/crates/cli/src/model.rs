//! Serialized models written by `fit` and read by `predict` and `sample`.

use std::path::Path;

use gmje::gje::{BatchEmbeddings, DualPredictor, KernelSpec};
use gmje::gng::GngGraph;
use gmje::mixture::JointMixture;
use gmje::neural::{EmaCovariance, Mdn, Mlp};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// The six model variants.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Variant {
    JepaMse,
    GjeDualRbf,
    GmjeEm1,
    GmjeEm3,
    GmjeGng,
    GmjeMdn,
}

impl Variant {
    pub const ALL: [Variant; 6] =
        [Variant::JepaMse, Variant::GjeDualRbf, Variant::GmjeEm1, Variant::GmjeEm3, Variant::GmjeGng, Variant::GmjeMdn];

    pub fn name(self) -> &'static str {
        match self {
            Variant::JepaMse => "jepa-mse",
            Variant::GjeDualRbf => "gje-dual-rbf",
            Variant::GmjeEm1 => "gmje-em-1",
            Variant::GmjeEm3 => "gmje-em-3",
            Variant::GmjeGng => "gmje-gng",
            Variant::GmjeMdn => "gmje-mdn",
        }
    }
}

impl std::str::FromStr for Variant {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Variant::ALL.into_iter().find(|v| v.name() == s).ok_or_else(|| {
            let names: Vec<&str> = Variant::ALL.iter().map(|v| v.name()).collect();
            format!("unknown model {s:?}; expected one of {}", names.join(", "))
        })
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "model")]
pub enum ModelFile {
    #[serde(rename = "jepa-mse")]
    JepaMse { net: Mlp },
    /// The dual model is its training set plus fixed kernel hyperparameters.
    #[serde(rename = "gje-dual-rbf")]
    GjeDualRbf { kernel: KernelSpec, x_c: Vec<f64>, x_t: Vec<f64> },
    #[serde(rename = "gmje-em-1")]
    GmjeEm1 { mixture: JointMixture },
    #[serde(rename = "gmje-em-3")]
    GmjeEm3 { mixture: JointMixture },
    #[serde(rename = "gmje-gng")]
    GmjeGng { graph: GngGraph, mixture: JointMixture },
    /// `context_cov` is the running covariance of the marginal term, used
    /// as a zero-mean Gaussian over contexts when sampling.
    #[serde(rename = "gmje-mdn")]
    GmjeMdn { mdn: Mdn, context_cov: EmaCovariance },
}

impl ModelFile {
    pub fn variant(&self) -> Variant {
        match self {
            ModelFile::JepaMse { .. } => Variant::JepaMse,
            ModelFile::GjeDualRbf { .. } => Variant::GjeDualRbf,
            ModelFile::GmjeEm1 { .. } => Variant::GmjeEm1,
            ModelFile::GmjeEm3 { .. } => Variant::GmjeEm3,
            ModelFile::GmjeGng { .. } => Variant::GmjeGng,
            ModelFile::GmjeMdn { .. } => Variant::GmjeMdn,
        }
    }

    /// The joint mixture, for variants that have one.
    pub fn mixture(&self) -> Option<&JointMixture> {
        match self {
            ModelFile::GmjeEm1 { mixture } | ModelFile::GmjeEm3 { mixture } | ModelFile::GmjeGng { mixture, .. } => {
                Some(mixture)
            }
            _ => None,
        }
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read model {}: {e}", path.display())))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn save(&self, path: &Path) -> Result<(), CliError> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }
}

pub fn dual_predictor(kernel: &KernelSpec, x_c: &[f64], x_t: &[f64]) -> Result<DualPredictor, CliError> {
    let n = x_c.len();
    let batch = BatchEmbeddings::new(DMatrix::from_column_slice(n, 1, x_c), DMatrix::from_column_slice(n, 1, x_t))?;
    Ok(DualPredictor::fit(&batch, kernel, 0.0)?)
}
