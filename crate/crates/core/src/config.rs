//! Evaluation settings that resolve the choices the metric definitions leave open.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Default category id for unlabeled points. Chosen outside any realistic category range.
pub const DEFAULT_IGNORE_ID: u32 = u32::MAX;

/// When a category counts as absent from a cloud, making its ratio NULL.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NullMode {
    /// No ground-truth points of the category (`tp + fn == 0`).
    #[default]
    GtAbsent,
    /// Neither ground truth nor prediction mention the category (`tp + fp + fn == 0`).
    UnionAbsent,
}

/// Per-category accuracy formula.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AccMode {
    /// `(tp + tn) / (tp + fp + fn + tn)`
    #[default]
    Paper,
    /// `tp / (tp + fn)`
    Recall,
}

/// Which true-negative count an instance sees in instance-level accuracy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InstanceTnMode {
    /// Every instance sees the whole cloud-level TN of its category.
    #[default]
    CloudLevel,
    /// TN is split among instances by size, like FP.
    Allocated,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MetricConfig {
    pub ignore_id: u32,
    pub null_mode: NullMode,
    pub acc_mode: AccMode,
    pub instance_tn_mode: InstanceTnMode,
}

impl Default for MetricConfig {
    fn default() -> Self {
        Self {
            ignore_id: DEFAULT_IGNORE_ID,
            null_mode: NullMode::default(),
            acc_mode: AccMode::default(),
            instance_tn_mode: InstanceTnMode::default(),
        }
    }
}

impl MetricConfig {
    /// Stable textual identity of every setting; two reports are comparable iff these match.
    pub fn fingerprint(&self) -> String {
        format!(
            "ignore={};null={};acc={};instance-tn={}",
            self.ignore_id, self.null_mode, self.acc_mode, self.instance_tn_mode
        )
    }
}

macro_rules! kebab_enum {
    ($ty:ty { $($variant:ident => $name:literal),+ $(,)? }) => {
        impl $ty {
            pub const VARIANTS: &'static [&'static str] = &[$($name),+];
        }

        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(match self { $(Self::$variant => $name),+ })
            }
        }

        impl FromStr for $ty {
            type Err = String;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                match s {
                    $($name => Ok(Self::$variant),)+
                    other => Err(format!(
                        "unknown value {other:?}, expected one of: {}",
                        Self::VARIANTS.join(", ")
                    )),
                }
            }
        }
    };
}

kebab_enum!(NullMode { GtAbsent => "gt-absent", UnionAbsent => "union-absent" });
kebab_enum!(AccMode { Paper => "paper", Recall => "recall" });
kebab_enum!(InstanceTnMode { CloudLevel => "cloud-level", Allocated => "allocated" });
