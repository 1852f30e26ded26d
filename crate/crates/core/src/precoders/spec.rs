use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaseVector {
    /// Plane-wave steering towards the intended user's angle (per linear array).
    FarField,
    /// Beamfocusing towards the intended user's position.
    NearField,
    /// Conjugate of the intended user's channel.
    Mrt,
}

/// Which vectors span the suppression subspace for each unintended user.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Suppression {
    None,
    /// Channel columns of the unintended users.
    Csi,
    /// Near-field vectors towards the unintended users' positions.
    NearField,
    /// Channel columns for users sharing the intended user's cluster,
    /// near-field vectors for everyone else.
    Hybrid,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regularization {
    Off,
    /// `α` tied to the scenario noise variance.
    NoiseVariance,
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scope {
    Centralized,
    /// Every AP builds its part from its own antennas and CSI only.
    DistributedPerAp,
}

/// The four kinds of side information a precoder can consume.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InfoSet {
    pub location_intended: bool,
    pub csi_intended: bool,
    pub location_unintended: bool,
    pub csi_unintended: bool,
}

impl InfoSet {
    pub fn is_subset_of(&self, other: &InfoSet) -> bool {
        (!self.location_intended || other.location_intended)
            && (!self.csi_intended || other.csi_intended)
            && (!self.location_unintended || other.location_unintended)
            && (!self.csi_unintended || other.csi_unintended)
    }

    fn missing_from(&self, other: &InfoSet) -> Vec<&'static str> {
        let mut out = Vec::new();
        if self.location_intended && !other.location_intended {
            out.push("location of the intended user");
        }
        if self.csi_intended && !other.csi_intended {
            out.push("CSI of the intended user");
        }
        if self.location_unintended && !other.location_unintended {
            out.push("locations of unintended users");
        }
        if self.csi_unintended && !other.csi_unintended {
            out.push("CSI of unintended users");
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PrecoderSpec {
    pub base: BaseVector,
    #[serde(default = "default_suppression")]
    pub suppression: Suppression,
    #[serde(default = "default_regularization")]
    pub regularization: Regularization,
    #[serde(default = "default_scope")]
    pub scope: Scope,
}

fn default_suppression() -> Suppression {
    Suppression::None
}
fn default_regularization() -> Regularization {
    Regularization::Off
}
fn default_scope() -> Scope {
    Scope::Centralized
}

impl PrecoderSpec {
    pub const fn new(base: BaseVector, suppression: Suppression) -> Self {
        PrecoderSpec {
            base,
            suppression,
            regularization: Regularization::Off,
            scope: Scope::Centralized,
        }
    }

    pub const fn regularized(mut self) -> Self {
        self.regularization = Regularization::NoiseVariance;
        self
    }

    pub const fn distributed(mut self) -> Self {
        self.scope = Scope::DistributedPerAp;
        self
    }

    pub fn is_regularized(&self) -> bool {
        !matches!(self.regularization, Regularization::Off)
    }

    /// Side information this precoder consumes.
    pub fn requirements(&self) -> InfoSet {
        let mut info = InfoSet::default();
        match self.base {
            BaseVector::FarField | BaseVector::NearField => info.location_intended = true,
            BaseVector::Mrt => info.csi_intended = true,
        }
        match self.suppression {
            Suppression::None => {}
            Suppression::Csi => info.csi_unintended = true,
            Suppression::NearField => info.location_unintended = true,
            Suppression::Hybrid => {
                info.location_unintended = true;
                info.csi_unintended = true;
            }
        }
        info
    }

    pub fn validate(&self) -> Result<()> {
        if self.suppression == Suppression::None && self.is_regularized() {
            return Err(Error::Config(format!(
                "{self}: regularization needs a suppression subspace"
            )));
        }
        if let Regularization::Fixed(a) = self.regularization {
            if !(a > 0.0) || !a.is_finite() {
                return Err(Error::Config(format!("{self}: fixed alpha must be > 0, got {a}")));
            }
        }
        Ok(())
    }

    /// Parses names such as `MRT`, `near_field`, `ZF`, `RZF`, `nf_nf`,
    /// `MRT_nf`, `RMRT_nf`, `ZF_nf`, `RZF_nf`, optionally prefixed with
    /// `DIS_` for per-AP operation. Matching is case-insensitive.
    pub fn parse(name: &str) -> Result<Self> {
        let lower = name.trim().to_ascii_lowercase();
        let (scope, rest) = match lower.strip_prefix("dis_").or_else(|| lower.strip_prefix("dis ")) {
            Some(r) => (Scope::DistributedPerAp, r),
            None => (Scope::Centralized, lower.as_str()),
        };
        let base_of = |s: &str| match s {
            "mrt" => Some(BaseVector::Mrt),
            "nf" | "near_field" | "nearfield" => Some(BaseVector::NearField),
            "ff" | "far_field" | "farfield" => Some(BaseVector::FarField),
            _ => None,
        };
        let suppression_of = |s: &str| match s {
            "nf" => Some(Suppression::NearField),
            "csi" => Some(Suppression::Csi),
            "hyb" | "hybrid" => Some(Suppression::Hybrid),
            _ => None,
        };
        let mut spec = match rest {
            "zf" => PrecoderSpec::new(BaseVector::Mrt, Suppression::Csi),
            "rzf" => PrecoderSpec::new(BaseVector::Mrt, Suppression::Csi).regularized(),
            "zf_nf" => PrecoderSpec::new(BaseVector::Mrt, Suppression::Hybrid),
            "rzf_nf" => PrecoderSpec::new(BaseVector::Mrt, Suppression::Hybrid).regularized(),
            other => {
                if let Some(base) = base_of(other) {
                    PrecoderSpec::new(base, Suppression::None)
                } else {
                    let (a, b) = other
                        .rsplit_once('_')
                        .ok_or_else(|| Error::Config(format!("unknown precoder `{name}`")))?;
                    let supp = suppression_of(b)
                        .ok_or_else(|| Error::Config(format!("unknown precoder `{name}`")))?;
                    let (regularized, a) = match a.strip_prefix('r') {
                        Some(stripped) if base_of(stripped).is_some() && base_of(a).is_none() => (true, stripped),
                        _ => (false, a),
                    };
                    let base = base_of(a).ok_or_else(|| Error::Config(format!("unknown precoder `{name}`")))?;
                    let s = PrecoderSpec::new(base, supp);
                    if regularized {
                        s.regularized()
                    } else {
                        s
                    }
                }
            }
        };
        spec.scope = scope;
        spec.validate()?;
        Ok(spec)
    }
}

impl fmt::Display for PrecoderSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.scope == Scope::DistributedPerAp {
            f.write_str("DIS_")?;
        }
        let r = if self.is_regularized() { "R" } else { "" };
        let base = match self.base {
            BaseVector::Mrt => "MRT",
            BaseVector::NearField => "nf",
            BaseVector::FarField => "ff",
        };
        match (self.base, self.suppression) {
            (BaseVector::NearField, Suppression::None) => f.write_str("near_field")?,
            (BaseVector::FarField, Suppression::None) => f.write_str("far_field")?,
            (BaseVector::Mrt, Suppression::None) => f.write_str("MRT")?,
            (BaseVector::Mrt, Suppression::Csi) => write!(f, "{r}ZF")?,
            (BaseVector::Mrt, Suppression::Hybrid) => write!(f, "{r}ZF_nf")?,
            (_, Suppression::NearField) => write!(f, "{r}{base}_nf")?,
            (_, Suppression::Csi) => write!(f, "{r}{base}_csi")?,
            (_, Suppression::Hybrid) => write!(f, "{r}{base}_hyb")?,
        }
        if let Regularization::Fixed(a) = self.regularization {
            write!(f, "[alpha={a}]")?;
        }
        Ok(())
    }
}

/// A configured precoder: display label, algorithm and the side
/// information it is allowed to read.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrecoderEntry {
    pub label: String,
    pub spec: PrecoderSpec,
    pub grants: InfoSet,
}

impl PrecoderEntry {
    /// Named algorithm, granted exactly what it requires.
    pub fn named(name: &str) -> Result<Self> {
        let spec = PrecoderSpec::parse(name)?;
        Ok(PrecoderEntry {
            label: spec.to_string(),
            grants: spec.requirements(),
            spec,
        })
    }

    /// Fails when the spec reads information it was not granted.
    pub fn validate(&self) -> Result<()> {
        self.spec.validate()?;
        let needed = self.spec.requirements();
        if !needed.is_subset_of(&self.grants) {
            return Err(Error::NotGranted(format!(
                "precoder `{}` needs {} but was not granted it",
                self.label,
                needed.missing_from(&self.grants).join(", ")
            )));
        }
        Ok(())
    }
}
