//! JSON job configuration: parsed strictly (unknown fields rejected) and
//! round-trippable through serde.

use dofkit::dof::CutGeometry;
use dofkit::geometry::{build_circular_cut_sets, build_spherical_cut_sets, SupportSet};
use dofkit::operator::Resolution;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Spectrum,
    Sweep,
    Dof,
    Verify,
}

impl std::fmt::Display for Command {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Command::Spectrum => "spectrum",
            Command::Sweep => "sweep",
            Command::Dof => "dof",
            Command::Verify => "verify",
        };
        f.write_str(s)
    }
}

/// Support-set pair for the operator pipeline.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GeometrySpec {
    /// P an axis-aligned box, Q a centered box in the conjugate domain.
    BoxPair {
        p_lo: Vec<f64>,
        p_hi: Vec<f64>,
        q_half_widths: Vec<f64>,
    },
    /// Space-time cut of a disk boundary: P = [-T/2,T/2] x [-pi,pi],
    /// Q the cone |k| <= r|omega|, omega in [-Omega, Omega].
    CircularCut { omega: f64, t: f64, r: f64 },
    /// Space-time cut of a sphere boundary; two angular axes.
    SphericalCut { omega: f64, t: f64, r: f64 },
}

impl GeometrySpec {
    pub fn build(&self) -> Result<(SupportSet, SupportSet), CliError> {
        let pair = match self {
            GeometrySpec::BoxPair {
                p_lo,
                p_hi,
                q_half_widths,
            } => (
                SupportSet::axis_box(p_lo.clone(), p_hi.clone())?,
                SupportSet::centered_box(q_half_widths)?,
            ),
            GeometrySpec::CircularCut { omega, t, r } => build_circular_cut_sets(*omega, *t, *r)?,
            GeometrySpec::SphericalCut { omega, t, r } => build_spherical_cut_sets(*omega, *t, *r)?,
        };
        Ok(pair)
    }
}

/// Sweep schedule over operator scalings.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScalingSpec {
    /// Blow up the observation set: A = beta I, B = I.
    Landau { betas: Vec<f64> },
    /// A = diag(tau, 1, ...), B = diag(1, rho, ...).
    Anisotropic { pairs: Vec<(f64, f64)> },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ResolutionSpec {
    PointsPerAxis(Vec<usize>),
    Spacing(f64),
    NyquistFraction(f64),
}

impl ResolutionSpec {
    pub fn to_resolution(&self) -> Resolution {
        match self {
            ResolutionSpec::PointsPerAxis(p) => Resolution::PointsPerAxis(p.clone()),
            ResolutionSpec::Spacing(s) => Resolution::Spacing(*s),
            ResolutionSpec::NyquistFraction(f) => Resolution::NyquistFraction(*f),
        }
    }
}

/// DoF job: closed-form calculators, optionally backed by an empirical
/// spectrum of the matching cut geometry.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DofSpec {
    pub cut: CutGeometry,
    pub omega: f64,
    pub t: f64,
    /// Modulated band [omega_lo, omega_hi]; when set, the modulated
    /// calculator is reported instead of the baseband one.
    #[serde(default)]
    pub band: Option<(f64, f64)>,
    /// Accuracy level for the n-width count.
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    /// When set, assemble the (tau, rho)-scaled operator and report the
    /// empirical count next to the closed form. Requires `resolution`.
    #[serde(default)]
    pub empirical_scale: Option<(f64, f64)>,
}

fn default_epsilon() -> f64 {
    0.5
}

fn default_eps_list() -> Vec<f64> {
    vec![0.5]
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JobConfig {
    pub command: Command,
    #[serde(default)]
    pub geometry: Option<GeometrySpec>,
    #[serde(default)]
    pub scaling: Option<ScalingSpec>,
    #[serde(default)]
    pub resolution: Option<ResolutionSpec>,
    /// Largest point count assembled densely; DOFKIT_DENSE_CAP overrides.
    #[serde(default)]
    pub dense_cap: Option<usize>,
    /// Eigenvalue levels for N(eps) tables.
    #[serde(default = "default_eps_list")]
    pub eps: Vec<f64>,
    #[serde(default)]
    pub dof: Option<DofSpec>,
    /// Seed for randomized diagnostics in the verify suite.
    #[serde(default)]
    pub seed: Option<u64>,
}

impl JobConfig {
    pub fn geometry(&self) -> Result<&GeometrySpec, CliError> {
        self.geometry
            .as_ref()
            .ok_or_else(|| CliError::config("missing field `geometry`"))
    }

    pub fn resolution(&self) -> Result<Resolution, CliError> {
        self.resolution
            .as_ref()
            .map(ResolutionSpec::to_resolution)
            .ok_or_else(|| CliError::config("missing field `resolution`"))
    }

    pub fn eps_list(&self) -> Result<&[f64], CliError> {
        for eps in &self.eps {
            if !(*eps > 0.0 && *eps < 1.0) {
                return Err(CliError::config(format!(
                    "eps values must lie in (0, 1), got {eps}"
                )));
            }
        }
        Ok(&self.eps)
    }
}

pub fn parse(text: &str) -> Result<JobConfig, CliError> {
    serde_json::from_str(text)
        .map_err(|e| CliError::config(format!("line {}, column {}: {e}", e.line(), e.column())))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shipped_configs_round_trip() {
        let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
        let mut seen = 0usize;
        for entry in std::fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.extension().map(|e| e == "json").unwrap_or(false) {
                let text = std::fs::read_to_string(&path).unwrap();
                let parsed = parse(&text).unwrap();
                let serialized = serde_json::to_string(&parsed).unwrap();
                let reparsed = parse(&serialized).unwrap();
                assert_eq!(serialized, serde_json::to_string(&reparsed).unwrap());
                seen += 1;
            }
        }
        assert_eq!(seen, 8);
    }

    #[test]
    fn unknown_fields_rejected() {
        let err = parse(r#"{"command": "verify", "extra": 1}"#).unwrap_err();
        assert!(err.to_string().contains("extra"));
    }

    #[test]
    fn eps_outside_unit_interval_rejected() {
        let config = parse(r#"{"command": "spectrum", "eps": [1.5]}"#).unwrap();
        assert!(config.eps_list().is_err());
    }
}
