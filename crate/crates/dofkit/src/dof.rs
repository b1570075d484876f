//! Kolmogorov n-widths and degrees-of-freedom counts.
//!
//! The n-width of the bandlimited family over the observation set equals
//! sqrt(lambda_n), so the number of degrees of freedom at accuracy eps is
//! the first index where sqrt(lambda_n) drops to eps. Closed-form leading
//! terms are provided for every cut-set geometry, together with the
//! heuristic frequency-integration route that must reproduce them.

use crate::geometry::{build_modulated_band, GeometryError, ModulatedBand};
use crate::quad::GaussLegendre;
use crate::spectrum::{count_at_level, SpectralError, Spectrum};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DofError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error("index {index} out of range for spectrum of length {len}")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("accuracy level must lie in (0, 1), got {0}")]
    LevelOutOfRange(f64),
    #[error("negative parameter: {0}")]
    NegativeParameter(String),
    #[error("spectrum is truncated above the eps = {eps} crossing; compute more eigenvalues")]
    TruncatedSpectrum { eps: f64 },
}

/// Asymptotic regime under which a leading term is exact to first order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// Blow up the spectral support (Omega -> infinity), fixed domain.
    Wideband,
    /// Blow up time and radiating-system size, fixed frequency band.
    LargeDomain,
    /// Both routes give the same leading term.
    Combined,
}

/// Kolmogorov n-width d_n = sqrt(lambda_n).
pub fn n_width(s: &Spectrum, n: usize) -> Result<f64, DofError> {
    s.eigenvalues
        .get(n)
        .map(|l| l.sqrt())
        .ok_or(DofError::IndexOutOfRange {
            index: n,
            len: s.eigenvalues.len(),
        })
}

/// The full (n, d_n) curve.
pub fn n_width_curve(s: &Spectrum) -> Vec<(usize, f64)> {
    s.eigenvalues
        .iter()
        .enumerate()
        .map(|(n, l)| (n, l.sqrt()))
        .collect()
}

/// Smallest n with d_n <= eps, i.e. the count of eigenvalues strictly above
/// eps^2; equality d_n = eps terminates the search at n.
pub fn dof_at_accuracy(s: &Spectrum, eps: f64) -> Result<usize, DofError> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(DofError::LevelOutOfRange(eps));
    }
    let thresh = eps * eps;
    let count = s.eigenvalues.iter().filter(|&&l| l > thresh).count();
    if count == s.eigenvalues.len() && s.eigenvalues.len() < s.active_points {
        return Err(DofError::TruncatedSpectrum { eps });
    }
    Ok(count)
}

fn require_nonnegative(name: &str, v: f64) -> Result<(), DofError> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(DofError::NegativeParameter(format!("{name} = {v}")))
    }
}

/// Circular cut leading term (Omega T / pi) (r Omega) = T r Omega^2 / pi.
pub fn dof_circular(omega: f64, t: f64, r: f64) -> Result<f64, DofError> {
    require_nonnegative("Omega", omega)?;
    require_nonnegative("T", t)?;
    require_nonnegative("r", r)?;
    Ok(omega * t / PI * (r * omega))
}

/// Spherical cut leading term 4 pi r^2 Omega^3 T / (3 pi^3).
pub fn dof_spherical(omega: f64, t: f64, r: f64) -> Result<f64, DofError> {
    require_nonnegative("Omega", omega)?;
    require_nonnegative("T", t)?;
    require_nonnegative("r", r)?;
    Ok(4.0 * PI * r * r * omega.powi(3) * t / (3.0 * PI.powi(3)))
}

/// Rotationally symmetric cut leading term A Omega^3 T / (3 pi^3); the
/// sphere area 4 pi r^2 reproduces the spherical calculator exactly.
pub fn dof_rotational(area: f64, omega: f64, t: f64) -> Result<f64, DofError> {
    require_nonnegative("area", area)?;
    require_nonnegative("Omega", omega)?;
    require_nonnegative("T", t)?;
    Ok(area * omega.powi(3) * t / (3.0 * PI.powi(3)))
}

/// Time-frequency count Omega T / pi.
pub fn onedim_time_bandwidth(omega: f64, t: f64) -> Result<f64, DofError> {
    require_nonnegative("Omega", omega)?;
    require_nonnegative("T", t)?;
    Ok(omega * t / PI)
}

/// Space-wavenumber count on the circle of radius r at frequency omega:
/// omega 2 pi r / pi = 2 omega r.
pub fn onedim_space_bandwidth(omega: f64, r: f64) -> Result<f64, DofError> {
    require_nonnegative("omega", omega)?;
    require_nonnegative("r", r)?;
    Ok(omega * 2.0 * PI * r / PI)
}

/// Spatial cut geometry for the per-frequency DoF density.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum CutGeometry {
    Circular { r: f64 },
    Spherical { r: f64 },
    Rotational { area: f64 },
}

impl CutGeometry {
    /// Spatial degrees of freedom carried by one frequency component.
    fn density(&self, omega: f64) -> f64 {
        match self {
            CutGeometry::Circular { r } => omega * 2.0 * PI * r / PI,
            CutGeometry::Spherical { r } => omega * omega * 4.0 * PI * r * r / (PI * PI),
            CutGeometry::Rotational { area } => area * omega * omega / (PI * PI),
        }
    }

    pub fn closed_form(&self, omega: f64, t: f64) -> Result<f64, DofError> {
        match self {
            CutGeometry::Circular { r } => dof_circular(omega, t, *r),
            CutGeometry::Spherical { r } => dof_spherical(omega, t, *r),
            CutGeometry::Rotational { area } => dof_rotational(*area, omega, t),
        }
    }
}

/// Integrates the per-frequency spatial DoF density over [0, Omega] and
/// multiplies by T / pi. Equals the closed-form calculator exactly (the
/// density is a polynomial in omega, which the quadrature integrates
/// without error).
pub fn heuristic_dof(geometry: &CutGeometry, omega: f64, t: f64) -> Result<f64, DofError> {
    require_nonnegative("Omega", omega)?;
    require_nonnegative("T", t)?;
    let rule = GaussLegendre::new(16);
    let integral = rule.integrate(0.0, omega, |w| geometry.density(w));
    Ok(t / PI * integral)
}

/// Leading term and band-shape correction for a modulated signal.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ModulatedDof {
    pub leading_term: f64,
    /// (Delta omega / omega_c)^2 / 12; identically zero for the circular
    /// cut, whose frequency integral is the exact square difference.
    pub delta: f64,
    pub carrier: f64,
    pub delta_omega: f64,
}

/// DoF of a real signal occupying [omega_1, omega_2] around its midpoint
/// carrier, radiated for time T through the given spatial cut.
pub fn dof_modulated(
    t: f64,
    omega_lo: f64,
    omega_hi: f64,
    geometry: &CutGeometry,
) -> Result<ModulatedDof, DofError> {
    require_nonnegative("T", t)?;
    let band: ModulatedBand = build_modulated_band(omega_lo, omega_hi)?;
    let wc = band.carrier();
    let dw = band.delta_omega();
    let delta = (dw / wc).powi(2) / 12.0;
    let (leading_term, delta) = match geometry {
        CutGeometry::Circular { r } => (t * dw / PI * (2.0 * PI * r * wc / PI), 0.0),
        CutGeometry::Spherical { r } => (
            t * dw / PI * (4.0 * PI * r * r * wc * wc / (PI * PI)) * (1.0 + delta),
            delta,
        ),
        CutGeometry::Rotational { area } => (
            t * dw / PI * (area * wc * wc / (PI * PI)) * (1.0 + delta),
            delta,
        ),
    };
    Ok(ModulatedDof {
        leading_term,
        delta,
        carrier: wc,
        delta_omega: dw,
    })
}

/// DoF per unit time per unit band in the narrowband limit:
/// N_0 = A omega_c^2 / pi^2.
pub fn narrowband_density(area: f64, carrier: f64) -> Result<f64, DofError> {
    require_nonnegative("area", area)?;
    require_nonnegative("omega_c", carrier)?;
    Ok(area * carrier * carrier / (PI * PI))
}

/// Eigenvalue-count and n-width views of one job, side by side. The
/// theorems count eigenvalues at level eps while the n-width definition
/// cuts d_n = sqrt(lambda_n) at eps (level eps^2 on eigenvalues); both
/// first-order terms coincide, so both are reported.
#[derive(Debug, Clone, Serialize)]
pub struct DofReport {
    pub epsilon: f64,
    pub regime: Regime,
    pub dof_closed_form: f64,
    /// min{n : d_n <= eps} from the computed spectrum.
    pub dof_empirical: Option<usize>,
    /// N(eps): eigenvalues at or above eps, the theorem-side convention.
    pub count_at_eigenvalue_level: Option<usize>,
    /// (empirical - closed_form) / closed_form; zero when both vanish.
    pub relative_gap: Option<f64>,
    pub n_width_curve: Vec<(usize, f64)>,
}

/// Combines a spectrum with a closed-form leading term into a report.
/// Pass `None` for the spectrum to get a closed-form-only report.
pub fn empirical_vs_closed_form(
    spectrum: Option<&Spectrum>,
    closed_form: f64,
    eps: f64,
    regime: Regime,
) -> Result<DofReport, DofError> {
    let Some(s) = spectrum else {
        return Ok(DofReport {
            epsilon: eps,
            regime,
            dof_closed_form: closed_form,
            dof_empirical: None,
            count_at_eigenvalue_level: None,
            relative_gap: if closed_form == 0.0 { Some(0.0) } else { None },
            n_width_curve: vec![],
        });
    };
    let dof_empirical = dof_at_accuracy(s, eps)?;
    let count_level = count_at_level(s, eps)?;
    let relative_gap = if closed_form != 0.0 {
        Some((dof_empirical as f64 - closed_form) / closed_form)
    } else {
        Some(0.0)
    };
    Ok(DofReport {
        epsilon: eps,
        regime,
        dof_closed_form: closed_form,
        dof_empirical: Some(dof_empirical),
        count_at_eigenvalue_level: Some(count_level),
        relative_gap,
        n_width_curve: n_width_curve(s),
    })
}
