//! Support sets, linear scalings, and cut-set geometries.
//!
//! A [`SupportSet`] is a bounded measurable region in R^N given by an
//! indicator, a bounding box, and an exact-or-estimated Lebesgue measure.
//! All coordinates are dimensionless; radii and meridian lengths are
//! normalized by the speed of light so that radius-frequency and
//! time-frequency products are pure numbers.

use crate::quad::GaussLegendre;
use nalgebra::DMatrix;
use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("linear map is singular (|det| = {det:.3e})")]
    SingularMap { det: f64 },
    #[error("measure refinement did not converge: coarse/fine deltas {delta_coarse:.3e} -> {delta_fine:.3e}")]
    MeasureNotConverged { delta_coarse: f64, delta_fine: f64 },
    #[error("meridian polyline is self-intersecting near segment {segment}")]
    SelfIntersectingMeridian { segment: usize },
}

/// A measure value together with an error estimate. Exact values carry
/// a zero error bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Measure {
    pub value: f64,
    pub error: f64,
}

impl Measure {
    pub fn exact(value: f64) -> Self {
        Measure { value, error: 0.0 }
    }
}

/// An invertible N x N real linear map.
#[derive(Debug, Clone)]
pub struct LinearMap {
    matrix: DMatrix<f64>,
    inverse: DMatrix<f64>,
    determinant: f64,
}

impl LinearMap {
    pub fn new(matrix: DMatrix<f64>) -> Result<Self, GeometryError> {
        if !matrix.is_square() {
            return Err(GeometryError::InvalidParameter(
                "linear map matrix must be square".into(),
            ));
        }
        let determinant = matrix.clone().lu().determinant();
        if determinant.abs() < 1e-300 || !determinant.is_finite() {
            return Err(GeometryError::SingularMap { det: determinant });
        }
        let inverse = matrix
            .clone()
            .try_inverse()
            .ok_or(GeometryError::SingularMap { det: determinant })?;
        Ok(LinearMap {
            matrix,
            inverse,
            determinant,
        })
    }

    pub fn identity(n: usize) -> Self {
        LinearMap {
            matrix: DMatrix::identity(n, n),
            inverse: DMatrix::identity(n, n),
            determinant: 1.0,
        }
    }

    pub fn diagonal(entries: &[f64]) -> Result<Self, GeometryError> {
        for &d in entries {
            if d == 0.0 || !d.is_finite() {
                return Err(GeometryError::SingularMap { det: 0.0 });
            }
        }
        let n = entries.len();
        let matrix = DMatrix::from_diagonal(&nalgebra::DVector::from_row_slice(entries));
        let inverse =
            DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(n, entries.iter().map(|d| 1.0 / d)));
        Ok(LinearMap {
            matrix,
            inverse,
            determinant: entries.iter().product(),
        })
    }

    /// Uniform scaling by beta, the Landau blow-up.
    pub fn scalar(n: usize, beta: f64) -> Result<Self, GeometryError> {
        Self::diagonal(&vec![beta; n])
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn determinant(&self) -> f64 {
        self.determinant
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let v = self.matrix.clone() * nalgebra::DVector::from_row_slice(x);
        v.iter().copied().collect()
    }

    pub fn apply_inverse(&self, x: &[f64]) -> Vec<f64> {
        let v = &self.inverse * nalgebra::DVector::from_row_slice(x);
        v.iter().copied().collect()
    }

    /// Applies the transpose, used by the kernel scaling h_B(u) = |B| h(B^T u).
    pub fn apply_transpose(&self, x: &[f64]) -> Vec<f64> {
        let v = self.matrix.transpose() * nalgebra::DVector::from_row_slice(x);
        v.iter().copied().collect()
    }

    pub fn min_singular_value(&self) -> f64 {
        self.matrix.clone().svd(false, false).singular_values.min()
    }

    /// B^T A as a map, for the limiting condition of the general scaling theorem.
    pub fn transpose_product(b: &LinearMap, a: &LinearMap) -> Result<LinearMap, GeometryError> {
        LinearMap::new(b.matrix.transpose() * &a.matrix)
    }
}

/// Spectral support given per temporal frequency omega as a centered box
/// cross-section in the remaining wavenumber axes. Half-width on wavenumber
/// axis k at frequency omega is `slopes[k] * |omega|`, which covers the
/// cone-shaped sets of the circular (one slope) and spherical (two equal
/// slopes) cut geometries.
#[derive(Debug, Clone, PartialEq)]
pub struct OmegaSlicedSet {
    pub omega_max: f64,
    pub slopes: Vec<f64>,
}

impl OmegaSlicedSet {
    pub fn new(omega_max: f64, slopes: Vec<f64>) -> Result<Self, GeometryError> {
        if !(omega_max > 0.0) || !omega_max.is_finite() {
            return Err(GeometryError::InvalidParameter(format!(
                "omega_max must be positive, got {omega_max}"
            )));
        }
        if slopes.is_empty() || slopes.iter().any(|s| *s < 0.0 || !s.is_finite()) {
            return Err(GeometryError::InvalidParameter(
                "slice slopes must be nonnegative and nonempty".into(),
            ));
        }
        Ok(OmegaSlicedSet { omega_max, slopes })
    }

    pub fn dim(&self) -> usize {
        1 + self.slopes.len()
    }

    /// Cross-section measure at frequency omega: prod_k 2 s_k |omega|.
    pub fn slice_measure(&self, omega: f64) -> f64 {
        self.slopes.iter().map(|s| 2.0 * s * omega.abs()).product()
    }

    /// Closed-form measure: 2 prod(2 s_k) Omega^N / N.
    pub fn measure(&self) -> f64 {
        let n = self.dim();
        let prod: f64 = self.slopes.iter().map(|s| 2.0 * s).product();
        2.0 * prod * self.omega_max.powi(n as i32) / n as f64
    }

    /// Measure by 1-D quadrature of slice measures, the cross-check route.
    pub fn measure_by_slices(&self, nodes: usize) -> f64 {
        let rule = GaussLegendre::new(nodes);
        2.0 * rule.integrate(0.0, self.omega_max, |w| self.slice_measure(w))
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        if x.len() != self.dim() {
            return false;
        }
        let w = x[0];
        if w.abs() > self.omega_max {
            return false;
        }
        x[1..]
            .iter()
            .zip(&self.slopes)
            .all(|(xi, s)| xi.abs() <= s * w.abs())
    }

    pub fn bounding_box(&self) -> Vec<(f64, f64)> {
        let mut bb = vec![(-self.omega_max, self.omega_max)];
        for s in &self.slopes {
            bb.push((-s * self.omega_max, s * self.omega_max));
        }
        bb
    }
}

#[derive(Debug, Clone)]
enum SetKind {
    AxisBox {
        lo: Vec<f64>,
        hi: Vec<f64>,
    },
    Ball {
        center: Vec<f64>,
        radius: f64,
    },
    Product {
        factors: Vec<SupportSet>,
    },
    OmegaSliced(OmegaSlicedSet),
    AffineImage {
        map: LinearMap,
        inner: Box<SupportSet>,
    },
    Union(Box<SupportSet>, Box<SupportSet>),
    Intersection(Box<SupportSet>, Box<SupportSet>),
}

/// Tag naming the structural kind of a support set.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SetTag {
    Box,
    Ball,
    Product,
    OmegaSliced,
    AffineImage,
    Union,
    Intersection,
}

/// A bounded measurable region in R^N with boundary of measure zero.
#[derive(Debug, Clone)]
pub struct SupportSet {
    kind: SetKind,
    dimension: usize,
}

impl SupportSet {
    /// Axis-aligned box with the given lower and upper corners. Degenerate
    /// (zero-volume) boxes are allowed and act as empty sets on a grid.
    pub fn axis_box(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self, GeometryError> {
        if lo.len() != hi.len() || lo.is_empty() {
            return Err(GeometryError::DimensionMismatch {
                expected: lo.len().max(1),
                got: hi.len(),
            });
        }
        for (a, b) in lo.iter().zip(&hi) {
            if !a.is_finite() || !b.is_finite() || a > b {
                return Err(GeometryError::InvalidParameter(format!(
                    "box bounds must be finite with lo <= hi, got [{a}, {b}]"
                )));
            }
        }
        let dimension = lo.len();
        Ok(SupportSet {
            kind: SetKind::AxisBox { lo, hi },
            dimension,
        })
    }

    /// Box centered at the origin with the given per-axis half-widths.
    pub fn centered_box(half_widths: &[f64]) -> Result<Self, GeometryError> {
        let lo: Vec<f64> = half_widths.iter().map(|h| -h).collect();
        let hi: Vec<f64> = half_widths.to_vec();
        Self::axis_box(lo, hi)
    }

    pub fn ball(center: Vec<f64>, radius: f64) -> Result<Self, GeometryError> {
        if center.is_empty() || center.iter().any(|c| !c.is_finite()) {
            return Err(GeometryError::InvalidParameter("ball center must be finite".into()));
        }
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(GeometryError::InvalidParameter(format!(
                "ball radius must be positive, got {radius}"
            )));
        }
        let dimension = center.len();
        Ok(SupportSet {
            kind: SetKind::Ball { center, radius },
            dimension,
        })
    }

    pub fn product(factors: Vec<SupportSet>) -> Result<Self, GeometryError> {
        if factors.is_empty() {
            return Err(GeometryError::InvalidParameter("product needs at least one factor".into()));
        }
        let dimension = factors.iter().map(|f| f.dimension).sum();
        Ok(SupportSet {
            kind: SetKind::Product { factors },
            dimension,
        })
    }

    pub fn omega_sliced(set: OmegaSlicedSet) -> Self {
        let dimension = set.dim();
        SupportSet {
            kind: SetKind::OmegaSliced(set),
            dimension,
        }
    }

    pub fn union(a: SupportSet, b: SupportSet) -> Result<Self, GeometryError> {
        if a.dimension != b.dimension {
            return Err(GeometryError::DimensionMismatch {
                expected: a.dimension,
                got: b.dimension,
            });
        }
        let dimension = a.dimension;
        Ok(SupportSet {
            kind: SetKind::Union(Box::new(a), Box::new(b)),
            dimension,
        })
    }

    pub fn intersection(a: SupportSet, b: SupportSet) -> Result<Self, GeometryError> {
        if a.dimension != b.dimension {
            return Err(GeometryError::DimensionMismatch {
                expected: a.dimension,
                got: b.dimension,
            });
        }
        let dimension = a.dimension;
        Ok(SupportSet {
            kind: SetKind::Intersection(Box::new(a), Box::new(b)),
            dimension,
        })
    }

    pub fn dim(&self) -> usize {
        self.dimension
    }

    pub fn tag(&self) -> SetTag {
        match &self.kind {
            SetKind::AxisBox { .. } => SetTag::Box,
            SetKind::Ball { .. } => SetTag::Ball,
            SetKind::Product { .. } => SetTag::Product,
            SetKind::OmegaSliced(_) => SetTag::OmegaSliced,
            SetKind::AffineImage { .. } => SetTag::AffineImage,
            SetKind::Union(..) => SetTag::Union,
            SetKind::Intersection(..) => SetTag::Intersection,
        }
    }

    /// The omega-sliced description, when this set is one (possibly under a
    /// diagonal affine image, which rescales the cone parameters exactly).
    pub fn as_omega_sliced(&self) -> Option<OmegaSlicedSet> {
        match &self.kind {
            SetKind::OmegaSliced(s) => Some(s.clone()),
            SetKind::AffineImage { map, inner } => {
                let inner = inner.as_omega_sliced()?;
                let m = map.matrix();
                // only diagonal maps preserve the sliced structure
                for i in 0..m.nrows() {
                    for j in 0..m.ncols() {
                        if i != j && m[(i, j)] != 0.0 {
                            return None;
                        }
                    }
                }
                let d0 = m[(0, 0)];
                if d0 <= 0.0 {
                    return None;
                }
                let slopes = inner
                    .slopes
                    .iter()
                    .enumerate()
                    .map(|(k, s)| s * m[(k + 1, k + 1)].abs() / d0)
                    .collect();
                OmegaSlicedSet::new(inner.omega_max * d0, slopes).ok()
            }
            _ => None,
        }
    }

    /// The per-axis half-widths, when this set is an origin-centered box
    /// (possibly under an affine image of a centered box by a diagonal map).
    pub fn as_centered_box(&self) -> Option<Vec<f64>> {
        match &self.kind {
            SetKind::AxisBox { lo, hi } => {
                if lo.iter().zip(hi).all(|(a, b)| (a + b).abs() < 1e-14 * (b - a).abs().max(1e-300)) {
                    Some(hi.clone())
                } else {
                    None
                }
            }
            SetKind::AffineImage { map, inner } => {
                let half = inner.as_centered_box()?;
                let m = map.matrix();
                for i in 0..m.nrows() {
                    for j in 0..m.ncols() {
                        if i != j && m[(i, j)] != 0.0 {
                            return None;
                        }
                    }
                }
                Some(half.iter().enumerate().map(|(k, h)| h * m[(k, k)].abs()).collect())
            }
            _ => None,
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        if x.len() != self.dimension {
            return false;
        }
        match &self.kind {
            SetKind::AxisBox { lo, hi } => x
                .iter()
                .zip(lo.iter().zip(hi))
                .all(|(xi, (a, b))| *xi >= *a && *xi <= *b),
            SetKind::Ball { center, radius } => {
                let d2: f64 = x.iter().zip(center).map(|(xi, c)| (xi - c) * (xi - c)).sum();
                d2 <= radius * radius
            }
            SetKind::Product { factors } => {
                let mut off = 0;
                for f in factors {
                    if !f.contains(&x[off..off + f.dimension]) {
                        return false;
                    }
                    off += f.dimension;
                }
                true
            }
            SetKind::OmegaSliced(s) => s.contains(x),
            SetKind::AffineImage { map, inner } => inner.contains(&map.apply_inverse(x)),
            SetKind::Union(a, b) => a.contains(x) || b.contains(x),
            SetKind::Intersection(a, b) => a.contains(x) && b.contains(x),
        }
    }

    pub fn bounding_box(&self) -> Vec<(f64, f64)> {
        match &self.kind {
            SetKind::AxisBox { lo, hi } => lo.iter().zip(hi).map(|(a, b)| (*a, *b)).collect(),
            SetKind::Ball { center, radius } => {
                center.iter().map(|c| (c - radius, c + radius)).collect()
            }
            SetKind::Product { factors } => {
                factors.iter().flat_map(|f| f.bounding_box()).collect()
            }
            SetKind::OmegaSliced(s) => s.bounding_box(),
            SetKind::AffineImage { map, inner } => {
                // AABB of the image of the inner AABB's corners
                let inner_bb = inner.bounding_box();
                let n = inner_bb.len();
                let mut out = vec![(f64::INFINITY, f64::NEG_INFINITY); n];
                for mask in 0..(1usize << n) {
                    let corner: Vec<f64> = (0..n)
                        .map(|k| if mask >> k & 1 == 1 { inner_bb[k].1 } else { inner_bb[k].0 })
                        .collect();
                    let img = map.apply(&corner);
                    for k in 0..n {
                        out[k].0 = out[k].0.min(img[k]);
                        out[k].1 = out[k].1.max(img[k]);
                    }
                }
                out
            }
            SetKind::Union(a, b) => {
                let (ba, bb) = (a.bounding_box(), b.bounding_box());
                ba.iter()
                    .zip(&bb)
                    .map(|(x, y)| (x.0.min(y.0), x.1.max(y.1)))
                    .collect()
            }
            SetKind::Intersection(a, b) => {
                let (ba, bb) = (a.bounding_box(), b.bounding_box());
                ba.iter()
                    .zip(&bb)
                    .map(|(x, y)| {
                        let lo = x.0.max(y.0);
                        let hi = x.1.min(y.1);
                        if lo > hi { (0.0, 0.0) } else { (lo, hi) }
                    })
                    .collect()
            }
        }
    }

    /// Lebesgue measure with an error estimate. Exact for boxes, balls,
    /// products, omega-sliced cones, and affine images of those; grid
    /// counting with Richardson refinement otherwise.
    pub fn measure(&self) -> Result<Measure, GeometryError> {
        match &self.kind {
            SetKind::AxisBox { lo, hi } => Ok(Measure::exact(
                lo.iter().zip(hi).map(|(a, b)| b - a).product(),
            )),
            SetKind::Ball { center, radius } => {
                Ok(Measure::exact(ball_volume(center.len(), *radius)))
            }
            SetKind::Product { factors } => {
                let mut value = 1.0;
                let mut rel_err = 0.0;
                for f in factors {
                    let m = f.measure()?;
                    value *= m.value;
                    if m.value > 0.0 {
                        rel_err += m.error / m.value;
                    }
                }
                Ok(Measure { value, error: value * rel_err })
            }
            SetKind::OmegaSliced(s) => Ok(Measure::exact(s.measure())),
            SetKind::AffineImage { map, inner } => {
                let m = inner.measure()?;
                let scale = map.determinant().abs();
                Ok(Measure { value: scale * m.value, error: scale * m.error })
            }
            SetKind::Union(a, b) => {
                if boxes_disjoint(&a.bounding_box(), &b.bounding_box()) {
                    let (ma, mb) = (a.measure()?, b.measure()?);
                    Ok(Measure { value: ma.value + mb.value, error: ma.error + mb.error })
                } else {
                    self.measure_by_counting()
                }
            }
            SetKind::Intersection(..) => self.measure_by_counting(),
        }
    }

    /// Grid counting at three resolutions with Richardson extrapolation
    /// assuming first-order boundary error.
    fn measure_by_counting(&self) -> Result<Measure, GeometryError> {
        let bb = self.bounding_box();
        let n = self.dimension;
        let base = match n {
            1 => 512,
            2 => 64,
            _ => 16,
        };
        let counts: Vec<f64> = [base, base * 2, base * 4]
            .iter()
            .map(|&res| self.count_fraction(&bb, res))
            .collect();
        let cell: f64 = bb.iter().map(|(a, b)| b - a).product();
        let m: Vec<f64> = counts.iter().map(|c| c * cell).collect();
        let d1 = (m[1] - m[0]).abs();
        let d2 = (m[2] - m[1]).abs();
        // a degenerate or grid-aligned set converges immediately
        if d2 < 1e-12 * m[2].abs().max(1.0) {
            return Ok(Measure { value: m[2], error: d2.max(1e-12) });
        }
        if d1 > 1e-12 && d2 > 0.75 * d1 {
            return Err(GeometryError::MeasureNotConverged { delta_coarse: d1, delta_fine: d2 });
        }
        let extrap = 2.0 * m[2] - m[1];
        Ok(Measure { value: extrap, error: (extrap - m[2]).abs() + d2 })
    }

    fn count_fraction(&self, bb: &[(f64, f64)], res: usize) -> f64 {
        let n = self.dimension;
        let total = res.pow(n as u32);
        let mut inside = 0usize;
        let mut x = vec![0.0; n];
        for idx in 0..total {
            let mut rem = idx;
            for k in 0..n {
                let i = rem % res;
                rem /= res;
                let (a, b) = bb[k];
                x[k] = a + (i as f64 + 0.5) * (b - a) / res as f64;
            }
            if self.contains(&x) {
                inside += 1;
            }
        }
        inside as f64 / total as f64
    }
}

fn boxes_disjoint(a: &[(f64, f64)], b: &[(f64, f64)]) -> bool {
    a.iter().zip(b).any(|(x, y)| x.1 < y.0 || y.1 < x.0)
}

/// Volume of the N-ball of the given radius, via V_N = (2 pi r^2 / N) V_{N-2}.
pub fn ball_volume(n: usize, radius: f64) -> f64 {
    let mut v = if n % 2 == 0 { 1.0 } else { 2.0 * radius };
    let mut k = if n % 2 == 0 { 0 } else { 1 };
    while k < n {
        k += 2;
        v *= 2.0 * PI * radius * radius / k as f64;
    }
    v
}

/// Image of a set under an invertible linear map: indicator composes with
/// the inverse, measure scales by |det A|.
pub fn apply_map(map: &LinearMap, set: &SupportSet) -> Result<SupportSet, GeometryError> {
    if map.dim() != set.dim() {
        return Err(GeometryError::DimensionMismatch {
            expected: set.dim(),
            got: map.dim(),
        });
    }
    let dimension = set.dim();
    Ok(SupportSet {
        kind: SetKind::AffineImage {
            map: map.clone(),
            inner: Box::new(set.clone()),
        },
        dimension,
    })
}

fn require_positive(name: &str, v: f64) -> Result<(), GeometryError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(GeometryError::InvalidParameter(format!(
            "{name} must be positive, got {v}"
        )))
    }
}

/// Support sets for the circular cut: the field on a circular boundary of
/// radius r, observed for time T over a single angular period, with the
/// wavenumber band growing linearly in frequency up to slope r.
///
/// P = [-T/2, T/2] x [-pi, pi] with m(P) = 2 pi T;
/// Q = {(omega, w): |omega| <= Omega, |w| <= r |omega|} with m(Q) = 2 r Omega^2.
pub fn build_circular_cut_sets(
    omega: f64,
    t: f64,
    r: f64,
) -> Result<(SupportSet, SupportSet), GeometryError> {
    require_positive("Omega", omega)?;
    require_positive("T", t)?;
    require_positive("r", r)?;
    let p = SupportSet::centered_box(&[t / 2.0, PI])?;
    let q = SupportSet::omega_sliced(OmegaSlicedSet::new(omega, vec![r])?);
    Ok((p, q))
}

/// Support sets for the spherical cut. The angular domain is parametrized
/// area-true as azimuth x cosine-polar, [-pi, pi] x [-1, 1], so the solid
/// angle is 4 pi and m(P) = 4 pi T. Q is the square cone with
/// m(Q) = (8/3) Omega^3 r^2.
pub fn build_spherical_cut_sets(
    omega: f64,
    t: f64,
    r: f64,
) -> Result<(SupportSet, SupportSet), GeometryError> {
    require_positive("Omega", omega)?;
    require_positive("T", t)?;
    require_positive("r", r)?;
    let p = SupportSet::product(vec![
        SupportSet::centered_box(&[t / 2.0])?,
        SupportSet::axis_box(vec![-PI, -1.0], vec![PI, 1.0])?,
    ])?;
    let q = SupportSet::omega_sliced(OmegaSlicedSet::new(omega, vec![r, r])?);
    Ok((p, q))
}

/// A 1-D two-sided band {omega: omega_1 <= |omega| <= omega_2} for a real
/// signal modulating a carrier at the band midpoint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModulatedBand {
    pub omega_lo: f64,
    pub omega_hi: f64,
}

impl ModulatedBand {
    pub fn measure(&self) -> f64 {
        2.0 * (self.omega_hi - self.omega_lo)
    }

    pub fn delta_omega(&self) -> f64 {
        self.omega_hi - self.omega_lo
    }

    /// Carrier frequency, the arithmetic midpoint of the band.
    pub fn carrier(&self) -> f64 {
        0.5 * (self.omega_lo + self.omega_hi)
    }

    pub fn to_support_set(&self) -> SupportSet {
        let neg = SupportSet::axis_box(vec![-self.omega_hi], vec![-self.omega_lo]).unwrap();
        let pos = SupportSet::axis_box(vec![self.omega_lo], vec![self.omega_hi]).unwrap();
        SupportSet::union(neg, pos).unwrap()
    }
}

pub fn build_modulated_band(omega_lo: f64, omega_hi: f64) -> Result<ModulatedBand, GeometryError> {
    require_positive("omega_1", omega_lo)?;
    if !(omega_hi > omega_lo) || !omega_hi.is_finite() {
        return Err(GeometryError::InvalidParameter(format!(
            "need omega_1 < omega_2, got [{omega_lo}, {omega_hi}]"
        )));
    }
    Ok(ModulatedBand { omega_lo, omega_hi })
}

/// A convex rotationally symmetric cut boundary: the surface of revolution
/// of a meridian curve zeta(r, z) about the z axis.
#[derive(Debug, Clone)]
pub struct RotationalDomain {
    /// Profile polyline in the (r, z) half-plane, r >= 0.
    profile: Vec<(f64, f64)>,
    /// Whether the profile touches the axis at both ends (the closed
    /// meridian is then the profile plus its mirror image).
    axis_touching: bool,
    meridian_length: f64,
    surface_area: f64,
}

impl RotationalDomain {
    /// Builds from a profile polyline in the (r, z) half-plane. The profile
    /// must either start and end on the axis (r = 0), or close on itself
    /// away from the axis.
    pub fn from_profile(points: Vec<(f64, f64)>) -> Result<Self, GeometryError> {
        if points.len() < 2 {
            return Err(GeometryError::InvalidParameter(
                "profile needs at least two points".into(),
            ));
        }
        for &(r, _) in &points {
            if r < 0.0 || !r.is_finite() {
                return Err(GeometryError::InvalidParameter(format!(
                    "profile radius must be nonnegative, got {r}"
                )));
            }
        }
        let first = points[0];
        let last = *points.last().unwrap();
        let scale = points
            .iter()
            .map(|&(r, z)| r.abs().max(z.abs()))
            .fold(0.0, f64::max)
            .max(1e-300);
        let closed_loop = (first.0 - last.0).abs() < 1e-12 && (first.1 - last.1).abs() < 1e-12;
        let axis_touching = first.0 <= 1e-12 * scale && last.0 <= 1e-12 * scale;
        if !closed_loop && !axis_touching {
            return Err(GeometryError::InvalidParameter(
                "profile must start and end on the axis, or close on itself".into(),
            ));
        }
        if points.len() <= 2048 {
            check_no_self_intersection(&points)?;
        }
        let mut length = 0.0;
        let mut area = 0.0;
        for w in points.windows(2) {
            let (r0, z0) = w[0];
            let (r1, z1) = w[1];
            let seg = ((r1 - r0).powi(2) + (z1 - z0).powi(2)).sqrt();
            length += seg;
            // exact lateral area of the frustum swept by the segment
            area += PI * (r0 + r1) * seg;
        }
        let meridian_length = if axis_touching { 2.0 * length } else { length };
        Ok(RotationalDomain {
            profile: points,
            axis_touching,
            meridian_length,
            surface_area: area,
        })
    }

    /// Sphere of the given radius: semicircular profile from pole to pole.
    pub fn sphere(radius: f64) -> Result<Self, GeometryError> {
        require_positive("radius", radius)?;
        let n = 8192;
        let pts = (0..=n)
            .map(|i| {
                let theta = PI * i as f64 / n as f64;
                (radius * theta.sin(), radius * theta.cos())
            })
            .collect();
        Self::from_profile(pts)
    }

    /// Capped cylinder: two flat caps of radius r and a side of height h.
    pub fn cylinder(radius: f64, height: f64) -> Result<Self, GeometryError> {
        require_positive("radius", radius)?;
        require_positive("height", height)?;
        Self::from_profile(vec![
            (0.0, 0.0),
            (radius, 0.0),
            (radius, height),
            (0.0, height),
        ])
    }

    /// Degenerate domain collapsed onto the axis: zero area.
    pub fn degenerate(height: f64) -> Result<Self, GeometryError> {
        require_positive("height", height)?;
        Self::from_profile(vec![(0.0, 0.0), (0.0, height)])
    }

    pub fn meridian_length(&self) -> f64 {
        self.meridian_length
    }

    pub fn surface_area(&self) -> f64 {
        self.surface_area
    }

    pub fn profile(&self) -> &[(f64, f64)] {
        &self.profile
    }

    pub fn is_axis_touching(&self) -> bool {
        self.axis_touching
    }

    /// Largest profile radius at height z, by linear interpolation along
    /// the segments crossing that height. None if z is outside the profile.
    pub fn radius_at(&self, z: f64) -> Option<f64> {
        let mut best: Option<f64> = None;
        for w in self.profile.windows(2) {
            let (r0, z0) = w[0];
            let (r1, z1) = w[1];
            let (zlo, zhi) = if z0 <= z1 { (z0, z1) } else { (z1, z0) };
            if z < zlo || z > zhi {
                continue;
            }
            let r = if (z1 - z0).abs() < 1e-300 {
                r0.max(r1)
            } else {
                r0 + (r1 - r0) * (z - z0) / (z1 - z0)
            };
            best = Some(best.map_or(r, |b: f64| b.max(r)));
        }
        best
    }
}

fn check_no_self_intersection(points: &[(f64, f64)]) -> Result<(), GeometryError> {
    let segs: Vec<_> = points.windows(2).collect();
    for i in 0..segs.len() {
        for j in i + 2..segs.len() {
            // skip the closing adjacency of a loop
            if i == 0 && j == segs.len() - 1 && points[0] == *points.last().unwrap() {
                continue;
            }
            if segments_cross(segs[i][0], segs[i][1], segs[j][0], segs[j][1]) {
                return Err(GeometryError::SelfIntersectingMeridian { segment: i });
            }
        }
    }
    Ok(())
}

fn segments_cross(a: (f64, f64), b: (f64, f64), c: (f64, f64), d: (f64, f64)) -> bool {
    let orient = |p: (f64, f64), q: (f64, f64), r: (f64, f64)| {
        (q.0 - p.0) * (r.1 - p.1) - (q.1 - p.1) * (r.0 - p.0)
    };
    let d1 = orient(a, b, c);
    let d2 = orient(a, b, d);
    let d3 = orient(c, d, a);
    let d4 = orient(c, d, b);
    d1 * d2 < 0.0 && d3 * d4 < 0.0
}

/// Trace of the minimum singular value of B^T A along a sweep of scalings,
/// and whether it diverges (so the image of the unit ball exhausts R^N).
#[derive(Debug, Clone)]
pub struct ConditionTrace {
    pub min_singular_values: Vec<f64>,
    pub diverges: bool,
}

/// Checks the hypothesis of the general-scaling eigenvalue count theorem:
/// along the sweep, sigma_min(B^T A) must grow without bound. At desk scale
/// this is rendered as: the trace is nondecreasing and at least doubles
/// from the first sweep point to the last.
pub fn check_general_scaling_condition(
    a_sweep: &[LinearMap],
    b_sweep: &[LinearMap],
) -> Result<ConditionTrace, GeometryError> {
    if a_sweep.len() != b_sweep.len() || a_sweep.is_empty() {
        return Err(GeometryError::InvalidParameter(
            "sweeps must be nonempty and of equal length".into(),
        ));
    }
    let mut trace = Vec::with_capacity(a_sweep.len());
    for (a, b) in a_sweep.iter().zip(b_sweep) {
        let prod = LinearMap::transpose_product(b, a)?;
        trace.push(prod.min_singular_value());
    }
    let nondecreasing = trace.windows(2).all(|w| w[1] >= w[0] - 1e-12 * w[0].abs());
    let grows = trace.last().unwrap() >= &(2.0 * trace[0]);
    Ok(ConditionTrace {
        diverges: nondecreasing && grows,
        min_singular_values: trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::dmatrix;

    #[test]
    fn unit_square_measure_is_exact() {
        let sq = SupportSet::axis_box(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
        let m = sq.measure().unwrap();
        assert_eq!(m.value, 1.0);
        assert_eq!(m.error, 0.0);
    }

    #[test]
    fn circular_cut_measure_matches_slice_integral_oracle() {
        // oracle: int_{-Omega}^{Omega} 2 r |w| dw = 2 r Omega^2
        let q = OmegaSlicedSet::new(2.0, vec![1.0]).unwrap();
        assert_relative_eq!(q.measure(), 8.0, max_relative = 1e-15);
        assert_relative_eq!(q.measure(), q.measure_by_slices(32), max_relative = 1e-6);
    }

    #[test]
    fn spherical_cut_measure_is_eight_thirds() {
        let q = OmegaSlicedSet::new(1.0, vec![1.0, 1.0]).unwrap();
        assert_relative_eq!(q.measure(), 8.0 / 3.0, max_relative = 1e-15);
        assert_relative_eq!(q.measure(), q.measure_by_slices(32), max_relative = 1e-6);
    }

    #[test]
    fn apply_map_identity_preserves_set() {
        let sq = SupportSet::axis_box(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
        let img = apply_map(&LinearMap::identity(2), &sq).unwrap();
        assert_eq!(img.measure().unwrap().value, sq.measure().unwrap().value);
        assert!(img.contains(&[0.5, 0.5]));
        assert!(!img.contains(&[1.5, 0.5]));
    }

    #[test]
    fn apply_map_scales_measure_by_determinant() {
        let sq = SupportSet::axis_box(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
        let a = LinearMap::diagonal(&[3.0, 1.0]).unwrap();
        let img = apply_map(&a, &sq).unwrap();
        assert_relative_eq!(img.measure().unwrap().value, 3.0, max_relative = 1e-15);

        let disk = SupportSet::ball(vec![0.0, 0.0], 1.0).unwrap();
        let b = LinearMap::diagonal(&[2.0, 2.0]).unwrap();
        let img = apply_map(&b, &disk).unwrap();
        // oracle |det B| m(P) = 4 pi
        assert_relative_eq!(img.measure().unwrap().value, 4.0 * PI, max_relative = 1e-15);
    }

    #[test]
    fn singular_map_is_rejected() {
        assert!(LinearMap::new(dmatrix![1.0, 2.0; 2.0, 4.0]).is_err());
        assert!(LinearMap::diagonal(&[1.0, 0.0]).is_err());
    }

    #[test]
    fn circular_cut_sets_have_expected_measures() {
        let (p, q) = build_circular_cut_sets(1.0, 1.0, 1.0).unwrap();
        assert_relative_eq!(p.measure().unwrap().value, 2.0 * PI, max_relative = 1e-15);
        assert_relative_eq!(q.measure().unwrap().value, 2.0, max_relative = 1e-15);

        // (2 pi)^-2 m(P) m(Q) = T r Omega^2 / pi
        let (p, q) = build_circular_cut_sets(2.0, 3.0, 1.0).unwrap();
        let lead = p.measure().unwrap().value * q.measure().unwrap().value / (2.0 * PI).powi(2);
        assert_relative_eq!(lead, 12.0 / PI, max_relative = 1e-14);

        let (_, q) = build_circular_cut_sets(1e-9, 1.0, 1.0).unwrap();
        assert!(q.measure().unwrap().value < 1e-17);
        assert!(build_circular_cut_sets(0.0, 1.0, 1.0).is_err());
        assert!(build_circular_cut_sets(1.0, -1.0, 1.0).is_err());
    }

    #[test]
    fn spherical_cut_sets_have_expected_measures() {
        let (p, q) = build_spherical_cut_sets(1.0, 1.0, 1.0).unwrap();
        assert_relative_eq!(p.measure().unwrap().value, 4.0 * PI, max_relative = 1e-15);
        assert_relative_eq!(q.measure().unwrap().value, 8.0 / 3.0, max_relative = 1e-15);

        // (2 pi)^-3 * 4 pi T * (8/3) Omega^3 r^2 = 4 pi r^2 Omega^3 T / (3 pi^3)
        let (omega, t, r) = (2.0, 3.0, 1.5);
        let (p, q) = build_spherical_cut_sets(omega, t, r).unwrap();
        let lead = p.measure().unwrap().value * q.measure().unwrap().value / (2.0 * PI).powi(3);
        let expect = 4.0 * PI * r * r * omega.powi(3) * t / (3.0 * PI.powi(3));
        assert_relative_eq!(lead, expect, max_relative = 1e-14);
    }

    #[test]
    fn modulated_band_midpoint_and_identities() {
        let band = build_modulated_band(9.5, 10.5).unwrap();
        assert_eq!(band.delta_omega(), 1.0);
        assert_eq!(band.carrier(), 10.0);
        assert_eq!(band.measure(), 2.0);
        assert!(build_modulated_band(10.5, 9.5).is_err());
        assert!(build_modulated_band(10.0, 10.0).is_err());

        // (w2^2 - w1^2)/2 = w_c * dw and (w2^3 - w1^3)/3 = w_c^2 dw (1 + delta)
        let (w1, w2) = (band.omega_lo, band.omega_hi);
        let wc = band.carrier();
        let dw = band.delta_omega();
        assert_relative_eq!((w2 * w2 - w1 * w1) / 2.0, wc * dw, max_relative = 1e-15);
        let delta = (dw / wc).powi(2) / 12.0;
        assert_relative_eq!(
            (w2.powi(3) - w1.powi(3)) / 3.0,
            wc * wc * dw * (1.0 + delta),
            max_relative = 1e-15
        );
    }

    #[test]
    fn modulated_band_union_measure_is_additive() {
        let band = build_modulated_band(9.5, 10.5).unwrap();
        let set = band.to_support_set();
        let m = set.measure().unwrap();
        assert_relative_eq!(m.value, 2.0, epsilon = m.error.max(1e-12));
    }

    #[test]
    fn sphere_surface_area_is_4_pi_r_squared() {
        let dome = RotationalDomain::sphere(1.0).unwrap();
        assert_relative_eq!(dome.surface_area(), 4.0 * PI, max_relative = 1e-7);
        assert_relative_eq!(dome.meridian_length(), 2.0 * PI, max_relative = 1e-7);
        let dome = RotationalDomain::sphere(2.5).unwrap();
        assert_relative_eq!(dome.surface_area(), 4.0 * PI * 2.5 * 2.5, max_relative = 1e-7);
    }

    #[test]
    fn cylinder_surface_area_includes_caps() {
        let (r, h) = (1.5, 4.0);
        let cyl = RotationalDomain::cylinder(r, h).unwrap();
        assert_relative_eq!(
            cyl.surface_area(),
            2.0 * PI * r * h + 2.0 * PI * r * r,
            max_relative = 1e-14
        );
        assert_eq!(cyl.radius_at(2.0), Some(r));
    }

    #[test]
    fn degenerate_profile_has_zero_area() {
        let line = RotationalDomain::degenerate(3.0).unwrap();
        assert_eq!(line.surface_area(), 0.0);
    }

    #[test]
    fn self_intersecting_profile_is_rejected() {
        let res = RotationalDomain::from_profile(vec![
            (0.0, 0.0),
            (2.0, 2.0),
            (2.0, 0.0),
            (0.0, 2.0),
        ]);
        assert!(matches!(res, Err(GeometryError::SelfIntersectingMeridian { .. })));
    }

    #[test]
    fn general_scaling_condition_diagonal_sweeps() {
        // A = diag(tau, 1), B = diag(1, rho): sigma_min = min(tau, rho), diverges
        let taus = [1.0, 4.0, 16.0, 64.0];
        let a: Vec<_> = taus.iter().map(|&t| LinearMap::diagonal(&[t, 1.0]).unwrap()).collect();
        let b: Vec<_> = taus.iter().map(|&t| LinearMap::diagonal(&[1.0, t]).unwrap()).collect();
        let out = check_general_scaling_condition(&a, &b).unwrap();
        assert!(out.diverges);
        for (sv, tau) in out.min_singular_values.iter().zip(&taus) {
            assert_relative_eq!(*sv, *tau, max_relative = 1e-12);
        }

        // B = identity: sigma_min stuck at 1, does not diverge
        let id: Vec<_> = taus.iter().map(|_| LinearMap::identity(2)).collect();
        let out = check_general_scaling_condition(&a, &id).unwrap();
        assert!(!out.diverges);

        // Landau case A = beta I, B = I
        let a: Vec<_> = taus.iter().map(|&t| LinearMap::scalar(2, t).unwrap()).collect();
        let out = check_general_scaling_condition(&a, &id).unwrap();
        assert!(out.diverges);
    }

    #[test]
    fn ball_volume_known_values() {
        assert_relative_eq!(ball_volume(1, 2.0), 4.0, max_relative = 1e-15);
        assert_relative_eq!(ball_volume(2, 1.0), PI, max_relative = 1e-15);
        assert_relative_eq!(ball_volume(3, 1.0), 4.0 * PI / 3.0, max_relative = 1e-15);
    }

    #[test]
    fn grid_counting_intersection_of_overlapping_boxes() {
        let a = SupportSet::axis_box(vec![0.0, 0.0], vec![2.0, 2.0]).unwrap();
        let b = SupportSet::axis_box(vec![1.0, 1.0], vec![3.0, 3.0]).unwrap();
        let m = SupportSet::intersection(a, b).unwrap().measure().unwrap();
        assert_relative_eq!(m.value, 1.0, epsilon = m.error.max(1e-9));
    }

    #[test]
    fn disjoint_union_measure_is_additive() {
        let a = SupportSet::axis_box(vec![0.0], vec![1.0]).unwrap();
        let b = SupportSet::axis_box(vec![5.0], vec![7.0]).unwrap();
        let m = SupportSet::union(a, b).unwrap().measure().unwrap();
        assert_eq!(m.value, 3.0);
        assert_eq!(m.error, 0.0);
    }

    #[test]
    fn omega_sliced_symmetry_of_slices() {
        let q = OmegaSlicedSet::new(2.0, vec![0.7]).unwrap();
        for w in [0.3, 1.1, 1.9] {
            assert_eq!(q.slice_measure(w), q.slice_measure(-w));
            assert!(q.contains(&[w, 0.5 * 0.7 * w]) == q.contains(&[-w, 0.5 * 0.7 * w]));
        }
    }
}
