//! Discretization of the time/band-limiting concentration operator.
//!
//! The composite operator (timelimit to AP) o (bandlimit to BQ) o
//! (timelimit to AP) is discretized by a symmetrized Nystrom rule on a
//! uniform grid over the bounding box of AP with midpoint weights. Since
//! all interior cells share the same weight w = prod(spacing), the matrix
//! entries reduce to w * h(x_i - x_j) over the grid points inside AP,
//! which is symmetric by construction.

use crate::geometry::{apply_map, GeometryError, LinearMap, OmegaSlicedSet, SupportSet};
use crate::quad::GaussLegendre;
use nalgebra::DMatrix;
use rayon::prelude::*;
use std::f64::consts::PI;
use std::io::{self, Read, Write};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum OperatorError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("unsupported spectral support for kernel construction: {0}")]
    UnsupportedSet(String),
    #[error("kernel quadrature did not converge at {nodes} nodes per slice axis")]
    QuadratureNotConverged { nodes: usize },
    #[error("grid spacing {spacing:.6} on axis {axis} violates the Nyquist bound {bound:.6} (conjugate extent {extent:.6})")]
    NyquistViolated {
        axis: usize,
        spacing: f64,
        bound: f64,
        extent: f64,
    },
    #[error("Nyquist fraction {fraction} must lie in (0, 1]")]
    InvalidResolution { fraction: f64 },
    #[error("vector length {got} does not match grid size {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("operator has {points} active points, above the dense cap {cap}; use the matrix-free path")]
    DenseCapExceeded { points: usize, cap: usize },
    #[error("operator was assembled matrix-free; no dense matrix available")]
    NotAssembled,
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("bad dump header: {0}")]
    BadDump(String),
}

#[derive(Debug, Clone)]
enum KernelForm {
    /// BQ is an origin-centered box with the given half-widths:
    /// h(u) = prod_k sin(W_k u_k) / (pi u_k).
    Sinc { half_widths: Vec<f64> },
    /// Q is an origin-centered box and B a general invertible map:
    /// h_B(u) = |det B| h(B^T u) with h the box kernel of Q.
    SincMapped {
        q_half_widths: Vec<f64>,
        map: LinearMap,
    },
    /// BQ is an omega-sliced cone; the slice integral is closed-form and
    /// the remaining 1-D frequency integral uses Gauss-Legendre.
    Sliced { set: OmegaSlicedSet, nodes: usize },
}

/// The convolution kernel h with F h = indicator of BQ.
#[derive(Debug, Clone)]
pub struct Kernel {
    form: KernelForm,
    dim: usize,
    origin_value: f64,
    conjugate_extent: Vec<f64>,
}

fn sinc_factor(half_width: f64, u: f64) -> f64 {
    if u.abs() < 1e-9 {
        // removable singularity: sin(Wu)/(pi u) -> W/pi, with the quadratic
        // correction keeping the branch switch smooth
        half_width / PI * (1.0 - (half_width * u).powi(2) / 6.0)
    } else {
        (half_width * u).sin() / (PI * u)
    }
}

/// Closed-form slice factor int_{-a}^{a} e^{i u v} dv = 2 sin(u a) / u.
fn slab_factor(half_width: f64, u: f64) -> f64 {
    if u.abs() < 1e-9 {
        2.0 * half_width * (1.0 - (half_width * u).powi(2) / 6.0)
    } else {
        2.0 * (half_width * u).sin() / u
    }
}

impl Kernel {
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// h(0) = (2 pi)^-N m(BQ).
    pub fn origin_value(&self) -> f64 {
        self.origin_value
    }

    /// Max absolute extent of BQ along each conjugate axis, used for the
    /// Nyquist bound on the grid spacing.
    pub fn conjugate_extent(&self) -> &[f64] {
        &self.conjugate_extent
    }

    pub fn eval(&self, u: &[f64]) -> f64 {
        debug_assert_eq!(u.len(), self.dim);
        match &self.form {
            KernelForm::Sinc { half_widths } => half_widths
                .iter()
                .zip(u)
                .map(|(w, ui)| sinc_factor(*w, *ui))
                .product(),
            KernelForm::SincMapped { q_half_widths, map } => {
                let v = map.apply_transpose(u);
                let base: f64 = q_half_widths
                    .iter()
                    .zip(&v)
                    .map(|(w, vi)| sinc_factor(*w, *vi))
                    .product();
                map.determinant().abs() * base
            }
            KernelForm::Sliced { set, nodes } => eval_sliced(set, *nodes, u),
        }
    }

    /// Returns a copy whose slice quadrature has converged at 10 probe
    /// offsets spanning the given per-axis extents: node count doubles from
    /// the current setting until the probed values change by less than 1e-8.
    pub fn converged_for(&self, offset_extent: &[f64]) -> Result<Kernel, OperatorError> {
        let KernelForm::Sliced { set, nodes } = &self.form else {
            return Ok(self.clone());
        };
        let probes: Vec<Vec<f64>> = (1..=10)
            .map(|i| {
                let frac = i as f64 / 10.0;
                offset_extent.iter().map(|e| frac * e).collect()
            })
            .collect();
        let mut nodes = *nodes;
        let mut prev: Vec<f64> = probes.iter().map(|p| eval_sliced(set, nodes, p)).collect();
        loop {
            let next_nodes = nodes * 2;
            if next_nodes > 1 << 16 {
                return Err(OperatorError::QuadratureNotConverged { nodes });
            }
            let next: Vec<f64> = probes
                .iter()
                .map(|p| eval_sliced(set, next_nodes, p))
                .collect();
            let delta = prev
                .iter()
                .zip(&next)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            if delta < 1e-8 {
                return Ok(Kernel {
                    form: KernelForm::Sliced {
                        set: set.clone(),
                        nodes,
                    },
                    ..self.clone()
                });
            }
            nodes = next_nodes;
            prev = next;
        }
    }
}

fn eval_sliced(set: &OmegaSlicedSet, nodes: usize, u: &[f64]) -> f64 {
    let n = set.dim();
    let rule = GaussLegendre::new(nodes);
    let scale = (2.0 * PI).powi(-(n as i32));
    let integral = rule.integrate(0.0, set.omega_max, |w| {
        let mut f = (u[0] * w).cos();
        for (k, s) in set.slopes.iter().enumerate() {
            f *= slab_factor(s * w, u[k + 1]);
        }
        f
    });
    2.0 * scale * integral
}

/// Builds the kernel of the bandlimiting projection onto BQ.
pub fn build_kernel(q: &SupportSet, b: &LinearMap) -> Result<Kernel, OperatorError> {
    if b.dim() != q.dim() {
        return Err(GeometryError::DimensionMismatch {
            expected: q.dim(),
            got: b.dim(),
        }
        .into());
    }
    let bq = apply_map(b, q)?;
    let dim = q.dim();
    let measure = bq.measure()?.value;
    let origin_value = (2.0 * PI).powi(-(dim as i32)) * measure;
    let conjugate_extent: Vec<f64> = bq
        .bounding_box()
        .iter()
        .map(|(lo, hi)| lo.abs().max(hi.abs()))
        .collect();
    let form = if let Some(half_widths) = bq.as_centered_box() {
        KernelForm::Sinc { half_widths }
    } else if let Some(q_half_widths) = q.as_centered_box() {
        KernelForm::SincMapped {
            q_half_widths,
            map: b.clone(),
        }
    } else if let Some(set) = bq.as_omega_sliced() {
        KernelForm::Sliced { set, nodes: 32 }
    } else {
        return Err(OperatorError::UnsupportedSet(format!(
            "{:?} under the given map is neither a centered box nor an omega-sliced cone",
            q.tag()
        )));
    };
    Ok(Kernel {
        form,
        dim,
        origin_value,
        conjugate_extent,
    })
}

/// Grid resolution request for operator assembly.
#[derive(Debug, Clone)]
pub enum Resolution {
    /// Explicit number of points per axis.
    PointsPerAxis(Vec<usize>),
    /// Target spacing; the per-axis count is ceil(extent / spacing).
    Spacing(f64),
    /// Per-axis spacing as a fraction of that axis's Nyquist bound
    /// pi / (2 U_k); 0.5 gives 2x oversampling beyond the bound.
    NyquistFraction(f64),
}

#[derive(Debug, Clone)]
pub struct AssembleOptions {
    /// Largest active-point count for which a dense matrix is stored.
    pub dense_cap: usize,
    /// When false, the Nyquist spacing precondition is not enforced
    /// (used by the negative controls of the verification suite).
    pub enforce_nyquist: bool,
}

impl Default for AssembleOptions {
    fn default() -> Self {
        AssembleOptions {
            dense_cap: 4096,
            enforce_nyquist: true,
        }
    }
}

/// Uniform cell-centered grid over a bounding box.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub lo: Vec<f64>,
    pub spacing: Vec<f64>,
    pub shape: Vec<usize>,
}

impl Grid {
    pub fn dim(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn point(&self, multi: &[usize]) -> Vec<f64> {
        multi
            .iter()
            .zip(self.lo.iter().zip(&self.spacing))
            .map(|(i, (lo, d))| lo + (*i as f64 + 0.5) * d)
            .collect()
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing.iter().product()
    }

    fn multi_index(&self, mut flat: usize) -> Vec<usize> {
        let mut out = vec![0; self.dim()];
        for k in 0..self.dim() {
            out[k] = flat % self.shape[k];
            flat /= self.shape[k];
        }
        out
    }
}

/// The symmetrized Nystrom discretization of the concentration operator.
#[derive(Debug, Clone)]
pub struct ConcentrationOperator {
    grid: Grid,
    /// Multi-indices of grid points whose cell center lies inside AP.
    active: Vec<Vec<usize>>,
    weight: f64,
    kernel: Kernel,
    /// Kernel sampled over the integer offset lattice, sized
    /// prod(2 shape_k - 1); entry for offset d is at d + (shape - 1).
    kernel_table: Vec<f64>,
    dense: Option<DMatrix<f64>>,
}

impl ConcentrationOperator {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn len(&self) -> usize {
        self.active.len()
    }

    pub fn is_empty(&self) -> bool {
        self.active.is_empty()
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    pub fn weight(&self) -> f64 {
        self.weight
    }

    pub fn dense(&self) -> Result<&DMatrix<f64>, OperatorError> {
        self.dense.as_ref().ok_or(OperatorError::NotAssembled)
    }

    pub fn is_dense(&self) -> bool {
        self.dense.is_some()
    }

    /// Sum of eigenvalues: w * n_active * h(0).
    pub fn trace(&self) -> f64 {
        self.weight * self.active.len() as f64 * self.kernel.origin_value()
    }

    /// Sum of squared eigenvalues, the squared Frobenius norm
    /// sum_ij w^2 h(x_i - x_j)^2, evaluated from the offset table.
    pub fn hs_norm_squared(&self) -> f64 {
        let w2 = self.weight * self.weight;
        self.active
            .par_iter()
            .map(|mi| {
                let mut row = 0.0;
                for mj in &self.active {
                    let h = self.kernel_table[self.table_index(mi, mj)];
                    row += h * h;
                }
                row
            })
            .sum::<f64>()
            * w2
    }

    fn table_index(&self, mi: &[usize], mj: &[usize]) -> usize {
        let mut idx = 0;
        let mut stride = 1;
        for k in 0..self.grid.dim() {
            let d = mi[k] + self.grid.shape[k] - 1 - mj[k];
            idx += d * stride;
            stride *= 2 * self.grid.shape[k] - 1;
        }
        idx
    }

    /// Applies the operator to a vector over the active points. Identical
    /// to the dense matrix-vector product when both paths exist, since both
    /// read the same kernel table.
    pub fn apply(&self, f: &[f64]) -> Result<Vec<f64>, OperatorError> {
        if f.len() != self.active.len() {
            return Err(OperatorError::LengthMismatch {
                expected: self.active.len(),
                got: f.len(),
            });
        }
        let out: Vec<f64> = self
            .active
            .par_iter()
            .map(|mi| {
                let mut acc = 0.0;
                for (mj, fj) in self.active.iter().zip(f) {
                    acc += self.kernel_table[self.table_index(mi, mj)] * fj;
                }
                self.weight * acc
            })
            .collect();
        Ok(out)
    }

    /// Writes the dense matrix with a small header for cross-implementation
    /// diffing: magic, version, N, grid dims, spacings, active count, then
    /// the matrix row-major as little-endian f64.
    pub fn dump<W: Write>(&self, mut w: W) -> Result<(), OperatorError> {
        let m = self.dense()?;
        w.write_all(b"DOFK")?;
        w.write_all(&1u32.to_le_bytes())?;
        w.write_all(&(self.grid.dim() as u32).to_le_bytes())?;
        for s in &self.grid.shape {
            w.write_all(&(*s as u32).to_le_bytes())?;
        }
        for d in &self.grid.spacing {
            w.write_all(&d.to_le_bytes())?;
        }
        w.write_all(&(self.active.len() as u64).to_le_bytes())?;
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                w.write_all(&m[(i, j)].to_le_bytes())?;
            }
        }
        Ok(())
    }
}

/// Header and payload of a dumped operator matrix.
#[derive(Debug, Clone)]
pub struct MatrixDump {
    pub dim: usize,
    pub shape: Vec<usize>,
    pub spacing: Vec<f64>,
    pub matrix: DMatrix<f64>,
}

pub fn read_dump<R: Read>(mut r: R) -> Result<MatrixDump, OperatorError> {
    let mut buf4 = [0u8; 4];
    let mut buf8 = [0u8; 8];
    r.read_exact(&mut buf4)?;
    if &buf4 != b"DOFK" {
        return Err(OperatorError::BadDump("bad magic".into()));
    }
    r.read_exact(&mut buf4)?;
    if u32::from_le_bytes(buf4) != 1 {
        return Err(OperatorError::BadDump("unsupported version".into()));
    }
    r.read_exact(&mut buf4)?;
    let dim = u32::from_le_bytes(buf4) as usize;
    let mut shape = Vec::with_capacity(dim);
    for _ in 0..dim {
        r.read_exact(&mut buf4)?;
        shape.push(u32::from_le_bytes(buf4) as usize);
    }
    let mut spacing = Vec::with_capacity(dim);
    for _ in 0..dim {
        r.read_exact(&mut buf8)?;
        spacing.push(f64::from_le_bytes(buf8));
    }
    r.read_exact(&mut buf8)?;
    let n = u64::from_le_bytes(buf8) as usize;
    let mut data = Vec::with_capacity(n * n);
    for _ in 0..n * n {
        r.read_exact(&mut buf8)?;
        data.push(f64::from_le_bytes(buf8));
    }
    Ok(MatrixDump {
        dim,
        shape,
        spacing,
        matrix: DMatrix::from_row_slice(n, n, &data),
    })
}

/// Assembles the discrete operator for timelimiting set AP (P under the
/// map A) and the given bandlimiting kernel.
pub fn assemble(
    p: &SupportSet,
    a: &LinearMap,
    kernel: &Kernel,
    resolution: &Resolution,
    options: &AssembleOptions,
) -> Result<ConcentrationOperator, OperatorError> {
    if a.dim() != p.dim() || kernel.dim() != p.dim() {
        return Err(GeometryError::DimensionMismatch {
            expected: p.dim(),
            got: a.dim(),
        }
        .into());
    }
    let ap = apply_map(a, p)?;
    let bb = ap.bounding_box();
    let n = p.dim();
    let shape: Vec<usize> = match resolution {
        Resolution::PointsPerAxis(pts) => {
            if pts.len() != n {
                return Err(GeometryError::DimensionMismatch {
                    expected: n,
                    got: pts.len(),
                }
                .into());
            }
            pts.clone()
        }
        Resolution::Spacing(target) => bb
            .iter()
            .map(|(lo, hi)| (((hi - lo) / target).ceil() as usize).max(1))
            .collect(),
        Resolution::NyquistFraction(f) => {
            if !(*f > 0.0 && *f <= 1.0) {
                return Err(OperatorError::InvalidResolution { fraction: *f });
            }
            bb.iter()
                .zip(kernel.conjugate_extent())
                .map(|((lo, hi), ext)| {
                    if *ext > 0.0 {
                        let target = f * PI / (2.0 * ext);
                        (((hi - lo) / target).ceil() as usize).max(1)
                    } else {
                        1
                    }
                })
                .collect()
        }
    };
    let lo: Vec<f64> = bb.iter().map(|(a, _)| *a).collect();
    let spacing: Vec<f64> = bb
        .iter()
        .zip(&shape)
        .map(|((a, b), s)| (b - a) / *s as f64)
        .collect();
    if options.enforce_nyquist {
        for (axis, (d, ext)) in spacing.iter().zip(kernel.conjugate_extent()).enumerate() {
            if *ext > 0.0 {
                let bound = PI / (2.0 * ext);
                if *d > bound * (1.0 + 1e-12) {
                    return Err(OperatorError::NyquistViolated {
                        axis,
                        spacing: *d,
                        bound,
                        extent: *ext,
                    });
                }
            }
        }
    }
    let grid = Grid { lo, spacing, shape };

    let active: Vec<Vec<usize>> = (0..grid.len())
        .map(|flat| grid.multi_index(flat))
        .filter(|mi| ap.contains(&grid.point(mi)))
        .collect();

    // the slice-quadrature kernel must have converged over the full range
    // of grid offsets before any entries are taken from it
    let max_offset: Vec<f64> = grid
        .shape
        .iter()
        .zip(&grid.spacing)
        .map(|(s, d)| (*s as f64 - 1.0) * d)
        .collect();
    let kernel = kernel.converged_for(&max_offset)?;

    // kernel over the offset lattice; h(-u) = h(u) lets the negative half
    // mirror the positive half
    let table_shape: Vec<usize> = grid.shape.iter().map(|s| 2 * s - 1).collect();
    let table_len: usize = table_shape.iter().product();
    let kernel_table: Vec<f64> = (0..table_len)
        .into_par_iter()
        .map(|flat| {
            let mut rem = flat;
            let mut u = vec![0.0; n];
            let mut first_nonzero = 0i64;
            for k in 0..n {
                let d = (rem % table_shape[k]) as i64 - (grid.shape[k] as i64 - 1);
                rem /= table_shape[k];
                if first_nonzero == 0 {
                    first_nonzero = d;
                }
                u[k] = d as f64 * grid.spacing[k];
            }
            if first_nonzero < 0 {
                // filled by the mirrored entry below
                f64::NAN
            } else {
                kernel.eval(&u)
            }
        })
        .collect();
    let kernel_table = mirror_table(kernel_table, &table_shape);

    let weight = grid.cell_volume();
    let mut op = ConcentrationOperator {
        grid,
        active,
        weight,
        kernel,
        kernel_table,
        dense: None,
    };
    if op.active.len() <= options.dense_cap {
        let n_act = op.active.len();
        let mut m = DMatrix::zeros(n_act, n_act);
        for i in 0..n_act {
            for j in i..n_act {
                let v = weight * op.kernel_table[op.table_index(&op.active[i], &op.active[j])];
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        op.dense = Some(m);
    }
    Ok(op)
}

fn mirror_table(mut table: Vec<f64>, table_shape: &[usize]) -> Vec<f64> {
    let len = table.len();
    for flat in 0..len {
        if table[flat].is_nan() {
            // index of the negated offset
            let mut rem = flat;
            let mut neg = 0;
            let mut stride = 1;
            for s in table_shape {
                let i = rem % s;
                rem /= s;
                neg += (s - 1 - i) * stride;
                stride *= s;
            }
            table[flat] = table[neg];
        }
    }
    table
}
