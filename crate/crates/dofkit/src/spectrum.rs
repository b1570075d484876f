//! Eigenvalue spectra of concentration operators, the phase transition,
//! and the trace identities that force eigenvalues toward 0 and 1.

use crate::geometry::{GeometryError, LinearMap, SupportSet};
use crate::operator::{assemble, build_kernel, AssembleOptions, ConcentrationOperator, OperatorError, Resolution};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SpectralError {
    #[error(transparent)]
    Operator(#[from] OperatorError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("eigenvalue {value:.6e} outside [{lo:.1e}, {hi}] at the current resolution; grid is under-resolved")]
    SpectralRangeViolated { value: f64, lo: f64, hi: f64 },
    #[error("Krylov iteration did not converge after {iterations} iterations (max residual {residual:.3e})")]
    KrylovNotConverged { iterations: usize, residual: f64 },
    #[error("level must lie in (0, 1), got {0}")]
    LevelOutOfRange(f64),
    #[error("invalid level interval: lo {lo} must be below hi {hi}")]
    BadLevelInterval { lo: f64, hi: f64 },
}

/// Tolerance outside [0, 1] tolerated before flagging under-resolution.
pub const RANGE_TOL: f64 = 1e-6;

/// How many eigenvalues to compute.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EigenCount {
    All,
    Top(usize),
}

/// A non-increasing eigenvalue list in [0, 1] with grid and scaling metadata.
#[derive(Debug, Clone, Serialize)]
pub struct Spectrum {
    pub eigenvalues: Vec<f64>,
    pub grid_shape: Vec<usize>,
    pub grid_spacing: Vec<f64>,
    pub active_points: usize,
    /// Human-readable description of the scaling (beta, (tau, rho), ...).
    pub scaling: String,
    /// Sum of all eigenvalues of the discrete operator (exact trace,
    /// independent of how many eigenvalues were requested).
    pub trace: f64,
    /// Sum of squared eigenvalues (squared Frobenius norm).
    pub trace_squared: f64,
}

/// Computes the spectrum of an operator: dense symmetric eigendecomposition
/// when a dense matrix was assembled, Krylov iteration with full
/// reorthogonalization otherwise. Eigenvalues are checked against the
/// admissible range, then clamped to [0, 1] and sorted non-increasing.
pub fn eigenvalues(
    op: &ConcentrationOperator,
    count: EigenCount,
) -> Result<Spectrum, SpectralError> {
    let raw = if op.is_dense() {
        let mut vals: Vec<f64> = op
            .dense()?
            .clone()
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .copied()
            .collect();
        vals.sort_by(|a, b| b.partial_cmp(a).unwrap());
        if let EigenCount::Top(k) = count {
            vals.truncate(k);
        }
        vals
    } else {
        let k = match count {
            EigenCount::All => op.len(),
            EigenCount::Top(k) => k.min(op.len()),
        };
        lanczos_top(op, k)?
    };
    for &v in &raw {
        if v < -RANGE_TOL || v > 1.0 + RANGE_TOL {
            return Err(SpectralError::SpectralRangeViolated {
                value: v,
                lo: -RANGE_TOL,
                hi: 1.0 + RANGE_TOL,
            });
        }
    }
    let eigenvalues: Vec<f64> = raw.iter().map(|v| v.clamp(0.0, 1.0)).collect();
    Ok(Spectrum {
        eigenvalues,
        grid_shape: op.grid().shape.clone(),
        grid_spacing: op.grid().spacing.clone(),
        active_points: op.len(),
        scaling: String::new(),
        trace: op.trace(),
        trace_squared: op.hs_norm_squared(),
    })
}

/// Lanczos with full reorthogonalization for the top-k eigenvalues of the
/// matrix-free operator. The eigenvalue clusters near 1 lose orthogonality
/// quickly, so every new basis vector is reorthogonalized twice against
/// the whole basis. On breakdown (the Krylov sequence exhausts the
/// numerically reachable invariant subspace) the iteration restarts with a
/// fresh random vector orthogonal to everything found so far, which is
/// what splits eigenvalue copies closer than the tolerance. The top-k
/// Ritz pairs are validated by direct residuals at the end.
fn lanczos_top(op: &ConcentrationOperator, k: usize) -> Result<Vec<f64>, SpectralError> {
    let n = op.len();
    if n == 0 || k == 0 {
        return Ok(vec![]);
    }
    let tol = 1e-10;
    let breakdown = 1e-10;
    let max_iter = n.min((6 * k + 64).max(128));

    let mut rng = ChaCha8Rng::seed_from_u64(0x0d0f_417);
    let draw = |rng: &mut ChaCha8Rng| {
        let v = DVector::from_iterator(n, (0..n).map(|_| rng.gen_range(-1.0..1.0f64)));
        let norm = v.norm();
        v / norm
    };

    let mut basis: Vec<DVector<f64>> = vec![draw(&mut rng)];
    let mut alphas: Vec<f64> = Vec::new();
    let mut betas: Vec<f64> = Vec::new();

    for m in 1..=max_iter {
        let w_vec = op.apply(basis.last().unwrap().as_slice())?;
        let mut w = DVector::from_vec(w_vec);
        let alpha = w.dot(basis.last().unwrap());
        alphas.push(alpha);
        // full reorthogonalization, applied twice
        for _ in 0..2 {
            for b in &basis {
                let c = w.dot(b);
                w.axpy(-c, b, 1.0);
            }
        }
        if m == max_iter || basis.len() == n {
            break;
        }
        let beta = w.norm();
        if beta > breakdown {
            betas.push(beta);
            basis.push(w / beta);
        } else {
            // restart: decouple the tridiagonal and continue in the
            // orthogonal complement of the converged subspace
            let mut fresh = None;
            for _ in 0..5 {
                let mut v = draw(&mut rng);
                for _ in 0..2 {
                    for b in &basis {
                        let c = v.dot(b);
                        v.axpy(-c, b, 1.0);
                    }
                }
                let norm = v.norm();
                if norm > 1e-6 {
                    fresh = Some(v / norm);
                    break;
                }
            }
            match fresh {
                Some(v) => {
                    betas.push(0.0);
                    basis.push(v);
                }
                None => break, // whole space exhausted
            }
        }
    }

    let (theta, _) = ritz_values(&alphas, &betas);
    let kept: Vec<f64> = theta.iter().take(k).copied().collect();

    // direct residual validation of the returned Ritz pairs
    let m = alphas.len();
    let mut t = DMatrix::zeros(m, m);
    for i in 0..m {
        t[(i, i)] = alphas[i];
        if i + 1 < m {
            t[(i, i + 1)] = betas[i];
            t[(i + 1, i)] = betas[i];
        }
    }
    let eig = t.symmetric_eigen();
    let mut idx: Vec<usize> = (0..m).collect();
    idx.sort_by(|&a, &b| eig.eigenvalues[b].partial_cmp(&eig.eigenvalues[a]).unwrap());
    let mut worst = 0.0f64;
    for &i in idx.iter().take(k.min(m)) {
        let s = eig.eigenvectors.column(i);
        let mut y = DVector::zeros(n);
        for (j, b) in basis.iter().enumerate().take(m) {
            y.axpy(s[j], b, 1.0);
        }
        let ay = DVector::from_vec(op.apply(y.as_slice())?);
        let res = (&ay - eig.eigenvalues[i] * &y).norm();
        worst = worst.max(res);
    }
    if worst > tol {
        return Err(SpectralError::KrylovNotConverged {
            iterations: m,
            residual: worst,
        });
    }
    Ok(kept)
}

/// Eigenvalues of the Lanczos tridiagonal matrix, sorted non-increasing,
/// together with the last component of each eigenvector (for residuals).
fn ritz_values(alphas: &[f64], betas: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let m = alphas.len();
    let mut t = DMatrix::zeros(m, m);
    for i in 0..m {
        t[(i, i)] = alphas[i];
        if i + 1 < m {
            t[(i, i + 1)] = betas[i];
            t[(i + 1, i)] = betas[i];
        }
    }
    let eig = t.symmetric_eigen();
    let mut idx: Vec<usize> = (0..m).collect();
    idx.sort_by(|&a, &b| eig.eigenvalues[b].partial_cmp(&eig.eigenvalues[a]).unwrap());
    let theta: Vec<f64> = idx.iter().map(|&i| eig.eigenvalues[i]).collect();
    let bottom: Vec<f64> = idx.iter().map(|&i| eig.eigenvectors[(m - 1, i)]).collect();
    (theta, bottom)
}

/// Number of eigenvalues not smaller than the level (ties count).
pub fn count_at_level(s: &Spectrum, level: f64) -> Result<usize, SpectralError> {
    if !(level > 0.0 && level < 1.0) {
        return Err(SpectralError::LevelOutOfRange(level));
    }
    Ok(s.eigenvalues.iter().filter(|&&l| l >= level).count())
}

/// N(eps_lo) - N(eps_hi): how many eigenvalues sit inside the transition.
pub fn transition_width(s: &Spectrum, eps_lo: f64, eps_hi: f64) -> Result<usize, SpectralError> {
    if eps_lo >= eps_hi {
        return Err(SpectralError::BadLevelInterval { lo: eps_lo, hi: eps_hi });
    }
    Ok(count_at_level(s, eps_lo)? - count_at_level(s, eps_hi)?)
}

/// Residuals of the two trace identities against the leading term
/// T1 = (2 pi)^-N m(P) m(Q) |det A| |det B|.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct TraceResiduals {
    pub sum: f64,
    pub sum_squared: f64,
    pub leading_term: f64,
    /// (sum(lambda) - T1) / T1
    pub sum_residual: f64,
    /// (sum(lambda^2) - T1) / T1; shrinks along a scaling sweep as the
    /// eigenvalues polarize toward 0 and 1
    pub sum_squared_residual: f64,
}

pub fn trace_identities(op: &ConcentrationOperator, leading_term: f64) -> TraceResiduals {
    let sum = op.trace();
    let sum_squared = op.hs_norm_squared();
    let (sum_residual, sum_squared_residual) = if leading_term != 0.0 {
        (
            (sum - leading_term) / leading_term,
            (sum_squared - leading_term) / leading_term,
        )
    } else {
        (0.0, 0.0)
    };
    TraceResiduals {
        sum,
        sum_squared,
        leading_term,
        sum_residual,
        sum_squared_residual,
    }
}

/// Eigenvalue counts and transition shape at one scaling point.
#[derive(Debug, Clone, Serialize)]
pub struct TransitionReport {
    pub scaling: String,
    /// |det A| |det B|, the volume factor the counts are normalized by.
    pub scale_volume: f64,
    pub counts: Vec<(f64, usize)>,
    /// N(1/2)
    pub transition_point: usize,
    /// N(0.01) - N(0.99)
    pub width: usize,
    pub leading_term: f64,
    /// (N(eps) - leading) / leading per requested eps
    pub normalized_errors: Vec<(f64, f64)>,
    pub trace: TraceResiduals,
    pub spectrum: Spectrum,
}

fn report_for(
    spectrum: Spectrum,
    op: &ConcentrationOperator,
    eps_list: &[f64],
    scale_volume: f64,
    leading_term: f64,
    scaling: String,
) -> Result<TransitionReport, SpectralError> {
    let mut counts = Vec::with_capacity(eps_list.len());
    let mut normalized_errors = Vec::with_capacity(eps_list.len());
    for &eps in eps_list {
        let n = count_at_level(&spectrum, eps)?;
        counts.push((eps, n));
        let err = if leading_term != 0.0 {
            (n as f64 - leading_term) / leading_term
        } else {
            0.0
        };
        normalized_errors.push((eps, err));
    }
    let transition_point = count_at_level(&spectrum, 0.5)?;
    let width = transition_width(&spectrum, 0.01, 0.99)?;
    let trace = trace_identities(op, leading_term);
    let mut spectrum = spectrum;
    spectrum.scaling = scaling.clone();
    Ok(TransitionReport {
        scaling,
        scale_volume,
        counts,
        transition_point,
        width,
        leading_term,
        normalized_errors,
        trace,
        spectrum,
    })
}

/// One scaling point: assemble T_{AP} B_{BQ} T_{AP}, solve, and report.
pub fn scaled_transition(
    p: &SupportSet,
    q: &SupportSet,
    a: &LinearMap,
    b: &LinearMap,
    eps_list: &[f64],
    resolution: &Resolution,
    options: &AssembleOptions,
    scaling: String,
) -> Result<TransitionReport, SpectralError> {
    let kernel = build_kernel(q, b)?;
    let op = assemble(p, a, &kernel, resolution, options)?;
    let spectrum = eigenvalues(&op, EigenCount::All)?;
    let scale_volume = a.determinant().abs() * b.determinant().abs();
    let n = p.dim() as i32;
    let leading = (2.0 * PI).powi(-n)
        * p.measure()?.value
        * q.measure()?.value
        * scale_volume;
    report_for(spectrum, &op, eps_list, scale_volume, leading, scaling)
}

/// Landau blow-up sweep: T_{beta P'} B_Q T_{beta P'} for each beta, reporting
/// the convergence of N_beta(eps) / beta^N toward (2 pi)^-N m(P') m(Q).
pub fn landau_sweep(
    p_prime: &SupportSet,
    q: &SupportSet,
    beta_list: &[f64],
    eps_list: &[f64],
    resolution: &Resolution,
    options: &AssembleOptions,
) -> Result<Vec<TransitionReport>, SpectralError> {
    let n = p_prime.dim();
    beta_list
        .par_iter()
        .map(|&beta| {
            let a = LinearMap::scalar(n, beta)?;
            let b = LinearMap::identity(n);
            scaled_transition(
                p_prime,
                q,
                &a,
                &b,
                eps_list,
                resolution,
                options,
                format!("beta={beta}"),
            )
        })
        .collect()
}

/// Anisotropic sweep: P scaled on axis 0 by tau, Q scaled on the remaining
/// axes by rho, reporting N_{tau,rho}(eps) / (tau rho ...) convergence.
pub fn anisotropic_sweep(
    p: &SupportSet,
    q: &SupportSet,
    pairs: &[(f64, f64)],
    eps_list: &[f64],
    resolution: &Resolution,
    options: &AssembleOptions,
) -> Result<Vec<TransitionReport>, SpectralError> {
    let n = p.dim();
    pairs
        .par_iter()
        .map(|&(tau, rho)| {
            let mut a_diag = vec![1.0; n];
            a_diag[0] = tau;
            let mut b_diag = vec![rho; n];
            b_diag[0] = 1.0;
            let a = LinearMap::diagonal(&a_diag)?;
            let b = LinearMap::diagonal(&b_diag)?;
            scaled_transition(
                p,
                q,
                &a,
                &b,
                eps_list,
                resolution,
                options,
                format!("tau={tau},rho={rho}"),
            )
        })
        .collect()
}
