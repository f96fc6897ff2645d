//! Dense spectral primitives on a single block.
//!
//! Eigenvalues come from the complex Schur form and singular values from a
//! bidiagonal SVD (both via `nalgebra`). Matrix products are computed here:
//! every entry accumulates its positive and negative real products
//! separately, so sums of terms that cancel in pairs come out exactly zero.
//! Nilpotent blocks therefore have exactly vanishing powers.

use nalgebra::linalg::Schur;
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::family::BlockMatrix;
use crate::polynomial::Polynomial;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum KernelError {
    #[error("{routine} did not converge on a {dim}x{dim} block")]
    NoConvergence { routine: &'static str, dim: usize },
    #[error("overflow while forming power {step}")]
    Overflow { step: usize },
}

/// Eigenvalues with algebraic multiplicity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenSet {
    pub values: Vec<Complex64>,
    /// `||A Q - Q T||_F / max(||A||_F, tiny)` for the computed Schur pair.
    pub residual: f64,
}

impl EigenSet {
    pub fn spectral_radius(&self) -> f64 {
        self.values.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

/// Nonincreasing singular values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingularList {
    pub values: Vec<f64>,
}

impl SingularList {
    pub fn largest(&self) -> f64 {
        self.values.first().copied().unwrap_or(0.0)
    }

    pub fn smallest(&self) -> f64 {
        self.values.last().copied().unwrap_or(0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResolventNorm {
    Finite(f64),
    Singular,
}

impl ResolventNorm {
    pub fn finite(self) -> Option<f64> {
        match self {
            ResolventNorm::Finite(v) => Some(v),
            ResolventNorm::Singular => None,
        }
    }
}

/// `||A^m||` for `m = 1..`; `diverged_at` marks the first power whose norm
/// left the representable range (later powers are not computed).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerNorms {
    pub norms: Vec<f64>,
    pub diverged_at: Option<usize>,
}

const SCHUR_RESTARTS: u64 = 4;

fn iteration_cap(dim: usize) -> usize {
    1000 * dim + 100
}

/// Product with sign-split accumulation of the real partial products.
pub fn matmul(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    assert_eq!(a.ncols(), b.nrows(), "matmul shape mismatch");
    let (rows, inner, cols) = (a.nrows(), a.ncols(), b.ncols());
    let mut out = DMatrix::zeros(rows, cols);
    let mut re_pos = vec![0.0f64; rows];
    let mut re_neg = vec![0.0f64; rows];
    let mut im_pos = vec![0.0f64; rows];
    let mut im_neg = vec![0.0f64; rows];
    #[inline]
    fn push(pos: &mut f64, neg: &mut f64, t: f64) {
        if t >= 0.0 {
            *pos += t;
        } else {
            *neg += t;
        }
    }
    for k in 0..cols {
        re_pos.fill(0.0);
        re_neg.fill(0.0);
        im_pos.fill(0.0);
        im_neg.fill(0.0);
        for j in 0..inner {
            let bjk = b[(j, k)];
            if bjk.re == 0.0 && bjk.im == 0.0 {
                continue;
            }
            let col = a.column(j);
            for i in 0..rows {
                let aij = col[i];
                if aij.re == 0.0 && aij.im == 0.0 {
                    continue;
                }
                push(&mut re_pos[i], &mut re_neg[i], aij.re * bjk.re);
                push(&mut re_pos[i], &mut re_neg[i], -(aij.im * bjk.im));
                push(&mut im_pos[i], &mut im_neg[i], aij.re * bjk.im);
                push(&mut im_pos[i], &mut im_neg[i], aij.im * bjk.re);
            }
        }
        for i in 0..rows {
            out[(i, k)] = Complex64::new(re_pos[i] + re_neg[i], im_pos[i] + im_neg[i]);
        }
    }
    out
}

/// Spectral norm, iterating the SVD until convergence.
pub(crate) fn matrix_norm(m: &DMatrix<Complex64>) -> f64 {
    if m.iter().all(|z| z.re == 0.0 && z.im == 0.0) {
        return 0.0;
    }
    if m.nrows() == 1 && m.ncols() == 1 {
        return m[(0, 0)].norm();
    }
    m.singular_values().max()
}

fn is_exact_zero(m: &DMatrix<Complex64>) -> bool {
    m.iter().all(|z| z.re == 0.0 && z.im == 0.0)
}

/// Smallest `k <= dim` with `A^k` exactly zero.
pub(crate) fn exact_zero_power(a: &DMatrix<Complex64>) -> Option<usize> {
    let dim = a.nrows();
    let mut p = a.clone();
    for k in 1..=dim {
        if is_exact_zero(&p) {
            return Some(k);
        }
        if k < dim {
            p = matmul(&p, a);
        }
    }
    None
}

/// Nilpotency order of a block: the declared flag, else an exact zero power.
pub fn nilpotency_order(a: &BlockMatrix) -> Option<usize> {
    a.nilpotency_order()
        .or_else(|| exact_zero_power(a.entries()))
}

/// Unitary factor of a seeded random complex matrix.
fn random_unitary(dim: usize, seed: u64) -> DMatrix<Complex64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = DMatrix::from_fn(dim, dim, |_, _| {
        Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
    });
    g.qr().q()
}

/// Schur pair `(Q, T)` of `m`. Shifted QR can stall on highly symmetric
/// inputs such as cyclic shifts; those are retried on `U^H m U` for a few
/// fixed random unitaries `U`, which leaves the spectrum unchanged.
fn schur_with_restarts(m: &DMatrix<Complex64>) -> Option<(DMatrix<Complex64>, DMatrix<Complex64>)> {
    let dim = m.nrows();
    if let Some(s) = Schur::try_new(m.clone(), f64::EPSILON, iteration_cap(dim)) {
        return Some(s.unpack());
    }
    (0..SCHUR_RESTARTS).find_map(|seed| {
        let u = random_unitary(dim, seed);
        let similar = u.adjoint() * m * &u;
        Schur::try_new(similar, f64::EPSILON, iteration_cap(dim)).map(|s| {
            let (q, t) = s.unpack();
            (u * q, t)
        })
    })
}

pub fn eigenvalues(a: &BlockMatrix) -> Result<EigenSet, KernelError> {
    let m = a.entries();
    let dim = a.dim();
    if dim == 1 {
        return Ok(EigenSet {
            values: vec![m[(0, 0)]],
            residual: 0.0,
        });
    }
    if is_exact_zero(m) {
        return Ok(EigenSet {
            values: vec![Complex64::new(0.0, 0.0); dim],
            residual: 0.0,
        });
    }
    let (q, t) = schur_with_restarts(m).ok_or(KernelError::NoConvergence {
        routine: "Schur decomposition",
        dim,
    })?;
    let values: Vec<Complex64> = (0..dim).map(|i| t[(i, i)]).collect();
    let scale = m.norm().max(f64::MIN_POSITIVE);
    let residual = (m * &q - &q * &t).norm() / scale;
    Ok(EigenSet { values, residual })
}

pub fn singular_values(a: &BlockMatrix) -> Result<SingularList, KernelError> {
    singular_values_of(a.entries())
}

pub(crate) fn singular_values_of(m: &DMatrix<Complex64>) -> Result<SingularList, KernelError> {
    let dim = m.nrows();
    if dim == 1 && m.ncols() == 1 {
        return Ok(SingularList {
            values: vec![m[(0, 0)].norm()],
        });
    }
    if is_exact_zero(m) {
        return Ok(SingularList {
            values: vec![0.0; dim.min(m.ncols())],
        });
    }
    let svd = m
        .clone()
        .try_svd(false, false, f64::EPSILON, iteration_cap(dim))
        .ok_or(KernelError::NoConvergence {
            routine: "SVD",
            dim,
        })?;
    let mut values: Vec<f64> = svd.singular_values.iter().copied().collect();
    values.sort_by(|x, y| y.total_cmp(x));
    Ok(SingularList { values })
}

pub fn spectral_norm(a: &BlockMatrix) -> Result<f64, KernelError> {
    Ok(singular_values(a)?.largest())
}

/// `||(A - tau I)^{-1}|| = 1 / s_min(A - tau I)`, or `Singular` when
/// `s_min <= dim eps ||A - tau I||`.
pub fn resolvent_norm(a: &BlockMatrix, tau: Complex64) -> Result<ResolventNorm, KernelError> {
    let dim = a.dim();
    let shifted = shift(a.entries(), tau);
    let sv = singular_values_of(&shifted)?;
    let (smax, smin) = (sv.largest(), sv.smallest());
    if smin <= dim as f64 * f64::EPSILON * smax {
        return Ok(ResolventNorm::Singular);
    }
    Ok(ResolventNorm::Finite(1.0 / smin))
}

pub(crate) fn shift(m: &DMatrix<Complex64>, tau: Complex64) -> DMatrix<Complex64> {
    let mut s = m.clone();
    for i in 0..s.nrows() {
        s[(i, i)] -= tau;
    }
    s
}

/// `||A^m||` for `m = 1..=count` by repeated multiplication.
pub fn power_norms(a: &BlockMatrix, count: usize) -> Result<PowerNorms, KernelError> {
    let m = a.entries();
    let mut norms = Vec::with_capacity(count);
    let mut p = m.clone();
    for step in 1..=count {
        if step > 1 {
            p = matmul(&p, m);
        }
        if p.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Ok(PowerNorms {
                norms,
                diverged_at: Some(step),
            });
        }
        let norm = singular_values_of(&p)?.largest();
        if !norm.is_finite() {
            return Ok(PowerNorms {
                norms,
                diverged_at: Some(step),
            });
        }
        norms.push(norm);
        if norm == 0.0 {
            // every later power is zero as well
            norms.resize(count, 0.0);
            break;
        }
    }
    Ok(PowerNorms {
        norms,
        diverged_at: None,
    })
}

/// `p(A)` by Horner's rule.
pub fn apply_polynomial(a: &BlockMatrix, p: &Polynomial) -> Result<BlockMatrix, KernelError> {
    let m = a.entries();
    let dim = a.dim();
    let coeffs = p.coefficients();
    let mut acc: DMatrix<Complex64> = DMatrix::zeros(dim, dim);
    for (step, &c) in coeffs.iter().rev().enumerate() {
        if step > 0 {
            acc = matmul(&acc, m);
        }
        for i in 0..dim {
            acc[(i, i)] += c;
        }
        if acc.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(KernelError::Overflow { step });
        }
    }
    BlockMatrix::new(acc).map_err(|_| KernelError::Overflow { step: coeffs.len() })
}
