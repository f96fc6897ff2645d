//! Blocks, families of blocks and their tail certificates.
//!
//! Block indices are 1-based throughout.

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::envelope::{Envelope, EnvelopeError};
use crate::kernel;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BlockError {
    #[error("block must have dimension >= 1")]
    Empty,
    #[error("block is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("entry ({row}, {col}) is not finite")]
    NonFinite { row: usize, col: usize },
    #[error("declared nilpotency order {order} does not hold")]
    NotNilpotent { order: usize },
    #[error("block declared normal but ||A*A - AA*|| = {defect:e} exceeds {bound:e}")]
    NotNormal { defect: f64, bound: f64 },
    #[error("rows have unequal lengths")]
    Ragged,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FamilyError {
    #[error("explicit family needs at least one block")]
    EmptyFamily,
    #[error("block {index}: {source}")]
    InvalidBlock { index: usize, source: BlockError },
    #[error("block indices start at 1, got {0}")]
    ZeroIndex(usize),
    #[error("block index {index} is beyond the explicit family of {len} blocks")]
    OutOfRange { index: usize, len: usize },
    #[error("measure weight {index} is {weight}, weights must be strictly positive")]
    NonPositiveWeight { index: usize, weight: f64 },
    #[error("measure has {weights} weights for a family of {blocks} blocks")]
    MeasureLength { weights: usize, blocks: usize },
    #[error("a weight list cannot describe the measure of an infinite family")]
    WeightsOnGenerator,
    #[error("tail certificate: {0}")]
    Certificate(#[from] EnvelopeError),
    #[error("tail certificate start index must be >= 1")]
    ZeroStart,
}

/// One coordinate operator: a finite square complex matrix.
#[derive(Clone, PartialEq)]
pub struct BlockMatrix {
    entries: DMatrix<Complex64>,
    normal: bool,
    nilpotency_order: Option<usize>,
}

impl fmt::Debug for BlockMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BlockMatrix")
            .field("dim", &self.dim())
            .field("entries", &self.entries.as_slice())
            .field("normal", &self.normal)
            .field("nilpotency_order", &self.nilpotency_order)
            .finish()
    }
}

impl BlockMatrix {
    pub fn new(entries: DMatrix<Complex64>) -> Result<Self, BlockError> {
        let (rows, cols) = entries.shape();
        if rows == 0 || cols == 0 {
            return Err(BlockError::Empty);
        }
        if rows != cols {
            return Err(BlockError::NotSquare { rows, cols });
        }
        for c in 0..cols {
            for r in 0..rows {
                let z = entries[(r, c)];
                if !(z.re.is_finite() && z.im.is_finite()) {
                    return Err(BlockError::NonFinite { row: r, col: c });
                }
            }
        }
        Ok(BlockMatrix {
            entries,
            normal: false,
            nilpotency_order: None,
        })
    }

    pub fn from_rows(rows: &[Vec<Complex64>]) -> Result<Self, BlockError> {
        let n = rows.len();
        if n == 0 {
            return Err(BlockError::Empty);
        }
        if rows.iter().any(|r| r.len() != rows[0].len()) {
            return Err(BlockError::Ragged);
        }
        let m = rows[0].len();
        Self::new(DMatrix::from_fn(n, m, |i, j| rows[i][j]))
    }

    pub fn from_real_rows(rows: &[Vec<f64>]) -> Result<Self, BlockError> {
        let rows: Vec<Vec<Complex64>> = rows
            .iter()
            .map(|r| r.iter().map(|&x| Complex64::new(x, 0.0)).collect())
            .collect();
        Self::from_rows(&rows)
    }

    pub fn scalar(value: Complex64) -> Result<Self, BlockError> {
        Self::new(DMatrix::from_element(1, 1, value))
    }

    pub fn real_scalar(value: f64) -> Result<Self, BlockError> {
        Self::scalar(Complex64::new(value, 0.0))
    }

    pub fn diagonal(values: &[Complex64]) -> Result<Self, BlockError> {
        let n = values.len();
        Self::new(DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                values[i]
            } else {
                Complex64::new(0.0, 0.0)
            }
        }))
    }

    pub fn identity(dim: usize) -> Result<Self, BlockError> {
        Self::new(DMatrix::identity(dim, dim))
    }

    pub fn zeros(dim: usize) -> Result<Self, BlockError> {
        Self::new(DMatrix::zeros(dim, dim))
    }

    /// Declares the block normal, checking `||A*A - AA*|| <= dim eps ||A||^2`.
    pub fn with_normal(mut self) -> Result<Self, BlockError> {
        let a = &self.entries;
        let ah = a.adjoint();
        let defect = kernel::matrix_norm(&(kernel::matmul(&ah, a) - kernel::matmul(a, &ah)));
        let norm = kernel::matrix_norm(a);
        let bound = self.dim() as f64 * f64::EPSILON * norm * norm;
        if defect > bound {
            return Err(BlockError::NotNormal { defect, bound });
        }
        self.normal = true;
        Ok(self)
    }

    /// Declares `A^order = 0` and `A^(order-1) != 0`, checked exactly.
    pub fn with_nilpotency(mut self, order: usize) -> Result<Self, BlockError> {
        if order == 0 || kernel::exact_zero_power(&self.entries) != Some(order) {
            return Err(BlockError::NotNilpotent { order });
        }
        self.nilpotency_order = Some(order);
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &DMatrix<Complex64> {
        &self.entries
    }

    pub fn into_entries(self) -> DMatrix<Complex64> {
        self.entries
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.entries[(row, col)]
    }

    pub fn is_normal(&self) -> bool {
        self.normal
    }

    pub fn nilpotency_order(&self) -> Option<usize> {
        self.nilpotency_order
    }

    /// Entries as rows of `[re, im]` pairs.
    pub fn to_rows(&self) -> Vec<Vec<[f64; 2]>> {
        (0..self.dim())
            .map(|i| {
                (0..self.dim())
                    .map(|j| {
                        let z = self.entries[(i, j)];
                        [z.re, z.im]
                    })
                    .collect()
            })
            .collect()
    }
}

/// Atomic measure on the index set. Carried as metadata only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum MeasureSpec {
    #[default]
    Counting,
    Weights(Vec<f64>),
}

impl MeasureSpec {
    pub fn validate(&self) -> Result<(), FamilyError> {
        if let MeasureSpec::Weights(w) = self {
            for (i, &x) in w.iter().enumerate() {
                if !(x > 0.0 && x.is_finite()) {
                    return Err(FamilyError::NonPositiveWeight {
                        index: i + 1,
                        weight: x,
                    });
                }
            }
        }
        Ok(())
    }

    pub fn weight(&self, index: usize) -> f64 {
        match self {
            MeasureSpec::Counting => 1.0,
            MeasureSpec::Weights(w) => w[index - 1],
        }
    }
}

/// Declared closed form `lambda(n) = re(n) + i im(n)` of one eigenvalue of
/// each block `A_n`. Since `||R_tau(A)|| >= 1/dist(tau, sigma(A))`, a track
/// converging to `tau` certifies unbounded resolvent norms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenTrack {
    pub re: Envelope,
    pub im: Envelope,
}

impl EigenTrack {
    pub fn eval(&self, n: usize) -> Complex64 {
        Complex64::new(self.re.eval(n as f64), self.im.eval(n as f64))
    }
}

/// Closed-form facts about the blocks `A_n` for `n >= start`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailCertificate {
    #[serde(rename = "N0")]
    pub start: usize,
    /// Nonincreasing `b(n) >= ||A_n||`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub upper: Option<Envelope>,
    /// `l(n) <= ||A_n||`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lower: Option<Envelope>,
    /// `s(n, q) >= s_q(A_n)`, in the variables `n` and `q`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub singular: Option<Envelope>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eigen_track: Option<EigenTrack>,
    /// Bound on `dim(A_n)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_dim: Option<usize>,
}

impl TailCertificate {
    pub fn new(start: usize) -> Self {
        TailCertificate {
            start,
            upper: None,
            lower: None,
            singular: None,
            eigen_track: None,
            max_dim: None,
        }
    }

    pub fn with_upper(mut self, upper: Envelope) -> Self {
        self.upper = Some(upper);
        self
    }

    pub fn with_lower(mut self, lower: Envelope) -> Self {
        self.lower = Some(lower);
        self
    }

    pub fn with_singular(mut self, singular: Envelope) -> Self {
        self.singular = Some(singular);
        self
    }

    pub fn with_eigen_track(mut self, re: Envelope, im: Envelope) -> Self {
        self.eigen_track = Some(EigenTrack { re, im });
        self
    }

    pub fn with_max_dim(mut self, max_dim: usize) -> Self {
        self.max_dim = Some(max_dim);
        self
    }

    /// Sampled validation of the envelope invariants on `n >= start`.
    pub fn validate(&self) -> Result<(), FamilyError> {
        if self.start == 0 {
            return Err(FamilyError::ZeroStart);
        }
        let from = self.start as f64;
        if let Some(b) = &self.upper {
            b.check_nonincreasing(from)?;
        }
        if let Some(l) = &self.lower {
            l.check_finite(from)?;
            if let Some(b) = &self.upper {
                for x in crate::envelope::sample_points(from) {
                    let (lv, bv) = (l.eval(x), b.eval(x));
                    if lv > bv * (1.0 + 1e-12) + 1e-300 {
                        return Err(EnvelopeError::LowerAboveUpper { at: x }.into());
                    }
                }
            }
        }
        if let Some(s) = &self.singular {
            s.check_finite(from)?;
        }
        if let Some(t) = &self.eigen_track {
            t.re.check_finite(from)?;
            t.im.check_finite(from)?;
        }
        Ok(())
    }
}

pub type BlockGenerator = Arc<dyn Fn(usize) -> Result<BlockMatrix, BlockError> + Send + Sync>;

#[derive(Clone)]
pub enum FamilyKind {
    Explicit(Vec<BlockMatrix>),
    Generator(BlockGenerator),
}

impl fmt::Debug for FamilyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FamilyKind::Explicit(b) => f.debug_tuple("Explicit").field(&b.len()).finish(),
            FamilyKind::Generator(_) => f.write_str("Generator(..)"),
        }
    }
}

/// The indexed family `(A_n)`, read as the operator `A = ⊕ A_n`.
#[derive(Clone, Debug)]
pub struct BlockFamily {
    kind: FamilyKind,
    tail: Option<TailCertificate>,
    measure: MeasureSpec,
}

/// Result of [`BlockFamily::truncate`].
#[derive(Debug, Clone)]
pub struct Truncation {
    pub blocks: Vec<BlockMatrix>,
    pub requested: usize,
    pub clamped: bool,
}

/// Builds an explicit family, validating every raw matrix.
pub fn make_explicit(
    blocks: Vec<DMatrix<Complex64>>,
    measure: MeasureSpec,
) -> Result<BlockFamily, FamilyError> {
    let blocks = blocks
        .into_iter()
        .enumerate()
        .map(|(i, m)| {
            BlockMatrix::new(m).map_err(|source| FamilyError::InvalidBlock {
                index: i + 1,
                source,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    BlockFamily::explicit(blocks, measure)
}

/// Builds a lazily evaluated infinite family.
pub fn make_generator<F>(
    gen: F,
    tail: Option<TailCertificate>,
    measure: MeasureSpec,
) -> Result<BlockFamily, FamilyError>
where
    F: Fn(usize) -> Result<BlockMatrix, BlockError> + Send + Sync + 'static,
{
    BlockFamily::generator(Arc::new(gen), tail, measure)
}

impl BlockFamily {
    pub fn explicit(blocks: Vec<BlockMatrix>, measure: MeasureSpec) -> Result<Self, FamilyError> {
        if blocks.is_empty() {
            return Err(FamilyError::EmptyFamily);
        }
        measure.validate()?;
        if let MeasureSpec::Weights(w) = &measure {
            if w.len() != blocks.len() {
                return Err(FamilyError::MeasureLength {
                    weights: w.len(),
                    blocks: blocks.len(),
                });
            }
        }
        Ok(BlockFamily {
            kind: FamilyKind::Explicit(blocks),
            tail: None,
            measure,
        })
    }

    pub fn generator(
        gen: BlockGenerator,
        tail: Option<TailCertificate>,
        measure: MeasureSpec,
    ) -> Result<Self, FamilyError> {
        measure.validate()?;
        if matches!(measure, MeasureSpec::Weights(_)) {
            return Err(FamilyError::WeightsOnGenerator);
        }
        if let Some(t) = &tail {
            t.validate()?;
        }
        Ok(BlockFamily {
            kind: FamilyKind::Generator(gen),
            tail,
            measure,
        })
    }

    pub fn kind(&self) -> &FamilyKind {
        &self.kind
    }

    pub fn tail(&self) -> Option<&TailCertificate> {
        self.tail.as_ref()
    }

    pub fn measure(&self) -> &MeasureSpec {
        &self.measure
    }

    /// Replaces the measure; explicit weights must match the block count.
    pub fn with_measure(mut self, measure: MeasureSpec) -> Result<Self, FamilyError> {
        measure.validate()?;
        match (&self.kind, &measure) {
            (FamilyKind::Explicit(b), MeasureSpec::Weights(w)) if w.len() != b.len() => {
                return Err(FamilyError::MeasureLength {
                    weights: w.len(),
                    blocks: b.len(),
                })
            }
            (FamilyKind::Generator(_), MeasureSpec::Weights(_)) => {
                return Err(FamilyError::WeightsOnGenerator)
            }
            _ => {}
        }
        self.measure = measure;
        Ok(self)
    }

    /// Replaces the tail certificate (generator families only use it).
    pub fn with_tail(mut self, tail: Option<TailCertificate>) -> Result<Self, FamilyError> {
        if let Some(t) = &tail {
            t.validate()?;
        }
        self.tail = tail;
        Ok(self)
    }

    pub fn is_explicit(&self) -> bool {
        matches!(self.kind, FamilyKind::Explicit(_))
    }

    /// Number of blocks, `None` for infinite families.
    pub fn len(&self) -> Option<usize> {
        match &self.kind {
            FamilyKind::Explicit(b) => Some(b.len()),
            FamilyKind::Generator(_) => None,
        }
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// The block `A_index` (1-based).
    pub fn block(&self, index: usize) -> Result<BlockMatrix, FamilyError> {
        if index == 0 {
            return Err(FamilyError::ZeroIndex(index));
        }
        match &self.kind {
            FamilyKind::Explicit(b) => {
                b.get(index - 1)
                    .cloned()
                    .ok_or(FamilyError::OutOfRange {
                        index,
                        len: b.len(),
                    })
            }
            FamilyKind::Generator(g) => {
                g(index).map_err(|source| FamilyError::InvalidBlock { index, source })
            }
        }
    }

    /// First `n` blocks in index order; explicit families clamp to their length.
    pub fn truncate(&self, n: usize) -> Result<Truncation, FamilyError> {
        let n = n.max(1);
        let count = self.inspect_count(n);
        let blocks = (1..=count)
            .map(|i| self.block(i))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Truncation {
            blocks,
            requested: n,
            clamped: count < n,
        })
    }

    pub(crate) fn inspect_count(&self, n: usize) -> usize {
        match self.len() {
            Some(len) => n.min(len),
            None => n,
        }
    }

    /// How many leading blocks a decision procedure inspects: every block
    /// of an explicit family; for generators at least `n`, extended so the
    /// tail certificate covers everything past the prefix.
    pub(crate) fn decision_count(&self, n: usize) -> usize {
        match (self.len(), &self.tail) {
            (Some(len), _) => len,
            (None, Some(t)) => n.max(1).max(t.start.saturating_sub(1)),
            (None, None) => n.max(1),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn explicit_family_of_two_scalars() {
        let f = make_explicit(
            vec![DMatrix::from_element(1, 1, c(2.0)), DMatrix::from_element(1, 1, c(3.0))],
            MeasureSpec::Counting,
        )
        .unwrap();
        assert_eq!(f.len(), Some(2));
        assert_eq!(f.block(2).unwrap().get(0, 0), c(3.0));
    }

    #[test]
    fn nan_block_is_rejected_with_its_index() {
        let err = make_explicit(
            vec![DMatrix::from_element(1, 1, c(f64::NAN))],
            MeasureSpec::Counting,
        )
        .unwrap_err();
        assert!(matches!(err, FamilyError::InvalidBlock { index: 1, .. }), "{err}");
        let err = make_explicit(
            vec![
                DMatrix::from_element(1, 1, c(1.0)),
                DMatrix::from_element(1, 1, Complex64::new(0.0, f64::INFINITY)),
            ],
            MeasureSpec::Counting,
        )
        .unwrap_err();
        assert!(matches!(err, FamilyError::InvalidBlock { index: 2, .. }));
    }

    #[test]
    fn empty_family_and_bad_weights() {
        assert_eq!(
            make_explicit(vec![], MeasureSpec::Counting).unwrap_err(),
            FamilyError::EmptyFamily
        );
        let one = || vec![DMatrix::from_element(1, 1, c(1.0))];
        assert!(matches!(
            make_explicit(one(), MeasureSpec::Weights(vec![0.0])),
            Err(FamilyError::NonPositiveWeight { index: 1, .. })
        ));
        assert!(matches!(
            make_explicit(one(), MeasureSpec::Weights(vec![1.0, 2.0])),
            Err(FamilyError::MeasureLength { .. })
        ));
        assert!(make_explicit(one(), MeasureSpec::Weights(vec![0.25])).is_ok());
    }

    #[test]
    fn nilpotent_flag_is_checked_exactly() {
        let a = BlockMatrix::from_real_rows(&[vec![0.0, 0.0], vec![3.0, 0.0]]).unwrap();
        assert!(a.clone().with_nilpotency(2).is_ok());
        assert!(a.clone().with_nilpotency(3).is_err());
        assert!(BlockMatrix::identity(2).unwrap().with_nilpotency(2).is_err());
    }

    #[test]
    fn normal_flag_is_checked() {
        assert!(BlockMatrix::diagonal(&[c(1.0), Complex64::new(0.0, 2.0)])
            .unwrap()
            .with_normal()
            .is_ok());
        let jordan = BlockMatrix::from_real_rows(&[vec![1.0, 1.0], vec![0.0, 1.0]]).unwrap();
        assert!(jordan.with_normal().is_err());
    }

    #[test]
    fn truncation_clamps_explicit_families() {
        let blocks: Vec<_> = (1..=3)
            .map(|k| BlockMatrix::real_scalar(k as f64).unwrap())
            .collect();
        let f = BlockFamily::explicit(blocks, MeasureSpec::Counting).unwrap();
        let t = f.truncate(2).unwrap();
        assert_eq!(t.blocks.len(), 2);
        assert!(!t.clamped);
        let t = f.truncate(10).unwrap();
        assert_eq!(t.blocks.len(), 3);
        assert!(t.clamped);
    }

    #[test]
    fn generator_truncation() {
        let f = make_generator(
            |n| BlockMatrix::real_scalar(1.0 / n as f64),
            None,
            MeasureSpec::Counting,
        )
        .unwrap();
        let t = f.truncate(4).unwrap();
        let vals: Vec<f64> = t.blocks.iter().map(|b| b.get(0, 0).re).collect();
        assert_eq!(vals, vec![1.0, 0.5, 1.0 / 3.0, 0.25]);
        assert!(f.block(0).is_err());
        assert!(make_generator(
            |n| BlockMatrix::real_scalar(n as f64),
            None,
            MeasureSpec::Weights(vec![1.0])
        )
        .is_err());
    }

    #[test]
    fn certificate_validation() {
        let env = |s: &str| s.parse::<Envelope>().unwrap();
        assert!(TailCertificate::new(1).with_upper(env("1/n")).validate().is_ok());
        assert!(TailCertificate::new(1)
            .with_upper(env("1 - 1/n"))
            .validate()
            .is_err());
        assert!(TailCertificate::new(1)
            .with_upper(env("1/n"))
            .with_lower(env("2/n"))
            .validate()
            .is_err());
        assert!(TailCertificate::new(0).validate().is_err());
    }
}
