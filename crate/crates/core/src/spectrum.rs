//! Point spectrum, resolvent suprema and point classification for `A = ⊕ A_n`.
//!
//! With every one-point index set carrying positive mass:
//!
//! * `σ_p(A)` is the union of the block point spectra;
//! * `τ ∈ ρ(A)` iff `τ` is in every block resolvent set and
//!   `sup_n ||R_τ(A_n)|| < ∞`;
//! * `τ ∈ σ_c(A)` when `τ` is in every block resolvent set but the
//!   resolvent norms are unbounded (finite blocks contribute no continuous
//!   spectrum of their own);
//! * `σ_r(A)` is empty because finite blocks have no residual spectrum.

use std::collections::BTreeSet;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::envelope::Limit;
use crate::family::{BlockFamily, BlockMatrix, FamilyError};
use crate::interval::Interval;
use crate::kernel::{self, EigenSet, KernelError, ResolventNorm};

/// Default relative tolerance for "τ is an eigenvalue".
pub const DEFAULT_EIGEN_TOL: f64 = 1e-8;

/// Relative tolerance used when checking a declared eigenvalue track.
const TRACK_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectrumOptions {
    /// `|τ - λ| <= rel_tol * max(1, ||A_n||)` identifies `τ` with `λ`.
    pub rel_tol: f64,
}

impl Default for SpectrumOptions {
    fn default() -> Self {
        SpectrumOptions {
            rel_tol: DEFAULT_EIGEN_TOL,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpectrumError {
    #[error(transparent)]
    Family(#[from] FamilyError),
    #[error("block {block}: {source}")]
    Kernel { block: usize, source: KernelError },
    #[error("τ = {tau} is an eigenvalue of block {block} (λ = {eigenvalue})")]
    PointSpectrum {
        tau: Complex64,
        block: usize,
        eigenvalue: Complex64,
    },
    #[error("block {block} has no eigenvalue near the declared track value {declared}")]
    TrackMismatch { block: usize, declared: Complex64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EigenSource {
    pub block: usize,
    pub value: Complex64,
}

/// One cluster of the deduplicated union; `value` is its first member.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralPoint {
    pub value: Complex64,
    pub sources: Vec<EigenSource>,
}

impl SpectralPoint {
    pub fn blocks(&self) -> BTreeSet<usize> {
        self.sources.iter().map(|s| s.block).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Completeness {
    Exact,
    Truncated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumReport {
    pub eigenvalues: Vec<SpectralPoint>,
    pub truncation_level: usize,
    pub completeness: Completeness,
}

impl SpectrumReport {
    /// Every block eigenvalue, with multiplicity, in block order.
    pub fn multiset(&self) -> Vec<Complex64> {
        let mut all: Vec<EigenSource> = self
            .eigenvalues
            .iter()
            .flat_map(|p| p.sources.iter().copied())
            .collect();
        all.sort_by_key(|s| s.block);
        all.into_iter().map(|s| s.value).collect()
    }

    pub fn values(&self) -> Vec<Complex64> {
        self.eigenvalues.iter().map(|p| p.value).collect()
    }

    /// Cluster ids touched by each inspected block.
    fn coverage(&self) -> Vec<BTreeSet<usize>> {
        let mut cover = vec![BTreeSet::new(); self.truncation_level];
        for (id, p) in self.eigenvalues.iter().enumerate() {
            for s in &p.sources {
                cover[s.block - 1].insert(id);
            }
        }
        cover
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResolventWitness {
    pub block: usize,
    pub norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum ResolventSup {
    /// `sup_n ||R_τ(A_n)||` lies in `sup`.
    Finite {
        sup: Interval,
        argmax_block: usize,
        inspected: usize,
        /// Neumann-series bound covering every block past the prefix.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        tail_bound: Option<f64>,
    },
    /// The supremum is infinite: a declared eigenvalue track converges to τ.
    Divergent {
        limit: Complex64,
        witness: Vec<ResolventWitness>,
    },
    Unknown { inspected: usize, prefix_max: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum PointClass {
    Point {
        block: usize,
        eigenvalue: Complex64,
    },
    Continuous {
        limit: Complex64,
        witness: Vec<ResolventWitness>,
    },
    /// Never produced for finite-dimensional blocks.
    Residual,
    Resolvent {
        sup: Interval,
    },
    Unknown {
        inspected: usize,
        prefix_max: f64,
    },
}

struct Inspected {
    index: usize,
    block: BlockMatrix,
    eig: EigenSet,
    norm: f64,
}

fn inspect(index: usize, block: BlockMatrix) -> Result<Inspected, SpectrumError> {
    let kerr = |source| SpectrumError::Kernel {
        block: index,
        source,
    };
    let eig = kernel::eigenvalues(&block).map_err(kerr)?;
    let norm = kernel::spectral_norm(&block).map_err(kerr)?;
    Ok(Inspected {
        index,
        block,
        eig,
        norm,
    })
}

/// Union of the block point spectra over the first `n` blocks.
pub fn point_spectrum(
    family: &BlockFamily,
    n: usize,
    opts: &SpectrumOptions,
) -> Result<SpectrumReport, SpectrumError> {
    let trunc = family.truncate(n)?;
    let blocks = trunc
        .blocks
        .into_iter()
        .enumerate()
        .map(|(i, b)| inspect(i + 1, b))
        .collect::<Result<Vec<_>, _>>()?;
    let mut clusters: Vec<SpectralPoint> = Vec::new();
    for b in &blocks {
        let tol = opts.rel_tol * b.norm.max(1.0);
        for &v in &b.eig.values {
            let nearest = clusters
                .iter()
                .enumerate()
                .map(|(k, c)| (k, (c.value - v).norm()))
                .min_by(|x, y| x.1.total_cmp(&y.1));
            let src = EigenSource {
                block: b.index,
                value: v,
            };
            match nearest {
                Some((k, d)) if d <= tol => clusters[k].sources.push(src),
                _ => clusters.push(SpectralPoint {
                    value: v,
                    sources: vec![src],
                }),
            }
        }
    }
    let completeness = match family.len() {
        Some(len) if blocks.len() == len => Completeness::Exact,
        _ => Completeness::Truncated,
    };
    Ok(SpectrumReport {
        eigenvalues: clusters,
        truncation_level: blocks.len(),
        completeness,
    })
}

/// An inclusion-minimal set of block indices whose point spectra cover the
/// union over the first `n` blocks.
///
/// Blocks are taken greedily in index order when they add an uncovered
/// cluster; a second pass then drops any retained block whose clusters are
/// all covered by the other retained blocks.
pub fn minimal_support(
    family: &BlockFamily,
    n: usize,
    opts: &SpectrumOptions,
) -> Result<Vec<usize>, SpectrumError> {
    let report = point_spectrum(family, n, opts)?;
    Ok(minimal_support_of(&report))
}

pub fn minimal_support_of(report: &SpectrumReport) -> Vec<usize> {
    let cover = report.coverage();
    let mut covered = BTreeSet::new();
    let mut kept = Vec::new();
    for (i, c) in cover.iter().enumerate() {
        if !c.is_subset(&covered) {
            covered.extend(c.iter().copied());
            kept.push(i + 1);
        }
    }
    let mut k = 0;
    while k < kept.len() {
        let others: BTreeSet<usize> = kept
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != k)
            .flat_map(|(_, &b)| cover[b - 1].iter().copied())
            .collect();
        if cover[kept[k] - 1].is_subset(&others) {
            kept.remove(k);
        } else {
            k += 1;
        }
    }
    kept
}

/// Cluster ids of `report` covered by the given blocks.
pub fn covered_by(report: &SpectrumReport, blocks: &[usize]) -> BTreeSet<usize> {
    let cover = report.coverage();
    blocks
        .iter()
        .flat_map(|&b| cover[b - 1].iter().copied())
        .collect()
}

fn point_hit(b: &Inspected, tau: Complex64, opts: &SpectrumOptions) -> Option<Complex64> {
    let tol = opts.rel_tol * b.norm.max(1.0);
    b.eig
        .values
        .iter()
        .copied()
        .filter(|v| (*v - tau).norm() <= tol)
        .min_by(|x, y| (*x - tau).norm().total_cmp(&(*y - tau).norm()))
}

fn nearest_eigenvalue(b: &Inspected, tau: Complex64) -> Complex64 {
    b.eig
        .values
        .iter()
        .copied()
        .min_by(|x, y| (*x - tau).norm().total_cmp(&(*y - tau).norm()))
        .unwrap_or(tau)
}

/// `sup_n ||R_τ(A_n)||`.
///
/// Explicit families are inspected in full. Generator families inspect the
/// first `n` blocks (extended up to the certificate start) and then use the
/// tail certificate: an eigenvalue track converging to τ makes the supremum
/// infinite; an upper envelope with `b(N') < |τ|` bounds every later
/// resolvent by `1/(|τ| - b(N'))`.
pub fn resolvent_sup(
    family: &BlockFamily,
    tau: Complex64,
    n: usize,
    opts: &SpectrumOptions,
) -> Result<ResolventSup, SpectrumError> {
    let count = family.decision_count(n);
    let mut norms = Vec::with_capacity(count);
    let mut inspected = Vec::with_capacity(count);
    for i in 1..=count {
        let b = inspect(i, family.block(i)?)?;
        if let Some(eigenvalue) = point_hit(&b, tau, opts) {
            return Err(SpectrumError::PointSpectrum {
                tau,
                block: i,
                eigenvalue,
            });
        }
        let r = kernel::resolvent_norm(&b.block, tau).map_err(|source| SpectrumError::Kernel {
            block: i,
            source,
        })?;
        match r {
            ResolventNorm::Finite(v) => norms.push(v),
            ResolventNorm::Singular => {
                return Err(SpectrumError::PointSpectrum {
                    tau,
                    block: i,
                    eigenvalue: nearest_eigenvalue(&b, tau),
                })
            }
        }
        inspected.push(b);
    }
    let (argmax, prefix_max) = norms
        .iter()
        .copied()
        .enumerate()
        .fold((0, 0.0f64), |acc, (i, v)| if v > acc.1 { (i, v) } else { acc });
    let argmax_block = argmax + 1;

    if family.is_explicit() {
        return Ok(ResolventSup::Finite {
            sup: Interval::point(prefix_max),
            argmax_block,
            inspected: count,
            tail_bound: None,
        });
    }
    let Some(tail) = family.tail() else {
        return Ok(ResolventSup::Unknown {
            inspected: count,
            prefix_max,
        });
    };

    if let Some(track) = &tail.eigen_track {
        let limit = |l: Option<Limit>| match l {
            Some(Limit::Zero) => Some(0.0),
            Some(Limit::Finite(c)) => Some(c),
            _ => None,
        };
        if let (Some(re), Some(im)) = (limit(track.re.limit()), limit(track.im.limit())) {
            let lim = Complex64::new(re, im);
            for b in inspected.iter().filter(|b| b.index >= tail.start) {
                let declared = track.eval(b.index);
                let tol = TRACK_TOL * b.norm.max(1.0);
                if !b.eig.values.iter().any(|v| (*v - declared).norm() <= tol) {
                    return Err(SpectrumError::TrackMismatch {
                        block: b.index,
                        declared,
                    });
                }
            }
            if (lim - tau).norm() <= 1e-12 * tau.norm().max(1.0) {
                return Ok(ResolventSup::Divergent {
                    limit: lim,
                    witness: divergence_witness(&norms),
                });
            }
        }
    }

    if let Some(upper) = &tail.upper {
        let next = (count + 1).max(tail.start);
        let b = upper.eval(next as f64);
        let gap = tau.norm() - b;
        if gap > 0.0 {
            let tail_bound = 1.0 / gap;
            return Ok(ResolventSup::Finite {
                sup: Interval::new(prefix_max, prefix_max.max(tail_bound)),
                argmax_block,
                inspected: count,
                tail_bound: Some(tail_bound),
            });
        }
    }
    Ok(ResolventSup::Unknown {
        inspected: count,
        prefix_max,
    })
}

/// Resolvent norms at indices 1, 2, 4, ... and the last inspected block.
fn divergence_witness(norms: &[f64]) -> Vec<ResolventWitness> {
    let mut idx: Vec<usize> = std::iter::successors(Some(1usize), |k| Some(k * 2))
        .take_while(|k| *k <= norms.len())
        .collect();
    if idx.last() != Some(&norms.len()) && !norms.is_empty() {
        idx.push(norms.len());
    }
    idx.into_iter()
        .map(|block| ResolventWitness {
            block,
            norm: norms[block - 1],
        })
        .collect()
}

/// Classifies τ as point spectrum, continuous spectrum or resolvent point.
pub fn classify_point(
    family: &BlockFamily,
    tau: Complex64,
    n: usize,
    opts: &SpectrumOptions,
) -> Result<PointClass, SpectrumError> {
    match resolvent_sup(family, tau, n, opts) {
        Err(SpectrumError::PointSpectrum {
            block, eigenvalue, ..
        }) => Ok(PointClass::Point { block, eigenvalue }),
        Err(e) => Err(e),
        Ok(ResolventSup::Finite { sup, .. }) => Ok(PointClass::Resolvent { sup }),
        Ok(ResolventSup::Divergent { limit, witness }) => {
            Ok(PointClass::Continuous { limit, witness })
        }
        Ok(ResolventSup::Unknown {
            inspected,
            prefix_max,
        }) => Ok(PointClass::Unknown {
            inspected,
            prefix_max,
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envelope::Envelope;
    use crate::family::{make_generator, MeasureSpec, TailCertificate};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn scalars(vals: &[f64]) -> BlockFamily {
        BlockFamily::explicit(
            vals.iter().map(|&v| BlockMatrix::real_scalar(v).unwrap()).collect(),
            MeasureSpec::Counting,
        )
        .unwrap()
    }

    fn nilpotents(alphas: &[f64]) -> BlockFamily {
        BlockFamily::explicit(
            alphas
                .iter()
                .map(|&a| BlockMatrix::from_real_rows(&[vec![0.0, 0.0], vec![a, 0.0]]).unwrap())
                .collect(),
            MeasureSpec::Counting,
        )
        .unwrap()
    }

    fn accumulating() -> BlockFamily {
        let env = |s: &str| s.parse::<Envelope>().unwrap();
        make_generator(
            |n| BlockMatrix::real_scalar(1.0 - 1.0 / n as f64)?.with_normal(),
            Some(
                TailCertificate::new(1)
                    .with_upper(env("1"))
                    .with_lower(env("1 - 1/n"))
                    .with_eigen_track(env("1 - 1/n"), env("0")),
            ),
            MeasureSpec::Counting,
        )
        .unwrap()
    }

    #[test]
    fn union_of_two_scalars_is_exact() {
        let r = point_spectrum(&scalars(&[2.0, 3.0]), 5, &Default::default()).unwrap();
        assert_eq!(r.values(), vec![c(2.0, 0.0), c(3.0, 0.0)]);
        assert_eq!(r.completeness, Completeness::Exact);
        let r = point_spectrum(&scalars(&[2.0, 3.0]), 1, &Default::default()).unwrap();
        assert_eq!(r.completeness, Completeness::Truncated);
    }

    #[test]
    fn nilpotent_union_is_zero_with_full_provenance() {
        let r = point_spectrum(&nilpotents(&[1.0, 2.0, 3.0]), 3, &Default::default()).unwrap();
        assert_eq!(r.eigenvalues.len(), 1);
        assert!(r.eigenvalues[0].value.norm() < 1e-12);
        assert_eq!(r.eigenvalues[0].blocks(), BTreeSet::from([1, 2, 3]));
        assert_eq!(r.multiset().len(), 6);
    }

    #[test]
    fn minimal_support_drops_duplicates() {
        let f = scalars(&[1.0, 1.0, 2.0]);
        assert_eq!(minimal_support(&f, 3, &Default::default()).unwrap(), vec![1, 3]);
        let f = nilpotents(&[1.0, 2.0, 3.0, 4.0, 5.0]);
        assert_eq!(minimal_support(&f, 5, &Default::default()).unwrap(), vec![1]);
    }

    #[test]
    fn minimal_support_prunes_superseded_blocks() {
        // greedy keeps [1] and diag(1, 2); the second alone covers both
        let f = BlockFamily::explicit(
            vec![
                BlockMatrix::real_scalar(1.0).unwrap(),
                BlockMatrix::diagonal(&[c(1.0, 0.0), c(2.0, 0.0)]).unwrap(),
            ],
            MeasureSpec::Counting,
        )
        .unwrap();
        assert_eq!(minimal_support(&f, 2, &Default::default()).unwrap(), vec![2]);
    }

    #[test]
    fn explicit_resolvent_sup_is_the_block_max() {
        let f = BlockFamily::explicit(
            vec![
                BlockMatrix::real_scalar(0.0).unwrap(),
                BlockMatrix::from_real_rows(&[vec![0.0, 0.0], vec![3.0, 0.0]]).unwrap(),
            ],
            MeasureSpec::Counting,
        )
        .unwrap();
        let ResolventSup::Finite { sup, argmax_block, .. } =
            resolvent_sup(&f, c(2.0, 0.0), 1, &Default::default()).unwrap()
        else {
            panic!()
        };
        // (A - 2)^{-1} = -(I/2 + A/4): top singular value of [[1/2,0],[3/4,1/2]]
        let nil = (0.75 + (0.5625f64 + 1.0).sqrt()) / 2.0;
        assert!((sup.hi - nil).abs() < 1e-12);
        assert_eq!(argmax_block, 2);
    }

    #[test]
    fn eigenvalue_tau_is_rejected() {
        let err = resolvent_sup(&scalars(&[2.0, 3.0]), c(3.0, 0.0), 2, &Default::default());
        assert!(matches!(err, Err(SpectrumError::PointSpectrum { block: 2, .. })));
    }

    #[test]
    fn accumulating_diagonal() {
        let f = accumulating();
        let opts = SpectrumOptions::default();
        match classify_point(&f, c(1.0, 0.0), 50, &opts).unwrap() {
            PointClass::Continuous { witness, .. } => {
                for w in witness {
                    assert!((w.norm - w.block as f64).abs() < 1e-9 * w.block as f64);
                }
            }
            other => panic!("{other:?}"),
        }
        match classify_point(&f, c(1.5, 0.0), 50, &opts).unwrap() {
            PointClass::Resolvent { sup } => assert!(sup.hi <= 2.0 + 1e-12 && sup.lo > 1.9),
            other => panic!("{other:?}"),
        }
        assert_eq!(
            classify_point(&f, c(1.0 - 1.0 / 7.0, 0.0), 50, &opts).unwrap(),
            PointClass::Point {
                block: 7,
                eigenvalue: c(1.0 - 1.0 / 7.0, 0.0)
            }
        );
    }

    #[test]
    fn neumann_tail_for_harmonic_scalars() {
        let f = make_generator(
            |n| BlockMatrix::real_scalar(1.0 / n as f64),
            Some(TailCertificate::new(1).with_upper("1/n".parse().unwrap())),
            MeasureSpec::Counting,
        )
        .unwrap();
        let ResolventSup::Finite { sup, tail_bound, .. } =
            resolvent_sup(&f, c(5.0, 0.0), 10, &Default::default()).unwrap()
        else {
            panic!()
        };
        assert_eq!(sup.lo, 0.25);
        assert!(sup.hi <= 0.25 + 1e-12);
        assert!(tail_bound.unwrap() < 0.25);
    }

    #[test]
    fn missing_certificate_gives_unknown() {
        let f = make_generator(
            |n| BlockMatrix::real_scalar(n as f64),
            None,
            MeasureSpec::Counting,
        )
        .unwrap();
        assert!(matches!(
            classify_point(&f, c(0.5, 0.5), 10, &Default::default()).unwrap(),
            PointClass::Unknown { inspected: 10, .. }
        ));
    }

    #[test]
    fn false_track_is_reported() {
        let f = make_generator(
            |n| BlockMatrix::real_scalar(1.0 / n as f64),
            Some(
                TailCertificate::new(1)
                    .with_eigen_track("1 - 1/n".parse().unwrap(), "0".parse().unwrap()),
            ),
            MeasureSpec::Counting,
        )
        .unwrap();
        assert!(matches!(
            resolvent_sup(&f, c(2.0, 0.0), 5, &Default::default()),
            Err(SpectrumError::TrackMismatch { block: 1, .. })
        ));
    }
}
