//! Dense block-diagonal assembly of a truncation and the brute-force
//! cross-checks run against it.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::family::{BlockFamily, BlockMatrix, FamilyError};
use crate::kernel::{self, KernelError, ResolventNorm};

pub const DEFAULT_DIM_CAP: usize = 2000;
pub const DIM_CAP_ENV: &str = "BLOCKSPEC_DIM_CAP";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("assembled dimension {required} exceeds the cap of {allowed}")]
    DimensionCap { required: usize, allowed: usize },
    #[error(transparent)]
    Family(#[from] FamilyError),
}

/// The cap from `BLOCKSPEC_DIM_CAP`, else [`DEFAULT_DIM_CAP`].
pub fn dim_cap() -> usize {
    std::env::var(DIM_CAP_ENV)
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .unwrap_or(DEFAULT_DIM_CAP)
}

/// `⊕_{n<=N} A_n` as one dense matrix.
pub fn assemble(family: &BlockFamily, n: usize) -> Result<BlockMatrix, OracleError> {
    assemble_with_cap(family, n, dim_cap())
}

pub fn assemble_with_cap(
    family: &BlockFamily,
    n: usize,
    cap: usize,
) -> Result<BlockMatrix, OracleError> {
    let blocks = family.truncate(n)?.blocks;
    assemble_blocks(&blocks, cap)
}

fn assemble_blocks(blocks: &[BlockMatrix], cap: usize) -> Result<BlockMatrix, OracleError> {
    let required: usize = blocks.iter().map(|b| b.dim()).sum();
    if required > cap {
        return Err(OracleError::DimensionCap {
            required,
            allowed: cap,
        });
    }
    let mut m = DMatrix::zeros(required, required);
    let mut at = 0;
    for b in blocks {
        let d = b.dim();
        m.view_mut((at, at), (d, d)).copy_from(b.entries());
        at += d;
    }
    Ok(BlockMatrix::new(m).expect("assembled from valid blocks"))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleOptions {
    pub powers: usize,
    /// Absolute eigenvalue/singular value tolerance, times `max(1, ||A||)`.
    pub spectral_tol: f64,
    pub resolvent_rel_tol: f64,
    pub power_rel_tol: f64,
    pub dim_cap: usize,
}

impl Default for OracleOptions {
    fn default() -> Self {
        OracleOptions {
            powers: 10,
            spectral_tol: 1e-8,
            resolvent_rel_tol: 1e-6,
            power_rel_tol: 1e-6,
            dim_cap: dim_cap(),
        }
    }
}

/// Values from both sides of a check, kept when it fails.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CheckValues {
    Real { blocks: Vec<f64>, assembled: Vec<f64> },
    Complex {
        blocks: Vec<Complex64>,
        assembled: Vec<Complex64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleCheck {
    pub name: String,
    pub passed: bool,
    pub deviation: f64,
    pub tolerance: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<CheckValues>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub checks: Vec<OracleCheck>,
    pub assembled_dim: usize,
}

impl OracleReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&OracleCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

fn finish(name: &str, deviation: f64, tolerance: f64, values: CheckValues) -> OracleCheck {
    let passed = deviation <= tolerance;
    OracleCheck {
        name: name.to_string(),
        passed,
        deviation,
        tolerance,
        values: (!passed).then_some(values),
        error: None,
    }
}

fn failed(name: &str, err: KernelError) -> OracleCheck {
    OracleCheck {
        name: name.to_string(),
        passed: false,
        deviation: f64::INFINITY,
        tolerance: 0.0,
        values: None,
        error: Some(err.to_string()),
    }
}

/// Largest distance in a greedy nearest-neighbour matching of two
/// multisets (infinite on a size mismatch).
pub fn multiset_distance(a: &[Complex64], b: &[Complex64]) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    let key = |z: &Complex64| (z.re, z.im);
    let mut a = a.to_vec();
    a.sort_by(|x, y| key(x).partial_cmp(&key(y)).unwrap());
    let mut used = vec![false; b.len()];
    let mut worst = 0.0f64;
    for x in &a {
        let (j, d) = b
            .iter()
            .enumerate()
            .filter(|(j, _)| !used[*j])
            .map(|(j, y)| (j, (*x - *y).norm()))
            .min_by(|p, q| p.1.total_cmp(&q.1))
            .expect("equal lengths");
        used[j] = true;
        worst = worst.max(d);
    }
    worst
}

fn sorted_desc(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(|x, y| y.total_cmp(x));
    v
}

/// Probe points: 8 on a ring well outside the spectrum, plus midpoints of
/// the 4 widest gaps between sorted real parts of the eigenvalues, kept
/// only when clear of the spectrum.
pub fn resolvent_probes(eigs: &[Complex64], norm: f64) -> Vec<Complex64> {
    let radius = 2.0 * (1.0 + norm);
    let mut probes: Vec<Complex64> = (0..8)
        .map(|k| Complex64::from_polar(radius, 2.0 * std::f64::consts::PI * k as f64 / 8.0 + 0.1))
        .collect();
    let mut re: Vec<f64> = eigs.iter().map(|z| z.re).collect();
    re.sort_by(f64::total_cmp);
    let mut gaps: Vec<(f64, f64)> = re
        .windows(2)
        .map(|w| (w[1] - w[0], (w[0] + w[1]) / 2.0))
        .collect();
    gaps.sort_by(|x, y| y.0.total_cmp(&x.0).then(x.1.total_cmp(&y.1)));
    let clearance = 1e-2 * (1.0 + norm);
    for (_, mid) in gaps.into_iter().take(4) {
        let tau = Complex64::new(mid, 0.0);
        if eigs.iter().all(|z| (*z - tau).norm() > clearance) {
            probes.push(tau);
        }
    }
    probes
}

/// Cross-validates block-wise results against the assembled truncation.
pub fn oracle_check(
    family: &BlockFamily,
    n: usize,
    opts: &OracleOptions,
) -> Result<OracleReport, OracleError> {
    let blocks = family.truncate(n)?.blocks;
    let assembled = assemble_blocks(&blocks, opts.dim_cap)?;
    let big_norm = kernel::spectral_norm(&assembled).unwrap_or(f64::NAN);
    let scale = big_norm.max(1.0);
    let mut checks = Vec::with_capacity(4);

    // eigenvalue union
    let eig = (|| -> Result<_, KernelError> {
        let mut union = Vec::new();
        for b in &blocks {
            union.extend(kernel::eigenvalues(b)?.values);
        }
        Ok((union, kernel::eigenvalues(&assembled)?.values))
    })();
    let union = match eig {
        Ok((union, whole)) => {
            let tol = opts.spectral_tol * scale;
            let dev = multiset_distance(&union, &whole);
            checks.push(finish(
                "eigenvalue_union",
                dev,
                tol,
                CheckValues::Complex {
                    blocks: union.clone(),
                    assembled: whole,
                },
            ));
            Some(union)
        }
        Err(e) => {
            checks.push(failed("eigenvalue_union", e));
            None
        }
    };

    // singular value merge
    let sv = (|| -> Result<_, KernelError> {
        let mut merged = Vec::new();
        for b in &blocks {
            merged.extend(kernel::singular_values(b)?.values);
        }
        Ok((sorted_desc(merged), kernel::singular_values(&assembled)?.values))
    })();
    match sv {
        Ok((merged, whole)) => {
            let whole = sorted_desc(whole);
            let dev = if merged.len() == whole.len() {
                merged
                    .iter()
                    .zip(&whole)
                    .map(|(x, y)| (x - y).abs())
                    .fold(0.0, f64::max)
            } else {
                f64::INFINITY
            };
            checks.push(finish(
                "singular_merge",
                dev,
                opts.spectral_tol * scale,
                CheckValues::Real {
                    blocks: merged,
                    assembled: whole,
                },
            ));
        }
        Err(e) => checks.push(failed("singular_merge", e)),
    }

    // resolvent max identity
    let probes = resolvent_probes(union.as_deref().unwrap_or(&[]), big_norm);
    let res = (|| -> Result<_, KernelError> {
        let (mut lhs, mut rhs) = (Vec::new(), Vec::new());
        for &tau in &probes {
            let mut best = 0.0f64;
            for b in &blocks {
                best = best.max(
                    kernel::resolvent_norm(b, tau)?
                        .finite()
                        .unwrap_or(f64::INFINITY),
                );
            }
            lhs.push(best);
            rhs.push(match kernel::resolvent_norm(&assembled, tau)? {
                ResolventNorm::Finite(v) => v,
                ResolventNorm::Singular => f64::INFINITY,
            });
        }
        Ok((lhs, rhs))
    })();
    match res {
        Ok((lhs, rhs)) => {
            let dev = lhs
                .iter()
                .zip(&rhs)
                .map(|(x, y)| relative(*x, *y))
                .fold(0.0, f64::max);
            checks.push(finish(
                "resolvent_max",
                dev,
                opts.resolvent_rel_tol,
                CheckValues::Real {
                    blocks: lhs,
                    assembled: rhs,
                },
            ));
        }
        Err(e) => checks.push(failed("resolvent_max", e)),
    }

    // sup-sup interchange over powers
    let pw = (|| -> Result<_, KernelError> {
        let mut per_block = 0.0f64;
        for b in &blocks {
            per_block = kernel::power_norms(b, opts.powers)?
                .norms
                .iter()
                .copied()
                .fold(per_block, f64::max);
        }
        let whole = kernel::power_norms(&assembled, opts.powers)?
            .norms
            .iter()
            .copied()
            .fold(0.0, f64::max);
        Ok((per_block, whole))
    })();
    match pw {
        Ok((per_block, whole)) => checks.push(finish(
            "power_interchange",
            relative(per_block, whole),
            opts.power_rel_tol,
            CheckValues::Real {
                blocks: vec![per_block],
                assembled: vec![whole],
            },
        )),
        Err(e) => checks.push(failed("power_interchange", e)),
    }

    Ok(OracleReport {
        checks,
        assembled_dim: assembled.dim(),
    })
}

fn relative(x: f64, y: f64) -> f64 {
    if x == y {
        return 0.0;
    }
    (x - y).abs() / x.abs().max(y.abs()).max(f64::MIN_POSITIVE)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::family::MeasureSpec;
    use crate::fixtures::nilpotent2;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn scalars_assemble_to_a_diagonal() {
        let f = BlockFamily::explicit(
            vec![BlockMatrix::real_scalar(2.0).unwrap(), BlockMatrix::real_scalar(3.0).unwrap()],
            MeasureSpec::Counting,
        )
        .unwrap();
        let a = assemble(&f, 2).unwrap();
        assert_eq!(a.to_rows(), vec![vec![[2.0, 0.0], [0.0, 0.0]], vec![[0.0, 0.0], [3.0, 0.0]]]);
    }

    #[test]
    fn nilpotent_family_passes_every_check() {
        let f = nilpotent2(&[1.0, 2.0, 3.0]).unwrap();
        let r = oracle_check(&f, 3, &OracleOptions::default()).unwrap();
        assert_eq!(r.assembled_dim, 6);
        assert_eq!(r.checks.len(), 4);
        assert!(r.passed(), "{r:#?}");
    }

    #[test]
    fn cap_is_enforced() {
        let f = nilpotent2(&[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(
            assemble_with_cap(&f, 3, 5).unwrap_err(),
            OracleError::DimensionCap {
                required: 6,
                allowed: 5
            }
        );
    }

    #[test]
    fn multiset_matching() {
        assert_eq!(multiset_distance(&[c(1.0), c(2.0)], &[c(2.0), c(1.0)]), 0.0);
        assert!((multiset_distance(&[c(1.0), c(1.0)], &[c(1.0), c(1.5)]) - 0.5).abs() < 1e-15);
        assert!(multiset_distance(&[c(1.0)], &[]).is_infinite());
    }

    #[test]
    fn probes_avoid_the_spectrum() {
        let p = resolvent_probes(&[c(2.0), c(3.0)], 3.0);
        assert!(p.contains(&c(2.5)));
        assert_eq!(p.len(), 9);
    }
}
