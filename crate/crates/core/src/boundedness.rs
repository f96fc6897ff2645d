//! Power bounds `M_w(T) = sup_{m>=0} ||T^m||` and polynomial bounds
//! `M_p(T) = sup{ ||p(T)|| : ||p||_inf <= 1 }` for blocks and families.
//!
//! `A = ⊕ A_n` is power bounded iff every block is and `sup_n M_w(A_n)` is
//! finite, and likewise for polynomial boundedness with `M_p`.

use std::f64::consts::{E, PI};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::envelope::{Envelope, Limit};
use crate::family::{BlockFamily, BlockMatrix, FamilyError};
use crate::interval::Interval;
use crate::kernel::{self, KernelError};
use crate::polynomial::{poly_sup_norm, Polynomial};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BoundError {
    #[error("max power must be >= 1")]
    ZeroPowers,
    #[error("sample count must be >= 1")]
    ZeroSamples,
    #[error(transparent)]
    Family(#[from] FamilyError),
    #[error("block {block}: {source}")]
    Kernel { block: usize, source: KernelError },
}

/// Consecutive ratios needed by the geometric tail rule.
const GEOMETRIC_RUN: usize = 5;
const GEOMETRIC_RATIO: f64 = 0.9;
const KREISS_RADII: usize = 32;
const KREISS_ANGLES: usize = 64;
const CLUSTER_TOL: f64 = 1e-6;
const RANK_TOL: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerOptions {
    pub max_power: usize,
    /// Spectral radius tolerance, relative to `max(1, ||A||)`.
    pub rel_tol: f64,
}

impl Default for PowerOptions {
    fn default() -> Self {
        PowerOptions {
            max_power: 64,
            rel_tol: 1e-8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PowerMethod {
    /// `A^order = 0`; the maximum over earlier powers is exact.
    Nilpotent { order: usize },
    /// `||A^power|| <= 1`, so by submultiplicativity no later power exceeds
    /// the earlier ones.
    Contraction { power: usize },
    /// Norm ratios stayed below `ratio` for a run ending at `from`.
    Geometric { from: usize, ratio: f64 },
    /// Sampled Kreiss constant; `hi = e * dim * constant`.
    Kreiss { constant: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PowerWitness {
    Eigenvalue { value: Complex64, modulus: f64 },
    /// Unimodular eigenvalue whose geometric multiplicity (numerical rank
    /// test) is below its algebraic multiplicity.
    DefectiveUnimodular {
        value: Complex64,
        algebraic: usize,
        geometric: usize,
    },
    Diverged { step: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum BlockPowerBound {
    Bounded {
        bound: Interval,
        method: PowerMethod,
        /// Set when `hi` rests on sampling rather than a certificate.
        heuristic: bool,
    },
    Unbounded { witness: PowerWitness, heuristic: bool },
}

impl BlockPowerBound {
    pub fn interval(&self) -> Option<Interval> {
        match self {
            BlockPowerBound::Bounded { bound, .. } => Some(*bound),
            BlockPowerBound::Unbounded { .. } => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundWitness {
    pub block: usize,
    pub lower: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum FamilyBound {
    Bounded { bound: Interval },
    Unbounded {
        /// Per-block lower bounds along the inspected indices.
        witness: Vec<BoundWitness>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        unbounded_block: Option<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        lower_envelope: Option<Envelope>,
    },
    Unknown { inspected: usize, reason: UnknownReason },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnknownReason {
    NoCertificate,
    TailAboveOne,
    NoUpperBound { block: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerBoundReport {
    pub per_block: Vec<(usize, BlockPowerBound)>,
    pub family: FamilyBound,
}

fn kerr(block: usize) -> impl Fn(KernelError) -> BoundError {
    move |source| BoundError::Kernel { block, source }
}

/// Sampled Kreiss constant `max (|z| - 1) ||(z - A)^{-1}||` over
/// `1 < |z| <= 2`.
fn kreiss_constant(a: &BlockMatrix) -> Result<f64, KernelError> {
    let mut best = 0.0f64;
    for i in 1..=KREISS_RADII {
        let r = (2f64.ln() * i as f64 / KREISS_RADII as f64).exp();
        for j in 0..KREISS_ANGLES {
            let z = Complex64::from_polar(r, 2.0 * PI * j as f64 / KREISS_ANGLES as f64);
            let smin = kernel::singular_values_of(&kernel::shift(a.entries(), z))?.smallest();
            best = best.max((r - 1.0) / smin);
        }
    }
    Ok(best)
}

/// Algebraic and geometric multiplicity of `value` (clustered eigenvalues,
/// numerical rank of `A - value I`).
fn multiplicities(
    a: &BlockMatrix,
    eig: &[Complex64],
    value: Complex64,
    norm: f64,
) -> Result<(usize, usize), KernelError> {
    let algebraic = eig.iter().filter(|v| (**v - value).norm() <= CLUSTER_TOL).count();
    let sv = kernel::singular_values_of(&kernel::shift(a.entries(), value))?;
    let tol = RANK_TOL * norm.max(1.0);
    let geometric = sv.values.iter().filter(|s| **s <= tol).count();
    Ok((algebraic, geometric))
}

/// `M_w` of one block.
pub fn power_bound_block(a: &BlockMatrix, opts: &PowerOptions) -> Result<BlockPowerBound, KernelError> {
    let max_power = opts.max_power.max(1);
    let pw = kernel::power_norms(a, max_power)?;
    if let Some(step) = pw.diverged_at {
        return Ok(BlockPowerBound::Unbounded {
            witness: PowerWitness::Diverged { step },
            heuristic: false,
        });
    }
    let norms = &pw.norms;
    let prefix_max = |m: usize| norms[..m].iter().copied().fold(1.0, f64::max);

    if let Some(order) = kernel::nilpotency_order(a) {
        let v = prefix_max((order - 1).min(norms.len()));
        return Ok(BlockPowerBound::Bounded {
            bound: Interval::point(v),
            method: PowerMethod::Nilpotent { order },
            heuristic: false,
        });
    }

    let norm = norms[0];
    let tol = opts.rel_tol * norm.max(1.0);
    let eig = kernel::eigenvalues(a)?;
    let rho = eig.spectral_radius();
    if rho > 1.0 + tol {
        let value = eig
            .values
            .iter()
            .copied()
            .max_by(|x, y| x.norm().total_cmp(&y.norm()))
            .unwrap_or_default();
        return Ok(BlockPowerBound::Unbounded {
            witness: PowerWitness::Eigenvalue {
                value,
                modulus: value.norm(),
            },
            heuristic: false,
        });
    }

    if let Some(m0) = norms.iter().position(|&x| x <= 1.0) {
        return Ok(BlockPowerBound::Bounded {
            bound: Interval::point(prefix_max(m0)),
            method: PowerMethod::Contraction { power: m0 + 1 },
            heuristic: false,
        });
    }

    if rho < 1.0 - tol {
        let mut run = 0;
        for m in 1..norms.len() {
            if norms[m] <= GEOMETRIC_RATIO * norms[m - 1] {
                run += 1;
                if run >= GEOMETRIC_RUN {
                    let lo = prefix_max(norms.len());
                    let hi = lo.max(norms[m] / (1.0 - GEOMETRIC_RATIO));
                    return Ok(BlockPowerBound::Bounded {
                        bound: Interval::new(lo, hi),
                        method: PowerMethod::Geometric {
                            from: m + 1,
                            ratio: GEOMETRIC_RATIO,
                        },
                        heuristic: true,
                    });
                }
            } else {
                run = 0;
            }
        }
    } else {
        for &v in eig.values.iter().filter(|v| (v.norm() - 1.0).abs() <= tol) {
            let (algebraic, geometric) = multiplicities(a, &eig.values, v, norm)?;
            if geometric < algebraic {
                return Ok(BlockPowerBound::Unbounded {
                    witness: PowerWitness::DefectiveUnimodular {
                        value: v,
                        algebraic,
                        geometric,
                    },
                    heuristic: true,
                });
            }
        }
    }

    let k = kreiss_constant(a)?;
    let lo = prefix_max(norms.len()).max(k);
    Ok(BlockPowerBound::Bounded {
        bound: Interval::new(lo, (E * a.dim() as f64 * k).max(lo)),
        method: PowerMethod::Kreiss { constant: k },
        heuristic: true,
    })
}

fn diverging_lower(family: &BlockFamily) -> Option<&Envelope> {
    let l = family.tail()?.lower.as_ref()?;
    (l.limit() == Some(Limit::PosInfinity)).then_some(l)
}

/// Indices 1, 2, 4, ... and the last one.
fn geometric_indices(count: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = std::iter::successors(Some(1usize), |k| Some(k * 2))
        .take_while(|k| *k <= count)
        .collect();
    if count > 0 && idx.last() != Some(&count) {
        idx.push(count);
    }
    idx
}

/// Family verdict from per-block lower/upper bounds (`hi = None` means the
/// block has no upper bound; `unbounded` marks a block proven unbounded).
fn family_verdict(
    family: &BlockFamily,
    count: usize,
    lows: &[f64],
    his: &[Option<f64>],
    unbounded: Option<usize>,
) -> FamilyBound {
    let witness = || {
        geometric_indices(count)
            .into_iter()
            .map(|block| BoundWitness {
                block,
                lower: lows[block - 1],
            })
            .collect()
    };
    if let Some(block) = unbounded {
        return FamilyBound::Unbounded {
            witness: witness(),
            unbounded_block: Some(block),
            lower_envelope: None,
        };
    }
    if let Some(l) = diverging_lower(family) {
        return FamilyBound::Unbounded {
            witness: witness(),
            unbounded_block: None,
            lower_envelope: Some(l.clone()),
        };
    }
    if let Some(i) = his.iter().position(|h| h.is_none()) {
        return FamilyBound::Unknown {
            inspected: count,
            reason: UnknownReason::NoUpperBound { block: i + 1 },
        };
    }
    let lo = lows.iter().copied().fold(1.0, f64::max);
    let hi = his.iter().flatten().copied().fold(lo, f64::max);
    if !family.is_explicit() {
        let Some(b) = family.tail().and_then(|t| t.upper.as_ref().map(|b| (t, b))) else {
            return FamilyBound::Unknown {
                inspected: count,
                reason: UnknownReason::NoCertificate,
            };
        };
        let next = (count + 1).max(b.0.start);
        if b.1.eval(next as f64) > 1.0 {
            return FamilyBound::Unknown {
                inspected: count,
                reason: UnknownReason::TailAboveOne,
            };
        }
    }
    FamilyBound::Bounded {
        bound: Interval::new(lo, hi),
    }
}

/// Family power bound: explicit families are inspected in full, generators
/// up to `n` blocks plus the tail certificate (contractive tail blocks
/// have `M_w = 1`).
pub fn power_bound_family(
    family: &BlockFamily,
    n: usize,
    opts: &PowerOptions,
) -> Result<PowerBoundReport, BoundError> {
    if opts.max_power == 0 {
        return Err(BoundError::ZeroPowers);
    }
    let count = family.decision_count(n);
    let mut per_block = Vec::with_capacity(count);
    let (mut lows, mut his) = (Vec::new(), Vec::new());
    let mut unbounded = None;
    for i in 1..=count {
        let b = family.block(i)?;
        let r = power_bound_block(&b, opts).map_err(kerr(i))?;
        match &r {
            BlockPowerBound::Bounded { bound, .. } => {
                lows.push(bound.lo);
                his.push(Some(bound.hi));
            }
            BlockPowerBound::Unbounded { .. } => {
                lows.push(kernel::spectral_norm(&b).map_err(kerr(i))?.max(1.0));
                his.push(None);
                unbounded.get_or_insert(i);
            }
        }
        per_block.push((i, r));
    }
    let family = family_verdict(family, count, &lows, &his, unbounded);
    Ok(PowerBoundReport { per_block, family })
}

// ------------------------------------------------------- polynomial bounds

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolyOptions {
    /// Random trial polynomials per block.
    pub samples: usize,
    pub seed: u64,
    pub power: PowerOptions,
}

impl Default for PolyOptions {
    fn default() -> Self {
        PolyOptions {
            samples: 64,
            seed: 0,
            power: PowerOptions::default(),
        }
    }
}

const MAX_RANDOM_DEGREE: usize = 16;
const WIENER_GRID: usize = 4096;
const CAUCHY_RADII: usize = 16;
const CAUCHY_ANGLES: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TrialSource {
    Constant,
    Monomial { power: usize },
    /// Draw `draw` of `ChaCha8Rng::seed_from_u64(seed)` on stream `stream`.
    Random { seed: u64, stream: u64, draw: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolyWitness {
    pub source: TrialSource,
    pub coefficients: Vec<Complex64>,
    /// `||p(A)|| / hi(||p||_inf)`.
    pub ratio: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PolyUpper {
    /// `||A|| <= 1`: von Neumann's inequality.
    VonNeumann,
    /// `A^2 = 0`: `|p'(0)| <= 1 - |p(0)|^2` bounds `||p(0) I + p'(0) A||`.
    SquareZero,
    /// Cauchy integral over `|z| = radius` with a Lipschitz-certified
    /// lower bound on `s_min(z - A)`.
    Cauchy { radius: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonomialNorm {
    pub power: usize,
    pub norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum BlockPolyBound {
    Bracket {
        lo: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        hi: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        upper: Option<PolyUpper>,
        witness: PolyWitness,
    },
    /// `||z^m||_inf = 1` while `||A^m||` grows without bound.
    Unbounded {
        monomials: Vec<MonomialNorm>,
        cause: PowerWitness,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolyBoundReport {
    pub per_block: Vec<(usize, BlockPolyBound)>,
    pub family: FamilyBound,
    pub seed: u64,
}

/// Trial polynomial `draw` on a given stream.
pub fn random_trial(seed: u64, stream: u64, draw: usize) -> Polynomial {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let mut out = Polynomial::constant(Complex64::new(1.0, 0.0));
    for _ in 0..=draw {
        let degree = rng.gen_range(1..=MAX_RANDOM_DEGREE);
        let coefficients = (0..=degree)
            .map(|_| Complex64::new(rng.gen_range(-1.0..=1.0), rng.gen_range(-1.0..=1.0)))
            .collect();
        out = Polynomial::new(coefficients).expect("finite draws");
    }
    out
}

fn trial_ratio(a: &BlockMatrix, p: &Polynomial) -> Result<f64, KernelError> {
    let sup = match p.single_term_norm() {
        Some(v) => v,
        None => poly_sup_norm(p, 256 * (p.degree() + 1)).expect("grid is large enough").hi,
    };
    if sup == 0.0 {
        return Ok(0.0);
    }
    Ok(kernel::spectral_norm(&kernel::apply_polynomial(a, p)?)? / sup)
}

/// `max_{0<=x<=1} (c + sqrt(c^2 + 4x^2)) / 2` with `c = (1 - x^2) ||A||`,
/// plus the grid's Lipschitz slack.
fn square_zero_bound(norm: f64) -> f64 {
    let f = |x: f64| {
        let c = (1.0 - x * x) * norm;
        (c + (c * c + 4.0 * x * x).sqrt()) / 2.0
    };
    let grid_max = (0..=WIENER_GRID)
        .map(|i| f(i as f64 / WIENER_GRID as f64))
        .fold(0.0, f64::max);
    (grid_max + (norm + 1.0) / (2.0 * WIENER_GRID as f64)).min(1.0 + norm)
}

/// `min_r r / min_{|z|=r} s_min(z - A)` over radii in `(rho, 1]`.
fn cauchy_bound(a: &BlockMatrix, rho: f64) -> Result<Option<(f64, f64)>, KernelError> {
    let mut best: Option<(f64, f64)> = None;
    for j in 1..=CAUCHY_RADII {
        let r = rho + (1.0 - rho) * j as f64 / CAUCHY_RADII as f64;
        let mut smin = f64::INFINITY;
        for k in 0..CAUCHY_ANGLES {
            let z = Complex64::from_polar(r, 2.0 * PI * k as f64 / CAUCHY_ANGLES as f64);
            smin = smin.min(kernel::singular_values_of(&kernel::shift(a.entries(), z))?.smallest());
        }
        // s_min(z - A) is 1-Lipschitz in z; samples are pi r / G apart
        let certified = smin - PI * r / CAUCHY_ANGLES as f64;
        if certified > 0.0 {
            let bound = r / certified;
            if best.is_none_or(|(b, _)| bound < b) {
                best = Some((bound, r));
            }
        }
    }
    Ok(best)
}

/// `M_p` of one block; `stream` selects the random trial stream.
pub fn poly_bound_block(
    a: &BlockMatrix,
    opts: &PolyOptions,
    stream: u64,
) -> Result<BlockPolyBound, KernelError> {
    let power = power_bound_block(a, &opts.power)?;
    let pw = kernel::power_norms(a, opts.power.max_power.max(4 * a.dim()))?;
    if let BlockPowerBound::Unbounded { witness, .. } = power {
        let monomials = geometric_indices(pw.norms.len())
            .into_iter()
            .map(|m| MonomialNorm {
                power: m,
                norm: pw.norms[m - 1],
            })
            .collect();
        return Ok(BlockPolyBound::Unbounded {
            monomials,
            cause: witness,
        });
    }

    let one = Complex64::new(1.0, 0.0);
    let mut witness = PolyWitness {
        source: TrialSource::Constant,
        coefficients: vec![one],
        ratio: 1.0,
    };
    for (i, &v) in pw.norms.iter().take(4 * a.dim()).enumerate() {
        if v > witness.ratio {
            witness = PolyWitness {
                source: TrialSource::Monomial { power: i + 1 },
                coefficients: Polynomial::monomial(i + 1).coefficients().to_vec(),
                ratio: v,
            };
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    rng.set_stream(stream);
    for draw in 0..opts.samples {
        let degree = rng.gen_range(1..=MAX_RANDOM_DEGREE);
        let coefficients: Vec<Complex64> = (0..=degree)
            .map(|_| Complex64::new(rng.gen_range(-1.0..=1.0), rng.gen_range(-1.0..=1.0)))
            .collect();
        let p = Polynomial::new(coefficients).expect("finite draws");
        let ratio = trial_ratio(a, &p)?;
        if ratio > witness.ratio {
            witness = PolyWitness {
                source: TrialSource::Random {
                    seed: opts.seed,
                    stream,
                    draw,
                },
                coefficients: p.coefficients().to_vec(),
                ratio,
            };
        }
    }

    let norm = pw.norms.first().copied().unwrap_or(0.0);
    let mut upper: Option<(f64, PolyUpper)> = None;
    let mut offer = |hi: f64, how: PolyUpper| {
        if upper.is_none_or(|(h, _)| hi < h) {
            upper = Some((hi, how));
        }
    };
    if norm <= 1.0 {
        offer(1.0, PolyUpper::VonNeumann);
    } else {
        if kernel::nilpotency_order(a) == Some(2) {
            offer(square_zero_bound(norm), PolyUpper::SquareZero);
        }
        let rho = kernel::eigenvalues(a)?.spectral_radius();
        if rho < 1.0 - opts.power.rel_tol * norm.max(1.0) {
            if let Some((hi, radius)) = cauchy_bound(a, rho)? {
                offer(hi.max(1.0), PolyUpper::Cauchy { radius });
            }
        }
    }
    let mut lo = witness.ratio;
    if let Some((hi, _)) = upper {
        // rounding in ||p(A)|| may push a sampled ratio a hair above a
        // closed-form upper bound
        if lo > hi && lo - hi <= 1e-10 * hi {
            lo = hi;
        }
    }
    Ok(BlockPolyBound::Bracket {
        lo,
        hi: upper.map(|u| u.0),
        upper: upper.map(|u| u.1),
        witness,
    })
}

/// Family polynomial bound; block `n` draws its trials from stream `n`.
pub fn poly_bound_family(
    family: &BlockFamily,
    n: usize,
    opts: &PolyOptions,
) -> Result<PolyBoundReport, BoundError> {
    if opts.samples == 0 {
        return Err(BoundError::ZeroSamples);
    }
    let count = family.decision_count(n);
    let mut per_block = Vec::with_capacity(count);
    let (mut lows, mut his) = (Vec::new(), Vec::new());
    let mut unbounded = None;
    for i in 1..=count {
        let b = family.block(i)?;
        let r = poly_bound_block(&b, opts, i as u64).map_err(kerr(i))?;
        match &r {
            BlockPolyBound::Bracket { lo, hi, .. } => {
                lows.push(*lo);
                his.push(*hi);
            }
            BlockPolyBound::Unbounded { .. } => {
                lows.push(kernel::spectral_norm(&b).map_err(kerr(i))?.max(1.0));
                his.push(None);
                unbounded.get_or_insert(i);
            }
        }
        per_block.push((i, r));
    }
    let family = family_verdict(family, count, &lows, &his, unbounded);
    Ok(PolyBoundReport {
        per_block,
        family,
        seed: opts.seed,
    })
}
