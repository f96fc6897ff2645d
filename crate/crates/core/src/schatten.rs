//! Compactness, merged singular values and Schatten class membership.
//!
//! For `A = ⊕ A_n` the singular values of `A` are the union (with
//! multiplicity) of the block singular values, so `A ∈ C_p` iff
//! `Σ_n Σ_q s_q(A_n)^p < ∞`, and `A` is compact iff `||A_n|| → 0`.

use std::cmp::Ordering;
use std::collections::{BTreeSet, BinaryHeap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::envelope::{lower_tail_integral, upper_tail_integral, Envelope, Expr, Limit};
use crate::family::{BlockFamily, FamilyError, TailCertificate};
use crate::interval::Interval;
use crate::kernel::{self, KernelError, SingularList};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SchattenError {
    #[error("Schatten exponent p = {0} must be >= 1")]
    Exponent(f64),
    #[error("K must be >= 1")]
    ZeroK,
    #[error("exclusion index 0 is invalid; blocks are numbered from 1")]
    ZeroExclusion,
    #[error(transparent)]
    Family(#[from] FamilyError),
    #[error("block {block}: {source}")]
    Kernel { block: usize, source: KernelError },
}

fn block_singular(family: &BlockFamily, index: usize) -> Result<SingularList, SchattenError> {
    let b = family.block(index)?;
    kernel::singular_values(&b).map_err(|source| SchattenError::Kernel {
        block: index,
        source,
    })
}

// ------------------------------------------------------------ compactness

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CompactEvidence {
    /// Finitely many finite-dimensional blocks.
    FiniteFamily { blocks: usize },
    /// The upper envelope tends to zero.
    EnvelopeLimit { upper: Envelope },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormWitness {
    pub block: usize,
    pub norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum CompactnessVerdict {
    Compact { evidence: CompactEvidence },
    /// Every witness norm is at least `bound > 0`, and the lower envelope
    /// keeps `||A_n|| >= bound` for all large `n`.
    NotCompact { bound: f64, witness: Vec<NormWitness> },
    Unknown { prefix_norms: Vec<f64> },
}

fn limit_value(l: Option<Limit>) -> Option<f64> {
    match l? {
        Limit::Zero => Some(0.0),
        Limit::Finite(c) => Some(c),
        Limit::PosInfinity => Some(f64::INFINITY),
        Limit::NegInfinity => Some(f64::NEG_INFINITY),
    }
}

pub fn compactness_verdict(
    family: &BlockFamily,
    n: usize,
) -> Result<CompactnessVerdict, SchattenError> {
    if let Some(len) = family.len() {
        return Ok(CompactnessVerdict::Compact {
            evidence: CompactEvidence::FiniteFamily { blocks: len },
        });
    }
    let tail = family.tail();
    if let Some(upper) = tail.and_then(|t| t.upper.as_ref()) {
        if limit_value(upper.limit()) == Some(0.0) {
            return Ok(CompactnessVerdict::Compact {
                evidence: CompactEvidence::EnvelopeLimit {
                    upper: upper.clone(),
                },
            });
        }
    }
    if let Some(t) = tail {
        if let Some(l) = limit_value(t.lower.as_ref().and_then(|l| l.limit())) {
            if l > 0.0 {
                let bound = if l.is_finite() { l / 2.0 } else { 1.0 };
                let witness = not_compact_witness(family, t, n, bound)?;
                if !witness.is_empty() {
                    return Ok(CompactnessVerdict::NotCompact { bound, witness });
                }
            }
        }
    }
    let count = family.decision_count(n);
    let prefix_norms = (1..=count)
        .map(|i| block_singular(family, i).map(|s| s.largest()))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(CompactnessVerdict::Unknown { prefix_norms })
}

/// Blocks at `m = max(n, N0) * 2^k` whose computed norm reaches `bound`.
fn not_compact_witness(
    family: &BlockFamily,
    tail: &TailCertificate,
    n: usize,
    bound: f64,
) -> Result<Vec<NormWitness>, SchattenError> {
    let first = n.max(tail.start).max(1);
    let mut out = Vec::new();
    for k in 0..8 {
        let block = first << k;
        let norm = block_singular(family, block)?.largest();
        if norm >= bound {
            out.push(NormWitness { block, norm });
        }
    }
    Ok(out)
}

// ------------------------------------------------------- singular merging

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MergedSingular {
    pub value: f64,
    pub block: usize,
    /// 1-based rank of the value within its block.
    pub rank: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingularMerge {
    pub top_k: Vec<MergedSingular>,
    pub certified: bool,
    pub inspected: usize,
}

struct HeapItem {
    value: f64,
    block: usize,
    rank: usize,
}

impl PartialEq for HeapItem {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for HeapItem {}

impl PartialOrd for HeapItem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for HeapItem {
    // max-heap on value; ties go to the lower block index
    fn cmp(&self, other: &Self) -> Ordering {
        self.value
            .total_cmp(&other.value)
            .then_with(|| other.block.cmp(&self.block))
    }
}

/// The `k` largest singular values of the first `n` blocks, merged.
pub fn merged_singular_values(
    family: &BlockFamily,
    k: usize,
    n: usize,
) -> Result<SingularMerge, SchattenError> {
    if k == 0 {
        return Err(SchattenError::ZeroK);
    }
    let count = family.truncate(n)?.blocks.len();
    let lists = (1..=count)
        .map(|i| block_singular(family, i).map(|s| s.values))
        .collect::<Result<Vec<_>, _>>()?;
    let mut heap: BinaryHeap<HeapItem> = lists
        .iter()
        .enumerate()
        .filter(|(_, l)| !l.is_empty())
        .map(|(i, l)| HeapItem {
            value: l[0],
            block: i + 1,
            rank: 1,
        })
        .collect();
    let mut top_k = Vec::with_capacity(k);
    while top_k.len() < k {
        let Some(item) = heap.pop() else { break };
        top_k.push(MergedSingular {
            value: item.value,
            block: item.block,
            rank: item.rank,
        });
        if let Some(&next) = lists[item.block - 1].get(item.rank) {
            heap.push(HeapItem {
                value: next,
                block: item.block,
                rank: item.rank + 1,
            });
        }
    }
    let certified = match family.len() {
        Some(len) => count == len,
        None => match (family.tail(), top_k.get(k - 1)) {
            (Some(t), Some(kth)) => match &t.upper {
                Some(b) if count + 1 >= t.start => b.eval((count + 1) as f64) < kth.value,
                _ => false,
            },
            _ => false,
        },
    };
    Ok(SingularMerge {
        top_k,
        certified,
        inspected: count,
    })
}

// ------------------------------------------------------ Schatten classes

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PartialSum {
    /// Sum over blocks `1..=through`.
    pub through: usize,
    pub lower: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum SchattenDecision {
    /// `Σ_n Σ_q s_q(A_n)^p` lies in `sum`; `norm` is its `1/p`-th power.
    Member {
        p: f64,
        sum: Interval,
        norm: Interval,
        inspected: usize,
    },
    /// Lower bounds on the partial sums, driven to infinity by the lower
    /// envelope whose `p`-th power series diverges.
    NotMember {
        p: f64,
        lower_envelope: Envelope,
        witness: Vec<PartialSum>,
    },
    Unknown { p: f64, partial: f64, inspected: usize },
}

impl SchattenDecision {
    pub fn is_member(&self) -> bool {
        matches!(self, SchattenDecision::Member { .. })
    }
}

fn member(p: f64, lo: f64, hi: f64, inspected: usize) -> SchattenDecision {
    let sum = Interval::new(lo, hi);
    SchattenDecision::Member {
        p,
        norm: Interval::new(lo.powf(1.0 / p), hi.powf(1.0 / p)),
        sum,
        inspected,
    }
}

/// Membership of `A` in `C_p`, leaving out the blocks in `exclusions`.
///
/// Partial sums are accumulated in block order. Explicit families are
/// summed in full. Generator families need a tail certificate: a lower
/// envelope whose `p`-th power series diverges gives `NotMember`; a
/// summable per-block bound `h(n) >= Σ_q s_q(A_n)^p` (from the singular
/// envelope, or `max_dim * b(n)^p`) gives `Member` with an integral-test
/// tail.
pub fn schatten_decision(
    family: &BlockFamily,
    p: f64,
    n: usize,
    exclusions: &BTreeSet<usize>,
) -> Result<SchattenDecision, SchattenError> {
    if !(p >= 1.0 && p.is_finite()) {
        return Err(SchattenError::Exponent(p));
    }
    if exclusions.contains(&0) {
        return Err(SchattenError::ZeroExclusion);
    }
    let count = family.decision_count(n);
    let mut partial = 0.0;
    for i in (1..=count).filter(|i| !exclusions.contains(i)) {
        partial += block_singular(family, i)?
            .values
            .iter()
            .map(|s| s.powf(p))
            .sum::<f64>();
    }
    if family.is_explicit() {
        return Ok(member(p, partial, partial, count));
    }
    let unknown = SchattenDecision::Unknown {
        p,
        partial,
        inspected: count,
    };
    let Some(tail) = family.tail() else {
        return Ok(unknown);
    };
    let next = (count + 1).max(tail.start);

    if let Some(lower) = &tail.lower {
        if lower.asymptotic().and_then(|a| a.series_converges(p)) == Some(false) {
            return Ok(SchattenDecision::NotMember {
                p,
                lower_envelope: lower.clone(),
                witness: divergence_witness(lower, p, partial, count, exclusions),
            });
        }
    }
    if matches!(compactness_verdict(family, n)?, CompactnessVerdict::NotCompact { .. }) {
        return Ok(unknown);
    }
    let Some(h) = per_block_bound(tail, p, next) else {
        return Ok(unknown);
    };
    let Some(integral) = upper_tail_integral(&h, next as f64) else {
        return Ok(unknown);
    };
    let hi = partial + h.eval(next as f64) + integral;
    let lo = partial + lower_tail(tail, p, next, exclusions);
    Ok(member(p, lo, hi.max(lo), count))
}

/// Nonincreasing `h(n) >= Σ_q s_q(A_n)^p` on `n >= from`, if the
/// certificate provides one.
fn per_block_bound(tail: &TailCertificate, p: f64, from: usize) -> Option<Envelope> {
    let dim = tail.max_dim?;
    let pw = |e: Expr| Expr::Pow(Box::new(e), Box::new(Expr::Const(p)));
    if let Some(s) = &tail.singular {
        let expr = (1..=dim)
            .map(|q| pw(s.expr().substitute_q(q as f64)))
            .reduce(|a, b| Expr::Add(Box::new(a), Box::new(b)))?;
        let h = Envelope::from_expr(format!("sum_q ({s})^{p}"), expr);
        if h.check_nonincreasing(from as f64).is_ok() {
            return Some(h);
        }
    }
    let b = tail.upper.as_ref()?;
    let expr = Expr::Mul(Box::new(Expr::Const(dim as f64)), Box::new(pw(b.expr().clone())));
    Some(Envelope::from_expr(format!("{dim} * ({b})^{p}"), expr))
}

/// Lower bound on `Σ_{n >= from, n ∉ exclusions} s_1(A_n)^p` from a
/// nonincreasing lower envelope.
fn lower_tail(tail: &TailCertificate, p: f64, from: usize, exclusions: &BTreeSet<usize>) -> f64 {
    let Some(l) = &tail.lower else { return 0.0 };
    let lp = l.powf(p);
    if lp.check_nonincreasing(from as f64).is_err() {
        return 0.0;
    }
    let removed: f64 = exclusions
        .range(from..)
        .map(|&e| lp.eval(e as f64).max(0.0))
        .sum();
    (lower_tail_integral(&lp, from as f64) - removed).max(0.0)
}

/// Partial-sum lower bounds at `count * 10^k`, `k = 0..=4`.
fn divergence_witness(
    lower: &Envelope,
    p: f64,
    prefix: f64,
    count: usize,
    exclusions: &BTreeSet<usize>,
) -> Vec<PartialSum> {
    let mut out = vec![PartialSum {
        through: count,
        lower: prefix,
    }];
    let mut sum = prefix;
    let mut at = count;
    for _ in 0..4 {
        let to = at * 10;
        for i in (at + 1..=to).filter(|i| !exclusions.contains(i)) {
            let v = lower.eval(i as f64);
            if v > 0.0 {
                sum += v.powf(p);
            }
        }
        at = to;
        out.push(PartialSum {
            through: at,
            lower: sum,
        });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::family::{make_generator, BlockMatrix, MeasureSpec};
    use num_complex::Complex64;

    fn env(s: &str) -> Envelope {
        s.parse().unwrap()
    }

    fn harmonic() -> BlockFamily {
        make_generator(
            |n| BlockMatrix::real_scalar(1.0 / n as f64),
            Some(
                TailCertificate::new(1)
                    .with_upper(env("1/n"))
                    .with_lower(env("1/n"))
                    .with_singular(env("1/n"))
                    .with_max_dim(1),
            ),
            MeasureSpec::Counting,
        )
        .unwrap()
    }

    fn ones() -> BlockFamily {
        make_generator(
            |_| BlockMatrix::real_scalar(1.0),
            Some(TailCertificate::new(1).with_upper(env("1")).with_lower(env("1"))),
            MeasureSpec::Counting,
        )
        .unwrap()
    }

    fn explicit(blocks: Vec<BlockMatrix>) -> BlockFamily {
        BlockFamily::explicit(blocks, MeasureSpec::Counting).unwrap()
    }

    #[test]
    fn compactness_examples() {
        assert!(matches!(
            compactness_verdict(&harmonic(), 10).unwrap(),
            CompactnessVerdict::Compact { .. }
        ));
        match compactness_verdict(&ones(), 10).unwrap() {
            CompactnessVerdict::NotCompact { bound, witness } => {
                assert!(bound > 0.0 && !witness.is_empty());
                assert!(witness.iter().all(|w| w.norm >= bound));
            }
            other => panic!("{other:?}"),
        }
        let f = explicit(vec![BlockMatrix::real_scalar(7.0).unwrap()]);
        assert!(matches!(
            compactness_verdict(&f, 1).unwrap(),
            CompactnessVerdict::Compact { .. }
        ));
    }

    #[test]
    fn merge_of_scalar_and_diagonal() {
        let f = explicit(vec![
            BlockMatrix::real_scalar(3.0).unwrap(),
            BlockMatrix::diagonal(&[Complex64::new(1.0, 0.0), Complex64::new(2.0, 0.0)]).unwrap(),
        ]);
        let m = merged_singular_values(&f, 3, 2).unwrap();
        let v: Vec<f64> = m.top_k.iter().map(|s| s.value).collect();
        assert_eq!(v, vec![3.0, 2.0, 1.0]);
        assert!(m.certified);
        assert!(!merged_singular_values(&f, 3, 1).unwrap().certified);
    }

    #[test]
    fn generator_merge_certifies_through_envelope() {
        let m = merged_singular_values(&harmonic(), 3, 10).unwrap();
        assert!(m.certified);
        assert_eq!(m.top_k[2].block, 3);
        let m = merged_singular_values(&harmonic(), 3, 2).unwrap();
        assert!(!m.certified);
    }

    #[test]
    fn harmonic_squares_bracket_zeta_two() {
        let d = schatten_decision(&harmonic(), 2.0, 100, &BTreeSet::new()).unwrap();
        let SchattenDecision::Member { sum, .. } = d else { panic!("{d:?}") };
        let z2 = std::f64::consts::PI.powi(2) / 6.0;
        assert!(sum.contains(z2), "{sum:?}");
        assert!(sum.width() <= 1e-2);
    }

    #[test]
    fn harmonic_series_is_not_trace_class() {
        let d = schatten_decision(&harmonic(), 1.0, 100, &BTreeSet::new()).unwrap();
        let SchattenDecision::NotMember { witness, .. } = d else { panic!("{d:?}") };
        assert!(witness.windows(2).all(|w| w[1].lower > w[0].lower));
        assert!(witness.last().unwrap().lower > 13.0);
    }

    #[test]
    fn exclusions_and_domain() {
        let f = explicit(vec![
            BlockMatrix::real_scalar(3.0).unwrap(),
            BlockMatrix::real_scalar(4.0).unwrap(),
        ]);
        let d = schatten_decision(&f, 2.0, 2, &BTreeSet::from([1])).unwrap();
        assert_eq!(d, member(2.0, 16.0, 16.0, 2));
        let d = schatten_decision(&f, 2.0, 2, &BTreeSet::new()).unwrap();
        let SchattenDecision::Member { norm, .. } = d else { panic!() };
        assert!((norm.lo - 5.0).abs() < 1e-15);
        assert_eq!(
            schatten_decision(&f, 0.5, 2, &BTreeSet::new()),
            Err(SchattenError::Exponent(0.5))
        );
    }

    #[test]
    fn zero_family_is_in_every_class() {
        let f = explicit(vec![BlockMatrix::zeros(3).unwrap(); 4]);
        for p in [1.0, 2.0, 7.5] {
            assert_eq!(
                schatten_decision(&f, p, 4, &BTreeSet::new()).unwrap(),
                member(p, 0.0, 0.0, 4)
            );
        }
    }

    #[test]
    fn uncertified_generator_is_unknown() {
        let f = make_generator(|n| BlockMatrix::real_scalar(1.0 / n as f64), None, MeasureSpec::Counting)
            .unwrap();
        assert!(matches!(
            schatten_decision(&f, 2.0, 10, &BTreeSet::new()).unwrap(),
            SchattenDecision::Unknown { inspected: 10, .. }
        ));
    }
}
