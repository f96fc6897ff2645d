#![allow(dead_code)]

use blockspec::{BlockFamily, BlockMatrix, Complex64, MeasureSpec};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const CORPUS_SEED: u64 = 0x5eed_b10c;

pub fn random_block(rng: &mut impl Rng, dim: usize) -> BlockMatrix {
    let m = DMatrix::from_fn(dim, dim, |_, _| Complex64::new(rng.gen(), rng.gen()));
    BlockMatrix::new(m).unwrap()
}

/// 2-6 blocks of dimension 1-6, entries uniform in the unit square.
pub fn random_family(rng: &mut impl Rng) -> BlockFamily {
    let count = rng.gen_range(2..=6);
    let blocks = (0..count)
        .map(|_| {
            let d = rng.gen_range(1..=6);
            random_block(rng, d)
        })
        .collect();
    BlockFamily::explicit(blocks, MeasureSpec::Counting).unwrap()
}

pub fn corpus(size: usize) -> Vec<BlockFamily> {
    let mut rng = ChaCha8Rng::seed_from_u64(CORPUS_SEED);
    (0..size).map(|_| random_family(&mut rng)).collect()
}

pub fn blocks_of(f: &BlockFamily) -> Vec<BlockMatrix> {
    f.truncate(usize::MAX).unwrap().blocks
}

/// Block-diagonal assembly done by hand.
pub fn assemble_by_hand(blocks: &[BlockMatrix]) -> DMatrix<Complex64> {
    let total: usize = blocks.iter().map(|b| b.dim()).sum();
    let mut m = DMatrix::zeros(total, total);
    let mut at = 0;
    for b in blocks {
        for i in 0..b.dim() {
            for j in 0..b.dim() {
                m[(at + i, at + j)] = b.get(i, j);
            }
        }
        at += b.dim();
    }
    m
}

pub fn dense_eigenvalues(m: &DMatrix<Complex64>) -> Vec<Complex64> {
    m.clone().schur().eigenvalues().expect("triangular Schur form").iter().copied().collect()
}

pub fn dense_singular_values(m: &DMatrix<Complex64>) -> Vec<f64> {
    let mut v: Vec<f64> = m.singular_values().iter().copied().collect();
    v.sort_by(|x, y| y.total_cmp(x));
    v
}

pub fn dense_norm(m: &DMatrix<Complex64>) -> f64 {
    dense_singular_values(m).first().copied().unwrap_or(0.0)
}

pub fn shifted(m: &DMatrix<Complex64>, tau: Complex64) -> DMatrix<Complex64> {
    m - DMatrix::identity(m.nrows(), m.ncols()) * tau
}

/// Greedy matching: each value of `a`, in order, takes its nearest unused
/// partner in `b`. Returns the largest distance used.
pub fn greedy_match(a: &[Complex64], b: &[Complex64]) -> f64 {
    assert_eq!(a.len(), b.len(), "multiset sizes differ");
    let mut used = vec![false; b.len()];
    let mut worst = 0.0f64;
    for x in a {
        let mut best = (usize::MAX, f64::INFINITY);
        for (j, y) in b.iter().enumerate() {
            let d = (x - y).norm();
            if !used[j] && d < best.1 {
                best = (j, d);
            }
        }
        used[best.0] = true;
        worst = worst.max(best.1);
    }
    worst
}

/// Characteristic polynomial coefficients `c_0..c_n` (monic, `c_n = 1`)
/// by the Faddeev-LeVerrier recursion.
pub fn characteristic_polynomial(a: &DMatrix<Complex64>) -> Vec<Complex64> {
    let n = a.nrows();
    let mut c = vec![Complex64::new(0.0, 0.0); n + 1];
    c[n] = Complex64::new(1.0, 0.0);
    let id = DMatrix::<Complex64>::identity(n, n);
    let mut m = DMatrix::<Complex64>::zeros(n, n);
    for k in 1..=n {
        m = a * &m + &id * c[n - k + 1];
        c[n - k] = -(a * &m).trace() / k as f64;
    }
    c
}

/// Roots of a monic polynomial by Durand-Kerner iteration, finished with
/// Newton steps.
pub fn polynomial_roots(c: &[Complex64]) -> Vec<Complex64> {
    let n = c.len() - 1;
    let eval = |z: Complex64| c.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, &k| acc * z + k);
    let deriv = |z: Complex64| {
        c.iter()
            .enumerate()
            .skip(1)
            .rev()
            .fold(Complex64::new(0.0, 0.0), |acc, (i, &k)| acc * z + k * i as f64)
    };
    let radius = 1.0 + c[..n].iter().map(|z| z.norm()).fold(0.0, f64::max);
    let seed = Complex64::new(0.4, 0.9);
    let mut z: Vec<Complex64> = (0..n).map(|k| seed.powu(k as u32) * radius * 0.5).collect();
    for _ in 0..2000 {
        let mut delta = 0.0f64;
        for i in 0..n {
            let mut denom = Complex64::new(1.0, 0.0);
            for j in 0..n {
                if i != j {
                    denom *= z[i] - z[j];
                }
            }
            let step = eval(z[i]) / denom;
            z[i] -= step;
            delta = delta.max(step.norm());
        }
        if delta < 1e-15 {
            break;
        }
    }
    for r in z.iter_mut() {
        for _ in 0..3 {
            let d = deriv(*r);
            if d.norm() > 0.0 {
                *r -= eval(*r) / d;
            }
        }
    }
    z
}

/// `sup_{m<=count} ||A^m||` by plain repeated multiplication.
pub fn dense_power_max(a: &DMatrix<Complex64>, count: usize) -> f64 {
    let mut p = a.clone();
    let mut best = dense_norm(&p);
    for _ in 1..count {
        p = &p * a;
        best = best.max(dense_norm(&p));
    }
    best
}
