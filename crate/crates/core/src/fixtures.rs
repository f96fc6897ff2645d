//! Named example families with their closed-form tail certificates.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::envelope::{Envelope, EnvelopeError, Expr};
use crate::family::{BlockError, BlockFamily, BlockMatrix, FamilyError, MeasureSpec, TailCertificate};
use crate::kernel;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FixtureError {
    #[error("fixture `{0}` needs an alpha sequence")]
    MissingAlpha(FixtureName),
    #[error("fixture `{0}` takes no alpha parameter")]
    UnexpectedAlpha(FixtureName),
    #[error("alpha list is empty")]
    EmptyAlpha,
    #[error("alpha_{index} = {value} is not finite")]
    NonFiniteAlpha { index: usize, value: f64 },
    #[error("volterra needs an even discretization size nq >= 2, got {0:?}")]
    BadGrid(Option<usize>),
    #[error("fixture `{0}` takes no nq parameter")]
    UnexpectedGrid(FixtureName),
    #[error(transparent)]
    Envelope(#[from] EnvelopeError),
    #[error(transparent)]
    Family(#[from] FamilyError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FixtureName {
    /// `A_n = [1]`.
    ScalarOnes,
    /// `A_n = [[0, 0], [alpha_n, 0]]`.
    Nilpotent2,
    /// Midpoint discretization of `f ↦ alpha_n ∫_{-x}^{x} f` on `L²(-1, 1)`.
    Volterra,
    /// `A_n = [1 - 1/n]`.
    DiagAccumulating,
    /// `A_n = [1/n]`.
    HarmonicDiag,
}

impl FixtureName {
    pub const ALL: [FixtureName; 5] = [
        FixtureName::ScalarOnes,
        FixtureName::Nilpotent2,
        FixtureName::Volterra,
        FixtureName::DiagAccumulating,
        FixtureName::HarmonicDiag,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FixtureName::ScalarOnes => "scalar_ones",
            FixtureName::Nilpotent2 => "nilpotent2",
            FixtureName::Volterra => "volterra",
            FixtureName::DiagAccumulating => "diag_accumulating",
            FixtureName::HarmonicDiag => "harmonic_diag",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|f| f.as_str() == s)
    }
}

impl std::fmt::Display for FixtureName {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// The alpha sequence: a finite list gives an explicit family, a number
/// or an expression in `n` gives a generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AlphaSpec {
    List(Vec<f64>),
    Constant(f64),
    Expr(Envelope),
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixtureParams {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<AlphaSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nq: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixtureSpec {
    pub name: FixtureName,
    #[serde(default)]
    pub params: FixtureParams,
}

impl FixtureSpec {
    pub fn new(name: FixtureName) -> Self {
        FixtureSpec {
            name,
            params: FixtureParams::default(),
        }
    }

    pub fn with_alpha(mut self, alpha: AlphaSpec) -> Self {
        self.params.alpha = Some(alpha);
        self
    }

    pub fn with_nq(mut self, nq: usize) -> Self {
        self.params.nq = Some(nq);
        self
    }
}

/// Discretized Volterra block: `M_ij = alpha h sign(x_i) [|x_j| < |x_i|]`
/// on the midpoints `x_i = -1 + (i - 1/2) h`, `h = 2/nq`.
///
/// For even `nq` the grid is symmetric about 0, so the terms of `(M^2)_ik`
/// cancel in `±x_j` pairs and `M^2 = 0` exactly.
///
/// Panics unless `nq` is even and at least 2.
pub fn volterra_matrix(alpha: f64, nq: usize) -> Result<BlockMatrix, BlockError> {
    assert!(nq >= 2 && nq.is_multiple_of(2), "volterra grid size must be even and >= 2");
    let h = 2.0 / nq as f64;
    // |x| = (2k + 1) / nq, mirrored so that x_{nq-1-i} = -x_i bit for bit
    let half = nq / 2;
    let t = |k: usize| (2 * k + 1) as f64 / nq as f64;
    let x: Vec<f64> = (0..half)
        .rev()
        .map(|k| -t(k))
        .chain((0..half).map(t))
        .collect();
    let rows: Vec<Vec<f64>> = x
        .iter()
        .map(|&xi| {
            x.iter()
                .map(|&xj| {
                    if xj.abs() < xi.abs() {
                        alpha * h * xi.signum()
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect();
    BlockMatrix::from_real_rows(&rows)?.with_nilpotency(2)
}

fn nilpotent2_block(alpha: f64) -> Result<BlockMatrix, BlockError> {
    BlockMatrix::from_real_rows(&[vec![0.0, 0.0], vec![alpha, 0.0]])?.with_nilpotency(2)
}

fn env(s: &str) -> Envelope {
    s.parse().expect("fixture envelopes parse")
}

fn scaled(source: &str, alpha: &Envelope, factor: f64) -> Envelope {
    let expr = Expr::Mul(
        Box::new(Expr::Const(factor)),
        Box::new(Expr::Abs(Box::new(alpha.expr().clone()))),
    );
    Envelope::from_expr(source, expr)
}

/// Certificate for blocks with `||A_n|| = |alpha(n)| * unit` and
/// `A_n^2 = 0`: exact-norm lower envelope, and an upper envelope when
/// `|alpha|` is nonincreasing.
fn alpha_certificate(alpha: &Envelope, unit: f64, dim: usize) -> TailCertificate {
    let lo_factor = unit * (1.0 - 1e-12);
    let hi_factor = unit * (1.0 + 1e-12);
    let lower = scaled(&format!("{lo_factor} * abs({alpha})"), alpha, lo_factor);
    let upper = scaled(&format!("{hi_factor} * abs({alpha})"), alpha, hi_factor);
    let mut t = TailCertificate::new(1).with_lower(lower).with_max_dim(dim);
    if upper.check_nonincreasing(1.0).is_ok() {
        t = t.with_upper(upper);
    }
    t
}

fn alpha_envelope(alpha: &AlphaSpec) -> Option<Envelope> {
    match alpha {
        AlphaSpec::List(_) => None,
        AlphaSpec::Constant(c) => Some(env(&format!("{c}"))),
        AlphaSpec::Expr(e) => Some(e.clone()),
    }
}

fn check_list(alpha: &[f64]) -> Result<(), FixtureError> {
    if alpha.is_empty() {
        return Err(FixtureError::EmptyAlpha);
    }
    if let Some((i, &value)) = alpha.iter().enumerate().find(|(_, a)| !a.is_finite()) {
        return Err(FixtureError::NonFiniteAlpha { index: i + 1, value });
    }
    Ok(())
}

/// Builds the named family. `tail` replaces the built-in certificate.
pub fn make_fixture(
    spec: &FixtureSpec,
    tail: Option<TailCertificate>,
) -> Result<BlockFamily, FixtureError> {
    let name = spec.name;
    let p = &spec.params;
    let takes_alpha = matches!(name, FixtureName::Nilpotent2 | FixtureName::Volterra);
    match (&p.alpha, takes_alpha) {
        (Some(_), false) => return Err(FixtureError::UnexpectedAlpha(name)),
        (None, true) => return Err(FixtureError::MissingAlpha(name)),
        _ => {}
    }
    if p.nq.is_some() && name != FixtureName::Volterra {
        return Err(FixtureError::UnexpectedGrid(name));
    }
    let counting = MeasureSpec::Counting;
    let family = match name {
        FixtureName::ScalarOnes => crate::family::make_generator(
            |_| BlockMatrix::real_scalar(1.0)?.with_normal(),
            Some(
                TailCertificate::new(1)
                    .with_upper(env("1"))
                    .with_lower(env("1"))
                    .with_singular(env("1"))
                    .with_eigen_track(env("1"), env("0"))
                    .with_max_dim(1),
            ),
            counting,
        )?,
        FixtureName::DiagAccumulating => crate::family::make_generator(
            |n| BlockMatrix::real_scalar(1.0 - 1.0 / n as f64)?.with_normal(),
            Some(
                TailCertificate::new(1)
                    .with_upper(env("1"))
                    .with_lower(env("1 - 1/n"))
                    .with_eigen_track(env("1 - 1/n"), env("0"))
                    .with_max_dim(1),
            ),
            counting,
        )?,
        FixtureName::HarmonicDiag => crate::family::make_generator(
            |n| BlockMatrix::real_scalar(1.0 / n as f64)?.with_normal(),
            Some(
                TailCertificate::new(1)
                    .with_upper(env("1/n"))
                    .with_lower(env("1/n"))
                    .with_singular(env("1/n"))
                    .with_eigen_track(env("1/n"), env("0"))
                    .with_max_dim(1),
            ),
            counting,
        )?,
        FixtureName::Nilpotent2 => {
            let alpha = p.alpha.as_ref().expect("checked above");
            if let AlphaSpec::List(list) = alpha {
                check_list(list)?;
                let blocks = list
                    .iter()
                    .enumerate()
                    .map(|(i, &a)| {
                        nilpotent2_block(a)
                            .map_err(|source| FamilyError::InvalidBlock { index: i + 1, source })
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                BlockFamily::explicit(blocks, counting)?
            } else {
                let a = alpha_envelope(alpha).expect("not a list");
                let cert = alpha_certificate(&a, 1.0, 2).with_eigen_track(env("0"), env("0"));
                crate::family::make_generator(
                    move |n| nilpotent2_block(a.eval(n as f64)),
                    Some(cert),
                    counting,
                )?
            }
        }
        FixtureName::Volterra => {
            let nq = match p.nq {
                Some(nq) if nq >= 2 && nq % 2 == 0 => nq,
                other => return Err(FixtureError::BadGrid(other)),
            };
            let alpha = p.alpha.as_ref().expect("checked above");
            if let AlphaSpec::List(list) = alpha {
                check_list(list)?;
                let blocks = list
                    .iter()
                    .enumerate()
                    .map(|(i, &a)| {
                        volterra_matrix(a, nq)
                            .map_err(|source| FamilyError::InvalidBlock { index: i + 1, source })
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                BlockFamily::explicit(blocks, counting)?
            } else {
                let a = alpha_envelope(alpha).expect("not a list");
                let unit_block = volterra_matrix(1.0, nq).expect("finite grid");
                let unit = kernel::spectral_norm(&unit_block).unwrap_or(0.0);
                let cert = alpha_certificate(&a, unit, nq).with_eigen_track(env("0"), env("0"));
                crate::family::make_generator(
                    move |n| volterra_matrix(a.eval(n as f64), nq),
                    Some(cert),
                    counting,
                )?
            }
        }
    };
    match tail {
        Some(t) => Ok(family.with_tail(Some(t))?),
        None => Ok(family),
    }
}

/// Shorthand used by tests and benches: `α` as a list of reals.
pub fn nilpotent2(alpha: &[f64]) -> Result<BlockFamily, FixtureError> {
    make_fixture(
        &FixtureSpec::new(FixtureName::Nilpotent2).with_alpha(AlphaSpec::List(alpha.to_vec())),
        None,
    )
}
