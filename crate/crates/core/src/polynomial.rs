use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::interval::Interval;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PolynomialError {
    #[error("polynomial needs at least one coefficient")]
    Empty,
    #[error("coefficient a_{0} is not finite")]
    NonFinite(usize),
    #[error("grid of {grid} points is below 4*(degree+1) = {needed}")]
    GridTooSmall { grid: usize, needed: usize },
}

/// `a_0 + a_1 z + ... + a_q z^q` with declared degree `q`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polynomial {
    coefficients: Vec<Complex64>,
}

impl Polynomial {
    pub fn new(coefficients: Vec<Complex64>) -> Result<Self, PolynomialError> {
        if coefficients.is_empty() {
            return Err(PolynomialError::Empty);
        }
        if let Some(i) = coefficients
            .iter()
            .position(|z| !(z.re.is_finite() && z.im.is_finite()))
        {
            return Err(PolynomialError::NonFinite(i));
        }
        Ok(Polynomial { coefficients })
    }

    pub fn constant(c: Complex64) -> Self {
        Polynomial {
            coefficients: vec![c],
        }
    }

    /// `z^m`.
    pub fn monomial(m: usize) -> Self {
        let mut coefficients = vec![Complex64::new(0.0, 0.0); m + 1];
        coefficients[m] = Complex64::new(1.0, 0.0);
        Polynomial { coefficients }
    }

    pub fn degree(&self) -> usize {
        self.coefficients.len() - 1
    }

    pub fn coefficients(&self) -> &[Complex64] {
        &self.coefficients
    }

    pub fn eval(&self, z: Complex64) -> Complex64 {
        self.coefficients
            .iter()
            .rev()
            .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * z + c)
    }

    /// `Some(|a_k|)` when at most one coefficient is nonzero; then
    /// `||p||_inf = |a_k|` exactly.
    pub fn single_term_norm(&self) -> Option<f64> {
        let mut nonzero = self
            .coefficients
            .iter()
            .filter(|z| z.re != 0.0 || z.im != 0.0);
        match (nonzero.next(), nonzero.next()) {
            (None, _) => Some(0.0),
            (Some(z), None) => Some(z.norm()),
            _ => None,
        }
    }
}

/// Certified bracket of `sup_{|z|<=1} |p(z)|`.
///
/// By the maximum principle the sup is attained on the unit circle. The
/// sampled maximum over `grid` equispaced angles is the lower end. Every
/// angle is within `pi/grid` of a sample and Bernstein's inequality bounds
/// the angular derivative by `q ||p||`, so `||p|| <= lo / (1 - pi q / grid)`.
pub fn poly_sup_norm(p: &Polynomial, grid: usize) -> Result<Interval, PolynomialError> {
    let q = p.degree();
    let needed = 4 * (q + 1);
    if grid < needed {
        return Err(PolynomialError::GridTooSmall { grid, needed });
    }
    let lo = (0..grid)
        .map(|k| {
            let theta = 2.0 * PI * k as f64 / grid as f64;
            p.eval(Complex64::from_polar(1.0, theta)).norm()
        })
        .fold(0.0, f64::max);
    let slack = PI * q as f64 / grid as f64;
    Ok(Interval::new(lo, lo / (1.0 - slack)))
}
