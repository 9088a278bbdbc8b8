//! Branching mechanisms: evaluation, derivative, inversion and power-law fits.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub x: f64,
    pub w: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum LevyMeasure {
    None,
    Stable { index: f64, scale: f64 },
    Atomic { atoms: Vec<Atom> },
}

/// psi(l) = alpha*l + beta*l^2 + (Levy measure part).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevyTriplet {
    pub alpha: f64,
    pub beta: f64,
    pub levy_measure: LevyMeasure,
}

impl LevyTriplet {
    pub fn new(alpha: f64, beta: f64, levy_measure: LevyMeasure) -> Result<Self> {
        let t = LevyTriplet { alpha, beta, levy_measure };
        t.validate()?;
        Ok(t)
    }

    pub fn brownian(beta: f64) -> Result<Self> {
        Self::new(0.0, beta, LevyMeasure::None)
    }

    pub fn stable(index: f64, scale: f64) -> Result<Self> {
        Self::new(0.0, 0.0, LevyMeasure::Stable { index, scale })
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return domain(format!("alpha must be finite and >= 0, got {}", self.alpha));
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return domain(format!("beta must be finite and >= 0, got {}", self.beta));
        }
        match &self.levy_measure {
            LevyMeasure::None => {}
            LevyMeasure::Stable { index, scale } => {
                if !(*index > 1.0 && *index < 2.0) {
                    return domain(format!("stable index must lie in (1,2), got {index}"));
                }
                if !(*scale > 0.0 && scale.is_finite()) {
                    return domain(format!("stable scale must be > 0, got {scale}"));
                }
            }
            LevyMeasure::Atomic { atoms } => {
                for a in atoms {
                    if !(a.x > 0.0 && a.w > 0.0 && a.x.is_finite() && a.w.is_finite()) {
                        return domain(format!("atoms need x > 0 and w > 0, got ({}, {})", a.x, a.w));
                    }
                }
            }
        }
        Ok(())
    }

    fn psi_unchecked(&self, lambda: f64) -> f64 {
        let mut v = self.alpha * lambda + self.beta * lambda * lambda;
        match &self.levy_measure {
            LevyMeasure::None => {}
            LevyMeasure::Stable { index, scale } => v += scale * lambda.powf(*index),
            LevyMeasure::Atomic { atoms } => {
                for a in atoms {
                    let z = lambda * a.x;
                    // e^{-z} - 1 + z, accurate for small z
                    v += a.w * (z + (-z).exp_m1());
                }
            }
        }
        v
    }

    fn psi_prime_unchecked(&self, lambda: f64) -> f64 {
        let mut v = self.alpha + 2.0 * self.beta * lambda;
        match &self.levy_measure {
            LevyMeasure::None => {}
            LevyMeasure::Stable { index, scale } => v += scale * index * lambda.powf(index - 1.0),
            LevyMeasure::Atomic { atoms } => {
                for a in atoms {
                    v += a.w * a.x * (-(-lambda * a.x).exp_m1());
                }
            }
        }
        v
    }

    /// Heuristic check of the integrability condition on 1/psi at infinity:
    /// true when psi(l)/l grows without bound.
    pub fn a4_heuristic(&self) -> bool {
        self.beta > 0.0 || matches!(self.levy_measure, LevyMeasure::Stable { .. })
    }
}

pub fn eval_psi(t: &LevyTriplet, lambda: f64) -> Result<f64> {
    if !(lambda >= 0.0) {
        return domain(format!("lambda must be >= 0, got {lambda}"));
    }
    Ok(t.psi_unchecked(lambda))
}

pub fn eval_psi_prime(t: &LevyTriplet, lambda: f64) -> Result<f64> {
    if !(lambda > 0.0) {
        return domain(format!("lambda must be > 0, got {lambda}"));
    }
    Ok(t.psi_prime_unchecked(lambda))
}

const INVERT_MAX_ITER: usize = 400;

/// Returns l with |psi(l) - y| <= tol * max(1, y).
pub fn invert_psi(t: &LevyTriplet, y: f64, tol: f64) -> Result<f64> {
    if !(y >= 0.0) || !y.is_finite() {
        return domain(format!("y must be finite and >= 0, got {y}"));
    }
    if !(tol > 0.0) {
        return domain(format!("tol must be > 0, got {tol}"));
    }
    if y == 0.0 {
        return Ok(0.0);
    }
    let target = tol * y.max(1.0);
    let mut lo = 0.0;
    let mut hi = 1.0;
    let mut doublings = 0;
    while t.psi_unchecked(hi) < y {
        lo = hi;
        hi *= 2.0;
        doublings += 1;
        if doublings > 1100 || !hi.is_finite() {
            return Err(Error::Numeric { msg: "could not bracket the root".into(), lo, hi });
        }
    }
    let mut x = 0.5 * (lo + hi);
    for _ in 0..INVERT_MAX_ITER {
        let f = t.psi_unchecked(x) - y;
        if f.abs() <= target {
            return Ok(x);
        }
        if f > 0.0 {
            hi = x;
        } else {
            lo = x;
        }
        // Newton step, falling back to bisection when it leaves the bracket.
        let d = if x > 0.0 { t.psi_prime_unchecked(x) } else { 0.0 };
        let newton = if d > 0.0 { x - f / d } else { f64::NAN };
        x = if newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        if hi - lo <= f64::EPSILON * hi.max(1.0) {
            let f = t.psi_unchecked(x) - y;
            if f.abs() <= target {
                return Ok(x);
            }
            return Err(Error::Numeric { msg: "bracket collapsed above tolerance".into(), lo, hi });
        }
    }
    Err(Error::Numeric { msg: "iteration cap reached".into(), lo, hi })
}

/// Estimated exponent values on a grid, with confidence half-widths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedExponent {
    pub lambda_grid: Vec<f64>,
    pub values: Vec<f64>,
    pub ci_half_widths: Vec<f64>,
    pub power_fit: Option<PowerFit>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerFit {
    pub exponent: f64,
    pub scale: f64,
    pub residual: f64,
}

impl FittedExponent {
    pub fn new(lambda_grid: Vec<f64>, values: Vec<f64>, ci_half_widths: Vec<f64>) -> Result<Self> {
        if lambda_grid.len() != values.len() || values.len() != ci_half_widths.len() {
            return domain("grid, values and half-widths must have equal length");
        }
        if lambda_grid.windows(2).any(|w| !(w[0] < w[1])) || lambda_grid.iter().any(|&l| !(l > 0.0)) {
            return domain("lambda grid must be positive and strictly increasing");
        }
        if values.iter().any(|&v| !(v >= 0.0)) || ci_half_widths.iter().any(|&c| !(c >= 0.0)) {
            return domain("values and half-widths must be nonnegative");
        }
        Ok(FittedExponent { lambda_grid, values, ci_half_widths, power_fit: None })
    }
}

/// Least-squares line through (log lambda, log value).
pub fn fit_power_law(f: &FittedExponent) -> Result<PowerFit> {
    let n = f.lambda_grid.len();
    if n < 2 || n != f.values.len() {
        return domain("need at least two grid points");
    }
    if f.values.iter().any(|&v| !(v > 0.0)) || f.lambda_grid.iter().any(|&l| !(l > 0.0)) {
        return domain("power-law fit needs positive values");
    }
    let xs: Vec<f64> = f.lambda_grid.iter().map(|l| l.ln()).collect();
    let ys: Vec<f64> = f.values.iter().map(|v| v.ln()).collect();
    let nf = n as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx == 0.0 {
        return domain("degenerate lambda grid");
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    Ok(PowerFit { exponent: slope, scale: intercept.exp(), residual: (rss / nf).sqrt() })
}

/// Laplace functional p -> int (1 - e^{-pz}) nu(dz) of the spine jump measure
/// attached to a subordinate mechanism `psi_t` and mark intensity `lambda`:
/// (psi_t(p) - lambda)/(p - g) - lambda/g with g = psi_t^{-1}(lambda).
/// At p = g the removable singularity is filled with psi_t'(g).
pub fn nu_tilde_laplace(psi_t: &LevyTriplet, lambda: f64, p: f64) -> Result<f64> {
    if !(lambda > 0.0) || !(p >= 0.0) {
        return domain("need lambda > 0 and p >= 0");
    }
    let g = invert_psi(psi_t, lambda, 1e-13)?;
    let ratio = if (p - g).abs() <= 1e-9 * g.max(1.0) {
        psi_t.psi_prime_unchecked(g)
    } else {
        (psi_t.psi_unchecked(p) - lambda) / (p - g)
    };
    Ok(ratio - lambda / g)
}
