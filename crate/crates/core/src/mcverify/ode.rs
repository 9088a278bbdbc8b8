//! One-dimensional boundary-value oracles for the Brownian base case.
//!
//! `u` solves kappa u'' = u^2 on (0, inf) with u(0) = lambda and u -> 0; it is
//! found by shooting on u'(0). `phi` solves phi'' / 2 = V phi with phi(0) = 1,
//! bounded, so that the excursion measure of the motion away from 0 satisfies
//! N(1 - exp(-int V)) = -phi'(0) for a symmetric potential V.

use crate::error::{domain, Error, Result};

/// Solution of the decaying problem tabulated on a uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Tabulated {
    pub step: f64,
    pub values: Vec<f64>,
    pub slope0: f64,
}

impl Tabulated {
    /// Linear interpolation in |y|; beyond the grid the last value is
    /// continued with the y^-2 decay of the nonlinear problem.
    pub fn eval(&self, y: f64) -> f64 {
        let y = y.abs();
        let x = y / self.step;
        let n = self.values.len() - 1;
        if x >= n as f64 {
            let ymax = n as f64 * self.step;
            return self.values[n] * (ymax / y).powi(2);
        }
        let i = x as usize;
        let f = x - i as f64;
        self.values[i] * (1.0 - f) + self.values[i + 1] * f
    }
}

fn rk4<F: Fn(f64, f64) -> f64>(f: &F, y: f64, p: f64, h: f64, x: f64) -> (f64, f64) {
    // y' = p, p' = f(x, y)
    let k1y = p;
    let k1p = f(x, y);
    let k2y = p + 0.5 * h * k1p;
    let k2p = f(x + 0.5 * h, y + 0.5 * h * k1y);
    let k3y = p + 0.5 * h * k2p;
    let k3p = f(x + 0.5 * h, y + 0.5 * h * k2y);
    let k4y = p + h * k3p;
    let k4p = f(x + h, y + h * k3y);
    (y + h / 6.0 * (k1y + 2.0 * k2y + 2.0 * k3y + k4y), p + h / 6.0 * (k1p + 2.0 * k2p + 2.0 * k3p + k4p))
}

/// Outcome of one shot: -1 if the solution crosses below 0, +1 if it turns
/// upward, 0 if it stays decreasing and positive up to `ymax`.
fn shoot<F: Fn(f64, f64) -> f64>(f: &F, y0: f64, p0: f64, h: f64, n: usize, out: Option<&mut Vec<f64>>) -> i32 {
    let (mut y, mut p) = (y0, p0);
    let mut sink = out;
    if let Some(v) = sink.as_deref_mut() {
        v.clear();
        v.push(y);
    }
    for i in 0..n {
        (y, p) = rk4(f, y, p, h, i as f64 * h);
        if !(y > 0.0) {
            return -1;
        }
        if p > 0.0 {
            return 1;
        }
        if let Some(v) = sink.as_deref_mut() {
            v.push(y);
        }
    }
    0
}

fn bisect_slope<F: Fn(f64, f64) -> f64>(f: &F, y0: f64, h: f64, n: usize) -> Result<Tabulated> {
    // slope 0 turns upward (f > 0); a steep negative slope crosses zero
    let mut hi = 0.0;
    let mut lo = -1.0;
    let mut guard = 0;
    while shoot(f, y0, lo, h, n, None) >= 0 {
        lo *= 2.0;
        guard += 1;
        if guard > 200 {
            return Err(Error::Numeric { msg: "no undershooting slope".into(), lo, hi });
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        match shoot(f, y0, mid, h, n, None) {
            -1 => lo = mid,
            _ => hi = mid,
        }
    }
    let mut values = Vec::with_capacity(n + 1);
    let slope0 = 0.5 * (lo + hi);
    shoot(f, y0, slope0, h, n, Some(&mut values));
    // the shot may leave the admissible region near the end of the grid
    let keep = values.len();
    if keep < n / 2 {
        return Err(Error::Numeric { msg: "shooting diverged early".into(), lo, hi });
    }
    Ok(Tabulated { step: h, values, slope0 })
}

/// Decaying solution of kappa u'' = u^2 with u(0) = lambda.
pub fn solve_u(lambda: f64, kappa: f64, ymax: f64, step: f64) -> Result<Tabulated> {
    if !(kappa > 0.0) || !(ymax > 0.0) || !(step > 0.0) || !(lambda >= 0.0) {
        return domain("need kappa, ymax, step > 0 and lambda >= 0");
    }
    let n = (ymax / step).ceil() as usize;
    if lambda == 0.0 {
        return Ok(Tabulated { step, values: vec![0.0; n + 1], slope0: 0.0 });
    }
    bisect_slope(&|_x, u: f64| u * u / kappa, lambda, step, n)
}

/// Bounded solution of phi'' / 2 = v phi with phi(0) = 1; returns the
/// tabulated solution, whose `slope0` is phi'(0).
pub fn solve_phi(v: &dyn Fn(f64) -> f64, ymax: f64, step: f64) -> Result<Tabulated> {
    if !(ymax > 0.0) || !(step > 0.0) {
        return domain("need ymax, step > 0");
    }
    let n = (ymax / step).ceil() as usize;
    bisect_slope(&|x, p: f64| 2.0 * v(x) * p, 1.0, step, n)
}

/// N(1 - exp(-int V)) for the standard Brownian motion and a symmetric
/// potential, from the bounded solution of phi'' / 2 = V phi.
pub fn excursion_laplace(v: &dyn Fn(f64) -> f64, ymax: f64, step: f64) -> Result<f64> {
    Ok(-solve_phi(v, ymax, step)?.slope0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn u_matches_scaling_family() {
        // kappa u'' = u^2 is solved by 6 kappa / (y + c)^2; check against it
        let t = solve_u(1.0, 0.5, 200.0, 2e-3).unwrap();
        let c = 3f64.sqrt();
        for y in [0.0, 0.2, 0.5, 2.0, 10.0] {
            let want = 3.0 / (y + c).powi(2);
            assert!((t.eval(y) - want).abs() < 1e-4 * want.max(1e-2), "y={y}: {} vs {want}", t.eval(y));
        }
    }

    #[test]
    fn zero_lambda_is_zero() {
        let t = solve_u(0.0, 0.5, 10.0, 1e-2).unwrap();
        assert!(t.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn constant_potential() {
        // phi = exp(-sqrt(2c) y), so N(1 - exp(-c sigma)) = sqrt(2c)
        let n = excursion_laplace(&|_| 2.0, 30.0, 1e-3).unwrap();
        assert!((n - 2.0).abs() < 1e-6, "{n}");
    }
}
