//! Bounded Levenberg–Marquardt least squares with finite-difference Jacobians.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LsqOptions {
    pub max_iterations: usize,
    /// Relative cost reduction below which the fit stops.
    pub ftol: f64,
    /// Relative step size below which the fit stops.
    pub xtol: f64,
    /// Infinity norm of the scaled gradient below which the fit stops.
    pub gtol: f64,
    /// Relative finite-difference step.
    pub fd_step: f64,
}

impl Default for LsqOptions {
    fn default() -> Self {
        Self { max_iterations: 2000, ftol: 1e-15, xtol: 1e-14, gtol: 1e-14, fd_step: 1e-6 }
    }
}

/// Box constraints; `None` in either vector entry means unbounded.
#[derive(Debug, Clone, PartialEq)]
pub struct Bounds {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Bounds {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::DimensionMismatch(lower.len(), upper.len()));
        }
        if lower.iter().zip(&upper).any(|(l, u)| !(l <= u)) {
            return Err(Error::InvalidInput("lower bound above upper bound".into()));
        }
        Ok(Self { lower, upper })
    }

    pub fn unbounded(n: usize) -> Self {
        Self { lower: vec![f64::NEG_INFINITY; n], upper: vec![f64::INFINITY; n] }
    }

    fn clamp(&self, x: &mut [f64]) {
        for (i, v) in x.iter_mut().enumerate() {
            *v = v.clamp(self.lower[i], self.upper[i]);
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LsqResult {
    pub x: Vec<f64>,
    /// Sum of squared residuals.
    pub cost: f64,
    pub residuals: Vec<f64>,
    pub jacobian: DMatrix<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl LsqResult {
    /// `s²(JᵀJ)⁻¹` with `s² = cost/(m − n)`.
    pub fn covariance(&self) -> Option<DMatrix<f64>> {
        let (m, n) = self.jacobian.shape();
        if m <= n {
            return None;
        }
        let jtj = self.jacobian.transpose() * &self.jacobian;
        let s2 = self.cost / (m - n) as f64;
        jtj.try_inverse().map(|inv| inv * s2)
    }

    pub fn std_errors(&self) -> Option<Vec<f64>> {
        self.covariance().map(|c| (0..c.nrows()).map(|i| c[(i, i)].max(0.0).sqrt()).collect())
    }
}

fn sum_sq(r: &[f64]) -> f64 {
    r.iter().map(|v| v * v).sum()
}

fn jacobian(f: &dyn Fn(&[f64]) -> Vec<f64>, x: &[f64], r0: &[f64], b: &Bounds, rel: f64) -> DMatrix<f64> {
    let m = r0.len();
    let n = x.len();
    let mut j = DMatrix::zeros(m, n);
    let mut xp = x.to_vec();
    for k in 0..n {
        let h = rel * x[k].abs().max(1e-3);
        let up = x[k] + h <= b.upper[k];
        let down = x[k] - h >= b.lower[k];
        if up && down {
            xp[k] = x[k] + h;
            let rp = f(&xp);
            xp[k] = x[k] - h;
            let rm = f(&xp);
            for i in 0..m {
                j[(i, k)] = (rp[i] - rm[i]) / (2.0 * h);
            }
        } else {
            let s = if up { h } else { -h };
            xp[k] = x[k] + s;
            let rp = f(&xp);
            for i in 0..m {
                j[(i, k)] = (rp[i] - r0[i]) / s;
            }
        }
        xp[k] = x[k];
    }
    j
}

/// Minimize `Σ r_i(x)²` from `x0` inside `bounds`.
///
/// Running out of iterations is not an error here; `converged` reports it.
pub fn levenberg_marquardt(
    f: &dyn Fn(&[f64]) -> Vec<f64>,
    x0: &[f64],
    bounds: Option<&Bounds>,
    opts: &LsqOptions,
) -> Result<LsqResult> {
    let n = x0.len();
    let b = match bounds {
        Some(b) if b.lower.len() != n => return Err(Error::DimensionMismatch(b.lower.len(), n)),
        Some(b) => b.clone(),
        None => Bounds::unbounded(n),
    };
    let mut x = x0.to_vec();
    b.clamp(&mut x);
    let mut r = f(&x);
    if r.iter().any(|v| !v.is_finite()) {
        return Err(Error::FitDivergence("non-finite residual at the starting point".into()));
    }
    let mut cost = sum_sq(&r);
    let mut j = jacobian(f, &x, &r, &b, opts.fd_step);
    let mut lambda = 1e-3;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < opts.max_iterations {
        iterations += 1;
        let jt = j.transpose();
        let jtj = &jt * &j;
        let g = &jt * DVector::from_column_slice(&r);
        let diag: Vec<f64> = (0..n).map(|i| jtj[(i, i)].max(1e-300)).collect();
        let gscaled = (0..n).map(|i| g[i].abs() / diag[i].sqrt()).fold(0.0, f64::max);
        if gscaled <= opts.gtol * cost.sqrt().max(1e-300) || cost == 0.0 {
            converged = true;
            break;
        }
        let mut accepted = false;
        for _ in 0..60 {
            let mut a = jtj.clone();
            for i in 0..n {
                a[(i, i)] += lambda * diag[i];
            }
            let step = match a.clone().cholesky() {
                Some(ch) => ch.solve(&(-&g)),
                None => match a.svd(true, true).solve(&(-&g), 1e-14) {
                    Ok(s) => s,
                    Err(_) => break,
                },
            };
            let mut xn: Vec<f64> = x.iter().zip(step.iter()).map(|(a, s)| a + s).collect();
            b.clamp(&mut xn);
            let rn = f(&xn);
            let cn = sum_sq(&rn);
            if cn.is_finite() && cn < cost {
                let dx = xn.iter().zip(&x).map(|(a, c)| (a - c) * (a - c)).sum::<f64>().sqrt();
                let xn_norm = xn.iter().map(|v| v * v).sum::<f64>().sqrt();
                let rel_drop = (cost - cn) / cost.max(1e-300);
                x = xn;
                r = rn;
                cost = cn;
                lambda = (lambda / 3.0).max(1e-12);
                accepted = true;
                if rel_drop < opts.ftol || dx < opts.xtol * (xn_norm + opts.xtol) {
                    converged = true;
                }
                break;
            }
            lambda *= 4.0;
            if lambda > 1e16 {
                break;
            }
        }
        if !accepted {
            // no downhill step at any damping: a stationary point to working precision
            converged = true;
            break;
        }
        j = jacobian(f, &x, &r, &b, opts.fd_step);
        if converged {
            break;
        }
    }
    Ok(LsqResult { x, cost, residuals: r, jacobian: j, iterations, converged })
}

/// Run from each start in order and keep the lowest cost; ties keep the earliest.
pub fn multistart(
    f: &dyn Fn(&[f64]) -> Vec<f64>,
    starts: &[Vec<f64>],
    bounds: Option<&Bounds>,
    opts: &LsqOptions,
) -> Result<LsqResult> {
    let mut best: Option<LsqResult> = None;
    let mut last_err = None;
    for s in starts {
        match levenberg_marquardt(f, s, bounds, opts) {
            Ok(res) => {
                if best.as_ref().is_none_or(|b| res.cost < b.cost) {
                    best = Some(res);
                }
            }
            Err(e) => last_err = Some(e),
        }
    }
    best.ok_or_else(|| last_err.unwrap_or_else(|| Error::InvalidInput("no starting points".into())))
}
