//! Composite trapezoid rules on intervals and rectangles.
//!
//! Both rules are exact for integrands that are affine in each variable.

use crate::error::{Error, Result};

fn check_steps(n_steps: usize) -> Result<()> {
    if n_steps < 2 {
        return Err(Error::Config(format!(
            "quadrature needs n_steps >= 2, got {n_steps}"
        )));
    }
    Ok(())
}

/// Integrates `f` over `[lo, hi]` with `n_steps` equal panels.
pub fn trapezoid<F>(f: F, lo: f64, hi: f64, n_steps: usize) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    check_steps(n_steps)?;
    let h = (hi - lo) / n_steps as f64;
    let mut acc = 0.5 * (f(lo) + f(hi));
    for k in 1..n_steps {
        acc += f(lo + k as f64 * h);
    }
    Ok(acc * h)
}

/// Integrates `f(x, y)` over `[x_lo, x_hi] x [y_lo, y_hi]` using the tensor
/// product of two trapezoid rules with `n_steps` panels per axis.
pub fn trapezoid_2d<F>(f: F, x: (f64, f64), y: (f64, f64), n_steps: usize) -> Result<f64>
where
    F: Fn(f64, f64) -> f64,
{
    check_steps(n_steps)?;
    let hx = (x.1 - x.0) / n_steps as f64;
    let hy = (y.1 - y.0) / n_steps as f64;
    let weight = |k: usize| if k == 0 || k == n_steps { 0.5 } else { 1.0 };
    let mut acc = 0.0;
    for i in 0..=n_steps {
        let xi = x.0 + i as f64 * hx;
        let wi = weight(i);
        for j in 0..=n_steps {
            acc += wi * weight(j) * f(xi, y.0 + j as f64 * hy);
        }
    }
    Ok(acc * hx * hy)
}
