//! Safeguarded bisection/Newton root finder for strictly decreasing functions.

use crate::{Error, Result};

/// Residual at which iteration stops early.
const TARGET_RESIDUAL: f64 = 1e-12;
/// Largest residual still reported as converged once the bracket collapses.
pub(crate) const ACCEPT_RESIDUAL: f64 = 1e-9;

/// Find the root of a strictly decreasing `f` inside `[lo, hi]`, where
/// `f(lo) >= 0 >= f(hi)`.
///
/// Plain bisection runs until the bracket is narrower than `newton_width`,
/// then Newton steps take over; any Newton step that leaves the current
/// bracket falls back to a bisection step.
pub(crate) fn solve_decreasing<F, D>(
    f: F,
    df: D,
    mut lo: f64,
    mut hi: f64,
    newton_width: f64,
    max_iter: usize,
) -> Result<f64>
where
    F: Fn(f64) -> f64,
    D: Fn(f64) -> f64,
{
    debug_assert!(lo <= hi);
    let mut x = 0.5 * (lo + hi);
    let mut fx = f(x);
    for _ in 0..max_iter {
        if fx.is_nan() {
            return Err(Error::NoConvergence {
                iterations: 0,
                residual: f64::NAN,
            });
        }
        if fx.abs() <= TARGET_RESIDUAL {
            return Ok(x);
        }
        if fx > 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let mid = 0.5 * (lo + hi);
        let next = if hi - lo > newton_width {
            mid
        } else {
            let slope = df(x);
            let candidate = x - fx / slope;
            if slope.is_finite() && slope != 0.0 && candidate > lo && candidate < hi {
                candidate
            } else {
                mid
            }
        };
        if next == x {
            // Bracket collapsed to adjacent floats.
            break;
        }
        x = next;
        fx = f(x);
    }
    if fx.abs() <= ACCEPT_RESIDUAL {
        Ok(x)
    } else {
        Err(Error::NoConvergence {
            iterations: max_iter,
            residual: fx,
        })
    }
}
