//! One-dimensional minimization on a half-line: a uniform coarse scan picks
//! the basin of the global minimum, golden-section search refines inside it.

use crate::error::{Error, Result};

const INV_PHI: f64 = 0.618_033_988_749_894_8;

/// Points per coarse scan of `[0, x_hi]`.
pub const SCAN_POINTS: usize = 2000;

const MAX_DOUBLINGS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Minimum {
    pub x: f64,
    pub fx: f64,
}

/// Golden-section search for a minimum of `f` on `[lo, hi]`, stopping when the
/// bracket is narrower than `tol`.
pub fn golden_section<F: FnMut(f64) -> f64>(mut f: F, mut lo: f64, mut hi: f64, tol: f64) -> Minimum {
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while hi - lo > tol {
        // ties move right so the left-most minimizer survives
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2);
        }
    }
    if f1 <= f2 {
        Minimum { x: x1, fx: f1 }
    } else {
        Minimum { x: x2, fx: f2 }
    }
}

/// Index of the first minimum in `values`.
fn first_argmin(values: &[f64]) -> usize {
    let mut best = 0;
    for (k, &v) in values.iter().enumerate().skip(1) {
        if v < values[best] {
            best = k;
        }
    }
    best
}

/// Smallest global minimizer of `f` on `[0, inf)` for objectives that blow up
/// at infinity.
///
/// The scan range starts at `[0, 1]` and doubles until `f(x_hi)` exceeds
/// twice the best scanned value (for positive objectives), then the best scan
/// cell is refined by golden section to `tol`. The origin wins ties up to a
/// few ulps.
pub fn minimize_half_line<F: Fn(f64) -> f64>(f: F, tol: f64) -> Result<Minimum> {
    let f0 = f(0.0);
    let mut x_hi = 1.0_f64;
    let mut scan = Vec::with_capacity(SCAN_POINTS + 1);
    for _ in 0..MAX_DOUBLINGS {
        let h = (x_hi / SCAN_POINTS as f64).max(tol);
        let steps = (x_hi / h).ceil() as usize;
        scan.clear();
        scan.extend((0..=steps).map(|k| f(k as f64 * h)));
        let best = first_argmin(&scan);
        let tail = *scan.last().unwrap();
        let grown = if scan[best] > 0.0 {
            tail > 2.0 * scan[best]
        } else {
            tail > scan[best] + f0.abs().max(1.0)
        };
        if grown && best < steps {
            let lo = best.saturating_sub(1) as f64 * h;
            let hi = (best + 1) as f64 * h;
            let refined = golden_section(&f, lo, hi, tol);
            let mut candidate = if refined.fx <= scan[best] {
                refined
            } else {
                Minimum {
                    x: best as f64 * h,
                    fx: scan[best],
                }
            };
            if candidate.fx >= f0 - 4.0 * f64::EPSILON * f0.abs() {
                candidate = Minimum { x: 0.0, fx: f0 };
            }
            return Ok(candidate);
        }
        x_hi *= 2.0;
    }
    Err(Error::BracketFailure { x_hi })
}
