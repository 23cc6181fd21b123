//! One-dimensional maximization for unimodal objectives.

use repeater_core::Result;

const INV_PHI: f64 = 0.618_033_988_749_894_8;

/// Golden-section search for the maximum of `f` on `[a, b]`.
pub fn golden_max<F>(mut f: F, mut a: f64, mut b: f64, tol: f64) -> Result<(f64, f64)>
where
    F: FnMut(f64) -> Result<f64>,
{
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    while (b - a).abs() > tol {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d)?;
        }
    }
    let x = 0.5 * (a + b);
    Ok((x, f(x)?))
}

/// Coarse grid over `[lo, hi]` to bracket the maximum, then golden section
/// inside the bracket.
pub fn grid_then_golden<F>(mut f: F, lo: f64, hi: f64, grid: usize, tol: f64) -> Result<(f64, f64)>
where
    F: FnMut(f64) -> Result<f64>,
{
    let h = (hi - lo) / (grid - 1) as f64;
    let mut best = (0, f64::NEG_INFINITY);
    for i in 0..grid {
        let v = f(lo + h * i as f64)?;
        if v > best.1 {
            best = (i, v);
        }
    }
    let a = lo + h * best.0.saturating_sub(1) as f64;
    let b = (lo + h * (best.0 + 1) as f64).min(hi);
    let (x, v) = golden_max(&mut f, a, b, tol)?;
    // the grid point can beat the interior search on a flat plateau
    if best.1 > v {
        return Ok((lo + h * best.0 as f64, best.1));
    }
    Ok((x, v))
}
