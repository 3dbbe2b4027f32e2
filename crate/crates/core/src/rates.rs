//! Empirical convergence rates from traces.

use crate::error::{check_dim, Error, Result};

/// Fewest points accepted by [`slope_fit`].
pub const MIN_WINDOW: usize = 10;

/// Least-squares slope of `ln y` against `ln x`.
pub fn slope_fit(xs: &[f64], ys: &[f64]) -> Result<f64> {
    check_dim("slope fit points", xs.len(), ys.len())?;
    if xs.len() < MIN_WINDOW {
        return Err(Error::InvalidParameter {
            name: "window",
            value: xs.len() as f64,
            requirement: "at least 10 points",
        });
    }
    for (i, (&x, &y)) in xs.iter().zip(ys).enumerate() {
        if !(x > 0.0 && x.is_finite()) {
            return Err(Error::NonPositive { index: i, value: x });
        }
        if !(y > 0.0 && y.is_finite()) {
            return Err(Error::NonPositive { index: i, value: y });
        }
    }
    let n = xs.len() as f64;
    let lx: alloc::vec::Vec<f64> = xs.iter().map(|&x| libm::log(x)).collect();
    let ly: alloc::vec::Vec<f64> = ys.iter().map(|&y| libm::log(y)).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (a, b) in lx.iter().zip(&ly) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
    }
    if sxx == 0.0 {
        return Err(Error::InvalidParameter { name: "x", value: xs[0], requirement: "distinct x values" });
    }
    Ok(sxy / sxx)
}

/// Slope over the points with `lo <= x <= hi`.
pub fn tail_slope(xs: &[f64], ys: &[f64], lo: f64, hi: f64) -> Result<f64> {
    check_dim("slope fit points", xs.len(), ys.len())?;
    let (wx, wy): (alloc::vec::Vec<f64>, alloc::vec::Vec<f64>) =
        xs.iter().zip(ys).filter(|(x, _)| **x >= lo && **x <= hi).map(|(x, y)| (*x, *y)).unzip();
    slope_fit(&wx, &wy)
}
