//! Small regression helpers for empirical order fits.

/// Least-squares line `y = slope x + intercept`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Option<(f64, f64)> {
    let n = xs.len();
    if n < 2 || ys.len() != n {
        return None;
    }
    let mx = xs.iter().sum::<f64>() / n as f64;
    let my = ys.iter().sum::<f64>() / n as f64;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx <= 0.0 {
        return None;
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    Some((slope, my - slope * mx))
}

/// Shells used for exponent fits: `<xi>` in `[max(2, R/4), R]`.
pub fn fit_window(points: &[(f64, f64)], r_max: f64) -> Vec<(f64, f64)> {
    let lo = (r_max / 4.0).max(2.0);
    points.iter().copied().filter(|&(w, _)| w >= lo - 1e-12 && w <= r_max + 1e-12).collect()
}

/// Slope of `log y` against `log x`, ignoring non-positive values.
pub fn loglog_slope(points: &[(f64, f64)]) -> Option<f64> {
    let (xs, ys): (Vec<f64>, Vec<f64>) =
        points.iter().filter(|&&(x, y)| x > 0.0 && y > 1e-300).map(|&(x, y)| (x.ln(), y.ln())).unzip();
    linear_fit(&xs, &ys).map(|f| f.0)
}
