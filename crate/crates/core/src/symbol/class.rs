use super::{abs, multi_indices, Symbol};
use crate::error::Result;
use crate::fit::{fit_window, loglog_slope};
use crate::group::CompactGroup;

#[derive(Clone, Debug)]
pub struct ClassEntry {
    /// Exponents over the vector-field basis.
    pub alpha: Vec<u8>,
    /// Exponents over the difference family.
    pub beta: Vec<u8>,
    /// `max ||d^alpha D^beta sigma||_op <xi>^{-m + rho|beta| - delta|alpha|}` over the full band.
    pub constant: f64,
    /// Same maximum restricted to `<xi>` up to half the band.
    pub constant_half: f64,
    pub ratio: f64,
    /// Fitted growth exponent of the unweighted shell maxima.
    pub slope: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct SymbolClassReport {
    pub m: f64,
    pub rho: f64,
    pub delta: f64,
    pub entries: Vec<ClassEntry>,
    pub worst_ratio: f64,
    /// `slope(0,0) - slope(0,beta)` averaged over `|beta| = 1`.
    pub fitted_rho: Option<f64>,
    /// `slope(alpha,0) - slope(0,0)` averaged over `|alpha| = 1`.
    pub fitted_delta: Option<f64>,
    pub verdict: bool,
}

/// Empirical check of the `S^m_{rho,delta}` estimates: weighted constants over the band and
/// over its lower half; the verdict requires every ratio below 1.5.
pub fn class_diagnose<G: CompactGroup>(
    sigma: &Symbol<G>,
    m: f64,
    rho: f64,
    delta: f64,
    alpha_max: usize,
    beta_max: usize,
) -> Result<SymbolClassReport> {
    let ws = &sigma.ws;
    let dim = ws.group.dim();
    let betas: Vec<Vec<u8>> = multi_indices(ws.family.len(), beta_max);
    let alphas: Vec<Vec<u8>> = multi_indices(dim, alpha_max);
    let words: Vec<Vec<u8>> = alphas
        .iter()
        .map(|a| a.iter().enumerate().flat_map(|(i, &k)| std::iter::repeat_n(i as u8, k as usize)).collect())
        .collect();
    let diffs = sigma.differences(&betas)?;
    // entries at roundoff level are treated as vanishing
    let noise = 1e-10 * diffs[0].sup_op_norm().max(1.0);
    let mut entries = Vec::new();
    for (beta, d) in betas.iter().zip(&diffs) {
        let ders = d.x_derivatives(&words)?;
        for (alpha, s) in alphas.iter().zip(&ders) {
            let shells = s.shell_op_norms();
            let r_max = shells.last().map_or(1.0, |s| s.0);
            let expo = -m + rho * abs(beta) as f64 - delta * abs(alpha) as f64;
            let weighted =
                |lim: f64| shells.iter().filter(|s| s.0 <= lim + 1e-12).map(|&(w, v)| v * w.powf(expo)).fold(0.0, f64::max);
            let constant = weighted(r_max);
            let constant_half = weighted(r_max / 2.0);
            let ratio = if constant <= noise {
                1.0
            } else if constant_half > noise {
                constant / constant_half
            } else {
                f64::INFINITY
            };
            entries.push(ClassEntry {
                alpha: alpha.clone(),
                beta: beta.clone(),
                constant,
                constant_half,
                ratio,
                slope: loglog_slope(&fit_window(&shells, r_max)),
            });
        }
    }
    let slope_of = |a: usize, b: usize| entries.iter().find(|e| abs(&e.alpha) == a && abs(&e.beta) == b);
    let base = slope_of(0, 0).and_then(|e| e.slope);
    let mean = |v: Vec<f64>| if v.is_empty() { None } else { Some(v.iter().sum::<f64>() / v.len() as f64) };
    let fitted_rho = base.and_then(|b0| {
        mean(entries.iter().filter(|e| abs(&e.alpha) == 0 && abs(&e.beta) == 1).filter_map(|e| e.slope.map(|s| b0 - s)).collect())
    });
    let fitted_delta = base.and_then(|b0| {
        mean(entries.iter().filter(|e| abs(&e.alpha) == 1 && abs(&e.beta) == 0).filter_map(|e| e.slope.map(|s| s - b0)).collect())
    });
    let worst_ratio = entries.iter().map(|e| e.ratio).fold(0.0, f64::max);
    Ok(SymbolClassReport { m, rho, delta, worst_ratio, fitted_rho, fitted_delta, verdict: worst_ratio < 1.5, entries })
}
