//! Sylvester equations, the constructive Garding decomposition `Re A = B^* B + C`, its
//! higher-order refinement, L2 boundedness certificates and empirical inequality checks.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::calculus::{adjoint_symbol, compose, quantize_adjoint_apply, quantize_apply};
use crate::error::{Error, Result};
use crate::fit::{fit_window, loglog_slope};
use crate::fourier::{inverse_on, sobolev_norm, GroupFunction, MatrixSequence};
use crate::group::{CompactGroup, Dual};
use crate::linalg::{eigh, hermitian_part, is_hermitian, op_norm, sylvester_hermitian, CMat, C64};
use crate::symbol::{Symbol, Workspace, XBand};

/// Default radius below which blocks may be modified, standing in for a smoothing operator.
pub const DEFAULT_EXCISION: f64 = 2.0;

/// `S X + X S = R` for positive definite `S`, in the eigenbasis of `S`. The solution is
/// Hermitian whenever `R` is.
pub fn sylvester_solve(s: &CMat, r: &CMat) -> Result<CMat> {
    if s.nrows() != s.ncols() || r.shape() != s.shape() {
        return Err(Error::InvalidArgument("Sylvester operands must be square of equal size".into()));
    }
    let scale = op_norm(s).max(f64::MIN_POSITIVE);
    if !is_hermitian(s, 1e-12 * scale) {
        return Err(Error::NotPositiveDefinite("coefficient is not Hermitian".into()));
    }
    let x = sylvester_hermitian(&hermitian_part(s), r).ok_or_else(|| {
        let (vals, _) = eigh(&hermitian_part(s));
        Error::NotPositiveDefinite(format!("coefficient has eigenvalue {:.3e}", vals[0]))
    })?;
    if is_hermitian(r, 0.0) {
        Ok(hermitian_part(&x))
    } else {
        Ok(x)
    }
}

fn rank_check(rho: f64, delta: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&delta) || !(0.0..=1.0).contains(&rho) || delta >= rho {
        return Err(Error::InvalidArgument(format!("need 0 <= delta < rho <= 1, got rho = {rho}, delta = {delta}")));
    }
    Ok(())
}

fn fitted<G: CompactGroup>(s: &Symbol<G>) -> Option<f64> {
    loglog_slope(&fit_window(&s.shell_op_norms(), s.ws.r_max))
}

/// Replaces blocks below `excision` that are not positive definite by `<xi>^order I`; returns
/// the modified symbol and the number of blocks changed. A non-positive block at or above the
/// excision radius is an error.
fn excise_to_positive<G: CompactGroup>(sigma: &Symbol<G>, order: f64, excision: f64) -> Result<(Symbol<G>, usize)> {
    let changed = std::sync::atomic::AtomicUsize::new(0);
    let out = sigma.try_map_blocks(sigma.x_band, |ix, k, b| {
        let xi = sigma.ws.dual.get(k);
        let h = hermitian_part(b);
        let scale = op_norm(b).max(f64::MIN_POSITIVE);
        let (vals, _) = eigh(&h);
        let ok = is_hermitian(b, 1e-10 * scale) && vals[0] > 0.0;
        if ok || !sigma.is_valid(k) {
            return Ok(b.clone());
        }
        if xi.weight() < excision {
            changed.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
            return Ok(CMat::identity(xi.dim, xi.dim) * C64::new(xi.weight().powf(order), 0.0));
        }
        let ws = &sigma.ws;
        let x = if sigma.is_invariant() { "any".to_string() } else { format!("{:?}", ws.group.coords(&ws.xgrid.points[ix])) };
        Err(Error::NotPositiveDefinite(format!(
            "x[{ix}]={x} xi={}: smallest eigenvalue {:.3e} of the Hermitian part",
            xi.label_string(),
            vals[0]
        )))
    })?;
    Ok((out, changed.into_inner()))
}

/// Per-shell `min_x min_xi lambda_min(sigma) <xi>^{-order}` over valid blocks at or beyond `from`.
fn lower_profile<G: CompactGroup>(sigma: &Symbol<G>, order: f64, from: f64) -> Vec<(f64, f64)> {
    let valid: Vec<usize> = sigma.valid_indices().into_iter().filter(|&k| sigma.ws.dual.get(k).weight() >= from).collect();
    let per: Vec<Vec<f64>> = (0..sigma.nx())
        .into_par_iter()
        .map(|ix| valid.iter().map(|&k| eigh(&hermitian_part(&sigma.block(ix, k))).0[0]).collect())
        .collect();
    let mut shells: Vec<(f64, f64)> = Vec::new();
    for (j, &k) in valid.iter().enumerate() {
        let w = sigma.ws.dual.get(k).weight();
        let v = per.iter().map(|p| p[j]).fold(f64::INFINITY, f64::min) * w.powf(-order);
        match shells.last_mut() {
            Some(last) if (last.0 - w).abs() < 1e-12 => last.1 = last.1.min(v),
            _ => shells.push((w, v)),
        }
    }
    shells
}

fn ellipticity_guard<G: CompactGroup>(sigma: &Symbol<G>, order: f64, excision: f64) -> Result<f64> {
    let prof = lower_profile(sigma, order, excision);
    let c = prof.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    if !(c > 0.0) {
        return Err(Error::NotPositiveDefinite(format!("lower bound {c:.3e} beyond the excision radius")));
    }
    if let Some(slope) = loglog_slope(&fit_window(&prof, sigma.ws.r_max)) {
        if slope < -0.2 {
            return Err(Error::InvalidArgument(format!(
                "symbol is not elliptic of order {order}: normalized lower bound decays like <xi>^{slope:.2}"
            )));
        }
    }
    Ok(c)
}

/// `sigma_B = sqrt(sigma_A) + sigma_0` and its diagnostics.
#[derive(Clone, Debug)]
pub struct GardingDecomposition<G: CompactGroup> {
    pub sqrt: Symbol<G>,
    pub sigma0: Symbol<G>,
    pub b: Symbol<G>,
    /// `sigma_{Re A} - sigma_{B^* B}`, both expanded to first order.
    pub residual: Symbol<G>,
    pub residual_slope: Option<f64>,
    /// Slope of the pointwise Hermitian part of the residual.
    pub residual_herm_slope: Option<f64>,
    /// Same residual with `sigma_0 = 0`, for comparison.
    pub uncorrected: Symbol<G>,
    pub uncorrected_slope: Option<f64>,
    pub sigma0_slope: Option<f64>,
    pub sigma0_sup: f64,
    /// Relative size of the anti-Hermitian part of the first-order defect that was discarded.
    pub skew_ratio: f64,
    /// Lower constant `c` in `sigma_A >= c <xi>^{2(rho - delta)}` beyond the excision radius.
    pub lower_bound: f64,
    pub modified_blocks: usize,
    pub excision: f64,
}

fn re_part_symbol<G: CompactGroup>(sigma: &Symbol<G>, n: usize) -> Result<Symbol<G>> {
    let star = adjoint_symbol(sigma, n)?;
    let margin = star.margin.max(sigma.margin);
    Ok(sigma.add(&star).scale(C64::new(0.5, 0.0)).with_margin(margin))
}

fn gram_symbol<G: CompactGroup>(b: &Symbol<G>, n: usize) -> Result<Symbol<G>> {
    compose(&adjoint_symbol(b, n)?, b, n)
}

pub fn garding_decompose<G: CompactGroup>(sigma_a: &Symbol<G>, rho: f64, delta: f64) -> Result<GardingDecomposition<G>> {
    garding_decompose_with(sigma_a, rho, delta, DEFAULT_EXCISION)
}

pub fn garding_decompose_with<G: CompactGroup>(
    sigma_a: &Symbol<G>,
    rho: f64,
    delta: f64,
    excision: f64,
) -> Result<GardingDecomposition<G>> {
    rank_check(rho, delta)?;
    let ws = sigma_a.ws.clone();
    if ws.max_order < 1 {
        return Err(Error::OrderOverflow { requested: 1, max: ws.max_order });
    }
    let order = 2.0 * (rho - delta);
    let (a, modified_blocks) = excise_to_positive(sigma_a, order, excision)?;
    let lower_bound = ellipticity_guard(&a, order, excision)?;
    let root = crate::funcalc::symbol_sqrt(&a)?;

    let re_a = re_part_symbol(&a, 1)?;
    let residual_of = |bb: &Symbol<G>| -> Result<Symbol<G>> {
        let g = gram_symbol(bb, 1)?;
        let margin = g.margin.max(re_a.margin);
        Ok(re_a.sub(&g).with_margin(margin))
    };
    let uncorrected = residual_of(&root)?;

    // first-order correction: r s0 + s0 r = Herm(Re a - r* # r)
    let (rhs, skew_ratio) = if root.is_invariant() {
        (Symbol::zeros(ws.clone()).with_margin(1), 0.0)
    } else {
        let herm = uncorrected.map_blocks(uncorrected.x_band, |_, _, b| hermitian_part(b));
        let skew = uncorrected.sub(&herm);
        let scale = herm.sup_op_norm().max(f64::MIN_POSITIVE);
        (herm, skew.sup_op_norm() / scale)
    };
    let sigma0 = root
        .try_map_blocks(root.x_band.nonlinear(), |ix, k, r| {
            if !rhs.is_valid(k) {
                return Ok(CMat::zeros(r.nrows(), r.ncols()));
            }
            sylvester_solve(r, &rhs.block(ix.min(rhs.nx() - 1), k))
        })?
        .with_margin(rhs.margin.max(1));
    let b = root.add(&sigma0).with_margin(sigma0.margin);
    let residual = residual_of(&b)?;
    let sigma0_sup = sigma0.sup_op_norm();
    Ok(GardingDecomposition {
        residual_slope: fitted(&residual),
        residual_herm_slope: fitted(&residual.map_blocks(residual.x_band, |_, _, b| hermitian_part(b))),
        uncorrected_slope: fitted(&uncorrected),
        uncorrected,
        sigma0_slope: if sigma0_sup > 1e-13 * root.sup_op_norm() { fitted(&sigma0) } else { None },
        sqrt: root,
        sigma0,
        b,
        residual,
        sigma0_sup,
        skew_ratio,
        lower_bound,
        modified_blocks,
        excision,
    })
}

/// One trial of an inequality check.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GardingTrial {
    pub re_form: f64,
    pub sobolev_sq: f64,
    pub l2_sq: f64,
}

#[derive(Clone, Debug)]
pub struct GardingReport {
    /// Order of the operator; the inequality uses `H^{order/2}`.
    pub order: f64,
    pub c1: f64,
    pub c2: f64,
    /// Least-squares coefficients before clipping and sweeping.
    pub c1_ls: f64,
    pub c2_ls: f64,
    /// `min_i Re(A f_i, f_i) - c1 ||f_i||^2_{H} + c2 ||f_i||^2_{L2}`.
    pub margin: f64,
    /// Trial attaining the margin.
    pub witness: usize,
    pub trials: Vec<GardingTrial>,
    pub seed: u64,
    pub degree: u32,
    /// Fitted order of the first-order Garding residual, when the order allows a decomposition.
    pub residual_slope: Option<f64>,
    pub pass: bool,
}

/// Largest degree `D` such that every workspace class of degree `<= D` is valid for `sigma`.
pub fn trial_degree<G: CompactGroup>(sigma: &Symbol<G>) -> u32 {
    let ws = &sigma.ws;
    let bad = (0..ws.dual.len()).filter(|&k| !sigma.is_valid(k)).map(|k| ws.dual.get(k).degree()).min();
    let top = ws.dual.iter().map(|x| x.degree()).max().unwrap_or(0);
    match bad {
        Some(0) => 0,
        Some(d) => d - 1,
        None => top,
    }
}

fn x_degree<G: CompactGroup>(sigma: &Symbol<G>) -> u32 {
    match sigma.x_band {
        XBand::Exact(b) => b,
        XBand::Smooth => sigma.ws.x_capacity,
    }
}

fn sub_dual<G: CompactGroup>(ws: &Workspace<G>, degree: u32) -> Arc<Dual> {
    Arc::new(Dual::new(ws.group.id(), ws.dual.iter().filter(|x| x.degree() <= degree).cloned().collect()))
}

/// Random function on classes of degree `<= degree`: complex Gaussian coefficients scaled by
/// `<xi>^{-sobolev}` and a random amplitude per degree shell, truncated at a random top degree.
/// Unit L2 norm.
pub fn trial_function<G: CompactGroup, R: Rng + ?Sized>(
    ws: &Workspace<G>,
    grid: Arc<crate::group::QuadratureGrid<G::Point>>,
    degree: u32,
    sobolev: f64,
    rng: &mut R,
) -> Result<GroupFunction<G>> {
    let dual = sub_dual(ws, degree);
    let top = rng.random_range(0..=degree);
    let amps: Vec<f64> = (0..=degree).map(|_| rng.random::<f64>()).collect();
    let mut s = MatrixSequence::zeros(dual.clone());
    for (k, xi) in dual.iter().enumerate() {
        let d = xi.dim;
        let a = if xi.degree() <= top { amps[xi.degree() as usize] * xi.weight().powf(-sobolev) } else { 0.0 };
        let m = CMat::from_fn(d, d, |_, _| C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)) * a);
        s.set_block(k, &m);
    }
    if s.data.iter().all(|z| z.norm_sqr() == 0.0) {
        s.set_block(0, &CMat::identity(dual.get(0).dim, dual.get(0).dim));
    }
    let mut f = inverse_on(&ws.group, grid, &s)?;
    f.degree = degree;
    let n = f.l2_norm_sq().sqrt();
    Ok(f.scale(C64::new(1.0 / n, 0.0)))
}

fn trial_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

/// Fits `Re(A f, f) >= c1 ||f||^2_H - c2 ||f||^2_{L2}` over the trials: `c2` from least squares
/// (clipped at 0), then the largest feasible `c1`.
pub fn fit_constants(trials: &[GardingTrial]) -> (f64, f64, f64, f64, f64, usize) {
    let (mut shh, mut shl, mut sll, mut sah, mut sal) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for t in trials {
        shh += t.sobolev_sq * t.sobolev_sq;
        shl += t.sobolev_sq * t.l2_sq;
        sll += t.l2_sq * t.l2_sq;
        sah += t.re_form * t.sobolev_sq;
        sal += t.re_form * t.l2_sq;
    }
    // a ~ c1 h - c2 l
    let det = shh * sll - shl * shl;
    let (c1_ls, c2_ls) = if det.abs() > 1e-14 * shh * sll {
        ((sah * sll - sal * shl) / det, -(shh * sal - shl * sah) / det)
    } else {
        (sah / shh, 0.0)
    };
    let c2 = c2_ls.max(0.0);
    let c1 = trials.iter().map(|t| (t.re_form + c2 * t.l2_sq) / t.sobolev_sq).fold(f64::INFINITY, f64::min);
    let (margin, witness) = trials
        .iter()
        .enumerate()
        .map(|(i, t)| (t.re_form - c1 * t.sobolev_sq + c2 * t.l2_sq, i))
        .fold((f64::INFINITY, 0), |a, b| if b.0 < a.0 { b } else { a });
    (c1, c2, c1_ls, c2_ls, margin, witness)
}

/// Evaluates `(Re(A f, f), ||f||^2_{H^{order/2}}, ||f||^2_{L2})` on seeded random functions and
/// fits the Garding constants. For `0 < order <= 2` the first-order decomposition with
/// `rho - delta = order / 2` is attempted and its residual slope reported.
pub fn garding_verify<G: CompactGroup>(sigma_a: &Symbol<G>, order: f64, trials: usize, seed: u64) -> Result<GardingReport> {
    let ws = &sigma_a.ws;
    let sobolev = 0.5 * order;
    let degree = trial_degree(sigma_a);
    let grid = Arc::new(ws.group.grid_for_degree(2 * (degree + x_degree(sigma_a)))?);
    let data: Vec<Result<GardingTrial>> = (0..trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = trial_rng(seed, i);
            let f = trial_function(ws, grid.clone(), degree, sobolev, &mut rng)?;
            let af = quantize_apply(sigma_a, &f)?;
            let h = sobolev_norm(&f, sobolev)?;
            Ok(GardingTrial { re_form: af.inner(&f).re, sobolev_sq: h * h, l2_sq: f.l2_norm_sq() })
        })
        .collect();
    let data: Vec<GardingTrial> = data.into_iter().collect::<Result<_>>()?;
    if data.is_empty() {
        return Err(Error::InvalidArgument("at least one trial is required".into()));
    }
    let (c1, c2, c1_ls, c2_ls, margin, witness) = fit_constants(&data);
    let residual_slope = if order > 0.0 && order <= 2.0 && ws.max_order >= 1 {
        garding_decompose(sigma_a, 0.5 * order, 0.0).ok().and_then(|d| d.residual_slope)
    } else {
        None
    };
    Ok(GardingReport {
        order,
        c1,
        c2,
        c1_ls,
        c2_ls,
        margin,
        witness,
        trials: data,
        seed,
        degree,
        residual_slope,
        pass: c1 > 0.0 && margin >= -1e-9,
    })
}

/// Per-trial `(Re(A f, f) - ||B f||^2) / ||f||^2` for the decomposition `B`, against the bound
/// `c = sup ||sigma_C||_op + 1` built from the residual symbol.
#[derive(Clone, Debug)]
pub struct ChainReport {
    pub ratios: Vec<f64>,
    pub worst: f64,
    pub bound: f64,
    pub pass: bool,
}

pub fn garding_chain<G: CompactGroup>(
    sigma_a: &Symbol<G>,
    decomposition: &GardingDecomposition<G>,
    trials: usize,
    seed: u64,
) -> Result<ChainReport> {
    let ws = &sigma_a.ws;
    let b = &decomposition.b;
    let degree = trial_degree(b).min(trial_degree(sigma_a));
    let bx = x_degree(sigma_a).max(x_degree(b));
    let grid = Arc::new(ws.group.grid_for_degree(2 * (degree + bx))?);
    let ratios: Vec<Result<f64>> = (0..trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = trial_rng(seed, i);
            let f = trial_function(ws, grid.clone(), degree, 0.0, &mut rng)?;
            let af = quantize_apply(sigma_a, &f)?;
            let bf = quantize_apply(b, &f)?;
            Ok((af.inner(&f).re - bf.l2_norm_sq()) / f.l2_norm_sq())
        })
        .collect();
    let ratios: Vec<f64> = ratios.into_iter().collect::<Result<_>>()?;
    let bound = decomposition.residual.sup_op_norm() + 1.0;
    let worst = ratios.iter().map(|r| r.abs()).fold(0.0, f64::max);
    Ok(ChainReport { pass: worst <= bound, ratios, worst, bound })
}

/// `B_0 + ... + B_k` for `A~ = <xi>^{-m} Re A <xi>^{-m}`, `A` of order `2m`.
#[derive(Clone, Debug)]
pub struct SqrtSeries<G: CompactGroup> {
    pub a_tilde: Symbol<G>,
    pub terms: Vec<Symbol<G>>,
    /// `A~ - S_j^* S_j` with `S_j = B_0 + ... + B_{j-1}`, for `j = 1, ..., k + 1`.
    pub residuals: Vec<Symbol<G>>,
    /// Slopes are fitted over the usual window restricted to `<xi> >= fit_from[j]`.
    pub residual_slopes: Vec<Option<f64>>,
    pub fit_from: Vec<f64>,
    /// Slopes of the pointwise Hermitian parts, the part each Sylvester step targets.
    pub herm_residual_slopes: Vec<Option<f64>>,
    /// Largest `k` carried out; lower than requested when the expansion order runs out.
    pub achieved_k: usize,
    /// Lower bound `c` in `sigma_{A~} >= c I` beyond the excision radius.
    pub lower_bound: f64,
    pub modified_blocks: usize,
    /// Largest `||X - X^*||` over the partial sums.
    pub hermitian_defect: f64,
}

pub fn higher_order_sqrt_series<G: CompactGroup>(
    sigma_a: &Symbol<G>,
    m: f64,
    k_max: usize,
    rho: f64,
    delta: f64,
) -> Result<SqrtSeries<G>> {
    rank_check(rho, delta)?;
    let ws = sigma_a.ws.clone();
    let n = ws.max_order;
    if n < 1 {
        return Err(Error::OrderOverflow { requested: 1, max: n });
    }
    // the truncation error of order-n expansions must stay below the target residual order
    let k = k_max.min(n - 1);
    let lam = Symbol::bessel(ws.clone(), -m);
    let re_a = re_part_symbol(sigma_a, n)?;
    let a_tilde = compose(&compose(&lam, &re_a, n)?, &lam, n)?;
    // the pointwise skew part of A~ is one order lower and stays in the residuals
    let a_herm = a_tilde.map_blocks(a_tilde.x_band, |_, _, b| hermitian_part(b));

    // below `cut` the truncated expansions are not asymptotic and A~ is clamped; each later
    // term is switched on only where the previous residual is clean, since differences of
    // order n reach about n shells towards the origin and a residual applies two expansions
    let reach = 2.0 * n as f64;
    let cut = (ws.r_max / 8.0).max(DEFAULT_EXCISION);
    let lower = lower_profile(&a_herm, 0.0, cut);
    let c = lower.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    if !(c > 0.0) {
        return Err(Error::LowerBound(format!("normalized symbol has lower bound {c:.3e} beyond the excision radius")));
    }
    let changed = std::sync::atomic::AtomicUsize::new(0);
    let a_herm = a_herm.map_blocks(a_herm.x_band, |_, kk, b| {
        if a_herm.ws.dual.get(kk).weight() >= cut {
            return b.clone();
        }
        let (vals, _) = eigh(b);
        if vals[0] >= c {
            return b.clone();
        }
        changed.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
        crate::linalg::hermitian_map(b, |v| C64::new(v.max(c), 0.0))
    });

    let b0 = crate::funcalc::symbol_sqrt(&a_herm)?;
    let mut terms = vec![b0.clone()];
    let mut residuals = Vec::new();
    let mut partial = b0.clone();
    let mut hermitian_defect: f64 = 0.0;
    let clean: Vec<f64> = (0..=k).map(|j| cut + reach * (j + 1) as f64).collect();
    for j in 0..=k {
        let gram = gram_symbol(&partial, n)?;
        let margin = gram.margin.max(a_tilde.margin);
        let r = a_tilde.sub(&gram).with_margin(margin);
        residuals.push(r.clone());
        hermitian_defect = hermitian_defect.max(partial.sub(&partial.adjoint_pointwise()).sup_op_norm());
        if j == k {
            break;
        }
        let bk = b0
            .try_map_blocks(r.x_band.plus(b0.x_band).nonlinear(), |ix, kk, s| {
                if !r.is_valid(kk) {
                    return Ok(CMat::zeros(s.nrows(), s.ncols()));
                }
                if ws.dual.get(kk).weight() < clean[j] {
                    return Ok(CMat::zeros(s.nrows(), s.ncols()));
                }
                sylvester_solve(s, &hermitian_part(&r.block(ix.min(r.nx() - 1), kk)))
            })?
            .with_margin(margin);
        partial = partial.add(&bk).with_margin(margin);
        terms.push(bk);
    }
    let slope_from = |r: &Symbol<G>, from: f64| {
        let pts: Vec<(f64, f64)> = fit_window(&r.shell_op_norms(), ws.r_max).into_iter().filter(|p| p.0 >= from).collect();
        loglog_slope(&pts)
    };
    let residual_slopes = residuals.iter().zip(&clean).map(|(r, &from)| slope_from(r, from)).collect();
    let herm_residual_slopes = residuals
        .iter()
        .zip(&clean)
        .map(|(r, &from)| slope_from(&r.map_blocks(r.x_band, |_, _, b| hermitian_part(b)), from))
        .collect();
    Ok(SqrtSeries {
        a_tilde,
        terms,
        residuals,
        residual_slopes,
        achieved_k: k,
        herm_residual_slopes,
        fit_from: clean,
        lower_bound: c,
        modified_blocks: changed.into_inner(),
        hermitian_defect,
    })
}

#[derive(Clone, Debug)]
pub struct L2Certificate {
    pub sup_norm: f64,
    /// `M = sup ||sigma||_op + 1`.
    pub m_bound: f64,
    /// `M^2 - sigma_{A^* A} - sigma_{B^* B}` profile.
    pub residual_sup: f64,
    pub residual_slope: Option<f64>,
    /// Power-iteration estimate of the operator norm on the band.
    pub power_norm: f64,
    pub iterations: usize,
    pub slack: f64,
    pub pass: bool,
}

/// Power iteration for `||P A P||` on classes of degree `<= degree`, `P` the band projection.
pub fn power_iteration_norm<G: CompactGroup>(sigma: &Symbol<G>, max_iter: usize, seed: u64) -> Result<(f64, usize)> {
    let ws = &sigma.ws;
    let degree = trial_degree(sigma);
    let b = match sigma.x_band {
        XBand::Exact(b) => b,
        XBand::Smooth => return Err(Error::Exactness("power iteration needs a band-limited symbol".into())),
    };
    let grid = Arc::new(ws.group.grid_for_degree(2 * (degree + b))?);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v = inverse_on(&ws.group, grid.clone(), &MatrixSequence::random(sub_dual(ws, degree), &mut rng))?;
    v.degree = degree;
    let mut est = 0.0;
    let mut it = 0;
    while it < max_iter {
        it += 1;
        let n = v.l2_norm_sq().sqrt();
        v = v.scale(C64::new(1.0 / n, 0.0));
        let av = quantize_apply(sigma, &v)?;
        let w = quantize_adjoint_apply(sigma, &av, degree)?;
        let next = w.inner(&v).re.max(0.0).sqrt();
        let done = (next - est).abs() <= 1e-15 * next.max(1e-300);
        est = next;
        v = w;
        if done {
            break;
        }
    }
    Ok((est, it))
}

/// Bounded-operator certificate for an order-0 symbol: `M = sup ||sigma||_op + 1`,
/// `sigma_B = (M^2 - sigma^* sigma)^{1/2}` and the remainder of `M^2 - A^* A - B^* B`.
pub fn l2_bound_certificate<G: CompactGroup>(sigma: &Symbol<G>, rho: f64, delta: f64, seed: u64) -> Result<L2Certificate> {
    rank_check(rho, delta)?;
    let ws = sigma.ws.clone();
    let n = ws.max_order.min(2);
    let sup_norm = sigma.sup_op_norm();
    let m_bound = sup_norm + 1.0;
    let m2 = C64::new(m_bound * m_bound, 0.0);
    let inner = sigma.map_blocks(sigma.x_band.nonlinear(), |_, _, s| {
        let g = s.adjoint() * s;
        hermitian_part(&(CMat::identity(s.nrows(), s.ncols()) * m2 - g))
    });
    let b = crate::funcalc::symbol_sqrt(&inner)?;
    let residual = if n == 0 {
        Symbol::zeros(ws.clone())
    } else {
        let aa = gram_symbol(sigma, n)?;
        let bb = gram_symbol(&b, n)?;
        let margin = aa.margin.max(bb.margin);
        Symbol::identity(ws.clone()).scale(m2).sub(&aa).sub(&bb).with_margin(margin)
    };
    let residual_sup = residual.sup_op_norm();
    let residual_slope = if residual_sup > 1e-12 * m_bound * m_bound { fitted(&residual) } else { None };
    let (power_norm, iterations) = power_iteration_norm(sigma, 2000, seed)?;
    let slack = 0.1;
    Ok(L2Certificate {
        sup_norm,
        m_bound,
        residual_sup,
        residual_slope,
        power_norm,
        iterations,
        slack,
        pass: power_norm <= m_bound + slack,
    })
}
