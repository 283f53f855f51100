//! Ellipticity and parameter-ellipticity diagnostics, pointwise resolvents, the
//! recursive parameter-dependent parametrix and Borel-type asymptotic summation.

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::calculus::compose;
use crate::error::{Error, Result};
use crate::fit::{fit_window, linear_fit, loglog_slope};
use crate::group::CompactGroup;
use crate::linalg::{eigenvalues, CMat, C64};
use crate::symbol::{abs, factorial, multi_indices, MultiIndex, Symbol};

/// Condition number above which `sigma - lambda` is treated as singular.
pub const NEAR_SINGULAR_COND: f64 = 1e12;

/// Radii per ray used by [`Sector::default_samples`].
pub const RADII_PER_RAY: usize = 24;

/// Closed sector `{arg(lambda - 0) within phi of theta0}` with the disk `|lambda| <= eps`
/// attached.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Sector {
    pub theta0: f64,
    pub phi: f64,
    pub eps: f64,
    /// Order of the symbol the sector is used with.
    pub m: f64,
}

impl Sector {
    /// Sector around the negative real axis.
    pub fn new(phi: f64, eps: f64, m: f64) -> Result<Self> {
        Sector::with_direction(PI, phi, eps, m)
    }

    pub fn with_direction(theta0: f64, phi: f64, eps: f64, m: f64) -> Result<Self> {
        if !(0.0..PI).contains(&phi) {
            return Err(Error::InvalidArgument(format!("half-opening {phi} must lie in [0, pi)")));
        }
        if !(eps >= 0.0) {
            return Err(Error::InvalidArgument(format!("disk radius {eps} must be >= 0")));
        }
        if !(m >= 0.0) || !theta0.is_finite() {
            return Err(Error::InvalidArgument(format!("order {m} must be >= 0")));
        }
        Ok(Sector { theta0, phi, eps, m })
    }

    pub fn contains(&self, lambda: C64) -> bool {
        let r = lambda.norm();
        if r <= self.eps || r == 0.0 {
            return true;
        }
        angle_gap(lambda.arg(), self.theta0) <= self.phi + 1e-12
    }

    /// Lower boundary ray, bisector, upper boundary ray.
    pub fn rays(&self) -> [f64; 3] {
        [self.theta0 - self.phi, self.theta0, self.theta0 + self.phi]
    }

    /// `per_ray` log-spaced radii on each of the three rays, from `eps` (or `1e-2` if
    /// `eps = 0`) up to `r_hi`.
    pub fn samples(&self, r_hi: f64, per_ray: usize) -> Vec<C64> {
        let lo = if self.eps > 0.0 { self.eps } else { 1e-2 };
        let radii = log_space(lo, r_hi.max(lo * 10.0), per_ray);
        let mut out = Vec::with_capacity(3 * per_ray);
        let rays = self.rays();
        let rays: &[f64] = if self.phi == 0.0 { &rays[1..2] } else { &rays };
        for &th in rays {
            for &r in &radii {
                out.push(C64::from_polar(r, th));
            }
        }
        out
    }

    /// Samples up to `1e3 <band>^m`.
    pub fn default_samples<G: CompactGroup>(&self, sigma: &Symbol<G>) -> Vec<C64> {
        let w = sigma.ws.dual.max_weight();
        self.samples(1e3 * w.powf(self.m), RADII_PER_RAY)
    }

    fn weight(&self, lambda: C64, xi_weight: f64) -> f64 {
        if self.m == 0.0 {
            1.0 + lambda.norm()
        } else {
            (lambda.norm().powf(1.0 / self.m) + xi_weight).powf(self.m)
        }
    }
}

fn angle_gap(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(2.0 * PI);
    d.min(2.0 * PI - d)
}

fn log_space(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n).map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp()).collect()
}

/// Half the smallest eigenvalue modulus of `sigma` over x and valid blocks.
pub fn default_eps<G: CompactGroup>(sigma: &Symbol<G>) -> f64 {
    let valid = sigma.valid_indices();
    let lo = (0..sigma.nx())
        .into_par_iter()
        .map(|ix| {
            valid
                .iter()
                .flat_map(|&k| eigenvalues(&sigma.block(ix, k)).unwrap_or_default())
                .map(|z| z.norm())
                .fold(f64::INFINITY, f64::min)
        })
        .reduce(|| f64::INFINITY, f64::min);
    if lo.is_finite() {
        0.5 * lo
    } else {
        0.0
    }
}

/// A point `(x, xi, lambda)` where a resolvent fails to exist or blows up.
#[derive(Clone, Debug, PartialEq)]
pub struct Witness {
    pub x_index: usize,
    pub x: String,
    pub xi: String,
    pub lambda: C64,
}

impl std::fmt::Display for Witness {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "x[{}]={} xi={} lambda={}{:+}i", self.x_index, self.x, self.xi, self.lambda.re, self.lambda.im)
    }
}

fn witness<G: CompactGroup>(sigma: &Symbol<G>, ix: usize, k: usize, lambda: C64) -> Witness {
    let ws = &sigma.ws;
    let x = if sigma.is_invariant() { "any".to_string() } else { format!("{:?}", ws.group.coords(&ws.xgrid.points[ix])) };
    Witness { x_index: ix, x, xi: ws.dual.get(k).label_string(), lambda }
}

#[derive(Clone, Debug)]
pub struct EllipticityReport {
    pub m: f64,
    /// `(<xi>, min over x and the shell of the smallest singular value)`.
    pub shells: Vec<(f64, f64)>,
    /// `max ||sigma^{-1}|| <xi>^m` beyond the excision radius.
    pub constant: f64,
    /// Largest `<xi>` carrying a non-invertible block; 0 if none.
    pub excision_radius: f64,
    /// `(x index, dual index)` of non-invertible blocks.
    pub flagged: Vec<(usize, usize)>,
}

pub fn ellipticity_check<G: CompactGroup>(sigma: &Symbol<G>, m: f64) -> Result<EllipticityReport> {
    let dual = &sigma.ws.dual;
    let valid = sigma.valid_indices();
    let mut weights: Vec<f64> = valid.iter().map(|&k| dual.get(k).weight()).collect();
    weights.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    if weights.len() < 2 {
        return Err(Error::InvalidArgument("ellipticity check needs at least two shells".into()));
    }
    // (min singular, max singular) per (x, valid block)
    let sv: Vec<Vec<(f64, f64)>> = (0..sigma.nx())
        .into_par_iter()
        .map(|ix| valid.iter().map(|&k| extreme_singular(&sigma.block(ix, k))).collect())
        .collect();
    let mut flagged = Vec::new();
    let mut excision: f64 = 0.0;
    for (ix, row) in sv.iter().enumerate() {
        for (j, &(lo, hi)) in row.iter().enumerate() {
            if lo == 0.0 || hi / lo > NEAR_SINGULAR_COND {
                flagged.push((ix, valid[j]));
                excision = excision.max(dual.get(valid[j]).weight());
            }
        }
    }
    let mut shells: Vec<(f64, f64)> = Vec::new();
    let mut constant: f64 = 0.0;
    let mut any = false;
    for (j, &k) in valid.iter().enumerate() {
        let w = dual.get(k).weight();
        let lo = sv.iter().map(|row| row[j].0).fold(f64::INFINITY, f64::min);
        match shells.last_mut() {
            Some(last) if (last.0 - w).abs() < 1e-12 => last.1 = last.1.min(lo),
            _ => shells.push((w, lo)),
        }
        if w > excision + 1e-12 {
            any = true;
            constant = constant.max(w.powf(m) / lo);
        }
    }
    if !any {
        return Err(Error::AllSingular);
    }
    Ok(EllipticityReport { m, shells, constant, excision_radius: excision, flagged })
}

fn extreme_singular(m: &CMat) -> (f64, f64) {
    if m.nrows() == 1 {
        let v = m[(0, 0)].norm();
        return (v, v);
    }
    let sv = m.singular_values();
    (sv.iter().cloned().fold(f64::INFINITY, f64::min), sv.iter().cloned().fold(0.0, f64::max))
}

fn shifted(m: &CMat, lambda: C64) -> CMat {
    let mut out = m.clone();
    for i in 0..out.nrows() {
        out[(i, i)] -= lambda;
    }
    out
}

#[derive(Clone, Debug)]
pub struct ParamEllipticityReport {
    /// `sup ||(sigma - lambda)^{-1}|| (|lambda|^{1/m} + <xi>)^m` over the given samples
    /// (with `(1 + |lambda|)` when `m = 0`).
    pub constant: f64,
    /// The same supremum with the sampling doubled along each ray.
    pub constant_doubled: f64,
    pub samples: usize,
    /// Doubling changes the constant by less than a factor 1.5.
    pub stable: bool,
    pub witness: Option<Witness>,
    pub parameter_elliptic: bool,
}

/// Inserts the geometric midpoint between consecutive samples on the same ray.
fn doubled(samples: &[C64]) -> Vec<C64> {
    let mut rays: Vec<(f64, Vec<f64>)> = Vec::new();
    for z in samples {
        let th = z.arg();
        match rays.iter_mut().find(|(t, _)| angle_gap(*t, th) < 1e-9) {
            Some((_, rs)) => rs.push(z.norm()),
            None => rays.push((th, vec![z.norm()])),
        }
    }
    let mut out = Vec::new();
    for (th, mut rs) in rays {
        rs.sort_by(f64::total_cmp);
        for (i, &r) in rs.iter().enumerate() {
            out.push(C64::from_polar(r, th));
            if let Some(&next) = rs.get(i + 1) {
                if r > 0.0 {
                    out.push(C64::from_polar((r * next).sqrt(), th));
                }
            }
        }
    }
    out
}

pub fn param_ellipticity_check<G: CompactGroup>(
    sigma: &Symbol<G>,
    sector: &Sector,
    samples: &[C64],
) -> Result<ParamEllipticityReport> {
    if let Some(z) = samples.iter().find(|z| !sector.contains(**z)) {
        return Err(Error::InvalidArgument(format!("sample {z} lies outside the sector")));
    }
    let ws = &sigma.ws;
    let valid = sigma.valid_indices();
    let mut base: Vec<C64> = samples.to_vec();
    if sector.m == 0.0 {
        let big = 2.0 * sigma.sup_op_norm();
        base.extend((0..16).map(|i| C64::from_polar(big.max(1e-12), 2.0 * PI * i as f64 / 16.0)));
    }
    let fine = doubled(&base);
    let in_base: Vec<bool> = fine.iter().map(|z| base.iter().any(|b| (b - z).norm() <= 1e-12 * (1.0 + z.norm()))).collect();

    // eigenvalues inside the sector, then blow-up at the samples
    let eig_hit: Option<Witness> = (0..sigma.nx()).into_par_iter().find_map_first(|ix| {
        for &k in &valid {
            for mu in eigenvalues(&sigma.block(ix, k)).unwrap_or_default() {
                if sector.contains(mu) {
                    return Some(witness(sigma, ix, k, mu));
                }
            }
        }
        None
    });
    if let Some(w) = eig_hit {
        return Ok(ParamEllipticityReport {
            constant: f64::INFINITY,
            constant_doubled: f64::INFINITY,
            samples: base.len(),
            stable: false,
            witness: Some(w),
            parameter_elliptic: false,
        });
    }

    type Acc = (f64, f64, Option<Witness>);
    let per_x: Vec<Acc> = (0..sigma.nx())
        .into_par_iter()
        .map(|ix| {
            let (mut c_base, mut c_fine) = (0.0f64, 0.0f64);
            for &k in &valid {
                let b = sigma.block(ix, k);
                let w = ws.dual.get(k).weight();
                for (z, &is_base) in fine.iter().zip(&in_base) {
                    let (lo, hi) = extreme_singular(&shifted(&b, *z));
                    if lo == 0.0 || hi / lo > NEAR_SINGULAR_COND {
                        return (f64::INFINITY, f64::INFINITY, Some(witness(sigma, ix, k, *z)));
                    }
                    let v = sector.weight(*z, w) / lo;
                    c_fine = c_fine.max(v);
                    if is_base {
                        c_base = c_base.max(v);
                    }
                }
            }
            (c_base, c_fine, None)
        })
        .collect();
    let mut constant: f64 = 0.0;
    let mut constant_doubled: f64 = 0.0;
    let mut wit = None;
    for (a, b, w) in per_x {
        constant = constant.max(a);
        constant_doubled = constant_doubled.max(b);
        if wit.is_none() {
            wit = w;
        }
    }
    let stable = constant.is_finite() && constant_doubled <= 1.5 * constant;
    Ok(ParamEllipticityReport {
        constant,
        constant_doubled,
        samples: base.len(),
        stable,
        parameter_elliptic: wit.is_none() && stable,
        witness: wit,
    })
}

/// Pointwise `(sigma(x, xi) - lambda I)^{-1}`. Blocks outside the valid range that are
/// singular are set to zero; singular valid blocks are an error.
pub fn resolvent_symbol<G: CompactGroup>(sigma: &Symbol<G>, lambda: C64) -> Result<Symbol<G>> {
    sigma.try_map_blocks(sigma.x_band.nonlinear(), |ix, k, b| {
        let m = shifted(b, lambda);
        let (lo, hi) = extreme_singular(&m);
        let bad = lo == 0.0 || hi / lo > NEAR_SINGULAR_COND;
        if bad {
            if sigma.is_valid(k) {
                return Err(Error::NearSingular {
                    witness: witness(sigma, ix, k, lambda).to_string(),
                    cond: if lo == 0.0 { f64::INFINITY } else { hi / lo },
                });
            }
            return Ok(CMat::zeros(m.nrows(), m.ncols()));
        }
        Ok(crate::linalg::inverse(&m).unwrap_or_else(|| CMat::zeros(m.nrows(), m.ncols())))
    })
}

/// Smooth cutoff, 0 on `[0, 1]` and 1 on `[2, inf)`, built from `exp(-1/t)`.
pub fn cutoff(s: f64) -> f64 {
    let h = |t: f64| if t > 0.0 { (-1.0 / t).exp() } else { 0.0 };
    let (a, b) = (h(s - 1.0), h(2.0 - s));
    if a + b == 0.0 {
        0.0
    } else {
        a / (a + b)
    }
}

#[derive(Clone, Debug)]
pub struct AsymptoticSum<G: CompactGroup> {
    pub symbol: Symbol<G>,
    /// Cutoff scales `t_j`.
    pub t: Vec<f64>,
    /// `sup ||sigma_j chi(<xi>/t_j)|| <xi>^{-m_{j-1}}` per term (0 for the first).
    pub contributions: Vec<f64>,
}

/// Initial cutoff scale of the geometric schedule `t_j = T0 2^j`.
pub const T0: f64 = 0.5;

/// `sum_j sigma_j chi(<xi>/t_j)` with `t_j = T0 2^j`, each raised by further doublings until
/// term `j` contributes at most `2^{-j}` in the order-`m_{j-1}` seminorm.
pub fn asymptotic_sum<G: CompactGroup>(terms: &[Symbol<G>], orders: &[f64], rho: f64, delta: f64) -> Result<AsymptoticSum<G>> {
    if terms.is_empty() || terms.len() != orders.len() {
        return Err(Error::InvalidArgument("need one order per term".into()));
    }
    if orders.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::NonMonotoneOrders);
    }
    if !(rho > delta) {
        return Err(Error::InvalidArgument(format!("rho = {rho} must exceed delta = {delta}")));
    }
    let ws = terms[0].ws.clone();
    let w_top = ws.dual.max_weight();
    let mut t = Vec::with_capacity(terms.len());
    let mut contributions = Vec::with_capacity(terms.len());
    let mut sum: Option<Symbol<G>> = None;
    for (j, (term, _)) in terms.iter().zip(orders).enumerate() {
        let shells = term.shell_op_norms();
        let mut tj = T0 * 2f64.powi(j as i32);
        let contrib = |tj: f64| {
            if j == 0 {
                return 0.0;
            }
            shells.iter().filter(|s| s.0 >= tj).map(|&(w, v)| v * cutoff(w / tj) * w.powf(-orders[j - 1])).fold(0.0, f64::max)
        };
        while j > 0 && contrib(tj) > 0.5f64.powi(j as i32) && tj < 2.0 * w_top {
            tj *= 2.0;
        }
        contributions.push(contrib(tj));
        t.push(tj);
        let scaled = term.map_blocks(term.x_band, |_, k, b| b * C64::new(cutoff(ws.dual.get(k).weight() / tj), 0.0));
        sum = Some(match sum {
            None => scaled,
            Some(s) => s.add(&scaled),
        });
    }
    let margin = terms.iter().map(|s| s.margin).max().unwrap_or(0);
    Ok(AsymptoticSum { symbol: sum.expect("non-empty").with_margin(margin), t, contributions })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    /// `sigma^# (sigma_A - lambda) ~ I`.
    Left,
    /// `(sigma_A - lambda) sigma^b ~ I`.
    Right,
}

/// Terms `sigma_0, ..., sigma_N` of the parametrix of `sigma_A - lambda` at one `lambda`.
#[derive(Clone, Debug)]
pub struct ParametrixSeries<G: CompactGroup> {
    pub sigma: Symbol<G>,
    pub lambda: C64,
    pub m: f64,
    pub side: Side,
    pub terms: Vec<Symbol<G>>,
}

fn graded<G: CompactGroup>(sigma: &Symbol<G>, order: usize) -> Vec<MultiIndex> {
    multi_indices(sigma.ws.family.len(), order).into_iter().filter(|a| abs(a) == order).collect()
}

/// Left parametrix by the recursion
/// `sigma_{j+1} = - sum_{|alpha| + k = j + 1, k <= j} (1/alpha!) (D^alpha sigma_k)(d^(alpha) sigma_A) sigma_0`.
pub fn parametrix_build<G: CompactGroup>(
    sigma: &Symbol<G>,
    sector: &Sector,
    n: usize,
    lambda: C64,
) -> Result<ParametrixSeries<G>> {
    build(sigma, sector, n, lambda, Side::Left)
}

/// Right parametrix by the mirrored recursion
/// `sigma_{j+1} = - sigma_0 sum_{|alpha| + k = j + 1, k <= j} (1/alpha!) (D^alpha sigma_A)(d^(alpha) sigma_k)`.
pub fn parametrix_build_right<G: CompactGroup>(
    sigma: &Symbol<G>,
    sector: &Sector,
    n: usize,
    lambda: C64,
) -> Result<ParametrixSeries<G>> {
    build(sigma, sector, n, lambda, Side::Right)
}

fn build<G: CompactGroup>(sigma: &Symbol<G>, sector: &Sector, n: usize, lambda: C64, side: Side) -> Result<ParametrixSeries<G>> {
    if !sector.contains(lambda) {
        return Err(Error::InvalidArgument(format!("lambda = {lambda} lies outside the sector")));
    }
    ParametrixPlan::new(sigma, n, side)?.series(lambda, sector.m)
}

/// The lambda-independent part of the parametrix recursion: derivatives (left) or
/// differences (right) of `sigma_A`, computed once and reused for every spectral parameter.
#[derive(Clone, Debug)]
pub struct ParametrixPlan<G: CompactGroup> {
    sigma: Symbol<G>,
    side: Side,
    n: usize,
    alphas: Vec<MultiIndex>,
    fixed: Vec<Symbol<G>>,
}

impl<G: CompactGroup> ParametrixPlan<G> {
    pub fn new(sigma: &Symbol<G>, n: usize, side: Side) -> Result<Self> {
        let ws = &sigma.ws;
        if n > ws.max_order {
            return Err(Error::OrderOverflow { requested: n, max: ws.max_order });
        }
        let alphas: Vec<MultiIndex> = ws.alphas().iter().filter(|a| abs(a) >= 1 && abs(a) <= n).cloned().collect();
        let fixed = if sigma.is_invariant() {
            Vec::new()
        } else {
            match side {
                Side::Left => sigma.taylor_derivatives(&alphas)?,
                Side::Right => sigma.differences(&alphas)?,
            }
        };
        Ok(ParametrixPlan { sigma: sigma.clone(), side, n, alphas, fixed })
    }

    /// Terms at one spectral parameter; `lambda` is only required to lie in the resolvent set.
    pub fn series(&self, lambda: C64, m: f64) -> Result<ParametrixSeries<G>> {
        let sigma = &self.sigma;
        let side = self.side;
        let r0 = resolvent_symbol(sigma, lambda)?;
        let mut terms = vec![r0.clone()];
        if sigma.is_invariant() {
            // every derivative of sigma_A vanishes
            for j in 1..=self.n {
                terms.push(Symbol::zeros(sigma.ws.clone()).with_margin(j as u32));
            }
            return Ok(ParametrixSeries { sigma: sigma.clone(), lambda, m, side, terms });
        }
        let lookup = |a: &MultiIndex| self.alphas.iter().position(|b| b == a).expect("alpha in range");
        for j in 0..self.n {
            let mut acc: Option<Symbol<G>> = None;
            for k in 0..=j {
                let grade = graded(sigma, j + 1 - k);
                let moving = match side {
                    Side::Left => terms[k].differences(&grade)?,
                    Side::Right => terms[k].taylor_derivatives(&grade)?,
                };
                for (a, mv) in grade.iter().zip(&moving) {
                    let fx = &self.fixed[lookup(a)];
                    let prod = match side {
                        Side::Left => mv.mul(fx),
                        Side::Right => fx.mul(mv),
                    };
                    let prod = prod.scale(C64::new(1.0 / factorial(a), 0.0));
                    acc = Some(match acc {
                        None => prod,
                        Some(s) => s.add(&prod),
                    });
                }
            }
            let acc = acc.expect("at least one term");
            let margin = acc.margin;
            let next = match side {
                Side::Left => acc.mul(&r0),
                Side::Right => r0.mul(&acc),
            };
            terms.push(next.scale(C64::new(-1.0, 0.0)).with_margin(margin));
        }
        Ok(ParametrixSeries { sigma: sigma.clone(), lambda, m, side, terms })
    }
}

impl<G: CompactGroup> ParametrixSeries<G> {
    pub fn order(&self) -> usize {
        self.terms.len() - 1
    }

    /// Orders `-m - j (rho - delta)` of the terms.
    pub fn orders(&self, rho: f64, delta: f64) -> Vec<f64> {
        (0..self.terms.len()).map(|j| -self.m - j as f64 * (rho - delta)).collect()
    }

    /// `sigma_0 + ... + sigma_n`.
    pub fn partial_sum(&self, n: usize) -> Symbol<G> {
        let mut s = self.terms[0].clone();
        for t in &self.terms[1..=n.min(self.order())] {
            let margin = s.margin.max(t.margin);
            s = s.add(t).with_margin(margin);
        }
        s
    }

    /// Cutoff-summed series.
    pub fn summed(&self, rho: f64, delta: f64) -> Result<AsymptoticSum<G>> {
        asymptotic_sum(&self.terms, &self.orders(rho, delta), rho, delta)
    }

    /// `sigma_A - lambda`.
    pub fn shifted_symbol(&self) -> Symbol<G> {
        let id = Symbol::identity(self.sigma.ws.clone()).scale(self.lambda);
        self.sigma.sub(&id).with_margin(self.sigma.margin)
    }

    /// Composition residual of the partial sum `sigma_0 + ... + sigma_n` on this series'
    /// side, with the expansion carried to order `n + 1` (capped at the workspace maximum).
    pub fn residual(&self, n: usize) -> Result<Symbol<G>> {
        let p = self.partial_sum(n);
        let order = (n + 1).min(self.sigma.ws.max_order);
        let a = self.shifted_symbol();
        let prod = match self.side {
            Side::Left => compose(&p, &a, order)?,
            Side::Right => compose(&a, &p, order)?,
        };
        let margin = prod.margin;
        Ok(prod.sub(&Symbol::identity(self.sigma.ws.clone())).with_margin(margin))
    }

    /// Composition residual with the factors in the opposite order.
    pub fn cross_residual(&self, n: usize) -> Result<Symbol<G>> {
        let p = self.partial_sum(n);
        let order = (n + 1).min(self.sigma.ws.max_order);
        let a = self.shifted_symbol();
        let prod = match self.side {
            Side::Left => compose(&a, &p, order)?,
            Side::Right => compose(&p, &a, order)?,
        };
        let margin = prod.margin;
        Ok(prod.sub(&Symbol::identity(self.sigma.ws.clone())).with_margin(margin))
    }
}

/// Log-log slope of the per-shell operator norms over the fit window.
pub fn shell_decay<G: CompactGroup>(s: &Symbol<G>) -> Option<f64> {
    let shells = s.shell_op_norms();
    let top = shells.last()?.0;
    loglog_slope(&fit_window(&shells, top))
}

/// Mean over the shells with `<xi>` in `[lo, hi]` of the maximum of `||s(x, xi)||_op` over x
/// and the shell.
pub fn shell_mean<G: CompactGroup>(s: &Symbol<G>, lo: f64, hi: f64) -> f64 {
    let shells: Vec<f64> =
        s.shell_op_norms().into_iter().filter(|p| p.0 >= lo - 1e-12 && p.0 <= hi + 1e-12).map(|p| p.1).collect();
    if shells.is_empty() {
        0.0
    } else {
        shells.iter().sum::<f64>() / shells.len() as f64
    }
}

#[derive(Clone, Debug)]
pub struct EstimateEntry {
    pub k: usize,
    /// Invariant x-derivative multi-index over the vector-field basis.
    pub alpha: MultiIndex,
    /// Difference multi-index over the difference family.
    pub beta: MultiIndex,
    pub lambda_exponent: f64,
    pub lambda_theory: f64,
    /// Whether the lambda exponent must match the theory (otherwise faster decay passes).
    pub lambda_two_sided: bool,
    pub xi_exponent: f64,
    pub xi_theory: f64,
    /// The quantity is identically zero to roundoff, so both bounds hold trivially.
    pub vanishes: bool,
    pub pass: bool,
}

#[derive(Clone, Debug)]
pub struct EstimateReport {
    pub m: f64,
    pub rho: f64,
    pub delta: f64,
    pub tol: f64,
    /// Shell used for the lambda fits.
    pub xi0: f64,
    /// Spectral parameter used for the xi fits.
    pub lambda0: C64,
    pub entries: Vec<EstimateEntry>,
    pub pass: bool,
}

/// Modulus of the spectral parameter (on the bisector) used for the xi fits.
pub const XI_FIT_LAMBDA: f64 = 0.1;

/// Number of lambda samples in the lambda-dominated regime used for the lambda fits.
const LAMBDA_FIT_SAMPLES: usize = 8;

/// Fitted decay exponents of `d_lambda^k X^alpha D^beta (sigma - lambda)^{-1}` in
/// `|lambda|^{1/m} + <xi>` (at a fixed shell, lambda large along the bisector) and in `<xi>`
/// (after normalisation by `(|lambda|^{1/m} + <xi>)^{m(k+1)}`, at a fixed small lambda).
#[allow(clippy::too_many_arguments)]
pub fn resolvent_estimate_report<G: CompactGroup>(
    sigma: &Symbol<G>,
    sector: &Sector,
    alpha_max: usize,
    beta_max: usize,
    k_max: usize,
    rho: f64,
    delta: f64,
    tol: f64,
) -> Result<EstimateReport> {
    let ws = &sigma.ws;
    if beta_max > ws.max_order {
        return Err(Error::OrderOverflow { requested: beta_max, max: ws.max_order });
    }
    let m = sector.m;
    let alphas = multi_indices(ws.group.dim(), alpha_max);
    let betas = multi_indices(ws.family.len(), beta_max);
    let dir = C64::from_polar(1.0, sector.theta0);
    let lambda0 = dir * XI_FIT_LAMBDA;

    // fixed shell: the median valid shell after the largest difference margin
    let probe = Symbol::identity(ws.clone()).with_margin(sigma.margin + beta_max as u32);
    let mut wts: Vec<f64> = probe.valid_indices().iter().map(|&k| ws.dual.get(k).weight()).collect();
    wts.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    if wts.len() < 2 {
        return Err(Error::InvalidArgument("band too small for the requested difference order".into()));
    }
    let xi0 = wts[wts.len() / 2];
    let w_top = *wts.last().expect("non-empty");
    let lam_lo = if m == 0.0 { 4.0 * (1.0 + sigma.sup_op_norm()) } else { (4.0 * w_top).powf(m) };
    let lam_hi = lam_lo * 1e3;
    let lambdas: Vec<C64> = log_space(lam_lo, lam_hi, LAMBDA_FIT_SAMPLES).into_iter().map(|r| dir * r).collect();
    let lam_var = |z: C64| if m == 0.0 { 1.0 + z.norm() } else { z.norm().powf(1.0 / m) + xi0 };

    // norms[k][a][b] -> (values at the lambda samples at xi0, shells at lambda0)
    let mut lam_vals = vec![vec![vec![Vec::with_capacity(lambdas.len()); betas.len()]; alphas.len()]; k_max + 1];
    let mut xi_shells = vec![vec![vec![Vec::new(); betas.len()]; alphas.len()]; k_max + 1];
    let mut scale = vec![0.0f64; k_max + 1];
    let all: Vec<C64> = lambdas.iter().copied().chain(std::iter::once(lambda0)).collect();
    for (li, &z) in all.iter().enumerate() {
        let r = resolvent_symbol(sigma, z)?;
        let mut pow = r.clone();
        for k in 0..=k_max {
            if k > 0 {
                pow = pow.mul(&r).with_margin(r.margin);
            }
            let fact: f64 = (1..=k).map(|v| v as f64).product();
            let s = pow.scale(C64::new(fact, 0.0));
            let diffs = s.differences(&betas)?;
            for (bi, d) in diffs.iter().enumerate() {
                for (ai, a) in alphas.iter().enumerate() {
                    let t = if abs(a) == 0 { d.clone() } else { d.invariant_derivative(a)? };
                    let shells = t.shell_op_norms();
                    if li < lambdas.len() {
                        let v = shells.iter().find(|p| (p.0 - xi0).abs() < 1e-9).map(|p| p.1).unwrap_or(0.0);
                        lam_vals[k][ai][bi].push(v);
                    } else {
                        if ai == 0 && bi == 0 {
                            scale[k] = shells.iter().map(|p| p.1).fold(0.0, f64::max);
                        }
                        xi_shells[k][ai][bi] = shells;
                    }
                }
            }
        }
    }

    let mut entries = Vec::new();
    for k in 0..=k_max {
        let lam_theory = if m == 0.0 { -(k as f64 + 1.0) } else { -m * (k as f64 + 1.0) };
        for (ai, a) in alphas.iter().enumerate() {
            for (bi, b) in betas.iter().enumerate() {
                let xi_theory = -rho * abs(b) as f64 + delta * abs(a) as f64;
                let two_sided = abs(a) == 0 && abs(b) == 0;
                let vals = &lam_vals[k][ai][bi];
                let shells = &xi_shells[k][ai][bi];
                let floor = 1e-11 * scale[k].max(1e-300);
                let vanishes = vals.iter().all(|&v| v <= floor * 1e3) && shells.iter().all(|p| p.1 <= floor);
                let xs: Vec<f64> = lambdas.iter().map(|&z| lam_var(z).ln()).collect();
                let ys: Vec<f64> = vals.iter().map(|&v| v.max(1e-300).ln()).collect();
                let lambda_exponent = linear_fit(&xs, &ys).map(|f| f.0).unwrap_or(f64::NAN);
                let norm = |w: f64| {
                    if m == 0.0 {
                        (1.0 + lambda0.norm()).powf(k as f64 + 1.0)
                    } else {
                        (lambda0.norm().powf(1.0 / m) + w).powf(m * (k as f64 + 1.0))
                    }
                };
                let pts: Vec<(f64, f64)> = shells.iter().map(|&(w, v)| (w, v * norm(w))).collect();
                let xi_exponent = loglog_slope(&fit_window(&pts, w_top)).unwrap_or(f64::NAN);
                let lam_tol = tol * lam_theory.abs().max(1.0);
                let xi_tol = tol * xi_theory.abs().max(1.0);
                let lam_ok = if two_sided {
                    (lambda_exponent - lam_theory).abs() <= lam_tol
                } else {
                    lambda_exponent <= lam_theory + lam_tol
                };
                let xi_ok = if two_sided { (xi_exponent - xi_theory).abs() <= xi_tol } else { xi_exponent <= xi_theory + xi_tol };
                entries.push(EstimateEntry {
                    k,
                    alpha: a.clone(),
                    beta: b.clone(),
                    lambda_exponent,
                    lambda_theory: lam_theory,
                    lambda_two_sided: two_sided,
                    xi_exponent,
                    xi_theory,
                    vanishes,
                    pass: vanishes || (lam_ok && xi_ok),
                });
            }
        }
    }
    let pass = entries.iter().all(|e| e.pass);
    Ok(EstimateReport { m, rho, delta, tol, xi0, lambda0, entries, pass })
}
