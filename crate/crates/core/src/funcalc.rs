//! Holomorphic functional calculus: functions of matrices and symbols through the spectral
//! decomposition or a keyhole contour, complex powers, and functions of operators built
//! from the resolvent parametrix.

use std::f64::consts::PI;
use std::fmt;
use std::num::NonZeroUsize;
use std::sync::Arc;

use gauss_quad::legendre::GaussLegendre;
use rayon::prelude::*;

use crate::calculus::compose;
use crate::error::{Error, Result};
use crate::fit::{fit_window, loglog_slope};
use crate::group::CompactGroup;
use crate::linalg::{eig_general, eigh, hermitian_map, is_hermitian, op_norm, CMat, C64};
use crate::resolvent::{default_eps, ParametrixPlan, Sector, Side};
use crate::symbol::Symbol;

/// Eigenvector condition number above which the spectral route gives way to the contour.
pub const SPECTRAL_COND_LIMIT: f64 = 1e10;

type CustomFn = Arc<dyn Fn(C64, C64) -> C64 + Send + Sync>;

#[derive(Clone)]
enum Kind {
    Power(C64),
    LogPower(C64),
    Custom { name: String, decay: f64, f: CustomFn },
}

/// A function holomorphic off a cut, evaluated from `(lambda, log lambda)` so that the branch
/// is fixed by the caller. Optionally multiplied by `lambda^{-shift}`.
#[derive(Clone)]
pub struct HoloFunction {
    kind: Kind,
    shift: i32,
}

impl fmt::Debug for HoloFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "HoloFunction({})", self.name())
    }
}

impl HoloFunction {
    pub fn power(s: f64) -> Self {
        Self::power_complex(C64::new(s, 0.0))
    }

    pub fn power_complex(s: C64) -> Self {
        HoloFunction { kind: Kind::Power(s), shift: 0 }
    }

    pub fn sqrt() -> Self {
        Self::power(0.5)
    }

    pub fn inv_sqrt() -> Self {
        Self::power(-0.5)
    }

    /// `lambda^s log lambda`.
    pub fn log_power(s: f64) -> Self {
        HoloFunction { kind: Kind::LogPower(C64::new(s, 0.0)), shift: 0 }
    }

    /// Arbitrary `f(lambda, log lambda)`, assumed bounded by `|lambda|^decay` on the contour.
    pub fn custom(name: &str, decay: f64, f: impl Fn(C64, C64) -> C64 + Send + Sync + 'static) -> Self {
        HoloFunction { kind: Kind::Custom { name: name.to_string(), decay, f: Arc::new(f) }, shift: 0 }
    }

    /// Parses `power:s`, `sqrt`, `inv-sqrt` or `log-power:s`.
    pub fn parse(spec: &str) -> Result<Self> {
        let spec = spec.trim();
        let num = |t: &str| {
            t.trim().parse::<f64>().map_err(|_| Error::InvalidArgument(format!("bad exponent '{t}' in function '{spec}'")))
        };
        match spec.split_once(':') {
            Some(("power", s)) => Ok(Self::power(num(s)?)),
            Some(("log-power", s)) => Ok(Self::log_power(num(s)?)),
            None if spec == "sqrt" => Ok(Self::sqrt()),
            None if spec == "inv-sqrt" => Ok(Self::inv_sqrt()),
            _ => {
                Err(Error::InvalidArgument(format!("unknown function '{spec}'; expected power:s, sqrt, inv-sqrt or log-power:s")))
            }
        }
    }

    pub fn name(&self) -> String {
        let base = match &self.kind {
            Kind::Power(s) if s.im == 0.0 && s.re == 0.5 => "sqrt".to_string(),
            Kind::Power(s) if s.im == 0.0 && s.re == -0.5 => "inv-sqrt".to_string(),
            Kind::Power(s) if s.im == 0.0 => format!("power:{}", s.re),
            Kind::Power(s) => format!("power:{s}"),
            Kind::LogPower(s) => format!("log-power:{}", s.re),
            Kind::Custom { name, .. } => name.clone(),
        };
        if self.shift == 0 {
            base
        } else {
            format!("{base}*lambda^{}", -self.shift)
        }
    }

    /// `F(lambda) lambda^{-k}`.
    pub fn shifted(&self, k: i32) -> Self {
        HoloFunction { kind: self.kind.clone(), shift: self.shift + k }
    }

    /// Real growth exponent on rays: `|F(lambda)| <= C |lambda|^decay`, up to a log factor.
    pub fn decay(&self) -> f64 {
        let base = match &self.kind {
            Kind::Power(s) | Kind::LogPower(s) => s.re,
            Kind::Custom { decay, .. } => *decay,
        };
        base - self.shift as f64
    }

    pub fn has_log(&self) -> bool {
        matches!(self.kind, Kind::LogPower(_))
    }

    /// Exponent `p` when the function is exactly `lambda^p`.
    pub fn power_exponent(&self) -> Option<C64> {
        match self.kind {
            Kind::Power(s) => Some(s - self.shift as f64),
            _ => None,
        }
    }

    /// Smallest `k >= 0` with `decay - k < 0`.
    pub fn default_factor(&self) -> i32 {
        let s = self.decay();
        if s < 0.0 {
            0
        } else {
            s.floor() as i32 + 1
        }
    }

    /// Evaluation with an explicit logarithm of `lambda`.
    pub fn eval(&self, lambda: C64, log: C64) -> C64 {
        let v = match &self.kind {
            Kind::Power(s) => (s * log).exp(),
            Kind::LogPower(s) => (s * log).exp() * log,
            Kind::Custom { f, .. } => f(lambda, log),
        };
        if self.shift == 0 {
            v
        } else {
            v * (-(self.shift as f64) * log).exp()
        }
    }

    /// Principal branch, cut along the negative real axis.
    pub fn eval_principal(&self, lambda: C64) -> C64 {
        self.eval(lambda, lambda.ln())
    }

    fn bound_constant(&self) -> f64 {
        match &self.kind {
            Kind::Power(s) | Kind::LogPower(s) => (2.0 * PI * s.im.abs()).exp(),
            Kind::Custom { .. } => 1.0,
        }
    }
}

/// Quadrature parameters for keyhole contours.
#[derive(Clone, Copy, Debug)]
pub struct ContourOptions {
    /// Target for the truncated tail.
    pub tol: f64,
    /// Angle added to the sector half-opening so the rays avoid the cut.
    pub margin: f64,
    /// Panel width in `u = log r`.
    pub panel_width: f64,
    pub nodes_per_panel: usize,
}

impl Default for ContourOptions {
    fn default() -> Self {
        ContourOptions { tol: 1e-10, margin: 0.05, panel_width: 2.0, nodes_per_panel: 12 }
    }
}

/// Discretized keyhole: in along the lower ray, counterclockwise around the arc `|lambda| = r0`
/// on the side away from the sector, out along the upper ray. Weights include `1/(2 pi i)`, so
/// `sum w_k F(lambda_k) (M - lambda_k)^{-1}` approximates `F(M)`.
#[derive(Clone, Debug)]
pub struct Contour {
    pub theta0: f64,
    pub half_angle: f64,
    pub r0: f64,
    pub r_max: f64,
    pub nodes: Vec<C64>,
    /// `log lambda` on the branch with the cut along `theta0`.
    pub logs: Vec<C64>,
    pub weights: Vec<C64>,
}

impl Contour {
    pub fn keyhole(theta0: f64, half_angle: f64, r0: f64, r_max: f64, opts: &ContourOptions) -> Result<Self> {
        if !(half_angle > 0.0 && half_angle < PI) {
            return Err(Error::Contour(format!("ray half-angle {half_angle} must lie in (0, pi)")));
        }
        if !(r0 > 0.0 && r_max > r0 && r_max.is_finite()) {
            return Err(Error::Contour(format!("radii must satisfy 0 < r0 < r_max, got {r0}, {r_max}")));
        }
        let n = NonZeroUsize::new(opts.nodes_per_panel.max(2)).expect("nonzero");
        let gl = GaussLegendre::new(n);
        let pairs = gl.as_node_weight_pairs();
        let panels = |a: f64, b: f64, width: f64| {
            let count = ((b - a) / width).ceil().max(1.0) as usize;
            let h = (b - a) / count as f64;
            let mut out = Vec::with_capacity(count * pairs.len());
            for p in 0..count {
                let lo = a + p as f64 * h;
                for &(x, w) in pairs {
                    out.push((lo + 0.5 * h * (x + 1.0), 0.5 * h * w));
                }
            }
            out
        };
        let two_pi_i = C64::new(0.0, 2.0 * PI);
        let th_lo = theta0 - 2.0 * PI + half_angle;
        let th_hi = theta0 - half_angle;
        let (u0, u1) = (r0.ln(), r_max.ln());
        let mut nodes = Vec::new();
        let mut logs = Vec::new();
        let mut weights = Vec::new();
        let radial = panels(u0, u1, opts.panel_width);
        for &(u, w) in radial.iter().rev() {
            let log = C64::new(u, th_lo);
            let lam = log.exp();
            nodes.push(lam);
            logs.push(log);
            weights.push(-w * lam / two_pi_i);
        }
        for (th, w) in panels(th_lo, th_hi, 1.0) {
            let log = C64::new(u0, th);
            let lam = log.exp();
            nodes.push(lam);
            logs.push(log);
            weights.push(w * lam / (2.0 * PI));
        }
        for &(u, w) in &radial {
            let log = C64::new(u, th_hi);
            let lam = log.exp();
            nodes.push(lam);
            logs.push(log);
            weights.push(w * lam / two_pi_i);
        }
        Ok(Contour { theta0, half_angle, r0, r_max, nodes, logs, weights })
    }

    /// Keyhole around `sector` with arc radius `r0`, truncated where the analytic tail bound for
    /// `f` against a resolvent of an operator of norm `norm` drops below `tol / 10`.
    pub fn for_function(sector: &Sector, r0: f64, norm: f64, f: &HoloFunction, opts: &ContourOptions) -> Result<Self> {
        let s = f.decay();
        if s >= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "contour integral of {} needs decay < 0 (decay {s}); factor out a power first",
                f.name()
            )));
        }
        let margin = opts.margin.min(0.5 * (PI - sector.phi));
        let r_max = tail_radius(f, norm, r0, opts.tol / 10.0);
        Contour::keyhole(sector.theta0, sector.phi + margin, r0, r_max, opts)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Distance from `z` to the contour path.
    pub fn distance_to(&self, z: C64) -> f64 {
        let th_lo = self.theta0 - 2.0 * PI + self.half_angle;
        let th_hi = self.theta0 - self.half_angle;
        let seg = |a: C64, b: C64| {
            let d = b - a;
            let t = ((z - a) * d.conj()).re / d.norm_sqr();
            (z - (a + d * t.clamp(0.0, 1.0))).norm()
        };
        let ray = |th: f64| seg(C64::from_polar(self.r0, th), C64::from_polar(self.r_max, th));
        // arc: angles in [th_lo, th_hi] measured on the same branch
        let mut phase = z.arg();
        while phase < th_lo {
            phase += 2.0 * PI;
        }
        while phase > th_lo + 2.0 * PI {
            phase -= 2.0 * PI;
        }
        let arc = if phase <= th_hi {
            (z.norm() - self.r0).abs()
        } else {
            (z - C64::from_polar(self.r0, th_lo)).norm().min((z - C64::from_polar(self.r0, th_hi)).norm())
        };
        ray(th_lo).min(ray(th_hi)).min(arc)
    }

    /// `(1/2 pi i) int F(lambda) (mu - lambda)^{-1} dlambda`.
    pub fn integrate_scalar(&self, f: &HoloFunction, mu: C64) -> C64 {
        self.nodes.iter().zip(&self.logs).zip(&self.weights).map(|((&l, &lg), &w)| w * f.eval(l, lg) / (mu - l)).sum()
    }
}

fn tail_radius(f: &HoloFunction, norm: f64, r0: f64, target: f64) -> f64 {
    let s = f.decay();
    let c = f.bound_constant();
    let bound = |r: f64| {
        // (1/pi) int_R^inf C t^s (log t + 2 pi)^j / (t - norm) dt
        let base = c * r.powf(s) / (-s) / (1.0 - norm / r) / PI;
        if f.has_log() {
            base * (r.ln().abs() + 2.0 * PI + 1.0 / (-s))
        } else {
            base
        }
    };
    let mut r = (4.0 * norm).max(4.0 * r0).max(1.0);
    while bound(r) > target && r < 1e300 {
        r *= std::f64::consts::E;
    }
    r
}

fn on_cut(z: C64, theta0: f64) -> bool {
    let scale = z.norm();
    if scale == 0.0 {
        return true;
    }
    let gap = (z.arg() - theta0).rem_euclid(2.0 * PI);
    gap.min(2.0 * PI - gap) <= 1e-12
}

/// Upper-triangular Schur factor and unitary `Q` with `m = Q T Q^*`.
fn schur(m: &CMat) -> Result<(CMat, CMat)> {
    let s = nalgebra::linalg::Schur::try_new(m.clone(), 1e-15, 10_000)
        .ok_or_else(|| Error::Contour("Schur decomposition did not converge".into()))?;
    let (q, t) = s.unpack();
    Ok((q, t))
}

fn contour_block(m: &CMat, f: &HoloFunction, contour: &Contour) -> Result<CMat> {
    let d = m.nrows();
    let (q, t) = schur(m)?;
    let floor = 0.25 * contour.r0;
    for k in 0..d {
        let dist = contour.distance_to(t[(k, k)]);
        if dist < floor {
            return Err(Error::Contour(format!("eigenvalue {} lies within {dist:.3e} of the contour", t[(k, k)])));
        }
    }
    let eye = CMat::identity(d, d);
    let mut acc = CMat::zeros(d, d);
    for ((&lam, &lg), &w) in contour.nodes.iter().zip(&contour.logs).zip(&contour.weights) {
        let shifted = &t - &eye * lam;
        let inv =
            shifted.solve_upper_triangular(&eye).ok_or_else(|| Error::Contour(format!("singular resolvent at node {lam}")))?;
        acc += inv * (w * f.eval(lam, lg));
    }
    Ok(&q * acc * q.adjoint())
}

/// Spectrum of `m` and the smallest eigenvalue modulus.
fn spectrum(m: &CMat) -> Result<Vec<C64>> {
    crate::linalg::eigenvalues(m).ok_or_else(|| Error::Contour("eigenvalue computation did not converge".into()))
}

/// Keyhole integral `(1/2 pi i) int F(lambda) (m - lambda)^{-1} dlambda` for one matrix.
pub fn contour_matrix(m: &CMat, f: &HoloFunction, contour: &Contour) -> Result<CMat> {
    if f.decay() >= 0.0 {
        return Err(Error::InvalidArgument(format!("{} does not decay along the contour", f.name())));
    }
    contour_block(m, f, contour)
}

/// Keyhole contour adapted to a single matrix: cut along the negative axis (narrowed so the
/// rays clear the spectrum), arc at half the smallest eigenvalue modulus.
pub fn matrix_contour(m: &CMat, f: &HoloFunction, opts: &ContourOptions) -> Result<Contour> {
    let ev = spectrum(m)?;
    if let Some(z) = ev.iter().find(|z| on_cut(**z, PI)) {
        return Err(Error::BranchCut(format!("eigenvalue {z} lies on the cut of {}", f.name())));
    }
    let lo = ev.iter().map(|z| z.norm()).fold(f64::INFINITY, f64::min);
    let gap = ev.iter().map(|z| PI - z.arg().abs()).fold(f64::INFINITY, f64::min);
    let margin = opts.margin.min(0.5 * gap);
    let sector = Sector::new(0.0, 0.0, 1.0)?;
    let opts = ContourOptions { margin, ..*opts };
    Contour::for_function(&sector, 0.5 * lo, op_norm(m), f, &opts)
}

/// `F(m)` via the eigendecomposition, principal branch. Hermitian input uses the unitary
/// eigenbasis; defective or badly conditioned matrices fall back to the keyhole contour with
/// `F = F~ lambda^k` factored when `F` does not decay.
pub fn matrix_function_spectral(m: &CMat, f: &HoloFunction) -> Result<CMat> {
    let scale = op_norm(m).max(f64::MIN_POSITIVE);
    if is_hermitian(m, 1e-13 * scale) {
        let (vals, _) = eigh(m);
        if let Some(v) = vals.iter().find(|v| **v <= 0.0) {
            return Err(Error::BranchCut(format!("eigenvalue {v} lies on the cut of {}", f.name())));
        }
        return Ok(hermitian_map(m, |v| f.eval_principal(C64::new(v, 0.0))));
    }
    if let Some((vals, v, kappa)) = eig_general(m) {
        if let Some(z) = vals.iter().find(|z| on_cut(**z, PI)) {
            return Err(Error::BranchCut(format!("eigenvalue {z} lies on the cut of {}", f.name())));
        }
        if kappa <= SPECTRAL_COND_LIMIT {
            let d = m.nrows();
            let fd = CMat::from_fn(d, d, |i, j| if i == j { f.eval_principal(vals[i]) } else { C64::new(0.0, 0.0) });
            let vinv = crate::linalg::inverse(&v).ok_or_else(|| Error::Contour("eigenvector matrix is singular".into()))?;
            return Ok(&v * fd * vinv);
        }
    }
    matrix_function_contour(m, f, &ContourOptions::default())
}

/// `F(m)` through the keyhole, factoring `F = F~ lambda^k` when `F` does not decay.
pub fn matrix_function_contour(m: &CMat, f: &HoloFunction, opts: &ContourOptions) -> Result<CMat> {
    let k = f.default_factor();
    let g = f.shifted(k);
    let contour = matrix_contour(m, &g, opts)?;
    let base = contour_block(m, &g, &contour)?;
    Ok(base * matrix_power(m, k as usize))
}

fn matrix_power(m: &CMat, k: usize) -> CMat {
    let mut out = CMat::identity(m.nrows(), m.ncols());
    for _ in 0..k {
        out = &out * m;
    }
    out
}

/// Pointwise keyhole integral over every block of `sigma`. Blocks outside the valid range whose
/// spectrum meets the contour are set to zero.
pub fn contour_integrate<G: CompactGroup>(sigma: &Symbol<G>, f: &HoloFunction, contour: &Contour) -> Result<Symbol<G>> {
    if f.decay() >= 0.0 {
        return Err(Error::InvalidArgument(format!("{} does not decay along the contour", f.name())));
    }
    sigma.try_map_blocks(sigma.x_band.nonlinear(), |_, k, b| match contour_block(b, f, contour) {
        Ok(v) => Ok(v),
        Err(e) if sigma.is_valid(k) => Err(e),
        Err(_) => Ok(CMat::zeros(b.nrows(), b.ncols())),
    })
}

/// Keyhole around `sector` adapted to `sigma`: arc at the sector disk radius, or at half the
/// smallest eigenvalue modulus when the sector has no disk.
pub fn symbol_contour<G: CompactGroup>(
    sigma: &Symbol<G>,
    sector: &Sector,
    f: &HoloFunction,
    opts: &ContourOptions,
) -> Result<Contour> {
    let r0 = if sector.eps > 0.0 { sector.eps } else { default_eps(sigma) };
    if !(r0 > 0.0) {
        return Err(Error::Contour("symbol has a zero eigenvalue; no arc radius available".into()));
    }
    Contour::for_function(sector, r0, sigma.sup_op_norm(), f, opts)
}

/// `F(sigma)` pointwise as `F~(sigma) sigma^k` with `F~ = F lambda^{-k}`; `k` defaults to the
/// smallest power making `F~` decay.
pub fn symbol_function<G: CompactGroup>(
    sigma: &Symbol<G>,
    f: &HoloFunction,
    sector: &Sector,
    k: Option<i32>,
) -> Result<Symbol<G>> {
    let k_min = f.default_factor();
    let k = k.unwrap_or(k_min);
    if k < k_min {
        return Err(Error::InvalidArgument(format!("factor lambda^{k} leaves {} without decay", f.name())));
    }
    let g = f.shifted(k);
    let contour = symbol_contour(sigma, sector, &g, &ContourOptions::default())?;
    let mut out = contour_integrate(sigma, &g, &contour)?;
    for _ in 0..k {
        out = out.mul(sigma);
    }
    Ok(out)
}

fn positive_check<G: CompactGroup>(sigma: &Symbol<G>, ix: usize, k: usize, b: &CMat) -> Result<Vec<f64>> {
    let scale = op_norm(b).max(f64::MIN_POSITIVE);
    let bad = |why: String| {
        let ws = &sigma.ws;
        let x = if sigma.is_invariant() { "any".to_string() } else { format!("{:?}", ws.group.coords(&ws.xgrid.points[ix])) };
        Error::NotPositiveDefinite(format!("x[{ix}]={x} xi={}: {why}", ws.dual.get(k).label_string()))
    };
    if !is_hermitian(b, 1e-10 * scale) {
        return Err(bad("block is not Hermitian".into()));
    }
    let (vals, _) = eigh(b);
    if vals[0] <= 0.0 {
        return Err(bad(format!("smallest eigenvalue {:.3e}", vals[0])));
    }
    Ok(vals)
}

/// `sigma^s = exp(s log sigma)` for pointwise positive definite `sigma`.
pub fn symbol_power<G: CompactGroup>(sigma: &Symbol<G>, s: f64) -> Result<Symbol<G>> {
    sigma.try_map_blocks(sigma.x_band.nonlinear(), |ix, k, b| {
        if s == 0.0 {
            return Ok(CMat::identity(b.nrows(), b.ncols()));
        }
        match positive_check(sigma, ix, k, b) {
            Ok(_) => Ok(hermitian_map(b, |v| C64::new((s * v.ln()).exp(), 0.0))),
            Err(e) if sigma.is_valid(k) => Err(e),
            Err(_) => Ok(CMat::zeros(b.nrows(), b.ncols())),
        }
    })
}

/// Positive square root.
pub fn symbol_sqrt<G: CompactGroup>(sigma: &Symbol<G>) -> Result<Symbol<G>> {
    symbol_power(sigma, 0.5)
}

fn compose_power<G: CompactGroup>(a: &Symbol<G>, k: usize, n: usize) -> Result<Symbol<G>> {
    let mut out = a.clone();
    for _ in 1..k {
        out = compose(&out, a, n)?;
    }
    Ok(out)
}

/// Symbol of `F(A)` for `A = Op(sigma)` parameter-elliptic on `sector`: the keyhole integral of
/// the order-`n` left parametrix. Non-decaying `F` is factored as `F~(A) A^k`; pure powers with
/// decay `<= -1` are taken as `G^k` with `G = lambda^{p/k}` of decay in `(-1, 0)`.
pub fn operator_function<G: CompactGroup>(sigma: &Symbol<G>, f: &HoloFunction, sector: &Sector, n: usize) -> Result<Symbol<G>> {
    operator_function_with(sigma, f, sector, n, &ContourOptions::default())
}

pub fn operator_function_with<G: CompactGroup>(
    sigma: &Symbol<G>,
    f: &HoloFunction,
    sector: &Sector,
    n: usize,
    opts: &ContourOptions,
) -> Result<Symbol<G>> {
    let ord = n.min(sigma.ws.max_order);
    let s = f.decay();
    if s >= 0.0 {
        let k = f.default_factor();
        let base = operator_function_with(sigma, &f.shifted(k), sector, n, opts)?;
        let pk = compose_power(sigma, k as usize, ord)?;
        return compose(&base, &pk, ord);
    }
    if let (Some(p), true) = (f.power_exponent(), s <= -1.0) {
        let k = (-s).floor() as usize + 1;
        let g = HoloFunction::power_complex(p / k as f64);
        let base = operator_function_with(sigma, &g, sector, n, opts)?;
        return compose_power(&base, k, ord);
    }
    let contour = symbol_contour(sigma, sector, f, opts)?;
    let plan = ParametrixPlan::new(sigma, n, Side::Left)?;
    let mut acc: Option<Symbol<G>> = None;
    for ((&lam, &lg), &w) in contour.nodes.iter().zip(&contour.logs).zip(&contour.weights) {
        let p = plan.series(lam, sector.m)?.partial_sum(n).scale(w * f.eval(lam, lg));
        acc = Some(match acc {
            None => p,
            Some(a) => {
                let margin = a.margin.max(p.margin);
                a.add(&p).with_margin(margin)
            }
        });
    }
    Ok(acc.expect("contour has nodes"))
}

/// Shell profile of a defect symbol against a reference of the same kind.
#[derive(Clone, Debug)]
pub struct DefectReport {
    pub shells: Vec<(f64, f64)>,
    pub slope: Option<f64>,
    pub sup: f64,
    pub reference: Vec<(f64, f64)>,
    pub reference_slope: Option<f64>,
}

impl DefectReport {
    fn new<G: CompactGroup>(defect: &Symbol<G>, reference: &Symbol<G>) -> Self {
        let shells = defect.shell_op_norms();
        let reference = reference.shell_op_norms();
        let r_max = defect.ws.r_max;
        DefectReport {
            slope: loglog_slope(&fit_window(&shells, r_max)),
            sup: shells.iter().map(|s| s.1).fold(0.0, f64::max),
            reference_slope: loglog_slope(&fit_window(&reference, r_max)),
            shells,
            reference,
        }
    }

    /// The defect decays faster than the reference by at least `gap` in the fitted exponent.
    pub fn lower_order(&self, gap: f64) -> bool {
        match (self.slope, self.reference_slope) {
            (Some(d), Some(r)) => d <= r - gap,
            _ => false,
        }
    }
}

fn parametrix_at<G: CompactGroup>(plan: &ParametrixPlan<G>, lambda: C64, m: f64, n: usize) -> Result<Symbol<G>> {
    Ok(plan.series(lambda, m)?.partial_sum(n))
}

/// `P(lambda) - P(mu) - (lambda - mu) P(lambda) # P(mu)` for the order-`n` left parametrices,
/// against `P(lambda) - P(mu)`.
pub fn approx_resolvent_identity_defect<G: CompactGroup>(
    sigma: &Symbol<G>,
    sector: &Sector,
    lambda: C64,
    mu: C64,
    n: usize,
) -> Result<DefectReport> {
    let plan = ParametrixPlan::new(sigma, n, Side::Left)?;
    let order = (n + 1).min(sigma.ws.max_order);
    let pl = parametrix_at(&plan, lambda, sector.m, n)?;
    let pm = parametrix_at(&plan, mu, sector.m, n)?;
    let main = pl.sub(&pm);
    let prod = compose(&pl, &pm, order)?;
    let defect = main.sub(&prod.scale(lambda - mu));
    let margin = defect.margin.max(prod.margin);
    Ok(DefectReport::new(&defect.with_margin(margin), &main.with_margin(margin)))
}

/// `d/dlambda P(lambda) - P(lambda) # P(lambda)`, the derivative taken by a central difference
/// with step `h`, against `P(lambda) # P(lambda)`.
pub fn resolvent_derivative_defect<G: CompactGroup>(
    sigma: &Symbol<G>,
    sector: &Sector,
    lambda: C64,
    n: usize,
    h: f64,
) -> Result<DefectReport> {
    let plan = ParametrixPlan::new(sigma, n, Side::Left)?;
    let order = (n + 1).min(sigma.ws.max_order);
    let step = C64::new(h, 0.0) * (lambda / lambda.norm());
    let up = parametrix_at(&plan, lambda + step, sector.m, n)?;
    let dn = parametrix_at(&plan, lambda - step, sector.m, n)?;
    let p = parametrix_at(&plan, lambda, sector.m, n)?;
    let deriv = up.sub(&dn).scale(C64::new(0.5, 0.0) / step);
    let prod = compose(&p, &p, order)?;
    let defect = deriv.sub(&prod);
    let margin = defect.margin.max(prod.margin);
    Ok(DefectReport::new(&defect.with_margin(margin), &prod.with_margin(margin)))
}

/// Symbol of `A^s` for real `s`: the identity at `s = 0`, the keyhole integral for `s < 0` and
/// `A^{s-k} A^k` otherwise.
pub fn operator_power<G: CompactGroup>(sigma: &Symbol<G>, sector: &Sector, s: f64, n: usize) -> Result<Symbol<G>> {
    if s == 0.0 {
        return Ok(Symbol::identity(sigma.ws.clone()));
    }
    operator_function(sigma, &HoloFunction::power(s), sector, n)
}

/// `A^s # A^t - A^{s+t}` at expansion order `n`, against `A^{s+t}`.
pub fn power_group_defect<G: CompactGroup>(sigma: &Symbol<G>, sector: &Sector, s: f64, t: f64, n: usize) -> Result<DefectReport> {
    let ord = n.min(sigma.ws.max_order);
    let a = operator_power(sigma, sector, s, n)?;
    let b = operator_power(sigma, sector, t, n)?;
    let ab = operator_power(sigma, sector, s + t, n)?;
    let prod = compose(&a, &b, ord)?;
    let defect = prod.sub(&ab);
    let margin = defect.margin.max(prod.margin).max(ab.margin);
    Ok(DefectReport::new(&defect.with_margin(margin), &ab.with_margin(margin)))
}

/// Pointwise check that `sigma` is Hermitian positive definite on every valid block; returns the
/// extreme eigenvalues.
pub fn positive_range<G: CompactGroup>(sigma: &Symbol<G>) -> Result<(f64, f64)> {
    let valid = sigma.valid_indices();
    let per: Vec<Result<(f64, f64)>> = (0..sigma.nx())
        .into_par_iter()
        .map(|ix| {
            let mut lo = f64::INFINITY;
            let mut hi = 0.0f64;
            for &k in &valid {
                let v = positive_check(sigma, ix, k, &sigma.block(ix, k))?;
                lo = lo.min(v[0]);
                hi = hi.max(*v.last().expect("nonempty"));
            }
            Ok((lo, hi))
        })
        .collect();
    let mut lo = f64::INFINITY;
    let mut hi = 0.0f64;
    for r in per {
        let (a, b) = r?;
        lo = lo.min(a);
        hi = hi.max(b);
    }
    Ok((lo, hi))
}
